//! End-to-end discovery: filter, normalize, mine, refine.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::denoise::{filter_traffic, DropReason, FilterConfig, FilterOutcome};
use crate::error::Result;
use crate::normalize::{normalize, NormalizedRequest};
use crate::record::Dataset;
use crate::refine::{extract_features, refine_group, EndpointCluster, Provenance, RefinerConfig};
use crate::template::{mine, MinerConfig, PathTemplate, TemplateGroup};

/// Stage switches for ablation runs. All off by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablations {
    pub disable_noise_filter: bool,
    pub disable_template_mining: bool,
    pub force_kmeans: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub filter: FilterConfig,
    pub miner: MinerConfig,
    pub refiner: RefinerConfig,
    pub ablations: Ablations,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        self.miner.validate()?;
        self.refiner.validate()
    }
}

/// Everything a run produces, including intermediate stages for dumps.
#[derive(Debug, Clone, Default)]
pub struct Discovery {
    pub clusters: Vec<EndpointCluster>,
    pub groups: Vec<TemplateGroup>,
    pub normalized: Vec<NormalizedRequest>,
    pub filter: FilterOutcome,
}

/// Run the pipeline.
///
/// With template mining disabled every kept request lands in a single group
/// whose template has method `*` and no segments. Clusters are sorted by
/// method, rendered template and smallest member id.
pub fn discover(dataset: &Dataset, config: &PipelineConfig) -> Result<Discovery> {
    config.validate()?;
    let ab = config.ablations;
    let filter = if ab.disable_noise_filter {
        FilterOutcome {
            kept: dataset.records.iter().map(|r| r.id).collect(),
            dropped: Vec::new(),
        }
    } else {
        filter_traffic(dataset, &config.filter)
    };

    let index = dataset.index();
    let normalized: Vec<NormalizedRequest> = filter
        .kept
        .iter()
        .map(|id| {
            let record = &dataset.records[index[id]];
            let mut nr = normalize(record);
            nr.feature_cache = Some(extract_features(&nr, record));
            nr
        })
        .collect();

    let groups = if ab.disable_template_mining {
        if normalized.is_empty() {
            Vec::new()
        } else {
            vec![TemplateGroup {
                template: PathTemplate::new("*", Vec::new()),
                member_ids: normalized.iter().map(|n| n.record_id).collect(),
                distinct_paths: normalized
                    .iter()
                    .map(|n| n.canonical_path())
                    .collect::<std::collections::HashSet<_>>()
                    .len(),
            }]
        }
    } else {
        mine(&normalized, &config.miner)
    };

    let refiner = RefinerConfig {
        force_kmeans: config.refiner.force_kmeans || ab.force_kmeans,
        ..config.refiner.clone()
    };
    let by_id: HashMap<u64, &NormalizedRequest> =
        normalized.iter().map(|n| (n.record_id, n)).collect();
    let mut clusters = Vec::new();
    for group in &groups {
        let members: Vec<NormalizedRequest> =
            group.member_ids.iter().map(|id| by_id[id].clone()).collect();
        clusters.extend(refine_group(group, &members, &refiner, config.seed));
    }
    sort_clusters(&mut clusters);
    Ok(Discovery {
        clusters,
        groups,
        normalized,
        filter,
    })
}

pub fn sort_clusters(clusters: &mut [EndpointCluster]) {
    clusters.sort_by(|a, b| {
        let min = |c: &EndpointCluster| c.member_ids.iter().copied().min();
        (&a.method, &a.template, min(a)).cmp(&(&b.method, &b.template, min(b)))
    });
}

/// Entry of the cluster document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEntry {
    pub method: String,
    pub template: String,
    #[serde(default)]
    pub member_count: usize,
    #[serde(default = "default_provenance")]
    pub provenance: Provenance,
    #[serde(default)]
    pub representative_paths: Vec<String>,
    pub member_ids: Vec<u64>,
}

fn default_provenance() -> Provenance {
    Provenance::Passthrough
}

impl From<&EndpointCluster> for ClusterEntry {
    fn from(c: &EndpointCluster) -> Self {
        Self {
            method: c.method.clone(),
            template: c.template.clone(),
            member_count: c.member_ids.len(),
            provenance: c.provenance,
            representative_paths: c.representative_paths.clone(),
            member_ids: c.member_ids.clone(),
        }
    }
}

impl From<ClusterEntry> for EndpointCluster {
    fn from(e: ClusterEntry) -> Self {
        Self {
            template: e.template,
            method: e.method,
            member_ids: e.member_ids,
            representative_paths: e.representative_paths,
            provenance: e.provenance,
        }
    }
}

pub fn cluster_document(clusters: &[EndpointCluster]) -> String {
    let entries: Vec<ClusterEntry> = clusters.iter().map(ClusterEntry::from).collect();
    serde_json::to_string_pretty(&entries).expect("plain data serializes") + "\n"
}

pub fn parse_cluster_document(text: &str) -> Result<Vec<EndpointCluster>> {
    let entries: Vec<ClusterEntry> = serde_json::from_str(text)
        .map_err(|e| crate::Error::Config(format!("cluster document: {e}")))?;
    Ok(entries.into_iter().map(EndpointCluster::from).collect())
}

#[derive(Serialize)]
struct TemplateEntry<'a> {
    method: &'a str,
    template: String,
    member_count: usize,
    distinct_paths: usize,
}

pub fn template_document(groups: &[TemplateGroup]) -> String {
    let entries: Vec<TemplateEntry> = groups
        .iter()
        .map(|g| TemplateEntry {
            method: &g.template.method,
            template: g.template.render(),
            member_count: g.member_ids.len(),
            distinct_paths: g.distinct_paths,
        })
        .collect();
    serde_json::to_string_pretty(&entries).expect("plain data serializes") + "\n"
}

/// `METHOD<TAB>path` per request, in input order.
pub fn normalized_lines(normalized: &[NormalizedRequest]) -> String {
    let mut out = String::new();
    for n in normalized {
        out.push_str(&n.method);
        out.push('\t');
        out.push_str(&n.canonical_path());
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct DroppedEntry {
    id: u64,
    reason: String,
}

/// Dropped requests and their reasons, one JSON object per line.
pub fn dropped_lines(dropped: &[(u64, DropReason)]) -> String {
    let mut out = String::new();
    for (id, reason) in dropped {
        let e = DroppedEntry {
            id: *id,
            reason: reason.to_string(),
        };
        out.push_str(&serde_json::to_string(&e).expect("plain data serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::HttpRecord;

    fn json(id: u64, method: &str, url: &str) -> HttpRecord {
        HttpRecord::new(id, method, url).with_content_type("application/json")
    }

    #[test]
    fn login_and_me() {
        let mut recs = Vec::new();
        for i in 0..5 {
            recs.push(json(i, "POST", "/api/v1/users/login").with_body(48, 2, 1));
            recs.push(json(i + 5, "GET", "/api/v1/user/me"));
        }
        let d = discover(&Dataset::new("t", recs), &PipelineConfig::default()).unwrap();
        assert_eq!(d.clusters.len(), 2);
        assert_eq!(d.clusters[0].method, "GET");
        assert_eq!(d.clusters[0].template, "/api/v1/user/me");
        assert_eq!(d.clusters[1].template, "/api/v1/users/login");
    }

    #[test]
    fn empty_dataset() {
        let d = discover(&Dataset::new("t", vec![]), &PipelineConfig::default()).unwrap();
        assert!(d.clusters.is_empty());
    }

    #[test]
    fn ablations_change_grouping() {
        let recs: Vec<HttpRecord> = (0..6)
            .map(|i| json(i, "GET", &format!("/api/{}/{i}", ["a", "b"][i as usize % 2])))
            .chain([HttpRecord::new(6, "GET", "/static/app.js")])
            .collect();
        let ds = Dataset::new("t", recs);
        let full = discover(&ds, &PipelineConfig::default()).unwrap();
        assert_eq!(full.groups.len(), 2);
        assert_eq!(full.filter.dropped.len(), 1);

        let mut cfg = PipelineConfig::default();
        cfg.ablations.disable_noise_filter = true;
        assert_eq!(discover(&ds, &cfg).unwrap().normalized.len(), 7);

        let mut cfg = PipelineConfig::default();
        cfg.ablations.disable_template_mining = true;
        let one = discover(&ds, &cfg).unwrap();
        assert_eq!(one.groups.len(), 1);
        assert_eq!(one.groups[0].template.method, "*");
    }

    #[test]
    fn cluster_document_round_trip() {
        let recs: Vec<HttpRecord> = (0..4).map(|i| json(i, "GET", &format!("/api/x/{i}"))).collect();
        let d = discover(&Dataset::new("t", recs), &PipelineConfig::default()).unwrap();
        let text = cluster_document(&d.clusters);
        assert_eq!(parse_cluster_document(&text).unwrap(), d.clusters);
        assert!(text.contains("\"member_count\": 4"));
    }
}
