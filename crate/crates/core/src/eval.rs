//! Group accuracy and purity of discovered clusters against labeled traffic.
//!
//! A cluster is correct only if its labeled members are exactly the full
//! request set of one endpoint and it holds nothing else. Unlabeled members
//! (injected interference) make a cluster incorrect but are excluded from
//! purity.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::refine::EndpointCluster;

pub type GroundTruth = BTreeMap<u64, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Labeled members equal one endpoint's full set, nothing else present.
    #[default]
    Exact,
    /// More than half of the cluster carries one label, and the cluster holds
    /// more than half of that label's records.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDiagnostic {
    pub cluster_id: usize,
    pub matched_endpoint: Option<String>,
    pub majority_label: Option<String>,
    /// Share of the cluster's labeled members carrying the majority label.
    pub majority_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub pga: f64,
    pub rga: f64,
    pub fga: f64,
    pub purity: f64,
    /// Ratios reported as 0 because their denominator was 0.
    pub undefined_metrics: Vec<String>,
    pub per_cluster: Vec<ClusterDiagnostic>,
    pub config_echo: serde_json::Value,
}

fn label_sets(truth: &GroundTruth) -> BTreeMap<&str, BTreeSet<u64>> {
    let mut out: BTreeMap<&str, BTreeSet<u64>> = BTreeMap::new();
    for (&id, label) in truth {
        out.entry(label.as_str()).or_default().insert(id);
    }
    out
}

/// The label a cluster reproduces under `mode`, if any.
fn cluster_match<'a>(
    cluster: &EndpointCluster,
    truth: &'a GroundTruth,
    sets: &BTreeMap<&str, BTreeSet<u64>>,
    mode: MatchMode,
) -> Option<&'a str> {
    let members: BTreeSet<u64> = cluster.member_ids.iter().copied().collect();
    if members.is_empty() {
        return None;
    }
    match mode {
        MatchMode::Exact => {
            let first = members.iter().next()?;
            let label = truth.get(first)?;
            let all_same = members.iter().all(|id| truth.get(id) == Some(label));
            (all_same && sets[label.as_str()] == members).then_some(label.as_str())
        }
        MatchMode::Lenient => {
            let (label, count) = majority(&members, truth)?;
            let total = sets[label].len();
            (2 * count > members.len() && 2 * count > total).then_some(label)
        }
    }
}

/// Most frequent label among `members`, ties to the smaller label.
fn majority<'a>(members: &BTreeSet<u64>, truth: &'a GroundTruth) -> Option<(&'a str, usize)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for id in members {
        if let Some(l) = truth.get(id) {
            *counts.entry(l.as_str()).or_default() += 1;
        }
    }
    let mut best: Option<(&str, usize)> = None;
    for (l, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((l, c));
        }
    }
    best
}

/// TP, FP and FN under exact-set matching. Each label is matched at most
/// once, by the first cluster reproducing it.
pub fn match_counts(clusters: &[EndpointCluster], truth: &GroundTruth) -> MatchCounts {
    match_counts_with(clusters, truth, MatchMode::Exact)
}

pub fn match_counts_with(
    clusters: &[EndpointCluster],
    truth: &GroundTruth,
    mode: MatchMode,
) -> MatchCounts {
    matches(clusters, truth, mode).0
}

fn matches<'a>(
    clusters: &[EndpointCluster],
    truth: &'a GroundTruth,
    mode: MatchMode,
) -> (MatchCounts, Vec<Option<&'a str>>) {
    let sets = label_sets(truth);
    let mut used: BTreeSet<&str> = BTreeSet::new();
    let mut per = Vec::with_capacity(clusters.len());
    for c in clusters {
        let m = cluster_match(c, truth, &sets, mode).filter(|l| used.insert(l));
        per.push(m);
    }
    let tp = used.len();
    let counts = MatchCounts {
        tp,
        fp: clusters.len() - tp,
        fn_: sets.len() - tp,
    };
    (counts, per)
}

/// Fraction of labeled records that share their cluster's majority label.
/// Labeled records that appear in no cluster count against purity.
pub fn purity(clusters: &[EndpointCluster], truth: &GroundTruth) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::NoLabeledData);
    }
    let hit: usize = clusters
        .iter()
        .map(|c| {
            let members: BTreeSet<u64> = c.member_ids.iter().copied().collect();
            majority(&members, truth).map_or(0, |(_, n)| n)
        })
        .sum();
    Ok(hit as f64 / truth.len() as f64)
}

fn ratio(num: usize, den: usize, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(name.to_string());
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Percentages from raw counts, with the names of undefined ratios.
pub fn group_accuracy(c: MatchCounts) -> (f64, f64, f64, Vec<String>) {
    let mut undefined = Vec::new();
    let pga = ratio(c.tp, c.tp + c.fp, "pga", &mut undefined);
    let rga = ratio(c.tp, c.tp + c.fn_, "rga", &mut undefined);
    let fga = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_, "fga", &mut undefined);
    (pga, rga, fga, undefined)
}

pub fn report(
    clusters: &[EndpointCluster],
    truth: &GroundTruth,
    mode: MatchMode,
    config_echo: serde_json::Value,
) -> Result<EvalReport> {
    let purity = purity(clusters, truth)?;
    let (counts, per) = matches(clusters, truth, mode);
    let (pga, rga, fga, undefined_metrics) = group_accuracy(counts);
    let per_cluster = clusters
        .iter()
        .zip(per)
        .enumerate()
        .map(|(i, (c, m))| {
            let members: BTreeSet<u64> = c.member_ids.iter().copied().collect();
            let labeled = members.iter().filter(|id| truth.contains_key(id)).count();
            let maj = majority(&members, truth);
            ClusterDiagnostic {
                cluster_id: i,
                matched_endpoint: m.map(str::to_string),
                majority_label: maj.map(|(l, _)| l.to_string()),
                majority_fraction: maj.map_or(0.0, |(_, n)| n as f64 / labeled as f64),
            }
        })
        .collect();
    Ok(EvalReport {
        tp: counts.tp,
        fp: counts.fp,
        fn_: counts.fn_,
        pga,
        rga,
        fga,
        purity,
        undefined_metrics,
        per_cluster,
        config_echo,
    })
}

pub const CSV_HEADER: &str = "dataset,noise_type,noise_ratio,seed,tp,fp,fn,pga,rga,fga,purity";

/// One CSV line (no trailing newline) matching [`CSV_HEADER`].
pub fn csv_row(dataset: &str, noise_type: &str, noise_ratio: f64, seed: u64, r: &EvalReport) -> String {
    format!(
        "{},{},{:.2},{},{},{},{},{:.2},{:.2},{:.2},{:.4}",
        csv_field(dataset),
        csv_field(noise_type),
        noise_ratio,
        seed,
        r.tp,
        r.fp,
        r.fn_,
        r.pga,
        r.rga,
        r.fga,
        r.purity
    )
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refine::Provenance;
    use crate::seed;
    use rand::Rng;

    fn cluster(ids: &[u64]) -> EndpointCluster {
        EndpointCluster {
            template: "/x".into(),
            method: "GET".into(),
            member_ids: ids.to_vec(),
            representative_paths: vec![],
            provenance: Provenance::Passthrough,
        }
    }

    fn truth(pairs: &[(u64, &str)]) -> GroundTruth {
        pairs.iter().map(|&(i, l)| (i, l.to_string())).collect()
    }

    #[test]
    fn perfect() {
        let t = truth(&[(0, "a"), (1, "a"), (2, "b"), (3, "c")]);
        let cs = [cluster(&[0, 1]), cluster(&[2]), cluster(&[3])];
        assert_eq!(match_counts(&cs, &t), MatchCounts { tp: 3, fp: 0, fn_: 0 });
        let r = report(&cs, &t, MatchMode::Exact, serde_json::Value::Null).unwrap();
        assert_eq!((r.pga, r.rga, r.fga, r.purity), (100.0, 100.0, 100.0, 1.0));
        assert!(r.undefined_metrics.is_empty());
    }

    #[test]
    fn one_endpoint_split() {
        // 13 endpoints, two records each; endpoint 0 is split in two.
        let mut pairs = Vec::new();
        for e in 0..13u64 {
            pairs.push((2 * e, format!("e{e}")));
            pairs.push((2 * e + 1, format!("e{e}")));
        }
        let t: GroundTruth = pairs.into_iter().collect();
        let mut cs = vec![cluster(&[0]), cluster(&[1])];
        for e in 1..13u64 {
            cs.push(cluster(&[2 * e, 2 * e + 1]));
        }
        let c = match_counts(&cs, &t);
        assert_eq!(c, MatchCounts { tp: 12, fp: 2, fn_: 1 });
        let (pga, rga, _, _) = group_accuracy(c);
        assert!((pga - 85.71).abs() < 0.005);
        assert!((rga - 92.31).abs() < 0.005);
    }

    #[test]
    fn hand_counts() {
        let (pga, rga, fga, u) = group_accuracy(MatchCounts { tp: 11, fp: 0, fn_: 2 });
        assert!((pga - 100.0).abs() < 0.01);
        assert!((rga - 84.62).abs() < 0.01);
        assert!((fga - 91.67).abs() < 0.01);
        assert!(u.is_empty());
    }

    #[test]
    fn interference_poisons_cluster() {
        let t = truth(&[(0, "a"), (1, "a")]);
        let cs = [cluster(&[0, 1, 99])];
        assert_eq!(match_counts(&cs, &t), MatchCounts { tp: 0, fp: 1, fn_: 1 });
        assert_eq!(purity(&cs, &t).unwrap(), 1.0);
    }

    #[test]
    fn purity_examples() {
        let t = truth(&[(0, "a"), (1, "a"), (2, "b"), (3, "b")]);
        assert_eq!(purity(&[cluster(&[0, 1, 2]), cluster(&[3])], &t).unwrap(), 0.75);
        let t4 = truth(&[(0, "a"), (1, "b"), (2, "c"), (3, "d")]);
        assert_eq!(purity(&[cluster(&[0, 1, 2, 3])], &t4).unwrap(), 0.25);
        assert!(matches!(purity(&[], &GroundTruth::new()), Err(Error::NoLabeledData)));
    }

    #[test]
    fn empty_clusters() {
        let t = truth(&[(0, "a")]);
        let r = report(&[], &t, MatchMode::Exact, serde_json::Value::Null).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (0, 0, 1));
        assert_eq!(r.fga, 0.0);
        assert_eq!(r.undefined_metrics, vec!["pga".to_string()]);
        assert_eq!(r.purity, 0.0);
    }

    #[test]
    fn duplicate_cluster_matches_once() {
        let t = truth(&[(0, "a")]);
        let cs = [cluster(&[0]), cluster(&[0])];
        assert_eq!(match_counts(&cs, &t), MatchCounts { tp: 1, fp: 1, fn_: 0 });
    }

    #[test]
    fn lenient_accepts_majority_overlap() {
        let t = truth(&[(0, "a"), (1, "a"), (2, "a"), (3, "b")]);
        let cs = [cluster(&[0, 1, 3]), cluster(&[2])];
        assert_eq!(match_counts(&cs, &t).tp, 0);
        let c = match_counts_with(&cs, &t, MatchMode::Lenient);
        assert_eq!(c, MatchCounts { tp: 1, fp: 1, fn_: 1 });
    }

    /// Straightforward recomputation used as an oracle.
    fn brute(clusters: &[Vec<u64>], t: &GroundTruth) -> (f64, f64, f64, f64) {
        let labels: BTreeSet<&String> = t.values().collect();
        let mut tp = 0;
        let mut matched: Vec<&String> = Vec::new();
        for c in clusters {
            for l in &labels {
                let want: Vec<u64> = t.iter().filter(|(_, v)| v == l).map(|(k, _)| *k).collect();
                let mut got = c.clone();
                got.sort();
                got.dedup();
                if got == want && !matched.contains(l) {
                    matched.push(l);
                    tp += 1;
                }
            }
        }
        let fp = clusters.len() - tp;
        let fn_ = labels.len() - tp;
        let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
        let mut pur = 0usize;
        for c in clusters {
            let mut best = 0;
            for l in &labels {
                best = best.max(c.iter().filter(|id| t.get(id) == Some(l)).count());
            }
            pur += best;
        }
        (
            pct(tp, tp + fp),
            pct(tp, tp + fn_),
            pct(2 * tp, 2 * tp + fp + fn_),
            pur as f64 / t.len() as f64,
        )
    }

    #[test]
    fn random_clusterings_match_oracle() {
        let mut rng = seed::rng(5, "eval");
        for _ in 0..200 {
            let n = rng.random_range(1..30u64);
            let labels = rng.random_range(1..6);
            let mut t = GroundTruth::new();
            for i in 0..n {
                if rng.random_bool(0.85) {
                    t.insert(i, format!("l{}", rng.random_range(0..labels)));
                }
            }
            if t.is_empty() {
                continue;
            }
            let k = rng.random_range(1..8usize);
            let mut cs = vec![Vec::new(); k];
            for i in 0..n {
                cs[rng.random_range(0..k)].push(i);
            }
            let cs: Vec<Vec<u64>> = cs.into_iter().filter(|c| !c.is_empty()).collect();
            let clusters: Vec<EndpointCluster> = cs.iter().map(|c| cluster(c)).collect();
            let r = report(&clusters, &t, MatchMode::Exact, serde_json::Value::Null).unwrap();
            let (p, rc, f, pu) = brute(&cs, &t);
            assert!((r.pga - p).abs() < 1e-9);
            assert!((r.rga - rc).abs() < 1e-9);
            assert!((r.fga - f).abs() < 1e-9);
            assert!((r.purity - pu).abs() < 1e-9);
            if r.pga > 0.0 && r.rga > 0.0 {
                let h = 2.0 * r.pga * r.rga / (r.pga + r.rga);
                assert!((h - r.fga).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn csv_format() {
        let t = truth(&[(0, "a")]);
        let r = report(&[cluster(&[0])], &t, MatchMode::Exact, serde_json::Value::Null).unwrap();
        assert_eq!(
            csv_row("synth", "clean", 0.0, 42, &r),
            "synth,clean,0.00,42,1,0,0,100.00,100.00,100.00,1.0000"
        );
        assert_eq!(CSV_HEADER.split(',').count(), csv_row("d", "x", 0.5, 1, &r).split(',').count());
    }
}
