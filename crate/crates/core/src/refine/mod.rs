//! Behavioral refinement of template groups.
//!
//! Members of a group share a path shape but may still be distinct
//! operations (listing versus searching, creating versus triggering an
//! action). Each member gets a small feature vector; similar members are
//! linked in a graph, an embedding is trained to reproduce that graph while
//! being pulled towards cluster centroids, and the resulting soft assignment
//! decides the split. Groups too small or too sparse for the graph fall back
//! to k-means on the scaled features.

pub mod features;
pub mod graph;
pub mod kmeans;
pub mod loss;
pub mod train;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normalize::NormalizedRequest;
use crate::seed;
use crate::template::{PathTemplate, TemplateGroup};

pub use features::{extract_features, min_max_scale, FeatureVector};
pub use graph::{build_graph, select_k, similarity, SimilarityGraph};
pub use loss::{clustering_regularizer, consistency_loss, soft_assign, target_distribution};
pub use train::{spectral_init, train, TrainConfig, TrainOutcome};

/// How a cluster's membership was decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    GraphRefined,
    KmeansFallback,
    Passthrough,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::GraphRefined => "graph_refined",
            Self::KmeansFallback => "kmeans_fallback",
            Self::Passthrough => "passthrough",
        })
    }
}

/// One discovered endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointCluster {
    pub template: String,
    pub method: String,
    pub member_ids: Vec<u64>,
    pub representative_paths: Vec<String>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinerConfig {
    pub embedding_dim: usize,
    pub lambda: f64,
    /// Minimum similarity for an edge.
    pub theta: f64,
    pub learning_rate: f64,
    pub max_iters: usize,
    pub convergence_tol: f64,
    pub update_interval: usize,
    /// The graph route needs at least this many members...
    pub min_graph_nodes: usize,
    /// ...and at least this mean degree.
    pub min_mean_degree: f64,
    pub max_k: usize,
    pub kmeans_max_iters: usize,
    /// Groups smaller than this are emitted unchanged.
    pub passthrough_below: usize,
    /// A component counts towards `k` only if it has at least
    /// `max(min_component_size, ⌈min_component_fraction·n⌉)` members.
    pub min_component_size: usize,
    pub min_component_fraction: f64,
    /// Constant appended to scaled features before measuring similarity, so
    /// a member sitting at the minimum of every column is not a zero vector.
    pub anchor: f64,
    pub force_kmeans: bool,
    pub max_representatives: usize,
}

impl Default for RefinerConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 8,
            lambda: 0.1,
            theta: 0.85,
            learning_rate: 0.05,
            max_iters: 300,
            convergence_tol: 1e-5,
            update_interval: 20,
            min_graph_nodes: 10,
            min_mean_degree: 2.0,
            max_k: 8,
            kmeans_max_iters: 50,
            passthrough_below: 3,
            min_component_size: 3,
            min_component_fraction: 0.1,
            anchor: 1.0,
            force_kmeans: false,
            max_representatives: 3,
        }
    }
}

impl RefinerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.theta) {
            return bad("theta must lie in [0, 1]");
        }
        // Negated so that NaN is rejected too.
        if !(self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.embedding_dim == 0 || self.max_k == 0 {
            return bad("embedding_dim and max_k must be positive");
        }
        if !self.anchor.is_finite() || self.anchor < 0.0 {
            return bad("anchor must be a non-negative number");
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lambda: self.lambda,
            learning_rate: self.learning_rate,
            max_iters: self.max_iters,
            convergence_tol: self.convergence_tol,
            convergence_window: 10,
            update_interval: self.update_interval,
        }
    }
}

/// Split a template group into endpoint clusters.
///
/// `members` must follow `group.member_ids` order. Members without cached
/// features contribute their path-derived features only. Clusters cover the
/// group exactly and are ordered by their first member.
pub fn refine_group(
    group: &TemplateGroup,
    members: &[NormalizedRequest],
    config: &RefinerConfig,
    seed: u64,
) -> Vec<EndpointCluster> {
    debug_assert_eq!(group.member_ids.len(), members.len());
    let n = members.len();
    if n == 0 {
        return Vec::new();
    }
    let all = || vec![0usize; n];
    if n < config.passthrough_below {
        return build_clusters(&group.template, members, &all(), Provenance::Passthrough, config);
    }
    let raw: Vec<FeatureVector> = members
        .iter()
        .map(|m| m.feature_cache.unwrap_or_else(|| features::path_features(m)))
        .collect();
    let scaled = min_max_scale(&raw);
    let anchored: Vec<Vec<f64>> = scaled
        .iter()
        .map(|f| {
            let mut v = f.0.to_vec();
            v.push(config.anchor);
            v
        })
        .collect();
    let graph = build_graph(&anchored, config.theta);
    let components = graph.components();
    let min_size = config
        .min_component_size
        .max((config.min_component_fraction * n as f64).ceil() as usize)
        .max(1);
    let substantial: Vec<&Vec<usize>> = components.iter().filter(|c| c.len() >= min_size).collect();

    let graph_route = !config.force_kmeans
        && n >= config.min_graph_nodes
        && graph.mean_degree() >= config.min_mean_degree;
    let provenance = if graph_route {
        Provenance::GraphRefined
    } else {
        Provenance::KmeansFallback
    };
    // The graph route counts only substantial components and attaches the
    // rest afterwards; k-means takes every component as a cluster.
    let k = if graph_route {
        substantial.len()
    } else {
        components.len()
    }
    .clamp(1, config.max_k.min(n));
    if k == 1 {
        return build_clusters(&group.template, members, &all(), provenance, config);
    }

    let mut rng = seed::rng(seed, &format!("refine {} {}", group.template.method, group.template.render()));
    let labels = if graph_route {
        let core: Vec<usize> = substantial.iter().flat_map(|c| c.iter().copied()).collect();
        graph_labels(&graph, &anchored, &core, k, config, &mut rng)
    } else {
        let points: Vec<&[f64]> = scaled.iter().map(|f| f.as_slice()).collect();
        kmeans::kmeans(&points, k, config.kmeans_max_iters, &mut rng)
    };
    build_clusters(&group.template, members, &labels, provenance, config)
}

fn graph_labels(
    graph: &SimilarityGraph,
    anchored: &[Vec<f64>],
    core: &[usize],
    k: usize,
    config: &RefinerConfig,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<usize> {
    let n = graph.n();
    let z0 = spectral_init(&graph.adjacency, config.embedding_dim, rng);
    let rows: Vec<Vec<f64>> = z0.row_iter().map(|r| r.iter().copied().collect()).collect();
    let seeds = kmeans::farthest_point_seeds(&rows, core, k, rng);
    let mu0 = DMatrix::from_fn(seeds.len(), z0.ncols(), |c, j| z0[(seeds[c], j)]);
    let trained = match train(&graph.adjacency, z0, mu0, &config.train_config()) {
        Ok(t) => t,
        Err(_) => return vec![0; n],
    };
    let hard = trained.assignments();
    let mut is_core = vec![false; n];
    for &i in core {
        is_core[i] = true;
    }
    let mut labels = hard.clone();
    for i in 0..n {
        if is_core[i] {
            continue;
        }
        // Minor members follow their most similar core member.
        let mut best = None;
        let mut best_s = f64::NEG_INFINITY;
        for &j in core {
            let s = similarity(&anchored[i], &anchored[j]);
            if s > best_s {
                best_s = s;
                best = Some(j);
            }
        }
        if let Some(j) = best {
            labels[i] = hard[j];
        }
    }
    kmeans::renumber(&labels)
}

fn build_clusters(
    template: &PathTemplate,
    members: &[NormalizedRequest],
    labels: &[usize],
    provenance: Provenance,
    config: &RefinerConfig,
) -> Vec<EndpointCluster> {
    let labels = kmeans::renumber(labels);
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let rendered = template.render();
    let mut out: Vec<EndpointCluster> = (0..k)
        .map(|_| EndpointCluster {
            template: rendered.clone(),
            method: template.method.clone(),
            member_ids: Vec::new(),
            representative_paths: Vec::new(),
            provenance,
        })
        .collect();
    for (m, &l) in members.iter().zip(&labels) {
        let c = &mut out[l];
        c.member_ids.push(m.record_id);
        if c.representative_paths.len() < config.max_representatives {
            let p = m.canonical_path();
            if !c.representative_paths.contains(&p) {
                c.representative_paths.push(p);
            }
        }
    }
    out
}
