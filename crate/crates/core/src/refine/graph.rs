//! Similarity graphs over scaled feature vectors.

use nalgebra::DMatrix;

/// Weighted adjacency with entries in `{0} ∪ [threshold, 1]`, symmetric, zero
/// diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    pub adjacency: DMatrix<f64>,
    pub edge_threshold: f64,
}

impl SimilarityGraph {
    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency.row(i).iter().filter(|&&w| w > 0.0).count()
    }

    /// Average number of neighbors per node.
    pub fn mean_degree(&self) -> f64 {
        let n = self.n();
        if n == 0 {
            return 0.0;
        }
        (0..n).map(|i| self.degree(i)).sum::<usize>() as f64 / n as f64
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut comp = Vec::new();
            while let Some(u) = stack.pop() {
                comp.push(u);
                for v in 0..n {
                    if !seen[v] && self.adjacency[(u, v)] > 0.0 {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

/// `(1 + cos) / 2`. Identical vectors score 1 (including two zero vectors); a
/// zero vector scores 0 against anything else.
pub fn similarity(a: &[f64], b: &[f64]) -> f64 {
    if a == b {
        return 1.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    ((1.0 + dot / (na * nb)) / 2.0).clamp(0.0, 1.0)
}

/// Keep pairwise similarities at or above `theta`.
pub fn build_graph<V: AsRef<[f64]>>(features: &[V], theta: f64) -> SimilarityGraph {
    let n = features.len();
    let mut adjacency = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let s = similarity(features[i].as_ref(), features[j].as_ref());
            if s >= theta {
                adjacency[(i, j)] = s;
                adjacency[(j, i)] = s;
            }
        }
    }
    SimilarityGraph {
        adjacency,
        edge_threshold: theta,
    }
}

/// Number of connected components, clamped to `[1, min(8, n)]`.
pub fn select_k(graph: &SimilarityGraph) -> usize {
    select_k_with(graph, 1, 8)
}

/// Like [`select_k`], counting only components with at least `min_size`
/// nodes and clamping to `max_k`.
pub fn select_k_with(graph: &SimilarityGraph, min_size: usize, max_k: usize) -> usize {
    let count = graph
        .components()
        .iter()
        .filter(|c| c.len() >= min_size)
        .count();
    count.clamp(1, max_k.min(graph.n()).max(1))
}
