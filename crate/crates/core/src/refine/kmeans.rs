//! Lloyd's k-means with farthest-point initialization.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Pick up to `k` seeds from `candidates`: a random first pick, then the
/// candidate farthest from all chosen seeds (ties to the earliest).
pub fn farthest_point_seeds<V: AsRef<[f64]>>(
    points: &[V],
    candidates: &[usize],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    if candidates.is_empty() || k == 0 {
        return Vec::new();
    }
    let mut seeds = vec![candidates[rng.random_range(0..candidates.len())]];
    let mut nearest: Vec<f64> = candidates
        .iter()
        .map(|&c| dist2(points[c].as_ref(), points[seeds[0]].as_ref()))
        .collect();
    while seeds.len() < k {
        let (best, &d) = nearest
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |acc, (i, d)| if *d > *acc.1 { (i, d) } else { acc });
        if d <= 0.0 {
            break;
        }
        let s = candidates[best];
        seeds.push(s);
        for (slot, &c) in nearest.iter_mut().zip(candidates) {
            *slot = slot.min(dist2(points[c].as_ref(), points[s].as_ref()));
        }
    }
    seeds
}

/// Cluster labels in `0..k'` with `k' ≤ k`; clusters left empty are dropped
/// and labels renumbered by first occurrence.
pub fn kmeans<V: AsRef<[f64]>>(
    points: &[V],
    k: usize,
    max_iters: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let all: Vec<usize> = (0..n).collect();
    let mut centers: Vec<Vec<f64>> = farthest_point_seeds(points, &all, k.max(1), rng)
        .into_iter()
        .map(|i| points[i].as_ref().to_vec())
        .collect();
    let dim = centers[0].len();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iters {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = nearest_center(p.as_ref(), &centers);
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p.as_ref()) {
                *s += x;
            }
        }
        for (c, (sum, &count)) in sums.into_iter().zip(&counts).enumerate() {
            if count > 0 {
                centers[c] = sum.into_iter().map(|s| s / count as f64).collect();
            }
        }
    }
    renumber(&labels)
}

fn nearest_center(p: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = dist2(p, center);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Relabel so labels appear as `0, 1, 2, …` in order of first occurrence.
pub fn renumber(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn separates_two_blobs() {
        let mut pts = Vec::new();
        for i in 0..5 {
            pts.push(vec![0.0 + i as f64 * 0.01, 0.0]);
        }
        for i in 0..5 {
            pts.push(vec![1.0, 1.0 + i as f64 * 0.01]);
        }
        let labels = kmeans(&pts, 2, 50, &mut seed::rng(1, "t"));
        assert!(labels[..5].iter().all(|&l| l == labels[0]));
        assert!(labels[5..].iter().all(|&l| l == labels[5]));
        assert_ne!(labels[0], labels[5]);
    }

    #[test]
    fn identical_points_give_one_cluster() {
        let pts = vec![vec![0.5, 0.5]; 6];
        let labels = kmeans(&pts, 3, 50, &mut seed::rng(1, "t"));
        assert!(labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn renumbering() {
        assert_eq!(renumber(&[4, 4, 1, 4, 7]), vec![0, 0, 1, 0, 2]);
    }
}
