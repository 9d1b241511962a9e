//! Joint optimization of the embedding and cluster centroids.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::loss::{clustering_regularizer, consistency_loss, soft_assign, target_distribution};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lambda: f64,
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Relative loss decrease below which training stops, measured over
    /// `convergence_window` iterations.
    pub convergence_tol: f64,
    pub convergence_window: usize,
    /// Iterations between target distribution refreshes.
    pub update_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            learning_rate: 0.05,
            max_iters: 300,
            convergence_tol: 1e-5,
            convergence_window: 10,
            update_interval: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub z: DMatrix<f64>,
    pub centroids: DMatrix<f64>,
    pub soft_assign: DMatrix<f64>,
    /// Total loss before training followed by one value per iteration.
    pub losses: Vec<f64>,
    pub converged: bool,
}

impl TrainOutcome {
    /// Hard labels by row-wise argmax of the soft assignment, ties to the
    /// lower cluster index.
    pub fn assignments(&self) -> Vec<usize> {
        self.soft_assign
            .row_iter()
            .map(|row| {
                let mut best = 0;
                for c in 1..row.len() {
                    if row[c] > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}

struct Eval {
    loss: f64,
    grad_z: DMatrix<f64>,
    grad_mu: DMatrix<f64>,
}

fn evaluate(
    a: &DMatrix<f64>,
    z: &DMatrix<f64>,
    mu: &DMatrix<f64>,
    p: &DMatrix<f64>,
    lambda: f64,
) -> Result<Eval> {
    let (cons, gz) = consistency_loss(a, z)?;
    let clus = clustering_regularizer(z, mu, p)?;
    Ok(Eval {
        loss: cons + lambda * clus.loss,
        grad_z: gz + clus.grad_z * lambda,
        grad_mu: clus.grad_centroids * lambda,
    })
}

const MAX_HALVINGS: usize = 40;

/// Gradient descent on `L = L_cons + λ·L_clus`.
///
/// Steps that would raise the loss are retried with a halved step size, and a
/// refreshed target is adopted only when it does not raise the loss, so the
/// recorded loss sequence is non-increasing. The step size recovers towards
/// the base rate after accepted steps.
pub fn train(
    a: &DMatrix<f64>,
    z0: DMatrix<f64>,
    centroids0: DMatrix<f64>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let mut z = z0;
    let mut mu = centroids0;
    let mut p = target_distribution(&soft_assign(&z, &mu));
    let mut cur = evaluate(a, &z, &mu, &p, config.lambda)?;
    let mut losses = vec![cur.loss];
    let mut lr = config.learning_rate;
    let mut converged = false;
    let window = config.convergence_window.max(1);

    for it in 1..=config.max_iters {
        if config.update_interval > 0 && it % config.update_interval == 0 {
            let p_new = target_distribution(&soft_assign(&z, &mu));
            let refreshed = evaluate(a, &z, &mu, &p_new, config.lambda)?;
            if refreshed.loss <= cur.loss {
                p = p_new;
                cur = refreshed;
            }
        }
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let z_try = &z - &cur.grad_z * lr;
            let mu_try = &mu - &cur.grad_mu * lr;
            let next = evaluate(a, &z_try, &mu_try, &p, config.lambda)?;
            if next.loss.is_finite() && next.loss <= cur.loss {
                z = z_try;
                mu = mu_try;
                cur = next;
                accepted = true;
                lr = (lr * 1.5).min(config.learning_rate);
                break;
            }
            lr *= 0.5;
        }
        losses.push(cur.loss);
        if !accepted {
            converged = true;
            break;
        }
        if it >= window {
            let before = losses[it - window];
            if before - cur.loss <= config.convergence_tol * before.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
    }
    let q = soft_assign(&z, &mu);
    Ok(TrainOutcome {
        z,
        centroids: mu,
        soft_assign: q,
        losses,
        converged,
    })
}

/// Top-`dim` eigenvectors of `M = D^-½ A D^-½`, each scaled by
/// `√(n·max(λ, 0))`, computed by subspace iteration on `M + I` followed by a
/// Rayleigh-Ritz step. Directions with non-positive eigenvalues collapse to
/// zero. Falls back to seeded random unit-variance entries when the basis
/// degenerates or every eigenvalue is non-positive.
pub fn spectral_init(a: &DMatrix<f64>, dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = a.nrows();
    let dim = dim.max(1);
    let half = 3f64.sqrt();
    let random = DMatrix::from_fn(n, dim, |_, _| rng.random_range(-half..half));
    if n == 0 {
        return random;
    }
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = a.row(i).sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let m = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    let mut shifted = m.clone();
    for i in 0..n {
        shifted[(i, i)] += 1.0;
    }
    let cols = dim.min(n);
    let mut basis = random.columns(0, cols).into_owned();
    if !orthonormalize(&mut basis) {
        return random;
    }
    for _ in 0..200 {
        let mut next = &shifted * &basis;
        if !orthonormalize(&mut next) {
            return random;
        }
        let change = (&next * next.transpose() - &basis * basis.transpose()).norm();
        basis = next;
        if change < 1e-9 {
            break;
        }
    }
    let ritz = SymmetricEigen::new(basis.transpose() * &m * &basis);
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| ritz.eigenvalues[y].total_cmp(&ritz.eigenvalues[x]));
    let vectors = &basis * &ritz.eigenvectors;
    let scale = n as f64;
    let mut out = DMatrix::zeros(n, dim);
    for (c, &j) in order.iter().enumerate() {
        let w = (scale * ritz.eigenvalues[j].max(0.0)).sqrt();
        out.column_mut(c).copy_from(&(vectors.column(j) * w));
    }
    if out.iter().all(|&x| x == 0.0) {
        return random;
    }
    out
}

/// Modified Gram-Schmidt in place; false on a rank-deficient input.
fn orthonormalize(m: &mut DMatrix<f64>) -> bool {
    for j in 0..m.ncols() {
        for k in 0..j {
            let proj = m.column(j).dot(&m.column(k));
            let ck = m.column(k).into_owned();
            let mut cj = m.column_mut(j);
            cj -= ck * proj;
        }
        let norm = m.column(j).norm();
        if norm < 1e-10 {
            return false;
        }
        let mut cj = m.column_mut(j);
        cj /= norm;
    }
    true
}
