//! Objective terms and their analytic gradients.

use nalgebra::DMatrix;

use crate::denoise::sigmoid;
use crate::error::{Error, Result};

/// `‖A − σ(Z Zᵀ)‖²_F` and its gradient with respect to `Z`.
pub fn consistency_loss(a: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    let n = z.nrows();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::Dimension(format!(
            "adjacency is {}x{}, embedding has {} rows",
            a.nrows(),
            a.ncols(),
            n
        )));
    }
    let s = z * z.transpose();
    let mut loss = 0.0;
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let sig = sigmoid(s[(i, j)]);
            let r = sig - a[(i, j)];
            loss += r * r;
            w[(i, j)] = r * sig * (1.0 - sig);
        }
    }
    // W is symmetric, so dL/dZ = 2 (W + Wᵀ) Z = 4 W Z.
    Ok((loss, (w * z) * 4.0))
}

/// Student-t soft assignment with one degree of freedom, rows summing to 1.
pub fn soft_assign(z: &DMatrix<f64>, centroids: &DMatrix<f64>) -> DMatrix<f64> {
    let kernel = kernel_matrix(z, centroids);
    let mut q = kernel;
    for mut row in q.row_iter_mut() {
        let sum: f64 = row.iter().sum();
        row /= sum;
    }
    q
}

fn kernel_matrix(z: &DMatrix<f64>, centroids: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = (z.nrows(), centroids.nrows());
    DMatrix::from_fn(n, k, |i, c| {
        let d2 = (z.row(i) - centroids.row(c)).norm_squared();
        1.0 / (1.0 + d2)
    })
}

/// Sharpened target `p_ic ∝ q_ic² / Σ_i q_ic`, rows summing to 1.
pub fn target_distribution(q: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = q.shape();
    let freq: Vec<f64> = (0..k).map(|c| q.column(c).sum()).collect();
    let mut p = DMatrix::from_fn(n, k, |i, c| {
        if freq[c] > 0.0 {
            q[(i, c)] * q[(i, c)] / freq[c]
        } else {
            0.0
        }
    });
    for mut row in p.row_iter_mut() {
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            row /= sum;
        }
    }
    p
}

/// `KL(P ‖ Q)` with zero-probability terms of `P` contributing nothing.
pub fn kl_divergence(p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    p.iter()
        .zip(q.iter())
        .filter(|(&pv, _)| pv > 0.0)
        .map(|(&pv, &qv)| pv * (pv / qv.max(f64::MIN_POSITIVE)).ln())
        .sum()
}

/// Value and gradients of the clustering term for a fixed target.
#[derive(Debug, Clone)]
pub struct ClusterTerm {
    pub loss: f64,
    pub soft_assign: DMatrix<f64>,
    pub grad_z: DMatrix<f64>,
    pub grad_centroids: DMatrix<f64>,
}

/// `KL(P ‖ Q(Z, μ))` where `target` is `P`, held constant.
pub fn clustering_regularizer(
    z: &DMatrix<f64>,
    centroids: &DMatrix<f64>,
    target: &DMatrix<f64>,
) -> Result<ClusterTerm> {
    let (n, d) = z.shape();
    let k = centroids.nrows();
    if centroids.ncols() != d {
        return Err(Error::Dimension(format!(
            "centroids have {} columns, embedding has {}",
            centroids.ncols(),
            d
        )));
    }
    if target.shape() != (n, k) {
        return Err(Error::Dimension(format!(
            "target is {:?}, expected ({n}, {k})",
            target.shape()
        )));
    }
    let kernel = kernel_matrix(z, centroids);
    let mut q = kernel.clone();
    for mut row in q.row_iter_mut() {
        let sum: f64 = row.iter().sum();
        row /= sum;
    }
    let loss = kl_divergence(target, &q);
    let mut grad_z = DMatrix::zeros(n, d);
    let mut grad_centroids = DMatrix::zeros(k, d);
    for i in 0..n {
        for c in 0..k {
            let coef = 2.0 * kernel[(i, c)] * (target[(i, c)] - q[(i, c)]);
            let diff = z.row(i) - centroids.row(c);
            let mut gz = grad_z.row_mut(i);
            gz += &diff * coef;
            let mut gc = grad_centroids.row_mut(c);
            gc -= &diff * coef;
        }
    }
    Ok(ClusterTerm {
        loss,
        soft_assign: q,
        grad_z,
        grad_centroids,
    })
}
