//! Ordinary least squares with an intercept, solved through an SVD
//! pseudo-inverse so rank-deficient designs still get the minimum-norm fit.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::TabularDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict(&self, data: &TabularDataset) -> Vec<f64> {
        data.rows().map(|r| self.predict_row(r)).collect()
    }

    pub fn mse(&self, data: &TabularDataset) -> Result<f64> {
        crate::stats::mse(&self.predict(data), data.y()?)
    }
}

/// Least-squares fit of `y ≈ Xw + b` on a regression dataset.
pub fn fit_linear_regression(train: &TabularDataset) -> Result<LinearModel> {
    let y = train.y()?;
    if train.is_empty() {
        return Err(Error::InvalidParam("cannot fit an empty dataset"));
    }
    let d = train.n_features();
    let p = d + 1;
    let mut design = Vec::with_capacity(train.len() * p);
    for row in train.rows() {
        design.extend_from_slice(row);
        design.push(1.0);
    }
    let beta = lstsq(&design, train.len(), p, y);
    Ok(LinearModel { weights: beta[..d].to_vec(), intercept: beta[d] })
}

/// Singular values below `max(n, p) · σ_max · f64::EPSILON` are treated as zero.
pub fn pinv_tolerance(n: usize, p: usize, sigma_max: f64) -> f64 {
    n.max(p) as f64 * sigma_max * f64::EPSILON
}

/// Minimum-norm solution of `min ‖Aβ − y‖` for row-major `A` (`n × p`).
///
/// One-sided Jacobi SVD: columns of `A` are rotated pairwise until mutually
/// orthogonal, giving `A V = U Σ`; then `β = V Σ⁺ Uᵀ y`.
pub fn lstsq(a: &[f64], n: usize, p: usize, y: &[f64]) -> Vec<f64> {
    // column-major working copy
    let mut cols: Vec<Vec<f64>> = (0..p).map(|j| (0..n).map(|i| a[i * p + j]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..p).map(|j| {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        e
    }).collect();

    for _sweep in 0..60 {
        let mut rotated = false;
        for j in 0..p {
            for k in j + 1..p {
                let alpha: f64 = cols[j].iter().map(|x| x * x).sum();
                let beta: f64 = cols[k].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[j].iter().zip(&cols[k]).map(|(x, z)| x * z).sum();
                if gamma == 0.0 || gamma.abs() <= 1e-15 * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate(&mut cols, j, k, c, s);
                rotate(&mut v, j, k, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let sigmas: Vec<f64> = cols.iter().map(|c| libm::sqrt(c.iter().map(|x| x * x).sum())).collect();
    let sigma_max = sigmas.iter().cloned().fold(0.0, f64::max);
    let tol = pinv_tolerance(n, p, sigma_max);
    let mut beta = vec![0.0; p];
    for j in 0..p {
        let s = sigmas[j];
        if s <= tol || s == 0.0 {
            continue;
        }
        // u_j = cols[j] / s, coefficient (u_jᵀ y) / s
        let coef = cols[j].iter().zip(y).map(|(u, yi)| u * yi).sum::<f64>() / (s * s);
        for (b, vj) in beta.iter_mut().zip(&v[j]) {
            *b += coef * vj;
        }
    }
    beta
}

fn rotate(m: &mut [Vec<f64>], j: usize, k: usize, c: f64, s: f64) {
    let (left, right) = m.split_at_mut(k);
    for (x, z) in left[j].iter_mut().zip(right[0].iter_mut()) {
        let (a, b) = (*x, *z);
        *x = c * a - s * b;
        *z = s * a + c * b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Targets;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn dataset(features: Vec<f64>, d: usize, y: Vec<f64>) -> TabularDataset {
        TabularDataset::new(features, d, Targets::Regression(y)).unwrap()
    }

    // Independent route: normal equations with Gaussian elimination.
    fn normal_equations(x: &[f64], n: usize, d: usize, y: &[f64]) -> Vec<f64> {
        let p = d + 1;
        let row = |i: usize, j: usize| if j == d { 1.0 } else { x[i * d + j] };
        let mut m = vec![vec![0.0; p + 1]; p];
        for r in 0..p {
            for c in 0..p {
                m[r][c] = (0..n).map(|i| row(i, r) * row(i, c)).sum();
            }
            m[r][p] = (0..n).map(|i| row(i, r) * y[i]).sum();
        }
        for col in 0..p {
            let piv = (col..p).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
            m.swap(col, piv);
            for r in 0..p {
                if r != col {
                    let f = m[r][col] / m[col][col];
                    for c in col..=p {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
        (0..p).map(|r| m[r][p] / m[r][r]).collect()
    }

    #[test]
    fn exact_linear_data() {
        let mut rng = rng_from_seed(1);
        let d = 3;
        let x: Vec<f64> = (0..40 * d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let y: Vec<f64> = x.chunks(d).map(|r| 1.5 * r[0] - 2.0 * r[1] + 0.25 * r[2] + 3.0).collect();
        let ds = dataset(x, d, y);
        let m = fit_linear_regression(&ds).unwrap();
        assert!(m.mse(&ds).unwrap() <= 1e-16 * 100.0);
        assert!((m.intercept - 3.0).abs() < 1e-10);
        assert!((m.weights[1] + 2.0).abs() < 1e-10);
    }

    #[test]
    fn intercept_only() {
        let ds = dataset(vec![1.0, 2.0, 3.0, 4.0], 1, vec![7.0; 4]);
        let m = fit_linear_regression(&ds).unwrap();
        for p in m.predict(&ds) {
            assert!((p - 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_feature_is_rank_deficient_but_solvable() {
        let x = vec![2.0, 1.0, 2.0, 2.0, 2.0, 3.0, 2.0, 4.0];
        let y = vec![1.0, 3.0, 5.0, 7.0];
        let ds = dataset(x, 2, y.clone());
        let m = fit_linear_regression(&ds).unwrap();
        for (p, t) in m.predict(&ds).iter().zip(&y) {
            assert!((p - t).abs() < 1e-10);
        }
        // minimum norm: constant column and intercept share the offset 2a + b = -1
        assert!((2.0 * m.weights[0] + m.intercept + 1.0).abs() < 1e-10);
        assert!((m.weights[0] - 2.0 * m.intercept).abs() < 1e-10);
    }

    #[test]
    fn matches_normal_equations() {
        let mut rng = rng_from_seed(50);
        let (n, d) = (50, 4);
        let x: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
        let ds = dataset(x.clone(), d, y.clone());
        let m = fit_linear_regression(&ds).unwrap();
        let reference = normal_equations(&x, n, d, &y);
        let ours: Vec<f64> = m.weights.iter().copied().chain([m.intercept]).collect();
        for (a, b) in ours.iter().zip(&reference) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn fitted_weights_are_optimal() {
        let mut rng = rng_from_seed(8);
        let (n, d) = (60, 3);
        let x: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let ds = dataset(x, d, y);
        let m = fit_linear_regression(&ds).unwrap();
        let base = m.mse(&ds).unwrap();
        for _ in 0..100 {
            let mut p = m.clone();
            for w in p.weights.iter_mut() {
                *w += (rng.random::<f64>() - 0.5) * 1e-3;
            }
            p.intercept += (rng.random::<f64>() - 0.5) * 1e-3;
            assert!(p.mse(&ds).unwrap() >= base);
        }
    }

    #[test]
    fn rejects_labels() {
        let ds = TabularDataset::new(vec![1.0, 2.0], 1, Targets::Labels(vec![0, 1])).unwrap();
        assert!(fit_linear_regression(&ds).is_err());
    }
}
