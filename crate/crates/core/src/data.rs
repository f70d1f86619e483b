//! In-memory tabular datasets, splits, standardization, and synthetic tasks.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Regression(Vec<f64>),
    Labels(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Regression(v) => v.len(),
            Targets::Labels(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Targets as reals (labels are cast).
    pub fn as_f64(&self) -> Vec<f64> {
        match self {
            Targets::Regression(v) => v.clone(),
            Targets::Labels(v) => v.iter().map(|&l| l as f64).collect(),
        }
    }

    fn select(&self, indices: &[usize]) -> Targets {
        match self {
            Targets::Regression(v) => Targets::Regression(indices.iter().map(|&i| v[i]).collect()),
            Targets::Labels(v) => Targets::Labels(indices.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// `n × d` row-major features with one target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    n_features: usize,
    features: Vec<f64>,
    targets: Targets,
}

impl TabularDataset {
    pub fn new(features: Vec<f64>, n_features: usize, targets: Targets) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidParam("dataset needs at least one feature column"));
        }
        if features.len() != n_features * targets.len() {
            return Err(Error::LengthMismatch {
                expected: n_features * targets.len(),
                got: features.len(),
            });
        }
        if let Some(index) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if let Targets::Regression(y) = &targets {
            if let Some(index) = y.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index });
            }
        }
        Ok(TabularDataset { n_features, features, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_features)
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    /// Regression targets; labels are rejected.
    pub fn y(&self) -> Result<&[f64]> {
        match &self.targets {
            Targets::Regression(y) => Ok(y),
            Targets::Labels(_) => Err(Error::InvalidParam("dataset has class labels, not real targets")),
        }
    }

    pub fn labels(&self) -> Result<&[usize]> {
        match &self.targets {
            Targets::Labels(l) => Ok(l),
            Targets::Regression(_) => Err(Error::InvalidParam("dataset has real targets, not class labels")),
        }
    }

    /// Number of classes (`max label + 1`), 0 for regression data.
    pub fn n_classes(&self) -> usize {
        match &self.targets {
            Targets::Labels(l) => l.iter().max().map_or(0, |m| m + 1),
            Targets::Regression(_) => 0,
        }
    }

    pub fn subset(&self, indices: &[usize]) -> TabularDataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        TabularDataset { n_features: self.n_features, features, targets: self.targets.select(indices) }
    }

    /// Shuffled split with `round(train_fraction · n)` training rows.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<Split> {
        Split::new(self.len(), train_fraction, seed)
    }

    pub fn train_test(&self, train_fraction: f64, seed: u64) -> Result<(TabularDataset, TabularDataset)> {
        let split = self.split(train_fraction, seed)?;
        Ok((self.subset(&split.train), self.subset(&split.test)))
    }

    pub fn map_features(&mut self, mut f: impl FnMut(usize, &mut f64)) {
        let d = self.n_features;
        for (k, v) in self.features.iter_mut().enumerate() {
            f(k % d, v);
        }
    }
}

/// Disjoint train/test index sets covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn new(n: usize, train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidParam("train fraction must be in (0, 1)"));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_from_seed(seed));
        let n_train = libm::round(train_fraction * n as f64) as usize;
        let test = order.split_off(n_train.min(n));
        Ok(Split { train: order, test })
    }
}

/// Per-column affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    /// Column statistics of `data`; constant columns keep scale 1.
    pub fn fit(data: &TabularDataset) -> Self {
        let d = data.n_features();
        let n = data.len().max(1) as f64;
        let mut means = alloc::vec![0.0; d];
        for row in data.rows() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = alloc::vec![0.0; d];
        for row in data.rows() {
            for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let scales = vars
            .into_iter()
            .map(|v| {
                let sd = libm::sqrt(v / n);
                if sd > 0.0 { sd } else { 1.0 }
            })
            .collect();
        Standardizer { means, scales }
    }

    pub fn apply(&self, data: &mut TabularDataset) {
        data.map_features(|j, v| *v = (*v - self.means[j]) / self.scales[j]);
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.means).zip(&self.scales) {
            *v = (*v - m) / s;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressionKind {
    /// `f(x) = cos(2θ(x, e₀))`, a smooth function of direction in `[-1, 1]`.
    SmoothAngular,
    /// `f(x) = +1` if `x₀ ≥ 0`, else `-1`.
    Step,
    /// `f(x) = ⟨w, x⟩ + 0.5` with `w ~ N(0, I)` drawn from the seed.
    Linear,
}

impl RegressionKind {
    /// Noise-free response bound; `None` when unbounded.
    pub fn bound(self) -> Option<f64> {
        match self {
            RegressionKind::SmoothAngular | RegressionKind::Step => Some(1.0),
            RegressionKind::Linear => None,
        }
    }
}

/// `y = f(x) + ε` with `x ~ N(0, I_d)` and `ε ~ N(0, noise²)`.
pub fn synth_regression(kind: RegressionKind, n: usize, d: usize, noise: f64, seed: u64) -> Result<TabularDataset> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParam("synthetic data needs n >= 1 and d >= 1"));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidParam("noise must be a finite non-negative number"));
    }
    let mut rng = rng_from_seed(seed);
    let slope: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let eps = Normal::new(0.0, noise).map_err(|_| Error::InvalidParam("bad noise"))?;
    let mut features = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let f = match kind {
            RegressionKind::SmoothAngular => {
                let norm2: f64 = x.iter().map(|v| v * v).sum();
                if norm2 > 0.0 { 2.0 * x[0] * x[0] / norm2 - 1.0 } else { 0.0 }
            }
            RegressionKind::Step => if x[0] >= 0.0 { 1.0 } else { -1.0 },
            RegressionKind::Linear => 0.5 + x.iter().zip(&slope).map(|(a, b)| a * b).sum::<f64>(),
        };
        let noise_draw = if noise > 0.0 { eps.sample(&mut rng) } else { 0.0 };
        y.push(f + noise_draw);
        features.extend_from_slice(&x);
    }
    TabularDataset::new(features, d, Targets::Regression(y))
}

/// Two isotropic Gaussians at `±(separation/2)·u`, `u = (1, …, 1)/√d`, equal
/// class priors, and each label flipped with probability `label_noise`.
pub fn synth_classification(
    n: usize,
    d: usize,
    separation: f64,
    label_noise: f64,
    seed: u64,
) -> Result<TabularDataset> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParam("synthetic data needs n >= 1 and d >= 1"));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::InvalidParam("separation must be finite and non-negative"));
    }
    if !(0.0..=0.5).contains(&label_noise) {
        return Err(Error::InvalidParam("label_noise must be in [0, 0.5]"));
    }
    let mut rng = rng_from_seed(seed);
    let offset = separation / 2.0 / libm::sqrt(d as f64);
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let class = usize::from(rng.random::<bool>());
        let sign = if class == 1 { 1.0 } else { -1.0 };
        for _ in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            features.push(z + sign * offset);
        }
        let flip = rng.random::<f64>() < label_noise;
        labels.push(if flip { 1 - class } else { class });
    }
    TabularDataset::new(features, d, Targets::Labels(labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(TabularDataset::new(vec![1.0; 5], 2, Targets::Regression(vec![0.0; 3])).is_err());
        assert!(TabularDataset::new(vec![1.0, f64::NAN], 2, Targets::Regression(vec![0.0])).is_err());
        assert!(TabularDataset::new(vec![1.0, 2.0], 2, Targets::Regression(vec![f64::INFINITY])).is_err());
        assert!(TabularDataset::new(vec![], 0, Targets::Regression(vec![])).is_err());
    }

    #[test]
    fn split_is_disjoint_covering_and_deterministic() {
        let a = Split::new(101, 0.9, 5).unwrap();
        let b = Split::new(101, 0.9, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.train.len(), 91);
        let mut all: Vec<usize> = a.train.iter().chain(&a.test).copied().collect();
        all.sort();
        assert_eq!(all, (0..101).collect::<Vec<_>>());
        assert_ne!(Split::new(101, 0.9, 6).unwrap(), a);
        assert!(Split::new(10, 1.0, 0).is_err());
    }

    #[test]
    fn standardizer_centers_and_scales() {
        let mut ds = TabularDataset::new(
            vec![1.0, 5.0, 3.0, 5.0, 5.0, 5.0],
            2,
            Targets::Regression(vec![0.0; 3]),
        )
        .unwrap();
        let st = Standardizer::fit(&ds);
        assert_eq!(st.means, vec![3.0, 5.0]);
        assert_eq!(st.scales[1], 1.0);
        st.apply(&mut ds);
        let col0: Vec<f64> = ds.rows().map(|r| r[0]).collect();
        assert!((col0.iter().sum::<f64>()).abs() < 1e-12);
        assert!((col0.iter().map(|v| v * v).sum::<f64>() / 3.0 - 1.0).abs() < 1e-12);
        assert!(ds.rows().all(|r| r[1] == 0.0));
    }

    #[test]
    fn synth_regression_is_reproducible_and_bounded() {
        let a = synth_regression(RegressionKind::Step, 50, 3, 0.0, 9).unwrap();
        let b = synth_regression(RegressionKind::Step, 50, 3, 0.0, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.y().unwrap().iter().all(|y| y.abs() == 1.0));
        let s = synth_regression(RegressionKind::SmoothAngular, 500, 4, 0.0, 1).unwrap();
        assert!(s.y().unwrap().iter().all(|y| y.abs() <= 1.0));
        for (row, y) in s.rows().zip(s.y().unwrap()) {
            let norm2: f64 = row.iter().map(|v| v * v).sum();
            let cos = row[0] / libm::sqrt(norm2);
            assert!((y - libm::cos(2.0 * libm::acos(cos))).abs() < 1e-9);
        }
    }

    #[test]
    fn synth_noise_has_zero_mean() {
        let n = 100_000;
        let sigma = 0.5;
        let noisy = synth_regression(RegressionKind::Step, n, 2, sigma, 3).unwrap();
        let mean_eps: f64 = noisy
            .rows()
            .zip(noisy.y().unwrap())
            .map(|(r, y)| y - if r[0] >= 0.0 { 1.0 } else { -1.0 })
            .sum::<f64>()
            / n as f64;
        assert!(mean_eps.abs() <= 3.0 * sigma / libm::sqrt(n as f64));
    }

    #[test]
    fn synth_classification_balance_and_noise() {
        let n = 20_000;
        let ds = synth_classification(n, 4, 3.0, 0.0, 1).unwrap();
        let ones = ds.labels().unwrap().iter().filter(|&&l| l == 1).count() as f64;
        // 4 binomial standard deviations
        assert!((ones - n as f64 / 2.0).abs() <= 4.0 * libm::sqrt(n as f64 * 0.25));
        assert_eq!(ds.n_classes(), 2);
        let clean = synth_classification(n, 4, 50.0, 0.0, 2).unwrap();
        let noisy = synth_classification(n, 4, 50.0, 0.1, 2).unwrap();
        // with huge separation the sign of the projection recovers the clean class
        let agree = |ds: &TabularDataset| {
            ds.rows()
                .zip(ds.labels().unwrap())
                .filter(|(r, &l)| usize::from(r.iter().sum::<f64>() > 0.0) == l)
                .count() as f64
                / n as f64
        };
        assert_eq!(agree(&clean), 1.0);
        let acc = agree(&noisy);
        assert!((acc - 0.9).abs() < 0.01, "accuracy ceiling {acc}");
    }
}
