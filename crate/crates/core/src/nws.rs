//! The Nadaraya-Watson sketch.
//!
//! Two RACE arrays share one list of SRP hashers. The top array accumulates
//! responses `y_i` (clipped to `[-B, B]`), the bottom array accumulates a count
//! of one per point. Their aggregated retrievals estimate the numerator
//! `g_t(q) = Σ y_i k(q, x_i)` and denominator `g_b(q) = Σ k(q, x_i)` of the
//! kernel regressor, and `query` returns the ratio. Each array is aggregated on
//! its own before dividing; per-row ratios are biased and not offered.

use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::Estimator;
use crate::lsh::{check_input, collision_kernel, spawn_functions, LshFamilySpec, SrpHash};
use crate::race::RaceSketch;

/// Default response bound for the loss-proxy use case.
pub const DEFAULT_Y_BOUND: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NwConfig {
    pub rows: usize,
    pub y_bound: f64,
    #[serde(default)]
    pub estimator: Estimator,
}

impl NwConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 {
            return Err(Error::InvalidParam("rows must be >= 1"));
        }
        if !(self.y_bound.is_finite() && self.y_bound > 0.0) {
            return Err(Error::InvalidParam("y_bound must be positive and finite"));
        }
        self.estimator.validate(self.rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NwSketch {
    top: RaceSketch,
    bottom: RaceSketch,
    y_bound: f64,
    estimator: Estimator,
}

impl NwSketch {
    pub fn new(spec: LshFamilySpec, config: NwConfig) -> Result<Self> {
        config.validate()?;
        let hashers: Arc<[SrpHash]> = spawn_functions(&spec, config.rows)?.into();
        Ok(NwSketch {
            top: RaceSketch::with_hashers(spec, hashers.clone()),
            bottom: RaceSketch::with_hashers(spec, hashers),
            y_bound: config.y_bound,
            estimator: config.estimator,
        })
    }

    /// Builds a sketch by inserting every pair in order.
    pub fn construct<'a, I>(data: I, spec: LshFamilySpec, config: NwConfig) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        let mut sketch = NwSketch::new(spec, config)?;
        for (x, y) in data {
            sketch.insert(x, y)?;
        }
        Ok(sketch)
    }

    pub(crate) fn from_parts(
        top: RaceSketch,
        bottom: RaceSketch,
        y_bound: f64,
        estimator: Estimator,
    ) -> Result<Self> {
        if !top.is_compatible(&bottom) {
            return Err(Error::Incompatible("top and bottom arrays differ in shape or seed"));
        }
        if top.insert_count() != bottom.insert_count() {
            return Err(Error::Incompatible("top and bottom insert counts differ"));
        }
        let config = NwConfig { rows: top.rows(), y_bound, estimator };
        config.validate()?;
        // Share one hasher list between the halves.
        let bottom = RaceSketch::from_parts(
            *bottom.spec(),
            top.hashers().clone(),
            bottom.cells().to_vec(),
            bottom.insert_count(),
        );
        Ok(NwSketch { top, bottom, y_bound, estimator })
    }

    pub fn spec(&self) -> &LshFamilySpec {
        self.top.spec()
    }

    pub fn rows(&self) -> usize {
        self.top.rows()
    }

    pub fn y_bound(&self) -> f64 {
        self.y_bound
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator
    }

    pub fn set_estimator(&mut self, estimator: Estimator) -> Result<()> {
        estimator.validate(self.rows())?;
        self.estimator = estimator;
        Ok(())
    }

    pub fn config(&self) -> NwConfig {
        NwConfig { rows: self.rows(), y_bound: self.y_bound, estimator: self.estimator }
    }

    /// Weighted array `S_t`.
    pub fn top(&self) -> &RaceSketch {
        &self.top
    }

    /// Count array `S_b`.
    pub fn bottom(&self) -> &RaceSketch {
        &self.bottom
    }

    pub fn len(&self) -> u64 {
        self.bottom.insert_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clip(&self, y: f64) -> f64 {
        y.clamp(-self.y_bound, self.y_bound)
    }

    pub fn insert(&mut self, x: &[f64], y: f64) -> Result<()> {
        if !y.is_finite() {
            return Err(Error::NonFinite { index: 0 });
        }
        let buckets = self.top.buckets(x)?;
        self.top.increment_buckets(&buckets, self.clip(y))?;
        self.bottom.increment_buckets(&buckets, 1.0)
    }

    /// Aggregated `(top, bottom)` retrievals for `q`.
    pub fn query_parts(&self, q: &[f64]) -> Result<(f64, f64)> {
        let buckets = self.top.buckets(q)?;
        let top = self.estimator.aggregate(&self.top.retrieve_buckets(&buckets)?)?;
        let bottom = self.estimator.aggregate(&self.bottom.retrieve_buckets(&buckets)?)?;
        Ok((top, bottom))
    }

    /// Estimated regression value at `q`; 0 when the aggregated count is not positive.
    pub fn query(&self, q: &[f64]) -> Result<f64> {
        let (top, bottom) = match self.estimator {
            // The 1/R factors of the two means cancel; dividing the sums avoids
            // their rounding.
            Estimator::Mean | Estimator::MedianOfMeans { groups: 1 } => {
                let buckets = self.top.buckets(q)?;
                let sum = |s: &RaceSketch| -> Result<f64> {
                    Ok(s.retrieve_buckets(&buckets)?.iter().sum())
                };
                (sum(&self.top)?, sum(&self.bottom)?)
            }
            _ => self.query_parts(q)?,
        };
        Ok(if bottom > 0.0 { top / bottom } else { 0.0 })
    }

    /// Scales both arrays by `gamma ∈ (0, 1]`, down-weighting older insertions.
    pub fn decay(&mut self, gamma: f64) -> Result<()> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParam("decay factor must be in (0, 1]"));
        }
        if gamma < 1.0 {
            self.top.scale(gamma);
            self.bottom.scale(gamma);
        }
        Ok(())
    }

    pub fn merge(&self, other: &NwSketch) -> Result<NwSketch> {
        if self.y_bound != other.y_bound {
            return Err(Error::Incompatible("y bounds differ"));
        }
        let mut out = self.clone();
        out.top.merge_in(&other.top)?;
        out.bottom.merge_in(&other.bottom)?;
        Ok(out)
    }
}

/// Direct evaluation of the kernel regressor with the analytic SRP kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct NwExactOracle {
    spec: LshFamilySpec,
    y_bound: f64,
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
}

impl NwExactOracle {
    /// Responses are clipped to `[-y_bound, y_bound]` exactly as the sketch does.
    pub fn new(spec: LshFamilySpec, y_bound: f64) -> Result<Self> {
        spec.validate()?;
        if !(y_bound.is_finite() && y_bound > 0.0) {
            return Err(Error::InvalidParam("y_bound must be positive and finite"));
        }
        Ok(NwExactOracle { spec, y_bound, xs: Vec::new(), ys: Vec::new() })
    }

    pub fn insert(&mut self, x: &[f64], y: f64) -> Result<()> {
        check_input(self.spec.dim, x)?;
        if !y.is_finite() {
            return Err(Error::NonFinite { index: 0 });
        }
        self.xs.push(x.to_vec());
        self.ys.push(y.clamp(-self.y_bound, self.y_bound));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// `(g_t(q), g_b(q))`.
    pub fn kernel_sums(&self, q: &[f64]) -> Result<(f64, f64)> {
        check_input(self.spec.dim, q)?;
        let mut top = 0.0;
        let mut bottom = 0.0;
        for (x, y) in self.xs.iter().zip(&self.ys) {
            let k = collision_kernel(self.spec.bits, x, q)?;
            top += y * k;
            bottom += k;
        }
        Ok((top, bottom))
    }

    pub fn predict(&self, q: &[f64]) -> Result<f64> {
        let (top, bottom) = self.kernel_sums(q)?;
        Ok(if bottom > 0.0 { top / bottom } else { 0.0 })
    }
}

/// Rows needed for additive error `eps` with probability `1 − delta`, before rounding:
/// `32·B²·(B+2)²/eps² · ln(1/delta)`.
pub fn row_requirement(y_bound: f64, eps: f64, delta: f64) -> Result<f64> {
    if !(y_bound.is_finite() && y_bound > 0.0) {
        return Err(Error::InvalidParam("B must be positive and finite"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParam("eps must be in (0, 1)"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParam("delta must be in (0, 1)"));
    }
    let b2 = y_bound * y_bound;
    let shifted = (y_bound + 2.0) * (y_bound + 2.0);
    Ok(32.0 * b2 * shifted / (eps * eps) * libm::log(1.0 / delta))
}

pub fn rows_for_error(y_bound: f64, eps: f64, delta: f64) -> Result<usize> {
    Ok(libm::ceil(row_requirement(y_bound, eps, delta)?) as usize)
}

/// High-probability additive error of an `rows`-row sketch:
/// `B·sqrt(32·ln(1/delta)·(B+1)/R)`.
pub fn error_bound(y_bound: f64, delta: f64, rows: usize) -> f64 {
    y_bound * libm::sqrt(32.0 * libm::log(1.0 / delta) * (y_bound + 1.0) / rows as f64)
}

impl NwSketch {
    /// Convenience for tests and tools: the oracle over the same family and bound.
    pub fn oracle_for<'a, I>(&self, data: I) -> Result<NwExactOracle>
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        let mut oracle = NwExactOracle::new(*self.spec(), self.y_bound)?;
        for (x, y) in data {
            oracle.insert(x, y)?;
        }
        Ok(oracle)
    }
}
