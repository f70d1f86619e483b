//! Repeated arrays of counts (RACE).
//!
//! An `R × W` grid of accumulators where row `r` is addressed by hasher `h_r`.
//! Inserting `x` with value `v` adds `v` to `cells[r, h_r(x)]` in every row;
//! retrieving `q` reads `cells[r, h_r(q)]`, whose expectation over the hash
//! draw is the kernel sum `Σ v_i k(x_i, q)`.
//!
//! Writes take `&mut self`, reads take `&self`, and the type is `Send + Sync`:
//! concurrent readers are safe and writers must be serialized by the caller
//! (for instance behind an `RwLock`). Cells are not updated atomically.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimate::Estimator;
use crate::lsh::{check_input, spawn_functions, LshFamilySpec, SrpHash};

#[derive(Debug, Clone)]
pub struct RaceSketch {
    spec: LshFamilySpec,
    hashers: Arc<[SrpHash]>,
    // row-major, rows x width
    cells: Vec<f64>,
    insert_count: u64,
}

impl RaceSketch {
    pub fn new(spec: LshFamilySpec, rows: usize) -> Result<Self> {
        let hashers: Arc<[SrpHash]> = spawn_functions(&spec, rows)?.into();
        Ok(Self::with_hashers(spec, hashers))
    }

    pub(crate) fn with_hashers(spec: LshFamilySpec, hashers: Arc<[SrpHash]>) -> Self {
        let cells = vec![0.0; hashers.len() * spec.width()];
        RaceSketch { spec, hashers, cells, insert_count: 0 }
    }

    pub(crate) fn hashers(&self) -> &Arc<[SrpHash]> {
        &self.hashers
    }

    pub fn spec(&self) -> &LshFamilySpec {
        &self.spec
    }

    pub fn rows(&self) -> usize {
        self.hashers.len()
    }

    pub fn width(&self) -> usize {
        self.spec.width()
    }

    pub fn insert_count(&self) -> u64 {
        self.insert_count
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.width();
        &self.cells[r * w..(r + 1) * w]
    }

    pub fn cell(&self, r: usize, bucket: usize) -> f64 {
        self.cells[r * self.width() + bucket]
    }

    /// `h_r(x)` for every row.
    pub fn buckets(&self, x: &[f64]) -> Result<Vec<usize>> {
        check_input(self.spec.dim, x)?;
        Ok(self.hashers.iter().map(|h| h.hash_unchecked(x)).collect())
    }

    pub fn increment(&mut self, x: &[f64], value: f64) -> Result<()> {
        let buckets = self.buckets(x)?;
        self.increment_buckets(&buckets, value)
    }

    /// Adds `value` at precomputed per-row buckets (one insertion).
    pub fn increment_buckets(&mut self, buckets: &[usize], value: f64) -> Result<()> {
        self.check_buckets(buckets)?;
        if !value.is_finite() {
            return Err(Error::NonFinite { index: 0 });
        }
        let w = self.width();
        for (r, &b) in buckets.iter().enumerate() {
            self.cells[r * w + b] += value;
        }
        self.insert_count += 1;
        Ok(())
    }

    pub fn retrieve(&self, q: &[f64]) -> Result<Vec<f64>> {
        let buckets = self.buckets(q)?;
        self.retrieve_buckets(&buckets)
    }

    pub fn retrieve_buckets(&self, buckets: &[usize]) -> Result<Vec<f64>> {
        self.check_buckets(buckets)?;
        let w = self.width();
        Ok(buckets.iter().enumerate().map(|(r, &b)| self.cells[r * w + b]).collect())
    }

    pub fn query(&self, q: &[f64], estimator: Estimator) -> Result<f64> {
        estimator.aggregate(&self.retrieve(q)?)
    }

    /// Multiplies every cell by `factor`.
    pub fn scale(&mut self, factor: f64) {
        self.cells.iter_mut().for_each(|c| *c *= factor);
    }

    pub fn is_compatible(&self, other: &RaceSketch) -> bool {
        self.spec == other.spec && self.rows() == other.rows()
    }

    /// Cell-wise sum of two sketches built from the same hashers.
    pub fn merge(&self, other: &RaceSketch) -> Result<RaceSketch> {
        let mut out = self.clone();
        out.merge_in(other)?;
        Ok(out)
    }

    pub fn merge_in(&mut self, other: &RaceSketch) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::Incompatible("hash family (bits, dim or seed) differs"));
        }
        if self.rows() != other.rows() {
            return Err(Error::Incompatible("row counts differ"));
        }
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a += b;
        }
        self.insert_count += other.insert_count;
        Ok(())
    }

    pub(crate) fn from_parts(
        spec: LshFamilySpec,
        hashers: Arc<[SrpHash]>,
        cells: Vec<f64>,
        insert_count: u64,
    ) -> Self {
        debug_assert_eq!(cells.len(), hashers.len() * spec.width());
        RaceSketch { spec, hashers, cells, insert_count }
    }

    fn check_buckets(&self, buckets: &[usize]) -> Result<()> {
        if buckets.len() != self.rows() {
            return Err(Error::LengthMismatch { expected: self.rows(), got: buckets.len() });
        }
        if buckets.iter().any(|&b| b >= self.width()) {
            return Err(Error::InvalidParam("bucket index out of range"));
        }
        Ok(())
    }
}

impl PartialEq for RaceSketch {
    fn eq(&self, other: &Self) -> bool {
        self.is_compatible(other)
            && self.insert_count == other.insert_count
            && self
                .cells
                .iter()
                .zip(&other.cells)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsh::collision_kernel;
    use crate::rng::{child_seed, rng_from_seed, SketchRng};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn points(rng: &mut SketchRng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| StandardNormal.sample(rng)).collect()).collect()
    }

    fn sketch(rows: usize, bits: u32, dim: usize, seed: u64) -> RaceSketch {
        RaceSketch::new(LshFamilySpec::srp(bits, dim, seed).unwrap(), rows).unwrap()
    }

    #[test]
    fn single_insertion_touches_one_cell_per_row() {
        let mut s = sketch(5, 4, 3, 1);
        s.increment(&[1.0, -2.0, 0.5], 1.0).unwrap();
        for r in 0..5 {
            let row = s.row(r);
            assert_eq!(row.iter().filter(|&&c| c == 1.0).count(), 1);
            assert_eq!(row.iter().filter(|&&c| c == 0.0).count(), 15);
        }
        assert_eq!(s.insert_count(), 1);
    }

    #[test]
    fn increments_are_additive() {
        let mut s = sketch(4, 3, 2, 9);
        let x = [0.3, 0.7];
        s.increment(&x, 2.5).unwrap();
        s.increment(&x, -0.5).unwrap();
        assert_eq!(s.retrieve(&x).unwrap(), vec![2.0; 4]);
    }

    #[test]
    fn cells_equal_bruteforce_histogram() {
        let mut rng = rng_from_seed(11);
        let data = points(&mut rng, 1000, 6);
        let mut s = sketch(12, 5, 6, 21);
        for x in &data {
            s.increment(x, 1.0).unwrap();
        }
        // Independent oracle: recreate the hashers from their seeds and count.
        let mut hist = vec![0u64; 12 * 32];
        for r in 0..12 {
            let h = SrpHash::new(5, 6, child_seed(21, r as u64)).unwrap();
            for x in &data {
                hist[r * 32 + h.hash(x).unwrap()] += 1;
            }
        }
        for (c, &n) in s.cells().iter().zip(&hist) {
            assert_eq!(*c, n as f64);
        }
        for r in 0..12 {
            assert_eq!(s.row(r).iter().sum::<f64>(), 1000.0);
        }
    }

    #[test]
    fn retrieve_on_empty_and_self() {
        let mut s = sketch(6, 8, 4, 2);
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(s.retrieve(&x).unwrap(), vec![0.0; 6]);
        s.increment(&x, 1.0).unwrap();
        assert_eq!(s.retrieve(&x).unwrap(), vec![1.0; 6]);
        assert_eq!(s.insert_count(), 1);
    }

    #[test]
    fn retrieve_mean_tracks_kernel() {
        let mut rng = rng_from_seed(8);
        let x: Vec<f64> = points(&mut rng, 1, 5).remove(0);
        let q: Vec<f64> = x.iter().map(|v| v + 0.6 * rng.random::<f64>()).collect();
        let mut s = sketch(2000, 3, 5, 77);
        s.increment(&x, 1.0).unwrap();
        let mean = s.query(&q, Estimator::Mean).unwrap();
        let k = collision_kernel(3, &x, &q).unwrap();
        assert!((mean - k).abs() <= 0.03, "mean {mean} kernel {k}");
    }

    #[test]
    fn rejects_mismatched_input() {
        let mut s = sketch(3, 4, 3, 0);
        assert!(matches!(s.increment(&[1.0, 2.0], 1.0), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(s.retrieve(&[1.0; 4]), Err(Error::DimensionMismatch { .. })));
        assert!(s.increment_buckets(&[0, 1], 1.0).is_err());
        assert!(s.increment_buckets(&[0, 1, 16], 1.0).is_err());
        assert!(s.increment(&[1.0, 1.0, 1.0], f64::INFINITY).is_err());
    }

    #[test]
    fn merge_properties() {
        let mut rng = rng_from_seed(4);
        let data = points(&mut rng, 300, 4);
        let mut whole = sketch(10, 6, 4, 5);
        let mut left = sketch(10, 6, 4, 5);
        let mut right = sketch(10, 6, 4, 5);
        for (i, x) in data.iter().enumerate() {
            whole.increment(x, 1.0).unwrap();
            if i < 170 { left.increment(x, 1.0).unwrap() } else { right.increment(x, 1.0).unwrap() }
        }
        let empty = sketch(10, 6, 4, 5);
        assert_eq!(whole.merge(&empty).unwrap(), whole);
        assert_eq!(left.merge(&right).unwrap(), right.merge(&left).unwrap());
        assert_eq!(left.merge(&right).unwrap(), whole);

        let q = &data[0];
        let merged = left.merge(&right).unwrap().retrieve(q).unwrap();
        let summed: Vec<f64> = left
            .retrieve(q)
            .unwrap()
            .iter()
            .zip(right.retrieve(q).unwrap())
            .map(|(a, b)| a + b)
            .collect();
        assert_eq!(merged, summed);

        assert!(whole.merge(&sketch(10, 6, 4, 6)).is_err());
        assert!(whole.merge(&sketch(11, 6, 4, 5)).is_err());
        assert!(whole.merge(&sketch(10, 5, 4, 5)).is_err());
    }

    #[test]
    fn scale_multiplies_cells() {
        let mut s = sketch(2, 2, 2, 0);
        s.increment(&[1.0, 1.0], 4.0).unwrap();
        s.scale(0.5);
        assert_eq!(s.retrieve(&[1.0, 1.0]).unwrap(), vec![2.0, 2.0]);
    }
}
