//! Row aggregation for RACE-style sketches.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arithmetic mean of the retrieved row values.
pub fn estimate_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidParam("cannot aggregate zero rows"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Median of the means of `groups` contiguous row groups.
///
/// Group `g` covers rows `[g·R/m, (g+1)·R/m)`, so group sizes differ by at most
/// one. With an even number of groups the two central means are averaged.
pub fn estimate_mom(values: &[f64], groups: usize) -> Result<f64> {
    let rows = values.len();
    if groups == 0 || groups > rows {
        return Err(Error::InvalidParam("median-of-means needs 1 <= groups <= rows"));
    }
    if groups == 1 {
        return estimate_mean(values);
    }
    let mut means: Vec<f64> = (0..groups)
        .map(|g| {
            let chunk = &values[g * rows / groups..(g + 1) * rows / groups];
            chunk.iter().sum::<f64>() / chunk.len() as f64
        })
        .collect();
    Ok(median_in_place(&mut means))
}

pub(crate) fn median_in_place(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// How per-row retrievals are combined into one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Estimator {
    #[default]
    Mean,
    MedianOfMeans { groups: usize },
}

impl Estimator {
    /// Median-of-means with `min(rows, 9)` groups.
    pub fn default_mom(rows: usize) -> Self {
        Estimator::MedianOfMeans { groups: rows.clamp(1, 9) }
    }

    pub fn aggregate(&self, values: &[f64]) -> Result<f64> {
        match *self {
            Estimator::Mean => estimate_mean(values),
            Estimator::MedianOfMeans { groups } => estimate_mom(values, groups),
        }
    }

    pub fn validate(&self, rows: usize) -> Result<()> {
        match *self {
            Estimator::Mean => Ok(()),
            Estimator::MedianOfMeans { groups } if groups >= 1 && groups <= rows => Ok(()),
            Estimator::MedianOfMeans { .. } => {
                Err(Error::InvalidParam("median-of-means needs 1 <= groups <= rows"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn mean_examples() {
        assert_eq!(estimate_mean(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(estimate_mean(&[0.0, 2.0]).unwrap(), 1.0);
        assert!(estimate_mean(&[]).is_err());
    }

    #[test]
    fn mean_matches_naive_resummation() {
        let mut rng = rng_from_seed(3);
        let v: Vec<f64> = (0..257).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
        let mut total = 0.0;
        for i in 0..v.len() {
            total += v[i];
        }
        assert_eq!(estimate_mean(&v).unwrap(), total / 257.0);
    }

    #[test]
    fn mom_examples() {
        let v = [0.0, 0.0, 0.0, 100.0, 0.0, 0.0];
        assert_eq!(estimate_mom(&v, 3).unwrap(), 0.0);
        assert_eq!(estimate_mom(&v, 1).unwrap(), estimate_mean(&v).unwrap());
        // groups of one: plain median, even count averages the middle pair
        assert_eq!(estimate_mom(&[5.0, 1.0, 3.0], 3).unwrap(), 3.0);
        assert_eq!(estimate_mom(&[4.0, 1.0, 3.0, 2.0], 4).unwrap(), 2.5);
        assert!(estimate_mom(&v, 0).is_err());
        assert!(estimate_mom(&v, 7).is_err());
    }

    #[test]
    fn mom_groups_are_contiguous_and_balanced() {
        // 7 rows into 3 groups: [0,1] [2,3] [4,5,6]
        let v = [1.0, 1.0, 10.0, 10.0, 4.0, 4.0, 4.0];
        assert_eq!(estimate_mom(&v, 3).unwrap(), 4.0);
    }

    #[test]
    fn default_mom_groups() {
        assert_eq!(Estimator::default_mom(200), Estimator::MedianOfMeans { groups: 9 });
        assert_eq!(Estimator::default_mom(4), Estimator::MedianOfMeans { groups: 4 });
        assert!(Estimator::MedianOfMeans { groups: 5 }.validate(4).is_err());
    }

    proptest! {
        #[test]
        fn mom_single_group_is_mean(v in proptest::collection::vec(-1e6f64..1e6, 1..64)) {
            prop_assert_eq!(estimate_mom(&v, 1).unwrap(), estimate_mean(&v).unwrap());
        }

        #[test]
        fn mom_lies_within_range(v in proptest::collection::vec(-1e3f64..1e3, 1..64), m in 1usize..64) {
            prop_assume!(m <= v.len());
            let est = estimate_mom(&v, m).unwrap();
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(est >= lo - 1e-9 && est <= hi + 1e-9);
        }
    }
}
