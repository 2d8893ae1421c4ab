//! HΔH-divergence geometry: exact divergences, balls around sources,
//! the pooling condition and the auxiliary-mixture condition.
//!
//! Two worlds are supported. Histograms on the real line use the interval
//! class (the symmetric difference of rays), where the divergence is exact in
//! linear time. Finite spaces use an explicit hypothesis class and exhaustive
//! enumeration. Both are exposed through [`DivergenceSpace`] so the ball and
//! condition checks are written once.

mod augmentation;
mod finite;
mod histogram;
mod space;

pub use augmentation::{check_augmentation_condition, AugmentationReport};
pub use finite::{
    brute_force_divergence, symmetric_difference_class, symmetric_difference_class_capped,
    FiniteDistribution, FiniteHypothesisClass, DEFAULT_CLASS_CAP, MAX_SUPPORT,
};
pub use histogram::{union_edges, unit_grid, HistogramDistribution, HistogramRecord};
pub use space::{
    ball_membership, check_condition, intersection_membership, max_pairwise_divergence, mixture,
    union_membership, ConditionReport, DivergenceSpace, FiniteClassSpace, IntervalSpace,
    SourceCollection,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Absolute tolerance on divergence comparisons.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// An H-divergence value, always within `[0, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DivergenceValue<F>(F);

impl<F: Scalar> DivergenceValue<F> {
    /// Accepts values within rounding of `[0, 2]` and clamps them into range.
    pub fn new(v: F) -> Result<Self> {
        let tol = F::tolerance(1e-9);
        let two = F::lit(2.0);
        if v.is_nan() || v < -tol || v > two + tol {
            return Err(Error::ContractViolation(format!("divergence {v} outside [0, 2]")));
        }
        Ok(Self(v.max(F::zero()).min(two)))
    }

    pub fn value(self) -> F {
        self.0
    }
}

/// Largest sum over contiguous runs of `values`, counting the empty run as 0.
pub(crate) fn max_run_sum<F: Scalar>(values: impl IntoIterator<Item = F>) -> F {
    let mut best = F::zero();
    let mut current = F::zero();
    for v in values {
        current = (current + v).max(F::zero());
        best = best.max(current);
    }
    best
}

/// Exact HΔH-divergence under the interval class:
/// `2 * max over bin ranges [i..j] of |P([i..j]) - Q([i..j])|`.
///
/// With piecewise-uniform densities the signed density difference is constant
/// on each bin, so an optimal interval starts and ends on bin edges and the
/// supremum reduces to a maximum-subarray scan in both signs.
pub fn exact_interval_divergence<F: Scalar>(
    p: &HistogramDistribution<F>,
    q: &HistogramDistribution<F>,
) -> Result<DivergenceValue<F>> {
    let (p, q) = p.align(q)?;
    if !p.same_grid(&q) {
        return Err(Error::ContractViolation("grids differ after regrid".into()));
    }
    let diff: Vec<F> = p.mass().iter().zip(q.mass()).map(|(&a, &b)| a - b).collect();
    let up = max_run_sum(diff.iter().copied());
    let down = max_run_sum(diff.iter().map(|&d| -d));
    DivergenceValue::new(F::lit(2.0) * up.max(down))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(a: f64, b: f64) -> HistogramDistribution<f64> {
        HistogramDistribution::uniform_on_unit_grid(-1, 5, a, b).unwrap()
    }

    /// All O(n^2) bin ranges, summed directly.
    fn enumerate(p: &HistogramDistribution<f64>, q: &HistogramDistribution<f64>) -> f64 {
        let n = p.bins();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let s: f64 = (i..=j).map(|b| p.mass()[b] - q.mass()[b]).sum();
                best = best.max(s.abs());
            }
        }
        2.0 * best
    }

    #[test]
    fn disjoint_uniforms_have_divergence_two() {
        assert_eq!(exact_interval_divergence(&u(0.0, 2.0), &u(2.0, 4.0)).unwrap().value(), 2.0);
    }

    #[test]
    fn half_overlap_has_divergence_one() {
        let (p, q) = (u(0.0, 2.0), u(1.0, 3.0));
        assert_eq!(enumerate(&p, &q), 1.0);
        assert_eq!(exact_interval_divergence(&p, &q).unwrap().value(), 1.0);
    }

    #[test]
    fn identical_histograms_have_zero_divergence() {
        let p = u(0.0, 3.0);
        assert_eq!(exact_interval_divergence(&p, &p).unwrap().value(), 0.0);
    }

    #[test]
    fn mismatched_grids_are_regridded() {
        let p = HistogramDistribution::<f64>::new(vec![0.0, 2.0], vec![1.0]).unwrap();
        let q = HistogramDistribution::<f64>::uniform_on_unit_grid(0, 4, 1.0, 3.0).unwrap();
        assert_eq!(exact_interval_divergence(&p, &q).unwrap().value(), 1.0);
    }

    #[test]
    fn works_in_single_precision() {
        let p = HistogramDistribution::<f32>::uniform_on_unit_grid(-1, 5, 0.0, 2.0).unwrap();
        let q = HistogramDistribution::<f32>::uniform_on_unit_grid(-1, 5, 1.0, 3.0).unwrap();
        assert_eq!(exact_interval_divergence(&p, &q).unwrap().value(), 1.0f32);
    }

    #[test]
    fn divergence_value_rejects_out_of_range() {
        assert!(DivergenceValue::new(2.5f64).is_err());
        assert!(DivergenceValue::new(f64::NAN).is_err());
        assert_eq!(DivergenceValue::new(-1e-15f64).unwrap().value(), 0.0);
    }
}
