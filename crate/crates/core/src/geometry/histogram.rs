//! Piecewise-uniform distributions on a 1D grid.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Probability distribution with uniform density inside each bin.
///
/// `edges` has one more entry than `mass`; bin `i` spans `[edges[i], edges[i+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HistogramRecord<F>", into = "HistogramRecord<F>")]
#[serde(bound = "F: Scalar")]
pub struct HistogramDistribution<F> {
    edges: Vec<F>,
    mass: Vec<F>,
}

/// On-disk form `{edges: [...], mass: [...]}`, validated on conversion.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct HistogramRecord<F> {
    pub edges: Vec<F>,
    pub mass: Vec<F>,
}

impl<F: Scalar> TryFrom<HistogramRecord<F>> for HistogramDistribution<F> {
    type Error = Error;
    fn try_from(r: HistogramRecord<F>) -> Result<Self> {
        Self::new(r.edges, r.mass)
    }
}

impl<F: Scalar> From<HistogramDistribution<F>> for HistogramRecord<F> {
    fn from(h: HistogramDistribution<F>) -> Self {
        HistogramRecord { edges: h.edges, mass: h.mass }
    }
}

/// Integer-spaced edges `lo, lo+1, ..., hi`.
pub fn unit_grid<F: Scalar>(lo: i64, hi: i64) -> Vec<F> {
    (lo..=hi).map(|v| F::lit(v as f64)).collect()
}

/// Sorted union of two edge sets with exact duplicates removed.
pub fn union_edges<F: Scalar>(a: &[F], b: &[F]) -> Vec<F> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(&x), Some(&y)) if y < x => {
                j += 1;
                y
            }
            (Some(&x), Some(_)) => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        if out.last() != Some(&next) {
            out.push(next);
        }
    }
    out
}

impl<F: Scalar> HistogramDistribution<F> {
    pub fn new(edges: Vec<F>, mass: Vec<F>) -> Result<Self> {
        if mass.is_empty() {
            return invalid("histogram needs at least one bin");
        }
        if edges.len() != mass.len() + 1 {
            return invalid(format!(
                "histogram has {} edges for {} bins",
                edges.len(),
                mass.len()
            ));
        }
        if edges.iter().chain(mass.iter()).any(|v| v.is_nan()) {
            return invalid("histogram contains NaN");
        }
        if edges.iter().any(|v| !v.is_finite()) {
            return invalid("histogram edges must be finite");
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvariantViolation(
                "grid edges must be strictly increasing".into(),
            ));
        }
        if let Some((i, m)) = mass.iter().enumerate().find(|(_, m)| **m < F::zero()) {
            return Err(Error::InvariantViolation(format!(
                "bin {i} has negative mass {m}"
            )));
        }
        let total: F = mass.iter().copied().sum();
        if (total - F::one()).abs() > F::tolerance(1e-9) {
            return Err(Error::InvariantViolation(format!(
                "bin masses sum to {total}, expected 1"
            )));
        }
        Ok(Self { edges, mass })
    }

    /// `U(a, b)` expressed on the given grid. The grid must cover `[a, b]`.
    pub fn uniform(edges: Vec<F>, a: F, b: F) -> Result<Self> {
        if !(a < b) {
            return invalid("uniform needs a < b");
        }
        let (lo, hi) = (edges[0], edges[edges.len() - 1]);
        if a < lo || b > hi {
            return invalid(format!("U({a}, {b}) not covered by grid [{lo}, {hi}]"));
        }
        let width = b - a;
        let mass = edges
            .windows(2)
            .map(|w| overlap(w[0], w[1], a, b) / width)
            .collect();
        Self::new(edges, mass)
    }

    /// `U(a, b)` on a unit grid spanning `[lo, hi]`.
    pub fn uniform_on_unit_grid(lo: i64, hi: i64, a: f64, b: f64) -> Result<Self> {
        Self::uniform(unit_grid(lo, hi), F::lit(a), F::lit(b))
    }

    pub fn edges(&self) -> &[F] {
        &self.edges
    }

    pub fn mass(&self) -> &[F] {
        &self.mass
    }

    pub fn bins(&self) -> usize {
        self.mass.len()
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.edges == other.edges
    }

    /// Probability of `(-inf, x]`.
    pub fn cdf(&self, x: F) -> F {
        self.mass_between(self.edges[0], x)
    }

    /// Probability of `[a, b]`.
    pub fn mass_between(&self, a: F, b: F) -> F {
        if !(a < b) {
            return F::zero();
        }
        self.edges
            .windows(2)
            .zip(&self.mass)
            .map(|(w, &m)| m * overlap(w[0], w[1], a, b) / (w[1] - w[0]))
            .sum()
    }

    /// Re-expresses the distribution on `new_edges`, splitting each bin's
    /// mass in proportion to overlap length. Exact when `new_edges` refines
    /// the current grid over its support.
    pub fn regrid(&self, new_edges: &[F]) -> Result<Self> {
        let mut mass = vec![F::zero(); new_edges.len().saturating_sub(1)];
        for (i, w) in self.edges.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let m = self.mass[i];
            if m == F::zero() {
                continue;
            }
            let width = b - a;
            let mut placed = F::zero();
            let mut k = new_edges.partition_point(|&e| e <= a).saturating_sub(1);
            while k + 1 < new_edges.len() && new_edges[k] < b {
                let ov = overlap(new_edges[k], new_edges[k + 1], a, b);
                if ov > F::zero() {
                    let part = m * ov / width;
                    mass[k] += part;
                    placed += part;
                }
                k += 1;
            }
            if (placed - m).abs() > F::tolerance(1e-12) {
                return invalid(format!(
                    "regrid target does not cover bin [{a}, {b}) carrying mass {m}"
                ));
            }
        }
        Self::new(new_edges.to_vec(), mass)
    }

    /// Both distributions on the union of their grids.
    pub fn align(&self, other: &Self) -> Result<(Self, Self)> {
        if self.same_grid(other) {
            return Ok((self.clone(), other.clone()));
        }
        let edges = union_edges(&self.edges, &other.edges);
        Ok((self.regrid(&edges)?, other.regrid(&edges)?))
    }

    /// Moves every edge by `offset`.
    pub fn translate(&self, offset: F) -> Self {
        Self {
            edges: self.edges.iter().map(|&e| e + offset).collect(),
            mass: self.mass.clone(),
        }
    }

    /// Shifts mass by `k` bins along the same grid, or `None` when mass
    /// would leave the grid.
    pub fn shift_bins(&self, k: isize) -> Option<Self> {
        let n = self.mass.len() as isize;
        let mut mass = vec![F::zero(); self.mass.len()];
        for (i, &m) in self.mass.iter().enumerate() {
            let t = i as isize + k;
            if m > F::zero() && !(0..n).contains(&t) {
                return None;
            }
            if (0..n).contains(&t) {
                mass[t as usize] = m;
            }
        }
        Some(Self { edges: self.edges.clone(), mass })
    }
}

fn overlap<F: Scalar>(a0: F, a1: F, b0: F, b1: F) -> F {
    let lo = a0.max(b0);
    let hi = a1.min(b1);
    if hi > lo {
        hi - lo
    } else {
        F::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_on_unit_grid_splits_evenly() {
        let h = HistogramDistribution::<f64>::uniform_on_unit_grid(-1, 5, 0.0, 2.0).unwrap();
        assert_eq!(h.mass(), &[0.0, 0.5, 0.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_mass_sum() {
        let err = HistogramDistribution::<f64>::new(vec![0.0, 1.0, 2.0], vec![0.5, 0.4]);
        assert!(matches!(err, Err(Error::InvariantViolation(_))));
    }

    #[test]
    fn rejects_nan_and_unsorted_edges() {
        let nan = HistogramDistribution::<f64>::new(vec![0.0, 1.0], vec![f64::NAN]);
        assert!(matches!(nan, Err(Error::InvalidInput(_))));
        let unsorted = HistogramDistribution::<f64>::new(vec![0.0, 0.0, 1.0], vec![0.5, 0.5]);
        assert!(matches!(unsorted, Err(Error::InvariantViolation(_))));
    }

    #[test]
    fn regrid_onto_refinement_is_exact() {
        let h = HistogramDistribution::<f64>::new(vec![0.0, 2.0], vec![1.0]).unwrap();
        let r = h.regrid(&[0.0, 0.5, 2.0, 3.0]).unwrap();
        assert_eq!(r.mass(), &[0.25, 0.75, 0.0]);
    }

    #[test]
    fn regrid_rejects_uncovered_support() {
        let h = HistogramDistribution::<f64>::new(vec![0.0, 2.0], vec![1.0]).unwrap();
        assert!(h.regrid(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn union_edges_merges_and_dedups() {
        assert_eq!(union_edges(&[0.0, 1.0, 3.0], &[1.0, 2.0]), vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn cdf_interpolates_within_bins() {
        let h = HistogramDistribution::<f64>::uniform_on_unit_grid(0, 4, 0.0, 4.0).unwrap();
        assert!((h.cdf(1.5) - 0.375).abs() < 1e-15);
        assert!((h.mass_between(1.0, 3.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn shift_bins_moves_or_refuses() {
        let h = HistogramDistribution::<f64>::uniform_on_unit_grid(-1, 5, 0.0, 2.0).unwrap();
        let s = h.shift_bins(1).unwrap();
        assert_eq!(s, HistogramDistribution::uniform_on_unit_grid(-1, 5, 1.0, 3.0).unwrap());
        assert!(h.shift_bins(-2).is_none());
    }

    #[test]
    fn json_round_trip_validates() {
        let bad = r#"{"edges":[0.0,1.0,2.0],"mass":[0.5,0.4]}"#;
        assert!(serde_json::from_str::<HistogramDistribution<f64>>(bad).is_err());
        let good = r#"{"edges":[0.0,1.0,2.0],"mass":[0.5,0.5]}"#;
        let h: HistogramDistribution<f64> = serde_json::from_str(good).unwrap();
        assert_eq!(serde_json::to_string(&h).unwrap(), good);
    }
}
