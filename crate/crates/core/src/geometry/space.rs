use serde::{Deserialize, Serialize};

use super::{
    brute_force_divergence, exact_interval_divergence, symmetric_difference_class,
    union_edges, DivergenceValue, FiniteDistribution, FiniteHypothesisClass,
    HistogramDistribution, MEMBERSHIP_TOL,
};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// A family of distributions with an H-divergence and convex mixing.
pub trait DivergenceSpace<F: Scalar> {
    type Dist: Clone;

    fn divergence(&self, a: &Self::Dist, b: &Self::Dist) -> Result<DivergenceValue<F>>;

    /// Convex combination `sum_i w_i * components[i]`. Weights are already validated.
    fn combine(&self, components: &[&Self::Dist], weights: &[F]) -> Result<Self::Dist>;
}

/// Histograms under the interval class on the real line.
#[derive(Debug, Clone, Copy, Default)]
pub struct IntervalSpace;

impl<F: Scalar> DivergenceSpace<F> for IntervalSpace {
    type Dist = HistogramDistribution<F>;

    fn divergence(&self, a: &Self::Dist, b: &Self::Dist) -> Result<DivergenceValue<F>> {
        exact_interval_divergence(a, b)
    }

    fn combine(&self, components: &[&Self::Dist], weights: &[F]) -> Result<Self::Dist> {
        let edges = components
            .iter()
            .skip(1)
            .fold(components[0].edges().to_vec(), |acc, c| union_edges(&acc, c.edges()));
        let mut mass = vec![F::zero(); edges.len() - 1];
        for (c, &w) in components.iter().zip(weights) {
            let c = c.regrid(&edges)?;
            for (m, &cm) in mass.iter_mut().zip(c.mass()) {
                *m += w * cm;
            }
        }
        HistogramDistribution::new(edges, mass)
    }
}

/// Finite distributions under an explicit class used directly as the
/// divergence class. Build with [`FiniteClassSpace::symmetric`] to get HΔH.
#[derive(Debug, Clone)]
pub struct FiniteClassSpace {
    class: FiniteHypothesisClass,
}

impl FiniteClassSpace {
    pub fn new(class: FiniteHypothesisClass) -> Self {
        Self { class }
    }

    /// Divergence over the symmetric difference of `base`.
    pub fn symmetric(base: &FiniteHypothesisClass) -> Result<Self> {
        Ok(Self { class: symmetric_difference_class(base)? })
    }

    pub fn class(&self) -> &FiniteHypothesisClass {
        &self.class
    }
}

impl<F: Scalar> DivergenceSpace<F> for FiniteClassSpace {
    type Dist = FiniteDistribution<F>;

    fn divergence(&self, a: &Self::Dist, b: &Self::Dist) -> Result<DivergenceValue<F>> {
        brute_force_divergence(a, b, &self.class)
    }

    fn combine(&self, components: &[&Self::Dist], weights: &[F]) -> Result<Self::Dist> {
        let n = components[0].support_size();
        if components.iter().any(|c| c.support_size() != n) {
            return invalid("components have different support sizes");
        }
        let mut mass = vec![F::zero(); n];
        for (c, &w) in components.iter().zip(weights) {
            for (m, &cm) in mass.iter_mut().zip(c.mass()) {
                *m += w * cm;
            }
        }
        FiniteDistribution::new(mass)
    }
}

fn validate_simplex<F: Scalar>(weights: &[F], k: usize) -> Result<()> {
    if weights.len() != k {
        return invalid(format!("{} weights for {k} components", weights.len()));
    }
    if weights.iter().any(|w| w.is_nan() || *w < F::zero()) {
        return invalid("weights must be non-negative");
    }
    let total: F = weights.iter().copied().sum();
    if (total - F::one()).abs() > F::tolerance(1e-9) {
        return invalid(format!("weights sum to {total}, expected 1"));
    }
    Ok(())
}

/// Sources `P_1..P_k` with pooling weights `phi` in the simplex.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "D: Serialize, F: Scalar", deserialize = "D: Deserialize<'de>, F: Scalar"))]
pub struct SourceCollection<D, F> {
    sources: Vec<D>,
    weights: Vec<F>,
}

impl<D, F: Scalar> SourceCollection<D, F> {
    pub fn new(sources: Vec<D>, weights: Vec<F>) -> Result<Self> {
        if sources.len() < 2 {
            return invalid("a source collection needs at least two sources");
        }
        validate_simplex(&weights, sources.len())?;
        Ok(Self { sources, weights })
    }

    pub fn uniform(sources: Vec<D>) -> Result<Self> {
        let k = sources.len().max(1);
        let w = F::one() / F::from_usize_lossy(k);
        Self::new(sources, vec![w; k])
    }

    pub fn with_weights(&self, weights: Vec<F>) -> Result<Self>
    where
        D: Clone,
    {
        Self::new(self.sources.clone(), weights)
    }

    pub fn sources(&self) -> &[D] {
        &self.sources
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }
}

/// `rho = max_{i,j} d(P_i, P_j)`.
pub fn max_pairwise_divergence<F: Scalar, S: DivergenceSpace<F>>(
    space: &S,
    sources: &SourceCollection<S::Dist, F>,
) -> Result<F> {
    let ps = sources.sources();
    let mut rho = F::zero();
    for i in 0..ps.len() {
        for j in i + 1..ps.len() {
            rho = rho.max(space.divergence(&ps[i], &ps[j])?.value());
        }
    }
    Ok(rho)
}

/// Outcome of the pooling condition `sum_i phi_i d(P_i, S) <= rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport<F> {
    pub lhs: F,
    pub rhs: F,
    /// `rhs - lhs`; non-negative (up to tolerance) when the condition holds.
    pub slack: F,
    pub pass: bool,
}

pub fn check_condition<F: Scalar, S: DivergenceSpace<F>>(
    space: &S,
    sources: &SourceCollection<S::Dist, F>,
    s: &S::Dist,
) -> Result<ConditionReport<F>> {
    let rhs = max_pairwise_divergence(space, sources)?;
    let mut lhs = F::zero();
    for (p, &phi) in sources.sources().iter().zip(sources.weights()) {
        lhs += phi * space.divergence(p, s)?.value();
    }
    let slack = rhs - lhs;
    Ok(ConditionReport { lhs, rhs, slack, pass: slack >= -F::tolerance(MEMBERSHIP_TOL) })
}

/// `s` lies in the closed ball of radius `rho` around `center`.
pub fn ball_membership<F: Scalar, S: DivergenceSpace<F>>(
    space: &S,
    center: &S::Dist,
    rho: F,
    s: &S::Dist,
) -> Result<bool> {
    if rho.is_nan() || rho < F::zero() {
        return invalid(format!("ball radius {rho} must be non-negative"));
    }
    Ok(space.divergence(center, s)?.value() <= rho + F::tolerance(MEMBERSHIP_TOL))
}

/// `s` lies in every ball `B_rho(P_i)` with `rho` the largest source divergence.
pub fn intersection_membership<F: Scalar, S: DivergenceSpace<F>>(
    space: &S,
    sources: &SourceCollection<S::Dist, F>,
    s: &S::Dist,
) -> Result<bool> {
    let rho = max_pairwise_divergence(space, sources)?;
    for p in sources.sources() {
        if !ball_membership(space, p, rho, s)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `s` lies in at least one ball `B_rho(P_i)`.
pub fn union_membership<F: Scalar, S: DivergenceSpace<F>>(
    space: &S,
    sources: &SourceCollection<S::Dist, F>,
    s: &S::Dist,
) -> Result<bool> {
    let rho = max_pairwise_divergence(space, sources)?;
    for p in sources.sources() {
        if ball_membership(space, p, rho, s)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Component-wise convex combination of the sources.
pub fn mixture<F: Scalar, S: DivergenceSpace<F>>(
    space: &S,
    sources: &SourceCollection<S::Dist, F>,
    weights: &[F],
) -> Result<S::Dist> {
    validate_simplex(weights, sources.len())?;
    let comps: Vec<&S::Dist> = sources.sources().iter().collect();
    space.combine(&comps, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    type H = HistogramDistribution<f64>;

    fn u(a: f64, b: f64) -> H {
        H::uniform_on_unit_grid(-1, 5, a, b).unwrap()
    }

    fn example1() -> SourceCollection<H, f64> {
        SourceCollection::new(vec![u(0.0, 2.0), u(2.0, 4.0)], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn example1_condition_has_unit_slack() {
        let r = check_condition(&IntervalSpace, &example1(), &u(1.0, 3.0)).unwrap();
        assert_eq!((r.lhs, r.rhs, r.slack, r.pass), (1.0, 2.0, 1.0, true));
    }

    #[test]
    fn source_itself_passes_with_rho_slack_bound() {
        let src = example1();
        let r = check_condition(&IntervalSpace, &src, &src.sources()[0]).unwrap();
        // lhs = phi_2 * d(P1, P2) = 1, rho = 2
        assert!(r.pass);
        assert_eq!(r.lhs, 1.0);
        assert!(r.lhs <= r.rhs);
    }

    #[test]
    fn far_candidate_fails_for_overlapping_sources() {
        let src = SourceCollection::new(vec![u(0.0, 2.0), u(1.0, 3.0)], vec![0.5, 0.5]).unwrap();
        let far = u(4.0, 5.0);
        let r = check_condition(&IntervalSpace, &src, &far).unwrap();
        assert_eq!((r.lhs, r.rhs), (2.0, 1.0));
        assert!(!r.pass);
        assert!(!intersection_membership(&IntervalSpace, &src, &far).unwrap());
        assert!(!union_membership(&IntervalSpace, &src, &far).unwrap());
    }

    #[test]
    fn ball_examples() {
        let c = u(0.0, 2.0);
        assert!(ball_membership(&IntervalSpace, &c, 0.0, &c).unwrap());
        assert!(ball_membership(&IntervalSpace, &c, 2.0, &u(1.0, 3.0)).unwrap());
        assert!(!ball_membership(&IntervalSpace, &c, 1.0, &u(2.0, 4.0)).unwrap());
        assert!(ball_membership(&IntervalSpace, &c, -0.1, &c).is_err());
    }

    #[test]
    fn example1_intersection() {
        assert!(intersection_membership(&IntervalSpace, &example1(), &u(1.0, 3.0)).unwrap());
    }

    #[test]
    fn mixture_examples() {
        let src = example1();
        assert_eq!(mixture(&IntervalSpace, &src, &[1.0, 0.0]).unwrap(), u(0.0, 2.0));
        assert_eq!(mixture(&IntervalSpace, &src, &[0.5, 0.5]).unwrap(), u(0.0, 4.0));
        assert!(mixture(&IntervalSpace, &src, &[1.0]).is_err());
        let same = SourceCollection::uniform(vec![u(0.0, 1.0), u(0.0, 1.0), u(0.0, 1.0)]).unwrap();
        let m = mixture(&IntervalSpace, &same, same.weights()).unwrap();
        for (a, b) in m.mass().iter().zip(u(0.0, 1.0).mass()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn collection_invariants() {
        assert!(SourceCollection::<H, f64>::new(vec![u(0.0, 1.0)], vec![1.0]).is_err());
        assert!(SourceCollection::new(vec![u(0.0, 1.0), u(1.0, 2.0)], vec![0.7, 0.7]).is_err());
    }

    #[test]
    fn finite_space_matches_brute_force() {
        let base = FiniteHypothesisClass::thresholds(3).unwrap();
        let space = FiniteClassSpace::symmetric(&base).unwrap();
        let p = FiniteDistribution::new(vec![0.5, 0.5, 0.0]).unwrap();
        let q = FiniteDistribution::new(vec![0.0, 0.5, 0.5]).unwrap();
        let d: DivergenceValue<f64> = space.divergence(&p, &q).unwrap();
        assert_eq!(d.value(), 1.0);
    }
}
