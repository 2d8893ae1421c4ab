//! Distributions and hypothesis classes over a small finite space.
//!
//! Labelings are bitmasks: bit `i` is the label of point `i`, so the support
//! is limited to 64 points. That is far beyond what exhaustive enumeration
//! can handle anyway.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

pub const MAX_SUPPORT: usize = 64;

/// Default cap on the size of a symmetric-difference class.
pub const DEFAULT_CLASS_CAP: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct FiniteDistribution<F> {
    mass: Vec<F>,
}

impl<F: Scalar> FiniteDistribution<F> {
    pub fn new(mass: Vec<F>) -> Result<Self> {
        if mass.is_empty() || mass.len() > MAX_SUPPORT {
            return invalid(format!("support size {} outside 1..={MAX_SUPPORT}", mass.len()));
        }
        if mass.iter().any(|m| m.is_nan()) {
            return invalid("finite distribution contains NaN");
        }
        if mass.iter().any(|&m| m < F::zero()) {
            return Err(Error::InvariantViolation("negative point mass".into()));
        }
        let total: F = mass.iter().copied().sum();
        if (total - F::one()).abs() > F::tolerance(1e-9) {
            return Err(Error::InvariantViolation(format!(
                "point masses sum to {total}, expected 1"
            )));
        }
        Ok(Self { mass })
    }

    /// Point mass at `i`.
    pub fn dirac(support_size: usize, i: usize) -> Result<Self> {
        let mut mass = vec![F::zero(); support_size];
        if i >= support_size {
            return invalid("dirac index outside support");
        }
        mass[i] = F::one();
        Self::new(mass)
    }

    pub fn support_size(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[F] {
        &self.mass
    }

    /// Probability of the positive region of `labeling`.
    pub fn prob(&self, labeling: u64) -> F {
        self.mass
            .iter()
            .enumerate()
            .filter(|(i, _)| labeling >> i & 1 == 1)
            .map(|(_, &m)| m)
            .sum()
    }

    /// Probability that two labelings disagree.
    pub fn disagreement(&self, a: u64, b: u64) -> F {
        self.prob(a ^ b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteHypothesisClass {
    support_size: usize,
    labelings: Vec<u64>,
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl FiniteHypothesisClass {
    pub fn new(support_size: usize, labelings: Vec<u64>) -> Result<Self> {
        if support_size == 0 || support_size > MAX_SUPPORT {
            return invalid(format!("support size {support_size} outside 1..={MAX_SUPPORT}"));
        }
        if labelings.is_empty() {
            return invalid("hypothesis class is empty");
        }
        let mask = full_mask(support_size);
        if let Some(l) = labelings.iter().find(|&&l| l & !mask != 0) {
            return invalid(format!("labeling {l:#b} longer than support {support_size}"));
        }
        Ok(Self { support_size, labelings })
    }

    /// Parses strings like `"110"`, where character `i` labels point `i`.
    pub fn from_strings<S: AsRef<str>>(labelings: &[S]) -> Result<Self> {
        let n = labelings.first().map(|s| s.as_ref().len()).unwrap_or(0);
        let parsed = labelings
            .iter()
            .map(|s| {
                let s = s.as_ref();
                if s.len() != n {
                    return invalid("labelings of unequal length");
                }
                s.chars().enumerate().try_fold(0u64, |acc, (i, c)| match c {
                    '0' => Ok(acc),
                    '1' => Ok(acc | 1 << i),
                    _ => invalid(format!("bad label character {c:?}")),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, parsed)
    }

    /// Every one of the `2^n` labelings.
    pub fn all_labelings(support_size: usize) -> Result<Self> {
        if support_size > 20 {
            return Err(Error::ResourceLimit(format!(
                "2^{support_size} labelings exceed enumeration limit"
            )));
        }
        Self::new(support_size, (0..1u64 << support_size).collect())
    }

    /// Rays `{0..a}` labelled 1, for `a = 0..=n` (the first is the empty labeling).
    pub fn thresholds(support_size: usize) -> Result<Self> {
        Self::new(support_size, (0..=support_size).map(full_mask_or_zero).collect())
    }

    pub fn support_size(&self) -> usize {
        self.support_size
    }

    pub fn labelings(&self) -> &[u64] {
        &self.labelings
    }

    pub fn len(&self) -> usize {
        self.labelings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labelings.is_empty()
    }

    pub fn contains(&self, labeling: u64) -> bool {
        self.labelings.contains(&labeling)
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.labelings
            .iter()
            .map(|&l| (0..self.support_size).map(|i| if l >> i & 1 == 1 { '1' } else { '0' }).collect())
            .collect()
    }
}

fn full_mask_or_zero(a: usize) -> u64 {
    if a == 0 {
        0
    } else {
        full_mask(a)
    }
}

/// `{h1 xor h2 : h1, h2 in cls}`, deduplicated and sorted.
pub fn symmetric_difference_class(cls: &FiniteHypothesisClass) -> Result<FiniteHypothesisClass> {
    symmetric_difference_class_capped(cls, DEFAULT_CLASS_CAP)
}

pub fn symmetric_difference_class_capped(
    cls: &FiniteHypothesisClass,
    cap: usize,
) -> Result<FiniteHypothesisClass> {
    let hs = cls.labelings();
    let mut out = BTreeSet::new();
    for (i, &a) in hs.iter().enumerate() {
        for &b in &hs[i..] {
            out.insert(a ^ b);
            if out.len() > cap {
                return Err(Error::ResourceLimit(format!(
                    "symmetric difference class exceeds cap of {cap}"
                )));
            }
        }
    }
    FiniteHypothesisClass::new(cls.support_size(), out.into_iter().collect())
}

/// `2 * max_h |P(I_h) - Q(I_h)|` by exhaustive enumeration of `cls`.
pub fn brute_force_divergence<F: Scalar>(
    p: &FiniteDistribution<F>,
    q: &FiniteDistribution<F>,
    cls: &FiniteHypothesisClass,
) -> Result<super::DivergenceValue<F>> {
    if p.support_size() != q.support_size() || p.support_size() != cls.support_size() {
        return invalid("support sizes of distributions and class differ");
    }
    if cls.is_empty() {
        return invalid("hypothesis class is empty");
    }
    let gap = cls
        .labelings()
        .iter()
        .map(|&h| (p.prob(h) - q.prob(h)).abs())
        .fold(F::zero(), F::max);
    super::DivergenceValue::new(F::lit(2.0) * gap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(cls: &FiniteHypothesisClass) -> BTreeSet<String> {
        cls.to_strings().into_iter().collect()
    }

    #[test]
    fn xor_of_singleton_is_zero_labeling() {
        let cls = FiniteHypothesisClass::from_strings(&["101"]).unwrap();
        let d = symmetric_difference_class(&cls).unwrap();
        assert_eq!(d.to_strings(), vec!["000"]);
    }

    #[test]
    fn full_class_is_xor_closed() {
        let cls = FiniteHypothesisClass::all_labelings(4).unwrap();
        assert_eq!(symmetric_difference_class(&cls).unwrap(), cls);
    }

    #[test]
    fn rays_on_three_points_give_intervals() {
        let rays = FiniteHypothesisClass::from_strings(&["000", "100", "110", "111"]).unwrap();
        assert_eq!(rays, FiniteHypothesisClass::thresholds(3).unwrap());
        let d = symmetric_difference_class(&rays).unwrap();
        let expected: BTreeSet<String> = ["000", "100", "110", "111", "010", "011", "001"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(set(&d), expected);
    }

    #[test]
    fn cap_is_enforced() {
        let cls = FiniteHypothesisClass::all_labelings(6).unwrap();
        let r = symmetric_difference_class_capped(&cls, 10);
        assert!(matches!(r, Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn brute_force_examples() {
        let all2 = FiniteHypothesisClass::all_labelings(2).unwrap();
        let p = FiniteDistribution::<f64>::new(vec![0.7, 0.3]).unwrap();
        let q = FiniteDistribution::new(vec![0.4, 0.6]).unwrap();
        let d = brute_force_divergence(&p, &q, &all2).unwrap();
        assert!((d.value() - 0.6).abs() < 1e-12);
        assert_eq!(brute_force_divergence(&p, &p, &all2).unwrap().value(), 0.0);

        let all4 = FiniteHypothesisClass::all_labelings(4).unwrap();
        let a = FiniteDistribution::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let b = FiniteDistribution::new(vec![0.0, 0.0, 0.25, 0.75]).unwrap();
        assert_eq!(brute_force_divergence(&a, &b, &all4).unwrap().value(), 2.0);
    }

    #[test]
    fn rejects_overlong_labelings() {
        assert!(FiniteHypothesisClass::new(2, vec![0b100]).is_err());
        assert!(FiniteHypothesisClass::new(2, vec![]).is_err());
    }
}
