//! Target-error bounds on concrete instances, and the contraction tracer.
//!
//! A [`LabeledWorld`] knows how to measure the error of a hypothesis against
//! a labeler under a distribution, how to minimize the joint error exactly,
//! and which space measures the divergence over the symmetric difference of
//! its hypothesis class. Two worlds are exact: finite supports with an
//! enumerated class, and histograms under threshold rays.

mod contraction;
mod joint;
mod object;

pub use contraction::{contraction_trace, find_contracting_gamma, proxy_loss, ContractionConfig, ContractionTrace, GammaSearch};
pub use joint::{nn_ideal_joint_error, JointEstimate};
pub use object::{compare_objects, object_term, CandidateConfig, CandidateSource, ObjectComparison, ObjectMode, ObjectTerm};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{
    max_pairwise_divergence, DivergenceSpace, FiniteClassSpace, FiniteDistribution, FiniteHypothesisClass,
    HistogramDistribution, IntervalSpace, SourceCollection,
};
use crate::scalar::Scalar;

/// The four bound terms and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct BoundReport<F> {
    /// `None` for the two-distribution form.
    pub object_mode: Option<ObjectMode>,
    pub lambda_phi: F,
    /// Set when `lambda_phi` comes from training rather than enumeration.
    pub lambda_is_estimate: bool,
    pub weighted_source_error: F,
    pub min_divergence_to_target: F,
    pub max_pairwise_source_divergence: F,
    pub total_bound: F,
    pub observed_target_error: F,
}

impl<F: Scalar> BoundReport<F> {
    pub fn total(lambda: F, err: F, min_div: F, max_div: F) -> F {
        let half = F::lit(0.5);
        lambda + err + half * min_div + half * max_div
    }

    /// `observed <= total` up to `tol`.
    pub fn holds(&self, tol: F) -> bool {
        self.observed_target_error <= self.total_bound + tol
    }

    pub fn arithmetic_identity_holds(&self) -> bool {
        self.total_bound
            == Self::total(
                self.lambda_phi,
                self.weighted_source_error,
                self.min_divergence_to_target,
                self.max_pairwise_source_divergence,
            )
    }
}

/// Distributions, labelers and hypotheses with exact errors.
pub trait LabeledWorld<F: Scalar> {
    type Space: CandidateSource<F> + Sync;
    type Hyp: Copy;

    /// Divergence space over the symmetric difference of the class.
    fn space(&self) -> &Self::Space;

    /// `P(h != f)`.
    fn error(&self, dist: &<Self::Space as DivergenceSpace<F>>::Dist, labeler: Self::Hyp, h: Self::Hyp) -> F;

    /// `min_h E_P(h) + E_Q(h)` over the class.
    fn ideal_joint_error(
        &self,
        p: (&<Self::Space as DivergenceSpace<F>>::Dist, Self::Hyp),
        q: (&<Self::Space as DivergenceSpace<F>>::Dist, Self::Hyp),
    ) -> F;
}

/// Finite support with an explicit class; labelers are arbitrary labelings.
#[derive(Debug, Clone)]
pub struct FiniteWorld {
    class: FiniteHypothesisClass,
    delta: FiniteClassSpace,
}

impl FiniteWorld {
    pub fn new(class: FiniteHypothesisClass) -> Result<Self> {
        let delta = FiniteClassSpace::symmetric(&class)?;
        Ok(Self { class, delta })
    }

    pub fn class(&self) -> &FiniteHypothesisClass {
        &self.class
    }
}

impl<F: Scalar> LabeledWorld<F> for FiniteWorld {
    type Space = FiniteClassSpace;
    type Hyp = u64;

    fn space(&self) -> &FiniteClassSpace {
        &self.delta
    }

    fn error(&self, dist: &FiniteDistribution<F>, labeler: u64, h: u64) -> F {
        dist.disagreement(labeler, h)
    }

    fn ideal_joint_error(&self, p: (&FiniteDistribution<F>, u64), q: (&FiniteDistribution<F>, u64)) -> F {
        self.class
            .labelings()
            .iter()
            .map(|&h| p.0.disagreement(p.1, h) + q.0.disagreement(q.1, h))
            .fold(F::infinity(), F::min)
    }
}

/// Histograms on the line with rays `x <= a` as hypotheses. Their symmetric
/// difference is the interval class, so divergences are exact.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayWorld {
    space: IntervalSpace,
}

impl RayWorld {
    pub fn new() -> Self {
        Self::default()
    }
}

fn ray_error<F: Scalar>(dist: &HistogramDistribution<F>, t: F, a: F) -> F {
    dist.mass_between(a.min(t), a.max(t))
}

impl<F: Scalar> LabeledWorld<F> for RayWorld {
    type Space = IntervalSpace;
    type Hyp = F;

    fn space(&self) -> &IntervalSpace {
        &self.space
    }

    fn error(&self, dist: &HistogramDistribution<F>, labeler: F, h: F) -> F {
        ray_error(dist, labeler, h)
    }

    /// The joint error is piecewise linear in the threshold with kinks at
    /// grid edges and at the two labelers, so those points suffice.
    fn ideal_joint_error(&self, p: (&HistogramDistribution<F>, F), q: (&HistogramDistribution<F>, F)) -> F {
        p.0.edges()
            .iter()
            .chain(q.0.edges())
            .copied()
            .chain([p.1, q.1, F::neg_infinity(), F::infinity()])
            .map(|a| ray_error(p.0, p.1, a) + ray_error(q.0, q.1, a))
            .fold(F::infinity(), F::min)
    }
}

type Dist<F, W> = <<W as LabeledWorld<F>>::Space as DivergenceSpace<F>>::Dist;

/// Exact `min_h E_P(h) + E_Q(h)`.
pub fn ideal_joint_error<F: Scalar, W: LabeledWorld<F>>(world: &W, p: (&Dist<F, W>, W::Hyp), q: (&Dist<F, W>, W::Hyp)) -> F {
    world.ideal_joint_error(p, q)
}

/// Two-distribution form `lambda + E_P(h) + d(P, Q) / 2`.
pub fn da_bound_report<F: Scalar, W: LabeledWorld<F>>(
    world: &W,
    h: W::Hyp,
    source: (&Dist<F, W>, W::Hyp),
    target: (&Dist<F, W>, W::Hyp),
) -> Result<BoundReport<F>> {
    let lambda = world.ideal_joint_error(source, target);
    let err = world.error(source.0, source.1, h);
    let d = world.space().divergence(source.0, target.0)?.value();
    Ok(BoundReport {
        object_mode: None,
        lambda_phi: lambda,
        lambda_is_estimate: false,
        weighted_source_error: err,
        min_divergence_to_target: d,
        max_pairwise_source_divergence: F::zero(),
        total_bound: BoundReport::total(lambda, err, d, F::zero()),
        observed_target_error: world.error(target.0, target.1, h),
    })
}

/// Multi-source form with the object term minimized over the candidate set of `mode`.
pub fn dg_bound_report<F, W>(
    world: &W,
    h: W::Hyp,
    sources: &SourceCollection<Dist<F, W>, F>,
    labelers: &[W::Hyp],
    target: (&Dist<F, W>, W::Hyp),
    mode: ObjectMode,
    candidates: &CandidateConfig,
) -> Result<BoundReport<F>>
where
    F: Scalar,
    W: LabeledWorld<F>,
    Dist<F, W>: Send + Sync,
{
    let mut v = dg_bound_reports(world, &[h], sources, labelers, target, mode, candidates)?;
    Ok(v.remove(0))
}

/// [`dg_bound_report`] for several hypotheses, sharing the hypothesis-free terms.
pub fn dg_bound_reports<F, W>(
    world: &W,
    hs: &[W::Hyp],
    sources: &SourceCollection<Dist<F, W>, F>,
    labelers: &[W::Hyp],
    target: (&Dist<F, W>, W::Hyp),
    mode: ObjectMode,
    candidates: &CandidateConfig,
) -> Result<Vec<BoundReport<F>>>
where
    F: Scalar,
    W: LabeledWorld<F>,
    Dist<F, W>: Send + Sync,
{
    if labelers.len() != sources.len() {
        return invalid(format!("{} labelers for {} sources", labelers.len(), sources.len()));
    }
    let mut lambda = F::zero();
    for ((p, &f), &phi) in sources.sources().iter().zip(labelers).zip(sources.weights()) {
        lambda += phi * world.ideal_joint_error((p, f), target);
    }
    let term = object_term(world.space(), sources, target.0, mode, candidates)?;
    let rho = max_pairwise_divergence(world.space(), sources)?;
    Ok(hs
        .iter()
        .map(|&h| {
            let mut err = F::zero();
            for ((p, &f), &phi) in sources.sources().iter().zip(labelers).zip(sources.weights()) {
                err += phi * world.error(p, f, h);
            }
            BoundReport {
                object_mode: Some(mode),
                lambda_phi: lambda,
                lambda_is_estimate: false,
                weighted_source_error: err,
                min_divergence_to_target: term.min_divergence,
                max_pairwise_source_divergence: rho,
                total_bound: BoundReport::total(lambda, err, term.min_divergence, rho),
                observed_target_error: world.error(target.0, target.1, h),
            }
        })
        .collect())
}
