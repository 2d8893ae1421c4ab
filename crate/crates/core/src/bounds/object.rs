use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    intersection_membership, mixture, DivergenceSpace, FiniteClassSpace, FiniteDistribution,
    IntervalSpace, SourceCollection,
};
use crate::oracle::simplex_grid;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectMode {
    MixtureHull,
    BallIntersection,
}

/// Sizes of the candidate sets standing in for the object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CandidateConfig {
    /// Mixture weights are multiples of `1 / grid_steps`.
    pub grid_steps: usize,
    pub perturbations: usize,
    pub seed: u64,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        Self { grid_steps: 50, perturbations: 200, seed: 0 }
    }
}

/// Spaces that can propose distributions near the sources.
pub trait CandidateSource<F: Scalar>: DivergenceSpace<F> {
    fn perturb<R: Rng>(&self, sources: &[Self::Dist], base: &Self::Dist, rng: &mut R) -> Option<Self::Dist>;
}

fn random_simplex<F: Scalar, R: Rng>(k: usize, rng: &mut R) -> Vec<F> {
    let raw: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| F::lit(v / s)).collect()
}

impl<F: Scalar> CandidateSource<F> for IntervalSpace {
    /// Bin shifts and fractional translations of a source or mixture, and
    /// random blends of those with the base.
    fn perturb<R: Rng>(&self, sources: &[Self::Dist], base: &Self::Dist, rng: &mut R) -> Option<Self::Dist> {
        let pick = if rng.random_bool(0.5) { base.clone() } else { sources[rng.random_range(0..sources.len())].clone() };
        let moved = match rng.random_range(0..3) {
            0 => pick.shift_bins(rng.random_range(-3i64..=3) as isize)?,
            1 => {
                let width = pick.edges()[1] - pick.edges()[0];
                pick.translate(F::lit(rng.random_range(-1.5..1.5)) * width)
            }
            _ => pick,
        };
        let t = F::lit(rng.random::<f64>());
        self.combine(&[&moved, base], &[t, F::one() - t]).ok()
    }
}

impl<F: Scalar> CandidateSource<F> for FiniteClassSpace {
    /// Moves a random share of mass between two random support points.
    fn perturb<R: Rng>(&self, sources: &[Self::Dist], base: &Self::Dist, rng: &mut R) -> Option<Self::Dist> {
        let start = if rng.random_bool(0.5) { base } else { &sources[rng.random_range(0..sources.len())] };
        let mut m = start.mass().to_vec();
        let n = m.len();
        for _ in 0..rng.random_range(1..=3) {
            let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
            let moved = m[i] * F::lit(rng.random::<f64>());
            m[i] -= moved;
            m[j] += moved;
        }
        FiniteDistribution::new(m).ok()
    }
}

/// The third bound term over one candidate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ObjectTerm<F> {
    pub mode: ObjectMode,
    pub min_divergence: F,
    pub candidates: usize,
    /// Mixture weights of the minimizer, when it is a grid point.
    pub argmin_weights: Option<Vec<F>>,
}

/// `min_S d(S, Q)` over the candidate set of `mode`. The ball set is the
/// mixture grid plus perturbations kept only when they lie in every source
/// ball, so it always contains the mixture set.
pub fn object_term<F, S>(
    space: &S,
    sources: &SourceCollection<S::Dist, F>,
    target: &S::Dist,
    mode: ObjectMode,
    config: &CandidateConfig,
) -> Result<ObjectTerm<F>>
where
    F: Scalar,
    S: CandidateSource<F> + Sync,
    S::Dist: Send + Sync,
{
    let grid: Vec<Vec<F>> = simplex_grid(sources.len(), config.grid_steps.max(1));
    let scored: Vec<(F, usize)> = grid
        .par_iter()
        .enumerate()
        .map(|(i, w)| -> Result<(F, usize)> {
            let m = mixture(space, sources, w)?;
            Ok((space.divergence(&m, target)?.value(), i))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut best, mut best_i) = (F::infinity(), None);
    for (d, i) in scored {
        if d < best {
            best = d;
            best_i = Some(i);
        }
    }
    let mut count = grid.len();

    if mode == ObjectMode::BallIntersection {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut proposals = Vec::with_capacity(config.perturbations);
        let mut attempts = 0;
        while proposals.len() < config.perturbations && attempts < config.perturbations * 20 {
            attempts += 1;
            let w = random_simplex::<F, _>(sources.len(), &mut rng);
            let base = mixture(space, sources, &w)?;
            if let Some(p) = space.perturb(sources.sources(), &base, &mut rng) {
                proposals.push(p);
            }
        }
        let kept: Vec<F> = proposals
            .par_iter()
            .map(|p| -> Result<Option<F>> {
                if intersection_membership(space, sources, p)? {
                    Ok(Some(space.divergence(p, target)?.value()))
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        count += kept.len();
        for d in kept {
            if d < best {
                best = d;
                best_i = None;
            }
        }
    }

    if count == 0 || !best.is_finite() {
        return Err(Error::DegenerateObject(format!("no candidates for {mode:?}")));
    }
    Ok(ObjectTerm { mode, min_divergence: best, candidates: count, argmin_weights: best_i.map(|i| grid[i].clone()) })
}

/// Both object terms on the same instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ObjectComparison<F> {
    pub mixture_hull: ObjectTerm<F>,
    pub ball_intersection: ObjectTerm<F>,
    /// The mode with the smaller term; mixture hull on ties.
    pub tighter: ObjectMode,
}

pub fn compare_objects<F, S>(
    space: &S,
    sources: &SourceCollection<S::Dist, F>,
    target: &S::Dist,
    config: &CandidateConfig,
) -> Result<ObjectComparison<F>>
where
    F: Scalar,
    S: CandidateSource<F> + Sync,
    S::Dist: Send + Sync,
{
    let mixture_hull = object_term(space, sources, target, ObjectMode::MixtureHull, config)?;
    let ball_intersection = object_term(space, sources, target, ObjectMode::BallIntersection, config)?;
    let tighter = if ball_intersection.min_divergence < mixture_hull.min_divergence {
        ObjectMode::BallIntersection
    } else {
        ObjectMode::MixtureHull
    };
    Ok(ObjectComparison { mixture_hull, ball_intersection, tighter })
}
