use serde::{Deserialize, Serialize};

use super::space::{intersection_membership, max_pairwise_divergence};
use super::{DivergenceSpace, SourceCollection};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Result of the auxiliary-mixture check for `S_i = alpha P_i + beta R_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationReport<F> {
    pub rho: F,
    pub rho_star: F,
    /// `beta * max_i d(R_i, P_i)`.
    pub aux_penalty: F,
    /// `rho_star - aux_penalty >= rho`.
    pub condition_holds: bool,
    /// Candidates inside the original ball intersection.
    pub candidates_in_original: usize,
    /// Indices of candidates inside the original intersection but outside
    /// the augmented one. Must be empty whenever the condition holds.
    pub violations: Vec<usize>,
}

/// Forms the augmented sources and checks the inclusion condition. When it
/// holds, every candidate inside `∩ B_rho(P_i)` is also checked for
/// membership in `∩ B_rho*(S_i)`.
pub fn check_augmentation_condition<F: Scalar, S: DivergenceSpace<F>>(
    space: &S,
    sources: &SourceCollection<S::Dist, F>,
    aux: &[S::Dist],
    alpha: F,
    beta: F,
    candidates: &[S::Dist],
) -> Result<AugmentationReport<F>> {
    if alpha.is_nan() || beta.is_nan() || alpha < F::zero() || beta < F::zero() {
        return invalid("mixture weights alpha, beta must be non-negative");
    }
    if (alpha + beta - F::one()).abs() > F::tolerance(1e-9) {
        return invalid(format!("alpha + beta = {} must equal 1", alpha + beta));
    }
    if aux.len() != sources.len() {
        return invalid(format!("{} auxiliary distributions for {} sources", aux.len(), sources.len()));
    }

    let mut augmented = Vec::with_capacity(aux.len());
    let mut max_aux = F::zero();
    for (p, r) in sources.sources().iter().zip(aux) {
        augmented.push(space.combine(&[p, r], &[alpha, beta])?);
        max_aux = max_aux.max(space.divergence(r, p)?.value());
    }
    let augmented = SourceCollection::new(augmented, sources.weights().to_vec())?;

    let rho = max_pairwise_divergence(space, sources)?;
    let rho_star = max_pairwise_divergence(space, &augmented)?;
    let aux_penalty = beta * max_aux;
    let condition_holds = rho_star - aux_penalty >= rho - F::tolerance(super::MEMBERSHIP_TOL);

    let mut candidates_in_original = 0;
    let mut violations = Vec::new();
    if condition_holds {
        for (i, c) in candidates.iter().enumerate() {
            if intersection_membership(space, sources, c)? {
                candidates_in_original += 1;
                if !intersection_membership(space, &augmented, c)? {
                    violations.push(i);
                }
            }
        }
    }

    Ok(AugmentationReport { rho, rho_star, aux_penalty, condition_holds, candidates_in_original, violations })
}
