use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::nn::{NetworkTriple, TripleArchitecture};
use crate::scalar::Scalar;
use crate::training::{accuracy, train, LabeledBatch, Method, TrainingConfig};

/// Upper estimate of the ideal joint error from trained networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointEstimate {
    pub lambda: f64,
    /// Always true: training only finds some hypothesis, not the best one.
    pub is_estimate: bool,
    pub per_seed: Vec<f64>,
}

/// Best of `seeds` joint trainings on the labeled union of both samples,
/// scored as `E_P(h) + E_Q(h)` on those samples.
pub fn nn_ideal_joint_error<F: Scalar>(
    arch: &TripleArchitecture,
    source: &LabeledBatch<F>,
    target: &LabeledBatch<F>,
    config: &TrainingConfig,
    seeds: usize,
) -> Result<JointEstimate> {
    if source.is_empty() || target.is_empty() {
        return invalid("joint error needs nonempty source and target samples");
    }
    if seeds == 0 {
        return invalid("at least one training seed is required");
    }
    let relabel = |b: &LabeledBatch<F>, d: usize| LabeledBatch::single_domain(b.points().to_vec(), b.class_labels().to_vec(), d);
    let pair = [relabel(source, 0)?, relabel(target, 1)?];
    let arch = TripleArchitecture { domains: 2, ..arch.clone() };
    let per_seed = (0..seeds as u64)
        .map(|s| {
            let seed = config.seed.wrapping_add(s);
            let init = NetworkTriple::seeded(&arch, &mut ChaCha8Rng::seed_from_u64(seed))?;
            let cfg = TrainingConfig { seed, ..config.clone() };
            let (net, _) = train(init, &pair, None, &cfg, &Method::Erm, None)?;
            Ok((1.0 - accuracy(&net, &pair[0])?) + (1.0 - accuracy(&net, &pair[1])?))
        })
        .collect::<Result<Vec<f64>>>()?;
    let lambda = per_seed.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(JointEstimate { lambda, is_estimate: true, per_seed })
}
