//! Cooperative examples: inputs moved by gradient descent on the domain loss
//! so that the discriminator finds them easier, optionally anchored to the
//! original task prediction by a KL penalty.
//!
//! Network parameters are only borrowed immutably here, so generation can
//! never change `(theta, sigma, mu)`. Labels are copied, never recomputed.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nn::{cross_entropy, kl_divergence, NetworkTriple};
use crate::scalar::Scalar;
use crate::training::LabeledBatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UpdateRule {
    /// Domain-loss descent only.
    Plain,
    /// Domain-loss descent plus `kl_weight * KL(c(x0) || c(x))`.
    #[default]
    Kl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CooperativeConfig {
    pub beta: f64,
    pub steps: usize,
    pub step_size: f64,
    pub kl_weight: f64,
    pub rule: UpdateRule,
}

/// Step size picked from the `{0.01, 0.05, 0.1}` grid by source validation loss.
pub const DEFAULT_STEP_SIZE: f64 = 0.05;

impl Default for CooperativeConfig {
    fn default() -> Self {
        Self { beta: 0.5, steps: 5, step_size: DEFAULT_STEP_SIZE, kl_weight: 1.0, rule: UpdateRule::Kl }
    }
}

impl CooperativeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return invalid(format!("beta {} outside [0, 1]", self.beta));
        }
        if !(self.step_size >= 0.0) || !self.step_size.is_finite() {
            return invalid(format!("step size {} must be a finite non-negative number", self.step_size));
        }
        if !(self.kl_weight >= 0.0) || !self.kl_weight.is_finite() {
            return invalid(format!("KL weight {} must be finite and non-negative", self.kl_weight));
        }
        Ok(())
    }

    /// Number of updated points in a batch of `b`: `ceil(beta * b)`.
    pub fn updated_count(&self, b: usize) -> usize {
        updated_count(self.beta, b)
    }
}

pub fn updated_count(beta: f64, b: usize) -> usize {
    ((beta * b as f64) - 1e-9).ceil().clamp(0.0, b as f64) as usize
}

/// Original and updated points for one batch, with labels carried over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct CooperativeBatch<F> {
    /// Positions of the updated points in the batch they came from.
    pub indices: Vec<usize>,
    pub original: Vec<Vec<F>>,
    pub updated: Vec<Vec<F>>,
    pub class_labels: Vec<usize>,
    pub domain_labels: Vec<usize>,
    /// `KL(c(x0) || c(xt))` per point.
    pub kl_drift: Vec<F>,
    pub domain_loss_before: F,
    pub domain_loss_after: F,
}

impl<F: Scalar> CooperativeBatch<F> {
    pub fn len(&self) -> usize {
        self.updated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.updated.is_empty()
    }

    pub fn mean_kl_drift(&self) -> F {
        if self.kl_drift.is_empty() {
            return F::zero();
        }
        self.kl_drift.iter().copied().sum::<F>() / F::from_usize_lossy(self.kl_drift.len())
    }
}

/// Domain loss of one point and its gradient with respect to the input.
/// With `anchor = Some((p_logits, w))` the value and gradient include
/// `w * KL(softmax(p_logits) || c(x))`.
pub fn input_gradient<F: Scalar>(
    triple: &NetworkTriple<F>,
    x: &[F],
    domain: usize,
    anchor: Option<(&[F], F)>,
) -> Result<(F, Vec<F>)> {
    let ext = triple.extractor.forward(x)?;
    let dom = triple.domain_head.forward(ext.output())?;
    let (mut value, g) = cross_entropy(dom.output(), domain)?;
    let (_, mut dh) = triple.domain_head.backward(&dom, &g)?;
    if let Some((p, w)) = anchor {
        let task = triple.task_head.forward(ext.output())?;
        let (kl, gk) = kl_divergence(p, task.output())?;
        value += w * kl;
        let up: Vec<F> = gk.iter().map(|&v| v * w).collect();
        let (_, dk) = triple.task_head.backward(&task, &up)?;
        for (a, b) in dh.iter_mut().zip(dk) {
            *a += b;
        }
    }
    let (_, dx) = triple.extractor.backward(&ext, &dh)?;
    Ok((value, dx))
}

fn domain_loss<F: Scalar>(triple: &NetworkTriple<F>, x: &[F], d: usize) -> Result<F> {
    Ok(cross_entropy(&triple.discriminate(x)?, d)?.0)
}

fn run_updates<F: Scalar>(
    triple: &NetworkTriple<F>,
    batch: &LabeledBatch<F>,
    config: &CooperativeConfig,
    rule: UpdateRule,
) -> Result<CooperativeBatch<F>> {
    config.validate()?;
    let eta = F::lit(config.step_size);
    let w = F::lit(config.kl_weight);
    let n = batch.len();
    let mut updated = Vec::with_capacity(n);
    let mut kl_drift = Vec::with_capacity(n);
    let (mut before, mut after) = (F::zero(), F::zero());
    for (i, (x0, _, d)) in batch.iter().enumerate() {
        let p0 = triple.classify(x0)?;
        before += domain_loss(triple, x0, d)?;
        let mut x = x0.to_vec();
        if eta != F::zero() {
            for step in 0..config.steps {
                let anchor = (rule == UpdateRule::Kl).then_some((p0.as_slice(), w));
                let (_, g) = input_gradient(triple, &x, d, anchor)?;
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Generation { point: i, reason: format!("non-finite input gradient at step {step}") });
                }
                for (xi, gi) in x.iter_mut().zip(&g) {
                    *xi -= eta * *gi;
                }
            }
        }
        after += domain_loss(triple, &x, d)?;
        kl_drift.push(kl_divergence(&p0, &triple.classify(&x)?)?.0);
        updated.push(x);
    }
    let denom = F::from_usize_lossy(n.max(1));
    Ok(CooperativeBatch {
        indices: (0..n).collect(),
        original: batch.points().to_vec(),
        updated,
        class_labels: batch.class_labels().to_vec(),
        domain_labels: batch.domain_labels().to_vec(),
        kl_drift,
        domain_loss_before: before / denom,
        domain_loss_after: after / denom,
    })
}

/// `x_j = x_{j-1} - eta * grad_x L_SD(x_{j-1})`, `steps` times, for every point.
pub fn cooperate_update_plain<F: Scalar>(
    triple: &NetworkTriple<F>,
    batch: &LabeledBatch<F>,
    config: &CooperativeConfig,
) -> Result<CooperativeBatch<F>> {
    run_updates(triple, batch, config, UpdateRule::Plain)
}

/// Like [`cooperate_update_plain`] with the KL anchor to the frozen `x0` prediction.
pub fn cooperate_update_kl<F: Scalar>(
    triple: &NetworkTriple<F>,
    batch: &LabeledBatch<F>,
    config: &CooperativeConfig,
) -> Result<CooperativeBatch<F>> {
    run_updates(triple, batch, config, UpdateRule::Kl)
}

/// Picks `ceil(beta * B)` positions uniformly at random and updates them
/// with the configured rule.
pub fn select_and_cooperate<F: Scalar, R: Rng + ?Sized>(
    triple: &NetworkTriple<F>,
    batch: &LabeledBatch<F>,
    config: &CooperativeConfig,
    rng: &mut R,
) -> Result<CooperativeBatch<F>> {
    let m = config.updated_count(batch.len());
    let mut picked = index::sample(rng, batch.len(), m).into_vec();
    picked.sort_unstable();
    let mut cb = run_updates(triple, &batch.select(&picked), config, config.rule)?;
    cb.indices = picked;
    Ok(cb)
}

/// Replaces the selected points of each source batch with their updated
/// versions. Labels of every emitted point are the original labels.
pub fn assemble_mixed_sources<F: Scalar>(
    originals: &[LabeledBatch<F>],
    cooperative: &[CooperativeBatch<F>],
    beta: f64,
) -> Result<Vec<LabeledBatch<F>>> {
    if originals.len() != cooperative.len() {
        return Err(Error::ContractViolation(format!(
            "{} source batches but {} cooperative batches",
            originals.len(),
            cooperative.len()
        )));
    }
    originals
        .iter()
        .zip(cooperative)
        .map(|(orig, coop)| {
            let want = updated_count(beta, orig.len());
            if coop.indices.len() != want || coop.updated.len() != want {
                return Err(Error::ContractViolation(format!(
                    "batch of {} needs {want} updated points, got {}",
                    orig.len(),
                    coop.updated.len()
                )));
            }
            let mut points = orig.points().to_vec();
            for (k, &i) in coop.indices.iter().enumerate() {
                if i >= orig.len()
                    || orig.class_labels()[i] != coop.class_labels[k]
                    || orig.domain_labels()[i] != coop.domain_labels[k]
                {
                    return Err(Error::ContractViolation(format!("cooperative point {k} does not match batch position {i}")));
                }
                points[i] = coop.updated[k].clone();
            }
            orig.with_points(points)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, TripleArchitecture};
    use crate::oracle::{central_difference, max_relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture() -> (NetworkTriple<f64>, LabeledBatch<f64>) {
        let arch = TripleArchitecture {
            input_dim: 2,
            extractor_widths: vec![5],
            task_hidden: vec![],
            domain_hidden: vec![4],
            classes: 3,
            domains: 2,
            activation: Activation::Tanh,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = NetworkTriple::seeded(&arch, &mut rng).unwrap();
        let b = LabeledBatch::new(
            vec![vec![0.4, -0.2], vec![1.0, 0.5], vec![-0.7, 0.1], vec![0.0, 1.2]],
            vec![0, 1, 2, 0],
            vec![0, 1, 0, 1],
        )
        .unwrap();
        (t, b)
    }

    #[test]
    fn zero_steps_or_zero_eta_leave_points() {
        let (t, b) = fixture();
        let cfg = CooperativeConfig { steps: 0, ..Default::default() };
        assert_eq!(cooperate_update_plain(&t, &b, &cfg).unwrap().updated, b.points());
        let cfg = CooperativeConfig { step_size: 0.0, ..Default::default() };
        assert_eq!(cooperate_update_kl(&t, &b, &cfg).unwrap().updated, b.points());
    }

    #[test]
    fn one_plain_step_uses_the_input_gradient() {
        let (t, b) = fixture();
        let cfg = CooperativeConfig { steps: 1, step_size: 0.05, rule: UpdateRule::Plain, ..Default::default() };
        let cb = cooperate_update_plain(&t, &b, &cfg).unwrap();
        for (i, (x, _, d)) in b.iter().enumerate() {
            let fd = central_difference(x, 1e-5, |z| domain_loss(&t, z, d).unwrap());
            for j in 0..x.len() {
                assert!((cb.updated[i][j] - (x[j] - 0.05 * fd[j])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn kl_gradient_matches_finite_differences() {
        let (t, b) = fixture();
        let x0 = &b.points()[1];
        let p0 = t.classify(x0).unwrap();
        let x = vec![1.3, 0.1];
        let (_, g) = input_gradient(&t, &x, 1, Some((&p0, 1.0))).unwrap();
        let fd = central_difference(&x, 1e-5, |z| {
            domain_loss(&t, z, 1).unwrap() + kl_divergence(&p0, &t.classify(z).unwrap()).unwrap().0
        });
        assert!(max_relative_error(&g, &fd) < 1e-4);
    }

    #[test]
    fn parameters_and_labels_are_untouched() {
        let (t, b) = fixture();
        let before = serde_json::to_string(&t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cb = select_and_cooperate(&t, &b, &CooperativeConfig::default(), &mut rng).unwrap();
        assert_eq!(serde_json::to_string(&t).unwrap(), before);
        assert_eq!(cb.len(), 2);
        let mixed = assemble_mixed_sources(&[b.clone()], &[cb], 0.5).unwrap();
        assert_eq!(mixed[0].class_labels(), b.class_labels());
        assert_eq!(mixed[0].domain_labels(), b.domain_labels());
    }

    #[test]
    fn assembly_counts() {
        let (t, b) = fixture();
        let b8 = LabeledBatch::concat(&[b.clone(), b.clone()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (beta, want) in [(0.0, 0), (0.5, 4), (1.0, 8)] {
            let cfg = CooperativeConfig { beta, ..Default::default() };
            let cb = select_and_cooperate(&t, &b8, &cfg, &mut rng).unwrap();
            let out = assemble_mixed_sources(&[b8.clone()], &[cb], beta).unwrap();
            let changed = out[0].points().iter().zip(b8.points()).filter(|(a, b)| a != b).count();
            assert!(changed <= want);
            if beta == 0.0 {
                assert_eq!(out[0], b8);
            }
        }
        let cb = select_and_cooperate(&t, &b8, &CooperativeConfig::default(), &mut rng).unwrap();
        assert!(matches!(assemble_mixed_sources(&[b8.clone()], &[cb], 0.25), Err(Error::ContractViolation(_))));
    }
}
