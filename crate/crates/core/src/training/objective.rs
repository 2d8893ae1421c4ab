//! Batch losses of the source-source adversarial objective and their
//! gradients for the three parameter groups.
//!
//! Descent directions: the task head descends `L_T + w_H * H`, the domain
//! head descends `L_SD`, and the extractor descends `L_T + w_H * H` while
//! receiving `-lambda * dL_SD/dr` through gradient reversal.

use crate::error::{invalid, Result};
use crate::nn::{cross_entropy, entropy_loss, gradient_reversal, GradientTape, NetworkTriple};
use crate::scalar::Scalar;

use super::LabeledBatch;

/// Gradients for `(theta, sigma, mu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleGradients<F> {
    pub extractor: GradientTape<F>,
    pub task_head: GradientTape<F>,
    pub domain_head: GradientTape<F>,
}

impl<F: Scalar> TripleGradients<F> {
    pub fn zeros_like(t: &NetworkTriple<F>) -> Self {
        Self {
            extractor: GradientTape::zeros_like(&t.extractor),
            task_head: GradientTape::zeros_like(&t.task_head),
            domain_head: GradientTape::zeros_like(&t.domain_head),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.extractor.is_finite() && self.task_head.is_finite() && self.domain_head.is_finite()
    }
}

/// Weights of the individual terms when assembling the objective.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveWeights<'a, F> {
    pub lambda: F,
    pub entropy: F,
    pub domain_weights: Option<&'a [F]>,
}

/// Loss values and gradients from one pass over a batch.
#[derive(Debug, Clone)]
pub struct ObjectiveStep<F> {
    pub task_loss: F,
    pub domain_loss: F,
    pub entropy: F,
    pub grads: TripleGradients<F>,
}

fn check_labels<F: Scalar>(triple: &NetworkTriple<F>, batch: &LabeledBatch<F>) -> Result<()> {
    if batch.is_empty() {
        return invalid("empty batch");
    }
    if let Some(c) = batch.class_labels().iter().find(|&&c| c >= triple.classes()) {
        return invalid(format!("class label {c} but task head has {} outputs", triple.classes()));
    }
    if let Some(d) = batch.domain_labels().iter().find(|&&d| d >= triple.domains()) {
        return invalid(format!("unknown domain label {d}; discriminator has {} outputs", triple.domains()));
    }
    Ok(())
}

/// Per-point task weights: `phi_d / n_d`, or `1 / n` without `phi`.
fn task_point_weights<F: Scalar>(batch: &LabeledBatch<F>, phi: Option<&[F]>) -> Result<Vec<F>> {
    let n = batch.len();
    match phi {
        None => Ok(vec![F::one() / F::from_usize_lossy(n); n]),
        Some(phi) => {
            let mut counts = vec![0usize; phi.len()];
            for &d in batch.domain_labels() {
                if d >= phi.len() {
                    return invalid(format!("domain {d} has no pooling weight"));
                }
                counts[d] += 1;
            }
            Ok(batch
                .domain_labels()
                .iter()
                .map(|&d| phi[d] / F::from_usize_lossy(counts[d]))
                .collect())
        }
    }
}

/// Full objective in one pass. With `lambda == 0` the domain head is still
/// trained but nothing flows from it into the extractor.
pub fn objective<F: Scalar>(
    triple: &NetworkTriple<F>,
    batch: &LabeledBatch<F>,
    weights: ObjectiveWeights<'_, F>,
) -> Result<ObjectiveStep<F>> {
    check_labels(triple, batch)?;
    let n_inv = F::one() / F::from_usize_lossy(batch.len());
    let point_w = task_point_weights(batch, weights.domain_weights)?;
    let mut grads = TripleGradients::zeros_like(triple);
    let (mut lt, mut ld, mut le) = (F::zero(), F::zero(), F::zero());

    for ((x, c, d), &wt) in batch.iter().zip(&point_w) {
        let ext = triple.extractor.forward(x)?;
        let h = ext.output();

        let task = triple.task_head.forward(h)?;
        let (ce, g_ce) = cross_entropy(task.output(), c)?;
        lt += wt * ce;
        let mut up: Vec<F> = g_ce.iter().map(|&g| g * wt).collect();
        if weights.entropy != F::zero() {
            let (ent, g_ent) = entropy_loss(task.output());
            le += n_inv * ent;
            for (u, &g) in up.iter_mut().zip(&g_ent) {
                *u += weights.entropy * n_inv * g;
            }
        }
        let mut dh = triple.task_head.backward_into(&task, &up, &mut grads.task_head)?;

        let dom = triple.domain_head.forward(h)?;
        let (dl, g_dl) = cross_entropy(dom.output(), d)?;
        ld += n_inv * dl;
        let up_d: Vec<F> = g_dl.iter().map(|&g| g * n_inv).collect();
        let dh_dom = triple.domain_head.backward_into(&dom, &up_d, &mut grads.domain_head)?;
        if weights.lambda != F::zero() {
            for (a, b) in dh.iter_mut().zip(gradient_reversal(&dh_dom, weights.lambda)) {
                *a += b;
            }
        }

        triple.extractor.backward_into(&ext, &dh, &mut grads.extractor)?;
    }

    Ok(ObjectiveStep { task_loss: lt, domain_loss: ld, entropy: le, grads })
}

/// Mean task cross-entropy with gradients for `sigma` and `theta`.
pub fn task_loss<F: Scalar>(triple: &NetworkTriple<F>, batch: &LabeledBatch<F>) -> Result<(F, TripleGradients<F>)> {
    check_labels(triple, batch)?;
    let n_inv = F::one() / F::from_usize_lossy(batch.len());
    let mut grads = TripleGradients::zeros_like(triple);
    let mut total = F::zero();
    for (x, c, _) in batch.iter() {
        let ext = triple.extractor.forward(x)?;
        let task = triple.task_head.forward(ext.output())?;
        let (ce, g) = cross_entropy(task.output(), c)?;
        total += ce * n_inv;
        let up: Vec<F> = g.iter().map(|&v| v * n_inv).collect();
        let dh = triple.task_head.backward_into(&task, &up, &mut grads.task_head)?;
        triple.extractor.backward_into(&ext, &dh, &mut grads.extractor)?;
    }
    Ok((total, grads))
}

/// Mean multi-class domain cross-entropy. The domain-head gradient descends
/// the loss; the extractor gradient is passed through gradient reversal.
pub fn source_domain_loss<F: Scalar>(
    triple: &NetworkTriple<F>,
    batch: &LabeledBatch<F>,
    lambda: F,
) -> Result<(F, TripleGradients<F>)> {
    check_labels(triple, batch)?;
    let n_inv = F::one() / F::from_usize_lossy(batch.len());
    let mut grads = TripleGradients::zeros_like(triple);
    let mut total = F::zero();
    for (x, _, d) in batch.iter() {
        let ext = triple.extractor.forward(x)?;
        let dom = triple.domain_head.forward(ext.output())?;
        let (ce, g) = cross_entropy(dom.output(), d)?;
        total += ce * n_inv;
        let up: Vec<F> = g.iter().map(|&v| v * n_inv).collect();
        let dh = triple.domain_head.backward_into(&dom, &up, &mut grads.domain_head)?;
        triple.extractor.backward_into(&ext, &gradient_reversal(&dh, lambda), &mut grads.extractor)?;
    }
    Ok((total, grads))
}

/// Mean domain loss only, without gradients.
pub fn mean_domain_loss<F: Scalar>(triple: &NetworkTriple<F>, batch: &LabeledBatch<F>) -> Result<F> {
    check_labels(triple, batch)?;
    let n_inv = F::one() / F::from_usize_lossy(batch.len());
    let mut total = F::zero();
    for (x, _, d) in batch.iter() {
        total += cross_entropy(&triple.discriminate(x)?, d)?.0 * n_inv;
    }
    Ok(total)
}

/// Mean entropy of the task outputs, with gradients for `sigma` and `theta`.
pub fn entropy_term<F: Scalar>(triple: &NetworkTriple<F>, batch: &LabeledBatch<F>) -> Result<(F, TripleGradients<F>)> {
    if batch.is_empty() {
        return invalid("empty batch");
    }
    let n_inv = F::one() / F::from_usize_lossy(batch.len());
    let mut grads = TripleGradients::zeros_like(triple);
    let mut total = F::zero();
    for (x, _, _) in batch.iter() {
        let ext = triple.extractor.forward(x)?;
        let task = triple.task_head.forward(ext.output())?;
        let (h, g) = entropy_loss(task.output());
        total += h * n_inv;
        let up: Vec<F> = g.iter().map(|&v| v * n_inv).collect();
        let dh = triple.task_head.backward_into(&task, &up, &mut grads.task_head)?;
        triple.extractor.backward_into(&ext, &dh, &mut grads.extractor)?;
    }
    Ok((total, grads))
}

/// `2 / (1 + exp(-kappa * p)) - 1` with `p = epoch / max_epoch`.
pub fn lambda_schedule(epoch: usize, max_epoch: usize, kappa: f64) -> f64 {
    assert!(kappa > 0.0, "kappa must be positive");
    assert!(epoch <= max_epoch && max_epoch > 0, "epoch {epoch} outside 0..={max_epoch}");
    let p = epoch as f64 / max_epoch as f64;
    2.0 / (1.0 + (-kappa * p).exp()) - 1.0
}
