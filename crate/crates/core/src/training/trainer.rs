use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dannce::{assemble_mixed_sources, select_and_cooperate, CooperativeConfig};
use crate::error::{invalid, Error, Result};
use crate::estimation::{proxy_a_distance, DomainSample, ProxyConfig};
use crate::nn::{argmax, NetworkTriple};
use crate::scalar::Scalar;

use super::objective::{mean_domain_loss, objective, source_domain_loss, task_loss, ObjectiveWeights, TripleGradients};
use super::{lambda_schedule, LabeledBatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaMode {
    /// `2 / (1 + exp(-kappa p)) - 1`.
    #[default]
    PhaseIn,
    Zero,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub epochs: usize,
    /// Points drawn from each source per step.
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Fraction of epochs after which the learning rate drops once.
    pub lr_decay_fraction: f64,
    pub lr_decay_factor: f64,
    pub kappa: f64,
    pub entropy_weight: f64,
    pub lambda_mode: LambdaMode,
    /// Used by [`LambdaMode::Constant`].
    pub lambda_value: f64,
    pub seed: u64,
    /// Pooling weights over sources; `None` weighs every point equally.
    pub domain_weights: Option<Vec<f64>>,
    /// Proxy distances every this many epochs; 0 disables them.
    pub proxy_every: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            learning_rate: 0.05,
            lr_decay_fraction: 0.8,
            lr_decay_factor: 0.1,
            kappa: 10.0,
            entropy_weight: 0.1,
            lambda_mode: LambdaMode::PhaseIn,
            lambda_value: 1.0,
            seed: 0,
            domain_weights: None,
            proxy_every: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return invalid("epochs and batch size must be positive");
        }
        let positive = [("learning rate", self.learning_rate), ("kappa", self.kappa), ("decay factor", self.lr_decay_factor)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.lr_decay_fraction) {
            return invalid("decay fraction must lie in [0, 1]");
        }
        if !(self.entropy_weight >= 0.0) || !(self.lambda_value >= 0.0) {
            return invalid("entropy weight and lambda must be non-negative");
        }
        if let Some(w) = &self.domain_weights {
            if w.iter().any(|&x| !(x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return invalid("domain weights must lie in the simplex");
            }
        }
        Ok(())
    }

    pub fn lambda_at(&self, epoch: usize) -> f64 {
        match self.lambda_mode {
            LambdaMode::PhaseIn => lambda_schedule(epoch, self.epochs, self.kappa),
            LambdaMode::Zero => 0.0,
            LambdaMode::Constant => self.lambda_value,
        }
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let decay_at = (self.lr_decay_fraction * self.epochs as f64).floor() as usize;
        if epoch >= decay_at && self.lr_decay_fraction < 1.0 {
            self.learning_rate * self.lr_decay_factor
        } else {
            self.learning_rate
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Method {
    /// Task loss only. The domain head is still fitted as a detached probe
    /// so that a domain-loss curve exists, but nothing flows back from it.
    Erm,
    Dann,
    Dannce(CooperativeConfig),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Erm => "erm",
            Method::Dann => "dann",
            Method::Dannce(_) => "dannce",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lambda: f64,
    pub learning_rate: f64,
    pub mean_task_loss: f64,
    pub mean_domain_loss: f64,
    pub mean_entropy: f64,
    pub source_accuracies: Vec<f64>,
    pub target_accuracy: Option<f64>,
    /// Proxy distance between each source and the target in representation space.
    pub proxy_divergences: Vec<f64>,
    /// Cooperative batches whose mean domain loss went up.
    pub cooperative_violations: usize,
    pub cooperative_loss_before: Option<f64>,
    pub cooperative_loss_after: Option<f64>,
    pub mean_kl_drift: Option<f64>,
}

/// Fraction of points whose predicted class equals the label.
pub fn accuracy<F: Scalar>(triple: &NetworkTriple<F>, data: &LabeledBatch<F>) -> Result<f64> {
    if data.is_empty() {
        return invalid("accuracy of an empty set");
    }
    let mut hits = 0usize;
    for (x, c, _) in data.iter() {
        if argmax(&triple.classify(x)?) == c {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

fn diverged(epoch: usize, e: Error) -> Error {
    match e {
        Error::TrainingDivergence { reason, .. } => Error::TrainingDivergence { epoch, reason },
        other => other,
    }
}

fn apply<F: Scalar>(triple: &mut NetworkTriple<F>, g: &TripleGradients<F>, lr: F, epoch: usize) -> Result<()> {
    triple.extractor.sgd_step(&g.extractor, lr).map_err(|e| diverged(epoch, e))?;
    triple.task_head.sgd_step(&g.task_head, lr).map_err(|e| diverged(epoch, e))?;
    triple.domain_head.sgd_step(&g.domain_head, lr).map_err(|e| diverged(epoch, e))
}

/// Observer for every parameter state reached during training, called
/// after each step with `(epoch, step, triple)`.
pub type StepObserver<'a, F> = &'a mut dyn FnMut(usize, usize, &NetworkTriple<F>);

/// Runs the source-source objective with per-domain balanced batches and
/// one simultaneous step on all three networks per batch.
///
/// Every source must carry a single domain label equal to its position.
pub fn train<F: Scalar>(
    mut triple: NetworkTriple<F>,
    sources: &[LabeledBatch<F>],
    target: Option<&LabeledBatch<F>>,
    config: &TrainingConfig,
    method: &Method,
    mut observer: Option<StepObserver<'_, F>>,
) -> Result<(NetworkTriple<F>, Vec<EpochMetrics>)> {
    config.validate()?;
    if sources.len() < 2 {
        return invalid(format!("need at least two sources, got {}", sources.len()));
    }
    if triple.domains() != sources.len() {
        return invalid(format!("discriminator has {} outputs for {} sources", triple.domains(), sources.len()));
    }
    for (i, s) in sources.iter().enumerate() {
        if s.is_empty() || s.domain_labels().iter().any(|&d| d != i) {
            return invalid(format!("source {i} must be nonempty with domain label {i}"));
        }
    }
    if let Some(w) = &config.domain_weights {
        if w.len() != sources.len() {
            return invalid("one domain weight per source required");
        }
    }
    if let Method::Dannce(c) = method {
        c.validate()?;
    }
    let phi: Option<Vec<F>> = config.domain_weights.as_ref().map(|w| w.iter().map(|&v| F::lit(v)).collect());

    let min_len = sources.iter().map(LabeledBatch::len).min().unwrap_or(0);
    let bsz = config.batch_size.min(min_len);
    let steps = min_len / bsz;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut orders: Vec<Vec<usize>> = sources.iter().map(|s| (0..s.len()).collect()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lambda = config.lambda_at(epoch);
        let lr = config.learning_rate_at(epoch);
        let (lambda_f, lr_f) = (F::lit(lambda), F::lit(lr));
        let entropy_w = match method {
            Method::Erm => F::zero(),
            _ => F::lit(config.entropy_weight),
        };
        for o in orders.iter_mut() {
            o.shuffle(&mut shuffle_rng);
        }
        let mut select_rng = ChaCha8Rng::seed_from_u64(config.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(epoch as u64 + 1)));

        let (mut sum_t, mut sum_d, mut sum_h) = (0.0, 0.0, 0.0);
        let (mut coop_before, mut coop_after, mut coop_kl, mut coop_n, mut violations) = (0.0, 0.0, 0.0, 0usize, 0usize);

        for step in 0..steps {
            let mut per_domain: Vec<LabeledBatch<F>> = sources
                .iter()
                .zip(&orders)
                .map(|(s, o)| s.select(&o[step * bsz..(step + 1) * bsz]))
                .collect();

            if let Method::Dannce(cfg) = method {
                let coops = per_domain
                    .iter()
                    .map(|b| select_and_cooperate(&triple, b, cfg, &mut select_rng))
                    .collect::<Result<Vec<_>>>()?;
                for c in coops.iter().filter(|c| !c.is_empty()) {
                    let (b, a) = (c.domain_loss_before.as_f64(), c.domain_loss_after.as_f64());
                    if a > b + 1e-9 {
                        violations += 1;
                    }
                    coop_before += b;
                    coop_after += a;
                    coop_kl += c.mean_kl_drift().as_f64();
                    coop_n += 1;
                }
                per_domain = assemble_mixed_sources(&per_domain, &coops, cfg.beta)?;
            }

            let batch = LabeledBatch::concat(&per_domain)?;
            let (lt, ld, lh, grads) = match method {
                Method::Erm => {
                    let (lt, gt) = task_loss(&triple, &batch)?;
                    let (ld, gd) = source_domain_loss(&triple, &batch, F::zero())?;
                    let g = TripleGradients { extractor: gt.extractor, task_head: gt.task_head, domain_head: gd.domain_head };
                    (lt, ld, F::zero(), g)
                }
                _ => {
                    let w = ObjectiveWeights { lambda: lambda_f, entropy: entropy_w, domain_weights: phi.as_deref() };
                    let s = objective(&triple, &batch, w)?;
                    (s.task_loss, s.domain_loss, s.entropy, s.grads)
                }
            };
            if !(lt.is_finite() && ld.is_finite() && lh.is_finite()) {
                return Err(Error::TrainingDivergence { epoch, reason: format!("non-finite loss at step {step}") });
            }
            apply(&mut triple, &grads, lr_f, epoch)?;
            sum_t += lt.as_f64();
            sum_d += ld.as_f64();
            sum_h += lh.as_f64();
            if let Some(obs) = observer.as_mut() {
                obs(epoch, step, &triple);
            }
        }

        let source_accuracies = sources.iter().map(|s| accuracy(&triple, s)).collect::<Result<Vec<_>>>()?;
        let target_accuracy = target.map(|t| accuracy(&triple, t)).transpose()?;
        let proxy_divergences = match target {
            Some(t) if config.proxy_every > 0 && epoch % config.proxy_every == 0 => {
                representation_proxies(&triple, sources, t, config.seed.wrapping_add(epoch as u64))?
            }
            _ => Vec::new(),
        };
        let sn = steps as f64;
        let cn = coop_n.max(1) as f64;
        let coop = coop_n > 0;
        history.push(EpochMetrics {
            epoch,
            lambda,
            learning_rate: lr,
            mean_task_loss: sum_t / sn,
            mean_domain_loss: sum_d / sn,
            mean_entropy: sum_h / sn,
            source_accuracies,
            target_accuracy,
            proxy_divergences,
            cooperative_violations: violations,
            cooperative_loss_before: coop.then_some(coop_before / cn),
            cooperative_loss_after: coop.then_some(coop_after / cn),
            mean_kl_drift: coop.then_some(coop_kl / cn),
        });
    }
    Ok((triple, history))
}

/// [`train`] with [`Method::Dann`] and no target.
pub fn train_dann<F: Scalar>(
    triple: NetworkTriple<F>,
    sources: &[LabeledBatch<F>],
    config: &TrainingConfig,
) -> Result<(NetworkTriple<F>, Vec<EpochMetrics>)> {
    train(triple, sources, None, config, &Method::Dann, None)
}

fn representation_proxies<F: Scalar>(
    triple: &NetworkTriple<F>,
    sources: &[LabeledBatch<F>],
    target: &LabeledBatch<F>,
    seed: u64,
) -> Result<Vec<f64>> {
    let embed = |b: &LabeledBatch<F>, id: usize| -> Result<DomainSample<F>> {
        let pts = b.points().iter().map(|x| triple.extractor.predict(x)).collect::<Result<Vec<_>>>()?;
        DomainSample::new(pts, id)
    };
    let t = embed(target, sources.len())?;
    let cfg = ProxyConfig { epochs: 30, ..Default::default() };
    sources
        .iter()
        .enumerate()
        .map(|(i, s)| proxy_a_distance(&embed(s, i)?, &t, &cfg, seed).map(|v| v.as_f64()))
        .collect()
}

/// Mean domain loss of `triple` over all sources jointly.
pub fn dataset_domain_loss<F: Scalar>(triple: &NetworkTriple<F>, sources: &[LabeledBatch<F>]) -> Result<F> {
    mean_domain_loss(triple, &LabeledBatch::concat(sources)?)
}

/// Outcome of picking the cooperative step size on held-out source data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSizeSelection {
    pub chosen: f64,
    /// `(step size, mean validation task loss)` per candidate.
    pub scores: Vec<(f64, f64)>,
}

/// Trains with each candidate step size on the first `1 - holdout` of every
/// source and scores the mean task loss on the rest. Ties go to the earlier
/// candidate.
pub fn select_step_size<F: Scalar>(
    init: &NetworkTriple<F>,
    sources: &[LabeledBatch<F>],
    config: &TrainingConfig,
    cooperative: &CooperativeConfig,
    candidates: &[f64],
    holdout: f64,
) -> Result<StepSizeSelection> {
    if candidates.is_empty() || !(holdout > 0.0 && holdout < 1.0) {
        return invalid("need candidates and a holdout fraction in (0, 1)");
    }
    let mut fit = Vec::with_capacity(sources.len());
    let mut val = Vec::with_capacity(sources.len());
    for s in sources {
        let cut = ((1.0 - holdout) * s.len() as f64).round() as usize;
        if cut == 0 || cut == s.len() {
            return invalid("holdout leaves an empty split");
        }
        fit.push(s.select(&(0..cut).collect::<Vec<_>>()));
        val.push(s.select(&(cut..s.len()).collect::<Vec<_>>()));
    }
    let val = LabeledBatch::concat(&val)?;
    let mut scores = Vec::with_capacity(candidates.len());
    for &eta in candidates {
        let method = Method::Dannce(CooperativeConfig { step_size: eta, ..cooperative.clone() });
        let (net, _) = train(init.clone(), &fit, None, config, &method, None)?;
        scores.push((eta, task_loss(&net, &val)?.0.as_f64()));
    }
    let chosen = scores.iter().fold(scores[0], |b, &s| if s.1 < b.1 { s } else { b }).0;
    Ok(StepSizeSelection { chosen, scores })
}
