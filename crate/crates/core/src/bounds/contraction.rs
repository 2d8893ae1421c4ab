//! Gradient descent on a smooth, non-negative divergence proxy between two
//! represented samples, recording the per-step loss ratio.
//!
//! The proxy is `ln 2 - min_mu [ logistic loss of mu on (r(P), r(Q)) + c/2 |mu|^2 ]`
//! with a linear discriminator `mu`. It is zero exactly when the two
//! represented means coincide, and `mu = 0` shows it never goes negative.
//! The inner problem is strongly convex and solved by Newton's method; the
//! gradient in the representation parameters follows from the envelope
//! theorem.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nn::{DenseNetwork, GradientTape};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContractionConfig {
    /// Ridge weight `c` on the discriminator.
    pub ridge: f64,
    pub steps: usize,
    /// Steps whose loss is within this of the lowest loss seen count as at the minimum.
    pub min_tolerance: f64,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        Self { ridge: 0.1, steps: 200, min_tolerance: 1e-6 }
    }
}

fn softplus(s: f64) -> f64 {
    s.max(0.0) + (-s.abs()).exp().ln_1p()
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

struct Inner {
    z: Vec<DVector<f64>>,
    y: Vec<f64>,
    ridge: f64,
}

impl Inner {
    fn objective(&self, mu: &DVector<f64>) -> f64 {
        let n = self.z.len() as f64;
        let data: f64 = self.z.iter().zip(&self.y).map(|(z, &y)| {
            let s = mu.dot(z);
            softplus(s) - y * s
        }).sum();
        data / n + 0.5 * self.ridge * mu.norm_squared()
    }

    fn solve(&self, warm: DVector<f64>) -> Result<DVector<f64>> {
        let dim = warm.len();
        let n = self.z.len() as f64;
        let mut mu = warm;
        let mut f = self.objective(&mu);
        for _ in 0..100 {
            let mut g = &mu * self.ridge;
            let mut h = DMatrix::<f64>::identity(dim, dim) * self.ridge;
            for (z, &y) in self.z.iter().zip(&self.y) {
                let p = sigmoid(mu.dot(z));
                g.axpy((p - y) / n, z, 1.0);
                h.ger(p * (1.0 - p) / n, z, z, 1.0);
            }
            if g.amax() < 1e-14 {
                break;
            }
            let chol = h
                .cholesky()
                .ok_or_else(|| Error::TrainingDivergence { epoch: 0, reason: "discriminator Hessian not positive definite".into() })?;
            let step = chol.solve(&g);
            let decrease = g.dot(&step);
            let mut t = 1.0;
            loop {
                let cand = &mu - &step * t;
                let fc = self.objective(&cand);
                if fc <= f - 1e-4 * t * decrease || t < 1e-10 {
                    mu = cand;
                    f = fc;
                    break;
                }
                t *= 0.5;
            }
            if decrease < 1e-30 {
                break;
            }
        }
        Ok(mu)
    }
}

/// Proxy value, its gradient in the network parameters, and the optimal
/// discriminator (for warm starts).
pub fn proxy_loss<F: Scalar>(
    net: &DenseNetwork<F>,
    p: &[Vec<F>],
    q: &[Vec<F>],
    ridge: f64,
    warm: Option<&[f64]>,
) -> Result<(F, GradientTape<F>, Vec<f64>)> {
    if p.is_empty() || q.is_empty() {
        return invalid("both samples must be nonempty");
    }
    if !(ridge > 0.0) {
        return invalid("ridge weight must be positive");
    }
    let caches = p.iter().chain(q).map(|x| net.forward(x)).collect::<Result<Vec<_>>>()?;
    let m = net.output_dim();
    let z: Vec<DVector<f64>> = caches
        .iter()
        .map(|c| DVector::from_iterator(m + 1, c.output().iter().map(|v| v.as_f64()).chain([1.0])))
        .collect();
    if z.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
        return Err(Error::TrainingDivergence { epoch: 0, reason: "non-finite representation".into() });
    }
    let y: Vec<f64> = std::iter::repeat_n(0.0, p.len()).chain(std::iter::repeat_n(1.0, q.len())).collect();
    let inner = Inner { z, y, ridge };
    let start = match warm {
        Some(w) if w.len() == m + 1 => DVector::from_column_slice(w),
        _ => DVector::zeros(m + 1),
    };
    let mu = inner.solve(start)?;
    let value = (std::f64::consts::LN_2 - inner.objective(&mu)).max(0.0);

    let n = inner.z.len() as f64;
    let mut tape = GradientTape::zeros_like(net);
    for ((cache, z), &yi) in caches.iter().zip(&inner.z).zip(&inner.y) {
        let coef = -(sigmoid(mu.dot(z)) - yi) / n;
        let up: Vec<F> = (0..m).map(|j| F::lit(coef * mu[j])).collect();
        net.backward_into(cache, &up, &mut tape)?;
    }
    Ok((F::lit(value), tape, mu.iter().copied().collect()))
}

/// Per-step proxy values and ratios `l(t + 1) / l(t)` for one step size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionTrace {
    pub gamma: f64,
    pub losses: Vec<f64>,
    /// `None` where `l(t) = 0`.
    pub ratios: Vec<Option<f64>>,
}

impl ContractionTrace {
    /// Indices `t` whose loss is more than `tol` above the lowest loss in the trace.
    pub fn steps_away_from_minimum(&self, tol: f64) -> Vec<usize> {
        let lo = self.losses.iter().copied().fold(f64::INFINITY, f64::min);
        (0..self.ratios.len()).filter(|&t| self.losses[t] - lo > tol).collect()
    }

    /// Share of steps away from the minimum with ratio below one (1 when there are none).
    pub fn contracting_fraction(&self, tol: f64) -> f64 {
        let away = self.steps_away_from_minimum(tol);
        if away.is_empty() {
            return 1.0;
        }
        let good = away.iter().filter(|&&t| matches!(self.ratios[t], Some(r) if r < 1.0)).count();
        good as f64 / away.len() as f64
    }

    pub fn max_ratio(&self) -> Option<f64> {
        self.ratios.iter().flatten().copied().reduce(f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss,ratio,gamma\n");
        for (t, l) in self.losses.iter().enumerate() {
            let r = self.ratios.get(t).copied().flatten().map(|r| r.to_string()).unwrap_or_default();
            out.push_str(&format!("{t},{l},{r},{}\n", self.gamma));
        }
        out
    }
}

/// Runs `steps` descent steps `theta <- theta - gamma * grad l(theta)`.
/// With `gamma = 0` the parameters never move.
pub fn contraction_trace<F: Scalar>(
    p: &[Vec<F>],
    q: &[Vec<F>],
    net: &DenseNetwork<F>,
    config: &ContractionConfig,
    gamma: f64,
) -> Result<ContractionTrace> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return invalid(format!("step size {gamma} must be finite and non-negative"));
    }
    let mut net = net.clone();
    let mut warm: Option<Vec<f64>> = None;
    let mut losses = Vec::with_capacity(config.steps + 1);
    for step in 0..=config.steps {
        let (l, tape, mu) = proxy_loss(&net, p, q, config.ridge, warm.as_deref())
            .map_err(|e| divergence_at(step, e))?;
        let l = l.as_f64();
        if !l.is_finite() {
            return Err(Error::TrainingDivergence { epoch: step, reason: "non-finite proxy loss".into() });
        }
        losses.push(l);
        warm = Some(mu);
        if step < config.steps && gamma > 0.0 {
            net.sgd_step(&tape, F::lit(gamma)).map_err(|e| divergence_at(step, e))?;
        }
    }
    let ratios = losses.windows(2).map(|w| (w[0] > 0.0).then(|| w[1] / w[0])).collect();
    Ok(ContractionTrace { gamma, losses, ratios })
}

fn divergence_at(step: usize, e: Error) -> Error {
    match e {
        Error::TrainingDivergence { reason, .. } => Error::TrainingDivergence { epoch: step, reason },
        other => other,
    }
}

/// Result of halving the step size until the trace contracts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSearch {
    pub found: bool,
    pub trace: ContractionTrace,
    /// `(gamma, contracting fraction)` for every step size tried; diverged runs report 0.
    pub tried: Vec<(f64, f64)>,
}

/// Halves `gamma` from `gamma0` until at least `required` of the steps away
/// from the minimum contract.
pub fn find_contracting_gamma<F: Scalar>(
    p: &[Vec<F>],
    q: &[Vec<F>],
    net: &DenseNetwork<F>,
    config: &ContractionConfig,
    gamma0: f64,
    required: f64,
) -> Result<GammaSearch> {
    let mut gamma = gamma0;
    let mut tried = Vec::new();
    let mut last = None;
    for _ in 0..40 {
        match contraction_trace(p, q, net, config, gamma) {
            Ok(trace) => {
                let frac = trace.contracting_fraction(config.min_tolerance);
                tried.push((gamma, frac));
                if frac >= required {
                    return Ok(GammaSearch { found: true, trace, tried });
                }
                last = Some(trace);
            }
            Err(Error::TrainingDivergence { .. }) => tried.push((gamma, 0.0)),
            Err(e) => return Err(e),
        }
        gamma *= 0.5;
    }
    let trace = match last {
        Some(t) => t,
        None => contraction_trace(p, q, net, config, 0.0)?,
    };
    Ok(GammaSearch { found: false, trace, tried })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use crate::oracle::{central_difference, max_relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn instance(seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, DenseNetwork<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nd = Normal::new(0.0, 1.0).unwrap();
        let p = (0..30).map(|_| vec![nd.sample(&mut rng), nd.sample(&mut rng)]).collect();
        let q = (0..30).map(|_| vec![1.5 + nd.sample(&mut rng), nd.sample(&mut rng)]).collect();
        let net = DenseNetwork::seeded(&[2, 4, 3], Activation::Tanh, Activation::Tanh, &mut rng).unwrap();
        (p, q, net)
    }

    #[test]
    fn proxy_is_zero_for_identical_samples() {
        let (p, _, net) = instance(1);
        let (l, tape, _) = proxy_loss(&net, &p, &p, 0.1, None).unwrap();
        assert!(l.abs() < 1e-14);
        assert!(tape.flatten().iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (p, q, net) = instance(2);
        let (_, tape, _) = proxy_loss(&net, &p, &q, 0.1, None).unwrap();
        let theta = net.params();
        let fd = central_difference(&theta, 1e-5, |t| {
            let mut n = net.clone();
            n.set_params(t).unwrap();
            proxy_loss(&n, &p, &q, 0.1, None).unwrap().0
        });
        assert!(max_relative_error(&tape.flatten(), &fd) < 1e-4);
    }

    #[test]
    fn zero_step_gives_unit_ratios() {
        let (p, q, net) = instance(3);
        let t = contraction_trace(&p, &q, &net, &ContractionConfig { steps: 5, ..Default::default() }, 0.0).unwrap();
        assert!(t.ratios.iter().all(|r| *r == Some(1.0)));
    }

    #[test]
    fn large_step_is_reported_not_hidden() {
        let (p, q, net) = instance(4);
        let cfg = ContractionConfig { steps: 50, ..Default::default() };
        let t = contraction_trace(&p, &q, &net, &cfg, 200.0);
        match t {
            Ok(t) => assert!(t.max_ratio().unwrap() >= 1.0),
            Err(e) => assert!(matches!(e, Error::TrainingDivergence { .. })),
        }
        let s = find_contracting_gamma(&p, &q, &net, &cfg, 1.0, 0.99).unwrap();
        assert!(s.found);
        assert!(s.trace.losses.last().unwrap() < &s.trace.losses[0]);
    }
}
