//! Learned divergence proxies: the proxy A-distance from a held-out binary
//! discriminator, and the multi-class discriminator loss curve over a
//! fixed representation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::nn::{argmax, cross_entropy, Activation, DenseNetwork, GradientTape, NetworkTriple};
use crate::scalar::Scalar;
use crate::training::{source_domain_loss, LabeledBatch};

/// Points sampled from one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct DomainSample<F> {
    points: Vec<Vec<F>>,
    domain_id: usize,
}

impl<F: Scalar> DomainSample<F> {
    pub fn new(points: Vec<Vec<F>>, domain_id: usize) -> Result<Self> {
        let Some(first) = points.first() else {
            return invalid("domain sample is empty");
        };
        let d = first.len();
        if d == 0 || points.iter().any(|p| p.len() != d) {
            return invalid("domain sample points must share a positive dimension");
        }
        Ok(Self { points, domain_id })
    }

    pub fn from_batch(batch: &LabeledBatch<F>, domain_id: usize) -> Result<Self> {
        Self::new(batch.points().to_vec(), domain_id)
    }

    pub fn points(&self) -> &[Vec<F>] {
        &self.points
    }

    pub fn domain_id(&self) -> usize {
        self.domain_id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProxyConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        Self { hidden: 32, epochs: 100, learning_rate: 0.1, batch_size: 16 }
    }
}

fn standardize<F: Scalar>(train: &[Vec<F>]) -> (Vec<F>, Vec<F>) {
    let d = train[0].len();
    let n = F::from_usize_lossy(train.len());
    let mean: Vec<F> = (0..d).map(|j| train.iter().map(|p| p[j]).sum::<F>() / n).collect();
    let scale = (0..d)
        .map(|j| {
            let var = train.iter().map(|p| (p[j] - mean[j]).powi(2)).sum::<F>() / n;
            let s = var.sqrt();
            if s > F::lit(1e-12) {
                F::one() / s
            } else {
                F::one()
            }
        })
        .collect();
    (mean, scale)
}

/// `2 (1 - 2 eps)` clamped to `[0, 2]`, where `eps` is the held-out error
/// of a freshly trained one-hidden-layer discriminator.
///
/// Both samples are cut to the same size and split 50/50, so train and test
/// sets are class-balanced.
pub fn proxy_a_distance<F: Scalar>(a: &DomainSample<F>, b: &DomainSample<F>, config: &ProxyConfig, seed: u64) -> Result<F> {
    if a.dim() != b.dim() {
        return invalid(format!("sample dimensions differ: {} vs {}", a.dim(), b.dim()));
    }
    let m = a.len().min(b.len());
    let n_train = m / 2;
    if n_train == 0 || m - n_train == 0 {
        return invalid(format!("{m} points per domain cannot be split into train and test"));
    }
    if config.hidden == 0 || config.epochs == 0 || config.batch_size == 0 || !(config.learning_rate > 0.0) {
        return invalid("proxy discriminator settings must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = |s: &DomainSample<F>| {
        let mut idx: Vec<usize> = (0..s.len()).collect();
        idx.shuffle(&mut rng);
        let take: Vec<Vec<F>> = idx[..m].iter().map(|&i| s.points[i].clone()).collect();
        let (tr, te) = take.split_at(n_train);
        (tr.to_vec(), te.to_vec())
    };
    let (a_tr, a_te) = split(a);
    let (b_tr, b_te) = split(b);

    let mut train: Vec<(Vec<F>, usize)> = a_tr.into_iter().map(|p| (p, 0)).chain(b_tr.into_iter().map(|p| (p, 1))).collect();
    let test: Vec<(Vec<F>, usize)> = a_te.into_iter().map(|p| (p, 0)).chain(b_te.into_iter().map(|p| (p, 1))).collect();
    let pts: Vec<Vec<F>> = train.iter().map(|(p, _)| p.clone()).collect();
    let (mean, scale) = standardize(&pts);
    let norm = |p: &[F]| -> Vec<F> { p.iter().zip(&mean).zip(&scale).map(|((&x, &m), &s)| (x - m) * s).collect() };
    for (p, _) in train.iter_mut() {
        *p = norm(p);
    }

    let mut net = DenseNetwork::seeded(&[a.dim(), config.hidden, 2], Activation::Tanh, Activation::Identity, &mut rng)?;
    let lr = F::lit(config.learning_rate);
    let mut tape = GradientTape::zeros_like(&net);
    for _ in 0..config.epochs {
        train.shuffle(&mut rng);
        for chunk in train.chunks(config.batch_size) {
            tape.scale(F::zero());
            let inv = F::one() / F::from_usize_lossy(chunk.len());
            for (x, y) in chunk {
                let cache = net.forward(x)?;
                let (_, g) = cross_entropy(cache.output(), *y)?;
                let up: Vec<F> = g.iter().map(|&v| v * inv).collect();
                net.backward_into(&cache, &up, &mut tape)?;
            }
            net.sgd_step(&tape, lr)?;
        }
    }

    let mut wrong = 0usize;
    for (x, y) in &test {
        if argmax(&net.predict(&norm(x))?) != *y {
            wrong += 1;
        }
    }
    let eps = F::from_usize_lossy(wrong) / F::from_usize_lossy(test.len());
    let two = F::lit(2.0);
    Ok((two * (F::one() - two * eps)).max(F::zero()).min(two))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self { epochs: 50, batch_size: 16, learning_rate: 0.1, seed: 0 }
    }
}

/// Epoch-mean multi-class domain loss while fitting only the domain head
/// on top of the frozen extractor. Labels are the samples' domain ids.
pub fn discriminator_loss_curve<F: Scalar>(
    triple: &NetworkTriple<F>,
    sources: &[DomainSample<F>],
    config: &CurveConfig,
) -> Result<(NetworkTriple<F>, Vec<F>)> {
    if sources.len() < 2 {
        return invalid("discriminator loss curve needs at least two domains");
    }
    if config.epochs == 0 || config.batch_size == 0 || !(config.learning_rate > 0.0) {
        return invalid("curve settings must be positive");
    }
    let batches = sources
        .iter()
        .map(|s| {
            if s.domain_id >= triple.domains() {
                return invalid(format!("domain id {} but discriminator has {} outputs", s.domain_id, triple.domains()));
            }
            LabeledBatch::single_domain(s.points.clone(), vec![0; s.len()], s.domain_id)
        })
        .collect::<Result<Vec<_>>>()?;
    let min_len = batches.iter().map(LabeledBatch::len).min().unwrap_or(0);
    let bsz = config.batch_size.min(min_len);
    let steps = min_len / bsz;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut orders: Vec<Vec<usize>> = batches.iter().map(|b| (0..b.len()).collect()).collect();
    let mut t = triple.clone();
    let lr = F::lit(config.learning_rate);
    let mut curve = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        for o in orders.iter_mut() {
            o.shuffle(&mut rng);
        }
        let mut sum = F::zero();
        for step in 0..steps {
            let parts: Vec<LabeledBatch<F>> =
                batches.iter().zip(&orders).map(|(b, o)| b.select(&o[step * bsz..(step + 1) * bsz])).collect();
            let (loss, g) = source_domain_loss(&t, &LabeledBatch::concat(&parts)?, F::zero())?;
            t.domain_head.sgd_step(&g.domain_head, lr)?;
            sum += loss;
        }
        curve.push(sum / F::from_usize_lossy(steps));
    }
    Ok((t, curve))
}

#[derive(Serialize)]
struct CurveRecord {
    epoch: usize,
    mean_domain_loss: f64,
}

/// One `{epoch, mean_domain_loss}` JSON object per line.
pub fn curve_to_jsonl<F: Scalar>(curve: &[F]) -> String {
    curve
        .iter()
        .enumerate()
        .map(|(epoch, &v)| {
            let rec = CurveRecord { epoch, mean_domain_loss: v.as_f64() };
            serde_json::to_string(&rec).expect("plain record serializes") + "\n"
        })
        .collect()
}
