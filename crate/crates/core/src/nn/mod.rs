//! Small dense networks with hand-written reverse-mode gradients.

mod checkpoint;
mod dense;
mod loss;

pub use checkpoint::Checkpoint;
pub use dense::{
    gradient_reversal, sgd_step, Activation, DenseLayer, DenseNetwork, ForwardCache, GradientTape,
    LayerSpec,
};
pub use loss::{cross_entropy, entropy_loss, kl_divergence, log_softmax, softmax};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Feature extractor, task head and domain head sharing one representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct NetworkTriple<F> {
    pub extractor: DenseNetwork<F>,
    pub task_head: DenseNetwork<F>,
    pub domain_head: DenseNetwork<F>,
}

/// Widths for building a [`NetworkTriple`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleArchitecture {
    pub input_dim: usize,
    /// Extractor widths after the input; the last one is the representation size.
    pub extractor_widths: Vec<usize>,
    pub task_hidden: Vec<usize>,
    pub domain_hidden: Vec<usize>,
    pub classes: usize,
    pub domains: usize,
    pub activation: Activation,
}

impl TripleArchitecture {
    pub fn representation_dim(&self) -> usize {
        *self.extractor_widths.last().unwrap_or(&self.input_dim)
    }
}

impl<F: Scalar> NetworkTriple<F> {
    pub fn new(extractor: DenseNetwork<F>, task_head: DenseNetwork<F>, domain_head: DenseNetwork<F>) -> Result<Self> {
        let r = extractor.output_dim();
        if task_head.input_dim() != r || domain_head.input_dim() != r {
            return invalid(format!(
                "representation has {r} dims but heads expect {} and {}",
                task_head.input_dim(),
                domain_head.input_dim()
            ));
        }
        Ok(Self { extractor, task_head, domain_head })
    }

    /// Seeded construction; the extractor ends in the hidden activation.
    pub fn seeded<R: Rng + ?Sized>(arch: &TripleArchitecture, rng: &mut R) -> Result<Self> {
        if arch.extractor_widths.is_empty() {
            return invalid("extractor needs at least one layer");
        }
        let act = arch.activation;
        let mut ew = vec![arch.input_dim];
        ew.extend(&arch.extractor_widths);
        let extractor = DenseNetwork::seeded(&ew, act, act, rng)?;
        let r = arch.representation_dim();
        let head = |hidden: &[usize], out: usize, rng: &mut R| {
            let mut w = vec![r];
            w.extend(hidden);
            w.push(out);
            DenseNetwork::seeded(&w, act, Activation::Identity, rng)
        };
        let task_head = head(&arch.task_hidden, arch.classes, rng)?;
        let domain_head = head(&arch.domain_hidden, arch.domains, rng)?;
        Self::new(extractor, task_head, domain_head)
    }

    pub fn classes(&self) -> usize {
        self.task_head.output_dim()
    }

    pub fn domains(&self) -> usize {
        self.domain_head.output_dim()
    }

    /// Task logits for one input.
    pub fn classify(&self, x: &[F]) -> Result<Vec<F>> {
        let h = self.extractor.predict(x)?;
        self.task_head.predict(&h)
    }

    pub fn discriminate(&self, x: &[F]) -> Result<Vec<F>> {
        let h = self.extractor.predict(x)?;
        self.domain_head.predict(&h)
    }
}

/// Index of the largest entry (first on ties).
pub fn argmax<F: Scalar>(v: &[F]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, F::neg_infinity()), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}
