use serde::{Deserialize, Serialize};

use super::{DenseLayer, DenseNetwork, LayerSpec};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Architecture descriptor plus flat parameters (per layer: weights, bias).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Checkpoint<F> {
    pub architecture: Vec<LayerSpec>,
    pub params: Vec<F>,
}

impl<F: Scalar> DenseNetwork<F> {
    pub fn to_checkpoint(&self) -> Checkpoint<F> {
        Checkpoint { architecture: self.specs(), params: self.params() }
    }

    pub fn from_checkpoint(ck: &Checkpoint<F>) -> Result<Self> {
        let expected: usize = ck.architecture.iter().map(|s| s.in_dim * s.out_dim + s.out_dim).sum();
        if expected != ck.params.len() {
            return invalid(format!("checkpoint has {} params, architecture needs {expected}", ck.params.len()));
        }
        let mut offset = 0;
        let layers = ck
            .architecture
            .iter()
            .map(|s| {
                let nw = s.in_dim * s.out_dim;
                let weights = ck.params[offset..offset + nw].to_vec();
                let bias = ck.params[offset + nw..offset + nw + s.out_dim].to_vec();
                offset += nw + s.out_dim;
                DenseLayer { in_dim: s.in_dim, out_dim: s.out_dim, weights, bias, activation: s.activation }
            })
            .collect();
        DenseNetwork::new(layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn checkpoint_restores_identical_network() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = DenseNetwork::<f64>::seeded(&[2, 8, 3], Activation::Relu, Activation::Identity, &mut rng).unwrap();
        let json = serde_json::to_string(&net.to_checkpoint()).unwrap();
        let back: Checkpoint<f64> = serde_json::from_str(&json).unwrap();
        let restored = DenseNetwork::from_checkpoint(&back).unwrap();
        assert_eq!(restored.params(), net.params());
        assert_eq!(restored.specs(), net.specs());
    }

    #[test]
    fn truncated_params_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = DenseNetwork::<f64>::seeded(&[2, 3], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let mut ck = net.to_checkpoint();
        ck.params.pop();
        assert!(DenseNetwork::from_checkpoint(&ck).is_err());
    }
}
