//! Softmax-based losses. Each returns the value and its exact gradient with
//! respect to the logits it differentiates.

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Numerically stable log-softmax (max shift).
pub fn log_softmax<F: Scalar>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let lse = logits.iter().map(|&z| (z - max).exp()).sum::<F>().ln() + max;
    logits.iter().map(|&z| z - lse).collect()
}

pub fn softmax<F: Scalar>(logits: &[F]) -> Vec<F> {
    log_softmax(logits).into_iter().map(F::exp).collect()
}

/// `-log softmax(logits)[label]`, gradient `softmax - onehot`.
pub fn cross_entropy<F: Scalar>(logits: &[F], label: usize) -> Result<(F, Vec<F>)> {
    if label >= logits.len() {
        return invalid(format!("label {label} out of range for {} classes", logits.len()));
    }
    let logp = log_softmax(logits);
    let mut grad: Vec<F> = logp.iter().map(|&l| l.exp()).collect();
    grad[label] -= F::one();
    Ok((-logp[label], grad))
}

/// `KL(softmax(p) || softmax(q))` with `p` held constant; gradient is
/// with respect to `q_logits` only.
pub fn kl_divergence<F: Scalar>(p_logits: &[F], q_logits: &[F]) -> Result<(F, Vec<F>)> {
    if p_logits.len() != q_logits.len() {
        return invalid(format!("logit lengths differ: {} vs {}", p_logits.len(), q_logits.len()));
    }
    let logp = log_softmax(p_logits);
    let logq = log_softmax(q_logits);
    let value = logp
        .iter()
        .zip(&logq)
        .map(|(&lp, &lq)| {
            let p = lp.exp();
            if p == F::zero() {
                F::zero()
            } else {
                p * (lp - lq)
            }
        })
        .sum::<F>()
        .max(F::zero());
    let grad = logp.iter().zip(&logq).map(|(&lp, &lq)| lq.exp() - lp.exp()).collect();
    Ok((value, grad))
}

/// Shannon entropy of `softmax(logits)`; `dH/dz_j = -p_j (log p_j + H)`.
pub fn entropy_loss<F: Scalar>(logits: &[F]) -> (F, Vec<F>) {
    let logp = log_softmax(logits);
    let h: F = -logp.iter().map(|&l| l.exp() * l).sum::<F>();
    let grad = logp.iter().map(|&l| -l.exp() * (l + h)).collect();
    (h, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::central_difference;
    use proptest::prelude::*;

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
            .fold(0.0, f64::max)
    }

    #[test]
    fn uniform_logits_cost_ln_c() {
        let (ce, _) = cross_entropy(&[0.3; 5], 2).unwrap();
        assert!((ce - 5f64.ln()).abs() < 1e-12);
        let (h, _) = entropy_loss(&[1.0f64; 4]);
        assert!((h - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn peaked_logits_cost_almost_nothing() {
        let (ce, _) = cross_entropy(&[40.0, 0.0, 0.0], 0).unwrap();
        assert!(ce < 1e-15);
        let (h, _) = entropy_loss(&[40.0, 0.0, 0.0]);
        assert!(h < 1e-12);
    }

    #[test]
    fn out_of_range_label_is_rejected() {
        assert!(cross_entropy(&[0.0, 1.0], 2).is_err());
        assert!(kl_divergence(&[0.0, 1.0], &[0.0]).is_err());
    }

    #[test]
    fn fixed_three_class_ce_matches_finite_differences() {
        let z = [1.0, 0.0, -1.0];
        let (v, g) = cross_entropy(&z, 0).unwrap();
        // -log(e / (e + 1 + 1/e))
        let e = 1f64.exp();
        assert!((v - (-(e / (e + 1.0 + 1.0 / e)).ln())).abs() < 1e-14);
        let fd = central_difference(&z, 1e-5, |x| cross_entropy(x, 0).unwrap().0);
        assert!(rel_err(&g, &fd) < 1e-4);
    }

    #[test]
    fn kl_of_equal_logits_is_zero() {
        let (v, g) = kl_divergence(&[0.2f64, -1.0, 3.0], &[0.2, -1.0, 3.0]).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn kl_matches_direct_summation() {
        let p = [0.5f64, -0.25, 1.0];
        let q = [-1.0f64, 0.75, 0.0];
        // independent softmax via plain exponentials
        let sp: Vec<f64> = {
            let s: f64 = p.iter().map(|v| v.exp()).sum();
            p.iter().map(|v| v.exp() / s).collect()
        };
        let sq: Vec<f64> = {
            let s: f64 = q.iter().map(|v| v.exp()).sum();
            q.iter().map(|v| v.exp() / s).collect()
        };
        let direct: f64 = sp.iter().zip(&sq).map(|(a, b)| a * (a / b).ln()).sum();
        let (v, _) = kl_divergence(&p, &q).unwrap();
        assert!((v - direct).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn kl_is_non_negative(p in prop::collection::vec(-5.0f64..5.0, 4), q in prop::collection::vec(-5.0f64..5.0, 4)) {
            prop_assert!(kl_divergence(&p, &q).unwrap().0 >= 0.0);
        }

        #[test]
        fn loss_gradients_match_finite_differences(z in prop::collection::vec(-3.0f64..3.0, 2..6), seed in 0usize..100) {
            let label = seed % z.len();
            let (_, g) = cross_entropy(&z, label).unwrap();
            let fd = central_difference(&z, 1e-5, |x| cross_entropy(x, label).unwrap().0);
            prop_assert!(rel_err(&g, &fd) < 1e-4);

            let (_, g) = entropy_loss(&z);
            let fd = central_difference(&z, 1e-5, |x| entropy_loss(x).0);
            prop_assert!(rel_err(&g, &fd) < 1e-4);

            let p: Vec<f64> = z.iter().rev().copied().collect();
            let (_, g) = kl_divergence(&p, &z).unwrap();
            let fd = central_difference(&z, 1e-5, |x| kl_divergence(&p, x).unwrap().0);
            prop_assert!(rel_err(&g, &fd) < 1e-4);
        }
    }
}
