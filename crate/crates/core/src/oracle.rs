//! Independent reference computations used to check the fast paths:
//! interval enumeration, central finite differences and simplex grids.
//! Nothing here shares code with the implementations it checks.

use crate::geometry::HistogramDistribution;
use crate::scalar::Scalar;

/// `2 * max |P(I) - Q(I)|` over all `O(n^2)` bin ranges, each summed from
/// scratch. Both histograms must already share a grid.
pub fn enumerate_interval_divergence<F: Scalar>(p: &HistogramDistribution<F>, q: &HistogramDistribution<F>) -> F {
    assert!(p.same_grid(q), "enumeration needs a shared grid");
    let n = p.bins();
    let mut best = F::zero();
    for i in 0..n {
        for j in i..n {
            let mut s = F::zero();
            for b in i..=j {
                s += p.mass()[b] - q.mass()[b];
            }
            best = best.max(s.abs());
        }
    }
    F::lit(2.0) * best
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn central_difference<F: Scalar>(x: &[F], h: F, mut f: impl FnMut(&[F]) -> F) -> Vec<F> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (F::lit(2.0) * h)
        })
        .collect()
}

/// Largest component-wise relative error, with a floor on the denominator
/// so that near-zero gradients are compared absolutely.
pub fn max_relative_error<F: Scalar>(analytic: &[F], numeric: &[F]) -> F {
    let floor = F::lit(1e-6);
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(F::zero(), F::max)
}

/// All weight vectors on the `k`-simplex with coordinates in multiples of `1/steps`.
pub fn simplex_grid<F: Scalar>(k: usize, steps: usize) -> Vec<Vec<F>> {
    fn rec(k: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 0..=left {
            prefix.push(c);
            rec(k - 1, left - c, prefix, out);
            prefix.pop();
        }
    }
    if k == 0 {
        return Vec::new();
    }
    let mut raw = Vec::new();
    rec(k, steps, &mut Vec::with_capacity(k), &mut raw);
    let denom = F::from_usize_lossy(steps.max(1));
    raw.into_iter()
        .map(|v| v.into_iter().map(|c| F::from_usize_lossy(c) / denom).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_grid_counts() {
        assert_eq!(simplex_grid::<f64>(2, 50).len(), 51);
        assert_eq!(simplex_grid::<f64>(3, 50).len(), 51 * 52 / 2);
        for w in simplex_grid::<f64>(3, 4) {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn central_difference_of_quadratic() {
        let g: Vec<f64> = central_difference(&[1.0, -2.0], 1e-5, |x| x[0] * x[0] + 3.0 * x[1]);
        assert!((g[0] - 2.0).abs() < 1e-8 && (g[1] - 3.0).abs() < 1e-8);
    }
}
