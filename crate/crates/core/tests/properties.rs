use dglab::geometry::{
    brute_force_divergence, check_condition, exact_interval_divergence, intersection_membership, mixture, FiniteClassSpace,
    FiniteDistribution, FiniteHypothesisClass, HistogramDistribution, IntervalSpace, SourceCollection,
};
use dglab::nn::{cross_entropy, entropy_loss, kl_divergence};
use dglab::oracle::enumerate_interval_divergence;
use proptest::prelude::*;

fn normalized(raw: Vec<f64>) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn mass(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_filter_map("nonzero", |v| {
        (v.iter().sum::<f64>() > 1e-6).then(|| normalized(v))
    })
}

fn histogram_pair() -> impl Strategy<Value = (HistogramDistribution<f64>, HistogramDistribution<f64>)> {
    (1usize..=24).prop_flat_map(|n| {
        (prop::collection::vec(0.05f64..2.0, n), mass(n), mass(n)).prop_map(move |(w, a, b)| {
            let mut edges = vec![0.0];
            for x in w {
                edges.push(edges.last().unwrap() + x);
            }
            (
                HistogramDistribution::new(edges.clone(), a).unwrap(),
                HistogramDistribution::new(edges, b).unwrap(),
            )
        })
    })
}

proptest! {
    #[test]
    fn kadane_matches_enumeration((p, q) in histogram_pair()) {
        let fast = exact_interval_divergence(&p, &q).unwrap().value();
        prop_assert!((fast - enumerate_interval_divergence(&p, &q)).abs() <= 1e-12);
        prop_assert!((0.0..=2.0).contains(&fast));
        prop_assert!((fast - exact_interval_divergence(&q, &p).unwrap().value()).abs() <= 1e-12);
    }

    #[test]
    fn regrid_onto_refinement_keeps_divergence((p, q) in histogram_pair(), splits in 1usize..4) {
        let mut fine = Vec::new();
        for w in p.edges().windows(2) {
            for s in 0..splits {
                fine.push(w[0] + (w[1] - w[0]) * s as f64 / splits as f64);
            }
        }
        fine.push(*p.edges().last().unwrap());
        let (pf, qf) = (p.regrid(&fine).unwrap(), q.regrid(&fine).unwrap());
        let a = exact_interval_divergence(&p, &q).unwrap().value();
        let b = exact_interval_divergence(&pf, &qf).unwrap().value();
        prop_assert!((a - b).abs() <= 1e-9);
    }

    #[test]
    fn mixtures_satisfy_the_condition((p, q) in histogram_pair(), w in 0.0f64..=1.0, phi in 0.0f64..=1.0) {
        let sources = SourceCollection::new(vec![p, q], vec![phi, 1.0 - phi]).unwrap();
        let m = mixture(&IntervalSpace, &sources, &[w, 1.0 - w]).unwrap();
        prop_assert!(intersection_membership(&IntervalSpace, &sources, &m).unwrap());
        prop_assert!(check_condition(&IntervalSpace, &sources, &m).unwrap().pass);
    }

    #[test]
    fn finite_divergence_is_bounded_by_total_variation(a in mass(4), b in mass(4)) {
        let (p, q) = (FiniteDistribution::new(a.clone()).unwrap(), FiniteDistribution::new(b.clone()).unwrap());
        let full = FiniteHypothesisClass::all_labelings(4).unwrap();
        let d = brute_force_divergence(&p, &q, &full).unwrap().value();
        let tv: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        prop_assert!((d - tv).abs() <= 1e-12);
        let rays = FiniteClassSpace::symmetric(&FiniteHypothesisClass::thresholds(4).unwrap()).unwrap();
        let sub = brute_force_divergence(&p, &q, rays.class()).unwrap().value();
        prop_assert!(sub <= d + 1e-12);
    }

    #[test]
    fn losses_are_non_negative(z in prop::collection::vec(-20.0f64..20.0, 2..6), y in prop::collection::vec(-20.0f64..20.0, 2..6)) {
        let c = z.len().min(y.len());
        let (z, y) = (&z[..c], &y[..c]);
        prop_assert!(cross_entropy(z, 0).unwrap().0 >= 0.0);
        prop_assert!(kl_divergence(y, z).unwrap().0 >= -1e-12);
        let h = entropy_loss(z).0;
        prop_assert!(h >= -1e-12 && h <= (c as f64).ln() + 1e-12);
    }
}

#[test]
fn finite_world_reference_values() {
    let p = FiniteDistribution::<f64>::new(vec![0.7, 0.3]).unwrap();
    let q = FiniteDistribution::new(vec![0.4, 0.6]).unwrap();
    let all = FiniteHypothesisClass::all_labelings(2).unwrap();
    assert!((brute_force_divergence(&p, &q, &all).unwrap().value() - 0.6).abs() < 1e-12);
    let rays = FiniteHypothesisClass::from_strings(&["000", "100", "110", "111"]).unwrap();
    let mut got = FiniteClassSpace::symmetric(&rays).unwrap().class().to_strings();
    got.sort();
    let mut want: Vec<String> = ["000", "100", "110", "111", "010", "011", "001"].iter().map(|s| s.to_string()).collect();
    want.sort();
    assert_eq!(got, want);
}
