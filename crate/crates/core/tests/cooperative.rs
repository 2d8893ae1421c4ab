use dglab::dannce::{cooperate_update_kl, cooperate_update_plain, CooperativeConfig, DEFAULT_STEP_SIZE};
use dglab::nn::{Activation, NetworkTriple, TripleArchitecture};
use dglab::synthetic::{default_benchmark_specs, generate};
use dglab::training::{select_step_size, train, Method, TrainingConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arch() -> TripleArchitecture {
    TripleArchitecture {
        input_dim: 2,
        extractor_widths: vec![16, 8],
        task_hidden: vec![],
        domain_hidden: vec![16],
        classes: 3,
        domains: 3,
        activation: Activation::Tanh,
    }
}

#[test]
fn kl_rule_drifts_less_than_plain_rule() {
    let (s, t) = default_benchmark_specs();
    for seed in 0..3u64 {
        let task = generate::<f64>(&s, &t, seed).unwrap();
        let init = NetworkTriple::seeded(&arch(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        // a partly trained network so the task head has something to preserve
        let cfg = TrainingConfig { seed, epochs: 5, ..Default::default() };
        let (net, _) = train(init, &task.sources, None, &cfg, &Method::Dann, None).unwrap();
        let before = net.clone();
        for src in &task.sources {
            let batch = src.select(&(0..32).collect::<Vec<_>>());
            let c = CooperativeConfig { steps: 20, step_size: 0.5, ..Default::default() };
            let plain = cooperate_update_plain(&net, &batch, &c).unwrap();
            let kl = cooperate_update_kl(&net, &batch, &c).unwrap();
            assert!(
                kl.mean_kl_drift() <= plain.mean_kl_drift(),
                "seed {seed}: kl {} plain {}",
                kl.mean_kl_drift(),
                plain.mean_kl_drift()
            );
            assert!(plain.domain_loss_after <= plain.domain_loss_before);
            assert_eq!(kl.class_labels, batch.class_labels());
            assert_eq!(kl.domain_labels, batch.domain_labels());
        }
        assert_eq!(net, before);
    }
}

#[test]
fn default_step_size_is_the_grid_winner() {
    let grid = [0.01, 0.05, 0.1];
    let (s, t) = default_benchmark_specs();
    let mut totals = [0.0f64; 3];
    for seed in 0..5u64 {
        let task = generate::<f64>(&s, &t, seed).unwrap();
        let init = NetworkTriple::seeded(&arch(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let cfg = TrainingConfig { seed, ..Default::default() };
        let sel = select_step_size(&init, &task.sources, &cfg, &CooperativeConfig::default(), &grid, 0.2).unwrap();
        for (tot, (eta, score)) in totals.iter_mut().zip(&sel.scores) {
            assert!(grid.contains(eta));
            *tot += score;
        }
    }
    let best = (0..3).fold(0, |b, i| if totals[i] < totals[b] { i } else { b });
    assert_eq!(grid[best], DEFAULT_STEP_SIZE, "validation losses {totals:?}");
}

#[test]
fn more_update_steps_lower_the_domain_loss_curve() {
    let (s, t) = default_benchmark_specs();
    let task = generate::<f64>(&s, &t, 0).unwrap();
    let init = NetworkTriple::seeded(&arch(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let cfg = TrainingConfig::default();
    let run = |steps| {
        let m = Method::Dannce(CooperativeConfig { steps, ..Default::default() });
        train(init.clone(), &task.sources, None, &cfg, &m, None).unwrap().1
    };
    let (a, b) = (run(5), run(20));
    let below = a.iter().zip(&b).skip(5).filter(|(x, y)| y.mean_domain_loss < x.mean_domain_loss).count();
    assert!(below * 10 >= 7 * (a.len() - 5), "{below} of {}", a.len() - 5);
}
