//! Fixed-seed property suites. Each property records how many cases it ran
//! and how many failed; a suite passes when no property has a failure.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    compare_objects, dg_bound_reports, find_contracting_gamma, CandidateConfig, ContractionConfig, FiniteWorld, ObjectMode,
};
use crate::error::Result;
use crate::geometry::{
    ball_membership, check_augmentation_condition, check_condition, exact_interval_divergence, intersection_membership,
    max_pairwise_divergence, mixture, FiniteClassSpace, FiniteDistribution, FiniteHypothesisClass, HistogramDistribution,
    IntervalSpace, SourceCollection,
};
use crate::nn::{cross_entropy, entropy_loss, kl_divergence, Activation, DenseNetwork, NetworkTriple, TripleArchitecture};
use crate::oracle::{central_difference, enumerate_interval_divergence, max_relative_error};
use crate::synthetic::example1_fixture;
use crate::training::{entropy_term, objective, source_domain_loss, task_loss, LabeledBatch, ObjectiveWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    DivergenceOracle,
    Prop2,
    Pseudometric,
    Gradcheck,
    Contraction,
    BoundValidity,
    ObjectTightness,
    Augmentation,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::DivergenceOracle,
        Suite::Prop2,
        Suite::Pseudometric,
        Suite::Gradcheck,
        Suite::Contraction,
        Suite::BoundValidity,
        Suite::ObjectTightness,
        Suite::Augmentation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::DivergenceOracle => "divergence-oracle",
            Suite::Prop2 => "prop2",
            Suite::Pseudometric => "pseudometric",
            Suite::Gradcheck => "gradcheck",
            Suite::Contraction => "contraction",
            Suite::BoundValidity => "bound-validity",
            Suite::ObjectTightness => "object-tightness",
            Suite::Augmentation => "augmentation",
        }
    }

    pub fn parse(s: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|x| x.name() == s)
    }

    /// Runs the suite with its default case count.
    pub fn run(self, seed: u64) -> Result<SuiteReport> {
        match self {
            Suite::DivergenceOracle => divergence_oracle(1000, seed),
            Suite::Prop2 => prop2(1000, seed),
            Suite::Pseudometric => pseudometric(1000, seed),
            Suite::Gradcheck => gradcheck(100, seed),
            Suite::Contraction => contraction(20, seed),
            Suite::BoundValidity => bound_validity(200, seed),
            Suite::ObjectTightness => object_tightness(50, seed),
            Suite::Augmentation => augmentation(200, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCount {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Largest observed error or worst value, where meaningful.
    pub worst: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub properties: Vec<PropertyCount>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.failures == 0 && p.cases > 0)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.properties {
            let status = if p.failures == 0 && p.cases > 0 { "ok" } else { "FAIL" };
            write!(f, "{} {}: {}/{} passed", status, p.name, p.cases - p.failures, p.cases)?;
            if let Some(w) = p.worst {
                write!(f, " (worst {w:.3e})")?;
            }
            writeln!(f)?;
        }
        write!(f, "suite {}: {}", self.suite, if self.passed() { "passed" } else { "FAILED" })
    }
}

#[derive(Default)]
struct Tally {
    cases: usize,
    failures: usize,
    worst: Option<f64>,
}

impl Tally {
    fn record(&mut self, ok: bool) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
        }
    }

    fn observe(&mut self, v: f64) {
        self.worst = Some(self.worst.map_or(v, |w| w.max(v)));
    }

    fn named(self, name: &str) -> PropertyCount {
        PropertyCount { name: name.to_string(), cases: self.cases, failures: self.failures, worst: self.worst }
    }
}

fn random_mass<R: Rng>(n: usize, rng: &mut R, sparsity: f64) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..n).map(|_| if rng.random_bool(sparsity) { 0.0 } else { rng.random::<f64>() }).collect();
        let s: f64 = raw.iter().sum();
        if s > 0.0 {
            return raw.into_iter().map(|v| v / s).collect();
        }
    }
}

/// A histogram with `n` bins on a random strictly increasing grid.
pub fn random_histogram<R: Rng>(edges: &[f64], rng: &mut R) -> HistogramDistribution<f64> {
    let n = edges.len() - 1;
    HistogramDistribution::new(edges.to_vec(), random_mass(n, rng, 0.3)).expect("normalized random histogram")
}

pub fn random_edges<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut e = vec![rng.random_range(-5.0..0.0)];
    for _ in 0..n {
        let last = *e.last().unwrap();
        e.push(last + rng.random_range(0.1..2.0));
    }
    e
}

/// Uniform weights on the simplex.
pub fn random_simplex<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

pub fn divergence_oracle(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    for _ in 0..cases {
        let n = rng.random_range(1..=64);
        let edges = random_edges(n, &mut rng);
        let p = random_histogram(&edges, &mut rng);
        let q = random_histogram(&edges, &mut rng);
        let fast = exact_interval_divergence(&p, &q)?.value();
        let slow = enumerate_interval_divergence(&p, &q);
        let err = (fast - slow).abs();
        t.observe(err);
        t.record(err <= 1e-12);
    }
    Ok(SuiteReport { suite: "divergence-oracle".into(), properties: vec![t.named("max-subarray equals interval enumeration")] })
}

pub fn pseudometric(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut ident, mut sym, mut tri, mut range) = (Tally::default(), Tally::default(), Tally::default(), Tally::default());
    for _ in 0..cases {
        // independent grids so the union-grid regrid is exercised
        let grids: Vec<Vec<f64>> = (0..3).map(|_| random_edges(rng.random_range(1..=16), &mut rng)).collect();
        let p = random_histogram(&grids[0], &mut rng);
        let q = random_histogram(&grids[1], &mut rng);
        let r = random_histogram(&grids[2], &mut rng);
        let d = |a: &HistogramDistribution<f64>, b: &HistogramDistribution<f64>| exact_interval_divergence(a, b).map(|v| v.value());
        let dpp = d(&p, &p)?;
        ident.observe(dpp.abs());
        ident.record(dpp.abs() <= 1e-9);
        let (dpq, dqp) = (d(&p, &q)?, d(&q, &p)?);
        sym.observe((dpq - dqp).abs());
        sym.record((dpq - dqp).abs() <= 1e-9);
        let (dpr, dqr) = (d(&p, &r)?, d(&q, &r)?);
        tri.observe((dpr - dpq - dqr).max(0.0));
        tri.record(dpr <= dpq + dqr + 1e-9);
        range.record([dpq, dpr, dqr].iter().all(|&v| (0.0..=2.0).contains(&v)));
    }
    Ok(SuiteReport {
        suite: "pseudometric".into(),
        properties: vec![ident.named("identity"), sym.named("symmetry"), tri.named("triangle inequality"), range.named("range [0, 2]")],
    })
}

/// Random source collection, class and test points in the finite world.
struct FiniteInstance {
    space: FiniteClassSpace,
    sources: SourceCollection<FiniteDistribution<f64>, f64>,
}

fn random_class<R: Rng>(n: usize, rng: &mut R) -> FiniteHypothesisClass {
    let total = 1u64 << n;
    let size = rng.random_range(1..=total as usize);
    let mut labs: Vec<u64> = (0..total).collect();
    for i in 0..size {
        let j = rng.random_range(i..labs.len());
        labs.swap(i, j);
    }
    labs.truncate(size);
    FiniteHypothesisClass::new(n, labs).expect("labelings fit the support")
}

fn random_finite_instance<R: Rng>(rng: &mut R, max_support: usize) -> Result<FiniteInstance> {
    let n = rng.random_range(2..=max_support);
    let class = random_class(n, rng);
    let space = FiniteClassSpace::symmetric(&class)?;
    let k = rng.random_range(2..=3);
    let dists = (0..k).map(|_| FiniteDistribution::new(random_mass(n, rng, 0.3))).collect::<Result<Vec<_>>>()?;
    let sources = SourceCollection::new(dists, random_simplex(k, rng))?;
    Ok(FiniteInstance { space, sources })
}

pub fn prop2(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut s1, mut s2, mut s3) = (Tally::default(), Tally::default(), Tally::default());
    for _ in 0..cases {
        let inst = random_finite_instance(&mut rng, 6)?;
        let (space, sources) = (&inst.space, &inst.sources);
        let k = sources.len();
        let n = sources.sources()[0].support_size();
        let phis: Vec<Vec<f64>> = (0..5).map(|_| random_simplex(k, &mut rng)).collect();

        for _ in 0..3 {
            let m = mixture(space, sources, &random_simplex(k, &mut rng))?;
            s1.record(intersection_membership(space, sources, &m)?);
        }
        let rho = max_pairwise_divergence(space, sources)?;
        let mut tests = (0..5).map(|_| FiniteDistribution::new(random_mass(n, &mut rng, 0.5))).collect::<Result<Vec<_>>>()?;
        // point masses are the likeliest to fall outside every ball
        tests.extend((0..n).map(|i| FiniteDistribution::dirac(n, i)).collect::<Result<Vec<_>>>()?);
        for s in &tests {
            let inside = intersection_membership(space, sources, s)?;
            let mut outside_all = true;
            for p in sources.sources() {
                if ball_membership(space, p, rho, s)? {
                    outside_all = false;
                }
            }
            for phi in &phis {
                let pass = check_condition(space, &sources.with_weights(phi.clone())?, s)?.pass;
                if inside {
                    s2.record(pass);
                }
                if outside_all {
                    s3.record(!pass);
                }
            }
        }
    }
    Ok(SuiteReport {
        suite: "prop2".into(),
        properties: vec![
            s1.named("mixtures lie in the ball intersection"),
            s2.named("ball intersection satisfies the condition"),
            s3.named("outside every ball fails the condition"),
        ],
    })
}

fn grad_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    max_relative_error(analytic, numeric)
}

fn param_fd(net: &DenseNetwork<f64>, mut f: impl FnMut(&DenseNetwork<f64>) -> f64) -> Vec<f64> {
    let theta = net.params();
    let mut probe = net.clone();
    central_difference(&theta, 1e-5, |t| {
        probe.set_params(t).expect("same length");
        f(&probe)
    })
}

fn with_part(t: &NetworkTriple<f64>, which: usize, net: &DenseNetwork<f64>) -> NetworkTriple<f64> {
    let mut c = t.clone();
    match which {
        0 => c.extractor = net.clone(),
        1 => c.task_head = net.clone(),
        _ => c.domain_head = net.clone(),
    }
    c
}

fn part(t: &NetworkTriple<f64>, which: usize) -> &DenseNetwork<f64> {
    match which {
        0 => &t.extractor,
        1 => &t.task_head,
        _ => &t.domain_head,
    }
}

pub fn gradcheck(cases: usize, seed: u64) -> Result<SuiteReport> {
    const TOL: f64 = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut ce, mut sd, mut ent, mut kl, mut full) = (Tally::default(), Tally::default(), Tally::default(), Tally::default(), Tally::default());
    // relu kinks make finite differences unreliable, so only smooth activations
    let acts = [Activation::Tanh, Activation::Identity];
    for _ in 0..cases {
        let c = rng.random_range(2..=4);
        let z: Vec<f64> = (0..c).map(|_| rng.random_range(-3.0..3.0)).collect();
        let label = rng.random_range(0..c);
        let (_, g) = cross_entropy(&z, label)?;
        let e = grad_rel_error(&g, &central_difference(&z, 1e-5, |x| cross_entropy(x, label).unwrap().0));
        ce.observe(e);
        ce.record(e < TOL);
        let (_, g) = entropy_loss(&z);
        let e = grad_rel_error(&g, &central_difference(&z, 1e-5, |x| entropy_loss(x).0));
        ent.observe(e);
        ent.record(e < TOL);
        let p: Vec<f64> = (0..c).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (_, g) = kl_divergence(&p, &z)?;
        let e = grad_rel_error(&g, &central_difference(&z, 1e-5, |x| kl_divergence(&p, x).unwrap().0));
        kl.observe(e);
        kl.record(e < TOL);

        let k = rng.random_range(2..=3);
        let arch = TripleArchitecture {
            input_dim: rng.random_range(1..=3),
            extractor_widths: vec![rng.random_range(2..=5), rng.random_range(2..=4)],
            task_hidden: if rng.random_bool(0.5) { vec![3] } else { vec![] },
            domain_hidden: vec![rng.random_range(2..=4)],
            classes: c,
            domains: k,
            activation: acts[rng.random_range(0..acts.len())],
        };
        let t = NetworkTriple::seeded(&arch, &mut rng)?;
        let n = rng.random_range(2..=6);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..arch.input_dim).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let batch = LabeledBatch::new(pts, (0..n).map(|_| rng.random_range(0..c)).collect(), (0..n).map(|_| rng.random_range(0..k)).collect())?;
        let lambda = rng.random_range(0.0..1.5);
        let w_h = rng.random_range(0.0..0.5);

        let (_, gd) = source_domain_loss(&t, &batch, lambda)?;
        for which in [0usize, 2] {
            let analytic = if which == 0 { gd.extractor.flatten() } else { gd.domain_head.flatten() };
            let sign = if which == 0 { -lambda } else { 1.0 };
            let fd: Vec<f64> = param_fd(part(&t, which), |net| source_domain_loss(&with_part(&t, which, net), &batch, 0.0).unwrap().0)
                .into_iter()
                .map(|v| sign * v)
                .collect();
            let e = grad_rel_error(&analytic, &fd);
            sd.observe(e);
            sd.record(e < TOL);
        }

        let step = objective(&t, &batch, ObjectiveWeights { lambda, entropy: w_h, domain_weights: None })?;
        let scalar = |tt: &NetworkTriple<f64>, lam: f64, w: f64, dw: f64| {
            task_loss(tt, &batch).unwrap().0 + w * entropy_term(tt, &batch).unwrap().0 + dw * source_domain_loss(tt, &batch, 0.0).unwrap().0 * lam
        };
        // extractor: descends task + entropy, ascends lambda * domain loss
        let fd_e = param_fd(&t.extractor, |net| scalar(&with_part(&t, 0, net), lambda, w_h, -1.0));
        let fd_s = param_fd(&t.task_head, |net| scalar(&with_part(&t, 1, net), lambda, w_h, 0.0));
        let fd_m = param_fd(&t.domain_head, |net| source_domain_loss(&with_part(&t, 2, net), &batch, 0.0).unwrap().0);
        for (a, n) in [(step.grads.extractor.flatten(), fd_e), (step.grads.task_head.flatten(), fd_s), (step.grads.domain_head.flatten(), fd_m)] {
            let e = grad_rel_error(&a, &n);
            full.observe(e);
            full.record(e < TOL);
        }
    }
    Ok(SuiteReport {
        suite: "gradcheck".into(),
        properties: vec![
            ce.named("task cross-entropy"),
            sd.named("domain loss with reversal"),
            ent.named("entropy"),
            kl.named("KL divergence"),
            full.named("full objective"),
        ],
    })
}

fn gaussian_pair<R: Rng>(rng: &mut R) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    use rand_distr::{Distribution, Normal};
    let nd = Normal::new(0.0, 1.0).expect("unit normal");
    let shift = [rng.random_range(0.5..2.5), rng.random_range(-1.0..1.0)];
    let p = (0..30).map(|_| vec![nd.sample(rng), nd.sample(rng)]).collect();
    let q = (0..30).map(|_| vec![shift[0] + nd.sample(rng), shift[1] + nd.sample(rng)]).collect();
    (p, q)
}

pub fn contraction(cases: usize, seed: u64) -> Result<SuiteReport> {
    let cfg = ContractionConfig::default();
    let results: Vec<Result<(bool, f64)>> = (0..cases as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
            let (p, q) = gaussian_pair(&mut rng);
            let net = DenseNetwork::seeded(&[2, 6, 3], Activation::Tanh, Activation::Tanh, &mut rng)?;
            let s = find_contracting_gamma(&p, &q, &net, &cfg, 1.0, 0.99)?;
            Ok((s.found, s.trace.contracting_fraction(cfg.min_tolerance)))
        })
        .collect();
    let mut t = Tally::default();
    for r in results {
        let (found, frac) = r?;
        t.observe(1.0 - frac);
        t.record(found && frac >= 0.99);
    }
    Ok(SuiteReport { suite: "contraction".into(), properties: vec![t.named("halving search finds a contracting step size")] })
}

pub fn bound_validity(cases: usize, seed: u64) -> Result<SuiteReport> {
    let results: Vec<Result<(usize, usize, f64, bool)>> = (0..cases as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
            let n = rng.random_range(2..=5);
            let class = random_class(n, &mut rng);
            let world = FiniteWorld::new(class.clone())?;
            let k = rng.random_range(2..=3);
            let dists = (0..k).map(|_| FiniteDistribution::new(random_mass(n, &mut rng, 0.3))).collect::<Result<Vec<_>>>()?;
            let sources = SourceCollection::new(dists, random_simplex(k, &mut rng))?;
            let shared = rng.random_bool(0.5);
            let base: u64 = rng.random_range(0..1u64 << n);
            let mut lab = || if shared { base } else { rng.random_range(0..1u64 << n) };
            let labelers: Vec<u64> = (0..k).map(|_| lab()).collect();
            let tlab = lab();
            let target = FiniteDistribution::new(random_mass(n, &mut rng, 0.3))?;
            let cand = CandidateConfig { seed: i, ..Default::default() };
            let (mut cases, mut bad, mut worst, mut ident) = (0, 0, f64::NEG_INFINITY, true);
            for mode in [ObjectMode::MixtureHull, ObjectMode::BallIntersection] {
                for r in dg_bound_reports(&world, class.labelings(), &sources, &labelers, (&target, tlab), mode, &cand)? {
                    cases += 1;
                    worst = worst.max(r.observed_target_error - r.total_bound);
                    if !r.holds(1e-12) {
                        bad += 1;
                    }
                    ident &= r.arithmetic_identity_holds();
                }
            }
            Ok((cases, bad, worst, ident))
        })
        .collect();
    let (mut valid, mut ident) = (Tally::default(), Tally::default());
    for r in results {
        let (cases, bad, worst, id) = r?;
        valid.cases += cases;
        valid.failures += bad;
        valid.observe(worst);
        ident.record(id);
    }
    Ok(SuiteReport {
        suite: "bound-validity".into(),
        properties: vec![valid.named("target error within bound for every hypothesis"), ident.named("total equals sum of terms")],
    })
}

pub fn object_tightness(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut t = Tally::default();
    let fx = example1_fixture();
    let cfg = CandidateConfig { seed, ..Default::default() };
    let c = compare_objects(&IntervalSpace, &fx.sources, &fx.candidate, &cfg)?;
    t.observe(c.ball_intersection.min_divergence - c.mixture_hull.min_divergence);
    t.record(c.ball_intersection.min_divergence <= c.mixture_hull.min_divergence);
    let results: Vec<Result<f64>> = (0..cases as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000 + i));
            let edges = random_edges(rng.random_range(4..=16), &mut rng);
            let k = rng.random_range(2..=3);
            let srcs = (0..k).map(|_| random_histogram(&edges, &mut rng)).collect();
            let sources = SourceCollection::new(srcs, random_simplex(k, &mut rng))?;
            let target = random_histogram(&edges, &mut rng);
            let c = compare_objects(&IntervalSpace, &sources, &target, &CandidateConfig { seed: i, ..Default::default() })?;
            Ok(c.ball_intersection.min_divergence - c.mixture_hull.min_divergence)
        })
        .collect();
    for r in results {
        let gap = r?;
        t.observe(gap);
        t.record(gap <= 0.0);
    }
    Ok(SuiteReport { suite: "object-tightness".into(), properties: vec![t.named("ball term at most mixture term")] })
}

pub fn augmentation(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sub, mut neutral) = (Tally::default(), Tally::default());
    for case in 0..cases {
        let edges = random_edges(rng.random_range(3..=10), &mut rng);
        let span = edges[edges.len() - 1] - edges[0];
        let k = rng.random_range(2..=3);
        let shared = case % 3 == 2;
        let srcs: Vec<_> = if shared {
            vec![random_histogram(&edges, &mut rng); k]
        } else {
            (0..k).map(|_| random_histogram(&edges, &mut rng)).collect()
        };
        let sources = SourceCollection::uniform(srcs.clone())?;
        // random auxiliaries rarely satisfy the condition; translations that
        // push the sources apart often do
        let aux: Vec<_> = match case % 3 {
            0 => (0..k).map(|_| random_histogram(&edges, &mut rng)).collect(),
            1 => {
                let d = rng.random_range(0.5..3.0) * span;
                srcs.iter().enumerate().map(|(i, p)| p.translate((i as f64 - (k - 1) as f64 / 2.0) * d)).collect()
            }
            _ => srcs.iter().enumerate().map(|(i, p)| p.translate(i as f64 * (span + 1.0))).collect(),
        };
        let beta = rng.random_range(0.0..=1.0);
        let cands: Vec<_> = (0..30)
            .map(|_| {
                let w = random_simplex(k, &mut rng);
                let m = mixture(&IntervalSpace, &sources, &w).expect("valid mixture");
                let r = random_histogram(&edges, &mut rng);
                let t = rng.random_range(0.0..0.5);
                let mass: Vec<f64> = m.mass().iter().zip(r.mass()).map(|(a, b)| (1.0 - t) * a + t * b).collect();
                HistogramDistribution::new(edges.clone(), mass).expect("convex blend")
            })
            .collect();
        let rep = check_augmentation_condition(&IntervalSpace, &sources, &aux, 1.0 - beta, beta, &cands)?;
        if rep.condition_holds {
            sub.record(rep.violations.is_empty());
        }
        let same = check_augmentation_condition(&IntervalSpace, &sources, &srcs, 1.0 - beta, beta, &cands)?;
        neutral.record(same.condition_holds && same.violations.is_empty() && (same.rho - same.rho_star).abs() <= 1e-12);
    }
    Ok(SuiteReport {
        suite: "augmentation".into(),
        properties: vec![
            sub.named("inclusion holds whenever the condition does"),
            neutral.named("auxiliary equal to sources is neutral"),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(Suite::parse(s.name()), Some(s));
        }
        assert_eq!(Suite::parse("nope"), None);
    }

    #[test]
    fn small_runs_pass() {
        assert!(divergence_oracle(50, 1).unwrap().passed());
        assert!(pseudometric(50, 1).unwrap().passed());
        assert!(prop2(50, 1).unwrap().passed());
        assert!(gradcheck(5, 1).unwrap().passed());
    }
}
