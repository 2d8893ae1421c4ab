use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ModeName};
use super::verify::SuiteReport;
use super::Produced;
use crate::bounds::{compare_objects, dg_bound_reports, BoundReport, FiniteWorld, ObjectMode, RayWorld};
use crate::error::{Error, Result};
use crate::estimation::curve_to_jsonl;
use crate::geometry::{
    check_condition, exact_interval_divergence, intersection_membership, union_membership, ConditionReport,
    FiniteDistribution, FiniteHypothesisClass, HistogramDistribution, HistogramRecord, IntervalSpace, SourceCollection,
};
use crate::nn::NetworkTriple;
use crate::synthetic::{example1_fixture, generate, read_dataset, write_dataset, BenchmarkTask};
use crate::training::{train as run_training, EpochMetrics, Method};

type H = HistogramDistribution<f64>;

fn parse_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Parse { source_name: path.display().to_string(), message: e.to_string() }
}

fn with_context(ctx: &str, e: Error) -> Error {
    match e {
        Error::InvalidInput(m) => Error::InvalidInput(format!("{ctx}: {m}")),
        Error::InvariantViolation(m) => Error::InvariantViolation(format!("{ctx}: {m}")),
        Error::DegenerateObject(m) => Error::DegenerateObject(format!("{ctx}: {m}")),
        other => other,
    }
}

fn json_pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

fn histogram(r: HistogramRecord<f64>, ctx: &str) -> Result<H> {
    H::new(r.edges, r.mass).map_err(|e| with_context(ctx, e))
}

fn sources_from(dists: Vec<H>, weights: Option<Vec<f64>>, ctx: &str) -> Result<SourceCollection<H, f64>> {
    match weights {
        Some(w) => SourceCollection::new(dists, w),
        None => SourceCollection::uniform(dists),
    }
    .map_err(|e| with_context(ctx, e))
}

/// A named set of histogram sources with candidates to check against them.
#[derive(Debug, Clone)]
pub struct GeometryFixture {
    pub name: String,
    pub sources: SourceCollection<H, f64>,
    pub candidates: Vec<(String, H)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryFixtureFile {
    name: Option<String>,
    sources: Vec<HistogramRecord<f64>>,
    weights: Option<Vec<f64>>,
    #[serde(default)]
    candidates: Vec<HistogramRecord<f64>>,
}

/// Builtins are `example1` and `example1-overlap`; anything else is read
/// as a JSON fixture file.
pub fn load_geometry_fixtures(names: &[String]) -> Result<(Vec<GeometryFixture>, Vec<PathBuf>)> {
    let fx = example1_fixture();
    let mut inputs = Vec::new();
    let mut out = Vec::new();
    for name in names {
        match name.as_str() {
            "example1" => out.push(GeometryFixture {
                name: name.clone(),
                sources: fx.sources.clone(),
                candidates: vec![("U(1,3)".into(), fx.candidate.clone()), ("P1".into(), fx.sources.sources()[0].clone())],
            }),
            "example1-overlap" => out.push(GeometryFixture {
                name: name.clone(),
                sources: fx.overlapping_sources.clone(),
                candidates: vec![("U(4,5)".into(), fx.far_candidate.clone()), ("U(2,4)".into(), fx.sources.sources()[1].clone())],
            }),
            path => {
                let path = PathBuf::from(path);
                let text = std::fs::read_to_string(&path)?;
                let file: GeometryFixtureFile = serde_json::from_str(&text).map_err(|e| parse_err(&path, e))?;
                let label = file.name.unwrap_or_else(|| path.display().to_string());
                let dists = file
                    .sources
                    .into_iter()
                    .enumerate()
                    .map(|(i, r)| histogram(r, &format!("{label} source {i}")))
                    .collect::<Result<Vec<_>>>()?;
                let sources = sources_from(dists, file.weights, &label)?;
                let candidates = file
                    .candidates
                    .into_iter()
                    .enumerate()
                    .map(|(i, r)| Ok((format!("candidate {i}"), histogram(r, &format!("{label} candidate {i}"))?)))
                    .collect::<Result<Vec<_>>>()?;
                out.push(GeometryFixture { name: label, sources, candidates });
                inputs.push(path);
            }
        }
    }
    Ok((out, inputs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDivergence {
    pub i: usize,
    pub j: usize,
    pub divergence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateCheck {
    pub label: String,
    /// `d(P_i, s)` for every source.
    pub divergences: Vec<f64>,
    pub condition: ConditionReport<f64>,
    pub in_intersection: bool,
    pub in_union: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureReport {
    pub name: String,
    pub weights: Vec<f64>,
    pub pairwise: Vec<PairDivergence>,
    pub rho: f64,
    pub candidates: Vec<CandidateCheck>,
}

pub fn geometry_report(fx: &GeometryFixture) -> Result<FixtureReport> {
    let ps = fx.sources.sources();
    let mut pairwise = Vec::new();
    let mut rho = 0.0f64;
    for i in 0..ps.len() {
        for j in i + 1..ps.len() {
            let d = exact_interval_divergence(&ps[i], &ps[j])?.value();
            rho = rho.max(d);
            pairwise.push(PairDivergence { i, j, divergence: d });
        }
    }
    let candidates = fx
        .candidates
        .iter()
        .map(|(label, s)| {
            Ok(CandidateCheck {
                label: label.clone(),
                divergences: ps.iter().map(|p| exact_interval_divergence(p, s).map(|d| d.value())).collect::<Result<_>>()?,
                condition: check_condition(&IntervalSpace, &fx.sources, s)?,
                in_intersection: intersection_membership(&IntervalSpace, &fx.sources, s)?,
                in_union: union_membership(&IntervalSpace, &fx.sources, s)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FixtureReport { name: fx.name.clone(), weights: fx.sources.weights().to_vec(), pairwise, rho, candidates })
}

pub(super) fn geometry(config: &ExperimentConfig) -> Result<Produced> {
    let (fixtures, inputs) = load_geometry_fixtures(&config.geometry.fixtures)?;
    let reports = fixtures.iter().map(geometry_report).collect::<Result<Vec<_>>>()?;
    let mut p = Produced { inputs, ..Default::default() };
    for r in &reports {
        let _ = writeln!(p.summary, "{}: rho = {}", r.name, r.rho);
        for c in &r.candidates {
            let _ = writeln!(p.summary, "  {}: condition {} (slack {})", c.label, if c.condition.pass { "holds" } else { "fails" }, c.condition.slack);
        }
    }
    if reports.is_empty() {
        p.summary.push_str("no fixtures\n");
    }
    p.add("geometry.json", json_pretty(&reports));
    Ok(p)
}

/// A bound instance in either world.
#[derive(Debug, Clone)]
pub enum BoundInstance {
    Ray {
        name: String,
        sources: SourceCollection<H, f64>,
        labelers: Vec<f64>,
        target: H,
        target_labeler: f64,
        hypotheses: Vec<f64>,
    },
    Finite {
        name: String,
        class: FiniteHypothesisClass,
        sources: SourceCollection<FiniteDistribution<f64>, f64>,
        labelers: Vec<u64>,
        target: FiniteDistribution<f64>,
        target_labeler: u64,
    },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum BoundInstanceFile {
    Ray {
        name: Option<String>,
        sources: Vec<HistogramRecord<f64>>,
        weights: Option<Vec<f64>>,
        labelers: Vec<f64>,
        target: HistogramRecord<f64>,
        target_labeler: f64,
        hypotheses: Vec<f64>,
    },
    Finite {
        name: Option<String>,
        class: Vec<String>,
        sources: Vec<Vec<f64>>,
        weights: Option<Vec<f64>>,
        labelers: Vec<String>,
        target: Vec<f64>,
        target_labeler: String,
    },
}

fn labeling(s: &str, n: usize, ctx: &str) -> Result<u64> {
    let c = FiniteHypothesisClass::from_strings(&[s]).map_err(|e| with_context(ctx, e))?;
    if c.support_size() != n {
        return Err(Error::InvalidInput(format!("{ctx}: labeling {s:?} has length {} not {n}", c.support_size())));
    }
    Ok(c.labelings()[0])
}

/// The builtin `example1` instance: rays `1[x <= a]`, both sources and the
/// target `U(1,3)` labelled by the threshold 2.
fn example1_instance() -> BoundInstance {
    let fx = example1_fixture();
    BoundInstance::Ray {
        name: "example1".into(),
        sources: fx.sources,
        labelers: vec![2.0, 2.0],
        target: fx.candidate,
        target_labeler: 2.0,
        hypotheses: vec![1.0, 2.0, 3.0],
    }
}

pub fn load_bound_instances(names: &[String]) -> Result<(Vec<BoundInstance>, Vec<PathBuf>)> {
    let mut out = Vec::new();
    let mut inputs = Vec::new();
    for name in names {
        if name == "example1" {
            out.push(example1_instance());
            continue;
        }
        let path = PathBuf::from(name);
        let text = std::fs::read_to_string(&path)?;
        let file: BoundInstanceFile = serde_json::from_str(&text).map_err(|e| parse_err(&path, e))?;
        let default_name = path.display().to_string();
        out.push(match file {
            BoundInstanceFile::Ray { name, sources, weights, labelers, target, target_labeler, hypotheses } => {
                let label = name.unwrap_or(default_name);
                let dists = sources
                    .into_iter()
                    .enumerate()
                    .map(|(i, r)| histogram(r, &format!("{label} source {i}")))
                    .collect::<Result<Vec<_>>>()?;
                BoundInstance::Ray {
                    sources: sources_from(dists, weights, &label)?,
                    target: histogram(target, &format!("{label} target"))?,
                    name: label,
                    labelers,
                    target_labeler,
                    hypotheses,
                }
            }
            BoundInstanceFile::Finite { name, class, sources, weights, labelers, target, target_labeler } => {
                let label = name.unwrap_or(default_name);
                let class = FiniteHypothesisClass::from_strings(&class).map_err(|e| with_context(&label, e))?;
                let n = class.support_size();
                let dists = sources
                    .into_iter()
                    .enumerate()
                    .map(|(i, m)| FiniteDistribution::new(m).map_err(|e| with_context(&format!("{label} source {i}"), e)))
                    .collect::<Result<Vec<_>>>()?;
                let sources = match weights {
                    Some(w) => SourceCollection::new(dists, w),
                    None => SourceCollection::uniform(dists),
                }
                .map_err(|e| with_context(&label, e))?;
                let labelers = labelers.iter().map(|s| labeling(s, n, &label)).collect::<Result<Vec<_>>>()?;
                BoundInstance::Finite {
                    target: FiniteDistribution::new(target).map_err(|e| with_context(&format!("{label} target"), e))?,
                    target_labeler: labeling(&target_labeler, n, &label)?,
                    name: label,
                    class,
                    sources,
                    labelers,
                }
            }
        });
        inputs.push(path);
    }
    Ok((out, inputs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInstanceReport {
    pub name: String,
    pub world: String,
    pub hypotheses: Vec<String>,
    pub mixture_hull: Vec<BoundReport<f64>>,
    pub ball_intersection: Vec<BoundReport<f64>>,
    /// Observed target error within the bound for every hypothesis and mode.
    pub all_hold: bool,
}

impl BoundInstance {
    pub fn name(&self) -> &str {
        match self {
            BoundInstance::Ray { name, .. } | BoundInstance::Finite { name, .. } => name,
        }
    }

    pub fn report(&self, candidates: &crate::bounds::CandidateConfig) -> Result<BoundInstanceReport> {
        let ctx = |e| with_context(self.name(), e);
        let (world, hypotheses, mixture_hull, ball_intersection) = match self {
            BoundInstance::Ray { sources, labelers, target, target_labeler, hypotheses, .. } => {
                let w = RayWorld::new();
                let run = |m| dg_bound_reports(&w, hypotheses, sources, labelers, (target, *target_labeler), m, candidates).map_err(ctx);
                let names = hypotheses.iter().map(|a| format!("x <= {a}")).collect();
                ("ray", names, run(ObjectMode::MixtureHull)?, run(ObjectMode::BallIntersection)?)
            }
            BoundInstance::Finite { class, sources, labelers, target, target_labeler, .. } => {
                let w = FiniteWorld::new(class.clone()).map_err(ctx)?;
                let hs = class.labelings();
                let run = |m| dg_bound_reports(&w, hs, sources, labelers, (target, *target_labeler), m, candidates).map_err(ctx);
                ("finite", class.to_strings(), run(ObjectMode::MixtureHull)?, run(ObjectMode::BallIntersection)?)
            }
        };
        let all_hold = mixture_hull.iter().chain(&ball_intersection).all(|r| r.holds(1e-12));
        Ok(BoundInstanceReport { name: self.name().to_string(), world: world.into(), hypotheses, mixture_hull, ball_intersection, all_hold })
    }
}

pub(super) fn bound(config: &ExperimentConfig) -> Result<Produced> {
    let (instances, inputs) = load_bound_instances(&config.bound.instances)?;
    let reports = instances.iter().map(|i| i.report(&config.bound.candidates)).collect::<Result<Vec<_>>>()?;
    let mut p = Produced { inputs, ..Default::default() };
    for r in &reports {
        let third = |v: &[BoundReport<f64>]| v.first().map(|b| b.min_divergence_to_target).unwrap_or(f64::NAN);
        let _ = writeln!(
            p.summary,
            "{}: object term mixture {} ball {}; bound holds for all hypotheses: {}",
            r.name,
            third(&r.mixture_hull),
            third(&r.ball_intersection),
            r.all_hold
        );
    }
    if let Some(BoundInstance::Ray { sources, target, .. }) = instances.iter().find(|i| i.name() == "example1") {
        let cmp = compare_objects(&IntervalSpace, sources, target, &config.bound.candidates)?;
        p.add("objects.json", json_pretty(&cmp));
    }
    p.add("bounds.json", json_pretty(&reports));
    Ok(p)
}

fn load_task(config: &ExperimentConfig, seed: u64) -> Result<(BenchmarkTask<f64>, Vec<PathBuf>)> {
    match &config.data.path {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let (task, _) = read_dataset(&text, &path.display().to_string())?;
            Ok((task, vec![path.clone()]))
        }
        None => Ok((generate(&config.data.sources, &config.data.target, seed)?, Vec::new())),
    }
}

/// The result of one training run.
#[derive(Debug, Clone)]
pub struct TrainArtifacts {
    pub triple: NetworkTriple<f64>,
    pub metrics: Vec<EpochMetrics>,
}

fn train_once(config: &ExperimentConfig, task: &BenchmarkTask<f64>, method: &Method, seed: u64) -> Result<TrainArtifacts> {
    let arch = config.train.architecture.build(task.dim(), task.classes(), task.sources.len());
    let init = NetworkTriple::seeded(&arch, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let cfg = crate::training::TrainingConfig { seed, ..config.train.training.clone() };
    let (triple, metrics) = run_training(init, &task.sources, Some(&task.target), &cfg, method, None)?;
    Ok(TrainArtifacts { triple, metrics })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn metrics_csv(metrics: &[EpochMetrics]) -> String {
    let k = metrics.first().map_or(0, |m| m.source_accuracies.len());
    let np = metrics.iter().map(|m| m.proxy_divergences.len()).max().unwrap_or(0);
    let mut out = String::from("epoch,lambda,learning_rate,mean_task_loss,mean_domain_loss,mean_entropy,target_accuracy");
    for i in 0..k {
        let _ = write!(out, ",source_accuracy_{i}");
    }
    for i in 0..np {
        let _ = write!(out, ",proxy_divergence_{i}");
    }
    out.push_str(",cooperative_violations,cooperative_loss_before,cooperative_loss_after,mean_kl_drift\n");
    for m in metrics {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{}",
            m.epoch,
            m.lambda,
            m.learning_rate,
            m.mean_task_loss,
            m.mean_domain_loss,
            m.mean_entropy,
            opt(m.target_accuracy)
        );
        for a in &m.source_accuracies {
            let _ = write!(out, ",{a}");
        }
        for i in 0..np {
            let _ = write!(out, ",{}", m.proxy_divergences.get(i).map(|v| v.to_string()).unwrap_or_default());
        }
        let _ = writeln!(
            out,
            ",{},{},{},{}",
            m.cooperative_violations,
            opt(m.cooperative_loss_before),
            opt(m.cooperative_loss_after),
            opt(m.mean_kl_drift)
        );
    }
    out
}

pub(super) fn train(config: &ExperimentConfig) -> Result<Produced> {
    let (task, inputs) = load_task(config, config.seed)?;
    let method = config.train.mode.method(&config.train.cooperative);
    let run = train_once(config, &task, &method, config.seed)?;
    let mut p = Produced { inputs, ..Default::default() };
    p.add("metrics.csv", metrics_csv(&run.metrics));
    let mut jsonl = String::new();
    for m in &run.metrics {
        jsonl.push_str(&serde_json::to_string(m).expect("metrics serialize"));
        jsonl.push('\n');
    }
    p.add("metrics.jsonl", jsonl);
    let curve: Vec<f64> = run.metrics.iter().map(|m| m.mean_domain_loss).collect();
    p.add("domain_loss.jsonl", curve_to_jsonl(&curve));
    p.add("checkpoint.json", json_pretty(&run.triple));
    if let Some(last) = run.metrics.last() {
        let _ = writeln!(
            p.summary,
            "{} seed {}: {} epochs, final domain loss {:.4}, target accuracy {}",
            config.train.mode.name(),
            config.seed,
            run.metrics.len(),
            last.mean_domain_loss,
            opt(last.target_accuracy)
        );
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy)]
struct SweepRun {
    seed: u64,
    mode: ModeName,
    steps: Option<usize>,
}

pub(super) fn sweep(config: &ExperimentConfig) -> Result<Produced> {
    let s = &config.sweep;
    if s.seeds.is_empty() || s.modes.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one seed and one mode".into()));
    }
    let mut runs = Vec::new();
    for &mode in &s.modes {
        let steps: Vec<Option<usize>> =
            if mode == ModeName::Dannce && !s.steps.is_empty() { s.steps.iter().copied().map(Some).collect() } else { vec![None] };
        for st in steps {
            for &seed in &s.seeds {
                runs.push(SweepRun { seed, mode, steps: st });
            }
        }
    }
    let mut inputs = Vec::new();
    let results = runs
        .par_iter()
        .map(|r| {
            let (task, _) = load_task(config, r.seed)?;
            let mut coop = config.train.cooperative.clone();
            if let Some(t) = r.steps {
                coop.steps = t;
            }
            train_once(config, &task, &r.mode.method(&coop), r.seed)
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(path) = &config.data.path {
        inputs.push(path.clone());
    }

    let mut csv = String::from("seed,mode,steps,epoch,lambda,mean_task_loss,mean_domain_loss,target_accuracy\n");
    let mut summary = String::from("mode,steps,runs,mean_final_domain_loss,mean_final_target_accuracy\n");
    let mut groups: Vec<(ModeName, Option<usize>, Vec<&TrainArtifacts>)> = Vec::new();
    for (r, a) in runs.iter().zip(&results) {
        let steps = r.steps.map(|t| t.to_string()).unwrap_or_default();
        for m in &a.metrics {
            let _ = writeln!(
                csv,
                "{},{},{steps},{},{},{},{},{}",
                r.seed,
                r.mode.name(),
                m.epoch,
                m.lambda,
                m.mean_task_loss,
                m.mean_domain_loss,
                opt(m.target_accuracy)
            );
        }
        match groups.iter_mut().find(|g| g.0 == r.mode && g.1 == r.steps) {
            Some(g) => g.2.push(a),
            None => groups.push((r.mode, r.steps, vec![a])),
        }
    }
    let mut text = String::new();
    for (mode, steps, arts) in &groups {
        let n = arts.len() as f64;
        let last = |f: &dyn Fn(&EpochMetrics) -> f64| arts.iter().map(|a| a.metrics.last().map_or(f64::NAN, f)).sum::<f64>() / n;
        let dl = last(&|m| m.mean_domain_loss);
        let acc = last(&|m| m.target_accuracy.unwrap_or(f64::NAN));
        let st = steps.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(summary, "{},{st},{},{dl},{acc}", mode.name(), arts.len());
        let _ = writeln!(text, "{} {}: domain loss {dl:.4}, target accuracy {acc:.4}", mode.name(), if st.is_empty() { String::new() } else { format!("t={st}") });
    }
    let mut p = Produced { inputs, summary: text, ..Default::default() };
    p.add("sweep.csv", csv);
    p.add("sweep_summary.csv", summary);
    Ok(p)
}

pub(super) fn gen_data(config: &ExperimentConfig) -> Result<Produced> {
    let task = generate::<f64>(&config.data.sources, &config.data.target, config.seed)?;
    let mut p = Produced::default();
    p.summary = format!(
        "{} sources and one target, {} points in total\n",
        task.sources.len(),
        task.sources.iter().map(|b| b.len()).sum::<usize>() + task.target.len()
    );
    p.add("dataset.csv", write_dataset(&task, config.seed));
    Ok(p)
}

pub(super) fn verify(config: &ExperimentConfig) -> Result<Produced> {
    let reports: Vec<SuiteReport> = config.verify.suites.iter().map(|s| s.run(config.seed)).collect::<Result<_>>()?;
    let mut p = Produced::default();
    for r in &reports {
        let _ = writeln!(p.summary, "{r}");
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.suite.as_str()).collect();
    if !failed.is_empty() {
        p.failure = Some(format!("suites failed: {}", failed.join(", ")));
    }
    p.add("verify.json", json_pretty(&reports));
    Ok(p)
}
