//! Seeded multi-source benchmarks. Every domain applies its own transform
//! (rotation or shift) to one shared class-conditional generator, so the
//! labeling function is the same in every domain up to that transform.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{HistogramDistribution, SourceCollection};
use crate::scalar::Scalar;
use crate::training::LabeledBatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// `C` Gaussian blobs on a circle, rotated by `transform` degrees.
    RotatedGaussians,
    /// Class `c` uniform on `[c, c + 1)` plus `transform`, in one dimension.
    ShiftedUniform1d,
    /// Two interleaved half circles rotated by `transform` degrees. Needs `C = 2`.
    TwoMoonsRotation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: GeneratorKind,
    pub transform: f64,
    pub classes: usize,
    pub points_per_class: usize,
    pub noise: f64,
}

impl DomainSpec {
    pub fn rotated(angle_deg: f64) -> Self {
        Self { kind: GeneratorKind::RotatedGaussians, transform: angle_deg, classes: 3, points_per_class: 100, noise: 0.6 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return invalid(format!("need at least two classes, got {}", self.classes));
        }
        if self.points_per_class == 0 {
            return invalid("points per class must be positive");
        }
        if !self.transform.is_finite() || !(self.noise >= 0.0) || !self.noise.is_finite() {
            return invalid("transform must be finite and noise non-negative");
        }
        if self.kind == GeneratorKind::TwoMoonsRotation && self.classes != 2 {
            return invalid("two moons has exactly two classes");
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            GeneratorKind::ShiftedUniform1d => 1,
            _ => 2,
        }
    }
}

/// Radius of the circle carrying the Gaussian class means.
const BLOB_RADIUS: f64 = 2.0;

fn rotate(p: [f64; 2], deg: f64) -> [f64; 2] {
    let (s, c) = (deg * PI / 180.0).sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

fn sample_point<R: Rng>(spec: &DomainSpec, class: usize, rng: &mut R) -> Vec<f64> {
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    match spec.kind {
        GeneratorKind::RotatedGaussians => {
            let a = 2.0 * PI * class as f64 / spec.classes as f64;
            // blobs are stretched along the tangent so that rotations matter
            let (t, r) = (n.sample(rng) * spec.noise * 1.5, n.sample(rng) * spec.noise * 0.5);
            let p = [BLOB_RADIUS * a.cos() - t * a.sin() + r * a.cos(), BLOB_RADIUS * a.sin() + t * a.cos() + r * a.sin()];
            rotate(p, spec.transform).to_vec()
        }
        GeneratorKind::ShiftedUniform1d => {
            let u: f64 = rng.random();
            vec![class as f64 + u + spec.transform + spec.noise * n.sample(rng)]
        }
        GeneratorKind::TwoMoonsRotation => {
            let t = PI * rng.random::<f64>();
            let p = if class == 0 { [t.cos(), t.sin()] } else { [1.0 - t.cos(), 0.5 - t.sin()] };
            let p = [p[0] + spec.noise * n.sample(rng), p[1] + spec.noise * n.sample(rng)];
            rotate(p, spec.transform).to_vec()
        }
    }
}

/// Points of one domain, classes interleaved, labeled with `domain_label`.
/// `stream` selects an independent random stream under the same seed.
pub fn generate_domain<F: Scalar>(spec: &DomainSpec, seed: u64, stream: u64, domain_label: usize) -> Result<LabeledBatch<F>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut points = Vec::with_capacity(spec.classes * spec.points_per_class);
    let mut labels = Vec::with_capacity(points.capacity());
    for _ in 0..spec.points_per_class {
        for c in 0..spec.classes {
            points.push(sample_point(spec, c, &mut rng).into_iter().map(F::lit).collect());
            labels.push(c);
        }
    }
    LabeledBatch::single_domain(points, labels, domain_label)
}

/// Sources with domain labels `0..k`, target with label `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct BenchmarkTask<F> {
    pub sources: Vec<LabeledBatch<F>>,
    pub target: LabeledBatch<F>,
    pub source_specs: Vec<DomainSpec>,
    pub target_spec: DomainSpec,
}

impl<F: Scalar> BenchmarkTask<F> {
    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn classes(&self) -> usize {
        self.target_spec.classes
    }
}

pub fn generate<F: Scalar>(sources: &[DomainSpec], target: &DomainSpec, seed: u64) -> Result<BenchmarkTask<F>> {
    if sources.len() < 2 {
        return invalid("a benchmark needs at least two sources");
    }
    let all: Vec<&DomainSpec> = sources.iter().chain(std::iter::once(target)).collect();
    for s in &all {
        s.validate()?;
        if s.kind != target.kind || s.classes != target.classes {
            return invalid("all domains must share generator kind and class count");
        }
    }
    for i in 0..all.len() {
        for j in 0..i {
            if all[i].transform == all[j].transform {
                return invalid(format!("duplicate transform {} across domains", all[i].transform));
            }
        }
    }
    let k = sources.len();
    let batches = sources
        .iter()
        .enumerate()
        .map(|(i, s)| generate_domain(s, seed, i as u64, i))
        .collect::<Result<Vec<_>>>()?;
    let tgt = generate_domain(target, seed, k as u64, k)?;
    Ok(BenchmarkTask { sources: batches, target: tgt, source_specs: sources.to_vec(), target_spec: target.clone() })
}

/// Three rotated-Gaussian sources at 0, 15 and 30 degrees, target at 45.
pub fn default_benchmark_specs() -> (Vec<DomainSpec>, DomainSpec) {
    (vec![DomainSpec::rotated(0.0), DomainSpec::rotated(15.0), DomainSpec::rotated(30.0)], DomainSpec::rotated(45.0))
}

const DATASET_MAGIC: &str = "# dglab-dataset v1";

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    sources: Vec<DomainSpec>,
    target: DomainSpec,
}

/// Text form: three header lines (format tag, seed, specs as JSON), then one
/// `role,domain_label,class_label,x0,x1,..` row per point.
pub fn write_dataset(task: &BenchmarkTask<f64>, seed: u64) -> String {
    let header = DatasetHeader { sources: task.source_specs.clone(), target: task.target_spec.clone() };
    let mut out = format!(
        "{DATASET_MAGIC}\n# seed: {seed}\n# spec: {}\n",
        serde_json::to_string(&header).expect("spec serializes")
    );
    let rows = task.sources.iter().map(|b| ("source", b)).chain(std::iter::once(("target", &task.target)));
    for (role, b) in rows {
        for (x, c, d) in b.iter() {
            write!(out, "{role},{d},{c}").expect("string write");
            for v in x {
                write!(out, ",{v}").expect("string write");
            }
            out.push('\n');
        }
    }
    out
}

pub fn read_dataset(text: &str, source_name: &str) -> Result<(BenchmarkTask<f64>, u64)> {
    let perr = |line: usize, msg: String| Error::Parse { source_name: source_name.to_string(), message: format!("line {line}: {msg}") };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == DATASET_MAGIC => {}
        Some((n, l)) => return Err(perr(n, format!("expected `{DATASET_MAGIC}`, found `{l}`"))),
        None => return Err(perr(1, "empty dataset".into())),
    }
    let (n, l) = lines.next().ok_or_else(|| perr(2, "missing seed line".into()))?;
    let seed = l
        .strip_prefix("# seed:")
        .and_then(|s| s.trim().parse::<u64>().ok())
        .ok_or_else(|| perr(n, format!("bad seed line `{l}`")))?;
    let (n, l) = lines.next().ok_or_else(|| perr(3, "missing spec line".into()))?;
    let header: DatasetHeader = l
        .strip_prefix("# spec:")
        .ok_or_else(|| perr(n, "missing `# spec:` prefix".into()))
        .and_then(|s| serde_json::from_str(s.trim()).map_err(|e| perr(n, e.to_string())))?;

    let k = header.sources.len();
    let mut rows: Vec<(Vec<Vec<f64>>, Vec<usize>)> = vec![(Vec::new(), Vec::new()); k + 1];
    for (n, l) in lines {
        if l.trim().is_empty() || l.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = l.split(',').map(str::trim).collect();
        if f.len() < 4 {
            return Err(perr(n, format!("expected at least 4 fields, found {}", f.len())));
        }
        let d: usize = f[1].parse().map_err(|_| perr(n, format!("bad domain label `{}`", f[1])))?;
        let c: usize = f[2].parse().map_err(|_| perr(n, format!("bad class label `{}`", f[2])))?;
        let ok_role = match f[0] {
            "source" => d < k,
            "target" => d == k,
            other => return Err(perr(n, format!("unknown role `{other}`"))),
        };
        if !ok_role {
            return Err(perr(n, format!("domain label {d} does not match role `{}`", f[0])));
        }
        let x = f[3..]
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| perr(n, format!("bad feature `{v}`"))))
            .collect::<Result<Vec<_>>>()?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(perr(n, "non-finite feature".into()));
        }
        rows[d].0.push(x);
        rows[d].1.push(c);
    }
    let mut batches = rows
        .into_iter()
        .enumerate()
        .map(|(d, (p, c))| LabeledBatch::single_domain(p, c, d).map_err(|e| perr(0, e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let target = batches.pop().expect("k + 1 domains");
    Ok((BenchmarkTask { sources: batches, target, source_specs: header.sources, target_spec: header.target }, seed))
}

/// The 1D instance with sources `U(0,2)`, `U(2,4)` on the unit grid over `[-1, 5]`.
#[derive(Debug, Clone)]
pub struct Example1Fixture {
    pub sources: SourceCollection<HistogramDistribution<f64>, f64>,
    /// `U(1,3)`: satisfies the pooling condition without being a mixture.
    pub candidate: HistogramDistribution<f64>,
    /// Overlapping sources `U(0,2)`, `U(1,3)` with `rho = 1`.
    pub overlapping_sources: SourceCollection<HistogramDistribution<f64>, f64>,
    /// `U(4,5)`: divergence 2 from both overlapping sources, so it fails the condition for them.
    pub far_candidate: HistogramDistribution<f64>,
}

pub fn example1_fixture() -> Example1Fixture {
    let u = |a: f64, b: f64| HistogramDistribution::uniform_on_unit_grid(-1, 5, a, b).expect("fixture histogram");
    Example1Fixture {
        sources: SourceCollection::uniform(vec![u(0.0, 2.0), u(2.0, 4.0)]).expect("two sources"),
        candidate: u(1.0, 3.0),
        overlapping_sources: SourceCollection::uniform(vec![u(0.0, 2.0), u(1.0, 3.0)]).expect("two sources"),
        far_candidate: u(4.0, 5.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{check_condition, exact_interval_divergence, max_pairwise_divergence, IntervalSpace};

    #[test]
    fn same_seed_same_data() {
        let (s, t) = default_benchmark_specs();
        let a = generate::<f64>(&s, &t, 9).unwrap();
        let b = generate::<f64>(&s, &t, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate::<f64>(&s, &t, 10).unwrap());
        assert_eq!(a.sources[2].domain_labels()[0], 2);
        assert_eq!(a.target.domain_labels()[0], 3);
    }

    #[test]
    fn classes_are_balanced() {
        let (s, t) = default_benchmark_specs();
        let task = generate::<f64>(&s, &t, 1).unwrap();
        for b in task.sources.iter().chain(std::iter::once(&task.target)) {
            let mut counts = [0usize; 3];
            for &c in b.class_labels() {
                counts[c] += 1;
            }
            assert_eq!(counts, [100; 3]);
        }
    }

    #[test]
    fn duplicate_transforms_are_rejected() {
        let s = vec![DomainSpec::rotated(0.0), DomainSpec::rotated(0.0)];
        assert!(generate::<f64>(&s, &DomainSpec::rotated(45.0), 0).is_err());
        let s = vec![DomainSpec::rotated(0.0), DomainSpec::rotated(10.0)];
        assert!(generate::<f64>(&s, &DomainSpec::rotated(10.0), 0).is_err());
    }

    #[test]
    fn dataset_text_round_trip() {
        let (s, t) = default_benchmark_specs();
        let task = generate::<f64>(&s, &t, 4).unwrap();
        let text = write_dataset(&task, 4);
        let (back, seed) = read_dataset(&text, "mem").unwrap();
        assert_eq!(seed, 4);
        assert_eq!(back, task);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let (s, t) = default_benchmark_specs();
        let text = write_dataset(&generate::<f64>(&s, &t, 4).unwrap(), 4);
        let broken = text.replacen("source,0,", "source,0,x,", 1);
        let err = read_dataset(&broken, "mem").unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");
    }

    #[test]
    fn example1_values() {
        let f = example1_fixture();
        assert_eq!(max_pairwise_divergence(&IntervalSpace, &f.sources).unwrap(), 2.0);
        let r = check_condition(&IntervalSpace, &f.sources, &f.candidate).unwrap();
        assert!(r.pass);
        assert_eq!(r.slack, 1.0);
        assert!(!check_condition(&IntervalSpace, &f.overlapping_sources, &f.far_candidate).unwrap().pass);
        // no weight on a 1e-3 grid reproduces U(1,3)
        let (p, q) = (&f.sources.sources()[0], &f.sources.sources()[1]);
        for i in 0..=1000 {
            let w = i as f64 / 1000.0;
            let m: Vec<f64> = p.mass().iter().zip(q.mass()).map(|(a, b)| w * a + (1.0 - w) * b).collect();
            let h = HistogramDistribution::new(p.edges().to_vec(), m).unwrap();
            assert!(exact_interval_divergence(&h, &f.candidate).unwrap().value() > 0.5);
        }
    }
}
