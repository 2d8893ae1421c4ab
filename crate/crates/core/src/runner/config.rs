use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::CandidateConfig;
use crate::dannce::CooperativeConfig;
use crate::error::{Error, Result};
use crate::nn::{Activation, TripleArchitecture};
use crate::synthetic::{default_benchmark_specs, DomainSpec};
use crate::training::{Method, TrainingConfig};

use super::verify::Suite;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Erm,
    Dann,
    Dannce,
}

impl ModeName {
    pub fn name(self) -> &'static str {
        match self {
            ModeName::Erm => "erm",
            ModeName::Dann => "dann",
            ModeName::Dannce => "dannce",
        }
    }

    pub fn method(self, cooperative: &CooperativeConfig) -> Method {
        match self {
            ModeName::Erm => Method::Erm,
            ModeName::Dann => Method::Dann,
            ModeName::Dannce => Method::Dannce(cooperative.clone()),
        }
    }
}

/// Everything a run needs. Missing sections take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Global seed; overrides the training seed.
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub geometry: GeometrySection,
    pub data: DataSection,
    pub train: TrainSection,
    pub bound: BoundSection,
    pub sweep: SweepSection,
    pub verify: VerifySection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: None,
            geometry: GeometrySection::default(),
            data: DataSection::default(),
            train: TrainSection::default(),
            bound: BoundSection::default(),
            sweep: SweepSection::default(),
            verify: VerifySection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    /// `example1`, `example1-overlap`, or paths to JSON fixture files.
    pub fixtures: Vec<String>,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self { fixtures: vec!["example1".into(), "example1-overlap".into()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Dataset written by `gen-data`; when absent the specs below are generated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub sources: Vec<DomainSpec>,
    pub target: DomainSpec,
}

impl Default for DataSection {
    fn default() -> Self {
        let (sources, target) = default_benchmark_specs();
        Self { path: None, sources, target }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchitectureSection {
    pub extractor_widths: Vec<usize>,
    pub task_hidden: Vec<usize>,
    pub domain_hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for ArchitectureSection {
    fn default() -> Self {
        Self { extractor_widths: vec![16, 8], task_hidden: vec![], domain_hidden: vec![16], activation: Activation::Tanh }
    }
}

impl ArchitectureSection {
    pub fn build(&self, input_dim: usize, classes: usize, domains: usize) -> TripleArchitecture {
        TripleArchitecture {
            input_dim,
            extractor_widths: self.extractor_widths.clone(),
            task_hidden: self.task_hidden.clone(),
            domain_hidden: self.domain_hidden.clone(),
            classes,
            domains,
            activation: self.activation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub mode: ModeName,
    pub architecture: ArchitectureSection,
    pub training: TrainingConfig,
    pub cooperative: CooperativeConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            mode: ModeName::Dannce,
            architecture: ArchitectureSection::default(),
            training: TrainingConfig::default(),
            cooperative: CooperativeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundSection {
    /// `example1` or paths to JSON instance files.
    pub instances: Vec<String>,
    pub candidates: CandidateConfig,
}

impl Default for BoundSection {
    fn default() -> Self {
        Self { instances: vec!["example1".into()], candidates: CandidateConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub seeds: Vec<u64>,
    pub modes: Vec<ModeName>,
    /// Cooperative step counts; only DANNCE runs fan out over these.
    pub steps: Vec<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { seeds: (0..5).collect(), modes: vec![ModeName::Erm, ModeName::Dann, ModeName::Dannce], steps: vec![5, 20] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub suites: Vec<Suite>,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { suites: Suite::ALL.to_vec() }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, source_name: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse { source_name: source_name.to_string(), message: e.to_string() })
    }

    /// Reads a config file and makes the dataset path absolute relative to
    /// the file's directory, so runs do not depend on the working directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = cfg.data.path.take() {
            let joined = if p.is_absolute() { p } else { base.join(p) };
            cfg.data.path = Some(joined.canonicalize().map_err(|e| {
                Error::InvalidInput(format!("dataset {}: {e}", joined.display()))
            })?);
        }
        let resolve = |list: &mut Vec<String>| {
            for item in list.iter_mut() {
                if item.ends_with(".json") && !Path::new(item.as_str()).is_absolute() {
                    *item = base.join(item.as_str()).display().to_string();
                }
            }
        };
        resolve(&mut cfg.geometry.fixtures);
        resolve(&mut cfg.bound.instances);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Training config with the global seed applied.
    pub fn training(&self) -> TrainingConfig {
        TrainingConfig { seed: self.seed, ..self.train.training.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_default() {
        assert_eq!(ExperimentConfig::from_toml("", "x").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::default();
        c.seed = 7;
        c.train.training.domain_weights = Some(vec![0.2, 0.3, 0.5]);
        let back = ExperimentConfig::from_toml(&c.to_toml(), "x").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_key_is_parse_error_with_line() {
        let e = ExperimentConfig::from_toml("seed = 1\n[train]\nmodee = \"dann\"\n", "cfg.toml").unwrap_err();
        match e {
            Error::Parse { source_name, message } => {
                assert_eq!(source_name, "cfg.toml");
                assert!(message.contains("line 3"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn global_seed_wins() {
        let c = ExperimentConfig::from_toml("seed = 11\n[train.training]\nseed = 3\n", "x").unwrap();
        assert_eq!(c.training().seed, 11);
    }
}
