//! Experiment runner behind the `dglab` binary: configuration, commands,
//! output files and run manifests.

mod commands;
mod config;
pub mod verify;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use commands::{
    geometry_report, load_bound_instances, load_geometry_fixtures, BoundInstance, BoundInstanceReport, CandidateCheck,
    FixtureReport, GeometryFixture, PairDivergence, TrainArtifacts,
};
pub use config::{
    ArchitectureSection, BoundSection, DataSection, ExperimentConfig, GeometrySection, ModeName, SweepSection, TrainSection,
    VerifySection,
};
pub use verify::{Suite, SuiteReport};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Environment variable overriding the output directory.
pub const OUT_ENV: &str = "DGLAB_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Geometry,
    Train,
    Bound,
    Verify,
    Sweep,
    GenData,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Geometry => "geometry",
            Command::Train => "train",
            Command::Bound => "bound",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
            Command::GenData => "gen-data",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a command and check its outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    /// Effective configuration after command-line overrides.
    pub config_toml: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

/// Files produced by a command, not yet written.
#[derive(Debug, Clone, Default)]
pub struct Produced {
    pub files: Vec<(String, Vec<u8>)>,
    pub inputs: Vec<PathBuf>,
    pub summary: String,
    /// Set when a verification suite failed; outputs are still written.
    pub failure: Option<String>,
}

impl Produced {
    fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
    pub summary: String,
    /// Set when a verification suite failed.
    pub failure: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `--out` beats the environment variable, which beats the config file.
pub fn resolve_out_dir(cli: Option<&Path>, env: Option<&str>, config: &ExperimentConfig, command: Command) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(command.name()))
}

/// Runs `command` without touching the file system except to read inputs.
pub fn produce(command: Command, config: &ExperimentConfig) -> Result<Produced> {
    match command {
        Command::Geometry => commands::geometry(config),
        Command::Train => commands::train(config),
        Command::Bound => commands::bound(config),
        Command::Verify => commands::verify(config),
        Command::Sweep => commands::sweep(config),
        Command::GenData => commands::gen_data(config),
    }
}

fn hash_inputs(paths: &[PathBuf]) -> Result<Vec<FileHash>> {
    paths
        .iter()
        .map(|p| {
            let bytes = std::fs::read(p)?;
            Ok(FileHash { path: p.display().to_string(), sha256: sha256_hex(&bytes) })
        })
        .collect()
}

fn manifest_for(command: Command, config: &ExperimentConfig, produced: &Produced) -> Result<RunManifest> {
    let config_toml = config.to_toml();
    let mut outputs: Vec<FileHash> =
        produced.files.iter().map(|(p, b)| FileHash { path: p.clone(), sha256: sha256_hex(b) }).collect();
    outputs.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(RunManifest {
        command,
        config_hash: sha256_hex(config_toml.as_bytes()),
        config_toml,
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        inputs: hash_inputs(&produced.inputs)?,
        outputs,
    })
}

/// Runs `command` and writes its outputs and a manifest into `out_dir`.
/// A failed verification suite still writes everything; check
/// [`RunOutcome::failure`].
pub fn execute(command: Command, config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    let produced = produce(command, config)?;
    std::fs::create_dir_all(out_dir)?;
    for (name, bytes) in &produced.files {
        std::fs::write(out_dir.join(name), bytes)?;
    }
    let manifest = manifest_for(command, config, &produced)?;
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(out_dir.join(MANIFEST_FILE), text + "\n")?;
    Ok(RunOutcome { out_dir: out_dir.to_path_buf(), manifest, summary: produced.summary, failure: produced.failure })
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { source_name: path.display().to_string(), message: e.to_string() })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayReport {
    pub command: Command,
    pub files_checked: usize,
}

/// Reruns the manifest in `dir` in memory and compares every output hash.
pub fn replay(dir: &Path) -> Result<ReplayReport> {
    let manifest = read_manifest(dir)?;
    if sha256_hex(manifest.config_toml.as_bytes()) != manifest.config_hash {
        return Err(Error::Verification("config hash does not match the recorded config".into()));
    }
    for input in &manifest.inputs {
        let bytes = std::fs::read(&input.path)?;
        if sha256_hex(&bytes) != input.sha256 {
            return Err(Error::Verification(format!("input {} changed since the run", input.path)));
        }
    }
    let config = ExperimentConfig::from_toml(&manifest.config_toml, "manifest config")?;
    let produced = produce(manifest.command, &config)?;
    let fresh = manifest_for(manifest.command, &config, &produced)?;
    let mismatched: Vec<&str> = manifest
        .outputs
        .iter()
        .filter(|o| !fresh.outputs.contains(o))
        .map(|o| o.path.as_str())
        .collect();
    if !mismatched.is_empty() || fresh.outputs.len() != manifest.outputs.len() {
        return Err(Error::Verification(format!("replay differs in {}", mismatched.join(", "))));
    }
    Ok(ReplayReport { command: manifest.command, files_checked: fresh.outputs.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_dir_precedence() {
        let mut c = ExperimentConfig::default();
        assert_eq!(resolve_out_dir(None, None, &c, Command::Bound), PathBuf::from("runs/bound"));
        c.out = Some("cfg".into());
        assert_eq!(resolve_out_dir(None, None, &c, Command::Bound), PathBuf::from("cfg"));
        assert_eq!(resolve_out_dir(None, Some("env"), &c, Command::Bound), PathBuf::from("env"));
        assert_eq!(resolve_out_dir(Some(Path::new("cli")), Some("env"), &c, Command::Bound), PathBuf::from("cli"));
    }
}
