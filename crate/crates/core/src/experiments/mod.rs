//! Named, reproducible experiments. Each takes an [`ExperimentSpec`] and
//! produces a JSON report plus plot-ready files; [`write_outputs`] puts them
//! in a directory next to a manifest that pins the configuration and seed.

mod compare;
mod curve;
mod distinguish;
mod fingerprint;
mod keystrokes;
mod mitigate;
mod template;

pub use compare::{run_compare, CompareReport, MonitorScore};
pub use curve::{run_curve, CurveReport};
pub use distinguish::{run_distinguish, DistinguishReport};
pub use fingerprint::{run_fingerprint, FingerprintReport};
pub use keystrokes::{run_keystrokes, KeystrokeReport, ScenarioReport};
pub use mitigate::{run_mitigate, MitigateReport};
pub use template::{run_template, TemplateReport, TemplateRun};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::attacks::AttackError;
use crate::config::{ConfigError, SimConfig};
use crate::core_sim::{Core, SimError};
use crate::workloads::WorkloadError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("profile library {0} not found")]
    ProfileLibraryMissing(PathBuf),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentName {
    Distinguish,
    Curve,
    Compare,
    Template,
    Fingerprint,
    Keystrokes,
    Mitigate,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 7] = [
        Self::Distinguish,
        Self::Curve,
        Self::Compare,
        Self::Template,
        Self::Fingerprint,
        Self::Keystrokes,
        Self::Mitigate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Distinguish => "distinguish",
            Self::Curve => "curve",
            Self::Compare => "compare",
            Self::Template => "template",
            Self::Fingerprint => "fingerprint",
            Self::Keystrokes => "keystrokes",
            Self::Mitigate => "mitigate",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| ExperimentError::Usage(format!("unknown experiment {s:?}")))
    }
}

/// Plot-ready files an experiment produced: (file name, contents).
pub type OutputFiles = Vec<(String, Vec<u8>)>;

/// Command-line style overrides applied on top of the configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub profiles: Option<usize>,
    pub noise_p: Option<f64>,
    /// Make the IDT uncachable on every simulated core.
    pub mitigate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    /// Effective configuration, overrides already applied.
    pub config: SimConfig,
    pub seed: u64,
    pub mitigate: bool,
}

impl ExperimentSpec {
    pub fn new(name: ExperimentName, config: SimConfig, seed: u64) -> Self {
        Self { name, config, seed, mitigate: false }
    }

    pub fn with_overrides(mut self, o: &Overrides) -> Result<Self, ExperimentError> {
        if let Some(p) = o.profiles {
            self.config.fingerprint.profiles = p;
        }
        if let Some(n) = o.noise_p {
            self.config.noise_p = n;
        }
        self.mitigate |= o.mitigate;
        self.config.validate()?;
        Ok(self)
    }

    /// A fresh core for one independent run, with the mitigation applied
    /// when requested.
    pub fn core(&self, seed: u64) -> Result<Core, ExperimentError> {
        let mut core = Core::new(&self.config, seed)?;
        if self.mitigate {
            core.install_uncachable_idt()?;
        }
        Ok(core)
    }

    /// SHA-256 of the effective configuration in canonical TOML.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.config.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn manifest(&self) -> String {
        format!(
            "tool idtsim {}\nexperiment {}\nseed {}\nmitigate {}\nconfig_sha256 {}\n",
            env!("CARGO_PKG_VERSION"),
            self.name,
            self.seed,
            self.mitigate,
            self.config_hash()
        )
    }
}

/// Everything an experiment produced, ready to be written out.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub metrics: serde_json::Value,
    pub files: OutputFiles,
}

impl ExperimentOutput {
    fn new(report: &impl Serialize) -> Self {
        Self { metrics: serde_json::to_value(report).expect("reports serialize"), files: Vec::new() }
    }

    fn file(mut self, name: impl Into<String>, contents: Vec<u8>) -> Self {
        self.files.push((name.into(), contents));
        self
    }
}

pub fn run(spec: &ExperimentSpec) -> Result<ExperimentOutput, ExperimentError> {
    match spec.name {
        ExperimentName::Distinguish => run_distinguish(spec).map(|r| ExperimentOutput::new(&r)),
        ExperimentName::Curve => {
            let r = run_curve(spec)?;
            let csv = r.to_csv();
            Ok(ExperimentOutput::new(&r).file("curve.csv", csv))
        }
        ExperimentName::Compare => {
            let (r, files) = run_compare(spec)?;
            Ok(files.into_iter().fold(ExperimentOutput::new(&r), |o, (n, c)| o.file(n, c)))
        }
        ExperimentName::Template => run_template(spec).map(|r| ExperimentOutput::new(&r)),
        ExperimentName::Fingerprint => {
            let (r, files) = run_fingerprint(spec)?;
            Ok(files.into_iter().fold(ExperimentOutput::new(&r), |o, (n, c)| o.file(n, c)))
        }
        ExperimentName::Keystrokes => {
            let (r, files) = run_keystrokes(spec)?;
            Ok(files.into_iter().fold(ExperimentOutput::new(&r), |o, (n, c)| o.file(n, c)))
        }
        ExperimentName::Mitigate => run_mitigate(spec).map(|r| ExperimentOutput::new(&r)),
    }
}

/// Writes `manifest.txt`, `metrics.json` and the experiment's files into `dir`.
pub fn write_outputs(spec: &ExperimentSpec, out: &ExperimentOutput, dir: &Path) -> Result<(), ExperimentError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ExperimentError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut metrics = serde_json::to_string_pretty(&out.metrics).expect("json");
    metrics.push('\n');
    let mut files = vec![
        ("manifest.txt".to_string(), spec.manifest().into_bytes()),
        ("metrics.json".to_string(), metrics.into_bytes()),
    ];
    files.extend(out.files.iter().cloned());
    for (name, contents) in files {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(io(&path))?;
    }
    Ok(())
}

/// Loads a configuration, or the defaults when no path is given.
pub fn load_config(path: Option<&Path>) -> Result<SimConfig, ExperimentError> {
    Ok(match path {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    })
}
