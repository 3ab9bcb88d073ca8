//! Versioned JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zdq::quantizer::DEFAULT_ACTION_CAP;
use zdq::solver::{DEFAULT_BELIEF_CAP, DEFAULT_TREE_CAP};
use zdq::source::stationary_distribution;
use zdq::{AverageCostMethod, AverageCostOptions, Belief, Channel, DistortionSpec, MarkovModel, Problem};

use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub model: ModelConfig,
    pub distortion: DistortionConfig,
    pub num_symbols: usize,
    #[serde(default)]
    pub channel: ChannelConfig,
    pub grid_resolution: usize,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Horizons for `converge` and `oracle-check`.
    #[serde(default)]
    pub horizons: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub periodic: PeriodicConfig,
    #[serde(default)]
    pub coupling: CouplingConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub transition: Vec<Vec<f64>>,
    pub initial: InitialConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedInitial {
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialConfig {
    Named(NamedInitial),
    Probs(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedDistortion {
    Hamming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistortionConfig {
    Named(NamedDistortion),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedChannel {
    Noiseless,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BscConfig {
    pub bsc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelConfig {
    Named(NamedChannel),
    Bsc(BscConfig),
    Matrix(Vec<Vec<f64>>),
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig::Named(NamedChannel::Noiseless)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: AverageCostMethod,
    pub tol: f64,
    pub max_iterations: usize,
    pub damping: f64,
    pub max_discount_exponent: u32,
    pub action_cap: usize,
    pub tree_cap: usize,
    pub belief_cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = AverageCostOptions::default();
        Self {
            method: o.method,
            tol: o.tol,
            max_iterations: o.max_iterations,
            damping: o.damping,
            max_discount_exponent: o.max_discount_exponent,
            action_cap: DEFAULT_ACTION_CAP,
            tree_cap: DEFAULT_TREE_CAP,
            belief_cap: DEFAULT_BELIEF_CAP,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> AverageCostOptions {
        AverageCostOptions {
            method: self.method,
            tol: self.tol,
            max_iterations: self.max_iterations,
            damping: self.damping,
            max_discount_exponent: self.max_discount_exponent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub horizon: usize,
    pub runs: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            horizon: 1000,
            runs: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeriodicConfig {
    pub epsilons: Vec<f64>,
}

impl Default for PeriodicConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![0.02, 0.05, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingConfig {
    /// Monte Carlo runs per start pair; 0 skips the simulation.
    pub monte_carlo_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub search_cap: f64,
    /// Largest allowed `|DP - oracle|`.
    pub tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            search_cap: zdq::oracle::DEFAULT_SEARCH_CAP,
            tolerance: 1e-12,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            CliError::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if self.grid_resolution == 0 {
            return bad("grid_resolution must be >= 1".into());
        }
        if self.num_symbols == 0 {
            return bad("num_symbols must be >= 1".into());
        }
        if !(self.solver.tol > 0.0) {
            return bad("solver.tol must be > 0".into());
        }
        if self.periodic.epsilons.iter().any(|e| !(*e > 0.0)) {
            return bad("periodic.epsilons must be > 0".into());
        }
        if !(self.oracle.tolerance >= 0.0) {
            return bad("oracle.tolerance must be >= 0".into());
        }
        if self.horizons.contains(&0) {
            return bad("horizons must be >= 1".into());
        }
        if self.simulation.horizon == 0 || self.simulation.runs == 0 {
            return bad("simulation.horizon and simulation.runs must be >= 1".into());
        }
        // dimension checks happen while building the problem
        self.problem()?;
        Ok(())
    }

    pub fn model(&self) -> Result<MarkovModel, CliError> {
        let p = self.model.transition.clone();
        let model = match &self.model.initial {
            InitialConfig::Named(NamedInitial::Stationary) => MarkovModel::stationary(p),
            InitialConfig::Probs(v) => Belief::new(v.clone()).and_then(|b| MarkovModel::new(p, b)),
        };
        model.map_err(|e| CliError::Config(format!("model: {e}")))
    }

    pub fn distortion(&self, num_states: usize) -> Result<DistortionSpec, CliError> {
        match &self.distortion {
            DistortionConfig::Named(NamedDistortion::Hamming) => Ok(DistortionSpec::hamming(num_states)),
            DistortionConfig::Matrix(m) => {
                DistortionSpec::new(m.clone()).map_err(|e| CliError::Config(format!("distortion: {e}")))
            }
        }
    }

    pub fn channel(&self) -> Result<Option<Channel>, CliError> {
        let ch = match &self.channel {
            ChannelConfig::Named(NamedChannel::Noiseless) => return Ok(None),
            ChannelConfig::Bsc(b) => Channel::bsc(b.bsc),
            ChannelConfig::Matrix(m) => Channel::new(m.clone()),
        };
        ch.map(Some).map_err(|e| CliError::Config(format!("channel: {e}")))
    }

    pub fn problem(&self) -> Result<Problem, CliError> {
        let model = self.model()?;
        let d = self.distortion(model.num_states())?;
        Problem::new(model, d, self.num_symbols, self.channel()?)
            .map_err(|e| CliError::Config(format!("inconsistent dimensions: {e}")))
    }

    /// The invariant belief, if the chain has a unique one.
    pub fn stationary_belief(&self) -> Result<Belief, CliError> {
        stationary_distribution(&self.model()?).map_err(|e| CliError::Config(format!("model: {e}")))
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "version": 1,
        "model": {"transition": [[0.9, 0.1], [0.1, 0.9]], "initial": "stationary"},
        "distortion": "hamming",
        "num_symbols": 2,
        "grid_resolution": 20
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.channel, ChannelConfig::Named(NamedChannel::Noiseless));
        assert_eq!(cfg.solver, SolverConfig::default());
        assert_eq!(cfg.problem().unwrap().num_states(), 2);
    }

    #[test]
    fn round_trip() {
        let mut cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        cfg.channel = ChannelConfig::Bsc(BscConfig { bsc: 0.1 });
        cfg.model.initial = InitialConfig::Probs(vec![0.25, 0.75]);
        cfg.distortion = DistortionConfig::Matrix(vec![vec![0.0, 1.0], vec![2.0, 0.0]]);
        cfg.horizons = vec![1, 2, 3];
        let again = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let text = MINIMAL.replace("\"num_symbols\": 2,", "\"num_symbols\": 2,\n        \"grid\": 3,");
        let err = ExperimentConfig::from_json(&text).unwrap_err();
        let CliError::Config(msg) = err else { panic!("wrong error kind") };
        assert!(msg.contains("line 6"), "{msg}");
        assert!(msg.contains("grid"), "{msg}");

        let text = MINIMAL.replace("\"grid_resolution\": 20", "\"grid_resolution\": 20, \"solver\": {\"tolerance\": 1}");
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn semantic_errors() {
        for (from, to) in [
            ("\"version\": 1", "\"version\": 2"),
            ("\"grid_resolution\": 20", "\"grid_resolution\": 0"),
            ("[0.1, 0.9]]", "[0.2, 0.9]]"),
            ("\"distortion\": \"hamming\"", "\"distortion\": [[0, 1, 1], [1, 0, 1], [1, 1, 0]]"),
        ] {
            let text = MINIMAL.replace(from, to);
            assert!(matches!(ExperimentConfig::from_json(&text), Err(CliError::Config(_))), "{to}");
        }
        let text = MINIMAL.replace("\"num_symbols\": 2", "\"num_symbols\": 3, \"channel\": {\"bsc\": 0.1}");
        assert!(ExperimentConfig::from_json(&text).is_err());
    }
}
