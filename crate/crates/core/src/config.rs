//! Run configuration files (TOML).
//!
//! ```toml
//! [graph]
//! kind = "path"            # path | ring | complete | star | edge-list | random
//! n_agents = 2
//!
//! [problem]
//! name = "quadratic-family" # quadratic-family | split-double-well | multi-well-2d
//! [problem.params]
//! c = [1.0, 2.0]
//!
//! [schedule]               # optional, every key has a default
//! c_alpha = 1.0
//! c_beta = 0.5
//! c_gamma = 2.0
//! tau_beta = 0.25
//! c_zero = 0.0
//! t_min_loglog = 16
//!
//! [noise]                  # optional
//! annealing = true
//! seed_root = 0
//! [noise.gradient]
//! kind = "none"            # none | uniform (bound) | truncated-gaussian (sigma, clip)
//!
//! [run]                    # optional
//! horizon = 1000
//! cadence = 1
//! mode = "sync"            # sync | message-passing
//! workers = 1
//! timeout_ms = 10000
//! [run.initial]
//! kind = "gaussian"        # explicit (values) | constant (value) | gaussian (scale, seed)
//! scale = 1.0
//! seed = 0
//! ```
//!
//! Unknown keys anywhere are errors.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{InitialCondition, NoiseModel, RunConfig, RunMode};
use crate::graph::{build_graph, TopologySpec};
use crate::problem::{builtin_problem, ProblemSpec};
use crate::schedule::WeightSchedule;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSpec {
    #[default]
    Sync,
    MessagePassing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "one")]
    pub cadence: u64,
    #[serde(default)]
    pub mode: ModeSpec,
    #[serde(default = "one_usize")]
    pub workers: usize,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_initial")]
    pub initial: InitialCondition,
}

fn default_horizon() -> u64 {
    1000
}

fn one() -> u64 {
    1
}

fn one_usize() -> usize {
    1
}

fn default_timeout_ms() -> u64 {
    10_000
}

fn default_initial() -> InitialCondition {
    InitialCondition::Gaussian { scale: 1.0, seed: 0 }
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            horizon: default_horizon(),
            cadence: 1,
            mode: ModeSpec::Sync,
            workers: 1,
            timeout_ms: default_timeout_ms(),
            initial: default_initial(),
        }
    }
}

/// The declarative form of a run, as read from and written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: TopologySpec,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub schedule: WeightSchedule,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub run: RunSection,
}

fn gate(gate: &str, e: Error) -> Error {
    Error::Validation {
        gate: gate.to_string(),
        message: e.to_string(),
    }
}

fn schedule_gate(e: &Error) -> &'static str {
    match e {
        Error::TauOutOfRange(_) => "schedule.tau_beta in (0, 1/2)",
        Error::GateViolation { .. } => "schedule: c_gamma^2 / c_alpha > c_zero",
        Error::NonPositiveConstant { .. } => "schedule: constants > 0",
        _ => "schedule",
    }
}

impl ExperimentConfig {
    /// Resolves the specs into a validated [`RunConfig`]. Failures are
    /// reported as [`Error::Validation`] naming the violated gate.
    pub fn build(&self) -> Result<RunConfig> {
        self.schedule.validate().map_err(|e| gate(schedule_gate(&e), e))?;
        self.noise.gradient.validate().map_err(|e| gate("noise.gradient", e))?;
        let graph = build_graph(&self.graph).map_err(|e| gate("graph: connected simple graph", e))?;
        let problem = builtin_problem(&self.problem).map_err(|e| gate("problem", e))?;
        if problem.n_agents() != graph.n_agents() {
            return Err(Error::Validation {
                gate: "problem.n_agents == graph.n_agents".into(),
                message: format!("problem has {} agents, graph has {}", problem.n_agents(), graph.n_agents()),
            });
        }
        let initial = self
            .run
            .initial
            .resolve(graph.n_agents(), problem.dim())
            .map_err(|e| gate("run.initial", e))?;
        let mode = match self.run.mode {
            ModeSpec::Sync => RunMode::Sync,
            ModeSpec::MessagePassing => RunMode::MessagePassing {
                workers: self.run.workers,
                timeout: Duration::from_millis(self.run.timeout_ms),
            },
        };
        let cfg = RunConfig::new(graph, problem, self.schedule, self.noise, self.run.horizon, initial)
            .map_err(|e| gate("run", e))?
            .with_mode(mode);
        let cfg = cfg.with_cadence(self.run.cadence).map_err(|e| gate("run.cadence", e))?;
        Ok(cfg)
    }

    /// Canonical TOML text.
    pub fn render(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidSpec(format!("cannot render config: {e}")))
    }

    /// SHA-256 of the canonical text, hex-encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.render()?.as_bytes())))
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.noise.seed_root = seed;
        c
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

/// Parses without validating the resulting run.
pub fn parse_unvalidated(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e: toml::de::Error| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })
}

/// Parses and fully validates a config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg = parse_unvalidated(text)?;
    cfg.build()?;
    Ok(cfg)
}
