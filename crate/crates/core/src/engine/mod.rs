//! The consensus + annealing recursion.
//!
//! [`run`] drives it either synchronously ([`run_sync`]) or through the
//! message-passing agent runtime ([`runtime::spawn_runtime`]). Both call the
//! same per-agent update, [`agent_update`], with a fixed evaluation order:
//! consensus term over ascending neighbor ids, local gradient, gradient
//! noise, then annealing noise. Noise comes from streams keyed by agent and
//! round. For a given config and seed the two modes are bit-identical.

pub mod noise;
pub mod runtime;

use std::fmt::Write as _;
use std::time::Duration;

use rand_distr::StandardNormal;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{accumulate_disagreement, GraphTopology};
use crate::problem::{norm, Objective, ProblemInstance};
use crate::schedule::{WeightSchedule, Weights};
use crate::{Error, Result};

pub use noise::{derive_stream, GradientNoise, NoiseModel, Purpose};
pub use runtime::{spawn_runtime, RuntimeStats};

/// Stacked agent states at round `t`; block `n` is `x[n*dim..(n+1)*dim]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmState {
    t: u64,
    n_agents: usize,
    dim: usize,
    x: Vec<f64>,
}

impl SwarmState {
    pub fn new(t: u64, n_agents: usize, dim: usize, x: Vec<f64>) -> Result<Self> {
        if t < 1 {
            return Err(Error::InvalidTime(t));
        }
        if n_agents == 0 || dim == 0 {
            return Err(Error::InvalidSpec("state needs at least one agent and dimension".into()));
        }
        if x.len() != n_agents * dim {
            return Err(Error::DimensionMismatch {
                expected: n_agents * dim,
                got: x.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec(format!("state entry {i} is not finite")));
        }
        Ok(Self { t, n_agents, dim, x })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn block(&self, n: usize) -> &[f64] {
        &self.x[n * self.dim..(n + 1) * self.dim]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks(self.dim)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.x)
    }

    /// Network mean `(1/N) Σ_n x_n`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for b in self.blocks() {
            for (mi, v) in m.iter_mut().zip(b) {
                *mi += v;
            }
        }
        let n = self.n_agents as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// `‖x_n − x̄‖` for every agent.
    pub fn consensus_errors(&self) -> Vec<f64> {
        let m = self.mean();
        self.blocks().map(|b| crate::problem::norm_diff(b, &m)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    /// One vector per agent.
    Explicit { values: Vec<Vec<f64>> },
    /// Every agent starts at `value`.
    Constant { value: Vec<f64> },
    /// Independent `scale · N(0, I_d)` per agent.
    Gaussian { scale: f64, seed: u64 },
}

impl InitialCondition {
    pub fn resolve(&self, n_agents: usize, dim: usize) -> Result<Vec<f64>> {
        match self {
            InitialCondition::Explicit { values } => {
                if values.len() != n_agents {
                    return Err(Error::DimensionMismatch {
                        expected: n_agents,
                        got: values.len(),
                    });
                }
                let mut x = Vec::with_capacity(n_agents * dim);
                for v in values {
                    if v.len() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: v.len(),
                        });
                    }
                    x.extend_from_slice(v);
                }
                Ok(x)
            }
            InitialCondition::Constant { value } => {
                if value.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: value.len(),
                    });
                }
                Ok(value.repeat(n_agents))
            }
            &InitialCondition::Gaussian { scale, seed } => {
                if !(scale >= 0.0 && scale.is_finite()) {
                    return Err(Error::InvalidSpec(format!("initial scale {scale} must be finite and >= 0")));
                }
                let mut x = Vec::with_capacity(n_agents * dim);
                for n in 0..n_agents {
                    let mut rng = derive_stream(seed, Purpose::Initial, n as u32, 0);
                    for _ in 0..dim {
                        let z: f64 = rng.sample(StandardNormal);
                        x.push(scale * z);
                    }
                }
                Ok(x)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Sync,
    MessagePassing { workers: usize, timeout: Duration },
}

/// A fully resolved, validated run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub graph: GraphTopology,
    pub problem: ProblemInstance,
    pub schedule: WeightSchedule,
    pub noise: NoiseModel,
    /// Last round index `T`; the run performs `T − 1` steps from `t = 1`.
    pub horizon: u64,
    pub initial: Vec<f64>,
    pub cadence: u64,
    pub mode: RunMode,
    /// Identity of each agent's random streams (defaults to its id).
    pub stream_ids: Vec<u32>,
}

impl RunConfig {
    pub fn new(
        graph: GraphTopology,
        problem: ProblemInstance,
        schedule: WeightSchedule,
        noise: NoiseModel,
        horizon: u64,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let n = graph.n_agents();
        let cfg = Self {
            stream_ids: (0..n as u32).collect(),
            graph,
            problem,
            schedule,
            noise,
            horizon,
            initial,
            cadence: 1,
            mode: RunMode::Sync,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_cadence(mut self, cadence: u64) -> Result<Self> {
        self.cadence = cadence;
        self.validate()?;
        Ok(self)
    }

    pub fn with_mode(mut self, mode: RunMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.noise.gradient.validate()?;
        let n = self.graph.n_agents();
        if self.problem.n_agents() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.problem.n_agents(),
            });
        }
        if self.horizon < 1 {
            return Err(Error::InvalidSpec("horizon must be at least 1".into()));
        }
        if self.cadence < 1 {
            return Err(Error::InvalidSpec("record cadence must be at least 1".into()));
        }
        SwarmState::new(1, n, self.problem.dim(), self.initial.clone())?;
        if self.stream_ids.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.stream_ids.len(),
            });
        }
        let mut ids = self.stream_ids.clone();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != n {
            return Err(Error::InvalidSpec("stream ids must be distinct".into()));
        }
        if let RunMode::MessagePassing { workers, .. } = self.mode {
            if workers == 0 {
                return Err(Error::InvalidSpec("workers must be at least 1".into()));
            }
        }
        Ok(())
    }

    pub fn n_agents(&self) -> usize {
        self.graph.n_agents()
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn initial_state(&self) -> SwarmState {
        SwarmState {
            t: 1,
            n_agents: self.n_agents(),
            dim: self.dim(),
            x: self.initial.clone(),
        }
    }

    pub fn records_round(&self, t: u64) -> bool {
        t == 1 || t % self.cadence == 0 || t == self.horizon
    }

    pub(crate) fn dynamics(&self) -> Dynamics<'_> {
        Dynamics {
            problem: &self.problem,
            graph: &self.graph,
            noise: &self.noise,
            stream_ids: &self.stream_ids,
        }
    }

    /// Warning text when the first consensus step can overshoot.
    pub fn stability_warning(&self) -> Option<String> {
        let beta = self.schedule.beta(1).ok()?;
        let deg = self.graph.max_degree() as f64;
        (beta * deg >= 1.0).then(|| {
            format!(
                "beta_1 * max_degree = {} >= 1: the first consensus steps do not contract",
                beta * deg
            )
        })
    }
}

/// Per-record summary kept alongside the recorded states.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundMetrics {
    pub t: u64,
    pub norm: f64,
    pub max_consensus_error: f64,
}

impl RoundMetrics {
    pub fn of(state: &SwarmState) -> Self {
        Self {
            t: state.t,
            norm: state.norm(),
            max_consensus_error: state.consensus_errors().into_iter().fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n_agents: usize,
    pub dim: usize,
    pub records: Vec<SwarmState>,
    pub metrics: Vec<RoundMetrics>,
    pub warnings: Vec<String>,
}

impl Trajectory {
    fn new(cfg: &RunConfig) -> Self {
        Self {
            n_agents: cfg.n_agents(),
            dim: cfg.dim(),
            records: Vec::new(),
            metrics: Vec::new(),
            warnings: cfg.stability_warning().into_iter().collect(),
        }
    }

    fn push(&mut self, s: SwarmState) {
        self.metrics.push(RoundMetrics::of(&s));
        self.records.push(s);
    }

    pub fn last(&self) -> Option<&SwarmState> {
        self.records.last()
    }

    pub fn at(&self, t: u64) -> Option<&SwarmState> {
        self.records
            .binary_search_by_key(&t, |s| s.t)
            .ok()
            .map(|i| &self.records[i])
    }

    /// `t,agent,x_0..x_{d-1}`, one row per recorded agent state. Floats use
    /// the shortest decimal that parses back to the same value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,agent");
        for i in 0..self.dim {
            let _ = write!(out, ",x_{i}");
        }
        out.push('\n');
        for s in &self.records {
            for (n, b) in s.blocks().enumerate() {
                let _ = write!(out, "{},{}", s.t, n);
                for v in b {
                    let _ = write!(out, ",{v}");
                }
                out.push('\n');
            }
        }
        out
    }

    /// Parses [`Trajectory::to_csv`] output back into recorded states.
    /// Lines starting with `#` are skipped.
    pub fn parse_csv(text: &str) -> Result<Vec<SwarmState>> {
        let bad = |line: usize, msg: &str| Error::Parse {
            line,
            column: 1,
            message: msg.to_string(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.starts_with('#'));
        let (hl, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let dim = header.split(',').count().checked_sub(2).filter(|d| *d > 0).ok_or_else(|| bad(hl + 1, "bad header"))?;
        let mut rows: Vec<(u64, usize, Vec<f64>)> = Vec::new();
        for (i, line) in lines {
            let mut f = line.split(',');
            let t = f.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad(i + 1, "bad t"))?;
            let agent = f.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad(i + 1, "bad agent"))?;
            let x: Vec<f64> = f.map(|v| v.parse().map_err(|_| bad(i + 1, "bad float"))).collect::<Result<_>>()?;
            if x.len() != dim {
                return Err(bad(i + 1, "wrong column count"));
            }
            rows.push((t, agent, x));
        }
        let mut states = Vec::new();
        let mut i = 0;
        while i < rows.len() {
            let t = rows[i].0;
            let mut x = Vec::new();
            let mut n = 0;
            while i < rows.len() && rows[i].0 == t {
                if rows[i].1 != n {
                    return Err(bad(i + 2, "agents out of order"));
                }
                x.extend_from_slice(&rows[i].2);
                n += 1;
                i += 1;
            }
            states.push(SwarmState::new(t, n, dim, x)?);
        }
        Ok(states)
    }
}

/// Static inputs of one step.
#[derive(Debug, Clone, Copy)]
pub struct Dynamics<'a> {
    pub problem: &'a ProblemInstance,
    pub graph: &'a GraphTopology,
    pub noise: &'a NoiseModel,
    pub stream_ids: &'a [u32],
}

/// Scratch buffers for [`agent_update`].
#[derive(Debug, Clone)]
pub struct AgentScratch {
    cons: Vec<f64>,
    grad: Vec<f64>,
    xi: Vec<f64>,
    w: Vec<f64>,
}

impl AgentScratch {
    pub fn new(dim: usize) -> Self {
        Self {
            cons: vec![0.0; dim],
            grad: vec![0.0; dim],
            xi: vec![0.0; dim],
            w: vec![0.0; dim],
        }
    }
}

/// One agent's update from round `t` to `t + 1`:
/// `x_n − β Σ_l (x_n − x_l) − α (∇U_n(x_n) + ξ) + γ w`.
/// `neighbors` must yield neighbor blocks in ascending agent id.
#[allow(clippy::too_many_arguments)]
pub fn agent_update<'a>(
    own: &[f64],
    neighbors: impl Iterator<Item = &'a [f64]>,
    objective: &dyn Objective,
    weights: Weights,
    noise: &NoiseModel,
    stream_id: u32,
    t: u64,
    scratch: &mut AgentScratch,
    out: &mut [f64],
) {
    accumulate_disagreement(own, neighbors, &mut scratch.cons);
    objective.gradient(own, &mut scratch.grad);
    noise.gradient_noise(stream_id, t, &mut scratch.xi);
    if noise.annealing {
        noise.annealing_noise(stream_id, t, &mut scratch.w);
    } else {
        scratch.w.fill(0.0);
    }
    let Weights { alpha, beta, gamma } = weights;
    for i in 0..own.len() {
        out[i] = own[i] - beta * scratch.cons[i] - alpha * (scratch.grad[i] + scratch.xi[i]) + gamma * scratch.w[i];
    }
}

/// Advances every agent from `state.t` to `state.t + 1` with the given
/// weights. All agents read the round-`t` state.
pub fn step(state: &SwarmState, dynamics: &Dynamics<'_>, weights: Weights) -> Result<SwarmState> {
    let n_agents = dynamics.graph.n_agents();
    let dim = dynamics.problem.dim();
    if state.n_agents != n_agents || dynamics.problem.n_agents() != n_agents {
        return Err(Error::DimensionMismatch {
            expected: n_agents,
            got: state.n_agents,
        });
    }
    if state.dim != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: state.dim,
        });
    }
    let mut next = vec![0.0; state.x.len()];
    let mut scratch = AgentScratch::new(dim);
    for (n, out) in next.chunks_mut(dim).enumerate() {
        agent_update(
            state.block(n),
            dynamics.graph.neighbors(n).iter().map(|&l| state.block(l)),
            dynamics.problem.local(n),
            weights,
            dynamics.noise,
            dynamics.stream_ids[n],
            state.t,
            &mut scratch,
            out,
        );
    }
    let next = SwarmState {
        t: state.t + 1,
        n_agents,
        dim,
        x: next,
    };
    if let Some(agent) = first_non_finite(&next) {
        return Err(Error::NonFiniteState {
            round: next.t,
            agent,
            last_recorded: Box::new(state.clone()),
        });
    }
    Ok(next)
}

fn first_non_finite(s: &SwarmState) -> Option<usize> {
    s.blocks().position(|b| b.iter().any(|v| !v.is_finite()))
}

/// Runs the configured mode.
pub fn run(cfg: &RunConfig) -> Result<Trajectory> {
    match cfg.mode {
        RunMode::Sync => run_sync(cfg),
        RunMode::MessagePassing { workers, timeout } => Ok(spawn_runtime(cfg, workers, timeout)?.0),
    }
}

/// Single-threaded reference driver.
pub fn run_sync(cfg: &RunConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let mut traj = Trajectory::new(cfg);
    for w in &traj.warnings {
        log::warn!("{w}");
    }
    let dynamics = cfg.dynamics();
    let mut state = cfg.initial_state();
    traj.push(state.clone());
    for t in 1..cfg.horizon {
        let weights = cfg.schedule.weights(t)?;
        state = step(&state, &dynamics, weights).map_err(|e| match e {
            Error::NonFiniteState { round, agent, .. } => Error::NonFiniteState {
                round,
                agent,
                last_recorded: Box::new(traj.last().expect("initial state recorded").clone()),
            },
            other => other,
        })?;
        if cfg.records_round(state.t) {
            traj.push(state.clone());
        }
    }
    Ok(traj)
}
