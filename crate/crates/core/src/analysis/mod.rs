//! Post-processing of recorded trajectories: consensus and growth
//! diagnostics, the Gibbs reference measure, and Monte-Carlo estimators.

pub mod estimators;
pub mod gibbs;

use std::fmt::Write as _;

use serde::Serialize;

use crate::engine::{SwarmState, Trajectory};
use crate::problem::{norm, ProblemInstance};
use crate::{Error, Result};

pub use estimators::{
    expectation_estimate, success_probability, wilson_interval, ExpectationEstimate, SuccessEstimate, TestFunction,
};
pub use gibbs::{gibbs_reference, GibbsReference, GridSpec};

/// `(1/N) Σ_n x_n`.
pub fn mean_state(state: &SwarmState) -> Vec<f64> {
    state.mean()
}

/// One value per recorded checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub t: Vec<u64>,
    pub values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl Diagnostic {
    pub fn value_at(&self, t: u64) -> Option<f64> {
        self.t.iter().position(|&s| s == t).map(|i| self.values[i])
    }
}

/// `t^τ · max_n ‖x_n(t) − x̄_t‖` per checkpoint. Exponents outside
/// `[0, 1/2 − τ_β)` are allowed but flagged in the returned warning.
pub fn consensus_diagnostic(traj: &Trajectory, tau: f64, tau_beta: f64) -> Result<Diagnostic> {
    if traj.records.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let warning = (!(0.0..0.5 - tau_beta).contains(&tau)).then(|| {
        let w = format!("tau = {tau} lies outside [0, {}) where consensus decay is guaranteed", 0.5 - tau_beta);
        log::warn!("{w}");
        w
    });
    let (t, values) = traj
        .records
        .iter()
        .map(|s| {
            let max = s.consensus_errors().into_iter().fold(0.0, f64::max);
            (s.t(), (s.t() as f64).powf(tau) * max)
        })
        .unzip();
    Ok(Diagnostic { t, values, warning })
}

/// Running maximum of `‖x_t‖ / t^η` over the checkpoints.
pub fn growth_diagnostic(traj: &Trajectory, eta: f64) -> Result<Diagnostic> {
    if !(eta > 0.5) {
        return Err(Error::InvalidSpec(format!("growth exponent eta = {eta} must exceed 1/2")));
    }
    if traj.records.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut running = f64::NEG_INFINITY;
    let (t, values) = traj
        .records
        .iter()
        .map(|s| {
            running = running.max(s.norm() / (s.t() as f64).powf(eta));
            (s.t(), running)
        })
        .unzip();
    Ok(Diagnostic { t, values, warning: None })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub t: u64,
    pub consensus_error: Vec<f64>,
    pub scaled_consensus: f64,
    pub growth_ratio: f64,
    /// Empty when the problem declares no minimizers.
    pub distance_to_minima: Vec<f64>,
    pub objective_at_mean: f64,
}

/// Per-checkpoint convergence table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    pub tau: f64,
    pub eta: f64,
    pub rows: Vec<SummaryRow>,
}

impl ConvergenceSummary {
    pub fn from_trajectory(traj: &Trajectory, problem: &ProblemInstance, tau: f64, eta: f64) -> Result<Self> {
        if traj.records.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        let mut rows = Vec::with_capacity(traj.records.len());
        for s in &traj.records {
            let errors = s.consensus_errors();
            let t = s.t() as f64;
            let max = errors.iter().copied().fold(0.0, f64::max);
            let distance_to_minima = s.blocks().filter_map(|b| problem.distance_to_minima(b)).collect();
            rows.push(SummaryRow {
                t: s.t(),
                consensus_error: errors,
                scaled_consensus: t.powf(tau) * max,
                growth_ratio: norm(s.x()) / t.powf(eta),
                distance_to_minima,
                objective_at_mean: problem.eval_sum(&s.mean())?,
            });
        }
        Ok(Self { tau, eta, rows })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        let Some(first) = self.rows.first() else {
            out.push('\n');
            return out;
        };
        for n in 0..first.consensus_error.len() {
            let _ = write!(out, ",consensus_error_{n}");
        }
        out.push_str(",scaled_consensus,growth_ratio");
        for n in 0..first.distance_to_minima.len() {
            let _ = write!(out, ",distance_to_minima_{n}");
        }
        out.push_str(",objective_at_mean\n");
        for r in &self.rows {
            let _ = write!(out, "{}", r.t);
            for v in &r.consensus_error {
                let _ = write!(out, ",{v}");
            }
            let _ = write!(out, ",{},{}", r.scaled_consensus, r.growth_ratio);
            for v in &r.distance_to_minima {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", r.objective_at_mean);
        }
        out
    }
}
