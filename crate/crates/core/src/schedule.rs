//! Decaying weights `alpha_t = c_alpha / t`, `beta_t = c_beta / t^tau_beta`
//! and `gamma_t = c_gamma / (sqrt(t) sqrt(log log t))`.
//!
//! The double logarithm is evaluated at `max(t, t_min_loglog)`, so the
//! formulas apply from `t = 1` without special-casing early rounds
//! (`log log t` is only positive past `e^e ≈ 15.15`).
//!
//! `c_zero` is the annealing gate `c_gamma² / c_alpha > c_zero` required for
//! convergence to global minima. Its value depends on the problem and is not
//! computed here; it defaults to 0, so callers wanting the guarantee must set
//! it (or simply choose `c_gamma` generously).

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_T_MIN_LOGLOG: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSchedule {
    pub c_alpha: f64,
    pub c_beta: f64,
    pub c_gamma: f64,
    pub tau_beta: f64,
    #[serde(default)]
    pub c_zero: f64,
    #[serde(default = "default_t_min")]
    pub t_min_loglog: u64,
}

fn default_t_min() -> u64 {
    DEFAULT_T_MIN_LOGLOG
}

impl Default for WeightSchedule {
    fn default() -> Self {
        Self {
            c_alpha: 1.0,
            c_beta: 0.5,
            c_gamma: 2.0,
            tau_beta: 0.25,
            c_zero: 0.0,
            t_min_loglog: DEFAULT_T_MIN_LOGLOG,
        }
    }
}

/// Weights in force at one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

fn check_time(t: u64) -> Result<()> {
    if t < 1 {
        Err(Error::InvalidTime(t))
    } else {
        Ok(())
    }
}

impl WeightSchedule {
    /// Checks every invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("c_alpha", self.c_alpha),
            ("c_beta", self.c_beta),
            ("c_gamma", self.c_gamma),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveConstant { name, value });
            }
        }
        if !(self.tau_beta > 0.0 && self.tau_beta < 0.5) {
            return Err(Error::TauOutOfRange(self.tau_beta));
        }
        if !self.c_zero.is_finite() {
            return Err(Error::InvalidSpec(format!("c_zero = {} must be finite", self.c_zero)));
        }
        let ratio = self.gate_ratio();
        if !(ratio > self.c_zero) {
            return Err(Error::GateViolation {
                ratio,
                c_zero: self.c_zero,
            });
        }
        if self.t_min_loglog < DEFAULT_T_MIN_LOGLOG {
            return Err(Error::InvalidSpec(format!(
                "t_min_loglog = {} must be at least {DEFAULT_T_MIN_LOGLOG}",
                self.t_min_loglog
            )));
        }
        Ok(())
    }

    /// `c_gamma² / c_alpha`.
    pub fn gate_ratio(&self) -> f64 {
        self.c_gamma * self.c_gamma / self.c_alpha
    }

    pub fn alpha(&self, t: u64) -> Result<f64> {
        check_time(t)?;
        Ok(self.c_alpha / t as f64)
    }

    pub fn beta(&self, t: u64) -> Result<f64> {
        check_time(t)?;
        Ok(self.c_beta / (t as f64).powf(self.tau_beta))
    }

    pub fn gamma(&self, t: u64) -> Result<f64> {
        check_time(t)?;
        let clamped = t.max(self.t_min_loglog) as f64;
        Ok(self.c_gamma / ((t as f64).sqrt() * clamped.ln().ln().sqrt()))
    }

    pub fn weights(&self, t: u64) -> Result<Weights> {
        Ok(Weights {
            alpha: self.alpha(t)?,
            beta: self.beta(t)?,
            gamma: self.gamma(t)?,
        })
    }
}
