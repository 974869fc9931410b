//! Closed-form objective families.
//!
//! * `quadratic-family`: `U_n(x) = c_n ‖x‖²`. With unequal `c_n` the
//!   gradient differences `∇U_n − ∇U` grow linearly in `‖x‖`, yet every
//!   local with `c_n > 0` is coercive and radially nondecreasing.
//! * `split-double-well` (d = 1): `U_n(x) = ((x² − 1)² + a_n x) / N` with
//!   `Σ a_n = 0`, so `U(x) = (x² − 1)²` and `S = {−1, +1}`.
//! * `multi-well-2d` (d = 2): `U_n(x) = Σ_i (x_i² − 1)² / N + b_n · x`, the
//!   tilts `b_n` coming in opposite pairs (`b_{2k+1} = −b_{2k}`, a trailing
//!   odd agent gets `0`). `U(x) = Σ_i (x_i² − 1)²` and `S = {(±1, ±1)}`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Objective, ProblemInstance};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "kebab-case")]
pub enum ProblemSpec {
    QuadraticFamily(QuadraticParams),
    SplitDoubleWell(DoubleWellParams),
    MultiWell2d(MultiWellParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticParams {
    pub c: Vec<f64>,
    #[serde(default = "one")]
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleWellParams {
    pub n: usize,
    /// Linear tilts; defaults to alternating `+1, −1` (trailing `0` for odd `n`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiWellParams {
    pub n: usize,
    #[serde(default = "default_tilt")]
    pub tilt: f64,
}

fn one() -> usize {
    1
}

fn default_tilt() -> f64 {
    0.5
}

impl ProblemSpec {
    pub fn n_agents(&self) -> usize {
        match self {
            ProblemSpec::QuadraticFamily(q) => q.c.len(),
            ProblemSpec::SplitDoubleWell(p) => p.n,
            ProblemSpec::MultiWell2d(p) => p.n,
        }
    }
}

/// `c ‖x‖²`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub c: f64,
    pub dim: usize,
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.c * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x) {
            *o = 2.0 * self.c * v;
        }
    }

    fn declared_lipschitz(&self) -> Option<f64> {
        Some(2.0 * self.c.abs())
    }

    fn declared_radial_radius(&self) -> Option<f64> {
        (self.c >= 0.0).then_some(0.0)
    }
}

/// `share · ((x² − 1)² + tilt · x)` on the real line.
#[derive(Debug, Clone)]
pub struct DoubleWellShare {
    pub share: f64,
    pub tilt: f64,
}

impl Objective for DoubleWellShare {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> f64 {
        let q = x[0] * x[0] - 1.0;
        self.share * (q * q + self.tilt * x[0])
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.share * (4.0 * x[0] * (x[0] * x[0] - 1.0) + self.tilt);
    }

    // 4|x|(x² − 1) >= |tilt| once |x| >= 1 + |tilt| / 4.
    fn declared_radial_radius(&self) -> Option<f64> {
        Some(1.0 + self.tilt.abs() / 4.0)
    }
}

/// `share · Σ_i (x_i² − 1)² + tilt · x` on the plane.
#[derive(Debug, Clone)]
pub struct MultiWellShare {
    pub share: f64,
    pub tilt: [f64; 2],
}

impl Objective for MultiWellShare {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &[f64]) -> f64 {
        let wells: f64 = x
            .iter()
            .map(|v| {
                let q = v * v - 1.0;
                q * q
            })
            .sum();
        self.share * wells + (self.tilt[0] * x[0] + self.tilt[1] * x[1])
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..2 {
            out[i] = self.share * (4.0 * x[i] * (x[i] * x[i] - 1.0)) + self.tilt[i];
        }
    }

    // <x, ∇> >= r (2 share r (r² − 2) − ‖b‖), positive for r >= √2 + ‖b‖ / (8 share).
    fn declared_radial_radius(&self) -> Option<f64> {
        let b = (self.tilt[0] * self.tilt[0] + self.tilt[1] * self.tilt[1]).sqrt();
        Some(std::f64::consts::SQRT_2 + b / (8.0 * self.share))
    }
}

fn default_tilts(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if n % 2 == 1 && i == n - 1 {
                0.0
            } else if i % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

pub fn builtin_problem(spec: &ProblemSpec) -> Result<ProblemInstance> {
    match spec {
        ProblemSpec::QuadraticFamily(q) => {
            if q.c.is_empty() {
                return Err(Error::InvalidSpec("quadratic-family needs at least one coefficient".into()));
            }
            if q.dim == 0 {
                return Err(Error::InvalidSpec("quadratic-family dim must be positive".into()));
            }
            if q.c.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidSpec("quadratic-family coefficients must be finite".into()));
            }
            let total: f64 = q.c.iter().sum();
            if total <= 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "quadratic-family needs sum(c) > 0 for a finite minimum, got {total}"
                )));
            }
            let locals = q
                .c
                .iter()
                .map(|&c| Arc::new(Quadratic { c, dim: q.dim }) as Arc<dyn Objective>)
                .collect();
            ProblemInstance::new(locals, Some(vec![vec![0.0; q.dim]]))
        }
        ProblemSpec::SplitDoubleWell(p) => {
            if p.n == 0 {
                return Err(Error::InvalidSpec("split-double-well needs n >= 1".into()));
            }
            let a = p.a.clone().unwrap_or_else(|| default_tilts(p.n));
            if a.len() != p.n {
                return Err(Error::InvalidSpec(format!(
                    "split-double-well: {} tilts for {} agents",
                    a.len(),
                    p.n
                )));
            }
            let sum: f64 = a.iter().sum();
            if sum.abs() > 1e-12 || a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "split-double-well tilts must be finite and sum to zero, sum = {sum}"
                )));
            }
            let share = 1.0 / p.n as f64;
            let locals = a
                .iter()
                .map(|&tilt| Arc::new(DoubleWellShare { share, tilt }) as Arc<dyn Objective>)
                .collect();
            ProblemInstance::new(locals, Some(vec![vec![-1.0], vec![1.0]]))
        }
        ProblemSpec::MultiWell2d(p) => {
            if p.n == 0 {
                return Err(Error::InvalidSpec("multi-well-2d needs n >= 1".into()));
            }
            if !p.tilt.is_finite() {
                return Err(Error::InvalidSpec("multi-well-2d tilt must be finite".into()));
            }
            let share = 1.0 / p.n as f64;
            let locals = (0..p.n)
                .map(|i| {
                    let tilt = if p.n % 2 == 1 && i == p.n - 1 {
                        [0.0, 0.0]
                    } else {
                        let angle = 0.7 + (i / 2) as f64;
                        let b = [p.tilt * angle.cos(), p.tilt * angle.sin()];
                        if i % 2 == 0 {
                            b
                        } else {
                            [-b[0], -b[1]]
                        }
                    };
                    Arc::new(MultiWellShare { share, tilt }) as Arc<dyn Objective>
                })
                .collect();
            let minima = [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)]
                .iter()
                .map(|&(a, b)| vec![a, b])
                .collect();
            ProblemInstance::new(locals, Some(minima))
        }
    }
}
