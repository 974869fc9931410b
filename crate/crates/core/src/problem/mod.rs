//! Local objectives `U_n`, the sum `U = Σ_n U_n`, and the stacked gradient
//! used by the engine.
//!
//! Objectives come either from the closed-form builtins in [`builtin`] or
//! from user callbacks through [`FnObjective`].

pub mod builtin;
pub mod checks;

use std::fmt;
use std::sync::Arc;

use crate::engine::SwarmState;
use crate::{Error, Result};

pub use builtin::{builtin_problem, ProblemSpec};

/// A smooth local objective on `R^d`. Implementations must be re-entrant and
/// side-effect free; the runtime evaluates them concurrently.
pub trait Objective: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes `∇U(x)` into `out` (length `dim`).
    fn gradient(&self, x: &[f64], out: &mut [f64]);

    /// Declared Lipschitz constant of the gradient, when one exists.
    fn declared_lipschitz(&self) -> Option<f64> {
        None
    }

    /// Declared radius beyond which `<x, ∇U(x)> >= 0`.
    fn declared_radial_radius(&self) -> Option<f64> {
        None
    }

    fn gradient_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient(x, &mut g);
        g
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Objective assembled from value and gradient callbacks.
#[derive(Clone)]
pub struct FnObjective {
    label: String,
    dim: usize,
    value: Arc<ValueFn>,
    gradient: Arc<GradientFn>,
    lipschitz: Option<f64>,
    radial_radius: Option<f64>,
}

impl FnObjective {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            lipschitz: None,
            radial_radius: None,
        }
    }

    pub fn with_lipschitz(mut self, k: f64) -> Self {
        self.lipschitz = Some(k);
        self
    }

    pub fn with_radial_radius(mut self, c1: f64) -> Self {
        self.radial_radius = Some(c1);
        self
    }
}

impl fmt::Debug for FnObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnObjective")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("lipschitz", &self.lipschitz)
            .field("radial_radius", &self.radial_radius)
            .finish()
    }
}

impl Objective for FnObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (self.gradient)(x, out)
    }

    fn declared_lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    fn declared_radial_radius(&self) -> Option<f64> {
        self.radial_radius
    }
}

/// Tolerance on the spread of `U` across the declared minima.
const MINIMA_VALUE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    locals: Vec<Arc<dyn Objective>>,
    dim: usize,
    known_minima: Option<Vec<Vec<f64>>>,
    offset: f64,
}

impl ProblemInstance {
    /// `known_minima`, when given, is the set of global minimizers of the
    /// sum; the reported objective is shifted so that its minimum is 0.
    pub fn new(
        locals: Vec<Arc<dyn Objective>>,
        known_minima: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let Some(first) = locals.first() else {
            return Err(Error::InvalidSpec("a problem needs at least one local objective".into()));
        };
        let dim = first.dim();
        if dim == 0 {
            return Err(Error::InvalidSpec("objective dimension must be positive".into()));
        }
        if let Some(bad) = locals.iter().find(|o| o.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.dim(),
            });
        }
        let mut p = Self {
            locals,
            dim,
            known_minima: None,
            offset: 0.0,
        };
        if let Some(minima) = known_minima {
            if minima.is_empty() {
                return Err(Error::EmptyMinimaSet);
            }
            let mut values = Vec::with_capacity(minima.len());
            for s in &minima {
                p.check_dim(s)?;
                values.push(p.raw_sum(s));
            }
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo > MINIMA_VALUE_TOL {
                return Err(Error::InvalidSpec(format!(
                    "declared minima have unequal objective values (spread {:e})",
                    hi - lo
                )));
            }
            p.offset = values[0];
            p.known_minima = Some(minima);
        }
        Ok(p)
    }

    pub fn n_agents(&self) -> usize {
        self.locals.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn local(&self, n: usize) -> &dyn Objective {
        self.locals[n].as_ref()
    }

    pub fn locals(&self) -> &[Arc<dyn Objective>] {
        &self.locals
    }

    pub fn known_minima(&self) -> Option<&[Vec<f64>]> {
        self.known_minima.as_deref()
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn raw_sum(&self, x: &[f64]) -> f64 {
        self.locals.iter().map(|o| o.value(x)).sum()
    }

    /// `Σ_n U_n(x)` minus the normalization offset.
    pub fn eval_sum(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.raw_sum(x) - self.offset)
    }

    pub fn grad_sum(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut total = vec![0.0; self.dim];
        let mut g = vec![0.0; self.dim];
        for o in &self.locals {
            o.gradient(x, &mut g);
            for (t, v) in total.iter_mut().zip(&g) {
                *t += v;
            }
        }
        Ok(total)
    }

    /// Block `n` of the result is `∇U_n(x_n)`.
    pub fn grad_stacked(&self, state: &SwarmState) -> Result<Vec<f64>> {
        if state.n_agents() != self.n_agents() {
            return Err(Error::DimensionMismatch {
                expected: self.n_agents(),
                got: state.n_agents(),
            });
        }
        if state.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: state.dim(),
            });
        }
        let mut out = vec![0.0; state.x().len()];
        for (n, block) in out.chunks_mut(self.dim).enumerate() {
            self.locals[n].gradient(state.block(n), block);
        }
        Ok(out)
    }

    /// Distance from `x` to the nearest declared minimizer.
    pub fn distance_to_minima(&self, x: &[f64]) -> Option<f64> {
        self.known_minima.as_ref().map(|s| distance_to_set(x, s))
    }
}

pub(crate) fn distance_to_set(x: &[f64], set: &[Vec<f64>]) -> f64 {
    set.iter()
        .map(|s| norm_diff(x, s))
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn norm_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::builtin::*;
    use super::*;

    fn quad(c: &[f64]) -> ProblemInstance {
        builtin_problem(&ProblemSpec::QuadraticFamily(QuadraticParams {
            c: c.to_vec(),
            dim: 1,
        }))
        .unwrap()
    }

    #[test]
    fn eval_sum_examples() {
        assert_eq!(quad(&[1.0, 2.0]).eval_sum(&[1.0]).unwrap(), 3.0);
        assert_eq!(quad(&[1.0]).eval_sum(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn grad_sum_examples() {
        assert_eq!(quad(&[1.0, 2.0]).grad_sum(&[1.0]).unwrap(), vec![6.0]);
        assert_eq!(quad(&[1.0]).grad_sum(&[2.0]).unwrap(), vec![4.0]);
    }

    #[test]
    fn grad_stacked_examples() {
        let p = quad(&[1.0, 2.0]);
        let s = SwarmState::new(1, 2, 1, vec![1.0, 1.0]).unwrap();
        assert_eq!(p.grad_stacked(&s).unwrap(), vec![2.0, 4.0]);
        let s = SwarmState::new(1, 2, 1, vec![3.0, 0.0]).unwrap();
        assert_eq!(p.grad_stacked(&s).unwrap(), vec![6.0, 0.0]);
        let s = SwarmState::new(1, 2, 1, vec![0.0, 0.0]).unwrap();
        assert_eq!(p.grad_stacked(&s).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = quad(&[1.0, 2.0]);
        assert!(matches!(
            p.eval_sum(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
        assert!(p.grad_sum(&[]).is_err());
        let s = SwarmState::new(1, 3, 1, vec![0.0; 3]).unwrap();
        assert!(p.grad_stacked(&s).is_err());
    }

    #[test]
    fn unequal_minima_are_rejected() {
        let o: Arc<dyn Objective> = Arc::new(FnObjective::new(
            "x2",
            1,
            |x| x[0] * x[0],
            |x, g| g[0] = 2.0 * x[0],
        ));
        let err = ProblemInstance::new(vec![o], Some(vec![vec![0.0], vec![1.0]])).unwrap_err();
        assert!(matches!(err, Error::InvalidSpec(_)));
    }

    #[test]
    fn offset_normalizes_minimum_to_zero() {
        let o: Arc<dyn Objective> = Arc::new(FnObjective::new(
            "x2+5",
            1,
            |x| x[0] * x[0] + 5.0,
            |x, g| g[0] = 2.0 * x[0],
        ));
        let p = ProblemInstance::new(vec![o], Some(vec![vec![0.0]])).unwrap();
        assert_eq!(p.offset(), 5.0);
        assert_eq!(p.eval_sum(&[0.0]).unwrap(), 0.0);
        assert_eq!(p.eval_sum(&[1.0]).unwrap(), 1.0);
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let a: Arc<dyn Objective> = Arc::new(FnObjective::new("a", 1, |_| 0.0, |_, _| {}));
        let b: Arc<dyn Objective> = Arc::new(FnObjective::new("b", 2, |_| 0.0, |_, _| {}));
        assert!(ProblemInstance::new(vec![a, b], None).is_err());
        assert!(ProblemInstance::new(vec![], None).is_err());
    }
}
