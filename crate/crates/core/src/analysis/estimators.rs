//! Monte-Carlo estimators over independent runs.

use std::str::FromStr;

use serde::Serialize;

use super::gibbs::GibbsReference;
use crate::engine::SwarmState;
use crate::problem::{distance_to_set, norm, ProblemInstance};
use crate::{Error, Result};

/// Normal quantile used for 95% intervals.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `n` trials.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).clamp(0.0, p), (centre + half).clamp(p, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessEstimate {
    pub agent: usize,
    pub successes: usize,
    pub runs: usize,
    pub fraction: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

/// Per agent, the fraction of runs ending within `delta` of the minimizer set.
pub fn success_probability(finals: &[SwarmState], minima: &[Vec<f64>], delta: f64) -> Result<Vec<SuccessEstimate>> {
    if minima.is_empty() {
        return Err(Error::EmptyMinimaSet);
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidSpec(format!("delta = {delta} must be positive")));
    }
    let Some(first) = finals.first() else {
        return Err(Error::InvalidSpec("success probability needs at least one run".into()));
    };
    let n_agents = first.n_agents();
    if let Some(bad) = finals.iter().find(|s| s.n_agents() != n_agents) {
        return Err(Error::DimensionMismatch {
            expected: n_agents,
            got: bad.n_agents(),
        });
    }
    Ok((0..n_agents)
        .map(|agent| {
            let successes = finals
                .iter()
                .filter(|s| distance_to_set(s.block(agent), minima) <= delta)
                .count();
            let (wilson_low, wilson_high) = wilson_interval(successes, finals.len(), Z_95);
            SuccessEstimate {
                agent,
                successes,
                runs: finals.len(),
                fraction: successes as f64 / finals.len() as f64,
                wilson_low,
                wilson_high,
            }
        })
        .collect())
}

/// Bounded continuous test functions by registry name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFunction {
    /// `f ≡ 1`.
    One,
    /// `min(‖x‖, 1)`.
    ClampNorm,
    /// Mean of `cos x_i` over coordinates.
    Cos,
    /// `max(0, 1 − (dist(x, S)/0.5)²)`.
    NearMinima,
}

const NEAR_MINIMA_WIDTH: f64 = 0.5;

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" => Ok(Self::One),
            "clamp-norm" => Ok(Self::ClampNorm),
            "cos" => Ok(Self::Cos),
            "near-minima" => Ok(Self::NearMinima),
            other => Err(Error::UnknownTestFunction(other.to_string())),
        }
    }
}

impl TestFunction {
    pub const NAMES: [&'static str; 4] = ["one", "clamp-norm", "cos", "near-minima"];

    pub fn name(&self) -> &'static str {
        match self {
            Self::One => "one",
            Self::ClampNorm => "clamp-norm",
            Self::Cos => "cos",
            Self::NearMinima => "near-minima",
        }
    }

    /// Fails with [`Error::EmptyMinimaSet`] when `f` needs minimizers the
    /// problem does not declare.
    pub fn bind<'a>(&self, problem: &'a ProblemInstance) -> Result<impl Fn(&[f64]) -> f64 + 'a> {
        let minima = problem.known_minima();
        if *self == Self::NearMinima && minima.is_none() {
            return Err(Error::EmptyMinimaSet);
        }
        let f = *self;
        Ok(move |x: &[f64]| match f {
            Self::One => 1.0,
            Self::ClampNorm => norm(x).min(1.0),
            Self::Cos => x.iter().map(|v| v.cos()).sum::<f64>() / x.len() as f64,
            Self::NearMinima => {
                let r = distance_to_set(x, minima.expect("checked above")) / NEAR_MINIMA_WIDTH;
                (1.0 - r * r).max(0.0)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectationEstimate {
    pub agent: usize,
    pub function: TestFunction,
    pub monte_carlo: f64,
    pub std_error: f64,
    pub reference: f64,
    pub gap: f64,
}

/// Per agent, the Monte-Carlo mean of `f(x_n(T))` against `∫ f dπ^ε`.
pub fn expectation_estimate(
    finals: &[SwarmState],
    f: TestFunction,
    problem: &ProblemInstance,
    reference: &GibbsReference,
) -> Result<Vec<ExpectationEstimate>> {
    let Some(first) = finals.first() else {
        return Err(Error::InvalidSpec("expectation estimate needs at least one run".into()));
    };
    let func = f.bind(problem)?;
    let target = reference.integrate(&func);
    let runs = finals.len() as f64;
    Ok((0..first.n_agents())
        .map(|agent| {
            let vals: Vec<f64> = finals.iter().map(|s| func(s.block(agent))).collect();
            let mean = vals.iter().sum::<f64>() / runs;
            let var = if vals.len() > 1 {
                vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (runs - 1.0)
            } else {
                0.0
            };
            ExpectationEstimate {
                agent,
                function: f,
                monte_carlo: mean,
                std_error: (var / runs).sqrt(),
                reference: target,
                gap: (mean - target).abs(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::gibbs::{gibbs_reference, GridSpec};
    use crate::problem::builtin::{builtin_problem, DoubleWellParams, ProblemSpec};

    fn finals(xs: &[f64]) -> Vec<SwarmState> {
        xs.iter().map(|&x| SwarmState::new(10, 1, 1, vec![x]).unwrap()).collect()
    }

    #[test]
    fn success_examples() {
        let s = vec![vec![-1.0], vec![1.0]];
        let all = success_probability(&finals(&[1.0, -1.0, 1.0]), &s, 0.25).unwrap();
        assert_eq!(all[0].fraction, 1.0);
        let none = success_probability(&finals(&[0.0, 3.0]), &s, 0.25).unwrap();
        assert_eq!(none[0].fraction, 0.0);
        assert!(none[0].wilson_high > 0.0);
        assert!(matches!(success_probability(&finals(&[0.0]), &[], 0.25), Err(Error::EmptyMinimaSet)));
    }

    #[test]
    fn wilson_reference_values() {
        // 8 of 10 at z = 1.96: (0.4902, 0.9433).
        let (lo, hi) = wilson_interval(8, 10, Z_95);
        assert!((lo - 0.490_162).abs() < 1e-5, "{lo}");
        assert!((hi - 0.943_318).abs() < 1e-5, "{hi}");
        let (lo, hi) = wilson_interval(0, 20, Z_95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.2);
    }

    #[test]
    fn unknown_test_function() {
        assert!(matches!("sinc".parse::<TestFunction>(), Err(Error::UnknownTestFunction(_))));
        for name in TestFunction::NAMES {
            assert_eq!(name.parse::<TestFunction>().unwrap().name(), name);
        }
    }

    #[test]
    fn constant_function_has_zero_gap() {
        let p = builtin_problem(&ProblemSpec::SplitDoubleWell(DoubleWellParams { n: 1, a: None })).unwrap();
        let g = gibbs_reference(&p, 0.5, &GridSpec::default()).unwrap();
        let e = expectation_estimate(&finals(&[0.3, -2.0]), TestFunction::One, &p, &g).unwrap();
        assert!(e[0].gap < 1e-12);
        assert_eq!(e[0].std_error, 0.0);
    }

    #[test]
    fn near_minima_reference_concentrates() {
        let p = builtin_problem(&ProblemSpec::SplitDoubleWell(DoubleWellParams { n: 1, a: None })).unwrap();
        let g = gibbs_reference(&p, 0.1, &GridSpec::default()).unwrap();
        let f = TestFunction::NearMinima.bind(&p).unwrap();
        assert!(g.integrate(&f) > 0.95);
    }
}
