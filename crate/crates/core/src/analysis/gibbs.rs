//! Grid approximation of `π^ε(dx) ∝ exp(−2U(x)/ε²) dx` for `d ≤ 2`.

use serde::{Deserialize, Serialize};

use crate::problem::ProblemInstance;
use crate::{Error, Result};

/// Boundary density must fall below this fraction of the peak.
pub const BOUNDARY_THRESHOLD: f64 = 1e-12;
const MAX_GROWTH_STEPS: usize = 60;
const GROWTH_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Box `[−h, h]^d`.
    pub half_width: f64,
    /// Defaults to 2001 for `d = 1` and 401 for `d = 2`.
    #[serde(default)]
    pub nodes: Option<usize>,
    /// Grow the box until the boundary criterion holds.
    #[serde(default = "yes")]
    pub auto_grow: bool,
}

fn yes() -> bool {
    true
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_width: 4.0,
            nodes: None,
            auto_grow: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsReference {
    pub epsilon: f64,
    pub axes: Vec<Vec<f64>>,
    /// Normalized density, row-major with the first axis outermost.
    pub values: Vec<f64>,
    /// `∫ exp(−2U/ε²)` by trapezoid quadrature.
    pub z_eps: f64,
    #[serde(skip)]
    potential: Vec<f64>,
    #[serde(skip)]
    weights: Vec<f64>,
}

fn trapezoid_weights(axis: &[f64]) -> Vec<f64> {
    let h = axis[1] - axis[0];
    let mut w = vec![h; axis.len()];
    w[0] = h / 2.0;
    *w.last_mut().expect("non-empty axis") = h / 2.0;
    w
}

impl GibbsReference {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coordinates of grid node `i`.
    pub fn point(&self, i: usize) -> Vec<f64> {
        match self.axes.len() {
            1 => vec![self.axes[0][i]],
            _ => {
                let m = self.axes[1].len();
                vec![self.axes[0][i / m], self.axes[1][i % m]]
            }
        }
    }

    /// `U` at grid node `i`.
    pub fn potential(&self, i: usize) -> f64 {
        self.potential[i]
    }

    /// Trapezoid approximation of `∫ f dπ^ε`.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        (0..self.len())
            .map(|i| self.weights[i] * self.values[i] * f(&self.point(i)))
            .sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    /// `π^ε({x : U(x) ≤ min U + κ})`, with `min U` taken over the grid.
    pub fn mass_near_minima(&self, kappa: f64) -> f64 {
        let lo = self.potential.iter().copied().fold(f64::INFINITY, f64::min);
        (0..self.len())
            .filter(|&i| self.potential[i] <= lo + kappa)
            .map(|i| self.weights[i] * self.values[i])
            .sum()
    }
}

struct Evaluated {
    axes: Vec<Vec<f64>>,
    potential: Vec<f64>,
    boundary_ratio: f64,
}

fn evaluate(p: &ProblemInstance, epsilon: f64, half_width: f64, nodes: usize) -> Result<Evaluated> {
    let d = p.dim();
    let axis: Vec<f64> = (0..nodes)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (nodes - 1) as f64)
        .collect();
    let axes = vec![axis; d];
    let mut potential = Vec::with_capacity(nodes.pow(d as u32));
    let mut boundary = Vec::new();
    let mut x = vec![0.0; d];
    for i in 0..nodes.pow(d as u32) {
        let (on_edge, _) = (0..d).rev().fold((false, i), |(edge, rest), k| {
            let j = rest % nodes;
            x[k] = axes[k][j];
            (edge || j == 0 || j == nodes - 1, rest / nodes)
        });
        let u = p.eval_sum(&x)?;
        if on_edge {
            boundary.push(u);
        }
        potential.push(u);
    }
    let scale = 2.0 / (epsilon * epsilon);
    let u_min = potential.iter().copied().fold(f64::INFINITY, f64::min);
    let b_min = boundary.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Evaluated {
        axes,
        potential,
        boundary_ratio: (-scale * (b_min - u_min)).exp(),
    })
}

/// Builds the normalized grid density of `π^ε` for `p`.
pub fn gibbs_reference(p: &ProblemInstance, epsilon: f64, grid: &GridSpec) -> Result<GibbsReference> {
    let d = p.dim();
    if d > 2 {
        return Err(Error::DimensionTooLarge(d));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidSpec(format!("epsilon = {epsilon} must be positive")));
    }
    if !(grid.half_width > 0.0 && grid.half_width.is_finite()) {
        return Err(Error::InvalidSpec(format!("grid half width {} must be positive", grid.half_width)));
    }
    let nodes = grid.nodes.unwrap_or(if d == 1 { 2001 } else { 401 });
    if nodes < 3 {
        return Err(Error::InvalidSpec("grid needs at least 3 nodes per axis".into()));
    }
    let mut half_width = grid.half_width;
    let mut ev = evaluate(p, epsilon, half_width, nodes)?;
    let mut steps = 0;
    while !(ev.boundary_ratio < BOUNDARY_THRESHOLD) {
        if !grid.auto_grow || steps == MAX_GROWTH_STEPS {
            return Err(Error::BoxTooSmall {
                ratio: ev.boundary_ratio,
                threshold: BOUNDARY_THRESHOLD,
            });
        }
        half_width *= GROWTH_FACTOR;
        steps += 1;
        ev = evaluate(p, epsilon, half_width, nodes)?;
    }
    let scale = 2.0 / (epsilon * epsilon);
    let u_min = ev.potential.iter().copied().fold(f64::INFINITY, f64::min);
    let unnormalized: Vec<f64> = ev.potential.iter().map(|u| (-scale * (u - u_min)).exp()).collect();
    let w1: Vec<Vec<f64>> = ev.axes.iter().map(|a| trapezoid_weights(a)).collect();
    let weights: Vec<f64> = match d {
        1 => w1[0].clone(),
        _ => w1[0].iter().flat_map(|a| w1[1].iter().map(move |b| a * b)).collect(),
    };
    let z_shifted: f64 = unnormalized.iter().zip(&weights).map(|(v, w)| v * w).sum();
    let values = unnormalized.iter().map(|v| v / z_shifted).collect();
    Ok(GibbsReference {
        epsilon,
        axes: ev.axes,
        values,
        z_eps: z_shifted * (-scale * u_min).exp(),
        potential: ev.potential,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::builtin::{builtin_problem, DoubleWellParams, ProblemSpec, QuadraticParams};

    fn quad(dim: usize) -> ProblemInstance {
        builtin_problem(&ProblemSpec::QuadraticFamily(QuadraticParams { c: vec![1.0], dim })).unwrap()
    }

    #[test]
    fn gaussian_peak_density() {
        let g = gibbs_reference(&quad(1), 1.0, &GridSpec::default()).unwrap();
        let centre = g.values[g.len() / 2];
        assert!((centre - 2.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-6);
        assert!((g.total_mass() - 1.0).abs() < 1e-9);
        let var = g.integrate(|x| x[0] * x[0]);
        assert!((var - 0.25).abs() < 1e-6);
    }

    #[test]
    fn two_dimensional_grid_normalizes() {
        let g = gibbs_reference(&quad(2), 0.5, &GridSpec::default()).unwrap();
        assert_eq!(g.len(), 401 * 401);
        assert!((g.total_mass() - 1.0).abs() < 1e-9);
        assert!((g.integrate(|x| x[1] * x[1]) - 0.0625).abs() < 1e-6);
    }

    #[test]
    fn dimension_three_is_rejected() {
        assert!(matches!(gibbs_reference(&quad(3), 1.0, &GridSpec::default()), Err(Error::DimensionTooLarge(3))));
    }

    #[test]
    fn box_grows_or_fails() {
        let g = gibbs_reference(&quad(1), 3.0, &GridSpec::default()).unwrap();
        assert!(g.axes[0][0] < -4.0);
        let fixed = GridSpec { auto_grow: false, ..GridSpec::default() };
        assert!(matches!(gibbs_reference(&quad(1), 3.0, &fixed), Err(Error::BoxTooSmall { .. })));
    }

    #[test]
    fn double_well_modes_are_symmetric() {
        let p = builtin_problem(&ProblemSpec::SplitDoubleWell(DoubleWellParams { n: 2, a: None })).unwrap();
        let g = gibbs_reference(&p, 0.3, &GridSpec::default()).unwrap();
        let right = g.integrate(|x| if x[0] > 0.0 { 1.0 } else { 0.0 });
        let left = g.integrate(|x| if x[0] < 0.0 { 1.0 } else { 0.0 });
        assert!((right - left).abs() < 1e-3);
    }
}
