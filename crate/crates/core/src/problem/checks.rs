//! Sampling-based validators for the structural conditions on the local
//! objectives and their sum.
//!
//! Asymptotic conditions (`liminf`/`limsup` as `‖x‖ → ∞`) are only
//! spot-checked on finite radius ladders. Each check reports `pass`, `fail`
//! or `inconclusive`; a failure always carries a witness point together with
//! both sides of the violated inequality.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{dot, norm, norm_diff, Objective, ProblemInstance};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub point: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other_point: Option<Vec<f64>>,
    /// The inequality that should have held, as `lhs <op> rhs`.
    pub inequality: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agent: Option<usize>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckOutcome {
    pub fn new(id: impl Into<String>, status: Status) -> Self {
        Self {
            id: id.into(),
            agent: None,
            status,
            estimate: None,
            witness: None,
            note: None,
        }
    }

    pub fn for_agent(mut self, agent: usize) -> Self {
        self.agent = Some(agent);
        self
    }

    pub fn with_estimate(mut self, v: f64) -> Self {
        self.estimate = Some(v);
        self
    }

    pub fn with_witness(mut self, w: Witness) -> Self {
        self.witness = Some(w);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

pub fn c_of_d(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidSpec("dimension must be at least 1".into()));
    }
    let d = d as f64;
    Ok(((4.0 * d - 4.0) / (4.0 * d - 3.0)).sqrt())
}

/// Unit directions: `±e_i` first, then `extra` Gaussian-normalized ones.
fn directions(dim: usize, extra: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * dim + extra);
    for i in 0..dim {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[i] = sign;
            out.push(e);
        }
    }
    while out.len() < 2 * dim + extra {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            out.push(v.into_iter().map(|c| c / n).collect());
        }
    }
    out
}

fn scaled(u: &[f64], r: f64) -> Vec<f64> {
    u.iter().map(|v| v * r).collect()
}

fn uniform_in_ball(dim: usize, radius: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
            return v.into_iter().map(|c| c * r / n).collect();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzSampler {
    pub radius: f64,
    pub count: usize,
    pub seed: u64,
}

/// Estimates `K̂ = max ‖∇U(x) − ∇U(x′)‖ / ‖x − x′‖` over all pairs of
/// sampled points plus one nearby perturbation of each point.
pub fn check_lipschitz(obj: &dyn Objective, sampler: &LipschitzSampler) -> CheckOutcome {
    const ID: &str = "lipschitz-gradient";
    if sampler.count < 2 || !(sampler.radius > 0.0) {
        return CheckOutcome::new(ID, Status::Inconclusive).with_note("degenerate sampler");
    }
    let dim = obj.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let mut pts: Vec<Vec<f64>> = (0..sampler.count)
        .map(|_| uniform_in_ball(dim, sampler.radius, &mut rng))
        .collect();
    let h = 1e-4 * sampler.radius.max(1.0);
    let dirs = directions(dim, sampler.count, &mut rng);
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..sampler.count {
        let near: Vec<f64> = pts[i]
            .iter()
            .zip(&dirs[2 * dim + i])
            .map(|(x, u)| x + h * u)
            .collect();
        pts.push(near);
        pairs.push((i, sampler.count + i));
        for j in (i + 1)..sampler.count {
            pairs.push((i, j));
        }
    }
    let grads: Vec<Vec<f64>> = pts.iter().map(|p| obj.gradient_vec(p)).collect();

    let mut best: Option<(f64, usize, usize)> = None;
    for (i, j) in pairs {
        let dx = norm_diff(&pts[i], &pts[j]);
        if dx <= 0.0 {
            continue;
        }
        let ratio = norm_diff(&grads[i], &grads[j]) / dx;
        if best.is_none_or(|(b, _, _)| ratio > b) {
            best = Some((ratio, i, j));
        }
    }
    let Some((k_hat, i, j)) = best else {
        return CheckOutcome::new(ID, Status::Inconclusive).with_note("all sampled points coincide");
    };
    let Some(k) = obj.declared_lipschitz() else {
        return CheckOutcome::new(ID, Status::Inconclusive)
            .with_estimate(k_hat)
            .with_note("no Lipschitz constant declared");
    };
    if k_hat > k * (1.0 + 1e-6) {
        let dx = norm_diff(&pts[i], &pts[j]);
        CheckOutcome::new(ID, Status::Fail)
            .with_estimate(k_hat)
            .with_witness(Witness {
                point: pts[i].clone(),
                other_point: Some(pts[j].clone()),
                inequality: "|grad U(x) - grad U(x')| <= K |x - x'|".into(),
                lhs: norm_diff(&grads[i], &grads[j]),
                rhs: k * dx,
            })
    } else {
        CheckOutcome::new(ID, Status::Pass).with_estimate(k_hat)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellSampler {
    pub radii: Vec<f64>,
    pub samples_per_shell: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialCheck {
    /// `<x, ∇U(x)> >= 0` on every sampled shell point.
    pub radial: CheckOutcome,
    /// `U` strictly increases along every sampled ray between consecutive radii.
    pub coercive: CheckOutcome,
}

impl RadialCheck {
    pub fn status(&self) -> Status {
        match (self.radial.status, self.coercive.status) {
            (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
            (Status::Pass, Status::Pass) => Status::Pass,
            _ => Status::Inconclusive,
        }
    }
}

const RADIAL_SLACK: f64 = 1e-12;

pub fn check_radial(obj: &dyn Objective, c1: f64, shells: &ShellSampler) -> Result<RadialCheck> {
    if shells.radii.is_empty() {
        return Err(Error::InvalidSpec("radial check needs at least one radius".into()));
    }
    if let Some(r) = shells.radii.iter().find(|r| !(**r >= c1)) {
        return Err(Error::InvalidSpec(format!("radius {r} is below C1 = {c1}")));
    }
    let mut radii = shells.radii.clone();
    radii.sort_by(f64::total_cmp);
    let mut rng = ChaCha8Rng::seed_from_u64(shells.seed);
    let dirs = directions(obj.dim(), shells.samples_per_shell, &mut rng);

    let mut worst: Option<(f64, Vec<f64>)> = None;
    let mut coercive_witness: Option<Witness> = None;
    for u in &dirs {
        let mut prev: Option<(Vec<f64>, f64)> = None;
        for &r in &radii {
            let x = scaled(u, r);
            let ip = dot(&x, &obj.gradient_vec(&x));
            if worst.as_ref().is_none_or(|(w, _)| ip < *w) {
                worst = Some((ip, x.clone()));
            }
            let v = obj.value(&x);
            if let Some((px, pv)) = &prev {
                if coercive_witness.is_none() && !(v > *pv) {
                    coercive_witness = Some(Witness {
                        point: x.clone(),
                        other_point: Some(px.clone()),
                        inequality: "U(x_outer) > U(x_inner) along a ray".into(),
                        lhs: v,
                        rhs: *pv,
                    });
                }
            }
            prev = Some((x, v));
        }
    }

    let (min_ip, at) = worst.expect("at least one direction");
    let radial = if min_ip >= -RADIAL_SLACK {
        CheckOutcome::new("coercive-radial", Status::Pass).with_estimate(min_ip)
    } else {
        CheckOutcome::new("coercive-radial", Status::Fail)
            .with_estimate(min_ip)
            .with_witness(Witness {
                point: at,
                other_point: None,
                inequality: "<x, grad U(x)> >= 0".into(),
                lhs: min_ip,
                rhs: 0.0,
            })
    };
    let coercive = match coercive_witness {
        Some(w) => CheckOutcome::new("coercive", Status::Fail).with_witness(w),
        None if radii.len() < 2 => {
            CheckOutcome::new("coercive", Status::Inconclusive).with_note("needs two radii")
        }
        None => CheckOutcome::new("coercive", Status::Pass),
    };
    Ok(RadialCheck { radial, coercive })
}

/// Largest radius on a uniform scan of `[0, max_radius]` where some sampled
/// direction has `<x, ∇U(x)> < 0`; 0 when none does.
pub fn estimate_radial_radius(obj: &dyn Objective, max_radius: f64, samples: usize, seed: u64) -> f64 {
    const STEPS: usize = 400;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs = directions(obj.dim(), samples, &mut rng);
    let mut c1: f64 = 0.0;
    for k in 1..=STEPS {
        let r = max_radius * k as f64 / STEPS as f64;
        for u in &dirs {
            let x = scaled(u, r);
            if dot(&x, &obj.gradient_vec(&x)) < -RADIAL_SLACK {
                c1 = c1.max(r);
            }
        }
    }
    c1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dissimilarity {
    Bounded,
    UnboundedTrend,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissimilarityReport {
    pub classification: Dissimilarity,
    /// Least-squares slope of `log M(r)` against `log r`.
    pub slope: f64,
    pub radii: Vec<f64>,
    /// `M(r) = max over shell samples and agents of ‖∇U_n − ∇U‖`.
    pub max_gap: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

pub const DISSIMILARITY_SLOPE_THRESHOLD: f64 = 0.1;

fn check_ladder(radii: &[f64], min_len: usize) -> Result<()> {
    if radii.len() < min_len {
        return Err(Error::InvalidSpec(format!("radius ladder needs at least {min_len} radii")));
    }
    if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSpec("radius ladder must be positive and strictly increasing".into()));
    }
    Ok(())
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn check_dissimilarity(p: &ProblemInstance, shells: &ShellSampler) -> Result<DissimilarityReport> {
    check_ladder(&shells.radii, 3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(shells.seed);
    let dirs = directions(p.dim(), shells.samples_per_shell, &mut rng);
    let mut max_gap = Vec::with_capacity(shells.radii.len());
    let mut witness = None;
    let mut g_n = vec![0.0; p.dim()];
    for &r in &shells.radii {
        let mut m: f64 = 0.0;
        for u in &dirs {
            let x = scaled(u, r);
            let g = p.grad_sum(&x)?;
            for (n, o) in p.locals().iter().enumerate() {
                o.gradient(&x, &mut g_n);
                let gap = norm_diff(&g_n, &g);
                if gap > m {
                    m = gap;
                    witness = Some((x.clone(), gap, n));
                }
            }
        }
        max_gap.push(m);
    }
    let tiny = 1e-12;
    let (classification, slope) = if max_gap.iter().all(|m| *m <= tiny) {
        (Dissimilarity::Bounded, 0.0)
    } else {
        let slope = loglog_slope(&shells.radii, &max_gap);
        if slope > DISSIMILARITY_SLOPE_THRESHOLD {
            (Dissimilarity::UnboundedTrend, slope)
        } else {
            (Dissimilarity::Bounded, slope)
        }
    };
    let witness = match classification {
        Dissimilarity::UnboundedTrend => witness.map(|(x, gap, n)| Witness {
            point: x,
            other_point: None,
            inequality: format!("|grad U_{n}(x) - grad U(x)| bounded (gap at outer shell)"),
            lhs: gap,
            rhs: max_gap[0],
        }),
        Dissimilarity::Bounded => None,
    };
    Ok(DissimilarityReport {
        classification,
        slope,
        radii: shells.radii.clone(),
        max_gap,
        witness,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trend {
    Constant,
    Increasing,
    Decreasing,
    Mixed,
}

fn trend(v: &[f64]) -> Trend {
    let scale = v.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
    let tol = 1e-9 * scale;
    let up = v.windows(2).all(|w| w[1] >= w[0] - tol);
    let down = v.windows(2).all(|w| w[1] <= w[0] + tol);
    match (up, down) {
        (true, true) => Trend::Constant,
        (true, false) => Trend::Increasing,
        (false, true) => Trend::Decreasing,
        (false, false) => Trend::Mixed,
    }
}

/// Central-difference Hessian trace using the analytic gradient.
pub fn laplacian_fd(obj: &dyn Objective, x: &[f64], h: f64) -> f64 {
    let mut xp = x.to_vec();
    let mut gp = vec![0.0; x.len()];
    let mut gm = vec![0.0; x.len()];
    let mut trace = 0.0;
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        obj.gradient(&xp, &mut gp);
        xp[i] = x[i] - h;
        obj.gradient(&xp, &mut gm);
        xp[i] = x[i];
        trace += (gp[i] - gm[i]) / (2.0 * h);
    }
    trace
}

/// Gradient hook so sum-level checks can reuse [`laplacian_fd`].
#[derive(Debug)]
struct SumObjective<'a>(&'a ProblemInstance);

impl Objective for SumObjective<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.0.eval_sum(x).expect("dimension checked by caller")
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.0.grad_sum(x).expect("dimension checked by caller"));
    }
}

pub const HESSIAN_STEP: f64 = 1e-4;

/// Shell-based spot checks of the sum-level growth and alignment conditions:
/// `inf (|∇U|² − ΔU) > −∞`, the directional cosine against `C(d)`, and the
/// `‖∇U‖ / ‖x‖` lower and upper growth bounds.
pub fn check_gm_conditions(p: &ProblemInstance, shells: &ShellSampler) -> Result<Vec<CheckOutcome>> {
    check_ladder(&shells.radii, 2)?;
    let sum = SumObjective(p);
    let d = p.dim();
    let cd = c_of_d(d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(shells.seed);
    let dirs = directions(d, shells.samples_per_shell, &mut rng);

    struct Shell {
        energy_min: (f64, Vec<f64>),
        cos_min: (f64, Vec<f64>),
        ratio_min: (f64, Vec<f64>),
        ratio_max: (f64, Vec<f64>),
    }
    let mut rows = Vec::new();
    for &r in &shells.radii {
        let mut s = Shell {
            energy_min: (f64::INFINITY, vec![]),
            cos_min: (f64::INFINITY, vec![]),
            ratio_min: (f64::INFINITY, vec![]),
            ratio_max: (f64::NEG_INFINITY, vec![]),
        };
        for u in &dirs {
            let x = scaled(u, r);
            let g = sum.gradient_vec(&x);
            let gn = norm(&g);
            let energy = gn * gn - laplacian_fd(&sum, &x, HESSIAN_STEP);
            let cos = if gn > 0.0 { dot(&g, &x) / (gn * r) } else { 0.0 };
            let ratio = gn / r;
            if energy < s.energy_min.0 {
                s.energy_min = (energy, x.clone());
            }
            if cos < s.cos_min.0 {
                s.cos_min = (cos, x.clone());
            }
            if ratio < s.ratio_min.0 {
                s.ratio_min = (ratio, x.clone());
            }
            if ratio > s.ratio_max.0 {
                s.ratio_max = (ratio, x.clone());
            }
        }
        rows.push(s);
    }
    let last = rows.last().expect("ladder checked");
    let mut out = Vec::new();

    let energy: Vec<f64> = rows.iter().map(|s| s.energy_min.0).collect();
    let global_min = rows
        .iter()
        .map(|s| &s.energy_min)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("nonempty");
    out.push(match trend(&energy) {
        Trend::Constant | Trend::Increasing => {
            CheckOutcome::new("gradient-laplacian-lower-bound", Status::Pass).with_estimate(global_min.0)
        }
        Trend::Decreasing => CheckOutcome::new("gradient-laplacian-lower-bound", Status::Fail)
            .with_estimate(global_min.0)
            .with_witness(Witness {
                point: last.energy_min.1.clone(),
                other_point: None,
                inequality: "|grad U|^2 - lap U stays bounded below (outer shell vs inner shell)".into(),
                lhs: last.energy_min.0,
                rhs: energy[0],
            }),
        Trend::Mixed => CheckOutcome::new("gradient-laplacian-lower-bound", Status::Inconclusive)
            .with_estimate(global_min.0)
            .with_note("shell minima are non-monotone"),
    });

    let cosines: Vec<f64> = rows.iter().map(|s| s.cos_min.0).collect();
    let c_last = last.cos_min.0;
    let cos_witness = || Witness {
        point: last.cos_min.1.clone(),
        other_point: None,
        inequality: format!("<grad U/|grad U|, x/|x|> >= C({d})"),
        lhs: c_last,
        rhs: cd,
    };
    out.push(match (trend(&cosines), c_last >= cd - 1e-12) {
        (Trend::Constant | Trend::Increasing, true) => {
            CheckOutcome::new("radial-alignment", Status::Pass).with_estimate(c_last)
        }
        (Trend::Constant | Trend::Decreasing, false) => CheckOutcome::new("radial-alignment", Status::Fail)
            .with_estimate(c_last)
            .with_witness(cos_witness()),
        _ => CheckOutcome::new("radial-alignment", Status::Inconclusive)
            .with_estimate(c_last)
            .with_note("shell cosines are non-monotone"),
    });

    let lower: Vec<f64> = rows.iter().map(|s| s.ratio_min.0).collect();
    let upper: Vec<f64> = rows.iter().map(|s| s.ratio_max.0).collect();
    out.push(growth_outcome(
        "gradient-growth-lower",
        &shells.radii,
        &lower,
        &last.ratio_min,
        true,
    ));
    out.push(growth_outcome(
        "gradient-growth-upper",
        &shells.radii,
        &upper,
        &last.ratio_max,
        false,
    ));
    Ok(out)
}

fn growth_outcome(
    id: &str,
    radii: &[f64],
    ratios: &[f64],
    last: &(f64, Vec<f64>),
    lower: bool,
) -> CheckOutcome {
    let witness = |inequality: &str| Witness {
        point: last.1.clone(),
        other_point: None,
        inequality: inequality.into(),
        lhs: last.0,
        rhs: ratios[0],
    };
    if lower && last.0 <= 0.0 {
        return CheckOutcome::new(id, Status::Fail)
            .with_estimate(last.0)
            .with_witness(witness("|grad U(x)| / |x| > 0"));
    }
    if trend(ratios) == Trend::Mixed {
        return CheckOutcome::new(id, Status::Inconclusive)
            .with_estimate(last.0)
            .with_note("shell ratios are non-monotone");
    }
    let slope = loglog_slope(radii, ratios);
    let violated = if lower {
        slope < -DISSIMILARITY_SLOPE_THRESHOLD
    } else {
        slope > DISSIMILARITY_SLOPE_THRESHOLD
    };
    if violated {
        let ineq = if lower {
            "|grad U(x)| / |x| bounded away from 0 (decaying power trend)"
        } else {
            "|grad U(x)| / |x| bounded above (growing power trend)"
        };
        CheckOutcome::new(id, Status::Fail)
            .with_estimate(last.0)
            .with_witness(witness(ineq))
            .with_note(format!("log-log slope {slope:.3}"))
    } else {
        CheckOutcome::new(id, Status::Pass).with_estimate(last.0)
    }
}

/// Settings for [`assess_problem`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckPlan {
    pub lipschitz: LipschitzSampler,
    pub ladder: Vec<f64>,
    pub samples_per_shell: usize,
    pub seed: u64,
}

impl Default for CheckPlan {
    fn default() -> Self {
        Self {
            lipschitz: LipschitzSampler {
                radius: 10.0,
                count: 200,
                seed: 0,
            },
            ladder: vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0],
            samples_per_shell: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<CheckOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dissimilarity: Option<DissimilarityReport>,
}

impl AssumptionReport {
    pub fn find(&self, id: &str) -> Vec<&CheckOutcome> {
        self.checks.iter().filter(|c| c.id == id).collect()
    }

    /// Worst status among checks with this id (fail > inconclusive > pass).
    pub fn status(&self, id: &str) -> Option<Status> {
        let found = self.find(id);
        if found.is_empty() {
            return None;
        }
        Some(if found.iter().any(|c| c.status == Status::Fail) {
            Status::Fail
        } else if found.iter().any(|c| c.status == Status::Inconclusive) {
            Status::Inconclusive
        } else {
            Status::Pass
        })
    }
}

/// Runs every objective-level check: per-agent Lipschitz, radial and
/// coercivity checks, the minimum normalization, the sum-level conditions
/// and gradient dissimilarity.
pub fn assess_problem(p: &ProblemInstance, plan: &CheckPlan) -> Result<AssumptionReport> {
    let mut checks = Vec::new();
    let outer = *plan.ladder.last().unwrap_or(&10.0);
    for (n, o) in p.locals().iter().enumerate() {
        let o = o.as_ref();
        checks.push(check_lipschitz(o, &plan.lipschitz).for_agent(n));

        let c1_hat = estimate_radial_radius(o, outer, plan.samples_per_shell, plan.seed);
        let c1 = o.declared_radial_radius().unwrap_or(c1_hat);
        let mut radii: Vec<f64> = plan.ladder.iter().copied().filter(|r| *r > c1).collect();
        radii.insert(0, c1.max(1e-3));
        let rc = check_radial(
            o,
            c1,
            &ShellSampler {
                radii,
                samples_per_shell: plan.samples_per_shell,
                seed: plan.seed,
            },
        )?;
        let note = match o.declared_radial_radius() {
            Some(c) => format!("declared C1 = {c}, sampled C1 estimate = {c1_hat}"),
            None => format!("no C1 declared, using sampled estimate {c1_hat}"),
        };
        checks.push(rc.radial.for_agent(n).with_note(note));
        checks.push(rc.coercive.for_agent(n));
    }

    checks.push(match p.known_minima() {
        Some(s) => CheckOutcome::new("min-value-zero", Status::Pass)
            .with_estimate(p.offset())
            .with_note(format!("normalized by offset at {} declared minimizer(s)", s.len())),
        None => CheckOutcome::new("min-value-zero", Status::Inconclusive)
            .with_note("no minimizers declared; minimum value unknown"),
    });

    checks.extend(check_gm_conditions(
        p,
        &ShellSampler {
            radii: plan.ladder.clone(),
            samples_per_shell: plan.samples_per_shell,
            seed: plan.seed,
        },
    )?);

    checks.push(
        CheckOutcome::new("gibbs-weak-limit", Status::Inconclusive)
            .with_note("not decidable numerically; use the gibbs subcommand to inspect concentration"),
    );

    let dissimilarity = if plan.ladder.len() >= 3 {
        Some(check_dissimilarity(
            p,
            &ShellSampler {
                radii: plan.ladder.clone(),
                samples_per_shell: plan.samples_per_shell,
                seed: plan.seed,
            },
        )?)
    } else {
        None
    };
    Ok(AssumptionReport { checks, dissimilarity })
}
