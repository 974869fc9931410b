//! Acceptance suite. Each test prints one `criterion N [PASS|FAIL]` line
//! (straight to stdout, so it shows even when output is captured) and then
//! asserts the verdict.

use std::io::Write as _;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use dgopt::analysis::{
    consensus_diagnostic, gibbs_reference, growth_diagnostic, success_probability, GridSpec, SuccessEstimate,
};
use dgopt::config::parse_config;
use dgopt::engine::{run_sync, spawn_runtime, GradientNoise, InitialCondition, NoiseModel, RunConfig, SwarmState, Trajectory};
use dgopt::graph::{build_graph, laplacian, GraphTopology, TopologySpec};
use dgopt::problem::builtin::{builtin_problem, DoubleWellParams, MultiWellParams, ProblemSpec, QuadraticParams};
use dgopt::problem::checks::{check_dissimilarity, check_radial, Dissimilarity, ShellSampler, Status};
use dgopt::problem::{FnObjective, Objective, ProblemInstance};
use dgopt::schedule::WeightSchedule;
use dgopt::Error;

fn report(n: u32, name: &str, pass: bool, detail: &str, elapsed: Duration, limit_s: f64) -> bool {
    let within = elapsed.as_secs_f64() < limit_s;
    let ok = pass && within;
    let verdict = if ok { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "criterion {n} [{verdict}] {name}: {detail} (runtime {:.2}s, limit {limit_s}s)",
        elapsed.as_secs_f64()
    );
    ok
}

fn quad(c: &[f64], dim: usize) -> ProblemInstance {
    builtin_problem(&ProblemSpec::QuadraticFamily(QuadraticParams { c: c.to_vec(), dim })).unwrap()
}

fn double_well(n: usize, a: Option<Vec<f64>>) -> ProblemInstance {
    builtin_problem(&ProblemSpec::SplitDoubleWell(DoubleWellParams { n, a })).unwrap()
}

fn multi_well(n: usize) -> ProblemInstance {
    builtin_problem(&ProblemSpec::MultiWell2d(MultiWellParams { n, tilt: 0.5 })).unwrap()
}

/// `L = D − A` from the edge list alone.
fn dense_laplacian(g: &GraphTopology) -> Vec<Vec<f64>> {
    let n = g.n_agents();
    let mut l = vec![vec![0.0; n]; n];
    for &(i, j) in g.edges() {
        l[i][j] -= 1.0;
        l[j][i] -= 1.0;
        l[i][i] += 1.0;
        l[j][j] += 1.0;
    }
    l
}

#[test]
fn criterion_1_graph_laplacian_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = Vec::new();
    for k in 0..50u64 {
        let n = rng.random_range(2..=10usize);
        let p = rng.random_range(0.3..0.9);
        let g = build_graph(&TopologySpec::Random { n_agents: n, p, seed: k }).unwrap();
        let l = dense_laplacian(&g);
        let view = laplacian(&g);
        if view.matrix.rows() != l {
            failures.push(format!("graph {k}: Laplacian differs from D - A"));
        }
        let symmetric = (0..n).all(|i| (0..n).all(|j| l[i][j] == l[j][i]));
        let kernel = l.iter().all(|row| row.iter().sum::<f64>() == 0.0);
        let mut psd = true;
        for _ in 0..1000 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let q: f64 = (0..n).map(|i| x[i] * (0..n).map(|j| l[i][j] * x[j]).sum::<f64>()).sum();
            let scale: f64 = x.iter().map(|v| v * v).sum::<f64>() * 2.0 * n as f64;
            psd &= q >= -1e-12 * scale;
        }
        let oracle = nalgebra::DMatrix::from_fn(n, n, |i, j| l[i][j]).symmetric_eigen();
        let zeros = oracle.eigenvalues.iter().filter(|v| v.abs() < 1e-9).count();
        let mut consensus_exact = true;
        for d in 1..=3 {
            let x: Vec<f64> = (0..n * d).map(|_| rng.random_range(-5.0..5.0)).collect();
            let state = SwarmState::new(1, n, d, x.clone()).unwrap();
            let got = g.consensus_term(&state).unwrap();
            // Dense (L ⊗ I_d) x, row n taken as Σ_j (−L_nj)(x_n − x_j); L has zero row sums.
            for a in 0..n {
                for c in 0..d {
                    let mut acc = 0.0;
                    for j in 0..n {
                        if j != a && l[a][j] != 0.0 {
                            acc += -l[a][j] * (x[a * d + c] - x[j * d + c]);
                        }
                    }
                    consensus_exact &= got[a * d + c].to_bits() == acc.to_bits();
                }
            }
        }
        if !(symmetric && kernel && psd && zeros == 1 && view.zero_multiplicity == 1 && consensus_exact) {
            failures.push(format!(
                "graph {k} (n={n}): symmetric={symmetric} L1=0:{kernel} psd={psd} zero_mult={zeros}/{} consensus_exact={consensus_exact}",
                view.zero_multiplicity
            ));
        }
    }
    let detail = if failures.is_empty() { "50 random connected graphs checked".to_string() } else { failures.join("; ") };
    assert!(report(1, "graph/Laplacian suite", failures.is_empty(), &detail, start.elapsed(), 10.0));
}

fn fd_gradient(obj: &dyn Objective, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            (obj.value(&p) - obj.value(&m)) / (2.0 * h)
        })
        .collect()
}

#[test]
fn criterion_2_gradient_oracle_suite() {
    let start = Instant::now();
    let problems = [
        ("quadratic-family(1,2)", quad(&[1.0, 2.0], 1)),
        ("quadratic-family(1,2,-1,0.5) d=3", quad(&[1.0, 2.0, -1.0, 0.5], 3)),
        ("split-double-well(2)", double_well(2, None)),
        ("split-double-well(3, a)", double_well(3, Some(vec![0.7, -1.2, 0.5]))),
        ("multi-well-2d(2)", multi_well(2)),
        ("multi-well-2d(3)", multi_well(3)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (name, p) in &problems {
        for (n, obj) in p.locals().iter().enumerate() {
            for _ in 0..100 {
                let x: Vec<f64> = (0..p.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
                let g = obj.gradient_vec(&x);
                let fd = fd_gradient(obj.as_ref(), &x, 1e-5);
                let err = g.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                let rel = err / (1.0 + gn);
                assert!(rel.is_finite(), "{name} agent {n}");
                worst = worst.max(rel);
            }
            checked += 1;
        }
    }
    let pass = worst <= 1e-4;
    let detail = format!("{checked} local objectives x 100 points, worst relative FD error {worst:.3e} (tol 1e-4)");
    assert!(report(2, "gradient oracle suite", pass, &detail, start.elapsed(), 5.0));
}

#[test]
fn criterion_3_assumption_validators() {
    let start = Instant::now();
    let shells = ShellSampler { radii: (1..=7).map(|k| 2f64.powi(k)).collect(), samples_per_shell: 16, seed: 3 };
    let q = quad(&[1.0, 2.0], 1);
    let dis = check_dissimilarity(&q, &shells).unwrap();
    let unbounded = dis.classification == Dissimilarity::UnboundedTrend;
    let radial_ok = q.locals().iter().all(|o| {
        let rc = check_radial(o.as_ref(), 0.0, &shells).unwrap();
        rc.radial.status == Status::Pass
    });
    let single = quad(&[1.0], 1);
    let single_dis = check_dissimilarity(&single, &shells).unwrap();
    let bounded = single_dis.classification == Dissimilarity::Bounded && single_dis.max_gap.iter().all(|&m| m == 0.0);

    let neg = FnObjective::new("-x^2", 1, |x| -x[0] * x[0], |x, g| g[0] = -2.0 * x[0]);
    let neg_shells = ShellSampler { radii: vec![1.0, 2.0, 4.0], samples_per_shell: 4, seed: 1 };
    let neg_rc = check_radial(&neg, 1.0, &neg_shells).unwrap();
    let neg_fail = neg_rc.radial.status == Status::Fail
        && neg_rc.radial.witness.as_ref().is_some_and(|w| w.lhs < w.rhs && !w.point.is_empty());

    let sin = FnObjective::new("sin x", 1, |x| x[0].sin(), |x, g| g[0] = x[0].cos());
    let sin_shells = ShellSampler { radii: (10..=20).map(f64::from).collect(), samples_per_shell: 4, seed: 1 };
    let sin_rc = check_radial(&sin, 10.0, &sin_shells).unwrap();
    let sin_fail = sin_rc.coercive.status == Status::Fail
        && sin_rc.coercive.witness.as_ref().is_some_and(|w| !(w.lhs > w.rhs) && w.other_point.is_some());

    let pass = unbounded && radial_ok && bounded && neg_fail && sin_fail;
    let detail = format!(
        "quadratic(1,2) dissimilarity={:?} slope={:.3} radial_pass={radial_ok}; N=1 bounded={bounded}; -x^2 radial fail={neg_fail}; sin coercive fail={sin_fail}",
        dis.classification, dis.slope
    );
    assert!(report(3, "assumption validators", pass, &detail, start.elapsed(), 10.0));
}

fn random_config(rng: &mut ChaCha8Rng, k: u64) -> RunConfig {
    let n = rng.random_range(1..=5usize);
    let topology = match rng.random_range(0..5) {
        0 => TopologySpec::Path { n_agents: n },
        1 => TopologySpec::Ring { n_agents: n },
        2 => TopologySpec::Complete { n_agents: n },
        3 => TopologySpec::Star { n_agents: n },
        _ if n > 1 => TopologySpec::Random { n_agents: n, p: 0.6, seed: k },
        _ => TopologySpec::Path { n_agents: n },
    };
    let g = build_graph(&topology).unwrap();
    let problem = match rng.random_range(0..3) {
        0 => {
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
            quad(&c, rng.random_range(1..=3))
        }
        1 => double_well(n, None),
        _ => multi_well(n),
    };
    let c_alpha = rng.random_range(0.05..0.2);
    let schedule = WeightSchedule {
        c_alpha,
        c_beta: rng.random_range(0.05..0.9) / g.max_degree().max(1) as f64,
        c_gamma: rng.random_range(0.2..0.7),
        tau_beta: rng.random_range(0.05..0.45),
        ..WeightSchedule::default()
    };
    let gradient = match rng.random_range(0..3) {
        0 => GradientNoise::None,
        1 => GradientNoise::Uniform { bound: rng.random_range(0.1..1.0) },
        _ => GradientNoise::TruncatedGaussian { sigma: rng.random_range(0.1..1.0), clip: rng.random_range(0.5..2.0) },
    };
    let noise = NoiseModel { gradient, annealing: rng.random_bool(0.8), seed_root: rng.random() };
    let dim = problem.dim();
    let initial = InitialCondition::Gaussian { scale: 1.0, seed: k }.resolve(n, dim).unwrap();
    RunConfig::new(g, problem, schedule, noise, 1000, initial)
        .unwrap()
        .with_cadence(rng.random_range(1..=50))
        .unwrap()
}

#[test]
fn criterion_4_engine_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut mismatches = Vec::new();
    for k in 0..10u64 {
        let cfg = random_config(&mut rng, k);
        let n = cfg.n_agents();
        let sync = run_sync(&cfg).map(|t| t.to_csv());
        for workers in [1, n] {
            let rt = spawn_runtime(&cfg, workers, Duration::from_secs(10)).map(|(t, _)| t.to_csv());
            match (&sync, &rt) {
                (Ok(a), Ok(b)) if a == b => {}
                (Ok(_), Ok(_)) => mismatches.push(format!("config {k} workers {workers}: CSV bytes differ")),
                (a, b) => mismatches.push(format!("config {k} workers {workers}: sync {:?} runtime {:?}", a.as_ref().err(), b.as_ref().err())),
            }
        }
    }
    let detail = if mismatches.is_empty() {
        "10 random configs (N <= 5, T = 1000), workers {1, N}: byte-identical CSVs".to_string()
    } else {
        mismatches.join("; ")
    };
    assert!(report(4, "engine equivalence", mismatches.is_empty(), &detail, start.elapsed(), 30.0));
}

#[test]
fn criterion_5_closed_form_reduction() {
    let start = Instant::now();
    let c = 1.0;
    let horizon = 10_000u64;
    let schedule = WeightSchedule { c_alpha: 0.1, ..WeightSchedule::default() };
    let g = build_graph(&TopologySpec::Path { n_agents: 1 }).unwrap();
    let cfg = RunConfig::new(g, quad(&[c], 1), schedule, NoiseModel::silent(), horizon, vec![1.0]).unwrap();
    let traj = run_sync(&cfg).unwrap();
    let got = traj.last().unwrap();
    let mut expect = 1.0f64;
    for t in 1..horizon {
        expect *= 1.0 - 2.0 * c * 0.1 / t as f64;
    }
    let err = (got.x()[0] - expect).abs();
    let pass = got.t() == horizon && err <= 1e-12;
    let detail = format!("x(T) = {:.15e}, product = {expect:.15e}, |diff| = {err:.2e} (tol 1e-12)", got.x()[0]);
    assert!(report(5, "closed-form reduction", pass, &detail, start.elapsed(), 1.0));
}

const CHECKPOINTS: [u64; 3] = [1_000, 10_000, 100_000];

struct QuadraticRuns {
    trajectories: Vec<Trajectory>,
    elapsed: Duration,
}

/// Criteria 6 and 7 share these 20 runs.
fn quadratic_runs() -> &'static QuadraticRuns {
    static RUNS: OnceLock<QuadraticRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let start = Instant::now();
        let cfg = parse_config(
            r#"
[graph]
kind = "path"
n_agents = 2

[problem]
name = "quadratic-family"
[problem.params]
c = [1.0, 2.0]

[schedule]
c_alpha = 1.0
c_beta = 0.5
c_gamma = 2.0
tau_beta = 0.25

[run]
horizon = 100000
cadence = 1000
"#,
        )
        .unwrap();
        let trajectories = (0..20u64)
            .into_par_iter()
            .map(|seed| run_sync(&cfg.with_seed(seed).build().unwrap()).unwrap())
            .collect();
        QuadraticRuns { trajectories, elapsed: start.elapsed() }
    })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

#[test]
fn criterion_6_consensus_decay() {
    let runs = quadratic_runs();
    let at = |t: u64| {
        let mut v: Vec<f64> = runs
            .trajectories
            .iter()
            .map(|tr| consensus_diagnostic(tr, 0.2, 0.25).unwrap().value_at(t).unwrap())
            .collect();
        median(&mut v)
    };
    let m: Vec<f64> = CHECKPOINTS.iter().map(|&t| at(t)).collect();
    let ratio = m[2] / m[0];
    let pass = ratio < 0.5;
    let detail = format!(
        "median t^0.2 max_n|x_n - mean| at t=1e3,1e4,1e5: {:.4e}, {:.4e}, {:.4e}; ratio 1e5/1e3 = {ratio:.3} (< 0.5)",
        m[0], m[1], m[2]
    );
    assert!(report(6, "consensus decay (20 seeds)", pass, &detail, runs.elapsed, 300.0));
}

#[test]
fn criterion_7_growth_bound() {
    let runs = quadratic_runs();
    let constant = runs
        .trajectories
        .iter()
        .filter(|tr| {
            let d = growth_diagnostic(tr, 0.75).unwrap();
            d.value_at(10_000).unwrap() == d.value_at(100_000).unwrap()
        })
        .count();
    let pass = constant >= 18;
    let detail = format!("running max of |x_t|/t^0.75 constant on [1e4, 1e5] in {constant}/20 seeds (need >= 18)");
    assert!(report(7, "growth bound (same runs)", pass, &detail, runs.elapsed, 300.0));
}

fn format_success(e: &[SuccessEstimate]) -> String {
    e.iter()
        .map(|s| format!("agent {}: {:.2} [{:.2}, {:.2}]", s.agent, s.fraction, s.wilson_low, s.wilson_high))
        .collect::<Vec<_>>()
        .join(", ")
}

#[test]
fn criterion_8_global_minima_success() {
    let start = Instant::now();
    let schedule = WeightSchedule { c_alpha: 0.1, c_beta: 0.5, c_gamma: 0.64, tau_beta: 0.25, ..WeightSchedule::default() };
    let ratio = schedule.gate_ratio();
    let g = build_graph(&TopologySpec::Path { n_agents: 2 }).unwrap();
    let p = double_well(2, None);
    let base = RunConfig::new(g, p.clone(), schedule, NoiseModel::default(), 100_000, vec![0.0, 0.0])
        .unwrap()
        .with_cadence(1000)
        .unwrap();
    let results: Vec<_> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let mut cfg = base.clone();
            cfg.noise.seed_root = seed;
            run_sync(&cfg)
        })
        .collect();
    let failed = results.iter().filter(|r| r.is_err()).count();
    let ok: Vec<&Trajectory> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let minima = p.known_minima().unwrap();
    let early: Vec<SwarmState> = ok.iter().map(|t| t.at(1000).unwrap().clone()).collect();
    let late: Vec<SwarmState> = ok.iter().map(|t| t.last().unwrap().clone()).collect();
    let s_early = success_probability(&early, minima, 0.25).unwrap();
    let s_late = success_probability(&late, minima, 0.25).unwrap();

    // Quasi-equilibrium reference: the network mean at time t is roughly
    // distributed like the Gibbs law at epsilon² = ratio / log log t.
    let eps = (ratio / (1e5f64).ln().ln()).sqrt();
    let reference = gibbs_reference(&p, eps, &GridSpec::default()).unwrap();
    let predicted = reference.integrate(|x| if ((x[0].abs() - 1.0).abs()) <= 0.25 { 1.0 } else { 0.0 });

    let high = s_late.iter().all(|s| s.fraction >= 0.8);
    let monotone = s_late.iter().zip(&s_early).all(|(l, e)| l.fraction >= e.fraction);
    let pass = failed == 0 && high && monotone;
    let detail = format!(
        "c_gamma^2/c_alpha = {ratio:.3}; T=1e5 {}; T=1e3 {}; fraction>=0.8: {high}; monotone: {monotone}; failed runs {failed}; Gibbs quasi-equilibrium fraction at T=1e5 = {predicted:.3}",
        format_success(&s_late),
        format_success(&s_early)
    );
    assert!(report(8, "success probability near global minima (50 seeds)", pass, &detail, start.elapsed(), 600.0));
}

#[test]
fn criterion_9_gibbs_reference() {
    let start = Instant::now();
    let g = gibbs_reference(&quad(&[1.0], 1), 1.0, &GridSpec::default()).unwrap();
    let norm = 2.0 / (2.0 * std::f64::consts::PI).sqrt();
    let sup = (0..g.len())
        .map(|i| {
            let x = g.point(i)[0];
            (g.values[i] - norm * (-2.0 * x * x).exp()).abs()
        })
        .fold(0.0, f64::max);
    let mass_err = (g.total_mass() - 1.0).abs();
    let dw = double_well(2, None);
    let ladder = [1.0, 0.5, 0.25, 0.1];
    let masses: Vec<f64> = ladder
        .iter()
        .map(|&e| gibbs_reference(&dw, e, &GridSpec::default()).unwrap().mass_near_minima(0.1))
        .collect();
    let monotone = masses.windows(2).all(|w| w[1] >= w[0]);
    let pass = sup <= 1e-6 && mass_err <= 1e-6 && monotone;
    let detail = format!(
        "sup |density - N(0, 1/4)| = {sup:.2e}; |mass - 1| = {mass_err:.2e}; double-well mass near S over eps {ladder:?}: {masses:.4?}"
    );
    assert!(report(9, "Gibbs reference suite", pass, &detail, start.elapsed(), 10.0));
}

#[test]
fn criterion_10_schedule_gates() {
    let start = Instant::now();
    let tau = WeightSchedule { tau_beta: 0.6, ..WeightSchedule::default() }.validate();
    let tau_named = matches!(tau, Err(Error::TauOutOfRange(t)) if t == 0.6);
    let gate = WeightSchedule { c_alpha: 1.0, c_gamma: 1.0, c_zero: 2.0, ..WeightSchedule::default() }.validate();
    let gate_named = matches!(gate, Err(Error::GateViolation { ratio, c_zero }) if ratio == 1.0 && c_zero == 2.0);
    let equal = WeightSchedule { c_alpha: 1.0, c_gamma: 2.0, c_zero: 4.0, ..WeightSchedule::default() }.validate();
    let equal_rejected = matches!(equal, Err(Error::GateViolation { .. }));
    let base = "[graph]\nkind = \"path\"\nn_agents = 1\n[problem]\nname = \"quadratic-family\"\n[problem.params]\nc = [1.0]\n";
    let cfg_tau = parse_config(&format!("{base}[schedule]\nc_alpha = 1.0\nc_beta = 1.0\nc_gamma = 2.0\ntau_beta = 0.6\n"));
    let cfg_gate = parse_config(&format!("{base}[schedule]\nc_alpha = 1.0\nc_beta = 1.0\nc_gamma = 1.0\ntau_beta = 0.25\nc_zero = 1.0\n"));
    let config_named = matches!(&cfg_tau, Err(Error::Validation { gate, .. }) if gate.contains("tau_beta"))
        && matches!(&cfg_gate, Err(Error::Validation { gate, .. }) if gate.contains("c_zero"));
    let s = WeightSchedule::default();
    let gamma_ok = (1..=100_000u64).all(|t| s.gamma(t).is_ok_and(|g| g.is_finite() && g > 0.0));
    let pass = tau_named && gate_named && equal_rejected && config_named && gamma_ok;
    let detail = format!(
        "tau_beta=0.6 -> TauOutOfRange: {tau_named}; ratio 1 <= c_zero 2 -> GateViolation: {gate_named}; ratio == c_zero rejected: {equal_rejected}; config errors name gate: {config_named}; gamma finite > 0 for t in [1, 1e5]: {gamma_ok}"
    );
    assert!(report(10, "schedule gates", pass, &detail, start.elapsed(), 1.0));
}
