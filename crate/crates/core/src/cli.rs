//! Command implementations behind the `dgopt` binary.
//!
//! Every artifact embeds the schema version, the config hash and the seed.
//! CSV files carry them in a leading `#` comment line. Nothing written by a
//! command depends on wall-clock time except `timing.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{
    consensus_diagnostic, expectation_estimate, gibbs_reference, growth_diagnostic, success_probability,
    ConvergenceSummary, GridSpec, TestFunction,
};
use crate::config::{parse_config, parse_unvalidated, ExperimentConfig};
use crate::engine::{run, SwarmState, Trajectory};
use crate::graph::{build_graph, laplacian};
use crate::problem::builtin_problem;
use crate::problem::checks::{assess_problem, CheckPlan, Status};
use crate::{Error, Result, SCHEMA_VERSION};

/// Environment variable that takes precedence over `--out`.
pub const OUT_ENV: &str = "DGOPT_OUT";

#[derive(Debug, Parser)]
#[command(name = "dgopt", version, about = "Distributed consensus + annealing optimization experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one trajectory and write trajectory, summary and metadata files.
    Run(RunArgs),
    /// Run the same config over several seeds and aggregate.
    Sweep(SweepArgs),
    /// Check the problem, schedule, graph and noise against the assumptions.
    Check(CheckArgs),
    /// Tabulate the Gibbs reference density over an epsilon ladder.
    Gibbs(GibbsArgs),
    /// Dump the graph, its Laplacian and spectrum.
    Graph(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overridden by DGOPT_OUT).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Overrides `noise.seed_root`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Runs on the message-passing runtime with this many workers.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    pub tau: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.75")]
    pub eta: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated seeds; `a..b` expands to `a, a+1, .., b-1`.
    #[arg(long)]
    pub seeds: String,
    /// Size of the worker pool running seeds in parallel.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    pub tau: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.75")]
    pub eta: Vec<f64>,
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    /// Epsilon of the Gibbs reference used for expectation estimates.
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// One of: one, clamp-norm, cos, near-minima.
    #[arg(long, default_value = "clamp-norm")]
    pub test_fn: String,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Sampling seed of the checks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct GibbsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,0.5,0.25,0.1")]
    pub eps_ladder: Vec<f64>,
    /// Sublevel height defining "near the minima".
    #[arg(long, default_value_t = 0.1)]
    pub kappa: f64,
}

/// Outcome of a command: the files it wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct Written {
    pub files: Vec<PathBuf>,
}

pub fn execute(cli: &Cli) -> Result<Written> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Check(a) => cmd_check(a),
        Command::Gibbs(a) => cmd_gibbs(a),
        Command::Graph(a) => cmd_graph(a),
    }
}

/// `DGOPT_OUT` if set, else `--out`.
pub fn resolve_out(flag: &Path) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => flag.to_path_buf(),
    }
}

fn read_config(args: &CommonArgs, validate: bool) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(&args.config)?;
    if validate {
        parse_config(&text)
    } else {
        parse_unvalidated(&text)
    }
}

struct Sink {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Sink {
    fn new(common: &CommonArgs) -> Result<Self> {
        let dir = resolve_out(&common.out);
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, files: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    fn done(self) -> Written {
        Written { files: self.files }
    }
}

fn csv_header(hash: &str, seed: Option<u64>) -> String {
    match seed {
        Some(s) => format!("# schema_version={SCHEMA_VERSION} config_hash={hash} seed={s}\n"),
        None => format!("# schema_version={SCHEMA_VERSION} config_hash={hash}\n"),
    }
}

fn state_json(s: &SwarmState) -> Value {
    json!({ "t": s.t(), "n_agents": s.n_agents(), "dim": s.dim(), "x": s.x() })
}

/// Machine-readable description of an error, for stderr.
pub fn error_json(e: &Error) -> Value {
    let kind = match e {
        Error::InvalidSpec(_) => "InvalidSpec",
        Error::DisconnectedGraph { .. } => "DisconnectedGraph",
        Error::ConnectivityRetriesExhausted { .. } => "ConnectivityRetriesExhausted",
        Error::DimensionMismatch { .. } => "DimensionMismatch",
        Error::InvalidTime(_) => "InvalidTime",
        Error::TauOutOfRange(_) => "TauOutOfRange",
        Error::GateViolation { .. } => "GateViolation",
        Error::NonPositiveConstant { .. } => "NonPositiveConstant",
        Error::NonFiniteState { .. } => "NonFiniteState",
        Error::Timeout { .. } => "Timeout",
        Error::Runtime(_) => "Runtime",
        Error::EmptyTrajectory => "EmptyTrajectory",
        Error::DimensionTooLarge(_) => "DimensionTooLarge",
        Error::BoxTooSmall { .. } => "BoxTooSmall",
        Error::EmptyMinimaSet => "EmptyMinimaSet",
        Error::UnknownTestFunction(_) => "UnknownTestFunction",
        Error::Parse { .. } => "ParseError",
        Error::Validation { .. } => "ValidationError",
        Error::Io(_) => "Io",
        Error::Json(_) => "Json",
    };
    let mut v = json!({ "schema_version": SCHEMA_VERSION, "error": kind, "message": e.to_string() });
    match e {
        Error::NonFiniteState { round, agent, last_recorded } => {
            v["round"] = json!(round);
            v["agent"] = json!(agent);
            v["last_recorded"] = state_json(last_recorded);
        }
        Error::Timeout { round, agent } => {
            v["round"] = json!(round);
            v["agent"] = json!(agent);
        }
        Error::Parse { line, column, .. } => {
            v["line"] = json!(line);
            v["column"] = json!(column);
        }
        Error::Validation { gate, .. } => v["gate"] = json!(gate),
        _ => {}
    }
    v
}

/// Process exit code for an error: 2 for bad input, 1 for run failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Validation { .. } | Error::Io(_) => 2,
        _ => 1,
    }
}

fn diagnostics_json(traj: &Trajectory, tau_beta: f64, taus: &[f64], etas: &[f64]) -> Result<Value> {
    let consensus = taus
        .iter()
        .map(|&tau| {
            let d = consensus_diagnostic(traj, tau, tau_beta)?;
            Ok(json!({ "tau": tau, "t": d.t, "values": d.values, "warning": d.warning }))
        })
        .collect::<Result<Vec<_>>>()?;
    let growth = etas
        .iter()
        .map(|&eta| {
            let d = growth_diagnostic(traj, eta)?;
            Ok(json!({ "eta": eta, "t": d.t, "running_max": d.values }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({ "consensus": consensus, "growth": growth }))
}

fn first_or(v: &[f64], default: f64) -> f64 {
    v.first().copied().unwrap_or(default)
}

pub fn cmd_run(args: &RunArgs) -> Result<Written> {
    let mut exp = read_config(&args.common, true)?;
    if let Some(seed) = args.seed {
        exp = exp.with_seed(seed);
    }
    if let Some(w) = args.workers {
        exp.run.mode = crate::config::ModeSpec::MessagePassing;
        exp.run.workers = w;
    }
    let cfg = exp.build()?;
    let hash = exp.hash()?;
    let seed = exp.noise.seed_root;
    let mut sink = Sink::new(&args.common)?;

    let start = Instant::now();
    let traj = run(&cfg)?;
    let wall = start.elapsed().as_secs_f64();

    let header = csv_header(&hash, Some(seed));
    sink.write("trajectory.csv", &format!("{header}{}", traj.to_csv()))?;
    let summary = ConvergenceSummary::from_trajectory(&traj, &cfg.problem, first_or(&args.tau, 0.2), first_or(&args.eta, 0.75))?;
    sink.write("summary.csv", &format!("{header}{}", summary.to_csv()))?;
    let last = traj.last().ok_or(Error::EmptyTrajectory)?;
    sink.json(
        "metadata.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "config_hash": hash,
            "seed": seed,
            "config": exp,
            "records": traj.records.len(),
            "final_state": state_json(last),
            "warnings": traj.warnings,
            "diagnostics": diagnostics_json(&traj, exp.schedule.tau_beta, &args.tau, &args.eta)?,
        }),
    )?;
    sink.json(
        "timing.json",
        &json!({ "schema_version": SCHEMA_VERSION, "config_hash": hash, "seed": seed, "wall_time_s": wall }),
    )?;
    Ok(sink.done())
}

/// Parses `1,2,5..8` into `[1, 2, 5, 6, 7]`; rejects duplicates.
pub fn parse_seed_list(text: &str) -> Result<Vec<u64>> {
    let bad = |m: String| Error::InvalidSpec(format!("seed list: {m}"));
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad(format!("bad range start in `{part}`")))?;
            let b: u64 = b.trim().parse().map_err(|_| bad(format!("bad range end in `{part}`")))?;
            seeds.extend(a..b);
        } else {
            seeds.push(part.parse().map_err(|_| bad(format!("bad seed `{part}`")))?);
        }
    }
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(bad(format!("duplicate seed {}", w[0])));
    }
    if seeds.is_empty() {
        return Err(bad("empty".into()));
    }
    Ok(seeds)
}

/// Linear-interpolation quantile of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

#[derive(Debug, Serialize)]
struct SeedEntry {
    seed: u64,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_state: Option<Value>,
    scaled_consensus: Vec<Value>,
    growth_running_max: Vec<Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    distance_to_minima: Vec<f64>,
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Written> {
    let exp = read_config(&args.common, true)?;
    let mut seeds = parse_seed_list(&args.seeds)?;
    if seeds.len() < 2 {
        return Err(Error::InvalidSpec("a sweep needs at least two distinct seeds".into()));
    }
    seeds.sort_unstable();
    let f: TestFunction = args.test_fn.parse()?;
    if args.workers == 0 {
        return Err(Error::InvalidSpec("--workers must be at least 1".into()));
    }
    let base = exp.build()?;
    let hash = exp.hash()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers)
        .build()
        .map_err(|e| Error::Runtime(e.to_string()))?;
    let results: Vec<(u64, Result<Trajectory>)> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let mut cfg = base.clone();
                cfg.noise.seed_root = seed;
                (seed, run(&cfg))
            })
            .collect()
    });

    let tau_beta = exp.schedule.tau_beta;
    let mut entries = Vec::with_capacity(results.len());
    let mut finals = Vec::new();
    let mut final_consensus: Vec<Vec<f64>> = vec![Vec::new(); args.tau.len()];
    let mut final_growth: Vec<Vec<f64>> = vec![Vec::new(); args.eta.len()];
    for (seed, r) in &results {
        match r {
            Ok(traj) => {
                let last = traj.last().ok_or(Error::EmptyTrajectory)?;
                let mut scaled = Vec::new();
                for (i, &tau) in args.tau.iter().enumerate() {
                    let v = *consensus_diagnostic(traj, tau, tau_beta)?.values.last().expect("non-empty");
                    final_consensus[i].push(v);
                    scaled.push(json!({ "tau": tau, "value": v }));
                }
                let mut growth = Vec::new();
                for (i, &eta) in args.eta.iter().enumerate() {
                    let v = *growth_diagnostic(traj, eta)?.values.last().expect("non-empty");
                    final_growth[i].push(v);
                    growth.push(json!({ "eta": eta, "value": v }));
                }
                entries.push(SeedEntry {
                    seed: *seed,
                    status: "ok",
                    error: None,
                    final_state: Some(state_json(last)),
                    scaled_consensus: scaled,
                    growth_running_max: growth,
                    distance_to_minima: last.blocks().filter_map(|b| base.problem.distance_to_minima(b)).collect(),
                });
                finals.push(last.clone());
            }
            Err(e) => entries.push(SeedEntry {
                seed: *seed,
                status: "error",
                error: Some(error_json(e)),
                final_state: None,
                scaled_consensus: Vec::new(),
                growth_running_max: Vec::new(),
                distance_to_minima: Vec::new(),
            }),
        }
    }

    let quantiles = |v: &[f64]| json!({ "q10": quantile(v, 0.1), "median": quantile(v, 0.5), "q90": quantile(v, 0.9) });
    let mut aggregate = json!({
        "n_seeds": seeds.len(),
        "n_ok": finals.len(),
        "n_failed": seeds.len() - finals.len(),
        "delta": args.delta,
        "scaled_consensus": args.tau.iter().zip(&final_consensus).map(|(tau, v)| {
            let mut q = quantiles(v);
            q["tau"] = json!(tau);
            q
        }).collect::<Vec<_>>(),
        "growth_running_max": args.eta.iter().zip(&final_growth).map(|(eta, v)| {
            let mut q = quantiles(v);
            q["eta"] = json!(eta);
            q
        }).collect::<Vec<_>>(),
    });
    if !finals.is_empty() {
        if let Some(minima) = base.problem.known_minima() {
            aggregate["success"] = serde_json::to_value(success_probability(&finals, minima, args.delta)?)?;
        }
        if base.dim() <= 2 {
            let reference = gibbs_reference(&base.problem, args.epsilon, &GridSpec::default())?;
            let est = expectation_estimate(&finals, f, &base.problem, &reference)?;
            aggregate["expectation"] = json!({ "epsilon": args.epsilon, "function": f.name(), "per_agent": est });
        }
    }

    let mut sink = Sink::new(&args.common)?;
    sink.json(
        "sweep.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "config_hash": hash,
            "seeds": seeds,
            "config": exp,
            "entries": entries,
            "aggregate": aggregate,
        }),
    )?;
    let failed = seeds.len() - finals.len();
    if failed > 0 {
        return Err(Error::Runtime(format!("{failed} of {} seeds failed; see sweep.json", seeds.len())));
    }
    Ok(sink.done())
}

fn gate_entry(gate: &str, r: Result<()>) -> Value {
    match r {
        Ok(()) => json!({ "gate": gate, "status": Status::Pass }),
        Err(e) => json!({ "gate": gate, "status": Status::Fail, "message": e.to_string() }),
    }
}

pub fn cmd_check(args: &CheckArgs) -> Result<Written> {
    let exp = read_config(&args.common, false)?;
    let hash = exp.hash()?;
    let problem = builtin_problem(&exp.problem)?;
    let plan = CheckPlan { seed: args.seed, ..CheckPlan::default() };
    let report = assess_problem(&problem, &plan)?;
    let graph = build_graph(&exp.graph);
    let lambda = graph.as_ref().ok().and_then(|g| laplacian(g).lambda_min_pos);
    let gates = vec![
        gate_entry("schedule", exp.schedule.validate()),
        gate_entry("graph.connected", graph.as_ref().map(|_| ()).map_err(|e| Error::InvalidSpec(e.to_string()))),
        gate_entry(
            "graph.n_agents == problem.n_agents",
            if exp.graph.n_agents() == problem.n_agents() {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { expected: exp.graph.n_agents(), got: problem.n_agents() })
            },
        ),
        gate_entry("noise.gradient", exp.noise.gradient.validate()),
    ];
    let mut sink = Sink::new(&args.common)?;
    sink.json(
        "check.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "config_hash": hash,
            "seed": args.seed,
            "report": report,
            "gates": gates,
            "gate_ratio": exp.schedule.gate_ratio(),
            "lambda_min_pos": lambda,
            "gradient_noise_second_moment_bound": exp.noise.gradient.second_moment_bound(problem.dim()),
        }),
    )?;
    Ok(sink.done())
}

pub fn cmd_gibbs(args: &GibbsArgs) -> Result<Written> {
    let exp = read_config(&args.common, false)?;
    let hash = exp.hash()?;
    let problem = builtin_problem(&exp.problem)?;
    if problem.dim() > 2 {
        return Err(Error::DimensionTooLarge(problem.dim()));
    }
    if args.eps_ladder.is_empty() {
        return Err(Error::InvalidSpec("empty epsilon ladder".into()));
    }
    let mut sink = Sink::new(&args.common)?;
    let mut table = format!("{}epsilon,z_eps,mass_near_minima,second_moment\n", csv_header(&hash, None));
    let mut rows = Vec::new();
    for (i, &eps) in args.eps_ladder.iter().enumerate() {
        let g = gibbs_reference(&problem, eps, &GridSpec::default())?;
        let mass = g.mass_near_minima(args.kappa);
        let second = g.integrate(|x| x.iter().map(|v| v * v).sum());
        sink.json(
            &format!("gibbs_{i}.json"),
            &json!({
                "schema_version": SCHEMA_VERSION,
                "config_hash": hash,
                "epsilon": eps,
                "axes": g.axes,
                "values": g.values,
                "z_eps": g.z_eps,
            }),
        )?;
        table.push_str(&format!("{eps},{},{mass},{second}\n", g.z_eps));
        rows.push(json!({ "epsilon": eps, "z_eps": g.z_eps, "mass_near_minima": mass, "second_moment": second }));
    }
    sink.write("concentration.csv", &table)?;
    sink.json(
        "concentration.json",
        &json!({ "schema_version": SCHEMA_VERSION, "config_hash": hash, "kappa": args.kappa, "rows": rows }),
    )?;
    Ok(sink.done())
}

pub fn cmd_graph(args: &CommonArgs) -> Result<Written> {
    let exp = read_config(args, false)?;
    let hash = exp.hash()?;
    let g = build_graph(&exp.graph)?;
    let lap = laplacian(&g);
    let mut sink = Sink::new(args)?;
    sink.json(
        "graph.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "config_hash": hash,
            "n": g.n_agents(),
            "edges": g.edges().iter().map(|&(i, j)| [i, j]).collect::<Vec<_>>(),
            "lambda_min_pos": lap.lambda_min_pos,
            "zero_multiplicity": lap.zero_multiplicity,
            "spectrum": lap.spectrum,
            "laplacian": lap.matrix.rows(),
        }),
    )?;
    Ok(sink.done())
}
