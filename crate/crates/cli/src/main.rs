//! `stickylab` command-line runner.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use stickylab::config::RunConfig;
use stickylab::coupling::{calibrate, run_divergence_with, verify_est_p1_grid, Calibration, ExperimentReport};
use stickylab::kv::KvMap;
use stickylab::lattice_walk::{simulate_walk, WalkConfig};
use stickylab::regularized_sde::{sample_reg_batch, simulate_coupled, simulate_reg, RegConfig};
use stickylab::rng::derive_seed;
use stickylab::speed_measure::green_kernel;
use stickylab::time_change::{sample_batch_at_time, sig17, steps_for_horizon, sticky_path};
use stickylab::verify::{run_suite, Budget, Suite};
use stickylab::Error;

#[derive(Parser, Debug)]
#[command(name = "stickylab", version, about = "Monte Carlo laboratory for sticky-point diffusions")]
struct Cli {
    /// Flat `key = value` config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (required here or in the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true, env = "STICKYLAB_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Override any config key, e.g. `--set gamma=2`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate G_I(x) and g_I(x, y) for a speed measure.
    Analytic,
    /// Simulate paths by time change or by the regularized SDE.
    Simulate(SimulateArgs),
    /// Coupled-pair experiments.
    Couple(CoupleArgs),
    /// Run verification checks against analytic targets.
    Verify(VerifyArgs),
    /// Calibrate the divergence-experiment constants from pilot runs.
    Calibrate,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    paths: Option<u64>,
}

#[derive(Args, Debug)]
struct CoupleArgs {
    #[arg(long, value_enum, default_value = "ladder")]
    experiment: Experiment,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Option<SuiteArg>,
    #[arg(long, value_enum)]
    budget: Option<BudgetArg>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Method {
    TimeChange,
    Regularized,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Experiment {
    Ladder,
    Divergence,
    Trajectory,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SuiteArg {
    Analytic,
    Construction,
    Convergence,
    Coupling,
    All,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum BudgetArg {
    Smoke,
    Reduced,
    Full,
}

/// Usage problems exit with 2, everything else with 1.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Domain(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let base = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::Resource(m) => Failure::Usage(m),
            e => e.into(),
        })?,
        None => RunConfig::default(),
    };
    let mut flags = KvMap::new();
    for s in &cli.set {
        let (k, v) = s.split_once('=').ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got {s:?}")))?;
        flags.set(k.trim(), v.trim());
    }
    if let Some(seed) = cli.seed {
        flags.set("seed", seed.to_string());
    }
    if let Some(w) = cli.workers {
        flags.set("workers", w.to_string());
    }
    if let Some(o) = &cli.out {
        flags.set("out", o.display().to_string());
    }
    if let Some(f) = cli.format {
        flags.set("format", if f == Format::Json { "json" } else { "csv" });
    }
    match &cli.command {
        Command::Simulate(a) => {
            if let Some(m) = a.method {
                flags.set("method", method_name(m));
            }
            if let Some(p) = a.paths {
                flags.set("paths", p.to_string());
            }
        }
        Command::Verify(a) => {
            if let Some(s) = a.suite {
                flags.set("suite", format!("{s:?}").to_lowercase());
            }
            if let Some(b) = a.budget {
                flags.set("budget", format!("{b:?}").to_lowercase());
            }
        }
        _ => {}
    }
    Ok(base.with_overrides(&flags)?)
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::TimeChange => "time-change",
        Method::Regularized => "regularized",
    }
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let cfg = load_config(&cli)?;
    let pool = match cfg.workers()? {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(|e| Failure::Runtime(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Analytic => cmd_analytic(&cfg).map(|()| true),
        Command::Simulate(_) => cmd_simulate(&cfg).map(|()| true),
        Command::Couple(a) => cmd_couple(&cfg, a.experiment).map(|()| true),
        Command::Verify(_) => cmd_verify(&cfg),
        Command::Calibrate => cmd_calibrate(&cfg).map(|()| true),
    })
}

fn format(cfg: &RunConfig) -> Result<Format, Failure> {
    match cfg.str_or("format", "csv") {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        f => Err(Failure::Usage(format!("format must be csv or json, got {f:?}"))),
    }
}

fn out_dir(cfg: &RunConfig) -> Option<PathBuf> {
    cfg.get("out").map(PathBuf::from)
}

/// Writes `files` and a `manifest.json` describing how to regenerate them.
fn write_outputs(cfg: &RunConfig, command: &str, dir: &Path, files: &[(String, Vec<u8>)]) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    for (name, bytes) in files {
        fs::write(dir.join(name), bytes)?;
    }
    let mut config = serde_json::Map::new();
    for key in cfg.map().keys().filter(|&k| k != "workers" && k != "out") {
        config.insert(key.to_string(), json!(cfg.get(key)));
    }
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "master_seed": cfg.seed().ok(),
        "config": config,
        "files": files.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
    });
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}

/// Sends a single output either to stdout or, with `--out`, to a file plus manifest.
fn emit(cfg: &RunConfig, command: &str, name: &str, bytes: Vec<u8>) -> Result<(), Failure> {
    match out_dir(cfg) {
        Some(dir) => write_outputs(cfg, command, &dir, &[(name.to_string(), bytes)]),
        None => Ok(io::stdout().write_all(&bytes)?),
    }
}

fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s.into_bytes()
}

fn cmd_analytic(cfg: &RunConfig) -> Result<(), Failure> {
    let m = cfg.measure()?;
    let interval = cfg.interval()?;
    let default_points: Vec<f64> = (0..=20).map(|i| interval.a() + interval.length() * i as f64 / 20.0).collect();
    let points = cfg.list_or("points", &default_points)?;
    let probes = cfg.list_or("probes", &[])?;
    let mut rows = Vec::with_capacity(points.len());
    for &x in &points {
        if !interval.contains(x) {
            return Err(Failure::Usage(format!("point {x} lies outside [{}, {}]", interval.a(), interval.b())));
        }
        let g = m.expected_exit_time(&interval, x)?;
        let kernel = probes.iter().map(|&y| green_kernel(&interval, x, y)).collect::<Result<Vec<_>, _>>()?;
        rows.push((x, g, kernel));
    }
    let bytes = match format(cfg)? {
        Format::Csv => {
            let mut s = String::from("x,G");
            for y in &probes {
                s.push_str(&format!(",g_{}", sig17(*y)));
            }
            s.push('\n');
            for (x, g, k) in &rows {
                s.push_str(&format!("{},{}", sig17(*x), sig17(*g)));
                for v in k {
                    s.push_str(&format!(",{}", sig17(*v)));
                }
                s.push('\n');
            }
            s.into_bytes()
        }
        Format::Json => to_json_bytes(&json!({
            "interval": [interval.a(), interval.b()],
            "probes": probes,
            "rows": rows.iter().map(|(x, g, k)| json!({ "x": x, "G": g, "g": k })).collect::<Vec<_>>(),
        })),
    };
    emit(cfg, "analytic", &format!("analytic.{}", ext(cfg)?), bytes)
}

fn ext(cfg: &RunConfig) -> Result<&'static str, Failure> {
    Ok(match format(cfg)? {
        Format::Csv => "csv",
        Format::Json => "json",
    })
}

fn reg_config(cfg: &RunConfig, horizon: f64, seed: u64) -> Result<RegConfig, Failure> {
    let eps = cfg.f64_or("epsilon", 0.01)?;
    let mut rc = RegConfig::new(eps, cfg.gamma()?, horizon, cfg.f64_or("x0", 0.0)?, seed);
    if let Some(h) = cfg.opt_f64("step")? {
        rc.step = h;
    }
    rc.validate()?;
    Ok(rc)
}

fn cmd_simulate(cfg: &RunConfig) -> Result<(), Failure> {
    let seed = cfg.seed()?;
    let method = cfg.str_or("method", "time-change").to_string();
    let horizon = cfg.f64_or("horizon", 1.0)?;
    let paths = cfg.u64_or("paths", 1000)?;
    let x0 = cfg.f64_or("x0", 0.0)?;
    let spacing = cfg.f64_or("spacing", 0.005)?;
    let grid_points = cfg.u64_or("grid_points", 0)?;
    if !(horizon > 0.0) {
        return Err(Failure::Usage("horizon must be positive".into()));
    }
    let grid: Vec<f64> = (0..=grid_points).map(|j| horizon * j as f64 / grid_points.max(1) as f64).collect();
    let path_seed = derive_seed(seed, &format!("simulate/{method}"));

    // Either terminal samples (one per path) or trajectories on `grid`.
    let table: Vec<Vec<f64>> = match (method.as_str(), grid_points) {
        ("time-change", 0) => {
            let m = cfg.measure()?;
            sample_batch_at_time(&m, spacing, x0, horizon, path_seed, paths)?.into_iter().map(|x| vec![x]).collect()
        }
        ("time-change", _) => {
            let m = cfg.measure()?;
            let steps = steps_for_horizon(&m, spacing, horizon)?;
            (0..paths)
                .into_par_iter()
                .map(|p| {
                    let walk = simulate_walk(&WalkConfig::new(spacing, steps, x0, path_seed).with_stream(p))?;
                    Ok(sticky_path(&walk, &m, &grid)?.values().to_vec())
                })
                .collect::<Result<_, Error>>()?
        }
        ("regularized", 0) => {
            sample_reg_batch(&reg_config(cfg, horizon, path_seed)?, paths)?.into_iter().map(|x| vec![x]).collect()
        }
        ("regularized", _) => {
            let rc = reg_config(cfg, horizon, path_seed)?;
            (0..paths)
                .into_par_iter()
                .map(|p| {
                    let path = simulate_reg(&rc.with_stream(p))?;
                    let v = path.values();
                    Ok(grid.iter().map(|&t| v[((t / rc.step + 1e-9).floor() as usize).min(v.len() - 1)]).collect())
                })
                .collect::<Result<_, Error>>()?
        }
        (m, _) => return Err(Failure::Usage(format!("method must be time-change or regularized, got {m:?}"))),
    };

    let fmt = format(cfg)?;
    let (name, bytes) = if grid_points == 0 {
        let name = format!("samples.{}", ext(cfg)?);
        let bytes = match fmt {
            Format::Csv => {
                let mut s = String::from("path,x\n");
                for (p, row) in table.iter().enumerate() {
                    s.push_str(&format!("{p},{}\n", sig17(row[0])));
                }
                s.into_bytes()
            }
            Format::Json => to_json_bytes(&json!({ "t": horizon, "x": table.iter().map(|r| r[0]).collect::<Vec<_>>() })),
        };
        (name, bytes)
    } else {
        let name = format!("paths.{}", ext(cfg)?);
        let bytes = match fmt {
            Format::Csv => {
                let mut s = String::from("path,t,x\n");
                for (p, row) in table.iter().enumerate() {
                    for (t, x) in grid.iter().zip(row) {
                        s.push_str(&format!("{p},{},{}\n", sig17(*t), sig17(*x)));
                    }
                }
                s.into_bytes()
            }
            Format::Json => to_json_bytes(&json!({ "t": grid, "x": table })),
        };
        (name, bytes)
    };
    let dir = out_dir(cfg).unwrap_or_else(|| PathBuf::from("."));
    write_outputs(cfg, "simulate", &dir, &[(name, bytes)])
}

fn cmd_couple(cfg: &RunConfig, experiment: Experiment) -> Result<(), Failure> {
    let seed = cfg.seed()?;
    let b = cfg.f64_or("b", 1.0)?;
    let eps = cfg.f64_or("epsilon", 0.04)?;
    let gamma = cfg.gamma()?;
    let trials = cfg.u64_or("trials", 1000)?;
    let with_step = |mut rc: RegConfig| -> Result<RegConfig, Failure> {
        if let Some(h) = cfg.opt_f64("step")? {
            rc.step = h;
        }
        rc.validate_coupled()?;
        Ok(rc)
    };
    match experiment {
        Experiment::Ladder => {
            let horizon = cfg.f64_or("horizon", stickylab::verify::COUPLING_HORIZON)?;
            let ns: Vec<usize> = cfg.list_or("n", &[25.0, 50.0, 100.0])?.iter().map(|&n| n as usize).collect();
            if ns.iter().any(|&n| n == 0) {
                return Err(Failure::Usage("n must be positive integers".into()));
            }
            let rc = with_step(RegConfig::new(eps, gamma, horizon, 0.0, derive_seed(seed, "couple/ladder")))?;
            let reports = verify_est_p1_grid(&rc, &ns, b, trials)?;
            emit_reports(cfg, &reports)
        }
        Experiment::Divergence => {
            let cal = run_calibration(cfg)?;
            let trials_diag = cfg.u64_or("diagnostic_trials", trials)?;
            let rc = with_step(RegConfig::new(eps, gamma, cal.t0, 0.0, derive_seed(seed, "couple/divergence")))?;
            let report = run_divergence_with(&rc, b, &cal, trials, trials_diag)?;
            emit_reports(cfg, &[report])
        }
        Experiment::Trajectory => {
            let horizon = cfg.f64_or("horizon", 1.0)?;
            let rc = with_step(RegConfig::new(eps, gamma, horizon, 0.0, derive_seed(seed, "couple/trajectory")))?;
            let path = simulate_coupled(&rc)?;
            let bytes = match format(cfg)? {
                Format::Csv => {
                    let mut buf = Vec::new();
                    path.write_csv(&mut buf)?;
                    buf
                }
                Format::Json => to_json_bytes(&path),
            };
            emit(cfg, "couple", &format!("coupled_path.{}", ext(cfg)?), bytes)
        }
    }
}

fn emit_reports(cfg: &RunConfig, reports: &[ExperimentReport]) -> Result<(), Failure> {
    let bytes = match format(cfg)? {
        Format::Json => to_json_bytes(&reports),
        Format::Csv => {
            let mut s = String::from("experiment,epsilon,n,trials,estimate,mean,se,ci_half_width,bound\n");
            for r in reports {
                for (name, e) in &r.estimates {
                    s.push_str(&format!(
                        "{},{},{},{},{name},{},{},{},{}\n",
                        r.experiment,
                        sig17(r.parameters.epsilon),
                        r.parameters.n.map_or(String::new(), |n| n.to_string()),
                        r.trials,
                        sig17(e.mean),
                        sig17(e.se),
                        sig17(e.ci_half_width),
                        r.bound.map_or(String::new(), sig17),
                    ));
                }
            }
            s.into_bytes()
        }
    };
    for r in reports {
        if r.insufficient_sample {
            eprintln!("warning: {} uses {} trials; estimates are flagged insufficient", r.experiment, r.trials);
        }
    }
    emit(cfg, "couple", &format!("couple.{}", ext(cfg)?), bytes)
}

fn run_calibration(cfg: &RunConfig) -> Result<Calibration, Failure> {
    let seed = cfg.seed()?;
    let eps = cfg.f64_or("epsilon", 0.04)?;
    let horizon = cfg.f64_or("horizon", stickylab::verify::COUPLING_HORIZON)?;
    let mut rc = RegConfig::new(eps, cfg.gamma()?, horizon, 0.0, derive_seed(seed, "calibrate"));
    if let Some(h) = cfg.opt_f64("step")? {
        rc.step = h;
    }
    Ok(calibrate(
        &rc,
        cfg.f64_or("eta", stickylab::verify::ETA)?,
        cfg.f64_or("beta", stickylab::verify::BETA)?,
        cfg.f64_or("b", 1.0)?,
        cfg.u64_or("pilot_trials", 500)?,
    )?)
}

fn cmd_calibrate(cfg: &RunConfig) -> Result<(), Failure> {
    let cal = run_calibration(cfg)?;
    emit(cfg, "calibrate", "calibration.json", to_json_bytes(&cal))
}

fn cmd_verify(cfg: &RunConfig) -> Result<bool, Failure> {
    let seed = cfg.seed()?;
    let suite: Suite = cfg.str_or("suite", "all").parse()?;
    let budget: Budget = cfg.str_or("budget", "reduced").parse()?;
    let report = run_suite(suite, budget, seed)?;
    for c in &report.checks {
        println!("{}", c.line());
    }
    let passed = report.passed();
    println!("{}", if passed { "verify: all checks passed" } else { "verify: some checks failed" });
    let dir = out_dir(cfg).unwrap_or_else(|| PathBuf::from("."));
    write_outputs(cfg, "verify", &dir, &[("verify-report.json".to_string(), format!("{}\n", report.to_json()).into_bytes())])?;
    Ok(passed)
}
