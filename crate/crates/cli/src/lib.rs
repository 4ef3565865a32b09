//! Command-line front end: `solve`, `sweep`, `check` and `export`.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 solver failure,
//! 3 failed concentration verdict, 4 failed hypothesis check.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod fieldio;
pub mod report;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use gkp_core::concentration::{sweep_with, SweepOptions};
use gkp_core::model::{check_h, check_v};
use gkp_core::regularity::regularity_report;
use gkp_core::{check_concentration, solve, Error, Field, GroundState, Grid, PowerLaw, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_VERDICT: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

/// Rings used for the decay profile in regularity reports.
pub const DECAY_RINGS: usize = 10;

#[derive(Debug, Parser)]
#[command(name = "gkp", version, about = "Ground-state solitary waves of the generalized KP equation")]
pub struct Cli {
    /// Configuration file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for independent solves.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Random seed; overrides the config `seed`.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute one ground state at the configured ε.
    Solve,
    /// Run the ε-continuation sweep and the concentration verdict.
    Sweep,
    /// Validate the nonlinearity, the potential and the energy gradient.
    Check,
    /// Convert a GKP1 field file to x,y,u CSV.
    Export {
        /// Field file to convert.
        field: PathBuf,
    },
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

type Outcome = Result<(), Failure>;

fn fail(code: i32, message: impl std::fmt::Display) -> Failure {
    Failure {
        code,
        message: message.to_string(),
    }
}

fn io_fail(path: &Path, e: impl std::fmt::Display) -> Failure {
    fail(EXIT_CONFIG, format!("{}: {e}", path.display()))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run_cli(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}

pub fn run_cli(cli: Cli) -> i32 {
    let outcome = match cli.threads {
        Some(0) => Err(fail(EXIT_CONFIG, "--threads must be at least 1")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(fail(EXIT_CONFIG, format!("thread pool: {e}"))),
        },
        None => dispatch(&cli),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Export { field } => export(field, cli.out.as_deref()),
        cmd => {
            let cfg = load_config(cli)?;
            match cmd {
                Command::Solve => cmd_solve(&cfg),
                Command::Sweep => cmd_sweep(&cfg),
                Command::Check => cmd_check(&cfg),
                Command::Export { .. } => unreachable!(),
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| fail(EXIT_CONFIG, e))?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

pub fn build_problem(cfg: &RunConfig) -> Result<Problem, Error> {
    let g = &cfg.grid;
    let grid = Arc::new(Grid::new(g.lx, g.ly, g.nx, g.ny)?);
    let h = PowerLaw::new(cfg.model.p)
        .ok_or_else(|| Error::InvalidArgument(format!("p = {} outside (0, 4)", cfg.model.p)))?;
    Problem::new(grid, Arc::new(h), cfg.potential.clone(), cfg.model.eps)
}

fn output_dir(cfg: &RunConfig) -> Result<&Path, Failure> {
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))?;
    Ok(dir)
}

#[derive(Serialize)]
struct Summary<'a> {
    eps: f64,
    p: f64,
    #[serde(flatten)]
    state: &'a GroundState,
    /// Sign pattern of the computed state; positivity is not enforced.
    min_u: f64,
    max_u: f64,
    config: &'a RunConfig,
}

fn summary<'a>(cfg: &'a RunConfig, gs: &'a GroundState) -> Summary<'a> {
    let vals = gs.u.values();
    Summary {
        eps: cfg.model.eps,
        p: cfg.model.p,
        state: gs,
        min_u: vals.iter().cloned().fold(f64::INFINITY, f64::min),
        max_u: vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        config: cfg,
    }
}

/// Writes `<stem>.gkp` and `<report>.json`.
fn write_state(dir: &Path, stem: &str, report_name: &str, problem: &Problem, gs: &GroundState) -> Outcome {
    let field_path = dir.join(format!("{stem}.gkp"));
    fieldio::write_field(&field_path, &gs.u).map_err(|e| io_fail(&field_path, e))?;
    let reg = regularity_report(problem, &gs.u, DECAY_RINGS, None).map_err(|e| fail(EXIT_SOLVER, e))?;
    let reg_path = dir.join(format!("{report_name}.json"));
    report::write_json(&reg_path, &reg).map_err(|e| io_fail(&reg_path, e))
}

fn regime_warning(p: f64) {
    if !(p > 1.0 && p < 4.0) {
        eprintln!("warning: existence-only regime p ∉ (1,4), regularity unguaranteed");
    }
}

fn cmd_solve(cfg: &RunConfig) -> Outcome {
    let problem = build_problem(cfg).map_err(|e| fail(EXIT_CONFIG, e))?;
    regime_warning(cfg.model.p);
    let dir = output_dir(cfg)?;
    let summary_path = dir.join("summary.json");
    let gs = match solve(&problem, &cfg.solver_config()) {
        Ok(gs) => gs,
        Err(Error::NotConverged { state, .. }) => {
            report::write_json(&summary_path, &summary(cfg, &state)).map_err(|e| io_fail(&summary_path, e))?;
            return Err(fail(
                EXIT_SOLVER,
                format!(
                    "no convergence after {} iterations (residual {:.3e})",
                    state.iterations, state.residual
                ),
            ));
        }
        Err(e) => return Err(fail(EXIT_SOLVER, e)),
    };
    report::write_json(&summary_path, &summary(cfg, &gs)).map_err(|e| io_fail(&summary_path, e))?;
    write_state(dir, "field", "regularity", &problem, &gs)?;
    println!(
        "c = {:.12e}  residual = {:.3e}  nehari = {:.3e}  iterations = {}  argmax = ({}, {})",
        gs.c, gs.residual, gs.nehari_residual, gs.iterations, gs.argmax.x, gs.argmax.y
    );
    if !gs.converged {
        return Err(fail(EXIT_SOLVER, "state does not meet the convergence tolerances"));
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    verdict: &'a gkp_core::Verdict,
    report: &'a gkp_core::SweepReport,
    config: &'a RunConfig,
}

fn cmd_sweep(cfg: &RunConfig) -> Outcome {
    let eps_list = cfg
        .sweep
        .eps_list
        .as_deref()
        .ok_or_else(|| fail(EXIT_CONFIG, "config key `sweep.eps_list`: required by the sweep command"))?;
    let problem = build_problem(cfg).map_err(|e| fail(EXIT_CONFIG, e))?;
    regime_warning(cfg.model.p);
    let dir = output_dir(cfg)?;
    let opts = SweepOptions {
        warm_start: cfg.sweep.warm_start,
        min_core_points: cfg.sweep.min_core_points,
        ..SweepOptions::default()
    };
    let mut write_err = None;
    let mut k = 0;
    let result = sweep_with(&problem, eps_list, &cfg.solver_config(), &opts, |pb, gs| {
        if write_err.is_none() {
            write_err = write_state(dir, &format!("field_eps{k}"), &format!("regularity_eps{k}"), pb, gs).err();
        }
        k += 1;
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    let csv_path = dir.join("sweep.csv");
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            fs::write(&csv_path, report::sweep_csv(&e.partial)).map_err(|err| io_fail(&csv_path, err))?;
            return Err(fail(EXIT_SOLVER, e));
        }
    };
    fs::write(&csv_path, report::sweep_csv(&report)).map_err(|e| io_fail(&csv_path, e))?;
    let verdict = check_concentration(&report, cfg.sweep.tol_level, cfg.sweep.tol_v);
    let verdict_path = dir.join("verdict.json");
    report::write_json(
        &verdict_path,
        &SweepOutput {
            verdict: &verdict,
            report: &report,
            config: cfg,
        },
    )
    .map_err(|e| io_fail(&verdict_path, e))?;
    print!("{}", report::sweep_csv(&report));
    println!(
        "c0 = {:.12e}  c_inf = {:.12e}  level gap = {:.3e}  V gap = {:.3e}  c_inf margin = {:.3e}",
        report.c0, report.c_inf, verdict.level_gap, verdict.v_gap, verdict.c_inf_margin
    );
    for n in &verdict.notes {
        println!("note: {n}");
    }
    if verdict.passed {
        println!("verdict: PASS");
        Ok(())
    } else {
        let mut failed = Vec::new();
        if !verdict.level_ok {
            failed.push("level");
        }
        if !verdict.v_ok {
            failed.push("V(eps q)");
        }
        if !verdict.below_c_inf_ok {
            failed.push("c < c_inf");
        }
        let reason = if report.v0 <= report.v_inf {
            "no concentration regime (V_inf >= V0)".to_string()
        } else {
            format!("failed: {}", failed.join(", "))
        };
        println!("verdict: FAIL ({reason})");
        Err(fail(EXIT_VERDICT, format!("concentration verdict failed: {reason}")))
    }
}

/// Outcome of the directional-derivative check of the energy.
#[derive(Clone, Debug, Serialize)]
pub struct GradientCheck {
    pub directions: usize,
    pub worst_relative_error: f64,
    pub passed: bool,
}

/// Compares symmetric differences of the energy with the pairing along
/// random directions on a 16×16 copy of the configured problem.
pub fn gradient_check(cfg: &RunConfig, directions: usize) -> Result<GradientCheck, Error> {
    let small = RunConfig {
        grid: config::GridConfig {
            nx: 16,
            ny: 16,
            ..cfg.grid.clone()
        },
        ..cfg.clone()
    };
    let problem = build_problem(&small)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let random = |rng: &mut ChaCha8Rng| {
        let vals = (0..problem.grid().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Field::from_values(problem.grid(), vals).map(|f| f.project_admissible())
    };
    let u = random(&mut rng)?;
    let delta = 1e-5;
    let mut worst = 0.0_f64;
    for _ in 0..directions {
        let v = random(&mut rng)?;
        let fd = (problem.energy(&u.axpy(delta, &v)?)? - problem.energy(&u.axpy(-delta, &v)?)?) / (2.0 * delta);
        let exact = problem.pairing(&u, &v)?;
        worst = worst.max((fd - exact).abs() / exact.abs().max(f64::MIN_POSITIVE));
    }
    Ok(GradientCheck {
        directions,
        worst_relative_error: worst,
        passed: worst < 1e-6,
    })
}

#[derive(Serialize)]
struct CheckOutput {
    h: gkp_core::model::HCheckReport,
    v: gkp_core::model::VCheckReport,
    gradient: GradientCheck,
    regularity_regime: bool,
    passed: bool,
}

fn cmd_check(cfg: &RunConfig) -> Outcome {
    let problem = build_problem(cfg).map_err(|e| fail(EXIT_CONFIG, e))?;
    regime_warning(cfg.model.p);
    let samples: Vec<f64> = (-30..=30).filter(|&k| k != 0).map(|k| k as f64 * 0.1).collect();
    let h = check_h(problem.nonlinearity(), &samples);
    let v = check_v(problem.potential());
    let gradient = gradient_check(cfg, 20).map_err(|e| fail(EXIT_CHECK, e))?;
    let passed = h.passed && v.passed && gradient.passed;
    println!(
        "h: AR margin {:.3e} ({}), monotonicity margin {:.3e} ({})",
        h.ar_margin,
        verdict_word(h.ar_pass),
        h.monotone_margin,
        verdict_word(h.monotone_pass)
    );
    println!(
        "V: V0 = {}, V_inf = {}, V_inf < V0 ({}), min sampled V = {:.3e} ({})",
        v.v0,
        v.v_inf,
        verdict_word(v.concentration_pass),
        v.min_sampled,
        verdict_word(v.nonnegative_pass)
    );
    for flag in &v.flags {
        println!("V: {flag}");
    }
    println!(
        "gradient: worst relative error {:.3e} over {} directions ({})",
        gradient.worst_relative_error,
        gradient.directions,
        verdict_word(gradient.passed)
    );
    let dir = output_dir(cfg)?;
    let path = dir.join("check.json");
    report::write_json(
        &path,
        &CheckOutput {
            h,
            v,
            gradient,
            regularity_regime: cfg.model.p > 1.0 && cfg.model.p < 4.0,
            passed,
        },
    )
    .map_err(|e| io_fail(&path, e))?;
    if passed {
        Ok(())
    } else {
        Err(fail(EXIT_CHECK, "one or more checks failed"))
    }
}

fn verdict_word(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn export(field_path: &Path, out: Option<&Path>) -> Outcome {
    let field = fieldio::read_field(field_path).map_err(|e| io_fail(field_path, e))?;
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => field_path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(&dir).map_err(|e| io_fail(&dir, e))?;
    }
    let stem = field_path.file_stem().and_then(|s| s.to_str()).unwrap_or("field");
    let path = dir.join(format!("{stem}.csv"));
    fs::write(&path, report::field_csv(&field)).map_err(|e| io_fail(&path, e))?;
    println!("{}", path.display());
    Ok(())
}
