//! `lncg`: generate instances, solve relaxations, round, estimate rounding
//! constants and run experiment sweeps.
//!
//! Exit codes: 1 configuration, 2 I/O or parse, 3 numerical failure, 4 qubit budget.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use lncg::approx_ratio::{mc_alpha, CSV_HEADER};
use lncg::engine::{
    evolve, gram_matrix, initial_product_state, load_state, max_eigenpair_stats, write_state, AnnealSchedule,
    StateVector, LANCZOS_MAX_ITER, LANCZOS_TOL,
};
use lncg::experiment::{run_experiment, write_csv, ExperimentConfig, CR_ORIENTATION, VERSION};
use lncg::hamiltonian::{build_h_with_budget, regularize, DEFAULT_QUBIT_BUDGET};
use lncg::instance::{gen_group_sync, gen_procrustes, instance_to_json, load_instance, ProblemInstance};
use lncg::rng::{derive_seed, RNG_ALGORITHM};
use lncg::rounding::{round_cr, round_gw, round_vr, solution_to_json as rounded_to_json, DEFAULT_TRIALS};
use lncg::sdp::{factorize, solution_from_json, solution_to_json, solve_basic, solve_conv_so, SolverConfig};
use lncg::{Error, Group, Result};

#[derive(Parser, Debug)]
#[command(name = "lncg", version, about = "Quantum relaxation of quadratic programs over O(n) and SO(n)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a problem instance.
    Gen(GenArgs),
    /// Solve a relaxation of a saved instance.
    Solve(SolveArgs),
    /// Round a saved relaxed solution.
    Round(RoundArgs),
    /// Monte Carlo estimate of the Gaussian rounding constant.
    Alpha(AlphaArgs),
    /// Run an experiment sweep and emit CSV.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Sync,
    Procrustes,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "sync")]
    kind: Kind,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    degree: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value = "SO", value_parser = parse_group)]
    group: Group,
    /// Point clouds per vertex for Procrustes instances.
    #[arg(long, default_value_t = 5)]
    clouds: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Solver {
    Sdp,
    Convsdp,
    Eig,
    Anneal,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    solver: Solver,
    /// Strength of the one-body regularizer added to the Hamiltonian.
    #[arg(long, default_value_t = 0.0)]
    zeta: f64,
    /// Total anneal time.
    #[arg(long, default_value_t = 1.0)]
    time: f64,
    /// Gaussian rounding trials for the anneal's initial state.
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_QUBIT_BUDGET)]
    qubit_budget: usize,
    /// SDP settings as a JSON file.
    #[arg(long)]
    solver_config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Rounder {
    Cr,
    Vr,
    Gw,
}

#[derive(Args, Debug)]
struct RoundArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    instance: PathBuf,
    /// State file for `cr`/`vr`, SDP solution file for `gw`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    rounder: Rounder,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
}

#[derive(Args, Debug)]
struct AlphaArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "SO", value_parser = parse_group)]
    group: Group,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config; fields left out take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Fill the wall_ms column.
    #[arg(long)]
    record_wall_time: bool,
}

fn parse_group(s: &str) -> std::result::Result<Group, String> {
    s.parse::<Group>().map_err(|e| e.to_string())
}

fn metadata(command: &str, args: Value) -> Value {
    json!({
        "tool": "lncg",
        "version": VERSION,
        "command": command,
        "args": args,
        "rng": RNG_ALGORITHM,
    })
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let inst = match a.kind {
        Kind::Sync => gen_group_sync(a.m, a.degree, a.n, a.sigma, a.group, a.common.seed)?,
        Kind::Procrustes => gen_procrustes(a.m, a.clouds, a.n, a.common.seed)?,
    };
    let meta = metadata(
        "gen",
        json!({
            "kind": format!("{:?}", a.kind).to_lowercase(),
            "m": a.m, "n": a.n, "degree": a.degree, "sigma": a.sigma,
            "group": a.group.to_string(), "clouds": a.clouds, "seed": a.common.seed,
        }),
    );
    emit(&a.common.out, &instance_to_json(&inst, Some(meta))?)
}

fn load_solver_config(path: &Option<PathBuf>) -> Result<SolverConfig> {
    match path {
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
        None => Ok(SolverConfig::default()),
    }
}

/// Best-of-trials Gaussian rounding of the basic SDP, the anneal's starting point.
fn gw_start(inst: &ProblemInstance, cfg: &SolverConfig, trials: usize, seed: u64) -> Result<Vec<nalgebra::DMatrix<f64>>> {
    let sol = solve_basic(inst, cfg)?;
    let factors = factorize(&sol.m_mat, inst.n)?;
    Ok(round_gw(&factors, inst, trials, derive_seed(seed, 1))?.matrices)
}

fn state_meta(meta: &Value, extra: &[(&str, String)]) -> Vec<String> {
    let mut lines = vec![format!("meta: {meta}")];
    lines.extend(extra.iter().map(|(k, v)| format!("{k}: {v}")));
    lines
}

fn write_state_out(out: &Option<PathBuf>, psi: &StateVector, meta: &[String]) -> Result<()> {
    match out {
        Some(p) => write_state(psi, meta, io::BufWriter::new(fs::File::create(p)?)),
        None => write_state(psi, meta, io::BufWriter::new(io::stdout().lock())),
    }
}

fn cmd_solve(a: &SolveArgs) -> Result<()> {
    if !(a.zeta >= 0.0) || !(a.time > 0.0) || a.trials == 0 {
        return Err(Error::InvalidArgument("need zeta >= 0, time > 0 and trials > 0".into()));
    }
    let inst = load_instance(&a.instance)?;
    let cfg = load_solver_config(&a.solver_config)?;
    let meta = metadata(
        "solve",
        json!({
            "instance": a.instance.display().to_string(),
            "solver": format!("{:?}", a.solver).to_lowercase(),
            "zeta": a.zeta, "time": a.time, "trials": a.trials,
            "qubit_budget": a.qubit_budget, "solver_config": cfg, "seed": a.common.seed,
        }),
    );
    match a.solver {
        Solver::Sdp | Solver::Convsdp => {
            let sol = if a.solver == Solver::Sdp {
                solve_basic(&inst, &cfg)?
            } else {
                solve_conv_so(&inst, &cfg)?
            };
            emit(&a.common.out, &solution_to_json(&sol, inst.n, &cfg, Some(meta))?)
        }
        Solver::Eig | Solver::Anneal => {
            let h = build_h_with_budget(&inst, a.qubit_budget)?;
            let h = if a.zeta > 0.0 { regularize(&h, a.zeta)? } else { h };
            if a.solver == Solver::Eig {
                let eig = max_eigenpair_stats(&h.operator, LANCZOS_TOL, LANCZOS_MAX_ITER)?;
                eprintln!("max eigenvalue {:.12}", eig.value);
                let lines = state_meta(
                    &meta,
                    &[
                        ("eigenvalue", format!("{:.17e}", eig.value)),
                        ("iterations", eig.iterations.to_string()),
                    ],
                );
                write_state_out(&a.common.out, &eig.state, &lines)
            } else {
                let rs = gw_start(&inst, &cfg, a.trials, a.common.seed)?;
                let (psi0, h_i) = initial_product_state(&inst, &rs)?;
                let schedule = AnnealSchedule::auto(a.time, &h_i, &h.operator);
                let psi = evolve(&h_i, &h.operator, &schedule, &psi0)?;
                let energy = psi.energy(&h.operator);
                eprintln!("final energy {energy:.12}");
                let lines = state_meta(
                    &meta,
                    &[("energy", format!("{energy:.17e}")), ("steps", schedule.steps.to_string())],
                );
                write_state_out(&a.common.out, &psi, &lines)
            }
        }
    }
}

fn cmd_round(a: &RoundArgs) -> Result<()> {
    let inst = load_instance(&a.instance)?;
    let sol = match a.rounder {
        Rounder::Cr | Rounder::Vr => {
            let psi = load_state(&a.input)?;
            let report = gram_matrix(&psi, &inst)?;
            if a.rounder == Rounder::Cr {
                round_cr(&report, &inst)?
            } else {
                round_vr(&report, &inst)?
            }
        }
        Rounder::Gw => {
            let (sdp, n) = solution_from_json(&fs::read_to_string(&a.input)?)?;
            if n != inst.n || sdp.m_mat.nrows() != inst.m() * n {
                return Err(Error::InvalidArgument("SDP solution does not match the instance".into()));
            }
            round_gw(&factorize(&sdp.m_mat, n)?, &inst, a.trials, a.common.seed)?
        }
    };
    eprintln!("objective {:.12}", sol.objective_value);
    let meta = metadata(
        "round",
        json!({
            "instance": a.instance.display().to_string(),
            "input": a.input.display().to_string(),
            "rounder": format!("{:?}", a.rounder).to_lowercase(),
            "trials": a.trials, "seed": a.common.seed, "cr_orientation": CR_ORIENTATION,
        }),
    );
    emit(&a.common.out, &rounded_to_json(&sol, Some(meta))?)
}

fn comment_header(meta: &Value) -> String {
    format!("# lncg {VERSION}\n# timestamp: {}\n# meta: {meta}\n", timestamp())
}

fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn cmd_alpha(a: &AlphaArgs) -> Result<()> {
    let est = mc_alpha(a.n, a.group, a.samples, a.common.seed)?;
    let meta = metadata(
        "alpha",
        json!({ "n": a.n, "group": a.group.to_string(), "samples": a.samples, "seed": a.common.seed }),
    );
    let text = format!("{}{CSV_HEADER}\n{}\n", comment_header(&meta), est.csv_row());
    emit(&a.common.out, &text)
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::from_json(&fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.record_wall_time |= a.record_wall_time;
    let report = run_experiment(&cfg)?;
    if report.skipped() > 0 {
        eprintln!("{} slot(s) skipped after failed screening", report.skipped());
    }
    let mut buf = Vec::new();
    write_csv(&report, &cfg, timestamp(), &mut buf)?;
    emit(&a.out, &String::from_utf8_lossy(&buf))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Round(a) => cmd_round(a),
        Command::Alpha(a) => cmd_alpha(a),
        Command::Experiment(a) => cmd_experiment(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
