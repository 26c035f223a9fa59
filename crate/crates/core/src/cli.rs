//! Command-line front end.
//!
//! Exit codes: 0 success, 1 input or data error, 2 infeasible, 3 solver
//! limit, 4 internal error. Output files are written through a temporary
//! file and renamed into place, so a failed run leaves nothing behind.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::analysis::{
    evaluate_plan, evaluation_csv, parse_grid, solve_plan, sweep, sweep_csv, topology_metrics, tradeoff_csv,
    tradeoff_curves, AnalysisError, PlanOutcome, Problem,
};
use crate::case_io::{generate_risk, parse_risk_csv, read_case, read_document, write_document, write_network_json, CaseError};
use crate::formulation::{build_contingency_set, ContingencyPolicy, ContingencySet, FormulationError};
use crate::network::{Network, NetworkError, PlanningParams};
use crate::solver::{Backend, SolveStatus, SolverError, SolverOptions};

#[derive(Debug, Parser)]
#[command(name = "psps", version, about = "Wildfire-aware power shutoff planning")]
pub struct Cli {
    /// Worker threads for contingency evaluation and sweeps (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fuse a Matpower case and a risk CSV into network JSON.
    Convert {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        risk: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a seeded risk CSV for a case.
    Riskgen {
        #[arg(long)]
        case: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve OPS or SC-OPS and write the plan.
    Solve(SolveArgs),
    /// Evaluate a plan against contingencies.
    Evaluate(EvaluateArgs),
    /// α×β grid of SC-OPS solves, or OPS/SC-OPS trade-off curves.
    Sweep(SweepArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProblemArg {
    Ops,
    Scops,
}

#[derive(Debug, Args)]
pub struct CaseArgs {
    /// Network JSON or Matpower file.
    #[arg(long)]
    pub case: PathBuf,
    /// Risk CSV overriding the case's line risks.
    #[arg(long)]
    pub risk: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// `non-bridge` or a contingency-set JSON file.
    #[arg(long, default_value = "non-bridge")]
    pub contingencies: String,
    /// Keep only the first N scenarios.
    #[arg(long)]
    pub max_contingencies: Option<usize>,
    /// Generator flexibility for every generator (default: per-generator values).
    #[arg(long)]
    pub pflex: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// `internal` or `external:<command with {mps} and {sol}>`.
    #[arg(long, default_value = "internal")]
    pub solver: String,
    /// Seconds per MILP solve.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub node_limit: Option<u64>,
    #[arg(long, default_value_t = 1e-6)]
    pub mip_gap: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum)]
    pub problem: ProblemArg,
    #[command(flatten)]
    pub case: CaseArgs,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    #[command(flatten)]
    pub scenarios: ScenarioArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    /// Plan JSON written by `psps solve`.
    #[arg(long)]
    pub plan: PathBuf,
    #[command(flatten)]
    pub scenarios: ScenarioArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    /// `start:stop:step` (inclusive) or a comma list.
    #[arg(long)]
    pub alpha: String,
    /// β grid for an α×β sweep.
    #[arg(long, conflicts_with = "tradeoff", required_unless_present = "tradeoff")]
    pub beta: Option<String>,
    /// Emit OPS and SC-OPS trade-off curves at this β instead of a grid.
    #[arg(long)]
    pub tradeoff: Option<f64>,
    #[command(flatten)]
    pub scenarios: ScenarioArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "PSPS_DATA_DIR", default_value = "psps-data")]
    pub data_dir: PathBuf,
    #[arg(long, env = "PSPS_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "PSPS_WORKERS", default_value_t = 2)]
    pub workers: usize,
    /// Directory of static web assets served at `/`.
    #[arg(long, env = "PSPS_STATIC_DIR")]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("model is infeasible")]
    Infeasible,
    #[error("solver stopped at a {0} limit")]
    Limit(&'static str),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Infeasible => 2,
            CliError::Limit(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

fn input(context: impl Display, e: impl Display) -> CliError {
    CliError::Input(format!("{context}: {e}"))
}

impl From<CaseError> for CliError {
    fn from(e: CaseError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<FormulationError> for CliError {
    fn from(e: FormulationError) -> Self {
        match e {
            FormulationError::AuditFailed(_) => CliError::Internal(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Options(_) | SolverError::Environment(_) | SolverError::OracleTooLarge { .. } => {
                CliError::Input(e.to_string())
            }
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Formulation(f) => f.into(),
            AnalysisError::Solver(s) => s.into(),
            AnalysisError::Input(m) => CliError::Input(m),
            AnalysisError::Unsolved { status, .. } => CliError::Limit(limit_name(status)),
            AnalysisError::Monotonicity(_) => CliError::Internal(e.to_string()),
        }
    }
}

fn limit_name(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::NodeLimit => "node",
        _ => "time",
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| input(path.display(), e))
}

/// Writes `contents` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| input(dir.display(), e))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))?;
    tmp.persist(path).map_err(|e| input(path.display(), e.error))?;
    Ok(())
}

fn load_case(args: &CaseArgs) -> Result<Network, CliError> {
    let mut network = read_case(&read_text(&args.case)?).map_err(|e| input(args.case.display(), e))?;
    if let Some(risk) = &args.risk {
        let table = parse_risk_csv(&read_text(risk)?, &network).map_err(|e| input(risk.display(), e))?;
        table.apply(&mut network)?;
    }
    network.ensure_valid()?;
    Ok(network)
}

fn load_contingencies(network: &Network, args: &ScenarioArgs) -> Result<ContingencySet, CliError> {
    let set = match args.contingencies.as_str() {
        "non-bridge" => build_contingency_set(network, ContingencyPolicy::AllNonBridge)?,
        path => {
            let text = read_text(Path::new(path))?;
            let set: ContingencySet = serde_json::from_str(&text).map_err(|e| input(path, e))?;
            build_contingency_set(network, ContingencyPolicy::Explicit(set.scenarios))?
        }
    };
    Ok(match args.max_contingencies {
        Some(n) => set.truncated(n),
        None => set,
    })
}

fn check_fraction(name: &str, v: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(CliError::Input(format!("--{name} {v} outside [0,1]")))
    }
}

pub fn solver_options(args: &SolverArgs) -> Result<SolverOptions, CliError> {
    let backend = match args.solver.as_str() {
        "internal" => Backend::Internal,
        s => match s.strip_prefix("external:") {
            Some(cmd) => Backend::External(cmd.to_string()),
            None => return Err(CliError::Input(format!("unknown solver `{s}`"))),
        },
    };
    let time_limit = args
        .time_limit
        .map(|t| Duration::try_from_secs_f64(t).map_err(|e| input("--time-limit", e)))
        .transpose()?;
    let options = SolverOptions {
        backend,
        mip_rel_gap: args.mip_gap,
        time_limit,
        node_limit: args.node_limit,
        seed: args.seed,
        ..SolverOptions::default()
    };
    options.validate()?;
    Ok(options)
}

fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

fn run_solve(args: &SolveArgs) -> Result<(), CliError> {
    check_fraction("alpha", args.alpha)?;
    check_fraction("beta", args.beta)?;
    if let Some(f) = args.scenarios.pflex {
        check_fraction("pflex", f)?;
    }
    let network = load_case(&args.case)?;
    let problem = match args.problem {
        ProblemArg::Ops => Problem::Ops,
        ProblemArg::Scops => Problem::Scops,
    };
    let contingencies = match problem {
        Problem::Ops => ContingencySet::empty(),
        Problem::Scops => load_contingencies(&network, &args.scenarios)?,
    };
    let mut params = PlanningParams::new(args.alpha, args.beta);
    params.flex_override = args.scenarios.pflex;
    let options = solver_options(&args.solver)?;
    let outcome = solve_plan(&network, problem, &params, &contingencies, &options)?;
    write_atomic(&args.out, &write_document(&outcome))?;
    print_solve_summary(&network, &outcome);
    status_result(outcome.status)
}

fn status_result(status: SolveStatus) -> Result<(), CliError> {
    match status {
        SolveStatus::Optimal => Ok(()),
        SolveStatus::Infeasible => Err(CliError::Infeasible),
        SolveStatus::TimeLimit => Err(CliError::Limit("time")),
        SolveStatus::NodeLimit => Err(CliError::Limit("node")),
        SolveStatus::Unbounded => Err(CliError::Internal("model is unbounded".into())),
    }
}

fn print_solve_summary(network: &Network, outcome: &PlanOutcome) {
    println!("problem            {}", outcome.problem.as_str());
    println!("status             {}", outcome.status.as_str());
    let Some(plan) = &outcome.plan else {
        println!("wall time          {:.3}s", outcome.wall_time);
        return;
    };
    let s = &plan.summary;
    println!("load served        {}", pct(s.load_served_fraction));
    println!("active risk        {}", pct(s.active_risk));
    match s.worst_additional_shed {
        Some(g) => println!("worst added shed   at most {} over {} scenarios", pct(g), outcome.contingency_count),
        None => println!("worst added shed   n/a"),
    }
    if let Ok(t) = topology_metrics(network, plan) {
        println!(
            "topology           {} energized lines, {} islands{}",
            t.energized_line_count,
            t.island_count,
            if t.radial { ", radial" } else { "" }
        );
    }
    println!("wall time          {:.3}s", outcome.wall_time);
}

fn run_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    if let Some(f) = args.scenarios.pflex {
        check_fraction("pflex", f)?;
    }
    let network = load_case(&args.case)?;
    let doc: PlanOutcome = read_document(&read_text(&args.plan)?).map_err(|e| input(args.plan.display(), e))?;
    let plan = doc
        .plan
        .ok_or_else(|| CliError::Input(format!("{}: plan file has no plan ({})", args.plan.display(), doc.status.as_str())))?;
    let contingencies = load_contingencies(&network, &args.scenarios)?;
    let options = solver_options(&args.solver)?;
    let started = Instant::now();
    let report = evaluate_plan(&network, &plan, &contingencies, args.scenarios.pflex, &options)?;
    write_atomic(&args.out, &write_document(&report))?;
    if let Some(csv) = &args.csv {
        write_atomic(csv, &evaluation_csv(&report))?;
    }
    println!("scenarios          {}", report.contingencies.len());
    println!("load served        {}", pct(plan.summary.load_served_fraction));
    println!("active risk        {}", pct(plan.summary.active_risk));
    match &report.worst_case {
        Some(w) => println!("worst added shed   {} (contingency {})", pct(w.gamma), w.contingency),
        None => println!("worst added shed   n/a"),
    }
    println!("wall time          {:.3}s", started.elapsed().as_secs_f64());
    Ok(())
}

fn run_sweep(args: &SweepArgs) -> Result<(), CliError> {
    if let Some(f) = args.scenarios.pflex {
        check_fraction("pflex", f)?;
    }
    let network = load_case(&args.case)?;
    let alpha = parse_grid(&args.alpha)?;
    let contingencies = load_contingencies(&network, &args.scenarios)?;
    let options = solver_options(&args.solver)?;
    let started = Instant::now();
    let flex = args.scenarios.pflex;
    match (&args.beta, args.tradeoff) {
        (_, Some(beta)) => {
            let curves = tradeoff_curves(&network, &alpha, beta, flex, &contingencies, &options)?;
            write_atomic(&args.out, &write_document(&curves))?;
            if let Some(csv) = &args.csv {
                write_atomic(csv, &tradeoff_csv(&curves))?;
            }
            println!("alpha        ops risk   scops risk  ops worst shed");
            for (o, s) in curves.ops.iter().zip(&curves.scops) {
                let show = |v: Option<f64>| v.map(pct).unwrap_or_else(|| "-".into());
                println!(
                    "{:<12} {:<10} {:<11} {}",
                    o.alpha,
                    show(o.active_risk),
                    show(s.active_risk),
                    show(o.worst_gamma)
                );
            }
        }
        (Some(beta), None) => {
            let beta = parse_grid(beta)?;
            let result = sweep(&network, &alpha, &beta, flex, &contingencies, &options)?;
            write_atomic(&args.out, &write_document(&result))?;
            if let Some(csv) = &args.csv {
                write_atomic(csv, &sweep_csv(&result))?;
            }
            print!("alpha \\ beta");
            for b in &result.beta_axis {
                print!(" {b:>8}");
            }
            println!();
            for row in &result.cells {
                print!("{:<12}", row[0].alpha);
                for c in row {
                    let text = match c.active_risk {
                        Some(r) => pct(r),
                        None => c.status.as_str().to_string(),
                    };
                    print!(" {text:>8}");
                }
                println!();
            }
        }
        (None, None) => return Err(CliError::Input("give --beta or --tradeoff".into())),
    }
    println!("wall time          {:.3}s", started.elapsed().as_secs_f64());
    Ok(())
}

fn run_serve(args: &ServeArgs) -> Result<(), CliError> {
    let config = crate::service::ServiceConfig {
        data_dir: args.data_dir.clone(),
        workers: args.workers.max(1),
        static_dir: args.static_dir.clone(),
        solver: solver_options(&args.solver)?,
    };
    let addr = format!("{}:{}", args.host, args.port);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
    runtime
        .block_on(crate::service::serve(config, &addr))
        .map_err(|e| CliError::Input(e.to_string()))
}

/// Runs one invocation. Exposed for tests; `main` maps the error to an exit code.
pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        // Fails only if the pool was already built, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match &cli.command {
        Command::Convert { case, risk, out } => {
            let network = load_case(&CaseArgs {
                case: case.clone(),
                risk: risk.clone(),
            })?;
            let mut text = write_network_json(&network);
            text.push('\n');
            write_atomic(out, &text)?;
            println!(
                "{} buses, {} lines, {} generators, {} loads",
                network.buses.len(),
                network.lines.len(),
                network.generators.len(),
                network.loads.len()
            );
            Ok(())
        }
        Command::Riskgen { case, seed, out } => {
            let network = read_case(&read_text(case)?).map_err(|e| input(case.display(), e))?;
            write_atomic(out, &generate_risk(&network, *seed).to_csv())?;
            Ok(())
        }
        Command::Solve(args) => run_solve(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Serve(args) => run_serve(args),
    }
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("psps: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
