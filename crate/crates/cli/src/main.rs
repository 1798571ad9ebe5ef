//! dirac-split: run one evolution, sweep a convergence table, check the
//! invariant suite, or manage the reference cache.
//!
//! Errors leave as one JSON object on stderr. Exit 2 means the config was
//! rejected before any compute, exit 1 means the run itself failed (or a
//! property check did not hold).

mod config;

use clap::{Args, Parser, Subcommand};
use config::{resolve, FileConfig, FlagOverrides, ResolvedRun, CACHE_ENV};
use dirac_split::cache::{ReferenceCache, ReferenceSpec};
use dirac_split::check::run_property_suite;
use dirac_split::dirac::{mass, relative_l2_error, MatrixFault, SimParams};
use dirac_split::sweep::{self, SweepRequest};
use dirac_split::{split, Error};
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "dirac-split",
    version,
    about = "Time-splitting spectral solver for the Dirac equation in the nonrelativistic regime"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One evolution at a single (epsilon, tau); prints a JSON summary.
    Run(ProblemArgs),
    /// Error table over the full (epsilon, tau) grid; writes CSV and JSON.
    Sweep(ProblemArgs),
    /// Reference-free invariant suite; exit 0 iff every property holds.
    Check(CheckArgs),
    /// Reference cache maintenance.
    Cache(CacheCmd),
}

#[derive(Args)]
struct ProblemArgs {
    /// TOML config file; command-line flags override its fields.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Named problem: example1, example2, example3, example3nr.
    #[arg(long)]
    preset: Option<String>,

    /// s1 (Lie-Trotter) or s2 (Strang). Default s2.
    #[arg(long)]
    scheme: Option<String>,

    /// desk (minutes) or full (published resolutions, hours). Default desk.
    #[arg(long)]
    profile: Option<String>,

    /// Shorthand for --profile full.
    #[arg(long, conflicts_with = "profile")]
    full: bool,

    /// Epsilon row; repeat for several. Defaults to the preset's list.
    #[arg(long = "epsilon", value_name = "EPS")]
    epsilon: Vec<f64>,

    /// Explicit step size; repeat for several. Accepts pi literals (pi/4, 2pi).
    #[arg(long = "tau", value_name = "TAU")]
    tau: Vec<String>,

    /// Ladder start; with --ratio and --levels overrides the preset ladder.
    #[arg(long, value_name = "TAU")]
    tau0: Option<String>,

    /// Ladder shrink factor between levels.
    #[arg(long)]
    ratio: Option<f64>,

    /// Number of ladder levels.
    #[arg(long)]
    levels: Option<usize>,

    /// Resonance-classification threshold. Default 0.01.
    #[arg(long)]
    delta: Option<f64>,

    /// Output directory for tables and summaries. Default ./runs.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads; capped by the number of sweep cells.
    #[arg(long)]
    workers: Option<usize>,

    /// Reference cache directory (default: $DIRAC_SPLIT_CACHE, then {out}/cache).
    #[arg(long, value_name = "DIR")]
    cache: Option<PathBuf>,

    /// Fail on a cache miss instead of computing the reference.
    #[arg(long)]
    no_compute_references: bool,

    /// Skip the reference entirely; the run summary then has no error field.
    #[arg(long, conflicts_with = "no_compute_references")]
    no_reference: bool,

    /// Print the fully resolved config as TOML and exit without computing.
    #[arg(long)]
    dump_config: bool,

    // Inline problem description, used instead of --preset. The initial-data
    // id fixes the dimension: gaussian-pair is 1D, gaussian-quartet 2D.
    /// Inline problem: lower box edge (every axis).
    #[arg(long, value_name = "X", allow_negative_numbers = true)]
    lo: Option<f64>,

    /// Inline problem: upper box edge (every axis).
    #[arg(long, value_name = "X", allow_negative_numbers = true)]
    hi: Option<f64>,

    /// Inline problem: grid nodes per axis.
    #[arg(long, value_name = "M")]
    points: Option<usize>,

    /// Inline problem: potential id (zero, const:<v>, rational-ramp, honeycomb).
    #[arg(long)]
    potential: Option<String>,

    /// Inline problem: initial data id (gaussian-pair, gaussian-quartet).
    #[arg(long)]
    initial: Option<String>,

    /// Inline problem: final time.
    #[arg(long, value_name = "T")]
    t_final: Option<f64>,

    /// Inline problem: reference step count. Default 20000.
    #[arg(long, value_name = "N")]
    ref_steps: Option<usize>,
}

impl ProblemArgs {
    fn overrides(&self) -> FlagOverrides {
        FlagOverrides {
            preset: self.preset.clone(),
            scheme: self.scheme.clone(),
            profile: self.profile.clone(),
            full: self.full,
            epsilon: self.epsilon.clone(),
            tau: self.tau.clone(),
            tau0: self.tau0.clone(),
            ratio: self.ratio,
            levels: self.levels,
            delta: self.delta,
            out: self.out.clone(),
            workers: self.workers,
            cache: self.cache.clone(),
            no_compute_references: self.no_compute_references,
            lo: self.lo,
            hi: self.hi,
            points: self.points,
            potential: self.potential.clone(),
            initial: self.initial.clone(),
            t_final: self.t_final,
            ref_steps: self.ref_steps,
        }
    }
}

#[derive(Args)]
struct CheckArgs {
    /// Deliberately corrupt sigma2 so the algebra check has to fail.
    #[arg(long, hide = true, value_name = "FAULT")]
    fault: Option<String>,
}

#[derive(Args)]
struct CacheCmd {
    #[command(subcommand)]
    action: CacheAction,
}

#[derive(Subcommand)]
enum CacheAction {
    /// Print every cached reference with its manifest summary.
    List(CacheArgs),
    /// Delete every cached reference.
    Clear(CacheArgs),
}

#[derive(Args)]
struct CacheArgs {
    /// Cache directory (default: $DIRAC_SPLIT_CACHE, then {out}/cache).
    #[arg(long, value_name = "DIR")]
    cache: Option<PathBuf>,

    /// Output directory the default cache hangs under. Default ./runs.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

/// Config failures exit 2, runtime failures exit 1; both leave a single
/// JSON object on stderr.
enum Failure {
    Config(Vec<String>),
    Runtime(String),
}

impl Failure {
    fn exit(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn report(&self) -> ExitCode {
        let (kind, messages) = match self {
            Failure::Config(list) => ("config", list.clone()),
            Failure::Runtime(msg) => ("runtime", vec![msg.clone()]),
        };
        let doc = serde_json::json!({
            "error": { "kind": kind, "exit": self.exit(), "messages": messages }
        });
        eprintln!("{doc}");
        ExitCode::from(self.exit())
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Core validation joins its messages with "; "; unpack them so the
/// all-at-once contract survives the round trip through Error.
fn config_failure(e: Error) -> Failure {
    match e {
        Error::Param(msg) => Failure::Config(msg.split("; ").map(String::from).collect()),
        other => Failure::Config(vec![other.to_string()]),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Check(args) => cmd_check(args),
        Command::Cache(cmd) => cmd_cache(cmd),
    };
    match outcome {
        Ok(code) => code,
        Err(failure) => failure.report(),
    }
}

fn load_and_resolve(args: &ProblemArgs) -> Result<ResolvedRun, Failure> {
    let file = match &args.config {
        None => FileConfig::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(vec![format!("config {}: {e}", path.display())]))?;
            toml::from_str(&text)
                .map_err(|e| Failure::Config(vec![format!("config {}: {e}", path.display())]))?
        }
    };
    let merged = file.overlay(&args.overrides()).map_err(Failure::Config)?;
    resolve(merged).map_err(Failure::Config)
}

fn dump_config(run: &ResolvedRun) -> Result<ExitCode, Failure> {
    let text = toml::to_string_pretty(&run.echo)
        .map_err(|e| Failure::Runtime(format!("config serialization: {e}")))?;
    print!("{text}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(args: ProblemArgs) -> Result<ExitCode, Failure> {
    let run = load_and_resolve(&args)?;
    if args.dump_config {
        return dump_config(&run);
    }
    let mut problems = Vec::new();
    if run.epsilons.len() != 1 {
        problems.push(format!(
            "run wants exactly one epsilon, got {} (pass --epsilon once)",
            run.epsilons.len()
        ));
    }
    if run.taus.len() != 1 {
        problems.push(format!(
            "run wants exactly one step size, got {} (pass --tau once)",
            run.taus.len()
        ));
    }
    if !problems.is_empty() {
        return Err(Failure::Config(problems));
    }
    let (epsilon, tau) = (run.epsilons[0], run.taus[0]);
    let params =
        SimParams { form: run.form, epsilon, tau, t_final: run.t_final, scheme: run.scheme };
    params.validate().map_err(config_failure)?;

    let initial = run.initial().map_err(runtime)?;
    let potential = run.potential().map_err(runtime)?;
    let start = Instant::now();
    let evolved = split::evolve(&initial, &potential, &params).map_err(runtime)?;

    let mut summary = serde_json::json!({
        "command": "run",
        "preset": run.preset_id,
        "scheme": run.scheme.as_str(),
        "epsilon": epsilon,
        "tau": tau,
        "steps": evolved.steps,
        "t_final": run.t_final,
        "l2_norm": mass(&evolved.field).sqrt(),
        "mass_drift": evolved.mass_drift,
    });
    if !args.no_reference {
        let cache = ReferenceCache::new(&run.cache_dir).map_err(runtime)?;
        let spec = ReferenceSpec::for_problem(
            &run.grid,
            run.form,
            epsilon,
            run.t_final,
            run.ref_steps,
            &run.potential_id,
            &run.initial_id,
        );
        let (reference, loaded) = split::reference_solution(
            &initial,
            &potential,
            &spec,
            Some(&cache),
            run.compute_references,
        )
        .map_err(runtime)?;
        let error = relative_l2_error(&evolved.field, &reference).map_err(runtime)?;
        // Absolute L2 distance alongside the relative one; published error
        // tables use the unnormalized convention.
        summary["error"] = error.into();
        summary["error_l2"] = (error * mass(&reference).sqrt()).into();
        summary["reference"] = serde_json::json!({
            "steps": run.ref_steps,
            "tau": run.t_final / run.ref_steps as f64,
            "loaded": loaded,
        });
    }
    summary["wall_seconds"] = start.elapsed().as_secs_f64().into();
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).map_err(|e| Failure::Runtime(e.to_string()))?
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: ProblemArgs) -> Result<ExitCode, Failure> {
    let run = load_and_resolve(&args)?;
    if args.dump_config {
        return dump_config(&run);
    }
    let initial = run.initial().map_err(runtime)?;
    let potential = run.potential().map_err(runtime)?;
    let req = SweepRequest {
        preset_id: run.preset_id.clone(),
        profile: run.profile,
        scheme: run.scheme,
        form: run.form,
        grid: run.grid.clone(),
        potential,
        initial,
        initial_id: run.initial_id.clone(),
        t_final: run.t_final,
        ref_steps: run.ref_steps,
        epsilons: run.epsilons.clone(),
        taus: run.taus.clone(),
        delta: run.delta,
        workers: run.workers,
        allow_compute_references: run.compute_references,
    };
    let cache = ReferenceCache::new(&run.cache_dir).map_err(runtime)?;

    let start = Instant::now();
    let table = sweep::run_sweep(&req, Some(&cache)).map_err(|e| match e {
        // Sweep validation runs before any compute, so Param here is still
        // a config problem.
        e @ Error::Param(_) => config_failure(e),
        Error::MissingReference { key } => {
            runtime(format!("missing cached reference {key} and recompute is disabled"))
        }
        other => runtime(other),
    })?;
    let meta = sweep::RunMetadata::collect(start.elapsed().as_secs_f64());

    std::fs::create_dir_all(&run.out).map_err(runtime)?;
    let base = sweep::output_basename(&table, meta.created_unix);
    let csv_path = run.out.join(format!("{base}.csv"));
    let json_path = run.out.join(format!("{base}.json"));
    let csv_file = File::create(&csv_path).map_err(runtime)?;
    sweep::write_csv(&table, BufWriter::new(csv_file)).map_err(runtime)?;
    let json_file = File::create(&json_path).map_err(runtime)?;
    sweep::write_json(&table, &meta, BufWriter::new(json_file)).map_err(runtime)?;

    let uniform_order = sweep::fit_uniform_order(&table).ok();
    let summary = serde_json::json!({
        "command": "sweep",
        "preset": table.preset,
        "scheme": table.scheme.as_str(),
        "profile": table.profile.as_str(),
        "epsilons": table.epsilons.len(),
        "taus": table.taus.len(),
        "references": {
            "computed": table.references_computed,
            "loaded": table.references_loaded,
        },
        "noise_floor": table.noise_floor,
        "uniform_order": uniform_order,
        "csv": csv_path,
        "json": json_path,
        "wall_seconds": meta.wall_seconds_total,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).map_err(|e| Failure::Runtime(e.to_string()))?
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(args: CheckArgs) -> Result<ExitCode, Failure> {
    let fault = match args.fault.as_deref() {
        None => None,
        Some("sigma2-sign") => Some(MatrixFault::Sigma2SignFlip),
        Some(other) => {
            return Err(Failure::Config(vec![format!("unknown fault {other:?} (try sigma2-sign)")]))
        }
    };
    let start = Instant::now();
    let checks = run_property_suite(fault).map_err(runtime)?;
    let mut failed = 0;
    for c in &checks {
        let tag = if c.passed { "pass" } else { "FAIL" };
        if !c.passed {
            failed += 1;
        }
        println!("{tag}  {:<26}  measured {:>10.3e}  bound {:>8.1e}  {}", c.name, c.measured, c.bound, c.detail);
    }
    println!(
        "{}/{} properties hold in {:.1}s",
        checks.len() - failed,
        checks.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cache_dir(args: &CacheArgs) -> PathBuf {
    args.cache
        .clone()
        .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
        .unwrap_or_else(|| args.out.clone().unwrap_or_else(|| PathBuf::from("runs")).join("cache"))
}

fn cmd_cache(cmd: CacheCmd) -> Result<ExitCode, Failure> {
    match cmd.action {
        CacheAction::List(args) => {
            let dir = cache_dir(&args);
            let cache = ReferenceCache::new(&dir).map_err(runtime)?;
            let entries = cache.entries().map_err(runtime)?;
            for (key, m) in &entries {
                println!(
                    "{key}  {}  M={:?}  eps={}  T={}  steps={}  {} / {}",
                    m.form, m.m, m.epsilon, m.t_final, m.steps, m.potential_id, m.initial_id
                );
            }
            println!("{} cached reference(s) in {}", entries.len(), dir.display());
        }
        CacheAction::Clear(args) => {
            let dir = cache_dir(&args);
            let cache = ReferenceCache::new(&dir).map_err(runtime)?;
            let removed = cache.clear().map_err(runtime)?;
            println!("removed {removed} cached reference(s) from {}", dir.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
