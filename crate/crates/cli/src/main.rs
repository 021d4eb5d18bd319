//! `txshare`: analytic sweeps, scenario runs, seeded batches and trace
//! queries.
//!
//! Exit codes: 0 success, 1 I/O or run failure, 2 invalid input,
//! 3 analytic series did not converge, 4 MAC invariant violation.

use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use txshare_core::analysis::{
    gap_analysis, node_timeline, trigger_postponement, DEFAULT_MERGE_GAP, DEFAULT_MIN_GAP,
};
use txshare_core::analytic::{grid, sweep_distance, sweep_participation, AnalyticError, AnalyticParams, CurveTable, Model};
use txshare_core::campaign::{CampaignError, COMPARISON_FILE, DEFAULT_SEEDS};
use txshare_core::engine::read_trace;
use txshare_core::scenario::ScenarioError;
use txshare_core::sim::SimError;
use txshare_core::{run_batch, run_scenario, BatchConfig, ProtocolKind, RunOptions, ScenarioConfig};

const DEFAULT_OUT_DIR: &str = "results";

#[derive(Parser, Debug)]
#[command(name = "txshare", version, about = "Uplink channel-access models and simulator for overlapping BSSs")]
struct Cli {
    /// Output directory. Analytic sweeps print to stdout when unset.
    #[arg(long, global = true, env = "TXSHARE_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Log verbosity on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Success probability of the three protocols against AP distance.
    AnalyticSweepDistance(SweepArgs),
    /// Success probability against the share/trigger participation ratio.
    AnalyticSweepShareRatio(SweepArgs),
    /// Run one scenario and write its CDF and summary.
    Simulate(SimulateArgs),
    /// Run the scenario matrix over several seeds and compare protocols.
    Batch(BatchArgs),
    /// Query a trace file written by `simulate --trace`.
    Trace(TraceArgs),
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// TOML file with model parameters; missing keys use defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Largest distance (m) for the distance sweep; largest ratio otherwise.
    #[arg(long)]
    d_max: Option<f64>,
    /// Grid spacing (default 0.5 m for distance, 0.05 for the ratio).
    #[arg(long)]
    step: Option<f64>,
    /// Fixed AP distance (m) for the ratio sweep.
    #[arg(long)]
    distance: Option<f64>,
    /// Fixed participation ratio for the distance sweep.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, value_delimiter = ',', default_values = ["edca", "trigger", "sharing"])]
    protocols: Vec<ProtocolKind>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Preset name, e.g. `sharing/obss-light/ac0`.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    scenario: Option<String>,
    /// Scenario TOML file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed; presets default to 1, config files keep their own.
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated seconds of traffic, warm-up included.
    #[arg(long)]
    duration_s: Option<f64>,
    /// Also write the event trace.
    #[arg(long)]
    trace: bool,
}

#[derive(Args, Debug)]
struct BatchArgs {
    #[arg(long, value_delimiter = ',', default_values = ["edca", "trigger", "sharing"])]
    protocols: Vec<ProtocolKind>,
    /// Comma-separated seeds (default 1,2,3,4,5).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Override every scenario's duration in seconds.
    #[arg(long)]
    duration_s: Option<f64>,
    /// Concurrent runs (default: one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Write a trace file per run.
    #[arg(long)]
    trace: bool,
    /// Skip the idle-gap and postponement statistics.
    #[arg(long)]
    no_gap_analysis: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Query {
    Timeline,
    Gaps,
    Postponement,
    All,
}

#[derive(Args, Debug)]
struct TraceArgs {
    /// A `*_trace.csv` file.
    file: PathBuf,
    #[arg(long, value_enum, default_value_t = Query::All)]
    query: Query,
    /// Node for the timeline query (all nodes when omitted).
    #[arg(long)]
    node: Option<u32>,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
    /// Stdout closed by the reader (e.g. `| head`); not an error.
    broken_pipe: bool,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
            broken_pipe: false,
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        let mut f = Failure::new(1, e.to_string());
        f.broken_pipe = e.kind() == io::ErrorKind::BrokenPipe;
        f
    }
}

impl From<AnalyticError> for Failure {
    fn from(e: AnalyticError) -> Self {
        let code = match e {
            AnalyticError::NoConvergence { .. } => 3,
            _ => 2,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let code = match e {
            ScenarioError::Io(_) => 1,
            _ => 2,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<CampaignError> for Failure {
    fn from(e: CampaignError) -> Self {
        let code = match &e {
            CampaignError::Invariant { .. } => 4,
            CampaignError::Sim(SimError::Scenario(_)) => 2,
            _ => 1,
        };
        Failure::new(code, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    let out_dir = cli.out_dir.clone();
    let result = match cli.command {
        Command::AnalyticSweepDistance(a) => cmd_sweep(a, out_dir.as_deref(), true),
        Command::AnalyticSweepShareRatio(a) => cmd_sweep(a, out_dir.as_deref(), false),
        Command::Simulate(a) => cmd_simulate(a, out_dir),
        Command::Batch(a) => cmd_batch(a, out_dir),
        Command::Trace(a) => cmd_trace(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) if f.broken_pipe => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_sweep(a: SweepArgs, out_dir: Option<&Path>, by_distance: bool) -> Result<(), Failure> {
    let mut params = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))?;
            AnalyticParams::from_toml(&text)
                .map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))?
        }
        None => AnalyticParams::default(),
    };
    if a.step.is_some_and(|v| v <= 0.0 || !v.is_finite()) {
        return Err(Failure::new(2, "--step must be positive"));
    }
    if a.d_max.is_some_and(|v| v < 0.0 || !v.is_finite()) {
        return Err(Failure::new(2, "--d-max must be non-negative"));
    }
    let model = Model::default();
    let (table, name): (CurveTable, &str) = if by_distance {
        if let Some(rho) = a.rho {
            params = params.with_participation(rho);
        }
        let xs = grid(a.d_max.unwrap_or(20.0), a.step.unwrap_or(0.5));
        (sweep_distance(&model, &a.protocols, &params, &xs)?, "sweep_distance.csv")
    } else {
        if let Some(d) = a.distance {
            params = params.with_distance(d);
        }
        let xs = grid(a.d_max.unwrap_or(1.0), a.step.unwrap_or(0.05));
        (sweep_participation(&model, &a.protocols, &params, &xs)?, "sweep_share_ratio.csv")
    };
    match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            table.write_csv(File::create(&path)?)?;
            log::info!("wrote {}", path.display());
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            table.write_csv(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs, out_dir: Option<PathBuf>) -> Result<(), Failure> {
    let mut cfg = match (&a.scenario, &a.config) {
        (Some(name), _) => ScenarioConfig::by_name(name)?,
        (None, Some(path)) => ScenarioConfig::load(path)?,
        (None, None) => return Err(Failure::new(2, "need --scenario or --config")),
    };
    if let Some(seed) = a.seed {
        cfg = cfg.with_seed(seed);
    } else if a.scenario.is_some() {
        cfg = cfg.with_seed(1);
    }
    if let Some(d) = a.duration_s {
        cfg = cfg.with_duration(d);
    }
    cfg.validate()?;
    let opts = RunOptions {
        out_dir: Some(out_dir.unwrap_or_else(|| DEFAULT_OUT_DIR.into())),
        write_trace: a.trace,
        analyze: false,
    };
    let outcome = run_scenario(&cfg, &opts)?;
    for f in &outcome.files {
        log::info!("wrote {}", f.display());
    }
    let s = &outcome.summary;
    let pct: Vec<String> = s
        .percentiles
        .iter()
        .map(|p| format!("p{}={:.1}", (p.p * 100.0).round(), p.delay_us))
        .collect();
    println!(
        "{} seed {}: {} delivered, {} dropped, mean {:.1} us, {}",
        s.scenario,
        s.seed,
        s.count,
        s.drops,
        s.mean_us,
        pct.join(" ")
    );
    Ok(())
}

fn cmd_batch(a: BatchArgs, out_dir: Option<PathBuf>) -> Result<(), Failure> {
    let dir = out_dir.unwrap_or_else(|| DEFAULT_OUT_DIR.into());
    let batch = BatchConfig {
        protocols: a.protocols,
        seeds: a.seeds.unwrap_or_else(|| DEFAULT_SEEDS.to_vec()),
        duration_s: a.duration_s,
        workers: a.workers,
        run: RunOptions {
            out_dir: Some(dir.clone()),
            write_trace: a.trace,
            analyze: !a.no_gap_analysis,
        },
    };
    if batch.duration_s.is_some_and(|d| d <= 0.0 || d.is_nan()) {
        return Err(Failure::new(2, "--duration-s must be positive"));
    }
    let report = run_batch(&batch)?;
    print!("{}", report.comparison.render());
    log::info!(
        "{} runs, {} failed; report in {}",
        report.runs.len(),
        report.failures.len(),
        dir.join(COMPARISON_FILE).display()
    );
    if report.failures.is_empty() {
        return Ok(());
    }
    for f in &report.failures {
        eprintln!("failed: {} seed {}: {}", f.scenario, f.seed, f.error);
    }
    let code = if report.failures.iter().any(|f| f.invariant) { 4 } else { 1 };
    Err(Failure::new(
        code,
        format!("{} of {} runs failed", report.failures.len(), report.failures.len() + report.runs.len()),
    ))
}

fn cmd_trace(a: TraceArgs) -> Result<(), Failure> {
    let file = File::open(&a.file).map_err(|e| Failure::new(2, format!("{}: {e}", a.file.display())))?;
    let records = read_trace(BufReader::new(file))
        .map_err(|e| Failure::new(2, format!("{}: {e}", a.file.display())))?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    if matches!(a.query, Query::Timeline) {
        let selected: Vec<_> = match a.node {
            Some(n) => node_timeline(&records, n),
            None => records.iter().collect(),
        };
        for r in selected {
            writeln!(out, "{r}")?;
        }
        return Ok(());
    }
    if matches!(a.query, Query::Gaps | Query::All) {
        let g = gap_analysis(&records, DEFAULT_MERGE_GAP, DEFAULT_MIN_GAP);
        writeln!(
            out,
            "gaps={} used={} utilization={:.6} idle_us={:.3}",
            g.gaps,
            g.used,
            g.utilization(),
            g.idle_ns as f64 / 1e3
        )?;
    }
    if matches!(a.query, Query::Postponement | Query::All) {
        let p = trigger_postponement(&records);
        writeln!(
            out,
            "trigger_cycles={} postponed={} mean_postponement_us={:.3} max_postponement_us={:.3}",
            p.cycles, p.postponed, p.mean_us, p.max_us
        )?;
    }
    Ok(())
}
