//! `uplinksim` command-line front end.
//!
//! Exit status: 0 on success, 1 when `oracle verify` finds a mismatch, 2 on
//! invalid input (configuration, policy, grid, trace contents), 3 on I/O
//! failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use uplinksim::engine::{self, EngineError};
use uplinksim::experiments::{self, ExperimentError, SweepAxis, SweepSpec};
use uplinksim::oracle::fixture::compare_records;
use uplinksim::oracle::{check_against_fixture, literal, Fixture};
use uplinksim::workload::WorkloadError;
use uplinksim::{
    build_trace, validate_config, validate_policy, EdDueOffset, PolicySpec, PriorityClass, SimConfig, SimTime, Trace,
};

#[derive(Parser)]
#[command(name = "uplinksim", version, about = "Deadline-aware two-class uplink queue simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one policy on one trace and print the utility outcome as JSON.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Evaluate this trace CSV instead of generating one.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Replication index of the generated trace.
        #[arg(long, default_value_t = 0)]
        rep: u32,
    },
    /// V against the PU latency threshold.
    SweepLt {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sweep: SweepArgs,
        /// Sweep the dropping variant instead of the plain one.
        #[arg(long)]
        drop: bool,
    },
    /// V against the ED sigmoid steepness `a`.
    SweepA {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// V against the number of sensors.
    SweepN {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// V against the per-sensor ED arrival rate.
    SweepEdRate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Trace CSV export and import.
    Trace {
        #[command(subcommand)]
        command: TraceCommand,
    },
    /// Independent checks.
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
}

#[derive(Subcommand)]
enum TraceCommand {
    /// Generate a replication's trace and write it as CSV.
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        rep: u32,
    },
    /// Read and validate a trace CSV, then write it back in canonical form.
    Import {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Check the engine and the reference interpreter against hand-derived
    /// fixtures.
    Verify {
        #[arg(long)]
        fixtures: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// JSON SimConfig; defaults to the 50-sensor plant.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<u32>,
    /// Arrival horizon override, ms.
    #[arg(long)]
    horizon: Option<f64>,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyKind {
    Fcfs,
    Edd,
    Priority,
    Proposed,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Pu,
    Ed,
}

#[derive(Args)]
struct PolicyArgs {
    #[arg(long, value_enum, default_value = "proposed")]
    policy: PolicyKind,
    /// PU latency threshold, ms.
    #[arg(long, default_value_t = 5.0)]
    lt: f64,
    /// Drop PU packets that cannot meet their deadline.
    #[arg(long)]
    drop: bool,
    #[arg(long, value_enum, default_value = "pu")]
    priority_class: ClassArg,
    /// ED due offset for EDD, ms or `unbounded`; defaults to `b`.
    #[arg(long)]
    edd_ed_due: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// `start:stop:step` or a comma-separated list.
    #[arg(long)]
    grid: Option<String>,
    /// Comma-separated policy labels: fcfs, edd, priority, proposed,
    /// proposed-drop.
    #[arg(long)]
    policies: Option<String>,
    /// Threshold search step for threshold policies, ms.
    #[arg(long, default_value_t = experiments::DEFAULT_LT_STEP_MS)]
    lt_step: f64,
    /// Also write the optimal-threshold look-up table to this CSV.
    #[arg(long)]
    lut: Option<PathBuf>,
}

enum CliError {
    Invalid(String),
    Io(String),
    Mismatch(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Mismatch(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<WorkloadError> for CliError {
    fn from(e: WorkloadError) -> Self {
        match e {
            WorkloadError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::MalformedTrace(w) => w.into(),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Io(_) => CliError::Io(e.to_string()),
            ExperimentError::Workload(w) => w.into(),
            ExperimentError::Engine(en) => en.into(),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn load_config(common: &Common) -> Result<SimConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            SimConfig::from_json(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?
        }
        None => SimConfig::plant(50),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(reps) = common.reps {
        config.replications = reps;
    }
    if let Some(h) = common.horizon {
        config.horizon = h;
    }
    validate_config(config).map_err(|r| CliError::Invalid(r.to_string()))
}

fn build_policy(args: &PolicyArgs, config: &SimConfig) -> Result<PolicySpec, CliError> {
    let policy = match args.policy {
        PolicyKind::Fcfs => PolicySpec::Fcfs,
        PolicyKind::Edd => match args.edd_ed_due.as_deref() {
            None => PolicySpec::edd_default(&config.utility),
            Some("unbounded") => PolicySpec::Edd { ed_due_offset: EdDueOffset::Unbounded },
            Some(ms) => {
                let off: f64 = ms.parse().map_err(|_| CliError::Invalid(format!("bad --edd-ed-due `{ms}`")))?;
                PolicySpec::Edd { ed_due_offset: EdDueOffset::Finite(SimTime::from_ms(off)) }
            }
        },
        PolicyKind::Priority => PolicySpec::PriorityPreemptive {
            priority_class: match args.priority_class {
                ClassArg::Pu => PriorityClass::PuHigh,
                ClassArg::Ed => PriorityClass::EdHigh,
            },
        },
        PolicyKind::Proposed => PolicySpec::proposed(args.lt, args.drop),
    };
    validate_policy(&policy, &config.utility).map_err(|r| CliError::Invalid(r.to_string()))?;
    Ok(policy)
}

fn parse_policies(list: &str, config: &SimConfig) -> Result<Vec<PolicySpec>, CliError> {
    list.split(',')
        .map(|s| match s.trim() {
            "fcfs" => Ok(PolicySpec::Fcfs),
            "edd" => Ok(PolicySpec::edd_default(&config.utility)),
            "edd-unbounded" => Ok(PolicySpec::Edd { ed_due_offset: EdDueOffset::Unbounded }),
            "priority" | "priority-pu" => Ok(PolicySpec::priority_pu()),
            "priority-ed" => Ok(PolicySpec::PriorityPreemptive { priority_class: PriorityClass::EdHigh }),
            "proposed" => Ok(PolicySpec::proposed(config.utility.l_d / 2.0, false)),
            "proposed-drop" => Ok(PolicySpec::proposed(config.utility.l_d / 2.0, true)),
            other => Err(CliError::Invalid(format!("unknown policy `{other}`"))),
        })
        .collect()
}

/// `start:stop:step` (inclusive of `stop` up to rounding) or `x,y,z`.
fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Invalid(format!("bad --grid `{text}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    if let [start, stop, step] = text.split(':').collect::<Vec<_>>()[..] {
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if !(step > 0.0) || !(stop >= start) {
            return Err(bad());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        // Rounded to 9 decimals so that 0.1-style steps give clean values.
        return Ok((0..=n).map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9).collect());
    }
    text.split(',').map(num).collect()
}

fn open_out(out: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(io_err(path))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn default_grid(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::Lt => "0.5:9.5:0.5",
        SweepAxis::ParamA => "0.01,0.02,0.05,0.1,0.2,0.5,1,2,5,10",
        SweepAxis::NumSensors => "10:50:10",
        SweepAxis::EdRate => "0.002,0.0068,0.012",
    }
}

fn sweep(axis: SweepAxis, common: &Common, args: &SweepArgs, drop: bool) -> Result<(), CliError> {
    let config = load_config(common)?;
    let grid = parse_grid(args.grid.as_deref().unwrap_or(default_grid(axis)))?;
    let policies = match (&args.policies, axis) {
        (Some(list), _) => parse_policies(list, &config)?,
        (None, SweepAxis::Lt) => vec![PolicySpec::proposed(config.utility.l_d / 2.0, drop)],
        (None, _) => parse_policies("fcfs,edd,priority,proposed,proposed-drop", &config)?,
    };
    let replications = config.replications;
    let mut spec = SweepSpec::new(config, axis, grid, policies, replications);
    spec.lt_step_ms = args.lt_step;
    let result = experiments::sweep(&spec)?;
    match &common.out {
        Some(path) => experiments::emit_csv(&result, path)?,
        None => experiments::write_csv(&result, io::stdout().lock())?,
    }
    if let Some(path) = &args.lut {
        experiments::emit_lut_csv(&result, path)?;
    }
    Ok(())
}

fn run(common: &Common, policy: &PolicyArgs, trace: &Option<PathBuf>, rep: u32) -> Result<(), CliError> {
    let config = load_config(common)?;
    let policy = build_policy(policy, &config)?;
    let trace = match trace {
        Some(path) => Trace::read_csv(File::open(path).map_err(io_err(path))?)?,
        None => build_trace(&config, rep)?,
    };
    let log = engine::run(&trace, &policy, &config.utility)?;
    let outcome = engine::log_outcome(&log, &config.utility)?;
    println!("{}", serde_json::to_string(&outcome).expect("outcome serializes"));
    if let Some(path) = &common.out {
        let file = File::create(path).map_err(io_err(path))?;
        log.write_csv(BufWriter::new(file)).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn trace_command(command: &TraceCommand) -> Result<(), CliError> {
    match command {
        TraceCommand::Export { common, rep } => {
            let config = load_config(common)?;
            let trace = build_trace(&config, *rep)?;
            trace.write_csv(open_out(&common.out)?)?;
        }
        TraceCommand::Import { input, out } => {
            let trace = Trace::read_csv(File::open(input).map_err(io_err(input))?)?;
            eprintln!(
                "{}: {} PU and {} ED packets",
                input.display(),
                trace.pu_arrivals.len(),
                trace.ed_arrivals.len()
            );
            trace.write_csv(open_out(out)?)?;
        }
    }
    Ok(())
}

fn oracle_verify(dir: &Path) -> Result<(), CliError> {
    let fixtures = Fixture::load_dir(dir).map_err(|e| match e {
        uplinksim::oracle::fixture::FixtureError::Io { .. } => CliError::Io(e.to_string()),
        _ => CliError::Invalid(e.to_string()),
    })?;
    if fixtures.is_empty() {
        return Err(CliError::Invalid(format!("{}: no fixtures", dir.display())));
    }
    let mut failures = 0;
    for f in &fixtures {
        let trace = f.trace().map_err(|e| CliError::Invalid(e.to_string()))?;
        let expected = f.expected_records(&trace);
        let log = engine::run(&trace, &f.policy(), &f.utility)?;
        let by_engine = check_against_fixture(&log, &expected);
        let interpreted = literal::interpret(&trace, SimTime::from_ms(f.lt_ms), f.drop_expired, &f.utility);
        let by_interpreter = compare_records(&interpreted, &expected);
        let ok = by_engine.passed() && by_interpreter.passed();
        failures += usize::from(!ok);
        println!("{} {}: engine {by_engine}; interpreter {by_interpreter}", if ok { "ok  " } else { "FAIL" }, f.name);
    }
    println!("{} fixtures, {failures} failed", fixtures.len());
    if failures > 0 {
        return Err(CliError::Mismatch(format!("{failures} fixture(s) failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { common, policy, trace, rep } => run(common, policy, trace, *rep),
        Command::SweepLt { common, sweep: s, drop } => sweep(SweepAxis::Lt, common, s, *drop),
        Command::SweepA { common, sweep: s } => sweep(SweepAxis::ParamA, common, s, false),
        Command::SweepN { common, sweep: s } => sweep(SweepAxis::NumSensors, common, s, false),
        Command::SweepEdRate { common, sweep: s } => sweep(SweepAxis::EdRate, common, s, false),
        Command::Trace { command } => trace_command(command),
        Command::Oracle { command: OracleCommand::Verify { fixtures } } => oracle_verify(fixtures),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Invalid(m) | CliError::Io(m) | CliError::Mismatch(m)) = &e;
            eprintln!("error: {m}");
            ExitCode::from(e.exit_code())
        }
    }
}
