use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cogrelay::optimize::GridSpec;
use cogrelay::rates::PolicyParams;
use cogrelay::runner::{self, Axis, Evaluated, Scenario, SweepSpec};
use cogrelay::sim::{self, Arrivals, Mode};
use cogrelay::Error;

#[derive(Parser)]
#[command(name = "cogrelay", version, about = "Throughput bounds and simulation of an energy-harvesting cognitive relay")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimise (and optionally simulate) along one swept parameter; writes CSV.
    Sweep(SweepArgs),
    /// List the built-in presets, or show one.
    Presets { name: Option<String> },
    /// Write a per-slot trace of one simulated replica.
    Trace(TraceArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Built-in scenario (see `presets`).
    #[arg(long)]
    preset: Option<String>,
    /// TOML scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    /// lambda_p, lambda_e, X or B.
    #[arg(long, default_value = "lambda_p")]
    axis: String,
    #[arg(long)]
    from: f64,
    #[arg(long)]
    to: f64,
    #[arg(long)]
    step: f64,
    /// Comma-separated subset of S1,S2,S3,SC,SC_INNER,SIM.
    #[arg(long, default_value = "S1,S2,S3,SC")]
    systems: String,
    /// Grid points per policy axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Search the relay share on the grid instead of solving for it.
    #[arg(long)]
    exhaustive: bool,
    /// Add simulated rows of the real protocol.
    #[arg(long)]
    sim: bool,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TraceMode {
    Original,
    S1,
    S2,
    S3,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    source: Source,
    /// f,omega,alpha,beta,gamma
    #[arg(long, value_delimiter = ',')]
    policy: Vec<f64>,
    #[arg(long, value_enum, default_value = "original")]
    mode: TraceMode,
    #[arg(long)]
    lambda_p: Option<f64>,
    #[arg(long)]
    lambda_e: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    slots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn scenario(source: &Source) -> Result<Scenario, Error> {
    match (&source.preset, &source.config) {
        (Some(name), _) => Ok(runner::preset(name)?.scenario),
        (None, Some(path)) => runner::load_scenario(path),
        (None, None) => unreachable!("clap enforces one source"),
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn sweep(args: &SweepArgs) -> Result<(), Error> {
    let mut scenario = scenario(&args.source)?;
    if let Some(n) = args.grid {
        scenario.grid = GridSpec::new(n)?;
    }
    scenario.grid.exhaustive_gamma |= args.exhaustive;
    if let Some(r) = args.replicas {
        scenario.sim.replicas = r;
    }
    if let Some(s) = args.slots {
        scenario.sim.slots = s;
    }
    if let Some(s) = args.seed {
        scenario.sim.seed = s;
    }
    let mut systems = runner::parse_systems(&args.systems)?;
    if args.sim && !systems.contains(&Evaluated::Sim) {
        systems.push(Evaluated::Sim);
    }
    let spec = SweepSpec {
        axis: args.axis.parse::<Axis>()?,
        from: args.from,
        to: args.to,
        step: args.step,
        systems,
        grid: scenario.grid,
        sim: scenario.sim,
    };
    let rows = runner::run_sweep(&scenario, &spec)?;
    runner::write_csv(&rows, output(&args.out)?)
}

fn show_presets(name: &Option<String>) -> Result<(), Error> {
    let list = match name {
        Some(n) => vec![runner::preset(n)?],
        None => runner::presets(),
    };
    let mut out = io::stdout().lock();
    for p in list {
        writeln!(out, "{}: {}", p.name, p.description)?;
        writeln!(out, "  free variable: {}", p.free_variable)?;
        if let Some((axis, values)) = p.family {
            writeln!(out, "  family: {axis} in {values:?}")?;
        }
        writeln!(out, "  lambda_e = {}", p.scenario.arrivals.lambda_e)?;
        if name.is_some() {
            if let cogrelay::channel::ChannelSource::Direct(d) = &p.scenario.channel {
                for (k, v) in d.entries() {
                    writeln!(out, "  {k} = {v}")?;
                }
            }
        }
    }
    Ok(())
}

fn trace(args: &TraceArgs) -> Result<(), Error> {
    let scenario = scenario(&args.source)?;
    let table = scenario.table()?;
    let p = &args.policy;
    let policy = match p.len() {
        0 => PolicyParams::conventional(0.5),
        5 => PolicyParams::new(p[0], p[1], p[2], p[3], p[4])?,
        n => return Err(Error::config("policy", format!("expected 5 values f,omega,alpha,beta,gamma, got {n}"))),
    };
    let arrivals = Arrivals::new(
        args.lambda_p.unwrap_or(scenario.arrivals.lambda_p),
        args.lambda_e.unwrap_or(scenario.arrivals.lambda_e),
    )?;
    let mut cfg = scenario.sim;
    cfg.slots = args.slots;
    cfg.seed = args.seed;
    cfg.replicas = 1;
    let mode = match args.mode {
        TraceMode::Original => Mode::Original,
        TraceMode::S1 => Mode::S1,
        TraceMode::S2 => Mode::S2,
        TraceMode::S3 => Mode::S3,
    };
    let mut out = output(&args.out)?;
    sim::write_trace(mode, &table, &policy, arrivals, &cfg, 0, &mut out)?;
    out.flush()?;
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Toml(_) | Error::UnknownPreset { .. } | Error::Unstable { .. } => 2,
        Error::Channel(_) | Error::Invariant(_) | Error::Io(_) | Error::Csv(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Presets { name } => show_presets(name),
        Command::Trace(a) => trace(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
