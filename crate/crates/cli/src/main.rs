mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use newsjump_core::cross_event::write_fit_table;
use newsjump_core::market_data::descriptives::descriptives;
use newsjump_core::market_data::pipeline::{fit_regular, write_aggregates, write_scatter};
use newsjump_core::market_data::{load_sample, run_event_tests, synthetic, EventTestReport, Sample};
use newsjump_core::mc::{
    emit_figures, run_jump_error_study, run_size_power_study, write_jump_error_csv, SizePowerResult,
};
use newsjump_core::sim::simulate_to_files;
use newsjump_core::Error;
use serde::Serialize;
use serde_json::json;

use config::{Format, RunConfig};

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Input(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Input(_) => "input",
            CliError::Numeric(_) => "numeric",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Input(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidParameter { .. } => CliError::Config(msg),
            Error::Parse { .. } | Error::Io { .. } | Error::Serde(_) => CliError::Input(msg),
            Error::InsufficientData(_)
            | Error::IndexOutOfRange { .. }
            | Error::Degenerate(_)
            | Error::RankDeficient { .. }
            | Error::DimensionMismatch { .. } => CliError::Numeric(msg),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "newsjump", version, about = "Jump estimation and fundamental-pricing tests around news releases")]
struct Cli {
    /// Master seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel replications
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, env = "NEWSJUMP_OUT_DIR")]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one price window, or a synthetic event sample with --sample
    Simulate(SimulateArgs),
    /// Jump estimation error of the pre-average and regression estimators
    McJumpError(McArgs),
    /// Size and power of the feasible test
    McSizePower(McArgs),
    /// Classify events into Breaking and Regular news and summarize them
    ClassifyEvents(ManifestArgs),
    /// Cross-event jump regressions on Regular events
    FitJumps(EventArgs),
    /// Leave-one-out fundamental-pricing tests for every event
    TestEvents(EventArgs),
    /// Power-curve plot data from a size-power result
    EmitFigures(FigureArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    n: Option<usize>,
    /// Window length, seconds
    #[arg(long)]
    window: Option<f64>,
    /// Release time, seconds from window start
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    jump: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    terminal_dev: Option<f64>,
    /// Write a synthetic event sample (tick files, events, manifest) instead
    #[arg(long)]
    sample: bool,
}

#[derive(Args, Debug)]
struct McArgs {
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated windows, seconds
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args, Debug)]
struct ManifestArgs {
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Args, Debug)]
struct EventArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct FigureArgs {
    /// `size_power.json` written by mc-size-power
    #[arg(long)]
    input: PathBuf,
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate(_) => "simulate",
        Command::McJumpError(_) => "mc-jump-error",
        Command::McSizePower(_) => "mc-size-power",
        Command::ClassifyEvents(_) => "classify-events",
        Command::FitJumps(_) => "fit-jumps",
        Command::TestEvents(_) => "test-events",
        Command::EmitFigures(_) => "emit-figures",
    }
}

/// Merges defaults, the config file and flags, in that order.
fn resolve(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if cli.out_dir.is_some() {
        cfg.output_dir = cli.out_dir.clone();
    }
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    match &cli.command {
        Command::Simulate(a) => {
            let s = &mut cfg.simulate;
            s.n = a.n.unwrap_or(s.n);
            s.window = a.window.unwrap_or(s.window);
            s.event.tau = a.tau.unwrap_or(s.event.tau);
            s.jump_size = a.jump.unwrap_or(s.jump_size);
            s.terminal_dev = a.terminal_dev.unwrap_or(s.terminal_dev);
            if let Some(seed) = cfg.seed {
                cfg.synthetic.seed = seed;
            }
        }
        Command::McJumpError(a) | Command::McSizePower(a) => {
            let m = &mut cfg.mc;
            m.rounds = a.rounds.unwrap_or(m.rounds);
            m.n = a.n.unwrap_or(m.n);
            if let Some(d) = &a.deltas {
                m.deltas = d.clone();
            }
            m.alpha = a.alpha.unwrap_or(m.alpha);
            if let Some(seed) = cfg.seed {
                m.seed = seed;
            }
        }
        Command::FitJumps(a) | Command::TestEvents(a) => {
            let p = &mut cfg.pipeline;
            p.alpha = a.alpha.unwrap_or(p.alpha);
            if let Some(d) = &a.deltas {
                p.deltas = d.clone();
            }
        }
        Command::ClassifyEvents(_) | Command::EmitFigures(_) => {}
    }
    if cfg.threads == Some(0) {
        return Err(CliError::Config("--threads must be >= 1".into()));
    }
    Ok(cfg)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let body = serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
    fs::write(path, body + "\n").map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load(manifest: &Path, cfg: &RunConfig) -> CliResult<Sample> {
    if !manifest.exists() {
        return Err(CliError::Input(format!("{} does not exist", manifest.display())));
    }
    Ok(load_sample(manifest, &cfg.window)?)
}

/// Runs one command and returns the result files it wrote.
fn execute(command: &Command, cfg: &RunConfig, out: &Path) -> CliResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    let fmt = cfg.format;
    match command {
        Command::Simulate(a) if a.sample => {
            cfg.synthetic.validate()?;
            let sample = synthetic::generate(&cfg.synthetic)?;
            let dir = out.join("sample");
            written.push(synthetic::write_sample(&dir, &sample)?);
        }
        Command::Simulate(_) => {
            let record = cfg.simulate.record(cfg.seed.unwrap_or(0));
            simulate_to_files(&record, out, "simulation")?;
            written.push(out.join("simulation.csv"));
            written.push(out.join("simulation.json"));
        }
        Command::McJumpError(_) => {
            let r = run_jump_error_study(&cfg.mc)?;
            if fmt.json() {
                let p = out.join("jump_error.json");
                write_json(&p, &r)?;
                written.push(p);
            }
            if fmt.csv() {
                let p = out.join("jump_error.csv");
                write_jump_error_csv(create(&p)?, &r)?;
                written.push(p);
            }
        }
        Command::McSizePower(_) => {
            let r = run_size_power_study(&cfg.mc)?;
            if fmt.json() {
                let p = out.join("size_power.json");
                write_json(&p, &r)?;
                written.push(p);
            }
            if fmt.csv() {
                let p = out.join("power_curves.csv");
                emit_figures(create(&p)?, &r.cells)?;
                written.push(p);
            }
        }
        Command::EmitFigures(a) => {
            let text = fs::read_to_string(&a.input)
                .map_err(|e| CliError::Input(format!("{}: {e}", a.input.display())))?;
            let r: SizePowerResult = serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", a.input.display())))?;
            let p = out.join("power_curves.csv");
            emit_figures(create(&p)?, &r.cells)?;
            written.push(p);
        }
        Command::ClassifyEvents(a) => {
            let sample = load(&a.manifest, cfg)?;
            let p = out.join("classification.csv");
            let mut w = create(&p)?;
            use std::io::Write;
            let io = |e: std::io::Error| CliError::Input(e.to_string());
            writeln!(w, "event_id,class,time_to_first_break,total_stop_time,breaks").map_err(io)?;
            for e in &sample.events {
                match e.break_info {
                    Some(b) => writeln!(
                        w,
                        "{},{},{},{},{}",
                        e.event_id, e.class, b.time_to_first_break, b.total_stop_time, b.breaks
                    ),
                    None => writeln!(w, "{},{},,,0", e.event_id, e.class),
                }
                .map_err(io)?;
            }
            w.flush().map_err(io)?;
            written.push(p);
            let d = descriptives(&sample.events, &cfg.pipeline.preavg);
            let p = out.join("descriptives.json");
            write_json(&p, &json!({ "descriptives": d, "skipped_events": sample.skipped }))?;
            written.push(p);
        }
        Command::FitJumps(a) => {
            let sample = load(&a.manifest, cfg)?;
            let fits = fit_regular(&sample.events, &cfg.pipeline)?;
            if fmt.csv() {
                let p = out.join("jump_fits.csv");
                let refs: Vec<(f64, &_)> = fits.iter().map(|(d, f)| (*d, f)).collect();
                write_fit_table(create(&p)?, &refs)?;
                written.push(p);
            }
            if fmt.json() {
                let p = out.join("jump_fits.json");
                let body: Vec<_> = fits
                    .iter()
                    .map(|(d, f)| json!({ "delta": d, "fit": f }))
                    .collect();
                write_json(&p, &body)?;
                written.push(p);
            }
        }
        Command::TestEvents(a) => {
            let sample = load(&a.manifest, cfg)?;
            let report: EventTestReport = run_event_tests(&sample.events, &cfg.pipeline)?;
            if fmt.json() {
                let p = out.join("event_tests.json");
                write_json(&p, &json!({ "report": report, "skipped_events": sample.skipped }))?;
                written.push(p);
            }
            if fmt.csv() {
                let p = out.join("event_aggregates.csv");
                write_aggregates(create(&p)?, &report)?;
                written.push(p);
                let p = out.join("event_scatter.csv");
                write_scatter(create(&p)?, &report)?;
                written.push(p);
            }
        }
    }
    Ok(written)
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = resolve(&cli)?;
    let out = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out).map_err(|e| CliError::Input(format!("{}: {e}", out.display())))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
    let start = Instant::now();
    let written = pool.install(|| execute(&cli.command, &cfg, &out))?;
    let files: Vec<String> = written
        .iter()
        .map(|p| p.strip_prefix(&out).unwrap_or(p).display().to_string())
        .collect();
    write_json(
        &out.join("run_manifest.json"),
        &json!({
            "tool": "newsjump",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command_name(&cli.command),
            "seed": cfg.seed,
            "threads": pool.current_num_threads(),
            "files": files,
            "config": cfg,
            "wall_time_s": start.elapsed().as_secs_f64(),
        }),
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = json!({ "error": e.kind(), "message": e.message(), "exit_code": e.code() });
            eprintln!("{report}");
            ExitCode::from(e.code())
        }
    }
}
