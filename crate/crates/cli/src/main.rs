use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coach_core::pipeline::build_report;
use coach_core::trace::write_metrics_csv;
use coach_core::{
    evaluate, generate_idle_trace, generate_trace, read_trace, run_pipeline, write_session_log,
    write_trace, CoachConfig, ExerciseKind, FeedbackPolicy, GeneratorParams, PipelineError,
    RunReport,
};

#[derive(Parser)]
#[command(
    name = "coach",
    version,
    about = "Exercise coach trace generation, replay and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic annotated trace.
    Generate(GenerateArgs),
    /// Replay a trace through the full pipeline and write the session log.
    Simulate(SimulateArgs),
    /// Score a replay against the trace's annotations.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    /// Repeat to sequence several exercises.
    #[arg(long = "exercise")]
    exercises: Vec<ExerciseKind>,
    #[arg(long, default_value_t = 5)]
    reps: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Joint position noise σ in metres.
    #[arg(long, default_value_t = 0.0)]
    noise_joints: f64,
    /// Landmark noise σ in pixels.
    #[arg(long, default_value_t = 0.0)]
    noise_pixels: f64,
    #[arg(long, default_value_t = 30.0)]
    frame_rate: f64,
    /// Write this many seconds of seated rest instead of exercises.
    #[arg(long)]
    idle: Option<f64>,
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file; falls back to $COACH_CONFIG, then built-in defaults.
    #[arg(long, env = "COACH_CONFIG")]
    config: Option<PathBuf>,
    /// Overrides the configured feedback policy.
    #[arg(long)]
    policy: Option<FeedbackPolicy>,
    /// Overrides the configured exercise list; repeat for several.
    #[arg(long = "exercise")]
    exercises: Vec<ExerciseKind>,
    /// Overrides the configured target reps per exercise.
    #[arg(long)]
    reps: Option<u32>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Session log destination.
    #[arg(long)]
    out: PathBuf,
    /// Run report destination (JSON); printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Run report destination (JSON); printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Metrics table destination (CSV).
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

enum Failure {
    Trace(String),
    Config(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Trace(_) => 1,
            Failure::Config(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Trace(m) | Failure::Config(m) => m,
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Trace(format!("{}: {e}", path.display()))
}

fn load_config(args: &ConfigArgs) -> Result<CoachConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => CoachConfig::load(path).map_err(|e| Failure::Config(e.to_string()))?,
        None => CoachConfig::default(),
    };
    if let Some(p) = args.policy {
        cfg.session.policy = p;
    }
    if !args.exercises.is_empty() {
        cfg.session.exercises = args.exercises.clone();
    }
    if let Some(r) = args.reps {
        cfg.session.reps_per_exercise = r;
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(cfg)
}

fn load_trace(path: &Path) -> Result<Vec<coach_core::TraceRecord>, Failure> {
    let file = File::open(path).map_err(|e| io_failure(path, e))?;
    read_trace(BufReader::new(file)).map_err(|e| io_failure(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_failure(path, e))
}

fn emit_report(report: &RunReport, dest: Option<&Path>) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    match dest {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{json}")
                .and_then(|_| w.flush())
                .map_err(|e| io_failure(path, e))
        }
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn pipeline_failure(e: PipelineError) -> Failure {
    match e {
        PipelineError::Config(m) => Failure::Config(m),
        PipelineError::MissingAnnotations => Failure::Trace(e.to_string()),
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<(), Failure> {
    let mut params = GeneratorParams {
        reps: args.reps,
        seed: args.seed,
        noise_joints: args.noise_joints,
        noise_pixels: args.noise_pixels,
        frame_rate: args.frame_rate,
        ..GeneratorParams::default()
    };
    if !args.exercises.is_empty() {
        params.exercises = args.exercises;
    }
    let generated = match args.idle {
        Some(duration) => generate_idle_trace(&params, duration),
        None => generate_trace(&params),
    }
    .map_err(|e| Failure::Config(e.to_string()))?;
    let mut w = create(&args.out)?;
    write_trace(&mut w, &generated.records).map_err(|e| io_failure(&args.out, e))?;
    w.flush().map_err(|e| io_failure(&args.out, e))?;

    let s = &generated.summary;
    println!(
        "wrote {} ({} frames, {:.2} s)",
        args.out.display(),
        s.frames,
        s.duration
    );
    for e in &s.exercises {
        println!(
            "{}: {} planted reps, {} expected correct",
            e.exercise, e.planted, e.expected_correct
        );
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config)?;
    let records = load_trace(&args.trace)?;
    let out = run_pipeline(&records, &cfg).map_err(pipeline_failure)?;
    let mut w = create(&args.out)?;
    write_session_log(&mut w, &out.journal).map_err(|e| io_failure(&args.out, e))?;
    w.flush().map_err(|e| io_failure(&args.out, e))?;
    let report = build_report(&out, Some(args.out.display().to_string()));
    emit_report(&report, args.report.as_deref())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config)?;
    let records = load_trace(&args.trace)?;
    let report = evaluate(&records, &cfg).map_err(pipeline_failure)?;
    if let Some(path) = &args.metrics {
        let mut w = create(path)?;
        write_metrics_csv(&mut w, &report.metric_rows())
            .and_then(|_| w.flush())
            .map_err(|e| io_failure(path, e))?;
    }
    emit_report(&report, args.out.as_deref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
