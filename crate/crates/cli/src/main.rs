//! `porlab`: explore bounded concurrent programs with partial-order
//! reduction, generate benchmark clients, and run experiment matrices.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{Context, Result, bail};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use porlab_core::explore::{self, Algorithm, ExploreError, ExploreMode, Verdict};
use porlab_core::harness::{
    BugClass, CSV_HEADER, ClientSpec, RunConfig, Structure, builtin_client_specs, csv_field,
    generate_client, run_matrix,
};
use porlab_core::oracle;
use porlab_core::program::{Program, parse_program, serialize_program};
use porlab_core::strategy::StrategyConfig;

const EXIT_OK: u8 = 0;
const EXIT_VIOLATION: u8 = 1;
const EXIT_PROGRAM_ERROR: u8 = 2;
const EXIT_ORACLE_FAIL: u8 = 3;
const EXIT_USAGE: u8 = 4;

#[derive(Parser)]
#[command(name = "porlab", version, about = "Stateful POR model checking lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Explore one program document and report the verdict.
    Explore(ExploreArgs),
    /// Run an experiment matrix over a corpus and emit a report.
    Bench(BenchArgs),
    /// Generate a benchmark client program document.
    Gen(GenArgs),
}

#[derive(Args)]
struct ExploreArgs {
    /// Program document (JSON).
    program: PathBuf,
    /// Exploration algorithm: spor, de, dl, or full.
    #[arg(long, default_value = "spor")]
    alg: Algorithm,
    /// Enumeration strategy: seq, `seq:<perm>`, or `rand:<seed>`.
    #[arg(long, default_value = "seq")]
    strategy: String,
    /// Exploration mode.
    #[arg(long, value_enum, default_value_t = ModeArg::Exhaustive)]
    mode: ModeArg,
    /// Check the reduced graph against the brute-force oracle.
    #[arg(long)]
    oracle: bool,
    /// Write the reduced graph as JSON lines to this path.
    #[arg(long, value_name = "PATH")]
    dump_lts: Option<PathBuf>,
    /// Emit the result as a machine-readable report instead of text.
    #[arg(long, value_enum)]
    report: Option<ReportFormat>,
    /// Abort exploration after this many milliseconds.
    #[arg(long, value_name = "MS")]
    timeout_ms: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    /// Program source: a directory of *.json documents, or "builtin".
    #[arg(long, default_value = "builtin")]
    corpus: String,
    /// Matrix configuration (clients and runs) as JSON.
    #[arg(long, value_name = "CONFIG")]
    matrix: Option<PathBuf>,
    /// Report output path.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Worker count.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Report format.
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    format: ReportFormat,
}

#[derive(Args)]
struct GenArgs {
    /// Data-structure model to exercise.
    #[arg(long)]
    structure: Structure,
    #[arg(long, default_value_t = 3)]
    threads: usize,
    #[arg(long, default_value_t = 2)]
    calls: usize,
    #[arg(long, default_value_t = 2)]
    keys: usize,
    /// Which invocations lose their lock/unlock pair.
    #[arg(long, default_value = "none")]
    bug: BugClass,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exhaustive,
    #[value(name = "first-error")]
    FirstError,
}

impl ModeArg {
    fn label(self) -> &'static str {
        match self {
            ModeArg::Exhaustive => "exhaustive",
            ModeArg::FirstError => "first-error",
        }
    }
}

impl From<ModeArg> for ExploreMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exhaustive => ExploreMode::Exhaustive,
            ModeArg::FirstError => ExploreMode::UntilFirstError,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Explore(args) => cmd_explore(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Gen(args) => cmd_gen(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("porlab: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn load_program(path: &Path) -> Result<Program> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_program(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_explore(args: ExploreArgs) -> Result<u8> {
    let program = load_program(&args.program)?;
    let strategy: StrategyConfig = args.strategy.parse()?;
    let mode: ExploreMode = args.mode.into();
    let deadline = args
        .timeout_ms
        .map(|ms| Instant::now() + Duration::from_millis(ms));

    let out = match explore::explore(&program, args.alg, &strategy, mode, deadline) {
        Ok(out) => out,
        Err(ExploreError::Timeout(elapsed)) => {
            eprintln!("dnf: exploration timed out after {elapsed:?}");
            return Ok(EXIT_PROGRAM_ERROR);
        }
        Err(e) => bail!(e),
    };

    if let Some(path) = &args.dump_lts {
        let mut file =
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        out.lts.dump_jsonl(&program, &mut file)?;
    }

    let oracle_report = if args.oracle && matches!(out.verdict, Verdict::Exhausted) {
        Some(oracle::check_soundness(
            &program,
            &out,
            &args.program.display().to_string(),
            oracle::DEFAULT_BUDGET,
        )?)
    } else {
        None
    };

    match args.report {
        None => print_human(&program, &args, &out, oracle_report.as_ref()),
        Some(ReportFormat::Csv) => print_csv_row(&args, &strategy, &out, oracle_report.as_ref()),
        Some(ReportFormat::Json) => print_json(&program, &args, &out, oracle_report.as_ref())?,
    }

    Ok(exit_code(&out.verdict, oracle_report.as_ref()))
}

fn exit_code(verdict: &Verdict, oracle_report: Option<&oracle::SoundnessReport>) -> u8 {
    if oracle_report.is_some_and(|r| !r.pass) {
        return EXIT_ORACLE_FAIL;
    }
    match verdict {
        Verdict::Exhausted => EXIT_OK,
        Verdict::ViolationFound { .. } => EXIT_VIOLATION,
        Verdict::Deadlock { .. } | Verdict::ProgramError { .. } => EXIT_PROGRAM_ERROR,
    }
}

fn print_human(
    program: &Program,
    args: &ExploreArgs,
    out: &explore::ExploreOutcome,
    oracle_report: Option<&oracle::SoundnessReport>,
) {
    println!(
        "{} alg={} strategy={} mode={}",
        args.program.display(),
        args.alg.label(),
        args.strategy,
        args.mode.label()
    );
    println!(
        "verdict: {}  states: {}  transitions: {}  retraversed: {}  books-peak: {}  time: {} ms",
        out.verdict.label(),
        out.metrics.states,
        out.metrics.transitions,
        out.metrics.retraversed_transitions,
        out.metrics.peak_book_count,
        out.metrics.wall_time.as_millis()
    );
    match &out.verdict {
        Verdict::ViolationFound { trace, outcome } => {
            println!("outcome {outcome:?} is not admitted; counterexample:");
            for a in trace {
                println!("  {}", a.display(program));
            }
        }
        Verdict::Deadlock { trace } => {
            println!("deadlock after:");
            for a in trace {
                println!("  {}", a.display(program));
            }
        }
        Verdict::ProgramError { trace, fault } => {
            println!("program fault: {fault} after:");
            for a in trace {
                println!("  {}", a.display(program));
            }
        }
        Verdict::Exhausted => {}
    }
    if let Some(r) = oracle_report {
        println!(
            "oracle: {}  full-classes: {}  reduced-classes: {}  ratio: {:.3}",
            if r.pass { "PASS" } else { "FAIL" },
            r.full_classes,
            r.reduced_classes,
            r.ratio
        );
        for m in &r.missing {
            println!("  missing class: {m}");
        }
    }
}

fn print_csv_row(
    args: &ExploreArgs,
    strategy: &StrategyConfig,
    out: &explore::ExploreOutcome,
    oracle_report: Option<&oracle::SoundnessReport>,
) {
    println!("{CSV_HEADER}");
    println!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        csv_field(&args.program.display().to_string()),
        args.alg.label(),
        csv_field(&match strategy {
            StrategyConfig::Sequential(_) => args.strategy.clone(),
            StrategyConfig::Random { .. } => "rand".into(),
        }),
        strategy.seed().map_or(String::new(), |s| s.to_string()),
        args.mode.label(),
        out.metrics.states,
        out.metrics.transitions,
        out.metrics.retraversed_transitions,
        oracle_report.map_or(String::new(), |r| r.reduced_classes.to_string()),
        out.metrics.wall_time.as_millis(),
        out.verdict.label(),
        oracle_report.map_or(String::new(), |r| if r.pass { "pass" } else { "fail" }
            .into()),
    );
}

fn print_json(
    program: &Program,
    args: &ExploreArgs,
    out: &explore::ExploreOutcome,
    oracle_report: Option<&oracle::SoundnessReport>,
) -> Result<()> {
    let mut obj = serde_json::json!({
        "program": args.program.display().to_string(),
        "algorithm": args.alg.label(),
        "strategy": args.strategy,
        "mode": args.mode.label(),
        "verdict": out.verdict.label(),
        "states": out.metrics.states,
        "transitions": out.metrics.transitions,
        "retraversed": out.metrics.retraversed_transitions,
        "peak_books": out.metrics.peak_book_count,
        "time_ms": out.metrics.wall_time.as_millis() as u64,
    });
    if let Verdict::ViolationFound { trace, outcome } = &out.verdict {
        obj["outcome"] = serde_json::json!(outcome);
        obj["counterexample"] = serde_json::json!(
            trace
                .iter()
                .map(|a| a.display(program).to_string())
                .collect::<Vec<_>>()
        );
    }
    if let Some(r) = oracle_report {
        obj["oracle"] = serde_json::to_value(r)?;
    }
    println!("{}", serde_json::to_string_pretty(&obj)?);
    Ok(())
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct MatrixDoc {
    #[serde(default)]
    clients: Vec<ClientSpec>,
    #[serde(default)]
    runs: Vec<RunDoc>,
}

#[derive(Debug, Deserialize)]
struct RunDoc {
    algorithm: String,
    #[serde(default = "default_strategy")]
    strategy: String,
    #[serde(default = "default_mode")]
    mode: String,
    #[serde(default = "default_timeout_ms")]
    timeout_ms: u64,
    #[serde(default)]
    oracle: bool,
}

fn default_strategy() -> String {
    "seq".into()
}
fn default_mode() -> String {
    "exhaustive".into()
}
fn default_timeout_ms() -> u64 {
    60_000
}

impl RunDoc {
    fn resolve(&self) -> Result<RunConfig> {
        let mode = match self.mode.as_str() {
            "exhaustive" => ExploreMode::Exhaustive,
            "first-error" => ExploreMode::UntilFirstError,
            other => bail!("unknown mode {other:?}"),
        };
        Ok(RunConfig {
            algorithm: self.algorithm.parse().map_err(anyhow::Error::msg)?,
            strategy: self.strategy.parse()?,
            mode,
            timeout: Duration::from_millis(self.timeout_ms),
            oracle_check: self.oracle,
        })
    }
}

fn default_runs() -> Vec<RunConfig> {
    [Algorithm::Spor, Algorithm::DeSpor, Algorithm::DlSpor]
        .into_iter()
        .map(|algorithm| RunConfig {
            algorithm,
            ..RunConfig::default()
        })
        .collect()
}

fn cmd_bench(args: BenchArgs) -> Result<u8> {
    let matrix: Option<MatrixDoc> = match &args.matrix {
        None => None,
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(serde_json::from_str(&text).context("parsing matrix config")?)
        }
    };

    let mut programs: Vec<(String, Program)> = Vec::new();
    if args.corpus == "builtin" {
        for spec in builtin_client_specs() {
            programs.push((spec.name(), generate_client(&spec)?));
        }
    } else {
        let dir = PathBuf::from(&args.corpus);
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .with_context(|| format!("reading corpus dir {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            programs.push((name, load_program(&path)?));
        }
    }
    if let Some(doc) = &matrix {
        for spec in &doc.clients {
            programs.push((spec.name(), generate_client(spec)?));
        }
    }
    if programs.is_empty() {
        bail!("no programs to run (empty corpus and no matrix clients)");
    }

    let runs: Vec<RunConfig> = match &matrix {
        Some(doc) if !doc.runs.is_empty() => doc
            .runs
            .iter()
            .map(|r| r.resolve())
            .collect::<Result<_>>()?,
        _ => default_runs(),
    };

    let table = run_matrix(&programs, &runs, args.jobs);
    let body = match args.format {
        ReportFormat::Csv => table.to_csv(),
        ReportFormat::Json => table.to_json(),
    };
    fs::write(&args.out, &body).with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!("wrote {} rows to {}", table.rows.len(), args.out.display());

    let failed_oracle = table
        .rows
        .iter()
        .any(|r| r.oracle.as_deref() == Some("fail"));
    Ok(if failed_oracle {
        EXIT_ORACLE_FAIL
    } else {
        EXIT_OK
    })
}

fn cmd_gen(args: GenArgs) -> Result<u8> {
    let spec = ClientSpec {
        structure: args.structure,
        threads: args.threads,
        calls: args.calls,
        keys: args.keys,
        bug: args.bug,
        seed: args.seed,
    };
    let program = generate_client(&spec)?;
    let text = serialize_program(&program);
    match &args.out {
        Some(path) => fs::write(path, text.as_bytes())
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(EXIT_OK)
}
