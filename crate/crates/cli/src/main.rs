use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use spcf::cex::Validation;
use spcf::logic::{BoundedSolver, Prover, SmtProcess, Solver};
use spcf::machine::{Outcome, SearchError, TraceEvent};
use spcf::oracle::{differential, Differential};
use spcf::syntax::{parse, typecheck};
use spcf::verify::{verify, Conclusion, Config, Report};

const EXIT_SAFE: u8 = 0;
const EXIT_COUNTEREXAMPLE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_SOLVER: u8 = 3;
/// The machine got stuck or disagreed with the concrete interpreter.
const EXIT_INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(name = "spcf-cex", version, about = "Find inputs that make a program with unknown parts fail")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search a program for reachable errors and report a counterexample.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(clap::Args)]
struct VerifyArgs {
    file: PathBuf,
    /// SMT-LIB2 solver executable (for example z3); the built-in bounded
    /// solver is used otherwise.
    #[arg(long, value_name = "PATH")]
    solver: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    max_steps: u64,
    #[arg(long, default_value_t = 50_000, value_parser = clap::value_parser!(u64).range(1..))]
    max_states: u64,
    /// Search range of the built-in solver: integers in [-N, N].
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(i64).range(1..))]
    builtin_bound: i64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Print every transition to stderr.
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    no_validate: bool,
    /// Wall-clock limit in seconds; 0 disables it.
    #[arg(long, default_value_t = 10, value_name = "SECS")]
    timeout: u64,
    /// Also run an opaque-free program through the concrete interpreter
    /// and check that both agree.
    #[arg(long)]
    differential: bool,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct JsonReport {
    verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    blame: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    op: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bindings: Option<BTreeMap<String, String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    validated: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<BTreeMap<String, i64>>,
    detail: String,
    states_explored: u64,
    solver_queries: u64,
    backend: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    differential: Option<JsonDifferential>,
    elapsed_ms: u128,
}

#[derive(Serialize)]
struct JsonDifferential {
    machine: String,
    concrete: String,
    agree: bool,
}

fn main() -> ExitCode {
    let Command::Verify(args) = Cli::parse().command;
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err((code, msg)) => {
            eprintln!("spcf-cex: {msg}");
            ExitCode::from(code)
        }
    }
}

type Failure = (u8, String);

fn search_failure(e: SearchError) -> Failure {
    match e {
        SearchError::Type(_) => (EXIT_INPUT, e.to_string()),
        SearchError::Solver(_) => (EXIT_SOLVER, e.to_string()),
        SearchError::Step(_) => (EXIT_INTERNAL, e.to_string()),
    }
}

fn run(args: &VerifyArgs) -> Result<u8, Failure> {
    let text = std::fs::read_to_string(&args.file)
        .map_err(|e| (EXIT_INPUT, format!("cannot read {}: {e}", args.file.display())))?;
    let program = parse(&text).map_err(|e| (EXIT_INPUT, format!("{}: {e}", args.file.display())))?;
    typecheck(&program).map_err(|e| (EXIT_INPUT, format!("{}: {e}", args.file.display())))?;
    if args.differential && program.has_opaques() {
        return Err((EXIT_INPUT, "--differential needs a program without opaque values".into()));
    }

    let solver: Box<dyn Solver> = match &args.solver {
        Some(path) => Box::new(SmtProcess::detect(path)),
        None => Box::new(BoundedSolver::new(args.builtin_bound)),
    };
    let mut prover = Prover::new(solver);
    let cfg = Config {
        max_steps: args.max_steps,
        max_states: usize::try_from(args.max_states).unwrap_or(usize::MAX),
        timeout: (args.timeout > 0).then(|| Duration::from_secs(args.timeout)),
        validate: !args.no_validate,
        ..Config::default()
    };

    let started = Instant::now();
    let mut print_trace = |e: &TraceEvent<'_>| eprintln!("{e}");
    let trace: Option<&mut dyn FnMut(&TraceEvent<'_>)> = if args.trace { Some(&mut print_trace) } else { None };
    let report = verify(&program, &mut prover, &cfg, trace).map_err(search_failure)?;
    let diff = if args.differential {
        let mut fresh = Prover::new(BoundedSolver::new(args.builtin_bound));
        Some(differential(&program, &mut fresh, cfg.max_steps, cfg.validation_fuel).map_err(search_failure)?)
    } else {
        None
    };
    let elapsed = started.elapsed();

    let backend = prover.solver().name();
    match args.format {
        Format::Json => {
            let json = json_report(&report, diff.as_ref(), backend, elapsed);
            println!("{}", serde_json::to_string_pretty(&json).expect("report serializes"));
        }
        Format::Text => print_text(&report, diff.as_ref(), &backend, elapsed),
    }

    if diff.as_ref().is_some_and(|d| !d.agree()) {
        return Err((EXIT_INTERNAL, "the machine and the concrete interpreter disagree".into()));
    }
    Ok(match report.conclusion {
        Conclusion::Counterexample(_) => EXIT_COUNTEREXAMPLE,
        _ => EXIT_SAFE,
    })
}

fn detail(report: &Report) -> String {
    match &report.conclusion {
        Conclusion::Counterexample(c) => format!("{} at {}", c.op, c.blame),
        Conclusion::Safe { complete: true } => "verified".into(),
        Conclusion::Safe { complete: false } => {
            let reasons: Vec<String> = report
                .search
                .outcomes
                .iter()
                .filter_map(|o| match o {
                    Outcome::Exhausted(r) => Some(r.to_string()),
                    _ => None,
                })
                .collect();
            format!("safe-within-budget ({})", reasons.join(", "))
        }
        Conclusion::Unknown(why) => why.clone(),
    }
}

fn json_report(
    report: &Report,
    diff: Option<&Differential>,
    backend: String,
    elapsed: Duration,
) -> JsonReport {
    let mut json = JsonReport {
        verdict: match report.conclusion {
            Conclusion::Counterexample(_) => "counterexample",
            Conclusion::Safe { .. } => "safe",
            Conclusion::Unknown(_) => "unknown",
        },
        blame: None,
        op: None,
        bindings: None,
        validated: None,
        model: None,
        detail: detail(report),
        states_explored: report.search.states_explored,
        solver_queries: report.search.solver_queries,
        backend,
        differential: diff.map(|d| JsonDifferential {
            machine: d.machine.to_string(),
            concrete: d.concrete.to_string(),
            agree: d.agree(),
        }),
        elapsed_ms: elapsed.as_millis(),
    };
    if let Conclusion::Counterexample(c) = &report.conclusion {
        json.blame = Some(c.blame.to_string());
        json.op = Some(c.op.to_string());
        json.bindings = Some(c.bindings.iter().map(|(l, e)| (l.to_string(), e.to_string())).collect());
        json.validated = match c.validation {
            Validation::Validated => Some(true),
            Validation::Failed(_) => Some(false),
            Validation::Skipped => None,
        };
        json.model = Some(c.model.iter().map(|(l, v)| (l.to_string(), v)).collect());
    }
    json
}

fn print_text(report: &Report, diff: Option<&Differential>, backend: &str, elapsed: Duration) {
    match &report.conclusion {
        Conclusion::Counterexample(c) => {
            print!("{c}");
            match &c.validation {
                Validation::Validated => println!("Validated by concrete execution."),
                Validation::Failed(why) => println!("Not validated: {why}"),
                Validation::Skipped => {}
            }
            if !c.model.is_empty() {
                let parts: Vec<String> = c.model.iter().map(|(l, v)| format!("{l} = {v}")).collect();
                println!("Model: {}", parts.join(", "));
            }
        }
        Conclusion::Safe { .. } => println!("{}", detail(report)),
        Conclusion::Unknown(why) => println!("unknown: {why}"),
    }
    if let Some(d) = diff {
        println!("Machine: {}", d.machine);
        println!("Concrete: {}", d.concrete);
    }
    println!(
        "{} states, {} solver queries, {backend}, {} ms",
        report.search.states_explored,
        report.search.solver_queries,
        elapsed.as_millis()
    );
}
