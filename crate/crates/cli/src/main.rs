use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use sharedecomp::experiment::{
    replay, run_declp, run_shor, run_verify, DeclpConfig, ExperimentReport, PenaltyMode, ShorConfig, VerifyConfig,
    DEFAULT_SEED,
};
use sharedecomp::subgradient::{Method, RunTrace};
use sharedecomp::testbed::{generate_declp, GeneratorSpec};
use sharedecomp::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_FAILURE: u8 = 2;

#[derive(Parser)]
#[command(name = "sharedecomp", version, about = "Share-allocation decomposition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the Shor max-of-quadratics function and report iteration counts per accuracy.
    Shor(ShorArgs),
    /// Minimize the penalized master function of a generated decomposable LP.
    Declp(DeclpArgs),
    /// Check penalty exactness and oracle consistency on generated instances.
    Verify(VerifyArgs),
    /// Re-run the experiment stored in a JSON report.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct Output {
    /// Write the iteration trace as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Record zero elapsed time and no timestamp (bit-reproducible output).
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct ShorArgs {
    #[arg(long, default_value = "sgm", value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = 0.1)]
    theta: f64,
    #[arg(long, default_value_t = 0.7)]
    nu: f64,
    #[arg(long, default_value_t = 25)]
    d: usize,
    /// Comma-separated accuracy targets.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001,0.0001")]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 40_000)]
    max_iter: usize,
    /// Divide each subgradient by its norm.
    #[arg(long)]
    normalize: bool,
    /// Keep every n-th trace record.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct DeclpArgs {
    /// Number of blocks.
    #[arg(long)]
    l: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    phase: f64,
    #[arg(long, default_value = "sgmts", value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = 5.0)]
    theta: f64,
    #[arg(long, default_value_t = 0.8)]
    nu: f64,
    #[arg(long, default_value_t = 25)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    offset: u32,
    #[arg(long, default_value_t = 2000)]
    budget: usize,
    /// `auto`, or comma-separated penalty bounds.
    #[arg(long, default_value = "auto")]
    t: String,
    /// Added to 2 lambda* when t is auto.
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Save the generated instance as JSON.
    #[arg(long)]
    save_instance: Option<PathBuf>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct VerifyArgs {
    /// Comma-separated block counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,5")]
    l: Vec<usize>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    phase: f64,
    /// Comma-separated penalty bounds overriding calibration.
    #[arg(long, value_delimiter = ',')]
    t: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Random share pairs per instance.
    #[arg(long, default_value_t = 50)]
    samples: usize,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    report: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_t(s: &str) -> Result<PenaltyMode, Error> {
    if s.eq_ignore_ascii_case("auto") {
        return Err(Error::Config("internal: auto handled by caller".into()));
    }
    let t = s
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad --t value {v:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PenaltyMode::Explicit { t })
}

/// Failure with an exit code attached.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Dimension { .. } | Error::InvalidData { .. } | Error::Parse(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_FAILURE,
        message: format!("{}: {e}", path.display()),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn emit(report: &ExperimentReport, trace: &RunTrace, csv: Option<&Path>, json: Option<&Path>) -> Result<(), Failure> {
    print!("{}", report.to_table());
    if let Some(p) = csv {
        write_file(p, &trace.to_csv())?;
    }
    if let Some(p) = json {
        write_file(p, &report.to_json())?;
    }
    Ok(())
}

fn shor(a: ShorArgs) -> Result<(), Failure> {
    let cfg = ShorConfig {
        method: a.method,
        theta: a.theta,
        nu: a.nu,
        d: a.d,
        eps: a.eps,
        max_iter: a.max_iter,
        normalize: a.normalize,
        stride: a.stride,
        timing: !a.out.no_timing,
    };
    let (report, trace) = run_shor(&cfg)?;
    emit(&report, &trace, a.out.csv.as_deref(), a.out.json.as_deref())
}

fn declp(a: DeclpArgs) -> Result<(), Failure> {
    let penalty = if a.t.eq_ignore_ascii_case("auto") {
        PenaltyMode::Auto { margin: a.margin }
    } else {
        parse_t(&a.t)?
    };
    if let Some(p) = &a.save_instance {
        let inst = generate_declp(&GeneratorSpec { l: a.l, phase: a.phase })?;
        write_file(p, &inst.to_json_string())?;
    }
    let cfg = DeclpConfig {
        l: a.l,
        phase: a.phase,
        method: a.method,
        theta: a.theta,
        nu: a.nu,
        d: a.d,
        offset: a.offset,
        budget: a.budget,
        penalty,
        normalize: a.normalize,
        stride: a.stride,
        timing: !a.out.no_timing,
    };
    let (report, trace) = run_declp(&cfg)?;
    emit(&report, &trace, a.out.csv.as_deref(), a.out.json.as_deref())
}

fn verify(a: VerifyArgs) -> Result<(), Failure> {
    let cfg = VerifyConfig {
        ls: a.l,
        phase: a.phase,
        t: a.t,
        seed: a.seed,
        samples: a.samples,
    };
    let report = run_verify(&cfg)?;
    print!("{}", report.to_table());
    if let Some(p) = &a.json {
        let s = serde_json::to_string_pretty(&report).expect("reports serialize");
        write_file(p, &s)?;
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_FAILURE,
            message: "verification failed".into(),
        })
    }
}

fn replay_cmd(a: ReplayArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&a.report).map_err(|e| io_failure(&a.report, e))?;
    let stored = ExperimentReport::from_json(&text)?;
    let (report, trace) = replay(&stored)?;
    emit(&report, &trace, a.csv.as_deref(), a.json.as_deref())?;
    if stored.timestamp.is_none() {
        if report == stored {
            println!("replay identical to stored report");
        } else {
            return Err(Failure {
                code: EXIT_FAILURE,
                message: "replay differs from stored report".into(),
            });
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let result = match cli.command {
        Command::Shor(a) => shor(a),
        Command::Declp(a) => declp(a),
        Command::Verify(a) => verify(a),
        Command::Replay(a) => replay_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
