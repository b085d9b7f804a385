//! Command-line front end. [`run`] parses arguments, dispatches to a
//! subcommand and returns the process exit code:
//!
//! * `0` success
//! * `2` invalid input (unparseable polynomial, wrong shape, bad flags)
//! * `3` numerical failure before the first degree completed

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde::Serialize;

use crate::error::Error;
use crate::hierarchy::{run_hierarchy, ConvergenceReport, DegreeStatus, HierarchyOptions};
use crate::matrix::{format_rational, parse_rational, rational_to_f64, BasisKind};
use crate::moments::{pushforward_moments, BoxSpec};
use crate::oracle::mc_volume;
use crate::poly::{parse_polynomial, Polynomial};
use crate::stokes::{build_sdp_multihomog, build_sdp_nonhomog};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "hankel-volume", version, about = "Volumes of polynomial sub-level sets via Hankel eigenvalue bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Upper bounds (2r)^n·τ_d on vol{g ≤ 1} for d = 1..dmax.
    Approx(ApproxArgs),
    /// Exact pushforward moments ∫ g^k over the normalized box.
    Moments(MomentsArgs),
    /// Monte Carlo estimate of vol{x in box : a ≤ g(x) ≤ b}.
    Mc(McArgs),
    /// Write the moment relaxation with Stokes constraints as SDPA and JSON.
    SdpExport(SdpArgs),
}

#[derive(Args, Debug, Clone)]
#[group(id = "source", required = true, multiple = false)]
pub struct Source {
    /// Polynomial text, e.g. "x1^2 + x2^2".
    #[arg(long, group = "source")]
    pub expr: Option<String>,
    /// File holding the polynomial text.
    #[arg(long, group = "source")]
    pub file: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct Problem {
    #[command(flatten)]
    pub source: Source,
    /// Number of variables.
    #[arg(long)]
    pub n: usize,
    /// Half-width r of the box [-r, r]^n, as an integer, p/q or decimal.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub radius: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct ApproxArgs {
    #[command(flatten)]
    pub problem: Problem,
    #[arg(long, default_value_t = 8)]
    pub dmax: usize,
    /// monomial, chebyshev, orthonormal-model or orthonormal-push.
    #[arg(long, default_value = "orthonormal-push")]
    pub basis: String,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Relative change in τ below which two consecutive steps stop the run.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Always run to dmax.
    #[arg(long)]
    pub no_early_stop: bool,
    /// Seed for the sampling checks on g.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub problem: Problem,
    /// Highest moment order K.
    #[arg(long)]
    pub order: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct McArgs {
    #[command(flatten)]
    pub problem: Problem,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub a: String,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub b: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SdpArgs {
    #[command(flatten)]
    pub problem: Problem,
    /// Second homogeneous map; selects the two-constraint relaxation on
    /// {g ≤ 1, g2 ≤ 1}.
    #[arg(long)]
    pub expr2: Option<String>,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub a: String,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub b: String,
    /// Relaxation order.
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Output path prefix; `.dat-s` and `.json` are appended.
    #[arg(long)]
    pub out: PathBuf,
}

/// A failure with its exit code and a one-line message.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::NotPositiveDefinite { .. }
            | Error::NoConvergence(_)
            | Error::InsufficientMoments { .. }
            | Error::BasisMismatch
            | Error::DegenerateEstimate => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        };
        CliError { code, message: err.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError { code: EXIT_FAILURE, message: err.to_string() }
    }
}

fn input_error(message: impl Into<String>) -> CliError {
    CliError { code: EXIT_INPUT, message: message.into() }
}

type CliResult<T> = std::result::Result<T, CliError>;

impl Problem {
    fn polynomial(&self) -> CliResult<Polynomial> {
        let text = match (&self.source.expr, &self.source.file) {
            (Some(e), _) => e.clone(),
            (None, Some(path)) => fs::read_to_string(path)
                .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?,
            (None, None) => return Err(input_error("one of --expr or --file is required")),
        };
        Ok(parse_polynomial(text.trim(), self.n)?)
    }

    fn box_spec(&self) -> CliResult<BoxSpec> {
        Ok(BoxSpec::new(self.n, parse_rational(&self.radius)?)?)
    }
}

fn emit(out: &Option<PathBuf>, stdout: &mut dyn Write, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

#[derive(Serialize)]
struct RowJson {
    d: usize,
    tau: Option<f64>,
    scaled: Option<f64>,
    residual: Option<f64>,
    condition_estimate: Option<f64>,
    reliable: bool,
    status: String,
}

#[derive(Serialize)]
struct ReportJson {
    schema_version: u32,
    n: usize,
    t: u32,
    radius: String,
    basis: String,
    rows: Vec<RowJson>,
    final_estimate: Option<f64>,
    integral_discriminant: Option<f64>,
    monotone: bool,
    warnings: Vec<String>,
}

fn status_text(s: &DegreeStatus) -> String {
    match s {
        DegreeStatus::Computed => "computed".into(),
        DegreeStatus::Failed(msg) => format!("failed: {msg}"),
        DegreeStatus::Unavailable => "unavailable".into(),
        DegreeStatus::Skipped => "skipped".into(),
    }
}

fn finite(x: Option<f64>) -> Option<f64> {
    x.filter(|v| v.is_finite())
}

/// The versioned JSON form of a report.
pub fn report_json(report: &ConvergenceReport) -> String {
    let rows = report
        .records
        .iter()
        .map(|r| RowJson {
            d: r.d,
            tau: finite(r.tau),
            scaled: finite(r.scaled_estimate),
            residual: finite(r.residual),
            condition_estimate: finite(r.condition_estimate),
            reliable: r.reliable,
            status: status_text(&r.status),
        })
        .collect();
    let json = ReportJson {
        schema_version: SCHEMA_VERSION,
        n: report.n,
        t: report.t,
        radius: format_rational(&report.radius),
        basis: report.basis.name().to_string(),
        rows,
        final_estimate: finite(report.final_estimate),
        integral_discriminant: finite(report.integral_discriminant()),
        monotone: report.monotone,
        warnings: report.warnings.iter().map(ToString::to_string).collect(),
    };
    let mut s = serde_json::to_string_pretty(&json).expect("report serializes");
    s.push('\n');
    s
}

/// One CSV row per degree.
pub fn report_csv(report: &ConvergenceReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let cell = |x: Option<f64>| finite(x).map(|v| v.to_string()).unwrap_or_default();
    let sci = |x: Option<f64>| finite(x).map(|v| format!("{v:e}")).unwrap_or_default();
    w.write_record(["d", "tau", "scaled", "residual", "condition_estimate", "reliable", "status"])
        .expect("in-memory write");
    for r in &report.records {
        w.write_record([
            r.d.to_string(),
            cell(r.tau),
            cell(r.scaled_estimate),
            sci(r.residual),
            sci(r.condition_estimate),
            r.reliable.to_string(),
            status_text(&r.status),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

fn cmd_approx(args: &ApproxArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<i32> {
    let g = args.problem.polynomial()?;
    let bx = args.problem.box_spec()?;
    let basis: BasisKind = args.basis.parse()?;
    if args.dmax == 0 {
        return Err(input_error("--dmax must be at least 1"));
    }
    let opts = HierarchyOptions {
        d_max: args.dmax,
        basis,
        plateau_tol: (!args.no_early_stop).then_some(args.tol),
        seed: args.seed,
        ..HierarchyOptions::default()
    };
    let report = run_hierarchy(&g, &bx, &opts)?;
    for w in &report.warnings {
        writeln!(stderr, "warning: {w}")?;
    }
    let text = match args.format {
        Format::Json => report_json(&report),
        Format::Csv => report_csv(&report),
    };
    emit(&args.out, stdout, &text)?;
    match report.records.first().map(|r| &r.status) {
        Some(DegreeStatus::Computed) => Ok(EXIT_OK),
        Some(DegreeStatus::Failed(msg)) => {
            writeln!(stderr, "error: degree 1 failed: {msg}")?;
            Ok(EXIT_NUMERICAL)
        }
        _ => Ok(EXIT_NUMERICAL),
    }
}

fn cmd_moments(args: &MomentsArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let g = args.problem.polynomial()?;
    if g.is_zero() {
        return Err(Error::ZeroPolynomial.into());
    }
    let bx = args.problem.box_spec()?;
    let seq = pushforward_moments(&g, &bx, args.order)?;
    let mut text = String::new();
    for (k, v) in seq.values.iter().enumerate() {
        text.push_str(&format!("{k} {}\n", format_rational(v)));
    }
    emit(&args.out, stdout, &text)?;
    Ok(EXIT_OK)
}

fn cmd_mc(args: &McArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let g = args.problem.polynomial()?;
    let bx = args.problem.box_spec()?;
    let a = rational_to_f64(&parse_rational(&args.a)?);
    let b = rational_to_f64(&parse_rational(&args.b)?);
    if args.samples == 0 {
        return Err(input_error("--samples must be at least 1"));
    }
    let est = mc_volume(&g, &bx, a, b, args.samples, args.seed)?;
    let text = match args.format {
        Some(Format::Json) => {
            let mut s = serde_json::to_string_pretty(&est).expect("estimate serializes");
            s.push('\n');
            s
        }
        Some(Format::Csv) => format!(
            "mean,stderr,samples,seed\n{},{},{},{}\n",
            est.mean, est.stderr, est.samples, est.seed
        ),
        None => format!(
            "mean {}\nstderr {}\nsamples {}\nseed {}\n",
            est.mean, est.stderr, est.samples, est.seed
        ),
    };
    emit(&args.out, stdout, &text)?;
    Ok(EXIT_OK)
}

fn with_extension(prefix: &std::path::Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(ext);
    PathBuf::from(s)
}

fn cmd_sdp_export(args: &SdpArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let g = args.problem.polynomial()?;
    let bx = args.problem.box_spec()?;
    let problem = match &args.expr2 {
        Some(text) => {
            let g2 = parse_polynomial(text, args.problem.n)?;
            build_sdp_multihomog(&g, &g2, &bx, args.d)?
        }
        None => {
            let a: BigRational = parse_rational(&args.a)?;
            let b: BigRational = parse_rational(&args.b)?;
            if g.homogeneity_degree()?.is_some() {
                return Err(input_error(
                    "polynomial is homogeneous; use `approx`, or pass --expr2 for the two-constraint relaxation",
                ));
            }
            build_sdp_nonhomog(&g, &bx, &a, &b, args.d)?
        }
    };
    let dat = with_extension(&args.out, ".dat-s");
    let json = with_extension(&args.out, ".json");
    let mut sdpa = Vec::new();
    problem.export_sdpa(&mut sdpa)?;
    fs::write(&dat, &sdpa)?;
    fs::write(&json, problem.to_json()?)?;

    writeln!(stdout, "variables {}", problem.variables.len())?;
    for (name, size) in problem.block_summary() {
        writeln!(stdout, "block {name} {size}")?;
    }
    writeln!(stdout, "equalities {}", problem.equalities.len())?;
    writeln!(stdout, "wrote {}", dat.display())?;
    writeln!(stdout, "wrote {}", json.display())?;
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                EXIT_INPUT
            } else {
                let _ = write!(stdout, "{}", e.render());
                EXIT_OK
            };
        }
    };
    let result = match &cli.command {
        Command::Approx(a) => cmd_approx(a, stdout, stderr),
        Command::Moments(a) => cmd_moments(a, stdout),
        Command::Mc(a) => cmd_mc(a, stdout),
        Command::SdpExport(a) => cmd_sdp_export(a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}
