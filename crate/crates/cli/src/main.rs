//! `dfc`: build formulations, run strength checks, emit models and
//! regenerate the bundled instances.
//!
//! Exit codes: 0 on pass or not-refuted, 2 when a check fails with a witness,
//! 1 on any other error, 64 on usage errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dfc_core::analysis::{
    check_bbj_condition, check_ideal, check_minkowski_ideal, check_par_conditions, check_sharp, piecewise_families,
    AnalysisOptions, AnalysisReport,
};
use dfc_core::fixtures;
use dfc_core::formulation_builders::{build, Method, MethodParams, ProblemSpec};
use dfc_core::model_ir_emit::{emit_json, emit_lp, instance_json, lower_model, parse_instance, parse_model, LowerMode};
use dfc_core::DfcError;

const EXIT_ERROR: u8 = 1;
const EXIT_FAIL: u8 = 2;
const EXIT_USAGE: u8 = 64;
/// Comparison tolerance used for the bundled expected reports.
const EXAMPLE_TOL: f64 = 1e-5;

#[derive(Parser, Debug)]
#[command(name = "dfc", version, about = "Mixed-integer formulations of disjunctive convex constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Plus,
    Lifted,
}

impl From<Mode> for LowerMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Plus => LowerMode::Plus,
            Mode::Lifted => LowerMode::Lifted,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Check {
    Ideal,
    Sharp,
    Par,
    Bbj,
    Minkowski,
}

impl Check {
    fn name(self) -> &'static str {
        match self {
            Check::Ideal => "ideal",
            Check::Sharp => "sharp",
            Check::Par => "par",
            Check::Bbj => "bbj",
            Check::Minkowski => "minkowski",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Lp,
}

#[derive(clap::Args, Debug, Clone)]
struct AnalysisArgs {
    /// Number of sampled directions.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    directions: Option<u64>,
    /// Sampling seed; falls back to DFC_SEED, then to the instance options.
    #[arg(long)]
    seed: Option<u64>,
    /// Relative comparison tolerance.
    #[arg(long, value_parser = positive_f64)]
    tol: Option<f64>,
    /// Radius of the artificial bounding box.
    #[arg(long, value_parser = positive_f64)]
    box_radius: Option<f64>,
    /// Worker threads.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a formulation and write the model (plus an LP file when linear).
    Build {
        #[arg(long)]
        instance: PathBuf,
        /// Override the instance method.
        #[arg(long)]
        method: Option<String>,
        #[arg(long, value_enum, default_value = "plus")]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a strength check and write its report.
    Analyze {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        method: Option<String>,
        #[arg(long, value_enum)]
        check: Check,
        #[arg(long, value_enum, default_value = "plus")]
        mode: Mode,
        /// Report path; the report goes to standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Re-emit a model file as JSON or LP text.
    Emit {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a bundled instance with its expected reports.
    Examples {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(fixtures::NAMES))]
        name: String,
        /// One variant of the instance; all variants when absent.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(_) => Err(format!("{s} is not a positive number")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(DfcError),
    Io(String),
}

impl From<DfcError> for CliError {
    fn from(e: DfcError) -> Self {
        CliError::Core(e)
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn load_spec(path: &Path, method: Option<&str>) -> Result<ProblemSpec, CliError> {
    let spec = parse_instance(&read(path)?)?;
    let Some(name) = method else {
        return Ok(spec);
    };
    let m = Method::parse(name).ok_or_else(|| CliError::Usage(format!("unknown method {name:?}")))?;
    if m == spec.method {
        return Ok(spec);
    }
    let params = match m {
        Method::Extended => MethodParams::None,
        Method::Bigm => MethodParams::BigM(Default::default()),
        other => {
            return Err(CliError::Core(DfcError::InvalidParams(format!(
                "method {} needs its own parameters; the instance declares {}",
                other.name(),
                spec.method.name()
            ))))
        }
    };
    Ok(spec.with_method(m, params))
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var("DFC_SEED") {
        Ok(s) => s.trim().parse().map(Some).map_err(|_| CliError::Usage(format!("DFC_SEED={s:?} is not an integer"))),
        Err(_) => Ok(None),
    }
}

fn analysis_options(args: &AnalysisArgs, spec: &ProblemSpec) -> Result<AnalysisOptions, CliError> {
    let mut o = AnalysisOptions::default();
    if let Some(d) = args.directions.map(|d| d as usize).or(spec.options.directions) {
        o.directions = d;
    }
    o.seed = match args.seed {
        Some(s) => s,
        None => env_seed()?.or(spec.options.seed).unwrap_or(0),
    };
    if let Some(t) = args.tol.or(spec.options.tol) {
        o.tol = t;
    }
    if let Some(r) = args.box_radius {
        o.box_radius = r;
    }
    o.jobs = args.jobs.map(|j| j as usize);
    Ok(o)
}

fn run_check(spec: &ProblemSpec, check: Check, mode: LowerMode, opts: &AnalysisOptions) -> Result<AnalysisReport, CliError> {
    let report = match check {
        Check::Par => check_par_conditions(&spec.sets, &piecewise_families(spec)?, opts)?,
        Check::Bbj => match &spec.params {
            MethodParams::Bbj(d) => check_bbj_condition(d, opts.directions, opts)?,
            _ => return Err(CliError::Core(DfcError::InvalidParams("bbj check needs bbj parameters".into()))),
        },
        _ => {
            let ir = lower_model(&build(spec)?, mode)?;
            match check {
                Check::Ideal => check_ideal(&ir, spec, opts)?,
                Check::Sharp => check_sharp(&ir, spec, opts)?,
                _ => check_minkowski_ideal(&ir, spec, opts)?,
            }
        }
    };
    Ok(report)
}

/// Checks and direction counts recorded for each bundled variant.
fn example_checks(variant: &str) -> &'static [(Check, usize)] {
    match variant {
        "ex1" => &[(Check::Ideal, 500), (Check::Sharp, 500), (Check::Minkowski, 200)],
        "ex1-bigm" => &[(Check::Ideal, 500), (Check::Sharp, 500), (Check::Minkowski, 200)],
        "ex3" => &[(Check::Ideal, 500), (Check::Par, 360)],
        "ex4" | "ex4aug" => &[(Check::Ideal, 500), (Check::Bbj, 100)],
        "ex5" | "ex5-extra" => &[(Check::Ideal, 500), (Check::Par, 360)],
        "ex6" => &[(Check::Ideal, 500), (Check::Sharp, 500)],
        _ => &[(Check::Ideal, 500)],
    }
}

fn report_name(check: Check) -> String {
    format!("{}.report.json", check.name())
}

fn examples(name: &str, variant: Option<&str>, out: &Path) -> Result<u8, CliError> {
    let all = fixtures::by_name(name).ok_or_else(|| CliError::Usage(format!("unknown example {name:?}")))?;
    let chosen: Vec<_> = match variant {
        Some(v) => {
            let pick: Vec<_> = all.into_iter().filter(|(n, _)| n == v).collect();
            if pick.is_empty() {
                return Err(CliError::Usage(format!("example {name} has no variant {v:?}")));
            }
            pick
        }
        None => all,
    };
    for (vname, spec) in chosen {
        let dir = out.join(&vname);
        write(&dir.join("instance.json"), &instance_json(&spec))?;
        for &(check, dirs) in example_checks(&vname) {
            let opts = AnalysisOptions::default().with_directions(dirs).with_tol(EXAMPLE_TOL);
            let report = run_check(&spec, check, LowerMode::Plus, &opts)?;
            write(&dir.join(report_name(check)), &report.to_json())?;
            println!("{vname}: {}", report.summary());
        }
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Build { instance, method, mode, out } => {
            let spec = load_spec(&instance, method.as_deref())?;
            let ir = lower_model(&build(&spec)?, mode.into())?;
            write(&out, &emit_json(&ir))?;
            if ir.is_linear() {
                let lp = out.with_extension("lp");
                write(&lp, &emit_lp(&ir)?)?;
                println!("wrote {} and {}", out.display(), lp.display());
            } else {
                println!("wrote {}", out.display());
            }
            Ok(0)
        }
        Command::Analyze { instance, method, check, mode, out, analysis } => {
            let spec = load_spec(&instance, method.as_deref())?;
            let opts = analysis_options(&analysis, &spec)?;
            let report = run_check(&spec, check, mode.into(), &opts)?;
            match out {
                Some(p) => write(&p, &report.to_json())?,
                None => print!("{}", report.to_json()),
            }
            println!("{}", report.summary());
            Ok(if report.is_fail() { EXIT_FAIL } else { 0 })
        }
        Command::Emit { model, format, out } => {
            let ir = parse_model(&read(&model)?)?;
            let text = match format {
                Format::Json => emit_json(&ir),
                Format::Lp => emit_lp(&ir)?,
            };
            match out {
                Some(p) => write(&p, &text)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
        Command::Examples { name, variant, out } => examples(&name, variant.as_deref(), &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
