//! Command-line interface.
//!
//! Exit codes: 0 success, 2 usage, 3 ingestion or output I/O, 4 computation.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::curve::{AxisPair, CurveError};
use crate::data::{ColumnMode, DataError, Dataset, PredictionRecord};
use crate::references::{ReferenceError, ReferenceSpec};
use crate::report::{
    curve_pair, evaluate_model, EvalOptions, EvaluationReport, PairwiseEntry, Provenance,
    ReportError, Tool, SCHEMA_VERSION,
};
use crate::stats::{paired_permutation_test, StatsError, DEFAULT_PERMUTATIONS};
use crate::svg::{self, PlotOptions};
use crate::synthetic::{
    gen_heteroskedastic, gen_xsinx, xsinx_dataset, StandIn, SyntheticError, SyntheticKind,
    SyntheticSpec,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INGEST: i32 = 3;
pub const EXIT_COMPUTE: i32 = 4;

pub const DEFAULT_COST_C: f64 = 0.1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Ingest(String),
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Ingest(_) => EXIT_INGEST,
            CliError::Compute(_) => EXIT_COMPUTE,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::ZeroVariance => CliError::Compute(e.to_string()),
            _ => CliError::Ingest(e.to_string()),
        }
    }
}

macro_rules! compute_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Compute(e.to_string())
            }
        }
    )*};
}
compute_error!(CurveError, ReportError, StatsError, ReferenceError, SyntheticError);

#[derive(Debug, Parser)]
#[command(name = "ucc", version, about = "Uncertainty Characteristics Curves for regression prediction intervals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Report AUUCC, gain over constant bands and operating points per model.
    Evaluate {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate two models on shared data and test their AUUCC difference.
    Compare {
        model_a: PathBuf,
        model_b: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Export the UCC operating points.
    Curve {
        input: PathBuf,
        /// Append the constant-band reference curve.
        #[arg(long)]
        include_reference: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Render UCCs with the constant-band reference as SVG.
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        title: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic dataset as CSV.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Axis pair as x:y (bandwidth:miss_rate, excess:deficit, excess:miss_rate).
    #[arg(long, default_value = "bandwidth:miss_rate", value_parser = parse_axes)]
    axes: AxisPair,
    /// Restrict the area to a y-range lo:hi.
    #[arg(long, value_parser = parse_range)]
    partial: Option<(f64, f64)>,
    /// Cost weight c in c*x + (1-c)*y [default: 0.1].
    #[arg(long, value_parser = parse_unit)]
    cost_c: Option<f64>,
    /// Report the operating point reaching this miss rate.
    #[arg(long, value_parser = parse_unit)]
    at_missrate: Option<f64>,
    #[arg(long, value_enum, default_value_t = NormalizeArg::None)]
    normalize: NormalizeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    n_perm: usize,
    /// Exclude records with zero band and nonzero error instead of failing.
    #[arg(long)]
    allow_infinite: bool,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Input column layout.
    #[arg(long, value_enum, default_value_t = ColumnsArg::Auto)]
    columns: ColumnsArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NormalizeArg {
    None,
    Std,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ColumnsArg {
    Auto,
    Bands,
    Bounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TaskArg {
    Xsinx,
    Heteroskedastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BandsArg {
    Tuned,
    Weak,
    Oracle,
    Constant,
    Random,
    EpsilonPerfect,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value_t = TaskArg::Heteroskedastic)]
    task: TaskArg,
    /// Number of test records.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Training points for the x sin x stand-in predictors.
    #[arg(long, default_value_t = 4000)]
    n_train: usize,
    #[arg(long)]
    noise_scale: Option<f64>,
    /// Noise spread (x sin x) or sigma max/min ratio (heteroskedastic).
    #[arg(long)]
    noise_spread: Option<f64>,
    /// Bands to emit; defaults to tuned (x sin x) or oracle (heteroskedastic).
    #[arg(long, value_enum)]
    bands: Option<BandsArg>,
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_axes(s: &str) -> Result<AxisPair, String> {
    s.parse::<AxisPair>().map_err(|e| e.to_string())
}

fn parse_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got `{s}`"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("`{lo}` is not a number"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("`{hi}` is not a number"))?;
    if lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi {
        Ok((lo, hi))
    } else {
        Err(format!("need 0 <= lo < hi, got {lo}:{hi}"))
    }
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let raw: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli.command, &raw) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, raw: &[String]) -> Result<(), CliError> {
    match command {
        Command::Evaluate { inputs, common } => evaluate(&inputs, &common, raw),
        Command::Compare { model_a, model_b, common } => compare(&model_a, &model_b, &common, raw),
        Command::Curve { input, include_reference, common } => curve(&input, include_reference, &common),
        Command::Plot { inputs, title, common } => plot(&inputs, title, &common),
        Command::Synth(args) => synth(&args),
    }
}

/// Arguments after the subcommand with `--out` removed.
fn replay_args(raw: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = raw.iter().skip(2);
    while let Some(a) = it.next() {
        if a == "--out" {
            it.next();
        } else if !a.starts_with("--out=") {
            out.push(a.clone());
        }
    }
    out
}

fn column_mode(c: ColumnsArg) -> Option<ColumnMode> {
    match c {
        ColumnsArg::Auto => None,
        ColumnsArg::Bands => Some(ColumnMode::Bands),
        ColumnsArg::Bounds => Some(ColumnMode::Bounds),
    }
}

fn load(path: &Path, common: &Common) -> Result<Dataset, CliError> {
    Dataset::load(path, column_mode(common.columns)).map_err(|e| match e {
        DataError::Io { .. } => CliError::from(e),
        other => CliError::Ingest(format!("{}: {other}", path.display())),
    })
}

fn normalize(ds: Dataset, common: &Common) -> Result<Dataset, CliError> {
    match common.normalize {
        NormalizeArg::None => Ok(ds),
        NormalizeArg::Std => Ok(ds.normalize_std()?),
    }
}

/// Fails on infinite critical scales unless they are allowed.
fn check_infinite(ds: &Dataset, common: &Common) -> Result<(), CliError> {
    let n_inf = ds.critical_scales().iter().filter(|k| k.is_infinite()).count();
    if n_inf > 0 && !common.allow_infinite {
        return Err(CurveError::InfiniteScalesPresent(n_inf).into());
    }
    Ok(())
}

fn eval_options(common: &Common) -> EvalOptions {
    EvalOptions {
        axes: common.axes,
        partial: common.partial,
        cost_c: common.cost_c.unwrap_or(DEFAULT_COST_C),
        at_missrate: common.at_missrate,
        allow_infinite: common.allow_infinite,
    }
}

fn provenance(command: &str, inputs: &[&Path], common: &Common, raw: &[String]) -> Provenance {
    Provenance {
        command: command.to_string(),
        args: replay_args(raw),
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        seed: common.seed,
        normalization: match common.normalize {
            NormalizeArg::None => "none".to_string(),
            NormalizeArg::Std => "std".to_string(),
        },
        std_convention: "population".to_string(),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Ingest(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Ingest(format!("<stdout>: {e}")))
        }
    }
}

fn render_report(report: &EvaluationReport, common: &Common) -> String {
    match common.format {
        FormatArg::Json => report.to_json(),
        FormatArg::Csv => report.to_csv(),
    }
}

fn evaluate(inputs: &[PathBuf], common: &Common, raw: &[String]) -> Result<(), CliError> {
    let opts = eval_options(common);
    let mut models = Vec::with_capacity(inputs.len());
    for path in inputs {
        let ds = normalize(load(path, common)?, common)?;
        check_infinite(&ds, common)?;
        models.push(evaluate_model(&ds, &opts)?);
    }
    let report = EvaluationReport {
        schema_version: SCHEMA_VERSION,
        tool: Tool::default(),
        provenance: provenance(
            "evaluate",
            &inputs.iter().map(PathBuf::as_path).collect::<Vec<_>>(),
            common,
            raw,
        ),
        models,
        pairwise: Vec::new(),
    };
    emit(&render_report(&report, common), common.out.as_deref())
}

/// Drops every record whose scale is infinite in either model, keeping the
/// two datasets aligned.
fn drop_joint_infinite(a: &Dataset, b: &Dataset) -> Result<(Dataset, Dataset), CliError> {
    let keep: Vec<bool> = a
        .records()
        .iter()
        .zip(b.records())
        .map(|(x, y)| x.critical_scale().is_finite() && y.critical_scale().is_finite())
        .collect();
    let filter = |ds: &Dataset| -> Result<Dataset, CliError> {
        let recs: Vec<PredictionRecord> = ds
            .records()
            .iter()
            .zip(&keep)
            .filter_map(|(r, &k)| k.then_some(*r))
            .collect();
        if recs.is_empty() {
            return Err(CurveError::AllScalesInfinite.into());
        }
        Ok(Dataset::with_name(ds.name(), recs)?)
    };
    Ok((filter(a)?, filter(b)?))
}

fn compare(path_a: &Path, path_b: &Path, common: &Common, raw: &[String]) -> Result<(), CliError> {
    let a = load(path_a, common)?;
    let b = load(path_b, common)?;
    if !a.shares_base_with(&b) {
        return Err(StatsError::MismatchedBase.into());
    }
    let infinite = |ds: &Dataset| ds.critical_scales().iter().filter(|k| k.is_infinite()).count();
    let (inf_a, inf_b) = (infinite(&a), infinite(&b));
    if (inf_a > 0 || inf_b > 0) && !common.allow_infinite {
        return Err(CurveError::InfiniteScalesPresent(inf_a.max(inf_b)).into());
    }
    let (a, b) = if common.allow_infinite {
        drop_joint_infinite(&a, &b)?
    } else {
        (a, b)
    };
    let a = normalize(a, common)?;
    let b = normalize(b, common)?;

    let opts = eval_options(common);
    let mut models = Vec::with_capacity(2);
    for (ds, n_inf) in [(&a, inf_a), (&b, inf_b)] {
        let mut entry = evaluate_model(ds, &opts)?;
        if common.allow_infinite {
            entry.n_infinite = n_inf;
        }
        models.push(entry);
    }
    let test = paired_permutation_test(&a, &b, common.axes, common.n_perm, common.seed)?;
    let report = EvaluationReport {
        schema_version: SCHEMA_VERSION,
        tool: Tool::default(),
        provenance: provenance("compare", &[path_a, path_b], common, raw),
        pairwise: vec![PairwiseEntry::new(a.name(), b.name(), common.axes, &test)],
        models,
    };
    emit(&render_report(&report, common), common.out.as_deref())
}

fn curve(path: &Path, include_reference: bool, common: &Common) -> Result<(), CliError> {
    let ds = normalize(load(path, common)?, common)?;
    check_infinite(&ds, common)?;
    let pair = curve_pair(&ds, common.axes, common.allow_infinite)?;
    let text = match common.format {
        FormatArg::Csv => {
            let mut s = pair.model.to_csv();
            if include_reference {
                s.push('\n');
                s.push_str(&pair.reference.to_csv());
            }
            s
        }
        FormatArg::Json => {
            let mut s = if include_reference {
                serde_json::to_string_pretty(&[&pair.model, &pair.reference])
            } else {
                serde_json::to_string_pretty(&pair.model)
            }
            .expect("curves serialize");
            s.push('\n');
            s
        }
    };
    emit(&text, common.out.as_deref())
}

fn plot(inputs: &[PathBuf], title: Option<String>, common: &Common) -> Result<(), CliError> {
    let mut curves = Vec::with_capacity(inputs.len());
    let mut reference = None;
    for path in inputs {
        let ds = normalize(load(path, common)?, common)?;
        check_infinite(&ds, common)?;
        let pair = curve_pair(&ds, common.axes, common.allow_infinite)?;
        if reference.is_none() {
            reference = Some(pair.reference);
        }
        curves.push(pair.model);
    }
    let opts = PlotOptions {
        title,
        cost_c: common.cost_c,
    };
    emit(&svg::render(&curves, reference.as_ref(), &opts), common.out.as_deref())
}

fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let kind = match args.task {
        TaskArg::Xsinx => SyntheticKind::Xsinx,
        TaskArg::Heteroskedastic => SyntheticKind::Heteroskedastic,
    };
    let defaults = match kind {
        SyntheticKind::Xsinx => SyntheticSpec::xsinx(args.seed),
        SyntheticKind::Heteroskedastic => SyntheticSpec::heteroskedastic(args.n, args.seed),
    };
    let spec = SyntheticSpec {
        kind,
        n_train: args.n_train,
        n_test: args.n,
        noise_scale: args.noise_scale.unwrap_or(defaults.noise_scale),
        noise_spread: args.noise_spread.unwrap_or(defaults.noise_spread),
        seed: args.seed,
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let bands = args.bands.unwrap_or(match kind {
        SyntheticKind::Xsinx => BandsArg::Tuned,
        SyntheticKind::Heteroskedastic => BandsArg::Oracle,
    });
    let base = match kind {
        SyntheticKind::Xsinx => {
            let sample = gen_xsinx(&spec)?;
            let stand_in = if bands == BandsArg::Weak { StandIn::Weak } else { StandIn::Tuned };
            xsinx_dataset(&sample, stand_in)?
        }
        SyntheticKind::Heteroskedastic => gen_heteroskedastic(&spec)?,
    };
    let ds = match (bands, kind) {
        (BandsArg::Tuned | BandsArg::Weak, SyntheticKind::Xsinx) => base,
        (BandsArg::Oracle, SyntheticKind::Heteroskedastic) => base,
        (BandsArg::Tuned | BandsArg::Weak, _) => {
            return Err(CliError::Usage("tuned/weak bands need --task xsinx".into()))
        }
        (BandsArg::Oracle, _) => {
            return Err(CliError::Usage("oracle bands need --task heteroskedastic".into()))
        }
        (BandsArg::Constant, _) => ReferenceSpec::Constant.apply(&base)?,
        (BandsArg::Random, _) => ReferenceSpec::Random { seed: args.seed }.apply(&base)?,
        (BandsArg::EpsilonPerfect, _) => ReferenceSpec::EpsilonPerfect {
            epsilon: args.epsilon,
            seed: args.seed,
        }
        .apply(&base)?,
    };

    let mut comments = spec.describe();
    let band_name = bands.to_possible_value().expect("named variant").get_name().to_string();
    comments.push(format!("bands={band_name} epsilon={}", args.epsilon));
    let mut buf = Vec::new();
    ds.write_csv_with_comments(&mut buf, &comments)?;
    emit(&String::from_utf8(buf).expect("utf-8 csv"), args.out.as_deref())
}
