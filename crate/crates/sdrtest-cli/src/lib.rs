//! Command-line front end for the `sdrtest` library.
//!
//! Four subcommands: `dim` estimates the number of regression directions a
//! dataset needs, `coord` tests whether chosen predictors contribute
//! (marginally, or conditionally on a dimension), `select` screens predictors
//! by backward elimination, and `simulate` reruns the level/power experiments
//! on the benchmark models.
//!
//! The entry point is [`run_from`], which takes the argument list and the two
//! output streams and returns the process exit code: 0 on success, 1 for
//! data or model errors, 2 for usage errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sdrtest::data::load_csv;
use sdrtest::sim::{
    self, format_sig, ErrorDist, Model, ModelSpec, PredictorDist, TestSelection, DEFAULT_LEVELS,
};
use sdrtest::testing::{backward_elimination, EliminationMode, Reference, TestResult};
use sdrtest::{hypothesis, Analysis, ConditionalOutcome, CoordinateHypothesis, Variant};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Parse `argv` and run the selected subcommand, writing results to `out`
/// and diagnostics to `err`. Returns the exit code instead of exiting so the
/// binary stays a one-line wrapper and tests can drive the CLI in-process.
pub fn run_from<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    let outcome = match cli.command {
        Command::Dim(args) => cmd_dim(args),
        Command::Coord(args) => cmd_coord(args),
        Command::Select(args) => cmd_select(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match outcome {
        Ok(text) => {
            let _ = write!(out, "{text}");
            EXIT_OK
        }
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_DATA
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "sdrtest",
    version,
    about = "Dimension and predictor-contribution tests for regression, \
             built on sliced inverse regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate how many directions the regression needs
    Dim(DimArgs),
    /// Test whether chosen predictors contribute to the regression
    Coord(CoordArgs),
    /// Screen predictors by backward elimination
    Select(SelectArgs),
    /// Rerun the level and power experiments on the benchmark models
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct DataOpts {
    /// CSV file with a header row; every column must be numeric
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Name of the response column
    #[arg(long, value_name = "NAME")]
    response: String,
    /// Number of response slices
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..))]
    slices: u64,
}

#[derive(Args, Debug)]
struct OutputOpts {
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args, Debug)]
struct CalibrationOpts {
    /// How p-values for mixture references are computed
    #[arg(long, value_enum, default_value_t = CalibrationArg::Satterthwaite)]
    calibration: CalibrationArg,
    /// Draws for Monte Carlo calibration
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    mc_draws: u64,
    /// Seed for Monte Carlo calibration
    #[arg(long, env = "SDR_SEED", default_value_t = 0)]
    seed: u64,
}

impl CalibrationOpts {
    fn apply(&self, t: &mut TestResult) -> Result<(), String> {
        if self.calibration == CalibrationArg::Mc {
            let (p, _se) = t
                .mc_p_value(self.mc_draws as usize, self.seed)
                .map_err(estr)?;
            t.p_value = p;
        }
        Ok(())
    }
}

#[derive(Args, Debug)]
struct DimArgs {
    #[command(flatten)]
    data: DataOpts,
    /// Significance level for the sequential procedure
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    alpha: f64,
    /// Weighting of the reference mixture
    #[arg(long, value_enum, default_value_t = VariantArg::General)]
    variant: VariantArg,
    #[command(flatten)]
    calibration: CalibrationOpts,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args, Debug)]
struct CoordArgs {
    #[command(flatten)]
    data: DataOpts,
    /// Comma-separated predictor names to test jointly
    /// (omit both --vars and --hypothesis to test each predictor in turn)
    #[arg(long, value_delimiter = ',', value_name = "NAMES")]
    vars: Vec<String>,
    /// JSON file with {"vars": [names]} or {"alpha_x": [[row], ...]}
    #[arg(long, value_name = "FILE", conflicts_with = "vars")]
    hypothesis: Option<PathBuf>,
    /// Condition on this many directions instead of testing marginally
    #[arg(long, value_name = "D")]
    dim: Option<usize>,
    /// Weighting of the reference mixture
    #[arg(long, value_enum, default_value_t = VariantArg::General)]
    variant: VariantArg,
    #[command(flatten)]
    calibration: CalibrationOpts,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[command(flatten)]
    data: DataOpts,
    /// Predictors with p-values above this level are candidates for removal
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    alpha: f64,
    /// Scoring rule for each round
    #[arg(long, value_enum, default_value_t = ModeArg::Conditional)]
    mode: ModeArg,
    /// Weighting of the reference mixture
    #[arg(long, value_enum, default_value_t = VariantArg::General)]
    variant: VariantArg,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(subcommand)]
    kind: SimCommand,
}

#[derive(Subcommand, Debug)]
enum SimCommand {
    /// Rejection rate of a predictor that never enters the mean function
    Level(SimOpts),
    /// Rejection rate against a contributing predictor, with OLS baselines
    Power(PowerOpts),
}

#[derive(Args, Debug)]
struct PowerOpts {
    #[command(flatten)]
    sim: SimOpts,
    /// 1-based index of the predictor under test
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    target: u64,
}

#[derive(Args, Debug)]
struct SimOpts {
    /// JSON file with the generating model:
    /// {"model", "n", "p", "predictor_dist", "error", "seed"}
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Mean function
    #[arg(long, value_enum, required_unless_present = "config", conflicts_with = "config")]
    model: Option<ModelArg>,
    /// Observations per replication
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    n: Option<usize>,
    /// Number of predictors
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    p: Option<usize>,
    /// Predictor distribution
    #[arg(long, value_enum, default_value_t = PredictorArg::StdNormal, conflicts_with = "config")]
    predictors: PredictorArg,
    /// Error distribution: gaussian:SIGMA, scaled_chisq:D, or hetero:TAU
    #[arg(long, value_parser = parse_error_dist, required_unless_present = "config",
          conflicts_with = "config", value_name = "FAMILY:PARAM")]
    error: Option<ErrorDist>,
    /// Replications
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(100..))]
    reps: u64,
    /// Comma-separated nominal levels
    #[arg(long, value_delimiter = ',', value_parser = parse_level,
          default_values_t = DEFAULT_LEVELS)]
    levels: Vec<f64>,
    /// Which test to replicate
    #[arg(long, value_enum, default_value_t = TestArg::MarginalCoord)]
    test: TestArg,
    /// Dimension d (or m, for marginal-dim) used by dimension-aware tests
    #[arg(long, value_name = "D")]
    dim: Option<usize>,
    /// Weighting of the reference mixture
    #[arg(long, value_enum, default_value_t = VariantArg::General)]
    variant: VariantArg,
    /// Seed for the data generator (overrides the config file)
    #[arg(long, env = "SDR_SEED")]
    seed: Option<u64>,
    /// Number of response slices
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..))]
    slices: u64,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Table,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum CalibrationArg {
    Satterthwaite,
    Mc,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum VariantArg {
    General,
    Constrained,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::General => Variant::General,
            VariantArg::Constrained => Variant::Constrained,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModeArg {
    Marginal,
    Conditional,
}

impl From<ModeArg> for EliminationMode {
    fn from(m: ModeArg) -> EliminationMode {
        match m {
            ModeArg::Marginal => EliminationMode::Marginal,
            ModeArg::Conditional => EliminationMode::Conditional,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModelArg {
    Linear,
    Ratio,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Model {
        match m {
            ModelArg::Linear => Model::Linear,
            ModelArg::Ratio => Model::Ratio,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum PredictorArg {
    #[value(name = "std_normal")]
    StdNormal,
    #[value(name = "chisq4")]
    ChiSq4,
    #[value(name = "t5")]
    T5,
    #[value(name = "uniform")]
    Uniform,
}

impl From<PredictorArg> for PredictorDist {
    fn from(p: PredictorArg) -> PredictorDist {
        match p {
            PredictorArg::StdNormal => PredictorDist::StdNormal,
            PredictorArg::ChiSq4 => PredictorDist::ChiSq4,
            PredictorArg::T5 => PredictorDist::T5,
            PredictorArg::Uniform => PredictorDist::Uniform,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum TestArg {
    MarginalCoord,
    ConditionalCoord,
    MarginalDim,
    ConstrainedDim,
    Diff,
}

impl TestArg {
    fn to_selection(self, dim: Option<usize>, variant: Variant) -> TestSelection {
        let d = dim.unwrap_or(1);
        match self {
            TestArg::MarginalCoord => TestSelection::MarginalCoord { variant },
            TestArg::ConditionalCoord => TestSelection::ConditionalCoord { d, variant },
            TestArg::MarginalDim => TestSelection::MarginalDim { m: d, variant },
            TestArg::ConstrainedDim => TestSelection::ConstrainedDim { d, variant },
            TestArg::Diff => TestSelection::DiffStat { d },
        }
    }
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("significance level must lie in (0, 1), got {v}"))
    }
}

fn parse_level(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("nominal level must lie in [0, 1], got {v}"))
    }
}

fn parse_error_dist(s: &str) -> Result<ErrorDist, String> {
    let (family, param) = s
        .split_once(':')
        .ok_or("expected FAMILY:PARAM, e.g. gaussian:0.2")?;
    let dist = match family {
        "gaussian" => ErrorDist::Gaussian(
            param
                .parse()
                .map_err(|_| format!("`{param}` is not a valid scale"))?,
        ),
        "scaled_chisq" => ErrorDist::ScaledChiSq(
            param
                .parse()
                .map_err(|_| format!("`{param}` is not a valid degrees-of-freedom count"))?,
        ),
        "hetero" => ErrorDist::Hetero(
            param
                .parse()
                .map_err(|_| format!("`{param}` is not a valid rate"))?,
        ),
        other => {
            return Err(format!(
                "unknown error family `{other}`; use gaussian:SIGMA, scaled_chisq:D, or hetero:TAU"
            ))
        }
    };
    Ok(dist)
}

fn estr(e: sdrtest::Error) -> String {
    e.to_string()
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always render");
    s.push('\n');
    s
}

fn load_analysis(opts: &DataOpts) -> Result<Analysis, String> {
    let data = load_csv(&opts.data, &opts.response)
        .map_err(|e| format!("{}: {e}", opts.data.display()))?;
    Analysis::new(data, opts.slices as usize).map_err(estr)
}

fn describe_reference(r: &Reference) -> String {
    match r {
        Reference::ChiSquared { df } => format!("chi-squared, {df} df"),
        Reference::Mixture { weights, df } => {
            format!("mixture of {} chi-squared({df}) terms", weights.len())
        }
    }
}

fn render_result_table(heading: &str, t: &TestResult) -> String {
    let mut s = format!("test: {heading}\n");
    if let Some(hyp) = &t.meta.hypothesis {
        s.push_str(&format!("hypothesis: {hyp}\n"));
    }
    s.push_str(&format!(
        "n: {}   p: {}   slices: {}",
        t.meta.n, t.meta.p, t.meta.h
    ));
    if let Some(d) = t.meta.d {
        s.push_str(&format!("   d: {d}"));
    }
    if let Some(r) = t.meta.r {
        s.push_str(&format!("   r: {r}"));
    }
    s.push('\n');
    s.push_str(&format!("statistic: {}\n", format_sig(t.statistic, 6)));
    s.push_str(&format!("reference: {}\n", describe_reference(&t.reference)));
    s.push_str(&format!("p_value: {}\n", format_sig(t.p_value, 6)));
    s
}

fn cmd_dim(args: DimArgs) -> Result<String, String> {
    let analysis = load_analysis(&args.data)?;
    let variant: Variant = args.variant.into();
    let m_max = (analysis.p() - 1).min(analysis.h() - 2);
    let mut tests: Vec<TestResult> = Vec::with_capacity(m_max + 1);
    let mut accepted = None;
    for m in 0..=m_max {
        let mut t = analysis.marginal_dim_test(m, variant).map_err(estr)?;
        args.calibration.apply(&mut t)?;
        let stop = t.p_value > args.alpha;
        tests.push(t);
        if stop {
            accepted = Some(m);
            break;
        }
    }
    let (d_hat, capped) = match accepted {
        Some(m) => (m, false),
        None => (analysis.p().min(analysis.h() - 1), true),
    };
    match args.output.format {
        Format::Json => Ok(pretty(&json!({
            "d_hat": d_hat,
            "capped": capped,
            "tests": tests.iter().map(TestResult::to_json).collect::<Vec<_>>(),
        }))),
        Format::Table => {
            let mut s = format!(
                "sequential dimension tests ({} weighting, alpha {})\n",
                variant.tag(),
                args.alpha
            );
            s.push_str("m      statistic      p_value\n");
            for (m, t) in tests.iter().enumerate() {
                s.push_str(&format!(
                    "{:<6} {:<14} {}\n",
                    m,
                    format_sig(t.statistic, 6),
                    format_sig(t.p_value, 6)
                ));
            }
            s.push_str(&format!("d_hat: {d_hat}"));
            if capped {
                s.push_str("   (upper bound: every testable dimension was rejected)");
            }
            s.push('\n');
            Ok(s)
        }
    }
}

fn resolve_hypothesis(
    args: &CoordArgs,
    names: &[String],
) -> Result<Option<CoordinateHypothesis>, String> {
    if let Some(path) = &args.hypothesis {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| format!("{}: invalid JSON: {e}", path.display()))?;
        return hypothesis::from_json(&value, names).map(Some).map_err(estr);
    }
    if !args.vars.is_empty() {
        let value = json!({ "vars": args.vars });
        return hypothesis::from_json(&value, names).map(Some).map_err(estr);
    }
    Ok(None)
}

fn cmd_coord(args: CoordArgs) -> Result<String, String> {
    let analysis = load_analysis(&args.data)?;
    let variant: Variant = args.variant.into();
    match resolve_hypothesis(&args, analysis.data().names())? {
        Some(hyp) => coord_single(&args, &analysis, &hyp, variant),
        None => coord_scan(&args, &analysis, variant),
    }
}

fn coord_single(
    args: &CoordArgs,
    analysis: &Analysis,
    hyp: &CoordinateHypothesis,
    variant: Variant,
) -> Result<String, String> {
    match args.dim {
        None => {
            let mut t = analysis.marginal_coord_test(hyp, variant).map_err(estr)?;
            args.calibration.apply(&mut t)?;
            match args.output.format {
                Format::Json => Ok(pretty(&t.to_json())),
                Format::Table => Ok(render_result_table(
                    &format!("marginal coordinate ({})", variant.tag()),
                    &t,
                )),
            }
        }
        Some(d) => match analysis.conditional_coord_test(hyp, d, variant).map_err(estr)? {
            ConditionalOutcome::Tested(mut t) => {
                args.calibration.apply(&mut t)?;
                match args.output.format {
                    Format::Json => Ok(pretty(&t.to_json())),
                    Format::Table => Ok(render_result_table(
                        &format!("conditional coordinate given d = {d} ({})", variant.tag()),
                        &t,
                    )),
                }
            }
            outcome @ ConditionalOutcome::StructuralRejection { .. } => {
                match args.output.format {
                    Format::Json => Ok(pretty(&outcome.to_json())),
                    Format::Table => Ok(format!(
                        "test: conditional coordinate given d = {d} ({})\n\
                         hypothesis: {}\n\
                         result: the hypothesis has rank {} but only p - d = {} directions \
                         remain outside it; incompatible with dimension {d}, rejected outright\n",
                        variant.tag(),
                        hyp.label(),
                        hyp.r(),
                        analysis.p() - d,
                    )),
                }
            }
        },
    }
}

fn coord_scan(args: &CoordArgs, analysis: &Analysis, variant: Variant) -> Result<String, String> {
    let names = analysis.data().names().to_vec();
    let mut tests = Vec::with_capacity(names.len());
    for name in &names {
        let hyp = hypothesis::from_json(&json!({ "vars": [name] }), &names).map_err(estr)?;
        let mut t = match args.dim {
            None => analysis.marginal_coord_test(&hyp, variant).map_err(estr)?,
            Some(d) => analysis
                .conditional_coord_test(&hyp, d, variant)
                .map_err(estr)?
                .into_test()
                .ok_or_else(|| format!("predictor {name}: hypothesis rank exceeds p - d"))?,
        };
        args.calibration.apply(&mut t)?;
        tests.push(t);
    }
    match args.output.format {
        Format::Json => Ok(pretty(&Value::Array(
            tests.iter().map(TestResult::to_json).collect(),
        ))),
        Format::Table => {
            let heading = match args.dim {
                None => format!("marginal coordinate tests ({}), one predictor at a time", variant.tag()),
                Some(d) => format!(
                    "conditional coordinate tests given d = {d} ({}), one predictor at a time",
                    variant.tag()
                ),
            };
            let width = names
                .iter()
                .map(String::len)
                .max()
                .unwrap_or(0)
                .max("predictor".len())
                + 3;
            let mut s = format!("{heading}\n");
            s.push_str(&format!("{:<width$}statistic      p_value\n", "predictor"));
            for (name, t) in names.iter().zip(&tests) {
                s.push_str(&format!(
                    "{:<width$}{:<14} {}\n",
                    name,
                    format_sig(t.statistic, 6),
                    format_sig(t.p_value, 6)
                ));
            }
            Ok(s)
        }
    }
}

fn cmd_select(args: SelectArgs) -> Result<String, String> {
    let data = load_csv(&args.data.data, &args.data.response)
        .map_err(|e| format!("{}: {e}", args.data.data.display()))?;
    let mode: EliminationMode = args.mode.into();
    let variant: Variant = args.variant.into();
    let trace = backward_elimination(&data, args.data.slices as usize, args.alpha, mode, variant)
        .map_err(estr)?;
    match args.output.format {
        Format::Json => Ok(pretty(&trace.to_json())),
        Format::Table => {
            let mut s = format!(
                "backward elimination ({} scoring, {} weighting, alpha {})\n",
                mode.tag(),
                variant.tag(),
                args.alpha
            );
            for (i, round) in trace.rounds.iter().enumerate() {
                s.push_str(&format!("round {}", i + 1));
                if let Some(d) = round.d_hat {
                    s.push_str(&format!(" (d = {d})"));
                }
                s.push_str(":\n");
                let width = round
                    .active
                    .iter()
                    .map(String::len)
                    .max()
                    .unwrap_or(0)
                    .max("predictor".len())
                    + 3;
                for (name, pv) in round.active.iter().zip(&round.p_values) {
                    s.push_str(&format!("  {:<width$}{}\n", name, format_sig(*pv, 6)));
                }
                match &round.removed {
                    Some(name) => s.push_str(&format!("  removed: {name}\n")),
                    None => s.push_str("  removed: none (all p-values at or below alpha)\n"),
                }
            }
            if trace.retained.is_empty() {
                s.push_str("retained: (none)\n");
            } else {
                s.push_str(&format!("retained: {}\n", trace.retained.join(", ")));
            }
            Ok(s)
        }
    }
}

fn build_spec(opts: &SimOpts) -> Result<ModelSpec, String> {
    let mut spec = if let Some(path) = &opts.config {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str::<ModelSpec>(&text)
            .map_err(|e| format!("{}: invalid model config: {e}", path.display()))?
    } else {
        ModelSpec {
            model: opts.model.expect("clap enforces --model").into(),
            n: opts.n.expect("clap enforces --n"),
            p: opts.p.expect("clap enforces --p"),
            predictor_dist: opts.predictors.into(),
            error: opts.error.expect("clap enforces --error"),
            seed: 0,
        }
    };
    if let Some(seed) = opts.seed {
        spec.seed = seed;
    }
    spec.validate().map_err(estr)?;
    Ok(spec)
}

fn cmd_simulate(args: SimulateArgs) -> Result<String, String> {
    let (opts, target) = match args.kind {
        SimCommand::Level(opts) => (opts, None),
        SimCommand::Power(power) => {
            let target = power.target as usize - 1;
            (power.sim, Some(target))
        }
    };
    let spec = build_spec(&opts)?;
    let selection = opts.test.to_selection(opts.dim, opts.variant.into());
    let reps = opts.reps as usize;
    let slices = opts.slices as usize;
    let result = match target {
        None => sim::level_experiment(&spec, selection, reps, &opts.levels, slices),
        Some(t) => sim::power_experiment(&spec, selection, reps, &opts.levels, slices, t),
    }
    .map_err(estr)?;
    match opts.output.format {
        Format::Json => Ok(pretty(&result.to_json())),
        Format::Table => Ok(result.to_table()),
    }
}
