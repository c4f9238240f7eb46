//! Monte Carlo harness: benchmark regression models, level and power
//! experiments over the coordinate and dimension tests, and the linear-model
//! t-test used as a comparator in the power studies.
//!
//! Replication `i` of an experiment draws from stream `i` of the master
//! seed, so results are bit-identical whether replications run serially or
//! across threads, and a single replication can be regenerated in isolation.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::hypothesis::CoordinateHypothesis;
use crate::linalg::least_squares;
use crate::rng::Sampler;
use crate::special::student_t_two_sided;
use crate::testing::{Analysis, ConditionalOutcome, TestResult, Variant};

pub const DEFAULT_LEVELS: [f64; 4] = [0.01, 0.05, 0.10, 0.15];

/// Mean functions of the two benchmark models: `Linear` is Y = X₁ + ε, and
/// `Ratio` is Y = X₁ / (0.5 + (X₂ + 1.5)²) + ε. Only the first one or two
/// predictors enter; the rest are noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Linear,
    Ratio,
}

impl Model {
    fn min_p(self) -> usize {
        match self {
            Model::Linear => 1,
            Model::Ratio => 2,
        }
    }

    fn mean(self, x: &[f64]) -> f64 {
        match self {
            Model::Linear => x[0],
            Model::Ratio => {
                let s = x[1] + 1.5;
                x[0] / (0.5 + s * s)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorDist {
    StdNormal,
    ChiSq4,
    T5,
    Uniform,
}

impl PredictorDist {
    fn draw(self, s: &mut Sampler) -> f64 {
        match self {
            PredictorDist::StdNormal => s.std_normal(),
            PredictorDist::ChiSq4 => s.chi_squared(4),
            PredictorDist::T5 => s.student_t(5),
            PredictorDist::Uniform => s.uniform_in(-2.0, 2.0),
        }
    }
}

/// Error families: `Gaussian(σ)` is σ·N(0,1); `ScaledChiSq(D)` is
/// 6.4(χ²(D) − D)/√(2D), which shares its first two moments with
/// `Gaussian(6.4)`; `Hetero(τ)` is e^{τX₁}·N(0,1), heteroscedastic in the
/// first predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorDist {
    Gaussian(f64),
    ScaledChiSq(u32),
    Hetero(f64),
}

impl ErrorDist {
    fn draw(self, s: &mut Sampler, x1: f64) -> f64 {
        match self {
            ErrorDist::Gaussian(sigma) => sigma * s.std_normal(),
            ErrorDist::ScaledChiSq(d) => {
                let d_f = f64::from(d);
                6.4 * (s.chi_squared(d) - d_f) / (2.0 * d_f).sqrt()
            }
            ErrorDist::Hetero(tau) => (tau * x1).exp() * s.std_normal(),
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            ErrorDist::Gaussian(sigma) if !(sigma >= 0.0 && sigma.is_finite()) => Err(
                Error::InvalidParameter(format!("gaussian error scale must be ≥ 0, got {sigma}")),
            ),
            ErrorDist::ScaledChiSq(d) if d < 1 => Err(Error::InvalidParameter(
                "scaled chi-squared error needs at least 1 degree of freedom".into(),
            )),
            ErrorDist::Hetero(tau) if !tau.is_finite() => Err(Error::InvalidParameter(format!(
                "heteroscedastic error rate must be finite, got {tau}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: Model,
    pub n: usize,
    pub p: usize,
    pub predictor_dist: PredictorDist,
    pub error: ErrorDist,
    pub seed: u64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p < self.model.min_p() {
            return Err(Error::InvalidParameter(format!(
                "{:?} needs at least {} predictor(s), got p = {}",
                self.model,
                self.model.min_p(),
                self.p
            )));
        }
        if self.n <= self.p {
            return Err(Error::TooFewObservations {
                n: self.n,
                p: self.p,
            });
        }
        self.error.validate()
    }

    fn describe(&self) -> String {
        format!(
            "{} n={} p={} predictors={} error={:?} seed={}",
            match self.model {
                Model::Linear => "linear",
                Model::Ratio => "ratio",
            },
            self.n,
            self.p,
            match self.predictor_dist {
                PredictorDist::StdNormal => "std_normal",
                PredictorDist::ChiSq4 => "chisq4",
                PredictorDist::T5 => "t5",
                PredictorDist::Uniform => "uniform(-2,2)",
            },
            self.error,
            self.seed
        )
    }
}

/// Draw one dataset from stream `stream` of the spec's seed. Each
/// observation consumes its p predictor draws and then its error draw, in
/// that order.
pub fn gen_dataset_stream(spec: &ModelSpec, stream: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut s = Sampler::new(spec.seed, stream);
    let n = spec.n;
    let p = spec.p;
    let mut x = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    let mut row = vec![0.0; p];
    for i in 0..n {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = spec.predictor_dist.draw(&mut s);
            x[(i, j)] = *slot;
        }
        y[i] = spec.model.mean(&row) + spec.error.draw(&mut s, row[0]);
    }
    let names = (0..p).map(|j| format!("x{}", j + 1)).collect();
    Dataset::new(x, y, names)
}

pub fn gen_dataset(spec: &ModelSpec) -> Result<Dataset> {
    gen_dataset_stream(spec, 0)
}

/// Which test an experiment applies to its target predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestSelection {
    MarginalCoord { variant: Variant },
    ConditionalCoord { d: usize, variant: Variant },
    MarginalDim { m: usize, variant: Variant },
    ConstrainedDim { d: usize, variant: Variant },
    DiffStat { d: usize },
}

impl TestSelection {
    pub fn describe(self) -> String {
        match self {
            TestSelection::MarginalCoord { variant } => {
                format!("marginal_coord/{}", variant.tag())
            }
            TestSelection::ConditionalCoord { d, variant } => {
                format!("conditional_coord(d={d})/{}", variant.tag())
            }
            TestSelection::MarginalDim { m, variant } => {
                format!("marginal_dim(m={m})/{}", variant.tag())
            }
            TestSelection::ConstrainedDim { d, variant } => {
                format!("constrained_dim(d={d})/{}", variant.tag())
            }
            TestSelection::DiffStat { d } => format!("diff_stat(d={d})"),
        }
    }

    /// Run the selected test against `target` (ignored by the dimension
    /// test, which has no hypothesis).
    pub fn run(self, analysis: &Analysis, target: usize) -> Result<TestResult> {
        let single = |ana: &Analysis| CoordinateHypothesis::predictor_subset(&[target], ana.p());
        let lift = |outcome: ConditionalOutcome| {
            outcome.into_test().ok_or_else(|| {
                Error::InvalidParameter(
                    "selected test is structurally impossible at this (p, d, r)".into(),
                )
            })
        };
        match self {
            TestSelection::MarginalCoord { variant } => {
                analysis.marginal_coord_test(&single(analysis)?, variant)
            }
            TestSelection::ConditionalCoord { d, variant } => {
                lift(analysis.conditional_coord_test(&single(analysis)?, d, variant)?)
            }
            TestSelection::MarginalDim { m, variant } => analysis.marginal_dim_test(m, variant),
            TestSelection::ConstrainedDim { d, variant } => {
                lift(analysis.constrained_dim_test(&single(analysis)?, d, variant)?)
            }
            TestSelection::DiffStat { d } => lift(analysis.diff_test(&single(analysis)?, d)?),
        }
    }
}

/// Run `reps` independent replications and return the per-replication test
/// results in replication order.
pub fn replicate_tests(
    spec: &ModelSpec,
    selection: TestSelection,
    h: usize,
    reps: usize,
    target: usize,
) -> Result<Vec<TestResult>> {
    spec.validate()?;
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let data = gen_dataset_stream(spec, rep as u64)?;
            let analysis = Analysis::new(data, h)?;
            selection.run(&analysis, target)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct LevelRow {
    pub nominal: f64,
    pub count: usize,
    pub fraction: f64,
    pub se: f64,
}

impl LevelRow {
    fn from_pvalues(nominal: f64, pvalues: &[f64]) -> LevelRow {
        let reps = pvalues.len();
        let count = pvalues.iter().filter(|&&p| p <= nominal).count();
        let fraction = count as f64 / reps as f64;
        let se = (fraction * (1.0 - fraction) / reps as f64).sqrt();
        LevelRow {
            nominal,
            count,
            fraction,
            se,
        }
    }

    fn to_json(&self) -> Value {
        json!({
            "nominal": self.nominal,
            "count": self.count,
            "fraction": self.fraction,
            "se": self.se,
        })
    }
}

#[derive(Debug, Clone)]
pub struct PowerMetrics {
    /// Rejection rows for the linear-model t-test on the target predictor.
    pub t_test: Vec<LevelRow>,
    /// 0.05 / 0.5 / 0.95 quantiles of |corr(X_target, OLS fitted values)|.
    pub corr_ols: [f64; 3],
    /// Same quantiles of |corr(X_target, first fitted regression predictor)|.
    pub corr_sir: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub label: String,
    pub spec: ModelSpec,
    pub reps: usize,
    pub target: usize,
    pub levels: Vec<LevelRow>,
    pub power: Option<PowerMetrics>,
}

impl ExperimentResult {
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "test": self.label,
            "spec": serde_json::to_value(&self.spec).expect("spec serializes"),
            "reps": self.reps,
            "target": self.target + 1,
            "levels": self.levels.iter().map(LevelRow::to_json).collect::<Vec<_>>(),
        });
        if let Some(power) = &self.power {
            v["t_test"] = power.t_test.iter().map(LevelRow::to_json).collect::<Vec<_>>().into();
            v["corr_ols_quantiles"] = json!({
                "q05": power.corr_ols[0], "q50": power.corr_ols[1], "q95": power.corr_ols[2],
            });
            v["corr_sir_quantiles"] = json!({
                "q05": power.corr_sir[0], "q50": power.corr_sir[1], "q95": power.corr_sir[2],
            });
        }
        v
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("test: {}\n", self.label));
        out.push_str(&format!("model: {}\n", self.spec.describe()));
        out.push_str(&format!(
            "reps: {}   target predictor: x{}\n",
            self.reps,
            self.target + 1
        ));
        match &self.power {
            None => {
                out.push_str("nominal    reject     se\n");
                for row in &self.levels {
                    out.push_str(&format!(
                        "{:<10} {:<10} {}\n",
                        format_sig(row.nominal, 6),
                        format_sig(row.fraction, 6),
                        format_sig(row.se, 6)
                    ));
                }
            }
            Some(power) => {
                out.push_str("nominal    reject     se         t_reject   t_se\n");
                for (row, trow) in self.levels.iter().zip(&power.t_test) {
                    out.push_str(&format!(
                        "{:<10} {:<10} {:<10} {:<10} {}\n",
                        format_sig(row.nominal, 6),
                        format_sig(row.fraction, 6),
                        format_sig(row.se, 6),
                        format_sig(trow.fraction, 6),
                        format_sig(trow.se, 6)
                    ));
                }
                out.push_str(&format!(
                    "|corr(x{}, ols fit)| quantiles (0.05, 0.5, 0.95): {}, {}, {}\n",
                    self.target + 1,
                    format_sig(power.corr_ols[0], 6),
                    format_sig(power.corr_ols[1], 6),
                    format_sig(power.corr_ols[2], 6)
                ));
                out.push_str(&format!(
                    "|corr(x{}, sir predictor)| quantiles (0.05, 0.5, 0.95): {}, {}, {}\n",
                    self.target + 1,
                    format_sig(power.corr_sir[0], 6),
                    format_sig(power.corr_sir[1], 6),
                    format_sig(power.corr_sir[2], 6)
                ));
            }
        }
        out
    }
}

fn check_experiment_args(reps: usize, levels: &[f64]) -> Result<()> {
    if reps < 100 {
        return Err(Error::InvalidParameter(format!(
            "experiments need at least 100 replications, got {reps}"
        )));
    }
    if levels.is_empty() {
        return Err(Error::EmptyData("no nominal levels supplied".into()));
    }
    for &l in levels {
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::InvalidParameter(format!(
                "nominal level {l} outside [0, 1]"
            )));
        }
    }
    Ok(())
}

/// Null-rejection study: applies the selected test to the last predictor,
/// which never enters the mean function, and counts rejections per nominal
/// level.
pub fn level_experiment(
    spec: &ModelSpec,
    selection: TestSelection,
    reps: usize,
    levels: &[f64],
    h: usize,
) -> Result<ExperimentResult> {
    check_experiment_args(reps, levels)?;
    let target = spec.p - 1;
    let tests = replicate_tests(spec, selection, h, reps, target)?;
    let pvalues: Vec<f64> = tests.iter().map(|t| t.p_value).collect();
    let rows = levels
        .iter()
        .map(|&l| LevelRow::from_pvalues(l, &pvalues))
        .collect();
    Ok(ExperimentResult {
        label: selection.describe(),
        spec: spec.clone(),
        reps,
        target,
        levels: rows,
        power: None,
    })
}

struct PowerRep {
    p_sdr: f64,
    p_t: f64,
    c_ols: f64,
    c_sir: f64,
}

/// Power study against a predictor that drives the mean function: runs the
/// selected test and the linear-model t-test per replication, and tracks the
/// absolute correlations between the target predictor, the OLS fit, and the
/// leading fitted regression predictor.
pub fn power_experiment(
    spec: &ModelSpec,
    selection: TestSelection,
    reps: usize,
    levels: &[f64],
    h: usize,
    target: usize,
) -> Result<ExperimentResult> {
    check_experiment_args(reps, levels)?;
    if target >= spec.p {
        return Err(Error::PredictorIndex {
            index: target,
            p: spec.p,
        });
    }
    let per_rep: Vec<PowerRep> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let data = gen_dataset_stream(spec, rep as u64)?;
            let (p_t, fitted) = ols_fit(&data, target)?;
            let analysis = Analysis::new(data, h)?;
            let p_sdr = selection.run(&analysis, target)?.p_value;
            let fit = analysis.fit(1)?;
            let sir_pred = &analysis.sample().z * fit.gamma_hat().column(0);
            let x_target = analysis.data().x().column(target).clone_owned();
            Ok(PowerRep {
                p_sdr,
                p_t,
                c_ols: abs_corr(&x_target, &fitted),
                c_sir: abs_corr(&x_target, &sir_pred),
            })
        })
        .collect::<Result<_>>()?;
    let p_sdr: Vec<f64> = per_rep.iter().map(|r| r.p_sdr).collect();
    let p_t: Vec<f64> = per_rep.iter().map(|r| r.p_t).collect();
    let mut c_ols: Vec<f64> = per_rep.iter().map(|r| r.c_ols).collect();
    let mut c_sir: Vec<f64> = per_rep.iter().map(|r| r.c_sir).collect();
    c_ols.sort_by(f64::total_cmp);
    c_sir.sort_by(f64::total_cmp);
    let quantiles = |sorted: &[f64]| {
        [
            quantile(sorted, 0.05),
            quantile(sorted, 0.5),
            quantile(sorted, 0.95),
        ]
    };
    Ok(ExperimentResult {
        label: selection.describe(),
        spec: spec.clone(),
        reps,
        target,
        levels: levels
            .iter()
            .map(|&l| LevelRow::from_pvalues(l, &p_sdr))
            .collect(),
        power: Some(PowerMetrics {
            t_test: levels
                .iter()
                .map(|&l| LevelRow::from_pvalues(l, &p_t))
                .collect(),
            corr_ols: quantiles(&c_ols),
            corr_sir: quantiles(&c_sir),
        }),
    })
}

/// Two-sided p-value for the coefficient of predictor `j` in the OLS fit of
/// y on the predictors with an intercept, referred to t(n − p − 1).
pub fn ols_t_test(data: &Dataset, j: usize) -> Result<f64> {
    ols_fit(data, j).map(|(p, _)| p)
}

fn ols_fit(data: &Dataset, j: usize) -> Result<(f64, DVector<f64>)> {
    let n = data.n();
    let p = data.p();
    if j >= p {
        return Err(Error::PredictorIndex { index: j, p });
    }
    if n < p + 2 {
        return Err(Error::TooFewObservations { n, p: p + 1 });
    }
    let mut design = DMatrix::zeros(n, p + 1);
    for i in 0..n {
        design[(i, 0)] = 1.0;
        for k in 0..p {
            design[(i, k + 1)] = data.x()[(i, k)];
        }
    }
    let ls = least_squares(&design, data.y())?;
    let fitted = &design * &ls.coef;
    let dof = (n - p - 1) as f64;
    let s2 = (data.y() - &fitted).norm_squared() / dof;
    let var_scale = ls.r_inv.row(j + 1).norm_squared();
    let se = (s2 * var_scale).sqrt();
    let p_value = if se == 0.0 {
        f64::from(ls.coef[j + 1].abs() <= 0.0)
    } else {
        student_t_two_sided(ls.coef[j + 1] / se, dof)
    };
    Ok((p_value, fitted))
}

fn abs_corr(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.sum() / n, b.sum() / n);
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for i in 0..a.len() {
        let da = a[i] - ma;
        let db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).abs()
}

/// Nearest-rank quantile of an ascending-sorted sample.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = (q * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Render with `sig` significant digits: fixed-point for magnitudes between
/// 1e-6 and 1e9, scientific outside that window.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-6..=9).contains(&mag) {
        return format!("{:.*e}", sig.saturating_sub(1), x);
    }
    let decimals = (sig as i32 - 1 - mag).max(0) as usize;
    format!("{:.*}", decimals, x)
}
