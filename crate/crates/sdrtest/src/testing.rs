//! The hypothesis tests: marginal dimension tests with sequential dimension
//! estimation, marginal and conditional coordinate tests, the constrained
//! dimension statistic, the difference statistic, and backward elimination.
//!
//! Every test reports a [`TestResult`] carrying the statistic, the reference
//! distribution it was compared against (a chi-squared or a weighted
//! chi-squared mixture), and the p-value. The `constrained` variants use the
//! references that are exact under linearity and constant conditional
//! covariance of the predictors; the `general` variants estimate the mixture
//! weights from the data and are the default everywhere.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::chisq::{chisq_survival, ChiSqMixture};
use crate::config::STAT_CLAMP;
use crate::cov::{
    delta_hat, dim_test_weights, indicator_residuals, omega_h_constrained_core_weights,
    omega_h_general, omega_hd_constrained_core_weights, omega_hd_general, IndicatorResiduals,
};
use crate::data::{slice_response, Dataset, SlicedResponse};
use crate::error::{Error, Result};
use crate::hypothesis::{projected_spectrum, to_z_basis, CoordinateHypothesis, HypothesisBasisZ};
use crate::sir::{fit_sir, slice_means, SirFit};
use crate::standardize::{standardize, StandardizedSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    General,
    Constrained,
}

impl Variant {
    pub fn tag(self) -> &'static str {
        match self {
            Variant::General => "general",
            Variant::Constrained => "constrained",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(Variant::General),
            "constrained" => Ok(Variant::Constrained),
            other => Err(Error::InvalidParameter(format!(
                "variant must be \"general\" or \"constrained\", got \"{other}\""
            ))),
        }
    }
}

/// Null reference distribution of a statistic. `Mixture { weights, df }`
/// stands for Σ_i weights[i] · χ²(df) with independent chi-squared terms.
/// A chi-squared with zero degrees of freedom is the point mass at zero; its
/// survival value is 1 for the (structurally zero) statistics that carry it.
#[derive(Debug, Clone)]
pub enum Reference {
    ChiSquared { df: u32 },
    Mixture { weights: Vec<f64>, df: u32 },
}

impl Reference {
    pub fn p_value(&self, t: f64) -> Result<f64> {
        match self {
            Reference::ChiSquared { df } => Ok(if *df == 0 {
                1.0
            } else {
                chisq_survival(f64::from(*df), t)
            }),
            Reference::Mixture { weights, df } => {
                Ok(ChiSqMixture::new(weights, *df)?.satterthwaite_pvalue(t))
            }
        }
    }

    /// Monte Carlo tail probability with its standard error; exact references
    /// are returned as-is with SE 0.
    pub fn mc_p_value(&self, t: f64, draws: usize, seed: u64) -> Result<(f64, f64)> {
        match self {
            Reference::ChiSquared { .. } => Ok((self.p_value(t)?, 0.0)),
            Reference::Mixture { weights, df } => {
                Ok(ChiSqMixture::new(weights, *df)?.mc_pvalue(t, draws, seed))
            }
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Reference::ChiSquared { df } => json!({ "type": "chisq", "df": df }),
            Reference::Mixture { weights, df } => {
                json!({ "type": "mixture", "weights": weights, "df": df })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TestMeta {
    pub n: usize,
    pub p: usize,
    pub h: usize,
    pub d: Option<usize>,
    pub r: Option<usize>,
    pub hypothesis: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub reference: Reference,
    pub variant: Variant,
    pub meta: TestMeta,
}

impl TestResult {
    fn from_parts(raw: f64, reference: Reference, variant: Variant, meta: TestMeta) -> Result<Self> {
        // Statistics are sums of nonnegative spectral quantities; anything
        // below the clamp is rounding dust from a structural zero.
        let statistic = if raw < STAT_CLAMP { 0.0 } else { raw };
        let p_value = reference.p_value(statistic)?;
        Ok(TestResult {
            statistic,
            p_value,
            reference,
            variant,
            meta,
        })
    }

    /// Recompute the p-value by simulating the reference distribution
    /// instead of the Satterthwaite approximation. Returns (p̂, SE).
    pub fn mc_p_value(&self, draws: usize, seed: u64) -> Result<(f64, f64)> {
        self.reference.mc_p_value(self.statistic, draws, seed)
    }

    pub fn to_json(&self) -> Value {
        let mut meta = Map::new();
        meta.insert("n".into(), json!(self.meta.n));
        meta.insert("p".into(), json!(self.meta.p));
        meta.insert("h".into(), json!(self.meta.h));
        if let Some(d) = self.meta.d {
            meta.insert("d".into(), json!(d));
        }
        if let Some(r) = self.meta.r {
            meta.insert("r".into(), json!(r));
        }
        if let Some(hyp) = &self.meta.hypothesis {
            meta.insert("hypothesis".into(), json!(hyp));
        }
        json!({
            "statistic": self.statistic,
            "p_value": self.p_value,
            "reference": self.reference.to_json(),
            "variant": self.variant.tag(),
            "meta": Value::Object(meta),
        })
    }
}

/// Outcome of a test that conditions on a dimension d: either an ordinary
/// result, or the finding that the hypothesis leaves fewer than d directions
/// (r > p − d), in which case it is incompatible with the dimension rather
/// than testable against a sampling distribution.
#[derive(Debug, Clone)]
pub enum ConditionalOutcome {
    Tested(TestResult),
    StructuralRejection { r: usize, p: usize, d: usize },
}

impl ConditionalOutcome {
    pub fn test(&self) -> Option<&TestResult> {
        match self {
            ConditionalOutcome::Tested(t) => Some(t),
            ConditionalOutcome::StructuralRejection { .. } => None,
        }
    }

    pub fn into_test(self) -> Option<TestResult> {
        match self {
            ConditionalOutcome::Tested(t) => Some(t),
            ConditionalOutcome::StructuralRejection { .. } => None,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            ConditionalOutcome::Tested(t) => t.to_json(),
            ConditionalOutcome::StructuralRejection { r, p, d } => json!({
                "structural_rejection": {
                    "r": r,
                    "p": p,
                    "d": d,
                    "detail": "hypothesis rank exceeds p - d, so no d-dimensional fit can avoid the hypothesized subspace",
                }
            }),
        }
    }
}

/// Sequential dimension estimate: d̂ and the trace of tests that produced it.
#[derive(Debug, Clone)]
pub struct DimEstimate {
    pub d_hat: usize,
    pub tests: Vec<TestResult>,
    /// Every testable m was rejected, so d̂ is the upper bound min(p, h−1)
    /// rather than an accepted hypothesis.
    pub capped: bool,
}

impl DimEstimate {
    pub fn p_values(&self) -> Vec<f64> {
        self.tests.iter().map(|t| t.p_value).collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "d_hat": self.d_hat,
            "capped": self.capped,
            "tests": self.tests.iter().map(TestResult::to_json).collect::<Vec<_>>(),
        })
    }
}

/// A dataset with everything the tests share precomputed: the standardized
/// predictors, the slicing of the response, the scaled slice-mean matrix,
/// and the slice-indicator regression residuals. Construct once, run any
/// number of tests against it.
pub struct Analysis {
    data: Dataset,
    sample: StandardizedSample,
    slices: SlicedResponse,
    means: DMatrix<f64>,
    zn: DMatrix<f64>,
    residuals: IndicatorResiduals,
    delta: OnceLock<DMatrix<f64>>,
}

impl Analysis {
    pub fn new(data: Dataset, h: usize) -> Result<Self> {
        let slices = slice_response(data.y(), h)?;
        let sample = standardize(&data)?;
        let (means, zn) = slice_means(&sample, &slices);
        let residuals = indicator_residuals(&data, &sample, &slices);
        Ok(Analysis {
            data,
            sample,
            slices,
            means,
            zn,
            residuals,
            delta: OnceLock::new(),
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn sample(&self) -> &StandardizedSample {
        &self.sample
    }

    pub fn slices(&self) -> &SlicedResponse {
        &self.slices
    }

    /// The p×h matrix whose column y is √f̂_y Z̄_y.
    pub fn zn(&self) -> &DMatrix<f64> {
        &self.zn
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn p(&self) -> usize {
        self.data.p()
    }

    /// Number of slices actually formed (may be below the request when the
    /// response has few distinct values).
    pub fn h(&self) -> usize {
        self.slices.h()
    }

    pub fn fit(&self, d: usize) -> Result<SirFit> {
        fit_sir(&self.zn, &self.means, d)
    }

    fn delta(&self) -> Result<&DMatrix<f64>> {
        if let Some(d) = self.delta.get() {
            return Ok(d);
        }
        let computed = delta_hat(&self.sample, &self.slices)?;
        Ok(self.delta.get_or_init(|| computed))
    }

    fn meta(&self, d: Option<usize>, r: Option<usize>, hypothesis: Option<String>) -> TestMeta {
        TestMeta {
            n: self.n(),
            p: self.p(),
            h: self.h(),
            d,
            r,
            hypothesis,
        }
    }

    /// Test of dimension m against dimension > m via the scaled tail sum of
    /// the kernel spectrum, n Σ_{j>m} λ̂_j.
    pub fn marginal_dim_test(&self, m: usize, variant: Variant) -> Result<TestResult> {
        let p = self.p();
        let h = self.h();
        if m >= p {
            return Err(Error::DimensionOutOfRange {
                d: m,
                bound: format!("hypothesized dimension must be below p = {p}"),
            });
        }
        if h < m + 2 {
            return Err(Error::DimensionOutOfRange {
                d: m,
                bound: format!("testing dimension {m} needs at least {} slices, have {h}", m + 2),
            });
        }
        let fit = self.fit(m)?;
        let statistic = fit.tail_statistic(self.n(), m);
        let reference = match variant {
            Variant::Constrained => Reference::ChiSquared {
                df: ((p - m) * (h - m - 1)) as u32,
            },
            Variant::General => Reference::Mixture {
                weights: dim_test_weights(self.delta()?, &fit, None)?,
                df: 1,
            },
        };
        TestResult::from_parts(statistic, reference, variant, self.meta(Some(m), None, None))
    }

    /// Test m = 0, 1, … until the first non-rejection; that m is d̂. When
    /// every testable m is rejected, d̂ = min(p, h−1) with the capped flag.
    pub fn estimate_dim(&self, alpha: f64, variant: Variant) -> Result<DimEstimate> {
        check_alpha(alpha)?;
        let p = self.p();
        let h = self.h();
        let m_max = (p - 1).min(h - 2);
        let mut tests = Vec::with_capacity(m_max + 1);
        for m in 0..=m_max {
            let result = self.marginal_dim_test(m, variant)?;
            let rejected = result.p_value <= alpha;
            tests.push(result);
            if !rejected {
                return Ok(DimEstimate {
                    d_hat: m,
                    tests,
                    capped: false,
                });
            }
        }
        Ok(DimEstimate {
            d_hat: p.min(h - 1),
            tests,
            capped: true,
        })
    }

    /// Test that the hypothesized predictor subspace carries no regression
    /// information, without fixing the dimension: T = n‖α̂ᵀZ_n‖²_F.
    pub fn marginal_coord_test(
        &self,
        hyp: &CoordinateHypothesis,
        variant: Variant,
    ) -> Result<TestResult> {
        let basis = to_z_basis(hyp, &self.sample)?;
        let r = basis.r();
        let projected = basis.alpha_hat.transpose() * &self.zn;
        let statistic = self.n() as f64 * projected.norm_squared();
        let reference = match variant {
            Variant::Constrained => Reference::Mixture {
                weights: omega_h_constrained_core_weights(&self.zn, self.slices.roots())?,
                df: r as u32,
            },
            Variant::General => {
                let wm = omega_h_general(&self.residuals, &self.sample, &basis, &self.slices);
                Reference::Mixture {
                    weights: wm.weights()?,
                    df: 1,
                }
            }
        };
        TestResult::from_parts(
            statistic,
            reference,
            variant,
            self.meta(None, Some(r), Some(hyp.label().to_string())),
        )
    }

    fn conditional_guard(
        &self,
        hyp: &CoordinateHypothesis,
        d: usize,
    ) -> Result<Option<(HypothesisBasisZ, SirFit)>> {
        let p = self.p();
        let h = self.h();
        let d_max = (p - 1).min(h - 1);
        if d < 1 || d > d_max {
            return Err(Error::DimensionOutOfRange {
                d,
                bound: format!("conditional tests need 1 ≤ d ≤ min(p−1, h−1) = {d_max}"),
            });
        }
        let basis = to_z_basis(hyp, &self.sample)?;
        if basis.r() > p - d {
            return Ok(None);
        }
        let fit = self.fit(d)?;
        Ok(Some((basis, fit)))
    }

    /// Coordinate test given dimension d: the drop in the leading spectrum
    /// when the fit is forced off the hypothesized subspace,
    /// n Σ_{j≤d} (λ̂_j − λ̂'_j).
    pub fn conditional_coord_test(
        &self,
        hyp: &CoordinateHypothesis,
        d: usize,
        variant: Variant,
    ) -> Result<ConditionalOutcome> {
        let Some((basis, fit)) = self.conditional_guard(hyp, d)? else {
            return Ok(ConditionalOutcome::StructuralRejection {
                r: hyp.r(),
                p: self.p(),
                d,
            });
        };
        let proj = projected_spectrum(&fit, &basis);
        let leading: f64 = fit.lambdas().iter().take(d).sum();
        let leading_prime: f64 = proj.lambdas_prime.iter().take(d).sum();
        let statistic = self.n() as f64 * (leading - leading_prime);
        let r = basis.r();
        let reference = match variant {
            Variant::Constrained => Reference::Mixture {
                weights: omega_hd_constrained_core_weights(&fit.lambdas().as_slice()[..d])?,
                df: r as u32,
            },
            Variant::General => {
                let omega_h = omega_h_general(&self.residuals, &self.sample, &basis, &self.slices);
                let wm = omega_hd_general(&omega_h, fit.psi1(), r)?;
                Reference::Mixture {
                    weights: wm.weights()?,
                    df: 1,
                }
            }
        };
        Ok(ConditionalOutcome::Tested(TestResult::from_parts(
            statistic,
            reference,
            variant,
            self.meta(Some(d), Some(r), Some(hyp.label().to_string())),
        )?))
    }

    /// Dimension test computed after projecting the slice means off the
    /// hypothesized subspace: T' = n Σ_{j>d} λ̂'_j.
    pub fn constrained_dim_test(
        &self,
        hyp: &CoordinateHypothesis,
        d: usize,
        variant: Variant,
    ) -> Result<ConditionalOutcome> {
        let Some((basis, fit)) = self.conditional_guard(hyp, d)? else {
            return Ok(ConditionalOutcome::StructuralRejection {
                r: hyp.r(),
                p: self.p(),
                d,
            });
        };
        let proj = projected_spectrum(&fit, &basis);
        let tail: f64 = proj.lambdas_prime.iter().skip(d).sum();
        let statistic = self.n() as f64 * tail;
        let r = basis.r();
        let (p, h) = (self.p(), self.h());
        let reference = match variant {
            Variant::Constrained => Reference::ChiSquared {
                df: ((p - d - r) * (h - d - 1)) as u32,
            },
            Variant::General => Reference::Mixture {
                weights: dim_test_weights(self.delta()?, &fit, Some(&proj.f_h))?,
                df: 1,
            },
        };
        Ok(ConditionalOutcome::Tested(TestResult::from_parts(
            statistic,
            reference,
            variant,
            self.meta(Some(d), Some(r), Some(hyp.label().to_string())),
        )?))
    }

    /// The difference T_n(d) − T'_n(d) between the plain and the projected
    /// dimension statistics, referred to χ²(r(h−d−1)).
    pub fn diff_test(&self, hyp: &CoordinateHypothesis, d: usize) -> Result<ConditionalOutcome> {
        let Some((basis, fit)) = self.conditional_guard(hyp, d)? else {
            return Ok(ConditionalOutcome::StructuralRejection {
                r: hyp.r(),
                p: self.p(),
                d,
            });
        };
        let proj = projected_spectrum(&fit, &basis);
        let t_full = fit.tail_statistic(self.n(), d);
        let t_prime = self.n() as f64 * proj.lambdas_prime.iter().skip(d).sum::<f64>();
        let r = basis.r();
        let df = (r * (self.h() - d - 1)) as u32;
        Ok(ConditionalOutcome::Tested(TestResult::from_parts(
            t_full - t_prime,
            Reference::ChiSquared { df },
            Variant::Constrained,
            self.meta(Some(d), Some(r), Some(hyp.label().to_string())),
        )?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EliminationMode {
    /// Rank predictors by the marginal coordinate test each round.
    Marginal,
    /// Re-estimate the dimension each round and rank by the conditional
    /// coordinate test given d̂.
    Conditional,
}

impl EliminationMode {
    pub fn tag(self) -> &'static str {
        match self {
            EliminationMode::Marginal => "marginal",
            EliminationMode::Conditional => "conditional",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EliminationRound {
    /// Predictor names active at the start of the round.
    pub active: Vec<String>,
    /// Per-predictor p-values, parallel to `active`.
    pub p_values: Vec<f64>,
    /// Dimension used this round (conditional mode only).
    pub d_hat: Option<usize>,
    /// Predictor removed at the end of the round; `None` on the final round.
    pub removed: Option<String>,
}

#[derive(Debug, Clone)]
pub struct EliminationTrace {
    pub rounds: Vec<EliminationRound>,
    pub retained: Vec<String>,
}

impl EliminationTrace {
    pub fn to_json(&self) -> Value {
        let rounds: Vec<Value> = self
            .rounds
            .iter()
            .map(|r| {
                let mut obj = Map::new();
                obj.insert("active".into(), json!(r.active));
                obj.insert("p_values".into(), json!(r.p_values));
                if let Some(d) = r.d_hat {
                    obj.insert("d_hat".into(), json!(d));
                }
                obj.insert("removed".into(), json!(r.removed));
                Value::Object(obj)
            })
            .collect();
        json!({ "rounds": rounds, "retained": self.retained })
    }
}

/// Remove, one per round, the predictor with the largest p-value above
/// `alpha`. Marginal mode scores each predictor by its marginal coordinate
/// test and may empty the predictor set; conditional mode re-estimates the
/// dimension each round, scores by the conditional test given d̂, and stops
/// once a single predictor remains (the conditional test needs r ≤ p − d).
/// Rounds in which d̂ = 0 treat every predictor as uninformative (p-value 1)
/// and drop the first one.
pub fn backward_elimination(
    data: &Dataset,
    h: usize,
    alpha: f64,
    mode: EliminationMode,
    variant: Variant,
) -> Result<EliminationTrace> {
    check_alpha(alpha)?;
    if data.p() < 2 {
        return Err(Error::InvalidParameter(format!(
            "backward elimination needs at least two predictors, have {}",
            data.p()
        )));
    }
    let stop_size = match mode {
        EliminationMode::Marginal => 0,
        EliminationMode::Conditional => 1,
    };
    let mut active: Vec<usize> = (0..data.p()).collect();
    let mut rounds = Vec::new();
    while active.len() > stop_size {
        let sub = data.select(&active)?;
        let analysis = Analysis::new(sub, h)?;
        let p_act = analysis.p();
        let (d_hat, p_values) = match mode {
            EliminationMode::Marginal => {
                let pv = (0..p_act)
                    .into_par_iter()
                    .map(|j| {
                        let hyp = CoordinateHypothesis::predictor_subset(&[j], p_act)?
                            .with_label(analysis.data().names()[j].clone());
                        Ok(analysis.marginal_coord_test(&hyp, variant)?.p_value)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                (None, pv)
            }
            EliminationMode::Conditional => {
                let est = analysis.estimate_dim(alpha, variant)?;
                let d_use = est.d_hat.min(p_act - 1).min(analysis.h() - 1);
                if d_use == 0 {
                    (Some(0), vec![1.0; p_act])
                } else {
                    let pv = (0..p_act)
                        .into_par_iter()
                        .map(|j| {
                            let hyp = CoordinateHypothesis::predictor_subset(&[j], p_act)?
                                .with_label(analysis.data().names()[j].clone());
                            match analysis.conditional_coord_test(&hyp, d_use, variant)? {
                                ConditionalOutcome::Tested(t) => Ok(t.p_value),
                                ConditionalOutcome::StructuralRejection { .. } => Ok(0.0),
                            }
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    (Some(d_use), pv)
                }
            }
        };
        let names: Vec<String> = active.iter().map(|&i| data.names()[i].clone()).collect();
        let (worst, worst_p) = p_values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bj, bp), (j, &pv)| {
                if pv > bp {
                    (j, pv)
                } else {
                    (bj, bp)
                }
            });
        if worst_p > alpha {
            let removed = names[worst].clone();
            rounds.push(EliminationRound {
                active: names,
                p_values,
                d_hat,
                removed: Some(removed),
            });
            active.remove(worst);
        } else {
            rounds.push(EliminationRound {
                active: names,
                p_values,
                d_hat,
                removed: None,
            });
            break;
        }
    }
    let retained = active.iter().map(|&i| data.names()[i].clone()).collect();
    Ok(EliminationTrace { rounds, retained })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "significance level must lie strictly between 0 and 1, got {alpha}"
        )))
    }
}
