//! Coordinate hypotheses about predictor contributions, their orthonormal
//! bases on the standardized scale, and the spectrum after projecting the
//! kernel off the hypothesis subspace.
//!
//! A hypothesis is a subspace H of predictor space, given by a full-rank p×r
//! matrix α_x; the claim under test is that the regression carries no
//! information along H. Subsets of predictors are the common case (α_x made
//! of coordinate axes), but any full-rank matrix works.

use nalgebra::{DMatrix, DVector};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, sym_inv_sqrt};
use crate::sir::SirFit;
use crate::standardize::StandardizedSample;

/// Hypothesis subspace H = Span(alpha_x) on the original predictor scale.
#[derive(Debug, Clone)]
pub struct CoordinateHypothesis {
    alpha_x: DMatrix<f64>,
    label: String,
}

impl CoordinateHypothesis {
    /// Hypothesis from an arbitrary basis matrix; columns must be linearly
    /// independent (smallest singular value above 1e-10 of the largest).
    pub fn from_matrix(alpha_x: DMatrix<f64>) -> Result<Self> {
        let (p, r) = alpha_x.shape();
        if r == 0 || r > p {
            return Err(Error::HypothesisSize { r, p });
        }
        let svals = alpha_x.clone().svd(false, false).singular_values;
        let largest = svals.max();
        let smallest = svals.min();
        if !largest.is_finite() || largest <= 0.0 || smallest <= 1e-10 * largest {
            let rank = svals.iter().filter(|&&s| s > 1e-10 * largest).count();
            return Err(Error::RankDeficientHypothesis { r, rank });
        }
        Ok(CoordinateHypothesis {
            alpha_x,
            label: format!("matrix({p}x{r})"),
        })
    }

    /// Hypothesis that the given predictors (0-based positions) carry no
    /// information; α_x columns are the corresponding coordinate axes.
    pub fn predictor_subset(indices: &[usize], p: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::HypothesisSize { r: 0, p });
        }
        for (k, &j) in indices.iter().enumerate() {
            if j >= p {
                return Err(Error::PredictorIndex { index: j, p });
            }
            if indices[..k].contains(&j) {
                return Err(Error::InvalidParameter(format!(
                    "predictor index {j} listed twice in hypothesis"
                )));
            }
        }
        let mut alpha_x = DMatrix::zeros(p, indices.len());
        for (k, &j) in indices.iter().enumerate() {
            alpha_x[(j, k)] = 1.0;
        }
        let label = format!(
            "predictors {{{}}}",
            indices
                .iter()
                .map(|j| (j + 1).to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        Ok(CoordinateHypothesis { alpha_x, label })
    }

    pub fn alpha_x(&self) -> &DMatrix<f64> {
        &self.alpha_x
    }

    pub fn r(&self) -> usize {
        self.alpha_x.ncols()
    }

    pub fn p(&self) -> usize {
        self.alpha_x.nrows()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Parses a hypothesis from JSON: either {"vars": ["name", ...]} naming
/// predictors, or {"alpha_x": [[row], ...]} giving a row-major p×r matrix.
pub fn from_json(value: &Value, names: &[String]) -> Result<CoordinateHypothesis> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::InvalidParameter("hypothesis JSON must be an object".into()))?;
    if let Some(vars) = obj.get("vars") {
        let list = vars
            .as_array()
            .ok_or_else(|| Error::InvalidParameter("\"vars\" must be an array of names".into()))?;
        let mut indices = Vec::with_capacity(list.len());
        let mut labels = Vec::with_capacity(list.len());
        for v in list {
            let name = v.as_str().ok_or_else(|| {
                Error::InvalidParameter("\"vars\" entries must be strings".into())
            })?;
            let idx = names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
            indices.push(idx);
            labels.push(name.to_string());
        }
        return Ok(CoordinateHypothesis::predictor_subset(&indices, names.len())?
            .with_label(format!("predictors {{{}}}", labels.join(","))));
    }
    if let Some(matrix) = obj.get("alpha_x") {
        let rows = matrix
            .as_array()
            .ok_or_else(|| Error::InvalidParameter("\"alpha_x\" must be an array of rows".into()))?;
        let p = rows.len();
        if p != names.len() {
            return Err(Error::InvalidParameter(format!(
                "\"alpha_x\" has {p} rows but the data has {} predictors",
                names.len()
            )));
        }
        let mut data: Vec<Vec<f64>> = Vec::with_capacity(p);
        for row in rows {
            let entries = row.as_array().ok_or_else(|| {
                Error::InvalidParameter("\"alpha_x\" rows must be arrays of numbers".into())
            })?;
            let parsed: Option<Vec<f64>> = entries.iter().map(Value::as_f64).collect();
            data.push(parsed.ok_or_else(|| {
                Error::InvalidParameter("\"alpha_x\" entries must be numbers".into())
            })?);
        }
        let r = data.first().map_or(0, Vec::len);
        if r == 0 || data.iter().any(|row| row.len() != r) {
            return Err(Error::InvalidParameter(
                "\"alpha_x\" rows must be nonempty and of equal length".into(),
            ));
        }
        let alpha = DMatrix::from_fn(p, r, |i, j| data[i][j]);
        return CoordinateHypothesis::from_matrix(alpha);
    }
    Err(Error::InvalidParameter(
        "hypothesis JSON needs a \"vars\" or \"alpha_x\" key".into(),
    ))
}

/// Orthonormal basis of the hypothesis on the Z scale, with its projector
/// pair: α̂ = Σ̂^(-1/2) α_x (α_xᵀ Σ̂⁻¹ α_x)^(-1/2), P = α̂α̂ᵀ, Q = I − P.
pub struct HypothesisBasisZ {
    pub alpha_hat: DMatrix<f64>,
    pub p_h: DMatrix<f64>,
    pub q_h: DMatrix<f64>,
}

impl HypothesisBasisZ {
    pub fn r(&self) -> usize {
        self.alpha_hat.ncols()
    }
}

pub fn to_z_basis(
    hyp: &CoordinateHypothesis,
    sample: &StandardizedSample,
) -> Result<HypothesisBasisZ> {
    let p = sample.p();
    if hyp.p() != p {
        return Err(Error::InvalidParameter(format!(
            "hypothesis is over {} predictors but the data has {p}",
            hyp.p()
        )));
    }
    let inner = hyp.alpha_x().transpose() * &sample.cov_inv * hyp.alpha_x();
    let inner_inv_sqrt = sym_inv_sqrt(&inner).map_err(|_| Error::RankDeficientHypothesis {
        r: hyp.r(),
        rank: 0,
    })?;
    let alpha_hat = &sample.cov_inv_sqrt * hyp.alpha_x() * inner_inv_sqrt;
    let p_h = &alpha_hat * alpha_hat.transpose();
    let q_h = DMatrix::identity(p, p) - &p_h;
    Ok(HypothesisBasisZ { alpha_hat, p_h, q_h })
}

/// Spectrum of the kernel after projecting off the hypothesis, plus the
/// complement-space projections F̂_H = Γ̂₀ᵀ Q Γ̂₀ and Ĝ_H = Γ̂₀ᵀ P Γ̂₀
/// (F̂_H + Ĝ_H = I by construction).
pub struct ProjectedSpectrum {
    pub lambdas_prime: DVector<f64>,
    pub f_h: DMatrix<f64>,
    pub g_h: DMatrix<f64>,
}

pub fn projected_spectrum(fit: &SirFit, basis: &HypothesisBasisZ) -> ProjectedSpectrum {
    let qmq = &basis.q_h * fit.m() * &basis.q_h;
    let sym = 0.5 * (&qmq + qmq.transpose());
    let (lambdas_prime, _) = sym_eigen(&sym);
    let f_h = fit.gamma0().transpose() * &basis.q_h * fit.gamma0();
    let g_h = fit.gamma0().transpose() * &basis.p_h * fit.gamma0();
    ProjectedSpectrum {
        lambdas_prime,
        f_h,
        g_h,
    }
}
