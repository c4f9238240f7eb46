//! Covariance estimators behind the reference distributions: the
//! slice-indicator OLS residuals, the Ω matrices whose eigenvalues weight the
//! chi-squared mixtures of the coordinate tests, and the Δ matrix whose
//! compressions weight the general dimension tests.
//!
//! Vec convention used throughout: vec(A) stacks columns, so for the r×h
//! matrix α̂ᵀZ_n the hypothesis coordinate varies fastest and the slice index
//! slowest. Kronecker products are therefore written
//! (slice factor ⊗ hypothesis factor); mixing this up transposes the blocks
//! silently, which is why the assembly code and the naive-loop test oracles
//! are kept in deliberately different shapes.

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::config::WEIGHT_CLAMP;
use crate::data::{Dataset, SlicedResponse};
use crate::error::{Error, Result};
use crate::hypothesis::HypothesisBasisZ;
use crate::linalg::sym_eigen;
use crate::sir::SirFit;
use crate::standardize::StandardizedSample;

/// Residuals of the OLS regressions (with intercept) of each slice indicator
/// J_y on the raw predictors: eps column y holds ε̂ for slice y, beta column
/// y the slope vector β̂_y.
pub struct IndicatorResiduals {
    pub eps: DMatrix<f64>,
    pub beta: DMatrix<f64>,
}

pub fn indicator_residuals(
    data: &Dataset,
    sample: &StandardizedSample,
    slices: &SlicedResponse,
) -> IndicatorResiduals {
    let n = data.n();
    let p = data.p();
    let h = slices.h();
    // Slope of J_y on X: β̂_y = Σ̂⁻¹ Ĉov(X, J_y), and Ĉov(X, J_y) =
    // f̂_y (X̄_y − X̄) because J_y is an indicator.
    let mut xbar_dev = DMatrix::zeros(p, h); // column y = X̄_y − X̄
    for (i, &label) in slices.labels().iter().enumerate() {
        for j in 0..p {
            xbar_dev[(j, label)] += data.x()[(i, j)];
        }
    }
    for y in 0..h {
        let count = slices.counts()[y] as f64;
        for j in 0..p {
            xbar_dev[(j, y)] = xbar_dev[(j, y)] / count - sample.mean[j];
        }
    }
    let mut beta = DMatrix::zeros(p, h);
    for y in 0..h {
        let slope = &sample.cov_inv * xbar_dev.column(y) * slices.props()[y];
        beta.set_column(y, &slope);
    }
    let mut eps = DMatrix::zeros(n, h);
    for i in 0..n {
        for y in 0..h {
            let mut fitted = slices.props()[y];
            for j in 0..p {
                fitted += beta[(j, y)] * (data.x()[(i, j)] - sample.mean[j]);
            }
            let indicator = f64::from(slices.labels()[i] == y);
            eps[(i, y)] = indicator - fitted;
        }
    }
    IndicatorResiduals { eps, beta }
}

/// Symmetric weight matrix whose eigenvalues calibrate one of the tests.
pub struct WeightMatrix {
    pub omega: DMatrix<f64>,
    pub kind: WeightKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    MarginalGeneral,
    MarginalConstrained,
    ConditionalGeneral,
    ConditionalConstrained,
    DimGeneral,
    DimConstrainedPrime,
}

impl WeightKind {
    pub fn tag(self) -> &'static str {
        match self {
            WeightKind::MarginalGeneral => "marginal_general",
            WeightKind::MarginalConstrained => "marginal_constrained",
            WeightKind::ConditionalGeneral => "conditional_general",
            WeightKind::ConditionalConstrained => "conditional_constrained",
            WeightKind::DimGeneral => "dim_general",
            WeightKind::DimConstrainedPrime => "dim_constrained_prime",
        }
    }
}

impl WeightMatrix {
    /// Eigenvalues in descending order, with the estimation-noise clamp:
    /// values in [−1e-8, 0) become 0, anything more negative is an error.
    pub fn weights(&self) -> Result<Vec<f64>> {
        let (values, _) = sym_eigen(&self.omega);
        clamp_weights(values.as_slice())
    }

    pub fn to_json(&self) -> Value {
        let (rows, cols) = self.omega.shape();
        let data: Vec<Vec<f64>> = (0..rows)
            .map(|i| (0..cols).map(|j| self.omega[(i, j)]).collect())
            .collect();
        json!({ "kind": self.kind.tag(), "rows": rows, "cols": cols, "matrix": data })
    }
}

/// Shared clamp policy for estimated eigenvalue weights.
pub fn clamp_weights(values: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        if v < -WEIGHT_CLAMP {
            return Err(Error::NegativeWeight { weight: v });
        }
        out.push(v.max(0.0));
    }
    Ok(out)
}

fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    m
}

/// Ω̂_H (hr×hr): average over observations of
/// (D_ĝ⁻¹ ε̂_i) (D_ĝ⁻¹ ε̂_i)ᵀ ⊗ (α̂ᵀẐ_i)(α̂ᵀẐ_i)ᵀ, assembled as the outer
/// product of the Kronecker vector (D_ĝ⁻¹ ε̂_i) ⊗ (α̂ᵀẐ_i).
pub fn omega_h_general(
    res: &IndicatorResiduals,
    sample: &StandardizedSample,
    basis: &HypothesisBasisZ,
    slices: &SlicedResponse,
) -> WeightMatrix {
    let n = sample.n();
    let h = slices.h();
    let r = basis.r();
    let g_inv: Vec<f64> = slices.roots().iter().map(|&g| 1.0 / g).collect();
    let mut omega = DMatrix::zeros(h * r, h * r);
    let mut v = DVector::zeros(h * r);
    for i in 0..n {
        let w = basis.alpha_hat.transpose() * sample.z.row(i).transpose();
        for y in 0..h {
            let u = g_inv[y] * res.eps[(i, y)];
            for k in 0..r {
                v[y * r + k] = u * w[k];
            }
        }
        omega.ger(1.0 / n as f64, &v, &v, 1.0);
    }
    WeightMatrix {
        omega: symmetrize(omega),
        kind: WeightKind::MarginalGeneral,
    }
}

/// Ω̃_H = (Q_ĝ − Z_nᵀZ_n) ⊗ I_r, the constrained counterpart whose h×h core
/// has eigenvalues δ̂ (the last one structurally zero).
pub fn omega_h_constrained(zn: &DMatrix<f64>, roots: &DVector<f64>, r: usize) -> WeightMatrix {
    let h = zn.ncols();
    let q_g = DMatrix::identity(h, h) - roots * roots.transpose();
    let core = q_g - zn.transpose() * zn;
    WeightMatrix {
        omega: symmetrize(core).kronecker(&DMatrix::identity(r, r)),
        kind: WeightKind::MarginalConstrained,
    }
}

/// Eigenvalues of the h×h core of Ω̃_H (each would repeat r times in the
/// full matrix); these are the constrained marginal mixture weights.
pub fn omega_h_constrained_core_weights(
    zn: &DMatrix<f64>,
    roots: &DVector<f64>,
) -> Result<Vec<f64>> {
    let h = zn.ncols();
    let q_g = DMatrix::identity(h, h) - roots * roots.transpose();
    let core = symmetrize(q_g - zn.transpose() * zn);
    let (values, _) = sym_eigen(&core);
    clamp_weights(values.as_slice())
}

/// Ω̂_{H|d} = (Ψ̂₁ᵀ ⊗ I_r) Ω̂_H (Ψ̂₁ ⊗ I_r), the conditional compression.
pub fn omega_hd_general(omega_h: &WeightMatrix, psi1: &DMatrix<f64>, r: usize) -> Result<WeightMatrix> {
    let h = psi1.nrows();
    if omega_h.omega.nrows() != h * r {
        return Err(Error::InvalidParameter(format!(
            "omega is {}x{} but psi1 has {h} rows with r = {r}",
            omega_h.omega.nrows(),
            omega_h.omega.ncols()
        )));
    }
    let k = psi1.transpose().kronecker(&DMatrix::identity(r, r));
    let omega = &k * &omega_h.omega * k.transpose();
    Ok(WeightMatrix {
        omega: symmetrize(omega),
        kind: WeightKind::ConditionalGeneral,
    })
}

/// The core weights 1 − λ̂_j of the constrained conditional mixture; in the
/// reference distribution each carries r degrees of freedom.
pub fn omega_hd_constrained_core_weights(lambdas: &[f64]) -> Result<Vec<f64>> {
    lambdas
        .iter()
        .map(|&l| {
            if l > 1.0 + 1e-6 {
                Err(Error::InvalidParameter(format!(
                    "kernel eigenvalue {l} exceeds 1; standardization is broken upstream"
                )))
            } else {
                Ok((1.0 - l).max(0.0))
            }
        })
        .collect()
}

/// Ω̃_{H|d} = (I_d − D_λ̂) ⊗ I_r: diagonal with entries 1 − λ̂_j, each
/// repeated r times.
pub fn omega_hd_constrained(lambdas: &[f64], r: usize) -> Result<WeightMatrix> {
    let core = omega_hd_constrained_core_weights(lambdas)?;
    let d = lambdas.len();
    let diag = DVector::from_iterator(d * r, (0..d * r).map(|i| core[i / r]));
    Ok(WeightMatrix {
        omega: DMatrix::from_diagonal(&diag),
        kind: WeightKind::ConditionalConstrained,
    })
}

/// Δ̂ (hp×hp), an h×h array of p×p blocks built from the within-slice
/// covariances of Z: diagonal block (s,s) = f̂_s I + (1 − 2f̂_s) Σ̂_{Z|s},
/// off-diagonal (t,s) = ĝ_tĝ_s (I − Σ̂_{Z|t} − Σ̂_{Z|s}).
pub fn delta_hat(sample: &StandardizedSample, slices: &SlicedResponse) -> Result<DMatrix<f64>> {
    let p = sample.p();
    let h = slices.h();
    let within = within_slice_covs(sample, slices)?;
    let eye = DMatrix::identity(p, p);
    let mut delta = DMatrix::zeros(h * p, h * p);
    for s in 0..h {
        let f_s = slices.props()[s];
        let block = f_s * &eye + (1.0 - 2.0 * f_s) * &within[s];
        delta.view_mut((s * p, s * p), (p, p)).copy_from(&block);
        for t in 0..s {
            let g = slices.roots()[t] * slices.roots()[s];
            let block = g * (&eye - &within[t] - &within[s]);
            delta.view_mut((t * p, s * p), (p, p)).copy_from(&block);
            delta
                .view_mut((s * p, t * p), (p, p))
                .copy_from(&block.transpose());
        }
    }
    Ok(symmetrize(delta))
}

fn within_slice_covs(
    sample: &StandardizedSample,
    slices: &SlicedResponse,
) -> Result<Vec<DMatrix<f64>>> {
    let p = sample.p();
    let h = slices.h();
    for (s, &c) in slices.counts().iter().enumerate() {
        if c < 2 {
            return Err(Error::InvalidParameter(format!(
                "slice {} has {c} observation(s); within-slice covariance needs at least 2",
                s + 1
            )));
        }
    }
    let mut means: DMatrix<f64> = DMatrix::zeros(h, p);
    for (i, &label) in slices.labels().iter().enumerate() {
        for j in 0..p {
            means[(label, j)] += sample.z[(i, j)];
        }
    }
    for s in 0..h {
        let c = slices.counts()[s] as f64;
        for j in 0..p {
            means[(s, j)] /= c;
        }
    }
    let mut covs = vec![DMatrix::zeros(p, p); h];
    let mut dev = DVector::zeros(p);
    for (i, &label) in slices.labels().iter().enumerate() {
        for j in 0..p {
            dev[j] = sample.z[(i, j)] - means[(label, j)];
        }
        covs[label].ger(1.0, &dev, &dev, 1.0);
    }
    for (s, cov) in covs.iter_mut().enumerate() {
        *cov /= slices.counts()[s] as f64;
    }
    Ok(covs)
}

/// Mixture weights for the dimension tests: eigenvalues of
/// (Ψ̂₀ᵀ ⊗ Γ̂₀ᵀ) Δ̂ (Ψ̂₀ ⊗ Γ̂₀), descending. With `f_h` supplied the
/// complement factor is F̂_H Γ̂₀ᵀ instead, which is the constrained-statistic
/// variant.
pub fn dim_test_weights(
    delta: &DMatrix<f64>,
    fit: &SirFit,
    f_h: Option<&DMatrix<f64>>,
) -> Result<Vec<f64>> {
    let p = fit.p();
    let h = fit.h();
    let d = fit.d();
    if delta.nrows() != h * p {
        return Err(Error::InvalidParameter(format!(
            "delta is {}x{}, expected {}x{}",
            delta.nrows(),
            delta.ncols(),
            h * p,
            h * p
        )));
    }
    let left = match f_h {
        None => fit.gamma0().transpose(),
        Some(f) => {
            if f.shape() != (p - d, p - d) {
                return Err(Error::InvalidParameter(format!(
                    "F_H is {}x{}, expected {}x{}",
                    f.nrows(),
                    f.ncols(),
                    p - d,
                    p - d
                )));
            }
            f * fit.gamma0().transpose()
        }
    };
    let k = fit.psi0().transpose().kronecker(&left);
    let compressed = symmetrize(&k * delta * k.transpose());
    let (values, _) = sym_eigen(&compressed);
    clamp_weights(values.as_slice())
}
