//! The SIR kernel: slice means of the standardized predictors, the matrix
//! M̂ = Z_n Z_nᵀ they generate, its spectrum, and the singular-value factors
//! of Z_n that the conditional tests need.
//!
//! Everything is driven by one symmetric eigendecomposition of M̂. The right
//! factors Ψ̂ are recovered as Ψ̂_j = Z_nᵀ γ̂_j / s_j for nonzero singular
//! values s_j and completed to an orthonormal basis of slice space otherwise;
//! downstream quadratic forms are invariant to how the completion is chosen,
//! and the deterministic coordinate-axis seeds keep outputs reproducible.

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::config::{GAP_WARN, ZERO_EIG};
use crate::data::SlicedResponse;
use crate::error::{Error, Result};
use crate::linalg::{complete_orthonormal, sym_eigen};
use crate::standardize::StandardizedSample;

/// Per-slice means of Z and the weighted slice-mean matrix Z_n whose column
/// y is ĝ_y Z̄_y.
pub fn slice_means(
    sample: &StandardizedSample,
    slices: &SlicedResponse,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let h = slices.h();
    let p = sample.p();
    let mut means = DMatrix::zeros(h, p);
    for (i, &label) in slices.labels().iter().enumerate() {
        for j in 0..p {
            means[(label, j)] += sample.z[(i, j)];
        }
    }
    for y in 0..h {
        let count = slices.counts()[y] as f64;
        for j in 0..p {
            means[(y, j)] /= count;
        }
    }
    let mut zn = DMatrix::zeros(p, h);
    for y in 0..h {
        let g = slices.roots()[y];
        for j in 0..p {
            zn[(j, y)] = g * means[(y, j)];
        }
    }
    (means, zn)
}

/// Spectrum and factors of the SIR kernel at a working dimension d.
pub struct SirFit {
    slice_means: DMatrix<f64>,
    zn: DMatrix<f64>,
    m: DMatrix<f64>,
    lambdas: DVector<f64>,
    vecs: DMatrix<f64>,
    d: usize,
    gamma_hat: DMatrix<f64>,
    gamma0: DMatrix<f64>,
    psi1: DMatrix<f64>,
    psi0: DMatrix<f64>,
    sing_vals: DVector<f64>,
    rho_hat: DMatrix<f64>,
    gap_warning: bool,
}

impl SirFit {
    /// Slice means, h×p.
    pub fn slice_means(&self) -> &DMatrix<f64> {
        &self.slice_means
    }

    /// Weighted slice-mean matrix, p×h.
    pub fn zn(&self) -> &DMatrix<f64> {
        &self.zn
    }

    /// Kernel M̂ = Z_n Z_nᵀ, p×p.
    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Kernel eigenvalues, descending.
    pub fn lambdas(&self) -> &DVector<f64> {
        &self.lambdas
    }

    /// All kernel eigenvectors, p×p.
    pub fn vecs(&self) -> &DMatrix<f64> {
        &self.vecs
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Basis representative of the estimated directions (first d kernel
    /// eigenvectors); identified only up to rotation within its span.
    pub fn gamma_hat(&self) -> &DMatrix<f64> {
        &self.gamma_hat
    }

    /// Orthogonal complement factor, p×(p−d).
    pub fn gamma0(&self) -> &DMatrix<f64> {
        &self.gamma0
    }

    /// Right factor for the leading d singular values, h×d.
    pub fn psi1(&self) -> &DMatrix<f64> {
        &self.psi1
    }

    /// Right factor completing slice space, h×(h−d).
    pub fn psi0(&self) -> &DMatrix<f64> {
        &self.psi0
    }

    /// Leading d singular values of Z_n.
    pub fn sing_vals(&self) -> &DVector<f64> {
        &self.sing_vals
    }

    /// Slice coordinates ρ̂_y = γ̂ᵀ Z̄_y as rows, h×d.
    pub fn rho_hat(&self) -> &DMatrix<f64> {
        &self.rho_hat
    }

    /// Set when λ̂_d − λ̂_{d+1} < 1e-8: the fitted subspace is
    /// ill-determined at this d.
    pub fn gap_warning(&self) -> bool {
        self.gap_warning
    }

    pub fn p(&self) -> usize {
        self.zn.nrows()
    }

    pub fn h(&self) -> usize {
        self.zn.ncols()
    }

    /// n · Σ_{j>m} λ̂_j, the residual tail of the spectrum scaled by sample
    /// size.
    pub fn tail_statistic(&self, n: usize, m: usize) -> f64 {
        let tail: f64 = self.lambdas.iter().skip(m).sum();
        (n as f64 * tail).max(0.0)
    }

    /// Refit at a different working dimension, reusing the cached spectrum.
    pub fn with_dim(&self, d: usize) -> Result<SirFit> {
        assemble(
            self.slice_means.clone(),
            self.zn.clone(),
            self.m.clone(),
            self.lambdas.clone(),
            self.vecs.clone(),
            d,
        )
    }

    pub fn to_json(&self) -> Value {
        let p = self.p();
        let h = self.h();
        let directions: Vec<Vec<f64>> = (0..self.d)
            .map(|j| (0..p).map(|i| self.gamma_hat[(i, j)]).collect())
            .collect();
        let means: Vec<Vec<f64>> = (0..h)
            .map(|y| (0..p).map(|j| self.slice_means[(y, j)]).collect())
            .collect();
        json!({
            "lambdas": self.lambdas.as_slice(),
            "directions": directions,
            "slice_means": means,
            "d": self.d,
            "gap_warning": self.gap_warning,
        })
    }
}

/// Fits the SIR kernel from Z_n at working dimension d (0 ≤ d ≤ min(p, h−1)).
pub fn fit_sir(zn: &DMatrix<f64>, slice_means: &DMatrix<f64>, d: usize) -> Result<SirFit> {
    let (p, h) = zn.shape();
    assert_eq!(slice_means.shape(), (h, p), "slice_means must be h x p");
    if d > p.min(h - 1) {
        return Err(Error::DimensionOutOfRange {
            d,
            bound: format!("0 <= d <= min(p, h-1) = {}", p.min(h - 1)),
        });
    }
    let m = zn * zn.transpose();
    let (lambdas, vecs) = sym_eigen(&m);
    assemble(slice_means.clone(), zn.clone(), m, lambdas, vecs, d)
}

fn assemble(
    slice_means: DMatrix<f64>,
    zn: DMatrix<f64>,
    m: DMatrix<f64>,
    lambdas: DVector<f64>,
    vecs: DMatrix<f64>,
    d: usize,
) -> Result<SirFit> {
    let (p, h) = zn.shape();
    if d > p.min(h - 1) {
        return Err(Error::DimensionOutOfRange {
            d,
            bound: format!("0 <= d <= min(p, h-1) = {}", p.min(h - 1)),
        });
    }
    let lam_max = lambdas[0].max(0.0);
    let thresh = ZERO_EIG * lam_max;
    let rank = (0..p.min(h))
        .take_while(|&j| lambdas[j] > thresh && lambdas[j] > 0.0)
        .count();

    let mut formula_cols = DMatrix::zeros(h, rank);
    for j in 0..rank {
        let s = lambdas[j].sqrt();
        let col = zn.transpose() * vecs.column(j) / s;
        formula_cols.set_column(j, &col);
    }
    let psi_full = complete_orthonormal(&formula_cols, h);

    let gamma_hat = vecs.columns(0, d).into_owned();
    let gamma0 = vecs.columns(d, p - d).into_owned();
    let psi1 = psi_full.columns(0, d).into_owned();
    let psi0 = psi_full.columns(d, h - d).into_owned();
    let sing_vals = DVector::from_iterator(d, (0..d).map(|j| lambdas[j].max(0.0).sqrt()));
    let rho_hat = &slice_means * &gamma_hat;
    let gap_warning = d >= 1 && d < p && (lambdas[d - 1] - lambdas[d]) < GAP_WARN;

    Ok(SirFit {
        slice_means,
        zn,
        m,
        lambdas,
        vecs,
        d,
        gamma_hat,
        gamma0,
        psi1,
        psi0,
        sing_vals,
        rho_hat,
        gap_warning,
    })
}

/// Residual sum of squares L̂_m: within-slice scatter plus the scaled
/// spectrum tail beyond m. With m = p the tail is empty and this is the
/// within-slice scatter alone.
pub fn residual_rss(
    fit: &SirFit,
    sample: &StandardizedSample,
    slices: &SlicedResponse,
    m: usize,
) -> Result<f64> {
    let p = fit.p();
    if m > p {
        return Err(Error::DimensionOutOfRange {
            d: m,
            bound: format!("0 <= m <= p = {p}"),
        });
    }
    let mut within = 0.0;
    for (i, &label) in slices.labels().iter().enumerate() {
        for j in 0..p {
            let dev = sample.z[(i, j)] - fit.slice_means[(label, j)];
            within += dev * dev;
        }
    }
    Ok(within + fit.tail_statistic(sample.n(), m))
}
