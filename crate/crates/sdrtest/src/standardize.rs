//! Sample moments and the Z-scale transformation of the predictors.
//!
//! The covariance uses divisor n, not n−1. That convention is load-bearing:
//! with divisor n the standardized design satisfies (1/n)ZᵀZ = I exactly,
//! which is what caps the kernel eigenvalues at 1 and keeps the constrained
//! reference distributions honest.

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{sym_pd_factors, SymPdFactors};

/// Mean vector and covariance matrix (divisor n) of the rows of `x`.
pub fn sample_moments(x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let (n, p) = x.shape();
    assert!(n >= 2, "sample_moments needs at least two rows");
    let mean = DVector::from_iterator(p, (0..p).map(|j| x.column(j).sum() / n as f64));
    let mut centered = x.clone();
    for j in 0..p {
        centered.column_mut(j).add_scalar_mut(-mean[j]);
    }
    let mut cov = centered.transpose() * &centered / n as f64;
    // Exact symmetry for the eigendecomposition downstream.
    for i in 0..p {
        for j in 0..i {
            let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = s;
            cov[(j, i)] = s;
        }
    }
    (mean, cov)
}

/// Predictors standardized to mean zero and identity covariance:
/// Z row i = Σ̂^(-1/2)(X_i − X̄).
#[derive(Debug)]
pub struct StandardizedSample {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub cov_inv: DMatrix<f64>,
    pub cov_inv_sqrt: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

impl StandardizedSample {
    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn p(&self) -> usize {
        self.z.ncols()
    }
}

pub fn standardize(data: &Dataset) -> Result<StandardizedSample> {
    let (mean, cov) = sample_moments(data.x());
    let SymPdFactors {
        inverse: cov_inv,
        inv_sqrt: cov_inv_sqrt,
        ..
    } = sym_pd_factors(&cov).map_err(|e| annotate_singular(e, &cov, data.names()))?;
    let (n, p) = data.x().shape();
    let mut centered = data.x().clone();
    for j in 0..p {
        centered.column_mut(j).add_scalar_mut(-mean[j]);
    }
    let z = centered * &cov_inv_sqrt;
    debug_assert_eq!(z.shape(), (n, p));
    Ok(StandardizedSample {
        mean,
        cov,
        cov_inv,
        cov_inv_sqrt,
        z,
    })
}

// Names the offending predictors when the covariance fails the PD gate:
// near-constant columns if any, otherwise the heaviest loadings of the
// near-null eigenvector.
fn annotate_singular(err: Error, cov: &DMatrix<f64>, names: &[String]) -> Error {
    let Error::SingularMatrix { detail } = err else {
        return err;
    };
    let p = cov.nrows();
    let max_var = (0..p).map(|j| cov[(j, j)]).fold(0.0f64, f64::max);
    let constant: Vec<&str> = (0..p)
        .filter(|&j| cov[(j, j)] <= 1e-12 * max_var)
        .map(|j| names[j].as_str())
        .collect();
    if !constant.is_empty() {
        return Error::SingularMatrix {
            detail: format!("near-constant predictor(s) {constant:?}; {detail}"),
        };
    }
    let (_, vecs) = crate::linalg::sym_eigen(cov);
    let null = vecs.column(p - 1);
    let mut loaded: Vec<(f64, &str)> = (0..p)
        .map(|j| (null[j].abs(), names[j].as_str()))
        .collect();
    loaded.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite loadings"));
    let heavy: Vec<&str> = loaded
        .iter()
        .take_while(|(l, _)| *l >= 0.3)
        .map(|&(_, n)| n)
        .collect();
    Error::SingularMatrix {
        detail: format!("collinear combination involving {heavy:?}; {detail}"),
    }
}
