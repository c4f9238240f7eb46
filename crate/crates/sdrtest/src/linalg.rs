//! Small wrappers around nalgebra's symmetric eigendecomposition that pin
//! down the conventions the rest of the crate relies on: eigenvalues sorted
//! in descending order, deterministic eigenvector signs, and a shared
//! positive-definiteness gate for matrix inverse square roots.

use nalgebra::{DMatrix, DVector};

use crate::config::PD_GATE;
use crate::error::{Error, Result};

/// Symmetric eigendecomposition with eigenvalues in descending order.
///
/// Each eigenvector is sign-normalized so that its entry of largest absolute
/// value is positive (first such entry on ties), which makes decompositions
/// reproducible across runs and platforms.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "sym_eigen needs a square matrix");
    let se = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        se.eigenvalues[b]
            .partial_cmp(&se.eigenvalues[a])
            .expect("eigenvalues of a real symmetric matrix are finite")
            .then(a.cmp(&b))
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| se.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = se.eigenvectors.column(src).into_owned();
        let mut lead = 0;
        for i in 1..n {
            if col[i].abs() > col[lead].abs() {
                lead = i;
            }
        }
        if col[lead] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// Inverse and inverse square root of a symmetric positive definite matrix,
/// both from a single eigendecomposition.
#[derive(Debug)]
pub struct SymPdFactors {
    pub inverse: DMatrix<f64>,
    pub inv_sqrt: DMatrix<f64>,
    /// Ratio of largest to smallest eigenvalue.
    pub condition: f64,
}

pub fn sym_pd_factors(m: &DMatrix<f64>) -> Result<SymPdFactors> {
    let (values, vectors) = sym_eigen(m);
    let n = values.len();
    let largest = values[0];
    let smallest = values[n - 1];
    if largest <= 0.0 || smallest <= PD_GATE * largest {
        return Err(Error::SingularMatrix {
            detail: format!(
                "eigenvalue range [{smallest:.3e}, {largest:.3e}] fails the \
                 positive-definiteness gate (smallest/largest <= {PD_GATE:.0e})"
            ),
        });
    }
    let inv_vals = DVector::from_iterator(n, values.iter().map(|&v| 1.0 / v));
    let inv_sqrt_vals = DVector::from_iterator(n, values.iter().map(|&v| 1.0 / v.sqrt()));
    let scaled = |d: &DVector<f64>| {
        let mut s = vectors.clone();
        for j in 0..n {
            let mut col = s.column_mut(j);
            col *= d[j];
        }
        &s * vectors.transpose()
    };
    Ok(SymPdFactors {
        inverse: scaled(&inv_vals),
        inv_sqrt: scaled(&inv_sqrt_vals),
        condition: largest / smallest,
    })
}

/// Symmetric inverse square root `m^{-1/2}` of a positive definite matrix.
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(sym_pd_factors(m)?.inv_sqrt)
}

/// QR least-squares solution of a tall full-column-rank system.
#[derive(Debug)]
pub struct LeastSquares {
    pub coef: DVector<f64>,
    /// Inverse of the triangular factor; ‖row j‖² is the j-th diagonal entry
    /// of (XᵀX)⁻¹, the coefficient-variance scale.
    pub r_inv: DMatrix<f64>,
}

pub fn least_squares(design: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<LeastSquares> {
    let m = design.ncols();
    let qr = design.clone().qr();
    let r = qr.r();
    let largest = (0..m).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if largest == 0.0 || (0..m).any(|j| r[(j, j)].abs() <= 1e-12 * largest) {
        return Err(Error::SingularMatrix {
            detail: "least-squares design is rank deficient".into(),
        });
    }
    let qt_rhs = qr.q().transpose() * rhs;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(m, m))
        .ok_or_else(|| Error::SingularMatrix {
            detail: "least-squares design is rank deficient".into(),
        })?;
    let coef = &r_inv * qt_rhs;
    Ok(LeastSquares { coef, r_inv })
}

/// Extends a set of orthonormal columns to an orthonormal basis of the full
/// space, using coordinate axes as candidate directions (re-orthogonalized
/// Gram-Schmidt, so the result is orthonormal to working precision).
pub fn complete_orthonormal(cols: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    assert!(cols.nrows() == dim && cols.ncols() <= dim);
    let mut basis: Vec<DVector<f64>> = (0..cols.ncols()).map(|j| cols.column(j).into_owned()).collect();
    let mut axis = 0;
    while basis.len() < dim {
        assert!(axis < dim, "coordinate axes exhausted before basis completed");
        let mut v = DVector::zeros(dim);
        v[axis] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / norm);
        }
        axis += 1;
    }
    DMatrix::from_columns(&basis)
}
