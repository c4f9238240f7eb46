//! Numerical tolerances used across the crate, collected in one place so the
//! thresholds that shape behaviour are not scattered as magic numbers.

/// Relative gate for treating a symmetric matrix as positive definite:
/// smallest eigenvalue must exceed `PD_GATE` times the largest.
pub const PD_GATE: f64 = 1e-10;

/// Eigenvalues (or squared singular values) below `ZERO_EIG` times the
/// largest are treated as exact zeros when factorizing the SIR kernel.
pub const ZERO_EIG: f64 = 1e-12;

/// Mixture weights smaller than `WEIGHT_DROP` times the largest weight are
/// dropped from a chi-squared mixture.
pub const WEIGHT_DROP: f64 = 1e-12;

/// Weight-estimation eigenvalues in `[-WEIGHT_CLAMP, 0)` are clamped to zero;
/// anything more negative is reported as an error rather than silently fixed.
pub const WEIGHT_CLAMP: f64 = 1e-8;

/// Statistics below `STAT_CLAMP` (rounding noise from trace differences
/// around a structural zero) are clamped to zero.
pub const STAT_CLAMP: f64 = 1e-10;

/// A spectral gap smaller than this between the d-th and (d+1)-th kernel
/// eigenvalues makes the fitted basis ill-determined; fits flag it.
pub const GAP_WARN: f64 = 1e-8;

/// Fraction of slice boundaries falling on tied response values above which
/// slicing reports a tie warning.
pub const TIE_WARN_FRACTION: f64 = 0.10;

/// Termination tolerance for the continued-fraction and series evaluations
/// of the incomplete gamma and beta functions.
pub const SPECIAL_EPS: f64 = 1e-12;
