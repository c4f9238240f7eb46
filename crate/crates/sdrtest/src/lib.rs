//! Tests of predictor contributions in regression through sliced inverse
//! regression (SIR).
//!
//! SIR estimates the directions along which the predictor vector carries
//! information about the response by slicing the response range and examining
//! the spread of standardized within-slice predictor means. This crate casts
//! that estimate as the solution of a least-squares problem and builds
//! hypothesis tests on top of it:
//!
//! * marginal dimension tests (`testing::marginal_dim_test`) for the number
//!   of directions needed,
//! * marginal coordinate tests (`testing::marginal_coord_test`) for whether a
//!   set of predictors contributes at all,
//! * conditional coordinate tests (`testing::conditional_coord_test`) for
//!   whether predictors contribute beyond a posited number of directions,
//! * a backward-elimination predictor screen (`testing::backward_elimination`).
//!
//! Test statistics are referred either to a chi-squared distribution or to a
//! weighted mixture of chi-squareds whose weights are estimated from the
//! sample; mixture p-values use a two-moment (Satterthwaite) approximation by
//! default with an optional Monte Carlo calibration (`chisq`).
//!
//! The `sim` module reproduces level and power experiments on two benchmark
//! regression models and is what the `simulate` subcommand of the companion
//! CLI drives.

pub mod chisq;
pub mod config;
pub mod cov;
pub mod data;
pub mod error;
pub mod hypothesis;
pub mod linalg;
pub mod rng;
pub mod sim;
pub mod sir;
pub mod special;
pub mod standardize;
pub mod testing;

pub use data::{Dataset, SlicedResponse};
pub use error::{Error, Result};
pub use hypothesis::CoordinateHypothesis;
pub use sir::SirFit;
pub use testing::{
    Analysis, ConditionalOutcome, DimEstimate, EliminationMode, EliminationTrace, TestResult,
    Variant,
};
