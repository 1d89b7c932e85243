//! Generalized cointegrating polynomial regressions: estimation and inference.

// Negated comparisons treat NaN as out of range; indexed loops mirror the
// matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data;
pub mod error;
pub mod fmols;
pub mod kpss;
pub mod linalg;
pub mod lrv;
pub mod model;
pub mod montecarlo;
pub mod nls;
pub mod optimize;
pub mod rng;
pub mod siminf;
pub mod wsq;
