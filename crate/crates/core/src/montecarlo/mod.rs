//! Monte Carlo designs: the VAR(1) data-generating process, the size,
//! coverage, stationarity-test and power experiments, and the closed-form
//! check for a single power-law trend.

pub mod dgp;
pub mod single_trend;
pub mod tables;

pub use dgp::{draw_var_matrix, generate_gcpr_sample, generate_var1_errors, true_lrv, DgpConfig, SerialSetting};
pub use tables::{
    parse_scope, spurious_trend_rejects, table1_experiment, table_experiment, Cell, Estimator, McConfig, Scope,
    TableKind, TableReport,
};
