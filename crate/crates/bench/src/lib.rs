//! Error-versus-budget sweeps over the estimators in `trace-core`.
//!
//! A sweep prepares one matrix source with a known trace, runs every
//! (estimator, budget) cell for a number of seeded trials, and summarizes the
//! relative errors by their quartiles. Results go out as CSV.

mod error;
mod output;
mod slope;
mod source;
mod spec;
mod sweep;

pub use error::{BenchError, Result};
pub use output::{emit_csv, write_csv, CSV_HEADER};
pub use slope::{fit_loglog_slope, SlopeFit};
pub use source::{prepare_source, PreparedSource};
pub use spec::{ExperimentSpec, MatrixSource};
pub use sweep::{
    derive_seed, quantile, run_sweep, run_sweep_on, CellFailure, SweepReport, TrialStats,
};
