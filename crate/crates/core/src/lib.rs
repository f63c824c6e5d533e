//! Matrix-free stochastic trace estimation.
//!
//! Every estimator touches the matrix only through [`LinearOperator`], which
//! counts matrix-vector queries so that budgets can be checked exactly.
//!
//! - [`linop`]: operators, random probes, orthonormalization, pseudoinverse
//!   and dense reference quantities.
//! - [`estimators`]: Hutchinson, Hutch++, NA-Hutch++, the Gaussian Hutch++
//!   variant, subspace projection and the exact `d`-query trace.
//! - [`matfunc`]: `f(B)` operators built from Lanczos (`exp`, `log(B + λI)`)
//!   and exact matrix powers.
//! - [`synth`]: power-law spectra and Gaussian kernel matrices.
//! - [`graph`]: edge-list ingestion, adjacency operators and exact graph
//!   oracles (triangles, Estrada index).

pub mod error;
pub mod estimators;
pub mod graph;
pub mod linop;
pub mod matfunc;
pub mod synth;

pub use error::{Result, TraceError};
pub use estimators::{
    exact_trace, hutch_pp, hutch_pp_gauss, hutchinson, na_hutch_pp, na_hutch_pp_with_probes,
    subspace_projection, EstimatorConfig, EstimatorKind, NonAdaptiveProbes, Split,
    SplitFractions, TraceEstimate,
};
pub use linop::{
    dense_reference, orthonormalize, pseudoinverse, sample_probes, DenseMatrix, DenseReference,
    LinearOperator, MatVec, ProbeDistribution, ProbeMatrix,
};
