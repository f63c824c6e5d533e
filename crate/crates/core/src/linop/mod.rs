//! Linear-operator abstraction and the dense linear algebra the estimators
//! need: random probes, orthonormal bases, pseudoinverses, and exact
//! reference quantities for tests.

mod dense;
mod operator;
mod probes;

pub use dense::{
    dense_reference, orthonormalize, pseudoinverse, DenseReference, DROP_TOLERANCE,
    PINV_TOLERANCE,
};
pub use operator::{LinearOperator, MatVec};
pub use probes::{sample_probes, ProbeDistribution, ProbeMatrix};

/// Column-major dense matrix used for sketches, bases and explicit test
/// matrices.
pub type DenseMatrix = nalgebra::DMatrix<f64>;
