use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result, TraceError};

/// The raw action of a square matrix. Implementors never count queries;
/// [`LinearOperator`] does that.
pub trait MatVec: Send + Sync {
    fn dim(&self) -> usize;

    /// `y = A x`. Both slices have length `dim()`.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// `Y = A X` for a column-major block. Override when a blocked kernel is
    /// faster than column-by-column application.
    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, x.ncols());
        for (xc, yc) in x
            .as_slice()
            .chunks_exact(n)
            .zip(out.as_mut_slice().chunks_exact_mut(n))
        {
            self.apply(xc, yc);
        }
        out
    }

    /// Queries consumed on a wrapped base operator, for composite operators.
    fn inner_queries(&self) -> Option<u64> {
        None
    }
}

/// A square operator accessed only through matrix-vector products.
///
/// The query counter is atomic, so a single operator may be shared across
/// threads. [`LinearOperator::fork`] gives a handle over the same data with a
/// fresh counter, which is what per-trial code should use.
pub struct LinearOperator {
    inner: Arc<dyn MatVec>,
    queries: AtomicU64,
}

impl LinearOperator {
    pub fn new<M: MatVec + 'static>(action: M) -> Result<Self> {
        Self::from_arc(Arc::new(action))
    }

    pub fn from_arc(inner: Arc<dyn MatVec>) -> Result<Self> {
        if inner.dim() == 0 {
            return Err(invalid("operator dimension must be at least 1"));
        }
        Ok(Self {
            inner,
            queries: AtomicU64::new(0),
        })
    }

    /// Dense square matrix. Entries must be finite.
    pub fn dense(a: DMatrix<f64>) -> Result<Self> {
        Self::dense_shared(Arc::new(a))
    }

    pub fn dense_shared(a: Arc<DMatrix<f64>>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(TraceError::DimensionMismatch {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(invalid("dense operator has non-finite entries"));
        }
        Self::new(DenseOperator { a })
    }

    pub fn diagonal(diag: Vec<f64>) -> Result<Self> {
        if diag.iter().any(|v| !v.is_finite()) {
            return Err(invalid("diagonal has non-finite entries"));
        }
        Self::new(DiagonalOperator { diag })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::diagonal(vec![1.0; dim])
    }

    /// Operator from a closure computing `y = A x`.
    pub fn from_fn<F>(dim: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self::new(FnOperator { dim, f })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    /// Queries spent on the base operator of a composite (e.g. the `B`
    /// multiplications behind a Lanczos `exp(B)` wrapper).
    pub fn inner_matvecs(&self) -> Option<u64> {
        self.inner.inner_queries()
    }

    /// Same underlying action, counter reset to zero.
    pub fn fork(&self) -> Self {
        Self {
            inner: Arc::clone(&self.inner),
            queries: AtomicU64::new(0),
        }
    }

    pub fn matvec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.dim();
        if x.len() != n {
            return Err(TraceError::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        check_finite(x.as_slice(), "matvec input")?;
        let mut y = DVector::zeros(n);
        self.inner.apply(x.as_slice(), y.as_mut_slice());
        self.queries.fetch_add(1, Ordering::Relaxed);
        check_finite(y.as_slice(), "matvec output")?;
        Ok(y)
    }

    /// Applies the operator to every column of `x`; counts one query per column.
    pub fn matmat(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if x.nrows() != n {
            return Err(TraceError::DimensionMismatch {
                expected: n,
                got: x.nrows(),
            });
        }
        if x.ncols() == 0 {
            return Ok(DMatrix::zeros(n, 0));
        }
        check_finite(x.as_slice(), "matmat input")?;
        let y = self.inner.apply_block(x);
        self.queries.fetch_add(x.ncols() as u64, Ordering::Relaxed);
        check_finite(y.as_slice(), "matmat output")?;
        Ok(y)
    }
}

impl Clone for LinearOperator {
    /// Shares the action; the counter starts from the current value.
    fn clone(&self) -> Self {
        Self {
            inner: Arc::clone(&self.inner),
            queries: AtomicU64::new(self.query_count()),
        }
    }
}

impl fmt::Debug for LinearOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearOperator")
            .field("dim", &self.dim())
            .field("query_count", &self.query_count())
            .finish()
    }
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(TraceError::Numerical(format!("non-finite value in {what}")))
    }
}

struct DenseOperator {
    a: Arc<DMatrix<f64>>,
}

impl MatVec for DenseOperator {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        let xv = nalgebra::DVectorView::from_slice(x, n);
        let mut yv = nalgebra::DVectorViewMut::from_slice(y, n);
        yv.gemv(1.0, &*self.a, &xv, 0.0);
    }

    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &*self.a * x
    }
}

struct DiagonalOperator {
    diag: Vec<f64>,
}

impl MatVec for DiagonalOperator {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), di) in y.iter_mut().zip(x).zip(&self.diag) {
            *yi = di * xi;
        }
    }
}

struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> MatVec for FnOperator<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_dense(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn identity_matvec() {
        let op = LinearOperator::identity(3).unwrap();
        let y = op.matvec(&DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(op.query_count(), 1);
    }

    #[test]
    fn diagonal_matvec() {
        let op = LinearOperator::diagonal(vec![1.0, 2.0, 3.0]).unwrap();
        let y = op.matvec(&DVector::from_element(3, 1.0)).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn dense_basis_vector_extracts_column() {
        let a = random_dense(5, 3);
        let op = LinearOperator::dense(a.clone()).unwrap();
        let y = op.matvec(&DVector::from_fn(5, |i, _| (i == 2) as u8 as f64)).unwrap();
        for i in 0..5 {
            assert_eq!(y[i], a[(i, 2)]);
        }
    }

    #[test]
    fn matvec_dimension_mismatch() {
        let op = LinearOperator::identity(3).unwrap();
        let err = op.matvec(&DVector::zeros(4)).unwrap_err();
        assert!(matches!(err, TraceError::DimensionMismatch { expected: 3, got: 4 }));
        assert_eq!(op.query_count(), 0);
        assert!(op.matmat(&DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn matmat_identity_and_scaled() {
        let op = LinearOperator::identity(4).unwrap();
        let x = random_dense(4, 9).columns(0, 3).into_owned();
        assert_eq!(op.matmat(&x).unwrap(), x);
        assert_eq!(op.query_count(), 3);

        let op = LinearOperator::diagonal(vec![2.0, 2.0]).unwrap();
        let y = op.matmat(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(y, DMatrix::identity(2, 2) * 2.0);
    }

    #[test]
    fn matmat_matches_columnwise_matvec() {
        let a = random_dense(10, 5);
        let op = LinearOperator::dense(a).unwrap();
        let x = random_dense(10, 6).columns(0, 3).into_owned();
        let block = op.matmat(&x).unwrap();
        for j in 0..3 {
            let col = op.matvec(&x.column(j).into_owned()).unwrap();
            assert!((block.column(j) - col).amax() < 1e-12);
        }
        assert_eq!(op.query_count(), 6);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(LinearOperator::identity(0).is_err());
        assert!(LinearOperator::dense(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn non_finite_output_is_an_error() {
        let op = LinearOperator::from_fn(2, |_, y| y.fill(f64::NAN)).unwrap();
        assert!(matches!(
            op.matvec(&DVector::zeros(2)),
            Err(TraceError::Numerical(_))
        ));
    }

    #[test]
    fn fork_resets_counter_and_concurrent_counts_are_exact() {
        let op = LinearOperator::identity(8).unwrap();
        op.matvec(&DVector::zeros(8)).unwrap();
        let forked = op.fork();
        assert_eq!(forked.query_count(), 0);
        assert_eq!(op.clone().query_count(), 1);

        std::thread::scope(|s| {
            for _ in 0..4 {
                s.spawn(|| {
                    for _ in 0..250 {
                        forked.matvec(&DVector::zeros(8)).unwrap();
                    }
                });
            }
        });
        assert_eq!(forked.query_count(), 1000);
    }
}
