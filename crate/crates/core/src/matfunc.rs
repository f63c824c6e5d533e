//! Operators for `f(B)` given only matrix-vector access to a symmetric `B`.
//!
//! `exp(B)` and `log(B + λI)` are applied with Lanczos; `B^q` is applied
//! exactly by repeated multiplication. The wrapper's own query counter counts
//! applications of `f(B)` (the trace-estimation budget), while
//! [`LinearOperator::inner_matvecs`] reports the multiplications with `B`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Result, TraceError};
use crate::linop::{LinearOperator, MatVec};

/// Default Lanczos iteration count for the wrapped operators.
pub const DEFAULT_LANCZOS_ITERATIONS: usize = 40;

/// Absolute breakdown threshold on `β` for a unit starting vector.
const BREAKDOWN_TOL: f64 = 1e-12;

/// `j` steps of Lanczos with full reorthogonalization: `B V ≈ V T` where `T`
/// is tridiagonal with diagonal `alphas` and off-diagonal `betas`.
#[derive(Clone, Debug)]
pub struct LanczosDecomposition {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// `d × j` orthonormal Lanczos vectors.
    pub basis: DMatrix<f64>,
}

impl LanczosDecomposition {
    pub fn iterations(&self) -> usize {
        self.alphas.len()
    }

    pub fn tridiagonal(&self) -> DMatrix<f64> {
        let j = self.iterations();
        let mut t = DMatrix::zeros(j, j);
        for (i, &a) in self.alphas.iter().enumerate() {
            t[(i, i)] = a;
        }
        for (i, &b) in self.betas.iter().enumerate() {
            t[(i, i + 1)] = b;
            t[(i + 1, i)] = b;
        }
        t
    }

    /// `V f(T) e₁`.
    pub fn apply_function<F: Fn(f64) -> f64>(&self, f: F) -> DVector<f64> {
        let eig = SymmetricEigen::new(self.tridiagonal());
        let u = &eig.eigenvectors;
        let weights = DVector::from_fn(self.iterations(), |k, _| f(eig.eigenvalues[k]) * u[(0, k)]);
        &self.basis * (u * weights)
    }
}

/// Runs up to `iterations` Lanczos steps from `x / ‖x‖`.
///
/// Each step costs one query on `b`. Stops early when `β` falls below the
/// breakdown threshold, in which case the Krylov space is invariant and the
/// truncated decomposition is exact on it.
pub fn lanczos_decompose(
    b: &LinearOperator,
    x: &DVector<f64>,
    iterations: usize,
) -> Result<LanczosDecomposition> {
    let d = b.dim();
    if x.len() != d {
        return Err(TraceError::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    if iterations == 0 {
        return Err(invalid("lanczos needs at least one iteration"));
    }
    let norm = x.norm();
    if norm == 0.0 {
        return Err(invalid("lanczos starting vector is zero"));
    }
    if !norm.is_finite() {
        return Err(TraceError::Numerical("non-finite lanczos starting vector".into()));
    }

    let max_steps = iterations.min(d);
    let mut basis = DMatrix::zeros(d, max_steps);
    basis.column_mut(0).copy_from(&(x / norm));
    let mut alphas: Vec<f64> = Vec::with_capacity(max_steps);
    let mut betas: Vec<f64> = Vec::with_capacity(max_steps);
    let mut coeffs = DVector::zeros(max_steps);

    for j in 0..max_steps {
        let vj = basis.column(j).into_owned();
        let mut w = b.matvec(&vj)?;
        let alpha = vj.dot(&w);
        w.axpy(-alpha, &vj, 1.0);
        if j > 0 {
            w.axpy(-betas[j - 1], &basis.column(j - 1), 1.0);
        }
        // full reorthogonalization against every previous vector, twice
        let v = basis.columns(0, j + 1);
        let mut h = coeffs.rows_mut(0, j + 1);
        for _ in 0..2 {
            h.gemv_tr(1.0, &v, &w, 0.0);
            w.gemv(-1.0, &v, &h, 1.0);
        }
        alphas.push(alpha);

        if j + 1 == max_steps {
            break;
        }
        let beta = w.norm();
        if beta < BREAKDOWN_TOL {
            break;
        }
        betas.push(beta);
        basis.column_mut(j + 1).copy_from(&(w / beta));
    }

    let j = alphas.len();
    Ok(LanczosDecomposition {
        alphas,
        betas,
        basis: basis.columns(0, j).into_owned(),
    })
}

/// Approximates `f(B) x` by `‖x‖ · V f(T) e₁`.
pub fn lanczos_apply<F: Fn(f64) -> f64>(
    b: &LinearOperator,
    f: F,
    x: &DVector<f64>,
    iterations: usize,
) -> Result<DVector<f64>> {
    let dec = lanczos_decompose(b, x, iterations)?;
    let mut y = dec.apply_function(f);
    y *= x.norm();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(TraceError::Numerical("lanczos produced a non-finite result".into()));
    }
    Ok(y)
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

struct LanczosFunction {
    base: LinearOperator,
    iterations: usize,
    f: ScalarFn,
}

impl MatVec for LanczosFunction {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        if x.iter().all(|&v| v == 0.0) {
            y.fill(0.0);
            return;
        }
        let xv = DVector::from_column_slice(x);
        match lanczos_apply(&self.base, |t| (self.f)(t), &xv, self.iterations) {
            Ok(out) => y.copy_from_slice(out.as_slice()),
            // surfaces as a numerical error from LinearOperator::matvec
            Err(_) => y.fill(f64::NAN),
        }
    }

    fn inner_queries(&self) -> Option<u64> {
        Some(self.base.query_count())
    }
}

fn lanczos_operator(base: LinearOperator, iterations: usize, f: ScalarFn) -> Result<LinearOperator> {
    if iterations == 0 {
        return Err(invalid("lanczos needs at least one iteration"));
    }
    LinearOperator::new(LanczosFunction {
        base,
        iterations,
        f,
    })
}

/// `exp(B)` for symmetric `B`. Each query costs up to `iterations` queries on `B`.
pub fn exp_operator(b: LinearOperator, iterations: usize) -> Result<LinearOperator> {
    lanczos_operator(b, iterations, Arc::new(f64::exp))
}

/// `log(B + λI)` for PSD `B` and `λ > 0`.
///
/// Ritz values can undershoot the spectrum slightly; anything below
/// `−λ(1 − 1e−9)` is clamped to `−λ + 1e−12` before taking the log.
pub fn shifted_log_operator(b: LinearOperator, lambda: f64, iterations: usize) -> Result<LinearOperator> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("shift lambda must be positive, got {lambda}")));
    }
    let f = move |t: f64| {
        let t = if t < -lambda * (1.0 - 1e-9) { -lambda + 1e-12 } else { t };
        (t + lambda).ln()
    };
    lanczos_operator(b, iterations, Arc::new(f))
}

struct Power {
    base: LinearOperator,
    q: usize,
}

impl MatVec for Power {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut v = DVector::from_column_slice(x);
        for _ in 0..self.q {
            v = match self.base.matvec(&v) {
                Ok(next) => next,
                Err(_) => {
                    y.fill(f64::NAN);
                    return;
                }
            };
        }
        y.copy_from_slice(v.as_slice());
    }

    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut v = x.clone();
        for _ in 0..self.q {
            v = match self.base.matmat(&v) {
                Ok(next) => next,
                Err(_) => return DMatrix::from_element(x.nrows(), x.ncols(), f64::NAN),
            };
        }
        v
    }

    fn inner_queries(&self) -> Option<u64> {
        Some(self.base.query_count())
    }
}

/// `B^q` applied exactly as `q` nested multiplications.
pub fn power_operator(b: LinearOperator, q: usize) -> Result<LinearOperator> {
    if q == 0 {
        return Err(invalid("power must be at least 1"));
    }
    LinearOperator::new(Power { base: b, q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::exact_trace;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(r: usize, c: usize, seed: u64) -> DMatrix<f64> {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut g))
    }

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let g = gaussian(n, n, seed);
        (&g + g.transpose()) * 0.5
    }

    fn dense_function(b: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let eig = SymmetricEigen::new(b.clone());
        let fd = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
        &eig.eigenvectors * fd * eig.eigenvectors.transpose()
    }

    /// Symmetric matrix with eigenvalues spread uniformly over `[lo, hi]`.
    fn symmetric_with_spectrum(n: usize, lo: f64, hi: f64, seed: u64) -> DMatrix<f64> {
        let q = crate::linop::orthonormalize(&gaussian(n, n, seed));
        let lam = DVector::from_fn(n, |i, _| lo + (hi - lo) * i as f64 / (n - 1) as f64);
        &q * DMatrix::from_diagonal(&lam) * q.transpose()
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let b = LinearOperator::diagonal(vec![0.0; 4]).unwrap();
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let y = lanczos_apply(&b, f64::exp, &x, 5).unwrap();
        assert!((y - &x).amax() < 1e-14);
        assert_eq!(b.query_count(), 1);
    }

    #[test]
    fn exp_exact_on_two_dimensional_krylov_space() {
        let b = LinearOperator::diagonal(vec![2f64.ln(), 3f64.ln()]).unwrap();
        let y = lanczos_apply(&b, f64::exp, &DVector::from_vec(vec![1.0, 1.0]), 2).unwrap();
        assert!((y[0] - 2.0).abs() < 1e-10 && (y[1] - 3.0).abs() < 1e-10, "{y}");
    }

    #[test]
    fn exp_forty_iterations_matches_dense() {
        let a = symmetric_with_spectrum(100, -2.0, 2.0, 4);
        let dense = dense_function(&a, f64::exp);
        let b = LinearOperator::dense(a).unwrap();
        let x = gaussian(100, 1, 5).column(0).into_owned();
        let y = lanczos_apply(&b, f64::exp, &x, 40).unwrap();
        let exact = &dense * &x;
        assert!((y - &exact).norm() / exact.norm() < 1e-8);
        assert_eq!(b.query_count(), 40);
    }

    #[test]
    fn decomposition_is_orthonormal_and_symmetric() {
        let b = LinearOperator::dense(random_symmetric(80, 6)).unwrap();
        let x = gaussian(80, 1, 7).column(0).into_owned();
        let dec = lanczos_decompose(&b, &x, 60).unwrap();
        assert_eq!(dec.iterations(), 60);
        assert_eq!(dec.betas.len(), 59);
        assert!(dec.betas.iter().all(|&v| v >= 0.0));
        let vtv = dec.basis.tr_mul(&dec.basis);
        assert!((vtv - DMatrix::identity(60, 60)).amax() < 1e-8);
    }

    #[test]
    fn zero_start_and_zero_iterations_rejected() {
        let b = LinearOperator::identity(3).unwrap();
        assert!(lanczos_apply(&b, f64::exp, &DVector::zeros(3), 3).is_err());
        assert!(lanczos_apply(&b, f64::exp, &DVector::from_element(3, 1.0), 0).is_err());
    }

    #[test]
    fn breakdown_truncates() {
        // x lies in a 2-dimensional invariant subspace
        let b = LinearOperator::diagonal(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let x = DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]);
        let dec = lanczos_decompose(&b, &x, 4).unwrap();
        assert_eq!(dec.iterations(), 2);
        let y = lanczos_apply(&b, f64::exp, &x, 4).unwrap();
        let e = std::f64::consts::E;
        assert!((y - DVector::from_vec(vec![e, e * e, 0.0, 0.0])).amax() < 1e-12);
    }

    #[test]
    fn full_dimension_is_exact() {
        let a = random_symmetric(30, 8);
        let x = gaussian(30, 1, 9).column(0).into_owned();
        let b = LinearOperator::dense(a.clone()).unwrap();
        let y = lanczos_apply(&b, f64::exp, &x, 30).unwrap();
        let exact = dense_function(&a, f64::exp) * &x;
        assert!((y - &exact).norm() / exact.norm() < 1e-8);

        let g = gaussian(30, 30, 10);
        let psd = g.tr_mul(&g);
        let b = LinearOperator::dense(psd.clone()).unwrap();
        let y = lanczos_apply(&b, |t| (t + 0.1).ln(), &x, 30).unwrap();
        let exact = dense_function(&psd, |t| (t + 0.1).ln()) * &x;
        assert!((y - &exact).norm() / exact.norm() < 1e-8);
    }

    #[test]
    fn krylov_error_is_monotone() {
        let a = symmetric_with_spectrum(120, -3.0, 3.0, 11);
        let x = gaussian(120, 1, 12).column(0).into_owned();
        let exact = dense_function(&a, f64::exp) * &x;
        let b = LinearOperator::dense(a).unwrap();
        let errs: Vec<f64> = (1..=30)
            .map(|j| (lanczos_apply(&b, f64::exp, &x, j).unwrap() - &exact).norm() / exact.norm())
            .collect();
        let floor = 1e-14;
        for w in errs.windows(2) {
            assert!(w[1] <= w[0].max(floor) * 10.0, "{errs:?}");
        }
        assert!(errs[29] < 1e-12);
    }

    #[test]
    fn exp_operator_basic() {
        let op = exp_operator(LinearOperator::diagonal(vec![0.0; 5]).unwrap(), 10).unwrap();
        assert!((exact_trace(&op).unwrap().value - 5.0).abs() < 1e-12);

        let op = exp_operator(LinearOperator::diagonal(vec![1.0]).unwrap(), 3).unwrap();
        let y = op.matvec(&DVector::from_vec(vec![2.0])).unwrap();
        assert!((y[0] - 2.0 * std::f64::consts::E).abs() < 1e-14);
        assert_eq!(op.query_count(), 1);
        assert_eq!(op.inner_matvecs(), Some(1));
    }

    #[test]
    fn exp_operator_triangle_graph() {
        let k3 = DMatrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 });
        let op = exp_operator(LinearOperator::dense(k3).unwrap(), 40).unwrap();
        let expected = 2f64.exp() + 2.0 * (-1f64).exp();
        let got = exact_trace(&op).unwrap().value;
        assert!((got - expected).abs() < 1e-7, "{got} vs {expected}");
    }

    #[test]
    fn wrapped_operator_is_symmetric() {
        let a = symmetric_with_spectrum(60, -2.0, 2.0, 13);
        let norm_est = 2f64.exp();
        let op = exp_operator(LinearOperator::dense(a).unwrap(), 40).unwrap();
        for s in 0..10 {
            let x = gaussian(60, 1, 100 + s).column(0).into_owned();
            let y = gaussian(60, 1, 200 + s).column(0).into_owned();
            let lhs = x.dot(&op.matvec(&y).unwrap());
            let rhs = y.dot(&op.matvec(&x).unwrap());
            assert!((lhs - rhs).abs() < 1e-7 * x.norm() * y.norm() * norm_est);
        }
    }

    #[test]
    fn shifted_log_basic() {
        let op = shifted_log_operator(LinearOperator::diagonal(vec![0.0; 4]).unwrap(), 1.0, 5).unwrap();
        assert!(exact_trace(&op).unwrap().value.abs() < 1e-14);

        let b = LinearOperator::diagonal(vec![std::f64::consts::E - 0.5]).unwrap();
        let op = shifted_log_operator(b, 0.5, 3).unwrap();
        let y = op.matvec(&DVector::from_vec(vec![1.5])).unwrap();
        assert!((y[0] - 1.5).abs() < 1e-14);

        let b = LinearOperator::identity(2).unwrap();
        assert!(shifted_log_operator(b.clone(), 0.0, 5).is_err());
        assert!(shifted_log_operator(b, -1.0, 5).is_err());
    }

    #[test]
    fn power_operator_matches_dense_cube() {
        let op = power_operator(LinearOperator::diagonal(vec![2.0, 3.0]).unwrap(), 3).unwrap();
        let y = op.matvec(&DVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert_eq!(y.as_slice(), &[8.0, 27.0]);
        assert_eq!(op.inner_matvecs(), Some(3));

        let a = random_symmetric(20, 14);
        let cube = &a * &a * &a;
        let op = power_operator(LinearOperator::dense(a.clone()).unwrap(), 3).unwrap();
        let x = gaussian(20, 4, 15);
        let got = op.matmat(&x).unwrap();
        let exact = &cube * &x;
        assert!((got - &exact).norm() / exact.norm() < 1e-10);
        assert_eq!(op.query_count(), 4);
        assert_eq!(op.inner_matvecs(), Some(12));

        let single = power_operator(LinearOperator::dense(a.clone()).unwrap(), 1).unwrap();
        let v = gaussian(20, 1, 16).column(0).into_owned();
        assert_eq!(single.matvec(&v).unwrap(), &a * &v);
        assert!(power_operator(LinearOperator::identity(2).unwrap(), 0).is_err());
    }
}
