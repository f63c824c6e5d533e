use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, TraceError};

/// Relative column-residual threshold below which a column is treated as
/// linearly dependent and dropped by [`orthonormalize`].
pub const DROP_TOLERANCE: f64 = 1e-12;

/// Default relative singular-value cutoff for [`pseudoinverse`].
pub const PINV_TOLERANCE: f64 = 1e-12;

/// Orthonormal basis for the column span of `x`.
///
/// Classical Gram-Schmidt with one full reorthogonalization pass per column.
/// Columns whose residual norm falls below `DROP_TOLERANCE * ‖x‖_F` are
/// discarded, so the result has `r ≤ k` columns where `r` is the numerical
/// rank. An all-zero input yields a `d × 0` matrix.
pub fn orthonormalize(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (d, k) = x.shape();
    let tol = DROP_TOLERANCE * x.norm();
    let mut q = DMatrix::<f64>::zeros(d, k.min(d));
    let mut coeffs = DVector::<f64>::zeros(k.min(d));
    let mut rank = 0;

    for j in 0..k {
        if rank == d {
            break;
        }
        let mut v = x.column(j).into_owned();
        if rank > 0 {
            let basis = q.columns(0, rank);
            let mut h = coeffs.rows_mut(0, rank);
            for _ in 0..2 {
                h.gemv_tr(1.0, &basis, &v, 0.0);
                v.gemv(-1.0, &basis, &h, 1.0);
            }
        }
        let norm = v.norm();
        if norm > tol {
            q.column_mut(rank).copy_from(&(v / norm));
            rank += 1;
        }
    }
    q.columns(0, rank).into_owned()
}

/// Moore-Penrose pseudoinverse via the SVD; singular values below
/// `tol * σ_max` are treated as zero.
pub fn pseudoinverse(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (p, q) = m.shape();
    if p == 0 || q == 0 {
        return DMatrix::zeros(q, p);
    }
    let Some(svd) = ThinSvd::new(m) else {
        return DMatrix::from_element(q, p, f64::NAN);
    };
    let smax = svd.singular_values.first().copied().unwrap_or(0.0);
    if smax <= 0.0 {
        return DMatrix::zeros(q, p);
    }
    let cutoff = tol * smax;
    let mut v_scaled = svd.v;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let inv = if s > cutoff { 1.0 / s } else { 0.0 };
        v_scaled.column_mut(k).scale_mut(inv);
    }
    v_scaled * svd.u.transpose()
}

/// Thin SVD `M = U diag(σ) Vᵀ` with σ descending, computed by faer.
struct ThinSvd {
    u: DMatrix<f64>,
    singular_values: Vec<f64>,
    v: DMatrix<f64>,
}

impl ThinSvd {
    fn new(m: &DMatrix<f64>) -> Option<Self> {
        let (p, q) = m.shape();
        let fm = faer::Mat::<f64>::from_fn(p, q, |i, j| m[(i, j)]);
        let svd = fm.thin_svd().ok()?;
        let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
        let r = s.nrows();
        Some(Self {
            u: DMatrix::from_fn(p, r, |i, k| u[(i, k)]),
            singular_values: (0..r).map(|k| s[k]).collect(),
            v: DMatrix::from_fn(q, r, |j, k| v[(j, k)]),
        })
    }
}

fn singular_values(m: &DMatrix<f64>) -> Option<Vec<f64>> {
    let (p, q) = m.shape();
    let fm = faer::Mat::<f64>::from_fn(p, q, |i, j| m[(i, j)]);
    let s = fm.singular_values().ok()?;
    Some(s)
}

/// Exact spectral quantities of an explicit matrix, used as test oracles.
#[derive(Clone, Debug)]
pub struct DenseReference {
    pub trace: f64,
    pub frobenius_norm: f64,
    pub nuclear_norm: f64,
    /// Eigenvalues in descending order when the input is symmetric.
    pub eigenvalues_descending: Option<Vec<f64>>,
    /// Singular values in descending order.
    pub singular_values: Vec<f64>,
    // tail_sq[k] = Σ_{i ≥ k} σ_i²
    tail_sq: Vec<f64>,
}

impl DenseReference {
    /// `‖A − A_k‖_F` for the best rank-`k` approximation `A_k`.
    pub fn rank_k_tail_frobenius(&self, k: usize) -> f64 {
        if k == 0 {
            self.frobenius_norm
        } else if k >= self.tail_sq.len() {
            0.0
        } else {
            self.tail_sq[k].sqrt()
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.eigenvalues_descending.is_some()
    }
}

/// Full-decomposition reference for a square matrix. Symmetric input (to
/// `1e-12` relative) goes through a symmetric eigendecomposition, anything
/// else through the SVD.
pub fn dense_reference(a: &DMatrix<f64>) -> Result<DenseReference> {
    let (n, c) = a.shape();
    if n != c {
        return Err(TraceError::InvalidArgument(format!(
            "dense_reference needs a square matrix, got {n}x{c}"
        )));
    }
    if n == 0 {
        return Err(TraceError::InvalidArgument("empty matrix".into()));
    }
    let trace = a.trace();
    let frobenius_norm = a.norm();
    let scale = a.amax();
    let asym = (a - a.transpose()).amax();

    let (eigenvalues_descending, singular_values) = if asym <= 1e-12 * scale {
        let sym = (a + a.transpose()) * 0.5;
        let mut eig: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        eig.sort_by(|x, y| y.total_cmp(x));
        let mut sv: Vec<f64> = eig.iter().map(|v| v.abs()).collect();
        sv.sort_by(|x, y| y.total_cmp(x));
        (Some(eig), sv)
    } else {
        let mut sv = singular_values(a)
            .ok_or_else(|| TraceError::Numerical("SVD did not converge".into()))?;
        sv.sort_by(|x, y| y.total_cmp(x));
        (None, sv)
    };

    let nuclear_norm = singular_values.iter().sum();
    let mut tail_sq = vec![0.0; singular_values.len() + 1];
    for i in (0..singular_values.len()).rev() {
        tail_sq[i] = tail_sq[i + 1] + singular_values[i] * singular_values[i];
    }
    tail_sq.pop();

    Ok(DenseReference {
        trace,
        frobenius_norm,
        nuclear_norm,
        eigenvalues_descending,
        singular_values,
        tail_sq,
    })
}
