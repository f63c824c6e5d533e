//! Synthetic test matrices: randomly rotated power-law spectra and Gaussian
//! kernel matrices on 2D points.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result, TraceError};
use crate::linop::{orthonormalize, LinearOperator};

/// Eigenvalues `λᵢ = i^{−c}` for `i = 1..=d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumSpec {
    dim: usize,
    exponent: f64,
}

impl SpectrumSpec {
    pub fn new(dim: usize, exponent: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("spectrum dimension must be at least 1"));
        }
        if !(exponent >= 0.0 && exponent.is_finite()) {
            return Err(invalid(format!("power-law exponent must be >= 0, got {exponent}")));
        }
        Ok(Self { dim, exponent })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Descending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        (1..=self.dim).map(|i| (i as f64).powf(-self.exponent)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues().iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.eigenvalues().iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    /// `‖A − A_k‖_F` computed straight from the spectrum.
    pub fn tail_frobenius(&self, k: usize) -> f64 {
        self.eigenvalues()
            .iter()
            .skip(k)
            .map(|l| l * l)
            .sum::<f64>()
            .sqrt()
    }
}

/// An explicit matrix together with an operator sharing its storage.
#[derive(Clone, Debug)]
pub struct SyntheticMatrix {
    pub matrix: Arc<DMatrix<f64>>,
    pub operator: LinearOperator,
}

/// `A = QᵀΛQ` with `Q` from orthonormalizing a `d × d` Gaussian matrix.
pub fn power_law_matrix<R: Rng + ?Sized>(spec: SpectrumSpec, rng: &mut R) -> Result<SyntheticMatrix> {
    let d = spec.dim();
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = orthonormalize(&g);
    if q.ncols() != d {
        return Err(TraceError::Numerical(format!(
            "random rotation lost rank: {} of {d} columns",
            q.ncols()
        )));
    }
    let lam = spec.eigenvalues();
    let mut scaled = q.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row.scale_mut(lam[i]);
    }
    let mut a = q.tr_mul(&scaled);
    // exact symmetry
    for j in 0..d {
        for i in 0..j {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
    let matrix = Arc::new(a);
    let operator = LinearOperator::dense_shared(Arc::clone(&matrix))?;
    Ok(SyntheticMatrix { matrix, operator })
}

/// `Bᵢⱼ = exp(−γ‖pᵢ − pⱼ‖²)`.
pub fn gaussian_kernel_matrix(points: &[[f64; 2]], gamma: f64) -> Result<DMatrix<f64>> {
    if points.is_empty() {
        return Err(invalid("kernel matrix needs at least one point"));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid(format!("kernel width gamma must be positive, got {gamma}")));
    }
    let n = points.len();
    let mut b = DMatrix::from_element(n, n, 1.0);
    for j in 0..n {
        for i in 0..j {
            let dx = points[i][0] - points[j][0];
            let dy = points[i][1] - points[j][1];
            let v = (-gamma * (dx * dx + dy * dy)).exp();
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    Ok(b)
}

/// `n` points uniform on the unit square.
pub fn synthetic_2d_points<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<[f64; 2]>> {
    if n == 0 {
        return Err(invalid("need at least one point"));
    }
    Ok((0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect())
}

/// Reads `x y` pairs, one per line, separated by whitespace or a comma.
/// Blank lines and `#` comments are skipped. Coordinates are min-max
/// normalized to the unit square; a constant axis maps to 0.
pub fn parse_points(text: &str) -> Result<Vec<[f64; 2]>> {
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty());
        let mut next = |name: &str| -> Result<f64> {
            let tok = fields.next().ok_or_else(|| TraceError::Parse {
                line: idx + 1,
                message: format!("missing {name} coordinate"),
            })?;
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| TraceError::Parse {
                    line: idx + 1,
                    message: format!("bad {name} coordinate `{tok}`"),
                })
        };
        let x = next("x")?;
        let y = next("y")?;
        points.push([x, y]);
    }
    if points.is_empty() {
        return Err(invalid("points file has no coordinates"));
    }
    normalize_unit_square(&mut points);
    Ok(points)
}

pub fn normalize_unit_square(points: &mut [[f64; 2]]) {
    for axis in 0..2 {
        let lo = points.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        for p in points.iter_mut() {
            p[axis] = if span > 0.0 { (p[axis] - lo) / span } else { 0.0 };
        }
    }
}
