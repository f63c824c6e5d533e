//! Trace estimators over a [`LinearOperator`].
//!
//! All estimators take the total matrix-vector budget `m` and report the
//! number of queries they actually consumed, measured from the operator's own
//! counter. Use a [`LinearOperator::fork`] per thread when running trials
//! concurrently, otherwise the counter delta mixes calls.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result, TraceError};
use crate::linop::{
    orthonormalize, pseudoinverse, sample_probes, LinearOperator, ProbeDistribution, ProbeMatrix,
    PINV_TOLERANCE,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Hutchinson,
    HutchPlusPlus,
    NaHutchPlusPlus,
    HutchPlusPlusGauss,
    SubspaceProjection,
    Exact,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 6] = [
        Self::Hutchinson,
        Self::HutchPlusPlus,
        Self::NaHutchPlusPlus,
        Self::HutchPlusPlusGauss,
        Self::SubspaceProjection,
        Self::Exact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Hutchinson => "hutchinson",
            Self::HutchPlusPlus => "hutch_pp",
            Self::NaHutchPlusPlus => "na_hutch_pp",
            Self::HutchPlusPlusGauss => "hutch_pp_gauss",
            Self::SubspaceProjection => "subspace_projection",
            Self::Exact => "exact",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid(format!("unknown estimator `{s}`")))
    }
}

/// How the budget was divided between the parts of an estimator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Split {
    Hutchinson {
        probes: usize,
    },
    /// Shared by Hutch++ and its Gaussian variant: `sketch` columns of `S`,
    /// `basis_rank` columns of `Q` kept after orthonormalization, and
    /// `residual` columns of `G`.
    Projected {
        sketch: usize,
        basis_rank: usize,
        residual: usize,
    },
    NonAdaptive {
        s_cols: usize,
        r_cols: usize,
        g_cols: usize,
    },
    Subspace {
        k: usize,
        iterations: usize,
        basis_rank: usize,
    },
    Exact {
        basis_queries: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEstimate {
    pub value: f64,
    pub matvecs_used: u64,
    pub estimator: EstimatorKind,
    pub split: Split,
}

/// The `(c₁, c₂, c₃)` budget fractions of NA-Hutch++.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitFractions {
    c1: f64,
    c2: f64,
    c3: f64,
}

impl SplitFractions {
    pub fn new(c1: f64, c2: f64, c3: f64) -> Result<Self> {
        if !(c1 > 0.0 && c2 > 0.0 && c3 > 0.0) {
            return Err(invalid(format!(
                "split fractions must be positive, got ({c1}, {c2}, {c3})"
            )));
        }
        if (c1 + c2 + c3 - 1.0).abs() > 1e-9 {
            return Err(invalid(format!(
                "split fractions must sum to 1, got {}",
                c1 + c2 + c3
            )));
        }
        if c1 >= c2 {
            return Err(invalid(format!("need c1 < c2, got c1={c1}, c2={c2}")));
        }
        Ok(Self { c1, c2, c3 })
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn c3(&self) -> f64 {
        self.c3
    }

    /// Column counts `(⌊c₁m⌋, ⌊c₂m⌋, ⌊c₃m⌋)`. Leftover budget is dropped.
    pub fn columns(&self, m: usize) -> (usize, usize, usize) {
        // the epsilon keeps e.g. (1/3)·9 from flooring to 2
        let floor = |c: f64| (c * m as f64 + 1e-9).floor() as usize;
        (floor(self.c1), floor(self.c2), floor(self.c3))
    }
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            c1: 0.25,
            c2: 0.5,
            c3: 0.25,
        }
    }
}

/// Everything needed to run any estimator reproducibly.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub budget_m: usize,
    pub distribution: ProbeDistribution,
    pub fractions: SplitFractions,
    /// Subspace-iteration count `q` for subspace projection.
    pub subspace_iterations: usize,
    pub seed: u64,
}

impl EstimatorConfig {
    pub fn new(budget_m: usize, seed: u64) -> Self {
        Self {
            budget_m,
            distribution: ProbeDistribution::Rademacher,
            fractions: SplitFractions::default(),
            subspace_iterations: 1,
            seed,
        }
    }

    /// Runs `kind` with this budget. Subspace projection gets `k = m / (q+1)`
    /// so that it spends the same budget; `Exact` ignores the budget.
    pub fn run(&self, kind: EstimatorKind, op: &LinearOperator) -> Result<TraceEstimate> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let m = self.budget_m;
        match kind {
            EstimatorKind::Hutchinson => hutchinson(op, m, self.distribution, &mut rng),
            EstimatorKind::HutchPlusPlus => hutch_pp(op, m, self.distribution, &mut rng),
            EstimatorKind::NaHutchPlusPlus => {
                na_hutch_pp(op, m, self.fractions, self.distribution, &mut rng)
            }
            EstimatorKind::HutchPlusPlusGauss => hutch_pp_gauss(op, m, &mut rng),
            EstimatorKind::SubspaceProjection => {
                let q = self.subspace_iterations;
                if q == 0 {
                    return Err(invalid("subspace iterations must be at least 1"));
                }
                let k = m / (q + 1);
                if k == 0 {
                    return Err(invalid(format!(
                        "subspace projection with q={q} needs m >= {}, got {m}",
                        q + 1
                    )));
                }
                subspace_projection(op, k, q, &mut rng)
            }
            EstimatorKind::Exact => exact_trace(op),
        }
    }
}

/// `Σⱼ ⟨xⱼ, yⱼ⟩` over matching columns, i.e. `trace(Xᵀ Y)`.
fn paired_trace(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    x.as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(a, b)| a * b)
        .sum()
}

fn finish(
    op: &LinearOperator,
    before: u64,
    value: f64,
    estimator: EstimatorKind,
    split: Split,
) -> Result<TraceEstimate> {
    if !value.is_finite() {
        return Err(TraceError::Numerical(format!("{estimator} produced {value}")));
    }
    Ok(TraceEstimate {
        value,
        matvecs_used: op.query_count() - before,
        estimator,
        split,
    })
}

/// Hutchinson's estimator `(1/m) Σᵢ gᵢᵀ A gᵢ`.
pub fn hutchinson<R: Rng + ?Sized>(
    op: &LinearOperator,
    m: usize,
    distribution: ProbeDistribution,
    rng: &mut R,
) -> Result<TraceEstimate> {
    if m == 0 {
        return Err(invalid("hutchinson needs m >= 1"));
    }
    let before = op.query_count();
    let g = sample_probes(op.dim(), m, distribution, rng)?.into_matrix();
    let ag = op.matmat(&g)?;
    let value = paired_trace(&g, &ag) / m as f64;
    finish(
        op,
        before,
        value,
        EstimatorKind::Hutchinson,
        Split::Hutchinson { probes: m },
    )
}

/// `trace(QᵀAQ) + (1/divisor)·trace(G_defᵀ A G_def)` with `Q` an orthonormal
/// basis for `A·S` and `G_def = (I − QQᵀ)G`.
///
/// Since `I − QQᵀ` is idempotent, `Gᵀ(I−QQᵀ)A(I−QQᵀ)G` only needs the one
/// deflated block multiplied by `A`.
fn projected_estimate(
    op: &LinearOperator,
    sketch: &ProbeMatrix,
    residual: &ProbeMatrix,
    divisor: f64,
) -> Result<(f64, usize)> {
    let y = op.matmat(sketch.as_matrix())?;
    let q = orthonormalize(&y);
    let rank = q.ncols();

    let (projected, g_def) = if rank > 0 {
        let aq = op.matmat(&q)?;
        let g = residual.as_matrix();
        let g_def = g - &q * q.tr_mul(g);
        (paired_trace(&q, &aq), g_def)
    } else {
        (0.0, residual.as_matrix().clone())
    };
    let ag = op.matmat(&g_def)?;
    Ok((projected + paired_trace(&g_def, &ag) / divisor, rank))
}

/// Hutch++ with `b = ⌊m/3⌋` columns each for the sketch `S`, the basis `Q`
/// and the residual probes `G`.
///
/// Uses `3b` queries when `A·S` has full column rank; a rank-deficient sketch
/// needs fewer multiplications by `Q` and the count reflects that. The
/// residual term is always divided by `b`.
pub fn hutch_pp<R: Rng + ?Sized>(
    op: &LinearOperator,
    m: usize,
    distribution: ProbeDistribution,
    rng: &mut R,
) -> Result<TraceEstimate> {
    if m < 3 {
        return Err(invalid(format!("hutch_pp needs m >= 3, got {m}")));
    }
    let b = m / 3;
    let before = op.query_count();
    let d = op.dim();
    let s = sample_probes(d, b, distribution, rng)?;
    let g = sample_probes(d, b, distribution, rng)?;
    let (value, basis_rank) = projected_estimate(op, &s, &g, b as f64)?;
    finish(
        op,
        before,
        value,
        EstimatorKind::HutchPlusPlus,
        Split::Projected {
            sketch: b,
            basis_rank,
            residual: b,
        },
    )
}

fn gauss_budget_hint(m: usize) -> String {
    let upper = if m < 6 { 6 } else { (m - 2).div_ceil(4) * 4 + 2 };
    if m < 6 {
        format!("nearest valid budget is {upper}")
    } else {
        let lower = (m - 2) / 4 * 4 + 2;
        format!("nearest valid budgets are {lower} and {upper}")
    }
}

/// The Gaussian-sketch variant of Hutch++: `S` has `(m+2)/4` Gaussian
/// columns, `G` has `(m−2)/2` Rademacher columns, and the residual is scaled
/// by `2/(m−2)`. Requires `m ≡ 2 (mod 4)` and `m ≥ 6`.
pub fn hutch_pp_gauss<R: Rng + ?Sized>(
    op: &LinearOperator,
    m: usize,
    rng: &mut R,
) -> Result<TraceEstimate> {
    if m < 6 || m % 4 != 2 {
        return Err(invalid(format!(
            "hutch_pp_gauss needs m ≡ 2 (mod 4) and m >= 6, got {m}; {}",
            gauss_budget_hint(m)
        )));
    }
    let sketch_cols = (m + 2) / 4;
    let residual_cols = (m - 2) / 2;
    let before = op.query_count();
    let d = op.dim();
    let s = sample_probes(d, sketch_cols, ProbeDistribution::Gaussian, rng)?;
    let g = sample_probes(d, residual_cols, ProbeDistribution::Rademacher, rng)?;
    let (value, basis_rank) = projected_estimate(op, &s, &g, residual_cols as f64)?;
    finish(
        op,
        before,
        value,
        EstimatorKind::HutchPlusPlusGauss,
        Split::Projected {
            sketch: sketch_cols,
            basis_rank,
            residual: residual_cols,
        },
    )
}

/// The three probe blocks of NA-Hutch++, all drawn before any query.
#[derive(Clone, Debug, PartialEq)]
pub struct NonAdaptiveProbes {
    pub s: ProbeMatrix,
    pub r: ProbeMatrix,
    pub g: ProbeMatrix,
}

impl NonAdaptiveProbes {
    pub fn sample<R: Rng + ?Sized>(
        d: usize,
        m: usize,
        fractions: SplitFractions,
        distribution: ProbeDistribution,
        rng: &mut R,
    ) -> Result<Self> {
        let (sc, rc, gc) = fractions.columns(m);
        if sc == 0 || rc == 0 || gc == 0 {
            return Err(invalid(format!(
                "na_hutch_pp budget m={m} leaves an empty block ({sc}, {rc}, {gc})"
            )));
        }
        Ok(Self {
            s: sample_probes(d, sc, distribution, rng)?,
            r: sample_probes(d, rc, distribution, rng)?,
            g: sample_probes(d, gc, distribution, rng)?,
        })
    }

    /// `[S R G]` in the order the single batched multiply sees them.
    pub fn stacked(&self) -> DMatrix<f64> {
        let (s, r, g) = (self.s.as_matrix(), self.r.as_matrix(), self.g.as_matrix());
        let d = s.nrows();
        let mut out = DMatrix::zeros(d, s.ncols() + r.ncols() + g.ncols());
        out.columns_mut(0, s.ncols()).copy_from(s);
        out.columns_mut(s.ncols(), r.ncols()).copy_from(r);
        out.columns_mut(s.ncols() + r.ncols(), g.ncols()).copy_from(g);
        out
    }
}

/// NA-Hutch++: every query vector is drawn before the operator is touched,
/// and all of them go through one batched multiply.
pub fn na_hutch_pp<R: Rng + ?Sized>(
    op: &LinearOperator,
    m: usize,
    fractions: SplitFractions,
    distribution: ProbeDistribution,
    rng: &mut R,
) -> Result<TraceEstimate> {
    let probes = NonAdaptiveProbes::sample(op.dim(), m, fractions, distribution, rng)?;
    na_hutch_pp_with_probes(op, &probes)
}

/// NA-Hutch++ on pre-drawn probes.
///
/// `trace((SᵀZ)⁺WᵀZ) + (1/g)[trace(GᵀAG) − trace(GᵀZ(SᵀZ)⁺WᵀG)]` with
/// `Z = AR`, `W = AS`.
pub fn na_hutch_pp_with_probes(
    op: &LinearOperator,
    probes: &NonAdaptiveProbes,
) -> Result<TraceEstimate> {
    let (s, r, g) = (probes.s.as_matrix(), probes.r.as_matrix(), probes.g.as_matrix());
    let (sc, rc, gc) = (s.ncols(), r.ncols(), g.ncols());
    let before = op.query_count();

    let all = op.matmat(&probes.stacked())?;
    let w = all.columns(0, sc);
    let z = all.columns(sc, rc);
    let ag = all.columns(sc + rc, gc).into_owned();

    let stz_pinv = pseudoinverse(&s.tr_mul(&z), PINV_TOLERANCE); // rc × sc
    let wtz = w.tr_mul(&z); // sc × rc
    let sketch_trace = (&stz_pinv * wtz).trace();

    let gtz = g.tr_mul(&z); // gc × rc
    let wtg = w.tr_mul(g); // sc × gc
    let sketch_on_g = (gtz * stz_pinv * wtg).trace();
    let value = sketch_trace + (paired_trace(g, &ag) - sketch_on_g) / gc as f64;

    finish(
        op,
        before,
        value,
        EstimatorKind::NaHutchPlusPlus,
        Split::NonAdaptive {
            s_cols: sc,
            r_cols: rc,
            g_cols: gc,
        },
    )
}

/// Subspace projection: `q` rounds of subspace iteration from a Rademacher
/// start block, then `trace(QᵀAQ)`. Spends `k(q+1)` queries.
pub fn subspace_projection<R: Rng + ?Sized>(
    op: &LinearOperator,
    k: usize,
    iterations_q: usize,
    rng: &mut R,
) -> Result<TraceEstimate> {
    if k == 0 {
        return Err(invalid("subspace_projection needs k >= 1"));
    }
    if iterations_q == 0 {
        return Err(invalid("subspace_projection needs q >= 1"));
    }
    let before = op.query_count();
    let s = sample_probes(op.dim(), k, ProbeDistribution::Rademacher, rng)?;
    let mut q = orthonormalize(&op.matmat(s.as_matrix())?);
    for _ in 1..iterations_q {
        if q.ncols() == 0 {
            break;
        }
        q = orthonormalize(&op.matmat(&q)?);
    }
    let value = if q.ncols() > 0 {
        paired_trace(&q, &op.matmat(&q)?)
    } else {
        0.0
    };
    finish(
        op,
        before,
        value,
        EstimatorKind::SubspaceProjection,
        Split::Subspace {
            k,
            iterations: iterations_q,
            basis_rank: q.ncols(),
        },
    )
}

const EXACT_BLOCK: usize = 256;

/// `Σᵢ eᵢᵀ A eᵢ` with `d` basis-vector queries.
pub fn exact_trace(op: &LinearOperator) -> Result<TraceEstimate> {
    let d = op.dim();
    let before = op.query_count();
    let mut value = 0.0;
    let mut start = 0;
    while start < d {
        let width = EXACT_BLOCK.min(d - start);
        let mut basis = DMatrix::zeros(d, width);
        for j in 0..width {
            basis[(start + j, j)] = 1.0;
        }
        let out = op.matmat(&basis)?;
        value += (0..width).map(|j| out[(start + j, j)]).sum::<f64>();
        start += width;
    }
    finish(
        op,
        before,
        value,
        EstimatorKind::Exact,
        Split::Exact { basis_queries: d },
    )
}
