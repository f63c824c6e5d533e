use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result, TraceError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum ProbeDistribution {
    /// i.i.d. ±1 entries.
    #[default]
    Rademacher,
    /// i.i.d. standard normal entries.
    Gaussian,
}

impl fmt::Display for ProbeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Rademacher => "rademacher",
            Self::Gaussian => "gaussian",
        })
    }
}

impl FromStr for ProbeDistribution {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rademacher" | "sign" => Ok(Self::Rademacher),
            "gaussian" | "normal" => Ok(Self::Gaussian),
            other => Err(invalid(format!("unknown probe distribution `{other}`"))),
        }
    }
}

/// A `d × k` block of random probe vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeMatrix {
    distribution: ProbeDistribution,
    entries: DMatrix<f64>,
}

impl ProbeMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn distribution(&self) -> ProbeDistribution {
        self.distribution
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }
}

/// Draws a `d × k` probe block, filled column by column.
pub fn sample_probes<R: Rng + ?Sized>(
    d: usize,
    k: usize,
    distribution: ProbeDistribution,
    rng: &mut R,
) -> Result<ProbeMatrix> {
    if d == 0 || k == 0 {
        return Err(invalid(format!(
            "probe block must be at least 1x1, got {d}x{k}"
        )));
    }
    let mut entries = DMatrix::zeros(d, k);
    match distribution {
        ProbeDistribution::Rademacher => {
            // 64 signs per draw
            for chunk in entries.as_mut_slice().chunks_mut(64) {
                let mut bits: u64 = rng.random();
                for v in chunk {
                    *v = if bits & 1 == 1 { 1.0 } else { -1.0 };
                    bits >>= 1;
                }
            }
        }
        ProbeDistribution::Gaussian => {
            for v in entries.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
        }
    }
    Ok(ProbeMatrix {
        distribution,
        entries,
    })
}
