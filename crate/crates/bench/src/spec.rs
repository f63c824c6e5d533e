use std::path::PathBuf;

use trace_core::EstimatorKind;

use crate::error::{spec_error, Result};

/// Where the matrix of a sweep comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum MatrixSource {
    /// Randomly rotated `diag(i^{-c})`, `i = 1..=d`.
    PowerLaw { c: f64, d: usize },
    /// `log(B + λI)` for a Gaussian kernel matrix `B`, applied by Lanczos.
    /// Points come from `points` when given, otherwise `n` uniform points.
    KernelLogdet {
        n: usize,
        gamma: f64,
        lambda: f64,
        iterations: usize,
        points: Option<PathBuf>,
    },
    /// `exp(B)` of a graph adjacency matrix, applied by Lanczos.
    GraphEstrada { path: PathBuf, iterations: usize },
    /// `B³` of a graph adjacency matrix; the trace is six times the
    /// triangle count.
    GraphTriangles { path: PathBuf, allow_large: bool },
}

impl MatrixSource {
    pub fn validate(&self) -> Result<()> {
        match self {
            MatrixSource::PowerLaw { c, d } => {
                if *d == 0 {
                    return Err(spec_error("power_law needs d >= 1"));
                }
                if !(*c >= 0.0 && c.is_finite()) {
                    return Err(spec_error(format!("power_law needs c >= 0, got {c}")));
                }
            }
            MatrixSource::KernelLogdet {
                n,
                gamma,
                lambda,
                iterations,
                points,
            } => {
                if points.is_none() && *n == 0 {
                    return Err(spec_error("kernel_logdet needs n >= 1 or a points file"));
                }
                if !(*gamma > 0.0 && gamma.is_finite()) {
                    return Err(spec_error(format!("gamma must be positive, got {gamma}")));
                }
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return Err(spec_error(format!("lambda must be positive, got {lambda}")));
                }
                if *iterations == 0 {
                    return Err(spec_error("lanczos iterations must be at least 1"));
                }
            }
            MatrixSource::GraphEstrada { iterations, .. } => {
                if *iterations == 0 {
                    return Err(spec_error("lanczos iterations must be at least 1"));
                }
            }
            MatrixSource::GraphTriangles { .. } => {}
        }
        Ok(())
    }
}

/// One sweep: every estimator at every budget, `trials` times each.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub source: MatrixSource,
    pub estimators: Vec<EstimatorKind>,
    /// Strictly ascending.
    pub budgets: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Subspace-iteration count `q` for subspace projection.
    pub subspace_iterations: usize,
}

impl ExperimentSpec {
    pub fn new(
        source: MatrixSource,
        estimators: Vec<EstimatorKind>,
        budgets: Vec<usize>,
        trials: usize,
        seed: u64,
    ) -> Self {
        Self {
            source,
            estimators,
            budgets,
            trials,
            seed,
            subspace_iterations: 1,
        }
    }

    /// Structural checks only. A budget an estimator cannot run shows up
    /// as a failed cell, not here.
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        if self.estimators.is_empty() {
            return Err(spec_error("no estimators given"));
        }
        if self.estimators.contains(&EstimatorKind::Exact) {
            return Err(spec_error("`exact` is the reference, not a sweep estimator"));
        }
        for (i, k) in self.estimators.iter().enumerate() {
            if self.estimators[..i].contains(k) {
                return Err(spec_error(format!("estimator `{k}` listed twice")));
            }
        }
        if self.budgets.is_empty() {
            return Err(spec_error("no budgets given"));
        }
        if self.budgets[0] == 0 {
            return Err(spec_error("budgets must be positive"));
        }
        if let Some(w) = self.budgets.windows(2).find(|w| w[0] >= w[1]) {
            return Err(spec_error(format!(
                "budgets must be strictly ascending, got {} then {}",
                w[0], w[1]
            )));
        }
        if self.trials == 0 {
            return Err(spec_error("trials must be at least 1"));
        }
        if self.subspace_iterations == 0 {
            return Err(spec_error("subspace iterations q must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentSpec {
        ExperimentSpec::new(
            MatrixSource::PowerLaw { c: 1.0, d: 50 },
            vec![EstimatorKind::Hutchinson],
            vec![10, 20],
            5,
            0,
        )
    }

    #[test]
    fn accepts_a_plain_spec() {
        base().validate().unwrap();
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut s = base();
        s.budgets = vec![20, 10];
        assert!(s.validate().is_err());
        s.budgets = vec![10, 10];
        assert!(s.validate().is_err());
        s.budgets = vec![];
        assert!(s.validate().is_err());
        s.budgets = vec![0, 3];
        assert!(s.validate().is_err());

        let mut s = base();
        s.trials = 0;
        assert!(s.validate().is_err());

        let mut s = base();
        s.estimators = vec![EstimatorKind::Exact];
        assert!(s.validate().is_err());
        s.estimators = vec![EstimatorKind::Hutchinson, EstimatorKind::Hutchinson];
        assert!(s.validate().is_err());
        s.estimators.clear();
        assert!(s.validate().is_err());

        let mut s = base();
        s.source = MatrixSource::PowerLaw { c: -1.0, d: 5 };
        assert!(s.validate().is_err());
        s.source = MatrixSource::KernelLogdet {
            n: 10,
            gamma: 64.0,
            lambda: 0.0,
            iterations: 40,
            points: None,
        };
        assert!(s.validate().is_err());
    }
}
