use rayon::prelude::*;
use trace_core::{EstimatorConfig, EstimatorKind};

use crate::error::Result;
use crate::source::{prepare_source, PreparedSource};
use crate::spec::ExperimentSpec;

/// Relative-error summary of one (estimator, budget) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialStats {
    pub estimator: EstimatorKind,
    pub m: usize,
    pub median_rel_err: f64,
    pub q25_rel_err: f64,
    pub q75_rel_err: f64,
    pub mean_matvecs: f64,
}

impl TrialStats {
    /// `rel_errs` must be non-empty.
    pub fn from_trials(estimator: EstimatorKind, m: usize, rel_errs: &[f64], matvecs: &[u64]) -> Self {
        let mut sorted = rel_errs.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            estimator,
            m,
            median_rel_err: quantile(&sorted, 0.5),
            q25_rel_err: quantile(&sorted, 0.25),
            q75_rel_err: quantile(&sorted, 0.75),
            mean_matvecs: matvecs.iter().sum::<u64>() as f64 / matvecs.len() as f64,
        }
    }
}

/// A cell that could not run, e.g. a budget below the estimator's minimum.
#[derive(Clone, Debug, PartialEq)]
pub struct CellFailure {
    pub estimator: EstimatorKind,
    pub m: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepReport {
    pub stats: Vec<TrialStats>,
    pub failures: Vec<CellFailure>,
}

impl SweepReport {
    /// Cells of one estimator in budget order.
    pub fn for_estimator(&self, kind: EstimatorKind) -> Vec<TrialStats> {
        self.stats.iter().filter(|s| s.estimator == kind).cloned().collect()
    }

    pub fn cell(&self, kind: EstimatorKind, m: usize) -> Option<&TrialStats> {
        self.stats.iter().find(|s| s.estimator == kind && s.m == m)
    }
}

/// Linear interpolation between order statistics of an ascending slice
/// (the R-7 rule).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `parts` into `base`. Trial seeds are
/// `derive_seed(base, [estimator, m, trial])`, so results do not depend on
/// the order trials run in.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

fn estimator_tag(kind: EstimatorKind) -> u64 {
    EstimatorKind::ALL.iter().position(|&k| k == kind).unwrap() as u64
}

/// Prepares the source and runs every cell.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepReport> {
    spec.validate()?;
    let prepared = prepare_source(&spec.source, spec.seed)?;
    run_sweep_on(&prepared, spec)
}

/// Runs every cell of `spec` against an already prepared source. Trials run
/// on the rayon pool, each on its own fork of the operator.
pub fn run_sweep_on(prepared: &PreparedSource, spec: &ExperimentSpec) -> Result<SweepReport> {
    spec.validate()?;
    let mut report = SweepReport::default();
    for &kind in &spec.estimators {
        for &m in &spec.budgets {
            match run_cell(prepared, spec, kind, m) {
                Ok(stats) => report.stats.push(stats),
                Err(message) => report.failures.push(CellFailure {
                    estimator: kind,
                    m,
                    message,
                }),
            }
        }
    }
    Ok(report)
}

fn run_cell(
    prepared: &PreparedSource,
    spec: &ExperimentSpec,
    kind: EstimatorKind,
    m: usize,
) -> std::result::Result<TrialStats, String> {
    let truth = prepared.truth;
    let outcomes: Vec<(f64, u64)> = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(spec.seed, &[estimator_tag(kind), m as u64, t as u64]);
            let mut config = EstimatorConfig::new(m, seed);
            config.subspace_iterations = spec.subspace_iterations;
            let est = config
                .run(kind, &prepared.operator.fork())
                .map_err(|e| e.to_string())?;
            Ok(((est.value - truth).abs() / truth.abs(), est.matvecs_used))
        })
        .collect::<std::result::Result<_, String>>()?;
    let (errs, matvecs): (Vec<f64>, Vec<u64>) = outcomes.into_iter().unzip();
    Ok(TrialStats::from_trials(kind, m, &errs, &matvecs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::MatrixSource;
    use proptest::prelude::*;
    use trace_core::LinearOperator;

    proptest! {
        #[test]
        fn quartiles_are_ordered(errs in prop::collection::vec(0.0f64..10.0, 1..60)) {
            let matvecs = vec![3u64; errs.len()];
            let s = TrialStats::from_trials(EstimatorKind::Hutchinson, 3, &errs, &matvecs);
            prop_assert!(0.0 <= s.q25_rel_err);
            prop_assert!(s.q25_rel_err <= s.median_rel_err);
            prop_assert!(s.median_rel_err <= s.q75_rel_err);
            let max = errs.iter().copied().fold(0.0, f64::max);
            prop_assert!(s.q75_rel_err <= max);
            prop_assert_eq!(s.mean_matvecs, 3.0);
        }

        #[test]
        fn quantile_is_monotone_in_p(mut xs in prop::collection::vec(-5.0f64..5.0, 1..40), p in 0.0f64..1.0, dp in 0.0f64..1.0) {
            xs.sort_by(f64::total_cmp);
            let hi = (p + dp).min(1.0);
            prop_assert!(quantile(&xs, p) <= quantile(&xs, hi));
        }
    }

    #[test]
    fn quantiles_interpolate_linearly() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.5), 2.5);
        assert_eq!(quantile(&xs, 0.25), 1.75);
        assert_eq!(quantile(&xs, 0.75), 3.25);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert_eq!(quantile(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn single_trial_collapses_quartiles() {
        let s = TrialStats::from_trials(EstimatorKind::Hutchinson, 5, &[0.3], &[5]);
        assert_eq!((s.q25_rel_err, s.median_rel_err, s.q75_rel_err), (0.3, 0.3, 0.3));
        assert_eq!(s.mean_matvecs, 5.0);
    }

    #[test]
    fn seeds_differ_per_part() {
        let a = derive_seed(1, &[0, 10, 0]);
        assert_ne!(a, derive_seed(1, &[0, 10, 1]));
        assert_ne!(a, derive_seed(1, &[1, 10, 0]));
        assert_ne!(a, derive_seed(1, &[0, 11, 0]));
        assert_ne!(a, derive_seed(2, &[0, 10, 0]));
        assert_ne!(derive_seed(0, &[1, 0]), derive_seed(0, &[0, 1]));
        assert_eq!(a, derive_seed(1, &[0, 10, 0]));
    }

    #[test]
    fn diagonal_source_gives_zero_error() {
        let op = LinearOperator::diagonal((1..=30).map(f64::from).collect()).unwrap();
        let prepared = PreparedSource::new(op, 465.0).unwrap();
        let spec = ExperimentSpec::new(
            MatrixSource::PowerLaw { c: 0.0, d: 30 },
            vec![EstimatorKind::Hutchinson],
            vec![1, 4, 16],
            20,
            9,
        );
        let report = run_sweep_on(&prepared, &spec).unwrap();
        assert_eq!(report.stats.len(), 3);
        for s in &report.stats {
            assert_eq!(s.q75_rel_err, 0.0);
            assert_eq!(s.mean_matvecs, s.m as f64);
        }
    }

    #[test]
    fn bad_budget_fails_only_its_cell() {
        let spec = ExperimentSpec::new(
            MatrixSource::PowerLaw { c: 1.0, d: 40 },
            vec![EstimatorKind::HutchPlusPlusGauss, EstimatorKind::Hutchinson],
            vec![12, 14],
            3,
            1,
        );
        let report = run_sweep(&spec).unwrap();
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].m, 12);
        assert!(report.failures[0].message.contains("10 and 14"));
        assert_eq!(report.stats.len(), 3);
        assert!(report.cell(EstimatorKind::HutchPlusPlusGauss, 14).is_some());
    }
}
