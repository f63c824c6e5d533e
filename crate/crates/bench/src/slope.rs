use crate::error::{spec_error, Result};
use crate::sweep::TrialStats;

/// Least-squares fit of `log(median_rel_err)` against `log(m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Budgets that entered the fit.
    pub used: Vec<usize>,
    /// Budgets dropped because their median error was zero.
    pub excluded: Vec<usize>,
}

/// Fits the log-log slope of one estimator's cells. Cells with a zero
/// median are excluded and listed; at least three must remain.
pub fn fit_loglog_slope(stats: &[TrialStats]) -> Result<SlopeFit> {
    if let Some(first) = stats.first() {
        if stats.iter().any(|s| s.estimator != first.estimator) {
            return Err(spec_error("slope fit mixes estimators"));
        }
    }
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    let mut pts = Vec::new();
    for s in stats {
        if s.median_rel_err > 0.0 {
            used.push(s.m);
            pts.push(((s.m as f64).ln(), s.median_rel_err.ln()));
        } else {
            excluded.push(s.m);
        }
    }
    if pts.len() < 3 {
        return Err(spec_error(format!(
            "slope fit needs 3 budgets with positive median error, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(spec_error("slope fit needs distinct budgets"));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        used,
        excluded,
    })
}
