//! ROC curves over L1 distances, threshold calibration and summary statistics.
//!
//! A session is accepted when its distance is at most `delta`, so both rates
//! are empirical CDFs of the two distance populations.

use serde::Serialize;

use crate::error::{Error, Result};

/// Threshold used when every observed distance is too permissive.
pub const MIN_DELTA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub delta: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    /// Strictly increasing in FPR, nondecreasing in TPR, from `(0, t0)` to
    /// `(1, 1)`.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    s
}

/// Fraction of `sorted_values` at or below `x`.
fn cdf(sorted_values: &[f64], x: f64) -> f64 {
    sorted_values.partition_point(|v| *v <= x) as f64 / sorted_values.len() as f64
}

fn check_populations(genuine: &[f64], attacker: &[f64]) -> Result<()> {
    if genuine.is_empty() || attacker.is_empty() {
        return Err(Error::Estimator("ROC needs both populations".into()));
    }
    if genuine.iter().chain(attacker).any(|d| d.is_nan() || *d < 0.0) {
        return Err(Error::Estimator("distances must be nonnegative numbers".into()));
    }
    Ok(())
}

/// Sweeps `delta` from zero over every observed distance. Aborted sessions
/// carry an infinite distance and are only accepted by the closing point.
pub fn compute_roc(genuine: &[f64], attacker: &[f64]) -> Result<RocCurve> {
    check_populations(genuine, attacker)?;
    let g = sorted(genuine);
    let a = sorted(attacker);
    let mut thresholds: Vec<f64> = g.iter().chain(&a).copied().filter(|d| d.is_finite()).collect();
    thresholds.push(0.0);
    thresholds.sort_by(|x, y| x.total_cmp(y));
    thresholds.dedup();

    let mut staircase: Vec<RocPoint> = thresholds
        .into_iter()
        .map(|delta| RocPoint {
            delta,
            fpr: cdf(&a, delta),
            tpr: cdf(&g, delta),
        })
        .collect();
    staircase.push(RocPoint {
        delta: f64::INFINITY,
        fpr: 1.0,
        tpr: 1.0,
    });
    let auc = staircase
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();

    // equal FPR: keep only the most permissive threshold
    let mut points: Vec<RocPoint> = Vec::with_capacity(staircase.len());
    for p in staircase {
        match points.last_mut() {
            Some(last) if last.fpr == p.fpr => *last = p,
            _ => points.push(p),
        }
    }
    Ok(RocCurve { points, auc })
}

impl RocCurve {
    /// Best detection rate among operating points with FPR at most `limit`.
    pub fn tpr_at_fpr(&self, limit: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.fpr <= limit)
            .map(|p| p.tpr)
            .fold(0.0, f64::max)
    }
}

/// Largest threshold among `MIN_DELTA` and the pooled finite distances whose
/// attacker acceptance rate stays within `target_fpr`.
pub fn calibrate_delta(genuine: &[f64], attacker: &[f64], target_fpr: f64) -> Result<f64> {
    check_populations(genuine, attacker)?;
    if !(0.0..=1.0).contains(&target_fpr) {
        return Err(Error::Config(format!("target FPR {target_fpr} outside [0, 1]")));
    }
    let a = sorted(attacker);
    Ok(genuine
        .iter()
        .chain(attacker)
        .copied()
        .filter(|d| d.is_finite() && *d >= MIN_DELTA && cdf(&a, *d) <= target_fpr)
        .fold(MIN_DELTA, f64::max))
}

/// Fraction of `distances` accepted at `delta`.
pub fn acceptance_rate(distances: &[f64], delta: f64) -> f64 {
    if distances.is_empty() {
        return 0.0;
    }
    distances.iter().filter(|d| **d <= delta).count() as f64 / distances.len() as f64
}

/// Standard error of an AUC estimate for the given population sizes.
pub fn auc_standard_error(auc: f64, n_genuine: usize, n_attacker: usize) -> f64 {
    let q1 = auc / (2.0 - auc);
    let q2 = 2.0 * auc * auc / (1.0 + auc);
    let (np, nn) = (n_genuine as f64, n_attacker as f64);
    let var = (auc * (1.0 - auc) + (np - 1.0) * (q1 - auc * auc) + (nn - 1.0) * (q2 - auc * auc)) / (np * nn);
    var.max(0.0).sqrt()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Linear-interpolated quantile, `q` in `[0, 1]`.
pub fn quantile(v: &[f64], q: f64) -> f64 {
    let s = sorted(v);
    if s.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_populations() {
        let roc = compute_roc(&[0.1, 0.2], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(roc.auc, 1.0);
        assert_eq!(roc.points[0], RocPoint { delta: 0.2, fpr: 0.0, tpr: 1.0 });
        assert_eq!(roc.tpr_at_fpr(0.0), 1.0);
        let d = calibrate_delta(&[0.1, 0.2], &[1.0, 2.0, 3.0], 0.0).unwrap();
        assert_eq!(d, 0.2);
    }

    #[test]
    fn swapped_populations() {
        let roc = compute_roc(&[5.0, 6.0], &[1.0, 2.0]).unwrap();
        assert_eq!(roc.auc, 0.0);
        assert_eq!(calibrate_delta(&[5.0], &[1.0], 0.0).unwrap(), MIN_DELTA);
    }

    #[test]
    fn aborted_sessions_close_the_curve() {
        let roc = compute_roc(&[0.1, f64::INFINITY], &[1.0]).unwrap();
        let last = roc.points.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert_eq!(roc.tpr_at_fpr(0.0), 0.5);
    }

    #[test]
    fn quantiles() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), 2.0);
        assert_eq!(quantile(&[0.0, 1.0], 0.25), 0.25);
    }
}
