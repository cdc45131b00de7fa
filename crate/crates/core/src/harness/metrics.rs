//! Replicate-level reductions: bias, coverage, imputation error.

use crate::datagen::LongData;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasKind {
    /// (mean − truth) / truth.
    Relative,
    /// mean − truth, used when the true value is zero.
    Raw,
}

impl BiasKind {
    pub fn name(self) -> &'static str {
        match self {
            BiasKind::Relative => "relative",
            BiasKind::Raw => "raw",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bias {
    pub value: f64,
    pub kind: BiasKind,
    /// Monte Carlo standard error of `value`, in the same units.
    pub mc_se: f64,
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Relative bias of the replicate estimates, or raw bias when `truth` is 0.
pub fn relative_bias(estimates: &[f64], truth: f64) -> Result<Bias> {
    if estimates.is_empty() {
        return Err(Error::UndefinedSummary("no estimates to summarize".into()));
    }
    let m = mean(estimates);
    let se = sample_sd(estimates) / (estimates.len() as f64).sqrt();
    Ok(if truth == 0.0 {
        Bias { value: m, kind: BiasKind::Raw, mc_se: se }
    } else {
        Bias { value: (m - truth) / truth, kind: BiasKind::Relative, mc_se: se / truth.abs() }
    })
}

/// Share of intervals with low ≤ truth ≤ high; `None` for an empty list.
pub fn coverage(intervals: &[(f64, f64)], truth: f64) -> Option<f64> {
    if intervals.is_empty() {
        return None;
    }
    let hit = intervals.iter().filter(|&&(lo, hi)| lo <= truth && truth <= hi).count();
    Some(hit as f64 / intervals.len() as f64)
}

/// Root mean squared error over the cells missing in `amputed`, comparing
/// `imputed` with the pre-amputation `truth`.
pub fn imputation_rmse(truth: &LongData<f64>, amputed: &LongData<f64>, imputed: &LongData<f64>) -> f64 {
    let mut se = 0.0;
    let mut n = 0usize;
    for i in 0..amputed.n_rows() {
        for t in 0..amputed.n_occasions() {
            if !amputed.is_observed(i, t) {
                se += (imputed.raw(i, t) - truth.raw(i, t)).powi(2);
                n += 1;
            }
        }
    }
    (se / n.max(1) as f64).sqrt()
}

/// Fills every missing cell with its column's observed mean.
pub fn mean_impute(data: &LongData<f64>) -> LongData<f64> {
    let mut out = data.clone();
    for t in 0..data.n_occasions() {
        let col = data.observed_column(t);
        let m = if col.is_empty() { 0.0 } else { mean(&col) };
        for i in 0..data.n_rows() {
            if !data.is_observed(i, t) {
                out.fill(i, t, m);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bias_hand_values() {
        let b = relative_bias(&[2.0, 2.2], 2.0).unwrap();
        assert_relative_eq!(b.value, 0.05, epsilon = 1e-12);
        assert_eq!(b.kind, BiasKind::Relative);
        assert_eq!(relative_bias(&[5.5, 6.5], 6.0).unwrap().value, 0.0);
        let z = relative_bias(&[0.01, 0.05], 0.0).unwrap();
        assert_relative_eq!(z.value, 0.03, epsilon = 1e-12);
        assert_eq!(z.kind, BiasKind::Raw);
        assert!(relative_bias(&[], 1.0).is_err());
    }

    #[test]
    fn coverage_hand_values() {
        assert_eq!(coverage(&[(1.0, 3.0), (1.9, 2.1)], 2.0), Some(1.0));
        assert_eq!(coverage(&[(1.8, 2.2), (2.1, 2.5)], 2.0), Some(0.5));
        assert_eq!(coverage(&[], 2.0), None);
        assert_eq!(coverage(&[(2.0, 2.0)], 2.0), Some(1.0));
    }

    #[test]
    fn mc_se_scales_with_truth() {
        let b = relative_bias(&[1.0, 3.0, 2.0, 2.0], 4.0).unwrap();
        let raw_se = sample_sd(&[1.0, 3.0, 2.0, 2.0]) / 2.0;
        assert_relative_eq!(b.mc_se, raw_se / 4.0, epsilon = 1e-12);
    }
}
