//! Full-information maximum likelihood for the growth model.
//!
//! The same estimator serves complete data (plain ML) and the completed
//! panels produced by the single-imputation methods.

mod inference;
mod likelihood;
mod optim;
mod theta;

pub use inference::{
    boundary_components, numeric_hessian, standard_errors, wald_ci, z_critical, StandardErrors, BOUNDARY_TOL,
};
pub use likelihood::{observed_loglik, observed_loglik_detail, Loglik, PatternStats};
pub use optim::{bfgs_minimize, Minimum, OptimizerConfig};
pub use theta::{from_theta, jacobian_diag, to_theta, Theta};

use crate::datagen::LongData;
use crate::error::{Error, Result};
use crate::gcm::GcmParams;
use crate::scalar::Scalar;

/// Minimum number of non-empty rows accepted by [`fit_fiml`].
pub const MIN_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub optimizer: OptimizerConfig,
    /// Confidence level of the Wald intervals.
    pub level: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { optimizer: OptimizerConfig::default(), level: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub estimates: GcmParams<T>,
    /// `None` where the standard error is undefined (boundary estimate or a
    /// Hessian that is not negative definite).
    pub se: [Option<T>; 6],
    pub ci: [Option<(T, T)>; 6],
    pub loglik: T,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: T,
    pub empty_rows: usize,
    /// Some outcome column has fewer than two observed values or no spread.
    pub degenerate: bool,
    pub hessian_failed: bool,
    pub boundary: [bool; 6],
}

impl<T: Scalar> FitResult<T> {
    pub fn all_se_defined(&self) -> bool {
        self.se.iter().all(Option::is_some)
    }
}

fn column_summary<T: Scalar>(data: &LongData<T>, t: usize) -> Option<(T, T)> {
    let vals = data.observed_column(t);
    if vals.len() < 2 {
        return None;
    }
    let n = T::from_usize_lossy(vals.len());
    let mean = vals.iter().copied().sum::<T>() / n;
    let var = vals.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / (n - T::one());
    Some((mean, var))
}

/// Starting values: fixed effects by OLS of occasion means on time codes,
/// latent and residual variances by moments of the occasion variances,
/// correlation zero.
pub fn initial_values<T: Scalar>(data: &LongData<T>) -> (GcmParams<T>, bool) {
    let occ = data.n_occasions();
    let summaries: Vec<(T, Option<(T, T)>)> =
        (0..occ).map(|t| (T::from_usize_lossy(t), column_summary(data, t))).collect();
    let usable: Vec<(T, T, T)> = summaries.iter().filter_map(|&(t, s)| s.map(|(m, v)| (t, m, v))).collect();
    let degenerate = usable.len() < occ || usable.iter().any(|&(_, _, v)| !(v > T::zero()));

    let ols = |pts: &[(T, T)]| -> (T, T) {
        let n = T::from_usize_lossy(pts.len());
        if pts.len() < 2 {
            return (pts.first().map_or(T::zero(), |p| p.1), T::zero());
        }
        let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
        let my = pts.iter().map(|p| p.1).sum::<T>() / n;
        let sxx = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<T>();
        let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<T>();
        let b = if sxx > T::zero() { sxy / sxx } else { T::zero() };
        (my - b * mx, b)
    };
    let (beta_l, beta_s) = ols(&usable.iter().map(|&(t, m, _)| (t, m)).collect::<Vec<_>>());
    let (a, b) = ols(&usable.iter().map(|&(t, _, v)| (t * t, v)).collect::<Vec<_>>());
    let mean_var = if usable.is_empty() {
        T::one()
    } else {
        usable.iter().map(|u| u.2).sum::<T>() / T::from_usize_lossy(usable.len())
    };
    let floor = T::lit(0.05) * mean_var.max(T::zero()) + T::lit(1e-4);
    let half = T::lit(0.5);
    let p = GcmParams {
        beta_l,
        beta_s,
        var_l: (half * a).max(floor),
        var_s: b.max(floor),
        corr_ls: T::zero(),
        var_e: (half * a).max(floor),
    };
    (p, degenerate)
}

/// Maximizes the observed-data likelihood over the interior of the
/// parameter space and attaches standard errors and Wald intervals.
pub fn fit_fiml<T: Scalar>(data: &LongData<T>, init: Option<GcmParams<T>>, cfg: &FitConfig) -> Result<FitResult<T>> {
    let stats = PatternStats::new(data);
    if stats.rows() < MIN_ROWS {
        return Err(Error::Validation(format!(
            "FIML needs at least {MIN_ROWS} rows with observed data, got {}",
            stats.rows()
        )));
    }
    let (default_init, degenerate) = initial_values(data);
    let start = match init {
        Some(p) => {
            p.validate()?;
            let tiny = T::lit(1e-4);
            let lim = T::lit(0.95);
            GcmParams {
                var_l: p.var_l.max(tiny),
                var_s: p.var_s.max(tiny),
                corr_ls: p.corr_ls.max(-lim).min(lim),
                ..p
            }
        }
        None => default_init,
    };

    let scale = T::one() / T::from_usize_lossy(stats.rows());
    let objective = |th: &Theta<T>| {
        let (ll, g) = stats.loglik_grad_theta(th);
        (-ll * scale, g.map(|v| -v * scale))
    };
    let min = bfgs_minimize(objective, to_theta(&start), &cfg.optimizer);
    let estimates = from_theta(&min.x);
    let gradient_norm = min.grad.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let ll = observed_loglik_detail(&estimates, data)?;

    let ses = inference::standard_errors_from_stats(&estimates, &stats)?;
    let est = estimates.to_array();
    let mut ci = [None; 6];
    for j in 0..6 {
        if let Some(s) = ses.se[j] {
            ci[j] = Some(wald_ci(est[j], s, cfg.level)?);
        }
    }
    Ok(FitResult {
        estimates,
        se: ses.se,
        ci,
        loglik: ll.value,
        converged: min.converged && ll.value.is_finite(),
        iterations: min.iterations,
        gradient_norm,
        empty_rows: ll.empty_rows,
        degenerate,
        hessian_failed: ses.hessian_failed,
        boundary: ses.boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amputation::{ampute, Mechanism, MissingSpec};
    use crate::datagen::{sample_dataset, sample_dataset_with_aux, Seed};
    use crate::linalg::Mat;

    #[test]
    fn near_noiseless_regression_recovers_beta() {
        let p = GcmParams::new(6.0, 2.0, 0.0, 0.0, 0.0, 1e-6).unwrap();
        let d = sample_dataset::<f64>(&p, 200, 4, Seed::new(1, 1)).unwrap();
        let fit = fit_fiml(&d, None, &FitConfig::default()).unwrap();
        assert!((fit.estimates.beta_l - 6.0).abs() < 1e-3);
        assert!((fit.estimates.beta_s - 2.0).abs() < 1e-3);
    }

    #[test]
    fn loglik_not_below_start() {
        let d = sample_dataset::<f64>(&GcmParams::population(), 150, 4, Seed::new(4, 2)).unwrap();
        let (init, _) = initial_values(&d);
        let start = observed_loglik(&init, &d).unwrap();
        let fit = fit_fiml(&d, None, &FitConfig::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.loglik >= start);
        for j in 0..6 {
            let (lo, hi) = fit.ci[j].unwrap();
            let e = fit.estimates.to_array()[j];
            assert!(lo <= e && e <= hi);
        }
    }

    #[test]
    fn too_few_rows_rejected() {
        let d = sample_dataset::<f64>(&GcmParams::population(), 9, 4, Seed::new(4, 2)).unwrap();
        assert!(matches!(fit_fiml(&d, None, &FitConfig::default()), Err(Error::Validation(_))));
    }

    #[test]
    fn fully_missing_rows_change_nothing() {
        let d = sample_dataset::<f64>(&GcmParams::population(), 120, 4, Seed::new(6, 1)).unwrap();
        let mut rows: Vec<Vec<Option<f64>>> = (0..120).map(|i| d.row(i).iter().map(|&v| Some(v)).collect()).collect();
        rows.insert(17, vec![None; 4]);
        rows.push(vec![None; 4]);
        let padded = LongData::from_options(&rows).unwrap();
        let a = fit_fiml(&d, None, &FitConfig::default()).unwrap();
        let b = fit_fiml(&padded, None, &FitConfig::default()).unwrap();
        assert_eq!(b.empty_rows, 2);
        assert_eq!(a.estimates, b.estimates);
        assert_eq!(a.loglik, b.loglik);
    }

    #[test]
    fn row_permutation_leaves_se_unchanged() {
        let base = sample_dataset_with_aux::<f64>(&GcmParams::population(), 300, 4, 1.0, Seed::new(2, 9)).unwrap();
        let d = ampute(&base, &MissingSpec::new(Mechanism::Mar, 0.15, 4)).unwrap();
        let mut order: Vec<usize> = (0..300).collect();
        order.reverse();
        order.rotate_left(77);
        let shuffled = d.select_rows(&order);
        let cfg = FitConfig::default();
        let a = fit_fiml(&d, None, &cfg).unwrap();
        let b = fit_fiml(&shuffled, None, &cfg).unwrap();
        for j in 0..6 {
            let (x, y) = (a.se[j].unwrap(), b.se[j].unwrap());
            assert!((x - y).abs() < 1e-6, "component {j}: {x} vs {y}");
        }
    }

    #[test]
    fn stacked_copies_halve_standard_errors() {
        let d = sample_dataset::<f64>(&GcmParams::population(), 1000, 4, Seed::new(12, 0)).unwrap();
        let order: Vec<usize> = (0..4000).map(|i| i % 1000).collect();
        let big = d.select_rows(&order);
        let cfg = FitConfig::default();
        let a = fit_fiml(&d, None, &cfg).unwrap();
        let b = fit_fiml(&big, None, &cfg).unwrap();
        for j in 0..6 {
            let ratio = a.se[j].unwrap() / b.se[j].unwrap();
            assert!((ratio - 2.0).abs() < 0.1, "component {j}: ratio {ratio}");
        }
    }

    #[test]
    fn constant_column_is_flagged_not_fatal() {
        let y = Mat::from_fn(40, 4, |i, t| if t == 0 { 3.0 } else { (i as f64 * 0.37).sin() + t as f64 });
        let d = LongData::complete(y);
        let fit = fit_fiml(&d, None, &FitConfig::default()).unwrap();
        assert!(fit.degenerate);
    }

    #[test]
    fn single_precision_fit() {
        let d = sample_dataset::<f32>(&GcmParams::population(), 2000, 4, Seed::new(21, 0)).unwrap();
        let cfg = FitConfig { optimizer: OptimizerConfig { grad_tol: 1e-3, ..Default::default() }, level: 0.95 };
        let fit = fit_fiml(&d, None, &cfg).unwrap();
        assert!((fit.estimates.beta_s - 2.0).abs() < 0.1);
        assert!((fit.estimates.var_s - 1.0).abs() < 0.2);
    }
}
