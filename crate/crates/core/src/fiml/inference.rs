//! Curvature-based standard errors and Wald intervals.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::datagen::LongData;
use crate::error::{Error, Result};
use crate::fiml::likelihood::PatternStats;
use crate::fiml::theta::{jacobian_diag, to_theta};
use crate::gcm::{GcmParams, Param};
use crate::linalg::{Cholesky, Mat};
use crate::scalar::Scalar;

/// Variances below this, or correlations within this of ±1, are boundary
/// estimates whose standard errors are left undefined.
pub const BOUNDARY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct StandardErrors<T> {
    pub se: [Option<T>; 6],
    pub boundary: [bool; 6],
    pub hessian_failed: bool,
}

pub fn boundary_components<T: Scalar>(p: &GcmParams<T>) -> [bool; 6] {
    let tol = T::lit(BOUNDARY_TOL);
    let mut b = [false; 6];
    b[Param::VarL.index()] = p.var_l < tol;
    b[Param::VarS.index()] = p.var_s < tol;
    b[Param::VarE.index()] = p.var_e < tol;
    // A degenerate latent variance leaves the correlation unidentified.
    b[Param::CorrLS.index()] = p.corr_ls.abs() > T::one() - tol || b[Param::VarL.index()] || b[Param::VarS.index()];
    b
}

/// Central-difference Hessian of the log-likelihood in θ, over the `free`
/// coordinates, built from the analytic gradient.
pub fn numeric_hessian<T: Scalar>(stats: &PatternStats<T>, theta: &[T; 6], free: &[usize]) -> Mat<T> {
    let k = free.len();
    let mut h = Mat::zeros(k, k);
    for (cj, &j) in free.iter().enumerate() {
        let step = T::lit(1e-4) * (T::one() + theta[j].abs());
        let mut up = *theta;
        let mut dn = *theta;
        up[j] = up[j] + step;
        dn[j] = dn[j] - step;
        let (_, gu) = stats.loglik_grad_theta(&up);
        let (_, gd) = stats.loglik_grad_theta(&dn);
        for (ci, &i) in free.iter().enumerate() {
            h[(ci, cj)] = (gu[i] - gd[i]) / (T::lit(2.0) * step);
        }
    }
    for a in 0..k {
        for b in 0..a {
            let s = (h[(a, b)] + h[(b, a)]) / T::lit(2.0);
            h[(a, b)] = s;
            h[(b, a)] = s;
        }
    }
    h
}

/// Standard errors of the natural parameters from the inverse negative
/// Hessian in θ, mapped back with the delta method.
pub fn standard_errors<T: Scalar>(p_hat: &GcmParams<T>, data: &LongData<T>) -> Result<StandardErrors<T>> {
    p_hat.validate()?;
    standard_errors_from_stats(p_hat, &PatternStats::new(data))
}

pub(crate) fn standard_errors_from_stats<T: Scalar>(
    p_hat: &GcmParams<T>,
    stats: &PatternStats<T>,
) -> Result<StandardErrors<T>> {
    let boundary = boundary_components(p_hat);
    let floor = T::lit(BOUNDARY_TOL * 1e-6).ln();
    let theta = to_theta(p_hat).map(|v| if v.is_finite() { v } else { v.max(floor).min(-floor) });
    let free: Vec<usize> = (0..6).filter(|&j| !boundary[j]).collect();
    let mut se = [None; 6];
    let h = numeric_hessian(stats, &theta, &free);
    let neg = Mat::from_fn(free.len(), free.len(), |a, b| -h[(a, b)]);
    let chol = match Cholesky::new(&neg) {
        Ok(c) => c,
        Err(_) => return Ok(StandardErrors { se, boundary, hessian_failed: true }),
    };
    let cov = chol.inverse();
    let jac = jacobian_diag(p_hat);
    for (c, &j) in free.iter().enumerate() {
        let v = cov[(c, c)];
        if v.is_finite() && v >= T::zero() {
            se[j] = Some(jac[j].abs() * v.sqrt());
        }
    }
    Ok(StandardErrors { se, boundary, hessian_failed: false })
}

/// Two-sided standard normal critical value for a confidence level.
pub fn z_critical(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Validation(format!("confidence level {level} outside (0, 1)")));
    }
    let n = Normal::standard();
    Ok(n.inverse_cdf(0.5 + level / 2.0))
}

/// estimate ± z·se.
pub fn wald_ci<T: Scalar>(estimate: T, se: T, level: f64) -> Result<(T, T)> {
    if !(se >= T::zero()) {
        return Err(Error::Validation("standard error must be non-negative".into()));
    }
    let half = T::lit(z_critical(level)?) * se;
    Ok((estimate - half, estimate + half))
}
