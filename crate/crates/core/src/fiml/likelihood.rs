//! Observed-data log-likelihood of the growth model.
//!
//! [`observed_loglik`] is the row-by-row definition. [`PatternStats`] groups
//! rows by missingness pattern and keeps centered sufficient statistics so
//! the optimizer can evaluate the same quantity, and its analytic gradient,
//! at a cost independent of N.

use std::collections::BTreeMap;

use crate::datagen::LongData;
use crate::error::Result;
use crate::fiml::theta::{from_theta, Theta};
use crate::gcm::{implied_moments, loading_matrix, submoments, GcmParams, MvnDensity};
use crate::linalg::{Cholesky, Mat};
use crate::scalar::Scalar;

/// Log-likelihood together with the number of rows that carried no
/// observed value (and therefore contributed nothing).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loglik<T> {
    pub value: T,
    pub empty_rows: usize,
}

/// Σᵢ log φ(yᵢ,obs; μ_obs, Σ_obs). Returns −∞ when a needed covariance
/// block is not positive definite.
pub fn observed_loglik<T: Scalar>(p: &GcmParams<T>, data: &LongData<T>) -> Result<T> {
    observed_loglik_detail(p, data).map(|l| l.value)
}

pub fn observed_loglik_detail<T: Scalar>(p: &GcmParams<T>, data: &LongData<T>) -> Result<Loglik<T>> {
    let full = implied_moments(p, data.n_occasions())?;
    let mut cache: BTreeMap<Vec<usize>, Option<MvnDensity<T>>> = BTreeMap::new();
    let mut total = T::zero();
    let mut empty_rows = 0;
    for i in 0..data.n_rows() {
        let obs = data.observed_indices(i);
        if obs.is_empty() {
            empty_rows += 1;
            continue;
        }
        let x: Vec<T> = obs.iter().map(|&t| data.raw(i, t)).collect();
        let dens = cache
            .entry(obs)
            .or_insert_with_key(|obs| submoments(&full, obs).ok().and_then(|m| MvnDensity::new(&m).ok()));
        match dens {
            Some(d) => total = total + d.log_pdf(&x),
            None => return Ok(Loglik { value: T::neg_infinity(), empty_rows }),
        }
    }
    Ok(Loglik { value: total, empty_rows })
}

/// Rows sharing one observation pattern.
#[derive(Debug, Clone)]
struct PatternGroup<T> {
    observed: Vec<usize>,
    count: T,
    mean: Vec<T>,
    /// Scatter about `mean`: Σ (y − ȳ)(y − ȳ)ᵀ.
    scatter: Mat<T>,
}

/// Pattern-grouped sufficient statistics of a panel.
#[derive(Debug, Clone)]
pub struct PatternStats<T> {
    occasions: usize,
    groups: Vec<PatternGroup<T>>,
    rows: usize,
    empty_rows: usize,
}

impl<T: Scalar> PatternStats<T> {
    pub fn new(data: &LongData<T>) -> Self {
        let mut by_pattern: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        let mut empty_rows = 0;
        for i in 0..data.n_rows() {
            let obs = data.observed_indices(i);
            if obs.is_empty() {
                empty_rows += 1;
            } else {
                by_pattern.entry(obs).or_default().push(i);
            }
        }
        let groups = by_pattern
            .into_iter()
            .map(|(observed, rows)| {
                let m = observed.len();
                let count = T::from_usize_lossy(rows.len());
                let mut mean = vec![T::zero(); m];
                for &i in &rows {
                    for (a, &t) in observed.iter().enumerate() {
                        mean[a] = mean[a] + data.raw(i, t);
                    }
                }
                mean.iter_mut().for_each(|v| *v = *v / count);
                let mut scatter = Mat::zeros(m, m);
                for &i in &rows {
                    for a in 0..m {
                        let da = data.raw(i, observed[a]) - mean[a];
                        for b in 0..=a {
                            let db = data.raw(i, observed[b]) - mean[b];
                            scatter[(a, b)] = scatter[(a, b)] + da * db;
                        }
                    }
                }
                for a in 0..m {
                    for b in 0..a {
                        scatter[(b, a)] = scatter[(a, b)];
                    }
                }
                PatternGroup { observed, count, mean, scatter }
            })
            .collect();
        PatternStats { occasions: data.n_occasions(), groups, rows: data.n_rows() - empty_rows, empty_rows }
    }

    /// Rows with at least one observed value.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn empty_rows(&self) -> usize {
        self.empty_rows
    }

    pub fn patterns(&self) -> usize {
        self.groups.len()
    }

    /// Log-likelihood at `p` from the grouped statistics.
    pub fn loglik(&self, p: &GcmParams<T>) -> T {
        self.eval(p, false).0
    }

    /// Log-likelihood and its gradient with respect to θ.
    pub fn loglik_grad_theta(&self, theta: &Theta<T>) -> (T, Theta<T>) {
        let p = from_theta(theta);
        let (ll, g) = self.eval(&p, true);
        (ll, g.unwrap_or([T::nan(); 6]))
    }

    fn eval(&self, p: &GcmParams<T>, with_grad: bool) -> (T, Option<Theta<T>>) {
        let half = T::lit(0.5);
        let ln2pi = T::TAU().ln();
        let full = match implied_moments(p, self.occasions) {
            Ok(m) => m,
            Err(_) => return (T::neg_infinity(), None),
        };
        let lambda = loading_matrix::<T>(self.occasions).expect("occasions validated at construction");
        let mut ll = T::zero();
        let mut d_beta = [T::zero(); 2];
        let mut g_psi = [[T::zero(); 2]; 2];
        let mut tr_g = T::zero();
        for grp in &self.groups {
            let m = grp.observed.len();
            let sub = submoments(&full, &grp.observed).expect("pattern indices valid");
            let chol = match Cholesky::new(&sub.sigma) {
                Ok(c) => c,
                Err(_) => return (T::neg_infinity(), None),
            };
            let n = grp.count;
            let d: Vec<T> = grp.mean.iter().zip(&sub.mu).map(|(&a, &b)| a - b).collect();
            let inv = chol.inverse();
            let mut tr_inv_scatter = T::zero();
            for a in 0..m {
                for b in 0..m {
                    tr_inv_scatter = tr_inv_scatter + inv[(a, b)] * grp.scatter[(b, a)];
                }
            }
            let quad = chol.quad_form(&d);
            ll = ll - half * (n * T::from_usize_lossy(m) * ln2pi + n * chol.log_det() + tr_inv_scatter + n * quad);
            if !with_grad {
                continue;
            }
            // ∂ℓ/∂μ_obs = n Σ⁻¹ d
            let sd = chol.solve(&d);
            for (a, &t) in grp.observed.iter().enumerate() {
                let dm = n * sd[a];
                d_beta[0] = d_beta[0] + dm * lambda[(t, 0)];
                d_beta[1] = d_beta[1] + dm * lambda[(t, 1)];
            }
            // G = ½ (Σ⁻¹ (S + n d dᵀ) Σ⁻¹ − n Σ⁻¹)
            let mut r = grp.scatter.clone();
            for a in 0..m {
                for b in 0..m {
                    r[(a, b)] = r[(a, b)] + n * d[a] * d[b];
                }
            }
            let sris = inv.matmul(&r).matmul(&inv);
            let g = Mat::from_fn(m, m, |a, b| half * (sris[(a, b)] - n * inv[(a, b)]));
            for a in 0..m {
                tr_g = tr_g + g[(a, a)];
            }
            for (u, row) in g_psi.iter_mut().enumerate() {
                for (v, cell) in row.iter_mut().enumerate() {
                    let mut acc = T::zero();
                    for a in 0..m {
                        let la = lambda[(grp.observed[a], u)];
                        for b in 0..m {
                            acc = acc + la * g[(a, b)] * lambda[(grp.observed[b], v)];
                        }
                    }
                    *cell = *cell + acc;
                }
            }
        }
        if !with_grad {
            return (ll, None);
        }
        let cov = p.cov_ls();
        let g01 = g_psi[0][1];
        let grad = [
            d_beta[0],
            d_beta[1],
            p.var_l * g_psi[0][0] + cov * g01,
            p.var_s * g_psi[1][1] + cov * g01,
            T::lit(2.0) * g01 * (T::one() - p.corr_ls * p.corr_ls) * (p.var_l * p.var_s).sqrt(),
            p.var_e * tr_g,
        ];
        (ll, Some(grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amputation::{ampute, Mechanism, MissingSpec};
    use crate::datagen::{sample_dataset, sample_dataset_with_aux, Seed};
    use crate::fiml::theta::to_theta;
    use crate::gcm::mvn_logpdf;
    use approx::assert_relative_eq;

    #[test]
    fn complete_data_matches_full_density_sum_exactly() {
        let p = GcmParams::population();
        let d = sample_dataset::<f64>(&p, 300, 4, Seed::new(3, 1)).unwrap();
        let m = implied_moments(&p, 4).unwrap();
        let direct: f64 = (0..d.n_rows()).map(|i| mvn_logpdf(d.row(i), &m).unwrap()).sum();
        assert_eq!(observed_loglik(&p, &d).unwrap(), direct);
    }

    #[test]
    fn single_scalar_observation() {
        let d = LongData::from_options(&[vec![Some(6.0), None, None, None]]).unwrap();
        let ll = observed_loglik(&GcmParams::population(), &d).unwrap();
        assert_relative_eq!(ll, -0.5 * (2.0 * std::f64::consts::PI * 2.0).ln(), epsilon = 1e-12);
        assert_relative_eq!(ll, -1.265_512_123_484_645, epsilon = 1e-9);
    }

    #[test]
    fn empty_rows_are_counted_and_ignored() {
        let d = LongData::from_options(&[
            vec![Some(6.0), Some(8.5), None, None],
            vec![None, None, None, None],
            vec![Some(5.0), None, Some(9.0), Some(13.0)],
        ])
        .unwrap();
        let p = GcmParams::population();
        let det = observed_loglik_detail(&p, &d).unwrap();
        assert_eq!(det.empty_rows, 1);
        let trimmed = d.select_rows(&[0, 2]);
        assert_eq!(observed_loglik(&p, &trimmed).unwrap(), det.value);
        let stats = PatternStats::new(&d);
        assert_eq!(stats.empty_rows(), 1);
        assert_eq!(stats.rows(), 2);
    }

    #[test]
    fn grouped_statistics_agree_with_row_sum() {
        let p = GcmParams::population();
        let d = sample_dataset_with_aux::<f64>(&p, 2000, 4, 1.0, Seed::new(8, 8)).unwrap();
        for mech in [Mechanism::Mar, Mechanism::Mnar] {
            let a = ampute(&d, &MissingSpec::new(mech, 0.3, 4)).unwrap();
            let stats = PatternStats::new(&a);
            let q = GcmParams::new(5.5, 1.7, 1.4, 0.6, 0.3, 1.2).unwrap();
            let rows = observed_loglik(&q, &a).unwrap();
            assert_relative_eq!(stats.loglik(&q), rows, max_relative = 1e-12);
            let (ll, _) = stats.loglik_grad_theta(&to_theta(&q));
            assert_relative_eq!(ll, rows, max_relative = 1e-12);
        }
    }

    #[test]
    fn non_pd_gives_negative_infinity() {
        let d = LongData::from_options(&[vec![Some(1.0), Some(2.0)]]).unwrap();
        let p = GcmParams { beta_l: 0.0, beta_s: 0.0, var_l: 1.0, var_s: 1.0, corr_ls: 1.0, var_e: 1e-13 };
        assert_eq!(observed_loglik(&p, &d).unwrap(), f64::NEG_INFINITY);
        assert_eq!(PatternStats::new(&d).loglik(&p), f64::NEG_INFINITY);
    }
}
