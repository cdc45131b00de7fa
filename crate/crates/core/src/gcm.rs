//! Linear growth-curve model: parameters, loadings, implied moments and the
//! multivariate normal log-density.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Mat};
use crate::scalar::Scalar;

/// The six parameters of an unconditional linear growth-curve model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcmParams<T> {
    /// Latent intercept mean.
    pub beta_l: T,
    /// Latent slope mean.
    pub beta_s: T,
    /// Latent intercept variance.
    pub var_l: T,
    /// Latent slope variance.
    pub var_s: T,
    /// Intercept/slope correlation.
    pub corr_ls: T,
    /// Residual (measurement error) variance, shared across occasions.
    pub var_e: T,
}

/// Named handle on one of the six parameters, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    BetaL,
    BetaS,
    VarL,
    VarS,
    CorrLS,
    VarE,
}

impl Param {
    pub const ALL: [Param; 6] = [Param::BetaL, Param::BetaS, Param::VarL, Param::VarS, Param::CorrLS, Param::VarE];

    /// Parameters reported in simulation summaries (the residual variance is
    /// estimated but not summarized).
    pub const SUMMARIZED: [Param; 5] = [Param::BetaL, Param::BetaS, Param::VarL, Param::VarS, Param::CorrLS];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Param::BetaL => "beta_L",
            Param::BetaS => "beta_S",
            Param::VarL => "var_L",
            Param::VarS => "var_S",
            Param::CorrLS => "corr_LS",
            Param::VarE => "var_e",
        }
    }

    pub fn from_name(s: &str) -> Option<Param> {
        Param::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn is_variance(self) -> bool {
        matches!(self, Param::VarL | Param::VarS | Param::VarE)
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl<T: Scalar> GcmParams<T> {
    pub fn new(beta_l: T, beta_s: T, var_l: T, var_s: T, corr_ls: T, var_e: T) -> Result<Self> {
        let p = GcmParams { beta_l, beta_s, var_l, var_s, corr_ls, var_e };
        p.validate()?;
        Ok(p)
    }

    /// Population values used throughout the simulation study:
    /// β = (6, 2), unit latent variances, zero correlation, unit error variance.
    pub fn population() -> Self {
        let one = T::one();
        GcmParams { beta_l: T::lit(6.0), beta_s: T::lit(2.0), var_l: one, var_s: one, corr_ls: T::zero(), var_e: one }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.to_array();
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("non-finite component in {self:?}")));
        }
        if self.var_l < T::zero() || self.var_s < T::zero() {
            return Err(Error::InvalidParams("latent variances must be non-negative".into()));
        }
        if !(self.var_e > T::zero()) {
            return Err(Error::InvalidParams("residual variance must be positive".into()));
        }
        if self.corr_ls.abs() > T::one() {
            return Err(Error::InvalidParams("correlation outside [-1, 1]".into()));
        }
        Ok(())
    }

    pub fn to_array(&self) -> [T; 6] {
        [self.beta_l, self.beta_s, self.var_l, self.var_s, self.corr_ls, self.var_e]
    }

    /// Builds parameters from storage order without validation.
    pub fn from_array(a: [T; 6]) -> Self {
        GcmParams { beta_l: a[0], beta_s: a[1], var_l: a[2], var_s: a[3], corr_ls: a[4], var_e: a[5] }
    }

    pub fn get(&self, p: Param) -> T {
        self.to_array()[p.index()]
    }

    /// Latent intercept/slope covariance.
    pub fn cov_ls(&self) -> T {
        self.corr_ls * (self.var_l * self.var_s).sqrt()
    }

    /// 2×2 latent covariance matrix.
    pub fn latent_cov(&self) -> Mat<T> {
        let c = self.cov_ls();
        Mat::from_rows(&[vec![self.var_l, c], vec![c, self.var_s]])
    }

    pub fn fixed_effects(&self) -> [T; 2] {
        [self.beta_l, self.beta_s]
    }

    pub fn cast<U: Scalar>(&self) -> GcmParams<U> {
        GcmParams::from_array(self.to_array().map(|v| U::lit(v.to_f64_lossy())))
    }
}

/// Model-implied mean vector and covariance matrix of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments<T> {
    pub mu: Vec<T>,
    pub sigma: Mat<T>,
}

impl<T: Scalar> Moments<T> {
    pub fn new(mu: Vec<T>, sigma: Mat<T>) -> Result<Self> {
        if sigma.rows() != mu.len() || sigma.cols() != mu.len() {
            return Err(Error::InvalidDimension(format!(
                "mean of length {} with {}x{} covariance",
                mu.len(),
                sigma.rows(),
                sigma.cols()
            )));
        }
        Ok(Moments { mu, sigma })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// T×2 loading matrix; row t is `[1, t]` with time coded 0, 1, …, T−1.
pub fn loading_matrix<T: Scalar>(occasions: usize) -> Result<Mat<T>> {
    if occasions < 2 {
        return Err(Error::InvalidDimension(format!(
            "a linear growth model needs at least 2 occasions, got {occasions}"
        )));
    }
    Ok(Mat::from_fn(occasions, 2, |t, c| if c == 0 { T::one() } else { T::from_usize_lossy(t) }))
}

/// μ = Λβ and Σ = ΛΨΛᵀ + σ²ₑI.
pub fn implied_moments<T: Scalar>(p: &GcmParams<T>, occasions: usize) -> Result<Moments<T>> {
    p.validate()?;
    let lambda = loading_matrix::<T>(occasions)?;
    let mu = lambda.matvec(&p.fixed_effects());
    let mut sigma = lambda.matmul(&p.latent_cov()).matmul(&lambda.transpose());
    for t in 0..occasions {
        sigma[(t, t)] = sigma[(t, t)] + p.var_e;
    }
    // Exact symmetry; the products above can differ in the last bit.
    for i in 0..occasions {
        for j in 0..i {
            let s = (sigma[(i, j)] + sigma[(j, i)]) / T::lit(2.0);
            sigma[(i, j)] = s;
            sigma[(j, i)] = s;
        }
    }
    Ok(Moments { mu, sigma })
}

/// Restricts moments to the given (0-based, strictly increasing) indices.
pub fn submoments<T: Scalar>(m: &Moments<T>, observed: &[usize]) -> Result<Moments<T>> {
    if observed.is_empty() {
        return Err(Error::InvalidPattern("empty observed index set".into()));
    }
    if observed.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidPattern(format!("indices not strictly increasing: {observed:?}")));
    }
    if *observed.last().unwrap() >= m.dim() {
        return Err(Error::InvalidPattern(format!("index out of range for dimension {}", m.dim())));
    }
    let mu = observed.iter().map(|&i| m.mu[i]).collect();
    let sigma = Mat::from_fn(observed.len(), observed.len(), |a, b| m.sigma[(observed[a], observed[b])]);
    Ok(Moments { mu, sigma })
}

/// Multivariate normal density with a cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct MvnDensity<T> {
    mu: Vec<T>,
    chol: Cholesky<T>,
    norm: T,
}

impl<T: Scalar> MvnDensity<T> {
    pub fn new(m: &Moments<T>) -> Result<Self> {
        let chol = Cholesky::new(&m.sigma)?;
        let d = T::from_usize_lossy(m.dim());
        let half = T::lit(0.5);
        let norm = -half * (d * (T::TAU()).ln() + chol.log_det());
        Ok(MvnDensity { mu: m.mu.clone(), chol, norm })
    }

    pub fn log_pdf(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.mu.len());
        let r: Vec<T> = x.iter().zip(&self.mu).map(|(&a, &b)| a - b).collect();
        self.norm - T::lit(0.5) * self.chol.quad_form(&r)
    }
}

/// Log-density of `x` under N(m.mu, m.sigma).
pub fn mvn_logpdf<T: Scalar>(x: &[T], m: &Moments<T>) -> Result<T> {
    if x.len() != m.dim() {
        return Err(Error::InvalidDimension(format!("point of length {} for {}-dim density", x.len(), m.dim())));
    }
    Ok(MvnDensity::new(m)?.log_pdf(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn study_params() -> GcmParams<f64> {
        GcmParams::population()
    }

    #[test]
    fn loadings_are_linear_time_codes() {
        let l = loading_matrix::<f64>(4).unwrap();
        let expect = [[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]];
        for (t, row) in expect.iter().enumerate() {
            assert_eq!(l.row(t), row);
        }
        let l2 = loading_matrix::<f64>(2).unwrap();
        assert_eq!(l2.as_slice(), &[1.0, 0.0, 1.0, 1.0]);
        assert!(matches!(loading_matrix::<f64>(1), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn population_moments_match_hand_expansion() {
        let m = implied_moments(&study_params(), 4).unwrap();
        assert_eq!(m.mu, vec![6.0, 8.0, 10.0, 12.0]);
        assert_eq!(m.sigma.diag(), vec![2.0, 3.0, 6.0, 11.0]);
        for s in 0..4 {
            for t in 0..4 {
                if s != t {
                    assert_eq!(m.sigma[(s, t)], 1.0 + (s * t) as f64);
                }
            }
        }
    }

    #[test]
    fn zero_latent_variance_gives_identity() {
        let p = GcmParams::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0).unwrap();
        let m = implied_moments(&p, 3).unwrap();
        assert_eq!(m.mu, vec![0.0; 3]);
        assert_eq!(m.sigma, Mat::identity(3));
    }

    #[test]
    fn validation_rejects_bad_params() {
        assert!(GcmParams::new(0.0, 0.0, -1.0, 1.0, 0.0, 1.0).is_err());
        assert!(GcmParams::new(0.0, 0.0, 1.0, 1.0, 1.5, 1.0).is_err());
        assert!(GcmParams::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0).is_err());
        assert!(GcmParams::new(f64::NAN, 0.0, 1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn logpdf_hand_values() {
        let one = Moments::new(vec![0.0], Mat::identity(1)).unwrap();
        assert_relative_eq!(mvn_logpdf(&[0.0], &one).unwrap(), -0.918_938_533_204_672_7, epsilon = 1e-12);
        let two = Moments::new(vec![0.0, 0.0], Mat::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]])).unwrap();
        let expect = -((2.0 * std::f64::consts::PI).ln() + 2f64.ln() + 0.5);
        assert_relative_eq!(mvn_logpdf(&[1.0, 1.0], &two).unwrap(), expect, epsilon = 1e-12);
        assert_relative_eq!(expect, -3.031_024_246, epsilon = 1e-8);
        for d in 1..6 {
            let m = Moments::new(vec![3.0; d], Mat::identity(d)).unwrap();
            let want = -(d as f64) / 2.0 * (2.0 * std::f64::consts::PI).ln();
            assert_relative_eq!(mvn_logpdf(&vec![3.0; d], &m).unwrap(), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn logpdf_rejects_singular_covariance() {
        let m = Moments::new(vec![0.0, 0.0], Mat::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]])).unwrap();
        assert!(matches!(mvn_logpdf(&[0.0, 0.0], &m), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn submoment_hand_values() {
        let m = implied_moments(&study_params(), 4).unwrap();
        assert_eq!(submoments(&m, &[0, 1, 2, 3]).unwrap(), m);
        let s = submoments(&m, &[0, 3]).unwrap();
        assert_eq!(s.mu, vec![6.0, 12.0]);
        assert_eq!(s.sigma.as_slice(), &[2.0, 1.0, 1.0, 11.0]);
        let s = submoments(&m, &[1]).unwrap();
        assert_eq!(s.mu, vec![8.0]);
        assert_eq!(s.sigma.as_slice(), &[3.0]);
        assert!(matches!(submoments(&m, &[]), Err(Error::InvalidPattern(_))));
        assert!(submoments(&m, &[2, 1]).is_err());
        assert!(submoments(&m, &[4]).is_err());
    }

    #[test]
    fn density_integrates_to_one_in_2d() {
        let m = Moments::new(vec![0.5, -0.3], Mat::from_rows(&[vec![1.0, 0.4], vec![0.4, 0.8]])).unwrap();
        let dens = MvnDensity::new(&m).unwrap();
        let h = 0.02;
        let steps = 700;
        let mut total = 0.0;
        for i in 0..steps {
            for j in 0..steps {
                let x = -6.5 + (i as f64 + 0.5) * h;
                let y = -7.0 + (j as f64 + 0.5) * h;
                total += dens.log_pdf(&[x, y]).exp() * h * h;
            }
        }
        assert!((total - 1.0).abs() < 1e-3, "integral {total}");
    }

    #[test]
    fn works_in_single_precision() {
        let m = implied_moments(&GcmParams::<f32>::population(), 4).unwrap();
        assert_eq!(m.mu, vec![6.0f32, 8.0, 10.0, 12.0]);
        let v = mvn_logpdf(&[6.0f32, 8.0, 10.0, 12.0], &m).unwrap();
        let v64 = mvn_logpdf(&[6.0, 8.0, 10.0, 12.0], &implied_moments(&study_params(), 4).unwrap()).unwrap();
        assert!((v as f64 - v64).abs() < 1e-5);
    }

    fn arb_params() -> impl Strategy<Value = GcmParams<f64>> {
        (-5.0..5.0, -3.0..3.0, 0.0..3.0, 0.0..3.0, -0.99..0.99, 0.05..3.0)
            .prop_map(|(a, b, c, d, e, f)| GcmParams::new(a, b, c, d, e, f).unwrap())
    }

    proptest! {
        #[test]
        fn implied_sigma_symmetric_and_pd(p in arb_params(), t in 2usize..7) {
            let m = implied_moments(&p, t).unwrap();
            prop_assert!(m.sigma.asymmetry() <= 1e-12);
            prop_assert!(Cholesky::new(&m.sigma).is_ok());
        }

        #[test]
        fn nested_restriction_commutes(p in arb_params(), mask in 1u32..64, sub in 1u32..64) {
            let m = implied_moments(&p, 6).unwrap();
            let outer: Vec<usize> = (0..6).filter(|i| mask & (1 << i) != 0).collect();
            let inner_pos: Vec<usize> = (0..outer.len()).filter(|i| sub & (1 << i) != 0).collect();
            prop_assume!(!inner_pos.is_empty());
            let inner: Vec<usize> = inner_pos.iter().map(|&i| outer[i]).collect();
            let two_step = submoments(&submoments(&m, &outer).unwrap(), &inner_pos).unwrap();
            prop_assert_eq!(two_step, submoments(&m, &inner).unwrap());
        }

        #[test]
        fn logpdf_stationary_at_mean(p in arb_params()) {
            let m = implied_moments(&p, 4).unwrap();
            let dens = MvnDensity::new(&m).unwrap();
            let h = 1e-5;
            for k in 0..4 {
                let mut up = m.mu.clone();
                let mut dn = m.mu.clone();
                up[k] += h;
                dn[k] -= h;
                let g = (dens.log_pdf(&up) - dens.log_pdf(&dn)) / (2.0 * h);
                prop_assert!(g.abs() < 1e-6, "gradient {} at coordinate {}", g, k);
                prop_assert!(dens.log_pdf(&up) < dens.log_pdf(&m.mu));
            }
        }
    }
}
