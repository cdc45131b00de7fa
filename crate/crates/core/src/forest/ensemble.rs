//! Bootstrap-aggregated regression forests.

use rand::Rng;

use crate::datagen::Seed;
use crate::error::{Error, Result};
use crate::forest::tree::{grow, presort, validate, RegressionTree, TreeConfig};
use crate::linalg::Mat;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestConfig {
    pub ntree: usize,
    /// Candidate predictors per node; `None` means ⌊√p⌋ (at least 1).
    pub mtry: Option<usize>,
    pub min_node: usize,
    /// Grow each tree on a bootstrap resample; otherwise on all rows.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { ntree: 100, mtry: None, min_node: 5, bootstrap: true }
    }
}

impl ForestConfig {
    pub fn resolved_mtry(&self, p: usize) -> usize {
        self.mtry.unwrap_or_else(|| (p as f64).sqrt().floor() as usize).clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest<T> {
    pub trees: Vec<RegressionTree<T>>,
    pub mtry: usize,
    pub ntree: usize,
    /// Mean squared out-of-bag error; `None` without bootstrap or when no
    /// row was ever out of bag.
    pub oob_error: Option<T>,
}

impl<T: Scalar> Forest<T> {
    pub fn predict_row(&self, x: &[T]) -> T {
        let sum: T = self.trees.iter().map(|t| t.predict_row(x)).sum();
        sum / T::from_usize_lossy(self.trees.len())
    }

    pub fn predict(&self, x: &Mat<T>) -> Vec<T> {
        (0..x.rows()).map(|i| self.predict_row(x.row(i))).collect()
    }
}

/// Fits `ntree` trees; tree `k` draws from its own stream `seed.derive(k)`.
pub fn fit_forest<T: Scalar>(x: &Mat<T>, y: &[T], cfg: &ForestConfig, seed: Seed) -> Result<Forest<T>> {
    if cfg.ntree == 0 {
        return Err(Error::Validation("a forest needs at least one tree".into()));
    }
    let mtry = cfg.resolved_mtry(x.cols());
    let tree_cfg = TreeConfig { mtry, min_node: cfg.min_node };
    validate(x, y, &tree_cfg)?;
    let n = x.rows();
    let order = presort(x);
    let mut counts = vec![0u32; n];
    let mut trees = Vec::with_capacity(cfg.ntree);
    let mut oob_sum = vec![T::zero(); n];
    let mut oob_count = vec![0usize; n];
    for k in 0..cfg.ntree {
        let mut rng = seed.derive(k as u64).rng();
        if cfg.bootstrap {
            counts.iter_mut().for_each(|c| *c = 0);
            (0..n).for_each(|_| counts[rng.random_range(0..n)] += 1);
        } else {
            counts.iter_mut().for_each(|c| *c = 1);
        }
        let tree = grow(x, y, &counts, &order, &tree_cfg, &mut rng);
        if cfg.bootstrap {
            for i in (0..n).filter(|&i| counts[i] == 0) {
                oob_sum[i] = oob_sum[i] + tree.predict_row(x.row(i));
                oob_count[i] += 1;
            }
        }
        trees.push(tree);
    }
    let oob_error = if cfg.bootstrap {
        let (mut se, mut m) = (T::zero(), 0usize);
        for i in (0..n).filter(|&i| oob_count[i] > 0) {
            let pred = oob_sum[i] / T::from_usize_lossy(oob_count[i]);
            se = se + (pred - y[i]) * (pred - y[i]);
            m += 1;
        }
        (m > 0).then(|| se / T::from_usize_lossy(m))
    } else {
        None
    };
    Ok(Forest { trees, mtry, ntree: cfg.ntree, oob_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::tree::fit_tree;
    use rand_distr::StandardNormal;

    fn linear_data(n: usize, seed: u64) -> (Mat<f64>, Vec<f64>) {
        let mut rng = Seed::new(seed, 0).rng();
        let x = Mat::from_fn(n, 3, |_, _| rng.random_range(-2.0..2.0));
        let y = (0..n).map(|i| 3.0 * x[(i, 0)] + 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
        (x, y)
    }

    #[test]
    fn single_unbootstrapped_tree_equals_tree() {
        let (x, y) = linear_data(80, 1);
        let cfg = ForestConfig { ntree: 1, mtry: Some(3), min_node: 3, bootstrap: false };
        let f = fit_forest(&x, &y, &cfg, Seed::new(4, 4)).unwrap();
        let t = fit_tree(&x, &y, &TreeConfig { mtry: 3, min_node: 3 }, &mut Seed::new(4, 4).derive(0).rng()).unwrap();
        assert_eq!(f.predict(&x), t.predict(&x));
        assert!(f.oob_error.is_none());
    }

    #[test]
    fn beats_mean_baseline() {
        let (x, y) = linear_data(500, 2);
        let (xt, yt) = linear_data(500, 3);
        let f = fit_forest(&x, &y, &ForestConfig { mtry: Some(3), ..Default::default() }, Seed::new(5, 0)).unwrap();
        let mean = yt.iter().sum::<f64>() / yt.len() as f64;
        let var = yt.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / yt.len() as f64;
        let pred = f.predict(&xt);
        let mse = pred.iter().zip(&yt).map(|(p, v)| (p - v).powi(2)).sum::<f64>() / yt.len() as f64;
        assert!(mse < var / 2.0, "mse {mse} vs var {var}");
        assert!(f.oob_error.unwrap() < var / 2.0);
    }

    #[test]
    fn deterministic_and_order_invariant() {
        let (x, y) = linear_data(120, 7);
        let cfg = ForestConfig { ntree: 20, ..Default::default() };
        let a = fit_forest(&x, &y, &cfg, Seed::new(1, 2)).unwrap();
        let b = fit_forest(&x, &y, &cfg, Seed::new(1, 2)).unwrap();
        assert_eq!(a, b);
        let mut rev = a.clone();
        rev.trees.reverse();
        for i in 0..x.rows() {
            assert!((a.predict_row(x.row(i)) - rev.predict_row(x.row(i))).abs() < 1e-12);
        }
    }

    #[test]
    fn default_mtry_is_floor_sqrt() {
        let cfg = ForestConfig::default();
        assert_eq!(cfg.resolved_mtry(3), 1);
        assert_eq!(cfg.resolved_mtry(4), 2);
        assert_eq!(cfg.resolved_mtry(1), 1);
        assert!(fit_forest(&Mat::<f64>::zeros(10, 2), &[0.0; 10], &ForestConfig { ntree: 0, ..cfg }, Seed::new(0, 0)).is_err());
    }
}
