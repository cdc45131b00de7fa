//! CART regression trees grown by greedy SSE reduction.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeConfig {
    /// Candidate predictors drawn at each node.
    pub mtry: usize,
    /// Minimum number of training rows in a leaf.
    pub min_node: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node<T> {
    Split { var: usize, threshold: T, left: usize, right: usize },
    Leaf { value: T, size: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree<T> {
    nodes: Vec<Node<T>>,
    n_features: usize,
}

/// Best split found at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice<T> {
    pub var: usize,
    pub threshold: T,
    /// Within-child sum of squared deviations after the split.
    pub sse: T,
}

impl<T: Scalar> RegressionTree<T> {
    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn root(&self) -> &Node<T> {
        &self.nodes[0]
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn predict_row(&self, x: &[T]) -> T {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value, .. } => return value,
                Node::Split { var, threshold, left, right } => {
                    at = if x[var] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &Mat<T>) -> Vec<T> {
        (0..x.rows()).map(|i| self.predict_row(x.row(i))).collect()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }
}

/// Best SSE split of `rows` on a single variable, leaving at least
/// `min_node` rows on each side. Ties keep the lowest threshold.
pub fn best_split_on<T: Scalar>(x: &Mat<T>, y: &[T], rows: &[usize], var: usize, min_node: usize) -> Option<SplitChoice<T>> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|&a, &b| x[(a, var)].partial_cmp(&x[(b, var)]).expect("finite predictors"));
    scan_sorted(x, y, &sorted, var, min_node)
}

/// Split scan over rows already sorted by `var`.
fn scan_sorted<T: Scalar>(x: &Mat<T>, y: &[T], sorted: &[usize], var: usize, min_node: usize) -> Option<SplitChoice<T>> {
    let n = sorted.len();
    if n < 2 * min_node.max(1) {
        return None;
    }
    let centre = sorted.iter().map(|&r| y[r]).sum::<T>() / T::from_usize_lossy(n);
    let (total, total_sq) = sorted.iter().fold((T::zero(), T::zero()), |(a, b), &r| {
        let d = y[r] - centre;
        (a + d, b + d * d)
    });
    scan_centred(x, y, sorted, var, min_node, centre, total, total_sq)
}

/// Scan with the node's centring constant and centred sums precomputed.
#[allow(clippy::too_many_arguments)]
fn scan_centred<T: Scalar>(
    x: &Mat<T>,
    y: &[T],
    sorted: &[usize],
    var: usize,
    min_node: usize,
    centre: T,
    total: T,
    total_sq: T,
) -> Option<SplitChoice<T>> {
    let n = sorted.len();
    let min_node = min_node.max(1);
    if n < 2 * min_node {
        return None;
    }
    // Candidates must beat the incumbent by more than rounding noise, so
    // exact ties resolve to the lowest threshold.
    let tol = total_sq * T::epsilon() * T::lit(64.0);
    let mut left = T::zero();
    let mut best: Option<SplitChoice<T>> = None;
    for k in 1..n {
        left = left + (y[sorted[k - 1]] - centre);
        if k < min_node || n - k < min_node {
            continue;
        }
        let (lo, hi) = (x[(sorted[k - 1], var)], x[(sorted[k], var)]);
        if !(lo < hi) {
            continue;
        }
        let right = total - left;
        let sse = total_sq - left * left / T::from_usize_lossy(k) - right * right / T::from_usize_lossy(n - k);
        if best.is_none_or(|b| sse < b.sse - tol) {
            let mut threshold = lo + (hi - lo) / T::lit(2.0);
            if !(threshold < hi) {
                threshold = lo;
            }
            best = Some(SplitChoice { var, threshold, sse: sse.max(T::zero()) });
        }
    }
    best
}

/// Row order of every column of `x`, ascending, ties by row index.
pub(crate) fn presort<T: Scalar>(x: &Mat<T>) -> Vec<Vec<usize>> {
    (0..x.cols())
        .map(|f| {
            let mut idx: Vec<usize> = (0..x.rows()).collect();
            idx.sort_by(|&a, &b| x[(a, f)].partial_cmp(&x[(b, f)]).expect("finite predictors").then(a.cmp(&b)));
            idx
        })
        .collect()
}

/// Grows one tree on the multiset of rows given by `counts` (how many times
/// each training row was drawn). `order` is the [`presort`] of `x`.
///
/// Every node owns the same contiguous range in each per-feature array, so
/// a split is a stable partition of that range and nothing is re-sorted.
pub(crate) fn grow<T: Scalar, R: Rng>(
    x: &Mat<T>,
    y: &[T],
    counts: &[u32],
    order: &[Vec<usize>],
    cfg: &TreeConfig,
    rng: &mut R,
) -> RegressionTree<T> {
    let p = x.cols();
    let mtry = cfg.mtry.clamp(1, p);
    let total: usize = counts.iter().map(|&c| c as usize).sum();
    let mut lists: Vec<Vec<usize>> = order
        .iter()
        .map(|o| {
            let mut list = Vec::with_capacity(total);
            for &r in o {
                for _ in 0..counts[r] {
                    list.push(r);
                }
            }
            list
        })
        .collect();
    let mut goes_left = vec![false; x.rows()];
    let mut scratch: Vec<usize> = Vec::with_capacity(total);
    let mut nodes = vec![Node::Leaf { value: T::zero(), size: 0 }];
    let mut stack = vec![(0usize, 0usize, total)];
    while let Some((slot, lo, hi)) = stack.pop() {
        let seg = &lists[0][lo..hi];
        let size = seg.len();
        let mean = seg.iter().map(|&r| y[r]).sum::<T>() / T::from_usize_lossy(size);
        let (sum, sse) = seg.iter().fold((T::zero(), T::zero()), |(a, b), &r| {
            let d = y[r] - mean;
            (a + d, b + d * d)
        });
        let mut chosen: Option<SplitChoice<T>> = None;
        if size >= 2 * cfg.min_node.max(1) && sse > T::zero() {
            let mut vars = sample(rng, p, mtry).into_vec();
            vars.sort_unstable();
            for var in vars {
                if let Some(c) = scan_centred(x, y, &lists[var][lo..hi], var, cfg.min_node, mean, sum, sse) {
                    if chosen.is_none_or(|b| c.sse < b.sse - sse * T::epsilon() * T::lit(64.0)) {
                        chosen = Some(c);
                    }
                }
            }
        }
        match chosen {
            Some(c) if c.sse < sse - sse * T::lit(1e-12) => {
                let mut n_left = 0;
                for &r in &lists[c.var][lo..hi] {
                    let left = x[(r, c.var)] <= c.threshold;
                    goes_left[r] = left;
                    n_left += left as usize;
                }
                for list in lists.iter_mut() {
                    scratch.clear();
                    let mut w = lo;
                    for k in lo..hi {
                        let r = list[k];
                        if goes_left[r] {
                            list[w] = r;
                            w += 1;
                        } else {
                            scratch.push(r);
                        }
                    }
                    list[w..hi].copy_from_slice(&scratch);
                }
                let left = nodes.len();
                nodes.push(Node::Leaf { value: T::zero(), size: 0 });
                let right = nodes.len();
                nodes.push(Node::Leaf { value: T::zero(), size: 0 });
                nodes[slot] = Node::Split { var: c.var, threshold: c.threshold, left, right };
                stack.push((right, lo + n_left, hi));
                stack.push((left, lo, lo + n_left));
            }
            _ => nodes[slot] = Node::Leaf { value: mean, size },
        }
    }
    RegressionTree { nodes, n_features: p }
}

/// Fits a regression tree on all rows of `x`.
pub fn fit_tree<T: Scalar, R: Rng>(x: &Mat<T>, y: &[T], cfg: &TreeConfig, rng: &mut R) -> Result<RegressionTree<T>> {
    validate(x, y, cfg)?;
    Ok(grow(x, y, &vec![1; x.rows()], &presort(x), cfg, rng))
}

pub(crate) fn validate<T: Scalar>(x: &Mat<T>, y: &[T], cfg: &TreeConfig) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::InvalidDimension(format!("{} predictor rows for {} responses", x.rows(), y.len())));
    }
    if x.cols() == 0 {
        return Err(Error::InvalidDimension("no predictors".into()));
    }
    if cfg.min_node == 0 || x.rows() < cfg.min_node {
        return Err(Error::Validation(format!("{} rows cannot support min_node = {}", x.rows(), cfg.min_node)));
    }
    if x.as_slice().iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite training value".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::Seed;

    fn column(v: &[f64]) -> Mat<f64> {
        Mat::from_fn(v.len(), 1, |i, _| v[i])
    }

    #[test]
    fn constant_response_is_one_leaf() {
        let x = column(&[1.0, 5.0, 2.0, 8.0, 3.0]);
        let t = fit_tree(&x, &[4.2; 5], &TreeConfig { mtry: 1, min_node: 1 }, &mut Seed::new(1, 1).rng()).unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.predict_row(&[100.0]), 4.2);
    }

    #[test]
    fn binary_separator() {
        let x = column(&[0.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
        let y = [0.0, 10.0, 0.0, 10.0, 10.0, 0.0];
        let t = fit_tree(&x, &y, &TreeConfig { mtry: 1, min_node: 1 }, &mut Seed::new(1, 1).rng()).unwrap();
        assert_eq!(t.n_leaves(), 2);
        assert_eq!(t.predict(&x), y.to_vec());
    }

    #[test]
    fn four_point_root_split() {
        let x = column(&[1.0, 2.0, 3.0, 4.0]);
        let t = fit_tree(&x, &[1.0, 2.0, 8.0, 9.0], &TreeConfig { mtry: 1, min_node: 1 }, &mut Seed::new(1, 1).rng()).unwrap();
        match t.root() {
            Node::Split { threshold, .. } => assert!(*threshold > 2.0 && *threshold < 3.0),
            other => panic!("expected a split, got {other:?}"),
        }
    }

    #[test]
    fn shatters_unique_inputs() {
        let xs: Vec<f64> = (0..30).map(|i| ((i * 7919) % 31) as f64).collect();
        let y: Vec<f64> = xs.iter().map(|v| (v * 1.3).sin()).collect();
        let t = fit_tree(&column(&xs), &y, &TreeConfig { mtry: 1, min_node: 1 }, &mut Seed::new(3, 1).rng()).unwrap();
        assert_eq!(t.predict(&column(&xs)), y);
    }

    #[test]
    fn leaves_respect_min_node() {
        let xs: Vec<f64> = (0..97).map(|i| (i as f64 * 0.731).cos()).collect();
        let y: Vec<f64> = xs.iter().map(|v| 3.0 * v + (v * 17.0).sin()).collect();
        let t = fit_tree(&column(&xs), &y, &TreeConfig { mtry: 1, min_node: 5 }, &mut Seed::new(3, 2).rng()).unwrap();
        for n in t.nodes() {
            if let Node::Leaf { size, .. } = n {
                assert!(*size >= 5);
            }
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let x = column(&[1.0, 2.0]);
        let mut rng = Seed::new(0, 0).rng();
        assert!(fit_tree(&x, &[1.0], &TreeConfig { mtry: 1, min_node: 1 }, &mut rng).is_err());
        assert!(fit_tree(&x, &[1.0, 2.0], &TreeConfig { mtry: 1, min_node: 3 }, &mut rng).is_err());
    }
}
