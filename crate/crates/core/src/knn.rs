//! Nearest-neighbor single imputation with a partial-overlap distance.

use crate::datagen::LongData;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    #[default]
    Uniform,
    InverseDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scaling {
    /// Divide each coordinate difference by the column's observed range.
    #[default]
    Range,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnConfig {
    pub k: usize,
    pub weighting: Weighting,
    pub scaling: Scaling,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { k: 5, weighting: Weighting::Uniform, scaling: Scaling::Range }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KnnReport {
    pub imputed_cells: usize,
    /// Cells that had fewer than k eligible donors and used all of them.
    pub short_donor_cells: usize,
}

/// Per-column divisors: observed range, or 1 when the range is zero or
/// scaling is off.
pub fn column_scales<T: Scalar>(data: &LongData<T>, scaling: Scaling) -> Vec<T> {
    (0..data.n_occasions())
        .map(|t| {
            if scaling == Scaling::None {
                return T::one();
            }
            let col = data.observed_column(t);
            let lo = col.iter().copied().fold(T::infinity(), T::min);
            let hi = col.iter().copied().fold(T::neg_infinity(), T::max);
            let range = hi - lo;
            if range > T::zero() && range.is_finite() {
                range
            } else {
                T::one()
            }
        })
        .collect()
}

/// √((T/m) Σ ((aⱼ − bⱼ)/sⱼ)²) over the m jointly observed coordinates.
pub fn row_distance<T: Scalar>(a: &[T], b: &[T], mask_a: &[bool], mask_b: &[bool], scales: &[T]) -> Result<T> {
    let dim = a.len();
    let mut sum = T::zero();
    let mut shared = 0usize;
    for j in 0..dim {
        if mask_a[j] && mask_b[j] {
            let d = (a[j] - b[j]) / scales[j];
            sum = sum + d * d;
            shared += 1;
        }
    }
    if shared == 0 {
        return Err(Error::IncomparableRows);
    }
    Ok((T::from_usize_lossy(dim) / T::from_usize_lossy(shared) * sum).sqrt())
}

fn aggregate<T: Scalar>(donors: &[(T, usize)], data: &LongData<T>, t: usize, weighting: Weighting) -> T {
    let values = donors.iter().map(|&(_, j)| data.raw(j, t));
    match weighting {
        Weighting::Uniform => values.sum::<T>() / T::from_usize_lossy(donors.len()),
        Weighting::InverseDistance => {
            let exact: Vec<T> = donors.iter().filter(|d| d.0 == T::zero()).map(|&(_, j)| data.raw(j, t)).collect();
            if !exact.is_empty() {
                return exact.iter().copied().sum::<T>() / T::from_usize_lossy(exact.len());
            }
            let (num, den) = donors.iter().fold((T::zero(), T::zero()), |(n, d), &(dist, j)| {
                let w = T::one() / dist;
                (n + w * data.raw(j, t), d + w)
            });
            num / den
        }
    }
}

/// Fills every missing cell from the k nearest donor rows observed in that
/// column. Donors come from the original data only; ties in distance go to
/// the lower row index.
pub fn knn_impute<T: Scalar>(data: &LongData<T>, cfg: &KnnConfig) -> Result<(LongData<T>, KnnReport)> {
    if cfg.k == 0 {
        return Err(Error::Validation("k must be at least 1".into()));
    }
    let n = data.n_rows();
    let p = data.n_occasions();
    let scales = column_scales(data, cfg.scaling);
    let mut out = data.clone();
    let mut report = KnnReport::default();
    for i in 0..n {
        let missing: Vec<usize> = (0..p).filter(|&t| !data.is_observed(i, t)).collect();
        if missing.is_empty() {
            continue;
        }
        let mut ranked: Vec<(T, usize)> = (0..n)
            .filter(|&j| j != i)
            .filter_map(|j| {
                row_distance(data.row(i), data.row(j), data.mask_row(i), data.mask_row(j), &scales).ok().map(|d| (d, j))
            })
            .collect();
        ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1)));
        for t in missing {
            let donors: Vec<(T, usize)> =
                ranked.iter().copied().filter(|&(_, j)| data.is_observed(j, t)).take(cfg.k).collect();
            if donors.is_empty() {
                return Err(Error::NoDonors { row: i, column: t });
            }
            if donors.len() < cfg.k {
                report.short_donor_cells += 1;
            }
            out.fill(i, t, aggregate(&donors, data, t, cfg.weighting));
            report.imputed_cells += 1;
        }
    }
    Ok((out, report))
}
