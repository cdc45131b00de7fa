//! Iterative forest imputation: every incomplete column is regressed on all
//! the others, sweep after sweep, until the imputed values stop settling.

use crate::datagen::{LongData, Seed};
use crate::error::{Error, Result};
use crate::forest::ensemble::{fit_forest, ForestConfig};
use crate::linalg::Mat;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissForestConfig {
    pub ntree: usize,
    pub mtry: Option<usize>,
    pub min_node: usize,
    pub max_iter: usize,
}

impl Default for MissForestConfig {
    fn default() -> Self {
        MissForestConfig { ntree: 100, mtry: None, min_node: 5, max_iter: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    NoMissing,
    /// The sweep-to-sweep change grew; the previous sweep's values were kept.
    DeltaIncreased,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputeTrace<T> {
    /// Relative change Σ(new − old)² / Σ new² over imputed cells, per sweep.
    pub deltas: Vec<T>,
    pub iterations: usize,
    pub stop: StopReason,
    /// (row, column) of every cell that was imputed.
    pub imputed_cells: Vec<(usize, usize)>,
}

pub fn missforest_impute<T: Scalar>(
    data: &LongData<T>,
    cfg: &MissForestConfig,
    seed: Seed,
) -> Result<(LongData<T>, ImputeTrace<T>)> {
    let n = data.n_rows();
    let p = data.n_occasions();
    let cells: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (0..p).map(move |t| (i, t))).filter(|&(i, t)| !data.is_observed(i, t)).collect();
    if cells.is_empty() {
        return Ok((
            data.clone(),
            ImputeTrace { deltas: vec![], iterations: 0, stop: StopReason::NoMissing, imputed_cells: cells },
        ));
    }
    if p < 2 {
        return Err(Error::Validation("forest imputation needs at least two columns".into()));
    }
    let mut means = Vec::with_capacity(p);
    for t in 0..p {
        let col = data.observed_column(t);
        if col.len() < 2 {
            return Err(Error::Validation(format!("column {t} has fewer than two observed values")));
        }
        means.push(col.iter().copied().sum::<T>() / T::from_usize_lossy(col.len()));
    }

    let mut x = Mat::from_fn(n, p, |i, t| if data.is_observed(i, t) { data.raw(i, t) } else { means[t] });
    let mut order: Vec<usize> = (0..p).filter(|&t| data.column_missing_count(t) > 0).collect();
    order.sort_by_key(|&t| data.column_missing_count(t));

    let forest_cfg = ForestConfig { ntree: cfg.ntree, mtry: cfg.mtry, min_node: cfg.min_node, bootstrap: true };
    let mut deltas: Vec<T> = Vec::new();
    let mut stop = StopReason::MaxIter;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let previous = x.clone();
        for &col in &order {
            let (obs, mis): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| data.is_observed(i, col));
            let others: Vec<usize> = (0..p).filter(|&c| c != col).collect();
            let train = Mat::from_fn(obs.len(), others.len(), |r, c| x[(obs[r], others[c])]);
            let target: Vec<T> = obs.iter().map(|&i| x[(i, col)]).collect();
            let tag = (iterations as u64) << 32 | col as u64;
            let forest = fit_forest(&train, &target, &forest_cfg, seed.derive(tag))?;
            let mut row = vec![T::zero(); others.len()];
            for &i in &mis {
                for (slot, &c) in row.iter_mut().zip(&others) {
                    *slot = x[(i, c)];
                }
                x[(i, col)] = forest.predict_row(&row);
            }
        }
        iterations += 1;
        let (num, den) = cells.iter().fold((T::zero(), T::zero()), |(a, b), &(i, t)| {
            let d = x[(i, t)] - previous[(i, t)];
            (a + d * d, b + x[(i, t)] * x[(i, t)])
        });
        let delta = if den > T::zero() { num / den } else { T::zero() };
        let increased = deltas.last().is_some_and(|&last| delta > last);
        deltas.push(delta);
        if increased {
            x = previous;
            stop = StopReason::DeltaIncreased;
            break;
        }
    }

    let mut out = data.clone();
    for &(i, t) in &cells {
        out.fill(i, t, x[(i, t)]);
    }
    Ok((out, ImputeTrace { deltas, iterations, stop, imputed_cells: cells }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amputation::{ampute, Mechanism, MissingSpec};
    use crate::datagen::sample_dataset_with_aux;
    use crate::gcm::GcmParams;

    #[test]
    fn complete_data_passes_through() {
        let d = sample_dataset_with_aux::<f64>(&GcmParams::population(), 30, 4, 1.0, Seed::new(1, 1)).unwrap();
        let (out, trace) = missforest_impute(&d, &MissForestConfig::default(), Seed::new(0, 0)).unwrap();
        assert_eq!(out, d);
        assert_eq!(trace.iterations, 0);
        assert_eq!(trace.stop, StopReason::NoMissing);
    }

    #[test]
    fn duplicated_column_is_recovered() {
        let rows: Vec<Vec<Option<f64>>> = (0..50)
            .map(|i| {
                let v = (i as f64 * 0.61).sin() * 5.0 + i as f64 * 0.1;
                let noise = ((i * 37) % 11) as f64 - 5.0;
                vec![Some(v), Some(v), Some(noise)]
            })
            .collect();
        let truth = rows[23][1].unwrap();
        let mut holed = rows.clone();
        holed[23][1] = None;
        let d = LongData::from_options(&holed).unwrap();
        let (out, trace) = missforest_impute(&d, &MissForestConfig { mtry: Some(2), ..Default::default() }, Seed::new(2, 2)).unwrap();
        assert!((out.raw(23, 1) - truth).abs() < 0.5, "imputed {} vs {}", out.raw(23, 1), truth);
        assert_eq!(trace.imputed_cells, vec![(23, 1)]);
    }

    #[test]
    fn observed_cells_untouched_and_trace_sane() {
        let base = sample_dataset_with_aux::<f64>(&GcmParams::population(), 120, 4, 1.0, Seed::new(3, 3)).unwrap();
        let d = ampute(&base, &MissingSpec::new(Mechanism::Mar, 0.3, 4)).unwrap();
        let cfg = MissForestConfig { ntree: 20, max_iter: 4, ..Default::default() };
        let (out, trace) = missforest_impute(&d, &cfg, Seed::new(9, 9)).unwrap();
        assert!(out.is_complete());
        for i in 0..120 {
            for t in 0..4 {
                if d.is_observed(i, t) {
                    assert_eq!(out.raw(i, t).to_bits(), d.raw(i, t).to_bits());
                }
            }
        }
        assert!(trace.iterations <= 4 && trace.iterations >= 1);
        assert!(trace.deltas.iter().all(|v| v.is_finite() && *v >= 0.0));
        let again = missforest_impute(&d, &cfg, Seed::new(9, 9)).unwrap();
        assert_eq!(again.0, out);
    }

    #[test]
    fn sparse_column_rejected() {
        let d = LongData::from_options(&[
            vec![Some(1.0), None],
            vec![Some(2.0), Some(1.0)],
            vec![Some(3.0), None],
        ])
        .unwrap();
        assert!(missforest_impute(&d, &MissForestConfig::default(), Seed::new(0, 0)).is_err());
    }
}
