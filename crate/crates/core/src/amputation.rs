//! MAR and MNAR amputation of complete panels.
//!
//! Amputation only ever flips mask entries; stored values are untouched.

use std::fmt;
use std::str::FromStr;

use crate::datagen::LongData;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mechanism {
    Mar,
    Mnar,
}

impl Mechanism {
    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Mar => "MAR",
            Mechanism::Mnar => "MNAR",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MAR" => Ok(Mechanism::Mar),
            "MNAR" => Ok(Mechanism::Mnar),
            _ => Err(Error::Validation(format!("unknown mechanism {s:?}"))),
        }
    }
}

/// What MAR conditions on when the immediately preceding occasion has
/// itself been amputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarCascade {
    /// Only rows with an observed predecessor are candidates; the rest stay observed.
    #[default]
    KeepObserved,
    /// Condition on the row's most recent observed value instead.
    LastObserved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissingSpec {
    pub mechanism: Mechanism,
    pub rate: f64,
    /// 0-based occasions that may lose values; occasion 0 is never allowed.
    pub affected_occasions: Vec<usize>,
    pub cascade: MarCascade,
}

impl MissingSpec {
    /// Affects every occasion after the first.
    pub fn new(mechanism: Mechanism, rate: f64, occasions: usize) -> Self {
        MissingSpec { mechanism, rate, affected_occasions: (1..occasions).collect(), cascade: MarCascade::default() }
    }

    pub fn validate(&self, occasions: usize) -> Result<()> {
        if !(0.0..1.0).contains(&self.rate) {
            return Err(Error::Validation(format!("missing rate {} outside [0, 1)", self.rate)));
        }
        if self.affected_occasions.contains(&0) {
            return Err(Error::Validation("the first occasion can never be amputed".into()));
        }
        if self.affected_occasions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("affected occasions must be strictly increasing".into()));
        }
        if self.affected_occasions.iter().any(|&t| t >= occasions) {
            return Err(Error::Validation(format!("affected occasion beyond T = {occasions}")));
        }
        Ok(())
    }
}

/// Number of cells to remove out of `n` at the given rate: ⌈rate·n⌉.
pub fn target_count(rate: f64, n: usize) -> usize {
    // Guard against 0.3 * 100 = 30.000000000000004 rounding up to 31.
    let raw = rate * n as f64;
    let c = (raw - 1e-9 * raw.max(1.0)).ceil().max(0.0) as usize;
    c.min(n)
}

/// Threshold such that exactly `count` of `values` lie strictly above it
/// when there are no ties; ties at the threshold stay below.
fn upper_cut<T: Scalar>(values: &[T], count: usize) -> Option<T> {
    if count == 0 || values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let m = sorted.len();
    if count >= m {
        // Everything goes: use a value below the minimum.
        return Some(sorted[0] - T::one());
    }
    Some(sorted[m - count - 1])
}

fn check_complete<T: Scalar>(data: &LongData<T>) -> Result<()> {
    if !data.is_complete() {
        return Err(Error::Validation("amputation expects complete data".into()));
    }
    Ok(())
}

/// MAR: cell (i, t) goes missing when the predecessor value is in the upper
/// tail of its observed distribution. The cut is placed so that ⌈rate·N⌉
/// cells are removed at every affected occasion.
pub fn ampute_mar<T: Scalar>(data: &LongData<T>, spec: &MissingSpec) -> Result<LongData<T>> {
    if spec.mechanism != Mechanism::Mar {
        return Err(Error::Validation("ampute_mar called with a non-MAR spec".into()));
    }
    spec.validate(data.n_occasions())?;
    check_complete(data)?;
    let n = data.n_rows();
    let mut out = data.clone();
    let count = target_count(spec.rate, n);
    if count == 0 {
        return Ok(out);
    }
    for &t in &spec.affected_occasions {
        let trigger: Vec<(usize, T)> = match spec.cascade {
            MarCascade::KeepObserved => (0..n).filter_map(|i| out.get(i, t - 1).map(|v| (i, v))).collect(),
            MarCascade::LastObserved => (0..n)
                .map(|i| {
                    let last = (0..t).rev().find_map(|s| out.get(i, s)).expect("first occasion always observed");
                    (i, last)
                })
                .collect(),
        };
        let vals: Vec<T> = trigger.iter().map(|&(_, v)| v).collect();
        if let Some(cut) = upper_cut(&vals, count) {
            for &(i, v) in &trigger {
                if v > cut {
                    out.set_missing(i, t);
                }
            }
        }
    }
    Ok(out)
}

/// MNAR: rows whose auxiliary value exceeds the (1 − rate) empirical
/// percentile lose every affected occasion.
pub fn ampute_mnar<T: Scalar>(data: &LongData<T>, spec: &MissingSpec) -> Result<LongData<T>> {
    if spec.mechanism != Mechanism::Mnar {
        return Err(Error::Validation("ampute_mnar called with a non-MNAR spec".into()));
    }
    spec.validate(data.n_occasions())?;
    check_complete(data)?;
    let aux = data.aux.as_ref().ok_or_else(|| Error::Validation("MNAR amputation needs the auxiliary column".into()))?;
    if aux.len() != data.n_rows() {
        return Err(Error::Validation("auxiliary column length differs from row count".into()));
    }
    let mut out = data.clone();
    if let Some(cut) = upper_cut(aux, target_count(spec.rate, data.n_rows())) {
        for (i, &a) in aux.iter().enumerate() {
            if a > cut {
                for &t in &spec.affected_occasions {
                    out.set_missing(i, t);
                }
            }
        }
    }
    Ok(out)
}

pub fn ampute<T: Scalar>(data: &LongData<T>, spec: &MissingSpec) -> Result<LongData<T>> {
    match spec.mechanism {
        Mechanism::Mar => ampute_mar(data, spec),
        Mechanism::Mnar => ampute_mnar(data, spec),
    }
}
