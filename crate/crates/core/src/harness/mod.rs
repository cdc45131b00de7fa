//! Factorial Monte Carlo study: data generation, amputation, analysis and
//! reduction to bias and coverage summaries.

mod metrics;

pub use metrics::{coverage, imputation_rmse, mean, mean_impute, relative_bias, sample_sd, Bias, BiasKind};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::amputation::{ampute, Mechanism, MissingSpec};
use crate::datagen::{sample_dataset_with_aux, splitmix64, LongData, Seed, DEFAULT_AUX_NOISE_SD};
use crate::error::{Error, Result};
use crate::fiml::{fit_fiml, FitConfig, FitResult};
use crate::forest::{missforest_impute, MissForestConfig};
use crate::gcm::{GcmParams, Param};
use crate::knn::{knn_impute, KnnConfig};

/// Replicates per condition in the full study.
pub const STUDY_REPS: usize = 500;
/// Replicates per condition at desk scale.
pub const DESK_REPS: usize = 200;
pub const STUDY_SAMPLE_SIZES: [usize; 3] = [100, 200, 300];
pub const STUDY_RATES: [f64; 4] = [0.0, 0.05, 0.15, 0.30];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Fiml,
    Rf,
    Knn,
    /// ML on the data before amputation.
    Complete,
}

impl Method {
    pub const ANALYSES: [Method; 3] = [Method::Fiml, Method::Rf, Method::Knn];

    pub fn name(self) -> &'static str {
        match self {
            Method::Fiml => "FIML",
            Method::Rf => "RF",
            Method::Knn => "KNN",
            Method::Complete => "COMPLETE",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FIML" => Ok(Method::Fiml),
            "RF" => Ok(Method::Rf),
            "KNN" => Ok(Method::Knn),
            "COMPLETE" => Ok(Method::Complete),
            _ => Err(Error::Validation(format!("unknown method {s:?}"))),
        }
    }
}

/// One simulation condition analyzed by one method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignCell {
    pub n: usize,
    pub rate: f64,
    pub mechanism: Mechanism,
    pub method: Method,
    pub reps: usize,
    pub base_seed: u64,
}

impl DesignCell {
    /// Ordering key: N, mechanism, rate, method.
    fn key(&self) -> (usize, Mechanism, u64, Method) {
        (self.n, self.mechanism, self.rate.to_bits(), self.method)
    }

    /// Seed stream shared by every method analyzing this condition.
    pub fn condition_hash(&self) -> u64 {
        let mech = match self.mechanism {
            Mechanism::Mar => 0x004D_4152,
            Mechanism::Mnar => 0x4D4E_4152,
        };
        splitmix64(splitmix64(splitmix64(self.n as u64) ^ self.rate.to_bits()) ^ mech)
    }

    pub fn replicate_seed(&self, rep: usize) -> Seed {
        Seed::new(self.base_seed, self.condition_hash() ^ rep as u64)
    }
}

impl fmt::Display for DesignCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "N={} rate={} mechanism={} method={} reps={} seed={}",
            self.n, self.rate, self.mechanism, self.method, self.reps, self.base_seed
        )
    }
}

/// Crosses sample sizes, mechanisms, rates and methods. A zero rate yields a
/// single COMPLETE cell, since every method sees the same complete data there.
pub fn expand_grid(
    ns: &[usize],
    rates: &[f64],
    mechanisms: &[Mechanism],
    methods: &[Method],
    reps: usize,
    base_seed: u64,
) -> Vec<DesignCell> {
    let mut cells = Vec::new();
    for &n in ns {
        for &mechanism in mechanisms {
            for &rate in rates {
                let cell = |method| DesignCell { n, rate, mechanism, method, reps, base_seed };
                if rate == 0.0 {
                    cells.push(cell(Method::Complete));
                } else {
                    cells.extend(methods.iter().map(|&m| cell(m)));
                }
            }
        }
    }
    cells.sort_by_key(DesignCell::key);
    cells.dedup_by(|a, b| a.key() == b.key());
    cells
}

/// Everything about a replicate that is not the design cell itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub population: GcmParams<f64>,
    pub occasions: usize,
    pub aux_noise_sd: f64,
    pub forest: MissForestConfig,
    pub knn: KnnConfig,
    pub fit: FitConfig,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            population: GcmParams::population(),
            occasions: 4,
            aux_noise_sd: DEFAULT_AUX_NOISE_SD,
            forest: MissForestConfig::default(),
            knn: KnnConfig::default(),
            fit: FitConfig::default(),
        }
    }
}

const TAG_DATA: u64 = 0xDA7A;
const TAG_FOREST: u64 = 0xF0_4E57;

/// The complete panel and its amputed version for one replicate. Identical
/// for every method of a condition.
pub fn replicate_data(cell: &DesignCell, rep: usize, settings: &SimSettings) -> Result<(LongData<f64>, LongData<f64>)> {
    let seed = cell.replicate_seed(rep);
    let complete = sample_dataset_with_aux(
        &settings.population,
        cell.n,
        settings.occasions,
        settings.aux_noise_sd,
        seed.derive(TAG_DATA),
    )?;
    let amputed = if cell.rate == 0.0 {
        complete.clone()
    } else {
        ampute(&complete, &MissingSpec::new(cell.mechanism, cell.rate, settings.occasions))?
    };
    Ok((complete, amputed))
}

/// Analyzes one replicate with the cell's method.
pub fn run_replicate(cell: &DesignCell, rep: usize, settings: &SimSettings) -> Result<FitResult<f64>> {
    let (complete, amputed) = replicate_data(cell, rep, settings)?;
    let mut analysed = match cell.method {
        Method::Complete => complete,
        Method::Fiml => amputed,
        Method::Rf => missforest_impute(&amputed, &settings.forest, cell.replicate_seed(rep).derive(TAG_FOREST))?.0,
        Method::Knn => knn_impute(&amputed, &settings.knn)?.0,
    };
    // The auxiliary variable only drives amputation.
    analysed.aux = None;
    fit_fiml(&analysed, None, &settings.fit)
}

/// Reduction of one (cell, parameter) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSummary {
    pub cell: DesignCell,
    pub param: Param,
    pub truth: f64,
    pub bias_kind: BiasKind,
    pub bias: Option<f64>,
    pub mc_se: Option<f64>,
    pub coverage: Option<f64>,
    pub mean_se: Option<f64>,
    pub convergence_rate: f64,
    /// Converged replicates entering the bias.
    pub n_used: usize,
    /// Replicates entering the coverage (converged with a defined SE).
    pub n_covered: usize,
    pub n_failed: usize,
}

/// Reduces per-replicate outcomes of one cell to one summary per parameter.
pub fn summarize(
    cell: &DesignCell,
    outcomes: &[Result<FitResult<f64>>],
    truth: &GcmParams<f64>,
    params: &[Param],
) -> Vec<SimSummary> {
    let converged: Vec<&FitResult<f64>> = outcomes.iter().filter_map(|o| o.as_ref().ok()).filter(|f| f.converged).collect();
    let n_failed = outcomes.iter().filter(|o| o.is_err()).count();
    let convergence_rate = if outcomes.is_empty() { 0.0 } else { converged.len() as f64 / outcomes.len() as f64 };
    params
        .iter()
        .map(|&param| {
            let j = param.index();
            let t = truth.get(param);
            let estimates: Vec<f64> = converged.iter().map(|f| f.estimates.get(param)).collect();
            let intervals: Vec<(f64, f64)> = converged.iter().filter_map(|f| f.ci[j]).collect();
            let ses: Vec<f64> = converged.iter().filter_map(|f| f.se[j]).collect();
            let bias = relative_bias(&estimates, t).ok();
            SimSummary {
                cell: *cell,
                param,
                truth: t,
                bias_kind: if t == 0.0 { BiasKind::Raw } else { BiasKind::Relative },
                bias: bias.map(|b| b.value),
                mc_se: bias.map(|b| b.mc_se),
                coverage: coverage(&intervals, t),
                mean_se: (!ses.is_empty()).then(|| mean(&ses)),
                convergence_rate,
                n_used: estimates.len(),
                n_covered: intervals.len(),
                n_failed,
            }
        })
        .collect()
}

/// Runs every replicate of every cell on a pool of `parallelism` workers and
/// summarizes the summarized parameters. Output order is canonical
/// (N, mechanism, rate, method, parameter) and independent of both the
/// input order and the worker count.
pub fn run_grid(cells: &[DesignCell], parallelism: usize, settings: &SimSettings) -> Result<Vec<SimSummary>> {
    let mut cells = cells.to_vec();
    cells.sort_by_key(DesignCell::key);
    let tasks: Vec<(usize, usize)> =
        cells.iter().enumerate().flat_map(|(c, cell)| (0..cell.reps).map(move |r| (c, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Validation(format!("worker pool: {e}")))?;
    let outcomes: Vec<Result<FitResult<f64>>> =
        pool.install(|| tasks.par_iter().map(|&(c, r)| run_replicate(&cells[c], r, settings)).collect());
    let mut summaries = Vec::new();
    let mut offset = 0;
    for cell in &cells {
        let slice = &outcomes[offset..offset + cell.reps];
        offset += cell.reps;
        summaries.extend(summarize(cell, slice, &settings.population, &Param::SUMMARIZED));
    }
    Ok(summaries)
}
