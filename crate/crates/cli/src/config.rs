//! TOML run configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gcmsim::fiml::{FitConfig, OptimizerConfig};
use gcmsim::forest::MissForestConfig;
use gcmsim::harness::{expand_grid, DesignCell, Method, SimSettings, STUDY_RATES, STUDY_REPS, STUDY_SAMPLE_SIZES};
use gcmsim::knn::{KnnConfig, Scaling, Weighting};
use gcmsim::{GcmParams, Mechanism};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub base_seed: u64,
    pub reps: usize,
    pub parallelism: usize,
    pub output_dir: PathBuf,
    pub occasions: usize,
    pub grid: GridConfig,
    pub population: PopulationConfig,
    pub forest: ForestSection,
    pub knn: KnnSection,
    pub optimizer: OptimizerSection,
    pub aux: AuxSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            base_seed: 20240601,
            reps: STUDY_REPS,
            parallelism: 1,
            output_dir: PathBuf::from("out"),
            occasions: 4,
            grid: GridConfig::default(),
            population: PopulationConfig::default(),
            forest: ForestSection::default(),
            knn: KnnSection::default(),
            optimizer: OptimizerSection::default(),
            aux: AuxSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n: Vec<usize>,
    pub rates: Vec<f64>,
    pub mechanisms: Vec<String>,
    pub methods: Vec<String>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n: STUDY_SAMPLE_SIZES.to_vec(),
            rates: STUDY_RATES.to_vec(),
            mechanisms: vec!["MAR".into(), "MNAR".into()],
            methods: Method::ANALYSES.iter().map(|m| m.name().to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PopulationConfig {
    pub beta_l: f64,
    pub beta_s: f64,
    pub var_l: f64,
    pub var_s: f64,
    pub corr_ls: f64,
    pub var_e: f64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        let p = GcmParams::population();
        PopulationConfig {
            beta_l: p.beta_l,
            beta_s: p.beta_s,
            var_l: p.var_l,
            var_s: p.var_s,
            corr_ls: p.corr_ls,
            var_e: p.var_e,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestSection {
    pub ntree: usize,
    /// Omit for ⌊√p⌋.
    pub mtry: Option<usize>,
    pub min_node: usize,
    pub max_iter: usize,
}

impl Default for ForestSection {
    fn default() -> Self {
        let d = MissForestConfig::default();
        ForestSection { ntree: d.ntree, mtry: d.mtry, min_node: d.min_node, max_iter: d.max_iter }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnnSection {
    pub k: usize,
    /// "uniform" or "inverse_distance".
    pub weighting: String,
    /// "range" or "none".
    pub scaling: String,
}

impl Default for KnnSection {
    fn default() -> Self {
        KnnSection { k: KnnConfig::default().k, weighting: "uniform".into(), scaling: "range".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub max_step: f64,
    /// Confidence level of the reported intervals.
    pub level: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = FitConfig::default();
        OptimizerSection {
            max_iter: d.optimizer.max_iter,
            grad_tol: d.optimizer.grad_tol,
            max_step: d.optimizer.max_step,
            level: d.level,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuxSection {
    pub noise_sd: f64,
}

impl Default for AuxSection {
    fn default() -> Self {
        AuxSection { noise_sd: gcmsim::datagen::DEFAULT_AUX_NOISE_SD }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            bail!("reps must be at least 1");
        }
        if self.occasions < 2 {
            bail!("occasions must be at least 2");
        }
        let g = &self.grid;
        if g.n.is_empty() || g.rates.is_empty() || g.mechanisms.is_empty() || g.methods.is_empty() {
            bail!("every grid list must be non-empty");
        }
        if let Some(n) = g.n.iter().find(|&&n| n < 10) {
            bail!("sample size {n} is below the minimum of 10");
        }
        if let Some(r) = g.rates.iter().find(|r| !(0.0..1.0).contains(*r)) {
            bail!("missing rate {r} is outside [0, 1)");
        }
        self.mechanisms()?;
        self.methods()?;
        self.settings()?;
        if !(self.optimizer.level > 0.0 && self.optimizer.level < 1.0) {
            bail!("confidence level must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn mechanisms(&self) -> Result<Vec<Mechanism>> {
        self.grid.mechanisms.iter().map(|s| Ok(s.parse()?)).collect()
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        self.grid.methods.iter().map(|s| Ok(s.parse()?)).collect()
    }

    pub fn cells(&self) -> Result<Vec<DesignCell>> {
        Ok(expand_grid(&self.grid.n, &self.grid.rates, &self.mechanisms()?, &self.methods()?, self.reps, self.base_seed))
    }

    pub fn settings(&self) -> Result<SimSettings> {
        let p = &self.population;
        let population = GcmParams::new(p.beta_l, p.beta_s, p.var_l, p.var_s, p.corr_ls, p.var_e)?;
        let weighting = match self.knn.weighting.as_str() {
            "uniform" => Weighting::Uniform,
            "inverse_distance" => Weighting::InverseDistance,
            other => bail!("unknown knn weighting {other:?}"),
        };
        let scaling = match self.knn.scaling.as_str() {
            "range" => Scaling::Range,
            "none" => Scaling::None,
            other => bail!("unknown knn scaling {other:?}"),
        };
        if self.knn.k == 0 || self.forest.ntree == 0 || self.forest.min_node == 0 {
            bail!("k, ntree and min_node must be positive");
        }
        if !(self.aux.noise_sd >= 0.0) {
            bail!("aux noise_sd must be non-negative");
        }
        Ok(SimSettings {
            population,
            occasions: self.occasions,
            aux_noise_sd: self.aux.noise_sd,
            forest: MissForestConfig {
                ntree: self.forest.ntree,
                mtry: self.forest.mtry,
                min_node: self.forest.min_node,
                max_iter: self.forest.max_iter,
            },
            knn: KnnConfig { k: self.knn.k, weighting, scaling },
            fit: FitConfig {
                optimizer: OptimizerConfig {
                    max_iter: self.optimizer.max_iter,
                    grad_tol: self.optimizer.grad_tol,
                    max_step: self.optimizer.max_step,
                },
                level: self.optimizer.level,
            },
        })
    }
}
