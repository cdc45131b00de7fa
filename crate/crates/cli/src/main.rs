//! `gcmsim`: generate panels, run the simulation grid, plot the summaries.

// NaN-rejecting comparisons are written as `!(x > y)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod plot;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gcmsim::harness::{replicate_data, run_grid, DESK_REPS};
use gcmsim::report::{format_sig6, read_summary, write_data, write_summary};
use gcmsim::Param;
use log::{info, warn};

use crate::config::RunConfig;
use crate::plot::{panels, Metric};

#[derive(Parser)]
#[command(name = "gcmsim", version, about = "Missing-data simulation study for linear growth curve models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write simulated (and amputed) panels as CSV.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
        /// Output directory; defaults to `<output_dir>/data`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replicates to write per condition.
        #[arg(long, default_value_t = 1)]
        datasets: usize,
    },
    /// Run the grid and write the summary CSV.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Summary path; defaults to `<output_dir>/summary.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw one SVG per (mechanism, N) from a summary CSV.
    Plot {
        #[arg(long)]
        summary: PathBuf,
        /// Parameter name, e.g. beta_S.
        #[arg(long)]
        parameter: String,
        /// bias or coverage.
        #[arg(long, default_value = "bias")]
        metric: String,
        /// Nominal interval level, drawn as the coverage reference.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration; the built-in design is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override replicates per cell.
    #[arg(long)]
    reps: Option<usize>,
    /// Worker threads.
    #[arg(long)]
    parallelism: Option<usize>,
    /// Desk-scale preset (200 replicates per cell) unless --reps is given.
    #[arg(long)]
    desk_scale: bool,
    /// Print the expanded design and exit.
    #[arg(long)]
    dry_run: bool,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if self.desk_scale {
            cfg.reps = DESK_REPS;
        }
        if let Some(r) = self.reps {
            cfg.reps = r;
        }
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        if let Some(p) = self.parallelism {
            cfg.parallelism = p;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_plan(cfg: &RunConfig) -> Result<()> {
    let cells = cfg.cells()?;
    let mut out = std::io::stdout().lock();
    for (i, cell) in cells.iter().enumerate() {
        writeln!(out, "{:>4}  {cell}", i + 1)?;
    }
    let reps: usize = cells.iter().map(|c| c.reps).sum();
    writeln!(out, "{} cells, {reps} replicates, parallelism {}", cells.len(), cfg.parallelism)?;
    Ok(())
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn cmd_generate(common: &CommonArgs, out: Option<PathBuf>, datasets: usize) -> Result<()> {
    let cfg = common.resolve()?;
    if common.dry_run {
        return print_plan(&cfg);
    }
    let settings = cfg.settings()?;
    let dir = out.unwrap_or_else(|| cfg.output_dir.join("data"));
    let mut seen = Vec::new();
    for cell in cfg.cells()? {
        let condition = (cell.n, cell.mechanism, cell.rate.to_bits());
        if seen.contains(&condition) {
            continue;
        }
        seen.push(condition);
        for rep in 0..datasets {
            let (_, amputed) = replicate_data(&cell, rep, &settings)?;
            let name = format!("data_N{}_{}_rate{}_rep{}.csv", cell.n, cell.mechanism, format_sig6(cell.rate), rep);
            let path = dir.join(name);
            let mut w = create_file(&path)?;
            write_data(&amputed, &mut w)?;
            w.flush()?;
            info!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_run(common: &CommonArgs, out: Option<PathBuf>) -> Result<()> {
    let cfg = common.resolve()?;
    if common.dry_run {
        return print_plan(&cfg);
    }
    let cells = cfg.cells()?;
    let settings = cfg.settings()?;
    info!("running {} cells with {} worker(s)", cells.len(), cfg.parallelism);
    let summaries = run_grid(&cells, cfg.parallelism, &settings)?;
    for s in summaries.iter().filter(|s| s.param == Param::SUMMARIZED[0] && s.n_failed > 0) {
        warn!("{}: {} of {} replicates failed", s.cell, s.n_failed, s.cell.reps);
    }
    let path = out.unwrap_or_else(|| cfg.output_dir.join("summary.csv"));
    let mut w = create_file(&path)?;
    write_summary(&summaries, &mut w)?;
    w.flush()?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_plot(summary: &Path, parameter: &str, metric: &str, level: f64, out: &Path) -> Result<()> {
    let Some(param) = Param::from_name(parameter) else {
        let known: Vec<&str> = Param::ALL.iter().map(|p| p.name()).collect();
        bail!("unknown parameter {parameter:?}; expected one of {}", known.join(", "));
    };
    let metric = Metric::parse(metric)?;
    let file = File::open(summary).with_context(|| format!("opening {}", summary.display()))?;
    let records = read_summary(file)?;
    let charts = panels(&records, param, metric, level)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for chart in charts {
        let path = out.join(format!("{}.svg", chart.file_stem));
        fs::write(&path, chart.svg).with_context(|| format!("writing {}", path.display()))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Generate { common, out, datasets } => cmd_generate(&common, out, datasets),
        Command::Run { common, out } => cmd_run(&common, out),
        Command::Plot { summary, parameter, metric, level, out } => cmd_plot(&summary, &parameter, &metric, level, &out),
    }
}
