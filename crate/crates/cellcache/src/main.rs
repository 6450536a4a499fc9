use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cellcache::chart::{delay_chart, replacement_chart};
use cellcache::config::{config_to_toml, load_config, Profile};
use cellcache::oracle::geometry_report;
use cellcache::report::{blocks_csv, write_run};
use cellcache::sweep::{run_sweep, Axis, SweepSpec};
use cellcache_core::blocks::ribbonize_catalog;
use cellcache_core::{Scenario, ScenarioConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cellcache", version, about = "Auction-based caching simulator for overlapping small cells")]
struct Cli {
    /// Worker threads for sweeps (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and list every invalid field.
    Validate { config: PathBuf },
    /// Simulate one scenario and write its reports.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the block table of these hours.
        #[arg(long = "blocks-hour", value_delimiter = ',')]
        blocks_hours: Vec<u32>,
    },
    /// Run a scenario over a grid of values of one parameter.
    Sweep {
        config: PathBuf,
        /// capacity (H), contents (K), overlap (O), compress (c), omega, alpha or choosing (beta3).
        #[arg(long)]
        axis: String,
        /// Comma-separated values, or `start:end:step`.
        #[arg(long)]
        values: String,
        /// Replicate seeds, counted up from the configured seed.
        #[arg(long, default_value_t = 1)]
        seeds: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also draw the medians as SVG charts.
        #[arg(long)]
        svg: bool,
    },
    /// Compare grid-sampled and Monte-Carlo patch areas with the closed forms.
    OracleGeometry {
        #[arg(long, default_value_t = 50.0)]
        radius: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [0.6, 0.7, 0.8, 0.9])]
        compress: Vec<f64>,
        #[arg(long, default_value_t = 0.25)]
        resolution: f64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Rings of the grid used for patch counts.
        #[arg(long, default_value_t = 10)]
        rings: usize,
    },
    /// Print a complete scenario file for a profile.
    Config {
        #[arg(long, default_value = "desk")]
        profile: String,
    },
}

fn parse_values(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| s.trim().parse::<f64>().with_context(|| format!("not a number: {s:?}"));
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, end, step] => {
            let (start, end, step) = (num(start)?, num(end)?, num(step)?);
            if !(step > 0.0 && end >= start) {
                bail!("range {text:?} needs start <= end and a positive step");
            }
            let n = ((end - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|k| start + k as f64 * step).collect())
        }
        [_] => text.split(',').map(num).collect(),
        _ => bail!("expected a comma-separated list or start:end:step, got {text:?}"),
    }
}

fn load(path: &Path) -> Result<ScenarioConfig> {
    let cfg = load_config(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn run(config: &Path, out: &Path, blocks_hours: &[u32]) -> Result<()> {
    let cfg = load(config)?;
    let scenario = Scenario::prepare(&cfg)?;
    eprintln!(
        "{} stations, overlap {:.4}{}, {} contents",
        cfg.stations,
        scenario.overlap(),
        scenario.compress().map(|c| format!(" (c = {c:.5})")).unwrap_or_default(),
        scenario.catalog().content_count()
    );
    let outcome = scenario.run()?;
    let files = write_run(out, &scenario, &outcome)?;
    for &t in blocks_hours {
        let blocks = ribbonize_catalog(scenario.catalog(), cfg.block_size(), t);
        fs::write(out.join(format!("blocks_h{t}.csv")), blocks_csv(&blocks)?)?;
    }
    println!("{:<20} {:>14} {:>12} {:>16}", "strategy", "daily delay ms", "replacement", "mean iterations");
    for s in &outcome.summaries {
        let delay = s.delay.map(|d| format!("{d:.3}")).unwrap_or_else(|| String::from("-"));
        println!("{:<20} {:>14} {:>12.4} {:>16.2}", s.strategy.name(), delay, s.replacement, s.mean_iterations());
    }
    eprintln!("wrote {} to {}", files.join(", "), out.display());
    Ok(())
}

fn sweep(config: &Path, axis: &str, values: &str, seeds: usize, out: &Path, svg: bool) -> Result<()> {
    let cfg = load(config)?;
    let spec = SweepSpec { axis: axis.parse()?, values: parse_values(values)?, seeds };
    let result = run_sweep(&cfg, &spec)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("sweep.csv"), result.to_csv()?)?;
    fs::write(out.join("sweep_timing.csv"), result.timing_csv()?)?;
    if svg {
        fs::write(out.join(format!("sweep_{}_delay.svg", spec.axis)), delay_chart(&result))?;
        if spec.axis == Axis::Omega {
            fs::write(out.join("sweep_omega_replacement.svg"), replacement_chart(&result))?;
        }
    }
    eprintln!("{} points written to {}", result.points.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match &cli.command {
        Command::Validate { config } => load(config).map(|cfg| {
            println!("ok: {} stations, {} contents, {} hours", cfg.stations, cfg.contents, cfg.hours);
        }),
        Command::Run { config, out, blocks_hours } => run(config, out, blocks_hours),
        Command::Sweep { config, axis, values, seeds, out, svg } => sweep(config, axis, values, *seeds, out, *svg),
        Command::OracleGeometry { radius, compress, resolution, samples, seed, rings } => {
            geometry_report(*radius, compress, *resolution, *samples, *seed, *rings)
                .map(|text| print!("{text}"))
                .map_err(Into::into)
        }
        Command::Config { profile } => profile
            .parse::<Profile>()
            .map_err(anyhow::Error::from)
            .and_then(|p| Ok(config_to_toml(&p.config())?))
            .map(|text| print!("{text}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
