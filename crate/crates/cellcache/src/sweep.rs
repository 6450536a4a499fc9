//! Parameter sweeps over one configuration axis with replicate seeds.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use cellcache_core::scenario::{ScenarioError, StrategySummary};
use cellcache_core::{LayoutSpec, Scenario, ScenarioConfig, Strategy};
use rayon::prelude::*;

use crate::report::ReportError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Storage per station `H`, GB.
    Capacity,
    /// Catalog size `K`.
    Contents,
    /// Overlap percentage `O` of a hexagonal layout.
    Overlap,
    /// Compress factor `c` of a hexagonal layout.
    Compress,
    Omega,
    Alpha,
    /// Choosing-delay coefficient `β3`.
    Choosing,
}

impl Axis {
    pub const ALL: [Axis; 7] =
        [Axis::Capacity, Axis::Contents, Axis::Overlap, Axis::Compress, Axis::Omega, Axis::Alpha, Axis::Choosing];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Capacity => "capacity",
            Axis::Contents => "contents",
            Axis::Overlap => "overlap",
            Axis::Compress => "compress",
            Axis::Omega => "omega",
            Axis::Alpha => "alpha",
            Axis::Choosing => "choosing",
        }
    }

    /// Axis label for charts.
    pub fn label(self) -> &'static str {
        match self {
            Axis::Capacity => "storage per station H (GB)",
            Axis::Contents => "number of contents K",
            Axis::Overlap => "overlapping percentage O",
            Axis::Compress => "compress factor c",
            Axis::Omega => "additional price coefficient ω",
            Axis::Alpha => "quantification accuracy α",
            Axis::Choosing => "choosing-delay coefficient β3",
        }
    }

    /// `config` with this axis set to `value`.
    pub fn apply(self, config: &ScenarioConfig, value: f64) -> Result<ScenarioConfig, SweepError> {
        let mut cfg = config.clone();
        match self {
            Axis::Capacity => cfg.capacity_gb = value,
            Axis::Contents => {
                if !(value >= 0.0 && value.fract() == 0.0) {
                    return Err(SweepError::NotACount(value));
                }
                cfg.contents = value as usize;
            }
            Axis::Overlap => cfg.layout = LayoutSpec::HexOverlap { overlap: value },
            Axis::Compress => cfg.layout = LayoutSpec::Hex { compress: value },
            Axis::Omega => cfg.omega = value,
            Axis::Alpha => cfg.alpha = value,
            Axis::Choosing => cfg.delay.choosing = value,
        }
        Ok(cfg)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "capacity" | "H" => Axis::Capacity,
            "contents" | "K" => Axis::Contents,
            "overlap" | "O" => Axis::Overlap,
            "compress" | "c" => Axis::Compress,
            "omega" => Axis::Omega,
            "alpha" => Axis::Alpha,
            "choosing" | "beta3" => Axis::Choosing,
            other => return Err(SweepError::UnknownAxis(other.to_string())),
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("unknown axis {0:?}, expected one of capacity (H), contents (K), overlap (O), compress (c), omega, alpha, choosing (beta3)")]
    UnknownAxis(String),
    #[error("the sweep grid is empty")]
    EmptyGrid,
    #[error("at least one seed is required")]
    NoSeeds,
    #[error("contents must be a whole number, got {0}")]
    NotACount(f64),
    #[error("{axis} = {value}: {source}")]
    Point {
        axis: Axis,
        value: f64,
        #[source]
        source: ScenarioError,
    },
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    /// Replicates use seeds `config.seed + index`.
    pub seeds: usize,
}

impl SweepSpec {
    /// Builds the configuration of every point, checking each one.
    pub fn configs(&self, base: &ScenarioConfig) -> Result<Vec<SweepPointConfig>, SweepError> {
        if self.values.is_empty() {
            return Err(SweepError::EmptyGrid);
        }
        if self.seeds == 0 {
            return Err(SweepError::NoSeeds);
        }
        let mut out = Vec::with_capacity(self.values.len() * self.seeds);
        for (value_index, &value) in self.values.iter().enumerate() {
            let cfg = self.axis.apply(base, value)?;
            cfg.validate().map_err(|source| SweepError::Point { axis: self.axis, value, source })?;
            for replicate in 0..self.seeds {
                let config = ScenarioConfig { seed: base.seed + replicate as u64, ..cfg.clone() };
                out.push(SweepPointConfig { value_index, value, replicate, config });
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPointConfig {
    pub value_index: usize,
    pub value: f64,
    pub replicate: usize,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value_index: usize,
    pub value: f64,
    pub seed: u64,
    pub overlap: f64,
    pub compress: Option<f64>,
    pub summaries: Vec<StrategySummary>,
    pub wall: Duration,
}

impl SweepPoint {
    pub fn summary(&self, strategy: Strategy) -> Option<&StrategySummary> {
        self.summaries.iter().find(|s| s.strategy == strategy)
    }

    pub fn delay(&self, strategy: Strategy) -> Option<f64> {
        self.summary(strategy).and_then(|s| s.delay)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub strategies: Vec<Strategy>,
    /// Sorted by axis position, then seed.
    pub points: Vec<SweepPoint>,
}

/// Runs every `(value, seed)` point in parallel.
pub fn run_sweep(base: &ScenarioConfig, spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    let configs = spec.configs(base)?;
    let mut points = configs
        .par_iter()
        .map(|p| {
            let start = Instant::now();
            let err = |source| SweepError::Point { axis: spec.axis, value: p.value, source };
            let scenario = Scenario::prepare(&p.config).map_err(err)?;
            let outcome = scenario.run().map_err(err)?;
            Ok(SweepPoint {
                value_index: p.value_index,
                value: p.value,
                seed: p.config.seed,
                overlap: scenario.overlap(),
                compress: scenario.compress(),
                summaries: outcome.summaries,
                wall: start.elapsed(),
            })
        })
        .collect::<Result<Vec<_>, SweepError>>()?;
    points.sort_by_key(|p| (p.value_index, p.seed));
    Ok(SweepResult { axis: spec.axis, values: spec.values.clone(), strategies: base.strategies.clone(), points })
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 { xs[n / 2] } else { (xs[n / 2 - 1] + xs[n / 2]) / 2.0 })
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl SweepResult {
    pub fn at(&self, value_index: usize) -> impl Iterator<Item = &SweepPoint> {
        self.points.iter().filter(move |p| p.value_index == value_index)
    }

    /// Daily delay of `strategy` along the axis for one seed.
    pub fn delays_for_seed(&self, strategy: Strategy, seed: u64) -> Vec<Option<f64>> {
        (0..self.values.len()).map(|i| self.at(i).find(|p| p.seed == seed).and_then(|p| p.delay(strategy))).collect()
    }

    pub fn seeds(&self) -> Vec<u64> {
        let mut seeds: Vec<u64> = self.points.iter().map(|p| p.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        seeds
    }

    /// Median over seeds of `f` at every axis position.
    pub fn medians(&self, f: impl Fn(&SweepPoint) -> Option<f64>) -> Vec<Option<f64>> {
        (0..self.values.len()).map(|i| median(self.at(i).filter_map(&f).collect())).collect()
    }

    fn columns(&self) -> Vec<String> {
        let mut header: Vec<String> = ["axis", "value", "seed", "overlap", "compress"].map(String::from).to_vec();
        header.extend(self.strategies.iter().map(|s| format!("delay_{s}")));
        header.extend(self.strategies.iter().map(|s| format!("replacement_{s}")));
        header.extend(["mean_iterations", "max_bound_ratio"].map(String::from));
        header
    }

    fn metrics(&self, p: &SweepPoint) -> Vec<Option<f64>> {
        let mut m: Vec<Option<f64>> = vec![Some(p.overlap), p.compress];
        m.extend(self.strategies.iter().map(|&s| p.delay(s)));
        m.extend(self.strategies.iter().map(|&s| p.summary(s).map(|x| x.replacement)));
        let mech = p.summary(Strategy::Mechanism);
        m.push(mech.map(StrategySummary::mean_iterations));
        m.push(mech.map(|s| s.max_bound_ratio));
        m
    }

    /// Per-seed rows followed, for each axis value, by a `median` row.
    pub fn to_csv(&self) -> Result<String, SweepError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.columns()).map_err(ReportError::from)?;
        for (i, &value) in self.values.iter().enumerate() {
            let rows: Vec<Vec<Option<f64>>> = self.at(i).map(|p| self.metrics(p)).collect();
            for (p, m) in self.at(i).zip(&rows) {
                let mut rec = vec![self.axis.to_string(), value.to_string(), p.seed.to_string()];
                rec.extend(m.iter().map(|v| cell(*v)));
                w.write_record(rec).map_err(ReportError::from)?;
            }
            let mut rec = vec![self.axis.to_string(), value.to_string(), String::from("median")];
            let width = rows.first().map_or(0, Vec::len);
            rec.extend((0..width).map(|k| cell(median(rows.iter().filter_map(|r| r[k]).collect()))));
            w.write_record(rec).map_err(ReportError::from)?;
        }
        let bytes = w.into_inner().map_err(|e| ReportError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Wall-clock time per point. Kept apart from the results, which must
    /// not depend on timing.
    pub fn timing_csv(&self) -> Result<String, SweepError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["axis", "value", "seed", "wall_ms"]).map_err(ReportError::from)?;
        for p in &self.points {
            w.write_record([
                self.axis.to_string(),
                p.value.to_string(),
                p.seed.to_string(),
                format!("{:.3}", p.wall.as_secs_f64() * 1e3),
            ])
            .map_err(ReportError::from)?;
        }
        let bytes = w.into_inner().map_err(|e| ReportError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
