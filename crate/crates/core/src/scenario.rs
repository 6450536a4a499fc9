//! End-to-end scenario: layout, catalog and hourly demand, with every
//! strategy run on the same draws.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::blocks::{ribbonize_catalog, DataSize};
use crate::delay::{DelayModel, DelayParams};
use crate::demand::{
    generate_catalog, sample_region_users, Catalog, CatalogRanges, DensityProfile, PopularityShape, DEFAULT_DENSITY_E5,
};
use crate::geometry::{
    build_coverage_map, compress_for_overlap, generate_hex_layout, generate_random_layout, Bounds, CoverageMap, Point,
    SbsLayout, DEFAULT_RESOLUTION,
};
use crate::mechanism::{HourReport, Mechanism, MechanismConfig, Strategy};

/// Where the stations are.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum LayoutSpec {
    /// Hexagonal grid with the given compress factor.
    Hex {
        compress: f64,
    },
    /// Hexagonal grid compressed until the overlap percentage is reached.
    HexOverlap {
        overlap: f64,
    },
    /// Uniform positions in a `width × height` box, redrawn until no point
    /// is covered more than three times.
    Random {
        width: f64,
        height: f64,
    },
    Explicit {
        positions: Vec<Point>,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ScenarioConfig {
    pub layout: LayoutSpec,
    /// Coverage radius `R` in metres.
    pub radius: f64,
    /// Number of stations `I`.
    pub stations: usize,
    /// Storage per station `H` in GB.
    pub capacity_gb: f64,
    /// Number of providers `L`.
    pub providers: usize,
    /// Total contents `K`.
    pub contents: usize,
    /// Standard caching size `S` in GB.
    pub block_gb: f64,
    pub omega: f64,
    pub alpha: f64,
    pub delay: DelayParams,
    pub ranges: CatalogRanges,
    pub shape: PopularityShape,
    /// Average user density per hour, in users per 10⁵ m².
    pub density_e5: Vec<f64>,
    pub hours: u32,
    pub seed: u64,
    /// Grid step in metres for region areas.
    pub resolution: f64,
    pub strategies: Vec<Strategy>,
}

impl ScenarioConfig {
    /// Scaled-down setup that finishes in seconds.
    pub fn desk() -> Self {
        Self {
            layout: LayoutSpec::HexOverlap { overlap: 0.54 },
            radius: 50.0,
            stations: 24,
            capacity_gb: 100.0,
            providers: 4,
            contents: 2000,
            block_gb: 2.0,
            omega: 0.0,
            alpha: 1000.0,
            delay: DelayParams::default(),
            ranges: CatalogRanges::default(),
            shape: PopularityShape::default(),
            density_e5: DEFAULT_DENSITY_E5.to_vec(),
            hours: 24,
            seed: 1,
            resolution: DEFAULT_RESOLUTION,
            strategies: Strategy::ALL.to_vec(),
        }
    }

    /// Full-size setup: 10000 contents, 1 TB per station and 20 GB blocks.
    pub fn full() -> Self {
        Self { contents: 10_000, capacity_gb: 1000.0, block_gb: 20.0, ..Self::desk() }
    }

    pub fn block_size(&self) -> DataSize {
        DataSize::from_gb(self.block_gb)
    }

    pub fn mechanism_config(&self) -> MechanismConfig {
        MechanismConfig { block_size: self.block_size(), omega: self.omega, alpha: self.alpha }
    }

    /// Checks every field and reports all offending ones.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut bad = Vec::new();
        let mut check = |ok: bool, field: &'static str, reason: String| {
            if !ok {
                bad.push(FieldError { field, reason });
            }
        };
        check(self.radius > 0.0 && self.radius.is_finite(), "radius", format!("must be positive, got {}", self.radius));
        check(self.stations > 0, "stations", String::from("must be at least 1"));
        check(
            self.capacity_gb >= 0.0 && self.capacity_gb.is_finite(),
            "capacity_gb",
            format!("must be non-negative, got {}", self.capacity_gb),
        );
        check(self.providers > 0, "providers", String::from("must be at least 1"));
        check(
            self.contents >= self.providers,
            "contents",
            format!("need at least one content per provider, got {} for {}", self.contents, self.providers),
        );
        check(
            self.block_size().mb() > 0 && self.block_gb.is_finite(),
            "block_gb",
            format!("must be at least 1 MB, got {}", self.block_gb),
        );
        if let Err(e) =
            self.mechanism_config().validate(&alloc::vec![DataSize::from_gb(self.capacity_gb); self.stations])
        {
            check(false, "capacity_gb", format!("{e}"));
        }
        if let Err(e) = self.delay.validate() {
            check(false, "delay", format!("{e}"));
        }
        if let Err(e) = self.ranges.validate() {
            check(false, "ranges", format!("{e}"));
        }
        check(self.shape.sigma > 0.0, "shape", format!("sigma must be positive, got {}", self.shape.sigma));
        if let Err(e) = DensityProfile::new(self.density_profile_values()) {
            check(false, "density_e5", format!("{e}"));
        }
        check(self.hours > 0, "hours", String::from("must be at least 1"));
        check(
            self.resolution > 0.0 && self.resolution.is_finite(),
            "resolution",
            format!("must be positive, got {}", self.resolution),
        );
        check(!self.strategies.is_empty(), "strategies", String::from("list at least one strategy"));
        match &self.layout {
            LayoutSpec::Hex { compress } => check(
                (crate::geometry::min_compress() - 1e-12..=1.0).contains(compress),
                "layout.compress",
                format!("must lie in [1/sqrt(3), 1], got {compress}"),
            ),
            LayoutSpec::HexOverlap { overlap } => check(
                *overlap >= 0.0 && overlap.is_finite(),
                "layout.overlap",
                format!("must be non-negative, got {overlap}"),
            ),
            LayoutSpec::Random { width, height } => check(
                *width > 0.0 && *height > 0.0,
                "layout",
                format!("box must have positive size, got {width} x {height}"),
            ),
            LayoutSpec::Explicit { positions } => check(
                positions.len() == self.stations,
                "layout.positions",
                format!("expected {} positions, got {}", self.stations, positions.len()),
            ),
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(bad))
        }
    }

    fn density_profile_values(&self) -> Vec<f64> {
        self.density_e5.iter().map(|u| u * 1e-5).collect()
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::desk()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: &'static str,
    pub reason: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid configuration: {}", list(.0))]
    Invalid(Vec<FieldError>),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Demand(#[from] crate::demand::DemandError),
    #[error(transparent)]
    Delay(#[from] crate::delay::DelayError),
    #[error(transparent)]
    Mechanism(#[from] crate::mechanism::MechanismError),
}

fn list(errors: &[FieldError]) -> String {
    let parts: Vec<String> = errors.iter().map(|e| format!("{e}")).collect();
    parts.join("; ")
}

/// One hour of every strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct HourRecord {
    pub hour: u32,
    pub users: u64,
    pub backhaul: f64,
    /// Mean downlink delay over stations.
    pub downlink: f64,
    pub blocks: usize,
    pub dropped_popularity: f64,
    /// In the order of [`ScenarioConfig::strategies`].
    pub reports: Vec<HourReport>,
}

impl HourRecord {
    pub fn report(&self, strategy: Strategy) -> Option<&HourReport> {
        self.reports.iter().find(|r| r.strategy == strategy)
    }
}

/// Daily figures of one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategySummary {
    pub strategy: Strategy,
    /// Mean of `D(t)` over the hours with demand.
    pub delay: Option<f64>,
    /// Sum of `λ^t` over the day.
    pub replacement: f64,
    pub hours_with_demand: u32,
    pub auctions: usize,
    pub iterations: usize,
    /// Largest `iterations / (α N)` over all auctions.
    pub max_bound_ratio: f64,
}

impl StrategySummary {
    pub fn from_hours(strategy: Strategy, hours: &[HourRecord]) -> Self {
        let mut sum = 0.0;
        let mut with_demand = 0u32;
        let mut replacement = 0.0;
        let mut auctions = 0;
        let mut iterations = 0;
        let mut max_bound_ratio: f64 = 0.0;
        for r in hours.iter().filter_map(|h| h.report(strategy)) {
            if let Some(d) = r.delay.value() {
                sum += d;
                with_demand += 1;
            }
            replacement += r.replacement;
            auctions += r.rounds.len();
            for s in &r.rounds {
                iterations += s.iterations;
                max_bound_ratio = max_bound_ratio.max(s.iterations as f64 / s.bound);
            }
        }
        Self {
            strategy,
            delay: (with_demand > 0).then(|| sum / f64::from(with_demand)),
            replacement,
            hours_with_demand: with_demand,
            auctions,
            iterations,
            max_bound_ratio,
        }
    }

    pub fn mean_iterations(&self) -> f64 {
        if self.auctions == 0 {
            0.0
        } else {
            self.iterations as f64 / self.auctions as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub hours: Vec<HourRecord>,
    pub summaries: Vec<StrategySummary>,
}

impl ScenarioOutcome {
    pub fn summary(&self, strategy: Strategy) -> Option<&StrategySummary> {
        self.summaries.iter().find(|s| s.strategy == strategy)
    }

    pub fn daily_delay(&self, strategy: Strategy) -> Option<f64> {
        self.summary(strategy).and_then(|s| s.delay)
    }
}

/// A validated configuration with its geometry and catalog drawn.
#[derive(Debug, Clone)]
pub struct Scenario {
    config: ScenarioConfig,
    layout: SbsLayout,
    map: CoverageMap,
    catalog: Catalog,
    profile: DensityProfile,
    compress: Option<f64>,
}

impl Scenario {
    pub fn prepare(config: &ScenarioConfig) -> Result<Self, ScenarioError> {
        config.validate()?;
        let (layout, compress) = match &config.layout {
            LayoutSpec::Hex { compress } => {
                (generate_hex_layout(config.stations, config.radius, *compress, config.capacity_gb)?, Some(*compress))
            }
            LayoutSpec::HexOverlap { overlap } => {
                let c = compress_for_overlap(config.stations, config.radius, *overlap, config.resolution)?;
                (generate_hex_layout(config.stations, config.radius, c, config.capacity_gb)?, Some(c))
            }
            LayoutSpec::Random { width, height } => (
                generate_random_layout(
                    config.stations,
                    config.radius,
                    Bounds::new(*width, *height),
                    config.capacity_gb,
                    config.seed,
                )?,
                None,
            ),
            LayoutSpec::Explicit { positions } => (
                SbsLayout::new(positions.clone(), config.radius, alloc::vec![config.capacity_gb; config.stations])?,
                None,
            ),
        };
        let map = build_coverage_map(&layout, config.resolution)?;
        let catalog = generate_catalog(config.providers, config.contents, &config.ranges, config.shape, config.seed)?;
        let profile = DensityProfile::new(config.density_profile_values())?;
        Ok(Self { config: config.clone(), layout, map, catalog, profile, compress })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn layout(&self) -> &SbsLayout {
        &self.layout
    }

    pub fn coverage(&self) -> &CoverageMap {
        &self.map
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    /// Compress factor of hexagonal layouts.
    pub fn compress(&self) -> Option<f64> {
        self.compress
    }

    pub fn overlap(&self) -> f64 {
        self.map.overlap()
    }

    pub fn run(&self) -> Result<ScenarioOutcome, ScenarioError> {
        let cfg = &self.config;
        let capacities = alloc::vec![DataSize::from_gb(cfg.capacity_gb); cfg.stations];
        let mut runners = cfg
            .strategies
            .iter()
            .map(|&s| Mechanism::new(s, cfg.mechanism_config(), capacities.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let mut hours = Vec::with_capacity(cfg.hours as usize);
        for t in 1..=cfg.hours {
            let users = sample_region_users(&self.map, &self.profile, t, cfg.seed);
            let model = DelayModel::new(&self.map, &users, cfg.delay)?;
            let blocks = ribbonize_catalog(&self.catalog, cfg.block_size(), t);
            let reports = runners
                .iter_mut()
                .map(|m| m.run_hour(t, &blocks.blocks, &model, blocks.dropped_popularity))
                .collect::<Result<Vec<_>, _>>()?;
            hours.push(HourRecord {
                hour: t,
                users: users.total,
                backhaul: model.backhaul(),
                downlink: (0..cfg.stations).map(|i| model.downlink(i)).sum::<f64>() / cfg.stations as f64,
                blocks: blocks.blocks.len(),
                dropped_popularity: blocks.dropped_popularity,
                reports,
            });
        }
        let summaries = cfg.strategies.iter().map(|&s| StrategySummary::from_hours(s, &hours)).collect();
        Ok(ScenarioOutcome { hours, summaries })
    }
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutcome, ScenarioError> {
    Scenario::prepare(config)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            layout: LayoutSpec::Hex { compress: 0.8 },
            stations: 3,
            capacity_gb: 6.0,
            contents: 120,
            providers: 2,
            block_gb: 1.0,
            hours: 3,
            resolution: 1.0,
            ..ScenarioConfig::desk()
        }
    }

    #[test]
    fn profiles_are_valid() {
        assert_eq!(ScenarioConfig::desk().validate(), Ok(()));
        assert_eq!(ScenarioConfig::full().validate(), Ok(()));
    }

    #[test]
    fn validation_lists_every_bad_field() {
        let cfg = ScenarioConfig { radius: -1.0, hours: 0, density_e5: vec![1.0; 3], ..small() };
        let Err(ScenarioError::Invalid(fields)) = cfg.validate() else { panic!("expected invalid config") };
        let names: Vec<_> = fields.iter().map(|f| f.field).collect();
        assert_eq!(names, ["radius", "density_e5", "hours"]);
    }

    #[test]
    fn too_little_storage_for_the_station_count() {
        let cfg = ScenarioConfig { capacity_gb: 2.0, ..small() };
        let Err(ScenarioError::Invalid(fields)) = cfg.validate() else { panic!("expected invalid config") };
        assert_eq!(fields[0].field, "capacity_gb");
    }

    #[test]
    fn small_run_shapes_and_ordering() {
        let out = run_scenario(&small()).unwrap();
        assert_eq!(out.hours.len(), 3);
        assert!(out.hours.iter().all(|h| h.reports.len() == 4));
        let none = out.daily_delay(Strategy::NoCache).unwrap();
        let mech = out.daily_delay(Strategy::Mechanism).unwrap();
        assert!(mech < none);
        for h in &out.hours {
            let n = h.report(Strategy::NoCache).unwrap().delay.value().unwrap();
            let m = h.report(Strategy::Mechanism).unwrap().delay.value().unwrap();
            assert!(m <= n);
        }
        assert_eq!(out, run_scenario(&small()).unwrap());
    }

    #[test]
    fn summary_recomputes_from_hours() {
        let out = run_scenario(&small()).unwrap();
        for s in &out.summaries {
            let ds: Vec<f64> = out.hours.iter().filter_map(|h| h.report(s.strategy).unwrap().delay.value()).collect();
            let mean = ds.iter().sum::<f64>() / ds.len() as f64;
            assert_eq!(s.delay, Some(mean));
        }
    }
}
