//! Content catalogs with time-varying log-normal popularity, and per-region
//! user counts drawn from an hourly density profile.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::blocks::DataSize;
use crate::geometry::CoverageMap;
use crate::seed;

pub const HOURS_PER_DAY: usize = 24;

/// Mean user density per hour of day, in units of 1e-5 users per m².
pub const DEFAULT_DENSITY_E5: [f64; HOURS_PER_DAY] = [
    380.0, 210.0, 110.0, 110.0, 140.0, 200.0, 300.0, 650.0, 1100.0, 1260.0, 1400.0, 1570.0, 1530.0, 1370.0, 1310.0,
    1250.0, 900.0, 800.0, 940.0, 1100.0, 1200.0, 1070.0, 610.0, 450.0,
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DemandError {
    #[error("density profile needs {HOURS_PER_DAY} entries, got {0}")]
    ProfileLength(usize),
    #[error("density for hour {hour} must be finite and non-negative, got {value}")]
    NegativeDensity { hour: usize, value: f64 },
    #[error("range `{name}` is empty or invalid: [{lo}, {hi}]")]
    BadRange { name: &'static str, lo: f64, hi: f64 },
    #[error("need 1 <= sp_count <= content_count, got {sp_count} providers for {content_count} contents")]
    BadCounts { sp_count: usize, content_count: usize },
    #[error("popularity shape needs sigma > 0, got {0}")]
    BadShape(f64),
}

/// Hourly mean user density `u(t)`, users per m². Entry 0 is hour 1.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DensityProfile {
    per_hour: Vec<f64>,
}

impl DensityProfile {
    pub fn new(per_hour: Vec<f64>) -> Result<Self, DemandError> {
        if per_hour.len() != HOURS_PER_DAY {
            return Err(DemandError::ProfileLength(per_hour.len()));
        }
        if let Some((hour, &value)) = per_hour.iter().enumerate().find(|(_, u)| !(**u >= 0.0 && u.is_finite())) {
            return Err(DemandError::NegativeDensity { hour: hour + 1, value });
        }
        Ok(Self { per_hour })
    }

    pub fn uniform(density: f64) -> Result<Self, DemandError> {
        Self::new(alloc::vec![density; HOURS_PER_DAY])
    }

    /// Density at hour `t ≥ 1`; multi-day runs wrap around the 24 entries.
    pub fn at_hour(&self, t: u32) -> f64 {
        let idx = (t.max(1) as usize - 1) % HOURS_PER_DAY;
        self.per_hour[idx]
    }

    pub fn values(&self) -> &[f64] {
        &self.per_hour
    }
}

impl Default for DensityProfile {
    fn default() -> Self {
        Self { per_hour: DEFAULT_DENSITY_E5.iter().map(|u| u * 1e-5).collect() }
    }
}

/// Shape parameters of the log-normal popularity envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PopularityShape {
    pub mu: f64,
    pub sigma: f64,
}

impl Default for PopularityShape {
    fn default() -> Self {
        Self { mu: 1.0, sigma: 0.5 }
    }
}

impl PopularityShape {
    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let z = libm::log(x) - self.mu;
        libm::exp(-z * z / (2.0 * self.sigma * self.sigma)) / (libm::sqrt(2.0 * PI) * self.sigma * x)
    }

    /// Mode of the pdf, `exp(μ − σ²)`.
    pub fn mode(&self) -> f64 {
        libm::exp(self.mu - self.sigma * self.sigma)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Content {
    pub sp: usize,
    pub id: usize,
    pub size: DataSize,
    /// Popularity scale `a`.
    pub scale: f64,
    /// Lifespan `b`, hours.
    pub lifespan: f64,
    /// Upload hour `t0`, may be negative.
    pub upload: f64,
}

/// `φ = a · f((t − t0) / b)`; zero up to and including the upload hour.
pub fn content_popularity(content: &Content, t: f64, shape: &PopularityShape) -> f64 {
    if t <= content.upload {
        return 0.0;
    }
    content.scale * shape.pdf((t - content.upload) / content.lifespan)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn check(&self, name: &'static str) -> Result<(), DemandError> {
        if self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi {
            Ok(())
        } else {
            Err(DemandError::BadRange { name, lo: self.lo, hi: self.hi })
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        self.lo + (self.hi - self.lo) * rng.random::<f64>()
    }
}

/// Uniform ranges for the per-content parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct CatalogRanges {
    /// Gigabytes.
    pub size: Interval,
    pub scale: Interval,
    pub lifespan: Interval,
    pub upload: Interval,
}

impl Default for CatalogRanges {
    fn default() -> Self {
        Self {
            size: Interval::new(0.1, 1.0),
            scale: Interval::new(0.0, 3.0),
            lifespan: Interval::new(4.0, 12.0),
            upload: Interval::new(-75.0, 25.0),
        }
    }
}

impl CatalogRanges {
    pub fn validate(&self) -> Result<(), DemandError> {
        self.size.check("size")?;
        self.scale.check("scale")?;
        self.lifespan.check("lifespan")?;
        self.upload.check("upload")?;
        if self.size.lo <= 0.0 {
            return Err(DemandError::BadRange { name: "size", lo: self.size.lo, hi: self.size.hi });
        }
        if self.scale.lo < 0.0 {
            return Err(DemandError::BadRange { name: "scale", lo: self.scale.lo, hi: self.scale.hi });
        }
        if self.lifespan.lo <= 0.0 {
            return Err(DemandError::BadRange { name: "lifespan", lo: self.lifespan.lo, hi: self.lifespan.hi });
        }
        Ok(())
    }
}

/// Contents grouped by service provider.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Catalog {
    pub shape: PopularityShape,
    pub providers: Vec<Vec<Content>>,
}

impl Catalog {
    pub fn sp_count(&self) -> usize {
        self.providers.len()
    }

    pub fn content_count(&self) -> usize {
        self.providers.iter().map(Vec::len).sum()
    }

    pub fn contents(&self) -> impl Iterator<Item = &Content> {
        self.providers.iter().flatten()
    }

    /// `φ_sum(t)` over every content.
    pub fn popularity_sum(&self, t: f64) -> f64 {
        self.contents().map(|c| content_popularity(c, t, &self.shape)).sum()
    }
}

/// Draws a catalog of `content_count` contents split near-evenly across
/// `sp_count` providers.
///
/// Each content has its own random stream keyed by `(sp, id)`, so a larger
/// catalog drawn from the same seed extends a smaller one.
pub fn generate_catalog(
    sp_count: usize,
    content_count: usize,
    ranges: &CatalogRanges,
    shape: PopularityShape,
    seed: u64,
) -> Result<Catalog, DemandError> {
    if sp_count == 0 || content_count < sp_count {
        return Err(DemandError::BadCounts { sp_count, content_count });
    }
    if shape.sigma.is_nan() || shape.sigma <= 0.0 {
        return Err(DemandError::BadShape(shape.sigma));
    }
    ranges.validate()?;
    let base = content_count / sp_count;
    let extra = content_count % sp_count;
    let providers = (0..sp_count)
        .map(|sp| {
            let count = base + usize::from(sp < extra);
            (0..count)
                .map(|id| {
                    let mut rng = seed::rng_at(seed, &[seed::stream::CATALOG, sp as u64, id as u64]);
                    let size = DataSize::from_gb(ranges.size.sample(&mut rng));
                    Content {
                        sp,
                        id,
                        size: DataSize::from_mb(size.mb().max(1)),
                        scale: ranges.scale.sample(&mut rng),
                        lifespan: ranges.lifespan.sample(&mut rng),
                        upload: ranges.upload.sample(&mut rng),
                    }
                })
                .collect()
        })
        .collect();
    Ok(Catalog { shape, providers })
}

/// User counts of one hour.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionUserCounts {
    pub hour: u32,
    /// `U_j` per simplest region.
    pub per_region: Vec<u64>,
    /// `U^{t,i}` per station.
    pub per_sbs: Vec<u64>,
    /// `U_sum`.
    pub total: u64,
}

impl RegionUserCounts {
    /// Aggregates region counts per station and in total.
    pub fn from_regions(map: &CoverageMap, hour: u32, per_region: Vec<u64>) -> Self {
        assert_eq!(per_region.len(), map.regions().len(), "one count per region");
        let mut per_sbs = alloc::vec![0u64; map.sbs_count()];
        for (region, &u) in map.regions().iter().zip(&per_region) {
            for &i in &region.covering {
                per_sbs[i] += u;
            }
        }
        let total = per_region.iter().sum();
        Self { hour, per_region, per_sbs, total }
    }
}

/// Draws `U_j ~ Poisson(u(t) · area_j)` independently per region.
///
/// The stream of each region is keyed by hour and covering set, not by
/// region position.
pub fn sample_region_users(map: &CoverageMap, profile: &DensityProfile, t: u32, seed: u64) -> RegionUserCounts {
    let density = profile.at_hour(t);
    let per_region = map
        .regions()
        .iter()
        .map(|region| {
            let mean = density * region.area;
            if mean <= 0.0 {
                return 0;
            }
            let mut rng = seed::rng_at(seed, &[seed::stream::USERS, u64::from(t), seed::key_of(&region.covering)]);
            let draw: f64 = Poisson::new(mean).expect("finite positive mean").sample(&mut rng);
            draw as u64
        })
        .collect();
    RegionUserCounts::from_regions(map, t, per_region)
}
