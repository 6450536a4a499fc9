//! Auction-based content caching for overlapping small-cell base stations.
//!
//! The crate is `no_std` (with `alloc`) and holds every algorithm of the
//! simulator: coverage geometry of the base-station disks, time-varying
//! demand, the content-block ("data ribbon") transformation, the delay model,
//! the market matching auction and the hourly mechanism with its baselines.
//! File formats, sweeps and the command line live in the `cellcache` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod auction;
pub mod blocks;
pub mod delay;
pub mod demand;
pub mod geometry;
pub mod mechanism;
pub mod scenario;
pub mod seed;

pub use auction::{market_match, quantize, MatchingResult, ValuationMatrix};
pub use blocks::{ribbonize, ContentBlock, DataSize, RangeSet};
pub use delay::{AllocationState, DelayModel, DelayParams, HourDelay};
pub use demand::{Catalog, Content, DensityProfile, PopularityShape, RegionUserCounts};
pub use geometry::{CoverageMap, Point, SbsLayout, SimplestRegion};
pub use mechanism::{HourReport, Mechanism, MechanismConfig, Strategy};
pub use scenario::{run_scenario, LayoutSpec, Scenario, ScenarioConfig, ScenarioOutcome};
