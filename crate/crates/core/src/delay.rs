//! Linear delay model and the hourly average delay of an allocation.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::blocks::{ContentBlock, DataSize, RangeSet};
use crate::demand::RegionUserCounts;
use crate::geometry::CoverageMap;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DelayError {
    #[error("delay coefficient {name} must be finite and non-negative, got {value}")]
    BadCoefficient { name: &'static str, value: f64 },
    #[error("storage of station {sbs} would hold {needed} MB, capacity is {capacity} MB")]
    CapacityExceeded { sbs: usize, needed: u64, capacity: u64 },
    #[error("block {block} is already cached at station {sbs}")]
    AlreadyCached { block: usize, sbs: usize },
    #[error("user counts cover {got} regions, coverage map has {want}")]
    RegionMismatch { got: usize, want: usize },
}

/// Delay coefficients in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DelayParams {
    /// Backhaul delay per connected user (`β1`).
    pub backhaul: f64,
    /// Downlink delay per covered user (`β2`).
    pub downlink: f64,
    /// Choosing delay per covering station (`β3`).
    pub choosing: f64,
}

impl Default for DelayParams {
    fn default() -> Self {
        Self { backhaul: 1.0, downlink: 5.0, choosing: 0.0 }
    }
}

impl DelayParams {
    pub fn validate(&self) -> Result<(), DelayError> {
        for (name, value) in [("beta1", self.backhaul), ("beta2", self.downlink), ("beta3", self.choosing)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(DelayError::BadCoefficient { name, value });
            }
        }
        Ok(())
    }
}

pub fn backhaul_delay(users: &RegionUserCounts, params: &DelayParams) -> f64 {
    params.backhaul * users.total as f64
}

pub fn downlink_delay(sbs: usize, users: &RegionUserCounts, params: &DelayParams) -> f64 {
    params.downlink * users.per_sbs[sbs] as f64
}

pub fn choosing_delay(covering: usize, params: &DelayParams) -> f64 {
    params.choosing * covering as f64
}

/// Which blocks are cached where during one hour.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationState {
    hour: u32,
    blocks: usize,
    stations: usize,
    // block-major: gamma[b * stations + i]
    gamma: Vec<bool>,
    ranges: Vec<RangeSet>,
    used: Vec<DataSize>,
    capacity: Vec<DataSize>,
}

impl AllocationState {
    pub fn new(hour: u32, blocks: usize, capacity: Vec<DataSize>) -> Self {
        let stations = capacity.len();
        Self {
            hour,
            blocks,
            stations,
            gamma: vec![false; blocks * stations],
            ranges: vec![RangeSet::new(); stations],
            used: vec![DataSize::ZERO; stations],
            capacity,
        }
    }

    /// Empties every storage and resizes for a new hour's blocks.
    pub fn reset(&mut self, hour: u32, blocks: usize) {
        self.hour = hour;
        self.blocks = blocks;
        self.gamma.clear();
        self.gamma.resize(blocks * self.stations, false);
        self.ranges.iter_mut().for_each(RangeSet::clear);
        self.used.iter_mut().for_each(|u| *u = DataSize::ZERO);
    }

    pub fn hour(&self) -> u32 {
        self.hour
    }

    pub fn block_count(&self) -> usize {
        self.blocks
    }

    pub fn station_count(&self) -> usize {
        self.stations
    }

    pub fn is_cached(&self, block: usize, sbs: usize) -> bool {
        self.gamma[block * self.stations + sbs]
    }

    /// Caching flags of one block over all stations.
    pub fn row(&self, block: usize) -> &[bool] {
        &self.gamma[block * self.stations..(block + 1) * self.stations]
    }

    pub fn used(&self, sbs: usize) -> DataSize {
        self.used[sbs]
    }

    pub fn capacity(&self, sbs: usize) -> DataSize {
        self.capacity[sbs]
    }

    pub fn capacities(&self) -> &[DataSize] {
        &self.capacity
    }

    pub fn free(&self, sbs: usize) -> DataSize {
        DataSize::from_mb(self.capacity[sbs].mb() - self.used[sbs].mb())
    }

    pub fn cached_ranges(&self, sbs: usize) -> &RangeSet {
        &self.ranges[sbs]
    }

    pub fn cached_blocks(&self, sbs: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.blocks).filter(move |&b| self.is_cached(b, sbs))
    }

    pub fn cached_count(&self) -> usize {
        self.gamma.iter().filter(|&&g| g).count()
    }

    /// Writes `block` (index `index` in this hour's block list) into `sbs`.
    pub fn cache(&mut self, index: usize, block: &ContentBlock, sbs: usize) -> Result<(), DelayError> {
        if self.is_cached(index, sbs) {
            return Err(DelayError::AlreadyCached { block: index, sbs });
        }
        let needed = self.used[sbs].mb() + block.size.mb();
        if needed > self.capacity[sbs].mb() {
            return Err(DelayError::CapacityExceeded { sbs, needed, capacity: self.capacity[sbs].mb() });
        }
        self.gamma[index * self.stations + sbs] = true;
        self.used[sbs] = DataSize::from_mb(needed);
        self.ranges[sbs].insert_block(block);
        Ok(())
    }
}

/// Average delay of an hour, or a marker that nobody requested anything.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HourDelay {
    Delay(f64),
    NoDemand,
}

impl HourDelay {
    pub fn value(self) -> Option<f64> {
        match self {
            HourDelay::Delay(d) => Some(d),
            HourDelay::NoDemand => None,
        }
    }
}

/// Delay terms of one hour, precomputed from the user draw.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayModel {
    params: DelayParams,
    back: f64,
    down: Vec<f64>,
    covering: Vec<Vec<usize>>,
    region_users: Vec<u64>,
    choose: Vec<f64>,
    sbs_regions: Vec<Vec<usize>>,
    total_users: u64,
}

impl DelayModel {
    pub fn new(map: &CoverageMap, users: &RegionUserCounts, params: DelayParams) -> Result<Self, DelayError> {
        params.validate()?;
        if users.per_region.len() != map.regions().len() {
            return Err(DelayError::RegionMismatch { got: users.per_region.len(), want: map.regions().len() });
        }
        let covering: Vec<Vec<usize>> = map.regions().iter().map(|r| r.covering.clone()).collect();
        Ok(Self {
            params,
            back: backhaul_delay(users, &params),
            down: (0..map.sbs_count()).map(|i| downlink_delay(i, users, &params)).collect(),
            choose: covering.iter().map(|f| choosing_delay(f.len(), &params)).collect(),
            covering,
            region_users: users.per_region.clone(),
            sbs_regions: (0..map.sbs_count()).map(|i| map.regions_of(i).to_vec()).collect(),
            total_users: users.total,
        })
    }

    pub fn params(&self) -> &DelayParams {
        &self.params
    }

    /// `θ_back`.
    pub fn backhaul(&self) -> f64 {
        self.back
    }

    /// `θ_down` of station `sbs`.
    pub fn downlink(&self, sbs: usize) -> f64 {
        self.down[sbs]
    }

    pub fn region_count(&self) -> usize {
        self.covering.len()
    }

    pub fn station_count(&self) -> usize {
        self.down.len()
    }

    pub fn covering(&self, region: usize) -> &[usize] {
        &self.covering[region]
    }

    pub fn region_users(&self, region: usize) -> u64 {
        self.region_users[region]
    }

    pub fn regions_of(&self, sbs: usize) -> &[usize] {
        &self.sbs_regions[sbs]
    }

    pub fn total_users(&self) -> u64 {
        self.total_users
    }

    /// Best serving station for `block` in `region` and its delay without the
    /// choosing term; ties go to the lowest station index.
    pub fn best_path(&self, block: usize, region: usize, alloc: &AllocationState) -> (usize, f64) {
        let row = alloc.row(block);
        let mut best = (usize::MAX, f64::INFINITY);
        for &i in &self.covering[region] {
            let d = self.down[i] + if row[i] { 0.0 } else { self.back };
            if d < best.1 || (d == best.1 && i < best.0) {
                best = (i, d);
            }
        }
        best
    }

    pub fn request_delay(&self, block: usize, region: usize, alloc: &AllocationState) -> f64 {
        self.best_path(block, region, alloc).1 + self.choose[region]
    }

    /// Delay reduction summed over users if `block` were added at `sbs`,
    /// before weighting by block popularity. Zero when already cached there.
    pub fn marginal_gain(&self, block: usize, sbs: usize, alloc: &AllocationState) -> f64 {
        if alloc.is_cached(block, sbs) {
            return 0.0;
        }
        let candidate = self.down[sbs];
        self.sbs_regions[sbs]
            .iter()
            .map(|&j| {
                let drop = self.best_path(block, j, alloc).1 - candidate;
                if drop > 0.0 {
                    drop * self.region_users[j] as f64
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Users-weighted delay of a block, `Σ_j request_delay · U_j`.
    pub fn block_delay(&self, block: usize, alloc: &AllocationState) -> f64 {
        (0..self.covering.len()).map(|j| self.request_delay(block, j, alloc) * self.region_users[j] as f64).sum()
    }

    pub fn average_delay(&self, alloc: &AllocationState, blocks: &[ContentBlock]) -> HourDelay {
        let phi_sum: f64 = blocks.iter().map(|b| b.popularity).sum();
        if self.total_users == 0 || phi_sum <= 0.0 {
            return HourDelay::NoDemand;
        }
        let weighted: f64 = blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.popularity > 0.0)
            .map(|(n, b)| b.popularity * self.block_delay(n, alloc))
            .sum();
        HourDelay::Delay(weighted / (phi_sum * self.total_users as f64))
    }

    /// Average delay when nothing is cached.
    pub fn uncached_delay(&self) -> HourDelay {
        if self.total_users == 0 {
            return HourDelay::NoDemand;
        }
        let sum: f64 = (0..self.covering.len())
            .map(|j| {
                let down = self.covering[j].iter().map(|&i| self.down[i]).fold(f64::INFINITY, f64::min);
                (down + self.back + self.choose[j]) * self.region_users[j] as f64
            })
            .sum();
        HourDelay::Delay(sum / self.total_users as f64)
    }
}
