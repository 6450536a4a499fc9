//! Hourly caching decisions: the serial auctions of storage blocks and the
//! three comparison strategies.
//!
//! Each hour starts from empty storages. Round `j` auctions the `j`-th
//! storage block of every station that has one; every content block bids its
//! marginal delay reduction minus a penalty for data the station did not hold
//! in the previous hour.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::auction::{market_match, quantize, AuctionError};
use crate::blocks::{block_overlap_fraction, ContentBlock, DataSize, RangeSet};
use crate::delay::{AllocationState, DelayError, DelayModel, HourDelay};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MechanismError {
    #[error("standard caching size must be positive")]
    ZeroBlockSize,
    #[error("additional price coefficient must be finite and non-negative, got {0}")]
    BadOmega(f64),
    #[error("quantification accuracy must be finite and at least 1, got {0}")]
    BadAlpha(f64),
    #[error("{stations} stations exceed the {blocks} storage blocks of station {sbs}")]
    TooManyStations { stations: usize, sbs: usize, blocks: usize },
    #[error("delay model has {model} stations, allocation has {alloc}")]
    StationMismatch { model: usize, alloc: usize },
    #[error(transparent)]
    Allocation(#[from] DelayError),
    #[error(transparent)]
    Auction(#[from] AuctionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Strategy {
    Mechanism,
    NoCache,
    HighestPopularity,
    Greedy,
}

impl Strategy {
    pub const ALL: [Strategy; 4] =
        [Strategy::Mechanism, Strategy::NoCache, Strategy::HighestPopularity, Strategy::Greedy];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Mechanism => "mechanism",
            Strategy::NoCache => "no_cache",
            Strategy::HighestPopularity => "highest_popularity",
            Strategy::Greedy => "greedy",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MechanismConfig {
    /// Standard caching size `S`.
    pub block_size: DataSize,
    /// Additional price coefficient `ω`.
    pub omega: f64,
    /// Quantification accuracy `α`.
    pub alpha: f64,
}

impl MechanismConfig {
    pub fn validate(&self, capacities: &[DataSize]) -> Result<(), MechanismError> {
        if self.block_size.mb() == 0 {
            return Err(MechanismError::ZeroBlockSize);
        }
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(MechanismError::BadOmega(self.omega));
        }
        if !(self.alpha.is_finite() && self.alpha >= 1.0) {
            return Err(MechanismError::BadAlpha(self.alpha));
        }
        // a block wins at most one storage per round, so every station
        // needs at least as many rounds as there are stations
        for (sbs, h) in capacities.iter().enumerate() {
            let blocks = h.blocks_of(self.block_size);
            if blocks < capacities.len() {
                return Err(MechanismError::TooManyStations { stations: capacities.len(), sbs, blocks });
            }
        }
        Ok(())
    }

    /// Storage blocks per station.
    pub fn slots(&self, capacities: &[DataSize]) -> Vec<usize> {
        capacities.iter().map(|h| h.blocks_of(self.block_size)).collect()
    }
}

/// Statistics of one auction round.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RoundStats {
    pub round: usize,
    /// Rows of the auction after padding.
    pub bidders: usize,
    pub objects: usize,
    pub iterations: usize,
    /// `α · N`.
    pub bound: f64,
    pub welfare: f64,
    pub max_price: f64,
    pub written: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HourReport {
    pub hour: u32,
    pub strategy: Strategy,
    pub delay: HourDelay,
    /// Replacement percentage `λ^t`.
    pub replacement: f64,
    pub cached_blocks: usize,
    pub block_count: usize,
    pub dropped_popularity: f64,
    pub rounds: Vec<RoundStats>,
}

impl HourReport {
    pub fn iterations(&self) -> usize {
        self.rounds.iter().map(|r| r.iterations).sum()
    }
}

/// Penalty `Δp = ω (1 − ε) θ_back`.
pub fn additional_price(overlap: f64, omega: f64, backhaul: f64) -> f64 {
    omega * (1.0 - overlap) * backhaul
}

/// `λ^t` of an allocation against the previous hour's cached ranges, with
/// each station's share measured against its capacity.
pub fn replacement_percentage(alloc: &AllocationState, blocks: &[ContentBlock], previous: &[RangeSet]) -> f64 {
    let stations = alloc.station_count();
    if stations == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for (i, before) in previous.iter().enumerate().take(stations) {
        let capacity = alloc.capacity(i).mb();
        if capacity == 0 {
            continue;
        }
        let fresh: f64 = alloc
            .cached_blocks(i)
            .map(|b| blocks[b].size.mb() as f64 * (1.0 - block_overlap_fraction(&blocks[b], before)))
            .sum();
        sum += fresh / capacity as f64;
    }
    sum / stations as f64
}

/// One strategy's state carried from hour to hour.
#[derive(Debug, Clone)]
pub struct Mechanism {
    strategy: Strategy,
    config: MechanismConfig,
    alloc: AllocationState,
    previous: Vec<RangeSet>,
}

impl Mechanism {
    pub fn new(strategy: Strategy, config: MechanismConfig, capacities: Vec<DataSize>) -> Result<Self, MechanismError> {
        config.validate(&capacities)?;
        let stations = capacities.len();
        Ok(Self {
            strategy,
            config,
            alloc: AllocationState::new(0, 0, capacities),
            previous: vec![RangeSet::new(); stations],
        })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn allocation(&self) -> &AllocationState {
        &self.alloc
    }

    /// Cached ranges at the end of the last completed hour.
    pub fn previous_ranges(&self) -> &[RangeSet] {
        &self.previous
    }

    pub fn run_hour(
        &mut self,
        hour: u32,
        blocks: &[ContentBlock],
        model: &DelayModel,
        dropped_popularity: f64,
    ) -> Result<HourReport, MechanismError> {
        if model.station_count() != self.alloc.station_count() {
            return Err(MechanismError::StationMismatch {
                model: model.station_count(),
                alloc: self.alloc.station_count(),
            });
        }
        self.alloc.reset(hour, blocks.len());
        let rounds = match self.strategy {
            Strategy::NoCache => Vec::new(),
            Strategy::HighestPopularity => {
                self.cache_highest_popularity(blocks)?;
                Vec::new()
            }
            Strategy::Greedy => {
                self.cache_greedy(blocks, model)?;
                Vec::new()
            }
            Strategy::Mechanism => self.run_auctions(blocks, model)?,
        };
        let replacement = replacement_percentage(&self.alloc, blocks, &self.previous);
        for (i, r) in self.previous.iter_mut().enumerate() {
            r.clone_from(self.alloc.cached_ranges(i));
        }
        Ok(HourReport {
            hour,
            strategy: self.strategy,
            delay: model.average_delay(&self.alloc, blocks),
            replacement,
            cached_blocks: self.alloc.cached_count(),
            block_count: blocks.len(),
            dropped_popularity,
            rounds,
        })
    }

    fn run_auctions(&mut self, blocks: &[ContentBlock], model: &DelayModel) -> Result<Vec<RoundStats>, MechanismError> {
        let n = blocks.len();
        let stations = self.alloc.station_count();
        let slots = self.config.slots(self.alloc.capacities());
        let rounds = slots.iter().copied().max().unwrap_or(0);

        // penalties depend only on last hour's contents, so fix them now
        let mut penalty = vec![0.0; n * stations];
        if self.config.omega > 0.0 {
            for (b, block) in blocks.iter().enumerate() {
                for i in 0..stations {
                    let eps = block_overlap_fraction(block, &self.previous[i]);
                    penalty[b * stations + i] = additional_price(eps, self.config.omega, model.backhaul());
                }
            }
        }
        let mut gain = vec![0.0; n * stations];
        let refresh = |gain: &mut [f64], b: usize, alloc: &AllocationState| {
            for i in 0..stations {
                gain[b * stations + i] = blocks[b].popularity * model.marginal_gain(b, i, alloc);
            }
        };
        for b in 0..n {
            refresh(&mut gain, b, &self.alloc);
        }

        let mut stats = Vec::with_capacity(rounds);
        for round in 1..=rounds {
            let objects: Vec<usize> = (0..stations).filter(|&i| slots[i] >= round).collect();
            let m = objects.len();
            let rows = n.max(m);
            let mut values = vec![0.0; rows * m];
            for b in 0..n {
                for (col, &i) in objects.iter().enumerate() {
                    let k = b * stations + i;
                    values[b * m + col] = (gain[k] - penalty[k]).max(0.0);
                }
            }
            let matrix = quantize(&values, rows, m, self.config.alpha)?;
            let result = market_match(&matrix)?;
            let mut written = 0;
            let mut winners = Vec::new();
            for (b, s) in result.assignment.iter().enumerate() {
                let Some(col) = *s else { continue };
                if b >= n || matrix.unit(b, col) == 0 {
                    continue;
                }
                self.alloc.cache(b, &blocks[b], objects[col])?;
                winners.push(b);
                written += 1;
            }
            for &b in &winners {
                refresh(&mut gain, b, &self.alloc);
            }
            stats.push(RoundStats {
                round,
                bidders: rows,
                objects: m,
                iterations: result.iterations,
                bound: self.config.alpha * rows as f64,
                welfare: result.welfare(),
                max_price: result.prices().into_iter().fold(0.0, f64::max),
                written,
            });
        }
        Ok(stats)
    }

    fn cache_highest_popularity(&mut self, blocks: &[ContentBlock]) -> Result<(), MechanismError> {
        let mut order: Vec<usize> = (0..blocks.len()).filter(|&b| blocks[b].popularity > 0.0).collect();
        order.sort_by(|&a, &b| blocks[b].popularity.total_cmp(&blocks[a].popularity).then(a.cmp(&b)));
        let slots = self.config.slots(self.alloc.capacities());
        for (i, &k) in slots.iter().enumerate() {
            for &b in order.iter().take(k) {
                self.alloc.cache(b, &blocks[b], i)?;
            }
        }
        Ok(())
    }

    fn cache_greedy(&mut self, blocks: &[ContentBlock], model: &DelayModel) -> Result<(), MechanismError> {
        let n = blocks.len();
        let stations = self.alloc.station_count();
        let mut free = self.config.slots(self.alloc.capacities());
        let mut value = vec![0.0; n * stations];
        // best open station of every block, lowest index on ties
        let mut best: Vec<Option<(usize, f64)>> = vec![None; n];
        let best_of = |row: &[f64], free: &[usize]| -> Option<(usize, f64)> {
            let mut top: Option<(usize, f64)> = None;
            for (i, &v) in row.iter().enumerate() {
                if free[i] > 0 && v > top.map_or(0.0, |(_, t)| t) {
                    top = Some((i, v));
                }
            }
            top
        };
        for b in 0..n {
            let row = &mut value[b * stations..(b + 1) * stations];
            for (i, v) in row.iter_mut().enumerate() {
                *v = blocks[b].popularity * model.marginal_gain(b, i, &self.alloc);
            }
            best[b] = best_of(row, &free);
        }
        loop {
            let mut pick: Option<(usize, usize, f64)> = None;
            for (b, entry) in best.iter().enumerate() {
                if let Some((i, v)) = *entry {
                    if v > pick.map_or(0.0, |(_, _, t)| t) {
                        pick = Some((b, i, v));
                    }
                }
            }
            let Some((b, i, _)) = pick else { break };
            self.alloc.cache(b, &blocks[b], i)?;
            free[i] -= 1;
            let row = &mut value[b * stations..(b + 1) * stations];
            for (j, v) in row.iter_mut().enumerate() {
                *v = blocks[b].popularity * model.marginal_gain(b, j, &self.alloc);
            }
            best[b] = best_of(row, &free);
            if free[i] == 0 {
                for c in 0..n {
                    if matches!(best[c], Some((j, _)) if j == i) {
                        best[c] = best_of(&value[c * stations..(c + 1) * stations], &free);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{BlockPiece, ByteRange, ContentKey};
    use crate::delay::DelayParams;
    use crate::demand::RegionUserCounts;
    use crate::geometry::CoverageMap;
    use proptest::prelude::{prop_assert, proptest};

    const S: DataSize = DataSize::from_mb(10);

    fn block(id: u32, popularity: f64) -> ContentBlock {
        ContentBlock {
            sp: 0,
            index: id as usize,
            size: S,
            pieces: vec![BlockPiece { content: ContentKey { sp: 0, id }, range: ByteRange::new(0, 10), fraction: 1.0 }],
            popularity,
        }
    }

    fn model(regions: Vec<(Vec<usize>, f64)>, stations: usize, users: Vec<u64>) -> DelayModel {
        let map = CoverageMap::from_regions(stations, regions).unwrap();
        let counts = RegionUserCounts::from_regions(&map, 1, users);
        DelayModel::new(&map, &counts, DelayParams::default()).unwrap()
    }

    fn config(omega: f64) -> MechanismConfig {
        MechanismConfig { block_size: S, omega, alpha: 1000.0 }
    }

    fn two_station() -> DelayModel {
        model(vec![(vec![0], 1.0), (vec![0, 1], 1.0), (vec![1], 1.0)], 2, vec![10, 20, 12])
    }

    #[test]
    fn penalty_formula() {
        assert_eq!(additional_price(1.0, 3.0, 10.0), 0.0);
        assert_eq!(additional_price(0.3, 0.0, 10.0), 0.0);
        assert_eq!(additional_price(0.25, 2.0, 10.0), 15.0);
    }

    #[test]
    fn config_checks() {
        let caps = vec![DataSize::from_mb(20); 3];
        assert!(matches!(config(0.0).validate(&caps), Err(MechanismError::TooManyStations { .. })));
        assert!(config(0.0).validate(&caps[..2]).is_ok());
        assert!(matches!(
            MechanismConfig { alpha: 0.5, ..config(0.0) }.validate(&caps[..1]),
            Err(MechanismError::BadAlpha(_))
        ));
        assert!(matches!(config(-1.0).validate(&caps[..1]), Err(MechanismError::BadOmega(_))));
    }

    #[test]
    fn single_station_degenerates_to_popularity() {
        let m = model(vec![(vec![0], 1.0)], 1, vec![30]);
        let blocks: Vec<_> = [0.2, 0.9, 0.5, 0.7, 0.1].iter().enumerate().map(|(k, &p)| block(k as u32, p)).collect();
        let mut mech = Mechanism::new(Strategy::Mechanism, config(0.0), vec![DataSize::from_mb(30)]).unwrap();
        mech.run_hour(1, &blocks, &m, 0.0).unwrap();
        let cached: Vec<_> = mech.allocation().cached_blocks(0).collect();
        assert_eq!(cached, vec![1, 2, 3]);
    }

    #[test]
    fn first_hour_full_storage_replaces_everything() {
        let m = two_station();
        let blocks: Vec<_> = (0..6).map(|k| block(k, 1.0 + k as f64)).collect();
        let caps = vec![DataSize::from_mb(20); 2];
        let mut mech = Mechanism::new(Strategy::Mechanism, config(0.0), caps).unwrap();
        let r = mech.run_hour(1, &blocks, &m, 0.0).unwrap();
        assert_eq!(r.cached_blocks, 4);
        assert_eq!(r.replacement, 1.0);
        // identical second hour with a heavy penalty keeps everything
        let mut heavy = Mechanism { config: config(1e6), ..mech.clone() };
        let r2 = heavy.run_hour(2, &blocks, &m, 0.0).unwrap();
        assert_eq!(r2.replacement, 0.0);
        let r2 = mech.run_hour(2, &blocks, &m, 0.0).unwrap();
        assert_eq!(r2.replacement, 0.0);
    }

    #[test]
    fn replacement_counts_new_halves() {
        let blocks = [block(0, 1.0), block(1, 1.0)];
        let mut alloc = AllocationState::new(1, 2, vec![S; 2]);
        alloc.cache(0, &blocks[0], 0).unwrap();
        alloc.cache(1, &blocks[1], 1).unwrap();
        let mut prev = vec![RangeSet::new(); 2];
        prev[0].insert(ContentKey { sp: 0, id: 0 }, ByteRange::new(0, 5));
        prev[1].insert(ContentKey { sp: 0, id: 1 }, ByteRange::new(5, 10));
        assert_eq!(replacement_percentage(&alloc, &blocks, &prev), 0.5);
        prev[0].insert_block(&blocks[0]);
        prev[1].insert_block(&blocks[1]);
        assert_eq!(replacement_percentage(&alloc, &blocks, &prev), 0.0);
    }

    #[test]
    fn baselines_on_overlapping_pair() {
        // almost every user sits in the lens
        let m = model(vec![(vec![0], 1.0), (vec![0, 1], 1.0), (vec![1], 1.0)], 2, vec![1, 50, 1]);
        let blocks = [block(0, 5.0), block(1, 4.9), block(2, 3.0)];
        let caps = vec![DataSize::from_mb(20); 2];
        let mut hp = Mechanism::new(Strategy::HighestPopularity, config(0.0), caps.clone()).unwrap();
        let mut gr = Mechanism::new(Strategy::Greedy, config(0.0), caps.clone()).unwrap();
        let mut nc = Mechanism::new(Strategy::NoCache, config(0.0), caps).unwrap();
        let dh = hp.run_hour(1, &blocks, &m, 0.0).unwrap().delay.value().unwrap();
        let dg = gr.run_hour(1, &blocks, &m, 0.0).unwrap().delay.value().unwrap();
        let dn = nc.run_hour(1, &blocks, &m, 0.0).unwrap().delay.value().unwrap();
        let (h, g) = (hp.allocation(), gr.allocation());
        assert!(h.is_cached(0, 0) && h.is_cached(0, 1) && h.is_cached(1, 0) && h.is_cached(1, 1));
        assert!(!h.is_cached(2, 0) && !h.is_cached(2, 1));
        assert!(g.is_cached(2, 0) || g.is_cached(2, 1));
        assert!(dg < dh && dh < dn);
        assert_eq!(nc.allocation().cached_count(), 0);
    }

    #[test]
    fn greedy_first_pick_is_global_argmax() {
        let m = two_station();
        let blocks = [block(0, 2.0), block(1, 3.0), block(2, 1.0)];
        let empty = AllocationState::new(1, 3, vec![S; 2]);
        let mut best = (0, 0, f64::MIN);
        for (b, block) in blocks.iter().enumerate() {
            for i in 0..2 {
                let v = block.popularity * m.marginal_gain(b, i, &empty);
                if v > best.2 {
                    best = (b, i, v);
                }
            }
        }
        let mut gr = Mechanism::new(Strategy::Greedy, config(0.0), vec![DataSize::from_mb(20); 2]).unwrap();
        gr.run_hour(1, &blocks, &m, 0.0).unwrap();
        assert!(gr.allocation().is_cached(best.0, best.1));
    }

    #[test]
    fn round_matches_welfare_maximum() {
        let m = two_station();
        let blocks = [block(0, 2.0), block(1, 3.0), block(2, 1.5)];
        let empty = AllocationState::new(1, 3, vec![S; 2]);
        let v = |b: usize, i: usize| blocks[b].popularity * m.marginal_gain(b, i, &empty);
        let mut best = 0.0f64;
        for x in 0..3 {
            for y in 0..3 {
                if x != y {
                    best = best.max(v(x, 0) + v(y, 1));
                }
            }
        }
        let mut mech = Mechanism::new(Strategy::Mechanism, config(0.0), vec![DataSize::from_mb(20); 2]).unwrap();
        let r = mech.run_hour(1, &blocks, &m, 0.0).unwrap();
        assert_eq!(r.rounds[0].objects, 2);
        assert!((r.rounds[0].welfare - best).abs() <= best * 2e-3);
    }

    #[test]
    fn zero_demand_writes_nothing() {
        let m = model(vec![(vec![0], 1.0)], 1, vec![0]);
        let blocks = [block(0, 1.0)];
        let mut mech = Mechanism::new(Strategy::Mechanism, config(0.0), vec![S]).unwrap();
        let r = mech.run_hour(1, &blocks, &m, 0.0).unwrap();
        assert_eq!(r.cached_blocks, 0);
        assert_eq!(r.delay, HourDelay::NoDemand);
    }

    fn scenario() -> impl proptest::strategy::Strategy<Value = (Vec<u64>, Vec<f64>, Vec<f64>, f64)> {
        (
            proptest::collection::vec(0u64..50, 6),
            proptest::collection::vec(0.0f64..3.0, 3..10),
            proptest::collection::vec(0.0f64..3.0, 3..10),
            0.0f64..4.0,
        )
    }

    proptest! {
        #[test]
        fn hourly_invariants((users, phi1, phi2, omega) in scenario()) {
            let m = model(
                vec![(vec![0], 1.0), (vec![0, 1], 1.0), (vec![1], 1.0), (vec![1, 2], 1.0), (vec![0, 1, 2], 1.0), (vec![2], 1.0)],
                3,
                users,
            );
            let caps = vec![DataSize::from_mb(30), DataSize::from_mb(40), DataSize::from_mb(30)];
            let mut mech = Mechanism::new(Strategy::Mechanism, config(omega), caps.clone()).unwrap();
            let mut none = Mechanism::new(Strategy::NoCache, config(omega), caps.clone()).unwrap();
            for (t, phi) in [(1u32, &phi1), (2, &phi2)] {
                let blocks: Vec<_> = phi.iter().enumerate().map(|(k, &p)| block(k as u32, p)).collect();
                let r = mech.run_hour(t, &blocks, &m, 0.0).unwrap();
                let base = none.run_hour(t, &blocks, &m, 0.0).unwrap();
                prop_assert!((0.0..=1.0).contains(&r.replacement));
                for (i, cap) in caps.iter().enumerate() {
                    prop_assert!(mech.allocation().used(i) <= *cap);
                }
                for s in &r.rounds {
                    prop_assert!(s.iterations as f64 <= s.bound);
                }
                if let (Some(d), Some(b)) = (r.delay.value(), base.delay.value()) {
                    prop_assert!(d <= b * (1.0 + 1e-12));
                }
            }
        }
    }
}
