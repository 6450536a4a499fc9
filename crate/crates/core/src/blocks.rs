//! Equal-sized content blocks cut from each provider's "data ribbon".
//!
//! A provider's contents are ordered by descending popularity-to-size ratio
//! and laid end to end; the ribbon is cut from the left into blocks of the
//! standard caching size and the trailing remainder is dropped. Data is
//! addressed in whole megabytes so interval arithmetic on cached ranges is
//! exact.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::demand::{content_popularity, Catalog, Content, PopularityShape};

/// Amount of data in megabytes (1 GB = 1000 MB).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct DataSize(u64);

impl DataSize {
    pub const ZERO: DataSize = DataSize(0);

    pub const fn from_mb(mb: u64) -> Self {
        Self(mb)
    }

    /// Rounds to the nearest megabyte; negative input saturates to zero.
    pub fn from_gb(gb: f64) -> Self {
        Self(libm::round(gb * 1000.0).max(0.0) as u64)
    }

    pub const fn mb(self) -> u64 {
        self.0
    }

    pub fn gb(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    /// Number of whole `unit`s that fit.
    pub fn blocks_of(self, unit: DataSize) -> usize {
        self.0.checked_div(unit.0).unwrap_or(0) as usize
    }
}

impl fmt::Display for DataSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} GB", self.gb())
    }
}

/// Identifies a content across providers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ContentKey {
    pub sp: u32,
    pub id: u32,
}

impl ContentKey {
    pub fn of(content: &Content) -> Self {
        Self { sp: content.sp as u32, id: content.id as u32 }
    }
}

/// Half-open megabyte range `[start, end)` inside one content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ByteRange {
    pub start: u64,
    pub end: u64,
}

impl ByteRange {
    pub const fn new(start: u64, end: u64) -> Self {
        Self { start, end }
    }

    pub const fn len(self) -> u64 {
        self.end.saturating_sub(self.start)
    }

    pub const fn is_empty(self) -> bool {
        self.end <= self.start
    }
}

/// Slice of one content inside a block.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BlockPiece {
    pub content: ContentKey,
    pub range: ByteRange,
    /// Share `η` of the content held by this piece.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ContentBlock {
    pub sp: usize,
    /// Position of the block on its provider's ribbon.
    pub index: usize,
    pub size: DataSize,
    pub pieces: Vec<BlockPiece>,
    /// `φ_{l,r} = Σ η · φ_{l,k}` at the hour the ribbon was cut.
    pub popularity: f64,
}

/// One provider's ribbon at one hour.
#[derive(Debug, Clone, PartialEq)]
pub struct RibbonSnapshot {
    pub hour: u32,
    /// Contents in ribbon order with their offset on the ribbon.
    pub order: Vec<(ContentKey, DataSize)>,
    pub blocks: Vec<ContentBlock>,
    /// Data cut off at the right end.
    pub dropped: DataSize,
    /// Popularity mass of the dropped data.
    pub dropped_popularity: f64,
}

/// Cuts one provider's contents into blocks of `block_size`.
///
/// Contents are ordered by descending `φ / size`, ties by ascending id.
pub fn ribbonize(contents: &[Content], block_size: DataSize, hour: u32, shape: &PopularityShape) -> RibbonSnapshot {
    assert!(block_size.mb() > 0, "block size must be positive");
    let t = f64::from(hour);
    let mut ranked: Vec<(&Content, f64)> = contents.iter().map(|c| (c, content_popularity(c, t, shape))).collect();
    ranked.sort_by(|(a, pa), (b, pb)| {
        let ra = pa / a.size.mb() as f64;
        let rb = pb / b.size.mb() as f64;
        rb.total_cmp(&ra).then(a.sp.cmp(&b.sp)).then(a.id.cmp(&b.id))
    });

    let s = block_size.mb();
    let mut order = Vec::with_capacity(ranked.len());
    let mut blocks = Vec::new();
    let mut pieces: Vec<BlockPiece> = Vec::new();
    let mut filled = 0u64;
    let mut popularity = 0.0;
    let mut offset = 0u64;
    let mut dropped_popularity = 0.0;
    let sp = contents.first().map_or(0, |c| c.sp);

    for &(content, phi) in &ranked {
        order.push((ContentKey::of(content), DataSize::from_mb(offset)));
        let size = content.size.mb();
        offset += size;
        let mut pos = 0u64;
        while pos < size {
            let take = (s - filled).min(size - pos);
            let fraction = take as f64 / size as f64;
            pieces.push(BlockPiece {
                content: ContentKey::of(content),
                range: ByteRange::new(pos, pos + take),
                fraction,
            });
            popularity += fraction * phi;
            pos += take;
            filled += take;
            if filled == s {
                blocks.push(ContentBlock {
                    sp,
                    index: blocks.len(),
                    size: block_size,
                    pieces: core::mem::take(&mut pieces),
                    popularity,
                });
                filled = 0;
                popularity = 0.0;
            }
        }
    }
    if filled > 0 {
        dropped_popularity = popularity;
    }
    RibbonSnapshot { hour, order, blocks, dropped: DataSize::from_mb(filled), dropped_popularity }
}

/// All providers' blocks of one hour, flattened in provider order.
#[derive(Debug, Clone, PartialEq)]
pub struct HourBlocks {
    pub hour: u32,
    pub blocks: Vec<ContentBlock>,
    pub dropped: DataSize,
    pub dropped_popularity: f64,
}

impl HourBlocks {
    pub fn popularity_sum(&self) -> f64 {
        self.blocks.iter().map(|b| b.popularity).sum()
    }
}

pub fn ribbonize_catalog(catalog: &Catalog, block_size: DataSize, hour: u32) -> HourBlocks {
    let mut out = HourBlocks { hour, blocks: Vec::new(), dropped: DataSize::ZERO, dropped_popularity: 0.0 };
    for contents in &catalog.providers {
        let snap = ribbonize(contents, block_size, hour, &catalog.shape);
        out.blocks.extend(snap.blocks);
        out.dropped = DataSize::from_mb(out.dropped.mb() + snap.dropped.mb());
        out.dropped_popularity += snap.dropped_popularity;
    }
    out
}

/// Set of cached megabyte ranges, per content.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RangeSet {
    // sorted, disjoint, non-adjacent ranges per content
    ranges: BTreeMap<ContentKey, Vec<ByteRange>>,
}

impl RangeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn clear(&mut self) {
        self.ranges.clear();
    }

    pub fn insert(&mut self, content: ContentKey, range: ByteRange) {
        if range.is_empty() {
            return;
        }
        let list = self.ranges.entry(content).or_default();
        let mut merged = range;
        // first range that could touch `range`
        let first = list.partition_point(|r| r.end < range.start);
        let mut last = first;
        while last < list.len() && list[last].start <= range.end {
            merged.start = merged.start.min(list[last].start);
            merged.end = merged.end.max(list[last].end);
            last += 1;
        }
        list.splice(first..last, core::iter::once(merged));
    }

    pub fn insert_block(&mut self, block: &ContentBlock) {
        for p in &block.pieces {
            self.insert(p.content, p.range);
        }
    }

    /// Megabytes of `range` present in the set.
    pub fn covered(&self, content: ContentKey, range: ByteRange) -> u64 {
        let Some(list) = self.ranges.get(&content) else {
            return 0;
        };
        let first = list.partition_point(|r| r.end <= range.start);
        list[first..]
            .iter()
            .take_while(|r| r.start < range.end)
            .map(|r| r.end.min(range.end).saturating_sub(r.start.max(range.start)))
            .sum()
    }

    /// Total megabytes in the set.
    pub fn total(&self) -> u64 {
        self.ranges.values().flatten().map(|r| r.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ContentKey, ByteRange)> + '_ {
        self.ranges.iter().flat_map(|(k, v)| v.iter().map(move |r| (*k, *r)))
    }
}

/// Share `ε` of the block's data present in `cached`.
pub fn block_overlap_fraction(block: &ContentBlock, cached: &RangeSet) -> f64 {
    if block.size.mb() == 0 {
        return 0.0;
    }
    let hit: u64 = block.pieces.iter().map(|p| cached.covered(p.content, p.range)).sum();
    (hit as f64 / block.size.mb() as f64).clamp(0.0, 1.0)
}
