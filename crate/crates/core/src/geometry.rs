//! Base-station layouts and the partition of their coverage disks into
//! simplest regions.
//!
//! Regions are extracted by sampling cell centres of a regular grid, one
//! scanline at a time: every disk contributes one open interval per row and a
//! sweep over the interval end points yields runs of cells with identical
//! covering sets. The closed-form hexagonal patch areas in
//! [`hex_patch_areas`] serve as the exact reference for the sampled areas.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_6, PI};

use rand::Rng;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::seed;

/// Largest number of disks allowed to cover one point.
pub const MAX_COVER_DEPTH: usize = 3;

/// Default sampling resolution, metres.
pub const DEFAULT_RESOLUTION: f64 = 0.25;

/// Rejection budget for random layouts.
pub const RANDOM_LAYOUT_ATTEMPTS: usize = 10_000;

/// Smallest admissible compress factor, `1/√3`.
pub fn min_compress() -> f64 {
    1.0 / libm::sqrt(3.0)
}

/// Largest admissible patch angle, `arccos(1/√3)`.
pub fn max_theta() -> f64 {
    libm::acos(min_compress())
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("a layout needs at least one base station")]
    NoStations,
    #[error("radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("capacity of station {index} must be positive, got {value}")]
    BadCapacity { index: usize, value: f64 },
    #[error("{positions} positions but {capacities} capacities")]
    LengthMismatch { positions: usize, capacities: usize },
    #[error("compress factor {0} outside [1/sqrt(3), 1]")]
    CompressOutOfDomain(f64),
    #[error("angle {0} outside (0, arccos(1/sqrt(3)))")]
    ThetaOutOfDomain(f64),
    #[error("{depth} disks overlap near ({x:.3}, {y:.3}); at most 3 are allowed")]
    DepthExceeded { depth: usize, x: f64, y: f64 },
    #[error("no admissible random layout after {0} attempts; enlarge the bounds")]
    RejectionBudgetExhausted(usize),
    #[error("resolution must be positive, got {0}")]
    BadResolution(f64),
    #[error("overlap target {target} unreachable; achievable range is [0, {max:.4}]")]
    OverlapUnreachable { target: f64, max: f64 },
    #[error("invalid region {index}: {reason}")]
    BadRegion { index: usize, reason: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist2(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(self, other: Point) -> f64 {
        libm::sqrt(self.dist2(other))
    }
}

/// Axis-aligned sampling rectangle for random layouts.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Bounds {
    pub min: Point,
    pub max: Point,
}

impl Bounds {
    pub fn new(width: f64, height: f64) -> Self {
        Self { min: Point::new(0.0, 0.0), max: Point::new(width, height) }
    }
}

/// Positions, common radius and storage capacities of the base stations.
///
/// Construction validates that no point of the plane lies strictly inside
/// more than [`MAX_COVER_DEPTH`] disks.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize))]
pub struct SbsLayout {
    positions: Vec<Point>,
    radius: f64,
    capacities: Vec<f64>,
}

impl SbsLayout {
    pub fn new(positions: Vec<Point>, radius: f64, capacities: Vec<f64>) -> Result<Self, GeometryError> {
        if positions.is_empty() {
            return Err(GeometryError::NoStations);
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeometryError::BadRadius(radius));
        }
        if positions.len() != capacities.len() {
            return Err(GeometryError::LengthMismatch { positions: positions.len(), capacities: capacities.len() });
        }
        if let Some((index, &value)) = capacities.iter().enumerate().find(|(_, h)| h.is_nan() || **h <= 0.0) {
            return Err(GeometryError::BadCapacity { index, value });
        }
        let (depth, at) = max_cover_depth(&positions, radius);
        if depth > MAX_COVER_DEPTH {
            return Err(GeometryError::DepthExceeded { depth, x: at.x, y: at.y });
        }
        Ok(Self { positions, radius, capacities })
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Storage capacity per station, gigabytes.
    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    pub fn count(&self) -> usize {
        self.positions.len()
    }
}

/// Number of disks containing `p` in their open interior.
fn depth_at(positions: &[Point], r2: f64, p: Point) -> usize {
    let strict = r2 * (1.0 - 1e-9);
    positions.iter().filter(|c| c.dist2(p) < strict).count()
}

/// Maximum coverage depth of the disk arrangement and a witness point.
///
/// The deepest face either touches a crossing of two circles (probed just
/// inside both disks) or is a whole disk that no circle crosses (probed at
/// its centre).
pub fn max_cover_depth(positions: &[Point], radius: f64) -> (usize, Point) {
    let r2 = radius * radius;
    let mut best = (0usize, Point::new(0.0, 0.0));
    let consider = |p: Point, best: &mut (usize, Point)| {
        let d = depth_at(positions, r2, p);
        if d > best.0 {
            *best = (d, p);
        }
    };
    for &c in positions {
        consider(c, &mut best);
    }
    let probe = 1e-7 * radius;
    for (a_idx, &a) in positions.iter().enumerate() {
        for &b in &positions[a_idx + 1..] {
            let d = a.dist(b);
            // coincident or tangent (or disjoint) pairs bound no lens
            if d <= 0.0 || d >= 2.0 * radius * (1.0 - 1e-12) {
                continue;
            }
            let mid = Point::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
            let h = libm::sqrt((r2 - d * d / 4.0).max(0.0));
            let (ux, uy) = ((b.x - a.x) / d, (b.y - a.y) / d);
            for sign in [1.0, -1.0] {
                let p = Point::new(mid.x - sign * uy * h, mid.y + sign * ux * h);
                // step from the crossing towards the lens centre
                let q = Point::new(p.x + sign * uy * probe, p.y - sign * ux * probe);
                consider(q, &mut best);
            }
        }
    }
    best
}

/// Hexagonal-cell layout: centres on a triangular lattice with spacing
/// `2·R·c`, filled ring by ring around a central station.
pub fn generate_hex_layout(
    count: usize,
    radius: f64,
    compress: f64,
    capacity: f64,
) -> Result<SbsLayout, GeometryError> {
    if count == 0 {
        return Err(GeometryError::NoStations);
    }
    if !(compress >= min_compress() - 1e-12 && compress <= 1.0) {
        return Err(GeometryError::CompressOutOfDomain(compress));
    }
    let spacing = 2.0 * radius * compress;
    let positions = hex_lattice(count)
        .into_iter()
        .map(|(q, r)| {
            let (q, r) = (q as f64, r as f64);
            Point::new(spacing * (q + r / 2.0), spacing * libm::sqrt(3.0) / 2.0 * r)
        })
        .collect();
    SbsLayout::new(positions, radius, vec![capacity; count])
}

/// Axial coordinates of the first `count` cells of a hexagonal spiral.
fn hex_lattice(count: usize) -> Vec<(i64, i64)> {
    const DIRS: [(i64, i64); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];
    let mut cells = Vec::with_capacity(count);
    cells.push((0, 0));
    let mut ring = 1i64;
    while cells.len() < count {
        let mut cur = (DIRS[4].0 * ring, DIRS[4].1 * ring);
        'ring: for dir in DIRS {
            for _ in 0..ring {
                if cells.len() == count {
                    break 'ring;
                }
                cells.push(cur);
                cur = (cur.0 + dir.0, cur.1 + dir.1);
            }
        }
        ring += 1;
    }
    cells
}

/// Number of stations in a hexagonal grid with `rings` complete rings.
pub fn hex_count_for_rings(rings: usize) -> usize {
    1 + 3 * rings * (rings + 1)
}

/// Uniform random layout in `bounds`; whole layouts containing a 4-fold
/// overlap are rejected and redrawn.
pub fn generate_random_layout(
    count: usize,
    radius: f64,
    bounds: Bounds,
    capacity: f64,
    seed: u64,
) -> Result<SbsLayout, GeometryError> {
    if count == 0 {
        return Err(GeometryError::NoStations);
    }
    if radius.is_nan() || radius <= 0.0 {
        return Err(GeometryError::BadRadius(radius));
    }
    let mut rng = seed::rng_at(seed, &[seed::stream::LAYOUT]);
    let (w, h) = (bounds.max.x - bounds.min.x, bounds.max.y - bounds.min.y);
    for _ in 0..RANDOM_LAYOUT_ATTEMPTS {
        let positions: Vec<Point> = (0..count)
            .map(|_| {
                let x = bounds.min.x + w * rng.random::<f64>();
                let y = bounds.min.y + h * rng.random::<f64>();
                Point::new(x, y)
            })
            .collect();
        match SbsLayout::new(positions, radius, vec![capacity; count]) {
            Ok(layout) => return Ok(layout),
            Err(GeometryError::DepthExceeded { .. }) => continue,
            Err(other) => return Err(other),
        }
    }
    Err(GeometryError::RejectionBudgetExhausted(RANDOM_LAYOUT_ATTEMPTS))
}

/// Maximal plane region covered by exactly the stations in `covering`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SimplestRegion {
    pub id: usize,
    /// Sorted station indices.
    pub covering: Vec<usize>,
    /// Square metres.
    pub area: f64,
}

impl SimplestRegion {
    pub fn depth(&self) -> usize {
        self.covering.len()
    }

    pub fn contains(&self, sbs: usize) -> bool {
        self.covering.binary_search(&sbs).is_ok()
    }
}

/// Partition of the covered plane into simplest regions.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageMap {
    sbs_count: usize,
    resolution: f64,
    regions: Vec<SimplestRegion>,
    total_area: f64,
    sbs_area: Vec<f64>,
    sbs_regions: Vec<Vec<usize>>,
}

impl CoverageMap {
    /// Builds a map from explicit `(covering set, area)` pairs.
    pub fn from_regions(sbs_count: usize, regions: Vec<(Vec<usize>, f64)>) -> Result<Self, GeometryError> {
        let mut built = Vec::with_capacity(regions.len());
        for (index, (mut covering, area)) in regions.into_iter().enumerate() {
            covering.sort_unstable();
            covering.dedup();
            if covering.is_empty() {
                return Err(GeometryError::BadRegion { index, reason: "empty covering set" });
            }
            if covering.len() > MAX_COVER_DEPTH {
                return Err(GeometryError::BadRegion { index, reason: "covered by more than three stations" });
            }
            if covering.iter().any(|&i| i >= sbs_count) {
                return Err(GeometryError::BadRegion { index, reason: "station index out of range" });
            }
            if area.is_nan() || area <= 0.0 {
                return Err(GeometryError::BadRegion { index, reason: "area must be positive" });
            }
            if built.iter().any(|r: &SimplestRegion| r.covering == covering) {
                return Err(GeometryError::BadRegion { index, reason: "duplicate covering set" });
            }
            built.push(SimplestRegion { id: index, covering, area });
        }
        Ok(Self::assemble(sbs_count, 0.0, built))
    }

    fn assemble(sbs_count: usize, resolution: f64, regions: Vec<SimplestRegion>) -> Self {
        let mut sbs_area = vec![0.0; sbs_count];
        let mut sbs_regions = vec![Vec::new(); sbs_count];
        let mut total_area = 0.0;
        for r in &regions {
            total_area += r.area;
            for &i in &r.covering {
                sbs_area[i] += r.area;
                sbs_regions[i].push(r.id);
            }
        }
        Self { sbs_count, resolution, regions, total_area, sbs_area, sbs_regions }
    }

    pub fn regions(&self) -> &[SimplestRegion] {
        &self.regions
    }

    pub fn region(&self, j: usize) -> &SimplestRegion {
        &self.regions[j]
    }

    pub fn sbs_count(&self) -> usize {
        self.sbs_count
    }

    /// Sampling resolution in metres; zero for maps built from explicit regions.
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Union area `A_total`.
    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    /// Per-station coverage area `A_i`.
    pub fn sbs_area(&self) -> &[f64] {
        &self.sbs_area
    }

    /// Indices of the regions inside the disk of station `i`.
    pub fn regions_of(&self, sbs: usize) -> &[usize] {
        &self.sbs_regions[sbs]
    }

    pub fn overlap(&self) -> f64 {
        overlap_percentage(self)
    }

    /// Area covered by every station in `stations` (union of the regions
    /// whose covering set is a superset).
    pub fn common_area(&self, stations: &[usize]) -> f64 {
        self.regions.iter().filter(|r| stations.iter().all(|&s| r.contains(s))).fold(0.0, |acc, r| acc + r.area)
    }

    /// Area covered by at least one station of `stations`.
    pub fn union_area(&self, stations: &[usize]) -> f64 {
        self.regions.iter().filter(|r| r.covering.iter().any(|s| stations.contains(s))).fold(0.0, |acc, r| acc + r.area)
    }

    pub fn region_with(&self, covering: &[usize]) -> Option<&SimplestRegion> {
        self.regions.iter().find(|r| r.covering == covering)
    }
}

/// `O = (Σ A_i − A_total) / A_total`.
pub fn overlap_percentage(map: &CoverageMap) -> f64 {
    if map.total_area <= 0.0 {
        return 0.0;
    }
    let sum: f64 = map.sbs_area.iter().sum();
    ((sum - map.total_area) / map.total_area).max(0.0)
}

/// Samples the layout on a grid of square cells of side `resolution` whose
/// corners sit on integer multiples of the resolution.
pub fn build_coverage_map(layout: &SbsLayout, resolution: f64) -> Result<CoverageMap, GeometryError> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(GeometryError::BadResolution(resolution));
    }
    let radius = layout.radius;
    let r2 = radius * radius;
    let pos = layout.positions();

    let (mut min_x, mut max_x, mut min_y, mut max_y) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in pos {
        min_x = min_x.min(p.x - radius);
        max_x = max_x.max(p.x + radius);
        min_y = min_y.min(p.y - radius);
        max_y = max_y.max(p.y + radius);
    }
    let x0 = libm::floor(min_x / resolution) * resolution;
    let y0 = libm::floor(min_y / resolution) * resolution;
    let rows = libm::ceil((max_y - y0) / resolution) as i64;

    let mut by_y: Vec<usize> = (0..pos.len()).collect();
    by_y.sort_by(|&a, &b| pos[a].y.total_cmp(&pos[b].y).then(a.cmp(&b)));

    let mut cells: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    let mut events: Vec<(i64, bool, usize)> = Vec::new();
    let mut active: Vec<usize> = Vec::with_capacity(4);
    let mut lo = 0usize;

    for row in 0..rows {
        let y = y0 + (row as f64 + 0.5) * resolution;
        while lo < by_y.len() && pos[by_y[lo]].y <= y - radius {
            lo += 1;
        }
        events.clear();
        for &i in by_y[lo..].iter().take_while(|&&i| pos[i].y < y + radius) {
            let dy = y - pos[i].y;
            let half2 = r2 - dy * dy;
            if half2 <= 0.0 {
                continue;
            }
            let half = libm::sqrt(half2);
            // cells whose centre lies strictly inside (cx − half, cx + half)
            let first = libm::floor((pos[i].x - half - x0) / resolution - 0.5) as i64 + 1;
            let last = libm::ceil((pos[i].x + half - x0) / resolution - 0.5) as i64 - 1;
            if first <= last {
                events.push((first, true, i));
                events.push((last + 1, false, i));
            }
        }
        if events.is_empty() {
            continue;
        }
        events.sort_unstable();
        active.clear();
        let mut k = 0;
        while k < events.len() {
            let at = events[k].0;
            while k < events.len() && events[k].0 == at {
                let (_, start, i) = events[k];
                if start {
                    let slot = active.binary_search(&i).unwrap_or_else(|s| s);
                    active.insert(slot, i);
                } else if let Ok(slot) = active.binary_search(&i) {
                    active.remove(slot);
                }
                k += 1;
            }
            if k < events.len() && !active.is_empty() {
                let run = (events[k].0 - at) as u64;
                if active.len() > MAX_COVER_DEPTH {
                    return Err(GeometryError::DepthExceeded {
                        depth: active.len(),
                        x: x0 + (at as f64 + 0.5) * resolution,
                        y,
                    });
                }
                match cells.get_mut(active.as_slice()) {
                    Some(n) => *n += run,
                    None => {
                        cells.insert(active.clone(), run);
                    }
                }
            }
        }
    }

    let cell_area = resolution * resolution;
    let regions = cells
        .into_iter()
        .enumerate()
        .map(|(id, (covering, n))| SimplestRegion { id, covering, area: n as f64 * cell_area })
        .collect();
    Ok(CoverageMap::assemble(layout.count(), resolution, regions))
}

/// Closed-form patch areas of an infinite hexagonal grid.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct HexPatchAreas {
    /// Single disk, `πR²`.
    pub single: f64,
    /// Lens shared by two adjacent disks.
    pub lens: f64,
    /// Patch shared by three mutually adjacent disks.
    pub triple: f64,
    pub theta: f64,
}

impl HexPatchAreas {
    /// Union area per station in the infinite grid, `A1 − 3A2 + 2A3`.
    pub fn union_per_station(&self) -> f64 {
        self.single - 3.0 * self.lens + 2.0 * self.triple
    }

    /// Overlap percentage of the infinite grid.
    pub fn overlap(&self) -> f64 {
        self.single / self.union_per_station() - 1.0
    }

    /// Area covered by exactly one (interior) station.
    pub fn exclusive(&self) -> f64 {
        self.single - 6.0 * self.lens + 6.0 * self.triple
    }

    /// Area covered by exactly two adjacent stations.
    pub fn lens_only(&self) -> f64 {
        self.lens - 2.0 * self.triple
    }
}

/// Patch areas for adjacent-centre spacing `2R·cos θ`.
pub fn hex_patch_areas(radius: f64, theta: f64) -> Result<HexPatchAreas, GeometryError> {
    if !(theta > 0.0 && theta < max_theta()) {
        return Err(GeometryError::ThetaOutOfDomain(theta));
    }
    let r2 = radius * radius;
    let (s, c) = (libm::sin(theta), libm::cos(theta));
    let lens = 2.0 * r2 * (theta - c * s);
    let triple =
        if theta <= FRAC_PI_6 { 0.0 } else { r2 * (3.0 * (theta - FRAC_PI_6) + libm::sqrt(3.0) * c * c - 3.0 * s * c) };
    Ok(HexPatchAreas { single: PI * r2, lens, triple, theta })
}

/// Patch areas for a compress factor `c = cos θ`.
pub fn hex_patch_areas_for_compress(radius: f64, compress: f64) -> Result<HexPatchAreas, GeometryError> {
    if !(compress >= min_compress() && compress <= 1.0) {
        return Err(GeometryError::CompressOutOfDomain(compress));
    }
    hex_patch_areas(radius, libm::acos(compress))
}

/// Finds by bisection the compress factor whose hexagonal layout of `count`
/// stations reaches the overlap `target`.
pub fn compress_for_overlap(count: usize, radius: f64, target: f64, resolution: f64) -> Result<f64, GeometryError> {
    let overlap_at = |c: f64| -> Result<f64, GeometryError> {
        let layout = generate_hex_layout(count, radius, c, 1.0)?;
        Ok(build_coverage_map(&layout, resolution)?.overlap())
    };
    let (mut lo, mut hi) = (min_compress(), 1.0);
    let max = overlap_at(lo)?;
    if !(target >= 0.0 && target <= max) {
        return Err(GeometryError::OverlapUnreachable { target, max });
    }
    // overlap decreases in c
    for _ in 0..48 {
        let mid = 0.5 * (lo + hi);
        if overlap_at(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-7 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
