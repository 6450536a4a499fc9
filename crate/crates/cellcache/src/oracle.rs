//! Grid-sampled and Monte-Carlo patch areas of hexagonal layouts against
//! the closed forms.

use cellcache_core::geometry::{
    build_coverage_map, generate_hex_layout, hex_count_for_rings, hex_patch_areas_for_compress, GeometryError,
};
use cellcache_core::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaCheck {
    pub compress: f64,
    pub lens_exact: f64,
    pub lens_grid: f64,
    pub lens_mc: f64,
    pub triple_exact: f64,
    pub triple_grid: f64,
    pub triple_mc: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

impl AreaCheck {
    pub fn lens_error(&self) -> f64 {
        rel(self.lens_grid, self.lens_exact)
    }

    /// Zero when neither the grid nor the closed form has a triple patch.
    pub fn triple_error(&self) -> f64 {
        rel(self.triple_grid, self.triple_exact)
    }
}

/// Patch areas around the centre station of a one-ring hexagonal layout.
pub fn check_areas(
    radius: f64,
    compress: f64,
    resolution: f64,
    samples: usize,
    seed: u64,
) -> Result<AreaCheck, GeometryError> {
    let exact = hex_patch_areas_for_compress(radius, compress)?;
    let layout = generate_hex_layout(7, radius, compress, 1.0)?;
    let map = build_coverage_map(&layout, resolution)?;
    let p = layout.positions();
    let spacing = 2.0 * radius * compress;
    let adjacent = |a: usize, b: usize| (p[a].dist(p[b]) - spacing).abs() < 1e-6 * spacing;
    // two ring stations adjacent to each other and to the centre
    let (a, b) = (1..7)
        .flat_map(|a| (a + 1..7).map(move |b| (a, b)))
        .find(|&(a, b)| adjacent(a, b))
        .expect("a ring has adjacent stations");
    let (c0, ca, cb) = (p[0], p[a], p[b]);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r2 = radius * radius;
    let inside = |q: Point, c: Point| q.dist2(c) <= r2;
    let (mut lens, mut triple) = (0usize, 0usize);
    for _ in 0..samples {
        let q = Point::new(
            c0.x + radius * (2.0 * rng.random::<f64>() - 1.0),
            c0.y + radius * (2.0 * rng.random::<f64>() - 1.0),
        );
        if inside(q, c0) && inside(q, ca) {
            lens += 1;
            if inside(q, cb) {
                triple += 1;
            }
        }
    }
    let square = 4.0 * r2;
    Ok(AreaCheck {
        compress,
        lens_exact: exact.lens,
        lens_grid: map.common_area(&[0, a]),
        lens_mc: square * lens as f64 / samples as f64,
        triple_exact: exact.triple,
        triple_grid: map.common_area(&[0, a, b]),
        triple_mc: square * triple as f64 / samples as f64,
    })
}

/// Region counts of a hexagonal grid with complete rings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchCounts {
    pub stations: usize,
    pub lenses: usize,
    pub triples: usize,
}

impl PatchCounts {
    pub fn lenses_per_station(&self) -> f64 {
        self.lenses as f64 / self.stations as f64
    }

    pub fn triples_per_station(&self) -> f64 {
        self.triples as f64 / self.stations as f64
    }

    /// Approaches 3:2 as the grid grows.
    pub fn lens_to_triple(&self) -> f64 {
        self.lenses as f64 / self.triples as f64
    }
}

pub fn count_patches(rings: usize, radius: f64, compress: f64, resolution: f64) -> Result<PatchCounts, GeometryError> {
    let stations = hex_count_for_rings(rings);
    let layout = generate_hex_layout(stations, radius, compress, 1.0)?;
    let map = build_coverage_map(&layout, resolution)?;
    let depth = |d: usize| map.regions().iter().filter(|r| r.depth() == d).count();
    Ok(PatchCounts { stations, lenses: depth(2), triples: depth(3) })
}

/// Text report of both checks.
pub fn geometry_report(
    radius: f64,
    compresses: &[f64],
    resolution: f64,
    samples: usize,
    seed: u64,
    rings: usize,
) -> Result<String, GeometryError> {
    let mut out = format!("# patch areas, R = {radius} m, grid step {resolution} m, {samples} Monte-Carlo samples\n");
    out.push_str(
        "compress,lens_exact,lens_grid,lens_mc,lens_grid_err,triple_exact,triple_grid,triple_mc,triple_grid_err\n",
    );
    for &c in compresses {
        let a = check_areas(radius, c, resolution, samples, seed)?;
        out.push_str(&format!(
            "{},{:.3},{:.3},{:.3},{:.5},{:.3},{:.3},{:.3},{:.5}\n",
            c,
            a.lens_exact,
            a.lens_grid,
            a.lens_mc,
            a.lens_error(),
            a.triple_exact,
            a.triple_grid,
            a.triple_mc,
            a.triple_error()
        ));
    }
    out.push_str(&format!("# patch counts, {rings}-ring grid\n"));
    out.push_str("compress,stations,lenses,triples,lenses_per_station,triples_per_station,lens_to_triple\n");
    for &c in compresses.iter().filter(|&&c| c < 3f64.sqrt() / 2.0) {
        let n = count_patches(rings, radius, c, 1.0)?;
        out.push_str(&format!(
            "{},{},{},{},{:.4},{:.4},{:.4}\n",
            c,
            n.stations,
            n.lenses,
            n.triples,
            n.lenses_per_station(),
            n.triples_per_station(),
            n.lens_to_triple()
        ));
    }
    Ok(out)
}
