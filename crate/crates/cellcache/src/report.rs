//! CSV and TOML outputs of a scenario run.
//!
//! Every writer renders into memory first so that identical runs give
//! byte-identical files. Floats use Rust's shortest round-trip formatting.

use std::fs;
use std::path::Path;

use cellcache_core::blocks::HourBlocks;
use cellcache_core::geometry::GeometryError;
use cellcache_core::{Catalog, CoverageMap, HourDelay, Point, SbsLayout, Scenario, ScenarioOutcome, Strategy};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed layout file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot encode layout: {0}")]
    Encode(#[from] toml::ser::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn render(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn delay_cell(d: HourDelay) -> String {
    d.value().map(|v| v.to_string()).unwrap_or_default()
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn strategies(outcome: &ScenarioOutcome) -> Vec<Strategy> {
    outcome.summaries.iter().map(|s| s.strategy).collect()
}

/// One row per hour: demand, then `D(t)` for each strategy, then the
/// mechanism's `λ^t`, auction iterations and largest price when it ran.
pub fn hours_csv(outcome: &ScenarioOutcome) -> Result<String, ReportError> {
    let strategies = strategies(outcome);
    let mech = strategies.contains(&Strategy::Mechanism);
    let mut header: Vec<String> =
        ["hour", "users", "backhaul_ms", "downlink_ms", "blocks", "dropped_popularity"].map(String::from).to_vec();
    header.extend(strategies.iter().map(|s| format!("delay_{s}")));
    header.extend(strategies.iter().map(|s| format!("replacement_{s}")));
    if mech {
        header.extend(["iterations", "auctions", "max_price"].map(String::from));
    }
    let rows = outcome.hours.iter().map(|h| {
        let mut row = vec![
            h.hour.to_string(),
            h.users.to_string(),
            h.backhaul.to_string(),
            h.downlink.to_string(),
            h.blocks.to_string(),
            h.dropped_popularity.to_string(),
        ];
        row.extend(h.reports.iter().map(|r| delay_cell(r.delay)));
        row.extend(h.reports.iter().map(|r| r.replacement.to_string()));
        if let Some(r) = h.report(Strategy::Mechanism) {
            let max_price = r.rounds.iter().map(|s| s.max_price).fold(0.0, f64::max);
            row.extend([r.iterations().to_string(), r.rounds.len().to_string(), max_price.to_string()]);
        }
        row
    });
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    render(&header, rows)
}

/// Daily figures per strategy.
pub fn summary_csv(outcome: &ScenarioOutcome) -> Result<String, ReportError> {
    let header = [
        "strategy",
        "daily_delay_ms",
        "replacement",
        "hours_with_demand",
        "auctions",
        "iterations",
        "mean_iterations",
        "max_bound_ratio",
    ];
    render(
        &header,
        outcome.summaries.iter().map(|s| {
            vec![
                s.strategy.to_string(),
                opt_cell(s.delay),
                s.replacement.to_string(),
                s.hours_with_demand.to_string(),
                s.auctions.to_string(),
                s.iterations.to_string(),
                s.mean_iterations().to_string(),
                s.max_bound_ratio.to_string(),
            ]
        }),
    )
}

/// Long format: one row per hour and strategy with the delay components.
pub fn delay_csv(outcome: &ScenarioOutcome) -> Result<String, ReportError> {
    let header =
        ["hour", "strategy", "delay_ms", "backhaul_ms", "downlink_ms", "cached_blocks", "block_count", "replacement"];
    let rows = outcome.hours.iter().flat_map(|h| {
        h.reports.iter().map(move |r| {
            vec![
                h.hour.to_string(),
                r.strategy.to_string(),
                delay_cell(r.delay),
                h.backhaul.to_string(),
                h.downlink.to_string(),
                r.cached_blocks.to_string(),
                r.block_count.to_string(),
                r.replacement.to_string(),
            ]
        })
    });
    render(&header, rows)
}

/// Per-round auction statistics of the mechanism.
pub fn rounds_csv(outcome: &ScenarioOutcome) -> Result<String, ReportError> {
    let header = ["hour", "round", "bidders", "objects", "iterations", "bound", "welfare", "max_price", "written"];
    let rows = outcome.hours.iter().flat_map(|h| {
        h.report(Strategy::Mechanism).into_iter().flat_map(move |r| {
            r.rounds.iter().map(move |s| {
                vec![
                    h.hour.to_string(),
                    s.round.to_string(),
                    s.bidders.to_string(),
                    s.objects.to_string(),
                    s.iterations.to_string(),
                    s.bound.to_string(),
                    s.welfare.to_string(),
                    s.max_price.to_string(),
                    s.written.to_string(),
                ]
            })
        })
    });
    render(&header, rows)
}

/// Simplest regions with their covering stations, space separated.
pub fn coverage_csv(map: &CoverageMap) -> Result<String, ReportError> {
    let rows = map.regions().iter().map(|r| {
        let covering: Vec<String> = r.covering.iter().map(usize::to_string).collect();
        vec![r.id.to_string(), covering.join(" "), r.depth().to_string(), r.area.to_string()]
    });
    render(&["region", "stations", "depth", "area_m2"], rows)
}

pub fn catalog_csv(catalog: &Catalog) -> Result<String, ReportError> {
    let rows = catalog.contents().map(|c| {
        vec![
            c.sp.to_string(),
            c.id.to_string(),
            c.size.mb().to_string(),
            c.scale.to_string(),
            c.lifespan.to_string(),
            c.upload.to_string(),
        ]
    });
    render(&["sp", "content", "size_mb", "scale", "lifespan_h", "upload_h"], rows)
}

/// Block table of one hour. Pieces are written as `content:start-end`
/// megabyte ranges separated by spaces.
pub fn blocks_csv(blocks: &HourBlocks) -> Result<String, ReportError> {
    let rows = blocks.blocks.iter().map(|b| {
        let pieces: Vec<String> =
            b.pieces.iter().map(|p| format!("{}:{}-{}", p.content.id, p.range.start, p.range.end)).collect();
        vec![
            blocks.hour.to_string(),
            b.sp.to_string(),
            b.index.to_string(),
            b.size.mb().to_string(),
            pieces.join(" "),
            b.popularity.to_string(),
        ]
    });
    render(&["hour", "sp", "block", "size_mb", "pieces", "popularity"], rows)
}

/// Station layout as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutFile {
    pub radius: f64,
    pub capacities_gb: Vec<f64>,
    pub positions: Vec<Point>,
}

impl LayoutFile {
    pub fn of(layout: &SbsLayout) -> Self {
        Self {
            radius: layout.radius(),
            capacities_gb: layout.capacities().to_vec(),
            positions: layout.positions().to_vec(),
        }
    }

    pub fn into_layout(self) -> Result<SbsLayout, ReportError> {
        Ok(SbsLayout::new(self.positions, self.radius, self.capacities_gb)?)
    }
}

pub fn layout_to_toml(layout: &SbsLayout) -> Result<String, ReportError> {
    Ok(toml::to_string(&LayoutFile::of(layout))?)
}

pub fn layout_from_toml(text: &str) -> Result<SbsLayout, ReportError> {
    toml::from_str::<LayoutFile>(text)?.into_layout()
}

/// Writes every run output into `dir`, returning the file names.
pub fn write_run(dir: &Path, scenario: &Scenario, outcome: &ScenarioOutcome) -> Result<Vec<&'static str>, ReportError> {
    fs::create_dir_all(dir)?;
    let files = [
        ("hours.csv", hours_csv(outcome)?),
        ("summary.csv", summary_csv(outcome)?),
        ("delay.csv", delay_csv(outcome)?),
        ("rounds.csv", rounds_csv(outcome)?),
        ("coverage.csv", coverage_csv(scenario.coverage())?),
        ("catalog.csv", catalog_csv(scenario.catalog())?),
        ("layout.toml", layout_to_toml(scenario.layout())?),
    ];
    for (name, body) in &files {
        fs::write(dir.join(name), body)?;
    }
    Ok(files.map(|(name, _)| name).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use cellcache_core::{run_scenario, LayoutSpec, ScenarioConfig};

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            layout: LayoutSpec::Hex { compress: 0.8 },
            stations: 3,
            capacity_gb: 6.0,
            contents: 80,
            block_gb: 1.0,
            hours: 4,
            resolution: 1.0,
            ..ScenarioConfig::desk()
        }
    }

    #[test]
    fn hours_table_shape() {
        let out = run_scenario(&small()).unwrap();
        let text = hours_csv(&out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("hour,users,backhaul_ms,downlink_ms,blocks,dropped_popularity,delay_mechanism,"));
        assert!(lines[0].ends_with("iterations,auctions,max_price"));
        let width = lines[0].split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == width));
    }

    #[test]
    fn no_mechanism_columns_without_the_mechanism() {
        let cfg = ScenarioConfig { strategies: vec![Strategy::NoCache], ..small() };
        let text = hours_csv(&run_scenario(&cfg).unwrap()).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "hour,users,backhaul_ms,downlink_ms,blocks,dropped_popularity,delay_no_cache,replacement_no_cache"
        );
    }

    #[test]
    fn layout_round_trip() {
        let s = Scenario::prepare(&small()).unwrap();
        let text = layout_to_toml(s.layout()).unwrap();
        assert_eq!(&layout_from_toml(&text).unwrap(), s.layout());
    }

    #[test]
    fn overlapping_layout_file_is_rejected() {
        let text = "radius = 10.0\ncapacities_gb = [1.0, 1.0, 1.0, 1.0]\npositions = [\
            {x = 0.0, y = 0.0}, {x = 1.0, y = 0.0}, {x = 0.0, y = 1.0}, {x = 1.0, y = 1.0}]\n";
        assert!(matches!(layout_from_toml(text), Err(ReportError::Geometry(GeometryError::DepthExceeded { .. }))));
    }

    #[test]
    fn coverage_rows() {
        let s = Scenario::prepare(&small()).unwrap();
        let text = coverage_csv(s.coverage()).unwrap();
        assert_eq!(text.lines().next().unwrap(), "region,stations,depth,area_m2");
        assert_eq!(text.lines().count(), s.coverage().regions().len() + 1);
        assert!(text.contains(",0 1 2,3,"));
    }
}
