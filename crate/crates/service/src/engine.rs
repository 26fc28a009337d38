//! One loaded snapshot and every query the API and exporter answer from it.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use anyhow::Context;
use epiportrait_core::analytics::{
    brush_filter, heatmap, mdc_dataset, rank_by, search, HeatmapFrame, MdcDataset, Metric, RankedList, SearchHit,
    SeriesMap, SpanWindow,
};
use epiportrait_core::geometry::{
    build_filter_trigger, build_portrait, CategoryStats, CountMode, GeometryError, PortraitContext, PortraitGeometry,
};
use epiportrait_core::ingest::{DatasetSnapshot, SourcePaths};
use epiportrait_core::layout::{pin, run_layout, LayoutBody, LayoutError, LayoutResult, MAX_DENSITY};
use epiportrait_core::temporal::{build_grid, bucket_snapshot, classify_phases, Granularity, PhaseTimeline, TimeSpanGrid};
use epiportrait_core::{json, Level, StudyWindow};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::Settings;

pub const SNAPSHOT_FORMAT: u32 = 1;

/// Where and when a snapshot was built. Not part of its identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub built_at: String,
    pub sources: SourcePaths,
}

/// The on-disk snapshot: dataset plus the settings it is served with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotFile {
    pub format: u32,
    #[serde(default)]
    pub provenance: Option<Provenance>,
    pub settings: Settings,
    pub dataset: DatasetSnapshot,
}

#[derive(Serialize)]
struct Identity<'a> {
    format: u32,
    settings: &'a Settings,
    dataset: &'a DatasetSnapshot,
}

impl SnapshotFile {
    pub fn new(settings: Settings, dataset: DatasetSnapshot, provenance: Option<Provenance>) -> Self {
        Self {
            format: SNAPSHOT_FORMAT,
            provenance,
            settings,
            dataset,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        json::to_vec(self).expect("snapshot serializes")
    }

    /// Hex SHA-256 of the canonical settings and dataset.
    pub fn content_id(&self) -> String {
        let identity = Identity {
            format: self.format,
            settings: &self.settings,
            dataset: &self.dataset,
        };
        hex::encode(Sha256::digest(json::to_vec(&identity).expect("snapshot serializes")))
    }
}

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Unprocessable(String),
}

impl From<LayoutError> for QueryError {
    fn from(e: LayoutError) -> Self {
        match e {
            LayoutError::NotFound(_) => QueryError::NotFound(e.to_string()),
            _ => QueryError::Unprocessable(e.to_string()),
        }
    }
}

impl From<GeometryError> for QueryError {
    fn from(e: GeometryError) -> Self {
        QueryError::Unprocessable(e.to_string())
    }
}

/// Grid, series and phases for one granularity and level.
pub struct Derived {
    pub grid: TimeSpanGrid,
    pub series: SeriesMap,
    pub phases: PhaseTimeline,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Pin {
    pub code: String,
    pub x: f64,
    pub y: f64,
}

/// Layout request parameters.
#[derive(Debug, Clone)]
pub struct LayoutQuery {
    pub granularity: Granularity,
    pub mode: CountMode,
    pub from: Option<usize>,
    pub to: Option<usize>,
    pub seed: u64,
    pub viewport: Option<[f64; 2]>,
    pub pins: Vec<Pin>,
}

pub struct Engine {
    id: String,
    file: SnapshotFile,
    stats: CategoryStats,
    derived: [[OnceLock<Derived>; 2]; 2],
}

fn slot(granularity: Granularity, level: Level) -> (usize, usize) {
    let g = match granularity {
        Granularity::Weekly => 0,
        Granularity::Fortnightly => 1,
    };
    let l = match level {
        Level::Lga => 0,
        Level::PostalArea => 1,
    };
    (g, l)
}

impl Engine {
    pub fn new(file: SnapshotFile) -> anyhow::Result<Self> {
        file.settings.validate()?;
        let stats = CategoryStats::from_profiles(file.dataset.communities().values());
        Ok(Self {
            id: file.content_id(),
            stats,
            file,
            derived: Default::default(),
        })
    }

    pub fn open(path: &Path) -> anyhow::Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let file: SnapshotFile =
            serde_json::from_slice(&bytes).with_context(|| format!("loading snapshot {}", path.display()))?;
        anyhow::ensure!(
            file.format == SNAPSHOT_FORMAT,
            "{}: unsupported snapshot format {}",
            path.display(),
            file.format
        );
        Self::new(file)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn file(&self) -> &SnapshotFile {
        &self.file
    }

    pub fn dataset(&self) -> &DatasetSnapshot {
        &self.file.dataset
    }

    pub fn settings(&self) -> &Settings {
        &self.file.settings
    }

    pub fn derived(&self, granularity: Granularity, level: Level) -> &Derived {
        let (g, l) = slot(granularity, level);
        self.derived[g][l].get_or_init(|| {
            let grid = build_grid(self.dataset().window(), granularity);
            let series = bucket_snapshot(self.dataset(), &grid, level).series;
            let phases = classify_phases(self.dataset().events(), &grid, &self.settings().phase_rules);
            Derived { grid, series, phases }
        })
    }

    pub fn window(&self, granularity: Granularity, from: Option<usize>, to: Option<usize>) -> Result<SpanWindow, QueryError> {
        let len = self.derived(granularity, Level::Lga).grid.len();
        let from = from.unwrap_or(0);
        let to = to.unwrap_or(len.saturating_sub(1));
        if len == 0 {
            return Ok(SpanWindow::empty());
        }
        SpanWindow::checked(from, to, len).map_err(|e| QueryError::BadRequest(e.to_string()))
    }

    pub fn summary(&self) -> Value {
        let d = self.dataset();
        let report = d.report();
        let mut reasons: BTreeMap<&str, usize> = BTreeMap::new();
        for q in &report.quarantined {
            *reasons.entry(q.reason.code()).or_default() += 1;
        }
        let weekly = self.derived(Granularity::Weekly, Level::Lga);
        json!({
            "snapshot": self.id,
            "window": d.window(),
            "days": d.window().days(),
            "communities": d.communities().len(),
            "postal_areas": d.community_keys(Level::PostalArea).len(),
            "case_rows": report.case_rows,
            "accepted": d.cases().len(),
            "quarantined": report.quarantined.len(),
            "quarantine_reasons": reasons,
            "event_rows": report.event_rows,
            "events_accepted": d.events().len(),
            "events_quarantined": report.events_quarantined.len(),
            "spans": {
                "weekly": weekly.grid.len(),
                "fortnightly": self.derived(Granularity::Fortnightly, Level::Lga).grid.len(),
            },
            "phases_weekly": weekly.phases.histogram(),
        })
    }

    pub fn grid(&self, granularity: Granularity) -> &TimeSpanGrid {
        &self.derived(granularity, Level::Lga).grid
    }

    pub fn communities(&self, level: Level) -> Value {
        let d = self.dataset();
        let rows: Vec<Value> = d
            .names(level)
            .into_iter()
            .map(|(code, name)| {
                let population = d.communities().get(&code).map(|p| p.population);
                json!({ "code": code, "name": name, "population": population })
            })
            .collect();
        Value::Array(rows)
    }

    pub fn search(&self, query: &str, level: Level) -> Vec<SearchHit> {
        search(query, &self.dataset().names(level))
    }

    pub fn boundaries(&self, level: Level) -> Result<Value, QueryError> {
        let set = self
            .dataset()
            .boundaries(level)
            .ok_or_else(|| QueryError::NotFound(format!("no boundaries at level {level}")))?;
        serde_json::to_value(set.to_feature_collection()).map_err(|e| QueryError::Unprocessable(e.to_string()))
    }

    fn context(&self) -> PortraitContext<'_> {
        let s = self.settings();
        PortraitContext {
            config: &s.portrait,
            channels: &s.channels,
            stats: &self.stats,
            per_capita_divisor: s.per_capita_divisor,
        }
    }

    /// One portrait per community, drawing the spans of `window`.
    pub fn portraits(&self, granularity: Granularity, mode: CountMode, window: SpanWindow) -> Result<Vec<PortraitGeometry>, QueryError> {
        let derived = self.derived(granularity, Level::Lga);
        let range = window.range();
        let ctx = self.context();
        self.dataset()
            .communities()
            .iter()
            .map(|(code, profile)| {
                let full = &derived.series[code];
                let series = epiportrait_core::temporal::CaseSeries {
                    community_code: code.clone(),
                    counts: full.counts[range.clone()].to_vec(),
                };
                let phases = &derived.phases.labels[range.clone()];
                build_portrait(&ctx, profile, &series, range.start, Some(phases), mode).map_err(QueryError::from)
            })
            .collect()
    }

    pub fn filter_trigger(&self, granularity: Granularity) -> PortraitGeometry {
        let s = self.settings();
        build_filter_trigger(&self.derived(granularity, Level::Lga).phases, self.stats.sum, &s.portrait, &s.channels)
    }

    pub fn layout(&self, q: &LayoutQuery) -> Result<LayoutResult, QueryError> {
        let window = self.window(q.granularity, q.from, q.to)?;
        let padding = self.settings().layout.padding;
        let mut bodies: Vec<LayoutBody> = self
            .portraits(q.granularity, q.mode, window)?
            .iter()
            .map(|p| {
                let mut b = LayoutBody::for_portrait(p);
                b.radius += padding;
                b
            })
            .collect();
        for p in &q.pins {
            pin(&mut bodies, &p.code, [p.x, p.y])?;
        }
        let viewport = q.viewport.unwrap_or_else(|| {
            let area: f64 = bodies.iter().map(|b| std::f64::consts::PI * b.radius * b.radius).sum();
            let widest = bodies.iter().map(|b| 2.0 * b.radius).fold(1.0, f64::max);
            let side = (area / (MAX_DENSITY / 2.0)).sqrt().max(widest).ceil();
            [side, side]
        });
        Ok(run_layout(&bodies, viewport, q.seed, self.settings().layout.max_iter)?)
    }

    pub fn heatmap(&self, level: Level, granularity: Granularity, window: SpanWindow) -> HeatmapFrame {
        heatmap(&self.derived(granularity, level).series, window)
    }

    pub fn rankings(&self, metric: Metric, granularity: Granularity, window: SpanWindow) -> RankedList {
        rank_by(
            metric,
            self.dataset().communities(),
            &self.derived(granularity, Level::Lga).series,
            window,
            self.settings().per_capita_divisor,
        )
    }

    pub fn mdc(&self, granularity: Granularity, window: SpanWindow) -> MdcDataset {
        mdc_dataset(self.dataset().communities(), &self.derived(granularity, Level::Lga).series, window)
    }

    pub fn brush(
        &self,
        granularity: Granularity,
        window: SpanWindow,
        intervals: &BTreeMap<String, (f64, f64)>,
    ) -> Result<BTreeSet<String>, QueryError> {
        brush_filter(&self.mdc(granularity, window), intervals).map_err(|e| QueryError::BadRequest(e.to_string()))
    }

    pub fn study_window(&self) -> StudyWindow {
        self.dataset().window()
    }
}
