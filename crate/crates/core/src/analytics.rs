//! Read-only queries over bucketed series and community profiles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::RnaCategory;
use crate::ingest::{CommunityProfile, INDICATOR_NAMES};
use crate::temporal::CaseSeries;

pub type SeriesMap = BTreeMap<String, CaseSeries>;

pub const TOTAL_CASES_AXIS: &str = "total_cases";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("span window {from}..={to} is outside a grid of {len} spans")]
    WindowOutOfRange { from: usize, to: usize, len: usize },
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("series for `{code}` has {found} spans, expected {expected}")]
    SeriesLength { code: String, found: usize, expected: usize },
    #[error("no profile for community `{0}`")]
    MissingProfile(String),
}

/// Span indices `from..=to`; `to < from` is an empty window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanWindow {
    pub from: usize,
    pub to: usize,
}

impl SpanWindow {
    pub fn full(len: usize) -> Self {
        if len == 0 {
            Self::empty()
        } else {
            Self { from: 0, to: len - 1 }
        }
    }

    pub fn empty() -> Self {
        Self { from: 1, to: 0 }
    }

    /// Validates `from..=to` against a grid of `len` spans.
    pub fn checked(from: usize, to: usize, len: usize) -> Result<Self, AnalyticsError> {
        if from > len || (to >= from && to >= len) {
            return Err(AnalyticsError::WindowOutOfRange { from, to, len });
        }
        Ok(Self { from, to })
    }

    pub fn is_empty(&self) -> bool {
        self.to < self.from
    }

    pub fn range(&self) -> Range<usize> {
        if self.is_empty() {
            0..0
        } else {
            self.from..self.to + 1
        }
    }
}

pub fn window_sum(series: &SeriesMap, window: SpanWindow) -> BTreeMap<String, u64> {
    series
        .iter()
        .map(|(code, s)| (code.clone(), s.sum(window.range())))
        .collect()
}

/// Index of the first span with a case, per community.
pub fn first_case_spans(series: &SeriesMap) -> BTreeMap<String, Option<usize>> {
    series
        .iter()
        .map(|(code, s)| (code.clone(), s.counts.iter().position(|&c| c > 0)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    TotalCases,
    CasesPerCapita,
    Category(RnaCategory),
    /// Index into [`INDICATOR_NAMES`].
    Indicator(usize),
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::TotalCases => "total_cases",
            Metric::CasesPerCapita => "cases_per_10k",
            Metric::Category(c) => c.as_str(),
            Metric::Indicator(i) => INDICATOR_NAMES[*i],
        }
    }

    pub fn all() -> Vec<Metric> {
        let mut all = vec![Metric::TotalCases, Metric::CasesPerCapita];
        all.extend(RnaCategory::ALL.map(Metric::Category));
        all.extend((0..INDICATOR_NAMES.len()).map(Metric::Indicator));
        all
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = AnalyticsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::all()
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| AnalyticsError::UnknownMetric(s.to_string()))
    }
}

impl Serialize for Metric {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub code: String,
    pub value: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub metric: Metric,
    pub window: SpanWindow,
    pub entries: Vec<RankEntry>,
    /// Communities left out, e.g. zero population under per-capita ranking.
    pub exclusions: Vec<String>,
}

/// Ranks every profiled community by `metric`, largest first. Equal values
/// share a rank (dense ranking) and are listed by code.
pub fn rank_by(
    metric: Metric,
    profiles: &BTreeMap<String, CommunityProfile>,
    series: &SeriesMap,
    window: SpanWindow,
    per_capita_divisor: f64,
) -> RankedList {
    let mut exclusions = Vec::new();
    let mut values: Vec<(String, f64)> = Vec::with_capacity(profiles.len());
    for (code, p) in profiles {
        let cases = || series.get(code).map_or(0, |s| s.sum(window.range())) as f64;
        let value = match metric {
            Metric::TotalCases => cases(),
            Metric::CasesPerCapita if p.population == 0 => {
                exclusions.push(code.clone());
                continue;
            }
            Metric::CasesPerCapita => per_capita_divisor * cases() / p.population as f64,
            Metric::Category(c) => c.value(p) as f64,
            Metric::Indicator(i) => p.indicators.values()[i],
        };
        values.push((code.clone(), value));
    }
    values.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut entries = Vec::with_capacity(values.len());
    let mut rank = 0;
    let mut last = None;
    for (code, value) in values {
        if last != Some(value) {
            rank += 1;
            last = Some(value);
        }
        entries.push(RankEntry { code, value, rank });
    }
    RankedList {
        metric,
        window,
        entries,
        exclusions,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatCell {
    pub code: String,
    pub sum: u64,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapFrame {
    pub window: SpanWindow,
    /// `None` when the window holds no cases at all.
    pub max_sum: Option<u64>,
    pub cells: Vec<HeatCell>,
}

/// Log-scaled case intensity per community against the window maximum.
pub fn heatmap(series: &SeriesMap, window: SpanWindow) -> HeatmapFrame {
    let sums = window_sum(series, window);
    let max = sums.values().copied().max().unwrap_or(0);
    let denom = (max as f64).ln_1p();
    let cells = sums
        .into_iter()
        .map(|(code, sum)| HeatCell {
            intensity: if max == 0 { 0.0 } else { (sum as f64).ln_1p() / denom },
            code,
            sum,
        })
        .collect();
    HeatmapFrame {
        window,
        max_sum: (max > 0).then_some(max),
        cells,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    /// Every community has the same value; normalized to 0.5.
    pub constant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdcRow {
    pub code: String,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdcDataset {
    pub window: SpanWindow,
    pub axes: Vec<String>,
    pub ranges: Vec<AxisRange>,
    pub rows: Vec<MdcRow>,
}

impl MdcDataset {
    pub fn axis_index(&self, name: &str) -> Option<usize> {
        self.axes.iter().position(|a| a == name)
    }
}

/// The twelve indicators plus windowed case totals, min-max normalized.
pub fn mdc_dataset(profiles: &BTreeMap<String, CommunityProfile>, series: &SeriesMap, window: SpanWindow) -> MdcDataset {
    let mut axes: Vec<String> = INDICATOR_NAMES.iter().map(|s| s.to_string()).collect();
    axes.push(TOTAL_CASES_AXIS.to_string());
    let raws: Vec<(String, Vec<f64>)> = profiles
        .iter()
        .map(|(code, p)| {
            let mut raw = p.indicators.values().to_vec();
            raw.push(series.get(code).map_or(0, |s| s.sum(window.range())) as f64);
            (code.clone(), raw)
        })
        .collect();
    let ranges: Vec<AxisRange> = (0..axes.len())
        .map(|k| {
            let (min, max) = raws
                .iter()
                .map(|(_, r)| r[k])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if raws.is_empty() {
                AxisRange {
                    min: 0.0,
                    max: 0.0,
                    constant: true,
                }
            } else {
                AxisRange {
                    min,
                    max,
                    constant: min == max,
                }
            }
        })
        .collect();
    let rows = raws
        .into_iter()
        .map(|(code, raw)| MdcRow {
            normalized: raw
                .iter()
                .zip(&ranges)
                .map(|(&v, r)| if r.constant { 0.5 } else { (v - r.min) / (r.max - r.min) })
                .collect(),
            code,
            raw,
        })
        .collect();
    MdcDataset {
        window,
        axes,
        ranges,
        rows,
    }
}

/// Codes whose normalized value lies within `[lo, hi]` on every brushed axis.
pub fn brush_filter(
    dataset: &MdcDataset,
    intervals: &BTreeMap<String, (f64, f64)>,
) -> Result<BTreeSet<String>, AnalyticsError> {
    let brushed = intervals
        .iter()
        .map(|(axis, &(lo, hi))| {
            dataset
                .axis_index(axis)
                .map(|k| (k, lo, hi))
                .ok_or_else(|| AnalyticsError::UnknownAxis(axis.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(dataset
        .rows
        .iter()
        .filter(|row| brushed.iter().all(|&(k, lo, hi)| lo <= row.normalized[k] && row.normalized[k] <= hi))
        .map(|row| row.code.clone())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub code: String,
    pub name: String,
}

/// Case-insensitive name search: prefix matches first, then other
/// substring matches, each group by name. A blank query matches nothing.
pub fn search(query: &str, names: &[(String, String)]) -> Vec<SearchHit> {
    let q = query.trim().to_lowercase();
    if q.is_empty() {
        return Vec::new();
    }
    let mut hits: Vec<(bool, &String, &String)> = names
        .iter()
        .filter_map(|(code, name)| {
            let lower = name.to_lowercase();
            lower.find(&q).map(|at| (at != 0, name, code))
        })
        .collect();
    hits.sort();
    hits.into_iter()
        .map(|(_, name, code)| SearchHit {
            code: code.clone(),
            name: name.clone(),
        })
        .collect()
}
