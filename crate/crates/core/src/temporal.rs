//! Time-span grids, per-community case series and intervention phases.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::domain::{Level, StudyWindow};
use crate::ingest::{CaseRecord, DatasetSnapshot, EventLine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Weekly,
    Fortnightly,
}

impl Granularity {
    pub const ALL: [Granularity; 2] = [Granularity::Weekly, Granularity::Fortnightly];

    pub fn days(self) -> i64 {
        match self {
            Granularity::Weekly => 7,
            Granularity::Fortnightly => 14,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Weekly => "weekly",
            Granularity::Fortnightly => "fortnightly",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Granularity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "weekly" => Ok(Granularity::Weekly),
            "fortnightly" => Ok(Granularity::Fortnightly),
            other => Err(format!("unknown granularity `{other}` (expected weekly or fortnightly)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSpan {
    pub index: usize,
    pub start: NaiveDate,
    /// Inclusive.
    pub end: NaiveDate,
    /// Set on a trailing span shorter than the granularity.
    pub partial: bool,
}

/// Ordered spans that partition a study window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSpanGrid {
    pub window: StudyWindow,
    pub granularity: Granularity,
    pub spans: Vec<TimeSpan>,
}

/// Partitions `window` into consecutive spans. A window that does not divide
/// evenly keeps its trailing short span, flagged `partial`.
pub fn build_grid(window: StudyWindow, granularity: Granularity) -> TimeSpanGrid {
    let step = granularity.days();
    let days = window.days();
    let count = (days + step - 1) / step;
    let spans = (0..count)
        .map(|i| {
            let start = window.start + Duration::days(i * step);
            let end = (start + Duration::days(step - 1)).min(window.end);
            TimeSpan {
                index: i as usize,
                start,
                end,
                partial: (end - start).num_days() + 1 < step,
            }
        })
        .collect();
    TimeSpanGrid {
        window,
        granularity,
        spans,
    }
}

impl TimeSpanGrid {
    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// Index of the span holding `date`, if it lies inside the window.
    pub fn span_of(&self, date: NaiveDate) -> Option<usize> {
        self.window
            .contains(date)
            .then(|| ((date - self.window.start).num_days() / self.granularity.days()) as usize)
    }
}

/// Case counts of one community, one entry per span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSeries {
    pub community_code: String,
    pub counts: Vec<u64>,
}

impl CaseSeries {
    pub fn zeros(code: impl Into<String>, spans: usize) -> Self {
        Self {
            community_code: code.into(),
            counts: vec![0; spans],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Sum over `range`, clipped to the series length.
    pub fn sum(&self, range: Range<usize>) -> u64 {
        let end = range.end.min(self.counts.len());
        self.counts.get(range.start.min(end)..end).map_or(0, |s| s.iter().sum())
    }
}

/// A case that could not be placed on the grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OffGridCase {
    pub case_index: usize,
    pub date: NaiveDate,
    pub reason: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bucketed {
    pub series: BTreeMap<String, CaseSeries>,
    pub quarantined: Vec<OffGridCase>,
}

/// Counts cases per community key and span. Every key in `known` gets a
/// series even with zero cases; keys seen only in `cases` are added too.
pub fn bucket_cases<I, S>(cases: &[CaseRecord], grid: &TimeSpanGrid, level: Level, known: I) -> Bucketed
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let spans = grid.len();
    let mut series: BTreeMap<String, CaseSeries> = known
        .into_iter()
        .map(|k| {
            let k = k.into();
            (k.clone(), CaseSeries::zeros(k, spans))
        })
        .collect();
    let mut quarantined = Vec::new();
    for (case_index, case) in cases.iter().enumerate() {
        let Some(x) = grid.span_of(case.notification_date) else {
            quarantined.push(OffGridCase {
                case_index,
                date: case.notification_date,
                reason: "outside_window",
            });
            continue;
        };
        let key = match level {
            Level::Lga => &case.community_code,
            Level::PostalArea => &case.postal_code,
        };
        series
            .entry(key.clone())
            .or_insert_with(|| CaseSeries::zeros(key.clone(), spans))
            .counts[x] += 1;
    }
    Bucketed { series, quarantined }
}

/// [`bucket_cases`] over a snapshot's cases and all of its community keys
/// at `level`.
pub fn bucket_snapshot(snapshot: &DatasetSnapshot, grid: &TimeSpanGrid, level: Level) -> Bucketed {
    bucket_cases(snapshot.cases(), grid, level, snapshot.community_keys(level))
}

/// Intervention phase, ordered from least to most restrictive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Uncontrolled,
    Eased,
    RestrictControlled,
}

/// Lowercase keyword lists; matching is case-insensitive substring search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseRules {
    pub eased: Vec<String>,
    pub restrict_controlled: Vec<String>,
}

impl Default for PhaseRules {
    fn default() -> Self {
        let owned = |words: &[&str]| words.iter().map(|w| w.to_string()).collect();
        Self {
            eased: owned(&["social distance", "mask", "masks required", "gathering limit"]),
            restrict_controlled: owned(&["lockdown", "curfew", "bubble restriction", "stay-at-home"]),
        }
    }
}

impl PhaseRules {
    pub fn empty() -> Self {
        Self {
            eased: Vec::new(),
            restrict_controlled: Vec::new(),
        }
    }

    /// The most restrictive phase any keyword in `text` implies, with the
    /// keyword that decided it.
    pub fn classify<'r>(&'r self, text: &str) -> Option<(Phase, &'r str)> {
        let text = text.to_lowercase();
        let hit = |words: &'r [String]| {
            words
                .iter()
                .find(|w| !w.is_empty() && text.contains(&w.to_lowercase()))
                .map(String::as_str)
        };
        hit(&self.restrict_controlled)
            .map(|k| (Phase::RestrictControlled, k))
            .or_else(|| hit(&self.eased).map(|k| (Phase::Eased, k)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggeringEvent {
    pub date: NaiveDate,
    pub text: String,
    pub keyword: String,
    pub phase: Phase,
}

/// One phase label per span of a grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTimeline {
    pub labels: Vec<Phase>,
    pub triggering_events: Vec<Vec<TriggeringEvent>>,
    /// True where the label was inherited from the previous span.
    pub carried: Vec<bool>,
    /// Events that matched no keyword.
    pub unmatched: Vec<EventLine>,
}

impl PhaseTimeline {
    pub fn histogram(&self) -> BTreeMap<Phase, usize> {
        let mut out = BTreeMap::new();
        for &label in &self.labels {
            *out.entry(label).or_insert(0) += 1;
        }
        out
    }
}

/// Labels every span: the most restrictive matched event inside a span
/// wins; a span without matched events inherits the previous label, and the
/// first span starts uncontrolled.
pub fn classify_phases(events: &[EventLine], grid: &TimeSpanGrid, rules: &PhaseRules) -> PhaseTimeline {
    let n = grid.len();
    let mut triggering_events: Vec<Vec<TriggeringEvent>> = vec![Vec::new(); n];
    let mut unmatched = Vec::new();
    for event in events {
        let Some(x) = grid.span_of(event.date) else {
            unmatched.push(event.clone());
            continue;
        };
        match rules.classify(&event.text) {
            Some((phase, keyword)) => triggering_events[x].push(TriggeringEvent {
                date: event.date,
                text: event.text.clone(),
                keyword: keyword.to_string(),
                phase,
            }),
            None => unmatched.push(event.clone()),
        }
    }
    let mut labels = Vec::with_capacity(n);
    let mut carried = Vec::with_capacity(n);
    let mut previous = Phase::Uncontrolled;
    for span_events in &triggering_events {
        match span_events.iter().map(|e| e.phase).max() {
            Some(phase) => {
                labels.push(phase);
                carried.push(false);
                previous = phase;
            }
            None => {
                labels.push(previous);
                carried.push(true);
            }
        }
    }
    PhaseTimeline {
        labels,
        triggering_events,
        carried,
        unmatched,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::AgeBand;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn window(a: NaiveDate, b: NaiveDate) -> StudyWindow {
        StudyWindow::new(a, b).unwrap()
    }

    fn case(date: NaiveDate, code: &str) -> CaseRecord {
        CaseRecord {
            notification_date: date,
            postal_code: "2000".into(),
            community_code: code.into(),
            age_band: AgeBand::Unknown,
            likely_source: None,
        }
    }

    #[test]
    fn grid_counts() {
        let long = window(d(2020, 1, 1), d(2022, 1, 11));
        assert_eq!(long.days(), 742);
        assert_eq!(build_grid(long, Granularity::Weekly).len(), 106);
        assert_eq!(build_grid(long, Granularity::Fortnightly).len(), 53);
        assert_eq!(build_grid(window(d(2020, 1, 1), d(2020, 1, 7)), Granularity::Weekly).len(), 1);
        assert_eq!(build_grid(window(d(2020, 1, 1), d(2021, 1, 5)), Granularity::Weekly).len(), 53);
    }

    #[test]
    fn short_window_is_one_flagged_span() {
        let grid = build_grid(window(d(2020, 1, 1), d(2020, 1, 3)), Granularity::Fortnightly);
        assert_eq!(grid.len(), 1);
        assert!(grid.spans[0].partial);
        assert_eq!(grid.spans[0].end, d(2020, 1, 3));
    }

    #[test]
    fn trailing_partial_span_is_kept() {
        let grid = build_grid(window(d(2020, 1, 1), d(2020, 1, 10)), Granularity::Weekly);
        assert_eq!(grid.len(), 2);
        assert!(!grid.spans[0].partial);
        assert!(grid.spans[1].partial);
        assert_eq!(grid.spans[1].start, d(2020, 1, 8));
    }

    #[test]
    fn week_boundaries() {
        let grid = build_grid(window(d(2020, 1, 1), d(2020, 3, 31)), Granularity::Weekly);
        let cases = [case(d(2020, 1, 1), "A"), case(d(2020, 1, 7), "A"), case(d(2020, 1, 8), "A")];
        let b = bucket_cases(&cases, &grid, Level::Lga, ["A", "B"]);
        assert_eq!(&b.series["A"].counts[..3], &[2, 1, 0]);
        assert_eq!(b.series["B"].total(), 0);
        assert_eq!(b.series["B"].counts.len(), grid.len());
    }

    #[test]
    fn empty_cases_give_zero_series() {
        let grid = build_grid(window(d(2020, 1, 1), d(2020, 3, 31)), Granularity::Weekly);
        let b = bucket_cases(&[], &grid, Level::Lga, ["A", "B", "C"]);
        assert_eq!(b.series.len(), 3);
        assert!(b.series.values().all(|s| s.total() == 0));
    }

    #[test]
    fn off_grid_case_is_quarantined() {
        let grid = build_grid(window(d(2020, 1, 1), d(2020, 1, 31)), Granularity::Weekly);
        let b = bucket_cases(&[case(d(2020, 2, 1), "A")], &grid, Level::Lga, ["A"]);
        assert_eq!(b.quarantined.len(), 1);
        assert_eq!(b.series["A"].total(), 0);
    }

    #[test]
    fn postal_level_keys_by_postcode() {
        let grid = build_grid(window(d(2020, 1, 1), d(2020, 1, 31)), Granularity::Weekly);
        let b = bucket_cases(&[case(d(2020, 1, 2), "A")], &grid, Level::PostalArea, Vec::<String>::new());
        assert_eq!(b.series["2000"].total(), 1);
    }

    #[test]
    fn headline_examples() {
        let rules = PhaseRules::default();
        assert_eq!(
            rules.classify("Greater Sydney lockdown extended"),
            Some((Phase::RestrictControlled, "lockdown"))
        );
        assert_eq!(rules.classify("Masks required on public transport").map(|r| r.0), Some(Phase::Eased));
        assert_eq!(rules.classify("Lockdown lifted but masks required").map(|r| r.0), Some(Phase::RestrictControlled));
        assert_eq!(rules.classify("New testing clinic"), None);
    }

    #[test]
    fn carry_forward_and_most_restrictive() {
        let grid = build_grid(window(d(2020, 1, 1), d(2020, 2, 25)), Granularity::Weekly);
        let ev = |date, text: &str| EventLine {
            date,
            text: text.into(),
        };
        let events = [
            ev(d(2020, 1, 9), "Masks required in shops"),
            ev(d(2020, 1, 23), "Curfew announced"),
            ev(d(2020, 1, 24), "Gathering limit raised"),
            ev(d(2020, 2, 6), "Testing hub opens"),
        ];
        let timeline = classify_phases(&events, &grid, &PhaseRules::default());
        use Phase::*;
        assert_eq!(
            timeline.labels,
            vec![Uncontrolled, Eased, Eased, RestrictControlled, RestrictControlled, RestrictControlled, RestrictControlled, RestrictControlled]
        );
        assert_eq!(timeline.carried, vec![true, false, true, false, true, true, true, true]);
        assert_eq!(timeline.triggering_events[3].len(), 2);
        assert_eq!(timeline.unmatched.len(), 1);
    }

    #[test]
    fn no_rules_or_no_events_means_uncontrolled() {
        let grid = build_grid(window(d(2020, 1, 1), d(2020, 3, 31)), Granularity::Weekly);
        let t = classify_phases(&[], &grid, &PhaseRules::default());
        assert!(t.labels.iter().all(|&p| p == Phase::Uncontrolled));
        let events = [EventLine {
            date: d(2020, 1, 2),
            text: "lockdown".into(),
        }];
        let t = classify_phases(&events, &grid, &PhaseRules::empty());
        assert!(t.labels.iter().all(|&p| p == Phase::Uncontrolled));
    }

    #[test]
    fn rules_load_from_json() {
        let rules: PhaseRules =
            serde_json::from_str(r#"{"eased":["face covering"],"restrict_controlled":["ring of steel"]}"#).unwrap();
        assert_eq!(rules.classify("Ring Of Steel around suburb").unwrap().0, Phase::RestrictControlled);
    }
}
