use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::cases::{CaseColumn, CaseParse, CaseRecord};
use super::events::{EventLine, EventParse};
use super::profiles::CommunityProfile;
use super::{BoundarySet, IngestError, QuarantineReason, QuarantinedRow};
use crate::domain::{Level, StudyWindow};

/// Drops case rows whose `column` matches, case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionRule {
    pub column: CaseColumn,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equals: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
}

impl ExclusionRule {
    pub fn matches(&self, case: &CaseRecord) -> bool {
        let value = case.column(self.column).to_lowercase();
        let equals = self.equals.as_ref().map(|e| value == e.to_lowercase());
        let contains = self.contains.as_ref().map(|c| value.contains(&c.to_lowercase()));
        match (equals, contains) {
            (None, None) => false,
            (e, c) => e.unwrap_or(true) && c.unwrap_or(true),
        }
    }
}

/// Settings applied while joining cases to communities.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinOptions {
    /// Retired community code → current code (merged councils).
    #[serde(default)]
    pub code_aliases: BTreeMap<String, String>,
    #[serde(default)]
    pub exclusions: Vec<ExclusionRule>,
}

/// Everything the four parsers produced, before joining.
#[derive(Debug, Clone)]
pub struct SnapshotInputs {
    pub window: StudyWindow,
    pub cases: CaseParse,
    pub profiles: BTreeMap<String, CommunityProfile>,
    pub boundaries: Vec<BoundarySet>,
    pub events: EventParse,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    /// Case data rows in the source, accepted or not.
    pub case_rows: usize,
    pub quarantined: Vec<QuarantinedRow>,
    pub event_rows: usize,
    pub events_quarantined: Vec<QuarantinedRow>,
}

/// Validated, immutable dataset. The only ways to obtain one are
/// [`DatasetSnapshot::assemble`] and deserialization, and both validate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSnapshot")]
pub struct DatasetSnapshot {
    window: StudyWindow,
    communities: BTreeMap<String, CommunityProfile>,
    boundaries: BTreeMap<Level, BoundarySet>,
    cases: Vec<CaseRecord>,
    events: Vec<EventLine>,
    report: IngestReport,
}

#[derive(Deserialize)]
struct RawSnapshot {
    window: StudyWindow,
    communities: BTreeMap<String, CommunityProfile>,
    boundaries: BTreeMap<Level, BoundarySet>,
    cases: Vec<CaseRecord>,
    events: Vec<EventLine>,
    report: IngestReport,
}

impl TryFrom<RawSnapshot> for DatasetSnapshot {
    type Error = IngestError;

    fn try_from(raw: RawSnapshot) -> Result<Self, Self::Error> {
        let snapshot = DatasetSnapshot {
            window: raw.window,
            communities: raw.communities,
            boundaries: raw.boundaries,
            cases: raw.cases,
            events: raw.events,
            report: raw.report,
        };
        snapshot.validate()?;
        Ok(snapshot)
    }
}

fn raw_case_line(case: &CaseRecord) -> String {
    [
        CaseColumn::NotificationDate,
        CaseColumn::PostalCode,
        CaseColumn::LgaCode,
        CaseColumn::AgeBand,
        CaseColumn::LikelySource,
    ]
    .map(|c| case.column(c))
    .join(",")
}

impl DatasetSnapshot {
    /// Joins parsed inputs into a snapshot. Cases are re-keyed through the
    /// alias table, filtered by the exclusion rules, and quarantined when
    /// their community is unknown.
    pub fn assemble(inputs: SnapshotInputs, options: &JoinOptions) -> Result<Self, IngestError> {
        let SnapshotInputs {
            window,
            cases,
            profiles,
            boundaries,
            events,
        } = inputs;

        let mut by_level = BTreeMap::new();
        for set in boundaries {
            let level = set.level;
            if by_level.insert(level, set).is_some() {
                return Err(IngestError::Invariant(format!("two boundary sets for level {level}")));
            }
        }

        let mut quarantined = cases.quarantined;
        let mut accepted = Vec::with_capacity(cases.accepted.len());
        debug_assert_eq!(cases.accepted.len(), cases.accepted_rows.len());
        for (mut case, row) in cases.accepted.into_iter().zip(cases.accepted_rows) {
            if let Some(current) = options.code_aliases.get(&case.community_code) {
                case.community_code = current.clone();
            }
            let reason = if let Some(rule) = options.exclusions.iter().position(|r| r.matches(&case)) {
                Some(QuarantineReason::Excluded { rule })
            } else if !profiles.contains_key(&case.community_code) {
                Some(QuarantineReason::UnknownCommunity {
                    code: case.community_code.clone(),
                })
            } else {
                None
            };
            match reason {
                Some(reason) => quarantined.push(QuarantinedRow {
                    row,
                    raw: raw_case_line(&case),
                    reason,
                }),
                None => accepted.push(case),
            }
        }
        quarantined.sort_by_key(|q| q.row);

        let snapshot = DatasetSnapshot {
            window,
            communities: profiles,
            boundaries: by_level,
            cases: accepted,
            events: events.accepted,
            report: IngestReport {
                case_rows: cases.rows_read,
                quarantined,
                event_rows: events.rows_read,
                events_quarantined: events.quarantined,
            },
        };
        snapshot.validate()?;
        Ok(snapshot)
    }

    fn validate(&self) -> Result<(), IngestError> {
        if self.window.start > self.window.end {
            return Err(IngestError::InvalidWindow(self.window.to_string()));
        }
        for (code, profile) in &self.communities {
            if *code != profile.code {
                return Err(IngestError::Invariant(format!(
                    "profile keyed `{code}` carries code `{}`",
                    profile.code
                )));
            }
            profile.validate()?;
        }
        for case in &self.cases {
            if !self.window.contains(case.notification_date) {
                return Err(IngestError::Invariant(format!(
                    "case dated {} outside {}",
                    case.notification_date, self.window
                )));
            }
            if !self.communities.contains_key(&case.community_code) {
                return Err(IngestError::Unresolved(format!("case community `{}`", case.community_code)));
            }
        }
        for (level, set) in &self.boundaries {
            if *level != set.level {
                return Err(IngestError::Invariant(format!("boundary set filed under {level}")));
            }
        }
        if let Some(lga) = self.boundaries.get(&Level::Lga) {
            let drawn: BTreeSet<&str> = lga.codes().collect();
            let known: BTreeSet<&str> = self.communities.keys().map(String::as_str).collect();
            if let Some(code) = drawn.difference(&known).next() {
                return Err(IngestError::Unresolved(format!("boundary `{code}` has no profile")));
            }
            if let Some(code) = known.difference(&drawn).next() {
                return Err(IngestError::Unresolved(format!("community `{code}` has no boundary")));
            }
        }
        for event in &self.events {
            if !self.window.contains(event.date) {
                return Err(IngestError::Invariant(format!("event dated {} outside window", event.date)));
            }
        }
        let r = &self.report;
        if r.case_rows != self.cases.len() + r.quarantined.len() {
            return Err(IngestError::Invariant(format!(
                "{} case rows but {} accepted + {} quarantined",
                r.case_rows,
                self.cases.len(),
                r.quarantined.len()
            )));
        }
        if r.event_rows != self.events.len() + r.events_quarantined.len() {
            return Err(IngestError::Invariant("event rows not conserved".into()));
        }
        Ok(())
    }

    pub fn window(&self) -> StudyWindow {
        self.window
    }

    pub fn communities(&self) -> &BTreeMap<String, CommunityProfile> {
        &self.communities
    }

    pub fn boundaries(&self, level: Level) -> Option<&BoundarySet> {
        self.boundaries.get(&level)
    }

    pub fn cases(&self) -> &[CaseRecord] {
        &self.cases
    }

    pub fn events(&self) -> &[EventLine] {
        &self.events
    }

    pub fn report(&self) -> &IngestReport {
        &self.report
    }

    /// Every community key at `level`: profiles for LGAs; for postal areas,
    /// drawn boundaries plus any postal code seen in a case.
    pub fn community_keys(&self, level: Level) -> BTreeSet<String> {
        match level {
            Level::Lga => self.communities.keys().cloned().collect(),
            Level::PostalArea => self
                .boundaries
                .get(&Level::PostalArea)
                .into_iter()
                .flat_map(|b| b.codes().map(str::to_string))
                .chain(self.cases.iter().map(|c| c.postal_code.clone()))
                .collect(),
        }
    }

    /// `(code, display name)` pairs at `level`. Postal areas are named by code.
    pub fn names(&self, level: Level) -> Vec<(String, String)> {
        match level {
            Level::Lga => self
                .communities
                .values()
                .map(|p| (p.code.clone(), p.name.clone()))
                .collect(),
            Level::PostalArea => self
                .community_keys(level)
                .into_iter()
                .map(|c| (c.clone(), c))
                .collect(),
        }
    }

    /// Canonical bytes; identical snapshots always give identical bytes.
    pub fn to_json_bytes(&self) -> Vec<u8> {
        crate::json::to_vec(self).expect("snapshot serializes")
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_cases, AgeBand};
    use chrono::NaiveDate;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn profile(code: &str) -> CommunityProfile {
        CommunityProfile::new(code, code, 1000, 10.0, [10, 10, 10, 10], [1.0; 9])
    }

    fn inputs(csv: &str) -> SnapshotInputs {
        let window = StudyWindow::new(d(2020, 1, 1), d(2020, 3, 31)).unwrap();
        SnapshotInputs {
            window,
            cases: parse_cases(csv.as_bytes(), window).unwrap(),
            profiles: [profile("BAYSIDE"), profile("SYD")]
                .into_iter()
                .map(|p| (p.code.clone(), p))
                .collect(),
            boundaries: vec![],
            events: EventParse::default(),
        }
    }

    const CSV: &str = "notification_date,postal_code,lga_code,age_band,likely_source\n\
        2020-01-02,2000,SYD,20-29,Overseas\n\
        2020-01-03,2216,ROCKDALE,30-39,\n\
        2020-01-04,2000,NOWHERE,30-39,\n\
        2020-01-05,2000,SYD,30-39,Ship crew member\n\
        2020-13-05,2000,SYD,30-39,\n";

    #[test]
    fn join_aliases_excludes_and_conserves() {
        let options = JoinOptions {
            code_aliases: [("ROCKDALE".to_string(), "BAYSIDE".to_string())].into(),
            exclusions: vec![ExclusionRule {
                column: CaseColumn::LikelySource,
                equals: None,
                contains: Some("SHIP CREW".into()),
            }],
        };
        let snap = DatasetSnapshot::assemble(inputs(CSV), &options).unwrap();
        assert_eq!(snap.cases().len(), 2);
        assert_eq!(snap.cases()[1].community_code, "BAYSIDE");
        assert_eq!(snap.cases()[1].age_band, AgeBand::Band(30));
        let reasons: Vec<_> = snap.report().quarantined.iter().map(|q| (q.row, &q.reason)).collect();
        assert_eq!(reasons.len(), 3);
        assert!(matches!(reasons[0], (3, QuarantineReason::UnknownCommunity { code }) if code == "NOWHERE"));
        assert!(matches!(reasons[1], (4, QuarantineReason::Excluded { rule: 0 })));
        assert!(matches!(reasons[2], (5, QuarantineReason::InvalidDate { .. })));
        assert_eq!(snap.report().case_rows, 5);
    }

    #[test]
    fn serialized_snapshot_round_trips() {
        let snap = DatasetSnapshot::assemble(inputs(CSV), &JoinOptions::default()).unwrap();
        let bytes = snap.to_json_bytes();
        let back = DatasetSnapshot::from_json_slice(&bytes).unwrap();
        assert_eq!(back, snap);
        assert_eq!(back.to_json_bytes(), bytes);
    }

    #[test]
    fn tampered_snapshot_is_rejected() {
        let snap = DatasetSnapshot::assemble(inputs(CSV), &JoinOptions::default()).unwrap();
        let text = String::from_utf8(snap.to_json_bytes()).unwrap();
        let tampered = text.replacen("\"community_code\":\"SYD\"", "\"community_code\":\"GHOST\"", 1);
        assert_ne!(text, tampered);
        assert!(DatasetSnapshot::from_json_slice(tampered.as_bytes()).is_err());
        let tampered = text.replacen("\"case_rows\":5", "\"case_rows\":6", 1);
        assert!(DatasetSnapshot::from_json_slice(tampered.as_bytes()).is_err());
    }

    #[test]
    fn lga_boundaries_must_cover_communities() {
        let mut i = inputs(CSV);
        let ring = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 0.0]];
        i.boundaries = vec![BoundarySet::new(
            Level::Lga,
            vec![crate::ingest::BoundaryFeature {
                code: "SYD".into(),
                polygons: vec![vec![ring]],
            }],
        )
        .unwrap()];
        assert!(matches!(
            DatasetSnapshot::assemble(i, &JoinOptions::default()),
            Err(IngestError::Unresolved(msg)) if msg.contains("BAYSIDE")
        ));
    }
}
