use std::fmt;
use std::io::Read;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{IngestError, QuarantineReason, QuarantinedRow};
use crate::domain::StudyWindow;

pub const CASE_COLUMNS: [&str; 5] = [
    "notification_date",
    "postal_code",
    "lga_code",
    "age_band",
    "likely_source",
];

/// One notified infection case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub notification_date: NaiveDate,
    pub postal_code: String,
    pub community_code: String,
    pub age_band: AgeBand,
    pub likely_source: Option<String>,
}

/// Ten-year age band. `Band(lower)` covers `lower..=lower+9`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum AgeBand {
    Band(u8),
    NinetyPlus,
    Unknown,
}

impl fmt::Display for AgeBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgeBand::Band(lo) => write!(f, "{}-{}", lo, lo + 9),
            AgeBand::NinetyPlus => f.write_str("90+"),
            AgeBand::Unknown => f.write_str("unknown"),
        }
    }
}

impl FromStr for AgeBand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s.eq_ignore_ascii_case("unknown") || s.eq_ignore_ascii_case("none") {
            return Ok(AgeBand::Unknown);
        }
        if s == "90+" {
            return Ok(AgeBand::NinetyPlus);
        }
        let bad = || format!("`{s}` is not a 10-year age band");
        let (lo, hi) = s.split_once('-').ok_or_else(bad)?;
        let lo: u8 = lo.parse().map_err(|_| bad())?;
        let hi: u8 = hi.parse().map_err(|_| bad())?;
        if lo % 10 == 0 && lo <= 80 && hi == lo + 9 {
            Ok(AgeBand::Band(lo))
        } else {
            Err(bad())
        }
    }
}

impl From<AgeBand> for String {
    fn from(b: AgeBand) -> String {
        b.to_string()
    }
}

impl TryFrom<String> for AgeBand {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Named case column, used by exclusion rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseColumn {
    NotificationDate,
    PostalCode,
    LgaCode,
    AgeBand,
    LikelySource,
}

impl CaseRecord {
    pub fn column(&self, column: CaseColumn) -> String {
        match column {
            CaseColumn::NotificationDate => self.notification_date.to_string(),
            CaseColumn::PostalCode => self.postal_code.clone(),
            CaseColumn::LgaCode => self.community_code.clone(),
            CaseColumn::AgeBand => self.age_band.to_string(),
            CaseColumn::LikelySource => self.likely_source.clone().unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CaseParse {
    pub accepted: Vec<CaseRecord>,
    /// Source row of each accepted record, parallel to `accepted`.
    pub accepted_rows: Vec<usize>,
    pub quarantined: Vec<QuarantinedRow>,
    /// Data rows read, header excluded.
    pub rows_read: usize,
}

/// Strict `YYYY-MM-DD`.
pub(crate) fn parse_iso_date(s: &str) -> Option<NaiveDate> {
    let b = s.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return None;
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

/// Parses the case CSV. Every data row ends up either accepted or quarantined.
pub fn parse_cases<R: Read>(source: R, window: StudyWindow) -> Result<CaseParse, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader.headers()?.clone();
    let mut index = [0usize; 5];
    let mut missing = Vec::new();
    for (slot, name) in index.iter_mut().zip(CASE_COLUMNS) {
        match header.iter().position(|h| h == name) {
            Some(i) => *slot = i,
            None => missing.push(name.to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(IngestError::MissingColumns {
            source_name: "cases",
            columns: missing,
        });
    }

    let mut out = CaseParse::default();
    let mut record = csv::StringRecord::new();
    loop {
        let row = out.rows_read + 1;
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                out.rows_read += 1;
                let raw = record.iter().collect::<Vec<_>>().join(",");
                match case_from_record(&record, &index, header.len(), window) {
                    Ok(case) => {
                        out.accepted.push(case);
                        out.accepted_rows.push(row);
                    }
                    Err(reason) => out.quarantined.push(QuarantinedRow { row, raw, reason }),
                }
            }
            // A record the csv layer cannot decode still counts as a row.
            Err(err) if !matches!(err.kind(), csv::ErrorKind::Io(_)) => {
                out.rows_read += 1;
                out.quarantined.push(QuarantinedRow {
                    row,
                    raw: String::new(),
                    reason: QuarantineReason::Malformed {
                        message: err.to_string(),
                    },
                });
            }
            Err(err) => return Err(err.into()),
        }
    }
    Ok(out)
}

fn case_from_record(
    record: &csv::StringRecord,
    index: &[usize; 5],
    width: usize,
    window: StudyWindow,
) -> Result<CaseRecord, QuarantineReason> {
    if record.len() != width {
        return Err(QuarantineReason::FieldCount {
            expected: width,
            found: record.len(),
        });
    }
    let field = |i: usize| record.get(index[i]).unwrap_or("");

    let date_text = field(0);
    let notification_date = parse_iso_date(date_text).ok_or_else(|| QuarantineReason::InvalidDate {
        value: date_text.to_string(),
    })?;
    if !window.contains(notification_date) {
        return Err(QuarantineReason::OutsideWindow {
            date: date_text.to_string(),
        });
    }
    let postal_code = field(1);
    if postal_code.is_empty() {
        return Err(QuarantineReason::MissingCode {
            column: CASE_COLUMNS[1].into(),
        });
    }
    let community_code = field(2);
    if community_code.is_empty() {
        return Err(QuarantineReason::MissingCode {
            column: CASE_COLUMNS[2].into(),
        });
    }
    let age_band = field(3)
        .parse()
        .map_err(|_| QuarantineReason::InvalidAgeBand {
            value: field(3).to_string(),
        })?;
    let source = field(4);
    Ok(CaseRecord {
        notification_date,
        postal_code: postal_code.to_string(),
        community_code: community_code.to_string(),
        age_band,
        likely_source: (!source.is_empty()).then(|| source.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window() -> StudyWindow {
        StudyWindow::new(
            NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            NaiveDate::from_ymd_opt(2020, 12, 31).unwrap(),
        )
        .unwrap()
    }

    const HEADER: &str = "notification_date,postal_code,lga_code,age_band,likely_source\n";

    #[test]
    fn empty_file_with_header() {
        let parsed = parse_cases(HEADER.as_bytes(), window()).unwrap();
        assert!(parsed.accepted.is_empty());
        assert!(parsed.quarantined.is_empty());
        assert_eq!(parsed.rows_read, 0);
    }

    #[test]
    fn missing_header_is_fatal() {
        let err = parse_cases("".as_bytes(), window()).unwrap_err();
        assert!(matches!(err, IngestError::MissingColumns { .. }));
        let err = parse_cases("date,postcode\n2020-01-01,2000\n".as_bytes(), window()).unwrap_err();
        match err {
            IngestError::MissingColumns { columns, .. } => {
                assert!(columns.contains(&"notification_date".to_string()))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn columns_may_be_reordered() {
        let text = "lga_code,notification_date,age_band,postal_code,likely_source\n\
                    10050,2020-03-02,20-29,2000,Overseas\n";
        let parsed = parse_cases(text.as_bytes(), window()).unwrap();
        let case = &parsed.accepted[0];
        assert_eq!(case.community_code, "10050");
        assert_eq!(case.postal_code, "2000");
        assert_eq!(case.age_band, AgeBand::Band(20));
        assert_eq!(case.likely_source.as_deref(), Some("Overseas"));
    }

    #[test]
    fn bad_rows_are_quarantined_with_reasons() {
        let text = format!(
            "{HEADER}\
             2020-01-05,2000,10050,30-39,\n\
             2020/01/05,2000,10050,30-39,\n\
             2021-02-01,2000,10050,30-39,\n\
             2020-01-06,2000,,30-39,\n\
             2020-01-06,2000,10050,35-44,\n\
             2020-01-06,2000,10050\n\
             2020-02-30,2000,10050,90+,\n"
        );
        let parsed = parse_cases(text.as_bytes(), window()).unwrap();
        assert_eq!(parsed.rows_read, 7);
        assert_eq!(parsed.accepted.len(), 1);
        assert_eq!(parsed.accepted[0].likely_source, None);
        let reasons: Vec<_> = parsed.quarantined.iter().map(|q| (q.row, q.reason.clone())).collect();
        assert!(matches!(reasons[0], (2, QuarantineReason::InvalidDate { .. })));
        assert!(matches!(reasons[1], (3, QuarantineReason::OutsideWindow { .. })));
        assert!(matches!(reasons[2], (4, QuarantineReason::MissingCode { .. })));
        assert!(matches!(reasons[3], (5, QuarantineReason::InvalidAgeBand { .. })));
        assert!(matches!(reasons[4], (6, QuarantineReason::FieldCount { expected: 5, found: 3 })));
        assert!(matches!(reasons[5], (7, QuarantineReason::InvalidDate { .. })));
    }

    #[test]
    fn age_band_text_round_trips() {
        for text in ["0-9", "40-49", "80-89", "90+", "unknown"] {
            assert_eq!(text.parse::<AgeBand>().unwrap().to_string(), text);
        }
        assert!("5-14".parse::<AgeBand>().is_err());
        assert_eq!("".parse::<AgeBand>().unwrap(), AgeBand::Unknown);
    }

    #[test]
    fn dates_must_be_iso() {
        assert!(parse_iso_date("2020-01-05").is_some());
        assert!(parse_iso_date("2020-1-5").is_none());
        assert!(parse_iso_date("05/01/2020").is_none());
    }
}
