use std::io::{BufRead, BufReader, Read};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::cases::parse_iso_date;
use super::{IngestError, QuarantineReason, QuarantinedRow};
use crate::domain::StudyWindow;

/// A dated media release or headline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLine {
    pub date: NaiveDate,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventParse {
    pub accepted: Vec<EventLine>,
    pub quarantined: Vec<QuarantinedRow>,
    pub rows_read: usize,
}

#[derive(Deserialize)]
struct RawEvent {
    date: String,
    text: String,
}

/// Parses newline-delimited `{"date": "...", "text": "..."}` objects.
/// Blank lines are skipped and not counted.
pub fn parse_events<R: Read>(source: R, window: StudyWindow) -> Result<EventParse, IngestError> {
    let mut out = EventParse::default();
    for line in BufReader::new(source).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.rows_read += 1;
        let row = out.rows_read;
        let quarantine = |reason| QuarantinedRow {
            row,
            raw: line.clone(),
            reason,
        };
        let raw: RawEvent = match serde_json::from_str(&line) {
            Ok(raw) => raw,
            Err(e) => {
                out.quarantined.push(quarantine(QuarantineReason::Malformed {
                    message: e.to_string(),
                }));
                continue;
            }
        };
        match parse_iso_date(raw.date.trim()) {
            None => out
                .quarantined
                .push(quarantine(QuarantineReason::InvalidDate { value: raw.date })),
            Some(date) if !window.contains(date) => out
                .quarantined
                .push(quarantine(QuarantineReason::OutsideWindow { date: raw.date })),
            Some(date) => out.accepted.push(EventLine { date, text: raw.text }),
        }
    }
    Ok(out)
}

/// Writes events in the layout [`parse_events`] reads.
pub fn write_events_jsonl<'a, W: std::io::Write>(
    mut sink: W,
    events: impl IntoIterator<Item = &'a EventLine>,
) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut sink, e)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_quarantines() {
        let window = StudyWindow::new(
            NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            NaiveDate::from_ymd_opt(2020, 6, 30).unwrap(),
        )
        .unwrap();
        let text = r#"{"date":"2020-03-30","text":"Greater Sydney lockdown extended"}

{"date":"2021-01-01","text":"late"}
not json
{"date":"30/03/2020","text":"bad date"}
"#;
        let parsed = parse_events(text.as_bytes(), window).unwrap();
        assert_eq!(parsed.rows_read, 4);
        assert_eq!(parsed.accepted.len(), 1);
        assert_eq!(parsed.accepted[0].text, "Greater Sydney lockdown extended");
        let rows: Vec<usize> = parsed.quarantined.iter().map(|q| q.row).collect();
        assert_eq!(rows, vec![2, 3, 4]);

        let mut buf = Vec::new();
        write_events_jsonl(&mut buf, &parsed.accepted).unwrap();
        assert_eq!(parse_events(buf.as_slice(), window).unwrap().accepted, parsed.accepted);
    }
}
