//! Parsing and validation of the raw inputs into an immutable [`DatasetSnapshot`].
//!
//! Each parser is a pure function of its byte stream. Row-level problems in
//! the case and event streams are quarantined with a machine-readable reason;
//! structural problems (missing header, duplicate codes, broken geometry) are
//! fatal.

pub mod boundaries;
pub mod cases;
pub mod events;
pub mod fixture;
mod load;
pub mod profiles;
mod snapshot;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use boundaries::{parse_boundaries, BoundaryFeature, BoundarySet, BBox};
pub use cases::{parse_cases, AgeBand, CaseColumn, CaseParse, CaseRecord};
pub use events::{parse_events, EventLine, EventParse};
pub use fixture::{generate_fixture, FixtureFiles, FixtureOptions};
pub use load::{load_snapshot, LoadError, SourcePaths};
pub use profiles::{parse_profiles, write_profiles_csv, CommunityProfile, Indicators, INDICATOR_NAMES};
pub use snapshot::{DatasetSnapshot, ExclusionRule, IngestReport, JoinOptions, SnapshotInputs};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{source_name}: missing header or required columns: {}", columns.join(", "))]
    MissingColumns {
        source_name: &'static str,
        columns: Vec<String>,
    },
    #[error("{source_name}: row {row}: column `{column}`: {message}")]
    InvalidField {
        source_name: &'static str,
        row: usize,
        column: String,
        message: String,
    },
    #[error("profiles: duplicate community code `{0}`")]
    DuplicateCode(String),
    #[error("profiles: community `{code}`: {column} = {value} exceeds population {population}")]
    CountExceedsPopulation {
        code: String,
        column: &'static str,
        value: u64,
        population: u64,
    },
    #[error("boundaries: features without a `code` property at indices {indices:?}")]
    BoundaryMissingCode { indices: Vec<usize> },
    #[error("boundaries: feature {index}: {message}")]
    BoundaryFeature { index: usize, message: String },
    #[error("boundaries: duplicate code `{code}` at feature {index}")]
    DuplicateBoundary { code: String, index: usize },
    #[error("boundaries: {0}")]
    GeoJson(String),
    #[error("{0}: cross-reference does not resolve")]
    Unresolved(String),
    #[error("invalid study window: {0}")]
    InvalidWindow(String),
    #[error("invalid fixture request: {0}")]
    InvalidFixture(String),
    #[error("snapshot invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Why a row was set aside instead of accepted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum QuarantineReason {
    FieldCount { expected: usize, found: usize },
    Malformed { message: String },
    InvalidDate { value: String },
    OutsideWindow { date: String },
    MissingCode { column: String },
    InvalidAgeBand { value: String },
    UnknownCommunity { code: String },
    Excluded { rule: usize },
}

impl QuarantineReason {
    /// The `reason` tag this serializes with.
    pub fn code(&self) -> &'static str {
        match self {
            QuarantineReason::FieldCount { .. } => "field_count",
            QuarantineReason::Malformed { .. } => "malformed",
            QuarantineReason::InvalidDate { .. } => "invalid_date",
            QuarantineReason::OutsideWindow { .. } => "outside_window",
            QuarantineReason::MissingCode { .. } => "missing_code",
            QuarantineReason::InvalidAgeBand { .. } => "invalid_age_band",
            QuarantineReason::UnknownCommunity { .. } => "unknown_community",
            QuarantineReason::Excluded { .. } => "excluded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantinedRow {
    /// 1-based data row (the header is not counted).
    pub row: usize,
    pub raw: String,
    #[serde(flatten)]
    pub reason: QuarantineReason,
}
