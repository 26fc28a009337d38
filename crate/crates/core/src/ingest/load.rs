use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    parse_boundaries, parse_cases, parse_events, parse_profiles, DatasetSnapshot, EventParse, IngestError, JoinOptions,
    SnapshotInputs,
};
use crate::domain::{Level, StudyWindow};

/// Input files of one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourcePaths {
    pub cases: PathBuf,
    pub profiles: PathBuf,
    pub boundaries_lga: PathBuf,
    #[serde(default)]
    pub boundaries_postal: Option<PathBuf>,
    #[serde(default)]
    pub events: Option<PathBuf>,
}

impl SourcePaths {
    /// The file names [`FixtureFiles::write_to`](super::FixtureFiles::write_to) uses.
    pub fn default_names() -> Self {
        Self {
            cases: "cases.csv".into(),
            profiles: "profiles.csv".into(),
            boundaries_lga: "boundaries_lga.geojson".into(),
            boundaries_postal: Some("boundaries_postal.geojson".into()),
            events: Some("events.jsonl".into()),
        }
    }

    /// Resolves relative paths against `base`.
    pub fn relative_to(&self, base: &Path) -> Self {
        let join = |p: &PathBuf| base.join(p);
        Self {
            cases: join(&self.cases),
            profiles: join(&self.profiles),
            boundaries_lga: join(&self.boundaries_lga),
            boundaries_postal: self.boundaries_postal.as_ref().map(join),
            events: self.events.as_ref().map(join),
        }
    }
}

/// An ingest failure, with the file it came from when there is one.
#[derive(Debug, thiserror::Error)]
#[error("{}{error}", file.as_ref().map(|f| format!("{}: ", f.display())).unwrap_or_default())]
pub struct LoadError {
    pub file: Option<PathBuf>,
    #[source]
    pub error: IngestError,
}

fn open(path: &Path) -> Result<BufReader<File>, LoadError> {
    File::open(path).map(BufReader::new).map_err(|e| LoadError {
        file: Some(path.to_path_buf()),
        error: e.into(),
    })
}

fn in_file<T>(path: &Path, r: Result<T, IngestError>) -> Result<T, LoadError> {
    r.map_err(|error| LoadError {
        file: Some(path.to_path_buf()),
        error,
    })
}

/// Reads and joins every input file into a snapshot.
pub fn load_snapshot(paths: &SourcePaths, window: StudyWindow, options: &JoinOptions) -> Result<DatasetSnapshot, LoadError> {
    let cases = in_file(&paths.cases, parse_cases(open(&paths.cases)?, window))?;
    let profiles = in_file(&paths.profiles, parse_profiles(open(&paths.profiles)?))?;
    let mut boundaries = vec![in_file(
        &paths.boundaries_lga,
        parse_boundaries(open(&paths.boundaries_lga)?, Level::Lga),
    )?];
    if let Some(p) = &paths.boundaries_postal {
        boundaries.push(in_file(p, parse_boundaries(open(p)?, Level::PostalArea))?);
    }
    let events = match &paths.events {
        Some(p) => in_file(p, parse_events(open(p)?, window))?,
        None => EventParse::default(),
    };
    let inputs = SnapshotInputs {
        window,
        cases,
        profiles,
        boundaries,
        events,
    };
    DatasetSnapshot::assemble(inputs, options).map_err(|error| LoadError { file: None, error })
}
