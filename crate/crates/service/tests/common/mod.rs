#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use epiportrait::config::Settings;
use epiportrait::engine::{Engine, SnapshotFile};
use epiportrait_core::ingest::generate_fixture;

pub fn engine(seed: u64, communities: usize, days: usize) -> Engine {
    let dataset = generate_fixture(seed, communities, days).unwrap();
    Engine::new(SnapshotFile::new(Settings::default(), dataset, None)).unwrap()
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_epiportrait"))
}

pub fn cli(args: &[&str]) -> Output {
    Command::new(bin()).args(args).env_remove("EPIPORTRAIT_BIND").output().unwrap()
}

pub fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}
