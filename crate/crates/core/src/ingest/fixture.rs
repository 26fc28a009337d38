//! Deterministic desk-scale datasets.
//!
//! The generator writes the same four file formats the real importer reads
//! and the snapshot is obtained by parsing those bytes, so a fixture
//! exercises exactly the production path.

use std::fs;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::boundaries::{BoundaryFeature, BoundarySet};
use super::events::{write_events_jsonl, EventLine};
use super::profiles::{write_profiles_csv, CommunityProfile};
use super::snapshot::{DatasetSnapshot, JoinOptions, SnapshotInputs};
use super::{parse_boundaries, parse_cases, parse_events, parse_profiles, IngestError, SourcePaths};
use crate::domain::{Level, StudyWindow};

const NAMES: [&str; 128] = [
    "Albury", "Armidale Regional", "Ballina", "Balranald", "Bathurst Regional", "Bayside",
    "Bega Valley", "Bellingen", "Berrigan", "Blacktown", "Bland", "Blayney", "Blue Mountains",
    "Bogan", "Bourke", "Brewarrina", "Broken Hill", "Burwood", "Byron", "Cabonne", "Camden",
    "Campbelltown", "Canada Bay", "Canterbury-Bankstown", "Carrathool", "Central Coast",
    "Central Darling", "Cessnock", "Clarence Valley", "Cobar", "Coffs Harbour", "Coolamon",
    "Coonamble", "Cootamundra-Gundagai", "Cowra", "Cumberland", "Dubbo Regional", "Dungog",
    "Edward River", "Eurobodalla", "Fairfield", "Federation", "Forbes", "Georges River",
    "Gilgandra", "Glen Innes Severn", "Goulburn Mulwaree", "Greater Hume", "Griffith",
    "Gunnedah", "Gwydir", "Hawkesbury", "Hay", "Hilltops", "Hornsby", "Hunters Hill",
    "Inner West", "Inverell", "Junee", "Kempsey", "Kiama", "Ku-ring-gai", "Kyogle", "Lachlan",
    "Lake Macquarie", "Lane Cove", "Leeton", "Lismore", "Lithgow", "Liverpool",
    "Liverpool Plains", "Lockhart", "Maitland", "Mid-Coast", "Mid-Western Regional",
    "Moree Plains", "Mosman", "Murray River", "Murrumbidgee", "Muswellbrook", "Nambucca",
    "Narrabri", "Narrandera", "Narromine", "Newcastle", "North Sydney", "Northern Beaches",
    "Oberon", "Orange", "Parkes", "Parramatta", "Penrith", "Port Macquarie-Hastings",
    "Port Stephens", "Queanbeyan-Palerang", "Randwick", "Richmond Valley", "Ryde",
    "Shellharbour", "Shoalhaven", "Singleton", "Snowy Monaro", "Snowy Valleys", "Strathfield",
    "Sutherland Shire", "Sydney", "Tamworth Regional", "Temora", "Tenterfield",
    "The Hills Shire", "Tweed", "Upper Hunter", "Upper Lachlan", "Uralla", "Wagga Wagga",
    "Walcha", "Walgett", "Warren", "Warrumbungle", "Waverley", "Weddin", "Wentworth",
    "Willoughby", "Wingecarribee", "Wollondilly", "Wollongong", "Woollahra", "Yass Valley",
];

const SOURCES: [&str; 4] = [
    "Locally acquired - linked to known case or cluster",
    "Locally acquired - no links to known case or cluster",
    "Overseas",
    "",
];

const CORRUPT_DATES: [&str; 5] = ["2020-13-01", "31/02/2020", "not-a-date", "2020-02-30", "20200115"];

const RESTRICT_HEADLINES: [&str; 4] = [
    "Greater Sydney lockdown extended",
    "Curfew imposed across {name}",
    "Stay-at-home orders announced for {name}",
    "Bubble restriction introduced for regional travel",
];

const EASED_HEADLINES: [&str; 4] = [
    "Masks required on public transport",
    "Gathering limit raised for outdoor events",
    "Social distance rules remain for cafes in {name}",
    "Mask rules relaxed for schools",
];

const NEUTRAL_HEADLINES: [&str; 3] = [
    "Testing clinic opens in {name}",
    "Health minister thanks frontline workers",
    "Vaccination hub extends hours in {name}",
];

/// Relative positions (fraction of the window) and sizes of the case waves.
const WAVES: [(f64, f64); 3] = [(0.12, 1.0), (0.45, 0.4), (0.8, 3.0)];

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureOptions {
    pub seed: u64,
    pub communities: usize,
    pub days: usize,
    pub start: NaiveDate,
    /// Exact number of case rows; defaults to half a case per community-day.
    pub case_rows: Option<usize>,
    /// How many case rows get an unparseable date.
    pub corrupt_dates: usize,
}

impl FixtureOptions {
    pub fn new(seed: u64, communities: usize, days: usize) -> Self {
        Self {
            seed,
            communities,
            days,
            start: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            case_rows: None,
            corrupt_dates: 0,
        }
    }

    pub fn window(&self) -> StudyWindow {
        let end = self.start + Duration::days(self.days.max(1) as i64 - 1);
        StudyWindow::new(self.start, end).unwrap()
    }
}

/// Raw input files of a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureFiles {
    pub window: StudyWindow,
    pub cases_csv: Vec<u8>,
    pub profiles_csv: Vec<u8>,
    pub boundaries_lga: Vec<u8>,
    pub boundaries_postal: Vec<u8>,
    pub events_jsonl: Vec<u8>,
    /// Case rows written with a corrupted date.
    pub corrupted_rows: usize,
}

struct Community {
    profile: CommunityProfile,
    postal: [String; 2],
    cell: [f64; 2],
}

const CELL: f64 = 0.2;

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn make_communities(rng: &mut ChaCha8Rng, n: usize) -> Vec<Community> {
    let cols = (n as f64).sqrt().ceil() as usize;
    (0..n)
        .map(|i| {
            let population = log_uniform(rng, 3_000.0, 400_000.0).round() as u64;
            let area = round2(log_uniform(rng, 5.0, 50_000.0));
            let pop = population as f64;
            let frac = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| (pop * rng.gen_range(lo..hi)).round() as u64;
            let counts = [
                frac(rng, 0.03, 0.08),
                frac(rng, 0.04, 0.09),
                frac(rng, 0.08, 0.30),
                frac(rng, 0.05, 0.15),
            ];
            let measured = [
                round2(rng.gen_range(30.0..55.0)),
                round2(rng.gen_range(200.0..650.0)),
                round2(rng.gen_range(1_200.0..2_900.0)),
                round2(rng.gen_range(500.0..1_100.0)),
                round2(rng.gen_range(1_200.0..2_900.0)),
                round2(rng.gen_range(1_000.0..2_500.0)),
                round2(rng.gen_range(1.0..1.8)),
                round2(rng.gen_range(2.5..3.6)),
                round2(rng.gen_range(0.01..0.35)),
            ];
            let name = NAMES
                .get(i)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("Community {}", i + 1));
            let code = format!("{}", 10_000 + 50 * (i + 1));
            let postal = [format!("{}", 2_000 + 2 * i), format!("{}", 2_001 + 2 * i)];
            let cell = [150.0 + (i % cols) as f64 * CELL, -33.0 - (i / cols) as f64 * CELL];
            Community {
                profile: CommunityProfile::new(code, name, population, area, counts, measured),
                postal,
                cell,
            }
        })
        .collect()
}

fn rect(lon0: f64, lat0: f64, width: f64, height: f64) -> Vec<Vec<[f64; 2]>> {
    let (lon1, lat1) = (lon0 + width, lat0 - height);
    vec![vec![[lon0, lat0], [lon1, lat0], [lon1, lat1], [lon0, lat1], [lon0, lat0]]]
}

fn geojson_bytes(set: &BoundarySet) -> Vec<u8> {
    geojson::GeoJson::from(set.to_feature_collection())
        .to_string()
        .into_bytes()
}

impl FixtureFiles {
    pub fn generate(options: &FixtureOptions) -> Result<Self, IngestError> {
        if options.communities == 0 {
            return Err(IngestError::InvalidFixture("need at least one community".into()));
        }
        if options.days == 0 {
            return Err(IngestError::InvalidFixture("need at least one day".into()));
        }
        let window = options.window();
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let communities = make_communities(&mut rng, options.communities);

        let mut profiles_csv = Vec::new();
        write_profiles_csv(&mut profiles_csv, communities.iter().map(|c| &c.profile))?;

        let lga = BoundarySet::new(
            Level::Lga,
            communities
                .iter()
                .map(|c| BoundaryFeature {
                    code: c.profile.code.clone(),
                    polygons: vec![rect(c.cell[0], c.cell[1], CELL, CELL)],
                })
                .collect(),
        )?;
        let postal = BoundarySet::new(
            Level::PostalArea,
            communities
                .iter()
                .flat_map(|c| {
                    let half = CELL / 2.0;
                    [
                        BoundaryFeature {
                            code: c.postal[0].clone(),
                            polygons: vec![rect(c.cell[0], c.cell[1], half, CELL)],
                        },
                        BoundaryFeature {
                            code: c.postal[1].clone(),
                            polygons: vec![rect(c.cell[0] + half, c.cell[1], half, CELL)],
                        },
                    ]
                })
                .collect(),
        )?;

        let (cases_csv, corrupted_rows) = generate_cases(&mut rng, &communities, options)?;

        let names: Vec<&str> = communities.iter().map(|c| c.profile.name.as_str()).collect();
        let events = generate_events(&mut rng, &names, window);
        let mut events_jsonl = Vec::new();
        write_events_jsonl(&mut events_jsonl, &events)?;

        Ok(Self {
            window,
            cases_csv,
            profiles_csv,
            boundaries_lga: geojson_bytes(&lga),
            boundaries_postal: geojson_bytes(&postal),
            events_jsonl,
            corrupted_rows,
        })
    }

    /// Runs the four parsers over the generated bytes and joins the result.
    pub fn parse(&self, options: &JoinOptions) -> Result<DatasetSnapshot, IngestError> {
        let inputs = SnapshotInputs {
            window: self.window,
            cases: parse_cases(self.cases_csv.as_slice(), self.window)?,
            profiles: parse_profiles(self.profiles_csv.as_slice())?,
            boundaries: vec![
                parse_boundaries(self.boundaries_lga.as_slice(), Level::Lga)?,
                parse_boundaries(self.boundaries_postal.as_slice(), Level::PostalArea)?,
            ],
            events: parse_events(self.events_jsonl.as_slice(), self.window)?,
        };
        DatasetSnapshot::assemble(inputs, options)
    }

    /// Writes the five files into `dir` under fixed names.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<SourcePaths> {
        fs::create_dir_all(dir)?;
        let files = [
            ("cases.csv", &self.cases_csv),
            ("profiles.csv", &self.profiles_csv),
            ("boundaries_lga.geojson", &self.boundaries_lga),
            ("boundaries_postal.geojson", &self.boundaries_postal),
            ("events.jsonl", &self.events_jsonl),
        ];
        for (name, bytes) in files {
            fs::write(dir.join(name), bytes)?;
        }
        Ok(SourcePaths::default_names().relative_to(dir))
    }
}

/// Expected cases per (community, day): a few Gaussian waves whose size and
/// timing vary by community.
fn intensity(rng: &mut ChaCha8Rng, communities: &[Community], days: usize) -> Vec<f64> {
    let n = days as f64;
    let sigma = (0.05 * n).max(2.0);
    let mut weights = Vec::with_capacity(communities.len() * days);
    for c in communities {
        let scale = (c.profile.population as f64 / 100_000.0) * rng.gen_range(0.2..2.0);
        let shift = rng.gen_range(-0.03..0.03) * n;
        let amps: Vec<f64> = WAVES
            .iter()
            .map(|&(_, size)| if rng.gen_bool(0.2) { 0.0 } else { size * rng.gen_range(0.3..1.5) })
            .collect();
        for d in 0..days {
            let t = d as f64;
            let wave: f64 = WAVES
                .iter()
                .zip(&amps)
                .map(|(&(at, _), amp)| {
                    let z = (t - at * n - shift) / sigma;
                    amp * (-0.5 * z * z).exp()
                })
                .sum();
            weights.push(scale * wave + 1e-4);
        }
    }
    weights
}

fn generate_cases(
    rng: &mut ChaCha8Rng,
    communities: &[Community],
    options: &FixtureOptions,
) -> Result<(Vec<u8>, usize), IngestError> {
    let days = options.days;
    let rows = options
        .case_rows
        .unwrap_or_else(|| (0.5 * (communities.len() * days) as f64).ceil() as usize);
    if options.corrupt_dates > rows {
        return Err(IngestError::InvalidFixture(format!(
            "cannot corrupt {} of {rows} rows",
            options.corrupt_dates
        )));
    }
    let weights = intensity(rng, communities, days);
    let pick = WeightedIndex::new(&weights).expect("positive weights");
    let mut cells: Vec<usize> = (0..rows).map(|_| pick.sample(rng)).collect();
    cells.sort_unstable_by_key(|&cell| (cell % days, cell / days));

    let mut records: Vec<[String; 5]> = cells
        .into_iter()
        .map(|cell| {
            let c = &communities[cell / days];
            let date = options.start + Duration::days((cell % days) as i64);
            let band = rng.gen_range(0..10u8);
            let age = if band == 9 { "90+".to_string() } else { format!("{}-{}", band * 10, band * 10 + 9) };
            [
                date.to_string(),
                c.postal[rng.gen_range(0..2)].clone(),
                c.profile.code.clone(),
                age,
                SOURCES[rng.gen_range(0..SOURCES.len())].to_string(),
            ]
        })
        .collect();
    for (k, row) in sample(rng, rows, options.corrupt_dates).into_iter().enumerate() {
        records[row][0] = CORRUPT_DATES[k % CORRUPT_DATES.len()].to_string();
    }

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(super::cases::CASE_COLUMNS)?;
    for r in &records {
        writer.write_record(r)?;
    }
    let bytes = writer.into_inner().map_err(|e| IngestError::Io(e.into_error()))?;
    Ok((bytes, options.corrupt_dates))
}

fn generate_events(rng: &mut ChaCha8Rng, names: &[&str], window: StudyWindow) -> Vec<EventLine> {
    let days = window.days() as f64;
    let sigma = (0.05 * days).max(2.0);
    let at = |offset: f64| window.start + Duration::days(offset.clamp(0.0, days - 1.0).round() as i64);
    let fill = |template: &str, rng: &mut ChaCha8Rng| template.replace("{name}", names[rng.gen_range(0..names.len())]);
    let mut events = Vec::new();
    for &(centre, _) in &WAVES {
        let peak = centre * days;
        let restrict = RESTRICT_HEADLINES[rng.gen_range(0..RESTRICT_HEADLINES.len())];
        events.push(EventLine {
            date: at(peak - sigma),
            text: fill(restrict, rng),
        });
        let eased = EASED_HEADLINES[rng.gen_range(0..EASED_HEADLINES.len())];
        events.push(EventLine {
            date: at(peak + 2.0 * sigma),
            text: fill(eased, rng),
        });
    }
    for _ in 0..(days / 30.0).ceil() as usize {
        let neutral = NEUTRAL_HEADLINES[rng.gen_range(0..NEUTRAL_HEADLINES.len())];
        events.push(EventLine {
            date: at(rng.gen_range(0.0..days)),
            text: fill(neutral, rng),
        });
    }
    events.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.text.cmp(&b.text)));
    events
}

/// Generates and parses a fixture with default options.
pub fn generate_fixture(seed: u64, communities: usize, days: usize) -> Result<DatasetSnapshot, IngestError> {
    FixtureFiles::generate(&FixtureOptions::new(seed, communities, days))?.parse(&JoinOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = generate_fixture(42, 10, 140).unwrap();
        let b = generate_fixture(42, 10, 140).unwrap();
        assert_eq!(a.to_json_bytes(), b.to_json_bytes());
        let c = generate_fixture(43, 10, 140).unwrap();
        assert_ne!(a.cases(), c.cases());
    }

    #[test]
    fn corrupted_dates_are_quarantined() {
        let mut options = FixtureOptions::new(5, 8, 200);
        options.case_rows = Some(1_000);
        options.corrupt_dates = 37;
        let files = FixtureFiles::generate(&options).unwrap();
        let snap = files.parse(&JoinOptions::default()).unwrap();
        assert_eq!(files.corrupted_rows, 37);
        assert_eq!(snap.report().case_rows, 1_000);
        assert_eq!(snap.cases().len(), 963);
        assert_eq!(snap.report().quarantined.len(), 37);
    }

    #[test]
    fn geometry_tiles_a_grid() {
        let snap = generate_fixture(1, 10, 30).unwrap();
        assert_eq!(snap.boundaries(Level::Lga).unwrap().len(), 10);
        assert_eq!(snap.boundaries(Level::PostalArea).unwrap().len(), 20);
        assert_eq!(snap.community_keys(Level::PostalArea).len(), 20);
    }

    #[test]
    fn rejects_empty_requests() {
        assert!(generate_fixture(1, 0, 10).is_err());
        assert!(generate_fixture(1, 3, 0).is_err());
    }
}
