use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::IngestError;

/// The twelve census indicators, in axis order.
pub const INDICATOR_NAMES: [&str; 12] = [
    "median_age",
    "population",
    "area_size",
    "population_density",
    "median_rent",
    "median_mortgage",
    "median_personal_income",
    "median_family_income",
    "median_household_income",
    "avg_bedrooms_per_person",
    "avg_bedrooms_per_household",
    "public_transport_rate",
];

const POPULATION: usize = 1;
const AREA_SIZE: usize = 2;
const DENSITY: usize = 3;

/// Indicators that are derived from the base columns rather than read.
const DERIVED: [usize; 3] = [POPULATION, AREA_SIZE, DENSITY];

const BASE_COLUMNS: [&str; 8] = [
    "code",
    "name",
    "population",
    "area_km2",
    "aged_male_70p",
    "aged_female_70p",
    "lower_income",
    "lone_person",
];

/// Census indicator vector, always complete.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Indicators([f64; 12]);

impl Indicators {
    pub fn from_array(values: [f64; 12]) -> Self {
        Self(values)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        INDICATOR_NAMES.iter().position(|n| *n == name).map(|i| self.0[i])
    }

    pub fn values(&self) -> &[f64; 12] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        INDICATOR_NAMES.iter().copied().zip(self.0.iter().copied())
    }
}

impl Serialize for Indicators {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(12))?;
        for (name, value) in self.iter() {
            map.serialize_entry(name, &value)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Indicators {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct IndicatorVisitor;

        impl<'de> Visitor<'de> for IndicatorVisitor {
            type Value = Indicators;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of the twelve census indicators")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Indicators, A::Error> {
                let mut values = [None; 12];
                while let Some((key, value)) = map.next_entry::<String, f64>()? {
                    let slot = INDICATOR_NAMES
                        .iter()
                        .position(|n| *n == key)
                        .ok_or_else(|| de::Error::unknown_field(&key, &INDICATOR_NAMES))?;
                    values[slot] = Some(value);
                }
                let mut out = [0.0; 12];
                for (i, v) in values.into_iter().enumerate() {
                    out[i] = v.ok_or_else(|| de::Error::missing_field(INDICATOR_NAMES[i]))?;
                }
                Ok(Indicators(out))
            }
        }

        deserializer.deserialize_map(IndicatorVisitor)
    }
}

/// Census profile of one community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityProfile {
    pub code: String,
    pub name: String,
    pub population: u64,
    pub area_km2: f64,
    pub aged_male_70p: u64,
    pub aged_female_70p: u64,
    pub lower_income: u64,
    pub lone_person: u64,
    pub indicators: Indicators,
}

impl CommunityProfile {
    /// Assembles a profile, deriving `population`, `area_size` and
    /// `population_density` from the base fields. `measured` holds the nine
    /// non-derived indicators in axis order.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        code: impl Into<String>,
        name: impl Into<String>,
        population: u64,
        area_km2: f64,
        key_counts: [u64; 4],
        measured: [f64; 9],
    ) -> Self {
        let mut values = [0.0; 12];
        let mut it = measured.into_iter();
        for (i, slot) in values.iter_mut().enumerate() {
            if !DERIVED.contains(&i) {
                *slot = it.next().expect("nine measured indicators");
            }
        }
        values[POPULATION] = population as f64;
        values[AREA_SIZE] = area_km2;
        values[DENSITY] = population as f64 / area_km2;
        Self {
            code: code.into(),
            name: name.into(),
            population,
            area_km2,
            aged_male_70p: key_counts[0],
            aged_female_70p: key_counts[1],
            lower_income: key_counts[2],
            lone_person: key_counts[3],
            indicators: Indicators(values),
        }
    }

    pub fn key_counts(&self) -> [u64; 4] {
        [
            self.aged_male_70p,
            self.aged_female_70p,
            self.lower_income,
            self.lone_person,
        ]
    }

    /// The nine indicators that are read from input rather than derived.
    pub fn measured_indicators(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        let mut slots = out.iter_mut();
        for (i, v) in self.indicators.0.iter().enumerate() {
            if !DERIVED.contains(&i) {
                *slots.next().unwrap() = *v;
            }
        }
        out
    }

    pub(crate) fn validate(&self) -> Result<(), IngestError> {
        if !(self.area_km2.is_finite() && self.area_km2 > 0.0) {
            return Err(IngestError::Invariant(format!(
                "community `{}` has non-positive area {}",
                self.code, self.area_km2
            )));
        }
        let names = ["aged_male_70p", "aged_female_70p", "lower_income", "lone_person"];
        for (column, value) in names.into_iter().zip(self.key_counts()) {
            if value > self.population {
                return Err(IngestError::CountExceedsPopulation {
                    code: self.code.clone(),
                    column,
                    value,
                    population: self.population,
                });
            }
        }
        let expected = self.population as f64 / self.area_km2;
        let density = self.indicators.0[DENSITY];
        if (density - expected).abs() > 1e-3 * expected.abs() {
            return Err(IngestError::Invariant(format!(
                "community `{}` density {density} != population/area {expected}",
                self.code
            )));
        }
        if self.indicators.0.iter().any(|v| !v.is_finite()) {
            return Err(IngestError::Invariant(format!(
                "community `{}` has a non-finite indicator",
                self.code
            )));
        }
        Ok(())
    }
}

/// Column order written by [`write_profiles_csv`] and accepted by [`parse_profiles`].
pub fn profile_header() -> Vec<&'static str> {
    let mut header: Vec<&str> = BASE_COLUMNS.to_vec();
    header.extend(
        INDICATOR_NAMES
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != POPULATION)
            .map(|(_, n)| *n),
    );
    header
}

/// Parses the profile CSV into a map keyed by community code.
///
/// `population` is shared between the base columns and the indicator list,
/// so it appears once. `area_size` and `population_density` columns are
/// optional and ignored when present: both are recomputed from
/// `area_km2` and `population`.
pub fn parse_profiles<R: Read>(source: R) -> Result<BTreeMap<String, CommunityProfile>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let header = reader.headers()?.clone();
    let required: Vec<&str> = BASE_COLUMNS
        .iter()
        .copied()
        .chain(
            INDICATOR_NAMES
                .iter()
                .enumerate()
                .filter(|(i, _)| !DERIVED.contains(i))
                .map(|(_, n)| *n),
        )
        .collect();
    let missing: Vec<String> = required
        .iter()
        .filter(|name| !header.iter().any(|h| h == **name))
        .map(|s| s.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(IngestError::MissingColumns {
            source_name: "profiles",
            columns: missing,
        });
    }
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();

    let mut out = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let text = |name: &str| record.get(col(name)).unwrap_or("").to_string();
        let invalid = |column: &str, message: String| IngestError::InvalidField {
            source_name: "profiles",
            row,
            column: column.to_string(),
            message,
        };
        let count = |name: &str| -> Result<u64, IngestError> {
            let raw = text(name);
            let value: i64 = raw
                .parse()
                .map_err(|_| invalid(name, format!("`{raw}` is not an integer count")))?;
            u64::try_from(value).map_err(|_| invalid(name, format!("negative count {value}")))
        };
        let real = |name: &str| -> Result<f64, IngestError> {
            let raw = text(name);
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| invalid(name, format!("`{raw}` is not a number")))
        };

        let code = text("code");
        if code.is_empty() {
            return Err(invalid("code", "empty community code".into()));
        }
        let area = real("area_km2")?;
        if area <= 0.0 {
            return Err(invalid("area_km2", format!("area must be positive, got {area}")));
        }
        let mut measured = [0.0; 9];
        let names = INDICATOR_NAMES
            .iter()
            .enumerate()
            .filter(|(i, _)| !DERIVED.contains(i))
            .map(|(_, n)| *n);
        for (slot, name) in measured.iter_mut().zip(names) {
            *slot = real(name)?;
        }
        let profile = CommunityProfile::new(
            code.clone(),
            text("name"),
            count("population")?,
            area,
            [
                count("aged_male_70p")?,
                count("aged_female_70p")?,
                count("lower_income")?,
                count("lone_person")?,
            ],
            measured,
        );
        profile.validate()?;
        if out.insert(code.clone(), profile).is_some() {
            return Err(IngestError::DuplicateCode(code));
        }
    }
    Ok(out)
}

/// Writes profiles in the layout [`parse_profiles`] reads.
pub fn write_profiles_csv<'a, W: std::io::Write>(
    sink: W,
    profiles: impl IntoIterator<Item = &'a CommunityProfile>,
) -> Result<(), IngestError> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(profile_header())?;
    for p in profiles {
        let mut row = vec![
            p.code.clone(),
            p.name.clone(),
            p.population.to_string(),
            p.area_km2.to_string(),
        ];
        row.extend(p.key_counts().iter().map(|c| c.to_string()));
        row.extend(
            p.indicators
                .0
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != POPULATION)
                .map(|(_, v)| v.to_string()),
        );
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}
