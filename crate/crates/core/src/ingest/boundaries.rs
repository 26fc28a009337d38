use std::collections::BTreeSet;
use std::io::Read;

use geojson::{Feature, FeatureCollection, GeoJson, Geometry, JsonObject, JsonValue, Value};
use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::domain::Level;

/// Closed ring of `[lon, lat]` positions; first position equals the last.
pub type Ring = Vec<[f64; 2]>;
/// Outer ring followed by holes.
pub type Polygon = Vec<Ring>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BBox {
    fn of_point(p: [f64; 2]) -> Self {
        Self {
            min_lon: p[0],
            min_lat: p[1],
            max_lon: p[0],
            max_lat: p[1],
        }
    }

    fn extend(&mut self, p: [f64; 2]) {
        self.min_lon = self.min_lon.min(p[0]);
        self.min_lat = self.min_lat.min(p[1]);
        self.max_lon = self.max_lon.max(p[0]);
        self.max_lat = self.max_lat.max(p[1]);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFeature {
    pub code: String,
    /// One entry for a polygon, several for a multipolygon.
    pub polygons: Vec<Polygon>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySet {
    pub level: Level,
    pub features: Vec<BoundaryFeature>,
    /// `None` only for an empty set.
    pub bbox: Option<BBox>,
}

impl BoundarySet {
    /// Validates the features and computes the bounding box.
    pub fn new(level: Level, features: Vec<BoundaryFeature>) -> Result<Self, IngestError> {
        let mut seen = BTreeSet::new();
        let mut bbox: Option<BBox> = None;
        for (index, feature) in features.iter().enumerate() {
            if feature.code.is_empty() {
                return Err(IngestError::BoundaryMissingCode { indices: vec![index] });
            }
            if !seen.insert(feature.code.as_str()) {
                return Err(IngestError::DuplicateBoundary {
                    code: feature.code.clone(),
                    index,
                });
            }
            if feature.polygons.is_empty() {
                return Err(IngestError::BoundaryFeature {
                    index,
                    message: "empty geometry".into(),
                });
            }
            for (p, polygon) in feature.polygons.iter().enumerate() {
                if polygon.is_empty() {
                    return Err(IngestError::BoundaryFeature {
                        index,
                        message: format!("polygon {p} has no rings"),
                    });
                }
                for (r, ring) in polygon.iter().enumerate() {
                    check_ring(ring).map_err(|message| IngestError::BoundaryFeature {
                        index,
                        message: format!("polygon {p} ring {r}: {message}"),
                    })?;
                    for &pos in ring {
                        match bbox.as_mut() {
                            Some(b) => b.extend(pos),
                            None => bbox = Some(BBox::of_point(pos)),
                        }
                    }
                }
            }
        }
        Ok(Self { level, features, bbox })
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.code.as_str())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Feature collection with `code` and `level` properties.
    pub fn to_feature_collection(&self) -> FeatureCollection {
        let features = self
            .features
            .iter()
            .map(|f| {
                let mut props = JsonObject::new();
                props.insert("code".into(), JsonValue::from(f.code.clone()));
                props.insert("level".into(), JsonValue::from(self.level.as_str()));
                let to_positions =
                    |poly: &Polygon| poly.iter().map(|ring| ring.iter().map(|p| p.to_vec()).collect()).collect();
                let value = if f.polygons.len() == 1 {
                    Value::Polygon(to_positions(&f.polygons[0]))
                } else {
                    Value::MultiPolygon(f.polygons.iter().map(to_positions).collect())
                };
                Feature {
                    bbox: None,
                    geometry: Some(Geometry::new(value)),
                    id: None,
                    properties: Some(props),
                    foreign_members: None,
                }
            })
            .collect();
        FeatureCollection {
            bbox: None,
            features,
            foreign_members: None,
        }
    }
}

fn check_ring(ring: &Ring) -> Result<(), String> {
    if ring.len() < 4 {
        return Err(format!("ring has {} positions, need at least 4", ring.len()));
    }
    if ring.iter().flatten().any(|c| !c.is_finite()) {
        return Err("non-finite coordinate".into());
    }
    if ring.first() != ring.last() {
        return Err("ring is not closed".into());
    }
    Ok(())
}

fn property_code(feature: &Feature) -> Option<String> {
    match feature.property("code")? {
        JsonValue::String(s) if !s.trim().is_empty() => Some(s.trim().to_string()),
        JsonValue::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn to_ring(positions: &[Vec<f64>], index: usize) -> Result<Ring, IngestError> {
    positions
        .iter()
        .map(|p| match p.as_slice() {
            [lon, lat, ..] => Ok([*lon, *lat]),
            _ => Err(IngestError::BoundaryFeature {
                index,
                message: "position with fewer than two coordinates".into(),
            }),
        })
        .collect()
}

/// Parses a GeoJSON feature collection of community boundaries.
///
/// Every feature needs a `code` property; an optional `level` property must
/// agree with `level`. All features lacking a code are reported together.
pub fn parse_boundaries<R: Read>(mut source: R, level: Level) -> Result<BoundarySet, IngestError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let collection = match text.parse::<GeoJson>() {
        Ok(GeoJson::FeatureCollection(fc)) => fc,
        Ok(_) => return Err(IngestError::GeoJson("expected a FeatureCollection".into())),
        Err(e) => return Err(IngestError::GeoJson(e.to_string())),
    };

    let missing: Vec<usize> = collection
        .features
        .iter()
        .enumerate()
        .filter(|(_, f)| property_code(f).is_none())
        .map(|(i, _)| i)
        .collect();
    if !missing.is_empty() {
        return Err(IngestError::BoundaryMissingCode { indices: missing });
    }

    let mut features = Vec::with_capacity(collection.features.len());
    for (index, feature) in collection.features.iter().enumerate() {
        if let Some(value) = feature.property("level") {
            if value.as_str() != Some(level.as_str()) {
                return Err(IngestError::BoundaryFeature {
                    index,
                    message: format!("level property {value} does not match `{level}`"),
                });
            }
        }
        let geometry = feature.geometry.as_ref().ok_or_else(|| IngestError::BoundaryFeature {
            index,
            message: "feature has no geometry".into(),
        })?;
        let polygon = |rings: &Vec<Vec<Vec<f64>>>| -> Result<Polygon, IngestError> {
            rings.iter().map(|r| to_ring(r, index)).collect()
        };
        let polygons = match &geometry.value {
            Value::Polygon(rings) => vec![polygon(rings)?],
            Value::MultiPolygon(polys) => polys.iter().map(polygon).collect::<Result<_, _>>()?,
            other => {
                return Err(IngestError::BoundaryFeature {
                    index,
                    message: format!("unsupported geometry type {}", other.type_name()),
                })
            }
        };
        features.push(BoundaryFeature {
            code: property_code(feature).expect("checked above"),
            polygons,
        });
    }
    BoundarySet::new(level, features)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(code: &str, ring_closed: bool) -> String {
        let last = if ring_closed { "[0,0]" } else { "[0,0.5]" };
        format!(
            r#"{{"type":"Feature","properties":{{"code":"{code}","level":"lga"}},
                "geometry":{{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],{last}]]}}}}"#
        )
    }

    fn collection(features: &[String]) -> String {
        format!(r#"{{"type":"FeatureCollection","features":[{}]}}"#, features.join(","))
    }

    #[test]
    fn one_square() {
        let set = parse_boundaries(collection(&[square("A", true)]).as_bytes(), Level::Lga).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(
            set.bbox,
            Some(BBox {
                min_lon: 0.0,
                min_lat: 0.0,
                max_lon: 1.0,
                max_lat: 1.0
            })
        );
    }

    #[test]
    fn unclosed_ring_names_feature_index() {
        let text = collection(&[square("A", true), square("B", false)]);
        match parse_boundaries(text.as_bytes(), Level::Lga) {
            Err(IngestError::BoundaryFeature { index, message }) => {
                assert_eq!(index, 1);
                assert!(message.contains("not closed"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_codes_are_all_listed() {
        let nocode = square("A", true).replace(r#""code":"A","#, "");
        let text = collection(&[nocode.clone(), square("B", true), nocode]);
        match parse_boundaries(text.as_bytes(), Level::Lga) {
            Err(IngestError::BoundaryMissingCode { indices }) => assert_eq!(indices, vec![0, 2]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_level_mismatch() {
        let text = collection(&[square("A", true), square("A", true)]);
        assert!(matches!(
            parse_boundaries(text.as_bytes(), Level::Lga),
            Err(IngestError::DuplicateBoundary { index: 1, .. })
        ));
        let text = collection(&[square("A", true)]);
        assert!(matches!(
            parse_boundaries(text.as_bytes(), Level::PostalArea),
            Err(IngestError::BoundaryFeature { index: 0, .. })
        ));
    }

    #[test]
    fn feature_collection_round_trip() {
        let set = parse_boundaries(collection(&[square("A", true)]).as_bytes(), Level::Lga).unwrap();
        let text = GeoJson::from(set.to_feature_collection()).to_string();
        assert_eq!(parse_boundaries(text.as_bytes(), Level::Lga).unwrap(), set);
    }
}
