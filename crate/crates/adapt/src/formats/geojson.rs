use std::io::Read;

use adapt_core::geo::{GeoPolygon, GeoPolygonSet};
use serde_json::{json, Value};

use super::FormatError;

/// One exported class region: `rings[0]` is the exterior, the rest are
/// holes, each a closed list of `[lon, lat]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportedPolygon {
    pub image_id: u64,
    pub class_id: u8,
    pub rings: Vec<Vec<[f64; 2]>>,
}

fn feature(image_id: u64, poly: &GeoPolygon) -> Value {
    let rings: Vec<Vec<[f64; 2]>> = poly.rings().map(|r| r.iter().map(|g| [g.lon_deg, g.lat_deg]).collect()).collect();
    json!({
        "type": "Feature",
        "geometry": { "type": "Polygon", "coordinates": rings },
        "properties": { "class_id": poly.class_id, "image_id": image_id },
    })
}

/// One Feature per class region, in the order given.
pub fn feature_collection<'a>(sets: impl IntoIterator<Item = &'a GeoPolygonSet>) -> Value {
    let features: Vec<Value> = sets.into_iter().flat_map(|s| s.polygons.iter().map(|p| feature(s.image_id, p))).collect();
    json!({ "type": "FeatureCollection", "features": features })
}

fn invalid(what: &str) -> FormatError {
    FormatError::Invalid(format!("GeoJSON: {what}"))
}

pub fn read_feature_collection(r: impl Read) -> Result<Vec<ExportedPolygon>, FormatError> {
    let v: Value = serde_json::from_reader(r)?;
    if v["type"] != "FeatureCollection" {
        return Err(invalid("not a FeatureCollection"));
    }
    let features = v["features"].as_array().ok_or_else(|| invalid("missing features"))?;
    let mut out = Vec::with_capacity(features.len());
    for f in features {
        if f["geometry"]["type"] != "Polygon" {
            return Err(invalid("only Polygon geometries are exported"));
        }
        let props = &f["properties"];
        let image_id = props["image_id"].as_u64().ok_or_else(|| invalid("image_id"))?;
        let class_id = props["class_id"].as_u64().and_then(|c| u8::try_from(c).ok()).ok_or_else(|| invalid("class_id"))?;
        let rings: Vec<Vec<[f64; 2]>> = serde_json::from_value(f["geometry"]["coordinates"].clone())?;
        if rings.is_empty() {
            return Err(invalid("polygon without rings"));
        }
        out.push(ExportedPolygon { image_id, class_id, rings });
    }
    Ok(out)
}
