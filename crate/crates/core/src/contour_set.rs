//! JSON persistence for per-slice object contours.
//!
//! ```json
//! {"object": "rectum",
//!  "slices": [{"z": 3, "provenance": "user-drawn", "vertices": [[1.0, 2.0], [4.5, 2.0], [3.0, 6.25]]}]}
//! ```

use crate::error::{Error, Result};
use crate::point::Point2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Cut computed from a template the user drew on this slice.
    UserDrawn,
    /// Cut computed from a template propagated from a neighbouring cut.
    Computed,
    /// Filled in between two segmented slices.
    Interpolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceContour {
    pub z: usize,
    pub provenance: Provenance,
    pub vertices: Vec<Point2>,
}

/// Closed polygons of one object, at most one per slice, sorted by `z`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ContourSet {
    #[serde(default)]
    pub object: String,
    pub slices: Vec<SliceContour>,
}

impl ContourSet {
    pub fn new(object: impl Into<String>) -> Self {
        Self {
            object: object.into(),
            slices: Vec::new(),
        }
    }

    pub fn get(&self, z: usize) -> Option<&SliceContour> {
        self.slices.iter().find(|s| s.z == z)
    }

    /// Checks the polygon and per-slice uniqueness rules, reporting the JSON path of the first violation.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (i, s) in self.slices.iter().enumerate() {
            let path = format!("slices[{i}]");
            if s.vertices.len() < 3 {
                return Err(Error::Schema {
                    path: format!("{path}.vertices"),
                    msg: format!("polygon needs at least 3 vertices, got {}", s.vertices.len()),
                });
            }
            if let Some(j) = s.vertices.iter().position(|p| !p.is_finite()) {
                return Err(Error::Schema {
                    path: format!("{path}.vertices[{j}]"),
                    msg: "non-finite coordinate".into(),
                });
            }
            if !seen.insert(s.z) {
                return Err(Error::Schema {
                    path: format!("{path}.z"),
                    msg: format!("second contour on slice {}", s.z),
                });
            }
        }
        Ok(())
    }
}

pub fn write_contour_set(cs: &ContourSet) -> Result<Vec<u8>> {
    cs.validate()?;
    serde_json::to_vec_pretty(cs).map_err(|e| Error::Internal(format!("contour serialization: {e}")))
}

pub fn read_contour_set(bytes: &[u8]) -> Result<ContourSet> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let cs: ContourSet = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        msg: e.inner().to_string(),
    })?;
    cs.validate()?;
    Ok(cs)
}
