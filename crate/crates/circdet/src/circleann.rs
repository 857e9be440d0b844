//! CircleAnn v1: images, ground-truth annotations and optional scored detections.
//!
//! ```json
//! {
//!   "version": "circleann-v1",
//!   "images": [{"id": 0, "width": 512, "height": 512}],
//!   "annotations": [
//!     {"image_id": 0, "category": 0, "shape": {"kind": "circle", "cx": 80.5, "cy": 97.0, "r": 21.0}}
//!   ],
//!   "detections": [
//!     {"image_id": 0, "category": 0, "shape": {"kind": "box", "x": 60, "y": 75, "w": 41, "h": 44}, "score": 0.93}
//!   ]
//! }
//! ```

use std::collections::HashMap;
use std::path::Path;

use circdet_core::evalkit::{Detection, GroundTruth};
use circdet_core::geometry::Shape;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::fsio;

pub const VERSION: &str = "circleann-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Image {
    pub id: u64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    pub image_id: u64,
    pub category: usize,
    pub shape: Shape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoredAnnotation {
    pub image_id: u64,
    pub category: usize,
    pub shape: Shape,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub version: String,
    pub images: Vec<Image>,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<Vec<ScoredAnnotation>>,
}

impl Default for Document {
    fn default() -> Self {
        Self {
            version: VERSION.to_string(),
            images: Vec::new(),
            annotations: Vec::new(),
            detections: None,
        }
    }
}

impl Document {
    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: Document = serde_path_to_error::deserialize(de).map_err(|e| {
            let at = e.path().to_string();
            if at == "." {
                e.inner().to_string()
            } else {
                format!("{at}: {}", e.inner())
            }
        })?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fsio::read_to_string(path)?;
        Self::from_json(&text).map_err(|m| CliError::format(path, m))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fsio::write_atomic(path, self.to_json().as_bytes())
    }

    /// Schema checks beyond field types. Errors name the offending field.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.version != VERSION {
            return Err(format!("version: expected \"{VERSION}\", found \"{}\"", self.version));
        }
        let mut seen = HashMap::new();
        for (i, img) in self.images.iter().enumerate() {
            if let Some(first) = seen.insert(img.id, i) {
                return Err(format!("images[{i}].id: duplicate id {} (also images[{first}])", img.id));
            }
            if img.width == 0 || img.height == 0 {
                return Err(format!("images[{i}]: width and height must be positive"));
            }
        }
        for (i, a) in self.annotations.iter().enumerate() {
            if !seen.contains_key(&a.image_id) {
                return Err(format!("annotations[{i}].image_id: unknown image id {}", a.image_id));
            }
            a.shape
                .validate()
                .map_err(|e| format!("annotations[{i}].shape: {e}"))?;
        }
        for (i, d) in self.detections.iter().flatten().enumerate() {
            if !seen.contains_key(&d.image_id) {
                return Err(format!("detections[{i}].image_id: unknown image id {}", d.image_id));
            }
            d.shape
                .validate()
                .map_err(|e| format!("detections[{i}].shape: {e}"))?;
            if !(0.0..=1.0).contains(&d.score) {
                return Err(format!("detections[{i}].score: {} is outside [0, 1]", d.score));
            }
        }
        Ok(())
    }

    pub fn image(&self, id: u64) -> Option<&Image> {
        self.images.iter().find(|im| im.id == id)
    }

    pub fn truths(&self) -> Vec<GroundTruth> {
        self.annotations
            .iter()
            .map(|a| GroundTruth {
                image_id: a.image_id,
                class_id: a.category,
                shape: a.shape,
            })
            .collect()
    }

    /// Detections, or `None` when the document carries no `detections` field.
    pub fn detections(&self) -> Option<Vec<Detection>> {
        self.detections.as_ref().map(|ds| {
            ds.iter()
                .map(|d| Detection {
                    image_id: d.image_id,
                    class_id: d.category,
                    shape: d.shape,
                    score: d.score,
                })
                .collect()
        })
    }
}
