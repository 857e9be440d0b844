//! One module per subcommand. Each takes its parsed flags, does its work through
//! `circdet-core` and returns the structured result alongside a one-line summary.

mod decode;
mod displace;
mod eval;
mod loss;
mod rotate;
mod synth;

use std::path::Path;

use circdet_core::evalkit::Metric;
use circdet_core::geometry::{Circle, Shape};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::circleann::Document;
use crate::error::{CliError, Result};
use crate::fsio;

pub use decode::{decode, DecodeArgs};
pub use displace::{displace, DisplaceArgs};
pub use eval::{eval, EvalArgs};
pub use loss::{loss_check, random_focal_instance, FitSummary, GradCheck, ImageLoss, LossArgs, LossCheck};
pub use rotate::{rotate_check, RotateArgs, RotateResult};
pub use synth::{jitter_seed, synth, SynthArgs, SynthConfig};

/// Result of a command plus the line printed on stdout.
#[derive(Debug)]
pub struct Outcome<T> {
    pub result: T,
    pub summary: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    Ciou,
    Box,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Ciou => Metric::Ciou,
            MetricArg::Box => Metric::Box,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeArg {
    Circle,
    Box,
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fsio::read_to_string(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        let msg = if at == "." {
            e.inner().to_string()
        } else {
            format!("{at}: {}", e.inner())
        };
        CliError::format(path, msg)
    })
}

/// Circle annotations of one image; box annotations are rejected.
pub(crate) fn image_circles(doc: &Document, path: &Path, image_id: u64) -> Result<Vec<(Circle, usize)>> {
    let mut out = Vec::new();
    for (i, a) in doc.annotations.iter().enumerate() {
        if a.image_id != image_id {
            continue;
        }
        match a.shape {
            Shape::Circle(c) => out.push((c, a.category)),
            Shape::Box(_) => {
                return Err(CliError::format(
                    path,
                    format!("annotations[{i}].shape: expected a circle, found a box"),
                ))
            }
        }
    }
    Ok(out)
}

/// Every detection's image must exist in the ground truth.
pub(crate) fn check_images(gt: &Document, det: &Document, det_path: &Path) -> Result<()> {
    for (i, d) in det.detections.iter().flatten().enumerate() {
        if gt.image(d.image_id).is_none() {
            return Err(CliError::format(
                det_path,
                format!("detections[{i}].image_id: image {} is not in the ground truth", d.image_id),
            ));
        }
    }
    Ok(())
}

pub(crate) fn require_detections(doc: &Document, path: &Path) -> Result<Vec<circdet_core::evalkit::Detection>> {
    doc.detections()
        .ok_or_else(|| CliError::format(path, "detections: field is missing"))
}
