use std::path::PathBuf;

use circdet_core::evalkit::{rotation_consistency, Detection};
use circdet_core::geometry::Transform;
use serde::Serialize;

use super::{check_images, require_detections, MetricArg, Outcome};
use crate::circleann::Document;
use crate::error::{CliError, Result};
use crate::report;

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct RotateArgs {
    /// Ground truth in the original frame; supplies image sizes.
    #[arg(long)]
    pub gt: PathBuf,
    /// Detections on the original images.
    #[arg(long)]
    pub det_before: PathBuf,
    /// Detections on the rotated images, in the rotated frame.
    #[arg(long)]
    pub det_after: PathBuf,
    /// Counter-clockwise quarter turns applied to the images for `--det-after`.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(0..4))]
    pub turns: u32,
    #[arg(long, value_enum, default_value_t = MetricArg::Ciou)]
    pub metric: MetricArg,
    /// Pairs must overlap strictly more than this.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotateResult {
    pub consistency: f64,
    pub detections_before: usize,
    pub detections_after: usize,
}

pub fn rotate_check(args: &RotateArgs) -> Result<Outcome<RotateResult>> {
    let gt = Document::read(&args.gt)?;
    let before_doc = Document::read(&args.det_before)?;
    let after_doc = Document::read(&args.det_after)?;
    check_images(&gt, &before_doc, &args.det_before)?;
    check_images(&gt, &after_doc, &args.det_after)?;
    let before = require_detections(&before_doc, &args.det_before)?;
    let after: Vec<Detection> = require_detections(&after_doc, &args.det_after)?
        .into_iter()
        .map(|d| {
            let img = gt.image(d.image_id).expect("checked above");
            Detection {
                shape: d
                    .shape
                    .unrotate90(img.width as f64, img.height as f64, args.turns),
                ..d
            }
        })
        .collect();
    if before.is_empty() && after.is_empty() {
        return Err(CliError::Data(
            "rotation consistency is undefined: both detection sets are empty".into(),
        ));
    }
    let consistency = rotation_consistency(&before, &after, args.threshold, args.metric.into())?;
    let result = RotateResult {
        consistency,
        detections_before: before.len(),
        detections_after: after.len(),
    };
    if let Some(path) = &args.report {
        report::write(path, "rotate-check", args, &result)?;
    }
    let summary = format!(
        "rotation consistency {consistency:.4} ({} before, {} after)",
        result.detections_before, result.detections_after
    );
    Ok(Outcome { result, summary })
}
