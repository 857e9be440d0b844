use std::path::PathBuf;

use circdet_core::decode::{decode_circles, nms_circles, DecodeParams};
use circdet_core::geometry::Shape;
use circdet_core::targets::TargetConfig;
use serde::Serialize;

use super::Outcome;
use crate::circleann::{Document, ScoredAnnotation};
use crate::error::{CliError, Result};
use crate::gridfile;

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct DecodeArgs {
    /// CircleAnn file listing the images to decode.
    #[arg(long)]
    pub gt: PathBuf,
    /// Directory holding `image-<id>.{heatmap,offset,radius}.grid`.
    #[arg(long)]
    pub grids: PathBuf,
    /// CircleAnn output with the decoded detections.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub top_n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,
    /// Optional cIOU suppression threshold.
    #[arg(long)]
    pub nms: Option<f64>,
}

pub fn decode(args: &DecodeArgs) -> Result<Outcome<Document>> {
    let gt = Document::read(&args.gt)?;
    let params = DecodeParams {
        top_n: args.top_n,
        score_threshold: args.threshold,
    };
    let mut dets = Vec::new();
    for img in &gt.images {
        let (maps, scale) = gridfile::read_maps(&args.grids, img.id)?;
        let (w, h, c) = maps.heatmap.dims();
        if w * scale != img.width as usize || h * scale != img.height as usize {
            return Err(CliError::Data(format!(
                "image {}: maps of {w}x{h} at scale {scale} do not cover {}x{}",
                img.id, img.width, img.height
            )));
        }
        let cfg = TargetConfig {
            image_w: img.width as usize,
            image_h: img.height as usize,
            downsample: scale,
            num_classes: c,
            ..TargetConfig::default()
        };
        let mut found = decode_circles(&maps, &cfg, params)?;
        if let Some(t) = args.nms {
            found = nms_circles(&found, t)?;
        }
        dets.extend(found.into_iter().map(|d| ScoredAnnotation {
            image_id: img.id,
            category: d.class_id,
            shape: Shape::Circle(d.circle),
            score: d.score,
        }));
    }
    let doc = Document {
        images: gt.images.clone(),
        detections: Some(dets),
        ..Document::default()
    };
    doc.write(&args.out)?;
    let summary = format!(
        "decoded {} detections from {} images",
        doc.detections.as_ref().map_or(0, Vec::len),
        doc.images.len()
    );
    Ok(Outcome { result: doc, summary })
}
