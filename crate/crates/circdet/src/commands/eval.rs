use std::path::PathBuf;

use circdet_core::evalkit::{coco_summary, EvalReport};
use serde::Serialize;

use super::{check_images, require_detections, MetricArg, Outcome};
use crate::circleann::Document;
use crate::error::Result;
use crate::report;

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct EvalArgs {
    /// Ground-truth CircleAnn file.
    #[arg(long)]
    pub gt: PathBuf,
    /// CircleAnn file whose `detections` are evaluated.
    #[arg(long)]
    pub det: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricArg::Ciou)]
    pub metric: MetricArg,
    /// JSON report output.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

pub fn eval(args: &EvalArgs) -> Result<Outcome<EvalReport>> {
    let gt = Document::read(&args.gt)?;
    let det = Document::read(&args.det)?;
    let dets = require_detections(&det, &args.det)?;
    check_images(&gt, &det, &args.det)?;
    let result = coco_summary(&dets, &gt.truths(), args.metric.into())?;
    if let Some(path) = &args.report {
        report::write(path, "eval", args, &result)?;
    }
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    let summary = format!(
        "AP {:.4}  AP50 {:.4}  AP75 {:.4}  APs {}  APm {}",
        result.ap,
        result.ap50,
        result.ap75,
        fmt(result.ap_small),
        fmt(result.ap_medium)
    );
    Ok(Outcome { result, summary })
}
