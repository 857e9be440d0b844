use std::path::PathBuf;

use circdet_core::evalkit::{displacement_study, mean_abs_gap, DisplacementRow};
use serde::Serialize;

use super::{image_circles, Outcome};
use crate::circleann::Document;
use crate::error::{CliError, Result};
use crate::fsio;

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct DisplaceArgs {
    /// CircleAnn file; every circle annotation takes part.
    #[arg(long)]
    pub gt: PathBuf,
    /// Largest displacement in pixels.
    #[arg(long, default_value_t = 100.0)]
    pub max: f64,
    #[arg(long, default_value_t = 5.0)]
    pub step: f64,
    /// Seed for the shift directions.
    #[arg(long)]
    pub seed: u64,
    /// CSV output with columns `displacement,mean_iou,mean_ciou`.
    #[arg(long)]
    pub out: PathBuf,
}

/// `0, step, 2 step, ...` up to and including `max` (with a little slack for
/// decimal steps).
pub fn displacement_grid(max: f64, step: f64) -> Vec<f64> {
    let n = (max / step + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

pub fn displace(args: &DisplaceArgs) -> Result<Outcome<Vec<DisplacementRow>>> {
    if !(args.step > 0.0 && args.step.is_finite()) {
        return Err(CliError::Usage(format!("--step must be positive, got {}", args.step)));
    }
    if !(args.max >= 0.0 && args.max.is_finite()) {
        return Err(CliError::Usage(format!("--max must be non-negative, got {}", args.max)));
    }
    let gt = Document::read(&args.gt)?;
    let mut circles = Vec::new();
    for img in &gt.images {
        circles.extend(image_circles(&gt, &args.gt, img.id)?.into_iter().map(|(c, _)| c));
    }
    let rows = displacement_study(&circles, &displacement_grid(args.max, args.step), args.seed)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row).map_err(|e| CliError::Data(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    fsio::write_atomic(&args.out, &bytes)?;
    let summary = format!(
        "{} rows over {} objects, mean |IOU - cIOU| = {:.4}",
        rows.len(),
        circles.len(),
        mean_abs_gap(&rows)
    );
    Ok(Outcome { result: rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_both_ends() {
        assert_eq!(displacement_grid(100.0, 5.0).len(), 21);
        assert_eq!(displacement_grid(1.0, 0.1).len(), 11);
        assert_eq!(displacement_grid(0.0, 3.0), [0.0]);
        assert_eq!(displacement_grid(10.0, 3.0), [0.0, 3.0, 6.0, 9.0]);
    }
}
