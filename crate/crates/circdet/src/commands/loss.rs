use std::path::{Path, PathBuf};

use circdet_core::decode::{decode_circles, DecodeParams};
use circdet_core::evalkit::{coco_summary, Detection, GroundTruth, Metric};
use circdet_core::geometry::{ciou, Circle, Shape};
use circdet_core::synth::{generate_scene, SceneConfig};
use circdet_core::targets::{
    fit_maps, focal_gradient_check, render_targets, total_loss, CenterTarget, FitConfig, FocalParams,
    TargetConfig, TargetMaps,
};
use circdet_core::Grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{image_circles, Outcome};
use crate::circleann::Document;
use crate::error::{CliError, Result};
use crate::{gridfile, report};

/// Relative-error bound of the gradient check.
pub const GRAD_TOLERANCE: f64 = 1e-4;
pub const GRAD_STEP: f64 = 1e-6;
/// Denominator floor of the relative error; central differences at `GRAD_STEP`
/// carry roughly `1e-9` absolute rounding noise.
pub const GRAD_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct LossArgs {
    /// Ground truth used to render targets (and the scene for `--fit`).
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Prediction maps to score against `--gt`, `image-<id>.<head>.grid`.
    #[arg(long)]
    pub grids: Option<PathBuf>,
    /// Compare the analytic focal gradient against central differences.
    #[arg(long)]
    pub grad_check: bool,
    /// Random 8x8 instances for `--grad-check`.
    #[arg(long, default_value_t = 100)]
    pub cases: usize,
    /// Run this many gradient-descent steps on a one-object scene.
    #[arg(long)]
    pub fit: Option<usize>,
    /// Seed for `--grad-check` instances and the synthesized `--fit` scene.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageLoss {
    pub image_id: u64,
    pub focal: f64,
    pub radius: f64,
    pub offset: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheck {
    pub cases: usize,
    pub step: f64,
    pub floor: f64,
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub steps: usize,
    pub truths: Vec<Circle>,
    pub initial_total: f64,
    pub final_total: f64,
    pub final_ratio: f64,
    pub focal_strictly_decreasing: bool,
    pub detections: Vec<Circle>,
    /// Per truth, the best cIOU among decoded detections; the minimum is reported.
    pub min_best_ciou: f64,
    pub ap50: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct LossCheck {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub losses: Option<Vec<ImageLoss>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_check: Option<GradCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSummary>,
}

/// A random `8 x 8` focal-loss instance: targets uniform in `[0, 0.99)` with up to
/// three exact centers, predictions uniform in `[0.05, 0.95)`.
pub fn random_focal_instance<R: Rng>(rng: &mut R) -> (Grid, TargetMaps) {
    let mut y = Grid::zeros(8, 8, 1);
    for v in y.data_mut() {
        *v = rng.random_range(0.0..0.99);
    }
    let mut centers = Vec::new();
    for _ in 0..rng.random_range(0..4) {
        let (gx, gy) = (rng.random_range(0..8), rng.random_range(0..8));
        y.set(gx, gy, 0, 1.0);
        centers.push(CenterTarget {
            gx,
            gy,
            class: 0,
            offset: [0.5, 0.5],
            radius: 2.0,
        });
    }
    let mut pred = Grid::zeros(8, 8, 1);
    for v in pred.data_mut() {
        *v = rng.random_range(0.05..0.95);
    }
    (pred, TargetMaps { heatmap: y, centers })
}

fn need_seed(args: &LossArgs, flag: &str) -> Result<u64> {
    args.seed
        .ok_or_else(|| CliError::Usage(format!("{flag} needs --seed")))
}

fn grad_check(args: &LossArgs) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(need_seed(args, "--grad-check")?);
    let mut worst: f64 = 0.0;
    for _ in 0..args.cases {
        let (pred, target) = random_focal_instance(&mut rng);
        worst = worst.max(focal_gradient_check(
            &pred,
            &target,
            FocalParams::default(),
            GRAD_STEP,
            GRAD_FLOOR,
        )?);
    }
    Ok(GradCheck {
        cases: args.cases,
        step: GRAD_STEP,
        floor: GRAD_FLOOR,
        max_relative_error: worst,
        tolerance: GRAD_TOLERANCE,
        pass: worst <= GRAD_TOLERANCE,
    })
}

fn score_grids(args: &LossArgs, dir: &Path) -> Result<Vec<ImageLoss>> {
    let gt_path = args
        .gt
        .as_ref()
        .ok_or_else(|| CliError::Usage("--grids needs --gt".into()))?;
    let gt = Document::read(gt_path)?;
    let mut out = Vec::new();
    for img in &gt.images {
        let (maps, scale) = gridfile::read_maps(dir, img.id)?;
        let cfg = TargetConfig {
            image_w: img.width as usize,
            image_h: img.height as usize,
            downsample: scale,
            num_classes: maps.heatmap.channels(),
            ..TargetConfig::default()
        };
        let targets = render_targets(&image_circles(&gt, gt_path, img.id)?, &cfg)?;
        let l = total_loss(&maps, &targets, &cfg)?;
        out.push(ImageLoss {
            image_id: img.id,
            focal: l.focal,
            radius: l.radius,
            offset: l.offset,
            total: l.total,
        });
    }
    Ok(out)
}

/// Scene for `--fit`: the first image of `--gt`, or one synthesized object.
fn fit_scene(args: &LossArgs) -> Result<(Vec<(Circle, usize)>, TargetConfig)> {
    if let Some(path) = &args.gt {
        let gt = Document::read(path)?;
        let img = gt
            .images
            .first()
            .ok_or_else(|| CliError::format(path, "images: --fit needs at least one image"))?;
        let circles = image_circles(&gt, path, img.id)?;
        let cfg = TargetConfig {
            image_w: img.width as usize,
            image_h: img.height as usize,
            num_classes: circles.iter().map(|&(_, c)| c + 1).max().unwrap_or(1),
            ..TargetConfig::default()
        };
        return Ok((circles, cfg));
    }
    let scene = SceneConfig {
        objects_min: 1,
        objects_max: 1,
        rng_seed: need_seed(args, "--fit without --gt")?,
        ..SceneConfig::default()
    };
    let circles = generate_scene(&scene)?.into_iter().map(|c| (c, 0)).collect();
    let cfg = TargetConfig {
        image_w: scene.image_w,
        image_h: scene.image_h,
        ..TargetConfig::default()
    };
    Ok((circles, cfg))
}

fn fit(args: &LossArgs, steps: usize) -> Result<FitSummary> {
    if steps == 0 {
        return Err(CliError::Usage("--fit needs at least one step".into()));
    }
    let (annotated, cfg) = fit_scene(args)?;
    if annotated.is_empty() {
        return Err(CliError::Data("--fit: the scene has no objects".into()));
    }
    let targets = render_targets(&annotated, &cfg)?;
    let report = fit_maps(
        &targets,
        &cfg,
        &FitConfig {
            steps,
            ..FitConfig::default()
        },
    )?;
    let decoded = decode_circles(&report.maps, &cfg, DecodeParams::default())?;
    let truths: Vec<Circle> = annotated.iter().map(|&(c, _)| c).collect();
    let mut min_best = f64::INFINITY;
    for t in &truths {
        let mut best: f64 = 0.0;
        for d in &decoded {
            best = best.max(ciou(&d.circle, t)?);
        }
        min_best = min_best.min(best);
    }
    let gts: Vec<GroundTruth> = annotated
        .iter()
        .map(|&(c, class_id)| GroundTruth {
            image_id: 0,
            class_id,
            shape: Shape::Circle(c),
        })
        .collect();
    let dets: Vec<Detection> = decoded
        .iter()
        .map(|d| Detection {
            image_id: 0,
            class_id: d.class_id,
            shape: Shape::Circle(d.circle),
            score: d.score,
        })
        .collect();
    let ap50 = coco_summary(&dets, &gts, Metric::Ciou)?.ap50;
    let (initial, last) = (report.initial().total, report.last().total);
    Ok(FitSummary {
        steps,
        truths,
        initial_total: initial,
        final_total: last,
        final_ratio: last / initial,
        focal_strictly_decreasing: report.history.windows(2).all(|w| w[1].focal < w[0].focal),
        detections: decoded.iter().map(|d| d.circle).collect(),
        min_best_ciou: min_best,
        ap50,
    })
}

pub fn loss_check(args: &LossArgs) -> Result<Outcome<LossCheck>> {
    if args.grids.is_none() && !args.grad_check && args.fit.is_none() {
        return Err(CliError::Usage(
            "nothing to do: pass --grids, --grad-check or --fit".into(),
        ));
    }
    let mut result = LossCheck::default();
    let mut lines = Vec::new();
    if let Some(dir) = &args.grids {
        let losses = score_grids(args, dir)?;
        let mean = losses.iter().map(|l| l.total).sum::<f64>() / losses.len().max(1) as f64;
        lines.push(format!("{} images, mean L_det {mean:.6}", losses.len()));
        result.losses = Some(losses);
    }
    if args.grad_check {
        let g = grad_check(args)?;
        lines.push(format!(
            "gradient check: max relative error {:.3e} over {} cases ({})",
            g.max_relative_error,
            g.cases,
            if g.pass { "pass" } else { "FAIL" }
        ));
        result.grad_check = Some(g);
    }
    if let Some(steps) = args.fit {
        let f = fit(args, steps)?;
        lines.push(format!(
            "fit: L_det {:.4} -> {:.6} ({:.3}% of initial), min cIOU {:.4}, AP50 {:.3}",
            f.initial_total,
            f.final_total,
            100.0 * f.final_ratio,
            f.min_best_ciou,
            f.ap50
        ));
        result.fit = Some(f);
    }
    if let Some(path) = &args.report {
        report::write(path, "loss-check", args, &result)?;
    }
    if let Some(g) = &result.grad_check {
        if !g.pass {
            return Err(CliError::Data(format!(
                "gradient check failed: {:.3e} > {:.0e}",
                g.max_relative_error, g.tolerance
            )));
        }
    }
    Ok(Outcome {
        result,
        summary: lines.join("\n"),
    })
}
