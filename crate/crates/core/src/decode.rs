//! Prediction maps to scored circles.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::Result;
use crate::geometry::{ciou, Circle};
use crate::grid::Grid;
use crate::targets::{PredictionMaps, TargetConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub grid_x: usize,
    pub grid_y: usize,
    pub class_id: usize,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CircleDetection {
    pub circle: Circle,
    pub score: f64,
    pub class_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DecodeParams {
    pub top_n: usize,
    pub score_threshold: f64,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            top_n: 100,
            score_threshold: 0.0,
        }
    }
}

/// Every cell of channel `class_id` that is `>=` all of its in-bounds 8-neighbors.
/// Plateaus return every plateau cell. Output is in row-major order.
pub fn local_peaks(heatmap: &Grid, class_id: usize) -> Vec<Peak> {
    let (w, h, c) = heatmap.dims();
    let mut peaks = Vec::new();
    if class_id >= c {
        return peaks;
    }
    for y in 0..h {
        for x in 0..w {
            let v = heatmap.get(x, y, class_id);
            let mut is_peak = true;
            'scan: for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    if (nx, ny) != (x, y) && heatmap.get(nx, ny, class_id) > v {
                        is_peak = false;
                        break 'scan;
                    }
                }
            }
            if is_peak {
                peaks.push(Peak {
                    grid_x: x,
                    grid_y: y,
                    class_id,
                    score: v,
                });
            }
        }
    }
    peaks
}

fn peak_order(a: &Peak, b: &Peak) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.class_id.cmp(&b.class_id))
        .then(a.grid_y.cmp(&b.grid_y))
        .then(a.grid_x.cmp(&b.grid_x))
}

/// Peaks scoring at least `score_threshold`, best first, at most `n` of them.
/// Equal scores fall back to `(class, grid_y, grid_x)` ascending.
pub fn topk_peaks(peaks: &[Peak], n: usize, score_threshold: f64) -> Vec<Peak> {
    let mut kept: Vec<Peak> = peaks
        .iter()
        .copied()
        .filter(|p| p.score >= score_threshold)
        .collect();
    kept.sort_by(peak_order);
    kept.truncate(n);
    kept
}

/// Forms circles from the top peaks across all classes.
///
/// Center is `(cell + offset) * R` and radius is the radius map at the integer peak
/// cell times `R`, both in input pixels. Non-positive or non-finite radii are dropped.
pub fn decode_circles(
    maps: &PredictionMaps,
    cfg: &TargetConfig,
    params: DecodeParams,
) -> Result<Vec<CircleDetection>> {
    maps.validate()?;
    let scale = cfg.downsample as f64;
    let peaks: Vec<Peak> = (0..maps.heatmap.channels())
        .flat_map(|c| local_peaks(&maps.heatmap, c))
        .collect();
    let selected = topk_peaks(&peaks, params.top_n, params.score_threshold);
    Ok(selected
        .into_iter()
        .filter_map(|p| {
            let ox = maps.offset.get(p.grid_x, p.grid_y, 0);
            let oy = maps.offset.get(p.grid_x, p.grid_y, 1);
            let r = maps.radius.get(p.grid_x, p.grid_y, 0) * scale;
            let circle = Circle::new(
                (p.grid_x as f64 + ox) * scale,
                (p.grid_y as f64 + oy) * scale,
                r,
            );
            (r > 0.0 && circle.is_finite()).then_some(CircleDetection {
                circle,
                score: p.score,
                class_id: p.class_id,
            })
        })
        .collect())
}

/// Greedy same-class suppression: a detection is dropped when its cIOU with an
/// already-kept, higher-scoring detection exceeds `threshold`. Input order breaks
/// score ties.
pub fn nms_circles(detections: &[CircleDetection], threshold: f64) -> Result<Vec<CircleDetection>> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detections[b].score.total_cmp(&detections[a].score).then(a.cmp(&b)));
    let mut kept: Vec<CircleDetection> = Vec::new();
    for i in order {
        let d = detections[i];
        let mut suppressed = false;
        for k in &kept {
            if k.class_id == d.class_id && ciou(&k.circle, &d.circle)? > threshold {
                suppressed = true;
                break;
            }
        }
        if !suppressed {
            kept.push(d);
        }
    }
    Ok(kept)
}
