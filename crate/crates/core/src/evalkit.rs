//! Detection evaluation: greedy matching, COCO-style average precision, rotation
//! consistency, mask detection ratio and the displacement study.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{box_iou, ciou, circle_to_bbox, Circle, Shape, Transform};

/// Overlap measure used for matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Metric {
    /// Circle IOU; both shapes must be circles.
    Ciou,
    /// Rectangle IOU; both shapes must be boxes.
    Box,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Ciou => "ciou",
            Metric::Box => "box",
        }
    }

    pub fn overlap(&self, a: &Shape, b: &Shape) -> Result<f64> {
        match (self, a, b) {
            (Metric::Ciou, Shape::Circle(a), Shape::Circle(b)) => ciou(a, b),
            (Metric::Box, Shape::Box(a), Shape::Box(b)) => Ok(box_iou(a, b)),
            (m, a, b) => {
                let wrong = match m {
                    Metric::Ciou if !matches!(a, Shape::Circle(_)) => a,
                    Metric::Box if !matches!(a, Shape::Box(_)) => a,
                    _ => b,
                };
                Err(Error::ShapeMismatch {
                    metric: m.name(),
                    kind: wrong.kind(),
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Detection {
    pub image_id: u64,
    pub class_id: usize,
    pub shape: Shape,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroundTruth {
    pub image_id: u64,
    pub class_id: usize,
    pub shape: Shape,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    /// `(detection index, truth index, overlap)` in the order pairs were formed.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_truths: Vec<usize>,
}

/// Row-major `detections x truths` overlaps; `-1` marks pairs from different images
/// or classes.
fn overlap_matrix(dets: &[Detection], truths: &[GroundTruth], metric: Metric) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(dets.len() * truths.len());
    for d in dets {
        for t in truths {
            out.push(if d.image_id == t.image_id && d.class_id == t.class_id {
                metric.overlap(&d.shape, &t.shape)?
            } else {
                -1.0
            });
        }
    }
    Ok(out)
}

/// Indices by descending score; the sort is stable, so input order breaks ties.
fn score_order(scores: impl Iterator<Item = f64>) -> Vec<usize> {
    let scores: Vec<f64> = scores.collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Greedy assignment in `order`. Each detection takes the unmatched truth with the
/// highest overlap `>= threshold`, preferring non-ignored truths; equal overlaps go
/// to the lower truth index.
fn assign(
    order: &[usize],
    overlaps: &[f64],
    n_truth: usize,
    truth_ignore: &[bool],
    threshold: f64,
) -> Vec<Option<usize>> {
    let mut truth_order: Vec<usize> = (0..n_truth).filter(|&g| !truth_ignore[g]).collect();
    truth_order.extend((0..n_truth).filter(|&g| truth_ignore[g]));
    let mut taken = vec![false; n_truth];
    // `order` is a permutation of the detection rows.
    let mut result = vec![None; order.len()];
    for &d in order {
        let mut best: Option<usize> = None;
        let mut best_overlap = threshold;
        for &g in &truth_order {
            if taken[g] {
                continue;
            }
            if let Some(b) = best {
                if !truth_ignore[b] && truth_ignore[g] {
                    break;
                }
            }
            let v = overlaps[d * n_truth + g];
            let better = match best {
                None => v >= threshold,
                Some(_) => v > best_overlap,
            };
            if better {
                best = Some(g);
                best_overlap = v;
            }
        }
        if let Some(g) = best {
            taken[g] = true;
            result[d] = Some(g);
        }
    }
    result
}

/// Greedy score-order matching of detections to truths of the same image and class.
pub fn match_greedy(
    dets: &[Detection],
    truths: &[GroundTruth],
    threshold: f64,
    metric: Metric,
) -> Result<MatchResult> {
    let overlaps = overlap_matrix(dets, truths, metric)?;
    let order = score_order(dets.iter().map(|d| d.score));
    let ignore = vec![false; truths.len()];
    let assigned = assign(&order, &overlaps, truths.len(), &ignore, threshold);

    let mut result = MatchResult::default();
    let mut truth_used = vec![false; truths.len()];
    for &d in &order {
        match assigned[d] {
            Some(g) => {
                truth_used[g] = true;
                result.pairs.push((d, g, overlaps[d * truths.len() + g]));
            }
            None => result.unmatched_detections.push(d),
        }
    }
    result.unmatched_truths = (0..truths.len()).filter(|&g| !truth_used[g]).collect();
    Ok(result)
}

/// Truth-area bucket for size-restricted AP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AreaBucket {
    All,
    /// area < 1000 px²
    Small,
    /// area > 1000 px²
    Medium,
}

pub const AREA_SPLIT: f64 = 1000.0;

impl AreaBucket {
    pub fn contains(&self, area: f64) -> bool {
        match self {
            AreaBucket::All => true,
            AreaBucket::Small => area < AREA_SPLIT,
            AreaBucket::Medium => area > AREA_SPLIT,
        }
    }
}

/// Number of recall sample points in interpolated AP (0.00, 0.01, ..., 1.00).
pub const RECALL_POINTS: usize = 101;

/// Overlap thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PrCurve {
    pub threshold: f64,
    pub class_id: usize,
    /// Cumulative recall after each ranked detection.
    pub recall: Vec<f64>,
    /// Cumulative precision after each ranked detection.
    pub precision: Vec<f64>,
    /// Envelope precision sampled at the 101 recall points.
    pub interpolated: Vec<f64>,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub metric: Metric,
    pub ap: f64,
    pub ap50: f64,
    pub ap75: f64,
    /// `None` when no truth falls in the bucket.
    pub ap_small: Option<f64>,
    pub ap_medium: Option<f64>,
    pub thresholds: Vec<f64>,
    pub ap_per_threshold: Vec<f64>,
    pub curves: Vec<PrCurve>,
}

struct Group {
    class_id: usize,
    dets: Vec<usize>,
    truths: Vec<usize>,
    /// Local `dets x truths` overlaps.
    overlaps: Vec<f64>,
}

/// Overlaps computed once per (image, class) and reused across thresholds and buckets.
struct Prepared<'a> {
    dets: &'a [Detection],
    truths: &'a [GroundTruth],
    groups: Vec<Group>,
}

impl<'a> Prepared<'a> {
    fn new(dets: &'a [Detection], truths: &'a [GroundTruth], metric: Metric) -> Result<Self> {
        if truths.is_empty() {
            return Err(Error::NoGroundTruth);
        }
        let mut keyed: BTreeMap<(usize, u64), (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for (i, t) in truths.iter().enumerate() {
            keyed.entry((t.class_id, t.image_id)).or_default().1.push(i);
        }
        for (i, d) in dets.iter().enumerate() {
            keyed.entry((d.class_id, d.image_id)).or_default().0.push(i);
        }
        let mut groups = Vec::with_capacity(keyed.len());
        for ((class_id, _), (det_idx, truth_idx)) in keyed {
            let order = score_order(det_idx.iter().map(|&i| dets[i].score));
            let det_sorted: Vec<usize> = order.iter().map(|&k| det_idx[k]).collect();
            let mut overlaps = Vec::with_capacity(det_sorted.len() * truth_idx.len());
            for &d in &det_sorted {
                for &t in &truth_idx {
                    overlaps.push(metric.overlap(&dets[d].shape, &truths[t].shape)?);
                }
            }
            groups.push(Group {
                class_id,
                dets: det_sorted,
                truths: truth_idx,
                overlaps,
            });
        }
        Ok(Self {
            dets,
            truths,
            groups,
        })
    }

    /// Per-class PR curves at one threshold, restricted to a size bucket. Classes
    /// without any in-bucket truth are omitted.
    fn curves(&self, threshold: f64, bucket: AreaBucket) -> Vec<PrCurve> {
        // class -> (ranked (score, is_tp) entries, npos)
        let mut per_class: BTreeMap<usize, (Vec<(f64, bool)>, usize)> = BTreeMap::new();
        for g in &self.groups {
            let ignore: Vec<bool> = g
                .truths
                .iter()
                .map(|&t| !bucket.contains(self.truths[t].shape.area()))
                .collect();
            let order: Vec<usize> = (0..g.dets.len()).collect();
            let assigned = assign(&order, &g.overlaps, g.truths.len(), &ignore, threshold);
            let entry = per_class.entry(g.class_id).or_default();
            entry.1 += ignore.iter().filter(|&&ig| !ig).count();
            for (k, &d) in g.dets.iter().enumerate() {
                let det = &self.dets[d];
                let ignored = match assigned[k] {
                    Some(t) => ignore[t],
                    None => !bucket.contains(det.shape.area()),
                };
                if !ignored {
                    entry.0.push((det.score, assigned[k].is_some()));
                }
            }
        }

        per_class
            .into_iter()
            .filter(|(_, (_, npos))| *npos > 0)
            .map(|(class_id, (mut ranked, npos))| {
                // Stable: ties keep (image, within-image rank) order.
                ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
                pr_curve(threshold, class_id, &ranked, npos)
            })
            .collect()
    }
}

fn pr_curve(threshold: f64, class_id: usize, ranked: &[(f64, bool)], npos: usize) -> PrCurve {
    let mut recall = Vec::with_capacity(ranked.len());
    let mut precision = Vec::with_capacity(ranked.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &(_, is_tp) in ranked {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / npos as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    let mut envelope = precision.clone();
    for i in (1..envelope.len()).rev() {
        if envelope[i] > envelope[i - 1] {
            envelope[i - 1] = envelope[i];
        }
    }
    let interpolated: Vec<f64> = (0..RECALL_POINTS)
        .map(|k| {
            let r = k as f64 / (RECALL_POINTS - 1) as f64;
            let idx = recall.partition_point(|&x| x < r);
            envelope.get(idx).copied().unwrap_or(0.0)
        })
        .collect();
    let ap = interpolated.iter().sum::<f64>() / RECALL_POINTS as f64;
    PrCurve {
        threshold,
        class_id,
        recall,
        precision,
        interpolated,
        ap,
    }
}

fn mean_ap(curves: &[PrCurve]) -> Option<f64> {
    if curves.is_empty() {
        None
    } else {
        Some(curves.iter().map(|c| c.ap).sum::<f64>() / curves.len() as f64)
    }
}

/// 101-point interpolated AP at a single overlap threshold, averaged over classes
/// that have truths. Errors when there are no truths.
pub fn average_precision(
    dets: &[Detection],
    truths: &[GroundTruth],
    threshold: f64,
    metric: Metric,
) -> Result<f64> {
    let prepared = Prepared::new(dets, truths, metric)?;
    Ok(mean_ap(&prepared.curves(threshold, AreaBucket::All)).unwrap_or(0.0))
}

/// AP averaged over 0.50:0.05:0.95, AP50, AP75 and the small/medium size buckets.
///
/// Truth size is `pi r^2` for circles and `w h` for boxes. Within a bucket, detections
/// matched to out-of-bucket truths, and unmatched detections whose own area is out of
/// bucket, count as neither true nor false positives.
pub fn coco_summary(dets: &[Detection], truths: &[GroundTruth], metric: Metric) -> Result<EvalReport> {
    let prepared = Prepared::new(dets, truths, metric)?;
    let thresholds = coco_thresholds();
    let mut curves = Vec::new();
    let mut ap_per_threshold = Vec::with_capacity(thresholds.len());
    let mut small = Vec::with_capacity(thresholds.len());
    let mut medium = Vec::with_capacity(thresholds.len());
    for &t in &thresholds {
        let c = prepared.curves(t, AreaBucket::All);
        ap_per_threshold.push(mean_ap(&c).unwrap_or(0.0));
        curves.extend(c);
        small.push(mean_ap(&prepared.curves(t, AreaBucket::Small)));
        medium.push(mean_ap(&prepared.curves(t, AreaBucket::Medium)));
    }
    let average = |v: &[Option<f64>]| -> Option<f64> {
        let vals: Vec<f64> = v.iter().flatten().copied().collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    Ok(EvalReport {
        metric,
        ap: ap_per_threshold.iter().sum::<f64>() / ap_per_threshold.len() as f64,
        ap50: ap_per_threshold[0],
        ap75: ap_per_threshold[5],
        ap_small: average(&small),
        ap_medium: average(&medium),
        thresholds,
        ap_per_threshold,
        curves,
    })
}

/// Fraction of detections that survive a rotation round trip.
///
/// Both sets must be in the same frame. Same-image, same-class pairs with overlap
/// strictly above `threshold` are matched greedily in descending order of combined
/// score (then overlap); the ratio is `pairs / ((|before| + |after|) / 2)`. One empty
/// side gives 0; two empty sides are an error.
pub fn rotation_consistency(
    before: &[Detection],
    after: &[Detection],
    threshold: f64,
    metric: Metric,
) -> Result<f64> {
    if before.is_empty() && after.is_empty() {
        return Err(Error::EmptyConsistency);
    }
    if before.is_empty() || after.is_empty() {
        return Ok(0.0);
    }
    let mut candidates: Vec<(f64, f64, usize, usize)> = Vec::new();
    for (i, a) in before.iter().enumerate() {
        for (j, b) in after.iter().enumerate() {
            if a.image_id != b.image_id || a.class_id != b.class_id {
                continue;
            }
            let v = metric.overlap(&a.shape, &b.shape)?;
            if v > threshold {
                candidates.push((a.score + b.score, v, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| {
        y.0.total_cmp(&x.0)
            .then(y.1.total_cmp(&x.1))
            .then(x.2.cmp(&y.2))
            .then(x.3.cmp(&y.3))
    });
    let mut used_before = vec![false; before.len()];
    let mut used_after = vec![false; after.len()];
    let mut pairs = 0usize;
    for (_, _, i, j) in candidates {
        if !used_before[i] && !used_after[j] {
            used_before[i] = true;
            used_after[j] = true;
            pairs += 1;
        }
    }
    Ok(pairs as f64 / ((before.len() + after.len()) as f64 / 2.0))
}

/// Mask area divided by the area of the detection shape.
pub fn mask_detection_ratio(mask_area: f64, shape: &Shape) -> Result<f64> {
    shape.validate()?;
    if !(mask_area >= 0.0) || !mask_area.is_finite() {
        return Err(Error::InvalidParameter {
            name: "mask_area",
            value: mask_area,
        });
    }
    Ok(mask_area / shape.area())
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DisplacementRow {
    pub displacement: f64,
    pub mean_iou: f64,
    pub mean_ciou: f64,
}

/// Mean box IOU and cIOU between each truth and a copy shifted by each displacement.
///
/// Every truth draws one uniform direction, reused for the whole displacement grid, so
/// both curves are non-increasing in displacement.
pub fn displacement_study(truths: &[Circle], displacements: &[f64], rng_seed: u64) -> Result<Vec<DisplacementRow>> {
    if truths.is_empty() {
        return Err(Error::NoGroundTruth);
    }
    for t in truths {
        t.validate()?;
    }
    if let Some(&bad) = displacements.iter().find(|d| !(**d >= 0.0) || !d.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "displacement",
            value: bad,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let angles: Vec<f64> = truths.iter().map(|_| rng.random::<f64>() * 2.0 * PI).collect();
    let n = truths.len() as f64;
    displacements
        .iter()
        .map(|&d| {
            let (mut iou_sum, mut ciou_sum) = (0.0, 0.0);
            for (c, &theta) in truths.iter().zip(&angles) {
                let b = circle_to_bbox(c);
                iou_sum += box_iou(&b, &b.shift(d, theta));
                ciou_sum += ciou(c, &c.shift(d, theta))?;
            }
            Ok(DisplacementRow {
                displacement: d,
                mean_iou: iou_sum / n,
                mean_ciou: ciou_sum / n,
            })
        })
        .collect()
}

/// Mean `|IOU - cIOU|` over a displacement table.
pub fn mean_abs_gap(rows: &[DisplacementRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().map(|r| (r.mean_iou - r.mean_ciou).abs()).sum::<f64>() / rows.len() as f64
}
