//! Independent oracles shared by the integration and acceptance suites. Nothing in
//! here calls the routine it is used to check.
#![allow(dead_code)]

use std::f64::consts::PI;

use circdet_core::evalkit::{Detection, GroundTruth};
use circdet_core::geometry::{BoxAA, Circle, Shape};
use rand::rngs::SmallRng;
use rand::{Rng, RngCore, SeedableRng};

/// Intersection area by jittered stratified sampling: an `n x n` grid over the overlap
/// of the two bounding squares, one uniform point per cell, pure point-in-disk tests.
pub fn mc_intersection(a: &Circle, b: &Circle, n: usize, seed: u64) -> f64 {
    let x0 = (a.cx - a.r).max(b.cx - b.r);
    let x1 = (a.cx + a.r).min(b.cx + b.r);
    let y0 = (a.cy - a.r).max(b.cy - b.r);
    let y1 = (a.cy + a.r).min(b.cy + b.r);
    if x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    let (cw, ch) = ((x1 - x0) / n as f64, (y1 - y0) / n as f64);
    let (ra2, rb2) = (a.r * a.r, b.r * b.r);
    let mut rng = SmallRng::seed_from_u64(seed);
    const SCALE: f64 = 1.0 / (1u64 << 32) as f64;
    let mut hits = 0u64;
    for j in 0..n {
        let row = y0 + j as f64 * ch;
        for i in 0..n {
            let bits = rng.next_u64();
            let x = x0 + (i as f64 + (bits >> 32) as f64 * SCALE) * cw;
            let y = row + (bits & 0xffff_ffff) as f64 * SCALE * ch;
            let (ax, ay) = (x - a.cx, y - a.cy);
            let (bx, by) = (x - b.cx, y - b.cy);
            let inside = (ax * ax + ay * ay <= ra2) & (bx * bx + by * by <= rb2);
            hits += inside as u64;
        }
    }
    (x1 - x0) * (y1 - y0) * hits as f64 / (n * n) as f64
}

/// cIOU from the Monte Carlo intersection.
pub fn mc_ciou(a: &Circle, b: &Circle, n: usize, seed: u64) -> (f64, f64) {
    let inter = mc_intersection(a, b, n, seed);
    let union = PI * a.r * a.r + PI * b.r * b.r - inter;
    (inter / union, union)
}

/// Lens area via the chord-foot decomposition, with the last square root written as
/// `sqrt(r_b^2 - r_a^2 + l_x^2)` (= d - l_x). Only meaningful when the centers sit on
/// opposite sides of the chord (`0 < l_x < d`); returns `None` elsewhere.
pub fn chord_form_area(a: &Circle, b: &Circle) -> Option<f64> {
    let (ra, rb) = (a.r, b.r);
    let d = ((b.cx - a.cx).powi(2) + (b.cy - a.cy).powi(2)).sqrt();
    if !(d > (ra - rb).abs() && d < ra + rb) {
        return None;
    }
    let lx = (ra * ra - rb * rb + d * d) / (2.0 * d);
    if !(lx > 0.0 && lx < d) {
        return None;
    }
    let ly = (ra * ra - lx * lx).sqrt();
    Some(
        ra * ra * (ly / ra).asin() + rb * rb * (ly / rb).asin()
            - ly * (lx + (rb * rb - ra * ra + lx * lx).sqrt()),
    )
}

/// The same decomposition with the square-root argument exactly as printed,
/// `sqrt(r_a^2 - r_b^2 + l_x^2)`.
pub fn chord_form_area_as_printed(a: &Circle, b: &Circle) -> Option<f64> {
    let (ra, rb) = (a.r, b.r);
    let d = ((b.cx - a.cx).powi(2) + (b.cy - a.cy).powi(2)).sqrt();
    let lx = (ra * ra - rb * rb + d * d) / (2.0 * d);
    let ly = (ra * ra - lx * lx).sqrt();
    let inner = ra * ra - rb * rb + lx * lx;
    (inner >= 0.0 && ly.is_finite())
        .then(|| ra * ra * (ly / ra).asin() + rb * rb * (ly / rb).asin() - ly * (lx + inner.sqrt()))
}

/// Random circle pair with radii in `[1, 100]` and center distance in
/// `[0, 2.5 (r_a + r_b)]`. Coordinates are multiples of 1/256 so that quarter-turn
/// rotations inside a 4096 px frame are exact.
pub fn random_pair(rng: &mut impl Rng) -> (Circle, Circle) {
    let q = |v: f64| (v * 256.0).round() / 256.0;
    let ra = q(rng.random_range(1.0..=100.0));
    let rb = q(rng.random_range(1.0..=100.0));
    let d = rng.random_range(0.0..=2.5 * (ra + rb));
    let theta = rng.random_range(0.0..2.0 * PI);
    let a = Circle::new(q(rng.random_range(600.0..3400.0)), q(rng.random_range(600.0..3400.0)), ra);
    let b = Circle::new(q(a.cx + d * theta.cos()), q(a.cy + d * theta.sin()), rb);
    (a, b)
}

fn shape_overlap(a: &Shape, b: &Shape) -> f64 {
    match (a, b) {
        (Shape::Circle(a), Shape::Circle(b)) => circdet_core::geometry::ciou(a, b).unwrap(),
        (Shape::Box(a), Shape::Box(b)) => naive_box_iou(a, b),
        _ => panic!("mixed shapes"),
    }
}

/// Rectangle IOU from corner coordinates.
pub fn naive_box_iou(a: &BoxAA, b: &BoxAA) -> f64 {
    let left = a.x.max(b.x);
    let right = (a.x + a.w).min(b.x + b.w);
    let top = a.y.max(b.y);
    let bottom = (a.y + a.h).min(b.y + b.h);
    let inter = if right > left && bottom > top {
        (right - left) * (bottom - top)
    } else {
        0.0
    };
    inter / (a.w * a.h + b.w * b.h - inter)
}

/// Exhaustive greedy oracle for one image: over every injective partial assignment,
/// pick the one whose per-detection `(overlap, -truth index)` sequence, read in
/// descending score order, is lexicographically largest. Returns `det -> truth`.
pub fn brute_force_greedy(dets: &[Detection], truths: &[GroundTruth], threshold: f64) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.partial_cmp(&dets[a].score).unwrap().then(a.cmp(&b)));
    let ov: Vec<Vec<f64>> = dets
        .iter()
        .map(|d| {
            truths
                .iter()
                .map(|t| if d.image_id == t.image_id { shape_overlap(&d.shape, &t.shape) } else { -1.0 })
                .collect()
        })
        .collect();

    type Key = Vec<(f64, i64)>;
    let mut best: Option<(Key, Vec<Option<usize>>)> = None;
    let mut current = vec![None; dets.len()];
    let mut used = vec![false; truths.len()];

    fn recurse(
        k: usize,
        order: &[usize],
        ov: &[Vec<f64>],
        threshold: f64,
        current: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best: &mut Option<(Key, Vec<Option<usize>>)>,
    ) {
        if k == order.len() {
            let key: Key = order
                .iter()
                .map(|&d| match current[d] {
                    Some(g) => (ov[d][g], -(g as i64)),
                    None => (f64::NEG_INFINITY, 0),
                })
                .collect();
            let better = match best {
                None => true,
                Some((bk, _)) => key.partial_cmp(bk) == Some(std::cmp::Ordering::Greater),
            };
            if better {
                *best = Some((key, current.clone()));
            }
            return;
        }
        let d = order[k];
        current[d] = None;
        recurse(k + 1, order, ov, threshold, current, used, best);
        for g in 0..used.len() {
            if !used[g] && ov[d][g] >= threshold {
                used[g] = true;
                current[d] = Some(g);
                recurse(k + 1, order, ov, threshold, current, used, best);
                current[d] = None;
                used[g] = false;
            }
        }
    }
    recurse(0, &order, &ov, threshold, &mut current, &mut used, &mut best);
    best.unwrap().1
}

/// Size bucket used by the naive evaluator.
#[derive(Clone, Copy)]
pub enum Bucket {
    All,
    Small,
    Medium,
}

fn in_bucket(bucket: Bucket, area: f64) -> bool {
    match bucket {
        Bucket::All => true,
        Bucket::Small => area < 1000.0,
        Bucket::Medium => area > 1000.0,
    }
}

fn shape_area(s: &Shape) -> f64 {
    match s {
        Shape::Circle(c) => PI * c.r * c.r,
        Shape::Box(b) => b.w * b.h,
    }
}

/// Straightforward single-class AP at one threshold. Returns `None` when the bucket
/// holds no truths. Assumes distinct scores.
pub fn naive_ap(dets: &[Detection], truths: &[GroundTruth], threshold: f64, bucket: Bucket) -> Option<f64> {
    let npos = truths.iter().filter(|t| in_bucket(bucket, shape_area(&t.shape))).count();
    if npos == 0 {
        return None;
    }
    let mut images: Vec<u64> = truths.iter().map(|t| t.image_id).chain(dets.iter().map(|d| d.image_id)).collect();
    images.sort();
    images.dedup();

    // (score, is_tp) for every counted detection
    let mut ranked: Vec<(f64, bool)> = Vec::new();
    for img in images {
        let ts: Vec<&GroundTruth> = truths.iter().filter(|t| t.image_id == img).collect();
        let mut ds: Vec<&Detection> = dets.iter().filter(|d| d.image_id == img).collect();
        ds.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
        let mut taken = vec![false; ts.len()];
        for d in ds {
            let pick = |want_in: bool, taken: &[bool]| -> Option<usize> {
                let mut best: Option<(usize, f64)> = None;
                for (g, t) in ts.iter().enumerate() {
                    if taken[g] || in_bucket(bucket, shape_area(&t.shape)) != want_in {
                        continue;
                    }
                    let v = shape_overlap(&d.shape, &t.shape);
                    if v >= threshold && best.map_or(true, |(_, bv)| v > bv) {
                        best = Some((g, v));
                    }
                }
                best.map(|(g, _)| g)
            };
            let chosen = pick(true, &taken).or_else(|| pick(false, &taken));
            match chosen {
                Some(g) => {
                    taken[g] = true;
                    if in_bucket(bucket, shape_area(&ts[g].shape)) {
                        ranked.push((d.score, true));
                    }
                }
                None => {
                    if in_bucket(bucket, shape_area(&d.shape)) {
                        ranked.push((d.score, false));
                    }
                }
            }
        }
    }
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut points = Vec::new();
    let (mut tp, mut seen) = (0.0, 0.0);
    for (_, hit) in &ranked {
        seen += 1.0;
        if *hit {
            tp += 1.0;
        }
        points.push((tp / npos as f64, tp / seen));
    }
    let mut total = 0.0;
    for k in 0..=100 {
        let r = k as f64 / 100.0;
        let p = points
            .iter()
            .filter(|(rec, _)| *rec >= r)
            .map(|(_, prec)| *prec)
            .fold(0.0, f64::max);
        total += p;
    }
    Some(total / 101.0)
}

/// Naive counterpart of the full summary: `(ap, ap50, ap75, ap_small, ap_medium)`.
pub fn naive_summary(
    dets: &[Detection],
    truths: &[GroundTruth],
) -> (f64, f64, f64, Option<f64>, Option<f64>) {
    let ts: Vec<f64> = (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect();
    let all: Vec<f64> = ts.iter().map(|&t| naive_ap(dets, truths, t, Bucket::All).unwrap()).collect();
    let bucket_mean = |b| {
        let v: Vec<f64> = ts.iter().filter_map(|&t| naive_ap(dets, truths, t, b)).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    (
        all.iter().sum::<f64>() / all.len() as f64,
        all[0],
        all[5],
        bucket_mean(Bucket::Small),
        bucket_mean(Bucket::Medium),
    )
}

/// Random small evaluation instance: up to 5 truths and 5 detections over one or two
/// images, circles with radii straddling the 1000 px² size split. Detections are
/// jittered copies of truths or free false positives, all with distinct scores.
pub fn random_instance(rng: &mut impl Rng, boxes: bool) -> (Vec<Detection>, Vec<GroundTruth>) {
    let images = rng.random_range(1..=2u64);
    let n_truth = rng.random_range(1..=5);
    let n_det = rng.random_range(0..=5);
    let mk = |cx: f64, cy: f64, r: f64| -> Shape {
        if boxes {
            Shape::Box(BoxAA::new(cx - r, cy - r, 2.0 * r, 2.0 * r))
        } else {
            Shape::Circle(Circle::new(cx, cy, r))
        }
    };
    let mut raw: Vec<(u64, f64, f64, f64)> = Vec::new();
    let truths: Vec<GroundTruth> = (0..n_truth)
        .map(|_| {
            let image_id = rng.random_range(1..=images);
            let (cx, cy, r) = (
                rng.random_range(30.0..90.0),
                rng.random_range(30.0..90.0),
                rng.random_range(10.0..25.0),
            );
            raw.push((image_id, cx, cy, r));
            GroundTruth {
                image_id,
                class_id: 0,
                shape: mk(cx, cy, r),
            }
        })
        .collect();
    let dets = (0..n_det)
        .map(|_| {
            let score = rng.random_range(0.01..0.99);
            if rng.random_bool(0.7) {
                let (image_id, cx, cy, r) = raw[rng.random_range(0..raw.len())];
                let j = rng.random_range(0.0..8.0);
                Detection {
                    image_id,
                    class_id: 0,
                    shape: mk(
                        cx + rng.random_range(-j..=j),
                        cy + rng.random_range(-j..=j),
                        r * rng.random_range(0.8..1.25),
                    ),
                    score,
                }
            } else {
                Detection {
                    image_id: rng.random_range(1..=images),
                    class_id: 0,
                    shape: mk(
                        rng.random_range(20.0..100.0),
                        rng.random_range(20.0..100.0),
                        rng.random_range(8.0..30.0),
                    ),
                    score,
                }
            }
        })
        .collect();
    (dets, truths)
}
