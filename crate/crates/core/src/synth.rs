//! Synthetic ball-shaped-object scenes, a simulated jittery detector and mask
//! rasterization.
//!
//! Every random quantity comes from a seeded ChaCha stream, so identical configs give
//! identical outputs on every platform.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::decode::CircleDetection;
use crate::error::{Error, Result};
use crate::geometry::{box_iou, ciou, circle_to_bbox, rotated_dims, BoxAA, Circle, Transform};

/// Placement attempts per object before a scene is declared infeasible.
pub const PLACEMENT_RETRIES: usize = 1000;

/// Simulated scores are clamped to `[SCORE_EPS, 1 - SCORE_EPS]`.
pub const SCORE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SceneConfig {
    pub image_w: usize,
    pub image_h: usize,
    /// Inclusive range of objects per image; the minimum is at least 1.
    pub objects_min: usize,
    pub objects_max: usize,
    /// Inclusive radius range in pixels.
    pub radius_min: f64,
    pub radius_max: f64,
    /// Required gap between circle boundaries.
    pub min_separation: f64,
    pub rng_seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            image_w: 512,
            image_h: 512,
            objects_min: 1,
            objects_max: 8,
            radius_min: 12.0,
            radius_max: 44.0,
            min_separation: 4.0,
            rng_seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_w == 0 || self.image_h == 0 {
            return Err(Error::InvalidConfig("image size must be positive"));
        }
        if self.objects_min == 0 || self.objects_min > self.objects_max {
            return Err(Error::InvalidConfig(
                "objects per image must satisfy 1 <= min <= max",
            ));
        }
        if !(self.radius_min > 0.0 && self.radius_min <= self.radius_max && self.radius_max.is_finite()) {
            return Err(Error::InvalidConfig("radius range must satisfy 0 < min <= max"));
        }
        if !(self.min_separation >= 0.0 && self.min_separation.is_finite()) {
            return Err(Error::InvalidConfig("min_separation must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Generates one image (stream 0) of the scene configuration.
pub fn generate_scene(cfg: &SceneConfig) -> Result<Vec<Circle>> {
    generate_scene_at(cfg, 0)
}

/// Generates image number `image_index`; every index reads its own ChaCha stream.
///
/// Circles lie fully inside the image and satisfy
/// `dist(c_i, c_j) >= r_i + r_j + min_separation`.
pub fn generate_scene_at(cfg: &SceneConfig, image_index: u64) -> Result<Vec<Circle>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(image_index);
    let count = rng.random_range(cfg.objects_min..=cfg.objects_max);
    let (w, h) = (cfg.image_w as f64, cfg.image_h as f64);
    let mut placed: Vec<Circle> = Vec::with_capacity(count);

    for _ in 0..count {
        let mut accepted = None;
        for _ in 0..PLACEMENT_RETRIES {
            let r = rng.random_range(cfg.radius_min..=cfg.radius_max);
            if 2.0 * r > w || 2.0 * r > h {
                continue;
            }
            let c = Circle::new(rng.random_range(r..=w - r), rng.random_range(r..=h - r), r);
            let clear = placed.iter().all(|p| {
                let (dx, dy) = (p.cx - c.cx, p.cy - c.cy);
                let gap = p.r + c.r + cfg.min_separation;
                dx * dx + dy * dy >= gap * gap
            });
            if clear {
                accepted = Some(c);
                break;
            }
        }
        match accepted {
            Some(c) => placed.push(c),
            None => {
                return Err(Error::PackingInfeasible {
                    placed: placed.len(),
                    requested: count,
                    retries: PLACEMENT_RETRIES,
                })
            }
        }
    }
    Ok(placed)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct JitterConfig {
    /// Standard deviation of the center noise, pixels.
    pub center_sigma: f64,
    /// Standard deviation of `ln(r_detected / r_true)`.
    pub radius_rel_sigma: f64,
    pub drop_prob: f64,
    /// Expected number of false positives per image (Poisson).
    pub false_positive_rate: f64,
    /// Standard deviation of the noise subtracted from overlap-based scores.
    pub score_noise_sigma: f64,
    /// Center-noise multipliers along the viewed image's x and y axes. `[1, 1]` is an
    /// isotropic, rotation-equivariant detector.
    pub anisotropy: [f64; 2],
    pub fp_radius_range: [f64; 2],
    pub rng_seed: u64,
}

impl Default for JitterConfig {
    fn default() -> Self {
        Self {
            center_sigma: 0.0,
            radius_rel_sigma: 0.0,
            drop_prob: 0.0,
            false_positive_rate: 0.0,
            score_noise_sigma: 0.0,
            anisotropy: [1.0, 1.0],
            fp_radius_range: [12.0, 44.0],
            rng_seed: 0,
        }
    }
}

impl JitterConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("center_sigma", self.center_sigma),
            ("radius_rel_sigma", self.radius_rel_sigma),
            ("false_positive_rate", self.false_positive_rate),
            ("score_noise_sigma", self.score_noise_sigma),
            ("anisotropy[0]", self.anisotropy[0]),
            ("anisotropy[1]", self.anisotropy[1]),
        ];
        for (name, value) in nonneg {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return Err(Error::InvalidParameter {
                name: "drop_prob",
                value: self.drop_prob,
            });
        }
        let [lo, hi] = self.fp_radius_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "fp_radius_range",
                value: lo,
            });
        }
        Ok(())
    }
}

/// Per-object random draws, taken in a fixed order whether or not the object is
/// dropped so that streams stay aligned across views.
struct ObjectDraw {
    dropped: bool,
    /// Standard-normal center noise in the original image frame.
    noise: (f64, f64),
    /// Standard-normal size noise along the original x and y axes.
    size: (f64, f64),
    score: f64,
}

struct FalsePositive {
    circle: Circle,
    size: (f64, f64),
    score: f64,
}

struct Draws {
    objects: Vec<ObjectDraw>,
    false_positives: Vec<FalsePositive>,
}

fn draw(truths: &[Circle], image_w: f64, image_h: f64, jitter: &JitterConfig) -> Result<Draws> {
    jitter.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(jitter.rng_seed);
    let mut objects = Vec::with_capacity(truths.len());
    for _ in truths {
        let u: f64 = rng.random();
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        objects.push(ObjectDraw {
            dropped: u < jitter.drop_prob,
            noise: (normal(), normal()),
            size: (normal(), normal()),
            score: normal(),
        });
    }
    let mut fp_rng = ChaCha8Rng::seed_from_u64(jitter.rng_seed);
    fp_rng.set_stream(1);
    let count = if jitter.false_positive_rate > 0.0 {
        let poisson = Poisson::new(jitter.false_positive_rate).map_err(|_| Error::InvalidParameter {
            name: "false_positive_rate",
            value: jitter.false_positive_rate,
        })?;
        poisson.sample(&mut fp_rng) as usize
    } else {
        0
    };
    let [rlo, rhi] = jitter.fp_radius_range;
    let false_positives = (0..count)
        .map(|_| FalsePositive {
            circle: Circle::new(
                fp_rng.random::<f64>() * image_w,
                fp_rng.random::<f64>() * image_h,
                fp_rng.random_range(rlo..=rhi),
            ),
            size: (StandardNormal.sample(&mut fp_rng), StandardNormal.sample(&mut fp_rng)),
            score: StandardNormal.sample(&mut fp_rng),
        })
        .collect();
    Ok(Draws {
        objects,
        false_positives,
    })
}

/// Rotates a displacement vector by counter-clockwise image quarter turns.
fn rotate_vector(mut v: (f64, f64), quarter_turns: u32) -> (f64, f64) {
    for _ in 0..quarter_turns % 4 {
        v = (v.1, -v.0);
    }
    v
}

fn clamp_score(s: f64) -> f64 {
    if s.is_nan() {
        return SCORE_EPS;
    }
    s.clamp(SCORE_EPS, 1.0 - SCORE_EPS)
}

/// View-frame center displacement for one object.
fn center_noise(noise: (f64, f64), jitter: &JitterConfig, quarter_turns: u32) -> (f64, f64) {
    let base = (noise.0 * jitter.center_sigma, noise.1 * jitter.center_sigma);
    let v = rotate_vector(base, quarter_turns);
    (v.0 * jitter.anisotropy[0], v.1 * jitter.anisotropy[1])
}

/// Simulated circle detections for `truths` (original-frame circles of an
/// `image_w x image_h` image) as seen on the image rotated by `quarter_turns`.
///
/// Detections are returned in the rotated frame. Each kept truth is moved by Gaussian
/// center noise (scaled per viewed axis by `anisotropy`), its radius multiplied by a
/// log-normal factor, and it is scored by its cIOU with the truth minus Gaussian
/// noise. False positives are Poisson-distributed, placed uniformly over the image and
/// scored by their best cIOU with any truth minus noise.
pub fn simulate_detections(
    truths: &[Circle],
    image_w: f64,
    image_h: f64,
    quarter_turns: u32,
    jitter: &JitterConfig,
) -> Result<Vec<CircleDetection>> {
    for t in truths {
        t.validate()?;
    }
    let draws = draw(truths, image_w, image_h, jitter)?;
    let mut out = Vec::with_capacity(truths.len() + draws.false_positives.len());
    for (truth, d) in truths.iter().zip(&draws.objects) {
        if d.dropped {
            continue;
        }
        let view_truth = truth.rotate90(image_w, image_h, quarter_turns);
        let (dx, dy) = center_noise(d.noise, jitter, quarter_turns);
        let circle = Circle::new(
            view_truth.cx + dx,
            view_truth.cy + dy,
            truth.r * libm::exp(jitter.radius_rel_sigma * d.size.0),
        );
        let score = ciou(&circle, &view_truth)? - jitter.score_noise_sigma * d.score;
        out.push(CircleDetection {
            circle,
            score: clamp_score(score),
            class_id: 0,
        });
    }
    for fp in &draws.false_positives {
        let mut best: f64 = 0.0;
        for t in truths {
            best = best.max(ciou(&fp.circle, t)?);
        }
        out.push(CircleDetection {
            circle: fp.circle.rotate90(image_w, image_h, quarter_turns),
            score: clamp_score(best - jitter.score_noise_sigma * fp.score),
            class_id: 0,
        });
    }
    Ok(out)
}

/// Box counterpart of [`simulate_detections`] on the same random draws: truths are
/// converted with [`circle_to_bbox`] first, then width and height receive independent
/// log-normal factors. Returns `(box, score)` pairs in the rotated frame.
pub fn simulate_box_detections(
    truths: &[Circle],
    image_w: f64,
    image_h: f64,
    quarter_turns: u32,
    jitter: &JitterConfig,
) -> Result<Vec<(BoxAA, f64)>> {
    for t in truths {
        t.validate()?;
    }
    let draws = draw(truths, image_w, image_h, jitter)?;
    let size_factors = |size: (f64, f64)| {
        let (fx, fy) = (
            libm::exp(jitter.radius_rel_sigma * size.0),
            libm::exp(jitter.radius_rel_sigma * size.1),
        );
        // size noise is attached to the original axes
        if quarter_turns % 2 == 0 {
            (fx, fy)
        } else {
            (fy, fx)
        }
    };
    let mut out = Vec::with_capacity(truths.len() + draws.false_positives.len());
    for (truth, d) in truths.iter().zip(&draws.objects) {
        if d.dropped {
            continue;
        }
        let view_truth = circle_to_bbox(truth).rotate90(image_w, image_h, quarter_turns);
        let (cx, cy) = view_truth.center();
        let (dx, dy) = center_noise(d.noise, jitter, quarter_turns);
        let (fw, fh) = size_factors(d.size);
        let (w, h) = (view_truth.w * fw, view_truth.h * fh);
        let b = BoxAA::new(cx + dx - 0.5 * w, cy + dy - 0.5 * h, w, h);
        let score = box_iou(&b, &view_truth) - jitter.score_noise_sigma * d.score;
        out.push((b, clamp_score(score)));
    }
    for fp in &draws.false_positives {
        let (fw, fh) = size_factors(fp.size);
        let view = circle_to_bbox(&fp.circle).rotate90(image_w, image_h, quarter_turns);
        let (cx, cy) = view.center();
        let b = BoxAA::new(cx - 0.5 * view.w * fw, cy - 0.5 * view.h * fh, view.w * fw, view.h * fh);
        let mut best: f64 = 0.0;
        for t in truths {
            let tb = circle_to_bbox(t).rotate90(image_w, image_h, quarter_turns);
            best = best.max(box_iou(&b, &tb));
        }
        out.push((b, clamp_score(best - jitter.score_noise_sigma * fp.score)));
    }
    Ok(out)
}

/// Binary image mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    /// Number of set pixels.
    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Pixel `(x, y)` is set iff its center lies in the closed disk.
pub fn rasterize_mask(c: &Circle, image_w: usize, image_h: usize) -> Result<Mask> {
    c.validate()?;
    let nx = c.cx.clamp(0.0, image_w as f64);
    let ny = c.cy.clamp(0.0, image_h as f64);
    let (dx, dy) = (nx - c.cx, ny - c.cy);
    if image_w == 0 || image_h == 0 || dx * dx + dy * dy >= c.r * c.r {
        return Err(Error::OutsideImage {
            width: image_w,
            height: image_h,
        });
    }
    let mut data = vec![false; image_w * image_h];
    let r2 = c.r * c.r;
    let y0 = libm::floor(c.cy - c.r - 1.0).max(0.0) as usize;
    let y1 = (libm::ceil(c.cy + c.r + 1.0).max(0.0) as usize).min(image_h);
    let x0 = libm::floor(c.cx - c.r - 1.0).max(0.0) as usize;
    let x1 = (libm::ceil(c.cx + c.r + 1.0).max(0.0) as usize).min(image_w);
    for y in y0..y1 {
        let py = y as f64 + 0.5 - c.cy;
        for x in x0..x1 {
            let px = x as f64 + 0.5 - c.cx;
            if px * px + py * py <= r2 {
                data[y * image_w + x] = true;
            }
        }
    }
    Ok(Mask {
        width: image_w,
        height: image_h,
        data,
    })
}

/// Moment fit: centroid of the set pixel centers and `r = sqrt(2 * E[rho^2])`, the
/// radius of the uniform disk with the same second moment.
pub fn fit_circle(mask: &Mask) -> Option<Circle> {
    let mut n = 0.0;
    let (mut sx, mut sy) = (0.0, 0.0);
    for y in 0..mask.height {
        for x in 0..mask.width {
            if mask.get(x, y) {
                n += 1.0;
                sx += x as f64 + 0.5;
                sy += y as f64 + 0.5;
            }
        }
    }
    if n == 0.0 {
        return None;
    }
    let (cx, cy) = (sx / n, sy / n);
    let mut m2 = 0.0;
    for y in 0..mask.height {
        for x in 0..mask.width {
            if mask.get(x, y) {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                m2 += dx * dx + dy * dy;
            }
        }
    }
    Some(Circle::new(cx, cy, libm::sqrt(2.0 * m2 / n)))
}

/// Scene dimensions after viewing it rotated by `quarter_turns`.
pub fn view_dims(image_w: usize, image_h: usize, quarter_turns: u32) -> (usize, usize) {
    let (w, h) = rotated_dims(image_w as f64, image_h as f64, quarter_turns);
    (w as usize, h as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn single_object_scene() {
        let cfg = SceneConfig {
            objects_min: 1,
            objects_max: 1,
            rng_seed: 5,
            ..SceneConfig::default()
        };
        let scene = generate_scene(&cfg).unwrap();
        assert_eq!(scene.len(), 1);
        let c = scene[0];
        assert!(c.cx - c.r >= 0.0 && c.cx + c.r <= 512.0 && c.cy - c.r >= 0.0 && c.cy + c.r <= 512.0);
        assert_eq!(scene, generate_scene(&cfg).unwrap());
    }

    #[test]
    fn infeasible_packing_fails() {
        let cfg = SceneConfig {
            image_w: 100,
            image_h: 100,
            objects_min: 5,
            objects_max: 5,
            radius_min: 40.0,
            radius_max: 45.0,
            ..SceneConfig::default()
        };
        assert!(matches!(generate_scene(&cfg), Err(Error::PackingInfeasible { .. })));
    }

    #[test]
    fn zero_noise_detector_is_exact() {
        let truths = [Circle::new(100.0, 120.0, 20.0), Circle::new(300.0, 200.0, 30.0)];
        let dets = simulate_detections(&truths, 512.0, 512.0, 0, &JitterConfig::default()).unwrap();
        assert_eq!(dets.len(), 2);
        for (d, t) in dets.iter().zip(&truths) {
            assert_eq!(d.circle, *t);
            assert_eq!(d.score, 1.0 - SCORE_EPS);
        }
        let boxes = simulate_box_detections(&truths, 512.0, 512.0, 0, &JitterConfig::default()).unwrap();
        assert_eq!(boxes[0].0, circle_to_bbox(&truths[0]));
    }

    #[test]
    fn drop_all_leaves_false_positives() {
        let jitter = JitterConfig {
            drop_prob: 1.0,
            false_positive_rate: 3.0,
            rng_seed: 11,
            ..JitterConfig::default()
        };
        let truths = [Circle::new(100.0, 120.0, 20.0)];
        let dets = simulate_detections(&truths, 512.0, 512.0, 0, &jitter).unwrap();
        assert!(dets.iter().all(|d| d.circle != truths[0]));
        assert!(simulate_detections(&truths, 512.0, 512.0, 0, &JitterConfig { drop_prob: 1.5, ..jitter })
            .is_err());
    }

    #[test]
    fn isotropic_detector_is_rotation_equivariant() {
        let truths = [Circle::new(100.0, 120.0, 20.0), Circle::new(300.0, 200.0, 30.0)];
        let jitter = JitterConfig {
            center_sigma: 4.0,
            radius_rel_sigma: 0.1,
            rng_seed: 2,
            ..JitterConfig::default()
        };
        let before = simulate_detections(&truths, 512.0, 384.0, 0, &jitter).unwrap();
        let after = simulate_detections(&truths, 512.0, 384.0, 1, &jitter).unwrap();
        for (b, a) in before.iter().zip(&after) {
            let back = a.circle.unrotate90(512.0, 384.0, 1);
            assert!((back.cx - b.circle.cx).abs() < 1e-9 && (back.cy - b.circle.cy).abs() < 1e-9);
            assert_eq!(back.r, b.circle.r);
        }
    }

    #[test]
    fn mask_area_bounds() {
        let m = rasterize_mask(&Circle::new(100.0, 100.0, 20.0), 200, 200).unwrap();
        let exact = PI * 400.0;
        assert!((m.area() as f64 - exact).abs() / exact < 0.01);
        assert!(rasterize_mask(&Circle::new(-50.0, 10.0, 20.0), 200, 200).is_err());
        let fit = fit_circle(&m).unwrap();
        assert!((fit.cx - 100.0).abs() < 1e-9 && (fit.r - 20.0).abs() < 0.1);
    }
}
