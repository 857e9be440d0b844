//! Ground-truth target maps and the detection loss stack.
//!
//! A circle annotation in input pixels becomes, at output resolution (input / R):
//! a Gaussian bump on the center heatmap, a sub-cell offset and a radius, both read
//! only at the integer center cell. The losses are the penalty-reduced focal loss on
//! the heatmap and L1 losses on offset and radius, combined as
//! `L_k + lambda_radius * L_radius + lambda_off * L_off`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::Circle;
use crate::grid::Grid;

/// Predictions are clamped to `[PRED_EPS, 1 - PRED_EPS]` before any logarithm.
pub const PRED_EPS: f64 = 1e-7;

/// Lower bound on the Gaussian standard deviation, in output cells.
pub const MIN_SIGMA: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TargetConfig {
    pub image_w: usize,
    pub image_h: usize,
    /// Output stride R.
    pub downsample: usize,
    pub num_classes: usize,
    pub focal_alpha: f64,
    pub focal_beta: f64,
    pub lambda_radius: f64,
    pub lambda_off: f64,
    pub min_gaussian_overlap: f64,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            image_w: 512,
            image_h: 512,
            downsample: 4,
            num_classes: 1,
            focal_alpha: 2.0,
            focal_beta: 4.0,
            lambda_radius: 0.1,
            lambda_off: 1.0,
            min_gaussian_overlap: 0.7,
        }
    }
}

impl TargetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.downsample == 0 {
            return Err(Error::InvalidConfig("downsample must be positive"));
        }
        if self.num_classes == 0 {
            return Err(Error::InvalidConfig("num_classes must be positive"));
        }
        if self.image_w == 0 || self.image_h == 0 {
            return Err(Error::InvalidConfig("image size must be positive"));
        }
        if self.image_w % self.downsample != 0 || self.image_h % self.downsample != 0 {
            return Err(Error::InvalidConfig(
                "image size must be divisible by downsample",
            ));
        }
        if !(self.min_gaussian_overlap > 0.0 && self.min_gaussian_overlap < 1.0) {
            return Err(Error::InvalidConfig("min_gaussian_overlap must be in (0, 1)"));
        }
        let finite = [
            self.focal_alpha,
            self.focal_beta,
            self.lambda_radius,
            self.lambda_off,
        ];
        if finite.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig(
                "focal exponents and loss weights must be finite and non-negative",
            ));
        }
        Ok(())
    }

    pub fn output_w(&self) -> usize {
        self.image_w / self.downsample
    }

    pub fn output_h(&self) -> usize {
        self.image_h / self.downsample
    }

    pub fn focal(&self) -> FocalParams {
        FocalParams {
            alpha: self.focal_alpha,
            beta: self.focal_beta,
        }
    }

    pub fn heatmap_dims(&self) -> (usize, usize, usize) {
        (self.output_w(), self.output_h(), self.num_classes)
    }

    /// Weighted detection objective from its three components.
    pub fn weighted_total(&self, focal: f64, radius: f64, offset: f64) -> f64 {
        focal + self.lambda_radius * radius + self.lambda_off * offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for FocalParams {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            beta: 4.0,
        }
    }
}

/// One annotated object at output resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterTarget {
    pub gx: usize,
    pub gy: usize,
    pub class: usize,
    /// `p / R - floor(p / R)` per axis.
    pub offset: [f64; 2],
    /// Radius in output cells (`r / R`).
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetMaps {
    pub heatmap: Grid,
    pub centers: Vec<CenterTarget>,
}

impl TargetMaps {
    /// The normalizer N: number of annotated centers.
    pub fn num_centers(&self) -> usize {
        self.centers.len()
    }
}

/// The three head outputs at output resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMaps {
    /// `W/R x H/R x C` center heatmap.
    pub heatmap: Grid,
    /// `W/R x H/R x 2` sub-cell offsets.
    pub offset: Grid,
    /// `W/R x H/R x 1` radii in output cells.
    pub radius: Grid,
}

impl PredictionMaps {
    pub fn uniform(width: usize, height: usize, num_classes: usize, heat: f64) -> Self {
        Self {
            heatmap: Grid::filled(width, height, num_classes, heat),
            offset: Grid::zeros(width, height, 2),
            radius: Grid::zeros(width, height, 1),
        }
    }

    /// Perfect predictions: the target heatmap with true offsets and radii written at
    /// the center cells.
    pub fn from_targets(target: &TargetMaps) -> Self {
        let (w, h, _) = target.heatmap.dims();
        let mut offset = Grid::zeros(w, h, 2);
        let mut radius = Grid::zeros(w, h, 1);
        for c in &target.centers {
            offset.set(c.gx, c.gy, 0, c.offset[0]);
            offset.set(c.gx, c.gy, 1, c.offset[1]);
            radius.set(c.gx, c.gy, 0, c.radius);
        }
        Self {
            heatmap: target.heatmap.clone(),
            offset,
            radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h, c) = self.heatmap.dims();
        if c == 0 {
            return Err(Error::GridShape {
                expected: (w, h, 1),
                actual: (w, h, 0),
            });
        }
        self.offset.expect_dims((w, h, 2))?;
        self.radius.expect_dims((w, h, 1))
    }

    /// The maps a detector would produce on the image rotated counter-clockwise by
    /// `quarter_turns`; offsets are re-expressed in the rotated cells.
    pub fn rotate90(&self, quarter_turns: u32) -> Self {
        let mut offset = self.offset.clone();
        for _ in 0..quarter_turns % 4 {
            let src = offset.rotate90(1);
            let mut dst = src.clone();
            for v in dst.data_mut().chunks_exact_mut(2) {
                let (ox, oy) = (v[0], v[1]);
                v[0] = oy;
                v[1] = 1.0 - ox;
            }
            offset = dst;
        }
        Self {
            heatmap: self.heatmap.rotate90(quarter_turns),
            offset,
            radius: self.radius.rotate90(quarter_turns),
        }
    }
}

/// Largest corner displacement (in the box's units) that keeps the IOU between a
/// `w x h` box and its displaced copy at or above `min_overlap`.
///
/// Three displacement patterns are considered: a diagonal translation, both corners
/// moved inward, and both corners moved outward. The result is the smallest of the
/// three quadratic roots.
pub fn corner_radius(w: f64, h: f64, min_overlap: f64) -> f64 {
    let o = min_overlap;
    let sum = w + h;
    let area = w * h;

    let c1 = area * (1.0 - o) / (1.0 + o);
    let r1 = (sum - libm::sqrt((sum * sum - 4.0 * c1).max(0.0))) / 2.0;

    let (a2, b2, c2) = (4.0, 2.0 * sum, (1.0 - o) * area);
    let r2 = (b2 - libm::sqrt((b2 * b2 - 4.0 * a2 * c2).max(0.0))) / (2.0 * a2);

    let (a3, b3, c3) = (4.0 * o, 2.0 * o * sum, -(1.0 - o) * area);
    let r3 = (-b3 + libm::sqrt(b3 * b3 - 4.0 * a3 * c3)) / (2.0 * a3);

    r1.min(r2).min(r3)
}

/// Standard deviation of an object's heatmap kernel, in output cells.
///
/// `max(floor(rho) / 3, 2/3)` where `rho` is [`corner_radius`] of the object's
/// `2r/R` square at `cfg.min_gaussian_overlap`.
pub fn gaussian_sigma(c: &Circle, cfg: &TargetConfig) -> Result<f64> {
    c.validate()?;
    let side = 2.0 * c.r / cfg.downsample as f64;
    let rho = libm::floor(corner_radius(side, side, cfg.min_gaussian_overlap));
    Ok((rho / 3.0).max(MIN_SIGMA))
}

/// Renders target maps for `(circle, class)` annotations given in input pixels.
///
/// Overlapping kernels of the same class combine by per-cell maximum.
pub fn render_targets(annotations: &[(Circle, usize)], cfg: &TargetConfig) -> Result<TargetMaps> {
    cfg.validate()?;
    let (ow, oh, classes) = cfg.heatmap_dims();
    let scale = cfg.downsample as f64;
    let mut heatmap = Grid::zeros(ow, oh, classes);
    let mut centers = Vec::with_capacity(annotations.len());

    for &(circle, class) in annotations {
        circle.validate()?;
        if class >= classes {
            return Err(Error::ClassOutOfRange {
                class,
                num_classes: classes,
            });
        }
        let (px, py) = (circle.cx / scale, circle.cy / scale);
        let (fx, fy) = (libm::floor(px), libm::floor(py));
        if fx < 0.0 || fy < 0.0 || fx >= ow as f64 || fy >= oh as f64 {
            return Err(Error::CenterOutsideGrid {
                x: px,
                y: py,
                width: ow,
                height: oh,
            });
        }
        let sigma = gaussian_sigma(&circle, cfg)?;
        let denom = 2.0 * sigma * sigma;
        let (gx, gy) = (fx as usize, fy as usize);
        for y in 0..oh {
            let dy = y as f64 - fy;
            for x in 0..ow {
                let dx = x as f64 - fx;
                let v = libm::exp(-(dx * dx + dy * dy) / denom);
                let i = heatmap.index(x, y, class);
                let cell = &mut heatmap.data_mut()[i];
                if v > *cell {
                    *cell = v;
                }
            }
        }
        heatmap.set(gx, gy, class, 1.0);
        centers.push(CenterTarget {
            gx,
            gy,
            class,
            offset: [px - fx, py - fy],
            radius: circle.r / scale,
        });
    }
    Ok(TargetMaps { heatmap, centers })
}

fn focal_norm(target: &TargetMaps) -> f64 {
    target.num_centers().max(1) as f64
}

#[inline]
fn focal_cell(y: f64, raw: f64, p: FocalParams) -> f64 {
    let q = raw.clamp(PRED_EPS, 1.0 - PRED_EPS);
    if y == 1.0 {
        -libm::pow(1.0 - q, p.alpha) * libm::log(q)
    } else {
        -libm::pow(1.0 - y, p.beta) * libm::pow(q, p.alpha) * libm::log(1.0 - q)
    }
}

#[inline]
fn focal_cell_grad(y: f64, raw: f64, p: FocalParams) -> f64 {
    if !(PRED_EPS..=1.0 - PRED_EPS).contains(&raw) {
        return 0.0;
    }
    let q = raw;
    if y == 1.0 {
        p.alpha * libm::pow(1.0 - q, p.alpha - 1.0) * libm::log(q) - libm::pow(1.0 - q, p.alpha) / q
    } else {
        let w = libm::pow(1.0 - y, p.beta);
        -w * (p.alpha * libm::pow(q, p.alpha - 1.0) * libm::log(1.0 - q)
            - libm::pow(q, p.alpha) / (1.0 - q))
    }
}

/// Penalty-reduced pixel-wise focal loss, normalized by `max(N, 1)`.
///
/// Cells whose target is exactly 1 are positives.
pub fn focal_loss(pred: &Grid, target: &TargetMaps, params: FocalParams) -> Result<f64> {
    pred.expect_dims(target.heatmap.dims())?;
    let sum: f64 = target
        .heatmap
        .data()
        .iter()
        .zip(pred.data())
        .map(|(&y, &raw)| focal_cell(y, raw, params))
        .sum();
    Ok(sum / focal_norm(target))
}

/// Analytic `dL_k / dY_hat`. Zero where the raw prediction lies outside the clamp range.
pub fn focal_loss_grad(pred: &Grid, target: &TargetMaps, params: FocalParams) -> Result<Grid> {
    pred.expect_dims(target.heatmap.dims())?;
    let n = focal_norm(target);
    let data = target
        .heatmap
        .data()
        .iter()
        .zip(pred.data())
        .map(|(&y, &raw)| focal_cell_grad(y, raw, params) / n)
        .collect();
    let (w, h, c) = pred.dims();
    Grid::from_vec(w, h, c, data)
}

fn l1_at_centers<F>(pred: &Grid, target: &TargetMaps, channels: usize, truth: F) -> Result<f64>
where
    F: Fn(&CenterTarget, usize) -> f64,
{
    let (w, h, _) = target.heatmap.dims();
    pred.expect_dims((w, h, channels))?;
    if target.centers.is_empty() {
        return Err(Error::NoCenters);
    }
    let sum: f64 = target
        .centers
        .iter()
        .map(|c| {
            (0..channels)
                .map(|ch| (pred.get(c.gx, c.gy, ch) - truth(c, ch)).abs())
                .sum::<f64>()
        })
        .sum();
    Ok(sum / target.centers.len() as f64)
}

fn l1_grad_at_centers<F>(pred: &Grid, target: &TargetMaps, channels: usize, truth: F) -> Result<Grid>
where
    F: Fn(&CenterTarget, usize) -> f64,
{
    let (w, h, _) = target.heatmap.dims();
    pred.expect_dims((w, h, channels))?;
    if target.centers.is_empty() {
        return Err(Error::NoCenters);
    }
    let n = target.centers.len() as f64;
    let mut grad = Grid::zeros(w, h, channels);
    for c in &target.centers {
        for ch in 0..channels {
            let diff = pred.get(c.gx, c.gy, ch) - truth(c, ch);
            let s = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            let i = grad.index(c.gx, c.gy, ch);
            grad.data_mut()[i] += s / n;
        }
    }
    Ok(grad)
}

/// Mean L1 error of the two offset channels at the center cells. Errors when N = 0.
pub fn offset_loss(pred: &Grid, target: &TargetMaps) -> Result<f64> {
    l1_at_centers(pred, target, 2, |c, ch| c.offset[ch])
}

/// Subgradient of [`offset_loss`] (sign convention `sign(0) = 0`).
pub fn offset_loss_grad(pred: &Grid, target: &TargetMaps) -> Result<Grid> {
    l1_grad_at_centers(pred, target, 2, |c, ch| c.offset[ch])
}

/// `(1/N) * sum_k |R_hat(p_k) - r_k|` in output cells. Errors when N = 0.
pub fn radius_loss(pred: &Grid, target: &TargetMaps) -> Result<f64> {
    l1_at_centers(pred, target, 1, |c, _| c.radius)
}

pub fn radius_loss_grad(pred: &Grid, target: &TargetMaps) -> Result<Grid> {
    l1_grad_at_centers(pred, target, 1, |c, _| c.radius)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossBreakdown {
    pub focal: f64,
    pub radius: f64,
    pub offset: f64,
    pub total: f64,
}

/// Full detection objective. With no annotated centers only the focal term is
/// evaluated and the regression components are reported as 0.
pub fn total_loss(pred: &PredictionMaps, target: &TargetMaps, cfg: &TargetConfig) -> Result<LossBreakdown> {
    pred.validate()?;
    let focal = focal_loss(&pred.heatmap, target, cfg.focal())?;
    let (radius, offset) = if target.centers.is_empty() {
        (0.0, 0.0)
    } else {
        (
            radius_loss(&pred.radius, target)?,
            offset_loss(&pred.offset, target)?,
        )
    };
    Ok(LossBreakdown {
        focal,
        radius,
        offset,
        total: cfg.weighted_total(focal, radius, offset),
    })
}

/// Gradient of [`total_loss`] with respect to every prediction map.
pub fn total_loss_grad(pred: &PredictionMaps, target: &TargetMaps, cfg: &TargetConfig) -> Result<PredictionMaps> {
    pred.validate()?;
    let heatmap = focal_loss_grad(&pred.heatmap, target, cfg.focal())?;
    let (w, h, _) = pred.heatmap.dims();
    let (mut offset, mut radius) = if target.centers.is_empty() {
        (Grid::zeros(w, h, 2), Grid::zeros(w, h, 1))
    } else {
        (
            offset_loss_grad(&pred.offset, target)?,
            radius_loss_grad(&pred.radius, target)?,
        )
    };
    offset.data_mut().iter_mut().for_each(|g| *g *= cfg.lambda_off);
    radius.data_mut().iter_mut().for_each(|g| *g *= cfg.lambda_radius);
    Ok(PredictionMaps {
        heatmap,
        offset,
        radius,
    })
}

/// Largest relative disagreement between [`focal_loss_grad`] and central differences
/// with step `h`, using `max(|analytic|, |numeric|, floor)` as the denominator.
pub fn focal_gradient_check(
    pred: &Grid,
    target: &TargetMaps,
    params: FocalParams,
    h: f64,
    floor: f64,
) -> Result<f64> {
    let analytic = focal_loss_grad(pred, target, params)?;
    let mut probe = pred.clone();
    let mut worst: f64 = 0.0;
    for i in 0..probe.data().len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = focal_loss(&probe, target, params)?;
        probe.data_mut()[i] = orig - h;
        let down = focal_loss(&probe, target, params)?;
        probe.data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic.data()[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FitConfig {
    pub steps: usize,
    /// Base step sizes; every step size decays linearly to zero over `steps`.
    pub lr_heatmap: f64,
    pub lr_offset: f64,
    pub lr_radius: f64,
    /// Starting value of every heatmap cell.
    pub init_heatmap: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            lr_heatmap: 1.0,
            lr_offset: 1.0,
            lr_radius: 1.0,
            init_heatmap: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub maps: PredictionMaps,
    /// Loss before the first step followed by the loss after every step.
    pub history: Vec<LossBreakdown>,
}

impl FitReport {
    pub fn initial(&self) -> LossBreakdown {
        self.history[0]
    }

    pub fn last(&self) -> LossBreakdown {
        self.history[self.history.len() - 1]
    }
}

/// Plain gradient descent directly on the prediction maps, starting from a uniform
/// heatmap and zero offsets and radii. Heatmap cells are projected back onto the
/// clamp range after every step.
pub fn fit_maps(target: &TargetMaps, cfg: &TargetConfig, fit: &FitConfig) -> Result<FitReport> {
    cfg.validate()?;
    let (w, h, c) = cfg.heatmap_dims();
    target.heatmap.expect_dims((w, h, c))?;
    let mut maps = PredictionMaps::uniform(w, h, c, fit.init_heatmap);
    let mut history = Vec::with_capacity(fit.steps + 1);
    history.push(total_loss(&maps, target, cfg)?);

    for step in 0..fit.steps {
        let decay = 1.0 - step as f64 / fit.steps as f64;
        let grad = total_loss_grad(&maps, target, cfg)?;
        let lr = fit.lr_heatmap * decay;
        for (v, g) in maps.heatmap.data_mut().iter_mut().zip(grad.heatmap.data()) {
            *v = (*v - lr * g).clamp(PRED_EPS, 1.0 - PRED_EPS);
        }
        let lr = fit.lr_offset * decay;
        for (v, g) in maps.offset.data_mut().iter_mut().zip(grad.offset.data()) {
            *v -= lr * g;
        }
        let lr = fit.lr_radius * decay;
        for (v, g) in maps.radius.data_mut().iter_mut().zip(grad.radius.data()) {
            *v -= lr * g;
        }
        history.push(total_loss(&maps, target, cfg)?);
    }
    Ok(FitReport { maps, history })
}
