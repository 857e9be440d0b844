//! Circle and axis-aligned box geometry.
//!
//! All coordinates are image pixels with `x` to the right and `y` down. Circle
//! centers are continuous (sub-pixel) positions.

use core::f64::consts::PI;

use crate::error::{Error, Result, ShapeKind};

/// Distances this close to the tangency or containment boundary snap onto it.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Circle {
    pub const fn new(cx: f64, cy: f64, r: f64) -> Self {
        Self { cx, cy, r }
    }

    pub fn area(&self) -> f64 {
        circle_area(self)
    }

    pub fn is_finite(&self) -> bool {
        self.cx.is_finite() && self.cy.is_finite() && self.r.is_finite()
    }

    /// Uniform scaling about the image origin.
    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.cx * s, self.cy * s, self.r * s)
    }

    /// Fails unless the circle is finite with `r > 0`.
    pub fn validate(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::NonFinite);
        }
        if self.r <= 0.0 {
            return Err(Error::NonPositiveRadius(self.r));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoxAA {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoxAA {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }

    /// Largest circle inscribed in the box; the inverse of [`circle_to_bbox`] for squares.
    pub fn inscribed_circle(&self) -> Circle {
        let (cx, cy) = self.center();
        Circle::new(cx, cy, 0.5 * self.w.min(self.h))
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.x.is_finite() && self.y.is_finite();
        if !finite || !(self.w > 0.0 && self.h > 0.0) || !self.w.is_finite() || !self.h.is_finite()
        {
            return Err(Error::InvalidBox {
                w: self.w,
                h: self.h,
            });
        }
        Ok(())
    }
}

/// Either detection representation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum Shape {
    Circle(Circle),
    Box(BoxAA),
}

impl Shape {
    pub fn kind(&self) -> ShapeKind {
        match self {
            Shape::Circle(_) => ShapeKind::Circle,
            Shape::Box(_) => ShapeKind::Box,
        }
    }

    /// π r² for circles, w·h for boxes.
    pub fn area(&self) -> f64 {
        match self {
            Shape::Circle(c) => c.area(),
            Shape::Box(b) => b.area(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Shape::Circle(c) => c.validate(),
            Shape::Box(b) => b.validate(),
        }
    }
}

impl From<Circle> for Shape {
    fn from(c: Circle) -> Self {
        Shape::Circle(c)
    }
}

impl From<BoxAA> for Shape {
    fn from(b: BoxAA) -> Self {
        Shape::Box(b)
    }
}

/// Distance between centers and where the radical chord sits, for two circles that
/// partially overlap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensGeometry {
    /// Center distance.
    pub d: f64,
    /// Signed distance from the first center to the chord, along the center line.
    pub lx: f64,
    /// Half chord length.
    pub ly: f64,
}

/// Returns the lens parameters of `a` and `b`, or `None` outside the partial-overlap
/// regime `|r_a - r_b| < d < r_a + r_b`.
pub fn lens_geometry(a: &Circle, b: &Circle) -> Option<LensGeometry> {
    let d = center_distance(a, b);
    if !(d > (a.r - b.r).abs() && d < a.r + b.r) {
        return None;
    }
    let lx = (a.r * a.r - b.r * b.r + d * d) / (2.0 * d);
    let ly = libm::sqrt((a.r * a.r - lx * lx).max(0.0));
    Some(LensGeometry { d, lx, ly })
}

pub fn circle_area(c: &Circle) -> f64 {
    PI * c.r * c.r
}

fn center_distance(a: &Circle, b: &Circle) -> f64 {
    let dx = a.cx - b.cx;
    let dy = a.cy - b.cy;
    libm::sqrt(dx * dx + dy * dy)
}

enum Overlap {
    Disjoint,
    /// The smaller circle lies inside the larger one.
    Contained { inner: f64, outer: f64 },
    Partial { d: f64, r1: f64, r2: f64 },
}

fn classify(a: &Circle, b: &Circle) -> Result<Overlap> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite);
    }
    for r in [a.r, b.r] {
        if r < 0.0 {
            return Err(Error::NegativeRadius(r));
        }
    }
    // Order by radius so both argument orders run the same arithmetic.
    let (r1, r2) = if a.r >= b.r { (a.r, b.r) } else { (b.r, a.r) };
    let d = center_distance(a, b);
    let tol = BOUNDARY_TOL * (r1 + r2).max(1.0);
    Ok(if d <= r1 - r2 + tol {
        Overlap::Contained {
            inner: r2,
            outer: r1,
        }
    } else if r2 == 0.0 || d >= r1 + r2 - tol {
        Overlap::Disjoint
    } else {
        Overlap::Partial { d, r1, r2 }
    })
}

/// `x - sin x`, with a series near zero where the direct form cancels.
fn x_minus_sin(x: f64) -> f64 {
    if x > 0.5 {
        return x - libm::sin(x);
    }
    let x2 = x * x;
    let mut term = x * x2 / 6.0;
    let mut sum = 0.0f64;
    let mut k = 4.0;
    while libm::fabs(term) > 1e-18 * sum && k < 40.0 {
        sum += term;
        term *= -x2 / (k * (k + 1.0));
        k += 2.0;
    }
    sum
}

/// Area of the two circular segments that make up a lens.
///
/// Segment `i` is `r_i² (θ_i - sin θ_i cos θ_i)` with half-angle
/// `θ_i = arccos(l_i / r_i)`. The angle is taken from the half chord and the foot
/// distance so small lenses near tangency keep their relative precision.
fn lens_area(d: f64, r1: f64, r2: f64) -> f64 {
    let kite = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2);
    let ly = libm::sqrt(kite.max(0.0)) / (2.0 * d);
    let l1 = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
    let l2 = (d * d + r2 * r2 - r1 * r1) / (2.0 * d);
    let t1 = libm::atan2(ly, l1);
    let t2 = libm::atan2(ly, l2);
    let area = 0.5 * (r1 * r1 * x_minus_sin(2.0 * t1) + r2 * r2 * x_minus_sin(2.0 * t2));
    area.clamp(0.0, PI * r2 * r2)
}

/// Exact area of `a ∩ b`.
///
/// Uses the two-segment arccos form, which stays well defined at tangency and
/// containment. Symmetric in its arguments bit for bit.
pub fn circle_intersection_area(a: &Circle, b: &Circle) -> Result<f64> {
    Ok(match classify(a, b)? {
        Overlap::Disjoint => 0.0,
        Overlap::Contained { inner, .. } => PI * inner * inner,
        Overlap::Partial { d, r1, r2 } => lens_area(d, r1, r2),
    })
}

/// Circle intersection-over-union.
///
/// Errors when both radii are zero (0/0). Concentric and contained pairs return
/// `(r_min / r_max)²` directly, so identical circles give exactly 1.
pub fn ciou(a: &Circle, b: &Circle) -> Result<f64> {
    match classify(a, b)? {
        Overlap::Disjoint => {
            if a.r == 0.0 && b.r == 0.0 {
                return Err(Error::DegenerateCircles);
            }
            Ok(0.0)
        }
        Overlap::Contained { inner, outer } => {
            if outer == 0.0 {
                return Err(Error::DegenerateCircles);
            }
            let q = inner / outer;
            Ok(q * q)
        }
        Overlap::Partial { d, r1, r2 } => {
            let inter = lens_area(d, r1, r2);
            let union = PI * r1 * r1 + PI * r2 * r2 - inter;
            Ok((inter / union).clamp(0.0, 1.0))
        }
    }
}

/// Overlap of `[a, a + aw]` and `[b, b + bw]`. Nested spans return the inner
/// length as given, so identical boxes score exactly 1.
fn span_overlap(a: f64, aw: f64, b: f64, bw: f64) -> f64 {
    let (ae, be) = (a + aw, b + bw);
    if a <= b && be <= ae {
        bw
    } else if b <= a && ae <= be {
        aw
    } else {
        (ae.min(be) - a.max(b)).max(0.0)
    }
}

/// Standard rectangle IOU.
pub fn box_iou(a: &BoxAA, b: &BoxAA) -> f64 {
    let iw = span_overlap(a.x, a.w, b.x, b.w);
    let ih = span_overlap(a.y, a.h, b.y, b.h);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Tight square around a circle.
pub fn circle_to_bbox(c: &Circle) -> BoxAA {
    BoxAA::new(c.cx - c.r, c.cy - c.r, 2.0 * c.r, 2.0 * c.r)
}

/// Image dimensions after `quarter_turns` rotations.
pub fn rotated_dims(image_w: f64, image_h: f64, quarter_turns: u32) -> (f64, f64) {
    if quarter_turns % 2 == 0 {
        (image_w, image_h)
    } else {
        (image_h, image_w)
    }
}

/// Quarter-turn rotations and translations of shapes in image coordinates.
///
/// Rotations turn the image content counter-clockwise. A continuous point maps as
/// `(x, y) -> (y, W - x)` per turn and the frame becomes `H x W`; integer pixel
/// indices use [`rotate90_pixel`] instead.
pub trait Transform: Sized {
    fn rotate90(&self, image_w: f64, image_h: f64, quarter_turns: u32) -> Self;
    fn shift(&self, distance: f64, angle: f64) -> Self;

    /// Maps a shape seen in the frame rotated by `quarter_turns` back to the original
    /// `image_w x image_h` frame.
    fn unrotate90(&self, image_w: f64, image_h: f64, quarter_turns: u32) -> Self {
        let turns = quarter_turns % 4;
        let (w, h) = rotated_dims(image_w, image_h, turns);
        self.rotate90(w, h, (4 - turns) % 4)
    }
}

impl Transform for Circle {
    fn rotate90(&self, image_w: f64, image_h: f64, quarter_turns: u32) -> Self {
        let (mut w, mut h) = (image_w, image_h);
        let mut c = *self;
        for _ in 0..quarter_turns % 4 {
            c = Circle::new(c.cy, w - c.cx, c.r);
            core::mem::swap(&mut w, &mut h);
        }
        c
    }

    fn shift(&self, distance: f64, angle: f64) -> Self {
        if distance == 0.0 {
            return *self;
        }
        Circle::new(
            self.cx + distance * libm::cos(angle),
            self.cy + distance * libm::sin(angle),
            self.r,
        )
    }
}

impl Transform for BoxAA {
    fn rotate90(&self, image_w: f64, image_h: f64, quarter_turns: u32) -> Self {
        let (mut w, mut h) = (image_w, image_h);
        let mut b = *self;
        for _ in 0..quarter_turns % 4 {
            b = BoxAA::new(b.y, w - (b.x + b.w), b.h, b.w);
            core::mem::swap(&mut w, &mut h);
        }
        b
    }

    fn shift(&self, distance: f64, angle: f64) -> Self {
        if distance == 0.0 {
            return *self;
        }
        BoxAA::new(
            self.x + distance * libm::cos(angle),
            self.y + distance * libm::sin(angle),
            self.w,
            self.h,
        )
    }
}

impl Transform for Shape {
    fn rotate90(&self, image_w: f64, image_h: f64, quarter_turns: u32) -> Self {
        match self {
            Shape::Circle(c) => Shape::Circle(c.rotate90(image_w, image_h, quarter_turns)),
            Shape::Box(b) => Shape::Box(b.rotate90(image_w, image_h, quarter_turns)),
        }
    }

    fn shift(&self, distance: f64, angle: f64) -> Self {
        match self {
            Shape::Circle(c) => Shape::Circle(c.shift(distance, angle)),
            Shape::Box(b) => Shape::Box(b.shift(distance, angle)),
        }
    }
}

pub fn rotate90<S: Transform>(shape: &S, image_w: f64, image_h: f64, quarter_turns: u32) -> S {
    shape.rotate90(image_w, image_h, quarter_turns)
}

pub fn shift<S: Transform>(shape: &S, distance: f64, angle: f64) -> S {
    shape.shift(distance, angle)
}

/// Rotates an integer cell index of a `width x height` grid: `(x, y) -> (y, W - 1 - x)`
/// per counter-clockwise turn.
pub fn rotate90_pixel(
    x: usize,
    y: usize,
    width: usize,
    height: usize,
    quarter_turns: u32,
) -> (usize, usize) {
    let (mut w, mut h) = (width, height);
    let (mut px, mut py) = (x, y);
    for _ in 0..quarter_turns % 4 {
        (px, py) = (py, w - 1 - px);
        core::mem::swap(&mut w, &mut h);
    }
    (px, py)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn areas() {
        assert!(close(circle_area(&Circle::new(0.0, 0.0, 1.0)), PI, 1e-15));
        assert_eq!(circle_area(&Circle::new(5.0, 5.0, 0.0)), 0.0);
        assert!(close(circle_area(&Circle::new(0.0, 0.0, 2.0)), 4.0 * PI, 1e-14));
    }

    #[test]
    fn intersection_cases() {
        let unit = Circle::new(0.0, 0.0, 1.0);
        assert!(close(circle_intersection_area(&unit, &unit).unwrap(), PI, 1e-15));
        assert_eq!(
            circle_intersection_area(&unit, &Circle::new(3.0, 0.0, 1.0)).unwrap(),
            0.0
        );
        // 2r²·acos(d/2r) − (d/2)·√(4r² − d²) with r = d = 1
        let lens = 2.0 * libm::acos(0.5) - 0.5 * libm::sqrt(3.0);
        let got = circle_intersection_area(&unit, &Circle::new(1.0, 0.0, 1.0)).unwrap();
        assert!(close(got, lens, 1e-14));
        assert!(close(got, 1.22837, 1e-5));
        let inner = circle_intersection_area(&Circle::new(0.0, 0.0, 2.0), &Circle::new(0.5, 0.0, 1.0));
        assert!(close(inner.unwrap(), PI, 1e-15));
    }

    #[test]
    fn tangent_and_boundary_snap() {
        let a = Circle::new(0.0, 0.0, 1.0);
        assert_eq!(ciou(&a, &Circle::new(2.0, 0.0, 1.0)).unwrap(), 0.0);
        assert_eq!(ciou(&a, &Circle::new(2.0 - 1e-14, 0.0, 1.0)).unwrap(), 0.0);
        // internal tangency
        let big = Circle::new(0.0, 0.0, 2.0);
        assert_eq!(ciou(&big, &Circle::new(1.0, 0.0, 1.0)).unwrap(), 0.25);
    }

    #[test]
    fn ciou_examples() {
        let a = Circle::new(3.0, 4.0, 5.0);
        assert_eq!(ciou(&a, &a).unwrap(), 1.0);
        assert_eq!(
            ciou(&Circle::new(0.0, 0.0, 2.0), &Circle::new(0.0, 0.0, 1.0)).unwrap(),
            0.25
        );
        let v = ciou(&Circle::new(0.0, 0.0, 1.0), &Circle::new(1.0, 0.0, 1.0)).unwrap();
        let lens = 2.0 * libm::acos(0.5) - 0.5 * libm::sqrt(3.0);
        assert!(close(v, lens / (2.0 * PI - lens), 1e-15));
        assert!(close(v, 0.243010, 1e-6), "{v}");
    }

    #[test]
    fn ciou_errors() {
        let z = Circle::new(1.0, 1.0, 0.0);
        assert_eq!(ciou(&z, &z), Err(Error::DegenerateCircles));
        assert_eq!(ciou(&z, &Circle::new(4.0, 1.0, 0.0)), Err(Error::DegenerateCircles));
        assert_eq!(ciou(&z, &Circle::new(1.0, 1.0, 2.0)).unwrap(), 0.0);
        assert_eq!(
            ciou(&Circle::new(f64::NAN, 0.0, 1.0), &z),
            Err(Error::NonFinite)
        );
        assert!(matches!(
            circle_intersection_area(&Circle::new(0.0, 0.0, -1.0), &z),
            Err(Error::NegativeRadius(_))
        ));
    }

    #[test]
    fn box_iou_examples() {
        let a = BoxAA::new(0.0, 0.0, 2.0, 2.0);
        assert_eq!(box_iou(&a, &a), 1.0);
        assert_eq!(box_iou(&a, &BoxAA::new(5.0, 5.0, 1.0, 1.0)), 0.0);
        assert!(close(box_iou(&a, &BoxAA::new(1.0, 0.0, 2.0, 2.0)), 1.0 / 3.0, 1e-15));
    }

    #[test]
    fn bbox_conversion() {
        assert_eq!(circle_to_bbox(&Circle::new(5.0, 5.0, 2.0)), BoxAA::new(3.0, 3.0, 4.0, 4.0));
        assert_eq!(circle_to_bbox(&Circle::new(0.0, 0.0, 1.0)), BoxAA::new(-1.0, -1.0, 2.0, 2.0));
        let c = Circle::new(12.5, 7.25, 3.5);
        assert_eq!(circle_to_bbox(&c).inscribed_circle(), c);
    }

    #[test]
    fn rotation_examples() {
        let c = Circle::new(10.0, 20.0, 5.0);
        assert_eq!(rotate90(&c, 100.0, 100.0, 1), Circle::new(20.0, 90.0, 5.0));
        assert_eq!(rotate90(&c, 100.0, 100.0, 0), c);
        let mut s = Circle::new(13.0, 41.0, 6.0);
        let (mut w, mut h) = (120.0, 80.0);
        for _ in 0..4 {
            s = s.rotate90(w, h, 1);
            core::mem::swap(&mut w, &mut h);
        }
        assert_eq!(s, Circle::new(13.0, 41.0, 6.0));

        let b = BoxAA::new(10.0, 20.0, 30.0, 5.0);
        let rb = b.rotate90(100.0, 60.0, 1);
        assert_eq!(rb, BoxAA::new(20.0, 60.0, 5.0, 30.0));
        assert_eq!(rb.unrotate90(100.0, 60.0, 1), b);
        assert_eq!(b.rotate90(100.0, 60.0, 3).unrotate90(100.0, 60.0, 3), b);
    }

    #[test]
    fn rotation_matches_rasterized_centroid() {
        // Rasterize the circle, rotate the mask by index, re-fit the centroid.
        let (w, h) = (100usize, 100usize);
        let c = Circle::new(10.0, 20.0, 5.0);
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
        for y in 0..h {
            for x in 0..w {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                if (px - c.cx).powi(2) + (py - c.cy).powi(2) <= c.r * c.r {
                    let (rx, ry) = rotate90_pixel(x, y, w, h, 1);
                    sx += rx as f64 + 0.5;
                    sy += ry as f64 + 0.5;
                    n += 1.0;
                }
            }
        }
        let r = rotate90(&c, w as f64, h as f64, 1);
        assert!(close(sx / n, r.cx, 1e-9) && close(sy / n, r.cy, 1e-9));
    }

    #[test]
    fn shift_examples() {
        let c = Circle::new(0.0, 0.0, 1.0);
        assert_eq!(shift(&c, 0.0, 1.3), c);
        assert_eq!(shift(&c, 2.0, 0.0), Circle::new(2.0, 0.0, 1.0));
        let b = BoxAA::new(3.0, 4.0, 5.0, 6.0);
        let back = b.shift(7.5, 0.7).shift(7.5, 0.7 + PI);
        assert!(close(back.x, b.x, 1e-12) && close(back.y, b.y, 1e-12));
        assert_eq!((back.w, back.h), (b.w, b.h));
    }

    #[test]
    fn lens_parameters() {
        let a = Circle::new(0.0, 0.0, 1.0);
        let g = lens_geometry(&a, &Circle::new(1.0, 0.0, 1.0)).unwrap();
        assert!(close(g.d, 1.0, 0.0) && close(g.lx, 0.5, 1e-15));
        assert!(close(g.ly, libm::sqrt(0.75), 1e-15));
        assert!(lens_geometry(&a, &Circle::new(3.0, 0.0, 1.0)).is_none());
        assert!(lens_geometry(&Circle::new(0.0, 0.0, 3.0), &a).is_none());
    }

    #[test]
    fn pixel_rotation_cycles() {
        for (x, y) in [(0, 0), (3, 1), (6, 4)] {
            assert_eq!(rotate90_pixel(x, y, 7, 5, 4), (x, y));
            let (rx, ry) = rotate90_pixel(x, y, 7, 5, 1);
            assert!(rx < 5 && ry < 7);
        }
    }
}
