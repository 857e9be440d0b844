use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Which kind of shape a value holds; used in mismatch diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Circle,
    Box,
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeKind::Circle => f.write_str("circle"),
            ShapeKind::Box => f.write_str("box"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-finite geometry input")]
    NonFinite,
    #[error("negative radius {0}")]
    NegativeRadius(f64),
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("cIOU is undefined for two zero-radius circles")]
    DegenerateCircles,
    #[error("invalid box: width {w} and height {h} must be positive and finite")]
    InvalidBox { w: f64, h: f64 },
    #[error("metric {metric} cannot compare {kind} shapes")]
    ShapeMismatch { metric: &'static str, kind: ShapeKind },
    #[error("grid shape mismatch: expected {expected:?}, got {actual:?}")]
    GridShape {
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },
    #[error("grid data length {len} does not match {width}x{height}x{channels}")]
    GridLength {
        width: usize,
        height: usize,
        channels: usize,
        len: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("class {class} out of range for {num_classes} classes")]
    ClassOutOfRange { class: usize, num_classes: usize },
    #[error("center ({x}, {y}) falls outside the {width}x{height} output grid")]
    CenterOutsideGrid {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("no annotated centers (N = 0)")]
    NoCenters,
    #[error("no ground truths to evaluate")]
    NoGroundTruth,
    #[error("both detection sets are empty")]
    EmptyConsistency,
    #[error("could not place object {placed} of {requested} after {retries} retries")]
    PackingInfeasible {
        placed: usize,
        requested: usize,
        retries: usize,
    },
    #[error("circle does not intersect the {width}x{height} image")]
    OutsideImage { width: usize, height: usize },
    #[error("invalid probability or scale {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}
