//! Circle-representation object detection primitives.
//!
//! The crate is `no_std` (with `alloc`) and covers the whole numeric side of a
//! bounding-circle detector:
//!
//! 1. [`geometry`]: circles, boxes, exact circle intersection and cIOU, quarter-turn
//!    rotations and shifts.
//! 2. [`targets`]: Gaussian center heatmaps, offset and radius targets, the focal /
//!    offset / radius losses and their gradients, plus a direct gradient-descent fitter.
//! 3. [`decode`]: 8-connected peak extraction, top-n selection and circle formation.
//! 4. [`evalkit`]: greedy matching, COCO-style AP, rotation consistency, mask detection
//!    ratio and the displacement study.
//! 5. [`synth`]: seeded synthetic scenes, a jittered detector simulator and mask
//!    rasterization.
//!
//! File formats and the command-line tool live in the companion `circdet` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod decode;
pub mod error;
pub mod evalkit;
pub mod geometry;
pub mod grid;
pub mod synth;
pub mod targets;

pub use error::{Error, Result};
pub use geometry::{BoxAA, Circle, Shape};
pub use grid::Grid;
