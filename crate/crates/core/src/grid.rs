//! Dense `width x height x channels` maps stored row-major with interleaved channels.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::rotate90_pixel;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::GridLength {
                width,
                height,
                channels,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(width, height, channels)`
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f64) {
        let i = self.index(x, y, c);
        self.data[i] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn expect_dims(&self, expected: (usize, usize, usize)) -> Result<()> {
        if self.dims() != expected {
            return Err(Error::GridShape {
                expected,
                actual: self.dims(),
            });
        }
        Ok(())
    }

    /// Rotates the cells counter-clockwise; channel values are carried unchanged.
    pub fn rotate90(&self, quarter_turns: u32) -> Self {
        let turns = quarter_turns % 4;
        let (w, h) = if turns % 2 == 0 {
            (self.width, self.height)
        } else {
            (self.height, self.width)
        };
        let mut out = Grid::zeros(w, h, self.channels);
        for y in 0..self.height {
            for x in 0..self.width {
                let (rx, ry) = rotate90_pixel(x, y, self.width, self.height, turns);
                for c in 0..self.channels {
                    out.set(rx, ry, c, self.get(x, y, c));
                }
            }
        }
        out
    }
}
