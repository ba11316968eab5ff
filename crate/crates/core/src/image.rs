//! Spatial grids on the unit field of view.
//!
//! Pixel `(i, j)` is centered at `((i + 0.5) / nx, (j + 0.5) / ny)` and
//! stored at `j * nx + i`.

use crate::error::{invalid, Result};
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    pub nx: usize,
    pub ny: usize,
    pub data: Vec<T>,
}

pub type RealImage = Image<f64>;
pub type ComplexImage = Image<C64>;

impl<T: Clone> Image<T> {
    pub fn filled(nx: usize, ny: usize, value: T) -> Self {
        Self { nx, ny, data: vec![value; nx * ny] }
    }

    pub fn new(nx: usize, ny: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != nx * ny {
            return invalid(format!("{nx}x{ny} image needs {} pixels, got {}", nx * ny, data.len()));
        }
        Ok(Self { nx, ny, data })
    }

    pub fn at(&self, i: usize, j: usize) -> &T {
        &self.data[j * self.nx + i]
    }

    pub fn same_grid<U>(&self, other: &Image<U>) -> bool {
        self.nx == other.nx && self.ny == other.ny
    }
}

/// Pixel-center coordinate along an axis with `n` pixels.
pub fn pixel_center(i: usize, n: usize) -> f64 {
    (i as f64 + 0.5) / n as f64
}

impl RealImage {
    pub fn to_complex(&self) -> ComplexImage {
        Image { nx: self.nx, ny: self.ny, data: self.data.iter().map(|&v| C64::new(v, 0.0)).collect() }
    }
}

impl ComplexImage {
    pub fn magnitude(&self) -> RealImage {
        Image { nx: self.nx, ny: self.ny, data: self.data.iter().map(|v| v.norm()).collect() }
    }
}
