//! Unitary 2-D discrete Fourier transforms on row-major grids.

use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

use crate::C64;

/// Planned forward/inverse transforms for an `nx x ny` grid.
pub struct Fft2 {
    nx: usize,
    ny: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl Fft2 {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            ny,
            row_fwd: planner.plan_fft(nx, FftDirection::Forward),
            row_inv: planner.plan_fft(nx, FftDirection::Inverse),
            col_fwd: planner.plan_fft(ny, FftDirection::Forward),
            col_inv: planner.plan_fft(ny, FftDirection::Inverse),
            scale: 1.0 / ((nx * ny) as f64).sqrt(),
        }
    }

    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, &self.row_fwd, &self.col_fwd);
    }

    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, &self.row_inv, &self.col_inv);
    }

    fn run(&self, data: &mut [C64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.nx * self.ny);
        rows.process(data);
        let mut column = vec![C64::new(0.0, 0.0); self.ny];
        for i in 0..self.nx {
            for j in 0..self.ny {
                column[j] = data[j * self.nx + i];
            }
            cols.process(&mut column);
            for j in 0..self.ny {
                data[j * self.nx + i] = column[j] * self.scale;
            }
        }
    }
}

/// Storage index of signed frequency `k` on a length-`n` DFT axis.
pub fn wrap(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}
