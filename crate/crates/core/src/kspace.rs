//! Centered Cartesian windows of integer Fourier frequencies.

use crate::error::{invalid, Result};
use crate::C64;

/// Half-widths of a centered frequency window `[-kx, kx] x [-ky, ky]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Extent {
    pub kx: usize,
    pub ky: usize,
}

impl Extent {
    pub fn new(kx: usize, ky: usize) -> Self {
        Self { kx, ky }
    }

    pub fn width(&self) -> usize {
        2 * self.kx + 1
    }

    pub fn height(&self) -> usize {
        2 * self.ky + 1
    }

    pub fn len(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, kx: i64, ky: i64) -> bool {
        kx.unsigned_abs() as usize <= self.kx && ky.unsigned_abs() as usize <= self.ky
    }

    /// Row-major position of frequency `(kx, ky)`, kx fastest.
    pub fn index(&self, kx: i64, ky: i64) -> usize {
        debug_assert!(self.contains(kx, ky));
        let col = (kx + self.kx as i64) as usize;
        let row = (ky + self.ky as i64) as usize;
        row * self.width() + col
    }

    /// Inverse of [`Extent::index`].
    pub fn freq(&self, idx: usize) -> (i64, i64) {
        let w = self.width();
        ((idx % w) as i64 - self.kx as i64, (idx / w) as i64 - self.ky as i64)
    }

    /// Iterator over all frequencies in storage order.
    pub fn freqs(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (0..self.len()).map(move |i| self.freq(i))
    }
}

/// Complex Fourier samples `f[k] = integral of f(r) exp(-j 2 pi <k, r>)` over
/// the unit square, on a centered window, in cycles per field of view.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpaceGrid {
    pub extent: Extent,
    pub values: Vec<C64>,
}

impl KSpaceGrid {
    pub fn zeros(extent: Extent) -> Self {
        Self { extent, values: vec![C64::new(0.0, 0.0); extent.len()] }
    }

    pub fn new(extent: Extent, values: Vec<C64>) -> Result<Self> {
        if values.len() != extent.len() {
            return invalid(format!(
                "k-space window {}x{} needs {} values, got {}",
                extent.width(),
                extent.height(),
                extent.len(),
                values.len()
            ));
        }
        Ok(Self { extent, values })
    }

    pub fn from_fn(extent: Extent, mut f: impl FnMut(i64, i64) -> C64) -> Self {
        let values = extent.freqs().map(|(kx, ky)| f(kx, ky)).collect();
        Self { extent, values }
    }

    pub fn get(&self, kx: i64, ky: i64) -> C64 {
        self.values[self.extent.index(kx, ky)]
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest deviation from `values[-k] = conj(values[k])`, relative to the
    /// largest sample magnitude.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let scale = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        self.extent
            .freqs()
            .map(|(kx, ky)| (self.get(-kx, -ky) - self.get(kx, ky).conj()).norm())
            .fold(0.0, f64::max)
            / scale
    }

    /// Restricts to a smaller centered window.
    pub fn crop(&self, extent: Extent) -> Result<Self> {
        if extent.kx > self.extent.kx || extent.ky > self.extent.ky {
            return invalid("crop window exceeds source window");
        }
        Ok(Self::from_fn(extent, |kx, ky| self.get(kx, ky)))
    }
}
