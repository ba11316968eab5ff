//! Analytic phantoms and their Fourier samples.
//!
//! Ellipse phantoms have closed-form transforms (jinc profile). Regions
//! bounded by a trigonometric curve `{mu > 0}` have no closed form; their
//! samples come from a fine rasterization followed by a DFT, which converges
//! at first order in the grid spacing. Axis-aligned boxes have exact
//! transforms and an exact 3x3 annihilating filter, which makes them the
//! reference for null-space dimension checks.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::annihilation::{FilterCoefficients, FilterSupport};
use crate::bessel::j1;
use crate::error::{invalid, Error, Result};
use crate::image::{pixel_center, RealImage};
use crate::kspace::{Extent, KSpaceGrid};
use crate::C64;

/// Ellipse in field-of-view coordinates `[0, 1]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: [f64; 2],
    pub semi_axes: [f64; 2],
    /// Rotation of the first semi-axis from the x axis, radians.
    pub angle: f64,
    pub amplitude: f64,
}

impl Ellipse {
    pub fn validate(&self) -> Result<()> {
        if !(self.semi_axes[0] > 0.0 && self.semi_axes[1] > 0.0) {
            return invalid("ellipse semi-axes must be strictly positive");
        }
        if !self.amplitude.is_finite() || !self.angle.is_finite() {
            return invalid("ellipse amplitude and angle must be finite");
        }
        let (lo, hi) = self.bounding_box();
        if lo[0] < 0.0 || lo[1] < 0.0 || hi[0] > 1.0 || hi[1] > 1.0 {
            log::warn!("ellipse at {:?} extends outside the unit field of view", self.center);
        }
        Ok(())
    }

    fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let (s, c) = self.angle.sin_cos();
        let [a, b] = self.semi_axes;
        let hx = ((a * c).powi(2) + (b * s).powi(2)).sqrt();
        let hy = ((a * s).powi(2) + (b * c).powi(2)).sqrt();
        let [cx, cy] = self.center;
        ([cx - hx, cy - hy], [cx + hx, cy + hy])
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        let u = (dx * c + dy * s) / self.semi_axes[0];
        let v = (-dx * s + dy * c) / self.semi_axes[1];
        u * u + v * v <= 1.0
    }

    /// Fourier transform of `amplitude * 1_E` at `omega = 2 pi k`.
    pub fn transform(&self, kx: f64, ky: f64) -> C64 {
        let (s, c) = self.angle.sin_cos();
        let [a, b] = self.semi_axes;
        let q1 = a * (kx * c + ky * s);
        let q2 = b * (-kx * s + ky * c);
        let rho = (q1 * q1 + q2 * q2).sqrt();
        let radial = if rho < 1e-12 { PI } else { j1(2.0 * PI * rho) / rho };
        let phase = -2.0 * PI * (kx * self.center[0] + ky * self.center[1]);
        C64::from_polar(self.amplitude * a * b * radial, phase)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub name: String,
    pub ellipses: Vec<Ellipse>,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ellipses.is_empty() {
            return invalid("phantom has no ellipses");
        }
        self.ellipses.iter().try_for_each(Ellipse::validate)
    }

    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        self.ellipses.iter().filter(|e| e.contains(x, y)).map(|e| e.amplitude).sum()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("phantom json: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// The 10-ellipse Shepp-Logan head phantom with the higher-contrast
/// ("modified") intensities, mapped from `[-1, 1]^2` to `[0, 1]^2`.
pub fn shepp_logan_spec() -> PhantomSpec {
    // (x0, y0, a, b, angle in degrees, intensity) on [-1, 1]^2
    const TABLE: [(f64, f64, f64, f64, f64, f64); 10] = [
        (0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
        (0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8),
        (0.22, 0.0, 0.11, 0.31, -18.0, -0.2),
        (-0.22, 0.0, 0.16, 0.41, 18.0, -0.2),
        (0.0, 0.35, 0.21, 0.25, 0.0, 0.1),
        (0.0, 0.1, 0.046, 0.046, 0.0, 0.1),
        (0.0, -0.1, 0.046, 0.046, 0.0, 0.1),
        (-0.08, -0.605, 0.046, 0.023, 0.0, 0.1),
        (0.0, -0.606, 0.023, 0.023, 0.0, 0.1),
        (0.06, -0.605, 0.023, 0.046, 0.0, 0.1),
    ];
    let ellipses = TABLE
        .iter()
        .map(|&(x0, y0, a, b, deg, v)| Ellipse {
            center: [(x0 + 1.0) / 2.0, (y0 + 1.0) / 2.0],
            semi_axes: [a / 2.0, b / 2.0],
            angle: deg.to_radians(),
            amplitude: v,
        })
        .collect();
    PhantomSpec { name: "shepp-logan".into(), ellipses }
}

/// Exact Fourier samples of an ellipse phantom on a centered window.
pub fn ellipse_kspace(spec: &PhantomSpec, extent: Extent) -> KSpaceGrid {
    KSpaceGrid::from_fn(extent, |kx, ky| {
        spec.ellipses.iter().map(|e| e.transform(kx as f64, ky as f64)).sum()
    })
}

/// Point-sampled rendering, averaging `supersample^2` sub-pixel samples.
pub fn rasterize(spec: &PhantomSpec, size: (usize, usize), supersample: usize) -> Result<RealImage> {
    rasterize_fn(size, supersample, |x, y| spec.value_at(x, y))
}

/// [`rasterize`] for any intensity function on the unit square.
pub fn rasterize_fn(
    size: (usize, usize),
    supersample: usize,
    f: impl Fn(f64, f64) -> f64 + Sync,
) -> Result<RealImage> {
    let (nx, ny) = size;
    if nx < 8 || ny < 8 {
        return invalid("raster size must be at least 8 in each axis");
    }
    if supersample == 0 {
        return invalid("supersample must be at least 1");
    }
    let s = supersample as f64;
    let mut data = vec![0.0; nx * ny];
    data.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        for (i, out) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for sj in 0..supersample {
                let y = (j as f64 + (sj as f64 + 0.5) / s) / ny as f64;
                for si in 0..supersample {
                    let x = (i as f64 + (si as f64 + 0.5) / s) / nx as f64;
                    acc += f(x, y);
                }
            }
            *out = acc / (s * s);
        }
    });
    RealImage::new(nx, ny, data)
}

/// Intensity profile multiplying the region indicator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Constant,
    /// `ax * x + ay * y + offset`
    Affine { ax: f64, ay: f64, offset: f64 },
    /// `offset + scale * ((x - cx)^2 - (y - cy)^2)`, harmonic.
    Saddle { cx: f64, cy: f64, scale: f64, offset: f64 },
}

impl Profile {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            Profile::Constant => 1.0,
            Profile::Affine { ax, ay, offset } => ax * x + ay * y + offset,
            Profile::Saddle { cx, cy, scale, offset } => {
                offset + scale * ((x - cx).powi(2) - (y - cy).powi(2))
            }
        }
    }
}

/// `amplitude * L(r) * 1{mu(r) > 0}` for a real trigonometric polynomial `mu`
/// on the periodic unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigRegionPhantom {
    pub mu: FilterCoefficients,
    pub amplitude: f64,
    pub profile: Profile,
}

impl TrigRegionPhantom {
    pub fn new(mu: FilterCoefficients, amplitude: f64) -> Result<Self> {
        let ph = Self { mu, amplitude, profile: Profile::Constant };
        ph.validate()?;
        Ok(ph)
    }

    pub fn with_profile(mut self, profile: Profile) -> Self {
        self.profile = profile;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() {
            return invalid("amplitude must be finite");
        }
        let c = &self.mu;
        let scale = c.norm();
        if scale == 0.0 {
            return invalid("mu has no nonzero coefficient");
        }
        let s = c.support;
        for (kx, ky) in s.indices() {
            if (c.get(-kx, -ky) - c.get(kx, ky).conj()).norm() > 1e-12 * scale {
                return invalid("mu coefficients must be conjugate-symmetric (real mu)");
            }
        }
        // the zero set must have measure zero
        let n = 256;
        let values = eval_real_grid(c, n, n);
        let peak = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let flat = values.iter().filter(|v| v.abs() <= 1e-12 * peak).count();
        if flat * 100 > n * n {
            return invalid("zero set of mu is not of measure zero");
        }
        Ok(())
    }

    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        if self.mu.eval(x, y).re > 0.0 {
            self.amplitude * self.profile.eval(x, y)
        } else {
            0.0
        }
    }
}

/// Real part of `mu` at the pixel centers of an `nx x ny` grid.
fn eval_real_grid(mu: &FilterCoefficients, nx: usize, ny: usize) -> Vec<f64> {
    let s = mu.support;
    let xs: Vec<f64> = (0..nx).map(|i| pixel_center(i, nx)).collect();
    let mut out = Vec::with_capacity(nx * ny);
    let mut row = vec![C64::new(0.0, 0.0); s.width()];
    for j in 0..ny {
        row_coefficients(mu, pixel_center(j, ny), &mut row);
        out.extend(xs.iter().map(|&x| eval_row(&row, s.k1, x)));
    }
    out
}

fn row_coefficients(mu: &FilterCoefficients, y: f64, row: &mut [C64]) {
    let s = mu.support;
    for (kx, r) in (-(s.k1 as i64)..=s.k1 as i64).zip(row.iter_mut()) {
        *r = (-(s.l1 as i64)..=s.l1 as i64)
            .map(|ky| mu.get(kx, ky) * C64::from_polar(1.0, 2.0 * PI * ky as f64 * y))
            .sum();
    }
}

fn eval_row(row: &[C64], k1: usize, x: f64) -> f64 {
    row.iter()
        .enumerate()
        .map(|(c, r)| (r * C64::from_polar(1.0, 2.0 * PI * (c as f64 - k1 as f64) * x)).re)
        .sum()
}

/// Fourier coefficients of a trigonometric-region phantom from an
/// `oversample x oversample` point rasterization.
///
/// The indicator discontinuity limits accuracy to first order in
/// `1 / oversample`.
pub fn trig_region_kspace(ph: &TrigRegionPhantom, extent: Extent, oversample: usize) -> Result<KSpaceGrid> {
    let needed = 4 * extent.width().max(extent.height());
    if oversample < needed {
        return invalid(format!(
            "oversample {oversample} below 4x the requested bandwidth ({needed})"
        ));
    }
    let m = oversample;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
    let xs: Vec<f64> = (0..m).map(|i| pixel_center(i, m)).collect();
    let s = ph.mu.support;
    let mut row_coef = vec![C64::new(0.0, 0.0); s.width()];
    let w = extent.width();
    // partial[j * w + c]: x-transform of row j at kx = c - Kx
    let mut partial = vec![C64::new(0.0, 0.0); m * w];
    let mut buf = vec![C64::new(0.0, 0.0); m];
    let inv_m = 1.0 / m as f64;
    let half_shift: Vec<C64> = (0..w)
        .map(|c| C64::from_polar(inv_m, -PI * (c as f64 - extent.kx as f64) * inv_m))
        .collect();
    for j in 0..m {
        let y = pixel_center(j, m);
        row_coefficients(&ph.mu, y, &mut row_coef);
        for (b, &x) in buf.iter_mut().zip(&xs) {
            let inside = eval_row(&row_coef, s.k1, x) > 0.0;
            *b = if inside {
                C64::new(ph.amplitude * ph.profile.eval(x, y), 0.0)
            } else {
                C64::new(0.0, 0.0)
            };
        }
        fft.process(&mut buf);
        for c in 0..w {
            let kx = c as i64 - extent.kx as i64;
            partial[j * w + c] = buf[crate::fft::wrap(kx, m)] * half_shift[c];
        }
    }
    Ok(KSpaceGrid::from_fn(extent, |kx, ky| {
        let c = (kx + extent.kx as i64) as usize;
        let step = C64::from_polar(1.0, -2.0 * PI * ky as f64 * inv_m);
        let mut phase = C64::from_polar(inv_m, -PI * ky as f64 * inv_m);
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..m {
            acc += partial[j * w + c] * phase;
            phase *= step;
        }
        acc
    }))
}

/// Axis-aligned box `[x0, x1] x [y0, y1]` inside the unit square.
///
/// Its boundary lies on the zero set of the separable trigonometric
/// polynomial returned by [`BoxPhantom::annihilating_filter`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxPhantom {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub amplitude: f64,
}

impl BoxPhantom {
    pub fn new(x: (f64, f64), y: (f64, f64), amplitude: f64) -> Result<Self> {
        let ok = |(a, b): (f64, f64)| 0.0 <= a && a < b && b <= 1.0;
        if !ok(x) || !ok(y) || !amplitude.is_finite() {
            return invalid("box edges must satisfy 0 <= lo < hi <= 1");
        }
        Ok(Self { x, y, amplitude })
    }

    /// Exact Fourier coefficients.
    pub fn kspace(&self, extent: Extent) -> KSpaceGrid {
        KSpaceGrid::from_fn(extent, |kx, ky| {
            interval_series(self.x, kx) * interval_series(self.y, ky) * self.amplitude
        })
    }

    /// The 3x3 filter `mu(r) = p(x) q(y)` with `p` vanishing at `x0, x1` and
    /// `q` at `y0, y1`.
    pub fn annihilating_filter(&self) -> FilterCoefficients {
        let px = root_pair(self.x);
        let py = root_pair(self.y);
        let support = FilterSupport::new(1, 1);
        let mut coeffs = vec![C64::new(0.0, 0.0); 9];
        for (ly, qy) in py.iter().enumerate() {
            for (lx, qx) in px.iter().enumerate() {
                coeffs[ly * 3 + lx] = qx * qy;
            }
        }
        FilterCoefficients::new(support, coeffs).expect("3x3 filter")
    }

    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        let inside = self.x.0 <= x && x <= self.x.1 && self.y.0 <= y && y <= self.y.1;
        if inside {
            self.amplitude
        } else {
            0.0
        }
    }
}

/// Fourier series coefficient of the indicator of `[a, b]` on the unit
/// period.
pub fn interval_series((a, b): (f64, f64), k: i64) -> C64 {
    if k == 0 {
        return C64::new(b - a, 0.0);
    }
    let w = 2.0 * PI * k as f64;
    (C64::from_polar(1.0, -w * a) - C64::from_polar(1.0, -w * b)) / C64::new(0.0, w)
}

/// Coefficients at k = -1, 0, 1 of `z^-1 (z - e^{j2pi a})(z - e^{j2pi b})`.
pub fn root_pair((a, b): (f64, f64)) -> [C64; 3] {
    let alpha = C64::from_polar(1.0, 2.0 * PI * a);
    let beta = C64::from_polar(1.0, 2.0 * PI * b);
    [alpha * beta, -(alpha + beta), C64::new(1.0, 0.0)]
}

/// Noisy samples together with the realized noise.
#[derive(Debug, Clone)]
pub struct NoisyKSpace {
    pub data: KSpaceGrid,
    pub noise: Vec<C64>,
    /// Per-component standard deviation.
    pub sigma: f64,
}

impl NoisyKSpace {
    /// `20 log10(|clean| / |noise|)` of the realized draw.
    pub fn realized_snr_db(&self, clean: &KSpaceGrid) -> f64 {
        let n = self.noise.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        20.0 * (clean.norm() / n).log10()
    }
}

/// Adds i.i.d. complex Gaussian noise at the requested measurement SNR.
///
/// `sigma` is chosen so that `20 log10(|b| / (sigma sqrt(2N))) = snr_db`.
/// `snr_db = +inf` returns the input unchanged. Each sample draws from its
/// own ChaCha stream indexed by position, so results do not depend on
/// evaluation order.
pub fn add_noise(ksp: &KSpaceGrid, snr_db: f64, seed: u64) -> Result<NoisyKSpace> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return invalid("snr_db must be finite or +inf");
    }
    let n = ksp.values.len();
    if snr_db == f64::INFINITY {
        return Ok(NoisyKSpace { data: ksp.clone(), noise: vec![C64::new(0.0, 0.0); n], sigma: 0.0 });
    }
    let sigma = ksp.norm() / ((2 * n) as f64).sqrt() / 10f64.powf(snr_db / 20.0);
    let noise: Vec<C64> = (0..n).map(|i| sigma * standard_complex_normal(seed, i as u64)).collect();
    let values = ksp.values.iter().zip(&noise).map(|(v, e)| v + e).collect();
    Ok(NoisyKSpace { data: KSpaceGrid { extent: ksp.extent, values }, noise, sigma })
}

fn standard_complex_normal(seed: u64, index: u64) -> C64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let re: f64 = StandardNormal.sample(&mut rng);
    let im: f64 = StandardNormal.sample(&mut rng);
    C64::new(re, im)
}
