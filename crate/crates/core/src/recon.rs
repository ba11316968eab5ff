//! Weighted total-variation reconstruction from low-pass Fourier samples.
//!
//! Solves `min_x |A x - b|^2 + lambda * sum_r W(r) |grad x|(r)` where `A`
//! is the unitary DFT restricted to the sampled window and `grad` uses
//! periodic forward differences with isotropic magnitude. The solver is the
//! first-order primal-dual method with fixed steps `tau * sigma * 8 < 1`;
//! the data-term proximal map is diagonal in Fourier because `A* A` is a
//! projector.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fft::{wrap, Fft2};
use crate::image::{ComplexImage, Image, RealImage};
use crate::kspace::{Extent, KSpaceGrid};
use crate::mask::EdgeMask;
use crate::metrics;
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Per-pixel penalty weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    pub image: RealImage,
}

impl WeightMap {
    pub fn ones(nx: usize, ny: usize) -> Self {
        Self { image: Image::filled(nx, ny, 1.0) }
    }

    pub fn new(image: RealImage) -> Result<Self> {
        if image.data.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return invalid("weights must lie in [0, 1]");
        }
        Ok(Self { image })
    }
}

/// `W = max(mask^gamma, floor)`.
pub fn weights_from_mask(mask: &EdgeMask, gamma: f64, floor: f64) -> Result<WeightMap> {
    weights_from_image(&mask.image, gamma, floor)
}

/// [`weights_from_mask`] on raw mask pixels, clamped to `[0, 1]` first.
pub fn weights_from_image(mask: &RealImage, gamma: f64, floor: f64) -> Result<WeightMap> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return invalid("weight exponent must be positive");
    }
    if !(0.0..=1.0).contains(&floor) {
        return invalid("weight floor must lie in [0, 1]");
    }
    log::info!("weights from mask: gamma = {gamma}, floor = {floor}");
    let data = mask.data.iter().map(|m| m.clamp(0.0, 1.0).powf(gamma).max(floor)).collect();
    WeightMap::new(RealImage { nx: mask.nx, ny: mask.ny, data })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconConfig {
    /// `0` returns the zero-filled adjoint reconstruction.
    pub lambda: f64,
    pub max_iters: usize,
    /// Stop when `|x_k+1 - x_k| / |x_k+1|` falls below this.
    pub tol: f64,
    /// Primal step; the dual step is `0.99 / (8 tau)`.
    pub tau: f64,
    /// Reconstruction grid `(nx, ny)`.
    pub grid: (usize, usize),
    /// Objective evaluation period for divergence checks.
    pub check_every: usize,
}

impl ReconConfig {
    pub fn new(lambda: f64, grid: (usize, usize)) -> Self {
        Self { lambda, max_iters: 500, tol: 1e-5, tau: 0.35, grid, check_every: 25 }
    }

    pub fn sigma(&self) -> f64 {
        0.99 / (8.0 * self.tau)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return invalid("lambda must be finite and nonnegative");
        }
        if self.max_iters == 0 {
            return invalid("max_iters must be at least 1");
        }
        if !(self.tau > 0.0) {
            return invalid("tau must be positive");
        }
        if self.grid.0 == 0 || self.grid.1 == 0 {
            return invalid("empty reconstruction grid");
        }
        Ok(())
    }
}

/// Unitary DFT on an `nx x ny` grid restricted to a centered window.
pub struct ForwardOp {
    nx: usize,
    ny: usize,
    window: Extent,
    fft: Fft2,
    /// Storage index in the full spectrum of each window sample.
    slots: Vec<usize>,
}

impl ForwardOp {
    pub fn new(grid: (usize, usize), window: Extent) -> Result<Self> {
        let (nx, ny) = grid;
        if window.width() > nx || window.height() > ny {
            return Err(Error::Geometry(format!(
                "window {}x{} does not fit the {nx}x{ny} spectrum",
                window.width(),
                window.height()
            )));
        }
        let slots = window.freqs().map(|(kx, ky)| wrap(ky, ny) * nx + wrap(kx, nx)).collect();
        Ok(Self { nx, ny, window, fft: Fft2::new(nx, ny), slots })
    }

    pub fn window(&self) -> Extent {
        self.window
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut buf = x.to_vec();
        self.fft.forward(&mut buf);
        self.slots.iter().map(|&s| buf[s]).collect()
    }

    pub fn adjoint(&self, y: &[C64]) -> Vec<C64> {
        let mut buf = vec![ZERO; self.nx * self.ny];
        for (&s, v) in self.slots.iter().zip(y) {
            buf[s] = *v;
        }
        self.fft.inverse(&mut buf);
        buf
    }

    /// `argmin_x |A x - b|^2 + |x - v|^2 / (2 tau)`.
    fn prox_data(&self, v: &mut [C64], b: &[C64], tau: f64) {
        self.fft.forward(v);
        let t2 = 2.0 * tau;
        let inv = 1.0 / (1.0 + t2);
        for (&s, bk) in self.slots.iter().zip(b) {
            v[s] = (v[s] + bk * t2) * inv;
        }
        self.fft.inverse(v);
    }
}

/// `A x` as a k-space grid in the DFT convention of the image grid.
pub fn forward_op(x: &ComplexImage, window: Extent) -> Result<KSpaceGrid> {
    let op = ForwardOp::new((x.nx, x.ny), window)?;
    KSpaceGrid::new(window, op.apply(&x.data))
}

fn half_pixel_phase(kx: i64, ky: i64, grid: (usize, usize)) -> C64 {
    let ph = std::f64::consts::PI * (kx as f64 / grid.0 as f64 + ky as f64 / grid.1 as f64);
    C64::from_polar(((grid.0 * grid.1) as f64).sqrt(), ph)
}

/// Converts continuous-domain Fourier coefficients into the unitary DFT
/// convention of an `nx x ny` grid with half-pixel-offset centers.
pub fn dft_measurements(b: &KSpaceGrid, grid: (usize, usize)) -> KSpaceGrid {
    KSpaceGrid::from_fn(b.extent, |kx, ky| b.get(kx, ky) * half_pixel_phase(kx, ky, grid))
}

/// Inverse of [`dft_measurements`].
pub fn continuous_samples(dft: &KSpaceGrid, grid: (usize, usize)) -> KSpaceGrid {
    KSpaceGrid::from_fn(dft.extent, |kx, ky| dft.get(kx, ky) / half_pixel_phase(kx, ky, grid))
}

/// Periodic forward differences `(d/dx, d/dy)`.
pub fn gradient(x: &[C64], nx: usize, ny: usize) -> (Vec<C64>, Vec<C64>) {
    let mut gx = vec![ZERO; nx * ny];
    let mut gy = vec![ZERO; nx * ny];
    for j in 0..ny {
        let jn = (j + 1) % ny;
        for i in 0..nx {
            let inx = (i + 1) % nx;
            let here = x[j * nx + i];
            gx[j * nx + i] = x[j * nx + inx] - here;
            gy[j * nx + i] = x[jn * nx + i] - here;
        }
    }
    (gx, gy)
}

/// Adjoint of [`gradient`] (negative divergence).
pub fn gradient_adjoint(px: &[C64], py: &[C64], nx: usize, ny: usize) -> Vec<C64> {
    let mut out = vec![ZERO; nx * ny];
    for j in 0..ny {
        let jp = (j + ny - 1) % ny;
        for i in 0..nx {
            let ip = (i + nx - 1) % nx;
            let k = j * nx + i;
            out[k] = px[j * nx + ip] - px[k] + py[jp * nx + i] - py[k];
        }
    }
    out
}

/// `sum_r W(r) |grad x|(r)`.
pub fn weighted_tv(x: &[C64], w: &WeightMap) -> f64 {
    let (nx, ny) = (w.image.nx, w.image.ny);
    let (gx, gy) = gradient(x, nx, ny);
    gx.iter()
        .zip(&gy)
        .zip(&w.image.data)
        .map(|((a, b), wt)| wt * (a.norm_sqr() + b.norm_sqr()).sqrt())
        .sum()
}

fn objective(op: &ForwardOp, x: &[C64], b: &[C64], w: &WeightMap, lambda: f64) -> f64 {
    let ax = op.apply(x);
    let data: f64 = ax.iter().zip(b).map(|(a, y)| (a - y).norm_sqr()).sum();
    if lambda == 0.0 {
        data
    } else {
        data + lambda * weighted_tv(x, w)
    }
}

/// Objective value of `x` for measurements `b` (continuous convention).
pub fn recon_objective(x: &ComplexImage, b: &KSpaceGrid, w: &WeightMap, lambda: f64) -> Result<f64> {
    let op = ForwardOp::new((x.nx, x.ny), b.extent)?;
    let bd = dft_measurements(b, (x.nx, x.ny));
    Ok(objective(&op, &x.data, &bd.values, w, lambda))
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub image: ComplexImage,
    pub objective: f64,
    pub iters: usize,
    pub converged: bool,
}

/// Weighted-TV reconstruction of `b` (continuous-domain samples) on
/// `cfg.grid`.
pub fn wtv_recon(b: &KSpaceGrid, w: &WeightMap, cfg: &ReconConfig) -> Result<Reconstruction> {
    cfg.validate()?;
    let (nx, ny) = cfg.grid;
    if w.image.nx != nx || w.image.ny != ny {
        return Err(Error::Geometry("weight map does not match the reconstruction grid".into()));
    }
    let op = ForwardOp::new(cfg.grid, b.extent)?;
    let bd = dft_measurements(b, cfg.grid).values;
    let mut x = op.adjoint(&bd);
    let start_obj = objective(&op, &x, &bd, w, cfg.lambda);
    if cfg.lambda == 0.0 {
        return Ok(Reconstruction { image: Image { nx, ny, data: x }, objective: start_obj, iters: 0, converged: true });
    }

    let tau = cfg.tau;
    let sigma = cfg.sigma();
    let radius: Vec<f64> = w.image.data.iter().map(|wt| cfg.lambda * wt).collect();
    let mut px = vec![ZERO; nx * ny];
    let mut py = vec![ZERO; nx * ny];
    let mut x_bar = x.clone();
    let mut best = (start_obj, x.clone());
    let zero_obj: f64 = bd.iter().map(|v| v.norm_sqr()).sum();
    let ceiling = 100.0 * start_obj.max(zero_obj).max(f64::MIN_POSITIVE);
    let mut converged = false;
    let mut iters = 0;

    for it in 1..=cfg.max_iters {
        iters = it;
        let (gx, gy) = gradient(&x_bar, nx, ny);
        for k in 0..nx * ny {
            let qx = px[k] + gx[k] * sigma;
            let qy = py[k] + gy[k] * sigma;
            let mag = (qx.norm_sqr() + qy.norm_sqr()).sqrt();
            let scale = if mag > radius[k] { radius[k] / mag } else { 1.0 };
            px[k] = qx * scale;
            py[k] = qy * scale;
        }
        let kt = gradient_adjoint(&px, &py, nx, ny);
        let mut v: Vec<C64> = x.iter().zip(&kt).map(|(xi, ki)| xi - ki * tau).collect();
        op.prox_data(&mut v, &bd, tau);

        let mut diff = 0.0;
        let mut size = 0.0;
        for k in 0..nx * ny {
            let d = v[k] - x[k];
            diff += d.norm_sqr();
            size += v[k].norm_sqr();
            x_bar[k] = v[k] + d;
        }
        x = v;
        let change = (diff / size.max(f64::MIN_POSITIVE)).sqrt();

        if it % cfg.check_every == 0 || change < cfg.tol || it == cfg.max_iters {
            let obj = objective(&op, &x, &bd, w, cfg.lambda);
            if !obj.is_finite() || obj > ceiling {
                return Err(Error::Divergence(format!(
                    "objective {obj:.6e} at iteration {it} exceeds {ceiling:.6e}"
                )));
            }
            if obj <= best.0 {
                best = (obj, x.clone());
            }
        }
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    let (obj, data) = best;
    log::debug!("wtv: lambda {} -> objective {obj:.6e} after {iters} iterations", cfg.lambda);
    Ok(Reconstruction { image: Image { nx, ny, data }, objective: obj, iters, converged })
}

/// Unweighted TV: [`wtv_recon`] with `W = 1`.
pub fn tv_recon(b: &KSpaceGrid, cfg: &ReconConfig) -> Result<Reconstruction> {
    wtv_recon(b, &WeightMap::ones(cfg.grid.0, cfg.grid.1), cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub snr_db: f64,
    pub objective: f64,
    pub iters: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Index of the highest-SNR row (first on ties).
    pub best: usize,
}

impl SweepResult {
    pub fn best_row(&self) -> &SweepRow {
        &self.rows[self.best]
    }
}

/// Reconstructs for each `lambda` and scores against `truth`.
pub fn lambda_sweep(
    b: &KSpaceGrid,
    w: &WeightMap,
    cfg: &ReconConfig,
    lambdas: &[f64],
    truth: &ComplexImage,
) -> Result<SweepResult> {
    if lambdas.is_empty() {
        return invalid("empty lambda list");
    }
    if truth.nx != cfg.grid.0 || truth.ny != cfg.grid.1 {
        return Err(Error::Geometry("reference image does not match the reconstruction grid".into()));
    }
    let rows = lambdas
        .par_iter()
        .map(|&lambda| {
            let run = ReconConfig { lambda, ..cfg.clone() };
            let rec = wtv_recon(b, w, &run)?;
            Ok(SweepRow {
                lambda,
                snr_db: metrics::snr(&rec.image.data, &truth.data)?,
                objective: rec.objective,
                iters: rec.iters,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.snr_db > rows[best].snr_db {
            best = i;
        }
    }
    Ok(SweepResult { rows, best })
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count).map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64)).collect()
}
