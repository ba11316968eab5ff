//! Dense reference solver for small weighted-TV problems, written without
//! any of the library's operators.

use std::f64::consts::PI;

use fri_sr::{Extent, KSpaceGrid, C64};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Problem {
    pub nx: usize,
    pub ny: usize,
    /// Continuous-convention Fourier samples.
    pub b: KSpaceGrid,
    pub weights: Vec<f64>,
    pub lambda: f64,
}

/// Random instance: grid sides in `4..=max_side`, a window that fits, weights
/// in `[0, 1]` and `lambda` log-uniform in `[1e-3, 1]`.
pub fn random_problem(seed: u64, max_side: usize) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = rng.random_range(4..=max_side);
    let ny = rng.random_range(4..=max_side);
    let ext = Extent::new(rng.random_range(1..=(nx - 1) / 2), rng.random_range(1..=(ny - 1) / 2));
    let b = KSpaceGrid::from_fn(ext, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let weights = (0..nx * ny).map(|_| rng.random_range(0.0..1.0)).collect();
    let lambda = 10f64.powf(rng.random_range(-3.0..0.0));
    Problem { nx, ny, b, weights, lambda }
}

pub struct Dense {
    pub a: DMatrix<C64>,
    pub d: DMatrix<C64>,
    pub bd: DVector<C64>,
}

/// Windowed unitary DFT, periodic forward differences (x block then y
/// block) and the samples in the DFT convention of the grid.
pub fn dense_operators(p: &Problem) -> Dense {
    let (nx, ny) = (p.nx, p.ny);
    let n = nx * ny;
    let freqs: Vec<(i64, i64)> = p.b.extent.freqs().collect();
    let scale = 1.0 / (n as f64).sqrt();
    let a = DMatrix::from_fn(freqs.len(), n, |r, c| {
        let (kx, ky) = freqs[r];
        let (i, j) = ((c % nx) as f64, (c / nx) as f64);
        C64::from_polar(scale, -2.0 * PI * (kx as f64 * i / nx as f64 + ky as f64 * j / ny as f64))
    });
    let mut d = DMatrix::<C64>::zeros(2 * n, n);
    for j in 0..ny {
        for i in 0..nx {
            let here = j * nx + i;
            d[(here, j * nx + (i + 1) % nx)] += C64::new(1.0, 0.0);
            d[(here, here)] -= C64::new(1.0, 0.0);
            d[(n + here, ((j + 1) % ny) * nx + i)] += C64::new(1.0, 0.0);
            d[(n + here, here)] -= C64::new(1.0, 0.0);
        }
    }
    let bd = DVector::from_iterator(
        freqs.len(),
        freqs.iter().map(|&(kx, ky)| {
            let ph = PI * (kx as f64 / nx as f64 + ky as f64 / ny as f64);
            p.b.get(kx, ky) * C64::from_polar((n as f64).sqrt(), ph)
        }),
    );
    Dense { a, d, bd }
}

pub fn dense_objective(p: &Problem, ops: &Dense, x: &DVector<C64>) -> f64 {
    let n = p.nx * p.ny;
    let r = &ops.a * x - &ops.bd;
    let g = &ops.d * x;
    let tv: f64 = (0..n).map(|k| p.weights[k] * (g[k].norm_sqr() + g[n + k].norm_sqr()).sqrt()).sum();
    r.norm_squared() + p.lambda * tv
}

/// ADMM on `z = D x` with residual-balanced penalty; returns the
/// minimizer.
pub fn admm_oracle(p: &Problem, ops: &Dense, iters: usize) -> DVector<C64> {
    let n = p.nx * p.ny;
    let ah = ops.a.adjoint();
    let dh = ops.d.adjoint();
    let aha = (&ah * &ops.a) * C64::new(2.0, 0.0);
    let dhd = &dh * &ops.d;
    let atb = (&ah * &ops.bd) * C64::new(2.0, 0.0);
    let factor = |rho: f64| {
        let inv = (&aha + &dhd * C64::new(rho, 0.0)).cholesky().expect("positive definite").inverse();
        (&inv * &atb, &inv * &dh * C64::new(rho, 0.0))
    };
    let mut rho = 2.0;
    let (mut x_data, mut mix) = factor(rho);
    let mut x = &ah * &ops.bd;
    let mut z = &ops.d * &x;
    let mut u = DVector::<C64>::zeros(2 * n);
    for it in 1..=iters {
        x = &x_data + &mix * (&z - &u);
        let dx = &ops.d * &x;
        let v = &dx + &u;
        let z_old = z.clone();
        for k in 0..n {
            let mag = (v[k].norm_sqr() + v[n + k].norm_sqr()).sqrt();
            let t = p.lambda * p.weights[k] / rho;
            let s = if mag > t { 1.0 - t / mag } else { 0.0 };
            z[k] = v[k] * s;
            z[n + k] = v[n + k] * s;
        }
        u += &dx - &z;
        let primal = (&dx - &z).norm();
        let dual = rho * (&z - &z_old).norm();
        if primal < 1e-12 * (1.0 + dx.norm()) && dual < 1e-12 * (1.0 + rho * u.norm()) {
            break;
        }
        if it % 50 == 0 && (primal > 10.0 * dual || dual > 10.0 * primal) {
            let f = if primal > dual { 2.0 } else { 0.5 };
            rho *= f;
            u /= C64::new(f, 0.0);
            (x_data, mix) = factor(rho);
        }
    }
    x
}
