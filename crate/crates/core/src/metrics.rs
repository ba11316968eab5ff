//! Reconstruction quality and edge-localization statistics.

use crate::error::{invalid, Result};
use crate::image::RealImage;
use crate::C64;

/// `20 log10(|x0| / |x - x0|)` in dB; `+inf` when `x == x0`.
pub fn snr(x: &[C64], x0: &[C64]) -> Result<f64> {
    if x.len() != x0.len() {
        return invalid("snr: images differ in size");
    }
    let signal = x0.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if signal == 0.0 {
        return invalid("snr: reference image is all zero");
    }
    let err = x.iter().zip(x0).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (signal / err).log10())
}

pub fn snr_real(x: &[f64], x0: &[f64]) -> Result<f64> {
    let to_c = |v: &[f64]| v.iter().map(|&r| C64::new(r, 0.0)).collect::<Vec<_>>();
    snr(&to_c(x), &to_c(x0))
}

/// Pixels whose value differs from a 4-neighbor by more than `1e-9`,
/// dilated by `dilate` pixels (8-neighborhood, clipped at the borders).
pub fn edge_pixels(truth: &RealImage, dilate: usize) -> Vec<bool> {
    let (nx, ny) = (truth.nx, truth.ny);
    let v = |i: usize, j: usize| truth.data[j * nx + i];
    let mut edge = vec![false; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let here = v(i, j);
            let differs = (i + 1 < nx && (v(i + 1, j) - here).abs() > 1e-9)
                || (j + 1 < ny && (v(i, j + 1) - here).abs() > 1e-9);
            if differs {
                edge[j * nx + i] = true;
                if i + 1 < nx && (v(i + 1, j) - here).abs() > 1e-9 {
                    edge[j * nx + i + 1] = true;
                }
                if j + 1 < ny && (v(i, j + 1) - here).abs() > 1e-9 {
                    edge[(j + 1) * nx + i] = true;
                }
            }
        }
    }
    for _ in 0..dilate {
        let prev = edge.clone();
        for j in 0..ny {
            for i in 0..nx {
                if prev[j * nx + i] {
                    continue;
                }
                let hit = (j.saturating_sub(1)..=(j + 1).min(ny - 1)).any(|jj| {
                    (i.saturating_sub(1)..=(i + 1).min(nx - 1)).any(|ii| prev[jj * nx + ii])
                });
                edge[j * nx + i] = hit;
            }
        }
    }
    edge
}

/// Mean of `values` on edge pixels divided by the mean off edges.
pub fn edge_ratio(values: &[f64], edges: &[bool]) -> Result<f64> {
    if values.len() != edges.len() {
        return invalid("edge_ratio: size mismatch");
    }
    let (mut on, mut n_on, mut off, mut n_off) = (0.0, 0usize, 0.0, 0usize);
    for (v, &e) in values.iter().zip(edges) {
        if e {
            on += v;
            n_on += 1;
        } else {
            off += v;
            n_off += 1;
        }
    }
    if n_on == 0 || n_off == 0 || off == 0.0 {
        return invalid("edge_ratio: degenerate edge partition");
    }
    Ok((on / n_on as f64) / (off / n_off as f64))
}

/// Mean of `values` over edge pixels.
pub fn edge_mean(values: &[f64], edges: &[bool]) -> f64 {
    let (s, n) = values
        .iter()
        .zip(edges)
        .filter(|(_, &e)| e)
        .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}
