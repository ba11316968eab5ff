use std::f64::consts::PI;

use faer::Mat;
use fri_sr::annihilation::{derivative_system, SystemOptions};
use fri_sr::mask::{cadzow_denoise, null_basis, render_mask, render_single_mask, MaskMethod, NullBasis};
use fri_sr::{
    add_noise, annihilation_residual, derivative_weight, ellipse_kspace, estimate_ls, estimate_pipeline, metrics,
    rasterize, shepp_logan_spec, trig_region_kspace, AnnihilationSystem, BoxPhantom, DerivativeKind, Extent,
    FilterCoefficients, FilterSupport, KSpaceGrid, MaskParams, TrigRegionPhantom, C64,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_c(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Valid-region convolution matrix built directly from the grid samples.
fn dense_block(g: &KSpaceGrid, s: FilterSupport) -> DMatrix<C64> {
    let (kx, ky) = (g.extent.kx as i64, g.extent.ky as i64);
    let (k1, l1) = (s.k1 as i64, s.l1 as i64);
    let (vx, vy) = (kx - k1, ky - l1);
    let rows = ((2 * vx + 1) * (2 * vy + 1)) as usize;
    DMatrix::from_fn(rows, s.len(), |r, c| {
        let (sx, sy) = ((r as i64) % (2 * vx + 1) - vx, (r as i64) / (2 * vx + 1) - vy);
        let (mx, my) = ((c as i64) % (2 * k1 + 1) - k1, (c as i64) / (2 * k1 + 1) - l1);
        g.get(sx - mx, sy - my)
    })
}

fn stacked(blocks: &[DMatrix<C64>]) -> DMatrix<C64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut m = DMatrix::zeros(rows, blocks[0].ncols());
    let mut r0 = 0;
    for b in blocks {
        m.view_mut((r0, 0), b.shape()).copy_from(b);
        r0 += b.nrows();
    }
    m
}

fn oracle_nullity(m: &DMatrix<C64>, delta: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.max();
    // nalgebra omits singular values beyond min(rows, cols)
    let missing = m.ncols().saturating_sub(sv.len());
    sv.iter().filter(|&&s| s <= delta * top).count() + missing
}

fn box_phantom() -> BoxPhantom {
    BoxPhantom::new((0.21, 0.67), (0.33, 0.74), 1.0).unwrap()
}

fn first_order(k: &KSpaceGrid) -> Vec<KSpaceGrid> {
    DerivativeKind::FIRST_ORDER.iter().map(|&d| derivative_weight(k, d)).collect()
}

#[test]
fn null_space_of_exact_box_data_counts_filter_shifts() {
    let k = box_phantom().kspace(Extent::new(16, 16));
    let support = FilterSupport::new(2, 2);
    let sys = derivative_system(&k, &DerivativeKind::FIRST_ORDER, support, SystemOptions::default()).unwrap();
    let basis = null_basis(&sys, 1e-8).unwrap();
    assert_eq!(basis.dim(), 9);
    assert!(!basis.fallback);

    let dense = stacked(&first_order(&k).iter().map(|g| dense_block(g, support)).collect::<Vec<_>>());
    assert_eq!(oracle_nullity(&dense, 1e-8), 9);

    for (i, a) in basis.vectors.iter().enumerate() {
        assert!(annihilation_residual(&sys, a).unwrap() < 1e-10);
        for (j, b) in basis.vectors.iter().enumerate() {
            let g: C64 = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x.conj() * y).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g - want).norm() < 1e-10);
        }
    }
    let sigma_max = basis.singular_values[0];
    let kept = &basis.singular_values[basis.singular_values.len() - 9..];
    assert!(kept.iter().all(|&s| s <= 1e-8 * sigma_max));
}

#[test]
fn least_squares_recovers_a_planted_null_vector() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let support = FilterSupport::new(2, 1);
    let n = support.len();
    let m = 40;
    let u: Vec<C64> = (0..n).map(|_| random_c(&mut rng)).collect();
    let un: f64 = u.iter().map(|v| v.norm_sqr()).sum();
    let r: Vec<C64> = (0..m * n).map(|_| random_c(&mut rng)).collect();
    // T = R (I - u u^H / |u|^2)
    let t = Mat::from_fn(m, n, |i, j| {
        (0..n)
            .map(|l| {
                let p = if l == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) } - u[l] * u[j].conj() / un;
                r[i * n + l] * p
            })
            .sum::<C64>()
    });
    let sys = AnnihilationSystem::from_matrix(t, support).unwrap();
    let ls = estimate_ls(&sys).unwrap();
    assert!(!ls.non_unique);
    let dc = support.index(0, 0);
    let want: Vec<C64> = u.iter().map(|v| v / u[dc]).collect();
    let err: f64 = ls.coeffs.coeffs.iter().zip(&want).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let size: f64 = want.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    assert!(err / size < 1e-8, "relative error {}", err / size);
}

#[test]
fn cadzow_keeps_structured_low_rank_input() {
    // each first-derivative block of a box has nullity 15 on a 5x5 support
    let k = box_phantom().kspace(Extent::new(12, 12));
    let grids = first_order(&k);
    let support = FilterSupport::new(2, 2);
    for g in &grids {
        assert_eq!(oracle_nullity(&dense_block(g, support), 1e-9), 15);
    }
    let out = cadzow_denoise(&grids, support, 10, 3).unwrap();
    for (a, b) in out.grids.iter().zip(&grids) {
        let peak = b.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let diff = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-10 * peak, "moved by {}", diff / peak);
    }
}

/// One truncation plus structure-averaging round, on dense matrices.
fn dense_cadzow_round(g: &KSpaceGrid, s: FilterSupport, rank: usize) -> KSpaceGrid {
    let t = dense_block(g, s);
    let svd = t.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut low = DMatrix::<C64>::zeros(u.nrows(), v_t.ncols());
    for i in 0..rank {
        low += u.column(i) * v_t.row(i) * C64::new(svd.singular_values[i], 0.0);
    }
    let (kx, ky) = (g.extent.kx as i64, g.extent.ky as i64);
    let (k1, l1) = (s.k1 as i64, s.l1 as i64);
    let (vx, vy) = (kx - k1, ky - l1);
    let mut sum = vec![C64::new(0.0, 0.0); g.values.len()];
    let mut count = vec![0usize; g.values.len()];
    for r in 0..low.nrows() {
        let (sx, sy) = ((r as i64) % (2 * vx + 1) - vx, (r as i64) / (2 * vx + 1) - vy);
        for c in 0..low.ncols() {
            let (mx, my) = ((c as i64) % (2 * k1 + 1) - k1, (c as i64) / (2 * k1 + 1) - l1);
            let idx = g.extent.index(sx - mx, sy - my);
            sum[idx] += low[(r, c)];
            count[idx] += 1;
        }
    }
    let values = sum.into_iter().zip(count).map(|(s, n)| s / n as f64).collect();
    KSpaceGrid::new(g.extent, values).unwrap()
}

#[test]
fn single_cadzow_round_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ext = Extent::new(5, 4);
    let support = FilterSupport::new(2, 1);
    let grids: Vec<KSpaceGrid> = (0..2).map(|_| KSpaceGrid::from_fn(ext, |_, _| random_c(&mut rng))).collect();
    let out = cadzow_denoise(&grids, support, 3, 1).unwrap();
    for (got, g) in out.grids.iter().zip(&grids) {
        let want = dense_cadzow_round(g, support, 3);
        for (a, b) in got.values.iter().zip(&want.values) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }
    assert_eq!(out.objective.len(), 2);
}

fn acceptance_mu() -> FilterCoefficients {
    let mut c = FilterCoefficients::zeros(FilterSupport::new(2, 2));
    c.set(0, 0, C64::new(-0.3, 0.0));
    for (kx, ky) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
        c.set(kx, ky, C64::new(-0.5, 0.0));
    }
    c.set(2, 1, C64::new(0.05, 0.08));
    c.set(-2, -1, C64::new(0.05, -0.08));
    c.set(1, -2, C64::new(-0.07, 0.02));
    c.set(-1, 2, C64::new(-0.07, -0.02));
    c
}

fn frobenius_gap(a: &[KSpaceGrid], b: &[KSpaceGrid], s: FilterSupport) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (dense_block(x, s) - dense_block(y, s)).norm_squared())
        .sum::<f64>()
        .sqrt()
}

#[test]
fn cadzow_moves_noisy_data_toward_the_clean_matrix() {
    let ph = TrigRegionPhantom::new(acceptance_mu(), 1.0).unwrap();
    let clean = trig_region_kspace(&ph, Extent::new(16, 16), 1024).unwrap();
    let noisy = add_noise(&clean, 30.0, 2).unwrap().data;
    // nine shifts of the 5x5 filter fit a 7x7 support
    let support = FilterSupport::new(3, 3);
    let rank = support.len() - 9;
    let clean_w = first_order(&clean);
    let noisy_w = first_order(&noisy);
    let out = cadzow_denoise(&noisy_w, support, rank, 10).unwrap();
    let before = frobenius_gap(&noisy_w, &clean_w, support);
    let after = frobenius_gap(&out.grids, &clean_w, support);
    assert!(after < before, "distance {before} -> {after}");
    for pair in out.objective.windows(2) {
        assert!(pair[1] <= pair[0] * (1.0 + 1e-12), "objective rose: {:?}", out.objective);
    }
}

fn random_unitary(p: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    let a = DMatrix::from_fn(p, p, |_, _| random_c(rng));
    a.qr().q()
}

#[test]
fn mask_is_invariant_to_unitary_mixing_of_the_basis() {
    let k = box_phantom().kspace(Extent::new(16, 16));
    let sys = derivative_system(&k, &DerivativeKind::FIRST_ORDER, FilterSupport::new(2, 2), SystemOptions::default())
        .unwrap();
    let basis = null_basis(&sys, 1e-8).unwrap();
    let p = basis.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let q = random_unitary(p, &mut rng);
    let mixed: Vec<FilterCoefficients> = (0..p)
        .map(|j| {
            let coeffs = (0..basis.support().len())
                .map(|t| (0..p).map(|i| basis.vectors[i].coeffs[t] * q[(i, j)]).sum())
                .collect();
            FilterCoefficients::new(basis.support(), coeffs).unwrap()
        })
        .collect();
    let other = NullBasis { vectors: mixed, ..basis.clone() };
    let a = render_mask(&basis, (64, 48)).unwrap();
    let b = render_mask(&other, (64, 48)).unwrap();
    for (x, y) in a.image.data.iter().zip(&b.image.data) {
        assert!((x - y).abs() < 1e-10);
    }
}

/// Direct trigonometric-sum evaluation of the normalized mask.
fn direct_mask(vectors: &[FilterCoefficients], nx: usize, ny: usize) -> Vec<f64> {
    let mut px = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (x, y) = ((i as f64 + 0.5) / nx as f64, (j as f64 + 0.5) / ny as f64);
            let s: f64 = vectors.iter().map(|v| v.eval(x, y).norm_sqr()).sum();
            px.push((s / vectors.len() as f64).sqrt());
        }
    }
    let peak = px.iter().cloned().fold(0.0, f64::max);
    px.into_iter().map(|v| v / peak).collect()
}

#[test]
fn rendering_matches_direct_evaluation_at_two_resolutions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let support = FilterSupport::new(3, 2);
    let vectors: Vec<FilterCoefficients> = (0..3)
        .map(|_| FilterCoefficients::new(support, (0..support.len()).map(|_| random_c(&mut rng)).collect()).unwrap())
        .collect();
    let basis = NullBasis { vectors: vectors.clone(), singular_values: vec![1.0; 35], delta: 0.5, fallback: false };
    for n in [24, 48] {
        let m = render_mask(&basis, (n, n + 6)).unwrap();
        let want = direct_mask(&vectors, n, n + 6);
        for (a, b) in m.image.data.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10);
        }
        let single = render_single_mask(&vectors[0], (n, n)).unwrap();
        let want = direct_mask(&vectors[..1], n, n);
        for (a, b) in single.image.data.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn exact_support_mask_vanishes_on_the_box_edges() {
    let ph = box_phantom();
    let k = ph.kspace(Extent::new(16, 16));
    let params = MaskParams { delta: 1e-8, render: (128, 128), ..MaskParams::default() };
    let est = estimate_pipeline(&k, MaskMethod::NullAvg, FilterSupport::new(1, 1), &params).unwrap();
    let basis = est.basis.unwrap();
    assert_eq!(basis.dim(), 1);
    let top = {
        let raw: Vec<f64> = (0..128 * 128)
            .map(|p| {
                let (x, y) = (((p % 128) as f64 + 0.5) / 128.0, ((p / 128) as f64 + 0.5) / 128.0);
                basis.vectors[0].eval(x, y).norm()
            })
            .collect();
        raw.into_iter().fold(0.0, f64::max)
    };
    for t in 0..20 {
        let s = t as f64 / 20.0;
        for (x, y) in [(ph.x.0, s), (ph.x.1, s), (s, ph.y.0), (s, ph.y.1)] {
            assert!(basis.vectors[0].eval(x, y).norm() / top < 1e-6);
        }
    }
}

/// Points of `{mu = 0}` found by bisection along rays from a point where
/// `mu > 0`.
fn curve_points(mu: &FilterCoefficients, count: usize) -> Vec<(f64, f64)> {
    let f = |x: f64, y: f64| mu.eval(x, y).re;
    let (cx, cy) = (0.5, 0.5);
    assert!(f(cx, cy) > 0.0);
    let mut out = Vec::new();
    for t in 0..count {
        let th = 2.0 * PI * t as f64 / count as f64;
        let (dx, dy) = (th.cos(), th.sin());
        if f(cx + 0.5 * dx, cy + 0.5 * dy) >= 0.0 {
            continue;
        }
        let (mut lo, mut hi) = (0.0, 0.5);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if f(cx + mid * dx, cy + mid * dy) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push((cx + lo * dx, cy + lo * dy));
    }
    out
}

#[test]
fn all_methods_vanish_on_the_true_curve() {
    let mu = acceptance_mu();
    let ph = TrigRegionPhantom::new(mu.clone(), 1.0).unwrap();
    let k = trig_region_kspace(&ph, Extent::new(16, 16), 2048).unwrap();
    let points = curve_points(&mu, 32);
    assert!(points.len() >= 16);
    let params = MaskParams { delta: 1e-8, render: (256, 256), ..MaskParams::default() };
    for method in [MaskMethod::Ls, MaskMethod::Cadzow, MaskMethod::NullAvg] {
        let est = estimate_pipeline(&k, method, mu.support, &params).unwrap();
        let vectors = match (&est.coefficients, &est.basis) {
            (Some(c), _) => vec![c.clone()],
            (None, Some(b)) => b.vectors.clone(),
            _ => unreachable!(),
        };
        let raw = |x: f64, y: f64| {
            (vectors.iter().map(|v| v.eval(x, y).norm_sqr()).sum::<f64>() / vectors.len() as f64).sqrt()
        };
        let peak = (0..256 * 256)
            .map(|p| raw(((p % 256) as f64 + 0.5) / 256.0, ((p / 256) as f64 + 0.5) / 256.0))
            .fold(0.0, f64::max);
        let worst = points.iter().map(|&(x, y)| raw(x, y) / peak).fold(0.0, f64::max);
        assert!(worst < 1e-3, "{method}: {worst}");
    }
}

#[test]
fn shepp_logan_mask_is_small_on_edges_at_25_db() {
    let spec = shepp_logan_spec();
    let clean = ellipse_kspace(&spec, Extent::new(30, 30));
    let noisy = add_noise(&clean, 25.0, 0).unwrap().data;
    let params = MaskParams { delta: 0.4 * 10f64.powf(-25.0 / 20.0), ..MaskParams::default() };
    let est = estimate_pipeline(&noisy, MaskMethod::NullAvg, FilterSupport::new(8, 8), &params).unwrap();
    let truth = rasterize(&spec, (256, 256), 4).unwrap();
    let edges = metrics::edge_pixels(&truth, 1);
    let ratio = metrics::edge_ratio(&est.mask.image.data, &edges).unwrap();
    assert!(ratio < 0.15, "edge/off-edge ratio {ratio}");
    let again = estimate_pipeline(&noisy, MaskMethod::NullAvg, FilterSupport::new(8, 8), &params).unwrap();
    assert_eq!(est.mask.image.data, again.mask.image.data);
}
