use std::f64::consts::PI;

use fri_sr::annihilation::{derivative_system, SystemOptions};
use fri_sr::{
    annihilation_residual, build_system, derivative_weight, estimate_ls, square_coeffs, BoxPhantom, DerivativeKind,
    Extent, FilterCoefficients, FilterSupport, KSpaceGrid, C64,
};
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = (KSpaceGrid, FilterSupport)> {
    (1usize..6, 0usize..5, 0usize..4, 0usize..4)
        .prop_filter("support must fit", |(kx, ky, k1, l1)| k1 <= kx && l1 <= ky)
        .prop_flat_map(|(kx, ky, k1, l1)| {
            let ext = Extent::new(kx, ky);
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), ext.len()).prop_map(move |v| {
                let values = v.into_iter().map(|(re, im)| C64::new(re, im)).collect();
                (KSpaceGrid::new(ext, values).unwrap(), FilterSupport::new(k1, l1))
            })
        })
}

/// Dense valid-region convolution matrix by explicit loops.
fn nested_loop_matrix(g: &KSpaceGrid, s: FilterSupport) -> Vec<Vec<C64>> {
    let (kx, ky) = (g.extent.kx as i64, g.extent.ky as i64);
    let (k1, l1) = (s.k1 as i64, s.l1 as i64);
    let mut rows = Vec::new();
    for sy in -(ky - l1)..=(ky - l1) {
        for sx in -(kx - k1)..=(kx - k1) {
            let mut row = Vec::new();
            for my in -l1..=l1 {
                for mx in -k1..=k1 {
                    let (px, py) = (sx - mx, sy - my);
                    let idx = ((py + ky) * (2 * kx + 1) + (px + kx)) as usize;
                    row.push(g.values[idx]);
                }
            }
            rows.push(row);
        }
    }
    rows
}

proptest! {
    #[test]
    fn convolution_matrix_matches_nested_loops((g, s) in grid_strategy()) {
        let sys = build_system(std::slice::from_ref(&g), s).unwrap();
        let oracle = nested_loop_matrix(&g, s);
        prop_assert_eq!(sys.rows(), oracle.len());
        prop_assert_eq!(sys.cols(), s.len());
        for (r, row) in oracle.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                prop_assert!((sys.matrix[(r, c)] - v).norm() < 1e-12);
            }
        }
        let c: Vec<C64> = (0..s.len()).map(|i| C64::new(i as f64 - 1.0, 0.5)).collect();
        let tc = sys.apply(&c);
        for (row, got) in oracle.iter().zip(tc) {
            let want: C64 = row.iter().zip(&c).map(|(a, b)| a * b).sum();
            prop_assert!((want - got).norm() < 1e-12);
        }
    }

    #[test]
    fn square_coeffs_evaluate_to_the_pointwise_square(
        v in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 15),
        x in 0.0f64..1.0, y in 0.0f64..1.0,
    ) {
        let s = FilterSupport::new(2, 1);
        let coeffs = v.into_iter().map(|(re, im)| C64::new(re, im)).collect();
        let mu = FilterCoefficients::new(s, coeffs).unwrap();
        let sq = square_coeffs(&mu);
        prop_assert_eq!(sq.support, FilterSupport::new(4, 2));
        let want = mu.eval(x, y) * mu.eval(x, y);
        prop_assert!((sq.eval(x, y) - want).norm() < 1e-12);
    }

    #[test]
    fn residual_ignores_filter_scale(scale in 0.01f64..100.0, phase in 0.0..2.0 * PI) {
        let b = BoxPhantom::new((0.2, 0.6), (0.3, 0.8), 1.0).unwrap();
        let k = b.kspace(Extent::new(6, 6));
        let sys = build_system(&[derivative_weight(&k, DerivativeKind::Dx)], FilterSupport::new(1, 1)).unwrap();
        let mut c = FilterCoefficients::zeros(FilterSupport::new(1, 1));
        c.set(0, 0, C64::new(1.0, 0.0));
        c.set(1, -1, C64::new(0.3, -0.2));
        let r1 = annihilation_residual(&sys, &c).unwrap();
        let w = C64::from_polar(scale, phase);
        let scaled = FilterCoefficients::new(c.support, c.coeffs.iter().map(|v| v * w).collect()).unwrap();
        prop_assert!((annihilation_residual(&sys, &scaled).unwrap() - r1).abs() < 1e-12 * r1.max(1e-300));
    }
}

#[test]
fn box_filter_annihilates_first_derivatives() {
    let b = BoxPhantom::new((0.21, 0.67), (0.33, 0.74), 1.5).unwrap();
    let k = b.kspace(Extent::new(16, 16));
    let sys = derivative_system(&k, &DerivativeKind::FIRST_ORDER, FilterSupport::new(1, 1), SystemOptions::default())
        .unwrap();
    let r = annihilation_residual(&sys, &b.annihilating_filter()).unwrap();
    assert!(r < 1e-10, "residual {r}");
    let mut wrong = b.annihilating_filter();
    wrong.set(1, 1, wrong.get(1, 1) + C64::new(0.1, 0.0));
    assert!(annihilation_residual(&sys, &wrong).unwrap() > 1e-4);
}

/// Roots on the unit circle of `c[-1] + c[0] z + c[1] z^2`, as positions in
/// `[0, 1)`.
fn root_positions(c: [C64; 3]) -> [f64; 2] {
    let (a, b, cc) = (c[2], c[1], c[0]);
    let disc = (b * b - a * cc * 4.0).sqrt();
    let pos = |z: C64| z.arg().rem_euclid(2.0 * PI) / (2.0 * PI);
    let mut r = [pos((-b + disc) / (a * 2.0)), pos((-b - disc) / (a * 2.0))];
    r.sort_by(|x, y| x.partial_cmp(y).unwrap());
    r
}

#[test]
fn one_dimensional_box_roots_from_least_squares() {
    // constant in y, so the edges are the lines x = a and x = b
    let (a, b) = (0.23, 0.71);
    let ph = BoxPhantom::new((a, b), (0.0, 1.0), 1.0).unwrap();
    let k = ph.kspace(Extent::new(12, 0));
    let support = FilterSupport::new(1, 0);
    let sys = derivative_system(&k, &[DerivativeKind::Dx], support, SystemOptions::default()).unwrap();
    let ls = estimate_ls(&sys).unwrap();
    assert!(!ls.non_unique);
    assert!(annihilation_residual(&sys, &ls.coeffs).unwrap() < 1e-10);
    let c = [ls.coeffs.get(-1, 0), ls.coeffs.get(0, 0), ls.coeffs.get(1, 0)];
    let [r0, r1] = root_positions(c);
    assert!((r0 - a).abs() < 1e-6 && (r1 - b).abs() < 1e-6, "roots {r0}, {r1}");
}

#[test]
fn second_order_annihilation_of_piecewise_affine_box() {
    // d^2 of L * 1_box lives on the edges, where mu^2 has double zeros
    let b = BoxPhantom::new((0.25, 0.6), (0.3, 0.7), 1.0).unwrap();
    let k = b.kspace(Extent::new(14, 14));
    let mu2 = square_coeffs(&b.annihilating_filter());
    let sys = derivative_system(&k, &DerivativeKind::SECOND_ORDER, mu2.support, SystemOptions::default()).unwrap();
    assert!(annihilation_residual(&sys, &mu2).unwrap() < 1e-10);
}

#[test]
fn derivative_weights_match_transfer_functions() {
    let b = BoxPhantom::new((0.1, 0.4), (0.5, 0.9), 1.0).unwrap();
    let k = b.kspace(Extent::new(3, 2));
    let w = 2.0 * PI;
    for (kind, f) in [
        (DerivativeKind::Dx, Box::new(|kx: f64, _ky: f64| C64::new(0.0, -w * kx)) as Box<dyn Fn(f64, f64) -> C64>),
        (DerivativeKind::Dxy, Box::new(|kx: f64, ky: f64| C64::new(-w * w * kx * ky, 0.0))),
        (DerivativeKind::Laplacian, Box::new(|kx: f64, ky: f64| C64::new(-w * w * (kx * kx + ky * ky), 0.0))),
    ] {
        let g = derivative_weight(&k, kind);
        for (kx, ky) in k.extent.freqs() {
            let want = k.get(kx, ky) * f(kx as f64, ky as f64);
            assert!((g.get(kx, ky) - want).norm() < 1e-12);
        }
    }
}
