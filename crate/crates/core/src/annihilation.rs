//! Derivative weighting and block-Toeplitz annihilation systems.
//!
//! If the edges of a piecewise-constant image lie on the zero set of a
//! trigonometric polynomial `mu`, then `mu` times any first derivative of the
//! image vanishes, so in Fourier the coefficients of `mu` annihilate the
//! derivative spectra by convolution. For `g = L 1_Omega` with a second-order
//! operator killing `L`, the same holds for `mu^2` and that operator.
//!
//! Only convolution outputs whose filter footprint lies entirely inside the
//! sampled window ("valid" shifts) enter the system.

use std::f64::consts::PI;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kspace::{Extent, KSpaceGrid};
use crate::C64;

/// Rectangular filter support `[-k1, k1] x [-l1, l1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FilterSupport {
    pub k1: usize,
    pub l1: usize,
}

impl FilterSupport {
    pub fn new(k1: usize, l1: usize) -> Self {
        Self { k1, l1 }
    }

    /// Half the data half-width in each axis.
    pub fn default_for(extent: Extent) -> Self {
        Self { k1: extent.kx / 2, l1: extent.ky / 2 }
    }

    pub fn width(&self) -> usize {
        2 * self.k1 + 1
    }

    pub fn height(&self) -> usize {
        2 * self.l1 + 1
    }

    pub fn len(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_extent(&self) -> Extent {
        Extent::new(self.k1, self.l1)
    }

    pub fn index(&self, kx: i64, ky: i64) -> usize {
        self.as_extent().index(kx, ky)
    }

    pub fn indices(&self) -> impl Iterator<Item = (i64, i64)> {
        let e = self.as_extent();
        (0..e.len()).map(move |i| e.freq(i))
    }

    pub fn contains(&self, kx: i64, ky: i64) -> bool {
        self.as_extent().contains(kx, ky)
    }

    /// Shifts at which the support fits inside `window`.
    pub fn valid_region(&self, window: Extent) -> Result<Extent> {
        if self.k1 > window.kx || self.l1 > window.ky {
            return Err(Error::Geometry(format!(
                "filter {}x{} leaves no valid region in a {}x{} window",
                self.width(),
                self.height(),
                window.width(),
                window.height()
            )));
        }
        Ok(Extent::new(window.kx - self.k1, window.ky - self.l1))
    }
}

/// Fourier coefficients of a trigonometric polynomial
/// `mu(r) = sum_k c[k] exp(j 2 pi <k, r>)` on a rectangular support.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCoefficients {
    pub support: FilterSupport,
    pub coeffs: Vec<C64>,
}

impl FilterCoefficients {
    pub fn new(support: FilterSupport, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != support.len() {
            return invalid(format!(
                "support {}x{} needs {} coefficients, got {}",
                support.width(),
                support.height(),
                support.len(),
                coeffs.len()
            ));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return invalid("filter coefficients must be finite");
        }
        Ok(Self { support, coeffs })
    }

    pub fn zeros(support: FilterSupport) -> Self {
        Self { support, coeffs: vec![C64::new(0.0, 0.0); support.len()] }
    }

    /// The constant polynomial `mu = 1`.
    pub fn delta() -> Self {
        Self { support: FilterSupport::new(0, 0), coeffs: vec![C64::new(1.0, 0.0)] }
    }

    pub fn get(&self, kx: i64, ky: i64) -> C64 {
        if self.support.contains(kx, ky) {
            self.coeffs[self.support.index(kx, ky)]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    pub fn set(&mut self, kx: i64, ky: i64, value: C64) {
        let i = self.support.index(kx, ky);
        self.coeffs[i] = value;
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == C64::new(0.0, 0.0))
    }

    /// `mu(x, y)` by direct summation.
    pub fn eval(&self, x: f64, y: f64) -> C64 {
        self.support
            .indices()
            .zip(&self.coeffs)
            .map(|((kx, ky), c)| c * C64::from_polar(1.0, 2.0 * PI * (kx as f64 * x + ky as f64 * y)))
            .sum()
    }

    /// Zero-pads (or keeps) onto a larger support.
    pub fn embed(&self, support: FilterSupport) -> Result<Self> {
        if support.k1 < self.support.k1 || support.l1 < self.support.l1 {
            return invalid("target support is smaller than the source support");
        }
        let mut out = Self::zeros(support);
        for (kx, ky) in self.support.indices() {
            out.set(kx, ky, self.get(kx, ky));
        }
        Ok(out)
    }

    /// Multiplies `mu` by `exp(j 2 pi <shift, r>)`, translating the
    /// coefficients. Fails if the shifted coefficients leave `support`.
    pub fn shifted(&self, shift: (i64, i64), support: FilterSupport) -> Result<Self> {
        let mut out = Self::zeros(support);
        for (kx, ky) in self.support.indices() {
            let c = self.get(kx, ky);
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let (tx, ty) = (kx + shift.0, ky + shift.1);
            if !support.contains(tx, ty) {
                return invalid("shifted filter leaves the target support");
            }
            out.set(tx, ty, c);
        }
        Ok(out)
    }
}

/// Differential operators applied in Fourier as multiplication by the
/// transfer factor at `omega = 2 pi k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivativeKind {
    Dx,
    Dy,
    Dxx,
    Dyy,
    Dxy,
    Laplacian,
}

impl DerivativeKind {
    pub const FIRST_ORDER: [DerivativeKind; 2] = [DerivativeKind::Dx, DerivativeKind::Dy];
    pub const SECOND_ORDER: [DerivativeKind; 3] =
        [DerivativeKind::Dxx, DerivativeKind::Dxy, DerivativeKind::Dyy];

    pub fn order(&self) -> usize {
        match self {
            DerivativeKind::Dx | DerivativeKind::Dy => 1,
            _ => 2,
        }
    }

    pub fn transfer(&self, kx: i64, ky: i64) -> C64 {
        let wx = 2.0 * PI * kx as f64;
        let wy = 2.0 * PI * ky as f64;
        match self {
            DerivativeKind::Dx => C64::new(0.0, -wx),
            DerivativeKind::Dy => C64::new(0.0, -wy),
            DerivativeKind::Dxx => C64::new(-wx * wx, 0.0),
            DerivativeKind::Dyy => C64::new(-wy * wy, 0.0),
            DerivativeKind::Dxy => C64::new(-wx * wy, 0.0),
            DerivativeKind::Laplacian => C64::new(-(wx * wx + wy * wy), 0.0),
        }
    }
}

pub fn derivative_weight(ksp: &KSpaceGrid, kind: DerivativeKind) -> KSpaceGrid {
    let values =
        ksp.extent.freqs().zip(&ksp.values).map(|((kx, ky), v)| v * kind.transfer(kx, ky)).collect();
    KSpaceGrid { extent: ksp.extent, values }
}

/// Stacked valid-convolution matrix `T = [T_1; ...; T_n]`.
///
/// Row order is grid-major, then ky shift, then kx shift; columns follow
/// the filter support storage order.
#[derive(Debug, Clone)]
pub struct AnnihilationSystem {
    pub matrix: Mat<C64>,
    pub support: FilterSupport,
    /// Data window the system was built from, if any.
    pub window: Option<Extent>,
    /// Derivative applied to each stacked block, when known.
    pub kinds: Vec<DerivativeKind>,
    pub blocks_normalized: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SystemOptions {
    /// Scale each stacked block to unit Frobenius norm.
    pub normalize_blocks: bool,
}

impl AnnihilationSystem {
    /// Wraps an arbitrary matrix whose columns are indexed by `support`.
    pub fn from_matrix(matrix: Mat<C64>, support: FilterSupport) -> Result<Self> {
        if matrix.ncols() != support.len() {
            return invalid("matrix columns do not match the filter support");
        }
        Ok(Self { matrix, support, window: None, kinds: Vec::new(), blocks_normalized: false })
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn apply(&self, c: &[C64]) -> Vec<C64> {
        assert_eq!(c.len(), self.cols());
        let mut out = vec![C64::new(0.0, 0.0); self.rows()];
        for (j, cj) in c.iter().enumerate() {
            if *cj == C64::new(0.0, 0.0) {
                continue;
            }
            let col = self.matrix.col(j);
            for (o, t) in out.iter_mut().zip(col.iter()) {
                *o += t * cj;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm_l2()
    }
}

/// Valid-shift convolution matrix of a single grid.
pub(crate) fn convolution_matrix(grid: &KSpaceGrid, support: FilterSupport) -> Result<Mat<C64>> {
    let valid = support.valid_region(grid.extent)?;
    let shifts: Vec<(i64, i64)> = valid.freqs().collect();
    let taps: Vec<(i64, i64)> = support.indices().collect();
    Ok(Mat::from_fn(shifts.len(), taps.len(), |r, c| {
        let (sx, sy) = shifts[r];
        let (mx, my) = taps[c];
        grid.get(sx - mx, sy - my)
    }))
}

pub fn build_system(weighted: &[KSpaceGrid], support: FilterSupport) -> Result<AnnihilationSystem> {
    build_system_with(weighted, support, SystemOptions::default())
}

pub fn build_system_with(
    weighted: &[KSpaceGrid],
    support: FilterSupport,
    options: SystemOptions,
) -> Result<AnnihilationSystem> {
    let first = weighted.first().ok_or_else(|| Error::InvalidArgument("no grids".into()))?;
    let extent = first.extent;
    if weighted.iter().any(|g| g.extent != extent) {
        return invalid("all weighted grids must share the same window");
    }
    let valid = support.valid_region(extent)?;
    let block_rows = valid.len();
    let mut matrix = Mat::<C64>::zeros(block_rows * weighted.len(), support.len());
    for (b, grid) in weighted.iter().enumerate() {
        let block = convolution_matrix(grid, support)?;
        let scale = if options.normalize_blocks {
            let n = block.norm_l2();
            if n > 0.0 {
                1.0 / n
            } else {
                1.0
            }
        } else {
            1.0
        };
        for c in 0..support.len() {
            for r in 0..block_rows {
                matrix[(b * block_rows + r, c)] = block[(r, c)] * scale;
            }
        }
    }
    Ok(AnnihilationSystem {
        matrix,
        support,
        window: Some(extent),
        kinds: Vec::new(),
        blocks_normalized: options.normalize_blocks,
    })
}

/// Weights `ksp` by each derivative in `kinds` and stacks the systems.
pub fn derivative_system(
    ksp: &KSpaceGrid,
    kinds: &[DerivativeKind],
    support: FilterSupport,
    options: SystemOptions,
) -> Result<AnnihilationSystem> {
    let weighted: Vec<KSpaceGrid> = kinds.iter().map(|&k| derivative_weight(ksp, k)).collect();
    let mut sys = build_system_with(&weighted, support, options)?;
    sys.kinds = kinds.to_vec();
    Ok(sys)
}

/// `|T c| / (|T|_F |c|)`; zero means exact annihilation.
pub fn annihilation_residual(sys: &AnnihilationSystem, c: &FilterCoefficients) -> Result<f64> {
    if c.support != sys.support {
        return invalid("filter support does not match the system");
    }
    let cn = c.norm();
    if cn == 0.0 {
        return invalid("zero coefficient vector");
    }
    let tn = sys.frobenius_norm();
    if tn == 0.0 {
        return Ok(0.0);
    }
    let tc = sys.apply(&c.coeffs);
    let r = tc.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    Ok(r / (tn * cn))
}

/// Coefficients of `mu^2`: the 2-D self-convolution on the doubled support.
pub fn square_coeffs(mu: &FilterCoefficients) -> FilterCoefficients {
    let s = mu.support;
    let out_support = FilterSupport::new(2 * s.k1, 2 * s.l1);
    let mut out = FilterCoefficients::zeros(out_support);
    for (ax, ay) in s.indices() {
        let a = mu.get(ax, ay);
        if a == C64::new(0.0, 0.0) {
            continue;
        }
        for (bx, by) in s.indices() {
            let i = out_support.index(ax + bx, ay + by);
            out.coeffs[i] += a * mu.get(bx, by);
        }
    }
    out
}
