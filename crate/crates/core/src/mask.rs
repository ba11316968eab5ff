//! Edge-mask estimation from annihilation systems.
//!
//! Three estimators share the same system: a constrained least-squares
//! filter (`c[0,0] = 1`), the same after Cadzow denoising of the
//! derivative data, and a sum-of-squares average over the approximate null
//! space. Masks are trigonometric polynomials; rendering evaluates them at
//! the pixel centers of any requested grid and normalizes to unit maximum.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::annihilation::{
    annihilation_residual, build_system_with, convolution_matrix, derivative_weight,
    AnnihilationSystem, DerivativeKind, FilterCoefficients, FilterSupport, SystemOptions,
};
use crate::error::{invalid, Error, Result};
use crate::image::{pixel_center, RealImage};
use crate::kspace::KSpaceGrid;
use crate::linalg;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskMethod {
    Ls,
    Cadzow,
    NullAvg,
}

impl FromStr for MaskMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ls" => Ok(MaskMethod::Ls),
            "cadzow" => Ok(MaskMethod::Cadzow),
            "nullavg" => Ok(MaskMethod::NullAvg),
            other => invalid(format!("unknown mask method '{other}'")),
        }
    }
}

impl fmt::Display for MaskMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskMethod::Ls => "ls",
            MaskMethod::Cadzow => "cadzow",
            MaskMethod::NullAvg => "nullavg",
        })
    }
}

/// Right singular vectors of an annihilation system with small singular
/// values.
#[derive(Debug, Clone)]
pub struct NullBasis {
    pub vectors: Vec<FilterCoefficients>,
    /// Full spectrum, descending.
    pub singular_values: Vec<f64>,
    pub delta: f64,
    /// No singular value met the threshold; `vectors` holds the single
    /// smallest one.
    pub fallback: bool,
}

impl NullBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn support(&self) -> FilterSupport {
        self.vectors[0].support
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskProvenance {
    pub method: String,
    pub delta: Option<f64>,
    pub support: FilterSupport,
    pub vectors: usize,
}

/// Nonnegative mask with unit maximum; small along predicted edges.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMask {
    pub image: RealImage,
    pub provenance: MaskProvenance,
}

#[derive(Debug, Clone)]
pub struct LsSolution {
    pub coeffs: FilterCoefficients,
    /// The reduced system was rank-deficient; `coeffs` is the minimum-norm
    /// solution.
    pub non_unique: bool,
}

/// `min |T c|` subject to `c[0,0] = 1`.
pub fn estimate_ls(sys: &AnnihilationSystem) -> Result<LsSolution> {
    let support = sys.support;
    let n = support.len();
    if n < 2 {
        return invalid("least squares needs a support with at least two coefficients");
    }
    if sys.rows() + 1 < n {
        return invalid(format!("system has {} rows, needs at least {}", sys.rows(), n - 1));
    }
    let dc = support.index(0, 0);
    let others: Vec<usize> = (0..n).filter(|&j| j != dc).collect();
    let reduced = Mat::from_fn(sys.rows(), n - 1, |i, j| sys.matrix[(i, others[j])]);
    let rhs: Vec<C64> = (0..sys.rows()).map(|i| -sys.matrix[(i, dc)]).collect();
    let (x, rank) = linalg::min_norm_solve(&reduced, &rhs)?;
    let mut coeffs = vec![C64::new(0.0, 0.0); n];
    coeffs[dc] = C64::new(1.0, 0.0);
    for (j, v) in others.iter().zip(x) {
        coeffs[*j] = v;
    }
    let non_unique = rank < n - 1;
    if non_unique {
        log::warn!("least-squares filter is not unique (rank {rank} of {})", n - 1);
    }
    Ok(LsSolution { coeffs: FilterCoefficients::new(support, coeffs)?, non_unique })
}

#[derive(Debug, Clone)]
pub struct CadzowOutput {
    pub grids: Vec<KSpaceGrid>,
    /// `sqrt(sum_i |T_i - trunc(T_i)|_F^2)` for the input and after every
    /// round.
    pub objective: Vec<f64>,
}

/// Alternating projection between rank-`rank` matrices and valid-convolution
/// structure, applied to each grid's block separately.
pub fn cadzow_denoise(
    grids: &[KSpaceGrid],
    support: FilterSupport,
    rank: usize,
    iters: usize,
) -> Result<CadzowOutput> {
    if rank >= support.len() {
        return invalid(format!("cadzow rank {rank} must be below the support size {}", support.len()));
    }
    if iters == 0 {
        return invalid("cadzow needs at least one iteration");
    }
    if grids.is_empty() {
        return invalid("no grids to denoise");
    }
    let mut current: Vec<KSpaceGrid> = grids.to_vec();
    let mut objective = Vec::with_capacity(iters + 1);
    for round in 0..=iters {
        let mut tail_sq = 0.0;
        let mut next = Vec::with_capacity(current.len());
        for grid in &current {
            let t = convolution_matrix(grid, support)?;
            if round == iters {
                tail_sq += linalg::rank_tail(&t, rank)?.powi(2);
                continue;
            }
            let (low, tail) = linalg::truncate(&t, rank)?;
            tail_sq += tail * tail;
            next.push(average_to_grid(&low, grid, support));
        }
        objective.push(tail_sq.sqrt());
        if round < iters {
            current = next;
        }
    }
    Ok(CadzowOutput { grids: current, objective })
}

/// Orthogonal projection onto convolution structure: each sample becomes
/// the mean of the matrix entries that hold it.
fn average_to_grid(m: &Mat<C64>, template: &KSpaceGrid, support: FilterSupport) -> KSpaceGrid {
    let extent = template.extent;
    let valid = support.valid_region(extent).expect("validated by caller");
    let mut sum = vec![C64::new(0.0, 0.0); extent.len()];
    let mut count = vec![0usize; extent.len()];
    for (r, (sx, sy)) in valid.freqs().enumerate() {
        for (c, (mx, my)) in support.indices().enumerate() {
            let idx = extent.index(sx - mx, sy - my);
            sum[idx] += m[(r, c)];
            count[idx] += 1;
        }
    }
    let values = sum
        .into_iter()
        .zip(count)
        .zip(&template.values)
        .map(|((s, n), orig)| if n == 0 { *orig } else { s / n as f64 })
        .collect();
    KSpaceGrid { extent, values }
}

/// Singular values of the system, descending, length `|support|`.
pub fn singular_values(sys: &AnnihilationSystem) -> Result<Vec<f64>> {
    Ok(linalg::right_singular(&sys.matrix)?.0)
}

/// Right singular vectors with `sigma <= delta * sigma_1`.
pub fn null_basis(sys: &AnnihilationSystem, delta: f64) -> Result<NullBasis> {
    if !(delta > 0.0 && delta <= 1.0) {
        return invalid(format!("delta must lie in (0, 1], got {delta}"));
    }
    if sys.rows() == 0 || sys.cols() == 0 {
        return invalid("empty annihilation system");
    }
    let (sigma, v) = linalg::right_singular(&sys.matrix)?;
    let (picked, fallback) = select_null_indices(&sigma, delta);
    if fallback {
        log::warn!("no singular value below {delta} * sigma_1; using the smallest one");
    }
    let vectors = picked
        .iter()
        .map(|&k| {
            let coeffs = (0..v.nrows()).map(|j| v[(j, k)]).collect();
            FilterCoefficients::new(sys.support, coeffs)
        })
        .collect::<Result<Vec<_>>>()?;
    log::info!("null basis: {} vectors at delta = {delta}", vectors.len());
    Ok(NullBasis { vectors, singular_values: sigma, delta, fallback })
}

/// Indices with `sigma_i <= delta * sigma_1`, or the last one when none
/// qualify (second value `true`).
fn select_null_indices(sigma: &[f64], delta: f64) -> (Vec<usize>, bool) {
    let threshold = delta * sigma[0];
    let picked: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i] <= threshold).collect();
    if picked.is_empty() {
        (vec![sigma.len() - 1], true)
    } else {
        (picked, false)
    }
}

fn phase_matrix(n: usize, half: usize, rows_are_pixels: bool) -> Mat<C64> {
    let f = |pixel: usize, tap: usize| {
        let k = tap as f64 - half as f64;
        C64::from_polar(1.0, 2.0 * PI * k * pixel_center(pixel, n))
    };
    if rows_are_pixels {
        Mat::from_fn(n, 2 * half + 1, f)
    } else {
        Mat::from_fn(2 * half + 1, n, |t, p| f(p, t))
    }
}

/// `sum_i |mu_i|^2` at the pixel centers of an `nx x ny` grid.
fn sum_of_squares(vectors: &[FilterCoefficients], size: (usize, usize)) -> Vec<f64> {
    let (nx, ny) = size;
    let s = vectors[0].support;
    let ey = phase_matrix(ny, s.l1, true);
    let ex = phase_matrix(nx, s.k1, false);
    let mut acc = vec![0.0; nx * ny];
    for v in vectors {
        let c = Mat::from_fn(s.height(), s.width(), |r, col| v.coeffs[r * s.width() + col]);
        let mu = &ey * &c * &ex;
        for j in 0..ny {
            for i in 0..nx {
                acc[j * nx + i] += mu[(j, i)].norm_sqr();
            }
        }
    }
    acc
}

fn normalized(mut pixels: Vec<f64>, size: (usize, usize), provenance: MaskProvenance) -> Result<EdgeMask> {
    let peak = pixels.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) || !peak.is_finite() {
        return invalid("mask is identically zero");
    }
    pixels.iter_mut().for_each(|p| *p /= peak);
    Ok(EdgeMask { image: RealImage::new(size.0, size.1, pixels)?, provenance })
}

/// Sum-of-squares mask `sqrt(mean_i |mu_i(r)|^2)`, normalized to unit
/// maximum.
pub fn render_mask(basis: &NullBasis, size: (usize, usize)) -> Result<EdgeMask> {
    if basis.vectors.is_empty() {
        return invalid("empty null basis");
    }
    if size.0 == 0 || size.1 == 0 {
        return invalid("render size must be positive");
    }
    let p = basis.dim() as f64;
    let pixels = sum_of_squares(&basis.vectors, size).into_iter().map(|v| (v / p).sqrt()).collect();
    normalized(
        pixels,
        size,
        MaskProvenance {
            method: MaskMethod::NullAvg.to_string(),
            delta: Some(basis.delta),
            support: basis.support(),
            vectors: basis.dim(),
        },
    )
}

/// `|mu| / max |mu|` for a single filter.
pub fn render_single_mask(c: &FilterCoefficients, size: (usize, usize)) -> Result<EdgeMask> {
    if c.is_zero() {
        return invalid("zero filter coefficients");
    }
    let pixels = sum_of_squares(std::slice::from_ref(c), size).into_iter().map(f64::sqrt).collect();
    normalized(
        pixels,
        size,
        MaskProvenance { method: MaskMethod::Ls.to_string(), delta: None, support: c.support, vectors: 1 },
    )
}

#[derive(Debug, Clone)]
pub struct MaskParams {
    pub delta: f64,
    /// Cadzow target rank; defaults from `expected_nullity`.
    pub cadzow_rank: Option<usize>,
    pub cadzow_iters: usize,
    pub expected_nullity: Option<usize>,
    pub render: (usize, usize),
    pub system: SystemOptions,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self {
            delta: 0.1,
            cadzow_rank: None,
            cadzow_iters: 10,
            expected_nullity: None,
            render: (256, 256),
            system: SystemOptions::default(),
        }
    }
}

impl MaskParams {
    pub fn cadzow_rank_for(&self, support: FilterSupport) -> usize {
        self.cadzow_rank
            .unwrap_or_else(|| support.len().saturating_sub(self.expected_nullity.unwrap_or(1).max(1)))
    }
}

#[derive(Debug, Clone)]
pub struct MaskEstimate {
    pub mask: EdgeMask,
    pub system: AnnihilationSystem,
    /// Single filter for `ls` and `cadzow`.
    pub coefficients: Option<FilterCoefficients>,
    pub basis: Option<NullBasis>,
    /// Largest annihilation residual among the returned filters.
    pub residual: f64,
    pub non_unique: bool,
    pub cadzow_objective: Vec<f64>,
}

/// Weights by `dx` and `dy`, builds the stacked system and runs `method`.
pub fn estimate_pipeline(
    ksp: &KSpaceGrid,
    method: MaskMethod,
    support: FilterSupport,
    params: &MaskParams,
) -> Result<MaskEstimate> {
    let kinds = DerivativeKind::FIRST_ORDER;
    let mut weighted: Vec<KSpaceGrid> = kinds.iter().map(|&k| derivative_weight(ksp, k)).collect();
    let mut cadzow_objective = Vec::new();
    if method == MaskMethod::Cadzow {
        let rank = params.cadzow_rank_for(support);
        log::info!("cadzow: rank {rank}, {} rounds", params.cadzow_iters);
        let out = cadzow_denoise(&weighted, support, rank, params.cadzow_iters)?;
        weighted = out.grids;
        cadzow_objective = out.objective;
    }
    let mut system = build_system_with(&weighted, support, params.system)?;
    system.kinds = kinds.to_vec();
    match method {
        MaskMethod::Ls | MaskMethod::Cadzow => {
            let ls = estimate_ls(&system)?;
            let residual = annihilation_residual(&system, &ls.coeffs)?;
            let mut mask = render_single_mask(&ls.coeffs, params.render)?;
            mask.provenance.method = method.to_string();
            Ok(MaskEstimate {
                mask,
                coefficients: Some(ls.coeffs),
                basis: None,
                residual,
                non_unique: ls.non_unique,
                cadzow_objective,
                system,
            })
        }
        MaskMethod::NullAvg => {
            let basis = null_basis(&system, params.delta)?;
            let residual = basis
                .vectors
                .iter()
                .map(|v| annihilation_residual(&system, v))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            let mask = render_mask(&basis, params.render)?;
            Ok(MaskEstimate {
                mask,
                coefficients: None,
                basis: Some(basis),
                residual,
                non_unique: false,
                cadzow_objective,
                system,
            })
        }
    }
}
