//! Super-resolution of piecewise-constant images from low-frequency Fourier
//! samples.
//!
//! The pipeline has two stages. An edge mask is estimated from the samples
//! by finding filters whose convolution annihilates the derivative spectra
//! ([`annihilation`], [`mask`]); the mask is a trigonometric polynomial and
//! can be rendered at any resolution. The rendered mask then weights a total
//! variation penalty in the image reconstruction ([`recon`]).
//!
//! [`phantom`] provides analytic test objects with exact (or convergent)
//! Fourier samples, and [`formats`] the binary and CSV file layouts used
//! by the command-line tool.

pub mod annihilation;
pub mod bessel;
pub mod error;
pub mod fft;
pub mod formats;
pub mod image;
pub mod kspace;
mod linalg;
pub mod mask;
pub mod metrics;
pub mod phantom;
pub mod recon;

pub use num_complex::Complex64 as C64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use annihilation::{
    annihilation_residual, build_system, derivative_weight, square_coeffs, AnnihilationSystem,
    DerivativeKind, FilterCoefficients, FilterSupport,
};
pub use error::{Error, Result};
pub use image::Image;
pub use kspace::{Extent, KSpaceGrid};

pub use phantom::{
    add_noise, ellipse_kspace, rasterize, rasterize_fn, shepp_logan_spec, trig_region_kspace, BoxPhantom,
    Ellipse, PhantomSpec, TrigRegionPhantom,
};

pub use mask::{
    cadzow_denoise, estimate_ls, estimate_pipeline, null_basis, render_mask, render_single_mask,
    EdgeMask, MaskMethod, MaskParams, NullBasis,
};
pub use metrics::snr;
pub use recon::{
    forward_op, lambda_sweep, tv_recon, weights_from_image, weights_from_mask, wtv_recon, ReconConfig, WeightMap,
};
