use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fri_sr::mask::MaskMethod;

/// Edge-mask estimation and weighted-TV reconstruction from low-frequency
/// Fourier samples.
#[derive(Debug, Parser, Serialize)]
#[command(name = "fri-sr", version, args_override_self = true)]
pub struct Cli {
    /// Seed for noise generation; recorded in every manifest.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Directory for run manifests (default: next to the primary output).
    #[arg(long, global = true)]
    pub manifest_dir: Option<PathBuf>,

    /// Only log errors.
    #[arg(long, global = true)]
    pub quiet: bool,

    /// JSON file with default flag values; command-line flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Sample a phantom's Fourier coefficients on a centered window.
    Acquire(AcquireArgs),
    /// Estimate an edge mask from k-space samples.
    Mask(MaskArgs),
    /// Weighted-TV (or plain TV) reconstruction.
    Recon(ReconArgs),
    /// SNR of a reconstruction against a reference image.
    Eval(EvalArgs),
    /// TV versus weighted-TV over a lambda sweep.
    Compare(CompareArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct AcquireArgs {
    /// `shepp-logan`, `rect:x0,x1,y0,y1[,amplitude]`, or a JSON ellipse file.
    #[arg(long)]
    pub phantom: String,
    /// Window half-width in kx.
    #[arg(long)]
    pub kx: usize,
    /// Window half-width in ky.
    #[arg(long)]
    pub ky: usize,
    /// Measurement SNR in dB; `inf` for noiseless.
    #[arg(long, value_parser = parse_snr, default_value = "inf")]
    pub snr_db: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct MaskArgs {
    /// KSP1 input.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_method, default_value = "nullavg")]
    #[serde(serialize_with = "display")]
    pub method: MaskMethod,
    /// Filter half-widths `K1xL1`.
    #[arg(long, value_parser = parse_pair)]
    pub filter: (usize, usize),
    /// Null-space threshold relative to the largest singular value
    /// (default: 1e-8 for noiseless input, 0.1 otherwise).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Cadzow target rank (default: filter size minus one).
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub cadzow_iters: usize,
    /// Rendered mask size `NXxNY`.
    #[arg(long, value_parser = parse_pair, default_value = "256x256")]
    pub render: (usize, usize),
    /// Scale each derivative block of the system to unit Frobenius norm.
    #[arg(long)]
    pub normalize_blocks: bool,
    /// Rendered mask (IMG1).
    #[arg(long)]
    pub out: PathBuf,
    /// Filter coefficients: a FLT1 file for ls/cadzow, a directory of FLT1
    /// records for nullavg.
    #[arg(long)]
    pub coeffs: Option<PathBuf>,
    /// Singular-value spectrum CSV (default: `<out>.sigma.csv`).
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReconArgs {
    /// KSP1 input.
    #[arg(long)]
    pub input: PathBuf,
    /// Edge mask (IMG1); omitted means standard TV.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    /// Primal step size.
    #[arg(long, default_value_t = 0.35)]
    pub tau: f64,
    /// Reconstruction grid `NXxNY`.
    #[arg(long, value_parser = parse_pair, default_value = "256x256")]
    pub size: (usize, usize),
    /// Weight exponent applied to the mask.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Lower bound on the weights.
    #[arg(long, default_value_t = 0.0)]
    pub floor: f64,
    /// Complex reconstruction (IMG1 with c128 payload).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Reconstruction (IMG1, real or complex).
    #[arg(long)]
    pub recon: PathBuf,
    /// Reference image (IMG1).
    #[arg(long)]
    pub reference: PathBuf,
    /// Append `recon,reference,snr_db` to this CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long, default_value = "shepp-logan")]
    pub phantom: String,
    #[arg(long, default_value_t = 32)]
    pub kx: usize,
    #[arg(long, default_value_t = 24)]
    pub ky: usize,
    #[arg(long, value_parser = parse_snr, default_value = "inf")]
    pub snr_db: f64,
    #[arg(long, value_parser = parse_method, default_value = "nullavg")]
    #[serde(serialize_with = "display")]
    pub method: MaskMethod,
    /// Filter half-widths `K1xL1` (default: half the window).
    #[arg(long, value_parser = parse_pair)]
    pub filter: Option<(usize, usize)>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Comma-separated lambda values; overrides `--lambda-range`.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Log-spaced sweep `LO:HI:COUNT`.
    #[arg(long, value_parser = parse_range, default_value = "1e-5:1:11")]
    pub lambda_range: (f64, f64, usize),
    #[arg(long, value_parser = parse_pair, default_value = "256x256")]
    pub size: (usize, usize),
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub floor: f64,
    /// Reference image used for scoring.
    #[arg(long, value_enum, default_value = "raster")]
    pub truth: Truth,
    /// Sub-pixel samples per axis for the reference rasterization.
    #[arg(long, default_value_t = 4)]
    pub supersample: usize,
    /// Regularization of the fully sampled TV reference.
    #[arg(long, default_value_t = 1e-4)]
    pub truth_lambda: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truth {
    /// Supersampled rasterization of the phantom.
    Raster,
    /// TV reconstruction from every frequency the grid resolves.
    FullTv,
}

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn parse_method(s: &str) -> Result<MaskMethod, String> {
    s.parse().map_err(|e: fri_sr::Error| e.to_string())
}

pub fn parse_snr(s: &str) -> Result<f64, String> {
    let v = match s {
        "inf" | "+inf" | "Inf" => f64::INFINITY,
        _ => s.parse::<f64>().map_err(|_| format!("'{s}' is not a number or 'inf'"))?,
    };
    if v.is_nan() || v == f64::NEG_INFINITY {
        return Err("snr must be finite or inf".into());
    }
    Ok(v)
}

pub fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected AxB, got '{s}'"))?;
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("'{t}' is not a nonnegative integer"));
    Ok((num(a)?, num(b)?))
}

pub fn parse_range(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(format!("expected LO:HI:COUNT, got '{s}'"));
    };
    let lo: f64 = lo.parse().map_err(|_| format!("bad lower bound '{lo}'"))?;
    let hi: f64 = hi.parse().map_err(|_| format!("bad upper bound '{hi}'"))?;
    let n: usize = n.parse().map_err(|_| format!("bad count '{n}'"))?;
    if !(lo > 0.0 && hi >= lo && n >= 1) {
        return Err("range needs 0 < LO <= HI and COUNT >= 1".into());
    }
    Ok((lo, hi, n))
}
