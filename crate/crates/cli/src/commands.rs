use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use fri_sr::annihilation::SystemOptions;
use fri_sr::formats::{self, NoiseInfo};
use fri_sr::mask::{self, MaskMethod};
use fri_sr::recon::{self, SweepResult};
use fri_sr::{
    add_noise, estimate_pipeline, lambda_sweep, metrics, tv_recon, weights_from_image, weights_from_mask, wtv_recon, Extent,
    FilterSupport, KSpaceGrid, MaskParams, ReconConfig, WeightMap,
};

use crate::args::{AcquireArgs, CompareArgs, EvalArgs, MaskArgs, ReconArgs, Truth};
use crate::error::CliError;
use crate::manifest::{float_value, Recorder};
use crate::source;

/// Invocation-wide settings shared by every verb.
pub struct Context {
    pub command_line: Vec<String>,
    pub config: Value,
    pub seed: u64,
    pub manifest_dir: Option<PathBuf>,
}

impl Context {
    fn recorder(&self, verb: &str) -> Recorder {
        Recorder::new(verb, self.command_line.clone(), self.config.clone(), self.seed)
    }

    fn manifest_dir(&self, beside: &Path) -> PathBuf {
        self.manifest_dir.clone().unwrap_or_else(|| match beside.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        })
    }

    fn finish(&self, rec: Recorder, primary: &Path, suffix: &str) -> Result<(), CliError> {
        let name = primary.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
        let path = rec.finish(&self.manifest_dir(primary), &format!("{name}{suffix}"))?;
        log::info!("manifest: {}", path.display());
        Ok(())
    }
}

/// Noiseless inputs get a numerical-null threshold, noisy ones a loose one.
fn default_delta(explicit: Option<f64>, noisy: bool) -> (f64, &'static str) {
    match explicit {
        Some(d) => (d, "flag"),
        None if noisy => (0.1, "default for noisy data"),
        None => (1e-8, "default for noiseless data"),
    }
}

pub fn acquire(ctx: &Context, a: &AcquireArgs) -> Result<(), CliError> {
    let mut rec = ctx.recorder("acquire");
    rec.phase("acquire");
    let parsed = source::parse(&a.phantom)?;
    if let Some(f) = &parsed.file {
        rec.input(f)?;
    }
    let extent = Extent::new(a.kx, a.ky);
    let clean = parsed.source.kspace(extent);
    let (data, noise) = if a.snr_db.is_finite() {
        let noisy = add_noise(&clean, a.snr_db, ctx.seed)?;
        rec.metric("noise_sigma", noisy.sigma);
        rec.metric("realized_snr_db", float_value(noisy.realized_snr_db(&clean)));
        (noisy.data, Some(NoiseInfo { snr_db: a.snr_db, seed: ctx.seed }))
    } else {
        (clean, None)
    };
    formats::write_kspace(&a.out, &data, noise)?;
    log::info!("wrote {}x{} samples to {}", extent.width(), extent.height(), a.out.display());
    rec.output(&a.out)?;
    rec.metric("window", json!([extent.width(), extent.height()]));
    ctx.finish(rec, &a.out, "")
}

pub fn mask(ctx: &Context, a: &MaskArgs) -> Result<(), CliError> {
    let mut rec = ctx.recorder("mask");
    rec.phase("read");
    rec.input(&a.input)?;
    let (ksp, noise) = formats::read_kspace(&a.input)?;
    let (delta, delta_source) = default_delta(a.delta, noise.is_some());
    log::info!("delta = {delta} ({delta_source})");
    let support = FilterSupport::new(a.filter.0, a.filter.1);
    let params = MaskParams {
        delta,
        cadzow_rank: a.rank,
        cadzow_iters: a.cadzow_iters,
        expected_nullity: None,
        render: a.render,
        system: SystemOptions { normalize_blocks: a.normalize_blocks },
    };

    rec.phase("estimate");
    let est = estimate_pipeline(&ksp, a.method, support, &params)?;
    let sigma = match &est.basis {
        Some(b) => b.singular_values.clone(),
        None => mask::singular_values(&est.system)?,
    };

    rec.phase("write");
    formats::write_real_image(&a.out, &est.mask.image)?;
    rec.output(&a.out)?;
    if let Some(path) = &a.coeffs {
        match (&est.coefficients, &est.basis) {
            (Some(c), _) => {
                formats::write_filter(path, c)?;
                rec.output(path)?;
            }
            (None, Some(basis)) => {
                for p in formats::write_null_basis(path, basis)? {
                    rec.output(&p)?;
                }
            }
            (None, None) => {}
        }
    }
    let spectrum = a.spectrum.clone().unwrap_or_else(|| sibling(&a.out, ".sigma.csv"));
    formats::write_atomic(&spectrum, formats::spectrum_csv(&sigma).as_bytes())?;
    rec.output(&spectrum)?;

    rec.metric("method", a.method.to_string());
    rec.metric("delta", delta);
    rec.metric("delta_source", delta_source);
    rec.metric("filter", json!([support.k1, support.l1]));
    rec.metric("system_shape", json!([est.system.rows(), est.system.cols()]));
    rec.metric("residual", est.residual);
    rec.metric("non_unique", est.non_unique);
    if let Some(b) = &est.basis {
        rec.metric("nullity", b.dim());
        rec.metric("fallback", b.fallback);
        log::info!("null basis: P = {}{}", b.dim(), if b.fallback { " (fallback)" } else { "" });
    }
    if a.method == MaskMethod::Cadzow {
        rec.metric("cadzow_objective", est.cadzow_objective.clone());
    }
    log::info!("annihilation residual {:.3e}", est.residual);
    ctx.finish(rec, &a.out, "")
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{name}{suffix}"))
}

pub fn recon(ctx: &Context, a: &ReconArgs) -> Result<(), CliError> {
    let mut rec = ctx.recorder("recon");
    rec.phase("read");
    rec.input(&a.input)?;
    let (ksp, _) = formats::read_kspace(&a.input)?;
    let weights = match &a.mask {
        Some(path) => {
            rec.input(path)?;
            let img = formats::read_image(path)?.into_real()?;
            weights_from_image(&img, a.gamma, a.floor)?
        }
        None => WeightMap::ones(a.size.0, a.size.1),
    };
    let cfg = ReconConfig {
        lambda: a.lambda,
        max_iters: a.iters,
        tol: a.tol,
        tau: a.tau,
        grid: a.size,
        ..ReconConfig::new(a.lambda, a.size)
    };

    rec.phase("solve");
    let out = wtv_recon(&ksp, &weights, &cfg)?;
    log::info!("objective {:.6e} after {} iterations (converged: {})", out.objective, out.iters, out.converged);

    rec.phase("write");
    formats::write_complex_image(&a.out, &out.image)?;
    rec.output(&a.out)?;
    rec.metric("objective", out.objective);
    rec.metric("iters", out.iters);
    rec.metric("converged", out.converged);
    rec.metric("weighted", a.mask.is_some());
    ctx.finish(rec, &a.out, "")
}

/// `inf` or the SNR to 0.1 dB.
pub fn format_snr(snr: f64) -> String {
    if snr == f64::INFINITY {
        "inf".into()
    } else {
        format!("{snr:.1}")
    }
}

pub fn eval(ctx: &Context, a: &EvalArgs) -> Result<(), CliError> {
    let mut rec = ctx.recorder("eval");
    rec.input(&a.recon)?;
    rec.input(&a.reference)?;
    let x = formats::read_image(&a.recon)?;
    let x0 = formats::read_image(&a.reference)?;
    if x.size() != x0.size() {
        return Err(CliError::Usage(format!(
            "grids differ: {:?} versus reference {:?}",
            x.size(),
            x0.size()
        )));
    }
    let snr = metrics::snr(&x.to_complex().data, &x0.to_complex().data)?;
    let text = format_snr(snr);
    println!("{text}");
    if let Some(csv) = &a.csv {
        let fresh = !csv.exists();
        let mut f = OpenOptions::new().create(true).append(true).open(csv)?;
        if fresh {
            writeln!(f, "recon,reference,snr_db")?;
        }
        writeln!(f, "{},{},{}", a.recon.display(), a.reference.display(), text)?;
        rec.output(csv)?;
    }
    rec.metric("snr_db", float_value(snr));
    ctx.finish(rec, &a.recon, ".eval")
}

pub fn compare(ctx: &Context, a: &CompareArgs) -> Result<(), CliError> {
    let mut rec = ctx.recorder("compare");
    std::fs::create_dir_all(&a.out_dir)?;
    let dir = &a.out_dir;

    rec.phase("acquire");
    let parsed = source::parse(&a.phantom)?;
    if let Some(f) = &parsed.file {
        rec.input(f)?;
    }
    let extent = Extent::new(a.kx, a.ky);
    let clean = parsed.source.kspace(extent);
    let (data, noise): (KSpaceGrid, _) = if a.snr_db.is_finite() {
        (add_noise(&clean, a.snr_db, ctx.seed)?.data, Some(NoiseInfo { snr_db: a.snr_db, seed: ctx.seed }))
    } else {
        (clean, None)
    };
    let data_path = dir.join("data.ksp");
    formats::write_kspace(&data_path, &data, noise)?;
    let truth_path = dir.join("truth.img");
    let truth = match a.truth {
        Truth::Raster => {
            let img = parsed.source.raster(a.size, a.supersample)?;
            formats::write_real_image(&truth_path, &img)?;
            img.to_complex()
        }
        Truth::FullTv => {
            let full = Extent::new((a.size.0 - 1) / 2, (a.size.1 - 1) / 2);
            let cfg = ReconConfig { max_iters: a.iters, tol: a.tol, ..ReconConfig::new(a.truth_lambda, a.size) };
            let img = tv_recon(&parsed.source.kspace(full), &cfg)?.image;
            formats::write_complex_image(&truth_path, &img)?;
            img
        }
    };

    rec.phase("mask");
    let support = match a.filter {
        Some((k1, l1)) => FilterSupport::new(k1, l1),
        None => FilterSupport::default_for(extent),
    };
    let (delta, delta_source) = default_delta(a.delta, noise.is_some());
    log::info!("mask: {} with {}x{} filter, delta = {delta} ({delta_source})", a.method, support.k1, support.l1);
    let params = MaskParams { delta, render: a.size, ..MaskParams::default() };
    let est = estimate_pipeline(&data, a.method, support, &params)?;
    let mask_path = dir.join("mask.img");
    formats::write_real_image(&mask_path, &est.mask.image)?;
    let weights = weights_from_mask(&est.mask, a.gamma, a.floor)?;

    rec.phase("sweep");
    let lambdas = match &a.lambdas {
        Some(l) if !l.is_empty() => l.clone(),
        Some(_) => return Err(CliError::Usage("empty lambda list".into())),
        None => recon::log_space(a.lambda_range.0, a.lambda_range.1, a.lambda_range.2),
    };
    let cfg = ReconConfig { max_iters: a.iters, tol: a.tol, ..ReconConfig::new(1.0, a.size) };
    let ones = WeightMap::ones(a.size.0, a.size.1);
    let tv = lambda_sweep(&data, &ones, &cfg, &lambdas, &truth)?;
    let wtv = lambda_sweep(&data, &weights, &cfg, &lambdas, &truth)?;

    rec.phase("write");
    let mut written = vec![data_path, truth_path, mask_path];
    for (name, sweep, w) in [("tv", &tv, &ones), ("wtv", &wtv, &weights)] {
        let csv = dir.join(format!("{name}.csv"));
        formats::write_atomic(&csv, formats::sweep_csv(&sweep.rows).as_bytes())?;
        let best = ReconConfig { lambda: sweep.best_row().lambda, ..cfg.clone() };
        let img = dir.join(format!("{name}.img"));
        formats::write_complex_image(&img, &wtv_recon(&data, w, &best)?.image)?;
        written.extend([csv, img]);
    }
    let summary = json!({
        "tv": summary_row(&tv),
        "wtv": summary_row(&wtv),
        "gap_db": float_value(wtv.best_row().snr_db - tv.best_row().snr_db),
    });
    let summary_path = dir.join("summary.json");
    formats::write_atomic(&summary_path, serde_json::to_string_pretty(&summary).unwrap_or_default().as_bytes())?;
    written.push(summary_path);
    for p in &written {
        rec.output(p)?;
    }
    for (name, sweep) in [("tv", &tv), ("wtv", &wtv)] {
        let r = sweep.best_row();
        println!("{name} best lambda={:.3e} snr_db={:.2}", r.lambda, r.snr_db);
    }
    println!("gap_db={:.2}", wtv.best_row().snr_db - tv.best_row().snr_db);

    rec.metric("summary", summary);
    rec.metric("filter", json!([support.k1, support.l1]));
    rec.metric("delta", delta);
    if let Some(b) = &est.basis {
        rec.metric("nullity", b.dim());
    }
    ctx.finish(rec, &dir.join("compare"), "")
}

fn summary_row(s: &SweepResult) -> Value {
    let r = s.best_row();
    json!({ "lambda": r.lambda, "snr_db": float_value(r.snr_db), "objective": r.objective, "iters": r.iters })
}
