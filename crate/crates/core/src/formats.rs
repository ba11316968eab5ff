//! Binary file layouts: a four-byte ASCII magic, a one-line JSON header
//! terminated by `\n`, then little-endian `f64` payload (complex values
//! interleaved re, im). Row-major with the x / kx index fastest.
//!
//! | magic  | header                                   | payload       |
//! |--------|------------------------------------------|---------------|
//! | `KSP1` | `{"kx":[-Kx,Kx],"ky":[-Ky,Ky],"dtype":"c128"}` | k-space |
//! | `FLT1` | `{"k1":..,"l1":..}`                      | coefficients  |
//! | `IMG1` | `{"nx":..,"ny":..,"dtype":"f64"}` or `"c128"` | image    |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::annihilation::{FilterCoefficients, FilterSupport};
use crate::error::{Error, Result};
use crate::image::{ComplexImage, Image, RealImage};
use crate::kspace::{Extent, KSpaceGrid};
use crate::mask::NullBasis;
use crate::recon::SweepRow;
use crate::C64;

pub const KSP_MAGIC: &[u8; 4] = b"KSP1";
pub const FLT_MAGIC: &[u8; 4] = b"FLT1";
pub const IMG_MAGIC: &[u8; 4] = b"IMG1";

/// Optional acquisition details stored in the KSP1 header.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseInfo {
    pub snr_db: f64,
    pub seed: u64,
}

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn encode(magic: &[u8; 4], header: &Value, payload: impl Iterator<Item = f64>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(magic);
    out.extend_from_slice(header.to_string().as_bytes());
    out.push(b'\n');
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode<'a>(bytes: &'a [u8], magic: &[u8; 4]) -> Result<(Value, &'a [u8])> {
    if bytes.len() < 5 || &bytes[..4] != magic {
        return Err(fmt_err(format!("missing {} magic", String::from_utf8_lossy(magic))));
    }
    let rest = &bytes[4..];
    let nl = rest.iter().position(|&b| b == b'\n').ok_or_else(|| fmt_err("header not terminated"))?;
    let header_text = std::str::from_utf8(&rest[..nl]).map_err(|_| fmt_err("header is not UTF-8"))?;
    let header: Value = serde_json::from_str(header_text).map_err(|e| fmt_err(format!("header: {e}")))?;
    Ok((header, &rest[nl + 1..]))
}

fn floats(payload: &[u8], count: usize) -> Result<Vec<f64>> {
    if payload.len() != 8 * count {
        return Err(fmt_err(format!("expected {} payload bytes, found {}", 8 * count, payload.len())));
    }
    Ok(payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn complexes(payload: &[u8], count: usize) -> Result<Vec<C64>> {
    let f = floats(payload, 2 * count)?;
    Ok(f.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect())
}

fn interleave(values: &[C64]) -> impl Iterator<Item = f64> + '_ {
    values.iter().flat_map(|v| [v.re, v.im])
}

fn get_usize(h: &Value, key: &str) -> Result<usize> {
    h.get(key).and_then(Value::as_u64).map(|v| v as usize).ok_or_else(|| fmt_err(format!("header lacks '{key}'")))
}

fn symmetric_range(h: &Value, key: &str) -> Result<usize> {
    let arr = h.get(key).and_then(Value::as_array).ok_or_else(|| fmt_err(format!("header lacks '{key}'")))?;
    match arr.as_slice() {
        [lo, hi] => {
            let (lo, hi) = (lo.as_i64(), hi.as_i64());
            match (lo, hi) {
                (Some(lo), Some(hi)) if hi >= 0 && lo == -hi => Ok(hi as usize),
                _ => Err(fmt_err(format!("'{key}' must be a symmetric integer range"))),
            }
        }
        _ => Err(fmt_err(format!("'{key}' must have two entries"))),
    }
}

pub fn encode_kspace(k: &KSpaceGrid, noise: Option<NoiseInfo>) -> Vec<u8> {
    let (kx, ky) = (k.extent.kx as i64, k.extent.ky as i64);
    let mut header = serde_json::json!({ "kx": [-kx, kx], "ky": [-ky, ky], "dtype": "c128" });
    if let Some(n) = noise {
        header["noise"] = serde_json::to_value(n).expect("plain struct");
    }
    encode(KSP_MAGIC, &header, interleave(&k.values))
}

pub fn decode_kspace(bytes: &[u8]) -> Result<(KSpaceGrid, Option<NoiseInfo>)> {
    let (h, payload) = decode(bytes, KSP_MAGIC)?;
    if h.get("dtype").and_then(Value::as_str) != Some("c128") {
        return Err(fmt_err("KSP1 dtype must be c128"));
    }
    let extent = Extent::new(symmetric_range(&h, "kx")?, symmetric_range(&h, "ky")?);
    let values = complexes(payload, extent.len())?;
    let noise = match h.get("noise") {
        None | Some(Value::Null) => None,
        Some(v) => Some(serde_json::from_value(v.clone()).map_err(|e| fmt_err(format!("noise: {e}")))?),
    };
    Ok((KSpaceGrid::new(extent, values)?, noise))
}

pub fn encode_filter(c: &FilterCoefficients) -> Vec<u8> {
    let header = serde_json::json!({ "k1": c.support.k1, "l1": c.support.l1 });
    encode(FLT_MAGIC, &header, interleave(&c.coeffs))
}

pub fn decode_filter(bytes: &[u8]) -> Result<FilterCoefficients> {
    let (h, payload) = decode(bytes, FLT_MAGIC)?;
    let support = FilterSupport::new(get_usize(&h, "k1")?, get_usize(&h, "l1")?);
    FilterCoefficients::new(support, complexes(payload, support.len())?)
}

/// Real or complex image, as stored in IMG1 files.
#[derive(Debug, Clone, PartialEq)]
pub enum StoredImage {
    Real(RealImage),
    Complex(ComplexImage),
}

impl StoredImage {
    pub fn size(&self) -> (usize, usize) {
        match self {
            StoredImage::Real(i) => (i.nx, i.ny),
            StoredImage::Complex(i) => (i.nx, i.ny),
        }
    }

    pub fn to_complex(&self) -> ComplexImage {
        match self {
            StoredImage::Real(i) => i.to_complex(),
            StoredImage::Complex(i) => i.clone(),
        }
    }

    /// Real pixels; complex images must have zero imaginary part.
    pub fn into_real(self) -> Result<RealImage> {
        match self {
            StoredImage::Real(i) => Ok(i),
            StoredImage::Complex(i) => {
                if i.data.iter().any(|v| v.im != 0.0) {
                    return Err(fmt_err("expected a real image"));
                }
                Ok(Image { nx: i.nx, ny: i.ny, data: i.data.iter().map(|v| v.re).collect() })
            }
        }
    }
}

pub fn encode_real_image(img: &RealImage) -> Vec<u8> {
    let header = serde_json::json!({ "nx": img.nx, "ny": img.ny, "dtype": "f64" });
    encode(IMG_MAGIC, &header, img.data.iter().copied())
}

pub fn encode_complex_image(img: &ComplexImage) -> Vec<u8> {
    let header = serde_json::json!({ "nx": img.nx, "ny": img.ny, "dtype": "c128" });
    encode(IMG_MAGIC, &header, interleave(&img.data))
}

pub fn decode_image(bytes: &[u8]) -> Result<StoredImage> {
    let (h, payload) = decode(bytes, IMG_MAGIC)?;
    let (nx, ny) = (get_usize(&h, "nx")?, get_usize(&h, "ny")?);
    match h.get("dtype").and_then(Value::as_str) {
        Some("f64") => Ok(StoredImage::Real(Image::new(nx, ny, floats(payload, nx * ny)?)?)),
        Some("c128") => Ok(StoredImage::Complex(Image::new(nx, ny, complexes(payload, nx * ny)?)?)),
        _ => Err(fmt_err("IMG1 dtype must be f64 or c128")),
    }
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let name = path.file_name().ok_or_else(|| Error::InvalidArgument(format!("bad path {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_kspace(path: &Path, k: &KSpaceGrid, noise: Option<NoiseInfo>) -> Result<()> {
    write_atomic(path, &encode_kspace(k, noise))
}

pub fn read_kspace(path: &Path) -> Result<(KSpaceGrid, Option<NoiseInfo>)> {
    decode_kspace(&fs::read(path)?)
}

pub fn write_filter(path: &Path, c: &FilterCoefficients) -> Result<()> {
    write_atomic(path, &encode_filter(c))
}

pub fn read_filter(path: &Path) -> Result<FilterCoefficients> {
    decode_filter(&fs::read(path)?)
}

pub fn write_real_image(path: &Path, img: &RealImage) -> Result<()> {
    write_atomic(path, &encode_real_image(img))
}

pub fn write_complex_image(path: &Path, img: &ComplexImage) -> Result<()> {
    write_atomic(path, &encode_complex_image(img))
}

pub fn read_image(path: &Path) -> Result<StoredImage> {
    decode_image(&fs::read(path)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct BasisIndex {
    delta: f64,
    fallback: bool,
    singular_values: Vec<f64>,
    vectors: Vec<String>,
}

/// Stores a null basis as `vNNNN.flt` records plus `index.json` in `dir`.
/// Returns every file written.
pub fn write_null_basis(dir: &Path, basis: &NullBasis) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut names = Vec::new();
    for (i, v) in basis.vectors.iter().enumerate() {
        let name = format!("v{i:04}.flt");
        let path = dir.join(&name);
        write_filter(&path, v)?;
        written.push(path);
        names.push(name);
    }
    let index = BasisIndex {
        delta: basis.delta,
        fallback: basis.fallback,
        singular_values: basis.singular_values.clone(),
        vectors: names,
    };
    let path = dir.join("index.json");
    write_atomic(&path, serde_json::to_string_pretty(&index).expect("plain struct").as_bytes())?;
    written.push(path);
    Ok(written)
}

pub fn read_null_basis(dir: &Path) -> Result<NullBasis> {
    let text = fs::read_to_string(dir.join("index.json"))?;
    let index: BasisIndex = serde_json::from_str(&text).map_err(|e| fmt_err(format!("basis index: {e}")))?;
    let vectors = index.vectors.iter().map(|n| read_filter(&dir.join(n))).collect::<Result<Vec<_>>>()?;
    if vectors.is_empty() {
        return Err(fmt_err("basis index lists no vectors"));
    }
    Ok(NullBasis { vectors, singular_values: index.singular_values, delta: index.delta, fallback: index.fallback })
}

pub const SWEEP_HEADER: &str = "lambda,snr_db,objective,iters";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{:e},{},{:e},{}\n", r.lambda, r.snr_db, r.objective, r.iters));
    }
    s
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(SWEEP_HEADER) {
        return Err(fmt_err("sweep csv header mismatch"));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                return Err(fmt_err(format!("bad sweep row '{l}'")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| fmt_err(format!("bad number '{s}'")));
            Ok(SweepRow {
                lambda: num(f[0])?,
                snr_db: num(f[1])?,
                objective: num(f[2])?,
                iters: f[3].parse().map_err(|_| fmt_err(format!("bad count '{}'", f[3])))?,
            })
        })
        .collect()
}

/// `index,sigma` rows.
pub fn spectrum_csv(sigma: &[f64]) -> String {
    let mut s = String::from("index,sigma\n");
    for (i, v) in sigma.iter().enumerate() {
        s.push_str(&format!("{i},{v:e}\n"));
    }
    s
}
