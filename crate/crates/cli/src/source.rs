use std::fs;
use std::path::PathBuf;

use fri_sr::{rasterize, rasterize_fn, ellipse_kspace, shepp_logan_spec, BoxPhantom, Extent, KSpaceGrid, PhantomSpec};
use fri_sr::image::RealImage;

use crate::error::CliError;

/// Phantom selected on the command line.
pub enum Source {
    Ellipses(PhantomSpec),
    Box(BoxPhantom),
}

pub struct Parsed {
    pub source: Source,
    /// JSON file the phantom was read from.
    pub file: Option<PathBuf>,
}

pub fn parse(text: &str) -> Result<Parsed, CliError> {
    if text == "shepp-logan" {
        return Ok(Parsed { source: Source::Ellipses(shepp_logan_spec()), file: None });
    }
    if let Some(rest) = text.strip_prefix("rect:") {
        let v = rest
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| CliError::Usage(format!("bad rect phantom '{text}'")))?;
        let amplitude = match v.len() {
            4 => 1.0,
            5 => v[4],
            _ => return Err(CliError::Usage("rect phantom needs x0,x1,y0,y1[,amplitude]".into())),
        };
        let b = BoxPhantom::new((v[0], v[1]), (v[2], v[3]), amplitude)?;
        return Ok(Parsed { source: Source::Box(b), file: None });
    }
    let path = PathBuf::from(text);
    let json = fs::read_to_string(&path).map_err(|e| CliError::Io(format!("phantom {text}: {e}")))?;
    let spec = PhantomSpec::from_json(&json)?;
    Ok(Parsed { source: Source::Ellipses(spec), file: Some(path) })
}

impl Source {
    pub fn kspace(&self, extent: Extent) -> KSpaceGrid {
        match self {
            Source::Ellipses(spec) => ellipse_kspace(spec, extent),
            Source::Box(b) => b.kspace(extent),
        }
    }

    pub fn raster(&self, size: (usize, usize), supersample: usize) -> Result<RealImage, CliError> {
        Ok(match self {
            Source::Ellipses(spec) => rasterize(spec, size, supersample)?,
            Source::Box(b) => rasterize_fn(size, supersample, |x, y| b.value_at(x, y))?,
        })
    }
}
