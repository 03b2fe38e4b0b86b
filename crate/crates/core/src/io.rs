//! File formats: 16-bit grayscale PNG, PBM masks with a JSON sidecar, and
//! raw little-endian complex f64 with a JSON header.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Domain, ImageGrid, SampleMask};

/// Reads a grayscale PNG (any bit depth; color is converted to luma) as a
/// real image in [0, 1].
pub fn read_png(path: &Path) -> Result<ImageGrid> {
    let img = image::open(path)?.into_luma16();
    let (w, h) = img.dimensions();
    let values: Vec<f64> = img.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect();
    ImageGrid::from_real(h as usize, w as usize, &values)
}

/// Writes `values / scale`, clamped to [0, 1], as a 16-bit PNG.
pub fn write_png16(path: &Path, values: &[f64], rows: usize, cols: usize, scale: f64) -> Result<()> {
    if values.len() != rows * cols {
        return Err(Error::LengthMismatch {
            expected: rows * cols,
            actual: values.len(),
        });
    }
    if !(scale > 0.0) {
        return Err(Error::InvalidArgument(format!("display scale must be positive, got {scale}")));
    }
    let raw: Vec<u16> = values
        .iter()
        .map(|v| ((v / scale).clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(cols as u32, rows as u32, raw).expect("buffer size checked");
    buf.save(path)?;
    Ok(())
}

/// Magnitude image as a 16-bit PNG with values in [0, 1].
pub fn write_magnitude_png(path: &Path, img: &ImageGrid) -> Result<()> {
    write_png16(path, &img.magnitude(), img.rows(), img.cols(), 1.0)
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct MaskSidecar {
    rows: usize,
    cols: usize,
    count: usize,
    fsr: Option<(usize, usize)>,
    #[serde(default)]
    config: serde_json::Value,
}

/// Writes a plain PBM (`P1`, 1 = sampled) and a JSON sidecar with the
/// achieved count, the FSR and an echo of `config`.
pub fn write_mask(path: &Path, mask: &SampleMask, config: serde_json::Value) -> Result<()> {
    let (rows, cols) = mask.shape();
    let mut s = format!("P1\n{cols} {rows}\n");
    for r in 0..rows {
        let line: Vec<&str> = (0..cols)
            .map(|c| if mask.is_sampled(r, c) { "1" } else { "0" })
            .collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    fs::write(path, s)?;
    let side = MaskSidecar {
        rows,
        cols,
        count: mask.count(),
        fsr: mask.fsr(),
        config,
    };
    fs::write(sidecar(path), serde_json::to_string_pretty(&side)? + "\n")?;
    Ok(())
}

fn pbm_tokens(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace())
}

/// Reads a plain PBM mask; the FSR comes from the sidecar when present.
pub fn read_mask(path: &Path) -> Result<SampleMask> {
    let text = fs::read_to_string(path)?;
    let mut tok = pbm_tokens(&text);
    if tok.next() != Some("P1") {
        return Err(Error::Format(format!("{} is not a plain PBM (P1) file", path.display())));
    }
    let mut dim = || -> Result<usize> {
        tok.next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Format("bad PBM header".into()))
    };
    let (cols, rows) = (dim()?, dim()?);
    let mut flags = Vec::with_capacity(rows * cols);
    for t in pbm_tokens(&text).skip(3) {
        // plain PBM allows digits without separators
        for ch in t.chars() {
            match ch {
                '0' => flags.push(false),
                '1' => flags.push(true),
                _ => return Err(Error::Format(format!("bad PBM pixel '{ch}'"))),
            }
        }
    }
    if flags.len() != rows * cols {
        return Err(Error::Format(format!(
            "PBM holds {} pixels, header says {rows}x{cols}",
            flags.len()
        )));
    }
    let side = sidecar(path);
    let fsr = if side.exists() {
        let meta: MaskSidecar = serde_json::from_str(&fs::read_to_string(side)?)?;
        meta.fsr
    } else {
        None
    };
    SampleMask::new(rows, cols, flags, fsr)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexHeader {
    pub rows: usize,
    pub cols: usize,
    pub domain: Domain,
    pub scaling: String,
    pub layout: String,
}

const SCALING: &str = "unitary centered DFT";
const LAYOUT: &str = "row-major interleaved (re, im) f64 little-endian";

/// Writes raw complex data plus a `.json` header next to it.
pub fn write_complex(path: &Path, img: &ImageGrid) -> Result<()> {
    let mut bytes = Vec::with_capacity(img.len() * 16);
    for v in img.data() {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    fs::write(path, bytes)?;
    let header = ComplexHeader {
        rows: img.rows(),
        cols: img.cols(),
        domain: img.domain(),
        scaling: SCALING.into(),
        layout: LAYOUT.into(),
    };
    fs::write(sidecar(path), serde_json::to_string_pretty(&header)? + "\n")?;
    Ok(())
}

pub fn read_complex(path: &Path) -> Result<ImageGrid> {
    let header: ComplexHeader = serde_json::from_str(&fs::read_to_string(sidecar(path))?)?;
    let bytes = fs::read(path)?;
    let n = header.rows * header.cols;
    if bytes.len() != n * 16 {
        return Err(Error::Format(format!(
            "{} has {} bytes, header implies {}",
            path.display(),
            bytes.len(),
            n * 16
        )));
    }
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
    let data = bytes
        .chunks_exact(16)
        .map(|c| Complex64::new(f(&c[..8]), f(&c[8..])))
        .collect();
    ImageGrid::new(header.rows, header.cols, header.domain, data)
}

/// Directory of the bundled test images.
pub fn bundled_corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets").join("corpus")
}

/// All PNG files in a directory, sorted by name.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    out.sort();
    Ok(out)
}
