//! Parameter sweeps over images, samplers, methods, dictionary modes and
//! seeds, written as one CSV row per cell.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dictionary::DictMode;
use crate::error::{Error, Result};
use crate::grid::{add_noise, dft2_unitary, sample, ImageGrid, Measurements, SampleMask};
use crate::io::read_png;
use crate::metrics::Quality;
use crate::par;
use crate::phantom::shepp_logan;
use crate::recon::{reconstruct, Method, ReconConfig};
use crate::sampling::{SamplerConfig, SamplerKind};

pub const RESULTS_FILE: &str = "results.csv";
pub const TIMINGS_FILE: &str = "timings.csv";

/// One sampling pattern of the sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    /// Fraction of the grid to sample.
    pub fraction: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_sigma")]
    pub poisson_param: f64,
    /// Add a fully-sampled center sized for the largest dictionary in the
    /// sweep.
    #[serde(default)]
    pub fsr: bool,
}

fn default_sigma() -> f64 {
    0.3
}

impl SamplerSpec {
    pub fn label(&self) -> String {
        let shape = match self.kind {
            SamplerKind::Laplacian => format!("laplacian-s{}", self.sigma),
            SamplerKind::VdPoisson => format!("vdpoisson-p{}", self.poisson_param),
        };
        format!("{shape}-f{}{}", self.fraction, if self.fsr { "-fsr" } else { "" })
    }

    pub fn n_samples(&self, rows: usize, cols: usize) -> usize {
        ((self.fraction * (rows * cols) as f64).round() as usize).max(1)
    }

    pub fn config(&self, rows: usize, cols: usize, seed: u64, fsr: Option<(usize, usize)>) -> SamplerConfig {
        SamplerConfig {
            kind: self.kind,
            sigma_frac: self.sigma,
            poisson_param: self.poisson_param,
            n_samples: self.n_samples(rows, cols),
            seed,
            fsr: if self.fsr { fsr } else { None },
        }
    }
}

/// A sweep grid. Image entries are PNG paths (relative to the spec file) or
/// `phantom:N` for an NxN Shepp-Logan phantom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub images: Vec<String>,
    pub samplers: Vec<SamplerSpec>,
    pub methods: Vec<Method>,
    pub modes: Vec<DictMode>,
    #[serde(default)]
    pub noise_sigma: f64,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub recon: ReconConfig,
}

/// Key identifying one cell of the grid.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CellKey {
    pub image: String,
    pub method: Method,
    pub mode: DictMode,
    pub sampler: String,
    pub seed: u64,
}

impl CellKey {
    fn fields(&self) -> [String; 5] {
        [
            self.image.clone(),
            self.method.to_string(),
            self.mode.to_string(),
            self.sampler.clone(),
            self.seed.to_string(),
        ]
    }
}

#[derive(Clone, Debug)]
struct Cell {
    image: usize,
    sampler: usize,
    method: Method,
    mode: DictMode,
    seed: u64,
    key: CellKey,
}

/// Outcome of one cell.
#[derive(Clone, Debug)]
pub struct CellResult {
    pub key: CellKey,
    pub n_samples: usize,
    pub quality: std::result::Result<(Quality, usize, f64), String>,
    pub wall_time: f64,
}

pub const CSV_HEADER: [&str; 15] = [
    "image",
    "method",
    "mode",
    "sampler",
    "seed",
    "n_samples",
    "ssim",
    "mse",
    "mae",
    "relative_error",
    "mae_plus_mse",
    "iterations",
    "final_objective",
    "status",
    "error",
];

impl CellResult {
    fn record(&self) -> Vec<String> {
        let mut r: Vec<String> = self.key.fields().into();
        r.push(self.n_samples.to_string());
        match &self.quality {
            Ok((q, iters, obj)) => {
                for v in [q.ssim, q.mse, q.mae, q.relative_error, q.mae_plus_mse()] {
                    r.push(v.to_string());
                }
                r.push(iters.to_string());
                r.push(obj.to_string());
                r.push("ok".into());
                r.push(String::new());
            }
            Err(e) => {
                r.extend(std::iter::repeat_n(String::new(), 7));
                r.push("error".into());
                r.push(e.clone());
            }
        }
        r
    }
}

/// Loads an image entry of a spec. `base` resolves relative paths.
pub fn load_image(entry: &str, base: &Path) -> Result<ImageGrid> {
    if let Some(n) = entry.strip_prefix("phantom:") {
        let n: usize = n
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad phantom size in '{entry}'")))?;
        return Ok(shepp_logan(n, n));
    }
    let p = Path::new(entry);
    let p = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    read_png(&p)
}

fn image_name(entry: &str) -> String {
    if entry.starts_with("phantom:") {
        return entry.replace(':', "");
    }
    Path::new(entry)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| entry.to_string())
}

impl ExperimentSpec {
    /// Parses TOML or JSON by extension.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        if is_json {
            Ok(serde_json::from_str(&text)?)
        } else {
            toml::from_str(&text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
        }
    }

    pub fn validate(&self, base: &Path) -> Result<()> {
        let empty = [
            ("images", self.images.is_empty()),
            ("samplers", self.samplers.is_empty()),
            ("methods", self.methods.is_empty()),
            ("modes", self.modes.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::InvalidArgument(format!("{name}: must not be empty")));
        }
        for img in &self.images {
            if !img.starts_with("phantom:") {
                let p = base.join(img);
                if !p.exists() {
                    return Err(Error::InvalidArgument(format!("images: {} does not exist", p.display())));
                }
            }
        }
        for s in &self.samplers {
            if !(s.fraction > 0.0 && s.fraction <= 1.0) {
                return Err(Error::InvalidArgument(format!("samplers.fraction: {} is not in (0, 1]", s.fraction)));
            }
            if self.methods.contains(&Method::Sbpd) && !s.fsr {
                return Err(Error::InvalidArgument(format!(
                    "samplers.fsr: method sbpd needs a fully-sampled center, sampler {} has none",
                    s.label()
                )));
            }
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!("noise_sigma: {} is negative", self.noise_sigma)));
        }
        let names: HashSet<String> = self.images.iter().map(|i| image_name(i)).collect();
        if names.len() != self.images.len() {
            return Err(Error::InvalidArgument("images: two entries share a file name".into()));
        }
        self.recon.validate()
    }

    fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for (ii, img) in self.images.iter().enumerate() {
            for (si, s) in self.samplers.iter().enumerate() {
                for &seed in &self.seeds {
                    for &mode in &self.modes {
                        for &method in &self.methods {
                            out.push(Cell {
                                image: ii,
                                sampler: si,
                                method,
                                mode,
                                seed,
                                key: CellKey {
                                    image: image_name(img),
                                    method,
                                    mode,
                                    sampler: s.label(),
                                    seed,
                                },
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// FSR extent shared by every mode of the sweep, so paired cells see the
    /// same mask.
    fn fsr_extent(&self, rows: usize, cols: usize) -> Result<(usize, usize)> {
        let mut ext = (0, 0);
        for &mode in &self.modes {
            let e = self.recon.clone().with_mode(mode).required_fsr(rows, cols)?;
            ext = (ext.0.max(e.0), ext.1.max(e.1));
        }
        Ok(ext)
    }

    /// Mask and (noisy) data for one image/sampler/seed. Methods and modes
    /// sharing these see identical inputs.
    pub fn measurements(&self, image: &ImageGrid, sampler: &SamplerSpec, seed: u64, image_index: usize) -> Result<Measurements> {
        let (rows, cols) = image.shape();
        let fsr = if sampler.fsr { Some(self.fsr_extent(rows, cols)?) } else { None };
        let mask: SampleMask = sampler.config(rows, cols, seed, fsr).generate(rows, cols)?;
        let meas = sample(&dft2_unitary(image)?, &mask)?;
        if self.noise_sigma > 0.0 {
            let noise_seed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ image_index as u64;
            add_noise(&meas, self.noise_sigma, noise_seed)
        } else {
            Ok(meas)
        }
    }

    fn run_cell(&self, cell: &Cell, images: &[ImageGrid]) -> CellResult {
        let start = Instant::now();
        let img = &images[cell.image];
        let sampler = &self.samplers[cell.sampler];
        let n_samples = sampler.n_samples(img.rows(), img.cols());
        let quality = (|| -> Result<(Quality, usize, f64)> {
            let meas = self.measurements(img, sampler, cell.seed, cell.image)?;
            let cfg = self.recon.clone().with_mode(cell.mode);
            let rec = reconstruct(&meas, cell.method, &cfg)?;
            let q = Quality::measure(img, &rec.image)?;
            let best = rec.report.round_best.last().copied().unwrap_or(f64::NAN);
            Ok((q, rec.report.objectives.len(), best))
        })()
        .map_err(|e| e.to_string());
        CellResult {
            key: cell.key.clone(),
            n_samples,
            quality,
            wall_time: start.elapsed().as_secs_f64(),
        }
    }
}

/// Summary of a sweep run.
#[derive(Clone, Debug, Default)]
pub struct SweepSummary {
    pub total: usize,
    pub skipped: usize,
    pub ran: usize,
    pub failed: usize,
    pub results_path: PathBuf,
}

fn completed_keys(path: &Path) -> Result<HashSet<[String; 5]>> {
    let mut keys = HashSet::new();
    if !path.exists() {
        return Ok(keys);
    }
    let mut rdr = csv::Reader::from_path(path)?;
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() >= 5 {
            keys.insert(std::array::from_fn(|i| rec[i].to_string()));
        }
    }
    Ok(keys)
}

fn csv_line(fields: &[String]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(fields)?;
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Runs every cell not already present in the results file. Rows are
/// written in grid order through a single writer, so a completed run is
/// byte-identical regardless of scheduling or interruptions. Wall times go
/// to a separate timings file.
pub fn run_sweep(spec: &ExperimentSpec, base: &Path, workers: usize) -> Result<SweepSummary> {
    spec.validate(base)?;
    let out_dir = if spec.output_dir.is_absolute() {
        spec.output_dir.clone()
    } else {
        base.join(&spec.output_dir)
    };
    fs::create_dir_all(&out_dir)?;
    let results_path = out_dir.join(RESULTS_FILE);
    let done = completed_keys(&results_path)?;
    let cells = spec.cells();
    let pending: Vec<(usize, Cell)> = cells
        .iter()
        .filter(|c| !done.contains(&c.key.fields()))
        .cloned()
        .enumerate()
        .collect();

    let images: Vec<ImageGrid> = spec
        .images
        .iter()
        .map(|i| load_image(i, base))
        .collect::<Result<_>>()?;

    let new_file = !results_path.exists();
    let mut results = OpenOptions::new().create(true).append(true).open(&results_path)?;
    if new_file {
        results.write_all(&csv_line(&CSV_HEADER.map(String::from))?)?;
    }
    let timings_path = out_dir.join(TIMINGS_FILE);
    let new_timings = !timings_path.exists();
    let mut timings = OpenOptions::new().create(true).append(true).open(&timings_path)?;
    if new_timings {
        timings.write_all(b"image,method,mode,sampler,seed,wall_time_s\n")?;
    }

    let (tx, rx) = mpsc::channel::<(usize, CellResult)>();
    let mut summary = SweepSummary {
        total: cells.len(),
        skipped: cells.len() - pending.len(),
        ran: pending.len(),
        results_path: results_path.clone(),
        ..Default::default()
    };
    let writer = std::thread::spawn(move || -> Result<usize> {
        let mut next = 0;
        let mut held = BTreeMap::new();
        let mut failed = 0;
        for (i, res) in rx {
            held.insert(i, res);
            while let Some(res) = held.remove(&next) {
                if res.quality.is_err() {
                    failed += 1;
                }
                results.write_all(&csv_line(&res.record())?)?;
                results.flush()?;
                let mut t: Vec<String> = res.key.fields().into();
                t.push(format!("{:.3}", res.wall_time));
                timings.write_all(&csv_line(&t)?)?;
                next += 1;
            }
        }
        Ok(failed)
    });

    par::with_workers(workers, || {
        par::for_each(&pending, |(i, cell)| {
            let res = spec.run_cell(cell, &images);
            log::info!("{:?}: {:?}", res.key, res.quality.as_ref().map(|q| q.0.ssim));
            let _ = tx.send((*i, res));
        });
    });
    drop(tx);
    summary.failed = writer
        .join()
        .map_err(|_| Error::Format("results writer panicked".into()))??;
    Ok(summary)
}
