//! `structcs`: sampling masks, reconstructions, sweeps, transform dumps and
//! metrics from the command line.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical
//! failure.

mod config;
mod mosaic;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde_json::json;
use structcs::dictionary::{DictMode, Dictionary};
use structcs::experiment::{run_sweep, ExperimentSpec};
use structcs::grid::{add_noise, dft2_unitary, idft2_unitary, sample, Domain, ImageGrid, SampleMask};
use structcs::io::{read_complex, read_mask, read_png, write_complex, write_magnitude_png, write_mask, write_png16};
use structcs::metrics::Quality;
use structcs::recon::{reconstruct, LambdaInit, Method};
use structcs::sampling::SamplerKind;
use structcs::{curvelet, par, wavelet, Error, Result};

use config::RunConfig;

pub const WORKERS_ENV: &str = "STRUCTCS_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "structcs", version, about = "Structured compressed sensing from undersampled Fourier data")]
struct Cli {
    /// Worker threads for data-parallel work (default: all cores).
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a sampling mask (PBM plus JSON sidecar).
    Mask {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Downsample a fully-sampled input and reconstruct it.
    Recon {
        /// Fully-sampled real image (PNG).
        #[arg(long, conflicts_with = "kspace")]
        image: Option<PathBuf>,
        /// Fully-sampled k-space (raw complex with JSON header).
        #[arg(long)]
        kspace: Option<PathBuf>,
        /// Use this mask instead of generating one.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, short)]
        out_dir: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Run a sweep described by a TOML or JSON spec.
    Sweep {
        spec: PathBuf,
    },
    /// Dump wavelet and curvelet coefficient magnitudes as PNGs.
    Transform {
        #[arg(long)]
        image: PathBuf,
        #[arg(long, short)]
        out_dir: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Compare two images (magnitudes) and print the metrics as JSON.
    Metrics {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
    },
}

/// Flags that override the config file.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// Flat TOML or JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    mode: Option<DictMode>,
    #[arg(long, value_parser = parse_sampler)]
    sampler: Option<SamplerKind>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    poisson_param: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Add a fully-sampled center sized for the dictionary.
    #[arg(long, overrides_with = "no_fsr")]
    fsr: bool,
    #[arg(long)]
    no_fsr: bool,
    /// Explicit fully-sampled center, e.g. 16x16.
    #[arg(long, value_parser = parse_extent)]
    fsr_extent: Option<[usize; 2]>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    nscales: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    reweights: Option<usize>,
    #[arg(long)]
    lambda_scale: Option<f64>,
    #[arg(long, value_parser = parse_lambda_init)]
    lambda_init: Option<LambdaInit>,
    #[arg(long)]
    kaiser_beta: Option<f64>,
}

fn parse_sampler(s: &str) -> std::result::Result<SamplerKind, String> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "laplacian" => Ok(SamplerKind::Laplacian),
        "vd_poisson" | "poisson" => Ok(SamplerKind::VdPoisson),
        _ => Err(format!("unknown sampler '{s}' (expected laplacian or vd-poisson)")),
    }
}

fn parse_lambda_init(s: &str) -> std::result::Result<LambdaInit, String> {
    match s {
        "proportional" => Ok(LambdaInit::Proportional),
        "inverse" => Ok(LambdaInit::Inverse),
        _ => Err(format!("unknown lambda init '{s}' (expected proportional or inverse)")),
    }
}

fn parse_extent(s: &str) -> std::result::Result<[usize; 2], String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got '{s}'"))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad extent '{s}': {e}"));
    Ok([p(h)?, p(w)?])
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = RunConfig::load(self.config.as_deref())?;
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(method, mode, sampler, fraction, sigma, poisson_param, seed, noise_sigma, levels, max_iters, reweights, lambda_scale, lambda_init, kaiser_beta);
        if self.samples.is_some() {
            c.samples = self.samples;
        }
        if self.nscales.is_some() {
            c.nscales = self.nscales;
        }
        if self.fsr_extent.is_some() {
            c.fsr_extent = self.fsr_extent;
            c.fsr = true;
        }
        if self.fsr {
            c.fsr = true;
        }
        if self.no_fsr {
            c.fsr = false;
        }
        Ok(c)
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn cmd_mask(rows: usize, cols: usize, out: &Path, opts: &Overrides) -> Result<()> {
    let cfg = opts.resolve()?;
    let sampler = cfg.sampler_config(rows, cols)?;
    let mask = sampler.generate(rows, cols)?;
    write_mask(out, &mask, json!({ "sampler": sampler, "run": cfg }))?;
    println!("{} samples ({:.2}%) -> {}", mask.count(), 100.0 * mask.fraction(), out.display());
    Ok(())
}

fn cmd_recon(image: Option<&Path>, kspace: Option<&Path>, mask_path: Option<&Path>, out_dir: &Path, opts: &Overrides) -> Result<()> {
    let cfg = opts.resolve()?;
    let (truth, full) = match (image, kspace) {
        (Some(p), None) => {
            let t = read_png(p)?;
            let k = dft2_unitary(&t)?;
            (t, k)
        }
        (None, Some(p)) => {
            let k = read_complex(p)?;
            k.require_domain(Domain::Frequency)?;
            (idft2_unitary(&k)?, k)
        }
        _ => return Err(Error::InvalidArgument("image: pass exactly one of --image or --kspace".into())),
    };
    let (rows, cols) = truth.shape();
    let mask: SampleMask = match mask_path {
        Some(p) => read_mask(p)?,
        None => cfg.sampler_config(rows, cols)?.generate(rows, cols)?,
    };
    let mut meas = sample(&full, &mask)?;
    if cfg.noise_sigma > 0.0 {
        meas = add_noise(&meas, cfg.noise_sigma, cfg.seed)?;
    }
    let recon_cfg = cfg.recon();
    let rec = reconstruct(&meas, cfg.method, &recon_cfg)?;
    let q = Quality::measure(&truth, &rec.image)?;

    fs::create_dir_all(out_dir)?;
    write_magnitude_png(&out_dir.join("recon.png"), &rec.image)?;
    write_complex(&out_dir.join("recon.raw"), &rec.image)?;
    let diff: Vec<f64> = truth.sub(&rec.image)?.magnitude();
    let diff_scale = diff.iter().cloned().fold(0.0, f64::max).max(1e-12);
    write_png16(&out_dir.join("difference.png"), &diff, rows, cols, diff_scale)?;
    if let Some(low) = &rec.lowpass {
        write_magnitude_png(&out_dir.join("lowpass.png"), low)?;
    }
    write_mask(&out_dir.join("mask.pbm"), &mask, json!({ "run": cfg }))?;
    fs::write(out_dir.join("trace.csv"), rec.report.trace_csv())?;
    let metrics = json!({
        "ssim": q.ssim,
        "mse": q.mse,
        "mae": q.mae,
        "relative_error": q.relative_error,
        "mae_plus_mse": q.mae_plus_mse(),
        "n_samples": mask.count(),
        "fraction": mask.fraction(),
        "fsr": mask.fsr(),
        "window": rec.window,
        "iterations": rec.report.objectives.len(),
        "final_objective": rec.report.round_best.last(),
        "difference_display_scale": diff_scale,
        "config": cfg,
        "recon": recon_cfg,
    });
    write_json(&out_dir.join("metrics.json"), &metrics)?;
    println!("{}", serde_json::to_string(&json!({"ssim": q.ssim, "mse": q.mse, "relative_error": q.relative_error}))?);
    Ok(())
}

fn cmd_sweep(spec_path: &Path, workers: usize) -> Result<()> {
    let spec = ExperimentSpec::from_file(spec_path)?;
    let base = spec_path.parent().unwrap_or(Path::new("."));
    let s = run_sweep(&spec, base, workers)?;
    println!(
        "{} cells: {} run, {} already done, {} failed -> {}",
        s.total,
        s.ran,
        s.skipped,
        s.failed,
        s.results_path.display()
    );
    Ok(())
}

fn cmd_transform(image: &Path, out_dir: &Path, opts: &Overrides) -> Result<()> {
    let cfg = opts.resolve()?;
    let img = read_png(image)?;
    let (rows, cols) = img.shape();
    fs::create_dir_all(out_dir)?;
    let dict: Dictionary = cfg.recon().with_mode(DictMode::WavCurv).dictionary(rows, cols)?;
    let pyr = wavelet::ddwt4_forward(&img, dict.levels())?;
    let (v, r, c) = mosaic::wavelet_picture(&pyr);
    write_png16(&out_dir.join("wavelet.png"), &v, r, c, 1.0)?;
    let geom = dict.geometry().expect("wavCurv dictionary has a curvelet geometry");
    let cp = curvelet::fdct_forward(&img, geom)?;
    let (v, r, c) = mosaic::curvelet_picture(&cp);
    write_png16(&out_dir.join("curvelet.png"), &v, r, c, 1.0)?;
    write_json(
        &out_dir.join("transform.json"),
        &json!({
            "levels": dict.levels(),
            "nscales": geom.nscales(),
            "angles_per_scale": geom.angles_per_scale(),
            "display": format!("per-subband |c|/max raised to {}", mosaic::GAMMA),
        }),
    )?;
    Ok(())
}

fn cmd_metrics(truth: &Path, estimate: &Path) -> Result<()> {
    let load = |p: &Path| -> Result<ImageGrid> {
        if p.extension().is_some_and(|e| e == "raw") {
            read_complex(p)
        } else {
            read_png(p)
        }
    };
    let q = Quality::measure(&load(truth)?, &load(estimate)?)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "ssim": q.ssim,
            "mse": q.mse,
            "mae": q.mae,
            "relative_error": q.relative_error,
            "mae_plus_mse": q.mae_plus_mse(),
        }))?
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let workers = cli.workers.unwrap_or_else(par::workers).max(1);
    log::info!("running with {workers} worker thread(s)");
    par::with_workers(workers, || match &cli.command {
        Command::Mask { rows, cols, out, opts } => cmd_mask(*rows, *cols, out, opts),
        Command::Recon {
            image,
            kspace,
            mask,
            out_dir,
            opts,
        } => cmd_recon(image.as_deref(), kspace.as_deref(), mask.as_deref(), out_dir, opts),
        Command::Sweep { spec } => cmd_sweep(spec, workers),
        Command::Transform { image, out_dir, opts } => cmd_transform(image, out_dir, opts),
        Command::Metrics { truth, estimate } => cmd_metrics(truth, estimate),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
