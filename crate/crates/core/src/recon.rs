//! End-to-end reconstructions: BPD, BPD with a low-frequency mask, and
//! structured BPD (blurry estimate plus sparse detail).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::curvelet::{default_nscales, CurveletGeometry, DEFAULT_NANGLES_COARSE};
use crate::dictionary::{DictMode, Dictionary, WeightVector};
use crate::error::{Error, Result};
use crate::grid::{zero_fill, ImageGrid, Measurements};
use crate::lowfreq::{blurry_estimate, residual_data, LowpassWindow, WindowKind, DEFAULT_KAISER_BETA};
use crate::solver::{
    initial_lambda, reweight, reweighted_solve, FistaConfig, LassoProblem, ReweightConfig, SensingOperator, SolveReport,
};
use crate::wavelet::{admissible_levels, DEFAULT_LEVELS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bpd,
    BpdMask,
    Sbpd,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Bpd, Method::BpdMask, Method::Sbpd];

    pub fn needs_fsr(self) -> bool {
        self == Method::Sbpd
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Bpd => "bpd",
            Method::BpdMask => "bpd_mask",
            Method::Sbpd => "sbpd",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "bpd" => Ok(Method::Bpd),
            "bpd_mask" | "bpdmask" => Ok(Method::BpdMask),
            "sbpd" | "s_bpd" => Ok(Method::Sbpd),
            _ => Err(Error::InvalidArgument(format!("unknown method '{s}' (expected bpd, bpd_mask or sbpd)"))),
        }
    }
}

/// Weight level `kappa` in `lambda = kappa * (1 - fraction) * |Psi zf|`,
/// chosen on the bundled corpus at 128x128 and 10% sampling.
pub const DEFAULT_LAMBDA_SCALE: f64 = 0.02;

/// How the first-round weights follow the zero-filled coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaInit {
    /// `lambda_i = s |Psi zf|_i`.
    Proportional,
    /// The reweighting rule applied to `|Psi zf|`, mean level `s median |Psi zf|`.
    Inverse,
}

/// Everything a reconstruction needs besides the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconConfig {
    pub mode: DictMode,
    pub levels: usize,
    /// Curvelet scales; derived from the shape when absent.
    pub nscales: Option<usize>,
    pub nangles_coarse: usize,
    pub max_iters: usize,
    pub reweights: usize,
    pub reweight_eps: f64,
    /// Mean starting weight relative to the mean zero-filled coefficient
    /// magnitude, before the `(1 - sampled fraction)` factor.
    pub lambda_scale: f64,
    pub lambda_init: LambdaInit,
    pub kaiser_beta: f64,
    pub fista: FistaConfig,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            mode: DictMode::WavCurv,
            levels: DEFAULT_LEVELS,
            nscales: None,
            nangles_coarse: DEFAULT_NANGLES_COARSE,
            max_iters: 100,
            reweights: 5,
            reweight_eps: 0.1,
            lambda_scale: DEFAULT_LAMBDA_SCALE,
            lambda_init: LambdaInit::Proportional,
            kaiser_beta: DEFAULT_KAISER_BETA,
            fista: FistaConfig::default(),
        }
    }
}

impl ReconConfig {
    pub fn with_mode(mut self, mode: DictMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_scale >= 0.0) || !self.lambda_scale.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda_scale must be >= 0, got {}", self.lambda_scale)));
        }
        if !(self.reweight_eps > 0.0) {
            return Err(Error::InvalidArgument(format!("reweight_eps must be > 0, got {}", self.reweight_eps)));
        }
        if !(self.kaiser_beta >= 0.0) {
            return Err(Error::InvalidArgument(format!("kaiser_beta must be >= 0, got {}", self.kaiser_beta)));
        }
        Ok(())
    }

    /// The dictionary this config describes for a grid shape.
    pub fn dictionary(&self, rows: usize, cols: usize) -> Result<Dictionary> {
        let levels = admissible_levels(rows, cols, self.levels)?;
        let geom = if self.mode.has_curvelet() {
            let s = self.nscales.unwrap_or_else(|| default_nscales(rows, cols));
            Some(CurveletGeometry::new(rows, cols, s, self.nangles_coarse)?)
        } else {
            None
        };
        Dictionary::new(self.mode, rows, cols, levels, geom)
    }

    /// Region the FSR must cover for structured reconstruction.
    pub fn required_fsr(&self, rows: usize, cols: usize) -> Result<(usize, usize)> {
        let dict = self.dictionary(rows, cols)?;
        Ok(LowpassWindow::for_dictionary(&dict, self.kaiser_beta)?.support())
    }
}

/// A finished reconstruction with its intermediate pieces.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub image: ImageGrid,
    /// Flat dictionary coefficients of the sparse part.
    pub coefficients: Vec<num_complex::Complex64>,
    /// Blurry estimate (structured BPD only).
    pub lowpass: Option<ImageGrid>,
    pub window: Option<WindowKind>,
    pub report: SolveReport,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) }
}

/// Weights for the first solve, scaled by `s = lambda_scale * (1 - fraction)`
/// so that full sampling reduces to least squares.
pub fn starting_weights(zf: &ImageGrid, dict: &Dictionary, fraction: f64, cfg: &ReconConfig) -> Result<WeightVector> {
    let mags = initial_lambda(zf, dict)?;
    let s = cfg.lambda_scale * (1.0 - fraction).max(0.0);
    Ok(match cfg.lambda_init {
        LambdaInit::Proportional => mags.scaled(s),
        LambdaInit::Inverse => {
            let level = s * median(mags.values());
            let as_coeffs: Vec<num_complex::Complex64> = mags.values().iter().map(|&m| m.into()).collect();
            reweight(&WeightVector::constant(mags.len(), level), &as_coeffs, cfg.reweight_eps)
        }
    })
}

fn solve(
    dict: &Dictionary,
    data: &Measurements,
    weight_mask: Option<&WeightVector>,
    cfg: &ReconConfig,
) -> Result<(Vec<num_complex::Complex64>, SolveReport)> {
    let zf = zero_fill(data);
    let op = SensingOperator::new(dict, data.mask())?;
    let y0 = dict.analyze(zf.data());
    let mut lambda = starting_weights(&zf, dict, data.mask().fraction(), cfg)?;
    if let Some(w) = weight_mask {
        lambda = lambda.hadamard(w)?;
    }
    let mut prob = LassoProblem::new(&op, data.values().to_vec(), lambda)
        .with_initial(y0)
        .with_max_iters(cfg.max_iters);
    prob.config = cfg.fista;
    reweighted_solve(
        &prob,
        ReweightConfig {
            rounds: cfg.reweights,
            eps_factor: cfg.reweight_eps,
        },
    )
}

/// Reconstruct with the chosen method.
pub fn reconstruct(meas: &Measurements, method: Method, cfg: &ReconConfig) -> Result<Reconstruction> {
    cfg.validate()?;
    let (rows, cols) = meas.shape();
    let dict = cfg.dictionary(rows, cols)?;
    match method {
        Method::Bpd | Method::BpdMask => {
            let mask = (method == Method::BpdMask).then(|| dict.lowfreq_weight_mask());
            let (y, report) = solve(&dict, meas, mask.as_ref(), cfg)?;
            let image = ImageGrid::new(rows, cols, crate::grid::Domain::Space, dict.synthesize(&y))?;
            Ok(Reconstruction {
                image,
                coefficients: y,
                lowpass: None,
                window: None,
                report,
            })
        }
        Method::Sbpd => {
            let window = LowpassWindow::for_dictionary(&dict, cfg.kaiser_beta)?;
            let x_low = blurry_estimate(meas, &window)?;
            let beta = residual_data(meas, &x_low)?;
            let (y, report) = solve(&dict, &beta, None, cfg)?;
            let detail = ImageGrid::new(rows, cols, crate::grid::Domain::Space, dict.synthesize(&y))?;
            Ok(Reconstruction {
                image: x_low.add(&detail)?,
                coefficients: y,
                lowpass: Some(x_low),
                window: Some(window.kind()),
                report,
            })
        }
    }
}

pub fn reconstruct_bpd(meas: &Measurements, cfg: &ReconConfig) -> Result<ImageGrid> {
    Ok(reconstruct(meas, Method::Bpd, cfg)?.image)
}

pub fn reconstruct_bpd_masked(meas: &Measurements, cfg: &ReconConfig) -> Result<ImageGrid> {
    Ok(reconstruct(meas, Method::BpdMask, cfg)?.image)
}

pub fn reconstruct_sbpd(meas: &Measurements, cfg: &ReconConfig) -> Result<ImageGrid> {
    Ok(reconstruct(meas, Method::Sbpd, cfg)?.image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{dft2_unitary, sample, SampleMask};

    fn smooth_image(n: usize) -> ImageGrid {
        let v: Vec<f64> = (0..n * n)
            .map(|i| {
                let (r, c) = ((i / n) as f64 / n as f64, (i % n) as f64 / n as f64);
                0.5 + 0.3 * (6.0 * r).sin() * (4.0 * c).cos() + if (r - 0.5).abs() < 0.2 && (c - 0.4).abs() < 0.1 { 0.2 } else { 0.0 }
            })
            .collect();
        ImageGrid::from_real(n, n, &v).unwrap()
    }

    #[test]
    fn method_parsing() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("lasso".parse::<Method>().is_err());
    }

    #[test]
    fn full_sampling_is_exact() {
        let img = smooth_image(32);
        let meas = sample(&dft2_unitary(&img).unwrap(), &SampleMask::full(32, 32)).unwrap();
        for mode in DictMode::ALL {
            let cfg = ReconConfig::default().with_mode(mode);
            for m in [Method::Bpd, Method::BpdMask] {
                let out = reconstruct(&meas, m, &cfg).unwrap();
                let err = out.image.sub(&img).unwrap().norm() / img.norm();
                assert!(err <= 1e-3, "{mode} {m}: {err}");
            }
        }
    }

    #[test]
    fn zero_data_gives_zero_image() {
        let mask = SampleMask::center(32, 32, (8, 8)).unwrap();
        let meas = Measurements::new(mask, vec![Default::default(); 64]).unwrap();
        let out = reconstruct_bpd(&meas, &ReconConfig::default().with_mode(DictMode::Wavelet)).unwrap();
        assert!(out.norm() == 0.0);
    }

    #[test]
    fn structured_without_fsr_names_required_extent() {
        let mask = SampleMask::center(32, 32, (8, 8)).unwrap().without_fsr();
        let meas = Measurements::new(mask, vec![Default::default(); 64]).unwrap();
        let err = reconstruct_sbpd(&meas, &ReconConfig::default()).unwrap_err();
        match err {
            Error::FsrTooSmall { required, actual: None } => {
                assert_eq!(required, ReconConfig::default().required_fsr(32, 32).unwrap())
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
