//! Blurry low-frequency estimate from the fully-sampled center region and the
//! residual data it leaves for the detail solve.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::grid::{centered_range, dft2_unitary, idft2_unitary, sample, Domain, ImageGrid, Measurements};

pub const DEFAULT_KAISER_BETA: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    KaiserBessel,
    CurveletW0,
}

/// Real low-pass taper over a centered rectangle of k-space.
#[derive(Clone, Debug, PartialEq)]
pub struct LowpassWindow {
    kind: WindowKind,
    support: (usize, usize),
    values: Vec<f64>,
}

impl LowpassWindow {
    pub fn kind(&self) -> WindowKind {
        self.kind
    }

    pub fn support(&self) -> (usize, usize) {
        self.support
    }

    /// Row-major values over the support rectangle.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.support.1 + c]
    }

    /// Window chosen by the dictionary: the curvelet coarse window when its
    /// region exceeds the wavelet approximation bin, Kaiser-Bessel over the
    /// FSR otherwise.
    pub fn for_dictionary(dict: &Dictionary, beta: f64) -> Result<Self> {
        if dict.uses_curvelet_window() {
            curvelet_w0_window(dict)
        } else {
            kaiser_bessel_window(dict.fsr_extent(), beta)
        }
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn kaiser_taps(len: usize, beta: f64) -> Vec<f64> {
    let half = (len / 2) as f64;
    let norm = bessel_i0(beta);
    (0..len)
        .map(|i| {
            if len == 1 {
                return 1.0;
            }
            let x = (i as f64 - half) / half;
            bessel_i0(beta * (1.0 - x * x).max(0.0).sqrt()) / norm
        })
        .collect()
}

/// Separable Kaiser-Bessel window with peak 1 at the zero frequency.
pub fn kaiser_bessel_window(extent: (usize, usize), beta: f64) -> Result<LowpassWindow> {
    if extent.0 == 0 || extent.1 == 0 {
        return Err(Error::InvalidArgument("window extent must be positive".into()));
    }
    if !(beta >= 0.0) {
        return Err(Error::InvalidArgument(format!("Kaiser beta must be non-negative, got {beta}")));
    }
    let tr = kaiser_taps(extent.0, beta);
    let tc = kaiser_taps(extent.1, beta);
    let values = tr.iter().flat_map(|a| tc.iter().map(move |b| a * b)).collect();
    Ok(LowpassWindow {
        kind: WindowKind::KaiserBessel,
        support: extent,
        values,
    })
}

/// The curvelet coarse low-pass window, applied once.
pub fn curvelet_w0_window(dict: &Dictionary) -> Result<LowpassWindow> {
    let g = dict
        .geometry()
        .ok_or_else(|| Error::ModeMismatch("curvelet window needs a curvelet dictionary".into()))?;
    let (rows, cols) = g.shape();
    let support = g.lowfreq_extent();
    let values = centered_range(rows, support.0)
        .flat_map(|r| centered_range(cols, support.1).map(move |c| (r, c)))
        .map(|(r, c)| g.coarse_window(r, c))
        .collect();
    Ok(LowpassWindow {
        kind: WindowKind::CurveletW0,
        support,
        values,
    })
}

/// `x_L = F* K M_L b`: windowed FSR data, inverse DFT.
pub fn blurry_estimate(meas: &Measurements, window: &LowpassWindow) -> Result<ImageGrid> {
    let mask = meas.mask();
    let fsr = mask.fsr().ok_or(Error::FsrTooSmall {
        required: window.support,
        actual: None,
    })?;
    if window.support.0 > fsr.0 || window.support.1 > fsr.1 {
        return Err(Error::FsrTooSmall {
            required: window.support,
            actual: Some(fsr),
        });
    }
    let (rows, cols) = mask.shape();
    let full = meas.embed();
    let mut data = vec![Complex64::default(); rows * cols];
    for (wr, r) in centered_range(rows, window.support.0).enumerate() {
        for (wc, c) in centered_range(cols, window.support.1).enumerate() {
            let i = r * cols + c;
            data[i] = full.data()[i] * window.at(wr, wc);
        }
    }
    idft2_unitary(&ImageGrid::new(rows, cols, Domain::Frequency, data)?)
}

/// `beta = b - M F x_L`.
pub fn residual_data(meas: &Measurements, x_low: &ImageGrid) -> Result<Measurements> {
    x_low.require_shape(meas.shape())?;
    let predicted = sample(&dft2_unitary(x_low)?, meas.mask())?;
    let values = meas
        .values()
        .iter()
        .zip(predicted.values())
        .map(|(b, p)| b - p)
        .collect();
    Measurements::new(meas.mask().clone(), values)
}
