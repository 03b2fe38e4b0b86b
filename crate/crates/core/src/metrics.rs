//! Image quality metrics. All of them work on magnitude images.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("metrics need at least one pixel".into()));
    }
    Ok(())
}

/// `||truth - estimate|| / ||truth||`.
pub fn relative_error(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    check_len(truth, estimate)?;
    let num: f64 = truth.iter().zip(estimate).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = truth.iter().map(|a| a * a).sum();
    if den == 0.0 {
        return Err(Error::InvalidArgument("relative error against a zero image".into()));
    }
    Ok((num / den).sqrt())
}

pub fn mse(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    check_len(truth, estimate)?;
    Ok(truth.iter().zip(estimate).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / truth.len() as f64)
}

pub fn mae(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    check_len(truth, estimate)?;
    Ok(truth.iter().zip(estimate).map(|(a, b)| (a - b).abs()).sum::<f64>() / truth.len() as f64)
}

fn gaussian_taps() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let taps: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - half).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / s).collect()
}

// separable "valid" filtering
fn filter_valid(img: &[f64], rows: usize, cols: usize, taps: &[f64]) -> Vec<f64> {
    let w = taps.len();
    let (or, oc) = (rows - w + 1, cols - w + 1);
    let mut tmp = vec![0.0; rows * oc];
    for r in 0..rows {
        let row = &img[r * cols..(r + 1) * cols];
        for c in 0..oc {
            tmp[r * oc + c] = taps.iter().zip(&row[c..c + w]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; or * oc];
    for r in 0..or {
        for c in 0..oc {
            out[r * oc + c] = (0..w).map(|k| taps[k] * tmp[(r + k) * oc + c]).sum();
        }
    }
    out
}

/// Mean structural similarity over all full 11x11 windows, data range 1.
pub fn ssim(truth: &[f64], estimate: &[f64], rows: usize, cols: usize) -> Result<f64> {
    check_len(truth, estimate)?;
    if truth.len() != rows * cols {
        return Err(Error::LengthMismatch {
            expected: rows * cols,
            actual: truth.len(),
        });
    }
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {rows}x{cols}"
        )));
    }
    let taps = gaussian_taps();
    let f = |v: &[f64]| filter_valid(v, rows, cols, &taps);
    let xx: Vec<f64> = truth.iter().map(|a| a * a).collect();
    let yy: Vec<f64> = estimate.iter().map(|a| a * a).collect();
    let xy: Vec<f64> = truth.iter().zip(estimate).map(|(a, b)| a * b).collect();
    let (mx, my, sxx, syy, sxy) = (f(truth), f(estimate), f(&xx), f(&yy), f(&xy));
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (a, b) = (mx[i], my[i]);
            let vx = sxx[i] - a * a;
            let vy = syy[i] - b * b;
            let cxy = sxy[i] - a * b;
            ((2.0 * a * b + c1) * (2.0 * cxy + c2)) / ((a * a + b * b + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

/// The four reported metrics for one reconstruction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quality {
    pub ssim: f64,
    pub mse: f64,
    pub mae: f64,
    pub relative_error: f64,
}

impl Quality {
    /// Compares the magnitudes of two space-domain images.
    pub fn measure(truth: &ImageGrid, estimate: &ImageGrid) -> Result<Self> {
        estimate.require_shape(truth.shape())?;
        let (t, e) = (truth.magnitude(), estimate.magnitude());
        Ok(Self {
            ssim: ssim(&t, &e, truth.rows(), truth.cols())?,
            mse: mse(&t, &e)?,
            mae: mae(&t, &e)?,
            relative_error: relative_error(&t, &e)?,
        })
    }

    pub fn mae_plus_mse(&self) -> f64 {
        self.mae + self.mse
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_forms() {
        assert_eq!(relative_error(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert!((relative_error(&[3.0, 4.0], &[3.0, 0.0]).unwrap() - 0.8).abs() < 1e-15);
        assert!((relative_error(&[3.0, 4.0], &[0.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        let a = vec![0.3; 50];
        let b: Vec<f64> = a.iter().map(|v| v + 0.1).collect();
        assert!((mse(&a, &b).unwrap() - 0.01).abs() < 1e-15);
        assert!((mae(&a, &b).unwrap() - 0.1).abs() < 1e-15);
        assert!(mse(&a, &b[..3]).is_err());
    }

    #[test]
    fn ssim_of_constants_matches_closed_form() {
        let a = vec![0.5; 32 * 32];
        let b = vec![0.25; 32 * 32];
        let c1 = 1e-4;
        let expected = (2.0 * 0.5 * 0.25 + c1) / (0.25 + 0.0625 + c1);
        let got = ssim(&a, &b, 32, 32).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.8001).abs() < 1e-4);
    }

    #[test]
    fn ssim_identity_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..40 * 30).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|v| (v + rng.random_range(-0.1..0.1)).clamp(0.0, 1.0)).collect();
        assert!((ssim(&x, &x, 40, 30).unwrap() - 1.0).abs() < 1e-12);
        let s = ssim(&x, &y, 40, 30).unwrap();
        assert!((s - ssim(&y, &x, 40, 30).unwrap()).abs() < 1e-14);
        assert!(s < 1.0 && s > -1.0);
        assert!(ssim(&x[..100], &y[..100], 10, 10).is_err());
    }

    #[test]
    fn gaussian_taps_are_normalised_and_symmetric() {
        let t = gaussian_taps();
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..SSIM_WINDOW {
            assert_eq!(t[i], t[SSIM_WINDOW - 1 - i]);
        }
    }
}
