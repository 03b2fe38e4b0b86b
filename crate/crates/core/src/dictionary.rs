//! The sparsifying dictionary `Psi`: wavelets, curvelets, or both stacked.
//!
//! In the stacked mode each block is scaled by `1/sqrt(2)` so the union of the
//! two Parseval frames is again Parseval (`Psi* Psi = I`).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::curvelet::{CurveletGeometry, CurveletPyramid};
use crate::error::{Error, Result};
use crate::fft;
use crate::grid::{Domain, ImageGrid};
use crate::wavelet::{self, WaveletPyramid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DictMode {
    #[serde(rename = "wavelet")]
    Wavelet,
    #[serde(rename = "curvelet")]
    Curvelet,
    #[serde(rename = "wavCurv", alias = "wavcurv")]
    WavCurv,
}

impl DictMode {
    pub const ALL: [DictMode; 3] = [DictMode::Wavelet, DictMode::Curvelet, DictMode::WavCurv];

    pub fn has_wavelet(self) -> bool {
        self != DictMode::Curvelet
    }

    pub fn has_curvelet(self) -> bool {
        self != DictMode::Wavelet
    }

    fn block_scale(self) -> f64 {
        match self {
            DictMode::WavCurv => std::f64::consts::FRAC_1_SQRT_2,
            _ => 1.0,
        }
    }
}

impl fmt::Display for DictMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DictMode::Wavelet => "wavelet",
            DictMode::Curvelet => "curvelet",
            DictMode::WavCurv => "wavCurv",
        })
    }
}

impl FromStr for DictMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wavelet" => Ok(DictMode::Wavelet),
            "curvelet" => Ok(DictMode::Curvelet),
            "wavcurv" => Ok(DictMode::WavCurv),
            other => Err(Error::InvalidArgument(format!(
                "unknown dictionary mode '{other}' (expected wavelet, curvelet or wavCurv)"
            ))),
        }
    }
}

/// Per-coefficient non-negative weights aligned with the flattened
/// coefficient order.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    values: Vec<f64>,
}

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weights must be finite and non-negative, found {v}"
            )));
        }
        Ok(Self { values })
    }

    pub fn constant(len: usize, value: f64) -> Self {
        Self {
            values: vec![value; len],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Element-wise product.
    pub fn hadamard(&self, other: &WeightVector) -> Result<WeightVector> {
        if other.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(WeightVector {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn scaled(&self, factor: f64) -> WeightVector {
        WeightVector {
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Concrete dictionary for one grid shape.
#[derive(Clone, Debug)]
pub struct Dictionary {
    mode: DictMode,
    rows: usize,
    cols: usize,
    levels: usize,
    curvelet: Option<Arc<CurveletGeometry>>,
}

impl Dictionary {
    /// Build with explicit wavelet levels and curvelet geometry. The geometry
    /// is required (and must match the shape) whenever the mode uses curvelets.
    pub fn new(
        mode: DictMode,
        rows: usize,
        cols: usize,
        levels: usize,
        curvelet: Option<Arc<CurveletGeometry>>,
    ) -> Result<Self> {
        if mode.has_wavelet() {
            wavelet::wavelet_lowfreq_extent(rows, cols, levels)?;
        }
        let curvelet = if mode.has_curvelet() {
            let g = curvelet.ok_or_else(|| {
                Error::ModeMismatch(format!("{mode} dictionary needs a curvelet geometry"))
            })?;
            if g.shape() != (rows, cols) {
                return Err(Error::Geometry(format!(
                    "geometry built for {:?}, dictionary is {rows}x{cols}",
                    g.shape()
                )));
            }
            Some(g)
        } else {
            None
        };
        Ok(Self {
            mode,
            rows,
            cols,
            levels,
            curvelet,
        })
    }

    /// Default parameters: 4 wavelet levels (clamped to the shape) and the
    /// default curvelet geometry.
    pub fn with_defaults(mode: DictMode, rows: usize, cols: usize) -> Result<Self> {
        let levels = wavelet::admissible_levels(rows, cols, wavelet::DEFAULT_LEVELS)?;
        let geom = if mode.has_curvelet() {
            Some(CurveletGeometry::for_shape(rows, cols)?)
        } else {
            None
        };
        Self::new(mode, rows, cols, levels, geom)
    }

    pub fn mode(&self) -> DictMode {
        self.mode
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn geometry(&self) -> Option<&Arc<CurveletGeometry>> {
        self.curvelet.as_ref()
    }

    /// Same parameters, different mode (the geometry is kept when available).
    pub fn with_mode(&self, mode: DictMode) -> Result<Self> {
        let geom = match (&self.curvelet, mode.has_curvelet()) {
            (Some(g), true) => Some(g.clone()),
            (None, true) => Some(CurveletGeometry::for_shape(self.rows, self.cols)?),
            _ => None,
        };
        Self::new(mode, self.rows, self.cols, self.levels, geom)
    }

    pub fn wavelet_len(&self) -> usize {
        if self.mode.has_wavelet() {
            self.rows * self.cols
        } else {
            0
        }
    }

    pub fn curvelet_len(&self) -> usize {
        self.curvelet.as_ref().map_or(0, |g| g.coefficient_count())
    }

    /// Length of the flattened coefficient vector.
    pub fn len(&self) -> usize {
        self.wavelet_len() + self.curvelet_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `Psi x` on raw image data, flattened (wavelet block first).
    pub fn analyze(&self, image: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(image.len(), self.rows * self.cols);
        let s = self.mode.block_scale();
        let mut out = Vec::with_capacity(self.len());
        if self.mode.has_wavelet() {
            let mut w = image.to_vec();
            wavelet::forward_raw(&mut w, self.rows, self.cols, self.levels);
            out.extend(w.into_iter().map(|v| v * s));
        }
        if let Some(g) = &self.curvelet {
            let spec = fft::fft2_centered(image, self.rows, self.cols, FftDirection::Forward);
            out.extend(g.analyze_spectrum(&spec).into_iter().map(|v| v * s));
        }
        out
    }

    /// `Psi* y` on raw coefficient data.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let spec = self.synthesize_spectrum_curvelet(coeffs);
        let mut img = match spec {
            Some(s) => fft::fft2_centered(&s, self.rows, self.cols, FftDirection::Inverse),
            None => vec![Complex64::default(); self.rows * self.cols],
        };
        if let Some(w) = self.synthesize_wavelet(coeffs) {
            img.iter_mut().zip(w).for_each(|(a, b)| *a += b);
        }
        img
    }

    /// `F Psi* y` (centered spectrum) without a round trip through the image
    /// domain for the curvelet block.
    pub fn synthesize_to_spectrum(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut spec = self
            .synthesize_spectrum_curvelet(coeffs)
            .unwrap_or_else(|| vec![Complex64::default(); self.rows * self.cols]);
        if let Some(w) = self.synthesize_wavelet(coeffs) {
            let ws = fft::fft2_centered(&w, self.rows, self.cols, FftDirection::Forward);
            spec.iter_mut().zip(ws).for_each(|(a, b)| *a += b);
        }
        spec
    }

    /// `Psi F* k` from a centered spectrum.
    pub fn analyze_from_spectrum(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(spectrum.len(), self.rows * self.cols);
        let s = self.mode.block_scale();
        let mut out = Vec::with_capacity(self.len());
        if self.mode.has_wavelet() {
            let mut w = fft::fft2_centered(spectrum, self.rows, self.cols, FftDirection::Inverse);
            wavelet::forward_raw(&mut w, self.rows, self.cols, self.levels);
            out.extend(w.into_iter().map(|v| v * s));
        }
        if let Some(g) = &self.curvelet {
            out.extend(g.analyze_spectrum(spectrum).into_iter().map(|v| v * s));
        }
        out
    }

    fn synthesize_wavelet(&self, coeffs: &[Complex64]) -> Option<Vec<Complex64>> {
        assert_eq!(coeffs.len(), self.len());
        if !self.mode.has_wavelet() {
            return None;
        }
        let s = self.mode.block_scale();
        let mut w: Vec<Complex64> = coeffs[..self.wavelet_len()].iter().map(|v| v * s).collect();
        wavelet::inverse_raw(&mut w, self.rows, self.cols, self.levels);
        Some(w)
    }

    fn synthesize_spectrum_curvelet(&self, coeffs: &[Complex64]) -> Option<Vec<Complex64>> {
        assert_eq!(coeffs.len(), self.len());
        let g = self.curvelet.as_ref()?;
        let s = self.mode.block_scale();
        let block: Vec<Complex64> = coeffs[self.wavelet_len()..].iter().map(|v| v * s).collect();
        Some(g.synthesize_spectrum(&block))
    }

    /// Weights that are 0 on the wavelet approximation bin and the curvelet
    /// coarse tile, 1 elsewhere.
    pub fn lowfreq_weight_mask(&self) -> WeightVector {
        let mut values = vec![1.0; self.len()];
        if self.mode.has_wavelet() {
            let (h, w) = (self.rows >> self.levels, self.cols >> self.levels);
            for r in 0..h {
                for c in 0..w {
                    values[r * self.cols + c] = 0.0;
                }
            }
        }
        if let Some(g) = &self.curvelet {
            let start = self.wavelet_len();
            values[start..start + g.coarse_count()].fill(0.0);
        }
        WeightVector { values }
    }

    pub fn wavelet_lowfreq_extent(&self) -> Option<(usize, usize)> {
        self.mode
            .has_wavelet()
            .then(|| (self.rows >> self.levels, self.cols >> self.levels))
    }

    pub fn curvelet_lowfreq_extent(&self) -> Option<(usize, usize)> {
        self.curvelet.as_ref().map(|g| g.lowfreq_extent())
    }

    /// Size of the fully-sampled region the dictionary calls for: the
    /// element-wise larger of the active low-frequency regions.
    pub fn fsr_extent(&self) -> (usize, usize) {
        let a = self.wavelet_lowfreq_extent().unwrap_or((0, 0));
        let b = self.curvelet_lowfreq_extent().unwrap_or((0, 0));
        (a.0.max(b.0), a.1.max(b.1))
    }

    /// True when the blurry estimate should use the curvelet low-pass window
    /// (its region is larger than the wavelet approximation bin).
    pub fn uses_curvelet_window(&self) -> bool {
        match (self.curvelet_lowfreq_extent(), self.wavelet_lowfreq_extent()) {
            (Some(c), Some(w)) => c.0 > w.0 && c.1 > w.1,
            (Some(_), None) => true,
            _ => false,
        }
    }
}

/// Coefficients of one image under a dictionary.
#[derive(Clone, Debug)]
pub struct DictCoeffs {
    mode: DictMode,
    wavelet: Option<WaveletPyramid>,
    curvelet: Option<CurveletPyramid>,
}

impl DictCoeffs {
    pub fn mode(&self) -> DictMode {
        self.mode
    }

    pub fn wavelet(&self) -> Option<&WaveletPyramid> {
        self.wavelet.as_ref()
    }

    pub fn curvelet(&self) -> Option<&CurveletPyramid> {
        self.curvelet.as_ref()
    }

    pub fn len(&self) -> usize {
        self.wavelet.as_ref().map_or(0, |w| w.data().len())
            + self.curvelet.as_ref().map_or(0, |c| c.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Canonical flat ordering: wavelet block, then curvelet tiles.
    pub fn flatten(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.len());
        if let Some(w) = &self.wavelet {
            out.extend_from_slice(w.data());
        }
        if let Some(c) = &self.curvelet {
            out.extend_from_slice(c.data());
        }
        out
    }

    pub fn unflatten(dict: &Dictionary, flat: Vec<Complex64>) -> Result<Self> {
        if flat.len() != dict.len() {
            return Err(Error::LengthMismatch {
                expected: dict.len(),
                actual: flat.len(),
            });
        }
        let wl = dict.wavelet_len();
        let mut flat = flat;
        let curv = flat.split_off(wl);
        let wavelet = if dict.mode.has_wavelet() {
            Some(WaveletPyramid::new(dict.rows, dict.cols, dict.levels, flat)?)
        } else {
            None
        };
        let curvelet = match &dict.curvelet {
            Some(g) => Some(CurveletPyramid::new(g.clone(), curv)?),
            None => None,
        };
        Ok(Self {
            mode: dict.mode,
            wavelet,
            curvelet,
        })
    }
}

pub fn psi_forward(img: &ImageGrid, dict: &Dictionary) -> Result<DictCoeffs> {
    img.require_domain(Domain::Space)?;
    img.require_shape(dict.shape())?;
    DictCoeffs::unflatten(dict, dict.analyze(img.data()))
}

pub fn psi_adjoint(coeffs: &DictCoeffs, dict: &Dictionary) -> Result<ImageGrid> {
    if coeffs.mode != dict.mode {
        return Err(Error::ModeMismatch(format!(
            "coefficients are {} but the dictionary is {}",
            coeffs.mode, dict.mode
        )));
    }
    let flat = coeffs.flatten();
    if flat.len() != dict.len() {
        return Err(Error::LengthMismatch {
            expected: dict.len(),
            actual: flat.len(),
        });
    }
    ImageGrid::new(dict.rows, dict.cols, Domain::Space, dict.synthesize(&flat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvelet::{fdct_adjoint, fdct_forward};
    use crate::grid::{inner, l2_norm};
    use crate::wavelet::{ddwt4_forward, ddwt4_inverse};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn dict(mode: DictMode, n: usize) -> Dictionary {
        let g = CurveletGeometry::new(n, n, 3, 8).unwrap();
        Dictionary::new(mode, n, n, 3, Some(g)).unwrap()
    }

    fn diff_norm(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn parseval_round_trip_and_adjoint_in_all_modes() {
        for mode in DictMode::ALL {
            let d = dict(mode, 64);
            let x = ImageGrid::new(64, 64, Domain::Space, random_vec(64 * 64, 1)).unwrap();
            let c = psi_forward(&x, &d).unwrap();
            assert_eq!(c.len(), d.len());
            assert!((l2_norm(&c.flatten()) / x.norm() - 1.0).abs() < 1e-10, "{mode}");
            let back = psi_adjoint(&c, &d).unwrap();
            assert!(diff_norm(back.data(), x.data()) / x.norm() < 1e-10, "{mode}");

            let y = random_vec(d.len(), 2);
            let lhs = inner(&c.flatten(), &y);
            let rhs = inner(x.data(), &d.synthesize(&y));
            assert!((lhs - rhs).norm() / lhs.norm() < 1e-10, "{mode}");

            // spectral fast paths agree with the image-domain ones
            let spec = crate::grid::dft2_unitary(&ImageGrid::new(64, 64, Domain::Space, d.synthesize(&y)).unwrap()).unwrap();
            assert!(diff_norm(&d.synthesize_to_spectrum(&y), spec.data()) / spec.norm() < 1e-12);
            let kx = crate::grid::dft2_unitary(&x).unwrap();
            assert!(diff_norm(&d.analyze_from_spectrum(kx.data()), &c.flatten()) / x.norm() < 1e-12);
        }
    }

    #[test]
    fn stacked_blocks_match_independent_transforms() {
        let d = dict(DictMode::WavCurv, 32);
        let x = ImageGrid::new(32, 32, Domain::Space, random_vec(32 * 32, 3)).unwrap();
        let c = psi_forward(&x, &d).unwrap();
        let w = ddwt4_forward(&x, 3).unwrap();
        let cv = fdct_forward(&x, d.geometry().unwrap()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (a, b) in c.wavelet().unwrap().data().iter().zip(w.data()) {
            assert!((a - b * s).norm() < 1e-12);
        }
        for (a, b) in c.curvelet().unwrap().data().iter().zip(cv.data()) {
            assert!((a - b * s).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_image_has_zero_coefficients() {
        let d = dict(DictMode::WavCurv, 32);
        let c = psi_forward(&ImageGrid::zeros(32, 32, Domain::Space), &d).unwrap();
        assert!(c.flatten().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn wavelet_plus_curvelet_atom_needs_two_coefficients() {
        let d = dict(DictMode::WavCurv, 32);
        let g = d.geometry().unwrap().clone();
        let (i, j) = (5 * 32 + 20, g.coarse_count() + 40);
        let mut e_w = vec![Complex64::default(); 32 * 32];
        e_w[i] = Complex64::new(1.0, 0.0);
        let w_atom = ddwt4_inverse(&WaveletPyramid::new(32, 32, 3, e_w).unwrap());
        let mut e_c = vec![Complex64::default(); g.coefficient_count()];
        e_c[j] = Complex64::new(1.0, 0.0);
        let c_atom = fdct_adjoint(&CurveletPyramid::new(g.clone(), e_c).unwrap(), &g).unwrap();
        let v = w_atom.add(&c_atom).unwrap();

        let mut y = vec![Complex64::default(); d.len()];
        y[i] = Complex64::new(2f64.sqrt(), 0.0);
        y[d.wavelet_len() + j] = Complex64::new(2f64.sqrt(), 0.0);
        assert_eq!(y.iter().filter(|v| v.norm() > 0.0).count(), 2);
        let rec = d.synthesize(&y);
        assert!(diff_norm(&rec, v.data()) < 1e-10);
    }

    #[test]
    fn weight_mask_zero_counts() {
        let g = CurveletGeometry::new(256, 256, 4, 16).unwrap();
        let w = Dictionary::new(DictMode::Wavelet, 256, 256, 4, None).unwrap();
        let zeros = |d: &Dictionary| d.lowfreq_weight_mask().values().iter().filter(|v| **v == 0.0).count();
        assert_eq!(zeros(&w), 256);
        let wc = Dictionary::new(DictMode::WavCurv, 256, 256, 4, Some(g.clone())).unwrap();
        assert_eq!(zeros(&wc), 256 + g.coarse_count());
        let c = Dictionary::new(DictMode::Curvelet, 256, 256, 4, Some(g.clone())).unwrap();
        assert_eq!(zeros(&c), g.coarse_count());
    }

    #[test]
    fn fsr_extent_rule() {
        let g = CurveletGeometry::new(256, 256, 4, 16).unwrap();
        let w = Dictionary::new(DictMode::Wavelet, 256, 256, 4, None).unwrap();
        assert_eq!(w.fsr_extent(), (16, 16));
        assert!(!w.uses_curvelet_window());
        let wc = Dictionary::new(DictMode::WavCurv, 256, 256, 4, Some(g.clone())).unwrap();
        assert_eq!(wc.fsr_extent(), (32, 32));
        assert!(wc.uses_curvelet_window());
        let c = Dictionary::new(DictMode::Curvelet, 256, 256, 4, Some(g.clone())).unwrap();
        assert_eq!(c.fsr_extent(), g.lowfreq_extent());
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let d = dict(DictMode::WavCurv, 32);
        let w = dict(DictMode::Wavelet, 32);
        let c = psi_forward(&ImageGrid::zeros(32, 32, Domain::Space), &w).unwrap();
        assert!(matches!(psi_adjoint(&c, &d), Err(Error::ModeMismatch(_))));
        assert!(Dictionary::new(DictMode::Curvelet, 32, 32, 3, None).is_err());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("wavCurv".parse::<DictMode>().unwrap(), DictMode::WavCurv);
        assert_eq!("wavelet".parse::<DictMode>().unwrap(), DictMode::Wavelet);
        assert!("haar".parse::<DictMode>().is_err());
    }
}
