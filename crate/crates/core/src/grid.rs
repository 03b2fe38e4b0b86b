//! Image and k-space containers, the unitary centered DFT, sampling masks and
//! measurement vectors.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;

/// Which domain a grid lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Space,
    Frequency,
}

/// Row-major 2-D grid of complex samples tagged with its domain.
///
/// Frequency grids are centered: zero frequency sits at `(rows / 2, cols / 2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid {
    rows: usize,
    cols: usize,
    domain: Domain,
    data: Vec<Complex64>,
}

impl ImageGrid {
    pub fn new(rows: usize, cols: usize, domain: Domain, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            domain,
            data,
        })
    }

    pub fn zeros(rows: usize, cols: usize, domain: Domain) -> Self {
        assert!(rows > 0 && cols > 0, "grid dimensions must be positive");
        Self {
            rows,
            cols,
            domain,
            data: vec![Complex64::default(); rows * cols],
        }
    }

    /// Spatial grid from real intensities (imaginary parts zero).
    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        Self::new(
            rows,
            cols,
            Domain::Space,
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.data)
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.norm()).collect()
    }

    pub fn require_domain(&self, expected: Domain) -> Result<()> {
        if self.domain != expected {
            return Err(Error::DomainMismatch {
                expected,
                actual: self.domain,
            });
        }
        Ok(())
    }

    pub fn require_shape(&self, expected: (usize, usize)) -> Result<()> {
        if self.shape() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: self.shape(),
            });
        }
        Ok(())
    }

    /// Element-wise `self + other`; both grids must share shape and domain.
    pub fn add(&self, other: &ImageGrid) -> Result<ImageGrid> {
        other.require_shape(self.shape())?;
        other.require_domain(self.domain)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        ImageGrid::new(self.rows, self.cols, self.domain, data)
    }

    /// Element-wise `self - other`; both grids must share shape and domain.
    pub fn sub(&self, other: &ImageGrid) -> Result<ImageGrid> {
        other.require_shape(self.shape())?;
        other.require_domain(self.domain)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        ImageGrid::new(self.rows, self.cols, self.domain, data)
    }
}

pub(crate) fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Real inner product `Re <a, b>` used throughout for adjoint tests.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Unitary centered DFT, space to frequency.
pub fn dft2_unitary(img: &ImageGrid) -> Result<ImageGrid> {
    img.require_domain(Domain::Space)?;
    let data = fft::fft2_centered(&img.data, img.rows, img.cols, FftDirection::Forward);
    ImageGrid::new(img.rows, img.cols, Domain::Frequency, data)
}

/// Unitary centered inverse DFT, frequency to space.
pub fn idft2_unitary(ksp: &ImageGrid) -> Result<ImageGrid> {
    ksp.require_domain(Domain::Frequency)?;
    let data = fft::fft2_centered(&ksp.data, ksp.rows, ksp.cols, FftDirection::Inverse);
    ImageGrid::new(ksp.rows, ksp.cols, Domain::Space, data)
}

/// Index range of a centered extent `len` on an axis of length `n`.
pub fn centered_range(n: usize, len: usize) -> std::ops::Range<usize> {
    let start = n / 2 - len / 2;
    start..start + len
}

/// Boolean grid of collected Fourier locations, optionally carrying the size
/// of its fully-sampled center region (FSR).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleMask {
    rows: usize,
    cols: usize,
    flags: Vec<bool>,
    fsr: Option<(usize, usize)>,
}

impl SampleMask {
    pub fn new(rows: usize, cols: usize, flags: Vec<bool>, fsr: Option<(usize, usize)>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("mask dimensions must be positive".into()));
        }
        if flags.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: flags.len(),
            });
        }
        if !flags.iter().any(|&f| f) {
            return Err(Error::EmptyMask);
        }
        let mask = Self {
            rows,
            cols,
            flags,
            fsr,
        };
        if let Some((h, w)) = fsr {
            if h > rows || w > cols || h == 0 || w == 0 {
                return Err(Error::InvalidArgument(format!(
                    "fully-sampled region {h}x{w} does not fit a {rows}x{cols} grid"
                )));
            }
            if !mask.fsr_cells(h, w).all(|i| mask.flags[i]) {
                return Err(Error::InvalidArgument(format!(
                    "mask does not sample its whole {h}x{w} center region"
                )));
            }
        }
        Ok(mask)
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            flags: vec![true; rows * cols],
            fsr: Some((rows, cols)),
        }
    }

    /// Mask that samples exactly a centered rectangle.
    pub fn center(rows: usize, cols: usize, extent: (usize, usize)) -> Result<Self> {
        let mut flags = vec![false; rows * cols];
        for r in centered_range(rows, extent.0) {
            for c in centered_range(cols, extent.1) {
                flags[r * cols + c] = true;
            }
        }
        Self::new(rows, cols, flags, Some(extent))
    }

    pub(crate) fn fsr_cells(&self, h: usize, w: usize) -> impl Iterator<Item = usize> + '_ {
        let cols = self.cols;
        centered_range(self.rows, h)
            .flat_map(move |r| centered_range(cols, w).map(move |c| r * cols + c))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn fsr(&self) -> Option<(usize, usize)> {
        self.fsr
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.flags.len() as f64
    }

    pub fn is_sampled(&self, r: usize, c: usize) -> bool {
        self.flags[r * self.cols + c]
    }

    /// Row-major indices of sampled cells (the canonical measurement order).
    pub fn indices(&self) -> Vec<usize> {
        self.flags
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
            .collect()
    }

    /// Same flags with the FSR annotation dropped.
    pub fn without_fsr(&self) -> Self {
        Self {
            fsr: None,
            ..self.clone()
        }
    }

    /// True when the FSR covers `extent` in both directions.
    pub fn fsr_covers(&self, extent: (usize, usize)) -> bool {
        matches!(self.fsr, Some((h, w)) if h >= extent.0 && w >= extent.1)
    }
}

/// Measured Fourier values in canonical (row-major over sampled cells) order.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurements {
    mask: SampleMask,
    values: Vec<Complex64>,
}

impl Measurements {
    pub fn new(mask: SampleMask, values: Vec<Complex64>) -> Result<Self> {
        let n = mask.count();
        if values.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: values.len(),
            });
        }
        Ok(Self { mask, values })
    }

    pub fn mask(&self) -> &SampleMask {
        &self.mask
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mask.shape()
    }

    /// Put the measured values back on a k-space grid, zeros elsewhere.
    pub fn embed(&self) -> ImageGrid {
        let (rows, cols) = self.mask.shape();
        let mut data = vec![Complex64::default(); rows * cols];
        for (idx, v) in self.mask.indices().into_iter().zip(&self.values) {
            data[idx] = *v;
        }
        ImageGrid {
            rows,
            cols,
            domain: Domain::Frequency,
            data,
        }
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }
}

/// Values of `ksp` at the sampled cells of `mask`.
pub fn sample(ksp: &ImageGrid, mask: &SampleMask) -> Result<Measurements> {
    ksp.require_domain(Domain::Frequency)?;
    ksp.require_shape(mask.shape())?;
    let values = mask.indices().into_iter().map(|i| ksp.data[i]).collect();
    Measurements::new(mask.clone(), values)
}

/// Zero-filled reconstruction: unsampled cells set to zero, then inverse DFT.
pub fn zero_fill(meas: &Measurements) -> ImageGrid {
    idft2_unitary(&meas.embed()).expect("embedded measurements are in the frequency domain")
}

/// Add i.i.d. complex Gaussian noise with total variance `sigma^2` per sample.
pub fn add_noise(meas: &Measurements, sigma: f64, seed: u64) -> Result<Measurements> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise sigma must be a finite non-negative number, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(meas.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma / std::f64::consts::SQRT_2)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let values = meas
        .values
        .iter()
        .map(|v| v + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect();
    Measurements::new(meas.mask.clone(), values)
}
