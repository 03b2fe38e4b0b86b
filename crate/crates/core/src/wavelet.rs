//! Orthogonal multilevel Daubechies-4 wavelet transform with periodic
//! boundaries, operating on complex grids.
//!
//! Coefficients use the usual quadrant layout: after each level the
//! approximation block sits top-left and the three detail bands fill the
//! remaining quadrants; the next level recurses into the approximation block.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Domain, ImageGrid};

pub const DEFAULT_LEVELS: usize = 4;

/// D4 analysis low-pass filter, unit l2 norm.
pub fn d4_lowpass() -> [f64; 4] {
    let s3 = 3f64.sqrt();
    let d = 4.0 * 2f64.sqrt();
    [(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d]
}

/// Quadrature-mirror high-pass `g[k] = (-1)^k h[3 - k]`.
pub fn d4_highpass() -> [f64; 4] {
    let h = d4_lowpass();
    [h[3], -h[2], h[1], -h[0]]
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaveletPyramid {
    rows: usize,
    cols: usize,
    levels: usize,
    data: Vec<Complex64>,
}

impl WaveletPyramid {
    pub fn new(rows: usize, cols: usize, levels: usize, data: Vec<Complex64>) -> Result<Self> {
        check_divisible(rows, cols, levels)?;
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            levels,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    /// Whether coefficient `idx` (row-major) lies in the approximation bin.
    pub fn is_lowpass(&self, idx: usize) -> bool {
        let (h, w) = (self.rows >> self.levels, self.cols >> self.levels);
        idx / self.cols < h && idx % self.cols < w
    }
}

fn check_divisible(rows: usize, cols: usize, levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::InvalidArgument("wavelet levels must be at least 1".into()));
    }
    let block = 1usize
        .checked_shl(levels as u32)
        .ok_or_else(|| Error::InvalidArgument(format!("{levels} levels is too many")))?;
    if rows == 0 || cols == 0 || rows % block != 0 || cols % block != 0 {
        return Err(Error::InvalidArgument(format!(
            "{rows}x{cols} is not divisible by 2^{levels}"
        )));
    }
    Ok(())
}

/// Largest level count the dimensions admit.
pub fn max_levels(rows: usize, cols: usize) -> usize {
    let mut l = 0;
    while l < 30 && (rows >> l) % 2 == 0 && (cols >> l) % 2 == 0 && rows >> l > 1 && cols >> l > 1 {
        l += 1;
    }
    l
}

/// `requested` clamped to what the shape admits, warning when clamped.
pub fn admissible_levels(rows: usize, cols: usize, requested: usize) -> Result<usize> {
    let max = max_levels(rows, cols);
    if max == 0 {
        return Err(Error::InvalidArgument(format!(
            "{rows}x{cols} admits no wavelet level"
        )));
    }
    if requested > max {
        log::warn!("clamping wavelet levels from {requested} to {max} for a {rows}x{cols} grid");
        return Ok(max);
    }
    Ok(requested.max(1))
}

/// Extent of the lowest-frequency (approximation) bin.
pub fn wavelet_lowfreq_extent(rows: usize, cols: usize, levels: usize) -> Result<(usize, usize)> {
    check_divisible(rows, cols, levels)?;
    Ok((rows >> levels, cols >> levels))
}

fn analyze(src: &[Complex64], dst: &mut [Complex64]) {
    let n = src.len();
    let half = n / 2;
    let (h, g) = (d4_lowpass(), d4_highpass());
    for i in 0..half {
        let mut a = Complex64::default();
        let mut d = Complex64::default();
        for k in 0..4 {
            let x = src[(2 * i + k) % n];
            a += x * h[k];
            d += x * g[k];
        }
        dst[i] = a;
        dst[half + i] = d;
    }
}

fn synthesize(src: &[Complex64], dst: &mut [Complex64]) {
    let n = src.len();
    let half = n / 2;
    let (h, g) = (d4_lowpass(), d4_highpass());
    dst.iter_mut().for_each(|v| *v = Complex64::default());
    for i in 0..half {
        let a = src[i];
        let d = src[half + i];
        for k in 0..4 {
            dst[(2 * i + k) % n] += a * h[k] + d * g[k];
        }
    }
}

/// Apply `step` to every row and column of the top-left `h x w` block.
fn block_pass(
    data: &mut [Complex64],
    stride: usize,
    h: usize,
    w: usize,
    step: fn(&[Complex64], &mut [Complex64]),
    rows_first: bool,
) {
    let mut src = vec![Complex64::default(); h.max(w)];
    let mut dst = vec![Complex64::default(); h.max(w)];
    let mut rows_pass = |data: &mut [Complex64]| {
        for r in 0..h {
            let row = &mut data[r * stride..r * stride + w];
            src[..w].copy_from_slice(row);
            step(&src[..w], &mut dst[..w]);
            row.copy_from_slice(&dst[..w]);
        }
    };
    let mut src_c = vec![Complex64::default(); h];
    let mut dst_c = vec![Complex64::default(); h];
    let mut cols_pass = |data: &mut [Complex64]| {
        for c in 0..w {
            for r in 0..h {
                src_c[r] = data[r * stride + c];
            }
            step(&src_c, &mut dst_c);
            for r in 0..h {
                data[r * stride + c] = dst_c[r];
            }
        }
    };
    if rows_first {
        rows_pass(data);
        cols_pass(data);
    } else {
        cols_pass(data);
        rows_pass(data);
    }
}

pub(crate) fn forward_raw(data: &mut [Complex64], rows: usize, cols: usize, levels: usize) {
    for l in 0..levels {
        block_pass(data, cols, rows >> l, cols >> l, analyze, true);
    }
}

pub(crate) fn inverse_raw(data: &mut [Complex64], rows: usize, cols: usize, levels: usize) {
    for l in (0..levels).rev() {
        block_pass(data, cols, rows >> l, cols >> l, synthesize, false);
    }
}

/// Forward DDWT-4 of a spatial image.
pub fn ddwt4_forward(img: &ImageGrid, levels: usize) -> Result<WaveletPyramid> {
    img.require_domain(Domain::Space)?;
    let (rows, cols) = img.shape();
    check_divisible(rows, cols, levels)?;
    let mut data = img.data().to_vec();
    forward_raw(&mut data, rows, cols, levels);
    WaveletPyramid::new(rows, cols, levels, data)
}

/// Inverse DDWT-4; equal to the adjoint since the transform is orthogonal.
pub fn ddwt4_inverse(pyr: &WaveletPyramid) -> ImageGrid {
    let mut data = pyr.data.clone();
    inverse_raw(&mut data, pyr.rows, pyr.cols, pyr.levels);
    ImageGrid::new(pyr.rows, pyr.cols, Domain::Space, data).expect("pyramid shape is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner, l2_norm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..rows * cols)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    /// Dense one-level analysis matrix of size (n, n) built from the filter taps.
    fn analysis_matrix(n: usize) -> Vec<Vec<f64>> {
        let (h, g) = (d4_lowpass(), d4_highpass());
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n / 2 {
            for k in 0..4 {
                m[i][(2 * i + k) % n] += h[k];
                m[n / 2 + i][(2 * i + k) % n] += g[k];
            }
        }
        m
    }

    #[test]
    fn filter_is_orthonormal() {
        let h = d4_lowpass();
        let g = d4_highpass();
        let hh: f64 = h.iter().map(|v| v * v).sum();
        let hg: f64 = h.iter().zip(&g).map(|(a, b)| a * b).sum();
        let shifted: f64 = h[2] * h[0] + h[3] * h[1];
        assert!((hh - 1.0).abs() < 1e-15);
        assert!(hg.abs() < 1e-15);
        assert!(shifted.abs() < 1e-15);
    }

    #[test]
    fn one_level_matches_dense_kronecker_oracle() {
        let n = 8;
        let x = random(n, n, 1);
        let a = analysis_matrix(n);
        // rows then columns: Y = A X A^T
        let mut tmp = vec![Complex64::default(); n * n];
        for r in 0..n {
            for c in 0..n {
                tmp[r * n + c] = (0..n).map(|k| x[r * n + k] * a[c][k]).sum();
            }
        }
        let mut expect = vec![Complex64::default(); n * n];
        for r in 0..n {
            for c in 0..n {
                expect[r * n + c] = (0..n).map(|k| a[r][k] * tmp[k * n + c]).sum();
            }
        }
        let img = ImageGrid::new(n, n, Domain::Space, x.clone()).unwrap();
        let pyr = ddwt4_forward(&img, 1).unwrap();
        for (u, v) in pyr.data().iter().zip(&expect) {
            assert!((u - v).norm() < 1e-12);
        }
        // the dense inverse is A^T Y A
        let back = ddwt4_inverse(&pyr);
        for (u, v) in back.data().iter().zip(&x) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn orthogonality_and_adjoint() {
        for &(rows, cols, levels) in &[(32, 32, 4), (64, 64, 4), (16, 48, 3), (64, 32, 5)] {
            let x = random(rows, cols, rows as u64 + levels as u64);
            let img = ImageGrid::new(rows, cols, Domain::Space, x.clone()).unwrap();
            let w = ddwt4_forward(&img, levels).unwrap();
            assert!((l2_norm(w.data()) / l2_norm(&x) - 1.0).abs() < 1e-12);
            let back = ddwt4_inverse(&w);
            let err: f64 = back
                .data()
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(err / l2_norm(&x) < 1e-12);

            let y = WaveletPyramid::new(rows, cols, levels, random(rows, cols, 99)).unwrap();
            let lhs = inner(w.data(), y.data());
            let rhs = inner(&x, ddwt4_inverse(&y).data());
            assert!((lhs - rhs).norm() / lhs.norm() < 1e-12);
        }
    }

    #[test]
    fn zero_image_gives_zero_pyramid() {
        let img = ImageGrid::zeros(16, 16, Domain::Space);
        assert!(ddwt4_forward(&img, 2).unwrap().data().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn lowfreq_extent_and_divisibility() {
        assert_eq!(wavelet_lowfreq_extent(256, 256, 4).unwrap(), (16, 16));
        assert_eq!(wavelet_lowfreq_extent(320, 320, 4).unwrap(), (20, 20));
        assert_eq!(wavelet_lowfreq_extent(256, 512, 4).unwrap(), (16, 32));
        assert!(wavelet_lowfreq_extent(100, 100, 3).is_err());
        let img = ImageGrid::zeros(24, 24, Domain::Space);
        assert!(ddwt4_forward(&img, 4).is_err());
        assert_eq!(admissible_levels(24, 24, 4).unwrap(), 3);
        assert_eq!(admissible_levels(256, 256, 4).unwrap(), 4);
    }

    #[test]
    fn constant_image_lives_in_approximation_bin() {
        let img = ImageGrid::from_real(32, 32, &vec![1.0; 1024]).unwrap();
        let w = ddwt4_forward(&img, 3).unwrap();
        for (i, v) in w.data().iter().enumerate() {
            if !w.is_lowpass(i) {
                assert!(v.norm() < 1e-12);
            }
        }
    }
}
