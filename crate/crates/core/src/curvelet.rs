//! Fast discrete curvelet transform via wrapping.
//!
//! The centered spectrum is multiplied by a family of smooth frequency windows
//! (one isotropic low-pass, angular wedges on the intermediate dyadic coronae
//! and an isotropic high-pass at the finest scale), each windowed spectrum is
//! wrapped onto a rectangle that contains the window's support, and a unitary
//! inverse FFT of that rectangle gives the coefficient tile.
//!
//! The squared windows sum to one at every frequency, and wrapping is
//! injective on each window's support, so the transform is a Parseval tight
//! frame: the adjoint is the inverse.
//!
//! Radial profile: `phi(t) = 1` for `t <= 1`, `0` for `t >= 2`, and
//! `cos(pi/2 * nu(t - 1))` in between, with the Meyer polynomial
//! `nu(x) = x^4 (35 - 84x + 70x^2 - 20x^3)`. The low-pass at scale `j` is
//! `phi(|k1| / (rho_j N1)) * phi(|k2| / (rho_j N2))` with
//! `rho_j = 2^-(nscales + 1 - j)`; corona `j` is `sqrt(Phi_j^2 - Phi_{j-1}^2)`.
//! Angular windows live on a pseudo-polar angle `s` in `[-1, 7)` that runs
//! once around the square (east cone `[-1, 1]`, north `[1, 3]`, ...), cut into
//! equal arcs with Meyer transitions of a quarter arc on each side.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftDirection;

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::{Domain, ImageGrid};
use crate::par;

pub const DEFAULT_NANGLES_COARSE: usize = 16;

/// Meyer transition polynomial, clamped to `[0, 1]`.
pub fn meyer_nu(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x.powi(4) * (35.0 - 84.0 * x + 70.0 * x * x - 20.0 * x.powi(3))
}

/// Radial low-pass profile.
pub fn radial_profile(t: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else if t >= 2.0 {
        0.0
    } else {
        (FRAC_PI_2 * meyer_nu(t - 1.0)).cos()
    }
}

/// Pseudo-polar angle of `(horizontal, vertical)` frequency, in `[-1, 7)`.
pub fn pseudo_angle(h: f64, v: f64) -> f64 {
    if h == 0.0 && v == 0.0 {
        return 0.0;
    }
    let s = if v.abs() <= h {
        v / h
    } else if h.abs() <= v {
        2.0 - h / v
    } else if v.abs() <= -h {
        4.0 + v / h
    } else {
        6.0 - h / v
    };
    if s >= 7.0 {
        s - 8.0
    } else {
        s
    }
}

/// Default number of scales for a grid, following the usual
/// `ceil(log2(min(rows, cols))) - 3` rule (at least 2).
pub fn default_nscales(rows: usize, cols: usize) -> usize {
    let m = rows.min(cols).max(1) as f64;
    (m.log2().ceil() as i64 - 3).max(2) as usize
}

#[derive(Clone, Debug)]
struct Wedge {
    scale: usize,
    angle: usize,
    tile_rows: usize,
    tile_cols: usize,
    offset: usize,
    /// (grid index, tile index, window value) over the window's support.
    support: Vec<(u32, u32, f64)>,
}

/// Descriptor of one coefficient tile.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TileInfo {
    pub scale: usize,
    pub angle: usize,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

/// Window layout for one grid shape. Build once and share.
#[derive(Clone, Debug)]
pub struct CurveletGeometry {
    rows: usize,
    cols: usize,
    nscales: usize,
    nangles_coarse: usize,
    angles: Vec<usize>,
    wedges: Vec<Wedge>,
    total: usize,
}

impl CurveletGeometry {
    /// Geometry with default scale and angle counts.
    pub fn for_shape(rows: usize, cols: usize) -> Result<Arc<Self>> {
        Self::new(rows, cols, default_nscales(rows, cols), DEFAULT_NANGLES_COARSE)
    }

    pub fn new(rows: usize, cols: usize, nscales: usize, nangles_coarse: usize) -> Result<Arc<Self>> {
        if nscales < 2 {
            return Err(Error::Geometry(format!("need at least 2 scales, got {nscales}")));
        }
        if nangles_coarse < 4 || nangles_coarse % 4 != 0 {
            return Err(Error::Geometry(format!(
                "coarse angle count must be a positive multiple of 4, got {nangles_coarse}"
            )));
        }
        if nscales >= 30 || rows < (1 << nscales) || cols < (1 << nscales) {
            return Err(Error::Geometry(format!(
                "{rows}x{cols} is too small for {nscales} scales (need at least {0}x{0})",
                1usize << nscales.min(29)
            )));
        }

        let mut angles = vec![1usize; nscales];
        for (j, a) in angles.iter_mut().enumerate().take(nscales - 1).skip(1) {
            *a = nangles_coarse << ((j - 1).div_ceil(2));
        }

        let mut geom = Self {
            rows,
            cols,
            nscales,
            nangles_coarse,
            angles,
            wedges: Vec::new(),
            total: 0,
        };

        let n = rows * cols;
        // squared low-pass per scale; the finest "low-pass" is identically 1
        let lowpass_sq: Vec<Vec<f64>> = (0..nscales)
            .map(|j| (0..n).map(|i| geom.lowpass_at(j, i).powi(2)).collect())
            .collect();

        let mut wedges = Vec::new();
        let coarse: Vec<(usize, f64)> = (0..n)
            .filter_map(|i| {
                let w = lowpass_sq[0][i].sqrt();
                (w > 0.0).then_some((i, w))
            })
            .collect();
        wedges.push(geom.make_wedge(0, 0, &coarse)?);

        for j in 1..nscales {
            let corona: Vec<(usize, f64)> = (0..n)
                .filter_map(|i| {
                    let w2 = lowpass_sq[j][i] - lowpass_sq[j - 1][i];
                    (w2 > 0.0).then(|| (i, w2.sqrt()))
                })
                .collect();
            let nang = geom.angles[j];
            if nang == 1 {
                wedges.push(geom.make_wedge(j, 0, &corona)?);
                continue;
            }
            let with_angle: Vec<(usize, f64, f64)> = corona
                .iter()
                .map(|&(i, w)| {
                    let (h, v) = geom.normalized(i);
                    (i, w, pseudo_angle(h, v))
                })
                .collect();
            for l in 0..nang {
                let cells: Vec<(usize, f64)> = with_angle
                    .iter()
                    .filter_map(|&(i, w, s)| {
                        let a = angular_window(s, l, nang);
                        (a > 0.0).then_some((i, w * a))
                    })
                    .collect();
                wedges.push(geom.make_wedge(j, l, &cells)?);
            }
        }

        let mut offset = 0;
        for w in &mut wedges {
            w.offset = offset;
            offset += w.tile_rows * w.tile_cols;
        }
        geom.total = offset;
        geom.wedges = wedges;
        Ok(Arc::new(geom))
    }

    /// Frequency of grid index `i` normalized per axis: (horizontal, vertical).
    fn normalized(&self, i: usize) -> (f64, f64) {
        let k1 = fft::centered_coord(i / self.cols, self.rows) as f64;
        let k2 = fft::centered_coord(i % self.cols, self.cols) as f64;
        (k2 / self.cols as f64, k1 / self.rows as f64)
    }

    fn rho(&self, scale: usize) -> f64 {
        (2f64).powi(-((self.nscales + 1 - scale) as i32))
    }

    fn lowpass_at(&self, scale: usize, i: usize) -> f64 {
        if scale + 1 >= self.nscales {
            return 1.0;
        }
        let (h, v) = self.normalized(i);
        let r = self.rho(scale);
        radial_profile(h.abs() / r) * radial_profile(v.abs() / r)
    }

    fn make_wedge(&self, scale: usize, angle: usize, cells: &[(usize, f64)]) -> Result<Wedge> {
        if cells.is_empty() {
            return Err(Error::Geometry(format!(
                "window (scale {scale}, angle {angle}) has empty support on a {}x{} grid",
                self.rows, self.cols
            )));
        }
        let coords = |i: usize| {
            (
                fft::centered_coord(i / self.cols, self.rows),
                fft::centered_coord(i % self.cols, self.cols),
            )
        };
        let (mut r0, mut r1, mut c0, mut c1) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
        for &(i, _) in cells {
            let (a, b) = coords(i);
            r0 = r0.min(a);
            r1 = r1.max(a);
            c0 = c0.min(b);
            c1 = c1.max(b);
        }
        let tile_rows = (r1 - r0 + 1) as usize;
        let tile_cols = (c1 - c0 + 1) as usize;
        let support = cells
            .iter()
            .map(|&(i, w)| {
                let (a, b) = coords(i);
                let tr = a.rem_euclid(tile_rows as i64) as usize;
                let tc = b.rem_euclid(tile_cols as i64) as usize;
                (i as u32, (tr * tile_cols + tc) as u32, w)
            })
            .collect();
        Ok(Wedge {
            scale,
            angle,
            tile_rows,
            tile_cols,
            offset: 0,
            support,
        })
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

    pub fn nscales(&self) -> usize {
        self.nscales
    }

    pub fn nangles_coarse(&self) -> usize {
        self.nangles_coarse
    }

    /// Number of angular windows at each scale (1 for the isotropic ones).
    pub fn angles_per_scale(&self) -> &[usize] {
        &self.angles
    }

    /// Total coefficient count across all tiles.
    pub fn coefficient_count(&self) -> usize {
        self.total
    }

    pub fn tiles(&self) -> Vec<TileInfo> {
        self.wedges
            .iter()
            .map(|w| TileInfo {
                scale: w.scale,
                angle: w.angle,
                rows: w.tile_rows,
                cols: w.tile_cols,
                offset: w.offset,
            })
            .collect()
    }

    /// Number of coefficients in the coarse (isotropic low-pass) tile; they
    /// occupy the first positions of the flattened coefficient vector.
    pub fn coarse_count(&self) -> usize {
        self.wedges[0].tile_rows * self.wedges[0].tile_cols
    }

    /// Coarse low-pass window value at a grid cell.
    pub fn coarse_window(&self, r: usize, c: usize) -> f64 {
        self.lowpass_at(0, r * self.cols + c)
    }

    /// Centered extent of the coarse window's frequency support.
    pub fn lowfreq_extent(&self) -> (usize, usize) {
        let r = self.rho(0);
        let e = |n: usize| (2 * (2.0 * r * n as f64).ceil() as usize).min(n);
        (e(self.rows), e(self.cols))
    }

    /// Sum of squared windows at every grid cell; identically one for a
    /// tight frame.
    pub fn window_energy(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.rows * self.cols];
        for w in &self.wedges {
            for &(i, _, v) in &w.support {
                acc[i as usize] += v * v;
            }
        }
        acc
    }

    fn check_shape(&self, rows: usize, cols: usize) -> Result<()> {
        if (rows, cols) != (self.rows, self.cols) {
            return Err(Error::Geometry(format!(
                "geometry built for {}x{}, grid is {rows}x{cols}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    /// Curvelet coefficients from a centered spectrum.
    pub fn analyze_spectrum(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(spectrum.len(), self.rows * self.cols);
        let tiles = par::map(&self.wedges, |w| {
            let mut tile = vec![Complex64::default(); w.tile_rows * w.tile_cols];
            for &(gi, ti, v) in &w.support {
                tile[ti as usize] = spectrum[gi as usize] * v;
            }
            fft::fft2_unitary(&mut tile, w.tile_rows, w.tile_cols, FftDirection::Inverse);
            tile
        });
        let mut out = Vec::with_capacity(self.total);
        for t in tiles {
            out.extend_from_slice(&t);
        }
        out
    }

    /// Adjoint of [`Self::analyze_spectrum`]: centered spectrum from coefficients.
    pub fn synthesize_spectrum(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(coeffs.len(), self.total);
        let spectra = par::map(&self.wedges, |w| {
            let mut tile = coeffs[w.offset..w.offset + w.tile_rows * w.tile_cols].to_vec();
            fft::fft2_unitary(&mut tile, w.tile_rows, w.tile_cols, FftDirection::Forward);
            tile
        });
        let mut out = vec![Complex64::default(); self.rows * self.cols];
        for (w, tile) in self.wedges.iter().zip(&spectra) {
            for &(gi, ti, v) in &w.support {
                out[gi as usize] += tile[ti as usize] * v;
            }
        }
        out
    }
}

/// Angular window `l` of `n` at pseudo-angle `s`.
fn angular_window(s: f64, l: usize, n: usize) -> f64 {
    let arc = 8.0 / n as f64;
    let delta = arc / 4.0;
    let start = -1.0 + l as f64 * arc;
    let u = (s - start + delta).rem_euclid(8.0);
    if u < 2.0 * delta {
        (FRAC_PI_2 * meyer_nu(u / (2.0 * delta))).sin()
    } else if u <= arc {
        1.0
    } else if u < arc + 2.0 * delta {
        (FRAC_PI_2 * meyer_nu((u - arc) / (2.0 * delta))).cos()
    } else {
        0.0
    }
}

/// Curvelet coefficients for one image, flattened in (scale, angle) order.
#[derive(Clone, Debug)]
pub struct CurveletPyramid {
    geometry: Arc<CurveletGeometry>,
    data: Vec<Complex64>,
}

impl CurveletPyramid {
    pub fn new(geometry: Arc<CurveletGeometry>, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != geometry.total {
            return Err(Error::LengthMismatch {
                expected: geometry.total,
                actual: data.len(),
            });
        }
        Ok(Self { geometry, data })
    }

    pub fn geometry(&self) -> &Arc<CurveletGeometry> {
        &self.geometry
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn tile_count(&self) -> usize {
        self.geometry.wedges.len()
    }

    /// Coefficients of tile `index` (row-major, `info.rows x info.cols`).
    pub fn tile(&self, index: usize) -> (TileInfo, &[Complex64]) {
        let w = &self.geometry.wedges[index];
        let info = TileInfo {
            scale: w.scale,
            angle: w.angle,
            rows: w.tile_rows,
            cols: w.tile_cols,
            offset: w.offset,
        };
        (info, &self.data[w.offset..w.offset + w.tile_rows * w.tile_cols])
    }
}

pub fn fdct_forward(img: &ImageGrid, geom: &Arc<CurveletGeometry>) -> Result<CurveletPyramid> {
    img.require_domain(Domain::Space)?;
    geom.check_shape(img.rows(), img.cols())?;
    let spectrum = fft::fft2_centered(img.data(), img.rows(), img.cols(), FftDirection::Forward);
    CurveletPyramid::new(geom.clone(), geom.analyze_spectrum(&spectrum))
}

pub fn fdct_adjoint(pyr: &CurveletPyramid, geom: &Arc<CurveletGeometry>) -> Result<ImageGrid> {
    if !Arc::ptr_eq(&pyr.geometry, geom) {
        geom.check_shape(pyr.geometry.rows, pyr.geometry.cols)?;
        if pyr.geometry.nscales != geom.nscales
            || pyr.geometry.nangles_coarse != geom.nangles_coarse
        {
            return Err(Error::Geometry("pyramid was built with a different geometry".into()));
        }
    }
    let spectrum = geom.synthesize_spectrum(&pyr.data);
    let data = fft::fft2_centered(&spectrum, geom.rows, geom.cols, FftDirection::Inverse);
    ImageGrid::new(geom.rows, geom.cols, Domain::Space, data)
}

pub fn curvelet_lowfreq_extent(geom: &CurveletGeometry, rows: usize, cols: usize) -> Result<(usize, usize)> {
    geom.check_shape(rows, cols)?;
    Ok(geom.lowfreq_extent())
}
