//! Unitary 2-D FFT kernels on row-major complex buffers.
//!
//! Two flavours are provided: the centered transform used for images and
//! k-space (origin of both domains at index `n / 2` along each axis), and a
//! plain transform with the origin at index 0, used for curvelet tiles.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

type PlanKey = (usize, bool);

fn plan_cache() -> &'static Mutex<(FftPlanner<f64>, HashMap<PlanKey, Arc<dyn Fft<f64>>>)> {
    static CACHE: OnceLock<Mutex<(FftPlanner<f64>, HashMap<PlanKey, Arc<dyn Fft<f64>>>)>> =
        OnceLock::new();
    CACHE.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())))
}

/// Cached 1-D plan of length `len`.
pub fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    let key = (len, direction == FftDirection::Forward);
    let mut guard = plan_cache().lock().unwrap_or_else(|e| e.into_inner());
    let (planner, plans) = &mut *guard;
    plans
        .entry(key)
        .or_insert_with(|| planner.plan_fft(len, direction))
        .clone()
}

fn transpose(src: &[Complex64], rows: usize, cols: usize, dst: &mut [Complex64]) {
    for r in 0..rows {
        let row = &src[r * cols..(r + 1) * cols];
        for (c, v) in row.iter().enumerate() {
            dst[c * rows + r] = *v;
        }
    }
}

/// Unnormalized in-place 2-D FFT with the origin at index 0.
fn fft2_raw(buf: &mut [Complex64], rows: usize, cols: usize, direction: FftDirection) {
    debug_assert_eq!(buf.len(), rows * cols);
    if cols > 1 {
        plan(cols, direction).process(buf);
    }
    if rows > 1 {
        let mut t = vec![Complex64::default(); buf.len()];
        transpose(buf, rows, cols, &mut t);
        plan(rows, direction).process(&mut t);
        transpose(&t, cols, rows, buf);
    }
}

fn scale(buf: &mut [Complex64], factor: f64) {
    buf.iter_mut().for_each(|v| *v *= factor);
}

/// Unitary 2-D FFT, origin at index 0 in both domains.
pub fn fft2_unitary(buf: &mut [Complex64], rows: usize, cols: usize, direction: FftDirection) {
    fft2_raw(buf, rows, cols, direction);
    scale(buf, 1.0 / ((rows * cols) as f64).sqrt());
}

/// Move the element at index 0 to index `n / 2` along both axes.
pub fn fftshift(src: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); src.len()];
    let (hr, hc) = (rows / 2, cols / 2);
    for r in 0..rows {
        let dr = (r + hr) % rows;
        for c in 0..cols {
            out[dr * cols + (c + hc) % cols] = src[r * cols + c];
        }
    }
    out
}

/// Inverse of [`fftshift`].
pub fn ifftshift(src: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); src.len()];
    let (hr, hc) = (rows / 2, cols / 2);
    for r in 0..rows {
        let sr = (r + hr) % rows;
        for c in 0..cols {
            out[r * cols + c] = src[sr * cols + (c + hc) % cols];
        }
    }
    out
}

/// Unitary centered 2-D DFT: both the spatial and the frequency origin sit at
/// `(rows / 2, cols / 2)`.
pub fn fft2_centered(src: &[Complex64], rows: usize, cols: usize, direction: FftDirection) -> Vec<Complex64> {
    let mut buf = ifftshift(src, rows, cols);
    fft2_unitary(&mut buf, rows, cols, direction);
    fftshift(&buf, rows, cols)
}

/// Signed frequency (or position) of grid index `i` on an axis of length `n`
/// under the centered convention.
#[inline]
pub fn centered_coord(i: usize, n: usize) -> i64 {
    i as i64 - (n / 2) as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_dft2(x: &[Complex64], rows: usize, cols: usize, sign: f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); x.len()];
        for k1 in 0..rows {
            for k2 in 0..cols {
                let mut acc = Complex64::default();
                for n1 in 0..rows {
                    for n2 in 0..cols {
                        let ph = sign
                            * 2.0
                            * PI
                            * ((k1 * n1) as f64 / rows as f64 + (k2 * n2) as f64 / cols as f64);
                        acc += x[n1 * cols + n2] * Complex64::from_polar(1.0, ph);
                    }
                }
                out[k1 * cols + k2] = acc / ((rows * cols) as f64).sqrt();
            }
        }
        out
    }

    #[test]
    fn unitary_matches_direct_sum_on_odd_shape() {
        let (rows, cols) = (5, 6);
        let x: Vec<Complex64> = (0..30)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let mut fast = x.clone();
        fft2_unitary(&mut fast, rows, cols, FftDirection::Forward);
        let slow = naive_dft2(&x, rows, cols, -1.0);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn shifts_are_inverse_for_odd_lengths() {
        let x: Vec<Complex64> = (0..15).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let y = ifftshift(&fftshift(&x, 3, 5), 3, 5);
        assert_eq!(x, y);
        // the origin lands at the center index
        let s = fftshift(&x, 3, 5);
        assert_eq!(s[5 + 2], x[0]);
    }
}
