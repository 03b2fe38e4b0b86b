//! Modified Shepp-Logan head phantom.

use crate::grid::ImageGrid;

// intensity, semi-axes (a, b), center (x, y), rotation in degrees
const ELLIPSES: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];

/// Phantom sampled at pixel centers on [-1, 1]^2, values in [0, 1].
pub fn shepp_logan(rows: usize, cols: usize) -> ImageGrid {
    let mut v = vec![0.0; rows * cols];
    for r in 0..rows {
        let y = 1.0 - (2.0 * r as f64 + 1.0) / rows as f64;
        for c in 0..cols {
            let x = (2.0 * c as f64 + 1.0) / cols as f64 - 1.0;
            let mut s = 0.0;
            for [amp, a, b, x0, y0, deg] in ELLIPSES {
                let (sn, cs) = deg.to_radians().sin_cos();
                let (dx, dy) = (x - x0, y - y0);
                let u = dx * cs + dy * sn;
                let w = -dx * sn + dy * cs;
                if (u / a).powi(2) + (w / b).powi(2) <= 1.0 {
                    s += amp;
                }
            }
            v[r * cols + c] = f64::clamp(s, 0.0, 1.0);
        }
    }
    ImageGrid::from_real(rows, cols, &v).expect("shape is consistent")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_intensities() {
        let p = shepp_logan(128, 128);
        let m = p.magnitude();
        assert!(m.iter().all(|&v| (0.0..=1.0).contains(&v)));
        // corner is outside the skull, the rim is bright, the brain is 0.2
        assert_eq!(m[0], 0.0);
        assert!((m[64 * 128 + 64] - 0.2).abs() < 1e-12 || (m[64 * 128 + 64] - 0.3).abs() < 1e-12);
        assert!((m[64 * 128 + 2] - 0.0).abs() < 1e-12);
        let rim = (0..128).map(|c| m[64 * 128 + c]).fold(0.0, f64::max);
        assert!((rim - 1.0).abs() < 1e-12);
    }
}
