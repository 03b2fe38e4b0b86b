//! Coefficient magnitude pictures for the `transform` subcommand.

use structcs::curvelet::CurveletPyramid;
use structcs::wavelet::WaveletPyramid;

/// Display gamma applied to normalised magnitudes.
pub const GAMMA: f64 = 0.5;

fn normalise(v: &mut [f64]) {
    let max = v.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        v.iter_mut().for_each(|x| *x = (*x / max).powf(GAMMA));
    }
}

/// Wavelet magnitudes in their quadrant layout, each subband normalised on
/// its own so fine detail stays visible next to the approximation.
pub fn wavelet_picture(p: &WaveletPyramid) -> (Vec<f64>, usize, usize) {
    let (rows, cols) = (p.rows(), p.cols());
    let mut out: Vec<f64> = p.data().iter().map(|c| c.norm()).collect();
    let mut bands = vec![(0, 0, rows >> p.levels(), cols >> p.levels())];
    for l in 1..=p.levels() {
        let (h, w) = (rows >> l, cols >> l);
        bands.extend([(0, w, h, w), (h, 0, h, w), (h, w, h, w)]);
    }
    for (r0, c0, h, w) in bands {
        let mut band: Vec<f64> = (0..h * w).map(|i| out[(r0 + i / w) * cols + c0 + i % w]).collect();
        normalise(&mut band);
        for (i, v) in band.into_iter().enumerate() {
            out[(r0 + i / w) * cols + c0 + i % w] = v;
        }
    }
    (out, rows, cols)
}

/// Curvelet tiles, one row per scale, tiles side by side with a one-pixel
/// gap. Each tile is normalised on its own.
pub fn curvelet_picture(p: &CurveletPyramid) -> (Vec<f64>, usize, usize) {
    let mut rows_of_tiles: Vec<Vec<(usize, usize, Vec<f64>)>> = Vec::new();
    for i in 0..p.tile_count() {
        let (info, data) = p.tile(i);
        let mut mags: Vec<f64> = data.iter().map(|c| c.norm()).collect();
        normalise(&mut mags);
        if rows_of_tiles.len() <= info.scale {
            rows_of_tiles.resize_with(info.scale + 1, Vec::new);
        }
        rows_of_tiles[info.scale].push((info.rows, info.cols, mags));
    }
    let band_h: Vec<usize> = rows_of_tiles
        .iter()
        .map(|t| t.iter().map(|x| x.0).max().unwrap_or(0))
        .collect();
    let width = rows_of_tiles
        .iter()
        .map(|t| t.iter().map(|x| x.1 + 1).sum::<usize>())
        .max()
        .unwrap_or(1);
    let height: usize = band_h.iter().map(|h| h + 1).sum();
    let mut out = vec![0.0; width * height];
    let mut top = 0;
    for (tiles, h) in rows_of_tiles.iter().zip(&band_h) {
        let mut left = 0;
        for (tr, tc, mags) in tiles {
            for r in 0..*tr {
                for c in 0..*tc {
                    out[(top + r) * width + left + c] = mags[r * tc + c];
                }
            }
            left += tc + 1;
        }
        top += h + 1;
    }
    (out, height, width)
}
