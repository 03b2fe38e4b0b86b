//! Variable-density sampling masks and fully-sampled-center insertion.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::centered_coord;
use crate::grid::SampleMask;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Laplacian,
    VdPoisson,
}

/// Parameters of a sampling pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Laplacian standard deviation per axis: a fraction of the side when
    /// below 1, pixels otherwise.
    pub sigma_frac: f64,
    /// Poisson-disc radius growth scale, as a fraction of the side.
    pub poisson_param: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Fully-sampled center region (height, width), if any.
    pub fsr: Option<(usize, usize)>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            kind: SamplerKind::Laplacian,
            sigma_frac: 0.3,
            poisson_param: 0.3,
            n_samples: 1,
            seed: 0,
            fsr: None,
        }
    }
}

impl SamplerConfig {
    pub fn laplacian(n_samples: usize, sigma_frac: f64, seed: u64) -> Self {
        Self {
            kind: SamplerKind::Laplacian,
            sigma_frac,
            n_samples,
            seed,
            ..Self::default()
        }
    }

    pub fn vd_poisson(n_samples: usize, poisson_param: f64, seed: u64) -> Self {
        Self {
            kind: SamplerKind::VdPoisson,
            poisson_param,
            n_samples,
            seed,
            ..Self::default()
        }
    }

    pub fn with_fsr(mut self, fsr: Option<(usize, usize)>) -> Self {
        self.fsr = fsr;
        self
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        let total = rows * cols;
        if self.n_samples == 0 || self.n_samples > total {
            return Err(Error::Sampling(format!(
                "cannot draw {} samples on a {rows}x{cols} grid",
                self.n_samples
            )));
        }
        if let Some((h, w)) = self.fsr {
            if h > rows || w > cols {
                return Err(Error::Sampling(format!(
                    "fully-sampled region {h}x{w} exceeds the {rows}x{cols} grid"
                )));
            }
            if h * w > self.n_samples {
                return Err(Error::Sampling(format!(
                    "fully-sampled region {h}x{w} needs {} samples but the budget is {}",
                    h * w,
                    self.n_samples
                )));
            }
        }
        match self.kind {
            SamplerKind::Laplacian if !(self.sigma_frac > 0.0) => Err(Error::Sampling(format!(
                "Laplacian standard deviation must be positive, got {}",
                self.sigma_frac
            ))),
            SamplerKind::VdPoisson if !(self.poisson_param > 0.0) => Err(Error::Sampling(format!(
                "Poisson parameter must be positive, got {}",
                self.poisson_param
            ))),
            _ => Ok(()),
        }
    }

    /// Generate the mask described by this config, including the FSR.
    pub fn generate(&self, rows: usize, cols: usize) -> Result<SampleMask> {
        self.validate(rows, cols)?;
        let base = match self.kind {
            SamplerKind::Laplacian => laplacian_mask(rows, cols, self)?,
            SamplerKind::VdPoisson => vd_poisson_mask(rows, cols, self)?,
        };
        match self.fsr {
            Some(ext) => with_fsr(&base, ext, self.n_samples, self.seed ^ FSR_SEED_SALT),
            None => Ok(base),
        }
    }
}

const FSR_SEED_SALT: u64 = 0x5eed_f5f5_0000_0001;

/// Laplace scale `b` for one axis; the standard deviation is `sqrt(2) b`.
pub fn laplace_scale(sigma: f64, side: usize) -> f64 {
    let std = if sigma < 1.0 { sigma * side as f64 } else { sigma };
    std / std::f64::consts::SQRT_2
}

/// Separable Laplacian density over the centered frequency grid.
#[derive(Clone, Debug)]
pub struct LaplacianDensity {
    rows: usize,
    cols: usize,
    row_weights: Vec<f64>,
    col_weights: Vec<f64>,
}

impl LaplacianDensity {
    pub fn new(rows: usize, cols: usize, sigma: f64) -> Self {
        let axis = |n: usize| {
            let b = laplace_scale(sigma, n);
            (0..n)
                .map(|i| (-(centered_coord(i, n).abs() as f64) / b).exp())
                .collect::<Vec<_>>()
        };
        Self {
            rows,
            cols,
            row_weights: axis(rows),
            col_weights: axis(cols),
        }
    }

    /// Unnormalized density at a cell.
    pub fn weight(&self, r: usize, c: usize) -> f64 {
        self.row_weights[r] * self.col_weights[c]
    }

    /// Normalized marginal along rows.
    pub fn row_marginal(&self) -> Vec<f64> {
        normalize(&self.row_weights)
    }

    /// Normalized marginal along columns.
    pub fn col_marginal(&self) -> Vec<f64> {
        normalize(&self.col_weights)
    }

    /// Independent draws (with replacement) of cells from the density.
    pub fn draw<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<(usize, usize)> {
        let rc = cumulative(&self.row_weights);
        let cc = cumulative(&self.col_weights);
        (0..n)
            .map(|_| (invert_cdf(&rc, rng.random()), invert_cdf(&cc, rng.random())))
            .collect()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

fn normalize(w: &[f64]) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

fn cumulative(w: &[f64]) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    let mut acc = 0.0;
    w.iter()
        .map(|v| {
            acc += v / s;
            acc
        })
        .collect()
}

fn invert_cdf(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
}

/// Exactly `n_samples` distinct cells drawn without replacement from the
/// separable Laplacian density (Efraimidis-Spirakis weighted keys).
pub fn laplacian_mask(rows: usize, cols: usize, cfg: &SamplerConfig) -> Result<SampleMask> {
    let total = rows * cols;
    if cfg.n_samples == 0 || cfg.n_samples > total {
        return Err(Error::Sampling(format!(
            "cannot draw {} samples on a {rows}x{cols} grid",
            cfg.n_samples
        )));
    }
    let density = LaplacianDensity::new(rows, cols, cfg.sigma_frac);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // key = ln(u) / w; the largest keys win
    let mut keyed: Vec<(f64, usize)> = (0..total)
        .map(|i| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            (u.ln() / density.weight(i / cols, i % cols), i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
    let mut flags = vec![false; total];
    for &(_, i) in keyed.iter().take(cfg.n_samples) {
        flags[i] = true;
    }
    SampleMask::new(rows, cols, flags, None)
}

/// Poisson-disc exclusion radius at distance `d` from the center.
pub fn poisson_radius(base: f64, d: f64, poisson_param: f64, side: usize) -> f64 {
    base * (1.0 + d / (poisson_param * side as f64))
}

fn center_distance(r: usize, c: usize, rows: usize, cols: usize) -> f64 {
    let a = centered_coord(r, rows) as f64;
    let b = centered_coord(c, cols) as f64;
    (a * a + b * b).sqrt()
}

/// Dart throwing over a fixed random cell order with a radius that grows
/// away from the center. Accepts a cell when every accepted sample is at
/// least `max(r(p), r(q))` away.
fn poisson_pass(rows: usize, cols: usize, order: &[usize], base: f64, param: f64) -> Vec<bool> {
    let side = rows.min(cols);
    let mut flags = vec![false; rows * cols];
    let slope = base / (param * side as f64);
    for &i in order {
        let (r, c) = (i / cols, i % cols);
        let rad = poisson_radius(base, center_distance(r, c, rows, cols), param, side);
        // a neighbour at distance D has radius <= rad + slope * D
        let reach = if slope < 1.0 { rad / (1.0 - slope) } else { rad * 4.0 };
        let h = reach.ceil() as i64;
        let mut ok = true;
        'scan: for dr in -h..=h {
            let rr = r as i64 + dr;
            if rr < 0 || rr >= rows as i64 {
                continue;
            }
            for dc in -h..=h {
                let cc = c as i64 + dc;
                if cc < 0 || cc >= cols as i64 || (dr == 0 && dc == 0) {
                    continue;
                }
                let j = rr as usize * cols + cc as usize;
                if !flags[j] {
                    continue;
                }
                let dist = ((dr * dr + dc * dc) as f64).sqrt();
                let other = poisson_radius(
                    base,
                    center_distance(rr as usize, cc as usize, rows, cols),
                    param,
                    side,
                );
                if dist < rad.max(other) {
                    ok = false;
                    break 'scan;
                }
            }
        }
        if ok {
            flags[i] = true;
        }
    }
    flags
}

/// Adds `extra` unsampled cells, preferring those whose nearest sample is
/// furthest away relative to the local radius. Ties follow `order`.
fn top_up(flags: &mut [bool], rows: usize, cols: usize, order: &[usize], base: f64, param: f64, extra: usize) {
    let side = rows.min(cols);
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if flags[i] {
            continue;
        }
        let (r, c) = (i / cols, i % cols);
        let rad = poisson_radius(base, center_distance(r, c, rows, cols), param, side);
        let h = (2.0 * rad).ceil() as i64 + 1;
        let mut nearest = f64::INFINITY;
        for dr in -h..=h {
            let rr = r as i64 + dr;
            if rr < 0 || rr >= rows as i64 {
                continue;
            }
            for dc in -h..=h {
                let cc = c as i64 + dc;
                if cc < 0 || cc >= cols as i64 || !flags[rr as usize * cols + cc as usize] {
                    continue;
                }
                nearest = nearest.min(((dr * dr + dc * dc) as f64).sqrt());
            }
        }
        cand.push((nearest / rad, pos, i));
    }
    cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, _, i) in cand.iter().take(extra) {
        flags[i] = true;
    }
}

/// Variable-density Poisson-disc mask. The base radius is bisected until the
/// achieved count is within 1% of the request.
pub fn vd_poisson_mask(rows: usize, cols: usize, cfg: &SamplerConfig) -> Result<SampleMask> {
    let total = rows * cols;
    let target = cfg.n_samples;
    if target == 0 || target > total {
        return Err(Error::Sampling(format!(
            "cannot draw {target} samples on a {rows}x{cols} grid"
        )));
    }
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));

    let tol = (target as f64 * 0.01).max(1.0);
    let count = |f: &[bool]| f.iter().filter(|&&b| b).count();

    // radius <= 1 accepts every cell
    let mut lo = 1.0;
    if (total as f64 - target as f64).abs() <= tol {
        return SampleMask::new(rows, cols, vec![true; total], None);
    }
    let mut hi = rows.max(cols) as f64;
    let mut best = vec![false; total];
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let flags = poisson_pass(rows, cols, &order, mid, cfg.poisson_param);
        let n = count(&flags);
        if (n as f64 - target as f64).abs() < (count(&best) as f64 - target as f64).abs() {
            best = flags.clone();
        }
        if (n as f64 - target as f64).abs() <= tol {
            return SampleMask::new(rows, cols, flags, None);
        }
        if n > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    let mut n = count(&best);
    if n < target {
        // the count jumps between radius 1 and just above it; fill the gap
        // with the rejected cells that sit furthest from their neighbours
        top_up(&mut best, rows, cols, &order, lo, cfg.poisson_param, target - n);
        n = count(&best);
    }
    if (n as f64 - target as f64).abs() <= tol {
        SampleMask::new(rows, cols, best, None)
    } else {
        Err(Error::Sampling(format!(
            "Poisson-disc sampling reached {n} samples, cannot get within 1% of {target}"
        )))
    }
}

/// Force the centered `extent` rectangle to be sampled while keeping the
/// total at exactly `n_total`: samples outside the region are thinned (or
/// topped up) uniformly at random.
pub fn with_fsr(mask: &SampleMask, extent: (usize, usize), n_total: usize, seed: u64) -> Result<SampleMask> {
    let (rows, cols) = mask.shape();
    let (h, w) = extent;
    if h == 0 || w == 0 || h > rows || w > cols {
        return Err(Error::Sampling(format!(
            "fully-sampled region {h}x{w} does not fit a {rows}x{cols} grid"
        )));
    }
    if h * w > n_total {
        return Err(Error::Sampling(format!(
            "fully-sampled region {h}x{w} ({} cells) exceeds the budget of {n_total} samples",
            h * w
        )));
    }
    if n_total > rows * cols {
        return Err(Error::Sampling(format!(
            "budget {n_total} exceeds the {rows}x{cols} grid"
        )));
    }
    let mut flags = mask.flags().to_vec();
    let mut in_fsr = vec![false; rows * cols];
    for i in mask.fsr_cells(h, w) {
        in_fsr[i] = true;
        flags[i] = true;
    }
    let outside_budget = n_total - h * w;
    let mut outside: Vec<usize> = (0..rows * cols).filter(|&i| flags[i] && !in_fsr[i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match outside.len().cmp(&outside_budget) {
        Ordering::Greater => {
            outside.shuffle(&mut rng);
            for &i in &outside[outside_budget..] {
                flags[i] = false;
            }
        }
        Ordering::Less => {
            let mut free: Vec<usize> = (0..rows * cols).filter(|&i| !flags[i]).collect();
            free.shuffle(&mut rng);
            for &i in free.iter().take(outside_budget - outside.len()) {
                flags[i] = true;
            }
        }
        Ordering::Equal => {}
    }
    SampleMask::new(rows, cols, flags, Some(extent))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplacian_count_and_determinism() {
        let cfg = SamplerConfig::laplacian(10_000, 0.3, 7);
        let a = laplacian_mask(256, 256, &cfg).unwrap();
        let b = laplacian_mask(256, 256, &cfg).unwrap();
        assert_eq!(a.count(), 10_000);
        assert_eq!(a, b);
        assert!((a.fraction() - 0.1526).abs() < 1e-4);
        let c = laplacian_mask(256, 256, &SamplerConfig::laplacian(10_000, 0.3, 8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn full_request_gives_full_mask() {
        let m = laplacian_mask(16, 16, &SamplerConfig::laplacian(256, 0.3, 1)).unwrap();
        assert!(m.flags().iter().all(|&f| f));
        assert!(laplacian_mask(16, 16, &SamplerConfig::laplacian(257, 0.3, 1)).is_err());
    }

    #[test]
    fn sigma_in_pixels_matches_fraction() {
        assert!((laplace_scale(0.3, 256) - laplace_scale(76.8, 256)).abs() < 1e-12);
    }

    #[test]
    fn fsr_insertion_conserves_count() {
        let base = laplacian_mask(64, 64, &SamplerConfig::laplacian(600, 0.3, 3)).unwrap();
        let m = with_fsr(&base, (16, 16), 600, 9).unwrap();
        assert_eq!(m.count(), 600);
        assert_eq!(m.fsr(), Some((16, 16)));
        let exact = with_fsr(&base, (20, 30), 600, 9).unwrap();
        assert_eq!(exact.count(), 600);
        assert_eq!(exact, SampleMask::center(64, 64, (20, 30)).unwrap());
        assert!(with_fsr(&base, (30, 30), 600, 9).is_err());
    }

    #[test]
    fn knee_scale_budget() {
        let cfg = SamplerConfig::laplacian(8192, 0.3, 1).with_fsr(Some((40, 40)));
        let m = cfg.generate(320, 320).unwrap();
        assert_eq!(m.count(), 8192);
        assert!((m.fraction() - 0.08).abs() < 1e-12);
    }

    #[test]
    fn poisson_respects_local_radius_and_density() {
        let cfg = SamplerConfig::vd_poisson(900, 0.3, 5);
        let m = vd_poisson_mask(64, 64, &cfg).unwrap();
        assert!((m.count() as f64 - 900.0).abs() <= 9.0);
        let again = vd_poisson_mask(64, 64, &cfg).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn poisson_near_full_density() {
        let cfg = SamplerConfig::vd_poisson(32 * 32 - 5, 0.3, 2);
        let m = vd_poisson_mask(32, 32, &cfg).unwrap();
        assert!((m.count() as f64 - cfg.n_samples as f64).abs() <= 0.01 * cfg.n_samples as f64);
    }

    #[test]
    fn invalid_configs() {
        assert!(SamplerConfig::laplacian(0, 0.3, 0).generate(8, 8).is_err());
        assert!(SamplerConfig::laplacian(10, -0.3, 0).generate(8, 8).is_err());
        assert!(SamplerConfig::laplacian(10, 0.3, 0).with_fsr(Some((4, 4))).generate(8, 8).is_err());
    }
}
