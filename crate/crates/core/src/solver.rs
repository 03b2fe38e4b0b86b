//! Weighted-l1 LASSO solver: FISTA with backtracking line search and
//! iterative reweighting.
//!
//! Minimizes `1/2 ||A y - b||^2 + sum_i lambda_i |y_i|` over complex `y`.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dictionary::{DictCoeffs, Dictionary, WeightVector};
use crate::error::{Error, Result};
use crate::grid::{inner, l2_norm, ImageGrid, SampleMask};

/// A linear map between flat complex vectors together with its adjoint.
pub trait LinearOperator: Sync {
    fn domain_len(&self) -> usize;
    fn range_len(&self) -> usize;
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64>;
    fn adjoint(&self, y: &[Complex64]) -> Vec<Complex64>;
}

/// Relative mismatch of `<A x, y>` and `<x, A* y>` on seeded random vectors.
pub fn dot_product_test<A: LinearOperator + ?Sized>(op: &A, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rand_vec = |n: usize| -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    };
    let x = rand_vec(op.domain_len());
    let y = rand_vec(op.range_len());
    let lhs = inner(&op.apply(&x), &y);
    let rhs = inner(&x, &op.adjoint(&y));
    (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(f64::MIN_POSITIVE)
}

/// Largest singular value estimate by power iteration on `A* A`.
pub fn operator_norm<A: LinearOperator + ?Sized>(op: &A, iters: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<Complex64> = (0..op.domain_len())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let mut sigma = 0.0;
    for _ in 0..iters {
        let n = l2_norm(&x);
        if n == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= n);
        let ax = op.apply(&x);
        sigma = l2_norm(&ax);
        x = op.adjoint(&ax);
    }
    sigma
}

/// Dense row-major complex matrix.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl DenseOperator {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![Complex64::default(); n * n];
        for i in 0..n {
            data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        Self { rows: n, cols: n, data }
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    /// Materialize any operator by applying it to unit vectors.
    pub fn materialize<A: LinearOperator + ?Sized>(op: &A) -> Self {
        let (m, n) = (op.range_len(), op.domain_len());
        let mut data = vec![Complex64::default(); m * n];
        let mut e = vec![Complex64::default(); n];
        for j in 0..n {
            e[j] = Complex64::new(1.0, 0.0);
            let col = op.apply(&e);
            for i in 0..m {
                data[i * n + j] = col[i];
            }
            e[j] = Complex64::default();
        }
        Self { rows: m, cols: n, data }
    }
}

impl LinearOperator for DenseOperator {
    fn domain_len(&self) -> usize {
        self.cols
    }

    fn range_len(&self) -> usize {
        self.rows
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.data
            .chunks(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); self.cols];
        for (row, yi) in self.data.chunks(self.cols).zip(y) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * yi;
            }
        }
        out
    }
}

/// `A = M F Psi*`: dictionary coefficients to sampled k-space values.
#[derive(Clone, Debug)]
pub struct SensingOperator<'a> {
    dict: &'a Dictionary,
    indices: Vec<usize>,
}

impl<'a> SensingOperator<'a> {
    pub fn new(dict: &'a Dictionary, mask: &SampleMask) -> Result<Self> {
        if mask.shape() != dict.shape() {
            return Err(Error::ShapeMismatch {
                expected: dict.shape(),
                actual: mask.shape(),
            });
        }
        Ok(Self {
            dict,
            indices: mask.indices(),
        })
    }

    pub fn dictionary(&self) -> &Dictionary {
        self.dict
    }
}

impl LinearOperator for SensingOperator<'_> {
    fn domain_len(&self) -> usize {
        self.dict.len()
    }

    fn range_len(&self) -> usize {
        self.indices.len()
    }

    fn apply(&self, y: &[Complex64]) -> Vec<Complex64> {
        let spec = self.dict.synthesize_to_spectrum(y);
        self.indices.iter().map(|&i| spec[i]).collect()
    }

    fn adjoint(&self, r: &[Complex64]) -> Vec<Complex64> {
        let (rows, cols) = self.dict.shape();
        let mut spec = vec![Complex64::default(); rows * cols];
        for (&i, v) in self.indices.iter().zip(r) {
            spec[i] = *v;
        }
        self.dict.analyze_from_spectrum(&spec)
    }
}

/// Step-size control for the line search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FistaConfig {
    pub initial_step: f64,
    pub backtrack: f64,
    pub growth: f64,
    pub max_backtracks: usize,
}

impl Default for FistaConfig {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            backtrack: 0.5,
            growth: 1.25,
            max_backtracks: 60,
        }
    }
}

/// Weighted LASSO instance.
pub struct LassoProblem<'a, A: LinearOperator + ?Sized> {
    pub operator: &'a A,
    pub data: Vec<Complex64>,
    pub lambda: WeightVector,
    pub max_iters: usize,
    pub initial: Vec<Complex64>,
    pub config: FistaConfig,
}

impl<'a, A: LinearOperator + ?Sized> LassoProblem<'a, A> {
    pub fn new(operator: &'a A, data: Vec<Complex64>, lambda: WeightVector) -> Self {
        let n = operator.domain_len();
        Self {
            operator,
            data,
            lambda,
            max_iters: 100,
            initial: vec![Complex64::default(); n],
            config: FistaConfig::default(),
        }
    }

    pub fn with_initial(mut self, initial: Vec<Complex64>) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let op = self.operator;
        if self.data.len() != op.range_len() {
            return Err(Error::LengthMismatch {
                expected: op.range_len(),
                actual: self.data.len(),
            });
        }
        for len in [self.lambda.len(), self.initial.len()] {
            if len != op.domain_len() {
                return Err(Error::LengthMismatch {
                    expected: op.domain_len(),
                    actual: len,
                });
            }
        }
        let c = &self.config;
        if !(c.initial_step > 0.0) || !(c.backtrack > 0.0 && c.backtrack < 1.0) || !(c.growth >= 1.0) {
            return Err(Error::InvalidArgument(format!("invalid line-search settings {c:?}")));
        }
        let mismatch = dot_product_test(op, 0x0ad7);
        if !(mismatch <= 1e-10) {
            return Err(Error::Numerical(format!(
                "operator fails the adjoint dot-product test (relative mismatch {mismatch:e})"
            )));
        }
        Ok(())
    }

    /// `1/2 ||A y - b||^2 + sum lambda_i |y_i|`.
    pub fn objective(&self, y: &[Complex64]) -> f64 {
        let ay = self.operator.apply(y);
        smooth_part(&ay, &self.data) + penalty(y, self.lambda.values())
    }
}

/// One accepted line-search step: the new smooth value, its quadratic
/// upper bound and the rounding allowance. Acceptance means
/// `smooth <= bound + slack`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSearchRecord {
    pub smooth: f64,
    pub bound: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolveReport {
    /// Objective after every iteration, across all rounds.
    pub objectives: Vec<f64>,
    /// Accepted step per iteration.
    pub steps: Vec<f64>,
    pub line_search: Vec<LineSearchRecord>,
    /// Objective of the starting point of each round.
    pub round_start: Vec<f64>,
    /// Best objective found in each round.
    pub round_best: Vec<f64>,
    pub wall_time: Duration,
}

impl SolveReport {
    fn append(&mut self, other: SolveReport) {
        self.objectives.extend(other.objectives);
        self.steps.extend(other.steps);
        self.line_search.extend(other.line_search);
        self.round_start.extend(other.round_start);
        self.round_best.extend(other.round_best);
        self.wall_time += other.wall_time;
    }

    /// CSV with columns `iteration,objective,step`.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,objective,step\n");
        for (i, (o, st)) in self.objectives.iter().zip(&self.steps).enumerate() {
            s.push_str(&format!("{},{:.17e},{:.17e}\n", i + 1, o, st));
        }
        s
    }
}

fn smooth_part(ay: &[Complex64], b: &[Complex64]) -> f64 {
    0.5 * ay.iter().zip(b).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()
}

fn penalty(y: &[Complex64], lambda: &[f64]) -> f64 {
    y.iter().zip(lambda).map(|(v, l)| l * v.norm()).sum()
}

#[inline]
fn shrink(v: Complex64, t: f64) -> Complex64 {
    let m = v.norm();
    if m <= t {
        Complex64::default()
    } else {
        v * (1.0 - t / m)
    }
}

/// Complex soft threshold `y_i * max(0, 1 - t_i / |y_i|)`.
pub fn soft_threshold_slice(y: &[Complex64], thresholds: &[f64]) -> Result<Vec<Complex64>> {
    if y.len() != thresholds.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            actual: thresholds.len(),
        });
    }
    if let Some(t) = thresholds.iter().find(|t| !(**t >= 0.0)) {
        return Err(Error::InvalidArgument(format!("negative threshold {t}")));
    }
    Ok(y.iter().zip(thresholds).map(|(v, t)| shrink(*v, *t)).collect())
}

/// Proximal operator of the weighted l1 norm on dictionary coefficients.
pub fn soft_threshold(coeffs: &DictCoeffs, thresholds: &WeightVector, dict: &Dictionary) -> Result<DictCoeffs> {
    let out = soft_threshold_slice(&coeffs.flatten(), thresholds.values())?;
    DictCoeffs::unflatten(dict, out)
}

fn axpby(a: f64, x: &[Complex64], b: f64, y: &[Complex64]) -> Vec<Complex64> {
    x.iter().zip(y).map(|(u, v)| u * a + v * b).collect()
}

/// FISTA with backtracking and adaptive step growth. Runs exactly
/// `max_iters` iterations and returns the best iterate seen (the starting
/// point included).
pub fn fista_line_search<A: LinearOperator + ?Sized>(prob: &LassoProblem<'_, A>) -> Result<(Vec<Complex64>, SolveReport)> {
    prob.validate()?;
    let start = Instant::now();
    let op = prob.operator;
    let b = &prob.data;
    let lambda = prob.lambda.values();
    let cfg = prob.config;

    let mut x = prob.initial.clone();
    let mut x_prev = x.clone();
    let mut ax = op.apply(&x);
    let mut ax_prev = ax.clone();
    let resid: Vec<Complex64> = ax.iter().zip(b).map(|(a, b)| a - b).collect();
    let mut grad = op.adjoint(&resid);
    let mut grad_prev = grad.clone();

    let start_obj = smooth_part(&ax, b) + penalty(&x, lambda);
    if !start_obj.is_finite() {
        return Err(Error::Numerical("initial objective is not finite".into()));
    }
    let mut best = (start_obj, x.clone());
    let mut report = SolveReport {
        round_start: vec![start_obj],
        ..SolveReport::default()
    };

    // rounding floor for the acceptance test, relative to f(0)
    let slack = 1e-14 * smooth_part(&vec![Complex64::default(); b.len()], b);
    let mut t = 1.0f64;
    let mut prev_step = cfg.initial_step;
    let mut thresholds = vec![0.0; lambda.len()];

    for k in 0..prob.max_iters {
        let mut step = if k == 0 { cfg.initial_step } else { prev_step * cfg.growth };
        let mut halvings = 0;
        let (z, az, t_next, record) = loop {
            let theta = prev_step / step;
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * t * t).sqrt());
            let m = (t - 1.0) / t_next;
            let y = axpby(1.0 + m, &x, -m, &x_prev);
            let ay = axpby(1.0 + m, &ax, -m, &ax_prev);
            let gy = axpby(1.0 + m, &grad, -m, &grad_prev);
            let fy = smooth_part(&ay, b);

            thresholds.iter_mut().zip(lambda).for_each(|(t, l)| *t = l * step);
            let z: Vec<Complex64> = y
                .iter()
                .zip(&gy)
                .zip(&thresholds)
                .map(|((yv, g), th)| shrink(yv - g * step, *th))
                .collect();
            let az = op.apply(&z);
            let fz = smooth_part(&az, b);
            let d: Vec<Complex64> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
            let bound = fy + inner(&gy, &d).re + l2_norm(&d).powi(2) / (2.0 * step);
            if !fz.is_finite() || !bound.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite objective at iteration {} (smooth {fz}, bound {bound})",
                    k + 1
                )));
            }
            let allowance = 1e-12 * fy.max(bound.abs()) + slack;
            if fz <= bound + allowance {
                break (z, az, t_next, LineSearchRecord { smooth: fz, bound, slack: allowance });
            }
            halvings += 1;
            if halvings > cfg.max_backtracks {
                return Err(Error::Numerical(format!(
                    "line search failed to find a step at iteration {}",
                    k + 1
                )));
            }
            step *= cfg.backtrack;
        };

        x_prev = std::mem::replace(&mut x, z);
        ax_prev = std::mem::replace(&mut ax, az);
        let resid: Vec<Complex64> = ax.iter().zip(b).map(|(a, b)| a - b).collect();
        grad_prev = std::mem::replace(&mut grad, op.adjoint(&resid));
        t = t_next;
        prev_step = step;

        let obj = record.smooth + penalty(&x, lambda);
        if !obj.is_finite() {
            return Err(Error::Numerical(format!("non-finite objective at iteration {}", k + 1)));
        }
        report.objectives.push(obj);
        report.steps.push(step);
        report.line_search.push(record);
        if obj < best.0 {
            best = (obj, x.clone());
        }
    }
    report.round_best.push(best.0);
    report.wall_time = start.elapsed();
    Ok((best.1, report))
}

/// Reweighting parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReweightConfig {
    pub rounds: usize,
    /// `eps = factor * std(|y|)` in `lambda_i = c / (|y_i| + eps)`.
    pub eps_factor: f64,
}

impl Default for ReweightConfig {
    fn default() -> Self {
        Self {
            rounds: 5,
            eps_factor: 0.1,
        }
    }
}

/// New weights `c / (|y_i| + eps)` on the support of `previous`, with `c`
/// chosen to keep the mean weight over that support. Zero weights stay zero.
pub fn reweight(previous: &WeightVector, y: &[Complex64], eps_factor: f64) -> WeightVector {
    let prev = previous.values();
    let support: Vec<usize> = (0..prev.len()).filter(|&i| prev[i] > 0.0).collect();
    if support.is_empty() {
        return previous.clone();
    }
    let mags: Vec<f64> = support.iter().map(|&i| y[i].norm()).collect();
    let n = mags.len() as f64;
    let mean_mag = mags.iter().sum::<f64>() / n;
    let std = (mags.iter().map(|m| (m - mean_mag).powi(2)).sum::<f64>() / n).sqrt();
    let eps = (eps_factor * std).max(1e-12);
    let raw: Vec<f64> = mags.iter().map(|m| 1.0 / (m + eps)).collect();
    let prev_mean = support.iter().map(|&i| prev[i]).sum::<f64>() / n;
    let raw_mean = raw.iter().sum::<f64>() / n;
    let c = prev_mean / raw_mean;
    let mut values = vec![0.0; prev.len()];
    for (&i, r) in support.iter().zip(&raw) {
        values[i] = c * r;
    }
    WeightVector::new(values).expect("weights are finite and non-negative")
}

/// FISTA followed by `rounds` reweighting rounds, each warm-started from the
/// previous round's best iterate.
pub fn reweighted_solve<A: LinearOperator + ?Sized>(
    prob: &LassoProblem<'_, A>,
    cfg: ReweightConfig,
) -> Result<(Vec<Complex64>, SolveReport)> {
    let (mut y, mut report) = fista_line_search(prob)?;
    let mut lambda = prob.lambda.clone();
    for _ in 0..cfg.rounds {
        lambda = reweight(&lambda, &y, cfg.eps_factor);
        let round = LassoProblem {
            operator: prob.operator,
            data: prob.data.clone(),
            lambda: lambda.clone(),
            max_iters: prob.max_iters,
            initial: y,
            config: prob.config,
        };
        let (next, rep) = fista_line_search(&round)?;
        y = next;
        report.append(rep);
    }
    Ok((y, report))
}

/// Floor applied to initial weights, relative to the largest one.
pub const LAMBDA_FLOOR: f64 = 1e-6;

/// Initial weights `|Psi x0|`, floored at `1e-6 * max` (or `1e-6` when
/// the image is zero).
pub fn initial_lambda(zero_filled: &ImageGrid, dict: &Dictionary) -> Result<WeightVector> {
    zero_filled.require_shape(dict.shape())?;
    let mags: Vec<f64> = dict.analyze(zero_filled.data()).iter().map(|v| v.norm()).collect();
    let max = mags.iter().cloned().fold(0.0, f64::max);
    let floor = if max > 0.0 { LAMBDA_FLOOR * max } else { LAMBDA_FLOOR };
    WeightVector::new(mags.into_iter().map(|m| m.max(floor)).collect())
}


#[cfg(test)]
mod recovery_tests {
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    use crate::dictionary::WeightVector;
    use crate::solver::{fista_line_search, reweighted_solve, DenseOperator, LassoProblem, LinearOperator, ReweightConfig};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = 1.0 / (rows as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(v * s, 0.0)
            })
            .collect();
        DenseOperator::new(rows, cols, data).unwrap()
    }

    fn support(y: &[Complex64], tol: f64) -> Vec<usize> {
        (0..y.len()).filter(|&i| y[i].norm() > tol).collect()
    }

    #[test]
    fn reweighting_recovers_a_sparse_support() {
        let a = gaussian(8, 32, 39);
        let truth_support = [3usize, 17, 26];
        let mut x = vec![Complex64::default(); 32];
        for (k, &i) in truth_support.iter().enumerate() {
            x[i] = Complex64::new([1.0, -0.7, 0.4][k], 0.0);
        }
        let b = a.apply(&x);
        let prob = LassoProblem::new(&a, b, WeightVector::constant(32, 1e-3)).with_max_iters(4000);
        let err = |y: &[Complex64]| y.iter().zip(&x).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
        let (plain, _) = fista_line_search(&prob).unwrap();
        let (y, _) = reweighted_solve(&prob, ReweightConfig { rounds: 6, eps_factor: 0.1 }).unwrap();
        assert_eq!(support(&y, 1e-2), truth_support);
        // the reweighted rounds remove most of the shrinkage bias
        assert!(err(&y) < 1e-3 && err(&y) < 0.05 * err(&plain), "{} vs {}", err(&y), err(&plain));
    }

    #[test]
    fn solution_is_a_proximal_fixed_point() {
        let a = gaussian(12, 20, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b: Vec<Complex64> = (0..12)
            .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        let lambda = WeightVector::constant(20, 0.2);
        let prob = LassoProblem::new(&a, b.clone(), lambda).with_max_iters(5000);
        let (y, report) = fista_line_search(&prob).unwrap();
        // optimality: |A^H(b - Ay)|_i <= lambda, with equality (and matching phase) on the support
        let r: Vec<Complex64> = a.apply(&y).iter().zip(&b).map(|(u, v)| v - u).collect();
        let g = a.adjoint(&r);
        for (gi, yi) in g.iter().zip(&y) {
            if yi.norm() > 1e-9 {
                assert!((gi - yi / yi.norm() * 0.2).norm() < 1e-6);
            } else {
                assert!(gi.norm() <= 0.2 + 1e-6);
            }
        }
        assert!(report.line_search.iter().all(|r| r.smooth <= r.bound + r.slack));
        let best = report.objectives.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(prob.objective(&y) <= best + 1e-15);
    }
}
