//! Finite-dimensional Kac-Rice representation of the mean number of critical
//! points, together with the direct checks it is validated against: root
//! counting for `p = 2`, the Gaussian covariance structure of the field and
//! the determinant reduction from `N` to `N - 1` dimensions.
//!
//! Norms written `|||x|||` are averaged, `|||x||| = ||x|| / sqrt(N)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::constants::{exponent_weight, gradient_scale, hessian_scale};
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::rmt::{goe_block, stream};

const BATCHES: usize = 20;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn avg_norm(x: &[f64]) -> f64 {
    (dot(x, x) / x.len() as f64).sqrt()
}

fn nonzero(sigma: &[f64]) -> Result<()> {
    if sigma.is_empty() || sigma.iter().all(|&s| s == 0.0) || sigma.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("sigma must be finite, nonempty and nonzero".into()));
    }
    Ok(())
}

/// Pointwise ingredients of the Kac-Rice integrand at a fixed `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KacRiceIntegrand {
    pub sigma: Vec<f64>,
    /// Exponent function `f_N(sigma)`.
    pub f_n: f64,
    /// `|||V'(sigma)|||^2 / |||sigma|||^(2p-2)`; `f_N` lies between this and `p` times it.
    pub gradient_term: f64,
    pub v: Vec<f64>,
    /// `<sigma, v(sigma)>`.
    pub inner: f64,
    /// The integrand without the `E|det M_{N-1}|` factor.
    pub prefactor: f64,
    /// Level `(1/N) sum_i (sigma_i V'(sigma_i)/p - V(sigma_i))`.
    pub omega_membership: f64,
}

pub fn integrand(sigma: &[f64], potential: &Potential) -> Result<KacRiceIntegrand> {
    nonzero(sigma)?;
    let n = sigma.len() as f64;
    let p = potential.p as f64;
    let t = avg_norm(sigma);
    let (c1, c2) = (hessian_scale(potential.p), gradient_scale(potential.p));
    let mut v = Vec::with_capacity(sigma.len());
    let (mut sv1, mut grad2, mut level) = (0.0, 0.0, 0.0);
    for &s in sigma {
        let (v0, v1, v2) = potential.eval(s);
        v.push(c1 * s * v2 - c2 * v1);
        sv1 += s * v1;
        grad2 += v1 * v1;
        level += s * v1 / p - v0;
    }
    let inner = dot(sigma, &v);
    let gradient_term = grad2 / n / t.powf(2.0 * p - 2.0);
    let f_n = (1.0 - p) * sv1 * sv1 / (n * n * t.powf(2.0 * p)) + p * gradient_term;
    let log_prefactor = -0.5 * p.ln() + 0.5 * n * ((p - 1.0) / (2.0 * PI)).ln() + inner.abs().ln()
        - n.ln()
        - (n + p) * t.ln()
        - exponent_weight(potential.p) * n * f_n;
    Ok(KacRiceIntegrand {
        sigma: sigma.to_vec(),
        f_n,
        gradient_term,
        v,
        inner,
        prefactor: log_prefactor.exp(),
        omega_membership: level / n,
    })
}

/// Orthonormal completion of `sigma / ||sigma||` from the Householder
/// reflector that maps coordinate axis `pivot` onto it. Different pivots give
/// different completions of the same complement.
pub fn completion_basis(sigma: &[f64], pivot: usize) -> Result<DMatrix<f64>> {
    nonzero(sigma)?;
    let n = sigma.len();
    if pivot >= n {
        return Err(Error::InvalidArgument(format!("pivot {pivot} out of range for dimension {n}")));
    }
    let norm = dot(sigma, sigma).sqrt();
    let mut u: Vec<f64> = sigma.iter().map(|s| s / norm).collect();
    let sign = if u[pivot] >= 0.0 { 1.0 } else { -1.0 };
    u[pivot] += sign;
    let uu = dot(&u, &u);
    let reflector = DMatrix::from_fn(n, n, |i, j| f64::from(i == j) - 2.0 * u[i] * u[j] / uu);
    let cols: Vec<usize> = (0..n).filter(|&j| j != pivot).collect();
    Ok(reflector.select_columns(cols.iter()))
}

/// Deterministic part of the projected Hessian at `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianModel {
    pub n: usize,
    pub sigma: Vec<f64>,
    /// `B^T (c1 diag(V''/|||sigma|||^(p-2)) - v v^T / (<sigma, v> |||sigma|||^(p-2))) B`.
    pub mean_part: DMatrix<f64>,
    pub basis: DMatrix<f64>,
    pub truncation: Option<f64>,
}

/// `truncation = Some(k)` caps the diagonal entries `V''/|||sigma|||^(p-2)` at `k`.
pub fn build_hessian_model(sigma: &[f64], potential: &Potential, truncation: Option<f64>) -> Result<HessianModel> {
    build_hessian_model_with_pivot(sigma, potential, truncation, 0)
}

pub fn build_hessian_model_with_pivot(
    sigma: &[f64],
    potential: &Potential,
    truncation: Option<f64>,
    pivot: usize,
) -> Result<HessianModel> {
    if let Some(k) = truncation {
        if !(k > 0.0) {
            return Err(Error::InvalidArgument(format!("truncation level must be positive, got {k}")));
        }
    }
    let basis = completion_basis(sigma, pivot)?;
    let dense = mean_matrix(sigma, potential, truncation)?;
    let mut mean_part = basis.transpose() * dense * &basis;
    let sym = (&mean_part + mean_part.transpose()) * 0.5;
    mean_part = sym;
    Ok(HessianModel { n: sigma.len(), sigma: sigma.to_vec(), mean_part, basis, truncation })
}

/// The `N x N` matrix before projection onto the complement of `sigma`.
fn mean_matrix(sigma: &[f64], potential: &Potential, truncation: Option<f64>) -> Result<DMatrix<f64>> {
    let n = sigma.len();
    let p = potential.p as f64;
    let scale = avg_norm(sigma).powf(p - 2.0);
    let (c1, c2) = (hessian_scale(potential.p), gradient_scale(potential.p));
    let mut diag = vec![0.0; n];
    let mut v = vec![0.0; n];
    for (i, &s) in sigma.iter().enumerate() {
        let (_, v1, v2) = potential.eval(s);
        v[i] = c1 * s * v2 - c2 * v1;
        let d = v2 / scale;
        diag[i] = truncation.map_or(d, |k| d.min(k));
    }
    let inner = dot(sigma, &v);
    if inner == 0.0 || !inner.is_finite() {
        return Err(Error::InvalidArgument(format!("<sigma, v(sigma)> = {inner}; the rank-one correction is undefined")));
    }
    let denom = inner * scale;
    Ok(DMatrix::from_fn(n, n, |i, j| if i == j { c1 * diag[i] } else { 0.0 } - v[i] * v[j] / denom))
}

/// Lower bound `c2 |||sigma|||^(2-p) min_i V'(sigma_i)/sigma_i` on the spectrum of the mean part.
pub fn spectral_floor(sigma: &[f64], potential: &Potential) -> f64 {
    let p = potential.p as f64;
    let min_ratio = sigma
        .iter()
        .map(|&s| if s == 0.0 { 0.0 } else { potential.derivative(s) / s })
        .fold(f64::INFINITY, f64::min);
    gradient_scale(potential.p) * avg_norm(sigma).powf(2.0 - p) * min_ratio
}

pub fn smallest_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `E|m + xi|` for `xi ~ N(0, s^2)`.
pub fn folded_normal_mean(m: f64, s: f64) -> f64 {
    let z = m / s;
    let tail = 0.5 * erfc(z / std::f64::consts::SQRT_2);
    m * (1.0 - 2.0 * tail) + 2.0 * s * (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn batch_means(xs: &[f64], batches: usize) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let b = batches.min(n).max(2);
    let means: Vec<f64> = (0..b)
        .map(|k| {
            let (lo, hi) = (k * n / b, (k + 1) * n / b);
            xs[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
    (mean, (var / b as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsDetEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    /// Folded-normal value when the matrix is `1 x 1`.
    pub closed_form: Option<f64>,
}

impl AbsDetEstimate {
    /// Monte-Carlo mean within `k` standard errors of the closed form, if there is one.
    pub fn agrees(&self, k: f64) -> bool {
        self.closed_form.map_or(true, |c| (c - self.mean).abs() <= k * self.stderr)
    }
}

/// Monte-Carlo `E|det(mean + G)|` for `G` a GOE block with the variances of `ambient_n`.
pub fn abs_det_draws(mean: &DMatrix<f64>, ambient_n: usize, samples: usize, seed: u64) -> Vec<f64> {
    let k = mean.nrows();
    (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            if k == 0 {
                return 1.0;
            }
            let g = goe_block(&mut stream(seed, i), k, ambient_n);
            (mean + g).determinant().abs()
        })
        .collect()
}

pub fn expected_abs_det(model: &HessianModel, samples: usize, seed: u64) -> Result<AbsDetEstimate> {
    if samples < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 samples, got {samples}")));
    }
    let draws = abs_det_draws(&model.mean_part, model.n, samples, seed);
    let (mean, stderr) = batch_means(&draws, BATCHES);
    let closed_form = (model.n == 2).then(|| folded_normal_mean(model.mean_part[(0, 0)], (2.0 / model.n as f64).sqrt()));
    Ok(AbsDetEstimate { mean, stderr, samples, closed_form })
}

/// `A_N(sigma)`, the conditional mean of the scaled Hessian with sign reversed.
pub fn conditional_mean_matrix(sigma: &[f64], potential: &Potential) -> Result<DMatrix<f64>> {
    nonzero(sigma)?;
    let n = sigma.len();
    let p = potential.p as f64;
    let (c1, c2) = (hessian_scale(potential.p), gradient_scale(potential.p));
    let s2 = dot(sigma, sigma);
    let d1: Vec<f64> = sigma.iter().map(|&s| potential.derivative(s)).collect();
    let sv = dot(sigma, &d1);
    let pre = avg_norm(sigma).powf(2.0 - p);
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { c1 * potential.second_derivative(sigma[i]) } else { 0.0 };
        let corr = sv / (s2 * s2) * sigma[i] * sigma[j] - (sigma[i] * d1[j] + d1[i] * sigma[j]) / s2;
        pre * (diag + c2 * corr)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeterminantReduction {
    /// `E|det(-A_N + P G_N P)|`.
    pub full: f64,
    pub full_stderr: f64,
    /// `<sigma, v> / (N |||sigma|||^p) E|det M_{N-1}|`.
    pub reduced: f64,
    pub reduced_stderr: f64,
}

impl DeterminantReduction {
    pub fn z_score(&self) -> f64 {
        (self.full - self.reduced) / self.full_stderr.hypot(self.reduced_stderr)
    }
}

/// Estimates both sides of the reduction of the `N`-dimensional determinant
/// to the `N - 1`-dimensional one, from independent draws.
pub fn determinant_reduction(sigma: &[f64], potential: &Potential, samples: usize, seed: u64) -> Result<DeterminantReduction> {
    let n = sigma.len();
    let a = conditional_mean_matrix(sigma, potential)?;
    let norm = dot(sigma, sigma);
    let proj = DMatrix::from_fn(n, n, |i, j| f64::from(i == j) - sigma[i] * sigma[j] / norm);
    let full_draws: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let g = goe_block(&mut stream(seed, i), n, n);
            (&proj * g * &proj - &a).determinant().abs()
        })
        .collect();
    let (full, full_stderr) = batch_means(&full_draws, BATCHES);

    let model = build_hessian_model(sigma, potential, None)?;
    let point = integrand(sigma, potential)?;
    let factor = point.inner.abs() / (n as f64 * avg_norm(sigma).powf(potential.p as f64));
    let reduced_draws = abs_det_draws(&model.mean_part, n, samples, seed ^ 0x9e37_79b9_7f4a_7c15);
    let (mean, stderr) = batch_means(&reduced_draws, BATCHES);
    Ok(DeterminantReduction { full, full_stderr, reduced: factor * mean, reduced_stderr: factor * stderr })
}

/// Radius `(u/c4)^(1/q1)` in the averaged norm beyond which every point lies in
/// the level set, `c4 = (q/p - 1)/c_bound`.
pub fn level_radius(potential: &Potential, u: f64) -> f64 {
    let c4 = (potential.q / potential.p as f64 - 1.0) / potential.c_bound;
    (u.max(0.0) / c4).powf(1.0 / potential.q1)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let nf = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre rule on `[a, b]`.
fn composite(a: f64, b: f64, panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> Vec<(f64, f64)> {
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * rule.0.len());
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub order: usize,
    pub radial_panels: usize,
    pub angular_panels: usize,
    /// Accept when doubling all panel counts moves the value by at most this (relative).
    pub rel_tol: f64,
    pub max_refinements: usize,
    /// Determinant draws per node for `N = 3`, shared across nodes.
    pub mc_samples: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec { order: 8, radial_panels: 4, angular_panels: 4, rel_tol: 1e-2, max_refinements: 4, mc_samples: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KacRiceEstimate {
    pub n: usize,
    pub u: f64,
    pub value: f64,
    /// Monte-Carlo standard error of the determinant factor (zero when it is exact).
    pub stderr: f64,
    /// Relative change at the last refinement.
    pub rel_gap: f64,
    pub refinements: usize,
    pub nodes: usize,
}

/// How `E|det M_{N-1}|` is obtained at a node.
enum DetFactor {
    Unit,
    Folded,
    /// Shared GOE draws `(g11, g12, g22)`, split into batches.
    Draws(Vec<[f64; 3]>),
}

impl DetFactor {
    fn new(n: usize, samples: usize, seed: u64) -> Self {
        match n {
            1 => DetFactor::Unit,
            2 => DetFactor::Folded,
            _ => DetFactor::Draws(
                (0..samples as u64)
                    .map(|i| {
                        let g = goe_block(&mut stream(seed, i), 2, n);
                        [g[(0, 0)], g[(1, 0)], g[(1, 1)]]
                    })
                    .collect(),
            ),
        }
    }

    fn batches(&self) -> usize {
        match self {
            DetFactor::Draws(_) => BATCHES,
            _ => 1,
        }
    }

    /// Batch means of `|det(mean_part + G)|`.
    fn eval(&self, mean_part: &DMatrix<f64>, out: &mut [f64]) {
        match self {
            DetFactor::Unit => out[0] = 1.0,
            DetFactor::Folded => out[0] = folded_normal_mean(mean_part[(0, 0)], 1.0),
            DetFactor::Draws(draws) => {
                let (a, b, d) = (mean_part[(0, 0)], mean_part[(1, 0)], mean_part[(1, 1)]);
                let len = draws.len();
                for (k, slot) in out.iter_mut().enumerate() {
                    let (lo, hi) = (k * len / BATCHES, (k + 1) * len / BATCHES);
                    let s: f64 = draws[lo..hi]
                        .iter()
                        .map(|g| ((a + g[0]) * (d + g[2]) - (b + g[1]).powi(2)).abs())
                        .sum();
                    *slot = s / (hi - lo) as f64;
                }
            }
        }
    }
}

/// Unit directions with their surface weights.
fn angular_rule(n: usize, panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> Vec<(Vec<f64>, f64)> {
    match n {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => composite(0.0, 2.0 * PI, panels, rule)
            .into_iter()
            .map(|(th, w)| (vec![th.cos(), th.sin()], w))
            .collect(),
        _ => {
            let polar = composite(0.0, PI, panels, rule);
            let azimuth = composite(0.0, 2.0 * PI, 2 * panels, rule);
            let mut out = Vec::with_capacity(polar.len() * azimuth.len());
            for &(th, wt) in &polar {
                for &(ph, wp) in &azimuth {
                    out.push((vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()], wt * wp * th.sin()));
                }
            }
            out
        }
    }
}

/// Log of a crude upper envelope of the radial integrand, used only to place the cutoff.
fn radial_envelope(r: f64, omega: &[f64], potential: &Potential) -> f64 {
    let sigma: Vec<f64> = omega.iter().map(|w| r * w).collect();
    let Ok(point) = integrand(&sigma, potential) else { return f64::NEG_INFINITY };
    let n = omega.len() as f64;
    let scale = avg_norm(&sigma).powf(potential.p as f64 - 2.0);
    let diag = sigma.iter().map(|&s| potential.second_derivative(s)).fold(0.0, f64::max);
    let rank_one = dot(&point.v, &point.v) / (point.inner.abs() * scale);
    let spread = 3.0 + hessian_scale(potential.p) * diag / scale + rank_one;
    point.prefactor.ln() + (n - 1.0) * (r.ln() + spread.ln())
}

/// Radius beyond which the integrand along `omega` is negligible.
fn radial_cutoff(omega: &[f64], potential: &Potential) -> f64 {
    let grid: Vec<f64> = (-60..=80).map(|k| 2f64.powf(k as f64 / 4.0)).collect();
    let vals: Vec<f64> = grid.iter().map(|&r| radial_envelope(r, omega, potential)).collect();
    let (peak_idx, peak) = vals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    for i in peak_idx..grid.len() {
        if vals[i] < peak - 60.0 {
            return grid[i];
        }
    }
    *grid.last().unwrap()
}

/// Sub-intervals of `[0, cutoff]` on which the summed level is at least `N u`.
fn level_intervals(omega: &[f64], potential: &Potential, u: f64, cutoff: f64) -> Vec<(f64, f64)> {
    let n = omega.len() as f64;
    let excess = |r: f64| omega.iter().map(|w| potential.level_density(r * w)).sum::<f64>() - n * u;
    let steps = 400;
    let mut out = Vec::new();
    let mut start: Option<f64> = if excess(0.0) >= 0.0 { Some(0.0) } else { None };
    let mut prev = (0.0, excess(0.0));
    for k in 1..=steps {
        let r = cutoff * k as f64 / steps as f64;
        let g = excess(r);
        if (g >= 0.0) != (prev.1 >= 0.0) {
            let (mut lo, mut hi) = (prev.0, r);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if (excess(mid) >= 0.0) == (prev.1 >= 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let root = 0.5 * (lo + hi);
            match start.take() {
                Some(a) => out.push((a, root)),
                None => start = Some(root),
            }
        }
        prev = (r, g);
    }
    if let Some(a) = start {
        out.push((a, cutoff));
    }
    out
}

/// Integral over `r` of the integrand along `omega` times `r^(N-1)`, per batch.
fn radial_integral(
    omega: &[f64],
    potential: &Potential,
    u: f64,
    panels: usize,
    rule: &(Vec<f64>, Vec<f64>),
    det: &DetFactor,
) -> Result<(Vec<f64>, usize)> {
    let n = omega.len();
    let cutoff = radial_cutoff(omega, potential);
    let mut acc = vec![0.0; det.batches()];
    let mut buf = vec![0.0; det.batches()];
    let mut count = 0;
    for (a, b) in level_intervals(omega, potential, u, cutoff) {
        for (r, w) in composite(a, b, panels, rule) {
            let sigma: Vec<f64> = omega.iter().map(|x| r * x).collect();
            let point = integrand(&sigma, potential)?;
            if point.prefactor == 0.0 {
                continue;
            }
            let mean_part = if n == 1 { DMatrix::zeros(0, 0) } else { build_hessian_model(&sigma, potential, None)?.mean_part };
            det.eval(&mean_part, &mut buf);
            let jac = w * r.powi(n as i32 - 1) * point.prefactor;
            for (s, d) in acc.iter_mut().zip(&buf) {
                *s += jac * d;
            }
            count += 1;
        }
    }
    Ok((acc, count))
}

fn integrate_level(
    n: usize,
    potential: &Potential,
    u: f64,
    radial_panels: usize,
    angular_panels: usize,
    rule: &(Vec<f64>, Vec<f64>),
    det: &DetFactor,
) -> Result<(f64, f64, usize)> {
    let dirs = angular_rule(n, angular_panels, rule);
    let parts: Vec<(Vec<f64>, usize)> = dirs
        .par_iter()
        .map(|(omega, _)| radial_integral(omega, potential, u, radial_panels, rule, det))
        .collect::<Result<_>>()?;
    let mut batch = vec![0.0; det.batches()];
    let mut nodes = 0;
    for ((_, w), (vals, c)) in dirs.iter().zip(&parts) {
        for (b, v) in batch.iter_mut().zip(vals) {
            *b += w * v;
        }
        nodes += c;
    }
    if batch.len() == 1 {
        return Ok((batch[0], 0.0, nodes));
    }
    let (mean, stderr) = batch_means(&batch, batch.len());
    Ok((mean, stderr, nodes))
}

/// Mean number of critical points away from the origin with `H_N >= N u`,
/// from the Kac-Rice integral in polar (`N = 2`) or spherical (`N = 3`) coordinates.
/// `N = 1` is also accepted; there the determinant factor is 1.
pub fn expected_crt(n: usize, potential: &Potential, u: f64, spec: &QuadSpec, seed: u64) -> Result<KacRiceEstimate> {
    if !(1..=3).contains(&n) {
        return Err(Error::InvalidArgument(format!("Kac-Rice quadrature supports N = 1, 2, 3; got {n}")));
    }
    if spec.order == 0 || spec.radial_panels == 0 || spec.angular_panels == 0 {
        return Err(Error::InvalidArgument("quadrature orders and panel counts must be positive".into()));
    }
    if n == 3 && spec.mc_samples < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 determinant draws, got {}", spec.mc_samples)));
    }
    let rule = gauss_legendre(spec.order);
    let det = DetFactor::new(n, spec.mc_samples, seed);
    let (mut prev, _, _) = integrate_level(n, potential, u, spec.radial_panels, spec.angular_panels, &rule, &det)?;
    let mut rel_gap = f64::INFINITY;
    for level in 1..=spec.max_refinements {
        let scale = 1 << level;
        let (value, stderr, nodes) =
            integrate_level(n, potential, u, spec.radial_panels * scale, spec.angular_panels * scale, &rule, &det)?;
        rel_gap = if value == prev { 0.0 } else { (value - prev).abs() / value.abs().max(f64::MIN_POSITIVE) };
        if rel_gap <= spec.rel_tol {
            return Ok(KacRiceEstimate { n, u, value, stderr, rel_gap, refinements: level, nodes });
        }
        prev = value;
    }
    Err(Error::QuadratureGap { rel_gap, tol: spec.rel_tol })
}

/// Angular integral of the integrand on the sphere of averaged radius `t`,
/// including the radial Jacobian: the density in `t` of the Kac-Rice integral.
pub fn radial_slice(n: usize, potential: &Potential, t: f64, spec: &QuadSpec, seed: u64) -> Result<f64> {
    if !(1..=3).contains(&n) {
        return Err(Error::InvalidArgument(format!("radial slices support N = 1, 2, 3; got {n}")));
    }
    let rule = gauss_legendre(spec.order);
    let det = DetFactor::new(n, spec.mc_samples.max(100), seed);
    let r = t * (n as f64).sqrt();
    let mut buf = vec![0.0; det.batches()];
    let mut total = 0.0;
    for (omega, w) in angular_rule(n, spec.angular_panels, &rule) {
        let sigma: Vec<f64> = omega.iter().map(|x| r * x).collect();
        let point = integrand(&sigma, potential)?;
        let mean_part = if n == 1 { DMatrix::zeros(0, 0) } else { build_hessian_model(&sigma, potential, None)?.mean_part };
        det.eval(&mean_part, &mut buf);
        total += w * point.prefactor * buf.iter().sum::<f64>() / buf.len() as f64;
    }
    Ok(total * r.powi(n as i32 - 1) * (n as f64).sqrt())
}

/// Critical points of one realisation of the `p = 2` landscape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalCount {
    /// All distinct critical points, the origin included.
    pub total: usize,
    /// Critical points other than the origin with `H_N >= N u`.
    pub above_level: usize,
    /// Some root had a near-singular Jacobian; the count may be off.
    pub degenerate: bool,
    pub max_residual: f64,
    /// Box half-width searched.
    pub radius: f64,
}

/// Gaussian couplings `g_ij` for realisation `index`.
pub fn sample_coupling(n: usize, seed: u64, index: u64) -> DMatrix<f64> {
    let mut rng = stream(seed, index);
    DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// A-priori bound on `||sigma||` for every critical point: from
/// `<sigma, V'(sigma)> = sigma^T B sigma` and `x V'(x) >= |x|^q1 / c_bound`.
pub fn critical_radius_bound(interaction: &DMatrix<f64>, potential: &Potential) -> f64 {
    let n = interaction.nrows() as f64;
    let top = SymmetricEigen::new(interaction.clone()).eigenvalues.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return 0.0;
    }
    let q1 = potential.q1;
    (potential.c_bound * top * n.powf(q1 / 2.0 - 1.0)).powf(1.0 / (q1 - 2.0))
}

const RESIDUAL_GATE: f64 = 1e-9;
const DEDUP_TOL: f64 = 1e-6;
const NEWTON_GRID: usize = 40;

/// Counts solutions of `B sigma = V'(sigma)`, `B = (g + g^T)/sqrt(N)`, for `N = 1, 2`.
pub fn count_critical_points(coupling: &DMatrix<f64>, potential: &Potential, u: f64) -> Result<CriticalCount> {
    if potential.p != 2 {
        return Err(Error::InvalidArgument(format!("direct counting needs p = 2, got p = {}", potential.p)));
    }
    let n = coupling.nrows();
    if coupling.ncols() != n || !(1..=2).contains(&n) {
        return Err(Error::InvalidArgument(format!("direct counting supports N = 1, 2; got {}x{}", n, coupling.ncols())));
    }
    let interaction = (coupling + coupling.transpose()) / (n as f64).sqrt();
    let radius = critical_radius_bound(&interaction, potential) * 1.05;
    let mut roots: Vec<Vec<f64>> = vec![vec![0.0; n]];
    let mut degenerate = false;
    let mut max_residual: f64 = 0.0;
    if n == 1 {
        let b = interaction[(0, 0)];
        for x in scalar_roots(potential, b, radius) {
            degenerate |= (potential.second_derivative(x) - b).abs() <= 1e-10 * (1.0 + b.abs());
            max_residual = max_residual.max((b * x - potential.derivative(x)).abs());
            roots.push(vec![x]);
            roots.push(vec![-x]);
        }
    } else {
        degenerate |= interaction.determinant().abs() <= 1e-10 * (1.0 + interaction.norm_squared());
        let step = 2.0 * radius / (NEWTON_GRID - 1) as f64;
        for i in 0..NEWTON_GRID {
            for j in 0..NEWTON_GRID {
                let start = [-radius + i as f64 * step, -radius + j as f64 * step];
                let Some((x, res, det)) = newton2(&interaction, potential, start) else { continue };
                if roots.iter().any(|r| (r[0] - x[0]).hypot(r[1] - x[1]) <= DEDUP_TOL) {
                    continue;
                }
                if x[0].hypot(x[1]) > radius * (1.0 + 1e-6) + DEDUP_TOL {
                    return Err(Error::Consistency(format!("critical point {x:?} outside the a-priori radius {radius}")));
                }
                degenerate |= det;
                max_residual = max_residual.max(res);
                roots.push(x.to_vec());
            }
        }
    }
    let above_level = roots
        .iter()
        .filter(|r| r.iter().any(|&x| x != 0.0))
        .filter(|r| r.iter().map(|&x| potential.level_density(x)).sum::<f64>() >= n as f64 * u)
        .count();
    Ok(CriticalCount { total: roots.len(), above_level, degenerate, max_residual, radius })
}

/// Positive roots of `V'(x) = b x` in `(0, radius]`.
fn scalar_roots(potential: &Potential, b: f64, radius: f64) -> Vec<f64> {
    if radius <= 0.0 {
        return Vec::new();
    }
    let f = |x: f64| potential.derivative(x) / x - b;
    let steps = 20_000;
    let mut out = Vec::new();
    let mut prev = (radius * 1e-9, f(radius * 1e-9));
    for k in 1..=steps {
        let x = radius * k as f64 / steps as f64;
        let fx = f(x);
        if fx == 0.0 {
            out.push(x);
        } else if prev.1 != 0.0 && (fx > 0.0) != (prev.1 > 0.0) {
            let (mut lo, mut hi) = (prev.0, x);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (f(mid) > 0.0) == (prev.1 > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        prev = (x, fx);
    }
    out
}

/// Damped Newton on `B x - V'(x)`; returns the root, residual and a degeneracy flag.
fn newton2(b: &DMatrix<f64>, potential: &Potential, start: [f64; 2]) -> Option<([f64; 2], f64, bool)> {
    let residual = |x: &[f64; 2]| -> [f64; 2] {
        [
            b[(0, 0)] * x[0] + b[(0, 1)] * x[1] - potential.derivative(x[0]),
            b[(1, 0)] * x[0] + b[(1, 1)] * x[1] - potential.derivative(x[1]),
        ]
    };
    let norm = |f: &[f64; 2]| f[0].hypot(f[1]);
    let mut x = start;
    let mut f = residual(&x);
    for _ in 0..200 {
        let j00 = b[(0, 0)] - potential.second_derivative(x[0]);
        let j11 = b[(1, 1)] - potential.second_derivative(x[1]);
        let j01 = b[(0, 1)];
        let det = j00 * j11 - j01 * j01;
        if norm(&f) <= 1e-13 {
            let degenerate = det.abs() <= 1e-10 * (1.0 + j00 * j00 + j11 * j11 + 2.0 * j01 * j01);
            return Some((x, norm(&f), degenerate));
        }
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dx = [(j11 * f[0] - j01 * f[1]) / det, (j00 * f[1] - j01 * f[0]) / det];
        let mut lambda = 1.0;
        loop {
            let trial = [x[0] - lambda * dx[0], x[1] - lambda * dx[1]];
            let ft = residual(&trial);
            if norm(&ft) < (1.0 - 1e-4 * lambda) * norm(&f) || lambda < 1e-8 {
                x = trial;
                f = ft;
                break;
            }
            lambda *= 0.5;
        }
    }
    let res = norm(&f);
    if res > RESIDUAL_GATE {
        return None;
    }
    let j00 = b[(0, 0)] - potential.second_derivative(x[0]);
    let j11 = b[(1, 1)] - potential.second_derivative(x[1]);
    let j01 = b[(0, 1)];
    let det = j00 * j11 - j01 * j01;
    Some((x, res, det.abs() <= 1e-10 * (1.0 + j00 * j00 + j11 * j11 + 2.0 * j01 * j01)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountSummary {
    pub n: usize,
    pub u: f64,
    pub trials: usize,
    /// Mean of [`CriticalCount::above_level`].
    pub mean: f64,
    pub stderr: f64,
    pub mean_total: f64,
    pub degenerate_trials: usize,
}

pub fn count_ensemble(n: usize, potential: &Potential, u: f64, trials: usize, seed: u64) -> Result<CountSummary> {
    if trials < 2 {
        return Err(Error::InvalidArgument("need at least two coupling draws".into()));
    }
    let counts: Vec<CriticalCount> = (0..trials as u64)
        .into_par_iter()
        .map(|k| count_critical_points(&sample_coupling(n, seed, k), potential, u))
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = counts.iter().map(|c| c.above_level as f64).collect();
    let mean = xs.iter().sum::<f64>() / trials as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    Ok(CountSummary {
        n,
        u,
        trials,
        mean,
        stderr: (var / trials as f64).sqrt(),
        mean_total: counts.iter().map(|c| c.total as f64).sum::<f64>() / trials as f64,
        degenerate_trials: counts.iter().filter(|c| c.degenerate).count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryCheck {
    pub name: String,
    pub predicted: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub z: f64,
}

impl EntryCheck {
    fn new(name: String, predicted: f64, empirical: f64, stderr: f64) -> Self {
        let gap = empirical - predicted;
        let z = if stderr > 0.0 {
            gap / stderr
        } else if gap.abs() <= 1e-12 * (1.0 + predicted.abs()) {
            0.0
        } else {
            f64::INFINITY
        };
        EntryCheck { name, predicted, empirical, stderr, z }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub n: usize,
    pub p: u32,
    pub samples: usize,
    /// Means and covariances of `(H, grad H, Hess H)`.
    pub entries: Vec<EntryCheck>,
    /// Covariances of the Hessian residuals after regressing on the gradient.
    pub conditional: Vec<EntryCheck>,
    /// Hessian regression intercepts at zero gradient.
    pub conditional_mean: Vec<EntryCheck>,
    /// Residual variance of `H` given the gradient, over `Var(H)`.
    pub residual_ratio: f64,
    pub var_h_rel_error: f64,
}

impl CovarianceReport {
    pub fn max_z(&self) -> f64 {
        self.entries.iter().map(|e| e.z.abs()).fold(0.0, f64::max)
    }

    pub fn max_conditional_z(&self) -> f64 {
        self.conditional.iter().chain(&self.conditional_mean).map(|e| e.z.abs()).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&EntryCheck> {
        self.entries.iter().chain(&self.conditional).chain(&self.conditional_mean).max_by(|a, b| a.z.abs().total_cmp(&b.z.abs()))
    }
}

/// Field coordinates: `H`, then `dH/dsigma_i`, then `d2H/dsigma_i dsigma_j` for `i <= j`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Coord {
    Value,
    Grad(usize),
    Hess(usize, usize),
}

impl Coord {
    fn all(n: usize) -> Vec<Coord> {
        let mut out = vec![Coord::Value];
        out.extend((0..n).map(Coord::Grad));
        for i in 0..n {
            for j in i..n {
                out.push(Coord::Hess(i, j));
            }
        }
        out
    }

    fn name(&self) -> String {
        match self {
            Coord::Value => "H".into(),
            Coord::Grad(i) => format!("dH/d{i}"),
            Coord::Hess(i, j) => format!("d2H/d{i}d{j}"),
        }
    }
}

/// Linear map from the coupling tensor to the centred field coordinates at `sigma`.
fn field_loadings(sigma: &[f64], p: u32, coords: &[Coord]) -> Vec<Vec<f64>> {
    let n = sigma.len();
    let p = p as usize;
    let total = n.pow(p as u32);
    let norm = (n as f64).powf(-(p as f64 - 1.0) / 2.0);
    let mut out = vec![vec![0.0; coords.len()]; total];
    let mut idx = vec![0usize; p];
    for (a, row) in out.iter_mut().enumerate() {
        let mut rem = a;
        for slot in idx.iter_mut().rev() {
            *slot = rem % n;
            rem /= n;
        }
        let prod_except = |skip: &[usize]| -> f64 {
            (0..p).filter(|m| !skip.contains(m)).map(|m| sigma[idx[m]]).product::<f64>()
        };
        for (c, coord) in coords.iter().enumerate() {
            row[c] = norm
                * match *coord {
                    Coord::Value => prod_except(&[]),
                    Coord::Grad(k) => (0..p).filter(|&m| idx[m] == k).map(|m| prod_except(&[m])).sum(),
                    Coord::Hess(i, j) => {
                        let mut s = 0.0;
                        for m in 0..p {
                            for l in 0..p {
                                if m != l && idx[m] == i && idx[l] == j {
                                    s += prod_except(&[m, l]);
                                }
                            }
                        }
                        s
                    }
                };
        }
    }
    out
}

fn predicted_mean(coord: Coord, sigma: &[f64], potential: &Potential) -> f64 {
    match coord {
        Coord::Value => -sigma.iter().map(|&s| potential.value(s)).sum::<f64>(),
        Coord::Grad(i) => -potential.derivative(sigma[i]),
        Coord::Hess(i, j) => if i == j { -potential.second_derivative(sigma[i]) } else { 0.0 },
    }
}

fn predicted_cov(a: Coord, b: Coord, sigma: &[f64], p: u32) -> f64 {
    let n = sigma.len() as f64;
    let pf = p as f64;
    let pi = p as i32;
    let s2 = dot(sigma, sigma);
    let lead = n.powf(1.0 - pf);
    let d = |i: usize, j: usize| f64::from(i == j);
    match (a, b) {
        (Coord::Value, Coord::Value) => lead * s2.powi(pi),
        (Coord::Value, Coord::Grad(i)) | (Coord::Grad(i), Coord::Value) => lead * pf * s2.powi(pi - 1) * sigma[i],
        (Coord::Value, Coord::Hess(j, k)) | (Coord::Hess(j, k), Coord::Value) => {
            lead * pf * (pf - 1.0) * s2.powi(pi - 2) * sigma[j] * sigma[k]
        }
        (Coord::Grad(i), Coord::Grad(j)) => {
            let t2 = s2 / n;
            pf * t2.powi(pi - 2) * ((pf - 1.0) * sigma[i] * sigma[j] + s2 * d(i, j)) / n
        }
        (Coord::Grad(i), Coord::Hess(j, k)) | (Coord::Hess(j, k), Coord::Grad(i)) => {
            lead * pf * (pf - 1.0)
                * s2.powi(pi - 3)
                * ((pf - 2.0) * sigma[i] * sigma[j] * sigma[k] + s2 * (d(i, k) * sigma[j] + d(i, j) * sigma[k]))
        }
        (Coord::Hess(i, j), Coord::Hess(k, l)) => {
            let s = sigma;
            lead * pf * (pf - 1.0)
                * s2.powi(pi - 4)
                * ((pf - 2.0) * (pf - 3.0) * s[i] * s[j] * s[k] * s[l]
                    + s2 * (pf - 2.0) * (d(i, k) * s[j] * s[l] + d(i, l) * s[j] * s[k] + d(j, k) * s[i] * s[l] + d(j, l) * s[i] * s[k])
                    + s2 * s2 * (d(i, k) * d(j, l) + d(i, l) * d(j, k)))
        }
    }
}

fn mean_and_se(xs: impl Iterator<Item = f64> + Clone, count: usize) -> (f64, f64) {
    let m = xs.clone().sum::<f64>() / count as f64;
    let var = xs.map(|x| (x - m).powi(2)).sum::<f64>() / (count - 1) as f64;
    (m, (var / count as f64).sqrt())
}

/// Samples the order-`p` coupling tensor and compares the empirical law of
/// `(H, grad H, Hess H)` at `sigma` with the closed-form means and covariances,
/// then checks the conditional law given a vanishing gradient by regression.
pub fn covariance_test(sigma: &[f64], potential: &Potential, samples: usize, seed: u64) -> Result<CovarianceReport> {
    nonzero(sigma)?;
    let n = sigma.len();
    if n > 6 {
        return Err(Error::InvalidArgument(format!("covariance test supports N <= 6, got {n}")));
    }
    if samples < 10_000 {
        return Err(Error::InvalidArgument(format!("need at least 10^4 samples, got {samples}")));
    }
    let p = potential.p;
    let coords = Coord::all(n);
    let dim = coords.len();
    let loadings = field_loadings(sigma, p, &coords);
    let means: Vec<f64> = coords.iter().map(|&c| predicted_mean(c, sigma, potential)).collect();

    const CHUNK: usize = 1000;
    let chunks = samples.div_ceil(CHUNK);
    let rows: Vec<Vec<f64>> = (0..chunks as u64)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = stream(seed, c);
            let len = CHUNK.min(samples - c as usize * CHUNK);
            let loadings = &loadings;
            let means = &means;
            (0..len).map(move |_| {
                let mut y = means.clone();
                for row in loadings.iter() {
                    let g: f64 = rng.sample(StandardNormal);
                    for (yc, w) in y.iter_mut().zip(row) {
                        *yc += g * w;
                    }
                }
                y
            })
        })
        .collect();

    let col = |c: usize| rows.iter().map(move |r| r[c]);
    let mut entries = Vec::new();
    let mut centre = vec![0.0; dim];
    for (c, coord) in coords.iter().enumerate() {
        let (m, se) = mean_and_se(col(c), samples);
        centre[c] = m;
        entries.push(EntryCheck::new(format!("E[{}]", coord.name()), means[c], m, se));
    }
    let centred: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&centre).map(|(x, m)| x - m).collect()).collect();
    let mut var_h_rel_error = 0.0;
    for a in 0..dim {
        for b in a..dim {
            let (m, se) = mean_and_se(centred.iter().map(|r| r[a] * r[b]), samples);
            let predicted = predicted_cov(coords[a], coords[b], sigma, p);
            if a == 0 && b == 0 {
                var_h_rel_error = (m - predicted).abs() / predicted;
            }
            entries.push(EntryCheck::new(format!("Cov[{}, {}]", coords[a].name(), coords[b].name()), predicted, m, se));
        }
    }

    // Regression on the gradient coordinates 1..=n.
    let grad = |r: &Vec<f64>| DVector::from_iterator(n, r[1..=n].iter().copied());
    let mut sxx = DMatrix::zeros(n, n);
    for r in &centred {
        let g = grad(r);
        sxx += &g * g.transpose();
    }
    sxx /= samples as f64;
    let sxx_inv = sxx
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Consistency("gradient covariance is singular".into()))?;
    let gbar = DVector::from_iterator(n, centre[1..=n].iter().copied());
    let leverage = (gbar.transpose() * &sxx_inv * &gbar)[(0, 0)];
    let mut resid = vec![vec![0.0; dim]; samples];
    let mut intercepts = vec![0.0; dim];
    let mut resid_var = vec![0.0; dim];
    for c in (0..dim).filter(|&c| c == 0 || c > n) {
        let mut sxy = DVector::zeros(n);
        for r in &centred {
            sxy += grad(r) * r[c];
        }
        sxy /= samples as f64;
        let beta = &sxx_inv * sxy;
        let mut ss = 0.0;
        for (k, r) in centred.iter().enumerate() {
            let e = r[c] - (grad(r).transpose() * &beta)[(0, 0)];
            resid[k][c] = e;
            ss += e * e;
        }
        resid_var[c] = ss / (samples - n - 1) as f64;
        intercepts[c] = centre[c] - (gbar.transpose() * &beta)[(0, 0)];
    }
    let var_h = centred.iter().map(|r| r[0] * r[0]).sum::<f64>() / (samples - 1) as f64;
    let residual_ratio = resid_var[0] / var_h;

    let t2 = dot(sigma, sigma) / n as f64;
    let norm2 = dot(sigma, sigma);
    let proj = |i: usize, j: usize| f64::from(i == j) - sigma[i] * sigma[j] / norm2;
    let pf = p as f64;
    let cond_scale = pf * (pf - 1.0) * t2.powi(p as i32 - 2) / n as f64;
    let a_n = conditional_mean_matrix(sigma, potential)?;
    let mean_scale = (pf * (pf - 1.0)).sqrt() * t2.sqrt().powf(pf - 2.0);
    let mut conditional = Vec::new();
    let mut conditional_mean = Vec::new();
    for a in (n + 1)..dim {
        let Coord::Hess(i, j) = coords[a] else { unreachable!() };
        let se = (resid_var[a] * (1.0 + leverage) / samples as f64).sqrt();
        conditional_mean.push(EntryCheck::new(
            format!("E[{} | grad = 0]", coords[a].name()),
            -mean_scale * a_n[(i, j)],
            intercepts[a],
            se,
        ));
        for b in a..dim {
            let Coord::Hess(k, l) = coords[b] else { unreachable!() };
            let predicted = cond_scale * (proj(i, k) * proj(j, l) + proj(i, l) * proj(j, k));
            let (m, se) = mean_and_se(resid.iter().map(|r| r[a] * r[b]), samples);
            conditional.push(EntryCheck::new(
                format!("Cov[{}, {} | grad]", coords[a].name(), coords[b].name()),
                predicted,
                m,
                se,
            ));
        }
    }
    Ok(CovarianceReport { n, p, samples, entries, conditional, conditional_mean, residual_ratio, var_h_rel_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::presets;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for order in [1, 2, 5, 8, 16] {
            let (x, w) = gauss_legendre(order);
            for deg in 0..2 * order {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "order {order} degree {deg}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn hand_evaluated_model() {
        let v = presets::quartic();
        let s = 2f64.sqrt();
        let point = integrand(&[s, s], &v).unwrap();
        assert!((point.v[0] - 16.0).abs() < 1e-12 && (point.v[1] - 16.0).abs() < 1e-12);
        assert!((point.inner - 32.0 * s).abs() < 1e-12);
        let model = build_hessian_model(&[s, s], &v, None).unwrap();
        // v is parallel to sigma, so the rank-one term vanishes on the complement.
        assert!((model.mean_part[(0, 0)] - 24.0 / s).abs() < 1e-12);
    }

    #[test]
    fn basis_is_orthonormal_complement() {
        let sigma = [0.3, -1.2, 0.7, 2.0];
        for pivot in 0..4 {
            let b = completion_basis(&sigma, pivot).unwrap();
            let gram = b.transpose() * &b;
            assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-12);
            let proj = b.transpose() * DVector::from_row_slice(&sigma);
            assert!(proj.amax() < 1e-12);
        }
    }

    #[test]
    fn truncation_caps_diagonal() {
        let v = presets::sextic_mixed();
        let sigma = [3.0, 0.1, -0.5];
        let full = build_hessian_model(&sigma, &v, None).unwrap();
        let capped = build_hessian_model(&sigma, &v, Some(1.0)).unwrap();
        assert!(smallest_eigenvalue(&capped.mean_part) <= smallest_eigenvalue(&full.mean_part) + 1e-12);
        assert!(build_hessian_model(&sigma, &v, Some(0.0)).is_err());
    }

    #[test]
    fn folded_normal_oracles() {
        assert!((folded_normal_mean(0.0, 1.0) - (2.0 / PI).sqrt()).abs() < 1e-15);
        assert!((folded_normal_mean(3.0, 1.0) - 3.000_764).abs() < 1e-6);
        assert!((folded_normal_mean(-3.0, 1.0) - folded_normal_mean(3.0, 1.0)).abs() < 1e-14);
    }

    #[test]
    fn expected_abs_det_matches_folded_normal() {
        let v = presets::quartic();
        let model = build_hessian_model(&[0.6, -0.9], &v, None).unwrap();
        let est = expected_abs_det(&model, 20_000, 3).unwrap();
        assert!(est.agrees(3.0), "{est:?}");
        assert!(expected_abs_det(&model, 50, 3).is_err());
    }

    #[test]
    fn unit_integral_in_one_dimension() {
        // N = 1, p = 2, V = x^4: the integrand is 4|x| exp(-2x^4)/sqrt(2 pi), total mass 1.
        let v = presets::quartic();
        let est = expected_crt(1, &v, 0.0, &QuadSpec::default(), 0).unwrap();
        assert!((est.value - 1.0).abs() < 1e-6, "{est:?}");
    }

    #[test]
    fn one_dimensional_counts() {
        let v = presets::quartic();
        for g in [-1.3, 0.0, 0.4, 2.5] {
            let c = count_critical_points(&DMatrix::from_element(1, 1, g), &v, 0.0).unwrap();
            assert_eq!(c.total, if g > 0.0 { 3 } else { 1 }, "g = {g}");
            if g > 0.0 {
                assert!(c.max_residual < 1e-9);
            }
        }
    }

    #[test]
    fn reduction_inputs_are_consistent() {
        let v = presets::quartic_sextic_p3();
        let sigma = [0.4, -0.8, 1.1];
        let a = conditional_mean_matrix(&sigma, &v).unwrap();
        assert!((&a - a.transpose()).amax() < 1e-12);
    }

    #[test]
    fn field_loadings_reproduce_value() {
        // p = 2, N = 2: H = (g00 s0^2 + (g01 + g10) s0 s1 + g11 s1^2)/sqrt(2).
        let sigma = [0.5, -1.5];
        let l = field_loadings(&sigma, 2, &Coord::all(2));
        let k = 2f64.sqrt();
        assert!((l[0][0] - 0.25 / k).abs() < 1e-15);
        assert!((l[1][0] + 0.75 / k).abs() < 1e-15);
        // d/ds0 of g01 s0 s1 is g01 s1.
        assert!((l[1][1] + 1.5 / k).abs() < 1e-15);
        // d2/ds0ds1 of g01 s0 s1 is g01.
        assert!((l[1][4] - 1.0 / k).abs() < 1e-15);
    }
}
