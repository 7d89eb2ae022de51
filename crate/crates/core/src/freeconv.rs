//! Free additive convolution with the semicircle law.
//!
//! Convention: `m(z) = int dmu(x) / (x - z)`, which has positive imaginary part
//! on the upper half-plane. The convolution `mu = nu [+] sc` satisfies the
//! subordination equation `m(z) = m_nu(z + m(z))`.
//!
//! Two routes are provided. [`convolve_semicircle`] resolves the density on a
//! real grid by continuation in the distance to the real axis. For the
//! logarithmic potential at a point there is also an exact route: with
//! `omega = z + m(z)`, the function `Psi(z) = int log(x - omega) dnu + m(z)^2 / 2`
//! equals `int log(lambda - z) dmu`, so [`log_potential_at`] needs only one
//! scalar solve.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, Moments};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FreeConvOptions {
    /// Decreasing distances to the real axis used for continuation.
    pub eta_schedule: Vec<f64>,
    pub damping: f64,
    pub max_fixed_point_iter: usize,
    pub grid_points: usize,
    /// Fractional padding of the grid beyond the support bound.
    pub margin: f64,
    /// Resolution is doubled on `|lambda| <= refine_radius`.
    pub refine_radius: f64,
    /// Per-cell tolerance of the adaptive Simpson refinement.
    pub cell_tol: f64,
    pub max_depth: usize,
}

impl Default for FreeConvOptions {
    fn default() -> Self {
        FreeConvOptions {
            eta_schedule: vec![1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-8],
            damping: 0.5,
            max_fixed_point_iter: 200,
            grid_points: 4001,
            margin: 0.05,
            refine_radius: 0.1,
            cell_tol: 1e-11,
            max_depth: 24,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FreeConvResult {
    pub lambda: Vec<f64>,
    /// Density normalised to unit mass.
    pub density: Vec<f64>,
    /// Mass of the density before normalisation.
    pub mass: f64,
    /// The density vanishes outside `[-support_bound, support_bound]`.
    pub support_bound: f64,
    pub eta_final: f64,
}

/// `int dnu(x) / (x - w)` and its derivative in `w`.
fn transform(locs: &[f64], masses: &[f64], w: Complex64) -> (Complex64, Complex64) {
    let mut s = Complex64::new(0.0, 0.0);
    let mut s2 = Complex64::new(0.0, 0.0);
    for (x, m) in locs.iter().zip(masses) {
        let d = (x - w).inv();
        s += m * d;
        s2 += m * d * d;
    }
    (s, s2)
}

/// `sum w / |x - omega|^2`; strictly below one on the physical branch.
fn stability(locs: &[f64], masses: &[f64], omega: Complex64) -> f64 {
    locs.iter().zip(masses).map(|(x, m)| m / (x - omega).norm_sqr()).sum()
}

/// Newton on `F(m) = m - m_nu(z + m)` keeping `Im m >= 0`, with backtracking.
fn newton(locs: &[f64], masses: &[f64], z: Complex64, m0: Complex64, max_iter: usize) -> Option<Complex64> {
    let eval = |m: Complex64| {
        let (s, s2) = transform(locs, masses, z + m);
        (m - s, 1.0 - s2)
    };
    let mut m = m0;
    let (mut f, mut df) = eval(m);
    for _ in 0..max_iter {
        if f.norm() <= 1e-14 * (1.0 + m.norm()) {
            return Some(m);
        }
        let step = -f / df;
        if !step.is_finite() {
            return None;
        }
        let mut s = 1.0;
        loop {
            let cand = m + step * s;
            if cand.im >= 0.0 {
                let (f2, df2) = eval(cand);
                if f2.norm() < f.norm() {
                    m = cand;
                    f = f2;
                    df = df2;
                    break;
                }
            }
            s *= 0.5;
            if s < 1e-12 {
                return (f.norm() <= 1e-11 * (1.0 + m.norm())).then_some(m);
            }
        }
    }
    (f.norm() <= 1e-11 * (1.0 + m.norm())).then_some(m)
}

fn damped_fixed_point(locs: &[f64], masses: &[f64], z: Complex64, m0: Complex64, damping: f64, iters: usize) -> Complex64 {
    let mut m = m0;
    for _ in 0..iters {
        let next = transform(locs, masses, z + m).0;
        let upd = m * (1.0 - damping) + next * damping;
        let done = (upd - m).norm() <= 1e-13 * (1.0 + m.norm());
        m = upd;
        if done {
            break;
        }
    }
    m
}

fn accept(locs: &[f64], masses: &[f64], z: Complex64, m: Complex64) -> bool {
    m.im >= 0.0 && m.is_finite() && stability(locs, masses, z + m) <= 1.0 + 1e-6
}

/// Solve at `lambda + i eta_final` by continuation through `schedule`.
fn solve_continued(
    locs: &[f64],
    masses: &[f64],
    lambda: f64,
    schedule: &[f64],
    damping: f64,
    fp_iter: usize,
) -> Result<Complex64> {
    let first = Complex64::new(lambda, schedule[0]);
    let mut m = transform(locs, masses, first).0;
    for &eta in schedule {
        let z = Complex64::new(lambda, eta);
        let start = damped_fixed_point(locs, masses, z, m, damping, fp_iter);
        m = newton(locs, masses, z, start, 100)
            .or_else(|| newton(locs, masses, z, m, 100))
            .ok_or_else(|| Error::NonConvergence {
                what: "subordination equation",
                detail: format!("lambda = {lambda}, eta = {eta}"),
            })?;
        if m.im < 0.0 {
            return Err(Error::HerglotzViolation { lambda, eta });
        }
    }
    Ok(m)
}

/// Solve at a point from a nearby solution, falling back to full continuation.
fn solve_warm(
    locs: &[f64],
    masses: &[f64],
    lambda: f64,
    warm: Complex64,
    opts: &FreeConvOptions,
) -> Result<Complex64> {
    let eta = *opts.eta_schedule.last().unwrap();
    let z = Complex64::new(lambda, eta);
    if let Some(m) = newton(locs, masses, z, warm, 60) {
        if accept(locs, masses, z, m) {
            return Ok(m);
        }
    }
    solve_continued(locs, masses, lambda, &opts.eta_schedule, opts.damping, opts.max_fixed_point_iter)
}

struct Sample {
    lambda: f64,
    m: Complex64,
}

impl Sample {
    fn density(&self) -> f64 {
        self.m.im / std::f64::consts::PI
    }
}

/// Density of `nu [+] sc` on a grid spanning `max |atom| + 2` plus a margin.
pub fn convolve_semicircle(nu: &DiscreteMeasure, opts: &FreeConvOptions) -> Result<FreeConvResult> {
    if opts.eta_schedule.is_empty() || opts.eta_schedule.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidArgument("eta schedule must be nonempty and positive".into()));
    }
    if opts.grid_points < 3 {
        return Err(Error::InvalidArgument("at least three grid points are needed".into()));
    }
    let merged = nu.merged();
    let (locs, masses) = (&merged.locations, &merged.masses);
    let support_bound = merged.max_abs() + 2.0;
    let half = support_bound * (1.0 + opts.margin);
    let n = opts.grid_points;
    let h = 2.0 * half / (n - 1) as f64;
    let mut base: Vec<f64> = (0..n).map(|i| -half + h * i as f64).collect();
    let extra: Vec<f64> = base
        .windows(2)
        .map(|w| 0.5 * (w[0] + w[1]))
        .filter(|x| x.abs() <= opts.refine_radius)
        .collect();
    base.extend(extra);
    base.sort_by(f64::total_cmp);

    let solved: Vec<Complex64> = base
        .par_iter()
        .map(|&l| solve_continued(locs, masses, l, &opts.eta_schedule, opts.damping, opts.max_fixed_point_iter))
        .collect::<Result<_>>()?;
    let samples: Vec<Sample> = base.iter().zip(solved).map(|(&lambda, m)| Sample { lambda, m }).collect();

    // Adaptive Simpson on every cell; all evaluated points are kept for the output grid.
    let cells: Vec<(Vec<Sample>, f64)> = samples
        .par_windows(2)
        .map(|w| refine_cell(locs, masses, &w[0], &w[1], opts))
        .collect::<Result<_>>()?;
    let mut lambda = Vec::with_capacity(samples.len() * 3);
    let mut raw = Vec::with_capacity(samples.len() * 3);
    let mut mass = 0.0;
    lambda.push(samples[0].lambda);
    raw.push(samples[0].density());
    for (pts, integral) in cells {
        mass += integral;
        for s in pts.iter().skip(1) {
            lambda.push(s.lambda);
            raw.push(s.density());
        }
    }
    let density = raw.iter().map(|d| d / mass).collect();
    Ok(FreeConvResult { lambda, density, mass, support_bound, eta_final: *opts.eta_schedule.last().unwrap() })
}

/// Returns the points of the refined cell (both endpoints included) and its integral.
fn refine_cell(
    locs: &[f64],
    masses: &[f64],
    a: &Sample,
    b: &Sample,
    opts: &FreeConvOptions,
) -> Result<(Vec<Sample>, f64)> {
    let eval = |l: f64, warm: Complex64| -> Result<Sample> {
        Ok(Sample { lambda: l, m: solve_warm(locs, masses, l, warm, opts)? })
    };
    let mid = eval(0.5 * (a.lambda + b.lambda), a.m)?;
    let mut out = vec![Sample { lambda: a.lambda, m: a.m }];
    let integral = simpson_recurse(&eval, a, &mid, b, opts.cell_tol, opts.max_depth, &mut out)?;
    Ok((out, integral))
}

fn simpson(a: &Sample, m: &Sample, b: &Sample) -> f64 {
    (b.lambda - a.lambda) / 6.0 * (a.density() + 4.0 * m.density() + b.density())
}

fn simpson_recurse(
    eval: &impl Fn(f64, Complex64) -> Result<Sample>,
    a: &Sample,
    m: &Sample,
    b: &Sample,
    tol: f64,
    depth: usize,
    out: &mut Vec<Sample>,
) -> Result<f64> {
    let whole = simpson(a, m, b);
    let lm = eval(0.5 * (a.lambda + m.lambda), a.m)?;
    let rm = eval(0.5 * (m.lambda + b.lambda), m.m)?;
    let left = simpson(a, &lm, m);
    let right = simpson(m, &rm, b);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        out.push(lm);
        out.push(Sample { lambda: m.lambda, m: m.m });
        out.push(rm);
        out.push(Sample { lambda: b.lambda, m: b.m });
        return Ok(left + right + diff / 15.0);
    }
    let l = simpson_recurse(eval, a, &lm, m, 0.5 * tol, depth - 1, out)?;
    out.pop();
    let r = simpson_recurse(eval, m, &rm, b, 0.5 * tol, depth - 1, out)?;
    Ok(l + r)
}

/// Antiderivatives of `log|x|` and `x log|x|`, continuous at zero.
fn log_antiderivatives(x: f64) -> (f64, f64) {
    if x == 0.0 {
        return (0.0, 0.0);
    }
    let l = x.abs().ln();
    (x * l - x, 0.5 * x * x * l - 0.25 * x * x)
}

impl FreeConvResult {
    /// `int log|lambda - x0| f(lambda) dlambda` for the piecewise-linear density.
    pub fn log_potential_at(&self, x0: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.lambda.len() - 1 {
            let (a, b) = (self.lambda[i] - x0, self.lambda[i + 1] - x0);
            let (fa, fb) = (self.density[i], self.density[i + 1]);
            if fa == 0.0 && fb == 0.0 {
                continue;
            }
            let slope = (fb - fa) / (b - a);
            let icpt = fa - slope * a;
            let (a0, a1) = log_antiderivatives(a);
            let (b0, b1) = log_antiderivatives(b);
            total += icpt * (b0 - a0) + slope * (b1 - a1);
        }
        total
    }

    pub fn log_potential(&self) -> f64 {
        self.log_potential_at(0.0)
    }

    /// Trapezoidal integral of `g(lambda) f(lambda)`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.lambda
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(l, d)| 0.5 * (l[1] - l[0]) * (g(l[0]) * d[0] + g(l[1]) * d[1]))
            .sum()
    }

    /// Cumulative distribution at each grid node.
    pub fn cdf_nodes(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.lambda.len());
        out.push(0.0);
        for i in 1..self.lambda.len() {
            acc += 0.5 * (self.lambda[i] - self.lambda[i - 1]) * (self.density[i] + self.density[i - 1]);
            out.push(acc);
        }
        out
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let c = self.cdf_nodes();
        interpolate(&self.lambda, &c, x)
    }

    pub fn max_density_outside(&self, bound: f64) -> f64 {
        self.lambda
            .iter()
            .zip(&self.density)
            .filter(|(l, _)| l.abs() > bound)
            .map(|(_, d)| *d)
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,density\n");
        for (l, d) in self.lambda.iter().zip(&self.density) {
            writeln!(s, "{:.12e},{:.12e}", l, d).unwrap();
        }
        s
    }
}

impl Moments for FreeConvResult {
    fn moment(&self, s: f64) -> f64 {
        self.integrate(|l| l.abs().powf(s))
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let k = xs.partition_point(|v| *v <= x);
    let (x0, x1) = (xs[k - 1], xs[k]);
    ys[k - 1] + (ys[k] - ys[k - 1]) * (x - x0) / (x1 - x0)
}

/// Kolmogorov-Smirnov distance between two convolution outputs.
pub fn ks_distance(a: &FreeConvResult, b: &FreeConvResult) -> f64 {
    let (ca, cb) = (a.cdf_nodes(), b.cdf_nodes());
    let mut d: f64 = 0.0;
    for (x, c) in a.lambda.iter().zip(&ca) {
        d = d.max((c - interpolate(&b.lambda, &cb, *x)).abs());
    }
    for (x, c) in b.lambda.iter().zip(&cb) {
        d = d.max((c - interpolate(&a.lambda, &ca, *x)).abs());
    }
    d
}

/// Solution of the subordination equation just above a real point.
#[derive(Debug, Clone, Copy)]
pub struct Subordination {
    pub m: Complex64,
    pub omega: Complex64,
    pub log_potential: f64,
    pub stability: f64,
}

/// Distance above the real axis at which the exact route is evaluated.
pub const ORIGIN_ETA: f64 = 1e-12;

/// Exact logarithmic potential `int log|lambda| d(nu [+] sc)` from atoms and masses.
/// `warm` is a previous value of `m` for a nearby measure.
pub fn log_potential_origin(locs: &[f64], masses: &[f64], warm: Option<Complex64>) -> Result<Subordination> {
    let z = Complex64::new(0.0, ORIGIN_ETA);
    let finish = |m: Complex64| {
        let omega = z + m;
        let lp: f64 = locs
            .iter()
            .zip(masses)
            .filter(|(_, w)| **w > 0.0)
            .map(|(x, w)| w * (x - omega).norm().ln())
            .sum::<f64>()
            + 0.5 * (m * m).re;
        Subordination { m, omega, log_potential: lp, stability: stability(locs, masses, omega) }
    };
    if let Some(w) = warm {
        if let Some(m) = newton(locs, masses, z, w, 40) {
            if accept(locs, masses, z, m) {
                return Ok(finish(m));
            }
        }
    }
    let top = 10.0 * (1.0 + locs.iter().map(|x| x.abs()).fold(0.0, f64::max));
    let mut schedule = vec![top];
    while *schedule.last().unwrap() > ORIGIN_ETA {
        schedule.push((schedule.last().unwrap() / 10.0).max(ORIGIN_ETA));
    }
    let m = solve_continued(locs, masses, 0.0, &schedule, 0.5, 200)?;
    if !accept(locs, masses, z, m) {
        return Err(Error::NonConvergence {
            what: "subordination at the origin",
            detail: format!("solution {m} is not on the physical branch"),
        });
    }
    Ok(finish(m))
}

/// `int log|lambda - x0| d(nu [+] sc)` by the exact route.
pub fn log_potential_at(nu: &DiscreteMeasure, x0: f64) -> Result<f64> {
    let merged = nu.merged();
    let shifted: Vec<f64> = merged.locations.iter().map(|x| x - x0).collect();
    Ok(log_potential_origin(&shifted, &merged.masses, None)?.log_potential)
}

/// Derivatives of the exact log potential at the origin with respect to each
/// mass and each atom location. Stationarity in `m` makes these partial
/// derivatives at fixed `omega`.
pub fn log_potential_sensitivities(locs: &[f64], masses: &[f64], sol: &Subordination) -> (Vec<f64>, Vec<f64>) {
    let d_mass = locs.iter().map(|x| (x - sol.omega).norm().ln()).collect();
    let d_loc = locs.iter().zip(masses).map(|(x, w)| w * (x - sol.omega).inv().re).collect();
    (d_mass, d_loc)
}

/// `int |x|^s d sc = 2^{s+1} B((s+1)/2, 3/2) / pi`.
pub fn semicircle_moment(s: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let a = 0.5 * (s + 1.0);
    let ln_beta = ln_gamma(a) + ln_gamma(1.5) - ln_gamma(a + 1.5);
    ((s + 1.0) * 2f64.ln() + ln_beta).exp() / std::f64::consts::PI
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentBound {
    pub s: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Compare `m_s(nu [+] sc)` with `2^s (m_s(nu) + m_s(sc))`.
pub fn moment_bound_check(nu: &DiscreteMeasure, s: f64, opts: &FreeConvOptions) -> Result<MomentBound> {
    let conv = convolve_semicircle(nu, opts)?;
    let lhs = conv.moment(s);
    let rhs = 2f64.powf(s) * (nu.moment(s) + semicircle_moment(s));
    Ok(MomentBound { s, lhs, rhs, holds: lhs <= rhs })
}
