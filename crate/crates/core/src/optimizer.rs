//! Maximisation of the complexity functional over grid measures under the
//! energy-level constraint.
//!
//! The search runs over the weights of a fixed symmetric grid, stored as
//! log-weights so that no node is lost to underflow. Each step is an entropic
//! mirror update `log w <- log w + s grad` followed by the relative-entropy
//! projection onto the half-space `sum w a >= u`, where
//! `a(x) = x V'(x)/p - V(x)`. The step size backtracks until the value does
//! not decrease.
//!
//! At a stationary point `log w` equals a field that depends on the weights
//! only through six scalar features, plus a multiple of `a`. Bursts of mirror
//! steps alternate with a quasi-Newton search over those features. Several
//! starts are run and the best result is kept.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{exponent_weight, hessian_scale};
use crate::error::{Error, Result};
use crate::freeconv;
use crate::functional::{self, base_constant, FunctionalValue};
use crate::measure::{symmetric_nodes, GridMeasure};
use crate::potential::Potential;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub grid_half_width: f64,
    pub grid_points: usize,
    /// Total number of ascent runs, including `random_starts`.
    pub restarts: usize,
    /// Runs started from noisy Gaussians with random scale and Dirichlet noise.
    pub random_starts: usize,
    /// Number of Gaussian dilations scanned to pick the deterministic starts.
    pub scan_points: usize,
    /// Smallest and largest scanned standard deviation.
    pub scan_range: (f64, f64),
    pub seed: u64,
    pub max_iter: usize,
    /// Relative improvement below which a run counts as stalled.
    pub tol: f64,
    /// Truncation level for the curvature pushforward; `None` means no truncation.
    pub truncation: Option<f64>,
    /// Width of the final bracket for the critical level.
    pub level_tol: f64,
    /// First trial level when expanding the bracket.
    pub level_step: f64,
    /// Smallest admissible `sqrt(m2)` in units of the cell width. Below the
    /// grid resolution the discrete entropy saturates while `-log m2` does not,
    /// so the discretised functional is unbounded there.
    pub min_scale_cells: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grid_half_width: 8.0,
            grid_points: 2001,
            restarts: 8,
            random_starts: 2,
            scan_points: 64,
            scan_range: (0.02, 4.0),
            seed: 0,
            max_iter: 4000,
            tol: 1e-12,
            truncation: None,
            level_tol: 1e-2,
            level_step: 0.25,
            min_scale_cells: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartRecord {
    pub label: String,
    pub initial_value: f64,
    pub final_value: f64,
    pub iterations: usize,
    pub stalled: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub u: f64,
    pub sigma: f64,
    pub value: FunctionalValue,
    pub best_measure: GridMeasure,
    /// `sum w a - u` at the maximiser; nonnegative up to rounding.
    pub feasibility_slack: f64,
    pub iterations: usize,
    /// Per-start outcomes; the best final value equals `sigma`.
    pub restarts: Vec<RestartRecord>,
    /// `I(symmetrised maximiser) - I(maximiser)`; positive values flag a better symmetric point.
    pub symmetrization_gain: f64,
    /// Set when the monotone pass of a curve replaced this maximiser by one found at a larger level.
    pub replaced_by_larger_level: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalLevelReport {
    pub u_c: f64,
    pub bracket: (f64, f64),
    pub sigma_at_zero: f64,
    /// Every level evaluated, with its value; infeasible levels carry `-inf` as `None`.
    pub evaluations: Vec<(f64, Option<f64>)>,
}

/// Precomputed node data for fast evaluation of the functional and its gradient.
struct Objective {
    p: u32,
    nodes: Vec<f64>,
    delta: f64,
    slope: Vec<f64>,
    curvature: Vec<f64>,
    level: Vec<f64>,
    cap: f64,
    m2_floor: f64,
}

struct Eval {
    value: f64,
    m: Complex64,
}

#[derive(Debug, Clone, Copy)]
struct Features {
    m2: f64,
    align: f64,
    grad: f64,
    omega: Complex64,
    /// `sum_i w_i Re(1/(g_i - omega)) g_i` over untruncated atoms.
    curvature_response: f64,
}

impl Features {
    fn to_array(self) -> [f64; 6] {
        [self.m2, self.align, self.grad, self.omega.re, self.omega.im, self.curvature_response]
    }

    fn from_array(a: &[f64; 6]) -> Option<Self> {
        (a[0] > 0.0 && a[2] >= 0.0).then(|| Features {
            m2: a[0],
            align: a[1],
            grad: a[2],
            omega: Complex64::new(a[3], a[4]),
            curvature_response: a[5],
        })
    }
}

impl Objective {
    fn new(potential: &Potential, config: &SolverConfig) -> Self {
        let (nodes, delta) = symmetric_nodes(config.grid_half_width, config.grid_points);
        let mut slope = Vec::with_capacity(nodes.len());
        let mut curvature = Vec::with_capacity(nodes.len());
        let mut level = Vec::with_capacity(nodes.len());
        for &x in &nodes {
            let (_, d1, d2) = potential.eval(x);
            slope.push(d1);
            curvature.push(d2);
            level.push(potential.level_density(x));
        }
        Objective {
            p: potential.p,
            nodes,
            delta,
            slope,
            curvature,
            level,
            cap: config.truncation.unwrap_or(f64::INFINITY),
            m2_floor: (config.min_scale_cells * delta).powi(2),
        }
    }

    fn atoms(&self, m2: f64) -> (Vec<f64>, Vec<bool>) {
        let c1 = hessian_scale(self.p);
        let tp = m2.powf(0.5 * (2.0 - self.p as f64));
        let mut capped = Vec::with_capacity(self.nodes.len());
        let atoms = self
            .curvature
            .iter()
            .map(|d2| {
                let g = tp * d2;
                capped.push(g > self.cap);
                c1 * g.min(self.cap)
            })
            .collect();
        (atoms, capped)
    }

    fn moments(&self, w: &[f64]) -> (f64, f64, f64, f64) {
        let (mut m2, mut align, mut grad, mut ent) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..w.len() {
            let x = self.nodes[i];
            m2 += w[i] * x * x;
            align += w[i] * x * self.slope[i];
            grad += w[i] * self.slope[i] * self.slope[i];
            if w[i] > 0.0 {
                ent += w[i] * (w[i] / self.delta).ln();
            }
        }
        (m2, align, grad, ent)
    }

    /// The functional in the simplified form
    /// `1/2 log(p-1) + 1/2 + phi - sum w log(w/delta) - 1/2 log(2 pi) - 1/2 - 1/2 log m2`.
    fn value(&self, w: &[f64], warm: Option<Complex64>) -> Result<Eval> {
        let (m2, align, grad, ent) = self.moments(w);
        if !(m2 >= self.m2_floor) || m2 == 0.0 {
            return Err(Error::InvalidMeasure("iterate is narrower than the grid resolution".into()));
        }
        let p = self.p as f64;
        let c3 = exponent_weight(self.p);
        let phi1 = c3 * (p - 1.0) * m2.powf(-p) * align * align;
        let phi2 = c3 * p * m2.powf(1.0 - p) * grad;
        let (atoms, _) = self.atoms(m2);
        let sol = freeconv::log_potential_origin(&atoms, w, warm)?;
        let value = base_constant(self.p) + phi1 - phi2 + sol.log_potential - ent
            - 0.5 * (2.0 * std::f64::consts::PI).ln()
            - 0.5
            - 0.5 * m2.ln();
        Ok(Eval { value, m: sol.m })
    }

    /// The scalars through which the gradient depends on the weights.
    fn features(&self, w: &[f64], warm: Option<Complex64>) -> Result<(Features, Eval)> {
        let (m2, align, grad, ent) = self.moments(w);
        if !(m2 >= self.m2_floor) || m2 == 0.0 {
            return Err(Error::InvalidMeasure("iterate is narrower than the grid resolution".into()));
        }
        let p = self.p as f64;
        let c3 = exponent_weight(self.p);
        let (atoms, capped) = self.atoms(m2);
        let sol = freeconv::log_potential_origin(&atoms, w, warm)?;
        let (_, d_loc) = freeconv::log_potential_sensitivities(&atoms, w, &sol);
        let curvature_response = (0..w.len()).filter(|&i| !capped[i]).map(|i| d_loc[i] * atoms[i]).sum();
        let phi1 = c3 * (p - 1.0) * m2.powf(-p) * align * align;
        let phi2 = c3 * p * m2.powf(1.0 - p) * grad;
        let value = base_constant(self.p) + phi1 - phi2 + sol.log_potential - ent
            - 0.5 * (2.0 * std::f64::consts::PI).ln()
            - 0.5
            - 0.5 * m2.ln();
        let f = Features { m2, align, grad, omega: sol.omega, curvature_response };
        Ok((f, Eval { value, m: sol.m }))
    }

    /// Gradient of everything except the entropy, as a function of the features.
    fn field(&self, f: &Features) -> Vec<f64> {
        let p = self.p as f64;
        let c3 = exponent_weight(self.p);
        let m2 = f.m2;
        let d_m2 = -c3 * (p - 1.0) * p * m2.powf(-p - 1.0) * f.align * f.align
            - c3 * p * (1.0 - p) * m2.powf(-p) * f.grad
            + f.curvature_response * (2.0 - p) / (2.0 * m2)
            - 0.5 / m2;
        let a1 = 2.0 * c3 * (p - 1.0) * m2.powf(-p) * f.align;
        let a2 = c3 * p * m2.powf(1.0 - p);
        let (atoms, _) = self.atoms(m2);
        (0..self.nodes.len())
            .map(|j| {
                let x = self.nodes[j];
                a1 * x * self.slope[j] - a2 * self.slope[j] * self.slope[j]
                    + (atoms[j] - f.omega).norm().ln()
                    + d_m2 * x * x
            })
            .collect()
    }

    /// Gradient in the weights. The entropy part uses the log-weights, which
    /// stay finite where the weights underflow.
    fn gradient(&self, state: &State, warm: Option<Complex64>) -> Result<(Eval, Vec<f64>)> {
        let (f, e) = self.features(&state.weights, warm)?;
        let mut g = self.field(&f);
        let log_delta = self.delta.ln();
        for (gj, lj) in g.iter_mut().zip(&state.log_weights) {
            *gj += -(lj - log_delta) - 1.0;
        }
        Ok((e, g))
    }

    /// Stationary weights for given features: `log w = field + const`, projected.
    fn gibbs(&self, f: &Features, u: f64) -> State {
        let mut state = State::from_log(self.field(f));
        self.project(&mut state, u);
        state
    }

    /// Every stationary point is `gibbs(f)` for its own features `f`, so
    /// maximising `I(gibbs(f))` over the six features is an exact reduction of
    /// the problem. Near the spectral edge the reduced problem is badly
    /// conditioned; quasi-Newton steps on relative coordinates handle that.
    fn polish(&self, w: &[f64], u: f64, warm: Complex64) -> Option<(State, Eval)> {
        let (f0, e0) = self.features(w, Some(warm)).ok()?;
        let origin = f0.to_array();
        let scale = origin.map(|v| v.abs().max(1e-3));
        let unscale = |y: &[f64; 6]| {
            let mut a = origin;
            for i in 0..6 {
                a[i] += scale[i] * y[i];
            }
            a
        };
        let eval = |y: &[f64; 6]| -> Option<(State, Eval)> {
            let f = Features::from_array(&unscale(y))?;
            let w = self.gibbs(&f, u);
            let e = self.value(&w.weights, Some(warm)).ok()?;
            e.value.is_finite().then_some((w, e))
        };
        let score = |y: &[f64; 6]| eval(y).map_or(f64::NEG_INFINITY, |(_, e)| e.value);
        let (y, v) = bfgs(&score, [0.0; 6], POLISH_EVALS);
        if !(v > e0.value) {
            return None;
        }
        eval(&y).filter(|(_, e)| e.value >= e0.value)
    }

    fn max_level(&self) -> f64 {
        self.level.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn level_of(&self, w: &[f64]) -> f64 {
        w.iter().zip(&self.level).map(|(a, b)| a * b).sum()
    }

    /// Relative-entropy projection onto `sum w a >= u`: tilt by `exp(lambda a)`.
    /// The tilted mean of `a` increases in `lambda` with derivative equal to
    /// the tilted variance, so Newton steps are safeguarded by a bracket.
    fn project(&self, state: &mut State, u: f64) {
        if self.level_of(&state.weights) >= u {
            return;
        }
        let amax = self.max_level();
        let shifted: Vec<f64> = self.level.iter().map(|a| a - amax).collect();
        let mut buf = vec![0.0; state.len()];
        let tilted = |lam: f64, out: &mut Vec<f64>| -> (f64, f64) {
            for (o, (l, a)) in out.iter_mut().zip(state.log_weights.iter().zip(&shifted)) {
                *o = l + lam * a;
            }
            softmax_into(out);
            let (mut mean, mut second) = (0.0, 0.0);
            for (o, a) in out.iter().zip(&self.level) {
                mean += o * a;
                second += o * a * a;
            }
            (mean, (second - mean * mean).max(0.0))
        };
        let (mut lo, mut hi) = (0.0, 1.0 / amax.max(1e-300));
        while tilted(hi, &mut buf).0 < u {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                break;
            }
        }
        let mut lam = hi;
        for _ in 0..100 {
            let (mean, var) = tilted(lam, &mut buf);
            if mean >= u {
                hi = lam;
                if mean - u <= 1e-14 * (1.0 + u.abs()) {
                    break;
                }
            } else {
                lo = lam;
            }
            let newton = lam - (mean - u) / var;
            lam = if var > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        for (l, a) in state.log_weights.iter_mut().zip(&shifted) {
            *l += hi * a;
        }
        state.renormalize();
    }
}

/// Normalised weights together with their logarithms.
#[derive(Clone)]
struct State {
    log_weights: Vec<f64>,
    weights: Vec<f64>,
}

impl State {
    fn from_log(log_weights: Vec<f64>) -> Self {
        let mut s = State { weights: vec![0.0; log_weights.len()], log_weights };
        s.renormalize();
        s
    }

    /// Log-weights of a weight vector; zero weights sit far below the smallest positive one.
    fn from_weights(w: &[f64]) -> Self {
        let low = w.iter().filter(|v| **v > 0.0).map(|v| v.ln()).fold(0.0, f64::min) - 50.0;
        State::from_log(w.iter().map(|v| if *v > 0.0 { v.ln() } else { low }).collect())
    }

    fn len(&self) -> usize {
        self.weights.len()
    }

    /// Shift the log-weights to sum to one and recompute the weights.
    fn renormalize(&mut self) {
        let top = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = self.log_weights.iter().map(|l| (l - top).exp()).sum();
        let shift = top + total.ln();
        for (l, w) in self.log_weights.iter_mut().zip(self.weights.iter_mut()) {
            *l -= shift;
            *w = l.exp();
        }
    }
}

/// In-place softmax.
fn softmax_into(v: &mut [f64]) {
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = (*x - top).exp();
        total += *x;
    }
    v.iter_mut().for_each(|x| *x /= total);
}

/// Evaluation budget of one feature-space polish.
const POLISH_EVALS: usize = 600;

/// Maximise `f` by BFGS with central-difference gradients and backtracking.
fn bfgs(f: &impl Fn(&[f64; 6]) -> f64, x0: [f64; 6], max_eval: usize) -> ([f64; 6], f64) {
    const N: usize = 6;
    const H: f64 = 1e-6;
    let mut evals = 0;
    let grad = |x: &[f64; N], evals: &mut usize| -> Option<[f64; N]> {
        let mut g = [0.0; N];
        for i in 0..N {
            let (mut a, mut b) = (*x, *x);
            a[i] += H;
            b[i] -= H;
            g[i] = (f(&a) - f(&b)) / (2.0 * H);
        }
        *evals += 2 * N;
        g.iter().all(|v| v.is_finite()).then_some(g)
    };
    let dot = |a: &[f64; N], b: &[f64; N]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut x = x0;
    let mut fx = f(&x);
    evals += 1;
    let Some(mut g) = grad(&x, &mut evals) else {
        return (x, fx);
    };
    let mut inv = [[0.0; N]; N];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut first = true;
    let mut quiet = 0;
    while evals < max_eval {
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = dot(&inv[i], &g);
        }
        let mut slope = dot(&g, &d);
        if !(slope > 0.0) {
            for (i, row) in inv.iter_mut().enumerate() {
                *row = [0.0; N];
                row[i] = 1.0;
            }
            d = g;
            slope = dot(&g, &g);
            first = true;
        }
        if first {
            // Keep the first trial step small in relative coordinates.
            let norm = dot(&d, &d).sqrt();
            if norm > 1e-2 {
                d.iter_mut().for_each(|v| *v *= 1e-2 / norm);
                slope *= 1e-2 / norm;
            }
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn = x;
            for i in 0..N {
                xn[i] += alpha * d[i];
            }
            let fnew = f(&xn);
            evals += 1;
            if fnew >= fx + 1e-4 * alpha * slope {
                accepted = Some((xn, fnew));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            break;
        };
        let Some(gn) = grad(&xn, &mut evals) else {
            if fnew > fx {
                x = xn;
                fx = fnew;
            }
            break;
        };
        let mut s = [0.0; N];
        let mut yv = [0.0; N];
        for i in 0..N {
            s[i] = xn[i] - x[i];
            yv[i] = g[i] - gn[i];
        }
        let gain = fnew - fx;
        x = xn;
        fx = fnew;
        g = gn;
        let sy = dot(&s, &yv);
        if sy > 1e-300 {
            if first {
                let scale = sy / dot(&yv, &yv);
                for (i, row) in inv.iter_mut().enumerate() {
                    *row = [0.0; N];
                    row[i] = scale;
                }
                first = false;
            }
            let rho = 1.0 / sy;
            let mut hy = [0.0; N];
            for i in 0..N {
                hy[i] = dot(&inv[i], &yv);
            }
            let yhy = dot(&yv, &hy);
            for i in 0..N {
                for j in 0..N {
                    inv[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        if gain <= 1e-13 * (1.0 + fx.abs()) {
            quiet += 1;
            if quiet >= 2 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    (x, fx)
}

struct RunOutcome {
    weights: Vec<f64>,
    value: f64,
    iterations: usize,
    stalled: bool,
}

/// One mirror-ascent step with backtracking. Returns `None` when no step size
/// gives an increase.
fn mirror_step(obj: &Objective, state: &State, cur: &Eval, g: &[f64], u: f64, step: &mut f64) -> Option<(State, Eval)> {
    loop {
        let logs = state.log_weights.iter().zip(g).map(|(l, gj)| l + *step * gj).collect();
        let mut trial = State::from_log(logs);
        obj.project(&mut trial, u);
        let ascent: f64 = trial.weights.iter().zip(&state.weights).zip(g).map(|((a, b), gj)| gj * (a - b)).sum();
        if let Ok(next) = obj.value(&trial.weights, Some(cur.m)) {
            if next.value.is_finite() && next.value >= cur.value + 1e-4 * ascent.max(0.0) {
                return Some((trial, next));
            }
        }
        *step *= 0.5;
        if *step < 1e-14 {
            return None;
        }
    }
}

/// Mirror-ascent steps per round between feature-space polishes.
const BURST: usize = 40;
/// Upper bound on rounds per run.
const MAX_ROUNDS: usize = 12;
/// A run stops once a whole round gains less than this, relative.
const ROUND_TOL: f64 = 1e-9;

fn ascend(obj: &Objective, start: State, u: f64, config: &SolverConfig) -> Result<(RunOutcome, f64)> {
    let mut state = start;
    obj.project(&mut state, u);
    let (mut cur, mut g) = obj.gradient(&state, None)?;
    let initial = cur.value;
    let mut step: f64 = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..MAX_ROUNDS {
        let round_start = cur.value;
        let mut quiet = 0;
        for _ in 0..BURST {
            if iterations >= config.max_iter {
                break;
            }
            iterations += 1;
            let Some((next_state, next)) = mirror_step(obj, &state, &cur, &g, u, &mut step) else {
                break;
            };
            let gain = next.value - cur.value;
            state = next_state;
            (cur, g) = obj.gradient(&state, Some(next.m))?;
            step = (step * 2.0).min(1e3);
            if gain <= config.tol * (1.0 + cur.value.abs()) {
                quiet += 1;
                if quiet >= 5 {
                    break;
                }
            } else {
                quiet = 0;
            }
        }
        if let Some((polished, ep)) = obj.polish(&state.weights, u, cur.m) {
            if ep.value > cur.value && obj.level_of(&polished.weights) >= u - 1e-12 {
                state = polished;
                (cur, g) = obj.gradient(&state, Some(ep.m))?;
            }
        }
        if cur.value - round_start <= ROUND_TOL * (1.0 + cur.value.abs()) {
            converged = true;
            break;
        }
        if iterations >= config.max_iter {
            break;
        }
    }
    Ok((RunOutcome { weights: state.weights, value: cur.value, iterations, stalled: !converged }, initial))
}

fn gaussian_state(nodes: &[f64], scale: f64) -> State {
    State::from_log(nodes.iter().map(|x| -0.5 * (x / scale).powi(2)).collect())
}

/// Gaussian dilations ranked by value among those meeting the level, local
/// maxima of the scan first.
fn scan_starts(obj: &Objective, u: f64, config: &SolverConfig) -> Vec<(String, State)> {
    let (lo, hi) = config.scan_range;
    let n = config.scan_points.max(2);
    let scanned: Vec<(f64, Option<f64>)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let s = lo * (hi / lo).powf(k as f64 / (n - 1) as f64);
            let w = gaussian_state(&obj.nodes, s).weights;
            let v = (obj.level_of(&w) >= u).then(|| obj.value(&w, None).ok().map(|e| e.value)).flatten();
            (s, v.filter(|v| v.is_finite()))
        })
        .collect();
    let value = |k: usize| scanned[k].1.unwrap_or(f64::NEG_INFINITY);
    let mut order: Vec<usize> = (0..n).filter(|&k| scanned[k].1.is_some()).collect();
    let is_peak = |k: usize| (k == 0 || value(k) >= value(k - 1)) && (k + 1 == n || value(k) >= value(k + 1));
    order.sort_by(|&a, &b| is_peak(b).cmp(&is_peak(a)).then(value(b).total_cmp(&value(a))));
    let wanted = config.restarts.saturating_sub(config.random_starts).max(1);
    order
        .into_iter()
        .take(wanted)
        .map(|k| (format!("gaussian({:.4})", scanned[k].0), gaussian_state(&obj.nodes, scanned[k].0)))
        .collect()
}

fn random_starts(obj: &Objective, config: &SolverConfig) -> Vec<(String, State)> {
    let (lo, hi) = config.scan_range;
    (0..config.random_starts.min(config.restarts))
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(k as u64 + 1);
            let e: f64 = Exp1.sample(&mut rng);
            let scale = (lo * hi).sqrt() * (e - 1.0).exp().min(hi / (lo * hi).sqrt());
            // Dirichlet noise around the Gaussian: independent exponentials times the base weights.
            let logs = obj
                .nodes
                .iter()
                .map(|x| {
                    let e: f64 = Exp1.sample(&mut rng);
                    -0.5 * (x / scale).powi(2) + e.ln()
                })
                .collect();
            (format!("random({k}, scale {scale:.4})"), State::from_log(logs))
        })
        .collect()
}

fn maximize_with(potential: &Potential, u: f64, config: &SolverConfig, extra: &[(String, State)]) -> Result<ComplexityReport> {
    if config.grid_points < 3 || !(config.grid_half_width > 0.0) {
        return Err(Error::InvalidArgument("grid needs positive width and at least three points".into()));
    }
    if !(u >= 0.0) {
        return Err(Error::InvalidArgument(format!("level must be nonnegative, got {u}")));
    }
    let obj = Objective::new(potential, config);
    let amax = obj.max_level();
    if amax < u {
        return Err(Error::Infeasible { u, max: amax });
    }
    let mut all = extra.to_vec();
    all.extend(scan_starts(&obj, u, config));
    all.extend(random_starts(&obj, config));
    let runs: Vec<(String, Result<(RunOutcome, f64)>)> = all
        .into_par_iter()
        .map(|(label, w)| {
            let r = ascend(&obj, w, u, config);
            (label, r)
        })
        .collect();
    let mut records = Vec::new();
    let mut best: Option<RunOutcome> = None;
    let mut total_iter = 0;
    let mut first_err = None;
    for (label, r) in runs {
        match r {
            Ok((out, initial)) => {
                total_iter += out.iterations;
                records.push(RestartRecord {
                    label,
                    initial_value: initial,
                    final_value: out.value,
                    iterations: out.iterations,
                    stalled: out.stalled,
                });
                if best.as_ref().is_none_or(|b| out.value > b.value) {
                    best = Some(out);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let best = match (best, first_err) {
        (Some(b), _) => b,
        (None, Some(e)) => return Err(e),
        (None, None) => return Err(Error::InvalidArgument("no starting measures".into())),
    };
    let (nodes, delta) = symmetric_nodes(config.grid_half_width, config.grid_points);
    let measure = GridMeasure::new(nodes, best.weights.clone(), delta)?;
    let value = functional::complexity(&measure, potential)?;
    if (value.total - best.value).abs() > 1e-8 * (1.0 + value.total.abs()) {
        return Err(Error::Consistency(format!(
            "optimizer value {} differs from a fresh evaluation {}",
            best.value, value.total
        )));
    }
    let sym = measure.symmetrized();
    let symmetrization_gain = match functional::complexity(&sym, potential) {
        Ok(v) if obj.level_of(sym.weights()) >= u => v.total - value.total,
        _ => 0.0,
    };
    Ok(ComplexityReport {
        u,
        sigma: value.total,
        value,
        feasibility_slack: obj.level_of(measure.weights()) - u,
        best_measure: measure,
        iterations: total_iter,
        restarts: records,
        symmetrization_gain,
        replaced_by_larger_level: false,
    })
}

/// `sup { I(nu) : level(nu) >= u }` over grid measures.
pub fn maximize_sigma(potential: &Potential, u: f64, config: &SolverConfig) -> Result<ComplexityReport> {
    maximize_with(potential, u, config, &[])
}

/// Same as [`maximize_sigma`] with an extra warm start.
pub fn maximize_sigma_from(potential: &Potential, u: f64, config: &SolverConfig, warm: &GridMeasure) -> Result<ComplexityReport> {
    if warm.len() != config.grid_points {
        return Err(Error::InvalidArgument("warm start lives on a different grid".into()));
    }
    maximize_with(potential, u, config, &[("warm".to_string(), State::from_weights(warm.weights()))])
}

/// Values on an increasing list of levels. Each solve is warm-started from the
/// previous maximiser, and a backward pass makes the curve nonincreasing by
/// reusing maximisers of larger levels, which are feasible for smaller ones.
pub fn sigma_curve(potential: &Potential, levels: &[f64], config: &SolverConfig) -> Result<Vec<ComplexityReport>> {
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("levels must be strictly increasing".into()));
    }
    let mut out: Vec<ComplexityReport> = Vec::with_capacity(levels.len());
    for &u in levels {
        let r = match out.last() {
            Some(prev) => maximize_sigma_from(potential, u, config, &prev.best_measure)?,
            None => maximize_sigma(potential, u, config)?,
        };
        out.push(r);
    }
    for k in (0..out.len().saturating_sub(1)).rev() {
        if out[k + 1].sigma > out[k].sigma {
            let u = out[k].u;
            let mut better = out[k + 1].clone();
            better.feasibility_slack += better.u - u;
            better.u = u;
            better.replaced_by_larger_level = true;
            better.restarts = std::mem::take(&mut out[k].restarts);
            out[k] = better;
        }
    }
    Ok(out)
}

/// `inf { u >= 0 : sigma(u) < 0 }`, bracketed by geometric expansion and then bisection.
pub fn find_critical_level(potential: &Potential, config: &SolverConfig) -> Result<CriticalLevelReport> {
    let zero = maximize_sigma(potential, 0.0, config)?;
    let mut evaluations = vec![(0.0, Some(zero.sigma))];
    if zero.sigma < 0.0 {
        return Ok(CriticalLevelReport { u_c: 0.0, bracket: (0.0, 0.0), sigma_at_zero: zero.sigma, evaluations });
    }
    let eval = |u: f64, warm: &GridMeasure| -> Result<Option<ComplexityReport>> {
        match maximize_sigma_from(potential, u, config, warm) {
            Ok(r) => Ok(Some(r)),
            Err(Error::Infeasible { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let (mut lo, mut lo_measure) = (0.0, zero.best_measure.clone());
    let mut hi = config.level_step.max(config.level_tol);
    loop {
        match eval(hi, &lo_measure)? {
            Some(r) if r.sigma >= 0.0 => {
                evaluations.push((hi, Some(r.sigma)));
                lo = hi;
                lo_measure = r.best_measure;
                hi *= 2.0;
            }
            other => {
                evaluations.push((hi, other.map(|r| r.sigma)));
                break;
            }
        }
    }
    while hi - lo > config.level_tol {
        let mid = 0.5 * (lo + hi);
        match eval(mid, &lo_measure)? {
            Some(r) if r.sigma >= 0.0 => {
                evaluations.push((mid, Some(r.sigma)));
                lo = mid;
                lo_measure = r.best_measure;
            }
            other => {
                evaluations.push((mid, other.map(|r| r.sigma)));
                hi = mid;
            }
        }
    }
    Ok(CriticalLevelReport { u_c: 0.5 * (lo + hi), bracket: (lo, hi), sigma_at_zero: zero.sigma, evaluations })
}
