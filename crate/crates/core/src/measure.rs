//! Probability measures on a symmetric uniform grid, plus finite atomic measures.
//!
//! A [`GridMeasure`] stands for the piecewise-constant density `w_i / delta`
//! on the cells centred at the nodes. Moments use the midpoint rule and the
//! relative entropy against the standard Gaussian uses the cell densities.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::constants::hessian_scale;
use crate::error::{Error, Result};
use crate::potential::Potential;

const MASS_TOL: f64 = 1e-12;

pub trait Moments {
    /// `int |x|^s dmu`.
    fn moment(&self, s: f64) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    delta: f64,
}

pub fn symmetric_nodes(half_width: f64, points: usize) -> (Vec<f64>, f64) {
    assert!(points >= 2 && half_width > 0.0);
    let delta = 2.0 * half_width / (points - 1) as f64;
    let mid = (points - 1) as f64 / 2.0;
    let nodes = (0..points).map(|i| (i as f64 - mid) * delta).collect();
    (nodes, delta)
}

pub fn gaussian_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

impl GridMeasure {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>, delta: f64) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidMeasure(m.to_string()));
        if nodes.len() != weights.len() || nodes.is_empty() {
            return bad("nodes and weights must be nonempty and of equal length");
        }
        if !(delta > 0.0) {
            return bad("cell width must be positive");
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return bad("nodes must be strictly increasing");
        }
        let n = nodes.len();
        let scale = nodes[n - 1].abs().max(1.0);
        if (0..n).any(|i| (nodes[i] + nodes[n - 1 - i]).abs() > 1e-12 * scale) {
            return bad("nodes must be symmetric about the origin");
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return bad("weights must be finite and nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL * n as f64 {
            return bad("weights must sum to one");
        }
        Ok(GridMeasure { nodes, weights, delta })
    }

    /// Normalise arbitrary nonnegative weights on the symmetric grid.
    pub fn from_unnormalized(half_width: f64, points: usize, raw: Vec<f64>) -> Result<Self> {
        let (nodes, delta) = symmetric_nodes(half_width, points);
        if raw.len() != points {
            return Err(Error::InvalidMeasure("weight vector has the wrong length".into()));
        }
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidMeasure("weights have no positive finite mass".into()));
        }
        let weights = raw.into_iter().map(|w| w / total).collect();
        GridMeasure::new(nodes, weights, delta)
    }

    /// Discretise a density by sampling at the nodes.
    pub fn from_density(half_width: f64, points: usize, density: impl Fn(f64) -> f64) -> Result<Self> {
        let (nodes, _) = symmetric_nodes(half_width, points);
        let raw = nodes.iter().map(|&x| density(x).max(0.0)).collect();
        Self::from_unnormalized(half_width, points, raw)
    }

    pub fn standard_gaussian(half_width: f64, points: usize) -> Self {
        Self::from_density(half_width, points, gaussian_density).expect("gaussian has positive mass")
    }

    /// Discretised centred Gaussian with standard deviation `scale`.
    pub fn gaussian(half_width: f64, points: usize, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidArgument("gaussian scale must be positive".into()));
        }
        Self::from_density(half_width, points, |x| gaussian_density(x / scale))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Same grid, new weights (validated).
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        GridMeasure::new(self.nodes.clone(), weights, self.delta)
    }

    pub fn second_moment(&self) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * x * x).sum()
    }

    /// Image under `x -> lambda x`; the cell width scales with the nodes.
    pub fn dilate(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("dilation factor must be positive, got {lambda}")));
        }
        Ok(GridMeasure {
            nodes: self.nodes.iter().map(|x| x * lambda).collect(),
            weights: self.weights.clone(),
            delta: self.delta * lambda,
        })
    }

    /// Relative entropy against the standard Gaussian.
    pub fn kl_divergence(&self) -> f64 {
        let ln_norm = 0.5 * (2.0 * PI).ln();
        self.nodes
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(x, w)| w * ((w / self.delta).ln() + ln_norm + 0.5 * x * x))
            .sum()
    }

    /// `sum w log(w / delta)`, the negative differential entropy of the cell density.
    pub fn neg_entropy(&self) -> f64 {
        self.weights
            .iter()
            .filter(|w| **w > 0.0)
            .map(|w| w * (w / self.delta).ln())
            .sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.len();
        (0..n).all(|i| (self.weights[i] - self.weights[n - 1 - i]).abs() <= tol)
    }

    pub fn symmetrized(&self) -> Self {
        let n = self.len();
        let weights = (0..n).map(|i| 0.5 * (self.weights[i] + self.weights[n - 1 - i])).collect();
        GridMeasure { nodes: self.nodes.clone(), weights, delta: self.delta }
    }

    /// Expectation of `f` under the measure.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,weight,density\n");
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            writeln!(s, "{:.12e},{:.12e},{:.12e}", x, w, w / self.delta).unwrap();
        }
        s
    }
}

impl Moments for GridMeasure {
    fn moment(&self, s: f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * x.abs().powf(s)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub locations: Vec<f64>,
    pub masses: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(locations: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if locations.len() != masses.len() || locations.is_empty() {
            return Err(Error::InvalidMeasure("atoms and masses must be nonempty and of equal length".into()));
        }
        if locations.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure("atom locations must be finite".into()));
        }
        if masses.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidMeasure("masses must be finite and nonnegative".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL * masses.len() as f64 {
            return Err(Error::InvalidMeasure(format!("masses sum to {total}, not one")));
        }
        Ok(DiscreteMeasure { locations, masses })
    }

    pub fn dirac(x: f64) -> Self {
        DiscreteMeasure { locations: vec![x], masses: vec![1.0] }
    }

    /// Parse `"x:m,x:m,..."`; masses are normalised.
    pub fn parse_atoms(spec: &str) -> Result<Self> {
        let mut locs = Vec::new();
        let mut masses = Vec::new();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (x, m) = item
                .split_once(':')
                .ok_or_else(|| Error::InvalidArgument(format!("atom '{item}' is not of the form x:mass")))?;
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| Error::InvalidArgument(format!("cannot parse '{s}' as a number")))
            };
            locs.push(parse(x)?);
            masses.push(parse(m)?);
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("atoms carry no mass".into()));
        }
        masses.iter_mut().for_each(|m| *m /= total);
        DiscreteMeasure::new(locs, masses)
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    /// Largest atom modulus among atoms with positive mass.
    pub fn max_abs(&self) -> f64 {
        self.locations
            .iter()
            .zip(&self.masses)
            .filter(|(_, m)| **m > 0.0)
            .map(|(x, _)| x.abs())
            .fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.locations.iter().zip(&self.masses).map(|(x, m)| x * m).sum()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.locations
            .iter()
            .zip(&self.masses)
            .filter(|(_, m)| **m > 0.0)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, _)| (lo.min(*x), hi.max(*x)))
    }

    /// Sorted copy with coincident atoms merged.
    pub fn merged(&self) -> Self {
        let mut pairs: Vec<(f64, f64)> = self.locations.iter().copied().zip(self.masses.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut locations: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut masses: Vec<f64> = Vec::with_capacity(pairs.len());
        for (x, m) in pairs {
            if locations.last() == Some(&x) {
                *masses.last_mut().unwrap() += m;
            } else {
                locations.push(x);
                masses.push(m);
            }
        }
        DiscreteMeasure { locations, masses }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.locations.iter().zip(&self.masses).filter(|(l, _)| **l <= x).map(|(_, m)| m).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("location,mass\n");
        for (x, m) in self.locations.iter().zip(&self.masses) {
            writeln!(s, "{:.12e},{:.12e}", x, m).unwrap();
        }
        s
    }
}

impl Moments for DiscreteMeasure {
    fn moment(&self, s: f64) -> f64 {
        self.locations.iter().zip(&self.masses).map(|(x, m)| m * x.abs().powf(s)).sum()
    }
}

/// Atom location of the curvature pushforward at node `x`:
/// `c1 * min(t^{2-p} V''(t x), cap)`.
pub fn curvature_atom(potential: &Potential, t: f64, x: f64, cap: f64) -> f64 {
    let tp = t.powi(2 - potential.p as i32);
    hessian_scale(potential.p) * (tp * potential.second_derivative(t * x)).min(cap)
}

/// Pushforward of a grid measure under `x -> c1 min(t^{2-p} V''(t x), cap)`.
/// Use `cap = f64::INFINITY` for no truncation. `t = 0` gives the Dirac mass at 0.
pub fn curvature_pushforward(mu: &GridMeasure, potential: &Potential, t: f64, cap: f64) -> Result<DiscreteMeasure> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("dilation parameter must be nonnegative, got {t}")));
    }
    if !(cap > 0.0) {
        return Err(Error::InvalidArgument("truncation level must be positive".into()));
    }
    if t == 0.0 {
        return Ok(DiscreteMeasure::dirac(0.0));
    }
    let locations = mu.nodes().iter().map(|&x| curvature_atom(potential, t, x, cap)).collect();
    Ok(DiscreteMeasure { locations, masses: mu.weights().to_vec() })
}

/// Pushforward of an unscaled measure `nu` under `x -> c1 t^{2-p} V''(x)`, obtained
/// by first dilating `nu` by `1/t`.
pub fn curvature_pushforward_unscaled(nu: &GridMeasure, potential: &Potential, t: f64) -> Result<DiscreteMeasure> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument("dilation parameter must be positive".into()));
    }
    curvature_pushforward(&nu.dilate(1.0 / t)?, potential, t, f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::presets;

    #[test]
    fn gaussian_moments() {
        let g = GridMeasure::standard_gaussian(8.0, 4001);
        assert!((g.moment(2.0) - 1.0).abs() < 1e-9);
        assert!((g.moment(4.0) - 3.0).abs() < 1e-3);
        assert!(g.kl_divergence().abs() < 1e-6);
    }

    #[test]
    fn kl_of_dilated_gaussian() {
        let g = GridMeasure::standard_gaussian(8.0, 4001).dilate(2.0).unwrap();
        let expected = 0.5 * (4.0 - 1.0 - 4f64.ln());
        assert!((g.kl_divergence() - expected).abs() < 1e-6);
    }

    #[test]
    fn kl_of_uniform() {
        let g = GridMeasure::from_density(2.0, 4001, |x| if x.abs() <= 1.0 { 1.0 } else { 0.0 }).unwrap();
        let expected = 0.5 * (2.0 * PI).ln() - 2f64.ln() + 1.0 / 6.0;
        assert!((g.kl_divergence() - expected).abs() < 1e-3);
    }

    #[test]
    fn dilation_scales_moments() {
        let g = GridMeasure::gaussian(6.0, 601, 0.7).unwrap();
        let d = g.dilate(1.9).unwrap();
        for s in [1.0, 2.0, 3.5] {
            assert!((d.moment(s) - 1.9f64.powf(s) * g.moment(s)).abs() < 1e-12 * d.moment(s).max(1.0));
        }
        assert!((d.delta() - 1.9 * g.delta()).abs() < 1e-15);
    }

    #[test]
    fn unnormalized_weights_rejected() {
        let (nodes, delta) = symmetric_nodes(1.0, 3);
        assert!(GridMeasure::new(nodes, vec![0.2, 0.2, 0.2], delta).is_err());
        assert!(DiscreteMeasure::new(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn pushforward_single_cell() {
        let (nodes, delta) = symmetric_nodes(2.0, 5);
        let w = nodes.iter().map(|&x| if x == 1.0 { 1.0 } else { 0.0 }).collect();
        let mu = GridMeasure::new(nodes, w, delta).unwrap();
        let pf = curvature_pushforward(&mu, &presets::quartic(), 1.0, f64::INFINITY).unwrap();
        let atom = pf.locations[3];
        assert!((atom - 12.0 / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(pf.masses[3], 1.0);
    }

    #[test]
    fn pushforward_at_zero_is_dirac() {
        let g = GridMeasure::standard_gaussian(4.0, 101);
        let pf = curvature_pushforward(&g, &presets::sextic_mixed(), 0.0, f64::INFINITY).unwrap();
        assert_eq!(pf, DiscreteMeasure::dirac(0.0));
    }

    #[test]
    fn truncation_caps_atoms() {
        let g = GridMeasure::standard_gaussian(8.0, 401);
        let k = 3.0;
        let pf = curvature_pushforward(&g, &presets::sextic_mixed(), 1.3, k).unwrap();
        let bound = k / 2f64.sqrt();
        assert!(pf.locations.iter().all(|&a| a <= bound));
        assert!(pf.locations.iter().any(|&a| a == bound));
    }

    #[test]
    fn unscaled_route_matches_direct_formula() {
        let v = presets::quartic_sextic_p3();
        let g = GridMeasure::gaussian(6.0, 301, 1.4).unwrap();
        let t = g.second_moment().sqrt();
        let pf = curvature_pushforward_unscaled(&g, &v, t).unwrap();
        let c1 = hessian_scale(3);
        for (x, a) in g.nodes().iter().zip(&pf.locations) {
            let direct = c1 * t.powi(-1) * v.second_derivative(*x);
            assert!((a - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn parse_atoms_normalises() {
        let m = DiscreteMeasure::parse_atoms("-1:1, 1:3").unwrap();
        assert_eq!(m.masses, vec![0.25, 0.75]);
        assert!(DiscreteMeasure::parse_atoms("1;2").is_err());
    }
}
