//! The complexity functional on grid measures.
//!
//! For a measure `nu` with `t = sqrt(m2(nu))` the functional is
//! `1/2 log(p-1) + 1/2 + phi1 - phi2 + phi3 - KL(nu) - 1/2 (1 - t^2 + 2 log t)`,
//! and it coincides with the scaled form `I_K(t, mu)` at `mu = nu` dilated by
//! `1/t` with no truncation. Both forms are computed and cross-checked.

use serde::{Deserialize, Serialize};

use crate::constants::{exponent_weight, hessian_scale};
use crate::error::{Error, Result};
use crate::freeconv::{self, FreeConvOptions};
use crate::measure::{curvature_pushforward, DiscreteMeasure, GridMeasure};
use crate::potential::Potential;

/// How the logarithmic potential of the convolved measure is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogPotentialRoute {
    /// One subordination solve just above the origin.
    #[default]
    Exact,
    /// Density on a real grid followed by product integration.
    Density,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiTerms {
    /// `c3 (p-1) t^{2-2p} E[X V'(tX)]^2`
    pub alignment: f64,
    /// `c3 p t^{2-2p} E[V'(tX)^2]`
    pub gradient_energy: f64,
    /// `int log|lambda| d(g_{t,K} mu [+] sc)`
    pub log_potential: f64,
}

impl PhiTerms {
    pub fn combined(&self) -> f64 {
        self.alignment - self.gradient_energy + self.log_potential
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValue {
    pub t: f64,
    pub alignment: f64,
    pub gradient_energy: f64,
    pub log_potential: f64,
    pub kl: f64,
    /// `1/2 (1 - t^2 + 2 log t)`; zero for the scaled form.
    pub radial: f64,
    pub total: f64,
}

pub fn base_constant(p: u32) -> f64 {
    0.5 * ((p as f64) - 1.0).ln() + 0.5
}

pub fn log_potential_of(nu: &DiscreteMeasure, route: LogPotentialRoute) -> Result<f64> {
    match route {
        LogPotentialRoute::Exact => {
            Ok(freeconv::log_potential_origin(&nu.locations, &nu.masses, None)?.log_potential)
        }
        LogPotentialRoute::Density => {
            Ok(freeconv::convolve_semicircle(nu, &FreeConvOptions::default())?.log_potential())
        }
    }
}

/// The three parts of the scaled functional at `(t, mu)`. `cap = INFINITY` disables truncation.
pub fn phi_terms(t: f64, mu: &GridMeasure, potential: &Potential, cap: f64, route: LogPotentialRoute) -> Result<PhiTerms> {
    if t == 0.0 {
        return Ok(PhiTerms { alignment: 0.0, gradient_energy: 0.0, log_potential: -0.5 });
    }
    let p = potential.p;
    let c3 = exponent_weight(p);
    let scale = t.powi(2 - 2 * p as i32);
    let mut align = 0.0;
    let mut grad = 0.0;
    for (x, w) in mu.nodes().iter().zip(mu.weights()) {
        let d = potential.derivative(t * x);
        align += w * x * d;
        grad += w * d * d;
    }
    let pushed = curvature_pushforward(mu, potential, t, cap)?;
    Ok(PhiTerms {
        alignment: c3 * (p as f64 - 1.0) * scale * align * align,
        gradient_energy: c3 * p as f64 * scale * grad,
        log_potential: log_potential_of(&pushed, route)?,
    })
}

/// `I_K(t, mu)`: the scaled form with relative entropy of `mu` itself.
pub fn scaled_functional(t: f64, mu: &GridMeasure, potential: &Potential, cap: f64, route: LogPotentialRoute) -> Result<FunctionalValue> {
    let parts = phi_terms(t, mu, potential, cap, route)?;
    let kl = mu.kl_divergence();
    Ok(FunctionalValue {
        t,
        alignment: parts.alignment,
        gradient_energy: parts.gradient_energy,
        log_potential: parts.log_potential,
        kl,
        radial: 0.0,
        total: base_constant(potential.p) + parts.combined() - kl,
    })
}

pub fn radial_term(t: f64) -> f64 {
    0.5 * (1.0 - t * t + 2.0 * t.ln())
}

/// The functional at an unscaled measure, with the default exact route.
pub fn complexity(nu: &GridMeasure, potential: &Potential) -> Result<FunctionalValue> {
    complexity_with(nu, potential, LogPotentialRoute::Exact)
}

pub fn complexity_with(nu: &GridMeasure, potential: &Potential, route: LogPotentialRoute) -> Result<FunctionalValue> {
    let t = nu.second_moment().sqrt();
    if !(t > 0.0) {
        return Err(Error::InvalidMeasure("measure has zero second moment".into()));
    }
    let mu = nu.dilate(1.0 / t)?;
    let scaled = scaled_functional(t, &mu, potential, f64::INFINITY, route)?;
    let kl = nu.kl_divergence();
    let radial = radial_term(t);
    let total = base_constant(potential.p) + scaled.alignment - scaled.gradient_energy + scaled.log_potential - kl - radial;
    if (total - scaled.total).abs() > 1e-6 * (1.0 + total.abs()) {
        return Err(Error::Consistency(format!(
            "direct form {total} and scaled form {} disagree",
            scaled.total
        )));
    }
    Ok(FunctionalValue { kl, radial, total, ..scaled })
}

/// `E_mu[p^{-1} t X V'(tX) - V(tX)]`, the per-coordinate energy level.
pub fn level_constraint(t: f64, mu: &GridMeasure, potential: &Potential) -> f64 {
    mu.integrate(|x| potential.level_density(t * x))
}

/// `c3 p t^{2-2p} V'(tx)^2`, the integrand of the gradient-energy term.
pub fn gradient_density(t: f64, x: f64, potential: &Potential) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let p = potential.p;
    let d = potential.derivative(t * x);
    exponent_weight(p) * p as f64 * t.powi(2 - 2 * p as i32) * d * d
}

/// Upper bound for the functional that follows from the two-sided bounds on `V'`.
pub fn finiteness_cap(potential: &Potential) -> f64 {
    let p = potential.p as f64;
    let c = potential.c_bound;
    let slope = 8.0 * c * c / (p * (p - 1.0));
    let w = |x: f64| -x / (2.0 * c * c * p * p) + 0.5 * (slope * x + 4.0).ln();
    let peak = (c * c * p * p - 4.0 / slope).max(0.0);
    w(peak) + base_constant(potential.p)
}

/// Largest atom the truncated pushforward can produce.
pub fn truncated_atom_bound(p: u32, cap: f64) -> f64 {
    hessian_scale(p) * cap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::presets;

    #[test]
    fn forms_agree_on_gaussians() {
        let v = presets::sextic_mixed();
        for s in [0.3, 0.6, 1.0] {
            let nu = GridMeasure::gaussian(8.0, 1601, s).unwrap();
            let f = complexity(&nu, &v).unwrap();
            assert!(f.total.is_finite());
            // KL + radial vanishes for a dilated Gaussian up to discretisation
            assert!((f.kl + f.radial).abs() < 1e-6, "{}", f.kl + f.radial);
        }
    }

    #[test]
    fn zero_dilation_value() {
        let mu = GridMeasure::standard_gaussian(8.0, 801);
        let f = scaled_functional(0.0, &mu, &presets::quartic(), f64::INFINITY, LogPotentialRoute::Exact).unwrap();
        assert!((f.total - (base_constant(2) - 0.5 - mu.kl_divergence())).abs() < 1e-15);
    }

    #[test]
    fn bounded_by_cap() {
        let v = presets::sextic_mixed();
        let cap = finiteness_cap(&v);
        for s in [0.05, 0.2, 0.5, 1.0, 2.0] {
            let nu = GridMeasure::gaussian(8.0, 1601, s).unwrap();
            assert!(complexity(&nu, &v).unwrap().total <= cap);
        }
    }

    #[test]
    fn routes_agree_under_truncation() {
        let v = presets::quartic_sextic_p3();
        let mu = GridMeasure::standard_gaussian(6.0, 301);
        let a = scaled_functional(0.8, &mu, &v, 5.0, LogPotentialRoute::Exact).unwrap();
        let b = scaled_functional(0.8, &mu, &v, 5.0, LogPotentialRoute::Density).unwrap();
        assert!((a.log_potential - b.log_potential).abs() < 1e-3);
    }

    #[test]
    fn level_of_dilated_gaussian_increases() {
        let v = presets::sextic_mixed();
        let mu = GridMeasure::standard_gaussian(8.0, 801);
        let levels: Vec<f64> = [0.2, 0.5, 1.0, 1.5].iter().map(|t| level_constraint(*t, &mu, &v)).collect();
        assert!(levels.windows(2).all(|w| w[1] > w[0]));
    }
}
