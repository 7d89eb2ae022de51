//! Even polynomial-type confining potentials `V(x) = sum_i c_i |x|^{r_i}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `coeff * |x|^exponent`. Serialized as `[coeff, exponent]`; the object form is also accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "(f64, f64)", from = "TermRepr")]
pub struct Term {
    pub coeff: f64,
    pub exponent: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TermRepr {
    Pair(f64, f64),
    Object { coeff: f64, exponent: f64 },
}

impl From<TermRepr> for Term {
    fn from(r: TermRepr) -> Self {
        match r {
            TermRepr::Pair(coeff, exponent) | TermRepr::Object { coeff, exponent } => Term { coeff, exponent },
        }
    }
}

impl From<Term> for (f64, f64) {
    fn from(t: Term) -> Self {
        (t.coeff, t.exponent)
    }
}

/// A confining potential together with the structural constants it is
/// claimed to satisfy. The claims are only trusted after [`Potential::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub terms: Vec<Term>,
    /// Interaction degree of the random part.
    pub p: u32,
    /// Growth exponent: `x V'(x) >= q V(x)`.
    pub q: f64,
    /// Exponent for the second-derivative condition `x V'' >= (q - 1) V'`.
    /// Defaults to `q` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_second: Option<f64>,
    /// Smallest and largest exponent.
    pub q1: f64,
    pub q2: f64,
    /// Two-sided comparison constant against `|x|^q1 + |x|^q2`.
    pub c_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    /// Smallest normalised slack on the grid; negative means violated.
    pub worst_margin: f64,
    pub at_x: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
    /// Smallest comparison constant that makes the two-sided bounds hold on the grid.
    pub min_c_bound: f64,
    pub passed: bool,
}

pub const MARGIN_TOL: f64 = -1e-12;

impl Potential {
    pub fn new(terms: Vec<Term>, p: u32, q: f64, q1: f64, q2: f64, c_bound: f64) -> Result<Self> {
        let v = Potential { terms, p, q, q_second: None, q1, q2, c_bound };
        v.check_structure()?;
        Ok(v)
    }

    pub fn with_q_second(mut self, q_second: f64) -> Result<Self> {
        self.q_second = Some(q_second);
        self.check_structure()?;
        Ok(self)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Potential = serde_json::from_str(s)?;
        v.check_structure()?;
        Ok(v)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    fn check_structure(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPotential(m));
        if self.p < 2 {
            return bad(format!("interaction degree must be at least 2, got {}", self.p));
        }
        let active: Vec<&Term> = self.terms.iter().filter(|t| t.coeff != 0.0).collect();
        if active.is_empty() {
            return bad("potential has no nonzero terms".into());
        }
        for t in &active {
            if !t.coeff.is_finite() || !t.exponent.is_finite() || t.exponent < 2.0 {
                return bad(format!("term {:?} must have a finite coefficient and exponent >= 2", t));
            }
        }
        let lo = active.iter().map(|t| t.exponent).fold(f64::INFINITY, f64::min);
        let hi = active.iter().map(|t| t.exponent).fold(f64::NEG_INFINITY, f64::max);
        if lo != self.q1 || hi != self.q2 {
            return bad(format!(
                "extremal exponents are {lo} and {hi} but q1 = {}, q2 = {}",
                self.q1, self.q2
            ));
        }
        if !(self.c_bound > 0.0 && self.c_bound.is_finite()) {
            return bad(format!("c_bound must be positive and finite, got {}", self.c_bound));
        }
        for q in [Some(self.q), self.q_second].into_iter().flatten() {
            if !q.is_finite() {
                return bad("growth exponent must be finite".into());
            }
        }
        Ok(())
    }

    pub fn q_second(&self) -> f64 {
        self.q_second.unwrap_or(self.q)
    }

    /// `(V, V', V'')` at `x`. Derivatives of `|x|^r` with `r > 2` vanish at the origin.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let ax = x.abs();
        let s = if x < 0.0 { -1.0 } else { 1.0 };
        let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for t in &self.terms {
            let r = t.exponent;
            if ax == 0.0 {
                if r == 2.0 {
                    d2 += 2.0 * t.coeff;
                }
                continue;
            }
            let pr2 = ax.powf(r - 2.0);
            v += t.coeff * pr2 * ax * ax;
            d1 += t.coeff * r * pr2 * ax;
            d2 += t.coeff * r * (r - 1.0) * pr2;
        }
        (v, s * d1, d2)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.eval(x).1
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.eval(x).2
    }

    /// Per-coordinate energy level of a critical point at `x`: `x V'(x)/p - V(x)`.
    pub fn level_density(&self, x: f64) -> f64 {
        let (v, d1, _) = self.eval(x);
        x * d1 / self.p as f64 - v
    }

    /// Check the structural inequalities on a log-spaced grid of `(0, grid_max]`.
    /// Evenness makes the negative half redundant. Margins are normalised by
    /// the comparison function so that they are scale free.
    pub fn validate(&self, grid_max: f64, grid_points: usize) -> Result<ValidationReport> {
        self.check_structure()?;
        if let Some(t) = self.terms.iter().find(|t| t.coeff != 0.0 && t.exponent <= self.p as f64) {
            return Err(Error::InvalidPotential(format!(
                "exponent {} does not exceed the interaction degree {}",
                t.exponent, self.p
            )));
        }
        if !(grid_max > 0.0) || grid_points < 2 {
            return Err(Error::InvalidArgument("grid_max must be positive and grid_points >= 2".into()));
        }
        let lo = grid_max * 1e-9;
        let step = (grid_max / lo).ln() / (grid_points - 1) as f64;
        let c = self.c_bound;
        let q = self.q;
        let q_sec = self.q_second();
        let names = [
            "value_lower",
            "value_upper",
            "slope_lower",
            "slope_upper",
            "curvature_lower",
            "curvature_upper",
            "growth",
            "second_growth",
        ];
        let mut worst = [(f64::INFINITY, 0.0); 8];
        let mut min_c: f64 = 1.0;
        for k in 0..grid_points {
            let x = lo * (step * k as f64).exp();
            let (v, d1, d2) = self.eval(x);
            let s = x.powf(self.q1) + x.powf(self.q2);
            let ratios = [v / s, x * d1 / s, x * x * d2 / s];
            let mut m = [0.0; 8];
            for (i, r) in ratios.iter().enumerate() {
                m[2 * i] = r - 1.0 / c;
                m[2 * i + 1] = c - r;
                min_c = min_c.max(*r).max(1.0 / r);
            }
            m[6] = (x * d1 - q * v) / s;
            m[7] = x * (x * d2 - (q_sec - 1.0) * d1) / s;
            for i in 0..8 {
                if m[i] < worst[i].0 || m[i].is_nan() {
                    worst[i] = (m[i], x);
                }
            }
        }
        let mut checks: Vec<ConditionCheck> = names
            .iter()
            .zip(worst.iter())
            .map(|(n, &(w, x))| ConditionCheck {
                name: n.to_string(),
                worst_margin: w,
                at_x: x,
                passed: w >= MARGIN_TOL,
            })
            .collect();
        let pq = self.p as f64;
        checks.push(ConditionCheck {
            name: "growth_exceeds_degree".into(),
            worst_margin: q.min(q_sec) - pq,
            at_x: 0.0,
            passed: q > pq && q_sec > pq,
        });
        let passed = checks.iter().all(|c| c.passed);
        Ok(ValidationReport { checks, min_c_bound: min_c, passed })
    }

    /// Validation with the default grid `(0, 1e3]`, `1e4` points.
    pub fn validate_default(&self) -> Result<ValidationReport> {
        self.validate(1e3, 10_000)
    }
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// A handful of potentials used by examples, tests and the self test.
pub mod presets {
    use super::{Potential, Term};

    fn t(coeff: f64, exponent: f64) -> Term {
        Term { coeff, exponent }
    }

    /// `x^4 - |x|^5 + x^6` for `p = 2`. The comparison constant `30` is the
    /// smallest integer for which the two-sided bounds hold.
    pub fn sextic_mixed() -> Potential {
        Potential::new(vec![t(1.0, 4.0), t(-1.0, 5.0), t(1.0, 6.0)], 2, 3.0, 4.0, 6.0, 30.0).unwrap()
    }

    /// `x^4` for `p = 2`.
    pub fn quartic() -> Potential {
        Potential::new(vec![t(1.0, 4.0)], 2, 4.0, 4.0, 4.0, 6.0).unwrap()
    }

    /// `x^4 + x^6` for `p = 3`.
    pub fn quartic_sextic_p3() -> Potential {
        Potential::new(vec![t(1.0, 4.0), t(1.0, 6.0)], 3, 4.0, 4.0, 6.0, 30.0).unwrap()
    }

    /// `x^6` for `p = 4`.
    pub fn sextic_p4() -> Potential {
        Potential::new(vec![t(1.0, 6.0)], 4, 6.0, 6.0, 6.0, 30.0).unwrap()
    }
}
