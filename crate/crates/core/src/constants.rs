//! Normalising constants shared by the functional, the Hessian model and the
//! Kac-Rice integrand. All depend only on the interaction degree `p`.

/// Scale of the diagonal confinement term in the Hessian, `1/sqrt(p(p-1))`.
pub fn hessian_scale(p: u32) -> f64 {
    let p = p as f64;
    1.0 / (p * (p - 1.0)).sqrt()
}

/// Scale of the gradient term in the rank-one correction, `(p-1)/sqrt(p(p-1))`.
pub fn gradient_scale(p: u32) -> f64 {
    let p = p as f64;
    (p - 1.0) / (p * (p - 1.0)).sqrt()
}

/// Weight of the Gaussian exponent, `1/(2p^2)`.
pub fn exponent_weight(p: u32) -> f64 {
    let p = p as f64;
    1.0 / (2.0 * p * p)
}
