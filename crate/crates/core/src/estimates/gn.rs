//! Gagliardo–Nirenberg interpolation inequalities on a curve,
//!
//! ```text
//! ‖∂ⁿ_s u‖_{L^p} ≤ C ‖∂ʲ_s u‖^σ ‖u‖^{1−σ} + B / L^{jσ} ‖u‖,   σ = (n + 1/2 − 1/p) / j
//! ```
//!
//! with all norms discrete (trapezoid in arclength). The constants are not
//! known in closed form; see [`super::calibration`].

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::geometry::{arclength_derivative, GeometryCache};

/// Integrability exponent `p ∈ [2, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GnExponent {
    Finite(f64),
    Infinity,
}

impl GnExponent {
    fn reciprocal(self) -> f64 {
        match self {
            GnExponent::Finite(p) => 1.0 / p,
            GnExponent::Infinity => 0.0,
        }
    }
}

fn derivative(cache: &GeometryCache, u: &[f64], order: usize) -> Vec<f64> {
    if order == 0 {
        u.to_vec()
    } else {
        arclength_derivative(cache, u, order)
    }
}

fn lp_norm(cache: &GeometryCache, f: &[f64], p: GnExponent) -> f64 {
    match p {
        GnExponent::Infinity => f.iter().fold(0.0, |m, v| m.max(v.abs())),
        GnExponent::Finite(p) => {
            let g: Vec<f64> = f.iter().map(|v| v.abs().powf(p)).collect();
            cache.integrate(&g).powf(1.0 / p)
        }
    }
}

fn l2_sq(cache: &GeometryCache, f: &[f64]) -> f64 {
    let g: Vec<f64> = f.iter().map(|v| v * v).collect();
    cache.integrate(&g)
}

/// `σ = (n + 1/2 − 1/p) / j`, validated to lie in `[0, 1]`. Any `n ≥ j`
/// pushes σ above one.
pub fn gn_sigma(n_ord: usize, j_ord: usize, p: GnExponent) -> Result<f64> {
    if j_ord == 0 {
        return Err(FlowError::BadParams("j must be positive".into()));
    }
    if let GnExponent::Finite(p) = p {
        if !(p >= 2.0) {
            return Err(FlowError::BadParams(format!("p = {p} must be at least 2")));
        }
    }
    let sigma = (n_ord as f64 + 0.5 - p.reciprocal()) / j_ord as f64;
    if !(0.0..=1.0).contains(&sigma) {
        return Err(FlowError::BadExponent(sigma));
    }
    Ok(sigma)
}

/// Both sides of the general inequality.
#[derive(Debug, Clone, Copy)]
pub struct GnSides {
    pub lhs: f64,
    /// `‖∂ʲu‖^σ ‖u‖^{1−σ}`
    pub interpolation_term: f64,
    /// `‖u‖ / L^{jσ}`
    pub length_term: f64,
}

pub fn gn_sides(cache: &GeometryCache, u: &[f64], n_ord: usize, j_ord: usize, p: GnExponent) -> Result<GnSides> {
    let sigma = gn_sigma(n_ord, j_ord, p)?;
    let lhs = lp_norm(cache, &derivative(cache, u, n_ord), p);
    let top = l2_sq(cache, &derivative(cache, u, j_ord)).sqrt();
    let base = l2_sq(cache, u).sqrt();
    let interpolation_term = if sigma == 0.0 {
        base
    } else {
        top.powf(sigma) * base.powf(1.0 - sigma)
    };
    let length_term = base / cache.total_length.powf(j_ord as f64 * sigma);
    Ok(GnSides {
        lhs,
        interpolation_term,
        length_term,
    })
}

/// Slack `RHS − LHS` of the general inequality with constants `C̃ = const_c`,
/// `B = const_b`.
pub fn gn_check(
    cache: &GeometryCache,
    u: &[f64],
    n_ord: usize,
    j_ord: usize,
    p: GnExponent,
    const_c: f64,
    const_b: f64,
) -> Result<f64> {
    let s = gn_sides(cache, u, n_ord, j_ord, p)?;
    Ok(const_c * s.interpolation_term + const_b * s.length_term - s.lhs)
}

/// Terms of `∫u⁶ ≤ ∫(∂²_s u)² + C(∫u²)⁵ + C/L² (∫u²)³`, as (lhs, free, weight).
pub(crate) fn u6_terms(cache: &GeometryCache, u: &[f64]) -> (f64, f64, f64) {
    let m2 = l2_sq(cache, u);
    let u6: Vec<f64> = u.iter().map(|v| v.powi(6)).collect();
    let lhs = cache.integrate(&u6);
    let free = l2_sq(cache, &arclength_derivative(cache, u, 2));
    let l = cache.total_length;
    (lhs, free, m2.powi(5) + m2.powi(3) / (l * l))
}

/// Terms of `∫u⁴ ≤ ∫(∂_s u)² + C(∫u²)³ + C/L (∫u²)²`, as (lhs, free, weight).
pub(crate) fn u4_terms(cache: &GeometryCache, u: &[f64]) -> (f64, f64, f64) {
    let m2 = l2_sq(cache, u);
    let u4: Vec<f64> = u.iter().map(|v| v.powi(4)).collect();
    let lhs = cache.integrate(&u4);
    let free = l2_sq(cache, &arclength_derivative(cache, u, 1));
    let l = cache.total_length;
    (lhs, free, m2.powi(3) + m2.powi(2) / l)
}

/// Slack of the sixth-power specialization.
pub fn gn_specialized_u6(cache: &GeometryCache, u: &[f64], const_c: f64) -> f64 {
    let (lhs, free, weight) = u6_terms(cache, u);
    free + const_c * weight - lhs
}

/// Slack of the fourth-power specialization.
pub fn gn_specialized_u4(cache: &GeometryCache, u: &[f64], const_c: f64) -> f64 {
    let (lhs, free, weight) = u4_terms(cache, u);
    free + const_c * weight - lhs
}
