//! Quantitative diagnostics of a flow: energy, dissipation, curvature norms,
//! boundary residuals, interpolation inequalities and the Gronwall majorant.

pub mod calibration;
pub mod gn;
pub mod gronwall;

use serde::{Deserialize, Serialize};

use crate::flow::{normal_velocity_from, tangential_velocity_from, FlowState, Trajectory};
use crate::geometry::{
    endpoint_derivative_one_sided, endpoint_kappa_one_sided, End, GeometryCache, Point2,
};

pub use calibration::{calibrate, CalibratedConstants, CorpusCurve};
pub use gn::{gn_check, gn_specialized_u4, gn_specialized_u6, GnExponent};
pub use gronwall::{comparison_check, doubling_time, gronwall_solve, ComparisonOutcome, GronwallSetup, GrowthLaw, GronwallSolution};

/// Per-step scalars of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub length: f64,
    pub energy_feps: f64,
    /// `∫E_ε² ds`
    pub dissipation_rate: f64,
    /// `‖∂ʲ_s κ‖²_{L²}` for j = 0..=4
    pub kappa_l2_sq: [f64; 5],
    /// `|∂ʲ_s κ|` at (start, finish) for j = 0, 2, 4, measured one-sided.
    pub boundary_residuals: BoundaryResiduals,
    pub lambda_endpoint_residual: f64,
    pub max_abs_e: f64,
    pub max_abs_lambda: f64,
    /// λ at the far endpoint; feeds `lambda_endpoint_residual`.
    pub lambda_end: f64,
}

/// Absolute values of the even curvature derivatives at both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundaryResiduals {
    pub kappa: [f64; 2],
    pub kappa_ss: [f64; 2],
    pub kappa_ssss: [f64; 2],
}

impl BoundaryResiduals {
    pub fn max(&self) -> [f64; 3] {
        [
            self.kappa[0].max(self.kappa[1]),
            self.kappa_ss[0].max(self.kappa_ss[1]),
            self.kappa_ssss[0].max(self.kappa_ssss[1]),
        ]
    }
}

/// `F_ε = ∫(1 + εκ²) ds` by trapezoid in arclength.
pub fn energy_from(cache: &GeometryCache, epsilon: f64) -> f64 {
    let f: Vec<f64> = cache.kappa.iter().map(|k| 1.0 + epsilon * k * k).collect();
    cache.integrate(&f)
}

pub fn energy(state: &FlowState) -> f64 {
    energy_from(&state.cache, state.epsilon)
}

/// `∫E_ε² ds`.
pub fn dissipation_rate_from(cache: &GeometryCache, epsilon: f64) -> f64 {
    let e = normal_velocity_from(cache, epsilon);
    let sq: Vec<f64> = e.iter().map(|v| v * v).collect();
    cache.integrate(&sq)
}

/// `|(F(t_{k+1}) − F(t_{k−1}))/(2dt) + ∫E² ds (t_k)|`.
pub fn dissipation_residual(traj: &Trajectory, k: usize) -> f64 {
    let d = &traj.diagnostics;
    assert!(k >= 1 && k + 1 < d.len(), "step index {k} has no two neighbours");
    let rate = (d[k + 1].energy_feps - d[k - 1].energy_feps) / (2.0 * traj.dt);
    (rate + d[k].dissipation_rate).abs()
}

/// Even curvature derivatives at both ends by one-sided stencils that never
/// touch the reflected ghost values used by the stepper.
pub fn boundary_residuals(state: &FlowState) -> BoundaryResiduals {
    let cache = &state.cache;
    let curve = &state.curve;
    let mut out = BoundaryResiduals::default();
    for (slot, end) in [End::Start, End::Finish].into_iter().enumerate() {
        out.kappa[slot] = endpoint_kappa_one_sided(curve, end).abs();
        out.kappa_ss[slot] = endpoint_derivative_one_sided(cache, &cache.kappa, 2, end).abs();
        out.kappa_ssss[slot] = endpoint_derivative_one_sided(cache, &cache.kappa, 4, end).abs();
    }
    out
}

/// Full diagnostics of a state. The λ endpoint residual needs neighbouring
/// steps and is filled in by the run loop.
pub fn diagnostics(state: &FlowState, _endpoints: (Point2, Point2)) -> DiagnosticsRecord {
    let cache = &state.cache;
    let eps = state.epsilon;
    let e = normal_velocity_from(cache, eps);
    let lambda = tangential_velocity_from(cache, eps);
    let mut kappa_l2_sq = [0.0; 5];
    for (j, slot) in kappa_l2_sq.iter_mut().enumerate() {
        let sq: Vec<f64> = cache.kappa_derivative(j).iter().map(|v| v * v).collect();
        *slot = cache.integrate(&sq);
    }
    let e_sq: Vec<f64> = e.iter().map(|v| v * v).collect();
    DiagnosticsRecord {
        t: state.time,
        length: cache.total_length,
        energy_feps: energy_from(cache, eps),
        dissipation_rate: cache.integrate(&e_sq),
        kappa_l2_sq,
        boundary_residuals: boundary_residuals(state),
        lambda_endpoint_residual: f64::NAN,
        max_abs_e: e.iter().fold(0.0, |m, v| m.max(v.abs())),
        max_abs_lambda: lambda.iter().fold(0.0, |m, v| m.max(v.abs())),
        lambda_end: *lambda.last().unwrap_or(&0.0),
    }
}

#[cfg(test)]
mod tests;
