//! The majorant `g′ = Z(g)` for the curvature `L²` norm, its doubling time,
//! and the comparison against a measured trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::flow::Trajectory;

const RTOL: f64 = 1e-10;
const BLOWUP_GUARD: f64 = 1e12;
const MAX_STEPS: usize = 200_000;

/// Right-hand side `Z` of the majorant ODE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GrowthLaw {
    /// `C (p⁵ + p³ + p²)`
    Polynomial { coeff: f64 },
    /// `p`
    Linear,
    /// `p²`
    Quadratic,
}

impl GrowthLaw {
    pub fn eval(&self, p: f64) -> f64 {
        match *self {
            GrowthLaw::Polynomial { coeff } => coeff * (p.powi(5) + p.powi(3) + p * p),
            GrowthLaw::Linear => p,
            GrowthLaw::Quadratic => p * p,
        }
    }

    pub fn derivative(&self, p: f64) -> f64 {
        match *self {
            GrowthLaw::Polynomial { coeff } => coeff * (5.0 * p.powi(4) + 3.0 * p * p + 2.0 * p),
            GrowthLaw::Linear => 1.0,
            GrowthLaw::Quadratic => 2.0 * p,
        }
    }

    fn identically_zero(&self) -> bool {
        matches!(*self, GrowthLaw::Polynomial { coeff } if coeff == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GronwallSetup {
    pub g0: f64,
    pub law: GrowthLaw,
    pub t_max_query: f64,
}

impl GronwallSetup {
    pub fn new(g0: f64, law: GrowthLaw, t_max_query: f64) -> Result<Self> {
        if !(g0 > 0.0) || !g0.is_finite() {
            return Err(FlowError::BadParams(format!("g0 = {g0} must be positive")));
        }
        if let GrowthLaw::Polynomial { coeff } = law {
            // zero is allowed so the comparison check can be exercised against a flat majorant
            if !(coeff >= 0.0) || !coeff.is_finite() {
                return Err(FlowError::BadParams(format!("coeff = {coeff} must be nonnegative")));
            }
        }
        if !(t_max_query > 0.0) {
            return Err(FlowError::BadParams(format!(
                "t_max_query = {t_max_query} must be positive"
            )));
        }
        Ok(Self { g0, law, t_max_query })
    }

    pub fn polynomial(g0: f64, coeff: f64, t_max_query: f64) -> Result<Self> {
        Self::new(g0, GrowthLaw::Polynomial { coeff }, t_max_query)
    }

    /// Setup whose initial value is the measured `∫κ²` at the start of `traj`.
    pub fn for_trajectory(traj: &Trajectory, law: GrowthLaw) -> Result<Self> {
        let first = traj
            .diagnostics
            .first()
            .ok_or_else(|| FlowError::BadParams("trajectory has no diagnostics".into()))?;
        let horizon = traj.final_time().max(f64::MIN_POSITIVE);
        Self::new(first.kappa_l2_sq[0].max(f64::MIN_POSITIVE), law, horizon)
    }
}

// Dormand–Prince 5(4); the law is autonomous so the nodes are not needed
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One embedded step; returns the fifth-order value and the error estimate.
fn dp_step(law: &GrowthLaw, g: f64, h: f64) -> (f64, f64) {
    let mut k = [0.0; 7];
    for i in 0..7 {
        let mut y = g;
        for j in 0..i {
            y += h * A[i][j] * k[j];
        }
        k[i] = law.eval(y);
    }
    let mut y5 = g;
    let mut err = 0.0;
    for i in 0..7 {
        y5 += h * B5[i] * k[i];
        err += h * (B5[i] - B4[i]) * k[i];
    }
    (y5, err)
}

/// `d/dh` of the fifth-order value of [`dp_step`], by forward differentiation
/// through the stages.
fn dp_step_slope(law: &GrowthLaw, g: f64, h: f64) -> f64 {
    let mut k = [0.0; 7];
    let mut dk = [0.0; 7];
    for i in 0..7 {
        let mut y = g;
        let mut dy = 0.0;
        for j in 0..i {
            y += h * A[i][j] * k[j];
            dy += A[i][j] * (k[j] + h * dk[j]);
        }
        k[i] = law.eval(y);
        dk[i] = law.derivative(y) * dy;
    }
    (0..7).map(|i| B5[i] * (k[i] + h * dk[i])).sum()
}

/// Numerically integrated majorant on `[0, t_end]`.
#[derive(Debug, Clone)]
pub struct GronwallSolution {
    pub law: GrowthLaw,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Accepted step sizes; `steps[i]` leads from node `i` to node `i + 1`.
    /// Kept apart from the time differences, which lose digits near blow-up.
    pub steps: Vec<f64>,
    /// Time the solution passed the blow-up guard plus the analytic tail, if it did.
    pub blowup_time: Option<f64>,
}

fn integrate(law: GrowthLaw, g0: f64, t_stop: f64, g_stop: f64) -> GronwallSolution {
    let mut times = vec![0.0];
    let mut values = vec![g0];
    let mut accepted = Vec::new();
    let mut t = 0.0;
    let mut g = g0;
    let z0 = law.eval(g0);
    let mut h = if z0 > 0.0 { (1e-3 * g0 / z0).min(t_stop) } else { t_stop };
    h = h.min(t_stop).max(1e-14);
    let mut blowup_time = None;
    let mut steps = 0;
    while t < t_stop && g <= g_stop && steps < MAX_STEPS {
        steps += 1;
        let h_try = h.min(t_stop - t);
        let (y5, err) = dp_step(&law, g, h_try);
        let scale = 1e-300 + RTOL * g.abs().max(y5.abs());
        let ratio = err.abs() / scale;
        if ratio <= 1.0 && y5.is_finite() {
            t += h_try;
            g = y5;
            times.push(t);
            values.push(g);
            accepted.push(h_try);
        }
        let factor = if !y5.is_finite() {
            0.1
        } else if ratio == 0.0 {
            5.0
        } else {
            (0.9 * ratio.powf(-0.2)).clamp(0.1, 5.0)
        };
        h = h_try * factor;
    }
    if g > BLOWUP_GUARD {
        let z = law.eval(g);
        let m = (law.eval(2.0 * g) / z).ln() / 2f64.ln();
        if m > 1.0 {
            blowup_time = Some(t + g / ((m - 1.0) * z));
        }
    }
    GronwallSolution {
        law,
        times,
        values,
        steps: accepted,
        blowup_time,
    }
}

pub fn gronwall_solve(setup: &GronwallSetup) -> GronwallSolution {
    integrate(setup.law, setup.g0, setup.t_max_query, BLOWUP_GUARD)
}

impl GronwallSolution {
    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn g_end(&self) -> f64 {
        *self.values.last().unwrap()
    }

    fn interval(&self, t: f64) -> usize {
        match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.times.len() - 1),
            Err(i) => i - 1,
        }
    }

    /// Dense output at `t`; `∞` past a detected blow-up, an error past the
    /// computed range otherwise.
    pub fn value(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(FlowError::OutOfDomain { value: t, max: self.t_end() });
        }
        if t > self.t_end() {
            if let Some(a) = self.blowup_time {
                if t >= a {
                    return Ok(f64::INFINITY);
                }
            }
            return Err(FlowError::OutOfDomain { value: t, max: self.t_end() });
        }
        let i = self.interval(t);
        let dt = t - self.times[i];
        if dt == 0.0 {
            return Ok(self.values[i]);
        }
        Ok(dp_step(&self.law, self.values[i], dt).0)
    }

    /// `g⁻¹(x)` by bisection on the dense output.
    pub fn inverse(&self, x: f64) -> Result<f64> {
        let g0 = self.values[0];
        if x < g0 || x > self.g_end() {
            return Err(FlowError::OutOfDomain { value: x, max: self.g_end() });
        }
        let hi_idx = self.values.partition_point(|&v| v < x).min(self.values.len() - 1);
        if self.values[hi_idx] == x {
            return Ok(self.times[hi_idx]);
        }
        let mut lo = self.times[hi_idx.saturating_sub(1)];
        let mut hi = self.times[hi_idx];
        // relative tolerance: near blow-up the whole bracket can be far below 1e-12
        for _ in 0..200 {
            if hi - lo <= 1e-13 * hi.abs() {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.value(mid)? < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Largest `|g′ − Z(g)| / (1 + |Z(g)|)` over the integrator nodes, with
    /// `g′` the derivative of the dense output of the step ending there.
    pub fn ode_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 1..self.times.len() {
            let h = self.steps[i - 1];
            let slope = dp_step_slope(&self.law, self.values[i - 1], h);
            let z = self.law.eval(self.values[i]);
            worst = worst.max((slope - z).abs() / (1.0 + z.abs()));
        }
        worst
    }
}

/// `Θ(s) = g⁻¹(2s) − g⁻¹(s)`. The law is autonomous, so the majorant is
/// restarted from `s` and `Θ = g_s⁻¹(2s)`; subtracting two inverse values
/// close to the blow-up time would cancel most digits.
pub fn doubling_time(setup: &GronwallSetup, s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(FlowError::BadParams(format!("s = {s} must be positive")));
    }
    let target = 2.0 * s;
    if target > BLOWUP_GUARD || setup.law.identically_zero() {
        return Err(FlowError::OutOfDomain { value: target, max: BLOWUP_GUARD });
    }
    let sol = integrate(setup.law, s, f64::INFINITY, target);
    if sol.g_end() < target {
        return Err(FlowError::OutOfDomain { value: target, max: sol.g_end() });
    }
    let theta = sol.inverse(target)?;
    if !(theta > 0.0) {
        return Err(FlowError::OutOfDomain { value: target, max: sol.g_end() });
    }
    Ok(theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonOutcome {
    pub holds: bool,
    /// `min (g(t) − measured(t))` over recorded times after the start.
    pub margin: f64,
}

/// Compares the measured `∫κ²` of a trajectory against the majorant started
/// from its initial value.
pub fn comparison_check(traj: &Trajectory, setup: &GronwallSetup) -> Result<ComparisonOutcome> {
    let t0 = traj
        .diagnostics
        .first()
        .ok_or_else(|| FlowError::BadParams("trajectory has no diagnostics".into()))?
        .t;
    let horizon = traj.diagnostics.last().unwrap().t - t0;
    let solve_to = GronwallSetup {
        t_max_query: setup.t_max_query.max(horizon).max(f64::MIN_POSITIVE),
        ..*setup
    };
    let sol = gronwall_solve(&solve_to);
    let mut margin = f64::INFINITY;
    let mut holds = true;
    for d in &traj.diagnostics {
        let tau = d.t - t0;
        let g = match sol.value(tau) {
            Ok(g) => g,
            // the majorant stopped at the blow-up guard, so it is larger than anything finite
            Err(_) if sol.g_end() > BLOWUP_GUARD => f64::INFINITY,
            Err(e) => return Err(e),
        };
        let gap = g - d.kappa_l2_sq[0];
        if gap < 0.0 {
            holds = false;
        }
        if tau > 0.0 {
            margin = margin.min(gap);
        }
    }
    if margin == f64::INFINITY {
        margin = 0.0;
    }
    Ok(ComparisonOutcome { holds, margin })
}
