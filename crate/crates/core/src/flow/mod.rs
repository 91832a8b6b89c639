//! Velocity fields of the ε-flow and the semi-implicit stepper.
//!
//! In position form the normal law `(∂ₜγ)^⊥ = −E_ε ν` reads, up to tangential
//! terms,
//!
//! ```text
//! ∂ₜγ = γ_ss − 2ε γ_ssss − 3ε κ³ ν
//! ```
//!
//! since `γ_ssss = (∂²_s κ − κ³) ν − 3κ ∂_s κ τ`. The two linear operators are
//! taken implicitly on the current constant-speed grid, the cubic term
//! explicitly. Tangential motion is discarded by reparametrizing to constant
//! speed after the solve.

use serde::{Deserialize, Serialize};

use crate::banded::{solve_refined, BandedMatrix};
use crate::error::{FlowError, Result};
use crate::estimates::{diagnostics, DiagnosticsRecord};
use crate::geometry::{
    arclength_derivative, compute_geometry, compute_geometry_unchecked, endpoint_kappa_extrapolated,
    reparametrize_constant_speed, DiscreteCurve, End, GeometryCache, Point2,
};

/// Parameters of a single flow run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Regularization weight; 0 selects the curvature flow.
    pub epsilon: f64,
    pub dt: f64,
    /// Number of segments.
    pub n: usize,
    pub t_end: f64,
    pub reparam_every: usize,
    pub kappa_blowup_threshold: f64,
    pub solver_tol: f64,
}

impl FlowConfig {
    /// Default time step for `n` segments: `min(1e-4, 0.1 h²)` with `h = 1/n`.
    pub fn default_dt(n: usize) -> f64 {
        let h = 1.0 / n as f64;
        (0.1 * h * h).min(1e-4)
    }

    pub fn new(epsilon: f64, n: usize, t_end: f64) -> Self {
        Self {
            epsilon,
            dt: Self::default_dt(n),
            n,
            t_end,
            reparam_every: 1,
            kappa_blowup_threshold: 1e3,
            solver_tol: 1e-10,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| {
            Err(FlowError::Config {
                key: key.into(),
                reason,
            })
        };
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon", format!("{} is outside [0, 1]", self.epsilon));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("dt", format!("{} must be positive", self.dt));
        }
        if self.n < crate::geometry::MIN_SEGMENTS {
            return bad("n", format!("{} is below {}", self.n, crate::geometry::MIN_SEGMENTS));
        }
        if !(self.t_end > 0.0) {
            return bad("t_end", format!("{} must be positive", self.t_end));
        }
        if self.reparam_every == 0 {
            return bad("reparam_every", "must be at least 1".into());
        }
        if !(self.kappa_blowup_threshold > 0.0) {
            return bad("kappa_blowup_threshold", "must be positive".into());
        }
        if !(self.solver_tol > 0.0) {
            return bad("solver_tol", "must be positive".into());
        }
        Ok(())
    }

    /// Number of steps to reach `t_end`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// A curve at a time, with its geometry.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub curve: DiscreteCurve,
    pub cache: GeometryCache,
    pub time: f64,
    pub epsilon: f64,
    pub step_index: usize,
}

impl FlowState {
    pub fn new(curve: DiscreteCurve, epsilon: f64) -> Result<Self> {
        let cache = compute_geometry(&curve)?;
        Ok(Self {
            curve,
            cache,
            time: 0.0,
            epsilon,
            step_index: 0,
        })
    }
}

/// Normal speed `E_ε = −κ + ε(2∂²_s κ + κ³)`; the curve moves by `−E_ε ν`.
pub fn normal_velocity_from(cache: &GeometryCache, epsilon: f64) -> Vec<f64> {
    cache
        .kappa
        .iter()
        .zip(&cache.kappa_s[1])
        .map(|(&k, &kss)| -k + epsilon * (2.0 * kss + k * k * k))
        .collect()
}

pub fn normal_velocity(state: &FlowState) -> Vec<f64> {
    normal_velocity_from(&state.cache, state.epsilon)
}

/// Tangential velocity `λ(s) = −∫₀ˢ E_ε κ dσ` of the arclength-preserving
/// parametrization, by cumulative trapezoid.
pub fn tangential_velocity_from(cache: &GeometryCache, epsilon: f64) -> Vec<f64> {
    let e = normal_velocity_from(cache, epsilon);
    let integrand: Vec<f64> = e.iter().zip(&cache.kappa).map(|(e, k)| -e * k).collect();
    cache.cumulative_integral(&integrand)
}

pub fn tangential_velocity(state: &FlowState) -> Vec<f64> {
    tangential_velocity_from(&state.cache, state.epsilon)
}

/// Both algebraic forms of the curvature evolution `∂ₜκ`.
#[derive(Debug, Clone)]
pub struct CurvatureRhs {
    /// `−∂²_s E − κ² E + λ ∂_s κ`
    pub compact: Vec<f64>,
    /// `∂²_s κ + κ³ − 2ε∂⁴_s κ − 6εκ(∂_s κ)² − 5εκ²∂²_s κ − εκ⁵ + λ ∂_s κ`
    pub expanded: Vec<f64>,
}

pub fn curvature_evolution_rhs_from(cache: &GeometryCache, epsilon: f64) -> CurvatureRhs {
    let e = normal_velocity_from(cache, epsilon);
    let lambda = tangential_velocity_from(cache, epsilon);
    let e_ss = arclength_derivative(cache, &e, 2);
    let k = &cache.kappa;
    let [ks, kss, _, kssss] = &cache.kappa_s;
    let compact = (0..k.len())
        .map(|i| -e_ss[i] - k[i] * k[i] * e[i] + lambda[i] * ks[i])
        .collect();
    let expanded = (0..k.len())
        .map(|i| {
            let (k, ks, kss) = (k[i], ks[i], kss[i]);
            kss + k.powi(3)
                - 2.0 * epsilon * kssss[i]
                - 6.0 * epsilon * k * ks * ks
                - 5.0 * epsilon * k * k * kss
                - epsilon * k.powi(5)
                + lambda[i] * ks
        })
        .collect();
    CurvatureRhs { compact, expanded }
}

pub fn curvature_evolution_rhs(state: &FlowState) -> CurvatureRhs {
    curvature_evolution_rhs_from(&state.cache, state.epsilon)
}

/// Assembles `I − dt D₂ + 2ε dt D₄` on the node grid with pinned endpoint rows;
/// ghost nodes `X_{-1} = 2X_0 − X_1`, `X_{n+1} = 2X_n − X_{n−1}` are folded in.
fn assemble(n: usize, h: f64, dt: f64, epsilon: f64) -> BandedMatrix {
    let mut a = BandedMatrix::zeros(n + 1, 2, 2);
    a.set(0, 0, 1.0);
    a.set(n, n, 1.0);
    let c2 = dt / (h * h);
    let c4 = 2.0 * epsilon * dt / h.powi(4);
    let d4 = [1.0, -4.0, 6.0, -4.0, 1.0];
    for i in 1..n {
        a.add(i, i, 1.0 + 2.0 * c2);
        a.add(i, i - 1, -c2);
        a.add(i, i + 1, -c2);
        if c4 == 0.0 {
            continue;
        }
        for (o, w) in (-2isize..=2).zip(d4) {
            let j = i as isize + o;
            let v = c4 * w;
            if j < 0 {
                a.add(i, 0, 2.0 * v);
                a.add(i, (-j) as usize, -v);
            } else if j > n as isize {
                let mirror = 2 * n as isize - j;
                a.add(i, n, 2.0 * v);
                a.add(i, mirror as usize, -v);
            } else {
                a.add(i, j as usize, v);
            }
        }
    }
    a
}

/// Advances the state by one time step.
pub fn step(state: &FlowState, config: &FlowConfig) -> Result<FlowState> {
    let curve = &state.curve;
    let cache = &state.cache;
    let n = curve.segments();
    let eps = state.epsilon;
    let dt = config.dt;
    let x = curve.nodes();
    let (p, q) = (curve.p(), curve.q());
    let next_time = (state.step_index + 1) as f64 * dt;

    let a = assemble(n, cache.h, dt, eps);
    let lu = a.factor()?;
    let mut bx = Vec::with_capacity(n + 1);
    let mut by = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut r = x[i];
        if i > 0 && i < n && eps > 0.0 {
            let k = cache.kappa[i];
            r = r - cache.normal[i] * (3.0 * eps * dt * k * k * k);
        }
        bx.push(r.x);
        by.push(r.y);
    }
    let (sx, rx) = solve_refined(&a, &lu, &bx);
    let (sy, ry) = solve_refined(&a, &lu, &by);
    let residual = rx.max(ry);
    if !(residual <= config.solver_tol) {
        return Err(FlowError::SolverFailure {
            residual,
            tol: config.solver_tol,
        });
    }
    let mut nodes: Vec<Point2> = sx.iter().zip(&sy).map(|(&x, &y)| Point2::new(x, y)).collect();
    nodes[0] = p;
    nodes[n] = q;
    if nodes.iter().any(|p| !p.is_finite()) {
        return Err(FlowError::SingularityDetected {
            time: next_time,
            reason: "non-finite node position".into(),
        });
    }
    let mut moved = DiscreteCurve::from_nodes_unchecked(nodes);
    let length = moved.length();
    let min_seg = moved.min_segment();
    if min_seg < 1e-6 * length {
        return Err(FlowError::SingularityDetected {
            time: next_time,
            reason: format!("segment collapsed to {min_seg:e} of length {length:e}"),
        });
    }
    if (state.step_index + 1).is_multiple_of(config.reparam_every) {
        moved = reparametrize_constant_speed(&moved).map_err(|e| FlowError::SingularityDetected {
            time: next_time,
            reason: format!("reparametrization failed: {e}"),
        })?;
    }
    let cache = compute_geometry_unchecked(&moved);
    let kmax = cache.max_abs_kappa();
    if !(kmax <= config.kappa_blowup_threshold) {
        return Err(FlowError::SingularityDetected {
            time: next_time,
            reason: format!("max |kappa| = {kmax:e} above threshold"),
        });
    }
    Ok(FlowState {
        curve: moved,
        cache,
        time: next_time,
        epsilon: eps,
        step_index: state.step_index + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedTEnd,
    SingularityDetected,
    SolverFailure,
}

/// A completed run: strided snapshots, per-step diagnostics and the reason
/// the run stopped.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<FlowState>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub terminated_by: Termination,
    /// Time of the step that raised the detector, if any.
    pub stopped_at: Option<f64>,
    pub stop_reason: Option<String>,
    pub dt: f64,
    pub epsilon: f64,
    pub endpoints: (Point2, Point2),
}

impl Trajectory {
    pub fn last_state(&self) -> &FlowState {
        self.states.last().expect("trajectory has at least the initial state")
    }

    /// Snapshot whose time is closest to `t`, if within half a step.
    pub fn state_at(&self, t: f64) -> Option<&FlowState> {
        self.states
            .iter()
            .min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs()))
            .filter(|s| (s.time - t).abs() <= 0.5 * self.dt)
    }

    pub fn final_time(&self) -> f64 {
        self.diagnostics.last().map_or(0.0, |d| d.t)
    }
}

/// Checks the compatibility condition κ = 0 at both ends of initial data,
/// measured by extrapolating interior curvature to each endpoint.
pub fn check_compatible(curve: &DiscreteCurve) -> Result<()> {
    let cache = compute_geometry(curve)?;
    let tol = 1e-6 + 1e-3 * cache.max_abs_kappa();
    for end in [End::Start, End::Finish] {
        let k = endpoint_kappa_extrapolated(&cache, end);
        if k.abs() > tol {
            return Err(FlowError::BadParams(format!(
                "initial curvature at {end:?} is {k:e}, expected 0 (tolerance {tol:e})"
            )));
        }
    }
    Ok(())
}

/// Evolves `initial` to `config.t_end`, recording diagnostics every step and
/// keeping every state.
pub fn run(initial: &DiscreteCurve, config: &FlowConfig) -> Result<Trajectory> {
    run_strided(initial, config, 1)
}

/// As [`run`], keeping every `stride`-th state (plus the last).
pub fn run_strided(initial: &DiscreteCurve, config: &FlowConfig, stride: usize) -> Result<Trajectory> {
    let stride = stride.max(1);
    run_keeping(initial, config, |k| k % stride == 0)
}

/// As [`run`], keeping the states whose step index satisfies `keep` (plus
/// the first and the last).
pub fn run_keeping(initial: &DiscreteCurve, config: &FlowConfig, keep: impl Fn(usize) -> bool) -> Result<Trajectory> {
    config.validate()?;
    if initial.segments() != config.n {
        return Err(FlowError::Config {
            key: "n".into(),
            reason: format!("initial curve has {} segments, config says {}", initial.segments(), config.n),
        });
    }
    check_compatible(initial)?;
    let endpoints = (initial.p(), initial.q());
    let mut state = FlowState::new(initial.clone(), config.epsilon)?;
    let mut states = vec![state.clone()];
    let mut records = vec![diagnostics(&state, endpoints)];
    let mut terminated_by = Termination::ReachedTEnd;
    let mut stopped_at = None;
    let mut stop_reason = None;
    for k in 1..=config.steps() {
        match step(&state, config) {
            Ok(next) => state = next,
            Err(e) => {
                terminated_by = match e {
                    FlowError::SolverFailure { .. } => Termination::SolverFailure,
                    _ => Termination::SingularityDetected,
                };
                stopped_at = Some(k as f64 * config.dt);
                stop_reason = Some(e.to_string());
                break;
            }
        }
        records.push(diagnostics(&state, endpoints));
        if keep(k) {
            states.push(state.clone());
        }
    }
    if states.last().map(|s| s.step_index) != Some(state.step_index) {
        states.push(state);
    }
    fill_lambda_residuals(&mut records, config.dt);
    Ok(Trajectory {
        states,
        diagnostics: records,
        terminated_by,
        stopped_at,
        stop_reason,
        dt: config.dt,
        epsilon: config.epsilon,
        endpoints,
    })
}

/// `|λ(ℓ) + dℓ/dt|` with the length derivative by centered differences
/// (one-sided at the first and last record).
fn fill_lambda_residuals(records: &mut [DiagnosticsRecord], dt: f64) {
    let m = records.len();
    if m < 2 {
        return;
    }
    let lengths: Vec<f64> = records.iter().map(|r| r.length).collect();
    for k in 0..m {
        let dl = if k == 0 {
            (lengths[1] - lengths[0]) / dt
        } else if k == m - 1 {
            (lengths[m - 1] - lengths[m - 2]) / dt
        } else {
            (lengths[k + 1] - lengths[k - 1]) / (2.0 * dt)
        };
        records[k].lambda_endpoint_residual = (records[k].lambda_end + dl).abs();
    }
}
