//! The acceptance suite behind `elastic-flow verify`.
//!
//! Twelve criteria, each with a tag used by `--filter`. Runs shared between
//! criteria are computed once and memoized; criteria execute on the worker
//! pool and the report lists them in order. The report never contains wall
//! times, so it is a pure function of the seed and the filter.

use std::f64::consts::LN_2;
use std::fmt::Write as _;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::convergence::{run_sweep, thread_pool, SweepConfig};
use crate::error::{FlowError, Result};
use crate::estimates::calibration::{self, CalibratedConstants, CALIBRATION_SEED, CALIBRATION_SIZE};
use crate::estimates::{comparison_check, dissipation_residual, doubling_time, gronwall_solve};
use crate::estimates::{GronwallSetup, GrowthLaw};
use crate::flow::{curvature_evolution_rhs, run_keeping, FlowConfig, Termination, Trajectory};
use crate::geometry::{make_initial_curve, DiscreteCurve, InitialFamily};
use crate::output::diagnostics_csv;

pub const DEFAULT_SEED: u64 = 2024;
pub const FRESH_CURVES: usize = 1000;
pub const GRONWALL_PAIRS: usize = 100;

pub const BENCH_AMPLITUDE: f64 = 0.05;
pub const BENCH_EPSILON: f64 = 0.1;
pub const BENCH_T_END: f64 = 0.2;
/// Time at which pointwise quantities of the benchmark are compared.
pub const PROBE_TIME: f64 = 0.1;

/// `(id, tag)` of every criterion.
pub const CRITERIA: [(u8, &str); 12] = [
    (1, "stationarity"),
    (2, "energy"),
    (3, "budget"),
    (4, "length"),
    (5, "boundary"),
    (6, "tangential"),
    (7, "curvature"),
    (8, "gn"),
    (9, "gronwall"),
    (10, "comparison"),
    (11, "convergence"),
    (12, "determinism"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub filter: Option<String>,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { filter: None, seed: DEFAULT_SEED }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub tag: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        format!("[{mark}] {:>2} {:<12} {}", self.id, self.tag, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub seed: u64,
    pub filter: Option<String>,
    pub results: Vec<CriterionResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "elastic-flow verify seed={} filter={}",
            self.seed,
            self.filter.as_deref().unwrap_or("all")
        );
        for r in &self.results {
            let _ = writeln!(out, "{}", r.line());
        }
        let passed = self.results.iter().filter(|r| r.passed).count();
        let _ = writeln!(out, "{passed}/{} criteria passed", self.results.len());
        out
    }
}

/// Ids selected by a filter; `None` selects everything.
pub fn select(filter: Option<&str>) -> Result<Vec<u8>> {
    match filter {
        None => Ok(CRITERIA.iter().map(|c| c.0).collect()),
        Some(tag) => {
            let ids: Vec<u8> = CRITERIA.iter().filter(|c| c.1 == tag).map(|c| c.0).collect();
            if ids.is_empty() {
                let known: Vec<&str> = CRITERIA.iter().map(|c| c.1).collect();
                return Err(FlowError::BadParams(format!(
                    "unknown filter `{tag}`; known tags: {}",
                    known.join(", ")
                )));
            }
            Ok(ids)
        }
    }
}

/// Runs the selected criteria.
pub fn verify(options: &VerifyOptions) -> Result<VerifyReport> {
    let ids = select(options.filter.as_deref())?;
    let ctx = Context::new(options.seed);
    let results = thread_pool()?.install(|| ids.par_iter().map(|&id| ctx.criterion(id)).collect());
    Ok(VerifyReport {
        seed: options.seed,
        filter: options.filter.clone(),
        results,
    })
}

type Shared<T> = OnceLock<std::result::Result<T, String>>;

fn shared<T>(cell: &Shared<T>, init: impl FnOnce() -> Result<T>) -> std::result::Result<&T, String> {
    cell.get_or_init(|| init().map_err(|e| e.to_string())).as_ref().map_err(Clone::clone)
}

/// Runs and constants that several criteria read.
struct Context {
    seed: u64,
    /// (dt, n) = (1e-4, 128)
    bench: Shared<Trajectory>,
    /// (5e-5, 128)
    bench_half_dt: Shared<Trajectory>,
    /// (5e-5, 256)
    bench_refined: Shared<Trajectory>,
    constants: Shared<CalibratedConstants>,
}

fn flattened(amplitude: f64, n: usize) -> Result<DiscreteCurve> {
    make_initial_curve(&InitialFamily::FlattenedSine { amplitude }, n)
}

fn step_at(t: f64, dt: f64) -> usize {
    (t / dt).round() as usize
}

/// Benchmark run keeping only the states around [`PROBE_TIME`].
fn benchmark(dt: f64, n: usize) -> Result<Trajectory> {
    let config = FlowConfig::new(BENCH_EPSILON, n, BENCH_T_END).with_dt(dt);
    let k0 = step_at(PROBE_TIME, dt);
    run_keeping(&flattened(BENCH_AMPLITUDE, n)?, &config, |k| k + 1 >= k0 && k <= k0 + 1)
}

fn probe_state(traj: &Trajectory) -> std::result::Result<&crate::flow::FlowState, String> {
    traj.state_at(PROBE_TIME)
        .ok_or_else(|| format!("no state at t = {PROBE_TIME}"))
}

fn outcome(id: u8, passed: bool, detail: String) -> CriterionResult {
    let tag = CRITERIA[usize::from(id) - 1].1;
    CriterionResult { id, tag, passed, detail }
}

fn slope(coarse: f64, fine: f64, refinement: f64) -> f64 {
    (coarse / fine).ln() / refinement.ln()
}

fn within_budget(started: Instant, budget: Duration) -> bool {
    started.elapsed() <= budget
}

impl Context {
    fn new(seed: u64) -> Self {
        Self {
            seed,
            bench: OnceLock::new(),
            bench_half_dt: OnceLock::new(),
            bench_refined: OnceLock::new(),
            constants: OnceLock::new(),
        }
    }

    fn bench(&self) -> std::result::Result<&Trajectory, String> {
        shared(&self.bench, || benchmark(1e-4, 128))
    }

    fn bench_half_dt(&self) -> std::result::Result<&Trajectory, String> {
        shared(&self.bench_half_dt, || benchmark(5e-5, 128))
    }

    fn bench_refined(&self) -> std::result::Result<&Trajectory, String> {
        shared(&self.bench_refined, || benchmark(5e-5, 256))
    }

    fn constants(&self) -> std::result::Result<&CalibratedConstants, String> {
        shared(&self.constants, || {
            Ok(calibration::calibrate(&calibration::corpus(CALIBRATION_SEED, CALIBRATION_SIZE)?)?.doubled())
        })
    }

    fn criterion(&self, id: u8) -> CriterionResult {
        let result = match id {
            1 => self.stationarity(),
            2 => self.energy(),
            3 => self.budget(),
            4 => self.length(),
            5 => self.boundary(),
            6 => self.tangential(),
            7 => self.curvature(),
            8 => self.gn(),
            9 => self.gronwall(),
            10 => self.comparison(),
            11 => self.convergence(),
            12 => self.determinism(),
            _ => Err(format!("no criterion {id}")),
        };
        match result {
            Ok((passed, detail)) => outcome(id, passed, detail),
            Err(e) => outcome(id, false, format!("error: {e}")),
        }
    }

    fn stationarity(&self) -> std::result::Result<(bool, String), String> {
        let started = Instant::now();
        let curve = make_initial_curve(&InitialFamily::segment_unit(), 128).map_err(|e| e.to_string())?;
        let (mut disp, mut velocity) = (0.0_f64, 0.0_f64);
        for eps in [0.0, 0.1, 1.0] {
            let config = FlowConfig::new(eps, 128, 1.0).with_dt(1e-4);
            let traj = run_keeping(&curve, &config, |_| false).map_err(|e| e.to_string())?;
            if traj.terminated_by != Termination::ReachedTEnd {
                return Ok((false, format!("eps={eps} stopped: {:?}", traj.terminated_by)));
            }
            for (a, b) in curve.nodes().iter().zip(traj.last_state().curve.nodes()) {
                disp = disp.max((*a - *b).norm());
            }
            for d in &traj.diagnostics {
                velocity = velocity.max(d.max_abs_e).max(d.max_abs_lambda);
            }
        }
        let fast = within_budget(started, Duration::from_secs(5));
        Ok((
            disp <= 1e-10 && velocity <= 1e-10 && fast,
            format!("max displacement {disp:.3e}, max |E|,|lambda| {velocity:.3e}, runtime within 5 s: {fast}"),
        ))
    }

    fn energy(&self) -> std::result::Result<(bool, String), String> {
        let traj = self.bench()?;
        let dt = traj.dt;
        let tol = 1e-10 + 10.0 * dt * dt;
        let worst_rise = traj
            .diagnostics
            .windows(2)
            .map(|w| w[1].energy_feps - w[0].energy_feps)
            .fold(f64::NEG_INFINITY, f64::max);
        let r1 = dissipation_residual(traj, step_at(PROBE_TIME, dt));
        let half = self.bench_half_dt()?;
        let r2 = dissipation_residual(half, step_at(PROBE_TIME, half.dt));
        let p = slope(r1, r2, 2.0);
        Ok((
            worst_rise <= tol && p >= 0.9,
            format!("largest energy increase {worst_rise:.3e} (tol {tol:.1e}), residual {r1:.3e} -> {r2:.3e}, slope {p:.3}"),
        ))
    }

    fn budget_of(traj: &Trajectory) -> f64 {
        let d = &traj.diagnostics;
        let spent: f64 = d[1..].iter().map(|r| traj.dt * r.dissipation_rate).sum();
        (d.last().unwrap().energy_feps + spent - d[0].energy_feps).abs()
    }

    fn budget(&self) -> std::result::Result<(bool, String), String> {
        let b1 = Self::budget_of(self.bench()?);
        let b2 = Self::budget_of(self.bench_refined()?);
        let ratio = b1 / b2;
        Ok((
            b1 <= 5e-3 && ratio >= 1.8,
            format!("budget defect {b1:.3e} -> {b2:.3e} under (dt, h) halving, ratio {ratio:.3}"),
        ))
    }

    fn length(&self) -> std::result::Result<(bool, String), String> {
        let mut worst_low = f64::INFINITY;
        let mut worst_high = f64::INFINITY;
        for traj in [self.bench()?, self.bench_half_dt()?, self.bench_refined()?] {
            let chord = (traj.endpoints.1 - traj.endpoints.0).norm();
            let cap = traj.diagnostics[0].energy_feps + 1e-8;
            for d in &traj.diagnostics {
                worst_low = worst_low.min(d.length - chord);
                worst_high = worst_high.min(cap - d.length);
            }
        }
        Ok((
            worst_low >= 0.0 && worst_high >= 0.0,
            format!("min(length - chord) {worst_low:.3e}, min(F0 + 1e-8 - length) {worst_high:.3e}"),
        ))
    }

    fn boundary(&self) -> std::result::Result<(bool, String), String> {
        let coarse = crate::estimates::boundary_residuals(probe_state(self.bench()?)?);
        let fine = crate::estimates::boundary_residuals(probe_state(self.bench_refined()?)?);
        let ratios = [
            coarse.kappa[0] / fine.kappa[0],
            coarse.kappa[1] / fine.kappa[1],
            coarse.kappa_ss[0] / fine.kappa_ss[0],
            coarse.kappa_ss[1] / fine.kappa_ss[1],
        ];
        let worst = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        Ok((
            worst >= 3.0,
            format!(
                "|kappa| {:.2e}/{:.2e}, |kappa_ss| {:.2e}/{:.2e} at n=256, smallest n-doubling ratio {worst:.3}",
                fine.kappa[0], fine.kappa[1], fine.kappa_ss[0], fine.kappa_ss[1]
            ),
        ))
    }

    fn worst_lambda_residual(traj: &Trajectory) -> f64 {
        let d = &traj.diagnostics;
        d[1..d.len() - 1]
            .iter()
            .map(|r| r.lambda_endpoint_residual)
            .fold(0.0, f64::max)
    }

    fn tangential(&self) -> std::result::Result<(bool, String), String> {
        let r1 = Self::worst_lambda_residual(self.bench()?);
        let r2 = Self::worst_lambda_residual(self.bench_refined()?);
        Ok((
            r1 <= 5e-3 && r2 < r1,
            format!("max |lambda(l) + dl/dt| {r1:.3e} -> {r2:.3e} under refinement"),
        ))
    }

    fn curvature(&self) -> std::result::Result<(bool, String), String> {
        let r1 = curvature_rate_residual(32, 4e-4).map_err(|e| e.to_string())?;
        let r2 = curvature_rate_residual(64, 1e-4).map_err(|e| e.to_string())?;
        let p = slope(r1, r2, 4.0);
        let g1 = compact_expanded_gap(64).map_err(|e| e.to_string())?;
        let g2 = compact_expanded_gap(128).map_err(|e| e.to_string())?;
        Ok((
            p >= 0.9 && g1 / g2 >= 3.0,
            format!(
                "kappa_t residual {r1:.3e} -> {r2:.3e}, slope {p:.3}; compact/expanded gap {g1:.3e} -> {g2:.3e}, ratio {:.3}",
                g1 / g2
            ),
        ))
    }

    fn gn(&self) -> std::result::Result<(bool, String), String> {
        let started = Instant::now();
        let constants = self.constants()?;
        let fresh = calibration::corpus(self.seed, FRESH_CURVES).map_err(|e| e.to_string())?;
        let slacks: Vec<Vec<(String, f64)>> = fresh
            .par_iter()
            .map(|c| calibration::slacks(c, constants))
            .collect::<Result<_>>()
            .map_err(|e| e.to_string())?;
        let mut worst: Vec<(String, f64)> = Vec::new();
        for row in &slacks {
            for (name, v) in row.iter().filter(|(n, _)| !n.starts_with("growth")) {
                match worst.iter_mut().find(|(w, _)| w == name) {
                    Some(slot) => slot.1 = slot.1.min(*v),
                    None => worst.push((name.clone(), *v)),
                }
            }
        }
        let min = worst.iter().map(|w| w.1).fold(f64::INFINITY, f64::min);
        let fast = within_budget(started, Duration::from_secs(30));
        let named: Vec<String> = worst.iter().map(|(n, v)| format!("{n} {v:.2e}")).collect();
        Ok((
            min >= 0.0 && fast,
            format!("{FRESH_CURVES} fresh curves, min slack {min:.3e} [{}], runtime within 30 s: {fast}", named.join(", ")),
        ))
    }

    fn gronwall(&self) -> std::result::Result<(bool, String), String> {
        let err = |e: FlowError| e.to_string();
        let mut worst = 0.0_f64;
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();

        let linear = gronwall_solve(&GronwallSetup::new(0.5, GrowthLaw::Linear, 2.0).map_err(err)?);
        for t in [0.25, 0.5, 1.0, 1.5, 2.0] {
            worst = worst.max(rel(linear.value(t).map_err(err)?, 0.5 * t.exp()));
        }
        let lin_setup = GronwallSetup::new(0.5, GrowthLaw::Linear, 1.0).map_err(err)?;
        for s in [0.1, 1.0, 10.0] {
            worst = worst.max(rel(doubling_time(&lin_setup, s).map_err(err)?, LN_2));
        }
        let quad = gronwall_solve(&GronwallSetup::new(1.0, GrowthLaw::Quadratic, 0.9).map_err(err)?);
        for t in [0.1, 0.5, 0.8, 0.9] {
            worst = worst.max(rel(quad.value(t).map_err(err)?, 1.0 / (1.0 - t)));
        }
        let quad_setup = GronwallSetup::new(1.0, GrowthLaw::Quadratic, 0.5).map_err(err)?;
        for s in [0.5, 2.0, 100.0] {
            worst = worst.max(rel(doubling_time(&quad_setup, s).map_err(err)?, 1.0 / (2.0 * s)));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x6E0_11A1);
        let mut lemma_ok = 0;
        let mut worst_ratio = 0.0_f64;
        for _ in 0..GRONWALL_PAIRS {
            let g0 = rng.gen_range(0.1..10.0);
            let s = g0 * rng.gen_range(1.0..100.0);
            let coeff = rng.gen_range(0.01..1.0);
            let ratio = lemma_ratio(g0, s, coeff).map_err(err)?;
            worst_ratio = worst_ratio.max(ratio);
            if ratio <= 1.0 + 1e-9 {
                lemma_ok += 1;
            }
        }
        Ok((
            worst <= 1e-6 && lemma_ok == GRONWALL_PAIRS,
            format!(
                "closed forms within {worst:.2e} relative; doubling lemma held on {lemma_ok}/{GRONWALL_PAIRS} pairs, max g/(2g(T)) {worst_ratio:.6}"
            ),
        ))
    }

    fn comparison(&self) -> std::result::Result<(bool, String), String> {
        let constants = self.constants()?;
        let traj = self.bench()?;
        let law = GrowthLaw::Polynomial { coeff: constants.growth };
        let setup = GronwallSetup::for_trajectory(traj, law).map_err(|e| e.to_string())?;
        let out = comparison_check(traj, &setup).map_err(|e| e.to_string())?;
        Ok((
            out.holds && out.margin > 0.0,
            format!("growth constant {:.3e}, margin {:.3e}", constants.growth, out.margin),
        ))
    }

    fn convergence(&self) -> std::result::Result<(bool, String), String> {
        let started = Instant::now();
        let report = convergence_benchmark().map_err(|e| e.to_string())?;
        let fast = within_budget(started, Duration::from_secs(120));
        let mono = report.monotone.iter().take(2).all(|m| *m);
        let d: Vec<String> = report
            .rows
            .iter()
            .map(|r| format!("{}:{:.2e}/{:.2e}", r.epsilon, r.distances[0], r.distances[1]))
            .collect();
        let orders: Vec<String> = report
            .fitted_order
            .iter()
            .map(|o| o.map_or_else(|| "n/a".into(), |v| format!("{v:.3}")))
            .collect();
        Ok((
            mono && fast,
            format!(
                "d0/d1 by eps [{}], fitted order [{}], runtime within 2 min: {fast}",
                d.join(", "),
                orders.join(", ")
            ),
        ))
    }

    fn determinism(&self) -> std::result::Result<(bool, String), String> {
        let once = || -> Result<String> {
            let ctx = Context::new(self.seed);
            let mut text = String::new();
            // criteria without a wall-clock budget, so the text cannot depend on load
            for id in [9, 7] {
                text.push_str(&ctx.criterion(id).line());
                text.push('\n');
            }
            let curve = flattened(0.1, 32)?;
            let traj = run_keeping(&curve, &FlowConfig::new(0.1, 32, 0.02).with_dt(1e-4), |_| true)?;
            text.push_str(&diagnostics_csv(&traj.diagnostics));
            Ok(text)
        };
        let a = once().map_err(|e| e.to_string())?;
        let b = once().map_err(|e| e.to_string())?;
        let same = a == b;
        Ok((same, format!("repeated verify subset and run output byte-identical: {same}")))
    }
}

/// `max_{[T, T+Θ]} g / (2 g(T))` for the polynomial law, with `g(T) = s`.
fn lemma_ratio(g0: f64, s: f64, coeff: f64) -> Result<f64> {
    let probe = GronwallSetup::polynomial(g0, coeff, 1.0)?;
    let theta = doubling_time(&probe, s)?;
    // restart at g(T) = s; the law is autonomous
    let setup = GronwallSetup::polynomial(s, coeff, theta)?;
    let sol = gronwall_solve(&setup);
    let mut worst = 0.0_f64;
    for j in 0..=20 {
        let t = theta * j as f64 / 20.0;
        worst = worst.max(sol.value(t.min(sol.t_end()))? / (2.0 * s));
    }
    Ok(worst)
}

/// Largest interior gap between the time-differenced curvature at fixed
/// node indices and the evolution law, at the middle of a short run. Nodes
/// slide along the curve as the length changes, which adds `∂_s κ · s_i ℓ̇/ℓ`.
pub fn curvature_rate_residual(n: usize, dt: f64) -> Result<f64> {
    let t_end = 0.01;
    let config = FlowConfig::new(BENCH_EPSILON, n, t_end).with_dt(dt);
    let mid = config.steps() / 2;
    let traj = run_keeping(&flattened(0.2, n)?, &config, |k| k + 1 >= mid && k <= mid + 1)?;
    let find = |k: usize| {
        traj.states
            .iter()
            .find(|s| s.step_index == k)
            .ok_or_else(|| FlowError::BadParams(format!("run stopped before step {k}")))
    };
    let (prev, cur, next) = (find(mid - 1)?, find(mid)?, find(mid + 1)?);
    let rhs = curvature_evolution_rhs(cur);
    let ldot = (next.cache.total_length - prev.cache.total_length) / (2.0 * dt);
    let ell = cur.cache.total_length;
    Ok((2..n - 1)
        .map(|i| {
            let fd = (next.cache.kappa[i] - prev.cache.kappa[i]) / (2.0 * dt);
            let predicted = rhs.compact[i] + cur.cache.kappa_s[0][i] * cur.cache.s[i] * ldot / ell;
            (fd - predicted).abs()
        })
        .fold(0.0, f64::max))
}

/// Largest interior difference between the compact and expanded forms of
/// the curvature evolution law on the amplitude-0.1 flattened sine.
pub fn compact_expanded_gap(n: usize) -> Result<f64> {
    let state = crate::flow::FlowState::new(flattened(0.1, n)?, BENCH_EPSILON)?;
    let rhs = curvature_evolution_rhs(&state);
    Ok((3..n - 2)
        .map(|i| (rhs.compact[i] - rhs.expanded[i]).abs())
        .fold(0.0, f64::max))
}

/// The ε-ladder on the benchmark curve.
pub fn convergence_benchmark() -> Result<crate::convergence::ConvergenceReport> {
    let base = FlowConfig::new(0.0, 128, BENCH_T_END).with_dt(1e-4);
    let sweep = SweepConfig::new(vec![0.2, 0.1, 0.05, 0.025], base);
    run_sweep(&flattened(BENCH_AMPLITUDE, 128)?, &sweep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filters() {
        assert_eq!(select(None).unwrap().len(), 12);
        assert_eq!(select(Some("boundary")).unwrap(), vec![5]);
        assert!(matches!(select(Some("nope")), Err(FlowError::BadParams(_))));
    }

    #[test]
    fn doubling_lemma_on_a_fixed_pair() {
        let r = lemma_ratio(1.0, 3.0, 0.5).unwrap();
        assert!(r <= 1.0 + 1e-9 && r > 0.99, "{r}");
    }

    #[test]
    fn report_layout() {
        let report = VerifyReport {
            seed: 7,
            filter: Some("gn".into()),
            results: vec![outcome(8, true, "ok".into())],
        };
        assert_eq!(
            report.to_text(),
            "elastic-flow verify seed=7 filter=gn\n[PASS]  8 gn           ok\n1/1 criteria passed\n"
        );
    }
}
