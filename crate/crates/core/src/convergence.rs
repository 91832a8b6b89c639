//! The ε → 0 experiment: evolve one initial curve under a ladder of ε and
//! under the curvature flow, and measure how far apart the constant-speed
//! parametrizations are in `C^k`.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::flow::{run_keeping, FlowConfig, FlowState, Termination, Trajectory};
use crate::geometry::{uniform_derivative, DiscreteCurve, Point2};
use crate::spline::ParametricSpline;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "ELASTIC_FLOW_THREADS";

/// Highest derivative order the distance is measured in.
pub const MAX_K: usize = 3;

/// Thread pool sized by [`THREADS_ENV`], or by the machine when unset.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| FlowError::Config {
            key: THREADS_ENV.into(),
            reason: format!("{v:?} is not a positive integer"),
        })?;
        if n == 0 {
            return Err(FlowError::Config {
                key: THREADS_ENV.into(),
                reason: "must be at least 1".into(),
            });
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| FlowError::BadParams(format!("thread pool: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Strictly decreasing, each in (0, 1].
    pub epsilons: Vec<f64>,
    /// Shared `dt`, `n`, `t_end` and detector settings; its `epsilon` is ignored.
    pub base: FlowConfig,
    /// Start of the comparison window `[delta, t_end]`.
    pub delta: f64,
    pub k_max: usize,
    /// Times at which snapshots are compared; multiples of `dt`.
    pub snapshot_times: Vec<f64>,
}

impl SweepConfig {
    /// Window starting at `0.05 t_end`, `k_max = 1`, twenty snapshots.
    pub fn new(epsilons: Vec<f64>, base: FlowConfig) -> Self {
        let delta = 0.05 * base.t_end;
        let snapshot_times = Self::default_snapshot_times(&base, delta);
        Self {
            epsilons,
            base,
            delta,
            k_max: 1,
            snapshot_times,
        }
    }

    /// Twenty intervals over `[delta, t_end]`, snapped to the time grid.
    pub fn default_snapshot_times(base: &FlowConfig, delta: f64) -> Vec<f64> {
        let steps: BTreeSet<usize> = (0..=20)
            .map(|i| {
                let t = delta + (base.t_end - delta) * i as f64 / 20.0;
                (t / base.dt).round() as usize
            })
            .collect();
        steps.into_iter().map(|k| k as f64 * base.dt).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| {
            Err(FlowError::Config {
                key: format!("sweep.{key}"),
                reason,
            })
        };
        self.base.validate()?;
        if self.epsilons.is_empty() {
            return bad("epsilons", "needs at least one value".into());
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return bad("epsilons", format!("{e} is outside (0, 1]"));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return bad("epsilons", "must be strictly decreasing".into());
        }
        if !(self.delta >= 0.0 && self.delta < self.base.t_end) {
            return bad("delta", format!("{} is outside [0, t_end)", self.delta));
        }
        if self.k_max > MAX_K {
            return bad("k_max", format!("{} exceeds {MAX_K}", self.k_max));
        }
        if self.snapshot_times.is_empty() {
            return bad("snapshot_times", "needs at least one time".into());
        }
        for &t in &self.snapshot_times {
            let steps = t / self.base.dt;
            if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
                return bad("snapshot_times", format!("{t} is not a multiple of dt = {}", self.base.dt));
            }
            if t < 0.0 || t > self.base.t_end * (1.0 + 1e-12) {
                return bad("snapshot_times", format!("{t} is outside [0, t_end]"));
            }
        }
        if self.snapshot_times.windows(2).any(|w| w[1] <= w[0]) {
            return bad("snapshot_times", "must be strictly increasing".into());
        }
        Ok(())
    }

    fn snapshot_steps(&self) -> BTreeSet<usize> {
        self.snapshot_times
            .iter()
            .map(|t| (t / self.base.dt).round() as usize)
            .collect()
    }
}

/// Derivatives `∂ʲ_x Υ` for `j = 0..=k` of a constant-speed snapshot over the
/// uniform parameter grid `x ∈ [0, 1]`, as separate x and y arrays.
fn parameter_jets(nodes: &[Point2], k: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let h = 1.0 / (nodes.len() - 1) as f64;
    let xs: Vec<f64> = nodes.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = nodes.iter().map(|p| p.y).collect();
    let mut out = vec![(xs.clone(), ys.clone())];
    for j in 1..=k {
        out.push((uniform_derivative(&xs, h, j, false), uniform_derivative(&ys, h, j, false)));
    }
    out
}

/// `nodes` resampled to `m + 1` equally spaced parameter values.
fn resample(nodes: &[Point2], m: usize) -> Vec<Point2> {
    let n = nodes.len() - 1;
    if n == m {
        return nodes.to_vec();
    }
    let params: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let spline = ParametricSpline::through(&params, nodes);
    let mut out: Vec<Point2> = (0..=m).map(|i| spline.point(i as f64 / m as f64)).collect();
    out[0] = nodes[0];
    out[m] = nodes[n];
    out
}

fn snapshot_distance(a: &FlowState, b: &FlowState, k: usize) -> f64 {
    let m = a.curve.segments().max(b.curve.segments());
    let ja = parameter_jets(&resample(a.curve.nodes(), m), k);
    let jb = parameter_jets(&resample(b.curve.nodes(), m), k);
    let mut worst: f64 = 0.0;
    for ((ax, ay), (bx, by)) in ja.iter().zip(&jb) {
        for i in 0..=m {
            worst = worst.max((ax[i] - bx[i]).abs()).max((ay[i] - by[i]).abs());
        }
    }
    worst
}

fn covers(traj: &Trajectory, t1: f64) -> bool {
    traj.terminated_by == Termination::ReachedTEnd || traj.final_time() >= t1 - 0.5 * traj.dt
}

/// `sup |∂ʲ_x Υ_a − ∂ʲ_x Υ_b|` over `j ≤ k`, all nodes, and every snapshot of
/// `a` inside `window`, with `b` sampled at the same times.
pub fn ck_distance(a: &Trajectory, b: &Trajectory, k: usize, window: (f64, f64)) -> Result<f64> {
    let (t0, t1) = window;
    if k > MAX_K {
        return Err(FlowError::BadParams(format!("k = {k} exceeds {MAX_K}")));
    }
    for (name, traj) in [("first", a), ("second", b)] {
        if !covers(traj, t1) {
            return Err(FlowError::WindowMismatch(format!(
                "{name} trajectory ended at t = {} before the window end {t1}",
                traj.final_time()
            )));
        }
    }
    let slack = 0.5 * a.dt;
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for sa in a.states.iter().filter(|s| s.time >= t0 - slack && s.time <= t1 + slack) {
        let sb = b.state_at(sa.time).ok_or_else(|| {
            FlowError::WindowMismatch(format!("second trajectory has no snapshot at t = {}", sa.time))
        })?;
        worst = worst.max(snapshot_distance(sa, sb, k));
        compared += 1;
    }
    if compared == 0 {
        return Err(FlowError::WindowMismatch(format!("no snapshots inside [{t0}, {t1}]")));
    }
    Ok(worst)
}

/// Time at which the singularity detector stopped the run, if it did.
pub fn singularity_time_estimate(traj: &Trajectory) -> Option<f64> {
    match traj.terminated_by {
        Termination::SingularityDetected => traj.stopped_at,
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    /// `dist_{C^k}` for k = 0..=k_max; NaN when the row could not be compared.
    pub distances: Vec<f64>,
    pub terminated_by: Termination,
    /// Why the row has no distances, if it has none.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub delta: f64,
    pub k_max: usize,
    pub snapshot_count: usize,
    pub reference_terminated_by: Termination,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln dist_k` against `ln ε`; `None` when fewer
    /// than two rows have a measurable distance.
    pub fitted_order: Vec<Option<f64>>,
    /// Whether `dist_k` strictly decreases down the ε ladder.
    pub monotone: Vec<bool>,
}

/// Distances at or below this are treated as zero when fitting orders.
const MEASURABLE: f64 = 1e-10;

fn fit_order(eps: &[f64], dist: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(dist)
        .filter(|(_, d)| d.is_finite() && **d > MEASURABLE)
        .map(|(e, d)| (e.ln(), d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts
        .iter()
        .fold((0.0, 0.0), |(n, d), (x, y)| (n + (x - mx) * (y - my), d + (x - mx) * (x - mx)));
    (den > 0.0).then(|| num / den)
}

/// Runs the reference flow and every rung of the ladder (in parallel) and
/// compares them.
pub fn run_sweep(initial: &DiscreteCurve, config: &SweepConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let keep = config.snapshot_steps();
    let mut ladder = vec![0.0];
    ladder.extend(&config.epsilons);
    let pool = thread_pool()?;
    let runs: Vec<Result<Trajectory>> = pool.install(|| {
        ladder
            .par_iter()
            .map(|&eps| {
                let cfg = FlowConfig {
                    epsilon: eps,
                    ..config.base.clone()
                };
                run_keeping(initial, &cfg, |k| keep.contains(&k))
            })
            .collect()
    });
    let mut runs = runs.into_iter();
    let reference = runs.next().expect("reference run")?;
    // snapshots outside the requested times (the final state is always kept)
    // must not widen the window
    let in_window: Vec<f64> = config
        .snapshot_times
        .iter()
        .copied()
        .filter(|t| *t >= config.delta - 0.5 * config.base.dt)
        .collect();
    let window = match (in_window.first(), in_window.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => (config.delta, config.base.t_end),
    };
    let mut rows = Vec::with_capacity(config.epsilons.len());
    for (&eps, traj) in config.epsilons.iter().zip(runs) {
        let traj = traj?;
        let mut distances = Vec::with_capacity(config.k_max + 1);
        let mut note = None;
        for k in 0..=config.k_max {
            match ck_distance(&traj, &reference, k, window) {
                Ok(d) => distances.push(d),
                Err(FlowError::WindowMismatch(why)) => {
                    note = Some(why);
                    distances = vec![f64::NAN; config.k_max + 1];
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        rows.push(ConvergenceRow {
            epsilon: eps,
            distances,
            terminated_by: traj.terminated_by,
            note,
        });
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let mut fitted_order = Vec::new();
    let mut monotone = Vec::new();
    for k in 0..=config.k_max {
        let d: Vec<f64> = rows.iter().map(|r| r.distances[k]).collect();
        fitted_order.push(fit_order(&eps, &d));
        monotone.push(d.iter().all(|v| v.is_finite()) && d.windows(2).all(|w| w[1] < w[0]));
    }
    Ok(ConvergenceReport {
        n: config.base.n,
        dt: config.base.dt,
        t_end: config.base.t_end,
        delta: config.delta,
        k_max: config.k_max,
        snapshot_count: keep.len(),
        reference_terminated_by: reference.terminated_by,
        rows,
        fitted_order,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::run;
    use crate::geometry::{make_initial_curve, InitialFamily};

    fn sine(n: usize) -> DiscreteCurve {
        make_initial_curve(&InitialFamily::FlattenedSine { amplitude: 0.1 }, n).unwrap()
    }

    #[test]
    fn identical_trajectories_are_at_distance_zero() {
        let traj = run(&sine(32), &FlowConfig::new(0.1, 32, 0.01).with_dt(1e-3)).unwrap();
        for k in 0..=3 {
            assert_eq!(ck_distance(&traj, &traj, k, (0.0, 0.01)).unwrap(), 0.0);
        }
    }

    #[test]
    fn segments_with_different_resolution_agree() {
        let seg = |n| make_initial_curve(&InitialFamily::segment_unit(), n).unwrap();
        let a = run(&seg(32), &FlowConfig::new(0.1, 32, 0.01).with_dt(1e-3)).unwrap();
        let b = run(&seg(48), &FlowConfig::new(0.1, 48, 0.01).with_dt(1e-3)).unwrap();
        assert!(ck_distance(&a, &b, 2, (0.0, 0.01)).unwrap() < 1e-10);
    }

    #[test]
    fn regularized_and_limit_flows_differ() {
        let a = run(&sine(32), &FlowConfig::new(0.1, 32, 0.02).with_dt(1e-3)).unwrap();
        let b = run(&sine(32), &FlowConfig::new(0.0, 32, 0.02).with_dt(1e-3)).unwrap();
        let d0 = ck_distance(&a, &b, 0, (0.005, 0.02)).unwrap();
        let d1 = ck_distance(&a, &b, 1, (0.005, 0.02)).unwrap();
        assert!(d0 > 0.0 && d0.is_finite());
        assert!(d1 >= d0);
    }

    #[test]
    fn early_termination_is_a_window_mismatch() {
        let loop_curve = make_initial_curve(
            &InitialFamily::ArcWithFlatEnds {
                length: 1.0,
                turning: 2.0 * std::f64::consts::PI,
            },
            64,
        )
        .unwrap();
        let mut cfg = FlowConfig::new(0.0, 64, 0.05).with_dt(1e-5);
        cfg.kappa_blowup_threshold = 60.0;
        let short = run(&loop_curve, &cfg).unwrap();
        assert_eq!(short.terminated_by, Termination::SingularityDetected);
        assert!(singularity_time_estimate(&short).is_some());
        let err = ck_distance(&short, &short, 0, (0.0, 0.05)).unwrap_err();
        assert!(matches!(err, FlowError::WindowMismatch(_)));
    }

    #[test]
    fn segment_sweep_is_flat() {
        let seg = make_initial_curve(&InitialFamily::segment_unit(), 32).unwrap();
        let cfg = SweepConfig::new(vec![0.2, 0.1], FlowConfig::new(0.0, 32, 0.02).with_dt(1e-3));
        let report = run_sweep(&seg, &cfg).unwrap();
        for row in &report.rows {
            assert!(row.distances.iter().all(|d| *d <= 1e-10));
        }
        assert!(report.fitted_order.iter().all(Option::is_none));
        let traj = run(&seg, &FlowConfig::new(0.0, 32, 0.01).with_dt(1e-3)).unwrap();
        assert_eq!(singularity_time_estimate(&traj), None);
    }

    #[test]
    fn sweep_rows_are_ordered_and_nested_in_k() {
        let mut cfg = SweepConfig::new(vec![0.2, 0.1, 0.05], FlowConfig::new(0.0, 32, 0.02).with_dt(2e-4));
        cfg.k_max = 2;
        let report = run_sweep(&sine(32), &cfg).unwrap();
        assert_eq!(report.rows.len(), 3);
        for row in &report.rows {
            assert!(row.distances.windows(2).all(|w| w[1] >= w[0]));
        }
        assert!(report.monotone[0]);
        assert!(report.fitted_order[0].unwrap() > 0.0);
    }

    #[test]
    fn flattened_data_agree_at_time_zero() {
        let mut cfg = SweepConfig::new(vec![0.2, 0.1], FlowConfig::new(0.0, 32, 0.01).with_dt(1e-3));
        cfg.delta = 0.0;
        cfg.snapshot_times = vec![0.0];
        let report = run_sweep(&sine(32), &cfg).unwrap();
        for row in &report.rows {
            assert!(row.distances[0] <= 1e-12);
        }
    }

    #[test]
    fn sweep_validation() {
        let base = FlowConfig::new(0.0, 32, 0.01).with_dt(1e-3);
        let bad = |cfg: SweepConfig| match cfg.validate() {
            Err(FlowError::Config { key, .. }) => key,
            other => panic!("{other:?}"),
        };
        assert_eq!(bad(SweepConfig::new(vec![0.1, 0.2], base.clone())), "sweep.epsilons");
        assert_eq!(bad(SweepConfig::new(vec![1.5], base.clone())), "sweep.epsilons");
        let mut c = SweepConfig::new(vec![0.1], base.clone());
        c.k_max = 4;
        assert_eq!(bad(c), "sweep.k_max");
        let mut c = SweepConfig::new(vec![0.1], base.clone());
        c.snapshot_times = vec![0.0015];
        assert_eq!(bad(c), "sweep.snapshot_times");
        let mut c = SweepConfig::new(vec![0.1], base);
        c.delta = 0.01;
        assert_eq!(bad(c), "sweep.delta");
    }
}
