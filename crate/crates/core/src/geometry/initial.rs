use serde::{Deserialize, Serialize};

use super::{DiscreteCurve, Point2};
use crate::error::{FlowError, Result};

/// Largest slope `|dy/dx|` accepted for graph-type families.
const MAX_SLOPE: f64 = 8.0;

/// Families of compatible initial data (curvature vanishing at both ends).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialFamily {
    /// Straight segment from `p` to `q`.
    Segment { p: Point2, q: Point2 },
    /// `y = amplitude · sin(π x)` over the unit segment. Every even derivative
    /// vanishes at both ends.
    FlattenedSine { amplitude: f64 },
    /// Unit segment with a smooth compactly supported bump of height
    /// `amplitude` on `[support_start, support_end]`.
    BumpPerturbedSegment {
        amplitude: f64,
        support_start: f64,
        support_end: f64,
    },
    /// Unit-speed curve of length `length` whose curvature is a smooth bump
    /// on the middle half, integrating to `turning` radians; straight near
    /// both ends. A turning of 2π produces a loop.
    ArcWithFlatEnds { length: f64, turning: f64 },
}

impl InitialFamily {
    pub fn segment_unit() -> Self {
        Self::Segment {
            p: Point2::new(0.0, 0.0),
            q: Point2::new(1.0, 0.0),
        }
    }
}

/// Smooth bump `exp(1 − 1/(1 − r²))` on `|r| < 1`, with value 1 at `r = 0`.
fn bump(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    }
}

fn bump_derivative(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - r * r;
        bump(r) * (-2.0 * r / (d * d))
    }
}

/// Samples the curve `x ↦ γ(x)` at `n + 1` points equally spaced in arclength.
pub(crate) fn sample_by_arclength(
    gamma: impl Fn(f64) -> Point2,
    speed: impl Fn(f64) -> f64,
    n: usize,
) -> Result<Vec<Point2>> {
    // fine Simpson table of arclength
    let fine = 64 * n;
    let mut xs = Vec::with_capacity(fine + 1);
    let mut ss = Vec::with_capacity(fine + 1);
    let mut acc = 0.0;
    xs.push(0.0);
    ss.push(0.0);
    for k in 0..fine {
        let a = k as f64 / fine as f64;
        let b = (k + 1) as f64 / fine as f64;
        acc += (b - a) / 6.0 * (speed(a) + 4.0 * speed(0.5 * (a + b)) + speed(b));
        xs.push(b);
        ss.push(acc);
    }
    let total = acc;
    let mut nodes = Vec::with_capacity(n + 1);
    let mut k = 0;
    for i in 0..=n {
        let target = total * i as f64 / n as f64;
        while k + 1 < fine && ss[k + 1] < target {
            k += 1;
        }
        // Newton refinement of the parameter with the exact speed
        let mut x = xs[k] + (target - ss[k]) / (ss[k + 1] - ss[k]) * (xs[k + 1] - xs[k]);
        let mut s_x = ss[k] + simpson(&speed, xs[k], x);
        for _ in 0..4 {
            let sp = speed(x);
            let dx = (target - s_x) / sp;
            let nx = x + dx;
            s_x += simpson(&speed, x, nx);
            x = nx;
        }
        nodes.push(gamma(x.clamp(0.0, 1.0)));
    }
    nodes[0] = gamma(0.0);
    nodes[n] = gamma(1.0);
    Ok(nodes)
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

/// Builds initial data of the requested family with `n` segments. Nodes lie on
/// the exact curve at equal arclength spacing.
pub fn make_initial_curve(family: &InitialFamily, n: usize) -> Result<DiscreteCurve> {
    if n < super::MIN_SEGMENTS {
        return Err(FlowError::BadParams(format!(
            "n = {n} is below the minimum of {}",
            super::MIN_SEGMENTS
        )));
    }
    let nodes = match *family {
        InitialFamily::Segment { p, q } => {
            if !((q - p).norm() > 0.0) {
                return Err(FlowError::BadParams("segment endpoints coincide".into()));
            }
            let mut v: Vec<Point2> = (0..=n)
                .map(|i| {
                    let t = i as f64 / n as f64;
                    p * (1.0 - t) + q * t
                })
                .collect();
            v[0] = p;
            v[n] = q;
            v
        }
        InitialFamily::FlattenedSine { amplitude } => {
            let slope = amplitude.abs() * std::f64::consts::PI;
            if !amplitude.is_finite() || slope > MAX_SLOPE {
                return Err(FlowError::BadParams(format!(
                    "amplitude {amplitude} exceeds the regularity bound |A|π ≤ {MAX_SLOPE}"
                )));
            }
            use std::f64::consts::PI;
            let mut v = sample_by_arclength(
                |x| Point2::new(x, amplitude * (PI * x).sin()),
                |x| (1.0 + (amplitude * PI * (PI * x).cos()).powi(2)).sqrt(),
                n,
            )?;
            // sin(π) is not exactly zero in floating point
            v[n] = Point2::new(1.0, 0.0);
            v
        }
        InitialFamily::BumpPerturbedSegment {
            amplitude,
            support_start: a,
            support_end: b,
        } => {
            if !(0.0 <= a && a < b && b <= 1.0) || !amplitude.is_finite() {
                return Err(FlowError::BadParams(format!("bad bump support [{a}, {b}]")));
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            // max |bump'| ≈ 1.5 on |r| < 1
            if amplitude.abs() * 1.6 / half > MAX_SLOPE {
                return Err(FlowError::BadParams(format!(
                    "bump amplitude {amplitude} too steep for support width {}",
                    b - a
                )));
            }
            sample_by_arclength(
                |x| Point2::new(x, amplitude * bump((x - mid) / half)),
                |x| (1.0 + (amplitude * bump_derivative((x - mid) / half) / half).powi(2)).sqrt(),
                n,
            )?
        }
        InitialFamily::ArcWithFlatEnds { length, turning } => {
            if !(length > 0.0) || !turning.is_finite() {
                return Err(FlowError::BadParams("arc needs positive length and finite turning".into()));
            }
            integrate_curvature_profile(length, turning, n)
        }
    };
    DiscreteCurve::new(nodes)
}

/// Integrates θ' = κ(s), γ' = (cos θ, sin θ) with RK4 on a fine grid.
fn integrate_curvature_profile(length: f64, turning: f64, n: usize) -> Vec<Point2> {
    const SUB: usize = 64;
    // normalization of the bump on [L/4, 3L/4]
    let norm = {
        let m = 4096;
        (0..m)
            .map(|k| {
                let r = -1.0 + 2.0 * (k as f64 + 0.5) / m as f64;
                bump(r) * 2.0 / m as f64
            })
            .sum::<f64>()
            * (0.25 * length)
    };
    let kappa = |s: f64| turning / norm * bump((s - 0.5 * length) / (0.25 * length));
    let h = length / (n * SUB) as f64;
    // state (θ, x, y)
    let rhs = |s: f64, st: [f64; 3]| -> [f64; 3] { [kappa(s), st[0].cos(), st[0].sin()] };
    let mut st = [0.0, 0.0, 0.0];
    let mut nodes = vec![Point2::new(0.0, 0.0)];
    for i in 0..n * SUB {
        let s = i as f64 * h;
        let k1 = rhs(s, st);
        let k2 = rhs(s + 0.5 * h, add(st, k1, 0.5 * h));
        let k3 = rhs(s + 0.5 * h, add(st, k2, 0.5 * h));
        let k4 = rhs(s + h, add(st, k3, h));
        for c in 0..3 {
            st[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        if (i + 1) % SUB == 0 {
            nodes.push(Point2::new(st[1], st[2]));
        }
    }
    nodes
}

fn add(a: [f64; 3], b: [f64; 3], h: f64) -> [f64; 3] {
    [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2]]
}
