//! Discrete open plane curves and their arclength calculus.
//!
//! A [`DiscreteCurve`] is a polyline `X_0, …, X_n` sampled on the uniform grid
//! `x_i = i / n` of `[0, 1]`, with `X_0 = P` and `X_n = Q` pinned. Geometry is
//! evaluated by [`compute_geometry`]; at the endpoints the position is extended
//! by point reflection (`X_{-k} = 2P − X_k`), which makes every even arclength
//! derivative of the curvature vanish there.

pub(crate) mod initial;
mod reparam;
pub mod snapshot;

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::stencil::{centered_unit, fornberg_weights};

pub use initial::{make_initial_curve, InitialFamily};
pub use reparam::reparametrize_constant_speed;

/// Minimum number of segments of a discrete curve.
pub const MIN_SEGMENTS: usize = 16;

/// Relative segment length below which a curve is degenerate.
const DEGENERATE_RATIO: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Self {
        self * (1.0 / self.norm())
    }

    /// Counterclockwise rotation by π/2.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rigid motion: rotation by `angle` about the origin, then translation.
    pub fn rotate_translate(self, angle: f64, shift: Point2) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y + shift.x, s * self.x + c * self.y + shift.y)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Polyline sample of an immersed open curve joining `P = nodes[0]` to
/// `Q = nodes[n]`. Self-intersections are allowed and not tracked.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCurve {
    nodes: Vec<Point2>,
}

impl DiscreteCurve {
    pub fn new(nodes: Vec<Point2>) -> Result<Self> {
        if nodes.len() < MIN_SEGMENTS + 1 {
            return Err(FlowError::BadParams(format!(
                "a curve needs at least {} nodes, got {}",
                MIN_SEGMENTS + 1,
                nodes.len()
            )));
        }
        if let Some(i) = nodes.iter().position(|p| !p.is_finite()) {
            return Err(FlowError::BadParams(format!("node {i} is not finite")));
        }
        let curve = Self { nodes };
        curve.check_regular()?;
        Ok(curve)
    }

    /// Builds a curve without the regularity check. Used by the stepper, which
    /// runs its own singularity detection.
    pub(crate) fn from_nodes_unchecked(nodes: Vec<Point2>) -> Self {
        Self { nodes }
    }

    pub fn nodes(&self) -> &[Point2] {
        &self.nodes
    }

    /// Number of segments `n` (there are `n + 1` nodes).
    pub fn segments(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn p(&self) -> Point2 {
        self.nodes[0]
    }

    pub fn q(&self) -> Point2 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| (w[1] - w[0]).norm()).collect()
    }

    pub fn length(&self) -> f64 {
        self.segment_lengths().iter().sum()
    }

    pub fn min_segment(&self) -> f64 {
        self.segment_lengths().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn check_regular(&self) -> Result<()> {
        let lens = self.segment_lengths();
        let total: f64 = lens.iter().sum();
        let (i, min) = lens
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |a, (i, l)| if l < a.1 { (i, l) } else { a });
        if !(total > 0.0) || min < DEGENERATE_RATIO * total {
            return Err(FlowError::DegenerateCurve(format!(
                "segment {i} has length {min:e} (total {total:e})"
            )));
        }
        Ok(())
    }

    /// Applies a rigid motion to every node.
    pub fn rigid_motion(&self, angle: f64, shift: Point2) -> Self {
        Self {
            nodes: self.nodes.iter().map(|p| p.rotate_translate(angle, shift)).collect(),
        }
    }
}

/// Arclength quantities of a discrete curve.
#[derive(Debug, Clone)]
pub struct GeometryCache {
    pub total_length: f64,
    /// Mean segment length, the grid spacing of the arclength stencils.
    pub h: f64,
    /// Cumulative arclength at each node.
    pub s: Vec<f64>,
    /// Trapezoid weights in arclength.
    pub ds: Vec<f64>,
    pub tangent: Vec<Point2>,
    pub normal: Vec<Point2>,
    pub kappa: Vec<f64>,
    /// `kappa_s[j - 1]` holds ∂ʲ_s κ for j = 1..=4.
    pub kappa_s: [Vec<f64>; 4],
    pub closed: bool,
}

impl GeometryCache {
    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    /// ∂ʲ_s κ for j = 0..=4.
    pub fn kappa_derivative(&self, j: usize) -> &[f64] {
        if j == 0 {
            &self.kappa
        } else {
            &self.kappa_s[j - 1]
        }
    }

    /// Trapezoid rule in arclength.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.ds.len());
        f.iter().zip(&self.ds).map(|(f, w)| f * w).sum()
    }

    /// Cumulative trapezoid integral from the first node.
    pub fn cumulative_integral(&self, f: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(f.len());
        let mut acc = 0.0;
        out.push(0.0);
        for i in 1..f.len() {
            acc += 0.5 * (f[i] + f[i - 1]) * (self.s[i] - self.s[i - 1]);
            out.push(acc);
        }
        out
    }

    pub fn max_abs_kappa(&self) -> f64 {
        self.kappa.iter().fold(0.0, |m, k| m.max(k.abs()))
    }
}

static CORRUPT_STENCIL: AtomicBool = AtomicBool::new(false);

/// Negative-control hook for the acceptance suite: when set, the curvature
/// stencil is deliberately biased so that the verification must fail.
#[doc(hidden)]
pub fn set_stencil_corruption(on: bool) {
    CORRUPT_STENCIL.store(on, Ordering::SeqCst);
}

fn stencil_corrupted() -> bool {
    CORRUPT_STENCIL.load(Ordering::Relaxed)
}

/// Second derivative in arclength and unit tangent at a node from its two
/// neighbours, with chord lengths as arclength weights.
fn local_frame(prev: Point2, mid: Point2, next: Point2) -> (Point2, Point2) {
    let dm = mid - prev;
    let dp = next - mid;
    let (hm, hp) = (dm.norm(), dp.norm());
    let um = dm * (1.0 / hm);
    let up = dp * (1.0 / hp);
    let gamma_ss = (up - um) * (2.0 / (hm + hp));
    let tangent = (um * (hp / (hm + hp)) + up * (hm / (hm + hp))).normalized();
    (gamma_ss, tangent)
}

fn finish_cache(
    seg: &[f64],
    tangent: Vec<Point2>,
    mut kappa: Vec<f64>,
    closed: bool,
) -> GeometryCache {
    let total_length: f64 = seg.iter().sum();
    let h = total_length / seg.len() as f64;
    let m = kappa.len();
    if stencil_corrupted() {
        for k in kappa.iter_mut() {
            *k = 1.05 * *k + 1e-3;
        }
    }
    let normal: Vec<Point2> = tangent.iter().map(|t| t.perp()).collect();
    let mut s = Vec::with_capacity(m);
    let mut ds = vec![0.0; m];
    s.push(0.0);
    for i in 1..m {
        s.push(s[i - 1] + seg[i - 1]);
    }
    if closed {
        for i in 0..m {
            ds[i] = 0.5 * (seg[i] + seg[(i + m - 1) % m]);
        }
    } else {
        for (i, l) in seg.iter().enumerate() {
            ds[i] += 0.5 * l;
            ds[i + 1] += 0.5 * l;
        }
    }
    let mut cache = GeometryCache {
        total_length,
        h,
        s,
        ds,
        tangent,
        normal,
        kappa,
        kappa_s: Default::default(),
        closed,
    };
    for j in 1..=4 {
        cache.kappa_s[j - 1] = arclength_derivative(&cache, &cache.kappa, j);
    }
    cache
}

/// Tangent, normal, curvature and its arclength derivatives of an open curve.
pub fn compute_geometry(curve: &DiscreteCurve) -> Result<GeometryCache> {
    curve.check_regular()?;
    Ok(compute_geometry_unchecked(curve))
}

pub(crate) fn compute_geometry_unchecked(curve: &DiscreteCurve) -> GeometryCache {
    let x = curve.nodes();
    let m = x.len();
    let seg = curve.segment_lengths();
    let mut tangent = Vec::with_capacity(m);
    let mut kappa = Vec::with_capacity(m);
    for i in 0..m {
        let prev = if i == 0 { x[0] * 2.0 - x[1] } else { x[i - 1] };
        let next = if i == m - 1 { x[m - 1] * 2.0 - x[m - 2] } else { x[i + 1] };
        let (gss, t) = local_frame(prev, x[i], next);
        kappa.push(gss.dot(t.perp()));
        tangent.push(t);
    }
    finish_cache(&seg, tangent, kappa, false)
}

/// Geometry of a closed polygon (periodic stencils). Only used as an oracle
/// mode for tests against circles and ellipses; not part of the flow API.
pub fn compute_geometry_closed(points: &[Point2]) -> Result<GeometryCache> {
    let m = points.len();
    if m < MIN_SEGMENTS {
        return Err(FlowError::BadParams(format!("closed curve needs {MIN_SEGMENTS} nodes")));
    }
    let seg: Vec<f64> = (0..m).map(|i| (points[(i + 1) % m] - points[i]).norm()).collect();
    let total: f64 = seg.iter().sum();
    if seg.iter().any(|&l| l < DEGENERATE_RATIO * total) {
        return Err(FlowError::DegenerateCurve("closed curve has a vanishing segment".into()));
    }
    let mut tangent = Vec::with_capacity(m);
    let mut kappa = Vec::with_capacity(m);
    for i in 0..m {
        let (gss, t) = local_frame(points[(i + m - 1) % m], points[i], points[(i + 1) % m]);
        kappa.push(gss.dot(t.perp()));
        tangent.push(t);
    }
    Ok(finish_cache(&seg, tangent, kappa, true))
}

/// Centered second-order arclength derivative of a node field on a
/// constant-speed grid with spacing `cache.h`.
///
/// Open curves are extended past each endpoint by odd reflection about the
/// endpoint value (`f(−s) = 2 f(0) − f(s)`); closed curves are periodic.
pub fn arclength_derivative(cache: &GeometryCache, field: &[f64], order: usize) -> Vec<f64> {
    assert_eq!(field.len(), cache.len(), "field length must match node count");
    uniform_derivative(field, cache.h, order, cache.closed)
}

/// The stencil behind [`arclength_derivative`] for any uniform grid spacing.
pub fn uniform_derivative(field: &[f64], h: f64, order: usize, closed: bool) -> Vec<f64> {
    assert!((1..=4).contains(&order), "order must be in 1..=4");
    let m = field.len() as isize;
    let w = centered_unit(order);
    let scale = h.powi(order as i32);
    let at = |k: isize| -> f64 {
        if closed {
            field[k.rem_euclid(m) as usize]
        } else if k < 0 {
            2.0 * field[0] - field[(-k) as usize]
        } else if k >= m {
            2.0 * field[(m - 1) as usize] - field[(2 * (m - 1) - k) as usize]
        } else {
            field[k as usize]
        }
    };
    (0..m)
        .map(|i| {
            let mut acc = 0.0;
            for (o, wk) in (-2..=2).zip(w) {
                if wk != 0.0 {
                    acc += wk * at(i + o);
                }
            }
            acc / scale
        })
        .collect()
}

/// Which end of an open curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Start,
    Finish,
}

/// Curvature at an endpoint from a one-sided stencil on positions, without
/// any ghost reflection.
pub fn endpoint_kappa_one_sided(curve: &DiscreteCurve, end: End) -> f64 {
    let x = curve.nodes();
    let m = x.len();
    let pts: Vec<Point2> = match end {
        End::Start => x[..7].to_vec(),
        End::Finish => x[m - 7..].iter().rev().copied().collect(),
    };
    let mut s = vec![0.0; pts.len()];
    for i in 1..pts.len() {
        s[i] = s[i - 1] + (pts[i] - pts[i - 1]).norm();
    }
    let w1 = fornberg_weights(0.0, &s, 1);
    let w2 = fornberg_weights(0.0, &s, 2);
    let mut d1 = Point2::default();
    let mut d2 = Point2::default();
    for (p, (a, b)) in pts.iter().zip(w1.iter().zip(&w2)) {
        d1 = d1 + *p * *a;
        d2 = d2 + *p * *b;
    }
    let k = d1.cross(d2) / d1.norm().powi(3);
    // orientation: arclength runs backwards from the far end
    match end {
        End::Start => k,
        End::Finish => -k,
    }
}

/// Arclength derivative of `field` at an endpoint from interior samples only
/// (nodes `1..=order + 2` away from the end), second-order accurate.
pub fn endpoint_derivative_one_sided(cache: &GeometryCache, field: &[f64], order: usize, end: End) -> f64 {
    let m = field.len();
    let count = order + 2;
    let (xs, vals): (Vec<f64>, Vec<f64>) = (1..=count)
        .map(|k| match end {
            End::Start => (cache.s[k] - cache.s[0], field[k]),
            End::Finish => (cache.s[m - 1] - cache.s[m - 1 - k], field[m - 1 - k]),
        })
        .unzip();
    let w = fornberg_weights(0.0, &xs, order);
    let d: f64 = w.iter().zip(&vals).map(|(w, v)| w * v).sum();
    // distances are measured inward at the far end
    match end {
        End::Finish if order % 2 == 1 => -d,
        _ => d,
    }
}

/// Endpoint curvature predicted by extrapolating interior curvature values,
/// used for the compatibility check of initial data.
pub fn endpoint_kappa_extrapolated(cache: &GeometryCache, end: End) -> f64 {
    let m = cache.len();
    let (xs, vals): (Vec<f64>, Vec<f64>) = (1..=4)
        .map(|k| match end {
            End::Start => (cache.s[k] - cache.s[0], cache.kappa[k]),
            End::Finish => (cache.s[m - 1] - cache.s[m - 1 - k], cache.kappa[m - 1 - k]),
        })
        .unzip();
    let w = fornberg_weights(0.0, &xs, 0);
    w.iter().zip(&vals).map(|(w, v)| w * v).sum()
}

#[cfg(test)]
mod tests;
