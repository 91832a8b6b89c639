use super::{DiscreteCurve, Point2};
use crate::error::{FlowError, Result};
use crate::spline::ParametricSpline;

/// Number of reflected ghost nodes added on each side before fitting.
const GHOSTS: usize = 3;

/// Moves the nodes along a cubic interpolant of the curve so that all chords
/// `|X_{i+1} − X_i|` are equal. Endpoints are kept bit-for-bit.
///
/// The interpolant is a not-a-knot spline in cumulative chord length through
/// the nodes extended by point reflection at both ends, so it respects the
/// odd symmetry of the curve about `P` and `Q`.
pub fn reparametrize_constant_speed(curve: &DiscreteCurve) -> Result<DiscreteCurve> {
    curve.check_regular()?;
    let x = curve.nodes();
    let n = curve.segments();
    let (p, q) = (curve.p(), curve.q());

    let mut ext: Vec<Point2> = Vec::with_capacity(n + 1 + 2 * GHOSTS);
    for k in (1..=GHOSTS).rev() {
        ext.push(p * 2.0 - x[k]);
    }
    ext.extend_from_slice(x);
    for k in 1..=GHOSTS {
        ext.push(q * 2.0 - x[n - k]);
    }
    let mut u = vec![0.0; ext.len()];
    for i in 1..ext.len() {
        u[i] = u[i - 1] + (ext[i] - ext[i - 1]).norm();
    }
    let u0 = u[GHOSTS];
    for v in u.iter_mut() {
        *v -= u0;
    }
    let u_end = u[GHOSTS + n];
    let spline = ParametricSpline::through(&u, &ext);

    let c0 = curve.length() / n as f64;
    // nodes of the most recent march, so the converged one is not walked twice
    let last = std::cell::RefCell::new((f64::NAN, Vec::with_capacity(n + 1)));
    let target = |c: f64| -> Result<f64> {
        let mut slot = last.borrow_mut();
        slot.1.clear();
        slot.0 = c;
        Ok(march(&spline, p, c, n, Some(&mut slot.1))? - u_end)
    };

    let tol = 1e-14 * u_end.max(1e-300);
    let c = match fast_secant(&target, c0, n, tol)? {
        Some(c) => c,
        None => bracketed_secant(&target, c0, tol)?,
    };

    let (c_last, mut nodes) = last.into_inner();
    if c_last != c {
        nodes.clear();
        march(&spline, p, c, n, Some(&mut nodes))?;
    }
    nodes[0] = p;
    nodes.truncate(n + 1);
    nodes[n] = q;
    DiscreteCurve::new(nodes)
}


/// Plain secant from the current mean chord. A curve that is already close
/// to constant speed overshoots by about `n·(c − c*)`, which gives the second
/// iterate. Returns `None` if the iteration wanders, so the caller can fall
/// back to the bracketed search.
fn fast_secant(target: &impl Fn(f64) -> Result<f64>, c0: f64, n: usize, tol: f64) -> Result<Option<f64>> {
    let (mut c_prev, mut f_prev) = (c0, target(c0)?);
    if f_prev.abs() <= tol {
        return Ok(Some(c0));
    }
    let mut c = c0 - f_prev / n as f64;
    for _ in 0..12 {
        if !(c > 0.5 * c0 && c < 2.0 * c0) {
            return Ok(None);
        }
        let fc = target(c)?;
        if fc.abs() <= tol {
            return Ok(Some(c));
        }
        if fc == f_prev {
            return Ok(None);
        }
        let next = c - fc * (c - c_prev) / (fc - f_prev);
        (c_prev, f_prev) = (c, fc);
        c = next;
    }
    Ok(None)
}

/// Secant iteration safeguarded by a bracket grown around `c0`.
fn bracketed_secant(target: &impl Fn(f64) -> Result<f64>, c0: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (0.98 * c0, 1.02 * c0);
    let (mut fa, mut fb) = (target(a)?, target(b)?);
    let mut grow = 0;
    while fa * fb > 0.0 {
        grow += 1;
        if grow > 60 {
            return Err(FlowError::DegenerateCurve("cannot bracket constant-speed chord".into()));
        }
        if fa > 0.0 {
            a *= 0.9;
            fa = target(a)?;
        } else {
            b *= 1.1;
            fb = target(b)?;
        }
    }
    let mut c = b;
    let mut fc = fb;
    let (mut c_prev, mut f_prev) = (a, fa);
    for _ in 0..200 {
        if fc.abs() <= tol {
            break;
        }
        let mut next = c - fc * (c - c_prev) / (fc - f_prev);
        let (lo, hi) = (a.min(b), a.max(b));
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (a + b);
        }
        let fnext = target(next)?;
        if fnext * fa < 0.0 {
            b = next;
            fb = fnext;
        } else {
            a = next;
            fa = fnext;
        }
        c_prev = c;
        f_prev = fc;
        c = next;
        fc = fnext;
        if (b - a).abs() <= 1e-16 * c0 {
            break;
        }
    }
    let _ = fb;
    Ok(c)

}

/// Walks `n` equal chords of length `c` along the spline from `start`,
/// returning the spline parameter of the last point reached.
fn march(
    spline: &ParametricSpline,
    start: Point2,
    c: f64,
    n: usize,
    mut out: Option<&mut Vec<Point2>>,
) -> Result<f64> {
    let mut u = 0.0;
    let mut pos = start;
    let mut hint = 0;
    if let Some(o) = out.as_deref_mut() {
        o.push(start);
    }
    for _ in 0..n {
        (u, hint) = next_chord(spline, pos, u, c, hint)?;
        pos = spline.point_and_tangent_in(hint, u).0;
        if let Some(o) = out.as_deref_mut() {
            o.push(pos);
        }
    }
    Ok(u)
}

/// Smallest parameter `v > u` with `|S(v) − pos| = c`, together with the knot
/// interval containing it.
fn next_chord(spline: &ParametricSpline, pos: Point2, u: f64, c: f64, hint: usize) -> Result<(f64, usize)> {
    let f = |v: f64| (spline.point(v) - pos).norm() - c;
    let mut v = u + c;
    let mut i = hint;
    for _ in 0..30 {
        i = spline.locate(v, i);
        let (s, ds) = spline.point_and_tangent_in(i, v);
        let d = s - pos;
        let r = d.norm();
        let g = r - c;
        let dg = d.dot(ds) / r;
        if !(dg > 0.0) {
            break;
        }
        let step = g / dg;
        let nv = v - step;
        if !(nv > u) {
            break;
        }
        v = nv;
        if step.abs() <= 1e-15 * (1.0 + v.abs()) {
            return Ok((v, spline.locate(v, i)));
        }
    }
    // bisection fallback: bracket the first crossing
    let mut lo = u;
    let mut hi = u + 0.25 * c;
    let mut tries = 0;
    while f(hi) < 0.0 {
        lo = hi;
        hi += 0.25 * c;
        tries += 1;
        if tries > 400 {
            return Err(FlowError::DegenerateCurve("chord march left the curve".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * (1.0 + hi.abs()) {
            break;
        }
    }
    let v = 0.5 * (lo + hi);
    Ok((v, spline.locate(v, hint)))
}
