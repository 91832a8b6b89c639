//! Cubic interpolating splines with not-a-knot end conditions.

use crate::banded::BandedMatrix;
use crate::geometry::Point2;

/// Scalar cubic spline through `(knots[i], values[i])`.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
}

impl CubicSpline {
    /// Knots must be strictly increasing with at least four points.
    pub fn not_a_knot(knots: &[f64], values: &[f64]) -> Self {
        let n = knots.len();
        assert_eq!(n, values.len());
        assert!(n >= 4, "not-a-knot spline needs at least 4 knots");
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        debug_assert!(h.iter().all(|&hi| hi > 0.0));
        let d: Vec<f64> = values
            .windows(2)
            .zip(&h)
            .map(|(w, hi)| (w[1] - w[0]) / hi)
            .collect();

        // unknowns M_1..M_{n-2}; M_0 and M_{n-1} eliminated via not-a-knot
        let k = n - 2;
        let mut a = BandedMatrix::zeros(k, 1, 1);
        let mut rhs = vec![0.0; k];
        for r in 0..k {
            let i = r + 1;
            rhs[r] = 6.0 * (d[i] - d[i - 1]);
            a.add(r, r, 2.0 * (h[i - 1] + h[i]));
            if r > 0 {
                a.add(r, r - 1, h[i - 1]);
            }
            if r + 1 < k {
                a.add(r, r + 1, h[i]);
            }
        }
        let (h0, h1) = (h[0], h[1]);
        // M0 = M1 (1 + h0/h1) - M2 h0/h1
        a.add(0, 0, h0 * (1.0 + h0 / h1));
        if k > 1 {
            a.add(0, 1, -h0 * h0 / h1);
        }
        let (ha, hb) = (h[n - 3], h[n - 2]);
        // M_{n-1} = M_{n-2} (1 + hb/ha) - M_{n-3} hb/ha
        a.add(k - 1, k - 1, hb * (1.0 + hb / ha));
        if k > 1 {
            a.add(k - 1, k - 2, -hb * hb / ha);
        }
        let lu = a.factor().expect("spline system is diagonally dominant");
        let inner = lu.solve(&rhs);

        let mut m = vec![0.0; n];
        m[1..n - 1].copy_from_slice(&inner);
        m[0] = m[1] * (1.0 + h0 / h1) - m[2] * h0 / h1;
        m[n - 1] = m[n - 2] * (1.0 + hb / ha) - m[n - 3] * hb / ha;
        Self {
            knots: knots.to_vec(),
            values: values.to_vec(),
            m,
        }
    }

    fn interval(&self, u: f64) -> usize {
        let n = self.knots.len();
        match self.knots.partition_point(|&k| k <= u) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    /// Value and first derivative at `u`; the end cubics extrapolate.
    pub fn eval_with_derivative(&self, u: f64) -> (f64, f64) {
        self.eval_in(self.interval(u), u)
    }

    /// As [`Self::eval_with_derivative`] with the knot interval already known.
    fn eval_in(&self, i: usize, u: f64) -> (f64, f64) {
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - u) / h;
        let b = (u - self.knots[i]) / h;
        let (y0, y1, m0, m1) = (self.values[i], self.values[i + 1], self.m[i], self.m[i + 1]);
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let dv = (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        (v, dv)
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.eval_with_derivative(u).0
    }
}

/// Planar curve interpolated by two scalar splines in a common parameter.
#[derive(Debug, Clone)]
pub struct ParametricSpline {
    x: CubicSpline,
    y: CubicSpline,
}

impl ParametricSpline {
    pub fn through(params: &[f64], points: &[Point2]) -> Self {
        let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
        Self {
            x: CubicSpline::not_a_knot(params, &xs),
            y: CubicSpline::not_a_knot(params, &ys),
        }
    }

    pub fn point(&self, u: f64) -> Point2 {
        Point2::new(self.x.eval(u), self.y.eval(u))
    }

    pub fn point_and_tangent(&self, u: f64) -> (Point2, Point2) {
        let (x, dx) = self.x.eval_with_derivative(u);
        let (y, dy) = self.y.eval_with_derivative(u);
        (Point2::new(x, y), Point2::new(dx, dy))
    }

    /// Knot interval containing `u`, searched outward from `hint`. Both
    /// coordinates share their knots, so one lookup serves both.
    pub fn locate(&self, u: f64, hint: usize) -> usize {
        let knots = &self.x.knots;
        let last = knots.len() - 2;
        let mut i = hint.min(last);
        while i > 0 && u < knots[i] {
            i -= 1;
        }
        while i < last && u >= knots[i + 1] {
            i += 1;
        }
        i
    }

    /// Point and tangent at `u` in interval `i` (from [`Self::locate`]).
    pub fn point_and_tangent_in(&self, i: usize, u: f64) -> (Point2, Point2) {
        let (x, dx) = self.x.eval_in(i, u);
        let (y, dy) = self.y.eval_in(i, u);
        (Point2::new(x, y), Point2::new(dx, dy))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubics_exactly() {
        let knots: Vec<f64> = [0.0, 0.3, 0.5, 1.1, 1.4, 2.0].to_vec();
        let f = |u: f64| 1.0 - 2.0 * u + 0.5 * u * u - 0.7 * u * u * u;
        let vals: Vec<f64> = knots.iter().map(|&u| f(u)).collect();
        let s = CubicSpline::not_a_knot(&knots, &vals);
        for i in 0..=40 {
            let u = -0.2 + 2.4 * i as f64 / 40.0;
            assert!((s.eval(u) - f(u)).abs() < 1e-12, "u={u}");
        }
    }

    #[test]
    fn hinted_lookup_matches_search() {
        let knots: Vec<f64> = (0..12).map(|i| (i as f64).powf(1.3)).collect();
        let pts: Vec<Point2> = knots.iter().map(|&u| Point2::new(u.cos(), u.sin())).collect();
        let s = ParametricSpline::through(&knots, &pts);
        for j in 0..=100 {
            let u = -1.0 + 27.0 * j as f64 / 100.0;
            for hint in [0, 5, 20] {
                let i = s.locate(u, hint);
                assert_eq!(i, s.x.interval(u));
                assert_eq!(s.point_and_tangent_in(i, u), s.point_and_tangent(u));
            }
        }
    }

    #[test]
    fn interpolates_knots() {
        let knots: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let vals: Vec<f64> = knots.iter().map(|u| u.sin()).collect();
        let s = CubicSpline::not_a_knot(&knots, &vals);
        for (u, v) in knots.iter().zip(&vals) {
            assert!((s.eval(*u) - v).abs() < 1e-13);
        }
    }
}
