//! Banded direct elimination with one step of iterative refinement.

use crate::error::{FlowError, Result};

/// Square banded matrix with `lower` sub- and `upper` super-diagonals,
/// stored row-wise as `data[i * width + (j + lower - i)]`.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        Self {
            n,
            lower,
            upper,
            data: vec![0.0; n * (lower + upper + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn width(&self) -> usize {
        self.lower + self.upper + 1
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.lower >= i && j <= i + self.upper && j < self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[i * self.width() + (j + self.lower - i)]
        } else {
            0.0
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let w = self.width();
        self.data[i * w + (j + self.lower - i)] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let w = self.width();
        self.data[i * w + (j + self.lower - i)] = v;
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.data
            .chunks(self.width())
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.lower);
                let hi = (i + self.upper).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// LU factorization without pivoting. Suitable for the diagonally
    /// dominant / SPD-like systems assembled by the stepper.
    pub fn factor(&self) -> Result<BandedLu> {
        let mut lu = self.clone();
        let (n, p, q) = (self.n, self.lower, self.upper);
        for k in 0..n {
            let pivot = lu.get(k, k);
            if pivot.abs() < 1e-300 || !pivot.is_finite() {
                return Err(FlowError::SolverFailure {
                    residual: f64::INFINITY,
                    tol: 0.0,
                });
            }
            for i in (k + 1)..=(k + p).min(n - 1) {
                let l = lu.get(i, k) / pivot;
                lu.set(i, k, l);
                for j in (k + 1)..=(k + q).min(n - 1) {
                    let v = lu.get(i, j) - l * lu.get(k, j);
                    lu.set(i, j, v);
                }
            }
        }
        Ok(BandedLu { lu })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    lu: BandedMatrix,
}

impl BandedLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = &self.lu;
        let n = m.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(m.lower);
            let s: f64 = (lo..i).map(|j| m.get(i, j) * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let hi = (i + m.upper).min(n - 1);
            let s: f64 = ((i + 1)..=hi).map(|j| m.get(i, j) * x[j]).sum();
            x[i] = (x[i] - s) / m.get(i, i);
        }
        x
    }
}

/// Solves `a x = b` with one refinement pass; returns the solution and the
/// normwise backward error `‖a x − b‖∞ / (‖a‖∞ ‖x‖∞ + ‖b‖∞)`.
pub fn solve_refined(a: &BandedMatrix, lu: &BandedLu, b: &[f64]) -> (Vec<f64>, f64) {
    let mut x = lu.solve(b);
    let r: Vec<f64> = a.mul_vec(&x).iter().zip(b).map(|(ax, b)| b - ax).collect();
    let dx = lu.solve(&r);
    for (xi, d) in x.iter_mut().zip(&dx) {
        *xi += d;
    }
    let res = a
        .mul_vec(&x)
        .iter()
        .zip(b)
        .map(|(ax, b)| (ax - b).abs())
        .fold(0.0, f64::max);
    let norm = |v: &[f64]| v.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let scale = a.norm_inf() * norm(&x) + norm(b);
    (x, if scale > 0.0 { res / scale } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pentadiagonal_solve_matches_dense_product() {
        let n = 40;
        let mut a = BandedMatrix::zeros(n, 2, 2);
        for i in 0..n {
            a.set(i, i, 10.0 + i as f64 * 0.1);
            if i >= 1 {
                a.set(i, i - 1, -2.0);
            }
            if i >= 2 {
                a.set(i, i - 2, 0.5);
            }
            if i + 1 < n {
                a.set(i, i + 1, -3.0);
            }
            if i + 2 < n {
                a.set(i, i + 2, 1.0);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&x_true);
        let lu = a.factor().unwrap();
        let (x, res) = solve_refined(&a, &lu, &b);
        assert!(res < 1e-14);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}
