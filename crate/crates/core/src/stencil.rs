//! Finite-difference weights.

/// Weights for the `order`-th derivative at `x0` from samples at `xs`
/// (Fornberg's recursion). Exact for polynomials of degree `< xs.len()`.
pub fn fornberg_weights(x0: f64, xs: &[f64], order: usize) -> Vec<f64> {
    let n = xs.len();
    assert!(n > order, "need more points than the derivative order");
    let m = order;
    // c[j][k]: weight of xs[j] for derivative k
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Second-order centered weights on a unit grid for offsets `-2..=2`.
pub fn centered_unit(order: usize) -> [f64; 5] {
    match order {
        1 => [0.0, -0.5, 0.0, 0.5, 0.0],
        2 => [0.0, 1.0, -2.0, 1.0, 0.0],
        3 => [-0.5, 1.0, 0.0, -1.0, 0.5],
        4 => [1.0, -4.0, 6.0, -4.0, 1.0],
        _ => panic!("centered stencil only defined for orders 1..=4, got {order}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_centered_stencils() {
        let xs = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let w4 = fornberg_weights(0.0, &xs, 4);
        for (a, b) in w4.iter().zip(centered_unit(4)) {
            assert!((a - b).abs() < 1e-12);
        }
        let w2 = fornberg_weights(0.0, &xs[1..4], 2);
        assert!((w2[0] - 1.0).abs() < 1e-12 && (w2[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn one_sided_weights_exact_on_polynomials() {
        let xs: Vec<f64> = (1..=6).map(|i| i as f64 * 0.1).collect();
        let w = fornberg_weights(0.0, &xs, 4);
        // d⁴/dx⁴ of x^5 at 0 is 0, of x^4 is 24
        let d4: f64 = w.iter().zip(&xs).map(|(w, x)| w * x.powi(4)).sum();
        let d5: f64 = w.iter().zip(&xs).map(|(w, x)| w * x.powi(5)).sum();
        assert!((d4 - 24.0).abs() < 1e-6, "{d4}");
        assert!(d5.abs() < 1e-6, "{d5}");
    }
}
