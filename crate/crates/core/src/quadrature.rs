//! Gauss–Legendre and Gauss–Hermite rules.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre rule on [a, b] with `elements` equal elements.
pub fn composite_gauss_legendre(
    nodes_per_element: usize,
    elements: usize,
    a: f64,
    b: f64,
) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(nodes_per_element);
    let h = (b - a) / elements as f64;
    let mut nodes = Vec::with_capacity(nodes_per_element * elements);
    let mut weights = Vec::with_capacity(nodes_per_element * elements);
    for e in 0..elements {
        let lo = a + e as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(lo + 0.5 * h * (xi + 1.0));
            weights.push(0.5 * h * wi);
        }
    }
    (nodes, weights)
}

/// Gauss–Hermite rule for the standard normal law N(0, 1).
///
/// Weights are renormalized to sum to one.
pub fn gauss_hermite_normal(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let (x, w) = gauss_hermite_physicists(n);
    let nodes: Vec<f64> = x.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
    let total: f64 = w.iter().sum();
    let weights = w.iter().map(|v| v / total).collect();
    (nodes, weights)
}

/// Nodes and weights for the weight function exp(-x^2), ascending nodes.
fn gauss_hermite_physicists(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let m = n.div_ceil(2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[n - 1],
            3 => 1.91 * z - 0.91 * nodes[n - 2],
            _ => 2.0 * z - nodes[n - i + 1],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let (p, d) = hermite_orthonormal(n, z, pim4);
            pp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = hermite_orthonormal(n, z, pim4);
        if d != 0.0 {
            pp = d;
        }
        nodes[n - 1 - i] = z;
        nodes[i] = -z;
        let w = 2.0 / (pp * pp);
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Orthonormal Hermite polynomial value and derivative at `z`.
fn hermite_orthonormal(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    let d = (2.0 * n as f64).sqrt() * p2;
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        for n in 1..=10 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let want = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!((got - want).abs() < 1e-14, "n={n} deg={deg} got={got}");
            }
        }
    }

    #[test]
    fn composite_rule_integrates_sine_products() {
        let (x, w) = composite_gauss_legendre(8, 12, 0.0, 1.0);
        for m in 1..=3 {
            for n in 1..=3 {
                let got: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(x, w)| w * 2.0 * (m as f64 * PI * x).sin() * (n as f64 * PI * x).sin())
                    .sum();
                let want = if m == n { 1.0 } else { 0.0 };
                assert!((got - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn hermite_moments_match_standard_normal() {
        for n in [1usize, 2, 5, 9, 12] {
            let (x, w) = gauss_hermite_normal(n);
            let total: f64 = w.iter().sum();
            assert!((total - 1.0).abs() < 1e-14);
            // E[xi^k] = (k-1)!! for even k, exact for k <= 2n-1
            let mut dfact = 1.0;
            for k in 0..(2 * n).min(16) {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let scale: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(x, w)| (w * x.powi(k as i32)).abs())
                    .sum();
                let want = if k % 2 == 1 {
                    0.0
                } else {
                    if k >= 2 {
                        dfact *= (k - 1) as f64;
                    }
                    dfact
                };
                assert!(
                    (got - want).abs() < 1e-13 * scale.max(1.0),
                    "n={n} k={k} got={got} want={want}"
                );
            }
        }
    }

    #[test]
    fn hermite_nodes_are_symmetric_and_sorted() {
        let (x, w) = gauss_hermite_normal(9);
        for i in 0..9 {
            assert!((x[i] + x[8 - i]).abs() < 1e-14);
            assert!((w[i] - w[8 - i]).abs() < 1e-16);
        }
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }
}
