//! Oracles shared with the acceptance suite.

/// Golub-Welsch nodes and weights for the standard normal law.
pub fn golub_welsch(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = nalgebra::DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jac[(k, k - 1)] = b;
        jac[(k - 1, k)] = b;
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Backward dynamic programming for `dX = (-λX + F_u) dt + dW` with running
/// cost `h_u` (controls `F = ±1` at costs 0.2 and 0.5, terminal data `cos(u x)`):
/// exact one-step Gaussian transition of the linear part, piecewise-constant
/// controls, linear interpolation on a dense state grid.
pub fn dp_oracle(
    lam: f64,
    horizon: f64,
    steps: usize,
    u_dir: f64,
    query: &[f64],
    query_times: &[f64],
) -> Vec<Vec<f64>> {
    let (drifts, costs) = ([1.0, -1.0], [0.2, 0.5]);
    let (gx, gw) = golub_welsch(24);
    let (lo, hi, nx) = (-3.0, 3.0, 3001);
    let dx = (hi - lo) / (nx - 1) as f64;
    let xs: Vec<f64> = (0..nx).map(|k| lo + k as f64 * dx).collect();
    let interp = |v: &[f64], y: f64| {
        let u = ((y - lo) / dx).clamp(0.0, (nx - 1) as f64);
        let k = (u.floor() as usize).min(nx - 2);
        let f = u - k as f64;
        v[k] * (1.0 - f) + v[k + 1] * f
    };
    let dt = horizon / steps as f64;
    let decay = (-lam * dt).exp();
    let std = ((1.0 - (-2.0 * lam * dt).exp()) / (2.0 * lam)).sqrt();
    let mut v: Vec<f64> = xs.iter().map(|x| (u_dir * x).cos()).collect();
    let mut out = vec![Vec::new(); query_times.len()];
    let record = |v: &[f64], t: f64, out: &mut Vec<Vec<f64>>| {
        for (q, &qt) in query_times.iter().enumerate() {
            if (qt - t).abs() < 1e-9 {
                out[q] = query.iter().map(|&x| interp(v, x)).collect();
            }
        }
    };
    record(&v, horizon, &mut out);
    for step in (0..steps).rev() {
        let next: Vec<f64> = xs
            .iter()
            .map(|&x| {
                (0..2)
                    .map(|u| {
                        let mean = decay * x + (1.0 - decay) / lam * drifts[u];
                        let e: f64 = gx
                            .iter()
                            .zip(&gw)
                            .map(|(z, w)| w * interp(&v, mean + std * z))
                            .sum();
                        costs[u] * dt + e
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        v = next;
        record(&v, step as f64 * dt, &mut out);
    }
    out
}
