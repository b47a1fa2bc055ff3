//! Shared test oracles: a dense fixed-step RK4 integrator for real scalar
//! and small-vector ODEs, independent of every solver under test.

/// RK4 on `dy/dt = f(t, y)` with `steps` fixed steps; with 10^4 steps over a
/// unit interval the error is far below the tolerances asserted against it.
pub fn rk4_scalar(f: &dyn Fn(f64, f64) -> f64, t0: f64, y0: f64, t1: f64, steps: usize) -> f64 {
    let dt = (t1 - t0) / steps as f64;
    let (mut t, mut y) = (t0, y0);
    for _ in 0..steps {
        let k1 = f(t, y);
        let k2 = f(t + dt / 2.0, y + dt / 2.0 * k1);
        let k3 = f(t + dt / 2.0, y + dt / 2.0 * k2);
        let k4 = f(t + dt, y + dt * k3);
        y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += dt;
    }
    y
}

/// RK4 for vector-valued systems (used for complex-plane oracles).
#[allow(dead_code)]
pub fn rk4_vec(
    f: &dyn Fn(f64, &[f64]) -> Vec<f64>,
    t0: f64,
    y0: &[f64],
    t1: f64,
    steps: usize,
) -> Vec<f64> {
    let dt = (t1 - t0) / steps as f64;
    let mut t = t0;
    let mut y = y0.to_vec();
    let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + s * y).collect()
    };
    for _ in 0..steps {
        let k1 = f(t, &y);
        let k2 = f(t + dt / 2.0, &add(&y, &k1, dt / 2.0));
        let k3 = f(t + dt / 2.0, &add(&y, &k2, dt / 2.0));
        let k4 = f(t + dt, &add(&y, &k3, dt));
        for i in 0..y.len() {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += dt;
    }
    y
}
