//! Central finite differences, used as an independent check on analytic
//! derivatives.

use nalgebra::DMatrix;

#[inline]
fn step(xi: f64) -> f64 {
    (1e-5 * xi.abs()).max(1e-5)
}

pub fn fd_gradient<F: Fn(&[f64]) -> f64>(value: F, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = step(x[i]);
            y[i] = x[i] + h;
            let fp = value(&y);
            y[i] = x[i] - h;
            let fm = value(&y);
            y[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Second differences of `value`; mixed partials from the four-point
/// stencil.
pub fn fd_hessian<F: Fn(&[f64]) -> f64>(value: F, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut out = DMatrix::zeros(n, n);
    let mut y = x.to_vec();
    let f0 = value(x);
    for i in 0..n {
        let hi = step(x[i]);
        y[i] = x[i] + hi;
        let fp = value(&y);
        y[i] = x[i] - hi;
        let fm = value(&y);
        y[i] = x[i];
        out[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in 0..i {
            let hj = step(x[j]);
            let mut corner = |si: f64, sj: f64| {
                y[i] = x[i] + si * hi;
                y[j] = x[j] + sj * hj;
                let v = value(&y);
                y[i] = x[i];
                y[j] = x[j];
                v
            };
            let d = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * hi * hj);
            out[(i, j)] = d;
            out[(j, i)] = d;
        }
    }
    out
}

/// Jacobian of a vector map, `out[(i, j)] = ∂map_i/∂x_j`.
pub fn fd_jacobian<F: Fn(&[f64]) -> Vec<f64>>(map: F, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let m = map(x).len();
    let mut out = DMatrix::zeros(m, n);
    let mut y = x.to_vec();
    for j in 0..n {
        let h = step(x[j]);
        y[j] = x[j] + h;
        let fp = map(&y);
        y[j] = x[j] - h;
        let fm = map(&y);
        y[j] = x[j];
        for i in 0..m {
            out[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    out
}
