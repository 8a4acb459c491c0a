//! Candidate Lyapunov functions for the Brockett integrator.
//!
//! `V₁ = |x|²` fails to be a control Lyapunov function because `L_gV₁`
//! vanishes on the axis `M = {x₁ = x₂ = 0}`. `V₂` is built to be concave
//! in the `(x₁, x₂)` directions on `M`, so noise along `g` lowers it:
//!
//! ```text
//! V₂(x) = 2x₃² − ½X(1 + x₃²) + 2 (X/2)^(1 + x₃²/2),   X = x₁² + x₂²
//! ```
//!
//! Internally everything is written in terms of `X`, `z = x₃`, `Y = X/2`
//! and `p = 1 + z²/2`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

/// Below this `X` counts as zero; every `X^q·log X` style term is replaced
/// by its limit.
pub const X_GUARD: f64 = 1e-300;

/// A twice-differentiable scalar function with derivative evaluators.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> DVector<f64>;
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;

    /// Whether the gradient/Hessian are closed-form rather than numerical.
    fn analytic(&self) -> bool {
        true
    }
}

#[inline]
fn sq_planar(x: &Vector3<f64>) -> f64 {
    x.x * x.x + x.y * x.y
}

/// `X(x) = x₁² + x₂²`.
pub fn planar_sq(x: &Vector3<f64>) -> f64 {
    sq_planar(x)
}

pub fn v1_value(x: &Vector3<f64>) -> f64 {
    x.norm_squared()
}

pub fn v1_gradient(x: &Vector3<f64>) -> Vector3<f64> {
    2.0 * x
}

pub fn v1_hessian(_x: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::identity() * 2.0
}

pub fn v2_value(x: &Vector3<f64>) -> f64 {
    let z2 = x.z * x.z;
    let big_x = sq_planar(x);
    let tail = if big_x < X_GUARD {
        0.0
    } else {
        2.0 * (0.5 * big_x).powf(1.0 + 0.5 * z2)
    };
    2.0 * z2 - 0.5 * big_x * (1.0 + z2) + tail
}

pub fn v2_gradient(x: &Vector3<f64>) -> Vector3<f64> {
    let z = x.z;
    let z2 = z * z;
    let big_x = sq_planar(x);
    let p = 1.0 + 0.5 * z2;
    let (y_q, y_p_log) = if big_x < X_GUARD {
        // Y^(z²/2) → 0 for z ≠ 0; the z = 0 case is 0⁰ = 1.
        (if z2 == 0.0 { 1.0 } else { 0.0 }, 0.0)
    } else {
        let y = 0.5 * big_x;
        (y.powf(0.5 * z2), y.powf(p) * y.ln())
    };
    let v_x = -0.5 * (1.0 + z2) + p * y_q;
    let v_z = z * (4.0 - big_x + 2.0 * y_p_log);
    Vector3::new(2.0 * v_x * x.x, 2.0 * v_x * x.y, v_z)
}

/// Analytic Hessian of `V₂`.
///
/// On `M` (where `X` underflows the guard) this returns the limit taken
/// along `M`, `diag(−(1+x₃²), −(1+x₃²), 4)`, including at the origin.
pub fn v2_hessian(x: &Vector3<f64>) -> Matrix3<f64> {
    let z = x.z;
    let z2 = z * z;
    let big_x = sq_planar(x);
    let p = 1.0 + 0.5 * z2;
    if big_x < X_GUARD {
        let a = -(1.0 + z2);
        return Matrix3::from_diagonal(&Vector3::new(a, a, 4.0 - big_x));
    }
    let y = 0.5 * big_x;
    let ln_y = y.ln();
    let y_q = y.powf(0.5 * z2);
    let y_p = y * y_q;
    let v_x = -0.5 * (1.0 + z2) + p * y_q;
    // 4 x_i x_j V_XX = 4p(p−1) Y^(p−1) · x_i x_j / X
    let curv = 4.0 * p * (p - 1.0) * y_q / big_x;
    let v_xz = z * (y_q - 1.0 + p * y_q * ln_y);
    let v_zz = 4.0 - big_x + 2.0 * y_p * ln_y + 2.0 * z2 * y_p * ln_y * ln_y;

    let (a, b) = (x.x, x.y);
    let h00 = 2.0 * v_x + curv * a * a;
    let h11 = 2.0 * v_x + curv * b * b;
    let h01 = curv * a * b;
    let h02 = 2.0 * a * v_xz;
    let h12 = 2.0 * b * v_xz;
    Matrix3::new(h00, h01, h02, h01, h11, h12, h02, h12, v_zz)
}

pub(crate) fn to_v3(x: &[f64]) -> Vector3<f64> {
    assert_eq!(x.len(), 3, "expected a 3-dimensional state");
    Vector3::new(x[0], x[1], x[2])
}

/// `V₁(x) = |x|²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredNorm;

impl ScalarField for SquaredNorm {
    fn dim(&self) -> usize {
        3
    }
    fn value(&self, x: &[f64]) -> f64 {
        v1_value(&to_v3(x))
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v1_gradient(&to_v3(x)).as_slice())
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(3, 3, v1_hessian(&to_v3(x)).as_slice())
    }
}

/// The stochastic control Lyapunov function `V₂`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BrockettClf;

impl ScalarField for BrockettClf {
    fn dim(&self) -> usize {
        3
    }
    fn value(&self, x: &[f64]) -> f64 {
        v2_value(&to_v3(x))
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v2_gradient(&to_v3(x)).as_slice())
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(3, 3, v2_hessian(&to_v3(x)).as_slice())
    }
}

/// A field known only through its values; derivatives by central
/// differences.
pub struct NumericField<F> {
    dim: usize,
    value: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> NumericField<F> {
    pub fn new(dim: usize, value: F) -> Self {
        NumericField { dim, value }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> ScalarField for NumericField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_vec(super::fd::fd_gradient(&self.value, x))
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        super::fd::fd_hessian(&self.value, x)
    }
    fn analytic(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::fd::{fd_gradient, fd_jacobian};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v3(a: f64, b: f64, c: f64) -> Vector3<f64> {
        Vector3::new(a, b, c)
    }

    #[test]
    fn v2_hand_values() {
        assert_eq!(v2_value(&v3(0.0, 0.0, 0.0)), 0.0);
        assert!((v2_value(&v3(2f64.sqrt(), 0.0, 0.0)) - 1.0).abs() < 1e-15);
        assert_eq!(v2_value(&v3(0.0, 0.0, 1.0)), 2.0);
    }

    #[test]
    fn v1_values() {
        assert_eq!(v1_value(&v3(0.0, 0.0, 0.0)), 0.0);
        assert_eq!(v1_value(&v3(1.0, 2.0, 3.0)), 14.0);
        assert_eq!(v1_gradient(&v3(1.0, 2.0, 3.0)), v3(2.0, 4.0, 6.0));
        assert_eq!(v1_hessian(&v3(1.0, 2.0, 3.0)), Matrix3::identity() * 2.0);
    }

    #[test]
    fn v2_gradient_at_origin_and_on_axis() {
        assert_eq!(v2_gradient(&v3(0.0, 0.0, 0.0)), Vector3::zeros());
        for c in [-3.0, -0.4, 0.0, 1.0, 2.5] {
            let g = v2_gradient(&v3(0.0, 0.0, c));
            assert_eq!(g.x, 0.0);
            assert_eq!(g.y, 0.0);
            assert!((g.z - 4.0 * c).abs() < 1e-14);
        }
    }

    #[test]
    fn v2_gradient_matches_fd_at_reference_point() {
        let x = [0.3, -0.7, 1.2];
        let analytic = v2_gradient(&to_v3(&x));
        let fd = fd_gradient(|y: &[f64]| v2_value(&to_v3(y)), &x);
        let err = (analytic - Vector3::from_column_slice(&fd)).norm() / analytic.norm();
        assert!(err < 1e-6, "rel err {err}");
    }

    #[test]
    fn v2_hessian_on_axis() {
        for c in [0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0] {
            let h = v2_hessian(&v3(0.0, 0.0, c));
            let a = -(1.0 + c * c);
            assert_eq!(h, Matrix3::from_diagonal(&v3(a, a, 4.0)));
        }
    }

    #[test]
    fn v2_hessian_matches_fd_of_gradient_off_axis() {
        let x = [0.5, 0.5, 1.0];
        let h = v2_hessian(&to_v3(&x));
        let fd = fd_jacobian(|y: &[f64]| v2_gradient(&to_v3(y)).as_slice().to_vec(), &x);
        let h_dyn = DMatrix::from_column_slice(3, 3, h.as_slice());
        let err = (&h_dyn - &fd).norm() / h_dyn.norm();
        assert!(err < 1e-5, "rel err {err}");
        assert!((h - h.transpose()).norm() == 0.0);
    }

    #[test]
    fn v2_positive_on_random_cloud() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100_000 {
            let x = v3(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            assert!(v2_value(&x) > 0.0, "V2 not positive at {x:?}");
        }
    }

    #[test]
    fn v2_sphere_minimum_grows_with_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let dirs: Vec<Vector3<f64>> = (0..20_000)
            .map(|_| {
                let d = v3(
                    rng.random::<f64>() - 0.5,
                    rng.random::<f64>() - 0.5,
                    rng.random::<f64>() - 0.5,
                );
                d / d.norm()
            })
            .collect();
        let mins: Vec<f64> = [1.0, 2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|r| dirs.iter().map(|d| v2_value(&(d * *r))).fold(f64::INFINITY, f64::min))
            .collect();
        for w in mins.windows(2) {
            assert!(w[1] >= w[0], "{mins:?}");
        }
    }

    proptest! {
        #[test]
        fn v2_depends_on_plane_only_through_radius(
            a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, th in 0.0f64..6.3
        ) {
            let (s, co) = th.sin_cos();
            let r = v3(co * a - s * b, s * a + co * b, c);
            let v0 = v2_value(&v3(a, b, c));
            let v1 = v2_value(&r);
            prop_assert!((v0 - v1).abs() <= 1e-12 * (1.0 + v0.abs()));
        }

        #[test]
        fn v2_hessian_is_symmetric(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0) {
            let h = v2_hessian(&v3(a, b, c));
            prop_assert!((h - h.transpose()).abs().max() <= 1e-12 * (1.0 + h.abs().max()));
        }
    }

    #[test]
    fn numeric_field_is_flagged() {
        let f = NumericField::new(2, |x: &[f64]| x[0] * x[1]);
        assert!(!f.analytic());
        assert!(BrockettClf.analytic());
        let g = f.gradient(&[1.0, 1.0]);
        assert!((g[0] - 1.0).abs() < 1e-8 && (g[1] - 1.0).abs() < 1e-8);
    }
}
