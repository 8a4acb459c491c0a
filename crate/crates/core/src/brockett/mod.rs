//! The Brockett integrator `ẋ = g(x) u_c` with
//!
//! ```text
//!        ⎡ b₁     0    ⎤
//! g(x) = ⎢ 0      b₂   ⎥
//!        ⎣ b₃x₂  −b₄x₁ ⎦
//! ```
//!
//! randomized through `u_c dt = (u + v(x)) dt + B(x) ∘ dw` and closed with a
//! Sontag-type feedback built from `V₂`.

mod closed_loop;
mod conditions;
mod design;

use nalgebra::{Matrix2, Matrix3, Matrix3x2, Vector3};

pub use closed_loop::{
    closed_loop, prefeedback_v, randomized_drift, sigma, ClosedLoop, LoopEval, Randomization,
};
pub use conditions::{check_design_conditions, ConditionResult, DesignReport, LIMIT_RADII};
pub use design::{diffusion_b, DiffusionDesign};

use crate::error::{Error, Result};
use crate::lyapunov::v2_hessian;

/// Brockett coefficients `b₁..b₄`; requires `b₁ ≠ 0`, `b₂ ≠ 0` and
/// `b₁b₄ + b₂b₃ ≠ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    b1: f64,
    b2: f64,
    b3: f64,
    b4: f64,
}

impl SystemParams {
    pub fn new(b1: f64, b2: f64, b3: f64, b4: f64) -> Result<Self> {
        if [b1, b2, b3, b4].iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("system parameters must be finite"));
        }
        if b1 == 0.0 || b2 == 0.0 {
            return Err(Error::invalid("b1 and b2 must be nonzero"));
        }
        if b1 * b4 + b2 * b3 == 0.0 {
            return Err(Error::invalid(
                "b1*b4 + b2*b3 must be nonzero (bracket direction degenerates)",
            ));
        }
        Ok(SystemParams { b1, b2, b3, b4 })
    }

    /// `b = (1, 1, 4, 4)`, the simulated configuration.
    pub fn reference() -> Self {
        SystemParams {
            b1: 1.0,
            b2: 1.0,
            b3: 4.0,
            b4: 4.0,
        }
    }

    pub fn b1(&self) -> f64 {
        self.b1
    }
    pub fn b2(&self) -> f64 {
        self.b2
    }
    pub fn b3(&self) -> f64 {
        self.b3
    }
    pub fn b4(&self) -> f64 {
        self.b4
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.b1, self.b2, self.b3, self.b4]
    }

    /// `b₁b₄ − b₂b₃`, the factor multiplying `B₁B₂` in the Ito drift.
    pub fn twist(&self) -> f64 {
        self.b1 * self.b4 - self.b2 * self.b3
    }
}

pub fn g_matrix(p: &SystemParams, x: &Vector3<f64>) -> Matrix3x2<f64> {
    Matrix3x2::new(p.b1, 0.0, 0.0, p.b2, p.b3 * x.y, -p.b4 * x.x)
}

/// Columns `g₁, g₂, [g₁, g₂]` with `[g₁, g₂] = (∂g₂/∂x)g₁ − (∂g₁/∂x)g₂`.
pub fn bracket_matrix(p: &SystemParams, x: &Vector3<f64>) -> Matrix3<f64> {
    let g = g_matrix(p, x);
    let g1 = g.column(0).into_owned();
    let g2 = g.column(1).into_owned();
    let dg1 = Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, p.b3, 0.0);
    let dg2 = Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -p.b4, 0.0, 0.0);
    let bracket = dg2 * g1 - dg1 * g2;
    Matrix3::from_columns(&[g1, g2, bracket])
}

/// Numerical rank of the bracket matrix, singular values below
/// `1e-10·‖M‖` counting as zero.
pub fn controllability_rank(p: &SystemParams, x: &Vector3<f64>) -> usize {
    let m = bracket_matrix(p, x);
    let tol = 1e-10 * m.norm();
    m.singular_values().iter().filter(|s| **s > tol).count()
}

/// `H(x) = gᵀ (∇²V₂) g`.
pub fn h_matrix(p: &SystemParams, x: &Vector3<f64>) -> Matrix2<f64> {
    let g = g_matrix(p, x);
    let h = g.transpose() * v2_hessian(x) * g;
    // symmetrize away rounding in the triple product
    let off = 0.5 * (h[(0, 1)] + h[(1, 0)]);
    Matrix2::new(h[(0, 0)], off, off, h[(1, 1)])
}

/// Closed-form eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn eigs_sym2(h: &Matrix2<f64>) -> (f64, f64) {
    let mean = 0.5 * (h[(0, 0)] + h[(1, 1)]);
    let half_diff = 0.5 * (h[(0, 0)] - h[(1, 1)]);
    let r = half_diff.hypot(h[(0, 1)]);
    (mean - r, mean + r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_degenerate_params() {
        assert!(SystemParams::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(SystemParams::new(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(SystemParams::new(1.0, 1.0, 1.0, -1.0).is_err());
        assert!(SystemParams::new(1.0, 1.0, f64::NAN, 1.0).is_err());
        assert!(SystemParams::new(1.0, 1.0, 1.0, 0.0).is_ok());
    }

    #[test]
    fn g_matrix_values() {
        let p = SystemParams::new(2.0, 3.0, 4.0, 5.0).unwrap();
        let g = g_matrix(&p, &Vector3::zeros());
        assert_eq!(g, Matrix3x2::new(2.0, 0.0, 0.0, 3.0, 0.0, 0.0));
        let g = g_matrix(&SystemParams::reference(), &Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(g, Matrix3x2::new(1.0, 0.0, 0.0, 1.0, 8.0, -4.0));
        let top = g.fixed_view::<2, 2>(0, 0).determinant();
        assert_eq!(top, 1.0);
    }

    #[test]
    fn full_rank_everywhere() {
        let ones = SystemParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(controllability_rank(&ones, &Vector3::zeros()), 3);
        let p = SystemParams::reference();
        assert_eq!(controllability_rank(&p, &Vector3::new(10.0, -10.0, 5.0)), 3);
        let bm = bracket_matrix(&p, &Vector3::new(0.3, 0.2, 0.1));
        assert_eq!(bm[(2, 2)], -(p.b1() * p.b4() + p.b2() * p.b3()));
    }

    #[test]
    fn h_matrix_on_axis() {
        let p = SystemParams::reference();
        assert_eq!(h_matrix(&p, &Vector3::new(0.0, 0.0, 1.0)), Matrix2::new(-2.0, 0.0, 0.0, -2.0));
        assert_eq!(h_matrix(&p, &Vector3::zeros()), Matrix2::new(-1.0, 0.0, 0.0, -1.0));
        // b₁ ≠ 1: entries scale with b², not b
        let q = SystemParams::new(2.0, 3.0, 1.0, 1.0).unwrap();
        let h = h_matrix(&q, &Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(h, Matrix2::new(-8.0, 0.0, 0.0, -18.0));
    }

    #[test]
    fn h_matrix_symmetric() {
        let p = SystemParams::reference();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let x = Vector3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let h = h_matrix(&p, &x);
            assert!((h[(0, 1)] - h[(1, 0)]).abs() <= 1e-12 * (1.0 + h.abs().max()));
        }
    }

    #[test]
    fn eigenvalues() {
        assert_eq!(eigs_sym2(&Matrix2::new(-2.0, 0.0, 0.0, -2.0)), (-2.0, -2.0));
        assert_eq!(eigs_sym2(&Matrix2::new(0.0, 1.0, 1.0, 0.0)), (-1.0, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let (a, b, c) = (
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            let h = Matrix2::new(a, b, b, c);
            let (l1, l2) = eigs_sym2(&h);
            assert!(l1 <= l2);
            assert!((l1 + l2 - (a + c)).abs() < 1e-12 * (1.0 + (a + c).abs()));
            assert!((l1 * l2 - h.determinant()).abs() < 1e-12 * (1.0 + l1.abs() * l2.abs()));
        }
    }
}
