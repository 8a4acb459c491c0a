use nalgebra::{Matrix2x3, Vector2, Vector3};

use super::{eigs_sym2, h_matrix, SystemParams};
use crate::error::{Error, Result};

/// Diffusion coefficient `B(x) = (B₁(x), B₂(x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffusionDesign {
    /// `B₁ = k₁λ₁²|x|²`, `B₂ = k₂λ₂²|x|²x₃` with `λ₁ ≤ λ₂` the eigenvalues
    /// of `H(x)`. Gains of zero switch the noise off.
    EigenScaled { k1: f64, k2: f64 },
    /// `B ≡ (c₁, c₂)`. Not a valid stabilizing design unless both are zero;
    /// kept for negative controls.
    Constant { c1: f64, c2: f64 },
}

impl DiffusionDesign {
    pub fn eigen_scaled(k1: f64, k2: f64) -> Result<Self> {
        if !(k1.is_finite() && k2.is_finite()) || k1 < 0.0 || k2 < 0.0 {
            return Err(Error::invalid(format!(
                "design gains must be finite and non-negative, got k1={k1}, k2={k2}"
            )));
        }
        Ok(DiffusionDesign::EigenScaled { k1, k2 })
    }

    /// `k₁ = k₂ = 1e-4`.
    pub fn reference() -> Self {
        DiffusionDesign::EigenScaled { k1: 1e-4, k2: 1e-4 }
    }

    pub fn constant(c1: f64, c2: f64) -> Result<Self> {
        if !(c1.is_finite() && c2.is_finite()) {
            return Err(Error::invalid("constant diffusion must be finite"));
        }
        Ok(DiffusionDesign::Constant { c1, c2 })
    }

    pub fn describe(&self) -> String {
        match self {
            DiffusionDesign::EigenScaled { k1, k2 } => {
                format!("eigen(k1={k1:e}, k2={k2:e}, lambda_order=ascending)")
            }
            DiffusionDesign::Constant { c1, c2 } => format!("constant(c1={c1:e}, c2={c2:e})"),
        }
    }

    pub fn coefficients(&self, p: &SystemParams, x: &Vector3<f64>) -> Vector2<f64> {
        match *self {
            DiffusionDesign::EigenScaled { k1, k2 } => {
                let (l1, l2) = eigs_sym2(&h_matrix(p, x));
                let r2 = x.norm_squared();
                Vector2::new(k1 * l1 * l1 * r2, k2 * l2 * l2 * r2 * x.z)
            }
            DiffusionDesign::Constant { c1, c2 } => Vector2::new(c1, c2),
        }
    }

    /// `∂B/∂x` (rows `∇B₁`, `∇B₂`) by the product rule; only `∇λᵢ` is
    /// taken by central differences, with `h = max(1e-6, 1e-6|x_j|)`.
    pub fn jacobian(&self, p: &SystemParams, x: &Vector3<f64>) -> Matrix2x3<f64> {
        match *self {
            DiffusionDesign::EigenScaled { k1, k2 } => {
                let (l1, l2) = eigs_sym2(&h_matrix(p, x));
                let (dl1, dl2) = eigen_gradients(p, x);
                let r2 = x.norm_squared();
                let z = x.z;
                let grad_r2 = 2.0 * x;
                let gb1 = k1 * (2.0 * l1 * r2 * dl1 + l1 * l1 * grad_r2);
                let mut gb2 = k2 * (2.0 * l2 * r2 * z * dl2 + l2 * l2 * z * grad_r2);
                gb2.z += k2 * l2 * l2 * r2;
                Matrix2x3::from_rows(&[gb1.transpose(), gb2.transpose()])
            }
            DiffusionDesign::Constant { .. } => Matrix2x3::zeros(),
        }
    }
}

fn eigen_gradients(p: &SystemParams, x: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let mut d1 = Vector3::zeros();
    let mut d2 = Vector3::zeros();
    for j in 0..3 {
        let h = (1e-6 * x[j].abs()).max(1e-6);
        let mut xp = *x;
        let mut xm = *x;
        xp[j] += h;
        xm[j] -= h;
        let (a1, a2) = eigs_sym2(&h_matrix(p, &xp));
        let (b1, b2) = eigs_sym2(&h_matrix(p, &xm));
        d1[j] = (a1 - b1) / (2.0 * h);
        d2[j] = (a2 - b2) / (2.0 * h);
    }
    (d1, d2)
}

/// `(B₁(x), B₂(x))` for design `d`.
pub fn diffusion_b(d: &DiffusionDesign, p: &SystemParams, x: &Vector3<f64>) -> Vector2<f64> {
    d.coefficients(p, x)
}
