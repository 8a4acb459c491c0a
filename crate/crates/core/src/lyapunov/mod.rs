//! Lyapunov functions, infinitesimal generators and the Sontag-type
//! universal formula.

pub mod fd;
mod fields;

use nalgebra::{DMatrix, DVector};

pub use fields::{
    planar_sq, v1_gradient, v1_hessian, v1_value, v2_gradient, v2_hessian, v2_value,
    BrockettClf, NumericField, ScalarField, SquaredNorm, X_GUARD,
};

use crate::error::{Error, Result};

/// `G` below this is treated as exactly zero in the Sontag formula.
pub const G_ZERO: f64 = 1e-300;

/// The pieces of `(𝓛V)(x) = L_fV + L_gV·u + ½σᵀ(∇²V)σ` for an Ito system.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorBreakdown {
    pub lf_v: f64,
    pub lg_v: Vec<f64>,
    pub trace_term: f64,
}

impl GeneratorBreakdown {
    /// Generator value with control `u` (zero-length `u` means no control).
    pub fn value(&self, u: &[f64]) -> f64 {
        let control: f64 = self.lg_v.iter().zip(u).map(|(a, b)| a * b).sum();
        self.lf_v + control + self.trace_term
    }

    /// `F = L_fV + ½σᵀ(∇²V)σ`, the generator at `u = 0`.
    pub fn uncontrolled(&self) -> f64 {
        self.lf_v + self.trace_term
    }

    /// `G = L_gV · L_gVᵀ`.
    pub fn lg_norm_sq(&self) -> f64 {
        self.lg_v.iter().map(|v| v * v).sum()
    }
}

/// Evaluate the generator of `field` at `x` for an Ito system with drift
/// `f(x)`, diffusion `σ(x)` and optional control matrix `g(x)` (`n × m`).
pub fn generator(
    field: &dyn ScalarField,
    x: &[f64],
    drift: &[f64],
    diffusion: &[f64],
    control: Option<&DMatrix<f64>>,
) -> GeneratorBreakdown {
    let grad = field.gradient(x);
    let hess = field.hessian(x);
    let f = DVector::from_column_slice(drift);
    let s = DVector::from_column_slice(diffusion);
    let lf_v = grad.dot(&f);
    let trace_term = 0.5 * s.dot(&(&hess * &s));
    let lg_v = control
        .map(|g| (grad.transpose() * g).iter().copied().collect())
        .unwrap_or_default();
    GeneratorBreakdown {
        lf_v,
        lg_v,
        trace_term,
    }
}

/// Scalar gain `(F + √(F² + G²)) / G`, or 0 when `G` is zero.
///
/// For `F < 0` the numerator is rewritten as `G² / (√(F²+G²) − F)` so
/// that no cancellation occurs.
pub fn sontag_gain(f: f64, g: f64) -> f64 {
    if g.abs() < G_ZERO {
        return 0.0;
    }
    let r = f.hypot(g);
    if f > 0.0 {
        (f + r) / g
    } else {
        g / (r - f)
    }
}

/// `u = −((F + √(F²+G²)) / G) · L_gVᵀ`, and `u = 0` when `G = 0`.
///
/// `G` must equal `|L_gV|²` to 1e-12 relative.
pub fn sontag_control(f: f64, g: f64, lg_v: &[f64]) -> Result<Vec<f64>> {
    let norm_sq: f64 = lg_v.iter().map(|v| v * v).sum();
    let scale = g.abs().max(norm_sq);
    if g < 0.0 || (g - norm_sq).abs() > 1e-12 * scale {
        return Err(Error::invalid(format!(
            "G = {g} is inconsistent with |L_gV|^2 = {norm_sq}"
        )));
    }
    let k = sontag_gain(f, g);
    Ok(lg_v.iter().map(|v| -k * v).collect())
}
