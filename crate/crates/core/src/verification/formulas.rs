//! Cross-checks of hand-derived closed forms against direct evaluation.

use nalgebra::Vector3;

use super::GridSpec;
use crate::brockett::{g_matrix, h_matrix, randomized_drift, DiffusionDesign, SystemParams};
use crate::lyapunov::{planar_sq, v2_gradient};

/// Points with `X` at or below this are skipped.
pub const X_MIN: f64 = 1e-3;

/// Closed-form `L_fV₂` with `f = (0, 0, −½(b₁b₄ − b₂b₃)B₁B₂)`:
/// `−2^(−1−x₃²/2) B₁B₂ (b₂b₃ − b₁b₄) {2^(x₃²/2)(X − 4) + X^(1+x₃²/2) log(2/X)} x₃`.
pub fn lfv2_closed_form(p: &SystemParams, d: &DiffusionDesign, x: &Vector3<f64>) -> f64 {
    let b = d.coefficients(p, x);
    let big_x = planar_sq(x);
    let z = x.z;
    let h = 0.5 * z * z;
    let brace = 2f64.powf(h) * (big_x - 4.0) + big_x.powf(1.0 + h) * (2.0 / big_x).ln();
    -(2f64.powf(-1.0 - h)) * b.x * b.y * (p.b2() * p.b3() - p.b1() * p.b4()) * brace * z
}

/// `G(x) = b₁²x₁² + b₂²x₂²` on `x₃ = 0`.
pub fn g_closed_form(p: &SystemParams, x: &Vector3<f64>) -> f64 {
    p.b1() * p.b1() * x.x * x.x + p.b2() * p.b2() * x.y * x.y
}

/// `BᵀHB` on `x₃ = 0`:
/// `b₁²B₁² + b₂²B₂² − (X log(2/X) + X − 4)(b₄B₂x₁ − b₃B₁x₂)²`.
pub fn bhb_closed_form(p: &SystemParams, d: &DiffusionDesign, x: &Vector3<f64>) -> f64 {
    let b = d.coefficients(p, x);
    let big_x = planar_sq(x);
    let c = p.b4() * b.y * x.x - p.b3() * b.x * x.y;
    p.b1() * p.b1() * b.x * b.x + p.b2() * p.b2() * b.y * b.y
        - big_x * c * c * (2.0 / big_x).ln()
        - (big_x - 4.0) * c * c
}

/// Largest discrepancy between two ways of computing one quantity, both
/// absolute and scaled as `|a − b| / (1 + |b|)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Discrepancy {
    pub abs: f64,
    pub scaled: f64,
}

impl Discrepancy {
    fn record(&mut self, got: f64, reference: f64) {
        let d = (got - reference).abs();
        if d.is_nan() {
            self.abs = f64::NAN;
            self.scaled = f64::NAN;
        } else if !self.abs.is_nan() {
            self.abs = self.abs.max(d);
            self.scaled = self.scaled.max(d / (1.0 + reference.abs()));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormulaReport {
    pub n_points: usize,
    /// Closed-form `L_fV₂` against `∇V₂·f`, `f` from the two-line drift
    /// formula.
    pub lf: Discrepancy,
    /// `∇V₂·randomized_drift` against `∇V₂·f`, i.e. whether the implemented
    /// drift matches the formula.
    pub lf_drift: Discrepancy,
    pub n_slice: usize,
    pub g: Discrepancy,
    pub bhb: Discrepancy,
}

impl FormulaReport {
    /// All scaled discrepancies below `tol`.
    pub fn agrees(&self, tol: f64) -> bool {
        [self.lf, self.lf_drift, self.g, self.bhb].iter().all(|d| d.scaled < tol)
    }
}

/// Compares the closed forms on the grid points with `X > 1e-3`; `G` and
/// `BᵀHB` only on those that also have `x₃ = 0`.
pub fn lfv2_formula_check(p: &SystemParams, d: &DiffusionDesign, grid: &GridSpec) -> FormulaReport {
    let mut r = FormulaReport {
        n_points: 0,
        lf: Discrepancy::default(),
        lf_drift: Discrepancy::default(),
        n_slice: 0,
        g: Discrepancy::default(),
        bhb: Discrepancy::default(),
    };
    for x in grid.points() {
        if planar_sq(&x) <= X_MIN {
            continue;
        }
        r.n_points += 1;
        let grad = v2_gradient(&x);
        let b = d.coefficients(p, &x);
        let f = Vector3::new(0.0, 0.0, -0.5 * p.twist() * b.x * b.y);
        let direct = grad.dot(&f);
        r.lf.record(lfv2_closed_form(p, d, &x), direct);
        let implemented = grad.dot(&randomized_drift(p, d, &x));
        r.lf_drift.record(implemented, direct);

        if x.z == 0.0 {
            r.n_slice += 1;
            let lg = g_matrix(p, &x).transpose() * grad;
            r.g.record(g_closed_form(p, &x), lg.norm_squared());
            let bhb = b.dot(&(h_matrix(p, &x) * b));
            r.bhb.record(bhb_closed_form(p, d, &x), bhb);
        }
    }
    r
}
