use std::sync::Arc;

use nalgebra::{Matrix2x3, Vector2, Vector3};

use super::{g_matrix, DiffusionDesign, SystemParams};
use crate::error::{Error, Result};
use crate::lyapunov::{generator, sontag_gain, v2_gradient, v2_hessian, BrockettClf};
use crate::sde::{Convention, SdeSystem};

/// Everything the randomization produces at one state, before the Sontag
/// feedback is added.
#[derive(Debug, Clone, PartialEq)]
pub struct Randomization {
    pub b: Vector2<f64>,
    pub jac_b: Matrix2x3<f64>,
    /// `σ = g B`.
    pub sigma: Vector3<f64>,
    /// Pre-feedback `v(x)`.
    pub v: Vector2<f64>,
    /// Wong–Zakai correction `½(∂σ/∂x)σ`.
    pub correction: Vector3<f64>,
    /// Ito drift `g v + ½(∂σ/∂x)σ`.
    pub drift: Vector3<f64>,
}

impl Randomization {
    pub fn at(p: &SystemParams, d: &DiffusionDesign, x: &Vector3<f64>) -> Self {
        let (b1, b2, b3, b4) = (p.b1(), p.b2(), p.b3(), p.b4());
        let g31 = b3 * x.y;
        let g32 = -b4 * x.x;
        let b = d.coefficients(p, x);
        let jac_b = d.jacobian(p, x);
        let sigma = Vector3::new(b1 * b.x, b2 * b.y, g31 * b.x + g32 * b.y);

        // (∂σ/∂x)σ = (∂g/∂x · B)σ + g (∂B/∂x)σ; only row 3 of g depends on x.
        let s1 = jac_b[(0, 0)] * sigma.x + jac_b[(0, 1)] * sigma.y + jac_b[(0, 2)] * sigma.z;
        let s2 = jac_b[(1, 0)] * sigma.x + jac_b[(1, 1)] * sigma.y + jac_b[(1, 2)] * sigma.z;
        let a3 = (-b4 * b.y) * sigma.x + (b3 * b.x) * sigma.y;
        let jss = Vector3::new(b1 * s1, b2 * s2, a3 + (g31 * s1 + g32 * s2));

        let correction = 0.5 * jss;
        let v = Vector2::new(-jss.x / (2.0 * b1), -jss.y / (2.0 * b2));
        let drift = Vector3::new(
            b1 * v.x + correction.x,
            b2 * v.y + correction.y,
            (g31 * v.x + g32 * v.y) + correction.z,
        );
        Randomization {
            b,
            jac_b,
            sigma,
            v,
            correction,
            drift,
        }
    }
}

/// `σ(x) = g(x) B(x)`.
pub fn sigma(p: &SystemParams, d: &DiffusionDesign, x: &Vector3<f64>) -> Vector3<f64> {
    g_matrix(p, x) * d.coefficients(p, x)
}

/// `v = (−(∂σ₁/∂x)σ / 2b₁, −(∂σ₂/∂x)σ / 2b₂)`, cancelling the first two
/// components of the Wong–Zakai correction.
pub fn prefeedback_v(p: &SystemParams, d: &DiffusionDesign, x: &Vector3<f64>) -> Vector2<f64> {
    Randomization::at(p, d, x).v
}

/// Ito drift of the randomized, pre-feedback-closed system (no Sontag
/// term). Analytically `(0, 0, −½(b₁b₄ − b₂b₃)B₁B₂)`.
pub fn randomized_drift(p: &SystemParams, d: &DiffusionDesign, x: &Vector3<f64>) -> Vector3<f64> {
    Randomization::at(p, d, x).drift
}

/// Full closed-loop evaluation at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopEval {
    pub randomization: Randomization,
    pub grad_v: Vector3<f64>,
    /// `L_gV₂`.
    pub lg_v: Vector2<f64>,
    /// `F = L_fV₂ + ½σᵀ(∇²V₂)σ` of the uncontrolled randomized system.
    pub f_term: f64,
    /// `G = |L_gV₂|²`.
    pub g_term: f64,
    pub control: Vector2<f64>,
    /// `f + g u` with the Sontag control.
    pub drift: Vector3<f64>,
    /// `(𝓛V₂)(x)` of the closed loop.
    pub generator: f64,
}

/// Randomized Brockett integrator under Sontag feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    params: SystemParams,
    design: DiffusionDesign,
}

impl ClosedLoop {
    /// Fails unless `B(0) = 0` holds exactly.
    pub fn new(params: SystemParams, design: DiffusionDesign) -> Result<Self> {
        let b0 = design.coefficients(&params, &Vector3::zeros());
        if b0 != Vector2::zeros() {
            return Err(Error::InvalidDesign {
                condition: "brockett6".into(),
                detail: format!("B(0) = ({}, {}) must vanish", b0.x, b0.y),
            });
        }
        Ok(ClosedLoop { params, design })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn design(&self) -> &DiffusionDesign {
        &self.design
    }

    pub fn sigma(&self, x: &Vector3<f64>) -> Vector3<f64> {
        sigma(&self.params, &self.design, x)
    }

    pub fn eval(&self, x: &Vector3<f64>) -> LoopEval {
        let r = Randomization::at(&self.params, &self.design, x);
        let grad = v2_gradient(x);
        let hess = v2_hessian(x);
        let g = g_matrix(&self.params, x);
        let lg_v = g.transpose() * grad;
        let f_term = grad.dot(&r.drift) + 0.5 * r.sigma.dot(&(hess * r.sigma));
        let g_term = lg_v.norm_squared();
        let control = -sontag_gain(f_term, g_term) * lg_v;
        let drift = r.drift + g * control;
        let generator = f_term + lg_v.dot(&control);
        LoopEval {
            randomization: r,
            grad_v: grad,
            lg_v,
            f_term,
            g_term,
            control,
            drift,
            generator,
        }
    }

    /// Sontag control `u_s(x)`.
    pub fn control(&self, x: &Vector3<f64>) -> Vector2<f64> {
        self.eval(x).control
    }

    pub fn drift(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.eval(x).drift
    }

    /// `(𝓛V₂)(x)` recomputed from the closed-loop drift and diffusion
    /// through the generic generator.
    pub fn generator_v2(&self, x: &Vector3<f64>) -> f64 {
        let e = self.eval(x);
        generator(
            &BrockettClf,
            x.as_slice(),
            e.drift.as_slice(),
            e.randomization.sigma.as_slice(),
            None,
        )
        .value(&[])
    }

    /// The closed loop as an Ito system for the integrators.
    pub fn to_sde(&self) -> SdeSystem {
        let a = Arc::new(self.clone());
        let b = a.clone();
        SdeSystem::new(
            3,
            move |x, out| out.copy_from_slice(a.drift(&Vector3::new(x[0], x[1], x[2])).as_slice()),
            move |x, out| out.copy_from_slice(b.sigma(&Vector3::new(x[0], x[1], x[2])).as_slice()),
            Convention::Ito,
        )
        .expect("dimension is 3")
    }
}

pub fn closed_loop(p: SystemParams, d: DiffusionDesign) -> Result<ClosedLoop> {
    ClosedLoop::new(p, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::fd::fd_jacobian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, half: f64, seed: u64) -> Vec<Vector3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-half..half),
                    rng.random_range(-half..half),
                    rng.random_range(-half..half),
                )
            })
            .collect()
    }

    #[test]
    fn sigma_values() {
        let p = SystemParams::reference();
        let d = DiffusionDesign::eigen_scaled(1.0, 1.0).unwrap();
        assert_eq!(sigma(&p, &d, &Vector3::zeros()), Vector3::zeros());
        assert_eq!(sigma(&p, &d, &Vector3::new(0.0, 0.0, 1.0)), Vector3::new(4.0, 4.0, 0.0));
        let x = Vector3::new(0.3, -0.4, 0.9);
        let b = d.coefficients(&p, &x);
        let s = sigma(&p, &d, &x);
        assert!((s.z - (4.0 * x.y * b.x - 4.0 * x.x * b.y)).abs() < 1e-12 * (1.0 + s.z.abs()));
    }

    #[test]
    fn prefeedback_zero_at_origin_and_for_constant_b() {
        let p = SystemParams::reference();
        assert_eq!(prefeedback_v(&p, &DiffusionDesign::reference(), &Vector3::zeros()), Vector2::zeros());
        let c = DiffusionDesign::constant(0.5, 0.0).unwrap();
        let v = prefeedback_v(&p, &c, &Vector3::new(0.2, 0.1, 0.3));
        assert_eq!(v.x, 0.0);
    }

    #[test]
    fn drift_matches_closed_form_for_reference_params() {
        let p = SystemParams::reference();
        let d = DiffusionDesign::reference();
        assert_eq!(randomized_drift(&p, &d, &Vector3::zeros()), Vector3::zeros());
        for x in random_points(2000, 3.0, 1) {
            let f = randomized_drift(&p, &d, &x);
            assert_eq!(f, Vector3::zeros(), "at {x:?}");
        }
    }

    #[test]
    fn drift_matches_closed_form_for_generic_params() {
        // third component ½(b₂b₃ − b₁b₄)B₁B₂, checked independently by a
        // black-box finite-difference Jacobian of σ
        let p = SystemParams::new(1.0, 1.0, 1.0, 0.0).unwrap();
        let d = DiffusionDesign::eigen_scaled(0.5, 0.8).unwrap();
        for x in random_points(200, 1.5, 2) {
            let r = Randomization::at(&p, &d, &x);
            let closed = -0.5 * p.twist() * r.b.x * r.b.y;
            let scale = 1.0 + r.sigma.norm_squared();
            assert!((r.drift.z - closed).abs() < 1e-10 * scale);
            assert!(r.drift.x.abs() < 1e-12 * scale && r.drift.y.abs() < 1e-12 * scale);

            let xs = [x.x, x.y, x.z];
            let js = fd_jacobian(|y: &[f64]| sigma(&p, &d, &Vector3::from_column_slice(y)).as_slice().to_vec(), &xs);
            let jss = [0, 1, 2].map(|i| (0..3).map(|j| js[(i, j)] * r.sigma[j]).sum::<f64>());
            let v = [-jss[0] / (2.0 * p.b1()), -jss[1] / (2.0 * p.b2())];
            let fd_drift3 = p.b3() * x.y * v[0] - p.b4() * x.x * v[1] + 0.5 * jss[2];
            assert!((fd_drift3 - r.drift.z).abs() < 1e-6 * scale, "{fd_drift3} vs {}", r.drift.z);
        }
    }

    #[test]
    fn prefeedback_cancels_planar_correction() {
        let p = SystemParams::new(2.0, -1.5, 0.5, 3.0).unwrap();
        let d = DiffusionDesign::eigen_scaled(0.1, 0.2).unwrap();
        for x in random_points(500, 2.0, 3) {
            let r = Randomization::at(&p, &d, &x);
            let g = g_matrix(&p, &x);
            let gv = g * r.v;
            let scale = 1.0 + r.correction.norm();
            assert!((gv.x + r.correction.x).abs() < 1e-8 * scale);
            assert!((gv.y + r.correction.y).abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn equilibrium_preserved() {
        let cl = ClosedLoop::new(SystemParams::reference(), DiffusionDesign::reference()).unwrap();
        let e = cl.eval(&Vector3::zeros());
        assert_eq!(e.drift, Vector3::zeros());
        assert_eq!(e.randomization.sigma, Vector3::zeros());
        assert_eq!(e.control, Vector2::zeros());
    }

    #[test]
    fn axis_has_no_control_and_negative_generator() {
        let cl = ClosedLoop::new(SystemParams::reference(), DiffusionDesign::reference()).unwrap();
        for c in [-2.0, -0.5, 0.5, 1.0, 2.0] {
            let x = Vector3::new(0.0, 0.0, c);
            let e = cl.eval(&x);
            assert_eq!(e.g_term, 0.0);
            assert_eq!(e.control, Vector2::zeros());
            let h = super::super::h_matrix(cl.params(), &x);
            let b = e.randomization.b;
            let expect = 0.5 * b.dot(&(h * b));
            assert!(expect < 0.0);
            assert!((e.generator - expect).abs() < 1e-12 * expect.abs());
            assert!((cl.generator_v2(&x) - expect).abs() < 1e-12 * expect.abs());
        }
    }

    #[test]
    fn off_axis_generator_is_sontag_value() {
        let cl = ClosedLoop::new(SystemParams::reference(), DiffusionDesign::reference()).unwrap();
        for x in random_points(500, 2.0, 4) {
            let e = cl.eval(&x);
            let target = -e.f_term.hypot(e.g_term);
            assert!(target < 0.0);
            assert!((e.generator - target).abs() <= 1e-9 * target.abs());
            let generic = cl.generator_v2(&x);
            assert!((generic - target).abs() <= 1e-8 * target.abs(), "{generic} vs {target}");
        }
    }

    #[test]
    fn constant_b_rejected_by_constructor() {
        let err = ClosedLoop::new(SystemParams::reference(), DiffusionDesign::constant(1.0, 0.0).unwrap()).unwrap_err();
        assert!(err.to_string().contains("brockett6"));
        assert!(ClosedLoop::new(SystemParams::reference(), DiffusionDesign::constant(0.0, 0.0).unwrap()).is_ok());
    }

    #[test]
    fn small_control_near_origin() {
        let cl = ClosedLoop::new(SystemParams::reference(), DiffusionDesign::reference()).unwrap();
        let dirs = random_points(1000, 1.0, 5);
        let mut prev = f64::INFINITY;
        for r in [1e-1, 1e-2, 1e-3] {
            let m = dirs
                .iter()
                .map(|d| cl.control(&(d / d.norm() * r)).norm())
                .fold(0.0, f64::max);
            assert!(m < prev);
            prev = m;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn sde_view_matches_eval() {
        let cl = ClosedLoop::new(SystemParams::reference(), DiffusionDesign::reference()).unwrap();
        let sys = cl.to_sde();
        let x = Vector3::new(0.2, -0.1, 0.7);
        let e = cl.eval(&x);
        assert_eq!(sys.drift_vec(x.as_slice()), e.drift.as_slice().to_vec());
        assert_eq!(sys.diffusion_vec(x.as_slice()), e.randomization.sigma.as_slice().to_vec());
    }
}
