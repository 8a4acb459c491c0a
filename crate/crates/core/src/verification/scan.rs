use std::io::{self, Write};

use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;

use super::GridSpec;
use crate::brockett::ClosedLoop;
use crate::lyapunov::{fd::fd_jacobian, ScalarField};
use crate::sde::fmt_f64;

/// `(x, (𝓛V)(x))` at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSample {
    pub x: Vector3<f64>,
    pub lv: f64,
}

fn on_m(x: &Vector3<f64>) -> bool {
    x.x == 0.0 && x.y == 0.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub grid: GridSpec,
    pub samples: Vec<ScanSample>,
    pub min_lv: f64,
    pub argmin: Vector3<f64>,
    /// Largest generator value, i.e. the worst case for negativity.
    pub max_lv: f64,
    pub argmax: Vector3<f64>,
    /// Points with `𝓛V ≥ 0`.
    pub violations: Vec<ScanSample>,
    pub m_count: usize,
    /// Largest generator value on `M` (NaN when no grid point lies on `M`).
    pub m_max_lv: f64,
    pub m_violations: usize,
}

impl ScanReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// True when every violation lies on `M` and every `M` point violates.
    pub fn violations_exactly_on_m(&self) -> bool {
        !self.violations.is_empty()
            && self.violations.iter().all(|s| on_m(&s.x))
            && self.m_violations == self.m_count
    }

    /// Rows `x1,x2,x3,LV` after `# ` comment lines.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "x1,x2,x3,LV")?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_f64(s.x.x),
                fmt_f64(s.x.y),
                fmt_f64(s.x.z),
                fmt_f64(s.lv)
            )?;
        }
        Ok(())
    }
}

/// Evaluates the closed-loop generator of `V₂` at every grid point.
/// Points are evaluated in parallel and kept in grid order.
pub fn scan_generator(cl: &ClosedLoop, grid: &GridSpec) -> ScanReport {
    let samples: Vec<ScanSample> = grid
        .points()
        .into_par_iter()
        .map(|x| ScanSample {
            x,
            lv: cl.generator_v2(&x),
        })
        .collect();

    let mut min_lv = f64::INFINITY;
    let mut max_lv = f64::NEG_INFINITY;
    let (mut argmin, mut argmax) = (Vector3::zeros(), Vector3::zeros());
    let mut violations = Vec::new();
    let (mut m_count, mut m_violations, mut m_max_lv) = (0, 0, f64::NAN);
    for s in &samples {
        if s.lv < min_lv {
            min_lv = s.lv;
            argmin = s.x;
        }
        // NaN counts as a violation: the sign is not established
        if !(s.lv < 0.0) {
            violations.push(*s);
        }
        if s.lv > max_lv || s.lv.is_nan() {
            max_lv = s.lv;
            argmax = s.x;
        }
        if on_m(&s.x) {
            m_count += 1;
            if !(s.lv < 0.0) {
                m_violations += 1;
            }
            if !(m_max_lv >= s.lv) {
                m_max_lv = s.lv;
            }
        }
    }
    ScanReport {
        grid: *grid,
        samples,
        min_lv,
        argmin,
        max_lv,
        argmax,
        violations,
        m_count,
        m_max_lv,
        m_violations,
    }
}

/// Threshold on `‖L_gV‖` selecting where the SCLF condition is tested.
pub const LGV_ZERO: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SclfReport {
    pub n_points: usize,
    /// Points with `‖L_gV‖ < 1e-6`.
    pub n_tested: usize,
    pub n_failed: usize,
    /// `max (L_fV + ½∇V·(∂σ/∂x)σ + ½σᵀ(∇²V)σ)` over tested points; must be
    /// negative for the condition to hold.
    pub max_margin: f64,
    pub argmax: Option<Vector3<f64>>,
    pub min_margin: f64,
}

impl SclfReport {
    pub fn vacuous(&self) -> bool {
        self.n_tested == 0
    }

    pub fn holds(&self) -> bool {
        !self.vacuous() && self.n_failed == 0
    }
}

/// Checks `½Bᵀgᵀ(∇²V)gB + ½∇V·(∂(gB)/∂x)(gB) < −L_fV` where `L_gV`
/// vanishes. `f`, `g` (3×m) and `b` (length m) describe the
/// pre-randomization system; `∂(gB)/∂x` is taken by central differences.
pub fn sclf_condition_check<F, G, B>(f: F, g: G, b: B, v: &dyn ScalarField, grid: &GridSpec) -> SclfReport
where
    F: Fn(&Vector3<f64>) -> Vector3<f64>,
    G: Fn(&Vector3<f64>) -> DMatrix<f64>,
    B: Fn(&Vector3<f64>) -> DVector<f64>,
{
    let sigma = |y: &[f64]| {
        let x = Vector3::new(y[0], y[1], y[2]);
        (g(&x) * b(&x)).as_slice().to_vec()
    };
    let pts = grid.points();
    let mut rep = SclfReport {
        n_points: pts.len(),
        n_tested: 0,
        n_failed: 0,
        max_margin: f64::NEG_INFINITY,
        argmax: None,
        min_margin: f64::INFINITY,
    };
    for x in &pts {
        let grad = v.gradient(x.as_slice());
        let gx = g(x);
        let lg = gx.transpose() * &grad;
        if lg.norm() >= LGV_ZERO {
            continue;
        }
        rep.n_tested += 1;
        let s = DVector::from_vec(sigma(x.as_slice()));
        let js = fd_jacobian(sigma, x.as_slice()) * &s;
        let hess = v.hessian(x.as_slice());
        let fx = f(x);
        let lf = grad.dot(&DVector::from_column_slice(fx.as_slice()));
        let margin = lf + 0.5 * grad.dot(&js) + 0.5 * s.dot(&(&hess * &s));
        if !(margin < 0.0) {
            rep.n_failed += 1;
        }
        if margin > rep.max_margin || margin.is_nan() {
            rep.max_margin = margin;
            rep.argmax = Some(*x);
        }
        rep.min_margin = rep.min_margin.min(margin);
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brockett::{g_matrix, DiffusionDesign, SystemParams};
    use crate::lyapunov::{BrockettClf, SquaredNorm};
    use crate::verification::Axis;

    fn reference_loop() -> ClosedLoop {
        ClosedLoop::new(SystemParams::reference(), DiffusionDesign::reference()).unwrap()
    }

    #[test]
    fn axis_points_negative() {
        let cl = reference_loop();
        let grid = GridSpec::new(
            [
                Axis::Fixed(0.0),
                Axis::Fixed(0.0),
                Axis::Range { min: -2.0, max: 2.0, count: 9 },
            ],
            1e-3,
        )
        .unwrap();
        let r = scan_generator(&cl, &grid);
        assert_eq!(r.m_count, 8);
        assert!(r.passed() && r.m_max_lv < 0.0);
    }

    #[test]
    fn zero_noise_violates_on_axis_only() {
        let cl = ClosedLoop::new(SystemParams::reference(), DiffusionDesign::eigen_scaled(0.0, 0.0).unwrap()).unwrap();
        let r = scan_generator(&cl, &GridSpec::cube(-2.0, 2.0, 9, 1e-3).unwrap());
        assert!(!r.passed());
        assert!(r.violations_exactly_on_m(), "{:?}", r.violations.len());
    }

    #[test]
    fn refinement_keeps_violations() {
        let cl = ClosedLoop::new(SystemParams::reference(), DiffusionDesign::eigen_scaled(0.0, 0.0).unwrap()).unwrap();
        let g = GridSpec::cube(-1.0, 1.0, 5, 1e-3).unwrap();
        let coarse = scan_generator(&cl, &g);
        let fine = scan_generator(&cl, &g.refined());
        for v in &coarse.violations {
            assert!(fine.violations.iter().any(|w| w.x == v.x));
        }
    }

    #[test]
    fn csv_layout() {
        let cl = reference_loop();
        let g = GridSpec::slice(-1.0, 1.0, 3, 1, 0.0, 1e-3).unwrap();
        let r = scan_generator(&cl, &g);
        let mut buf = Vec::new();
        r.write_csv(&mut buf, &["seed = 1".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# seed = 1");
        assert_eq!(lines[1], "x1,x2,x3,LV");
        assert_eq!(lines.len(), 2 + 8);
        assert_eq!(lines[2].split(',').count(), 4);
    }

    fn pre_randomization(v: &dyn ScalarField) -> SclfReport {
        let p = SystemParams::reference();
        let d = DiffusionDesign::reference();
        sclf_condition_check(
            |_| Vector3::zeros(),
            |x| DMatrix::from_column_slice(3, 2, g_matrix(&p, x).as_slice()),
            |x| DVector::from_column_slice(d.coefficients(&p, x).as_slice()),
            v,
            &GridSpec::cube(-2.0, 2.0, 9, 1e-3).unwrap(),
        )
    }

    #[test]
    fn sclf_condition_for_v2_and_v1() {
        let r2 = pre_randomization(&BrockettClf);
        assert_eq!(r2.n_tested, 8);
        assert!(r2.holds(), "{r2:?}");
        let r1 = pre_randomization(&SquaredNorm);
        assert_eq!(r1.n_tested, 8);
        assert_eq!(r1.n_failed, 8);
    }

    #[test]
    fn sclf_vacuous_without_axis_points() {
        let p = SystemParams::reference();
        let d = DiffusionDesign::reference();
        let grid = GridSpec::cube(0.5, 1.5, 3, 0.0).unwrap();
        let r = sclf_condition_check(
            |_| Vector3::zeros(),
            |x| DMatrix::from_column_slice(3, 2, g_matrix(&p, x).as_slice()),
            |x| DVector::from_column_slice(d.coefficients(&p, x).as_slice()),
            &BrockettClf,
            &grid,
        );
        assert!(r.vacuous() && !r.holds());
    }
}
