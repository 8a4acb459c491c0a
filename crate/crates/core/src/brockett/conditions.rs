//! Checks on a diffusion design: the sufficient conditions for `V₂` to be a
//! stochastic control Lyapunov function, plus the two limit conditions that
//! give the small control property.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use nalgebra::Vector3;

use super::{DiffusionDesign, SystemParams};
use crate::verification::GridSpec;

/// Radii for the limit checks, in the order they are evaluated.
pub const LIMIT_RADII: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
const CIRCLE_SAMPLES: usize = 64;
const LIMIT_TARGET: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionResult {
    /// Stable identifier, e.g. `brockett6`.
    pub name: &'static str,
    pub statement: &'static str,
    pub passed: bool,
    pub detail: String,
    /// Per-radius values for the limit conditions.
    pub sequence: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignReport {
    pub conditions: Vec<ConditionResult>,
}

impl DesignReport {
    pub fn all_passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.conditions.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }

    pub fn get(&self, name: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.name == name)
    }

    /// `key = value` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for c in &self.conditions {
            let _ = writeln!(s, "{}.pass = {}", c.name, c.passed);
            let _ = writeln!(s, "{}.statement = {}", c.name, c.statement);
            let _ = writeln!(s, "{}.detail = {}", c.name, c.detail);
            if !c.sequence.is_empty() {
                let seq: Vec<String> = c.sequence.iter().map(|v| format!("{v:e}")).collect();
                let _ = writeln!(s, "{}.sequence = {}", c.name, seq.join(","));
            }
        }
        let _ = writeln!(s, "failed = {}", self.failed().join(","));
        s
    }
}

fn non_increasing_below(seq: &[f64], target: f64) -> bool {
    seq.windows(2).all(|w| w[1] <= w[0]) && seq.last().is_some_and(|v| *v < target)
}

fn circle(r: f64, z: f64) -> impl Iterator<Item = Vector3<f64>> {
    (0..CIRCLE_SAMPLES).map(move |k| {
        let th = TAU * k as f64 / CIRCLE_SAMPLES as f64;
        Vector3::new(r * th.cos(), r * th.sin(), z)
    })
}

pub fn check_design_conditions(p: &SystemParams, d: &DiffusionDesign, grid: &GridSpec) -> DesignReport {
    let b_at = |x: &Vector3<f64>| d.coefficients(p, x);
    let twist = p.twist();
    let mut out = Vec::new();

    let b0 = b_at(&Vector3::zeros());
    out.push(ConditionResult {
        name: "brockett6",
        statement: "B1(0) = B2(0) = 0",
        passed: b0.x == 0.0 && b0.y == 0.0,
        detail: format!("B(0) = ({:e}, {:e})", b0.x, b0.y),
        sequence: vec![],
    });

    let pts = grid.points();
    let (mut worst, mut worst_at) = (f64::INFINITY, Vector3::zeros());
    for x in &pts {
        let b = b_at(x);
        let v = b.x * b.y * twist * x.z;
        if v < worst {
            worst = v;
            worst_at = *x;
        }
    }
    out.push(ConditionResult {
        name: "brockett7",
        statement: "B1 B2 (b1 b4 - b2 b3) x3 >= 0",
        passed: worst >= -1e-12,
        detail: format!(
            "min {worst:e} at ({}, {}, {}) over {} points",
            worst_at.x,
            worst_at.y,
            worst_at.z,
            pts.len()
        ),
        sequence: vec![],
    });

    let axis_pts: Vec<Vector3<f64>> = grid
        .axis_values(2)
        .into_iter()
        .filter(|z| z.abs() > 1e-3)
        .map(|z| Vector3::new(0.0, 0.0, z))
        .collect();
    let zeros: Vec<f64> = axis_pts
        .iter()
        .filter(|x| {
            let b = b_at(x);
            b.x == 0.0 || b.y == 0.0
        })
        .map(|x| x.z)
        .collect();
    out.push(ConditionResult {
        name: "brockett8",
        statement: "B1 != 0 and B2 != 0 on M minus the origin",
        passed: zeros.is_empty(),
        detail: if axis_pts.is_empty() {
            "vacuous: no axis points with |x3| > 1e-3".into()
        } else if zeros.is_empty() {
            format!("nonzero at all {} axis points", axis_pts.len())
        } else {
            format!("vanishes at x3 in {zeros:?}")
        },
        sequence: vec![],
    });

    let c1: Vec<f64> = LIMIT_RADII
        .iter()
        .map(|&r| {
            circle(r, r)
                .map(|x| {
                    let b = b_at(&x);
                    (b.x * b.y * x.z).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    out.push(ConditionResult {
        name: "continuous1",
        statement: "lim_{x3->0} B1 B2 x3 = 0",
        passed: non_increasing_below(&c1, LIMIT_TARGET),
        detail: format!("max |B1 B2 x3| on X = r^2, x3 = r must decrease below {LIMIT_TARGET:e}"),
        sequence: c1,
    });

    let (b1, b2) = (p.b1(), p.b2());
    let c2: Vec<f64> = LIMIT_RADII
        .iter()
        .map(|&r| {
            circle(r, 0.0)
                .map(|x| {
                    let b = b_at(&x);
                    (b1 * b1 * b.x * b.x + b2 * b2 * b.y * b.y)
                        / (b1 * b1 * x.x * x.x + b2 * b2 * x.y * x.y)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    out.push(ConditionResult {
        name: "continuous2",
        statement: "lim_{x->0} (b1^2 B1^2 + b2^2 B2^2) / (b1^2 x1^2 + b2^2 x2^2) = 0",
        passed: non_increasing_below(&c2, LIMIT_TARGET),
        detail: format!("max ratio on X = r^2, x3 = 0 must decrease below {LIMIT_TARGET:e}"),
        sequence: c2,
    });

    DesignReport { conditions: out }
}
