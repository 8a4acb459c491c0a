use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::brockett::ClosedLoop;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SmallControlReport {
    pub radii: Vec<f64>,
    /// `max ‖u_s(r·dir)‖` per radius.
    pub max_norms: Vec<f64>,
    pub argmax_dirs: Vec<Vector3<f64>>,
    pub n_dirs: usize,
}

impl SmallControlReport {
    pub fn non_increasing(&self) -> bool {
        self.max_norms.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn final_value(&self) -> f64 {
        *self.max_norms.last().unwrap_or(&f64::NAN)
    }
}

/// `n` unit vectors, normalized standard Gaussians.
pub fn random_directions(n: usize, seed: u64) -> Vec<Vector3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v: Vector3<f64> = Vector3::from_fn(|_, _| StandardNormal.sample(&mut rng));
        let norm = v.norm();
        if norm > 1e-12 {
            out.push(v / norm);
        }
    }
    out
}

/// Largest Sontag control on spheres of decreasing radius. The same
/// directions are used at every radius.
pub fn small_control_scan(cl: &ClosedLoop, radii: &[f64], n_dirs: usize, seed: u64) -> Result<SmallControlReport> {
    if radii.is_empty() || n_dirs == 0 {
        return Err(Error::invalid("need at least one radius and one direction"));
    }
    if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::invalid("radii must be positive"));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("radii must be strictly descending"));
    }
    let dirs = random_directions(n_dirs, seed);
    let mut max_norms = Vec::with_capacity(radii.len());
    let mut argmax_dirs = Vec::with_capacity(radii.len());
    for &r in radii {
        let (mut best, mut at) = (0.0, dirs[0]);
        for d in &dirs {
            let u = cl.control(&(r * d)).norm();
            if u > best {
                best = u;
                at = *d;
            }
        }
        max_norms.push(best);
        argmax_dirs.push(at);
    }
    Ok(SmallControlReport {
        radii: radii.to_vec(),
        max_norms,
        argmax_dirs,
        n_dirs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brockett::{DiffusionDesign, SystemParams, LIMIT_RADII};

    #[test]
    fn control_vanishes_on_axis() {
        let cl = ClosedLoop::new(SystemParams::reference(), DiffusionDesign::reference()).unwrap();
        for z in [-1.0, 1e-3, 0.5] {
            assert_eq!(cl.control(&Vector3::new(0.0, 0.0, z)).norm(), 0.0);
        }
    }

    #[test]
    fn sequence_shrinks_with_radius() {
        let cl = ClosedLoop::new(SystemParams::reference(), DiffusionDesign::reference()).unwrap();
        let r = small_control_scan(&cl, &LIMIT_RADII, 200, 17).unwrap();
        assert!(r.non_increasing(), "{:?}", r.max_norms);
        assert!(r.final_value() < 1e-4);
    }

    #[test]
    fn rejects_bad_radii() {
        let cl = ClosedLoop::new(SystemParams::reference(), DiffusionDesign::reference()).unwrap();
        assert!(small_control_scan(&cl, &[1e-2, 1e-1], 10, 0).is_err());
        assert!(small_control_scan(&cl, &[0.0], 10, 0).is_err());
        assert!(small_control_scan(&cl, &[1e-1], 0, 0).is_err());
    }

    #[test]
    fn directions_are_unit() {
        let d = random_directions(500, 3);
        assert!(d.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        assert_eq!(d, random_directions(500, 3));
    }
}
