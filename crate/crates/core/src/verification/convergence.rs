use rayon::prelude::*;

use super::stats::loglog_slope;
use crate::error::{Error, Result};
use crate::sde::{euler_maruyama, heun_stratonovich, ode_drive, path_seed, PiecewiseLinearNoise, SdeSystem, WienerPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    EulerMaruyama,
    Heun,
    /// Classical RK4 on the pathwise ODE with piecewise-linear noise.
    PathwiseRk4 { substeps: usize },
}

impl Integrator {
    fn terminal(&self, sys: &SdeSystem, x0: &[f64], path: &WienerPath) -> Result<Vec<f64>> {
        let tr = match *self {
            Integrator::EulerMaruyama => euler_maruyama(sys, x0, path)?,
            Integrator::Heun => heun_stratonovich(sys, x0, path)?,
            Integrator::PathwiseRk4 { substeps } => {
                ode_drive(sys, x0, &PiecewiseLinearNoise::lift(path, 1)?, substeps)?
            }
        };
        Ok(tr.terminal().to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrongOrderSpec {
    /// At least four step sizes in geometric progression; each must be an
    /// integer multiple of the smallest.
    pub dts: Vec<f64>,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrongOrderReport {
    pub dts: Vec<f64>,
    /// RMS terminal error per step size.
    pub rms: Vec<f64>,
    pub slope: f64,
}

fn coarsening_factors(dts: &[f64]) -> Result<Vec<usize>> {
    if dts.len() < 4 {
        return Err(Error::invalid("need at least 4 step sizes"));
    }
    if dts.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::invalid("step sizes must be positive"));
    }
    let ratio = dts[1] / dts[0];
    if dts.windows(2).any(|w| ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-9) || (ratio - 1.0).abs() < 1e-9 {
        return Err(Error::invalid("step sizes must form a geometric sequence"));
    }
    let finest = dts.iter().copied().fold(f64::INFINITY, f64::min);
    dts.iter()
        .map(|d| {
            let f = (d / finest).round();
            if ((d / finest) - f).abs() > 1e-9 {
                Err(Error::invalid(format!("dt {d} is not a multiple of {finest}")))
            } else {
                Ok(f as usize)
            }
        })
        .collect()
}

/// Log–log slope of the RMS terminal error against `dt`. All step sizes
/// of one path share noise: coarse paths are subsamples of the finest.
/// `exact(T, w(T))` is the closed-form terminal state.
pub fn strong_order_estimate<E>(
    integrator: Integrator,
    sys: &SdeSystem,
    x0: &[f64],
    exact: E,
    spec: &StrongOrderSpec,
) -> Result<StrongOrderReport>
where
    E: Fn(f64, f64) -> Vec<f64> + Sync,
{
    let factors = coarsening_factors(&spec.dts)?;
    if spec.n_paths == 0 {
        return Err(Error::invalid("n_paths must be positive"));
    }
    let finest = spec.dts.iter().copied().fold(f64::INFINITY, f64::min);
    let per_path: Vec<Vec<f64>> = (0..spec.n_paths)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let fine = WienerPath::sample(finest, spec.horizon, path_seed(spec.seed, i as u64))?;
            factors
                .iter()
                .map(|&f| {
                    let p = fine.coarsen(f)?;
                    let got = integrator.terminal(sys, x0, &p)?;
                    let want = exact(p.horizon(), p.terminal());
                    Ok(got.iter().zip(&want).map(|(a, b)| (a - b) * (a - b)).sum())
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rms: Vec<f64> = (0..factors.len())
        .map(|k| (per_path.iter().map(|e| e[k]).sum::<f64>() / spec.n_paths as f64).sqrt())
        .collect();
    Ok(StrongOrderReport {
        slope: loglog_slope(&spec.dts, &rms),
        dts: spec.dts.clone(),
        rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::Convention;

    fn linear(convention: Convention) -> SdeSystem {
        SdeSystem::new(1, |_, o| o[0] = 0.0, |x, o| o[0] = x[0], convention).unwrap()
    }

    fn dyadic(from: i32, to: i32) -> Vec<f64> {
        (from..=to).map(|k| 2f64.powi(-k)).collect()
    }

    #[test]
    fn euler_maruyama_half_order() {
        let spec = StrongOrderSpec { dts: dyadic(6, 12), horizon: 1.0, n_paths: 200, seed: 1 };
        let r = strong_order_estimate(
            Integrator::EulerMaruyama,
            &linear(Convention::Ito),
            &[1.0],
            |t, w| vec![(w - 0.5 * t).exp()],
            &spec,
        )
        .unwrap();
        assert!((0.4..=0.6).contains(&r.slope), "{r:?}");
    }

    #[test]
    fn heun_first_order_for_commutative_noise() {
        let spec = StrongOrderSpec { dts: dyadic(4, 9), horizon: 1.0, n_paths: 200, seed: 2 };
        let r = strong_order_estimate(
            Integrator::Heun,
            &linear(Convention::Stratonovich),
            &[1.0],
            |_, w| vec![w.exp()],
            &spec,
        )
        .unwrap();
        assert!((0.8..=1.2).contains(&r.slope), "{r:?}");
    }

    #[test]
    fn rk4_on_deterministic_ode() {
        let sys = SdeSystem::new(1, |x, o| o[0] = -x[0], |_, o| o[0] = 0.0, Convention::Stratonovich).unwrap();
        let spec = StrongOrderSpec { dts: dyadic(1, 5), horizon: 2.0, n_paths: 1, seed: 0 };
        let r = strong_order_estimate(
            Integrator::PathwiseRk4 { substeps: 1 },
            &sys,
            &[1.0],
            |t, _| vec![(-t).exp()],
            &spec,
        )
        .unwrap();
        assert!(r.slope >= 3.5, "{r:?}");
    }

    #[test]
    fn rejects_bad_step_lists() {
        assert!(coarsening_factors(&[0.1, 0.05, 0.025]).is_err());
        assert!(coarsening_factors(&[0.1, 0.05, 0.02, 0.01]).is_err());
        assert!(coarsening_factors(&[0.3, 0.1, 1.0 / 30.0, 1.0 / 90.0]).is_ok());
    }
}
