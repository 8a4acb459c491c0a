use std::io::{self, Write};

use rayon::prelude::*;

use super::stats::mean_se;
use crate::error::{Error, Result};
use crate::sde::{euler_maruyama, fmt_f64, ode_drive, path_seed, Convention, PiecewiseLinearNoise, SdeSystem, WienerPath};

#[derive(Debug, Clone, PartialEq)]
pub struct WongZakaiConfig {
    pub x0: f64,
    pub horizon: f64,
    /// Knot intervals of the piecewise-linear noise, ascending.
    pub meshes: Vec<usize>,
    pub n_real: usize,
    pub seed: u64,
    /// Steps of the underlying Wiener path; every mesh must divide it.
    pub fine_steps: usize,
    /// RK4 steps per knot interval of the driven ODE.
    pub substeps: usize,
}

impl WongZakaiConfig {
    pub fn new(x0: f64, horizon: f64, meshes: Vec<usize>, n_real: usize, seed: u64) -> Self {
        WongZakaiConfig {
            x0,
            horizon,
            meshes,
            n_real,
            seed,
            fine_steps: 4096,
            substeps: 4,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) || !self.x0.is_finite() {
            return Err(Error::invalid("horizon must be positive and x0 finite"));
        }
        if self.n_real < 50 {
            return Err(Error::invalid(format!("n_real must be >= 50, got {}", self.n_real)));
        }
        if self.meshes.is_empty() || self.meshes.windows(2).any(|w| w[1] <= w[0]) || self.meshes[0] == 0 {
            return Err(Error::invalid("meshes must be positive and strictly ascending"));
        }
        if self.substeps == 0 {
            return Err(Error::invalid("substeps must be >= 1"));
        }
        for &n in &self.meshes {
            if !self.fine_steps.is_multiple_of(n) || !(self.fine_steps / n).is_multiple_of(self.substeps) {
                return Err(Error::invalid(format!(
                    "mesh {n} with {} substeps does not align with {} fine steps",
                    self.substeps, self.fine_steps
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WongZakaiReport {
    pub config: WongZakaiConfig,
    /// Mean of `(x⁽ⁿ⁾(T) − x₀e^{w(T)})²` per mesh.
    pub mse_terminal: Vec<f64>,
    /// Mean over the RK4 output times of `(x⁽ⁿ⁾(t) − x₀e^{w(t)})²`, where
    /// the interpolated and true noise differ between knots.
    pub mse_path: Vec<f64>,
    /// Terminal MSE when each driven ODE is compared against the closed
    /// form of a different realization.
    pub mse_shuffled: Vec<f64>,
    /// `ln(x_EM(T) / (x₀e^{w(T)}))` for uncorrected Euler–Maruyama on
    /// `dx = x dw`, mean and standard error.
    pub ito_log_ratio_mean: f64,
    pub ito_log_ratio_se: f64,
}

fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

impl WongZakaiReport {
    pub fn terminal_non_increasing(&self) -> bool {
        non_increasing(&self.mse_terminal)
    }

    pub fn path_non_increasing(&self) -> bool {
        non_increasing(&self.mse_path)
    }

    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "mesh,mse_terminal,mse_path,mse_shuffled")?;
        for (i, n) in self.config.meshes.iter().enumerate() {
            writeln!(
                w,
                "{n},{},{},{}",
                fmt_f64(self.mse_terminal[i]),
                fmt_f64(self.mse_path[i]),
                fmt_f64(self.mse_shuffled[i])
            )?;
        }
        Ok(())
    }
}

/// `dx = x∘dw` as a Stratonovich system, and its uncorrected Ito twin.
fn linear_noise(convention: Convention) -> SdeSystem {
    SdeSystem::new(1, |_, o| o[0] = 0.0, |x, o| o[0] = x[0], convention).expect("dimension 1")
}

struct Realization {
    terminal_sq: Vec<f64>,
    path_sq: Vec<f64>,
    terminal: Vec<f64>,
    w_terminal: f64,
    log_ratio: f64,
}

/// Pathwise ODEs driven by piecewise-linear interpolations of one fine
/// Wiener path, against the Stratonovich closed form `x₀e^{w(t)}` on the
/// same path.
pub fn wong_zakai_experiment(cfg: &WongZakaiConfig) -> Result<WongZakaiReport> {
    cfg.validate()?;
    let strat = linear_noise(Convention::Stratonovich);
    let ito = linear_noise(Convention::Ito);
    let dt = cfg.horizon / cfg.fine_steps as f64;
    let x0 = cfg.x0;

    let reals: Vec<Realization> = (0..cfg.n_real)
        .into_par_iter()
        .map(|r| -> Result<Realization> {
            let path = WienerPath::sample(dt, cfg.horizon, path_seed(cfg.seed, r as u64))?;
            let exact = |i: usize| x0 * path.values[i].exp();
            let mut terminal_sq = Vec::with_capacity(cfg.meshes.len());
            let mut path_sq = Vec::with_capacity(cfg.meshes.len());
            let mut terminal = Vec::with_capacity(cfg.meshes.len());
            for &n in &cfg.meshes {
                let factor = cfg.fine_steps / n;
                let noise = PiecewiseLinearNoise::lift(&path, factor)?;
                let tr = ode_drive(&strat, &[x0], &noise, cfg.substeps)?;
                let stride = factor / cfg.substeps;
                let sq: f64 = tr
                    .states
                    .iter()
                    .enumerate()
                    .map(|(j, s)| (s[0] - exact(j * stride)).powi(2))
                    .sum();
                path_sq.push(sq / tr.len() as f64);
                let xt = tr.terminal()[0];
                terminal.push(xt);
                terminal_sq.push((xt - exact(cfg.fine_steps)).powi(2));
            }
            let em = euler_maruyama(&ito, &[x0], &path)?;
            let log_ratio = (em.terminal()[0] / exact(cfg.fine_steps)).ln();
            Ok(Realization {
                terminal_sq,
                path_sq,
                terminal,
                w_terminal: path.terminal(),
                log_ratio,
            })
        })
        .collect::<Result<_>>()?;

    let n = cfg.n_real as f64;
    let m = cfg.meshes.len();
    let mean_over = |get: &dyn Fn(&Realization) -> f64| reals.iter().map(get).sum::<f64>() / n;
    let mse_terminal = (0..m).map(|k| mean_over(&|r| r.terminal_sq[k])).collect();
    let mse_path = (0..m).map(|k| mean_over(&|r| r.path_sq[k])).collect();
    let mse_shuffled = (0..m)
        .map(|k| {
            (0..reals.len())
                .map(|i| {
                    let other = &reals[(i + 1) % reals.len()];
                    (reals[i].terminal[k] - x0 * other.w_terminal.exp()).powi(2)
                })
                .sum::<f64>()
                / n
        })
        .collect();
    let ratios: Vec<f64> = reals.iter().map(|r| r.log_ratio).collect();
    let (ito_log_ratio_mean, ito_log_ratio_se) = mean_se(&ratios);

    Ok(WongZakaiReport {
        config: cfg.clone(),
        mse_terminal,
        mse_path,
        mse_shuffled,
        ito_log_ratio_mean,
        ito_log_ratio_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converges_and_ito_drifts_by_half_t() {
        let cfg = WongZakaiConfig::new(1.0, 1.0, vec![16, 64, 256, 1024], 60, 5);
        let r = wong_zakai_experiment(&cfg).unwrap();
        assert!(r.terminal_non_increasing(), "{:?}", r.mse_terminal);
        assert!(r.path_non_increasing(), "{:?}", r.mse_path);
        assert!((r.ito_log_ratio_mean + 0.5).abs() < 0.1);
        // shuffled noise never converges
        assert!(r.mse_shuffled.iter().all(|v| *v > 100.0 * r.mse_path[0]));
    }

    #[test]
    fn zero_initial_state_stays_zero() {
        let cfg = WongZakaiConfig::new(0.0, 1.0, vec![16, 64], 50, 1);
        let r = wong_zakai_experiment(&cfg).unwrap();
        assert!(r.mse_terminal.iter().chain(&r.mse_path).all(|v| *v == 0.0));
    }

    #[test]
    fn validation() {
        let mut cfg = WongZakaiConfig::new(1.0, 1.0, vec![64, 16], 50, 1);
        assert!(wong_zakai_experiment(&cfg).is_err());
        cfg.meshes = vec![16, 3000];
        assert!(wong_zakai_experiment(&cfg).is_err());
        cfg.meshes = vec![16];
        cfg.n_real = 10;
        assert!(wong_zakai_experiment(&cfg).is_err());
    }

    #[test]
    fn table_layout() {
        let cfg = WongZakaiConfig::new(1.0, 1.0, vec![16, 64], 50, 2);
        let r = wong_zakai_experiment(&cfg).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("mesh,mse_terminal,mse_path,mse_shuffled\n16,"));
        assert_eq!(text.lines().count(), 3);
    }
}
