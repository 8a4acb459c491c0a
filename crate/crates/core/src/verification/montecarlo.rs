use std::fmt::Write as _;

use nalgebra::Vector3;
use rayon::prelude::*;

use super::stats::{mean_se, quantiles, wilson_halfwidth};
use crate::brockett::ClosedLoop;
use crate::error::{Error, Result};
use crate::lyapunov::v2_value;
use crate::sde::{euler_maruyama_fused, path_seed, step_count, Trajectory, WienerPath};

/// Ensemble settings. `m_level = None` means `10·V₂(x₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub x0: Vector3<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub eps: f64,
    pub conv_threshold: f64,
    pub m_level: Option<f64>,
    pub seed: u64,
    /// Number of equal time buckets for the drift estimate of `V₂`.
    pub buckets: usize,
    /// Keep every `k`-th state (and control) of each path.
    pub record_every: Option<usize>,
}

impl McConfig {
    pub fn new(x0: Vector3<f64>, dt: f64, horizon: f64, n_paths: usize, seed: u64) -> Self {
        McConfig {
            x0,
            dt,
            horizon,
            n_paths,
            eps: 5.0,
            conv_threshold: 0.1,
            m_level: None,
            seed,
            buckets: 50,
            record_every: None,
        }
    }

    pub fn resolved_m_level(&self) -> f64 {
        self.m_level.unwrap_or_else(|| 10.0 * v2_value(&self.x0))
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(Error::invalid("horizon must be at least dt"));
        }
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths must be positive"));
        }
        if !(self.eps > 0.0) || !(self.conv_threshold > 0.0) {
            return Err(Error::invalid("eps and conv_threshold must be positive"));
        }
        if !(self.resolved_m_level() > 0.0) {
            return Err(Error::invalid("m_level must be positive"));
        }
        if self.buckets == 0 {
            return Err(Error::invalid("buckets must be positive"));
        }
        if self.record_every == Some(0) {
            return Err(Error::invalid("record_every must be positive"));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("x0 must be finite"));
        }
        Ok(())
    }
}

/// What one sample path did.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub index: usize,
    pub seed: u64,
    pub diverged: bool,
    /// Terminal state, or the last finite state before divergence.
    pub terminal: Vector3<f64>,
    pub sup_norm: f64,
    pub sup_v2: f64,
    /// `V₂` at the bucket boundaries; shorter than `buckets + 1` when the
    /// path diverged.
    pub bucket_v2: Vec<f64>,
    pub trajectory: Option<Trajectory>,
}

impl PathOutcome {
    pub fn terminal_v2(&self) -> f64 {
        if self.diverged {
            f64::INFINITY
        } else {
            v2_value(&self.terminal)
        }
    }
}

/// Empirical mean rate of change of `V₂` over one time bucket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketDrift {
    pub t_start: f64,
    pub t_end: f64,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub n_paths: usize,
    pub n_diverged: usize,
    pub eps: f64,
    pub conv_threshold: f64,
    pub m_level: f64,
    pub v2_initial: f64,
    pub p_sup_exceed: f64,
    pub p_sup_exceed_halfwidth: f64,
    pub p_converge: f64,
    pub p_converge_halfwidth: f64,
    /// `(q05, q50, q95)` of the terminal `V₂`; diverged paths count as `+∞`.
    pub v2_terminal_quantiles: (f64, f64, f64),
    pub sup_v2_exceedance: f64,
    pub sup_v2_exceedance_halfwidth: f64,
    /// Largest of the three Wilson half-widths above.
    pub wilson_ci_halfwidth: f64,
    pub median_terminal_norm: f64,
    pub bucket_drift: Vec<BucketDrift>,
    pub paths: Vec<PathOutcome>,
}

impl StabilityReport {
    /// `V₂(x₀)/m`.
    pub fn kushner_bound(&self) -> f64 {
        self.v2_initial / self.m_level
    }

    pub fn kushner_ok(&self) -> bool {
        self.sup_v2_exceedance <= self.kushner_bound() + self.sup_v2_exceedance_halfwidth
    }

    /// Every bucket mean `≤ k·SE`.
    pub fn supermartingale_ok(&self, k: f64) -> bool {
        self.bucket_drift.iter().all(|b| b.mean <= k * b.se)
    }

    /// Worst `mean / SE` over the buckets.
    pub fn worst_drift_ratio(&self) -> f64 {
        self.bucket_drift
            .iter()
            .map(|b| if b.se > 0.0 { b.mean / b.se } else if b.mean > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn median_decreased(&self) -> bool {
        self.v2_terminal_quantiles.1 < self.v2_initial
    }

    /// Flat `key = value` lines.
    pub fn to_kv(&self) -> String {
        let (q05, q50, q95) = self.v2_terminal_quantiles;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("n_paths", self.n_paths.to_string());
        kv("n_diverged", self.n_diverged.to_string());
        kv("eps", format!("{:e}", self.eps));
        kv("conv_threshold", format!("{:e}", self.conv_threshold));
        kv("m_level", format!("{:e}", self.m_level));
        kv("v2_initial", format!("{:e}", self.v2_initial));
        kv("p_sup_exceed", format!("{:e}", self.p_sup_exceed));
        kv("p_sup_exceed_halfwidth", format!("{:e}", self.p_sup_exceed_halfwidth));
        kv("p_converge", format!("{:e}", self.p_converge));
        kv("p_converge_halfwidth", format!("{:e}", self.p_converge_halfwidth));
        kv("v2_terminal_q05", format!("{q05:e}"));
        kv("v2_terminal_q50", format!("{q50:e}"));
        kv("v2_terminal_q95", format!("{q95:e}"));
        kv("sup_v2_exceedance", format!("{:e}", self.sup_v2_exceedance));
        kv("sup_v2_exceedance_halfwidth", format!("{:e}", self.sup_v2_exceedance_halfwidth));
        kv("kushner_bound", format!("{:e}", self.kushner_bound()));
        kv("kushner_ok", self.kushner_ok().to_string());
        kv("wilson_ci_halfwidth", format!("{:e}", self.wilson_ci_halfwidth));
        kv("median_terminal_norm", format!("{:e}", self.median_terminal_norm));
        kv("worst_drift_over_se", format!("{:e}", self.worst_drift_ratio()));
        kv("supermartingale_ok", self.supermartingale_ok(2.0).to_string());
        let means: Vec<String> = self.bucket_drift.iter().map(|b| format!("{:e}", b.mean)).collect();
        let ses: Vec<String> = self.bucket_drift.iter().map(|b| format!("{:e}", b.se)).collect();
        kv("bucket_drift_mean", means.join(","));
        kv("bucket_drift_se", ses.join(","));
        s
    }
}

fn bucket_steps(steps: usize, buckets: usize) -> Vec<usize> {
    let b = buckets.min(steps).max(1);
    (0..=b).map(|j| j * steps / b).collect()
}

fn simulate_path(cl: &ClosedLoop, cfg: &McConfig, index: usize, marks: &[usize]) -> Result<PathOutcome> {
    let seed = path_seed(cfg.seed, index as u64);
    let path = WienerPath::sample(cfg.dt, cfg.horizon, seed)?;
    let mut sup_norm: f64 = 0.0;
    let mut sup_v2: f64 = 0.0;
    let mut last = cfg.x0;
    let mut bucket_v2 = Vec::with_capacity(marks.len());
    let mut next_mark = 0;
    let mut rec = cfg.record_every.map(|_| Trajectory {
        times: vec![],
        states: vec![],
        controls: Some(vec![]),
    });
    let every = cfg.record_every.unwrap_or(1);
    let steps = path.steps();

    let result = euler_maruyama_fused(
        cfg.x0.as_slice(),
        &path,
        |x, f, s| {
            let e = cl.eval(&Vector3::new(x[0], x[1], x[2]));
            f.copy_from_slice(e.drift.as_slice());
            s.copy_from_slice(e.randomization.sigma.as_slice());
        },
        |k, t, x| {
            let xv = Vector3::new(x[0], x[1], x[2]);
            let v = v2_value(&xv);
            sup_norm = sup_norm.max(xv.norm());
            sup_v2 = sup_v2.max(v);
            last = xv;
            if next_mark < marks.len() && marks[next_mark] == k {
                bucket_v2.push(v);
                next_mark += 1;
            }
            if let Some(tr) = rec.as_mut() {
                if k % every == 0 || k == steps {
                    let u = cl.control(&xv);
                    tr.times.push(t);
                    tr.states.push(x.to_vec());
                    if let Some(c) = tr.controls.as_mut() {
                        c.push(vec![u.x, u.y]);
                    }
                }
            }
        },
    );
    let diverged = match result {
        Ok(_) => false,
        Err(Error::Diverged { .. }) => true,
        Err(e) => return Err(e),
    };
    Ok(PathOutcome {
        index,
        seed,
        diverged,
        terminal: last,
        sup_norm: if diverged { f64::INFINITY } else { sup_norm },
        sup_v2: if diverged { f64::INFINITY } else { sup_v2 },
        bucket_v2,
        trajectory: rec,
    })
}

/// Runs the Euler–Maruyama ensemble for any `n_paths ≥ 1`. Paths are
/// simulated in parallel; every statistic is reduced in path order, so the
/// report does not depend on the number of worker threads.
pub fn simulate_ensemble(cl: &ClosedLoop, cfg: &McConfig) -> Result<StabilityReport> {
    cfg.validate()?;
    let marks = bucket_steps(step_count(cfg.dt, cfg.horizon), cfg.buckets);
    let paths: Vec<PathOutcome> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| simulate_path(cl, cfg, i, &marks))
        .collect::<Result<_>>()?;
    Ok(summarize(cfg, &marks, paths))
}

/// The ensemble estimator proper; requires at least 100 paths so that the
/// Wilson intervals mean something.
pub fn mc_stability(cl: &ClosedLoop, cfg: &McConfig) -> Result<StabilityReport> {
    if cfg.n_paths < 100 {
        return Err(Error::invalid(format!("mc_stability needs n_paths >= 100, got {}", cfg.n_paths)));
    }
    simulate_ensemble(cl, cfg)
}

fn summarize(cfg: &McConfig, marks: &[usize], paths: Vec<PathOutcome>) -> StabilityReport {
    let n = paths.len();
    let m_level = cfg.resolved_m_level();
    let n_diverged = paths.iter().filter(|p| p.diverged).count();
    let n_exceed = paths.iter().filter(|p| p.sup_norm > cfg.eps).count();
    let n_conv = paths
        .iter()
        .filter(|p| !p.diverged && p.terminal.norm() < cfg.conv_threshold)
        .count();
    let n_level = paths.iter().filter(|p| p.sup_v2 >= m_level).count();

    let tv: Vec<f64> = paths.iter().map(|p| p.terminal_v2()).collect();
    let q = quantiles(&tv, &[0.05, 0.5, 0.95]);
    let norms: Vec<f64> = paths
        .iter()
        .map(|p| if p.diverged { f64::INFINITY } else { p.terminal.norm() })
        .collect();
    let median_norm = quantiles(&norms, &[0.5])[0];

    let mut bucket_drift = Vec::with_capacity(marks.len().saturating_sub(1));
    for j in 0..marks.len().saturating_sub(1) {
        let dt = (marks[j + 1] - marks[j]) as f64 * cfg.dt;
        let rates: Vec<f64> = paths
            .iter()
            .filter(|p| !p.diverged)
            .map(|p| (p.bucket_v2[j + 1] - p.bucket_v2[j]) / dt)
            .collect();
        let (mean, se) = mean_se(&rates);
        bucket_drift.push(BucketDrift {
            t_start: marks[j] as f64 * cfg.dt,
            t_end: marks[j + 1] as f64 * cfg.dt,
            mean,
            se,
        });
    }

    let hw = [
        wilson_halfwidth(n_exceed, n),
        wilson_halfwidth(n_conv, n),
        wilson_halfwidth(n_level, n),
    ];
    StabilityReport {
        n_paths: n,
        n_diverged,
        eps: cfg.eps,
        conv_threshold: cfg.conv_threshold,
        m_level,
        v2_initial: v2_value(&cfg.x0),
        p_sup_exceed: n_exceed as f64 / n as f64,
        p_sup_exceed_halfwidth: hw[0],
        p_converge: n_conv as f64 / n as f64,
        p_converge_halfwidth: hw[1],
        v2_terminal_quantiles: (q[0], q[1], q[2]),
        sup_v2_exceedance: n_level as f64 / n as f64,
        sup_v2_exceedance_halfwidth: hw[2],
        wilson_ci_halfwidth: hw.iter().copied().fold(0.0, f64::max),
        median_terminal_norm: median_norm,
        bucket_drift,
        paths,
    }
}
