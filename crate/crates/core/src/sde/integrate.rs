//! Fixed-step integrators driven by a given noise realization.

use std::io::{self, Write};

use super::system::{Convention, SdeSystem};
use super::wiener::{PiecewiseLinearNoise, WienerPath};
use crate::error::{Error, Result};

/// States with norm above this are treated as a blown-up path.
pub const DIVERGENCE_BOUND: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal(&self) -> &[f64] {
        self.states.last().map(|s| s.as_slice()).unwrap_or(&[])
    }

    /// Keep every `every`-th sample and always the last one.
    pub fn thinned(&self, every: usize) -> Trajectory {
        let every = every.max(1);
        let n = self.len();
        let keep: Vec<usize> = (0..n)
            .filter(|i| i % every == 0 || *i + 1 == n)
            .collect();
        Trajectory {
            times: keep.iter().map(|&i| self.times[i]).collect(),
            states: keep.iter().map(|&i| self.states[i].clone()).collect(),
            controls: self
                .controls
                .as_ref()
                .map(|c| keep.iter().map(|&i| c[i].clone()).collect()),
        }
    }

    /// CSV with header `t,x1,..,xn[,u1,..,um]`; values in 17 significant
    /// digits. `comments` are emitted first, each prefixed with `# `.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        let n = self.states.first().map_or(0, |s| s.len());
        let m = self
            .controls
            .as_ref()
            .and_then(|c| c.first())
            .map_or(0, |u| u.len());
        let mut header = String::from("t");
        for i in 1..=n {
            header.push_str(&format!(",x{i}"));
        }
        for j in 1..=m {
            header.push_str(&format!(",u{j}"));
        }
        writeln!(w, "{header}")?;
        for (k, t) in self.times.iter().enumerate() {
            let mut line = fmt_f64(*t);
            for v in &self.states[k] {
                line.push(',');
                line.push_str(&fmt_f64(*v));
            }
            if let Some(c) = &self.controls {
                for v in &c[k] {
                    line.push(',');
                    line.push_str(&fmt_f64(*v));
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Full-precision float formatting shared by every CSV writer.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn check_state(x: &[f64], time: f64, step: usize) -> Result<()> {
    let norm_sq: f64 = x.iter().map(|v| v * v).sum();
    if !norm_sq.is_finite() || norm_sq > DIVERGENCE_BOUND * DIVERGENCE_BOUND {
        return Err(Error::Diverged { time, step });
    }
    Ok(())
}

fn check_dims(sys: &SdeSystem, x0: &[f64]) -> Result<()> {
    if sys.dim() != x0.len() {
        return Err(Error::invalid(format!(
            "state has dimension {}, system expects {}",
            x0.len(),
            sys.dim()
        )));
    }
    Ok(())
}

/// Euler–Maruyama, reporting each accepted state to `observe(step, t, x)`
/// instead of storing it. Returns the terminal state.
pub fn euler_maruyama_with<F>(
    sys: &SdeSystem,
    x0: &[f64],
    path: &WienerPath,
    observe: F,
) -> Result<Vec<f64>>
where
    F: FnMut(usize, f64, &[f64]),
{
    if sys.convention() != Convention::Ito {
        return Err(Error::invalid("euler_maruyama needs an Ito system"));
    }
    check_dims(sys, x0)?;
    euler_maruyama_fused(
        x0,
        path,
        |x, f, s| {
            sys.drift(x, f);
            sys.diffusion(x, s);
        },
        observe,
    )
}

/// Euler–Maruyama for an Ito system whose drift and diffusion are produced
/// together by `coeffs(x, drift, diffusion)`, for models where both come
/// out of one expensive evaluation.
pub fn euler_maruyama_fused<C, F>(
    x0: &[f64],
    path: &WienerPath,
    mut coeffs: C,
    mut observe: F,
) -> Result<Vec<f64>>
where
    C: FnMut(&[f64], &mut [f64], &mut [f64]),
    F: FnMut(usize, f64, &[f64]),
{
    let n = x0.len();
    let dt = path.dt;
    let mut x = x0.to_vec();
    let mut f = vec![0.0; n];
    let mut s = vec![0.0; n];
    check_state(&x, path.t0, 0)?;
    observe(0, path.t0, &x);
    for k in 0..path.steps() {
        let dw = path.increment(k);
        coeffs(&x, &mut f, &mut s);
        for i in 0..n {
            x[i] += f[i] * dt + s[i] * dw;
        }
        let t = path.time(k + 1);
        check_state(&x, t, k + 1)?;
        observe(k + 1, t, &x);
    }
    Ok(x)
}

/// `x_{k+1} = x_k + f(x_k) dt + σ(x_k) Δw_k` on the path's own mesh.
pub fn euler_maruyama(sys: &SdeSystem, x0: &[f64], path: &WienerPath) -> Result<Trajectory> {
    let mut times = Vec::with_capacity(path.len());
    let mut states = Vec::with_capacity(path.len());
    euler_maruyama_with(sys, x0, path, |_, t, x| {
        times.push(t);
        states.push(x.to_vec());
    })?;
    Ok(Trajectory {
        times,
        states,
        controls: None,
    })
}

/// Stochastic Heun predictor–corrector, consistent with Stratonovich
/// calculus.
pub fn heun_stratonovich(sys: &SdeSystem, x0: &[f64], path: &WienerPath) -> Result<Trajectory> {
    if sys.convention() != Convention::Stratonovich {
        return Err(Error::invalid("heun_stratonovich needs a Stratonovich system"));
    }
    check_dims(sys, x0)?;
    let n = sys.dim();
    let dt = path.dt;
    let mut x = x0.to_vec();
    let (mut f0, mut s0, mut f1, mut s1) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut pred = vec![0.0; n];
    let mut times = vec![path.t0];
    let mut states = vec![x.clone()];
    check_state(&x, path.t0, 0)?;
    for k in 0..path.steps() {
        let dw = path.increment(k);
        sys.drift(&x, &mut f0);
        sys.diffusion(&x, &mut s0);
        for i in 0..n {
            pred[i] = x[i] + f0[i] * dt + s0[i] * dw;
        }
        sys.drift(&pred, &mut f1);
        sys.diffusion(&pred, &mut s1);
        for i in 0..n {
            x[i] += 0.5 * (f0[i] + f1[i]) * dt + 0.5 * (s0[i] + s1[i]) * dw;
        }
        let t = path.time(k + 1);
        check_state(&x, t, k + 1)?;
        times.push(t);
        states.push(x.clone());
    }
    Ok(Trajectory {
        times,
        states,
        controls: None,
    })
}

/// Pathwise ODE `ẋ = f(x) + σ(x)·ẇ⁽ⁿ⁾(t)` integrated with classical RK4,
/// `substeps` equal steps per knot interval so that no step straddles a
/// slope change.
pub fn ode_drive(
    sys: &SdeSystem,
    x0: &[f64],
    noise: &PiecewiseLinearNoise,
    substeps: usize,
) -> Result<Trajectory> {
    check_dims(sys, x0)?;
    if substeps < 1 {
        return Err(Error::invalid("substeps must be >= 1"));
    }
    let n = sys.dim();
    let mut x = x0.to_vec();
    let knots = noise.knots();
    let mut times = vec![knots[0].0];
    let mut states = vec![x.clone()];
    check_state(&x, knots[0].0, 0)?;

    let mut f = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut rhs = |y: &[f64], slope: f64, out: &mut [f64]| {
        sys.drift(y, &mut f);
        sys.diffusion(y, &mut s);
        for i in 0..n {
            out[i] = f[i] + s[i] * slope;
        }
    };

    let mut step = 0;
    for iv in 0..noise.intervals() {
        let slope = noise.slope(iv);
        let (ta, _) = knots[iv];
        let (tb, _) = knots[iv + 1];
        let h = (tb - ta) / substeps as f64;
        for j in 0..substeps {
            rhs(&x, slope, &mut k[0]);
            for i in 0..n {
                stage[i] = x[i] + 0.5 * h * k[0][i];
            }
            rhs(&stage, slope, &mut k[1]);
            for i in 0..n {
                stage[i] = x[i] + 0.5 * h * k[1][i];
            }
            rhs(&stage, slope, &mut k[2]);
            for i in 0..n {
                stage[i] = x[i] + h * k[2][i];
            }
            rhs(&stage, slope, &mut k[3]);
            for i in 0..n {
                x[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
            }
            step += 1;
            let t = if j + 1 == substeps { tb } else { ta + (j + 1) as f64 * h };
            check_state(&x, t, step)?;
            times.push(t);
            states.push(x.clone());
        }
    }
    Ok(Trajectory {
        times,
        states,
        controls: None,
    })
}
