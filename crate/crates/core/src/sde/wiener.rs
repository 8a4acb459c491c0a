//! Scalar Wiener paths and their piecewise-linear (Wong–Zakai) lifts.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Derive the seed of path `index` in an ensemble driven by `master`.
///
/// Each index gets its own ChaCha stream, so the result depends only on
/// `(master, index)` and never on the order in which paths are simulated.
pub fn path_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// Number of mesh steps for a horizon, tolerant of `horizon/dt` landing a
/// hair below an integer.
pub(crate) fn step_count(dt: f64, horizon: f64) -> usize {
    (horizon / dt + 1e-9).floor() as usize
}

/// A sampled one-dimensional standard Wiener process on a uniform mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
    pub seed: u64,
}

impl WienerPath {
    /// Sample `w` on `[0, horizon]` with step `dt`; `values[0] = 0`.
    pub fn sample(dt: f64, horizon: f64, seed: u64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        if !(horizon >= dt) || !horizon.is_finite() {
            return Err(Error::invalid(format!(
                "horizon must be at least dt, got horizon={horizon}, dt={dt}"
            )));
        }
        let steps = step_count(dt, horizon);
        let scale = dt.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(steps + 1);
        let mut w = 0.0;
        values.push(w);
        for _ in 0..steps {
            let z: f64 = StandardNormal.sample(&mut rng);
            w += scale * z;
            values.push(w);
        }
        Ok(WienerPath {
            t0: 0.0,
            dt,
            values,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.steps())
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap_or(&0.0)
    }

    /// Increment `w(t_{i+1}) - w(t_i)`.
    pub fn increment(&self, i: usize) -> f64 {
        self.values[i + 1] - self.values[i]
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }

    /// The same Brownian motion observed on a mesh `factor` times coarser.
    ///
    /// Coarse increments are sums of fine ones, so every coarse path in a
    /// convergence study is driven by one underlying realization.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor < 1 {
            return Err(Error::invalid("coarsening factor must be >= 1"));
        }
        if !self.steps().is_multiple_of(factor) {
            return Err(Error::invalid(format!(
                "coarsening factor {factor} does not divide {} steps",
                self.steps()
            )));
        }
        Ok(WienerPath {
            t0: self.t0,
            dt: self.dt * factor as f64,
            values: self.values.iter().copied().step_by(factor).collect(),
            seed: self.seed,
        })
    }
}

/// Piecewise-linear interpolant of a Wiener path through a subset of its
/// samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearNoise {
    knots: Vec<(f64, f64)>,
}

impl PiecewiseLinearNoise {
    /// Retain every `coarsening`-th sample as a knot. The final sample is
    /// always a knot, even when `coarsening` does not divide the length.
    pub fn lift(path: &WienerPath, coarsening: usize) -> Result<Self> {
        if coarsening < 1 {
            return Err(Error::invalid("coarsening must be >= 1"));
        }
        if path.len() < 2 {
            return Err(Error::invalid("path needs at least two samples"));
        }
        let last = path.len() - 1;
        let mut knots: Vec<(f64, f64)> = (0..=last)
            .step_by(coarsening)
            .map(|i| (path.time(i), path.values[i]))
            .collect();
        if !last.is_multiple_of(coarsening) {
            knots.push((path.time(last), path.values[last]));
        }
        Ok(PiecewiseLinearNoise { knots })
    }

    /// Build directly from knots; times must be strictly increasing.
    pub fn from_knots(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::invalid("need at least two knots"));
        }
        if knots.windows(2).any(|k| !(k[1].0 > k[0].0)) {
            return Err(Error::invalid("knot times must be strictly increasing"));
        }
        Ok(PiecewiseLinearNoise { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn intervals(&self) -> usize {
        self.knots.len() - 1
    }

    /// Constant slope of `w⁽ⁿ⁾` on interval `i`.
    pub fn slope(&self, i: usize) -> f64 {
        let (t0, w0) = self.knots[i];
        let (t1, w1) = self.knots[i + 1];
        (w1 - w0) / (t1 - t0)
    }

    fn interval_of(&self, t: f64) -> usize {
        let idx = self.knots.partition_point(|k| k.0 <= t);
        idx.saturating_sub(1).min(self.intervals() - 1)
    }

    /// Evaluate the interpolant; times outside the knot range extrapolate
    /// along the first or last segment.
    pub fn eval(&self, t: f64) -> f64 {
        let i = self.interval_of(t);
        let (ti, wi) = self.knots[i];
        let (tj, wj) = self.knots[i + 1];
        if t == tj {
            return wj;
        }
        wi + (wj - wi) / (tj - ti) * (t - ti)
    }
}
