use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Vector field evaluated into a caller-provided buffer of length `dim`.
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Jacobian evaluated into a row-major `dim × dim` buffer.
pub type JacobianField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    Ito,
    Stratonovich,
}

/// `dx = f(x) dt + σ(x) dw` with one scalar noise channel.
#[derive(Clone)]
pub struct SdeSystem {
    dim: usize,
    drift: VectorField,
    diffusion: VectorField,
    diffusion_jacobian: Option<JacobianField>,
    convention: Convention,
}

impl fmt::Debug for SdeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeSystem")
            .field("dim", &self.dim)
            .field("convention", &self.convention)
            .field("analytic_jacobian", &self.diffusion_jacobian.is_some())
            .finish()
    }
}

impl SdeSystem {
    pub fn new<F, S>(dim: usize, drift: F, diffusion: S, convention: Convention) -> Result<Self>
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        S: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::invalid("system dimension must be positive"));
        }
        Ok(SdeSystem {
            dim,
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            diffusion_jacobian: None,
            convention,
        })
    }

    /// Attach an analytic `∂σ/∂x`, used instead of finite differences.
    pub fn with_diffusion_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.diffusion_jacobian = Some(Arc::new(jac));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }

    pub fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(x, out)
    }

    pub fn drift_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.drift(x, &mut out);
        out
    }

    pub fn diffusion_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.diffusion(x, &mut out);
        out
    }

    /// Row-major `∂σ/∂x`: analytic if supplied, otherwise central
    /// differences with `h_j = max(1e-6, 1e-6 |x_j|)`.
    pub fn diffusion_jacobian(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut jac = vec![0.0; n * n];
        if let Some(j) = &self.diffusion_jacobian {
            j(x, &mut jac);
            return jac;
        }
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        let mut sp = vec![0.0; n];
        let mut sm = vec![0.0; n];
        for j in 0..n {
            let h = (1e-6 * x[j].abs()).max(1e-6);
            xp[j] = x[j] + h;
            xm[j] = x[j] - h;
            self.diffusion(&xp, &mut sp);
            self.diffusion(&xm, &mut sm);
            for i in 0..n {
                jac[i * n + j] = (sp[i] - sm[i]) / (2.0 * h);
            }
            xp[j] = x[j];
            xm[j] = x[j];
        }
        jac
    }

    /// The Ito form of a Stratonovich system: drift `f + ½(∂σ/∂x)σ`,
    /// diffusion unchanged.
    pub fn stratonovich_to_ito(&self) -> Result<SdeSystem> {
        if self.convention != Convention::Stratonovich {
            return Err(Error::invalid(
                "stratonovich_to_ito needs a Stratonovich system",
            ));
        }
        let source = self.clone();
        let n = self.dim;
        let drift = move |x: &[f64], out: &mut [f64]| {
            source.drift(x, out);
            let sigma = source.diffusion_vec(x);
            let jac = source.diffusion_jacobian(x);
            for i in 0..n {
                let row = &jac[i * n..(i + 1) * n];
                let corr: f64 = row.iter().zip(&sigma).map(|(a, b)| a * b).sum();
                out[i] += 0.5 * corr;
            }
        };
        Ok(SdeSystem {
            dim: n,
            drift: Arc::new(drift),
            diffusion: self.diffusion.clone(),
            diffusion_jacobian: self.diffusion_jacobian.clone(),
            convention: Convention::Ito,
        })
    }
}
