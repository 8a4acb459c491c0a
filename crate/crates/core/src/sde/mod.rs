//! Wiener paths, noise conventions and fixed-step SDE integrators.

mod integrate;
mod system;
mod wiener;

pub use integrate::{
    euler_maruyama, euler_maruyama_fused, euler_maruyama_with, fmt_f64, heun_stratonovich, ode_drive, Trajectory,
    DIVERGENCE_BOUND,
};
pub use system::{Convention, JacobianField, SdeSystem, VectorField};
pub use wiener::{path_seed, PiecewiseLinearNoise, WienerPath};


pub(crate) use wiener::step_count;
