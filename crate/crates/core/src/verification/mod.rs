//! Numerical checks of the stability claims: generator scans, the SCLF
//! condition, Monte Carlo ensembles, the small control property and the
//! Wong–Zakai experiment.

mod convergence;
mod formulas;
mod grid;
mod montecarlo;
mod scan;
mod small_control;
pub mod stats;
mod wong_zakai;

pub use convergence::{strong_order_estimate, Integrator, StrongOrderReport, StrongOrderSpec};
pub use formulas::{
    bhb_closed_form, g_closed_form, lfv2_closed_form, lfv2_formula_check, Discrepancy, FormulaReport,
};
pub use grid::{Axis, GridSpec};
pub use montecarlo::{
    mc_stability, simulate_ensemble, BucketDrift, McConfig, PathOutcome, StabilityReport,
};
pub use scan::{scan_generator, sclf_condition_check, ScanReport, ScanSample, SclfReport, LGV_ZERO};
pub use small_control::{random_directions, small_control_scan, SmallControlReport};
pub use wong_zakai::{wong_zakai_experiment, WongZakaiConfig, WongZakaiReport};
