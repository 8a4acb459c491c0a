//! C ABI for the `stostab` core.
//!
//! Every fallible call returns a [`StostabStatus`]; on failure the message
//! is available from [`stostab_last_error_message`] on the same thread.
//! Vectors are passed as `double` arrays: states have length 3, controls
//! length 2, Hessians are 9 entries in row-major order.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::Vector3;
use stostab::brockett::{ClosedLoop, DiffusionDesign, SystemParams};
use stostab::lyapunov::{v2_gradient, v2_hessian, v2_value};
use stostab::verification::{mc_stability, scan_generator, GridSpec, McConfig};
use stostab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StostabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidDesign = 3,
    Diverged = 4,
    Config = 5,
    Io = 6,
    Panic = 7,
}

/// Closed-loop randomized Brockett integrator. Create with
/// `stostab_closed_loop_new`, release with `stostab_closed_loop_free`.
pub struct StostabClosedLoop {
    inner: ClosedLoop,
}

/// Summary of a generator scan over `[grid_min, grid_max]^3`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct StostabScanSummary {
    pub n_points: usize,
    pub n_violations: usize,
    pub min_lv: f64,
    pub max_lv: f64,
    pub argmax: [f64; 3],
    /// Grid points on the x3 axis and how many of them violate.
    pub m_count: usize,
    pub m_violations: usize,
}

/// Monte Carlo settings. `m_level <= 0` selects `10 V2(x0)`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct StostabMcConfig {
    pub x0: [f64; 3],
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub eps: f64,
    pub conv_threshold: f64,
    pub m_level: f64,
    pub buckets: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct StostabMcSummary {
    pub n_paths: usize,
    pub n_diverged: usize,
    pub v2_initial: f64,
    pub m_level: f64,
    pub p_sup_exceed: f64,
    pub p_sup_exceed_halfwidth: f64,
    pub p_converge: f64,
    pub p_converge_halfwidth: f64,
    pub sup_v2_exceedance: f64,
    pub sup_v2_exceedance_halfwidth: f64,
    pub v2_terminal_q05: f64,
    pub v2_terminal_q50: f64,
    pub v2_terminal_q95: f64,
    pub median_terminal_norm: f64,
    /// Largest bucket mean drift of V2 in standard errors.
    pub worst_drift_ratio: f64,
    pub kushner_ok: bool,
    /// Every bucket drift is at most 2 standard errors above zero.
    pub supermartingale_ok: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: StostabStatus, msg: impl Into<String>) -> StostabStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> StostabStatus {
    let status = match &e {
        Error::InvalidArgument(_) => StostabStatus::InvalidArgument,
        Error::InvalidDesign { .. } => StostabStatus::InvalidDesign,
        Error::Diverged { .. } => StostabStatus::Diverged,
        Error::Config(_) => StostabStatus::Config,
        Error::Io(_) => StostabStatus::Io,
    };
    fail(status, e.to_string())
}

fn guard<F: FnOnce() -> Result<(), StostabStatus>>(f: F) -> StostabStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => StostabStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(StostabStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn state(x: *const f64) -> Result<Vector3<f64>, StostabStatus> {
    if x.is_null() {
        return Err(fail(StostabStatus::NullPointer, "state pointer is null"));
    }
    let s = std::slice::from_raw_parts(x, 3);
    Ok(Vector3::new(s[0], s[1], s[2]))
}

unsafe fn write(out: *mut f64, values: &[f64]) -> Result<(), StostabStatus> {
    if out.is_null() {
        return Err(fail(StostabStatus::NullPointer, "output pointer is null"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

unsafe fn handle<'a>(cl: *const StostabClosedLoop) -> Result<&'a ClosedLoop, StostabStatus> {
    cl.as_ref()
        .map(|h| &h.inner)
        .ok_or_else(|| fail(StostabStatus::NullPointer, "closed loop handle is null"))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn stostab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn stostab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

unsafe fn new_loop(
    b: [f64; 4],
    design: impl FnOnce() -> stostab::Result<DiffusionDesign>,
    out: *mut *mut StostabClosedLoop,
) -> Result<(), StostabStatus> {
    if out.is_null() {
        return Err(fail(StostabStatus::NullPointer, "output handle pointer is null"));
    }
    *out = ptr::null_mut();
    let p = SystemParams::new(b[0], b[1], b[2], b[3]).map_err(from_error)?;
    let d = design().map_err(from_error)?;
    let inner = ClosedLoop::new(p, d).map_err(from_error)?;
    *out = Box::into_raw(Box::new(StostabClosedLoop { inner }));
    Ok(())
}

/// Closed loop with the eigenvector diffusion design scaled by `k1`, `k2`.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn stostab_closed_loop_new(
    b1: f64,
    b2: f64,
    b3: f64,
    b4: f64,
    k1: f64,
    k2: f64,
    out: *mut *mut StostabClosedLoop,
) -> StostabStatus {
    guard(|| new_loop([b1, b2, b3, b4], || DiffusionDesign::eigen_scaled(k1, k2), out))
}

/// Closed loop with constant diffusion coefficients `(c1, c2)`; only
/// `c1 = c2 = 0` passes the origin condition.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn stostab_closed_loop_new_constant(
    b1: f64,
    b2: f64,
    b3: f64,
    b4: f64,
    c1: f64,
    c2: f64,
    out: *mut *mut StostabClosedLoop,
) -> StostabStatus {
    guard(|| new_loop([b1, b2, b3, b4], || DiffusionDesign::constant(c1, c2), out))
}

/// # Safety
/// `cl` must be NULL or a handle from `stostab_closed_loop_new*` that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn stostab_closed_loop_free(cl: *mut StostabClosedLoop) {
    if !cl.is_null() {
        drop(Box::from_raw(cl));
    }
}

/// Closed-loop drift `f + g u` at `x`, written to `out[3]`.
///
/// # Safety
/// `cl` must be a live handle, `x` readable for 3 and `out` writable for 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn stostab_closed_loop_drift(
    cl: *const StostabClosedLoop,
    x: *const f64,
    out: *mut f64,
) -> StostabStatus {
    guard(|| write(out, handle(cl)?.drift(&state(x)?).as_slice()))
}

/// Diffusion vector at `x`, written to `out[3]`.
///
/// # Safety
/// As for `stostab_closed_loop_drift`.
#[no_mangle]
pub unsafe extern "C" fn stostab_closed_loop_diffusion(
    cl: *const StostabClosedLoop,
    x: *const f64,
    out: *mut f64,
) -> StostabStatus {
    guard(|| write(out, handle(cl)?.sigma(&state(x)?).as_slice()))
}

/// Sontag control at `x`, written to `out[2]`.
///
/// # Safety
/// `cl` must be a live handle, `x` readable for 3 and `out` writable for 2 doubles.
#[no_mangle]
pub unsafe extern "C" fn stostab_closed_loop_control(
    cl: *const StostabClosedLoop,
    x: *const f64,
    out: *mut f64,
) -> StostabStatus {
    guard(|| write(out, handle(cl)?.control(&state(x)?).as_slice()))
}

/// Closed-loop generator of V2 at `x`.
///
/// # Safety
/// `cl` must be a live handle, `x` readable for 3 doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn stostab_closed_loop_generator(
    cl: *const StostabClosedLoop,
    x: *const f64,
    out: *mut f64,
) -> StostabStatus {
    guard(|| write(out, &[handle(cl)?.eval(&state(x)?).generator]))
}

/// # Safety
/// `x` readable for 3 doubles, `out` writable for 1.
#[no_mangle]
pub unsafe extern "C" fn stostab_v2_value(x: *const f64, out: *mut f64) -> StostabStatus {
    guard(|| write(out, &[v2_value(&state(x)?)]))
}

/// # Safety
/// `x` readable and `out` writable for 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn stostab_v2_gradient(x: *const f64, out: *mut f64) -> StostabStatus {
    guard(|| write(out, v2_gradient(&state(x)?).as_slice()))
}

/// Row-major Hessian (it is symmetric, so the order only matters for
/// roundoff-level asymmetry).
///
/// # Safety
/// `x` readable for 3 doubles, `out` writable for 9.
#[no_mangle]
pub unsafe extern "C" fn stostab_v2_hessian(x: *const f64, out: *mut f64) -> StostabStatus {
    guard(|| write(out, v2_hessian(&state(x)?).transpose().as_slice()))
}

/// Scans the closed-loop generator over a `count^3` grid on
/// `[grid_min, grid_max]^3` without the ball of radius `exclusion`.
///
/// # Safety
/// `cl` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn stostab_scan_generator(
    cl: *const StostabClosedLoop,
    grid_min: f64,
    grid_max: f64,
    count: usize,
    exclusion: f64,
    out: *mut StostabScanSummary,
) -> StostabStatus {
    guard(|| {
        let cl = handle(cl)?;
        if out.is_null() {
            return Err(fail(StostabStatus::NullPointer, "output pointer is null"));
        }
        let grid = GridSpec::cube(grid_min, grid_max, count, exclusion).map_err(from_error)?;
        let r = scan_generator(cl, &grid);
        *out = StostabScanSummary {
            n_points: r.samples.len(),
            n_violations: r.violations.len(),
            min_lv: r.min_lv,
            max_lv: r.max_lv,
            argmax: [r.argmax.x, r.argmax.y, r.argmax.z],
            m_count: r.m_count,
            m_violations: r.m_violations,
        };
        Ok(())
    })
}

/// Fills `out` with the reference Monte Carlo settings.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stostab_mc_config_default(out: *mut StostabMcConfig) -> StostabStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(StostabStatus::NullPointer, "output pointer is null"));
        }
        let c = McConfig::new(Vector3::new(0.0, 0.0, 1.0), 1e-3, 50.0, 200, 20240601);
        *out = StostabMcConfig {
            x0: [c.x0.x, c.x0.y, c.x0.z],
            dt: c.dt,
            horizon: c.horizon,
            n_paths: c.n_paths,
            seed: c.seed,
            eps: c.eps,
            conv_threshold: c.conv_threshold,
            m_level: 0.0,
            buckets: c.buckets,
        };
        Ok(())
    })
}

/// Runs the Monte Carlo stability ensemble (at least 100 paths).
///
/// # Safety
/// `cl` must be a live handle, `cfg` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn stostab_mc_stability(
    cl: *const StostabClosedLoop,
    cfg: *const StostabMcConfig,
    out: *mut StostabMcSummary,
) -> StostabStatus {
    guard(|| {
        let cl = handle(cl)?;
        let (Some(c), false) = (cfg.as_ref(), out.is_null()) else {
            return Err(fail(StostabStatus::NullPointer, "config or output pointer is null"));
        };
        let mut mc = McConfig::new(Vector3::from(c.x0), c.dt, c.horizon, c.n_paths, c.seed);
        mc.eps = c.eps;
        mc.conv_threshold = c.conv_threshold;
        mc.m_level = (c.m_level > 0.0).then_some(c.m_level);
        mc.buckets = c.buckets;
        let r = mc_stability(cl, &mc).map_err(from_error)?;
        let (q05, q50, q95) = r.v2_terminal_quantiles;
        *out = StostabMcSummary {
            n_paths: r.n_paths,
            n_diverged: r.n_diverged,
            v2_initial: r.v2_initial,
            m_level: r.m_level,
            p_sup_exceed: r.p_sup_exceed,
            p_sup_exceed_halfwidth: r.p_sup_exceed_halfwidth,
            p_converge: r.p_converge,
            p_converge_halfwidth: r.p_converge_halfwidth,
            sup_v2_exceedance: r.sup_v2_exceedance,
            sup_v2_exceedance_halfwidth: r.sup_v2_exceedance_halfwidth,
            v2_terminal_q05: q05,
            v2_terminal_q50: q50,
            v2_terminal_q95: q95,
            median_terminal_norm: r.median_terminal_norm,
            worst_drift_ratio: r.worst_drift_ratio(),
            kushner_ok: r.kushner_ok(),
            supermartingale_ok: r.supermartingale_ok(2.0),
        };
        Ok(())
    })
}
