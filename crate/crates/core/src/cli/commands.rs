use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{parse_list, Layers};
use super::{
    CommonArgs, ControllabilityArgs, DesignArgs, GridArgs, ScanArgs, SimulateArgs, WongZakaiArgs, EXIT_DIVERGED,
    EXIT_OK, EXIT_VERIFY,
};
use crate::brockett::{check_design_conditions, controllability_rank, ClosedLoop, DiffusionDesign, SystemParams, LIMIT_RADII};
use crate::error::{Error, Result};
use crate::lyapunov::v2_value;
use crate::sde::fmt_f64;
use crate::verification::{
    scan_generator, simulate_ensemble, small_control_scan, wong_zakai_experiment, GridSpec, McConfig, ScanReport,
    WongZakaiConfig,
};
use crate::VERSION;

/// Every key a config file may contain.
const KNOWN_KEYS: &[&str] = &[
    "seed", "out", "n_paths", "dt", "horizon", "b1", "b2", "b3", "b4", "k1", "k2", "x0", "design", "c1", "c2",
    "thin", "eps", "conv_threshold", "m_level", "buckets", "grid_min", "grid_max", "grid_count", "exclusion",
    "full", "n_dirs", "meshes", "n_real", "fine_steps", "substeps", "n_points", "range",
];

const DEFAULT_SEED: u64 = 20240601;

/// Wall-clock time, or `SOURCE_DATE_EPOCH` when set so that repeated runs
/// can produce identical files.
fn timestamp() -> String {
    let t = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|s| DateTime::<Utc>::from_timestamp(s, 0))
        .unwrap_or_else(Utc::now);
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Settings common to all commands, resolved once.
struct Session {
    command: &'static str,
    layers: Layers,
    seed: u64,
    out: PathBuf,
}

impl Session {
    fn open(command: &'static str, common: &CommonArgs) -> Result<Self> {
        let mut layers = Layers::load(common.config.as_deref())?;
        layers.check_known(KNOWN_KEYS)?;
        let seed = layers.get("seed", common.seed, DEFAULT_SEED)?;
        let out = layers.get("out", common.out.clone(), "out".to_string())?;
        Ok(Session {
            command,
            layers,
            seed,
            out: PathBuf::from(out),
        })
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec![
            format!("stostab {VERSION}"),
            format!("command = {}", self.command),
            format!("seed = {}", self.seed),
            format!("timestamp = {}", timestamp()),
        ];
        for (k, v) in self.layers.resolved() {
            h.push(format!("config.{k} = {v}"));
        }
        h
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        Ok(BufWriter::new(File::create(path)?))
    }

    /// Header comment lines followed by `body`.
    fn write_text(&self, name: &str, body: &str) -> Result<()> {
        let mut w = self.create(name)?;
        for line in self.header() {
            writeln!(w, "# {line}")?;
        }
        w.write_all(body.as_bytes())?;
        w.flush()?;
        Ok(())
    }
}

fn model(s: &mut Session, c: &CommonArgs) -> Result<(SystemParams, DiffusionDesign)> {
    let l = &mut s.layers;
    let p = SystemParams::new(
        l.get("b1", c.b1, 1.0)?,
        l.get("b2", c.b2, 1.0)?,
        l.get("b3", c.b3, 4.0)?,
        l.get("b4", c.b4, 4.0)?,
    )?;
    let kind = l.get("design", c.design.clone(), "eigen".to_string())?;
    let d = match kind.as_str() {
        "eigen" => DiffusionDesign::eigen_scaled(l.get("k1", c.k1, 1e-4)?, l.get("k2", c.k2, 1e-4)?)?,
        "constant" => DiffusionDesign::constant(l.get("c1", c.c1, 1.0)?, l.get("c2", c.c2, 0.0)?)?,
        other => return Err(Error::Config(format!("design must be `eigen` or `constant`, got `{other}`"))),
    };
    s.layers.note("design_resolved", d.describe());
    Ok((p, d))
}

fn state3(s: &mut Session, c: &CommonArgs) -> Result<Vector3<f64>> {
    let v: Vec<f64> = s.layers.get_list("x0", c.x0.clone(), &[0.0, 0.0, 1.0])?;
    if v.len() != 3 || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config(format!("x0 needs three finite values, got {v:?}")));
    }
    Ok(Vector3::new(v[0], v[1], v[2]))
}

fn grid_cube(s: &mut Session, g: &GridArgs) -> Result<(f64, f64, usize, f64)> {
    let l = &mut s.layers;
    Ok((
        l.get("grid_min", g.grid_min, -2.0)?,
        l.get("grid_max", g.grid_max, 2.0)?,
        l.get("grid_count", g.grid_count, 41)?,
        l.get("exclusion", g.exclusion, 1e-3)?,
    ))
}

pub fn simulate(a: &SimulateArgs) -> Result<i32> {
    let mut s = Session::open("simulate", &a.common)?;
    let (p, d) = model(&mut s, &a.common)?;
    let x0 = state3(&mut s, &a.common)?;
    let l = &mut s.layers;
    let mut cfg = McConfig::new(
        x0,
        l.get("dt", a.common.dt, 1e-3)?,
        l.get("horizon", a.common.horizon, 50.0)?,
        l.get("n_paths", a.common.n_paths, 200)?,
        s.seed,
    );
    cfg.eps = l.get("eps", a.eps, 5.0)?;
    cfg.conv_threshold = l.get("conv_threshold", a.conv_threshold, 0.1)?;
    cfg.m_level = Some(l.get("m_level", a.m_level, 10.0 * v2_value(&x0))?);
    cfg.buckets = l.get("buckets", a.buckets, 50)?;
    cfg.record_every = Some(l.get("thin", a.thin, 100)?);

    let cl = ClosedLoop::new(p, d)?;
    let report = simulate_ensemble(&cl, &cfg)?;

    let width = (report.n_paths.max(2) - 1).to_string().len().max(4);
    for path in &report.paths {
        let Some(tr) = &path.trajectory else { continue };
        let mut comments = s.header();
        comments.push(format!("path = {}", path.index));
        comments.push(format!("path_seed = {}", path.seed));
        comments.push(format!("diverged = {}", path.diverged));
        let mut w = s.create(&format!("trajectories/path_{:0width$}.csv", path.index))?;
        tr.write_csv(&mut w, &comments)?;
        w.flush()?;
    }

    let mut table = String::from("index,seed,diverged,x1,x2,x3,sup_norm,sup_v2,terminal_v2\n");
    for p in &report.paths {
        let _ = writeln!(
            table,
            "{},{},{},{},{},{},{},{},{}",
            p.index,
            p.seed,
            p.diverged,
            fmt_f64(p.terminal.x),
            fmt_f64(p.terminal.y),
            fmt_f64(p.terminal.z),
            fmt_f64(p.sup_norm),
            fmt_f64(p.sup_v2),
            fmt_f64(p.terminal_v2())
        );
    }
    s.write_text("ensemble.csv", &table)?;
    let summary = format!(
        "{}median_decreased = {}\n",
        report.to_kv(),
        report.median_decreased()
    );
    s.write_text("summary.txt", &summary)?;

    println!(
        "simulate: {} paths, {} diverged, median terminal V2 {:e} (V2(x0) = {:e}), p_converge {:.3}",
        report.n_paths, report.n_diverged, report.v2_terminal_quantiles.1, report.v2_initial, report.p_converge
    );
    println!("wrote {}", s.out.display());
    if report.n_diverged == report.n_paths {
        eprintln!("every path diverged");
        return Ok(EXIT_DIVERGED);
    }
    Ok(EXIT_OK)
}

fn scan_summary(name: &str, r: &ScanReport) -> String {
    format!(
        "{name}.points = {}\n{name}.violations = {}\n{name}.min_lv = {:e}\n{name}.argmin = {},{},{}\n\
         {name}.max_lv = {:e}\n{name}.argmax = {},{},{}\n{name}.m_points = {}\n{name}.m_violations = {}\n{name}.m_max_lv = {:e}\n",
        r.samples.len(),
        r.violations.len(),
        r.min_lv,
        r.argmin.x,
        r.argmin.y,
        r.argmin.z,
        r.max_lv,
        r.argmax.x,
        r.argmax.y,
        r.argmax.z,
        r.m_count,
        r.m_violations,
        r.m_max_lv
    )
}

pub fn scan_lv(a: &ScanArgs) -> Result<i32> {
    let mut s = Session::open("scan-lv", &a.common)?;
    let (p, d) = model(&mut s, &a.common)?;
    let (min, max, count, excl) = grid_cube(&mut s, &a.grid)?;
    let full = s.layers.get("full", a.full, true)?;
    let cl = ClosedLoop::new(p, d)?;

    let mut reports = vec![("slice", scan_generator(&cl, &GridSpec::slice(min, max, count, 1, 0.0, excl)?))];
    if full {
        reports.push(("grid", scan_generator(&cl, &GridSpec::cube(min, max, count, excl)?)));
    }
    let mut summary = String::new();
    let mut violations = 0;
    for (name, r) in &reports {
        let mut w = s.create(&format!("scan_{name}.csv"))?;
        r.write_csv(&mut w, &s.header())?;
        w.flush()?;
        summary.push_str(&scan_summary(name, r));
        violations += r.violations.len();
        println!(
            "scan-lv {name}: {} points, {} violations, max LV {:e}",
            r.samples.len(),
            r.violations.len(),
            r.max_lv
        );
    }
    let _ = writeln!(summary, "pass = {}", violations == 0);
    s.write_text("scan_summary.txt", &summary)?;
    Ok(if violations == 0 { EXIT_OK } else { EXIT_VERIFY })
}

pub fn check_design(a: &DesignArgs) -> Result<i32> {
    let mut s = Session::open("check-design", &a.common)?;
    let (p, d) = model(&mut s, &a.common)?;
    let (min, max, count, excl) = grid_cube(&mut s, &a.grid)?;
    let n_dirs = s.layers.get("n_dirs", a.n_dirs, 1000)?;

    let report = check_design_conditions(&p, &d, &GridSpec::cube(min, max, count, excl)?);
    let mut failed: Vec<&str> = report.failed();
    let mut body = String::new();
    for c in &report.conditions {
        let _ = writeln!(body, "{}.pass = {}", c.name, c.passed);
        let _ = writeln!(body, "{}.statement = {}", c.name, c.statement);
        let _ = writeln!(body, "{}.detail = {}", c.name, c.detail);
        if !c.sequence.is_empty() {
            let seq: Vec<String> = c.sequence.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(body, "{}.sequence = {}", c.name, seq.join(","));
        }
    }
    let radii: Vec<String> = LIMIT_RADII.iter().map(|r| format!("{r:e}")).collect();
    let _ = writeln!(body, "small_control.radii = {}", radii.join(","));
    match ClosedLoop::new(p, d) {
        Ok(cl) => {
            let sc = small_control_scan(&cl, &LIMIT_RADII, n_dirs, s.seed)?;
            let pass = sc.non_increasing() && sc.final_value() < LIMIT_RADII[LIMIT_RADII.len() - 1];
            let vals: Vec<String> = sc.max_norms.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(body, "small_control.max_norm = {}", vals.join(","));
            let _ = writeln!(body, "small_control.n_dirs = {n_dirs}");
            let _ = writeln!(body, "small_control.pass = {pass}");
            if !pass {
                failed.push("small_control");
            }
        }
        Err(e) => {
            let _ = writeln!(body, "small_control.pass = false");
            let _ = writeln!(body, "small_control.detail = not evaluated: {e}");
            failed.push("small_control");
        }
    }
    let _ = writeln!(body, "failed = {}", failed.join(","));
    let _ = writeln!(body, "pass = {}", failed.is_empty());
    s.write_text("design_report.txt", &body)?;

    if failed.is_empty() {
        println!("check-design: all conditions pass");
        Ok(EXIT_OK)
    } else {
        eprintln!("check-design: failed {}", failed.join(", "));
        Ok(EXIT_VERIFY)
    }
}

pub fn wong_zakai(a: &WongZakaiArgs) -> Result<i32> {
    let mut s = Session::open("wong-zakai", &a.common)?;
    let l = &mut s.layers;
    let x0_flag = match &a.common.x0 {
        Some(v) => Some(parse_list::<f64>("x0", v)?),
        None => None,
    };
    let x0 = match x0_flag {
        Some(v) if v.len() == 1 => Some(v[0]),
        Some(v) => return Err(Error::Config(format!("wong-zakai takes a scalar x0, got {v:?}"))),
        None => None,
    };
    let mut cfg = WongZakaiConfig::new(
        l.get("x0", x0, 1.0)?,
        l.get("horizon", a.common.horizon, 1.0)?,
        l.get_list("meshes", a.meshes.clone(), &[16usize, 64, 256, 1024])?,
        l.get("n_real", a.n_real, 100)?,
        s.seed,
    );
    cfg.fine_steps = l.get("fine_steps", a.fine_steps, 4096)?;
    cfg.substeps = l.get("substeps", a.substeps, 4)?;

    let r = wong_zakai_experiment(&cfg)?;
    let mut w = s.create("wong_zakai.csv")?;
    r.write_csv(&mut w, &s.header())?;
    w.flush()?;
    let expected = -0.5 * cfg.horizon;
    let ito_ok = (r.ito_log_ratio_mean - expected).abs() <= 0.1;
    let body = format!(
        "ito_log_ratio_mean = {:e}\nito_log_ratio_se = {:e}\nito_log_ratio_expected = {:e}\nito_ok = {ito_ok}\n\
         terminal_non_increasing = {}\npath_non_increasing = {}\n",
        r.ito_log_ratio_mean,
        r.ito_log_ratio_se,
        expected,
        r.terminal_non_increasing(),
        r.path_non_increasing()
    );
    s.write_text("wong_zakai_summary.txt", &body)?;
    let pass = ito_ok && r.terminal_non_increasing();
    println!(
        "wong-zakai: terminal MSE {:?}, Ito log-ratio {:.4} (expected {expected})",
        r.mse_terminal, r.ito_log_ratio_mean
    );
    Ok(if pass { EXIT_OK } else { EXIT_VERIFY })
}

pub fn controllability(a: &ControllabilityArgs) -> Result<i32> {
    let mut s = Session::open("controllability", &a.common)?;
    let l = &mut s.layers;
    let p = SystemParams::new(
        l.get("b1", a.common.b1, 1.0)?,
        l.get("b2", a.common.b2, 1.0)?,
        l.get("b3", a.common.b3, 4.0)?,
        l.get("b4", a.common.b4, 4.0)?,
    )?;
    let n = l.get("n_points", a.n_points, 100)?;
    let range = l.get("range", a.range, 3.0)?;
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::Config("range must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut low = Vec::new();
    let mut min_rank = 3;
    for _ in 0..n {
        let x = Vector3::from_fn(|_, _| rng.random_range(-range..=range));
        let r = controllability_rank(&p, &x);
        min_rank = min_rank.min(r);
        if r < 3 {
            low.push(x);
        }
    }
    let body = format!("points = {n}\nmin_rank = {min_rank}\nrank_deficient = {}\npass = {}\n", low.len(), low.is_empty());
    s.write_text("controllability.txt", &body)?;
    println!("controllability: min rank {min_rank} over {n} points");
    Ok(if low.is_empty() { EXIT_OK } else { EXIT_VERIFY })
}
