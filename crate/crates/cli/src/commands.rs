//! The five commands. Each run writes its own files; sweeps fan out over rayon.

use crate::config::{parse_list, Flags, Format, Settings};
use crate::{suites, CliError};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sigma2_gluing::delaunay_family::{ball_neck_estimates, DelaunayFamily, FamilyParams};
use sigma2_gluing::delaunay_ode::{period, verify_neck_estimates, DelaunayOrbit, DelaunayParams, NeckReport};
use sigma2_gluing::emit::{csv_table, to_json_string};
use sigma2_gluing::function_spaces::MAX_DEGREE;
use sigma2_gluing::gluing_engine::{f_g_coefficients, glue_demo, GluingConfig};
use sigma2_gluing::linearized_solver::{calibrate_cnk_mode, log_grid, reference_cnk, weighted_solve_report, ModeOperator};
use std::path::Path;

fn value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.display().to_string(), source };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, text).map_err(io)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    write(path, &to_json_string(v))
}

/// Columns as CSV or as a JSON object of arrays.
fn write_table(s: &Settings, stem: &str, suffix: &str, header: &[&str], rows: Vec<Vec<f64>>) -> Result<(), CliError> {
    let path = s.path(stem, suffix, s.format.ext());
    match s.format {
        Format::Csv => write(&path, &csv_table(header, rows)),
        Format::Json => {
            let mut obj = serde_json::Map::new();
            for (j, h) in header.iter().enumerate() {
                obj.insert(h.to_string(), Value::from(rows.iter().map(|r| r[j]).collect::<Vec<f64>>()));
            }
            write_json(&path, &Value::Object(obj))
        }
    }
}

/// Runs every sweep point in parallel and returns the results in sweep order.
fn fan_out<T: Send>(s: &Settings, f: impl Fn(&str, &Settings) -> Result<T, CliError> + Sync) -> Result<Vec<(String, Settings, T)>, CliError> {
    s.runs().into_par_iter().map(|(suffix, run)| f(&suffix, &run).map(|t| (suffix, run, t))).collect::<Vec<_>>().into_iter().collect()
}

fn sweep_value(s: &Settings, run: &Settings) -> f64 {
    match s.sweep.as_ref().map(|sw| sw.key.as_str()) {
        Some("s") => run.s,
        Some("b") => run.b,
        Some("l") => run.l.unwrap_or(f64::NAN),
        Some("tol") => run.tol.unwrap_or(f64::NAN),
        Some("tmax") => run.tmax,
        Some("gamma") => run.gamma,
        _ => run.eps,
    }
}

pub fn orbit(flags: &Flags) -> Result<(), CliError> {
    let (s, _) = Settings::resolve(flags, 0.1)?;
    let reports = fan_out(&s, |suffix, run| -> Result<NeckReport, CliError> {
        let params = DelaunayParams::new(run.n, run.k, run.eps)?;
        let tol = run.tol.unwrap_or(1e-10);
        let o = DelaunayOrbit::integrate(params, run.tmax, tol)?;
        match run.format {
            Format::Csv => write(&run.path("orbit", suffix, "csv"), &o.to_csv())?,
            Format::Json => write_json(&run.path("orbit", suffix, "json"), &o.to_json())?,
        }
        let neck = verify_neck_estimates(&o);
        let report = json!({
            "params": value(&params),
            "tmax": run.tmax,
            "tol": tol,
            "energy": o.energy,
            "relative_drift": o.relative_drift(),
            "hmin": o.hmin,
            "period": period(&o).ok(),
            "neck": value(&neck),
        });
        write_json(&run.path("report", suffix, "json"), &report)?;
        Ok(neck)
    })?;
    if let Some(sw) = &s.sweep {
        let rows = reports.iter().map(|(_, run, r)| vec![sweep_value(&s, run), r.ratio_v, r.ratio_vdot, r.ratio_vddot]).collect();
        write_table(&s, "neck_ratios", "", &[sw.key.as_str(), "ratio_v", "ratio_vdot", "ratio_vddot"], rows)?;
    }
    Ok(())
}

pub fn family(flags: &Flags) -> Result<(), CliError> {
    let (s, _) = Settings::resolve(flags, 0.1)?;
    fan_out(&s, |suffix, run| {
        let base = DelaunayParams::new(run.n, run.k, run.eps)?;
        let params = FamilyParams::with_neck_offset(base, run.b, vec![0.0; run.n], run.s)?;
        let r_scale = params.r_scale;
        let fam = DelaunayFamily::build(params, 1e-3, run.tol.unwrap_or(1e-11))?;
        let radii = log_grid(1e-3, 1.0, 401);
        let rows = radii
            .iter()
            .map(|&r| fam.radial_derivatives(r).map(|(u, du, d2u)| vec![r, u, du, d2u]))
            .collect::<sigma2_gluing::Result<Vec<_>>>()?;
        write_table(run, "family", suffix, &["r", "u", "r_du", "r2_d2u"], rows)?;
        let config = GluingConfig { n: run.n, eps: run.eps, s: run.s, ..GluingConfig::default() };
        let report = json!({
            "n": run.n,
            "k": run.k,
            "eps": run.eps,
            "b": run.b,
            "R": r_scale,
            "s": run.s,
            "r_eps": run.eps.powf(run.s),
            "ball_neck": value(&ball_neck_estimates(&fam, 1e-3, 400)?),
            "fg": value(&f_g_coefficients(&config, &fam, run.b)?),
        });
        write_json(&run.path("family_report", suffix, "json"), &report)
    })?;
    Ok(())
}

pub fn solve_mode(flags: &Flags) -> Result<(), CliError> {
    let (s, _) = Settings::resolve(flags, 0.1)?;
    if s.k != 2 {
        return Err(CliError::Validation(format!("solve-mode needs k = 2, got k = {}", s.k)));
    }
    fan_out(&s, |suffix, run| {
        let l = run.l.unwrap_or(0.0);
        if !(l >= 0.0 && l.fract() == 0.0 && l <= MAX_DEGREE as f64) {
            return Err(CliError::Validation(format!("mode degree --l must be an integer in [0, {MAX_DEGREE}], got {l}")));
        }
        let degree = l as usize;
        let params = DelaunayParams::new(run.n, run.k, run.eps)?;
        let o = DelaunayOrbit::integrate(params, run.tmax.max(11.0), run.tol.unwrap_or(1e-11))?;
        let op = ModeOperator::from_orbit(&o, degree, 0.0, 10.0, reference_cnk(run.n))?;
        let (w, report) = weighted_solve_report(&op, run.gamma, 0.5)?;
        let calibration = calibrate_cnk_mode(&o, degree, -10.0, 10.0)?;
        write_table(run, "solve_mode", suffix, &["t", "w"], op.t.iter().zip(&w).map(|(t, w)| vec![*t, *w]).collect())?;
        let out = json!({ "gamma": run.gamma, "solver": value(&report), "calibration": value(&calibration), "reference_c_nk": reference_cnk(run.n) });
        write_json(&run.path("solve_mode_report", suffix, "json"), &out)
    })?;
    Ok(())
}

pub fn verify(flags: &Flags, suite: Option<&str>) -> Result<(), CliError> {
    let (s, table) = Settings::resolve(flags, 0.1)?;
    if s.k != 2 {
        return Err(CliError::Validation(format!("the invariant suites need k = 2, got k = {}", s.k)));
    }
    let params = DelaunayParams::new(s.n, s.k, s.eps)?;
    let choice = match suite {
        Some(x) => x.to_string(),
        None => crate::config::from_file::<String>(&table, "suite")?.unwrap_or_else(|| "all".into()),
    };
    let names: Vec<&str> = if choice == "all" { suites::SUITES.to_vec() } else { choice.split(',').map(str::trim).collect() };
    if let Some(bad) = names.iter().find(|x| !suites::SUITES.contains(x)) {
        return Err(CliError::Validation(format!("unknown suite `{bad}`; choose from all, {}", suites::SUITES.join(", "))));
    }
    let results = names.par_iter().map(|name| suites::run(name, params)).collect::<sigma2_gluing::Result<Vec<_>>>()?;
    for r in &results {
        println!("{} {}", if r.passed { "PASS" } else { "FAIL" }, r.name);
    }
    let passed = results.iter().all(|r| r.passed);
    let report = json!({
        "params": value(&params),
        "passed": passed,
        "suites": results.iter().map(|r| r.to_json()).collect::<Vec<_>>(),
    });
    write_json(&s.path("verify", "", "json"), &report)?;
    if passed {
        Ok(())
    } else {
        let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
        Err(CliError::VerifyFailed(failed.join(", ")))
    }
}

fn gluing_config(run: &Settings) -> GluingConfig {
    let d = GluingConfig::default();
    GluingConfig { n: run.n, eps: run.eps, s: run.s, l: run.l.unwrap_or(d.l), tol: run.tol.unwrap_or(d.tol), ..d }
}

pub fn glue(flags: &Flags, eps_sweep: Option<&str>) -> Result<(), CliError> {
    let (s, table) = Settings::resolve(flags, 0.05)?;
    if s.k != 2 {
        return Err(CliError::Validation(format!("the gluing model needs k = 2, got k = {}", s.k)));
    }
    let sweep_text = match eps_sweep {
        Some(x) => Some(x.to_string()),
        None => crate::config::from_file::<String>(&table, "eps_sweep")?,
    };
    if let Some(text) = sweep_text {
        let eps = parse_list(&text)?;
        let base = gluing_config(&s);
        let reports = eps
            .par_iter()
            .map(|&e| glue_demo(&GluingConfig { eps: e, ..base }))
            .collect::<sigma2_gluing::Result<Vec<_>>>()?;
        let rows: Vec<Vec<f64>> = reports
            .iter()
            .map(|r| vec![r.config.eps, r.background_distance, r.b, r.lambda, r.gaps.max_l0(), r.completeness_min])
            .collect();
        let decreasing = reports.windows(2).all(|w| w[1].background_distance < w[0].background_distance);
        println!("background distance strictly decreasing: {decreasing}");
        return write_table(&s, "glue_sweep", "", &["eps", "background_distance", "b", "Lambda", "l0_gap", "completeness_min"], rows);
    }
    fan_out(&s, |suffix, run| {
        let report = glue_demo(&gluing_config(run))?;
        write_json(&run.path("glue_report", suffix, "json"), &report.to_json())?;
        let rows = report.radii.iter().zip(&report.factor).map(|(r, u)| vec![*r, *u]).collect();
        write_table(run, "glue_factor", suffix, &["r", "U"], rows)
    })?;
    Ok(())
}
