//! Invariant suites run by `verify`, each with measured quantities and a verdict.

use serde_json::{json, Map, Value};
use sigma2_gluing::banded::{Condition, End};
use sigma2_gluing::delaunay_ode::{DelaunayOrbit, DelaunayParams};
use sigma2_gluing::function_spaces::{exterior_extension, exterior_extension_ratio, interior_extension, interior_extension_ratio, HarmonicCoeffs, Mode};
use sigma2_gluing::linearized_solver::{calibrate_cnk_mode, log_grid, radial_mode_bvp, reference_cnk, ModeOperator};
use sigma2_gluing::sigma2_operator::{ball_profile, cylinder_equivariance_residual, evaluate_h, evaluate_l, evaluate_q, linear_equivariance_residual, CurvatureData, RadialField, Warp};
use sigma2_gluing::Result;

pub const SUITES: [&str; 6] = ["energy", "jacobi", "linearization", "equivariance", "extensions", "calibration"];

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub measured: Map<String, Value>,
}

impl SuiteResult {
    pub fn to_json(&self) -> Value {
        json!({ "name": self.name, "passed": self.passed, "measured": self.measured })
    }
}

fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn result(name: &'static str, passed: bool, measured: Value) -> SuiteResult {
    let measured = match measured {
        Value::Object(m) => m,
        other => Map::from_iter([("value".to_string(), other)]),
    };
    SuiteResult { name, passed, measured }
}

/// Runs one named suite for the given orbit parameters.
pub fn run(name: &str, params: DelaunayParams) -> Result<SuiteResult> {
    match name {
        "energy" => energy(params),
        "jacobi" => jacobi(params),
        "linearization" => linearization(params),
        "equivariance" => equivariance(params),
        "extensions" => extensions(params.n),
        "calibration" => calibration(params),
        other => Err(sigma2_gluing::Error::InvalidParams(format!("unknown suite `{other}`; choose from {}", SUITES.join(", ")))),
    }
}

fn energy(p: DelaunayParams) -> Result<SuiteResult> {
    let o = DelaunayOrbit::integrate(p, 15.0, 1e-10)?;
    let drift = o.relative_drift();
    let start = (o.energy / p.energy() - 1.0).abs();
    Ok(result("energy", drift <= 1e-8 && start <= 1e-12, json!({ "relative_drift": drift, "initial_energy_error": start })))
}

fn jacobi(p: DelaunayParams) -> Result<SuiteResult> {
    let mut rows = Vec::new();
    for spacing in [0.01, 0.005] {
        let o = DelaunayOrbit::integrate_with_spacing(p, 10.0, 1e-11, spacing)?;
        let a = o.constants().a;
        let range = o.window(-8.0, 8.0)?;
        let op0 = ModeOperator::from_orbit(&o, 0, -8.0, 8.0, reference_cnk(p.n))?;
        let op1 = ModeOperator::from_orbit(&o, 1, -8.0, 8.0, reference_cnk(p.n))?;
        let translation: Vec<f64> = range.clone().map(|i| o.vdot[i]).collect();
        let mode_one: Vec<f64> = range.map(|i| (-o.t[i]).exp() * (a * o.v[i] - o.vdot[i])).collect();
        rows.push([sup(op0.apply(&translation)?), sup(op1.apply(&mode_one)?) / sup(mode_one.iter().cloned())]);
    }
    let passed = rows[1].iter().all(|&x| x <= 1e-5) && rows[1][0] < rows[0][0] && rows[1][1] < rows[0][1];
    Ok(result(
        "jacobi",
        passed,
        json!({ "translation_coarse": rows[0][0], "translation_fine": rows[1][0], "mode_one_coarse": rows[0][1], "mode_one_fine": rows[1][1] }),
    ))
}

fn linearization(p: DelaunayParams) -> Result<SuiteResult> {
    let n = p.n;
    let o = DelaunayOrbit::integrate(p, 10.0, 1e-11)?;
    let radii = log_grid(0.05, 0.9, 200);
    let u = ball_profile(&o, 1.0, &radii)?;
    let dir = |scale: f64| -> Result<RadialField> {
        let (mut w, mut dw, mut d2w) = (vec![], vec![], vec![]);
        for &r in &radii {
            let (s, c) = r.ln().sin_cos();
            w.push(scale * r * s);
            dw.push(scale * (s + c));
            d2w.push(scale * (c - s) / r);
        }
        RadialField::new(radii.clone(), w, dw, d2w, CurvatureData::flat(), Warp::Euclidean)
    };
    let weight = |i: usize| radii[i].powi(n as i32);
    let h0 = evaluate_h(&u, n)?;
    let l = evaluate_l(&u, &dir(1.0)?, n)?;
    let mut taylor = Vec::new();
    for h in [1e-3, 1e-4, 1e-5] {
        let hp = evaluate_h(&u.plus(&dir(1.0)?, h)?, n)?;
        taylor.push(sup((0..radii.len()).map(|i| (hp[i] - h0[i] - h * l[i]) * weight(i))) / h);
    }
    let mut quad = Vec::new();
    for h in [1e-2, 5e-3, 2.5e-3] {
        let q = evaluate_q(&u, &dir(h)?, n)?;
        quad.push(sup((0..radii.len()).map(|i| q[i] * weight(i))) / (h * h));
    }
    let orders: Vec<f64> = taylor.windows(2).map(|w| (w[0] / w[1]).log10()).collect();
    let q_spread = quad.iter().cloned().fold(f64::MIN, f64::max) / quad.iter().cloned().fold(f64::MAX, f64::min);
    let passed = orders.iter().all(|x| (x - 1.0).abs() < 0.2) && q_spread < 2.0;
    Ok(result("linearization", passed, json!({ "taylor_over_h": taylor, "orders": orders, "quadratic_ratio_spread": q_spread })))
}

fn equivariance(p: DelaunayParams) -> Result<SuiteResult> {
    let o = DelaunayOrbit::integrate(p, 12.0, 1e-11)?;
    let nonlinear = cylinder_equivariance_residual(&o, 1.0)?.max(cylinder_equivariance_residual(&o, 0.3)?);
    let bump = |r: f64| (-(r.ln() + 3.0).powi(2)).exp();
    let coarse = linear_equivariance_residual(&o, 1.0, bump, 0.5, 6.0, 0.04)?;
    let fine = linear_equivariance_residual(&o, 1.0, bump, 0.5, 6.0, 0.02)?;
    let passed = nonlinear < 1e-8 && fine < coarse / 4.0;
    Ok(result("equivariance", passed, json!({ "nonlinear": nonlinear, "linear_coarse": coarse, "linear_fine": fine })))
}

fn extensions(n: usize) -> Result<SuiteResult> {
    let mut cross = 0.0f64;
    for l in 1..4 {
        let phi = HarmonicCoeffs::single(n, 0.5, l, 1.0)?;
        let mut profiles: Vec<_> = exterior_extension(&phi)?.into_iter().map(|p| (p, 0.5, 2.0)).collect();
        if l >= 2 {
            profiles.extend(interior_extension(&phi)?.into_iter().map(|p| (p, 0.1, 0.5)));
        }
        for (p, lo, hi) in profiles {
            let m = 501;
            let rho = log_grid(lo, hi, m);
            let bc = [Condition::Value(End::Left, p.profile.eval(lo)[0]), Condition::Value(End::Right, p.profile.eval(hi)[0])];
            let sol = radial_mode_bvp(n, l, &rho, &vec![0.0; m], 0.0, bc)?;
            cross = cross.max(sup(rho.iter().zip(&sol.w).map(|(r, w)| w - p.profile.eval(*r)[0])));
        }
    }
    let mut int = Vec::new();
    let mut ext = Vec::new();
    for r in [0.5, 0.25, 0.125, 0.0625] {
        let phi = HarmonicCoeffs::new(n, r, vec![Mode { l: 2, m: 0, c: 1.0 }, Mode { l: 3, m: 1, c: -0.4 }])?;
        int.push(interior_extension_ratio(&phi, 2.0, 0.5, 5, 16)?);
        ext.push(exterior_extension_ratio(&phi, 0.5, 4, 16)?);
    }
    let drift = [&int, &ext].iter().flat_map(|v| v.iter().map(|x| (x / v[0] - 1.0).abs())).fold(0.0, f64::max);
    Ok(result("extensions", cross <= 1e-9 && drift < 1e-6, json!({ "analytic_vs_bvp": cross, "ratio_drift": drift, "interior_ratios": int, "exterior_ratios": ext })))
}

fn calibration(p: DelaunayParams) -> Result<SuiteResult> {
    let o = DelaunayOrbit::integrate(p, 16.0, 1e-11)?;
    let mut values = Vec::new();
    for degree in 0..3 {
        values.extend(calibrate_cnk_mode(&o, degree, -10.0, 10.0)?.segments);
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo).abs() / lo.abs().max(hi.abs());
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(result("calibration", spread < 0.01, json!({ "c_nk": mean, "reference": reference_cnk(p.n), "relative_spread": spread })))
}
