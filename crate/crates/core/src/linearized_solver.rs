//! Mode-wise linearization of the σ₂ operator at a Delaunay orbit on the cylinder,
//! two-point solves that realize its right inverse on a finite window, the
//! Neumann-series perturbation to translated family members, and radial
//! annulus solves for the flat Laplacian with a constant zeroth-order term.
//!
//! On the cylinder the linearization acting on w(t)e_ℓ reads
//!
//!   C v h^{k−1} (ẅ + b ẇ + (c − λa) w),
//!
//! with a, b, c built from the orbit. All differencing is fourth order and uses
//! the same stencils in the forward operator and in the solver.

use crate::banded::{solve_two_point, Condition, End};
use crate::delaunay_ode::{DelaunayOrbit, OdeConstants};
use crate::error::{Error, Result};
use crate::fd;
use crate::function_spaces::{weighted_norm, weighted_norm_c0, ModeSamples, SampledField, WeightedNormSpec};
use crate::sigma2_operator::{evaluate_h, linearization_coefficients, CurvatureData, RadialField, Warp};
use serde::Serialize;

/// Relative cone guard for h.
const CONE_GUARD: f64 = 1e-14;

/// The four coefficient functions at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// C_{n,2} = −(n−1)(n−4)/8, the value the calibration reproduces.
pub fn reference_cnk(n: usize) -> f64 {
    let nf = n as f64;
    -(nf - 1.0) * (nf - 4.0) / 8.0
}

/// Coefficients from the jet (v, v̇, v̈, v⃛) of an orbit.
pub fn coefficients_from_jet(c: &OdeConstants, t: f64, v: f64, vd: f64, vdd: f64, vddd: f64) -> Result<ModeCoefficients> {
    let (nf, kf) = (c.n as f64, c.k as f64);
    let h = c.cone(v, vd);
    if !(h > CONE_GUARD * v * v) {
        return Err(Error::ConeViolation { t, h });
    }
    let hd = 2.0 * vd * (v - c.c2 * vdd);
    let hdd = 2.0 * vdd * (v - c.c2 * vdd) + 2.0 * vd * (vd - c.c2 * vddd);
    let vx = v.powf(c.x);
    let a = (nf - kf) / (kf * (nf - 1.0)) + nf * (kf - 1.0) / (kf * (nf - 1.0)) * vx / h.powf(kf);
    let b = (kf - 1.0) * hd / h;
    let m = (nf - 2.0 * kf) / (2.0 * kf);
    let cc = -(nf - 1.0) * m * a + m + vdd / v + nf * nf / (2.0 * kf) * h.powf(1.0 - kf) * v.powf(c.x - 2.0);
    let lg1 = hd / h;
    let lg2 = hdd / h - lg1 * lg1;
    let d = -(kf - 1.0) / 2.0 * lg2 - ((kf - 1.0) / 2.0).powi(2) * lg1 * lg1;
    Ok(ModeCoefficients { a, b, c: cc, d })
}

/// (a_ε, b_ε, c_ε, d_ε) at time t.
pub fn mode_coefficients(orbit: &DelaunayOrbit, t: f64) -> Result<ModeCoefficients> {
    let (v, vd, vdd) = orbit.state_at(t)?;
    coefficients_from_jet(&orbit.constants(), t, v, vd, vdd, orbit.vdddot_at(t)?)
}

/// A second-order operator c₂w″ + c₁w′ + c₀w on a uniform window of the cylinder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeOperator {
    pub n: usize,
    pub k: usize,
    pub degree: usize,
    pub lambda: f64,
    pub eps: f64,
    /// Scale R relating orbit time τ and ball radius |x| = R e^{−τ}.
    pub r_scale: f64,
    pub t: Vec<f64>,
    pub dt: f64,
    pub c2: Vec<f64>,
    pub c1: Vec<f64>,
    pub c0: Vec<f64>,
    /// C v h^{k−1}; ones for operators not built from the orbit formulas.
    pub prefactor: Vec<f64>,
    pub coefficients: Vec<ModeCoefficients>,
    pub energy: f64,
    pub c_nk: f64,
}

impl ModeOperator {
    /// The orbit-coefficient operator on the orbit nodes inside [t0, t1].
    pub fn from_orbit(orbit: &DelaunayOrbit, degree: usize, t0: f64, t1: f64, c_nk: f64) -> Result<Self> {
        let range = orbit.window(t0, t1)?;
        if range.len() < fd::MIN_POINTS {
            return Err(Error::GridMismatch("window holds too few orbit nodes".into()));
        }
        let c = orbit.constants();
        let lambda = (degree * (degree + c.n - 2)) as f64;
        let kf = c.k as f64;
        let m = range.len();
        let mut op = Self {
            n: c.n,
            k: c.k,
            degree,
            lambda,
            eps: orbit.params.eps,
            r_scale: 1.0,
            t: Vec::with_capacity(m),
            dt: orbit.dt,
            c2: Vec::with_capacity(m),
            c1: Vec::with_capacity(m),
            c0: Vec::with_capacity(m),
            prefactor: Vec::with_capacity(m),
            coefficients: Vec::with_capacity(m),
            energy: orbit.energy,
            c_nk,
        };
        for i in range {
            let (t, v, vd, vdd) = (orbit.t[i], orbit.v[i], orbit.vdot[i], orbit.vddot[i]);
            let co = coefficients_from_jet(&c, t, v, vd, vdd, orbit.vdddot(i))?;
            let p = c_nk * v * c.cone(v, vd).powf(kf - 1.0);
            op.t.push(t);
            op.c2.push(p);
            op.c1.push(p * co.b);
            op.c0.push(p * (co.c - lambda * co.a));
            op.prefactor.push(p);
            op.coefficients.push(co);
        }
        Ok(op)
    }

    /// The linearization of the σ₂ operator at an arbitrary cylinder profile
    /// (uniform grid), from the general formula.
    pub fn from_profile(profile: &RadialField, n: usize, degree: usize, eps: f64) -> Result<Self> {
        if profile.warp != Warp::Cylinder {
            return Err(Error::InvalidParams("profile must live on the cylinder".into()));
        }
        let m = profile.len();
        if m < fd::MIN_POINTS {
            return Err(Error::GridMismatch("too few samples".into()));
        }
        let dt = (profile.grid[m - 1] - profile.grid[0]) / (m - 1) as f64;
        let [c2, c1, c0] = linearization_coefficients(profile, n, degree)?;
        Ok(Self {
            n,
            k: 2,
            degree,
            lambda: (degree * (degree + n - 2)) as f64,
            eps,
            r_scale: 1.0,
            t: profile.grid.clone(),
            dt,
            c2,
            c1,
            c0,
            prefactor: vec![1.0; m],
            coefficients: Vec::new(),
            energy: f64::NAN,
            c_nk: 1.0,
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// The same operator divided by its prefactor, ẅ + bẇ + (c − λa)w.
    pub fn normalized(&self) -> Self {
        let div = |v: &[f64]| v.iter().zip(&self.prefactor).map(|(x, p)| x / p).collect::<Vec<_>>();
        Self {
            c2: div(&self.c2),
            c1: div(&self.c1),
            c0: div(&self.c0),
            prefactor: vec![1.0; self.len()],
            c_nk: 1.0,
            ..self.clone()
        }
    }

    fn check(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.len() {
            return Err(Error::GridMismatch(format!("profile has {} samples, operator {}", w.len(), self.len())));
        }
        Ok(())
    }

    /// Fourth-order discrete application.
    pub fn apply(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check(w)?;
        Ok(fd::apply_second_order(&self.c2, &self.c1, &self.c0, w, self.dt))
    }

    /// Application to a profile with known derivatives.
    pub fn apply_exact(&self, w: &[f64], dw: &[f64], d2w: &[f64]) -> Result<Vec<f64>> {
        self.check(w)?;
        self.check(dw)?;
        self.check(d2w)?;
        Ok((0..self.len()).map(|i| self.c2[i] * d2w[i] + self.c1[i] * dw[i] + self.c0[i] * w[i]).collect())
    }

    /// Solves op(w) = f with Dirichlet values at both ends of the window.
    pub fn solve(&self, f: &[f64], bc: [f64; 2]) -> Result<Vec<f64>> {
        self.check(f)?;
        solve_two_point(&self.c2, &self.c1, &self.c0, f, self.dt, [Condition::Value(End::Left, bc[0]), Condition::Value(End::Right, bc[1])])
    }
}

/// Applies the operator to sampled w.
pub fn apply_mode(op: &ModeOperator, w: &[f64]) -> Result<Vec<f64>> {
    op.apply(w)
}

/// Sup of |op(w) − f| over interior nodes.
pub fn interior_residual(op: &ModeOperator, w: &[f64], f: &[f64]) -> Result<f64> {
    let lw = op.apply(w)?;
    Ok((1..op.len() - 1).map(|i| (lw[i] - f[i]).abs()).fold(0.0, f64::max))
}

/// Solves the two-point problem and checks the discrete residual.
pub fn solve_mode_bvp(op: &ModeOperator, f: &[f64], bc: [f64; 2]) -> Result<Vec<f64>> {
    op.solve(f, bc)
}

/// Outcome of the calibration of C_{n,k}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub value: f64,
    /// Least-squares values on consecutive segments of the window.
    pub segments: Vec<f64>,
    /// max |segment/value − 1|
    pub spread: f64,
}

const CALIBRATION_SEGMENTS: usize = 8;

fn test_direction(t: f64) -> [f64; 3] {
    let (s1, c1) = (0.9 * t).sin_cos();
    let (s2, c2) = (0.35 * t + 0.4).sin_cos();
    [1.0 + c1 + 0.5 * s2, -0.9 * s1 + 0.175 * c2, -0.81 * c1 - 0.06125 * s2]
}

/// Fits C_{n,k} by least squares of the orbit-formula operator (with C = 1)
/// against the linearization of the σ₂ operator on the cylinder. Degree 0 uses
/// the central difference of the nonlinear operator; higher degrees use the
/// general linearization formula.
pub fn calibrate_cnk_mode(orbit: &DelaunayOrbit, degree: usize, t0: f64, t1: f64) -> Result<Calibration> {
    if orbit.params.k != 2 {
        return Err(Error::InvalidParams("the σ₂ operator layer needs k = 2".into()));
    }
    let n = orbit.params.n;
    let unit = ModeOperator::from_orbit(orbit, degree, t0, t1, 1.0)?;
    let stride = 4;
    let idx: Vec<usize> = (0..unit.len()).step_by(stride).collect();
    let grid: Vec<f64> = idx.iter().map(|&i| unit.t[i]).collect();
    let range = orbit.window(t0, t1)?;
    let node = |i: usize| range.start + i;
    let profile = RadialField::new(
        grid.clone(),
        idx.iter().map(|&i| orbit.v[node(i)]).collect(),
        idx.iter().map(|&i| orbit.vdot[node(i)]).collect(),
        idx.iter().map(|&i| orbit.vddot[node(i)]).collect(),
        CurvatureData::cylinder(n),
        Warp::Cylinder,
    )?;
    let dirs: Vec<[f64; 3]> = grid.iter().map(|&t| test_direction(t)).collect();
    let model: Vec<f64> = idx
        .iter()
        .zip(&dirs)
        .map(|(&i, d)| unit.c2[i] * d[2] + unit.c1[i] * d[1] + unit.c0[i] * d[0])
        .collect();
    let target: Vec<f64> = if degree == 0 {
        let h = 1e-3;
        let shifted = |s: f64| {
            RadialField::new(
                grid.clone(),
                (0..grid.len()).map(|j| profile.u[j] + s * dirs[j][0]).collect(),
                (0..grid.len()).map(|j| profile.du[j] + s * dirs[j][1]).collect(),
                (0..grid.len()).map(|j| profile.d2u[j] + s * dirs[j][2]).collect(),
                profile.background,
                Warp::Cylinder,
            )
        };
        let (p1, m1) = (evaluate_h(&shifted(h)?, n)?, evaluate_h(&shifted(-h)?, n)?);
        let (p2, m2) = (evaluate_h(&shifted(2.0 * h)?, n)?, evaluate_h(&shifted(-2.0 * h)?, n)?);
        (0..grid.len()).map(|j| (8.0 * (p1[j] - m1[j]) - (p2[j] - m2[j])) / (12.0 * h)).collect()
    } else {
        let [c2, c1, c0] = linearization_coefficients(&profile, n, degree)?;
        (0..grid.len()).map(|j| c2[j] * dirs[j][2] + c1[j] * dirs[j][1] + c0[j] * dirs[j][0]).collect()
    };
    let fit = |lo: usize, hi: usize| {
        let (mut num, mut den) = (0.0, 0.0);
        for j in lo..hi {
            num += target[j] * model[j];
            den += model[j] * model[j];
        }
        num / den
    };
    let value = fit(0, grid.len());
    let seg = grid.len() / CALIBRATION_SEGMENTS;
    let segments: Vec<f64> = (0..CALIBRATION_SEGMENTS)
        .map(|s| fit(s * seg, if s + 1 == CALIBRATION_SEGMENTS { grid.len() } else { (s + 1) * seg }))
        .collect();
    let spread = segments.iter().map(|s| (s / value - 1.0).abs()).fold(0.0, f64::max);
    if !(spread <= 0.01) {
        return Err(Error::CalibrationUnstable { spread });
    }
    Ok(Calibration { value, segments, spread })
}

/// C_{n,k} from the radial direction over the whole orbit range.
pub fn calibrate_cnk(orbit: &DelaunayOrbit) -> Result<f64> {
    let (lo, hi) = orbit.t_range();
    Ok(calibrate_cnk_mode(orbit, 0, lo, hi)?.value)
}

/// Ball picture of a cylinder-window profile: |x| = R e^{−τ}, w_ball = |x|^{−A}W and
/// f_ball = |x|^{−A−2}f for the normalized operator. Radii are returned increasing.
fn to_ball(op: &ModeOperator, w: &[f64], f: &[f64]) -> (SampledField, Vec<f64>) {
    let a = (op.n as f64 - 2.0 * op.k as f64) / (2.0 * op.k as f64);
    let (d1, d2) = fd::derivatives(w, op.dt);
    let m = op.len();
    let mut radii = Vec::with_capacity(m);
    let mut ws = Vec::with_capacity(m);
    let mut dws = Vec::with_capacity(m);
    let mut d2ws = Vec::with_capacity(m);
    let mut fs = Vec::with_capacity(m);
    for i in (0..m).rev() {
        let r = op.r_scale * (-op.t[i]).exp();
        let p = r.powf(-a);
        let dr = p * (-a * w[i] - d1[i]);
        let drr = p * (a * a * w[i] + 2.0 * a * d1[i] + d2[i]);
        radii.push(r);
        ws.push(p * w[i]);
        dws.push(dr / r);
        d2ws.push((drr - dr) / (r * r));
        fs.push(r.powf(-a - 2.0) * f[i]);
    }
    let field = SampledField { n: op.n, radii, modes: vec![ModeSamples { l: op.degree, m: 0, w: ws, dw: dws, d2w: d2ws }] };
    (field, fs)
}

/// ‖w‖_{(2,α),γ} / ‖f‖_{(0,α),γ−2} in the ball picture, for a solution pair of
/// the normalized operator.
pub fn norm_ratio(op: &ModeOperator, w: &[f64], f: &[f64], gamma: f64, alpha: f64) -> Result<f64> {
    op.check(w)?;
    op.check(f)?;
    let (field, fb) = to_ball(op, w, f);
    let top = WeightedNormSpec { mu: gamma, alpha, r: field.radii[field.radii.len() - 1], gamma_pair: None };
    let nw = weighted_norm(&field, &top);
    let nf = weighted_norm_c0(&field.radii, &fb, &WeightedNormSpec { mu: gamma - 2.0, ..top });
    Ok(nw / nf)
}

/// δ_{n,k} = sqrt(2n(n−k)/(k(n−1)) + ((n−2k)/2k)²)
pub fn delta_nk(n: usize, k: usize) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    (2.0 * nf * (nf - kf) / (kf * (nf - 1.0)) + ((nf - 2.0 * kf) / (2.0 * kf)).powi(2)).sqrt()
}

/// Report of one mode solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport {
    pub mode: usize,
    pub residual: f64,
    pub norm_ratio: f64,
    pub grid: usize,
    pub eps: f64,
}

/// Solves the normalized operator against f̂ given in the ball picture as |x|^{γ−2}ψ(log|x|),
/// with zero Dirichlet data, and reports residual and norm ratio.
pub fn weighted_solve_report(op: &ModeOperator, gamma: f64, alpha: f64) -> Result<(Vec<f64>, SolverReport)> {
    let norm = op.normalized();
    let a = (op.n as f64 - 2.0 * op.k as f64) / (2.0 * op.k as f64);
    let f: Vec<f64> = op
        .t
        .iter()
        .map(|&t| {
            let r = op.r_scale * (-t).exp();
            r.powf(a + 2.0) * r.powf(gamma - 2.0) * (1.0 + 0.5 * (2.0 * r.ln()).sin())
        })
        .collect();
    let w = norm.solve(&f, [0.0, 0.0])?;
    let residual = interior_residual(&norm, &w, &f)?;
    let ratio = norm_ratio(&norm, &w, &f, gamma, alpha)?;
    Ok((w, SolverReport { mode: op.degree, residual, norm_ratio: ratio, grid: op.len(), eps: op.eps }))
}

/// The translated member along the ray x ∥ a, in the cylinder picture:
/// V_a(t) = g^{−A} v(t + log g), g = 1 − |a|e^{−t}, with exact derivatives.
pub fn frozen_ray_profile(orbit: &DelaunayOrbit, a_norm: f64, times: &[f64]) -> Result<RadialField> {
    let amp = orbit.constants().a;
    let mut v = Vec::with_capacity(times.len());
    let mut dv = Vec::with_capacity(times.len());
    let mut d2v = Vec::with_capacity(times.len());
    for &t in times {
        let e = a_norm * (-t).exp();
        let g = 1.0 - e;
        if !(g > 0.0) {
            return Err(Error::OutOfDomain(e));
        }
        let (g1, g2) = (e, -e);
        let s1 = 1.0 + g1 / g;
        let s2 = (g2 * g - g1 * g1) / (g * g);
        let (x, x1, x2) = orbit.state_at(t + g.ln())?;
        let p = g.powf(-amp);
        let p1 = -amp * p * g1 / g;
        let p2 = amp * (amp + 1.0) * p * (g1 / g).powi(2) - amp * p * g2 / g;
        v.push(p * x);
        dv.push(p1 * x + p * x1 * s1);
        d2v.push(p2 * x + 2.0 * p1 * x1 * s1 + p * (x2 * s1 * s1 + x1 * s2));
    }
    RadialField::new(times.to_vec(), v, dv, d2v, CurvatureData::cylinder(orbit.params.n), Warp::Cylinder)
}

/// The linearization at the translated member on the nodes of `base`.
pub fn perturbed_operator(orbit: &DelaunayOrbit, base: &ModeOperator, a_norm: f64) -> Result<ModeOperator> {
    let profile = frozen_ray_profile(orbit, a_norm, &base.t)?;
    let mut op = ModeOperator::from_profile(&profile, base.n, base.degree, base.eps)?;
    op.dt = base.dt;
    op.r_scale = base.r_scale;
    Ok(op)
}

/// Result of the Neumann-series right inverse.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeumannReport {
    pub solution: Vec<f64>,
    /// Sup norms of the successive corrections (the first is the identity term).
    pub increments: Vec<f64>,
    pub residual: f64,
}

impl NeumannReport {
    /// Largest ratio of consecutive increments after the identity term.
    pub fn max_ratio(&self) -> f64 {
        self.increments.windows(2).skip(1).map(|w| w[1] / w[0]).fold(0.0, f64::max)
    }
}

/// w = G Σ (I − L_a G)^i f with G the Dirichlet inverse of `base`, truncated
/// once a correction is below `tol` times the solution size.
pub fn perturbed_inverse(base: &ModeOperator, perturbed: &ModeOperator, f: &[f64], tol: f64, max_terms: usize) -> Result<NeumannReport> {
    if base.len() != perturbed.len() {
        return Err(Error::GridMismatch("operators live on different windows".into()));
    }
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut w = base.solve(f, [0.0, 0.0])?;
    let mut increments = vec![sup(&w)];
    let mut growth = 0;
    loop {
        let lw = perturbed.apply(&w)?;
        let mut res: Vec<f64> = f.iter().zip(&lw).map(|(a, b)| a - b).collect();
        let last = res.len() - 1;
        res[0] = 0.0;
        res[last] = 0.0;
        let inc = base.solve(&res, [0.0, 0.0])?;
        let size = sup(&inc);
        let prev = *increments.last().unwrap_or(&f64::INFINITY);
        if size <= tol * sup(&w) || increments.len() >= max_terms {
            let residual = interior_residual(perturbed, &w, f)?;
            return Ok(NeumannReport { solution: w, increments, residual });
        }
        growth = if size > prev { growth + 1 } else { 0 };
        if growth >= 3 {
            return Err(Error::SeriesDiverged(growth));
        }
        for (x, d) in w.iter_mut().zip(&inc) {
            *x += d;
        }
        increments.push(size);
    }
}

/// Closure of the radial mode on an annulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Ell0Closure {
    /// w(s) = 0 and w′(s) = slope; w(r) is the free constant.
    OuterCauchy { slope: f64 },
    /// w′(r) = slope and w(s) = 0; w(r) is the free constant.
    InnerFlux { slope: f64 },
}

/// Log-uniform radii on [r, s].
pub fn log_grid(r: f64, s: f64, points: usize) -> Vec<f64> {
    let (a, b) = (r.ln(), s.ln());
    (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect()
}

/// Solution of one annulus mode with derivatives in ρ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnulusSolution {
    pub rho: Vec<f64>,
    pub w: Vec<f64>,
    pub dw: Vec<f64>,
    pub d2w: Vec<f64>,
    /// w(r) for degree 0, zero otherwise.
    pub inner_constant: f64,
}

/// Solves w″ + (n−1)w′/ρ − λw/ρ² + zeroth·w = f on log-uniform radii with
/// two boundary conditions; derivatives in the conditions are in ρ.
pub fn radial_mode_bvp(n: usize, degree: usize, rho: &[f64], f: &[f64], zeroth: f64, conditions: [Condition; 2]) -> Result<AnnulusSolution> {
    let m = rho.len();
    if f.len() != m || m < fd::MIN_POINTS {
        return Err(Error::GridMismatch("data and grid differ".into()));
    }
    let h = (rho[m - 1].ln() - rho[0].ln()) / (m - 1) as f64;
    let lambda = (degree * (degree + n - 2)) as f64;
    let c2 = vec![1.0; m];
    let c1 = vec![n as f64 - 2.0; m];
    let c0: Vec<f64> = rho.iter().map(|r| zeroth * r * r - lambda).collect();
    let rhs: Vec<f64> = rho.iter().zip(f).map(|(r, f)| r * r * f).collect();
    let conv = |c: Condition| match c {
        Condition::Slope(End::Left, s) => Condition::Slope(End::Left, s * rho[0]),
        Condition::Slope(End::Right, s) => Condition::Slope(End::Right, s * rho[m - 1]),
        other => other,
    };
    let w = solve_two_point(&c2, &c1, &c0, &rhs, h, [conv(conditions[0]), conv(conditions[1])])?;
    let (wx, wxx) = fd::derivatives(&w, h);
    let dw: Vec<f64> = (0..m).map(|i| wx[i] / rho[i]).collect();
    let d2w: Vec<f64> = (0..m).map(|i| (wxx[i] - wx[i]) / (rho[i] * rho[i])).collect();
    Ok(AnnulusSolution { rho: rho.to_vec(), w, dw, d2w, inner_constant: 0.0 })
}

/// Annulus problem with zero outer trace; degree ≥ 1 also has zero inner trace,
/// degree 0 is closed by `closure` and reports the inner constant.
pub fn annulus_mode_solve(n: usize, degree: usize, rho: &[f64], f: &[f64], zeroth: f64, closure: Ell0Closure) -> Result<AnnulusSolution> {
    let (r, s) = (rho[0], rho[rho.len() - 1]);
    if !(r > 0.0 && 2.0 * r < s) {
        return Err(Error::InvalidParams(format!("annulus needs 0 < 2r < s, got r = {r}, s = {s}")));
    }
    let conditions = if degree > 0 {
        [Condition::Value(End::Left, 0.0), Condition::Value(End::Right, 0.0)]
    } else {
        match closure {
            Ell0Closure::OuterCauchy { slope } => [Condition::Value(End::Right, 0.0), Condition::Slope(End::Right, slope)],
            Ell0Closure::InnerFlux { slope } => [Condition::Slope(End::Left, slope), Condition::Value(End::Right, 0.0)],
        }
    };
    let mut sol = radial_mode_bvp(n, degree, rho, f, zeroth, conditions)?;
    if degree == 0 {
        sol.inner_constant = sol.w[0];
    }
    Ok(sol)
}

/// Measured ‖w‖_{(2,α),ν} / ‖f‖_{(0,α),ν−2} for f = ρ^{ν−2}(1 + ½ sin(2 log ρ)) on [r, s].
pub fn annulus_norm_ratio(n: usize, degree: usize, r: f64, s: f64, nu: f64, alpha: f64, closure: Ell0Closure, points: usize) -> Result<f64> {
    let rho = log_grid(r, s, points);
    let f: Vec<f64> = rho.iter().map(|x| x.powf(nu - 2.0) * (1.0 + 0.5 * (2.0 * x.ln()).sin())).collect();
    let sol = annulus_mode_solve(n, degree, &rho, &f, 0.0, closure)?;
    let field = SampledField { n, radii: rho.clone(), modes: vec![ModeSamples { l: degree, m: 0, w: sol.w, dw: sol.dw, d2w: sol.d2w }] };
    let spec = WeightedNormSpec { mu: nu, alpha, r, gamma_pair: None };
    Ok(weighted_norm(&field, &spec) / weighted_norm_c0(&rho, &f, &WeightedNormSpec { mu: nu - 2.0, ..spec }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delaunay_ode::{cylinder_value, DelaunayParams};

    fn orbit(eps: f64) -> DelaunayOrbit {
        DelaunayOrbit::integrate(DelaunayParams::new(5, 2, eps).unwrap(), 16.0, 1e-11).unwrap()
    }

    #[test]
    fn cylinder_coefficients() {
        let n = 5;
        let c = OdeConstants::new(n, 2);
        let vb = cylinder_value(n, 2);
        let co = coefficients_from_jet(&c, 0.0, vb, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(co.b, 0.0);
        assert_eq!(co.d, 0.0);
        let expect = 3.0 / 8.0 + 5.0 / 8.0 * vb.powf(20.0) / vb.powi(4);
        assert!((co.a - expect).abs() < 1e-14);
    }

    #[test]
    fn first_coefficient_reduces_to_one_for_the_yamabe_case() {
        let c = OdeConstants::new(6, 1);
        let co = coefficients_from_jet(&c, 0.0, 0.7, 0.1, 0.2, 0.3).unwrap();
        assert!((co.a - 1.0).abs() < 1e-15 && co.b == 0.0 && co.d == 0.0);
    }

    #[test]
    fn b_vanishes_at_minima() {
        let o = orbit(0.1);
        let co = mode_coefficients(&o, 0.0).unwrap();
        assert_eq!(co.b, 0.0);
        assert!(co.a > 0.0);
    }

    #[test]
    fn tuple_at_the_neck_matches_a_direct_evaluation() {
        // n = 5, k = 2, ε = 0.1 at t = 0: v = ε^{1/4}, v̇ = 0, h = v², v̈ = A²v − κ(v^X/(H+v^X))^{1/2}v^9
        let o = orbit(0.1);
        let co = mode_coefficients(&o, 0.0).unwrap();
        let e: f64 = 0.1;
        let v = e.powf(0.25);
        let h = v * v;
        let big_h = e - e.powi(5);
        let vdd = v / 16.0 - 5.0 / 16.0 * (v.powi(20) / (big_h + v.powi(20))).sqrt() * v.powi(9);
        let a = 3.0 / 8.0 + 5.0 / 8.0 * v.powi(20) / (h * h);
        let c = -a + 0.25 + vdd / v + 6.25 / h * v.powi(18);
        let hdd = 2.0 * vdd * (v - 16.0 * vdd);
        assert!((co.a - a).abs() < 1e-13);
        assert!((co.c - c).abs() < 1e-11);
        assert!((co.d + 0.5 * hdd / h).abs() < 1e-11);
    }

    #[test]
    fn cone_guard() {
        let c = OdeConstants::new(5, 2);
        assert!(matches!(coefficients_from_jet(&c, 1.0, 0.1, 0.1, 0.0, 0.0), Err(Error::ConeViolation { .. })));
    }

    #[test]
    fn translation_field_is_in_the_kernel() {
        let o = orbit(0.1);
        let op = ModeOperator::from_orbit(&o, 0, -12.0, 12.0, reference_cnk(5)).unwrap();
        let r = o.window(-12.0, 12.0).unwrap();
        let w: Vec<f64> = r.clone().map(|i| o.vdot[i]).collect();
        let dw: Vec<f64> = r.clone().map(|i| o.vddot[i]).collect();
        let d2w: Vec<f64> = r.clone().map(|i| o.vdddot(i)).collect();
        let exact = op.apply_exact(&w, &dw, &d2w).unwrap();
        assert!(exact.iter().all(|x| x.abs() < 1e-10));
        let discrete = op.apply(&w).unwrap();
        assert!(discrete.iter().all(|x| x.abs() < 1e-5));
    }

    #[test]
    fn mode_one_jacobi_field_is_in_the_kernel() {
        let o = orbit(0.1);
        let a = o.constants().a;
        let op = ModeOperator::from_orbit(&o, 1, -8.0, 8.0, reference_cnk(5)).unwrap();
        let r = o.window(-8.0, 8.0).unwrap();
        let (mut w, mut dw, mut d2w) = (vec![], vec![], vec![]);
        for i in r {
            let (e, v, v1, v2, v3) = ((-o.t[i]).exp(), o.v[i], o.vdot[i], o.vddot[i], o.vdddot(i));
            let q = a * v - v1;
            let q1 = a * v1 - v2;
            let q2 = a * v2 - v3;
            w.push(e * q);
            dw.push(e * (q1 - q));
            d2w.push(e * (q2 - 2.0 * q1 + q));
        }
        let scale = op.c2.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let exact = op.apply_exact(&w, &dw, &d2w).unwrap();
        let worst = exact.iter().zip(&w).map(|(x, w)| x.abs() / (scale * w.abs().max(1e-3))).fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn calibration_reproduces_the_reference_constant() {
        for eps in [0.2, 0.1] {
            let o = orbit(eps);
            let c = calibrate_cnk(&o).unwrap();
            assert!((c / reference_cnk(5) - 1.0).abs() < 1e-6, "{c}");
            for degree in 1..3 {
                let m = calibrate_cnk_mode(&o, degree, -10.0, 10.0).unwrap();
                assert!((m.value / reference_cnk(5) - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn calibration_requires_k_two() {
        let o = DelaunayOrbit::integrate(DelaunayParams::new(7, 3, 0.1).unwrap(), 4.0, 1e-10).unwrap();
        assert!(calibrate_cnk(&o).is_err());
    }

    #[test]
    fn manufactured_recovery() {
        let o = orbit(0.1);
        for degree in 0..3 {
            let op = ModeOperator::from_orbit(&o, degree, 0.0, 10.0, reference_cnk(5)).unwrap();
            let w0: Vec<f64> = op.t.iter().map(|t| (0.3 * t).sin() + 0.1 * t).collect();
            let f = op.apply(&w0).unwrap();
            let w = solve_mode_bvp(&op, &f, [w0[0], w0[w0.len() - 1]]).unwrap();
            let err = w.iter().zip(&w0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-8, "degree {degree}: {err}");
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let o = orbit(0.1);
        let op = ModeOperator::from_orbit(&o, 2, 0.0, 5.0, reference_cnk(5)).unwrap();
        let w = op.solve(&vec![0.0; op.len()], [0.0, 0.0]).unwrap();
        assert!(w.iter().all(|&x| x == 0.0));
        assert!(matches!(op.apply(&[0.0; 3]), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn general_formula_agrees_with_orbit_formula() {
        let o = orbit(0.2);
        let op = ModeOperator::from_orbit(&o, 1, 0.0, 6.0, reference_cnk(5)).unwrap();
        let p = frozen_ray_profile(&o, 0.0, &op.t).unwrap();
        let g = ModeOperator::from_profile(&p, 5, 1, 0.2).unwrap();
        for i in 0..op.len() {
            for (x, y) in [(op.c2[i], g.c2[i]), (op.c1[i], g.c1[i]), (op.c0[i], g.c0[i])] {
                assert!((x - y).abs() < 1e-9 * op.c2[i].abs().max(1e-300) + 1e-14, "{i}: {x} {y}");
            }
        }
    }

    #[test]
    fn frozen_ray_derivatives() {
        let o = orbit(0.1);
        let h = 1e-4;
        let p = frozen_ray_profile(&o, 0.05, &[2.0 - h, 2.0, 2.0 + h]).unwrap();
        assert!(((p.u[2] - p.u[0]) / (2.0 * h) - p.du[1]).abs() < 1e-7);
        assert!(((p.u[2] - 2.0 * p.u[1] + p.u[0]) / (h * h) - p.d2u[1]).abs() < 1e-5);
    }

    #[test]
    fn neumann_series() {
        let o = orbit(0.1);
        let base = ModeOperator::from_orbit(&o, 2, 1.0, 9.0, reference_cnk(5)).unwrap();
        let f: Vec<f64> = base.t.iter().map(|t| (-(t - 5.0f64).powi(2)).exp() * 1e-3).collect();
        let same = perturbed_operator(&o, &base, 0.0).unwrap();
        let r0 = perturbed_inverse(&base, &same, &f, 1e-8, 50).unwrap();
        assert_eq!(r0.increments.len(), 1);
        let pert = perturbed_operator(&o, &base, 0.02).unwrap();
        let r = perturbed_inverse(&base, &pert, &f, 1e-12, 60).unwrap();
        assert!(r.increments.len() > 2);
        assert!(r.max_ratio() <= 0.5, "{:?}", r.increments);
        let scale = f.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        assert!(r.residual <= 1e-8 * scale.max(1.0));
    }

    #[test]
    fn annulus_zero_and_manufactured() {
        let rho = log_grid(0.1, 1.0, 2001);
        let z = annulus_mode_solve(5, 0, &rho, &vec![0.0; rho.len()], 0.0, Ell0Closure::OuterCauchy { slope: 0.0 }).unwrap();
        assert!(z.w.iter().all(|&x| x == 0.0) && z.inner_constant == 0.0);
        let f = vec![10.0; rho.len()];
        let s = 1.0;
        for closure in [Ell0Closure::OuterCauchy { slope: 2.0 * s }, Ell0Closure::InnerFlux { slope: 0.2 }] {
            let sol = annulus_mode_solve(5, 0, &rho, &f, 0.0, closure).unwrap();
            let err = rho.iter().zip(&sol.w).map(|(r, w)| (w - (r * r - s * s)).abs()).fold(0.0, f64::max);
            assert!(err < 1e-8, "{closure:?}: {err}");
            assert!((sol.inner_constant - (0.01 - 1.0)).abs() < 1e-8);
        }
    }

    #[test]
    fn annulus_with_zeroth_order_term() {
        let rho = log_grid(0.2, 1.0, 2001);
        let n = 6;
        let c = 3.0;
        let w0: Vec<f64> = rho.iter().map(|r| (r * r - 1.0) * r).collect();
        // Δ on degree one: w″ + (n−1)w′/ρ − (n−1)w/ρ²
        let f: Vec<f64> = rho
            .iter()
            .zip(&w0)
            .map(|(r, w)| {
                let (d1, d2) = (3.0 * r * r - 1.0, 6.0 * r);
                d2 + 5.0 * d1 / r - 5.0 * w / (r * r) + c * w
            })
            .collect();
        let mut rho_in = rho.clone();
        rho_in[0] = 0.2;
        let sol = radial_mode_bvp(n, 1, &rho_in, &f, c, [Condition::Value(End::Left, w0[0]), Condition::Value(End::Right, 0.0)]).unwrap();
        let err = sol.w.iter().zip(&w0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
        assert!(annulus_mode_solve(5, 0, &log_grid(0.6, 1.0, 50), &[0.0; 50], 0.0, Ell0Closure::InnerFlux { slope: 0.0 }).is_err());
    }

    #[test]
    fn annulus_ratio_is_scale_free() {
        let nu = -3.5;
        let a = annulus_norm_ratio(5, 0, 0.125, 1.0, nu, 0.5, Ell0Closure::OuterCauchy { slope: 0.0 }, 1601).unwrap();
        let b = annulus_norm_ratio(5, 0, 0.0625, 0.5, nu, 0.5, Ell0Closure::OuterCauchy { slope: 0.0 }, 1601).unwrap();
        assert!((a / b - 1.0).abs() < 0.3, "{a} {b}");
    }

    #[test]
    fn window_constant() {
        assert!((delta_nk(5, 2) - 1.9526).abs() < 1e-4);
    }
}
