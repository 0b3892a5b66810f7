//! The Delaunay-type ODE of the constant σ_k-curvature equation on the cylinder
//!
//! (v² − c²v̇²)^{k−1}(v − c²v̈) = n/(n−2k) · v^{X−1},  c = 2k/(n−2k),  X = 2kn/(n−2k),
//!
//! its conserved energy H(v, w) = (v² − c²w²)^k − v^X, and an energy-projected
//! adaptive integrator producing orbits on a uniform output grid.

use crate::emit;
use crate::error::{Error, Result};
use crate::rk::{dopri_step, State};
use serde::Serialize;
use serde_json::{json, Value};

/// Default spacing of the output grid.
pub const DEFAULT_SPACING: f64 = 0.005;

/// Largest step used when re-integrating between grid nodes for off-grid values.
const DENSE_SUBSTEP: f64 = 0.0025;

/// Constants derived from (n, k).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeConstants {
    pub n: usize,
    pub k: usize,
    /// c² = (2k/(n−2k))²
    pub c2: f64,
    /// A = (n−2k)/2k, the linear growth rate
    pub a: f64,
    /// X = 2kn/(n−2k)
    pub x: f64,
    /// n(n−2k)/4k², the coefficient of the nonlinear term
    pub kappa: f64,
    /// (n+2k)/(n−2k)
    pub p: f64,
}

impl OdeConstants {
    pub fn new(n: usize, k: usize) -> Self {
        let (nf, kf) = (n as f64, k as f64);
        let m = nf - 2.0 * kf;
        Self {
            n,
            k,
            c2: (2.0 * kf / m).powi(2),
            a: m / (2.0 * kf),
            x: 2.0 * kf * nf / m,
            kappa: nf * m / (4.0 * kf * kf),
            p: (nf + 2.0 * kf) / m,
        }
    }

    /// h = v² − c²w²
    pub fn cone(&self, v: f64, w: f64) -> f64 {
        v * v - self.c2 * w * w
    }

    /// v̈ as a function of v alone on the energy level `energy`:
    /// A²v − κ (v^X/(H+v^X))^{(k−1)/k} v^p.
    pub fn accel_at_energy(&self, v: f64, energy: f64) -> f64 {
        let q = (self.k as f64 - 1.0) / self.k as f64;
        let vx = v.powf(self.x);
        let s = vx / (energy + vx);
        let s_q = if q == 0.0 { 1.0 } else { s.powf(q) };
        self.a * self.a * v - self.kappa * s_q * v.powf(self.p)
    }

    /// d v̈ / d v on the energy level `energy`.
    pub fn accel_slope_at_energy(&self, v: f64, energy: f64) -> f64 {
        let q = (self.k as f64 - 1.0) / self.k as f64;
        let vx = v.powf(self.x);
        let s = vx / (energy + vx);
        let vp = v.powf(self.p);
        let mut d = self.p * v.powf(self.p - 1.0);
        if q != 0.0 {
            let ds = self.x * v.powf(self.x - 1.0) * energy / (energy + vx).powi(2);
            d = s.powf(q) * d + q * s.powf(q - 1.0) * ds * vp;
        }
        self.a * self.a - self.kappa * d
    }
}

/// Parameters of a Delaunay orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelaunayParams {
    pub n: usize,
    pub k: usize,
    pub eps: f64,
}

impl DelaunayParams {
    pub fn new(n: usize, k: usize, eps: f64) -> Result<Self> {
        if n < 5 || k < 1 || 2 * k >= n {
            return Err(Error::InvalidParams(format!("need n >= 5 and 1 <= k with 2k < n, got n = {n}, k = {k}")));
        }
        let top = Self::eps_max(n, k);
        if !(eps > 0.0 && eps < top) {
            return Err(Error::InvalidParams(format!("eps must lie in (0, {top}), got {eps}")));
        }
        Ok(Self { n, k, eps })
    }

    /// Upper end ((n−2k)/n)^{1/2k} of the admissible neck parameters.
    pub fn eps_max(n: usize, k: usize) -> f64 {
        ((n as f64 - 2.0 * k as f64) / n as f64).powf(1.0 / (2.0 * k as f64))
    }

    pub fn constants(&self) -> OdeConstants {
        OdeConstants::new(self.n, self.k)
    }

    /// v(0) = ε^{(n−2k)/2k}
    pub fn neck_value(&self) -> f64 {
        self.eps.powf(self.constants().a)
    }

    /// H₀ = ε^{n−2k} − ε^n
    pub fn energy(&self) -> f64 {
        let (n, k) = (self.n as f64, self.k as f64);
        self.eps.powf(n - 2.0 * k) - self.eps.powf(n)
    }
}

/// Constant solution v̄ = ((n−2k)/n)^{(n−2k)/4k²} of the cylinder equation.
pub fn cylinder_value(n: usize, k: usize) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    ((nf - 2.0 * kf) / nf).powf((nf - 2.0 * kf) / (4.0 * kf * kf))
}

/// The conserved energy H(v, w) = (v² − c²w²)^k − v^X.
pub fn hamiltonian(v: f64, w: f64, n: usize, k: usize) -> Result<f64> {
    let c = OdeConstants::new(n, k);
    if !(v > 0.0) {
        return Err(Error::Domain(format!("hamiltonian needs v > 0, got {v}")));
    }
    let h = c.cone(v, w);
    if h < 0.0 {
        return Err(Error::Domain(format!("(v, w) = ({v}, {w}) outside the cone v² ≥ c²w²")));
    }
    Ok(h.powi(k as i32) - v.powf(c.x))
}

/// v̈ from the ODE at state (v, v̇).
pub fn rhs_second_order(v: f64, vdot: f64, n: usize, k: usize) -> Result<f64> {
    let c = OdeConstants::new(n, k);
    let h = c.cone(v, vdot);
    if !(v > 0.0) || h <= 1e-14 * v * v {
        return Err(Error::ConeViolation { t: f64::NAN, h });
    }
    // v^{X−1} h^{1−k} = (v^X / h^k)^{(k−1)/k} v^p, with h^k = H + v^X
    let energy = h.powi(k as i32) - v.powf(c.x);
    Ok(c.accel_at_energy(v, energy))
}

/// A sampled solution on a uniform grid symmetric about the neck at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaunayOrbit {
    pub params: DelaunayParams,
    pub t0: f64,
    pub dt: f64,
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub vdot: Vec<f64>,
    pub vddot: Vec<f64>,
    pub energy: f64,
    pub hmin: f64,
}

fn project_to_energy(c: &OdeConstants, y: &mut State, energy: f64) {
    let k = c.k as i32;
    for _ in 0..3 {
        let (v, w) = (y[0], y[1]);
        let h = c.cone(v, w);
        let hk1 = h.powi(k - 1);
        let vx = v.powf(c.x);
        let res = h * hk1 - vx - energy;
        let gv = 2.0 * c.k as f64 * hk1 * v - c.x * vx / v;
        let gw = -2.0 * c.k as f64 * c.c2 * hk1 * w;
        let g2 = gv * gv + gw * gw;
        if g2 == 0.0 || res == 0.0 {
            break;
        }
        let s = res / g2;
        y[0] -= s * gv;
        y[1] -= s * gw;
    }
}

impl DelaunayOrbit {
    /// Integrates over [−t_max, t_max] with the default output spacing.
    pub fn integrate(params: DelaunayParams, t_max: f64, tol: f64) -> Result<Self> {
        Self::integrate_with_spacing(params, t_max, tol, DEFAULT_SPACING)
    }

    pub fn integrate_with_spacing(params: DelaunayParams, t_max: f64, tol: f64, spacing: f64) -> Result<Self> {
        if !(t_max > 0.0) || !(tol > 0.0) || !(spacing > 0.0) {
            return Err(Error::InvalidParams("t_max, tol and spacing must be positive".into()));
        }
        let c = params.constants();
        let energy = params.energy();
        let m = (t_max / spacing).ceil().max(1.0) as usize;
        let dt = t_max / m as f64;
        let y0: State = [params.neck_value(), 0.0];
        let forward = march(&c, energy, y0, dt, m, tol)?;
        let backward = march(&c, energy, y0, -dt, m, tol)?;

        let total = 2 * m + 1;
        let mut orbit = Self {
            params,
            t0: -(m as f64) * dt,
            dt,
            t: Vec::with_capacity(total),
            v: Vec::with_capacity(total),
            vdot: Vec::with_capacity(total),
            vddot: Vec::with_capacity(total),
            energy,
            hmin: f64::INFINITY,
        };
        for j in (1..=m).rev() {
            orbit.push(&c, j as f64 * -dt, backward[j]);
        }
        for (j, y) in forward.iter().enumerate() {
            orbit.push(&c, j as f64 * dt, *y);
        }
        let drift = orbit.relative_drift();
        let budget = 100.0 * tol;
        if drift > budget {
            return Err(Error::ToleranceNotMet { drift, budget });
        }
        Ok(orbit)
    }

    /// The constant cylinder solution v ≡ v̄ (the ε → ε_max limit).
    pub fn cylinder(n: usize, k: usize, t_max: f64, spacing: f64) -> Result<Self> {
        let eps = DelaunayParams::eps_max(n, k);
        DelaunayParams::new(n, k, 0.5 * eps)?;
        let params = DelaunayParams { n, k, eps };
        let c = params.constants();
        let vbar = cylinder_value(n, k);
        let m = (t_max / spacing).ceil().max(1.0) as usize;
        let dt = t_max / m as f64;
        let mut orbit = Self {
            params,
            t0: -(m as f64) * dt,
            dt,
            t: vec![],
            v: vec![],
            vdot: vec![],
            vddot: vec![],
            energy: hamiltonian(vbar, 0.0, n, k)?,
            hmin: f64::INFINITY,
        };
        for j in 0..=2 * m {
            orbit.push(&c, orbit.t0 + j as f64 * dt, [vbar, 0.0]);
        }
        Ok(orbit)
    }

    fn push(&mut self, c: &OdeConstants, t: f64, y: State) {
        let h = c.cone(y[0], y[1]);
        self.hmin = self.hmin.min(h);
        self.t.push(t);
        self.v.push(y[0]);
        self.vdot.push(y[1]);
        self.vddot.push(c.accel_at_energy(y[0], self.energy));
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.t[0], self.t[self.len() - 1])
    }

    pub fn constants(&self) -> OdeConstants {
        self.params.constants()
    }

    /// h_ε = v² − c²v̇² at node i.
    pub fn h(&self, i: usize) -> f64 {
        self.constants().cone(self.v[i], self.vdot[i])
    }

    /// Third derivative of v at node i.
    pub fn vdddot(&self, i: usize) -> f64 {
        self.constants().accel_slope_at_energy(self.v[i], self.energy) * self.vdot[i]
    }

    /// max_i |H(v_i, v̇_i) − H₀| / max(|H₀|, ε^{n−2k}).
    pub fn relative_drift(&self) -> f64 {
        let scale = self.energy.abs().max(self.params.eps.powf((self.params.n - 2 * self.params.k) as f64));
        let (n, k) = (self.params.n, self.params.k);
        (0..self.len())
            .map(|i| match hamiltonian(self.v[i], self.vdot[i], n, k) {
                Ok(h) => (h - self.energy).abs() / scale,
                Err(_) => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }

    /// (v, v̇, v̈) at an arbitrary time, re-integrating from the nearest node.
    pub fn state_at(&self, t: f64) -> Result<(f64, f64, f64)> {
        let (lo, hi) = self.t_range();
        if !(t >= lo - 1e-12 && t <= hi + 1e-12) {
            return Err(Error::OrbitRangeExceeded { t, lo, hi });
        }
        let j = (((t - self.t0) / self.dt).round() as usize).min(self.len() - 1);
        let delta = t - self.t[j];
        if delta.abs() < 1e-15 {
            return Ok((self.v[j], self.vdot[j], self.vddot[j]));
        }
        let c = self.constants();
        let energy = self.energy;
        let f = |y: &State| Ok([y[1], c.accel_at_energy(y[0], energy)]);
        let steps = (delta.abs() / DENSE_SUBSTEP).ceil().max(1.0) as usize;
        let h = delta / steps as f64;
        let mut y = [self.v[j], self.vdot[j]];
        for _ in 0..steps {
            y = dopri_step(&f, &y, h)?.0;
        }
        Ok((y[0], y[1], c.accel_at_energy(y[0], energy)))
    }

    /// Third derivative of v at an arbitrary time.
    pub fn vdddot_at(&self, t: f64) -> Result<f64> {
        let (v, vd, _) = self.state_at(t)?;
        Ok(self.constants().accel_slope_at_energy(v, self.energy) * vd)
    }

    /// Index range of nodes inside [a, b].
    pub fn window(&self, a: f64, b: f64) -> Result<std::ops::Range<usize>> {
        let (lo, hi) = self.t_range();
        if a < lo - 1e-12 || b > hi + 1e-12 || a >= b {
            return Err(Error::OrbitRangeExceeded { t: if a < lo { a } else { b }, lo, hi });
        }
        let i0 = ((a - self.t0) / self.dt - 1e-9).ceil().max(0.0) as usize;
        let i1 = (((b - self.t0) / self.dt + 1e-9).floor() as usize).min(self.len() - 1);
        Ok(i0..i1 + 1)
    }

    pub fn to_csv(&self) -> String {
        let c = self.constants();
        let (n, k) = (self.params.n, self.params.k);
        emit::csv_table(
            &["t", "v", "vdot", "vddot", "h", "H"],
            (0..self.len()).map(|i| {
                let h = c.cone(self.v[i], self.vdot[i]);
                let e = hamiltonian(self.v[i], self.vdot[i], n, k).unwrap_or(f64::NAN);
                vec![self.t[i], self.v[i], self.vdot[i], self.vddot[i], h, e]
            }),
        )
    }

    pub fn to_json(&self) -> Value {
        let c = self.constants();
        let (n, k) = (self.params.n, self.params.k);
        let h: Vec<f64> = (0..self.len()).map(|i| c.cone(self.v[i], self.vdot[i])).collect();
        let e: Vec<f64> = (0..self.len())
            .map(|i| hamiltonian(self.v[i], self.vdot[i], n, k).unwrap_or(f64::NAN))
            .collect();
        json!({
            "params": self.params,
            "energy": self.energy,
            "hmin": self.hmin,
            "t": self.t,
            "v": self.v,
            "vdot": self.vdot,
            "vddot": self.vddot,
            "h": h,
            "H": e,
        })
    }
}

/// Integrates `m` output intervals of signed length `dt` from `y0`.
fn march(c: &OdeConstants, energy: f64, y0: State, dt: f64, m: usize, tol: f64) -> Result<Vec<State>> {
    let f = |y: &State| {
        if !(y[0] > 0.0) {
            return Err(Error::ConeViolation { t: f64::NAN, h: c.cone(y[0], y[1]) });
        }
        Ok([y[1], c.accel_at_energy(y[0], energy)])
    };
    let mut out = Vec::with_capacity(m + 1);
    out.push(y0);
    let mut y = y0;
    let mut step = dt;
    let floor = 1e-12 * dt.abs();
    for j in 0..m {
        let mut remaining = dt;
        while remaining.abs() > 1e-15 * dt.abs() {
            let h = if step.abs() > remaining.abs() { remaining } else { step };
            let (y_new, e) = dopri_step(&f, &y, h)?;
            let sc0 = tol + tol * y[0].abs().max(y_new[0].abs());
            let sc1 = tol + tol * y[1].abs().max(y_new[1].abs());
            let err = (e[0] / sc0).abs().max((e[1] / sc1).abs());
            if err <= 1.0 {
                y = y_new;
                project_to_energy(c, &mut y, energy);
                remaining -= h;
                let hcone = c.cone(y[0], y[1]);
                if !(y[0] > 0.0) || hcone <= 1e-14 * y[0] * y[0] {
                    let t = (j as f64) * dt + (dt - remaining);
                    return Err(Error::ConeViolation { t, h: hcone });
                }
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                step = h * grow;
                if step.abs() > dt.abs() {
                    step = dt;
                }
            } else {
                step = h * (0.9 * err.powf(-0.2)).max(0.1);
                if step.abs() < floor {
                    return Err(Error::ToleranceNotMet { drift: err, budget: 1.0 });
                }
            }
        }
        out.push(y);
    }
    Ok(out)
}

/// Observed sup-ratios of the neck asymptotics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeckReport {
    pub eps: f64,
    pub ratio_v: f64,
    pub ratio_vdot: f64,
    pub ratio_vddot: f64,
}

/// sup_t |v − ε^A cosh(At)| ε^{−(n+2k)/2k} e^{−(n+2k)|t|/2k} and the v̇, v̈ analogues.
pub fn verify_neck_estimates(orbit: &DelaunayOrbit) -> NeckReport {
    let c = orbit.constants();
    let (n, k) = (orbit.params.n as f64, orbit.params.k as f64);
    let eps = orbit.params.eps;
    let amp = eps.powf(c.a);
    let beta = (n + 2.0 * k) / (2.0 * k);
    let mut r = NeckReport { eps, ratio_v: 0.0, ratio_vdot: 0.0, ratio_vddot: 0.0 };
    for i in 0..orbit.len() {
        let t = orbit.t[i];
        let at = c.a * t;
        let weight = eps.powf(-beta) * (-beta * t.abs()).exp();
        let dv = orbit.v[i] - amp * at.cosh();
        let dw = orbit.vdot[i] - amp * c.a * at.sinh();
        let dz = orbit.vddot[i] - amp * c.a * c.a * at.cosh();
        r.ratio_v = r.ratio_v.max(dv.abs() * weight);
        r.ratio_vdot = r.ratio_vdot.max(dw.abs() * weight);
        r.ratio_vddot = r.ratio_vddot.max(dz.abs() * weight);
    }
    r
}

/// Mean spacing of successive minima of v, each refined by Newton's method on v̇.
pub fn period(orbit: &DelaunayOrbit) -> Result<f64> {
    let mut minima = Vec::new();
    for i in 0..orbit.len().saturating_sub(1) {
        if orbit.vdot[i] < 0.0 && orbit.vdot[i + 1] >= 0.0 {
            let mut t = if orbit.vdot[i + 1] == 0.0 { orbit.t[i + 1] } else { orbit.t[i] };
            for _ in 0..20 {
                let (_, vd, vdd) = orbit.state_at(t)?;
                if vdd == 0.0 {
                    break;
                }
                let dt = vd / vdd;
                t = (t - dt).clamp(orbit.t[i], orbit.t[i + 1]);
                if dt.abs() < 1e-15 {
                    break;
                }
            }
            minima.push(t);
        }
    }
    if minima.len() < 2 {
        return Err(Error::PeriodNotFound);
    }
    Ok((minima[minima.len() - 1] - minima[0]) / (minima.len() - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orbit(n: usize, k: usize, eps: f64, t_max: f64) -> DelaunayOrbit {
        DelaunayOrbit::integrate(DelaunayParams::new(n, k, eps).unwrap(), t_max, 1e-10).unwrap()
    }

    #[test]
    fn energy_at_unit_point_is_zero() {
        assert_eq!(hamiltonian(1.0, 0.0, 5, 2).unwrap(), 0.0);
    }

    #[test]
    fn energy_at_neck() {
        let v0 = 0.1f64.powf(0.25);
        let h = hamiltonian(v0, 0.0, 5, 2).unwrap();
        assert!((h - 0.09999).abs() < 1e-15);
    }

    #[test]
    fn energy_at_cylinder_matches_both_closed_forms() {
        for &(n, k) in &[(5usize, 2usize), (6, 2), (9, 2), (7, 3), (5, 1)] {
            let (nf, kf) = (n as f64, k as f64);
            let vbar = cylinder_value(n, k);
            let h = hamiltonian(vbar, 0.0, n, k).unwrap();
            let ratio = (nf - 2.0 * kf) / nf;
            let form1 = (2.0 * kf / nf) * ratio.powf((nf - 2.0 * kf) / (2.0 * kf));
            let form2 = (2.0 * kf / (nf - 2.0 * kf)) * ratio.powf(nf / (2.0 * kf));
            assert!((h - form1).abs() < 1e-14 && (h - form2).abs() < 1e-14);
        }
    }

    #[test]
    fn hamiltonian_rejects_points_outside_cone() {
        assert!(hamiltonian(0.1, 1.0, 5, 2).is_err());
        assert!(hamiltonian(-0.1, 0.0, 5, 2).is_err());
    }

    #[test]
    fn cylinder_constant_is_stationary() {
        for &(n, k) in &[(5usize, 2usize), (8, 3), (5, 1)] {
            assert!(rhs_second_order(cylinder_value(n, k), 0.0, n, k).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn cosh_profile_solves_the_ode() {
        for &(n, k) in &[(5usize, 2usize), (7, 2), (5, 1)] {
            let a = OdeConstants::new(n, k).a;
            for i in -150..=150 {
                let t = i as f64 * 0.1;
                let v = t.cosh().powf(-a);
                let vd = -a * v * t.tanh();
                let vdd = a * v * (a * t.tanh().powi(2) - 1.0 / t.cosh().powi(2));
                let r = rhs_second_order(v, vd, n, k).unwrap();
                assert!((r - vdd).abs() < 1e-10, "n={n} k={k} t={t}");
            }
        }
    }

    #[test]
    fn neck_acceleration_is_positive() {
        let v0 = 0.1f64.powf(0.25);
        assert!(rhs_second_order(v0, 0.0, 5, 2).unwrap() > 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(DelaunayParams::new(4, 1, 0.1).is_err());
        assert!(DelaunayParams::new(5, 3, 0.1).is_err());
        assert!(DelaunayParams::new(5, 2, DelaunayParams::eps_max(5, 2)).is_err());
        assert!(DelaunayParams::new(5, 2, 0.0).is_err());
        assert!(DelaunayParams::new(5, 2, 0.1).is_ok());
    }

    #[test]
    fn orbit_conserves_energy_and_stays_in_cone() {
        let o = orbit(5, 2, 0.1, 10.0);
        assert!((o.energy - 0.09999).abs() < 1e-15);
        assert!(o.relative_drift() <= 1e-8);
        assert!(o.hmin > 0.0);
        assert!(o.v.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn orbit_is_even() {
        let o = orbit(6, 2, 0.2, 8.0);
        let m = o.len() - 1;
        for i in 0..o.len() {
            assert!((o.v[i] - o.v[m - i]).abs() < 1e-9);
            assert!((o.vdot[i] + o.vdot[m - i]).abs() < 1e-9);
        }
    }

    #[test]
    fn orbit_respects_bound_sandwich() {
        let o = orbit(5, 2, 0.05, 12.0);
        let c = o.constants();
        let v0 = o.params.neck_value();
        for i in 0..o.len() {
            assert!(o.v[i] >= v0 * (1.0 - 1e-12));
            assert!(o.v[i] <= v0 * (c.a * o.t[i]).cosh() * (1.0 + 1e-10));
        }
    }

    #[test]
    fn dense_values_match_finer_grid() {
        let p = DelaunayParams::new(5, 2, 0.1).unwrap();
        let coarse = DelaunayOrbit::integrate(p, 4.0, 1e-11).unwrap();
        let fine = DelaunayOrbit::integrate_with_spacing(p, 4.0, 1e-11, 0.0025).unwrap();
        for i in (1..fine.len()).step_by(2) {
            let (v, vd, _) = coarse.state_at(fine.t[i]).unwrap();
            assert!((v - fine.v[i]).abs() < 1e-11);
            assert!((vd - fine.vdot[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn third_derivative_matches_finite_difference() {
        let o = orbit(5, 2, 0.1, 4.0);
        let i = 300;
        let fd = (o.vddot[i + 1] - o.vddot[i - 1]) / (2.0 * o.dt);
        assert!((fd - o.vdddot(i)).abs() < 1e-4 * o.vdddot(i).abs().max(1.0));
    }

    #[test]
    fn state_outside_range_is_an_error() {
        let o = orbit(5, 2, 0.1, 2.0);
        assert!(matches!(o.state_at(3.0), Err(Error::OrbitRangeExceeded { .. })));
    }

    #[test]
    fn period_is_stable_under_refinement() {
        let p = DelaunayParams::new(5, 2, 0.1).unwrap();
        let a = period(&DelaunayOrbit::integrate(p, 30.0, 1e-10).unwrap()).unwrap();
        let b = period(&DelaunayOrbit::integrate(p, 30.0, 1e-12).unwrap()).unwrap();
        assert!(a > 0.0 && ((a - b) / a).abs() < 1e-6, "{a} {b}");
    }

    #[test]
    fn constant_orbit_has_no_period() {
        let o = DelaunayOrbit::cylinder(5, 2, 5.0, 0.01).unwrap();
        assert_eq!(period(&o), Err(Error::PeriodNotFound));
    }

    #[test]
    fn neck_report_is_zero_at_neck_contributions() {
        let o = orbit(5, 2, 0.1, 10.0);
        let r = verify_neck_estimates(&o);
        assert!(r.ratio_v.is_finite() && r.ratio_v > 0.0);
        let mid = o.len() / 2;
        assert_eq!(o.t[mid], 0.0);
        assert_eq!(o.vdot[mid], 0.0);
    }

    #[test]
    fn csv_header_and_rows() {
        let o = orbit(5, 2, 0.1, 0.1);
        let csv = o.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,v,vdot,vddot,h,H");
        assert_eq!(lines.count(), o.len());
        assert_eq!(o.to_json()["params"]["n"], 5);
    }
}
