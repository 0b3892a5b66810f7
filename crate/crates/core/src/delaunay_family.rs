//! The singular family u_{ε,R,a} on the punctured ball built from one Delaunay orbit.

use crate::delaunay_ode::{DelaunayOrbit, DelaunayParams};
use crate::error::{Error, Result};
use crate::sigma2_operator::{evaluate_h, CurvatureData, RadialField, Warp};
use std::sync::Arc;

/// Admissible size of |a|·|x| for the translated family.
pub const R0: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyParams {
    pub base: DelaunayParams,
    /// Scale R along the Delaunay axis.
    pub r_scale: f64,
    /// Translation of the point at infinity.
    pub a: Vec<f64>,
    /// Neck offset; when present R was derived from it.
    pub b: Option<f64>,
    /// Exponent with r_ε = ε^s.
    pub s: f64,
}

impl FamilyParams {
    pub fn new(base: DelaunayParams, r_scale: f64, a: Vec<f64>, s: f64) -> Result<Self> {
        if !(r_scale > 0.0) {
            return Err(Error::InvalidParams(format!("scale R must be positive, got {r_scale}")));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParams(format!("exponent s must lie in (0,1), got {s}")));
        }
        if a.len() != base.n {
            return Err(Error::InvalidParams(format!("translation has {} components, expected {}", a.len(), base.n)));
        }
        Ok(Self { base, r_scale, a, b: None, s })
    }

    /// R from the neck offset b via R^{(4−n)/4} = 2(1+b)ε^{(4−n)/4}.
    pub fn with_neck_offset(base: DelaunayParams, b: f64, a: Vec<f64>, s: f64) -> Result<Self> {
        if base.k != 2 {
            return Err(Error::InvalidParams("the neck offset normalization needs k = 2".into()));
        }
        if !(b.abs() <= 0.5) {
            return Err(Error::InvalidParams(format!("|b| must be at most 1/2, got {b}")));
        }
        let mut p = Self::new(base, scale_from_offset(base.n, base.eps, b), a, s)?;
        p.b = Some(b);
        Ok(p)
    }

    /// r_ε = ε^s
    pub fn r_eps(&self) -> f64 {
        self.base.eps.powf(self.s)
    }

    pub fn a_norm(&self) -> f64 {
        self.a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// R = (2(1+b))^{−4/(n−4)} ε
pub fn scale_from_offset(n: usize, eps: f64, b: f64) -> f64 {
    (2.0 * (1.0 + b)).powf(-4.0 / (n as f64 - 4.0)) * eps
}

/// A family member bound to a shared orbit.
#[derive(Debug, Clone)]
pub struct DelaunayFamily {
    pub params: FamilyParams,
    pub orbit: Arc<DelaunayOrbit>,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

impl DelaunayFamily {
    pub fn new(params: FamilyParams, orbit: Arc<DelaunayOrbit>) -> Result<Self> {
        if orbit.params != params.base {
            return Err(Error::InvalidParams("orbit was integrated for different parameters".into()));
        }
        Ok(Self { params, orbit })
    }

    /// Integrates an orbit long enough for radii down to `r_min`.
    pub fn build(params: FamilyParams, r_min: f64, tol: f64) -> Result<Self> {
        let t_max = (-r_min.ln() + params.r_scale.ln().abs() + 2.0).max(4.0);
        let orbit = DelaunayOrbit::integrate(params.base, t_max, tol)?;
        Self::new(params, Arc::new(orbit))
    }

    fn amp(&self) -> f64 {
        self.orbit.constants().a
    }

    /// u_{ε,R,a}(x) = |x − a|x|²|^{−A} v_ε(−2 log|x| + log|x − a|x|²| + log R).
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.eval_with(x, &self.params.a)
    }

    fn eval_with(&self, x: &[f64], a: &[f64]) -> Result<f64> {
        let r = norm(x);
        if !(r > 0.0 && r <= 1.0 + 1e-12) {
            return Err(Error::OutOfDomain(r));
        }
        let ar = norm(a) * r;
        if ar >= R0 {
            return Err(Error::OutOfDomain(ar));
        }
        let y: Vec<f64> = x.iter().zip(a).map(|(xi, ai)| xi - ai * r * r).collect();
        let ry = norm(&y);
        let (v, _, _) = self.orbit.state_at(-2.0 * r.ln() + ry.ln() + self.params.r_scale.ln())?;
        Ok(ry.powf(-self.amp()) * v)
    }

    fn require_radial(&self) -> Result<()> {
        if self.params.a.iter().any(|&c| c != 0.0) {
            return Err(Error::NotRadial);
        }
        Ok(())
    }

    /// Orbit data (v, v̇, v̈, v⃛) at the cylinder time matching radius r.
    fn orbit_jet(&self, r: f64) -> Result<[f64; 4]> {
        let t = -r.ln() + self.params.r_scale.ln();
        let (v, vd, vdd) = self.orbit.state_at(t)?;
        Ok([v, vd, vdd, self.orbit.vdddot_at(t)?])
    }

    /// (u, r∂_r u, r²∂²_r u) of the radial member, from the orbit derivatives.
    pub fn radial_derivatives(&self, r: f64) -> Result<(f64, f64, f64)> {
        self.require_radial()?;
        let a = self.amp();
        let [v, vd, vdd, _] = self.orbit_jet(r)?;
        let p = r.powf(-a);
        let d1 = -a * v - vd;
        let d2 = a * a * v + 2.0 * a * vd + vdd;
        Ok((p * v, p * d1, p * (d2 - d1)))
    }

    /// Radial member on increasing radii with exact derivatives.
    pub fn radial_field(&self, radii: &[f64]) -> Result<RadialField> {
        let mut u = Vec::with_capacity(radii.len());
        let mut du = Vec::with_capacity(radii.len());
        let mut d2u = Vec::with_capacity(radii.len());
        for &r in radii {
            let (a, b, c) = self.radial_derivatives(r)?;
            u.push(a);
            du.push(b / r);
            d2u.push(c / (r * r));
        }
        RadialField::new(radii.to_vec(), u, du, d2u, CurvatureData::flat(), Warp::Euclidean)
    }

    /// Normalized remainder of the first-order expansion in a, and for R ≤ |x|
    /// the variant normalized by |a|²ε^A R^{−A}|x|².
    pub fn expansion_residual_a(&self, x: &[f64]) -> Result<(f64, Option<f64>)> {
        let a = &self.params.a;
        let an = norm(a);
        let full = self.eval(x)?;
        if an == 0.0 {
            return Ok((0.0, Some(0.0)));
        }
        let r = norm(x);
        let zero = vec![0.0; a.len()];
        let base = DelaunayFamily { params: FamilyParams { a: zero, ..self.params.clone() }, orbit: self.orbit.clone() };
        let (u, ru, _) = base.radial_derivatives(r)?;
        let ax: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
        let remainder = (full - (u + (2.0 * self.amp() * u + ru) * ax)).abs();
        let amp = self.amp();
        let k = self.params.base.k as f64;
        let n = self.params.base.n as f64;
        let primary = remainder / (an * an * r.powf((6.0 * k - n) / (2.0 * k)));
        let secondary = (self.params.r_scale <= r).then(|| {
            remainder / (an * an * self.params.base.eps.powf(amp) * self.params.r_scale.powf(-amp) * r * r)
        });
        Ok((primary, secondary))
    }

    /// Degree-one profile w = (2A u + r∂_r u)·r of ∂_a u at a = 0, with exact derivatives.
    pub fn mode1_jacobi_field(&self, radii: &[f64]) -> Result<RadialField> {
        self.require_radial()?;
        let a = self.amp();
        let mut w = Vec::with_capacity(radii.len());
        let mut dw = Vec::with_capacity(radii.len());
        let mut d2w = Vec::with_capacity(radii.len());
        for &r in radii {
            let [v, vd, vdd, vddd] = self.orbit_jet(r)?;
            // w = r^{1−A} q(τ) with q = Av − v̇; r∂_r acts as (1−A) − ∂_τ
            let q = a * v - vd;
            let q1 = a * vd - vdd;
            let q2 = a * vdd - vddd;
            let p = r.powf(1.0 - a);
            let m = 1.0 - a;
            let d1 = p * (m * q - q1);
            let d2 = p * (m * m * q - 2.0 * m * q1 + q2);
            w.push(p * q);
            dw.push(d1 / r);
            d2w.push((d2 - d1) / (r * r));
        }
        RadialField::new(radii.to_vec(), w, dw, d2w, CurvatureData::flat(), Warp::Euclidean)
    }
}

/// Sup over a log-uniform grid on [r_lo, r_hi] of |r^n H_δ(u_{ε,R})|, with
/// derivatives of u taken by finite differences in log r.
pub fn family_residual(family: &DelaunayFamily, r_lo: f64, r_hi: f64, points: usize) -> Result<f64> {
    family.require_radial()?;
    let n = family.params.base.n;
    let (x0, x1) = (r_lo.ln(), r_hi.ln());
    let radii: Vec<f64> = (0..points).map(|i| (x0 + (x1 - x0) * i as f64 / (points - 1) as f64).exp()).collect();
    let u = radii.iter().map(|&r| family.radial_derivatives(r).map(|d| d.0)).collect::<Result<Vec<_>>>()?;
    let field = RadialField::from_log_samples(radii.clone(), u, CurvatureData::flat())?;
    let h = evaluate_h(&field, n)?;
    Ok(radii.iter().zip(&h).map(|(r, h)| (r.powi(n as i32) * h).abs()).fold(0.0, f64::max))
}

/// Observed ratios of the ball-picture neck estimates over |x| ∈ [r_min, 1].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BallNeckReport {
    pub eps: f64,
    /// u against (ε^A/2)(R^{−A} + R^A|x|^{−2A})
    pub ratio_u: f64,
    /// r∂_r u against −Aε^A R^A|x|^{−2A}
    pub ratio_du: f64,
    /// r²∂²_r u against A(2A+1)ε^A R^A|x|^{−2A}
    pub ratio_d2u: f64,
}

/// Sup-ratios of the ball-picture analogues, each normalized by (Rε)^{(n+2k)/2k}|x|^{−n/k}.
pub fn ball_neck_estimates(family: &DelaunayFamily, r_min: f64, samples: usize) -> Result<BallNeckReport> {
    family.require_radial()?;
    let a = family.amp();
    let (n, k) = (family.params.base.n as f64, family.params.base.k as f64);
    let eps = family.params.base.eps;
    let big_r = family.params.r_scale;
    let ea = eps.powf(a);
    let beta = (n + 2.0 * k) / (2.0 * k);
    let mut rep = BallNeckReport { eps, ratio_u: 0.0, ratio_du: 0.0, ratio_d2u: 0.0 };
    for i in 0..samples {
        let r = (r_min.ln() * i as f64 / (samples - 1) as f64).exp();
        let (u, ru, rru) = family.radial_derivatives(r)?;
        let weight = 1.0 / ((big_r * eps).powf(beta) * r.powf(-n / k));
        let lead = ea * big_r.powf(a) * r.powf(-2.0 * a);
        rep.ratio_u = rep.ratio_u.max((u - 0.5 * ea * big_r.powf(-a) - 0.5 * lead).abs() * weight);
        rep.ratio_du = rep.ratio_du.max((ru + a * lead).abs() * weight);
        rep.ratio_d2u = rep.ratio_d2u.max((rru - a * (2.0 * a + 1.0) * lead).abs() * weight);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigma2_operator::evaluate_l_mode;

    fn family(eps: f64, r_scale: f64, a: Vec<f64>) -> DelaunayFamily {
        let base = DelaunayParams::new(5, 2, eps).unwrap();
        DelaunayFamily::build(FamilyParams::new(base, r_scale, a, 0.1).unwrap(), 1e-4, 1e-11).unwrap()
    }

    #[test]
    fn reduces_to_radial_profile() {
        let f = family(0.1, 1.0, vec![0.0; 5]);
        let x = [0.3, 0.0, 0.4, 0.0, 0.0];
        let (v, _, _) = f.orbit.state_at(2f64.ln()).unwrap();
        assert!((f.eval(&x).unwrap() - 0.5f64.powf(-0.25) * v).abs() < 1e-9);
    }

    #[test]
    fn two_paths_at_half_radius() {
        let f = family(0.1, 1.0, vec![0.0; 5]);
        let (u, _, _) = f.radial_derivatives(0.5).unwrap();
        let direct = f.eval(&[0.0, 0.5, 0.0, 0.0, 0.0]).unwrap();
        assert!((u - direct).abs() < 1e-12);
    }

    #[test]
    fn neck_offset_fixes_scale() {
        let base = DelaunayParams::new(5, 2, 0.05).unwrap();
        let p = FamilyParams::with_neck_offset(base, 0.2, vec![0.0; 5], 0.1).unwrap();
        let lhs = p.r_scale.powf(-0.25);
        assert!((lhs - 2.4 * 0.05f64.powf(-0.25)).abs() < 1e-12 * lhs);
        assert!(FamilyParams::with_neck_offset(base, 0.6, vec![0.0; 5], 0.1).is_err());
    }

    #[test]
    fn domain_guards() {
        let f = family(0.1, 1.0, vec![0.2, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(f.eval(&[0.6, 0.0, 0.0, 0.0, 0.0]), Err(Error::OutOfDomain(_))));
        assert!(f.eval(&[0.3, 0.0, 0.0, 0.0, 0.0]).is_ok());
        assert!(matches!(f.radial_derivatives(0.3), Err(Error::NotRadial)));
        let g = family(0.1, 1.0, vec![0.0; 5]);
        assert!(matches!(g.radial_derivatives(1e-9), Err(Error::OrbitRangeExceeded { .. })));
    }

    #[test]
    fn derivatives_match_differences() {
        let f = family(0.1, 0.7, vec![0.0; 5]);
        let r = 0.3;
        let h = 1e-4;
        let u = |r: f64| f.radial_derivatives(r).unwrap().0;
        let (_, ru, rru) = f.radial_derivatives(r).unwrap();
        let d1 = (u(r + h) - u(r - h)) / (2.0 * h);
        let d2 = (u(r + h) - 2.0 * u(r) + u(r - h)) / (h * h);
        assert!((ru - r * d1).abs() < 1e-6 * ru.abs());
        assert!((rru - r * r * d2).abs() < 1e-4 * rru.abs());
    }

    #[test]
    fn neck_radius_relation() {
        // v̇ = 0 at the orbit minimum t = 0, i.e. at r = R
        let f = family(0.1, 0.3, vec![0.0; 5]);
        let (u, ru, _) = f.radial_derivatives(0.3).unwrap();
        assert!((ru + 0.25 * u).abs() < 1e-13);
        let w = f.mode1_jacobi_field(&[0.3]).unwrap();
        assert!((w.u[0] - 0.25 * u * 0.3).abs() < 1e-13);
    }

    #[test]
    fn jacobi_profile_derivatives_are_consistent() {
        let f = family(0.1, 1.0, vec![0.0; 5]);
        let h = 1e-4;
        let radii = [0.2 - h, 0.2, 0.2 + h];
        let w = f.mode1_jacobi_field(&radii).unwrap();
        let d1 = (w.u[2] - w.u[0]) / (2.0 * h);
        let d2 = (w.u[2] - 2.0 * w.u[1] + w.u[0]) / (h * h);
        assert!((w.du[1] - d1).abs() < 1e-6 * w.du[1].abs().max(1.0));
        assert!((w.d2u[1] - d2).abs() < 1e-4 * w.d2u[1].abs().max(1.0));
    }

    #[test]
    fn jacobi_profile_is_in_the_mode_one_kernel() {
        let f = family(0.1, 1.0, vec![0.0; 5]);
        let radii: Vec<f64> = (0..50).map(|i| 0.01 + 0.9 * i as f64 / 49.0).collect();
        let u = f.radial_field(&radii).unwrap();
        let w = f.mode1_jacobi_field(&radii).unwrap();
        let l = evaluate_l_mode(&u, &w, 5, 1).unwrap();
        for (i, r) in radii.iter().enumerate() {
            let scale = u.u[i].powi(3) * w.u[i].abs().max(u.u[i] * r) / (r * r);
            assert!(l[i].abs() < 1e-7 * scale, "r {r} L {}", l[i]);
        }
    }

    #[test]
    fn zero_translation_has_zero_remainder() {
        let f = family(0.1, 1.0, vec![0.0; 5]);
        assert_eq!(f.expansion_residual_a(&[0.2, 0.1, 0.0, 0.0, 0.0]).unwrap(), (0.0, Some(0.0)));
    }

    #[test]
    fn expansion_remainder_is_quadratic() {
        let x = [0.3, 0.2, 0.0, 0.1, 0.0];
        let mut vals = Vec::new();
        for &s in &[0.1, 0.05, 0.025] {
            let f = family(0.1, 0.2, vec![s * 0.6, -s * 0.8, 0.0, 0.0, 0.0]);
            vals.push(f.expansion_residual_a(&x).unwrap());
        }
        for w in vals.windows(2) {
            assert!(w[1].0 < 2.0 * w[0].0 && w[0].0 < 2.0 * w[1].0, "{vals:?}");
            let (p, q) = (w[0].1.unwrap(), w[1].1.unwrap());
            assert!(q < 2.0 * p && p < 2.0 * q);
        }
    }

    #[test]
    fn flat_residual_converges() {
        let f = family(0.1, 1.0, vec![0.0; 5]);
        let e1 = family_residual(&f, 0.01, 0.8, 201).unwrap();
        let e2 = family_residual(&f, 0.01, 0.8, 401).unwrap();
        assert!((e1 / e2).log2() > 1.8, "{e1} {e2}");
    }
}
