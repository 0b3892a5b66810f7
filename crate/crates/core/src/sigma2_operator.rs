//! The σ₂ conformal operator H, its linearization L and remainder Q on radial data.
//!
//! Fields live on a warped product ds² + ρ(s)² g_{S^{n−1}}: Euclidean space
//! (ρ = r), the cylinder (ρ = 1) or the round sphere (ρ = sin s). For a
//! radial u the Hessian is diagonal with entries u″ (radial) and κu′
//! (tangential, n−1 times), κ = ρ′/ρ.

use crate::delaunay_ode::DelaunayOrbit;
use crate::error::{Error, Result};
use crate::fd;
use serde::Serialize;

/// Curvature of the background metric in the radial/tangential splitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureData {
    pub scalar: f64,
    pub ricci_radial: f64,
    pub ricci_tangential: f64,
}

impl CurvatureData {
    pub fn flat() -> Self {
        Self { scalar: 0.0, ricci_radial: 0.0, ricci_tangential: 0.0 }
    }

    pub fn round_sphere(n: usize) -> Self {
        let nf = n as f64;
        Self { scalar: nf * (nf - 1.0), ricci_radial: nf - 1.0, ricci_tangential: nf - 1.0 }
    }

    /// R × S^{n−1} with the unit round factor.
    pub fn cylinder(n: usize) -> Self {
        let nf = n as f64;
        Self { scalar: (nf - 1.0) * (nf - 2.0), ricci_radial: 0.0, ricci_tangential: nf - 2.0 }
    }
}

/// Warping function of the background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Warp {
    /// ρ(r) = r
    Euclidean,
    /// ρ ≡ 1
    Cylinder,
    /// ρ(s) = sin s
    Sphere,
}

impl Warp {
    /// κ = ρ′/ρ
    pub fn kappa(self, s: f64) -> f64 {
        match self {
            Warp::Euclidean => 1.0 / s,
            Warp::Cylinder => 0.0,
            Warp::Sphere => s.cos() / s.sin(),
        }
    }

    /// 1/ρ²
    pub fn inv_rho2(self, s: f64) -> f64 {
        match self {
            Warp::Euclidean => 1.0 / (s * s),
            Warp::Cylinder => 1.0,
            Warp::Sphere => 1.0 / s.sin().powi(2),
        }
    }
}

/// Values and first two derivatives of a radial function.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    pub grid: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub d2u: Vec<f64>,
    pub background: CurvatureData,
    pub warp: Warp,
}

impl RadialField {
    pub fn new(
        grid: Vec<f64>,
        u: Vec<f64>,
        du: Vec<f64>,
        d2u: Vec<f64>,
        background: CurvatureData,
        warp: Warp,
    ) -> Result<Self> {
        let m = grid.len();
        if u.len() != m || du.len() != m || d2u.len() != m {
            return Err(Error::GridMismatch("field arrays differ in length".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::GridMismatch("grid must be strictly increasing".into()));
        }
        Ok(Self { grid, u, du, d2u, background, warp })
    }

    /// Derivatives by fourth-order differences on a uniform grid.
    pub fn from_uniform_samples(grid: Vec<f64>, u: Vec<f64>, background: CurvatureData, warp: Warp) -> Result<Self> {
        if grid.len() < fd::MIN_POINTS {
            return Err(Error::GridMismatch("too few samples for differencing".into()));
        }
        let h = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
        let (du, d2u) = fd::derivatives(&u, h);
        Self::new(grid, u, du, d2u, background, warp)
    }

    /// Derivatives by fourth-order differences in log r on a log-uniform radial grid.
    pub fn from_log_samples(radii: Vec<f64>, u: Vec<f64>, background: CurvatureData) -> Result<Self> {
        if radii.len() < fd::MIN_POINTS || radii[0] <= 0.0 {
            return Err(Error::GridMismatch("need at least six positive radii".into()));
        }
        let h = (radii[radii.len() - 1].ln() - radii[0].ln()) / (radii.len() - 1) as f64;
        let (ux, uxx) = fd::derivatives(&u, h);
        let du = radii.iter().zip(&ux).map(|(r, d)| d / r).collect();
        let d2u = (0..radii.len()).map(|i| (uxx[i] - ux[i]) / (radii[i] * radii[i])).collect();
        Self::new(radii, u, du, d2u, background, Warp::Euclidean)
    }

    pub fn constant(grid: Vec<f64>, value: f64, background: CurvatureData, warp: Warp) -> Result<Self> {
        let m = grid.len();
        Self::new(grid, vec![value; m], vec![0.0; m], vec![0.0; m], background, warp)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Pointwise sum with another field on the same grid.
    pub fn plus(&self, other: &RadialField, scale: f64) -> Result<RadialField> {
        self.check_grid(other)?;
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + scale * y).collect::<Vec<_>>();
        Ok(RadialField {
            grid: self.grid.clone(),
            u: add(&self.u, &other.u),
            du: add(&self.du, &other.du),
            d2u: add(&self.d2u, &other.d2u),
            background: self.background,
            warp: self.warp,
        })
    }

    fn check_grid(&self, other: &RadialField) -> Result<()> {
        if self.grid.len() != other.grid.len()
            || self.grid.iter().zip(&other.grid).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
        {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    fn require_positive(&self) -> Result<()> {
        match self.u.iter().position(|&x| !(x > 0.0)) {
            Some(index) => Err(Error::NonPositiveFactor { index, value: self.u[index] }),
            None => Ok(()),
        }
    }
}

/// σ₁ and σ₂ of the Schouten tensor from scalar and Ricci curvature.
pub fn sigma1_sigma2_from_curvature(data: &CurvatureData, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let r = data.scalar;
    let ric2 = data.ricci_radial.powi(2) + (nf - 1.0) * data.ricci_tangential.powi(2);
    let s1 = r / (2.0 * (nf - 1.0));
    let s2 = nf * r * r / (8.0 * (nf - 1.0) * (nf - 2.0).powi(2)) - ric2 / (2.0 * (nf - 2.0).powi(2));
    (s1, s2)
}

/// Γ₂⁺ membership at a point.
pub fn admissibility_check(sigma1: f64, sigma2: f64) -> bool {
    sigma1 > 0.0 && sigma2 > 0.0
}

/// Pointwise radial invariants of a function at one sample.
#[derive(Debug, Clone, Copy)]
struct Jet {
    u: f64,
    du: f64,
    d2u: f64,
    kappa: f64,
    inv_rho2: f64,
}

impl Jet {
    fn laplacian(&self, n: f64) -> f64 {
        self.d2u + (n - 1.0) * self.kappa * self.du
    }

    fn hessian_sq(&self, n: f64) -> f64 {
        self.d2u * self.d2u + (n - 1.0) * (self.kappa * self.du).powi(2)
    }
}

fn jet(f: &RadialField, i: usize) -> Jet {
    let s = f.grid[i];
    Jet { u: f.u[i], du: f.du[i], d2u: f.d2u[i], kappa: f.warp.kappa(s), inv_rho2: f.warp.inv_rho2(s) }
}

/// The nine terms of the σ₂ operator at one point.
fn h_point(n: usize, c: &CurvatureData, j: &Jet) -> f64 {
    let nf = n as f64;
    let (_, sigma2) = sigma1_sigma2_from_curvature(c, n);
    let r = c.scalar;
    let (u, du, d2u) = (j.u, j.du, j.d2u);
    let lap = j.laplacian(nf);
    let grad2 = du * du;
    let ric_hess = c.ricci_radial * d2u + c.ricci_tangential * (nf - 1.0) * j.kappa * du;
    let ric_grad = c.ricci_radial * grad2;
    let g = (nf - 4.0) / (8.0 * (nf - 2.0));
    ((nf - 4.0) / 4.0).powi(2) * u.powi(4) * sigma2 + 0.5 * u * u * lap * lap - g * r * u * u * grad2 - g * r * u.powi(3) * lap
        + (nf - 2.0) / (nf - 4.0) * u * grad2 * lap
        - 0.5 * u * u * j.hessian_sq(nf)
        + (nf - 4.0) / (4.0 * (nf - 2.0)) * u.powi(3) * ric_hess
        - nf / (4.0 * (nf - 2.0)) * u * u * ric_grad
        + nf / (nf - 4.0) * u * grad2 * d2u
        - nf * (nf - 1.0) * (nf - 4.0).powi(2) / 128.0 * u.powf(4.0 * nf / (nf - 4.0))
}

/// Coefficients (of w″, w′, w) of the linearization at one point for the
/// direction w(s)·Y with Δ_S Y = −λY.
fn linear_point(n: usize, c: &CurvatureData, j: &Jet, lambda: f64) -> [f64; 3] {
    let nf = n as f64;
    let (_, sigma2) = sigma1_sigma2_from_curvature(c, n);
    let r = c.scalar;
    let (u, du, d2u) = (j.u, j.du, j.d2u);
    let lap = j.laplacian(nf);
    let grad2 = du * du;
    let ric_hess = c.ricci_radial * d2u + c.ricci_tangential * (nf - 1.0) * j.kappa * du;
    let ric_grad = c.ricci_radial * grad2;
    let g = (nf - 4.0) / (8.0 * (nf - 2.0));
    let ric_coef = (nf - 4.0) / (4.0 * (nf - 2.0));

    // coefficient of Δw
    let c_lap = u * u * lap - g * r * u.powi(3) + (nf - 2.0) / (nf - 4.0) * u * grad2;
    // zeroth order
    let c_zero = (nf - 4.0).powi(2) / 4.0 * u.powi(3) * sigma2 + u * lap * lap - 2.0 * g * r * u * grad2
        + (nf - 2.0) / (nf - 4.0) * grad2 * lap
        - 3.0 * g * r * u * u * lap
        - u * j.hessian_sq(nf)
        + 3.0 * ric_coef * u * u * ric_hess
        - nf / (2.0 * (nf - 2.0)) * u * ric_grad
        + nf / (nf - 4.0) * grad2 * d2u
        - nf * nf * (nf - 1.0) * (nf - 4.0) / 32.0 * u.powf((3.0 * nf + 4.0) / (nf - 4.0));
    // ⟨X, ∇w⟩ with X = (2(n−2)/(n−4) uΔu − (n−4)R/(4(n−2)) u²) ∇u
    let c_grad = (2.0 * (nf - 2.0) / (nf - 4.0) * u * lap - 2.0 * g * r * u * u) * du;
    // ⟨M, ∇²w⟩ with M = ric_coef u³ Ric − u²∇²u + n/(n−4) u ∇u⊗∇u
    let m_rad = ric_coef * u.powi(3) * c.ricci_radial - u * u * d2u + nf / (nf - 4.0) * u * grad2;
    let m_tan = ric_coef * u.powi(3) * c.ricci_tangential - u * u * j.kappa * du;
    // ⟨∇u⊗∇w, B⟩ with B = 2n/(n−4) u∇²u − n/(2(n−2)) u² Ric
    let b_rad = 2.0 * nf / (nf - 4.0) * u * d2u - nf / (2.0 * (nf - 2.0)) * u * u * c.ricci_radial;

    let tangential = c_lap + m_tan;
    [
        c_lap + m_rad,
        (nf - 1.0) * j.kappa * tangential + c_grad + b_rad * du,
        c_zero - lambda * j.inv_rho2 * tangential,
    ]
}

/// Pointwise H(u) on the field's grid.
pub fn evaluate_h(field: &RadialField, n: usize) -> Result<Vec<f64>> {
    field.require_positive()?;
    Ok((0..field.len()).map(|i| h_point(n, &field.background, &jet(field, i))).collect())
}

/// Coefficient arrays (c₂, c₁, c₀) of L^u acting on w(s)·Y_ℓ, λ = ℓ(ℓ+n−2).
pub fn linearization_coefficients(field: &RadialField, n: usize, degree: usize) -> Result<[Vec<f64>; 3]> {
    field.require_positive()?;
    let lambda = eigenvalue(degree, n);
    let mut out = [Vec::with_capacity(field.len()), Vec::with_capacity(field.len()), Vec::with_capacity(field.len())];
    for i in 0..field.len() {
        let c = linear_point(n, &field.background, &jet(field, i), lambda);
        for (o, v) in out.iter_mut().zip(c) {
            o.push(v);
        }
    }
    Ok(out)
}

/// λ = ℓ(ℓ+n−2)
pub fn eigenvalue(degree: usize, n: usize) -> f64 {
    (degree * (degree + n - 2)) as f64
}

/// L^u(w) for a radial direction w.
pub fn evaluate_l(field: &RadialField, direction: &RadialField, n: usize) -> Result<Vec<f64>> {
    evaluate_l_mode(field, direction, n, 0)
}

/// L^u(w·Y_ℓ)/Y_ℓ for a mode-ℓ direction with radial profile w.
pub fn evaluate_l_mode(field: &RadialField, direction: &RadialField, n: usize, degree: usize) -> Result<Vec<f64>> {
    field.check_grid(direction)?;
    let [c2, c1, c0] = linearization_coefficients(field, n, degree)?;
    Ok((0..field.len()).map(|i| c2[i] * direction.d2u[i] + c1[i] * direction.du[i] + c0[i] * direction.u[i]).collect())
}

/// Q^u(w) = H(u+w) − H(u) − L^u(w), by the defining difference.
pub fn evaluate_q(field: &RadialField, increment: &RadialField, n: usize) -> Result<Vec<f64>> {
    let shifted = field.plus(increment, 1.0)?;
    let h1 = evaluate_h(&shifted, n)?;
    let h0 = evaluate_h(field, n)?;
    let l = evaluate_l(field, increment, n)?;
    Ok((0..field.len()).map(|i| h1[i] - h0[i] - l[i]).collect())
}

/// Cylinder picture v(t) = v_ε(t + log R) with exact derivatives, on `times`.
pub fn cylinder_profile(orbit: &DelaunayOrbit, r_scale: f64, times: &[f64]) -> Result<RadialField> {
    let shift = r_scale.ln();
    let mut v = Vec::with_capacity(times.len());
    let mut dv = Vec::with_capacity(times.len());
    let mut d2v = Vec::with_capacity(times.len());
    for &t in times {
        let (a, b, c) = orbit.state_at(t + shift)?;
        v.push(a);
        dv.push(b);
        d2v.push(c);
    }
    RadialField::new(times.to_vec(), v, dv, d2v, CurvatureData::cylinder(orbit.params.n), Warp::Cylinder)
}

/// Ball picture u_{ε,R}(r) = r^{−A} v_ε(−log r + log R) with exact derivatives, on increasing radii.
pub fn ball_profile(orbit: &DelaunayOrbit, r_scale: f64, radii: &[f64]) -> Result<RadialField> {
    let a = orbit.constants().a;
    let shift = r_scale.ln();
    let mut u = Vec::with_capacity(radii.len());
    let mut du = Vec::with_capacity(radii.len());
    let mut d2u = Vec::with_capacity(radii.len());
    for &r in radii {
        let (v, vd, vdd) = orbit.state_at(-r.ln() + shift)?;
        let p = r.powf(-a);
        u.push(p * v);
        du.push(-p / r * (a * v + vd));
        d2u.push(p / (r * r) * ((a + 1.0) * (a * v + vd) + a * vd + vdd));
    }
    RadialField::new(radii.to_vec(), u, du, d2u, CurvatureData::flat(), Warp::Euclidean)
}

/// Sup over the sampled window of |r^n H_δ(u_{ε,R})(r) − H_cyl(v_{ε,R})(t)|, r = e^{−t},
/// with both sides evaluated from exact orbit derivatives.
pub fn cylinder_equivariance_residual(orbit: &DelaunayOrbit, r_scale: f64) -> Result<f64> {
    let n = orbit.params.n;
    let (lo, hi) = orbit.t_range();
    let shift = r_scale.ln();
    let (t0, t1) = ((lo - shift).max(0.0) + 0.5, hi - shift - 0.5);
    if !(t1 > t0) {
        return Err(Error::OrbitRangeExceeded { t: t1, lo, hi });
    }
    let m = 400;
    let times: Vec<f64> = (0..=m).map(|i| t0 + (t1 - t0) * i as f64 / m as f64).collect();
    let radii: Vec<f64> = times.iter().rev().map(|t| (-t).exp()).collect();
    let cyl = evaluate_h(&cylinder_profile(orbit, r_scale, &times)?, n)?;
    let ball = evaluate_h(&ball_profile(orbit, r_scale, &radii)?, n)?;
    Ok((0..=m).map(|i| (radii[m - i].powi(n as i32) * ball[m - i] - cyl[i]).abs()).fold(0.0, f64::max))
}

/// Linear equivariance L_δ^u(w)(r)·r^n = L_cyl^v(r^A w)(t) for a radial test
/// function w, with derivatives of w taken by finite differences of spacing
/// `h` in log r (ball) and in t (cylinder). Returns the sup discrepancy.
pub fn linear_equivariance_residual<F>(orbit: &DelaunayOrbit, r_scale: f64, w: F, t0: f64, t1: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let n = orbit.params.n;
    let a = orbit.constants().a;
    let m = ((t1 - t0) / h).round() as usize;
    let times: Vec<f64> = (0..=m).map(|i| t0 + (t1 - t0) * i as f64 / m as f64).collect();
    let radii: Vec<f64> = times.iter().rev().map(|t| (-t).exp()).collect();

    let ball_u = ball_profile(orbit, r_scale, &radii)?;
    let ball_w = RadialField::from_log_samples(radii.clone(), radii.iter().map(|&r| w(r)).collect(), CurvatureData::flat())?;
    let lhs = evaluate_l(&ball_u, &ball_w, n)?;

    let cyl_v = cylinder_profile(orbit, r_scale, &times)?;
    let big_w: Vec<f64> = times.iter().map(|&t| (-a * t).exp() * w((-t).exp())).collect();
    let cyl_w = RadialField::from_uniform_samples(times.clone(), big_w, cyl_v.background, Warp::Cylinder)?;
    let rhs = evaluate_l(&cyl_v, &cyl_w, n)?;
    Ok((0..=m).map(|i| (radii[m - i].powi(n as i32) * lhs[m - i] - rhs[i]).abs()).fold(0.0, f64::max))
}
