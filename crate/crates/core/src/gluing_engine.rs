//! Cauchy-data matching between the singular interior family and a model exterior
//! solution on the sphere |x| = r_ε, the constant-mode and coordinate-mode
//! fixed-point systems, and an end-to-end matched factor in the flat radial model.

use crate::banded::{solve_two_point, Condition, End};
use crate::delaunay_family::{scale_from_offset, DelaunayFamily, FamilyParams};
use crate::delaunay_ode::{DelaunayOrbit, DelaunayParams};
use crate::emit::csv_table;
use crate::error::{Error, Result};
use crate::fd;
use crate::function_spaces::{k_in, zonal_eval, zonal_integral, HarmonicCoeffs, Mode, MAX_DEGREE};
use crate::linearized_solver::{log_grid, ModeOperator};
use crate::quadrature::sphere_area;
use crate::sigma2_operator::{cylinder_profile, evaluate_h, evaluate_q, linearization_coefficients, CurvatureData, RadialField, Warp};
use serde::Serialize;
use std::sync::Arc;

/// Exponents and radii constants of the construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GluingConfig {
    pub n: usize,
    pub eps: f64,
    /// r_ε = ε^s
    pub s: f64,
    pub l: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta4: f64,
    pub delta5: f64,
    pub kappa: f64,
    pub tau: f64,
    pub beta: f64,
    pub gamma_radius: f64,
    /// Exterior weight, in (1−n, 2−n).
    pub nu: f64,
    pub eta: f64,
    pub alpha: f64,
    /// Small offset ε₁ in γ̄ = n/4 + 1 + ε₁.
    pub eps1: f64,
    /// Matching tolerance on the Cauchy gaps.
    pub tol: f64,
    /// Nodes of the exterior annulus grid.
    pub points: usize,
}

impl Default for GluingConfig {
    fn default() -> Self {
        Self {
            n: 5,
            eps: 0.05,
            s: 0.1,
            l: 0.1,
            delta1: 0.02,
            delta2: 0.05,
            delta4: 0.02,
            delta5: 0.05,
            kappa: 1.0,
            tau: 1.0,
            beta: 1.0,
            gamma_radius: 1.0,
            nu: -3.5,
            eta: 1.0,
            alpha: 0.5,
            eps1: 0.05,
            tol: 1e-9,
            points: 2001,
        }
    }
}

impl GluingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.n < 5 {
            return bad(format!("dimension must be at least 5, got {}", self.n));
        }
        DelaunayParams::new(self.n, 2, self.eps)?;
        if !(self.s > 0.0 && self.s < 1.0) {
            return bad(format!("exponent s must lie in (0,1), got {}", self.s));
        }
        let smalls = [self.l, self.delta1, self.delta2, self.delta4, self.delta5, self.eps1];
        if smalls.iter().any(|x| !(*x > 0.0)) {
            return bad("l, δ₁, δ₂, δ₄, δ₅ and ε₁ must be positive".into());
        }
        if !(3.0 * self.delta2 > self.delta1.max(self.l)) {
            return bad(format!("need 3δ₂ > max(δ₁, l), got δ₂ = {}, δ₁ = {}, l = {}", self.delta2, self.delta1, self.l));
        }
        if !(self.l > self.delta5.max(2.0 * self.delta4)) {
            return bad(format!("need l > max(δ₅, 2δ₄), got l = {}, δ₅ = {}, δ₄ = {}", self.l, self.delta5, self.delta4));
        }
        if [self.kappa, self.tau, self.beta, self.gamma_radius, self.eta].iter().any(|x| !(*x > 0.0)) {
            return bad("κ, τ, β, γ and η must be positive".into());
        }
        let nf = self.n as f64;
        if !(self.nu > 1.0 - nf && self.nu < 2.0 - nf) {
            return bad(format!("ν must lie in ({}, {}), got {}", 1.0 - nf, 2.0 - nf, self.nu));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("Hölder exponent must lie in (0,1), got {}", self.alpha));
        }
        if !(self.tol > 0.0) || self.points < fd::MIN_POINTS {
            return bad("tolerance must be positive and the grid non-trivial".into());
        }
        Ok(())
    }

    pub fn r_eps(&self) -> f64 {
        self.eps.powf(self.s)
    }

    /// γ̄ = n/4 + 1 + ε₁
    pub fn gamma_bar(&self) -> f64 {
        self.n as f64 / 4.0 + 1.0 + self.eps1
    }

    /// ε^{(n−4)/2}/(4(1+b))
    pub fn neck_term(&self, b: f64) -> f64 {
        self.eps.powf((self.n as f64 - 4.0) / 2.0) / (4.0 * (1.0 + b))
    }

    pub fn lambda_bound(&self) -> f64 {
        self.r_eps().powf((self.n as f64 + self.l + self.delta5) / 2.0)
    }

    pub fn theta_bound(&self) -> f64 {
        self.r_eps().powf(2.0 + self.l - self.delta1)
    }
}

/// Parameters b, Λ, a, ω, ϑ of the matching problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GluingState {
    pub b: f64,
    pub lambda: f64,
    pub a: Vec<f64>,
    /// Coefficients on the unit coordinate harmonics e_i.
    pub omega: Vec<f64>,
    pub theta: HarmonicCoeffs,
}

impl GluingState {
    /// a = 0, ω = 0, ϑ = 0.
    pub fn radial(config: &GluingConfig, b: f64, lambda: f64) -> Result<Self> {
        let theta = HarmonicCoeffs::new(config.n, config.r_eps(), Vec::new())?;
        Ok(Self { b, lambda, a: vec![0.0; config.n], omega: vec![0.0; config.n], theta })
    }

    pub fn validate(&self, config: &GluingConfig) -> Result<()> {
        let r = config.r_eps();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(self.b.abs() <= 0.5) {
            return Err(Error::OutsideDomain(format!("|b| = {} exceeds 1/2", self.b.abs())));
        }
        if !(self.lambda.abs() <= config.lambda_bound()) {
            return Err(Error::OutsideDomain(format!("|Λ| = {} exceeds {}", self.lambda.abs(), config.lambda_bound())));
        }
        if self.a.len() != config.n || self.omega.len() != config.n {
            return Err(Error::InvalidParams("a and ω need n components".into()));
        }
        if !(norm(&self.a).powi(2) <= r.powf(config.l)) {
            return Err(Error::OutsideDomain(format!("|a|² = {} exceeds r_ε^l", norm(&self.a).powi(2))));
        }
        if !(norm(&self.omega) <= config.theta_bound()) {
            return Err(Error::OutsideDomain(format!("|ω| = {} exceeds {}", norm(&self.omega), config.theta_bound())));
        }
        if self.theta.modes.iter().any(|m| m.l < 2) {
            return Err(Error::InvalidParams("ϑ must be high-frequency".into()));
        }
        let t = self.theta.boundary_norm(config.alpha);
        if !(t <= config.theta_bound()) {
            return Err(Error::RangeViolation { norm: t, bound: config.theta_bound() });
        }
        Ok(())
    }
}

/// The quadratic remainder f̄ of the background conformal factor f = 1 + f̄.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ModelBackground {
    Flat,
    /// f̄ = c|x|²
    Quadratic { c: f64 },
}

impl ModelBackground {
    /// (f̄, f̄′, f̄″) at radius r.
    pub fn fbar(&self, r: f64) -> [f64; 3] {
        match *self {
            Self::Flat => [0.0; 3],
            Self::Quadratic { c } => [c * r * r, 2.0 * c * r, 2.0 * c],
        }
    }

    /// Exponent 2 − n/2 of G_p = η|x|^{2−n/2}.
    pub fn green_exponent(n: usize) -> f64 {
        2.0 - n as f64 / 2.0
    }
}

/// h = ½((1−γ̄)r^{−γ̄−1}|x|^{γ̄+1} + (γ̄+1)r^{−γ̄+1}|x|^{γ̄−1}) f̄ with exact derivatives.
pub fn interior_correction_h(gamma_bar: f64, r_eps: f64, background: &ModelBackground, radii: &[f64]) -> Result<RadialField> {
    let g = gamma_bar;
    let c1 = 0.5 * (1.0 - g) * r_eps.powf(-g - 1.0);
    let c2 = 0.5 * (g + 1.0) * r_eps.powf(1.0 - g);
    let (mut u, mut du, mut d2u) = (Vec::new(), Vec::new(), Vec::new());
    for &x in radii {
        let p = [c1 * x.powf(g + 1.0) + c2 * x.powf(g - 1.0), c1 * (g + 1.0) * x.powf(g) + c2 * (g - 1.0) * x.powf(g - 2.0), c1 * (g + 1.0) * g * x.powf(g - 1.0) + c2 * (g - 1.0) * (g - 2.0) * x.powf(g - 3.0)];
        let f = background.fbar(x);
        u.push(p[0] * f[0]);
        du.push(p[1] * f[0] + p[0] * f[1]);
        d2u.push(p[2] * f[0] + 2.0 * p[1] * f[1] + p[0] * f[2]);
    }
    RadialField::new(radii.to_vec(), u, du, d2u, CurvatureData::flat(), Warp::Euclidean)
}

/// Zonal coefficients c_ℓ = ∫ u(rθ) Y_ℓ(θ·â) of the family on the sphere of radius r,
/// for ℓ ≤ MAX_DEGREE; â = e₁ when a = 0.
pub fn zonal_trace(family: &DelaunayFamily, r: f64) -> Result<Vec<f64>> {
    let n = family.params.base.n;
    let an = family.params.a_norm();
    let axis: Vec<f64> = if an > 0.0 { family.params.a.iter().map(|x| x / an).collect() } else { (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect() };
    let j = if axis[0].abs() < 0.9 { 0 } else { 1 };
    let mut perp: Vec<f64> = (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
    let dot: f64 = perp.iter().zip(&axis).map(|(p, a)| p * a).sum();
    perp.iter_mut().zip(&axis).for_each(|(p, a)| *p -= dot * a);
    let pn = perp.iter().map(|x| x * x).sum::<f64>().sqrt();
    perp.iter_mut().for_each(|p| *p /= pn);

    let points = 48;
    let (nodes, _) = crate::quadrature::gauss_legendre(points);
    let mut cache = std::collections::HashMap::new();
    for &x in &nodes {
        let theta = 0.5 * std::f64::consts::PI * (x + 1.0);
        let (s, c) = theta.sin_cos();
        let p: Vec<f64> = axis.iter().zip(&perp).map(|(a, q)| r * (c * a + s * q)).collect();
        cache.insert(c.to_bits(), family.eval(&p)?);
    }
    let value = |c: f64| *cache.get(&c.to_bits()).unwrap_or(&f64::NAN);
    let out: Vec<f64> = (0..=MAX_DEGREE).map(|l| zonal_integral(|c| value(c) * zonal_eval(l, n, c), n, points)).collect();
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::GridMismatch("zonal quadrature nodes changed between passes".into()));
    }
    Ok(out)
}

/// (c_ℓ, r∂_r c_ℓ) of the zonal trace, the derivative by a five-point rule in log r.
pub fn zonal_cauchy_data(family: &DelaunayFamily, r: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = 1e-3;
    let c = zonal_trace(family, r)?;
    let at = |k: f64| zonal_trace(family, r * (k * h).exp());
    let (p1, m1, p2, m2) = (at(1.0)?, at(-1.0)?, at(2.0)?, at(-2.0)?);
    let d = (0..c.len()).map(|l| (8.0 * (p1[l] - m1[l]) - (p2[l] - m2[l])) / (12.0 * h)).collect();
    Ok((c, d))
}

/// φ_ϑ = ϑ(1 + f̄(r_ε)) − π″(u_{ε,R,a}|S_{r_ε}) for a radial f̄. Zonal components
/// of the family are stored under m = 0, the harmonic about the axis of a.
pub fn phi_theta_map(state: &GluingState, config: &GluingConfig, background: &ModelBackground, family: &DelaunayFamily) -> Result<HarmonicCoeffs> {
    let r = config.r_eps();
    let f0 = background.fbar(r)[0];
    let scaled: Vec<Mode> = state.theta.modes.iter().map(|m| Mode { c: m.c * (1.0 + f0), ..*m }).collect();
    let mut phi = HarmonicCoeffs::new(config.n, r, scaled)?;
    if family.params.a_norm() > 0.0 {
        let trace = zonal_trace(family, r)?;
        let high: Vec<Mode> = trace.iter().enumerate().skip(2).map(|(l, c)| Mode { l, m: 0, c: -c }).collect();
        phi = phi.add(&HarmonicCoeffs::new(config.n, r, high)?)?;
    }
    let norm = phi.boundary_norm(config.alpha);
    let bound = config.kappa * r.powf(2.0 + config.l - config.delta1);
    if !(norm <= bound) {
        return Err(Error::RangeViolation { norm, bound });
    }
    Ok(phi)
}

/// F(r_ε), G(r_ε) and the determinant proxy, with the expansion oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FgReport {
    pub r_eps: f64,
    pub b: f64,
    pub f: f64,
    pub g: f64,
    /// G + (n−1)F
    pub det: f64,
    /// F and G from the leading neck expansion of u.
    pub f_oracle: f64,
    pub g_oracle: f64,
    /// (n−4)(1+b)/2
    pub f_leading: f64,
    /// n(n−4)(1+b)/2
    pub det_leading: f64,
    pub note: String,
}

/// F = (n−4)/2·u + r∂_r u and G = (n−4)/2·u + (n/2)r∂_r u + r²∂²_r u at r_ε, from the orbit.
pub fn f_g_coefficients(config: &GluingConfig, family: &DelaunayFamily, b: f64) -> Result<FgReport> {
    let n = config.n as f64;
    let r = config.r_eps();
    let (u, du, d2u) = family.radial_derivatives(r)?;
    let f = (n - 4.0) / 2.0 * u + du;
    let g = (n - 4.0) / 2.0 * u + n / 2.0 * du + d2u;
    let two_a = (n - 4.0) / 2.0;
    let e = config.neck_term(b) * r.powf(-two_a);
    let (uo, duo, d2uo) = (1.0 + b + e, -two_a * e, two_a * (two_a + 1.0) * e);
    let f_oracle = (n - 4.0) / 2.0 * uo + duo;
    let g_oracle = (n - 4.0) / 2.0 * uo + n / 2.0 * duo + d2uo;
    Ok(FgReport {
        r_eps: r,
        b,
        f,
        g,
        det: g + (n - 1.0) * f,
        f_oracle,
        g_oracle,
        f_leading: (n - 4.0) * (1.0 + b) / 2.0,
        det_leading: n * (n - 4.0) * (1.0 + b) / 2.0,
        note: "leading constant of F is (n-4)(1+b)/2; the value (n-2)(1+b) does not follow from the neck expansion".into(),
    })
}

/// Fixed point of the constant-mode system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantSolution {
    pub b: f64,
    pub lambda: f64,
    pub iterations: usize,
    /// Largest ratio of consecutive step sizes.
    pub contraction: f64,
    /// Residuals of the two matching equations at the returned point.
    pub residual: [f64; 2],
}

/// 𝓖(b, Λ) for given H₀ and r∂_r H₀.
pub fn constant_map(config: &GluingConfig, b: f64, h0: f64, r_dh0: f64) -> (f64, f64) {
    let n = config.n as f64;
    let r = config.r_eps();
    (h0 + 2.0 * r_dh0 / (n - 4.0), config.neck_term(b) + 2.0 * r.powf(n / 2.0 - 2.0) * r_dh0 / (n - 4.0))
}

/// Residuals of b + (E−Λ)r^{2−n/2} = H₀ and (2−n/2)(E−Λ)r^{2−n/2} = r∂_r H₀.
pub fn constant_residual(config: &GluingConfig, b: f64, lambda: f64, h0: f64, r_dh0: f64) -> [f64; 2] {
    let n = config.n as f64;
    let rho = config.r_eps().powf(2.0 - n / 2.0);
    let m = (config.neck_term(b) - lambda) * rho;
    [b + m - h0, (2.0 - n / 2.0) * m - r_dh0]
}

fn check_constant_domain(config: &GluingConfig, b: f64, lambda: f64, strict: bool) -> Result<()> {
    if !(b.abs() <= 0.5) {
        return Err(Error::OutsideDomain(format!("|b| = {} exceeds 1/2", b.abs())));
    }
    if strict && !(lambda.abs() <= config.lambda_bound()) {
        return Err(Error::OutsideDomain(format!("|Λ| = {} exceeds r_ε^((n+l+δ₅)/2) = {}", lambda.abs(), config.lambda_bound())));
    }
    Ok(())
}

/// Iterates 𝓖 from (0, E(0)); `h` returns (H₀, r∂_r H₀) at the current (b, Λ).
pub fn solve_constant_system<F>(config: &GluingConfig, h: F, tol: f64, max_iter: usize) -> Result<ConstantSolution>
where
    F: FnMut(f64, f64) -> Result<(f64, f64)>,
{
    iterate_constant_map(config, h, tol, max_iter, true)
}

/// 𝓖 iteration; `strict` also enforces the Λ radius of 𝓓_{0,ε}, otherwise only |b| ≤ 1/2.
fn iterate_constant_map<F>(config: &GluingConfig, mut h: F, tol: f64, max_iter: usize, strict: bool) -> Result<ConstantSolution>
where
    F: FnMut(f64, f64) -> Result<(f64, f64)>,
{
    let (mut b, mut lambda) = (0.0, config.neck_term(0.0));
    let mut contraction = 0.0f64;
    let mut prev_step = f64::NAN;
    let mut growth = 0;
    for it in 1..=max_iter {
        check_constant_domain(config, b, lambda, strict)?;
        let (h0, rdh) = h(b, lambda)?;
        let (nb, nl) = constant_map(config, b, h0, rdh);
        check_constant_domain(config, nb, nl, strict)?;
        let step = (nb - b).abs().max((nl - lambda).abs());
        if prev_step > 0.0 {
            let q = step / prev_step;
            contraction = contraction.max(q);
            growth = if q > 0.9 { growth + 1 } else { 0 };
            if growth >= 3 {
                return Err(Error::ContractionFailed(q));
            }
        }
        prev_step = step;
        b = nb;
        lambda = nl;
        if step <= tol {
            let (h0, rdh) = h(b, lambda)?;
            return Ok(ConstantSolution { b, lambda, iterations: it, contraction, residual: constant_residual(config, b, lambda, h0, rdh) });
        }
    }
    Err(Error::ContractionFailed(contraction))
}

/// Constant-input variant.
pub fn solve_constant_system_fixed(config: &GluingConfig, h0: f64, r_dh0: f64) -> Result<ConstantSolution> {
    solve_constant_system(config, |_, _| Ok((h0, r_dh0)), 1e-15, 200)
}

/// Solution of one coordinate of the degree-one system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoordinateSolution {
    pub a: f64,
    pub omega: f64,
    pub iterations: usize,
    pub residual: [f64; 2],
}

/// 𝓚 for given H_i and r∂_r H_i.
pub fn coordinate_map(n: usize, r_eps: f64, fg: &FgReport, h: f64, r_dh: f64) -> (f64, f64) {
    let nf = n as f64;
    let d = fg.g + (nf - 1.0) * fg.f;
    let x = r_dh + (nf - 1.0) * h;
    (x / (d * r_eps), fg.f * x / d - h)
}

/// Direct solve of [F, −1; G, n−1]·(r a, ω) = (H, r∂H).
pub fn coordinate_linear_oracle(n: usize, r_eps: f64, fg: &FgReport, h: f64, r_dh: f64) -> (f64, f64) {
    let m = [[fg.f, -1.0], [fg.g, n as f64 - 1.0]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let ra = (h * m[1][1] - m[0][1] * r_dh) / det;
    let omega = (m[0][0] * r_dh - m[1][0] * h) / det;
    (ra / r_eps, omega)
}

/// Per-coordinate fixed points of 𝓚; `h(i, a_i, ω_i)` returns (H_i, r∂_r H_i).
pub fn solve_coordinate_system<F>(config: &GluingConfig, fg: &FgReport, mut h: F, tol: f64, max_iter: usize) -> Result<Vec<CoordinateSolution>>
where
    F: FnMut(usize, f64, f64) -> Result<(f64, f64)>,
{
    let n = config.n;
    let r = config.r_eps();
    let nf = n as f64;
    if !(fg.det > 0.0) {
        return Err(Error::SingularSystem { row: 0, pivot: fg.det });
    }
    let a_bound = (r.powf(config.l) / nf).sqrt();
    let w_bound = config.theta_bound() / (nf * k_in(1, n, config.alpha));
    let inside = |a: f64, w: f64| -> Result<()> {
        if !(a.abs() <= a_bound && w.abs() <= w_bound) {
            return Err(Error::OutsideDomain(format!("(a_i, ω_i) = ({a}, {w}) outside |a_i| ≤ {a_bound}, |ω_i| ≤ {w_bound}")));
        }
        Ok(())
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (mut a, mut w) = (0.0, 0.0);
        let mut done = None;
        for it in 1..=max_iter {
            let (hi, rdh) = h(i, a, w)?;
            let (na, nw) = coordinate_map(n, r, fg, hi, rdh);
            inside(na, nw)?;
            let step = (na - a).abs().max((nw - w).abs());
            a = na;
            w = nw;
            if step <= tol {
                done = Some(it);
                break;
            }
        }
        let iterations = done.ok_or(Error::ContractionFailed(f64::NAN))?;
        let (hi, rdh) = h(i, a, w)?;
        let residual = [fg.f * r * a - w - hi, fg.g * r * a + (nf - 1.0) * w - rdh];
        out.push(CoordinateSolution { a, omega: w, iterations, residual });
    }
    Ok(out)
}

/// Radial correction U of the interior problem in the cylinder picture.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteriorCorrection {
    /// Cylinder time t = −log|x|.
    pub t: Vec<f64>,
    /// Linear extension of the boundary datum.
    pub extension: Vec<f64>,
    pub correction: Vec<f64>,
    pub iterations: usize,
    /// Largest ratio of consecutive Picard steps.
    pub contraction: f64,
    /// sup |H(v + extension + correction)| over interior nodes.
    pub residual: f64,
    /// sup |x|^{−γ̄}|U| in the ball picture.
    pub weighted_sup: f64,
    /// τ r_ε^{2+l−γ̄}
    pub bound: f64,
}

/// Picard iteration U ← G(−Q(ψ + U)) on t ∈ [−log r_ε, −log r_ε + window], where ψ
/// solves the linearized equation with ball datum `datum` on |x| = r_ε and G is the
/// Dirichlet inverse of the degree-zero linearization.
pub fn interior_picard(config: &GluingConfig, family: &DelaunayFamily, datum: f64, window: f64) -> Result<InteriorCorrection> {
    if family.params.a_norm() > 0.0 {
        return Err(Error::NotRadial);
    }
    let n = config.n;
    let orbit = &family.orbit;
    let r = config.r_eps();
    let t0 = -r.ln();
    let m = (window / orbit.dt).round() as usize;
    let times: Vec<f64> = (0..=m).map(|i| t0 + i as f64 * orbit.dt).collect();
    let v = cylinder_profile(orbit, family.params.r_scale, &times)?;
    let op = ModeOperator::from_profile(&v, n, 0, config.eps)?;
    let amp = (n as f64 - 4.0) / 4.0;
    let psi = op.solve(&vec![0.0; times.len()], [datum * r.powf(amp), 0.0])?;

    let field = |w: &[f64]| RadialField::from_uniform_samples(times.clone(), w.to_vec(), v.background, Warp::Cylinder);
    let sup = |w: &[f64]| w.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut u = vec![0.0; times.len()];
    let mut prev = f64::NAN;
    let mut contraction = 0.0f64;
    let mut slow = 0;
    let mut iterations = 0;
    for it in 1..=200 {
        iterations = it;
        let total: Vec<f64> = psi.iter().zip(&u).map(|(a, b)| a + b).collect();
        let q = evaluate_q(&v, &field(&total)?, n)?;
        let rhs: Vec<f64> = q.iter().map(|x| -x).collect();
        let next = op.solve(&rhs, [0.0, 0.0])?;
        let step = sup(&next.iter().zip(&u).map(|(a, b)| a - b).collect::<Vec<_>>());
        u = next;
        if step <= 1e-10 * sup(&u) || step == 0.0 {
            break;
        }
        if prev > 0.0 {
            let ratio = step / prev;
            contraction = contraction.max(ratio);
            slow = if ratio > 0.9 { slow + 1 } else { 0 };
            if slow >= 3 {
                return Err(Error::ContractionFailed(ratio));
            }
        }
        prev = step;
    }
    let total: Vec<f64> = psi.iter().zip(&u).map(|(a, b)| a + b).collect();
    let h = evaluate_h(&v.plus(&field(&total)?, 1.0)?, n)?;
    let residual = h[1..h.len() - 1].iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let gb = config.gamma_bar();
    let weighted_sup = times.iter().zip(&u).map(|(t, w)| (amp * t).exp() * w.abs() * (gb * t).exp()).fold(0.0, f64::max);
    Ok(InteriorCorrection {
        t: times,
        extension: psi,
        correction: u,
        iterations,
        contraction,
        residual,
        weighted_sup,
        bound: config.tau * r.powf(2.0 + config.l - gb),
    })
}

/// Exterior model on the annulus r_ε ≤ |x| ≤ r_outer: the σ₂ operator of the round
/// sphere data in Euclidean coordinates, with 𝓑 = 1 + Λ|x|^{2−n/2} + V, V′(r_ε) = 0 and V(r_outer) = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExteriorModel {
    pub n: usize,
    pub r_inner: f64,
    pub r_outer: f64,
    pub points: usize,
}

/// Converged exterior factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExteriorSolution {
    pub lambda: f64,
    pub rho: Vec<f64>,
    /// 𝓑 on the grid.
    pub value: Vec<f64>,
    /// ∂_ρ 𝓑 on the grid.
    pub derivative: Vec<f64>,
    pub correction: Vec<f64>,
    pub newton_steps: usize,
    pub residual: f64,
}

impl ExteriorModel {
    fn field(&self, rho: &[f64], lambda: f64, v: &[f64], hx: f64) -> Result<RadialField> {
        let p = ModelBackground::green_exponent(self.n);
        let (vx, vxx) = fd::derivatives(v, hx);
        let mut u = Vec::with_capacity(rho.len());
        let mut du = Vec::with_capacity(rho.len());
        let mut d2u = Vec::with_capacity(rho.len());
        for (i, &r) in rho.iter().enumerate() {
            u.push(1.0 + lambda * r.powf(p) + v[i]);
            du.push(lambda * p * r.powf(p - 1.0) + vx[i] / r);
            d2u.push(lambda * p * (p - 1.0) * r.powf(p - 2.0) + (vxx[i] - vx[i]) / (r * r));
        }
        RadialField::new(rho.to_vec(), u, du, d2u, CurvatureData::round_sphere(self.n), Warp::Euclidean)
    }

    /// Newton iteration for H(𝓑) = 0.
    pub fn solve(&self, lambda: f64) -> Result<ExteriorSolution> {
        if !(self.r_inner > 0.0 && self.r_outer > self.r_inner) {
            return Err(Error::InvalidParams(format!("annulus [{}, {}] is empty", self.r_inner, self.r_outer)));
        }
        let rho = log_grid(self.r_inner, self.r_outer, self.points);
        if let Ok(sol) = self.newton(&rho, lambda, vec![0.0; self.points]) {
            return Ok(sol);
        }
        // Continuation in Λ from the trivial solution, warm-starting each Newton solve.
        let mut current = self.newton(&rho, 0.0, vec![0.0; self.points])?;
        let mut step = lambda / 4.0;
        let mut steps = current.newton_steps;
        while current.lambda != lambda {
            if step.abs() < lambda.abs() * 1e-4 {
                return Err(Error::OutsideDomain(format!("exterior model branch ends near Λ = {} before reaching Λ = {lambda}", current.lambda)));
            }
            let target = if (current.lambda + step - lambda) * step.signum() >= 0.0 { lambda } else { current.lambda + step };
            match self.newton(&rho, target, current.correction.clone()) {
                Ok(next) => {
                    steps += next.newton_steps;
                    current = next;
                    step *= 1.5;
                }
                Err(_) => step /= 2.0,
            }
        }
        current.newton_steps = steps;
        Ok(current)
    }

    fn newton(&self, rho: &[f64], lambda: f64, mut v: Vec<f64>) -> Result<ExteriorSolution> {
        let hx = (self.r_outer / self.r_inner).ln() / (self.points - 1) as f64;
        let mut residual = f64::INFINITY;
        let mut last_update = f64::INFINITY;
        for step in 0..40 {
            let field = self.field(rho, lambda, &v, hx)?;
            let h = evaluate_h(&field, self.n)?;
            residual = h[1..h.len() - 1].iter().fold(0.0f64, |a, x| a.max(x.abs()));
            if !residual.is_finite() {
                break;
            }
            if residual == 0.0 || last_update <= 1e-13 {
                let (value, derivative) = (field.u, field.du);
                return Ok(ExteriorSolution { lambda, rho: rho.to_vec(), value, derivative, correction: v, newton_steps: step, residual });
            }
            let [c2, c1, c0] = linearization_coefficients(&field, self.n, 0)?;
            let cc1: Vec<f64> = (0..rho.len()).map(|i| c1[i] * rho[i] - c2[i]).collect();
            let cc0: Vec<f64> = (0..rho.len()).map(|i| c0[i] * rho[i] * rho[i]).collect();
            let rhs: Vec<f64> = (0..rho.len()).map(|i| -h[i] * rho[i] * rho[i]).collect();
            let dv = solve_two_point(&c2, &cc1, &cc0, &rhs, hx, [Condition::Slope(End::Left, 0.0), Condition::Value(End::Right, 0.0)])?;
            v.iter_mut().zip(&dv).for_each(|(a, d)| *a += d);
            last_update = dv.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            if last_update > 1.0 {
                break;
            }
        }
        Err(Error::ContractionFailed(residual))
    }
}

/// Mode-indexed Cauchy gaps 𝓐 − 𝓑 and r∂_r(𝓐 − 𝓑) on |x| = r_ε.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchyGaps {
    /// Mean-value gaps.
    pub l0_value: f64,
    pub l0_deriv: f64,
    /// Coefficients on e_i.
    pub l1_value: Vec<f64>,
    pub l1_deriv: Vec<f64>,
    /// ℓ² sums of the high-frequency coefficient gaps.
    pub high_value: f64,
    pub high_deriv: f64,
}

impl CauchyGaps {
    pub fn max_l0(&self) -> f64 {
        self.l0_value.abs().max(self.l0_deriv.abs())
    }
}

/// Gaps between 𝓐 = u_{ε,R,a} + r^{−γ̄}|x|^{γ̄}v_φ + U and 𝓑 = 1 + ΛG + V + u_{ω+ϑ} in the
/// flat model, with U and V given by their traces (value, r∂_r) on |x| = r_ε.
pub fn cauchy_mismatch(
    state: &GluingState,
    config: &GluingConfig,
    family: &DelaunayFamily,
    phi: &HarmonicCoeffs,
    interior: (f64, f64),
    exterior: (f64, f64),
) -> Result<CauchyGaps> {
    let n = config.n;
    let nf = n as f64;
    let r = config.r_eps();
    let area_sqrt = sphere_area(n - 1).sqrt();
    let (c, dc) = if family.params.a_norm() > 0.0 {
        zonal_cauchy_data(family, r)?
    } else {
        let (u, du, _) = family.radial_derivatives(r)?;
        let mut c = vec![0.0; MAX_DEGREE + 1];
        let mut d = vec![0.0; MAX_DEGREE + 1];
        c[0] = u * area_sqrt;
        d[0] = du * area_sqrt;
        (c, d)
    };
    let g = r.powf(ModelBackground::green_exponent(n));
    let p = ModelBackground::green_exponent(n);
    let l0_value = c[0] / area_sqrt + interior.0 - (1.0 + state.lambda * g + exterior.0);
    let l0_deriv = dc[0] / area_sqrt + interior.1 - (state.lambda * p * g + exterior.1);

    let an = family.params.a_norm();
    let axis: Vec<f64> = if an > 0.0 { family.params.a.iter().map(|x| x / an).collect() } else { vec![0.0; n] };
    let l1_value: Vec<f64> = (0..n).map(|i| c[1] * axis[i] - state.omega[i]).collect();
    let l1_deriv: Vec<f64> = (0..n).map(|i| dc[1] * axis[i] - (1.0 - nf) * state.omega[i]).collect();

    let gb = config.gamma_bar();
    let mut hv = 0.0;
    let mut hd = 0.0;
    for l in 2..=MAX_DEGREE {
        let lf = l as f64;
        let coeff = |h: &HarmonicCoeffs, m: usize| h.modes.iter().find(|x| x.l == l && x.m == m).map_or(0.0, |x| x.c);
        let ms: std::collections::BTreeSet<usize> = phi.modes.iter().chain(&state.theta.modes).filter(|x| x.l == l).map(|x| x.m).chain([0]).collect();
        for m in ms {
            let fam = if m == 0 { c[l] } else { 0.0 };
            let dfam = if m == 0 { dc[l] } else { 0.0 };
            let (ph, th) = (coeff(phi, m), coeff(&state.theta, m));
            hv += (fam + ph - th).powi(2);
            hd += (dfam + (gb + lf) * ph + (nf - 2.0 + lf) * th).powi(2);
        }
    }
    Ok(CauchyGaps { l0_value, l0_deriv, l1_value, l1_deriv, high_value: hv.sqrt(), high_deriv: hd.sqrt() })
}

/// Report of the end-to-end demo.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlueReport {
    pub config: GluingConfig,
    pub b: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    #[serde(rename = "R")]
    pub r_scale: f64,
    pub r_eps: f64,
    pub gaps: CauchyGaps,
    /// min over the interior grid of 𝓤|x|^{(n−4)/4}
    pub completeness_min: f64,
    /// sup over |x| ∈ [0.5, 1] of |𝓤 − 1|
    pub background_distance: f64,
    pub iterations: usize,
    pub contraction: f64,
    pub exterior_newton_steps: usize,
    /// Whether Λ lies inside the radius r_ε^{(n+l+δ₅)/2} of the fixed-point ball.
    pub lambda_in_domain: bool,
    #[serde(skip)]
    pub radii: Vec<f64>,
    #[serde(skip)]
    pub factor: Vec<f64>,
}

impl GlueReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }

    /// Matched factor on the log grid.
    pub fn to_csv(&self) -> String {
        csv_table(&["r", "U"], self.radii.iter().zip(&self.factor).map(|(r, u)| vec![*r, *u]))
    }
}

/// Smallest radius of the emitted interior grid.
const INNER_RADIUS: f64 = 1e-4;
/// Outer radius of the model exterior.
const OUTER_RADIUS: f64 = 1.0;

/// Flat radial demo: orbit, interior correction, exterior model, constant-mode
/// matching on the measured gaps, and the matched factor.
pub fn glue_demo(config: &GluingConfig) -> Result<GlueReport> {
    config.validate()?;
    let n = config.n;
    let r = config.r_eps();
    if !(r < OUTER_RADIUS) {
        return Err(Error::OutsideDomain(format!("r_ε = {r} must be below the exterior radius")));
    }
    let base = DelaunayParams::new(n, 2, config.eps)?;
    let log_r = [scale_from_offset(n, config.eps, -0.5).ln(), scale_from_offset(n, config.eps, 0.5).ln()];
    let t_max = log_r.iter().flat_map(|lr| [(lr - r.ln()).abs(), (lr - INNER_RADIUS.ln()).abs()]).fold(0.0, f64::max) + 1.0;
    let orbit = Arc::new(DelaunayOrbit::integrate(base, t_max, 1e-11)?);
    let family_at = |b: f64| -> Result<DelaunayFamily> {
        let params = FamilyParams::with_neck_offset(base, b, vec![0.0; n], config.s)?;
        DelaunayFamily::new(params, orbit.clone())
    };
    let exterior = ExteriorModel { n, r_inner: r, r_outer: OUTER_RADIUS, points: config.points };
    let p = ModelBackground::green_exponent(n);
    let rho = r.powf(p);
    let nf = n as f64;

    let mut newton = 0;
    let mut cache: Option<ExteriorSolution> = None;
    let mut gaps_at = |b: f64, lambda: f64| -> Result<(f64, f64, ExteriorSolution)> {
        let ext = match cache.take() {
            Some(e) if e.lambda == lambda => e,
            _ => exterior.solve(lambda)?,
        };
        newton = newton.max(ext.newton_steps);
        let (u, du, _) = family_at(b)?.radial_derivatives(r)?;
        let gv = u - ext.value[0];
        let gd = du - r * ext.derivative[0];
        cache = Some(ext.clone());
        Ok((gv, gd, ext))
    };
    let sol = iterate_constant_map(
        config,
        |b, lambda| {
            let (gv, gd, _) = gaps_at(b, lambda)?;
            let m = (config.neck_term(b) - lambda) * rho;
            Ok((b + m - gv, (2.0 - nf / 2.0) * m - gd))
        },
        config.tol * 1e-2,
        200,
        false,
    )?;
    let (_, _, ext) = gaps_at(sol.b, sol.lambda)?;
    let family = family_at(sol.b)?;
    let state = GluingState::radial(config, sol.b, sol.lambda)?;
    let interior = interior_picard(config, &family, 0.0, 4.0)?;
    let phi = phi_theta_map(&state, config, &ModelBackground::Flat, &family)?;
    let u_trace = (interior.correction[0] * r.powf(-(nf - 4.0) / 4.0), 0.0);
    let v_trace = (ext.correction[0], 0.0);
    let gaps = cauchy_mismatch(&state, config, &family, &phi, u_trace, (v_trace.0, r * (ext.derivative[0] - state.lambda * p * r.powf(p - 1.0))))?;
    if !(gaps.max_l0() <= config.tol.max(1e-6)) {
        return Err(Error::ContractionFailed(gaps.max_l0()));
    }

    let per_decade = 200;
    let decades = (r / INNER_RADIUS).log10();
    let inner = log_grid(INNER_RADIUS, r, (decades * per_decade as f64).ceil() as usize + 2);
    let mut radii = Vec::new();
    let mut factor = Vec::new();
    let mut completeness_min = f64::INFINITY;
    for &x in &inner[..inner.len() - 1] {
        let (u, _, _) = family.radial_derivatives(x)?;
        completeness_min = completeness_min.min(u * x.powf((nf - 4.0) / 4.0));
        radii.push(x);
        factor.push(u);
    }
    radii.extend_from_slice(&ext.rho);
    factor.extend_from_slice(&ext.value);
    let background_distance = radii.iter().zip(&factor).filter(|(x, _)| **x >= 0.5).map(|(_, u)| (u - 1.0).abs()).fold(0.0, f64::max);
    Ok(GlueReport {
        config: *config,
        b: sol.b,
        lambda: sol.lambda,
        r_scale: family.params.r_scale,
        r_eps: r,
        gaps,
        completeness_min,
        background_distance,
        iterations: sol.iterations,
        contraction: sol.contraction,
        exterior_newton_steps: newton,
        lambda_in_domain: sol.lambda.abs() <= config.lambda_bound(),
        radii,
        factor,
    })
}

/// Background distances sup_{|x|∈[0.5,1]}|𝓤_ε − 1| for each ε.
pub fn background_convergence(config: &GluingConfig, eps: &[f64]) -> Result<Vec<(f64, f64)>> {
    eps.iter()
        .map(|&e| {
            let c = GluingConfig { eps: e, ..*config };
            glue_demo(&c).map(|rep| (e, rep.background_distance))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radial_family(config: &GluingConfig, b: f64) -> DelaunayFamily {
        let base = DelaunayParams::new(config.n, 2, config.eps).unwrap();
        let params = FamilyParams::with_neck_offset(base, b, vec![0.0; config.n], config.s).unwrap();
        DelaunayFamily::build(params, 1e-3, 1e-11).unwrap()
    }

    #[test]
    fn default_config_is_valid() {
        let c = GluingConfig::default();
        c.validate().unwrap();
        assert!((c.r_eps() - 0.05f64.powf(0.1)).abs() < 1e-15);
        let bad = GluingConfig { l: 0.03, ..c };
        assert!(matches!(bad.validate(), Err(Error::InvalidParams(_))));
        let bad = GluingConfig { delta2: 0.01, ..c };
        assert!(bad.validate().is_err());
        let bad = GluingConfig { nu: -3.0, ..c };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn state_ranges() {
        let c = GluingConfig::default();
        let s = GluingState::radial(&c, 0.1, 0.05).unwrap();
        s.validate(&c).unwrap();
        let s = GluingState::radial(&c, 0.6, 0.05).unwrap();
        assert!(matches!(s.validate(&c), Err(Error::OutsideDomain(_))));
        let s = GluingState::radial(&c, 0.0, 1.0).unwrap();
        assert!(s.validate(&c).is_err());
    }

    #[test]
    fn h_vanishes_for_flat_background_and_matches_fbar_on_the_sphere() {
        let radii = log_grid(0.01, 0.5, 50);
        let z = interior_correction_h(2.3, 0.5, &ModelBackground::Flat, &radii).unwrap();
        assert!(z.u.iter().all(|&x| x == 0.0));
        let q = ModelBackground::Quadratic { c: 1.0 };
        let h = interior_correction_h(2.3, 0.5, &q, &radii).unwrap();
        let last = radii.len() - 1;
        assert!((h.u[last] - 0.25).abs() < 1e-14);
        assert!((0.5 * h.du[last] - 2.0 * 0.25).abs() < 1e-13);
        for (x, u) in radii.iter().zip(&h.u) {
            let ratio = u / x.powf(3.3);
            assert!(ratio > 0.0 && ratio < 10.0);
        }
    }

    #[test]
    fn h_derivatives_match_differences() {
        let q = ModelBackground::Quadratic { c: 0.7 };
        let d = 1e-5;
        let h = interior_correction_h(2.2, 0.6, &q, &[0.3 - d, 0.3, 0.3 + d]).unwrap();
        assert!(((h.u[2] - h.u[0]) / (2.0 * d) - h.du[1]).abs() < 1e-8);
        assert!(((h.u[2] - 2.0 * h.u[1] + h.u[0]) / (d * d) - h.d2u[1]).abs() < 1e-4);
    }

    #[test]
    fn constant_system_closed_forms() {
        let c = GluingConfig { eps: 0.01, s: 0.25, ..GluingConfig::default() };
        let z = solve_constant_system_fixed(&c, 0.0, 0.0).unwrap();
        assert_eq!(z.b, 0.0);
        assert_eq!(z.lambda, 0.025);
        let h = c.r_eps().powf(2.0 + c.l);
        let s = solve_constant_system_fixed(&c, h, 0.0).unwrap();
        assert!((s.b - h).abs() < 1e-15);
        assert!((s.lambda - c.neck_term(h)).abs() < 1e-15);
        assert!(s.residual.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn constant_system_with_state_dependent_input() {
        let c = GluingConfig { eps: 0.01, s: 0.3, ..GluingConfig::default() };
        let r = c.r_eps();
        let scale = 0.1 * r.powf(2.0 + c.l);
        let sol = solve_constant_system(&c, |b, l| Ok((scale * (1.0 + 0.3 * b), scale * (0.5 - 2.0 * l))), 1e-15, 200).unwrap();
        let (h, d) = (scale * (1.0 + 0.3 * sol.b), scale * (0.5 - 2.0 * sol.lambda));
        let res = constant_residual(&c, sol.b, sol.lambda, h, d);
        assert!(res.iter().all(|x| x.abs() < 1e-10), "{res:?}");
        assert!(sol.contraction <= 0.5);
    }

    #[test]
    fn constant_system_leaves_the_domain() {
        let c = GluingConfig::default();
        assert!(matches!(solve_constant_system_fixed(&c, 0.9, 0.0), Err(Error::OutsideDomain(_))));
    }

    #[test]
    fn f_and_g_near_their_leading_values() {
        let c = GluingConfig { s: 0.8, ..GluingConfig::default() };
        let fam = radial_family(&c, 0.0);
        let fg = f_g_coefficients(&c, &fam, 0.0).unwrap();
        assert!((fg.f / fg.f_oracle - 1.0).abs() < 0.05, "{fg:?}");
        assert!((fg.f / 0.5 - 1.0).abs() < 0.05);
        assert!(fg.det > 0.0);
        assert!((fg.det / fg.det_leading - 1.0).abs() < 0.05);
    }

    #[test]
    fn expansion_degrades_outside_the_neck() {
        let c = GluingConfig::default();
        let fg = f_g_coefficients(&c, &radial_family(&c, 0.0), 0.0).unwrap();
        assert!(fg.f < 0.45 && fg.f > 0.3, "{}", fg.f);
        assert!(fg.det > 0.0);
    }

    #[test]
    fn coordinate_system_zero_and_oracle() {
        let c = GluingConfig::default();
        let fam = radial_family(&c, 0.0);
        let fg = f_g_coefficients(&c, &fam, 0.0).unwrap();
        let z = solve_coordinate_system(&c, &fg, |_, _, _| Ok((0.0, 0.0)), 1e-15, 50).unwrap();
        assert!(z.iter().all(|s| s.a == 0.0 && s.omega == 0.0));
        let small = 1e-4 * c.r_eps().powf(2.0 + c.l);
        let h = |i: usize, a: f64, w: f64| Ok((small * (1.0 + i as f64) + 1e-3 * a, -small + 1e-3 * w));
        let sol = solve_coordinate_system(&c, &fg, h, 1e-16, 100).unwrap();
        for (i, s) in sol.iter().enumerate() {
            assert!(s.residual.iter().all(|x| x.abs() < 1e-10));
            let (hi, rdh) = h(i, s.a, s.omega).unwrap();
            let (a, w) = coordinate_linear_oracle(c.n, c.r_eps(), &fg, hi, rdh);
            assert!((a - s.a).abs() < 1e-8 && (w - s.omega).abs() < 1e-8);
        }
    }

    #[test]
    fn phi_theta_is_theta_for_radial_members() {
        let c = GluingConfig::default();
        let fam = radial_family(&c, 0.0);
        let theta = HarmonicCoeffs::new(c.n, c.r_eps(), vec![Mode { l: 2, m: 1, c: 1e-3 }]).unwrap();
        let state = GluingState { theta: theta.clone(), ..GluingState::radial(&c, 0.0, 0.05).unwrap() };
        let phi = phi_theta_map(&state, &c, &ModelBackground::Flat, &fam).unwrap();
        assert_eq!(phi, theta);
    }

    #[test]
    fn translated_member_has_quadratically_small_high_modes() {
        let c = GluingConfig { eps: 0.01, s: 0.5, ..GluingConfig::default() };
        let r = c.r_eps();
        let base = DelaunayParams::new(c.n, 2, c.eps).unwrap();
        let mut sizes = Vec::new();
        for a in [0.02, 0.01] {
            let params = FamilyParams::with_neck_offset(base, 0.0, vec![a, 0.0, 0.0, 0.0, 0.0], c.s).unwrap();
            let fam = DelaunayFamily::build(params, 1e-3, 1e-11).unwrap();
            let state = GluingState::radial(&c, 0.0, 0.0).unwrap();
            let phi = phi_theta_map(&state, &c, &ModelBackground::Flat, &fam).unwrap();
            sizes.push(phi.l2_norm() / (a * a * r * r));
        }
        assert!((sizes[0] / sizes[1] - 1.0).abs() < 0.1, "{sizes:?}");
    }

    #[test]
    fn picard_zero_datum_and_quadratic_scaling() {
        let c = GluingConfig::default();
        let fam = radial_family(&c, 0.0);
        let z = interior_picard(&c, &fam, 0.0, 4.0).unwrap();
        assert!(z.correction.iter().all(|&x| x == 0.0));
        let mut norms = Vec::new();
        for d in [1e-3, 5e-4, 2.5e-4] {
            let p = interior_picard(&c, &fam, d, 4.0).unwrap();
            assert!(p.contraction <= 0.5);
            assert!(p.residual <= 1e-7, "{}", p.residual);
            norms.push(p.correction.iter().fold(0.0f64, |a, x| a.max(x.abs())));
        }
        for w in norms.windows(2) {
            assert!((w[0] / w[1] / 4.0 - 1.0).abs() < 0.05, "{norms:?}");
        }
    }

    #[test]
    fn exterior_model_at_zero_lambda_is_trivial() {
        let m = ExteriorModel { n: 5, r_inner: 0.7, r_outer: 1.0, points: 401 };
        let s = m.solve(0.0).unwrap();
        assert!(s.value.iter().all(|&u| u == 1.0));
        let s = m.solve(0.05).unwrap();
        assert!(s.residual <= 1e-9, "{}", s.residual);
        assert!(s.correction[s.correction.len() - 1] == 0.0);
    }

    #[test]
    fn radial_gaps_vanish_in_higher_modes() {
        let c = GluingConfig::default();
        let fam = radial_family(&c, 0.0);
        let state = GluingState::radial(&c, 0.0, 0.05).unwrap();
        let phi = phi_theta_map(&state, &c, &ModelBackground::Flat, &fam).unwrap();
        let g = cauchy_mismatch(&state, &c, &fam, &phi, (0.0, 0.0), (0.0, 0.0)).unwrap();
        assert!(g.l1_value.iter().chain(&g.l1_deriv).all(|&x| x == 0.0));
        assert_eq!((g.high_value, g.high_deriv), (0.0, 0.0));
        let (u, _, _) = fam.radial_derivatives(c.r_eps()).unwrap();
        assert!((g.l0_value - (u - 1.0 - 0.05 * c.r_eps().powf(-0.5))).abs() < 1e-12);
    }

    fn in_neck() -> GluingConfig {
        GluingConfig { eps: 0.01, s: 0.5, ..GluingConfig::default() }
    }

    #[test]
    fn demo_matches_and_is_complete() {
        let rep = glue_demo(&in_neck()).unwrap();
        assert!(rep.gaps.max_l0() <= 1e-6, "{:?}", rep.gaps);
        assert!(rep.completeness_min > 0.0);
        assert!(rep.b.abs() <= 0.5);
        assert!((rep.lambda - in_neck().neck_term(rep.b)).abs() < 1e-2);
        assert_eq!(rep.radii.len(), rep.factor.len());
        assert!(rep.to_csv().starts_with("r,U\n"));
    }

    #[test]
    fn background_distance_shrinks_with_eps() {
        let d = background_convergence(&in_neck(), &[0.025, 0.0125, 0.00625]).unwrap();
        assert!(d.windows(2).all(|w| w[1].1 < w[0].1), "{d:?}");
    }

    #[test]
    fn demo_outside_the_neck_has_no_matching() {
        assert!(matches!(glue_demo(&GluingConfig::default()), Err(Error::OutsideDomain(_))));
    }
}
