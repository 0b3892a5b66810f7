//! Spherical-harmonic coefficients on S^{n−1}_r, frequency projections, harmonic
//! extensions and discrete weighted-norm surrogates.
//!
//! Fields are stored mode by mode: a function Σ w_ℓm(|x|) e_ℓm(x/|x|) is a list
//! of radial profiles tagged by (ℓ, m).

use crate::error::{Error, Result};
use crate::quadrature::{gamma_half, gauss_legendre, sphere_area};
use serde::{Deserialize, Serialize};

/// Default truncation degree.
pub const MAX_DEGREE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub l: usize,
    pub m: usize,
    pub c: f64,
}

/// Coefficients in the unit-L² harmonic basis of S^{n−1}_r.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicCoeffs {
    pub n: usize,
    pub r: f64,
    pub modes: Vec<Mode>,
}

/// λ_ℓ = ℓ(ℓ+n−2)
pub fn eigenvalue(l: usize, n: usize) -> f64 {
    (l * (l + n - 2)) as f64
}

fn binomial(a: usize, b: usize) -> usize {
    if b > a {
        return 0;
    }
    let b = b.min(a - b);
    (0..b).fold(1usize, |acc, i| acc * (a - i) / (i + 1))
}

/// Dimension of the degree-ℓ eigenspace on S^{n−1}.
pub fn multiplicity(l: usize, n: usize) -> usize {
    if l < 2 {
        return if l == 0 { 1 } else { n };
    }
    binomial(l + n - 1, n - 1) - binomial(l + n - 3, n - 1)
}

/// Degree of the j-th eigenfunction in the flat enumeration (j = 0 is the constant).
pub fn degree_of_flat_index(j: usize, n: usize) -> usize {
    let mut l = 0;
    let mut start = 0;
    loop {
        let next = start + multiplicity(l, n);
        if j < next {
            return l;
        }
        start = next;
        l += 1;
    }
}

/// λ_j counted with multiplicity.
pub fn flat_eigenvalue(j: usize, n: usize) -> f64 {
    eigenvalue(degree_of_flat_index(j, n), n)
}

impl HarmonicCoeffs {
    pub fn new(n: usize, r: f64, mut modes: Vec<Mode>) -> Result<Self> {
        if n < 2 || !(r > 0.0) {
            return Err(Error::InvalidParams(format!("need n ≥ 2 and r > 0, got n = {n}, r = {r}")));
        }
        modes.sort_by_key(|md| (md.l, md.m));
        for w in modes.windows(2) {
            if (w[0].l, w[0].m) == (w[1].l, w[1].m) {
                return Err(Error::InvalidParams(format!("duplicate mode ({}, {})", w[0].l, w[0].m)));
            }
        }
        if let Some(md) = modes.iter().find(|md| md.m >= multiplicity(md.l, n)) {
            return Err(Error::InvalidParams(format!("index {} exceeds the multiplicity of degree {}", md.m, md.l)));
        }
        Ok(Self { n, r, modes })
    }

    pub fn single(n: usize, r: f64, l: usize, c: f64) -> Result<Self> {
        Self::new(n, r, vec![Mode { l, m: 0, c }])
    }

    fn filtered(&self, keep: impl Fn(usize) -> bool) -> Self {
        Self { n: self.n, r: self.r, modes: self.modes.iter().copied().filter(|md| keep(md.l)).collect() }
    }

    /// Modes of degree ≥ 2.
    pub fn project_high(&self) -> Self {
        self.filtered(|l| l >= 2)
    }

    /// Constants and restrictions of linear functions.
    pub fn project_low(&self) -> Self {
        self.filtered(|l| l <= 1)
    }

    /// Coefficientwise sum.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::InvalidParams("dimension mismatch".into()));
        }
        let mut modes = self.modes.clone();
        for md in &other.modes {
            match modes.iter_mut().find(|x| x.l == md.l && x.m == md.m) {
                Some(x) => x.c += md.c,
                None => modes.push(*md),
            }
        }
        Self::new(self.n, self.r, modes)
    }

    pub fn l2_norm(&self) -> f64 {
        self.modes.iter().map(|md| md.c * md.c).sum::<f64>().sqrt()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.modes).unwrap_or(serde_json::Value::Null)
    }

    pub fn from_json(n: usize, r: f64, v: &serde_json::Value) -> Result<Self> {
        let modes: Vec<Mode> = serde_json::from_value(v.clone()).map_err(|e| Error::InvalidParams(e.to_string()))?;
        Self::new(n, r, modes)
    }

    /// Surrogate of the C^{2,α} norm on S^{n−1}_r rescaled to the unit sphere.
    pub fn boundary_norm(&self, alpha: f64) -> f64 {
        self.modes.iter().map(|md| md.c.abs() * harmonic_norm_constant(md.l, self.n, alpha)).sum()
    }
}

/// Unit-L² zonal harmonic of degree ℓ on S^{n−1}, evaluated at cos θ.
pub fn zonal_eval(l: usize, n: usize, cos_theta: f64) -> f64 {
    let x = cos_theta.clamp(-1.0, 1.0);
    let alpha = (n as f64 - 2.0) / 2.0;
    let (mut c0, mut c1) = (1.0, 2.0 * alpha * x);
    let value = match l {
        0 => 1.0,
        1 => c1,
        _ => {
            for j in 2..=l {
                let jf = j as f64;
                let c2 = (2.0 * x * (jf + alpha - 1.0) * c1 - (jf + 2.0 * alpha - 2.0) * c0) / jf;
                c0 = c1;
                c1 = c2;
            }
            c1
        }
    };
    value / zonal_norm(l, n)
}

/// L² norm of C_ℓ^{(n−2)/2}(cos θ) over S^{n−1}.
fn zonal_norm(l: usize, n: usize) -> f64 {
    let alpha = (n as f64 - 2.0) / 2.0;
    let lf = l as f64;
    // Γ(ℓ+n−2)/ℓ! as a finite product
    let ratio: f64 = (1..=n - 3).map(|i| (l + i) as f64).product();
    let g = gamma_half(n - 2);
    let one_dim = std::f64::consts::PI * 2f64.powf(1.0 - 2.0 * alpha) * ratio / ((lf + alpha) * g * g);
    (sphere_area(n - 2) * one_dim).sqrt()
}

/// ∫_{S^{n−1}} f(cos θ) by Gauss–Legendre in θ ∈ [0, π].
pub fn zonal_integral<F: Fn(f64) -> f64>(f: F, n: usize, points: usize) -> f64 {
    let (x, w) = gauss_legendre(points);
    let half = std::f64::consts::FRAC_PI_2;
    let q: f64 = x
        .iter()
        .zip(&w)
        .map(|(&x, &w)| {
            let theta = half * (x + 1.0);
            w * f(theta.cos()) * theta.sin().powi(n as i32 - 2)
        })
        .sum();
    sphere_area(n - 2) * half * q
}

/// C^{2,α} surrogate of the unit zonal harmonic of degree ℓ: sup of the value and
/// of its first two θ-derivatives plus the Hölder quotient of the second, on a θ grid.
pub fn harmonic_norm_constant(l: usize, n: usize, alpha: f64) -> f64 {
    let m = 400;
    let h = std::f64::consts::PI / m as f64;
    let y: Vec<f64> = (0..=m).map(|i| zonal_eval(l, n, (i as f64 * h).cos())).collect();
    let (d1, d2) = crate::fd::derivatives(&y, h);
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut holder = 0.0f64;
    let stride = 8;
    for i in (0..=m).step_by(stride) {
        for j in (i + stride..=m).step_by(stride) {
            holder = holder.max((d2[i] - d2[j]).abs() / ((j - i) as f64 * h).powf(alpha));
        }
    }
    sup(&y) + sup(&d1) + sup(&d2) + holder
}

/// k_{i,n} = ‖e_i‖_{(2,α),1} for the i-th flat index.
pub fn k_in(i: usize, n: usize, alpha: f64) -> f64 {
    harmonic_norm_constant(degree_of_flat_index(i, n), n, alpha)
}

/// c·(ρ/r)^p with exact derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialPower {
    pub coeff: f64,
    pub radius: f64,
    pub exponent: f64,
}

impl RadialPower {
    pub fn eval(&self, rho: f64) -> [f64; 3] {
        let p = self.exponent;
        let v = self.coeff * (rho / self.radius).powf(p);
        [v, p * v / rho, p * (p - 1.0) * v / (rho * rho)]
    }
}

/// A per-mode analytic profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeProfile {
    pub l: usize,
    pub m: usize,
    pub profile: RadialPower,
}

/// v_φ = Σ φ_ℓ (|x|/r)^ℓ e_ℓ for high-frequency φ.
pub fn interior_extension(phi: &HarmonicCoeffs) -> Result<Vec<ModeProfile>> {
    if let Some(md) = phi.modes.iter().find(|md| md.l <= 1) {
        return Err(Error::LowFrequencyInput(md.l));
    }
    Ok(phi
        .modes
        .iter()
        .map(|md| ModeProfile { l: md.l, m: md.m, profile: RadialPower { coeff: md.c, radius: phi.r, exponent: md.l as f64 } })
        .collect())
}

/// Q_r(φ) = Σ φ_ℓ r^{n+ℓ−2}|x|^{2−n−ℓ} e_ℓ for φ orthogonal to constants.
pub fn exterior_extension(phi: &HarmonicCoeffs) -> Result<Vec<ModeProfile>> {
    if phi.modes.iter().any(|md| md.l == 0) {
        return Err(Error::ConstantModePresent);
    }
    let n = phi.n as f64;
    Ok(phi
        .modes
        .iter()
        .map(|md| ModeProfile {
            l: md.l,
            m: md.m,
            profile: RadialPower { coeff: md.c, radius: phi.r, exponent: 2.0 - n - md.l as f64 },
        })
        .collect())
}

/// Samples of one mode's radial profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSamples {
    pub l: usize,
    pub m: usize,
    pub w: Vec<f64>,
    pub dw: Vec<f64>,
    pub d2w: Vec<f64>,
}

/// A field given mode by mode on a shared radial grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledField {
    pub n: usize,
    pub radii: Vec<f64>,
    pub modes: Vec<ModeSamples>,
}

impl SampledField {
    pub fn from_profiles(n: usize, radii: &[f64], profiles: &[ModeProfile]) -> Self {
        let modes = profiles
            .iter()
            .map(|p| {
                let vals: Vec<[f64; 3]> = radii.iter().map(|&r| p.profile.eval(r)).collect();
                ModeSamples {
                    l: p.l,
                    m: p.m,
                    w: vals.iter().map(|v| v[0]).collect(),
                    dw: vals.iter().map(|v| v[1]).collect(),
                    d2w: vals.iter().map(|v| v[2]).collect(),
                }
            })
            .collect();
        Self { n, radii: radii.to_vec(), modes }
    }

    fn filtered(&self, keep: impl Fn(usize) -> bool) -> Self {
        Self { n: self.n, radii: self.radii.clone(), modes: self.modes.iter().filter(|m| keep(m.l)).cloned().collect() }
    }

    pub fn high(&self) -> Self {
        self.filtered(|l| l >= 2)
    }

    pub fn low(&self) -> Self {
        self.filtered(|l| l <= 1)
    }
}

/// Log-uniform radii covering `annuli` dyadic annuli below `r_max`, with
/// `per_annulus` intervals in each.
pub fn dyadic_grid(r_max: f64, annuli: usize, per_annulus: usize) -> Vec<f64> {
    let total = annuli * per_annulus;
    let lo = (r_max / 2f64.powi(annuli as i32)).ln();
    let hi = r_max.ln();
    (0..=total).map(|i| (lo + (hi - lo) * i as f64 / total as f64).exp()).collect()
}

/// Parameters of the weighted-norm surrogates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedNormSpec {
    pub mu: f64,
    pub alpha: f64,
    pub r: f64,
    /// (γ, γ̄) for the split norm.
    pub gamma_pair: Option<(f64, f64)>,
}

/// δ_{n,k}-window for γ: (−δ+1−n/2k, δ+1−n/2k).
pub fn gamma_window(n: usize, k: usize, delta: f64) -> (f64, f64) {
    let c = 1.0 - n as f64 / (2.0 * k as f64);
    (-delta + c, delta + c)
}

/// Pointwise sizes (|u|, |∇u|, |∇²u|) of one mode sample; the angular factor
/// enters through λ and the unit-L² normalization is not included.
fn jet_sizes(n: usize, l: usize, r: f64, w: f64, dw: f64, d2w: f64) -> [f64; 3] {
    let sl = eigenvalue(l, n).sqrt();
    let tn = ((n - 1) as f64).sqrt();
    [
        w.abs(),
        dw.abs() + sl * w.abs() / r,
        d2w.abs() + (tn + 2.0 * sl) * dw.abs() / r + (sl * sl + 2.0 * sl) * w.abs() / (r * r),
    ]
}

/// sup over dyadic annuli [σ, 2σ] (from the top of the grid down) of
/// σ^{−μ}(Σ_{j≤2} σ^j max|∇^j u| + σ^{2+α}[∇²u]_α).
pub fn weighted_norm(field: &SampledField, spec: &WeightedNormSpec) -> f64 {
    let radii = &field.radii;
    if radii.is_empty() || field.modes.is_empty() {
        return 0.0;
    }
    let top = radii[radii.len() - 1];
    let bottom = radii[0];
    let mut best = 0.0f64;
    let mut hi = top;
    while hi / 2.0 >= bottom * (1.0 - 1e-9) {
        let sigma = hi / 2.0;
        let idx: Vec<usize> = (0..radii.len()).filter(|&i| radii[i] >= sigma * (1.0 - 1e-12) && radii[i] <= hi * (1.0 + 1e-12)).collect();
        let mut sizes = [0.0f64; 3];
        let mut holder = 0.0f64;
        for md in &field.modes {
            let mut local = [0.0f64; 3];
            for &i in &idx {
                let s = jet_sizes(field.n, md.l, radii[i], md.w[i], md.dw[i], md.d2w[i]);
                for j in 0..3 {
                    local[j] = local[j].max(s[j]);
                }
            }
            for j in 0..3 {
                sizes[j] += local[j];
            }
            let mut q = 0.0f64;
            for (a, &i) in idx.iter().enumerate() {
                for &j in &idx[a + 1..] {
                    q = q.max((md.d2w[i] - md.d2w[j]).abs() / (radii[j] - radii[i]).powf(spec.alpha));
                }
            }
            holder += q;
        }
        let value = sigma.powf(-spec.mu)
            * (sizes[0] + sigma * sizes[1] + sigma * sigma * sizes[2] + sigma.powf(2.0 + spec.alpha) * holder);
        best = best.max(value);
        hi = sigma;
    }
    best
}

/// Order-zero surrogate: sup over dyadic annuli of σ^{−μ}(max|u| + σ^α[u]_α),
/// for values `u` on increasing `radii`.
pub fn weighted_norm_c0(radii: &[f64], u: &[f64], spec: &WeightedNormSpec) -> f64 {
    if radii.is_empty() {
        return 0.0;
    }
    let bottom = radii[0];
    let mut hi = radii[radii.len() - 1];
    let mut best = 0.0f64;
    while hi / 2.0 >= bottom * (1.0 - 1e-9) {
        let sigma = hi / 2.0;
        let idx: Vec<usize> = (0..radii.len()).filter(|&i| radii[i] >= sigma * (1.0 - 1e-12) && radii[i] <= hi * (1.0 + 1e-12)).collect();
        let sup = idx.iter().fold(0.0f64, |a, &i| a.max(u[i].abs()));
        let mut q = 0.0f64;
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                q = q.max((u[i] - u[j]).abs() / (radii[j] - radii[i]).powf(spec.alpha));
            }
        }
        best = best.max(sigma.powf(-spec.mu) * (sup + sigma.powf(spec.alpha) * q));
        hi = sigma;
    }
    best
}

/// r^{γ−γ̄}‖u⊥‖_{γ̄} + ‖u⊤‖_γ
pub fn split_norm(field: &SampledField, spec: &WeightedNormSpec) -> Result<f64> {
    let (gamma, gamma_bar) = spec
        .gamma_pair
        .ok_or_else(|| Error::InvalidParams("split norm needs the pair (γ, γ̄)".into()))?;
    let high = weighted_norm(&field.high(), &WeightedNormSpec { mu: gamma_bar, ..*spec });
    let low = weighted_norm(&field.low(), &WeightedNormSpec { mu: gamma, ..*spec });
    Ok(spec.r.powf(gamma - gamma_bar) * high + low)
}

/// C² cutoff equal to 1 below `inner`, 0 above `outer` (quintic smoothstep), with derivatives.
pub fn cutoff(rho: f64, inner: f64, outer: f64) -> [f64; 3] {
    if rho <= inner {
        return [1.0, 0.0, 0.0];
    }
    if rho >= outer {
        return [0.0, 0.0, 0.0];
    }
    let d = outer - inner;
    let s = (rho - inner) / d;
    let p = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    let dp = 30.0 * s * s * (1.0 - s) * (1.0 - s);
    let d2p = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
    [1.0 - p, -dp / d, -d2p / (d * d)]
}

/// u_φ = η r^{−γ̄}|x|^{γ̄} Q_r(π″φ) + η Q_r(φ − π″φ), η cut off between 3r and 4r.
pub fn u_phi_patch(phi: &HarmonicCoeffs, gamma_bar: f64, radii: &[f64]) -> Result<SampledField> {
    let profiles = exterior_extension(phi)?;
    let r = phi.r;
    let mut field = SampledField::from_profiles(phi.n, radii, &profiles);
    for md in &mut field.modes {
        let weighted = md.l >= 2;
        for (i, &rho) in radii.iter().enumerate() {
            let [e, de, d2e] = cutoff(rho, 3.0 * r, 4.0 * r);
            let [g, dg, d2g] = if weighted {
                let p = (rho / r).powf(gamma_bar);
                [p, gamma_bar * p / rho, gamma_bar * (gamma_bar - 1.0) * p / (rho * rho)]
            } else {
                [1.0, 0.0, 0.0]
            };
            let m = [e * g, de * g + e * dg, d2e * g + 2.0 * de * dg + e * d2g];
            let (w, dw, d2w) = (md.w[i], md.dw[i], md.d2w[i]);
            md.w[i] = m[0] * w;
            md.dw[i] = m[1] * w + m[0] * dw;
            md.d2w[i] = m[2] * w + 2.0 * m[1] * dw + m[0] * d2w;
        }
    }
    Ok(field)
}

/// Measured ‖v_φ‖_{(2,α),μ,r} · r^μ / ‖φ‖_{(2,α),r} over `annuli` dyadic annuli below r.
pub fn interior_extension_ratio(phi: &HarmonicCoeffs, mu: f64, alpha: f64, annuli: usize, per_annulus: usize) -> Result<f64> {
    let profiles = interior_extension(phi)?;
    let field = SampledField::from_profiles(phi.n, &dyadic_grid(phi.r, annuli, per_annulus), &profiles);
    let norm = weighted_norm(&field, &WeightedNormSpec { mu, alpha, r: phi.r, gamma_pair: None });
    Ok(norm * phi.r.powf(mu) / phi.boundary_norm(alpha))
}

/// Measured ‖Q_r(φ)‖_{C^{2,α}_{1−n}} / (r^{n−1}‖φ‖) on [r, 2^{annuli} r].
pub fn exterior_extension_ratio(phi: &HarmonicCoeffs, alpha: f64, annuli: usize, per_annulus: usize) -> Result<f64> {
    let profiles = exterior_extension(phi)?;
    let outer = phi.r * 2f64.powi(annuli as i32);
    let field = SampledField::from_profiles(phi.n, &dyadic_grid(outer, annuli, per_annulus), &profiles);
    let mu = 1.0 - phi.n as f64;
    let norm = weighted_norm(&field, &WeightedNormSpec { mu, alpha, r: phi.r, gamma_pair: None });
    Ok(norm / (phi.r.powf(phi.n as f64 - 1.0) * phi.boundary_norm(alpha)))
}

/// Measured ‖u_φ‖_ν · r^ν / ‖φ‖ on [r, 4r].
pub fn u_phi_ratio(phi: &HarmonicCoeffs, gamma_bar: f64, nu: f64, alpha: f64, per_annulus: usize) -> Result<f64> {
    let radii = dyadic_grid(4.0 * phi.r, 2, per_annulus);
    let field = u_phi_patch(phi, gamma_bar, &radii)?;
    let norm = weighted_norm(&field, &WeightedNormSpec { mu: nu, alpha, r: phi.r, gamma_pair: None });
    Ok(norm * phi.r.powf(nu) / phi.boundary_norm(alpha))
}
