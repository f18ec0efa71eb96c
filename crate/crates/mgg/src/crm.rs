//! The mixed generalized gamma measure: parameters, Laplace exponents and
//! their inverses, tilted moments, the Lévy density, the conditional law of
//! the local index, and the asymptotic sparsity constants.

use crate::error::{Error, Result};
use crate::quad;
use crate::special::{ln_gamma_pos, lambert_w, WBranch};
use serde::{Deserialize, Serialize};

/// Parameters `(alpha, tau, beta, c, eta)` of the mGG measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct MggParams {
    /// Index of variation, `0 < alpha <= 1`.
    pub alpha: f64,
    /// Power-law exponent, `0 <= tau < alpha`.
    pub tau: f64,
    /// Exponential tilting, `beta >= 0`.
    pub beta: f64,
    /// Scale, `c > 0`.
    pub c: f64,
    /// Rate, `eta > 0`.
    pub eta: f64,
}

#[derive(Deserialize)]
struct RawParams {
    alpha: f64,
    tau: f64,
    beta: f64,
    c: f64,
    eta: f64,
}

impl TryFrom<RawParams> for MggParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        MggParams::new(r.alpha, r.tau, r.beta, r.c, r.eta)
    }
}

impl MggParams {
    pub fn new(alpha: f64, tau: f64, beta: f64, c: f64, eta: f64) -> Result<Self> {
        let p = MggParams { alpha, tau, beta, c, eta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_index(self.alpha, self.tau)?;
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::domain(format!("beta must satisfy beta >= 0, got {}", self.beta)));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::domain(format!("c must satisfy c > 0, got {}", self.c)));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::domain(format!("eta must satisfy eta > 0, got {}", self.eta)));
        }
        Ok(())
    }

    /// Same measure with the tilting parameter replaced.
    pub fn with_beta(&self, beta: f64) -> Self {
        MggParams { beta, ..*self }
    }

    /// Same measure with the rate replaced.
    pub fn with_eta(&self, eta: f64) -> Self {
        MggParams { eta, ..*self }
    }

    /// `E[G(Θ)] = kappa_mgg(1, 0)`.
    pub fn mean_total_mass(&self) -> Result<f64> {
        kappa_mgg(1, 0.0, self)
    }

    /// `Var[G(Θ)] = kappa_mgg(2, 0)`.
    pub fn var_total_mass(&self) -> Result<f64> {
        kappa_mgg(2, 0.0, self)
    }
}

pub(crate) fn check_index(alpha: f64, tau: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!("alpha must satisfy 0 < alpha <= 1, got {alpha}")));
    }
    if !(tau >= 0.0 && tau < alpha) {
        return Err(Error::domain(format!("tau must satisfy 0 <= tau < alpha, got tau={tau}, alpha={alpha}")));
    }
    Ok(())
}

/// `∫_a^b s^k exp(s l - off) ds`.
pub(crate) fn moment(k: i32, l: f64, a: f64, b: f64, off: f64) -> f64 {
    if l.abs() * b.abs().max(a.abs()) <= 1.0 {
        let scale = (-off).exp();
        let mut sum = 0.0;
        let mut lj = 1.0;
        for j in 0..40 {
            if j > 0 {
                lj *= l / j as f64;
            }
            let p = k + j + 1;
            let term = lj * (b.powi(p) - a.powi(p)) / p as f64;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        return sum * scale;
    }
    let ea = (a * l - off).exp();
    let eb = (b * l - off).exp();
    let mut j = ea * ((b - a) * l).exp_m1() / l;
    for i in 1..=k {
        j = (b.powi(i) * eb - a.powi(i) * ea) / l - (i as f64 / l) * j;
    }
    j
}

/// Laplace exponent of the mixed stable measure,
/// `(t^α − t^τ) / ((α − τ) log t)`, continuous at `t = 0` and `t = 1`.
pub fn psi_mst(t: f64, alpha: f64, tau: f64) -> Result<f64> {
    check_index(alpha, tau)?;
    if !(t >= 0.0) {
        return Err(Error::domain(format!("psi_mst: t must be >= 0, got {t}")));
    }
    Ok(psi_mst_raw(t, alpha, tau))
}

/// Written as `t^τ · expm1(d)/d` with `d = (α − τ) log t`, which has no
/// cancellation at `t = 1`.
pub(crate) fn psi_mst_raw(t: f64, alpha: f64, tau: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let l = t.ln();
    let d = (alpha - tau) * l;
    let ratio = if d == 0.0 { 1.0 } else { d.exp_m1() / d };
    (tau * l).exp() * ratio
}

/// `ψ_mst(β + x) − ψ_mst(β)`, accurate when `x` is small relative to `β`.
pub(crate) fn psi_mst_increment(beta: f64, x: f64, alpha: f64, tau: f64) -> f64 {
    if beta > 0.0 && x < 1e-3 * beta {
        // (1/(α−τ)) ∫ β^s expm1(s u) ds with u = log1p(x/β), expanded in u.
        let u = (x / beta).ln_1p();
        let lb = beta.ln();
        let mut sum = 0.0;
        let mut uk = 1.0;
        for k in 1..20 {
            uk *= u / k as f64;
            let term = uk * moment(k, lb, tau, alpha, 0.0);
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        sum / (alpha - tau)
    } else {
        psi_mst_raw(beta + x, alpha, tau) - psi_mst_raw(beta, alpha, tau)
    }
}

/// Laplace exponent of the mGG measure, `η (ψ_mst(β + c t) − ψ_mst(β))`.
pub fn psi_mgg(t: f64, params: &MggParams) -> Result<f64> {
    params.validate()?;
    if !(t >= 0.0) {
        return Err(Error::domain(format!("psi_mgg: t must be >= 0, got {t}")));
    }
    Ok(psi_mgg_raw(t, params))
}

pub(crate) fn psi_mgg_raw(t: f64, p: &MggParams) -> f64 {
    p.eta * psi_mst_increment(p.beta, p.c * t, p.alpha, p.tau)
}

/// Inverse of `ψ_mst`: the `t >= 0` with `ψ_mst(t) = y`.
pub fn psi_mst_inv(y: f64, alpha: f64, tau: f64) -> Result<f64> {
    check_index(alpha, tau)?;
    if !(y >= 0.0) || !y.is_finite() {
        return Err(Error::domain(format!("psi_mst_inv: y must be finite and >= 0, got {y}")));
    }
    psi_mst_inv_raw(y, alpha, tau)
}

pub(crate) fn psi_mst_inv_raw(y: f64, alpha: f64, tau: f64) -> Result<f64> {
    if y == 0.0 {
        return Ok(0.0);
    }
    if y == 1.0 {
        return Ok(1.0);
    }
    if tau == 0.0 {
        // u = t^α solves (u − 1)/log u = y.
        let x = -(-1.0 / y - y.ln()).exp();
        let branch = if y > 1.0 { WBranch::Minus1 } else { WBranch::Principal };
        let x = if branch == WBranch::Minus1 { x.min(-f64::MIN_POSITIVE) } else { x };
        let w = lambert_w(x.max(-std::f64::consts::E.recip()), branch)?;
        let u = -y * w;
        let t0 = u.powf(1.0 / alpha);
        if t0 == 0.0 {
            return Ok(0.0);
        }
        return polish_psi_inv(y, alpha, tau, t0);
    }
    // Monotone root solve in log t.
    let (mut lo, mut hi) = if y < 1.0 {
        (-745.0f64, 0.0f64)
    } else {
        (0.0, (2.0 * y * y.max(2.0).ln()).max(1.0).ln())
    };
    let mut guard = 0;
    while psi_mst_raw(hi.exp(), alpha, tau) < y {
        lo = hi;
        hi = 2.0 * hi + 1.0;
        guard += 1;
        if guard > 60 || hi > 709.0 {
            return Err(Error::numeric(format!("psi_mst_inv: cannot bracket y={y}")));
        }
    }
    let mut l = 0.5 * (lo + hi);
    for _ in 0..200 {
        let t = l.exp();
        let f = psi_mst_raw(t, alpha, tau) - y;
        if f > 0.0 {
            hi = l;
        } else {
            lo = l;
        }
        let df = t * kappa1_raw(t, alpha, tau);
        let mut next = l - f / df;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - l).abs() <= 1e-15 * l.abs().max(1.0) || hi - lo <= 1e-15 * l.abs().max(1.0) {
            l = next;
            break;
        }
        l = next;
    }
    Ok(l.exp())
}

fn polish_psi_inv(y: f64, alpha: f64, tau: f64, mut t: f64) -> Result<f64> {
    for _ in 0..4 {
        let f = psi_mst_raw(t, alpha, tau) - y;
        let df = kappa1_raw(t, alpha, tau);
        let step = f / df;
        if !step.is_finite() {
            break;
        }
        let next = t - step;
        if next <= 0.0 {
            t *= 0.5;
            continue;
        }
        t = next;
        if step.abs() <= 1e-15 * t {
            break;
        }
    }
    if !t.is_finite() {
        return Err(Error::numeric(format!("psi_mst_inv: non-finite result for y={y}")));
    }
    Ok(t)
}

/// `κ_mst(1, z) = ψ_mst'(z)` without argument checks.
pub(crate) fn kappa1_raw(z: f64, alpha: f64, tau: f64) -> f64 {
    let l = z.ln();
    moment(1, l, tau, alpha, l) / (alpha - tau)
}

/// Tilted moments `κ_mst(m, z) = z^{−m}/(α−τ) ∫_τ^α s z^s Γ(m−s)/Γ(1−s) ds`.
pub fn kappa_mst(m: u32, z: f64, alpha: f64, tau: f64) -> Result<f64> {
    check_index(alpha, tau)?;
    if m == 0 {
        return Err(Error::domain("kappa_mst: m must be >= 1"));
    }
    if z == 0.0 {
        return Err(Error::InfiniteMoment(format!("kappa_mst({m}, 0) is infinite")));
    }
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::domain(format!("kappa_mst: z must be positive and finite, got {z}")));
    }
    let l = z.ln();
    let width = alpha - tau;
    match m {
        1 => Ok(moment(1, l, tau, alpha, l) / width),
        2 => {
            let off = 2.0 * l;
            Ok((moment(1, l, tau, alpha, off) - moment(2, l, tau, alpha, off)) / width)
        }
        _ => {
            let mf = m as f64;
            let f = |s: f64| {
                let mut poly = s;
                for k in 1..m {
                    poly *= k as f64 - s;
                }
                poly * (s * l - mf * l).exp()
            };
            Ok(quad::integrate(f, tau, alpha, 1e-11, 0.0)? / width)
        }
    }
}

/// `κ_mgg(m, z) = η c^m κ_mst(m, β + c z)`.
pub fn kappa_mgg(m: u32, z: f64, params: &MggParams) -> Result<f64> {
    params.validate()?;
    if !(z >= 0.0) {
        return Err(Error::domain(format!("kappa_mgg: z must be >= 0, got {z}")));
    }
    let arg = params.beta + params.c * z;
    if arg == 0.0 {
        return Err(Error::InfiniteMoment(format!("kappa_mgg({m}, {z}) is infinite when beta + c z = 0")));
    }
    Ok(params.eta * params.c.powi(m as i32) * kappa_mst(m, arg, params.alpha, params.tau)?)
}

/// Lévy density
/// `η/(α−τ) ∫_τ^α s c^s / Γ(1−s) w^{−1−s} e^{−βw/c} ds`.
pub fn levy_density(w: f64, params: &MggParams) -> Result<f64> {
    params.validate()?;
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::domain(format!("levy_density: w must be positive and finite, got {w}")));
    }
    levy_density_raw(w, params)
}

pub(crate) fn levy_density_raw(w: f64, p: &MggParams) -> Result<f64> {
    let lc = p.c.ln();
    let lw = w.ln();
    let tilt = p.beta * w / p.c;
    // 1/Γ(1−s) = (1−s)/Γ(2−s) avoids the pole at s = 1.
    let f = |s: f64| s * (1.0 - s) * (s * lc - (1.0 + s) * lw - tilt - ln_gamma_pos(2.0 - s)).exp();
    let v = quad::integrate(f, p.tau, p.alpha, 1e-11, 0.0)?;
    Ok(p.eta * v / (p.alpha - p.tau))
}

/// CDF of the local index given `z`, `F(x) = ∫_τ^x s z^s ds / ∫_τ^α s z^s ds`.
pub fn s_cdf(x: f64, z: f64, alpha: f64, tau: f64) -> Result<f64> {
    check_index(alpha, tau)?;
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::domain(format!("s_cdf: z must be positive, got {z}")));
    }
    let x = x.clamp(tau, alpha);
    let l = z.ln();
    let off = alpha * l.max(0.0) + tau * l.min(0.0);
    Ok(moment(1, l, tau, x, off) / moment(1, l, tau, alpha, off))
}

/// Inverse of [`s_cdf`]: the `x ∈ [τ, α]` with `F(x) = y`.
pub fn s_cdf_inverse(y: f64, z: f64, alpha: f64, tau: f64) -> Result<f64> {
    check_index(alpha, tau)?;
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::domain(format!("s_cdf_inverse: y must lie in [0, 1], got {y}")));
    }
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::domain(format!("s_cdf_inverse: z must be positive, got {z}")));
    }
    Ok(s_cdf_inverse_raw(y, z, alpha, tau))
}

pub(crate) fn s_cdf_inverse_raw(y: f64, z: f64, alpha: f64, tau: f64) -> f64 {
    if y == 0.0 {
        return tau;
    }
    if y == 1.0 {
        return alpha;
    }
    let l = z.ln();
    let x0 = if l.abs() < 1e-3 {
        ((alpha * alpha - tau * tau) * y + tau * tau).sqrt()
    } else {
        s_cdf_inverse_lambert(y, l, alpha, tau)
    };
    let x0 = if x0.is_finite() { x0.clamp(tau, alpha) } else { 0.5 * (tau + alpha) };
    // Safeguarded Newton on the closed-form CDF.
    let off = alpha * l.max(0.0) + tau * l.min(0.0);
    let total = moment(1, l, tau, alpha, off);
    let (mut lo, mut hi) = (tau, alpha);
    let mut x = x0;
    for _ in 0..100 {
        let f = moment(1, l, tau, x, off) / total - y;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let df = x * (x * l - off).exp() / total;
        let mut next = x - f / df;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let done = (next - x).abs() <= 1e-15 || hi - lo <= 1e-15;
        x = next;
        if done {
            break;
        }
    }
    x.clamp(tau, alpha)
}

/// Closed form `x = (W_k(c(y)/e) + 1)/log z`.
fn s_cdf_inverse_lambert(y: f64, l: f64, alpha: f64, tau: f64) -> f64 {
    let g = |s: f64| (s * l).exp() * (s * l - 1.0);
    let cy = y * (g(alpha) - g(tau)) + g(tau);
    let mut arg = cy / std::f64::consts::E;
    let branch = if l > 0.0 { WBranch::Principal } else { WBranch::Minus1 };
    let floor = -1.0 / std::f64::consts::E;
    if arg < floor && arg >= floor - 1e-12 {
        arg = floor;
    }
    if branch == WBranch::Minus1 && arg >= 0.0 && arg < 1e-12 {
        arg = -f64::MIN_POSITIVE;
    }
    match lambert_w(arg, branch) {
        Ok(w) => (w + 1.0) / l,
        Err(_) => f64::NAN,
    }
}

/// Constants of the asymptotic node and edge counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsityConstants {
    /// Node-growth constant `C`.
    #[serde(rename = "C")]
    pub c_nodes: f64,
    /// Edge-growth constant `W̄ = ∫ ψ(2w) ρ(w) dw`.
    pub w_bar: f64,
}

/// `C` and `W̄` for the rapidly varying regime `alpha = 1`, `tau = 0`.
pub fn sparsity_constants(params: &MggParams) -> Result<SparsityConstants> {
    params.validate()?;
    if params.alpha != 1.0 || params.tau != 0.0 {
        return Err(Error::domain("sparsity_constants requires alpha = 1 and tau = 0"));
    }
    if params.beta <= 0.0 {
        return Err(Error::domain("sparsity_constants requires beta > 0"));
    }
    let ec2 = (params.eta * params.c).powi(2);
    let lb = params.beta.ln();
    let c_nodes = if lb == 0.0 {
        ec2
    } else if lb.abs() < 1e-3 {
        ec2 * (1.0 - lb / 3.0 + lb * lb / 12.0)
    } else {
        2.0 * ec2 * (1.0 / params.beta - 1.0 + lb) / (lb * lb)
    };
    Ok(SparsityConstants { c_nodes, w_bar: w_bar(params)? })
}

/// `W̄ = η ∫_0^1 s c^s / Γ(1−s) J(s) ds`, `J(s) = ∫ ψ(2w) w^{−1−s} e^{−βw/c} dw`.
/// Below `w0` the integrand uses `ψ(2w) ≈ 2 m1 w − 2 m2 w²`.
fn w_bar(p: &MggParams) -> Result<f64> {
    let m1 = kappa_mgg(1, 0.0, p)?;
    let m2 = kappa_mgg(2, 0.0, p)?;
    let b = p.beta / p.c;
    let w0: f64 = 1e-7;
    let lw0 = w0.ln();
    let upper = (800.0 / b).ln().max(lw0 + 1.0);
    let lc = p.c.ln();
    let mut failure = None;
    let outer = |s: f64| {
        let inner = |u: f64| {
            let w = u.exp();
            psi_mgg_raw(2.0 * w, p) * (-s * u - b * w).exp()
        };
        let body = match quad::integrate(inner, lw0, upper, 1e-11, 0.0) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        };
        let one_minus = 1.0 - s;
        // (1−s) J(s), finite at s = 1.
        let scaled = 2.0 * m1 * (one_minus * lw0).exp()
            - one_minus * 2.0 * (m2 + m1 * b) * ((2.0 - s) * lw0).exp() / (2.0 - s)
            + one_minus * body;
        s * (s * lc - ln_gamma_pos(2.0 - s)).exp() * scaled
    };
    let v = quad::integrate(outer, 0.0, 1.0, 1e-10, 0.0)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(p.eta * v)
}
