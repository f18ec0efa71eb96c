//! Random variates: gamma and zero-truncated Poisson, exponentially tilted
//! stable laws, the size-biased construction of the weights, and the
//! finite-grid approximation of the total mass.

use crate::crm::{self, MggParams};
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// `log G` for `G ~ Gamma(shape, 1)`, by Marsaglia–Tsang squeeze with the
/// `U^{1/shape}` boost below shape one, kept in the log domain so that tiny
/// shapes cannot underflow.
pub fn ln_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let boost = open01(rng).ln() / shape;
        return ln_gamma_variate(shape + 1.0, rng) + boost;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = StandardNormal.sample(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = open01(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d.ln() + v.ln();
        }
    }
}

/// `Gamma(shape, rate)` variate.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0) || !(rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
        return Err(Error::domain(format!("gamma: shape {shape} and rate {rate} must be positive")));
    }
    Ok((ln_gamma_variate(shape, rng) - rate.ln()).exp())
}

/// Poisson conditioned to be at least one.
pub fn sample_truncated_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!("truncated Poisson: lambda must be positive, got {lambda}")));
    }
    Ok(truncated_poisson_raw(lambda, rng))
}

pub(crate) fn truncated_poisson_raw<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda < 30.0 {
        let u: f64 = rng.random();
        let mut p = lambda / lambda.exp_m1();
        let mut cum = p;
        let mut k = 1u64;
        while u > cum && k < 10_000 {
            k += 1;
            p *= lambda / k as f64;
            if p == 0.0 {
                break;
            }
            cum += p;
        }
        return k;
    }
    let pois = Poisson::new(lambda).expect("lambda validated");
    loop {
        let k: f64 = pois.sample(rng);
        if k >= 1.0 {
            return k as u64;
        }
    }
}

/// Positive variate with Laplace transform `exp(−((t + tilt)^s − tilt^s))`.
pub fn sample_tilted_stable<R: Rng + ?Sized>(s: f64, tilt: f64, rng: &mut R) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("tilted stable: s must lie in (0, 1), got {s}")));
    }
    if !(tilt >= 0.0) || !tilt.is_finite() {
        return Err(Error::domain(format!("tilted stable: tilt must be >= 0, got {tilt}")));
    }
    Ok(ln_scaled_tilted_stable(s, 0.0, tilt, rng).exp())
}

/// `log Y` where `Y` has Laplace transform `exp(−r((t + tilt)^s − tilt^s))`
/// and `ln_rate = log r`. `Y = r^{1/s} X` with `X` tilted by `r^{1/s} tilt`.
pub(crate) fn ln_scaled_tilted_stable<R: Rng + ?Sized>(s: f64, ln_rate: f64, tilt: f64, rng: &mut R) -> f64 {
    if s >= 1.0 - 1e-15 {
        return ln_rate;
    }
    let ln_tilt = tilt.ln();
    let ln_lam_x = ln_rate / s + ln_tilt;
    let ln_lam = ln_rate + s * ln_tilt;
    let ln_x = if tilt == 0.0 || ln_lam < 0.0 {
        loop {
            let ln_x = ln_kanter(s, rng);
            if tilt == 0.0 || open01(rng).ln() < -(ln_lam_x + ln_x).exp() {
                break ln_x;
            }
        }
    } else {
        ln_double_rejection(s, ln_lam.exp(), ln_lam_x, rng)
    };
    ln_rate / s + ln_x
}

/// `log` of Zolotarev's function `sin(su)^s sin((1−s)u)^{1−s} / sin(u)`.
fn ln_zolotarev(u: f64, s: f64) -> f64 {
    s * (s * u).sin().ln() + (1.0 - s) * ((1.0 - s) * u).sin().ln() - u.sin().ln()
}

/// Untilted positive stable variate (Laplace `exp(−t^s)`) in log form.
fn ln_kanter<R: Rng + ?Sized>(s: f64, rng: &mut R) -> f64 {
    let u = PI * open01(rng);
    let e: f64 = Exp1.sample(rng);
    ln_zolotarev(u, s) / s - (1.0 - s) / s * e.ln()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

fn bdb0(u: f64, s: f64) -> f64 {
    let r = 1.0 - s;
    sinc(u) / (sinc(s * u).powf(s) * sinc(r * u).powf(r))
}

/// Constants of the double-rejection envelope for `lam = λ^s`.
struct Envelope {
    s: f64,
    lam: f64,
    sgamma: f64,
    gamma: f64,
    c1: f64,
    xi: f64,
    ln_psi: f64,
    w1: f64,
    w2: f64,
    w3: f64,
}

impl Envelope {
    fn new(s: f64, lam: f64) -> Self {
        let gamma = lam * s * (1.0 - s);
        let sgamma = gamma.sqrt();
        let c1 = (PI / 2.0).sqrt();
        let c3 = (2.0 + c1) * sgamma;
        let xi = (1.0 + SQRT_2 * c3) / PI;
        let ln_psi = c3.ln() - gamma * PI * PI / 8.0 - 0.5 * PI.ln();
        let psi = ln_psi.exp();
        Envelope {
            s,
            lam,
            sgamma,
            gamma,
            c1,
            xi,
            ln_psi,
            w1: c1 * xi / sgamma,
            w2: 2.0 * PI.sqrt() * psi,
            w3: xi * PI,
        }
    }

    /// Returns `(z, log rho)` at `u`; the `U` stage accepts with probability
    /// `1/rho`. Computed in logs because the tilt factor and the mixture
    /// density can overflow and underflow together.
    fn ln_rho(&self, u: f64) -> (f64, f64) {
        let s = self.s;
        let zeta = bdb0(u, s).sqrt();
        let z = 1.0 / -(-(s * zeta / self.sgamma).ln_1p() / s).exp_m1();
        let mut terms = [f64::NEG_INFINITY; 3];
        if self.gamma >= 1.0 {
            terms[0] = self.xi.ln() - self.gamma * u * u / 2.0;
        }
        if u > 0.0 && u < PI {
            terms[1] = self.ln_psi - 0.5 * (PI - u).ln();
        }
        if self.gamma < 1.0 {
            terms[2] = self.xi.ln();
        }
        let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ln_d = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
        let ln_rho = PI.ln() - self.lam * (1.0 - 1.0 / (zeta * zeta))
            - ((1.0 + self.c1) * self.sgamma / zeta + z).ln()
            + ln_d;
        (z, ln_rho)
    }
}

/// Double-rejection sampler for the exponentially tilted stable law with
/// `λ^s = lam >= 1`; returns the log of the variate.
fn ln_double_rejection<R: Rng + ?Sized>(s: f64, lam: f64, ln_lam_x: f64, rng: &mut R) -> f64 {
    let env = Envelope::new(s, lam);
    let b = (1.0 - s) / s;
    loop {
        let (u, z, zz) = loop {
            let v: f64 = rng.random();
            let u = if env.gamma >= 1.0 {
                if v < env.w1 / (env.w1 + env.w2) {
                    let n: f64 = StandardNormal.sample(rng);
                    n.abs() / env.sgamma
                } else {
                    let w: f64 = rng.random();
                    PI * (1.0 - w * w)
                }
            } else {
                let w: f64 = rng.random();
                if v < env.w3 / (env.w3 + env.w2) {
                    PI * w
                } else {
                    PI * (1.0 - w * w)
                }
            };
            let w: f64 = rng.random();
            if !(u > 0.0 && u < PI) {
                continue;
            }
            let (z, ln_rho) = env.ln_rho(u);
            let ln_zz = w.ln() + ln_rho;
            if ln_zz <= 0.0 {
                break (u, z, ln_zz);
            }
        };
        let ln_a = ln_zolotarev(u, s) / (1.0 - s);
        let a = ln_a.exp();
        let m = ((b.ln() - ln_a) * s).exp() * lam;
        let delta = (m * s / a).sqrt();
        let a1 = delta * env.c1;
        let a3 = z / a;
        let total = a1 + delta + a3;
        let v: f64 = rng.random();
        let (x, correction) = if v < a1 / total {
            let n: f64 = StandardNormal.sample(rng);
            (m - delta * n.abs(), -n * n / 2.0)
        } else if v < (a1 + delta) / total {
            let w: f64 = rng.random();
            (m + delta * w, 0.0)
        } else {
            let e: f64 = Exp1.sample(rng);
            (m + delta + e * a3, -e)
        };
        if !(x > 0.0) {
            continue;
        }
        let ln_m = m.ln();
        let ln_x = x.ln();
        let c = a * (x - m) + (ln_lam_x - b * ln_m).exp() * (b * (ln_m - ln_x)).exp_m1() + correction;
        if c <= -zz {
            return -b * ln_x;
        }
    }
}

/// Approximate draw of the total mass `G(Θ)` on an `n_grid`-point index grid:
/// `c Σ_i Y_i` with `Y_i` tilted stable of index `s_i = τ + (α−τ)(i−1)/n`,
/// rate `η/n` and tilt `β`.
pub fn sample_total_mass<R: Rng + ?Sized>(params: &MggParams, n_grid: usize, rng: &mut R) -> Result<f64> {
    params.validate()?;
    if n_grid == 0 {
        return Err(Error::domain("total mass: n_grid must be >= 1"));
    }
    let n = n_grid as f64;
    let ln_rate = (params.eta / n).ln();
    let mut sum = 0.0;
    for i in 0..n_grid {
        let s = params.tau + (params.alpha - params.tau) * i as f64 / n;
        if s <= 0.0 {
            continue;
        }
        let ln_y = ln_scaled_tilted_stable(s, ln_rate, params.beta, rng);
        if ln_y > 700.0 {
            return Err(Error::numeric(format!("total mass: component overflow at s = {s}")));
        }
        sum += ln_y.exp();
    }
    let total = params.c * sum;
    if !total.is_finite() {
        return Err(Error::numeric("total mass is not finite"));
    }
    Ok(total)
}

/// One atom of a size-biased sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    /// Arrival time of the atom on the clock whose tilt is `e^{−clock·w}`.
    pub clock: f64,
    /// Local index of the atom.
    pub s: f64,
    /// Weight of the atom.
    pub w: f64,
}

/// A completely random measure whose atoms can be revealed in size-biased
/// order, with a sampler for the mass left after any clock time.
pub trait SizeBiasedCrm {
    /// Next atom in size-biased order.
    fn next_atom<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Atom>;
    /// Expected mass of the atoms arriving after `clock`.
    fn residual_mean(&self, clock: f64) -> Result<f64>;
    /// Draw of the mass of the atoms arriving after `clock`.
    fn sample_residual<R: Rng + ?Sized>(&self, clock: f64, rng: &mut R) -> Result<f64>;
}

/// Size-biased stream of mGG atoms: `T_j = ψ_mst^{-1}(ξ_j/η + ψ_mst(β)) − β`,
/// `S_j | T_j` from the local-index law at `z = T_j + β`, and
/// `W_j = c W'_j` with `W'_j ~ Gamma(1−S_j, T_j+β)`. The clock is `T_j / c`.
#[derive(Debug, Clone)]
pub struct MggStream {
    params: MggParams,
    xi: f64,
    psi_beta: f64,
    /// Grid used when the residual mass is drawn.
    pub residual_grid: usize,
}

impl MggStream {
    pub fn new(params: &MggParams) -> Result<Self> {
        params.validate()?;
        Ok(MggStream {
            params: *params,
            xi: 0.0,
            psi_beta: crm::psi_mst_raw(params.beta, params.alpha, params.tau),
            residual_grid: 1024,
        })
    }

    /// Next `(T_j, S_j, W_j)`.
    pub fn next_latent<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(f64, f64, f64)> {
        let p = &self.params;
        let e: f64 = Exp1.sample(rng);
        self.xi += e;
        let z = crm::psi_mst_inv_raw(self.xi / p.eta + self.psi_beta, p.alpha, p.tau)?;
        let t = z - p.beta;
        if !(t > 0.0) {
            return Err(Error::numeric(format!("size-biased arrival {t} is not positive")));
        }
        let u: f64 = rng.random();
        let lo = p.tau + 1e-12;
        let hi = p.alpha - 1e-12;
        let s = crm::s_cdf_inverse_raw(u, z, p.alpha, p.tau).clamp(lo, hi);
        let w = (p.c.ln() + ln_gamma_variate(1.0 - s, rng) - z.ln()).exp().max(f64::MIN_POSITIVE);
        Ok((t, s, w))
    }
}

impl SizeBiasedCrm for MggStream {
    fn next_atom<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Atom> {
        let (t, s, w) = self.next_latent(rng)?;
        Ok(Atom { clock: t / self.params.c, s, w })
    }

    fn residual_mean(&self, clock: f64) -> Result<f64> {
        crm::kappa_mgg(1, clock, &self.params)
    }

    fn sample_residual<R: Rng + ?Sized>(&self, clock: f64, rng: &mut R) -> Result<f64> {
        let p = &self.params;
        sample_total_mass(&p.with_beta(p.beta + p.c * clock), self.residual_grid, rng)
    }
}

/// Generalized gamma measure with Lévy intensity
/// `size / Γ(1−σ) w^{−1−σ} e^{−τw}` and Laplace exponent
/// `size ((t+τ)^σ − τ^σ)/σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GgParams {
    pub sigma: f64,
    pub tau: f64,
    pub size: f64,
}

impl GgParams {
    pub fn new(sigma: f64, tau: f64, size: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(Error::domain(format!("GG: sigma must lie in (0, 1), got {sigma}")));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::domain(format!("GG: tau must be positive, got {tau}")));
        }
        if !(size > 0.0) || !size.is_finite() {
            return Err(Error::domain(format!("GG: size must be positive, got {size}")));
        }
        Ok(GgParams { sigma, tau, size })
    }
}

/// Size-biased stream of generalized gamma atoms.
#[derive(Debug, Clone)]
pub struct GgStream {
    params: GgParams,
    xi: f64,
    tau_pow: f64,
}

impl GgStream {
    pub fn new(params: &GgParams) -> Result<Self> {
        let p = GgParams::new(params.sigma, params.tau, params.size)?;
        Ok(GgStream { params: p, xi: 0.0, tau_pow: p.tau.powf(p.sigma) })
    }
}

impl SizeBiasedCrm for GgStream {
    fn next_atom<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Atom> {
        let p = &self.params;
        let e: f64 = Exp1.sample(rng);
        self.xi += e;
        let y = p.sigma * self.xi / p.size + self.tau_pow;
        let z = y.powf(1.0 / p.sigma);
        let clock = z - p.tau;
        let w = (ln_gamma_variate(1.0 - p.sigma, rng) - z.ln()).exp().max(f64::MIN_POSITIVE);
        Ok(Atom { clock, s: p.sigma, w })
    }

    fn residual_mean(&self, clock: f64) -> Result<f64> {
        let p = &self.params;
        Ok(p.size * (p.tau + clock).powf(p.sigma - 1.0))
    }

    fn sample_residual<R: Rng + ?Sized>(&self, clock: f64, rng: &mut R) -> Result<f64> {
        let p = &self.params;
        let v = ln_scaled_tilted_stable(p.sigma, (p.size / p.sigma).ln(), p.tau + clock, rng).exp();
        if !v.is_finite() {
            return Err(Error::numeric("GG residual mass is not finite"));
        }
        Ok(v)
    }
}

/// Truncated size-biased draw of the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightDraw {
    /// `W_j`.
    pub weights: Vec<f64>,
    /// `T_j`, strictly increasing.
    pub latent_t: Vec<f64>,
    /// `S_j ∈ (τ, α)`.
    pub latent_s: Vec<f64>,
    /// Conditional mean of the mass beyond the truncation, `κ_mgg(1, T_n/c)`.
    pub residual_estimate: f64,
}

impl WeightDraw {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `Σ_j W_j` over the retained atoms.
    pub fn truncated_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Asymptotic residual `c η / log n` of the canonical `α = 1, τ = 0` case.
pub fn asymptotic_residual(params: &MggParams, n: usize) -> f64 {
    params.c * params.eta / (n as f64).ln()
}

/// First `n` atoms of the size-biased construction.
pub fn sample_size_biased<R: Rng + ?Sized>(params: &MggParams, n: usize, rng: &mut R) -> Result<WeightDraw> {
    params.validate()?;
    if n == 0 {
        return Err(Error::domain("size-biased sampling needs n >= 1"));
    }
    let mut stream = MggStream::new(params)?;
    let mut draw = WeightDraw {
        weights: Vec::with_capacity(n),
        latent_t: Vec::with_capacity(n),
        latent_s: Vec::with_capacity(n),
        residual_estimate: 0.0,
    };
    for _ in 0..n {
        let (t, s, w) = stream.next_latent(rng)?;
        draw.weights.push(w);
        draw.latent_t.push(t);
        draw.latent_s.push(s);
    }
    let last = *draw.latent_t.last().expect("n >= 1");
    draw.residual_estimate = crm::kappa_mgg(1, last / params.c, params)?;
    Ok(draw)
}

/// Mean of the zero-truncated Poisson, `λ/(1 − e^{−λ})`.
pub fn truncated_poisson_mean(lambda: f64) -> f64 {
    lambda / -(-lambda).exp_m1()
}

/// Log-density of `Gamma(shape, rate)` at `x`.
#[cfg(test)]
pub(crate) fn ln_gamma_density(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - crate::special::ln_gamma_pos(shape)
}
