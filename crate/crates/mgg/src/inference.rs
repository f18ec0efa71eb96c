//! Posterior inference for the mGG graph model with `α = 1`, `τ = 0`:
//! HMC on the log-weights and logit-indices, Metropolis–Hastings on
//! `(β, c, η, w_*)`, and Gibbs updates of the latent multigraph counts.

use crate::crm::{self, MggParams};
use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::rng::{self, streams};
use crate::samplers::{self, truncated_poisson_raw};
use crate::special::UnitGammaTable;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Bounds keeping `s = sigmoid(z)` strictly inside `(0, 1)`.
const S_MIN: f64 = 1e-12;
const Z_MAX: f64 = 27.631021115928547;

/// Parameters `φ = (β, c, η)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub beta: f64,
    pub c: f64,
    pub eta: f64,
}

impl Hyperparams {
    pub fn new(beta: f64, c: f64, eta: f64) -> Result<Self> {
        let h = Hyperparams { beta, c, eta };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("beta", self.beta), ("c", self.c), ("eta", self.eta)] {
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::domain(format!("{name} must be positive and finite, got {x}")));
            }
        }
        Ok(())
    }

    /// mGG parameters with the fixed `α = 1`, `τ = 0`.
    pub fn params(&self) -> MggParams {
        MggParams { alpha: 1.0, tau: 0.0, beta: self.beta, c: self.c, eta: self.eta }
    }
}

/// `ψ¹_φ(t)`, the Laplace exponent at `η = 1`.
fn psi_unit(t: f64, beta: f64, c: f64) -> f64 {
    let p = MggParams { alpha: 1.0, tau: 0.0, beta, c, eta: 1.0 };
    crm::psi_mgg_raw(t, &p)
}

/// Unknowns of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    /// Log weights `v = log w`; weights far below `f64::MIN_POSITIVE` occur
    /// for low-degree nodes with `s` near 1.
    pub v: Vec<f64>,
    pub s: Vec<f64>,
    pub w_star: f64,
    /// `q̃` on the observed edges, aligned with `graph.edges`.
    pub q_tilde: Vec<u32>,
    /// `m_i = Σ_{j≠i} q̃_ij + 2 q̃_ii`.
    pub m: Vec<u64>,
}

impl LatentState {
    pub fn validate(&self, graph: &SparseGraph) -> Result<()> {
        let n = graph.num_nodes;
        if self.v.len() != n || self.s.len() != n || self.m.len() != n || self.q_tilde.len() != graph.edges.len() {
            return Err(Error::domain("state dimensions do not match the graph"));
        }
        if self.v.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("log weights must be finite"));
        }
        if self.s.iter().any(|&s| !(s > 0.0 && s < 1.0)) {
            return Err(Error::domain("indices must lie in (0, 1)"));
        }
        if !(self.w_star >= 0.0) || !self.w_star.is_finite() {
            return Err(Error::domain("w_star must be non-negative and finite"));
        }
        if self.q_tilde.iter().any(|&q| q == 0) || multigraph_degrees(graph, &self.q_tilde) != self.m {
            return Err(Error::domain("latent counts must be positive and match m"));
        }
        Ok(())
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.v[i].exp()
    }

    pub fn w_sum(&self) -> f64 {
        self.v.iter().map(|v| v.exp()).sum()
    }
}

/// `m_i` from counts aligned with the edges; the diagonal enters twice.
pub fn multigraph_degrees(graph: &SparseGraph, q: &[u32]) -> Vec<u64> {
    let mut m = vec![0u64; graph.num_nodes];
    for (&(i, j), &c) in graph.edges.iter().zip(q) {
        m[i as usize] += c as u64;
        m[j as usize] += c as u64;
    }
    m
}

/// Priors on `β` and `c`; `η` always has `p(η) ∝ 1/η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Prior {
    /// `p(β) ∝ 1/β`, `p(c) ∝ 1/c`.
    Improper,
    /// `β ~ Gamma(a_beta, b_beta)`, `c ~ Gamma(a_c, b_c)`.
    Gamma { a_beta: f64, b_beta: f64, a_c: f64, b_c: f64 },
}

/// Sampler settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub n_iters: usize,
    pub burn_in: usize,
    pub thin_to: usize,
    pub leapfrog_steps: usize,
    pub eps_w: f64,
    pub eps_s: f64,
    pub sigma_log_beta: f64,
    pub sigma_log_c: f64,
    pub sigma_log_eta: f64,
    pub latent_count_period: usize,
    /// `η` takes the log-normal walk when `iter % period == period − 1` and
    /// the gamma proposal otherwise.
    pub eta_lognormal_period: usize,
    pub adapt_gain: f64,
    pub target_rate: f64,
    /// Step sizes adapt on iterations `< adapt_until`; `None` means half of
    /// `n_iters`.
    pub adapt_until: Option<usize>,
    pub prior: Prior,
    pub mass_proposal_grid: usize,
    /// Standard deviation of the per-chain log-scale jitter of the start.
    pub init_jitter: f64,
    /// Nodes of highest and lowest degree whose draws are stored.
    pub tracked_per_side: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            n_iters: 10_000,
            burn_in: 5_000,
            thin_to: 1_000,
            leapfrog_steps: 5,
            eps_w: 0.01,
            eps_s: 0.01,
            sigma_log_beta: 0.01,
            sigma_log_c: 0.01,
            sigma_log_eta: 0.02,
            latent_count_period: 30,
            eta_lognormal_period: 2,
            adapt_gain: 0.005,
            target_rate: 0.65,
            adapt_until: None,
            prior: Prior::Improper,
            mass_proposal_grid: 256,
            init_jitter: 0.1,
            tracked_per_side: 50,
        }
    }
}

impl McmcConfig {
    pub fn adapt_until(&self) -> usize {
        self.adapt_until.unwrap_or(self.n_iters / 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iters > 0 && self.burn_in >= self.n_iters {
            return Err(Error::domain("burn_in must be smaller than n_iters"));
        }
        if self.thin_to == 0 || self.leapfrog_steps == 0 || self.latent_count_period == 0 || self.eta_lognormal_period == 0 {
            return Err(Error::domain("thin_to, leapfrog_steps and the update periods must be positive"));
        }
        for (name, x) in [
            ("eps_w", self.eps_w),
            ("eps_s", self.eps_s),
            ("sigma_log_beta", self.sigma_log_beta),
            ("sigma_log_c", self.sigma_log_c),
            ("sigma_log_eta", self.sigma_log_eta),
        ] {
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::domain(format!("{name} must be positive, got {x}")));
            }
        }
        if self.mass_proposal_grid == 0 {
            return Err(Error::domain("mass_proposal_grid must be positive"));
        }
        if let Prior::Gamma { a_beta, b_beta, a_c, b_c } = self.prior {
            if [a_beta, b_beta, a_c, b_c].iter().any(|&x| !(x >= 0.0)) {
                return Err(Error::domain("gamma prior parameters must be non-negative"));
            }
        }
        Ok(())
    }
}

fn check_inputs(v: &[f64], z: &[f64], w_star: f64, hyper: &Hyperparams, m: &[u64]) -> Result<()> {
    if v.len() != z.len() || v.len() != m.len() {
        return Err(Error::domain("v, z and m must have equal lengths"));
    }
    hyper.validate()?;
    if v.iter().chain(z).any(|x| !x.is_finite()) || !w_star.is_finite() || w_star < 0.0 {
        return Err(Error::domain("log-posterior inputs must be finite"));
    }
    Ok(())
}

/// `s = sigmoid(z)` with `ln s`, `ln(1 − s)`, guarded away from 0 and 1.
fn logistic(z: f64) -> (f64, f64, f64) {
    let z = z.clamp(-Z_MAX, Z_MAX);
    let ln_s = -softplus(-z);
    let ln_1ms = ln_s - z;
    (ln_s.exp().clamp(S_MIN, 1.0 - S_MIN), ln_s, ln_1ms)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn logit(s: f64) -> f64 {
    let s = s.clamp(S_MIN, 1.0 - S_MIN);
    (s / (1.0 - s)).ln()
}

/// `g(v, z)`, the log conditional density of `(log w, logit s)` given `m`,
/// `φ` and `w_*`, up to a constant.
pub fn log_posterior(v: &[f64], z: &[f64], w_star: f64, hyper: &Hyperparams, m: &[u64]) -> Result<f64> {
    check_inputs(v, z, w_star, hyper, m)?;
    let ln_c = hyper.c.ln();
    let sw: f64 = v.iter().map(|x| x.exp()).sum();
    let mut g = -(sw + w_star).powi(2) - sw * hyper.beta / hyper.c;
    let table = UnitGammaTable::get();
    for i in 0..v.len() {
        let (s, ln_s, ln_1ms) = logistic(z[i]);
        let lg = table.ln_gamma(2.0 - s);
        g += (m[i] as f64 - s) * v[i] + 2.0 * ln_s + 2.0 * ln_1ms - lg + s * ln_c;
    }
    if !g.is_finite() {
        return Err(Error::numeric("log posterior is not finite"));
    }
    Ok(g)
}

/// `(∂g/∂v, ∂g/∂z)`.
pub fn grad_log_posterior(
    v: &[f64],
    z: &[f64],
    w_star: f64,
    hyper: &Hyperparams,
    m: &[u64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_inputs(v, z, w_star, hyper, m)?;
    let w: Vec<f64> = v.iter().map(|x| x.exp()).collect();
    let s: Vec<f64> = z.iter().map(|&x| logistic(x).0).collect();
    let mut dv = vec![0.0; v.len()];
    let mut dz = vec![0.0; v.len()];
    grad_v(&w, &s, w_star, hyper, m, &mut dv);
    grad_z(v, &s, hyper.c.ln(), &mut dz);
    Ok((dv, dz))
}

fn grad_v(w: &[f64], s: &[f64], w_star: f64, hyper: &Hyperparams, m: &[u64], out: &mut [f64]) {
    let k = 2.0 * (w.iter().sum::<f64>() + w_star) + hyper.beta / hyper.c;
    for i in 0..w.len() {
        out[i] = m[i] as f64 - s[i] - w[i] * k;
    }
}

fn grad_z(v: &[f64], s: &[f64], ln_c: f64, out: &mut [f64]) {
    let table = UnitGammaTable::get();
    for i in 0..v.len() {
        let dg = table.digamma(2.0 - s[i]);
        out[i] = s[i] * (1.0 - s[i]) * (dg - v[i] + ln_c) + 2.0 - 4.0 * s[i];
    }
}

/// Which half of the HMC step is moved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Weights,
    Indices,
}

/// Fixed inputs of one HMC block.
struct BlockTarget<'a> {
    block: Block,
    /// `v` when moving the indices, `s` when moving the weights.
    other: &'a [f64],
    w_star: f64,
    hyper: &'a Hyperparams,
    m: &'a [u64],
}

impl BlockTarget<'_> {
    /// Block-dependent part of `g` at position `x`.
    fn energy(&self, x: &[f64]) -> f64 {
        match self.block {
            Block::Weights => {
                let s = self.other;
                let sw: f64 = x.iter().map(|v| v.exp()).sum();
                let lin: f64 = x.iter().zip(s).zip(self.m).map(|((v, s), &m)| (m as f64 - s) * v).sum();
                -(sw + self.w_star).powi(2) - sw * self.hyper.beta / self.hyper.c + lin
            }
            Block::Indices => {
                let v = self.other;
                let ln_c = self.hyper.c.ln();
                let mut g = 0.0;
                let table = UnitGammaTable::get();
                for i in 0..x.len() {
                    let (s, ln_s, ln_1ms) = logistic(x[i]);
                    let lg = table.ln_gamma(2.0 - s);
                    g += -s * v[i] + 2.0 * ln_s + 2.0 * ln_1ms - lg + s * ln_c;
                }
                g
            }
        }
    }

    fn gradient(&self, x: &[f64], scratch: &mut Vec<f64>, out: &mut [f64]) {
        scratch.clear();
        match self.block {
            Block::Weights => {
                scratch.extend(x.iter().map(|v| v.exp()));
                grad_v(scratch, self.other, self.w_star, self.hyper, self.m, out);
            }
            Block::Indices => {
                scratch.extend(x.iter().map(|&z| 1.0 / (1.0 + (-z.clamp(-Z_MAX, Z_MAX)).exp())));
                grad_z(self.other, scratch, self.hyper.c.ln(), out);
            }
        }
    }
}

/// `L` leapfrog steps of size `eps` from `(x, p)` for one block, in place.
/// Returns `false` if any coordinate became non-finite.
#[allow(clippy::too_many_arguments)]
pub fn leapfrog(
    block: Block,
    x: &mut [f64],
    p: &mut [f64],
    other: &[f64],
    w_star: f64,
    hyper: &Hyperparams,
    m: &[u64],
    eps: f64,
    steps: usize,
) -> bool {
    let t = BlockTarget { block, other, w_star, hyper, m };
    let mut grad = vec![0.0; x.len()];
    let mut scratch = Vec::with_capacity(x.len());
    leapfrog_inner(&t, x, p, eps, steps, &mut grad, &mut scratch)
}

fn leapfrog_inner(
    t: &BlockTarget,
    x: &mut [f64],
    p: &mut [f64],
    eps: f64,
    steps: usize,
    grad: &mut [f64],
    scratch: &mut Vec<f64>,
) -> bool {
    t.gradient(x, scratch, grad);
    for (pi, gi) in p.iter_mut().zip(grad.iter()) {
        *pi += 0.5 * eps * gi;
    }
    for step in 0..steps {
        for (xi, pi) in x.iter_mut().zip(p.iter()) {
            *xi += eps * pi;
        }
        if x.iter().any(|v| !v.is_finite() || (t.block == Block::Weights && *v > 700.0)) {
            return false;
        }
        t.gradient(x, scratch, grad);
        let h = if step + 1 == steps { 0.5 * eps } else { eps };
        for (pi, gi) in p.iter_mut().zip(grad.iter()) {
            *pi += h * gi;
        }
    }
    p.iter().all(|v| v.is_finite())
}

/// Outcome of an MCMC move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveResult {
    pub accepted: bool,
    /// `min(1, r)`, zero for failed proposals.
    pub accept_prob: f64,
}

/// One HMC update of a block with standard-normal momenta; the state is
/// unchanged on rejection.
pub fn hmc_update<R: Rng + ?Sized>(
    block: Block,
    state: &mut LatentState,
    hyper: &Hyperparams,
    eps: f64,
    steps: usize,
    rng: &mut R,
) -> Result<MoveResult> {
    let mut ws = Workspace::default();
    hmc_update_ws(block, state, hyper, eps, steps, rng, &mut ws)
}

#[derive(Default)]
struct Workspace {
    x: Vec<f64>,
    p: Vec<f64>,
    other: Vec<f64>,
    grad: Vec<f64>,
    scratch: Vec<f64>,
}

fn hmc_update_ws<R: Rng + ?Sized>(
    block: Block,
    state: &mut LatentState,
    hyper: &Hyperparams,
    eps: f64,
    steps: usize,
    rng: &mut R,
    ws: &mut Workspace,
) -> Result<MoveResult> {
    let n = state.v.len();
    ws.x.clear();
    ws.other.clear();
    match block {
        Block::Weights => {
            ws.x.extend_from_slice(&state.v);
            ws.other.extend_from_slice(&state.s);
        }
        Block::Indices => {
            ws.x.extend(state.s.iter().map(|&s| logit(s)));
            ws.other.extend_from_slice(&state.v);
        }
    }
    ws.p.clear();
    ws.p.extend((0..n).map(|_| -> f64 { StandardNormal.sample(rng) }));
    ws.grad.resize(n, 0.0);
    let t = BlockTarget { block, other: &ws.other, w_star: state.w_star, hyper, m: &state.m };
    let g0 = t.energy(&ws.x);
    let k0: f64 = 0.5 * ws.p.iter().map(|p| p * p).sum::<f64>();
    let ok = leapfrog_inner(&t, &mut ws.x, &mut ws.p, eps, steps, &mut ws.grad, &mut ws.scratch);
    let mut log_r = f64::NEG_INFINITY;
    if ok {
        let g1 = t.energy(&ws.x);
        let k1: f64 = 0.5 * ws.p.iter().map(|p| p * p).sum::<f64>();
        let l = g1 - g0 - (k1 - k0);
        if l.is_finite() {
            log_r = l;
        }
    }
    if !g0.is_finite() {
        return Err(Error::numeric("HMC: current state has non-finite density"));
    }
    let accept_prob = log_r.min(0.0).exp();
    let accepted = log_r > f64::NEG_INFINITY && (log_r >= 0.0 || rng.random::<f64>().ln() < log_r);
    if accepted {
        match block {
            Block::Weights => {
                state.v.copy_from_slice(&ws.x);
            }
            Block::Indices => {
                for (s, &x) in state.s.iter_mut().zip(&ws.x) {
                    *s = logistic(x).0;
                }
            }
        }
    }
    Ok(MoveResult { accepted, accept_prob })
}

/// Which proposal moved `η`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaProposal {
    /// `η̃ ~ Gamma(N, ψ¹_φ̃(2Σw + 2w_*))`.
    Gamma,
    /// `log η̃ ~ N(log η, σ_η²)`.
    LogNormal,
}

/// Sufficient statistics of `(w, s)` for the hyperparameter move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSums {
    pub n: usize,
    pub w_sum: f64,
    pub s_sum: f64,
}

impl NodeSums {
    pub fn of(state: &LatentState) -> Self {
        NodeSums { n: state.v.len(), w_sum: state.w_sum(), s_sum: state.s.iter().sum() }
    }
}

/// `log r` for moving `(φ, w_*)` to `(φ̃, w̃_*)`, including the reverse
/// proposal of `η` and the tilted proposal of `w_*`.
pub fn log_hyper_ratio(
    sums: &NodeSums,
    cur: &Hyperparams,
    w_star: f64,
    prop: &Hyperparams,
    w_star_prop: f64,
    kind: EtaProposal,
    prior: &Prior,
) -> f64 {
    let sw = sums.w_sum;
    let n = sums.n as f64;
    let mut l = -(sw + w_star_prop).powi(2) + (sw + w_star).powi(2);
    l -= (2.0 * w_star - 2.0 * w_star_prop) * sw;
    l += sums.s_sum * (prop.c / cur.c).ln();
    l -= (prop.beta / prop.c - cur.beta / cur.c) * sw;
    if let Prior::Gamma { a_beta, b_beta, a_c, b_c } = *prior {
        l += a_beta * (prop.beta / cur.beta).ln() - b_beta * (prop.beta - cur.beta);
        l += a_c * (prop.c / cur.c).ln() - b_c * (prop.c - cur.c);
    }
    let fwd = psi_unit(2.0 * sw + 2.0 * w_star, prop.beta, prop.c);
    let rev = psi_unit(2.0 * sw + 2.0 * w_star_prop, cur.beta, cur.c);
    l += match kind {
        EtaProposal::Gamma => n * (rev.ln() - fwd.ln()),
        EtaProposal::LogNormal => n * (prop.eta / cur.eta).ln() - prop.eta * fwd + cur.eta * rev,
    };
    if l.is_nan() {
        f64::NEG_INFINITY
    } else {
        l
    }
}

/// Outcome of a hyperparameter move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperMove {
    pub hyper: Hyperparams,
    pub w_star: f64,
    pub accepted: bool,
    pub log_ratio: f64,
}

/// Joint MH move of `(β, c, η, w_*)`: log-normal walks on `β` and `c`, the
/// gamma or log-normal proposal for `η` by iteration parity, and `w̃_*` from
/// the total-mass law at `β̃ + 2c̃(Σw + w_*)`.
pub fn mh_update_hyper<R: Rng + ?Sized>(
    state: &LatentState,
    hyper: &Hyperparams,
    config: &McmcConfig,
    iter: usize,
    rng: &mut R,
) -> Result<HyperMove> {
    let sums = NodeSums::of(state);
    let reject = |l: f64| HyperMove { hyper: *hyper, w_star: state.w_star, accepted: false, log_ratio: l };
    let nb: f64 = StandardNormal.sample(rng);
    let nc: f64 = StandardNormal.sample(rng);
    let beta = hyper.beta * (config.sigma_log_beta * nb).exp();
    let c = hyper.c * (config.sigma_log_c * nc).exp();
    let t = 2.0 * (sums.w_sum + state.w_star);
    let kind = if iter % config.eta_lognormal_period == config.eta_lognormal_period - 1 {
        EtaProposal::LogNormal
    } else {
        EtaProposal::Gamma
    };
    let eta = match kind {
        EtaProposal::Gamma => {
            let rate = psi_unit(t, beta, c);
            if !(rate > 0.0) || !rate.is_finite() || sums.n == 0 {
                return Ok(reject(f64::NEG_INFINITY));
            }
            (samplers::ln_gamma_variate(sums.n as f64, rng) - rate.ln()).exp()
        }
        EtaProposal::LogNormal => {
            let ne: f64 = StandardNormal.sample(rng);
            hyper.eta * (config.sigma_log_eta * ne).exp()
        }
    };
    let prop = Hyperparams { beta, c, eta };
    if prop.validate().is_err() {
        return Ok(reject(f64::NEG_INFINITY));
    }
    let tilted = MggParams { alpha: 1.0, tau: 0.0, beta: beta + c * t, c, eta };
    let w_star_prop = match samplers::sample_total_mass(&tilted, config.mass_proposal_grid, rng) {
        Ok(x) if x.is_finite() => x,
        _ => return Ok(reject(f64::NEG_INFINITY)),
    };
    let l = log_hyper_ratio(&sums, hyper, state.w_star, &prop, w_star_prop, kind, &config.prior);
    let accepted = l >= 0.0 || rng.random::<f64>().ln() < l;
    if accepted {
        Ok(HyperMove { hyper: prop, w_star: w_star_prop, accepted, log_ratio: l })
    } else {
        Ok(reject(l))
    }
}

/// Draws `q̃_ij ~ tPoisson(2 w_i w_j)` and `q̃_ii ~ tPoisson(w_i²)` on the
/// observed edges and recomputes `m`.
pub fn gibbs_update_latent_counts<R: Rng + ?Sized>(state: &mut LatentState, graph: &SparseGraph, rng: &mut R) -> Result<()> {
    if state.v.len() != graph.num_nodes {
        return Err(Error::domain("state does not match the graph"));
    }
    state.q_tilde.resize(graph.edges.len(), 1);
    for (k, &(i, j)) in graph.edges.iter().enumerate() {
        let (vi, vj) = (state.v[i as usize], state.v[j as usize]);
        let lambda = if i == j { (2.0 * vi).exp() } else { (vi + vj + std::f64::consts::LN_2).exp() };
        state.q_tilde[k] = if lambda > 0.0 && lambda.is_finite() {
            truncated_poisson_raw(lambda, rng).min(u32::MAX as u64) as u32
        } else {
            1
        };
    }
    state.m = multigraph_degrees(graph, &state.q_tilde);
    Ok(())
}

/// Starting point: `w_i = deg_i/√(2E)`, `s_i = ½`, `β = c = 1`, `η = N/2`,
/// `w_*` the mean weight, each scaled by `exp(jitter·N(0,1))`.
pub fn initial_state<R: Rng + ?Sized>(
    graph: &SparseGraph,
    jitter: f64,
    rng: &mut R,
) -> Result<(LatentState, Hyperparams)> {
    if graph.num_nodes == 0 || graph.edges.is_empty() {
        return Err(Error::domain("inference needs a non-empty graph"));
    }
    let jit = |rng: &mut R| -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        (jitter * z).exp()
    };
    let scale = (2.0 * graph.num_edges() as f64).sqrt();
    let deg = graph.degrees();
    let w: Vec<f64> = deg.iter().map(|&d| d as f64 / scale * jit(rng)).collect();
    let w_star = w.iter().sum::<f64>() / w.len() as f64 * jit(rng);
    let v = w.iter().map(|w| w.ln()).collect();
    let hyper = Hyperparams::new(jit(rng), jit(rng), graph.num_nodes as f64 / 2.0 * jit(rng))?;
    let mut state = LatentState {
        s: vec![0.5; graph.num_nodes],
        v,
        w_star,
        q_tilde: vec![1; graph.edges.len()],
        m: Vec::new(),
    };
    gibbs_update_latent_counts(&mut state, graph, rng)?;
    Ok((state, hyper))
}

/// One retained draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub iter: usize,
    pub beta: f64,
    pub c: f64,
    pub eta: f64,
    pub w_sum: f64,
    pub w_star: f64,
}

/// Per-block acceptance rates after adaptation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub w: f64,
    pub s: f64,
    pub hyper: f64,
}

/// Running mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    pub n: usize,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Unbiased variance.
    pub fn variance(&self) -> f64 {
        if self.n > 1 {
            self.m2 / (self.n - 1) as f64
        } else {
            0.0
        }
    }
}

/// Result of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub seed: u64,
    pub chain: u64,
    pub config: McmcConfig,
    pub samples: Vec<Sample>,
    /// Nodes whose draws are stored in `tracked_w` and `tracked_s`.
    pub tracked_nodes: Vec<usize>,
    /// One row per sample, one column per tracked node.
    pub tracked_w: Vec<Vec<f64>>,
    pub tracked_s: Vec<Vec<f64>>,
    /// Per-node moments over the retained samples.
    pub node_w: Vec<Welford>,
    pub node_s: Vec<Welford>,
    pub acceptance_rates: AcceptanceRates,
    pub final_eps_w: f64,
    pub final_eps_s: f64,
    pub final_hyper: Hyperparams,
    pub final_state: LatentState,
    /// Iteration and message of a numeric failure that ended the chain.
    pub aborted: Option<(usize, String)>,
}

/// Iterations whose state is retained: `thin_to` evenly spaced after burn-in.
pub fn retained_iterations(config: &McmcConfig) -> Vec<usize> {
    let kept = config.n_iters.saturating_sub(config.burn_in);
    let k = config.thin_to.min(kept);
    (0..k).map(|j| config.burn_in + ((j + 1) * kept) / k - 1).collect()
}

fn tracked_nodes(graph: &SparseGraph, per_side: usize) -> Vec<usize> {
    let deg = graph.degrees();
    let mut order: Vec<usize> = (0..graph.num_nodes).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(deg[i]), i));
    let mut out: Vec<usize> = order.iter().take(per_side).copied().collect();
    for &i in order.iter().rev().take(per_side) {
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

/// Runs one chain on stream `CHAIN_BASE + chain` of `seed`.
pub fn run_chain(graph: &SparseGraph, config: &McmcConfig, seed: u64, chain: u64) -> Result<ChainOutput> {
    config.validate()?;
    graph.validate()?;
    let mut rng = rng::stream(seed, streams::CHAIN_BASE + chain);
    let (state, hyper) = initial_state(graph, config.init_jitter, &mut rng)?;
    run_from(graph, config, seed, chain, state, hyper, &mut rng)
}

/// Runs one chain from a given state, for restarts and checks started at
/// known values. Latent counts are refreshed before the first iteration.
pub fn run_chain_from(
    graph: &SparseGraph,
    config: &McmcConfig,
    seed: u64,
    chain: u64,
    mut state: LatentState,
    hyper: Hyperparams,
) -> Result<ChainOutput> {
    config.validate()?;
    graph.validate()?;
    let n = graph.num_nodes;
    if state.v.len() != n || state.s.len() != n {
        return Err(Error::domain(format!("initial state has {} weights for {} nodes", state.v.len(), n)));
    }
    if state.q_tilde.len() != graph.edges.len() {
        state.q_tilde = vec![1; graph.edges.len()];
    }
    let mut rng = rng::stream(seed, streams::CHAIN_BASE + chain);
    gibbs_update_latent_counts(&mut state, graph, &mut rng)?;
    run_from(graph, config, seed, chain, state, hyper, &mut rng)
}

fn run_from<R: Rng + ?Sized>(
    graph: &SparseGraph,
    config: &McmcConfig,
    seed: u64,
    chain: u64,
    mut state: LatentState,
    mut hyper: Hyperparams,
    rng: &mut R,
) -> Result<ChainOutput> {
    let tracked = tracked_nodes(graph, config.tracked_per_side);
    let mut out = ChainOutput {
        seed,
        chain,
        config: config.clone(),
        samples: Vec::new(),
        tracked_nodes: tracked.clone(),
        tracked_w: Vec::new(),
        tracked_s: Vec::new(),
        node_w: vec![Welford::default(); graph.num_nodes],
        node_s: vec![Welford::default(); graph.num_nodes],
        acceptance_rates: AcceptanceRates::default(),
        final_eps_w: config.eps_w,
        final_eps_s: config.eps_s,
        final_hyper: hyper,
        final_state: state.clone(),
        aborted: None,
    };
    let record = |out: &mut ChainOutput, it: usize, state: &LatentState, hyper: &Hyperparams| {
        out.samples.push(Sample {
            iter: it,
            beta: hyper.beta,
            c: hyper.c,
            eta: hyper.eta,
            w_sum: state.w_sum(),
            w_star: state.w_star,
        });
        out.tracked_w.push(tracked.iter().map(|&i| state.weight(i)).collect());
        out.tracked_s.push(tracked.iter().map(|&i| state.s[i]).collect());
        for i in 0..state.v.len() {
            out.node_w[i].push(state.weight(i));
            out.node_s[i].push(state.s[i]);
        }
    };
    if config.n_iters == 0 {
        record(&mut out, 0, &state, &hyper);
        return Ok(out);
    }
    let keep = retained_iterations(config);
    let mut next_keep = 0;
    let adapt_until = config.adapt_until();
    let (mut eps_w, mut eps_s) = (config.eps_w, config.eps_s);
    let (mut acc_w, mut acc_s, mut acc_h, mut counted) = (0usize, 0usize, 0usize, 0usize);
    let mut ws = Workspace::default();
    for it in 0..config.n_iters {
        let step = (|| -> Result<()> {
            let mw = hmc_update_ws(Block::Weights, &mut state, &hyper, eps_w, config.leapfrog_steps, rng, &mut ws)?;
            let ms = hmc_update_ws(Block::Indices, &mut state, &hyper, eps_s, config.leapfrog_steps, rng, &mut ws)?;
            let mh = mh_update_hyper(&state, &hyper, config, it, rng)?;
            hyper = mh.hyper;
            state.w_star = mh.w_star;
            if it % config.latent_count_period == 0 {
                gibbs_update_latent_counts(&mut state, graph, rng)?;
            }
            if it < adapt_until {
                eps_w *= (config.adapt_gain * (mw.accept_prob - config.target_rate)).exp();
                eps_s *= (config.adapt_gain * (ms.accept_prob - config.target_rate)).exp();
            }
            if it >= adapt_until || adapt_until >= config.n_iters {
                counted += 1;
                acc_w += mw.accepted as usize;
                acc_s += ms.accepted as usize;
                acc_h += mh.accepted as usize;
            }
            Ok(())
        })();
        if let Err(e) = step {
            if matches!(e, Error::Numeric(_)) {
                out.aborted = Some((it, e.to_string()));
                break;
            }
            return Err(e);
        }
        while next_keep < keep.len() && keep[next_keep] == it {
            record(&mut out, it, &state, &hyper);
            next_keep += 1;
        }
    }
    if counted > 0 {
        let c = counted as f64;
        out.acceptance_rates = AcceptanceRates { w: acc_w as f64 / c, s: acc_s as f64 / c, hyper: acc_h as f64 / c };
    }
    out.final_eps_w = eps_w;
    out.final_eps_s = eps_s;
    out.final_hyper = hyper;
    out.final_state = state;
    Ok(out)
}
