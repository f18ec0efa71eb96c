//! Gelman–Rubin diagnostics, credible intervals and posterior-predictive
//! graph simulation.

use crate::error::{Error, Result};
use crate::graph::{self, graph_stats};
use crate::inference::{ChainOutput, Hyperparams};
use crate::rng::{self, streams};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Potential scale reduction factor
/// `R̂ = sqrt(((n−1)/n W + B/n) / W)`. With `split`, each chain is cut into
/// halves first.
pub fn gelman_rubin(chains: &[Vec<f64>], split: bool) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::domain("Gelman–Rubin needs at least two chains"));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) || n < 10 {
        return Err(Error::domain("chains must have equal lengths of at least 10"));
    }
    if chains.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::domain("chains contain non-finite values"));
    }
    let parts: Vec<&[f64]> = if split {
        let h = n / 2;
        chains.iter().flat_map(|c| [&c[..h], &c[n - h..]]).collect()
    } else {
        chains.iter().map(|c| c.as_slice()).collect()
    };
    let means: Vec<f64> = parts.iter().map(|c| mean(c)).collect();
    let vars: Vec<f64> = parts.iter().map(|c| sample_var(c)).collect();
    gelman_rubin_from_moments(&means, &vars, parts[0].len())
}

/// `R̂` from per-chain means and unbiased variances of `n` draws each.
pub fn gelman_rubin_from_moments(means: &[f64], vars: &[f64], n: usize) -> Result<f64> {
    if means.len() < 2 || means.len() != vars.len() || n < 2 {
        return Err(Error::domain("need at least two chains of at least two draws"));
    }
    let w = mean(vars);
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::numeric("chains have zero within-chain variance"));
    }
    let nf = n as f64;
    let b = nf * sample_var(means);
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    Ok((var_plus / w).sqrt())
}

/// `R_multi = sqrt((n−1)/n + GM(X)/n)` with `X_i = n R_i² − n + 1` clamped
/// to at least `1e−12` and the geometric mean taken in logs.
pub fn gelman_rubin_multivariate(per_param_r: &[f64], n: usize) -> Result<f64> {
    if per_param_r.is_empty() {
        return Err(Error::domain("no parameters given"));
    }
    if n == 0 || per_param_r.iter().any(|r| !r.is_finite()) {
        return Err(Error::domain("n must be positive and every R finite"));
    }
    let nf = n as f64;
    let ln_gm = per_param_r.iter().map(|r| (nf * r * r - nf + 1.0).max(1e-12).ln()).sum::<f64>()
        / per_param_r.len() as f64;
    Ok(((nf - 1.0) / nf + ln_gm.exp() / nf).sqrt())
}

/// Type-7 empirical quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Equal-tailed interval at `level` from at least 20 draws.
pub fn credible_interval(draws: &[f64], level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("level must lie in (0, 1), got {level}")));
    }
    if draws.len() < 20 {
        return Err(Error::domain(format!("credible intervals need at least 20 draws, got {}", draws.len())));
    }
    let mut s = draws.to_vec();
    if s.iter().any(|x| x.is_nan()) {
        return Err(Error::domain("draws contain NaN"));
    }
    s.sort_by(f64::total_cmp);
    let a = 0.5 * (1.0 - level);
    Ok((quantile_sorted(&s, a), quantile_sorted(&s, 1.0 - a)))
}

/// Per-row intervals of a `nodes × draws` matrix.
pub fn credible_intervals(samples: &[Vec<f64>], level: f64) -> Result<Vec<(f64, f64)>> {
    samples.iter().map(|row| credible_interval(row, level)).collect()
}

/// Summary of a set of chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub chains: usize,
    /// Retained draws per chain.
    pub draws: usize,
    /// `R̂` of each scalar parameter; empty with a single chain.
    pub r_hat: BTreeMap<String, f64>,
    /// Multivariate factor over `β`, `c`, `η` and every `w_i`, `s_i`.
    pub multi: Option<f64>,
    pub note: Option<String>,
}

/// `R̂` for `β`, `c`, `η`, `Σw` and `w_*`, and `R_multi` over the
/// hyperparameters and all per-node weights and indices, computed on the
/// retained draws.
pub fn diagnose(chains: &[ChainOutput], split: bool) -> Result<Diagnostics> {
    if chains.is_empty() {
        return Err(Error::domain("no chains given"));
    }
    let draws = chains[0].samples.len();
    if chains.len() < 2 {
        return Ok(Diagnostics {
            chains: 1,
            draws,
            r_hat: BTreeMap::new(),
            multi: None,
            note: Some("Gelman–Rubin needs at least two chains".into()),
        });
    }
    let series = |f: fn(&crate::inference::Sample) -> f64| -> Vec<Vec<f64>> {
        chains.iter().map(|c| c.samples.iter().map(f).collect()).collect()
    };
    let mut r_hat = BTreeMap::new();
    r_hat.insert("beta".to_string(), gelman_rubin(&series(|s| s.beta), split)?);
    r_hat.insert("c".to_string(), gelman_rubin(&series(|s| s.c), split)?);
    r_hat.insert("eta".to_string(), gelman_rubin(&series(|s| s.eta), split)?);
    r_hat.insert("w_sum".to_string(), gelman_rubin(&series(|s| s.w_sum), split)?);
    r_hat.insert("w_star".to_string(), gelman_rubin(&series(|s| s.w_star), split)?);
    let mut all: Vec<f64> = ["beta", "c", "eta"].iter().map(|k| r_hat[*k]).collect();
    let nodes = chains[0].node_w.len();
    if chains.iter().any(|c| c.node_w.len() != nodes) {
        return Err(Error::domain("chains were run on different graphs"));
    }
    for i in 0..nodes {
        for pick in [0, 1] {
            let moments: Vec<_> = chains.iter().map(|c| if pick == 0 { c.node_w[i] } else { c.node_s[i] }).collect();
            let n = moments[0].n;
            let means: Vec<f64> = moments.iter().map(|m| m.mean).collect();
            let vars: Vec<f64> = moments.iter().map(|m| m.variance()).collect();
            if let Ok(r) = gelman_rubin_from_moments(&means, &vars, n) {
                all.push(r);
            }
        }
    }
    let multi = gelman_rubin_multivariate(&all, draws)?;
    Ok(Diagnostics { chains: chains.len(), draws, r_hat, multi: Some(multi), note: None })
}

/// `η` factor for predicting the held-out part of a p-sampled graph.
pub fn eta_scale_for_p(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("p must lie in (0, 1), got {p}")));
    }
    Ok((1.0 - p) / p)
}

/// One simulated predictive graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveGraph {
    pub graph_id: usize,
    pub hyper: Hyperparams,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub prop_degree_one: f64,
    pub degree_hist: BTreeMap<u64, u64>,
}

/// `n_graphs` graphs, each from a posterior draw picked uniformly with `η`
/// multiplied by `eta_scale`. `truncation = 0` uses the exact generator,
/// otherwise the first `truncation` size-biased weights. Graph `k` uses its
/// own stream, so the result does not depend on `threads`.
pub fn posterior_predictive(
    posterior: &[Hyperparams],
    n_graphs: usize,
    eta_scale: f64,
    truncation: usize,
    seed: u64,
    threads: usize,
) -> Result<Vec<PredictiveGraph>> {
    if posterior.is_empty() {
        return Err(Error::domain("posterior has no draws"));
    }
    if !(eta_scale > 0.0) || !eta_scale.is_finite() {
        return Err(Error::domain(format!("eta_scale must be positive, got {eta_scale}")));
    }
    let one = |k: usize| -> Result<PredictiveGraph> {
        let mut rng = rng::stream(seed, streams::PREDICTIVE_BASE + k as u64);
        let h = posterior[rng.random_range(0..posterior.len())];
        let hyper = Hyperparams::new(h.beta, h.c, h.eta * eta_scale)?;
        let p = hyper.params();
        let g = if truncation == 0 {
            graph::generate_mgg_graph(&p, &mut rng)?
        } else {
            graph::generate_truncated_mgg_graph(&p, truncation, &mut rng)?
        };
        let st = graph_stats(&g.graph);
        Ok(PredictiveGraph {
            graph_id: k,
            hyper,
            n_nodes: st.n_nodes,
            n_edges: st.n_edges,
            prop_degree_one: st.prop_degree_one,
            degree_hist: st.degree_hist,
        })
    };
    parallel_map(n_graphs, threads, one)
}

/// `f(0..n)` over `threads` scoped workers, results in index order.
pub fn parallel_map<T: Send, F: Fn(usize) -> Result<T> + Sync>(n: usize, threads: usize, f: F) -> Result<Vec<T>> {
    let threads = threads.clamp(1, n.max(1));
    if threads == 1 {
        return (0..n).map(f).collect();
    }
    let results: Vec<Vec<(usize, Result<T>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let f = &f;
                scope.spawn(move || (t..n).step_by(threads).map(|k| (k, f(k))).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut flat: Vec<(usize, Result<T>)> = results.into_iter().flatten().collect();
    flat.sort_by_key(|(k, _)| *k);
    flat.into_iter().map(|(_, r)| r).collect()
}

/// Histogram on power-of-two bins `[2^k, 2^{k+1})`; returns
/// `(lower edge, count)` for each non-empty bin.
pub fn log_binned_histogram(hist: &BTreeMap<u64, u64>) -> Vec<(u64, u64)> {
    let mut bins: BTreeMap<u64, u64> = BTreeMap::new();
    for (&d, &n) in hist {
        if d == 0 {
            continue;
        }
        let lo = 1u64 << (63 - d.leading_zeros());
        *bins.entry(lo).or_insert(0) += n;
    }
    bins.into_iter().collect()
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("KS distance needs non-empty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    Ok(d)
}
