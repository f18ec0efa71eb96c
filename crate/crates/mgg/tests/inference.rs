mod common;

use common::{gauss_legendre, mean_se};
use mgg::crm::{psi_mgg, MggParams};
use mgg::graph::{generate_mgg_graph, SparseGraph};
use mgg::inference::*;
use mgg::rng::stream;
use mgg::samplers::sample_total_mass;

/// Batch-means standard error.
fn batch_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> = xs.chunks(size).take(batches).map(|b| b.iter().sum::<f64>() / b.len() as f64).collect();
    mean_se(&means).1
}

#[test]
fn weight_chain_with_latent_counts_matches_marginal() {
    // Two nodes joined by one edge. With s, w_* and φ fixed, summing the
    // joint over q̃ ≥ 1 gives the density of v = log w:
    // exp(−(w1 + w2 + w_*)²) (e^{2 w1 w2} − 1) Π w_i^{−s_i} e^{−β w_i / c}.
    let graph = SparseGraph::from_edges(2, [(0, 1)]).unwrap();
    let hyper = Hyperparams::new(1.0, 1.0, 5.0).unwrap();
    let (s, w_star) = ([0.4, 0.7], 0.3);
    let log_target = |v1: f64, v2: f64| {
        let (w1, w2) = (v1.exp(), v2.exp());
        -(w1 + w2 + w_star).powi(2) + (2.0 * w1 * w2).exp_m1().ln() - s[0] * v1 - s[1] * v2
            - hyper.beta / hyper.c * (w1 + w2)
    };
    let (lo, hi) = (-70.0, 2.5);
    let inner = |v1: f64, f: &dyn Fn(f64, f64) -> f64| gauss_legendre(|v2| log_target(v1, v2).exp() * f(v1, v2), lo, hi, 80);
    let z = gauss_legendre(|v1| inner(v1, &|_, _| 1.0), lo, hi, 80);
    let e_v1 = gauss_legendre(|v1| inner(v1, &|a, _| a), lo, hi, 80) / z;
    let e_prod = gauss_legendre(|v1| inner(v1, &|a, b| (a + b).exp()), lo, hi, 80) / z;

    let mut state = LatentState { v: vec![0.5f64.ln(); 2], s: s.to_vec(), w_star, q_tilde: vec![1], m: vec![1, 1] };
    let mut rng = stream(7, 0);
    let n = 400_000;
    let (mut v1s, mut prods) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut accepted = 0usize;
    for _ in 0..n {
        accepted += hmc_update(Block::Weights, &mut state, &hyper, 0.3, 5, &mut rng).unwrap().accepted as usize;
        gibbs_update_latent_counts(&mut state, &graph, &mut rng).unwrap();
        assert_eq!(state.m, vec![state.q_tilde[0] as u64; 2]);
        v1s.push(state.v[0]);
        prods.push(state.weight(0) * state.weight(1));
    }
    assert!(accepted as f64 / n as f64 > 0.5);
    let (m, se) = (mean_se(&v1s).0, batch_se(&v1s, 100));
    assert!((m - e_v1).abs() <= 3.0 * se, "E[v1] {m} vs {e_v1} (se {se})");
    let (m, se) = (mean_se(&prods).0, batch_se(&prods, 100));
    assert!((m - e_prod).abs() <= 3.0 * se, "E[w1 w2] {m} vs {e_prod} (se {se})");
}

#[test]
fn tilted_mass_proposal_laplace_transform() {
    // w̃_* is drawn from the total-mass law with β shifted by 2c(Σw + w_*).
    let (beta, c, eta, t_shift) = (0.8, 1.5, 6.0, 2.0);
    let tilted = MggParams::new(1.0, 0.0, beta + c * t_shift, c, eta).unwrap();
    let base = MggParams::new(1.0, 0.0, beta, c, eta).unwrap();
    let laplace = |grid: usize, t: f64| {
        let mut rng = stream(8, 0);
        let xs: Vec<f64> = (0..20_000).map(|_| (-t * sample_total_mass(&tilted, grid, &mut rng).unwrap()).exp()).collect();
        mean_se(&xs)
    };
    for &t in &[0.3, 1.0, 3.0] {
        let expect = (-(psi_mgg(t + t_shift, &base).unwrap() - psi_mgg(t_shift, &base).unwrap())).exp();
        let (m, se) = laplace(4096, t);
        assert!((m - expect).abs() <= 3.0 * se, "t={t}: {m} vs {expect} (se {se})");
        // The default proposal grid carries an O(1/n_grid) bias.
        let (m, _) = laplace(256, t);
        assert!((m - expect).abs() <= 5e-3, "grid 256, t={t}: {m} vs {expect}");
    }
}

#[test]
fn extreme_weights_are_rejected_cleanly() {
    let graph = SparseGraph::from_edges(3, [(0, 1), (1, 2), (2, 2)]).unwrap();
    let hyper = Hyperparams::new(1.0, 1.0, 2.0).unwrap();
    for &(v, eps) in &[(-460.0, 5.0), (-3000.0, 5.0), (345.0, 1.0), (3.4, 50.0)] {
        let mut state =
            LatentState { v: vec![v, 0.0, v], s: vec![0.5, 1e-9, 1.0 - 1e-9], w_star: 0.1, q_tilde: vec![1, 1, 1], m: vec![] };
        state.m = multigraph_degrees(&graph, &state.q_tilde);
        let before = state.clone();
        let mut rng = stream(9, 0);
        for block in [Block::Weights, Block::Indices] {
            match hmc_update(block, &mut state, &hyper, eps, 5, &mut rng) {
                Ok(r) => {
                    assert!((0.0..=1.0).contains(&r.accept_prob));
                    assert!(state.v.iter().all(|v| v.is_finite()));
                    assert!(state.s.iter().all(|s| *s > 0.0 && *s < 1.0));
                    if !r.accepted {
                        assert_eq!(state.v, before.v);
                    }
                }
                Err(e) => assert!(matches!(e, mgg::Error::Numeric(_)), "{e}"),
            }
        }
    }
}

#[test]
fn underflowing_weights_stay_valid() {
    // A degree-one node with s near 1 has a nearly flat log-weight density
    // towards −∞, so v far below the f64 exponent range is reachable.
    let graph = SparseGraph::from_edges(2, [(0, 1)]).unwrap();
    let hyper = Hyperparams::new(1.0, 1.5, 100.0).unwrap();
    let mut state = LatentState { v: vec![-2000.0, 0.0], s: vec![0.9995, 0.5], w_star: 1.0, q_tilde: vec![1], m: vec![1, 1] };
    let mut rng = stream(12, 0);
    for _ in 0..2000 {
        hmc_update(Block::Weights, &mut state, &hyper, 0.1, 5, &mut rng).unwrap();
        hmc_update(Block::Indices, &mut state, &hyper, 0.1, 5, &mut rng).unwrap();
        gibbs_update_latent_counts(&mut state, &graph, &mut rng).unwrap();
        state.validate(&graph).unwrap();
    }
    assert!(state.weight(0) >= 0.0 && state.w_sum().is_finite());
}

#[test]
fn adapted_acceptance_rates_near_target() {
    let p = MggParams::new(1.0, 0.0, 1.0, 1.0, 30.0).unwrap();
    let g = generate_mgg_graph(&p, &mut stream(10, 3)).unwrap();
    assert!(g.graph.num_nodes > 50);
    let config = McmcConfig { n_iters: 8000, burn_in: 4000, thin_to: 100, ..McmcConfig::default() };
    let out = run_chain(&g.graph, &config, 10, 0).unwrap();
    assert!(out.aborted.is_none());
    assert_eq!(out.samples.len(), 100);
    let r = out.acceptance_rates;
    assert!((0.55..=0.75).contains(&r.w), "w rate {}", r.w);
    assert!((0.55..=0.75).contains(&r.s), "s rate {}", r.s);
    assert!((0.0..=1.0).contains(&r.hyper));
}

#[test]
fn chains_are_independent_and_reproducible() {
    let p = MggParams::new(1.0, 0.0, 1.0, 1.0, 10.0).unwrap();
    let g = generate_mgg_graph(&p, &mut stream(11, 3)).unwrap();
    let config = McmcConfig { n_iters: 300, burn_in: 100, thin_to: 20, ..McmcConfig::default() };
    let a = run_chain(&g.graph, &config, 5, 0).unwrap();
    let b = run_chain(&g.graph, &config, 5, 0).unwrap();
    let c = run_chain(&g.graph, &config, 5, 1).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.samples, c.samples);
    assert_eq!(a.node_w.len(), g.graph.num_nodes);
    assert!(a.samples.iter().all(|s| s.beta > 0.0 && s.c > 0.0 && s.eta > 0.0 && s.w_star > 0.0));
}
