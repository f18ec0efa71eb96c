//! Caron–Fox random graphs built from CRM weights, their summary statistics,
//! p-sampling, and the generalized gamma and Barabási–Albert baselines.

use crate::crm::MggParams;
use crate::error::{Error, Result};
use crate::samplers::{self, Atom, GgParams, GgStream, MggStream, SizeBiasedCrm};
use rand::Rng;
use rand_distr::weighted::{WeightedAliasIndex, WeightedTreeIndex};
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Weight lists longer than this use the Poissonized generator.
pub const BERNOULLI_MAX_NODES: usize = 20_000;

/// Undirected graph on `0..num_nodes` with optional self-loops.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseGraph {
    pub num_nodes: usize,
    /// Sorted, unique pairs `(i, j)` with `i ≤ j`.
    pub edges: Vec<(u32, u32)>,
    /// Multigraph counts `q̃_ij`, aligned with `edges`.
    pub multi_counts: Option<Vec<u32>>,
    /// External identifier of each node.
    pub node_labels: Option<Vec<u64>>,
}

impl SparseGraph {
    pub fn empty() -> Self {
        SparseGraph::default()
    }

    /// Graph from arbitrary pairs; orientation is normalized and duplicates
    /// are merged.
    pub fn from_edges(num_nodes: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let mut e: Vec<(u32, u32)> = edges.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        if let Some(&(_, j)) = e.iter().max_by_key(|p| p.1) {
            if j as usize >= num_nodes {
                return Err(Error::domain(format!("edge endpoint {j} out of range for {num_nodes} nodes")));
            }
        }
        e.sort_unstable();
        e.dedup();
        Ok(SparseGraph { num_nodes, edges: e, multi_counts: None, node_labels: None })
    }

    /// Graph from directed multigraph endpoints, collapsing `(i, j)` and
    /// `(j, i)` into one undirected pair whose count is their sum.
    fn from_directed(num_nodes: usize, mut pairs: Vec<(u32, u32)>) -> Self {
        for p in pairs.iter_mut() {
            *p = (p.0.min(p.1), p.0.max(p.1));
        }
        pairs.sort_unstable();
        let mut edges = Vec::new();
        let mut counts: Vec<u32> = Vec::new();
        for p in pairs {
            if edges.last() == Some(&p) {
                *counts.last_mut().expect("aligned") += 1;
            } else {
                edges.push(p);
                counts.push(1);
            }
        }
        SparseGraph { num_nodes, edges, multi_counts: Some(counts), node_labels: None }
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_self_loops(&self) -> usize {
        self.edges.iter().filter(|(i, j)| i == j).count()
    }

    /// Label of node `i`, defaulting to `i`.
    pub fn label(&self, i: usize) -> u64 {
        self.node_labels.as_ref().map_or(i as u64, |l| l[i])
    }

    /// Simple-graph degrees; a self-loop adds one.
    pub fn degrees(&self) -> Vec<u64> {
        let mut d = vec![0u64; self.num_nodes];
        for &(i, j) in &self.edges {
            d[i as usize] += 1;
            if i != j {
                d[j as usize] += 1;
            }
        }
        d
    }

    /// Multigraph degrees `m_i`; a self-loop count enters for both endpoints.
    /// Without stored counts every edge has multiplicity one.
    pub fn multigraph_degrees(&self) -> Vec<u64> {
        let mut d = vec![0u64; self.num_nodes];
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            let q = self.multi_counts.as_ref().map_or(1, |c| c[k]) as u64;
            d[i as usize] += q;
            d[j as usize] += q;
        }
        d
    }

    /// Subgraph induced by the nodes with `keep[i]`, with isolated nodes
    /// removed and labels carried over.
    pub fn induced_subgraph(&self, keep: &[bool]) -> SparseGraph {
        let mut edges = Vec::new();
        let mut counts = self.multi_counts.as_ref().map(|_| Vec::new());
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            if keep[i as usize] && keep[j as usize] {
                edges.push((i, j));
                if let (Some(c), Some(src)) = (counts.as_mut(), self.multi_counts.as_ref()) {
                    c.push(src[k]);
                }
            }
        }
        let sub = SparseGraph {
            num_nodes: self.num_nodes,
            edges,
            multi_counts: counts,
            node_labels: self.node_labels.clone(),
        };
        sub.drop_isolated()
    }

    /// Removes nodes without incident edges, compacting indices in order.
    pub fn drop_isolated(&self) -> SparseGraph {
        let mut used = vec![false; self.num_nodes];
        for &(i, j) in &self.edges {
            used[i as usize] = true;
            used[j as usize] = true;
        }
        let mut map = vec![u32::MAX; self.num_nodes];
        let mut labels = Vec::new();
        for i in 0..self.num_nodes {
            if used[i] {
                map[i] = labels.len() as u32;
                labels.push(self.label(i));
            }
        }
        let edges = self.edges.iter().map(|&(i, j)| (map[i as usize], map[j as usize])).collect();
        SparseGraph {
            num_nodes: labels.len(),
            edges,
            multi_counts: self.multi_counts.clone(),
            node_labels: Some(labels),
        }
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        for w in self.edges.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::domain("edges must be sorted and unique"));
            }
        }
        for &(i, j) in &self.edges {
            if i > j || j as usize >= self.num_nodes {
                return Err(Error::domain(format!("invalid edge ({i}, {j})")));
            }
        }
        if let Some(c) = &self.multi_counts {
            if c.len() != self.edges.len() || c.iter().any(|&q| q == 0) {
                return Err(Error::domain("multigraph counts must be positive and aligned with edges"));
            }
        }
        if let Some(l) = &self.node_labels {
            if l.len() != self.num_nodes {
                return Err(Error::domain("one label per node is required"));
            }
        }
        Ok(())
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.len() > u32::MAX as usize {
        return Err(Error::domain("too many weights"));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::domain(format!("weights must be finite and non-negative, got {w}")));
    }
    Ok(())
}

/// Independent edges with `P(i~j) = 1 − e^{−2 w_i w_j}` and self-loops with
/// `1 − e^{−w_i²}`; isolated nodes dropped, weight indices kept as labels.
pub fn generate_graph_bernoulli<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<SparseGraph> {
    check_weights(weights)?;
    let n = weights.len();
    let mut edges = Vec::new();
    for i in 0..n {
        let wi = weights[i];
        if rng.random::<f64>() < -(-wi * wi).exp_m1() {
            edges.push((i as u32, i as u32));
        }
        for j in i + 1..n {
            if rng.random::<f64>() < -(-2.0 * wi * weights[j]).exp_m1() {
                edges.push((i as u32, j as u32));
            }
        }
    }
    Ok(SparseGraph { num_nodes: n, edges, multi_counts: None, node_labels: None }.drop_isolated())
}

/// Poisson process with intensity `G×G`: `D ~ Poisson(T²)` directed edges with
/// both endpoints drawn proportionally to the weights, collapsed to
/// `q̃_ij = Q_ij + Q_ji`.
pub fn generate_graph_poissonized<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<SparseGraph> {
    check_weights(weights)?;
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || total <= 0.0 {
        return Ok(SparseGraph::empty());
    }
    let d = sample_poisson(total * total, rng)?;
    if d == 0 {
        return Ok(SparseGraph::empty());
    }
    let alias = WeightedAliasIndex::new(weights.to_vec()).map_err(|e| Error::numeric(format!("alias table: {e}")))?;
    let pairs = (0..d).map(|_| (alias.sample(rng) as u32, alias.sample(rng) as u32)).collect();
    Ok(SparseGraph::from_directed(weights.len(), pairs).drop_isolated())
}

/// Bernoulli route for short weight lists, Poissonized route otherwise.
pub fn generate_graph<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<SparseGraph> {
    if weights.len() > BERNOULLI_MAX_NODES {
        generate_graph_poissonized(weights, rng)
    } else {
        generate_graph_bernoulli(weights, rng)
    }
}

fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    if lambda <= 0.0 {
        return Ok(0);
    }
    if !(lambda < 1e15) {
        return Err(Error::numeric(format!("Poisson mean {lambda} is too large")));
    }
    let p = Poisson::new(lambda).map_err(|e| Error::numeric(format!("Poisson({lambda}): {e}")))?;
    Ok(p.sample(rng) as u64)
}

/// Controls of the exact generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactConfig {
    /// Atoms are revealed until the clock exceeds `reveal_factor` times the
    /// expected total mass given the atoms seen so far.
    pub reveal_factor: f64,
    /// Lower bound on the number of revealed atoms.
    pub min_atoms: usize,
    /// Hard cap on the number of revealed atoms.
    pub max_atoms: usize,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig { reveal_factor: 4.0, min_atoms: 0, max_atoms: 200_000_000 }
    }
}

/// Graph from the untruncated measure together with its latent masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedGraph {
    /// Node labels are size-biased stream positions.
    pub graph: SparseGraph,
    /// Weight of each node.
    pub weights: Vec<f64>,
    /// Total mass `G*` of the measure.
    pub total_mass: f64,
    /// Mass of the atoms without edges, `G* − Σ weights`.
    pub unobserved_mass: f64,
    /// Number of atoms drawn from the stream.
    pub atoms_revealed: usize,
}

fn reveal<C: SizeBiasedCrm, R: Rng + ?Sized>(
    crm: &mut C,
    atoms: &mut Vec<Atom>,
    sum: &mut f64,
    rng: &mut R,
    cfg: &ExactConfig,
    floor: f64,
) -> Result<()> {
    loop {
        let clock = atoms.last().map_or(0.0, |a| a.clock);
        if atoms.len() >= cfg.min_atoms && clock > floor && clock > cfg.reveal_factor * (*sum + crm.residual_mean(clock)?)
        {
            return Ok(());
        }
        if atoms.len() >= cfg.max_atoms {
            return Err(Error::numeric(format!("more than {} atoms needed", cfg.max_atoms)));
        }
        let a = crm.next_atom(rng)?;
        *sum += a.w;
        atoms.push(a);
    }
}

/// Caron–Fox multigraph of the full measure without truncation.
///
/// Atoms arrive in size-biased order on a clock where atom `j` has its first
/// out-stub at `clock_j`. Atoms are revealed until the clock is well past the
/// total mass `G* = S + R`, with `R` the residual mass drawn at the last
/// clock. Revealed atoms with `clock_j < G*` emit `1 + Poisson(w_j (G* −
/// clock_j))` stubs; each stub lands on a revealed atom with probability
/// `S/G*` and in the residual otherwise, where it revisits an earlier
/// residual target with probability proportional to its weight or takes the
/// next atom of the stream.
pub fn generate_exact<C: SizeBiasedCrm, R: Rng + ?Sized>(
    crm: &mut C,
    cfg: &ExactConfig,
    rng: &mut R,
) -> Result<GeneratedGraph> {
    let mut atoms: Vec<Atom> = Vec::new();
    let mut sum = 0.0;
    reveal(crm, &mut atoms, &mut sum, rng, cfg, 0.0)?;
    let (residual, total) = loop {
        let clock = atoms.last().map_or(0.0, |a| a.clock);
        let r = crm.sample_residual(clock, rng)?;
        let g = sum + r;
        if g < clock {
            break (r, g);
        }
        reveal(crm, &mut atoms, &mut sum, rng, cfg, g)?;
    };
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::numeric(format!("total mass {total} is not positive and finite")));
    }
    let n_revealed = atoms.len();
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    if n_revealed > 0 && atoms[0].clock < total {
        let alias = WeightedAliasIndex::new(atoms.iter().map(|a| a.w).collect::<Vec<f64>>())
            .map_err(|e| Error::numeric(format!("alias table: {e}")))?;
        let p_revealed = sum / total;
        let mut hit_tree: WeightedTreeIndex<f64> = WeightedTreeIndex::new(Vec::<f64>::new())
            .map_err(|e| Error::numeric(format!("tree index: {e}")))?;
        let mut hit_mass = 0.0;
        for j in 0..n_revealed {
            let a = atoms[j];
            if a.clock >= total {
                break;
            }
            let k = 1 + sample_poisson(a.w * (total - a.clock), rng)?;
            for _ in 0..k {
                let target = if rng.random::<f64>() < p_revealed {
                    alias.sample(rng)
                } else if hit_mass > 0.0 && rng.random::<f64>() * residual < hit_mass {
                    n_revealed + hit_tree.try_sample(rng).map_err(|e| Error::numeric(format!("tree index: {e}")))?
                } else {
                    let b = crm.next_atom(rng)?;
                    hit_tree.push(b.w).map_err(|e| Error::numeric(format!("tree index: {e}")))?;
                    hit_mass += b.w;
                    atoms.push(b);
                    atoms.len() - 1
                };
                if target > u32::MAX as usize {
                    return Err(Error::numeric("node index overflow"));
                }
                pairs.push((j as u32, target as u32));
            }
        }
    }
    let full = SparseGraph::from_directed(atoms.len(), pairs);
    let graph = full.drop_isolated();
    let labels = graph.node_labels.as_ref().expect("set by drop_isolated");
    let weights: Vec<f64> = labels.iter().map(|&l| atoms[l as usize].w).collect();
    let observed: f64 = weights.iter().sum();
    Ok(GeneratedGraph {
        graph,
        weights,
        total_mass: total,
        unobserved_mass: (total - observed).max(0.0),
        atoms_revealed: atoms.len(),
    })
}

/// Exact mGG graph.
pub fn generate_mgg_graph<R: Rng + ?Sized>(params: &MggParams, rng: &mut R) -> Result<GeneratedGraph> {
    let mut s = MggStream::new(params)?;
    generate_exact(&mut s, &ExactConfig::default(), rng)
}

/// Graph from the first `n` size-biased mGG weights; the truncation drops
/// every atom beyond the `n`-th.
pub fn generate_truncated_mgg_graph<R: Rng + ?Sized>(
    params: &MggParams,
    n: usize,
    rng: &mut R,
) -> Result<GeneratedGraph> {
    if n == 0 {
        return Ok(GeneratedGraph {
            graph: SparseGraph::empty(),
            weights: Vec::new(),
            total_mass: 0.0,
            unobserved_mass: 0.0,
            atoms_revealed: 0,
        });
    }
    let draw = samplers::sample_size_biased(params, n, rng)?;
    let graph = generate_graph(&draw.weights, rng)?;
    let weights: Vec<f64> = (0..graph.num_nodes).map(|i| draw.weights[graph.label(i) as usize]).collect();
    let total = draw.truncated_sum();
    let observed: f64 = weights.iter().sum();
    Ok(GeneratedGraph { graph, weights, total_mass: total, unobserved_mass: (total - observed).max(0.0), atoms_revealed: n })
}

/// Exact graph of the generalized gamma measure with Lévy intensity
/// `size/Γ(1−σ) w^{−1−σ} e^{−τ w}`.
pub fn generate_gg_graph<R: Rng + ?Sized>(sigma: f64, tau_gg: f64, size: f64, rng: &mut R) -> Result<GeneratedGraph> {
    let mut s = GgStream::new(&GgParams::new(sigma, tau_gg, size)?)?;
    generate_exact(&mut s, &ExactConfig::default(), rng)
}

/// Preferential attachment: `m` initial nodes without edges, then each new
/// node links to `m` distinct existing nodes chosen proportionally to degree
/// (uniformly while all degrees are zero). The edge count is `m (n − m)`.
pub fn generate_ba_graph<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<SparseGraph> {
    if m < 1 || n <= m {
        return Err(Error::domain(format!("Barabási–Albert needs n > m >= 1, got n={n}, m={m}")));
    }
    if n > u32::MAX as usize {
        return Err(Error::domain("too many nodes"));
    }
    let mut edges = Vec::with_capacity(m * (n - m));
    let mut ends: Vec<u32> = Vec::with_capacity(2 * m * (n - m));
    let mut targets: Vec<u32> = (0..m as u32).collect();
    for v in m..n {
        for &t in &targets {
            edges.push((t, v as u32));
            ends.push(t);
            ends.push(v as u32);
        }
        targets.clear();
        while targets.len() < m {
            let t = ends[rng.random_range(0..ends.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
    }
    SparseGraph::from_edges(n, edges)
}

/// Summary statistics of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub n_self_loops: usize,
    /// Number of nodes of each simple-graph degree.
    pub degree_hist: BTreeMap<u64, u64>,
    pub prop_degree_one: f64,
    /// Connected component sizes, largest first.
    pub component_sizes: Vec<usize>,
    pub max_degree: u64,
    pub mean_degree: f64,
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

/// Connected component sizes in descending order.
pub fn component_sizes(g: &SparseGraph) -> Vec<usize> {
    let mut parent: Vec<u32> = (0..g.num_nodes as u32).collect();
    let mut size = vec![1usize; g.num_nodes];
    for &(i, j) in &g.edges {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            let (big, small) = if size[a as usize] >= size[b as usize] { (a, b) } else { (b, a) };
            parent[small as usize] = big;
            size[big as usize] += size[small as usize];
        }
    }
    let mut out: Vec<usize> = (0..g.num_nodes).filter(|&i| parent[i] == i as u32).map(|i| size[i]).collect();
    out.sort_unstable_by(|a, b| b.cmp(a));
    out
}

/// Node, edge and degree statistics. With self-loops counted once in the
/// degree, `Σ_j j N_j = 2 n_edges − n_self_loops`.
pub fn graph_stats(g: &SparseGraph) -> GraphStats {
    let deg = g.degrees();
    let mut hist = BTreeMap::new();
    for &d in &deg {
        *hist.entry(d).or_insert(0u64) += 1;
    }
    let n = g.num_nodes;
    let ones = hist.get(&1).copied().unwrap_or(0);
    GraphStats {
        n_nodes: n,
        n_edges: g.num_edges(),
        n_self_loops: g.num_self_loops(),
        prop_degree_one: if n > 0 { ones as f64 / n as f64 } else { 0.0 },
        component_sizes: component_sizes(g),
        max_degree: deg.iter().copied().max().unwrap_or(0),
        mean_degree: if n > 0 { deg.iter().sum::<u64>() as f64 / n as f64 } else { 0.0 },
        degree_hist: hist,
    }
}

/// `N_j / Σ_{k≥2} N_k` for `j = 2..=j_max`.
pub fn degree_tail_ratios(g: &SparseGraph, j_max: u64) -> Result<Vec<f64>> {
    if j_max < 2 {
        return Err(Error::domain(format!("j_max must be at least 2, got {j_max}")));
    }
    let deg = g.degrees();
    let tail = deg.iter().filter(|&&d| d >= 2).count();
    if tail == 0 {
        return Err(Error::domain("graph has no node of degree >= 2"));
    }
    let mut counts = vec![0usize; j_max as usize + 1];
    for &d in &deg {
        if d >= 2 && d <= j_max {
            counts[d as usize] += 1;
        }
    }
    Ok(counts[2..].iter().map(|&c| c as f64 / tail as f64).collect())
}

/// Maximum-likelihood exponent `γ` of a discrete power law `P(k) ∝ k^{−γ}`
/// over the samples `k ≥ k_min`, using the continuity-corrected Hill form
/// `1 + n / Σ log(k / (k_min − ½))`.
pub fn power_law_exponent(samples: &[u64], k_min: u64) -> Result<f64> {
    if k_min < 1 {
        return Err(Error::domain("k_min must be at least 1"));
    }
    let base = k_min as f64 - 0.5;
    let (n, s) = samples
        .iter()
        .filter(|&&k| k >= k_min)
        .fold((0usize, 0.0), |(n, s), &k| (n + 1, s + (k as f64 / base).ln()));
    if n < 2 {
        return Err(Error::domain("too few samples above k_min"));
    }
    Ok(1.0 + n as f64 / s)
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(format!("p must lie in (0, 1], got {p}")));
    }
    Ok(())
}

/// Retains each node with probability `p`, keeps induced edges and drops
/// nodes left isolated.
pub fn p_sample<R: Rng + ?Sized>(g: &SparseGraph, p: f64, rng: &mut R) -> Result<SparseGraph> {
    Ok(p_split(g, p, rng)?.0)
}

/// Vertex partition by independent retention with probability `p`: the
/// subgraph induced by retained nodes and the one induced by the others, both
/// with isolated nodes dropped.
pub fn p_split<R: Rng + ?Sized>(g: &SparseGraph, p: f64, rng: &mut R) -> Result<(SparseGraph, SparseGraph)> {
    check_p(p)?;
    let keep: Vec<bool> = (0..g.num_nodes).map(|_| p == 1.0 || rng.random::<f64>() < p).collect();
    let rest: Vec<bool> = keep.iter().map(|k| !k).collect();
    Ok((g.induced_subgraph(&keep), g.induced_subgraph(&rest)))
}
