use clap::{Args, Parser, Subcommand, ValueEnum};
use mgg::diagnostics::{self, parallel_map};
use mgg::graph::{self, graph_stats, GraphStats, SparseGraph};
use mgg::inference::{run_chain, ChainOutput, Hyperparams, McmcConfig};
use mgg::io;
use mgg::rng::{stream, streams};
use mgg::samplers::{sample_size_biased, sample_total_mass};
use mgg::{Error, MggParams, Result};
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Serialize)]
#[command(name = "mgg", version, about = "Mixed generalized gamma random graphs and posterior inference")]
struct Cli {
    /// Run seed.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Output file, or output directory for commands that write several files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON file {"alpha", "tau", "beta", "c", "eta"}.
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Size-biased weights with their latent clocks and indices.
    SampleWeights {
        #[arg(long)]
        n: usize,
    },
    /// Draws of the total mass.
    SampleMass {
        #[arg(long, default_value_t = 1000)]
        draws: usize,
        #[arg(long, default_value_t = 1024)]
        grid: usize,
    },
    /// One graph: edge list and statistics.
    SampleGraph {
        /// Number of size-biased atoms for the truncated method.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum, default_value_t = Method::Exact)]
        method: Method,
    },
    /// Size sweep over models, averaged over seeds.
    Sweep(SweepArgs),
    /// Statistics of an edge list.
    Stats {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long, default_value_t = 4)]
        j_max: u64,
    },
    /// p-sampling split into training and held-out graphs.
    Psample {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        p: f64,
    },
    /// MCMC posterior inference.
    Infer(InferArgs),
    /// Convergence diagnostics of the chains in a directory.
    Diagnose {
        /// Directory written by `infer`.
        #[arg(long)]
        dir: PathBuf,
        /// Split each chain in half.
        #[arg(long)]
        split: bool,
    },
    /// Degree histograms of graphs from the posterior predictive.
    Predict(PredictArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "lowercase")]
enum Method {
    Exact,
    Truncated,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Model {
    Mgg,
    Gg,
    Ba,
}

#[derive(Args, Serialize)]
struct SweepArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_value = "mgg,gg,ba")]
    models: Vec<Model>,
    /// Size knob: η for mgg, the GG rate for gg, the node count for ba.
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,400,800,1600,3200,6000")]
    grid: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    #[arg(long, default_value_t = 0.5)]
    gg_sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    gg_tau: f64,
    #[arg(long, default_value_t = 2)]
    ba_m: usize,
}

#[derive(Args, Serialize)]
struct InferArgs {
    #[arg(long)]
    edges: PathBuf,
    /// JSON MCMC configuration; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    chains: usize,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin_to: Option<usize>,
    #[arg(long)]
    split: bool,
}

#[derive(Args, Serialize)]
struct PredictArgs {
    /// Directory written by `infer`.
    #[arg(long)]
    posterior: PathBuf,
    #[arg(long, default_value_t = 200)]
    n_graphs: usize,
    #[arg(long, conflicts_with = "match_p")]
    eta_scale: Option<f64>,
    /// Set the η scale to (1 − p)/p.
    #[arg(long)]
    match_p: Option<f64>,
    /// Size-biased atoms per graph; 0 uses the exact generator.
    #[arg(long, default_value_t = 0)]
    truncation: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn command_line() -> String {
    std::env::args().map(|a| if a.contains(char::is_whitespace) { format!("'{a}'") } else { a }).collect::<Vec<_>>().join(" ")
}

#[derive(Serialize)]
struct Resolved<'a, T: Serialize> {
    cli: &'a Cli,
    resolved: T,
}

fn header<T: Serialize>(cli: &Cli, resolved: T) -> Result<Vec<String>> {
    io::header_lines(&command_line(), &Resolved { cli, resolved })
}

/// A file, or stdout when `path` is `None`.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn out_dir(cli: &Cli) -> Result<&Path> {
    let dir = cli.out.as_deref().ok_or_else(|| Error::Domain("--out <DIR> is required".into()))?;
    std::fs::create_dir_all(dir)?;
    Ok(dir)
}

fn params(cli: &Cli) -> Result<MggParams> {
    match &cli.params {
        Some(p) => io::read_params(p),
        None => Err(Error::Domain("--params <FILE> is required".into())),
    }
}

/// JSON document with the provenance echo that CSV files carry as comments.
#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    cmd: String,
    config: &'a Resolved<'a, serde_json::Value>,
    #[serde(flatten)]
    body: T,
}

fn document_json<T: Serialize>(cli: &Cli, resolved: serde_json::Value, body: T, path: Option<&Path>) -> Result<()> {
    let r = Resolved { cli, resolved };
    let doc = Document { cmd: command_line(), config: &r, body };
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::SampleWeights { n } => {
            let p = params(cli)?;
            let d = sample_size_biased(&p, *n, &mut stream(cli.seed, streams::WEIGHTS))?;
            let mut w = output(cli.out.as_deref())?;
            let mut h = header(cli, &p)?;
            h.push(format!("# residual_estimate: {}", d.residual_estimate));
            let rows = (0..d.len()).map(|i| vec![i as f64, d.weights[i], d.latent_t[i], d.latent_s[i]]);
            io::write_csv(&mut w, &h, &["index", "w", "t", "s"], rows)?;
            w.flush()?;
        }
        Command::SampleMass { draws, grid } => {
            let p = params(cli)?;
            let mut rng = stream(cli.seed, streams::MASS);
            let xs = (0..*draws).map(|_| sample_total_mass(&p, *grid, &mut rng)).collect::<Result<Vec<f64>>>()?;
            let mut w = output(cli.out.as_deref())?;
            io::write_csv(&mut w, &header(cli, &p)?, &["draw", "total_mass"], xs.iter().enumerate().map(|(i, x)| vec![i as f64, *x]))?;
            w.flush()?;
        }
        Command::SampleGraph { n, method } => sample_graph(cli, *n, *method)?,
        Command::Sweep(a) => sweep(cli, a)?,
        Command::Stats { edges, j_max } => {
            let g = io::load_edge_list(edges)?;
            let body = stats_body(&g, *j_max);
            document_json(cli, serde_json::Value::Null, body, cli.out.as_deref())?;
        }
        Command::Psample { edges, p } => {
            let g = io::load_edge_list(edges)?;
            let (train, test) = graph::p_split(&g, *p, &mut stream(cli.seed, streams::PSAMPLE))?;
            let dir = out_dir(cli)?;
            let h = header(cli, serde_json::Value::Null)?;
            io::save_edge_list(&dir.join("train.txt"), &train, &h)?;
            io::save_edge_list(&dir.join("test.txt"), &test, &h)?;
        }
        Command::Infer(a) => infer(cli, a)?,
        Command::Diagnose { dir, split } => {
            let chains = load_chains(dir)?;
            let d = diagnostics::diagnose(&chains, *split)?;
            document_json(cli, serde_json::Value::Null, &d, cli.out.as_deref())?;
        }
        Command::Predict(a) => predict(cli, a)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct StatsBody {
    #[serde(flatten)]
    stats: GraphStats,
    /// `N_j / Σ_{k≥2} N_k` for `j = 2..=j_max`, absent without degree ≥ 2.
    tail_ratios: Option<Vec<f64>>,
}

fn stats_body(g: &SparseGraph, j_max: u64) -> StatsBody {
    StatsBody { stats: graph_stats(g), tail_ratios: graph::degree_tail_ratios(g, j_max.max(2)).ok() }
}

#[derive(Serialize)]
struct GraphBody {
    #[serde(flatten)]
    stats: StatsBody,
    total_mass: f64,
    unobserved_mass: f64,
    atoms_revealed: usize,
}

fn sample_graph(cli: &Cli, n: Option<usize>, method: Method) -> Result<()> {
    let p = params(cli)?;
    let mut rng = stream(cli.seed, streams::GRAPH);
    let g = match (method, n) {
        (Method::Exact, None) => graph::generate_mgg_graph(&p, &mut rng)?,
        (Method::Exact, Some(_)) => return Err(Error::Domain("--n applies to --method truncated".into())),
        (Method::Truncated, None) => return Err(Error::Domain("--method truncated needs --n".into())),
        (Method::Truncated, Some(0)) => graph::GeneratedGraph {
            graph: SparseGraph::empty(),
            weights: Vec::new(),
            total_mass: 0.0,
            unobserved_mass: 0.0,
            atoms_revealed: 0,
        },
        (Method::Truncated, Some(n)) => graph::generate_truncated_mgg_graph(&p, n, &mut rng)?,
    };
    let dir = out_dir(cli)?;
    io::save_edge_list(&dir.join("edges.txt"), &g.graph, &header(cli, &p)?)?;
    let body = GraphBody {
        stats: stats_body(&g.graph, 4),
        total_mass: g.total_mass,
        unobserved_mass: g.unobserved_mass,
        atoms_revealed: g.atoms_revealed,
    };
    document_json(cli, serde_json::to_value(p)?, body, Some(&dir.join("stats.json")))
}

fn sweep(cli: &Cli, a: &SweepArgs) -> Result<()> {
    let base = match &cli.params {
        Some(path) => io::read_params(path)?,
        None => MggParams::new(1.0, 0.0, 1.0, 1.0, 1.0)?,
    };
    if a.seeds == 0 || a.grid.is_empty() || a.models.is_empty() {
        return Err(Error::Domain("sweep needs at least one model, grid value and seed".into()));
    }
    let (nm, ng, ns) = (a.models.len(), a.grid.len(), a.seeds);
    let runs = parallel_map(nm * ng * ns, cli.threads, |k| {
        let (model, knob) = (a.models[k / (ng * ns)], a.grid[(k / ns) % ng]);
        let mut rng = stream(cli.seed, streams::SWEEP_BASE + k as u64);
        let g = match model {
            Model::Mgg => graph::generate_mgg_graph(&base.with_eta(knob), &mut rng)?.graph,
            Model::Gg => graph::generate_gg_graph(a.gg_sigma, a.gg_tau, knob, &mut rng)?.graph,
            Model::Ba => {
                if knob.fract() != 0.0 || knob < 1.0 {
                    return Err(Error::Domain(format!("ba node count must be a positive integer, got {knob}")));
                }
                graph::generate_ba_graph(knob as usize, a.ba_m, &mut rng)?
            }
        };
        let st = graph_stats(&g);
        let r = graph::degree_tail_ratios(&g, 4).unwrap_or_else(|_| vec![f64::NAN; 3]);
        Ok([st.n_nodes as f64, st.n_edges as f64, st.prop_degree_one, r[0], r[1], r[2]])
    })?;
    let columns = [
        "model", "knob", "seeds", "n_nodes", "n_edges", "prop_degree_one", "ratio_2", "ratio_3", "ratio_4", "edges_per_node",
        "edges_per_n_log_n",
    ];
    let mut rows = Vec::new();
    for (mi, model) in a.models.iter().enumerate() {
        for (gi, knob) in a.grid.iter().enumerate() {
            let chunk = &runs[(mi * ng + gi) * ns..(mi * ng + gi + 1) * ns];
            let mean = |j: usize| {
                let v: Vec<f64> = chunk.iter().map(|r| r[j]).filter(|x| x.is_finite()).collect();
                if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 }
            };
            let (n, e) = (mean(0), mean(1));
            let name = serde_json::to_value(model)?.as_str().unwrap_or_default().to_string();
            rows.push(vec![
                name,
                knob.to_string(),
                ns.to_string(),
                n.to_string(),
                e.to_string(),
                mean(2).to_string(),
                mean(3).to_string(),
                mean(4).to_string(),
                mean(5).to_string(),
                (e / n).to_string(),
                (e / (n * n.ln())).to_string(),
            ]);
        }
    }
    let mut w = output(cli.out.as_deref())?;
    io::write_csv(&mut w, &header(cli, &base)?, &columns, rows)?;
    w.flush()?;
    Ok(())
}

fn infer(cli: &Cli, a: &InferArgs) -> Result<()> {
    let g = io::load_edge_list(&a.edges)?;
    let mut config: McmcConfig = match &a.config {
        Some(p) => io::read_json(p)?,
        None => McmcConfig::default(),
    };
    if let Some(n) = a.iters {
        config.n_iters = n;
    }
    if let Some(b) = a.burn_in {
        config.burn_in = b;
    }
    if let Some(t) = a.thin_to {
        config.thin_to = t;
    }
    config.validate()?;
    if a.chains == 0 {
        return Err(Error::Domain("--chains must be at least 1".into()));
    }
    let dir = out_dir(cli)?;
    let h = header(cli, &config)?;
    let chains = parallel_map(a.chains, cli.threads, |k| run_chain(&g, &config, cli.seed, k as u64))?;
    for (k, out) in chains.iter().enumerate() {
        let mut w = BufWriter::new(File::create(dir.join(format!("chain_{k}.csv")))?);
        io::write_chain_csv(&mut w, &h, out)?;
        w.flush()?;
        let labels: Vec<u64> = out.tracked_nodes.iter().map(|&i| g.label(i)).collect();
        let mut w = BufWriter::new(File::create(dir.join(format!("chain_{k}_nodes.csv")))?);
        io::write_tracked_csv(&mut w, &h, out, &labels)?;
        w.flush()?;
        io::write_json(&dir.join(format!("chain_{k}.json")), out)?;
    }
    let d = diagnostics::diagnose(&chains, a.split)?;
    document_json(cli, serde_json::to_value(&config)?, &d, Some(&dir.join("diagnostics.json")))?;
    if let Some((it, msg)) = chains.iter().find_map(|c| c.aborted.clone()) {
        return Err(Error::Numeric(format!("a chain stopped at iteration {it}: {msg}")));
    }
    Ok(())
}

fn load_chains(dir: &Path) -> Result<Vec<ChainOutput>> {
    let mut out = Vec::new();
    for k in 0.. {
        let path = dir.join(format!("chain_{k}.json"));
        if !path.exists() {
            break;
        }
        out.push(io::read_json(&path)?);
    }
    if out.is_empty() {
        return Err(Error::Domain(format!("no chain_<k>.json files in {}", dir.display())));
    }
    Ok(out)
}

fn predict(cli: &Cli, a: &PredictArgs) -> Result<()> {
    let chains = load_chains(&a.posterior)?;
    let draws: Vec<Hyperparams> = chains
        .iter()
        .flat_map(|c| c.samples.iter().map(|s| Hyperparams { beta: s.beta, c: s.c, eta: s.eta }))
        .collect();
    let eta_scale = match a.match_p {
        Some(p) => diagnostics::eta_scale_for_p(p)?,
        None => a.eta_scale.unwrap_or(1.0),
    };
    let graphs = diagnostics::posterior_predictive(&draws, a.n_graphs, eta_scale, a.truncation, cli.seed, cli.threads)?;
    let mut w = output(cli.out.as_deref())?;
    io::write_predictive_csv(&mut w, &header(cli, serde_json::json!({ "eta_scale": eta_scale }))?, &graphs)?;
    w.flush()?;
    Ok(())
}
