use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mgg"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("failed to start mgg")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn workdir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("cli_{name}"));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_params(dir: &Path, name: &str, alpha: f64, tau: f64, beta: f64, c: f64, eta: f64) {
    let text = format!(r#"{{"alpha": {alpha}, "tau": {tau}, "beta": {beta}, "c": {c}, "eta": {eta}}}"#);
    fs::write(dir.join(name), text).unwrap();
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn labels(path: &Path) -> BTreeSet<u64> {
    data_lines(&fs::read_to_string(path).unwrap())
        .iter()
        .flat_map(|l| l.split_whitespace().map(|x| x.parse::<u64>().unwrap()).collect::<Vec<_>>())
        .collect()
}

#[test]
fn sample_weights_is_deterministic_and_echoes_config() {
    let dir = workdir("weights");
    write_params(&dir, "p.json", 1.0, 0.0, 1.0, 1.0, 100.0);
    let a = ok(&dir, &["sample-weights", "--params", "p.json", "--n", "10", "--seed", "4"]);
    let b = ok(&dir, &["sample-weights", "--params", "p.json", "--n", "10", "--seed", "4"]);
    assert_eq!(a, b);
    let rows = data_lines(&a);
    assert_eq!(rows[0], "index,w,t,s");
    assert_eq!(rows.len(), 11);
    assert!(a.starts_with("# cmd: "));
    let config = a.lines().nth(1).unwrap();
    assert!(config.starts_with("# config: ") && config.contains(r#""seed":4"#) && config.contains(r#""eta":100"#));
}

#[test]
fn sample_weights_sum_is_near_mean_mass() {
    let dir = workdir("weights_sum");
    write_params(&dir, "p.json", 1.0, 0.0, 1.0, 1.0, 100.0);
    let text = ok(&dir, &["sample-weights", "--params", "p.json", "--n", "100000"]);
    let sum: f64 = data_lines(&text)[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((35.0..=65.0).contains(&sum), "sum {sum}");
}

#[test]
fn invalid_parameters_exit_with_code_two() {
    let dir = workdir("invalid");
    write_params(&dir, "bad.json", 0.5, 0.7, 1.0, 1.0, 1.0);
    let out = run(&dir, &["sample-weights", "--params", "bad.json", "--n", "5"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("tau") && msg.contains("alpha"), "{msg}");
    assert_eq!(msg.lines().count(), 1);
    let out = run(&dir, &["sample-weights", "--n", "5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&dir, &["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sample_graph_fig2_config() {
    let dir = workdir("graph");
    write_params(&dir, "p.json", 1.0, 0.0, 1.0, 1.0, 100.0);
    ok(&dir, &["sample-graph", "--params", "p.json", "--out", "a"]);
    ok(&dir, &["sample-graph", "--params", "p.json", "--out", "b"]);
    let (ea, eb) = (fs::read_to_string(dir.join("a/edges.txt")).unwrap(), fs::read_to_string(dir.join("b/edges.txt")).unwrap());
    let strip = |s: &str| s.lines().filter(|l| !l.starts_with("# ")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&ea), strip(&eb));
    let stats = json(&dir.join("a/stats.json"));
    let (n, e) = (stats["n_nodes"].as_f64().unwrap(), stats["n_edges"].as_f64().unwrap());
    assert!((1400.0..=3200.0).contains(&n) && (1700.0..=3900.0).contains(&e), "N={n} E={e}");
    assert_eq!(data_lines(&ea).len() as f64, e);
    assert!(stats["config"]["cli"]["seed"].is_u64());
}

#[test]
fn sample_graph_with_no_atoms_is_empty() {
    let dir = workdir("graph_empty");
    write_params(&dir, "p.json", 1.0, 0.0, 1.0, 1.0, 100.0);
    ok(&dir, &["sample-graph", "--params", "p.json", "--method", "truncated", "--n", "0", "--out", "g"]);
    assert!(data_lines(&fs::read_to_string(dir.join("g/edges.txt")).unwrap()).is_empty());
    let stats = json(&dir.join("g/stats.json"));
    for key in ["n_nodes", "n_edges", "n_self_loops", "max_degree"] {
        assert_eq!(stats[key].as_u64(), Some(0), "{key}");
    }
    assert_eq!(stats["prop_degree_one"].as_f64(), Some(0.0));
}

#[test]
fn sweep_rows_and_ba_density() {
    let dir = workdir("sweep");
    let text = ok(&dir, &["sweep", "--models", "mgg,gg,ba", "--grid", "50,200", "--seeds", "2", "--ba-m", "3"]);
    let rows = data_lines(&text);
    assert_eq!(rows.len(), 1 + 2 * 3);
    let cols: Vec<&str> = rows[0].split(',').collect();
    let epn = cols.iter().position(|c| *c == "edges_per_node").unwrap();
    for r in rows.iter().filter(|r| r.starts_with("ba,")) {
        let v: f64 = r.split(',').nth(epn).unwrap().parse().unwrap();
        assert!((2.5..=3.0).contains(&v), "{r}");
    }
}

#[test]
fn stats_reports_parse_errors_with_line_numbers() {
    let dir = workdir("stats");
    fs::write(dir.join("bad.txt"), "# header\n0 1\n1 2 x\n").unwrap();
    let out = run(&dir, &["stats", "--edges", "bad.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    fs::write(dir.join("tri.txt"), "0 1\n1 2\n2 0\n2 0\n").unwrap();
    let v: serde_json::Value = serde_json::from_str(&ok(&dir, &["stats", "--edges", "tri.txt"])).unwrap();
    assert_eq!(v["n_nodes"], 3);
    assert_eq!(v["n_edges"], 3);
    assert_eq!(v["component_sizes"], serde_json::json!([3]));
}

#[test]
fn psample_partitions_nodes() {
    let dir = workdir("psample");
    write_params(&dir, "p.json", 1.0, 0.0, 1.0, 1.0, 50.0);
    ok(&dir, &["sample-graph", "--params", "p.json", "--out", "g"]);
    let input = labels(&dir.join("g/edges.txt"));
    ok(&dir, &["psample", "--edges", "g/edges.txt", "--p", "1", "--out", "all"]);
    assert_eq!(labels(&dir.join("all/train.txt")), input);
    assert!(labels(&dir.join("all/test.txt")).is_empty());
    ok(&dir, &["psample", "--edges", "g/edges.txt", "--p", "0.5", "--out", "half"]);
    let (train, test) = (labels(&dir.join("half/train.txt")), labels(&dir.join("half/test.txt")));
    assert!(train.is_disjoint(&test));
    assert!(train.is_subset(&input) && test.is_subset(&input));
    assert!(!train.is_empty() && !test.is_empty());
}

#[test]
fn infer_diagnose_predict_pipeline() {
    let dir = workdir("infer");
    write_params(&dir, "p.json", 1.0, 0.0, 1.0, 1.0, 15.0);
    ok(&dir, &["sample-graph", "--params", "p.json", "--out", "g"]);
    let args = ["infer", "--edges", "g/edges.txt", "--iters", "300", "--burn-in", "100", "--thin-to", "20", "--out", "post"];
    ok(&dir, &args);
    for k in 0..3 {
        let csv = fs::read_to_string(dir.join(format!("post/chain_{k}.csv"))).unwrap();
        let rows = data_lines(&csv);
        assert_eq!(rows[0], "iter,beta,c,eta,w_sum,w_star");
        assert_eq!(rows.len(), 21);
        assert!(dir.join(format!("post/chain_{k}_nodes.csv")).exists());
    }
    let d = json(&dir.join("post/diagnostics.json"));
    assert_eq!(d["chains"], 3);
    assert!(d["r_hat"]["beta"].as_f64().unwrap() > 0.0);
    assert!(d["multi"].as_f64().is_some());
    let again: serde_json::Value = serde_json::from_str(&ok(&dir, &["diagnose", "--dir", "post"])).unwrap();
    assert_eq!(again["r_hat"], d["r_hat"]);

    let pred = ok(&dir, &["predict", "--posterior", "post", "--n-graphs", "5", "--seed", "3"]);
    assert_eq!(pred, ok(&dir, &["predict", "--posterior", "post", "--n-graphs", "5", "--seed", "3"]));
    let rows = data_lines(&pred);
    assert_eq!(rows[0], "degree,count,graph_id");
    let ids: BTreeSet<&str> = rows[1..].iter().map(|r| r.rsplit(',').next().unwrap()).collect();
    assert!(ids.len() <= 5 && !ids.is_empty());
    let scaled = ok(&dir, &["predict", "--posterior", "post", "--n-graphs", "2", "--match-p", "0.25"]);
    assert!(scaled.lines().nth(1).unwrap().contains(r#""eta_scale":3.0"#));
    let help = String::from_utf8(bin().args(["predict", "--help"]).output().unwrap().stdout).unwrap();
    assert!(help.contains("[default: 200]"));
}

#[test]
fn single_chain_diagnostics_explain_missing_r_hat() {
    let dir = workdir("infer_one");
    fs::write(dir.join("e.txt"), "0 1\n1 2\n2 2\n3 1\n").unwrap();
    ok(&dir, &["infer", "--edges", "e.txt", "--iters", "40", "--burn-in", "0", "--thin-to", "4", "--chains", "1", "--out", "p"]);
    let d = json(&dir.join("p/diagnostics.json"));
    assert!(d["note"].as_str().unwrap().contains("two chains"));
    assert_eq!(d["r_hat"], serde_json::json!({}));
    assert!(d["multi"].is_null());
    fs::write(dir.join("bad.txt"), "0 1\noops\n").unwrap();
    let out = run(&dir, &["infer", "--edges", "bad.txt", "--out", "q"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn header_echo_reproduces_output() {
    let dir = workdir("replay");
    write_params(&dir, "p.json", 1.0, 0.0, 1.0, 2.0, 5.0);
    let first = ok(&dir, &["sample-mass", "--params", "p.json", "--draws", "20", "--seed", "9", "--out", "m.csv"]);
    assert!(first.is_empty());
    let text = fs::read_to_string(dir.join("m.csv")).unwrap();
    let cmd = text.lines().next().unwrap().strip_prefix("# cmd: ").unwrap();
    let argv: Vec<&str> = cmd.split_whitespace().skip(1).collect();
    fs::rename(dir.join("m.csv"), dir.join("first.csv")).unwrap();
    ok(&dir, &argv);
    assert_eq!(fs::read(dir.join("m.csv")).unwrap(), text.into_bytes());
}
