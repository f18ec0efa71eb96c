//! File formats: edge lists, `#`-headed CSV tables, and JSON documents.
//!
//! Every table starts with `# cmd:` and `# config:` comment lines echoing
//! the command that produced it.

use crate::crm::MggParams;
use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::inference::ChainOutput;
use crate::diagnostics::PredictiveGraph;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Comment lines echoing a command line and its resolved configuration.
pub fn header_lines<T: Serialize>(cmd: &str, config: &T) -> Result<Vec<String>> {
    Ok(vec![format!("# cmd: {cmd}"), format!("# config: {}", serde_json::to_string(config)?)])
}

fn write_header<W: Write>(w: &mut W, header: &[String]) -> Result<()> {
    for line in header {
        debug_assert!(line.starts_with('#'));
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Parses an edge list: two non-negative integer ids per line, `#` comments
/// and blank lines ignored. Duplicate pairs (in either orientation) are
/// merged, and ids are compacted in increasing order with the original ids
/// kept as labels unless they already are `0..n`.
pub fn read_edge_list<R: Read>(reader: R) -> Result<SparseGraph> {
    let mut raw = Vec::new();
    for (k, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line_no = k + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut it = t.split_whitespace();
        let mut id = || -> Result<u64> {
            let tok = it.next().ok_or_else(|| Error::Parse { line: line_no, msg: "expected two node ids".into() })?;
            tok.parse::<u64>()
                .map_err(|_| Error::Parse { line: line_no, msg: format!("invalid node id `{tok}`") })
        };
        let (a, b) = (id()?, id()?);
        if it.next().is_some() {
            return Err(Error::Parse { line: line_no, msg: "expected exactly two node ids".into() });
        }
        raw.push((a, b));
    }
    let mut ids: Vec<u64> = raw.iter().flat_map(|&(a, b)| [a, b]).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() > u32::MAX as usize {
        return Err(Error::domain("too many nodes"));
    }
    let index: HashMap<u64, u32> = ids.iter().enumerate().map(|(i, &id)| (id, i as u32)).collect();
    let edges = raw.iter().map(|(a, b)| (index[a], index[b]));
    let mut g = SparseGraph::from_edges(ids.len(), edges)?;
    let identity = ids.iter().enumerate().all(|(i, &id)| i as u64 == id);
    if !identity {
        g.node_labels = Some(ids);
    }
    Ok(g)
}

pub fn load_edge_list(path: &Path) -> Result<SparseGraph> {
    read_edge_list(File::open(path)?)
}

/// Writes one `i j` line per edge using node labels.
pub fn write_edge_list<W: Write>(w: &mut W, g: &SparseGraph, header: &[String]) -> Result<()> {
    write_header(w, header)?;
    for &(i, j) in &g.edges {
        writeln!(w, "{} {}", g.label(i as usize), g.label(j as usize))?;
    }
    Ok(())
}

pub fn save_edge_list(path: &Path, g: &SparseGraph, header: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_edge_list(&mut w, g, header)?;
    w.flush()?;
    Ok(())
}

/// Writes a comma-separated table after the header lines.
pub fn write_csv<W: Write, I, R>(w: &mut W, header: &[String], columns: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: std::fmt::Display,
{
    write_header(w, header)?;
    writeln!(w, "{}", columns.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(|c| c.to_string()).collect();
        if cells.len() != columns.len() {
            return Err(Error::domain(format!("row has {} cells, expected {}", cells.len(), columns.len())));
        }
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Reads a table written by [`write_csv`]: returns column names and rows of
/// numbers.
pub fn read_csv<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (k, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = t.split(',').map(str::trim).collect();
        match &columns {
            None => columns = Some(cells.iter().map(|s| s.to_string()).collect()),
            Some(cols) => {
                if cells.len() != cols.len() {
                    return Err(Error::Parse { line: k + 1, msg: format!("expected {} cells", cols.len()) });
                }
                let row = cells
                    .iter()
                    .map(|c| c.parse::<f64>().map_err(|_| Error::Parse { line: k + 1, msg: format!("invalid number `{c}`") }))
                    .collect::<Result<Vec<f64>>>()?;
                rows.push(row);
            }
        }
    }
    Ok((columns.unwrap_or_default(), rows))
}

pub const CHAIN_COLUMNS: [&str; 6] = ["iter", "beta", "c", "eta", "w_sum", "w_star"];

/// One row per retained sample.
pub fn write_chain_csv<W: Write>(w: &mut W, header: &[String], out: &ChainOutput) -> Result<()> {
    let rows = out.samples.iter().map(|s| {
        vec![s.iter.to_string(), s.beta.to_string(), s.c.to_string(), s.eta.to_string(), s.w_sum.to_string(), s.w_star.to_string()]
    });
    write_csv(w, header, &CHAIN_COLUMNS, rows)
}

/// Retained draws of the tracked nodes: `iter`, then `w_<label>` and
/// `s_<label>` for each tracked node.
pub fn write_tracked_csv<W: Write>(w: &mut W, header: &[String], out: &ChainOutput, labels: &[u64]) -> Result<()> {
    let mut columns = vec!["iter".to_string()];
    columns.extend(labels.iter().map(|l| format!("w_{l}")));
    columns.extend(labels.iter().map(|l| format!("s_{l}")));
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let rows = out.samples.iter().enumerate().map(|(k, s)| {
        let mut row = vec![s.iter as f64];
        row.extend(&out.tracked_w[k]);
        row.extend(&out.tracked_s[k]);
        row
    });
    write_csv(w, header, &cols, rows)
}

pub const PREDICTIVE_COLUMNS: [&str; 3] = ["degree", "count", "graph_id"];

/// Degree histograms of predictive graphs in long format.
pub fn write_predictive_csv<W: Write>(w: &mut W, header: &[String], graphs: &[PredictiveGraph]) -> Result<()> {
    let rows = graphs.iter().flat_map(|g| g.degree_hist.iter().map(move |(&d, &n)| [d, n, g.graph_id as u64]));
    write_csv(w, header, &PREDICTIVE_COLUMNS, rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// mGG parameters from a flat JSON object, validated.
pub fn read_params(path: &Path) -> Result<MggParams> {
    #[derive(serde::Deserialize)]
    struct Raw {
        alpha: f64,
        tau: f64,
        beta: f64,
        c: f64,
        eta: f64,
    }
    let text = std::fs::read_to_string(path)?;
    let r: Raw = serde_json::from_str(&text).map_err(|e| Error::domain(format!("{}: {e}", path.display())))?;
    MggParams::new(r.alpha, r.tau, r.beta, r.c, r.eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::graph_stats;

    #[test]
    fn edge_list_parsing() {
        let text = "# comment\n10 20\n20 10\n\n30 30\n10 40\n";
        let g = read_edge_list(text.as_bytes()).unwrap();
        assert_eq!(g.num_nodes, 4);
        assert_eq!(g.num_edges(), 3);
        assert_eq!(g.num_self_loops(), 1);
        assert_eq!(g.node_labels.as_deref(), Some(&[10, 20, 30, 40][..]));
    }

    #[test]
    fn contiguous_ids_have_no_labels() {
        let g = read_edge_list("0 1\n1 2\n2 0\n".as_bytes()).unwrap();
        assert!(g.node_labels.is_none());
        let st = graph_stats(&g);
        assert_eq!((st.n_nodes, st.n_edges), (3, 3));
        assert_eq!(st.degree_hist.get(&2), Some(&3));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        for (text, line) in [("0 1\n1 x\n", 2), ("# a\n0\n", 2), ("0 1 2\n", 1), ("-1 2\n", 1)] {
            match read_edge_list(text.as_bytes()) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn round_trip() {
        let g = read_edge_list("5 9\n9 9\n100 5\n7 100\n".as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&mut buf, &g, &["# cmd: test".into()]).unwrap();
        let h = read_edge_list(&buf[..]).unwrap();
        assert_eq!(g, h);
    }

    #[test]
    fn empty_edge_list() {
        let g = read_edge_list("# nothing\n".as_bytes()).unwrap();
        assert_eq!(g.num_nodes, 0);
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn csv_round_trip() {
        let header = header_lines("mgg test", &serde_json::json!({"seed": 3})).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &header, &["a", "b"], vec![vec![1.5, 2.0], vec![0.1, 3e-300]]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# cmd: mgg test\n# config: {\"seed\":3}\na,b\n"));
        let (cols, rows) = read_csv(&buf[..]).unwrap();
        assert_eq!(cols, ["a", "b"]);
        assert_eq!(rows, vec![vec![1.5, 2.0], vec![0.1, 3e-300]]);
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        let mut buf = Vec::new();
        assert!(write_csv(&mut buf, &[], &["a", "b"], vec![vec![1.0]]).is_err());
        assert!(matches!(read_csv("a,b\n1,2\n3\n".as_bytes()), Err(Error::Parse { line: 3, .. })));
    }
}
