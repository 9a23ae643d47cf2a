//! Plain-text edge lists, label files and id-map sidecars.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{Graph, Partition};
use crate::error::{Error, Result};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Non-blank, non-comment lines with 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_pair<T: std::str::FromStr>(source: &str, line_no: usize, line: &str) -> Result<(T, T)> {
    let parse_err = |message: String| Error::Parse {
        path: source.to_string(),
        line: line_no,
        message,
    };
    let mut toks = line.split_whitespace();
    let (Some(a), Some(b), None) = (toks.next(), toks.next(), toks.next()) else {
        return Err(parse_err(format!("expected two fields, got {line:?}")));
    };
    let a = a
        .parse::<T>()
        .map_err(|_| parse_err(format!("invalid id {a:?}")))?;
    let b = b
        .parse::<T>()
        .map_err(|_| parse_err(format!("invalid id {b:?}")))?;
    Ok((a, b))
}

fn parse_raw_edges(text: &str, source: &str) -> Result<Vec<(u64, u64)>> {
    data_lines(text)
        .map(|(no, line)| {
            let (u, v) = parse_pair::<u64>(source, no, line)?;
            if u == v {
                return Err(Error::validation(format!(
                    "{source}:{no}: self-loop on node {u}"
                )));
            }
            Ok((u, v))
        })
        .collect()
}

/// Parses an edge list with 0-based node ids. `n = max id + 1` unless
/// `n_hint` is larger.
pub fn parse_edge_list(text: &str, source: &str, n_hint: Option<usize>) -> Result<Graph> {
    let raw = parse_raw_edges(text, source)?;
    let max_id = raw.iter().map(|&(u, v)| u.max(v)).max();
    let n = match max_id {
        Some(m) => (m as usize + 1).max(n_hint.unwrap_or(0)),
        None => n_hint.unwrap_or(0),
    };
    let edges: Vec<(usize, usize)> = raw.iter().map(|&(u, v)| (u as usize, v as usize)).collect();
    Graph::from_edges(n, &edges)
}

pub fn load_edge_list(path: impl AsRef<Path>, n_hint: Option<usize>) -> Result<Graph> {
    let path = path.as_ref();
    parse_edge_list(&read(path)?, &path.display().to_string(), n_hint)
}

/// Mapping from dense node ids back to the ids used in the source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdMap {
    original: Vec<u64>,
}

impl IdMap {
    pub fn original_id(&self, dense: usize) -> u64 {
        self.original[dense]
    }

    pub fn dense_id(&self, original: u64) -> Option<usize> {
        self.original.binary_search(&original).ok()
    }

    pub fn len(&self) -> usize {
        self.original.len()
    }

    pub fn is_empty(&self) -> bool {
        self.original.is_empty()
    }

    /// True when every id already equals its dense index.
    pub fn is_identity(&self) -> bool {
        self.original.iter().enumerate().all(|(i, &o)| o == i as u64)
    }
}

/// Loads an edge list with arbitrary (sparse or 1-based) ids, remapping them
/// densely in ascending id order.
pub fn load_edge_list_remapped(path: impl AsRef<Path>) -> Result<(Graph, IdMap)> {
    let path = path.as_ref();
    let raw = parse_raw_edges(&read(path)?, &path.display().to_string())?;
    let ids: BTreeSet<u64> = raw.iter().flat_map(|&(u, v)| [u, v]).collect();
    let map = IdMap {
        original: ids.into_iter().collect(),
    };
    let edges: Vec<(usize, usize)> = raw
        .iter()
        .map(|&(u, v)| (map.dense_id(u).unwrap(), map.dense_id(v).unwrap()))
        .collect();
    let g = Graph::from_edges(map.len().max(1), &edges)?;
    Ok((g, map))
}

/// Writes `original_id dense_id` lines.
pub fn save_id_map(map: &IdMap, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for (dense, orig) in map.original.iter().enumerate() {
        writeln!(out, "{orig} {dense}").unwrap();
    }
    write(path.as_ref(), &out)
}

/// Writes the canonical edge list: sorted unique `u v` pairs with `u < v`.
pub fn save_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    if !g.is_simple() {
        return Err(Error::validation(
            "only binary symmetric graphs can be written as edge lists",
        ));
    }
    let mut out = format!("# nodes {}\n", g.n());
    for (u, v) in g.edges() {
        writeln!(out, "{u} {v}").unwrap();
    }
    write(path.as_ref(), &out)
}

/// Parses `node_id label_id` lines; labels are re-indexed densely in order of
/// first appearance by node id.
pub fn parse_labels(text: &str, source: &str, n: usize) -> Result<Partition> {
    let mut raw: Vec<Option<i64>> = vec![None; n];
    for (no, line) in data_lines(text) {
        let (node, label) = parse_pair::<i64>(source, no, line)?;
        if node < 0 || node as usize >= n {
            return Err(Error::validation(format!(
                "{source}:{no}: node {node} out of range for {n} nodes"
            )));
        }
        let slot = &mut raw[node as usize];
        if slot.is_some() {
            return Err(Error::validation(format!(
                "{source}:{no}: duplicate label for node {node}"
            )));
        }
        *slot = Some(label);
    }
    let labels = raw
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Error::validation(format!("{source}: node {i} has no label"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(Partition::from_labels(&labels))
}

pub fn load_labels(path: impl AsRef<Path>, n: usize) -> Result<Partition> {
    let path = path.as_ref();
    parse_labels(&read(path)?, &path.display().to_string(), n)
}

pub fn save_labels(part: &Partition, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for (node, label) in part.labels().iter().enumerate() {
        writeln!(out, "{node} {label}").unwrap();
    }
    write(path.as_ref(), &out)
}

/// Dense matrix as comma-separated rows, full round-trip precision.
pub fn save_matrix_csv(m: &Array2<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::with_capacity(m.len() * 8);
    for row in m.rows() {
        for (j, x) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{x}").unwrap();
        }
        out.push('\n');
    }
    write(path.as_ref(), &out)
}

pub fn parse_matrix_csv(text: &str, source: &str) -> Result<Array2<f64>> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (no, line) in data_lines(text) {
        let before = values.len();
        for tok in line.split(',') {
            let x = tok.trim().parse::<f64>().map_err(|_| Error::Parse {
                path: source.to_string(),
                line: no,
                message: format!("invalid number {tok:?}"),
            })?;
            values.push(x);
        }
        let width = values.len() - before;
        if *cols.get_or_insert(width) != width {
            return Err(Error::Parse {
                path: source.to_string(),
                line: no,
                message: format!("expected {} columns, got {width}", cols.unwrap()),
            });
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, cols.unwrap_or(0)), values)
        .map_err(|e| Error::validation(format!("{source}: {e}")))
}

pub fn load_matrix_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    parse_matrix_csv(&read(path)?, &path.display().to_string())
}
