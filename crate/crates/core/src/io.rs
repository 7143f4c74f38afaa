//! File formats: edge lists, JSON matrices with `"inf"` markers, and the
//! problem description consumed by the command-line tool.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::digraph::Digraph;
use crate::error::{Error, Result};
use crate::sysmodel::StructuredMatrix;

/// Edge-list file contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeList {
    pub node_count: usize,
    pub edges: Vec<(usize, usize)>,
}

impl EdgeList {
    /// Builds the digraph and reports how many duplicate edges were dropped.
    pub fn to_digraph(&self) -> Result<(Digraph, usize)> {
        Digraph::from_edges_counting(self.node_count, self.edges.iter().copied())
    }
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Parses `nodes <n>` followed by `source target` lines. `#` starts a
/// comment line; blank lines are skipped. Indices are 0-based.
pub fn parse_edge_list(text: &str) -> Result<EdgeList> {
    let mut node_count: Option<usize> = None;
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = Vec::new();
        let mut col = 0;
        for piece in raw.split(char::is_whitespace) {
            if !piece.is_empty() {
                tokens.push((col + 1, piece));
            }
            col += piece.len() + 1;
        }
        let number = |(c, tok): (usize, &str)| {
            tok.parse::<usize>()
                .map_err(|_| parse_err(line_no, c, format!("expected a nonnegative integer, found `{tok}`")))
        };

        match node_count {
            None => {
                if tokens.len() != 2 || tokens[0].1 != "nodes" {
                    return Err(parse_err(line_no, tokens[0].0, "expected header `nodes <n>`"));
                }
                let n = number(tokens[1])?;
                if n == 0 {
                    return Err(parse_err(line_no, tokens[1].0, "node count must be positive"));
                }
                node_count = Some(n);
            }
            Some(n) => {
                if tokens.len() != 2 {
                    return Err(parse_err(line_no, tokens[0].0, "expected `source target`"));
                }
                let s = number(tokens[0])?;
                let t = number(tokens[1])?;
                for (v, (c, _)) in [(s, tokens[0]), (t, tokens[1])] {
                    if v >= n {
                        return Err(parse_err(line_no, c, format!("node {v} out of range for {n} nodes")));
                    }
                }
                edges.push((s, t));
            }
        }
    }
    let node_count = node_count.ok_or_else(|| parse_err(1, 1, "missing header `nodes <n>`"))?;
    Ok(EdgeList { node_count, edges })
}

/// Writes the edge-list format.
pub fn format_edge_list(g: &Digraph) -> String {
    let mut out = format!("nodes {}\n", g.node_count());
    for (s, t) in g.edges() {
        out.push_str(&format!("{s} {t}\n"));
    }
    out
}

fn cost_entry(v: &Value, allow_star: bool) -> std::result::Result<f64, String> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| format!("bad number {n}")),
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
            "*" if allow_star => Ok(f64::NAN),
            other => Err(format!("unexpected string \"{other}\"")),
        },
        other => Err(format!("expected a number or \"inf\", found {other}")),
    }
}

/// Reads a JSON 2-D array into a matrix. `"inf"` strings become `+inf`;
/// when `allow_star` is set, `"*"` becomes NaN (used for ignored diagonals).
pub fn matrix_from_json(v: &Value, allow_star: bool) -> std::result::Result<DMatrix<f64>, String> {
    let rows = v.as_array().ok_or("matrix must be an array of rows")?;
    let nrows = rows.len();
    let ncols = rows
        .first()
        .and_then(Value::as_array)
        .map_or(0, Vec::len);
    let mut m = DMatrix::zeros(nrows, ncols);
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| format!("row {i} is not an array"))?;
        if row.len() != ncols {
            return Err(format!("row {i} has {} entries, expected {ncols}", row.len()));
        }
        for (j, x) in row.iter().enumerate() {
            m[(i, j)] = cost_entry(x, allow_star).map_err(|e| format!("entry [{i}][{j}]: {e}"))?;
        }
    }
    Ok(m)
}

fn cost_value(x: f64) -> Value {
    if x == f64::INFINITY {
        Value::from("inf")
    } else if x.is_nan() {
        Value::from("*")
    } else {
        Value::from(x)
    }
}

/// Row-major JSON rendering with `"inf"` markers.
pub fn matrix_to_json(m: &DMatrix<f64>) -> Value {
    Value::Array(
        m.row_iter()
            .map(|row| Value::Array(row.iter().map(|&x| cost_value(x)).collect()))
            .collect(),
    )
}

pub(crate) fn serialize_cost_matrix<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    matrix_to_json(m).serialize(s)
}

pub(crate) fn deserialize_cost_matrix<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DMatrix<f64>, D::Error> {
    let v = Value::deserialize(d)?;
    matrix_from_json(&v, true).map_err(D::Error::custom)
}

/// Reads a matrix of finite numbers (for discretization input).
pub fn parse_numeric_matrix(text: &str) -> Result<DMatrix<f64>> {
    let v: Value = serde_json::from_str(text).map_err(json_err)?;
    let m = matrix_from_json(&v, false).map_err(Error::InvalidInput)?;
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("matrix entries must be finite"));
    }
    Ok(m)
}

pub fn json_err(e: serde_json::Error) -> Error {
    parse_err(e.line(), e.column(), e.to_string())
}

/// How the system structure is given in a problem file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SystemSource {
    /// Inline digraph; `[s, t]` means state `s` influences state `t`.
    Edges { nodes: usize, edges: Vec<(usize, usize)> },
    /// Path to an edge-list file, relative to the problem file.
    EdgeListFile { edge_list: PathBuf },
    /// Explicit pattern where `(i, j)` means state `i` depends on state `j`.
    Pattern { pattern: StructuredMatrix },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DeltaSource {
    Dense(#[serde(deserialize_with = "deserialize_cost_matrix")] DMatrix<f64>),
    /// Every cost is `default` except the listed `[agent, state, cost]` triples.
    Sparse {
        agents: usize,
        #[serde(deserialize_with = "deserialize_cost_scalar")]
        default: f64,
        #[serde(default)]
        entries: Vec<(usize, usize, Value)>,
    },
}

fn deserialize_cost_scalar<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    cost_entry(&Value::deserialize(d)?, false).map_err(D::Error::custom)
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(default)]
pub struct ProblemOptions {
    pub tol: Option<f64>,
    pub allow_extra_agents: bool,
    pub oracle_trials: Option<usize>,
    pub seed: Option<u64>,
}

fn default_true() -> bool {
    true
}

/// Problem file as written on disk.
#[derive(Debug, Clone, Deserialize)]
pub struct ProblemFile {
    pub system: SystemSource,
    #[serde(default = "default_true")]
    pub self_loops_implicit: bool,
    #[serde(default)]
    pub delta: Option<DeltaSource>,
    #[serde(default, deserialize_with = "deserialize_opt_cost_matrix")]
    pub eta: Option<DMatrix<f64>>,
    #[serde(default)]
    pub options: ProblemOptions,
}

fn deserialize_opt_cost_matrix<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<DMatrix<f64>>, D::Error> {
    deserialize_cost_matrix(d).map(Some)
}

/// A loaded, dimension-checked problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub a_pattern: StructuredMatrix,
    pub duplicate_edges: usize,
    pub delta: Option<DMatrix<f64>>,
    pub eta: Option<DMatrix<f64>>,
    pub options: ProblemOptions,
}

impl ProblemFile {
    /// Resolves file references against `base_dir` and checks dimensions.
    pub fn resolve(self, base_dir: &Path) -> Result<Problem> {
        let (mut a, duplicate_edges) = match self.system {
            SystemSource::Edges { nodes, edges } => {
                if nodes == 0 {
                    return Err(Error::invalid("system needs at least one node"));
                }
                let (g, d) = Digraph::from_edges_counting(nodes, edges)?;
                (StructuredMatrix::from_digraph(&g), d)
            }
            SystemSource::EdgeListFile { edge_list } => {
                let path = base_dir.join(edge_list);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
                let (g, d) = parse_edge_list(&text)?.to_digraph()?;
                (StructuredMatrix::from_digraph(&g), d)
            }
            SystemSource::Pattern { pattern } => {
                if !pattern.is_square() || pattern.rows() == 0 {
                    return Err(Error::invalid("system pattern must be square and nonempty"));
                }
                (pattern, 0)
            }
        };
        if self.self_loops_implicit {
            a = a.with_diagonal();
        }
        let n = a.rows();

        let delta = match self.delta {
            None => None,
            Some(DeltaSource::Dense(m)) => Some(m),
            Some(DeltaSource::Sparse {
                agents,
                default,
                entries,
            }) => {
                let mut m = DMatrix::from_element(agents, n, default);
                for (i, s, c) in entries {
                    if i >= agents || s >= n {
                        return Err(Error::invalid(format!("delta entry ({i}, {s}) out of range")));
                    }
                    m[(i, s)] = cost_entry(&c, false).map_err(Error::InvalidInput)?;
                }
                Some(m)
            }
        };
        if let Some(d) = &delta {
            if d.ncols() != n {
                return Err(Error::invalid(format!(
                    "delta has {} columns but the system has {n} states",
                    d.ncols()
                )));
            }
        }
        if let (Some(d), Some(e)) = (&delta, &self.eta) {
            if e.nrows() != d.nrows() || e.ncols() != d.nrows() {
                return Err(Error::invalid(format!(
                    "eta is {}x{} but delta has {} agents",
                    e.nrows(),
                    e.ncols(),
                    d.nrows()
                )));
            }
        }
        Ok(Problem {
            a_pattern: a,
            duplicate_edges,
            delta,
            eta: self.eta,
            options: self.options,
        })
    }
}

/// Loads a problem: a JSON problem file, or a bare edge-list file (any
/// file whose first meaningful line is the `nodes` header).
pub fn load_problem(path: &Path) -> Result<Problem> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'));
    if first.is_some_and(|l| l.starts_with("nodes")) {
        let (g, duplicate_edges) = parse_edge_list(&text)?.to_digraph()?;
        return Ok(Problem {
            a_pattern: StructuredMatrix::from_digraph(&g).with_diagonal(),
            duplicate_edges,
            delta: None,
            eta: None,
            options: ProblemOptions::default(),
        });
    }
    let file: ProblemFile = serde_json::from_str(&text).map_err(json_err)?;
    let base = path.parent().unwrap_or(Path::new("."));
    file.resolve(base)
}
