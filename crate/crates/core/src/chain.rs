//! Transition matrices: parsing, validation and structural classification.
//!
//! A [`StochasticMatrix`] can only be obtained through
//! [`validate_stochastic`], so every downstream routine may assume finite,
//! nonnegative entries and rows that sum to one.

use std::collections::HashSet;

use nalgebra::DMatrix;
use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default row-sum tolerance for [`validate_stochastic`].
pub const DEFAULT_ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    Json,
}

/// A parsed but not yet validated square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMatrix {
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl RawMatrix {
    /// Builds a candidate from rows, labelling states `s0..s{n-1}`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let labels = default_labels(rows.len());
        Self::with_labels(labels, rows)
    }

    pub fn with_labels(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Shape("matrix has no rows".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {n} (matrix must be square)",
                    row.len()
                )));
            }
        }
        if labels.len() != n {
            return Err(Error::Shape(format!(
                "{} state labels for a {n}x{n} matrix",
                labels.len()
            )));
        }
        Ok(Self { labels, rows })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i}")).collect()
}

/// Row-stochastic transition matrix with unique state labels.
///
/// Entry `(i, j)` is the probability of moving from state `i` to state `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    labels: Vec<String>,
    entries: DMatrix<f64>,
}

impl StochasticMatrix {
    /// Validates `rows` with the default tolerance and default labels.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        validate_stochastic(RawMatrix::from_rows(rows)?, DEFAULT_ROW_SUM_TOL)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Resolves a state given either its label or its decimal index.
    pub fn state_index(&self, name: &str) -> Option<usize> {
        if let Some(i) = self.labels.iter().position(|l| l == name) {
            return Some(i);
        }
        name.parse::<usize>().ok().filter(|&i| i < self.n())
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| self.entries.row(i).iter().copied().collect())
            .collect()
    }
}

/// Parses a candidate matrix from CSV or JSON bytes.
///
/// CSV: one row per line, comma separated, `#` comment lines and blank lines
/// ignored. JSON: `{"matrix": [[...], ...], "states": [...]}` with `states`
/// optional.
pub fn parse_matrix(raw: &[u8], format: InputFormat) -> Result<RawMatrix> {
    match format {
        InputFormat::Csv => parse_csv(raw),
        InputFormat::Json => parse_json(raw),
    }
}

fn parse_csv(raw: &[u8]) -> Result<RawMatrix> {
    let text = std::str::from_utf8(raw).map_err(|e| {
        let (line, column) = position_of(raw, e.valid_up_to());
        Error::Parse {
            line,
            column,
            message: "input is not valid UTF-8".into(),
        }
    })?;

    let mut rows = Vec::new();
    for (line_idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        let mut column = 1;
        for field in line.split(',') {
            let token = field.trim();
            let token_col = column + (field.len() - field.trim_start().len());
            if token.is_empty() {
                return Err(Error::Parse {
                    line: line_idx + 1,
                    column: token_col,
                    message: "empty field".into(),
                });
            }
            let value = token.parse::<f64>().map_err(|_| Error::Value {
                line: line_idx + 1,
                column: token_col,
                message: format!("'{token}' is not a number"),
            })?;
            row.push(value);
            column += field.len() + 1;
        }
        rows.push(row);
    }
    RawMatrix::from_rows(rows)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonChain {
    matrix: Vec<Vec<serde_json::Value>>,
    #[serde(default)]
    states: Option<Vec<String>>,
}

fn parse_json(raw: &[u8]) -> Result<RawMatrix> {
    let doc: JsonChain = serde_json::from_slice(raw).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let rows = doc
        .matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, v)| {
                    v.as_f64().ok_or_else(|| Error::Value {
                        line: i + 1,
                        column: j + 1,
                        message: format!("matrix[{i}][{j}] = {v} is not a number"),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let labels = doc.states.unwrap_or_else(|| default_labels(rows.len()));
    RawMatrix::with_labels(labels, rows)
}

fn position_of(raw: &[u8], offset: usize) -> (usize, usize) {
    let before = &raw[..offset.min(raw.len())];
    let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
    let column = offset
        - before
            .iter()
            .rposition(|&b| b == b'\n')
            .map_or(0, |p| p + 1)
        + 1;
    (line, column)
}

/// Checks that `candidate` is row-stochastic and renormalizes each row.
///
/// Rows whose sum is within `tol` of 1 are divided by their sum.
pub fn validate_stochastic(candidate: RawMatrix, tol: f64) -> Result<StochasticMatrix> {
    let RawMatrix { labels, rows } = RawMatrix::with_labels(candidate.labels, candidate.rows)?;
    let n = rows.len();

    let mut seen = HashSet::with_capacity(n);
    for label in &labels {
        if label.is_empty() || !seen.insert(label.as_str()) {
            return Err(Error::Label(format!("'{label}'")));
        }
    }

    let mut entries = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::Nonnegativity {
                    row: i,
                    col: j,
                    value: p,
                });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::Stochasticity { row: i, sum, tol });
        }
        for (j, &p) in row.iter().enumerate() {
            entries[(i, j)] = p / sum;
        }
    }
    Ok(StochasticMatrix { labels, entries })
}

/// Irreducibility, period and communicating classes of a chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainStructure {
    pub irreducible: bool,
    /// Defined only for irreducible chains.
    pub period: Option<usize>,
    /// Each class sorted ascending; classes ordered by smallest member.
    pub communicating_classes: Vec<Vec<usize>>,
}

impl ChainStructure {
    pub fn is_aperiodic(&self) -> bool {
        self.period == Some(1)
    }
}

/// Classifies the directed graph with an edge `i -> j` iff `P[i][j] > 0`.
pub fn classify_structure(p: &StochasticMatrix) -> ChainStructure {
    let n = p.n();
    let adjacency = adjacency_lists(p);

    let mut graph = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for (i, succ) in adjacency.iter().enumerate() {
        for &j in succ {
            graph.add_edge(nodes[i], nodes[j], ());
        }
    }

    let mut classes: Vec<Vec<usize>> = kosaraju_scc(&graph)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|ix| ix.index()).collect();
            c.sort_unstable();
            c
        })
        .collect();
    classes.sort_unstable_by_key(|c| c[0]);

    let irreducible = classes.len() == 1;
    let period = irreducible.then(|| period_of(&adjacency));
    ChainStructure {
        irreducible,
        period,
        communicating_classes: classes,
    }
}

fn adjacency_lists(p: &StochasticMatrix) -> Vec<Vec<usize>> {
    (0..p.n())
        .map(|i| (0..p.n()).filter(|&j| p.get(i, j) > 0.0).collect())
        .collect()
}

/// gcd of `level(u) + 1 - level(v)` over all edges, with BFS levels from
/// state 0. Assumes the graph is strongly connected.
fn period_of(adjacency: &[Vec<usize>]) -> usize {
    let n = adjacency.len();
    let mut level = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::with_capacity(n);
    level[0] = 0;
    queue.push_back(0);
    while let Some(u) = queue.pop_front() {
        for &v in &adjacency[u] {
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }

    let mut g = 0usize;
    for (u, succ) in adjacency.iter().enumerate() {
        for &v in succ {
            // BFS guarantees level[v] <= level[u] + 1.
            let diff = level[u] + 1 - level[v];
            g = gcd(g, diff);
        }
    }
    g.max(1)
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
