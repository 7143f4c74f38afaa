//! Structured (0–1) matrices, discretization of continuous models, and the
//! networked system structure `(U ⊗ A, D_C)`.
//!
//! Convention: pattern entry `(i, j)` means state `i` depends on state `j`,
//! i.e. the system digraph has the edge `j -> i`.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::digraph::Digraph;
use crate::error::{Error, Result};

/// Default relative tolerance for deciding that a numeric entry is nonzero.
pub const DEFAULT_STRUCTURE_TOL: f64 = 1e-9;

/// Condition numbers above this trigger a warning in Tustin discretization.
pub const TUSTIN_CONDITION_WARN: f64 = 1e12;

/// A sparsity pattern whose entries may carry a numeric weight.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMatrix {
    rows: usize,
    cols: usize,
    entries: BTreeMap<(usize, usize), Option<f64>>,
}

impl StructuredMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        StructuredMatrix {
            rows,
            cols,
            entries: BTreeMap::new(),
        }
    }

    pub fn from_positions<I>(rows: usize, cols: usize, positions: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut m = Self::new(rows, cols);
        for (r, c) in positions {
            m.insert(r, c)?;
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_positions(n, n, (0..n).map(|i| (i, i))).expect("diagonal in range")
    }

    /// Adds an unweighted position. Re-inserting an existing position is a no-op.
    pub fn insert(&mut self, r: usize, c: usize) -> Result<()> {
        self.check(r, c)?;
        self.entries.entry((r, c)).or_insert(None);
        Ok(())
    }

    pub fn insert_weighted(&mut self, r: usize, c: usize, w: f64) -> Result<()> {
        self.check(r, c)?;
        self.entries.insert((r, c), Some(w));
        Ok(())
    }

    pub fn remove(&mut self, r: usize, c: usize) -> bool {
        self.entries.remove(&(r, c)).is_some()
    }

    fn check(&self, r: usize, c: usize) -> Result<()> {
        if r >= self.rows || c >= self.cols {
            return Err(Error::invalid(format!(
                "position ({r}, {c}) out of range for {}x{} pattern",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.entries.contains_key(&(r, c))
    }

    pub fn weight(&self, r: usize, c: usize) -> Option<f64> {
        self.entries.get(&(r, c)).copied().flatten()
    }

    /// Positions in row-major order.
    pub fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.keys().copied()
    }

    /// Column indices present in row `r`, ascending.
    pub fn row_support(&self, r: usize) -> Vec<usize> {
        self.entries
            .range((r, 0)..(r + 1, 0))
            .map(|(&(_, c), _)| c)
            .collect()
    }

    /// Row-wise adjacency lists: `out[r]` holds the columns of row `r`.
    pub fn row_lists(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.rows];
        for (r, c) in self.positions() {
            out[r].push(c);
        }
        out
    }

    /// System digraph of a square pattern: edge `j -> i` for every entry `(i, j)`.
    pub fn to_digraph(&self) -> Result<Digraph> {
        if !self.is_square() {
            return Err(Error::invalid(format!(
                "system digraph needs a square pattern, got {}x{}",
                self.rows, self.cols
            )));
        }
        Digraph::from_edges(self.rows, self.positions().map(|(i, j)| (j, i)))
    }

    /// Inverse of [`StructuredMatrix::to_digraph`].
    pub fn from_digraph(g: &Digraph) -> Self {
        let n = g.node_count();
        Self::from_positions(n, n, g.edges().map(|(s, t)| (t, s))).expect("edges in range")
    }

    pub fn with_diagonal(&self) -> Self {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m.entries.entry((i, i)).or_insert(None);
        }
        m
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EntryRepr {
    Plain((usize, usize)),
    Weighted((usize, usize, f64)),
}

#[derive(Serialize, Deserialize)]
struct StructuredRepr {
    rows: usize,
    cols: usize,
    entries: Vec<EntryRepr>,
}

impl Serialize for StructuredMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let entries = self
            .entries
            .iter()
            .map(|(&(r, c), w)| match w {
                Some(w) => EntryRepr::Weighted((r, c, *w)),
                None => EntryRepr::Plain((r, c)),
            })
            .collect();
        StructuredRepr {
            rows: self.rows,
            cols: self.cols,
            entries,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StructuredMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = StructuredRepr::deserialize(d)?;
        let mut m = StructuredMatrix::new(repr.rows, repr.cols);
        for e in repr.entries {
            let res = match e {
                EntryRepr::Plain((r, c)) => m.insert(r, c),
                EntryRepr::Weighted((r, c, w)) => m.insert_weighted(r, c, w),
            };
            res.map_err(serde::de::Error::custom)?;
        }
        Ok(m)
    }
}

/// States missing their self-loop.
pub fn missing_self_loops(a: &StructuredMatrix) -> Result<Vec<usize>> {
    if !a.is_square() {
        return Err(Error::invalid(format!(
            "self-damped check needs a square pattern, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    Ok((0..a.rows()).filter(|&i| !a.contains(i, i)).collect())
}

pub fn is_self_damped(a: &StructuredMatrix) -> Result<bool> {
    missing_self_loops(a).map(|m| m.is_empty())
}

pub(crate) fn require_self_damped(a: &StructuredMatrix) -> Result<()> {
    let missing = missing_self_loops(a)?;
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::NotSelfDamped {
            missing_self_loops: missing,
        })
    }
}

/// Continuous-time model `x' = Ā x` sampled every `sample_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSystem {
    a_bar: DMatrix<f64>,
    sample_time: f64,
}

impl ContinuousSystem {
    pub fn new(a_bar: DMatrix<f64>, sample_time: f64) -> Result<Self> {
        if !a_bar.is_square() || a_bar.nrows() == 0 {
            return Err(Error::invalid(format!(
                "system matrix must be square and nonempty, got {}x{}",
                a_bar.nrows(),
                a_bar.ncols()
            )));
        }
        if !(sample_time.is_finite() && sample_time > 0.0) {
            return Err(Error::invalid(format!(
                "sample time must be positive and finite, got {sample_time}"
            )));
        }
        if a_bar.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("system matrix has non-finite entries"));
        }
        Ok(ContinuousSystem { a_bar, sample_time })
    }

    pub fn a_bar(&self) -> &DMatrix<f64> {
        &self.a_bar
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }
}

/// Forward Euler: `I + T Ā`.
pub fn euler_discretize(sys: &ContinuousSystem) -> DMatrix<f64> {
    let n = sys.a_bar.nrows();
    DMatrix::identity(n, n) + &sys.a_bar * sys.sample_time
}

/// Bilinear transform: `(I - T/2 Ā)^{-1} (I + T/2 Ā)`.
pub fn tustin_discretize(sys: &ContinuousSystem) -> Result<DMatrix<f64>> {
    let n = sys.a_bar.nrows();
    let half = &sys.a_bar * (sys.sample_time / 2.0);
    let eye = DMatrix::<f64>::identity(n, n);
    let lhs = &eye - &half;
    let rhs = &eye + &half;

    let singular = Error::Singular {
        sample_time: sys.sample_time,
    };
    let sv = lhs.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if smin == 0.0 || !(smax / smin).is_finite() {
        return Err(singular);
    }
    let cond = smax / smin;
    if cond > TUSTIN_CONDITION_WARN {
        log::warn!("I - (T/2)A is ill-conditioned (condition number {cond:.3e})");
    }
    lhs.lu().solve(&rhs).ok_or(singular)
}

/// Pattern of entries with magnitude strictly above `tol`.
pub fn structure_of(m: &DMatrix<f64>, tol: f64) -> Result<StructuredMatrix> {
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::invalid(format!("tolerance must be nonnegative, got {tol}")));
    }
    let mut out = StructuredMatrix::new(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)].abs() > tol {
                out.insert(i, j)?;
            }
        }
    }
    Ok(out)
}

/// [`structure_of`] with `rel_tol` scaled by the largest entry magnitude.
pub fn structure_of_relative(m: &DMatrix<f64>, rel_tol: f64) -> Result<StructuredMatrix> {
    let scale = m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    structure_of(m, rel_tol * scale)
}

/// Patterns of `U ⊗ A` and of the block-diagonal `D_C`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkedStructure {
    pub kron_pattern: StructuredMatrix,
    pub dc_pattern: StructuredMatrix,
}

/// Neighborhood of agent `i`: every `j` with `U[i][j]` present, plus `i`.
pub fn neighborhood(u: &StructuredMatrix, i: usize) -> BTreeSet<usize> {
    let mut nb: BTreeSet<usize> = u.row_support(i).into_iter().collect();
    nb.insert(i);
    nb
}

pub(crate) fn check_network_dims(
    a: &StructuredMatrix,
    c: &StructuredMatrix,
    u: &StructuredMatrix,
) -> Result<()> {
    if !a.is_square() {
        return Err(Error::invalid(format!(
            "system pattern must be square, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !u.is_square() {
        return Err(Error::invalid(format!(
            "network pattern must be square, got {}x{}",
            u.rows(),
            u.cols()
        )));
    }
    if c.cols() != a.rows() || c.rows() != u.rows() {
        return Err(Error::invalid(format!(
            "measurement pattern is {}x{}, expected {}x{}",
            c.rows(),
            c.cols(),
            u.rows(),
            a.rows()
        )));
    }
    Ok(())
}

/// Support of `Σ_{j∈N_i} C_jᵀ C_j` for each agent `i`, as sorted
/// `(row, col)` pairs in state coordinates.
pub(crate) fn dc_block(c_rows: &[Vec<usize>], nb: &BTreeSet<usize>) -> BTreeSet<(usize, usize)> {
    let mut block = BTreeSet::new();
    for &j in nb {
        let row = &c_rows[j];
        for &p in row {
            for &q in row {
                block.insert((p, q));
            }
        }
    }
    block
}

pub fn build_networked_structure(
    a: &StructuredMatrix,
    c: &StructuredMatrix,
    u: &StructuredMatrix,
) -> Result<NetworkedStructure> {
    check_network_dims(a, c, u)?;
    let n = a.rows();
    let agents = u.rows();
    let size = agents * n;

    let mut kron = StructuredMatrix::new(size, size);
    for (i, j) in u.positions() {
        for (p, q) in a.positions() {
            kron.insert(i * n + p, j * n + q)?;
        }
    }

    let c_rows = c.row_lists();
    let mut dc = StructuredMatrix::new(size, size);
    for i in 0..agents {
        for (p, q) in dc_block(&c_rows, &neighborhood(u, i)) {
            dc.insert(i * n + p, i * n + q)?;
        }
    }

    Ok(NetworkedStructure {
        kron_pattern: kron,
        dc_pattern: dc,
    })
}
