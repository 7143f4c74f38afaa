//! Minimum-cost sensor selection for self-damped systems.
//!
//! Measuring one state in every parent SCC is necessary and sufficient for
//! observability, so the agent-state costs collapse to an agent-by-parent
//! matrix (cheapest state per parent) and the selection becomes a square
//! linear assignment problem.

use itertools::Itertools;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::digraph::{parent_sccs, SccDecomposition};
use crate::error::{Error, Result};
use crate::matching::{hall_violation, hopcroft_karp};
use crate::sysmodel::StructuredMatrix;

/// Largest `N` accepted by [`brute_force_assignment`].
pub const BRUTE_FORCE_ASSIGNMENT_LIMIT: usize = 9;

/// Relative slack used for reduced-cost comparisons.
pub const DUAL_TOL: f64 = 1e-9;

fn validate_costs(m: &DMatrix<f64>, what: &str) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let x = m[(i, j)];
            if x.is_nan() || x < 0.0 {
                return Err(Error::invalid(format!(
                    "{what}[{i}][{j}] = {x} is not a nonnegative cost"
                )));
            }
        }
    }
    Ok(())
}

/// Agent-by-state measurement costs; `+inf` marks a forbidden measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementCosts {
    delta: DMatrix<f64>,
}

impl MeasurementCosts {
    pub fn new(delta: DMatrix<f64>) -> Result<Self> {
        validate_costs(&delta, "delta")?;
        Ok(MeasurementCosts { delta })
    }

    pub fn delta(&self) -> &DMatrix<f64> {
        &self.delta
    }

    pub fn agent_count(&self) -> usize {
        self.delta.nrows()
    }

    pub fn state_count(&self) -> usize {
        self.delta.ncols()
    }
}

/// Agent-by-parent-SCC costs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedCosts {
    #[serde(serialize_with = "crate::io::serialize_cost_matrix")]
    pub delta_cap: DMatrix<f64>,
    /// Cheapest state of parent column `j` for agent `i`; `None` for padding
    /// columns and for agents that cannot measure the SCC at all.
    pub argmin_state: Vec<Vec<Option<usize>>>,
    /// Decomposition component index behind each real column.
    pub parent_components: Vec<usize>,
    /// Zero-cost columns appended so surplus agents can stay idle.
    pub padding_columns: usize,
    pub state_count: usize,
}

fn reduce(costs: &MeasurementCosts, dec: &SccDecomposition, allow_padding: bool) -> Result<ReducedCosts> {
    let parents = parent_sccs(dec);
    let agents = costs.agent_count();
    if costs.state_count() != dec.node_count() {
        return Err(Error::invalid(format!(
            "delta has {} state columns but the system has {} states",
            costs.state_count(),
            dec.node_count()
        )));
    }
    if agents < parents.len() || (agents > parents.len() && !allow_padding) {
        return Err(Error::AgentCountMismatch {
            agents,
            parents: parents.len(),
        });
    }

    let delta = costs.delta();
    let mut delta_cap = DMatrix::zeros(agents, agents);
    let mut argmin_state = vec![vec![None; agents]; agents];
    for (j, &k) in parents.iter().enumerate() {
        for i in 0..agents {
            let mut best: Option<(f64, usize)> = None;
            for &m in &dec.components[k] {
                let c = delta[(i, m)];
                if c.is_finite() && best.is_none_or(|(b, _)| c < b) {
                    best = Some((c, m));
                }
            }
            delta_cap[(i, j)] = best.map_or(f64::INFINITY, |(c, _)| c);
            argmin_state[i][j] = best.map(|(_, m)| m);
        }
        if argmin_state.iter().all(|row| row[j].is_none()) {
            return Err(Error::InfeasibleScc { component: k });
        }
    }
    Ok(ReducedCosts {
        delta_cap,
        argmin_state,
        parent_components: parents.clone(),
        padding_columns: agents - parents.len(),
        state_count: dec.node_count(),
    })
}

/// Cheapest state per (agent, parent SCC). Requires exactly one agent per
/// parent SCC. Ties go to the smallest state index.
pub fn reduce_costs(costs: &MeasurementCosts, dec: &SccDecomposition) -> Result<ReducedCosts> {
    reduce(costs, dec, false)
}

/// [`reduce_costs`] that also accepts more agents than parent SCCs by
/// appending zero-cost columns; agents assigned to them take no measurement.
pub fn reduce_costs_padded(costs: &MeasurementCosts, dec: &SccDecomposition) -> Result<ReducedCosts> {
    reduce(costs, dec, true)
}

/// A minimum-cost permutation with its dual potentials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    /// Column assigned to each row.
    pub columns: Vec<usize>,
    pub total_cost: f64,
    pub row_potentials: Vec<f64>,
    pub col_potentials: Vec<f64>,
}

impl Assignment {
    /// The 0–1 assignment matrix.
    pub fn z_matrix(&self) -> Vec<Vec<u8>> {
        let n = self.columns.len();
        self.columns
            .iter()
            .map(|&c| (0..n).map(|j| u8::from(j == c)).collect())
            .collect()
    }
}

fn check_square(cost: &DMatrix<f64>) -> Result<()> {
    if !cost.is_square() {
        return Err(Error::invalid(format!(
            "assignment cost matrix must be square, got {}x{}",
            cost.nrows(),
            cost.ncols()
        )));
    }
    if cost.iter().any(|x| x.is_nan() || *x == f64::NEG_INFINITY) {
        return Err(Error::invalid("assignment costs must be finite or +inf"));
    }
    Ok(())
}

fn finite_adjacency(cost: &DMatrix<f64>) -> Vec<Vec<usize>> {
    (0..cost.nrows())
        .map(|i| (0..cost.ncols()).filter(|&j| cost[(i, j)].is_finite()).collect())
        .collect()
}

fn require_feasible(cost: &DMatrix<f64>) -> Result<()> {
    let adj = finite_adjacency(cost);
    let m = hopcroft_karp(&adj, cost.ncols());
    match hall_violation(&adj, &m) {
        Some((rows, columns)) => Err(Error::InfeasibleAssignment { rows, columns }),
        None => Ok(()),
    }
}

fn permutation_cost(cost: &DMatrix<f64>, columns: &[usize]) -> f64 {
    columns.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum()
}

fn tight_tol(cost: &DMatrix<f64>) -> f64 {
    let scale = cost
        .iter()
        .filter(|x| x.is_finite())
        .fold(1.0f64, |acc, x| acc.max(x.abs()));
    DUAL_TOL * scale
}

/// Shortest augmenting paths with row/column potentials, O(N³).
fn augmenting_paths(cost: &DMatrix<f64>) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = cost.nrows();
    // 1-based with a virtual column 0, as in the classic formulation
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut mate = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        mate[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = mate[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            // feasibility was checked up front, so a finite step exists
            debug_assert!(delta.is_finite());
            for j in 0..=n {
                if used[j] {
                    u[mate[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if mate[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            mate[j0] = mate[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut columns = vec![0usize; n];
    for j in 1..=n {
        columns[mate[j] - 1] = j - 1;
    }
    (columns, u[1..].to_vec(), v[1..].to_vec())
}

/// Rewrites an optimal assignment into the lexicographically smallest one
/// among all permutations that are tight for the given potentials.
fn lexicographic_tight(
    cost: &DMatrix<f64>,
    columns: &mut [usize],
    u: &[f64],
    v: &[f64],
    tol: f64,
) {
    let n = columns.len();
    let tight: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| cost[(i, j)].is_finite() && cost[(i, j)] - u[i] - v[j] <= tol)
                .collect()
        })
        .collect();
    let mut row_of = vec![0usize; n];
    for (i, &j) in columns.iter().enumerate() {
        row_of[j] = i;
    }

    for i in 0..n {
        let freed = columns[i];
        for &j in tight[i].iter().take_while(|&&j| j < freed) {
            let r = row_of[j];
            if r < i {
                continue;
            }
            // alternating path from row r to the freed column through rows > i
            let mut prev_row = vec![usize::MAX; n];
            let mut via_col = vec![usize::MAX; n];
            let mut queue = std::collections::VecDeque::from([r]);
            prev_row[r] = r;
            let mut end: Option<(usize, usize)> = None;
            'search: while let Some(x) = queue.pop_front() {
                for &c in &tight[x] {
                    if c == j {
                        continue;
                    }
                    if c == freed {
                        end = Some((x, c));
                        break 'search;
                    }
                    let y = row_of[c];
                    if y > i && prev_row[y] == usize::MAX {
                        prev_row[y] = x;
                        via_col[y] = c;
                        queue.push_back(y);
                    }
                }
            }
            if let Some((mut x, mut c)) = end {
                loop {
                    columns[x] = c;
                    row_of[c] = x;
                    if x == r {
                        break;
                    }
                    c = via_col[x];
                    x = prev_row[x];
                }
                columns[i] = j;
                row_of[j] = i;
                break;
            }
        }
    }
}

/// Minimum-cost perfect assignment of rows to columns.
///
/// `+inf` entries are forbidden cells. Among optimal permutations the one
/// with the lexicographically smallest column sequence is returned.
pub fn hungarian(cost: &DMatrix<f64>) -> Result<Assignment> {
    check_square(cost)?;
    require_feasible(cost)?;
    let (mut columns, u, v) = augmenting_paths(cost);
    lexicographic_tight(cost, &mut columns, &u, &v, tight_tol(cost));
    Ok(Assignment {
        total_cost: permutation_cost(cost, &columns),
        columns,
        row_potentials: u,
        col_potentials: v,
    })
}

/// First cell where the potentials fail `u_i + v_j <= c_ij` (or equality on
/// an assigned cell), if any.
pub fn dual_certificate_violation(cost: &DMatrix<f64>, a: &Assignment) -> Option<(usize, usize)> {
    let n = a.columns.len();
    for i in 0..n {
        for j in 0..n {
            let c = cost[(i, j)];
            if !c.is_finite() {
                continue;
            }
            let slack = c - a.row_potentials[i] - a.col_potentials[j];
            let tol = DUAL_TOL * c.abs().max(1.0);
            if slack < -tol || (a.columns[i] == j && slack > tol) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Exhaustive search over all permutations, first optimum in lexicographic
/// order. Row costs are summed in the same order as [`hungarian`].
pub fn brute_force_assignment(cost: &DMatrix<f64>) -> Result<(f64, Vec<usize>)> {
    check_square(cost)?;
    let n = cost.nrows();
    if n > BRUTE_FORCE_ASSIGNMENT_LIMIT {
        return Err(Error::SizeGuard {
            size: n,
            limit: BRUTE_FORCE_ASSIGNMENT_LIMIT,
        });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in (0..n).permutations(n) {
        let c = permutation_cost(cost, &perm);
        if c.is_finite() && best.as_ref().is_none_or(|(b, _)| c < *b) {
            best = Some((c, perm));
        }
    }
    match best {
        Some(b) => Ok(b),
        None => {
            require_feasible(cost)?;
            unreachable!("a feasible matrix has a finite permutation")
        }
    }
}

/// Measurement pattern `C` (agents x states): each agent measures the
/// cheapest state of its assigned parent SCC; padding assignments measure
/// nothing.
pub fn assignment_to_measurement(a: &Assignment, reduced: &ReducedCosts) -> Result<StructuredMatrix> {
    let agents = reduced.argmin_state.len();
    if a.columns.len() != agents {
        return Err(Error::invalid(format!(
            "assignment has {} rows, reduction has {agents}",
            a.columns.len()
        )));
    }
    let mut c = StructuredMatrix::new(agents, reduced.state_count);
    for (i, &j) in a.columns.iter().enumerate() {
        if j < reduced.parent_components.len() {
            let s = reduced.argmin_state[i][j].ok_or_else(|| {
                Error::invalid(format!("agent {i} was assigned an SCC it cannot measure"))
            })?;
            c.insert(i, s)?;
        }
    }
    Ok(c)
}
