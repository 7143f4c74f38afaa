//! Structural observability: output connectivity plus structural rank, the
//! parent-SCC coverage test for self-damped systems, networked
//! observability of `(U ⊗ A, D_C)`, and a Monte-Carlo numeric rank oracle.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::digraph::{
    is_strongly_connected, parent_sccs, reverse_reachable_mask, scc_decompose, Digraph,
};
use crate::error::{Error, Result};
use crate::matching::hopcroft_karp;
use crate::sysmodel::{
    build_networked_structure, check_network_dims, dc_block, neighborhood, require_self_damped,
    StructuredMatrix,
};

/// Networked checks materialize `U ⊗ A` only up to this many states.
pub const MATERIALIZE_LIMIT: usize = 5000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub output_connected: bool,
    pub unreached_nodes: Vec<usize>,
    pub structurally_full_rank: bool,
    pub structural_rank: usize,
    pub observable: bool,
}

impl ObservabilityReport {
    fn new(unreached_nodes: Vec<usize>, structural_rank: usize, n: usize) -> Self {
        let output_connected = unreached_nodes.is_empty();
        let structurally_full_rank = structural_rank == n;
        ObservabilityReport {
            output_connected,
            unreached_nodes,
            structurally_full_rank,
            structural_rank,
            observable: output_connected && structurally_full_rank,
        }
    }
}

fn check_measured(n: usize, measured: &[usize]) -> Result<()> {
    match measured.iter().find(|&&s| s >= n) {
        Some(s) => Err(Error::invalid(format!("measured state {s} out of range for {n} states"))),
        None => Ok(()),
    }
}

fn unreached(g: &Digraph, targets: &[usize]) -> Vec<usize> {
    reverse_reachable_mask(g, targets)
        .into_iter()
        .enumerate()
        .filter_map(|(v, r)| (!r).then_some(v))
        .collect()
}

/// Whether every state has a directed path to a measured state; returns the
/// states that do not.
pub fn output_connected(a: &StructuredMatrix, measured: &[usize]) -> Result<(bool, Vec<usize>)> {
    let g = a.to_digraph()?;
    check_measured(g.node_count(), measured)?;
    let missing = unreached(&g, measured);
    Ok((missing.is_empty(), missing))
}

/// Size of a maximum matching between rows and columns of the pattern.
pub fn structural_rank(a: &StructuredMatrix) -> usize {
    hopcroft_karp(&a.row_lists(), a.cols()).size
}

/// Structural (column) rank of `[a; outputs]`.
fn stacked_rank(a: &StructuredMatrix, outputs: &StructuredMatrix) -> usize {
    let mut rows = a.row_lists();
    rows.extend(outputs.row_lists());
    hopcroft_karp(&rows, a.cols()).size
}

fn unit_rows(n: usize, measured: &[usize]) -> StructuredMatrix {
    StructuredMatrix::from_positions(
        measured.len(),
        n,
        measured.iter().enumerate().map(|(r, &s)| (r, s)),
    )
    .expect("measured states checked")
}

/// Both structural observability conditions for `a` with one unit
/// measurement row per measured state.
pub fn is_structurally_observable(
    a: &StructuredMatrix,
    measured: &[usize],
) -> Result<ObservabilityReport> {
    let (_, missing) = output_connected(a, measured)?;
    let n = a.rows();
    let rank = stacked_rank(a, &unit_rows(n, measured));
    Ok(ObservabilityReport::new(missing, rank, n))
}

/// Parent-SCC criterion for self-damped systems: observable iff every parent
/// SCC holds a measured state. Returns the uncovered parent components.
pub fn parent_scc_coverage(a: &StructuredMatrix, measured: &[usize]) -> Result<(bool, Vec<usize>)> {
    require_self_damped(a)?;
    let dec = scc_decompose(&a.to_digraph()?)?;
    check_measured(a.rows(), measured)?;
    let mut covered = vec![false; dec.component_count()];
    for &s in measured {
        covered[dec.component_of[s]] = true;
    }
    let uncovered: Vec<usize> = parent_sccs(&dec)
        .into_iter()
        .filter(|&k| !covered[k])
        .collect();
    Ok((uncovered.is_empty(), uncovered))
}

/// How a networked observability verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckMethod {
    /// `U ⊗ A` and `D_C` were built explicitly and checked.
    Materialized,
    /// Parent SCCs covered and the agent network strongly connected.
    CoverageAndStrongConnectivity,
    /// Output connectivity traversed on the product graph without building it.
    ImplicitProduct,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkedReport {
    #[serde(flatten)]
    pub report: ObservabilityReport,
    pub method: CheckMethod,
}

/// Observability of `(U ⊗ A, D_C)` where every agent is its own neighbor.
///
/// `c` is the `N x n` measurement pattern and `u` the `N x N` network.
pub fn networked_observability(
    a: &StructuredMatrix,
    c: &StructuredMatrix,
    u: &StructuredMatrix,
) -> Result<NetworkedReport> {
    check_network_dims(a, c, u)?;
    require_self_damped(a)?;
    let u = u.with_diagonal();
    let n = a.rows();
    let agents = u.rows();
    let size = agents * n;

    if size <= MATERIALIZE_LIMIT {
        let net = build_networked_structure(a, c, &u)?;
        let measured: Vec<usize> = (0..size).filter(|&v| net.dc_pattern.contains(v, v)).collect();
        let g = net.kron_pattern.to_digraph()?;
        let missing = unreached(&g, &measured);
        let rank = stacked_rank(&net.kron_pattern, &net.dc_pattern);
        return Ok(NetworkedReport {
            report: ObservabilityReport::new(missing, rank, size),
            method: CheckMethod::Materialized,
        });
    }

    // self-damped A and a diagonal in U put the whole diagonal in U ⊗ A
    let measured_states: Vec<usize> = c.positions().map(|(_, s)| s).collect();
    let (covered, _) = parent_scc_coverage(a, &measured_states)?;
    if covered && is_strongly_connected(&u.to_digraph()?) {
        return Ok(NetworkedReport {
            report: ObservabilityReport::new(Vec::new(), size, size),
            method: CheckMethod::CoverageAndStrongConnectivity,
        });
    }

    let missing = implicit_product_unreached(a, c, &u);
    Ok(NetworkedReport {
        report: ObservabilityReport::new(missing, size, size),
        method: CheckMethod::ImplicitProduct,
    })
}

/// Reverse reachability on the digraph of `U ⊗ A` from the diagonal support
/// of `D_C`, visiting predecessors on the fly.
fn implicit_product_unreached(a: &StructuredMatrix, c: &StructuredMatrix, u: &StructuredMatrix) -> Vec<usize> {
    let n = a.rows();
    let agents = u.rows();
    let a_rows = a.row_lists();
    let u_rows = u.row_lists();
    let c_rows = c.row_lists();

    let mut seen = vec![false; agents * n];
    let mut queue = VecDeque::new();
    for i in 0..agents {
        let block: BTreeSet<usize> = dc_block(&c_rows, &neighborhood(u, i))
            .into_iter()
            .filter_map(|(p, q)| (p == q).then_some(p))
            .collect();
        for s in block {
            seen[i * n + s] = true;
            queue.push_back(i * n + s);
        }
    }
    // node (k, q) has predecessors (i, p) for U[k][i] and A[q][p]
    while let Some(v) = queue.pop_front() {
        let (k, q) = (v / n, v % n);
        for &i in &u_rows[k] {
            for &p in &a_rows[q] {
                let w = i * n + p;
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    seen.into_iter()
        .enumerate()
        .filter_map(|(v, r)| (!r).then_some(v))
        .collect()
}

pub fn is_networked_observable(
    a: &StructuredMatrix,
    c: &StructuredMatrix,
    u: &StructuredMatrix,
) -> Result<bool> {
    networked_observability(a, c, u).map(|r| r.report.observable)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleTally {
    pub observable_trials: usize,
    pub trials: usize,
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    // two passes keep the basis orthogonal to working precision
    for _ in 0..2 {
        for q in basis {
            axpy(-dot(q, v), q, v);
        }
    }
}

/// Appends to `basis` the directions spanned by `candidates` that it does
/// not already contain, largest residual first. Returns how many were added.
fn extend_basis(basis: &mut Vec<Vec<f64>>, mut candidates: Vec<Vec<f64>>, tol: f64) -> usize {
    for v in &mut candidates {
        project_out(v, basis);
    }
    let start = basis.len();
    loop {
        let best = candidates
            .iter()
            .enumerate()
            .map(|(k, v)| (k, norm(v)))
            .max_by(|x, y| x.1.total_cmp(&y.1));
        let Some((k, len)) = best.filter(|&(_, len)| len > tol) else {
            break;
        };
        let mut q = candidates.swap_remove(k);
        q.iter_mut().for_each(|x| *x /= len);
        project_out(&mut q, basis);
        let renorm = norm(&q);
        if renorm <= 0.5 {
            // lost to cancellation; the direction was not really new
            continue;
        }
        q.iter_mut().for_each(|x| *x /= renorm);
        for v in &mut candidates {
            axpy(-dot(&q, v), &q, v);
        }
        basis.push(q);
    }
    basis.len() - start
}

/// Dimension of the row space of `[C; CA; CA²; …]`, grown one block at a
/// time: only directions new at step `k` are propagated through `A`.
/// Residuals below `16 n ε max(1, ‖A‖_F)` count as dependent.
pub(crate) fn observable_dimension(a: &DMatrix<f64>, c: &DMatrix<f64>) -> usize {
    let n = a.nrows();
    let tol = 16.0 * n as f64 * f64::EPSILON * a.norm().max(1.0);
    // row-major copy of A so `qᵀA` walks contiguous memory
    let rows: Vec<Vec<f64>> = a.row_iter().map(|r| r.iter().copied().collect()).collect();
    let mut basis = Vec::with_capacity(n);
    let c_rows = c.row_iter().map(|r| r.iter().copied().collect()).collect();
    let mut added = extend_basis(&mut basis, c_rows, tol);
    while added > 0 && basis.len() < n {
        let fresh = &basis[basis.len() - added..];
        let next: Vec<Vec<f64>> = fresh
            .iter()
            .map(|q| {
                let mut out = vec![0.0; n];
                for (k, row) in rows.iter().enumerate() {
                    if q[k] != 0.0 {
                        axpy(q[k], row, &mut out);
                    }
                }
                out
            })
            .collect();
        added = extend_basis(&mut basis, next, tol);
    }
    basis.len()
}

fn random_weight(rng: &mut ChaCha8Rng) -> f64 {
    let magnitude = rng.random_range(0.5..1.5);
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

/// Counts, over `trials` random realizations of `pattern`, how often the
/// numeric observability matrix reaches full rank.
///
/// Trial `t` draws from a ChaCha stream `t` seeded with `seed`, so the
/// tally does not depend on evaluation order.
pub fn generic_rank_oracle(
    pattern: &StructuredMatrix,
    measured: &[usize],
    trials: usize,
    seed: u64,
) -> Result<OracleTally> {
    if !pattern.is_square() {
        return Err(Error::invalid("oracle needs a square pattern"));
    }
    if trials == 0 {
        return Err(Error::invalid("oracle needs at least one trial"));
    }
    let n = pattern.rows();
    check_measured(n, measured)?;
    let measured: Vec<usize> = measured.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let mut c = DMatrix::zeros(measured.len(), n);
    for (r, &s) in measured.iter().enumerate() {
        c[(r, s)] = 1.0;
    }

    let mut observable_trials = 0;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let mut a = DMatrix::zeros(n, n);
        for (i, j) in pattern.positions() {
            a[(i, j)] = random_weight(&mut rng);
        }
        if observable_dimension(&a, &c) == n {
            observable_trials += 1;
        }
    }
    Ok(OracleTally {
        observable_trials,
        trials,
    })
}
