//! Minimum-cost communication network over bidirectional links.
//!
//! With symmetric link costs the cheapest strongly connected agent network
//! is a bidirected minimum spanning tree (Kruskal, union-find).

use nalgebra::DMatrix;
use serde::Serialize;

use crate::digraph::undirected_components;
use crate::error::{Error, Result};
use crate::sysmodel::StructuredMatrix;

/// Relative tolerance for `|η_ij - η_ji|`.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Largest `N` accepted by [`brute_force_mst`].
pub const BRUTE_FORCE_MST_LIMIT: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymmetryVerdict {
    pub symmetric: bool,
    pub first_violation: Option<(usize, usize)>,
}

/// Scans the strict upper triangle row by row. Diagonal entries are ignored;
/// two `+inf` entries count as equal.
pub fn check_symmetric(eta: &DMatrix<f64>, tol: f64) -> Result<SymmetryVerdict> {
    if !eta.is_square() {
        return Err(Error::invalid(format!(
            "communication costs must be square, got {}x{}",
            eta.nrows(),
            eta.ncols()
        )));
    }
    let n = eta.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (eta[(i, j)], eta[(j, i)]);
            let equal = if a.is_infinite() || b.is_infinite() {
                a == b
            } else {
                (a - b).abs() <= tol * a.abs().max(1.0)
            };
            if !equal {
                return Ok(SymmetryVerdict {
                    symmetric: false,
                    first_violation: Some((i, j)),
                });
            }
        }
    }
    Ok(SymmetryVerdict {
        symmetric: true,
        first_violation: None,
    })
}

/// Symmetric agent-to-agent link costs; `+inf` marks an unavailable link.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunicationCosts {
    eta: DMatrix<f64>,
}

impl CommunicationCosts {
    pub fn new(eta: DMatrix<f64>) -> Result<Self> {
        let verdict = check_symmetric(&eta, SYMMETRY_TOL)?;
        let n = eta.nrows();
        for i in 0..n {
            for j in 0..n {
                let x = eta[(i, j)];
                if i != j && (x.is_nan() || x < 0.0) {
                    return Err(Error::invalid(format!(
                        "eta[{i}][{j}] = {x} is not a nonnegative cost"
                    )));
                }
            }
        }
        if let Some((row, col)) = verdict.first_violation {
            return Err(Error::Asymmetric { row, col });
        }
        Ok(CommunicationCosts { eta })
    }

    pub fn agent_count(&self) -> usize {
        self.eta.nrows()
    }

    pub fn eta(&self) -> &DMatrix<f64> {
        &self.eta
    }

    /// Cost of the link `{a, b}`, read from the upper triangle.
    pub fn link(&self, a: usize, b: usize) -> f64 {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.eta[(lo, hi)]
    }

    /// Finite links `(a, b)` with `a < b`, in lexicographic order.
    fn finite_links(&self) -> Vec<(usize, usize)> {
        let n = self.agent_count();
        (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|&(a, b)| self.link(a, b).is_finite())
            .collect()
    }

    fn edge_sum(&self, edges: &[(usize, usize)]) -> f64 {
        edges.iter().map(|&(a, b)| self.link(a, b)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkDesign {
    pub agent_count: usize,
    /// Undirected links `(a, b)` with `a < b`, sorted.
    pub edges: Vec<(usize, usize)>,
    pub total_cost: f64,
    pub connected: bool,
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Kruskal over finite links; equal costs are taken in lexicographic
/// `(min endpoint, max endpoint)` order.
fn kruskal(costs: &CommunicationCosts) -> Vec<(usize, usize)> {
    let mut links = costs.finite_links();
    links.sort_by(|&(a1, b1), &(a2, b2)| {
        costs
            .link(a1, b1)
            .total_cmp(&costs.link(a2, b2))
            .then((a1, b1).cmp(&(a2, b2)))
    });
    let mut uf = UnionFind::new(costs.agent_count());
    let mut chosen: Vec<(usize, usize)> = links
        .into_iter()
        .filter(|&(a, b)| uf.union(a, b))
        .collect();
    chosen.sort_unstable();
    chosen
}

/// Minimum-weight spanning forest: an MST of every connected component of
/// the finite-cost graph.
pub fn minimum_spanning_forest(costs: &CommunicationCosts) -> NetworkDesign {
    let n = costs.agent_count();
    let edges = kruskal(costs);
    NetworkDesign {
        agent_count: n,
        total_cost: costs.edge_sum(&edges),
        connected: edges.len() + 1 == n || n == 1,
        edges,
    }
}

pub fn minimum_spanning_tree(costs: &CommunicationCosts) -> Result<NetworkDesign> {
    if costs.agent_count() == 0 {
        return Err(Error::invalid("no agents"));
    }
    let forest = minimum_spanning_forest(costs);
    if !forest.connected {
        return Err(Error::Disconnected {
            components: undirected_components(costs.agent_count(), &forest.edges),
        });
    }
    Ok(forest)
}

/// Decodes a Prüfer sequence over `0..n` into a sorted edge list.
fn prufer_tree(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &x in seq {
        degree[x] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &x in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).expect("a leaf exists");
        edges.push((leaf.min(x), leaf.max(x)));
        degree[leaf] -= 1;
        degree[x] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges.sort_unstable();
    edges
}

/// Exhaustive minimum over all `N^(N-2)` labeled spanning trees. Among equal
/// optima the lexicographically smallest sorted edge list wins.
pub fn brute_force_mst(costs: &CommunicationCosts) -> Result<(f64, Vec<(usize, usize)>)> {
    let n = costs.agent_count();
    if n > BRUTE_FORCE_MST_LIMIT {
        return Err(Error::SizeGuard {
            size: n,
            limit: BRUTE_FORCE_MST_LIMIT,
        });
    }
    match n {
        0 => return Err(Error::invalid("no agents")),
        1 => return Ok((0.0, Vec::new())),
        _ => {}
    }
    let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
    let mut seq = vec![0usize; n - 2];
    loop {
        let tree = prufer_tree(&seq, n);
        let cost = costs.edge_sum(&tree);
        if cost.is_finite() {
            let better = match &best {
                None => true,
                Some((b, e)) => cost < *b || (cost == *b && tree < *e),
            };
            if better {
                best = Some((cost, tree));
            }
        }
        // odometer increment over n^(n-2) sequences
        let mut k = 0;
        while k < seq.len() {
            seq[k] += 1;
            if seq[k] < n {
                break;
            }
            seq[k] = 0;
            k += 1;
        }
        if k == seq.len() {
            break;
        }
    }
    best.ok_or_else(|| Error::Disconnected {
        components: undirected_components(n, &costs.finite_links()),
    })
}

/// Symmetric network pattern `U`: both directions of every link plus the
/// diagonal (each agent hears itself).
pub fn tree_to_network(design: &NetworkDesign) -> StructuredMatrix {
    let n = design.agent_count;
    let mut u = StructuredMatrix::identity(n);
    for &(a, b) in &design.edges {
        u.insert(a, b).expect("edge in range");
        u.insert(b, a).expect("edge in range");
    }
    u
}

/// Graphviz rendering of the network with link costs as labels.
pub fn network_to_dot(design: &NetworkDesign, costs: &CommunicationCosts) -> String {
    let mut out = String::from("graph network {\n  node [shape=circle];\n");
    for a in 0..design.agent_count {
        out.push_str(&format!("  a{a} [label=\"agent {}\"];\n", a + 1));
    }
    for &(a, b) in &design.edges {
        out.push_str(&format!("  a{a} -- a{b} [label=\"{}\"];\n", costs.link(a, b)));
    }
    out.push_str("}\n");
    out
}
