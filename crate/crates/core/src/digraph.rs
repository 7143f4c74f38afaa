//! Directed graphs over `0..n` and their strongly connected components.
//!
//! Edges are stored as sorted, deduplicated adjacency lists in both
//! directions. Self-loops are kept as ordinary edges.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Digraph {
    /// Builds a graph from an edge iterator, silently dropping duplicates.
    pub fn from_edges<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Self::from_edges_counting(node_count, edges).map(|(g, _)| g)
    }

    /// Like [`Digraph::from_edges`] but also returns how many duplicate
    /// edges were dropped.
    pub fn from_edges_counting<I>(node_count: usize, edges: I) -> Result<(Self, usize)>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut succ = vec![Vec::new(); node_count];
        let mut raw = 0usize;
        for (s, t) in edges {
            if s >= node_count || t >= node_count {
                return Err(Error::invalid(format!(
                    "edge ({s}, {t}) out of range for {node_count} nodes"
                )));
            }
            succ[s].push(t);
            raw += 1;
        }
        let mut pred = vec![Vec::new(); node_count];
        let mut edge_count = 0;
        for (s, out) in succ.iter_mut().enumerate() {
            out.sort_unstable();
            out.dedup();
            edge_count += out.len();
            for &t in out.iter() {
                pred[t].push(s);
            }
        }
        // pred lists come out sorted because sources are visited in order
        Ok((
            Digraph {
                succ,
                pred,
                edge_count,
            },
            raw - edge_count,
        ))
    }

    pub fn node_count(&self) -> usize {
        self.succ.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.succ[v]
    }

    pub fn predecessors(&self, v: usize) -> &[usize] {
        &self.pred[v]
    }

    pub fn has_edge(&self, s: usize, t: usize) -> bool {
        self.succ
            .get(s)
            .is_some_and(|out| out.binary_search(&t).is_ok())
    }

    /// All edges in lexicographic `(source, target)` order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(s, out)| out.iter().map(move |&t| (s, t)))
    }
}

/// SCC partition of a digraph together with its condensation DAG.
///
/// Components are ordered by their smallest node, and each component's
/// members are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SccDecomposition {
    pub components: Vec<Vec<usize>>,
    pub component_of: Vec<usize>,
    pub condensation_edges: Vec<(usize, usize)>,
    pub parent_flags: Vec<bool>,
}

impl SccDecomposition {
    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn node_count(&self) -> usize {
        self.component_of.len()
    }

    /// The condensation as a digraph over component indices.
    pub fn condensation(&self) -> Digraph {
        Digraph::from_edges(self.components.len(), self.condensation_edges.iter().copied())
            .expect("condensation edges are in range")
    }
}

const UNVISITED: usize = usize::MAX;

/// Tarjan's algorithm, iterative so deep graphs do not overflow the stack.
fn tarjan(g: &Digraph) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut calls: Vec<(usize, usize)> = Vec::new();
    let mut counter = 0usize;
    let mut comps = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        calls.push((root, 0));

        while let Some(frame) = calls.last_mut() {
            let v = frame.0;
            if let Some(&w) = g.succ[v].get(frame.1) {
                frame.1 += 1;
                if index[w] == UNVISITED {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    calls.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            calls.pop();
            if let Some(&(u, _)) = calls.last() {
                low[u] = low[u].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comps.push(comp);
            }
        }
    }
    comps
}

pub fn scc_decompose(g: &Digraph) -> Result<SccDecomposition> {
    if g.is_empty() {
        return Err(Error::invalid("cannot decompose an empty graph"));
    }
    let mut components = tarjan(g);
    for comp in &mut components {
        comp.sort_unstable();
    }
    components.sort_unstable_by_key(|c| c[0]);

    let mut component_of = vec![0usize; g.node_count()];
    for (k, comp) in components.iter().enumerate() {
        for &v in comp {
            component_of[v] = k;
        }
    }

    let mut condensation_edges: Vec<(usize, usize)> = g
        .edges()
        .map(|(s, t)| (component_of[s], component_of[t]))
        .filter(|(a, b)| a != b)
        .collect();
    condensation_edges.sort_unstable();
    condensation_edges.dedup();

    let mut parent_flags = vec![true; components.len()];
    for &(a, _) in &condensation_edges {
        parent_flags[a] = false;
    }

    Ok(SccDecomposition {
        components,
        component_of,
        condensation_edges,
        parent_flags,
    })
}

/// Indices of the components with no outgoing condensation edge.
pub fn parent_sccs(dec: &SccDecomposition) -> Vec<usize> {
    dec.parent_flags
        .iter()
        .enumerate()
        .filter_map(|(k, &p)| p.then_some(k))
        .collect()
}

pub fn is_strongly_connected(g: &Digraph) -> bool {
    let n = g.node_count();
    if n == 0 {
        return false;
    }
    // forward and backward reachability from node 0 is enough
    reverse_reachable_mask(g, &[0]).iter().all(|&r| r) && forward_reachable_mask(g, 0).iter().all(|&r| r)
}

fn forward_reachable_mask(g: &Digraph, start: usize) -> Vec<bool> {
    let mut seen = vec![false; g.node_count()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(v) = queue.pop_front() {
        for &w in g.successors(v) {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen
}

pub(crate) fn reverse_reachable_mask(g: &Digraph, targets: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; g.node_count()];
    let mut queue = VecDeque::new();
    for &t in targets {
        if !seen[t] {
            seen[t] = true;
            queue.push_back(t);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &u in g.predecessors(v) {
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    seen
}

/// Every node with a directed path (possibly empty) into `targets`, sorted.
pub fn reverse_reachable(g: &Digraph, targets: &[usize]) -> Result<Vec<usize>> {
    if let Some(&bad) = targets.iter().find(|&&t| t >= g.node_count()) {
        return Err(Error::invalid(format!("target node {bad} out of range")));
    }
    Ok(reverse_reachable_mask(g, targets)
        .into_iter()
        .enumerate()
        .filter_map(|(v, r)| r.then_some(v))
        .collect())
}

/// Connected components of an undirected graph given as an edge list,
/// each sorted, ordered by smallest member.
pub(crate) fn undirected_components(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let both = edges.iter().flat_map(|&(a, b)| [(a, b), (b, a)]);
    let g = Digraph::from_edges(n, both).expect("edges in range");
    let mut comp = vec![UNVISITED; n];
    let mut out = Vec::new();
    for s in 0..n {
        if comp[s] != UNVISITED {
            continue;
        }
        let members: Vec<usize> = forward_reachable_mask(&g, s)
            .into_iter()
            .enumerate()
            .filter_map(|(v, r)| r.then_some(v))
            .collect();
        for &v in &members {
            comp[v] = out.len();
        }
        out.push(members);
    }
    out
}
