//! Maximum bipartite matching (Hopcroft–Karp).

use std::collections::VecDeque;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub(crate) struct Matching {
    pub size: usize,
    /// Column matched to each row, if any.
    pub row_mate: Vec<Option<usize>>,
    /// Row matched to each column, if any.
    pub col_mate: Vec<Option<usize>>,
}

/// `adj[r]` lists the columns row `r` may be matched to.
pub(crate) fn hopcroft_karp(adj: &[Vec<usize>], cols: usize) -> Matching {
    let rows = adj.len();
    let mut row_mate = vec![NONE; rows];
    let mut col_mate = vec![NONE; cols];
    let mut dist = vec![0usize; rows];
    let mut size = 0;

    loop {
        // BFS layers from free rows
        let mut queue = VecDeque::new();
        for r in 0..rows {
            if row_mate[r] == NONE {
                dist[r] = 0;
                queue.push_back(r);
            } else {
                dist[r] = NONE;
            }
        }
        let mut found = false;
        while let Some(r) = queue.pop_front() {
            for &c in &adj[r] {
                let m = col_mate[c];
                if m == NONE {
                    found = true;
                } else if dist[m] == NONE {
                    dist[m] = dist[r] + 1;
                    queue.push_back(m);
                }
            }
        }
        if !found {
            break;
        }

        // iterative DFS along the layers
        let mut next = vec![0usize; rows];
        for start in 0..rows {
            if row_mate[start] != NONE {
                continue;
            }
            let mut path: Vec<usize> = vec![start];
            while let Some(&r) = path.last() {
                if next[r] == adj[r].len() {
                    dist[r] = NONE;
                    path.pop();
                    continue;
                }
                let c = adj[r][next[r]];
                next[r] += 1;
                let m = col_mate[c];
                if m == NONE {
                    // augment along the path
                    let mut col = c;
                    for &pr in path.iter().rev() {
                        let prev = row_mate[pr];
                        row_mate[pr] = col;
                        col_mate[col] = pr;
                        col = prev;
                    }
                    size += 1;
                    break;
                } else if dist[m] == dist[r] + 1 {
                    path.push(m);
                }
            }
        }
    }

    let wrap = |v: Vec<usize>| v.into_iter().map(|x| (x != NONE).then_some(x)).collect();
    Matching {
        size,
        row_mate: wrap(row_mate),
        col_mate: wrap(col_mate),
    }
}

/// For a maximum matching that leaves some row unmatched, returns a set of
/// rows and the (strictly smaller) set of columns they can reach.
pub(crate) fn hall_violation(adj: &[Vec<usize>], m: &Matching) -> Option<(Vec<usize>, Vec<usize>)> {
    let start = m.row_mate.iter().position(|x| x.is_none())?;
    let cols = m.col_mate.len();
    let mut row_seen = vec![false; adj.len()];
    let mut col_seen = vec![false; cols];
    let mut queue = VecDeque::from([start]);
    row_seen[start] = true;
    while let Some(r) = queue.pop_front() {
        for &c in &adj[r] {
            if col_seen[c] {
                continue;
            }
            col_seen[c] = true;
            // maximum matching: every reachable column is matched
            if let Some(mr) = m.col_mate[c] {
                if !row_seen[mr] {
                    row_seen[mr] = true;
                    queue.push_back(mr);
                }
            }
        }
    }
    let pick = |v: Vec<bool>| v.into_iter().enumerate().filter_map(|(i, s)| s.then_some(i)).collect();
    Some((pick(row_seen), pick(col_seen)))
}
