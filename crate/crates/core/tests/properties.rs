use nalgebra::DMatrix;
use proptest::prelude::*;

use netest_core::digraph::{parent_sccs, scc_decompose, Digraph};
use netest_core::mccn::{brute_force_mst, minimum_spanning_tree, tree_to_network, CommunicationCosts};
use netest_core::mcss::{
    brute_force_assignment, dual_certificate_violation, hungarian, reduce_costs, MeasurementCosts,
};
use netest_core::observability::{
    is_networked_observable, is_structurally_observable, parent_scc_coverage,
};
use netest_core::solver::{solve_mcne, verify_solution, DesignSolution, SolveOptions};
use netest_core::sysmodel::{
    build_networked_structure, euler_discretize, tustin_discretize, ContinuousSystem,
    StructuredMatrix,
};

fn closure(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for (v, row) in r.iter_mut().enumerate() {
        row[v] = true;
    }
    for &(s, t) in edges {
        r[s][t] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

fn graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..=12).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..=3 * n)))
}

fn self_damped(n: usize, edges: &[(usize, usize)]) -> StructuredMatrix {
    let g = Digraph::from_edges(n, edges.iter().copied()).unwrap();
    StructuredMatrix::from_digraph(&g).with_diagonal()
}

fn cost_matrix(max_n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..=max_n).prop_flat_map(|n| {
        prop::collection::vec(0.0f64..10.0, n * n).prop_map(move |v| DMatrix::from_vec(n, n, v))
    })
}

fn symmetric(min_n: usize, max_n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (min_n..=max_n).prop_flat_map(|n| {
        prop::collection::vec(0.0f64..10.0, n * n).prop_map(move |v| {
            let mut m = DMatrix::from_vec(n, n, v);
            for i in 0..n {
                m[(i, i)] = 0.0;
                for j in 0..i {
                    m[(i, j)] = m[(j, i)];
                }
            }
            m
        })
    })
}

/// Path between `a` and `b` in a tree, as edges `(min, max)`.
fn tree_path(n: usize, tree: &[(usize, usize)], a: usize, b: usize) -> Vec<(usize, usize)> {
    let mut adj = vec![Vec::new(); n];
    for &(x, y) in tree {
        adj[x].push(y);
        adj[y].push(x);
    }
    let mut prev = vec![usize::MAX; n];
    prev[a] = a;
    let mut stack = vec![a];
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if prev[w] == usize::MAX {
                prev[w] = v;
                stack.push(w);
            }
        }
    }
    let mut path = Vec::new();
    let mut v = b;
    while v != a {
        let p = prev[v];
        path.push((p.min(v), p.max(v)));
        v = p;
    }
    path
}

/// Self-damped digraph with one parent SCC per entry of `sizes` plus
/// `children` child states, each of which drains into some parent.
fn layered(sizes: &[usize], children: usize, salt: u64) -> (usize, Vec<(usize, usize)>) {
    let mut edges = Vec::new();
    let mut next = 0;
    let mut parent_nodes = Vec::new();
    for &s in sizes {
        for k in 0..s {
            edges.push((next + k, next + (k + 1) % s));
        }
        parent_nodes.extend(next..next + s);
        next += s;
    }
    let mut x = salt | 1;
    let mut rnd = |m: usize| {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        (x % m as u64) as usize
    };
    for c in next..next + children {
        edges.push((c, parent_nodes[rnd(parent_nodes.len())]));
        if c > next {
            edges.push((c, next + rnd(c - next)));
            edges.push((next + rnd(c - next), c));
        }
    }
    (next + children, edges)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn scc_matches_mutual_reachability((n, edges) in graph()) {
        let g = Digraph::from_edges(n, edges.iter().copied()).unwrap();
        let dec = scc_decompose(&g).unwrap();
        let r = closure(n, &edges);
        for u in 0..n {
            for v in 0..n {
                prop_assert_eq!(dec.component_of[u] == dec.component_of[v], r[u][v] && r[v][u]);
            }
        }
        let mut seen: Vec<usize> = dec.components.iter().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        let mins: Vec<usize> = dec.components.iter().map(|c| c[0]).collect();
        prop_assert!(mins.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(&scc_decompose(&g).unwrap(), &dec);
    }

    #[test]
    fn parents_reach_nothing_outside((n, edges) in graph()) {
        let g = Digraph::from_edges(n, edges.iter().copied()).unwrap();
        let dec = scc_decompose(&g).unwrap();
        let r = closure(n, &edges);
        let parents = parent_sccs(&dec);
        prop_assert!(!parents.is_empty());
        for (k, members) in dec.components.iter().enumerate() {
            let leaks = members
                .iter()
                .any(|&u| (0..n).any(|v| r[u][v] && dec.component_of[v] != k));
            prop_assert_eq!(parents.contains(&k), !leaks);
        }
        // every state reaches some parent
        for u in 0..n {
            prop_assert!(parents.iter().any(|&k| r[u][dec.components[k][0]]));
        }
    }

    #[test]
    fn coverage_criterion_matches_structural_test(
        (n, edges) in graph(),
        mask in prop::collection::vec(prop::bool::weighted(0.25), 12),
    ) {
        let a = self_damped(n, &edges);
        let measured: Vec<usize> = (0..n).filter(|&s| mask[s]).collect();
        let (covered, _) = parent_scc_coverage(&a, &measured).unwrap();
        let report = is_structurally_observable(&a, &measured).unwrap();
        prop_assert!(report.structurally_full_rank);
        prop_assert_eq!(covered, report.observable);
    }

    #[test]
    fn observability_is_monotone_in_measurements(
        (n, edges) in graph(),
        mask in prop::collection::vec(any::<bool>(), 12),
        extra in 0usize..12,
    ) {
        let a = self_damped(n, &edges);
        let mut measured: Vec<usize> = (0..n).filter(|&s| mask[s]).collect();
        let before = is_structurally_observable(&a, &measured).unwrap().observable;
        measured.push(extra % n);
        let after = is_structurally_observable(&a, &measured).unwrap().observable;
        prop_assert!(!before || after);
    }

    #[test]
    fn kronecker_counts_and_symmetric_dc(
        (n, edges) in graph(),
        agents in 1usize..=4,
        links in prop::collection::vec((0usize..4, 0usize..4), 0..6),
        picks in prop::collection::vec((0usize..4, 0usize..12), 0..8),
    ) {
        let a = self_damped(n, &edges);
        let mut u = StructuredMatrix::identity(agents);
        for (x, y) in links {
            if x < agents && y < agents {
                u.insert(x, y).unwrap();
                u.insert(y, x).unwrap();
            }
        }
        let mut c = StructuredMatrix::new(agents, n);
        for (i, s) in picks {
            if i < agents {
                c.insert(i, s % n).unwrap();
            }
        }
        let net = build_networked_structure(&a, &c, &u).unwrap();
        prop_assert_eq!(net.kron_pattern.nnz(), u.nnz() * a.nnz());
        for (p, q) in net.dc_pattern.positions() {
            prop_assert!(net.dc_pattern.contains(q, p));
            prop_assert_eq!(p / n, q / n);
        }
    }

    #[test]
    fn networked_iff_each_agent_group_covers_parents(
        sizes in prop::collection::vec(1usize..=3, 1..=4),
        children in 0usize..=4,
        salt in any::<u64>(),
        agents in 1usize..=4,
        links in prop::collection::vec((0usize..4, 0usize..4), 0..5),
        picks in prop::collection::vec((0usize..4, 0usize..20), 0..8),
    ) {
        let (n, edges) = layered(&sizes, children, salt);
        let a = self_damped(n, &edges);
        let dec = scc_decompose(&a.to_digraph().unwrap()).unwrap();
        let mut group: Vec<usize> = (0..agents).collect();
        let mut u = StructuredMatrix::identity(agents);
        for (x, y) in links {
            if x < agents && y < agents {
                u.insert(x, y).unwrap();
                u.insert(y, x).unwrap();
                let (gx, gy) = (group[x], group[y]);
                for g in group.iter_mut() {
                    if *g == gy {
                        *g = gx;
                    }
                }
            }
        }
        let mut c = StructuredMatrix::new(agents, n);
        for (i, s) in picks {
            if i < agents {
                c.insert(i, s % n).unwrap();
            }
        }
        let expected = (0..agents).all(|g| {
            let measured: Vec<usize> = c
                .positions()
                .filter(|&(i, _)| group[i] == group[g])
                .map(|(_, s)| s)
                .collect();
            parent_sccs(&dec)
                .iter()
                .all(|&k| measured.iter().any(|&s| dec.component_of[s] == k))
        });
        prop_assert_eq!(is_networked_observable(&a, &c, &u).unwrap(), expected);
    }

    #[test]
    fn hungarian_matches_brute_force(cost in cost_matrix(7)) {
        let a = hungarian(&cost).unwrap();
        let (best, _) = brute_force_assignment(&cost).unwrap();
        prop_assert_eq!(a.total_cost, best);
        prop_assert_eq!(dual_certificate_violation(&cost, &a), None);
        let mut cols = a.columns.clone();
        cols.sort_unstable();
        prop_assert_eq!(cols, (0..cost.nrows()).collect::<Vec<_>>());
    }

    #[test]
    fn kruskal_matches_prufer_enumeration(eta in symmetric(2, 6)) {
        let n = eta.nrows();
        let costs = CommunicationCosts::new(eta).unwrap();
        let tree = minimum_spanning_tree(&costs).unwrap();
        let (best, _) = brute_force_mst(&costs).unwrap();
        prop_assert_eq!(tree.total_cost, best);
        prop_assert_eq!(tree.edges.len(), n - 1);
        // cycle property: a non-tree link is no cheaper than any tree link on its cycle
        for x in 0..n {
            for y in x + 1..n {
                if tree.edges.contains(&(x, y)) {
                    continue;
                }
                for (p, q) in tree_path(n, &tree.edges, x, y) {
                    prop_assert!(costs.link(p, q) <= costs.link(x, y));
                }
            }
        }
        let u = tree_to_network(&tree);
        prop_assert_eq!(u.nnz(), n + 2 * (n - 1));
    }

    #[test]
    fn separation_is_optimal(
        sizes in prop::collection::vec(1usize..=3, 2..=5),
        children in 0usize..=4,
        salt in any::<u64>(),
        delta_raw in prop::collection::vec(0.0f64..10.0, 5 * 19),
        eta_raw in prop::collection::vec(0.0f64..10.0, 25),
    ) {
        let parents = sizes.len();
        let (n, edges) = layered(&sizes, children, salt);
        let a = self_damped(n, &edges);
        let dec = scc_decompose(&a.to_digraph().unwrap()).unwrap();
        prop_assert_eq!(parent_sccs(&dec).len(), parents);

        let delta = DMatrix::from_fn(parents, n, |i, j| delta_raw[i * n + j]);
        let mut eta = DMatrix::from_fn(parents, parents, |i, j| eta_raw[i.min(j) * 5 + i.max(j)]);
        eta.fill_diagonal(0.0);
        let costs = MeasurementCosts::new(delta).unwrap();
        let comm = CommunicationCosts::new(eta).unwrap();

        let sol = solve_mcne(&a, &costs, &comm, SolveOptions::default()).unwrap();
        let reduced = reduce_costs(&costs, &dec).unwrap();
        let (assign_best, _) = brute_force_assignment(&reduced.delta_cap).unwrap();
        let (tree_best, _) = brute_force_mst(&comm).unwrap();
        prop_assert_eq!(sol.total_cost, assign_best + tree_best);
        prop_assert_eq!(sol.measurement_pattern.nnz(), parents);
        prop_assert_eq!(sol.network_pattern.nnz(), parents + 2 * (parents - 1));

        let json = sol.to_json();
        let again = solve_mcne(&a, &costs, &comm, SolveOptions::default()).unwrap();
        prop_assert_eq!(&again.to_json(), &json);
        let back = DesignSolution::from_json(&json).unwrap();
        prop_assert!(verify_solution(&a, &back).unwrap().report.observable);
    }
}

#[test]
fn discretizations_agree_to_second_order() {
    let a = DMatrix::from_row_slice(3, 3, &[-1.0, 0.3, 0.0, 0.0, -2.0, 0.5, 0.2, 0.0, -1.5]);
    let mut prev: Option<f64> = None;
    for t in [1e-1, 1e-2, 1e-3] {
        let sys = ContinuousSystem::new(a.clone(), t).unwrap();
        let diff = (euler_discretize(&sys) - tustin_discretize(&sys).unwrap()).abs();
        let norm = diff.row_iter().map(|r| r.sum()).fold(0.0, f64::max);
        if let Some(p) = prev {
            let ratio = p / norm;
            assert!((50.0..=200.0).contains(&ratio), "ratio {ratio} at T = {t}");
        }
        prev = Some(norm);
    }
}
