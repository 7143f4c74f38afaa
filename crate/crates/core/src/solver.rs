//! End-to-end minimum-cost networked estimation design.
//!
//! For self-damped systems the problem separates: sensor selection is a
//! linear assignment over parent SCCs and the communication network is a
//! minimum spanning tree. Every emitted design is re-verified for
//! networked observability before it is returned.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::digraph::{parent_sccs, scc_decompose, SccDecomposition};
use crate::error::{Error, Result};
use crate::mccn::{minimum_spanning_tree, tree_to_network, CommunicationCosts, NetworkDesign};
use crate::mcss::{
    assignment_to_measurement, hungarian, reduce_costs, reduce_costs_padded, Assignment,
    MeasurementCosts, ReducedCosts,
};
use crate::observability::{
    generic_rank_oracle, networked_observability, NetworkedReport, OracleTally,
};
use crate::sysmodel::{build_networked_structure, require_self_damped, StructuredMatrix};

pub const SCHEMA_VERSION: &str = "netest/v1";

/// Networked oracle runs are refused above this many product states.
pub const ORACLE_STATE_LIMIT: usize = 400;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveOptions {
    /// Accept more agents than parent SCCs; surplus agents measure nothing.
    pub allow_extra_agents: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub state_count: usize,
    pub scc_count: usize,
    /// Member states of each parent SCC, in column order of the reduced costs.
    pub parent_sccs: Vec<Vec<usize>>,
    pub min_agents: usize,
}

impl AnalysisSummary {
    pub fn from_decomposition(dec: &SccDecomposition) -> Self {
        let parents: Vec<Vec<usize>> = parent_sccs(dec)
            .into_iter()
            .map(|k| dec.components[k].clone())
            .collect();
        AnalysisSummary {
            state_count: dec.node_count(),
            scc_count: dec.component_count(),
            min_agents: parents.len(),
            parent_sccs: parents,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSolution {
    pub schema: String,
    /// Original agent index behind each row of the patterns.
    pub agents: Vec<usize>,
    /// `C`, one row per entry of `agents`.
    pub measurement_pattern: StructuredMatrix,
    /// `(agent row, state, 1)` triplets of `C`.
    pub measurement_triplets: Vec<(usize, usize, u8)>,
    /// `U`, symmetric with a full diagonal.
    pub network_pattern: StructuredMatrix,
    /// Undirected links between pattern rows, `a < b`.
    pub network_edges: Vec<(usize, usize)>,
    /// Agent-by-parent-SCC costs.
    #[serde(
        serialize_with = "crate::io::serialize_cost_matrix",
        deserialize_with = "crate::io::deserialize_cost_matrix"
    )]
    pub reduced_costs: DMatrix<f64>,
    /// Parent-SCC column chosen for each pattern row.
    pub assignment: Vec<usize>,
    pub measurement_cost: f64,
    pub communication_cost: f64,
    pub total_cost: f64,
    pub verification: NetworkedReport,
    pub analysis: AnalysisSummary,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl DesignSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let sol: DesignSolution = serde_json::from_str(text).map_err(crate::io::json_err)?;
        if sol.schema != SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported schema \"{}\", expected \"{SCHEMA_VERSION}\"",
                sol.schema
            )));
        }
        Ok(sol)
    }
}

fn triplets(c: &StructuredMatrix) -> Vec<(usize, usize, u8)> {
    c.positions().map(|(r, s)| (r, s, 1)).collect()
}

/// Strongly connected system: one agent, the cheapest (agent, state) pair.
fn single_agent_design(
    a: &StructuredMatrix,
    costs: &MeasurementCosts,
    dec: &SccDecomposition,
) -> Result<DesignSolution> {
    let delta = costs.delta();
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..costs.agent_count() {
        for s in 0..costs.state_count() {
            let c = delta[(i, s)];
            if c.is_finite() && best.is_none_or(|(b, _, _)| c < b) {
                best = Some((c, i, s));
            }
        }
    }
    let (cost, agent, state) = best.ok_or(Error::InfeasibleScc { component: 0 })?;
    let mut c = StructuredMatrix::new(1, costs.state_count());
    c.insert(0, state)?;
    let u = StructuredMatrix::identity(1);
    let verification = networked_observability(a, &c, &u)?;
    if !verification.report.observable {
        return Err(Error::VerificationFailed);
    }
    Ok(DesignSolution {
        schema: SCHEMA_VERSION.into(),
        agents: vec![agent],
        measurement_triplets: triplets(&c),
        measurement_pattern: c,
        network_pattern: u,
        network_edges: Vec::new(),
        reduced_costs: DMatrix::from_element(1, 1, cost),
        assignment: vec![0],
        measurement_cost: cost,
        communication_cost: 0.0,
        total_cost: cost,
        verification,
        analysis: AnalysisSummary::from_decomposition(dec),
        notes: vec![format!(
            "system digraph is strongly connected; agent {agent} alone estimates it"
        )],
    })
}

fn sensor_selection(
    costs: &MeasurementCosts,
    dec: &SccDecomposition,
    options: SolveOptions,
) -> Result<(ReducedCosts, Assignment, StructuredMatrix)> {
    let reduced = if options.allow_extra_agents {
        reduce_costs_padded(costs, dec)?
    } else {
        reduce_costs(costs, dec)?
    };
    let assignment = hungarian(&reduced.delta_cap)?;
    let c = assignment_to_measurement(&assignment, &reduced)?;
    Ok((reduced, assignment, c))
}

/// Solves sensor selection and network design for a self-damped system.
///
/// `costs` is agents x states, `comm` agents x agents. Fails without output
/// if the assembled design does not verify.
pub fn solve_mcne(
    a: &StructuredMatrix,
    costs: &MeasurementCosts,
    comm: &CommunicationCosts,
    options: SolveOptions,
) -> Result<DesignSolution> {
    require_self_damped(a)?;
    let n = a.rows();
    if costs.state_count() != n {
        return Err(Error::invalid(format!(
            "delta has {} state columns but the system has {n} states",
            costs.state_count()
        )));
    }
    if comm.agent_count() != costs.agent_count() {
        return Err(Error::invalid(format!(
            "eta covers {} agents but delta has {}",
            comm.agent_count(),
            costs.agent_count()
        )));
    }
    let dec = scc_decompose(&a.to_digraph()?)?;
    let parents = parent_sccs(&dec).len();
    if parents == 1 && costs.agent_count() > 1 {
        return single_agent_design(a, costs, &dec);
    }

    // the two subproblems share nothing after the SCC analysis
    let (selection, network) = std::thread::scope(|scope| {
        let net = scope.spawn(|| minimum_spanning_tree(comm));
        let sel = sensor_selection(costs, &dec, options);
        (sel, net.join().expect("network design thread panicked"))
    });
    let (reduced, assignment, c) = selection?;
    let tree: NetworkDesign = network?;
    let u = tree_to_network(&tree);

    let verification = networked_observability(a, &c, &u)?;
    if !verification.report.observable {
        return Err(Error::VerificationFailed);
    }

    let mut notes = Vec::new();
    if reduced.padding_columns > 0 {
        let idle: Vec<usize> = (0..costs.agent_count())
            .filter(|&i| c.row_support(i).is_empty())
            .collect();
        notes.push(format!(
            "{} more agents than parent SCCs; agents {idle:?} take no measurement",
            reduced.padding_columns
        ));
    }

    let measurement_cost = assignment.total_cost;
    let communication_cost = tree.total_cost;
    Ok(DesignSolution {
        schema: SCHEMA_VERSION.into(),
        agents: (0..costs.agent_count()).collect(),
        measurement_triplets: triplets(&c),
        measurement_pattern: c,
        network_pattern: u,
        network_edges: tree.edges,
        reduced_costs: reduced.delta_cap,
        assignment: assignment.columns,
        measurement_cost,
        communication_cost,
        total_cost: measurement_cost + communication_cost,
        verification,
        analysis: AnalysisSummary::from_decomposition(&dec),
        notes,
    })
}

fn check_solution_dims(a: &StructuredMatrix, sol: &DesignSolution) -> Result<()> {
    let c = &sol.measurement_pattern;
    let u = &sol.network_pattern;
    if c.cols() != a.rows() || c.rows() != u.rows() || !u.is_square() {
        return Err(Error::invalid(format!(
            "solution patterns ({}x{} measurements, {}x{} network) do not fit a {}-state system",
            c.rows(),
            c.cols(),
            u.rows(),
            u.cols(),
            a.rows()
        )));
    }
    Ok(())
}

/// Re-checks networked observability of a stored design from its patterns
/// alone; costs and the embedded report are not trusted.
pub fn verify_solution(a: &StructuredMatrix, sol: &DesignSolution) -> Result<NetworkedReport> {
    check_solution_dims(a, sol)?;
    networked_observability(a, &sol.measurement_pattern, &sol.network_pattern)
}

/// Generic-rank oracle on the networked pattern `U ⊗ A`, measuring the
/// diagonal support of `D_C`.
pub fn solution_oracle(
    a: &StructuredMatrix,
    sol: &DesignSolution,
    trials: usize,
    seed: u64,
) -> Result<OracleTally> {
    check_solution_dims(a, sol)?;
    let u = sol.network_pattern.with_diagonal();
    let size = u.rows() * a.rows();
    if size > ORACLE_STATE_LIMIT {
        return Err(Error::SizeGuard {
            size,
            limit: ORACLE_STATE_LIMIT,
        });
    }
    let net = build_networked_structure(a, &sol.measurement_pattern, &u)?;
    let measured: Vec<usize> = (0..size).filter(|&v| net.dc_pattern.contains(v, v)).collect();
    generic_rank_oracle(&net.kron_pattern, &measured, trials, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn fork() -> StructuredMatrix {
        // 0 feeds parents {1} and {2}
        StructuredMatrix::from_positions(3, 3, [(0, 0), (1, 1), (2, 2), (1, 0), (2, 0)]).unwrap()
    }

    #[test]
    fn single_state_system() {
        let a = StructuredMatrix::identity(1);
        let sol = solve_mcne(
            &a,
            &MeasurementCosts::new(dmatrix![2.0]).unwrap(),
            &CommunicationCosts::new(dmatrix![0.0]).unwrap(),
            SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.measurement_pattern.positions().collect::<Vec<_>>(), vec![(0, 0)]);
        assert_eq!(sol.network_pattern, StructuredMatrix::identity(1));
        assert_eq!(sol.total_cost, 2.0);
        assert!(sol.verification.report.observable);
    }

    #[test]
    fn fork_design_and_round_trip() {
        let delta = dmatrix![9.0, 1.0, 4.0; 9.0, 2.0, 1.5];
        let eta = dmatrix![0.0, 3.0; 3.0, 0.0];
        let sol = solve_mcne(
            &fork(),
            &MeasurementCosts::new(delta).unwrap(),
            &CommunicationCosts::new(eta).unwrap(),
            SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.assignment, vec![0, 1]);
        assert_eq!(sol.measurement_cost, 2.5);
        assert_eq!(sol.communication_cost, 3.0);
        assert_eq!(sol.total_cost, 5.5);
        assert_eq!(sol.network_edges, vec![(0, 1)]);

        let back = DesignSolution::from_json(&sol.to_json()).unwrap();
        assert_eq!(back, sol);
        assert!(verify_solution(&fork(), &back).unwrap().report.observable);

        let mut cut = back.clone();
        cut.network_pattern.remove(0, 1);
        cut.network_pattern.remove(1, 0);
        assert!(!verify_solution(&fork(), &cut).unwrap().report.observable);

        let mut blind = back;
        blind.measurement_pattern.remove(1, 2);
        assert!(!verify_solution(&fork(), &blind).unwrap().report.observable);
    }

    #[test]
    fn rejects_non_self_damped() {
        let a = StructuredMatrix::from_positions(2, 2, [(0, 0), (1, 0)]).unwrap();
        let err = solve_mcne(
            &a,
            &MeasurementCosts::new(dmatrix![1.0, 1.0]).unwrap(),
            &CommunicationCosts::new(dmatrix![0.0]).unwrap(),
            SolveOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err, Error::NotSelfDamped { missing_self_loops: vec![1] });
    }

    #[test]
    fn agent_count_must_match_unless_padded() {
        let delta = dmatrix![9.0, 1.0, 4.0; 9.0, 2.0, 1.5; 0.5, 3.0, 3.0];
        let eta = dmatrix![0.0, 3.0, 1.0; 3.0, 0.0, 1.0; 1.0, 1.0, 0.0];
        let costs = MeasurementCosts::new(delta).unwrap();
        let comm = CommunicationCosts::new(eta).unwrap();
        assert_eq!(
            solve_mcne(&fork(), &costs, &comm, SolveOptions::default()).unwrap_err(),
            Error::AgentCountMismatch { agents: 3, parents: 2 }
        );
        let sol = solve_mcne(&fork(), &costs, &comm, SolveOptions { allow_extra_agents: true }).unwrap();
        assert_eq!(sol.measurement_pattern.nnz(), 2);
        assert_eq!(sol.notes.len(), 1);
        assert!(sol.verification.report.observable);
    }

    #[test]
    fn strongly_connected_system_uses_one_agent() {
        let ring = StructuredMatrix::from_positions(
            3,
            3,
            [(0, 0), (1, 1), (2, 2), (1, 0), (2, 1), (0, 2)],
        )
        .unwrap();
        let delta = dmatrix![5.0, 4.0, 6.0; 3.0, 7.0, 2.5];
        let sol = solve_mcne(
            &ring,
            &MeasurementCosts::new(delta).unwrap(),
            &CommunicationCosts::new(dmatrix![0.0, 1.0; 1.0, 0.0]).unwrap(),
            SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.agents, vec![1]);
        assert_eq!(sol.measurement_pattern.positions().collect::<Vec<_>>(), vec![(0, 2)]);
        assert!(sol.network_edges.is_empty());
        assert_eq!(sol.total_cost, 2.5);
    }

    #[test]
    fn disconnected_network_is_an_error() {
        let inf = f64::INFINITY;
        let err = solve_mcne(
            &fork(),
            &MeasurementCosts::new(dmatrix![9.0, 1.0, 4.0; 9.0, 2.0, 1.5]).unwrap(),
            &CommunicationCosts::new(dmatrix![0.0, inf; inf, 0.0]).unwrap(),
            SolveOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Disconnected { .. }));
    }

    #[test]
    fn oracle_on_small_design() {
        let sol = solve_mcne(
            &fork(),
            &MeasurementCosts::new(dmatrix![9.0, 1.0, 4.0; 9.0, 2.0, 1.5]).unwrap(),
            &CommunicationCosts::new(dmatrix![0.0, 3.0; 3.0, 0.0]).unwrap(),
            SolveOptions::default(),
        )
        .unwrap();
        let tally = solution_oracle(&fork(), &sol, 50, 5).unwrap();
        assert!(tally.observable_trials >= 49, "{tally:?}");
    }
}
