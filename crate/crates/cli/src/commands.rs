use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use netest_core::dot::system_to_dot;
use netest_core::io::{load_problem, matrix_to_json, parse_numeric_matrix, Problem};
use netest_core::mccn::{network_to_dot, NetworkDesign};
use netest_core::observability::generic_rank_oracle;
use netest_core::solver::{solution_oracle, verify_solution};
use netest_core::sysmodel::{
    euler_discretize, missing_self_loops, structure_of, tustin_discretize, DEFAULT_STRUCTURE_TOL,
};
use netest_core::{
    parent_sccs, scc_decompose, solve_mcne, CommunicationCosts, ContinuousSystem, DesignSolution,
    Error, MeasurementCosts, Result, SolveOptions,
};

use crate::{Command, GlobalArgs, Method};

const DEFAULT_ORACLE_TRIALS: usize = 100;

pub fn run(global: &GlobalArgs, command: Command) -> Result<()> {
    match command {
        Command::Analyze => analyze(global),
        Command::Design => design(global),
        Command::Verify { solution, oracle } => verify(global, &solution, oracle),
        Command::Discretize { step, method } => discretize(global, step, method),
        Command::Oracle {
            measured,
            solution,
            trials,
        } => oracle(global, measured, solution, trials),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidInput(format!("{}: {e}", path.display()))
}

fn input_path(global: &GlobalArgs) -> Result<&Path> {
    global
        .input
        .as_deref()
        .ok_or_else(|| Error::InvalidInput("--input is required".into()))
}

fn load(global: &GlobalArgs) -> Result<Problem> {
    let problem = load_problem(input_path(global)?)?;
    if problem.duplicate_edges > 0 {
        log::warn!("ignored {} duplicate edges", problem.duplicate_edges);
    }
    Ok(problem)
}

fn emit(global: &GlobalArgs, text: &str) -> Result<()> {
    match &global.output {
        Some(path) => fs::write(path, format!("{text}\n")).map_err(|e| io_err(path, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("{n} {word}")
    } else {
        format!("{n} {word}s")
    }
}

fn analyze(global: &GlobalArgs) -> Result<()> {
    let problem = load(global)?;
    let a = &problem.a_pattern;
    let dec = scc_decompose(&a.to_digraph()?)?;
    let parents = parent_sccs(&dec);
    let missing = missing_self_loops(a)?;

    println!(
        "{}, {}, min agents {}",
        plural(dec.component_count(), "SCC"),
        plural(parents.len(), "parent"),
        parents.len()
    );
    println!("states: {}", a.rows());
    if missing.is_empty() {
        println!("self-damped: true");
    } else {
        println!("self-damped: false (missing self-loops on {missing:?})");
    }
    for (rank, &k) in parents.iter().enumerate() {
        println!("parent {rank}: component {k}, states {:?}", dec.components[k]);
    }

    if global.output.is_some() {
        let report = json!({
            "state_count": a.rows(),
            "scc_count": dec.component_count(),
            "components": dec.components,
            "parent_components": parents,
            "parent_sccs": parents.iter().map(|&k| &dec.components[k]).collect::<Vec<_>>(),
            "min_agents": parents.len(),
            "self_damped": missing.is_empty(),
            "missing_self_loops": missing,
            "duplicate_edges": problem.duplicate_edges,
        });
        emit(global, &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    }
    if let Some(dir) = &global.dot {
        write_dot(dir, "system.dot", &system_to_dot(a, &dec, &[]))?;
    }
    Ok(())
}

fn write_dot(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| io_err(&path, e))
}

fn design(global: &GlobalArgs) -> Result<()> {
    let problem = load(global)?;
    let delta = problem
        .delta
        .clone()
        .ok_or_else(|| Error::InvalidInput("design needs a delta cost matrix".into()))?;
    let eta = problem
        .eta
        .clone()
        .ok_or_else(|| Error::InvalidInput("design needs an eta cost matrix".into()))?;
    let costs = MeasurementCosts::new(delta)?;
    let comm = CommunicationCosts::new(eta)?;
    let options = SolveOptions {
        allow_extra_agents: global.allow_extra_agents || problem.options.allow_extra_agents,
    };
    let sol = solve_mcne(&problem.a_pattern, &costs, &comm, options)?;
    for note in &sol.notes {
        log::info!("{note}");
    }
    emit(global, &sol.to_json())?;

    if let Some(dir) = &global.dot {
        let dec = scc_decompose(&problem.a_pattern.to_digraph()?)?;
        let measured: Vec<usize> = sol.measurement_pattern.positions().map(|(_, s)| s).collect();
        write_dot(dir, "system.dot", &system_to_dot(&problem.a_pattern, &dec, &measured))?;
        let tree = NetworkDesign {
            agent_count: comm.agent_count(),
            edges: sol
                .network_edges
                .iter()
                .map(|&(a, b)| (sol.agents[a], sol.agents[b]))
                .collect(),
            total_cost: sol.communication_cost,
            connected: true,
        };
        write_dot(dir, "network.dot", &network_to_dot(&tree, &comm))?;
    }
    Ok(())
}

fn load_solution(path: &Path) -> Result<DesignSolution> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    DesignSolution::from_json(&text)
}

fn seed(global: &GlobalArgs, problem: &Problem) -> u64 {
    global.seed.or(problem.options.seed).unwrap_or(0)
}

fn verify(global: &GlobalArgs, solution: &Path, oracle: Option<usize>) -> Result<()> {
    let problem = load(global)?;
    let sol = load_solution(solution)?;
    let report = verify_solution(&problem.a_pattern, &sol)?;
    let mut out = serde_json::to_value(&report).expect("report serializes");
    if let Some(trials) = oracle {
        let tally = solution_oracle(&problem.a_pattern, &sol, trials, seed(global, &problem))?;
        out["oracle"] = serde_json::to_value(tally).expect("tally serializes");
        eprintln!("oracle: {}/{} trials full rank", tally.observable_trials, tally.trials);
    }
    emit(global, &serde_json::to_string_pretty(&out).expect("report serializes"))?;
    if report.report.observable {
        Ok(())
    } else {
        Err(Error::VerificationFailed)
    }
}

fn discretize(global: &GlobalArgs, step: f64, method: Method) -> Result<()> {
    let path = input_path(global)?;
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let sys = ContinuousSystem::new(parse_numeric_matrix(&text)?, step)?;
    let (name, m) = match method {
        Method::Euler => ("euler", euler_discretize(&sys)),
        Method::Tustin => ("tustin", tustin_discretize(&sys)?),
    };
    let structure = structure_of(&m, global.tol.unwrap_or(DEFAULT_STRUCTURE_TOL))?;
    let missing = missing_self_loops(&structure)?;
    if global.output.is_some() {
        println!("self-damped: {}", missing.is_empty());
    }
    let out = json!({
        "method": name,
        "sample_time": step,
        "matrix": matrix_to_json(&m),
        "structure": structure,
        "self_damped": missing.is_empty(),
        "missing_self_loops": missing,
    });
    emit(global, &serde_json::to_string_pretty(&out).expect("result serializes"))
}

fn oracle(
    global: &GlobalArgs,
    measured: Option<Vec<usize>>,
    solution: Option<PathBuf>,
    trials: Option<usize>,
) -> Result<()> {
    let problem = load(global)?;
    let trials = trials
        .or(problem.options.oracle_trials)
        .unwrap_or(DEFAULT_ORACLE_TRIALS);
    let seed = seed(global, &problem);
    let tally = match (measured, solution) {
        (Some(states), None) => generic_rank_oracle(&problem.a_pattern, &states, trials, seed)?,
        (None, Some(path)) => solution_oracle(&problem.a_pattern, &load_solution(&path)?, trials, seed)?,
        _ => {
            return Err(Error::InvalidInput(
                "oracle needs --measured or --solution".into(),
            ))
        }
    };
    let out: Value = json!({
        "observable_trials": tally.observable_trials,
        "trials": tally.trials,
        "seed": seed,
    });
    emit(global, &serde_json::to_string_pretty(&out).expect("tally serializes"))
}
