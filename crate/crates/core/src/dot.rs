//! Graphviz rendering of system digraphs.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::digraph::{parent_sccs, SccDecomposition};
use crate::sysmodel::StructuredMatrix;

/// System digraph with parent SCCs drawn as dashed clusters and measured
/// states as boxes. States are labeled 1-based.
pub fn system_to_dot(a: &StructuredMatrix, dec: &SccDecomposition, measured: &[usize]) -> String {
    let measured: BTreeSet<usize> = measured.iter().copied().collect();
    let mut out = String::from("digraph system {\n  node [shape=circle];\n");
    let node = |out: &mut String, indent: &str, v: usize| {
        let shape = if measured.contains(&v) { ", shape=box" } else { "" };
        let _ = writeln!(out, "{indent}x{v} [label=\"x{}\"{shape}];", v + 1);
    };
    let parents: BTreeSet<usize> = parent_sccs(dec).into_iter().collect();
    for (k, members) in dec.components.iter().enumerate() {
        if parents.contains(&k) {
            let _ = writeln!(out, "  subgraph cluster_parent{k} {{\n    style=dashed;");
            for &v in members {
                node(&mut out, "    ", v);
            }
            out.push_str("  }\n");
        } else {
            for &v in members {
                node(&mut out, "  ", v);
            }
        }
    }
    for (i, j) in a.positions() {
        if i != j {
            let _ = writeln!(out, "  x{j} -> x{i};");
        }
    }
    out.push_str("}\n");
    out
}
