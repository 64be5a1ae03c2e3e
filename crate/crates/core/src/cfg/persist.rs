//! Text formats for diffing graphs across rounds.
//!
//! Edge list:
//! ```text
//! round 3
//! var temperature hw-context 3
//! var crash fault-indicator 2
//! edge temperature crash
//! ```
//! CPT dump, one block per variable in variable order:
//! ```text
//! cpt crash | temperature
//! 0 : 0.99 0.01
//! ```

use std::fmt::Write as _;

use super::graph::{CausalFaultGraph, Cpt, Dag, Variable};
use super::CfgError;
use crate::logs::VarKind;

pub fn to_edge_list(g: &CausalFaultGraph) -> String {
    let mut out = format!("round {}\n", g.round);
    for v in &g.variables {
        let _ = writeln!(out, "var {} {} {}", v.id, v.kind.as_str(), v.arity);
    }
    for (a, b) in g.dag.edges() {
        let _ = writeln!(out, "edge {} {}", g.variables[a].id, g.variables[b].id);
    }
    out
}

fn parse_err(line: &str) -> CfgError {
    CfgError::Parse(line.to_string())
}

/// Parses an edge list into (round, variables, graph).
pub fn parse_edge_list(text: &str) -> Result<(u64, Vec<Variable>, Dag), CfgError> {
    let mut round = 0;
    let mut variables = Vec::new();
    let mut edges = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["round", r] => round = r.parse().map_err(|_| parse_err(line))?,
            ["var", id, kind, arity] => variables.push(Variable {
                id: id.to_string(),
                kind: VarKind::parse(kind).ok_or_else(|| parse_err(line))?,
                arity: arity.parse().map_err(|_| parse_err(line))?,
            }),
            ["edge", a, b] => edges.push((a.to_string(), b.to_string())),
            _ => return Err(parse_err(line)),
        }
    }
    let index = |id: &str| {
        variables
            .iter()
            .position(|v| v.id == id)
            .ok_or_else(|| CfgError::UnknownVariable(id.to_string()))
    };
    let pairs = edges
        .iter()
        .map(|(a, b)| Ok((index(a)?, index(b)?)))
        .collect::<Result<Vec<_>, CfgError>>()?;
    let dag = Dag::from_edges(variables.len(), &pairs)?;
    Ok((round, variables, dag))
}

pub fn to_cpt_dump(g: &CausalFaultGraph) -> String {
    let mut out = String::new();
    for (v, cpt) in g.cpts.iter().enumerate() {
        let parents: Vec<&str> = g.parents(v).iter().map(|&p| g.variables[p].id.as_str()).collect();
        let _ = writeln!(out, "cpt {} | {}", g.variables[v].id, parents.join(" "));
        for (j, row) in cpt.rows.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|p| format!("{p:?}")).collect();
            let cfg: Vec<String> = cpt.states_of(j).iter().map(u8::to_string).collect();
            let _ = writeln!(out, "{} : {}", if cfg.is_empty() { "-".into() } else { cfg.join(",") }, cells.join(" "));
        }
    }
    out
}

/// Reads a graph back from its edge list and CPT dump.
pub fn parse_graph(edges: &str, cpts: &str) -> Result<CausalFaultGraph, CfgError> {
    let (round, variables, dag) = parse_edge_list(edges)?;
    let mut tables: Vec<Option<Cpt>> = vec![None; variables.len()];
    let mut current: Option<usize> = None;
    for line in cpts.lines().filter(|l| !l.trim().is_empty()) {
        if let Some(rest) = line.strip_prefix("cpt ") {
            let id = rest.split(" | ").next().unwrap_or("").trim();
            let v = variables
                .iter()
                .position(|x| x.id == id)
                .ok_or_else(|| CfgError::UnknownVariable(id.to_string()))?;
            let parent_arities = dag.parents(v).iter().map(|&p| variables[p].arity).collect();
            tables[v] = Some(Cpt {
                arity: variables[v].arity,
                parent_arities,
                rows: Vec::new(),
            });
            current = Some(v);
        } else {
            let v = current.ok_or_else(|| parse_err(line))?;
            let (_, cells) = line.split_once(" : ").ok_or_else(|| parse_err(line))?;
            let row = cells
                .split_whitespace()
                .map(|c| c.parse::<f64>().map_err(|_| parse_err(line)))
                .collect::<Result<Vec<_>, _>>()?;
            tables[v].as_mut().expect("table opened").rows.push(row);
        }
    }
    let cpts = tables
        .into_iter()
        .enumerate()
        .map(|(v, t)| t.ok_or_else(|| CfgError::Parse(format!("no table for `{}`", variables[v].id))))
        .collect::<Result<Vec<_>, _>>()?;
    CausalFaultGraph::new(variables, dag, cpts, round)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::{fit_cpts, Columns};

    #[test]
    fn roundtrip_is_exact() {
        let variables = vec![
            Variable { id: "temperature".into(), kind: VarKind::HwContext, arity: 3 },
            Variable { id: "crash".into(), kind: VarKind::Fault, arity: 2 },
        ];
        let rows = vec![vec![0, 0], vec![2, 1], vec![1, 0], vec![2, 1]];
        let data = Columns::from_rows(vec![3, 2], &rows);
        let dag = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let g = fit_cpts(variables, dag, &data, 1.0, 4).unwrap();
        let back = parse_graph(&to_edge_list(&g), &to_cpt_dump(&g)).unwrap();
        assert_eq!(back, g);
        assert!(to_edge_list(&g).contains("edge temperature crash"));
    }
}
