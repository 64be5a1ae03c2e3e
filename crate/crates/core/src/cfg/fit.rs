use super::graph::{CausalFaultGraph, Cpt, Dag, Variable};
use super::score::Columns;
use super::CfgError;

/// Dirichlet posterior-mean tables with BDeu pseudo-counts.
pub fn fit_cpts(
    variables: Vec<Variable>,
    dag: Dag,
    data: &Columns,
    ess: f64,
    round: u64,
) -> Result<CausalFaultGraph, CfgError> {
    if !(ess > 0.0) {
        return Err(CfgError::InvalidOption("ess must be > 0".into()));
    }
    if variables.len() != dag.len() || data.len() != dag.len() {
        return Err(CfgError::VariableMismatch("variables, graph and evidence differ in size".into()));
    }
    let cpts = (0..dag.len())
        .map(|v| {
            let parents = dag.parents(v);
            let r = variables[v].arity;
            let parent_arities: Vec<usize> = parents.iter().map(|&p| variables[p].arity).collect();
            let q: usize = parent_arities.iter().product();
            let counts = data.family_counts(v, parents);
            let a_ij = ess / q as f64;
            let a_ijk = a_ij / r as f64;
            let rows = (0..q)
                .map(|j| {
                    let row = &counts[j * r..(j + 1) * r];
                    let n_ij: u32 = row.iter().sum();
                    let denom = n_ij as f64 + a_ij;
                    row.iter().map(|&n| (n as f64 + a_ijk) / denom).collect()
                })
                .collect();
            Cpt {
                arity: r,
                parent_arities,
                rows,
            }
        })
        .collect();
    CausalFaultGraph::new(variables, dag, cpts, round)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logs::VarKind;

    fn vars(n: usize) -> Vec<Variable> {
        (0..n)
            .map(|i| Variable {
                id: format!("v{i}"),
                kind: VarKind::Fault,
                arity: 2,
            })
            .collect()
    }

    #[test]
    fn smoothed_counts() {
        // Parent = 1 in four rows, child active in three of them.
        let rows = vec![vec![1, 1], vec![1, 1], vec![1, 1], vec![1, 0], vec![0, 0]];
        let data = Columns::from_rows(vec![2, 2], &rows);
        let dag = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let g = fit_cpts(vars(2), dag, &data, 1.0, 1).unwrap();
        assert!((g.cpts[1].rows[1][1] - 3.25 / 4.5).abs() < 1e-12);
    }

    #[test]
    fn no_data_gives_uniform_rows() {
        let data = Columns::from_rows(vec![2, 2], &[]);
        let dag = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let g = fit_cpts(vars(2), dag, &data, 1.0, 0).unwrap();
        for cpt in &g.cpts {
            for row in &cpt.rows {
                assert_eq!(row, &vec![0.5, 0.5]);
            }
        }
    }

    #[test]
    fn smoothing_vanishes_with_many_deterministic_samples() {
        let rows: Vec<Vec<u8>> = (0..1_000_000).map(|i| {
            let a = (i % 2) as u8;
            vec![a, a]
        }).collect();
        let data = Columns::from_rows(vec![2, 2], &rows);
        let dag = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let g = fit_cpts(vars(2), dag, &data, 1.0, 0).unwrap();
        for row in &g.cpts[1].rows {
            for &p in row {
                assert!(p < 1e-3 || p > 1.0 - 1e-3);
            }
        }
    }
}
