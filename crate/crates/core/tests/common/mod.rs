//! Brute-force oracles that only use the graph accessors of the library.

#![allow(dead_code)]

use cascade_core::axioms::{random_dag, trial_rng, GeneratorConfig};
use cascade_core::{Dag, LossFunction, NodeId};

/// Every source-to-sink path as node indices, by plain depth-first search.
pub fn all_paths(dag: &Dag) -> Vec<Vec<usize>> {
    fn go(dag: &Dag, v: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        prefix.push(v);
        let succ = dag.successors(NodeId::new(v));
        if succ.is_empty() {
            out.push(prefix.clone());
        }
        for &w in succ {
            go(dag, w, prefix, out);
        }
        prefix.pop();
    }
    let mut out = Vec::new();
    go(dag, dag.source().index(), &mut Vec::new(), &mut out);
    out
}

pub fn path_cost(dag: &Dag, losses: &LossFunction, path: &[usize]) -> f64 {
    path.windows(2)
        .map(|w| losses.get(dag.edge_id(NodeId::new(w[0]), NodeId::new(w[1])).expect("edge on path")))
        .sum()
}

pub fn non_sinks(dag: &Dag) -> Vec<usize> {
    (0..dag.node_count()).filter(|&v| !dag.successors(NodeId::new(v)).is_empty()).collect()
}

/// Share of paths all of whose non-sink nodes are in `members`.
pub fn coalition_value(paths: &[Vec<usize>], members: &[bool]) -> f64 {
    let covered = paths.iter().filter(|p| p[..p.len() - 1].iter().all(|&v| members[v])).count();
    covered as f64 / paths.len() as f64
}

/// Shapley values of the path-counting game averaged over every ordering of
/// the non-sink players. Sinks get 0.
pub fn shapley_by_permutations(dag: &Dag) -> Vec<f64> {
    let paths = all_paths(dag);
    let players = non_sinks(dag);
    assert!(players.len() <= 8, "permutation oracle is factorial");
    let mut phi = vec![0.0; dag.node_count()];
    let mut order = players.clone();
    let mut count = 0u64;
    permute(&mut order, 0, &mut |perm| {
        count += 1;
        let mut members = vec![false; dag.node_count()];
        let mut before = 0.0;
        for &v in perm {
            members[v] = true;
            let after = coalition_value(&paths, &members);
            phi[v] += after - before;
            before = after;
        }
    });
    phi.iter().map(|x| x / count as f64).collect()
}

fn permute(items: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        f(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, f);
        items.swap(k, i);
    }
}

/// `1/|P|` credit to every non-sink node of each path, averaged over paths.
pub fn wstar_by_formula(dag: &Dag) -> Vec<f64> {
    let paths = all_paths(dag);
    let mut w = vec![0.0; dag.node_count()];
    for p in &paths {
        let agents = &p[..p.len() - 1];
        for &v in agents {
            w[v] += 1.0 / agents.len() as f64;
        }
    }
    w.iter().map(|x| x / paths.len() as f64).collect()
}

/// Minimum-cost paths by exhaustive comparison.
pub fn efficient_by_enumeration(dag: &Dag, losses: &LossFunction, tol: f64) -> (f64, Vec<Vec<usize>>) {
    let paths = all_paths(dag);
    let costs: Vec<f64> = paths.iter().map(|p| path_cost(dag, losses, p)).collect();
    let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut eff: Vec<Vec<usize>> =
        paths.into_iter().zip(&costs).filter(|(_, &c)| c <= best + tol).map(|(p, _)| p).collect();
    eff.sort();
    (best, eff)
}

/// Random graph from trial `trial` of `seed`, redrawn on later streams until
/// `accept` holds.
pub fn random_graph_where(
    seed: u64,
    trial: usize,
    generator: &GeneratorConfig,
    accept: impl Fn(&Dag) -> bool,
) -> Dag {
    for attempt in 0.. {
        let mut rng = trial_rng(seed, trial + attempt * 1_000_003);
        let dag = random_dag(&mut rng, generator);
        if accept(&dag) {
            return dag;
        }
    }
    unreachable!()
}

pub fn labels_of(dag: &Dag, path: &[usize]) -> Vec<String> {
    path.iter().map(|&v| dag.label(NodeId::new(v)).to_string()).collect()
}
