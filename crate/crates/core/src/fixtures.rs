//! Canonical small networks used throughout the tests, the CLI fixtures
//! directory and the documentation.

use crate::graph::{Dag, Digraph, LossFunction};

/// Long unit-loss chain `s -> 1 -> ... -> m-1 -> t` (total loss `m`) next to
/// a direct edge `s -> t` with loss `1 + eps`.
pub fn fig1(m: usize, eps: f64) -> (Dag, LossFunction) {
    assert!(m >= 2, "chain needs at least one interior node");
    let mut nodes = vec!["s".to_string()];
    nodes.extend((1..m).map(|k| k.to_string()));
    nodes.push("t".into());
    let mut edges: Vec<(String, String)> =
        nodes.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
    edges.push(("s".into(), "t".into()));
    let dag = Dag::from_labels(&nodes, &edges).expect("fig1 is a valid DAG");
    let shortcut = dag.edge_id(dag.source(), dag.node("t").unwrap()).unwrap();
    let losses = LossFunction::from_fn(&dag, |_, _| 1.0)
        .expect("unit losses")
        .with_value(shortcut, 1.0 + eps);
    (dag, losses)
}

/// `s -> i, s -> j, j -> k, i -> t, j -> t, k -> t`.
pub fn fig2() -> Dag {
    Dag::from_labels(
        &["s", "i", "j", "k", "t"],
        &[("s", "i"), ("s", "j"), ("j", "k"), ("i", "t"), ("j", "t"), ("k", "t")],
    )
    .expect("fig2 is a valid DAG")
}

/// Losses on [`fig2`] given as `[si, it, sj, jt, jk, kt]`.
pub fn fig2_losses(dag: &Dag, [si, it, sj, jt, jk, kt]: [f64; 6]) -> LossFunction {
    let table = [("s", "i", si), ("i", "t", it), ("s", "j", sj), ("j", "t", jt), ("j", "k", jk), ("k", "t", kt)];
    LossFunction::from_fn(dag, |a, b| {
        let (a, b) = (dag.label(a), dag.label(b));
        table.iter().find(|(x, y, _)| *x == a && *y == b).map(|t| t.2).expect("fig2 edge")
    })
    .expect("valid losses")
}

/// Two-row grid with `m` columns: `2m + 2` nodes and `2^m` paths.
pub fn grid(m: usize) -> Dag {
    assert!(m >= 1);
    let mut nodes = vec!["s".to_string()];
    for x in 1..=m {
        nodes.push(format!("i{x}"));
        nodes.push(format!("j{x}"));
    }
    nodes.push("t".into());
    let mut edges = vec![("s".to_string(), "i1".to_string()), ("s".into(), "j1".into())];
    for x in 1..m {
        for a in ["i", "j"] {
            for b in ["i", "j"] {
                edges.push((format!("{a}{x}"), format!("{b}{}", x + 1)));
            }
        }
    }
    edges.push((format!("i{m}"), "t".into()));
    edges.push((format!("j{m}"), "t".into()));
    Dag::from_labels(&nodes, &edges).expect("grid is a valid DAG")
}

/// `s -> t, s -> i, i -> j, i -> t, j -> t`.
pub fn fig4() -> Dag {
    Dag::from_labels(&["s", "i", "j", "t"], &[("s", "t"), ("s", "i"), ("i", "j"), ("i", "t"), ("j", "t")])
        .expect("fig4 is a valid DAG")
}

/// The two loss functions of the on-path-only impossibility argument:
/// `st = it = jt = 1`, `si = ij = 0`; the primed variant sets `it = 0`.
pub fn fig4_losses(dag: &Dag, primed: bool) -> LossFunction {
    LossFunction::from_fn(dag, |a, b| match (dag.label(a), dag.label(b)) {
        ("s", "i") | ("i", "j") => 0.0,
        ("i", "t") if primed => 0.0,
        _ => 1.0,
    })
    .expect("valid losses")
}

/// Source feeding complete bipartite layers of the given sizes, all of which
/// feed a single sink `t`.
pub fn tiered(layer_sizes: &[usize]) -> Dag {
    let mut nodes = vec!["s".to_string()];
    let mut layers: Vec<Vec<String>> = vec![vec!["s".into()]];
    for (l, &size) in layer_sizes.iter().enumerate() {
        let layer: Vec<String> = (0..size).map(|k| format!("L{}_{}", l + 1, k)).collect();
        nodes.extend(layer.iter().cloned());
        layers.push(layer);
    }
    nodes.push("t".into());
    layers.push(vec!["t".into()]);
    let mut edges = Vec::new();
    for pair in layers.windows(2) {
        for a in &pair[0] {
            for b in &pair[1] {
                edges.push((a.clone(), b.clone()));
            }
        }
    }
    Dag::from_labels(&nodes, &edges).expect("tiered graph is a valid DAG")
}

/// Line `s -> i -> t` plus the shortcut `s -> t`.
pub fn shortcut_triangle() -> Dag {
    Dag::from_labels(&["s", "i", "t"], &[("s", "i"), ("i", "t"), ("s", "t")]).expect("valid")
}

/// Single source with two sinks, used as the one-decision game.
pub fn fork() -> Digraph {
    Digraph::from_labels(&["s", "t1", "t2"], &[("s", "t1"), ("s", "t2")]).expect("valid")
}
