//! Cancellation networks: validated DAGs, loss functions, paths, path
//! counting and cheapest-continuation dynamic programming.
//!
//! Every [`Dag`] is stored with its nodes renumbered along a deterministic
//! topological order, so `i -> j` always implies `i < j` and the source is
//! node `0`. Edges are sorted lexicographically; the outgoing edges of a node
//! occupy a contiguous block of edge ids in successor order.

use std::collections::{BinaryHeap, HashMap, HashSet};
use std::cmp::Reverse;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

/// Default absolute tolerance for cost comparisons on real-valued losses.
pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("graph has {0} nodes; at least 3 are required")]
    TooFewNodes(usize),
    #[error("duplicate node label `{0}`")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge {0}->{1}")]
    DuplicateEdge(String, String),
    #[error("cycle detected through `{0}`")]
    Cycle(String),
    #[error("no node has in-degree 0")]
    NoSource,
    #[error("multiple nodes with in-degree 0 ({0:?}); pick one with `source` or extract a reachable subgraph")]
    MultipleSources(Vec<String>),
    #[error("declared source `{0}` has incoming edges")]
    SourceHasPredecessors(String),
    #[error("node `{0}` is not reachable from the source")]
    Unreachable(String),
    #[error("more than {0} paths; raise the path cap or use a counting method")]
    PathCapExceeded(usize),
    #[error("invalid loss {value} on edge {edge}; losses must be finite and non-negative")]
    InvalidLoss { edge: String, value: f64 },
    #[error("no loss given for edge {0}")]
    MissingLoss(String),
    #[error("loss function has {got} entries but the graph has {expected} edges")]
    LossArity { expected: usize, got: usize },
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("malformed graph input: {0}")]
    Parse(String),
}

/// Dense node handle. Indices follow the owning [`Dag`]'s topological order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[repr(transparent)]
pub struct NodeId(usize);

impl NodeId {
    pub const fn new(index: usize) -> Self {
        NodeId(index)
    }

    pub const fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Unvalidated directed graph with labelled nodes. May have several nodes of
/// in-degree zero; this is the shape of generated supply networks before a
/// shocked node is picked.
#[derive(Debug, Clone, PartialEq)]
pub struct Digraph {
    labels: Vec<String>,
    edges: Vec<(usize, usize)>,
}

impl Digraph {
    pub fn new(labels: Vec<String>, edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        let mut seen = HashSet::with_capacity(labels.len());
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(GraphError::DuplicateNode(label.clone()));
            }
        }
        let mut edge_set = HashSet::with_capacity(edges.len());
        for &(a, b) in &edges {
            if a >= labels.len() || b >= labels.len() {
                return Err(GraphError::UnknownNode(format!("#{}", a.max(b))));
            }
            if a == b {
                return Err(GraphError::SelfLoop(labels[a].clone()));
            }
            if !edge_set.insert((a, b)) {
                return Err(GraphError::DuplicateEdge(labels[a].clone(), labels[b].clone()));
            }
        }
        Ok(Digraph { labels, edges })
    }

    /// Builds a graph from label pairs; nodes are created in the given order.
    pub fn from_labels<S: AsRef<str>>(nodes: &[S], edges: &[(S, S)]) -> Result<Self, GraphError> {
        let labels: Vec<String> = nodes.iter().map(|s| s.as_ref().to_string()).collect();
        let index: HashMap<&str, usize> =
            labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let lookup = |s: &S| {
            index
                .get(s.as_ref())
                .copied()
                .ok_or_else(|| GraphError::UnknownNode(s.as_ref().to_string()))
        };
        let mut pairs = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            pairs.push((lookup(a)?, lookup(b)?));
        }
        Digraph::new(labels, pairs)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.labels.len()];
        for &(_, b) in &self.edges {
            deg[b] += 1;
        }
        deg
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.labels.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Kahn's algorithm, smallest original index first among ready nodes.
    /// Returns the order, or a node that lies on (or behind) a cycle.
    fn topological_order(&self) -> Result<Vec<usize>, usize> {
        let adj = self.adjacency();
        let mut indeg = self.in_degrees();
        let mut ready: BinaryHeap<Reverse<usize>> = indeg
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| Reverse(i))
            .collect();
        let mut order = Vec::with_capacity(self.labels.len());
        while let Some(Reverse(v)) = ready.pop() {
            order.push(v);
            for &w in &adj[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    ready.push(Reverse(w));
                }
            }
        }
        if order.len() == self.labels.len() {
            Ok(order)
        } else {
            let stuck = (0..self.labels.len()).find(|&v| indeg[v] > 0).unwrap_or(0);
            Err(stuck)
        }
    }

    fn reachable_from(&self, root: usize) -> Vec<bool> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.labels.len()];
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }
}

/// Immutable single-source DAG.
#[derive(Debug, Clone, PartialEq)]
pub struct Dag {
    labels: Vec<String>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    edge_start: Vec<usize>,
    lookup: HashMap<String, usize>,
}

impl Dag {
    /// Validates `graph` and renumbers it topologically. When `source` is
    /// `None` the unique in-degree-0 node is used.
    pub fn from_digraph(graph: &Digraph, source: Option<&str>) -> Result<Dag, GraphError> {
        let n = graph.node_count();
        let order = graph
            .topological_order()
            .map_err(|v| GraphError::Cycle(graph.labels[v].clone()))?;
        let indeg = graph.in_degrees();
        let roots: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let source = match source {
            Some(label) => {
                let s = graph
                    .index_of(label)
                    .ok_or_else(|| GraphError::UnknownNode(label.to_string()))?;
                if indeg[s] != 0 {
                    return Err(GraphError::SourceHasPredecessors(label.to_string()));
                }
                s
            }
            None => match roots.as_slice() {
                [] => return Err(GraphError::NoSource),
                [s] => *s,
                _ => {
                    return Err(GraphError::MultipleSources(
                        roots.iter().map(|&v| graph.labels[v].clone()).collect(),
                    ))
                }
            },
        };
        let reach = graph.reachable_from(source);
        if let Some(v) = (0..n).find(|&v| !reach[v]) {
            return Err(GraphError::Unreachable(graph.labels[v].clone()));
        }
        if n < 3 {
            return Err(GraphError::TooFewNodes(n));
        }
        // With a single root that reaches everything, the root is first in
        // Kahn's order.
        debug_assert_eq!(order[0], source);
        let mut new_index = vec![0; n];
        for (pos, &v) in order.iter().enumerate() {
            new_index[v] = pos;
        }
        let labels: Vec<String> = order.iter().map(|&v| graph.labels[v].clone()).collect();
        let edges = graph
            .edges
            .iter()
            .map(|&(a, b)| (new_index[a], new_index[b]))
            .collect();
        Ok(Dag::from_topological(labels, edges))
    }

    /// Assembles a DAG whose labels are already in topological order and
    /// whose edges all point forward.
    fn from_topological(labels: Vec<String>, mut edges: Vec<(usize, usize)>) -> Dag {
        let n = labels.len();
        edges.sort_unstable();
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for &(a, b) in &edges {
            debug_assert!(a < b);
            succ[a].push(b);
            pred[b].push(a);
        }
        let mut edge_start = Vec::with_capacity(n + 1);
        let mut acc = 0;
        for list in &succ {
            edge_start.push(acc);
            acc += list.len();
        }
        edge_start.push(acc);
        let lookup = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        Dag { labels, succ, pred, edges, edge_start, lookup }
    }

    /// Convenience constructor from string labels.
    pub fn from_labels<S: AsRef<str>>(nodes: &[S], edges: &[(S, S)]) -> Result<Dag, GraphError> {
        Dag::from_digraph(&Digraph::from_labels(nodes, edges)?, None)
    }

    pub fn to_digraph(&self) -> Digraph {
        Digraph { labels: self.labels.clone(), edges: self.edges.clone() }
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn source(&self) -> NodeId {
        NodeId(0)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.labels.len()).map(NodeId)
    }

    pub fn label(&self, node: NodeId) -> &str {
        &self.labels[node.0]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn node(&self, label: &str) -> Option<NodeId> {
        self.lookup.get(label).map(|&i| NodeId(i))
    }

    pub fn is_sink(&self, node: NodeId) -> bool {
        self.succ[node.0].is_empty()
    }

    pub fn sinks(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes().filter(|&v| self.is_sink(v))
    }

    /// Non-sink agents, the players of the path-counting game.
    pub fn non_sinks(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes().filter(|&v| !self.is_sink(v))
    }

    pub fn successors(&self, node: NodeId) -> &[usize] {
        &self.succ[node.0]
    }

    pub fn predecessors(&self, node: NodeId) -> &[usize] {
        &self.pred[node.0]
    }

    pub fn out_degree(&self, node: NodeId) -> usize {
        self.succ[node.0].len()
    }

    /// Edge list as `(from, to)` index pairs, ordered by edge id.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Ids of `node`'s outgoing edges, aligned with [`Dag::successors`].
    pub fn out_edges(&self, node: NodeId) -> std::ops::Range<usize> {
        self.edge_start[node.0]..self.edge_start[node.0 + 1]
    }

    pub fn edge_id(&self, from: NodeId, to: NodeId) -> Option<usize> {
        self.succ[from.0]
            .binary_search(&to.0)
            .ok()
            .map(|pos| self.edge_start[from.0] + pos)
    }

    pub fn edge_label(&self, edge: usize) -> String {
        let (a, b) = self.edges[edge];
        format!("{}->{}", self.labels[a], self.labels[b])
    }

    /// Interior nodes lying on every source-sink path.
    pub fn bottlenecks(&self) -> Vec<NodeId> {
        let n = self.node_count();
        (1..n)
            .filter(|&v| !self.succ[v].is_empty())
            .filter(|&removed| {
                let mut reach = vec![false; n];
                reach[0] = true;
                let mut hits_sink = false;
                for v in 0..n {
                    if !reach[v] || v == removed {
                        continue;
                    }
                    if self.succ[v].is_empty() {
                        hits_sink = true;
                        break;
                    }
                    for &w in &self.succ[v] {
                        reach[w] = true;
                    }
                }
                !hits_sink
            })
            .map(NodeId)
            .collect()
    }
}

/// A source-to-sink path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    nodes: Vec<NodeId>,
}

impl Path {
    pub fn new(dag: &Dag, nodes: Vec<NodeId>) -> Result<Path, GraphError> {
        let path = Path { nodes };
        path.check(dag)?;
        Ok(path)
    }

    pub fn from_labels<S: AsRef<str>>(dag: &Dag, labels: &[S]) -> Result<Path, GraphError> {
        let nodes = labels
            .iter()
            .map(|l| dag.node(l.as_ref()).ok_or_else(|| GraphError::UnknownNode(l.as_ref().into())))
            .collect::<Result<Vec<_>, _>>()?;
        Path::new(dag, nodes)
    }

    pub(crate) fn from_indices(indices: &[usize]) -> Path {
        Path { nodes: indices.iter().map(|&i| NodeId(i)).collect() }
    }

    /// Checks that this is a source-to-sink path of `dag`.
    pub fn check(&self, dag: &Dag) -> Result<(), GraphError> {
        let invalid = |msg: String| Err(GraphError::InvalidPath(msg));
        let (first, last) = match (self.nodes.first(), self.nodes.last()) {
            (Some(&f), Some(&l)) => (f, l),
            _ => return invalid("empty path".into()),
        };
        if self.nodes.iter().any(|v| v.0 >= dag.node_count()) {
            return invalid("node outside graph".into());
        }
        if first != dag.source() {
            return invalid(format!("starts at `{}`, not the source", dag.label(first)));
        }
        if !dag.is_sink(last) {
            return invalid(format!("ends at `{}`, which is not a sink", dag.label(last)));
        }
        for pair in self.nodes.windows(2) {
            if dag.edge_id(pair[0], pair[1]).is_none() {
                return invalid(format!(
                    "no edge {}->{}",
                    dag.label(pair[0]),
                    dag.label(pair[1])
                ));
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn sink(&self) -> NodeId {
        *self.nodes.last().expect("paths are non-empty")
    }

    /// The non-sink agents of the path (every node but the last).
    pub fn non_sink_nodes(&self) -> &[NodeId] {
        &self.nodes[..self.nodes.len() - 1]
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.nodes.contains(&node)
    }

    /// Edge ids along the path. Panics if the path does not belong to `dag`.
    pub fn edge_ids<'a>(&'a self, dag: &'a Dag) -> impl Iterator<Item = usize> + 'a {
        self.nodes
            .windows(2)
            .map(move |w| dag.edge_id(w[0], w[1]).expect("path edge missing from graph"))
    }

    pub fn labels(&self, dag: &Dag) -> Vec<String> {
        self.nodes.iter().map(|&v| dag.label(v).to_string()).collect()
    }

    pub fn display(&self, dag: &Dag) -> String {
        self.labels(dag).join("->")
    }
}

/// Total non-negative loss on every edge of a particular [`Dag`], indexed by
/// edge id.
#[derive(Debug, Clone, PartialEq)]
pub struct LossFunction {
    values: Vec<f64>,
}

impl LossFunction {
    pub fn new(dag: &Dag, values: Vec<f64>) -> Result<LossFunction, GraphError> {
        if values.len() != dag.edge_count() {
            return Err(GraphError::LossArity { expected: dag.edge_count(), got: values.len() });
        }
        for (e, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(GraphError::InvalidLoss { edge: dag.edge_label(e), value });
            }
        }
        Ok(LossFunction { values })
    }

    pub fn zeros(dag: &Dag) -> LossFunction {
        LossFunction { values: vec![0.0; dag.edge_count()] }
    }

    /// Builds losses edge by edge from `f(from, to)`.
    pub fn from_fn(
        dag: &Dag,
        mut f: impl FnMut(NodeId, NodeId) -> f64,
    ) -> Result<LossFunction, GraphError> {
        let values = dag.edges().iter().map(|&(a, b)| f(NodeId(a), NodeId(b))).collect();
        LossFunction::new(dag, values)
    }

    /// Looks up each edge by its `"from->to"` label.
    pub fn from_label_map(
        dag: &Dag,
        map: &HashMap<String, f64>,
    ) -> Result<LossFunction, GraphError> {
        let mut values = Vec::with_capacity(dag.edge_count());
        for e in 0..dag.edge_count() {
            let key = dag.edge_label(e);
            match map.get(&key) {
                Some(&v) => values.push(v),
                None => return Err(GraphError::MissingLoss(key)),
            }
        }
        for key in map.keys() {
            let known = key
                .split_once("->")
                .and_then(|(a, b)| Some((dag.node(a)?, dag.node(b)?)))
                .and_then(|(a, b)| dag.edge_id(a, b));
            if known.is_none() {
                return Err(GraphError::Parse(format!("loss given for unknown edge `{key}`")));
            }
        }
        LossFunction::new(dag, values)
    }

    pub fn get(&self, edge: usize) -> f64 {
        self.values[edge]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn edge(&self, dag: &Dag, from: NodeId, to: NodeId) -> Option<f64> {
        dag.edge_id(from, to).map(|e| self.values[e])
    }

    pub fn path_loss(&self, dag: &Dag, path: &Path) -> f64 {
        path.edge_ids(dag).map(|e| self.values[e]).sum()
    }

    pub fn scaled(&self, factor: f64) -> LossFunction {
        LossFunction { values: self.values.iter().map(|v| v * factor).collect() }
    }

    pub fn with_value(&self, edge: usize, value: f64) -> LossFunction {
        let mut values = self.values.clone();
        values[edge] = value;
        LossFunction { values }
    }

    /// True when every loss is an integer small enough for exact `f64` sums.
    pub fn is_integral(&self) -> bool {
        self.values.iter().all(|v| v.fract() == 0.0 && v.abs() < 2f64.powi(48))
    }

    /// Comparison tolerance appropriate for these losses.
    pub fn comparison_tolerance(&self) -> f64 {
        if self.is_integral() {
            0.0
        } else {
            DEFAULT_TIE_TOLERANCE
        }
    }

    /// Map keyed by `"from->to"`.
    pub fn to_label_map(&self, dag: &Dag) -> std::collections::BTreeMap<String, f64> {
        (0..self.values.len()).map(|e| (dag.edge_label(e), self.values[e])).collect()
    }
}

/// All source-sink paths in lexicographic order of node index. With a cap,
/// fails as soon as more than `cap` paths exist.
pub fn enumerate_paths(dag: &Dag, cap: Option<usize>) -> Result<Vec<Path>, GraphError> {
    let mut out = Vec::new();
    let mut stack = vec![0usize];
    walk_paths(dag, &mut stack, &mut |p| {
        if let Some(cap) = cap {
            if out.len() >= cap {
                return Err(GraphError::PathCapExceeded(cap));
            }
        }
        out.push(Path::from_indices(p));
        Ok(())
    })?;
    Ok(out)
}

fn walk_paths(
    dag: &Dag,
    stack: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]) -> Result<(), GraphError>,
) -> Result<(), GraphError> {
    let v = *stack.last().expect("non-empty stack");
    if dag.succ[v].is_empty() {
        return visit(stack);
    }
    for &w in &dag.succ[v] {
        stack.push(w);
        walk_paths(dag, stack, visit)?;
        stack.pop();
    }
    Ok(())
}

/// Exact number of source-sink paths, by one forward pass.
pub fn count_paths(dag: &Dag) -> BigUint {
    let n = dag.node_count();
    let mut ways = vec![BigUint::zero(); n];
    ways[0] = BigUint::one();
    let mut total = BigUint::zero();
    for v in 0..n {
        if ways[v].is_zero() {
            continue;
        }
        if dag.succ[v].is_empty() {
            total += &ways[v];
            continue;
        }
        let here = ways[v].clone();
        for &w in &dag.succ[v] {
            ways[w] += &here;
        }
    }
    total
}

/// Cheapest node-to-sink continuation cost `L_i` (sinks are 0).
pub fn continuation_costs(dag: &Dag, losses: &LossFunction) -> Vec<f64> {
    let n = dag.node_count();
    let mut cost = vec![0.0; n];
    for v in (0..n).rev() {
        if dag.succ[v].is_empty() {
            continue;
        }
        cost[v] = dag
            .out_edges(NodeId(v))
            .zip(&dag.succ[v])
            .map(|(e, &w)| losses.get(e) + cost[w])
            .fold(f64::INFINITY, f64::min);
    }
    cost
}

/// Result of [`efficient_paths`].
#[derive(Debug, Clone, PartialEq)]
pub struct EfficientPaths {
    pub min_cost: f64,
    pub paths: Vec<Path>,
    /// `L_i` for every node, indexed by node index.
    pub continuation: Vec<f64>,
}

impl EfficientPaths {
    pub fn contains(&self, path: &Path) -> bool {
        self.paths.binary_search(path).is_ok()
    }
}

/// Efficient (minimum-loss) paths. A path qualifies when every step is tight:
/// `loss(i,j) + L_j <= L_i + tolerance`. Paths come out in lexicographic order.
pub fn efficient_paths(dag: &Dag, losses: &LossFunction, tolerance: f64) -> EfficientPaths {
    let continuation = continuation_costs(dag, losses);
    let mut paths = Vec::new();
    let mut stack = vec![0usize];
    tight_walk(dag, losses, &continuation, tolerance, &mut stack, &mut paths);
    EfficientPaths { min_cost: continuation[0], paths, continuation }
}

fn tight_walk(
    dag: &Dag,
    losses: &LossFunction,
    cost: &[f64],
    tolerance: f64,
    stack: &mut Vec<usize>,
    out: &mut Vec<Path>,
) {
    let v = *stack.last().expect("non-empty stack");
    if dag.succ[v].is_empty() {
        out.push(Path::from_indices(stack));
        return;
    }
    for (e, &w) in dag.out_edges(NodeId(v)).zip(&dag.succ[v]) {
        if losses.get(e) + cost[w] <= cost[v] + tolerance {
            stack.push(w);
            tight_walk(dag, losses, cost, tolerance, stack, out);
            stack.pop();
        }
    }
}

/// Induced subgraph on everything reachable from `root`, which becomes the
/// unique source. Also returns, for each node of the result, its index in
/// `graph`.
pub fn reachable_subgraph_with_map(
    graph: &Digraph,
    root: &str,
) -> Result<(Dag, Vec<usize>), GraphError> {
    let r = graph.index_of(root).ok_or_else(|| GraphError::UnknownNode(root.to_string()))?;
    let keep = graph.reachable_from(r);
    let mut old_to_new = vec![usize::MAX; graph.node_count()];
    let mut labels = Vec::new();
    let mut kept = Vec::new();
    for v in 0..graph.node_count() {
        if keep[v] {
            old_to_new[v] = labels.len();
            labels.push(graph.labels[v].clone());
            kept.push(v);
        }
    }
    let edges = graph
        .edges
        .iter()
        .filter(|&&(a, b)| keep[a] && keep[b])
        .map(|&(a, b)| (old_to_new[a], old_to_new[b]))
        .collect();
    let sub = Digraph::new(labels, edges)?;
    let dag = Dag::from_digraph(&sub, Some(root))?;
    let map = dag
        .labels()
        .iter()
        .map(|l| kept[sub.index_of(l).expect("label kept")])
        .collect();
    Ok((dag, map))
}

pub fn reachable_subgraph(graph: &Digraph, root: &str) -> Result<Dag, GraphError> {
    reachable_subgraph_with_map(graph, root).map(|(dag, _)| dag)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub dag: Option<Dag>,
    #[serde(skip)]
    pub failure: Option<GraphError>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.failure.is_none()
    }

    pub fn status(&self, name: &str) -> Option<CheckStatus> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.status)
    }

    /// `Some(true)` when no interior node lies on every path.
    pub fn no_bottlenecks(&self) -> Option<bool> {
        match self.status("no_bottleneck")? {
            CheckStatus::Pass => Some(true),
            CheckStatus::Warn => Some(false),
            _ => None,
        }
    }
}

/// Structural checks on a raw graph. Bottleneck nodes produce a warning, not
/// a failure.
pub fn validate(graph: &Digraph, source: Option<&str>) -> ValidationReport {
    const NAMES: [&str; 6] =
        ["node_count", "acyclic", "unique_source", "connected", "sink_out_degree", "no_bottleneck"];
    let mut checks = Vec::new();
    let pass = |name, detail: String| CheckOutcome { name, status: CheckStatus::Pass, detail };

    let n = graph.node_count();
    let order = graph.topological_order();
    match &order {
        Ok(_) => checks.push(pass("acyclic", "topological order exists".into())),
        Err(v) => checks.push(CheckOutcome {
            name: "acyclic",
            status: CheckStatus::Fail,
            detail: format!("cycle through `{}`", graph.labels[*v]),
        }),
    }
    let result = Dag::from_digraph(graph, source);
    let failure = result.as_ref().err().cloned();
    let status_for = |name: &str| -> Option<CheckStatus> {
        match &failure {
            None => Some(CheckStatus::Pass),
            Some(GraphError::Cycle(_)) => None,
            Some(GraphError::NoSource)
            | Some(GraphError::MultipleSources(_))
            | Some(GraphError::SourceHasPredecessors(_))
            | Some(GraphError::UnknownNode(_))
                if name == "unique_source" =>
            {
                Some(CheckStatus::Fail)
            }
            Some(GraphError::Unreachable(_)) if name == "connected" => Some(CheckStatus::Fail),
            Some(GraphError::TooFewNodes(_)) if name == "node_count" => Some(CheckStatus::Fail),
            Some(_) => None,
        }
    };
    for name in NAMES {
        if name == "acyclic" || name == "no_bottleneck" {
            continue;
        }
        let status = status_for(name).unwrap_or(CheckStatus::Skipped);
        let detail = match (name, status) {
            ("node_count", _) => format!("{n} nodes"),
            (_, CheckStatus::Fail) => failure.as_ref().map(|e| e.to_string()).unwrap_or_default(),
            ("unique_source", CheckStatus::Pass) => {
                let dag = result.as_ref().expect("valid");
                format!("source `{}`", dag.label(dag.source()))
            }
            ("connected", CheckStatus::Pass) => "every node reachable from the source".into(),
            ("sink_out_degree", CheckStatus::Pass) => {
                let dag = result.as_ref().expect("valid");
                format!("{} sink(s); all other nodes have successors", dag.sinks().count())
            }
            _ => String::new(),
        };
        checks.push(CheckOutcome { name, status, detail });
    }
    match &result {
        Ok(dag) => {
            let necks = dag.bottlenecks();
            checks.push(if necks.is_empty() {
                pass("no_bottleneck", "every interior node is avoided by some path".into())
            } else {
                CheckOutcome {
                    name: "no_bottleneck",
                    status: CheckStatus::Warn,
                    detail: format!(
                        "on every path: {}",
                        necks.iter().map(|&v| dag.label(v)).collect::<Vec<_>>().join(", ")
                    ),
                }
            });
        }
        Err(_) => checks.push(CheckOutcome {
            name: "no_bottleneck",
            status: CheckStatus::Skipped,
            detail: String::new(),
        }),
    }
    checks.sort_by_key(|c| NAMES.iter().position(|&n| n == c.name));
    ValidationReport {
        checks,
        error: failure.as_ref().map(|e| e.to_string()),
        dag: result.ok(),
        failure,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn labels(paths: &[Path], dag: &Dag) -> Vec<String> {
        paths.iter().map(|p| p.display(dag)).collect()
    }

    #[test]
    fn triangle_is_valid_without_bottleneck() {
        let g = Digraph::from_labels(&["s", "i", "t"], &[("s", "i"), ("i", "t"), ("s", "t")]).unwrap();
        let report = validate(&g, None);
        assert!(report.is_valid());
        assert_eq!(report.no_bottlenecks(), Some(true));
    }

    #[test]
    fn line_graph_warns_about_bottleneck() {
        let g = Digraph::from_labels(&["s", "i", "t"], &[("s", "i"), ("i", "t")]).unwrap();
        let report = validate(&g, None);
        assert!(report.is_valid());
        assert_eq!(report.no_bottlenecks(), Some(false));
        assert!(report.checks.iter().any(|c| c.detail.contains('i')));
    }

    #[test]
    fn two_cycle_is_rejected() {
        let g = Digraph::from_labels(&["s", "i", "t"], &[("s", "i"), ("i", "s"), ("i", "t")]).unwrap();
        let report = validate(&g, None);
        assert!(!report.is_valid());
        assert!(matches!(report.failure, Some(GraphError::Cycle(_))));
        assert_eq!(report.status("acyclic"), Some(CheckStatus::Fail));
    }

    #[test]
    fn multiple_sources_and_unreachable_nodes() {
        let g = Digraph::from_labels(&["a", "b", "c", "t"], &[("a", "c"), ("b", "c"), ("c", "t")])
            .unwrap();
        assert!(matches!(Dag::from_digraph(&g, None), Err(GraphError::MultipleSources(_))));
        assert_eq!(Dag::from_digraph(&g, Some("a")), Err(GraphError::Unreachable("b".into())));
        assert_eq!(validate(&g, Some("a")).status("connected"), Some(CheckStatus::Fail));
    }

    #[test]
    fn indices_follow_topological_order() {
        let g = Digraph::from_labels(&["t", "k", "s", "i"], &[("s", "i"), ("i", "k"), ("k", "t"), ("s", "t")])
            .unwrap();
        let dag = Dag::from_digraph(&g, None).unwrap();
        assert_eq!(dag.labels(), &["s", "i", "k", "t"]);
        for &(a, b) in dag.edges() {
            assert!(a < b);
        }
    }

    #[test]
    fn five_node_paths_in_lexicographic_order() {
        let dag = fixtures::fig2();
        let paths = enumerate_paths(&dag, None).unwrap();
        assert_eq!(labels(&paths, &dag), ["s->i->t", "s->j->k->t", "s->j->t"].map(String::from));
        // lexicographic in node index: s=0,i=1,j=2,k=3,t=4
        let idx: Vec<Vec<usize>> =
            paths.iter().map(|p| p.nodes().iter().map(|v| v.index()).collect()).collect();
        assert_eq!(idx, vec![vec![0, 1, 4], vec![0, 2, 3, 4], vec![0, 2, 4]]);
        assert_eq!(count_paths(&dag), BigUint::from(3u32));
    }

    #[test]
    fn grid_counts() {
        assert_eq!(enumerate_paths(&fixtures::grid(3), None).unwrap().len(), 8);
        assert_eq!(count_paths(&fixtures::grid(20)), BigUint::from(1_048_576u32));
        let line = Dag::from_labels(&["s", "i", "t"], &[("s", "i"), ("i", "t")]).unwrap();
        assert_eq!(enumerate_paths(&line, None).unwrap().len(), 1);
        let two = Dag::from_labels(&["s", "i", "t"], &[("s", "i"), ("i", "t"), ("s", "t")]).unwrap();
        assert_eq!(count_paths(&two), BigUint::from(2u32));
    }

    #[test]
    fn path_cap_is_enforced() {
        let grid = fixtures::grid(4);
        assert_eq!(enumerate_paths(&grid, Some(15)), Err(GraphError::PathCapExceeded(15)));
        assert_eq!(enumerate_paths(&grid, Some(16)).unwrap().len(), 16);
    }

    #[test]
    fn chain_efficient_path_is_the_shortcut() {
        let (dag, losses) = fixtures::fig1(3, 0.5);
        let eff = efficient_paths(&dag, &losses, 0.0);
        assert_eq!(eff.min_cost, 1.5);
        assert_eq!(labels(&eff.paths, &dag), ["s->t"]);
        assert_eq!(eff.continuation[0], 1.5);
    }

    #[test]
    fn zero_losses_make_every_path_efficient() {
        let dag = fixtures::grid(3);
        let eff = efficient_paths(&dag, &LossFunction::zeros(&dag), 0.0);
        assert_eq!(eff.min_cost, 0.0);
        assert_eq!(eff.paths, enumerate_paths(&dag, None).unwrap());
    }

    #[test]
    fn five_node_efficient_path() {
        let dag = fixtures::fig2();
        let losses = fixtures::fig2_losses(&dag, [1.0, 1.0, 3.0, 0.0, 0.0, 0.0]);
        let eff = efficient_paths(&dag, &losses, 0.0);
        assert_eq!(eff.min_cost, 2.0);
        assert_eq!(labels(&eff.paths, &dag), ["s->i->t"]);
    }

    #[test]
    fn reachable_subgraph_of_five_node_network() {
        let dag = fixtures::fig2();
        let sub = reachable_subgraph(&dag.to_digraph(), "j").unwrap();
        assert_eq!(sub.labels(), &["j", "k", "t"]);
        let edges: Vec<String> = (0..sub.edge_count()).map(|e| sub.edge_label(e)).collect();
        assert_eq!(edges, ["j->k", "j->t", "k->t"]);
        assert_eq!(reachable_subgraph(&dag.to_digraph(), "s").unwrap(), dag);
        assert_eq!(
            reachable_subgraph(&dag.to_digraph(), "zz"),
            Err(GraphError::UnknownNode("zz".into()))
        );
    }

    #[test]
    fn losses_are_validated() {
        let dag = fixtures::fig2();
        assert!(matches!(
            LossFunction::new(&dag, vec![1.0; 5]),
            Err(GraphError::LossArity { expected: 6, got: 5 })
        ));
        assert!(matches!(
            LossFunction::new(&dag, vec![1.0, -1.0, 0.0, 0.0, 0.0, 0.0]),
            Err(GraphError::InvalidLoss { .. })
        ));
        assert!(LossFunction::new(&dag, vec![f64::NAN; 6]).is_err());
    }

    #[test]
    fn invalid_paths_are_rejected() {
        let dag = fixtures::fig2();
        assert!(Path::from_labels(&dag, &["s", "i", "t"]).is_ok());
        assert!(Path::from_labels(&dag, &["s", "j"]).is_err());
        assert!(Path::from_labels(&dag, &["i", "t"]).is_err());
        assert!(Path::from_labels(&dag, &["s", "k", "t"]).is_err());
    }
}
