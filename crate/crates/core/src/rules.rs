//! Liability rules: the fixed-weight family, the local-liability benchmark,
//! the axiom-independence counterexamples and the punish-the-first-deviator
//! rule, plus the loss extension that makes every path efficient.

use std::collections::HashMap;
use std::fmt;
use std::ops::Index;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{continuation_costs, enumerate_paths, Dag, GraphError, LossFunction, NodeId, Path};
use crate::weights;

/// Weights must sum to one within this.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleError {
    #[error("weights are not on the simplex: {0}")]
    NotOnSimplex(String),
    #[error("unknown rule spec `{0}` (expected fixed:wstar, fixed:equal, fixed:file=<path>, local, phi1, phi2, phi3, phi5 or punish-first)")]
    UnknownSpec(String),
    #[error("cannot read weight file {path}: {reason}")]
    WeightFile { path: String, reason: String },
    #[error("extension produced negative loss {value} on edge {edge}")]
    NegativeExtension { edge: String, value: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Per-agent payments for one realized path.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct LiabilityVector(Vec<f64>);

impl LiabilityVector {
    pub fn zeros(n: usize) -> Self {
        LiabilityVector(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn labelled<'a>(&'a self, dag: &'a Dag) -> impl Iterator<Item = (&'a str, f64)> + 'a {
        dag.nodes().map(move |v| (dag.label(v), self.0[v.index()]))
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &LiabilityVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl Index<NodeId> for LiabilityVector {
    type Output = f64;
    fn index(&self, node: NodeId) -> &f64 {
        &self.0[node.index()]
    }
}

/// A point of the simplex over agents.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self, RuleError> {
        if let Some(bad) = values.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(RuleError::NotOnSimplex(format!("entry {bad} is negative or not finite")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(RuleError::NotOnSimplex(format!("entries sum to {sum}")));
        }
        Ok(WeightVector(values))
    }

    pub fn equal(n: usize) -> Self {
        WeightVector(vec![1.0 / n as f64; n])
    }

    /// Weights keyed by node label; missing labels get weight 0.
    pub fn from_label_map(dag: &Dag, map: &HashMap<String, f64>) -> Result<Self, RuleError> {
        if let Some(unknown) = map.keys().find(|k| dag.node(k).is_none()) {
            return Err(RuleError::Graph(GraphError::UnknownNode(unknown.clone())));
        }
        WeightVector::new(dag.labels().iter().map(|l| map.get(l).copied().unwrap_or(0.0)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Agents with several successors whose weight is zero.
    pub fn zero_weight_deciders(&self, dag: &Dag) -> Vec<NodeId> {
        dag.nodes().filter(|&v| dag.out_degree(v) > 1 && self.0[v.index()] <= 0.0).collect()
    }

    /// Membership in the set of weights that give every decider a positive
    /// share.
    pub fn rewards_every_decider(&self, dag: &Dag) -> bool {
        self.zero_weight_deciders(dag).is_empty()
    }
}

impl Index<NodeId> for WeightVector {
    type Output = f64;
    fn index(&self, node: NodeId) -> &f64 {
        &self.0[node.index()]
    }
}

/// Textual rule selector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleSpec {
    FixedWstar,
    FixedEqual,
    FixedFile(PathBuf),
    Local,
    /// Source pays everything.
    SourceAll,
    /// Weights proportional to one plus the largest outgoing loss.
    MaxOutWeights,
    /// Equal share `1/m` per on-path agent, remainder spread off-path.
    OnPathAlpha,
    /// Source weight `1/sqrt(T+1)`, the rest shared uniformly.
    SqrtSource,
    PunishFirst,
}

impl FromStr for RuleSpec {
    type Err = RuleError;

    fn from_str(s: &str) -> Result<Self, RuleError> {
        Ok(match s {
            "fixed:wstar" => RuleSpec::FixedWstar,
            "fixed:equal" => RuleSpec::FixedEqual,
            "local" => RuleSpec::Local,
            "phi1" => RuleSpec::SourceAll,
            "phi2" => RuleSpec::MaxOutWeights,
            "phi3" => RuleSpec::OnPathAlpha,
            "phi5" => RuleSpec::SqrtSource,
            "punish-first" => RuleSpec::PunishFirst,
            other => match other.strip_prefix("fixed:file=") {
                Some(path) if !path.is_empty() => RuleSpec::FixedFile(PathBuf::from(path)),
                _ => return Err(RuleError::UnknownSpec(other.to_string())),
            },
        })
    }
}

impl fmt::Display for RuleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleSpec::FixedWstar => f.write_str("fixed:wstar"),
            RuleSpec::FixedEqual => f.write_str("fixed:equal"),
            RuleSpec::FixedFile(p) => write!(f, "fixed:file={}", p.display()),
            RuleSpec::Local => f.write_str("local"),
            RuleSpec::SourceAll => f.write_str("phi1"),
            RuleSpec::MaxOutWeights => f.write_str("phi2"),
            RuleSpec::OnPathAlpha => f.write_str("phi3"),
            RuleSpec::SqrtSource => f.write_str("phi5"),
            RuleSpec::PunishFirst => f.write_str("punish-first"),
        }
    }
}

impl Serialize for RuleSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Fixed(WeightVector),
    Local,
    SourceAll,
    MaxOutWeights,
    OnPathAlpha { alpha: f64 },
    SqrtSource,
    PunishFirst,
}

/// A liability rule bound to one graph. Graph-dependent parameters are
/// resolved at construction.
#[derive(Debug, Clone)]
pub struct Rule<'g> {
    dag: &'g Dag,
    kind: Kind,
    name: String,
}

/// Resolves `spec` against `dag`.
pub fn make_rule<'g>(spec: &RuleSpec, dag: &'g Dag) -> Result<Rule<'g>, RuleError> {
    let kind = match spec {
        RuleSpec::FixedWstar => Kind::Fixed(weights::wstar_dp(dag)),
        RuleSpec::FixedEqual => Kind::Fixed(WeightVector::equal(dag.node_count())),
        RuleSpec::FixedFile(path) => {
            let failed = |reason: String| RuleError::WeightFile { path: path.display().to_string(), reason };
            let text = std::fs::read_to_string(path).map_err(|e| failed(e.to_string()))?;
            let map: HashMap<String, f64> =
                serde_json::from_str(&text).map_err(|e| failed(e.to_string()))?;
            Kind::Fixed(WeightVector::from_label_map(dag, &map)?)
        }
        RuleSpec::Local => Kind::Local,
        RuleSpec::SourceAll => Kind::SourceAll,
        RuleSpec::MaxOutWeights => Kind::MaxOutWeights,
        RuleSpec::OnPathAlpha => {
            let longest = longest_path_nodes(dag);
            Kind::OnPathAlpha { alpha: 1.0 / longest as f64 }
        }
        RuleSpec::SqrtSource => Kind::SqrtSource,
        RuleSpec::PunishFirst => Kind::PunishFirst,
    };
    Ok(Rule { dag, kind, name: spec.to_string() })
}

/// Maximum node count over source-sink paths.
fn longest_path_nodes(dag: &Dag) -> usize {
    let mut depth = vec![1usize; dag.node_count()];
    for v in (0..dag.node_count()).rev() {
        if let Some(best) = dag.successors(NodeId::new(v)).iter().map(|&w| depth[w]).max() {
            depth[v] = best + 1;
        }
    }
    depth[0]
}

impl<'g> Rule<'g> {
    /// Fixed-weight rule `w * loss(P)`.
    pub fn fixed(dag: &'g Dag, weights: WeightVector) -> Result<Rule<'g>, RuleError> {
        if weights.len() != dag.node_count() {
            return Err(RuleError::NotOnSimplex(format!(
                "{} weights for {} agents",
                weights.len(),
                dag.node_count()
            )));
        }
        Ok(Rule { dag, kind: Kind::Fixed(weights), name: "fixed".into() })
    }

    pub fn dag(&self) -> &'g Dag {
        self.dag
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn weights(&self) -> Option<&WeightVector> {
        match &self.kind {
            Kind::Fixed(w) => Some(w),
            _ => None,
        }
    }

    pub fn is_local(&self) -> bool {
        matches!(self.kind, Kind::Local)
    }

    /// Liabilities depend on the path only through its total loss (for a
    /// given loss function). Such rules admit per-node game solving.
    pub fn total_loss_only(&self) -> bool {
        matches!(
            self.kind,
            Kind::Fixed(_) | Kind::SourceAll | Kind::MaxOutWeights | Kind::SqrtSource
        )
    }

    /// Whether the rule is known to combine realized-loss dependence with
    /// efficient implementation, which is what downstream monotonicity needs.
    pub fn satisfies_rld_and_ei(&self) -> bool {
        matches!(self.kind, Kind::Fixed(_) | Kind::OnPathAlpha { .. } | Kind::SqrtSource)
    }

    /// Precomputes everything that depends on the loss function.
    pub fn bind<'a>(&'a self, losses: &'a LossFunction) -> BoundRule<'a> {
        let dag = self.dag;
        let extra = match &self.kind {
            Kind::MaxOutWeights => {
                let raw: Vec<f64> = dag
                    .nodes()
                    .map(|v| 1.0 + dag.out_edges(v).map(|e| losses.get(e)).fold(0.0, f64::max))
                    .collect();
                let sum: f64 = raw.iter().sum();
                Bound::Weights(raw.into_iter().map(|m| m / sum).collect())
            }
            Kind::PunishFirst => Bound::Continuation {
                cost: continuation_costs(dag, losses),
                tolerance: losses.comparison_tolerance(),
            },
            _ => Bound::Nothing,
        };
        BoundRule { dag, kind: &self.kind, losses, extra }
    }

    /// Checked evaluation.
    pub fn apply(&self, path: &Path, losses: &LossFunction) -> Result<LiabilityVector, RuleError> {
        path.check(self.dag)?;
        if losses.len() != self.dag.edge_count() {
            return Err(GraphError::LossArity { expected: self.dag.edge_count(), got: losses.len() }.into());
        }
        Ok(self.bind(losses).liabilities(path))
    }
}

#[derive(Debug, Clone)]
enum Bound {
    Nothing,
    Weights(Vec<f64>),
    Continuation { cost: Vec<f64>, tolerance: f64 },
}

/// A rule evaluated under one fixed loss function.
#[derive(Debug, Clone)]
pub struct BoundRule<'a> {
    dag: &'a Dag,
    kind: &'a Kind,
    losses: &'a LossFunction,
    extra: Bound,
}

impl BoundRule<'_> {
    /// Liabilities on `path`, which must belong to the rule's graph.
    pub fn liabilities(&self, path: &Path) -> LiabilityVector {
        let dag = self.dag;
        let n = dag.node_count();
        let total = self.losses.path_loss(dag, path);
        let mut out = vec![0.0; n];
        match (self.kind, &self.extra) {
            (Kind::Fixed(w), _) => {
                for (x, wi) in out.iter_mut().zip(w.values()) {
                    *x = wi * total;
                }
            }
            (Kind::MaxOutWeights, Bound::Weights(w)) => {
                for (x, wi) in out.iter_mut().zip(w) {
                    *x = wi * total;
                }
            }
            (Kind::Local, _) => {
                for (pair, e) in path.nodes().windows(2).zip(path.edge_ids(dag)) {
                    out[pair[0].index()] += self.losses.get(e);
                }
            }
            (Kind::SourceAll, _) => out[0] = total,
            (Kind::OnPathAlpha { alpha }, _) => {
                let on = path.node_count();
                let remainder = 1.0 - on as f64 * alpha;
                let off_share = if on == n {
                    assert!(remainder.abs() <= 1e-12, "no off-path agents but remainder {remainder}");
                    0.0
                } else {
                    remainder / (n - on) as f64
                };
                out.iter_mut().for_each(|x| *x = off_share * total);
                for &v in path.nodes() {
                    out[v.index()] = alpha * total;
                }
            }
            (Kind::SqrtSource, _) => {
                let ws = 1.0 / (total + 1.0).sqrt();
                let rest = (1.0 - ws) / (n - 1) as f64;
                out.iter_mut().for_each(|x| *x = rest * total);
                out[0] = ws * total;
            }
            (Kind::PunishFirst, Bound::Continuation { cost, tolerance }) => {
                if total <= cost[0] + tolerance {
                    out.iter_mut().for_each(|x| *x = total / n as f64);
                } else {
                    let culprit = path
                        .nodes()
                        .windows(2)
                        .zip(path.edge_ids(dag))
                        .find(|(pair, e)| {
                            self.losses.get(*e) + cost[pair[1].index()]
                                > cost[pair[0].index()] + tolerance
                        })
                        .map(|(pair, _)| pair[0])
                        .expect("an inefficient path has an inefficient step");
                    out[culprit.index()] = total;
                }
            }
            (kind, extra) => unreachable!("rule {kind:?} bound with {extra:?}"),
        }
        LiabilityVector(out)
    }

    pub fn liability(&self, agent: NodeId, path: &Path) -> f64 {
        self.liabilities(path)[agent]
    }
}

/// Loss function that agrees with `losses` on `path` and makes every path
/// cost exactly `loss(path)`. Built from node potentials: zero at the source,
/// accumulated path loss at on-path nodes, the path total at sinks, and the
/// largest predecessor potential at off-path nodes; each edge costs the
/// potential difference.
pub fn irreducible_extension(
    dag: &Dag,
    path: &Path,
    losses: &LossFunction,
) -> Result<LossFunction, RuleError> {
    path.check(dag)?;
    let n = dag.node_count();
    let total = losses.path_loss(dag, path);
    let mut potential = vec![f64::NAN; n];
    let mut acc = 0.0;
    potential[0] = 0.0;
    for (pair, e) in path.nodes().windows(2).zip(path.edge_ids(dag)) {
        acc += losses.get(e);
        potential[pair[1].index()] = acc;
    }
    for v in 1..n {
        let node = NodeId::new(v);
        if dag.is_sink(node) {
            potential[v] = total;
        } else if !path.contains(node) {
            potential[v] = dag
                .predecessors(node)
                .iter()
                .map(|&u| potential[u])
                .fold(f64::NEG_INFINITY, f64::max);
        }
    }
    let mut values = Vec::with_capacity(dag.edge_count());
    for (e, &(a, b)) in dag.edges().iter().enumerate() {
        let value = potential[b] - potential[a];
        if value < -1e-12 {
            return Err(RuleError::NegativeExtension { edge: dag.edge_label(e), value });
        }
        values.push(value.max(0.0));
    }
    // On-path edges must reproduce the original losses exactly.
    for e in path.edge_ids(dag) {
        values[e] = losses.get(e);
    }
    Ok(LossFunction::new(dag, values)?)
}

/// All paths' totals under `losses`; used by tests and checkers.
pub fn path_totals(dag: &Dag, losses: &LossFunction, cap: usize) -> Result<Vec<(Path, f64)>, GraphError> {
    Ok(enumerate_paths(dag, Some(cap))?
        .into_iter()
        .map(|p| {
            let t = losses.path_loss(dag, &p);
            (p, t)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::efficient_paths;

    fn path(dag: &Dag, labels: &[&str]) -> Path {
        Path::from_labels(dag, labels).unwrap()
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in ["fixed:wstar", "fixed:equal", "fixed:file=w.json", "local", "phi1", "phi2", "phi3", "phi5", "punish-first"] {
            assert_eq!(s.parse::<RuleSpec>().unwrap().to_string(), s);
        }
        assert!("phi4".parse::<RuleSpec>().is_err());
        assert!("fixed:file=".parse::<RuleSpec>().is_err());
    }

    #[test]
    fn equal_division_on_four_nodes() {
        let dag = fixtures::fig4();
        let rule = make_rule(&RuleSpec::FixedEqual, &dag).unwrap();
        let losses = LossFunction::from_fn(&dag, |_, _| 4.0).unwrap();
        let liab = rule.apply(&path(&dag, &["s", "i", "t"]), &losses).unwrap();
        assert_eq!(liab.values(), &[2.0; 4]);
    }

    #[test]
    fn wstar_rule_on_five_node_network() {
        let dag = fixtures::fig2();
        let rule = make_rule(&RuleSpec::FixedWstar, &dag).unwrap();
        let w = rule.weights().unwrap().values().to_vec();
        let expected = [4.0 / 9.0, 1.0 / 6.0, 5.0 / 18.0, 1.0 / 9.0, 0.0];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let losses = fixtures::fig2_losses(&dag, [2.0, 4.0, 0.0, 0.0, 0.0, 0.0]);
        let liab = rule.apply(&path(&dag, &["s", "i", "t"]), &losses).unwrap();
        let expected = [8.0 / 3.0, 1.0, 5.0 / 3.0, 2.0 / 3.0, 0.0];
        for (a, b) in liab.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        // off-path j and k still pay
        assert!(liab[dag.node("j").unwrap()] > 0.0);
    }

    #[test]
    fn source_all_charges_the_source() {
        let dag = fixtures::fig2();
        let rule = make_rule(&RuleSpec::SourceAll, &dag).unwrap();
        let losses = fixtures::fig2_losses(&dag, [3.0, 4.0, 0.0, 0.0, 0.0, 0.0]);
        let liab = rule.apply(&path(&dag, &["s", "i", "t"]), &losses).unwrap();
        assert_eq!(liab.values(), &[7.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn local_rule_on_long_chain() {
        let (dag, losses) = fixtures::fig1(3, 0.5);
        let rule = make_rule(&RuleSpec::Local, &dag).unwrap();
        let liab = rule.apply(&path(&dag, &["s", "1", "2", "t"]), &losses).unwrap();
        assert_eq!(liab.values(), &[1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn zero_loss_path_gives_zero_vector_for_every_rule() {
        let dag = fixtures::fig2();
        let losses = fixtures::fig2_losses(&dag, [0.0, 0.0, 5.0, 1.0, 2.0, 3.0]);
        let p = path(&dag, &["s", "i", "t"]);
        for spec in ["fixed:wstar", "fixed:equal", "local", "phi1", "phi2", "phi3", "phi5", "punish-first"] {
            let rule = make_rule(&spec.parse().unwrap(), &dag).unwrap();
            let liab = rule.apply(&p, &losses).unwrap();
            assert!(liab.values().iter().all(|&x| x == 0.0), "{spec}: {liab:?}");
        }
    }

    #[test]
    fn on_path_alpha_shares() {
        let dag = fixtures::fig2();
        // longest path s,j,k,t has 4 nodes
        let rule = make_rule(&RuleSpec::OnPathAlpha, &dag).unwrap();
        let losses = fixtures::fig2_losses(&dag, [1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let liab = rule.apply(&path(&dag, &["s", "i", "t"]), &losses).unwrap();
        // on-path: 2/4 each; off-path j,k split 1 - 3/4
        assert_eq!(liab.values(), &[0.5, 0.5, 0.25, 0.25, 0.5]);
        let full = rule.apply(&path(&dag, &["s", "j", "k", "t"]), &losses).unwrap();
        assert_eq!(full.values(), &[0.75, 0.0, 0.75, 0.75, 0.75]);
    }

    #[test]
    fn on_path_alpha_without_off_path_agents() {
        let dag = Dag::from_labels(&["s", "i", "t"], &[("s", "i"), ("i", "t"), ("s", "t")]).unwrap();
        let rule = make_rule(&RuleSpec::OnPathAlpha, &dag).unwrap();
        let losses = LossFunction::from_fn(&dag, |_, _| 3.0).unwrap();
        let liab = rule.apply(&path(&dag, &["s", "i", "t"]), &losses).unwrap();
        assert_eq!(liab.values(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn sqrt_source_weights() {
        let dag = fixtures::fig4();
        let rule = make_rule(&RuleSpec::SqrtSource, &dag).unwrap();
        let losses = LossFunction::from_fn(&dag, |_, _| 1.5).unwrap();
        let liab = rule.apply(&path(&dag, &["s", "i", "t"]), &losses).unwrap();
        // T = 3, w_s = 1/2
        assert!((liab[dag.source()] - 1.5).abs() < 1e-15);
        for v in ["i", "j", "t"] {
            assert!((liab[dag.node(v).unwrap()] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn max_out_weights_use_outgoing_maxima() {
        let dag = fixtures::fig4();
        // st=1, si=0, ij=0, it=1, jt=1 -> m = (2, 2, 2, 1)
        let losses = fixtures::fig4_losses(&dag, false);
        let rule = make_rule(&RuleSpec::MaxOutWeights, &dag).unwrap();
        let liab = rule.apply(&path(&dag, &["s", "t"]), &losses).unwrap();
        assert_eq!(liab.values(), &[2.0 / 7.0, 2.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]);
    }

    #[test]
    fn punish_first_blames_first_inefficient_step() {
        let dag = Dag::from_labels(
            &["s", "i", "k", "t"],
            &[("s", "i"), ("s", "t"), ("i", "t"), ("i", "k"), ("k", "t")],
        )
        .unwrap();
        let losses = LossFunction::from_fn(&dag, |a, b| match (dag.label(a), dag.label(b)) {
            ("s", "i") => 1.0,
            ("s", "t") => 4.0,
            ("k", "t") => 5.0,
            _ => 0.0,
        })
        .unwrap();
        let rule = make_rule(&RuleSpec::PunishFirst, &dag).unwrap();
        let eff = rule.apply(&path(&dag, &["s", "i", "t"]), &losses).unwrap();
        assert_eq!(eff.values(), &[0.25; 4]);
        let bad = rule.apply(&path(&dag, &["s", "i", "k", "t"]), &losses).unwrap();
        assert_eq!(bad.values(), &[0.0, 6.0, 0.0, 0.0]);
        let worse = rule.apply(&path(&dag, &["s", "t"]), &losses).unwrap();
        assert_eq!(worse.values(), &[4.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn weight_vectors_are_checked() {
        assert!(WeightVector::new(vec![0.5, 0.5]).is_ok());
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![1.5, -0.5]).is_err());
        let dag = fixtures::fig2();
        let w = WeightVector::new(vec![0.0, 0.5, 0.5, 0.0, 0.0]).unwrap();
        assert_eq!(w.zero_weight_deciders(&dag), vec![dag.source()]);
        assert!(Rule::fixed(&dag, WeightVector::equal(3)).is_err());
    }

    #[test]
    fn apply_rejects_foreign_paths_and_losses() {
        let dag = fixtures::fig2();
        let rule = make_rule(&RuleSpec::Local, &dag).unwrap();
        let other = fixtures::fig4();
        let bad_losses = LossFunction::zeros(&other);
        let p = path(&dag, &["s", "i", "t"]);
        assert!(matches!(rule.apply(&p, &bad_losses), Err(RuleError::Graph(GraphError::LossArity { .. }))));
    }

    #[test]
    fn extension_on_five_node_network() {
        let dag = fixtures::fig2();
        let losses = fixtures::fig2_losses(&dag, [1.0, 1.0, 7.0, 3.0, 2.0, 9.0]);
        let p = path(&dag, &["s", "i", "t"]);
        let ext = irreducible_extension(&dag, &p, &losses).unwrap();
        let expected = fixtures::fig2_losses(&dag, [1.0, 1.0, 0.0, 2.0, 0.0, 2.0]);
        assert_eq!(ext, expected);
        let eff = efficient_paths(&dag, &ext, 0.0);
        assert_eq!(eff.paths.len(), 3);
        assert_eq!(eff.min_cost, 2.0);
    }

    #[test]
    fn extension_of_zero_losses_is_zero() {
        let dag = fixtures::grid(3);
        let p = enumerate_paths(&dag, None).unwrap().remove(3);
        let ext = irreducible_extension(&dag, &p, &LossFunction::zeros(&dag)).unwrap();
        assert!(ext.values().iter().all(|&v| v == 0.0));
    }
}
