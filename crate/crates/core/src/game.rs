//! The sequential cancellation game: each agent reached by the cascade picks
//! which outgoing edge to cancel, minimizing its own liability.

use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{continuation_costs, enumerate_paths, Dag, GraphError, LossFunction, NodeId, Path};
use crate::rules::{BoundRule, Rule};

pub const DEFAULT_HISTORY_CAP: usize = 1_000_000;
pub const DEFAULT_PROFILE_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("more than {0} histories; raise the history cap")]
    HistoryCapExceeded(usize),
    #[error("{profiles} strategy profiles exceed the cap of {cap}")]
    ProfileCapExceeded { profiles: String, cap: u64 },
    #[error("invalid history: {0}")]
    InvalidHistory(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Absolute tolerance for liability comparisons; `None` picks 0 for
    /// integer losses and 1e-9 otherwise.
    pub tolerance: Option<f64>,
    pub history_cap: usize,
    pub profile_cap: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tolerance: None, history_cap: DEFAULT_HISTORY_CAP, profile_cap: DEFAULT_PROFILE_CAP }
    }
}

impl SolveOptions {
    fn tolerance_for(&self, losses: &LossFunction) -> f64 {
        self.tolerance.unwrap_or_else(|| losses.comparison_tolerance())
    }
}

fn check_losses(dag: &Dag, losses: &LossFunction) -> Result<(), GameError> {
    if losses.len() != dag.edge_count() {
        return Err(GraphError::LossArity { expected: dag.edge_count(), got: losses.len() }.into());
    }
    Ok(())
}

type Suffixes = Rc<Vec<Vec<usize>>>;

/// Set-valued backward induction. Outcome sets are memoized per history, or
/// per node when the rule's liabilities depend on the path only through
/// its total loss.
pub struct SpeSolver<'a> {
    dag: &'a Dag,
    bound: BoundRule<'a>,
    tolerance: f64,
    by_node: bool,
    cap: usize,
    visited: usize,
    memo: HashMap<Vec<usize>, Suffixes>,
    liabilities: HashMap<Vec<usize>, Rc<Vec<f64>>>,
}

impl<'a> SpeSolver<'a> {
    pub fn new(rule: &'a Rule<'a>, losses: &'a LossFunction, options: &SolveOptions) -> Result<Self, GameError> {
        let dag = rule.dag();
        check_losses(dag, losses)?;
        Ok(SpeSolver {
            dag,
            bound: rule.bind(losses),
            tolerance: options.tolerance_for(losses),
            by_node: rule.total_loss_only(),
            cap: options.history_cap,
            visited: 0,
            memo: HashMap::new(),
            liabilities: HashMap::new(),
        })
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// SPE outcomes of the subgame after `history`, as full paths.
    pub fn outcomes_at(&mut self, history: &[NodeId]) -> Result<Vec<Path>, GameError> {
        let dag = self.dag;
        if history.first() != Some(&dag.source()) {
            return Err(GameError::InvalidHistory("histories start at the source".into()));
        }
        for pair in history.windows(2) {
            if dag.edge_id(pair[0], pair[1]).is_none() {
                return Err(GameError::InvalidHistory(format!(
                    "no edge {}->{}",
                    dag.label(pair[0]),
                    dag.label(pair[1])
                )));
            }
        }
        let mut prefix: Vec<usize> = history.iter().map(|v| v.index()).collect();
        let suffixes = self.solve(&mut prefix)?;
        let head = &prefix[..prefix.len() - 1];
        Ok(suffixes
            .iter()
            .map(|s| Path::from_indices(&[head, s.as_slice()].concat()))
            .collect())
    }

    pub fn outcomes(&mut self) -> Result<Vec<Path>, GameError> {
        self.outcomes_at(&[self.dag.source()])
    }

    fn liabilities_of(&mut self, full: Vec<usize>) -> Rc<Vec<f64>> {
        if let Some(hit) = self.liabilities.get(&full) {
            return hit.clone();
        }
        let values = Rc::new(self.bound.liabilities(&Path::from_indices(&full)).values().to_vec());
        self.liabilities.insert(full, values.clone());
        values
    }

    fn solve(&mut self, history: &mut Vec<usize>) -> Result<Suffixes, GameError> {
        let v = *history.last().expect("non-empty history");
        let key = if self.by_node { vec![v] } else { history.clone() };
        if let Some(hit) = self.memo.get(&key) {
            return Ok(hit.clone());
        }
        self.visited += 1;
        if self.visited > self.cap {
            return Err(GameError::HistoryCapExceeded(self.cap));
        }
        let node = NodeId::new(v);
        let result = if self.dag.is_sink(node) {
            vec![vec![v]]
        } else {
            let mut options = Vec::new();
            for &a in self.dag.successors(node) {
                history.push(a);
                let sub = self.solve(history);
                history.pop();
                let sub = sub?;
                let values: Vec<f64> = sub
                    .iter()
                    .map(|s| self.liabilities_of([history.as_slice(), s.as_slice()].concat())[v])
                    .collect();
                options.push((sub, values));
            }
            let threats: Vec<f64> =
                options.iter().map(|(_, vals)| vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
            let mut out = Vec::new();
            for (a, (sub, values)) in options.iter().enumerate() {
                let bar = threats
                    .iter()
                    .enumerate()
                    .filter(|&(b, _)| b != a)
                    .map(|(_, &t)| t)
                    .fold(f64::INFINITY, f64::min);
                for (s, &val) in sub.iter().zip(values) {
                    if val <= bar + self.tolerance {
                        let mut suffix = Vec::with_capacity(s.len() + 1);
                        suffix.push(v);
                        suffix.extend_from_slice(s);
                        out.push(suffix);
                    }
                }
            }
            out.sort_unstable();
            out
        };
        let result = Rc::new(result);
        self.memo.insert(key, result.clone());
        Ok(result)
    }
}

/// Exact set of subgame-perfect outcome paths, in lexicographic order.
pub fn spe_outcomes(rule: &Rule<'_>, losses: &LossFunction, options: &SolveOptions) -> Result<Vec<Path>, GameError> {
    SpeSolver::new(rule, losses, options)?.outcomes()
}

#[derive(Debug, Clone, Copy)]
enum Next {
    History(usize),
    Terminal(usize),
}

#[derive(Debug, Clone)]
struct Decision {
    nodes: Vec<usize>,
    actions: Vec<(usize, Next)>,
}

/// The game in explicit form, for exhaustive strategy-profile enumeration.
struct ExplicitGame {
    decisions: Vec<Decision>,
    paths: Vec<Path>,
    liabilities: Vec<Vec<f64>>,
    tolerance: f64,
}

impl ExplicitGame {
    fn new(rule: &Rule<'_>, losses: &LossFunction, options: &SolveOptions) -> Result<Self, GameError> {
        let dag = rule.dag();
        check_losses(dag, losses)?;
        let paths = enumerate_paths(dag, Some(options.history_cap))?;
        let bound = rule.bind(losses);
        let liabilities: Vec<Vec<f64>> = paths.iter().map(|p| bound.liabilities(p).values().to_vec()).collect();
        let path_id: HashMap<&[NodeId], usize> =
            paths.iter().enumerate().map(|(k, p)| (p.nodes(), k)).collect();
        let mut decisions = Vec::new();
        let mut profiles: u128 = 1;
        // Preorder numbering: children get larger ids than their parent.
        let mut queue = vec![(usize::MAX, 0usize, vec![0usize])];
        while let Some((parent, slot, nodes)) = queue.pop() {
            let v = *nodes.last().expect("non-empty");
            let node = NodeId::new(v);
            let next = if dag.is_sink(node) {
                let ids: Vec<NodeId> = nodes.iter().map(|&i| NodeId::new(i)).collect();
                Next::Terminal(path_id[ids.as_slice()])
            } else {
                let id = decisions.len();
                if id >= options.history_cap {
                    return Err(GameError::HistoryCapExceeded(options.history_cap));
                }
                let succ = dag.successors(node);
                profiles = profiles.saturating_mul(succ.len() as u128);
                if profiles > options.profile_cap as u128 {
                    return Err(GameError::ProfileCapExceeded {
                        profiles: format!("more than {}", options.profile_cap),
                        cap: options.profile_cap,
                    });
                }
                decisions.push(Decision {
                    nodes: nodes.clone(),
                    actions: succ.iter().map(|&w| (w, Next::Terminal(usize::MAX))).collect(),
                });
                for (k, &w) in succ.iter().enumerate().rev() {
                    let mut child = nodes.clone();
                    child.push(w);
                    queue.push((id, k, child));
                }
                Next::History(id)
            };
            if parent != usize::MAX {
                decisions[parent].actions[slot].1 = next;
            }
        }
        Ok(ExplicitGame { decisions, paths, liabilities, tolerance: options.tolerance_for(losses) })
    }

    fn profile_count(&self) -> u128 {
        self.decisions.iter().map(|d| d.actions.len() as u128).product()
    }

    /// Calls `visit(choice, outcome)` for every subgame-perfect profile, where
    /// `outcome[h]` is the path id reached from decision `h`.
    fn for_each_spe<F>(&self, mut visit: F)
    where
        F: FnMut(&[usize], &[usize]) -> bool,
    {
        let h = self.decisions.len();
        let mut choice = vec![0usize; h];
        let mut outcome = vec![0usize; h];
        let reach = |next: Next, outcome: &[usize]| match next {
            Next::Terminal(p) => p,
            Next::History(c) => outcome[c],
        };
        loop {
            let mut ok = true;
            for d in (0..h).rev() {
                let decision = &self.decisions[d];
                let mover = *decision.nodes.last().expect("non-empty");
                let chosen = reach(decision.actions[choice[d]].1, &outcome);
                outcome[d] = chosen;
                let value = self.liabilities[chosen][mover];
                if decision
                    .actions
                    .iter()
                    .any(|&(_, next)| value > self.liabilities[reach(next, &outcome)][mover] + self.tolerance)
                {
                    ok = false;
                    break;
                }
            }
            if ok && !visit(&choice, &outcome) {
                return;
            }
            // Mixed-radix increment.
            let mut k = 0;
            loop {
                if k == h {
                    return;
                }
                choice[k] += 1;
                if choice[k] < self.decisions[k].actions.len() {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
        }
    }
}

/// SPE outcomes by enumerating every pure strategy profile and testing the
/// one-shot deviation condition at every history.
pub fn spe_bruteforce(rule: &Rule<'_>, losses: &LossFunction, options: &SolveOptions) -> Result<Vec<Path>, GameError> {
    let game = ExplicitGame::new(rule, losses, options)?;
    debug_assert!(game.profile_count() <= options.profile_cap as u128);
    let mut found = BTreeSet::new();
    game.for_each_spe(|_, outcome| {
        found.insert(outcome[0]);
        true
    });
    Ok(found.into_iter().map(|k| game.paths[k].clone()).collect())
}

/// Number of pure strategy profiles, saturating at `u128::MAX`.
pub fn profile_count(dag: &Dag) -> u128 {
    fn walk(dag: &Dag, v: usize) -> u128 {
        let node = NodeId::new(v);
        if dag.is_sink(node) {
            return 1;
        }
        dag.successors(node)
            .iter()
            .fold(dag.out_degree(node) as u128, |acc, &w| acc.saturating_mul(walk(dag, w)))
    }
    walk(dag, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileEntry {
    pub history: Vec<String>,
    pub choice: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessWitness {
    pub profile: Vec<ProfileEntry>,
    pub history: Vec<String>,
    pub choice: String,
    pub efficient_choices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustEfficiency {
    pub holds: bool,
    pub witness: Option<RobustnessWitness>,
}

/// Whether every subgame-perfect profile picks a cost-minimizing successor
/// at every history, on or off the equilibrium path.
pub fn check_robust_efficiency(
    rule: &Rule<'_>,
    losses: &LossFunction,
    options: &SolveOptions,
) -> Result<RobustEfficiency, GameError> {
    let dag = rule.dag();
    let game = ExplicitGame::new(rule, losses, options)?;
    let cost = continuation_costs(dag, losses);
    let tol = options.tolerance_for(losses);
    let labels = |nodes: &[usize]| nodes.iter().map(|&v| dag.labels()[v].clone()).collect::<Vec<_>>();
    let step = |v: usize, w: usize| {
        losses.edge(dag, NodeId::new(v), NodeId::new(w)).expect("edge") + cost[w]
    };
    let mut witness = None;
    game.for_each_spe(|choice, _| {
        for (d, decision) in game.decisions.iter().enumerate() {
            let v = *decision.nodes.last().expect("non-empty");
            let w = decision.actions[choice[d]].0;
            if step(v, w) > cost[v] + tol {
                let efficient = decision
                    .actions
                    .iter()
                    .filter(|&&(x, _)| step(v, x) <= cost[v] + tol)
                    .map(|&(x, _)| dag.labels()[x].clone())
                    .collect();
                witness = Some(RobustnessWitness {
                    profile: game
                        .decisions
                        .iter()
                        .zip(choice)
                        .map(|(dec, &c)| ProfileEntry {
                            history: labels(&dec.nodes),
                            choice: dag.labels()[dec.actions[c].0].clone(),
                        })
                        .collect(),
                    history: labels(&decision.nodes),
                    choice: dag.labels()[w].clone(),
                    efficient_choices: efficient,
                });
                return false;
            }
        }
        true
    });
    Ok(RobustEfficiency { holds: witness.is_none(), witness })
}

/// Follows `ℓ(ij) + L_j` minimizers from the source, smallest index first.
pub fn efficient_greedy_path(dag: &Dag, losses: &LossFunction, continuation: &[f64]) -> Path {
    follow(dag, |v| {
        dag.out_edges(v)
            .zip(dag.successors(v))
            .map(|(e, &w)| (losses.get(e) + continuation[w], w))
            .fold((f64::INFINITY, usize::MAX), |best, cand| if cand.0 < best.0 { cand } else { best })
            .1
    })
}

/// Follows the cheapest outgoing edge from the source, smallest index first.
pub fn cheapest_edge_path(dag: &Dag, losses: &LossFunction) -> Path {
    follow(dag, |v| {
        dag.out_edges(v)
            .zip(dag.successors(v))
            .map(|(e, &w)| (losses.get(e), w))
            .fold((f64::INFINITY, usize::MAX), |best, cand| if cand.0 < best.0 { cand } else { best })
            .1
    })
}

fn follow(dag: &Dag, mut pick: impl FnMut(NodeId) -> usize) -> Path {
    let mut nodes = vec![0usize];
    let mut v = dag.source();
    while !dag.is_sink(v) {
        v = NodeId::new(pick(v));
        nodes.push(v.index());
    }
    Path::from_indices(&nodes)
}

/// One SPE path without solving the game, for rules where per-node play is
/// known in closed form: fixed weights rewarding every decider, and the
/// local rule. `None` for other rules.
pub fn spe_path_greedy(rule: &Rule<'_>, losses: &LossFunction) -> Option<Path> {
    let dag = rule.dag();
    if rule.is_local() {
        Some(cheapest_edge_path(dag, losses))
    } else if rule.weights().is_some_and(|w| w.rewards_every_decider(dag)) {
        Some(efficient_greedy_path(dag, losses, &continuation_costs(dag, losses)))
    } else {
        None
    }
}
