//! Randomized falsification checks for rule axioms and their consequences.
//!
//! Each trial draws its own instance from a ChaCha stream selected by the
//! trial index, so reports are reproducible and independent of scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::fixtures;
use crate::game::{spe_outcomes, GameError, SolveOptions, SpeSolver};
use crate::graph::{
    continuation_costs, efficient_paths, enumerate_paths, validate, Dag, Digraph, GraphError,
    LossFunction, NodeId, Path,
};
use crate::io::GraphFile;
use crate::rules::{irreducible_extension, make_rule, Rule, RuleError, RuleSpec, WeightVector};

/// Relative tolerance for comparing liabilities computed in floating point.
pub const LIABILITY_TOLERANCE: f64 = 1e-9;

const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckError {
    #[error("unknown check `{0}`")]
    UnknownCheck(String),
    #[error("fixture `{0}` does not match the given graph")]
    FixtureMismatch(String),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axiom {
    /// SPE outcomes coincide with efficient paths.
    EfficientImplementation,
    /// Liabilities ignore losses off the realized path.
    RealizedLossDependence,
    /// No unilateral deviation lowers any pair's joint liability.
    PairwiseCollusionProofness,
    ScaleInvariance,
}

impl Axiom {
    pub const ALL: [Axiom; 4] = [
        Axiom::EfficientImplementation,
        Axiom::RealizedLossDependence,
        Axiom::PairwiseCollusionProofness,
        Axiom::ScaleInvariance,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Axiom::EfficientImplementation => "EI",
            Axiom::RealizedLossDependence => "RLD",
            Axiom::PairwiseCollusionProofness => "PCP",
            Axiom::ScaleInvariance => "SI",
        }
    }
}

impl FromStr for Axiom {
    type Err = CheckError;
    fn from_str(s: &str) -> Result<Self, CheckError> {
        Axiom::ALL
            .into_iter()
            .find(|a| a.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| CheckError::UnknownCheck(s.to_string()))
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Property {
    DownstreamMonotonicity,
    EfficientPathInvariance,
    RedistributionInvariance,
    PathIndependence,
    TotalLossDependence,
}

impl Property {
    pub const ALL: [Property; 5] = [
        Property::DownstreamMonotonicity,
        Property::EfficientPathInvariance,
        Property::RedistributionInvariance,
        Property::PathIndependence,
        Property::TotalLossDependence,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Property::DownstreamMonotonicity => "DOWNSTREAM_MONO",
            Property::EfficientPathInvariance => "EFF_PATH_INV",
            Property::RedistributionInvariance => "REDISTRIBUTION_INV",
            Property::PathIndependence => "PATH_INDEP",
            Property::TotalLossDependence => "TOTAL_LOSS_DEP",
        }
    }
}

impl FromStr for Property {
    type Err = CheckError;
    fn from_str(s: &str) -> Result<Self, CheckError> {
        Property::ALL
            .into_iter()
            .find(|p| p.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| CheckError::UnknownCheck(s.to_string()))
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Check {
    Axiom(Axiom),
    Property(Property),
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Check::Axiom(a) => a.fmt(f),
            Check::Property(p) => p.fmt(f),
        }
    }
}

impl FromStr for Check {
    type Err = CheckError;
    fn from_str(s: &str) -> Result<Self, CheckError> {
        s.parse()
            .map(Check::Axiom)
            .or_else(|_| s.parse().map(Check::Property))
    }
}

/// Random instance distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub density: f64,
    pub max_loss: u32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig { min_nodes: 4, max_nodes: 8, density: 0.4, max_loss: 9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckConfig {
    pub trials: usize,
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub solve: SolveOptions,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { trials: 100, seed: 0, generator: GeneratorConfig::default(), solve: SolveOptions::default() }
    }
}

/// Where trial instances come from.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    /// Fresh random graph and losses per trial.
    RandomGraphs,
    /// Fixed graph, random losses per trial.
    Graph(&'a Dag),
    /// Fixed graph, losses cycled from the list.
    Instances(&'a Dag, &'a [LossFunction]),
}

/// Rule under test.
#[derive(Debug, Clone, PartialEq)]
pub enum RuleSource {
    Spec(RuleSpec),
    /// A fresh fixed-weight rule per trial, positive on every agent with
    /// several successors.
    RandomDeciderWeights,
}

impl fmt::Display for RuleSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleSource::Spec(spec) => spec.fmt(f),
            RuleSource::RandomDeciderWeights => f.write_str("fixed:random"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub trial: usize,
    pub graph: GraphFile,
    pub losses: BTreeMap<String, f64>,
    pub detail: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub rule: String,
    pub verdict: Verdict,
    pub seed: u64,
    pub trials_requested: usize,
    pub trials_run: usize,
    pub passes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Per-trial generator: stream `trial` of the master seed.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Random single-source DAG: every later node gets at least one earlier
/// predecessor, other forward edges appear independently.
pub fn random_dag(rng: &mut impl Rng, config: &GeneratorConfig) -> Dag {
    let n = rng.gen_range(config.min_nodes.max(3)..=config.max_nodes.max(config.min_nodes.max(3)));
    let labels: Vec<String> =
        (0..n).map(|k| if k == 0 { "s".to_string() } else { format!("v{k}") }).collect();
    let mut edges = Vec::new();
    for j in 1..n {
        let before = edges.len();
        for i in 0..j {
            if rng.gen_bool(config.density) {
                edges.push((i, j));
            }
        }
        if edges.len() == before {
            edges.push((rng.gen_range(0..j), j));
        }
    }
    let graph = Digraph::new(labels, edges).expect("generated graph is simple");
    Dag::from_digraph(&graph, None).expect("generated graph is a single-source DAG")
}

pub fn random_losses(rng: &mut impl Rng, dag: &Dag, max_loss: u32) -> LossFunction {
    let values = (0..dag.edge_count()).map(|_| rng.gen_range(0..=max_loss) as f64).collect();
    LossFunction::new(dag, values).expect("non-negative losses")
}

/// Random weights that are positive on every agent with several successors.
pub fn random_decider_weights(rng: &mut impl Rng, dag: &Dag) -> WeightVector {
    let raw: Vec<f64> = dag
        .nodes()
        .map(|v| {
            if dag.out_degree(v) > 1 {
                rng.gen_range(0.05..1.0)
            } else if rng.gen_bool(0.5) {
                0.0
            } else {
                rng.gen_range(0.0..1.0)
            }
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    WeightVector::new(raw.iter().map(|w| w / sum).collect()).expect("normalized")
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= LIABILITY_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

fn vectors_close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| close(*x, *y))
}

fn labels_of(dag: &Dag, path: &Path) -> Vec<String> {
    path.labels(dag)
}

fn paths_json(dag: &Dag, paths: &[Path]) -> Value {
    paths.iter().map(|p| labels_of(dag, p)).collect::<Vec<_>>().into()
}

fn liab_json(dag: &Dag, values: &[f64]) -> Value {
    let map: BTreeMap<&str, f64> = dag.nodes().map(|v| (dag.label(v), values[v.index()])).collect();
    json!(map)
}

enum TrialOutcome {
    Pass,
    Fail(Value),
}

struct Instance {
    dag: Dag,
    losses: LossFunction,
}

fn draw_instance(rng: &mut ChaCha8Rng, target: &Target<'_>, generator: &GeneratorConfig, trial: usize) -> Instance {
    match target {
        Target::RandomGraphs => {
            let dag = random_dag(rng, generator);
            let losses = random_losses(rng, &dag, generator.max_loss);
            Instance { dag, losses }
        }
        Target::Graph(dag) => {
            let losses = random_losses(rng, dag, generator.max_loss);
            Instance { dag: (*dag).clone(), losses }
        }
        Target::Instances(dag, list) => {
            Instance { dag: (*dag).clone(), losses: list[trial % list.len()].clone() }
        }
    }
}

fn build_rule<'g>(source: &RuleSource, dag: &'g Dag, rng: &mut ChaCha8Rng) -> Result<Rule<'g>, CheckError> {
    Ok(match source {
        RuleSource::Spec(spec) => make_rule(spec, dag)?,
        RuleSource::RandomDeciderWeights => Rule::fixed(dag, random_decider_weights(rng, dag))?,
    })
}

fn run_trial(
    check: Check,
    source: &RuleSource,
    target: &Target<'_>,
    config: &CheckConfig,
    trial: usize,
) -> Result<Option<Counterexample>, CheckError> {
    let mut rng = trial_rng(config.seed, trial);
    let Instance { dag, losses } = draw_instance(&mut rng, target, &config.generator, trial);
    let rule = build_rule(source, &dag, &mut rng)?;
    let ctx = Ctx { dag: &dag, rule: &rule, losses: &losses, config };
    let outcome = match check {
        Check::Axiom(Axiom::EfficientImplementation) => ctx.efficient_implementation()?,
        Check::Axiom(Axiom::RealizedLossDependence) => ctx.realized_loss_dependence(&mut rng)?,
        Check::Axiom(Axiom::PairwiseCollusionProofness) => ctx.collusion_proofness()?,
        Check::Axiom(Axiom::ScaleInvariance) => ctx.scale_invariance(&mut rng)?,
        Check::Property(Property::DownstreamMonotonicity) => ctx.downstream_monotonicity(&mut rng)?,
        Check::Property(Property::EfficientPathInvariance) => ctx.efficient_path_invariance(),
        Check::Property(Property::RedistributionInvariance) => ctx.redistribution_invariance(&mut rng)?,
        Check::Property(Property::PathIndependence) => ctx.path_independence(&mut rng)?,
        Check::Property(Property::TotalLossDependence) => ctx.total_loss_dependence(&mut rng)?,
    };
    Ok(match outcome {
        TrialOutcome::Pass => None,
        TrialOutcome::Fail(detail) => Some(Counterexample {
            trial,
            graph: GraphFile::from_dag(&dag, None),
            losses: losses.to_label_map(&dag),
            detail,
        }),
    })
}

struct Ctx<'a> {
    dag: &'a Dag,
    rule: &'a Rule<'a>,
    losses: &'a LossFunction,
    config: &'a CheckConfig,
}

impl Ctx<'_> {
    fn paths(&self) -> Result<Vec<Path>, CheckError> {
        Ok(enumerate_paths(self.dag, Some(self.config.solve.history_cap))?)
    }

    fn liab(&self, path: &Path, losses: &LossFunction) -> Vec<f64> {
        self.rule.bind(losses).liabilities(path).values().to_vec()
    }

    fn efficient_implementation(&self) -> Result<TrialOutcome, CheckError> {
        let spe = spe_outcomes(self.rule, self.losses, &self.config.solve)?;
        let tol = self.config.solve.tolerance.unwrap_or_else(|| self.losses.comparison_tolerance());
        let eff = efficient_paths(self.dag, self.losses, tol);
        if spe == eff.paths {
            return Ok(TrialOutcome::Pass);
        }
        let dag = self.dag;
        Ok(TrialOutcome::Fail(json!({
            "spe": paths_json(dag, &spe),
            "spe_losses": spe.iter().map(|p| self.losses.path_loss(dag, p)).collect::<Vec<_>>(),
            "efficient": paths_json(dag, &eff.paths),
            "efficient_loss": eff.min_cost,
        })))
    }

    fn realized_loss_dependence(&self, rng: &mut ChaCha8Rng) -> Result<TrialOutcome, CheckError> {
        let paths = self.paths()?;
        let path = paths.choose(rng).expect("at least one path");
        let on_path: Vec<usize> = path.edge_ids(self.dag).collect();
        let values = (0..self.dag.edge_count())
            .map(|e| {
                if on_path.contains(&e) {
                    self.losses.get(e)
                } else {
                    rng.gen_range(0..=self.config.generator.max_loss) as f64
                }
            })
            .collect();
        let other = LossFunction::new(self.dag, values)?;
        let before = self.liab(path, self.losses);
        let after = self.liab(path, &other);
        if vectors_close(&before, &after) {
            return Ok(TrialOutcome::Pass);
        }
        Ok(TrialOutcome::Fail(json!({
            "path": labels_of(self.dag, path),
            "other_losses": other.to_label_map(self.dag),
            "liabilities": liab_json(self.dag, &before),
            "other_liabilities": liab_json(self.dag, &after),
        })))
    }

    fn scale_invariance(&self, rng: &mut ChaCha8Rng) -> Result<TrialOutcome, CheckError> {
        let paths = self.paths()?;
        let path = paths.choose(rng).expect("at least one path");
        let alpha = *[0.5, 2.0, 10.0].choose(rng).expect("non-empty");
        let base = self.liab(path, self.losses);
        let scaled = self.liab(path, &self.losses.scaled(alpha));
        let expected: Vec<f64> = base.iter().map(|x| alpha * x).collect();
        if vectors_close(&scaled, &expected) {
            return Ok(TrialOutcome::Pass);
        }
        Ok(TrialOutcome::Fail(json!({
            "path": labels_of(self.dag, path),
            "alpha": alpha,
            "scaled_liabilities": liab_json(self.dag, &scaled),
            "alpha_times_liabilities": liab_json(self.dag, &expected),
        })))
    }

    /// Deviations by an on-path mover followed by any equilibrium play of
    /// the subgame consistent with the original profile being an equilibrium.
    fn collusion_proofness(&self) -> Result<TrialOutcome, CheckError> {
        let dag = self.dag;
        let mut solver = SpeSolver::new(self.rule, self.losses, &self.config.solve)?;
        let equilibria = solver.outcomes()?;
        let bound = self.rule.bind(self.losses);
        for path in &equilibria {
            let base = bound.liabilities(path);
            for (k, &mover) in path.non_sink_nodes().iter().enumerate() {
                let next = path.nodes()[k + 1];
                for &alt in dag.successors(mover) {
                    let alt = NodeId::new(alt);
                    if alt == next {
                        continue;
                    }
                    let mut history = path.nodes()[..=k].to_vec();
                    history.push(alt);
                    for deviation in solver.outcomes_at(&history)? {
                        let after = bound.liabilities(&deviation);
                        if after[mover] < base[mover] - solver.tolerance() {
                            continue;
                        }
                        for j in dag.nodes() {
                            let joint_before = base[mover] + base[j];
                            let joint_after = after[mover] + after[j];
                            if joint_before > joint_after && !close(joint_before, joint_after) {
                                return Ok(TrialOutcome::Fail(json!({
                                    "equilibrium": labels_of(dag, path),
                                    "deviator": dag.label(mover),
                                    "deviation": labels_of(dag, &deviation),
                                    "partner": dag.label(j),
                                    "joint_before": joint_before,
                                    "joint_after": joint_after,
                                    "liabilities": liab_json(dag, base.values()),
                                    "deviation_liabilities": liab_json(dag, after.values()),
                                })));
                            }
                        }
                    }
                }
            }
        }
        Ok(TrialOutcome::Pass)
    }

    fn downstream_monotonicity(&self, rng: &mut ChaCha8Rng) -> Result<TrialOutcome, CheckError> {
        let dag = self.dag;
        let weights = self.rule.weights();
        let mut histories = Vec::new();
        collect_histories(dag, &mut vec![0], &mut |h| {
            let v = NodeId::new(*h.last().expect("non-empty"));
            let eligible = dag.out_degree(v) > 1 && weights.is_none_or(|w| w[v] > 0.0);
            if eligible {
                histories.push(h.to_vec());
            }
        });
        let Some(history) = histories.choose(rng) else {
            return Ok(TrialOutcome::Pass);
        };
        let i = NodeId::new(*history.last().expect("non-empty"));
        let tol = self.losses.comparison_tolerance();
        let cont = continuation_costs(dag, self.losses);
        let bound = self.rule.bind(self.losses);
        let branches: Vec<(usize, f64, Vec<Path>)> = dag
            .out_edges(i)
            .zip(dag.successors(i))
            .map(|(e, &j)| {
                let paths = tight_suffixes(dag, self.losses, &cont, tol, j)
                    .into_iter()
                    .map(|s| Path::from_indices(&[history.as_slice(), s.as_slice()].concat()))
                    .collect();
                (j, self.losses.get(e) + cont[j], paths)
            })
            .collect();
        for (j, cost_j, paths_j) in &branches {
            for (k, cost_k, paths_k) in &branches {
                if j == k {
                    continue;
                }
                let cheaper = *cost_j < *cost_k - tol;
                for pj in paths_j {
                    for pk in paths_k {
                        let (lj, lk) = (bound.liability(i, pj), bound.liability(i, pk));
                        let lower = lj < lk && !close(lj, lk);
                        if cheaper != lower {
                            return Ok(TrialOutcome::Fail(json!({
                                "mover": dag.label(i),
                                "via": [labels_of(dag, pj), labels_of(dag, pk)],
                                "continuation_costs": [cost_j, cost_k],
                                "mover_liabilities": [lj, lk],
                            })));
                        }
                    }
                }
            }
        }
        Ok(TrialOutcome::Pass)
    }

    fn efficient_path_invariance(&self) -> TrialOutcome {
        let eff = efficient_paths(self.dag, self.losses, self.losses.comparison_tolerance());
        self.equal_liabilities(&eff.paths, self.losses)
    }

    fn equal_liabilities(&self, paths: &[Path], losses: &LossFunction) -> TrialOutcome {
        let bound = self.rule.bind(losses);
        let Some(first) = paths.first() else {
            return TrialOutcome::Pass;
        };
        let reference = bound.liabilities(first);
        for other in &paths[1..] {
            let liab = bound.liabilities(other);
            if !vectors_close(reference.values(), liab.values()) {
                return TrialOutcome::Fail(json!({
                    "paths": [labels_of(self.dag, first), labels_of(self.dag, other)],
                    "evaluated_losses": losses.to_label_map(self.dag),
                    "liabilities": [liab_json(self.dag, reference.values()), liab_json(self.dag, liab.values())],
                }));
            }
        }
        TrialOutcome::Pass
    }

    fn redistribution_invariance(&self, rng: &mut ChaCha8Rng) -> Result<TrialOutcome, CheckError> {
        let dag = self.dag;
        let paths = self.paths()?;
        let path = paths.choose(rng).expect("at least one path");
        let on_path: Vec<usize> = path.edge_ids(dag).collect();
        let mut moved: Vec<f64> = on_path.iter().map(|&e| self.losses.get(e)).collect();
        if rng.gen_bool(0.5) {
            moved.shuffle(rng);
        } else {
            moved = random_composition(rng, moved.iter().sum::<f64>() as u64, moved.len());
        }
        let mut values: Vec<f64> =
            (0..dag.edge_count()).map(|_| rng.gen_range(0..=self.config.generator.max_loss) as f64).collect();
        for (&e, &x) in on_path.iter().zip(&moved) {
            values[e] = x;
        }
        let other = LossFunction::new(dag, values)?;
        let before = self.liab(path, self.losses);
        let after = self.liab(path, &other);
        if vectors_close(&before, &after) {
            return Ok(TrialOutcome::Pass);
        }
        Ok(TrialOutcome::Fail(json!({
            "path": labels_of(dag, path),
            "other_losses": other.to_label_map(dag),
            "liabilities": liab_json(dag, &before),
            "other_liabilities": liab_json(dag, &after),
        })))
    }

    fn path_independence(&self, rng: &mut ChaCha8Rng) -> Result<TrialOutcome, CheckError> {
        let paths = self.paths()?;
        for group in group_by_total(self.dag, &paths, self.losses).values() {
            if let TrialOutcome::Fail(detail) = self.equal_liabilities(group, self.losses) {
                return Ok(TrialOutcome::Fail(detail));
            }
        }
        let anchor = paths.choose(rng).expect("at least one path");
        let flat = irreducible_extension(self.dag, anchor, self.losses)?;
        Ok(self.equal_liabilities(&paths, &flat))
    }

    fn total_loss_dependence(&self, rng: &mut ChaCha8Rng) -> Result<TrialOutcome, CheckError> {
        let dag = self.dag;
        let paths = self.paths()?;
        let other = random_losses(rng, dag, self.config.generator.max_loss);
        let anchor = paths.choose(rng).expect("at least one path");
        let flat = irreducible_extension(dag, anchor, &other)?;
        let bound = self.rule.bind(self.losses);
        for alt in [&other, &flat] {
            let alt_bound = self.rule.bind(alt);
            let alt_groups = group_by_total(dag, &paths, alt);
            for (total, group) in group_by_total(dag, &paths, self.losses) {
                let Some(matches) = alt_groups.get(&total) else {
                    continue;
                };
                for p in &group {
                    let a = bound.liabilities(p);
                    for q in matches {
                        let b = alt_bound.liabilities(q);
                        if !vectors_close(a.values(), b.values()) {
                            return Ok(TrialOutcome::Fail(json!({
                                "path": labels_of(dag, p),
                                "other_path": labels_of(dag, q),
                                "other_losses": alt.to_label_map(dag),
                                "total": f64::from_bits(total),
                                "liabilities": [liab_json(dag, a.values()), liab_json(dag, b.values())],
                            })));
                        }
                    }
                }
            }
        }
        Ok(TrialOutcome::Pass)
    }
}

/// Paths grouped by exact total loss (keyed by bit pattern).
fn group_by_total(dag: &Dag, paths: &[Path], losses: &LossFunction) -> BTreeMap<u64, Vec<Path>> {
    let mut groups: BTreeMap<u64, Vec<Path>> = BTreeMap::new();
    for p in paths {
        let total = losses.path_loss(dag, p) + 0.0;
        groups.entry(total.to_bits()).or_default().push(p.clone());
    }
    groups
}

fn random_composition(rng: &mut impl Rng, total: u64, parts: usize) -> Vec<f64> {
    let mut cuts: Vec<u64> = (0..parts.saturating_sub(1)).map(|_| rng.gen_range(0..=total)).collect();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(parts);
    let mut prev = 0;
    for c in cuts {
        out.push((c - prev) as f64);
        prev = c;
    }
    out.push((total - prev) as f64);
    out
}

fn collect_histories(dag: &Dag, stack: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    let v = *stack.last().expect("non-empty");
    if dag.is_sink(NodeId::new(v)) {
        return;
    }
    visit(stack);
    for &w in dag.successors(NodeId::new(v)) {
        stack.push(w);
        collect_histories(dag, stack, visit);
        stack.pop();
    }
}

/// Cheapest continuations from `start`, as node sequences beginning there.
fn tight_suffixes(dag: &Dag, losses: &LossFunction, cost: &[f64], tol: f64, start: usize) -> Vec<Vec<usize>> {
    fn walk(dag: &Dag, losses: &LossFunction, cost: &[f64], tol: f64, stack: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let v = *stack.last().expect("non-empty");
        let node = NodeId::new(v);
        if dag.is_sink(node) {
            out.push(stack.clone());
            return;
        }
        for (e, &w) in dag.out_edges(node).zip(dag.successors(node)) {
            if losses.get(e) + cost[w] <= cost[v] + tol {
                stack.push(w);
                walk(dag, losses, cost, tol, stack, out);
                stack.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(dag, losses, cost, tol, &mut vec![start], &mut out);
    out
}

fn run_checks(
    check: Check,
    source: &RuleSource,
    target: &Target<'_>,
    config: &CheckConfig,
) -> Result<CheckReport, CheckError> {
    let mut report = CheckReport {
        check: check.to_string(),
        rule: source.to_string(),
        verdict: Verdict::Pass,
        seed: config.seed,
        trials_requested: config.trials,
        trials_run: 0,
        passes: 0,
        note: None,
        counterexample: None,
    };
    if check == Check::Property(Property::DownstreamMonotonicity) && !downstream_applicable(source, target)? {
        report.verdict = Verdict::NotApplicable;
        report.note = Some("rule is not known to satisfy both realized-loss dependence and efficient implementation".into());
        return Ok(report);
    }
    for start in (0..config.trials).step_by(CHUNK) {
        let end = (start + CHUNK).min(config.trials);
        let results: Vec<Result<Option<Counterexample>, CheckError>> = (start..end)
            .into_par_iter()
            .map(|trial| run_trial(check, source, target, config, trial))
            .collect();
        for result in results {
            report.trials_run += 1;
            match result? {
                None => report.passes += 1,
                Some(cex) => {
                    report.verdict = Verdict::Fail;
                    report.counterexample = Some(cex);
                    return Ok(report);
                }
            }
        }
    }
    Ok(report)
}

fn downstream_applicable(source: &RuleSource, target: &Target<'_>) -> Result<bool, CheckError> {
    Ok(match source {
        RuleSource::RandomDeciderWeights => true,
        RuleSource::Spec(spec) => {
            let probe = match target {
                Target::Graph(dag) | Target::Instances(dag, _) => (*dag).clone(),
                Target::RandomGraphs => fixtures::fig2(),
            };
            make_rule(spec, &probe)?.satisfies_rld_and_ei()
        }
    })
}

pub fn check_axiom(
    axiom: Axiom,
    spec: &RuleSpec,
    target: Target<'_>,
    config: &CheckConfig,
) -> Result<CheckReport, CheckError> {
    run_checks(Check::Axiom(axiom), &RuleSource::Spec(spec.clone()), &target, config)
}

pub fn check_property(
    property: Property,
    spec: &RuleSpec,
    target: Target<'_>,
    config: &CheckConfig,
) -> Result<CheckReport, CheckError> {
    run_checks(Check::Property(property), &RuleSource::Spec(spec.clone()), &target, config)
}

/// Runs any check against any rule source.
pub fn check(
    check: Check,
    source: &RuleSource,
    target: Target<'_>,
    config: &CheckConfig,
) -> Result<CheckReport, CheckError> {
    run_checks(check, source, &target, config)
}

/// Re-runs the trial recorded in `report` and returns its counterexample.
pub fn replay(
    report: &CheckReport,
    check: Check,
    source: &RuleSource,
    target: Target<'_>,
    config: &CheckConfig,
) -> Result<Option<Counterexample>, CheckError> {
    let Some(cex) = &report.counterexample else {
        return Ok(None);
    };
    let config = CheckConfig { seed: report.seed, ..*config };
    run_trial(check, source, &target, &config, cex.trial)
}

/// The two loss functions of the on-path-only impossibility instance on the
/// four-node graph with edges `s->t, s->i, i->j, i->t, j->t`.
pub fn impossibility_losses(dag: &Dag) -> Result<Vec<LossFunction>, CheckError> {
    if *dag != fixtures::fig4() {
        return Err(CheckError::FixtureMismatch("appendixC".into()));
    }
    Ok(vec![fixtures::fig4_losses(dag, false), fixtures::fig4_losses(dag, true)])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioLeg {
    pub name: &'static str,
    pub losses: BTreeMap<String, f64>,
    pub spe: Vec<Vec<String>>,
    pub efficient: Vec<Vec<String>>,
    pub efficient_implemented: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub rule: String,
    pub graph_valid: bool,
    pub no_bottlenecks: bool,
    pub legs: Vec<ScenarioLeg>,
}

impl ScenarioReport {
    pub fn leg(&self, name: &str) -> Option<&ScenarioLeg> {
        self.legs.iter().find(|l| l.name == name)
    }
}

/// Evaluates efficient implementation for `spec` at both scenario losses.
pub fn impossibility_scenario(spec: &RuleSpec) -> Result<ScenarioReport, CheckError> {
    let dag = fixtures::fig4();
    let validation = validate(&dag.to_digraph(), None);
    let rule = make_rule(spec, &dag)?;
    let mut legs = Vec::new();
    for (name, losses) in ["base", "primed"].into_iter().zip(impossibility_losses(&dag)?) {
        let spe = spe_outcomes(&rule, &losses, &SolveOptions::default())?;
        let eff = efficient_paths(&dag, &losses, 0.0);
        legs.push(ScenarioLeg {
            name,
            losses: losses.to_label_map(&dag),
            spe: spe.iter().map(|p| p.labels(&dag)).collect(),
            efficient: eff.paths.iter().map(|p| p.labels(&dag)).collect(),
            efficient_implemented: spe == eff.paths,
        });
    }
    Ok(ScenarioReport {
        rule: spec.to_string(),
        graph_valid: validation.is_valid(),
        no_bottlenecks: validation.no_bottlenecks() == Some(true),
        legs,
    })
}

/// The random graph and losses of one trial, for tests that drive trials
/// themselves.
pub fn draw_random_instance(seed: u64, trial: usize, generator: &GeneratorConfig) -> (Dag, LossFunction) {
    let mut rng = trial_rng(seed, trial);
    let dag = random_dag(&mut rng, generator);
    let losses = random_losses(&mut rng, &dag, generator.max_loss);
    (dag, losses)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(trials: usize, seed: u64) -> CheckConfig {
        CheckConfig { trials, seed, ..CheckConfig::default() }
    }

    #[test]
    fn ids_parse() {
        assert_eq!("ei".parse::<Axiom>().unwrap(), Axiom::EfficientImplementation);
        assert_eq!("PATH_INDEP".parse::<Check>().unwrap(), Check::Property(Property::PathIndependence));
        assert!("XYZ".parse::<Check>().is_err());
    }

    #[test]
    fn random_dags_are_valid() {
        let g = GeneratorConfig::default();
        for trial in 0..200 {
            let (dag, losses) = draw_random_instance(7, trial, &g);
            assert!((4..=8).contains(&dag.node_count()));
            assert!(losses.values().iter().all(|&x| x.fract() == 0.0 && (0.0..=9.0).contains(&x)));
        }
    }

    #[test]
    fn wstar_passes_efficient_implementation() {
        let report = check_axiom(Axiom::EfficientImplementation, &RuleSpec::FixedWstar, Target::RandomGraphs, &cfg(100, 1))
            .unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
        assert_eq!(report.passes, 100);
    }

    #[test]
    fn local_rule_fails_on_long_chain() {
        let (dag, losses) = fixtures::fig1(3, 0.5);
        let list = [losses];
        let report = check_axiom(
            Axiom::EfficientImplementation,
            &RuleSpec::Local,
            Target::Instances(&dag, &list),
            &cfg(1, 0),
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
        let detail = &report.counterexample.unwrap().detail;
        assert_eq!(detail["spe_losses"], json!([3.0]));
        assert_eq!(detail["efficient_loss"], json!(1.5));
    }

    #[test]
    fn sqrt_source_fails_scale_invariance() {
        let report =
            check_axiom(Axiom::ScaleInvariance, &RuleSpec::SqrtSource, Target::RandomGraphs, &cfg(100, 2)).unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
    }

    #[test]
    fn max_out_weights_fail_realized_loss_dependence() {
        let report =
            check_axiom(Axiom::RealizedLossDependence, &RuleSpec::MaxOutWeights, Target::RandomGraphs, &cfg(100, 3))
                .unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
    }

    #[test]
    fn downstream_monotonicity_on_five_node_network() {
        let dag = fixtures::fig2();
        let report = check_property(
            Property::DownstreamMonotonicity,
            &RuleSpec::FixedWstar,
            Target::Graph(&dag),
            &cfg(50, 4),
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
        let na = check_property(Property::DownstreamMonotonicity, &RuleSpec::Local, Target::Graph(&dag), &cfg(5, 4))
            .unwrap();
        assert_eq!(na.verdict, Verdict::NotApplicable);
    }

    #[test]
    fn local_rule_is_path_dependent() {
        let dag = fixtures::fig4();
        // s->t and s->i->t both cost 2, split differently.
        let losses = LossFunction::from_fn(&dag, |a, b| match (dag.label(a), dag.label(b)) {
            ("s", "t") => 2.0,
            ("s", "i") | ("i", "t") => 1.0,
            _ => 5.0,
        })
        .unwrap();
        let list = [losses];
        let report =
            check_property(Property::PathIndependence, &RuleSpec::Local, Target::Instances(&dag, &list), &cfg(1, 0))
                .unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
    }

    #[test]
    fn fixed_rules_are_redistribution_invariant() {
        let report = check_property(
            Property::RedistributionInvariance,
            &RuleSpec::FixedEqual,
            Target::RandomGraphs,
            &cfg(100, 5),
        )
        .unwrap();
        assert!(report.passed());
    }

    #[test]
    fn reports_replay() {
        let config = cfg(200, 11);
        let spec = RuleSpec::OnPathAlpha;
        let first = check_axiom(Axiom::PairwiseCollusionProofness, &spec, Target::RandomGraphs, &config).unwrap();
        let second = check_axiom(Axiom::PairwiseCollusionProofness, &spec, Target::RandomGraphs, &config).unwrap();
        assert_eq!(serde_json::to_string(&first).unwrap(), serde_json::to_string(&second).unwrap());
        let cex = first.counterexample.clone().expect("a collusion counterexample");
        let again = replay(
            &first,
            Check::Axiom(Axiom::PairwiseCollusionProofness),
            &RuleSource::Spec(spec),
            Target::RandomGraphs,
            &config,
        )
        .unwrap();
        assert_eq!(again, Some(cex));
    }

    #[test]
    fn scenario_with_wstar() {
        let report = impossibility_scenario(&RuleSpec::FixedWstar).unwrap();
        assert!(report.graph_valid && report.no_bottlenecks);
        assert!(report.legs.iter().all(|l| l.efficient_implemented));
        let local = impossibility_scenario(&RuleSpec::Local).unwrap();
        let primed = local.leg("primed").unwrap();
        assert_eq!(primed.efficient, [["s", "i", "t"]]);
        assert!(!primed.efficient_implemented);
    }

    #[test]
    fn compositions_sum() {
        let mut rng = trial_rng(0, 0);
        for _ in 0..50 {
            let parts = random_composition(&mut rng, 17, 4);
            assert_eq!(parts.len(), 4);
            assert_eq!(parts.iter().sum::<f64>(), 17.0);
        }
    }
}
