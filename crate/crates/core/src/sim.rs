//! Monte-Carlo comparison of liability rules on a random layered supply
//! network in which every base-layer node is shocked in turn.

use std::fs::File;
use std::path::{Path as FsPath, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::spe_path_greedy;
use crate::graph::{continuation_costs, reachable_subgraph_with_map, Digraph, GraphError, LossFunction, NodeId};
use crate::rules::{make_rule, RuleError, RuleSpec};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("rule `{0}` has no closed-form equilibrium path; the simulation supports fixed weights rewarding every decider and the local rule")]
    UnsupportedRule(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("cannot write {path}: {reason}")]
    Output { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayeredGraphSpec {
    pub layers: Vec<usize>,
    pub p_next: f64,
    pub p_skip: f64,
    /// Graph seed; derived from the master seed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for LayeredGraphSpec {
    fn default() -> Self {
        LayeredGraphSpec { layers: vec![30, 20, 15, 10, 15, 20], p_next: 0.4, p_skip: 0.1, seed: None }
    }
}

impl LayeredGraphSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.layers.len() < 2 || self.layers.contains(&0) {
            return Err(SimError::Config("need at least two non-empty layers".into()));
        }
        for (name, p) in [("p_next", self.p_next), ("p_skip", self.p_skip)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::Config(format!("{name} = {p} is not a probability")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformLosses {
    pub low: f64,
    pub high: f64,
}

impl Default for UniformLosses {
    fn default() -> Self {
        UniformLosses { low: 0.0, high: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub graph: LayeredGraphSpec,
    pub draws: usize,
    pub losses: UniformLosses,
    pub rules: Vec<String>,
    pub seed: u64,
    pub density_bins: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            graph: LayeredGraphSpec::default(),
            draws: 10_000,
            losses: UniformLosses::default(),
            rules: vec!["fixed:wstar".into(), "local".into()],
            seed: 2024,
            density_bins: 100,
            output_dir: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<Vec<RuleSpec>, SimError> {
        self.graph.validate()?;
        if self.draws == 0 {
            return Err(SimError::Config("draws must be at least 1".into()));
        }
        let UniformLosses { low, high } = self.losses;
        if !(low >= 0.0 && high > low && high.is_finite()) {
            return Err(SimError::Config(format!("loss range [{low}, {high}] must satisfy 0 <= low < high")));
        }
        if self.rules.is_empty() {
            return Err(SimError::Config("no rules to compare".into()));
        }
        if self.density_bins == 0 {
            return Err(SimError::Config("density_bins must be positive".into()));
        }
        self.rules.iter().map(|r| r.parse::<RuleSpec>().map_err(SimError::from)).collect()
    }

    fn graph_seed(&self) -> u64 {
        self.graph.seed.unwrap_or(self.seed ^ 0x9e37_79b9_7f4a_7c15)
    }
}

/// A multi-source network whose nodes are grouped into layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredGraph {
    pub graph: Digraph,
    pub layer_of: Vec<usize>,
    pub layer_count: usize,
}

impl LayeredGraph {
    pub fn layer_nodes(&self, layer: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.layer_of.len()).filter(move |&v| self.layer_of[v] == layer)
    }

    /// Every node outside the last layer.
    pub fn non_sinks(&self) -> Vec<usize> {
        (0..self.layer_of.len()).filter(|&v| self.layer_of[v] + 1 < self.layer_count).collect()
    }
}

/// Bernoulli edges to the next layer (`p_next`) and the one after
/// (`p_skip`). Nodes left without successors get one into the next layer,
/// and nodes past the first layer left without predecessors get one from
/// the previous layer.
pub fn generate_hourglass(spec: &LayeredGraphSpec, seed: u64) -> Result<LayeredGraph, SimError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.unwrap_or(seed));
    let mut start = Vec::with_capacity(spec.layers.len() + 1);
    let mut labels = Vec::new();
    let mut layer_of = Vec::new();
    for (l, &size) in spec.layers.iter().enumerate() {
        start.push(labels.len());
        for k in 0..size {
            labels.push(format!("L{l}_{k}"));
            layer_of.push(l);
        }
    }
    start.push(labels.len());
    let range = |l: usize| start[l]..start[l + 1];
    let layers = spec.layers.len();
    let mut edges = Vec::new();
    for l in 0..layers - 1 {
        for a in range(l) {
            for b in range(l + 1) {
                if rng.gen_bool(spec.p_next) {
                    edges.push((a, b));
                }
            }
            if l + 2 < layers {
                for b in range(l + 2) {
                    if rng.gen_bool(spec.p_skip) {
                        edges.push((a, b));
                    }
                }
            }
        }
    }
    let n = labels.len();
    let mut out_deg = vec![0usize; n];
    let mut in_deg = vec![0usize; n];
    for &(a, b) in &edges {
        out_deg[a] += 1;
        in_deg[b] += 1;
    }
    for l in 0..layers - 1 {
        for a in range(l) {
            if out_deg[a] == 0 {
                let b = rng.gen_range(range(l + 1));
                edges.push((a, b));
                out_deg[a] += 1;
                in_deg[b] += 1;
            }
        }
    }
    for l in 1..layers {
        for b in range(l) {
            if in_deg[b] == 0 {
                let a = rng.gen_range(range(l - 1));
                edges.push((a, b));
                in_deg[b] += 1;
            }
        }
    }
    edges.sort_unstable();
    Ok(LayeredGraph { graph: Digraph::new(labels, edges)?, layer_of, layer_count: layers })
}

/// Gini coefficient `sum_i sum_j |x_i - x_j| / (2 n^2 mean)`; 0 for empty or
/// all-zero input.
pub fn gini(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let total: f64 = sorted.iter().sum();
    if sorted.is_empty() || total == 0.0 {
        return 0.0;
    }
    let weighted: f64 = sorted.iter().enumerate().map(|(i, x)| (2.0 * (i as f64 + 1.0) - n - 1.0) * x).sum();
    weighted / (n * total)
}

/// Fixed-width histogram over `[0, inf)` with a separate count of exact
/// zeros.
#[derive(Debug, Clone, PartialEq)]
struct FineHistogram {
    width: f64,
    zeros: u64,
    bins: Vec<u64>,
}

impl FineHistogram {
    fn new(width: f64) -> Self {
        FineHistogram { width, zeros: 0, bins: Vec::new() }
    }

    fn add(&mut self, x: f64) {
        if x == 0.0 {
            self.zeros += 1;
            return;
        }
        let k = (x / self.width) as usize;
        if k >= self.bins.len() {
            self.bins.resize(k + 1, 0);
        }
        self.bins[k] += 1;
    }

    fn merge(&mut self, other: &FineHistogram) {
        self.zeros += other.zeros;
        if other.bins.len() > self.bins.len() {
            self.bins.resize(other.bins.len(), 0);
        }
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
    }

    /// Gini with every observation at its bin midpoint.
    fn gini(&self) -> f64 {
        let total: u64 = self.zeros + self.bins.iter().sum::<u64>();
        let n = total as f64;
        let mut rank = self.zeros as f64;
        let mut weighted = 0.0;
        let mut sum = 0.0;
        for (k, &count) in self.bins.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let c = count as f64;
            let x = (k as f64 + 0.5) * self.width;
            weighted += x * c * (2.0 * rank + c - n);
            sum += x * c;
            rank += c;
        }
        if sum == 0.0 {
            0.0
        } else {
            weighted / (n * sum)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct RuleAccum {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    realized: f64,
    edges: f64,
    max_balance_error: f64,
    inefficient_draws: u64,
    density: Vec<u64>,
    overflow: u64,
    pooled: FineHistogram,
}

impl RuleAccum {
    fn new(agents: usize, bins: usize, width: f64) -> Self {
        RuleAccum {
            sum: vec![0.0; agents],
            sum_sq: vec![0.0; agents],
            realized: 0.0,
            edges: 0.0,
            max_balance_error: 0.0,
            inefficient_draws: 0,
            density: vec![0; bins],
            overflow: 0,
            pooled: FineHistogram::new(width),
        }
    }

    fn merge(&mut self, other: &RuleAccum) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        self.realized += other.realized;
        self.edges += other.edges;
        self.max_balance_error = self.max_balance_error.max(other.max_balance_error);
        self.inefficient_draws += other.inefficient_draws;
        for (a, b) in self.density.iter_mut().zip(&other.density) {
            *a += b;
        }
        self.overflow += other.overflow;
        self.pooled.merge(&other.pooled);
    }
}

#[derive(Debug, Clone, PartialEq)]
struct SourceAccum {
    efficient: f64,
    rules: Vec<RuleAccum>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentStats {
    pub agent: String,
    pub layer: usize,
    pub mean_liability: Vec<f64>,
    pub mean_sq_liability: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerStats {
    pub layer: String,
    pub agents: usize,
    pub mean_liability: Vec<f64>,
    pub mean_sq_liability: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleSummary {
    pub rule: String,
    pub mean_realized_loss: f64,
    pub realized_over_efficient: f64,
    pub mean_path_edges: f64,
    pub gini_mean_liability: f64,
    pub gini_pooled_liability: f64,
    pub draws_above_efficient: u64,
    pub max_balance_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub first: String,
    pub second: String,
    pub agents: usize,
    pub lower_mean_under_first: usize,
    pub lower_mean_sq_under_first: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityBin {
    pub start: f64,
    pub end: f64,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStats {
    pub rules: Vec<String>,
    pub nodes: usize,
    pub edges: usize,
    pub sources: usize,
    pub sinks: usize,
    pub draws_per_source: usize,
    pub instances: u64,
    pub mean_efficient_loss: f64,
    pub per_rule: Vec<RuleSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
    #[serde(skip)]
    pub agents: Vec<AgentStats>,
    #[serde(skip)]
    pub layers: Vec<LayerStats>,
    #[serde(skip)]
    pub density: Vec<DensityBin>,
    #[serde(skip)]
    pub density_totals: Vec<u64>,
    pub notes: Vec<&'static str>,
}

const POOLED_BIN_WIDTH_FRACTION: f64 = 1e-4;

/// Runs the study on `workers` threads (0 picks the rayon default). The
/// result does not depend on the worker count.
pub fn run_simulation(config: &SimConfig, workers: usize) -> Result<SimStats, SimError> {
    let specs = config.validate()?;
    let layered = generate_hourglass(&config.graph, config.graph_seed())?;
    let agents = layered.non_sinks();
    let mut agent_slot = vec![usize::MAX; layered.graph.node_count()];
    for (k, &v) in agents.iter().enumerate() {
        agent_slot[v] = k;
    }
    let sources: Vec<usize> = layered.layer_nodes(0).collect();
    let UniformLosses { low, high } = config.losses;
    let bins = config.density_bins;
    let bin_width = high / bins as f64;
    let pooled_width = high * POOLED_BIN_WIDTH_FRACTION;

    let run_source = |(s_idx, &source): (usize, &usize)| -> Result<SourceAccum, SimError> {
        let label = &layered.graph.labels()[source];
        let (dag, map) = reachable_subgraph_with_map(&layered.graph, label)?;
        let rules = specs.iter().map(|spec| make_rule(spec, &dag)).collect::<Result<Vec<_>, _>>()?;
        let slots: Vec<usize> = map.iter().map(|&v| agent_slot[v]).collect();
        let sub_agents: Vec<NodeId> = dag.non_sinks().collect();
        let outside = agents.len() - sub_agents.len();
        let mut acc = SourceAccum {
            efficient: 0.0,
            rules: specs.iter().map(|_| RuleAccum::new(agents.len(), bins, pooled_width)).collect(),
        };
        for draw in 0..config.draws {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(((s_idx as u64) << 32) | draw as u64);
            let values = (0..dag.edge_count()).map(|_| rng.gen_range(low..high)).collect();
            let losses = LossFunction::new(&dag, values)?;
            let efficient = continuation_costs(&dag, &losses)[0];
            acc.efficient += efficient;
            for ((rule, spec), ra) in rules.iter().zip(&specs).zip(acc.rules.iter_mut()) {
                let path = spe_path_greedy(rule, &losses).ok_or_else(|| SimError::UnsupportedRule(spec.to_string()))?;
                let total = losses.path_loss(&dag, &path);
                let liab = rule.bind(&losses).liabilities(&path);
                ra.realized += total;
                ra.edges += path.edge_count() as f64;
                ra.max_balance_error = ra.max_balance_error.max((liab.total() - total).abs());
                if total > efficient + 1e-9 * efficient.max(1.0) {
                    ra.inefficient_draws += 1;
                }
                for &v in &sub_agents {
                    let x = liab[v];
                    let slot = slots[v.index()];
                    ra.sum[slot] += x;
                    ra.sum_sq[slot] += x * x;
                    let k = (x / bin_width) as usize;
                    match ra.density.get_mut(k) {
                        Some(c) => *c += 1,
                        None => ra.overflow += 1,
                    }
                    ra.pooled.add(x);
                }
                ra.pooled.zeros += outside as u64;
            }
        }
        Ok(acc)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SimError::Config(format!("cannot start worker pool: {e}")))?;
    let per_source: Vec<SourceAccum> =
        pool.install(|| sources.par_iter().enumerate().map(run_source).collect::<Result<_, _>>())?;

    let mut total = SourceAccum {
        efficient: 0.0,
        rules: specs.iter().map(|_| RuleAccum::new(agents.len(), bins, pooled_width)).collect(),
    };
    for acc in &per_source {
        total.efficient += acc.efficient;
        for (a, b) in total.rules.iter_mut().zip(&acc.rules) {
            a.merge(b);
        }
    }
    let instances = (sources.len() * config.draws) as u64;
    let inst = instances as f64;
    let mean_efficient = total.efficient / inst;
    let labels = layered.graph.labels();

    let agent_stats: Vec<AgentStats> = agents
        .iter()
        .enumerate()
        .map(|(k, &v)| AgentStats {
            agent: labels[v].clone(),
            layer: layered.layer_of[v],
            mean_liability: total.rules.iter().map(|r| r.sum[k] / inst).collect(),
            mean_sq_liability: total.rules.iter().map(|r| r.sum_sq[k] / inst).collect(),
        })
        .collect();

    let mut layers = Vec::new();
    for l in 0..layered.layer_count - 1 {
        let members: Vec<&AgentStats> = agent_stats.iter().filter(|a| a.layer == l).collect();
        layers.push(layer_row(l.to_string(), &members, specs.len()));
    }
    layers.push(layer_row("all".into(), &agent_stats.iter().collect::<Vec<_>>(), specs.len()));

    let per_rule = specs
        .iter()
        .zip(&total.rules)
        .enumerate()
        .map(|(r, (spec, acc))| {
            let means: Vec<f64> = agent_stats.iter().map(|a| a.mean_liability[r]).collect();
            RuleSummary {
                rule: spec.to_string(),
                mean_realized_loss: acc.realized / inst,
                realized_over_efficient: acc.realized / total.efficient,
                mean_path_edges: acc.edges / inst,
                gini_mean_liability: gini(&means),
                gini_pooled_liability: acc.pooled.gini(),
                draws_above_efficient: acc.inefficient_draws,
                max_balance_error: acc.max_balance_error,
            }
        })
        .collect();

    let comparison = (specs.len() >= 2).then(|| Comparison {
        first: specs[0].to_string(),
        second: specs[1].to_string(),
        agents: agent_stats.len(),
        lower_mean_under_first: agent_stats.iter().filter(|a| a.mean_liability[0] < a.mean_liability[1]).count(),
        lower_mean_sq_under_first: agent_stats
            .iter()
            .filter(|a| a.mean_sq_liability[0] < a.mean_sq_liability[1])
            .count(),
    });

    let mut density: Vec<DensityBin> = (0..bins)
        .map(|k| DensityBin {
            start: k as f64 * bin_width,
            end: (k + 1) as f64 * bin_width,
            counts: total.rules.iter().map(|r| r.density[k]).collect(),
        })
        .collect();
    density.push(DensityBin {
        start: high,
        end: f64::INFINITY,
        counts: total.rules.iter().map(|r| r.overflow).collect(),
    });
    let density_totals = total
        .rules
        .iter()
        .map(|r| r.density.iter().sum::<u64>() + r.overflow)
        .collect();

    Ok(SimStats {
        rules: specs.iter().map(|s| s.to_string()).collect(),
        nodes: layered.graph.node_count(),
        edges: layered.graph.edges().len(),
        sources: sources.len(),
        sinks: layered.layer_nodes(layered.layer_count - 1).count(),
        draws_per_source: config.draws,
        instances,
        mean_efficient_loss: mean_efficient,
        per_rule,
        comparison,
        agents: agent_stats,
        layers,
        density,
        density_totals,
        notes: vec![
            "per-agent means average over every instance; agents outside the shocked source's reachable subgraph count as 0",
            "gini_mean_liability is taken over per-agent mean liabilities of all non-sink agents",
            "gini_pooled_liability pools every (instance, non-sink agent) liability, binned at 1e-4 of the loss range",
            "density counts individual liabilities of non-sink agents in the shocked subgraph",
            "path length counts edges",
        ],
    })
}

fn layer_row(layer: String, members: &[&AgentStats], rules: usize) -> LayerStats {
    let n = members.len().max(1) as f64;
    LayerStats {
        layer,
        agents: members.len(),
        mean_liability: (0..rules).map(|r| members.iter().map(|a| a.mean_liability[r]).sum::<f64>() / n).collect(),
        mean_sq_liability: (0..rules)
            .map(|r| members.iter().map(|a| a.mean_sq_liability[r]).sum::<f64>() / n)
            .collect(),
    }
}

fn output_error(path: &FsPath, e: impl std::fmt::Display) -> SimError {
    SimError::Output { path: path.display().to_string(), reason: e.to_string() }
}

/// Writes `per_agent.csv`, `per_layer.csv`, `density.csv` and
/// `summary.json` into `dir`.
pub fn write_outputs(stats: &SimStats, config: &SimConfig, dir: &FsPath) -> Result<(), SimError> {
    std::fs::create_dir_all(dir).map_err(|e| output_error(dir, e))?;

    let path = dir.join("per_agent.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| output_error(&path, e))?;
    let res: Result<(), csv::Error> = (|| {
        w.write_record(["agent", "layer", "rule", "mean_liability", "mean_sq_liability"])?;
        for a in &stats.agents {
            for (r, rule) in stats.rules.iter().enumerate() {
                w.write_record([
                    a.agent.clone(),
                    a.layer.to_string(),
                    rule.clone(),
                    a.mean_liability[r].to_string(),
                    a.mean_sq_liability[r].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| output_error(&path, e))?;

    let path = dir.join("per_layer.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| output_error(&path, e))?;
    let res: Result<(), csv::Error> = (|| {
        let mut header = vec!["layer".to_string(), "agents".to_string()];
        header.extend(stats.rules.iter().map(|r| format!("mean_liability[{r}]")));
        header.extend(stats.rules.iter().map(|r| format!("mean_sq_liability[{r}]")));
        w.write_record(&header)?;
        for l in &stats.layers {
            let mut row = vec![l.layer.clone(), l.agents.to_string()];
            row.extend(l.mean_liability.iter().map(|x| x.to_string()));
            row.extend(l.mean_sq_liability.iter().map(|x| x.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| output_error(&path, e))?;

    let path = dir.join("density.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| output_error(&path, e))?;
    let res: Result<(), csv::Error> = (|| {
        w.write_record(["rule", "bin_start", "bin_end", "count", "density"])?;
        for (r, rule) in stats.rules.iter().enumerate() {
            let total = stats.density_totals[r] as f64;
            for bin in &stats.density {
                let width = bin.end - bin.start;
                let density = if width.is_finite() { bin.counts[r] as f64 / (total * width) } else { 0.0 };
                w.write_record([
                    rule.clone(),
                    bin.start.to_string(),
                    bin.end.to_string(),
                    bin.counts[r].to_string(),
                    density.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| output_error(&path, e))?;

    let path = dir.join("summary.json");
    let summary = serde_json::json!({ "config": config, "stats": stats });
    let file = File::create(&path).map_err(|e| output_error(&path, e))?;
    serde_json::to_writer_pretty(file, &summary).map_err(|e| output_error(&path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[1.0, 1.0, 1.0, 1.0]), 0.0);
        assert_eq!(gini(&[1.0, 0.0, 0.0, 0.0]), 0.75);
        assert_eq!(gini(&[0.0, 0.0]), 0.0);
        assert_eq!(gini(&[]), 0.0);
    }

    #[test]
    fn histogram_gini_matches_exact_on_bin_midpoints() {
        let values = [0.0, 0.5, 1.5, 1.5, 7.5, 0.0, 3.5];
        let mut h = FineHistogram::new(1.0);
        values.iter().for_each(|&x| h.add(x));
        assert!((h.gini() - gini(&values)).abs() < 1e-12);
    }

    #[test]
    fn default_hourglass_shape() {
        let g = generate_hourglass(&LayeredGraphSpec::default(), 1).unwrap();
        assert_eq!(g.graph.node_count(), 110);
        assert_eq!(g.layer_nodes(0).count(), 30);
        assert_eq!(g.layer_nodes(5).count(), 20);
        assert_eq!(g.non_sinks().len(), 90);
    }

    #[test]
    fn deterministic_line() {
        let spec = LayeredGraphSpec { layers: vec![1, 1, 1], p_next: 1.0, p_skip: 0.0, seed: Some(3) };
        let g = generate_hourglass(&spec, 0).unwrap();
        assert_eq!(g.graph.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn config_validation() {
        let mut c = SimConfig { draws: 0, ..SimConfig::default() };
        assert!(c.validate().is_err());
        c.draws = 1;
        c.losses = UniformLosses { low: 5.0, high: 5.0 };
        assert!(c.validate().is_err());
        c.losses = UniformLosses::default();
        c.rules = vec!["phi9".into()];
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<SimConfig>(r#"{"draws": 3, "bogus": 1}"#).is_err());
        let parsed: SimConfig = serde_json::from_str(r#"{"draws": 3}"#).unwrap();
        assert_eq!(parsed.graph, LayeredGraphSpec::default());
    }

    #[test]
    fn unsupported_rules_are_reported() {
        let config = SimConfig {
            graph: LayeredGraphSpec { layers: vec![2, 2, 2], p_next: 1.0, p_skip: 0.0, seed: Some(1) },
            draws: 2,
            rules: vec!["phi1".into()],
            ..SimConfig::default()
        };
        assert!(matches!(run_simulation(&config, 1), Err(SimError::UnsupportedRule(_))));
    }

    #[test]
    fn small_run_balances() {
        let config = SimConfig {
            graph: LayeredGraphSpec { layers: vec![3, 3, 2, 3], ..LayeredGraphSpec::default() },
            draws: 200,
            ..SimConfig::default()
        };
        let stats = run_simulation(&config, 2).unwrap();
        for (r, summary) in stats.per_rule.iter().enumerate() {
            let total: f64 = stats.agents.iter().map(|a| a.mean_liability[r]).sum();
            assert!((total - summary.mean_realized_loss).abs() <= 1e-6 * summary.mean_realized_loss);
            assert!(summary.max_balance_error < 1e-9);
        }
        assert_eq!(stats.per_rule[0].draws_above_efficient, 0);
        assert!((stats.per_rule[0].mean_realized_loss - stats.mean_efficient_loss).abs() < 1e-9 * stats.mean_efficient_loss);
        assert!(stats.per_rule[1].mean_realized_loss >= stats.mean_efficient_loss);
    }
}
