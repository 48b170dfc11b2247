//! The `w*` weights: each path's unit share split equally among its non-sink
//! agents, averaged over paths. Computed by enumeration, by the Shapley value
//! of the path-counting game, and by a polynomial-time counting pass.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{count_paths, enumerate_paths, Dag, GraphError, NodeId};
use crate::rules::WeightVector;

/// Largest player count for coalition enumeration.
pub const MAX_PLAYERS: usize = 20;

/// Tolerance for core constraints.
pub const CORE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightsError {
    #[error("{players} non-sink agents; coalition enumeration supports at most {cap}")]
    TooManyPlayers { players: usize, cap: usize },
    #[error("coalition contains sink `{0}`")]
    SinkInCoalition(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Converts exact weights to a [`WeightVector`].
pub fn to_weight_vector(exact: &[BigRational]) -> WeightVector {
    let values = exact.iter().map(|w| w.to_f64().expect("weights are finite")).collect();
    WeightVector::new(values).expect("exact weights lie on the simplex")
}

/// `w*` by summing `1 / (|N*_P| |P|)` over enumerated paths.
pub fn wstar_enumerate_exact(dag: &Dag, cap: Option<usize>) -> Result<Vec<BigRational>, GraphError> {
    let paths = enumerate_paths(dag, cap)?;
    let lengths: Vec<u64> = paths.iter().map(|p| p.edge_count() as u64).collect();
    let common = lengths.iter().fold(1u64, |acc, &k| acc.lcm(&k));
    let mut numer = vec![BigInt::zero(); dag.node_count()];
    for (path, &k) in paths.iter().zip(&lengths) {
        let share = BigInt::from(common / k);
        for v in path.non_sink_nodes() {
            numer[v.index()] += &share;
        }
    }
    let denom = BigInt::from(common) * BigInt::from(paths.len());
    Ok(numer.into_iter().map(|n| BigRational::new(n, denom.clone())).collect())
}

pub fn wstar_enumerate(dag: &Dag, cap: Option<usize>) -> Result<WeightVector, GraphError> {
    Ok(to_weight_vector(&wstar_enumerate_exact(dag, cap)?))
}

/// Share of paths whose non-sink agents all lie in `coalition`, by a forward
/// pass restricted to the coalition.
pub fn path_counting_value(dag: &Dag, coalition: &[NodeId]) -> Result<BigRational, WeightsError> {
    let mut member = vec![false; dag.node_count()];
    for &v in coalition {
        if dag.is_sink(v) {
            return Err(WeightsError::SinkInCoalition(dag.label(v).to_string()));
        }
        member[v.index()] = true;
    }
    let mut ways = vec![BigUint::zero(); dag.node_count()];
    let mut covered = BigUint::zero();
    if member[0] {
        ways[0] = BigUint::one();
    }
    for v in dag.nodes() {
        if ways[v.index()].is_zero() {
            continue;
        }
        if dag.is_sink(v) {
            covered += &ways[v.index()];
            continue;
        }
        let here = ways[v.index()].clone();
        for &w in dag.successors(v) {
            if member[w] || dag.is_sink(NodeId::new(w)) {
                ways[w] += &here;
            }
        }
    }
    Ok(BigRational::new(covered.into(), count_paths(dag).into()))
}

/// Path-counting game in bitmask form.
#[derive(Debug, Clone)]
pub struct CoalitionTable {
    /// Non-sink agents; bit `k` of a mask stands for `players[k]`.
    pub players: Vec<NodeId>,
    /// `covered[mask]` counts paths whose non-sink agents lie in `mask`.
    pub covered: Vec<u64>,
    pub total: u64,
}

impl CoalitionTable {
    pub fn new(dag: &Dag) -> Result<CoalitionTable, WeightsError> {
        let players: Vec<NodeId> = dag.non_sinks().collect();
        if players.len() > MAX_PLAYERS {
            return Err(WeightsError::TooManyPlayers { players: players.len(), cap: MAX_PLAYERS });
        }
        let mut bit = vec![0u32; dag.node_count()];
        for (k, v) in players.iter().enumerate() {
            bit[v.index()] = 1 << k;
        }
        let mut covered = vec![0u64; 1 << players.len()];
        let mut stack = vec![(0usize, bit[0])];
        while let Some((v, mask)) = stack.pop() {
            let node = NodeId::new(v);
            if dag.is_sink(node) {
                covered[mask as usize] += 1;
                continue;
            }
            for &w in dag.successors(node) {
                stack.push((w, mask | bit[w]));
            }
        }
        let total = covered.iter().sum();
        // Subset-sum transform: covered[S] = #paths with mask ⊆ S.
        for k in 0..players.len() {
            for mask in 0..covered.len() {
                if mask & (1 << k) != 0 {
                    covered[mask] += covered[mask ^ (1 << k)];
                }
            }
        }
        Ok(CoalitionTable { players, covered, total })
    }

    pub fn value(&self, mask: usize) -> f64 {
        self.covered[mask] as f64 / self.total as f64
    }

    pub fn mask_of(&self, coalition: &[NodeId]) -> Option<usize> {
        coalition.iter().try_fold(0usize, |acc, v| {
            self.players.iter().position(|p| p == v).map(|k| acc | 1 << k)
        })
    }

    pub fn members(&self, mask: usize) -> Vec<NodeId> {
        (0..self.players.len()).filter(|k| mask & (1 << k) != 0).map(|k| self.players[k]).collect()
    }
}

/// Exact Shapley value of the path-counting game from all coalitions.
pub fn shapley_bruteforce_exact(dag: &Dag) -> Result<Vec<BigRational>, WeightsError> {
    let table = CoalitionTable::new(dag)?;
    let m = table.players.len();
    let factorial: Vec<u128> = (0..=m).scan(1u128, |f, k| {
        if k > 0 {
            *f *= k as u128;
        }
        Some(*f)
    }).collect();
    let mut out = vec![BigRational::zero(); dag.node_count()];
    for (k, player) in table.players.iter().enumerate() {
        let bit = 1usize << k;
        let mut acc: u128 = 0;
        for mask in 0..table.covered.len() {
            if mask & bit != 0 {
                continue;
            }
            let size = mask.count_ones() as usize;
            let gain = (table.covered[mask | bit] - table.covered[mask]) as u128;
            acc += factorial[size] * factorial[m - size - 1] * gain;
        }
        let denom = BigInt::from(factorial[m]) * BigInt::from(table.total);
        out[player.index()] = BigRational::new(BigInt::from(acc), denom);
    }
    Ok(out)
}

pub fn shapley_bruteforce(dag: &Dag) -> Result<WeightVector, WeightsError> {
    Ok(to_weight_vector(&shapley_bruteforce_exact(dag)?))
}

/// Counts indexed by path length, stored from the first non-zero length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LengthSeries {
    offset: usize,
    counts: Vec<BigUint>,
}

impl LengthSeries {
    fn unit() -> Self {
        LengthSeries { offset: 0, counts: vec![BigUint::one()] }
    }

    pub fn get(&self, len: usize) -> BigUint {
        len.checked_sub(self.offset)
            .and_then(|k| self.counts.get(k))
            .cloned()
            .unwrap_or_default()
    }

    /// `(length, count)` pairs with non-zero count.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &BigUint)> {
        self.counts.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(k, c)| (k + self.offset, c))
    }

    pub fn total(&self) -> BigUint {
        self.counts.iter().sum()
    }

    fn add_shifted(&mut self, other: &LengthSeries) {
        if other.counts.is_empty() {
            return;
        }
        let start = other.offset + 1;
        if self.counts.is_empty() {
            self.offset = start;
        } else if start < self.offset {
            let pad = self.offset - start;
            self.counts.splice(0..0, std::iter::repeat_n(BigUint::zero(), pad));
            self.offset = start;
        }
        let base = start - self.offset;
        if self.counts.len() < base + other.counts.len() {
            self.counts.resize(base + other.counts.len(), BigUint::zero());
        }
        for (k, c) in other.counts.iter().enumerate() {
            self.counts[base + k] += c;
        }
    }

    fn convolve(&self, other: &LengthSeries) -> LengthSeries {
        if self.counts.is_empty() || other.counts.is_empty() {
            return LengthSeries::default();
        }
        let mut counts = vec![BigUint::zero(); self.counts.len() + other.counts.len() - 1];
        for (a, x) in self.counts.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (b, y) in other.counts.iter().enumerate() {
                counts[a + b] += x * y;
            }
        }
        LengthSeries { offset: self.offset + other.offset, counts }
    }
}

/// Forward and backward subpath counts by length.
#[derive(Debug, Clone)]
pub struct PathCountTables {
    /// `forward[j]`: subpaths from the source to `j`, by edge count.
    pub forward: Vec<LengthSeries>,
    /// `backward[i]`: subpaths from `i` to any sink, by edge count.
    pub backward: Vec<LengthSeries>,
}

impl PathCountTables {
    pub fn new(dag: &Dag) -> PathCountTables {
        let n = dag.node_count();
        let mut forward = vec![LengthSeries::default(); n];
        forward[0] = LengthSeries::unit();
        for j in 1..n {
            let mut series = LengthSeries::default();
            for &i in dag.predecessors(NodeId::new(j)) {
                series.add_shifted(&forward[i]);
            }
            forward[j] = series;
        }
        let mut backward = vec![LengthSeries::default(); n];
        for i in (0..n).rev() {
            let node = NodeId::new(i);
            if dag.is_sink(node) {
                backward[i] = LengthSeries::unit();
                continue;
            }
            let mut series = LengthSeries::default();
            for &j in dag.successors(node) {
                series.add_shifted(&backward[j]);
            }
            backward[i] = series;
        }
        PathCountTables { forward, backward }
    }

    pub fn f(&self, len: usize, node: NodeId) -> BigUint {
        self.forward[node.index()].get(len)
    }

    pub fn b(&self, len: usize, node: NodeId) -> BigUint {
        self.backward[node.index()].get(len)
    }

    /// Source-sink paths through `node`, by edge count.
    pub fn through(&self, node: NodeId) -> LengthSeries {
        self.forward[node.index()].convolve(&self.backward[node.index()])
    }

    pub fn total_paths(&self) -> BigUint {
        self.backward[0].total()
    }
}

/// `w*` from the counting tables: `w_i = sum_y P(y,i) / y / |P|`.
pub fn wstar_dp_exact(dag: &Dag) -> Vec<BigRational> {
    let tables = PathCountTables::new(dag);
    let through: Vec<Option<LengthSeries>> = (0..dag.node_count())
        .into_par_iter()
        .map(|i| {
            let node = NodeId::new(i);
            (!dag.is_sink(node)).then(|| tables.through(node))
        })
        .collect();
    let common = through
        .iter()
        .flatten()
        .flat_map(|s| s.iter().map(|(y, _)| BigUint::from(y)))
        .fold(BigUint::one(), |acc, y| acc.lcm(&y));
    let denom = BigInt::from(&common * tables.total_paths());
    through
        .par_iter()
        .map(|series| {
            let numer: BigUint = series
                .iter()
                .flat_map(|s| s.iter())
                .map(|(y, count)| count * (&common / BigUint::from(y)))
                .sum();
            BigRational::new(BigInt::from(numer), denom.clone())
        })
        .collect()
}

pub fn wstar_dp(dag: &Dag) -> WeightVector {
    to_weight_vector(&wstar_dp_exact(dag))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Enumerate,
    Shapley,
    Dp,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "enumerate" => Ok(Method::Enumerate),
            "shapley" => Ok(Method::Shapley),
            "dp" => Ok(Method::Dp),
            other => Err(format!("unknown method `{other}` (expected enumerate, shapley or dp)")),
        }
    }
}

/// Exact `w*` by the chosen method.
pub fn wstar_exact(dag: &Dag, method: Method, cap: Option<usize>) -> Result<Vec<BigRational>, WeightsError> {
    match method {
        Method::Enumerate => Ok(wstar_enumerate_exact(dag, cap)?),
        Method::Shapley => shapley_bruteforce_exact(dag),
        Method::Dp => Ok(wstar_dp_exact(dag)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoreViolation {
    pub coalition: Vec<String>,
    pub allocated: f64,
    pub value: f64,
}

/// Every coalition that receives less than its stand-alone value.
pub fn core_check(dag: &Dag, weights: &WeightVector) -> Result<Vec<CoreViolation>, WeightsError> {
    let table = CoalitionTable::new(dag)?;
    let w: Vec<f64> = table.players.iter().map(|&v| weights[v]).collect();
    let mut violations = Vec::new();
    for mask in 0..table.covered.len() {
        let allocated: f64 = (0..w.len()).filter(|k| mask & (1 << k) != 0).map(|k| w[k]).sum();
        let value = table.value(mask);
        if allocated < value - CORE_TOLERANCE {
            violations.push(CoreViolation {
                coalition: table.members(mask).iter().map(|&v| dag.label(v).to_string()).collect(),
                allocated,
                value,
            });
        }
    }
    Ok(violations)
}

/// Core constraints for the given coalitions only; no player cap.
pub fn core_check_sampled(
    dag: &Dag,
    weights: &WeightVector,
    coalitions: &[Vec<NodeId>],
) -> Result<Vec<CoreViolation>, WeightsError> {
    let mut violations = Vec::new();
    for coalition in coalitions {
        let value = path_counting_value(dag, coalition)?.to_f64().expect("finite");
        let allocated: f64 = coalition.iter().map(|&v| weights[v]).sum();
        if allocated < value - CORE_TOLERANCE {
            violations.push(CoreViolation {
                coalition: coalition.iter().map(|&v| dag.label(v).to_string()).collect(),
                allocated,
                value,
            });
        }
    }
    Ok(violations)
}

/// Number of source-sink paths through each node, by enumeration.
pub fn paths_through_enumerated(dag: &Dag, cap: Option<usize>) -> Result<HashMap<NodeId, usize>, GraphError> {
    let mut counts = HashMap::new();
    for path in enumerate_paths(dag, cap)? {
        for &v in path.nodes() {
            *counts.entry(v).or_insert(0) += 1;
        }
    }
    Ok(counts)
}
