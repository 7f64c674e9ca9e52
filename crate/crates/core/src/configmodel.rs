//! Configuration-model multigraphs, the sequential half-edge construction
//! that couples matching and cascade, and the counter chain it induces.
//!
//! Half-edges carry global labels `0..m`: out-stubs and in-stubs are each
//! numbered in node order, then by local index.

use crate::cascade::{draw_permutations, ThresholdAssignment};
use crate::error::{Error, Result};
use crate::measures::LimitModel;
use crate::network::{build_network, DegreeSequence, FinancialNetwork, NodeId};
use crate::rng::{self, tag, StreamRng};
use rayon::prelude::*;
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

fn prefix_starts(degrees: &[usize]) -> Vec<usize> {
    let mut starts = Vec::with_capacity(degrees.len() + 1);
    let mut acc = 0;
    starts.push(0);
    for &d in degrees {
        acc += d;
        starts.push(acc);
    }
    starts
}

fn owners(degrees: &[usize]) -> Vec<NodeId> {
    degrees
        .iter()
        .enumerate()
        .flat_map(|(i, &d)| std::iter::repeat_n(i, d))
        .collect()
}

/// A perfect matching of out-stubs to in-stubs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Multigraph {
    degrees: DegreeSequence,
    /// `matching[out_label] = in_label`.
    matching: Vec<usize>,
    out_start: Vec<usize>,
    in_owner: Vec<NodeId>,
}

impl Multigraph {
    /// Wraps a matching after checking it is a bijection on `0..m`.
    pub fn from_matching(degrees: DegreeSequence, matching: Vec<usize>) -> Result<Self> {
        let m = degrees.edge_count();
        if matching.len() != m {
            return Err(Error::LengthMismatch(matching.len(), m));
        }
        let mut seen = vec![false; m];
        for &l in &matching {
            if l >= m || std::mem::replace(&mut seen[l], true) {
                return Err(Error::InvalidParameter(format!(
                    "in-stub label {l} is out of range or matched twice"
                )));
            }
        }
        Ok(Self::assemble(degrees, matching))
    }

    fn assemble(degrees: DegreeSequence, matching: Vec<usize>) -> Self {
        let out_start = prefix_starts(degrees.out_degrees());
        let in_owner = owners(degrees.in_degrees());
        Multigraph {
            degrees,
            matching,
            out_start,
            in_owner,
        }
    }

    pub fn degrees(&self) -> &DegreeSequence {
        &self.degrees
    }

    pub fn matching(&self) -> &[usize] {
        &self.matching
    }

    pub fn n(&self) -> usize {
        self.degrees.n()
    }

    pub fn edge_count(&self) -> usize {
        self.matching.len()
    }

    /// Out-neighbours of `i`, one per out-stub in local order.
    pub fn out_neighbors(&self, i: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.matching[self.out_start[i]..self.out_start[i + 1]]
            .iter()
            .map(|&l| self.in_owner[l])
    }

    /// `(src, dst)` for every out-stub in label order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.n()).flat_map(move |i| self.out_neighbors(i).map(move |d| (i, d)))
    }

    /// Edge multiset as `(src, dst) -> multiplicity`.
    pub fn multiplicities(&self) -> BTreeMap<(NodeId, NodeId), usize> {
        let mut out = BTreeMap::new();
        for e in self.edges() {
            *out.entry(e).or_insert(0) += 1;
        }
        out
    }
}

/// Uniform random matching of out-stubs to in-stubs.
pub fn configuration_match(degrees: &DegreeSequence, seed: u64) -> Multigraph {
    let mut r = rng::stream(seed, tag::CONFIGURATION);
    let matching = rng::permutation(&mut r, degrees.edge_count());
    Multigraph::assemble(degrees.clone(), matching)
}

/// No self-loop and no repeated ordered pair.
pub fn is_simple(g: &Multigraph) -> bool {
    let mut seen = std::collections::HashSet::with_capacity(g.edge_count());
    g.edges().all(|(s, d)| s != d && seen.insert((s, d)))
}

/// Fraction of `trials` independent matchings that are simple.
pub fn simplicity_rate(degrees: &DegreeSequence, trials: usize, seed: u64) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    let simple = (0..trials as u64)
        .into_par_iter()
        .filter(|&t| is_simple(&configuration_match(degrees, rng::derive_seed(seed, t))))
        .count();
    simple as f64 / trials as f64
}

fn check_weights(degrees: &DegreeSequence, weights: &[Vec<f64>]) -> Result<()> {
    if weights.len() != degrees.n() {
        return Err(Error::LengthMismatch(weights.len(), degrees.n()));
    }
    for (i, w) in weights.iter().enumerate() {
        if w.len() != degrees.out_degree(i) {
            return Err(Error::WeightCount {
                node: i,
                expected: degrees.out_degree(i),
                got: w.len(),
            });
        }
        if let Some(&bad) = w.iter().find(|&&x| !(x.is_finite() && x > 0.0)) {
            return Err(Error::InvalidWeight {
                src: i,
                dst: i,
                weight: bad,
            });
        }
    }
    Ok(())
}

/// Attaches node `i`'s weights to its out-stubs in local label order.
pub fn weighted_overlay(
    g: &Multigraph,
    weights: &[Vec<f64>],
    gammas: Vec<f64>,
    recovery: f64,
) -> Result<FinancialNetwork> {
    check_weights(g.degrees(), weights)?;
    let edges: Vec<_> = (0..g.n())
        .flat_map(|i| {
            g.out_neighbors(i)
                .zip(&weights[i])
                .map(move |(d, &w)| (i, d, w))
        })
        .collect();
    build_network(&edges, gammas, recovery, true)
}

/// Black in-stubs of defaulted nodes, as contiguous label ranges keyed by
/// their lowest remaining label.
#[derive(Default)]
struct InStubQueue {
    heap: BinaryHeap<Reverse<(usize, usize)>>,
    len: usize,
}

impl InStubQueue {
    fn push_range(&mut self, start: usize, end: usize) {
        if start < end {
            self.heap.push(Reverse((start, end)));
            self.len += end - start;
        }
    }

    fn pop_lowest(&mut self) -> Option<usize> {
        let Reverse((lab, end)) = self.heap.pop()?;
        self.push_range(lab + 1, end);
        self.len -= end - lab;
        Some(lab)
    }
}

/// Black out-stubs as node tokens; removing a uniform token picks a node
/// with probability proportional to its black out-stub count.
struct OutStubPool {
    tokens: Vec<NodeId>,
}

impl OutStubPool {
    fn new(out_degrees: &[usize]) -> Self {
        OutStubPool {
            tokens: owners(out_degrees),
        }
    }

    fn draw(&mut self, r: &mut StreamRng) -> NodeId {
        let idx = rng::uniform_index(r, self.tokens.len());
        self.tokens.swap_remove(idx)
    }
}

/// State of the sequential construction once the cascade has stopped.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfEdgeProcess {
    /// Order in which each node reveals its exposures.
    pub permutations: Vec<Vec<usize>>,
    /// Red out-stubs per node.
    pub revealed: Vec<usize>,
    /// Cumulative loss per node from revealed exposures to defaulted nodes.
    pub loss: Vec<f64>,
    pub capital: Vec<f64>,
    /// Step at which each node joined the default set (0 for initial defaults).
    pub default_step: Vec<Option<usize>>,
    /// Number of matching steps taken by the cascade, equal to the number of
    /// red half-edges of each orientation.
    pub steps: usize,
    /// `(out_label, in_label)` pairs in the order they were revealed.
    pub revealed_pairs: Vec<(usize, usize)>,
}

impl HalfEdgeProcess {
    pub fn default_set(&self) -> Vec<NodeId> {
        (0..self.default_step.len())
            .filter(|&i| self.default_step[i].is_some())
            .collect()
    }

    /// Capital left to node `i`; negative exactly for contagious defaults.
    pub fn remaining_capital(&self, i: NodeId) -> f64 {
        self.capital[i] - self.loss[i]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequentialOutcome {
    pub graph: Multigraph,
    pub final_set: Vec<NodeId>,
    pub process: HalfEdgeProcess,
}

/// Builds a configuration multigraph and its default cascade together.
///
/// Every node draws an ordering of its weights from the `permutations`
/// stream of `seed`. Starting from the zero-capital nodes, the lowest black
/// in-stub of the default set is matched to a uniformly chosen black
/// out-stub; the owner reveals its next weight, loses `(1 - R) w` if still
/// solvent, and defaults once capital is strictly below its loss. When no
/// defaulted in-stub is left the remaining in-stubs are matched in increasing
/// label order the same way.
pub fn sequential_cascade(
    degrees: &DegreeSequence,
    weights: &[Vec<f64>],
    gammas: &[f64],
    recovery: f64,
    seed: u64,
) -> Result<SequentialOutcome> {
    check_weights(degrees, weights)?;
    let n = degrees.n();
    if gammas.len() != n {
        return Err(Error::LengthMismatch(gammas.len(), n));
    }
    if !(0.0..1.0).contains(&recovery) {
        return Err(Error::InvalidRecovery(recovery));
    }
    if let Some((node, &value)) = gammas.iter().enumerate().find(|(_, g)| !(g.is_finite() && **g >= 0.0)) {
        return Err(Error::InvalidGamma { node, value });
    }
    let m = degrees.edge_count();
    let out_start = prefix_starts(degrees.out_degrees());
    let in_start = prefix_starts(degrees.in_degrees());
    let permutations = draw_permutations(degrees.out_degrees(), seed);
    let capital: Vec<f64> = (0..n)
        .map(|i| gammas[i] * weights[i].iter().sum::<f64>())
        .collect();

    let mut r = rng::stream(seed, tag::MATCHING);
    let mut pool = OutStubPool::new(degrees.out_degrees());
    let mut queue = InStubQueue::default();
    let mut default_step = vec![None; n];
    for i in 0..n {
        if gammas[i] == 0.0 {
            default_step[i] = Some(0);
            queue.push_range(in_start[i], in_start[i + 1]);
        }
    }
    let mut matching = vec![usize::MAX; m];
    let mut revealed = vec![0usize; n];
    let mut loss = vec![0.0f64; n];
    let mut revealed_pairs = Vec::new();

    while let Some(in_label) = queue.pop_lowest() {
        let partner = pool.draw(&mut r);
        let local = permutations[partner][revealed[partner]];
        revealed[partner] += 1;
        let out_label = out_start[partner] + local;
        matching[out_label] = in_label;
        revealed_pairs.push((out_label, in_label));
        if default_step[partner].is_none() {
            loss[partner] += (1.0 - recovery) * weights[partner][local];
            if capital[partner] < loss[partner] {
                default_step[partner] = Some(revealed_pairs.len());
                queue.push_range(in_start[partner], in_start[partner + 1]);
            }
        }
    }
    let steps = revealed_pairs.len();

    let mut completion = revealed.clone();
    for i in 0..n {
        if default_step[i].is_some() {
            continue;
        }
        for in_label in in_start[i]..in_start[i + 1] {
            let partner = pool.draw(&mut r);
            let local = permutations[partner][completion[partner]];
            completion[partner] += 1;
            matching[out_start[partner] + local] = in_label;
        }
    }

    let final_set = (0..n).filter(|&i| default_step[i].is_some()).collect();
    Ok(SequentialOutcome {
        graph: Multigraph::assemble(degrees.clone(), matching),
        final_set,
        process: HalfEdgeProcess {
            permutations,
            revealed,
            loss,
            capital,
            default_step,
            steps,
            revealed_pairs,
        },
    })
}

/// A tracked counter `S^{j,k,θ,l}`: solvent nodes with degrees `(j, k)`,
/// threshold `θ` and `l` defaulted counterparties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CounterClass {
    pub j: usize,
    pub k: usize,
    pub theta: usize,
    pub l: usize,
}

/// Counter trajectory of the cascade chain, one row per step.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovTrajectory {
    pub n: usize,
    pub m: usize,
    /// Column order of `s`.
    pub classes: Vec<CounterClass>,
    /// `s[t][c]` is the counter of `classes[c]` after `t` steps.
    pub s: Vec<Vec<u32>>,
    /// Defaulted nodes after `t` steps.
    pub d: Vec<usize>,
    /// In-stubs of defaulted nodes still black after `t` steps; negative
    /// only past `t_n`.
    pub d_minus: Vec<i64>,
    /// Number of nodes per `(j, k, θ)` with `θ ≤ j`.
    pub class_counts: BTreeMap<(usize, usize, usize), usize>,
    /// First step at which no defaulted in-stub is black (capped at `m`).
    pub t_n: usize,
}

impl MarkovTrajectory {
    pub fn steps(&self) -> usize {
        self.d.len() - 1
    }

    /// Defaulted nodes of class `(j, k, θ)` after `t` steps, from the counters.
    pub fn defaulted_in_class(&self, t: usize, j: usize, k: usize, theta: usize) -> usize {
        let total = self.class_counts.get(&(j, k, theta)).copied().unwrap_or(0);
        let solvent: u32 = self
            .classes
            .iter()
            .zip(&self.s[t])
            .filter(|(c, _)| (c.j, c.k, c.theta) == (j, k, theta))
            .map(|(_, &v)| v)
            .sum();
        total - solvent as usize
    }

    /// `sup_{t ≤ t_n} |S^{j,k,θ,l}(t) / n - s^{j,k,θ,l}(t / n)|` over every
    /// counter tracked here or carrying mass in `model`. Steps with
    /// `t / n ≥ λ` are skipped.
    pub fn sup_deviation(&self, model: &LimitModel) -> f64 {
        let mut columns: BTreeMap<CounterClass, Option<usize>> = self
            .classes
            .iter()
            .enumerate()
            .map(|(c, &cls)| (cls, Some(c)))
            .collect();
        for c in model.classes() {
            for theta in 1..=c.j {
                if c.p[theta] != 0.0 {
                    for l in 0..theta {
                        columns
                            .entry(CounterClass { j: c.j, k: c.k, theta, l })
                            .or_insert(None);
                    }
                }
            }
        }
        let n = self.n as f64;
        let mut sup: f64 = 0.0;
        for t in 0..=self.t_n.min(self.steps()) {
            let tau = t as f64 / n;
            if tau >= model.lambda() {
                break;
            }
            for (cls, col) in &columns {
                let observed = col.map_or(0.0, |c| self.s[t][c] as f64 / n);
                let limit = crate::asymptotics::ode_solution(model, cls.j, cls.k, cls.theta, cls.l, tau)
                    .expect("indices and time validated");
                sup = sup.max((observed - limit).abs());
            }
        }
        sup
    }
}

/// Runs the unweighted cascade chain for the given thresholds.
///
/// Partner choices come from the `matching` stream of `seed`, exactly as in
/// [`sequential_cascade`], so with thresholds drawn from the same seed the
/// two processes take identical steps. With `continue_past_tn` the chain keeps
/// matching the remaining in-stubs in increasing label order until all `m`
/// out-stubs are red.
pub fn markov_trajectory(
    degrees: &DegreeSequence,
    thresholds: &ThresholdAssignment,
    seed: u64,
    continue_past_tn: bool,
) -> Result<MarkovTrajectory> {
    let n = degrees.n();
    let m = degrees.edge_count();
    if thresholds.theta.len() != n {
        return Err(Error::LengthMismatch(thresholds.theta.len(), n));
    }
    for i in 0..n {
        if thresholds.theta[i] > degrees.out_degree(i) + 1 {
            return Err(Error::InvalidParameter(format!(
                "threshold {} of node {i} exceeds out-degree + 1",
                thresholds.theta[i]
            )));
        }
    }
    let theta = &thresholds.theta;
    let in_start = prefix_starts(degrees.in_degrees());

    let mut class_counts: BTreeMap<(usize, usize, usize), usize> = BTreeMap::new();
    for (i, &th) in theta.iter().enumerate() {
        let (j, k) = (degrees.out_degree(i), degrees.in_degree(i));
        if th <= j {
            *class_counts.entry((j, k, th)).or_default() += 1;
        }
    }
    let mut classes = Vec::new();
    let mut base: BTreeMap<(usize, usize, usize), usize> = BTreeMap::new();
    for &(j, k, th) in class_counts.keys() {
        if th >= 1 {
            base.insert((j, k, th), classes.len());
            classes.extend((0..th).map(|l| CounterClass { j, k, theta: th, l }));
        }
    }
    let column = |i: NodeId| {
        base.get(&(degrees.out_degree(i), degrees.in_degree(i), theta[i]))
            .copied()
    };

    let mut counters = vec![0u32; classes.len()];
    let mut defaulted = vec![false; n];
    let mut queue = InStubQueue::default();
    let mut d = 0usize;
    let mut defaulted_stubs = 0i64;
    for i in 0..n {
        if theta[i] == 0 {
            defaulted[i] = true;
            d += 1;
            defaulted_stubs += degrees.in_degree(i) as i64;
            queue.push_range(in_start[i], in_start[i + 1]);
        } else if let Some(c) = column(i) {
            counters[c] += 1;
        }
    }

    let mut s = vec![counters.clone()];
    let mut d_series = vec![d];
    let mut dm_series = vec![defaulted_stubs];
    let mut r = rng::stream(seed, tag::MATCHING);
    let mut pool = OutStubPool::new(degrees.out_degrees());
    let mut red = vec![0usize; n];
    let mut t_n = None;
    if queue.len == 0 {
        t_n = Some(0);
    }
    let mut leftover = Vec::new();
    let mut leftover_pos = 0;
    let mut t = 0usize;
    while t < m {
        if t_n.is_none() && queue.len == 0 {
            t_n = Some(t);
        }
        if t_n.is_some() {
            if !continue_past_tn {
                break;
            }
            if leftover.is_empty() {
                // In-stubs never queued: owned by nodes solvent at t_n.
                leftover = (0..n)
                    .filter(|&i| !defaulted[i])
                    .flat_map(|i| in_start[i]..in_start[i + 1])
                    .collect();
            }
            if leftover_pos >= leftover.len() {
                break;
            }
            leftover_pos += 1;
        } else {
            queue.pop_lowest();
        }
        let partner = pool.draw(&mut r);
        let l = red[partner];
        red[partner] += 1;
        t += 1;
        if !defaulted[partner] {
            if let Some(c) = column(partner) {
                let th = theta[partner];
                counters[c + l] -= 1;
                if l + 1 < th {
                    counters[c + l + 1] += 1;
                }
            }
            if red[partner] >= theta[partner] {
                defaulted[partner] = true;
                d += 1;
                defaulted_stubs += degrees.in_degree(partner) as i64;
                if t_n.is_none() {
                    queue.push_range(in_start[partner], in_start[partner + 1]);
                }
            }
        }
        s.push(counters.clone());
        d_series.push(d);
        dm_series.push(defaulted_stubs - t as i64);
    }
    let t_n = t_n.unwrap_or(m);
    Ok(MarkovTrajectory {
        n,
        m,
        classes,
        s,
        d: d_series,
        d_minus: dm_series,
        class_counts,
        t_n,
    })
}
