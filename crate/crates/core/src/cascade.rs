//! Round-based default cascade, default thresholds and contagious links.

use crate::error::{Error, Result};
use crate::network::{FinancialNetwork, NodeId};
use crate::rng::{self, tag};

const NEVER: u32 = u32::MAX;

/// Outcome of a cascade: the round in which each node entered the default set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CascadeResult {
    round_of: Vec<u32>,
    round_sizes: Vec<usize>,
}

impl CascadeResult {
    /// Number of nodes.
    pub fn n(&self) -> usize {
        self.round_of.len()
    }

    /// First `k` with `D_k = D_{k+1}`.
    pub fn rounds_used(&self) -> usize {
        self.round_sizes.len() - 1
    }

    /// `|D_0|, |D_1|, ..., |D_final|`.
    pub fn round_sizes(&self) -> &[usize] {
        &self.round_sizes
    }

    /// The round in which `i` defaulted, if it did.
    pub fn default_round(&self, i: NodeId) -> Option<usize> {
        let r = self.round_of[i];
        (r != NEVER).then_some(r as usize)
    }

    pub fn is_defaulted(&self, i: NodeId) -> bool {
        self.round_of[i] != NEVER
    }

    /// `D_k` in increasing node order; rounds past the fixed point return the final set.
    pub fn set_at(&self, k: usize) -> Vec<NodeId> {
        let k = k.min(u32::MAX as usize - 1) as u32;
        (0..self.n()).filter(|&i| self.round_of[i] <= k).collect()
    }

    pub fn final_set(&self) -> Vec<NodeId> {
        (0..self.n()).filter(|&i| self.is_defaulted(i)).collect()
    }

    pub fn final_size(&self) -> usize {
        *self.round_sizes.last().unwrap_or(&0)
    }

    /// Fraction of defaults `|D_final| / n`; zero on an empty network.
    pub fn fraction(&self) -> f64 {
        if self.n() == 0 {
            0.0
        } else {
            self.final_size() as f64 / self.n() as f64
        }
    }
}

/// Runs the cascade started by the nodes with zero capital ratio.
///
/// Losses from every defaulted counterparty accumulate; a node defaults once
/// its capital is strictly below its cumulative loss.
pub fn run_cascade(net: &FinancialNetwork) -> CascadeResult {
    let n = net.n();
    let creditors = net.creditors();
    let mut round_of = vec![NEVER; n];
    let mut loss = vec![0.0f64; n];
    let mut frontier: Vec<NodeId> = (0..n).filter(|&i| net.is_fundamental_default(i)).collect();
    for &i in &frontier {
        round_of[i] = 0;
    }
    let mut round_sizes = vec![frontier.len()];
    let mut total = frontier.len();
    let mut round = 0u32;
    while !frontier.is_empty() {
        round += 1;
        let mut touched = Vec::new();
        for &j in &frontier {
            for &(i, idx) in &creditors[j] {
                if round_of[i] == NEVER {
                    loss[i] += net.loss_on(i, idx);
                    touched.push(i);
                }
            }
        }
        touched.sort_unstable();
        touched.dedup();
        frontier = touched
            .into_iter()
            .filter(|&i| net.capital(i) < loss[i])
            .collect();
        for &i in &frontier {
            round_of[i] = round;
        }
        if frontier.is_empty() {
            break;
        }
        total += frontier.len();
        round_sizes.push(total);
    }
    CascadeResult {
        round_of,
        round_sizes,
    }
}

fn check_permutation(node: NodeId, len: usize, perm: &[usize]) -> Result<()> {
    if perm.len() != len {
        return Err(Error::InvalidPermutation {
            node,
            reason: format!("length {} but out-degree {}", perm.len(), len),
        });
    }
    let mut seen = vec![false; len];
    for &p in perm {
        if p >= len || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidPermutation {
                node,
                reason: format!("index {p} out of range or repeated"),
            });
        }
    }
    Ok(())
}

/// Number of counterparty defaults, taken in the order `perm`, that node `i`
/// survives before becoming insolvent.
///
/// Returns 0 for a fundamental default and `d⁺(i) + 1` when the node survives
/// the default of all its counterparties.
pub fn default_threshold(net: &FinancialNetwork, i: NodeId, perm: &[usize]) -> Result<usize> {
    let d = net.out_degree(i);
    check_permutation(i, d, perm)?;
    Ok(threshold_unchecked(net, i, perm))
}

pub(crate) fn threshold_unchecked(net: &FinancialNetwork, i: NodeId, perm: &[usize]) -> usize {
    if net.is_fundamental_default(i) {
        return 0;
    }
    let c = net.capital(i);
    let mut loss = 0.0;
    for (k, &idx) in perm.iter().enumerate() {
        loss += net.loss_on(i, idx);
        if c < loss {
            return k + 1;
        }
    }
    perm.len() + 1
}

/// Per-node thresholds together with the orderings that produced them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThresholdAssignment {
    pub theta: Vec<usize>,
    pub permutations: Vec<Vec<usize>>,
}

impl ThresholdAssignment {
    /// Thresholds for given orderings.
    pub fn from_permutations(net: &FinancialNetwork, permutations: Vec<Vec<usize>>) -> Result<Self> {
        if permutations.len() != net.n() {
            return Err(Error::LengthMismatch(permutations.len(), net.n()));
        }
        let theta = permutations
            .iter()
            .enumerate()
            .map(|(i, p)| default_threshold(net, i, p))
            .collect::<Result<_>>()?;
        Ok(ThresholdAssignment { theta, permutations })
    }

    pub fn is_sentinel(&self, i: NodeId) -> bool {
        self.theta[i] == self.permutations[i].len() + 1
    }
}

/// Draws one uniform ordering per node, node by node, from the
/// `permutations` stream of `seed`.
pub fn draw_permutations(out_degrees: &[usize], seed: u64) -> Vec<Vec<usize>> {
    let mut r = rng::stream(seed, tag::PERMUTATIONS);
    out_degrees
        .iter()
        .map(|&d| rng::permutation(&mut r, d))
        .collect()
}

/// Uniform random orderings and the thresholds they induce.
pub fn assign_thresholds(net: &FinancialNetwork, seed: u64) -> ThresholdAssignment {
    let permutations = draw_permutations(&net.out_degrees(), seed);
    let theta = permutations
        .iter()
        .enumerate()
        .map(|(i, p)| threshold_unchecked(net, i, p))
        .collect();
    ThresholdAssignment { theta, permutations }
}

/// A directed link `debtor <- creditor`: the creditor holds the exposure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    pub creditor: NodeId,
    pub debtor: NodeId,
}

/// Exposures larger than the exposed node's capital.
///
/// Links held by fundamental defaults are omitted unless `include_seed_links`
/// is set. The result is in node order, then exposure order.
pub fn contagious_links(net: &FinancialNetwork, include_seed_links: bool) -> Vec<Link> {
    (0..net.n())
        .filter(|&i| include_seed_links || !net.is_fundamental_default(i))
        .flat_map(|i| {
            let c = net.capital(i);
            net.exposures(i)
                .iter()
                .enumerate()
                .filter(move |&(idx, _)| net.loss_on(i, idx) > c)
                .map(move |(_, e)| Link {
                    creditor: i,
                    debtor: e.counterparty,
                })
        })
        .collect()
}
