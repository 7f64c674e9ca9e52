//! The skeleton of contagious links and its strongly connected components.
//!
//! Skeleton edges keep the stored exposure orientation `creditor -> debtor`;
//! strong connectivity does not depend on the orientation convention.

use crate::asymptotics::contagion_susceptibility;
use crate::cascade::contagious_links;
use crate::configmodel::configuration_match;
use crate::error::{Error, Result};
use crate::generators::NetworkSpec;
use crate::measures::LimitModel;
use crate::network::{DegreeSequence, FinancialNetwork, NodeId};
use crate::rng;
use rayon::prelude::*;
use serde::Serialize;

/// Unweighted directed graph; parallel edges and self-loops are allowed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Digraph {
    adj: Vec<Vec<NodeId>>,
}

impl Digraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for (s, d) in edges {
            for id in [s, d] {
                if id >= n {
                    return Err(Error::NodeOutOfRange { id, n });
                }
            }
            adj[s].push(d);
        }
        Ok(Digraph { adj })
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    pub fn successors(&self, i: NodeId) -> &[NodeId] {
        &self.adj[i]
    }

    pub fn out_degree(&self, i: NodeId) -> usize {
        self.adj[i].len()
    }

    pub fn add_edge(&mut self, s: NodeId, d: NodeId) {
        self.adj[s].push(d);
    }

    /// True if some ordered pair appears more than once.
    pub fn has_parallel_edges(&self) -> bool {
        self.adj.iter().any(|succ| {
            let mut v = succ.clone();
            v.sort_unstable();
            v.windows(2).any(|w| w[0] == w[1])
        })
    }
}

/// Contagious links of `net` as a digraph on all its nodes. The out-degree of
/// node `i` is its number of contagious exposures `c⁺(i)`; links held by
/// fundamental defaults are left out.
pub fn contagious_skeleton(net: &FinancialNetwork) -> Digraph {
    let mut adj = vec![Vec::new(); net.n()];
    for link in contagious_links(net, false) {
        adj[link.creditor].push(link.debtor);
    }
    Digraph { adj }
}

/// Strongly connected components in Tarjan order (reverse topological).
pub fn strongly_connected_components(g: &Digraph) -> Vec<Vec<NodeId>> {
    const UNSEEN: usize = usize::MAX;
    let n = g.n();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;
    let mut call: Vec<(NodeId, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&w) = g.adj[v].get(*pos) {
                *pos += 1;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("component root is on the stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
    }
    comps
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SccResult {
    /// Members in increasing order.
    pub nodes: Vec<NodeId>,
    /// `|nodes| / n`.
    pub fraction: f64,
}

/// The largest strongly connected component; ties go to the component with
/// the smallest node id.
pub fn largest_scc(g: &Digraph) -> SccResult {
    let best = strongly_connected_components(g)
        .into_iter()
        .min_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])))
        .unwrap_or_default();
    let fraction = if g.n() == 0 {
        0.0
    } else {
        best.len() as f64 / g.n() as f64
    };
    SccResult {
        nodes: best,
        fraction,
    }
}

/// `Σ (jk/λ) μ(j,k) p(j,k,1)`; above 1 the contagious skeleton has a giant
/// strongly connected component.
pub fn giant_scc_condition(model: &LimitModel) -> f64 {
    contagion_susceptibility(model)
}

/// The same quantity for a finite network: `Σ_i d⁻(i) c⁺(i) / m`.
pub fn empirical_condition(net: &FinancialNetwork, skeleton: &Digraph) -> f64 {
    let m = net.edge_count();
    if m == 0 {
        return 0.0;
    }
    let s: usize = (0..net.n())
        .map(|i| net.in_degree(i) * skeleton.out_degree(i))
        .sum();
    s as f64 / m as f64
}

/// Degree sequence in which every non-contagious exposure is moved to a new
/// node of degree `(1, 0)`: original node `i` keeps `(c⁺(i), d⁻(i))`, and
/// `m - Σ c⁺` extra nodes follow.
pub fn rewired_sequence(net: &FinancialNetwork) -> DegreeSequence {
    let skeleton = contagious_skeleton(net);
    let n = net.n();
    let contagious = skeleton.edge_count();
    let extra = net.edge_count() - contagious;
    let mut d_plus: Vec<usize> = (0..n).map(|i| skeleton.out_degree(i)).collect();
    let mut d_minus = net.in_degrees().to_vec();
    d_plus.extend(std::iter::repeat_n(1, extra));
    d_minus.extend(std::iter::repeat_n(0, extra));
    DegreeSequence::new(d_plus, d_minus).expect("moved stubs keep the totals equal")
}

/// Largest SCC fraction among the first `n` nodes of a configuration graph on
/// the rewired sequence; the appended `(1, 0)` nodes have no in-stubs and are
/// dropped with their edges.
pub fn rewired_scc_fraction(net: &FinancialNetwork, seed: u64) -> f64 {
    let n = net.n();
    let g = configuration_match(&rewired_sequence(net), seed);
    let edges = g.edges().filter(|&(s, _)| s < n);
    largest_scc(&Digraph::new(n, edges).expect("original ids are in range")).fraction
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SkeletonTrial {
    pub trial: usize,
    /// Largest skeleton SCC fraction.
    pub fraction: f64,
    /// Same statistic on a configuration graph over the rewired sequence.
    pub rewired_fraction: f64,
    /// Empirical `Σ d⁻ c⁺ / m`.
    pub condition: f64,
}

/// Largest skeleton SCC over independent networks. Trial `t` uses seeds
/// derived from `(seed, t)`; results are in trial order.
pub fn skeleton_scc_experiment(spec: &NetworkSpec, trials: usize, seed: u64) -> Result<Vec<SkeletonTrial>> {
    let n = spec.n;
    if n < 100 {
        return Err(Error::InvalidParameter(format!(
            "skeleton experiments need n >= 100, got {n}"
        )));
    }
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = rng::derive_seed(seed, t as u64);
            let net = spec.generate(s)?;
            let skeleton = contagious_skeleton(&net);
            Ok(SkeletonTrial {
                trial: t,
                fraction: largest_scc(&skeleton).fraction,
                rewired_fraction: rewired_scc_fraction(&net, rng::derive_seed(s, 1)),
                condition: empirical_condition(&net, &skeleton),
            })
        })
        .collect()
}
