//! Weighted directed exposure networks and degree sequences.
//!
//! An edge `i -> j` with weight `e(i, j)` records that institution `i` holds
//! an exposure to `j`: if `j` defaults, `i` loses `(1 - R) e(i, j)`. Contagion
//! therefore travels against the stored edge direction.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exposure {
    pub counterparty: NodeId,
    pub weight: f64,
}

/// Exposures, capital ratios and a global recovery rate.
///
/// Each node's exposure list keeps its input order; permutations over a
/// node's counterparties are index permutations of that list.
#[derive(Clone, Debug, PartialEq)]
pub struct FinancialNetwork {
    exposures: Vec<Vec<Exposure>>,
    gamma: Vec<f64>,
    recovery: f64,
    multigraph: bool,
    in_degree: Vec<usize>,
    assets: Vec<f64>,
    edge_count: usize,
}

/// Validates and assembles a network. The node count is `gammas.len()`.
///
/// Self-exposures are rejected unless `multigraph` is set; configuration-model
/// realisations may contain them and they never transmit losses (a node is
/// only exposed to itself once it has already defaulted).
pub fn build_network(
    edges: &[(NodeId, NodeId, f64)],
    gammas: Vec<f64>,
    recovery: f64,
    multigraph: bool,
) -> Result<FinancialNetwork> {
    let n = gammas.len();
    if !(0.0..1.0).contains(&recovery) {
        return Err(Error::InvalidRecovery(recovery));
    }
    for (node, &g) in gammas.iter().enumerate() {
        if !g.is_finite() || g < 0.0 {
            return Err(Error::InvalidGamma { node, value: g });
        }
    }
    let mut exposures = vec![Vec::new(); n];
    let mut seen = HashSet::new();
    for &(src, dst, weight) in edges {
        for id in [src, dst] {
            if id >= n {
                return Err(Error::NodeOutOfRange { id, n });
            }
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidWeight { src, dst, weight });
        }
        if !multigraph {
            if src == dst {
                return Err(Error::SelfLoop(src));
            }
            if !seen.insert((src, dst)) {
                return Err(Error::DuplicateEdge(src, dst));
            }
        }
        exposures[src].push(Exposure {
            counterparty: dst,
            weight,
        });
    }
    Ok(FinancialNetwork::assemble(exposures, gammas, recovery, multigraph))
}

impl FinancialNetwork {
    fn assemble(
        exposures: Vec<Vec<Exposure>>,
        gamma: Vec<f64>,
        recovery: f64,
        multigraph: bool,
    ) -> Self {
        let n = gamma.len();
        let mut in_degree = vec![0; n];
        let mut edge_count = 0;
        let assets = exposures
            .iter()
            .map(|list| {
                edge_count += list.len();
                list.iter().map(|e| {
                    in_degree[e.counterparty] += 1;
                    e.weight
                })
                .sum()
            })
            .collect();
        FinancialNetwork {
            exposures,
            gamma,
            recovery,
            multigraph,
            in_degree,
            assets,
            edge_count,
        }
    }

    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    /// Total number of exposures `m`.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn recovery(&self) -> f64 {
        self.recovery
    }

    pub fn is_multigraph(&self) -> bool {
        self.multigraph
    }

    pub fn exposures(&self, i: NodeId) -> &[Exposure] {
        &self.exposures[i]
    }

    pub fn out_degree(&self, i: NodeId) -> usize {
        self.exposures[i].len()
    }

    pub fn in_degree(&self, i: NodeId) -> usize {
        self.in_degree[i]
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        self.exposures.iter().map(Vec::len).collect()
    }

    pub fn in_degrees(&self) -> &[usize] {
        &self.in_degree
    }

    pub fn gamma(&self, i: NodeId) -> f64 {
        self.gamma[i]
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gamma
    }

    /// Interbank assets `A(i)`.
    pub fn assets(&self, i: NodeId) -> f64 {
        self.assets[i]
    }

    /// Capital `c(i) = gamma(i) A(i)`; zero when the node holds no exposures.
    pub fn capital(&self, i: NodeId) -> f64 {
        self.gamma[i] * self.assets[i]
    }

    /// Loss suffered by `i` when the counterparty behind its `idx`-th
    /// exposure defaults. Every loss computation in the crate goes through
    /// here so that the same operands are rounded the same way.
    #[inline]
    pub fn loss_on(&self, i: NodeId, idx: usize) -> f64 {
        (1.0 - self.recovery) * self.exposures[i][idx].weight
    }

    pub fn is_fundamental_default(&self, i: NodeId) -> bool {
        self.gamma[i] == 0.0
    }

    /// Edges `(src, dst, weight)` in node order, then exposure order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.exposures.iter().enumerate().flat_map(|(i, list)| {
            list.iter().map(move |e| (i, e.counterparty, e.weight))
        })
    }

    pub fn degree_sequence(&self) -> DegreeSequence {
        DegreeSequence {
            d_plus: self.out_degrees(),
            d_minus: self.in_degree.clone(),
        }
    }

    /// For each node `j`, the creditors exposed to it as `(i, exposure index)`.
    pub fn creditors(&self) -> Vec<Vec<(NodeId, usize)>> {
        let mut out = vec![Vec::new(); self.n()];
        for (i, list) in self.exposures.iter().enumerate() {
            for (idx, e) in list.iter().enumerate() {
                out[e.counterparty].push((i, idx));
            }
        }
        out
    }

    /// Same exposures with new capital ratios.
    pub fn with_gammas(&self, gammas: Vec<f64>) -> Result<Self> {
        if gammas.len() != self.n() {
            return Err(Error::LengthMismatch(gammas.len(), self.n()));
        }
        for (node, &g) in gammas.iter().enumerate() {
            if !g.is_finite() || g < 0.0 {
                return Err(Error::InvalidGamma { node, value: g });
            }
        }
        let mut out = self.clone();
        out.gamma = gammas;
        Ok(out)
    }

    /// Same graph with every exposure replaced by `weight`.
    pub fn with_uniform_weights(&self, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidWeight {
                src: 0,
                dst: 0,
                weight,
            });
        }
        let exposures = self
            .exposures
            .iter()
            .map(|l| {
                l.iter()
                    .map(|e| Exposure {
                        counterparty: e.counterparty,
                        weight,
                    })
                    .collect()
            })
            .collect();
        Ok(Self::assemble(
            exposures,
            self.gamma.clone(),
            self.recovery,
            self.multigraph,
        ))
    }
}

/// Out- and in-degree sequences with equal totals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeSequence {
    d_plus: Vec<usize>,
    d_minus: Vec<usize>,
}

impl DegreeSequence {
    pub fn new(d_plus: Vec<usize>, d_minus: Vec<usize>) -> Result<Self> {
        if d_plus.len() != d_minus.len() {
            return Err(Error::LengthMismatch(d_plus.len(), d_minus.len()));
        }
        let out_stubs: usize = d_plus.iter().sum();
        let in_stubs: usize = d_minus.iter().sum();
        if out_stubs != in_stubs {
            return Err(Error::Unbalanced {
                out_stubs,
                in_stubs,
            });
        }
        Ok(DegreeSequence { d_plus, d_minus })
    }

    pub fn n(&self) -> usize {
        self.d_plus.len()
    }

    pub fn edge_count(&self) -> usize {
        self.d_plus.iter().sum()
    }

    pub fn out_degree(&self, i: NodeId) -> usize {
        self.d_plus[i]
    }

    pub fn in_degree(&self, i: NodeId) -> usize {
        self.d_minus[i]
    }

    pub fn out_degrees(&self) -> &[usize] {
        &self.d_plus
    }

    pub fn in_degrees(&self) -> &[usize] {
        &self.d_minus
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_cycle(gammas: Vec<f64>) -> FinancialNetwork {
        build_network(
            &[(0, 1, 10.0), (1, 2, 10.0), (2, 0, 10.0)],
            gammas,
            0.0,
            false,
        )
        .unwrap()
    }

    #[test]
    fn empty_exposure_node() {
        let net = build_network(&[], vec![0.1], 0.0, false).unwrap();
        assert_eq!(net.n(), 1);
        assert_eq!(net.edge_count(), 0);
        assert_eq!(net.assets(0), 0.0);
        assert_eq!(net.capital(0), 0.0);
    }

    #[test]
    fn three_cycle_capital() {
        let net = three_cycle(vec![0.0, 0.5, 0.5]);
        for i in 0..3 {
            assert_eq!(net.assets(i), 10.0);
            assert_eq!(net.out_degree(i), 1);
            assert_eq!(net.in_degree(i), 1);
        }
        assert_eq!(
            (0..3).map(|i| net.capital(i)).collect::<Vec<_>>(),
            vec![0.0, 5.0, 5.0]
        );
    }

    #[test]
    fn rejects_invalid_input() {
        let g = vec![0.1, 0.1];
        assert!(matches!(
            build_network(&[(0, 1, 1.0), (0, 1, 2.0)], g.clone(), 0.0, false),
            Err(Error::DuplicateEdge(0, 1))
        ));
        assert!(build_network(&[(0, 1, 1.0), (0, 1, 2.0)], g.clone(), 0.0, true).is_ok());
        assert!(matches!(
            build_network(&[(1, 1, 1.0)], g.clone(), 0.0, false),
            Err(Error::SelfLoop(1))
        ));
        assert!(matches!(
            build_network(&[(0, 1, 0.0)], g.clone(), 0.0, false),
            Err(Error::InvalidWeight { .. })
        ));
        assert!(matches!(
            build_network(&[(0, 1, -3.0)], g.clone(), 0.0, false),
            Err(Error::InvalidWeight { .. })
        ));
        assert!(matches!(
            build_network(&[(0, 2, 1.0)], g.clone(), 0.0, false),
            Err(Error::NodeOutOfRange { id: 2, n: 2 })
        ));
        assert!(matches!(
            build_network(&[], vec![0.1, -0.2], 0.0, false),
            Err(Error::InvalidGamma { node: 1, .. })
        ));
        assert!(matches!(
            build_network(&[], g, 1.0, false),
            Err(Error::InvalidRecovery(_))
        ));
    }

    #[test]
    fn preserves_exposure_order() {
        let net = build_network(
            &[(0, 2, 3.0), (0, 1, 1.0), (0, 3, 2.0)],
            vec![0.2; 4],
            0.0,
            false,
        )
        .unwrap();
        let order: Vec<_> = net.exposures(0).iter().map(|e| e.counterparty).collect();
        assert_eq!(order, vec![2, 1, 3]);
    }

    #[test]
    fn degree_sequence_balance() {
        assert!(DegreeSequence::new(vec![1, 2], vec![2, 1]).is_ok());
        assert!(matches!(
            DegreeSequence::new(vec![1, 2], vec![2, 2]),
            Err(Error::Unbalanced { .. })
        ));
        assert!(matches!(
            DegreeSequence::new(vec![1], vec![0, 1]),
            Err(Error::LengthMismatch(1, 2))
        ));
    }
}
