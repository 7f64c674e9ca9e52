//! Empirical degree/threshold statistics of a network and the limit model
//! they approximate.

use crate::cascade::threshold_unchecked;
use crate::error::{Error, Result};
use crate::network::{FinancialNetwork, NodeId};
use crate::rng::{self, tag};
use crate::stats::compensated_sum;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Largest out-degree whose threshold law is computed exactly.
pub const EXACT_DEGREE_LIMIT: usize = 8;

/// Default number of sampled orderings per node above [`EXACT_DEGREE_LIMIT`].
pub const DEFAULT_PERM_BUDGET: usize = 200;

/// Degree and threshold statistics of one network.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasures {
    pub n: usize,
    pub m: usize,
    /// Fraction of nodes in each degree class `(j, k) = (d⁺, d⁻)`.
    pub mu: BTreeMap<(usize, usize), f64>,
    /// Mean degree `m / n`.
    pub lambda: f64,
    /// Conditional threshold law within a class; zero entries are omitted.
    pub p_table: BTreeMap<(usize, usize, usize), f64>,
    pub second_moment: f64,
}

impl EmpiricalMeasures {
    pub fn p(&self, j: usize, k: usize, theta: usize) -> f64 {
        self.p_table.get(&(j, k, theta)).copied().unwrap_or(0.0)
    }

    /// The measures read as a limit model.
    pub fn to_model(&self) -> Result<LimitModel> {
        LimitModel::new(
            self.mu.iter().map(|(&c, &v)| (c, v)),
            self.p_table.iter().map(|(&c, &v)| (c, v)),
        )
    }
}

/// Threshold distribution of node `i` over uniformly random orderings of its
/// exposures, indexed by `theta` in `0..=d⁺(i)` (sentinel mass dropped).
pub fn node_threshold_law(
    net: &FinancialNetwork,
    i: NodeId,
    perm_budget: usize,
    seed: u64,
) -> Vec<f64> {
    let j = net.out_degree(i);
    let mut law = vec![0.0; j + 1];
    if net.is_fundamental_default(i) {
        law[0] = 1.0;
        return law;
    }
    if j == 0 {
        return law;
    }
    let c = net.capital(i);
    let losses: Vec<f64> = (0..j).map(|idx| net.loss_on(i, idx)).collect();
    let contagious = losses.iter().filter(|&&l| l > c).count();
    law[1] = contagious as f64 / j as f64;
    if contagious == j || j == 1 {
        return law;
    }
    if j <= EXACT_DEGREE_LIMIT {
        subset_law(&losses, c, &mut law);
    } else {
        sampled_law(net, i, &losses, c, perm_budget, seed, &mut law);
    }
    law
}

/// The first `k` entries of a uniform ordering form a uniform `k`-subset, so
/// `P(Θ > k)` is the fraction of `k`-subsets whose total loss stays within
/// capital. Averages over all `j!` orderings exactly.
fn subset_law(losses: &[f64], c: f64, law: &mut [f64]) {
    let j = losses.len();
    let mut survive = vec![0u64; j + 1];
    for mask in 0u32..(1 << j) {
        let total: f64 = (0..j).filter(|b| mask >> b & 1 == 1).map(|b| losses[b]).sum();
        if total <= c {
            survive[mask.count_ones() as usize] += 1;
        }
    }
    let tail = |k: usize| survive[k] as f64 / binomial_count(j, k);
    for (theta, slot) in law.iter_mut().enumerate().skip(2) {
        *slot = tail(theta - 1) - tail(theta);
    }
}

fn binomial_count(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

/// Monte Carlo over orderings whose first entry is not contagious; the
/// contagious-first mass is already exact in `law[1]`.
fn sampled_law(
    net: &FinancialNetwork,
    i: NodeId,
    losses: &[f64],
    c: f64,
    budget: usize,
    seed: u64,
    law: &mut [f64],
) {
    let j = losses.len();
    let safe: Vec<usize> = (0..j).filter(|&b| losses[b] <= c).collect();
    let weight = (1.0 - law[1]) / budget as f64;
    let mut r = rng::indexed_stream(seed, tag::PERM_ESTIMATE, i as u64);
    let mut perm = Vec::with_capacity(j);
    for _ in 0..budget {
        let first = safe[rng::uniform_index(&mut r, safe.len())];
        perm.clear();
        perm.push(first);
        let mut rest: Vec<usize> = (0..j).filter(|&b| b != first).collect();
        rng::shuffle(&mut r, &mut rest);
        perm.extend(rest);
        let theta = threshold_unchecked(net, i, &perm);
        if theta <= j {
            law[theta] += weight;
        }
    }
}

/// Degree classes, mean degree and threshold laws of `net`.
///
/// Thresholds are averaged exactly over all orderings for out-degrees up to
/// [`EXACT_DEGREE_LIMIT`] and over `perm_budget` sampled orderings above it.
/// Sampling uses one stream per node, so the result does not depend on the
/// thread count.
pub fn empirical_measures(
    net: &FinancialNetwork,
    perm_budget: usize,
    seed: u64,
) -> Result<EmpiricalMeasures> {
    if perm_budget == 0 {
        return Err(Error::InvalidParameter("perm_budget must be at least 1".into()));
    }
    let n = net.n();
    if n == 0 {
        return Err(Error::InvalidParameter("network has no nodes".into()));
    }
    let laws: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| node_threshold_law(net, i, perm_budget, seed))
        .collect();

    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut sums: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    let mut second = 0.0;
    for (i, law) in laws.iter().enumerate() {
        let (j, k) = (net.out_degree(i), net.in_degree(i));
        *counts.entry((j, k)).or_default() += 1;
        for (theta, &v) in law.iter().enumerate() {
            if v > 0.0 {
                *sums.entry((j, k, theta)).or_default() += v;
            }
        }
        second += (j * j + k * k) as f64;
    }
    let p_table = sums
        .into_iter()
        .map(|((j, k, t), s)| ((j, k, t), (s / counts[&(j, k)] as f64).min(1.0)))
        .collect();
    let mu = counts
        .into_iter()
        .map(|(c, cnt)| (c, cnt as f64 / n as f64))
        .collect();
    Ok(EmpiricalMeasures {
        n,
        m: net.edge_count(),
        mu,
        lambda: net.edge_count() as f64 / n as f64,
        p_table,
        second_moment: second / n as f64,
    })
}

/// One degree class of a limit model with its dense threshold law.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeClass {
    pub j: usize,
    pub k: usize,
    pub mu: f64,
    /// `p[theta]` for `theta` in `0..=j`.
    pub p: Vec<f64>,
}

/// Limit joint degree law `μ(j, k)` with threshold laws `p(j, k, θ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitModel {
    classes: Vec<DegreeClass>,
    lambda: f64,
}

const MASS_TOL: f64 = 1e-9;
const LAMBDA_TOL: f64 = 1e-12;

impl LimitModel {
    /// Builds and validates a model. Threshold entries not listed are zero.
    pub fn new(
        mu: impl IntoIterator<Item = ((usize, usize), f64)>,
        p: impl IntoIterator<Item = ((usize, usize, usize), f64)>,
    ) -> Result<Self> {
        let mut map: BTreeMap<(usize, usize), DegreeClass> = BTreeMap::new();
        for ((j, k), m) in mu {
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::ProbabilityOutOfRange(m));
            }
            let class = DegreeClass {
                j,
                k,
                mu: m,
                p: vec![0.0; j + 1],
            };
            if map.insert((j, k), class).is_some() {
                return Err(Error::InvalidModel(format!("class ({j}, {k}) listed twice")));
            }
        }
        for ((j, k, theta), v) in p {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ProbabilityOutOfRange(v));
            }
            let class = map.get_mut(&(j, k)).ok_or(Error::UnknownClass(j, k))?;
            if theta > j {
                return Err(Error::InvalidModel(format!(
                    "threshold {theta} exceeds out-degree {j}"
                )));
            }
            class.p[theta] = v;
        }
        let classes: Vec<DegreeClass> = map.into_values().collect();
        Self::validated(classes)
    }

    fn validated(classes: Vec<DegreeClass>) -> Result<Self> {
        let total = compensated_sum(classes.iter().map(|c| c.mu));
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidModel(format!("degree law sums to {total}")));
        }
        for c in &classes {
            let s = compensated_sum(c.p.iter().copied());
            if s > 1.0 + LAMBDA_TOL {
                return Err(Error::InvalidModel(format!(
                    "threshold law of class ({}, {}) has mass {s}",
                    c.j, c.k
                )));
            }
        }
        let lam_out = compensated_sum(classes.iter().map(|c| c.j as f64 * c.mu));
        let lam_in = compensated_sum(classes.iter().map(|c| c.k as f64 * c.mu));
        if lam_out <= 0.0 || lam_in <= 0.0 {
            return Err(Error::ZeroMeanDegree);
        }
        if (lam_out - lam_in).abs() > LAMBDA_TOL * lam_out.max(lam_in) {
            return Err(Error::InvalidModel(format!(
                "mean out-degree {lam_out} differs from mean in-degree {lam_in}"
            )));
        }
        Ok(LimitModel {
            classes,
            lambda: lam_out,
        })
    }

    /// Classes in increasing `(j, k)` order.
    pub fn classes(&self) -> &[DegreeClass] {
        &self.classes
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn class(&self, j: usize, k: usize) -> Option<&DegreeClass> {
        self.classes
            .binary_search_by(|c| (c.j, c.k).cmp(&(j, k)))
            .ok()
            .map(|idx| &self.classes[idx])
    }

    pub fn mu(&self, j: usize, k: usize) -> f64 {
        self.class(j, k).map_or(0.0, |c| c.mu)
    }

    pub fn p(&self, j: usize, k: usize, theta: usize) -> f64 {
        self.class(j, k)
            .and_then(|c| c.p.get(theta).copied())
            .unwrap_or(0.0)
    }

    /// Sparse `(j, k, θ, p)` entries with non-zero probability.
    pub fn p_entries(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.classes.iter().flat_map(|c| {
            c.p.iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(move |(t, &v)| (c.j, c.k, t, v))
        })
    }
}

/// Advisory summary of how degree statistics evolve across network sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    pub sizes: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub second_moments: Vec<f64>,
    /// Sup-norm distance between the degree laws of consecutive sizes.
    pub mu_drift: Vec<f64>,
    pub lambda_drift: Vec<f64>,
    /// Drift between the two largest sizes is no larger than between the two smallest.
    pub mu_stabilizing: bool,
    /// Second moment at the largest size is at most 1.5 times the smallest.
    pub second_moment_bounded: bool,
}

fn sup_distance(a: &BTreeMap<(usize, usize), f64>, b: &BTreeMap<(usize, usize), f64>) -> f64 {
    a.keys()
        .chain(b.keys())
        .map(|key| (a.get(key).unwrap_or(&0.0) - b.get(key).unwrap_or(&0.0)).abs())
        .fold(0.0, f64::max)
}

/// Compares empirical measures across increasing sizes. Advisory only.
pub fn validate_asymptotic_assumptions(seq: &[EmpiricalMeasures]) -> Result<AssumptionReport> {
    if seq.len() < 2 {
        return Err(Error::InvalidParameter(
            "need measures for at least two sizes".into(),
        ));
    }
    let mu_drift: Vec<f64> = seq.windows(2).map(|w| sup_distance(&w[0].mu, &w[1].mu)).collect();
    let lambda_drift = seq.windows(2).map(|w| (w[1].lambda - w[0].lambda).abs()).collect();
    let second_moments: Vec<f64> = seq.iter().map(|m| m.second_moment).collect();
    let first = second_moments[0];
    let last = *second_moments.last().unwrap();
    Ok(AssumptionReport {
        sizes: seq.iter().map(|m| m.n).collect(),
        lambdas: seq.iter().map(|m| m.lambda).collect(),
        mu_stabilizing: mu_drift.last().unwrap() <= &(mu_drift[0] + 1e-12),
        second_moment_bounded: last <= 1.5 * first,
        second_moments,
        mu_drift,
        lambda_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::default_threshold;
    use crate::network::build_network;

    fn heap_permutations(n: usize) -> Vec<Vec<usize>> {
        fn rec(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if k <= 1 {
                out.push(a.clone());
                return;
            }
            for i in 0..k {
                rec(k - 1, a, out);
                if k.is_multiple_of(2) {
                    a.swap(i, k - 1);
                } else {
                    a.swap(0, k - 1);
                }
            }
        }
        let mut out = Vec::new();
        rec(n, &mut (0..n).collect(), &mut out);
        out
    }

    fn star(weights: &[f64], gamma: f64) -> FinancialNetwork {
        let edges: Vec<_> = weights.iter().enumerate().map(|(b, &w)| (0, b + 1, w)).collect();
        let mut g = vec![1.0; weights.len() + 1];
        g[0] = gamma;
        build_network(&edges, g, 0.0, false).unwrap()
    }

    #[test]
    fn three_cycle_measures() {
        let net =
            build_network(&[(0, 1, 10.0), (1, 2, 10.0), (2, 0, 10.0)], vec![0.0, 0.5, 0.5], 0.0, false)
                .unwrap();
        let em = empirical_measures(&net, 10, 0).unwrap();
        assert_eq!(em.mu.len(), 1);
        assert_eq!(em.mu[&(1, 1)], 1.0);
        assert_eq!(em.lambda, 1.0);
        assert!((em.p(1, 1, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((em.p(1, 1, 1) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn subset_law_matches_all_orderings() {
        let weights = [5.0, 1.0, 2.5, 0.7, 3.3, 1.9];
        for gamma in [0.05, 0.2, 0.35, 0.6] {
            let net = star(&weights, gamma);
            let law = node_threshold_law(&net, 0, 1, 0);
            let perms = heap_permutations(weights.len());
            let mut oracle = vec![0.0; weights.len() + 2];
            for p in &perms {
                oracle[default_threshold(&net, 0, p).unwrap()] += 1.0;
            }
            for (theta, v) in law.iter().enumerate() {
                let o = oracle[theta] / perms.len() as f64;
                assert!((v - o).abs() < 1e-12, "gamma {gamma} theta {theta}: {v} vs {o}");
            }
        }
    }

    #[test]
    fn sampled_law_is_close_and_reproducible() {
        let weights: Vec<f64> = (0..12).map(|b| 1.0 + b as f64 * 0.5).collect();
        let net = star(&weights, 0.2);
        let a = node_threshold_law(&net, 0, 4000, 5);
        assert_eq!(a, node_threshold_law(&net, 0, 4000, 5));
        let mut r = rng::stream(77, "oracle");
        let trials = 40_000;
        let mut freq = vec![0.0; weights.len() + 2];
        for _ in 0..trials {
            let p = rng::permutation(&mut r, weights.len());
            freq[default_threshold(&net, 0, &p).unwrap()] += 1.0 / trials as f64;
        }
        for theta in 0..=weights.len() {
            assert!((a[theta] - freq[theta]).abs() < 0.03, "theta {theta}");
        }
    }

    #[test]
    fn equal_exposures_give_degenerate_laws() {
        let n = 30;
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (1..=3).map(move |s| (i, (i + s) % n, 2.0)))
            .collect();
        let net = build_network(&edges, vec![0.5; n], 0.0, false).unwrap();
        let em = empirical_measures(&net, 5, 1).unwrap();
        for (&(j, k, t), &v) in &em.p_table {
            assert!(v == 0.0 || v == 1.0, "({j},{k},{t}) = {v}");
        }
        assert_eq!(em.p(3, 3, 2), 1.0);
    }

    #[test]
    fn measures_deterministic_and_normalized() {
        let mut edges = Vec::new();
        for i in 0..40usize {
            for s in 1..=(i % 11) + 1 {
                edges.push((i, (i + 3 * s) % 41, 1.0 + ((i * 7 + s) % 5) as f64));
            }
        }
        let net = build_network(&edges, vec![0.15; 41], 0.0, false).unwrap();
        let a = empirical_measures(&net, 50, 9).unwrap();
        let b = empirical_measures(&net, 50, 9).unwrap();
        assert_eq!(a, b);
        for &(j, k) in a.mu.keys() {
            let mass: f64 = (0..=j).map(|t| a.p(j, k, t)).sum();
            assert!(mass <= 1.0 + 1e-12);
        }
        let lam_j: f64 = a.mu.iter().map(|(&(j, _), &m)| j as f64 * m).sum();
        assert!((lam_j - a.lambda).abs() < 1e-12);
        assert!(a.to_model().is_ok());
    }

    #[test]
    fn model_validation() {
        assert!(LimitModel::new([((1, 1), 0.5)], []).is_err());
        assert!(matches!(
            LimitModel::new([((0, 0), 1.0)], []),
            Err(Error::ZeroMeanDegree)
        ));
        assert!(LimitModel::new([((1, 2), 1.0)], []).is_err());
        assert!(matches!(
            LimitModel::new([((2, 2), 1.0)], [((3, 3, 1), 0.5)]),
            Err(Error::UnknownClass(3, 3))
        ));
        assert!(LimitModel::new([((2, 2), 1.0)], [((2, 2, 1), 0.6), ((2, 2, 2), 0.6)]).is_err());
        assert!(LimitModel::new([((2, 2), 1.0)], [((2, 2, 3), 0.1)]).is_err());
        let m = LimitModel::new([((1, 2), 2.0 / 3.0), ((4, 2), 1.0 / 3.0)], [((1, 2, 1), 1.0)])
            .unwrap();
        assert!((m.lambda() - 2.0).abs() < 1e-15);
        assert_eq!(m.p(1, 2, 1), 1.0);
        assert_eq!(m.p(4, 2, 1), 0.0);
        assert_eq!(m.mu(9, 9), 0.0);
    }

    #[test]
    fn assumption_report() {
        let mk = |n: usize| {
            let edges: Vec<_> = (0..n)
                .flat_map(|i| (1..=4).map(move |s| (i, (i + s) % n, 1.0)))
                .collect();
            let net = build_network(&edges, vec![0.3; n], 0.0, false).unwrap();
            empirical_measures(&net, 5, 0).unwrap()
        };
        let (a, b) = (mk(100), mk(1000));
        let r = validate_asymptotic_assumptions(&[a.clone(), b]).unwrap();
        assert_eq!(r.lambdas, vec![4.0, 4.0]);
        assert_eq!(r.mu_drift, vec![0.0]);
        assert!(r.second_moment_bounded);
        let same = validate_asymptotic_assumptions(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(same.mu_drift, vec![0.0]);
        assert!(validate_asymptotic_assumptions(&[a]).is_err());
    }
}
