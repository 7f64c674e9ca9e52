//! Random network generators: Pareto samplers, the scale-free model with
//! attachment exponent α, directed Erdős-Rényi graphs, configuration
//! networks with prescribed degree classes, and capital/seed assignment.

use crate::configmodel::{configuration_match, weighted_overlay};
use crate::error::{Error, Result};
use crate::network::{build_network, DegreeSequence, FinancialNetwork, NodeId};
use crate::rng::{self, tag, StreamRng};
use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Pareto law with `P(X ≥ x) = (x / x_min)^{-tail_exponent}` for `x ≥ x_min`.
///
/// The discrete variant floors a continuous draw, which keeps the same tail
/// function on the integers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoSpec {
    pub tail_exponent: f64,
    pub x_min: f64,
    pub discrete: bool,
}

impl ParetoSpec {
    pub fn continuous(tail_exponent: f64, x_min: f64) -> Self {
        ParetoSpec {
            tail_exponent,
            x_min,
            discrete: false,
        }
    }

    pub fn discrete(tail_exponent: f64, x_min: usize) -> Self {
        ParetoSpec {
            tail_exponent,
            x_min: x_min as f64,
            discrete: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tail_exponent.is_finite() && self.tail_exponent > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tail exponent must be positive and finite, got {}",
                self.tail_exponent
            )));
        }
        if !(self.x_min.is_finite() && self.x_min > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "x_min must be positive, got {}",
                self.x_min
            )));
        }
        if self.discrete && self.x_min.fract() != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "discrete x_min must be an integer, got {}",
                self.x_min
            )));
        }
        Ok(())
    }

    fn draw(&self, r: &mut StreamRng) -> f64 {
        let x = self.x_min * rng::open_closed01(r).powf(-1.0 / self.tail_exponent);
        if self.discrete {
            x.floor()
        } else {
            x
        }
    }
}

/// `count` i.i.d. draws by inverse transform.
pub fn sample_pareto(spec: &ParetoSpec, count: usize, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut r = rng::stream(seed, tag::PARETO);
    Ok((0..count).map(|_| spec.draw(&mut r)).collect())
}

/// Scale-free model: Pareto out-degrees, each edge attached to an end node
/// chosen with probability proportional to `d⁺^α`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlanchardSpec {
    pub n: usize,
    pub out_degree: ParetoSpec,
    pub alpha: f64,
}

impl BlanchardSpec {
    /// Out-degree tail `gamma_plus`, in-degree tail `gamma_minus`,
    /// `α = gamma_plus / gamma_minus` and minimum degree 1.
    pub fn from_tails(n: usize, gamma_plus: f64, gamma_minus: f64) -> Self {
        BlanchardSpec {
            n,
            out_degree: ParetoSpec::discrete(gamma_plus, 1),
            alpha: gamma_plus / gamma_minus,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.out_degree.validate()?;
        if !self.out_degree.discrete {
            return Err(Error::InvalidParameter("out-degree law must be discrete".into()));
        }
        if !(self.alpha >= 1.0 && self.alpha < self.out_degree.tail_exponent) {
            return Err(Error::InvalidParameter(format!(
                "attachment exponent {} must lie in [1, {})",
                self.alpha, self.out_degree.tail_exponent
            )));
        }
        if self.n < 2 {
            return Err(Error::InvalidParameter("need at least two nodes".into()));
        }
        Ok(())
    }
}

/// A directed multigraph given by its edge list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeList {
    pub n: usize,
    pub edges: Vec<(NodeId, NodeId)>,
}

impl EdgeList {
    pub fn degrees(&self) -> DegreeSequence {
        let mut d_plus = vec![0; self.n];
        let mut d_minus = vec![0; self.n];
        for &(s, d) in &self.edges {
            d_plus[s] += 1;
            d_minus[d] += 1;
        }
        DegreeSequence::new(d_plus, d_minus).expect("every edge adds one stub of each kind")
    }

    pub fn mean_degree(&self) -> f64 {
        self.edges.len() as f64 / self.n as f64
    }
}

/// Samples the scale-free model. Self-loops are redrawn; parallel edges are
/// kept (see [`attach_exposures_and_capital`] for collapsing them).
pub fn blanchard_graph(spec: &BlanchardSpec, seed: u64) -> Result<EdgeList> {
    spec.validate()?;
    let mut dr = rng::stream(seed, tag::DEGREES);
    let d_plus: Vec<usize> = (0..spec.n)
        .map(|_| spec.out_degree.draw(&mut dr) as usize)
        .collect();
    let attach: Vec<f64> = d_plus.iter().map(|&d| (d as f64).powf(spec.alpha)).collect();
    let positive = attach.iter().filter(|&&w| w > 0.0).count();
    if positive == 0 {
        return Err(Error::InvalidParameter("all out-degrees are zero".into()));
    }
    let index = WeightedIndex::new(&attach)
        .map_err(|e| Error::InvalidParameter(format!("attachment weights: {e}")))?;
    let mut er = rng::stream(seed, tag::ENDPOINTS);
    let mut edges = Vec::with_capacity(d_plus.iter().sum());
    for (src, &d) in d_plus.iter().enumerate() {
        if d > 0 && positive == 1 && attach[src] > 0.0 {
            return Err(Error::InvalidParameter(
                "only one node can receive edges; every draw would be a self-loop".into(),
            ));
        }
        for _ in 0..d {
            let dst = loop {
                let v = index.sample(&mut er);
                if v != src {
                    break v;
                }
            };
            edges.push((src, dst));
        }
    }
    Ok(EdgeList { n: spec.n, edges })
}

/// Each ordered pair `(i, j)`, `i ≠ j`, present independently with `edge_prob`.
pub fn erdos_renyi_directed(n: usize, edge_prob: f64, seed: u64) -> Result<EdgeList> {
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::ProbabilityOutOfRange(edge_prob));
    }
    let pairs = n as u64 * n.saturating_sub(1) as u64;
    let mut edges = Vec::new();
    let mut push = |q: u64| {
        let i = (q / (n as u64 - 1)) as usize;
        let r = (q % (n as u64 - 1)) as usize;
        edges.push((i, if r < i { r } else { r + 1 }));
    };
    if edge_prob == 1.0 {
        (0..pairs).for_each(&mut push);
    } else if edge_prob > 0.0 {
        // Geometric gaps between successive present pairs.
        let mut r = rng::stream(seed, tag::ER);
        let log_q = (1.0 - edge_prob).ln();
        let mut q: u64 = 0;
        loop {
            let gap = (rng::open_closed01(&mut r).ln() / log_q).floor();
            if gap >= (pairs - q) as f64 {
                break;
            }
            q += gap as u64;
            push(q);
            q += 1;
            if q >= pairs {
                break;
            }
        }
    }
    Ok(EdgeList { n, edges })
}

/// How exposure sizes are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExposureLaw {
    Pareto(ParetoSpec),
    Equal { weight: f64 },
}

impl ExposureLaw {
    fn sampler(&self, seed: u64) -> Result<impl FnMut() -> f64> {
        let law = *self;
        match law {
            ExposureLaw::Pareto(spec) => spec.validate()?,
            ExposureLaw::Equal { weight } => {
                if !(weight.is_finite() && weight > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "exposure weight must be positive, got {weight}"
                    )));
                }
            }
        }
        let mut r = rng::stream(seed, tag::EXPOSURES);
        Ok(move || match law {
            ExposureLaw::Pareto(spec) => spec.draw(&mut r),
            ExposureLaw::Equal { weight } => weight,
        })
    }
}

/// Draws one exposure per edge (in edge order) and gives every node the
/// capital ratio `gamma_min`.
///
/// With `collapse_parallel` repeated ordered pairs are merged into one
/// exposure carrying the summed weight, in order of first appearance, and
/// the result is a simple network. Otherwise the edge multiset is kept.
pub fn attach_exposures_and_capital(
    graph: &EdgeList,
    exposures: &ExposureLaw,
    gamma_min: f64,
    recovery: f64,
    collapse_parallel: bool,
    seed: u64,
) -> Result<FinancialNetwork> {
    let mut draw = exposures.sampler(seed)?;
    let weighted: Vec<(NodeId, NodeId, f64)> =
        graph.edges.iter().map(|&(s, d)| (s, d, draw())).collect();
    let gammas = vec![gamma_min; graph.n];
    if !collapse_parallel {
        return build_network(&weighted, gammas, recovery, true);
    }
    let mut slot: HashMap<(NodeId, NodeId), usize> = HashMap::new();
    let mut merged: Vec<(NodeId, NodeId, f64)> = Vec::new();
    for (s, d, w) in weighted {
        match slot.get(&(s, d)) {
            Some(&idx) => merged[idx].2 += w,
            None => {
                slot.insert((s, d), merged.len());
                merged.push((s, d, w));
            }
        }
    }
    build_network(&merged, gammas, recovery, false)
}

/// Which nodes start in default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedChoice {
    /// A uniform subset of `max(1, round(f n))` nodes when `f > 0`.
    Fraction(f64),
    Ids(Vec<NodeId>),
}

/// Number of seeds drawn for a fraction `f` of `n` nodes.
pub fn seed_count(n: usize, fraction: f64) -> usize {
    if fraction <= 0.0 || n == 0 {
        0
    } else {
        ((fraction * n as f64).round() as usize).clamp(1, n)
    }
}

/// Sets `γ = 0` on the chosen nodes.
pub fn seed_defaults(net: &FinancialNetwork, choice: &SeedChoice, seed: u64) -> Result<FinancialNetwork> {
    let n = net.n();
    let ids = match choice {
        SeedChoice::Fraction(f) => {
            if !(0.0..=1.0).contains(f) {
                return Err(Error::ProbabilityOutOfRange(*f));
            }
            let count = seed_count(n, *f);
            let mut r = rng::stream(seed, tag::SEEDS);
            let mut perm: Vec<NodeId> = (0..n).collect();
            for i in 0..count {
                let j = i + rng::uniform_index(&mut r, n - i);
                perm.swap(i, j);
            }
            perm.truncate(count);
            perm
        }
        SeedChoice::Ids(ids) => {
            if let Some(&id) = ids.iter().find(|&&id| id >= n) {
                return Err(Error::NodeOutOfRange { id, n });
            }
            ids.clone()
        }
    };
    let mut gammas = net.gammas().to_vec();
    for i in ids {
        gammas[i] = 0.0;
    }
    net.with_gammas(gammas)
}

/// Degree classes `(j, k)` with relative masses, realised on `n` nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub classes: Vec<(usize, usize, f64)>,
}

impl ClassSpec {
    /// Class sizes by largest remainder; nodes are numbered class by class.
    /// Fails when the resulting stub counts do not balance.
    pub fn degree_sequence(&self, n: usize) -> Result<DegreeSequence> {
        let total: f64 = self.classes.iter().map(|c| c.2).sum();
        if self.classes.is_empty() || !total.is_finite() || total <= 0.0 {
            return Err(Error::InvalidParameter("class masses must be positive".into()));
        }
        let exact: Vec<f64> = self.classes.iter().map(|c| c.2 / total * n as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| {
            (exact[b] - exact[b].floor())
                .total_cmp(&(exact[a] - exact[a].floor()))
                .then(a.cmp(&b))
        });
        let missing = n - counts.iter().sum::<usize>();
        for &c in order.iter().take(missing) {
            counts[c] += 1;
        }
        let mut d_plus = Vec::with_capacity(n);
        let mut d_minus = Vec::with_capacity(n);
        for (&(j, k, _), &cnt) in self.classes.iter().zip(&counts) {
            d_plus.extend(std::iter::repeat_n(j, cnt));
            d_minus.extend(std::iter::repeat_n(k, cnt));
        }
        DegreeSequence::new(d_plus, d_minus)
    }
}

/// Configuration multigraph on `degrees` with exposures drawn per out-stub
/// and a common capital ratio.
pub fn configuration_network(
    degrees: &DegreeSequence,
    exposures: &ExposureLaw,
    gamma: f64,
    recovery: f64,
    seed: u64,
) -> Result<FinancialNetwork> {
    let g = configuration_match(degrees, seed);
    let mut draw = exposures.sampler(seed)?;
    let weights: Vec<Vec<f64>> = degrees
        .out_degrees()
        .iter()
        .map(|&d| (0..d).map(|_| draw()).collect())
        .collect();
    weighted_overlay(&g, &weights, vec![gamma; degrees.n()], recovery)
}

/// Graph family of a [`NetworkSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Topology {
    /// Scale-free model with out/in tail exponents.
    Blanchard { gamma_plus: f64, gamma_minus: f64 },
    /// Directed Erdős-Rényi graph with edge probability `mean_degree / (n - 1)`.
    ErdosRenyi { mean_degree: f64 },
    /// Configuration multigraph on degree classes `(j, k, mass)`.
    Classes { classes: Vec<(usize, usize, f64)> },
}

/// A complete recipe for a random financial network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub n: usize,
    pub topology: Topology,
    pub exposure: ExposureLaw,
    pub gamma_min: f64,
    #[serde(default)]
    pub recovery: f64,
    /// Merge parallel edges of the scale-free and Erdős-Rényi graphs.
    #[serde(default = "default_collapse")]
    pub collapse_parallel: bool,
}

fn default_collapse() -> bool {
    true
}

impl NetworkSpec {
    /// Scale-free graph with tails 2.19 / 1.98, Pareto(2.61) exposures with
    /// minimum 1 and no recovery.
    pub fn scale_free(n: usize, gamma_min: f64) -> Self {
        NetworkSpec {
            n,
            topology: Topology::Blanchard {
                gamma_plus: 2.19,
                gamma_minus: 1.98,
            },
            exposure: ExposureLaw::Pareto(ParetoSpec::continuous(2.61, 1.0)),
            gamma_min,
            recovery: 0.0,
            collapse_parallel: true,
        }
    }

    pub fn classes(n: usize, classes: Vec<(usize, usize, f64)>, weight: f64, gamma_min: f64) -> Self {
        NetworkSpec {
            n,
            topology: Topology::Classes { classes },
            exposure: ExposureLaw::Equal { weight },
            gamma_min,
            recovery: 0.0,
            collapse_parallel: false,
        }
    }

    /// The unweighted graph (classes are realised through their degree sequence).
    pub fn graph(&self, seed: u64) -> Result<EdgeList> {
        match &self.topology {
            Topology::Blanchard {
                gamma_plus,
                gamma_minus,
            } => blanchard_graph(&BlanchardSpec::from_tails(self.n, *gamma_plus, *gamma_minus), seed),
            Topology::ErdosRenyi { mean_degree } => {
                if self.n < 2 {
                    return Err(Error::InvalidParameter("need at least two nodes".into()));
                }
                erdos_renyi_directed(self.n, mean_degree / (self.n - 1) as f64, seed)
            }
            Topology::Classes { classes } => {
                let degrees = ClassSpec {
                    classes: classes.clone(),
                }
                .degree_sequence(self.n)?;
                let g = configuration_match(&degrees, seed);
                Ok(EdgeList {
                    n: self.n,
                    edges: g.edges().collect(),
                })
            }
        }
    }

    pub fn generate(&self, seed: u64) -> Result<FinancialNetwork> {
        match &self.topology {
            Topology::Classes { classes } => {
                let degrees = ClassSpec {
                    classes: classes.clone(),
                }
                .degree_sequence(self.n)?;
                configuration_network(&degrees, &self.exposure, self.gamma_min, self.recovery, seed)
            }
            _ => attach_exposures_and_capital(
                &self.graph(seed)?,
                &self.exposure,
                self.gamma_min,
                self.recovery,
                self.collapse_parallel,
                seed,
            ),
        }
    }
}
