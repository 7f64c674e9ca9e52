//! Monte Carlo experiment drivers behind the command-line runner.
//!
//! Work is spread over rayon, but every driver returns rows ordered by
//! (grid index, trial index), and every random choice comes from a seed
//! derived from the master seed, so output does not depend on scheduling.

use crate::asymptotics::{amplification, asymptotic_fraction, targeted_amplification};
use crate::cascade::{assign_thresholds, default_threshold, run_cascade};
use crate::configmodel::markov_trajectory;
use crate::error::{Error, Result};
use crate::generators::{seed_count, seed_defaults, ExposureLaw, NetworkSpec, SeedChoice, Topology};
use crate::io;
use crate::measures::{empirical_measures, LimitModel, DEFAULT_PERM_BUDGET};
use crate::network::{build_network, FinancialNetwork, NodeId};
use crate::percolation::{contagious_skeleton, empirical_condition};
use crate::rng;
use crate::stats::{mean, std_error};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Parameters shared by all experiments; each driver reads the fields it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Generator recipe; ignored when `network_file` is set.
    pub network: Option<NetworkSpec>,
    /// A network in the JSON network format.
    pub network_file: Option<PathBuf>,
    /// Explicit `γ_min` grid; otherwise log-spaced around the resilience zero.
    pub gamma_grid: Option<Vec<f64>>,
    pub grid_points: usize,
    pub grid_upper: f64,
    /// Uniform capital ratio for single-γ experiments; defaults to the
    /// network's own.
    pub gamma_min: Option<f64>,
    /// Fraction of nodes seeded as fundamental defaults.
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    pub perm_budget: usize,
    /// Nodes for the in-degree study; otherwise `sample_nodes` are chosen.
    pub nodes: Option<Vec<NodeId>>,
    pub sample_nodes: usize,
    /// Mean degree of the Erdős-Rényi comparison graph; defaults to the
    /// scale-free graph's.
    pub er_mean_degree: Option<f64>,
    /// Network sizes for the convergence study.
    pub n_grid: Vec<usize>,
    /// Trials of the convergence study that also record a chain trajectory.
    pub trajectory_trials: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: String::new(),
            network: Some(NetworkSpec::scale_free(10_000, 0.1)),
            network_file: None,
            gamma_grid: None,
            grid_points: 40,
            grid_upper: 0.99,
            gamma_min: None,
            epsilon: 0.001,
            trials: 20,
            seed: 0,
            perm_budget: DEFAULT_PERM_BUDGET,
            nodes: None,
            sample_nodes: 200,
            er_mean_degree: None,
            n_grid: vec![1_000, 4_000, 16_000],
            trajectory_trials: 20,
        }
    }
}

/// Experiment kinds with their default configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    AmplificationSweep,
    IndegreeImpact,
    TopologyCompare,
    ConvergenceStudy,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::AmplificationSweep => "amplification-sweep",
            Experiment::IndegreeImpact => "indegree-impact",
            Experiment::TopologyCompare => "topology-compare",
            Experiment::ConvergenceStudy => "convergence-study",
        }
    }

    pub fn preset(self) -> ExperimentConfig {
        let base = ExperimentConfig {
            name: self.name().to_owned(),
            ..ExperimentConfig::default()
        };
        match self {
            Experiment::IndegreeImpact => ExperimentConfig {
                gamma_min: Some(0.1),
                ..base
            },
            Experiment::ConvergenceStudy => ExperimentConfig {
                network: Some(NetworkSpec::classes(1_000, vec![(3, 3, 1.0)], 1.0, 0.5)),
                epsilon: 0.01,
                trials: 50,
                ..base
            },
            _ => base,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.network.is_none() && self.network_file.is_none() {
            return bad("either network or network_file is required".into());
        }
        if let Some(grid) = &self.gamma_grid {
            if grid.is_empty() {
                return bad("gamma_grid is empty".into());
            }
            if let Some(g) = grid.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
                return bad(format!("gamma_grid entries must be positive, got {g}"));
            }
        } else if self.grid_points < 2 {
            return bad("grid_points must be at least 2".into());
        }
        if !(self.grid_upper > 0.0 && self.grid_upper.is_finite()) {
            return bad(format!("grid_upper must be positive, got {}", self.grid_upper));
        }
        if self.n_grid.is_empty() {
            return bad("n_grid is empty".into());
        }
        if self.perm_budget == 0 {
            return bad("perm_budget must be at least 1".into());
        }
        Ok(())
    }

    /// The study network: read from `network_file` or generated from
    /// `network` with a seed derived from the master seed.
    pub fn base_network(&self) -> Result<FinancialNetwork> {
        match (&self.network_file, &self.network) {
            (Some(path), _) => io::read_network(path),
            (None, Some(spec)) => spec.generate(rng::derive_seed(self.seed, 0)),
            (None, None) => Err(Error::InvalidParameter(
                "either network or network_file is required".into(),
            )),
        }
    }

    fn sweep_epsilon(&self) -> Result<f64> {
        if self.epsilon > 0.0 && self.epsilon <= 1.0 {
            Ok(self.epsilon)
        } else {
            Err(Error::InvalidParameter(format!(
                "seed fraction must lie in (0, 1] for an amplification ratio, got {}",
                self.epsilon
            )))
        }
    }
}

/// Column names with units, in row order.
pub trait Table: Serialize {
    const COLUMNS: &'static [(&'static str, &'static str)];

    fn header() -> Vec<&'static str> {
        Self::COLUMNS.iter().map(|c| c.0).collect()
    }
}

/// Resilience of `net` with its own capital ratios, `1 - Σ d⁻ c⁺ / m`.
pub fn empirical_resilience(net: &FinancialNetwork) -> f64 {
    1.0 - empirical_condition(net, &contagious_skeleton(net))
}

fn uniform(net: &FinancialNetwork, gamma: f64) -> FinancialNetwork {
    net.with_gammas(vec![gamma; net.n()])
        .expect("grid values are validated positive")
}

/// Smallest uniform `γ_min` at which `net` is resilient, by bisection on
/// `[0, upper]`. Errors when `net` is not resilient at `upper`.
pub fn critical_gamma(net: &FinancialNetwork, upper: f64) -> Result<f64> {
    let r_up = empirical_resilience(&uniform(net, upper));
    if r_up <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "network is not resilient at gamma_min = {upper} (resilience {r_up})"
        )));
    }
    let (mut lo, mut hi) = (0.0, upper);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if empirical_resilience(&uniform(net, mid)) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln();
    (0..points)
        .map(|i| {
            if i + 1 == points {
                hi
            } else {
                lo * (ratio * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

/// The configured grid, or `grid_points` log-spaced values from a third of
/// the critical `γ_min` up to `grid_upper`. Also returns the critical value.
pub fn sweep_grid(net: &FinancialNetwork, cfg: &ExperimentConfig) -> Result<(Vec<f64>, f64)> {
    let star = critical_gamma(net, cfg.grid_upper)?;
    let grid = match &cfg.gamma_grid {
        Some(g) => g.clone(),
        None => log_grid((star / 3.0).max(1e-6), cfg.grid_upper, cfg.grid_points),
    };
    Ok((grid, star))
}

/// One row of an amplification sweep: a single trial, or the per-γ summary
/// (`kind = "summary"`, `trial` empty, means over trials).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub topology: String,
    pub gamma_index: usize,
    pub gamma_min: f64,
    pub kind: &'static str,
    pub trial: Option<usize>,
    pub seeds: usize,
    pub defaults: f64,
    pub sim_ratio: f64,
    pub sim_ratio_se: Option<f64>,
    pub theory_ratio: Option<f64>,
    pub resilience: f64,
}

impl Table for SweepRow {
    const COLUMNS: &'static [(&'static str, &'static str)] = &[
        ("topology", "label"),
        ("gamma_index", "index"),
        ("gamma_min", "capital / interbank assets"),
        ("kind", "trial | summary"),
        ("trial", "index"),
        ("seeds", "nodes"),
        ("defaults", "nodes"),
        ("sim_ratio", "defaults / seeds"),
        ("sim_ratio_se", "standard error of sim_ratio"),
        ("theory_ratio", "defaults / seeds"),
        ("resilience", "dimensionless"),
    ];
}

impl SweepRow {
    pub fn is_summary(&self) -> bool {
        self.kind == "summary"
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    /// Critical `γ_min` of the study network.
    pub gamma_star: f64,
    pub grid: Vec<f64>,
}

impl SweepOutput {
    pub fn summaries<'a>(&'a self, topology: &'a str) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.is_summary() && r.topology == topology)
    }
}

/// Simulated and first-order amplification on one network over a γ grid.
/// Trial `t` seeds the same node set at every grid point.
fn sweep_network(
    label: &str,
    net: &FinancialNetwork,
    grid: &[f64],
    cfg: &ExperimentConfig,
) -> Result<Vec<SweepRow>> {
    let epsilon = cfg.sweep_epsilon()?;
    let seeds = seed_count(net.n(), epsilon);
    let trial_seed = rng::derive_seed(cfg.seed, 1);
    let measure_seed = rng::derive_seed(cfg.seed, 2);
    let per_gamma: Vec<Vec<SweepRow>> = grid
        .par_iter()
        .enumerate()
        .map(|(gi, &gamma)| -> Result<Vec<SweepRow>> {
            let net_g = uniform(net, gamma);
            let resilience = empirical_resilience(&net_g);
            let theory_ratio = if resilience > 0.0 {
                let model = empirical_measures(&net_g, cfg.perm_budget, measure_seed)?.to_model()?;
                Some(amplification(&model, epsilon)?.ratio)
            } else {
                None
            };
            let defaults: Vec<f64> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let s = rng::derive_seed(trial_seed, t as u64);
                    let seeded = seed_defaults(&net_g, &SeedChoice::Fraction(epsilon), s)?;
                    Ok(run_cascade(&seeded).final_size() as f64)
                })
                .collect::<Result<_>>()?;
            let row = |kind, trial, d: f64, se| SweepRow {
                topology: label.to_owned(),
                gamma_index: gi,
                gamma_min: gamma,
                kind,
                trial,
                seeds,
                defaults: d,
                sim_ratio: d / seeds as f64,
                sim_ratio_se: se,
                theory_ratio,
                resilience,
            };
            let mut rows: Vec<SweepRow> = defaults
                .iter()
                .enumerate()
                .map(|(t, &d)| row("trial", Some(t), d, None))
                .collect();
            let ratios: Vec<f64> = defaults.iter().map(|d| d / seeds as f64).collect();
            rows.push(row("summary", None, mean(&defaults), Some(std_error(&ratios))));
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_gamma.into_iter().flatten().collect())
}

/// Amplification ratio against `γ_min` on one generated (or loaded) network.
/// The grid must contain both resilient and non-resilient points.
pub fn run_amplification_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    cfg.sweep_epsilon()?;
    let net = cfg.base_network()?;
    let (grid, gamma_star) = sweep_grid(&net, cfg)?;
    let rows = sweep_network("network", &net, &grid, cfg)?;
    let resilient = rows.iter().filter(|r| r.is_summary() && r.resilience > 0.0).count();
    if resilient == 0 || resilient == grid.len() {
        return Err(Error::InvalidParameter(
            "gamma grid must contain both resilient and non-resilient points".into(),
        ));
    }
    Ok(SweepOutput {
        rows,
        gamma_star,
        grid,
    })
}

pub const SCALE_FREE_PARETO: &str = "scale-free-pareto";
pub const SCALE_FREE_EQUAL: &str = "scale-free-equal";
pub const ERDOS_RENYI_EQUAL: &str = "erdos-renyi-equal";

/// Largest tolerated relative difference between compared mean degrees.
pub const MEAN_DEGREE_TOLERANCE: f64 = 0.05;

/// Sweeps the study network, the same graph with equal unit exposures, and
/// a directed Erdős-Rényi graph with equal unit exposures and matching mean
/// degree, all over the study network's grid.
pub fn run_topology_compare(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    cfg.sweep_epsilon()?;
    let net = cfg.base_network()?;
    let n = net.n();
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two nodes".into()));
    }
    let mean_degree = net.edge_count() as f64 / n as f64;
    let er_target = cfg.er_mean_degree.unwrap_or(mean_degree);
    let er_spec = NetworkSpec {
        n,
        topology: Topology::ErdosRenyi {
            mean_degree: er_target,
        },
        exposure: ExposureLaw::Equal { weight: 1.0 },
        gamma_min: cfg.grid_upper,
        recovery: net.recovery(),
        collapse_parallel: true,
    };
    let er = er_spec.generate(rng::derive_seed(cfg.seed, 3))?;
    let er_mean = er.edge_count() as f64 / n as f64;
    if (er_mean - mean_degree).abs() > MEAN_DEGREE_TOLERANCE * mean_degree {
        return Err(Error::InvalidParameter(format!(
            "mean degrees differ by more than {}%: {mean_degree} vs {er_mean}",
            MEAN_DEGREE_TOLERANCE * 100.0
        )));
    }
    let equal = net.with_uniform_weights(1.0)?;
    let (grid, gamma_star) = sweep_grid(&net, cfg)?;
    let mut rows = sweep_network(SCALE_FREE_PARETO, &net, &grid, cfg)?;
    rows.extend(sweep_network(SCALE_FREE_EQUAL, &equal, &grid, cfg)?);
    rows.extend(sweep_network(ERDOS_RENYI_EQUAL, &er, &grid, cfg)?);
    Ok(SweepOutput {
        rows,
        gamma_star,
        grid,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImpactRow {
    pub node: NodeId,
    pub d_plus: usize,
    pub d_minus: usize,
    pub defaults: usize,
    /// First-order prediction; empty when the network is not resilient.
    pub prediction: Option<f64>,
}

impl Table for ImpactRow {
    const COLUMNS: &'static [(&'static str, &'static str)] = &[
        ("node", "id"),
        ("d_plus", "exposures held"),
        ("d_minus", "creditors"),
        ("defaults", "nodes"),
        ("prediction", "nodes"),
    ];
}

/// Half the sample by largest in-degree (ties by id), the rest uniform.
fn impact_nodes(net: &FinancialNetwork, count: usize, seed: u64) -> Vec<NodeId> {
    let n = net.n();
    let count = count.min(n);
    let mut by_in: Vec<NodeId> = (0..n).collect();
    by_in.sort_by(|&a, &b| net.in_degree(b).cmp(&net.in_degree(a)).then(a.cmp(&b)));
    let top = count / 2;
    let mut rest: Vec<NodeId> = by_in[top..].to_vec();
    rest.sort_unstable();
    let mut r = rng::stream(seed, rng::tag::SEEDS);
    rng::shuffle(&mut r, &mut rest);
    let mut chosen: Vec<NodeId> = by_in[..top].iter().chain(&rest[..count - top]).copied().collect();
    chosen.sort_unstable();
    chosen
}

/// Default count when a single node is made insolvent, next to the
/// first-order prediction `1 + d⁻ (1 - resilience) / (λ resilience)` from
/// seeding one node of its degree class.
pub fn run_indegree_impact(cfg: &ExperimentConfig) -> Result<Vec<ImpactRow>> {
    cfg.validate()?;
    let mut net = cfg.base_network()?;
    if let Some(g) = cfg.gamma_min {
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma_min must be positive, got {g}")));
        }
        net = uniform(&net, g);
    }
    let n = net.n();
    let nodes = match &cfg.nodes {
        Some(ids) => {
            if let Some(&id) = ids.iter().find(|&&id| id >= n) {
                return Err(Error::NodeOutOfRange { id, n });
            }
            ids.clone()
        }
        None => impact_nodes(&net, cfg.sample_nodes, rng::derive_seed(cfg.seed, 4)),
    };
    let model = empirical_measures(&net, cfg.perm_budget, rng::derive_seed(cfg.seed, 2))?.to_model()?;
    nodes
        .par_iter()
        .map(|&i| {
            let mut gammas = net.gammas().to_vec();
            gammas[i] = 0.0;
            let defaults = run_cascade(&net.with_gammas(gammas)?).final_size();
            let (j, k) = (net.out_degree(i), net.in_degree(i));
            let eps = 1.0 / (n as f64 * model.mu(j, k));
            let prediction = match targeted_amplification(&model, j, k, eps) {
                Ok(f) => Some(f * n as f64),
                Err(Error::Supercritical(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(ImpactRow {
                node: i,
                d_plus: j,
                d_minus: k,
                defaults,
                prediction,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub trial: usize,
    pub alpha: f64,
    pub g: f64,
    /// Empty for trials past `trajectory_trials`.
    pub sup_dev: Option<f64>,
}

impl Table for ConvergenceRow {
    const COLUMNS: &'static [(&'static str, &'static str)] = &[
        ("n", "nodes"),
        ("trial", "index"),
        ("alpha", "defaults / n"),
        ("g", "defaults / n"),
        ("sup_dev", "counter / n"),
    ];
}

/// Threshold of a node with `j` equal exposures of size `weight`.
fn equal_weight_threshold(j: usize, weight: f64, gamma: f64, recovery: f64) -> Result<usize> {
    let edges: Vec<_> = (1..=j).map(|d| (0, d, weight)).collect();
    let mut gammas = vec![1.0; j + 1];
    gammas[0] = gamma;
    let star = build_network(&edges, gammas, recovery, false)?;
    default_threshold(&star, 0, &(0..j).collect::<Vec<_>>())
}

/// Limit model of an equal-weight class network with a uniform seed
/// fraction `seed_fraction`.
pub fn class_limit_model(spec: &NetworkSpec, seed_fraction: f64) -> Result<LimitModel> {
    let (Topology::Classes { classes }, ExposureLaw::Equal { weight }) = (&spec.topology, spec.exposure)
    else {
        return Err(Error::InvalidParameter(
            "a limit model needs degree classes with equal exposures".into(),
        ));
    };
    let total: f64 = classes.iter().map(|c| c.2).sum();
    let mut p = Vec::new();
    for &(j, k, _) in classes {
        if seed_fraction > 0.0 {
            p.push(((j, k, 0), seed_fraction));
        }
        let theta = equal_weight_threshold(j, weight, spec.gamma_min, spec.recovery)?;
        if theta <= j && seed_fraction < 1.0 {
            p.push(((j, k, theta), 1.0 - seed_fraction));
        }
    }
    LimitModel::new(classes.iter().map(|&(j, k, m)| ((j, k), m / total)), p)
}

/// Simulated default fraction against its limit for each size in `n_grid`.
/// The first `trajectory_trials` trials of each size also run the cascade
/// chain and record its largest deviation from the fluid limit up to `T_n`.
pub fn run_convergence_study(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRow>> {
    cfg.validate()?;
    let spec = cfg.network.as_ref().ok_or_else(|| {
        Error::InvalidParameter("convergence study needs a generator spec".into())
    })?;
    if !(0.0..=1.0).contains(&cfg.epsilon) {
        return Err(Error::ProbabilityOutOfRange(cfg.epsilon));
    }
    let jobs: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t)))
        .collect();
    jobs.par_iter()
        .map(|&(n, t)| {
            let spec_n = NetworkSpec { n, ..spec.clone() };
            let seeds = seed_count(n, cfg.epsilon);
            let model = class_limit_model(&spec_n, seeds as f64 / n as f64)?;
            let g = asymptotic_fraction(&model)?.fraction;
            let s = rng::derive_seed(rng::derive_seed(cfg.seed, n as u64), t as u64);
            let seeded = seed_defaults(&spec_n.generate(s)?, &SeedChoice::Fraction(cfg.epsilon), s)?;
            let alpha = run_cascade(&seeded).fraction();
            let sup_dev = if t < cfg.trajectory_trials {
                let thresholds = assign_thresholds(&seeded, s);
                let traj = markov_trajectory(&seeded.degree_sequence(), &thresholds, s, false)?;
                Some(traj.sup_deviation(&model))
            } else {
                None
            };
            Ok(ConvergenceRow {
                n,
                trial: t,
                alpha,
                g,
                sup_dev,
            })
        })
        .collect()
}
