//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so every criterion reports even when an earlier
//! one fails. Exits non-zero if any criterion fails, except those listed in
//! `EXPECTED_FAIL`, which still print FAIL.

mod common;

use common::random_instance;
use contagion::asymptotics::{
    binomial_tail, contagion_susceptibility, ode_solution, resilience,
};
use contagion::cascade::run_cascade;
use contagion::configmodel::{sequential_cascade, weighted_overlay};
use contagion::experiments::{
    run_amplification_sweep, run_convergence_study, run_topology_compare, ConvergenceRow, Experiment,
    ExperimentConfig, ERDOS_RENYI_EQUAL, SCALE_FREE_PARETO,
};
use contagion::generators::NetworkSpec;
use contagion::measures::LimitModel;
use contagion::percolation::{contagious_skeleton, giant_scc_condition, largest_scc};
use contagion::rng;
use contagion::stats::{continuize, hill_estimate, mean, median, Continuize, HILL_FRACTION};
use rand::Rng;
use std::process::ExitCode;
use std::time::Instant;

const EXACT_TOL: f64 = 1e-12;
const COUPLING_INSTANCES: u64 = 1_000;
const COUPLING_MAX_N: usize = 200;
const CONVERGENCE_SEED: u64 = 2011;
const CONVERGENCE_TRIALS: usize = 50;
const CONVERGENCE_DEV: f64 = 0.02;
const CONVERGENCE_N: usize = 10_000;
const CONVERGENCE_DECREASING: [usize; 3] = [1_000, 4_000, 16_000];
const ODE_SEEDS: usize = 20;
const DE_POINTS: usize = 100;
const DE_TOL: f64 = 1e-6;
const DE_STEP: f64 = 1e-5;
const BINOMIAL_MAX_J: usize = 10;
const BINOMIAL_PIS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
const AMPLIFICATION_N: usize = 10_000;
const AMPLIFICATION_EPSILON: f64 = 0.001;
const AMPLIFICATION_TRIALS: usize = 50;
const AMPLIFICATION_POINTS: usize = 40;
const AMPLIFICATION_REL_TOL: f64 = 0.25;
const AMPLIFICATION_MIN_RESILIENCE: f64 = 0.2;
const BLOW_UP: f64 = 10.0;
const TAIL_N: usize = 10_000;
const TAIL_SEEDS: u64 = 20;
const TAIL_TOL: f64 = 0.3;
const TAIL_TARGETS: [f64; 3] = [2.19, 1.98, 2.61];
const TAIL_SHARE: f64 = 0.9;
const SCC_N: usize = 10_000;
const SCC_RUNS: u64 = 20;
const SCC_GAMMA: f64 = 0.4;
const SCC_SUPER_MIN: f64 = 0.10;
const SCC_SUB_MAX: f64 = 0.02;
const SCC_SHARE: f64 = 0.95;
const ORDERING_SEEDS: u64 = 20;
const ORDERING_SHARE: f64 = 0.9;

/// Criteria known to fail; see the project notes for the analysis.
const EXPECTED_FAIL: &[&str] = &["convergence"];

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn case_one() -> LimitModel {
    let mu = [(1, 3), (2, 3), (4, 3), (5, 3)].map(|c| (c, 0.25));
    LimitModel::new(mu, [((1, 3, 1), 1.0), ((2, 3, 1), 1.0)]).unwrap()
}

fn case_two() -> LimitModel {
    LimitModel::new([((1, 2), 2.0 / 3.0), ((4, 2), 1.0 / 3.0)], [((1, 2, 1), 1.0)]).unwrap()
}

fn case_three() -> LimitModel {
    LimitModel::new([((4, 4), 1.0)], []).unwrap()
}

fn exact_resilience() -> Check {
    let got = [resilience(&case_one()), resilience(&case_two()), resilience(&case_three())];
    let want = [0.25, 1.0 / 3.0, 1.0];
    let pass = got.iter().zip(&want).all(|(g, w)| (g - w).abs() <= EXACT_TOL);
    Check {
        name: "resilience-values",
        pass,
        detail: format!("got {got:?}, want {want:?}"),
    }
}

fn coupling() -> Check {
    let mismatches: Vec<u64> = (0..COUPLING_INSTANCES)
        .filter(|&s| {
            let seed = rng::derive_seed(0xc0_0b1e, s);
            let inst = random_instance(seed, COUPLING_MAX_N);
            let out = sequential_cascade(&inst.degrees, &inst.weights, &inst.gammas, inst.recovery, seed).unwrap();
            let net = weighted_overlay(&out.graph, &inst.weights, inst.gammas.clone(), inst.recovery).unwrap();
            run_cascade(&net).final_set() != out.final_set
        })
        .collect();
    Check {
        name: "coupling",
        pass: mismatches.is_empty(),
        detail: format!("{} of {COUPLING_INSTANCES} instances differ {mismatches:?}", mismatches.len()),
    }
}

fn convergence_rows() -> Vec<ConvergenceRow> {
    let mut cfg = Experiment::ConvergenceStudy.preset();
    cfg.seed = CONVERGENCE_SEED;
    cfg.trials = CONVERGENCE_TRIALS;
    cfg.trajectory_trials = ODE_SEEDS;
    cfg.n_grid = vec![1_000, 4_000, CONVERGENCE_N, 16_000];
    run_convergence_study(&cfg).unwrap()
}

fn at_n(rows: &[ConvergenceRow], n: usize) -> impl Iterator<Item = &ConvergenceRow> {
    rows.iter().filter(move |r| r.n == n)
}

fn mean_deviation(rows: &[ConvergenceRow], n: usize) -> f64 {
    let alphas: Vec<f64> = at_n(rows, n).map(|r| r.alpha).collect();
    let g = at_n(rows, n).next().unwrap().g;
    (mean(&alphas) - g).abs()
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn convergence(rows: &[ConvergenceRow]) -> Check {
    let dev = mean_deviation(rows, CONVERGENCE_N);
    let devs: Vec<f64> = CONVERGENCE_DECREASING.iter().map(|&n| mean_deviation(rows, n)).collect();
    Check {
        name: "convergence",
        pass: dev <= CONVERGENCE_DEV && strictly_decreasing(&devs),
        detail: format!("deviation at n={CONVERGENCE_N}: {dev:.3e}; over {CONVERGENCE_DECREASING:?}: {}", sci(&devs)),
    }
}

/// `ds^l/dτ = ((j-l+1) s^{l-1} - (j-l) s^l) / (λ - τ)`, by central differences.
fn de_residuals() -> f64 {
    let models = [case_one(), case_two()];
    let mut r = rng::stream(5, "de-points");
    let mut worst: f64 = 0.0;
    for _ in 0..DE_POINTS {
        let model = &models[r.gen_range(0..models.len())];
        let entries: Vec<_> = model.p_entries().filter(|e| e.2 >= 1).collect();
        let (j, k, theta, _) = entries[r.gen_range(0..entries.len())];
        let l = r.gen_range(0..theta);
        let lam = model.lambda();
        let tau = lam * r.gen_range(0.02..0.95);
        let s = |l: usize, t: f64| ode_solution(model, j, k, theta, l, t).unwrap();
        let lhs = (s(l, tau + DE_STEP) - s(l, tau - DE_STEP)) / (2.0 * DE_STEP);
        let below = if l == 0 { 0.0 } else { s(l - 1, tau) };
        let rhs = ((j - l + 1) as f64 * below - (j - l) as f64 * s(l, tau)) / (lam - tau);
        worst = worst.max((lhs - rhs).abs());
    }
    worst
}

fn fluid_limit(rows: &[ConvergenceRow]) -> Check {
    let medians: Vec<f64> = CONVERGENCE_DECREASING
        .iter()
        .map(|&n| median(&at_n(rows, n).filter_map(|r| r.sup_dev).collect::<Vec<_>>()))
        .collect();
    let residual = de_residuals();
    Check {
        name: "fluid-limit",
        pass: strictly_decreasing(&medians) && residual <= DE_TOL,
        detail: format!("median sup deviation over {CONVERGENCE_DECREASING:?}: {}; DE residual {residual:.2e}", sci(&medians)),
    }
}

fn binomial_oracle() -> Check {
    let mut worst: f64 = 0.0;
    for j in 0..=BINOMIAL_MAX_J {
        for &pi in &BINOMIAL_PIS {
            for theta in 0..=j {
                let enumerated: f64 = (0u32..1 << j)
                    .filter(|m| m.count_ones() as usize >= theta)
                    .map(|m| {
                        let l = m.count_ones() as i32;
                        pi.powi(l) * (1.0 - pi).powi(j as i32 - l)
                    })
                    .sum();
                worst = worst.max((binomial_tail(j, pi, theta).unwrap() - enumerated).abs());
            }
        }
    }
    Check {
        name: "binomial-oracle",
        pass: worst <= EXACT_TOL,
        detail: format!("largest difference {worst:.2e}"),
    }
}

fn amplification() -> Check {
    let cfg = ExperimentConfig {
        name: "amplification-sweep".into(),
        network: Some(NetworkSpec::scale_free(AMPLIFICATION_N, 0.1)),
        epsilon: AMPLIFICATION_EPSILON,
        trials: AMPLIFICATION_TRIALS,
        grid_points: AMPLIFICATION_POINTS,
        ..ExperimentConfig::default()
    };
    let out = run_amplification_sweep(&cfg).unwrap();
    let rows: Vec<_> = out.summaries("network").collect();
    let mut worst_rel: f64 = 0.0;
    let mut compared = 0;
    for r in rows.iter().filter(|r| r.resilience >= AMPLIFICATION_MIN_RESILIENCE) {
        let theory = r.theory_ratio.expect("theory exists where resilience is positive");
        worst_rel = worst_rel.max((r.sim_ratio - theory).abs() / theory);
        compared += 1;
    }
    let max_ratio = |keep: &dyn Fn(f64) -> bool| {
        rows.iter()
            .filter(|r| keep(r.resilience))
            .map(|r| r.sim_ratio)
            .fold(f64::NAN, f64::max)
    };
    let resilient = max_ratio(&|res| res >= AMPLIFICATION_MIN_RESILIENCE);
    let fragile = max_ratio(&|res| res < 0.0);
    let growth = fragile / resilient;
    Check {
        name: "amplification",
        pass: compared > 0 && worst_rel <= AMPLIFICATION_REL_TOL && growth >= BLOW_UP,
        detail: format!(
            "{compared} points with resilience >= {AMPLIFICATION_MIN_RESILIENCE}, largest relative gap {worst_rel:.3}; \
             growth across the resilience zero {growth:.1}x (gamma* = {:.4})",
            out.gamma_star
        ),
    }
}

fn generator_tails() -> Check {
    let hits: Vec<[bool; 3]> = (0..TAIL_SEEDS)
        .map(|s| {
            let net = NetworkSpec::scale_free(TAIL_N, 0.1).generate(s).unwrap();
            let mut r = rng::stream(s, "tail-jitter");
            let out = continuize(&net.out_degrees(), Continuize::Floored, &mut r);
            let inn = continuize(net.in_degrees(), Continuize::Centered, &mut r);
            let weights: Vec<f64> = net.edges().map(|e| e.2).collect();
            let est = [&out, &inn, &weights].map(|xs| hill_estimate(xs, HILL_FRACTION).unwrap_or(f64::NAN));
            std::array::from_fn(|i| (est[i] - TAIL_TARGETS[i]).abs() <= TAIL_TOL)
        })
        .collect();
    let shares: [f64; 3] =
        std::array::from_fn(|i| hits.iter().filter(|h| h[i]).count() as f64 / TAIL_SEEDS as f64);
    Check {
        name: "generator-tails",
        pass: shares.iter().all(|&s| s >= TAIL_SHARE),
        detail: format!("share within {TAIL_TOL} of {TAIL_TARGETS:?}: {shares:?}"),
    }
}

fn scc_fractions(spec: &NetworkSpec) -> Vec<f64> {
    (0..SCC_RUNS)
        .map(|s| largest_scc(&contagious_skeleton(&spec.generate(rng::derive_seed(77, s)).unwrap())).fraction)
        .collect()
}

fn giant_scc() -> Check {
    let sup = NetworkSpec::classes(SCC_N, vec![(2, 2, 1.0)], 1.0, SCC_GAMMA);
    let sub = NetworkSpec::classes(
        SCC_N,
        vec![(1, 3, 0.25), (2, 3, 0.25), (4, 3, 0.25), (5, 3, 0.25)],
        1.0,
        SCC_GAMMA,
    );
    let share = |xs: &[f64], ok: &dyn Fn(f64) -> bool| xs.iter().filter(|&&x| ok(x)).count() as f64 / xs.len() as f64;
    let sup_share = share(&scc_fractions(&sup), &|x| x > SCC_SUPER_MIN);
    let sub_share = share(&scc_fractions(&sub), &|x| x < SCC_SUB_MAX);
    let super_model = LimitModel::new([((2, 2), 1.0)], [((2, 2, 1), 1.0)]).unwrap();
    let conditions = [contagion_susceptibility(&super_model), contagion_susceptibility(&case_one())];
    let identity = [case_one(), case_two(), case_three(), super_model]
        .iter()
        .map(|m| (giant_scc_condition(m) + resilience(m) - 1.0).abs())
        .fold(0.0, f64::max);
    Check {
        name: "giant-scc",
        pass: sup_share >= SCC_SHARE && sub_share >= SCC_SHARE && identity <= EXACT_TOL,
        detail: format!(
            "conditions {conditions:?}; supercritical share > {SCC_SUPER_MIN}: {sup_share}; \
             subcritical share < {SCC_SUB_MAX}: {sub_share}; identity error {identity:.1e}"
        ),
    }
}

fn heterogeneity() -> Check {
    let wins = (0..ORDERING_SEEDS)
        .filter(|&s| {
            let mut cfg = Experiment::TopologyCompare.preset();
            cfg.seed = s;
            let out = run_topology_compare(&cfg).unwrap();
            let above = out
                .summaries(SCALE_FREE_PARETO)
                .zip(out.summaries(ERDOS_RENYI_EQUAL))
                .any(|(sf, er)| sf.sim_ratio > er.sim_ratio);
            above
        })
        .count();
    let share = wins as f64 / ORDERING_SEEDS as f64;
    Check {
        name: "heterogeneity-ordering",
        pass: share >= ORDERING_SHARE,
        detail: format!("scale-free above Erdos-Renyi at some grid point in {wins} of {ORDERING_SEEDS} seeds"),
    }
}

fn main() -> ExitCode {
    let started = Instant::now();
    let rows = convergence_rows();
    let checks: Vec<fn() -> Check> = vec![
        exact_resilience,
        coupling,
        binomial_oracle,
        amplification,
        generator_tails,
        giant_scc,
        heterogeneity,
    ];
    let mut results = vec![convergence(&rows), fluid_limit(&rows)];
    for check in checks {
        results.push(check());
    }
    let mut unexpected = 0;
    for c in &results {
        let status = if c.pass { "PASS" } else { "FAIL" };
        let note = if !c.pass && EXPECTED_FAIL.contains(&c.name) {
            " (expected)"
        } else {
            if !c.pass {
                unexpected += 1;
            }
            ""
        };
        println!("{status} {}{note}: {}", c.name, c.detail);
    }
    println!("{} criteria, {unexpected} unexpected failures, {:.1?}", results.len(), started.elapsed());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
