//! Largest contagious SCC on generated networks against the rewired
//! configuration model built from the same skeleton.

use contagion::generators::NetworkSpec;
use contagion::percolation::skeleton_scc_experiment;
use contagion::stats::{ks_two_sample, median};

#[test]
fn rewired_model_has_the_same_scc_law() {
    // Condition 7/4 at γ = 0.2: the giant component exists but fluctuates.
    let spec = NetworkSpec::classes(
        1_000,
        vec![(1, 3, 0.25), (2, 3, 0.25), (4, 3, 0.25), (5, 3, 0.25)],
        1.0,
        0.2,
    );
    let trials = skeleton_scc_experiment(&spec, 50, 31).unwrap();
    assert!(trials.iter().all(|t| (t.condition - 1.75).abs() < 1e-12));
    let direct: Vec<f64> = trials.iter().map(|t| t.fraction).collect();
    let rewired: Vec<f64> = trials.iter().map(|t| t.rewired_fraction).collect();
    assert!(median(&direct) > 0.05, "{direct:?}");
    let ks = ks_two_sample(&direct, &rewired);
    assert!(ks.accepted, "D = {} > {}", ks.statistic, ks.critical);
}

#[test]
fn subcritical_skeleton_has_no_giant_component() {
    let spec = NetworkSpec::classes(
        2_000,
        vec![(1, 3, 0.25), (2, 3, 0.25), (4, 3, 0.25), (5, 3, 0.25)],
        1.0,
        0.4,
    );
    let trials = skeleton_scc_experiment(&spec, 10, 3).unwrap();
    let direct: Vec<f64> = trials.iter().map(|t| t.fraction).collect();
    assert!(median(&direct) < 0.02, "{direct:?}");
}
