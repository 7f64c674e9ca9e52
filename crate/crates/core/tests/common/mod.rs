#![allow(dead_code)]

use contagion::network::DegreeSequence;
use contagion::rng;
use contagion::FinancialNetwork;
use rand::Rng;

/// Degree sequence, per-node weights, capital ratios and recovery rate.
pub struct Instance {
    pub degrees: DegreeSequence,
    pub weights: Vec<Vec<f64>>,
    pub gammas: Vec<f64>,
    pub recovery: f64,
}

/// A random instance with `n <= max_n`: out-degrees uniform, Poisson-like or
/// heavy-tailed; in-stubs spread uniformly or preferentially; weights equal,
/// uniform or Pareto; some zero-capital nodes.
pub fn random_instance(seed: u64, max_n: usize) -> Instance {
    let mut r = rng::stream(seed, "test-instance");
    let n = r.gen_range(2..=max_n);
    let d_plus: Vec<usize> = match r.gen_range(0..3) {
        0 => (0..n).map(|_| r.gen_range(0..=4)).collect(),
        1 => (0..n).map(|_| (0..6).filter(|_| r.gen_bool(0.4)).count()).collect(),
        _ => (0..n)
            .map(|_| (r.gen::<f64>().powf(-1.0 / 1.5)).floor().min(n as f64) as usize)
            .collect(),
    };
    let m: usize = d_plus.iter().sum();
    let mut d_minus = vec![0usize; n];
    let preferential = r.gen_bool(0.5);
    for _ in 0..m {
        let v = if preferential {
            let total: usize = d_plus.iter().map(|d| d + 1).sum();
            let mut x = r.gen_range(0..total);
            let mut v = 0;
            while x > d_plus[v] {
                x -= d_plus[v] + 1;
                v += 1;
            }
            v
        } else {
            r.gen_range(0..n)
        };
        d_minus[v] += 1;
    }
    let kind = r.gen_range(0..3);
    let weights = d_plus
        .iter()
        .map(|&d| {
            (0..d)
                .map(|_| match kind {
                    0 => 1.0,
                    1 => r.gen_range(0.1..5.0),
                    _ => r.gen::<f64>().powf(-1.0 / 2.61),
                })
                .collect()
        })
        .collect();
    let seed_prob = r.gen_range(0.0..0.2);
    let gamma_hi = r.gen_range(0.05..1.0);
    let gammas = (0..n)
        .map(|_| if r.gen_bool(seed_prob) { 0.0 } else { r.gen_range(0.0..gamma_hi) })
        .collect();
    let recovery = if r.gen_bool(0.5) { 0.0 } else { r.gen_range(0.0..0.6) };
    Instance {
        degrees: DegreeSequence::new(d_plus, d_minus).unwrap(),
        weights,
        gammas,
        recovery,
    }
}

/// Default sets straight from the definition: starting from the empty set,
/// repeat `D ← {i : γ(i) = 0 or capital(i) < Σ_{j ∈ D} (1 - R) e(i, j)}`
/// until nothing changes.
/// Returns every round's set.
pub fn brute_force_rounds(net: &FinancialNetwork) -> Vec<Vec<bool>> {
    let n = net.n();
    let step = |d: &[bool]| -> Vec<bool> {
        (0..n)
            .map(|i| {
                let loss: f64 = net
                    .exposures(i)
                    .iter()
                    .filter(|e| d[e.counterparty])
                    .map(|e| (1.0 - net.recovery()) * e.weight)
                    .sum();
                let capital = net.gamma(i) * net.exposures(i).iter().map(|e| e.weight).sum::<f64>();
                net.gamma(i) == 0.0 || capital < loss
            })
            .collect()
    };
    let mut rounds = vec![step(&vec![false; n])];
    loop {
        let next = step(rounds.last().unwrap());
        if &next == rounds.last().unwrap() {
            return rounds;
        }
        rounds.push(next);
    }
}

pub fn members(flags: &[bool]) -> Vec<usize> {
    flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect()
}
