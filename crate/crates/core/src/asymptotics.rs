//! Large-network limit of the cascade: binomial tails, the cascade response
//! map `I`, its least fixed point, the limiting default fraction, resilience,
//! first-order amplification, branching extinction and the closed-form
//! trajectory of the counter chain.

use crate::error::{Error, Result};
use crate::measures::LimitModel;
use crate::stats::compensated_sum;

/// Degrees up to this use exact binomial coefficients; larger ones use a
/// log-space recursion.
const DIRECT_LIMIT: usize = 64;

fn check_probability(pi: f64) -> Result<()> {
    if (0.0..=1.0).contains(&pi) {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange(pi))
    }
}

fn choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c as f64
}

/// Probability mass function of `Bin(j, π)` on `0..=j`.
fn binomial_pmf(j: usize, pi: f64) -> Vec<f64> {
    if pi == 0.0 || pi == 1.0 {
        let mut v = vec![0.0; j + 1];
        v[if pi == 0.0 { 0 } else { j }] = 1.0;
        return v;
    }
    let q = 1.0 - pi;
    if j <= DIRECT_LIMIT {
        return (0..=j)
            .map(|l| choose(j, l) * pi.powi(l as i32) * q.powi((j - l) as i32))
            .collect();
    }
    let odds = (pi / q).ln();
    let mut log_t = j as f64 * q.ln();
    let mut out = Vec::with_capacity(j + 1);
    for l in 0..=j {
        out.push(log_t.exp());
        if l < j {
            log_t += ((j - l) as f64 / (l + 1) as f64).ln() + odds;
        }
    }
    out
}

/// `P(Bin(j, π) ≥ θ)` for every `θ` in `0..=j`.
///
/// Each tail is summed directly when `θ` lies above the mean and as the
/// complement of the lower sum otherwise, so that small tails keep their
/// relative accuracy.
pub fn binomial_tails(j: usize, pi: f64) -> Result<Vec<f64>> {
    check_probability(pi)?;
    let pmf = binomial_pmf(j, pi);
    let mean = j as f64 * pi;
    let mut upper = vec![0.0; j + 2];
    for l in (0..=j).rev() {
        upper[l] = compensated_sum([upper[l + 1], pmf[l]]);
    }
    let mut lower = vec![0.0; j + 1];
    for l in 1..=j {
        lower[l] = compensated_sum([lower[l - 1], pmf[l - 1]]);
    }
    Ok((0..=j)
        .map(|theta| {
            if theta == 0 {
                1.0
            } else if theta as f64 > mean {
                upper[theta].min(1.0)
            } else {
                (1.0 - lower[theta]).max(0.0)
            }
        })
        .collect())
}

/// `β(j, π, θ) = P(Bin(j, π) ≥ θ)`; zero when `θ > j`.
pub fn binomial_tail(j: usize, pi: f64, theta: usize) -> Result<f64> {
    check_probability(pi)?;
    if theta == 0 {
        return Ok(1.0);
    }
    if theta > j {
        return Ok(0.0);
    }
    let pmf = binomial_pmf(j, pi);
    Ok(if theta as f64 > j as f64 * pi {
        compensated_sum(pmf[theta..].iter().copied()).min(1.0)
    } else {
        (1.0 - compensated_sum(pmf[..theta].iter().copied())).max(0.0)
    })
}

/// Per-class `Σ_θ p(j,k,θ) β(j,π,θ)`, the probability that a node of the
/// class has defaulted when each counterparty defaulted with probability `π`.
fn class_default_probs(model: &LimitModel, pi: f64) -> Vec<f64> {
    model
        .classes()
        .iter()
        .map(|c| {
            if c.p.iter().skip(1).all(|&v| v == 0.0) {
                return c.p[0];
            }
            let tails = binomial_tails(c.j, pi).expect("probability checked by caller");
            compensated_sum(c.p.iter().zip(&tails).map(|(p, b)| p * b))
        })
        .collect()
}

/// Cascade response `I(π) = Σ (μ(j,k) k / λ) Σ_θ p(j,k,θ) β(j,π,θ)`.
pub fn cascade_response(model: &LimitModel, pi: f64) -> Result<f64> {
    check_probability(pi)?;
    let lam = model.lambda();
    let probs = class_default_probs(model, pi);
    Ok(compensated_sum(
        model
            .classes()
            .iter()
            .zip(probs)
            .map(|(c, q)| c.mu * c.k as f64 / lam * q),
    ))
}

/// `g(π) = Σ μ(j,k) Σ_θ p(j,k,θ) β(j,π,θ)`, the default fraction given `π`.
pub fn default_fraction_at(model: &LimitModel, pi: f64) -> Result<f64> {
    check_probability(pi)?;
    let probs = class_default_probs(model, pi);
    Ok(compensated_sum(
        model.classes().iter().zip(probs).map(|(c, q)| c.mu * q),
    ))
}

pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 1_000_000;
pub const DERIVATIVE_STEP: f64 = 1e-6;
pub const NEAR_CRITICAL_BAND: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointResult {
    pub pi_star: f64,
    /// `I'(π*) < 1`.
    pub stable: bool,
    /// `|I'(π*) - 1|` below [`NEAR_CRITICAL_BAND`].
    pub near_critical: bool,
    pub derivative: f64,
    pub iterations: usize,
    pub residual: f64,
}

fn response(model: &LimitModel, pi: f64) -> f64 {
    cascade_response(model, pi.clamp(0.0, 1.0)).expect("clamped")
}

/// Centered difference of `I`, one-sided at the ends of `[0, 1]`.
pub fn response_derivative(model: &LimitModel, pi: f64) -> Result<f64> {
    check_probability(pi)?;
    let h = DERIVATIVE_STEP;
    let lo = (pi - h).max(0.0);
    let hi = (pi + h).min(1.0);
    Ok((response(model, hi) - response(model, lo)) / (hi - lo))
}

/// Least fixed point of `I` on `[0, 1]` by monotone iteration from 0.
///
/// If the iteration has not settled after [`MAX_ITERATIONS`] steps, the
/// first sign change of `I(π) - π` above the last iterate is located on a
/// grid and refined by bisection.
pub fn smallest_fixed_point(model: &LimitModel) -> Result<FixedPointResult> {
    let mut pi = 0.0f64;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        let next = response(model, pi).min(1.0);
        iterations += 1;
        if (next - pi).abs() <= FIXED_POINT_TOL {
            pi = next;
            converged = true;
            break;
        }
        pi = next;
    }
    if !converged {
        pi = bisect_least_root(model, pi)?;
    }
    let residual = (response(model, pi) - pi).abs();
    if residual > FIXED_POINT_TOL && !(pi == 1.0 && response(model, 1.0) >= 1.0 - FIXED_POINT_TOL) {
        return Err(Error::NoConvergence { residual });
    }
    let derivative = response_derivative(model, pi)?;
    Ok(FixedPointResult {
        pi_star: pi,
        stable: derivative < 1.0,
        near_critical: (derivative - 1.0).abs() < NEAR_CRITICAL_BAND,
        derivative,
        iterations,
        residual,
    })
}

fn bisect_least_root(model: &LimitModel, start: f64) -> Result<f64> {
    let f = |x: f64| response(model, x) - x;
    let steps = 1000;
    let mut lo = start;
    let width = (1.0 - start) / steps as f64;
    let mut hi = 1.0;
    for s in 1..=steps {
        let x = start + width * s as f64;
        if f(x) <= 0.0 {
            hi = x;
            break;
        }
        lo = x;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON {
            break;
        }
    }
    Ok(hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `π* = 1`: almost every node defaults.
    Total,
    /// `I'(π*) < 1`.
    Stable,
    /// `I'(π*) ≥ 1`: the limit is not covered by the convergence result.
    Critical,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Total => "total",
            Regime::Stable => "stable",
            Regime::Critical => "critical",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoticFraction {
    pub fraction: f64,
    pub regime: Regime,
    pub fixed_point: FixedPointResult,
}

/// Values of `π*` this close to 1 count as total default.
const TOTAL_TOL: f64 = 1e-10;

/// Limiting fraction of defaults, `g(π*)`.
pub fn asymptotic_fraction(model: &LimitModel) -> Result<AsymptoticFraction> {
    let fp = smallest_fixed_point(model)?;
    if fp.pi_star >= 1.0 - TOTAL_TOL {
        return Ok(AsymptoticFraction {
            fraction: 1.0,
            regime: Regime::Total,
            fixed_point: fp,
        });
    }
    Ok(AsymptoticFraction {
        fraction: default_fraction_at(model, fp.pi_star)?,
        regime: if fp.stable {
            Regime::Stable
        } else {
            Regime::Critical
        },
        fixed_point: fp,
    })
}

/// `Σ (jk/λ) μ(j,k) p(j,k,1)`, the mean number of contagious links reached
/// through one in-link.
pub fn contagion_susceptibility(model: &LimitModel) -> f64 {
    let lam = model.lambda();
    compensated_sum(
        model
            .classes()
            .iter()
            .map(|c| (c.j * c.k) as f64 / lam * c.mu * c.p.get(1).copied().unwrap_or(0.0)),
    )
}

/// Resilience `1 - Σ (jk/λ) μ(j,k) p(j,k,1)`.
pub fn resilience(model: &LimitModel) -> f64 {
    1.0 - contagion_susceptibility(model)
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Amplification {
    /// Predicted final default fraction.
    pub fraction: f64,
    /// `fraction / ε`.
    pub ratio: f64,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "seed fraction must lie in (0, 1], got {epsilon}"
        )))
    }
}

/// Resilience, or a `Supercritical` error when it is not positive.
fn resilient(model: &LimitModel) -> Result<f64> {
    let r = resilience(model);
    if r > 0.0 {
        Ok(r)
    } else {
        Err(Error::Supercritical(r))
    }
}

/// First-order effect of a uniform seed fraction `ε`:
/// `ε (1 + Σ j μ p(·,·,1) / resilience)`.
pub fn amplification(model: &LimitModel, epsilon: f64) -> Result<Amplification> {
    check_epsilon(epsilon)?;
    let r = resilient(model)?;
    let direct = compensated_sum(
        model
            .classes()
            .iter()
            .map(|c| c.j as f64 * c.mu * c.p.get(1).copied().unwrap_or(0.0)),
    );
    let ratio = 1.0 + direct / r;
    Ok(Amplification {
        fraction: epsilon * ratio,
        ratio,
    })
}

/// First-order effect of seeding a fraction `ε` of all nodes, all drawn from
/// the degree class `(d_plus, d_minus)`.
pub fn targeted_amplification(
    model: &LimitModel,
    d_plus: usize,
    d_minus: usize,
    epsilon: f64,
) -> Result<f64> {
    check_epsilon(epsilon)?;
    let r = resilient(model)?;
    let mu = model.mu(d_plus, d_minus);
    if mu <= 0.0 {
        return Err(Error::UnknownClass(d_plus, d_minus));
    }
    let s = 1.0 - r;
    Ok(epsilon * mu * (1.0 + d_minus as f64 / model.lambda() * s / r))
}

/// Extinction probability of the contagious branching process: the least
/// root of `y = Σ (μ(j,k) j / λ)(1 - p(j,k,1) + p(j,k,1) y^k)`.
pub fn branching_extinction(model: &LimitModel) -> f64 {
    if contagion_susceptibility(model) <= 1.0 {
        return 1.0;
    }
    let lam = model.lambda();
    let gen = |y: f64| {
        compensated_sum(model.classes().iter().map(|c| {
            let p1 = c.p.get(1).copied().unwrap_or(0.0);
            c.mu * c.j as f64 / lam * (1.0 - p1 + p1 * y.powi(c.k as i32))
        }))
    };
    let mut y = 0.0f64;
    for _ in 0..MAX_ITERATIONS {
        let next = gen(y).min(1.0);
        if (next - y).abs() <= FIXED_POINT_TOL * 1e-2 {
            return next;
        }
        y = next;
    }
    y
}

fn check_time(model: &LimitModel, tau: f64, closed: bool) -> Result<()> {
    let lambda = model.lambda();
    let ok = tau >= 0.0 && if closed { tau <= lambda } else { tau < lambda };
    if ok {
        Ok(())
    } else {
        Err(Error::TimeOutOfRange { tau, lambda })
    }
}

/// `μ(j,k) p(j,k,θ) C(j,l) (1 - τ/λ)^{j-l} (τ/λ)^l` for every `l` in `0..=j`.
pub fn ode_profile(model: &LimitModel, j: usize, k: usize, theta: usize, tau: f64) -> Result<Vec<f64>> {
    check_time(model, tau, false)?;
    if theta == 0 || theta > j {
        return Ok(vec![0.0; j + 1]);
    }
    let weight = model.mu(j, k) * model.p(j, k, theta);
    let pmf = binomial_pmf(j, tau / model.lambda());
    Ok(pmf.into_iter().map(|b| weight * b).collect())
}

/// Limit of `S^{j,k,θ,l}(τ n) / n`, the solvent nodes of class `(j, k, θ)`
/// with `l` defaulted counterparties.
pub fn ode_solution(
    model: &LimitModel,
    j: usize,
    k: usize,
    theta: usize,
    l: usize,
    tau: f64,
) -> Result<f64> {
    if !(l < theta && theta <= j) {
        return Err(Error::InvalidParameter(format!(
            "need l < theta <= j, got l={l}, theta={theta}, j={j}"
        )));
    }
    check_time(model, tau, false)?;
    let x = tau / model.lambda();
    Ok(model.mu(j, k)
        * model.p(j, k, theta)
        * choose(j, l)
        * (1.0 - x).powi((j - l) as i32)
        * x.powi(l as i32))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaValues {
    /// `(j, k, θ, δ^{j,k,θ}(τ))` for classes with non-zero threshold mass.
    pub per_class: Vec<(usize, usize, usize, f64)>,
    /// `δ⁻(τ) = λ (I(τ/λ) - τ/λ)`.
    pub minus: f64,
    /// `δ(τ) = Σ δ^{j,k,θ}(τ)`.
    pub total: f64,
}

/// Limits of the defaulted-node counters at rescaled time `τ`.
pub fn delta_functions(model: &LimitModel, tau: f64) -> Result<DeltaValues> {
    check_time(model, tau, true)?;
    let lam = model.lambda();
    let x = (tau / lam).min(1.0);
    let mut per_class = Vec::new();
    for c in model.classes() {
        if c.p.iter().all(|&v| v == 0.0) {
            continue;
        }
        let tails = binomial_tails(c.j, x)?;
        for (theta, (&p, &b)) in c.p.iter().zip(&tails).enumerate() {
            if p != 0.0 {
                per_class.push((c.j, c.k, theta, c.mu * p * b));
            }
        }
    }
    let total = compensated_sum(per_class.iter().map(|e| e.3));
    let minus = lam * (cascade_response(model, x)? - x);
    Ok(DeltaValues {
        per_class,
        minus,
        total,
    })
}
