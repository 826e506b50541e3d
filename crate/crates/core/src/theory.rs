//! Information-theoretic accuracy bounds for single-pass reasoning.
//!
//! All quantities are in bits (base-2 logarithms). The central relation is
//! the Fano-style constraint
//!
//! ```text
//! h(Acc) + (1 - Acc) * log2(|A| - 1) >= beta - C
//! ```
//!
//! linking the answer entropy `beta` that must be resolved, the output
//! capacity `C` of one forward pass, and the best attainable accuracy. The
//! linear and uniform bounds are successive relaxations of it, and the
//! demand model `beta(h, L) = beta0 + alpha * L * gamma^(h-1)` turns the
//! uniform bound into a testable prediction over hop count and context length.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, TheoryError>;

fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(TheoryError::Domain(msg.into()))
}

/// Demand and capacity parameters `(beta0, alpha, gamma, C)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Baseline complexity in bits.
    pub beta0: f64,
    /// Context burden in bits per token.
    pub alpha: f64,
    /// Hop amplification factor.
    pub gamma: f64,
    /// Effective single-pass output capacity in bits.
    pub capacity: f64,
}

impl BoundParams {
    pub fn new(beta0: f64, alpha: f64, gamma: f64, capacity: f64) -> Result<Self> {
        let p = BoundParams { beta0, alpha, gamma, capacity };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return domain(format!("alpha must be > 0, got {}", self.alpha));
        }
        if !(self.gamma >= 1.0 && self.gamma.is_finite()) {
            return domain(format!("gamma must be >= 1, got {}", self.gamma));
        }
        if !(self.beta0 >= 0.0 && self.beta0.is_finite()) {
            return domain(format!("beta0 must be >= 0, got {}", self.beta0));
        }
        if !(self.capacity >= 0.0 && self.capacity.is_finite()) {
            return domain(format!("capacity must be >= 0, got {}", self.capacity));
        }
        Ok(())
    }
}

/// A cell of the task grid: hop count and effective context length in tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskPoint {
    pub hops: u32,
    pub context_len: u32,
}

impl TaskPoint {
    pub fn new(hops: u32, context_len: u32) -> Result<Self> {
        if hops < 1 {
            return domain("hops must be >= 1");
        }
        Ok(TaskPoint { hops, context_len })
    }
}

/// Size of the answer space; at least two candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnswerSpace(u64);

impl AnswerSpace {
    pub fn new(size: u64) -> Result<Self> {
        if size < 2 {
            return domain(format!("answer space needs at least 2 candidates, got {size}"));
        }
        Ok(AnswerSpace(size))
    }

    pub fn size(self) -> u64 {
        self.0
    }

    pub fn log2_size(self) -> f64 {
        (self.0 as f64).log2()
    }

    fn log2_size_minus_one(self) -> f64 {
        ((self.0 - 1) as f64).log2()
    }
}

/// Per-step error rate and number of bridge entities of a reasoning chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSpec {
    pub eps: f64,
    pub bridges: u32,
}

impl ChainSpec {
    pub fn new(eps: f64, bridges: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return domain(format!("eps must lie in [0, 1], got {eps}"));
        }
        Ok(ChainSpec { eps, bridges })
    }
}

/// Lower bound on end-to-end chain success and its first-order approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSuccess {
    /// `(1 - eps)^(K + 1)`.
    pub exact: f64,
    /// `1 - (K + 1) * eps`, clamped to `[0, 1]`.
    pub linear: f64,
}

/// Binary entropy `h(p)` in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("probability must lie in [0, 1], got {p}"));
    }
    Ok(entropy_unchecked(p))
}

fn entropy_unchecked(p: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Left-hand side of the Fano constraint as a function of accuracy.
fn fano_lhs(acc: f64, log2_alternatives: f64) -> f64 {
    entropy_unchecked(acc) + (1.0 - acc) * log2_alternatives
}

const BISECTION_TOL: f64 = 1e-9;
const BISECTION_MAX_ITER: usize = 200;

/// Largest accuracy compatible with the Fano constraint.
///
/// The left-hand side is concave in `Acc`, peaks at `log2|A|` when
/// `Acc = 1/|A|` and falls to 0 at `Acc = 1`, so the feasible set is an
/// interval whose right end lies on the decreasing branch. That end is found
/// by bisection; the returned value is always on the feasible side.
pub fn max_accuracy_exact(beta: f64, space: AnswerSpace, capacity: f64) -> f64 {
    let slack = beta - capacity;
    if slack <= 0.0 {
        return 1.0;
    }
    let log_alt = space.log2_size_minus_one();
    let peak_at = 1.0 / space.size() as f64;
    if fano_lhs(peak_at, log_alt) < slack {
        return 0.0;
    }
    let (mut lo, mut hi) = (peak_at, 1.0);
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo <= BISECTION_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if fano_lhs(mid, log_alt) >= slack {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `min{1, 1 - (beta - C - 1) / log2|A|}`, clamped below at 0.
pub fn linear_accuracy_bound(beta: f64, space: AnswerSpace, capacity: f64) -> f64 {
    (1.0 - (beta - capacity - 1.0) / space.log2_size()).clamp(0.0, 1.0)
}

/// `min{1, (C + 1) / beta}` for `beta > 0`.
pub fn uniform_accuracy_bound(beta: f64, capacity: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return domain(format!("beta must be > 0, got {beta}"));
    }
    Ok(((capacity + 1.0) / beta).min(1.0))
}

/// `beta(h, L) = beta0 + alpha * L * gamma^(h-1)`.
pub fn demand(params: &BoundParams, point: TaskPoint) -> f64 {
    params.beta0 + context_burden(params.alpha, params.gamma, point)
}

/// The `alpha * L * gamma^(h-1)` part of the demand.
pub fn context_burden(alpha: f64, gamma: f64, point: TaskPoint) -> f64 {
    alpha * f64::from(point.context_len) * gamma.powi(point.hops as i32 - 1)
}

/// The uniform bound evaluated at the modelled demand.
pub fn plugin_accuracy_bound(params: &BoundParams, point: TaskPoint) -> Result<f64> {
    uniform_accuracy_bound(demand(params, point), params.capacity)
}

pub fn chain_success_lower(spec: ChainSpec) -> ChainSuccess {
    let steps = f64::from(spec.bridges) + 1.0;
    ChainSuccess {
        exact: (1.0 - spec.eps).powf(steps),
        linear: (1.0 - steps * spec.eps).clamp(0.0, 1.0),
    }
}

fn check_vocab(vocab: u64) -> Result<()> {
    if vocab < 2 {
        return domain(format!("vocabulary needs at least 2 symbols, got {vocab}"));
    }
    Ok(())
}

/// Entropy budget of outputs of exactly `m` tokens: `m * log2|V|`.
pub fn capacity_fixed_length(m: u64, vocab: u64) -> Result<f64> {
    check_vocab(vocab)?;
    Ok(m as f64 * (vocab as f64).log2())
}

/// Entropy budget of outputs of at most `m` tokens:
/// `log2((|V|^(m+1) - 1) / (|V| - 1))`, evaluated in log space.
pub fn capacity_variable_length(m: u64, vocab: u64) -> Result<f64> {
    check_vocab(vocab)?;
    let v = vocab as f64;
    let n = m as f64 + 1.0;
    // log2(1 - V^-(m+1)) via ln_1p; the argument underflows to 0 for large m.
    let tail = (-(-n * v.ln()).exp()).ln_1p() / std::f64::consts::LN_2;
    Ok((n * v.log2() + tail - (v - 1.0).log2()).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub beta: f64,
    pub acc_cap: f64,
}

/// Evenly spaced samples of the uniform bound over `[beta_min, beta_max]`.
pub fn emit_bound_curve(
    capacity: f64,
    beta_min: f64,
    beta_max: f64,
    n_points: usize,
) -> Result<Vec<CurvePoint>> {
    if !(beta_min > 0.0 && beta_min < beta_max && beta_max.is_finite()) {
        return domain(format!(
            "need 0 < beta_min < beta_max, got [{beta_min}, {beta_max}]"
        ));
    }
    if n_points < 2 {
        return domain(format!("need at least 2 points, got {n_points}"));
    }
    if !(capacity >= 0.0) {
        return domain(format!("capacity must be >= 0, got {capacity}"));
    }
    let step = (beta_max - beta_min) / (n_points - 1) as f64;
    (0..n_points)
        .map(|i| {
            let beta = if i + 1 == n_points { beta_max } else { beta_min + step * i as f64 };
            Ok(CurvePoint { beta, acc_cap: uniform_accuracy_bound(beta, capacity)? })
        })
        .collect()
}

/// Writes `beta,acc_cap` CSV, one row per point.
pub fn write_curve_csv<W: Write>(mut out: W, curve: &[CurvePoint]) -> std::io::Result<()> {
    writeln!(out, "beta,acc_cap")?;
    for p in curve {
        writeln!(out, "{},{}", p.beta, p.acc_cap)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DIRECT: BoundParams = BoundParams { beta0: 40.0, alpha: 0.01, gamma: 3.0, capacity: 67.5 };

    fn space(n: u64) -> AnswerSpace {
        AnswerSpace::new(n).unwrap()
    }

    /// Largest accuracy on a 1e-6 grid satisfying the Fano constraint,
    /// scanning down from 1 so the first hit is the maximum.
    fn brute_force_max_accuracy(beta: f64, n: u64, capacity: f64) -> f64 {
        let log_alt = ((n - 1) as f64).log2();
        let slack = beta - capacity;
        let steps = 1_000_000u32;
        for i in (0..=steps).rev() {
            let acc = f64::from(i) / f64::from(steps);
            let h = if acc <= 0.0 || acc >= 1.0 {
                0.0
            } else {
                -acc * acc.log2() - (1.0 - acc) * (1.0 - acc).log2()
            };
            if h + (1.0 - acc) * log_alt >= slack {
                return acc;
            }
        }
        0.0
    }

    #[test]
    fn binary_entropy_examples() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        let hand = -0.25 * 0.25f64.log2() - 0.75 * 0.75f64.log2();
        assert!((binary_entropy(0.25).unwrap() - hand).abs() < 1e-15);
        assert!((hand - 0.811_278_1).abs() < 1e-7);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn exact_bound_examples() {
        for n in [2, 4, 1000] {
            assert_eq!(max_accuracy_exact(5.0, space(n), 5.0), 1.0);
        }
        assert!((max_accuracy_exact(1.0, space(2), 0.0) - 0.5).abs() < 1e-8);
        let oracle = brute_force_max_accuracy(1.0, 4, 0.0);
        let got = max_accuracy_exact(1.0, space(4), 0.0);
        assert!(got >= 0.25 && got <= 1.0);
        assert!((got - oracle).abs() < 1e-5, "{got} vs {oracle}");
    }

    #[test]
    fn exact_bound_beyond_branch_maximum_is_zero() {
        // log2(8) = 3 is the largest attainable left-hand side.
        assert_eq!(max_accuracy_exact(3.5, space(8), 0.0), 0.0);
        assert!((max_accuracy_exact(3.0, space(8), 0.0) - 0.125).abs() < 1e-8);
    }

    #[test]
    fn linear_bound_examples() {
        assert_eq!(linear_accuracy_bound(11.0, space(16), 10.0), 1.0);
        assert!((linear_accuracy_bound(6.0, space(1024), 0.0) - 0.5).abs() < 1e-12);
        assert_eq!(linear_accuracy_bound(3.0, space(2), 0.0), 0.0);
    }

    #[test]
    fn uniform_bound_examples() {
        assert_eq!(uniform_accuracy_bound(100.0, 200.0).unwrap(), 1.0);
        assert_eq!(uniform_accuracy_bound(402.0, 200.0).unwrap(), 0.5);
        assert_eq!(uniform_accuracy_bound(201.0, 200.0).unwrap(), 1.0);
        assert!(uniform_accuracy_bound(201.0 + 1e-9, 200.0).unwrap() < 1.0);
        assert!(uniform_accuracy_bound(0.0, 200.0).is_err());
        assert!(uniform_accuracy_bound(-1.0, 200.0).is_err());
    }

    #[test]
    fn demand_examples() {
        let p = BoundParams::new(40.0, 0.01, 3.0, 67.5).unwrap();
        assert_eq!(demand(&p, TaskPoint::new(1, 0).unwrap()), 40.0);
        assert!((demand(&p, TaskPoint::new(2, 1000).unwrap()) - 70.0).abs() < 1e-12);
        let cot = BoundParams::new(0.0, 0.01, 2.076, 131.0).unwrap();
        let hand = 0.01 * 8000.0 * 2.076 * 2.076 * 2.076;
        let got = demand(&cot, TaskPoint::new(4, 8000).unwrap());
        assert!((got - hand).abs() < 1e-9);
        // The commonly quoted figure is a rounded hand evaluation.
        assert!((got - 715.6).abs() < 0.2);
    }

    #[test]
    fn plugin_bound_examples() {
        let at = |h, l| plugin_accuracy_bound(&DIRECT, TaskPoint::new(h, l).unwrap()).unwrap();
        assert_eq!(at(1, 0), 1.0);
        assert!((at(2, 1000) - 68.5 / 70.0).abs() < 1e-12);
        assert!((at(2, 1000) - 0.9786).abs() < 1e-4);
        assert!((at(4, 10000) - 68.5 / 2740.0).abs() < 1e-12);
        let zero = BoundParams { beta0: 0.0, ..DIRECT };
        assert!(plugin_accuracy_bound(&zero, TaskPoint::new(1, 0).unwrap()).is_err());
    }

    #[test]
    fn chain_success_examples() {
        for k in [0, 3, 10] {
            let s = chain_success_lower(ChainSpec::new(0.0, k).unwrap());
            assert_eq!((s.exact, s.linear), (1.0, 1.0));
        }
        let s = chain_success_lower(ChainSpec::new(0.1, 3).unwrap());
        assert!((s.exact - 0.6561).abs() < 1e-12);
        assert!((s.linear - 0.6).abs() < 1e-12);
        let s = chain_success_lower(ChainSpec::new(1.0, 0).unwrap());
        assert_eq!((s.exact, s.linear), (0.0, 0.0));
        assert!(ChainSpec::new(1.1, 0).is_err());
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(capacity_fixed_length(1, 2).unwrap(), 1.0);
        assert_eq!(capacity_fixed_length(0, 151_936).unwrap(), 0.0);
        let big = capacity_fixed_length(4096, 151_936).unwrap();
        assert!((big - 4096.0 * (151_936f64).ln() / std::f64::consts::LN_2).abs() < 1e-6);
        assert!((big - 70_506.0).abs() < 2.0);

        assert_eq!(capacity_variable_length(0, 7).unwrap(), 0.0);
        assert!((capacity_variable_length(1, 2).unwrap() - 3f64.log2()).abs() < 1e-12);
        assert!((capacity_variable_length(2, 3).unwrap() - 13f64.log2()).abs() < 1e-12);
        let huge = capacity_variable_length(4096, 151_936).unwrap();
        assert!(huge.is_finite() && huge > big);
        assert!(capacity_variable_length(3, 1).is_err());
    }

    #[test]
    fn variable_length_matches_direct_count_for_small_cases() {
        // Direct enumeration: 1 + V + ... + V^m sequences.
        for vocab in 2u64..6 {
            for m in 0u64..8 {
                let count: u64 = (0..=m).map(|k| vocab.pow(k as u32)).sum();
                let got = capacity_variable_length(m, vocab).unwrap();
                assert!((got - (count as f64).log2()).abs() < 1e-9, "V={vocab} m={m}");
            }
        }
    }

    #[test]
    fn curve_examples() {
        let flat = emit_bound_curve(200.0, 50.0, 201.0, 17).unwrap();
        assert!(flat.iter().all(|p| p.acc_cap == 1.0));
        let two = emit_bound_curve(200.0, 201.0, 402.0, 2).unwrap();
        assert_eq!(
            two,
            vec![CurvePoint { beta: 201.0, acc_cap: 1.0 }, CurvePoint { beta: 402.0, acc_cap: 0.5 }]
        );
        assert!(emit_bound_curve(200.0, 0.0, 10.0, 5).is_err());
        assert!(emit_bound_curve(200.0, 10.0, 10.0, 5).is_err());
        assert!(emit_bound_curve(200.0, 1.0, 10.0, 1).is_err());

        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &two).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "beta,acc_cap\n201,1\n402,0.5\n");
    }

    #[test]
    fn params_validation() {
        assert!(BoundParams::new(0.0, 0.0, 2.0, 1.0).is_err());
        assert!(BoundParams::new(0.0, 0.1, 0.9, 1.0).is_err());
        assert!(BoundParams::new(-1.0, 0.1, 2.0, 1.0).is_err());
        assert!(BoundParams::new(0.0, 0.1, 2.0, -1.0).is_err());
        assert!(TaskPoint::new(0, 10).is_err());
        assert!(AnswerSpace::new(1).is_err());
    }

    proptest! {
        #[test]
        fn entropy_symmetric_and_bounded(p in 0.0f64..=1.0) {
            let a = binary_entropy(p).unwrap();
            let b = binary_entropy(1.0 - p).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn relaxation_chain_holds(beta in 0.0f64..40.0, cap in 0.0f64..30.0, n in 2u64..100_000) {
            let s = space(n);
            let exact = max_accuracy_exact(beta, s, cap);
            let linear = linear_accuracy_bound(beta, s, cap);
            prop_assert!(exact <= linear + 1e-12);
            prop_assert!(linear <= 1.0);
            if beta >= s.log2_size() {
                prop_assert!(exact <= uniform_accuracy_bound(beta, cap).unwrap() + 1e-12);
            }
        }

        #[test]
        fn uniform_bound_monotone(b1 in 0.1f64..1000.0, db in 0.0f64..500.0, c in 0.0f64..400.0, dc in 0.0f64..100.0) {
            let base = uniform_accuracy_bound(b1, c).unwrap();
            prop_assert!(uniform_accuracy_bound(b1 + db, c).unwrap() <= base);
            prop_assert!(uniform_accuracy_bound(b1, c + dc).unwrap() >= base);
            prop_assert_eq!(base == 1.0, b1 <= c + 1.0);
        }

        #[test]
        fn demand_monotone(h in 1u32..6, l in 0u32..20_000, dl in 1u32..1000, g in 1.0f64..3.0, a in 1e-4f64..1e-1, b0 in 0.0f64..200.0) {
            let p = BoundParams::new(b0, a, g, 10.0).unwrap();
            let at = |h, l| demand(&p, TaskPoint { hops: h, context_len: l });
            prop_assert!(at(h, l + dl) > at(h, l));
            if g > 1.0 && l > 0 {
                prop_assert!(at(h + 1, l) > at(h, l));
            }
        }

        #[test]
        fn chain_exact_dominates_linear(eps in 0.0f64..=1.0, k in 0u32..50) {
            let s = chain_success_lower(ChainSpec::new(eps, k).unwrap());
            prop_assert!(s.exact >= s.linear - 1e-12);
        }

        #[test]
        fn variable_length_capacity_brackets(m in 1u64..5000, v in 2u64..200_000) {
            let fixed = capacity_fixed_length(m, v).unwrap();
            let var = capacity_variable_length(m, v).unwrap();
            let upper = capacity_fixed_length(m + 1, v).unwrap();
            prop_assert!(var >= fixed);
            prop_assert!(var < upper);
        }
    }
}
