//! Delay-violation exponent I(r, T) of a queue with batch service rNT every
//! T slots and delay bound D, plus its integer-relaxed lower bound
//! I_ir(r, T) = δ_r · r · (D + 1 − 2T).
//!
//! The exact exponent is
//!
//! ```text
//! I(r, T) = min_{t ≥ 0, m(t) > 0}  m(t) · Λ*( r + (D + 1 − 2T) r / m(t) ),   m(t) = tT + T − 1 − k
//! ```
//!
//! with k = D mod T. Since τ ↦ τ Λ*(r + c/τ) is the perspective of a convex
//! function, the objective is a convex sequence in t. The minimizer is
//! bracketed by galloping, narrowed by integer ternary search and confirmed
//! by a short linear scan that stops after three consecutive increases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rate_models::ArrivalModel;
use crate::scalar::Real;

/// Consecutive increases that end the confirming scan.
const HYSTERESIS: u32 = 3;
/// Hard ceiling on batch indices, independent of the stability margin.
const ABSOLUTE_CAP: u64 = 1 << 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentQuery<S> {
    /// Multiplexing gain.
    pub r: S,
    /// Coding duration in slots.
    pub t: u32,
    /// Delay bound in slots.
    pub d: u32,
}

impl<S: Real> ExponentQuery<S> {
    pub fn new(r: S, t: u32, d: u32) -> Self {
        ExponentQuery { r, t, d }
    }

    /// k = D mod T.
    pub fn residue(&self) -> u32 {
        self.d % self.t
    }

    fn validate(&self) -> Result<()> {
        if self.t == 0 || self.d < 2 || self.t > self.d / 2 {
            return Err(Error::domain(format!(
                "coding duration T = {} outside {{1, ..., floor(D/2)}} for D = {}",
                self.t, self.d
            )));
        }
        if !self.r.is_finite() {
            return Err(Error::domain(format!(
                "multiplexing gain must be finite, got {}",
                self.r
            )));
        }
        Ok(())
    }

    /// (D + 1 − 2T), always ≥ 1 for a valid query.
    fn slack(&self) -> S {
        S::from_count(u64::from(self.d + 1 - 2 * self.t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentResult<S> {
    pub i_exact: S,
    /// Minimizing batch index t.
    pub t_argmin: u64,
    pub i_relaxed: S,
    /// D mod T.
    pub k: u32,
}

/// I_ir(r, T) = δ_r r (D + 1 − 2T).
pub fn exponent_relaxed<S: Real>(model: &ArrivalModel<S>, q: &ExponentQuery<S>) -> Result<S> {
    q.validate()?;
    model.require_stable(q.r)?;
    let delta = model.delta_r(q.r)?;
    Ok(delta * q.r * q.slack())
}

/// Exact exponent and its minimizing batch index, together with the relaxed bound.
pub fn exponent_exact<S: Real>(
    model: &ArrivalModel<S>,
    q: &ExponentQuery<S>,
) -> Result<ExponentResult<S>> {
    q.validate()?;
    model.require_stable(q.r)?;
    let k = q.residue();
    let i_relaxed = exponent_relaxed(model, q)?;

    let period = u64::from(q.t);
    let offset = u64::from(q.t - 1 - k);
    let excess = q.slack() * q.r;
    let objective = |t: u64| -> S {
        let m = S::from_count(t * period + offset);
        match model.conjugate(q.r + excess / m) {
            Ok(v) if !v.is_nan() => m * v,
            _ => S::infinity(),
        }
    };

    let first = if offset > 0 { 0 } else { 1 };
    let cap = scan_cap(model, q, period);
    let (i_exact, t_argmin) = minimize_convex_sequence(objective, first, cap)?;
    Ok(ExponentResult {
        i_exact,
        t_argmin,
        i_relaxed,
        k,
    })
}

/// t ≤ 10 (D + 1) max(1, 1/(r − λ)), clipped so m(t) stays representable.
fn scan_cap<S: Real>(model: &ArrivalModel<S>, q: &ExponentQuery<S>, period: u64) -> u64 {
    let margin = (q.r - model.mean_rate()).as_f64();
    let scale = (1.0 / margin).max(1.0);
    let cap = 10.0 * f64::from(q.d + 1) * scale;
    let hard = ABSOLUTE_CAP / period;
    if cap.is_finite() && cap < hard as f64 {
        (cap.ceil() as u64).max(2)
    } else {
        hard
    }
}

/// Minimum of a convex (possibly `+∞`-prefixed) sequence over `first..=cap`.
/// Returns the smallest minimizing index on ties.
fn minimize_convex_sequence<S: Real>(
    f: impl Fn(u64) -> S,
    first: u64,
    cap: u64,
) -> Result<(S, u64)> {
    // The argument of Λ* shrinks as t grows, so infinite terms form a prefix.
    let mut start = first;
    if f(start).is_infinite() {
        let mut infinite = start;
        let mut step = 1u64;
        let finite = loop {
            let probe = infinite.saturating_add(step).min(cap);
            if f(probe).is_finite() {
                break probe;
            }
            if probe == cap {
                return Ok((S::infinity(), first));
            }
            infinite = probe;
            step = step.saturating_mul(2);
        };
        let (mut lo, mut hi) = (infinite, finite);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if f(mid).is_finite() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        start = hi;
    }

    // Gallop until the sequence stops decreasing.
    let mut before = start;
    let mut prev = start;
    let mut prev_val = f(start);
    let mut step = 1u64;
    let upper = loop {
        let next = prev.saturating_add(step).min(cap);
        if next == prev {
            return Err(Error::ScanCapReached { cap });
        }
        let val = f(next);
        if val >= prev_val {
            break next;
        }
        before = prev;
        prev = next;
        prev_val = val;
        step = step.saturating_mul(2);
    };

    let (mut lo, mut hi) = (before, upper);
    while hi - lo > 6 {
        let m1 = lo + (hi - lo) / 3;
        let m2 = hi - (hi - lo) / 3;
        let (f1, f2) = (f(m1), f(m2));
        if f1 < f2 {
            hi = m2;
        } else if f1 > f2 {
            lo = m1;
        } else {
            lo = m1;
            hi = m2;
        }
    }

    let mut best = (S::infinity(), lo);
    let from = lo.saturating_sub(u64::from(HYSTERESIS)).max(start);
    let mut last = S::infinity();
    let mut rises = 0;
    let mut t = from;
    while t <= cap {
        let v = f(t);
        if v < best.0 {
            best = (v, t);
        }
        rises = if v > last { rises + 1 } else { 0 };
        last = v;
        if t >= hi && rises >= HYSTERESIS {
            break;
        }
        t += 1;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cpe(lambda: f64, mu: f64) -> ArrivalModel<f64> {
        ArrivalModel::cpe(lambda, mu).unwrap()
    }

    /// Plain scan over t, straight from the definition.
    fn brute_force(lambda: f64, mu: f64, r: f64, t: u32, d: u32, t_max: u64) -> (f64, u64) {
        let k = d % t;
        let c = f64::from(d + 1 - 2 * t) * r;
        let mut best = (f64::INFINITY, 0);
        for i in 0..=t_max {
            let m = i as f64 * f64::from(t) + f64::from(t) - 1.0 - f64::from(k);
            if m <= 0.0 {
                continue;
            }
            let v = m * mu * ((r + c / m).sqrt() - lambda.sqrt()).powi(2);
            if v < best.0 {
                best = (v, i);
            }
        }
        best
    }

    #[test]
    fn worked_example() {
        let (oracle, t_oracle) = brute_force(0.5, 1.0, 0.75, 5, 21, 50);
        assert_eq!(t_oracle, 4);
        assert_abs_diff_eq!(oracle, 3.000_899_292_211_892, epsilon = 1e-12);
        let res = exponent_exact(&cpe(0.5, 1.0), &ExponentQuery::new(0.75, 5, 21)).unwrap();
        assert_eq!(res.k, 1);
        assert_eq!(res.t_argmin, 4);
        assert_abs_diff_eq!(res.i_exact, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(res.i_relaxed, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn near_critical_load_vanishes() {
        let res = exponent_exact(&cpe(0.5, 1.0), &ExponentQuery::new(0.5 + 1e-9, 1, 4)).unwrap();
        assert!(res.i_exact < 1e-6, "{res:?}");
        assert!(res.i_exact >= res.i_relaxed * (1.0 - 1e-6));
    }

    #[test]
    fn short_delay_example() {
        let (oracle, t_oracle) = brute_force(0.5, 1.0, 0.6, 1, 4, 200);
        let res = exponent_exact(&cpe(0.5, 1.0), &ExponentQuery::new(0.6, 1, 4)).unwrap();
        assert_abs_diff_eq!(res.i_exact, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(res.i_exact, 0.3, epsilon = 1e-9);
        assert!((10..=20).contains(&res.t_argmin));
        assert!(res.t_argmin.abs_diff(t_oracle) <= 1);
    }

    #[test]
    fn relaxed_examples() {
        let m = cpe(0.5, 1.0);
        assert_abs_diff_eq!(
            exponent_relaxed(&m, &ExponentQuery::new(0.75, 5, 21)).unwrap(),
            3.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            exponent_relaxed(&m, &ExponentQuery::new(0.6, 1, 4)).unwrap(),
            0.3,
            epsilon = 1e-12
        );
    }

    #[test]
    fn relaxed_vanishes_when_slack_is_zero() {
        // D + 1 − 2T = 0 needs T = (D + 1)/2 > floor(D/2), which the query rejects
        let m = cpe(0.5, 1.0);
        assert!(matches!(
            exponent_relaxed(&m, &ExponentQuery::new(0.75, 11, 21)),
            Err(Error::Domain(_))
        ));
        // the formula itself is linear in the slack
        let per_unit = m.delta_r(0.75).unwrap() * 0.75;
        assert_abs_diff_eq!(
            exponent_relaxed(&m, &ExponentQuery::new(0.75, 10, 20)).unwrap(),
            per_unit,
            epsilon = 1e-15
        );
    }

    #[test]
    fn errors() {
        let m = cpe(0.5, 1.0);
        assert!(matches!(
            exponent_exact(&m, &ExponentQuery::new(0.5, 2, 21)),
            Err(Error::Unstable { .. })
        ));
        assert!(matches!(
            exponent_exact(&m, &ExponentQuery::new(0.4, 2, 21)),
            Err(Error::Unstable { .. })
        ));
        assert!(matches!(
            exponent_exact(&m, &ExponentQuery::new(0.7, 11, 21)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            exponent_exact(&m, &ExponentQuery::new(0.7, 0, 21)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            exponent_relaxed(&m, &ExponentQuery::new(0.5, 1, 21)),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn matches_brute_force_on_grid() {
        for &lambda in &[0.25, 0.5, 0.75] {
            for &mu in &[0.1, 1.0, 10.0] {
                for &d in &[11u32, 21] {
                    for t in 1..=d / 2 {
                        for j in 1..=10 {
                            let r = lambda + (1.0 - lambda) * j as f64 / 11.0;
                            let (oracle, _) = brute_force(lambda, mu, r, t, d, 3_000);
                            let res =
                                exponent_exact(&cpe(lambda, mu), &ExponentQuery::new(r, t, d))
                                    .unwrap();
                            assert!(
                                (res.i_exact - oracle).abs() <= 1e-12 * oracle.max(1.0),
                                "lambda={lambda} mu={mu} d={d} t={t} r={r}: {} vs {oracle}",
                                res.i_exact
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn t_zero_included_when_offset_positive() {
        // T = 5, D = 20 gives k = 0 and m(0) = 4 > 0
        let m = cpe(0.25, 0.05);
        let res = exponent_exact(&m, &ExponentQuery::new(0.95, 5, 20)).unwrap();
        let (oracle, t_oracle) = brute_force(0.25, 0.05, 0.95, 5, 20, 100);
        assert_eq!(res.t_argmin, t_oracle);
        assert_abs_diff_eq!(res.i_exact, oracle, epsilon = 1e-12);
        assert_eq!(t_oracle, 0);
    }

    #[test]
    fn bounded_support_source_reports_infinity() {
        // Λ(θ) of a source that always sends exactly λ: every tail is impossible
        let m = ArrivalModel::custom(0.5, f64::INFINITY, |t: f64| 0.5 * t).unwrap();
        let res = exponent_exact(&m, &ExponentQuery::new(0.6, 2, 9)).unwrap();
        assert_eq!(res.i_exact, f64::INFINITY);
    }

    #[test]
    fn infinite_prefix_is_skipped() {
        // Bernoulli-like source with peak 2: Λ*(x) = ∞ for x > 2
        let p = 0.25;
        let m = ArrivalModel::custom(0.5, f64::INFINITY, move |t: f64| {
            if t > 0.0 {
                2.0 * t + (p + (1.0 - p) * (-2.0 * t).exp()).ln()
            } else {
                (1.0 - p + p * (2.0 * t).exp()).ln()
            }
        })
        .unwrap();
        let q = ExponentQuery::new(0.8, 1, 12);
        let res = exponent_exact(&m, &q).unwrap();
        assert!(res.i_exact.is_finite());
        let c = 11.0 * 0.8;
        let scan = (1..400u64)
            .map(|t| {
                let mf = t as f64;
                mf * m.conjugate(0.8 + c / mf).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(
            (res.i_exact - scan).abs() <= 1e-6 * scan.max(1.0),
            "{} vs {scan}",
            res.i_exact
        );
    }

    #[test]
    fn generic_over_f32() {
        let m = ArrivalModel::<f32>::cpe(0.5, 1.0).unwrap();
        let res = exponent_exact(&m, &ExponentQuery::new(0.75f32, 5, 21)).unwrap();
        assert!((res.i_exact - 3.0009).abs() < 1e-3);
        assert_eq!(res.t_argmin, 4);
    }
}
