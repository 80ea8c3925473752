//! Joint choice of multiplexing gain r and coding duration T.
//!
//! When g(N)/N → γ the total-error exponent at (r, T) is
//! min{γ I(r, T), d_ch(r, T)}. For each admissible T the best r sits where the
//! two exponents cross, and the best T maximizes the exponent there. The
//! other two scaling regimes only admit upper bounds, reported as such.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delay_exponent::{exponent_exact, exponent_relaxed, ExponentQuery};
use crate::dmt_models::ChannelModel;
use crate::error::{Error, Result};
use crate::numeric::{bisect_edge, golden_max};
use crate::rate_models::{ArrivalKind, ArrivalModel, ScalingRegime};
use crate::scalar::Real;

/// Relative tolerance under which two candidate exponents count as tied.
const TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentMode {
    /// Integer-constrained I(r, T).
    Exact,
    /// I_ir(r, T) = δ_r r (D + 1 − 2T).
    Relaxed,
}

impl ExponentMode {
    pub fn exponent<S: Real>(self, model: &ArrivalModel<S>, r: S, t: u32, d: u32) -> Result<S> {
        let q = ExponentQuery::new(r, t, d);
        match self {
            ExponentMode::Exact => exponent_exact(model, &q).map(|res| res.i_exact),
            ExponentMode::Relaxed => exponent_relaxed(model, &q),
        }
    }
}

/// Final bisection bracket for r*(T). `gap` is γI − d_ch: negative at `lo`,
/// non-negative at `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing<S> {
    pub r: S,
    pub lo: S,
    pub hi: S,
    pub gap_lo: S,
    pub gap_hi: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationRow<S> {
    pub t: u32,
    /// Relay count, cooperative channels only.
    pub v: Option<u32>,
    pub r_star: S,
    /// Delay exponent (exact or relaxed, per the run's mode) at r*.
    pub exponent: S,
    pub gamma_i: S,
    pub d_ch: S,
    pub crossing: Crossing<S>,
}

/// Unrounded optimum with both integer constraints relaxed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxedSolution<S> {
    pub d_ir: S,
    pub r_ir: S,
    pub t_ir: S,
    pub v_ir: Option<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult<S> {
    pub regime: ScalingRegime<S>,
    pub mode: ExponentMode,
    pub d_star: S,
    pub r_star: S,
    pub t_star: u32,
    pub v_star: Option<u32>,
    pub per_t_table: Vec<DurationRow<S>>,
    pub relaxed: RelaxedSolution<S>,
    pub case_bound: Option<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport<S> {
    pub regime: ScalingRegime<S>,
    /// Upper bound on the achievable exponent; not claimed to be attained.
    pub bound: S,
    pub t_at_bound: u32,
    pub per_t: Vec<(u32, S)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum Classification<S> {
    Balanced(OptimizationResult<S>),
    DelayDominated(BoundReport<S>),
    ChannelDominated(BoundReport<S>),
}

fn check_gamma<S: Real>(gamma: S) -> Result<()> {
    if gamma > S::zero() && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "gamma must be positive and finite, got {gamma}"
        )))
    }
}

/// Bisects `gap` on (λ, r_max], where gap(λ⁺) < 0 is given as `gap_at_lambda`.
fn bisect_crossing<S: Real>(
    lambda: S,
    r_max: S,
    gap_at_lambda: S,
    duration: u32,
    mut gap: impl FnMut(S) -> Result<S>,
) -> Result<Crossing<S>> {
    if !(lambda < r_max) || !(gap_at_lambda < S::zero()) {
        return Err(Error::NoCrossing { duration });
    }
    let gap_top = gap(r_max)?;
    if !(gap_top >= S::zero()) {
        return Err(Error::NoCrossing { duration });
    }
    let mut failure = None;
    let (lo, hi) = bisect_edge(lambda, r_max, S::zero(), |r| match gap(r) {
        Ok(v) => v >= S::zero(),
        Err(e) => {
            failure.get_or_insert(e);
            true
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let gap_lo = if lo == lambda {
        gap_at_lambda
    } else {
        gap(lo)?
    };
    let gap_hi = if hi == r_max { gap_top } else { gap(hi)? };
    Ok(Crossing {
        r: hi,
        lo,
        hi,
        gap_lo,
        gap_hi,
    })
}

/// r*(T) = inf{r ∈ (λ, r_max) : γ I(r, T) = d_ch(r, T)}.
///
/// The returned bracket has γI − d_ch < 0 at its left end and ≥ 0 at its
/// right end, shrunk to adjacent floats; `r` is the right end.
pub fn r_star_of_t<S: Real>(
    model: &ArrivalModel<S>,
    channel: &ChannelModel<S>,
    gamma: S,
    t: u32,
    d: u32,
    mode: ExponentMode,
) -> Result<Crossing<S>> {
    check_gamma(gamma)?;
    if t == 0 || t > d / 2 || !channel.supports_duration(t) {
        return Err(Error::domain(format!(
            "T = {t} is not admissible for D = {d} and {channel:?}"
        )));
    }
    let lambda = model.mean_rate();
    let r_max = channel.r_max();
    if !(lambda < r_max) {
        return Err(Error::NoCrossing { duration: t });
    }
    // I(r, T) → 0 as r ↓ λ
    let gap_at_lambda = -channel.d_ch(lambda, t)?;
    bisect_crossing(lambda, r_max, gap_at_lambda, t, |r| {
        Ok(gamma * mode.exponent(model, r, t, d)? - channel.d_ch(r, t)?)
    })
}

fn duration_row<S: Real>(
    model: &ArrivalModel<S>,
    channel: &ChannelModel<S>,
    gamma: S,
    t: u32,
    d: u32,
    mode: ExponentMode,
    v: Option<u32>,
) -> Result<DurationRow<S>> {
    let crossing = r_star_of_t(model, channel, gamma, t, d, mode)?;
    let exponent = mode.exponent(model, crossing.r, t, d)?;
    Ok(DurationRow {
        t,
        v,
        r_star: crossing.r,
        exponent,
        gamma_i: gamma * exponent,
        d_ch: channel.d_ch(crossing.r, t)?,
        crossing,
    })
}

/// Index of the largest exponent; near-ties go to the earliest row.
fn argmax_row<S: Real>(rows: &[DurationRow<S>]) -> usize {
    let mut best = 0;
    for (i, row) in rows.iter().enumerate().skip(1) {
        let incumbent = rows[best].exponent;
        if row.exponent > incumbent + S::lit(TIE_RTOL) * incumbent.abs() {
            best = i;
        }
    }
    best
}

/// Case 1 of the main result over every admissible T.
pub fn optimize_case1<S: Real>(
    model: &ArrivalModel<S>,
    channel: &ChannelModel<S>,
    gamma: S,
    d: u32,
    mode: ExponentMode,
) -> Result<OptimizationResult<S>> {
    optimize_case1_with(model, channel, gamma, d, mode, None)
}

/// Case 1 with an optional fixed coding duration.
pub fn optimize_case1_with<S: Real>(
    model: &ArrivalModel<S>,
    channel: &ChannelModel<S>,
    gamma: S,
    d: u32,
    mode: ExponentMode,
    fixed_t: Option<u32>,
) -> Result<OptimizationResult<S>> {
    check_gamma(gamma)?;
    let mut durations = channel.admissible_t(d)?;
    if let Some(t) = fixed_t {
        if !durations.contains(&t) {
            return Err(Error::domain(format!(
                "fixed T = {t} is not admissible for D = {d}"
            )));
        }
        durations = vec![t];
    }
    let rows = durations
        .par_iter()
        .map(|&t| duration_row(model, channel, gamma, t, d, mode, None))
        .collect::<Result<Vec<_>>>()?;
    let best = &rows[argmax_row(&rows)];
    let relaxed = relaxed_optimum(model, channel, gamma, d, fixed_t)?;
    Ok(OptimizationResult {
        regime: ScalingRegime::LinearGamma { gamma },
        mode,
        d_star: best.d_ch,
        r_star: best.r_star,
        t_star: best.t,
        v_star: None,
        relaxed,
        per_t_table: rows,
        case_bound: None,
    })
}

/// Cooperative clustering: enumerate v = 1..=max_v with T = 2(v + 1) ≤ ⌊D/2⌋.
pub fn optimize_coop<S: Real>(
    model: &ArrivalModel<S>,
    max_v: u32,
    gamma: S,
    d: u32,
    mode: ExponentMode,
) -> Result<OptimizationResult<S>> {
    check_gamma(gamma)?;
    let candidates: Vec<u32> = (1..=max_v)
        .filter(|&v| 2 * (u64::from(v) + 1) <= u64::from(d / 2))
        .collect();
    if candidates.is_empty() {
        return Err(Error::EmptyAdmissibleSet { delay: d });
    }
    let rows = candidates
        .par_iter()
        .map(|&v| {
            duration_row(
                model,
                &ChannelModel::CoopOaf { v },
                gamma,
                2 * (v + 1),
                d,
                mode,
                Some(v),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let best = &rows[argmax_row(&rows)];
    let relaxed = coop_relaxed(model, gamma, d, max_v)?;
    Ok(OptimizationResult {
        regime: ScalingRegime::LinearGamma { gamma },
        mode,
        d_star: best.d_ch,
        r_star: best.r_star,
        t_star: best.t,
        v_star: best.v,
        relaxed,
        per_t_table: rows,
        case_bound: None,
    })
}

/// Relaxed r for a real-valued duration: root of γ δ_r r (D + 1 − 2T) = d_ch(r, T).
fn relaxed_r_at<S: Real>(
    model: &ArrivalModel<S>,
    gamma: S,
    d: u32,
    t: S,
    r_max: S,
    dch: impl Fn(S) -> Result<S>,
) -> Result<S> {
    let lambda = model.mean_rate();
    let slack = S::from_count(u64::from(d) + 1) - t - t;
    let gap_at_lambda = -dch(lambda)?;
    let duration = t.round().to_u32().unwrap_or(0);
    let crossing = bisect_crossing(lambda, r_max, gap_at_lambda, duration, |r| {
        Ok(gamma * model.delta_r(r)? * r * slack - dch(r)?)
    })?;
    Ok(crossing.r)
}

/// Both integer constraints relaxed: T varies continuously over
/// [min admissible T, ⌊D/2⌋] and I is replaced by I_ir.
pub fn relaxed_optimum<S: Real>(
    model: &ArrivalModel<S>,
    channel: &ChannelModel<S>,
    gamma: S,
    d: u32,
    fixed_t: Option<u32>,
) -> Result<RelaxedSolution<S>> {
    check_gamma(gamma)?;
    if let ChannelModel::CoopOaf { v } = channel {
        // a single cluster size: nothing continuous left to optimize
        let t = S::from_count(2 * (u64::from(*v) + 1));
        let r = relaxed_r_at(model, gamma, d, t, channel.r_max(), |r| {
            channel.d_ch_relaxed(r, t)
        })?;
        return Ok(RelaxedSolution {
            d_ir: channel.d_ch_relaxed(r, t)?,
            r_ir: r,
            t_ir: t,
            v_ir: Some(S::from_count((*v).into())),
        });
    }
    if let (ChannelModel::SisoFastFading, ArrivalKind::Cpe { lambda, mu }, None) =
        (channel, model.kind(), fixed_t)
    {
        if gamma == S::one() {
            let cf = siso_closed_forms(*lambda, *mu, d)?;
            return Ok(RelaxedSolution {
                d_ir: cf.d_ir,
                r_ir: cf.r_ir,
                t_ir: cf.t_ir,
                v_ir: None,
            });
        }
    }
    let admissible = channel.admissible_t(d)?;
    let (t_lo, t_hi) = match fixed_t {
        Some(t) => (t, t),
        None => (admissible[0], d / 2),
    };
    let r_max = channel.r_max();
    let value = |t: S| -> Result<(S, S)> {
        let r = relaxed_r_at(model, gamma, d, t, r_max, |r| channel.d_ch_relaxed(r, t))?;
        Ok((r, channel.d_ch_relaxed(r, t)?))
    };
    let (t_lo, t_hi) = (S::from_count(t_lo.into()), S::from_count(t_hi.into()));
    let t_ir = if t_hi > t_lo {
        golden_max(t_lo, t_hi, S::tol(1e-12), |t| {
            value(t).map(|v| v.1).unwrap_or(S::neg_infinity())
        })
        .0
    } else {
        t_lo
    };
    let (r_ir, d_ir) = value(t_ir)?;
    Ok(RelaxedSolution {
        d_ir,
        r_ir,
        t_ir,
        v_ir: None,
    })
}

/// Relaxed cluster size: v continuous on [1, min(max_v, ⌊D/2⌋/2 − 1)], T = 2(v + 1).
fn coop_relaxed<S: Real>(
    model: &ArrivalModel<S>,
    gamma: S,
    d: u32,
    max_v: u32,
) -> Result<RelaxedSolution<S>> {
    if let (ArrivalKind::Cpe { lambda, mu }, true) = (model.kind(), gamma == S::one()) {
        let cf = coop_closed_forms(*lambda, *mu, d, max_v)?;
        return Ok(RelaxedSolution {
            d_ir: cf.d_ir,
            r_ir: cf.r_ir,
            t_ir: S::lit(2.0) * (cf.v_ir + S::one()),
            v_ir: Some(cf.v_ir),
        });
    }
    let two = S::lit(2.0);
    let v_hi = S::from_count(max_v.into()).min(S::from_count((d / 2).into()) / two - S::one());
    if v_hi < S::one() {
        return Err(Error::EmptyAdmissibleSet { delay: d });
    }
    let r_max = S::lit(0.5);
    let value = |v: S| -> Result<(S, S)> {
        let w = v + S::one();
        let r = relaxed_r_at(model, gamma, d, two * w, r_max, |r| {
            Ok(w * (S::one() - two * r))
        })?;
        Ok((r, w * (S::one() - two * r)))
    };
    let v_ir = golden_max(S::one(), v_hi, S::tol(1e-12), |v| {
        value(v).map(|x| x.1).unwrap_or(S::neg_infinity())
    })
    .0;
    let (r_ir, d_ir) = value(v_ir)?;
    Ok(RelaxedSolution {
        d_ir,
        r_ir,
        t_ir: two * (v_ir + S::one()),
        v_ir: Some(v_ir),
    })
}

/// Exponent of the total error probability at (r, T): min{γ I(r, T), d_ch(r, T)}.
pub fn p_tot_exponent<S: Real>(
    model: &ArrivalModel<S>,
    channel: &ChannelModel<S>,
    gamma: S,
    r: S,
    t: u32,
    d: u32,
) -> Result<S> {
    check_gamma(gamma)?;
    let delay = exponent_exact(model, &ExponentQuery::new(r, t, d))?.i_exact;
    Ok((gamma * delay).min(channel.d_ch(r, t)?))
}

/// Routes Case 1 to the optimizer and reports the Case 2/3 upper bounds.
pub fn classify_and_bound<S: Real>(
    model: &ArrivalModel<S>,
    channel: &ChannelModel<S>,
    regime: ScalingRegime<S>,
    d: u32,
    mode: ExponentMode,
) -> Result<Classification<S>> {
    let durations = channel.admissible_t(d)?;
    match regime {
        ScalingRegime::LinearGamma { gamma } => {
            optimize_case1(model, channel, gamma, d, mode).map(Classification::Balanced)
        }
        ScalingRegime::Sublinear => {
            let r_max = channel.r_max();
            let per_t = durations
                .iter()
                .map(|&t| {
                    Ok((
                        t,
                        exponent_exact(model, &ExponentQuery::new(r_max, t, d))?.i_exact,
                    ))
                })
                .collect::<Result<Vec<(u32, S)>>>()?;
            let (t_at_bound, bound) = per_t.iter().copied().fold(per_t[0], |best, cand| {
                if cand.1 > best.1 + S::lit(TIE_RTOL) * best.1.abs() {
                    cand
                } else {
                    best
                }
            });
            Ok(Classification::DelayDominated(BoundReport {
                regime,
                bound,
                t_at_bound,
                per_t,
            }))
        }
        ScalingRegime::Superlinear => {
            let lambda = model.mean_rate();
            let per_t = durations
                .iter()
                .map(|&t| Ok((t, channel.d_ch(lambda, t)?)))
                .collect::<Result<Vec<(u32, S)>>>()?;
            let (t_at_bound, bound) = per_t[per_t.len() - 1];
            Ok(Classification::ChannelDominated(BoundReport {
                regime,
                bound,
                t_at_bound,
                per_t,
            }))
        }
    }
}

/// SISO fast fading with a CPE source, T fixed: λ + (1 − λ)/(1 + μ(D + 1 − 2T)/T).
pub fn siso_r_star_relaxed<S: Real>(lambda: S, mu: S, d: u32, t: S) -> S {
    let slack = S::from_count(u64::from(d) + 1) - t - t;
    lambda + (S::one() - lambda) / (S::one() + mu * slack / t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SisoClosedForms<S> {
    pub t_ir: S,
    pub r_ir: S,
    pub d_ir: S,
}

/// Relaxed optimum for SISO fast fading and a CPE source with γ = 1.
pub fn siso_closed_forms<S: Real>(lambda: S, mu: S, d: u32) -> Result<SisoClosedForms<S>> {
    if !(lambda > S::zero() && lambda < S::one()) || !(mu > S::zero()) || d < 2 {
        return Err(Error::domain(format!(
            "siso closed forms need 0<lambda<1, mu>0, D>=2 (got {lambda}, {mu}, {d})"
        )));
    }
    let two = S::lit(2.0);
    let root = (two * mu).sqrt();
    let t_top = S::from_count((d / 2).into());
    let share = S::one() / (S::one() + S::one() / root);
    let t_ir = (share * S::from_count(u64::from(d) + 1) / two)
        .max(S::one())
        .min(t_top);
    let r_lo = siso_r_star_relaxed(lambda, mu, d, S::one());
    let r_hi = siso_r_star_relaxed(lambda, mu, d, t_top);
    let r_ir = (lambda + (S::one() - lambda) / (S::one() + root))
        .max(r_lo)
        .min(r_hi);
    Ok(SisoClosedForms {
        t_ir,
        r_ir,
        d_ir: t_ir * (S::one() - r_ir),
    })
}

/// 2×2 MIMO, T = 2, CPE source: root of d_ch(r) = μ(r − λ)(D − 3).
pub fn mimo22_r_ir<S: Real>(lambda: S, mu: S, d: u32) -> Result<S> {
    let two = S::lit(2.0);
    if !(lambda > S::zero() && lambda < two) || !(mu > S::zero()) || d <= 3 {
        return Err(Error::domain(format!(
            "mimo 2x2 closed form needs 0<lambda<2, mu>0, D>3 (got {lambda}, {mu}, {d})"
        )));
    }
    let load = mu * S::from_count(u64::from(d) - 3);
    if lambda >= S::one() - S::one() / load {
        Ok(lambda + (two - lambda) / (S::one() + load))
    } else {
        Ok(lambda + (S::lit(4.0) - S::lit(3.0) * lambda) / (S::lit(3.0) + load))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoopClosedForms<S> {
    pub v_ir: S,
    pub r_ir: S,
    pub d_ir: S,
}

/// Relaxed cluster size and rate for orthogonal amplify-and-forward with a CPE source, γ = 1.
///
/// v_ir = (D + 1)/(4(1 + 1/√(2μ))) − 1 clamped to [1, min(max_v, ⌊D/2⌋/2 − 1)];
/// r_ir balances the two exponents at that v, which in the interior equals
/// 1/2 − (1/2 − λ)/(1 + 1/√(2μ)).
pub fn coop_closed_forms<S: Real>(
    lambda: S,
    mu: S,
    d: u32,
    max_v: u32,
) -> Result<CoopClosedForms<S>> {
    let two = S::lit(2.0);
    let half = S::lit(0.5);
    if !(lambda > S::zero() && lambda < half) || !(mu > S::zero()) || max_v == 0 {
        return Err(Error::domain(format!(
            "coop closed forms need 0<lambda<1/2, mu>0, v>=1 (got {lambda}, {mu}, {max_v})"
        )));
    }
    let v_hi = S::from_count(max_v.into()).min(S::from_count((d / 2).into()) / two - S::one());
    if v_hi < S::one() {
        return Err(Error::EmptyAdmissibleSet { delay: d });
    }
    let share = S::one() + S::one() / (two * mu).sqrt();
    let v_ir = (S::from_count(u64::from(d) + 1) / (S::lit(4.0) * share) - S::one())
        .max(S::one())
        .min(v_hi);
    let w = v_ir + S::one();
    let slack = mu * (S::from_count(u64::from(d) + 1) - S::lit(4.0) * w);
    let r_ir = (w + lambda * slack) / (two * w + slack);
    Ok(CoopClosedForms {
        v_ir,
        r_ir,
        d_ir: w * (S::one() - two * r_ir),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cpe(lambda: f64, mu: f64) -> ArrivalModel<f64> {
        ArrivalModel::cpe(lambda, mu).unwrap()
    }

    const SISO: ChannelModel<f64> = ChannelModel::SisoFastFading;

    #[test]
    fn r_star_examples() {
        let m = cpe(0.5, 1.0);
        let c = r_star_of_t(&m, &SISO, 1.0, 5, 21, ExponentMode::Relaxed).unwrap();
        assert_abs_diff_eq!(c.r, 0.5 + 0.5 / 3.4, epsilon = 1e-12);
        let c = r_star_of_t(&m, &SISO, 1.0, 10, 21, ExponentMode::Relaxed).unwrap();
        assert_abs_diff_eq!(c.r, 0.5 + 0.5 / 1.2, epsilon = 1e-12);
        let c = r_star_of_t(&cpe(0.5, 0.5), &SISO, 1.0, 10, 21, ExponentMode::Relaxed).unwrap();
        assert_abs_diff_eq!(c.r, 0.954_545_454_545, epsilon = 1e-10);
        let cbr = cpe(0.5, 1e9);
        for t in 1..=10 {
            let c = r_star_of_t(&cbr, &SISO, 1.0, t, 21, ExponentMode::Relaxed).unwrap();
            assert!((c.r - 0.5).abs() < 1e-3);
        }
    }

    #[test]
    fn crossing_bracket_is_tight_and_signed() {
        let m = cpe(0.5, 1.0);
        for mode in [ExponentMode::Exact, ExponentMode::Relaxed] {
            let c = r_star_of_t(&m, &SISO, 1.0, 3, 21, mode).unwrap();
            assert!(c.hi - c.lo <= 1e-10);
            assert!(c.gap_lo < 0.0 && c.gap_hi >= 0.0);
        }
    }

    #[test]
    fn no_crossing_when_load_exceeds_r_max() {
        let m = cpe(0.6, 1.0);
        let coop = ChannelModel::coop(1).unwrap();
        assert!(matches!(
            r_star_of_t(&m, &coop, 1.0, 4, 21, ExponentMode::Relaxed),
            Err(Error::NoCrossing { duration: 4 })
        ));
        assert_eq!(Error::NoCrossing { duration: 4 }.exit_code(), 3);
    }

    #[test]
    fn worked_triple_closed_form() {
        let cf = siso_closed_forms(0.5, 0.5, 21).unwrap();
        assert_eq!(cf.t_ir, 5.5);
        assert_eq!(cf.r_ir, 0.75);
        assert_eq!(cf.d_ir, 1.375);
        assert_abs_diff_eq!(
            siso_r_star_relaxed(0.5, 0.5, 21, 1.0),
            0.5 + 0.5 / 11.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            siso_r_star_relaxed(0.5, 0.5, 21, 10.0),
            0.5 + 0.5 / 1.1,
            epsilon = 1e-15
        );
    }

    #[test]
    fn siso_closed_forms_cbr_clamp() {
        let cf = siso_closed_forms(0.5, 1e12, 21).unwrap();
        assert_eq!(cf.t_ir, 10.0);
        let top = siso_r_star_relaxed(0.5, 1e12, 21, 10.0);
        assert_eq!(cf.r_ir, top);
        assert_abs_diff_eq!(cf.d_ir, 10.0 * (1.0 - top), epsilon = 1e-12);
    }

    #[test]
    fn siso_closed_forms_linear_in_headroom() {
        let base = siso_closed_forms(0.5, 0.5, 21).unwrap();
        let tight = siso_closed_forms(0.999, 0.5, 21).unwrap();
        assert_abs_diff_eq!(tight.d_ir, 1.375 * (0.001 / 0.5), epsilon = 1e-12);
        assert_eq!(tight.t_ir, base.t_ir);
        assert!(siso_closed_forms(1.0, 0.5, 21).is_err());
        assert!(siso_closed_forms(0.5, 0.0, 21).is_err());
    }

    #[test]
    fn siso_clamped_forms_agree_with_r_star_at_t_ir() {
        for &lambda in &[0.1f64, 0.5, 0.9] {
            for &mu in &[1e-3, 0.01, 0.5, 3.0, 1e3] {
                for &d in &[4u32, 11, 21, 101] {
                    let cf = siso_closed_forms(lambda, mu, d).unwrap();
                    let r = siso_r_star_relaxed(lambda, mu, d, cf.t_ir);
                    assert!((cf.r_ir - r).abs() <= 1e-12, "{lambda} {mu} {d}");
                }
            }
        }
    }

    #[test]
    fn numeric_relaxed_matches_siso_closed_forms() {
        // piecewise copy of the SISO curve forces the generic golden-section path
        let pw = ChannelModel::PiecewiseLinear(
            crate::dmt_models::PiecewiseDmt::new(
                vec![(0.0, 1.0), (1.0, 0.0)],
                crate::TDependence::MultiplyByT,
            )
            .unwrap(),
        );
        for &(lambda, mu, d) in &[(0.5, 0.5, 21u32), (0.25, 0.01, 101), (0.75, 10.0, 11)] {
            let numeric = relaxed_optimum(&cpe(lambda, mu), &pw, 1.0, d, None).unwrap();
            let cf = siso_closed_forms(lambda, mu, d).unwrap();
            assert!(
                (numeric.t_ir - cf.t_ir).abs() < 1e-5,
                "{numeric:?} vs {cf:?}"
            );
            assert!((numeric.r_ir - cf.r_ir).abs() < 1e-7);
            assert!((numeric.d_ir - cf.d_ir).abs() < 1e-9);
        }
    }

    #[test]
    fn case1_worked_example() {
        let res = optimize_case1(&cpe(0.5, 0.5), &SISO, 1.0, 21, ExponentMode::Relaxed).unwrap();
        assert!([5, 6].contains(&res.t_star));
        assert!((res.d_star - 1.375).abs() / 1.375 <= 0.01);
        assert_eq!(res.relaxed.d_ir, 1.375);
        assert_eq!(res.per_t_table.len(), 10);
        // T = 5 and T = 6 tie exactly; the smaller wins
        assert_eq!(res.t_star, 5);
    }

    #[test]
    fn case1_cbr_limit() {
        for mode in [ExponentMode::Exact, ExponentMode::Relaxed] {
            let res = optimize_case1(&cpe(0.5, 1e9), &SISO, 1.0, 21, mode).unwrap();
            assert!(
                (res.d_star - 5.0).abs() / 5.0 <= 0.01,
                "{mode:?}: {}",
                res.d_star
            );
            assert_eq!(res.t_star, 10);
        }
    }

    #[test]
    fn coop_example() {
        let m = cpe(0.25, 0.5);
        let cf = coop_closed_forms(0.25, 0.5, 43, 10).unwrap();
        assert_abs_diff_eq!(cf.v_ir, 4.5, epsilon = 1e-12);
        assert_abs_diff_eq!(cf.r_ir, 0.375, epsilon = 1e-12);
        let interior_r = 0.5 - (0.5 - 0.25) / (1.0 + 1.0 / (2.0f64 * 0.5).sqrt());
        assert_abs_diff_eq!(cf.r_ir, interior_r, epsilon = 1e-12);
        for mode in [ExponentMode::Relaxed, ExponentMode::Exact] {
            let res = optimize_coop(&m, 10, 1.0, 43, mode).unwrap();
            assert!(
                [4, 5].contains(&res.v_star.unwrap()),
                "{mode:?} {:?}",
                res.v_star
            );
            assert_eq!(res.t_star, 2 * (res.v_star.unwrap() + 1));
            assert!((res.r_star - 0.375).abs() < 0.02, "{}", res.r_star);
            // v = 10 needs T = 22 > floor(43/2)
            assert_eq!(res.per_t_table.len(), 9);
        }
    }

    #[test]
    fn coop_numeric_relaxed_matches_closed_form() {
        // γ ≠ 1 takes the numeric route; rescaling μ by γ leaves the CPE relaxed problem unchanged
        let numeric = coop_relaxed(&cpe(0.25, 0.25), 2.0, 43, 10).unwrap();
        let cf = coop_closed_forms(0.25, 0.5, 43, 10).unwrap();
        assert!((numeric.v_ir.unwrap() - cf.v_ir).abs() < 1e-5);
        assert!((numeric.r_ir - cf.r_ir).abs() < 1e-7);
        assert!((numeric.d_ir - cf.d_ir).abs() < 1e-9);
    }

    #[test]
    fn mimo_branches() {
        assert_abs_diff_eq!(
            mimo22_r_ir(0.5, 1.0, 11).unwrap(),
            0.5 + 2.5 / 11.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            mimo22_r_ir(0.5, 1.0, 11).unwrap(),
            0.727_272_727_272_727_3,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            mimo22_r_ir(1.5, 1.0, 11).unwrap(),
            1.5 + 0.5 / 9.0,
            epsilon = 1e-15
        );
        let boundary = 1.0 - 1.0 / 8.0;
        let upper = boundary + (2.0 - boundary) / 9.0;
        let lower = boundary + (4.0 - 3.0 * boundary) / 11.0;
        assert_abs_diff_eq!(upper, lower, epsilon = 1e-15);
        assert_abs_diff_eq!(
            mimo22_r_ir(boundary, 1.0, 11).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert!(mimo22_r_ir(2.0, 1.0, 11).is_err());
        assert!(mimo22_r_ir(0.5, 1.0, 3).is_err());
    }

    #[test]
    fn mimo_fixed_t_optimizer_matches_branch_formula() {
        let res = optimize_case1_with(
            &cpe(0.5, 1.0),
            &ChannelModel::mimo(2, 2).unwrap(),
            1.0,
            11,
            ExponentMode::Relaxed,
            Some(2),
        )
        .unwrap();
        assert_eq!(res.t_star, 2);
        assert_abs_diff_eq!(
            res.r_star,
            mimo22_r_ir(0.5, 1.0, 11).unwrap(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            res.relaxed.r_ir,
            mimo22_r_ir(0.5, 1.0, 11).unwrap(),
            epsilon = 1e-12
        );
        assert_eq!(res.relaxed.t_ir, 2.0);
    }

    #[test]
    fn classify_examples() {
        let m = cpe(0.5, 1.0);
        let Classification::ChannelDominated(b) = classify_and_bound(
            &m,
            &SISO,
            ScalingRegime::Superlinear,
            21,
            ExponentMode::Exact,
        )
        .unwrap() else {
            panic!("wrong case")
        };
        assert_abs_diff_eq!(b.bound, 5.0, epsilon = 1e-12);
        assert_eq!(b.t_at_bound, 10);

        let mimo = ChannelModel::mimo(2, 2).unwrap();
        let Classification::ChannelDominated(b) = classify_and_bound(
            &cpe(1.0, 1.0),
            &mimo,
            ScalingRegime::Superlinear,
            21,
            ExponentMode::Exact,
        )
        .unwrap() else {
            panic!("wrong case")
        };
        assert_eq!(b.bound, 1.0);

        let Classification::DelayDominated(b) =
            classify_and_bound(&m, &SISO, ScalingRegime::Sublinear, 21, ExponentMode::Exact)
                .unwrap()
        else {
            panic!("wrong case")
        };
        let direct: Vec<f64> = (1..=10)
            .map(|t| {
                exponent_exact(&m, &ExponentQuery::new(1.0, t, 21))
                    .unwrap()
                    .i_exact
            })
            .collect();
        let max = direct.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(b.bound, max);
        assert_eq!(b.t_at_bound, 1);

        let routed = classify_and_bound(
            &m,
            &SISO,
            ScalingRegime::LinearGamma { gamma: 1.0 },
            21,
            ExponentMode::Relaxed,
        )
        .unwrap();
        assert!(matches!(routed, Classification::Balanced(_)));
    }

    #[test]
    fn p_tot_examples() {
        let m = cpe(0.5, 1.0);
        assert_abs_diff_eq!(
            p_tot_exponent(&m, &SISO, 1.0, 0.75, 5, 21).unwrap(),
            1.25,
            epsilon = 1e-12
        );
        let i = exponent_exact(&m, &ExponentQuery::new(0.75, 5, 21))
            .unwrap()
            .i_exact;
        assert_abs_diff_eq!(
            p_tot_exponent(&m, &SISO, 0.01, 0.75, 5, 21).unwrap(),
            0.01 * i,
            epsilon = 1e-15
        );
        let c = r_star_of_t(&m, &SISO, 1.0, 5, 21, ExponentMode::Exact).unwrap();
        let i = exponent_exact(&m, &ExponentQuery::new(c.r, 5, 21))
            .unwrap()
            .i_exact;
        assert!((i - SISO.d_ch(c.r, 5).unwrap()).abs() < 1e-8);
        assert!(p_tot_exponent(&m, &SISO, 1.0, 0.4, 5, 21).is_err());
    }

    #[test]
    fn t_ir_ignores_load() {
        let t: Vec<f64> = (1..=9)
            .map(|i| siso_closed_forms(i as f64 / 10.0, 0.3, 41).unwrap().t_ir)
            .collect();
        assert!(t.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn burstier_sources_push_rate_to_capacity() {
        let r: Vec<f64> = [10.0, 1.0, 0.1, 0.01, 0.001]
            .iter()
            .map(|&mu| siso_closed_forms(0.4, mu, 51).unwrap().r_ir)
            .collect();
        assert!(r.windows(2).all(|w| w[1] > w[0]));
        assert!(r[4] > 0.9);
    }

    #[test]
    fn burstiness_penalty_ratio() {
        for &lambda in &[0.2, 0.5, 0.8] {
            for &mu in &[0.2, 0.5, 2.0] {
                let d = 41;
                let cf = siso_closed_forms(lambda, mu, d).unwrap();
                let ratio = cf.d_ir / (f64::from(d / 2) * (1.0 - lambda));
                let share = 1.0 / (1.0 + 1.0 / (2.0 * mu).sqrt());
                let expected = share * share * (f64::from(d + 1) / 2.0) / f64::from(d / 2);
                assert!((ratio - expected).abs() <= 1e-9, "{ratio} vs {expected}");
            }
        }
    }

    #[test]
    fn generic_over_f32() {
        let m = ArrivalModel::<f32>::cpe(0.5, 0.5).unwrap();
        let res = optimize_case1(
            &m,
            &ChannelModel::SisoFastFading,
            1.0f32,
            21,
            ExponentMode::Relaxed,
        )
        .unwrap();
        assert!((res.d_star - 1.3636).abs() < 1e-3);
    }
}
