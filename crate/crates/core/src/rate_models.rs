//! Arrival-process statistics: the limiting scaled log-MGF Λ, its convex
//! conjugate Λ*, the relaxed-exponent threshold δ_r and the burstiness of a
//! compound Poisson source with exponential packet sizes (CPE).
//!
//! Extended reals are plain floats: `+∞` is a value, never an error.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::{bisect_edge, golden_max};
use crate::scalar::Real;

/// Shared, thread-safe evaluator θ ↦ Λ(θ).
pub type LogMgfFn<S> = Arc<dyn Fn(S) -> S + Send + Sync>;

/// Largest |θ| probed while bracketing a supremum before declaring it unbounded.
const THETA_CAP: f64 = 1e30;

#[derive(Clone)]
pub enum ArrivalKind<S: Real> {
    /// Compound Poisson arrivals with exponential packet sizes.
    Cpe { lambda: S, mu: S },
    /// Any source given by its limiting log-MGF. `theta_sup` is the upper end
    /// of the finiteness domain and may be `+∞`.
    CustomLogMgf {
        lambda: S,
        theta_sup: S,
        logmgf: LogMgfFn<S>,
    },
}

/// A traffic source described by its limiting g-scaled log-MGF and mean rate λ.
#[derive(Clone)]
pub struct ArrivalModel<S: Real> {
    kind: ArrivalKind<S>,
}

impl<S: Real> fmt::Debug for ArrivalModel<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ArrivalKind::Cpe { lambda, mu } => f
                .debug_struct("Cpe")
                .field("lambda", lambda)
                .field("mu", mu)
                .finish(),
            ArrivalKind::CustomLogMgf {
                lambda, theta_sup, ..
            } => f
                .debug_struct("CustomLogMgf")
                .field("lambda", lambda)
                .field("theta_sup", theta_sup)
                .finish_non_exhaustive(),
        }
    }
}

impl<S: Real> ArrivalModel<S> {
    pub fn cpe(lambda: S, mu: S) -> Result<Self> {
        if !(lambda > S::zero() && lambda.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "CPE mean rate must be positive and finite, got {lambda}"
            )));
        }
        if !(mu > S::zero() && mu.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "CPE packet parameter must be positive and finite, got {mu}"
            )));
        }
        Ok(ArrivalModel {
            kind: ArrivalKind::Cpe { lambda, mu },
        })
    }

    /// Wraps a user-supplied log-MGF after checking Λ(0) = 0, Λ'(0) = λ and
    /// local convexity at the origin. Steepness is not checked.
    pub fn custom(
        lambda: S,
        theta_sup: S,
        logmgf: impl Fn(S) -> S + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(lambda > S::zero() && lambda.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "mean rate must be positive and finite, got {lambda}"
            )));
        }
        let h = S::lit(1e-6);
        if !(theta_sup > h * S::lit(4.0)) {
            return Err(Error::InvalidModel(format!(
                "theta_sup must be positive, got {theta_sup}"
            )));
        }
        let at_zero = logmgf(S::zero());
        if !(at_zero.abs() <= S::lit(1e-12)) {
            return Err(Error::InvalidModel(format!(
                "log-MGF must vanish at 0, got {at_zero}"
            )));
        }
        let (up, down) = (logmgf(h), logmgf(-h));
        let slope = (up - down) / (h + h);
        if !((slope - lambda).abs() <= S::lit(1e-4) * lambda) {
            return Err(Error::InvalidModel(format!(
                "log-MGF slope at 0 is {slope}, expected mean rate {lambda}"
            )));
        }
        let h2 = S::lit(1e-2).min(theta_sup / S::lit(4.0));
        let curvature = logmgf(h2) + logmgf(-h2) - at_zero - at_zero;
        if !(curvature >= -S::lit(1e-9)) {
            return Err(Error::InvalidModel(
                "log-MGF is not convex at the origin".into(),
            ));
        }
        Ok(ArrivalModel {
            kind: ArrivalKind::CustomLogMgf {
                lambda,
                theta_sup,
                logmgf: Arc::new(logmgf),
            },
        })
    }

    pub fn kind(&self) -> &ArrivalKind<S> {
        &self.kind
    }

    /// Mean rate λ (fraction of N per slot).
    pub fn mean_rate(&self) -> S {
        match self.kind {
            ArrivalKind::Cpe { lambda, .. } | ArrivalKind::CustomLogMgf { lambda, .. } => lambda,
        }
    }

    /// Fails with [`Error::Unstable`] unless `r > λ`.
    pub fn require_stable(&self, r: S) -> Result<()> {
        let lambda = self.mean_rate();
        if r > lambda {
            Ok(())
        } else {
            Err(Error::Unstable {
                r: r.as_f64(),
                lambda: lambda.as_f64(),
            })
        }
    }

    /// Λ(θ), `+∞` outside the finiteness domain.
    pub fn log_mgf(&self, theta: S) -> S {
        match &self.kind {
            ArrivalKind::Cpe { lambda, mu } => {
                if theta < *mu {
                    *mu * *lambda * theta / (*mu - theta)
                } else {
                    S::infinity()
                }
            }
            ArrivalKind::CustomLogMgf {
                theta_sup, logmgf, ..
            } => {
                if theta > *theta_sup {
                    S::infinity()
                } else {
                    let v = logmgf(theta);
                    if v.is_nan() {
                        S::infinity()
                    } else {
                        v
                    }
                }
            }
        }
    }

    /// Λ*(x) = sup_θ {θx − Λ(θ)}.
    pub fn conjugate(&self, x: S) -> Result<S> {
        match &self.kind {
            ArrivalKind::Cpe { lambda, mu } => {
                if x < S::zero() || x.is_nan() {
                    return Err(Error::domain(format!(
                        "CPE conjugate needs x >= 0, got {x}"
                    )));
                }
                if x.is_infinite() {
                    return Ok(S::infinity());
                }
                // μ(√x − √λ)², written without the cancellation near x = λ
                let gap = x - *lambda;
                let root_sum = x.sqrt() + lambda.sqrt();
                Ok(*mu * gap * gap / (root_sum * root_sum))
            }
            ArrivalKind::CustomLogMgf {
                lambda, theta_sup, ..
            } => {
                if x.is_nan() {
                    return Err(Error::domain("conjugate of NaN"));
                }
                Ok(self.numeric_conjugate(x, *lambda, *theta_sup))
            }
        }
    }

    fn numeric_conjugate(&self, x: S, lambda: S, theta_sup: S) -> S {
        if x == lambda {
            return S::zero();
        }
        let objective = |theta: S| theta * x - self.log_mgf(theta);
        let tol = S::tol(1e-12);
        let cap = S::lit(THETA_CAP);

        // Concave objective with value 0 at θ = 0 and slope x − λ there.
        let forward = x > lambda;
        let limit = if forward {
            theta_sup
        } else {
            S::neg_infinity()
        };
        let first = if forward {
            S::one().min(theta_sup / S::lit(2.0))
        } else {
            -S::one()
        };

        let mut older = S::zero();
        let mut prev = S::zero();
        let mut prev_val = S::zero();
        let mut probe = first;
        let (lo, hi) = loop {
            let at_limit = if forward {
                probe >= limit
            } else {
                probe <= limit
            };
            let probe_pt = if at_limit { limit } else { probe };
            let val = objective(probe_pt);
            if !val.is_finite() && val < S::zero() {
                // left the finiteness domain: pull the far end back inside it
                let (inside, _) = bisect_edge(S::zero(), S::one(), S::tol(1e-15), |s| {
                    !objective(prev + (probe_pt - prev) * s).is_finite()
                });
                break (older, prev + (probe_pt - prev) * inside);
            }
            if val == S::infinity() {
                return S::infinity();
            }
            if val <= prev_val || at_limit {
                break (older, probe_pt);
            }
            if probe.abs() > cap {
                return S::infinity();
            }
            older = prev;
            prev = probe_pt;
            prev_val = val;
            probe = probe + probe;
        };
        let (a, b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let (_, best) = golden_max(a, b, tol, objective);
        best.max(S::zero())
    }

    /// δ_r = sup{θ > 0 : Λ(θ) < θr}, defined for r > λ.
    pub fn delta_r(&self, r: S) -> Result<S> {
        let lambda = self.mean_rate();
        if !(r > lambda) {
            return Err(Error::domain(format!(
                "delta_r needs r > lambda ({r} <= {lambda})"
            )));
        }
        match &self.kind {
            ArrivalKind::Cpe { mu, .. } => Ok(*mu * (r - lambda) / r),
            ArrivalKind::CustomLogMgf { theta_sup, .. } => {
                let margin = |theta: S| theta * r - self.log_mgf(theta);
                let eps = S::lit(1e-12);
                let mut lo = eps;
                let mut hi = S::one().min(*theta_sup / S::lit(2.0));
                loop {
                    if hi >= *theta_sup {
                        hi = *theta_sup;
                        if margin(hi) > S::zero() {
                            return Ok(hi);
                        }
                        break;
                    }
                    if !(margin(hi) > S::zero()) {
                        break;
                    }
                    if hi > S::lit(THETA_CAP) {
                        return Ok(S::infinity());
                    }
                    lo = hi;
                    hi = hi + hi;
                }
                if !(margin(lo) > S::zero()) {
                    return Ok(lo);
                }
                let (below, _) = bisect_edge(lo, hi, S::tol(1e-10) * S::lit(1e-3), |theta| {
                    !(margin(theta) > S::zero())
                });
                Ok(below)
            }
        }
    }

    /// Ratio std/mean of per-slot arrivals of CPE(λ, μ, g, N): √(2/(λ μ g(N))).
    pub fn burstiness(&self, g_of_n: S) -> Result<S> {
        match &self.kind {
            ArrivalKind::Cpe { lambda, mu } => {
                if !(g_of_n > S::zero()) {
                    return Err(Error::domain(format!(
                        "g(N) must be positive, got {g_of_n}"
                    )));
                }
                Ok((S::lit(2.0) / (*lambda * *mu * g_of_n)).sqrt())
            }
            ArrivalKind::CustomLogMgf { .. } => Err(Error::UnsupportedModel(
                "burstiness needs second-moment data",
            )),
        }
    }
}

/// How the source scaling g(N) compares with N = log SNR.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum ScalingRegime<S> {
    /// g(N)/N → γ ∈ (0, ∞): delay and channel errors can be balanced.
    LinearGamma { gamma: S },
    /// g(N)/N → 0: delay violations dominate.
    Sublinear,
    /// g(N)/N → ∞: channel errors dominate.
    Superlinear,
}

impl<S: Real> ScalingRegime<S> {
    pub fn linear(gamma: S) -> Result<Self> {
        if gamma > S::zero() && gamma.is_finite() {
            Ok(ScalingRegime::LinearGamma { gamma })
        } else {
            Err(Error::domain(format!(
                "gamma must be positive and finite, got {gamma}"
            )))
        }
    }
}

impl<S: Real> FromStr for ScalingRegime<S> {
    type Err = Error;

    /// Parses `linear:<gamma>`, `sublinear` or `superlinear`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sublinear" => Ok(ScalingRegime::Sublinear),
            "superlinear" => Ok(ScalingRegime::Superlinear),
            other => {
                let gamma = other
                    .strip_prefix("linear:")
                    .and_then(|g| g.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::domain(format!("unknown regime '{other}'")))?;
                ScalingRegime::linear(S::lit(gamma))
            }
        }
    }
}
