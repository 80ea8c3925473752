//! Bracketing primitives shared by the rate-function and optimizer code.

use crate::scalar::Real;

const MAX_BISECTIONS: usize = 400;
const MAX_GOLDEN: usize = 400;

/// Shrinks `[lo, hi]` around the boundary of a monotone predicate.
///
/// Requires `pred(lo) == false` and `pred(hi) == true`; returns the final
/// bracket, which keeps that property. Stops once the width is at most `tol`
/// or the midpoint is no longer representable strictly inside.
pub(crate) fn bisect_edge<S: Real>(
    mut lo: S,
    mut hi: S,
    tol: S,
    mut pred: impl FnMut(S) -> bool,
) -> (S, S) {
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tol {
            break;
        }
        let mid = lo + (hi - lo) / S::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
///
/// `f` must be finite on the whole bracket. Returns `(argmax, max)`.
pub(crate) fn golden_max<S: Real>(mut a: S, mut b: S, tol: S, f: impl Fn(S) -> S) -> (S, S) {
    let inv_phi = S::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..MAX_GOLDEN {
        if (b - a).abs() <= tol * (S::one() + c.abs().max(d.abs())) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    let (fa, fb) = (f(a), f(b));
    [(a, fa), (c, fc), (d, fd), (b, fb)]
        .into_iter()
        .fold((a, S::neg_infinity()), |best, cand| {
            if cand.1 > best.1 {
                cand
            } else {
                best
            }
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_threshold() {
        let (lo, hi) = bisect_edge(0.0f64, 4.0, 1e-12, |x| x * x >= 2.0);
        assert!(lo * lo < 2.0 && hi * hi >= 2.0);
        assert!((hi - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bisect_runs_to_machine_precision_with_zero_tol() {
        let (lo, hi) = bisect_edge(0.0f64, 1.0, 0.0, |x| x >= 0.3);
        assert!(hi - lo <= f64::EPSILON);
    }

    #[test]
    fn golden_on_parabola() {
        let (x, fx) = golden_max(-3.0f64, 5.0, 1e-12, |x| -(x - 1.25).powi(2) + 0.5);
        assert!((x - 1.25).abs() < 1e-6);
        assert!((fx - 0.5).abs() < 1e-12);
    }

    #[test]
    fn golden_returns_boundary_maximum() {
        let (x, fx) = golden_max(0.0f64, 2.0, 1e-12, |x| x);
        assert_eq!(x, 2.0);
        assert_eq!(fx, 2.0);
    }

    #[test]
    fn f32_terminates() {
        let tol = f32::tol(1e-10);
        let (lo, hi) = bisect_edge(0.0f32, 1.0, tol, |x| x >= 0.7);
        assert!(lo < 0.7 && hi >= 0.7);
    }
}
