//! Channel diversity-multiplexing tradeoff curves d_ch(r, T).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TDependence {
    /// Diversity scales with the coding duration, as for fast fading.
    MultiplyByT,
    Independent,
}

/// User-supplied tradeoff: straight segments through `points`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "RawPiecewise<S>",
    bound(deserialize = "S: Real + Deserialize<'de>", serialize = "S: Serialize")
)]
pub struct PiecewiseDmt<S> {
    points: Vec<(S, S)>,
    t_dependence: TDependence,
}

#[derive(Deserialize)]
struct RawPiecewise<S> {
    points: Vec<(S, S)>,
    t_dependence: TDependence,
}

impl<S: Real> TryFrom<RawPiecewise<S>> for PiecewiseDmt<S> {
    type Error = Error;

    fn try_from(raw: RawPiecewise<S>) -> Result<Self> {
        PiecewiseDmt::new(raw.points, raw.t_dependence)
    }
}

impl<S: Real> PiecewiseDmt<S> {
    /// Points must start at r = 0, have strictly increasing r, strictly
    /// decreasing d, and end at d = 0.
    pub fn new(points: Vec<(S, S)>, t_dependence: TDependence) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidModel(
                "a tradeoff curve needs at least two points".into(),
            ));
        }
        if points
            .iter()
            .any(|&(r, d)| !r.is_finite() || !d.is_finite())
        {
            return Err(Error::InvalidModel("tradeoff points must be finite".into()));
        }
        if points[0].0 != S::zero() {
            return Err(Error::InvalidModel(format!(
                "tradeoff curve must start at r = 0, got {}",
                points[0].0
            )));
        }
        if points.last().map(|p| p.1) != Some(S::zero()) {
            return Err(Error::InvalidModel(
                "tradeoff curve must end at d = 0".into(),
            ));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) || !(w[1].1 < w[0].1) {
                return Err(Error::InvalidModel(
                    "tradeoff points need strictly increasing r and strictly decreasing d".into(),
                ));
            }
        }
        Ok(PiecewiseDmt {
            points,
            t_dependence,
        })
    }

    pub fn from_json(text: &str) -> Result<Self>
    where
        S: for<'de> Deserialize<'de>,
    {
        serde_json::from_str(text).map_err(|e| Error::InvalidModel(format!("tradeoff JSON: {e}")))
    }

    pub fn points(&self) -> &[(S, S)] {
        &self.points
    }

    pub fn t_dependence(&self) -> TDependence {
        self.t_dependence
    }

    fn r_max(&self) -> S {
        self.points[self.points.len() - 1].0
    }
}

/// Linear interpolation through `points` (r strictly increasing). Exact at the nodes.
fn interpolate<S: Real>(points: &[(S, S)], r: S) -> S {
    let seg = points
        .windows(2)
        .find(|w| r <= w[1].0)
        .unwrap_or(&points[points.len() - 2..]);
    let ((r0, d0), (r1, d1)) = (seg[0], seg[1]);
    if r == r0 {
        return d0;
    }
    if r == r1 {
        return d1;
    }
    d0 + (d1 - d0) * (r - r0) / (r1 - r0)
}

/// Corner points (k, (n_t − k)(n_r − k)) of the quasi-static MIMO tradeoff.
pub fn mimo_corners<S: Real>(n_t: u32, n_r: u32) -> Vec<(S, S)> {
    (0..=n_t.min(n_r))
        .map(|k| {
            (
                S::from_count(k.into()),
                S::from_count(u64::from(n_t - k) * u64::from(n_r - k)),
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel<S> {
    /// SISO Rayleigh fast fading, d = T(1 − r).
    SisoFastFading,
    /// n_t × n_r Rayleigh quasi-static MIMO; needs T ≥ n_t.
    MimoQuasiStatic {
        n_t: u32,
        n_r: u32,
    },
    /// Orthogonal amplify-and-forward with v relays, d = (v + 1)(1 − 2r); T = 2(v + 1).
    CoopOaf {
        v: u32,
    },
    PiecewiseLinear(PiecewiseDmt<S>),
}

impl<S: Real> ChannelModel<S> {
    pub fn mimo(n_t: u32, n_r: u32) -> Result<Self> {
        if n_t == 0 || n_r == 0 {
            return Err(Error::InvalidModel(
                "antenna counts must be positive".into(),
            ));
        }
        Ok(ChannelModel::MimoQuasiStatic { n_t, n_r })
    }

    pub fn coop(v: u32) -> Result<Self> {
        if v == 0 {
            return Err(Error::InvalidModel("relay count must be positive".into()));
        }
        Ok(ChannelModel::CoopOaf { v })
    }

    /// Smallest r with d_ch(r, T) = 0.
    pub fn r_max(&self) -> S {
        match self {
            ChannelModel::SisoFastFading => S::one(),
            ChannelModel::MimoQuasiStatic { n_t, n_r } => S::from_count((*n_t.min(n_r)).into()),
            ChannelModel::CoopOaf { .. } => S::lit(0.5),
            ChannelModel::PiecewiseLinear(p) => p.r_max(),
        }
    }

    /// Whether the model defines its tradeoff at coding duration `t`.
    pub fn supports_duration(&self, t: u32) -> bool {
        match self {
            ChannelModel::SisoFastFading | ChannelModel::PiecewiseLinear(_) => t >= 1,
            ChannelModel::MimoQuasiStatic { n_t, .. } => t >= *n_t,
            ChannelModel::CoopOaf { v } => u64::from(t) == 2 * (u64::from(*v) + 1),
        }
    }

    /// Diversity d_ch(r, T) for an admissible integer duration.
    pub fn d_ch(&self, r: S, t: u32) -> Result<S> {
        if t == 0 || !self.supports_duration(t) {
            return Err(Error::domain(format!(
                "coding duration T = {t} is not admissible for {self:?}"
            )));
        }
        self.d_ch_relaxed(r, S::from_count(t.into()))
    }

    /// d_ch with a real-valued duration, used by the integer-relaxed optimizer.
    /// Only the range of r is checked.
    pub(crate) fn d_ch_relaxed(&self, r: S, t: S) -> Result<S> {
        let r_max = self.r_max();
        if !(r >= S::zero() && r <= r_max) {
            return Err(Error::domain(format!(
                "multiplexing gain {r} outside [0, {r_max}]"
            )));
        }
        Ok(match self {
            ChannelModel::SisoFastFading => t * (S::one() - r),
            ChannelModel::MimoQuasiStatic { n_t, n_r } => {
                interpolate(&mimo_corners::<S>(*n_t, *n_r), r)
            }
            ChannelModel::CoopOaf { v } => {
                S::from_count(u64::from(*v) + 1) * (S::one() - S::lit(2.0) * r)
            }
            ChannelModel::PiecewiseLinear(p) => {
                let d = interpolate(&p.points, r);
                match p.t_dependence {
                    TDependence::MultiplyByT => t * d,
                    TDependence::Independent => d,
                }
            }
        })
    }

    /// Durations in {1, …, ⌊D/2⌋} that the model supports, ascending.
    pub fn admissible_t(&self, delay: u32) -> Result<Vec<u32>> {
        if delay < 2 {
            return Err(Error::domain(format!(
                "delay bound must be at least 2, got {delay}"
            )));
        }
        let set: Vec<u32> = (1..=delay / 2)
            .filter(|&t| self.supports_duration(t))
            .collect();
        if set.is_empty() {
            Err(Error::EmptyAdmissibleSet { delay })
        } else {
            Ok(set)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_models() -> Vec<ChannelModel<f64>> {
        vec![
            ChannelModel::SisoFastFading,
            ChannelModel::mimo(2, 2).unwrap(),
            ChannelModel::mimo(3, 2).unwrap(),
            ChannelModel::mimo(1, 4).unwrap(),
            ChannelModel::coop(3).unwrap(),
            ChannelModel::PiecewiseLinear(
                PiecewiseDmt::new(
                    vec![(0.0, 3.0), (0.4, 1.0), (0.9, 0.0)],
                    TDependence::MultiplyByT,
                )
                .unwrap(),
            ),
        ]
    }

    #[test]
    fn d_ch_examples() {
        let siso = ChannelModel::<f64>::SisoFastFading;
        assert_eq!(siso.d_ch(0.0, 5).unwrap(), 5.0);
        let mimo = ChannelModel::<f64>::mimo(2, 2).unwrap();
        for t in 2..8 {
            assert_eq!(mimo.d_ch(1.0, t).unwrap(), 1.0);
        }
        assert_eq!(mimo.d_ch(0.5, 2).unwrap(), 2.5);
    }

    #[test]
    fn r_max_examples() {
        assert_eq!(ChannelModel::<f64>::SisoFastFading.r_max(), 1.0);
        assert_eq!(ChannelModel::<f64>::coop(3).unwrap().r_max(), 0.5);
        assert_eq!(ChannelModel::<f64>::mimo(2, 2).unwrap().r_max(), 2.0);
        assert_eq!(ChannelModel::<f64>::mimo(4, 3).unwrap().r_max(), 3.0);
    }

    #[test]
    fn admissible_examples() {
        assert_eq!(
            ChannelModel::<f64>::SisoFastFading
                .admissible_t(21)
                .unwrap(),
            (1..=10).collect::<Vec<_>>()
        );
        assert_eq!(
            ChannelModel::<f64>::mimo(2, 2)
                .unwrap()
                .admissible_t(11)
                .unwrap(),
            vec![2, 3, 4, 5]
        );
        assert_eq!(
            ChannelModel::<f64>::coop(4)
                .unwrap()
                .admissible_t(21)
                .unwrap(),
            vec![10]
        );
        assert!(matches!(
            ChannelModel::<f64>::coop(5).unwrap().admissible_t(21),
            Err(Error::EmptyAdmissibleSet { delay: 21 })
        ));
        assert!(ChannelModel::<f64>::SisoFastFading.admissible_t(1).is_err());
    }

    #[test]
    fn inadmissible_inputs_rejected() {
        let mimo = ChannelModel::<f64>::mimo(2, 2).unwrap();
        assert!(mimo.d_ch(1.0, 1).is_err());
        assert!(mimo.d_ch(2.5, 2).is_err());
        let coop = ChannelModel::<f64>::coop(2).unwrap();
        assert!(coop.d_ch(0.1, 5).is_err());
        assert!(coop.d_ch(0.1, 6).is_ok());
        assert!(ChannelModel::<f64>::SisoFastFading.d_ch(-0.1, 1).is_err());
        assert!(ChannelModel::<f64>::SisoFastFading.d_ch(0.5, 0).is_err());
    }

    #[test]
    fn vanishes_at_r_max_and_decreases() {
        for model in all_models() {
            let r_max = model.r_max();
            for t in model.admissible_t(40).unwrap() {
                assert_eq!(model.d_ch(r_max, t).unwrap(), 0.0, "{model:?}");
                let grid: Vec<f64> = (0..50)
                    .map(|i| model.d_ch(r_max * i as f64 / 49.0, t).unwrap())
                    .collect();
                assert!(grid.windows(2).all(|w| w[1] <= w[0]), "{model:?}");
                assert!(
                    grid.windows(2).all(|w| w[1] < w[0]),
                    "{model:?} not strictly decreasing"
                );
            }
        }
    }

    #[test]
    fn non_decreasing_in_t() {
        for model in all_models() {
            let ts = model.admissible_t(40).unwrap();
            for i in 0..=10 {
                let r = model.r_max() * i as f64 / 10.0;
                let col: Vec<f64> = ts.iter().map(|&t| model.d_ch(r, t).unwrap()).collect();
                assert!(col.windows(2).all(|w| w[1] >= w[0]));
            }
        }
    }

    #[test]
    fn siso_scales_exactly_with_t() {
        let siso = ChannelModel::<f64>::SisoFastFading;
        for i in 0..=20 {
            let r = i as f64 / 20.0;
            let per_slot = siso.d_ch(r, 1).unwrap();
            for t in 2..12 {
                let scaled = siso.d_ch(r, t).unwrap() / t as f64;
                assert!(
                    (scaled - per_slot).abs() <= 2.0 * f64::EPSILON * per_slot,
                    "{scaled} vs {per_slot}"
                );
            }
        }
    }

    #[test]
    fn mimo_exact_at_corners() {
        for (n_t, n_r) in [(2, 2), (3, 5), (4, 4), (1, 3)] {
            let m = ChannelModel::<f64>::mimo(n_t, n_r).unwrap();
            for k in 0..=n_t.min(n_r) {
                assert_eq!(
                    m.d_ch(k as f64, n_t).unwrap(),
                    ((n_t - k) * (n_r - k)) as f64
                );
            }
        }
    }

    #[test]
    fn piecewise_from_json() {
        let json = r#"{"points":[[0,4],[1,1],[2,0]],"t_dependence":"independent"}"#;
        let p = PiecewiseDmt::<f64>::from_json(json).unwrap();
        let model = ChannelModel::PiecewiseLinear(p.clone());
        assert_eq!(model.r_max(), 2.0);
        let mimo = ChannelModel::<f64>::mimo(2, 2).unwrap();
        for i in 0..=20 {
            let r = i as f64 / 10.0;
            assert_eq!(model.d_ch(r, 3).unwrap(), mimo.d_ch(r, 3).unwrap());
        }
        let back = serde_json::to_string(&p).unwrap();
        assert_eq!(PiecewiseDmt::<f64>::from_json(&back).unwrap(), p);

        let scaled = r#"{"points":[[0,1],[1,0]],"t_dependence":"multiply_by_t"}"#;
        let siso_like =
            ChannelModel::PiecewiseLinear(PiecewiseDmt::<f64>::from_json(scaled).unwrap());
        assert_eq!(siso_like.d_ch(0.25, 4).unwrap(), 3.0);
    }

    #[test]
    fn piecewise_rejects_bad_curves() {
        for json in [
            r#"{"points":[[0,4],[1,1],[2,0.5]],"t_dependence":"independent"}"#,
            r#"{"points":[[0,4],[1,5],[2,0]],"t_dependence":"independent"}"#,
            r#"{"points":[[0,4],[0,1],[2,0]],"t_dependence":"independent"}"#,
            r#"{"points":[[0.5,4],[2,0]],"t_dependence":"independent"}"#,
            r#"{"points":[[0,0]],"t_dependence":"independent"}"#,
            r#"{"points":[[0,1],[1,0]],"t_dependence":"sometimes"}"#,
        ] {
            assert!(PiecewiseDmt::<f64>::from_json(json).is_err(), "{json}");
        }
    }
}
