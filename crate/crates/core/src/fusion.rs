//! Two-stage graphical model: PAN and MS beliefs combine into PM, then PM and
//! the Landsat belief combine into the final water node W. Every node is
//! binary and the marginals are computed by exact enumeration.

use crate::error::{Error, Result};
use crate::morpho::SegmentMap;
use crate::raster::{BinaryMask, RasterGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum State {
    NonWater,
    Water,
}

impl State {
    pub const BOTH: [State; 2] = [State::NonWater, State::Water];

    /// Probability of this state under a water probability `p`.
    pub fn prob(self, p_water: f64) -> f64 {
        match self {
            State::Water => p_water,
            State::NonWater => 1.0 - p_water,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams {
    pub n1: u32,
    pub n2: u32,
    pub r_ms: f64,
    pub r_l: f64,
    pub decision_threshold: f64,
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams {
            n1: 2,
            n2: 1,
            r_ms: 3.2,
            r_l: 30.0,
            decision_threshold: 0.5,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::Config("n1 and n2 must be at least 1".into()));
        }
        if !(self.r_ms > 0.0 && self.r_l > 0.0) {
            return Err(Error::Config("r_ms and r_l must be positive".into()));
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return Err(Error::Config("decision_threshold must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

pub fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Weight given to the MS parent when PAN and MS disagree.
pub fn ms_weight(w: f64, p_shadow: f64, params: &FusionParams) -> f64 {
    sigmoid((w / (params.n1 as f64 * params.r_ms) + p_shadow) / 2.0)
}

/// Weight given to the Landsat parent when PM and Landsat disagree; zero for
/// segments smaller than `n2·r_L`.
pub fn lan_weight(w: f64, params: &FusionParams) -> f64 {
    let scale = params.n2 as f64 * params.r_l;
    if w - scale >= 0.0 {
        sigmoid(w / scale)
    } else {
        0.0
    }
}

/// P(PM = pm | PAN = pan, MS = ms).
pub fn cpd_pm(pm: State, pan: State, ms: State, w: f64, p_shadow: f64, params: &FusionParams) -> f64 {
    let s = ms_weight(w, p_shadow, params);
    if pm == pan && pm == ms {
        1.0
    } else if pm == pan {
        1.0 - s
    } else if pm == ms {
        s
    } else {
        0.0
    }
}

/// P(W = w_state | PM = pm, LAN = lan).
pub fn cpd_w(w_state: State, pm: State, lan: State, w: f64, params: &FusionParams) -> f64 {
    let s = lan_weight(w, params);
    if w_state == pm && w_state == lan {
        1.0
    } else if w_state == pm {
        1.0 - s
    } else if w_state == lan {
        s
    } else {
        0.0
    }
}

/// P(PM = water), marginalising over independent PAN and MS beliefs.
///
/// Summing the CPD over the four parent configurations collapses to
/// `p_pan + S·(p_ms − p_pan)`; that form is used so that agreement between
/// the parents is returned unchanged.
pub fn fuse_pm(p_pan: f64, p_ms: f64, w: f64, p_shadow: f64, params: &FusionParams) -> f64 {
    p_pan + ms_weight(w, p_shadow, params) * (p_ms - p_pan)
}

/// P(W = water), marginalising over independent PM and Landsat beliefs:
/// `p_pm + S_L·(p_lan − p_pm)`, which is exactly `p_pm` below the Landsat
/// size limit.
pub fn fuse_w(p_pm: f64, p_lan: f64, w: f64, params: &FusionParams) -> f64 {
    p_pm + lan_weight(w, params) * (p_lan - p_pm)
}

pub fn decide(p_w: f64, params: &FusionParams) -> State {
    if p_w > params.decision_threshold {
        State::Water
    } else {
        State::NonWater
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFusion {
    pub p_pm: f64,
    pub p_w: f64,
    pub water: bool,
}

/// Per-segment fusion plus its PAN-grid rasterisation.
#[derive(Debug, Clone)]
pub struct FusionResult {
    pub segments: Vec<SegmentFusion>,
    pub probability: RasterGrid,
    pub water: BinaryMask,
}

pub fn fuse_all_segments(segmap: &SegmentMap, params: &FusionParams) -> Result<FusionResult> {
    params.validate()?;
    let segments: Vec<SegmentFusion> = segmap
        .records
        .iter()
        .map(|r| {
            for (name, p) in [("p_pan", r.p_pan), ("p_ms", r.p_ms), ("p_lan", r.p_lan), ("p_shadow", r.p_shadow)] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidInput(format!("segment {}: {name} = {p}", r.id)));
                }
            }
            let p_pm = fuse_pm(r.p_pan, r.p_ms, r.w, r.p_shadow, params);
            let p_w = fuse_w(p_pm, r.p_lan, r.w, params);
            Ok(SegmentFusion {
                p_pm,
                p_w,
                water: decide(p_w, params) == State::Water,
            })
        })
        .collect::<Result<_>>()?;
    let probs: Vec<f64> = segments.iter().map(|s| s.p_w).collect();
    let probability = segmap.broadcast(&probs, "p_water")?;
    let water = BinaryMask::from_fn(*segmap.geometry(), |i| segments[segmap.label_at(i) as usize].water);
    Ok(FusionResult {
        segments,
        probability,
        water,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GridGeometry;
    use proptest::prelude::*;

    const P: FusionParams = FusionParams {
        n1: 2,
        n2: 1,
        r_ms: 3.2,
        r_l: 30.0,
        decision_threshold: 0.5,
    };

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(2.0) - 0.880797).abs() < 1e-6);
        for t in [-3.0, -0.1, 0.7, 12.0] {
            assert!((sigmoid(t) + sigmoid(-t) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn pm_cpd_branches() {
        use State::*;
        assert_eq!(cpd_pm(Water, Water, Water, 6.4, 0.0, &P), 1.0);
        assert_eq!(cpd_pm(NonWater, Water, Water, 6.4, 0.0, &P), 0.0);
        assert!((cpd_pm(Water, NonWater, Water, 6.4, 0.0, &P) - 0.622459).abs() < 1e-6);
        assert!((cpd_pm(Water, Water, NonWater, 6.4, 0.0, &P) - 0.377541).abs() < 1e-6);
    }

    #[test]
    fn w_cpd_branches() {
        use State::*;
        assert_eq!(cpd_w(Water, Water, NonWater, 15.0, &P), 1.0);
        assert_eq!(cpd_w(Water, NonWater, Water, 15.0, &P), 0.0);
        assert!((cpd_w(Water, NonWater, Water, 60.0, &P) - 0.880797).abs() < 1e-6);
        assert_eq!(cpd_w(Water, Water, Water, 60.0, &P), 1.0);
        // δ switches on at exactly n2·r_L.
        assert_eq!(cpd_w(Water, NonWater, Water, 30.0, &P), sigmoid(1.0));
    }

    #[test]
    fn worked_marginals() {
        // 0.09 + 0.81·(1 − S) + 0.01·S with S = sigmoid(0.25), and with S = sigmoid(2).
        assert!((fuse_pm(0.9, 0.1, 3.2, 0.0, &P) - 0.450259).abs() < 1e-6);
        assert!((fuse_w(0.9, 0.1, 60.0, &P) - 0.195362).abs() < 1e-6);
        assert_eq!(fuse_w(0.37, 0.91, 15.0, &P), 0.37);
        assert_eq!(decide(fuse_pm(0.9, 0.1, 3.2, 0.0, &P), &P), State::NonWater);
    }

    #[test]
    fn matches_enumeration() {
        for &(pa, pb, w, sh) in &[(0.9, 0.1, 3.2, 0.0), (0.2, 0.7, 40.0, 0.3), (0.5, 0.5, 500.0, 1.0)] {
            let mut pm = 0.0;
            let mut ww = 0.0;
            for x in State::BOTH {
                for y in State::BOTH {
                    pm += cpd_pm(State::Water, x, y, w, sh, &P) * x.prob(pa) * y.prob(pb);
                    ww += cpd_w(State::Water, x, y, w, &P) * x.prob(pa) * y.prob(pb);
                }
            }
            assert!((fuse_pm(pa, pb, w, sh, &P) - pm).abs() < 1e-15);
            assert!((fuse_w(pa, pb, w, &P) - ww).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn fused_value_lies_between_parents(
            a in 0.0f64..=1.0,
            b in 0.0f64..=1.0,
            w in 0.1f64..500.0,
            sh in 0.0f64..=1.0,
        ) {
            let (lo, hi) = (a.min(b) - 1e-15, a.max(b) + 1e-15);
            let pm = fuse_pm(a, b, w, sh, &P);
            let pw = fuse_w(a, b, w, &P);
            prop_assert!(lo <= pm && pm <= hi);
            prop_assert!(lo <= pw && pw <= hi);
            // The MS weight grows with segment size, pulling PM towards MS.
            prop_assert!((fuse_pm(a, b, w * 2.0, sh, &P) - b).abs() <= (pm - b).abs() + 1e-15);
        }
    }

    #[test]
    fn decisions_are_strict() {
        assert_eq!(decide(0.51, &P), State::Water);
        assert_eq!(decide(0.5, &P), State::NonWater);
    }

    #[test]
    fn segment_raster_is_piecewise_constant() {
        let g = GridGeometry::new(4, 1, 0.8, 0.0, 0.0).unwrap();
        let mut m = SegmentMap::from_clusters(g, &[0, 0, 1, 1]).unwrap();
        for r in &mut m.records {
            (r.p_pan, r.p_ms, r.p_lan) = (1.0, 1.0, 1.0);
        }
        m.records[1].p_ms = 0.0;
        m.records[1].p_pan = 0.0;
        m.records[1].p_lan = 0.0;
        let f = fuse_all_segments(&m, &P).unwrap();
        assert_eq!(f.probability.band(0), &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(f.water.bits(), &[1, 1, 0, 0]);
    }

    #[test]
    fn rejects_out_of_range() {
        let g = GridGeometry::new(1, 1, 0.8, 0.0, 0.0).unwrap();
        let mut m = SegmentMap::from_clusters(g, &[0]).unwrap();
        m.records[0].p_ms = 1.5;
        assert!(fuse_all_segments(&m, &P).is_err());
    }
}
