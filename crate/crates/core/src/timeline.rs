//! Time-varying ground truth: azimuth trajectories, activity spans and the
//! per-session bundle of both.

use serde::{Deserialize, Serialize};

use crate::angle::{signed_diff_deg, wrap_deg};
use crate::error::{Error, Result};

/// Piecewise-linear azimuth over `[0, end_s]`.
///
/// Consecutive keyframes are joined along the shorter arc, so keyframes must be
/// less than 180° apart to describe a rotation unambiguously. Before the first
/// and after the last keyframe the azimuth is held constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    keyframes: Vec<(f64, f64)>,
    end_s: f64,
}

impl Trajectory {
    pub fn constant(azimuth_deg: f64, end_s: f64) -> Self {
        Self {
            keyframes: vec![(0.0, wrap_deg(azimuth_deg))],
            end_s,
        }
    }

    pub fn from_keyframes(keyframes: Vec<(f64, f64)>, end_s: f64) -> Result<Self> {
        if keyframes.is_empty() {
            return Err(Error::param("trajectory needs at least one keyframe"));
        }
        for (i, &(t, a)) in keyframes.iter().enumerate() {
            if !t.is_finite() || !a.is_finite() {
                return Err(Error::param(format!("keyframe {i} is not finite")));
            }
            if i > 0 && t <= keyframes[i - 1].0 {
                return Err(Error::param(format!("keyframe {i} is not after keyframe {}", i - 1)));
            }
        }
        if !(end_s >= 0.0) {
            return Err(Error::param("trajectory end must be nonnegative"));
        }
        Ok(Self {
            keyframes: keyframes.into_iter().map(|(t, a)| (t, wrap_deg(a))).collect(),
            end_s,
        })
    }

    pub fn keyframes(&self) -> &[(f64, f64)] {
        &self.keyframes
    }

    pub fn end_s(&self) -> f64 {
        self.end_s
    }

    pub fn with_end(mut self, end_s: f64) -> Self {
        self.end_s = end_s;
        self
    }

    /// Azimuth at `t_s`; errors outside `[0, end_s]`.
    pub fn sample(&self, t_s: f64) -> Result<f64> {
        if !(t_s >= 0.0 && t_s <= self.end_s) {
            return Err(Error::param(format!(
                "time {t_s} s outside trajectory range [0, {}]",
                self.end_s
            )));
        }
        Ok(self.sample_clamped(t_s))
    }

    /// Azimuth at `t_s`, holding the end values outside the keyframe span.
    pub fn sample_clamped(&self, t_s: f64) -> f64 {
        let kf = &self.keyframes;
        if t_s <= kf[0].0 {
            return kf[0].1;
        }
        let last = kf[kf.len() - 1];
        if t_s >= last.0 {
            return last.1;
        }
        let i = kf.partition_point(|k| k.0 <= t_s) - 1;
        let (t0, a0) = kf[i];
        let (t1, a1) = kf[i + 1];
        let d = signed_diff_deg(a1, a0);
        wrap_deg(a0 + d * (t_s - t0) / (t1 - t0))
    }

    /// Largest unwrapped excursion from the azimuth at `t0` over `[t0, t1]`.
    pub fn max_change(&self, t0: f64, t1: f64) -> f64 {
        let mut times = vec![t0];
        times.extend(self.keyframes.iter().map(|k| k.0).filter(|&t| t > t0 && t < t1));
        times.push(t1);
        let mut prev = self.sample_clamped(t0);
        let mut cumulative = 0.0_f64;
        let mut max = 0.0_f64;
        for &t in &times[1..] {
            let a = self.sample_clamped(t);
            cumulative += signed_diff_deg(a, prev);
            max = max.max(cumulative.abs());
            prev = a;
        }
        max
    }
}

/// `sample_trajectory(traj, t)`: azimuth of `traj` at `t_s`.
pub fn sample_trajectory(traj: &Trajectory, t_s: f64) -> Result<f64> {
    traj.sample(t_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivitySpan {
    pub start_s: f64,
    pub end_s: f64,
}

impl ActivitySpan {
    pub fn new(start_s: f64, end_s: f64) -> Self {
        Self { start_s, end_s }
    }
}

/// Union of possibly overlapping spans, sorted by start time.
pub fn merge_spans(mut spans: Vec<ActivitySpan>) -> Vec<ActivitySpan> {
    spans.retain(|s| s.end_s >= s.start_s);
    spans.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    let mut out: Vec<ActivitySpan> = Vec::with_capacity(spans.len());
    for s in spans {
        match out.last_mut() {
            Some(last) if s.start_s <= last.end_s => last.end_s = last.end_s.max(s.end_s),
            _ => out.push(s),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerTrack {
    pub id: String,
    /// Room-frame azimuth of the speaker.
    pub trajectory: Trajectory,
    /// Merged voice-activity spans.
    pub spans: Vec<ActivitySpan>,
}

impl SpeakerTrack {
    pub fn active_at(&self, t_s: f64) -> bool {
        self.spans.iter().any(|s| s.start_s <= t_s && t_s <= s.end_s)
    }

    /// Whether one span covers the whole of `[t0, t1]`.
    pub fn active_throughout(&self, t0: f64, t1: f64) -> bool {
        self.spans.iter().any(|s| s.start_s <= t0 && t1 <= s.end_s)
    }
}

/// Per-session ground truth: speaker tracks plus the array yaw `δ_array(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub speakers: Vec<SpeakerTrack>,
    pub array_yaw: Trajectory,
    pub duration_s: f64,
}

impl SessionMeta {
    pub fn speaker(&self, id: &str) -> Option<&SpeakerTrack> {
        self.speakers.iter().find(|s| s.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_trajectory() {
        let t = Trajectory::constant(42.0, 3.0);
        for s in [0.0, 1.3, 3.0] {
            assert_eq!(sample_trajectory(&t, s).unwrap(), 42.0);
        }
    }

    #[test]
    fn linear_midpoint() {
        let t = Trajectory::from_keyframes(vec![(0.0, 0.0), (1.0, 90.0)], 1.0).unwrap();
        assert_eq!(sample_trajectory(&t, 0.5).unwrap(), 45.0);
    }

    #[test]
    fn shorter_arc_across_180() {
        let t = Trajectory::from_keyframes(vec![(0.0, 170.0), (1.0, -170.0)], 1.0).unwrap();
        assert_eq!(sample_trajectory(&t, 0.5).unwrap(), 180.0);
        assert_eq!(sample_trajectory(&t, 0.75).unwrap(), -175.0);
    }

    #[test]
    fn out_of_range_is_an_error() {
        let t = Trajectory::constant(0.0, 1.0);
        assert!(matches!(t.sample(1.5), Err(Error::Parameter(_))));
        assert!(matches!(t.sample(-0.1), Err(Error::Parameter(_))));
    }

    #[test]
    fn keyframes_must_increase() {
        assert!(Trajectory::from_keyframes(vec![(1.0, 0.0), (1.0, 5.0)], 2.0).is_err());
        assert!(Trajectory::from_keyframes(vec![], 2.0).is_err());
    }

    #[test]
    fn max_change_tracks_excursions() {
        let t = Trajectory::from_keyframes(vec![(0.0, 0.0), (1.0, 10.0), (2.0, 0.0)], 2.0).unwrap();
        assert_eq!(t.max_change(0.0, 2.0), 10.0);
        let spin = Trajectory::from_keyframes(vec![(0.0, 170.0), (1.0, -170.0)], 1.0).unwrap();
        assert_eq!(spin.max_change(0.0, 1.0), 20.0);
    }

    #[test]
    fn spans_merge() {
        let m = merge_spans(vec![
            ActivitySpan::new(2.0, 3.0),
            ActivitySpan::new(0.0, 1.0),
            ActivitySpan::new(0.5, 1.5),
        ]);
        assert_eq!(m, vec![ActivitySpan::new(0.0, 1.5), ActivitySpan::new(2.0, 3.0)]);
    }
}
