//! Fixed-length analysis intervals, their activity and motion labels.

use serde::Serialize;

use crate::angle::wrap_deg;
use crate::timeline::SessionMeta;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalRecord {
    pub index: usize,
    pub start_s: f64,
    pub end_s: f64,
    /// Mid-time `T`, the label of the interval.
    pub t_mid_s: f64,
    pub active: bool,
    /// Number of speakers active throughout the interval.
    pub k: usize,
    pub speaker_ids: Vec<String>,
    /// Array yaw at `T`.
    pub delta_array_deg: f64,
    /// Some active speaker moves more than `ζ` within the interval.
    pub dynamic: bool,
}

/// Room-frame DOA from an array-frame DOA and the array yaw.
pub fn to_room_frame(phi_hat_deg: f64, delta_array_deg: f64) -> f64 {
    wrap_deg(phi_hat_deg + delta_array_deg)
}

/// Number of complete intervals of length `interval_s` in `duration_s`.
pub fn interval_count(duration_s: f64, interval_s: f64) -> usize {
    // tolerate rounding in durations that are whole multiples of the interval
    ((duration_s / interval_s) + 1e-9).floor().max(0.0) as usize
}

/// Splits the session into intervals `[iΔT, (i+1)ΔT]` aligned at `t = 0`.
///
/// An interval is active when at least one speaker is active for all of it;
/// `K` counts those speakers.
pub fn segment_intervals(meta: &SessionMeta, interval_s: f64, zeta_deg: f64) -> Vec<IntervalRecord> {
    (0..interval_count(meta.duration_s, interval_s))
        .map(|i| {
            let start = i as f64 * interval_s;
            let end = (i + 1) as f64 * interval_s;
            let t_mid = (start + end) / 2.0;
            let speakers: Vec<_> = meta
                .speakers
                .iter()
                .filter(|s| s.active_throughout(start, end))
                .collect();
            let dynamic = speakers
                .iter()
                .any(|s| s.trajectory.max_change(start, end) > zeta_deg);
            IntervalRecord {
                index: i,
                start_s: start,
                end_s: end,
                t_mid_s: t_mid,
                active: !speakers.is_empty(),
                k: speakers.len(),
                speaker_ids: speakers.iter().map(|s| s.id.clone()).collect(),
                delta_array_deg: meta.array_yaw.sample_clamped(t_mid),
                dynamic,
            }
        })
        .collect()
}

/// Share of dynamic intervals for every (ΔT, ζ) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicTable {
    pub interval_ms: Vec<f64>,
    pub zeta_deg: Vec<f64>,
    /// `percent[i][j]` for `interval_ms[i]`, `zeta_deg[j]`; `None` without active intervals.
    pub percent: Vec<Vec<Option<f64>>>,
}

pub const TABLE_INTERVALS_MS: [f64; 5] = [100.0, 300.0, 500.0, 1000.0, 5000.0];
pub const TABLE_ZETAS_DEG: [f64; 4] = [3.0, 5.0, 7.0, 10.0];

/// Percentage of active intervals in which some active speaker's true
/// azimuth changes by more than `ζ`.
pub fn classify_dynamic(meta: &SessionMeta, intervals_ms: &[f64], zetas_deg: &[f64]) -> DynamicTable {
    let percent = intervals_ms
        .iter()
        .map(|&ms| {
            let records = segment_intervals(meta, ms / 1000.0, f64::INFINITY);
            let active: Vec<&IntervalRecord> = records.iter().filter(|r| r.active).collect();
            let changes: Vec<f64> = active
                .iter()
                .map(|r| {
                    r.speaker_ids
                        .iter()
                        .filter_map(|id| meta.speaker(id))
                        .map(|s| s.trajectory.max_change(r.start_s, r.end_s))
                        .fold(0.0, f64::max)
                })
                .collect();
            zetas_deg
                .iter()
                .map(|&z| {
                    (!changes.is_empty()).then(|| {
                        100.0 * changes.iter().filter(|&&c| c > z).count() as f64 / changes.len() as f64
                    })
                })
                .collect()
        })
        .collect();
    DynamicTable {
        interval_ms: intervals_ms.to_vec(),
        zeta_deg: zetas_deg.to_vec(),
        percent,
    }
}
