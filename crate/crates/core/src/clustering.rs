//! Subtractive weighted clustering of per-bin DOA estimates on a 1° ring
//! histogram, with cluster qualities `Q(k) = W_k / W_{K+1}`.
//!
//! The histogram has 360 bins labelled -179..=180; 180 and -180 are the same
//! bin. Window sums, zeroing and cluster means all wrap around the ring.

use serde::{Deserialize, Serialize};

use crate::angle::{signed_diff_deg, wrap_deg};

pub const HISTOGRAM_BINS: usize = 360;
pub const DEFAULT_Q_CAP: f64 = 1e6;

/// Ring label (-179..=180) of the histogram bin holding `theta_deg`.
///
/// Rounds half up, so 0.5 goes to bin 1 and 180.5 to bin -179.
pub fn bin_label(theta_deg: f64) -> i32 {
    let i = (theta_deg + 0.5).floor();
    wrap_deg(i) as i32
}

fn label_to_slot(label: i32) -> usize {
    (label + 179) as usize
}

fn slot_to_label(slot: usize) -> i32 {
    slot as i32 - 179
}

/// Slot `offset` steps away from `slot` around the ring.
fn ring_slot(slot: usize, offset: i64) -> usize {
    (slot as i64 + offset).rem_euclid(HISTOGRAM_BINS as i64) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedHistogram {
    bins: [f64; HISTOGRAM_BINS],
    total_weight: f64,
}

impl Default for WeightedHistogram {
    fn default() -> Self {
        Self {
            bins: [0.0; HISTOGRAM_BINS],
            total_weight: 0.0,
        }
    }
}

impl WeightedHistogram {
    pub fn get(&self, label: i32) -> f64 {
        self.bins[label_to_slot(label)]
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn add(&mut self, theta_deg: f64, w: f64) {
        debug_assert!(w >= 0.0);
        self.bins[label_to_slot(bin_label(theta_deg))] += w;
        self.total_weight += w;
    }

    fn window_sum(&self, slot: usize, delta: usize) -> f64 {
        let d = delta as i64;
        (-d..=d).map(|o| self.bins[ring_slot(slot, o)]).sum()
    }

    fn zero_window(&mut self, slot: usize, delta: usize) {
        let d = delta as i64;
        for o in -d..=d {
            self.bins[ring_slot(slot, o)] = 0.0;
        }
    }
}

/// Builds the histogram of `(theta_hat_deg, weight)` pairs.
pub fn accumulate(estimates: &[(f64, f64)]) -> WeightedHistogram {
    let mut h = WeightedHistogram::default();
    for &(theta, w) in estimates {
        h.add(theta, w);
    }
    h
}

/// A cluster window picked by the greedy window-maximum search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProvisionalCluster {
    /// Window centre label; `None` once the histogram is exhausted.
    pub center: Option<i32>,
    /// Weight captured inside the window at selection time.
    pub weight: f64,
}

/// Greedy extraction of `count` window maxima, zeroing each selected window.
///
/// Window sums cover `[i - δ, i + δ]` around the ring. Equal sums are broken
/// by the sums over progressively narrower windows (`δ - 1`, ..., `0`), which
/// centres a window on its mass; any remaining tie goes to the lowest label.
/// Once every window sum is zero the remaining clusters are undefined with
/// zero weight.
pub fn subtractive_cluster(h: &WeightedHistogram, count: usize, delta: usize) -> Vec<ProvisionalCluster> {
    let mut h = h.clone();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let (slot, best) = best_window(&h, delta);
        if !(best > 0.0) {
            out.push(ProvisionalCluster {
                center: None,
                weight: 0.0,
            });
            continue;
        }
        out.push(ProvisionalCluster {
            center: Some(slot_to_label(slot)),
            weight: best,
        });
        h.zero_window(slot, delta);
    }
    out
}

fn best_window(h: &WeightedHistogram, delta: usize) -> (usize, f64) {
    let mut candidates: Vec<usize> = (0..HISTOGRAM_BINS).collect();
    let mut top = 0.0;
    for radius in (0..=delta).rev() {
        let sums: Vec<f64> = candidates.iter().map(|&s| h.window_sum(s, radius)).collect();
        let max = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if radius == delta {
            top = max;
        }
        candidates = candidates
            .iter()
            .zip(&sums)
            .filter(|(_, v)| **v == max)
            .map(|(s, _)| *s)
            .collect();
        if candidates.len() == 1 {
            break;
        }
    }
    (candidates[0], top)
}

/// Weighted mean of the members, each unwrapped to the representative nearest
/// `center_deg`; `None` when the total weight is zero.
pub fn cluster_doa(members: &[(f64, f64)], center_deg: f64) -> Option<f64> {
    let total: f64 = members.iter().map(|m| m.1).sum();
    if !(total > 0.0) {
        return None;
    }
    let sum: f64 = members
        .iter()
        .map(|&(theta, w)| w * (center_deg + signed_diff_deg(theta, center_deg)))
        .sum();
    Some(wrap_deg(sum / total))
}

/// `Q(k) = W_k / W_{K+1}` for the first `weights.len() - 1` clusters.
///
/// If `W_{K+1} = 0` every cluster with positive weight gets `q_cap`; clusters
/// with zero weight get 0.
pub fn quality(weights: &[f64], q_cap: f64) -> Vec<f64> {
    let Some((&residual, head)) = weights.split_last() else {
        return Vec::new();
    };
    head.iter()
        .map(|&w| {
            if residual > 0.0 {
                w / residual
            } else if w > 0.0 {
                q_cap
            } else {
                0.0
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    /// 1-based rank in selection order.
    pub k: usize,
    pub center_deg: Option<i32>,
    pub theta_hat_deg: Option<f64>,
    pub weight: f64,
    pub member_count: usize,
    pub quality: f64,
}

impl ClusterResult {
    pub fn is_defined(&self) -> bool {
        self.theta_hat_deg.is_some()
    }
}

/// The `K` speaker clusters of one interval plus the first unclaimed window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub clusters: Vec<ClusterResult>,
    pub residual_center_deg: Option<i32>,
    pub residual_weight: f64,
}

/// Runs the full procedure on the valid `(theta_hat_deg, w)` pairs of one
/// interval with `k` active speakers.
pub fn cluster_interval(estimates: &[(f64, f64)], k: usize, delta: usize, q_cap: f64) -> ClusterSet {
    let hist = accumulate(estimates);
    let provisional = subtractive_cluster(&hist, k + 1, delta);

    let mut claimed = vec![false; HISTOGRAM_BINS];
    let mut clusters = Vec::with_capacity(k + 1);
    for (rank, p) in provisional.iter().enumerate() {
        let Some(center) = p.center else {
            clusters.push(ClusterResult {
                k: rank + 1,
                center_deg: None,
                theta_hat_deg: None,
                weight: 0.0,
                member_count: 0,
                quality: 0.0,
            });
            continue;
        };
        let center_slot = label_to_slot(center);
        let d = delta as i64;
        let window: Vec<usize> = (-d..=d).map(|o| ring_slot(center_slot, o)).collect();
        let mut in_window = vec![false; HISTOGRAM_BINS];
        for &s in &window {
            if !claimed[s] {
                in_window[s] = true;
            }
        }
        let members: Vec<(f64, f64)> = estimates
            .iter()
            .copied()
            .filter(|&(theta, _)| in_window[label_to_slot(bin_label(theta))])
            .collect();
        for &s in &window {
            claimed[s] = true;
        }
        clusters.push(ClusterResult {
            k: rank + 1,
            center_deg: Some(center),
            theta_hat_deg: cluster_doa(&members, center as f64),
            weight: p.weight,
            member_count: members.len(),
            quality: 0.0,
        });
    }

    let weights: Vec<f64> = clusters.iter().map(|c| c.weight).collect();
    let qualities = quality(&weights, q_cap);
    let residual = clusters.pop().expect("k + 1 clusters");
    for (c, q) in clusters.iter_mut().zip(qualities) {
        c.quality = q;
    }
    ClusterSet {
        clusters,
        residual_center_deg: residual.center_deg,
        residual_weight: residual.weight,
    }
}
