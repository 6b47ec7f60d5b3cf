//! Scoring of interval estimates against ground truth.

use serde::Serialize;

use super::config::{PipelineConfig, QualityMode};
use super::estimate::EstimationResult;
use super::intervals::{classify_dynamic, DynamicTable, TABLE_INTERVALS_MS, TABLE_ZETAS_DEG};
use crate::angle::circ_dist_deg;
use crate::timeline::SessionMeta;

/// Subset percentages of the accuracy curves.
pub const CURVE_PERCENTS: [u32; 10] = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub t_mid_s: f64,
    pub k: usize,
    pub theta_hat_deg: f64,
    pub quality: f64,
    pub speaker_id: String,
    pub psi_deg: f64,
    pub error_deg: f64,
    pub valid_bin_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curves {
    pub percent: Vec<u32>,
    /// Mean absolute error of each subset.
    pub mean_error_deg: Option<Vec<f64>>,
    /// Fraction of subset errors above the outlier threshold.
    pub outlier_fraction: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub config: PipelineConfig,
    pub interval_count: usize,
    pub active_intervals: usize,
    pub intervals_with_valid_bins: usize,
    /// Speakers in active intervals without a matching cluster.
    pub misses: usize,
    /// Fraction of active intervals with at least one valid bin.
    pub pr: Option<f64>,
    /// Fraction of valid bins within the low-error threshold of the nearest active speaker.
    pub n_low: Option<f64>,
    pub curves: Curves,
    pub dynamic_table: DynamicTable,
    pub rows: Vec<EvalRow>,
}

/// Assignment of `clusters` (DOAs) to distinct `targets` minimizing the
/// total circular error. Returns the target index of every cluster; the
/// first minimum in lexicographic order wins. Needs `clusters.len() <= targets.len()`.
pub fn assign_min_error(clusters: &[f64], targets: &[f64]) -> Vec<usize> {
    fn search(
        c: usize,
        clusters: &[f64],
        targets: &[f64],
        used: &mut Vec<bool>,
        current: &mut Vec<usize>,
        cost: f64,
        best: &mut (f64, Vec<usize>),
    ) {
        if c == clusters.len() {
            if cost < best.0 {
                *best = (cost, current.clone());
            }
            return;
        }
        for t in 0..targets.len() {
            if used[t] {
                continue;
            }
            used[t] = true;
            current.push(t);
            let e = circ_dist_deg(clusters[c], targets[t]);
            search(c + 1, clusters, targets, used, current, cost + e, best);
            current.pop();
            used[t] = false;
        }
    }
    assert!(clusters.len() <= targets.len(), "more clusters than targets");
    let mut best = (f64::INFINITY, Vec::new());
    search(
        0,
        clusters,
        targets,
        &mut vec![false; targets.len()],
        &mut Vec::new(),
        0.0,
        &mut best,
    );
    best.1
}

/// Indices of the `P %` subset: `round(P·n/100)` rows, at least one, chosen
/// by descending `Q` (stable) or, for the ideal mode, by ascending error.
pub fn select_subset(qualities: &[f64], errors: &[f64], percent: f64, mode: QualityMode) -> Vec<usize> {
    let n = errors.len();
    if n == 0 {
        return Vec::new();
    }
    let size = ((percent * n as f64 / 100.0).round() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    match mode {
        QualityMode::Ideal => order.sort_by(|&a, &b| errors[a].total_cmp(&errors[b])),
        QualityMode::Base | QualityMode::New => order.sort_by(|&a, &b| qualities[b].total_cmp(&qualities[a])),
    }
    order.truncate(size);
    order
}

/// `(M̄_P, n_P)` for one subset percentage.
///
/// Rows tied with the last selected row are included fractionally, sharing
/// the remaining slots equally, so the metrics do not depend on row order.
/// With all qualities equal every subset has the mean of the full set.
pub fn subset_metrics(
    qualities: &[f64],
    errors: &[f64],
    percent: f64,
    mode: QualityMode,
    outlier_deg: f64,
) -> Option<(f64, f64)> {
    let order = select_subset(qualities, errors, 100.0, mode);
    if order.is_empty() {
        return None;
    }
    let size = select_subset(qualities, errors, percent, mode).len();
    let key = |i: usize| match mode {
        QualityMode::Ideal => errors[i],
        QualityMode::Base | QualityMode::New => qualities[i],
    };
    // the boundary group is contiguous in the sorted order
    let boundary = key(order[size - 1]);
    let first = order.iter().position(|&i| key(i) == boundary).expect("boundary row");
    let end = first + order[first..].iter().take_while(|&&i| key(i) == boundary).count();
    let (above, tied) = (&order[..first], &order[first..end]);
    let share = (size - first) as f64 / tied.len() as f64;
    // summed in row order, so P = 100 gives the same value in every mode
    let mut coef = vec![0.0; errors.len()];
    for &i in above {
        coef[i] = 1.0;
    }
    for &i in tied {
        coef[i] = share;
    }
    let sum: f64 = coef.iter().zip(errors).map(|(c, e)| c * e).sum();
    let out: f64 = coef.iter().zip(errors).filter(|(_, &e)| e > outlier_deg).map(|(c, _)| c).sum();
    let n = size as f64;
    Some((sum / n, out / n))
}

pub fn evaluate(results: &EstimationResult, meta: &SessionMeta, config: &PipelineConfig) -> EvalReport {
    let mut rows = Vec::new();
    let mut misses = 0;
    let mut with_valid = 0;
    let (mut low, mut valid_total) = (0usize, 0usize);

    for iv in &results.intervals {
        let speakers: Vec<_> = iv.speaker_ids.iter().filter_map(|id| meta.speaker(id)).collect();
        if !iv.valid_bins.is_empty() {
            with_valid += 1;
        }
        for b in &iv.valid_bins {
            let nearest = speakers
                .iter()
                .map(|s| circ_dist_deg(b.theta_hat_deg(), s.trajectory.sample_clamped(b.time_s())))
                .fold(f64::INFINITY, f64::min);
            valid_total += 1;
            if nearest <= config.low_error_threshold_deg {
                low += 1;
            }
        }
        let psi: Vec<f64> = speakers.iter().map(|s| s.trajectory.sample_clamped(iv.t_mid_s)).collect();
        let thetas: Vec<f64> = iv.clusters.iter().filter_map(|c| c.theta_hat_deg).collect();
        let usable = thetas.len().min(psi.len());
        let assignment = assign_min_error(&thetas[..usable], &psi);
        misses += psi.len() - usable;
        for (c, &s) in iv.clusters.iter().take(usable).zip(&assignment) {
            let theta = c.theta_hat_deg.expect("defined cluster");
            rows.push(EvalRow {
                t_mid_s: iv.t_mid_s,
                k: c.k,
                theta_hat_deg: theta,
                quality: if config.quality_mode == QualityMode::Base { 1.0 } else { c.quality },
                speaker_id: speakers[s].id.clone(),
                psi_deg: psi[s],
                error_deg: circ_dist_deg(theta, psi[s]),
                valid_bin_count: iv.valid_bins.len(),
            });
        }
    }

    let qualities: Vec<f64> = rows.iter().map(|r| r.quality).collect();
    let errors: Vec<f64> = rows.iter().map(|r| r.error_deg).collect();
    let points: Option<Vec<(f64, f64)>> = CURVE_PERCENTS
        .iter()
        .map(|&p| {
            subset_metrics(
                &qualities,
                &errors,
                p as f64,
                config.quality_mode,
                config.outlier_threshold_deg,
            )
        })
        .collect();
    let curves = Curves {
        percent: CURVE_PERCENTS.to_vec(),
        mean_error_deg: points.as_ref().map(|v| v.iter().map(|p| p.0).collect()),
        outlier_fraction: points.as_ref().map(|v| v.iter().map(|p| p.1).collect()),
    };

    let mut intervals_ms = TABLE_INTERVALS_MS.to_vec();
    if !intervals_ms.contains(&config.interval_ms) {
        intervals_ms.push(config.interval_ms);
        intervals_ms.sort_by(f64::total_cmp);
    }
    let mut zetas = TABLE_ZETAS_DEG.to_vec();
    if !zetas.contains(&config.zeta_deg) {
        zetas.push(config.zeta_deg);
        zetas.sort_by(f64::total_cmp);
    }
    let active = results.intervals.len();
    EvalReport {
        config: config.clone(),
        interval_count: results.interval_count,
        active_intervals: active,
        intervals_with_valid_bins: with_valid,
        misses,
        pr: (active > 0).then(|| with_valid as f64 / active as f64),
        n_low: (valid_total > 0).then(|| low as f64 / valid_total as f64),
        curves,
        dynamic_table: classify_dynamic(meta, &intervals_ms, &zetas),
        rows,
    }
}
