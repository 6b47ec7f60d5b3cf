//! Per-interval DOA estimation: spectrum, smoothing, validity, weighting and
//! clustering of the valid bins of every active interval.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{PipelineConfig, QualityMode, WeightMode};
use super::intervals::{to_room_frame, IntervalRecord};
use crate::array::SteeringVectorSet;
use crate::clustering::{cluster_interval, ClusterResult};
use crate::error::{Error, Result};
use crate::spectrum::{compute_spectrum_frames, estimate_bins, smooth_spectrum};
use crate::stft::StftTensor;
use crate::timeline::Trajectory;
use crate::udm::Udm;

/// A valid bin as `(frame time s, room-frame DOA deg, weight)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidBin(pub f64, pub f64, pub f64);

impl ValidBin {
    pub fn time_s(&self) -> f64 {
        self.0
    }
    pub fn theta_hat_deg(&self) -> f64 {
        self.1
    }
    pub fn weight(&self) -> f64 {
        self.2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub index: usize,
    pub t_mid_s: f64,
    pub k: usize,
    pub speaker_ids: Vec<String>,
    /// Non-degenerate in-band bins inside the interval.
    pub bin_count: usize,
    pub valid_bins: Vec<ValidBin>,
    /// Defined clusters in selection order, with `Q` per the quality mode.
    pub clusters: Vec<ClusterResult>,
    /// Weight of the first unclaimed window, `W_{K+1}`.
    pub residual_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub interval_ms: f64,
    pub interval_count: usize,
    /// Active intervals only, in time order.
    pub intervals: Vec<IntervalEstimate>,
}

/// Steering and UDM columns aligned to the analysis band of `stft`.
pub struct BandSetup {
    pub band: std::ops::RangeInclusive<usize>,
    pub steering: SteeringVectorSet,
    /// `Some` for `weight_mode = new`: UDM column of every in-band bin.
    pub weights: Option<(Udm, Vec<usize>)>,
}

/// Restricts `steering` to the band and, for UDM weighting, resolves the UDM
/// column of every band bin (building the UDM from the steering set when none
/// is given).
pub fn prepare_band(
    config: &PipelineConfig,
    steering: &SteeringVectorSet,
    udm: Option<&Udm>,
    stft: &StftTensor,
) -> Result<BandSetup> {
    let band = stft.band(config.f_low_hz, config.f_high_hz)?;
    let freqs: Vec<f64> = stft.bin_freqs_hz[band.clone()].to_vec();
    let tol = stft.params.sample_rate_hz / stft.params.nfft as f64 / 2.0;
    let aligned = steering
        .restrict_to(&freqs, tol)
        .map_err(|e| Error::Band(format!("steering set does not cover the band: {e}")))?;
    if aligned.num_mics() != stft.num_mics() {
        return Err(Error::param(format!(
            "steering set has {} microphones, signal has {}",
            aligned.num_mics(),
            stft.num_mics()
        )));
    }
    if (aligned.grid().resolution_deg() - config.grid_resolution_deg).abs() > 1e-9 {
        log::warn!(
            "steering grid resolution {}° differs from grid_resolution_deg = {}; using the steering grid",
            aligned.grid().resolution_deg(),
            config.grid_resolution_deg
        );
    }
    let weights = match config.weight_mode {
        WeightMode::Base => None,
        WeightMode::New => {
            let udm = match udm {
                Some(u) => {
                    if u.grid() != aligned.grid() {
                        return Err(Error::param("UDM grid differs from the steering grid"));
                    }
                    u.clone()
                }
                None => Udm::from_steering(&aligned, config.udm_params())?,
            };
            let columns = freqs
                .iter()
                .map(|&f| {
                    udm.column_for_freq(f, tol)
                        .ok_or_else(|| Error::Band(format!("UDM has no column for {f} Hz")))
                })
                .collect::<Result<Vec<_>>>()?;
            Some((udm, columns))
        }
    };
    Ok(BandSetup {
        band,
        steering: aligned,
        weights,
    })
}

/// Runs estimation over every active interval of `intervals`.
///
/// Frames belong to the interval containing their centre time. Spectra are
/// smoothed across interval boundaries, so each interval is processed with a
/// margin of `R_t / 2` frames on both sides.
pub fn run_estimation(
    config: &PipelineConfig,
    setup: &BandSetup,
    stft: &StftTensor,
    intervals: &[IntervalRecord],
    array_yaw: &Trajectory,
) -> Result<EstimationResult> {
    config.validate()?;
    let interval_s = config.interval_s();
    let times = &stft.frame_times_s;
    let frame_interval = |t: f64| (t / interval_s).floor() as usize;
    let margin = config.smoothing_rt / 2;
    let grid = setup.steering.grid();
    let band_start = *setup.band.start();

    let active: Vec<&IntervalRecord> = intervals.iter().filter(|r| r.active).collect();
    let results = active
        .par_iter()
        .map(|rec| -> Result<IntervalEstimate> {
            let first = times.partition_point(|&t| frame_interval(t) < rec.index);
            let last = times.partition_point(|&t| frame_interval(t) <= rec.index);
            let mut bin_count = 0;
            let mut valid_bins = Vec::new();
            if first < last {
                let lo = first.saturating_sub(margin);
                let hi = (last + margin).min(times.len());
                let raw = compute_spectrum_frames(stft, &setup.steering, setup.band.clone(), lo..hi)?;
                let smooth = smooth_spectrum(&raw, config.smoothing_rt, config.smoothing_rf)?;
                for est in estimate_bins(&smooth, grid, config.lambda)? {
                    let frame = lo + est.frame;
                    if frame < first || frame >= last {
                        continue;
                    }
                    bin_count += 1;
                    if !est.valid {
                        continue;
                    }
                    let t = times[frame];
                    let theta = to_room_frame(est.phi_hat_deg, array_yaw.sample_clamped(t));
                    let w = match &setup.weights {
                        None => 1.0,
                        Some((udm, columns)) => udm.get(est.dir_index, columns[est.bin - band_start]) * est.xi,
                    };
                    valid_bins.push(ValidBin(t, theta, w));
                }
            }
            let pairs: Vec<(f64, f64)> = valid_bins.iter().map(|b| (b.1, b.2)).collect();
            let set = cluster_interval(&pairs, rec.k, config.cluster_delta_deg, config.q_cap);
            let clusters = set
                .clusters
                .into_iter()
                .filter(ClusterResult::is_defined)
                .map(|mut c| {
                    if config.quality_mode == QualityMode::Base {
                        c.quality = 1.0;
                    }
                    c
                })
                .collect();
            Ok(IntervalEstimate {
                index: rec.index,
                t_mid_s: rec.t_mid_s,
                k: rec.k,
                speaker_ids: rec.speaker_ids.clone(),
                bin_count,
                valid_bins,
                clusters,
                residual_weight: set.residual_weight,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimationResult {
        interval_ms: config.interval_ms,
        interval_count: intervals.len(),
        intervals: results,
    })
}
