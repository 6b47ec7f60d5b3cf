//! End-to-end processing: configuration, inputs, interval segmentation,
//! estimation, evaluation and reports.

pub mod config;
pub mod estimate;
pub mod eval;
pub mod intervals;
pub mod meta;
pub mod report;
pub mod wav;

pub use config::{PipelineConfig, QualityMode, WeightMode};
pub use estimate::{prepare_band, run_estimation, EstimationResult, IntervalEstimate, ValidBin};
pub use eval::{evaluate, EvalReport, EvalRow};
pub use intervals::{classify_dynamic, segment_intervals, to_room_frame, IntervalRecord};
pub use meta::parse_pose_vad;
pub use report::emit_report;
pub use wav::ingest_wav;

use crate::array::SteeringVectorSet;
use crate::error::Result;
use crate::stft::StftTensor;
use crate::timeline::SessionMeta;
use crate::udm::Udm;

/// Segments, estimates and scores one session.
pub fn process_session(
    config: &PipelineConfig,
    steering: &SteeringVectorSet,
    udm: Option<&Udm>,
    stft: &StftTensor,
    meta: &SessionMeta,
) -> Result<(EstimationResult, EvalReport)> {
    config.validate()?;
    let intervals = segment_intervals(meta, config.interval_s(), config.zeta_deg);
    let setup = prepare_band(config, steering, udm, stft)?;
    let results = run_estimation(config, &setup, stft, &intervals, &meta.array_yaw)?;
    let report = evaluate(&results, meta, config);
    Ok((results, report))
}
