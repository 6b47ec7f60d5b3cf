#![allow(dead_code)]

use lsdd::array::{ArrayGeometry, DirectionGrid};
use lsdd::scene::{SceneSpec, SignalKind, SourceRole, SourceSpec};
use lsdd::timeline::{ActivitySpan, Trajectory};

pub fn ring6() -> ArrayGeometry {
    ArrayGeometry::ring(6, 0.08).unwrap()
}

pub fn grid1() -> DirectionGrid {
    DirectionGrid::uniform(1.0).unwrap()
}

pub fn white() -> SignalKind {
    SignalKind::ModulatedNoise {
        modulation_db: 0.0,
        block_frames: 1,
        block_bins: 1,
    }
}

/// Speech-like sparsity: log-normal power envelope on 2-frame × 4-bin tiles.
pub fn sparse() -> SignalKind {
    SignalKind::ModulatedNoise {
        modulation_db: 12.0,
        block_frames: 2,
        block_bins: 4,
    }
}

pub fn source(id: &str, traj: Trajectory, signal: SignalKind, duration: f64) -> SourceSpec {
    SourceSpec {
        id: id.into(),
        role: SourceRole::Speaker,
        trajectory: traj,
        signal,
        level_db: 0.0,
        active: vec![ActivitySpan::new(0.0, duration)],
    }
}

pub fn static_source(id: &str, az: f64, signal: SignalKind, duration: f64) -> SourceSpec {
    source(id, Trajectory::constant(az, duration), signal, duration)
}

pub fn scene(sources: Vec<SourceSpec>, duration: f64, snr_db: Option<f64>, seed: u64) -> SceneSpec {
    SceneSpec {
        duration_s: duration,
        sources,
        array_yaw: Trajectory::constant(0.0, duration),
        snr_db,
        snr_band_hz: (1500.0, 3500.0),
        seed,
    }
}
