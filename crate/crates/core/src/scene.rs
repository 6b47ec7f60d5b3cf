//! STFT-domain scene synthesis with moving sources, a rotating array and
//! additive white noise.
//!
//! Under the multiplicative-transfer-function model every bin is
//! `x(t, f) = Σ_k s_k(t, f) · v(Ψ_k(t) − δ_array(t), f) + n(t, f)`, with the
//! steering vector taken at the grid direction nearest to the array-frame
//! azimuth. Each source draws from its own random stream, so adding or
//! removing a source never perturbs the others.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::angle::wrap_deg;
use crate::array::{free_field_steering, ArrayGeometry, DirectionGrid, SteeringVectorSet};
use crate::error::{Error, Result};
use crate::stft::{band_indices, StftParams, StftTensor};
use crate::timeline::{merge_spans, ActivitySpan, SessionMeta, SpeakerTrack, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalKind {
    /// Constant-magnitude, random-phase energy on every `spacing_bins`-th bin.
    ToneComb { spacing_bins: usize, offset_bins: usize },
    /// Complex Gaussian bins scaled by a log-normal envelope that is constant
    /// over `block_frames × block_bins` tiles. `modulation_db = 0` gives plain
    /// white noise; larger values give speech-like time-frequency sparsity.
    ModulatedNoise {
        modulation_db: f64,
        block_frames: usize,
        block_bins: usize,
    },
    /// Attenuated, delayed copy of source `of`, arriving from its own direction.
    Reflection { of: usize, gain_db: f64, delay_ms: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceRole {
    /// Counted in the ground truth and the active-speaker count.
    Speaker,
    /// Directional interference or reflection; never part of the truth.
    Interferer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub id: String,
    pub role: SourceRole,
    /// Room-frame azimuth over time.
    pub trajectory: Trajectory,
    pub signal: SignalKind,
    /// Mean per-bin power in dB (reflections take their level from `gain_db`).
    pub level_db: f64,
    /// Ignored for reflections, which follow the activity of their origin.
    pub active: Vec<ActivitySpan>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub duration_s: f64,
    pub sources: Vec<SourceSpec>,
    /// `δ_array(t)`: yaw of the array axis in the room frame.
    pub array_yaw: Trajectory,
    /// Ratio of total source power to total noise power over `snr_band_hz`;
    /// `None` disables noise. Without sources the noise power is
    /// `10^(-snr/10)` per bin and microphone.
    pub snr_db: Option<f64>,
    pub snr_band_hz: (f64, f64),
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTruth {
    pub id: String,
    pub role: SourceRole,
    /// Room-frame azimuth at each frame centre.
    pub azimuth_deg: Vec<f64>,
    /// Array-frame grid azimuth actually used for the steering vector.
    pub applied_array_azimuth_deg: Vec<f64>,
    pub active: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    pub frame_times_s: Vec<f64>,
    pub sources: Vec<SourceTruth>,
    pub delta_array_deg: Vec<f64>,
    /// Speaker tracks and array yaw, in the same form parsed from pose/VAD files.
    pub meta: SessionMeta,
    pub noise_variance: f64,
    pub seed: u64,
}

fn source_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn complex_gaussian(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// Source amplitudes `s(t, f)` before activity gating, `[frame][bin]`.
fn draw_signal(kind: &SignalKind, level_db: f64, frames: usize, bins: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Complex64>> {
    let power = 10f64.powf(level_db / 10.0);
    match *kind {
        SignalKind::ToneComb {
            spacing_bins,
            offset_bins,
        } => {
            if spacing_bins == 0 {
                return Err(Error::param("tone comb spacing must be at least 1 bin"));
            }
            let amp = (power * spacing_bins as f64).sqrt();
            let mut out = Vec::with_capacity(frames * bins);
            for _ in 0..frames {
                for f in 0..bins {
                    let phase: f64 = rng.random::<f64>() * 2.0 * PI;
                    if f % spacing_bins == offset_bins % spacing_bins {
                        out.push(Complex64::from_polar(amp, phase));
                    } else {
                        out.push(Complex64::new(0.0, 0.0));
                    }
                }
            }
            Ok(out)
        }
        SignalKind::ModulatedNoise {
            modulation_db,
            block_frames,
            block_bins,
        } => {
            if block_frames == 0 || block_bins == 0 || !(modulation_db >= 0.0) {
                return Err(Error::param("modulated noise needs nonzero blocks and modulation_db >= 0"));
            }
            let bt = frames.div_ceil(block_frames);
            let bf = bins.div_ceil(block_bins);
            // log-normal power gains normalized to unit mean
            let sigma = modulation_db * std::f64::consts::LN_10 / 10.0;
            let norm = (sigma * sigma / 2.0).exp();
            let gains: Vec<f64> = (0..bt * bf)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    (sigma * z).exp() / norm
                })
                .collect();
            let mut out = Vec::with_capacity(frames * bins);
            for t in 0..frames {
                for f in 0..bins {
                    let g = gains[(t / block_frames) * bf + f / block_bins];
                    out.push(complex_gaussian(rng, power * g));
                }
            }
            Ok(out)
        }
        SignalKind::Reflection { .. } => unreachable!("reflections are derived from their origin"),
    }
}

/// Synthesizes with free-field steering of `geometry` on `grid`.
pub fn synthesize_stft(
    spec: &SceneSpec,
    geometry: &ArrayGeometry,
    grid: &DirectionGrid,
    params: StftParams,
    speed_of_sound: f64,
) -> Result<(StftTensor, SceneTruth)> {
    let steering = free_field_steering(geometry, grid, &params.bin_freqs_hz(), speed_of_sound)?;
    synthesize_with_steering(spec, &steering, params)
}

/// Synthesizes with an arbitrary steering set covering every STFT bin.
pub fn synthesize_with_steering(
    spec: &SceneSpec,
    steering: &SteeringVectorSet,
    params: StftParams,
) -> Result<(StftTensor, SceneTruth)> {
    if !(spec.duration_s > 0.0) {
        return Err(Error::param("scene duration must be positive"));
    }
    let samples = (spec.duration_s * params.sample_rate_hz).round() as usize;
    let frames = params.num_frames(samples);
    if frames == 0 {
        return Err(Error::InputTooShort {
            samples,
            needed: params.nfft,
        });
    }
    let bin_freqs = params.bin_freqs_hz();
    let bins = bin_freqs.len();
    let bin_tol = params.sample_rate_hz / params.nfft as f64 / 2.0;
    let steering = steering.restrict_to(&bin_freqs, bin_tol)?;
    let grid = steering.grid().clone();
    let mics = steering.num_mics();
    let frame_times = params.frame_times_s(frames);

    let delta_array: Vec<f64> = frame_times
        .iter()
        .map(|&t| spec.array_yaw.sample_clamped(t))
        .collect();

    // source amplitudes, gated by activity
    let mut amplitudes: Vec<Vec<Complex64>> = Vec::with_capacity(spec.sources.len());
    let mut truths = Vec::with_capacity(spec.sources.len());
    for (k, src) in spec.sources.iter().enumerate() {
        let (amp, active) = match src.signal {
            SignalKind::Reflection { of, gain_db, delay_ms } => {
                if of >= k || matches!(spec.sources[of].signal, SignalKind::Reflection { .. }) {
                    return Err(Error::param(format!(
                        "source {k} reflects source {of}, which must be an earlier direct source"
                    )));
                }
                let g = 10f64.powf(gain_db / 20.0);
                let tau = delay_ms / 1000.0;
                let origin = &amplitudes[of];
                let amp: Vec<Complex64> = (0..frames * bins)
                    .map(|i| {
                        let f = bin_freqs[i % bins];
                        origin[i] * Complex64::from_polar(g, -2.0 * PI * f * tau)
                    })
                    .collect();
                let active: Vec<bool> = truths
                    .get(of)
                    .map(|t: &SourceTruth| t.active.clone())
                    .expect("origin precedes reflection");
                (amp, active)
            }
            _ => {
                let mut rng = source_rng(spec.seed, k as u64 + 1);
                let mut amp = draw_signal(&src.signal, src.level_db, frames, bins, &mut rng)?;
                let active: Vec<bool> = frame_times
                    .iter()
                    .map(|&t| src.active.iter().any(|s| s.start_s <= t && t <= s.end_s))
                    .collect();
                for (t, on) in active.iter().enumerate() {
                    if !on {
                        amp[t * bins..(t + 1) * bins].fill(Complex64::new(0.0, 0.0));
                    }
                }
                (amp, active)
            }
        };
        let azimuth_deg: Vec<f64> = frame_times
            .iter()
            .map(|&t| src.trajectory.sample_clamped(t))
            .collect();
        let applied: Vec<f64> = azimuth_deg
            .iter()
            .zip(&delta_array)
            .map(|(&psi, &d)| grid.azimuth(grid.nearest(wrap_deg(psi - d))))
            .collect();
        truths.push(SourceTruth {
            id: src.id.clone(),
            role: src.role,
            azimuth_deg,
            applied_array_azimuth_deg: applied,
            active,
        });
        amplitudes.push(amp);
    }

    let mut values = vec![Complex64::new(0.0, 0.0); mics * frames * bins];
    for (amp, truth) in amplitudes.iter().zip(&truths) {
        for t in 0..frames {
            let l = grid.nearest(truth.applied_array_azimuth_deg[t]);
            for f in 0..bins {
                let s = amp[t * bins + f];
                if s == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let v = steering.vector(l, f);
                for m in 0..mics {
                    values[(m * frames + t) * bins + f] += s * v[m];
                }
            }
        }
    }

    let mut noise_variance = 0.0;
    if let Some(snr_db) = spec.snr_db {
        if !snr_db.is_finite() {
            return Err(Error::param("snr_db must be finite"));
        }
        let band = band_indices(&bin_freqs, spec.snr_band_hz.0, spec.snr_band_hz.1)?;
        let band_bins = band.end() + 1 - band.start();
        let mut energy = 0.0;
        for m in 0..mics {
            for t in 0..frames {
                for f in band.clone() {
                    energy += values[(m * frames + t) * bins + f].norm_sqr();
                }
            }
        }
        let mean_power = energy / (mics * frames * band_bins) as f64;
        let reference = if mean_power > 0.0 { mean_power } else { 1.0 };
        noise_variance = reference * 10f64.powf(-snr_db / 10.0);
        let mut rng = source_rng(spec.seed, 0);
        for v in values.iter_mut() {
            *v += complex_gaussian(&mut rng, noise_variance);
        }
    }

    let speakers = spec
        .sources
        .iter()
        .filter(|s| s.role == SourceRole::Speaker)
        .map(|s| SpeakerTrack {
            id: s.id.clone(),
            trajectory: s.trajectory.clone().with_end(spec.duration_s),
            spans: merge_spans(s.active.clone()),
        })
        .collect();
    let meta = SessionMeta {
        speakers,
        array_yaw: spec.array_yaw.clone().with_end(spec.duration_s),
        duration_s: spec.duration_s,
    };

    let tensor = StftTensor::from_values(values, mics, frames, params)?;
    let truth = SceneTruth {
        frame_times_s: frame_times,
        sources: truths,
        delta_array_deg: delta_array,
        meta,
        noise_variance,
        seed: spec.seed,
    };
    Ok((tensor, truth))
}

pub mod config {
    //! TOML scene description used by the `simulate` command.

    use serde::Deserialize;

    use super::{SceneSpec, SignalKind, SourceRole, SourceSpec};
    use crate::array::{ArrayGeometry, DirectionGrid, DEFAULT_SPEED_OF_SOUND};
    use crate::error::{Error, Result};
    use crate::stft::{StftParams, WindowKind};
    use crate::timeline::{ActivitySpan, Trajectory};

    #[derive(Debug, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct SceneFile {
        pub duration_s: f64,
        #[serde(default)]
        pub seed: u64,
        pub snr_db: Option<f64>,
        #[serde(default = "default_band")]
        pub snr_band_hz: [f64; 2],
        #[serde(default = "default_c")]
        pub speed_of_sound: f64,
        #[serde(default = "default_resolution")]
        pub grid_resolution_deg: f64,
        pub array: ArrayFile,
        #[serde(default)]
        pub stft: StftFile,
        #[serde(default)]
        pub array_yaw: TrajectoryFile,
        #[serde(default)]
        pub sources: Vec<SourceFile>,
    }

    fn default_band() -> [f64; 2] {
        [1500.0, 3500.0]
    }
    fn default_c() -> f64 {
        DEFAULT_SPEED_OF_SOUND
    }
    fn default_resolution() -> f64 {
        1.0
    }

    #[derive(Debug, Deserialize)]
    #[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
    pub enum ArrayFile {
        Ring { mics: usize, radius_m: f64 },
        Linear { mics: usize, spacing_m: f64 },
        Custom { positions: Vec<[f64; 3]>, label: Option<String> },
    }

    #[derive(Debug, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct StftFile {
        pub sample_rate_hz: f64,
        pub nfft: usize,
        pub hop: usize,
        pub window: String,
    }

    impl Default for StftFile {
        fn default() -> Self {
            let p = StftParams::default();
            Self {
                sample_rate_hz: p.sample_rate_hz,
                nfft: p.nfft,
                hop: p.hop,
                window: p.window.name().to_owned(),
            }
        }
    }

    /// Either a fixed `azimuth_deg` or `keyframes = [[t, az], ...]`.
    #[derive(Debug, Default, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct TrajectoryFile {
        pub azimuth_deg: Option<f64>,
        pub keyframes: Option<Vec<[f64; 2]>>,
    }

    impl TrajectoryFile {
        fn build(&self, duration: f64) -> Result<Trajectory> {
            match (&self.azimuth_deg, &self.keyframes) {
                (Some(_), Some(_)) => Err(Error::Config("give either azimuth_deg or keyframes, not both".into())),
                (Some(a), None) => Ok(Trajectory::constant(*a, duration)),
                (None, Some(k)) => Trajectory::from_keyframes(k.iter().map(|p| (p[0], p[1])).collect(), duration),
                (None, None) => Ok(Trajectory::constant(0.0, duration)),
            }
        }
    }

    #[derive(Debug, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct SourceFile {
        pub id: String,
        #[serde(default = "default_role")]
        pub role: SourceRole,
        #[serde(flatten)]
        pub trajectory: TrajectoryFile,
        #[serde(default)]
        pub level_db: f64,
        /// Activity spans `[[start, end], ...]`; defaults to the whole scene.
        pub active: Option<Vec<[f64; 2]>>,
        pub signal: SignalKind,
    }

    fn default_role() -> SourceRole {
        SourceRole::Speaker
    }

    pub struct SceneSetup {
        pub spec: SceneSpec,
        pub geometry: ArrayGeometry,
        pub grid: DirectionGrid,
        pub stft: StftParams,
        pub speed_of_sound: f64,
    }

    pub fn parse_scene(text: &str) -> Result<SceneSetup> {
        let file: SceneFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let d = file.duration_s;
        let geometry = match file.array {
            ArrayFile::Ring { mics, radius_m } => ArrayGeometry::ring(mics, radius_m)?,
            ArrayFile::Linear { mics, spacing_m } => ArrayGeometry::linear(mics, spacing_m)?,
            ArrayFile::Custom { positions, label } => {
                ArrayGeometry::new(positions, label.unwrap_or_else(|| "custom".into()))?
            }
        };
        let window = WindowKind::from_name(&file.stft.window)
            .ok_or_else(|| Error::Config(format!("unknown window {:?}", file.stft.window)))?;
        let stft = StftParams {
            sample_rate_hz: file.stft.sample_rate_hz,
            nfft: file.stft.nfft,
            hop: file.stft.hop,
            window,
        };
        let sources = file
            .sources
            .iter()
            .map(|s| {
                Ok(SourceSpec {
                    id: s.id.clone(),
                    role: s.role,
                    trajectory: s.trajectory.build(d)?,
                    signal: s.signal.clone(),
                    level_db: s.level_db,
                    active: match &s.active {
                        Some(spans) => spans.iter().map(|p| ActivitySpan::new(p[0], p[1])).collect(),
                        None => vec![ActivitySpan::new(0.0, d)],
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SceneSetup {
            spec: SceneSpec {
                duration_s: d,
                sources,
                array_yaw: file.array_yaw.build(d)?,
                snr_db: file.snr_db,
                snr_band_hz: (file.snr_band_hz[0], file.snr_band_hz[1]),
                seed: file.seed,
            },
            geometry,
            grid: DirectionGrid::uniform(file.grid_resolution_deg)?,
            stft,
            speed_of_sound: file.speed_of_sound,
        })
    }
}
