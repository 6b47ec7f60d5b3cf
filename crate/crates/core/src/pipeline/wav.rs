//! Multichannel WAV input at 16 kHz, decimating 48 kHz recordings.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

pub const TARGET_RATE_HZ: u32 = 16_000;
const DECIMATION: usize = 3;
const FIR_TAPS: usize = 193;
/// Anti-alias cutoff at 48 kHz, below the 8 kHz output Nyquist.
const FIR_CUTOFF_HZ: f64 = 7_000.0;

/// Reads `path` as `[channel][sample]` at 16 kHz.
///
/// 16 kHz files pass through unchanged; 48 kHz files are low-passed and
/// decimated 3:1. Any other rate is a format error.
pub fn ingest_wav(path: impl AsRef<Path>) -> Result<(Vec<Vec<f64>>, u32)> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_error(path, e))?,
        hound::SampleFormat::Int => {
            let scale = 2f64.powi(spec.bits_per_sample as i32 - 1);
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| wav_error(path, e))?
        }
    };
    let mut signals = vec![Vec::with_capacity(interleaved.len() / channels.max(1)); channels];
    for (i, v) in interleaved.into_iter().enumerate() {
        signals[i % channels].push(v);
    }
    match spec.sample_rate {
        TARGET_RATE_HZ => Ok((signals, TARGET_RATE_HZ)),
        48_000 => Ok((signals.iter().map(|s| decimate_48k(s)).collect(), TARGET_RATE_HZ)),
        r => Err(Error::format(format!(
            "{}: unsupported sample rate {r} Hz (expected 16000 or 48000)",
            path.display()
        ))),
    }
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::format(format!("{}: {other}", path.display())),
    }
}

/// Blackman-windowed sinc low-pass with unit DC gain.
fn anti_alias_taps() -> Vec<f64> {
    let fc = FIR_CUTOFF_HZ / 48_000.0;
    let mid = (FIR_TAPS - 1) as f64 / 2.0;
    let mut h: Vec<f64> = (0..FIR_TAPS)
        .map(|n| {
            let x = n as f64 - mid;
            let sinc = if x == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * x).sin() / (PI * x)
            };
            let a = 2.0 * PI * n as f64 / (FIR_TAPS - 1) as f64;
            sinc * (0.42 - 0.5 * a.cos() + 0.08 * (2.0 * a).cos())
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    h
}

/// Zero-phase low-pass then keeps every third sample, starting at sample 0.
pub fn decimate_48k(x: &[f64]) -> Vec<f64> {
    let h = anti_alias_taps();
    let half = (FIR_TAPS / 2) as isize;
    (0..x.len())
        .step_by(DECIMATION)
        .map(|n| {
            h.iter()
                .enumerate()
                .filter_map(|(k, c)| {
                    let i = n as isize + half - k as isize;
                    (i >= 0 && (i as usize) < x.len()).then(|| c * x[i as usize])
                })
                .sum()
        })
        .collect()
}
