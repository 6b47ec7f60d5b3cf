//! Multichannel short-time Fourier transform and band selection.

use std::fs;
use std::ops::RangeInclusive;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::container::{self, join_f64};
use crate::error::{Error, Result};

const TENSOR_MAGIC: &str = "LSDD-STFT";
const TENSOR_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    /// Periodic Hann window.
    Hann,
    Rectangular,
}

impl WindowKind {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Hann => (0..len)
                .map(|n| {
                    0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()
                })
                .collect(),
            WindowKind::Rectangular => vec![1.0; len],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WindowKind::Hann => "hann",
            WindowKind::Rectangular => "rectangular",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "hann" => Some(WindowKind::Hann),
            "rectangular" | "rect" => Some(WindowKind::Rectangular),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftParams {
    pub sample_rate_hz: f64,
    pub nfft: usize,
    pub hop: usize,
    pub window: WindowKind,
}

impl Default for StftParams {
    fn default() -> Self {
        Self {
            sample_rate_hz: 16_000.0,
            nfft: 1024,
            hop: 512,
            window: WindowKind::Hann,
        }
    }
}

impl StftParams {
    pub fn num_bins(&self) -> usize {
        self.nfft / 2 + 1
    }

    pub fn bin_freqs_hz(&self) -> Vec<f64> {
        (0..self.num_bins())
            .map(|f| f as f64 * self.sample_rate_hz / self.nfft as f64)
            .collect()
    }

    /// Frame count for a signal of `samples` samples; trailing partial frames are dropped.
    pub fn num_frames(&self, samples: usize) -> usize {
        if samples < self.nfft {
            0
        } else {
            (samples - self.nfft) / self.hop + 1
        }
    }

    /// Time of the centre of each frame, in seconds.
    pub fn frame_times_s(&self, frames: usize) -> Vec<f64> {
        (0..frames)
            .map(|t| (t * self.hop) as f64 / self.sample_rate_hz + self.nfft as f64 / (2.0 * self.sample_rate_hz))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.nfft < 2 || self.nfft % 2 != 0 {
            return Err(Error::param(format!("nfft must be even and >= 2, got {}", self.nfft)));
        }
        if self.hop == 0 {
            return Err(Error::param("hop must be at least 1"));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::param("sample rate must be positive"));
        }
        Ok(())
    }
}

/// One-sided STFT of M channels, stored `[mic][frame][bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StftTensor {
    values: Vec<Complex64>,
    num_mics: usize,
    num_frames: usize,
    pub params: StftParams,
    pub frame_times_s: Vec<f64>,
    pub bin_freqs_hz: Vec<f64>,
}

impl StftTensor {
    pub fn from_values(
        values: Vec<Complex64>,
        num_mics: usize,
        num_frames: usize,
        params: StftParams,
    ) -> Result<Self> {
        params.validate()?;
        let expected = num_mics * num_frames * params.num_bins();
        if values.len() != expected {
            return Err(Error::format(format!(
                "STFT tensor holds {} values, expected {expected}",
                values.len()
            )));
        }
        Ok(Self {
            values,
            num_mics,
            num_frames,
            frame_times_s: params.frame_times_s(num_frames),
            bin_freqs_hz: params.bin_freqs_hz(),
            params,
        })
    }

    pub fn num_mics(&self) -> usize {
        self.num_mics
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_bins(&self) -> usize {
        self.bin_freqs_hz.len()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, mic: usize, frame: usize, bin: usize) -> Complex64 {
        self.values[(mic * self.num_frames + frame) * self.num_bins() + bin]
    }

    /// Array snapshot x(t, f) across all microphones.
    pub fn snapshot(&self, frame: usize, bin: usize) -> Vec<Complex64> {
        (0..self.num_mics).map(|m| self.get(m, frame, bin)).collect()
    }

    pub fn frame(&self, mic: usize, frame: usize) -> &[Complex64] {
        let start = (mic * self.num_frames + frame) * self.num_bins();
        &self.values[start..start + self.num_bins()]
    }

    /// Writes the tensor in the companion container layout of the steering file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = Vec::new();
        container::write_header(
            &mut out,
            TENSOR_MAGIC,
            TENSOR_VERSION,
            &[
                ("mics", self.num_mics.to_string()),
                ("frames", self.num_frames.to_string()),
                ("bins", self.num_bins().to_string()),
                ("sample_rate_hz", self.params.sample_rate_hz.to_string()),
                ("nfft", self.params.nfft.to_string()),
                ("hop", self.params.hop.to_string()),
                ("window", self.params.window.name().to_owned()),
                ("frame_times_s", join_f64(&self.frame_times_s)),
            ],
        )?;
        container::write_complex64(&mut out, &self.values)?;
        fs::write(path, out)?;
        Ok(())
    }

    pub fn is_container(bytes: &[u8]) -> bool {
        bytes.starts_with(TENSOR_MAGIC.as_bytes())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, payload) = container::split_header(bytes, TENSOR_MAGIC, TENSOR_VERSION)?;
        let num_mics: usize = header.parse("mics")?;
        let num_frames: usize = header.parse("frames")?;
        let bins: usize = header.parse("bins")?;
        let window_name = header.get("window")?;
        let params = StftParams {
            sample_rate_hz: header.parse("sample_rate_hz")?,
            nfft: header.parse("nfft")?,
            hop: header.parse("hop")?,
            window: WindowKind::from_name(window_name)
                .ok_or_else(|| Error::format(format!("unknown window {window_name:?}")))?,
        };
        if params.num_bins() != bins {
            return Err(Error::format(format!(
                "bins = {bins} inconsistent with nfft = {}",
                params.nfft
            )));
        }
        let values = container::read_complex64(payload, num_mics * num_frames * bins, "STFT payload")?;
        Self::from_values(values, num_mics, num_frames, params)
            .map_err(|e| Error::format(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Computes the one-sided STFT of each channel.
pub fn analyze(signals: &[Vec<f64>], params: StftParams) -> Result<StftTensor> {
    params.validate()?;
    let first = signals
        .first()
        .ok_or_else(|| Error::param("no input channels"))?;
    let n = first.len();
    if let Some(m) = signals.iter().position(|s| s.len() != n) {
        return Err(Error::param(format!(
            "channel {m} has {} samples, channel 0 has {n}",
            signals[m].len()
        )));
    }
    if n < params.nfft {
        return Err(Error::InputTooShort {
            samples: n,
            needed: params.nfft,
        });
    }
    let frames = params.num_frames(n);
    let bins = params.num_bins();
    let window = params.window.coefficients(params.nfft);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(params.nfft);

    let per_channel: Vec<Vec<Complex64>> = signals
        .par_iter()
        .map(|channel| {
            let mut out = Vec::with_capacity(frames * bins);
            let mut buf = vec![Complex64::new(0.0, 0.0); params.nfft];
            for t in 0..frames {
                let start = t * params.hop;
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = Complex64::new(channel[start + i] * window[i], 0.0);
                }
                fft.process(&mut buf);
                out.extend_from_slice(&buf[..bins]);
            }
            out
        })
        .collect();

    let values = per_channel.concat();
    StftTensor::from_values(values, signals.len(), frames, params)
}

/// Contiguous bins with `f_low <= freq <= f_high`.
pub fn band_indices(freqs_hz: &[f64], f_low_hz: f64, f_high_hz: f64) -> Result<RangeInclusive<usize>> {
    let nyquist = freqs_hz.last().copied().unwrap_or(0.0);
    if !(f_low_hz >= 0.0) || !(f_low_hz < f_high_hz) || f_high_hz > nyquist {
        return Err(Error::Band(format!(
            "band [{f_low_hz}, {f_high_hz}] Hz invalid for Nyquist {nyquist} Hz"
        )));
    }
    let first = freqs_hz.iter().position(|&f| f >= f_low_hz);
    let last = freqs_hz.iter().rposition(|&f| f <= f_high_hz);
    match (first, last) {
        (Some(a), Some(b)) if a <= b => Ok(a..=b),
        _ => Err(Error::Band(format!(
            "band [{f_low_hz}, {f_high_hz}] Hz contains no frequency bins"
        ))),
    }
}

impl StftTensor {
    pub fn band(&self, f_low_hz: f64, f_high_hz: f64) -> Result<RangeInclusive<usize>> {
        band_indices(&self.bin_freqs_hz, f_low_hz, f_high_hz)
    }
}
