//! Directional spectrum, its smoothing, and per-bin DOA / direct-path-dominance
//! estimates.

use std::ops::{Range, RangeInclusive};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::array::{DirectionGrid, SteeringVectorSet};
use crate::error::{Error, Result};
use crate::stft::StftTensor;

/// `|<a, b>| / (‖a‖ ‖b‖)`, clamped to [0, 1].
pub fn cosine_similarity(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::param(format!(
            "vector lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let na: f64 = a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if !(na > 0.0) || !(nb > 0.0) {
        return Err(Error::Degenerate("cosine similarity of a zero-norm vector".into()));
    }
    Ok(similarity_with_norms(a, b, na, nb))
}

fn similarity_with_norms(a: &[Complex64], b: &[Complex64], na: f64, nb: f64) -> f64 {
    let inner: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    (inner.norm() / (na * nb)).min(1.0)
}

/// `S_l = d(x, v(φ_l, f))` for every direction; `None` when `x` is all zero.
pub fn directional_spectrum(x: &[Complex64], steering: &SteeringVectorSet, freq: usize) -> Option<Vec<f64>> {
    let nx: f64 = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if !(nx > 0.0) || !nx.is_finite() {
        return None;
    }
    Some(
        (0..steering.num_directions())
            .map(|l| {
                let v = steering.vector(l, freq);
                let nv: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                similarity_with_norms(x, v, nx, nv)
            })
            .collect(),
    )
}

/// Directional spectra over `[frame][in-band bin][direction]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTensor {
    values: Vec<f64>,
    degenerate: Vec<bool>,
    num_frames: usize,
    num_dirs: usize,
    band: RangeInclusive<usize>,
}

impl SpectrumTensor {
    pub fn from_values(
        values: Vec<f64>,
        degenerate: Vec<bool>,
        num_frames: usize,
        num_dirs: usize,
        band: RangeInclusive<usize>,
    ) -> Result<Self> {
        let bins = band.end() + 1 - band.start();
        if values.len() != num_frames * bins * num_dirs || degenerate.len() != num_frames * bins {
            return Err(Error::param("spectrum tensor dimensions inconsistent"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::param("spectrum values must lie in [0, 1]"));
        }
        Ok(Self {
            values,
            degenerate,
            num_frames,
            num_dirs,
            band,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_bins(&self) -> usize {
        self.band.end() + 1 - self.band.start()
    }

    pub fn num_dirs(&self) -> usize {
        self.num_dirs
    }

    /// Absolute STFT bin range covered by the tensor.
    pub fn band(&self) -> RangeInclusive<usize> {
        self.band.clone()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Spectrum at frame `t`, in-band bin offset `fb`.
    pub fn at(&self, t: usize, fb: usize) -> &[f64] {
        let start = (t * self.num_bins() + fb) * self.num_dirs;
        &self.values[start..start + self.num_dirs]
    }

    pub fn is_degenerate(&self, t: usize, fb: usize) -> bool {
        self.degenerate[t * self.num_bins() + fb]
    }
}

/// Directional spectrum for every in-band bin of `stft`.
///
/// `steering` must already be aligned to the band, one steering frequency per
/// bin in `band` (see [`SteeringVectorSet::restrict_to`]).
pub fn compute_spectrum(
    stft: &StftTensor,
    steering: &SteeringVectorSet,
    band: RangeInclusive<usize>,
) -> Result<SpectrumTensor> {
    compute_spectrum_frames(stft, steering, band, 0..stft.num_frames())
}

/// [`compute_spectrum`] restricted to `frames`; frame 0 of the result is
/// `frames.start`.
pub fn compute_spectrum_frames(
    stft: &StftTensor,
    steering: &SteeringVectorSet,
    band: RangeInclusive<usize>,
    frames: Range<usize>,
) -> Result<SpectrumTensor> {
    if frames.end > stft.num_frames() || frames.start > frames.end {
        return Err(Error::param(format!(
            "frame range {frames:?} outside 0..{}",
            stft.num_frames()
        )));
    }
    let bins = band.end() + 1 - band.start();
    if *band.end() >= stft.num_bins() {
        return Err(Error::param("band exceeds the STFT bins"));
    }
    if steering.num_freqs() != bins {
        return Err(Error::param(format!(
            "steering set has {} frequencies, band has {bins} bins",
            steering.num_freqs()
        )));
    }
    if steering.num_mics() != stft.num_mics() {
        return Err(Error::param(format!(
            "steering set has {} microphones, signal has {}",
            steering.num_mics(),
            stft.num_mics()
        )));
    }
    let dirs = steering.num_directions();
    let start = *band.start();
    let count = frames.len();
    let per_frame: Vec<(Vec<f64>, Vec<bool>)> = frames
        .into_par_iter()
        .map(|t| {
            let mut values = Vec::with_capacity(bins * dirs);
            let mut degenerate = Vec::with_capacity(bins);
            for fb in 0..bins {
                let x = stft.snapshot(t, start + fb);
                match directional_spectrum(&x, steering, fb) {
                    Some(s) => {
                        values.extend(s);
                        degenerate.push(false);
                    }
                    None => {
                        values.extend(std::iter::repeat_n(0.0, dirs));
                        degenerate.push(true);
                    }
                }
            }
            (values, degenerate)
        })
        .collect();
    let mut values = Vec::with_capacity(count * bins * dirs);
    let mut degenerate = Vec::with_capacity(count * bins);
    for (v, d) in per_frame {
        values.extend(v);
        degenerate.extend(d);
    }
    Ok(SpectrumTensor {
        values,
        degenerate,
        num_frames: count,
        num_dirs: dirs,
        band,
    })
}

/// Box-averages the spectrum over an `rt × rf` (frames × bins) window.
///
/// Windows shrink at the tensor edges and average only the non-degenerate
/// neighbours that exist. Degenerate bins stay degenerate.
pub fn smooth_spectrum(s: &SpectrumTensor, rt: usize, rf: usize) -> Result<SpectrumTensor> {
    if rt == 0 || rf == 0 || rt % 2 == 0 || rf % 2 == 0 {
        return Err(Error::param(format!(
            "smoothing window must be odd and >= 1, got R_t={rt} R_f={rf}"
        )));
    }
    let (frames, bins, dirs) = (s.num_frames, s.num_bins(), s.num_dirs);
    let (ht, hf) = (rt / 2, rf / 2);

    // frequency pass
    let mut acc = vec![0.0; s.values.len()];
    let mut count = vec![0usize; frames * bins];
    for t in 0..frames {
        for fb in 0..bins {
            let out = (t * bins + fb) * dirs;
            for n in fb.saturating_sub(hf)..=(fb + hf).min(bins - 1) {
                if s.degenerate[t * bins + n] {
                    continue;
                }
                count[t * bins + fb] += 1;
                let src = (t * bins + n) * dirs;
                for l in 0..dirs {
                    acc[out + l] += s.values[src + l];
                }
            }
        }
    }

    // time pass
    let mut values = vec![0.0; s.values.len()];
    for t in 0..frames {
        for fb in 0..bins {
            let idx = t * bins + fb;
            if s.degenerate[idx] {
                continue;
            }
            let out = idx * dirs;
            let mut n = 0;
            for m in t.saturating_sub(ht)..=(t + ht).min(frames - 1) {
                n += count[m * bins + fb];
                let src = (m * bins + fb) * dirs;
                for l in 0..dirs {
                    values[out + l] += acc[src + l];
                }
            }
            // n >= 1: the bin itself is non-degenerate
            let inv = n as f64;
            for v in &mut values[out..out + dirs] {
                *v /= inv;
            }
        }
    }
    Ok(SpectrumTensor {
        values,
        degenerate: s.degenerate.clone(),
        num_frames: frames,
        num_dirs: dirs,
        band: s.band.clone(),
    })
}

/// Per time-frequency bin DOA and direct-path-dominance record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinEstimate {
    pub frame: usize,
    /// Absolute STFT bin index.
    pub bin: usize,
    pub dir_index: usize,
    /// DOA in the array frame, a grid azimuth.
    pub phi_hat_deg: f64,
    /// DOA in the room frame; equals `phi_hat_deg` until the array yaw is applied.
    pub theta_hat_deg: f64,
    pub xi: f64,
    pub valid: bool,
    /// Reliability weight; 1 until a weighting scheme assigns one.
    pub w: f64,
}

/// Index of the maximum, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// DOA (arg max), DPD value (max) and validity (`ξ >= λ`) for every
/// non-degenerate bin of a (smoothed) spectrum.
pub fn estimate_bins(s: &SpectrumTensor, grid: &DirectionGrid, lambda: f64) -> Result<Vec<BinEstimate>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::param(format!("lambda must be in [0, 1], got {lambda}")));
    }
    if grid.len() != s.num_dirs {
        return Err(Error::param("grid size differs from spectrum direction count"));
    }
    let start = *s.band.start();
    let mut out = Vec::with_capacity(s.num_frames * s.num_bins());
    for t in 0..s.num_frames {
        for fb in 0..s.num_bins() {
            if s.is_degenerate(t, fb) {
                continue;
            }
            let spec = s.at(t, fb);
            let l = argmax(spec);
            let xi = spec[l];
            let phi = grid.azimuth(l);
            out.push(BinEstimate {
                frame: t,
                bin: start + fb,
                dir_index: l,
                phi_hat_deg: phi,
                theta_hat_deg: phi,
                xi,
                valid: xi >= lambda,
                w: 1.0,
            });
        }
    }
    Ok(out)
}
