//! Flat `key = value` pipeline configuration.
//!
//! Blank lines and `#` comments are ignored. Every key is optional; unknown
//! keys are rejected. Command-line overrides go through [`PipelineConfig::set_key`].

use std::fmt::Write as _;

use serde::Serialize;

use crate::clustering::DEFAULT_Q_CAP;
use crate::error::{Error, Result};
use crate::stft::{StftParams, WindowKind};
use crate::udm::{RankScope, UdmParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// `w = 1` for every valid bin.
    Base,
    /// `w = α(φ̂, f) · ξ`.
    New,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityMode {
    /// `Q = 1` for every cluster.
    Base,
    /// `Q = W_k / W_{K+1}`.
    New,
    /// Subsets chosen by true error; reported Q is as for `New`.
    Ideal,
}

impl WeightMode {
    pub fn name(self) -> &'static str {
        match self {
            WeightMode::Base => "base",
            WeightMode::New => "new",
        }
    }
}

impl QualityMode {
    pub fn name(self) -> &'static str {
        match self {
            QualityMode::Base => "base",
            QualityMode::New => "new",
            QualityMode::Ideal => "ideal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub lambda: f64,
    pub smoothing_rt: usize,
    pub smoothing_rf: usize,
    pub f_low_hz: f64,
    pub f_high_hz: f64,
    pub interval_ms: f64,
    pub grid_resolution_deg: f64,
    pub cluster_delta_deg: usize,
    pub udm_thr: f64,
    pub delta_near_deg: f64,
    pub delta_far_deg: f64,
    pub udm_rank_scope: RankScope,
    pub weight_mode: WeightMode,
    pub quality_mode: QualityMode,
    pub zeta_deg: f64,
    pub outlier_threshold_deg: f64,
    pub low_error_threshold_deg: f64,
    pub q_cap: f64,
    pub sample_rate_hz: f64,
    pub nfft: usize,
    pub hop: usize,
    pub window: WindowKind,
    pub speed_of_sound: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let stft = StftParams::default();
        let udm = UdmParams::default();
        Self {
            lambda: 0.7,
            smoothing_rt: 3,
            smoothing_rf: 7,
            f_low_hz: 1500.0,
            f_high_hz: 3500.0,
            interval_ms: 500.0,
            grid_resolution_deg: 1.0,
            cluster_delta_deg: 10,
            udm_thr: udm.thr,
            delta_near_deg: udm.delta_near_deg,
            delta_far_deg: udm.delta_far_deg,
            udm_rank_scope: udm.scope,
            weight_mode: WeightMode::New,
            quality_mode: QualityMode::New,
            zeta_deg: 5.0,
            outlier_threshold_deg: 25.0,
            low_error_threshold_deg: 10.0,
            q_cap: DEFAULT_Q_CAP,
            sample_rate_hz: stft.sample_rate_hz,
            nfft: stft.nfft,
            hop: stft.hop,
            window: stft.window,
            speed_of_sound: crate::array::DEFAULT_SPEED_OF_SOUND,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "lambda",
    "smoothing",
    "smoothing_rt",
    "smoothing_rf",
    "f_low_hz",
    "f_high_hz",
    "interval_ms",
    "grid_resolution_deg",
    "cluster_delta_deg",
    "udm_thr",
    "delta_near_deg",
    "delta_far_deg",
    "udm_rank_scope",
    "weight_mode",
    "quality_mode",
    "zeta_deg",
    "outlier_threshold_deg",
    "low_error_threshold_deg",
    "q_cap",
    "sample_rate_hz",
    "nfft",
    "hop",
    "window",
    "speed_of_sound",
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

/// Parses `U<rt><rf>` (for example `U37`) into single-digit window sizes.
fn parse_smoothing_name(value: &str) -> Option<(usize, usize)> {
    let digits = value.strip_prefix('U').or_else(|| value.strip_prefix('u'))?;
    let mut chars = digits.chars();
    let rt = chars.next()?.to_digit(10)? as usize;
    let rf = chars.next()?.to_digit(10)? as usize;
    chars.next().is_none().then_some((rt, rf))
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set_key(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one key without validating the whole configuration.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "lambda" => self.lambda = num(key, value)?,
            "smoothing" => {
                let (rt, rf) = parse_smoothing_name(value)
                    .ok_or_else(|| Error::Config(format!("smoothing: expected U<rt><rf>, got {value:?}")))?;
                self.smoothing_rt = rt;
                self.smoothing_rf = rf;
            }
            "smoothing_rt" => self.smoothing_rt = num(key, value)?,
            "smoothing_rf" => self.smoothing_rf = num(key, value)?,
            "f_low_hz" => self.f_low_hz = num(key, value)?,
            "f_high_hz" => self.f_high_hz = num(key, value)?,
            "interval_ms" => self.interval_ms = num(key, value)?,
            "grid_resolution_deg" => self.grid_resolution_deg = num(key, value)?,
            "cluster_delta_deg" => self.cluster_delta_deg = num(key, value)?,
            "udm_thr" => self.udm_thr = num(key, value)?,
            "delta_near_deg" => self.delta_near_deg = num(key, value)?,
            "delta_far_deg" => self.delta_far_deg = num(key, value)?,
            "udm_rank_scope" => {
                self.udm_rank_scope = RankScope::from_name(value)
                    .ok_or_else(|| Error::Config(format!("udm_rank_scope: unknown value {value:?}")))?
            }
            "weight_mode" => {
                self.weight_mode = match value {
                    "base" => WeightMode::Base,
                    "new" => WeightMode::New,
                    _ => return Err(Error::Config(format!("weight_mode: unknown value {value:?}"))),
                }
            }
            "quality_mode" => {
                self.quality_mode = match value {
                    "base" => QualityMode::Base,
                    "new" => QualityMode::New,
                    "ideal" => QualityMode::Ideal,
                    _ => return Err(Error::Config(format!("quality_mode: unknown value {value:?}"))),
                }
            }
            "zeta_deg" => self.zeta_deg = num(key, value)?,
            "outlier_threshold_deg" => self.outlier_threshold_deg = num(key, value)?,
            "low_error_threshold_deg" => self.low_error_threshold_deg = num(key, value)?,
            "q_cap" => self.q_cap = num(key, value)?,
            "sample_rate_hz" => self.sample_rate_hz = num(key, value)?,
            "nfft" => self.nfft = num(key, value)?,
            "hop" => self.hop = num(key, value)?,
            "window" => {
                self.window = WindowKind::from_name(value)
                    .ok_or_else(|| Error::Config(format!("window: unknown value {value:?}")))?
            }
            "speed_of_sound" => self.speed_of_sound = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must be in [0, 1], got {}", self.lambda));
        }
        for (name, r) in [("smoothing_rt", self.smoothing_rt), ("smoothing_rf", self.smoothing_rf)] {
            if r == 0 || r % 2 == 0 {
                return bad(format!("{name} must be odd and >= 1, got {r}"));
            }
        }
        if !(self.f_low_hz >= 0.0 && self.f_low_hz < self.f_high_hz) {
            return bad(format!("band [{}, {}] Hz is empty", self.f_low_hz, self.f_high_hz));
        }
        if !(self.interval_ms > 0.0 && self.interval_ms.is_finite()) {
            return bad("interval_ms must be positive".into());
        }
        if !(self.grid_resolution_deg > 0.0 && self.grid_resolution_deg <= 90.0) {
            return bad("grid_resolution_deg must be in (0, 90]".into());
        }
        if self.cluster_delta_deg >= 180 {
            return bad("cluster_delta_deg must be below 180".into());
        }
        if !(self.udm_thr > 0.0 && self.udm_thr < 1.0) {
            return bad("udm_thr must be in (0, 1)".into());
        }
        if !(self.delta_near_deg > 0.0 && self.delta_near_deg < self.delta_far_deg) {
            return bad("need 0 < delta_near_deg < delta_far_deg".into());
        }
        for (name, v) in [
            ("zeta_deg", self.zeta_deg),
            ("outlier_threshold_deg", self.outlier_threshold_deg),
            ("low_error_threshold_deg", self.low_error_threshold_deg),
            ("q_cap", self.q_cap),
            ("speed_of_sound", self.speed_of_sound),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        self.stft_params().validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn stft_params(&self) -> StftParams {
        StftParams {
            sample_rate_hz: self.sample_rate_hz,
            nfft: self.nfft,
            hop: self.hop,
            window: self.window,
        }
    }

    pub fn udm_params(&self) -> UdmParams {
        UdmParams {
            thr: self.udm_thr,
            delta_near_deg: self.delta_near_deg,
            delta_far_deg: self.delta_far_deg,
            scope: self.udm_rank_scope,
        }
    }

    pub fn interval_s(&self) -> f64 {
        self.interval_ms / 1000.0
    }

    /// Serializes to the flat text form accepted by [`PipelineConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("lambda", self.lambda.to_string());
        put("smoothing_rt", self.smoothing_rt.to_string());
        put("smoothing_rf", self.smoothing_rf.to_string());
        put("f_low_hz", self.f_low_hz.to_string());
        put("f_high_hz", self.f_high_hz.to_string());
        put("interval_ms", self.interval_ms.to_string());
        put("grid_resolution_deg", self.grid_resolution_deg.to_string());
        put("cluster_delta_deg", self.cluster_delta_deg.to_string());
        put("udm_thr", self.udm_thr.to_string());
        put("delta_near_deg", self.delta_near_deg.to_string());
        put("delta_far_deg", self.delta_far_deg.to_string());
        put("udm_rank_scope", self.udm_rank_scope.name().into());
        put("weight_mode", self.weight_mode.name().into());
        put("quality_mode", self.quality_mode.name().into());
        put("zeta_deg", self.zeta_deg.to_string());
        put("outlier_threshold_deg", self.outlier_threshold_deg.to_string());
        put("low_error_threshold_deg", self.low_error_threshold_deg.to_string());
        put("q_cap", self.q_cap.to_string());
        put("sample_rate_hz", self.sample_rate_hz.to_string());
        put("nfft", self.nfft.to_string());
        put("hop", self.hop.to_string());
        put("window", self.window.name().into());
        put("speed_of_sound", self.speed_of_sound.to_string());
        s
    }
}
