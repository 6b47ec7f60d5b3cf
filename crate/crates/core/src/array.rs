//! Array geometry, the azimuth grid and steering-vector sets.
//!
//! Conventions used throughout the crate:
//!
//! * Azimuth is measured in the horizontal plane of the array frame, 0° along
//!   +x and increasing counter-clockwise towards +y.
//! * The unit vector `u(φ) = (cos φ, sin φ, 0)` points from the array towards
//!   the source (the direction the plane wave arrives from).
//! * The free-field response of a microphone at `r` is
//!   `v = exp(-j·2πf·(r·u(φ))/c)`. Simulation and estimation share this
//!   convention, so only self-consistency matters.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::angle::circ_dist_deg;
use crate::container::{self, join_f64};
use crate::error::{Error, Result};

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

const STEERING_MAGIC: &str = "LSDD-STEERING";
const STEERING_VERSION: u32 = 1;

/// Microphone positions in meters, expressed in the array frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    mic_positions: Vec<[f64; 3]>,
    /// Human-readable note on which direction is azimuth 0.
    pub axis_reference: String,
    pub label: String,
}

impl ArrayGeometry {
    pub fn new(mic_positions: Vec<[f64; 3]>, label: impl Into<String>) -> Result<Self> {
        if mic_positions.is_empty() {
            return Err(Error::param("array needs at least one microphone"));
        }
        for (i, p) in mic_positions.iter().enumerate() {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::param(format!("microphone {i} has a non-finite coordinate")));
            }
        }
        for i in 0..mic_positions.len() {
            for j in i + 1..mic_positions.len() {
                if mic_positions[i] == mic_positions[j] {
                    return Err(Error::param(format!(
                        "microphones {i} and {j} share the same position"
                    )));
                }
            }
        }
        Ok(Self {
            mic_positions,
            axis_reference: "azimuth 0 along +x, counter-clockwise positive".to_owned(),
            label: label.into(),
        })
    }

    /// `count` microphones evenly spaced on a horizontal circle, the first on +x.
    pub fn ring(count: usize, radius_m: f64) -> Result<Self> {
        if !(radius_m > 0.0) && count > 1 {
            return Err(Error::param("ring radius must be positive"));
        }
        let positions = (0..count)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / count as f64;
                [radius_m * a.cos(), radius_m * a.sin(), 0.0]
            })
            .collect();
        Self::new(positions, format!("ring{count}-r{radius_m}"))
    }

    /// `count` microphones along the x axis, centred on the origin.
    pub fn linear(count: usize, spacing_m: f64) -> Result<Self> {
        let offset = (count as f64 - 1.0) / 2.0;
        let positions = (0..count)
            .map(|i| [(i as f64 - offset) * spacing_m, 0.0, 0.0])
            .collect();
        Self::new(positions, format!("linear{count}-d{spacing_m}"))
    }

    pub fn num_mics(&self) -> usize {
        self.mic_positions.len()
    }

    pub fn mic_positions(&self) -> &[[f64; 3]] {
        &self.mic_positions
    }

    pub fn translated(&self, offset: [f64; 3]) -> Result<Self> {
        let positions = self
            .mic_positions
            .iter()
            .map(|p| [p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]])
            .collect();
        Self::new(positions, self.label.clone())
    }
}

/// Sorted azimuth grid on (-180, 180].
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionGrid {
    azimuths_deg: Vec<f64>,
    resolution_deg: f64,
}

impl DirectionGrid {
    /// Uniform grid with `L = round(360 / resolution)` points ending at 180°.
    pub fn uniform(resolution_deg: f64) -> Result<Self> {
        if !(resolution_deg > 0.0) || resolution_deg > 90.0 {
            return Err(Error::param(format!(
                "grid resolution must be in (0, 90] degrees, got {resolution_deg}"
            )));
        }
        let count = (360.0 / resolution_deg).round() as usize;
        let step = 360.0 / count as f64;
        let azimuths_deg = (0..count)
            .map(|i| 180.0 - (count - 1 - i) as f64 * step)
            .collect();
        Ok(Self {
            azimuths_deg,
            resolution_deg: step,
        })
    }

    /// Grid from an explicit list, as found in measured steering files.
    pub fn from_azimuths(azimuths_deg: Vec<f64>) -> Result<Self> {
        if azimuths_deg.is_empty() {
            return Err(Error::param("direction grid is empty"));
        }
        for (i, &a) in azimuths_deg.iter().enumerate() {
            if !(a > -180.0 && a <= 180.0) {
                return Err(Error::param(format!("grid azimuth {i} = {a} outside (-180, 180]")));
            }
            if i > 0 && a <= azimuths_deg[i - 1] {
                return Err(Error::param(format!("grid azimuths not strictly increasing at {i}")));
            }
        }
        let resolution_deg = if azimuths_deg.len() > 1 {
            360.0 / azimuths_deg.len() as f64
        } else {
            360.0
        };
        Ok(Self {
            azimuths_deg,
            resolution_deg,
        })
    }

    pub fn azimuths(&self) -> &[f64] {
        &self.azimuths_deg
    }

    pub fn len(&self) -> usize {
        self.azimuths_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.azimuths_deg.is_empty()
    }

    pub fn resolution_deg(&self) -> f64 {
        self.resolution_deg
    }

    pub fn azimuth(&self, index: usize) -> f64 {
        self.azimuths_deg[index]
    }

    /// Index of the grid direction circularly closest to `azimuth_deg`; ties go
    /// to the lower index.
    pub fn nearest(&self, azimuth_deg: f64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, &a) in self.azimuths_deg.iter().enumerate() {
            let d = circ_dist_deg(a, azimuth_deg);
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        best
    }
}

/// Complex array responses indexed `[direction][frequency][microphone]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVectorSet {
    values: Vec<Complex64>,
    freqs_hz: Vec<f64>,
    grid: DirectionGrid,
    num_mics: usize,
    pub geometry_label: String,
}

impl SteeringVectorSet {
    pub fn new(
        values: Vec<Complex64>,
        freqs_hz: Vec<f64>,
        grid: DirectionGrid,
        num_mics: usize,
        geometry_label: impl Into<String>,
    ) -> Result<Self> {
        if grid.is_empty() || freqs_hz.is_empty() || num_mics == 0 {
            return Err(Error::param("steering set needs directions, frequencies and microphones"));
        }
        let expected = grid.len() * freqs_hz.len() * num_mics;
        if values.len() != expected {
            return Err(Error::format(format!(
                "steering tensor holds {} values, expected {expected} (L={} F={} M={num_mics})",
                values.len(),
                grid.len(),
                freqs_hz.len()
            )));
        }
        let set = Self {
            values,
            freqs_hz,
            grid,
            num_mics,
            geometry_label: geometry_label.into(),
        };
        for l in 0..set.num_directions() {
            for f in 0..set.num_freqs() {
                let norm_sq: f64 = set.vector(l, f).iter().map(|c| c.norm_sqr()).sum();
                if !(norm_sq > 0.0) || !norm_sq.is_finite() {
                    return Err(Error::format(format!(
                        "steering vector at direction index {l}, frequency index {f} has zero or non-finite norm"
                    )));
                }
            }
        }
        Ok(set)
    }

    pub fn num_directions(&self) -> usize {
        self.grid.len()
    }

    pub fn num_freqs(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn num_mics(&self) -> usize {
        self.num_mics
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    pub fn grid(&self) -> &DirectionGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn vector(&self, direction: usize, freq: usize) -> &[Complex64] {
        let start = (direction * self.freqs_hz.len() + freq) * self.num_mics;
        &self.values[start..start + self.num_mics]
    }

    /// Index of the stored frequency closest to `hz`, if it lies within `tol_hz`.
    pub fn freq_index(&self, hz: f64, tol_hz: f64) -> Option<usize> {
        let (idx, dist) = self
            .freqs_hz
            .iter()
            .enumerate()
            .map(|(i, f)| (i, (f - hz).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))?;
        (dist <= tol_hz).then_some(idx)
    }

    /// Re-indexes the set onto `freqs_hz`, picking for each the nearest stored
    /// frequency within `tol_hz`.
    pub fn restrict_to(&self, freqs_hz: &[f64], tol_hz: f64) -> Result<Self> {
        let mut indices = Vec::with_capacity(freqs_hz.len());
        for &hz in freqs_hz {
            let idx = self.freq_index(hz, tol_hz).ok_or_else(|| {
                Error::param(format!(
                    "steering set has no frequency within {tol_hz} Hz of {hz} Hz"
                ))
            })?;
            indices.push(idx);
        }
        let mut values = Vec::with_capacity(self.num_directions() * indices.len() * self.num_mics);
        for l in 0..self.num_directions() {
            for &f in &indices {
                values.extend_from_slice(self.vector(l, f));
            }
        }
        Ok(Self {
            values,
            freqs_hz: indices.iter().map(|&i| self.freqs_hz[i]).collect(),
            grid: self.grid.clone(),
            num_mics: self.num_mics,
            geometry_label: self.geometry_label.clone(),
        })
    }

    /// Writes the set in the steering container layout (complex64 payload).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = Vec::new();
        container::write_header(
            &mut out,
            STEERING_MAGIC,
            STEERING_VERSION,
            &[
                ("mics", self.num_mics.to_string()),
                ("directions", self.num_directions().to_string()),
                ("freqs", self.num_freqs().to_string()),
                ("label", self.geometry_label.replace('\n', " ")),
                ("grid", join_f64(self.grid.azimuths())),
                ("freqs_hz", join_f64(&self.freqs_hz)),
            ],
        )?;
        container::write_complex64(&mut out, &self.values)?;
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, payload) = container::split_header(bytes, STEERING_MAGIC, STEERING_VERSION)?;
        let mics: usize = header.parse("mics")?;
        let directions: usize = header.parse("directions")?;
        let freqs: usize = header.parse("freqs")?;
        let label = header.get("label")?.to_owned();
        let grid = DirectionGrid::from_azimuths(header.list_f64("grid", directions)?)
            .map_err(|e| Error::format(format!("steering grid: {e}")))?;
        let freqs_hz = header.list_f64("freqs_hz", freqs)?;
        if let Some(i) = freqs_hz.iter().position(|f| !(*f >= 0.0)) {
            return Err(Error::format(format!("frequency index {i} is negative or NaN")));
        }
        let values =
            container::read_complex64(payload, directions * freqs * mics, "steering payload")?;
        Self::new(values, freqs_hz, grid, mics, label)
    }
}

/// Far-field plane-wave responses of `geometry` over `grid × freqs_hz`.
pub fn free_field_steering(
    geometry: &ArrayGeometry,
    grid: &DirectionGrid,
    freqs_hz: &[f64],
    speed_of_sound: f64,
) -> Result<SteeringVectorSet> {
    if grid.is_empty() || freqs_hz.is_empty() {
        return Err(Error::param("free-field steering needs a grid and frequencies"));
    }
    if !(speed_of_sound > 0.0) {
        return Err(Error::param("speed of sound must be positive"));
    }
    if freqs_hz.iter().any(|f| !(*f >= 0.0)) {
        return Err(Error::param("frequencies must be nonnegative"));
    }
    let mut values = Vec::with_capacity(grid.len() * freqs_hz.len() * geometry.num_mics());
    for &az in grid.azimuths() {
        let (s, c) = az.to_radians().sin_cos();
        for &f in freqs_hz {
            for p in geometry.mic_positions() {
                let proj = p[0] * c + p[1] * s;
                let phase = -2.0 * PI * f * proj / speed_of_sound;
                values.push(Complex64::from_polar(1.0, phase));
            }
        }
    }
    SteeringVectorSet::new(
        values,
        freqs_hz.to_vec(),
        grid.clone(),
        geometry.num_mics(),
        geometry.label.clone(),
    )
}

/// Free-field response of every microphone for one arbitrary azimuth and frequency.
pub fn free_field_response(
    geometry: &ArrayGeometry,
    azimuth_deg: f64,
    freq_hz: f64,
    speed_of_sound: f64,
) -> Vec<Complex64> {
    let (s, c) = azimuth_deg.to_radians().sin_cos();
    geometry
        .mic_positions()
        .iter()
        .map(|p| Complex64::from_polar(1.0, -2.0 * PI * freq_hz * (p[0] * c + p[1] * s) / speed_of_sound))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_one_degree() {
        let g = DirectionGrid::uniform(1.0).unwrap();
        assert_eq!(g.len(), 360);
        assert_eq!(g.azimuth(0), -179.0);
        assert_eq!(g.azimuth(359), 180.0);
        assert!(g.azimuths().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn grid_ninety_degrees() {
        let g = DirectionGrid::uniform(90.0).unwrap();
        assert_eq!(g.azimuths(), &[-90.0, 0.0, 90.0, 180.0]);
    }

    #[test]
    fn grid_rejects_bad_resolution() {
        assert!(matches!(DirectionGrid::uniform(0.0), Err(Error::Parameter(_))));
        assert!(matches!(DirectionGrid::uniform(-1.0), Err(Error::Parameter(_))));
        assert!(matches!(DirectionGrid::uniform(91.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn grid_non_divisor_resolution_stays_uniform() {
        let g = DirectionGrid::uniform(7.0).unwrap();
        assert_eq!(g.len(), 51);
        assert_eq!(g.azimuth(50), 180.0);
        assert!(g.azimuth(0) > -180.0);
    }

    #[test]
    fn nearest_wraps() {
        let g = DirectionGrid::uniform(1.0).unwrap();
        assert_eq!(g.azimuth(g.nearest(-179.8)), 180.0);
        assert_eq!(g.azimuth(g.nearest(30.2)), 30.0);
    }

    #[test]
    fn geometry_rejects_duplicates() {
        let err = ArrayGeometry::new(vec![[0.0; 3], [0.0; 3]], "dup").unwrap_err();
        assert!(matches!(err, Error::Parameter(_)));
        assert!(ArrayGeometry::new(vec![], "none").is_err());
        assert!(ArrayGeometry::new(vec![[f64::NAN, 0.0, 0.0]], "nan").is_err());
    }

    #[test]
    fn single_mic_at_origin_is_all_ones() {
        let geo = ArrayGeometry::new(vec![[0.0; 3]], "origin").unwrap();
        let grid = DirectionGrid::uniform(10.0).unwrap();
        let sv = free_field_steering(&geo, &grid, &[0.0, 500.0, 4000.0], 343.0).unwrap();
        assert!(sv.values().iter().all(|v| *v == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn dc_is_all_ones() {
        let geo = ArrayGeometry::ring(6, 0.08).unwrap();
        let grid = DirectionGrid::uniform(5.0).unwrap();
        let sv = free_field_steering(&geo, &grid, &[0.0], 343.0).unwrap();
        assert!(sv.values().iter().all(|v| *v == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn phase_of_offset_mic() {
        let geo = ArrayGeometry::new(vec![[0.1, 0.0, 0.0]], "x").unwrap();
        let grid = DirectionGrid::from_azimuths(vec![0.0]).unwrap();
        let sv = free_field_steering(&geo, &grid, &[1000.0], 343.0).unwrap();
        let v = sv.vector(0, 0)[0];
        let expected = 2.0 * PI * 1000.0 * 0.1 / 343.0;
        assert!((v.arg().abs() - expected).abs() < 1e-12);
        assert!((expected - 1.83183).abs() < 1e-5);
        // documented sign: phase is negative for a mic displaced towards the source
        assert!(v.arg() < 0.0);
    }

    #[test]
    fn free_field_rejects_bad_input() {
        let geo = ArrayGeometry::ring(4, 0.05).unwrap();
        let grid = DirectionGrid::uniform(10.0).unwrap();
        assert!(free_field_steering(&geo, &grid, &[], 343.0).is_err());
        assert!(free_field_steering(&geo, &grid, &[100.0], 0.0).is_err());
        assert!(free_field_steering(&geo, &grid, &[-1.0], 343.0).is_err());
    }

    #[test]
    fn linear_array_reflection_symmetry() {
        let geo = ArrayGeometry::linear(4, 0.04).unwrap();
        let grid = DirectionGrid::uniform(1.0).unwrap();
        let freqs = [500.0, 1500.0, 3000.0];
        let sv = free_field_steering(&geo, &grid, &freqs, 343.0).unwrap();
        for l in 0..grid.len() {
            let a = grid.azimuth(l);
            if a == 180.0 || a == 0.0 {
                continue;
            }
            let mirror = grid.nearest(-a);
            assert_eq!(grid.azimuth(mirror), -a);
            for f in 0..freqs.len() {
                assert_eq!(sv.vector(l, f), sv.vector(mirror, f));
            }
        }
    }

    #[test]
    fn restrict_picks_nearest() {
        let geo = ArrayGeometry::ring(3, 0.05).unwrap();
        let grid = DirectionGrid::uniform(30.0).unwrap();
        let sv = free_field_steering(&geo, &grid, &[0.0, 100.0, 200.0], 343.0).unwrap();
        let r = sv.restrict_to(&[199.0, 101.0], 5.0).unwrap();
        assert_eq!(r.freqs_hz(), &[200.0, 100.0]);
        assert_eq!(r.vector(3, 0), sv.vector(3, 2));
        assert!(sv.restrict_to(&[150.0], 5.0).is_err());
    }
}
