//! Universal directivity map (UDM): a scenario-independent, array-derived
//! reliability score over (look direction, frequency).
//!
//! For every look direction `h` and frequency `f` the steering vector
//! `v(φ_h, f)` is compared with the whole manifold `v(φ_l, f)`. The resulting
//! similarity row `Λ_h(·, f)` is binarized at `thr`; `m_h(f)` counts the
//! above-threshold directions closer than `δ_near` and `M_h(f)` those farther
//! than `δ_far`. Entries with many near hits and few far hits rank high; the
//! summed ranks are min-max normalized into `Ξ ∈ [0, 1]`.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle::circ_dist_deg;
use crate::array::{DirectionGrid, SteeringVectorSet};
use crate::container::{self, join_f64};
use crate::error::{Error, Result};
use crate::spectrum::cosine_similarity;

const UDM_MAGIC: &str = "LSDD-UDM";
const UDM_VERSION: u32 = 1;

/// Steering-vector similarities `Λ_h(φ_l, f)`, stored `[h][l][f]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectivityTensor {
    values: Vec<f64>,
    num_dirs: usize,
    num_freqs: usize,
}

impl DirectivityTensor {
    pub fn get(&self, h: usize, l: usize, f: usize) -> f64 {
        self.values[(h * self.num_dirs + l) * self.num_freqs + f]
    }

    pub fn num_dirs(&self) -> usize {
        self.num_dirs
    }

    pub fn num_freqs(&self) -> usize {
        self.num_freqs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// One similarity row `Λ_h(·, f)` over all grid directions.
pub fn directivity_row(steering: &SteeringVectorSet, h: usize, f: usize) -> Result<Vec<f64>> {
    let look = steering.vector(h, f);
    (0..steering.num_directions())
        .map(|l| cosine_similarity(look, steering.vector(l, f)))
        .collect()
}

pub fn compute_directivity(steering: &SteeringVectorSet) -> Result<DirectivityTensor> {
    let (dirs, freqs) = (steering.num_directions(), steering.num_freqs());
    let rows: Vec<Vec<f64>> = (0..dirs)
        .into_par_iter()
        .map(|h| {
            let per_freq = (0..freqs)
                .map(|f| directivity_row(steering, h, f))
                .collect::<Result<Vec<_>>>()?;
            let mut block = vec![0.0; dirs * freqs];
            for (f, row) in per_freq.iter().enumerate() {
                for (l, v) in row.iter().enumerate() {
                    block[l * freqs + f] = *v;
                }
            }
            Ok(block)
        })
        .collect::<Result<_>>()?;
    Ok(DirectivityTensor {
        values: rows.concat(),
        num_dirs: dirs,
        num_freqs: freqs,
    })
}

/// Binarized directivity `B_h(φ_l, f) = [Λ_h(φ_l, f) > thr]`, stored `[h][l][f]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDirectivity {
    values: Vec<bool>,
    num_dirs: usize,
    num_freqs: usize,
}

impl BinaryDirectivity {
    pub fn from_values(values: Vec<bool>, num_dirs: usize, num_freqs: usize) -> Result<Self> {
        if values.len() != num_dirs * num_dirs * num_freqs {
            return Err(Error::param("binary directivity dimensions inconsistent"));
        }
        Ok(Self {
            values,
            num_dirs,
            num_freqs,
        })
    }

    pub fn get(&self, h: usize, l: usize, f: usize) -> bool {
        self.values[(h * self.num_dirs + l) * self.num_freqs + f]
    }
}

fn check_thr(thr: f64) -> Result<()> {
    if !(thr > 0.0 && thr < 1.0) {
        return Err(Error::param(format!("binarization threshold must be in (0, 1), got {thr}")));
    }
    Ok(())
}

pub fn binarize_directivity(lambda: &DirectivityTensor, thr: f64) -> Result<BinaryDirectivity> {
    check_thr(thr)?;
    Ok(BinaryDirectivity {
        values: lambda.values.iter().map(|v| *v > thr).collect(),
        num_dirs: lambda.num_dirs,
        num_freqs: lambda.num_freqs,
    })
}

/// Near-lobe and far-lobe hit counts, stored `[h][f]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NearFarCounts {
    pub near: Vec<u32>,
    pub far: Vec<u32>,
    pub num_dirs: usize,
    pub num_freqs: usize,
}

fn check_windows(delta_near_deg: f64, delta_far_deg: f64) -> Result<()> {
    if !(delta_near_deg > 0.0 && delta_near_deg < delta_far_deg) {
        return Err(Error::param(format!(
            "need 0 < delta_near < delta_far, got {delta_near_deg} and {delta_far_deg}"
        )));
    }
    Ok(())
}

/// Counts hits with circular distance `< δ_near` and `> δ_far` from each look direction.
pub fn count_near_far(
    b: &BinaryDirectivity,
    grid: &DirectionGrid,
    delta_near_deg: f64,
    delta_far_deg: f64,
) -> Result<NearFarCounts> {
    check_windows(delta_near_deg, delta_far_deg)?;
    if grid.len() != b.num_dirs {
        return Err(Error::param("grid size differs from directivity tensor"));
    }
    let (dirs, freqs) = (b.num_dirs, b.num_freqs);
    let mut near = vec![0u32; dirs * freqs];
    let mut far = vec![0u32; dirs * freqs];
    for h in 0..dirs {
        for l in 0..dirs {
            let d = circ_dist_deg(grid.azimuth(l), grid.azimuth(h));
            let is_near = d < delta_near_deg;
            let is_far = d > delta_far_deg;
            if !is_near && !is_far {
                continue;
            }
            for f in 0..freqs {
                if b.get(h, l, f) {
                    if is_near {
                        near[h * freqs + f] += 1;
                    } else {
                        far[h * freqs + f] += 1;
                    }
                }
            }
        }
    }
    Ok(NearFarCounts {
        near,
        far,
        num_dirs: dirs,
        num_freqs: freqs,
    })
}

/// Over which entries the ranks and the normalization are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankScope {
    /// All (direction, frequency) pairs jointly.
    Global,
    /// Each look direction separately, over frequency.
    PerDirection,
}

impl RankScope {
    pub fn name(self) -> &'static str {
        match self {
            RankScope::Global => "global",
            RankScope::PerDirection => "per_direction",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "global" => Some(RankScope::Global),
            "per_direction" | "per_h" => Some(RankScope::PerDirection),
            _ => None,
        }
    }
}

/// 1-based ascending ranks; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn normalize_ranks(near: &[u32], far: &[u32]) -> Vec<f64> {
    let near_f: Vec<f64> = near.iter().map(|&v| v as f64).collect();
    // fewer far hits ranks higher
    let far_neg: Vec<f64> = far.iter().map(|&v| -(v as f64)).collect();
    let r = average_ranks(&near_f);
    let big_r = average_ranks(&far_neg);
    let total: Vec<f64> = r.iter().zip(&big_r).map(|(a, b)| a + b).collect();
    let min = total.iter().copied().fold(f64::INFINITY, f64::min);
    let max = total.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return vec![1.0; total.len()];
    }
    total.iter().map(|v| (v - min) / (max - min)).collect()
}

/// Normalized rank map `Ξ[h][f]`; larger means more reliable.
pub fn rank_and_normalize(counts: &NearFarCounts, scope: RankScope) -> Vec<f64> {
    match scope {
        RankScope::Global => normalize_ranks(&counts.near, &counts.far),
        RankScope::PerDirection => {
            let f = counts.num_freqs;
            (0..counts.num_dirs)
                .flat_map(|h| normalize_ranks(&counts.near[h * f..(h + 1) * f], &counts.far[h * f..(h + 1) * f]))
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UdmParams {
    pub thr: f64,
    pub delta_near_deg: f64,
    pub delta_far_deg: f64,
    pub scope: RankScope,
}

impl Default for UdmParams {
    fn default() -> Self {
        Self {
            thr: 0.85,
            delta_near_deg: 10.0,
            delta_far_deg: 25.0,
            scope: RankScope::Global,
        }
    }
}

/// Normalized reliability map `Ξ[h][f]` with the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Udm {
    xi_map: Vec<f64>,
    pub params: UdmParams,
    grid: DirectionGrid,
    freqs_hz: Vec<f64>,
}

impl Udm {
    pub fn from_parts(xi_map: Vec<f64>, params: UdmParams, grid: DirectionGrid, freqs_hz: Vec<f64>) -> Result<Self> {
        if xi_map.len() != grid.len() * freqs_hz.len() {
            return Err(Error::param("UDM map size differs from grid × frequencies"));
        }
        if xi_map.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::param("UDM entries must lie in [0, 1]"));
        }
        Ok(Self {
            xi_map,
            params,
            grid,
            freqs_hz,
        })
    }

    /// Builds the map over every frequency of `steering`.
    ///
    /// Equivalent to `compute_directivity → binarize_directivity →
    /// count_near_far → rank_and_normalize`, without materializing the
    /// full `L × L × F` tensor.
    pub fn from_steering(steering: &SteeringVectorSet, params: UdmParams) -> Result<Self> {
        check_thr(params.thr)?;
        check_windows(params.delta_near_deg, params.delta_far_deg)?;
        let grid = steering.grid();
        let (dirs, freqs) = (steering.num_directions(), steering.num_freqs());
        let per_h: Vec<(Vec<u32>, Vec<u32>)> = (0..dirs)
            .into_par_iter()
            .map(|h| {
                let mut near = vec![0u32; freqs];
                let mut far = vec![0u32; freqs];
                for f in 0..freqs {
                    let row = directivity_row(steering, h, f)?;
                    for (l, v) in row.iter().enumerate() {
                        if !(*v > params.thr) {
                            continue;
                        }
                        let d = circ_dist_deg(grid.azimuth(l), grid.azimuth(h));
                        if d < params.delta_near_deg {
                            near[f] += 1;
                        } else if d > params.delta_far_deg {
                            far[f] += 1;
                        }
                    }
                }
                Ok((near, far))
            })
            .collect::<Result<_>>()?;
        let mut counts = NearFarCounts {
            near: Vec::with_capacity(dirs * freqs),
            far: Vec::with_capacity(dirs * freqs),
            num_dirs: dirs,
            num_freqs: freqs,
        };
        for (n, f) in per_h {
            counts.near.extend(n);
            counts.far.extend(f);
        }
        let xi_map = rank_and_normalize(&counts, params.scope);
        Self::from_parts(xi_map, params, grid.clone(), steering.freqs_hz().to_vec())
    }

    pub fn grid(&self) -> &DirectionGrid {
        &self.grid
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    pub fn xi_map(&self) -> &[f64] {
        &self.xi_map
    }

    pub fn num_freqs(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn get(&self, h: usize, f: usize) -> f64 {
        self.xi_map[h * self.freqs_hz.len() + f]
    }

    /// Column whose frequency is nearest to `hz`, within `tol_hz`.
    pub fn column_for_freq(&self, hz: f64, tol_hz: f64) -> Option<usize> {
        let (idx, dist) = self
            .freqs_hz
            .iter()
            .enumerate()
            .map(|(i, f)| (i, (f - hz).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))?;
        (dist <= tol_hz).then_some(idx)
    }

    /// Array-based reliability at the grid direction nearest to `phi_hat_deg`.
    pub fn alpha(&self, phi_hat_deg: f64, column: usize) -> Result<f64> {
        if column >= self.freqs_hz.len() {
            return Err(Error::param(format!(
                "frequency column {column} outside the UDM band ({} columns)",
                self.freqs_hz.len()
            )));
        }
        Ok(self.get(self.grid.nearest(phi_hat_deg), column))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = Vec::new();
        container::write_header(
            &mut out,
            UDM_MAGIC,
            UDM_VERSION,
            &[
                ("directions", self.grid.len().to_string()),
                ("freqs", self.freqs_hz.len().to_string()),
                ("thr", self.params.thr.to_string()),
                ("delta_near_deg", self.params.delta_near_deg.to_string()),
                ("delta_far_deg", self.params.delta_far_deg.to_string()),
                ("scope", self.params.scope.name().to_owned()),
                ("grid", join_f64(self.grid.azimuths())),
                ("freqs_hz", join_f64(&self.freqs_hz)),
            ],
        )?;
        container::write_real32(&mut out, &self.xi_map)?;
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path)?;
        let (header, payload) = container::split_header(&bytes, UDM_MAGIC, UDM_VERSION)?;
        let dirs: usize = header.parse("directions")?;
        let freqs: usize = header.parse("freqs")?;
        let scope_name = header.get("scope")?;
        let params = UdmParams {
            thr: header.parse("thr")?,
            delta_near_deg: header.parse("delta_near_deg")?,
            delta_far_deg: header.parse("delta_far_deg")?,
            scope: RankScope::from_name(scope_name)
                .ok_or_else(|| Error::format(format!("unknown rank scope {scope_name:?}")))?,
        };
        let grid = DirectionGrid::from_azimuths(header.list_f64("grid", dirs)?)
            .map_err(|e| Error::format(format!("UDM grid: {e}")))?;
        let freqs_hz = header.list_f64("freqs_hz", freqs)?;
        let xi_map = container::read_real32(payload, dirs * freqs, "UDM payload")?;
        Self::from_parts(xi_map, params, grid, freqs_hz).map_err(|e| Error::format(e.to_string()))
    }
}

/// `w = α(φ̂, f) · ξ`.
pub fn reliability_weight(udm: &Udm, phi_hat_deg: f64, column: usize, xi: f64) -> Result<f64> {
    Ok(udm.alpha(phi_hat_deg, column)? * xi)
}
