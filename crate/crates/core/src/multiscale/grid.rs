//! Grid presets used by the simulation study and the two applications.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{LocationScaleGrid, LocationScalePoint};

/// Built-in location-scale grid families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPreset {
    /// `u = 5t/T`, `h = (5t - 3)/T`: intervals spanning 5, 15, 25, ... points.
    SimS6,
    /// `u = (8t + 1)/(2T)`, `h = 4t/T`: quarterly data, spans of 2, 4, 6, ... years.
    GdpS71,
    /// `u = t/T`, `h = (5t - 3)/T`: annual data, spans of 5, 15, 25, ... years.
    HouseS72,
}

impl GridPreset {
    pub fn name(&self) -> &'static str {
        match self {
            GridPreset::SimS6 => "sim_s6",
            GridPreset::GdpS71 => "gdp_s71",
            GridPreset::HouseS72 => "house_s72",
        }
    }

    /// `(u numerator, h numerator)` generators over the common denominator `2T`.
    fn numerators(&self, t: u64) -> (Option<u64>, Option<u64>) {
        match self {
            GridPreset::SimS6 => ((t >= 1).then(|| 10 * t), (t >= 1).then(|| 10 * t - 6)),
            GridPreset::GdpS71 => (Some(8 * t + 1), (t >= 1).then(|| 8 * t)),
            GridPreset::HouseS72 => ((t >= 1).then(|| 2 * t), (t >= 1).then(|| 10 * t - 6)),
        }
    }
}

impl std::str::FromStr for GridPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sim_s6" => Ok(GridPreset::SimS6),
            "gdp_s71" => Ok(GridPreset::GdpS71),
            "house_s72" => Ok(GridPreset::HouseS72),
            other => Err(Error::Config(format!("unknown grid preset `{other}`"))),
        }
    }
}

/// Either a preset family or explicit location and scale lists (combined as a
/// Cartesian product).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    Preset(GridPreset),
    Custom { us: Vec<f64>, hs: Vec<f64> },
}

impl From<GridPreset> for GridSpec {
    fn from(p: GridPreset) -> Self {
        GridSpec::Preset(p)
    }
}

/// Builds the grid for series length `len`.
///
/// Preset scales are restricted to `[log T / T, 1/4]` and locations to
/// `(0, 1]`; afterwards every point whose interval leaves `[0, 1]` is dropped
/// and counted in [`LocationScaleGrid::dropped`]. Points are ordered by scale,
/// then location.
pub fn build_grid(len: usize, spec: &GridSpec) -> Result<LocationScaleGrid> {
    match spec {
        GridSpec::Custom { us, hs } => LocationScaleGrid::from_product(us, hs),
        GridSpec::Preset(preset) => {
            if len < 20 {
                return Err(Error::TooShort { min: 20, found: len });
            }
            let denom = 2 * len as u64;
            let log_bound = 2.0 * (len as f64).ln();
            let mut us = Vec::new();
            let mut hs = Vec::new();
            for t in 0u64.. {
                let (u, h) = preset.numerators(t);
                let u_done = u.is_some_and(|u| u > denom);
                let h_done = h.is_some_and(|h| 2 * h > len as u64);
                if let Some(u) = u.filter(|&u| u >= 1 && u <= denom) {
                    us.push(u);
                }
                if let Some(h) = h.filter(|&h| h as f64 >= log_bound && 2 * h <= len as u64) {
                    hs.push(h);
                }
                if u_done && h_done {
                    break;
                }
            }

            let mut points = Vec::new();
            let mut dropped = 0;
            for &h in &hs {
                for &u in &us {
                    if u >= h && u + h <= denom {
                        points.push(LocationScalePoint::new(
                            u as f64 / denom as f64,
                            h as f64 / denom as f64,
                        )?);
                    } else {
                        dropped += 1;
                    }
                }
            }
            LocationScaleGrid::with_dropped(points, dropped)
        }
    }
}
