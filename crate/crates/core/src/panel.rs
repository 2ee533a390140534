//! Panel data model and location-scale grids.
//!
//! A [`PanelDataset`] holds `n >= 2` series of common length `T`, each with a
//! response and `d >= 0` covariates. Time is always rescaled as `t/T` for
//! `t = 1..=T`. A [`LocationScaleGrid`] is the finite family of intervals
//! `[u - h, u + h]` on which trends are compared; every interval lies in
//! `[0, 1]`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack used when checking interval containment and inclusion.
pub const INTERVAL_EPS: f64 = 1e-12;

/// One observed time series: response `y` and a `T x d` covariate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    id: String,
    y: Vec<f64>,
    x: Array2<f64>,
}

impl Series {
    /// `x` must have one row per observation; validation happens in
    /// [`validate_panel`].
    pub fn new(id: impl Into<String>, y: Vec<f64>, x: Array2<f64>) -> Self {
        Self {
            id: id.into(),
            y,
            x,
        }
    }

    pub fn without_covariates(id: impl Into<String>, y: Vec<f64>) -> Self {
        let len = y.len();
        Self::new(id, y, Array2::zeros((len, 0)))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Number of covariates.
    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// A validated balanced panel.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    series: Vec<Series>,
    len: usize,
    dim: usize,
}

impl PanelDataset {
    pub fn series(&self) -> &[Series] {
        &self.series
    }

    /// Number of series `n`.
    pub fn n(&self) -> usize {
        self.series.len()
    }

    /// Common series length `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Number of covariates `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> Vec<String> {
        self.series.iter().map(|s| s.id.clone()).collect()
    }

    pub fn into_series(self) -> Vec<Series> {
        self.series
    }
}

/// Checks the panel invariants and wraps the series, preserving order.
///
/// Requires `n >= 2`, a common length `T >= 2`, a common covariate dimension,
/// and finite values everywhere. Errors name the offending series by id and
/// position.
pub fn validate_panel(raw: Vec<Series>) -> Result<PanelDataset> {
    if raw.len() < 2 {
        return Err(Error::TooFewSeries(raw.len()));
    }
    let len = raw[0].len();
    let dim = raw[0].dim();
    if len < 2 {
        return Err(Error::TooShort { min: 2, found: len });
    }
    for (index, s) in raw.iter().enumerate() {
        if s.len() != len {
            return Err(Error::LengthMismatch {
                id: s.id.clone(),
                index,
                expected: len,
                found: s.len(),
            });
        }
        if s.x.nrows() != len {
            return Err(Error::LengthMismatch {
                id: s.id.clone(),
                index,
                expected: len,
                found: s.x.nrows(),
            });
        }
        if s.dim() != dim {
            return Err(Error::DimensionMismatch {
                id: s.id.clone(),
                index,
                expected: dim,
                found: s.dim(),
            });
        }
        if let Some(t) = s.y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                id: s.id.clone(),
                index,
                t: t + 1,
                field: "response",
            });
        }
        if let Some(((t, _), _)) = s.x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                id: s.id.clone(),
                index,
                t: t + 1,
                field: "covariate",
            });
        }
    }
    Ok(PanelDataset {
        series: raw,
        len,
        dim,
    })
}

/// Location `u` and half-width `h` of the interval `[u - h, u + h]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint")]
pub struct LocationScalePoint {
    u: f64,
    h: f64,
}

#[derive(Deserialize)]
struct RawPoint {
    u: f64,
    h: f64,
}

impl TryFrom<RawPoint> for LocationScalePoint {
    type Error = Error;

    fn try_from(raw: RawPoint) -> Result<Self> {
        Self::new(raw.u, raw.h)
    }
}

impl LocationScalePoint {
    /// Rejects non-finite values, `h <= 0`, and intervals leaving `[0, 1]`.
    pub fn new(u: f64, h: f64) -> Result<Self> {
        if !u.is_finite() || !h.is_finite() {
            return Err(Error::InvalidPoint {
                u,
                h,
                reason: "non-finite coordinate",
            });
        }
        if h <= 0.0 {
            return Err(Error::InvalidPoint {
                u,
                h,
                reason: "scale must be positive",
            });
        }
        if !interval_contained(u, h) {
            return Err(Error::InvalidPoint {
                u,
                h,
                reason: "interval not contained in [0, 1]",
            });
        }
        Ok(Self { u, h })
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn lower(&self) -> f64 {
        self.u - self.h
    }

    pub fn upper(&self) -> f64 {
        self.u + self.h
    }

    /// `true` if this interval is a subset of `other` (up to [`INTERVAL_EPS`]).
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.lower() >= other.lower() - INTERVAL_EPS && self.upper() <= other.upper() + INTERVAL_EPS
    }

    /// `true` if both endpoints agree up to [`INTERVAL_EPS`].
    pub fn same_interval(&self, other: &Self) -> bool {
        (self.lower() - other.lower()).abs() <= INTERVAL_EPS
            && (self.upper() - other.upper()).abs() <= INTERVAL_EPS
    }

    /// Strict inclusion: subset and not the same interval.
    pub fn is_strict_subset_of(&self, other: &Self) -> bool {
        self.is_subset_of(other) && !self.same_interval(other)
    }
}

pub(crate) fn interval_contained(u: f64, h: f64) -> bool {
    u - h >= -INTERVAL_EPS && u + h <= 1.0 + INTERVAL_EPS
}

/// A finite, duplicate-free set of location-scale points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocationScaleGrid {
    points: Vec<LocationScalePoint>,
    h_min: f64,
    h_max: f64,
    dropped: usize,
}

impl LocationScaleGrid {
    /// Builds a grid from already-valid points. Order is preserved.
    pub fn new(points: Vec<LocationScalePoint>) -> Result<Self> {
        Self::with_dropped(points, 0)
    }

    pub(crate) fn with_dropped(points: Vec<LocationScalePoint>, dropped: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let mut keys: Vec<(u64, u64)> = points.iter().map(|p| (p.u.to_bits(), p.h.to_bits())).collect();
        keys.sort_unstable();
        if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicatePoint {
                u: f64::from_bits(w[0].0),
                h: f64::from_bits(w[0].1),
            });
        }
        let h_min = points.iter().map(|p| p.h).fold(f64::INFINITY, f64::min);
        let h_max = points.iter().map(|p| p.h).fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            points,
            h_min,
            h_max,
            dropped,
        })
    }

    /// Cartesian product of `us` and `hs`, keeping only contained intervals.
    /// The number of discarded combinations is available via [`Self::dropped`].
    pub fn from_product(us: &[f64], hs: &[f64]) -> Result<Self> {
        let mut points = Vec::new();
        let mut dropped = 0;
        for &h in hs {
            for &u in us {
                match LocationScalePoint::new(u, h) {
                    Ok(p) => points.push(p),
                    Err(Error::InvalidPoint {
                        reason: "interval not contained in [0, 1]",
                        ..
                    }) => dropped += 1,
                    Err(e) => return Err(e),
                }
            }
        }
        Self::with_dropped(points, dropped)
    }

    pub fn points(&self) -> &[LocationScalePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// Candidate points discarded at construction because their interval
    /// left `[0, 1]`.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Distinct scales in ascending order.
    pub fn scales(&self) -> Vec<f64> {
        let mut hs: Vec<f64> = self.points.iter().map(|p| p.h).collect();
        hs.sort_by(f64::total_cmp);
        hs.dedup();
        hs
    }
}
