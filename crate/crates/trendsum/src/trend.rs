//! Trend domain types: one detected pattern plus the per-series collection.
//!
//! Kind-specific parameters are stored in normalized units (series time span
//! mapped to [0,1], value range mapped to [0,1]) except for timestamps
//! (`t_start`, `t_end`, `t_at`), which stay in raw series time. Statistical
//! trends carry the raw mean/std of the whole series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::series::TimeSeries;

/// Trend categories. Enum order is the deterministic sort order used when
/// assembling a `TrendSet`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendKind {
    Linear,
    Jump,
    Cycle,
    Anomaly,
    Statistical,
}

/// Kind-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendParams {
    /// Slope/intercept of the fitted line in normalized coordinates.
    Linear { slope: f64, intercept: f64, r_squared: f64 },
    /// Signed discontinuity in normalized value units, located at `t_at`.
    Jump { delta: f64, t_at: f64 },
    /// Period in raw time units, amplitude in normalized value units.
    Cycle { period: f64, amplitude: f64 },
    /// Residual deviation in normalized value units, located at `t_at`.
    Anomaly { deviation: f64, t_at: f64 },
    /// Raw whole-series mean and standard deviation.
    Statistical { mean: f64, std: f64 },
}

impl TrendParams {
    pub fn kind(&self) -> TrendKind {
        match self {
            TrendParams::Linear { .. } => TrendKind::Linear,
            TrendParams::Jump { .. } => TrendKind::Jump,
            TrendParams::Cycle { .. } => TrendKind::Cycle,
            TrendParams::Anomaly { .. } => TrendKind::Anomaly,
            TrendParams::Statistical { .. } => TrendKind::Statistical,
        }
    }
}

/// One detected pattern in a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub t_start: f64,
    pub t_end: f64,
    /// Inclusive index range into the source series.
    pub idx_start: usize,
    pub idx_end: usize,
    pub params: TrendParams,
}

impl Trend {
    pub fn kind(&self) -> TrendKind {
        self.params.kind()
    }

    pub fn n_points(&self) -> usize {
        self.idx_end - self.idx_start + 1
    }

    pub fn validate(&self, series: &TimeSeries) -> Result<()> {
        if self.t_start > self.t_end {
            return Err(Error::IntervalOutOfRange);
        }
        if self.idx_end >= series.len() || self.idx_start > self.idx_end {
            return Err(Error::IntervalOutOfRange);
        }
        if self.t_start < series.t_start() - 1e-12 || self.t_end > series.t_end() + 1e-12 {
            return Err(Error::IntervalOutOfRange);
        }
        match &self.params {
            TrendParams::Jump { t_at, .. } | TrendParams::Anomaly { t_at, .. } => {
                if *t_at < self.t_start || *t_at > self.t_end {
                    return Err(Error::IntervalOutOfRange);
                }
            }
            TrendParams::Cycle { period, amplitude } => {
                if *period <= 0.0 || *amplitude < 0.0 {
                    return Err(Error::InvalidConfig("cycle period/amplitude".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// All trends of one series with their feature vectors (parallel sequences).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSet {
    pub version: String,
    pub series_id: String,
    pub trends: Vec<Trend>,
    pub features: Vec<FeatureVector>,
}

impl TrendSet {
    pub fn new(series_id: impl Into<String>, trends: Vec<Trend>, features: Vec<FeatureVector>) -> Result<Self> {
        if trends.len() != features.len() {
            return Err(Error::DimensionMismatch {
                expected: trends.len(),
                got: features.len(),
            });
        }
        Ok(TrendSet {
            version: "v1".into(),
            series_id: series_id.into(),
            trends,
            features,
        })
    }

    pub fn len(&self) -> usize {
        self.trends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trends.is_empty()
    }
}

/// Deterministic ordering for assembled trend sets:
/// by t_start, then kind enum order, then t_end.
pub fn sort_trends(trends: &mut Vec<Trend>) {
    trends.sort_by(|a, b| {
        a.t_start
            .partial_cmp(&b.t_start)
            .unwrap()
            .then(a.kind().cmp(&b.kind()))
            .then(a.t_end.partial_cmp(&b.t_end).unwrap())
    });
}
