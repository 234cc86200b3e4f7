//! Fixed-length numeric description of a trend.
//!
//! The layout is fixed at m = 16 entries. One masked layout serves every
//! trend kind so a single separator parameterization can apply to all of
//! them; entries that do not apply to a kind are exactly zero. The layout is
//! identified by [`FEATURE_LAYOUT_ID`] in model files so alternate layouts
//! can be introduced without ambiguity.
//!
//! Index map:
//! ```text
//!  0..=3  one-hot kind (linear, jump, cycle, anomaly); statistical = all zero
//!  4      t_start_norm          series span mapped to [0,1]
//!  5      t_end_norm
//!  6      duration_norm
//!  7      slope_norm            linear: fitted slope; jump: signed delta
//!  8      intercept_norm        linear only
//!  9      n_points_frac
//! 10      magnitude             |delta| / amplitude / |deviation| / |slope|*duration
//! 11      mean_norm             statistical only
//! 12      contains_series_max   0/1
//! 13      fit_quality           linear r^2
//! 14      period_norm           cycle only
//! 15      max_value_norm        max value over the trend's points, normalized
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::trend::{Trend, TrendKind, TrendParams};

/// Feature dimension.
pub const M: usize = 16;

/// Identifier written into model files so layouts can be checked for
/// compatibility.
pub const FEATURE_LAYOUT_ID: &str = "m16-v1";

pub const IDX_KIND_LINEAR: usize = 0;
pub const IDX_KIND_JUMP: usize = 1;
pub const IDX_KIND_CYCLE: usize = 2;
pub const IDX_KIND_ANOMALY: usize = 3;
pub const IDX_T_START: usize = 4;
pub const IDX_T_END: usize = 5;
pub const IDX_DURATION: usize = 6;
pub const IDX_SLOPE: usize = 7;
pub const IDX_INTERCEPT: usize = 8;
pub const IDX_N_POINTS_FRAC: usize = 9;
pub const IDX_MAGNITUDE: usize = 10;
pub const IDX_MEAN: usize = 11;
pub const IDX_CONTAINS_MAX: usize = 12;
pub const IDX_FIT_QUALITY: usize = 13;
pub const IDX_PERIOD: usize = 14;
pub const IDX_MAX_VALUE: usize = 15;

/// Fixed-length (m = 16) real vector describing a trend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub [f64; M]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn validate(&self) -> Result<()> {
        for &x in &self.0 {
            if !x.is_finite() {
                return Err(Error::InvalidSeries("non-finite feature".into()));
            }
        }
        let kind_sum: f64 = self.0[..4].iter().sum();
        if kind_sum != 0.0 && kind_sum != 1.0 {
            return Err(Error::InvalidSeries("kind one-hot must sum to 0 or 1".into()));
        }
        for &i in &[IDX_T_START, IDX_T_END, IDX_DURATION, IDX_N_POINTS_FRAC, IDX_PERIOD] {
            if !(0.0..=1.0).contains(&self.0[i]) {
                return Err(Error::InvalidSeries(format!("feature {i} out of [0,1]")));
            }
        }
        if self.0[IDX_T_START] > self.0[IDX_T_END] {
            return Err(Error::InvalidSeries("t_start_norm > t_end_norm".into()));
        }
        if self.0[IDX_CONTAINS_MAX] != 0.0 && self.0[IDX_CONTAINS_MAX] != 1.0 {
            return Err(Error::InvalidSeries("contains_series_max must be 0/1".into()));
        }
        Ok(())
    }
}

/// Map a trend to the m = 16 feature layout.
///
/// Time features use the series span normalized to [0,1]; value features use
/// per-series min-max normalization, so the result is invariant under time
/// translation and positive affine value transforms. Errors on a constant
/// series (zero value range) and on intervals outside the series.
pub fn featurize(trend: &Trend, series: &TimeSeries) -> Result<FeatureVector> {
    series.validate()?;
    trend.validate(series)?;
    let (vmin, vmax) = series.value_range();
    if vmax - vmin <= 0.0 {
        return Err(Error::ConstantSeries);
    }

    let mut f = [0.0f64; M];
    let kind = trend.kind();
    match kind {
        TrendKind::Linear => f[IDX_KIND_LINEAR] = 1.0,
        TrendKind::Jump => f[IDX_KIND_JUMP] = 1.0,
        TrendKind::Cycle => f[IDX_KIND_CYCLE] = 1.0,
        TrendKind::Anomaly => f[IDX_KIND_ANOMALY] = 1.0,
        TrendKind::Statistical => {}
    }

    let clamp01 = |x: f64| x.clamp(0.0, 1.0);
    f[IDX_T_START] = clamp01(series.norm_time(trend.t_start));
    f[IDX_T_END] = clamp01(series.norm_time(trend.t_end));
    f[IDX_DURATION] = clamp01(f[IDX_T_END] - f[IDX_T_START]);
    f[IDX_N_POINTS_FRAC] = clamp01(trend.n_points() as f64 / series.len() as f64);

    let argmax = series.argmax();
    f[IDX_CONTAINS_MAX] = if (trend.idx_start..=trend.idx_end).contains(&argmax) {
        1.0
    } else {
        0.0
    };

    let max_in_range = series.points[trend.idx_start..=trend.idx_end]
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    f[IDX_MAX_VALUE] = clamp01((max_in_range - vmin) / (vmax - vmin));

    match &trend.params {
        TrendParams::Linear { slope, intercept, r_squared } => {
            f[IDX_SLOPE] = *slope;
            f[IDX_INTERCEPT] = *intercept;
            f[IDX_FIT_QUALITY] = r_squared.clamp(0.0, 1.0);
            f[IDX_MAGNITUDE] = slope.abs() * f[IDX_DURATION];
        }
        TrendParams::Jump { delta, .. } => {
            f[IDX_SLOPE] = *delta;
            f[IDX_MAGNITUDE] = delta.abs();
        }
        TrendParams::Cycle { period, amplitude } => {
            f[IDX_PERIOD] = clamp01(period / series.time_span());
            f[IDX_MAGNITUDE] = *amplitude;
        }
        TrendParams::Anomaly { deviation, .. } => {
            f[IDX_MAGNITUDE] = deviation.abs();
        }
        TrendParams::Statistical { mean, .. } => {
            f[IDX_MEAN] = clamp01((mean - vmin) / (vmax - vmin));
        }
    }

    let fv = FeatureVector(f);
    fv.validate()?;
    Ok(fv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_series(n: usize, slope: f64, intercept: f64) -> TimeSeries {
        let pts = (0..n).map(|i| (i as f64, intercept + slope * i as f64)).collect();
        TimeSeries::new("line", pts).unwrap()
    }

    fn linear_trend(series: &TimeSeries, i0: usize, i1: usize, slope: f64, intercept: f64) -> Trend {
        Trend {
            t_start: series.points[i0].0,
            t_end: series.points[i1].0,
            idx_start: i0,
            idx_end: i1,
            params: TrendParams::Linear { slope, intercept, r_squared: 1.0 },
        }
    }

    #[test]
    fn full_span_increasing_line() {
        let s = line_series(50, 2.0, 1.0);
        // normalized slope of a full-span line covering the value range is 1
        let tr = linear_trend(&s, 0, 49, 1.0, 0.0);
        let f = featurize(&tr, &s).unwrap();
        assert_eq!(f.0[IDX_KIND_LINEAR], 1.0);
        assert_eq!(f.0[IDX_T_START], 0.0);
        assert_eq!(f.0[IDX_T_END], 1.0);
        assert_eq!(f.0[IDX_DURATION], 1.0);
        assert!(f.0[IDX_SLOPE] > 0.0);
        assert_eq!(f.0[IDX_CONTAINS_MAX], 1.0);
    }

    #[test]
    fn jump_at_final_point_masks_inapplicable_features() {
        let mut pts: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 0.0)).collect();
        pts[19].1 = 1.0;
        let s = TimeSeries::new("step", pts).unwrap();
        let tr = Trend {
            t_start: 10.0,
            t_end: 19.0,
            idx_start: 10,
            idx_end: 19,
            params: TrendParams::Jump { delta: 1.0, t_at: 19.0 },
        };
        let f = featurize(&tr, &s).unwrap();
        assert_eq!(f.0[IDX_KIND_JUMP], 1.0);
        assert_eq!(f.0[IDX_T_END], 1.0);
        assert_eq!(f.0[IDX_PERIOD], 0.0);
        assert_eq!(f.0[IDX_INTERCEPT], 0.0);
        assert_eq!(f.0[IDX_FIT_QUALITY], 0.0);
        assert_eq!(f.0[IDX_MEAN], 0.0);
        assert_eq!(f.0[IDX_MAGNITUDE], 1.0);
    }

    #[test]
    fn interval_normalization_hand_computed() {
        // t in {0..100}, interval [40, 60] -> 0.4, 0.6, 0.2
        let s = line_series(101, 1.0, 0.0);
        let tr = linear_trend(&s, 40, 60, 0.2, 0.4);
        let f = featurize(&tr, &s).unwrap();
        assert!((f.0[IDX_T_START] - 0.4).abs() < 1e-12);
        assert!((f.0[IDX_T_END] - 0.6).abs() < 1e-12);
        assert!((f.0[IDX_DURATION] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn constant_series_is_an_error() {
        let pts = (0..10).map(|i| (i as f64, 5.0)).collect();
        let s = TimeSeries::new("const", pts).unwrap();
        let tr = linear_trend(&s, 0, 9, 0.0, 0.0);
        assert!(matches!(featurize(&tr, &s), Err(Error::ConstantSeries)));
    }

    #[test]
    fn interval_outside_series_is_an_error() {
        let s = line_series(10, 1.0, 0.0);
        let mut tr = linear_trend(&s, 0, 9, 1.0, 0.0);
        tr.t_end = 99.0;
        assert!(featurize(&tr, &s).is_err());
    }

    #[test]
    fn deterministic_and_translation_invariant() {
        let s = line_series(30, 1.5, -2.0);
        let tr = linear_trend(&s, 5, 20, 1.0, 0.1);
        let f1 = featurize(&tr, &s).unwrap();
        let f2 = featurize(&tr, &s).unwrap();
        assert_eq!(f1, f2);

        // shift all timestamps by a constant
        let shifted = TimeSeries::new(
            "shifted",
            s.points.iter().map(|&(t, v)| (t + 1000.0, v)).collect(),
        )
        .unwrap();
        let tr2 = Trend { t_start: tr.t_start + 1000.0, t_end: tr.t_end + 1000.0, ..tr.clone() };
        let f3 = featurize(&tr2, &shifted).unwrap();
        assert_eq!(f1, f3);
    }
}
