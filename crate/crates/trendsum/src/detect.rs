//! Trend extraction: piecewise-linear segmentation, jump, cycle and anomaly
//! detection, plus the whole-series statistical aggregate.
//!
//! All fitting happens in normalized coordinates (time span and value range
//! both mapped to [0,1]) so one set of default thresholds works across
//! series of any scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::featurize;
use crate::series::TimeSeries;
use crate::trend::{sort_trends, Trend, TrendParams, TrendSet};

/// Detection thresholds. All values refer to normalized units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Upper bound on emitted linear segments; merging continues past the
    /// tolerance until the count drops to this bound.
    pub max_segments: usize,
    /// Merge acceptance bound, SSE per point of the merged fit.
    pub segment_merge_tolerance: f64,
    /// Minimum |discontinuity| between adjacent segments, as a fraction of
    /// the value range.
    pub jump_threshold: f64,
    /// Robust z-score bound for anomalous points.
    pub anomaly_z: f64,
    /// A cycle must fit at least this many full periods into the series.
    pub min_cycle_periods: usize,
    /// Minimum detrended autocorrelation peak for a cycle.
    pub cycle_autocorr_threshold: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            max_segments: 8,
            segment_merge_tolerance: 0.002,
            jump_threshold: 0.15,
            anomaly_z: 3.0,
            min_cycle_periods: 2,
            cycle_autocorr_threshold: 0.5,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_segments == 0 {
            return Err(Error::InvalidConfig("max_segments must be positive".into()));
        }
        if self.segment_merge_tolerance < 0.0 || self.jump_threshold < 0.0 {
            return Err(Error::InvalidConfig("tolerances must be >= 0".into()));
        }
        if self.anomaly_z <= 0.0 {
            return Err(Error::InvalidConfig("anomaly_z must be > 0".into()));
        }
        if self.min_cycle_periods == 0 {
            return Err(Error::InvalidConfig("min_cycle_periods must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.cycle_autocorr_threshold) || self.cycle_autocorr_threshold <= 0.0 {
            return Err(Error::InvalidConfig("cycle_autocorr_threshold must be in (0,1)".into()));
        }
        Ok(())
    }
}

/// Ordinary least-squares line fit.
///
/// r_squared is clamped to [0,1] and defined as 1 when the values have zero
/// variance. Errors when fewer than 2 points or all abscissae are equal.
pub fn fit_least_squares(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if points.len() < 2 {
        return Err(Error::SeriesTooShort);
    }
    let n = points.len() as f64;
    let (mut st, mut sv, mut stt, mut stv, mut svv) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(t, v) in points {
        st += t;
        sv += v;
        stt += t * t;
        stv += t * v;
        svv += v * v;
    }
    let stt_c = stt - st * st / n;
    if stt_c <= 0.0 {
        return Err(Error::DegenerateAbscissa);
    }
    let stv_c = stv - st * sv / n;
    let svv_c = svv - sv * sv / n;
    let slope = stv_c / stt_c;
    let intercept = (sv - slope * st) / n;
    let r_squared = if svv_c <= 0.0 {
        1.0
    } else {
        (stv_c * stv_c / (stt_c * svv_c)).clamp(0.0, 1.0)
    };
    Ok((slope, intercept, r_squared))
}

/// Normalized view of a series used by all detectors.
struct NormSeries {
    /// (tau, nu) pairs in [0,1] x [0,1].
    pts: Vec<(f64, f64)>,
}

fn normalize(series: &TimeSeries) -> Result<NormSeries> {
    let (vmin, vmax) = series.value_range();
    if vmax - vmin <= 0.0 {
        return Err(Error::ConstantSeries);
    }
    let pts = series
        .points
        .iter()
        .map(|&(t, v)| (series.norm_time(t), (v - vmin) / (vmax - vmin)))
        .collect();
    Ok(NormSeries { pts })
}

/// Prefix-sum accumulator for O(1) segment OLS cost queries.
struct Prefix {
    st: Vec<f64>,
    sv: Vec<f64>,
    stt: Vec<f64>,
    stv: Vec<f64>,
    svv: Vec<f64>,
}

impl Prefix {
    fn new(pts: &[(f64, f64)]) -> Self {
        let n = pts.len();
        let mut p = Prefix {
            st: vec![0.0; n + 1],
            sv: vec![0.0; n + 1],
            stt: vec![0.0; n + 1],
            stv: vec![0.0; n + 1],
            svv: vec![0.0; n + 1],
        };
        for (i, &(t, v)) in pts.iter().enumerate() {
            p.st[i + 1] = p.st[i] + t;
            p.sv[i + 1] = p.sv[i] + v;
            p.stt[i + 1] = p.stt[i] + t * t;
            p.stv[i + 1] = p.stv[i] + t * v;
            p.svv[i + 1] = p.svv[i] + v * v;
        }
        p
    }

    /// SSE of the OLS line over the inclusive index range.
    fn sse(&self, i0: usize, i1: usize) -> f64 {
        let n = (i1 - i0 + 1) as f64;
        let st = self.st[i1 + 1] - self.st[i0];
        let sv = self.sv[i1 + 1] - self.sv[i0];
        let stt = self.stt[i1 + 1] - self.stt[i0];
        let stv = self.stv[i1 + 1] - self.stv[i0];
        let svv = self.svv[i1 + 1] - self.svv[i0];
        let stt_c = stt - st * st / n;
        let stv_c = stv - st * sv / n;
        let svv_c = svv - sv * sv / n;
        if stt_c <= 0.0 {
            return svv_c.max(0.0);
        }
        (svv_c - stv_c * stv_c / stt_c).max(0.0)
    }
}

/// Bottom-up merge segmentation into least-squares linear trends.
///
/// Starts from pairs of adjacent points and repeatedly merges the adjacent
/// segment pair whose merged fit has the smallest SSE per point, until the
/// best merge exceeds `segment_merge_tolerance` and the segment count is
/// within `max_segments`. Returned trends are ordered by t_start and cover
/// the series with no overlap.
pub fn segment_piecewise_linear(series: &TimeSeries, cfg: &DetectionConfig) -> Result<Vec<Trend>> {
    series.validate()?;
    cfg.validate()?;
    if series.len() < 4 {
        return Err(Error::SeriesTooShort);
    }
    let norm = normalize(series)?;
    let prefix = Prefix::new(&norm.pts);
    let n = series.len();

    // initial segments: adjacent pairs; odd leftover joins the last segment
    let mut bounds: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i + 1 < n {
        bounds.push((i, i + 1));
        i += 2;
    }
    if i < n {
        bounds.last_mut().unwrap().1 = n - 1;
    }

    loop {
        if bounds.len() <= 1 {
            break;
        }
        let mut best_idx = 0;
        let mut best_cost = f64::INFINITY;
        for j in 0..bounds.len() - 1 {
            let (i0, _) = bounds[j];
            let (_, i1) = bounds[j + 1];
            let cost = prefix.sse(i0, i1) / (i1 - i0 + 1) as f64;
            if cost < best_cost {
                best_cost = cost;
                best_idx = j;
            }
        }
        if bounds.len() <= cfg.max_segments && best_cost > cfg.segment_merge_tolerance {
            break;
        }
        let (_, i1) = bounds[best_idx + 1];
        bounds[best_idx].1 = i1;
        bounds.remove(best_idx + 1);
    }

    let mut trends = Vec::with_capacity(bounds.len());
    for (i0, i1) in bounds {
        let (slope, intercept, r_squared) = fit_least_squares(&norm.pts[i0..=i1])?;
        trends.push(Trend {
            t_start: series.points[i0].0,
            t_end: series.points[i1].0,
            idx_start: i0,
            idx_end: i1,
            params: TrendParams::Linear { slope, intercept, r_squared },
        });
    }
    Ok(trends)
}

fn linear_params(trend: &Trend) -> (f64, f64) {
    match trend.params {
        TrendParams::Linear { slope, intercept, .. } => (slope, intercept),
        _ => unreachable!("segment trends are linear"),
    }
}

/// Discontinuous transitions between adjacent linear segments.
///
/// delta = fitted value of the right segment at its left endpoint minus the
/// fitted value of the left segment at its right endpoint, in normalized
/// value units. Emits a jump whenever |delta| >= jump_threshold.
pub fn detect_jumps(
    segments: &[Trend],
    series: &TimeSeries,
    cfg: &DetectionConfig,
) -> Result<Vec<Trend>> {
    let mut jumps = Vec::new();
    for pair in segments.windows(2) {
        let (left, right) = (&pair[0], &pair[1]);
        let (ls, li) = linear_params(left);
        let (rs, ri) = linear_params(right);
        let tau_l = series.norm_time(left.t_end);
        let tau_r = series.norm_time(right.t_start);
        let delta = (ri + rs * tau_r) - (li + ls * tau_l);
        if delta.abs() >= cfg.jump_threshold {
            // a short window around the discontinuity, not the whole pair of
            // segments, so a jump's duration reflects the transition itself
            let lo = right.idx_start.saturating_sub(2);
            let hi = (right.idx_start + 1).min(series.len() - 1);
            jumps.push(Trend {
                t_start: series.points[lo].0,
                t_end: series.points[hi].0,
                idx_start: lo,
                idx_end: hi,
                params: TrendParams::Jump { delta, t_at: right.t_start },
            });
        }
    }
    Ok(jumps)
}

/// Global cyclic pattern via detrended sample autocorrelation.
///
/// Returns at most one cycle spanning the whole series. Non-uniform sampling
/// (max gap > 3x median gap) yields an empty result, not an error.
pub fn detect_cycles(series: &TimeSeries, cfg: &DetectionConfig) -> Result<Vec<Trend>> {
    series.validate()?;
    cfg.validate()?;
    let n = series.len();
    if n < 8 {
        return Ok(Vec::new());
    }
    let mut gaps: Vec<f64> = series.points.windows(2).map(|w| w[1].0 - w[0].0).collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_gap = gaps[gaps.len() / 2];
    let max_gap = *gaps.last().unwrap();
    if max_gap > 3.0 * median_gap {
        return Ok(Vec::new());
    }

    let norm = normalize(series)?;
    let (slope, intercept, _) = fit_least_squares(&norm.pts)?;
    let residuals: Vec<f64> = norm
        .pts
        .iter()
        .map(|&(t, v)| v - (intercept + slope * t))
        .collect();
    let var: f64 = residuals.iter().map(|r| r * r).sum::<f64>() / n as f64;
    if var <= 0.0 {
        return Ok(Vec::new());
    }

    let max_lag = n / cfg.min_cycle_periods;
    let denom: f64 = residuals.iter().map(|r| r * r).sum();
    let mut best_lag = 0usize;
    let mut best_acf = f64::NEG_INFINITY;
    for lag in 2..=max_lag.min(n - 1) {
        let num: f64 = (0..n - lag).map(|i| residuals[i] * residuals[i + lag]).sum();
        let acf = num / denom;
        if acf > best_acf {
            best_acf = acf;
            best_lag = lag;
        }
    }
    if best_lag == 0 || best_acf < cfg.cycle_autocorr_threshold {
        return Ok(Vec::new());
    }

    let step = series.time_span() / (n - 1) as f64;
    let amplitude = (2.0f64).sqrt() * var.sqrt();
    Ok(vec![Trend {
        t_start: series.t_start(),
        t_end: series.t_end(),
        idx_start: 0,
        idx_end: n - 1,
        params: TrendParams::Cycle { period: best_lag as f64 * step, amplitude },
    }])
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Per-point anomalies against each segment's fitted line.
///
/// Robust z = residual / (1.4826 * median |residual| of the segment); a
/// segment with zero median absolute residual flags every point with a
/// nonzero residual.
pub fn detect_anomalies(
    series: &TimeSeries,
    segments: &[Trend],
    cfg: &DetectionConfig,
) -> Result<Vec<Trend>> {
    let norm = normalize(series)?;
    let mut anomalies = Vec::new();
    for seg in segments {
        let (slope, intercept) = linear_params(seg);
        let residuals: Vec<f64> = (seg.idx_start..=seg.idx_end)
            .map(|i| {
                let (t, v) = norm.pts[i];
                v - (intercept + slope * t)
            })
            .collect();
        let mut abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
        let mad = median(&mut abs);
        let scale = 1.4826 * mad;
        for (k, &r) in residuals.iter().enumerate() {
            let anomalous = if scale > 0.0 {
                (r / scale).abs() >= cfg.anomaly_z
            } else {
                r != 0.0
            };
            if anomalous {
                let i = seg.idx_start + k;
                anomalies.push(Trend {
                    t_start: seg.t_start,
                    t_end: seg.t_end,
                    idx_start: seg.idx_start,
                    idx_end: seg.idx_end,
                    params: TrendParams::Anomaly { deviation: r, t_at: series.points[i].0 },
                });
            }
        }
    }
    Ok(anomalies)
}

/// Whole-series statistical aggregate (raw mean and population std).
pub fn statistical_trend(series: &TimeSeries) -> Trend {
    let n = series.len() as f64;
    let mean = series.points.iter().map(|&(_, v)| v).sum::<f64>() / n;
    let var = series.points.iter().map(|&(_, v)| (v - mean) * (v - mean)).sum::<f64>() / n;
    Trend {
        t_start: series.t_start(),
        t_end: series.t_end(),
        idx_start: 0,
        idx_end: series.len() - 1,
        params: TrendParams::Statistical { mean, std: var.sqrt() },
    }
}

/// Run every detector and assemble the featurized trend set.
///
/// Ordering is deterministic: by t_start, then kind enum order, then t_end.
pub fn detect_all(series: &TimeSeries, cfg: &DetectionConfig) -> Result<TrendSet> {
    let segments = segment_piecewise_linear(series, cfg)?;
    let jumps = detect_jumps(&segments, series, cfg)?;
    let cycles = detect_cycles(series, cfg)?;
    let anomalies = detect_anomalies(series, &segments, cfg)?;

    let mut trends = segments;
    trends.extend(jumps);
    trends.extend(cycles);
    trends.extend(anomalies);
    trends.push(statistical_trend(series));
    sort_trends(&mut trends);

    let features = trends
        .iter()
        .map(|tr| featurize(tr, series))
        .collect::<Result<Vec<_>>>()?;
    TrendSet::new(series.id.clone(), trends, features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trend::TrendKind;

    fn series_of(values: &[f64]) -> TimeSeries {
        TimeSeries::new(
            "t",
            values.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn least_squares_hand_cases() {
        let (s, b, r2) = fit_least_squares(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        assert!((s - 1.0).abs() < 1e-12 && b.abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);

        // constant values: zero-variance convention gives r^2 = 1
        let (s, b, r2) = fit_least_squares(&[(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)]).unwrap();
        assert!(s.abs() < 1e-12 && (b - 1.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);

        // normal equations by hand
        let (s, b, _) = fit_least_squares(&[(0.0, 0.0), (1.0, 2.0), (2.0, 1.0)]).unwrap();
        assert!((s - 0.5).abs() < 1e-12 && (b - 0.5).abs() < 1e-12);

        assert!(matches!(
            fit_least_squares(&[(1.0, 0.0), (1.0, 2.0)]),
            Err(Error::DegenerateAbscissa)
        ));
    }

    #[test]
    fn perfect_line_is_one_segment() {
        let s = series_of(&(0..50).map(|i| 2.0 * i as f64 + 1.0).collect::<Vec<_>>());
        let segs = segment_piecewise_linear(&s, &DetectionConfig::default()).unwrap();
        assert_eq!(segs.len(), 1);
        match segs[0].params {
            TrendParams::Linear { slope, r_squared, .. } => {
                assert!(slope > 0.0);
                assert!((r_squared - 1.0).abs() < 1e-9);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn v_shape_is_two_segments_no_jumps() {
        let mut vals: Vec<f64> = (0..30).map(|i| i as f64).collect();
        vals.extend((0..30).map(|i| 29.0 - i as f64));
        let s = series_of(&vals);
        let cfg = DetectionConfig::default();
        let segs = segment_piecewise_linear(&s, &cfg).unwrap();
        assert_eq!(segs.len(), 2);
        let slopes: Vec<f64> = segs.iter().map(|t| linear_params(t).0).collect();
        assert!(slopes[0] > 0.0 && slopes[1] < 0.0);
        assert!(detect_jumps(&segs, &s, &cfg).unwrap().is_empty());
    }

    #[test]
    fn step_series_yields_one_jump() {
        let mut vals = vec![0.0; 30];
        vals.extend(vec![1.0; 30]);
        // tiny slope so the abscissa is never degenerate for the fit
        for (i, v) in vals.iter_mut().enumerate() {
            *v += 1e-4 * i as f64;
        }
        let s = series_of(&vals);
        let cfg = DetectionConfig::default();
        let segs = segment_piecewise_linear(&s, &cfg).unwrap();
        let jumps = detect_jumps(&segs, &s, &cfg).unwrap();
        assert_eq!(jumps.len(), 1);
        match jumps[0].params {
            TrendParams::Jump { delta, t_at } => {
                assert!((delta - 1.0).abs() < 0.05, "delta = {delta}");
                assert!((t_at - 30.0).abs() <= 1.0);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn sinusoid_cycle_period_within_ten_percent() {
        let n = 200;
        let periods = 10.0;
        let vals: Vec<f64> = (0..n)
            .map(|i| (i as f64 / n as f64 * periods * std::f64::consts::TAU).sin())
            .collect();
        let s = series_of(&vals);
        let cycles = detect_cycles(&s, &DetectionConfig::default()).unwrap();
        assert_eq!(cycles.len(), 1);
        match cycles[0].params {
            TrendParams::Cycle { period, .. } => {
                let truth = (n as f64 - 1.0) / periods;
                assert!((period - truth).abs() / truth < 0.10, "period = {period}");
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn monotone_line_has_no_cycle() {
        let s = series_of(&(0..100).map(|i| i as f64).collect::<Vec<_>>());
        assert!(detect_cycles(&s, &DetectionConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn seeded_white_noise_has_no_cycle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let vals: Vec<f64> = (0..200).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = series_of(&vals);
        assert!(detect_cycles(&s, &DetectionConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn displaced_point_is_the_only_anomaly() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let noise_scale = 0.5;
        let mut vals: Vec<f64> = (0..60)
            .map(|i| i as f64 + rng.gen_range(-noise_scale..noise_scale))
            .collect();
        vals[25] += 10.0 * noise_scale;
        let s = series_of(&vals);
        let cfg = DetectionConfig::default();
        let segs = segment_piecewise_linear(&s, &cfg).unwrap();
        let anomalies = detect_anomalies(&s, &segs, &cfg).unwrap();
        assert_eq!(anomalies.len(), 1);
        match anomalies[0].params {
            TrendParams::Anomaly { t_at, .. } => assert_eq!(t_at, 25.0),
            _ => unreachable!(),
        }
    }

    #[test]
    fn noise_free_line_has_no_anomalies() {
        let s = series_of(&(0..40).map(|i| 3.0 * i as f64).collect::<Vec<_>>());
        let cfg = DetectionConfig::default();
        let segs = segment_piecewise_linear(&s, &cfg).unwrap();
        assert!(detect_anomalies(&s, &segs, &cfg).unwrap().is_empty());
    }

    #[test]
    fn segmentation_covers_series_disjointly() {
        let mut vals: Vec<f64> = (0..41).map(|i| 0.3 * i as f64).collect();
        vals.extend((0..40).map(|i| 12.0 - 0.9 * i as f64));
        vals.extend((0..20).map(|i| -24.0 + 2.0 * i as f64));
        let s = series_of(&vals);
        let segs = segment_piecewise_linear(&s, &DetectionConfig::default()).unwrap();
        assert_eq!(segs[0].idx_start, 0);
        assert_eq!(segs.last().unwrap().idx_end, s.len() - 1);
        for w in segs.windows(2) {
            assert_eq!(w[0].idx_end + 1, w[1].idx_start);
        }
    }

    #[test]
    fn detect_all_orders_and_errors() {
        let mut vals = vec![0.0; 30];
        vals.extend(vec![1.0; 30]);
        for (i, v) in vals.iter_mut().enumerate() {
            *v += 1e-4 * i as f64;
        }
        let s = series_of(&vals);
        let set = detect_all(&s, &DetectionConfig::default()).unwrap();
        assert!(set.trends.iter().any(|t| t.kind() == TrendKind::Jump));
        assert!(set.trends.iter().any(|t| t.kind() == TrendKind::Statistical));
        for w in set.trends.windows(2) {
            assert!(w[0].t_start <= w[1].t_start);
        }
        assert_eq!(set.trends.len(), set.features.len());

        let constant = series_of(&vec![5.0; 20]);
        assert!(detect_all(&constant, &DetectionConfig::default()).is_err());
    }

    #[test]
    fn raising_thresholds_never_detects_more() {
        let mut vals = vec![0.0; 30];
        vals.extend(vec![0.2; 30]);
        vals.extend(vec![1.0; 30]);
        for (i, v) in vals.iter_mut().enumerate() {
            *v += 1e-4 * i as f64;
        }
        let s = series_of(&vals);
        let mut prev = usize::MAX;
        for thr in [0.05, 0.15, 0.3, 0.9] {
            let cfg = DetectionConfig { jump_threshold: thr, ..Default::default() };
            let segs = segment_piecewise_linear(&s, &cfg).unwrap();
            let n = detect_jumps(&segs, &s, &cfg).unwrap().len();
            assert!(n <= prev);
            prev = n;
        }
    }
}
