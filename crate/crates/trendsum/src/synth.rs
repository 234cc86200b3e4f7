//! Seeded synthetic corpus: piecewise-linear series with inter-segment
//! discontinuities plus exact ground-truth trends and policy-derived labels.
//!
//! Reproducibility contract: all randomness comes from ChaCha8 streams.
//! The per-series seed is `mix(mix(master_seed) ^ STREAM_SERIES ^ index)`
//! where `mix` is the splitmix64 finalizer; the label-noise stream uses
//! `STREAM_LABELS` the same way. Identical (seed, config, scenario) inputs
//! therefore give bitwise-identical corpora and labels on any platform.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::detect::DetectionConfig;
use crate::error::{Error, Result};
use crate::features::{featurize, FeatureVector};
use crate::policy::Scenario;
use crate::series::TimeSeries;
use crate::trend::{sort_trends, Trend, TrendParams, TrendSet};

const STREAM_SERIES: u64 = 0x5345_5249_4553_0001;
const STREAM_LABELS: u64 = 0x4c41_4245_4c53_0002;

/// splitmix64 finalizer; the documented stable hash for seed derivation.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    mix64(mix64(master) ^ stream ^ index)
}

/// Generator configuration. Slopes are in normalized value per normalized
/// time; offsets and the noise sigma are fractions of the value range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_series: usize,
    pub points_per_series: (usize, usize),
    pub segments_per_series: (usize, usize),
    pub slope_range: (f64, f64),
    pub offset_range: (f64, f64),
    pub noise_sigma: f64,
    pub label_noise: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_series: 2000,
            points_per_series: (60, 200),
            segments_per_series: (2, 6),
            slope_range: (-2.5, 2.5),
            offset_range: (-0.5, 0.5),
            noise_sigma: 0.02,
            label_noise: 0.0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_series == 0 {
            return Err(Error::InvalidConfig("n_series must be positive".into()));
        }
        if self.points_per_series.0 < 8 || self.points_per_series.0 > self.points_per_series.1 {
            return Err(Error::InvalidConfig("points_per_series range invalid".into()));
        }
        if self.segments_per_series.0 == 0
            || self.segments_per_series.0 > self.segments_per_series.1
        {
            return Err(Error::InvalidConfig("segments_per_series range invalid".into()));
        }
        if self.slope_range.0 > self.slope_range.1 || self.offset_range.0 > self.offset_range.1 {
            return Err(Error::InvalidConfig("ranges must be ordered".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::InvalidConfig("noise_sigma must be >= 0".into()));
        }
        if !(0.0..=0.5).contains(&self.label_noise) {
            return Err(Error::InvalidConfig("label_noise must be in [0, 0.5]".into()));
        }
        Ok(())
    }
}

fn sample_range_f64(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.gen_range(range.0..range.1)
    }
}

fn sample_range_usize(rng: &mut ChaCha8Rng, range: (usize, usize)) -> usize {
    rng.gen_range(range.0..=range.1)
}

/// Segment slope draw. A zero-straddling range samples a right-skew-free but
/// heavy-tailed mixture — mostly gentle slopes, a band of moderate ones, and
/// occasional very steep bursts — mimicking the burstiness of measured
/// series. A one-sided range falls back to a plain uniform draw.
fn sample_slope(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    let (lo, hi) = range;
    if !(lo < 0.0 && 0.0 < hi) {
        return sample_range_f64(rng, range);
    }
    let scale = hi.max(-lo);
    let u: f64 = rng.gen_range(0.0..1.0);
    let magnitude = if u < 0.55 {
        rng.gen_range(0.0..0.1 * scale)
    } else if u < 0.85 {
        rng.gen_range(0.1 * scale..0.22 * scale)
    } else {
        rng.gen_range(0.5 * scale..scale)
    };
    if rng.gen_range(0.0..1.0) < 0.5 {
        magnitude
    } else {
        -magnitude
    }
}

/// Generate one series plus its exact ground-truth trend set.
///
/// The time span [0, n-1] is split into randomly sized segments (each at
/// least 4 points and ~6% of the span), each carrying a random linear trend;
/// adjacent segments are separated by a random value offset; Gaussian noise
/// is added on top. Ground truth holds one Linear trend per segment and a
/// Jump at every boundary whose normalized offset magnitude reaches the
/// default detection threshold.
pub fn generate_series(seed: u64, cfg: &GenConfig) -> Result<(TimeSeries, TrendSet)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sample_range_usize(&mut rng, cfg.points_per_series);
    let k = sample_range_usize(&mut rng, cfg.segments_per_series);

    // segment lengths: guaranteed minimum, remainder split by jittered
    // near-equal weights so durations within a series are comparable
    let min_len = 4.max((0.06 * n as f64).round() as usize);
    let k = k.min(n / min_len).max(1);
    let mut lens = vec![min_len; k];
    let spare = n - k * min_len;
    let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.55..1.45)).collect();
    let wsum: f64 = weights.iter().sum();
    let mut assigned = 0;
    for j in 0..k {
        let extra = ((spare as f64) * weights[j] / wsum).floor() as usize;
        lens[j] += extra;
        assigned += extra;
    }
    lens[k - 1] += spare - assigned;
    // nudge away exact length ties so duration comparisons are unambiguous
    'detie: for _ in 0..4 * k {
        for a in 0..k {
            for b in a + 1..k {
                if lens[a] == lens[b] {
                    if lens[b] > min_len {
                        lens[b] -= 1;
                        lens[a] += 1;
                    } else if let Some(m) = (0..k).filter(|&m| lens[m] > min_len).max_by_key(|&m| lens[m]) {
                        lens[m] -= 1;
                        lens[a] += 1;
                    }
                    continue 'detie;
                }
            }
        }
        break;
    }

    let slopes: Vec<f64> = (0..k).map(|_| sample_slope(&mut rng, cfg.slope_range)).collect();
    let offsets: Vec<f64> =
        (0..k).map(|_| sample_range_f64(&mut rng, cfg.offset_range)).collect();

    // piecewise lines in (tau, value) space; each segment anchored at the
    // previous segment's final value plus its offset
    let tau = |i: usize| i as f64 / (n - 1) as f64;
    let mut bounds = Vec::with_capacity(k); // (start, end) inclusive
    let mut start = 0usize;
    for &len in &lens {
        bounds.push((start, start + len - 1));
        start += len;
    }
    let v0 = rng.gen_range(0.0..1.0);
    let mut anchors = vec![0.0f64; k]; // line value at the segment's first point
    for j in 0..k {
        anchors[j] = if j == 0 {
            v0
        } else {
            let (ps, pe) = bounds[j - 1];
            anchors[j - 1] + slopes[j - 1] * (tau(pe) - tau(ps)) + offsets[j]
        };
    }

    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut points = Vec::with_capacity(n);
    for j in 0..k {
        let (s, e) = bounds[j];
        for i in s..=e {
            let clean = anchors[j] + slopes[j] * (tau(i) - tau(s));
            let v = clean + cfg.noise_sigma * noise.sample(&mut rng);
            points.push((i as f64, v));
        }
    }
    let series = TimeSeries::new(format!("s{seed:016x}"), points)?;

    // ground truth in the series' own normalized coordinates
    let (vmin, vmax) = series.value_range();
    let range = vmax - vmin;
    if range <= 0.0 {
        return Err(Error::ConstantSeries);
    }
    let jump_threshold = DetectionConfig::default().jump_threshold;

    let mut trends = Vec::new();
    for j in 0..k {
        let (s, e) = bounds[j];
        let slope_n = slopes[j] / range;
        let intercept_n = (anchors[j] - slopes[j] * tau(s) - vmin) / range;
        // fit quality of the true line against the noisy points
        let mut sse = 0.0;
        let mut sv = 0.0;
        let mut svv = 0.0;
        for i in s..=e {
            let nu = (series.points[i].1 - vmin) / range;
            let pred = intercept_n + slope_n * tau(i);
            sse += (nu - pred) * (nu - pred);
            sv += nu;
            svv += nu * nu;
        }
        let m = (e - s + 1) as f64;
        let svv_c = svv - sv * sv / m;
        let r_squared = if svv_c <= 0.0 { 1.0 } else { (1.0 - sse / svv_c).clamp(0.0, 1.0) };
        trends.push(Trend {
            t_start: s as f64,
            t_end: e as f64,
            idx_start: s,
            idx_end: e,
            params: TrendParams::Linear { slope: slope_n, intercept: intercept_n, r_squared },
        });
    }
    for j in 1..k {
        let delta = offsets[j] / range;
        if delta.abs() >= jump_threshold {
            // a short window around the discontinuity, not the whole pair of
            // segments, so a jump's duration reflects the transition itself
            let (rs, _) = bounds[j];
            let lo = rs - 2;
            let hi = (rs + 1).min(n - 1);
            trends.push(Trend {
                t_start: lo as f64,
                t_end: hi as f64,
                idx_start: lo,
                idx_end: hi,
                params: TrendParams::Jump { delta, t_at: rs as f64 },
            });
        }
    }
    sort_trends(&mut trends);

    let features = trends
        .iter()
        .map(|tr| featurize(tr, &series))
        .collect::<Result<Vec<_>>>()?;
    let set = TrendSet::new(series.id.clone(), trends, features)?;
    Ok((series, set))
}

/// Generate the full corpus; per-series seeds are derived from the master
/// seed so the result is order-independent.
pub fn generate_dataset(seed: u64, cfg: &GenConfig) -> Result<Vec<(TimeSeries, TrendSet)>> {
    cfg.validate()?;
    (0..cfg.n_series)
        .map(|i| {
            let (mut series, mut set) = generate_series(derive_seed(seed, STREAM_SERIES, i as u64), cfg)?;
            let id = format!("s{i:06}");
            series.id = id.clone();
            set.series_id = id;
            Ok((series, set))
        })
        .collect()
}

/// One training example: a target trend with its context and binary label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledExample {
    pub series_id: String,
    pub trend_index: usize,
    pub feature: FeatureVector,
    pub context: Vec<FeatureVector>,
    pub y: u8,
}

/// Label every trend with the scenario's ground-truth final policy (the
/// disjunction of its complex policies), optionally flipping each label with
/// probability `label_noise` using the master seed's label stream.
pub fn label_dataset(
    dataset: &[(TimeSeries, TrendSet)],
    scenario: &Scenario,
    label_noise: f64,
    master_seed: u64,
) -> Result<Vec<LabeledExample>> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master_seed, STREAM_LABELS, 0));
    let mut out = Vec::new();
    for (_, set) in dataset {
        for i in 0..set.len() {
            let mut y = scenario.ground_truth_label(i, set)? as u8;
            if label_noise > 0.0 && rng.gen_range(0.0..1.0) < label_noise {
                y ^= 1;
            }
            let context = set
                .features
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, f)| f.clone())
                .collect();
            out.push(LabeledExample {
                series_id: set.series_id.clone(),
                trend_index: i,
                feature: set.features[i].clone(),
                context,
                y,
            });
        }
    }
    Ok(out)
}

/// One line of the dataset file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub version: String,
    pub series_id: String,
    pub points: Vec<(f64, f64)>,
    pub ground_truth_trends: TrendSet,
    pub labels_by_scenario: BTreeMap<String, Vec<u8>>,
}

/// Write the corpus as JSON-lines, one record per series.
pub fn write_dataset_jsonl(
    path: &Path,
    dataset: &[(TimeSeries, TrendSet)],
    labels_by_scenario: &BTreeMap<String, Vec<Vec<u8>>>,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (i, (series, set)) in dataset.iter().enumerate() {
        let labels = labels_by_scenario
            .iter()
            .map(|(k, v)| (k.clone(), v[i].clone()))
            .collect();
        let record = DatasetRecord {
            version: "v1".into(),
            series_id: series.id.clone(),
            points: series.points.clone(),
            ground_truth_trends: set.clone(),
            labels_by_scenario: labels,
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_dataset_jsonl(path: &Path) -> Result<Vec<(TimeSeries, TrendSet)>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord = serde_json::from_str(&line)?;
        let series = TimeSeries::new(record.series_id, record.points)?;
        out.push((series, record.ground_truth_trends));
    }
    Ok(out)
}
