//! Template-based rendering of ranked trends into short text summaries.

use serde::{Deserialize, Serialize};

use crate::detect::{detect_all, DetectionConfig};
use crate::error::{Error, Result};
use crate::infer::{rank_trends, UtilityModel};
use crate::series::TimeSeries;
use crate::trend::{Trend, TrendParams};

/// One pattern per trend kind. Slots in `{braces}` are substituted at
/// render time; unknown slots are left verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub linear: String,
    pub jump: String,
    pub cycle: String,
    pub anomaly: String,
    pub statistical: String,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet {
            linear: "a {slope_qual} {direction} trend from {start} to {end}".into(),
            jump: "a sudden {direction} of {delta} at {time}".into(),
            cycle: "a repeating cycle with a period of {period} from {start} to {end}".into(),
            anomaly: "an anomalous value at {time}".into(),
            statistical: "values averaging {mean} overall".into(),
        }
    }
}

impl TemplateSet {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(file)?)
    }
}

/// Threshold on |normalized slope| separating "gradually" from "sharply".
pub const SHARP_SLOPE: f64 = 0.5;

/// Format with two significant digits; integral values print as integers.
fn fmt2(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x == x.round() && x.abs() < 1e6 {
        return format!("{}", x as i64);
    }
    let digits = (1 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.digits$}")
}

/// Render one trend through its kind's template. Timestamps are raw series
/// time; magnitudes are in normalized units.
pub fn render_trend(trend: &Trend, templates: &TemplateSet) -> String {
    let mut slots: Vec<(&str, String)> = vec![
        ("start", fmt2(trend.t_start)),
        ("end", fmt2(trend.t_end)),
    ];
    let pattern = match &trend.params {
        TrendParams::Linear { slope, .. } => {
            slots.push(("direction", if *slope >= 0.0 { "increasing" } else { "decreasing" }.into()));
            slots.push((
                "slope_qual",
                if slope.abs() >= SHARP_SLOPE { "sharply" } else { "gradually" }.into(),
            ));
            &templates.linear
        }
        TrendParams::Jump { delta, t_at } => {
            slots.push(("direction", if *delta >= 0.0 { "rise" } else { "drop" }.into()));
            slots.push(("delta", fmt2(delta.abs())));
            slots.push(("time", fmt2(*t_at)));
            &templates.jump
        }
        TrendParams::Cycle { period, .. } => {
            slots.push(("period", fmt2(*period)));
            &templates.cycle
        }
        TrendParams::Anomaly { t_at, .. } => {
            slots.push(("time", fmt2(*t_at)));
            &templates.anomaly
        }
        TrendParams::Statistical { mean, .. } => {
            slots.push(("mean", fmt2(*mean)));
            &templates.statistical
        }
    };
    let mut out = pattern.clone();
    for (name, value) in slots {
        out = out.replace(&format!("{{{name}}}"), &value);
    }
    out
}

/// Detect trends, rank them under the utility model, and render the top k
/// in chronological order as one sentence-per-trend summary.
pub fn summarize(
    series: &TimeSeries,
    model: &UtilityModel,
    templates: &TemplateSet,
    cfg: &DetectionConfig,
    k: usize,
) -> Result<String> {
    if k == 0 {
        return Err(Error::InvalidConfig("summary length k must be positive".into()));
    }
    let set = detect_all(series, cfg)?;
    let ranked = rank_trends(model, &set)?;
    let mut chosen: Vec<usize> = ranked.ranking.iter().take(k).map(|r| r.0).collect();
    chosen.sort_by(|&a, &b| {
        let ta = &set.trends[a];
        let tb = &set.trends[b];
        ta.t_start
            .partial_cmp(&tb.t_start)
            .unwrap()
            .then(ta.t_end.partial_cmp(&tb.t_end).unwrap())
            .then(a.cmp(&b))
    });
    let sentences: Vec<String> =
        chosen.iter().map(|&i| render_trend(&set.trends[i], templates)).collect();
    Ok(format!("{}.", sentences.join(". ")))
}
