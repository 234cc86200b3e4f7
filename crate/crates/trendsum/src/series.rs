//! Raw time series: ordered (timestamp, value) pairs with CSV I/O.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered sequence of (timestamp, value) points. Timestamps are abstract
/// reals, strictly increasing; values must be finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub id: String,
    pub points: Vec<(f64, f64)>,
}

impl TimeSeries {
    pub fn new(id: impl Into<String>, points: Vec<(f64, f64)>) -> Result<Self> {
        let series = TimeSeries { id: id.into(), points };
        series.validate()?;
        Ok(series)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 2 {
            return Err(Error::InvalidSeries("need at least 2 points".into()));
        }
        for &(t, v) in &self.points {
            if !t.is_finite() || !v.is_finite() {
                return Err(Error::InvalidSeries("non-finite point".into()));
            }
        }
        for pair in self.points.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::InvalidSeries(
                    "timestamps must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.points[0].0
    }

    pub fn t_end(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    pub fn time_span(&self) -> f64 {
        self.t_end() - self.t_start()
    }

    /// (min, max) over values.
    pub fn value_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(_, v) in &self.points {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Index of the global maximum value (first occurrence).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &(_, v)) in self.points.iter().enumerate() {
            if v > self.points[best].1 {
                best = i;
            }
        }
        best
    }

    /// Map a raw timestamp into [0, 1] over the series span.
    pub fn norm_time(&self, t: f64) -> f64 {
        (t - self.t_start()) / self.time_span()
    }

    /// Map a raw value into [0, 1] over the series value range.
    /// Errors on a constant series.
    pub fn norm_value(&self, v: f64) -> Result<f64> {
        let (lo, hi) = self.value_range();
        if hi - lo <= 0.0 {
            return Err(Error::ConstantSeries);
        }
        Ok((v - lo) / (hi - lo))
    }
}

/// Read a series from CSV with header `t,value`.
pub fn read_series_csv(path: &Path) -> Result<TimeSeries> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut points = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if lineno == 0 {
            if line.trim() != "t,value" {
                return Err(Error::CsvParse {
                    line: 1,
                    msg: format!("expected header `t,value`, got `{line}`"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let parse = |s: Option<&str>| -> Result<f64> {
            s.ok_or(Error::CsvParse {
                line: lineno + 1,
                msg: "missing field".into(),
            })?
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::CsvParse {
                line: lineno + 1,
                msg: e.to_string(),
            })
        };
        let t = parse(parts.next())?;
        let v = parse(parts.next())?;
        points.push((t, v));
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into());
    TimeSeries::new(id, points)
}

/// Write a series as CSV with header `t,value` and LF line endings.
pub fn write_series_csv(series: &TimeSeries, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(b"t,value\n")?;
    for &(t, v) in &series.points {
        writeln!(out, "{t},{v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_and_nonmonotone() {
        assert!(TimeSeries::new("a", vec![(0.0, 1.0)]).is_err());
        assert!(TimeSeries::new("a", vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(TimeSeries::new("a", vec![(1.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(TimeSeries::new("a", vec![(0.0, f64::NAN), (1.0, 2.0)]).is_err());
    }

    #[test]
    fn norm_value_errors_on_constant() {
        let s = TimeSeries::new("a", vec![(0.0, 3.0), (1.0, 3.0)]).unwrap();
        assert!(matches!(s.norm_value(3.0), Err(Error::ConstantSeries)));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = TimeSeries::new("s", vec![(0.0, 1.5), (1.0, 2.25), (2.5, -0.5)]).unwrap();
        write_series_csv(&s, &path).unwrap();
        let back = read_series_csv(&path).unwrap();
        assert_eq!(s.points, back.points);
    }

    #[test]
    fn csv_error_carries_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "t,value\n0,1\nnope,2\n").unwrap();
        match read_series_csv(&path) {
            Err(Error::CsvParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected CsvParse, got {other:?}"),
        }
    }
}
