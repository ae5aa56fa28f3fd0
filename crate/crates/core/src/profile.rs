//! Hourly series keyed by asset id over a common horizon.

use std::collections::BTreeMap;
use std::fs::File;
use std::ops::Range;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};

use crate::climate::{format_timestamp, parse_timestamp};

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("series for {key} has {got} values, expected {expected}")]
    Length { key: u32, got: usize, expected: usize },
    #[error("{0}: missing column")]
    MissingColumn(String),
    #[error("record {record}: {message}")]
    Invalid { record: u64, message: String },
    #[error("{key}: no value at {at}")]
    Gap { key: u32, at: String },
    #[error("no rows")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    pub start: DateTime<Utc>,
    pub hours: usize,
    pub series: BTreeMap<u32, Vec<f64>>,
}

impl ProfileSet {
    pub fn new(start: DateTime<Utc>, hours: usize) -> Self {
        Self {
            start,
            hours,
            series: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, key: u32, values: Vec<f64>) -> Result<(), ProfileError> {
        if values.len() != self.hours {
            return Err(ProfileError::Length {
                key,
                got: values.len(),
                expected: self.hours,
            });
        }
        self.series.insert(key, values);
        Ok(())
    }

    pub fn get(&self, key: u32) -> Option<&[f64]> {
        self.series.get(&key).map(Vec::as_slice)
    }

    pub fn timestamp(&self, hour: usize) -> DateTime<Utc> {
        self.start + Duration::hours(hour as i64)
    }

    pub fn hour_of(&self, t: DateTime<Utc>) -> Option<usize> {
        let h = (t - self.start).num_hours();
        (h >= 0 && (h as usize) < self.hours && self.timestamp(h as usize) == t).then_some(h as usize)
    }

    pub fn window(&self, range: Range<usize>) -> Self {
        Self {
            start: self.timestamp(range.start),
            hours: range.len(),
            series: self
                .series
                .iter()
                .map(|(&k, v)| (k, v[range.clone()].to_vec()))
                .collect(),
        }
    }

    /// Sum over keys per hour.
    pub fn totals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.hours];
        for v in self.series.values() {
            for (o, x) in out.iter_mut().zip(v) {
                *o += x;
            }
        }
        out
    }

    /// Long format: one `key,timestamp,value` row per key-hour.
    pub fn write_csv(&self, path: impl AsRef<Path>, key_col: &str, value_col: &str) -> Result<(), ProfileError> {
        let mut w = csv::Writer::from_writer(File::create(path)?);
        w.write_record([key_col, "timestamp", value_col])?;
        for (k, v) in &self.series {
            for (h, x) in v.iter().enumerate() {
                w.write_record([k.to_string(), format_timestamp(&self.timestamp(h)), x.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the long format back; every key must cover the full horizon.
    pub fn read_csv(path: impl AsRef<Path>, key_col: &str, value_col: &str) -> Result<Self, ProfileError> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let headers = r.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| ProfileError::MissingColumn(name.to_string()))
        };
        let (ki, ti, vi) = (col(key_col)?, col("timestamp")?, col(value_col)?);
        let mut rows: Vec<(u32, DateTime<Utc>, f64)> = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let invalid = |message: String| ProfileError::Invalid {
                record: i as u64 + 1,
                message,
            };
            let key = rec[ki].parse::<u32>().map_err(|e| invalid(format!("{key_col}: {e}")))?;
            let t = parse_timestamp(&rec[ti]).ok_or_else(|| invalid(format!("bad timestamp '{}'", &rec[ti])))?;
            let v = rec[vi].parse::<f64>().map_err(|e| invalid(format!("{value_col}: {e}")))?;
            if !v.is_finite() {
                return Err(invalid(format!("{value_col} is not finite")));
            }
            rows.push((key, t, v));
        }
        let start = rows.iter().map(|r| r.1).min().ok_or(ProfileError::Empty)?;
        let end = rows.iter().map(|r| r.1).max().ok_or(ProfileError::Empty)?;
        let hours = (end - start).num_hours() as usize + 1;
        let mut slots: BTreeMap<u32, Vec<Option<f64>>> = BTreeMap::new();
        for (key, t, v) in rows {
            let h = (t - start).num_hours() as usize;
            slots.entry(key).or_insert_with(|| vec![None; hours])[h] = Some(v);
        }
        let mut set = Self::new(start, hours);
        for (key, vals) in slots {
            let mut dense = Vec::with_capacity(hours);
            for (h, v) in vals.into_iter().enumerate() {
                dense.push(v.ok_or_else(|| ProfileError::Gap {
                    key,
                    at: format_timestamp(&set.timestamp(h)),
                })?);
            }
            set.series.insert(key, dense);
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn csv_round_trip_and_gap() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = ProfileSet::new(Utc.with_ymd_and_hms(2019, 1, 3, 0, 0, 0).unwrap(), 3);
        p.insert(4, vec![1.0, 2.5, 0.1]).unwrap();
        p.insert(2, vec![0.0, 1e-7, 3.0]).unwrap();
        assert!(p.insert(9, vec![1.0]).is_err());
        let path = dir.path().join("p.csv");
        p.write_csv(&path, "gen_id", "avail_mw").unwrap();
        let back = ProfileSet::read_csv(&path, "gen_id", "avail_mw").unwrap();
        assert_eq!(back, p);
        assert_eq!(back.totals(), vec![1.0, 2.5 + 1e-7, 3.1]);

        let text = std::fs::read_to_string(&path).unwrap();
        let holed: String = text.lines().filter(|l| !l.starts_with("2,2019-01-03T01")).map(|l| format!("{l}\n")).collect();
        std::fs::write(&path, holed).unwrap();
        assert!(matches!(ProfileSet::read_csv(&path, "gen_id", "avail_mw"), Err(ProfileError::Gap { key: 2, .. })));
    }
}
