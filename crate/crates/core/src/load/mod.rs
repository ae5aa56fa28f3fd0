//! Splitting zonal load totals onto buses with fixed participation factors.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::climate::{format_timestamp, parse_timestamp};
use crate::grid::{BusId, GridCase};
use crate::profile::ProfileSet;

/// Allowed deviation of a zone's weights from summing to one.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("bus {bus} in zone {zone} has no participation factor")]
    UncoveredBus { bus: BusId, zone: String },
    #[error("weights of zone {zone} sum to {sum}")]
    WeightSum { zone: String, sum: f64 },
    #[error("bus {0} has a negative or non-finite weight")]
    BadWeight(BusId),
    #[error("zone {0} has no buses")]
    EmptyZone(String),
    #[error("no load series for zone {0}")]
    MissingZone(String),
    #[error("zone {zone}: {message}")]
    Series { zone: String, message: String },
    #[error("record {record}: {message}")]
    Parse { record: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZonalLoadSeries {
    pub start: DateTime<Utc>,
    pub hours: usize,
    pub zones: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ZonalRow {
    zone: String,
    timestamp: String,
    load_mw: f64,
}

impl ZonalLoadSeries {
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, LoadError> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let mut rows = Vec::new();
        for (i, row) in r.deserialize::<ZonalRow>().enumerate() {
            let row = row?;
            let parse = |message: String| LoadError::Parse {
                record: i as u64 + 1,
                message,
            };
            let t = parse_timestamp(&row.timestamp).ok_or_else(|| parse(format!("bad timestamp '{}'", row.timestamp)))?;
            if !(row.load_mw >= 0.0 && row.load_mw.is_finite()) {
                return Err(parse(format!("load {} must be a non-negative number", row.load_mw)));
            }
            rows.push((row.zone, t, row.load_mw));
        }
        let start = rows.iter().map(|r| r.1).min().ok_or(LoadError::Parse {
            record: 0,
            message: "no rows".into(),
        })?;
        let end = rows.iter().map(|r| r.1).max().expect("non-empty");
        let hours = (end - start).num_hours() as usize + 1;
        let mut slots: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
        for (zone, t, v) in rows {
            slots.entry(zone).or_insert_with(|| vec![None; hours])[(t - start).num_hours() as usize] = Some(v);
        }
        let mut zones = BTreeMap::new();
        for (zone, vals) in slots {
            let dense: Option<Vec<f64>> = vals.into_iter().collect();
            let dense = dense.ok_or_else(|| LoadError::Series {
                zone: zone.clone(),
                message: "missing hours".into(),
            })?;
            zones.insert(zone, dense);
        }
        Ok(Self { start, hours, zones })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), LoadError> {
        let mut w = csv::Writer::from_writer(File::create(path)?);
        for (zone, vals) in &self.zones {
            for (h, v) in vals.iter().enumerate() {
                w.serialize(ZonalRow {
                    zone: zone.clone(),
                    timestamp: format_timestamp(&(self.start + Duration::hours(h as i64))),
                    load_mw: *v,
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParticipationFactors {
    pub weights: BTreeMap<BusId, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FactorRow {
    bus_id: BusId,
    weight: f64,
}

impl ParticipationFactors {
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, LoadError> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let mut weights = BTreeMap::new();
        for row in r.deserialize::<FactorRow>() {
            let row = row?;
            weights.insert(row.bus_id, row.weight);
        }
        Ok(Self { weights })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), LoadError> {
        let mut w = csv::Writer::from_writer(File::create(path)?);
        for (&bus_id, &weight) in &self.weights {
            w.serialize(FactorRow { bus_id, weight })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Checks coverage and per-zone sums against the case's zones.
    pub fn validate(&self, case: &GridCase) -> Result<(), LoadError> {
        for (zone, buses) in zone_buses(case) {
            let mut sum = 0.0;
            for b in buses {
                let w = *self.weights.get(&b).ok_or_else(|| LoadError::UncoveredBus {
                    bus: b,
                    zone: zone.clone(),
                })?;
                if !(w >= 0.0 && w.is_finite()) {
                    return Err(LoadError::BadWeight(b));
                }
                sum += w;
            }
            if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(LoadError::WeightSum { zone, sum });
            }
        }
        Ok(())
    }
}

fn zone_buses(case: &GridCase) -> BTreeMap<String, Vec<BusId>> {
    let mut out: BTreeMap<String, Vec<BusId>> = BTreeMap::new();
    for b in &case.buses {
        out.entry(b.zone.clone()).or_default().push(b.id);
    }
    out
}

/// Equal weights within each zone.
pub fn uniform_factors(case: &GridCase) -> Result<ParticipationFactors, LoadError> {
    let mut weights = BTreeMap::new();
    for (zone, buses) in zone_buses(case) {
        if buses.is_empty() {
            return Err(LoadError::EmptyZone(zone));
        }
        let w = 1.0 / buses.len() as f64;
        for b in buses {
            weights.insert(b, w);
        }
    }
    Ok(ParticipationFactors { weights })
}

/// Nodal load per bus and hour: the bus weight times its zone's total.
pub fn disaggregate(
    case: &GridCase,
    zonal: &ZonalLoadSeries,
    factors: &ParticipationFactors,
) -> Result<ProfileSet, LoadError> {
    factors.validate(case)?;
    let mut set = ProfileSet::new(zonal.start, zonal.hours);
    for b in &case.buses {
        let series = zonal.zones.get(&b.zone).ok_or_else(|| LoadError::MissingZone(b.zone.clone()))?;
        let w = factors.weights[&b.id];
        set.insert(b.id, series.iter().map(|z| w * z).collect())
            .expect("zonal series length matches horizon");
    }
    Ok(set)
}
