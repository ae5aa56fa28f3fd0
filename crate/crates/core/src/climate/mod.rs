//! Hourly per-bus climate: ingestion into a dense bus × hour matrix and the
//! wind-speed helpers built on it.

use std::collections::BTreeMap;
use std::fs::File;
use std::ops::Range;
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime, TimeZone, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::grid::{BusId, GridCase};

pub const STORE_FILE: &str = "climate.csv";
/// Longest run of missing hours that linear filling will bridge.
pub const MAX_FILL_HOURS: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum ClimateError {
    #[error("heights must lie above the displacement plane (z1 = {z1}, z2 = {z2}, d = {d})")]
    Domain { z1: f64, z2: f64, d: f64 },
    #[error("bus {bus}: {count} missing hour(s) starting {start}")]
    Gap {
        bus: BusId,
        start: DateTime<Utc>,
        count: usize,
    },
    #[error("bus {bus}: duplicate record at {at}")]
    Duplicate { bus: BusId, at: DateTime<Utc> },
    #[error("record {record}: {message}")]
    Invalid { record: u64, message: String },
    #[error("no climate for bus {0}")]
    MissingBus(BusId),
    #[error("{date}: the series does not cover all 24 hours")]
    MissingHours { date: NaiveDate },
    #[error("no climate records")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindProfileParams {
    /// m
    pub roughness_length: f64,
    /// m
    pub displacement: f64,
}

impl Default for WindProfileParams {
    fn default() -> Self {
        Self {
            roughness_length: 0.3,
            displacement: 6.0,
        }
    }
}

/// Height of the source wind field, m.
pub const SOURCE_WIND_HEIGHT: f64 = 10.0;

/// Scales a wind speed measured at `z1` to height `z2` with the log profile.
pub fn log_wind(u1: f64, z1: f64, z2: f64, params: WindProfileParams) -> Result<f64, ClimateError> {
    let d = params.displacement;
    // the log profile is only defined where (z - d) / z0 > 1
    if !(z1 - d > params.roughness_length && z2 - d > params.roughness_length) {
        return Err(ClimateError::Domain { z1, z2, d });
    }
    if z1 == z2 {
        return Ok(u1);
    }
    let z0 = params.roughness_length;
    Ok(u1 * ((z2 - d) / z0).ln() / ((z1 - d) / z0).ln())
}

/// One bus-hour of climate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClimateRecord {
    pub bus: BusId,
    pub timestamp: DateTime<Utc>,
    /// °C
    pub temp_2m: f64,
    /// W/m²
    pub shortwave: f64,
    /// W/m²
    pub longwave: f64,
    /// Zonal (eastward) component, m/s.
    pub wind_u: f64,
    /// Meridional (northward) component, m/s.
    pub wind_v: f64,
}

impl ClimateRecord {
    pub fn composite_wind(&self) -> f64 {
        composite_wind(self)
    }

    pub fn radiation(&self) -> f64 {
        self.shortwave + self.longwave
    }
}

pub fn composite_wind(record: &ClimateRecord) -> f64 {
    record.wind_u.hypot(record.wind_v)
}

/// Component of the wind perpendicular to a conductor at 45° to the flow.
pub fn perpendicular_wind(v_wind: f64) -> f64 {
    v_wind * std::f64::consts::FRAC_PI_4.sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyWorst {
    pub max_temp: f64,
    /// Largest hourly shortwave + longwave, W/m².
    pub max_radiation: f64,
    pub min_wind: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FillPolicy {
    /// Any gap is an error.
    #[default]
    Reject,
    /// Bridge interior gaps of up to three hours by linear interpolation.
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FillEvent {
    pub bus: BusId,
    pub start: DateTime<Utc>,
    pub hours: usize,
}

/// Dense climate over a contiguous horizon of whole hours.
#[derive(Debug, Clone, PartialEq)]
pub struct ClimateSeries {
    buses: Vec<BusId>,
    index: BTreeMap<BusId, usize>,
    start: DateTime<Utc>,
    hours: usize,
    /// bus-major
    data: Vec<ClimateRecord>,
}

fn on_hour(t: &DateTime<Utc>) -> bool {
    t.minute() == 0 && t.second() == 0 && t.nanosecond() == 0
}

pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(Utc.from_utc_datetime(&t));
        }
    }
    None
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    bus_id: BusId,
    timestamp_iso8601: String,
    temp2m_c: f64,
    shortwave_wm2: f64,
    longwave_wm2: f64,
    wind_u_ms: f64,
    wind_v_ms: f64,
}

fn lerp_record(a: &ClimateRecord, b: &ClimateRecord, t: f64, at: DateTime<Utc>) -> ClimateRecord {
    let l = |x: f64, y: f64| x + t * (y - x);
    ClimateRecord {
        bus: a.bus,
        timestamp: at,
        temp_2m: l(a.temp_2m, b.temp_2m),
        shortwave: l(a.shortwave, b.shortwave),
        longwave: l(a.longwave, b.longwave),
        wind_u: l(a.wind_u, b.wind_u),
        wind_v: l(a.wind_v, b.wind_v),
    }
}

impl ClimateSeries {
    /// Builds the dense matrix. The horizon runs from the earliest to the
    /// latest timestamp across all buses.
    pub fn from_records(
        records: Vec<ClimateRecord>,
        fill: FillPolicy,
    ) -> Result<(Self, Vec<FillEvent>), ClimateError> {
        if records.is_empty() {
            return Err(ClimateError::Empty);
        }
        for (i, r) in records.iter().enumerate() {
            let invalid = |message: String| ClimateError::Invalid {
                record: i as u64 + 1,
                message,
            };
            if !on_hour(&r.timestamp) {
                return Err(invalid(format!("timestamp {} is not on an hour boundary", r.timestamp)));
            }
            if !(r.shortwave >= 0.0 && r.longwave >= 0.0) {
                return Err(invalid("radiation must be non-negative".into()));
            }
            if ![r.temp_2m, r.wind_u, r.wind_v].iter().all(|v| v.is_finite()) {
                return Err(invalid("non-finite value".into()));
            }
        }
        let start = records.iter().map(|r| r.timestamp).min().expect("non-empty");
        let end = records.iter().map(|r| r.timestamp).max().expect("non-empty");
        let hours = ((end - start).num_hours() + 1) as usize;

        let mut by_bus: BTreeMap<BusId, Vec<Option<ClimateRecord>>> = BTreeMap::new();
        for r in records {
            let slot = by_bus.entry(r.bus).or_insert_with(|| vec![None; hours]);
            let h = (r.timestamp - start).num_hours() as usize;
            if slot[h].is_some() {
                return Err(ClimateError::Duplicate {
                    bus: r.bus,
                    at: r.timestamp,
                });
            }
            slot[h] = Some(r);
        }

        let mut events = Vec::new();
        let mut data = Vec::with_capacity(by_bus.len() * hours);
        for (&bus, slots) in &by_bus {
            let mut h = 0;
            while h < hours {
                if slots[h].is_some() {
                    data.push(slots[h].expect("checked"));
                    h += 1;
                    continue;
                }
                let gap_start = h;
                while h < hours && slots[h].is_none() {
                    h += 1;
                }
                let count = h - gap_start;
                let at = start + Duration::hours(gap_start as i64);
                let bridgeable = fill == FillPolicy::Linear && count <= MAX_FILL_HOURS && gap_start > 0 && h < hours;
                if !bridgeable {
                    return Err(ClimateError::Gap { bus, start: at, count });
                }
                let (a, b) = (slots[gap_start - 1].expect("interior"), slots[h].expect("interior"));
                for k in 0..count {
                    let t = (k + 1) as f64 / (count + 1) as f64;
                    data.push(lerp_record(&a, &b, t, at + Duration::hours(k as i64)));
                }
                log::info!("bus {bus}: filled {count} hour(s) from {}", format_timestamp(&at));
                events.push(FillEvent { bus, start: at, hours: count });
            }
        }
        let buses: Vec<BusId> = by_bus.keys().copied().collect();
        let index = buses.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        Ok((
            Self {
                buses,
                index,
                start,
                hours,
                data,
            },
            events,
        ))
    }

    pub fn read_csv(path: impl AsRef<Path>, fill: FillPolicy) -> Result<(Self, Vec<FillEvent>), ClimateError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let mut records = Vec::new();
        for (i, row) in reader.deserialize::<CsvRow>().enumerate() {
            let row = row?;
            let timestamp = parse_timestamp(&row.timestamp_iso8601).ok_or_else(|| ClimateError::Invalid {
                record: i as u64 + 1,
                message: format!("bad timestamp '{}'", row.timestamp_iso8601),
            })?;
            records.push(ClimateRecord {
                bus: row.bus_id,
                timestamp,
                temp_2m: row.temp2m_c,
                shortwave: row.shortwave_wm2,
                longwave: row.longwave_wm2,
                wind_u: row.wind_u_ms,
                wind_v: row.wind_v_ms,
            });
        }
        Self::from_records(records, fill)
    }

    /// Writes bus-major, time-sorted rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), ClimateError> {
        let mut w = csv::Writer::from_writer(File::create(path)?);
        for r in &self.data {
            w.serialize(CsvRow {
                bus_id: r.bus,
                timestamp_iso8601: format_timestamp(&r.timestamp),
                temp2m_c: r.temp_2m,
                shortwave_wm2: r.shortwave,
                longwave_wm2: r.longwave,
                wind_u_ms: r.wind_u,
                wind_v_ms: r.wind_v,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_store(&self, dir: impl AsRef<Path>) -> Result<(), ClimateError> {
        std::fs::create_dir_all(dir.as_ref())?;
        self.write_csv(dir.as_ref().join(STORE_FILE))
    }

    /// Reads a store directory, or a bare CSV file.
    pub fn load_store(path: impl AsRef<Path>) -> Result<Self, ClimateError> {
        let path = path.as_ref();
        let file = if path.is_dir() { path.join(STORE_FILE) } else { path.to_path_buf() };
        Ok(Self::read_csv(file, FillPolicy::Reject)?.0)
    }

    pub fn buses(&self) -> &[BusId] {
        &self.buses
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn hours(&self) -> usize {
        self.hours
    }

    pub fn timestamp(&self, hour: usize) -> DateTime<Utc> {
        self.start + Duration::hours(hour as i64)
    }

    pub fn hour_of(&self, t: DateTime<Utc>) -> Option<usize> {
        let h = (t - self.start).num_hours();
        (on_hour(&t) && h >= 0 && (h as usize) < self.hours).then_some(h as usize)
    }

    pub fn series(&self, bus: BusId) -> Option<&[ClimateRecord]> {
        let i = *self.index.get(&bus)?;
        Some(&self.data[i * self.hours..(i + 1) * self.hours])
    }

    pub fn get(&self, bus: BusId, hour: usize) -> Option<&ClimateRecord> {
        self.series(bus)?.get(hour)
    }

    /// Every case bus must have climate.
    pub fn check_covers(&self, case: &GridCase) -> Result<(), ClimateError> {
        match case.buses.iter().find(|b| !self.index.contains_key(&b.id)) {
            Some(b) => Err(ClimateError::MissingBus(b.id)),
            None => Ok(()),
        }
    }

    /// UTC days fully inside the horizon.
    pub fn days(&self) -> Vec<NaiveDate> {
        let mut out = Vec::new();
        let mut d = self.start.date_naive();
        let last = self.timestamp(self.hours - 1).date_naive();
        while d <= last {
            if self.day_hours(d).is_ok() {
                out.push(d);
            }
            d = d.succ_opt().expect("date in range");
        }
        out
    }

    /// Hour indices of a full UTC day.
    pub fn day_hours(&self, date: NaiveDate) -> Result<Range<usize>, ClimateError> {
        let midnight = Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).expect("valid time"));
        let h = (midnight - self.start).num_hours();
        if h < 0 || h as usize + 24 > self.hours {
            return Err(ClimateError::MissingHours { date });
        }
        Ok(h as usize..h as usize + 24)
    }

    /// Keeps only the hours in `range`.
    pub fn window(&self, range: Range<usize>) -> Self {
        let hours = range.len();
        let mut data = Vec::with_capacity(self.buses.len() * hours);
        for i in 0..self.buses.len() {
            data.extend_from_slice(&self.data[i * self.hours + range.start..i * self.hours + range.end]);
        }
        Self {
            buses: self.buses.clone(),
            index: self.index.clone(),
            start: self.timestamp(range.start),
            hours,
            data,
        }
    }
}

pub fn daily_worst_case(series: &ClimateSeries, bus: BusId, date: NaiveDate) -> Result<DailyWorst, ClimateError> {
    let hours = series.day_hours(date)?;
    let s = series.series(bus).ok_or(ClimateError::MissingBus(bus))?;
    Ok(worst_of(&s[hours]))
}

pub fn worst_of(records: &[ClimateRecord]) -> DailyWorst {
    records.iter().fold(
        DailyWorst {
            max_temp: f64::NEG_INFINITY,
            max_radiation: f64::NEG_INFINITY,
            min_wind: f64::INFINITY,
        },
        |acc, r| DailyWorst {
            max_temp: acc.max_temp.max(r.temp_2m),
            max_radiation: acc.max_radiation.max(r.radiation()),
            min_wind: acc.min_wind.min(r.composite_wind()),
        },
    )
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub fn record(bus: BusId, hour: i64, temp: f64, wind: (f64, f64)) -> ClimateRecord {
        let t0 = Utc.with_ymd_and_hms(2019, 7, 1, 0, 0, 0).unwrap();
        ClimateRecord {
            bus,
            timestamp: t0 + Duration::hours(hour),
            temp_2m: temp,
            shortwave: 500.0,
            longwave: 300.0,
            wind_u: wind.0,
            wind_v: wind.1,
        }
    }

    #[test]
    fn log_wind_hub_factor() {
        let p = WindProfileParams::default();
        let f = log_wind(1.0, 10.0, 80.0, p).unwrap();
        assert!((f - 2.126).abs() < 0.005, "{f}");
        assert_eq!(log_wind(7.3, 10.0, 10.0, p).unwrap(), 7.3);
        assert_eq!(log_wind(0.0, 10.0, 80.0, p).unwrap(), 0.0);
        assert!(matches!(log_wind(1.0, 5.0, 80.0, p), Err(ClimateError::Domain { .. })));
    }

    #[test]
    fn wind_components() {
        let mut r = record(1, 0, 20.0, (3.0, 4.0));
        assert_eq!(composite_wind(&r), 5.0);
        r.wind_u = -6.0;
        r.wind_v = 0.0;
        assert_eq!(composite_wind(&r), 6.0);
        assert!((perpendicular_wind(1.0) - 0.7071).abs() < 1e-4);
        assert!((perpendicular_wind(10.0) - 7.0710678).abs() < 1e-6);
        assert_eq!(perpendicular_wind(0.0), 0.0);
    }

    #[test]
    fn daily_extremes() {
        let winds = [5.0, 2.0, 8.0, 3.0];
        let recs: Vec<_> = (0..24)
            .map(|h| record(1, h, 10.0 + h as f64, (winds[h as usize % 4], 0.0)))
            .collect();
        let (s, _) = ClimateSeries::from_records(recs, FillPolicy::Reject).unwrap();
        let w = daily_worst_case(&s, 1, NaiveDate::from_ymd_opt(2019, 7, 1).unwrap()).unwrap();
        assert_eq!(w.max_temp, 33.0);
        assert_eq!(w.min_wind, 2.0);
        assert_eq!(w.max_radiation, 800.0);
        let next = NaiveDate::from_ymd_opt(2019, 7, 2).unwrap();
        assert!(matches!(daily_worst_case(&s, 1, next), Err(ClimateError::MissingHours { .. })));
    }

    #[test]
    fn gap_rejected_or_filled() {
        let recs: Vec<_> = (0..10).filter(|h| !(4..6).contains(h)).map(|h| record(7, h, h as f64, (1.0, 0.0))).collect();
        match ClimateSeries::from_records(recs.clone(), FillPolicy::Reject) {
            Err(ClimateError::Gap { bus: 7, count: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let (s, events) = ClimateSeries::from_records(recs, FillPolicy::Linear).unwrap();
        assert_eq!(events.len(), 1);
        assert!((s.get(7, 4).unwrap().temp_2m - 4.0).abs() < 1e-12);
        assert!((s.get(7, 5).unwrap().temp_2m - 5.0).abs() < 1e-12);
    }

    #[test]
    fn long_gap_not_filled() {
        let recs: Vec<_> = (0..10).filter(|h| !(2..6).contains(h)).map(|h| record(7, h, 0.0, (1.0, 0.0))).collect();
        assert!(matches!(
            ClimateSeries::from_records(recs, FillPolicy::Linear),
            Err(ClimateError::Gap { count: 4, .. })
        ));
    }

    #[test]
    fn bus_missing_whole_horizon_tail() {
        let mut recs: Vec<_> = (0..5).map(|h| record(1, h, 0.0, (1.0, 0.0))).collect();
        recs.extend((0..3).map(|h| record(2, h, 0.0, (1.0, 0.0))));
        assert!(matches!(
            ClimateSeries::from_records(recs, FillPolicy::Linear),
            Err(ClimateError::Gap { bus: 2, count: 2, .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let recs: Vec<_> = (0..48)
            .flat_map(|h| [record(2, h, 0.1 * h as f64, (1.5, -0.5)), record(1, h, 3.0, (0.0, 2.0))])
            .collect();
        let (s, _) = ClimateSeries::from_records(recs, FillPolicy::Reject).unwrap();
        s.save_store(dir.path()).unwrap();
        let back = ClimateSeries::load_store(dir.path()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.days().len(), 2);
        assert_eq!(back.buses(), &[1, 2]);
    }

    #[test]
    fn off_hour_timestamp_rejected() {
        let mut r = record(1, 0, 0.0, (0.0, 0.0));
        r.timestamp += Duration::minutes(30);
        assert!(matches!(
            ClimateSeries::from_records(vec![r], FillPolicy::Reject),
            Err(ClimateError::Invalid { .. })
        ));
        assert!(parse_timestamp("2019-01-03T05:00:00Z").is_some());
        assert!(parse_timestamp("2019-01-03 05:00").is_some());
    }

    proptest! {
        #[test]
        fn log_wind_linear_and_monotone(u in 0.0f64..40.0, z1 in 6.5f64..50.0, dz in 0.1f64..100.0, dz2 in 0.1f64..50.0) {
            let p = WindProfileParams::default();
            let a = log_wind(u, z1, z1 + dz, p).unwrap();
            let b = log_wind(2.0 * u, z1, z1 + dz, p).unwrap();
            prop_assert!((b - 2.0 * a).abs() <= 1e-12 * (1.0 + b.abs()));
            let higher = log_wind(u, z1, z1 + dz + dz2, p).unwrap();
            prop_assert!(higher >= a);
        }

        #[test]
        fn worst_case_bounds_each_hour(vals in prop::collection::vec((-20.0f64..45.0, 0.0f64..1000.0, -15.0f64..15.0, -15.0f64..15.0), 24)) {
            let recs: Vec<_> = vals.iter().enumerate().map(|(h, &(t, sw, u, v))| {
                let mut r = record(1, h as i64, t, (u, v));
                r.shortwave = sw;
                r
            }).collect();
            let (s, _) = ClimateSeries::from_records(recs.clone(), FillPolicy::Reject).unwrap();
            let w = daily_worst_case(&s, 1, NaiveDate::from_ymd_opt(2019, 7, 1).unwrap()).unwrap();
            for r in &recs {
                prop_assert!(w.max_temp >= r.temp_2m);
                prop_assert!(w.max_radiation >= r.radiation());
                prop_assert!(w.min_wind <= r.composite_wind());
            }
        }
    }
}
