//! Steady-state conductor ampacity from the heat balance, and daily or hourly
//! line ratings built from climate.

mod catalog;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::climate::{format_timestamp, log_wind, parse_timestamp, perpendicular_wind, ClimateSeries, WindProfileParams, SOURCE_WIND_HEIGHT};
use crate::grid::{GridCase, Line, LineId};
use crate::profile::ProfileSet;
use crate::reduction::{bearing, GeoPoint};

pub use catalog::{default_catalog, read_catalog, ConductorCatalog};

#[derive(Debug, thiserror::Error)]
pub enum RatingError {
    #[error("conductor {name}: {message}")]
    InvalidConductor { name: String, message: String },
    #[error("line {line}: unknown conductor '{conductor}'")]
    UnknownConductor { line: LineId, conductor: String },
    #[error("no climate for bus {0}")]
    MissingClimate(u32),
    #[error("climate covers no complete day")]
    NoFullDay,
    #[error("unknown rating mode '{0}'")]
    UnknownMode(String),
    #[error("record {record}: {message}")]
    Parse { record: u64, message: String },
    #[error(transparent)]
    Climate(#[from] crate::climate::ClimateError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductorSpec {
    pub name: String,
    /// m
    pub diameter: f64,
    /// Projected area per unit length, m²/m.
    pub area: f64,
    /// Ω/m at `t_low`.
    pub r_low: f64,
    pub t_low: f64,
    /// Ω/m at `t_high`.
    pub r_high: f64,
    pub t_high: f64,
    pub emissivity: f64,
    pub absorptivity: f64,
    /// Maximum allowed conductor temperature, °C.
    pub max_temp: f64,
}

impl ConductorSpec {
    pub fn validate(&self) -> Result<(), RatingError> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        let ok = self.diameter > 0.0
            && self.area > 0.0
            && self.r_low > 0.0
            && self.r_high > self.r_low
            && self.t_high > self.t_low
            && unit(self.emissivity)
            && unit(self.absorptivity);
        if ok {
            Ok(())
        } else {
            Err(RatingError::InvalidConductor {
                name: self.name.clone(),
                message: "needs positive size, r_high > r_low > 0, t_high > t_low and unit-interval optics".into(),
            })
        }
    }
}

/// Resistance by linear interpolation between the two reference points.
pub fn resistance(spec: &ConductorSpec, t: f64) -> f64 {
    spec.r_low + (spec.r_high - spec.r_low) * (t - spec.t_low) / (spec.t_high - spec.t_low)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirProperties {
    /// kg/(m·s)
    pub viscosity: f64,
    /// W/(m·°C)
    pub conductivity: f64,
    /// kg/m³
    pub density: f64,
    /// °C
    pub film_temp: f64,
}

/// Air density at elevation `elevation` (m) and film temperature `t_film` (°C).
pub fn air_density(elevation: f64, t_film: f64) -> f64 {
    (1.293 - 1.525e-4 * elevation + 6.379e-9 * elevation * elevation) / (1.0 + 0.00367 * t_film)
}

impl Default for AirProperties {
    fn default() -> Self {
        let film_temp = 70.0;
        Self {
            viscosity: 2.04e-5,
            conductivity: 0.0295,
            density: air_density(SolarGeometry::default().elevation, film_temp),
            film_temp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolarGeometry {
    /// Sun altitude, degrees.
    pub sun_altitude: f64,
    /// Sun azimuth, degrees.
    pub sun_azimuth: f64,
    /// Line azimuth, degrees.
    pub line_azimuth: f64,
    /// Conductor elevation above sea level, m.
    pub elevation: f64,
}

impl Default for SolarGeometry {
    fn default() -> Self {
        Self {
            sun_altitude: 30.5,
            sun_azimuth: 180.0,
            line_azimuth: 90.0,
            elevation: 520.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbientConditions {
    /// °C
    pub t_ambient: f64,
    /// Wind speed perpendicular to the conductor, m/s.
    pub wind_perp: f64,
    pub q_short: f64,
    pub q_long: f64,
    /// Angle between wind and conductor axis, degrees.
    pub wind_angle: f64,
}

/// Wind direction factor.
pub fn k_angle(phi_deg: f64) -> f64 {
    let phi = phi_deg.to_radians();
    1.194 - phi.cos() + 0.194 * (2.0 * phi).cos() + 0.368 * (2.0 * phi).sin()
}

/// Convective loss, W/m: the larger of the two forced-convection
/// correlations and natural convection.
pub fn convective_loss(spec: &ConductorSpec, air: &AirProperties, v_w: f64, phi: f64, t_s: f64, t_a: f64) -> f64 {
    let dt = t_s - t_a;
    if dt <= 0.0 {
        return 0.0;
    }
    let n_re = spec.diameter * air.density * v_w / air.viscosity;
    let k = k_angle(phi);
    let q_c1 = k * (1.01 + 1.35 * n_re.powf(0.52)) * air.conductivity * dt;
    let q_c2 = k * 0.754 * n_re.powf(0.6) * air.conductivity * dt;
    let q_cn = 3.645 * air.density.sqrt() * spec.diameter.powf(0.75) * dt.powf(1.25);
    q_c1.max(q_c2).max(q_cn)
}

/// Radiated loss, W/m.
pub fn radiated_loss(spec: &ConductorSpec, t_s: f64, t_a: f64) -> f64 {
    let k = |t: f64| ((t + 273.0) / 100.0).powi(4);
    17.8 * spec.diameter * spec.emissivity * (k(t_s) - k(t_a))
}

/// Elevation correction of solar heat intensity.
pub fn k_solar(elevation: f64) -> f64 {
    1.0 + 1.148e-4 * elevation - 1.108e-8 * elevation * elevation
}

/// Clear-atmosphere sea-level heat flux for a sun altitude in degrees, W/m².
/// Used only when no measured radiation is available.
pub fn clear_sky_flux(sun_altitude: f64) -> f64 {
    const C: [f64; 7] = [
        -42.2391,
        63.8044,
        -1.9220,
        3.46921e-2,
        -3.61118e-4,
        1.94318e-6,
        -4.07608e-9,
    ];
    C.iter().rev().fold(0.0, |acc, c| acc * sun_altitude + c).max(0.0)
}

/// Effective angle of incidence of the sun's rays, radians.
pub fn incidence(geom: &SolarGeometry) -> f64 {
    let hc = geom.sun_altitude.to_radians();
    let dz = (geom.sun_azimuth - geom.line_azimuth).to_radians();
    (hc.cos() * dz.cos()).clamp(-1.0, 1.0).acos()
}

/// Solar heat gain, W/m, from measured shortwave plus longwave radiation.
pub fn solar_gain(spec: &ConductorSpec, geom: &SolarGeometry, ambient: &AmbientConditions) -> f64 {
    let q_se = k_solar(geom.elevation) * (ambient.q_short + ambient.q_long);
    spec.absorptivity * q_se * incidence(geom).sin() * spec.area
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ampacity {
    /// A
    pub current: f64,
    pub q_c: f64,
    pub q_r: f64,
    pub q_s: f64,
    /// Solar gain meets or exceeds the losses; no positive rating exists.
    pub degenerate: bool,
}

/// Current at which the conductor settles at its maximum temperature.
pub fn ampacity(spec: &ConductorSpec, air: &AirProperties, geom: &SolarGeometry, ambient: &AmbientConditions) -> Ampacity {
    let t_s = spec.max_temp;
    let q_c = convective_loss(spec, air, ambient.wind_perp, ambient.wind_angle, t_s, ambient.t_ambient);
    let q_r = radiated_loss(spec, t_s, ambient.t_ambient);
    let q_s = solar_gain(spec, geom, ambient);
    let net = q_c + q_r - q_s;
    if net <= 0.0 {
        log::warn!("conductor {}: solar gain {q_s:.3} W/m meets losses {:.3} W/m", spec.name, q_c + q_r);
        return Ampacity {
            current: 0.0,
            q_c,
            q_r,
            q_s,
            degenerate: true,
        };
    }
    Ampacity {
        current: (net / resistance(spec, t_s)).sqrt(),
        q_c,
        q_r,
        q_s,
        degenerate: false,
    }
}

/// Three-phase MVA at the line's voltage.
pub fn thermal_rating(line: &Line, current: f64) -> f64 {
    3f64.sqrt() * line.voltage_kv * current / 1000.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatingMode {
    Daily,
    Hourly,
}

impl fmt::Display for RatingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RatingMode::Daily => "daily",
            RatingMode::Hourly => "hourly",
        })
    }
}

impl FromStr for RatingMode {
    type Err = RatingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "daily" => Ok(RatingMode::Daily),
            "hourly" => Ok(RatingMode::Hourly),
            _ => Err(RatingError::UnknownMode(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatingOptions {
    pub air: AirProperties,
    /// Line azimuth is taken from the endpoint buses; the field here is ignored.
    pub geometry: SolarGeometry,
    /// Conductor height above ground, m.
    pub conductor_height: f64,
    /// Angle between wind and conductor, degrees.
    pub wind_angle: f64,
    pub wind_profile: WindProfileParams,
    pub source_height: f64,
}

impl Default for RatingOptions {
    fn default() -> Self {
        Self {
            air: AirProperties::default(),
            geometry: SolarGeometry::default(),
            conductor_height: 30.0,
            wind_angle: 45.0,
            wind_profile: WindProfileParams::default(),
            source_height: SOURCE_WIND_HEIGHT,
        }
    }
}

/// A line's weather for one hour: endpoint-bus averages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineWeather {
    pub temp: f64,
    pub shortwave: f64,
    pub longwave: f64,
    /// Composite wind at the climate source height, m/s.
    pub wind: f64,
}

impl LineWeather {
    pub fn radiation(&self) -> f64 {
        self.shortwave + self.longwave
    }
}

/// Hourly line weather over the whole climate horizon.
pub fn line_weather(line: &Line, climate: &ClimateSeries) -> Result<Vec<LineWeather>, RatingError> {
    let a = climate.series(line.from_bus).ok_or(RatingError::MissingClimate(line.from_bus))?;
    let b = climate.series(line.to_bus).ok_or(RatingError::MissingClimate(line.to_bus))?;
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| LineWeather {
            temp: 0.5 * (x.temp_2m + y.temp_2m),
            shortwave: 0.5 * (x.shortwave + y.shortwave),
            longwave: 0.5 * (x.longwave + y.longwave),
            wind: 0.5 * (x.composite_wind() + y.composite_wind()),
        })
        .collect())
}

/// Componentwise worst case: hottest, brightest, calmest.
pub fn worst_weather(hours: &[LineWeather]) -> LineWeather {
    let hottest = hours.iter().map(|w| w.temp).fold(f64::NEG_INFINITY, f64::max);
    let brightest = hours
        .iter()
        .max_by(|p, q| p.radiation().total_cmp(&q.radiation()))
        .expect("at least one hour");
    let calmest = hours.iter().map(|w| w.wind).fold(f64::INFINITY, f64::min);
    LineWeather {
        temp: hottest,
        shortwave: brightest.shortwave,
        longwave: brightest.longwave,
        wind: calmest,
    }
}

/// Line rating, MVA, under given line weather.
pub fn rate_line(
    line: &Line,
    conductor: &ConductorSpec,
    azimuth: f64,
    weather: &LineWeather,
    opts: &RatingOptions,
) -> Result<f64, RatingError> {
    let v_line = log_wind(weather.wind, opts.source_height, opts.conductor_height, opts.wind_profile)?;
    let ambient = AmbientConditions {
        t_ambient: weather.temp,
        wind_perp: perpendicular_wind(v_line),
        q_short: weather.shortwave,
        q_long: weather.longwave,
        wind_angle: opts.wind_angle,
    };
    let geom = SolarGeometry {
        line_azimuth: azimuth,
        ..opts.geometry
    };
    Ok(thermal_rating(line, ampacity(conductor, &opts.air, &geom, &ambient).current))
}

/// Ratings per line per period (day or hour), periods contiguous from `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineRatings {
    pub mode: RatingMode,
    pub start: DateTime<Utc>,
    pub periods: usize,
    pub values: BTreeMap<LineId, Vec<f64>>,
}

impl LineRatings {
    fn period_hours(&self) -> i64 {
        match self.mode {
            RatingMode::Daily => 24,
            RatingMode::Hourly => 1,
        }
    }

    pub fn period_start(&self, i: usize) -> DateTime<Utc> {
        self.start + Duration::hours(self.period_hours() * i as i64)
    }

    fn period_label(&self, i: usize) -> String {
        match self.mode {
            RatingMode::Daily => self.period_start(i).date_naive().format("%Y-%m-%d").to_string(),
            RatingMode::Hourly => format_timestamp(&self.period_start(i)),
        }
    }

    /// Hourly limits over `hours` hours from `start`; daily values repeat
    /// across their day.
    pub fn hourly(&self, start: DateTime<Utc>, hours: usize) -> Option<ProfileSet> {
        let mut set = ProfileSet::new(start, hours);
        for (&id, vals) in &self.values {
            let mut out = Vec::with_capacity(hours);
            for h in 0..hours {
                let t = start + Duration::hours(h as i64);
                let i = (t - self.start).num_hours().div_euclid(self.period_hours());
                if i < 0 || i as usize >= self.periods {
                    return None;
                }
                out.push(vals[i as usize]);
            }
            set.insert(id, out).expect("length matches");
        }
        Some(set)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), RatingError> {
        let mut w = csv::Writer::from_writer(File::create(path)?);
        w.write_record(["line_id", "period", "rating_mva"])?;
        for (id, vals) in &self.values {
            for (i, v) in vals.iter().enumerate() {
                w.write_record([id.to_string(), self.period_label(i), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, RatingError> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let mut rows = Vec::new();
        let mut mode = None;
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |message: String| RatingError::Parse {
                record: i as u64 + 1,
                message,
            };
            if rec.len() < 3 {
                return Err(parse("expected line_id,period,rating_mva".into()));
            }
            let id: LineId = rec[0].parse().map_err(|e| parse(format!("line_id: {e}")))?;
            let (m, t) = match NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d") {
                Ok(d) => (RatingMode::Daily, Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).expect("midnight"))),
                Err(_) => (
                    RatingMode::Hourly,
                    parse_timestamp(&rec[1]).ok_or_else(|| parse(format!("bad period '{}'", &rec[1])))?,
                ),
            };
            if *mode.get_or_insert(m) != m {
                return Err(parse("mixed daily and hourly periods".into()));
            }
            let v: f64 = rec[2].parse().map_err(|e| parse(format!("rating_mva: {e}")))?;
            rows.push((id, t, v));
        }
        let mode = mode.ok_or(RatingError::Parse {
            record: 0,
            message: "no rows".into(),
        })?;
        let start = rows.iter().map(|r| r.1).min().expect("non-empty");
        let end = rows.iter().map(|r| r.1).max().expect("non-empty");
        let step = if mode == RatingMode::Daily { 24 } else { 1 };
        let periods = ((end - start).num_hours() / step) as usize + 1;
        let mut slots: BTreeMap<LineId, Vec<Option<f64>>> = BTreeMap::new();
        for (id, t, v) in rows {
            slots.entry(id).or_insert_with(|| vec![None; periods])[((t - start).num_hours() / step) as usize] = Some(v);
        }
        let mut values = BTreeMap::new();
        for (id, vals) in slots {
            let dense: Option<Vec<f64>> = vals.into_iter().collect();
            values.insert(
                id,
                dense.ok_or(RatingError::Parse {
                    record: 0,
                    message: format!("line {id} misses periods"),
                })?,
            );
        }
        Ok(Self {
            mode,
            start,
            periods,
            values,
        })
    }
}

/// Ratings for every line of the case over the climate horizon.
pub fn dlr_profiles(
    case: &GridCase,
    climate: &ClimateSeries,
    catalog: &ConductorCatalog,
    mode: RatingMode,
    opts: &RatingOptions,
) -> Result<LineRatings, RatingError> {
    let days = climate.days();
    let (start, periods) = match mode {
        RatingMode::Hourly => (climate.start(), climate.hours()),
        RatingMode::Daily => {
            let first = *days.first().ok_or(RatingError::NoFullDay)?;
            let start = Utc.from_utc_datetime(&first.and_hms_opt(0, 0, 0).expect("midnight"));
            (start, days.len())
        }
    };
    let bus_points: BTreeMap<u32, GeoPoint> = case
        .buses
        .iter()
        .map(|b| (b.id, GeoPoint::new(b.latitude, b.longitude)))
        .collect();
    let rows: Vec<(LineId, Vec<f64>)> = case
        .lines
        .par_iter()
        .map(|line| {
            let conductor = catalog.get(&line.conductor).ok_or_else(|| RatingError::UnknownConductor {
                line: line.id,
                conductor: line.conductor.clone(),
            })?;
            let azimuth = bearing(bus_points[&line.from_bus], bus_points[&line.to_bus]);
            let weather = line_weather(line, climate)?;
            let values = match mode {
                RatingMode::Hourly => weather
                    .iter()
                    .map(|w| rate_line(line, conductor, azimuth, w, opts))
                    .collect::<Result<Vec<_>, _>>()?,
                RatingMode::Daily => days
                    .iter()
                    .map(|&d| {
                        let hours = climate.day_hours(d)?;
                        rate_line(line, conductor, azimuth, &worst_weather(&weather[hours]), opts)
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            };
            Ok((line.id, values))
        })
        .collect::<Result<_, RatingError>>()?;
    Ok(LineRatings {
        mode,
        start,
        periods,
        values: rows.into_iter().collect(),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::climate::{tests::record, FillPolicy};
    use crate::grid::tests::{bus, line};

    pub fn bobolink() -> ConductorSpec {
        default_catalog().get("Bobolink").unwrap().clone()
    }

    fn ambient(t: f64, v: f64, rad: f64) -> AmbientConditions {
        AmbientConditions {
            t_ambient: t,
            wind_perp: v,
            q_short: rad,
            q_long: 0.0,
            wind_angle: 45.0,
        }
    }

    #[test]
    fn resistance_interpolates() {
        let c = bobolink();
        assert_eq!(resistance(&c, c.t_low), c.r_low);
        assert!((resistance(&c, c.t_high) - c.r_high).abs() < 1e-20);
        let mid = 0.5 * (c.t_low + c.t_high);
        assert!((resistance(&c, mid) - 0.5 * (c.r_low + c.r_high)).abs() < 1e-20);
    }

    #[test]
    fn wind_angle_factor() {
        assert!((k_angle(90.0) - 1.0).abs() < 1e-12);
        assert!((k_angle(0.0) - 0.388).abs() < 1e-12);
        let direct = 1.194 - 45f64.to_radians().cos() + 0.194 * 90f64.to_radians().cos() + 0.368 * 90f64.to_radians().sin();
        assert!((k_angle(45.0) - direct).abs() < 1e-12);
    }

    #[test]
    fn radiated_loss_value() {
        let mut c = bobolink();
        c.diameter = 0.0351;
        c.emissivity = 0.8;
        let q = radiated_loss(&c, 90.0, 40.0);
        assert!((q - 38.8).abs() < 0.05, "{q}");
        assert_eq!(radiated_loss(&c, 40.0, 40.0), 0.0);
        c.emissivity = 0.4;
        assert!((radiated_loss(&c, 90.0, 40.0) - q / 2.0).abs() < 1e-12);
    }

    #[test]
    fn convection_vanishes_without_gradient() {
        let c = bobolink();
        assert_eq!(convective_loss(&c, &AirProperties::default(), 3.0, 45.0, 40.0, 40.0), 0.0);
    }

    #[test]
    fn default_air_density() {
        assert!((AirProperties::default().density - 0.967).abs() < 1e-3);
    }

    #[test]
    fn solar_gain_geometry() {
        let c = bobolink();
        let dark = ambient(30.0, 1.0, 0.0);
        assert_eq!(solar_gain(&c, &SolarGeometry::default(), &dark), 0.0);
        let geom = SolarGeometry {
            sun_azimuth: 180.0,
            line_azimuth: 90.0,
            sun_altitude: 60.0,
            ..Default::default()
        };
        assert!((incidence(&geom).sin() - 1.0).abs() < 1e-12);
        let mut black = c.clone();
        black.absorptivity = 0.0;
        assert_eq!(solar_gain(&black, &geom, &ambient(30.0, 1.0, 900.0)), 0.0);
    }

    #[test]
    fn clear_sky_flux_shape() {
        // rises with sun altitude over the usual range
        assert!(clear_sky_flux(60.0) > clear_sky_flux(30.0));
        assert!(clear_sky_flux(30.0) > 800.0 && clear_sky_flux(30.0) < 1000.0);
    }

    #[test]
    fn ampacity_balances_heat() {
        let c = bobolink();
        let a = ampacity(&c, &AirProperties::default(), &SolarGeometry::default(), &ambient(35.0, 0.6, 1000.0));
        assert!(!a.degenerate);
        let lhs = a.q_c + a.q_r - a.q_s;
        let rhs = a.current.powi(2) * resistance(&c, c.max_temp);
        assert!((lhs - rhs).abs() < 1e-6 * (a.q_c + a.q_r));
    }

    #[test]
    fn ampacity_falls_to_zero_as_ambient_nears_limit() {
        let c = bobolink();
        let air = AirProperties::default();
        let geom = SolarGeometry::default();
        let mut last = f64::INFINITY;
        for t in (0..=90).map(|t| t as f64) {
            let a = ampacity(&c, &air, &geom, &ambient(t, 1.0, 0.0)).current;
            assert!(a <= last);
            last = a;
        }
        assert_eq!(last, 0.0);
    }

    #[test]
    fn solar_gain_can_exceed_losses() {
        let mut c = bobolink();
        c.max_temp = 41.0;
        let a = ampacity(&c, &AirProperties::default(), &SolarGeometry::default(), &ambient(40.0, 0.0, 1200.0));
        assert!(a.degenerate);
        assert_eq!(a.current, 0.0);
    }

    #[test]
    fn three_phase_rating() {
        let l = line(1, 1, 2, 0.1, 100.0);
        assert_eq!(thermal_rating(&l, 0.0), 0.0);
        assert!((thermal_rating(&l, 1000.0) - 597.557).abs() < 1e-3);
    }

    fn two_bus_case() -> GridCase {
        GridCase::new(
            vec![bus(1, 30.0, -97.0, "A"), bus(2, 30.5, -96.0, "A")],
            vec![line(1, 1, 2, 0.1, 300.0)],
            vec![],
            None,
        )
        .unwrap()
    }

    #[test]
    fn constant_day_rates_equal() {
        let recs: Vec<_> = (0..24)
            .flat_map(|h| [record(1, h, 30.0, (2.0, 1.0)), record(2, h, 30.0, (2.0, 1.0))])
            .collect();
        let (climate, _) = ClimateSeries::from_records(recs, FillPolicy::Reject).unwrap();
        let opts = RatingOptions::default();
        let cat = default_catalog();
        let daily = dlr_profiles(&two_bus_case(), &climate, &cat, RatingMode::Daily, &opts).unwrap();
        let hourly = dlr_profiles(&two_bus_case(), &climate, &cat, RatingMode::Hourly, &opts).unwrap();
        assert_eq!(daily.periods, 1);
        assert_eq!(hourly.periods, 24);
        for v in &hourly.values[&1] {
            assert!((v - daily.values[&1][0]).abs() < 1e-9);
        }
    }

    #[test]
    fn ratings_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let recs: Vec<_> = (0..48)
            .flat_map(|h| [record(1, h, 20.0 + (h % 24) as f64, (3.0, 1.0)), record(2, h, 25.0, (1.0, 1.0))])
            .collect();
        let (climate, _) = ClimateSeries::from_records(recs, FillPolicy::Reject).unwrap();
        for mode in [RatingMode::Daily, RatingMode::Hourly] {
            let r = dlr_profiles(&two_bus_case(), &climate, &default_catalog(), mode, &RatingOptions::default()).unwrap();
            let p = dir.path().join(format!("{mode}.csv"));
            r.write_csv(&p).unwrap();
            assert_eq!(LineRatings::read_csv(&p).unwrap(), r);
            let hourly = r.hourly(climate.start(), 48).unwrap();
            assert_eq!(hourly.get(1).unwrap().len(), 48);
        }
    }

    #[test]
    fn unknown_conductor() {
        let mut case = two_bus_case();
        case.lines[0].conductor = "Drake".into();
        let climate = ClimateSeries::from_records((0..24).flat_map(|h| [record(1, h, 0.0, (0.0, 0.0)), record(2, h, 0.0, (0.0, 0.0))]).collect(), FillPolicy::Reject).unwrap().0;
        assert!(matches!(
            dlr_profiles(&case, &climate, &default_catalog(), RatingMode::Hourly, &RatingOptions::default()),
            Err(RatingError::UnknownConductor { .. })
        ));
    }

    #[test]
    fn winter_rates_above_summer() {
        let l = line(1, 1, 2, 0.1, 300.0);
        let c = bobolink();
        let opts = RatingOptions::default();
        let w = |temp, sw| LineWeather {
            temp,
            shortwave: sw,
            longwave: 300.0,
            wind: 2.0,
        };
        let winter = rate_line(&l, &c, 45.0, &w(5.0, 400.0), &opts).unwrap();
        let summer = rate_line(&l, &c, 45.0, &w(38.0, 950.0), &opts).unwrap();
        assert!(winter > summer);
    }

    proptest::proptest! {
        #[test]
        fn ampacity_monotone(
            t in -20.0..60.0f64,
            dt in 0.0..20.0f64,
            v in 0.0..15.0f64,
            dv in 0.0..5.0f64,
            rad in 0.0..1200.0f64,
            drad in 0.0..300.0f64,
        ) {
            let c = bobolink();
            let air = AirProperties::default();
            let geom = SolarGeometry::default();
            let amp = |t, v, rad| ampacity(&c, &air, &geom, &ambient(t, v, rad)).current;
            let base = amp(t, v, rad);
            let slack = 1e-9 * (1.0 + base);
            proptest::prop_assert!(amp(t + dt, v, rad) <= base + slack);
            proptest::prop_assert!(amp(t, v + dv, rad) >= base - slack);
            proptest::prop_assert!(amp(t, v, rad + drad) <= base + slack);
        }

        #[test]
        fn heat_balance_residual(t in -20.0..80.0f64, v in 0.0..20.0f64, rad in 0.0..1500.0f64, alt in 0.0..90.0f64) {
            let c = bobolink();
            let geom = SolarGeometry { sun_altitude: alt, ..Default::default() };
            let a = ampacity(&c, &AirProperties::default(), &geom, &ambient(t, v, rad));
            if !a.degenerate {
                let r = (a.q_c + a.q_r - a.q_s - a.current.powi(2) * resistance(&c, c.max_temp)).abs();
                proptest::prop_assert!(r < 1e-6 * (a.q_c + a.q_r));
            }
        }

        #[test]
        fn daily_rating_dominated_by_hourly(
            temps in proptest::collection::vec(0.0..45.0f64, 24),
            winds in proptest::collection::vec((-8.0..8.0f64, -8.0..8.0f64), 24),
        ) {
            let recs: Vec<_> = (0..24)
                .flat_map(|h| {
                    let (u, v) = winds[h as usize];
                    let mut a = record(1, h, temps[h as usize], (u, v));
                    a.shortwave = 40.0 * h as f64;
                    let mut b = record(2, h, temps[(h as usize + 7) % 24], (v, u));
                    b.shortwave = 900.0 - 30.0 * h as f64;
                    [a, b]
                })
                .collect();
            let (climate, _) = ClimateSeries::from_records(recs, FillPolicy::Reject).unwrap();
            let opts = RatingOptions::default();
            let cat = default_catalog();
            let daily = dlr_profiles(&two_bus_case(), &climate, &cat, RatingMode::Daily, &opts).unwrap();
            let hourly = dlr_profiles(&two_bus_case(), &climate, &cat, RatingMode::Hourly, &opts).unwrap();
            let d = daily.values[&1][0];
            for h in &hourly.values[&1] {
                proptest::prop_assert!(*h >= d - 1e-9);
            }
        }
    }
}
