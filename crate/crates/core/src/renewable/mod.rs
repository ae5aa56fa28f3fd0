//! Weather-driven wind and solar availability.

mod calibrate;
mod specs;

use std::collections::BTreeMap;

use chrono::Timelike;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::climate::{log_wind, ClimateError, ClimateSeries, WindProfileParams, SOURCE_WIND_HEIGHT};
use crate::grid::{Fuel, GenId, GridCase};
use crate::profile::ProfileSet;

pub use calibrate::{
    calibrate, calibrate_with, production_error, CalibrationOptions, CalibrationProblem, CalibrationResult,
};
pub use specs::{read_specs, write_specs, RenewableSpecs};

/// Largest allowed change of the hourly coefficient between adjacent hours.
pub const MAX_COEFF_STEP: f64 = 1e-4;
/// Largest allowed move of a farm's capacity away from its initial value, MW.
pub const MAX_CAPACITY_SHIFT: f64 = 50.0;

#[derive(Debug, thiserror::Error)]
pub enum RenewableError {
    #[error("generator {gen}: {message}")]
    InvalidSpec { gen: GenId, message: String },
    #[error("generator {0} has no wind/solar spec")]
    MissingSpec(GenId),
    #[error("generator {gen}: no climate at bus {bus}")]
    MissingClimate { gen: GenId, bus: u32 },
    #[error("calibration: {0}")]
    Calibration(String),
    #[error("specs record {record}: {message}")]
    Parse { record: u64, message: String },
    #[error(transparent)]
    Climate(#[from] ClimateError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindFarmSpec {
    pub gen_id: GenId,
    /// MW
    pub capacity: f64,
    /// MW, the anchor of the calibration capacity window.
    pub initial_capacity: f64,
    /// m
    pub hub_height: f64,
    /// m/s
    pub cut_in: f64,
    pub rated: f64,
    pub cut_out: f64,
    /// kg/m³
    pub air_density: f64,
    pub turbine_efficiency: f64,
    /// m
    pub rotor_diameter: f64,
    /// Output per MW of capacity per (m/s)³, by UTC hour of day.
    pub hourly_coeff: [f64; 24],
}

impl WindFarmSpec {
    /// Standard farm with the coefficient that reaches capacity exactly at
    /// rated speed.
    pub fn new(gen_id: GenId, capacity: f64) -> Self {
        let rated: f64 = 13.0;
        Self {
            gen_id,
            capacity,
            initial_capacity: capacity,
            hub_height: 80.0,
            cut_in: 3.5,
            rated,
            cut_out: 25.0,
            air_density: 1.225,
            turbine_efficiency: 0.45,
            rotor_diameter: 100.0,
            hourly_coeff: [1.0 / rated.powi(3); 24],
        }
    }

    /// Aerodynamic output of one turbine, W: `½·ρ·(π/4)·D²·v³·C_p`.
    pub fn turbine_power(&self, v: f64) -> f64 {
        let area = std::f64::consts::FRAC_PI_4 * self.rotor_diameter.powi(2);
        0.5 * self.air_density * area * v.powi(3) * self.turbine_efficiency
    }

    pub fn validate(&self) -> Result<(), RenewableError> {
        let fail = |message: String| {
            Err(RenewableError::InvalidSpec {
                gen: self.gen_id,
                message,
            })
        };
        if !(0.0 < self.cut_in && self.cut_in < self.rated && self.rated < self.cut_out) {
            return fail(format!(
                "needs 0 < cut_in ({}) < rated ({}) < cut_out ({})",
                self.cut_in, self.rated, self.cut_out
            ));
        }
        if !(self.capacity >= 0.0 && self.initial_capacity >= 0.0) {
            return fail("capacity must be non-negative".into());
        }
        if self.hourly_coeff.iter().any(|k| !(*k >= 0.0)) {
            return fail("hourly coefficients must be non-negative".into());
        }
        if coeff_step(&self.hourly_coeff) > MAX_COEFF_STEP * (1.0 + 1e-9) {
            return fail(format!("hourly coefficient step exceeds {MAX_COEFF_STEP}"));
        }
        Ok(())
    }
}

/// Largest cyclic step between adjacent hourly coefficients.
pub fn coeff_step(k: &[f64; 24]) -> f64 {
    (0..24).map(|h| (k[h] - k[(h + 23) % 24]).abs()).fold(0.0, f64::max)
}

/// Available output, MW, at hub-height speed `v_hub`.
pub fn wind_power(spec: &WindFarmSpec, v_hub: f64, hour_of_day: usize) -> f64 {
    if v_hub < spec.cut_in || v_hub >= spec.cut_out {
        0.0
    } else if v_hub >= spec.rated {
        spec.capacity
    } else {
        (spec.hourly_coeff[hour_of_day % 24] * spec.capacity * v_hub.powi(3)).min(spec.capacity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvArraySpec {
    pub gen_id: GenId,
    /// MW at reference conditions.
    pub p_mp0: f64,
    /// 1/°C
    pub gamma: f64,
    /// W/m²
    pub e0: f64,
    /// °C
    pub t0: f64,
    /// Share of longwave radiation counted as effective irradiance.
    pub longwave_weight: f64,
}

impl PvArraySpec {
    pub fn new(gen_id: GenId, p_mp0: f64) -> Self {
        Self {
            gen_id,
            p_mp0,
            gamma: -0.004,
            e0: 1000.0,
            t0: 25.0,
            longwave_weight: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), RenewableError> {
        let ok = self.p_mp0 > 0.0
            && self.e0 > 0.0
            && (-0.01..=0.0).contains(&self.gamma)
            && (0.0..=1.0).contains(&self.longwave_weight);
        if ok {
            Ok(())
        } else {
            Err(RenewableError::InvalidSpec {
                gen: self.gen_id,
                message: "needs p_mp0 > 0, e0 > 0, gamma in [-0.01, 0], longwave_weight in [0, 1]".into(),
            })
        }
    }
}

/// Maximum power point, MW. Cell temperature is taken as the air temperature.
pub fn solar_power(spec: &PvArraySpec, shortwave: f64, longwave: f64, temp_air: f64) -> f64 {
    let effective = shortwave + spec.longwave_weight * longwave;
    let p = effective / spec.e0 * spec.p_mp0 * (1.0 + spec.gamma * (temp_air - spec.t0));
    p.max(0.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileOptions {
    pub wind_profile: WindProfileParams,
    /// Height of the climate wind field, m.
    pub source_height: f64,
    /// Solar output cap as a multiple of `p_mp0`.
    pub solar_headroom: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            wind_profile: WindProfileParams::default(),
            source_height: SOURCE_WIND_HEIGHT,
            solar_headroom: 1.1,
        }
    }
}

/// Hub-height wind speed series at a bus.
pub fn hub_speeds(
    climate: &ClimateSeries,
    bus: u32,
    hub_height: f64,
    opts: &ProfileOptions,
) -> Result<Vec<f64>, RenewableError> {
    let series = climate.series(bus).ok_or(ClimateError::MissingBus(bus))?;
    series
        .iter()
        .map(|r| Ok(log_wind(r.composite_wind(), opts.source_height, hub_height, opts.wind_profile)?))
        .collect()
}

/// Available MW for every wind and solar generator of the case.
pub fn generate_profiles(
    case: &GridCase,
    climate: &ClimateSeries,
    specs: &RenewableSpecs,
    opts: &ProfileOptions,
) -> Result<ProfileSet, RenewableError> {
    let wind: BTreeMap<GenId, &WindFarmSpec> = specs.wind.iter().map(|s| (s.gen_id, s)).collect();
    let solar: BTreeMap<GenId, &PvArraySpec> = specs.solar.iter().map(|s| (s.gen_id, s)).collect();
    let hours_of_day: Vec<usize> = (0..climate.hours())
        .map(|h| climate.timestamp(h).hour() as usize)
        .collect();
    let gens: Vec<_> = case.generators.iter().filter(|g| g.fuel.is_renewable()).collect();
    let rows: Vec<(GenId, Vec<f64>)> = gens
        .par_iter()
        .map(|g| {
            let series = climate.series(g.bus).ok_or(RenewableError::MissingClimate { gen: g.id, bus: g.bus })?;
            let values = match g.fuel {
                Fuel::Wind => {
                    let spec = wind.get(&g.id).ok_or(RenewableError::MissingSpec(g.id))?;
                    spec.validate()?;
                    hub_speeds(climate, g.bus, spec.hub_height, opts)?
                        .iter()
                        .zip(&hours_of_day)
                        .map(|(&v, &hod)| wind_power(spec, v, hod))
                        .collect()
                }
                _ => {
                    let spec = solar.get(&g.id).ok_or(RenewableError::MissingSpec(g.id))?;
                    spec.validate()?;
                    let cap = spec.p_mp0 * opts.solar_headroom;
                    series
                        .iter()
                        .map(|r| {
                            let p = solar_power(spec, r.shortwave, r.longwave, r.temp_2m);
                            if p > cap {
                                log::warn!("solar {} capped at {cap} MW ({} MW) at {}", g.id, p, r.timestamp);
                            }
                            p.min(cap)
                        })
                        .collect()
                }
            };
            Ok((g.id, values))
        })
        .collect::<Result<_, RenewableError>>()?;
    let mut set = ProfileSet::new(climate.start(), climate.hours());
    for (id, values) in rows {
        set.insert(id, values).expect("one value per climate hour");
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::climate::{tests::record, FillPolicy};
    use crate::grid::tests::{bus, thermal};
    use proptest::prelude::*;

    #[test]
    fn wind_cut_speeds() {
        let s = WindFarmSpec::new(1, 100.0);
        assert_eq!(wind_power(&s, 3.0, 0), 0.0);
        assert_eq!(wind_power(&s, 20.0, 0), 100.0);
        assert_eq!(wind_power(&s, 25.0, 0), 0.0);
        assert_eq!(wind_power(&s, 26.0, 0), 0.0);
        let mut k = s.clone();
        k.hourly_coeff = [1e-4; 24];
        assert!((wind_power(&k, 10.0, 5) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn turbine_power_arithmetic() {
        let mut s = WindFarmSpec::new(1, 100.0);
        s.air_density = 1.2;
        s.rotor_diameter = 2.0;
        s.turbine_efficiency = 0.5;
        // 0.5 * 1.2 * pi * 1000 * 0.5
        assert!((s.turbine_power(10.0) - 300.0 * std::f64::consts::PI).abs() < 1e-9);
        // default coefficient meets capacity at rated speed
        assert!((wind_power(&WindFarmSpec::new(1, 100.0), 12.999999, 0) - 100.0).abs() < 1e-4);
    }

    #[test]
    fn solar_identities() {
        let s = PvArraySpec::new(1, 50.0);
        assert_eq!(solar_power(&s, 1000.0, 0.0, 25.0), 50.0);
        assert_eq!(solar_power(&s, 0.0, 300.0, 25.0), 0.0);
        assert!((solar_power(&s, 500.0, 0.0, 50.0) - 0.45 * 50.0).abs() < 1e-12);
        let mut lw = s.clone();
        lw.longwave_weight = 1.0;
        assert!((solar_power(&lw, 600.0, 400.0, 25.0) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        let mut s = WindFarmSpec::new(1, 100.0);
        assert!(s.validate().is_ok());
        s.hourly_coeff[3] += 2e-4;
        assert!(s.validate().is_err());
        let mut s = WindFarmSpec::new(1, 100.0);
        s.rated = 30.0;
        assert!(s.validate().is_err());
        let mut p = PvArraySpec::new(2, 10.0);
        p.gamma = 0.01;
        assert!(p.validate().is_err());
    }

    fn renewable_case() -> GridCase {
        let mut w1 = thermal(1, 1, 0.0, 100.0, 0.0);
        w1.fuel = Fuel::Wind;
        let mut w2 = thermal(2, 1, 0.0, 300.0, 0.0);
        w2.fuel = Fuel::Wind;
        let mut pv = thermal(3, 1, 0.0, 20.0, 0.0);
        pv.fuel = Fuel::Solar;
        GridCase::new(vec![bus(1, 30.0, -100.0, "West")], vec![], vec![w1, w2, pv], None).unwrap()
    }

    fn specs() -> RenewableSpecs {
        let mut w2 = WindFarmSpec::new(2, 300.0);
        w2.hourly_coeff = [3e-4; 24];
        RenewableSpecs {
            wind: vec![WindFarmSpec::new(1, 100.0), w2],
            solar: vec![PvArraySpec::new(3, 20.0)],
        }
    }

    #[test]
    fn calm_dark_hour_is_zero() {
        let mut r = record(1, 0, 10.0, (0.0, 0.0));
        r.shortwave = 0.0;
        r.longwave = 0.0;
        let (climate, _) = ClimateSeries::from_records(vec![r], FillPolicy::Reject).unwrap();
        let p = generate_profiles(&renewable_case(), &climate, &specs(), &ProfileOptions::default()).unwrap();
        assert_eq!(p.totals(), vec![0.0]);
    }

    #[test]
    fn farms_at_one_bus_scale_with_coefficient() {
        // 3 m/s at 10 m is about 6.4 m/s at hub height: mid-range
        let mut r = record(1, 0, 25.0, (3.0, 0.0));
        r.shortwave = 1000.0;
        let (climate, _) = ClimateSeries::from_records(vec![r], FillPolicy::Reject).unwrap();
        let p = generate_profiles(&renewable_case(), &climate, &specs(), &ProfileOptions::default()).unwrap();
        let (a, b) = (p.get(1).unwrap()[0], p.get(2).unwrap()[0]);
        let ratio = (3e-4 * 300.0) / (1.0 / 13f64.powi(3) * 100.0);
        assert!(a > 0.0 && (b / a - ratio).abs() < 1e-9);
        assert_eq!(p.get(3).unwrap()[0], 20.0);
    }

    #[test]
    fn missing_spec_reported() {
        let climate = ClimateSeries::from_records(vec![record(1, 0, 0.0, (0.0, 0.0))], FillPolicy::Reject).unwrap().0;
        let mut s = specs();
        s.solar.clear();
        assert!(matches!(
            generate_profiles(&renewable_case(), &climate, &s, &ProfileOptions::default()),
            Err(RenewableError::MissingSpec(3))
        ));
    }

    proptest! {
        #[test]
        fn wind_curve_shape(v1 in 0.0f64..30.0, v2 in 0.0f64..30.0, cap in 0.0f64..500.0, k in 0.0f64..2e-3) {
            let mut s = WindFarmSpec::new(1, cap);
            s.hourly_coeff = [k; 24];
            let (a, b) = (wind_power(&s, v1, 0), wind_power(&s, v2, 0));
            prop_assert!((0.0..=cap).contains(&a));
            if s.cut_in <= v1 && v1 <= v2 && v2 < s.cut_out {
                prop_assert!(a <= b);
            }
        }

        #[test]
        fn solar_never_negative(sw in 0.0f64..1400.0, lw in 0.0f64..500.0, t in -30.0f64..300.0) {
            let s = PvArraySpec::new(1, 10.0);
            prop_assert!(solar_power(&s, sw, lw, t) >= 0.0);
        }
    }
}
