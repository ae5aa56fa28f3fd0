//! Generator parameter library keyed by fuel and capacity.
//!
//! Cost tables give ranges per capacity bucket. Rates take the midpoint of
//! their range; the no-load cost `c0` is interpolated linearly across the
//! bucket's range by capacity.

use serde::{Deserialize, Serialize};

use super::{CaseError, Fuel, GeneratorCostSpec};

/// $/MMBtu
pub const COAL_PRICE: f64 = 1.78;
/// $/MMBtu
pub const GAS_PRICE: f64 = 2.29;

/// Share of capacity used as minimum stable output for thermal units.
const THERMAL_PMIN_RATIO: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuelPrices {
    pub coal: f64,
    pub natural_gas: f64,
}

impl Default for FuelPrices {
    fn default() -> Self {
        Self {
            coal: COAL_PRICE,
            natural_gas: GAS_PRICE,
        }
    }
}

/// Cost spec plus operating limits for a new unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorDefaults {
    pub cost: GeneratorCostSpec,
    pub p_min: f64,
    /// MW/min
    pub ramp_rate: f64,
    pub min_on: u32,
    pub min_off: u32,
    /// Hours. Recorded only; commitment models min up/down times instead.
    pub startup_time: f64,
    pub shutdown_time: f64,
}

/// One capacity bucket: `c0` runs from `c0_lo` at `cap_lo` to `c0_hi` at `cap_hi`.
struct Bucket {
    cap_lo: f64,
    cap_hi: f64,
    c0_lo: f64,
    c0_hi: f64,
}

struct ThermalTable {
    buckets: &'static [Bucket],
    c1: (f64, f64),
    c2: (f64, f64),
    startup_per_mw: (f64, f64),
    shutdown_per_mw: (f64, f64),
    /// % of capacity per minute.
    ramp_pct: (f64, f64),
    startup_time: (f64, f64),
    shutdown_time: (f64, f64),
    min_on: u32,
    min_off: u32,
}

// The open top coal bucket is interpolated up to 1500 MW and held beyond.
const COAL: ThermalTable = ThermalTable {
    buckets: &[
        Bucket { cap_lo: 0.0, cap_hi: 75.0, c0_lo: 0.0, c0_hi: 238.0 },
        Bucket { cap_lo: 75.0, cap_hi: 150.0, c0_lo: 238.0, c0_hi: 745.0 },
        Bucket { cap_lo: 150.0, cap_hi: 350.0, c0_lo: 745.0, c0_hi: 1213.0 },
        Bucket { cap_lo: 350.0, cap_hi: 1500.0, c0_lo: 1213.0, c0_hi: 3043.0 },
    ],
    c1: (18.28, 19.98),
    c2: (0.0016, 0.0016),
    startup_per_mw: (80.0, 380.0),
    shutdown_per_mw: (8.0, 38.0),
    ramp_pct: (0.6, 8.0),
    startup_time: (4.0, 60.0),
    shutdown_time: (2.0, 60.0),
    min_on: 12,
    min_off: 12,
};

const GAS: ThermalTable = ThermalTable {
    buckets: &[
        Bucket { cap_lo: 0.0, cap_hi: 400.0, c0_lo: 0.0, c0_hi: 600.0 },
        Bucket { cap_lo: 400.0, cap_hi: 600.0, c0_lo: 600.0, c0_hi: 3859.0 },
    ],
    c1: (23.13, 57.03),
    c2: (0.002, 0.008),
    startup_per_mw: (4.0, 80.0),
    shutdown_per_mw: (0.4, 8.0),
    ramp_pct: (0.8, 30.0),
    startup_time: (5.0, 40.0),
    shutdown_time: (3.0, 40.0),
    min_on: 2,
    min_off: 1,
};

fn mid(r: (f64, f64)) -> f64 {
    0.5 * (r.0 + r.1)
}

fn interpolate_c0(buckets: &[Bucket], capacity: f64) -> f64 {
    let b = buckets
        .iter()
        .find(|b| capacity <= b.cap_hi)
        .unwrap_or_else(|| buckets.last().expect("non-empty table"));
    let t = ((capacity - b.cap_lo) / (b.cap_hi - b.cap_lo)).clamp(0.0, 1.0);
    b.c0_lo + t * (b.c0_hi - b.c0_lo)
}

/// Startup fuel per MW is chosen so that fuel bought at `default_price` costs
/// the tabulated $/MW midpoint; other prices scale the charge.
fn thermal(table: &ThermalTable, capacity: f64, fuel_price: f64, default_price: f64) -> GeneratorDefaults {
    let cost = GeneratorCostSpec {
        c0: interpolate_c0(table.buckets, capacity),
        c1: mid(table.c1),
        c2: mid(table.c2),
        startup_fuel_per_capacity: mid(table.startup_per_mw) / default_price,
        fuel_price,
        startup_power: 0.0,
        startup_power_cost: 0.0,
        shutdown_cost: mid(table.shutdown_per_mw) * capacity,
    };
    GeneratorDefaults {
        cost,
        p_min: THERMAL_PMIN_RATIO * capacity,
        ramp_rate: mid(table.ramp_pct) / 100.0 * capacity,
        min_on: table.min_on,
        min_off: table.min_off,
        startup_time: mid(table.startup_time),
        shutdown_time: mid(table.shutdown_time),
    }
}

pub fn default_params(fuel: Fuel, capacity: f64) -> Result<GeneratorDefaults, CaseError> {
    default_params_with(fuel, capacity, FuelPrices::default())
}

pub fn default_params_with(fuel: Fuel, capacity: f64, prices: FuelPrices) -> Result<GeneratorDefaults, CaseError> {
    if !(capacity > 0.0 && capacity.is_finite()) {
        return Err(CaseError::BadCapacity(capacity));
    }
    Ok(match fuel {
        Fuel::Coal => thermal(&COAL, capacity, prices.coal, COAL_PRICE),
        Fuel::NaturalGas => thermal(&GAS, capacity, prices.natural_gas, GAS_PRICE),
        Fuel::Nuclear => GeneratorDefaults {
            cost: GeneratorCostSpec::flat(0.0, 17.44, 0.0, 1200.0, 1200.0),
            p_min: THERMAL_PMIN_RATIO * capacity,
            ramp_rate: 0.05 * capacity,
            min_on: 72,
            min_off: 72,
            startup_time: 18.0,
            shutdown_time: 18.0,
        },
        Fuel::Hydro => GeneratorDefaults {
            cost: GeneratorCostSpec::flat(0.0, 12.3, 0.0, 0.0, 0.0),
            p_min: 0.0,
            ramp_rate: capacity,
            min_on: 0,
            min_off: 0,
            startup_time: 0.0,
            shutdown_time: 0.0,
        },
        Fuel::Wind | Fuel::Solar => GeneratorDefaults {
            cost: GeneratorCostSpec::zero(),
            p_min: 0.0,
            ramp_rate: capacity,
            min_on: 0,
            min_off: 0,
            startup_time: 0.0,
            shutdown_time: 0.0,
        },
    })
}

/// `η·P_max·C_F + P_su·C_o`
pub fn startup_cost(spec: &GeneratorCostSpec, p_max: f64) -> f64 {
    spec.startup_fuel_per_capacity * p_max * spec.fuel_price + spec.startup_power * spec.startup_power_cost
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nuclear_constants() {
        let d = default_params(Fuel::Nuclear, 2430.0).unwrap();
        assert_eq!(d.cost.c1, 17.44);
        assert_eq!(d.cost.startup_cost(2430.0), 1200.0);
        assert_eq!(d.cost.shutdown_cost, 1200.0);
        assert!((d.ramp_rate - 0.05 * 2430.0).abs() < 1e-9);
        assert_eq!((d.min_on, d.min_off), (72, 72));
    }

    #[test]
    fn hydro_is_free_to_cycle() {
        let d = default_params(Fuel::Hydro, 30.0).unwrap();
        assert_eq!(d.cost.startup_cost(30.0), 0.0);
        assert_eq!(d.cost.shutdown_cost, 0.0);
        assert_eq!((d.min_on, d.min_off), (0, 0));
        assert_eq!(d.cost.c1, 12.3);
    }

    #[test]
    fn small_coal_unit() {
        let d = default_params(Fuel::Coal, 100.0).unwrap();
        assert!((d.cost.c1 - 19.13).abs() < 1e-12);
        assert_eq!(d.cost.c2, 0.0016);
        // 100 MW sits a third of the way through 75..150 -> 238..745
        assert!((d.cost.c0 - (238.0 + (745.0 - 238.0) / 3.0)).abs() < 1e-9);
        assert!((d.cost.startup_cost(100.0) - 230.0 * 100.0).abs() < 1e-9);
    }

    #[test]
    fn startup_formula() {
        let mut s = GeneratorCostSpec::zero();
        assert_eq!(startup_cost(&s, 100.0), 0.0);
        s.startup_fuel_per_capacity = 1.0;
        s.fuel_price = 1.78;
        s.startup_power = 10.0;
        s.startup_power_cost = 2.0;
        assert!((startup_cost(&s, 100.0) - 198.0).abs() < 1e-12);
    }

    #[test]
    fn gas_price_raises_startup() {
        let mut coal = GeneratorCostSpec::zero();
        coal.startup_fuel_per_capacity = 1.0;
        coal.fuel_price = COAL_PRICE;
        let mut gas = coal.clone();
        gas.fuel_price = GAS_PRICE;
        assert!(startup_cost(&gas, 300.0) > startup_cost(&coal, 300.0));
    }

    #[test]
    fn fuel_price_override_scales_startup() {
        let base = default_params(Fuel::NaturalGas, 200.0).unwrap();
        let prices = FuelPrices { natural_gas: 2.0 * GAS_PRICE, ..Default::default() };
        let dear = default_params_with(Fuel::NaturalGas, 200.0, prices).unwrap();
        assert!((dear.cost.startup_cost(200.0) - 2.0 * base.cost.startup_cost(200.0)).abs() < 1e-9);
    }

    #[test]
    fn rejects_nonpositive_capacity() {
        assert!(matches!(default_params(Fuel::Coal, 0.0), Err(CaseError::BadCapacity(_))));
        assert!(default_params(Fuel::Coal, f64::NAN).is_err());
    }

    fn within(v: f64, lo: f64, hi: f64) -> bool {
        v >= lo - 1e-9 && v <= hi + 1e-9
    }

    proptest! {
        #[test]
        fn coal_values_inside_table_ranges(cap in 0.1f64..3000.0) {
            let d = default_params(Fuel::Coal, cap).unwrap();
            prop_assert!(within(d.cost.c1, 18.28, 19.98));
            prop_assert!(within(d.cost.c0, 0.0, 3043.0));
            let c0_range = match cap {
                c if c <= 75.0 => (0.0, 238.0),
                c if c <= 150.0 => (238.0, 745.0),
                c if c <= 350.0 => (745.0, 1213.0),
                _ => (1213.0, 3043.0),
            };
            prop_assert!(within(d.cost.c0, c0_range.0, c0_range.1));
            prop_assert!(within(d.cost.startup_cost(cap) / cap, 80.0, 380.0));
            prop_assert!(within(d.cost.shutdown_cost / cap, 8.0, 38.0));
            prop_assert!(within(d.ramp_rate / cap * 100.0, 0.6, 8.0));
            prop_assert!(within(d.startup_time, 4.0, 60.0));
            prop_assert_eq!((d.min_on, d.min_off), (12, 12));
            prop_assert_eq!(default_params(Fuel::Coal, cap).unwrap(), d);
        }

        #[test]
        fn gas_values_inside_table_ranges(cap in 0.1f64..1200.0) {
            let d = default_params(Fuel::NaturalGas, cap).unwrap();
            prop_assert!(within(d.cost.c1, 23.13, 57.03));
            prop_assert!(within(d.cost.c2, 0.002, 0.008));
            let c0_range = if cap <= 400.0 { (0.0, 600.0) } else { (600.0, 3859.0) };
            prop_assert!(within(d.cost.c0, c0_range.0, c0_range.1));
            prop_assert!(within(d.cost.startup_cost(cap) / cap, 4.0, 80.0));
            prop_assert!(within(d.cost.shutdown_cost / cap, 0.4, 8.0));
            prop_assert!(within(d.ramp_rate / cap * 100.0, 0.8, 30.0));
            prop_assert!(within(d.shutdown_time, 3.0, 40.0));
            prop_assert_eq!((d.min_on, d.min_off), (2, 1));
        }

        #[test]
        fn c0_monotone_in_capacity(a in 0.1f64..2000.0, b in 0.1f64..2000.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            for fuel in [Fuel::Coal, Fuel::NaturalGas] {
                prop_assert!(default_params(fuel, lo).unwrap().cost.c0 <= default_params(fuel, hi).unwrap().cost.c0);
            }
        }
    }
}
