//! Deterministic synthetic inputs: a 225-bus Texas-footprint case, a 10-bus
//! case with two summer days of climate and load, a congested 3-bus case
//! for rating comparisons, and small commitment instances for enumeration.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Timelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::climate::{ClimateRecord, ClimateSeries, FillPolicy};
use crate::grid::{default_params, save_case, Bus, BusId, Fuel, GenId, Generator, GeneratorCostSpec, GridCase, Line, LineId};
use crate::load::{ParticipationFactors, ZonalLoadSeries};
use crate::profile::ProfileSet;
use crate::reduction::{haversine, GeoPoint, EARTH_RADIUS_KM};
use crate::renewable::{write_specs, PvArraySpec, RenewableSpecs, WindFarmSpec};
use crate::scuc::{static_limits, LineLimits, ScucInstance};

/// Per-unit reactance per km of 345 kV line on a 100 MVA base.
const X_PER_KM: f64 = 3.1e-4;

/// Rough outline of Texas as (lon, lat).
const OUTLINE: [(f64, f64); 12] = [
    (-106.6, 31.9),
    (-103.0, 32.0),
    (-103.0, 36.5),
    (-100.0, 36.5),
    (-100.0, 34.6),
    (-94.0, 33.6),
    (-94.0, 29.7),
    (-97.2, 26.0),
    (-99.1, 26.5),
    (-101.4, 29.8),
    (-103.1, 29.0),
    (-104.5, 29.6),
];

fn inside_outline(lon: f64, lat: f64) -> bool {
    let mut inside = false;
    let n = OUTLINE.len();
    for i in 0..n {
        let (x1, y1) = OUTLINE[i];
        let (x2, y2) = OUTLINE[(i + 1) % n];
        if (y1 > lat) != (y2 > lat) && lon < x1 + (lat - y1) / (y2 - y1) * (x2 - x1) {
            inside = !inside;
        }
    }
    inside
}

/// Weather zone of a Texas location, by coarse longitude/latitude bands.
pub fn weather_zone(lat: f64, lon: f64) -> &'static str {
    if lon < -102.5 {
        "FarWest"
    } else if lon < -99.5 {
        if lat > 33.5 {
            "North"
        } else {
            "West"
        }
    } else if lat < 28.3 {
        "South"
    } else if lat < 30.5 {
        if lon > -96.3 {
            "Coast"
        } else {
            "SouthCentral"
        }
    } else if lon > -95.8 {
        "East"
    } else if lat > 33.0 {
        "North"
    } else {
        "NorthCentral"
    }
}

fn unit(id: GenId, bus: BusId, fuel: Fuel, capacity: f64) -> Generator {
    let d = default_params(fuel, capacity).expect("positive capacity");
    Generator {
        id,
        bus,
        fuel,
        p_max: capacity,
        p_min: d.p_min,
        q_max: 0.3 * capacity,
        q_min: -0.3 * capacity,
        cost: d.cost,
        ramp_rate: d.ramp_rate,
        min_on: d.min_on,
        min_off: d.min_off,
    }
}

fn plain_unit(id: GenId, bus: BusId, p_min: f64, p_max: f64, c1: f64) -> Generator {
    Generator {
        id,
        bus,
        fuel: Fuel::NaturalGas,
        p_max,
        p_min,
        q_max: 0.0,
        q_min: 0.0,
        cost: GeneratorCostSpec::flat(0.0, c1, 0.0, 0.0, 0.0),
        ramp_rate: p_max,
        min_on: 0,
        min_off: 0,
    }
}

fn bus(id: BusId, lat: f64, lon: f64) -> Bus {
    Bus {
        id,
        latitude: lat,
        longitude: lon,
        zone: weather_zone(lat, lon).to_string(),
        base_kv: 345.0,
    }
}

fn line_between(id: LineId, a: &Bus, b: &Bus, conductor: &str, rating: f64) -> Line {
    line_at(id, a, b, conductor, rating, 345.0)
}

fn line_at(id: LineId, a: &Bus, b: &Bus, conductor: &str, rating: f64, kv: f64) -> Line {
    let km = haversine(GeoPoint::new(a.latitude, a.longitude), GeoPoint::new(b.latitude, b.longitude), EARTH_RADIUS_KM);
    Line {
        id,
        from_bus: a.id,
        to_bus: b.id,
        reactance: (X_PER_KM * (345.0 / kv).powi(2) * km).max(1e-3),
        conductor: conductor.to_string(),
        length_km: km,
        voltage_kv: kv,
        static_rating: rating,
    }
}

/// 225 buses scattered over the Texas outline, joined by a spanning tree
/// plus nearest-neighbour links, with a fuel mix that follows geography.
pub fn texas_footprint(seed: u64) -> GridCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buses = Vec::with_capacity(225);
    while buses.len() < 225 {
        let lon = rng.gen_range(-106.6..-93.6);
        let lat = rng.gen_range(26.0..36.5);
        if inside_outline(lon, lat) {
            let id = buses.len() as BusId + 1;
            buses.push(bus(id, (lat * 1e4f64).round() / 1e4, (lon * 1e4f64).round() / 1e4));
        }
    }
    let n = buses.len();
    let pt = |b: &Bus| GeoPoint::new(b.latitude, b.longitude);
    let dist: Vec<Vec<f64>> = buses
        .iter()
        .map(|a| buses.iter().map(|b| haversine(pt(a), pt(b), EARTH_RADIUS_KM)).collect())
        .collect();

    // Prim's spanning tree
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, 0usize); n];
    in_tree[0] = true;
    for j in 1..n {
        best[j] = (dist[0][j], 0);
    }
    for _ in 1..n {
        let (j, _) = (0..n)
            .filter(|&j| !in_tree[j])
            .map(|j| (j, best[j].0))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("vertices left");
        in_tree[j] = true;
        edges.push((best[j].1.min(j), best[j].1.max(j)));
        for k in 0..n {
            if !in_tree[k] && dist[j][k] < best[k].0 {
                best[k] = (dist[j][k], j);
            }
        }
    }
    // second-nearest links for meshing
    for i in 0..n {
        let mut near: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        near.sort_by(|&a, &b| dist[i][a].total_cmp(&dist[i][b]));
        let j = near[1];
        let e = (i.min(j), i.max(j));
        if !edges.contains(&e) {
            edges.push(e);
        }
    }
    edges.sort_unstable();
    let conductors = ["Kiwi", "Bobolink", "Finch"];
    let lines = edges
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let c = conductors[rng.gen_range(0..3)];
            let rating = [700.0, 600.0, 500.0][conductors.iter().position(|x| *x == c).expect("known")];
            line_between(k as LineId + 1, &buses[a], &buses[b], c, rating)
        })
        .collect();

    let mut gens = Vec::new();
    for b in &buses {
        if !rng.gen_bool(0.45) {
            continue;
        }
        let (fuel, lo, hi) = match (b.zone.as_str(), rng.gen_range(0..10)) {
            ("FarWest" | "West" | "North", 0..=4) => (Fuel::Wind, 50.0, 500.0),
            ("FarWest" | "West", 5..=6) => (Fuel::Solar, 20.0, 250.0),
            (_, 0) => (Fuel::Solar, 20.0, 150.0),
            (_, 1) => (Fuel::Coal, 300.0, 1200.0),
            (_, 2) if b.zone == "SouthCentral" => (Fuel::Hydro, 10.0, 100.0),
            _ => (Fuel::NaturalGas, 50.0, 800.0),
        };
        let cap = (rng.gen_range(lo..hi) as f64).round();
        gens.push(unit(gens.len() as GenId + 1, b.id, fuel, cap));
    }
    // two nuclear plants near the historical sites
    for (lat, lon) in [(28.80, -96.05), (32.30, -97.78)] {
        let b = buses
            .iter()
            .min_by(|x, y| {
                let d = |q: &Bus| (q.latitude - lat).powi(2) + (q.longitude - lon).powi(2);
                d(x).total_cmp(&d(y))
            })
            .expect("buses");
        gens.push(unit(gens.len() as GenId + 1, b.id, Fuel::Nuclear, 1250.0));
    }
    GridCase::new(buses, lines, gens, None).expect("generated case is valid")
}

fn hour_start(y: i32, m: u32, d: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(y, m, d, 0, 0, 0).single().expect("valid date")
}

/// Hourly climate with a diurnal cycle in local (UTC−6) time.
fn synthetic_climate(buses: &[Bus], start: DateTime<Utc>, hours: usize, seed: u64, summer: bool) -> Vec<ClimateRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(buses.len() * hours);
    for b in buses {
        let base_temp = if summer { 27.0 } else { 8.0 } + 0.6 * (31.0 - b.latitude) + 0.3 * (b.longitude + 99.0);
        let windy = (-(b.longitude + 97.0)).max(0.0) * 0.8;
        let phase = rng.gen_range(0.0..2.0 * PI);
        for h in 0..hours {
            let at = start + Duration::hours(h as i64);
            let local = (at.hour() as f64 - 6.0).rem_euclid(24.0);
            let day_arc = ((local - 6.0) / 12.0 * PI).sin().max(0.0);
            let temp = base_temp + 6.0 * ((local - 9.0) / 24.0 * 2.0 * PI).sin() + rng.gen_range(-0.5..0.5);
            let sw = if summer { 950.0 } else { 600.0 } * day_arc * rng.gen_range(0.85..1.0);
            let lw = 300.0 + 2.5 * temp;
            let speed = (3.0 + windy + 2.0 * ((local / 24.0) * 2.0 * PI + phase).cos() + rng.gen_range(-0.7..0.7)).max(0.2);
            let dir = phase + 0.3 * (h as f64 / 24.0);
            out.push(ClimateRecord {
                bus: b.id,
                timestamp: at,
                temp_2m: (temp * 100.0).round() / 100.0,
                shortwave: (sw * 10.0).round() / 10.0,
                longwave: (lw * 10.0).round() / 10.0,
                wind_u: (speed * dir.cos() * 100.0).round() / 100.0,
                wind_v: (speed * dir.sin() * 100.0).round() / 100.0,
            });
        }
    }
    out
}

/// Everything the pipeline needs for one case.
#[derive(Debug, Clone)]
pub struct PipelineFixture {
    pub case: GridCase,
    pub climate: Vec<ClimateRecord>,
    pub zonal: ZonalLoadSeries,
    pub factors: ParticipationFactors,
    pub specs: RenewableSpecs,
}

impl PipelineFixture {
    pub fn climate_series(&self) -> ClimateSeries {
        ClimateSeries::from_records(self.climate.clone(), FillPolicy::Reject)
            .expect("fixture climate is complete")
            .0
    }

    /// Writes `case/`, `climate.csv`, `zonal_load.csv`, `factors.csv`,
    /// `specs.csv` and a `run.toml` referencing them.
    pub fn write(&self, dir: impl AsRef<Path>, run_toml: &str) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        save_case(&self.case, dir.join("case"))?;
        self.climate_series().write_csv(dir.join("climate.csv"))?;
        self.zonal.write_csv(dir.join("zonal_load.csv"))?;
        self.factors.write_csv(dir.join("factors.csv"))?;
        write_specs(&self.specs, dir.join("specs.csv"))?;
        std::fs::write(dir.join("run.toml"), run_toml)?;
        Ok(())
    }
}

pub const TEN_BUS_RUN_TOML: &str = r#"# Full pipeline on the 10-bus fixture.
[run]
out = "out"
seed = 7

[case]
dir = "case"

[climate]
path = "climate.csv"

[renewables]
specs = "specs.csv"

[load]
zonal = "zonal_load.csv"
factors = "factors.csv"

[rating]
modes = ["daily", "hourly"]

[scuc]
days = ["2019-07-01"]
limits = ["daily", "hourly"]
gap = 1e-3

[report]
kinds = ["prices", "congestion", "dlr-compare"]
svg = true
"#;

/// Ten Texas cities, two summer days.
pub fn ten_bus() -> PipelineFixture {
    let sites = [
        (29.76, -95.37),
        (32.78, -96.80),
        (30.27, -97.74),
        (29.42, -98.49),
        (32.45, -99.73),
        (31.99, -102.08),
        (27.80, -97.40),
        (32.35, -95.30),
        (33.58, -101.85),
        (31.55, -97.15),
    ];
    let buses: Vec<Bus> = sites.iter().enumerate().map(|(i, &(la, lo))| bus(i as BusId + 1, la, lo)).collect();
    let links = [
        (1, 3, "Kiwi"),
        (1, 7, "Bobolink"),
        (1, 8, "Bobolink"),
        (2, 8, "Finch"),
        (2, 10, "Kiwi"),
        (3, 4, "Bobolink"),
        (3, 10, "Kiwi"),
        (4, 7, "Finch"),
        (4, 5, "Finch"),
        (5, 6, "Bobolink"),
        (5, 9, "Finch"),
        (6, 9, "Finch"),
        (5, 10, "Bobolink"),
    ];
    let lines = links
        .iter()
        .enumerate()
        .map(|(k, &(a, b, c))| line_at(k as LineId + 1, &buses[a as usize - 1], &buses[b as usize - 1], c, 250.0, 138.0))
        .collect();
    let gens = vec![
        unit(1, 1, Fuel::NaturalGas, 700.0),
        unit(2, 2, Fuel::NaturalGas, 500.0),
        unit(3, 8, Fuel::Coal, 600.0),
        unit(4, 4, Fuel::NaturalGas, 350.0),
        unit(5, 3, Fuel::Hydro, 120.0),
        unit(6, 5, Fuel::Wind, 400.0),
        unit(7, 9, Fuel::Wind, 300.0),
        unit(8, 6, Fuel::Solar, 200.0),
    ];
    let case = GridCase::new(buses, lines, gens, None).expect("valid fixture");
    let start = hour_start(2019, 7, 1);
    let hours = 48;
    let climate = synthetic_climate(&case.buses, start, hours, 11, true);

    let mut zones: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for zone in case.zones() {
        let n = case.buses.iter().filter(|b| b.zone == zone).count() as f64;
        let series = (0..hours)
            .map(|h| {
                let local = ((start + Duration::hours(h as i64)).hour() as f64 - 6.0).rem_euclid(24.0);
                let shape = 0.72 + 0.28 * ((local - 11.0) / 24.0 * 2.0 * PI).sin();
                (130.0 * n * shape * 10.0).round() / 10.0
            })
            .collect();
        zones.insert(zone, series);
    }
    let zonal = ZonalLoadSeries { start, hours, zones };

    let mut weights = BTreeMap::new();
    for zone in case.zones() {
        let members: Vec<&Bus> = case.buses.iter().filter(|b| b.zone == zone).collect();
        let raw: Vec<f64> = members.iter().map(|b| (b.id % 3 + 1) as f64).collect();
        let total: f64 = raw.iter().sum();
        for (b, w) in members.iter().zip(raw) {
            weights.insert(b.id, w / total);
        }
    }

    let mut specs = RenewableSpecs::default();
    for g in &case.generators {
        match g.fuel {
            Fuel::Wind => specs.wind.push(WindFarmSpec::new(g.id, g.p_max)),
            Fuel::Solar => specs.solar.push(PvArraySpec::new(g.id, g.p_max)),
            _ => {}
        }
    }
    PipelineFixture {
        case,
        climate,
        zonal,
        factors: ParticipationFactors { weights },
        specs,
    }
}

/// A radial 3-bus case whose middle-to-load corridor binds: cheap supply at
/// bus 1, expensive supply and all load at bus 3.
#[derive(Debug, Clone)]
pub struct DlrFixture {
    pub case: GridCase,
    pub climate: ClimateSeries,
    pub load: ProfileSet,
    pub availability: ProfileSet,
    pub day: chrono::NaiveDate,
}

pub fn congested_three_bus() -> DlrFixture {
    let buses = vec![bus(1, 31.0, -100.0), bus(2, 31.2, -98.5), bus(3, 31.5, -97.0)];
    let lines = vec![
        line_between(1, &buses[0], &buses[1], "Finch", 500.0),
        line_between(2, &buses[1], &buses[2], "Finch", 500.0),
    ];
    let gens = vec![plain_unit(1, 1, 0.0, 1500.0, 15.0), plain_unit(2, 3, 0.0, 900.0, 60.0)];
    let case = GridCase::new(buses, lines, gens, None).expect("valid fixture");
    let start = hour_start(2019, 7, 15);
    let climate = ClimateSeries::from_records(synthetic_climate(&case.buses, start, 24, 5, true), FillPolicy::Reject)
        .expect("complete")
        .0;
    let mut load = ProfileSet::new(start, 24);
    load.insert(3, vec![1100.0; 24]).expect("24 values");
    DlrFixture {
        case,
        climate,
        load,
        availability: ProfileSet::new(start, 24),
        day: start.date_naive(),
    }
}

fn instance(case: GridCase, load: BTreeMap<BusId, Vec<f64>>, hours: usize, limits: Option<LineLimits>) -> ScucInstance {
    let limits = limits.unwrap_or_else(|| static_limits(&case));
    let mut inst = ScucInstance::new(case, hour_start(2019, 1, 3), hours, load, BTreeMap::new(), limits);
    inst.reserve_fraction = 0.0;
    inst
}

/// Cheap unit (10 $/MWh) behind a 50 MW line, expensive unit (40 $/MWh) at
/// the 80 MW load bus.
pub fn two_bus_congested() -> ScucInstance {
    let buses = vec![bus(1, 30.0, -97.0), bus(2, 30.5, -96.5)];
    let lines = vec![line_between(1, &buses[0], &buses[1], "Bobolink", 50.0)];
    let gens = vec![plain_unit(1, 1, 0.0, 200.0, 10.0), plain_unit(2, 2, 0.0, 200.0, 40.0)];
    instance(GridCase::new(buses, lines, gens, None).expect("valid"), [(2, vec![80.0])].into(), 1, None)
}

/// Same network with a 500 MW line: the 25 $/MWh unit sets every price.
pub fn two_bus_uncongested() -> ScucInstance {
    let buses = vec![bus(1, 30.0, -97.0), bus(2, 30.5, -96.5)];
    let lines = vec![line_between(1, &buses[0], &buses[1], "Bobolink", 500.0)];
    let gens = vec![plain_unit(1, 1, 0.0, 200.0, 25.0), plain_unit(2, 2, 0.0, 200.0, 60.0)];
    instance(GridCase::new(buses, lines, gens, None).expect("valid"), [(1, vec![30.0]), (2, vec![50.0])].into(), 1, None)
}

/// Three units on one bus over four hours with no-load, start and
/// quadratic costs, minimum up/down times, a ramp limit and reserve.
pub fn single_bus_toy() -> ScucInstance {
    let mut a = plain_unit(1, 1, 20.0, 100.0, 15.0);
    a.cost = GeneratorCostSpec::flat(100.0, 15.0, 0.01, 300.0, 0.0);
    a.min_on = 2;
    a.ramp_rate = 0.5;
    let mut b = plain_unit(2, 1, 10.0, 60.0, 25.0);
    b.cost = GeneratorCostSpec::flat(20.0, 25.0, 0.0, 50.0, 10.0);
    b.min_off = 2;
    let mut c = plain_unit(3, 1, 5.0, 40.0, 45.0);
    c.cost = GeneratorCostSpec::flat(0.0, 45.0, 0.05, 0.0, 0.0);
    let case = GridCase::new(vec![bus(1, 30.0, -97.0)], vec![], vec![a, b, c], None).expect("valid");
    let mut inst = instance(case, [(1, vec![40.0, 95.0, 150.0, 70.0])].into(), 4, None);
    inst.reserve_fraction = 0.05;
    inst
}

/// Triangle network, one unit per bus, four hours with hourly limits on
/// the line feeding the load bus.
pub fn triangle_four_hours() -> ScucInstance {
    let buses = vec![bus(1, 30.0, -97.5), bus(2, 30.6, -97.0), bus(3, 30.2, -96.6)];
    let lines = vec![
        line_between(1, &buses[0], &buses[1], "Finch", 120.0),
        line_between(2, &buses[1], &buses[2], "Finch", 120.0),
        line_between(3, &buses[0], &buses[2], "Finch", 60.0),
    ];
    let mut g1 = plain_unit(1, 1, 10.0, 200.0, 12.0);
    g1.cost = GeneratorCostSpec::flat(50.0, 12.0, 0.0, 200.0, 0.0);
    g1.min_on = 2;
    let mut g2 = plain_unit(2, 2, 0.0, 120.0, 30.0);
    g2.cost = GeneratorCostSpec::flat(10.0, 30.0, 0.02, 40.0, 0.0);
    let mut g3 = plain_unit(3, 3, 5.0, 100.0, 55.0);
    g3.cost = GeneratorCostSpec::flat(0.0, 55.0, 0.0, 20.0, 5.0);
    let case = GridCase::new(buses, lines, vec![g1, g2, g3], None).expect("valid");
    let limits = LineLimits::PerHour(
        [
            (1, vec![120.0, 130.0, 140.0, 120.0]),
            (2, vec![120.0, 125.0, 150.0, 120.0]),
            (3, vec![60.0, 70.0, 80.0, 60.0]),
        ]
        .into(),
    );
    let mut inst = instance(case, [(3, vec![90.0, 160.0, 210.0, 120.0])].into(), 4, Some(limits));
    inst.reserve_fraction = 0.03;
    inst
}

/// Instances small enough for exhaustive enumeration, by name.
pub fn enumeration_fixtures() -> Vec<(&'static str, ScucInstance)> {
    vec![
        ("two_bus_congested", two_bus_congested()),
        ("two_bus_uncongested", two_bus_uncongested()),
        ("single_bus_toy", single_bus_toy()),
        ("triangle_four_hours", triangle_four_hours()),
    ]
}
