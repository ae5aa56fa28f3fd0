//! Electrical test-case data model: buses, lines, generators and the case
//! that ties them together.

mod io;
mod params;

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use io::{load_case, save_case};
pub use params::{
    default_params, default_params_with, startup_cost, FuelPrices, GeneratorDefaults, COAL_PRICE, GAS_PRICE,
};

pub type BusId = u32;
pub type LineId = u32;
pub type GenId = u32;

/// Per-unit base used when converting reactances to MW flows.
pub const DEFAULT_BASE_MVA: f64 = 100.0;

#[derive(Debug, thiserror::Error)]
pub enum CaseError {
    #[error("missing case file {0}")]
    MissingFile(PathBuf),
    #[error("{file}: record {record}: {message}")]
    Parse {
        file: String,
        record: u64,
        message: String,
    },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: u32 },
    #[error("{kind} {id}: {field} refers to unknown bus {target}")]
    DanglingReference {
        kind: &'static str,
        id: u32,
        field: &'static str,
        target: BusId,
    },
    #[error("{kind} {id}: {message}")]
    InvalidRecord {
        kind: &'static str,
        id: u32,
        message: String,
    },
    #[error("network is disconnected into {} islands: {}", islands.len(), format_islands(islands))]
    Disconnected { islands: Vec<Vec<BusId>> },
    #[error("case has no buses")]
    Empty,
    #[error("reference bus {0} is not in the case")]
    BadReference(BusId),
    #[error("unknown fuel '{0}'")]
    UnknownFuel(String),
    #[error("capacity must be positive, got {0}")]
    BadCapacity(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_islands(islands: &[Vec<BusId>]) -> String {
    islands
        .iter()
        .map(|isl| format!("{isl:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fuel {
    Coal,
    NaturalGas,
    Nuclear,
    Hydro,
    Wind,
    Solar,
}

impl Fuel {
    pub const ALL: [Fuel; 6] = [
        Fuel::Coal,
        Fuel::NaturalGas,
        Fuel::Nuclear,
        Fuel::Hydro,
        Fuel::Wind,
        Fuel::Solar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Fuel::Coal => "coal",
            Fuel::NaturalGas => "natural_gas",
            Fuel::Nuclear => "nuclear",
            Fuel::Hydro => "hydro",
            Fuel::Wind => "wind",
            Fuel::Solar => "solar",
        }
    }

    /// Wind and solar: weather-driven availability, no commitment decision.
    pub fn is_renewable(self) -> bool {
        matches!(self, Fuel::Wind | Fuel::Solar)
    }
}

impl fmt::Display for Fuel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Fuel {
    type Err = CaseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        match norm.as_str() {
            "coal" => Ok(Fuel::Coal),
            "natural_gas" | "gas" | "ng" => Ok(Fuel::NaturalGas),
            "nuclear" => Ok(Fuel::Nuclear),
            "hydro" => Ok(Fuel::Hydro),
            "wind" => Ok(Fuel::Wind),
            "solar" | "pv" => Ok(Fuel::Solar),
            _ => Err(CaseError::UnknownFuel(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    /// Degrees north.
    pub latitude: f64,
    /// Degrees east.
    pub longitude: f64,
    pub zone: String,
    pub base_kv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: LineId,
    pub from_bus: BusId,
    pub to_bus: BusId,
    /// Per unit on the case base.
    pub reactance: f64,
    /// Key into the conductor catalog.
    pub conductor: String,
    pub length_km: f64,
    /// Line-to-line kV.
    pub voltage_kv: f64,
    pub static_rating: f64,
}

/// Operating cost model: quadratic running cost plus startup and shutdown
/// charges.
///
/// Startup cost is `η·P_max·C_F + P_su·C_o`. A flat startup charge `S`
/// (as stored in case files) is carried as `P_su = 1 MW`, `C_o = S $/MW`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorCostSpec {
    /// $/h
    pub c0: f64,
    /// $/MWh
    pub c1: f64,
    /// $/MW²h
    pub c2: f64,
    /// MMBtu per MW of capacity.
    pub startup_fuel_per_capacity: f64,
    /// $/MMBtu
    pub fuel_price: f64,
    /// MW
    pub startup_power: f64,
    /// $/MW
    pub startup_power_cost: f64,
    /// $
    pub shutdown_cost: f64,
}

impl GeneratorCostSpec {
    pub fn zero() -> Self {
        Self {
            c0: 0.0,
            c1: 0.0,
            c2: 0.0,
            startup_fuel_per_capacity: 0.0,
            fuel_price: 0.0,
            startup_power: 0.0,
            startup_power_cost: 0.0,
            shutdown_cost: 0.0,
        }
    }

    /// Linear-cost spec with flat startup and shutdown charges.
    pub fn flat(c0: f64, c1: f64, c2: f64, startup: f64, shutdown: f64) -> Self {
        let mut spec = Self::zero();
        spec.c0 = c0;
        spec.c1 = c1;
        spec.c2 = c2;
        if startup != 0.0 {
            spec.startup_power = 1.0;
            spec.startup_power_cost = startup;
        }
        spec.shutdown_cost = shutdown;
        spec
    }

    pub fn running_cost(&self, p: f64) -> f64 {
        self.c0 + self.c1 * p + self.c2 * p * p
    }

    pub fn startup_cost(&self, p_max: f64) -> f64 {
        startup_cost(self, p_max)
    }

    fn validate(&self) -> Result<(), String> {
        if self.c2 < 0.0 {
            return Err(format!("quadratic cost coefficient {} is negative", self.c2));
        }
        let prices = [
            ("c0", self.c0),
            ("c1", self.c1),
            ("startup fuel", self.startup_fuel_per_capacity),
            ("fuel price", self.fuel_price),
            ("startup power", self.startup_power),
            ("startup power cost", self.startup_power_cost),
            ("shutdown cost", self.shutdown_cost),
        ];
        for (name, v) in prices {
            if !(v >= 0.0) {
                return Err(format!("{name} must be non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: GenId,
    pub bus: BusId,
    pub fuel: Fuel,
    pub p_max: f64,
    pub p_min: f64,
    pub q_max: f64,
    pub q_min: f64,
    pub cost: GeneratorCostSpec,
    /// MW/min
    pub ramp_rate: f64,
    /// Hours.
    pub min_on: u32,
    /// Hours.
    pub min_off: u32,
}

impl Generator {
    pub fn startup_cost(&self) -> f64 {
        self.cost.startup_cost(self.p_max)
    }

    fn validate(&self) -> Result<(), String> {
        if !(self.p_min >= 0.0 && self.p_min <= self.p_max) {
            return Err(format!("needs 0 <= p_min ({}) <= p_max ({})", self.p_min, self.p_max));
        }
        if !(self.ramp_rate >= 0.0) {
            return Err(format!("ramp rate {} is negative", self.ramp_rate));
        }
        if self.fuel.is_renewable() && self.p_min != 0.0 {
            return Err(format!("{} units must have p_min = 0", self.fuel));
        }
        self.cost.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCase {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub reference_bus: BusId,
    pub base_mva: f64,
}

impl GridCase {
    /// Builds and validates a case. The reference bus defaults to the lowest
    /// bus id.
    pub fn new(
        buses: Vec<Bus>,
        lines: Vec<Line>,
        generators: Vec<Generator>,
        reference_bus: Option<BusId>,
    ) -> Result<Self, CaseError> {
        let reference_bus = match reference_bus {
            Some(b) => b,
            None => buses.iter().map(|b| b.id).min().ok_or(CaseError::Empty)?,
        };
        let case = Self {
            buses,
            lines,
            generators,
            reference_bus,
            base_mva: DEFAULT_BASE_MVA,
        };
        case.validate()?;
        Ok(case)
    }

    pub fn with_base_mva(mut self, base_mva: f64) -> Self {
        self.base_mva = base_mva;
        self
    }

    pub fn validate(&self) -> Result<(), CaseError> {
        if self.buses.is_empty() {
            return Err(CaseError::Empty);
        }
        let mut ids = HashSet::new();
        for b in &self.buses {
            if !ids.insert(b.id) {
                return Err(CaseError::DuplicateId { kind: "bus", id: b.id });
            }
            let invalid = |message: String| CaseError::InvalidRecord {
                kind: "bus",
                id: b.id,
                message,
            };
            if !(-90.0..=90.0).contains(&b.latitude) {
                return Err(invalid(format!("latitude {} outside [-90, 90]", b.latitude)));
            }
            if !(-180.0..=180.0).contains(&b.longitude) {
                return Err(invalid(format!("longitude {} outside [-180, 180]", b.longitude)));
            }
            if b.zone.trim().is_empty() {
                return Err(invalid("empty weather zone".into()));
            }
        }
        let mut line_ids = HashSet::new();
        for l in &self.lines {
            if !line_ids.insert(l.id) {
                return Err(CaseError::DuplicateId { kind: "line", id: l.id });
            }
            for (field, target) in [("from_bus", l.from_bus), ("to_bus", l.to_bus)] {
                if !ids.contains(&target) {
                    return Err(CaseError::DanglingReference {
                        kind: "line",
                        id: l.id,
                        field,
                        target,
                    });
                }
            }
            let invalid = |message: String| CaseError::InvalidRecord {
                kind: "line",
                id: l.id,
                message,
            };
            if l.from_bus == l.to_bus {
                return Err(invalid("from_bus equals to_bus".into()));
            }
            if !(l.reactance > 0.0) {
                return Err(invalid(format!("reactance {} must be positive", l.reactance)));
            }
            if !(l.length_km > 0.0) {
                return Err(invalid(format!("length {} must be positive", l.length_km)));
            }
            if !(l.static_rating > 0.0) {
                return Err(invalid(format!("static rating {} must be positive", l.static_rating)));
            }
        }
        let mut gen_ids = HashSet::new();
        for g in &self.generators {
            if !gen_ids.insert(g.id) {
                return Err(CaseError::DuplicateId { kind: "generator", id: g.id });
            }
            if !ids.contains(&g.bus) {
                return Err(CaseError::DanglingReference {
                    kind: "generator",
                    id: g.id,
                    field: "bus_id",
                    target: g.bus,
                });
            }
            g.validate().map_err(|message| CaseError::InvalidRecord {
                kind: "generator",
                id: g.id,
                message,
            })?;
        }
        if !ids.contains(&self.reference_bus) {
            return Err(CaseError::BadReference(self.reference_bus));
        }
        let islands = self.islands();
        if islands.len() > 1 {
            return Err(CaseError::Disconnected { islands });
        }
        Ok(())
    }

    /// Connected components over buses and lines, each sorted, ordered by
    /// smallest member.
    pub fn islands(&self) -> Vec<Vec<BusId>> {
        let ids: BTreeSet<BusId> = self.buses.iter().map(|b| b.id).collect();
        connected_components(&ids, self.lines.iter().map(|l| (l.from_bus, l.to_bus)))
    }

    /// Sorted, de-duplicated weather zones.
    pub fn zones(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.buses.iter().map(|b| b.zone.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn bus(&self, id: BusId) -> Option<&Bus> {
        self.buses.iter().find(|b| b.id == id)
    }

    pub fn generator(&self, id: GenId) -> Option<&Generator> {
        self.generators.iter().find(|g| g.id == id)
    }

    /// Bus id → position in `buses`.
    pub fn bus_index(&self) -> BTreeMap<BusId, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    pub fn total_capacity(&self) -> f64 {
        self.generators.iter().map(|g| g.p_max).sum()
    }

    /// Same data up to record order, with numeric fields equal to `rel`
    /// relative tolerance and startup charges compared by value.
    pub fn approx_eq(&self, other: &GridCase, rel: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= rel * a.abs().max(b.abs()) || a == b;
        let mut b1 = self.buses.clone();
        let mut b2 = other.buses.clone();
        b1.sort_by_key(|b| b.id);
        b2.sort_by_key(|b| b.id);
        let buses_ok = b1.len() == b2.len()
            && b1.iter().zip(&b2).all(|(a, b)| {
                a.id == b.id
                    && a.zone == b.zone
                    && close(a.latitude, b.latitude)
                    && close(a.longitude, b.longitude)
                    && close(a.base_kv, b.base_kv)
            });
        let mut l1 = self.lines.clone();
        let mut l2 = other.lines.clone();
        l1.sort_by_key(|l| l.id);
        l2.sort_by_key(|l| l.id);
        let lines_ok = l1.len() == l2.len()
            && l1.iter().zip(&l2).all(|(a, b)| {
                a.id == b.id
                    && a.from_bus == b.from_bus
                    && a.to_bus == b.to_bus
                    && a.conductor == b.conductor
                    && close(a.reactance, b.reactance)
                    && close(a.length_km, b.length_km)
                    && close(a.voltage_kv, b.voltage_kv)
                    && close(a.static_rating, b.static_rating)
            });
        let mut g1 = self.generators.clone();
        let mut g2 = other.generators.clone();
        g1.sort_by_key(|g| g.id);
        g2.sort_by_key(|g| g.id);
        let gens_ok = g1.len() == g2.len()
            && g1.iter().zip(&g2).all(|(a, b)| {
                a.id == b.id
                    && a.bus == b.bus
                    && a.fuel == b.fuel
                    && a.min_on == b.min_on
                    && a.min_off == b.min_off
                    && [
                        (a.p_max, b.p_max),
                        (a.p_min, b.p_min),
                        (a.q_max, b.q_max),
                        (a.q_min, b.q_min),
                        (a.ramp_rate, b.ramp_rate),
                        (a.cost.c0, b.cost.c0),
                        (a.cost.c1, b.cost.c1),
                        (a.cost.c2, b.cost.c2),
                        (a.cost.shutdown_cost, b.cost.shutdown_cost),
                        (a.startup_cost(), b.startup_cost()),
                    ]
                    .iter()
                    .all(|&(x, y)| close(x, y))
            });
        buses_ok && lines_ok && gens_ok && self.reference_bus == other.reference_bus
    }
}

pub(crate) fn connected_components(
    ids: &BTreeSet<BusId>,
    edges: impl Iterator<Item = (BusId, BusId)>,
) -> Vec<Vec<BusId>> {
    let mut adj: BTreeMap<BusId, Vec<BusId>> = ids.iter().map(|&b| (b, Vec::new())).collect();
    for (a, b) in edges {
        if let (true, true) = (adj.contains_key(&a), adj.contains_key(&b)) {
            adj.get_mut(&a).unwrap().push(b);
            adj.get_mut(&b).unwrap().push(a);
        }
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &start in ids {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = vec![start];
        seen.insert(start);
        let mut queue = VecDeque::from([start]);
        while let Some(b) = queue.pop_front() {
            for &nb in &adj[&b] {
                if seen.insert(nb) {
                    comp.push(nb);
                    queue.push_back(nb);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn bus(id: BusId, lat: f64, lon: f64, zone: &str) -> Bus {
        Bus {
            id,
            latitude: lat,
            longitude: lon,
            zone: zone.into(),
            base_kv: 345.0,
        }
    }

    pub fn line(id: LineId, from: BusId, to: BusId, x: f64, rating: f64) -> Line {
        Line {
            id,
            from_bus: from,
            to_bus: to,
            reactance: x,
            conductor: "Bobolink".into(),
            length_km: 50.0,
            voltage_kv: 345.0,
            static_rating: rating,
        }
    }

    pub fn thermal(id: GenId, bus: BusId, p_min: f64, p_max: f64, c1: f64) -> Generator {
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

    pub fn three_bus() -> GridCase {
        GridCase::new(
            vec![bus(1, 29.76, -95.37, "Coast"), bus(2, 30.27, -97.74, "SouthCentral"), bus(3, 32.78, -96.80, "North")],
            vec![line(1, 1, 2, 0.1, 500.0), line(2, 2, 3, 0.1, 500.0)],
            vec![thermal(1, 1, 10.0, 200.0, 20.0)],
            None,
        )
        .unwrap()
    }

    #[test]
    fn three_bus_fixture_is_connected() {
        let c = three_bus();
        assert_eq!(c.buses.len(), 3);
        assert_eq!(c.islands().len(), 1);
        assert_eq!(c.reference_bus, 1);
    }

    #[test]
    fn dangling_line_reference() {
        let err = GridCase::new(
            vec![bus(1, 30.0, -97.0, "A"), bus(2, 31.0, -97.0, "A")],
            vec![line(1, 1, 999, 0.1, 100.0)],
            vec![],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, CaseError::DanglingReference { target: 999, .. }), "{err}");
    }

    #[test]
    fn two_islands_listed() {
        // 4 buses, one line 1-2: components {1,2}, {3}, {4}
        let err = GridCase::new(
            vec![
                bus(1, 30.0, -97.0, "A"),
                bus(2, 31.0, -97.0, "A"),
                bus(3, 32.0, -97.0, "A"),
                bus(4, 33.0, -97.0, "A"),
            ],
            vec![line(1, 1, 2, 0.1, 100.0)],
            vec![],
            None,
        )
        .unwrap_err();
        match err {
            CaseError::Disconnected { islands } => assert_eq!(islands, vec![vec![1, 2], vec![3], vec![4]]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn duplicate_bus_and_bad_coordinates() {
        let dup = GridCase::new(vec![bus(1, 30.0, -97.0, "A"), bus(1, 31.0, -97.0, "A")], vec![], vec![], None);
        assert!(matches!(dup, Err(CaseError::DuplicateId { kind: "bus", id: 1 })));
        let lat = GridCase::new(vec![bus(1, 95.0, -97.0, "A")], vec![], vec![], None);
        assert!(matches!(lat, Err(CaseError::InvalidRecord { .. })));
    }

    #[test]
    fn renewable_with_pmin_rejected() {
        let mut g = thermal(1, 1, 5.0, 50.0, 0.0);
        g.fuel = Fuel::Wind;
        let r = GridCase::new(vec![bus(1, 30.0, -97.0, "A")], vec![], vec![g], None);
        assert!(matches!(r, Err(CaseError::InvalidRecord { kind: "generator", .. })));
    }

    #[test]
    fn fuel_names_round_trip() {
        for f in Fuel::ALL {
            assert_eq!(f.as_str().parse::<Fuel>().unwrap(), f);
        }
        assert!("peat".parse::<Fuel>().is_err());
    }
}
