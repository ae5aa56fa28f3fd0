use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use super::{ConductorSpec, RatingError};

const BUILTIN: &str = include_str!("../../data/conductors.csv");

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConductorCatalog {
    entries: BTreeMap<String, ConductorSpec>,
}

impl ConductorCatalog {
    pub fn get(&self, name: &str) -> Option<&ConductorSpec> {
        self.entries.get(name)
    }

    pub fn insert(&mut self, spec: ConductorSpec) {
        self.entries.insert(spec.name.clone(), spec);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

#[derive(Deserialize)]
struct Row {
    name: String,
    diameter_m: f64,
    area_m2_per_m: f64,
    r_low_ohm_m: f64,
    t_low_c: f64,
    r_high_ohm_m: f64,
    t_high_c: f64,
    emissivity: f64,
    absorptivity: f64,
    tmax_c: f64,
}

fn parse(reader: impl Read) -> Result<ConductorCatalog, RatingError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut cat = ConductorCatalog::default();
    for row in r.deserialize::<Row>() {
        let row = row?;
        let spec = ConductorSpec {
            name: row.name,
            diameter: row.diameter_m,
            area: row.area_m2_per_m,
            r_low: row.r_low_ohm_m,
            t_low: row.t_low_c,
            r_high: row.r_high_ohm_m,
            t_high: row.t_high_c,
            emissivity: row.emissivity,
            absorptivity: row.absorptivity,
            max_temp: row.tmax_c,
        };
        spec.validate()?;
        cat.insert(spec);
    }
    Ok(cat)
}

/// The built-in ACSR types.
pub fn default_catalog() -> ConductorCatalog {
    parse(BUILTIN.as_bytes()).expect("built-in conductor table is valid")
}

/// Built-in types, extended or overridden by a CSV of the same layout.
pub fn read_catalog(path: impl AsRef<Path>) -> Result<ConductorCatalog, RatingError> {
    let mut cat = default_catalog();
    for (_, spec) in parse(std::fs::File::open(path)?)?.entries {
        cat.insert(spec);
    }
    Ok(cat)
}
