//! Case directories: `buses.csv`, `lines.csv`, `generators.csv`, plus an
//! optional `case.toml` holding the reference bus and MVA base.

use std::fs::{self, File};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Bus, BusId, CaseError, Fuel, Generator, GeneratorCostSpec, GridCase, Line, DEFAULT_BASE_MVA};

#[derive(Debug, Serialize, Deserialize)]
struct BusRecord {
    bus_id: u32,
    lat: f64,
    lon: f64,
    zone: String,
    base_kv: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LineRecord {
    line_id: u32,
    from_bus: u32,
    to_bus: u32,
    reactance_pu: f64,
    conductor: String,
    length_km: f64,
    voltage_kv: f64,
    static_rating_mva: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct GeneratorRecord {
    gen_id: u32,
    bus_id: u32,
    fuel: String,
    pmax_mw: f64,
    pmin_mw: f64,
    qmax_mvar: f64,
    qmin_mvar: f64,
    c0: f64,
    c1: f64,
    c2: f64,
    startup_cost: f64,
    shutdown_cost: f64,
    ramp_mw_min: f64,
    min_on_h: u32,
    min_off_h: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct CaseMeta {
    reference_bus: Option<BusId>,
    base_mva: Option<f64>,
}

fn read_records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CaseError> {
    if !path.exists() {
        return Err(CaseError::MissingFile(path.to_path_buf()));
    }
    let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in reader.deserialize().enumerate() {
        let rec: T = rec.map_err(|e| CaseError::Parse {
            file: file.clone(),
            record: i as u64 + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn load_case(dir: impl AsRef<Path>) -> Result<GridCase, CaseError> {
    let dir = dir.as_ref();
    let buses: Vec<Bus> = read_records::<BusRecord>(&dir.join("buses.csv"))?
        .into_iter()
        .map(|r| Bus {
            id: r.bus_id,
            latitude: r.lat,
            longitude: r.lon,
            zone: r.zone,
            base_kv: r.base_kv,
        })
        .collect();
    let lines: Vec<Line> = read_records::<LineRecord>(&dir.join("lines.csv"))?
        .into_iter()
        .map(|r| Line {
            id: r.line_id,
            from_bus: r.from_bus,
            to_bus: r.to_bus,
            reactance: r.reactance_pu,
            conductor: r.conductor,
            length_km: r.length_km,
            voltage_kv: r.voltage_kv,
            static_rating: r.static_rating_mva,
        })
        .collect();
    let mut generators = Vec::new();
    for (i, r) in read_records::<GeneratorRecord>(&dir.join("generators.csv"))?
        .into_iter()
        .enumerate()
    {
        let fuel: Fuel = r.fuel.parse().map_err(|_| CaseError::Parse {
            file: "generators.csv".into(),
            record: i as u64 + 1,
            message: format!("unknown fuel '{}'", r.fuel),
        })?;
        generators.push(Generator {
            id: r.gen_id,
            bus: r.bus_id,
            fuel,
            p_max: r.pmax_mw,
            p_min: r.pmin_mw,
            q_max: r.qmax_mvar,
            q_min: r.qmin_mvar,
            cost: GeneratorCostSpec::flat(r.c0, r.c1, r.c2, r.startup_cost, r.shutdown_cost),
            ramp_rate: r.ramp_mw_min,
            min_on: r.min_on_h,
            min_off: r.min_off_h,
        });
    }

    let meta_path = dir.join("case.toml");
    let meta = if meta_path.exists() {
        let text = fs::read_to_string(&meta_path)?;
        toml::from_str::<CaseMeta>(&text).map_err(|e| CaseError::Parse {
            file: "case.toml".into(),
            record: 0,
            message: e.to_string(),
        })?
    } else {
        CaseMeta {
            reference_bus: None,
            base_mva: None,
        }
    };
    let case = GridCase::new(buses, lines, generators, meta.reference_bus)?;
    Ok(case.with_base_mva(meta.base_mva.unwrap_or(DEFAULT_BASE_MVA)))
}

pub fn save_case(case: &GridCase, dir: impl AsRef<Path>) -> Result<(), CaseError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;

    let mut w = csv::Writer::from_writer(File::create(dir.join("buses.csv"))?);
    for b in &case.buses {
        w.serialize(BusRecord {
            bus_id: b.id,
            lat: b.latitude,
            lon: b.longitude,
            zone: b.zone.clone(),
            base_kv: b.base_kv,
        })?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(File::create(dir.join("lines.csv"))?);
    for l in &case.lines {
        w.serialize(LineRecord {
            line_id: l.id,
            from_bus: l.from_bus,
            to_bus: l.to_bus,
            reactance_pu: l.reactance,
            conductor: l.conductor.clone(),
            length_km: l.length_km,
            voltage_kv: l.voltage_kv,
            static_rating_mva: l.static_rating,
        })?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(File::create(dir.join("generators.csv"))?);
    for g in &case.generators {
        w.serialize(GeneratorRecord {
            gen_id: g.id,
            bus_id: g.bus,
            fuel: g.fuel.to_string(),
            pmax_mw: g.p_max,
            pmin_mw: g.p_min,
            qmax_mvar: g.q_max,
            qmin_mvar: g.q_min,
            c0: g.cost.c0,
            c1: g.cost.c1,
            c2: g.cost.c2,
            startup_cost: g.startup_cost(),
            shutdown_cost: g.cost.shutdown_cost,
            ramp_mw_min: g.ramp_rate,
            min_on_h: g.min_on,
            min_off_h: g.min_off,
        })?;
    }
    w.flush()?;

    let lowest = case.buses.iter().map(|b| b.id).min();
    let meta_path = dir.join("case.toml");
    if Some(case.reference_bus) != lowest || case.base_mva != DEFAULT_BASE_MVA {
        let meta = CaseMeta {
            reference_bus: Some(case.reference_bus),
            base_mva: Some(case.base_mva),
        };
        fs::write(&meta_path, toml::to_string(&meta).expect("meta serializes"))?;
    } else if meta_path.exists() {
        fs::remove_file(&meta_path)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::tests::three_bus;
    use super::*;

    #[test]
    fn round_trip_three_bus() {
        let dir = tempfile::tempdir().unwrap();
        let case = three_bus();
        save_case(&case, dir.path()).unwrap();
        let back = load_case(dir.path()).unwrap();
        assert_eq!(back, case);
    }

    #[test]
    fn reference_bus_survives_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut case = three_bus();
        case.reference_bus = 3;
        case.base_mva = 250.0;
        save_case(&case, dir.path()).unwrap();
        assert_eq!(load_case(dir.path()).unwrap(), case);
    }

    #[test]
    fn missing_file_reported() {
        let dir = tempfile::tempdir().unwrap();
        save_case(&three_bus(), dir.path()).unwrap();
        fs::remove_file(dir.path().join("lines.csv")).unwrap();
        match load_case(dir.path()) {
            Err(CaseError::MissingFile(p)) => assert!(p.ends_with("lines.csv")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = save_case(&three_bus(), blocker.join("case")).unwrap_err();
        assert!(matches!(err, CaseError::Io(_)), "{err}");
    }

    #[test]
    fn unknown_fuel_in_file() {
        let dir = tempfile::tempdir().unwrap();
        save_case(&three_bus(), dir.path()).unwrap();
        let p = dir.path().join("generators.csv");
        let text = fs::read_to_string(&p).unwrap().replace("natural_gas", "peat");
        fs::write(&p, text).unwrap();
        assert!(matches!(load_case(dir.path()), Err(CaseError::Parse { record: 1, .. })));
    }
}
