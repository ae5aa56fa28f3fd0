use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::Duration;
use serde::{Deserialize, Serialize};

use super::{InitialState, ScucError, ScucInstance, ScucSolution, SolveStatus};
use crate::climate::format_timestamp;
use crate::grid::GenId;
use crate::profile::ProfileSet;

#[derive(Debug, Serialize, Deserialize)]
struct InitialRow {
    gen_id: GenId,
    on: u8,
    hours: u32,
    power_mw: f64,
}

/// Reads `gen_id,on,hours,power_mw`.
pub fn read_initial_states(path: impl AsRef<Path>) -> Result<BTreeMap<GenId, InitialState>, ScucError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = BTreeMap::new();
    for row in r.deserialize::<InitialRow>() {
        let row = row?;
        out.insert(
            row.gen_id,
            InitialState {
                on: row.on != 0,
                hours: row.hours,
                power: row.power_mw,
            },
        );
    }
    Ok(out)
}

pub fn write_initial_states(states: &BTreeMap<GenId, InitialState>, path: impl AsRef<Path>) -> Result<(), ScucError> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    for (&gen_id, s) in states {
        w.serialize(InitialRow {
            gen_id,
            on: s.on as u8,
            hours: s.hours,
            power_mw: s.power,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct SolutionFiles {
    pub paths: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Summary<'a> {
    #[serde(flatten)]
    status: &'a SolveStatus,
    objective: f64,
    best_bound: f64,
    nodes: usize,
    start: String,
    hours: usize,
}

fn profile(inst: &ScucInstance, series: &BTreeMap<u32, Vec<f64>>) -> ProfileSet {
    ProfileSet {
        start: inst.start,
        hours: inst.hours,
        series: series.clone(),
    }
}

/// Writes commitment, dispatch, flow and price CSVs plus a JSON summary.
pub fn write_solution(inst: &ScucInstance, sol: &ScucSolution, dir: impl AsRef<Path>) -> Result<SolutionFiles, ScucError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut files = SolutionFiles::default();
    let stamp = |t: usize| format_timestamp(&(inst.start + Duration::hours(t as i64)));
    let profile_err = |e: crate::profile::ProfileError| ScucError::Malformed(e.to_string());

    let path = dir.join("commitment.csv");
    let mut w = csv::Writer::from_writer(File::create(&path)?);
    w.write_record(["gen_id", "timestamp", "u", "startup", "shutdown"])?;
    for (g, u) in &sol.commitment {
        for (t, &on) in u.iter().enumerate() {
            let bit = |v: bool| (v as u8).to_string();
            w.write_record([
                g.to_string(),
                stamp(t),
                bit(on),
                bit(sol.startup[g][t]),
                bit(sol.shutdown[g][t]),
            ])?;
        }
    }
    w.flush()?;
    files.paths.push(path);

    let path = dir.join("dispatch.csv");
    profile(inst, &sol.dispatch).write_csv(&path, "gen_id", "p_mw").map_err(profile_err)?;
    files.paths.push(path);

    let path = dir.join("flows.csv");
    let mut w = csv::Writer::from_writer(File::create(&path)?);
    w.write_record(["line_id", "timestamp", "flow_mw", "limit_mw"])?;
    for (l, f) in &sol.flows {
        for (t, v) in f.iter().enumerate() {
            w.write_record([l.to_string(), stamp(t), v.to_string(), inst.limit(*l, t).to_string()])?;
        }
    }
    w.flush()?;
    files.paths.push(path);

    let path = dir.join("lmp.csv");
    profile(inst, &sol.lmp).write_csv(&path, "bus_id", "lmp_usd_mwh").map_err(profile_err)?;
    files.paths.push(path);

    if !sol.shed.is_empty() {
        let path = dir.join("shed.csv");
        profile(inst, &sol.shed).write_csv(&path, "bus_id", "shed_mw").map_err(profile_err)?;
        files.paths.push(path);
    }

    let path = dir.join("summary.json");
    let summary = Summary {
        status: &sol.status,
        objective: sol.objective,
        best_bound: sol.best_bound,
        nodes: sol.nodes,
        start: format_timestamp(&inst.start),
        hours: inst.hours,
    };
    std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")?;
    files.paths.push(path);
    Ok(files)
}
