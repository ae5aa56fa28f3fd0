//! End-to-end runs driven by one configuration file.

mod config;
mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{DateTime, NaiveDate, Timelike, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{
    CaseSection, ClimateSection, LimitMode, LoadSection, RatingSection, RenewablesSection, ReportKind, ReportSection,
    RunConfig, RunSection, ScucSection, Stage,
};
pub use report::{read_outcome, report, PriceRange, ReportError, OUTCOME_FILE};

use crate::climate::{format_timestamp, parse_timestamp, ClimateSeries};
use crate::grid::{load_case, save_case, GenId, GridCase};
use crate::load::{disaggregate, uniform_factors, ParticipationFactors, ZonalLoadSeries};
use crate::profile::ProfileSet;
use crate::rating::{default_catalog, dlr_profiles, read_catalog, ConductorCatalog, LineRatings, RatingMode, RatingOptions};
use crate::reduction::{aggregate, case_points, kmedoids, Aggregation};
use crate::renewable::{
    calibrate, generate_profiles, hub_speeds, read_specs, write_specs, CalibrationProblem, CalibrationResult,
    ProfileOptions, RenewableError, RenewableSpecs,
};
use crate::scuc::{
    build, congestion, day_instance, read_initial_states, solve_with_hint, write_solution, InitialState, RunOutcome,
    ScucError, ScucOptions,
};

/// Line-hours within this fraction of their limit count as congested.
pub const CONGESTION_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: Stage, message: String },
}

impl PipelineError {
    /// Process exit status for the command line.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 2,
            PipelineError::Stage { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub seconds: f64,
    /// False when the stage ran only to feed a later one.
    pub written: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: Stage,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    /// Input path to SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub stages: Vec<StageTiming>,
    pub artifacts: Vec<Artifact>,
    pub error: Option<StageFailure>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Hourly `timestamp,target_mw` series.
pub fn read_targets(path: impl AsRef<Path>) -> Result<(DateTime<Utc>, Vec<f64>), String> {
    #[derive(Deserialize)]
    struct Row {
        timestamp: String,
        target_mw: f64,
    }
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for row in r.deserialize::<Row>() {
        let row = row.map_err(|e| e.to_string())?;
        let t = parse_timestamp(&row.timestamp).ok_or_else(|| format!("bad timestamp '{}'", row.timestamp))?;
        rows.push((t, row.target_mw));
    }
    rows.sort_by_key(|r| r.0);
    let start = rows.first().ok_or("no target rows")?.0;
    for (i, (t, _)) in rows.iter().enumerate() {
        if (*t - start).num_hours() != i as i64 || t.minute() != 0 {
            return Err(format!("targets must be consecutive whole hours; {} breaks the run", format_timestamp(t)));
        }
    }
    Ok((start, rows.into_iter().map(|r| r.1).collect()))
}

/// Fits the wind farms of `specs` so their summed output tracks `targets`
/// starting at `start`. Solar specs pass through unchanged.
pub fn calibrate_wind(
    case: &GridCase,
    climate: &ClimateSeries,
    specs: &RenewableSpecs,
    start: DateTime<Utc>,
    targets: &[f64],
    opts: &ProfileOptions,
) -> Result<(RenewableSpecs, CalibrationResult), RenewableError> {
    let first = climate
        .hour_of(start)
        .filter(|h| h + targets.len() <= climate.hours())
        .ok_or_else(|| RenewableError::Calibration("targets fall outside the climate horizon".into()))?;
    let mut hub = Vec::with_capacity(specs.wind.len());
    for farm in &specs.wind {
        let g = case.generator(farm.gen_id).ok_or(RenewableError::MissingSpec(farm.gen_id))?;
        let v = hub_speeds(climate, g.bus, farm.hub_height, opts)?;
        hub.push(v[first..first + targets.len()].to_vec());
    }
    let problem = CalibrationProblem {
        farms: specs.wind.clone(),
        hub_speeds: hub,
        targets: targets.to_vec(),
        first_hour: start.hour() as usize,
    };
    let result = calibrate(&problem)?;
    let out = RenewableSpecs {
        wind: result.farms.clone(),
        solar: specs.solar.clone(),
    };
    Ok((out, result))
}

/// Nodal load of the full case moved onto the representatives of a reduction.
pub fn rehome_load(load: &ProfileSet, agg: &Aggregation) -> Result<ProfileSet, String> {
    let mut out = ProfileSet::new(load.start, load.hours);
    let mut sums: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for (bus, series) in &load.series {
        let rep = agg.bus_map.get(bus).ok_or_else(|| format!("bus {bus} is not in the reduction map"))?;
        let acc = sums.entry(*rep).or_insert_with(|| vec![0.0; load.hours]);
        for (a, v) in acc.iter_mut().zip(series) {
            *a += v;
        }
    }
    for (bus, series) in sums {
        out.insert(bus, series).map_err(|e| e.to_string())?;
    }
    Ok(out)
}

/// Files read before any stage runs.
struct Inputs {
    case: GridCase,
    climate: Option<ClimateSeries>,
    zonal: Option<ZonalLoadSeries>,
    factors: Option<ParticipationFactors>,
    specs: Option<RenewableSpecs>,
    catalog: ConductorCatalog,
    initial: BTreeMap<GenId, InitialState>,
    targets: Option<(DateTime<Utc>, Vec<f64>)>,
    days: Vec<NaiveDate>,
    digests: BTreeMap<String, String>,
}

struct Needs {
    climate: bool,
    renewables: bool,
    load: bool,
    ratings: Vec<RatingMode>,
    scuc: bool,
}

fn needs(cfg: &RunConfig, case_has_renewables: bool) -> Needs {
    let scuc = cfg.wants(Stage::Scuc);
    let mut ratings: Vec<RatingMode> = Vec::new();
    if cfg.wants(Stage::Rating) {
        ratings.extend(&cfg.rating.modes);
    }
    if scuc {
        ratings.extend(cfg.scuc.limits.iter().filter_map(|m| m.rating_mode()));
    }
    ratings.sort_by_key(|m| *m == RatingMode::Hourly);
    ratings.dedup();
    let renewables = cfg.wants(Stage::Renewables) || (scuc && case_has_renewables);
    Needs {
        climate: cfg.wants(Stage::Climate) || renewables || !ratings.is_empty(),
        renewables,
        load: cfg.wants(Stage::Load) || scuc,
        ratings,
        scuc,
    }
}

fn invalid(m: impl Into<String>) -> PipelineError {
    PipelineError::Validation(m.into())
}

fn preflight(cfg: &RunConfig) -> Result<(Inputs, Needs), PipelineError> {
    let mut digests = BTreeMap::new();
    let mut existing = |p: &Path, what: &str| -> Result<PathBuf, PipelineError> {
        let full = cfg.resolve(p);
        if !full.exists() {
            return Err(invalid(format!("{what} {} does not exist", full.display())));
        }
        if full.is_file() {
            let d = sha256_file(&full).map_err(|e| invalid(format!("cannot read {}: {e}", full.display())))?;
            digests.insert(p.display().to_string(), d);
        }
        Ok(full)
    };
    let only_report = cfg.run.stages.iter().all(|s| *s == Stage::Report);

    let case_dir = existing(&cfg.case.dir, "case directory")?;
    for f in ["buses.csv", "lines.csv", "generators.csv", "case.toml"] {
        let p = cfg.case.dir.join(f);
        if cfg.resolve(&p).exists() {
            existing(&p, "case file")?;
        }
    }
    let case = load_case(&case_dir).map_err(|e| invalid(format!("case: {e}")))?;
    let needs = needs(cfg, case.generators.iter().any(|g| g.fuel.is_renewable()));
    let required = |p: &Option<PathBuf>, key: &str| -> Result<PathBuf, PipelineError> {
        p.clone().ok_or_else(|| invalid(format!("{key} is required by the requested stages")))
    };

    // every referenced path is checked before anything is parsed
    let climate_path = if needs.climate {
        Some(existing(&required(&cfg.climate.path, "climate.path")?, "climate file")?)
    } else {
        None
    };
    let specs_path = if needs.renewables {
        Some(existing(&required(&cfg.renewables.specs, "renewables.specs")?, "renewable specs")?)
    } else {
        None
    };
    let target_path = match (&cfg.renewables.calibrate_target, needs.renewables) {
        (Some(p), true) => Some(existing(p, "calibration target")?),
        _ => None,
    };
    let (zonal_path, factors_path) = if needs.load {
        let z = existing(&required(&cfg.load.zonal, "load.zonal")?, "zonal load")?;
        let f = match &cfg.load.factors {
            Some(p) => Some(existing(p, "participation factors")?),
            None => None,
        };
        (Some(z), f)
    } else {
        (None, None)
    };
    let catalog_path = match (&cfg.rating.conductors, needs.ratings.is_empty()) {
        (Some(p), false) => Some(existing(p, "conductor table")?),
        _ => None,
    };
    let initial_path = match (&cfg.scuc.initial_state, needs.scuc) {
        (Some(p), true) => Some(existing(p, "initial state")?),
        _ => None,
    };
    if only_report && !cfg.out_dir().join("scuc").is_dir() {
        return Err(invalid(format!("no commitment results under {} to report on", cfg.out_dir().display())));
    }

    let climate = match climate_path {
        Some(p) => {
            let (c, filled) = ClimateSeries::read_csv(&p, cfg.climate.fill).map_err(|e| invalid(format!("climate: {e}")))?;
            for ev in filled {
                log::warn!("climate gap of {} h at bus {} from {} filled", ev.hours, ev.bus, format_timestamp(&ev.start));
            }
            c.check_covers(&case).map_err(|e| invalid(format!("climate: {e}")))?;
            Some(c)
        }
        None => None,
    };
    let specs = match specs_path {
        Some(p) => Some(read_specs(&p).map_err(|e| invalid(format!("renewable specs: {e}")))?),
        None => None,
    };
    let targets = match target_path {
        Some(p) => Some(read_targets(&p).map_err(|e| invalid(format!("calibration target: {e}")))?),
        None => None,
    };
    let zonal = match zonal_path {
        Some(p) => Some(ZonalLoadSeries::read_csv(&p).map_err(|e| invalid(format!("zonal load: {e}")))?),
        None => None,
    };
    let factors = match (factors_path, &zonal) {
        (Some(p), _) => Some(ParticipationFactors::read_csv(&p).map_err(|e| invalid(format!("factors: {e}")))?),
        (None, Some(_)) => Some(uniform_factors(&case).map_err(|e| invalid(format!("factors: {e}")))?),
        _ => None,
    };
    if let Some(f) = &factors {
        f.validate(&case).map_err(|e| invalid(format!("factors: {e}")))?;
    }
    let catalog = match catalog_path {
        Some(p) => read_catalog(&p).map_err(|e| invalid(format!("conductors: {e}")))?,
        None => default_catalog(),
    };
    let initial = match initial_path {
        Some(p) => {
            let s = read_initial_states(&p).map_err(|e| invalid(format!("initial state: {e}")))?;
            if let Some(g) = s.keys().find(|g| case.generator(**g).is_none()) {
                return Err(invalid(format!("initial state names unknown unit {g}")));
            }
            s
        }
        None => BTreeMap::new(),
    };

    if let (Some(c), Some(z)) = (&climate, &zonal) {
        if c.start() != z.start || c.hours() != z.hours {
            return Err(invalid(format!(
                "climate covers {} + {} h but zonal load covers {} + {} h",
                format_timestamp(&c.start()),
                c.hours(),
                format_timestamp(&z.start),
                z.hours
            )));
        }
    }

    let mut days = Vec::new();
    if needs.scuc {
        let z = zonal.as_ref().expect("load is needed by commitment");
        let whole: Vec<NaiveDate> = (0..z.hours)
            .map(|h| z.start + chrono::Duration::hours(h as i64))
            .filter(|t| t.hour() == 0)
            .filter(|t| (*t - z.start).num_hours() as usize + 24 <= z.hours)
            .map(|t| t.date_naive())
            .collect();
        days = if cfg.scuc.days.is_empty() { whole.clone() } else { cfg.scuc.days.clone() };
        if let Some(d) = days.iter().find(|d| !whole.contains(d)) {
            return Err(invalid(format!("day {d} is not a whole day of the input horizon")));
        }
        if days.is_empty() {
            return Err(invalid("the input horizon holds no whole day to commit"));
        }
        days.sort();
        days.dedup();
    }

    Ok((
        Inputs {
            case,
            climate,
            zonal,
            factors,
            specs,
            catalog,
            initial,
            targets,
            days,
            digests,
        },
        needs,
    ))
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    out: PathBuf,
    manifest: RunManifest,
}

impl<'a> Runner<'a> {
    fn record(&mut self, path: &Path) -> Result<(), String> {
        let rel = path
            .strip_prefix(&self.out)
            .map_err(|_| format!("{} lies outside the output directory", path.display()))?;
        let rel = rel.iter().map(|c| c.to_string_lossy()).collect::<Vec<_>>().join("/");
        let bytes = fs::metadata(path).map_err(|e| e.to_string())?.len();
        let sha256 = sha256_file(path).map_err(|e| e.to_string())?;
        self.manifest.artifacts.retain(|a| a.path != rel);
        self.manifest.artifacts.push(Artifact { path: rel, sha256, bytes });
        Ok(())
    }

    fn write_manifest(&mut self) -> Result<(), String> {
        self.manifest.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| e.to_string())?;
        fs::write(self.out.join(MANIFEST_FILE), text + "\n").map_err(|e| e.to_string())
    }

    /// Times one step; a failure is written to the manifest before it is returned.
    fn step<T>(&mut self, stage: Stage, f: impl FnOnce(&mut Self, bool) -> Result<T, String>) -> Result<T, PipelineError> {
        let written = self.cfg.wants(stage);
        let t0 = Instant::now();
        let result = f(self, written);
        self.manifest.stages.push(StageTiming {
            stage,
            seconds: t0.elapsed().as_secs_f64(),
            written,
        });
        match result {
            Ok(v) => Ok(v),
            Err(message) => {
                log::error!("stage {stage} failed: {message}");
                self.manifest.error = Some(StageFailure {
                    stage,
                    message: message.clone(),
                });
                if let Err(e) = self.write_manifest() {
                    log::error!("manifest not written: {e}");
                }
                Err(PipelineError::Stage { stage, message })
            }
        }
    }

    fn dir(&self, name: &str) -> Result<PathBuf, String> {
        let d = self.out.join(name);
        fs::create_dir_all(&d).map_err(|e| format!("{}: {e}", d.display()))?;
        Ok(d)
    }
}

/// Runs the requested stages in dependency order. Stages that were not
/// requested but feed requested ones are computed without writing files.
pub fn run(cfg: &RunConfig) -> Result<RunManifest, PipelineError> {
    cfg.check()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.jobs)
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    pool.install(|| run_stages(cfg))
}

fn run_stages(cfg: &RunConfig) -> Result<RunManifest, PipelineError> {
    let (inputs, needs) = preflight(cfg)?;
    let out = cfg.out_dir();
    fs::create_dir_all(&out).map_err(|e| invalid(format!("output directory {}: {e}", out.display())))?;
    let mut r = Runner {
        cfg,
        out,
        manifest: RunManifest {
            config: cfg.clone(),
            inputs: inputs.digests.clone(),
            stages: Vec::new(),
            artifacts: Vec::new(),
            error: None,
        },
    };
    let Inputs {
        case: full_case,
        climate,
        zonal,
        factors,
        specs,
        catalog,
        initial,
        targets,
        days,
        ..
    } = inputs;

    let reduce = cfg.case.reduce_to.is_some();
    let (case, aggregation) = if reduce || cfg.wants(Stage::Reduce) {
        r.step(Stage::Reduce, |r, write| {
            let (case, agg) = match cfg.case.reduce_to {
                Some(k) => {
                    let clustering = kmedoids(&case_points(&full_case), k, cfg.run.seed).map_err(|e| e.to_string())?;
                    let agg = aggregate(&full_case, &clustering, &cfg.case.keep).map_err(|e| e.to_string())?;
                    if write {
                        let d = r.dir("case")?;
                        let json = serde_json::to_string_pretty(&clustering).map_err(|e| e.to_string())?;
                        fs::write(d.join("clustering.json"), json + "\n").map_err(|e| e.to_string())?;
                        r.record(&d.join("clustering.json"))?;
                    }
                    (agg.case.clone(), Some(agg))
                }
                None => (full_case.clone(), None),
            };
            if write {
                let d = r.dir("case")?;
                save_case(&case, &d).map_err(|e| e.to_string())?;
                let mut files: Vec<PathBuf> = fs::read_dir(&d)
                    .map_err(|e| e.to_string())?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .collect();
                files.sort();
                for f in files {
                    r.record(&f)?;
                }
            }
            Ok((case, agg))
        })?
    } else {
        (full_case.clone(), None)
    };

    if let Some(c) = &climate {
        if cfg.wants(Stage::Climate) {
            r.step(Stage::Climate, |r, _| {
                let d = r.dir("climate")?;
                c.save_store(&d).map_err(|e| e.to_string())?;
                let mut files: Vec<PathBuf> = fs::read_dir(&d)
                    .map_err(|e| e.to_string())?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .collect();
                files.sort();
                for f in files {
                    r.record(&f)?;
                }
                Ok(())
            })?;
        }
    }

    let availability = if needs.renewables {
        let climate = climate.as_ref().expect("climate is loaded for renewables");
        let specs = specs.as_ref().expect("specs are loaded for renewables");
        r.step(Stage::Renewables, |r, write| {
            let opts = ProfileOptions {
                solar_headroom: cfg.renewables.solar_headroom,
                ..Default::default()
            };
            let specs = match &targets {
                Some((start, t)) => {
                    let (fitted, result) = calibrate_wind(&case, climate, specs, *start, t, &opts).map_err(|e| e.to_string())?;
                    log::info!(
                        "wind calibration: objective {:.4e} -> {:.4e} in {} iterations",
                        result.initial_objective,
                        result.objective,
                        result.iterations
                    );
                    if write {
                        let p = r.dir("profiles")?.join("specs_calibrated.csv");
                        write_specs(&fitted, &p).map_err(|e| e.to_string())?;
                        r.record(&p)?;
                    }
                    fitted
                }
                None => specs.clone(),
            };
            let profiles = generate_profiles(&case, climate, &specs, &opts).map_err(|e| e.to_string())?;
            if write {
                let p = r.dir("profiles")?.join("renewables.csv");
                profiles.write_csv(&p, "gen_id", "avail_mw").map_err(|e| e.to_string())?;
                r.record(&p)?;
            }
            Ok(profiles)
        })?
    } else {
        ProfileSet::new(DateTime::<Utc>::default(), 0)
    };

    let load = if needs.load {
        let zonal = zonal.as_ref().expect("zonal load is loaded");
        let factors = factors.as_ref().expect("factors are loaded with zonal load");
        r.step(Stage::Load, |r, write| {
            let nodal = disaggregate(&full_case, zonal, factors).map_err(|e| e.to_string())?;
            let nodal = match &aggregation {
                Some(agg) => rehome_load(&nodal, agg)?,
                None => nodal,
            };
            if write {
                let p = r.dir("profiles")?.join("load.csv");
                nodal.write_csv(&p, "bus_id", "load_mw").map_err(|e| e.to_string())?;
                r.record(&p)?;
            }
            Ok(nodal)
        })?
    } else {
        ProfileSet::new(DateTime::<Utc>::default(), 0)
    };

    let ratings: BTreeMap<RatingMode, LineRatings> = if needs.ratings.is_empty() {
        BTreeMap::new()
    } else {
        let climate = climate.as_ref().expect("climate is loaded for ratings");
        r.step(Stage::Rating, |r, write| {
            let opts = RatingOptions {
                conductor_height: cfg.rating.conductor_height,
                wind_angle: cfg.rating.wind_angle,
                ..Default::default()
            };
            let mut out = BTreeMap::new();
            for &mode in &needs.ratings {
                let rt = dlr_profiles(&case, climate, &catalog, mode, &opts).map_err(|e| e.to_string())?;
                if write && cfg.rating.modes.contains(&mode) {
                    let p = r.dir("ratings")?.join(format!("{mode}.csv"));
                    rt.write_csv(&p).map_err(|e| e.to_string())?;
                    r.record(&p)?;
                }
                out.insert(mode, rt);
            }
            Ok(out)
        })?
    };

    if needs.scuc {
        r.step(Stage::Scuc, |r, _| {
            let opts = ScucOptions {
                cost_segments: cfg.scuc.segments,
                shed_penalty: cfg.scuc.shed_penalty,
                mip: gridsynth_lp::MipOptions {
                    rel_gap: cfg.scuc.gap,
                    time_limit: cfg.scuc.time_limit.map(std::time::Duration::from_secs_f64),
                    ..Default::default()
                },
                ..Default::default()
            };
            let mut modes = cfg.scuc.limits.clone();
            modes.sort();
            modes.dedup();
            let base = r.dir("scuc")?;
            let written: Vec<Result<Vec<PathBuf>, String>> = days
                .par_iter()
                .map(|&day| {
                    solve_day(&case, &load, &availability, &ratings, &initial, cfg.scuc.reserve, day, &modes, &opts, cfg.scuc.export_mps, &base)
                })
                .collect();
            for files in written {
                for f in files? {
                    r.record(&f)?;
                }
            }
            Ok(())
        })?;
    }

    if cfg.wants(Stage::Report) {
        r.step(Stage::Report, |r, _| {
            let mut files = Vec::new();
            for &kind in &cfg.report.kinds {
                files.extend(report(&r.out, kind, cfg.report.svg).map_err(|e| e.to_string())?);
            }
            for f in files {
                r.record(&f)?;
            }
            Ok(())
        })?;
    }

    r.write_manifest().map_err(|message| PipelineError::Stage {
        stage: *cfg.run.stages.last().expect("stages checked non-empty"),
        message,
    })?;
    Ok(r.manifest)
}

#[allow(clippy::too_many_arguments)]
fn solve_day(
    case: &GridCase,
    load: &ProfileSet,
    availability: &ProfileSet,
    ratings: &BTreeMap<RatingMode, LineRatings>,
    initial: &BTreeMap<GenId, InitialState>,
    reserve: f64,
    day: NaiveDate,
    modes: &[LimitMode],
    opts: &ScucOptions,
    export_mps: bool,
    base: &Path,
) -> Result<Vec<PathBuf>, String> {
    let mut files = Vec::new();
    let mut daily_commitment = None;
    for &mode in modes {
        let ctx = |e: ScucError| format!("{day} ({mode} limits): {e}");
        let rt = mode.rating_mode().map(|m| &ratings[&m]);
        let mut inst = day_instance(case, load, availability, rt, day).map_err(ctx)?;
        inst.reserve_fraction = reserve;
        inst.initial = initial.clone();
        let dir = base.join(day.format("%Y-%m-%d").to_string()).join(mode.to_string());
        fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        if export_mps {
            let m = build(&inst, opts).map_err(ctx)?;
            let p = dir.join("model.mps");
            let f = fs::File::create(&p).map_err(|e| e.to_string())?;
            gridsynth_lp::write_mps(&m.problem, std::io::BufWriter::new(f)).map_err(|e| e.to_string())?;
            files.push(p);
        }
        // hourly limits are never tighter than daily ones, so the daily
        // commitment seeds the hourly search
        let hint = if mode == LimitMode::Hourly { daily_commitment.as_ref() } else { None };
        let sol = solve_with_hint(&inst, opts, hint).map_err(ctx)?;
        if mode == LimitMode::Daily {
            daily_commitment = Some(sol.commitment.clone());
        }
        files.extend(write_solution(&inst, &sol, &dir).map_err(ctx)?.paths);
        let p = dir.join("congestion.csv");
        congestion(&inst, &sol, CONGESTION_TOL).write_csv(&inst, &p).map_err(ctx)?;
        files.push(p);
        let p = dir.join(OUTCOME_FILE);
        let outcome = RunOutcome::from_result(&inst, Ok(sol));
        fs::write(&p, serde_json::to_string_pretty(&outcome).map_err(|e| e.to_string())? + "\n").map_err(|e| e.to_string())?;
        files.push(p);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn targets_must_be_consecutive() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, "timestamp,target_mw\n2019-01-01T00:00:00Z,1\n2019-01-01T01:00:00Z,2\n").unwrap();
        let (start, v) = read_targets(&p).unwrap();
        assert_eq!(v, vec![1.0, 2.0]);
        assert_eq!(format_timestamp(&start), "2019-01-01T00:00:00Z");
        fs::write(&p, "timestamp,target_mw\n2019-01-01T00:00:00Z,1\n2019-01-01T02:00:00Z,2\n").unwrap();
        assert!(read_targets(&p).is_err());
    }

    #[test]
    fn rehomed_load_is_conserved() {
        let case = fixtures::texas_footprint(3);
        let clustering = kmedoids(&case_points(&case), 20, 1).unwrap();
        let agg = aggregate(&case, &clustering, &[]).unwrap();
        let start = DateTime::<Utc>::default();
        let mut load = ProfileSet::new(start, 2);
        for b in &case.buses {
            load.insert(b.id, vec![b.id as f64, 1.0]).unwrap();
        }
        let moved = rehome_load(&load, &agg).unwrap();
        assert_eq!(moved.series.len(), agg.case.buses.len());
        let (a, b) = (load.totals(), moved.totals());
        for t in 0..2 {
            assert!((a[t] - b[t]).abs() <= 1e-9 * a[t]);
        }
    }

    #[test]
    fn missing_climate_fails_before_any_stage() {
        let dir = tempfile::tempdir().unwrap();
        let f = fixtures::ten_bus();
        f.write(dir.path(), fixtures::TEN_BUS_RUN_TOML).unwrap();
        fs::remove_file(dir.path().join("climate.csv")).unwrap();
        let cfg = RunConfig::load(dir.path().join("run.toml")).unwrap();
        let err = run(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("climate"));
        assert!(!dir.path().join("out").exists());
    }

    #[test]
    fn rate_only_writes_ratings_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let f = fixtures::ten_bus();
        f.write(dir.path(), fixtures::TEN_BUS_RUN_TOML).unwrap();
        let mut cfg = RunConfig::load(dir.path().join("run.toml")).unwrap();
        cfg.run.stages = vec![Stage::Rating];
        let m = run(&cfg).unwrap();
        let paths: Vec<&str> = m.artifacts.iter().map(|a| a.path.as_str()).collect();
        assert_eq!(paths, vec!["ratings/daily.csv", "ratings/hourly.csv"]);
        let mut top: Vec<String> = fs::read_dir(dir.path().join("out"))
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        top.sort();
        assert_eq!(top, vec!["manifest.json", "ratings"]);
        for a in &m.artifacts {
            assert_eq!(sha256_file(&dir.path().join("out").join(&a.path)).unwrap(), a.sha256);
        }
    }

    #[test]
    fn infeasible_day_is_a_stage_failure_with_record() {
        let dir = tempfile::tempdir().unwrap();
        let mut f = fixtures::ten_bus();
        for z in f.zonal.zones.values_mut() {
            for v in z.iter_mut() {
                *v *= 10.0;
            }
        }
        f.write(dir.path(), fixtures::TEN_BUS_RUN_TOML).unwrap();
        let mut cfg = RunConfig::load(dir.path().join("run.toml")).unwrap();
        cfg.run.stages = vec![Stage::Load, Stage::Scuc];
        cfg.scuc.limits = vec![LimitMode::Static];
        let err = run(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let m: RunManifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join("out").join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(m.error.unwrap().stage, Stage::Scuc);
        assert!(m.artifacts.iter().any(|a| a.path == "profiles/load.csv"));
    }
}
