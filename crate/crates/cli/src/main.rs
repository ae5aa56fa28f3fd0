use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use gridsynth_core::climate::{ClimateSeries, FillPolicy};
use gridsynth_core::fixtures;
use gridsynth_core::grid::{load_case, save_case, BusId, Fuel, GridCase};
use gridsynth_core::load::{disaggregate, uniform_factors, ParticipationFactors, ZonalLoadSeries};
use gridsynth_core::pipeline::{self, calibrate_wind, read_targets, report, LimitMode, ReportKind, RunConfig};
use gridsynth_core::profile::ProfileSet;
use gridsynth_core::rating::{default_catalog, dlr_profiles, read_catalog, LineRatings, RatingMode, RatingOptions};
use gridsynth_core::reduction::{aggregate, case_points, kmedoids};
use gridsynth_core::renewable::{generate_profiles, read_specs, write_specs, ProfileOptions};
use gridsynth_core::scuc::{
    build, congestion, day_instance, read_initial_states, solve, write_solution, ScucError, ScucOptions,
};

/// Failure with the exit status it maps to: 2 for bad input, 3 for a
/// computation that could not finish.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

type Outcome = Result<(), Failure>;

trait Classify<T> {
    fn invalid(self) -> Result<T, Failure>;
    fn failed(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 2, error: e.into() })
    }

    fn failed(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 3, error: e.into() })
    }
}

#[derive(Parser)]
#[command(name = "gridsynth", version, about = "Synthetic climate-dependent grid cases and unit commitment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster buses geographically and contract the network onto medoids.
    Reduce(ReduceArgs),
    /// Climate store management.
    Climate {
        #[command(subcommand)]
        command: ClimateCommand,
    },
    /// Hourly availability of wind or solar units.
    Profile(ProfileArgs),
    /// Nodal load from zonal totals.
    Load(LoadArgs),
    /// Daily or hourly dynamic line ratings.
    Rate(RateArgs),
    /// Solve one day of unit commitment.
    Scuc(ScucArgs),
    /// Run a whole configuration.
    Run(RunArgs),
    /// Regenerate reports from a run's output directory.
    Report(ReportArgs),
    /// Write a bundled synthetic input set.
    Fixture(FixtureArgs),
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    case: PathBuf,
    /// Number of clusters.
    #[arg(long)]
    k: usize,
    /// Buses kept as their own representatives.
    #[arg(long, value_delimiter = ',')]
    keep: Vec<BusId>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ClimateCommand {
    /// Validate a climate CSV against a case and store it.
    Ingest {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Interpolate interior gaps of up to three hours.
        #[arg(long)]
        fill: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Wind,
    Solar,
}

#[derive(Args)]
struct ProfileArgs {
    kind: Kind,
    #[arg(long)]
    case: PathBuf,
    /// Climate store directory or CSV.
    #[arg(long)]
    climate: PathBuf,
    #[arg(long)]
    specs: PathBuf,
    /// `timestamp,target_mw` series to calibrate the wind farms against.
    #[arg(long)]
    calibrate_target: Option<PathBuf>,
    /// Where to write the calibrated specs.
    #[arg(long)]
    specs_out: Option<PathBuf>,
    #[arg(long, default_value_t = 1.1)]
    solar_headroom: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LoadArgs {
    #[arg(long)]
    case: PathBuf,
    #[arg(long)]
    zonal: PathBuf,
    /// `bus_id,weight`; equal weights per zone when absent.
    #[arg(long)]
    factors: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RateArgs {
    #[arg(long, value_parser = parse_rating_mode)]
    mode: RatingMode,
    #[arg(long)]
    case: PathBuf,
    #[arg(long)]
    climate: PathBuf,
    /// Conductor rows merged over the built-in table.
    #[arg(long)]
    conductors: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScucArgs {
    #[arg(long)]
    case: PathBuf,
    /// Directory holding `load.csv` and, with renewables, `renewables.csv`.
    #[arg(long)]
    profiles: PathBuf,
    /// Ratings file; static ratings apply without it.
    #[arg(long)]
    ratings: Option<PathBuf>,
    #[arg(long, value_parser = parse_limit_mode, default_value = "static")]
    mode: LimitMode,
    #[arg(long)]
    day: NaiveDate,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.03)]
    reserve: f64,
    #[arg(long, default_value_t = 3)]
    segments: usize,
    #[arg(long, default_value_t = 1e-4)]
    gap: f64,
    /// Seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Permit load shedding at this $/MWh.
    #[arg(long)]
    allow_shed: Option<f64>,
    /// `gen_id,on,hours,power_mw`
    #[arg(long)]
    initial_state: Option<PathBuf>,
    /// Also write the model in fixed MPS format.
    #[arg(long)]
    export_mps: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Output directory of an earlier run.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = parse_report_kind)]
    kind: ReportKind,
    #[arg(long)]
    svg: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureName {
    /// Ten cities, two summer days, full pipeline inputs and run.toml.
    TenBus,
    /// 225 buses over the Texas outline (case files only).
    Texas,
    /// Radial three-bus case with a binding corridor, one summer day.
    ThreeBus,
}

#[derive(Args)]
struct FixtureArgs {
    name: FixtureName,
    #[arg(long)]
    out: PathBuf,
    /// Seed of the generated footprint.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn parse_rating_mode(s: &str) -> Result<RatingMode, String> {
    s.parse::<RatingMode>().map_err(|e| e.to_string())
}

fn parse_limit_mode(s: &str) -> Result<LimitMode, String> {
    s.parse()
}

fn parse_report_kind(s: &str) -> Result<ReportKind, String> {
    s.parse()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Reduce(a) => reduce(a),
        Command::Climate {
            command: ClimateCommand::Ingest { csv, case, out, fill },
        } => ingest(&csv, &case, &out, fill),
        Command::Profile(a) => profile(a),
        Command::Load(a) => load(a),
        Command::Rate(a) => rate(a),
        Command::Scuc(a) => scuc(a),
        Command::Run(a) => run(a),
        Command::Report(a) => report_cmd(a),
        Command::Fixture(a) => fixture(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn read_case(dir: &Path) -> Result<GridCase, Failure> {
    load_case(dir).with_context(|| format!("reading case {}", dir.display())).invalid()
}

fn read_climate(path: &Path) -> Result<ClimateSeries, Failure> {
    ClimateSeries::load_store(path)
        .with_context(|| format!("reading climate {}", path.display()))
        .invalid()
}

fn reduce(a: ReduceArgs) -> Outcome {
    let case = read_case(&a.case)?;
    let clustering = kmedoids(&case_points(&case), a.k, a.seed).invalid()?;
    let agg = aggregate(&case, &clustering, &a.keep).invalid()?;
    save_case(&agg.case, &a.out).failed()?;
    let json = serde_json::to_string_pretty(&clustering).failed()?;
    std::fs::write(a.out.join("clustering.json"), json + "\n").failed()?;
    log::info!(
        "{} buses reduced to {} ({} lines), total distance {:.1} km",
        case.buses.len(),
        agg.case.buses.len(),
        agg.case.lines.len(),
        clustering.total_distance
    );
    Ok(())
}

fn ingest(csv: &Path, case: &Path, out: &Path, fill: bool) -> Outcome {
    let case = read_case(case)?;
    let policy = if fill { FillPolicy::Linear } else { FillPolicy::Reject };
    let (series, events) = ClimateSeries::read_csv(csv, policy)
        .with_context(|| format!("reading {}", csv.display()))
        .invalid()?;
    series.check_covers(&case).invalid()?;
    for e in &events {
        log::warn!("bus {}: {} h gap from {} interpolated", e.bus, e.hours, e.start);
    }
    series.save_store(out).failed()?;
    log::info!("{} buses x {} hours stored in {}", series.buses().len(), series.hours(), out.display());
    Ok(())
}

fn profile(a: ProfileArgs) -> Outcome {
    let mut case = read_case(&a.case)?;
    let fuel = match a.kind {
        Kind::Wind => Fuel::Wind,
        Kind::Solar => Fuel::Solar,
    };
    case.generators.retain(|g| g.fuel == fuel);
    if case.generators.is_empty() {
        return Err(anyhow!("the case has no {fuel} units")).invalid();
    }
    let climate = read_climate(&a.climate)?;
    let mut specs = read_specs(&a.specs).invalid()?;
    let opts = ProfileOptions {
        solar_headroom: a.solar_headroom,
        ..Default::default()
    };
    if let Some(target) = &a.calibrate_target {
        if !matches!(a.kind, Kind::Wind) {
            return Err(anyhow!("calibration applies to wind profiles only")).invalid();
        }
        let (start, values) = read_targets(target).map_err(|e| anyhow!(e)).invalid()?;
        let (fitted, result) = calibrate_wind(&case, &climate, &specs, start, &values, &opts).failed()?;
        log::info!(
            "calibration: objective {:.4e} -> {:.4e} after {} iterations{}",
            result.initial_objective,
            result.objective,
            result.iterations,
            if result.converged { "" } else { " (not converged)" }
        );
        specs = fitted;
        if let Some(p) = &a.specs_out {
            write_specs(&specs, p).failed()?;
        }
    }
    let profiles = generate_profiles(&case, &climate, &specs, &opts).invalid()?;
    profiles.write_csv(&a.out, "gen_id", "avail_mw").failed()?;
    Ok(())
}

fn load(a: LoadArgs) -> Outcome {
    let case = read_case(&a.case)?;
    let zonal = ZonalLoadSeries::read_csv(&a.zonal).invalid()?;
    let factors = match &a.factors {
        Some(p) => ParticipationFactors::read_csv(p).invalid()?,
        None => uniform_factors(&case).invalid()?,
    };
    let nodal = disaggregate(&case, &zonal, &factors).invalid()?;
    nodal.write_csv(&a.out, "bus_id", "load_mw").failed()?;
    Ok(())
}

fn rate(a: RateArgs) -> Outcome {
    let case = read_case(&a.case)?;
    let climate = read_climate(&a.climate)?;
    let catalog = match &a.conductors {
        Some(p) => read_catalog(p).invalid()?,
        None => default_catalog(),
    };
    let ratings = dlr_profiles(&case, &climate, &catalog, a.mode, &RatingOptions::default()).invalid()?;
    ratings.write_csv(&a.out).failed()?;
    Ok(())
}

fn scuc(a: ScucArgs) -> Outcome {
    let case = read_case(&a.case)?;
    let load = ProfileSet::read_csv(a.profiles.join("load.csv"), "bus_id", "load_mw")
        .context("reading load.csv")
        .invalid()?;
    let renewables = a.profiles.join("renewables.csv");
    let availability = if renewables.exists() {
        ProfileSet::read_csv(&renewables, "gen_id", "avail_mw")
            .context("reading renewables.csv")
            .invalid()?
    } else {
        ProfileSet::new(load.start, load.hours)
    };
    let ratings = match (&a.ratings, a.mode) {
        (None, LimitMode::Static) => None,
        (None, m) => return Err(anyhow!("--mode {m} needs --ratings")).invalid(),
        (Some(_), LimitMode::Static) => return Err(anyhow!("--ratings conflicts with --mode static")).invalid(),
        (Some(p), m) => {
            let r = LineRatings::read_csv(p).invalid()?;
            if Some(r.mode) != m.rating_mode() {
                return Err(anyhow!("{} holds {} ratings, not {m}", p.display(), r.mode)).invalid();
            }
            Some(r)
        }
    };
    let mut inst = day_instance(&case, &load, &availability, ratings.as_ref(), a.day).invalid()?;
    inst.reserve_fraction = a.reserve;
    if let Some(p) = &a.initial_state {
        inst.initial = read_initial_states(p).invalid()?;
    }
    let opts = ScucOptions {
        cost_segments: a.segments,
        shed_penalty: a.allow_shed,
        mip: gridsynth_lp::MipOptions {
            rel_gap: a.gap,
            time_limit: a.time_limit.map(std::time::Duration::from_secs_f64),
            ..Default::default()
        },
        ..Default::default()
    };
    if let Some(p) = &a.export_mps {
        let m = build(&inst, &opts).invalid()?;
        let f = std::fs::File::create(p).failed()?;
        gridsynth_lp::write_mps(&m.problem, std::io::BufWriter::new(f)).failed()?;
    }
    let sol = match solve(&inst, &opts) {
        Ok(s) => s,
        Err(e @ ScucError::Malformed(_)) => return Err(e).invalid(),
        Err(e) => return Err(e).failed(),
    };
    write_solution(&inst, &sol, &a.out).failed()?;
    congestion(&inst, &sol, pipeline::CONGESTION_TOL)
        .write_csv(&inst, a.out.join("congestion.csv"))
        .failed()?;
    log::info!("objective {:.2} ({:?})", sol.objective, sol.status);
    Ok(())
}

fn run(a: RunArgs) -> Outcome {
    let mut cfg = RunConfig::load(&a.config).map_err(|e| Failure {
        code: e.exit_code() as u8,
        error: e.into(),
    })?;
    if let Some(s) = a.seed {
        cfg.run.seed = s;
    }
    if let Some(j) = a.jobs {
        cfg.run.jobs = j;
    }
    if let Some(o) = a.out {
        cfg.run.out = std::env::current_dir().failed()?.join(o);
    }
    match pipeline::run(&cfg) {
        Ok(m) => {
            log::info!("{} artifacts written to {}", m.artifacts.len(), cfg.out_dir().display());
            Ok(())
        }
        Err(e) => Err(Failure {
            code: e.exit_code() as u8,
            error: e.into(),
        }),
    }
}

fn report_cmd(a: ReportArgs) -> Outcome {
    let files = match report(&a.out, a.kind, a.svg) {
        Ok(f) => f,
        Err(e) => return Err(e).invalid(),
    };
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn fixture(a: FixtureArgs) -> Outcome {
    std::fs::create_dir_all(&a.out).failed()?;
    match a.name {
        FixtureName::TenBus => {
            fixtures::ten_bus()
                .write(&a.out, fixtures::TEN_BUS_RUN_TOML)
                .map_err(|e| anyhow!(e))
                .failed()?;
        }
        FixtureName::Texas => save_case(&fixtures::texas_footprint(a.seed), &a.out).failed()?,
        FixtureName::ThreeBus => {
            let f = fixtures::congested_three_bus();
            save_case(&f.case, a.out.join("case")).failed()?;
            f.climate.save_store(a.out.join("climate")).failed()?;
            let profiles = a.out.join("profiles");
            std::fs::create_dir_all(&profiles).failed()?;
            f.load.write_csv(profiles.join("load.csv"), "bus_id", "load_mw").failed()?;
            if f.case.generators.iter().any(|g| g.fuel.is_renewable()) {
                f.availability
                    .write_csv(profiles.join("renewables.csv"), "gen_id", "avail_mw")
                    .failed()?;
            }
        }
    }
    log::info!("fixture written to {}", a.out.display());
    Ok(())
}
