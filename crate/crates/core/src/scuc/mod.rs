//! DC security-constrained unit commitment: model, solve, prices, checks.

mod assemble;
mod io;
mod model;
mod oracle;
mod report;
mod validate;

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use gridsynth_lp::{solve_lp, solve_mip_from, LpSolution, LpStatus, MipOptions, MipStatus};
use serde::{Deserialize, Serialize};

use crate::grid::{BusId, GenId, Generator, GridCase, LineId};

pub use assemble::{day_instance, static_limits};
pub use io::{read_initial_states, write_initial_states, write_solution, SolutionFiles};
pub use model::{build, ScucModel};
pub use oracle::{enumerate_commitments, MAX_ENUMERATED_BINARIES};
pub use report::{compare_dlr, congestion, metrics, CongestionReport, DlrComparison, HourCongestion, RunOutcome, ScucMetrics};
pub use validate::{replay, Violation};

pub const DEFAULT_RESERVE_FRACTION: f64 = 0.03;
pub const DEFAULT_COST_SEGMENTS: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum ScucError {
    #[error("malformed instance: {0}")]
    Malformed(String),
    #[error("infeasible: {hint}")]
    Infeasible { hint: String },
    #[error("search stopped before a feasible commitment was found")]
    NoSolution,
    #[error("unbounded model")]
    Unbounded,
    #[error("{binaries} commitment binaries are too many to enumerate")]
    TooLarge { binaries: usize },
    #[error(transparent)]
    Rating(#[from] crate::rating::RatingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// State of a unit just before the first hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub on: bool,
    /// Hours spent in the current state.
    pub hours: u32,
    /// MW
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LineLimits {
    /// One limit per line for the whole horizon.
    PerLine(BTreeMap<LineId, f64>),
    /// One limit per line and hour.
    PerHour(BTreeMap<LineId, Vec<f64>>),
}

impl LineLimits {
    pub fn get(&self, line: LineId, hour: usize) -> Option<f64> {
        match self {
            LineLimits::PerLine(m) => m.get(&line).copied(),
            LineLimits::PerHour(m) => m.get(&line).and_then(|v| v.get(hour).copied()),
        }
    }

    fn line_ids(&self) -> Vec<LineId> {
        match self {
            LineLimits::PerLine(m) => m.keys().copied().collect(),
            LineLimits::PerHour(m) => m.keys().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScucInstance {
    pub case: GridCase,
    pub start: DateTime<Utc>,
    pub hours: usize,
    /// MW per bus and hour; buses left out carry no load.
    pub load: BTreeMap<BusId, Vec<f64>>,
    /// Available MW per wind or solar unit and hour.
    pub availability: BTreeMap<GenId, Vec<f64>>,
    pub limits: LineLimits,
    pub reserve_fraction: f64,
    /// Units left out start off, free to start.
    pub initial: BTreeMap<GenId, InitialState>,
}

impl ScucInstance {
    pub fn new(
        case: GridCase,
        start: DateTime<Utc>,
        hours: usize,
        load: BTreeMap<BusId, Vec<f64>>,
        availability: BTreeMap<GenId, Vec<f64>>,
        limits: LineLimits,
    ) -> Self {
        Self {
            case,
            start,
            hours,
            load,
            availability,
            limits,
            reserve_fraction: DEFAULT_RESERVE_FRACTION,
            initial: BTreeMap::new(),
        }
    }

    pub fn initial_state(&self, g: &Generator) -> InitialState {
        self.initial.get(&g.id).copied().unwrap_or(InitialState {
            on: false,
            hours: g.min_off,
            power: 0.0,
        })
    }

    pub fn load_at(&self, bus: BusId, t: usize) -> f64 {
        self.load.get(&bus).map_or(0.0, |v| v[t])
    }

    pub fn total_load(&self, t: usize) -> f64 {
        self.load.values().map(|v| v[t]).sum()
    }

    pub fn limit(&self, line: LineId, t: usize) -> f64 {
        self.limits.get(line, t).expect("validated instance")
    }

    /// Units whose on/off state is decided by the model.
    pub fn committable(&self) -> impl Iterator<Item = &Generator> {
        self.case.generators.iter().filter(|g| !g.fuel.is_renewable())
    }

    /// Hours at the start of the horizon where the initial state pins `u`.
    pub fn forced_hours(&self, g: &Generator) -> (usize, bool) {
        let s = self.initial_state(g);
        let (window, value) = if s.on { (g.min_on, true) } else { (g.min_off, false) };
        ((window.saturating_sub(s.hours) as usize).min(self.hours), value)
    }

    pub fn validate(&self) -> Result<(), ScucError> {
        let bad = |m: String| Err(ScucError::Malformed(m));
        if self.hours == 0 {
            return bad("empty horizon".into());
        }
        if !(self.reserve_fraction >= 0.0 && self.reserve_fraction.is_finite()) {
            return bad(format!("reserve fraction {} must be non-negative", self.reserve_fraction));
        }
        self.case.validate().map_err(|e| ScucError::Malformed(e.to_string()))?;
        for (&b, v) in &self.load {
            if self.case.bus(b).is_none() {
                return bad(format!("load at unknown bus {b}"));
            }
            if v.len() != self.hours || v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return bad(format!("load at bus {b} needs {} non-negative values", self.hours));
            }
        }
        for g in &self.case.generators {
            if g.fuel.is_renewable() {
                match self.availability.get(&g.id) {
                    Some(v) if v.len() == self.hours && v.iter().all(|x| x.is_finite() && *x >= 0.0) => {}
                    _ => return bad(format!("unit {} needs {} non-negative availability values", g.id, self.hours)),
                }
            }
            if let Some(s) = self.initial.get(&g.id) {
                if s.power < 0.0 || (s.on && s.power > g.p_max + 1e-9) || (!s.on && s.power != 0.0) {
                    return bad(format!("unit {} has inconsistent initial power {}", g.id, s.power));
                }
            }
        }
        for id in self.limits.line_ids() {
            if !self.case.lines.iter().any(|l| l.id == id) {
                return bad(format!("limit for unknown line {id}"));
            }
        }
        for l in &self.case.lines {
            for t in 0..self.hours {
                match self.limits.get(l.id, t) {
                    Some(x) if x > 0.0 && x.is_finite() => {}
                    Some(x) => return bad(format!("line {} limit {x} at hour {t} must be positive", l.id)),
                    None => return bad(format!("no limit for line {} at hour {t}", l.id)),
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ScucOptions {
    /// Chords per quadratic cost curve.
    pub cost_segments: usize,
    /// $/MWh for unserved load; `None` forbids shedding.
    pub shed_penalty: Option<f64>,
    pub mip: MipOptions,
    /// Seed the search with a rounded relaxation when it is feasible.
    pub warm_start: bool,
}

impl Default for ScucOptions {
    fn default() -> Self {
        Self {
            cost_segments: DEFAULT_COST_SEGMENTS,
            shed_penalty: None,
            mip: MipOptions::default(),
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Feasible { gap: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScucSolution {
    pub status: SolveStatus,
    /// $
    pub objective: f64,
    pub best_bound: f64,
    pub nodes: usize,
    pub commitment: BTreeMap<GenId, Vec<bool>>,
    pub startup: BTreeMap<GenId, Vec<bool>>,
    pub shutdown: BTreeMap<GenId, Vec<bool>>,
    /// MW, every unit.
    pub dispatch: BTreeMap<GenId, Vec<f64>>,
    /// rad
    pub angles: BTreeMap<BusId, Vec<f64>>,
    /// MW, positive from `from_bus` to `to_bus`.
    pub flows: BTreeMap<LineId, Vec<f64>>,
    pub shed: BTreeMap<BusId, Vec<f64>>,
    /// $/MWh
    pub lmp: BTreeMap<BusId, Vec<f64>>,
}

/// Start and stop indicators implied by a commitment schedule.
pub fn transitions(initially_on: bool, u: &[bool]) -> (Vec<bool>, Vec<bool>) {
    let mut prev = initially_on;
    let mut su = Vec::with_capacity(u.len());
    let mut sd = Vec::with_capacity(u.len());
    for &on in u {
        su.push(on && !prev);
        sd.push(!on && prev);
        prev = on;
    }
    (su, sd)
}

/// Solves the dispatch LP with every binary fixed to `commitment`.
pub fn fixed_commitment_lp(
    inst: &ScucInstance,
    commitment: &BTreeMap<GenId, Vec<bool>>,
    opts: &ScucOptions,
) -> Result<(ScucModel, LpSolution), ScucError> {
    let mut m = build(inst, opts)?;
    m.fix_commitment(inst, commitment)?;
    let sol = solve_lp(&m.problem);
    Ok((m, sol))
}

/// Nodal prices at a fixed commitment: the balance-row duals of the dispatch
/// LP, i.e. the cost of one more MW of load at the bus.
pub fn lmp(
    inst: &ScucInstance,
    commitment: &BTreeMap<GenId, Vec<bool>>,
    opts: &ScucOptions,
) -> Result<BTreeMap<BusId, Vec<f64>>, ScucError> {
    let (m, sol) = fixed_commitment_lp(inst, commitment, opts)?;
    assert_eq!(
        sol.status,
        LpStatus::Optimal,
        "dispatch LP at a feasible commitment must solve"
    );
    Ok(m.prices(&sol))
}

/// Cheapest feasible commitment among the hint, two roundings of the
/// relaxation and everything on.
fn warm_start(
    inst: &ScucInstance,
    m: &ScucModel,
    opts: &ScucOptions,
    hint: Option<&BTreeMap<GenId, Vec<bool>>>,
) -> Option<Vec<f64>> {
    let mut candidates: Vec<BTreeMap<GenId, Vec<bool>>> = hint.into_iter().cloned().collect();
    let relaxed = solve_lp(&m.problem);
    if relaxed.status == LpStatus::Optimal {
        candidates.push(m.round_at(inst, &relaxed.x, 0.5));
        candidates.push(m.round_up(inst, &relaxed.x));
    }
    candidates.push(m.round_up(inst, &vec![1.0; m.problem.num_vars()]));
    let mut best: Option<LpSolution> = None;
    for commit in candidates {
        if let Ok((_, sol)) = fixed_commitment_lp(inst, &commit, opts) {
            if sol.status == LpStatus::Optimal && best.as_ref().is_none_or(|b| sol.objective < b.objective) {
                best = Some(sol);
            }
        }
    }
    best.map(|s| s.x)
}

pub fn solve(inst: &ScucInstance, opts: &ScucOptions) -> Result<ScucSolution, ScucError> {
    solve_with_hint(inst, opts, None)
}

/// Like [`solve`], additionally trying `hint` as a starting commitment. The
/// result never costs more than the hint's own dispatch.
pub fn solve_with_hint(
    inst: &ScucInstance,
    opts: &ScucOptions,
    hint: Option<&BTreeMap<GenId, Vec<bool>>>,
) -> Result<ScucSolution, ScucError> {
    let m = build(inst, opts)?;
    let start = if opts.warm_start || hint.is_some() {
        warm_start(inst, &m, opts, hint)
    } else {
        None
    };
    let sol = solve_mip_from(&m.problem, &opts.mip, start);
    let status = match sol.status {
        MipStatus::Optimal => SolveStatus::Optimal,
        MipStatus::Feasible { gap } => SolveStatus::Feasible { gap },
        MipStatus::Infeasible => {
            return Err(ScucError::Infeasible {
                hint: m.infeasibility_hint(sol.infeasible_row),
            })
        }
        MipStatus::Unbounded => return Err(ScucError::Unbounded),
        MipStatus::NoSolution => return Err(ScucError::NoSolution),
    };
    log::info!(
        "unit commitment: objective {:.2} after {} nodes, {} simplex iterations",
        sol.objective,
        sol.nodes,
        sol.lp_iterations
    );
    let mut out = m.extract(inst, &sol.x, status, sol.objective, sol.best_bound, sol.nodes);
    out.lmp = lmp(inst, &out.commitment, opts)?;
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests;
