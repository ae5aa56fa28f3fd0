use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{solve, solve_with_hint, LineLimits, ScucError, ScucInstance, ScucOptions, ScucSolution, SolveStatus};
use crate::grid::LineId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourCongestion {
    pub hour: usize,
    /// Lines at their limit.
    pub full: Vec<LineId>,
    /// Lines at 90% or more, but below the limit.
    pub near: Vec<LineId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongestionReport {
    pub hours: Vec<HourCongestion>,
    /// Flagged line-hours (both classes) per hour.
    pub anclph: f64,
}

/// Flags line-hours at `|flow| ≥ (1 − tol)·limit` as full and those at
/// `0.9·limit ≤ |flow| < (1 − tol)·limit` as near.
pub fn congestion(inst: &ScucInstance, sol: &ScucSolution, tol: f64) -> CongestionReport {
    let mut hours = Vec::with_capacity(inst.hours);
    let mut flagged = 0usize;
    for t in 0..inst.hours {
        let mut h = HourCongestion {
            hour: t,
            full: Vec::new(),
            near: Vec::new(),
        };
        for l in &inst.case.lines {
            let f = sol.flows.get(&l.id).map_or(0.0, |f| f[t].abs());
            let lim = inst.limit(l.id, t);
            if f >= (1.0 - tol) * lim {
                h.full.push(l.id);
            } else if f >= 0.9 * lim {
                h.near.push(l.id);
            }
        }
        flagged += h.full.len() + h.near.len();
        hours.push(h);
    }
    CongestionReport {
        hours,
        anclph: flagged as f64 / inst.hours as f64,
    }
}

impl CongestionReport {
    pub fn write_csv(&self, inst: &ScucInstance, path: impl AsRef<Path>) -> Result<(), ScucError> {
        let mut w = csv::Writer::from_writer(File::create(path)?);
        w.write_record(["timestamp", "full_count", "near_count", "full_lines", "near_lines"])?;
        let join = |v: &[LineId]| v.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ");
        for h in &self.hours {
            w.write_record([
                crate::climate::format_timestamp(&(inst.start + chrono::Duration::hours(h.hour as i64))),
                h.full.len().to_string(),
                h.near.len().to_string(),
                join(&h.full),
                join(&h.near),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScucMetrics {
    /// $
    pub total_cost: f64,
    /// MWh
    pub renewable_energy: f64,
    /// $/MWh, every bus-hour weighted equally.
    pub average_lmp: f64,
    /// $/MWh, weighted by nodal load.
    pub load_weighted_lmp: f64,
    pub anclph: f64,
}

pub fn metrics(inst: &ScucInstance, sol: &ScucSolution) -> ScucMetrics {
    let renewable_energy = inst
        .case
        .generators
        .iter()
        .filter(|g| g.fuel.is_renewable())
        .map(|g| sol.dispatch[&g.id].iter().sum::<f64>())
        .sum();
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut weighted = 0.0;
    let mut load = 0.0;
    for (&b, prices) in &sol.lmp {
        for (t, &p) in prices.iter().enumerate() {
            sum += p;
            count += 1;
            let d = inst.load_at(b, t);
            weighted += p * d;
            load += d;
        }
    }
    ScucMetrics {
        total_cost: sol.objective,
        renewable_energy,
        average_lmp: if count > 0 { sum / count as f64 } else { 0.0 },
        load_weighted_lmp: if load > 0.0 { weighted / load } else { 0.0 },
        anclph: congestion(inst, sol, 1e-6).anclph,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub status: String,
    pub metrics: Option<ScucMetrics>,
}

impl RunOutcome {
    pub fn from_result(inst: &ScucInstance, r: Result<ScucSolution, ScucError>) -> Self {
        match r {
            Ok(sol) => Self {
                status: match sol.status {
                    SolveStatus::Optimal => "optimal".into(),
                    SolveStatus::Feasible { gap } => format!("feasible (gap {gap:.2e})"),
                },
                metrics: Some(metrics(inst, &sol)),
            },
            Err(e) => Self {
                status: e.to_string(),
                metrics: None,
            },
        }
    }
}

/// The same day solved under fixed daily limits and under hourly limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlrComparison {
    pub daily: RunOutcome,
    pub hourly: RunOutcome,
}

fn pct(daily: f64, hourly: f64) -> Option<f64> {
    if daily == hourly {
        Some(0.0)
    } else if daily != 0.0 {
        Some(100.0 * (hourly - daily) / daily.abs())
    } else {
        None
    }
}

impl DlrComparison {
    /// `(metric, daily, hourly, change %)`; values are absent for a failed run.
    pub fn rows(&self) -> Vec<(&'static str, Option<f64>, Option<f64>, Option<f64>)> {
        let pick: [(&str, fn(&ScucMetrics) -> f64); 5] = [
            ("total_operational_cost_usd", |m| m.total_cost),
            ("total_renewable_generation_mwh", |m| m.renewable_energy),
            ("average_lmp_usd_mwh", |m| m.average_lmp),
            ("load_weighted_lmp_usd_mwh", |m| m.load_weighted_lmp),
            ("anclph", |m| m.anclph),
        ];
        pick.iter()
            .map(|&(name, f)| {
                let d = self.daily.metrics.as_ref().map(f);
                let h = self.hourly.metrics.as_ref().map(f);
                let delta = d.zip(h).and_then(|(d, h)| pct(d, h));
                (name, d, h, delta)
            })
            .collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), ScucError> {
        let mut w = csv::Writer::from_writer(File::create(path)?);
        w.write_record(["metric", "daily", "hourly", "change_pct"])?;
        let cell = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        w.write_record(["status", &self.daily.status, &self.hourly.status, ""])?;
        for (name, d, h, delta) in self.rows() {
            w.write_record([name.to_string(), cell(d), cell(h), cell(delta)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Solves `base` twice, once under each set of limits.
pub fn compare_dlr(base: &ScucInstance, daily: LineLimits, hourly: LineLimits, opts: &ScucOptions) -> DlrComparison {
    let mut d = base.clone();
    d.limits = daily;
    let mut h = base.clone();
    h.limits = hourly;
    // the daily commitment stays feasible under hourly limits at least as
    // loose, so it seeds the hourly search
    let rd = solve(&d, opts);
    let rh = solve_with_hint(&h, opts, rd.as_ref().ok().map(|s| &s.commitment));
    DlrComparison {
        daily: RunOutcome::from_result(&d, rd),
        hourly: RunOutcome::from_result(&h, rh),
    }
}
