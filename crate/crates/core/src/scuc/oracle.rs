//! Exhaustive commitment enumeration with an LP dispatch per schedule.
//!
//! Deliberately shares nothing with the MILP builder: start, stop and
//! no-load costs are summed outside the LP, each unit's output is written as
//! its fixed floor plus cost pieces, ramp limits become constants once the
//! schedule is known, and infeasible schedules are screened by run lengths.

use std::collections::BTreeMap;

use gridsynth_lp::{solve_lp, LpStatus, Problem, VarId};

use super::{transitions, ScucError, ScucInstance, ScucOptions};
use crate::grid::{BusId, GenId, Generator};

pub const MAX_ENUMERATED_BINARIES: usize = 20;

/// Minimum cost over every commitment schedule, `None` if none is feasible.
pub fn enumerate_commitments(inst: &ScucInstance, opts: &ScucOptions) -> Result<Option<f64>, ScucError> {
    inst.validate()?;
    let units: Vec<&Generator> = inst.committable().collect();
    let n_t = inst.hours;
    let bits = units.len() * n_t;
    if bits > MAX_ENUMERATED_BINARIES {
        return Err(ScucError::TooLarge { binaries: bits });
    }
    let mut best: Option<f64> = None;
    for mask in 0u64..(1u64 << bits) {
        let schedule: BTreeMap<GenId, Vec<bool>> = units
            .iter()
            .enumerate()
            .map(|(i, g)| (g.id, (0..n_t).map(|t| mask >> (i * n_t + t) & 1 == 1).collect()))
            .collect();
        if !units.iter().all(|g| schedule_allowed(inst, g, &schedule[&g.id])) {
            continue;
        }
        if let Some(cost) = dispatch_cost(inst, &schedule, opts) {
            best = Some(best.map_or(cost, |b: f64| b.min(cost)));
        }
    }
    Ok(best)
}

/// Run-length check of minimum up and down times, initial history included.
fn schedule_allowed(inst: &ScucInstance, g: &Generator, u: &[bool]) -> bool {
    let init = inst.initial_state(g);
    let mut state = init.on;
    let mut run = init.hours as usize;
    let need = |on: bool| if on { g.min_on as usize } else { g.min_off as usize };
    for &on in u {
        if on == state {
            run += 1;
        } else {
            if run < need(state) {
                return false;
            }
            state = on;
            run = 1;
        }
    }
    true
}

/// Cost at `p_min` and the (width, slope) pieces above it.
fn cost_pieces(g: &Generator, segments: usize) -> (f64, Vec<(f64, f64)>) {
    let c = &g.cost;
    let f = |x: f64| c.c0 + c.c1 * x + c.c2 * x * x;
    let span = g.p_max - g.p_min;
    if c.c2 == 0.0 {
        return (f(g.p_min), if span > 0.0 { vec![(span, c.c1)] } else { Vec::new() });
    }
    let n = segments.max(1);
    let w = span / n as f64;
    if w <= 0.0 || segments == 0 {
        return (f(g.p_min), Vec::new());
    }
    let pieces = (0..n)
        .map(|s| {
            let a = g.p_min + s as f64 * w;
            (w, (f(a + w) - f(a)) / w)
        })
        .collect();
    (f(g.p_min), pieces)
}

fn dispatch_cost(inst: &ScucInstance, schedule: &BTreeMap<GenId, Vec<bool>>, opts: &ScucOptions) -> Option<f64> {
    let n_t = inst.hours;
    let case = &inst.case;
    let mut fixed_cost = 0.0;
    let mut lp = Problem::new("dispatch");
    let mut terms: BTreeMap<BusId, Vec<Vec<(VarId, f64)>>> =
        case.buses.iter().map(|b| (b.id, vec![Vec::new(); n_t])).collect();
    // committed p_min per bus and hour, moved to the balance right-hand side
    let mut floors: BTreeMap<BusId, Vec<f64>> = case.buses.iter().map(|b| (b.id, vec![0.0; n_t])).collect();
    let mut spare = vec![0.0; n_t];
    let mut thermal_pieces: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); n_t];

    for g in &case.generators {
        if g.fuel.is_renewable() {
            for t in 0..n_t {
                let v = lp.add_var(format!("r{}_{t}", g.id), 0.0, inst.availability[&g.id][t], 0.0);
                terms.get_mut(&g.bus)?[t].push((v, 1.0));
            }
            continue;
        }
        let u = &schedule[&g.id];
        let init = inst.initial_state(g);
        let (su, sd) = transitions(init.on, u);
        let (at_min, pieces) = cost_pieces(g, opts.cost_segments);
        let mut above: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); n_t];
        for t in 0..n_t {
            if su[t] {
                fixed_cost += g.startup_cost();
            }
            if sd[t] {
                fixed_cost += g.cost.shutdown_cost;
            }
            if !u[t] {
                continue;
            }
            fixed_cost += at_min;
            spare[t] += g.p_max - g.p_min;
            floors.get_mut(&g.bus)?[t] += g.p_min;
            for (k, &(w, slope)) in pieces.iter().enumerate() {
                let v = lp.add_var(format!("s{}_{t}_{k}", g.id), 0.0, w, slope);
                above[t].push((v, 1.0));
            }
            terms.get_mut(&g.bus)?[t].extend(above[t].iter().copied());
            thermal_pieces[t].extend(above[t].iter().copied());
        }
        let ramp = 60.0 * g.ramp_rate;
        if ramp < g.p_max {
            let allowance = g.p_min.max(ramp);
            let floor = |t: usize| if u[t] { g.p_min } else { 0.0 };
            for t in 0..n_t {
                let (prev_floor, prev_on) = if t == 0 { (init.power, init.on) } else { (floor(t - 1), u[t - 1]) };
                let up_room = if prev_on { ramp } else { 0.0 } + if su[t] { allowance } else { 0.0 };
                let down_room = if u[t] { ramp } else { 0.0 } + if sd[t] { allowance } else { 0.0 };
                // (floor_t + Σ above_t) − (floor_{t−1} + Σ above_{t−1})
                let mut diff = above[t].clone();
                if t > 0 {
                    diff.extend(above[t - 1].iter().map(|&(v, c)| (v, -c)));
                }
                let shift = floor(t) - prev_floor;
                if diff.is_empty() {
                    if shift > up_room + 1e-9 || -shift > down_room + 1e-9 {
                        return None;
                    }
                    continue;
                }
                lp.add_row("ramp_up", f64::NEG_INFINITY, up_room - shift, &diff);
                let neg: Vec<(VarId, f64)> = diff.iter().map(|&(v, c)| (v, -c)).collect();
                lp.add_row("ramp_down", f64::NEG_INFINITY, down_room + shift, &neg);
            }
        }
    }

    if inst.reserve_fraction > 0.0 {
        for t in 0..n_t {
            let need = inst.reserve_fraction * inst.total_load(t);
            if thermal_pieces[t].is_empty() {
                if spare[t] < need - 1e-9 && inst.committable().next().is_some() {
                    return None;
                }
                continue;
            }
            lp.add_row("reserve", f64::NEG_INFINITY, spare[t] - need, &thermal_pieces[t]);
        }
    }

    if !case.lines.is_empty() {
        let angle: BTreeMap<BusId, Vec<VarId>> = case
            .buses
            .iter()
            .map(|b| {
                let free = b.id != case.reference_bus;
                let (lo, up) = if free { (f64::NEG_INFINITY, f64::INFINITY) } else { (0.0, 0.0) };
                (b.id, (0..n_t).map(|t| lp.add_var(format!("a{}_{t}", b.id), lo, up, 0.0)).collect())
            })
            .collect();
        for l in &case.lines {
            let b = case.base_mva / l.reactance;
            for t in 0..n_t {
                let (af, at) = (angle[&l.from_bus][t], angle[&l.to_bus][t]);
                // flow expressed through angles only
                let lim = inst.limit(l.id, t);
                lp.add_row("limit", -lim, lim, &[(af, b), (at, -b)]);
                terms.get_mut(&l.from_bus)?[t].extend([(af, -b), (at, b)]);
                terms.get_mut(&l.to_bus)?[t].extend([(af, b), (at, -b)]);
            }
        }
    }

    if let Some(penalty) = opts.shed_penalty {
        for bus in &case.buses {
            for t in 0..n_t {
                let v = lp.add_var("shed", 0.0, inst.load_at(bus.id, t), penalty);
                terms.get_mut(&bus.id)?[t].push((v, 1.0));
            }
        }
    }

    for (bus, per_t) in &terms {
        for (t, e) in per_t.iter().enumerate() {
            let rhs = inst.load_at(*bus, t) - floors[bus][t];
            if e.is_empty() {
                if rhs.abs() > 1e-9 {
                    return None;
                }
                continue;
            }
            lp.add_row("balance", rhs, rhs, e);
        }
    }

    let sol = solve_lp(&lp);
    (sol.status == LpStatus::Optimal).then(|| fixed_cost + sol.objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::tests::thermal;

    #[test]
    fn run_lengths() {
        let mut g = thermal(1, 1, 0.0, 10.0, 1.0);
        g.min_on = 2;
        g.min_off = 2;
        let inst = super::super::tests::single_bus(vec![g.clone()], vec![1.0; 4]);
        assert!(schedule_allowed(&inst, &g, &[true, true, false, false]));
        assert!(!schedule_allowed(&inst, &g, &[true, false, false, false]));
        assert!(!schedule_allowed(&inst, &g, &[true, true, false, true]));
        assert!(schedule_allowed(&inst, &g, &[false, false, false, true]));
    }
}
