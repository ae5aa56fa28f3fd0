//! Constraint replay: checks a solution against the instance directly,
//! without the MILP.

use super::{transitions, ScucInstance, ScucOptions, ScucSolution};
use crate::grid::Generator;

/// Absolute MW (or rad, or $ relative) slack allowed by the replay.
pub const REPLAY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: String,
    pub amount: f64,
}

/// Running cost of `p` for a committed unit, quadratic curve replaced by its
/// chords between equally spaced breakpoints.
pub fn chord_cost(g: &Generator, p: f64, segments: usize) -> f64 {
    let c = &g.cost;
    let f = |x: f64| c.c0 + c.c1 * x + c.c2 * x * x;
    if c.c2 == 0.0 {
        return f(p);
    }
    let n = segments.max(1) as f64;
    let w = (g.p_max - g.p_min) / n;
    if w <= 0.0 || segments == 0 {
        return f(g.p_min);
    }
    let k = ((p - g.p_min) / w).floor().clamp(0.0, n - 1.0);
    let a = g.p_min + k * w;
    f(a) + (f(a + w) - f(a)) / w * (p - a)
}

/// Every violated constraint, empty for a valid solution.
pub fn replay(inst: &ScucInstance, sol: &ScucSolution, opts: &ScucOptions) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check = |name: String, excess: f64| {
        if !(excess <= REPLAY_TOL) {
            out.push(Violation {
                constraint: name,
                amount: excess,
            });
        }
    };
    let n_t = inst.hours;
    let case = &inst.case;
    let mut cost = 0.0;

    for g in &case.generators {
        let Some(p) = sol.dispatch.get(&g.id).filter(|p| p.len() == n_t) else {
            check(format!("dispatch of unit {} missing", g.id), f64::INFINITY);
            continue;
        };
        if g.fuel.is_renewable() {
            for t in 0..n_t {
                check(format!("unit {} hour {t}: negative output", g.id), -p[t]);
                check(
                    format!("unit {} hour {t}: above availability", g.id),
                    p[t] - inst.availability[&g.id][t],
                );
            }
            continue;
        }
        let Some(u) = sol.commitment.get(&g.id).filter(|u| u.len() == n_t) else {
            check(format!("commitment of unit {} missing", g.id), f64::INFINITY);
            continue;
        };
        let init = inst.initial_state(g);
        let (su, sd) = transitions(init.on, u);
        if sol.startup.get(&g.id) != Some(&su) || sol.shutdown.get(&g.id) != Some(&sd) {
            check(format!("unit {}: start/stop indicators disagree with commitment", g.id), f64::INFINITY);
        }
        let (forced, value) = inst.forced_hours(g);
        for t in 0..forced {
            if u[t] != value {
                check(format!("unit {} hour {t}: initial state pins commitment", g.id), f64::INFINITY);
            }
        }
        // run lengths
        let mut state = init.on;
        let mut run = init.hours as usize;
        for (t, &on) in u.iter().enumerate() {
            if on == state {
                run += 1;
            } else {
                let need = if state { g.min_on } else { g.min_off } as usize;
                if run < need {
                    check(format!("unit {} hour {t}: minimum {} time", g.id, if state { "up" } else { "down" }), (need - run) as f64);
                }
                state = on;
                run = 1;
            }
        }
        let ramp = 60.0 * g.ramp_rate;
        let allowance = g.p_min.max(ramp);
        for t in 0..n_t {
            let (lo, hi) = if u[t] { (g.p_min, g.p_max) } else { (0.0, 0.0) };
            check(format!("unit {} hour {t}: below minimum output", g.id), lo - p[t]);
            check(format!("unit {} hour {t}: above maximum output", g.id), p[t] - hi);
            if ramp < g.p_max {
                let (prev, prev_on) = if t == 0 { (init.power, init.on) } else { (p[t - 1], u[t - 1]) };
                let up = if prev_on { ramp } else { 0.0 } + if su[t] { allowance } else { 0.0 };
                let down = if u[t] { ramp } else { 0.0 } + if sd[t] { allowance } else { 0.0 };
                check(format!("unit {} hour {t}: ramp up", g.id), p[t] - prev - up);
                check(format!("unit {} hour {t}: ramp down", g.id), prev - p[t] - down);
            }
            if u[t] {
                cost += chord_cost(g, p[t], opts.cost_segments);
            }
            if su[t] {
                cost += g.startup_cost();
            }
            if sd[t] {
                cost += g.cost.shutdown_cost;
            }
        }
    }

    for t in 0..n_t {
        if inst.reserve_fraction > 0.0 && inst.committable().next().is_some() {
            let spare: f64 = inst
                .committable()
                .map(|g| {
                    let on = sol.commitment.get(&g.id).is_some_and(|u| u.get(t) == Some(&true));
                    let p = sol.dispatch.get(&g.id).and_then(|p| p.get(t)).copied().unwrap_or(0.0);
                    let cap = if on { g.p_max } else { 0.0 };
                    cap - p
                })
                .sum();
            check(format!("hour {t}: spinning reserve"), inst.reserve_fraction * inst.total_load(t) - spare);
        }
        for b in &case.buses {
            let mut net = -inst.load_at(b.id, t);
            for g in case.generators.iter().filter(|g| g.bus == b.id) {
                net += sol.dispatch.get(&g.id).and_then(|p| p.get(t)).copied().unwrap_or(0.0);
            }
            for l in &case.lines {
                let f = sol.flows.get(&l.id).and_then(|f| f.get(t)).copied().unwrap_or(0.0);
                if l.from_bus == b.id {
                    net -= f;
                }
                if l.to_bus == b.id {
                    net += f;
                }
            }
            if let Some(s) = sol.shed.get(&b.id).and_then(|s| s.get(t)) {
                match opts.shed_penalty {
                    Some(pen) => {
                        net += s;
                        cost += pen * s;
                        check(format!("bus {} hour {t}: negative shedding", b.id), -s);
                        check(format!("bus {} hour {t}: shedding above load", b.id), s - inst.load_at(b.id, t));
                    }
                    None => check(format!("bus {} hour {t}: shedding not allowed", b.id), s.abs()),
                }
            }
            check(format!("bus {} hour {t}: power balance", b.id), net.abs());
        }
        if !case.lines.is_empty() {
            let theta = |bus: u32| sol.angles.get(&bus).and_then(|a| a.get(t)).copied().unwrap_or(f64::NAN);
            check(format!("hour {t}: reference angle"), theta(case.reference_bus).abs());
            for l in &case.lines {
                let f = sol.flows.get(&l.id).and_then(|f| f.get(t)).copied().unwrap_or(f64::NAN);
                let dc = case.base_mva / l.reactance * (theta(l.from_bus) - theta(l.to_bus));
                check(format!("line {} hour {t}: DC flow relation", l.id), (f - dc).abs());
                check(format!("line {} hour {t}: thermal limit", l.id), f.abs() - inst.limit(l.id, t));
            }
        }
    }

    let scale = 1.0 + sol.objective.abs();
    check("objective".into(), (cost - sol.objective).abs() / scale);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::tests::thermal;

    #[test]
    fn chords_touch_curve_at_breakpoints() {
        let mut g = thermal(1, 1, 30.0, 120.0, 10.0);
        g.cost.c2 = 0.02;
        let f = |x: f64| g.cost.running_cost(x);
        for x in [30.0, 60.0, 90.0, 120.0] {
            assert!((chord_cost(&g, x, 3) - f(x)).abs() < 1e-9);
        }
        // over-estimation bounded by c2·w²/4
        let worst = (0..=900).map(|i| 30.0 + i as f64 * 0.1).map(|x| chord_cost(&g, x, 3) - f(x)).fold(0.0, f64::max);
        assert!(worst > 0.0 && worst <= 0.02 * 30.0 * 30.0 / 4.0 + 1e-9);
    }
}
