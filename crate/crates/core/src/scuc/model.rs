use std::collections::BTreeMap;

use gridsynth_lp::{LpSolution, Problem, RowId, VarId};

use super::{transitions, ScucError, ScucInstance, ScucOptions, ScucSolution, SolveStatus};
use crate::grid::{BusId, GenId};

const PRIORITY_COMMIT: u8 = 2;
const PRIORITY_TRANSITION: u8 = 1;

#[derive(Debug, Clone)]
struct Commit {
    u: Vec<VarId>,
    su: Vec<VarId>,
    sd: Vec<VarId>,
}

#[derive(Debug, Clone)]
struct Unit {
    gen: GenId,
    initially_on: bool,
    commit: Option<Commit>,
    p: Vec<VarId>,
}

/// The commitment MILP plus the handles needed to read a solution back.
#[derive(Debug, Clone)]
pub struct ScucModel {
    pub problem: Problem,
    units: Vec<Unit>,
    angles: BTreeMap<BusId, Vec<VarId>>,
    flows: Vec<(u32, Vec<VarId>)>,
    shed: BTreeMap<BusId, Vec<VarId>>,
    balance: BTreeMap<BusId, Vec<RowId>>,
}

/// Builds the MILP. Variable and row names follow `<kind>_g{gen}_t{hour}`,
/// `<kind>_b{bus}_t{hour}` and `<kind>_l{line}_t{hour}`.
pub fn build(inst: &ScucInstance, opts: &ScucOptions) -> Result<ScucModel, ScucError> {
    inst.validate()?;
    let n_t = inst.hours;
    let case = &inst.case;
    let mut pb = Problem::new("scuc");
    let mut units = Vec::with_capacity(case.generators.len());
    let mut injections: BTreeMap<BusId, Vec<Vec<(VarId, f64)>>> =
        case.buses.iter().map(|b| (b.id, vec![Vec::new(); n_t])).collect();

    for g in &case.generators {
        let id = g.id;
        if g.fuel.is_renewable() {
            let avail = &inst.availability[&id];
            let p: Vec<VarId> = (0..n_t)
                .map(|t| pb.add_var(format!("p_g{id}_t{t}"), 0.0, avail[t], 0.0))
                .collect();
            for t in 0..n_t {
                injections.get_mut(&g.bus).expect("validated bus")[t].push((p[t], 1.0));
            }
            units.push(Unit {
                gen: id,
                initially_on: true,
                commit: None,
                p,
            });
            continue;
        }

        let init = inst.initial_state(g);
        let (forced, forced_value) = inst.forced_hours(g);
        let c = &g.cost;
        let quadratic = c.c2 > 0.0;
        let width = if opts.cost_segments > 0 {
            (g.p_max - g.p_min) / opts.cost_segments as f64
        } else {
            0.0
        };
        let f = |x: f64| c.c0 + c.c1 * x + c.c2 * x * x;
        let (u_cost, p_cost) = if quadratic { (f(g.p_min), 0.0) } else { (c.c0, c.c1) };

        let mut u = Vec::with_capacity(n_t);
        let mut su = Vec::with_capacity(n_t);
        let mut sd = Vec::with_capacity(n_t);
        let mut p = Vec::with_capacity(n_t);
        for t in 0..n_t {
            let ut = pb.add_binary(format!("u_g{id}_t{t}"), u_cost, PRIORITY_COMMIT);
            if t < forced {
                let v = if forced_value { 1.0 } else { 0.0 };
                pb.set_bounds(ut, v, v);
            }
            u.push(ut);
            su.push(pb.add_binary(format!("su_g{id}_t{t}"), g.startup_cost(), PRIORITY_TRANSITION));
            sd.push(pb.add_binary(format!("sd_g{id}_t{t}"), c.shutdown_cost, PRIORITY_TRANSITION));
            p.push(pb.add_var(format!("p_g{id}_t{t}"), 0.0, g.p_max, p_cost));
        }

        for t in 0..n_t {
            pb.add_row(format!("caplo_g{id}_t{t}"), 0.0, f64::INFINITY, &[(p[t], 1.0), (u[t], -g.p_min)]);
            pb.add_row(format!("caphi_g{id}_t{t}"), f64::NEG_INFINITY, 0.0, &[(p[t], 1.0), (u[t], -g.p_max)]);
            if quadratic && width > 0.0 {
                // p = p_min·u + Σ segments, each segment priced at its chord slope
                let mut entries = vec![(p[t], 1.0), (u[t], -g.p_min)];
                for s in 0..opts.cost_segments {
                    let a = g.p_min + s as f64 * width;
                    let slope = (f(a + width) - f(a)) / width;
                    let seg = pb.add_var(format!("seg{s}_g{id}_t{t}"), 0.0, width, slope);
                    entries.push((seg, -1.0));
                }
                pb.add_row(format!("pwl_g{id}_t{t}"), 0.0, 0.0, &entries);
            }
            // u_t − u_{t−1} − su_t + sd_t = 0
            let prev_on = if init.on { 1.0 } else { 0.0 };
            let mut entries = vec![(u[t], 1.0), (su[t], -1.0), (sd[t], 1.0)];
            let rhs = if t == 0 {
                prev_on
            } else {
                entries.push((u[t - 1], -1.0));
                0.0
            };
            pb.add_row(format!("logic_g{id}_t{t}"), rhs, rhs, &entries);
            pb.add_row(format!("excl_g{id}_t{t}"), f64::NEG_INFINITY, 1.0, &[(su[t], 1.0), (sd[t], 1.0)]);

            if g.min_on >= 2 {
                let lo = (t + 1).saturating_sub(g.min_on as usize);
                let mut e: Vec<(VarId, f64)> = (lo..=t).map(|k| (su[k], 1.0)).collect();
                e.push((u[t], -1.0));
                pb.add_row(format!("minup_g{id}_t{t}"), f64::NEG_INFINITY, 0.0, &e);
            }
            if g.min_off >= 2 {
                let lo = (t + 1).saturating_sub(g.min_off as usize);
                let mut e: Vec<(VarId, f64)> = (lo..=t).map(|k| (sd[k], 1.0)).collect();
                e.push((u[t], 1.0));
                pb.add_row(format!("mindn_g{id}_t{t}"), f64::NEG_INFINITY, 1.0, &e);
            }

            let ramp = 60.0 * g.ramp_rate;
            if ramp < g.p_max {
                let allowance = g.p_min.max(ramp);
                // p_t − p_{t−1} ≤ ramp·u_{t−1} + allowance·su_t
                // p_{t−1} − p_t ≤ ramp·u_t + allowance·sd_t
                if t == 0 {
                    let p0 = init.power;
                    let u0 = if init.on { ramp } else { 0.0 };
                    pb.add_row(format!("rup_g{id}_t{t}"), f64::NEG_INFINITY, p0 + u0, &[(p[0], 1.0), (su[0], -allowance)]);
                    pb.add_row(
                        format!("rdn_g{id}_t{t}"),
                        f64::NEG_INFINITY,
                        -p0,
                        &[(p[0], -1.0), (u[0], -ramp), (sd[0], -allowance)],
                    );
                } else {
                    pb.add_row(
                        format!("rup_g{id}_t{t}"),
                        f64::NEG_INFINITY,
                        0.0,
                        &[(p[t], 1.0), (p[t - 1], -1.0), (u[t - 1], -ramp), (su[t], -allowance)],
                    );
                    pb.add_row(
                        format!("rdn_g{id}_t{t}"),
                        f64::NEG_INFINITY,
                        0.0,
                        &[(p[t - 1], 1.0), (p[t], -1.0), (u[t], -ramp), (sd[t], -allowance)],
                    );
                }
            }
            injections.get_mut(&g.bus).expect("validated bus")[t].push((p[t], 1.0));
        }
        units.push(Unit {
            gen: id,
            initially_on: init.on,
            commit: Some(Commit { u, su, sd }),
            p,
        });
    }

    if inst.reserve_fraction > 0.0 {
        for t in 0..n_t {
            let mut e = Vec::new();
            for (unit, g) in units.iter().zip(&case.generators) {
                if let Some(c) = &unit.commit {
                    e.push((c.u[t], g.p_max));
                    e.push((unit.p[t], -1.0));
                }
            }
            if !e.is_empty() {
                pb.add_row(format!("res_t{t}"), inst.reserve_fraction * inst.total_load(t), f64::INFINITY, &e);
            }
        }
    }

    let mut angles = BTreeMap::new();
    let mut flows = Vec::new();
    if !case.lines.is_empty() {
        for b in &case.buses {
            let fixed = b.id == case.reference_bus;
            let v: Vec<VarId> = (0..n_t)
                .map(|t| {
                    let (lo, up) = if fixed { (0.0, 0.0) } else { (f64::NEG_INFINITY, f64::INFINITY) };
                    pb.add_var(format!("theta_b{}_t{t}", b.id), lo, up, 0.0)
                })
                .collect();
            angles.insert(b.id, v);
        }
        for l in &case.lines {
            let susceptance = case.base_mva / l.reactance;
            let mut fv = Vec::with_capacity(n_t);
            for t in 0..n_t {
                let lim = inst.limit(l.id, t);
                let f = pb.add_var(format!("f_l{}_t{t}", l.id), -lim, lim, 0.0);
                pb.add_row(
                    format!("flow_l{}_t{t}", l.id),
                    0.0,
                    0.0,
                    &[
                        (f, 1.0),
                        (angles[&l.from_bus][t], -susceptance),
                        (angles[&l.to_bus][t], susceptance),
                    ],
                );
                let inj = |bus: BusId, coef: f64, inj: &mut BTreeMap<BusId, Vec<Vec<(VarId, f64)>>>| {
                    inj.get_mut(&bus).expect("validated bus")[t].push((f, coef));
                };
                inj(l.from_bus, -1.0, &mut injections);
                inj(l.to_bus, 1.0, &mut injections);
                fv.push(f);
            }
            flows.push((l.id, fv));
        }
    }

    let mut shed = BTreeMap::new();
    if let Some(penalty) = opts.shed_penalty {
        for b in &case.buses {
            let v: Vec<VarId> = (0..n_t)
                .map(|t| pb.add_var(format!("shed_b{}_t{t}", b.id), 0.0, inst.load_at(b.id, t), penalty))
                .collect();
            for (t, &s) in v.iter().enumerate() {
                injections.get_mut(&b.id).expect("bus")[t].push((s, 1.0));
            }
            shed.insert(b.id, v);
        }
    }

    let mut balance = BTreeMap::new();
    for (bus, per_t) in injections {
        let rows: Vec<RowId> = per_t
            .iter()
            .enumerate()
            .map(|(t, e)| {
                let d = inst.load_at(bus, t);
                pb.add_row(format!("bal_b{bus}_t{t}"), d, d, e)
            })
            .collect();
        balance.insert(bus, rows);
    }

    Ok(ScucModel {
        problem: pb,
        units,
        angles,
        flows,
        shed,
        balance,
    })
}

impl ScucModel {
    /// Pins `u`, `su` and `sd` to the given schedule.
    pub fn fix_commitment(&mut self, inst: &ScucInstance, commitment: &BTreeMap<GenId, Vec<bool>>) -> Result<(), ScucError> {
        for unit in &self.units {
            let Some(c) = &unit.commit else { continue };
            let u = commitment
                .get(&unit.gen)
                .filter(|u| u.len() == inst.hours)
                .ok_or_else(|| ScucError::Malformed(format!("no commitment for unit {}", unit.gen)))?;
            let (su, sd) = transitions(unit.initially_on, u);
            for t in 0..inst.hours {
                for (var, on) in [(c.u[t], u[t]), (c.su[t], su[t]), (c.sd[t], sd[t])] {
                    let v = if on { 1.0 } else { 0.0 };
                    self.problem.set_bounds(var, v, v);
                }
            }
        }
        Ok(())
    }

    /// Commitment with every unit on whenever its relaxed `u` is positive,
    /// respecting hours pinned by the initial state.
    pub fn round_up(&self, inst: &ScucInstance, x: &[f64]) -> BTreeMap<GenId, Vec<bool>> {
        self.round_at(inst, x, 1e-6)
    }

    /// Commitment with a unit on wherever its relaxed `u` exceeds `threshold`.
    pub fn round_at(&self, inst: &ScucInstance, x: &[f64], threshold: f64) -> BTreeMap<GenId, Vec<bool>> {
        let mut out = BTreeMap::new();
        for (unit, g) in self.units.iter().zip(&inst.case.generators) {
            let Some(c) = &unit.commit else { continue };
            let (forced, value) = inst.forced_hours(g);
            let u = (0..inst.hours)
                .map(|t| if t < forced { value } else { x[c.u[t].0] > threshold })
                .collect();
            out.insert(unit.gen, u);
        }
        out
    }

    pub(super) fn prices(&self, sol: &LpSolution) -> BTreeMap<BusId, Vec<f64>> {
        self.balance
            .iter()
            .map(|(&b, rows)| (b, rows.iter().map(|r| sol.row_duals[r.0]).collect()))
            .collect()
    }

    pub(super) fn infeasibility_hint(&self, row: Option<usize>) -> String {
        let Some(r) = row else {
            return "the relaxation is feasible but no integral commitment is (minimum up/down or ramp limits)".into();
        };
        let name = &self.problem.rows()[r].name;
        let class = match name.split('_').next().unwrap_or("") {
            "bal" => "nodal power balance",
            "res" => "spinning reserve",
            "caplo" | "caphi" => "unit output limits",
            "logic" | "excl" => "start/stop logic",
            "minup" | "mindn" => "minimum up/down time",
            "rup" | "rdn" => "ramp limits",
            "flow" => "line flow limits",
            "pwl" => "cost segments",
            _ => "unknown constraint class",
        };
        format!("{class} (row {name})")
    }

    pub(super) fn extract(
        &self,
        inst: &ScucInstance,
        x: &[f64],
        status: SolveStatus,
        objective: f64,
        best_bound: f64,
        nodes: usize,
    ) -> ScucSolution {
        let bits = |vars: &[VarId]| vars.iter().map(|v| x[v.0] > 0.5).collect::<Vec<bool>>();
        let vals = |vars: &[VarId]| vars.iter().map(|v| x[v.0]).collect::<Vec<f64>>();
        let mut sol = ScucSolution {
            status,
            objective,
            best_bound,
            nodes,
            commitment: BTreeMap::new(),
            startup: BTreeMap::new(),
            shutdown: BTreeMap::new(),
            dispatch: BTreeMap::new(),
            angles: self.angles.iter().map(|(&b, v)| (b, vals(v))).collect(),
            flows: self.flows.iter().map(|(l, v)| (*l, vals(v))).collect(),
            shed: self.shed.iter().map(|(&b, v)| (b, vals(v))).collect(),
            lmp: BTreeMap::new(),
        };
        if sol.angles.is_empty() {
            for b in &inst.case.buses {
                sol.angles.insert(b.id, vec![0.0; inst.hours]);
            }
        }
        for unit in &self.units {
            sol.dispatch.insert(unit.gen, vals(&unit.p));
            if let Some(c) = &unit.commit {
                sol.commitment.insert(unit.gen, bits(&c.u));
                sol.startup.insert(unit.gen, bits(&c.su));
                sol.shutdown.insert(unit.gen, bits(&c.sd));
            }
        }
        sol
    }
}
