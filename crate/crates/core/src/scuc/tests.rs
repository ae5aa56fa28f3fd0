use std::collections::BTreeMap;

use chrono::{TimeZone, Utc};
use gridsynth_lp::{dual_objective, LpStatus};
use proptest::prelude::*;

use super::*;
use crate::grid::tests::{bus, line, thermal};
use crate::grid::{Fuel, Generator, GridCase};

pub fn single_bus(gens: Vec<Generator>, load: Vec<f64>) -> ScucInstance {
    let case = GridCase::new(vec![bus(1, 30.0, -97.0, "A")], vec![], gens, None).unwrap();
    let hours = load.len();
    let mut inst = ScucInstance::new(
        case,
        Utc.with_ymd_and_hms(2019, 1, 3, 0, 0, 0).unwrap(),
        hours,
        [(1, load)].into(),
        BTreeMap::new(),
        LineLimits::PerLine(BTreeMap::new()),
    );
    inst.reserve_fraction = 0.0;
    inst
}

/// Cheap unit at bus 1 behind a line into load bus 2 with an expensive unit.
pub fn two_bus(limit: f64, load: f64) -> ScucInstance {
    let case = GridCase::new(
        vec![bus(1, 30.0, -97.0, "A"), bus(2, 30.5, -96.5, "A")],
        vec![line(1, 1, 2, 0.1, limit)],
        vec![thermal(1, 1, 0.0, 200.0, 10.0), thermal(2, 2, 0.0, 200.0, 40.0)],
        None,
    )
    .unwrap();
    let mut inst = ScucInstance::new(
        case.clone(),
        Utc.with_ymd_and_hms(2019, 1, 3, 0, 0, 0).unwrap(),
        1,
        [(2, vec![load])].into(),
        BTreeMap::new(),
        static_limits(&case),
    );
    inst.reserve_fraction = 0.0;
    inst
}

fn opts() -> ScucOptions {
    let mut o = ScucOptions::default();
    o.mip.rel_gap = 1e-9;
    o
}

#[test]
fn structure_of_smallest_model() {
    let inst = single_bus(vec![thermal(1, 1, 10.0, 200.0, 20.0)], vec![100.0]);
    let m = build(&inst, &opts()).unwrap();
    let p = &m.problem;
    assert_eq!(p.num_integer(), 3);
    assert_eq!(p.vars().iter().filter(|v| !v.integer).count(), 1);
    assert!(p.rows().iter().all(|r| !r.name.starts_with("flow")));
    assert!(p.vars().iter().any(|v| v.name == "u_g1_t0"));
    assert!(p.vars().iter().any(|v| v.name == "p_g1_t0"));
    assert!(p.rows().iter().any(|r| r.name == "bal_b1_t0"));
}

#[test]
fn reserve_rows_follow_fraction() {
    let mut inst = single_bus(vec![thermal(1, 1, 10.0, 200.0, 20.0)], vec![100.0, 90.0]);
    let count = |inst: &ScucInstance| build(inst, &opts()).unwrap().problem.rows().iter().filter(|r| r.name.starts_with("res_")).count();
    assert_eq!(count(&inst), 0);
    inst.reserve_fraction = 0.03;
    assert_eq!(count(&inst), 2);
}

#[test]
fn limit_modes_shape_flow_bounds() {
    let mut inst = two_bus(50.0, 80.0);
    inst.hours = 2;
    inst.load = [(2, vec![80.0, 80.0])].into();
    let bounds = |inst: &ScucInstance| -> Vec<f64> {
        let m = build(inst, &opts()).unwrap();
        m.problem.vars().iter().filter(|v| v.name.starts_with("f_l1")).map(|v| v.upper).collect()
    };
    assert_eq!(bounds(&inst), [50.0, 50.0]);
    inst.limits = LineLimits::PerHour([(1, vec![50.0, 70.0])].into());
    assert_eq!(bounds(&inst), [50.0, 70.0]);
}

#[test]
fn one_bus_hand_lp() {
    let inst = single_bus(vec![thermal(1, 1, 10.0, 200.0, 20.0)], vec![100.0]);
    let sol = solve(&inst, &opts()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert_eq!(sol.commitment[&1], [true]);
    assert!((sol.dispatch[&1][0] - 100.0).abs() < 1e-9);
    assert!((sol.objective - 2000.0).abs() < 1e-9);
    assert!(replay(&inst, &sol, &opts()).is_empty());
}

#[test]
fn load_below_minimum_output_is_infeasible() {
    let inst = single_bus(vec![thermal(1, 1, 50.0, 200.0, 20.0), thermal(2, 1, 60.0, 100.0, 25.0)], vec![20.0]);
    match solve(&inst, &opts()) {
        Err(ScucError::Infeasible { .. }) => {}
        other => panic!("expected infeasible, got {other:?}"),
    }
    let mut o = opts();
    o.shed_penalty = Some(1000.0);
    let sol = solve(&inst, &o).unwrap();
    assert!((sol.shed[&1][0] - 20.0).abs() < 1e-9);
}

fn toy_three_by_four() -> ScucInstance {
    let mut a = thermal(1, 1, 20.0, 100.0, 15.0);
    a.cost = crate::grid::GeneratorCostSpec::flat(100.0, 15.0, 0.01, 300.0, 0.0);
    a.min_on = 2;
    a.ramp_rate = 0.5;
    let mut b = thermal(2, 1, 10.0, 60.0, 25.0);
    b.cost = crate::grid::GeneratorCostSpec::flat(20.0, 25.0, 0.0, 50.0, 10.0);
    b.min_off = 2;
    let mut c = thermal(3, 1, 5.0, 40.0, 45.0);
    c.cost = crate::grid::GeneratorCostSpec::flat(0.0, 45.0, 0.05, 0.0, 0.0);
    let mut inst = single_bus(vec![a, b, c], vec![40.0, 95.0, 150.0, 70.0]);
    inst.reserve_fraction = 0.05;
    inst
}

#[test]
fn matches_enumeration_on_toy() {
    let inst = toy_three_by_four();
    let sol = solve(&inst, &opts()).unwrap();
    let best = enumerate_commitments(&inst, &opts()).unwrap().unwrap();
    assert!((sol.objective - best).abs() <= 1e-6 * best.abs(), "{} vs {best}", sol.objective);
    assert!(replay(&inst, &sol, &opts()).is_empty(), "{:?}", replay(&inst, &sol, &opts()));
}

#[test]
fn uniform_price_without_congestion() {
    let mut inst = two_bus(500.0, 80.0);
    inst.case.generators[0].cost.c1 = 25.0;
    inst.case.generators[1].cost.c1 = 60.0;
    let sol = solve(&inst, &opts()).unwrap();
    for b in [1, 2] {
        assert!((sol.lmp[&b][0] - 25.0).abs() < 1e-6, "{:?}", sol.lmp);
    }
}

#[test]
fn congested_prices_split() {
    let inst = two_bus(50.0, 80.0);
    let sol = solve(&inst, &opts()).unwrap();
    assert!((sol.lmp[&1][0] - 10.0).abs() < 1e-9, "{:?}", sol.lmp);
    assert!((sol.lmp[&2][0] - 40.0).abs() < 1e-9);
    assert!((sol.flows[&1][0] - 50.0).abs() < 1e-9);
    assert!(replay(&inst, &sol, &opts()).is_empty());
    let rep = congestion(&inst, &sol, 1e-6);
    assert_eq!(rep.hours[0].full, [1]);
    assert_eq!(rep.anclph, 1.0);
}

#[test]
fn zero_load_prices() {
    let inst = two_bus(50.0, 0.0);
    let sol = solve(&inst, &opts()).unwrap();
    for b in [1, 2] {
        let p = sol.lmp[&b][0];
        assert!(p.abs() < 1e-9 || (p - 10.0).abs() < 1e-9, "{p}");
    }
}

#[test]
fn fixed_commitment_duality() {
    let inst = toy_three_by_four();
    let sol = solve(&inst, &opts()).unwrap();
    let (m, lp) = fixed_commitment_lp(&inst, &sol.commitment, &opts()).unwrap();
    assert_eq!(lp.status, LpStatus::Optimal);
    let dual = dual_objective(&m.problem, &lp.row_duals, 1e-9).unwrap();
    assert!((dual - lp.objective).abs() <= 1e-6 * lp.objective.abs());
}

#[test]
fn congestion_classes() {
    let mut inst = two_bus(100.0, 80.0);
    inst.hours = 3;
    inst.load = [(2, vec![0.0; 3])].into();
    let sol = ScucSolution {
        status: SolveStatus::Optimal,
        objective: 0.0,
        best_bound: 0.0,
        nodes: 0,
        commitment: BTreeMap::new(),
        startup: BTreeMap::new(),
        shutdown: BTreeMap::new(),
        dispatch: BTreeMap::new(),
        angles: BTreeMap::new(),
        flows: [(1, vec![-100.0, 95.0, 50.0])].into(),
        shed: BTreeMap::new(),
        lmp: BTreeMap::new(),
    };
    let rep = congestion(&inst, &sol, 1e-6);
    assert_eq!(rep.hours[0].full, [1]);
    assert!(rep.hours[0].near.is_empty());
    assert_eq!(rep.hours[1].near, [1]);
    assert!(rep.hours[2].full.is_empty() && rep.hours[2].near.is_empty());
    assert!((rep.anclph - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn identical_limits_compare_equal() {
    let inst = two_bus(50.0, 80.0);
    let cmp = compare_dlr(&inst, static_limits(&inst.case), LineLimits::PerHour([(1, vec![50.0])].into()), &opts());
    for (name, _, _, delta) in cmp.rows() {
        assert_eq!(delta, Some(0.0), "{name}");
    }
}

#[test]
fn raised_rating_lowers_cost() {
    let inst = two_bus(50.0, 80.0);
    let cmp = compare_dlr(&inst, static_limits(&inst.case), LineLimits::PerHour([(1, vec![65.0])].into()), &opts());
    let d = cmp.daily.metrics.unwrap().total_cost;
    let h = cmp.hourly.metrics.unwrap().total_cost;
    assert!((d - (500.0 + 1200.0)).abs() < 1e-9);
    assert!((h - (650.0 + 600.0)).abs() < 1e-9);
}

#[test]
fn renewables_take_priority() {
    let mut inst = single_bus(vec![thermal(1, 1, 0.0, 200.0, 20.0)], vec![100.0, 100.0]);
    let mut w = thermal(2, 1, 0.0, 80.0, 0.0);
    w.fuel = Fuel::Wind;
    inst.case.generators.push(w);
    inst.availability.insert(2, vec![30.0, 120.0]);
    let sol = solve(&inst, &opts()).unwrap();
    assert!((sol.dispatch[&2][0] - 30.0).abs() < 1e-9);
    assert!((sol.dispatch[&2][1] - 100.0).abs() < 1e-9);
    assert!(replay(&inst, &sol, &opts()).is_empty());
}

#[test]
fn initial_state_pins_hours() {
    let mut g = thermal(1, 1, 50.0, 200.0, 20.0);
    g.min_on = 3;
    let mut inst = single_bus(vec![g, thermal(2, 1, 0.0, 200.0, 5.0)], vec![60.0; 4]);
    inst.initial.insert(
        1,
        InitialState {
            on: true,
            hours: 1,
            power: 60.0,
        },
    );
    let sol = solve(&inst, &opts()).unwrap();
    assert_eq!(sol.commitment[&1], [true, true, false, false]);
    assert!(replay(&inst, &sol, &opts()).is_empty());
}

#[test]
fn replay_catches_tampering() {
    let inst = two_bus(50.0, 80.0);
    let mut sol = solve(&inst, &opts()).unwrap();
    sol.flows.get_mut(&1).unwrap()[0] = 55.0;
    let v = replay(&inst, &sol, &opts());
    assert!(v.iter().any(|v| v.constraint.contains("thermal limit")));
    assert!(v.iter().any(|v| v.constraint.contains("power balance")));
}

fn arb_unit(id: u32) -> impl Strategy<Value = Generator> {
    (0.0..40.0f64, 40.0..120.0f64, 5.0..50.0f64, 0.0..0.05f64, 0.0..200.0f64, 0.0..300.0f64, 0u32..3, 0u32..3, 0.2..3.0f64)
        .prop_map(move |(pmin, pmax, c1, c2, c0, su, up, dn, ramp)| {
            let mut g = thermal(id, 1, pmin, pmax, c1);
            g.cost = crate::grid::GeneratorCostSpec::flat(c0, c1, c2, su, 0.0);
            g.min_on = up;
            g.min_off = dn;
            g.ramp_rate = ramp;
            g
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn branch_and_bound_matches_enumeration(
        a in arb_unit(1),
        b in arb_unit(2),
        c in arb_unit(3),
        load in prop::collection::vec(10.0..200.0f64, 4),
        reserve in 0.0..0.1f64,
    ) {
        let mut inst = single_bus(vec![a, b, c], load);
        inst.reserve_fraction = reserve;
        let oracle = enumerate_commitments(&inst, &opts()).unwrap();
        match (solve(&inst, &opts()), oracle) {
            (Ok(sol), Some(best)) => {
                prop_assert!((sol.objective - best).abs() <= 1e-6 * best.abs().max(1.0), "{} vs {}", sol.objective, best);
                let v = replay(&inst, &sol, &opts());
                prop_assert!(v.is_empty(), "{:?}", v);
            }
            (Err(ScucError::Infeasible { .. }), None) => {}
            (got, want) => prop_assert!(false, "solver {:?} vs enumeration {:?}", got.map(|s| s.objective), want),
        }
    }
}
