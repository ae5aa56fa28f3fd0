//! Simplex and branch-and-bound against brute-force vertex enumeration.

use gridsynth_lp::{dual_objective, solve_lp, solve_mip, solve_mip_from, LpStatus, MipOptions, MipStatus, Problem, VarId};
use proptest::prelude::*;

/// Each constraint as `g·x <= h`.
fn halfspaces(p: &Problem) -> Vec<(Vec<f64>, f64)> {
    let n = p.num_vars();
    let mut out = Vec::new();
    for (j, v) in p.vars().iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        if v.upper.is_finite() {
            out.push((e.clone(), v.upper));
        }
        if v.lower.is_finite() {
            out.push((e.iter().map(|x| -x).collect(), -v.lower));
        }
    }
    for r in p.rows() {
        let mut g = vec![0.0; n];
        for (v, c) in &r.entries {
            g[v.0] += c;
        }
        if r.upper.is_finite() {
            out.push((g.clone(), r.upper));
        }
        if r.lower.is_finite() {
            out.push((g.iter().map(|x| -x).collect(), -r.lower));
        }
    }
    out
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(p, c);
        b.swap(p, c);
        for i in 0..n {
            if i != c {
                let f = a[i][c] / a[c][c];
                for k in c..n {
                    a[i][k] -= f * a[c][k];
                }
                b[i] -= f * b[c];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Minimum over feasible vertices; `None` when no vertex is feasible.
fn vertex_oracle(p: &Problem) -> Option<f64> {
    let n = p.num_vars();
    let hs = halfspaces(p);
    let mut best: Option<f64> = None;
    for combo in combinations(hs.len(), n) {
        let a: Vec<Vec<f64>> = combo.iter().map(|&i| hs[i].0.clone()).collect();
        let b: Vec<f64> = combo.iter().map(|&i| hs[i].1).collect();
        let Some(x) = solve_square(a, b) else { continue };
        let feasible = hs
            .iter()
            .all(|(g, h)| g.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() <= h + 1e-7);
        if feasible {
            let obj = p.objective(&x);
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    }
    best
}

fn random_problem(
    costs: &[f64],
    rows: &[(Vec<f64>, f64, u8)],
    ub: f64,
) -> Problem {
    let mut p = Problem::new("rand");
    let vars: Vec<VarId> = costs
        .iter()
        .enumerate()
        .map(|(j, &c)| p.add_var(format!("x{j}"), 0.0, ub, c))
        .collect();
    for (i, (coefs, rhs, kind)) in rows.iter().enumerate() {
        let entries: Vec<(VarId, f64)> = vars.iter().copied().zip(coefs.iter().copied()).collect();
        let (lo, up) = match kind % 3 {
            0 => (f64::NEG_INFINITY, *rhs),
            1 => (*rhs, f64::INFINITY),
            _ => (*rhs, *rhs),
        };
        p.add_row(format!("r{i}"), lo, up, &entries);
    }
    p
}

fn coef() -> impl Strategy<Value = f64> {
    (-4i32..=4).prop_map(|v| v as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn simplex_matches_vertex_enumeration(
        costs in prop::collection::vec(coef(), 3),
        rows in prop::collection::vec((prop::collection::vec(coef(), 3), (-6i32..=6).prop_map(|v| v as f64), 0u8..3), 1..4),
    ) {
        let p = random_problem(&costs, &rows, 5.0);
        let sol = solve_lp(&p);
        match vertex_oracle(&p) {
            Some(best) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - best).abs() <= 1e-7 * (1.0 + best.abs()),
                    "simplex {} vs oracle {}", sol.objective, best);
                prop_assert!(p.max_violation(&sol.x) <= 1e-7);
                let dual = dual_objective(&p, &sol.row_duals, 1e-9).expect("dual bounded");
                prop_assert!((dual - sol.objective).abs() <= 1e-6 * (1.0 + best.abs()));
            }
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
        }
    }

    #[test]
    fn branch_and_bound_matches_enumeration(
        costs in prop::collection::vec(coef(), 4),
        rows in prop::collection::vec((prop::collection::vec(coef(), 4), (-5i32..=5).prop_map(|v| v as f64), 0u8..2), 1..4),
    ) {
        let mut p = Problem::new("bin");
        let vars: Vec<VarId> = costs.iter().enumerate()
            .map(|(j, &c)| p.add_binary(format!("b{j}"), c, 1)).collect();
        let y = p.add_var("y", 0.0, 3.0, 0.5);
        for (i, (coefs, rhs, kind)) in rows.iter().enumerate() {
            let mut e: Vec<(VarId, f64)> = vars.iter().copied().zip(coefs.iter().copied()).collect();
            e.push((y, 1.0));
            let (lo, up) = if kind % 2 == 0 { (f64::NEG_INFINITY, *rhs) } else { (*rhs, f64::INFINITY) };
            p.add_row(format!("r{i}"), lo, up, &e);
        }
        // enumerate binaries, continuous part by the LP oracle
        let mut best: Option<f64> = None;
        for mask in 0..16u32 {
            let mut q = p.clone();
            for (k, v) in vars.iter().enumerate() {
                let b = ((mask >> k) & 1) as f64;
                q.set_bounds(*v, b, b);
            }
            if let Some(obj) = vertex_oracle(&q) {
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        let opts = MipOptions { rel_gap: 0.0, abs_gap: 1e-9, ..Default::default() };
        let sol = solve_mip(&p, &opts);
        match best {
            Some(b) => {
                prop_assert_eq!(sol.status, MipStatus::Optimal);
                prop_assert!((sol.objective - b).abs() <= 1e-7 * (1.0 + b.abs()));
                prop_assert!(p.max_violation(&sol.x) <= 1e-7);
            }
            None => prop_assert_eq!(sol.status, MipStatus::Infeasible),
        }
        // seeding with any feasible point leaves the optimum unchanged
        if best.is_some() {
            let mut seed = None;
            for mask in (0..16u32).rev() {
                let mut q = p.clone();
                for (k, v) in vars.iter().enumerate() {
                    let b = ((mask >> k) & 1) as f64;
                    q.set_bounds(*v, b, b);
                }
                let lp = solve_lp(&q);
                if lp.status == LpStatus::Optimal {
                    seed = Some(lp.x);
                    break;
                }
            }
            let seeded = solve_mip_from(&p, &opts, seed);
            prop_assert_eq!(seeded.status, MipStatus::Optimal);
            prop_assert!((seeded.objective - sol.objective).abs() <= 1e-7 * (1.0 + sol.objective.abs()));
        }
    }
}

#[test]
fn textbook_lp() {
    // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
    let mut p = Problem::new("wyndor");
    let x = p.add_var("x", 0.0, f64::INFINITY, -3.0);
    let y = p.add_var("y", 0.0, f64::INFINITY, -5.0);
    p.add_row("c1", f64::NEG_INFINITY, 4.0, &[(x, 1.0)]);
    p.add_row("c2", f64::NEG_INFINITY, 12.0, &[(y, 2.0)]);
    let c3 = p.add_row("c3", f64::NEG_INFINITY, 18.0, &[(x, 3.0), (y, 2.0)]);
    let sol = solve_lp(&p);
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective + 36.0).abs() < 1e-9);
    assert!((sol.x[0] - 2.0).abs() < 1e-9 && (sol.x[1] - 6.0).abs() < 1e-9);
    // shadow price of c3 is -1 (one more unit of capacity saves 1)
    assert!((sol.row_duals[c3.0] + 1.0).abs() < 1e-9);
}

#[test]
fn free_variable_unbounded() {
    let mut p = Problem::new("unb");
    let x = p.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
    let y = p.add_var("y", 0.0, 1.0, 0.0);
    p.add_row("r", f64::NEG_INFINITY, 3.0, &[(x, 1.0), (y, 1.0)]);
    assert_eq!(solve_lp(&p).status, LpStatus::Unbounded);
}

#[test]
fn contradictory_rows_infeasible() {
    let mut p = Problem::new("inf");
    let x = p.add_var("x", 0.0, 10.0, 1.0);
    p.add_row("lo", 5.0, f64::INFINITY, &[(x, 1.0)]);
    p.add_row("hi", f64::NEG_INFINITY, 4.0, &[(x, 1.0)]);
    let sol = solve_lp(&p);
    assert_eq!(sol.status, LpStatus::Infeasible);
    assert!(sol.infeasible_row.is_some());
}

#[test]
fn equality_system_with_free_variables() {
    // two-bus DC flow: theta free, flow defined by reactance
    let mut p = Problem::new("dc");
    let g1 = p.add_var("g1", 0.0, 100.0, 10.0);
    let g2 = p.add_var("g2", 0.0, 100.0, 40.0);
    let f = p.add_var("f", -50.0, 50.0, 0.0);
    let t1 = p.add_var("t1", 0.0, 0.0, 0.0);
    let t2 = p.add_var("t2", f64::NEG_INFINITY, f64::INFINITY, 0.0);
    let b1 = p.add_row("b1", 0.0, 0.0, &[(g1, 1.0), (f, -1.0)]);
    let b2 = p.add_row("b2", 80.0, 80.0, &[(g2, 1.0), (f, 1.0)]);
    p.add_row("fd", 0.0, 0.0, &[(f, 1.0), (t1, -10.0), (t2, 10.0)]);
    let sol = solve_lp(&p);
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective - (50.0 * 10.0 + 30.0 * 40.0)).abs() < 1e-7);
    assert!((sol.row_duals[b1.0] - 10.0).abs() < 1e-9);
    assert!((sol.row_duals[b2.0] - 40.0).abs() < 1e-9);
}
