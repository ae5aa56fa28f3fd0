//! Branch-and-bound over integer variables.
//!
//! Every node is solved by warm-starting the dual simplex from whatever basis
//! the previous node left behind: only bounds change between nodes, so the
//! basis stays dual feasible and no phase one is ever needed. The search
//! dives into the nearer child, backtracks to the best open bound once an
//! incumbent exists, branches on pseudocosts and fixes variables whose root
//! reduced cost already exceeds the gap.

use std::time::{Duration, Instant};

use crate::model::Problem;
use crate::simplex::{DualSimplex, LpStatus, SimplexOptions};

#[derive(Debug, Clone, Copy)]
pub struct MipOptions {
    pub rel_gap: f64,
    pub abs_gap: f64,
    pub integrality_tol: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
    pub simplex: SimplexOptions,
}

impl Default for MipOptions {
    fn default() -> Self {
        Self {
            rel_gap: 1e-4,
            abs_gap: 1e-6,
            integrality_tol: 1e-6,
            time_limit: None,
            node_limit: None,
            simplex: SimplexOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MipStatus {
    Optimal,
    /// Incumbent found but the search stopped early; carries the relative gap.
    Feasible { gap: f64 },
    Infeasible,
    Unbounded,
    /// Search stopped before any incumbent was found.
    NoSolution,
}

#[derive(Debug, Clone)]
pub struct MipSolution {
    pub status: MipStatus,
    pub objective: f64,
    pub best_bound: f64,
    pub x: Vec<f64>,
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Row index from the root relaxation that proved infeasibility.
    pub infeasible_row: Option<usize>,
}

struct Node {
    /// Bound overrides relative to the root problem.
    fixes: Vec<(usize, f64, f64)>,
    parent_bound: f64,
    /// Variable, direction (up) and distance moved by the last branching.
    branched: Option<(usize, bool, f64)>,
}

/// Average objective change per unit of rounding, per variable and direction.
struct Pseudocosts {
    sum: Vec<[f64; 2]>,
    count: Vec<[u32; 2]>,
    total: [f64; 2],
    seen: [u32; 2],
}

impl Pseudocosts {
    fn new(n: usize) -> Self {
        Self {
            sum: vec![[0.0; 2]; n],
            count: vec![[0; 2]; n],
            total: [0.0; 2],
            seen: [0; 2],
        }
    }

    fn record(&mut self, j: usize, up: bool, per_unit: f64) {
        let k = up as usize;
        self.sum[j][k] += per_unit;
        self.count[j][k] += 1;
        self.total[k] += per_unit;
        self.seen[k] += 1;
    }

    fn estimate(&self, j: usize, k: usize) -> f64 {
        if self.count[j][k] > 0 {
            self.sum[j][k] / self.count[j][k] as f64
        } else if self.seen[k] > 0 {
            self.total[k] / self.seen[k] as f64
        } else {
            1.0
        }
    }

    fn score(&self, j: usize, frac: f64) -> f64 {
        let down = (self.estimate(j, 0) * frac).max(1e-6);
        let up = (self.estimate(j, 1) * (1.0 - frac)).max(1e-6);
        down * up
    }
}

fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    if !incumbent.is_finite() {
        return f64::INFINITY;
    }
    ((incumbent - bound) / incumbent.abs().max(1e-9)).max(0.0)
}

pub fn solve_mip(problem: &Problem, opts: &MipOptions) -> MipSolution {
    solve_mip_from(problem, opts, None)
}

/// Branch-and-bound seeded with a known solution. A start that violates a
/// bound, a row or integrality by more than the integrality tolerance is
/// ignored.
pub fn solve_mip_from(problem: &Problem, opts: &MipOptions, start_x: Option<Vec<f64>>) -> MipSolution {
    let start = Instant::now();
    let mut lp = DualSimplex::with_options(problem, opts.simplex);
    let int_vars: Vec<usize> = (0..problem.num_vars())
        .filter(|&j| problem.vars()[j].integer)
        .collect();
    let root_bounds: Vec<(f64, f64)> = int_vars
        .iter()
        .map(|&j| (problem.vars()[j].lower, problem.vars()[j].upper))
        .collect();

    let mut incumbent: Option<Vec<f64>> = None;
    let mut incumbent_obj = f64::INFINITY;
    if let Some(x) = start_x {
        let tol = opts.integrality_tol;
        let integral = int_vars.iter().all(|&j| (x[j] - x[j].round()).abs() <= tol);
        if x.len() == problem.num_vars() && integral && problem.max_violation(&x) <= tol.max(1e-6) {
            incumbent_obj = problem.objective(&x);
            incumbent = Some(x);
        } else {
            log::debug!("branch-and-bound: start solution rejected");
        }
    }
    let mut root_bounds = root_bounds;
    let mut pool: Vec<Node> = Vec::new();
    let mut dive = Some(Node {
        fixes: Vec::new(),
        parent_bound: f64::NEG_INFINITY,
        branched: None,
    });
    let mut costs = Pseudocosts::new(problem.num_vars());
    let mut root: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut fixed_at_obj = f64::INFINITY;
    let mut nodes = 0usize;
    let mut root_bound = f64::NEG_INFINITY;
    let mut open_bound_at_stop: Option<f64> = None;
    let mut infeasible_row = None;

    let prune_level = |inc: f64| -> f64 {
        if inc.is_finite() {
            inc - opts.abs_gap.max(opts.rel_gap * inc.abs())
        } else {
            f64::INFINITY
        }
    };

    loop {
        // reduced-cost fixing against the root relaxation, redone whenever the incumbent improves
        if let Some((obj, x, d)) = &root {
            if incumbent_obj < fixed_at_obj {
                fixed_at_obj = incumbent_obj;
                let level = prune_level(incumbent_obj);
                let mut count = 0;
                for (k, &j) in int_vars.iter().enumerate() {
                    let (lo, up) = root_bounds[k];
                    if lo == up {
                        continue;
                    }
                    if x[j] <= lo + opts.integrality_tol && obj + d[j] * (up - lo) > level {
                        root_bounds[k].1 = lo;
                        count += 1;
                    } else if x[j] >= up - opts.integrality_tol && obj - d[j] * (up - lo) > level {
                        root_bounds[k].0 = up;
                        count += 1;
                    }
                }
                if count > 0 {
                    log::debug!("branch-and-bound: {count} variables fixed by reduced cost");
                }
            }
        }

        let node = match dive.take() {
            Some(n) => n,
            None => {
                if pool.is_empty() {
                    break;
                }
                // depth first until an incumbent exists, best bound afterwards
                let k = if incumbent.is_some() {
                    (0..pool.len())
                        .min_by(|&a, &b| pool[a].parent_bound.total_cmp(&pool[b].parent_bound))
                        .expect("non-empty pool")
                } else {
                    pool.len() - 1
                };
                pool.swap_remove(k)
            }
        };
        if node.parent_bound >= prune_level(incumbent_obj) {
            continue;
        }
        let out_of_time = opts.time_limit.is_some_and(|t| start.elapsed() >= t);
        let out_of_nodes = opts.node_limit.is_some_and(|n| nodes >= n);
        if out_of_time || out_of_nodes {
            let open = pool
                .iter()
                .map(|n| n.parent_bound)
                .fold(node.parent_bound, f64::min);
            open_bound_at_stop = Some(open);
            break;
        }
        nodes += 1;

        let mut changes: Vec<(usize, f64, f64)> = int_vars
            .iter()
            .zip(&root_bounds)
            .map(|(&j, &(lo, up))| (j, lo, up))
            .collect();
        let mut empty = false;
        for &(j, lo, up) in &node.fixes {
            let k = int_vars.binary_search(&j).expect("fixes touch integer variables");
            let c = &mut changes[k];
            c.1 = c.1.max(lo);
            c.2 = c.2.min(up);
            empty |= c.1 > c.2;
        }
        if empty {
            continue;
        }
        lp.set_bounds_many(&changes);
        let sol = lp.solve();
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                if nodes == 1 {
                    infeasible_row = sol.infeasible_row;
                }
                continue;
            }
            LpStatus::Unbounded => {
                if nodes == 1 {
                    return MipSolution {
                        status: MipStatus::Unbounded,
                        objective: f64::NEG_INFINITY,
                        best_bound: f64::NEG_INFINITY,
                        x: sol.x,
                        nodes,
                        lp_iterations: sol.iterations,
                        infeasible_row: None,
                    };
                }
                continue;
            }
            LpStatus::IterationLimit => {
                log::warn!("branch-and-bound: node LP hit its iteration limit, node dropped");
                continue;
            }
        }
        if nodes == 1 {
            root_bound = sol.objective;
            root = Some((sol.objective, sol.x.clone(), sol.reduced_costs.clone()));
        }
        if let Some((j, up, dist)) = node.branched {
            costs.record(j, up, (sol.objective - node.parent_bound).max(0.0) / dist);
        }
        if sol.objective >= prune_level(incumbent_obj) {
            continue;
        }

        // best pseudocost score within the highest-priority class
        let mut branch: Option<(usize, f64)> = None;
        let mut best_key = (0u8, 0.0f64);
        for &j in &int_vars {
            let v = sol.x[j];
            let frac = v - v.floor();
            if frac <= opts.integrality_tol || frac >= 1.0 - opts.integrality_tol {
                continue;
            }
            let key = (problem.vars()[j].priority, costs.score(j, frac));
            if branch.is_none() || key.0 > best_key.0 || (key.0 == best_key.0 && key.1 > best_key.1) {
                best_key = key;
                branch = Some((j, v));
            }
        }

        match branch {
            None => {
                let mut x = sol.x.clone();
                for &j in &int_vars {
                    x[j] = x[j].round();
                }
                incumbent_obj = sol.objective;
                incumbent = Some(x);
                log::debug!("branch-and-bound: incumbent {incumbent_obj} at node {nodes}");
            }
            Some((j, v)) => {
                let (lo, up) = lp.bounds(j);
                let frac = v - v.floor();
                let mut down = node.fixes.clone();
                down.push((j, lo, v.floor()));
                let mut upf = node.fixes;
                upf.push((j, v.ceil(), up));
                let down = Node {
                    fixes: down,
                    parent_bound: sol.objective,
                    branched: Some((j, false, frac)),
                };
                let upn = Node {
                    fixes: upf,
                    parent_bound: sol.objective,
                    branched: Some((j, true, 1.0 - frac)),
                };
                // dive into the nearer child
                if frac >= 0.5 {
                    pool.push(down);
                    dive = Some(upn);
                } else {
                    pool.push(upn);
                    dive = Some(down);
                }
            }
        }
    }
    let lp_iterations = lp.iterations();
    match incumbent {
        Some(x) => {
            let bound = match open_bound_at_stop {
                Some(b) => b.min(incumbent_obj),
                None => incumbent_obj,
            };
            let gap = relative_gap(incumbent_obj, bound);
            let status = if open_bound_at_stop.is_none() || gap <= opts.rel_gap {
                MipStatus::Optimal
            } else {
                MipStatus::Feasible { gap }
            };
            MipSolution {
                status,
                objective: incumbent_obj,
                best_bound: bound,
                x,
                nodes,
                lp_iterations,
                infeasible_row: None,
            }
        }
        None => MipSolution {
            status: if open_bound_at_stop.is_some() {
                MipStatus::NoSolution
            } else {
                MipStatus::Infeasible
            },
            objective: f64::INFINITY,
            best_bound: if open_bound_at_stop.is_some() { root_bound } else { f64::INFINITY },
            x: Vec::new(),
            nodes,
            lp_iterations,
            infeasible_row,
        },
    }
}
