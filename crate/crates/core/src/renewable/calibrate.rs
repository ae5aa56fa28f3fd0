//! Least-squares fit of farm capacities and hourly coefficients to a target
//! production series.
//!
//! The fit runs on the products `a = k·C` and the capacities `C`: output is
//! then `min(a·v³, C)`, piecewise linear, and the adjacent-hour bound on `k`
//! becomes the linear `|a_h − a_{h−1}| ≤ step·C`. Fixing which branch of
//! every `min` is active cuts out a polyhedral piece on which the objective
//! is a convex quadratic. Each iteration solves the QP over the current
//! piece, then flips the branches whose boundary binds with a positive
//! multiplier, so the search walks downhill from piece to piece. Walks start
//! from the given parameters, from the fit without clipping, and from a
//! convex relaxation with a separate output per farm-hour; the best end
//! point is returned.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus};
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{wind_power, RenewableError, WindFarmSpec, MAX_CAPACITY_SHIFT, MAX_COEFF_STEP};

#[derive(Debug, Clone)]
pub struct CalibrationProblem {
    pub farms: Vec<WindFarmSpec>,
    /// Hub-height speed per farm and hour, m/s.
    pub hub_speeds: Vec<Vec<f64>>,
    /// Target total production per hour, MW.
    pub targets: Vec<f64>,
    /// UTC hour of day of the first sample.
    pub first_hour: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Stop when an iteration lowers the objective by less than this
    /// fraction.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub farms: Vec<WindFarmSpec>,
    pub initial_objective: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy)]
enum Regime {
    Off,
    Full,
    /// Mid-range with cubed speed.
    Partial(f64),
}

struct Model<'a> {
    regimes: Vec<Vec<Regime>>,
    targets: &'a [f64],
    first_hour: usize,
    cap_scale: Vec<f64>,
    /// Scaled capacity window.
    cap_bounds: Vec<(f64, f64)>,
}

/// Variables per farm: 24 scaled products `a' = a / (step·s)` then the scaled
/// capacity `C' = C / s`, with `s` the farm's capacity scale. The step bound
/// reads `|a'_h − a'_{h−1}| ≤ C'` in these units.
const STRIDE: usize = 25;

/// Branch multipliers above this share of the mean target (MW) flip.
const FLIP_THRESHOLD: f64 = 1e-6;

/// Price per MW of gap between a relaxed output and either branch, as a
/// share of the mean target.
const GAP_PRICE: f64 = 1e-6;

impl Model<'_> {
    fn output(&self, x: &[f64], i: usize, h: usize) -> f64 {
        let cs = self.cap_scale[i];
        let c = x[i * STRIDE + 24] * cs;
        match self.regimes[i][h] {
            Regime::Off => 0.0,
            Regime::Full => c,
            Regime::Partial(v3) => (x[i * STRIDE + (h + self.first_hour) % 24] * MAX_COEFF_STEP * cs * v3).min(c),
        }
    }

    /// Whether each partial farm-hour sits on the capacity branch at `x`.
    fn branches(&self, x: &[f64]) -> Vec<Vec<bool>> {
        (0..self.regimes.len())
            .map(|i| {
                let c = x[i * STRIDE + 24] * self.cap_scale[i];
                (0..self.targets.len())
                    .map(|h| matches!(self.regimes[i][h], Regime::Partial(_)) && self.output(x, i, h) >= c)
                    .collect()
            })
            .collect()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        (0..self.targets.len())
            .map(|h| {
                let total: f64 = (0..self.regimes.len()).map(|i| self.output(x, i, h)).sum();
                (total - self.targets[h]).powi(2)
            })
            .sum()
    }

    /// Squared-residual rows `(variable, MW per unit)` per hour for a branch
    /// selection; partial farm-hours map to `partial(i, h, v3)` when uncapped.
    fn residual_hessian(
        &self,
        n: usize,
        mut partial: impl FnMut(usize, usize, f64) -> (usize, f64),
        capped: impl Fn(usize, usize) -> bool,
    ) -> (Vec<Vec<f64>>, Vec<f64>) {
        let farms = self.regimes.len();
        let mut hess = vec![vec![0.0; n]; n];
        let mut lin = vec![0.0; n];
        for (h, &t) in self.targets.iter().enumerate() {
            let row: Vec<(usize, f64)> = (0..farms)
                .filter_map(|i| {
                    let cs = self.cap_scale[i];
                    let ic = i * STRIDE + 24;
                    match self.regimes[i][h] {
                        Regime::Off => None,
                        Regime::Full => Some((ic, cs)),
                        Regime::Partial(_) if capped(i, h) => Some((ic, cs)),
                        Regime::Partial(v3) => Some(partial(i, h, v3)),
                    }
                })
                .collect();
            for &(j, vj) in &row {
                lin[j] -= 2.0 * t * vj;
                for &(k, vk) in &row {
                    hess[j][k] += 2.0 * vj * vk;
                }
            }
        }
        (hess, lin)
    }

    /// Step, sign and capacity-window rows shared by every fit.
    fn parameter_rows(&self, rows: &mut Rows) {
        for i in 0..self.regimes.len() {
            let base = i * STRIDE;
            let c = base + 24;
            for h in 0..24 {
                let prev = base + (h + 23) % 24;
                rows.push(&[(base + h, 1.0), (prev, -1.0), (c, -1.0)], 0.0);
                rows.push(&[(base + h, -1.0), (prev, 1.0), (c, -1.0)], 0.0);
                rows.push(&[(base + h, -1.0)], 0.0);
            }
            let (lo, hi) = self.cap_bounds[i];
            rows.push(&[(c, 1.0)], hi);
            rows.push(&[(c, -1.0)], -lo);
        }
    }

    fn coeff_index(&self, i: usize, h: usize) -> usize {
        i * STRIDE + (h + self.first_hour) % 24
    }

    /// Least-squares optimum over the piece where partial farm-hour `(i, h)`
    /// is on the capacity branch exactly when `capped[i][h]`, plus the
    /// farm-hours whose branch boundary binds with a positive multiplier,
    /// strongest first. Without `bounded` the branch boundaries are dropped,
    /// which for an all-uncapped selection is the fit without clipping at
    /// capacity. `None` when the QP solver fails.
    fn piece_fit(&self, capped: &[Vec<bool>], bounded: bool) -> Option<(Vec<f64>, Vec<(usize, usize)>)> {
        let n = self.regimes.len() * STRIDE;
        let (hess, lin) = self.residual_hessian(
            n,
            |i, h, v3| (self.coeff_index(i, h), MAX_COEFF_STEP * self.cap_scale[i] * v3),
            |i, h| capped[i][h],
        );
        let mut rows = Rows::new(n);
        self.parameter_rows(&mut rows);
        let mut branch_rows = Vec::new();
        if bounded {
            for (i, regimes) in self.regimes.iter().enumerate() {
                let cs = self.cap_scale[i];
                for (h, regime) in regimes.iter().enumerate() {
                    if let Regime::Partial(v3) = *regime {
                        // the chosen branch is the smaller one
                        let sign = if capped[i][h] { -1.0 } else { 1.0 };
                        let r = rows.push(
                            &[(self.coeff_index(i, h), sign * MAX_COEFF_STEP * cs * v3), (i * STRIDE + 24, -sign * cs)],
                            0.0,
                        );
                        branch_rows.push((r, i, h));
                    }
                }
            }
        }
        let (x, z) = solve_qp(&hess, &lin, rows)?;
        let mean = self.targets.iter().sum::<f64>() / self.targets.len() as f64;
        let mut flips: Vec<(usize, usize, usize)> = branch_rows
            .into_iter()
            .filter(|&(r, _, _)| z[r] > FLIP_THRESHOLD * (1.0 + mean))
            .collect();
        flips.sort_by(|a, b| z[b.0].total_cmp(&z[a.0]));
        Some((x, flips.into_iter().map(|(_, i, h)| (i, h)).collect()))
    }

    /// Convex relaxation: every partial farm-hour gets its own output
    /// `y ≤ min(a·v³, C)`, and a small price on both gaps pulls `y` onto the
    /// smaller branch. Returns the parameter block only.
    fn relaxed_fit(&self) -> Option<Vec<f64>> {
        let base = self.regimes.len() * STRIDE;
        let mut outputs = Vec::new();
        for (i, regimes) in self.regimes.iter().enumerate() {
            for (h, regime) in regimes.iter().enumerate() {
                if let Regime::Partial(v3) = *regime {
                    outputs.push((i, h, v3));
                }
            }
        }
        let n = base + outputs.len();
        let mut next = base;
        let (hess, mut lin) = self.residual_hessian(
            n,
            |i, _, _| {
                next += 1;
                (next - 1, self.cap_scale[i])
            },
            |_, _| false,
        );
        let mean = self.targets.iter().sum::<f64>() / self.targets.len() as f64;
        let price = GAP_PRICE * (1.0 + mean);
        let mut rows = Rows::new(n);
        self.parameter_rows(&mut rows);
        for (k, &(i, h, v3)) in outputs.iter().enumerate() {
            let (y, a, c) = (base + k, self.coeff_index(i, h), i * STRIDE + 24);
            let cs = self.cap_scale[i];
            rows.push(&[(y, 1.0), (a, -MAX_COEFF_STEP * v3)], 0.0);
            rows.push(&[(y, 1.0), (c, -1.0)], 0.0);
            rows.push(&[(y, -1.0)], 0.0);
            lin[a] += price * MAX_COEFF_STEP * cs * v3;
            lin[c] += price * cs;
            lin[y] -= 2.0 * price * cs;
        }
        let (mut x, _) = solve_qp(&hess, &lin, rows)?;
        x.truncate(base);
        Some(x)
    }

    /// Descends from `x` piece by piece. Each step fits the current piece,
    /// then moves to the first unvisited neighbour whose optimum is lower:
    /// every binding boundary flipped at once, then one at a time. Returns
    /// the best point, its objective, QP solves used and convergence.
    fn walk(&self, mut x: Vec<f64>, tolerance: f64, budget: usize) -> (Vec<f64>, f64, usize, bool) {
        let mut f = self.objective(&x);
        let floor = 1e-24 * self.targets.iter().map(|t| t * t).sum::<f64>().max(1.0);
        let mut capped = self.branches(&x);
        let mut visited = HashSet::new();
        let mut current = None;
        let mut solves = 0;
        while solves < budget {
            if f <= floor {
                return (x, f, solves, true);
            }
            let (piece_x, flips) = match current.take() {
                Some(fit) => fit,
                None => {
                    solves += 1;
                    let Some((mut next, flips)) = self.piece_fit(&capped, true) else {
                        log::warn!("calibration: piece fit failed");
                        return (x, f, solves, false);
                    };
                    self.repair(&mut next);
                    (next, flips)
                }
            };
            visited.insert(capped.clone());
            let f_piece = self.objective(&piece_x);
            let mut decrease = 0.0;
            if f_piece < f {
                decrease = (f - f_piece) / f;
                x = piece_x;
                f = f_piece;
            }
            let mut candidates = vec![flips.clone()];
            if flips.len() > 1 {
                candidates.extend(flips.iter().map(|&fl| vec![fl]));
            }
            let mut moved = false;
            for cand in candidates.into_iter().filter(|c| !c.is_empty()) {
                if solves >= budget {
                    break;
                }
                let mut trial = capped.clone();
                for &(i, h) in &cand {
                    trial[i][h] = !trial[i][h];
                }
                if !visited.insert(trial.clone()) {
                    continue;
                }
                solves += 1;
                let Some((mut next, next_flips)) = self.piece_fit(&trial, true) else {
                    continue;
                };
                self.repair(&mut next);
                if self.objective(&next) < f {
                    capped = trial;
                    current = Some((next, next_flips));
                    moved = true;
                    break;
                }
            }
            if !moved && decrease < tolerance {
                return (x, f, solves, true);
            }
        }
        (x, f, solves, false)
    }

    fn repair(&self, x: &mut [f64]) {
        for i in 0..self.regimes.len() {
            repair_farm(&mut x[i * STRIDE..(i + 1) * STRIDE], self.cap_bounds[i]);
        }
    }
}

/// Constraint rows `row·x ≤ b`, collected by column.
struct Rows {
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
}

impl Rows {
    fn new(n: usize) -> Self {
        Self {
            cols: vec![Vec::new(); n],
            b: Vec::new(),
        }
    }

    fn push(&mut self, terms: &[(usize, f64)], rhs: f64) -> usize {
        let r = self.b.len();
        for &(j, v) in terms {
            self.cols[j].push((r, v));
        }
        self.b.push(rhs);
        r
    }
}

/// Minimises `½xᵀPx + qᵀx` subject to the rows; returns the primal point
/// and row multipliers.
fn solve_qp(hess: &[Vec<f64>], lin: &[f64], rows: Rows) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = lin.len();
    let mut p_cols = vec![0];
    let (mut p_rows, mut p_vals) = (Vec::new(), Vec::new());
    for k in 0..n {
        for (j, row) in hess.iter().enumerate().take(k + 1) {
            if row[k] != 0.0 {
                p_rows.push(j);
                p_vals.push(row[k]);
            }
        }
        p_cols.push(p_rows.len());
    }
    let p = CscMatrix::new(n, n, p_cols, p_rows, p_vals);
    let m = rows.b.len();
    let mut a_cols = vec![0];
    let (mut a_rows, mut a_vals) = (Vec::new(), Vec::new());
    for mut col in rows.cols {
        col.sort_by_key(|e| e.0);
        for (r, v) in col {
            a_rows.push(r);
            a_vals.push(v);
        }
        a_cols.push(a_rows.len());
    }
    let a = CscMatrix::new(m, n, a_cols, a_rows, a_vals);
    let settings = DefaultSettings::<f64> {
        verbose: false,
        ..Default::default()
    };
    let mut solver = DefaultSolver::new(&p, lin, &a, &rows.b, &[NonnegativeConeT(m)], settings).ok()?;
    solver.solve();
    if !matches!(solver.solution.status, SolverStatus::Solved | SolverStatus::AlmostSolved) {
        return None;
    }
    Some((solver.solution.x.clone(), solver.solution.z.clone()))
}

/// Makes one farm's `[a'_0..a'_23, C']` exactly feasible: clamps, then
/// shrinks the profile toward its mean until every step is within `C'`.
fn repair_farm(z: &mut [f64], (lo, hi): (f64, f64)) {
    let n = STRIDE - 1;
    z[n] = z[n].clamp(lo, hi);
    for v in z[..n].iter_mut() {
        *v = v.max(0.0);
    }
    let step = (0..n).map(|h| (z[h] - z[(h + n - 1) % n]).abs()).fold(0.0, f64::max);
    if step > z[n] {
        let mean = z[..n].iter().sum::<f64>() / n as f64;
        let keep = z[n] / step;
        for v in z[..n].iter_mut() {
            *v = mean + keep * (*v - mean);
        }
    }
}

pub fn calibrate(problem: &CalibrationProblem) -> Result<CalibrationResult, RenewableError> {
    calibrate_with(problem, &CalibrationOptions::default())
}

pub fn calibrate_with(
    problem: &CalibrationProblem,
    opts: &CalibrationOptions,
) -> Result<CalibrationResult, RenewableError> {
    let horizon = problem.targets.len();
    let fail = |m: String| Err(RenewableError::Calibration(m));
    if horizon == 0 || horizon % 24 != 0 {
        return fail(format!("horizon of {horizon} hours is not a whole number of days"));
    }
    if problem.hub_speeds.len() != problem.farms.len() {
        return fail("one speed series per farm is required".into());
    }
    if problem.hub_speeds.iter().any(|s| s.len() != horizon) {
        return fail("speed series and targets differ in length".into());
    }
    if problem.targets.iter().any(|t| !(*t >= 0.0)) {
        return fail("targets must be non-negative".into());
    }
    for f in &problem.farms {
        f.validate()?;
        if (f.capacity - f.initial_capacity).abs() > MAX_CAPACITY_SHIFT {
            return fail(format!("farm {} starts outside its capacity window", f.gen_id));
        }
    }

    let regimes = problem
        .farms
        .iter()
        .zip(&problem.hub_speeds)
        .map(|(f, speeds)| {
            speeds
                .iter()
                .map(|&v| {
                    if v < f.cut_in || v >= f.cut_out {
                        Regime::Off
                    } else if v >= f.rated {
                        Regime::Full
                    } else {
                        Regime::Partial(v.powi(3))
                    }
                })
                .collect()
        })
        .collect();
    let cap_scale: Vec<f64> = problem.farms.iter().map(|f| f.initial_capacity.max(1.0)).collect();
    let model = Model {
        regimes,
        targets: &problem.targets,
        first_hour: problem.first_hour % 24,
        cap_bounds: problem
            .farms
            .iter()
            .zip(&cap_scale)
            .map(|(f, cs)| {
                (
                    (f.initial_capacity - MAX_CAPACITY_SHIFT).max(0.0) / cs,
                    (f.initial_capacity + MAX_CAPACITY_SHIFT) / cs,
                )
            })
            .collect(),
        cap_scale,
    };

    let mut x = Vec::with_capacity(problem.farms.len() * STRIDE);
    for (i, f) in problem.farms.iter().enumerate() {
        let cs = model.cap_scale[i];
        x.extend(f.hourly_coeff.iter().map(|k| k * f.capacity / (MAX_COEFF_STEP * cs)));
        x.push(f.capacity / cs);
    }
    model.repair(&mut x);
    let initial_objective = model.objective(&x);
    // start points: the given parameters, the convex fit without clipping,
    // and the relaxation; each descends and the best end point wins
    let mut seeds = vec![x];
    let unclipped = vec![vec![false; horizon]; problem.farms.len()];
    seeds.extend(model.piece_fit(&unclipped, false).map(|(s, _)| s));
    seeds.extend(model.relaxed_fit());
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut iterations = 0;
    let mut converged = false;
    for mut seed in seeds {
        model.repair(&mut seed);
        let budget = opts.max_iterations.saturating_sub(iterations);
        if budget == 0 {
            break;
        }
        let (x, f, used, done) = model.walk(seed, opts.tolerance, budget);
        iterations += used;
        if best.as_ref().map_or(true, |b| f < b.1) {
            best = Some((x, f));
            converged = done;
        }
    }
    let Some((x, f)) = best else {
        return fail("no start point".into());
    };
    debug_assert!(f <= initial_objective);
    if !converged {
        log::warn!("calibration stopped after {iterations} iterations without meeting the tolerance");
    }

    let farms = problem
        .farms
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mut out = f.clone();
            let c = x[i * STRIDE + 24];
            out.capacity = (c * model.cap_scale[i]).clamp(
                (f.initial_capacity - MAX_CAPACITY_SHIFT).max(0.0),
                f.initial_capacity + MAX_CAPACITY_SHIFT,
            );
            // a zero-capacity farm keeps its coefficients
            if c > 0.0 {
                for h in 0..24 {
                    out.hourly_coeff[h] = MAX_COEFF_STEP * x[i * STRIDE + h] / c;
                }
            }
            out
        })
        .collect();
    Ok(CalibrationResult {
        farms,
        initial_objective,
        objective: f,
        iterations,
        converged,
    })
}

/// Objective at given farm parameters, evaluated through the forward model.
pub fn production_error(problem: &CalibrationProblem, farms: &[WindFarmSpec]) -> f64 {
    (0..problem.targets.len())
        .map(|h| {
            let hod = (h + problem.first_hour) % 24;
            let total: f64 = farms
                .iter()
                .zip(&problem.hub_speeds)
                .map(|(f, s)| wind_power(f, s[h], hod))
                .sum();
            (total - problem.targets[h]).powi(2)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::super::coeff_step;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn repair_is_feasible_and_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let bounds = (0.5, 1.5);
        for _ in 0..50 {
            let mut z: Vec<f64> = (0..STRIDE).map(|_| rng.gen_range(-3.0..8.0)).collect();
            repair_farm(&mut z, bounds);
            let c = z[STRIDE - 1];
            assert!((bounds.0..=bounds.1).contains(&c));
            assert!(z[..24].iter().all(|v| *v >= 0.0));
            let step = (0..24).map(|h| (z[h] - z[(h + 23) % 24]).abs()).fold(0.0, f64::max);
            assert!(step <= c * (1.0 + 1e-12), "{step} > {c}");
            let mut again = z.clone();
            repair_farm(&mut again, bounds);
            for (a, b) in z.iter().zip(&again) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_targets_drive_output_to_zero() {
        let farm = WindFarmSpec::new(1, 40.0);
        let speeds: Vec<f64> = (0..24).map(|h| 4.0 + (h % 12) as f64).collect();
        let problem = CalibrationProblem {
            farms: vec![farm],
            hub_speeds: vec![speeds],
            targets: vec![0.0; 24],
            first_hour: 0,
        };
        let r = calibrate(&problem).unwrap();
        assert!(r.objective < 1e-6 * r.initial_objective, "{} vs {}", r.objective, r.initial_objective);
        assert!(r.farms[0].capacity >= 0.0);
        assert!(coeff_step(&r.farms[0].hourly_coeff) <= MAX_COEFF_STEP * (1.0 + 1e-9));
    }

    #[test]
    fn single_farm_matches_capacity_scan() {
        // hours 0..12 above rated (output = capacity), 12..24 mid-range at a
        // constant speed with a constant target reachable by a flat profile
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let c0 = 120.0;
        let mut speeds = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..3 {
            for h in 0..24 {
                if h < 12 {
                    speeds.push(rng.gen_range(13.5..24.0));
                    targets.push(rng.gen_range(130.0..160.0));
                } else {
                    speeds.push(9.0);
                    targets.push(60.0);
                }
            }
        }
        let problem = CalibrationProblem {
            farms: vec![WindFarmSpec::new(5, c0)],
            hub_speeds: vec![speeds],
            targets: targets.clone(),
            first_hour: 0,
        };
        let r = calibrate(&problem).unwrap();
        // best output per hour at capacity C: C when rated, clamp(60, 0, C) otherwise
        let scan = (0..=1000)
            .map(|i| c0 - 50.0 + 0.1 * i as f64)
            .map(|c| {
                targets
                    .iter()
                    .enumerate()
                    .map(|(h, t)| if h % 24 < 12 { (c - t).powi(2) } else { (t.min(c) - t).powi(2) })
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        // a 0.1 MW grid misses the continuous optimum by at most 36·0.05²
        assert!(r.objective <= scan + 1e-6, "{} vs scan {}", r.objective, scan);
        assert!(r.objective >= scan - 36.0 * 0.05f64.powi(2) - 1e-6);
        assert!((production_error(&problem, &r.farms) - r.objective).abs() < 1e-6 * (1.0 + r.objective));
    }
}
