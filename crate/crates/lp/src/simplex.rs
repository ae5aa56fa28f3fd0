//! Bounded-variable dual simplex on an explicit dense basis inverse.
//!
//! Every row `i` gets a logical variable `s_i = a_i·x` carrying the row bounds,
//! so the working system is `[A  -I] (x, s) = 0`. The all-logical basis is
//! always available as a start, and because every nonbasic variable sits at a
//! bound chosen by the sign of its reduced cost, any basis can be made dual
//! feasible. Infinite bounds are replaced by an artificial box of `BIG`
//! while nonbasic; a variable left there at optimality signals unboundedness.
//!
//! The basis inverse is kept dense and updated by elementary row operations.
//! Rows of the inverse double as exact dual steepest-edge weights.

use crate::model::Problem;

const BIG: f64 = 1e7;
const REFACTOR_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Free nonbasic variable held at zero.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    /// Structural variable values.
    pub x: Vec<f64>,
    /// Row duals: sensitivity of the objective to the row's active bound.
    pub row_duals: Vec<f64>,
    /// Structural reduced costs.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
    /// Index of a row proving infeasibility, when `status == Infeasible`.
    pub infeasible_row: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub primal_tol: f64,
    pub dual_tol: f64,
    pub pivot_tol: f64,
    pub max_iterations: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            primal_tol: 1e-9,
            dual_tol: 1e-9,
            pivot_tol: 1e-9,
            max_iterations: 1_000_000,
        }
    }
}

pub struct DualSimplex {
    m: usize,
    n: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: Vec<State>,
    x: Vec<f64>,
    d: Vec<f64>,
    head: Vec<usize>,
    binv: Vec<f64>,
    weight: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
    opts: SimplexOptions,
}

impl DualSimplex {
    pub fn new(problem: &Problem) -> Self {
        Self::with_options(problem, SimplexOptions::default())
    }

    pub fn with_options(problem: &Problem, opts: SimplexOptions) -> Self {
        let n = problem.num_vars();
        let m = problem.num_rows();

        let mut counts = vec![0usize; n];
        for row in problem.rows() {
            for (v, _) in &row.entries {
                counts[v.0] += 1;
            }
        }
        let mut col_start = vec![0usize; n + 1];
        for j in 0..n {
            col_start[j + 1] = col_start[j] + counts[j];
        }
        let nnz = col_start[n];
        let mut col_row = vec![0usize; nnz];
        let mut col_val = vec![0.0; nnz];
        let mut fill = col_start.clone();
        for (i, row) in problem.rows().iter().enumerate() {
            for (v, c) in &row.entries {
                col_row[fill[v.0]] = i;
                col_val[fill[v.0]] = *c;
                fill[v.0] += 1;
            }
        }

        let mut cost = vec![0.0; n + m];
        let mut lower = vec![0.0; n + m];
        let mut upper = vec![0.0; n + m];
        for (j, v) in problem.vars().iter().enumerate() {
            cost[j] = v.cost;
            lower[j] = v.lower;
            upper[j] = v.upper;
        }
        for (i, r) in problem.rows().iter().enumerate() {
            lower[n + i] = r.lower;
            upper[n + i] = r.upper;
        }

        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = -1.0;
        }

        let mut s = Self {
            m,
            n,
            col_start,
            col_row,
            col_val,
            d: cost.clone(),
            cost,
            lower,
            upper,
            state: vec![State::Lower; n + m],
            x: vec![0.0; n + m],
            head: (n..n + m).collect(),
            binv,
            weight: vec![1.0; m],
            since_refactor: 0,
            iterations: 0,
            opts,
        };
        for i in 0..m {
            s.state[n + i] = State::Basic;
        }
        for j in 0..n {
            s.place(j, true);
        }
        s.compute_primal();
        s
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn num_cols(&self) -> usize {
        self.n
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Changes the bounds of a structural variable, keeping the basis.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        if self.lower[j] == lower && self.upper[j] == upper {
            return;
        }
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.state[j] != State::Basic {
            self.place(j, true);
            self.compute_primal();
        }
    }

    /// Changes the bounds of many structural variables with one primal recompute.
    pub fn set_bounds_many(&mut self, changes: &[(usize, f64, f64)]) {
        let mut dirty = false;
        for &(j, lo, up) in changes {
            if self.lower[j] == lo && self.upper[j] == up {
                continue;
            }
            self.lower[j] = lo;
            self.upper[j] = up;
            if self.state[j] != State::Basic {
                self.place(j, true);
                dirty = true;
            }
        }
        if dirty {
            self.compute_primal();
        }
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    /// Puts nonbasic `j` at the bound its reduced cost asks for. With `force`
    /// the variable is re-placed even when the current position is acceptable.
    fn place(&mut self, j: usize, force: bool) {
        let (lo, up) = (self.lower[j], self.upper[j]);
        let dj = self.d[j];
        let tol = self.opts.dual_tol;
        if !force {
            let ok = match self.state[j] {
                State::Lower => dj >= -tol || lo == up,
                State::Upper => dj <= tol || lo == up,
                State::Zero => dj.abs() <= tol,
                State::Basic => true,
            };
            if ok {
                return;
            }
        }
        let (state, value) = if lo == up {
            (State::Lower, lo)
        } else if dj > tol {
            (State::Lower, if lo.is_finite() { lo } else { -BIG })
        } else if dj < -tol {
            (State::Upper, if up.is_finite() { up } else { BIG })
        } else if lo.is_finite() {
            (State::Lower, lo)
        } else if up.is_finite() {
            (State::Upper, up)
        } else {
            (State::Zero, 0.0)
        };
        self.state[j] = state;
        self.x[j] = value;
    }

    fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        if j < self.n {
            let mut s = 0.0;
            for k in self.col_start[j]..self.col_start[j + 1] {
                s += self.col_val[k] * v[self.col_row[k]];
            }
            s
        } else {
            -v[j - self.n]
        }
    }

    /// `B^-1 a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        if j < self.n {
            for k in self.col_start[j]..self.col_start[j + 1] {
                let (row, val) = (self.col_row[k], self.col_val[k]);
                for (i, o) in out.iter_mut().enumerate() {
                    *o += self.binv[i * m + row] * val;
                }
            }
        } else {
            let row = j - self.n;
            for (i, o) in out.iter_mut().enumerate() {
                *o = -self.binv[i * m + row];
            }
        }
        out
    }

    fn compute_duals(&mut self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for i in 0..m {
            let cb = self.cost[self.head[i]];
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, b) in y.iter_mut().zip(row) {
                    *yk += cb * b;
                }
            }
        }
        for j in 0..self.n + self.m {
            self.d[j] = if self.state[j] == State::Basic {
                0.0
            } else {
                self.cost[j] - self.col_dot(j, &y)
            };
        }
        y
    }

    fn compute_primal(&mut self) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.n + m {
            if self.state[j] == State::Basic {
                continue;
            }
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            if j < self.n {
                for k in self.col_start[j]..self.col_start[j + 1] {
                    rhs[self.col_row[k]] -= self.col_val[k] * xj;
                }
            } else {
                rhs[j - self.n] += xj;
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
            self.x[self.head[i]] = v;
        }
    }

    fn refresh_weights(&mut self) {
        let m = self.m;
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.weight[i] = row.iter().map(|v| v * v).sum::<f64>().max(1e-12);
        }
    }

    /// Rebuilds the basis inverse from scratch. Structural columns that turn
    /// out dependent are dropped in favour of logicals.
    fn reinvert(&mut self) {
        let m = self.m;
        let n = self.n;
        self.binv.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            self.binv[i * m + i] = -1.0;
        }
        let mut row_taken = vec![false; m];
        for &j in &self.head {
            if j >= n {
                row_taken[j - n] = true;
            }
        }
        let structurals: Vec<usize> = self.head.iter().copied().filter(|&j| j < n).collect();
        let mut new_head = vec![usize::MAX; m];
        for &j in &self.head {
            if j >= n {
                new_head[j - n] = j;
            }
        }
        let mut dropped = Vec::new();
        for j in structurals {
            let alpha = self.ftran(j);
            let mut best = None;
            let mut best_abs = 1e-11;
            for (i, a) in alpha.iter().enumerate() {
                if !row_taken[i] && a.abs() > best_abs {
                    best_abs = a.abs();
                    best = Some(i);
                }
            }
            match best {
                Some(p) => {
                    self.pivot_inverse(p, &alpha);
                    row_taken[p] = true;
                    new_head[p] = j;
                }
                None => dropped.push(j),
            }
        }
        for i in 0..m {
            if new_head[i] == usize::MAX {
                new_head[i] = n + i;
                self.state[n + i] = State::Basic;
            }
        }
        self.head = new_head;
        if !dropped.is_empty() {
            log::debug!("reinversion dropped {} dependent columns", dropped.len());
        }
        for j in dropped {
            self.state[j] = State::Lower;
            self.place(j, true);
        }
        self.since_refactor = 0;
        self.compute_duals();
        for j in 0..n + m {
            if self.state[j] != State::Basic {
                self.place(j, false);
            }
        }
        self.compute_primal();
        self.refresh_weights();
    }

    /// Applies the elementary transformation that makes `alpha` the unit
    /// vector `e_r`, updating steepest-edge weights of touched rows.
    fn pivot_inverse(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[r];
        let mut prow: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
        for v in prow.iter_mut() {
            *v /= piv;
        }
        for (i, &a) in alpha.iter().enumerate() {
            if i == r || a == 0.0 {
                continue;
            }
            let row = &mut self.binv[i * m..(i + 1) * m];
            let mut norm = 0.0;
            for (b, p) in row.iter_mut().zip(&prow) {
                *b -= a * p;
                norm += *b * *b;
            }
            self.weight[i] = norm.max(1e-12);
        }
        self.weight[r] = prow.iter().map(|v| v * v).sum::<f64>().max(1e-12);
        self.binv[r * m..(r + 1) * m].copy_from_slice(&prow);
    }

    fn primal_tol(&self, bound: f64) -> f64 {
        self.opts.primal_tol * (1.0 + bound.abs())
    }

    /// Row with the largest weighted primal infeasibility.
    fn choose_leaving(&self) -> Option<usize> {
        let mut best = None;
        let mut best_score = 0.0;
        for i in 0..self.m {
            let j = self.head[i];
            let xj = self.x[j];
            let infeas = if xj < self.lower[j] - self.primal_tol(self.lower[j]) {
                self.lower[j] - xj
            } else if xj > self.upper[j] + self.primal_tol(self.upper[j]) {
                xj - self.upper[j]
            } else {
                continue;
            };
            let score = infeas * infeas / self.weight[i];
            if score > best_score {
                best_score = score;
                best = Some(i);
            }
        }
        best
    }

    /// Harris two-pass dual ratio test. Returns the entering column and its
    /// pivot-row entry, together with the full pivot row for nonbasics.
    fn choose_entering(&self, r: usize, above: bool) -> (Option<(usize, f64)>, Vec<(usize, f64)>) {
        let m = self.m;
        let rho = &self.binv[r * m..(r + 1) * m];
        let s = if above { 1.0 } else { -1.0 };
        let tol = self.opts.dual_tol;
        let mut row_entries = Vec::new();
        let mut candidates = Vec::new();
        let mut theta_max = f64::INFINITY;
        for j in 0..self.n + self.m {
            let st = self.state[j];
            if st == State::Basic {
                continue;
            }
            let a = self.col_dot(j, rho);
            if a == 0.0 {
                continue;
            }
            row_entries.push((j, a));
            if self.lower[j] == self.upper[j] || a.abs() < self.opts.pivot_tol {
                continue;
            }
            let slack = match st {
                State::Lower if s * a > 0.0 => self.d[j],
                State::Upper if s * a < 0.0 => -self.d[j],
                State::Zero => self.d[j].abs(),
                _ => continue,
            };
            let slack = slack.max(0.0);
            theta_max = theta_max.min((slack + tol) / a.abs());
            candidates.push((j, a, slack));
        }
        let mut chosen: Option<(usize, f64)> = None;
        let mut chosen_abs = 0.0;
        for (j, a, slack) in candidates {
            if slack / a.abs() <= theta_max && a.abs() > chosen_abs {
                chosen_abs = a.abs();
                chosen = Some((j, a));
            }
        }
        (chosen, row_entries)
    }

    fn artificial_nonbasics(&self) -> Vec<usize> {
        (0..self.n + self.m)
            .filter(|&j| {
                self.state[j] != State::Basic
                    && self.x[j].abs() >= BIG
                    && !(self.lower[j] == self.x[j] || self.upper[j] == self.x[j])
            })
            .collect()
    }

    pub fn solve(&mut self) -> LpSolution {
        let mut fresh = false;
        let limit = self.iterations + self.opts.max_iterations;
        loop {
            if self.iterations >= limit {
                return self.finish(LpStatus::IterationLimit, None);
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.reinvert();
                fresh = true;
            }
            let Some(r) = self.choose_leaving() else {
                if !fresh {
                    self.reinvert();
                    fresh = true;
                    continue;
                }
                let art = self.artificial_nonbasics();
                if art.is_empty() {
                    return self.finish(LpStatus::Optimal, None);
                }
                let mut moved = false;
                for &j in &art {
                    if self.d[j].abs() <= self.opts.dual_tol {
                        let (lo, up) = (self.lower[j], self.upper[j]);
                        let (st, v) = if lo.is_finite() {
                            (State::Lower, lo)
                        } else if up.is_finite() {
                            (State::Upper, up)
                        } else {
                            (State::Zero, 0.0)
                        };
                        self.state[j] = st;
                        self.x[j] = v;
                        moved = true;
                    }
                }
                if moved {
                    self.compute_primal();
                    fresh = false;
                    continue;
                }
                return self.finish(LpStatus::Unbounded, None);
            };

            let leaving = self.head[r];
            let above = self.x[leaving] > self.upper[leaving];
            let (entering, row_entries) = self.choose_entering(r, above);
            let Some((q, alpha_rq)) = entering else {
                if !fresh {
                    self.reinvert();
                    fresh = true;
                    continue;
                }
                return self.finish(LpStatus::Infeasible, Some(r));
            };

            let alpha_q = self.ftran(q);
            if (alpha_q[r] - alpha_rq).abs() > 1e-7 * (1.0 + alpha_rq.abs()) {
                if fresh {
                    log::warn!("simplex: unstable pivot persists after reinversion");
                    return self.finish(LpStatus::IterationLimit, None);
                }
                self.reinvert();
                fresh = true;
                continue;
            }
            let alpha_rq = alpha_q[r];

            // dual update
            let theta_d = self.d[q] / alpha_rq;
            for &(j, a) in &row_entries {
                self.d[j] -= theta_d * a;
            }
            self.d[q] = 0.0;
            self.d[leaving] = -theta_d;

            // primal update
            let target = if above { self.upper[leaving] } else { self.lower[leaving] };
            let theta_p = (self.x[leaving] - target) / alpha_rq;
            for i in 0..self.m {
                if alpha_q[i] != 0.0 {
                    let j = self.head[i];
                    self.x[j] -= theta_p * alpha_q[i];
                }
            }
            self.x[q] += theta_p;
            self.x[leaving] = target;
            self.state[leaving] = if above { State::Upper } else { State::Lower };
            self.state[q] = State::Basic;
            self.head[r] = q;
            self.pivot_inverse(r, &alpha_q);

            self.iterations += 1;
            self.since_refactor += 1;
            fresh = false;
        }
    }

    fn finish(&mut self, status: LpStatus, infeasible_row: Option<usize>) -> LpSolution {
        let y = self.compute_duals();
        let x: Vec<f64> = self.x[..self.n].to_vec();
        let objective = self.cost[..self.n].iter().zip(&x).map(|(c, v)| c * v).sum();
        LpSolution {
            status,
            objective,
            x,
            row_duals: y,
            reduced_costs: self.d[..self.n].to_vec(),
            iterations: self.iterations,
            infeasible_row,
        }
    }
}

/// Solves `problem` from the all-logical basis.
pub fn solve_lp(problem: &Problem) -> LpSolution {
    DualSimplex::new(problem).solve()
}

/// Dual objective computed from row duals alone: `Σ y_i·b_i + Σ d_j·l_j/u_j`
/// with `d = c − Aᵀy` rebuilt from the problem data. Returns `None` when a
/// multiplier points at an infinite bound beyond `tol`.
pub fn dual_objective(problem: &Problem, row_duals: &[f64], tol: f64) -> Option<f64> {
    let mut total = 0.0;
    let mut d: Vec<f64> = problem.vars().iter().map(|v| v.cost).collect();
    for (row, &y) in problem.rows().iter().zip(row_duals) {
        for (v, c) in &row.entries {
            d[v.0] -= c * y;
        }
        let bound = if y > 0.0 { row.lower } else { row.upper };
        if y.abs() > tol {
            if !bound.is_finite() {
                return None;
            }
            total += y * bound;
        }
    }
    for (v, &dj) in problem.vars().iter().zip(&d) {
        let bound = if dj > 0.0 { v.lower } else { v.upper };
        if dj.abs() > tol {
            if !bound.is_finite() {
                return None;
            }
            total += dj * bound;
        }
    }
    Some(total)
}
