//! Linear / mixed-integer program description.
//!
//! Rows are stored as bounded activities `lower <= a·x <= upper`; equality rows
//! use `lower == upper`. Infinite bounds are expressed with `f64::INFINITY`.

use crate::LpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
    pub integer: bool,
    /// Branching priority; larger values are branched on first.
    pub priority: u8,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub entries: Vec<(VarId, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct Problem {
    pub name: String,
    vars: Vec<Variable>,
    rows: Vec<Row>,
}

impl Problem {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            cost,
            integer: false,
            priority: 0,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64, priority: u8) -> VarId {
        let id = self.add_var(name, 0.0, 1.0, cost);
        self.vars[id.0].integer = true;
        self.vars[id.0].priority = priority;
        id
    }

    /// Adds `lower <= Σ coef·var <= upper`. Duplicate variables are summed.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        entries: &[(VarId, f64)],
    ) -> RowId {
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(entries.len());
        for &(v, c) in entries {
            if let Some(slot) = merged.iter_mut().find(|(w, _)| *w == v) {
                slot.1 += c;
            } else {
                merged.push((v, c));
            }
        }
        merged.retain(|(_, c)| *c != 0.0);
        self.rows.push(Row {
            name: name.into(),
            lower,
            upper,
            entries: merged,
        });
        RowId(self.rows.len() - 1)
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        self.vars[var.0].lower = lower;
        self.vars[var.0].upper = upper;
    }

    pub fn set_cost(&mut self, var: VarId, cost: f64) {
        self.vars[var.0].cost = cost;
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn row(&self, id: RowId) -> &Row {
        &self.rows[id.0]
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn num_integer(&self) -> usize {
        self.vars.iter().filter(|v| v.integer).count()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, xi)| v.cost * xi).sum()
    }

    pub fn row_activity(&self, row: RowId, x: &[f64]) -> f64 {
        self.rows[row.0].entries.iter().map(|(v, c)| c * x[v.0]).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, xi) in self.vars.iter().zip(x) {
            worst = worst.max(v.lower - xi).max(xi - v.upper);
        }
        for r in 0..self.rows.len() {
            let a = self.row_activity(RowId(r), x);
            worst = worst.max(self.rows[r].lower - a).max(a - self.rows[r].upper);
        }
        worst
    }

    pub fn validate(&self) -> Result<(), LpError> {
        for v in &self.vars {
            if v.lower.is_nan() || v.upper.is_nan() || !v.cost.is_finite() {
                return Err(LpError::Malformed(format!("variable {} has non-finite data", v.name)));
            }
            if v.lower > v.upper {
                return Err(LpError::Malformed(format!(
                    "variable {} has lower bound {} above upper bound {}",
                    v.name, v.lower, v.upper
                )));
            }
        }
        for r in &self.rows {
            if r.lower.is_nan() || r.upper.is_nan() || r.lower > r.upper {
                return Err(LpError::Malformed(format!("row {} has inconsistent bounds", r.name)));
            }
            for (v, c) in &r.entries {
                if v.0 >= self.vars.len() || !c.is_finite() {
                    return Err(LpError::Malformed(format!("row {} has a bad entry", r.name)));
                }
            }
        }
        Ok(())
    }
}
