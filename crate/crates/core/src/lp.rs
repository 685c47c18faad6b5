//! Exact-rational linear programming: maximize `c^T y` subject to
//! `A y {<=,>=,=} b`, `y >= 0`.
//!
//! A dense two-phase simplex with Bland's smallest-index pivot rule, so
//! termination is guaranteed even on degenerate instances. Instances here
//! are tiny (the Pareto oracle and a handful of identity checks), so no
//! attempt is made at sparsity or scale.

use crate::rational::Rat;
use num_traits::{One, Zero};
use thiserror::Error;

pub const MAX_VARIABLES: usize = 64;
pub const MAX_CONSTRAINTS: usize = (1 << 10) + 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub coeffs: Vec<Rat>,
    pub sense: Sense,
    pub rhs: Rat,
}

/// `maximize objective . y` over the listed constraints and `y >= 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearProgram {
    pub objective: Vec<Rat>,
    pub constraints: Vec<Constraint>,
    pub var_names: Vec<String>,
}

impl LinearProgram {
    pub fn maximize(objective: Vec<Rat>) -> Self {
        let var_names = (0..objective.len()).map(|i| format!("y{i}")).collect();
        LinearProgram {
            objective,
            constraints: Vec::new(),
            var_names,
        }
    }

    pub fn with_names(mut self, names: Vec<String>) -> Self {
        debug_assert_eq!(names.len(), self.objective.len());
        self.var_names = names;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn push(&mut self, coeffs: Vec<Rat>, sense: Sense, rhs: Rat) {
        self.constraints.push(Constraint { coeffs, sense, rhs });
    }

    pub fn push_le(&mut self, coeffs: Vec<Rat>, rhs: Rat) {
        self.push(coeffs, Sense::Le, rhs);
    }

    pub fn push_ge(&mut self, coeffs: Vec<Rat>, rhs: Rat) {
        self.push(coeffs, Sense::Ge, rhs);
    }

    pub fn push_eq(&mut self, coeffs: Vec<Rat>, rhs: Rat) {
        self.push(coeffs, Sense::Eq, rhs);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpSolution {
    /// `point` is a vertex of the feasible region attaining `value` exactly.
    Optimal { value: Rat, point: Vec<Rat> },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LpError {
    #[error("{got} variables exceed the supported {max}")]
    TooManyVariables { got: usize, max: usize },
    #[error("{got} constraints exceed the supported {max}")]
    TooManyConstraints { got: usize, max: usize },
    #[error("constraint {row} has {got} coefficients, expected {expected}")]
    ShapeMismatch {
        row: usize,
        expected: usize,
        got: usize,
    },
}

struct Tableau {
    /// `rows[r]` has one coefficient per column; `rhs[r] >= 0` throughout.
    rows: Vec<Vec<Rat>>,
    rhs: Vec<Rat>,
    /// Basic variable (column index) of each row.
    basis: Vec<usize>,
    ncols: usize,
    /// Columns that may never enter the basis (artificials in phase 2).
    banned: Vec<bool>,
    /// Reduced costs; a positive entry means the objective can improve.
    obj_row: Vec<Rat>,
    obj_val: Rat,
}

impl Tableau {
    /// Recomputes reduced costs for objective `c` (one entry per column)
    /// given the current basis.
    fn load_objective(&mut self, c: &[Rat]) {
        self.obj_val = Rat::zero();
        self.obj_row = c.to_vec();
        for r in 0..self.rows.len() {
            let cb = c[self.basis[r]].clone();
            if cb.is_zero() {
                continue;
            }
            self.obj_val += &cb * &self.rhs[r];
            for j in 0..self.ncols {
                if !self.rows[r][j].is_zero() {
                    let delta = &cb * &self.rows[r][j];
                    self.obj_row[j] -= delta;
                }
            }
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let inv = self.rows[row][col].clone();
        debug_assert!(!inv.is_zero());
        for j in 0..self.ncols {
            if !self.rows[row][j].is_zero() {
                self.rows[row][j] = &self.rows[row][j] / &inv;
            }
        }
        self.rhs[row] = &self.rhs[row] / &inv;
        for r in 0..self.rows.len() {
            if r == row || self.rows[r][col].is_zero() {
                continue;
            }
            let factor = std::mem::replace(&mut self.rows[r][col], Rat::zero());
            for j in 0..self.ncols {
                if j != col && !self.rows[row][j].is_zero() {
                    let delta = &factor * &self.rows[row][j];
                    self.rows[r][j] -= delta;
                }
            }
            let delta = &factor * &self.rhs[row];
            self.rhs[r] -= delta;
        }
        if !self.obj_row[col].is_zero() {
            let factor = std::mem::replace(&mut self.obj_row[col], Rat::zero());
            for j in 0..self.ncols {
                if j != col && !self.rows[row][j].is_zero() {
                    let delta = &factor * &self.rows[row][j];
                    self.obj_row[j] -= delta;
                }
            }
            self.obj_val += &factor * &self.rhs[row];
        }
        self.basis[row] = col;
    }

    /// Bland's rule: enter the lowest-index improving column, leave on the
    /// minimum ratio breaking ties by lowest basic variable index.
    /// Returns false when the current basis is optimal.
    fn improve_once(&mut self) -> Result<bool, Unbounded> {
        let entering = match (0..self.ncols)
            .find(|&j| !self.banned[j] && self.obj_row[j] > Rat::zero())
        {
            Some(j) => j,
            None => return Ok(false),
        };
        let mut leaving: Option<(usize, Rat)> = None;
        for r in 0..self.rows.len() {
            if self.rows[r][entering] > Rat::zero() {
                let ratio = &self.rhs[r] / &self.rows[r][entering];
                let better = match &leaving {
                    None => true,
                    Some((lr, lratio)) => {
                        ratio < *lratio || (ratio == *lratio && self.basis[r] < self.basis[*lr])
                    }
                };
                if better {
                    leaving = Some((r, ratio));
                }
            }
        }
        match leaving {
            Some((row, _)) => {
                self.pivot(row, entering);
                Ok(true)
            }
            None => Err(Unbounded),
        }
    }

    fn run_to_optimal(&mut self) -> Result<(), Unbounded> {
        while self.improve_once()? {}
        Ok(())
    }
}

struct Unbounded;

/// Solves the program with an exact two-phase simplex.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let n = lp.num_vars();
    let m = lp.constraints.len();
    if n > MAX_VARIABLES {
        return Err(LpError::TooManyVariables {
            got: n,
            max: MAX_VARIABLES,
        });
    }
    if m > MAX_CONSTRAINTS {
        return Err(LpError::TooManyConstraints {
            got: m,
            max: MAX_CONSTRAINTS,
        });
    }
    for (row, c) in lp.constraints.iter().enumerate() {
        if c.coeffs.len() != n {
            return Err(LpError::ShapeMismatch {
                row,
                expected: n,
                got: c.coeffs.len(),
            });
        }
    }

    // Normalize to nonnegative right-hand sides, then to equalities with
    // slack/surplus columns; rows without a natural slack basis get an
    // artificial column.
    let mut extra_cols = 0usize;
    let mut artificial_rows = Vec::new();
    let mut normalized: Vec<(Vec<Rat>, Sense, Rat)> = Vec::with_capacity(m);
    for c in &lp.constraints {
        let mut coeffs = c.coeffs.clone();
        let mut rhs = c.rhs.clone();
        let mut sense = c.sense;
        if rhs < Rat::zero() {
            for a in &mut coeffs {
                *a = -&*a;
            }
            rhs = -rhs;
            sense = match sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
        match sense {
            Sense::Le | Sense::Ge => extra_cols += 1,
            Sense::Eq => {}
        }
        normalized.push((coeffs, sense, rhs));
    }
    for (r, (_, sense, _)) in normalized.iter().enumerate() {
        if !matches!(sense, Sense::Le) {
            artificial_rows.push(r);
        }
    }
    let slack_base = n;
    let art_base = n + extra_cols;
    let ncols = art_base + artificial_rows.len();

    let mut rows = vec![vec![Rat::zero(); ncols]; m];
    let mut rhs = vec![Rat::zero(); m];
    let mut basis = vec![0usize; m];
    let mut next_slack = slack_base;
    let mut next_art = art_base;
    for (r, (coeffs, sense, b)) in normalized.into_iter().enumerate() {
        for (j, a) in coeffs.into_iter().enumerate() {
            rows[r][j] = a;
        }
        rhs[r] = b;
        match sense {
            Sense::Le => {
                rows[r][next_slack] = Rat::one();
                basis[r] = next_slack;
                next_slack += 1;
            }
            Sense::Ge => {
                rows[r][next_slack] = -Rat::one();
                next_slack += 1;
                rows[r][next_art] = Rat::one();
                basis[r] = next_art;
                next_art += 1;
            }
            Sense::Eq => {
                rows[r][next_art] = Rat::one();
                basis[r] = next_art;
                next_art += 1;
            }
        }
    }

    let mut tab = Tableau {
        rows,
        rhs,
        basis,
        ncols,
        banned: vec![false; ncols],
        obj_row: vec![Rat::zero(); ncols],
        obj_val: Rat::zero(),
    };

    // Phase one: drive the artificials to zero.
    if art_base < ncols {
        let mut c1 = vec![Rat::zero(); ncols];
        for c in c1.iter_mut().skip(art_base) {
            *c = -Rat::one();
        }
        tab.load_objective(&c1);
        if tab.run_to_optimal().is_err() {
            unreachable!("phase-one objective is bounded above by zero");
        }
        if tab.obj_val < Rat::zero() {
            return Ok(LpSolution::Infeasible);
        }
        // Pivot leftover artificials out of the basis; an all-zero row is a
        // redundant constraint and is dropped.
        let mut r = 0;
        while r < tab.rows.len() {
            if tab.basis[r] >= art_base {
                debug_assert!(tab.rhs[r].is_zero());
                match (0..art_base).find(|&j| !tab.rows[r][j].is_zero()) {
                    Some(j) => tab.pivot(r, j),
                    None => {
                        tab.rows.remove(r);
                        tab.rhs.remove(r);
                        tab.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
        for j in art_base..ncols {
            tab.banned[j] = true;
        }
    }

    // Phase two: the real objective.
    let mut c2 = vec![Rat::zero(); ncols];
    c2[..n].clone_from_slice(&lp.objective);
    tab.load_objective(&c2);
    if tab.run_to_optimal().is_err() {
        return Ok(LpSolution::Unbounded);
    }

    let mut point = vec![Rat::zero(); n];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            point[b] = tab.rhs[r].clone();
        }
    }
    Ok(LpSolution::Optimal {
        value: tab.obj_val,
        point,
    })
}
