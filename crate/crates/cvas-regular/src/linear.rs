//! Exact linear feasibility and optimisation over the rationals.
//!
//! The solver is a dense two-phase tableau simplex using Bland's rule, so it
//! terminates without perturbation. Strict constraints are handled by a
//! single slack `ε`: every `c·v < r` becomes `c·v + ε ≤ r` (and symmetrically
//! for `>`), `ε` is maximised, and the system is feasible iff the optimum is
//! positive.

use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use thiserror::Error;

use crate::rational::Rational;

/// Relation of a linear constraint `coeffs · v (rel) rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Eq,
    Le,
    Lt,
    Ge,
    Gt,
}

impl Relation {
    pub fn is_strict(self) -> bool {
        matches!(self, Relation::Lt | Relation::Gt)
    }

    /// Whether `lhs (rel) rhs` holds.
    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Relation::Eq => lhs == rhs,
            Relation::Le => lhs <= rhs,
            Relation::Lt => lhs < rhs,
            Relation::Ge => lhs >= rhs,
            Relation::Gt => lhs > rhs,
        }
    }
}

/// One constraint `coeffs · v (rel) rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub rel: Relation,
    pub rhs: Rational,
}

/// A conjunction of linear constraints over `num_vars` unrestricted rational
/// variables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinearSystem {
    num_vars: usize,
    constraints: Vec<Constraint>,
}

/// Structural errors; arithmetic itself never fails.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinearError {
    #[error("constraint {index} has {found} coefficients, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("objective has {found} coefficients, expected {expected}")]
    ObjectiveMismatch { expected: usize, found: usize },
    #[error("constraint {index} is strict; maximize accepts only non-strict relations")]
    StrictInMaximize { index: usize },
}

/// Result of [`maximize`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Optimum {
    /// Finite optimum together with an optimal point.
    Optimum { value: Rational, point: Vec<Rational> },
    Unbounded,
    Infeasible,
}

impl LinearSystem {
    pub fn new(num_vars: usize) -> Self {
        LinearSystem {
            num_vars,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Adds a fresh variable (coefficient zero in existing constraints) and
    /// returns its index.
    pub fn add_var(&mut self) -> usize {
        for c in &mut self.constraints {
            c.coeffs.push(Rational::zero());
        }
        self.num_vars += 1;
        self.num_vars - 1
    }

    /// Appends a dense constraint. Dimensions are checked when solving.
    pub fn push(&mut self, coeffs: Vec<Rational>, rel: Relation, rhs: Rational) {
        self.constraints.push(Constraint { coeffs, rel, rhs });
    }

    /// Appends a constraint given as sparse `(variable, coefficient)` terms.
    /// Repeated variables are summed.
    pub fn push_sparse(&mut self, terms: &[(usize, Rational)], rel: Relation, rhs: Rational) {
        let mut coeffs = vec![Rational::zero(); self.num_vars];
        for (v, c) in terms {
            coeffs[*v] += c;
        }
        self.push(coeffs, rel, rhs);
    }

    fn check(&self) -> Result<(), LinearError> {
        for (index, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != self.num_vars {
                return Err(LinearError::DimensionMismatch {
                    index,
                    expected: self.num_vars,
                    found: c.coeffs.len(),
                });
            }
        }
        Ok(())
    }

    /// Whether `point` satisfies every constraint exactly.
    pub fn satisfied_by(&self, point: &[Rational]) -> bool {
        point.len() == self.num_vars
            && self.constraints.iter().all(|c| {
                let lhs: Rational = c
                    .coeffs
                    .iter()
                    .zip(point)
                    .filter(|(a, _)| !a.is_zero())
                    .map(|(a, x)| a * x)
                    .sum();
                c.rel.holds(&lhs, &c.rhs)
            })
    }
}

/// Counts solver invocations and enforces an optional cap. Shared between
/// threads.
#[derive(Debug)]
pub struct StepBudget {
    limit: u64,
    used: AtomicU64,
}

/// The step budget ran out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("solver step budget of {limit} exhausted")]
pub struct BudgetExhausted {
    pub limit: u64,
}

impl StepBudget {
    pub fn unlimited() -> Self {
        Self::new(u64::MAX)
    }

    pub fn new(limit: u64) -> Self {
        StepBudget {
            limit,
            used: AtomicU64::new(0),
        }
    }

    /// Records one solver call, failing once the limit is exceeded.
    pub fn charge(&self) -> Result<(), BudgetExhausted> {
        let before = self.used.fetch_add(1, AtomicOrdering::Relaxed);
        if before >= self.limit {
            Err(BudgetExhausted { limit: self.limit })
        } else {
            Ok(())
        }
    }

    pub fn used(&self) -> u64 {
        self.used.load(AtomicOrdering::Relaxed).min(self.limit)
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }
}

/// Finds a point satisfying every constraint, or `None` if the system is
/// infeasible over the rationals.
pub fn solve_feasibility(system: &LinearSystem) -> Result<Option<Vec<Rational>>, LinearError> {
    system.check()?;
    let n = system.num_vars;
    let has_strict = system.constraints.iter().any(|c| c.rel.is_strict());
    if !has_strict {
        let objective = vec![Rational::zero(); n];
        return Ok(match maximize(system, &objective)? {
            Optimum::Optimum { point, .. } => Some(point),
            Optimum::Unbounded => unreachable!("zero objective cannot be unbounded"),
            Optimum::Infeasible => None,
        });
    }
    // Variable n is ε, restricted to [0, 1]; the upper bound keeps the
    // optimum finite without changing its sign.
    let mut relaxed = LinearSystem::new(n + 1);
    let eps = n;
    for c in &system.constraints {
        let mut coeffs = c.coeffs.clone();
        let (rel, e) = match c.rel {
            Relation::Lt => (Relation::Le, Rational::one()),
            Relation::Gt => (Relation::Ge, -Rational::one()),
            r => (r, Rational::zero()),
        };
        coeffs.push(e);
        relaxed.push(coeffs, rel, c.rhs.clone());
    }
    relaxed.push_sparse(&[(eps, Rational::one())], Relation::Ge, Rational::zero());
    relaxed.push_sparse(&[(eps, Rational::one())], Relation::Le, Rational::one());
    let mut objective = vec![Rational::zero(); n + 1];
    objective[eps] = Rational::one();
    Ok(match maximize(&relaxed, &objective)? {
        Optimum::Optimum { value, mut point } if value.is_positive() => {
            point.truncate(n);
            Some(point)
        }
        Optimum::Optimum { .. } | Optimum::Infeasible => None,
        Optimum::Unbounded => unreachable!("ε is bounded by 1"),
    })
}

/// Maximises `objective · v` subject to a system with only non-strict
/// relations.
pub fn maximize(system: &LinearSystem, objective: &[Rational]) -> Result<Optimum, LinearError> {
    system.check()?;
    if objective.len() != system.num_vars {
        return Err(LinearError::ObjectiveMismatch {
            expected: system.num_vars,
            found: objective.len(),
        });
    }
    if let Some(index) = system.constraints.iter().position(|c| c.rel.is_strict()) {
        return Err(LinearError::StrictInMaximize { index });
    }
    Ok(Simplex::build(system, objective).solve())
}

/// How an original variable is expressed in the non-negative standard form.
#[derive(Clone, Copy)]
enum VarMap {
    /// `v = col`.
    NonNeg(usize),
    /// `v = -col`.
    NonPos(usize),
    /// `v = pos - neg`.
    Free(usize, usize),
}

struct Simplex {
    /// Rows of the tableau; the last entry of each row is the right-hand side.
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    num_cols: usize,
    /// Columns `>= first_artificial` are artificial.
    first_artificial: usize,
    objective: Vec<Rational>,
    var_map: Vec<VarMap>,
}

impl Simplex {
    fn build(system: &LinearSystem, objective: &[Rational]) -> Simplex {
        let n = system.num_vars;
        // Single-variable sign constraints become column restrictions.
        let mut nonneg = vec![false; n];
        let mut nonpos = vec![false; n];
        // For each absorbed row: (variable, states `v >= 0`).
        let mut sign_rows: Vec<Option<(usize, bool)>> = vec![None; system.constraints.len()];
        for (i, c) in system.constraints.iter().enumerate() {
            if !c.rhs.is_zero() {
                continue;
            }
            let mut nz = c.coeffs.iter().enumerate().filter(|(_, a)| !a.is_zero());
            if let (Some((v, a)), None) = (nz.next(), nz.next()) {
                let lower = match c.rel {
                    Relation::Ge => a.is_positive(),
                    Relation::Le => a.is_negative(),
                    _ => continue,
                };
                if lower {
                    nonneg[v] = true;
                } else {
                    nonpos[v] = true;
                }
                sign_rows[i] = Some((v, lower));
            }
        }
        let mut var_map = Vec::with_capacity(n);
        let mut cols = 0usize;
        for v in 0..n {
            if nonneg[v] {
                // A variable bounded on both sides keeps its `v <= 0` rows.
                var_map.push(VarMap::NonNeg(cols));
                cols += 1;
            } else if nonpos[v] {
                var_map.push(VarMap::NonPos(cols));
                cols += 1;
            } else {
                var_map.push(VarMap::Free(cols, cols + 1));
                cols += 2;
            }
        }
        for row in sign_rows.iter_mut() {
            if let Some((v, lower)) = *row {
                if !lower && nonneg[v] {
                    *row = None;
                }
            }
        }
        let sign_rows: Vec<bool> = sign_rows.iter().map(Option::is_some).collect();

        let structural = cols;
        let kept: Vec<&Constraint> = system
            .constraints
            .iter()
            .zip(&sign_rows)
            .filter(|(_, s)| !**s)
            .map(|(c, _)| c)
            .collect();
        let to_cols = |coeffs: &[Rational]| -> Vec<Rational> {
            let mut row = vec![Rational::zero(); structural];
            for (v, a) in coeffs.iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                match var_map[v] {
                    VarMap::NonNeg(c) => row[c] = a.clone(),
                    VarMap::NonPos(c) => row[c] = -a,
                    VarMap::Free(p, q) => {
                        row[p] = a.clone();
                        row[q] = -a;
                    }
                }
            }
            row
        };

        // Normalise to non-negative right-hand sides and count auxiliaries.
        let mut normalised: Vec<(Vec<Rational>, Relation, Rational)> = Vec::new();
        for c in kept {
            let mut row = to_cols(&c.coeffs);
            let mut rel = c.rel;
            let mut rhs = c.rhs.clone();
            if rhs.is_negative() {
                for a in row.iter_mut() {
                    *a = -&*a;
                }
                rhs = -rhs;
                rel = match rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    r => r,
                };
            }
            normalised.push((row, rel, rhs));
        }
        let slack_count = normalised
            .iter()
            .filter(|(_, r, _)| matches!(r, Relation::Le | Relation::Ge))
            .count();
        let artificial_count = normalised
            .iter()
            .filter(|(_, r, _)| matches!(r, Relation::Ge | Relation::Eq))
            .count();
        let first_artificial = structural + slack_count;
        let num_cols = first_artificial + artificial_count;

        let mut rows = Vec::with_capacity(normalised.len());
        let mut basis = Vec::with_capacity(normalised.len());
        let mut next_slack = structural;
        let mut next_art = first_artificial;
        for (mut row, rel, rhs) in normalised {
            row.resize(num_cols + 1, Rational::zero());
            match rel {
                Relation::Le => {
                    row[next_slack] = Rational::one();
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -Rational::one();
                    next_slack += 1;
                    row[next_art] = Rational::one();
                    basis.push(next_art);
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = Rational::one();
                    basis.push(next_art);
                    next_art += 1;
                }
                Relation::Lt | Relation::Gt => unreachable!(),
            }
            row[num_cols] = rhs;
            rows.push(row);
        }
        let mut obj = vec![Rational::zero(); num_cols];
        let mapped = to_cols(objective);
        obj[..structural].clone_from_slice(&mapped);
        Simplex {
            rows,
            basis,
            num_cols,
            first_artificial,
            objective: obj,
            var_map,
        }
    }

    fn pivot(&mut self, r: usize, e: usize, cost: &mut [Rational]) {
        let width = self.num_cols + 1;
        let inv = self.rows[r][e].recip();
        if inv != Rational::one() {
            for j in 0..width {
                if !self.rows[r][j].is_zero() {
                    self.rows[r][j] = &self.rows[r][j] * &inv;
                }
            }
        }
        let nz: Vec<usize> = (0..width).filter(|&j| !self.rows[r][j].is_zero()).collect();
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[e].is_zero() {
                continue;
            }
            let f = row[e].clone();
            for &j in &nz {
                row[j] = &row[j] - &(&f * &pivot_row[j]);
            }
        }
        if !cost[e].is_zero() {
            let f = cost[e].clone();
            for &j in &nz {
                if j < cost.len() {
                    cost[j] = &cost[j] - &(&f * &pivot_row[j]);
                }
            }
        }
        self.basis[r] = e;
    }

    /// Runs simplex iterations maximising `cost` (reduced form, where basic
    /// columns are zero) over columns `< limit`. Returns `false` if unbounded.
    fn iterate(&mut self, cost: &mut [Rational], limit: usize) -> bool {
        loop {
            // Bland: smallest-index improving column.
            let entering = (0..limit).find(|&j| cost[j].is_positive());
            let Some(e) = entering else { return true };
            let rhs = self.num_cols;
            let mut best: Option<(usize, Rational)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !row[e].is_positive() {
                    continue;
                }
                let ratio = &row[rhs] / &row[e];
                let better = match &best {
                    None => true,
                    Some((bi, br)) => {
                        ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi])
                    }
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            let Some((r, _)) = best else { return false };
            self.pivot(r, e, cost);
        }
    }

    fn reduced_cost(&self, base: &[Rational]) -> Vec<Rational> {
        let mut cost = base.to_vec();
        let rhs = self.num_cols;
        // Objective value is tracked in cost[rhs] (negated), not needed here.
        cost.push(Rational::zero());
        for (i, row) in self.rows.iter().enumerate() {
            let cb = &base[self.basis[i]];
            if cb.is_zero() {
                continue;
            }
            for j in 0..=rhs {
                if !row[j].is_zero() {
                    cost[j] = &cost[j] - &(cb * &row[j]);
                }
            }
        }
        cost
    }

    fn solve(mut self) -> Optimum {
        // Phase 1: maximise −Σ artificials.
        if self.first_artificial < self.num_cols {
            let mut base = vec![Rational::zero(); self.num_cols];
            for b in base.iter_mut().skip(self.first_artificial) {
                *b = -Rational::one();
            }
            let mut cost = self.reduced_cost(&base);
            let bounded = self.iterate(&mut cost, self.num_cols);
            debug_assert!(bounded);
            let infeasible = self
                .rows
                .iter()
                .zip(&self.basis)
                .any(|(row, &b)| b >= self.first_artificial && !row[self.num_cols].is_zero());
            if infeasible {
                return Optimum::Infeasible;
            }
            // Drive remaining (zero-valued) artificials out of the basis.
            let mut i = 0;
            while i < self.rows.len() {
                if self.basis[i] >= self.first_artificial {
                    let col = (0..self.first_artificial).find(|&j| !self.rows[i][j].is_zero());
                    match col {
                        Some(e) => {
                            let mut dummy = vec![Rational::zero(); self.num_cols + 1];
                            self.pivot(i, e, &mut dummy);
                            i += 1;
                        }
                        None => {
                            self.rows.remove(i);
                            self.basis.remove(i);
                        }
                    }
                } else {
                    i += 1;
                }
            }
        }
        // Phase 2 over structural and slack columns only.
        let limit = self.first_artificial;
        let base = self.objective.clone();
        let mut cost = self.reduced_cost(&base);
        if !self.iterate(&mut cost, limit) {
            return Optimum::Unbounded;
        }
        let mut values = vec![Rational::zero(); self.num_cols];
        for (i, &b) in self.basis.iter().enumerate() {
            values[b] = self.rows[i][self.num_cols].clone();
        }
        let point: Vec<Rational> = self
            .var_map
            .iter()
            .map(|m| match *m {
                VarMap::NonNeg(c) => values[c].clone(),
                VarMap::NonPos(c) => -&values[c],
                VarMap::Free(p, q) => &values[p] - &values[q],
            })
            .collect();
        let value = self
            .objective
            .iter()
            .zip(&values)
            .filter(|(c, _)| !c.is_zero())
            .map(|(c, v)| c * v)
            .sum();
        Optimum::Optimum { value, point }
    }
}
