//! Dense bounded-variable primal simplex.
//!
//! Every row gets a slack (sign-restricted by its relation) and an artificial
//! variable. Rows whose slack can absorb the residual of the starting point
//! begin with the slack basic and their artificial retired; phase 1 drives
//! the remaining artificials to zero; phase 2 optimises the
//! real objective. Pricing is Dantzig's largest reduced cost until a run of
//! degenerate pivots exceeds [`SimplexConfig::bland_threshold`], after which
//! Bland's smallest-index rule takes over until the objective moves again.
//! The tableau is refactorised from the original rows at phase boundaries and
//! every [`SimplexConfig::refactor_every`] pivots to limit drift.

use crate::error::{Error, Result};
use crate::milp::Relation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
    /// Zero objective: any feasible point will do.
    Feasibility,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A continuous linear program. `binary` tags variables that are relaxed
/// binaries of an enclosing MILP; the LP itself treats them as continuous.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub binary: Vec<bool>,
    pub rows: Vec<Row>,
    pub objective: Vec<(usize, f64)>,
    pub sense: Sense,
}

impl LpProblem {
    /// `n` variables with bounds `[0, +inf)` and no rows.
    pub fn new(n: usize, sense: Sense) -> Self {
        Self {
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            binary: vec![false; n],
            rows: Vec::new(),
            objective: Vec::new(),
            sense,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.rows.push(Row {
            terms,
            relation,
            rhs,
        });
    }

    pub fn objective_value(&self, point: &[f64]) -> f64 {
        match self.sense {
            Sense::Feasibility => 0.0,
            _ => self.objective.iter().map(|&(v, c)| c * point[v]).sum(),
        }
    }

    /// Largest row or bound violation, each scaled by `1 + |rhs|` (rows) or 1 (bounds).
    pub fn max_scaled_violation(&self, point: &[f64]) -> f64 {
        let bounds = self
            .lower
            .iter()
            .zip(&self.upper)
            .zip(point)
            .map(|((&l, &u), &x)| (l - x).max(x - u).max(0.0));
        let rows = self.rows.iter().map(|r| {
            let lhs: f64 = r.terms.iter().map(|&(v, c)| c * point[v]).sum();
            let v = match r.relation {
                Relation::Le => (lhs - r.rhs).max(0.0),
                Relation::Ge => (r.rhs - lhs).max(0.0),
                Relation::Eq => (lhs - r.rhs).abs(),
            };
            v / (1.0 + r.rhs.abs())
        });
        bounds.chain(rows).fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.upper.len() != n || self.binary.len() != n {
            return Err(Error::Dimension("bound vectors differ in length".into()));
        }
        for (j, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::NonFinite(format!("bounds of variable {j}")));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(Error::NonFinite(format!("right-hand side of row {i}")));
            }
            for &(v, c) in &row.terms {
                if v >= n {
                    return Err(Error::UnknownVariable(v));
                }
                if !c.is_finite() {
                    return Err(Error::NonFinite(format!("row {i}, variable {v}")));
                }
            }
        }
        for &(v, c) in &self.objective {
            if v >= n {
                return Err(Error::UnknownVariable(v));
            }
            if !c.is_finite() {
                return Err(Error::NonFinite(format!(
                    "objective coefficient of variable {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, point: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn is_optimal(&self) -> bool {
        matches!(self, LpOutcome::Optimal { .. })
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn point(&self) -> Option<&[f64]> {
        match self {
            LpOutcome::Optimal { point, .. } => Some(point),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexConfig {
    /// Primal feasibility tolerance, also used for the final certificate.
    pub feasibility_tol: f64,
    /// Smallest tableau entry accepted as a pivot.
    pub pivot_tol: f64,
    /// Reduced-cost threshold for optimality.
    pub optimality_tol: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_threshold: usize,
    pub refactor_every: usize,
    pub max_iterations: usize,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-6,
            pivot_tol: 1e-9,
            optimality_tol: 1e-9,
            bland_threshold: 50,
            refactor_every: 100,
            max_iterations: 100_000,
        }
    }
}

pub fn solve_lp(p: &LpProblem) -> Result<LpOutcome> {
    solve_lp_with(p, &SimplexConfig::default())
}

pub fn solve_lp_with(p: &LpProblem, config: &SimplexConfig) -> Result<LpOutcome> {
    p.validate()?;
    if p.lower
        .iter()
        .zip(&p.upper)
        .any(|(&l, &u)| l > u + config.feasibility_tol)
    {
        return Ok(LpOutcome::Infeasible);
    }
    Tableau::new(p, config).solve(p)
}

/// Solves `p` with the listed relaxed binaries pinned to 0 or 1.
pub fn solve_fixed_binary(p: &LpProblem, fixings: &[(usize, bool)]) -> Result<LpOutcome> {
    solve_fixed_binary_with(p, fixings, &SimplexConfig::default())
}

pub fn solve_fixed_binary_with(
    p: &LpProblem,
    fixings: &[(usize, bool)],
    config: &SimplexConfig,
) -> Result<LpOutcome> {
    let mut q = p.clone();
    for &(var, one) in fixings {
        if var >= q.num_vars() {
            return Err(Error::UnknownVariable(var));
        }
        if !q.binary[var] {
            return Err(Error::NotBinary(var));
        }
        let v = if one { 1.0 } else { 0.0 };
        q.set_bounds(var, v, v);
    }
    solve_lp_with(&q, config)
}

struct Tableau<'c> {
    config: &'c SimplexConfig,
    m: usize,
    n: usize,
    cols: usize,
    /// Row-major `m x (cols + 1)`; the last column is `B^-1 b`.
    t: Vec<f64>,
    /// Original `[A | S | R | b]` rows for refactorisation.
    orig: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    cost: Vec<f64>,
    d: Vec<f64>,
    barred: Vec<bool>,
    pivots_since_refactor: usize,
    iterations: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl<'c> Tableau<'c> {
    fn new(p: &LpProblem, config: &'c SimplexConfig) -> Self {
        let n = p.num_vars();
        let m = p.rows.len();
        let cols = n + 2 * m;
        let width = cols + 1;

        let mut lower = Vec::with_capacity(cols);
        let mut upper = Vec::with_capacity(cols);
        let mut x = Vec::with_capacity(cols);
        for j in 0..n {
            let (l, u) = (p.lower[j], p.upper[j].max(p.lower[j]));
            lower.push(l);
            upper.push(u);
            x.push(if l.is_finite() {
                l
            } else if u.is_finite() {
                u
            } else {
                0.0
            });
        }
        for row in &p.rows {
            let (l, u) = match row.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lower.push(l);
            upper.push(u);
            x.push(0.0);
        }

        // Crash basis: a row whose slack can absorb the residual at the
        // starting point starts with the slack basic and never needs its
        // artificial; the others start on a sign-adjusted artificial.
        let mut orig = vec![0.0; m * width];
        let mut art = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        for (i, row) in p.rows.iter().enumerate() {
            let r = &mut orig[i * width..(i + 1) * width];
            for &(v, c) in &row.terms {
                r[v] += c;
            }
            r[n + i] = 1.0;
            let residual = row.rhs - (0..n).map(|j| r[j] * x[j]).sum::<f64>();
            r[cols] = row.rhs;
            let slack_fits = match row.relation {
                Relation::Le => residual >= 0.0,
                Relation::Ge => residual <= 0.0,
                Relation::Eq => residual == 0.0,
            };
            if slack_fits {
                r[n + m + i] = 1.0;
                x[n + i] = residual;
                basis.push(n + i);
                art.push((0.0, true));
            } else {
                r[n + m + i] = if residual >= 0.0 { 1.0 } else { -1.0 };
                basis.push(n + m + i);
                art.push((residual.abs(), false));
            }
        }
        let mut barred = vec![false; cols];
        for (i, (v, retired)) in art.into_iter().enumerate() {
            lower.push(0.0);
            upper.push(if retired { 0.0 } else { f64::INFINITY });
            x.push(v);
            barred[n + m + i] = retired;
        }

        // B is diagonal with entries +-1, so B^-1 [A | b] is a row sign flip.
        let mut t = orig.clone();
        for (i, &b) in basis.iter().enumerate() {
            if orig[i * width + b] < 0.0 {
                for v in &mut t[i * width..(i + 1) * width] {
                    *v = -*v;
                }
            }
        }
        let mut in_basis = vec![false; cols];
        for &b in &basis {
            in_basis[b] = true;
        }

        Self {
            config,
            m,
            n,
            cols,
            t,
            orig,
            lower,
            upper,
            x,
            basis,
            in_basis,
            cost: vec![0.0; cols],
            d: vec![0.0; cols],
            barred,
            pivots_since_refactor: 0,
            iterations: 0,
        }
    }

    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * (self.cols + 1) + j]
    }

    fn solve(mut self, p: &LpProblem) -> Result<LpOutcome> {
        let (n, m) = (self.n, self.m);

        // Phase 1: minimise the sum of artificials.
        self.cost = vec![0.0; self.cols];
        for j in n + m..self.cols {
            self.cost[j] = 1.0;
        }
        self.recompute_reduced_costs();
        self.run_phase()?;
        self.settle()?;
        let infeasibility = (n + m..self.cols).map(|j| self.x[j]).fold(0.0, f64::max);
        if infeasibility > self.config.feasibility_tol {
            return Ok(LpOutcome::Infeasible);
        }

        // Retire the artificials.
        for j in n + m..self.cols {
            self.upper[j] = 0.0;
            self.barred[j] = true;
            if !self.in_basis[j] {
                self.x[j] = 0.0;
            }
        }
        self.drive_out_artificials();
        self.settle()?;

        if p.sense != Sense::Feasibility {
            let flip = if p.sense == Sense::Maximize {
                -1.0
            } else {
                1.0
            };
            self.cost = vec![0.0; self.cols];
            for &(v, c) in &p.objective {
                self.cost[v] += flip * c;
            }
            self.recompute_reduced_costs();
            if let PhaseEnd::Unbounded = self.run_phase()? {
                return Ok(LpOutcome::Unbounded);
            }
            self.settle()?;
        }

        let mut point: Vec<f64> = self.x[..n].to_vec();
        let tol = self.config.feasibility_tol;
        for (j, v) in point.iter_mut().enumerate() {
            if *v < p.lower[j] && *v >= p.lower[j] - tol {
                *v = p.lower[j];
            } else if *v > p.upper[j] && *v <= p.upper[j] + tol {
                *v = p.upper[j];
            }
        }
        let violation = p.max_scaled_violation(&point);
        if violation > tol {
            return Err(Error::Solver(format!(
                "simplex point violates the problem by {violation:e}"
            )));
        }
        Ok(LpOutcome::Optimal {
            value: p.objective_value(&point),
            point,
        })
    }

    fn recompute_reduced_costs(&mut self) {
        let w = self.width();
        let mut d = self.cost.clone();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = self.cost[b];
            if cb != 0.0 {
                let row = &self.t[i * w..i * w + self.cols];
                for (dj, &tij) in d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
        for &b in &self.basis {
            d[b] = 0.0;
        }
        self.d = d;
    }

    fn run_phase(&mut self) -> Result<PhaseEnd> {
        let mut degenerate_run = 0usize;
        loop {
            self.iterations += 1;
            if self.iterations > self.config.max_iterations {
                return Err(Error::Solver("simplex iteration limit reached".into()));
            }
            if self.pivots_since_refactor >= self.config.refactor_every {
                self.refactor()?;
                self.recompute_reduced_costs();
            }
            let bland = degenerate_run >= self.config.bland_threshold;
            let Some(entering) = self.price(bland) else {
                return Ok(PhaseEnd::Optimal);
            };
            let dir = if self.d[entering] < 0.0 { 1.0 } else { -1.0 };
            let (step, leaving) = self.ratio_test(entering, dir, bland);
            if step.is_infinite() {
                return Ok(PhaseEnd::Unbounded);
            }
            self.advance(entering, dir, step);
            match leaving {
                None => {
                    self.x[entering] = if dir > 0.0 {
                        self.upper[entering]
                    } else {
                        self.lower[entering]
                    };
                }
                Some((row, to_lower)) => {
                    let leaving_var = self.basis[row];
                    self.pivot(row, entering);
                    self.x[leaving_var] = if to_lower {
                        self.lower[leaving_var]
                    } else {
                        self.upper[leaving_var]
                    };
                }
            }
            if step <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
        }
    }

    fn price(&self, bland: bool) -> Option<usize> {
        let tol = self.config.optimality_tol;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cols {
            if self.in_basis[j] || self.barred[j] || self.lower[j] == self.upper[j] {
                continue;
            }
            let dj = self.d[j];
            let eligible =
                (dj < -tol && self.x[j] < self.upper[j]) || (dj > tol && self.x[j] > self.lower[j]);
            if !eligible {
                continue;
            }
            if bland {
                return Some(j);
            }
            if best.map_or(true, |(_, v)| dj.abs() > v) {
                best = Some((j, dj.abs()));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Longest step along `dir` for the entering column. Returns the step
    /// and, when a basic variable blocks, its row and whether it leaves at
    /// its lower bound.
    fn ratio_test(&self, j: usize, dir: f64, bland: bool) -> (f64, Option<(usize, bool)>) {
        let piv = self.config.pivot_tol;
        let mut step = self.upper[j] - self.lower[j];
        let mut leaving: Option<(usize, bool, f64)> = None;
        for i in 0..self.m {
            let alpha = self.at(i, j) * dir;
            if alpha.abs() <= piv {
                continue;
            }
            let b = self.basis[i];
            let (limit, to_lower) = if alpha > 0.0 {
                if !self.lower[b].is_finite() {
                    continue;
                }
                ((self.x[b] - self.lower[b]) / alpha, true)
            } else {
                if !self.upper[b].is_finite() {
                    continue;
                }
                ((self.upper[b] - self.x[b]) / -alpha, false)
            };
            let limit = limit.max(0.0);
            let better = match leaving {
                None => limit < step,
                Some((r, _, best_alpha)) => {
                    if limit < step - 1e-12 {
                        true
                    } else if limit <= step + 1e-12 {
                        if bland {
                            b < self.basis[r]
                        } else {
                            alpha.abs() > best_alpha
                        }
                    } else {
                        false
                    }
                }
            };
            if better {
                step = if leaving.is_none() {
                    limit
                } else {
                    limit.min(step)
                };
                leaving = Some((i, to_lower, alpha.abs()));
            }
        }
        (step, leaving.map(|(r, l, _)| (r, l)))
    }

    fn advance(&mut self, j: usize, dir: f64, step: f64) {
        if step == 0.0 {
            return;
        }
        let delta = dir * step;
        self.x[j] += delta;
        for i in 0..self.m {
            let a = self.at(i, j);
            if a != 0.0 {
                let b = self.basis[i];
                self.x[b] -= a * delta;
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let w = self.width();
        let p = self.t[r * w + j];
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + j];
            if f != 0.0 {
                for (v, &pr) in self.t[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
                self.t[i * w + j] = 0.0;
            }
        }
        let dj = self.d[j];
        if dj != 0.0 {
            for (dv, &pr) in self.d.iter_mut().zip(&pivot_row[..self.cols]) {
                *dv -= dj * pr;
            }
        }
        self.d[j] = 0.0;
        let old = self.basis[r];
        self.in_basis[old] = false;
        self.in_basis[j] = true;
        self.basis[r] = j;
        self.pivots_since_refactor += 1;
    }

    /// Swaps basic artificials for structural or slack columns where the row
    /// allows it; rows without such a column are redundant and keep their
    /// artificial fixed at zero.
    fn drive_out_artificials(&mut self) {
        let first_art = self.n + self.m;
        for r in 0..self.m {
            if self.basis[r] < first_art {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..first_art {
                if self.in_basis[j] {
                    continue;
                }
                let a = self.at(r, j).abs();
                if a > 1e-7 && best.map_or(true, |(_, v)| a > v) {
                    best = Some((j, a));
                }
            }
            if let Some((j, _)) = best {
                let art = self.basis[r];
                self.pivot(r, j);
                self.x[art] = 0.0;
            }
        }
    }

    /// Phase-end cleanup: refactorise if the basis changed since the last
    /// factorisation, otherwise just recompute the basic values.
    fn settle(&mut self) -> Result<()> {
        if self.pivots_since_refactor > 0 {
            return self.refactor();
        }
        self.recompute_basics();
        Ok(())
    }

    fn recompute_basics(&mut self) {
        let w = self.width();
        for i in 0..self.m {
            let mut v = self.t[i * w + self.cols];
            for j in 0..self.cols {
                if !self.in_basis[j] {
                    let a = self.t[i * w + j];
                    if a != 0.0 {
                        v -= a * self.x[j];
                    }
                }
            }
            self.x[self.basis[i]] = v;
        }
    }

    /// Rebuilds `B^-1 [A | b]` from the original rows by Gauss-Jordan
    /// elimination on the basic columns, then recomputes the basic values.
    #[allow(clippy::needless_range_loop)]
    fn refactor(&mut self) -> Result<()> {
        let (m, w) = (self.m, self.width());
        let mut t = self.orig.clone();
        let mut row_of = vec![usize::MAX; m];
        let mut used = vec![false; m];
        for k in 0..m {
            let col = self.basis[k];
            let mut best: Option<(usize, f64)> = None;
            for i in 0..m {
                if used[i] {
                    continue;
                }
                let a = t[i * w + col].abs();
                if best.map_or(true, |(_, v)| a > v) {
                    best = Some((i, a));
                }
            }
            let (pr, mag) = best.expect("m > 0 inside the loop");
            if mag < 1e-12 {
                return Err(Error::Solver(
                    "singular basis during refactorisation".into(),
                ));
            }
            used[pr] = true;
            row_of[k] = pr;
            let p = t[pr * w + col];
            for v in &mut t[pr * w..(pr + 1) * w] {
                *v /= p;
            }
            let pivot_row: Vec<f64> = t[pr * w..(pr + 1) * w].to_vec();
            for i in 0..m {
                if i == pr {
                    continue;
                }
                let f = t[i * w + col];
                if f != 0.0 {
                    for (v, &pv) in t[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                    t[i * w + col] = 0.0;
                }
            }
        }
        // Row `row_of[k]` now holds the unit vector of `basis[k]`.
        let mut basis = vec![0; m];
        for k in 0..m {
            basis[row_of[k]] = self.basis[k];
        }
        self.basis = basis;
        self.t = t;
        self.recompute_basics();
        self.pivots_since_refactor = 0;
        Ok(())
    }
}
