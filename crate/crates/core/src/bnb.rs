//! Branch-and-bound over binary variables.
//!
//! Depth-first search on LP relaxations. Each node branches on the most
//! fractional binary and explores the side its relaxation value rounds to
//! first. An integral relaxation is polished by pinning every binary to its
//! rounded value and re-solving, so reported points have exactly integral
//! binaries.

use std::time::{Duration, Instant};

use log::debug;

use crate::error::{Error, Result};
use crate::milp::{MilpProblem, Relation, VarId};
use crate::simplex::{solve_lp_with, LpOutcome, LpProblem, Sense, SimplexConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct BranchConfig {
    /// A relaxed binary within this distance of 0 or 1 counts as integral.
    pub integrality_tol: f64,
    /// Prune nodes whose relaxation cannot beat the incumbent.
    pub prune: bool,
    /// Wall-clock budget for one feasibility call.
    pub time_budget: Option<Duration>,
    pub lp: SimplexConfig,
}

impl Default for BranchConfig {
    fn default() -> Self {
        Self {
            integrality_tol: 1e-6,
            prune: true,
            time_budget: None,
            lp: SimplexConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MilpStatus {
    Sat,
    Unsat,
    /// The time budget ran out before the search finished.
    Unknown,
    Optimal(f64),
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpOutcome {
    pub status: MilpStatus,
    /// Full variable assignment for `Sat` and `Optimal`.
    pub point: Option<Vec<f64>>,
    /// Input-variable values of `point` when the problem encodes a network,
    /// otherwise the whole point.
    pub witness: Option<Vec<f64>>,
    pub node_count: usize,
    pub wall_time: Duration,
}

impl MilpOutcome {
    pub fn is_sat(&self) -> bool {
        self.status == MilpStatus::Sat
    }

    pub fn value(&self) -> Option<f64> {
        match self.status {
            MilpStatus::Optimal(v) => Some(v),
            _ => None,
        }
    }
}

/// The decision procedure behind entailment checks and bound optimisation.
/// Alternative MILP engines plug in here; they must report integral points
/// that satisfy the problem within `1e-6`.
pub trait SolverBackend: Send + Sync {
    fn feasibility(&self, problem: &MilpProblem) -> Result<MilpOutcome>;

    fn optimize(
        &self,
        problem: &MilpProblem,
        objective: &[(VarId, f64)],
        sense: Sense,
    ) -> Result<MilpOutcome>;
}

/// The built-in depth-first branch-and-bound solver.
#[derive(Debug, Clone, Default)]
pub struct BranchAndBound {
    pub config: BranchConfig,
}

impl BranchAndBound {
    pub fn new(config: BranchConfig) -> Self {
        Self { config }
    }
}

impl SolverBackend for BranchAndBound {
    fn feasibility(&self, problem: &MilpProblem) -> Result<MilpOutcome> {
        search(problem, &[], Sense::Feasibility, &self.config)
    }

    fn optimize(
        &self,
        problem: &MilpProblem,
        objective: &[(VarId, f64)],
        sense: Sense,
    ) -> Result<MilpOutcome> {
        search(problem, objective, sense, &self.config)
    }
}

pub fn solve_feasibility(problem: &MilpProblem) -> Result<MilpOutcome> {
    BranchAndBound::default().feasibility(problem)
}

pub fn optimize(
    problem: &MilpProblem,
    objective: &[(VarId, f64)],
    sense: Sense,
) -> Result<MilpOutcome> {
    BranchAndBound::default().optimize(problem, objective, sense)
}

struct Node {
    fixings: Vec<(usize, bool)>,
}

fn apply(base: &LpProblem, fixings: &[(usize, bool)]) -> LpProblem {
    let mut lp = base.clone();
    for &(v, one) in fixings {
        let x = if one { 1.0 } else { 0.0 };
        lp.set_bounds(v, x, x);
    }
    lp
}

fn finish(
    problem: &MilpProblem,
    status: MilpStatus,
    point: Option<Vec<f64>>,
    node_count: usize,
    start: Instant,
) -> MilpOutcome {
    let witness = point.as_ref().map(|x| match problem.layout() {
        Some(layout) => layout.inputs.iter().map(|&v| x[v]).collect(),
        None => x.clone(),
    });
    MilpOutcome {
        status,
        point,
        witness,
        node_count,
        wall_time: start.elapsed(),
    }
}

fn round_binaries(point: &mut [f64], binaries: &[VarId]) {
    for &v in binaries {
        point[v] = point[v].round();
    }
}

fn search(
    problem: &MilpProblem,
    objective: &[(VarId, f64)],
    sense: Sense,
    config: &BranchConfig,
) -> Result<MilpOutcome> {
    let start = Instant::now();
    let binaries = problem.binary_ids();
    let optimizing = sense != Sense::Feasibility;
    // Internally always minimise.
    let internal: Vec<(VarId, f64)> = match sense {
        Sense::Maximize => objective.iter().map(|&(v, c)| (v, -c)).collect(),
        _ => objective.to_vec(),
    };
    let lp_sense = if optimizing {
        Sense::Minimize
    } else {
        Sense::Feasibility
    };
    let base = problem.relaxation(&internal, lp_sense);
    let to_external = |v: f64| if sense == Sense::Maximize { -v } else { v };

    let mut stack = vec![Node {
        fixings: Vec::new(),
    }];
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes = 0usize;

    while let Some(node) = stack.pop() {
        if !optimizing {
            if let Some(budget) = config.time_budget {
                if start.elapsed() > budget {
                    debug!("feasibility budget exhausted after {nodes} nodes");
                    return Ok(finish(problem, MilpStatus::Unknown, None, nodes, start));
                }
            }
        }
        nodes += 1;
        let lp = apply(&base, &node.fixings);
        let (value, point) = match solve_lp_with(&lp, &config.lp)? {
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded => {
                return Ok(finish(problem, MilpStatus::Unbounded, None, nodes, start));
            }
            LpOutcome::Optimal { value, point } => (value, point),
        };
        if optimizing && config.prune {
            if let Some((best, _)) = &incumbent {
                if value >= best - 1e-9 * best.abs().max(1.0) {
                    continue;
                }
            }
        }

        let fractional = most_fractional(&point, &binaries, config.integrality_tol);
        let branch_var = match fractional {
            Some(v) => Some(v),
            None => {
                let pins: Vec<(usize, bool)> =
                    binaries.iter().map(|&v| (v, point[v] >= 0.5)).collect();
                match solve_lp_with(&apply(&base, &pins), &config.lp)? {
                    LpOutcome::Optimal {
                        value: pv,
                        point: mut pp,
                    } => {
                        round_binaries(&mut pp, &binaries);
                        if !optimizing {
                            return Ok(finish(problem, MilpStatus::Sat, Some(pp), nodes, start));
                        }
                        if incumbent.as_ref().map_or(true, |(best, _)| pv < *best) {
                            incumbent = Some((pv, pp));
                        }
                        None
                    }
                    LpOutcome::Unbounded => {
                        return Ok(finish(problem, MilpStatus::Unbounded, None, nodes, start));
                    }
                    // Rounding within tolerance broke feasibility; branch on
                    // whatever is not exactly integral.
                    LpOutcome::Infeasible => most_fractional(&point, &binaries, 0.0),
                }
            }
        };

        if let Some(v) = branch_var {
            let first = point[v] >= 0.5;
            let mut second_fix = node.fixings.clone();
            second_fix.push((v, !first));
            let mut first_fix = node.fixings;
            first_fix.push((v, first));
            stack.push(Node {
                fixings: second_fix,
            });
            stack.push(Node { fixings: first_fix });
        }
    }

    let outcome = if optimizing {
        match incumbent {
            Some((v, p)) => finish(
                problem,
                MilpStatus::Optimal(to_external(v)),
                Some(p),
                nodes,
                start,
            ),
            None => finish(problem, MilpStatus::Infeasible, None, nodes, start),
        }
    } else {
        finish(problem, MilpStatus::Unsat, None, nodes, start)
    };
    Ok(outcome)
}

/// Binary whose relaxed value is farthest from an integer, if beyond `tol`;
/// the lowest id wins ties.
fn most_fractional(point: &[f64], binaries: &[VarId], tol: f64) -> Option<VarId> {
    let mut best: Option<(VarId, f64)> = None;
    for &v in binaries {
        let frac = (point[v] - point[v].round()).abs();
        if frac > tol && best.map_or(true, |(_, f)| frac > f) {
            best = Some((v, frac));
        }
    }
    best.map(|(v, _)| v)
}

/// Solves `lp` after substituting out fixed variables and turning rows left
/// with a single variable into bounds, repeated while that pins more
/// variables. With every binary pinned, a ReLU
/// encoding loses a third of its rows this way.
fn solve_pinned(lp: &LpProblem, config: &SimplexConfig) -> Result<LpOutcome> {
    let tol = config.feasibility_tol;
    let n = lp.num_vars();
    let mut lower = lp.lower.clone();
    let mut upper = lp.upper.clone();
    let fixed: Vec<bool> = (0..n).map(|j| lower[j] == upper[j]).collect();

    let mut rows = Vec::with_capacity(lp.rows.len());
    for row in &lp.rows {
        let mut rhs = row.rhs;
        let mut terms = Vec::with_capacity(row.terms.len());
        for &(v, c) in &row.terms {
            if fixed[v] {
                rhs -= c * lower[v];
            } else {
                terms.push((v, c));
            }
        }
        let slack = tol * (1.0 + row.rhs.abs());
        match terms.as_slice() {
            [] => {
                let ok = match row.relation {
                    Relation::Le => 0.0 <= rhs + slack,
                    Relation::Ge => 0.0 >= rhs - slack,
                    Relation::Eq => rhs.abs() <= slack,
                };
                if !ok {
                    return Ok(LpOutcome::Infeasible);
                }
            }
            &[(v, c)] => {
                let bound = rhs / c;
                let (caps_above, caps_below) = match row.relation {
                    Relation::Le => (c > 0.0, c < 0.0),
                    Relation::Ge => (c < 0.0, c > 0.0),
                    Relation::Eq => (true, true),
                };
                if caps_above {
                    upper[v] = upper[v].min(bound);
                }
                if caps_below {
                    lower[v] = lower[v].max(bound);
                }
            }
            _ => rows.push((terms, row.relation, rhs)),
        }
    }
    for j in 0..n {
        if lower[j] > upper[j] {
            if lower[j] > upper[j] + tol * (1.0 + upper[j].abs()) {
                return Ok(LpOutcome::Infeasible);
            }
            let mid = 0.5 * (lower[j] + upper[j]);
            lower[j] = mid;
            upper[j] = mid;
        }
    }
    // New bounds may have pinned more variables; substitute those too.
    if (0..n).any(|j| !fixed[j] && lower[j] == upper[j]) {
        let mut next = lp.clone();
        next.lower = lower;
        next.upper = upper;
        return solve_pinned(&next, config);
    }

    let free: Vec<usize> = (0..n).filter(|&j| !fixed[j]).collect();
    let mut index = vec![usize::MAX; n];
    for (k, &j) in free.iter().enumerate() {
        index[j] = k;
    }
    let mut reduced = LpProblem::new(free.len(), lp.sense);
    for (k, &j) in free.iter().enumerate() {
        reduced.set_bounds(k, lower[j], upper[j]);
    }
    for (terms, relation, rhs) in rows {
        reduced.add_row(
            terms.into_iter().map(|(v, c)| (index[v], c)).collect(),
            relation,
            rhs,
        );
    }
    reduced.objective = lp
        .objective
        .iter()
        .filter(|&&(v, _)| !fixed[v])
        .map(|&(v, c)| (index[v], c))
        .collect();

    Ok(match solve_lp_with(&reduced, config)? {
        LpOutcome::Optimal { point, .. } => {
            let mut full = lp.lower.clone();
            for (k, &j) in free.iter().enumerate() {
                full[j] = point[k];
            }
            LpOutcome::Optimal {
                value: lp.objective_value(&full),
                point: full,
            }
        }
        other => other,
    })
}

/// Most binaries [`oracle_enumerate`] accepts.
pub const ORACLE_BINARY_CAP: usize = 20;

/// Ground truth by brute force: one LP per assignment of the binaries.
///
/// With `objective == None` this decides feasibility (stopping at the first
/// feasible assignment); otherwise it returns the best optimum over all
/// assignments.
pub fn oracle_enumerate(
    problem: &MilpProblem,
    objective: Option<(&[(VarId, f64)], Sense)>,
) -> Result<MilpOutcome> {
    oracle_enumerate_with(problem, objective, &SimplexConfig::default())
}

pub fn oracle_enumerate_with(
    problem: &MilpProblem,
    objective: Option<(&[(VarId, f64)], Sense)>,
    lp_config: &SimplexConfig,
) -> Result<MilpOutcome> {
    let start = Instant::now();
    let binaries = problem.binary_ids();
    if binaries.len() > ORACLE_BINARY_CAP {
        return Err(Error::TooManyBinaries {
            binaries: binaries.len(),
            cap: ORACLE_BINARY_CAP,
        });
    }
    let (terms, sense) = objective.unwrap_or((&[], Sense::Feasibility));
    let base = problem.relaxation(terms, sense);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut solved = 0usize;
    for mask in 0u32..(1u32 << binaries.len()) {
        let fixings: Vec<(usize, bool)> = binaries
            .iter()
            .enumerate()
            .map(|(k, &v)| (v, mask >> k & 1 == 1))
            .collect();
        solved += 1;
        match solve_pinned(&apply(&base, &fixings), lp_config)? {
            LpOutcome::Infeasible => {}
            LpOutcome::Unbounded => {
                return Ok(finish(problem, MilpStatus::Unbounded, None, solved, start));
            }
            LpOutcome::Optimal { value, mut point } => {
                round_binaries(&mut point, &binaries);
                if sense == Sense::Feasibility {
                    return Ok(finish(problem, MilpStatus::Sat, Some(point), solved, start));
                }
                let better = best.as_ref().map_or(true, |(b, _)| match sense {
                    Sense::Maximize => value > *b,
                    _ => value < *b,
                });
                if better {
                    best = Some((value, point));
                }
            }
        }
    }
    Ok(match (sense, best) {
        (Sense::Feasibility, _) => finish(problem, MilpStatus::Unsat, None, solved, start),
        (_, Some((v, p))) => finish(problem, MilpStatus::Optimal(v), Some(p), solved, start),
        (_, None) => finish(problem, MilpStatus::Infeasible, None, solved, start),
    })
}
