//! Abductive explanations.
//!
//! Starting from a fully fixed instance, attributes are visited in a chosen
//! order. Each candidate is freed together with every attribute already
//! removed, and it is dropped for good when the remaining fixed attributes
//! still force the predicted class. What stays fixed is a subset-minimal
//! sufficient reason for the prediction.
//!
//! "Force the predicted class" is checked one rival class at a time: the
//! query asks for an input, agreeing with the fixed attributes and inside the
//! domain, where the rival scores at least as high as the target. Entailment
//! holds when every such query is infeasible. Ties count against the target,
//! so a kept attribute always comes with an input where the prediction is no
//! longer unique.
//!
//! Two modes share this loop. [`Mode::Baseline`] sends every candidate to the
//! solver with the domain-wide tight bounds. [`Mode::Improved`] first runs Box
//! propagation on the candidate assignment: if the target's lower bound beats
//! every rival's upper bound the attribute goes without a solver call;
//! otherwise the Box bounds are merged into the big-M constants, neurons that
//! become stable lose their indicator, and the smaller problem goes to the
//! solver. The refined problem is a per-candidate copy, so the stored tight
//! bounds and base encoding are never touched.

mod bounds;
mod verify;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use bounds::{compute_tight_bounds, TightBoundsMode};
pub use verify::{MinimalityCheck, SampleViolation, VerificationReport, WitnessCheck};

use crate::bnb::{BranchAndBound, BranchConfig, MilpOutcome, MilpStatus, SolverBackend};
use crate::error::{Error, Result};
use crate::interval::{box_propagate, shortcut_check, AttributeAssignment, BoundsMap, Shortcut};
use crate::milp::{encode_network, tighten_and_simplify, MilpProblem};
use crate::network::{InputDomain, Model, Network};

/// Which variant of the explanation loop to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Baseline,
    Improved,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Self::Baseline),
            "improved" => Ok(Self::Improved),
            other => Err(Error::Load(format!(
                "unknown mode `{other}` (expected baseline or improved)"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Baseline => "baseline",
            Self::Improved => "improved",
        })
    }
}

/// Order in which attributes are offered for removal.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum AttributeOrder {
    #[default]
    Ascending,
    Custom(Vec<usize>),
}

impl AttributeOrder {
    /// The visiting order for `n` attributes; a custom order must be a
    /// permutation of `0..n`.
    pub fn resolve(&self, n: usize) -> Result<Vec<usize>> {
        match self {
            Self::Ascending => Ok((0..n).collect()),
            Self::Custom(perm) => {
                if perm.len() != n {
                    return Err(Error::InvalidOrder(format!(
                        "{} indices given for {n} attributes",
                        perm.len()
                    )));
                }
                let mut seen = vec![false; n];
                for &i in perm {
                    if i >= n {
                        return Err(Error::InvalidOrder(format!(
                            "index {i} out of range for {n} attributes"
                        )));
                    }
                    if std::mem::replace(&mut seen[i], true) {
                        return Err(Error::InvalidOrder(format!("index {i} appears twice")));
                    }
                }
                Ok(perm.clone())
            }
        }
    }
}

impl FromStr for AttributeOrder {
    type Err = Error;

    /// `asc`, or a comma-separated list of attribute indices.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "asc" {
            return Ok(Self::Ascending);
        }
        s.split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidOrder(format!("`{tok}` is not an attribute index")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::Custom)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EngineConfig {
    pub tight_bounds: TightBoundsMode,
    pub order: AttributeOrder,
    /// Solver tolerances and the per-call time budget.
    pub branch: BranchConfig,
}

/// Why an attribute ended up in or out of the explanation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    RemovedByBox,
    RemovedBySolver,
    KeptBySolver,
    /// The solver ran out of time; keeping the attribute is always sound.
    KeptByTimeout,
}

impl Decision {
    pub fn is_kept(self) -> bool {
        matches!(self, Self::KeptBySolver | Self::KeptByTimeout)
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::RemovedByBox => "removed_box",
            Self::RemovedBySolver => "removed_solver",
            Self::KeptBySolver => "kept_solver",
            Self::KeptByTimeout => "kept_timeout",
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Decision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Self::RemovedByBox,
            Self::RemovedBySolver,
            Self::KeptBySolver,
            Self::KeptByTimeout,
        ]
        .into_iter()
        .find(|d| d.tag() == s)
        .ok_or_else(|| Error::Load(format!("unknown decision tag `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub target: usize,
    /// Kept attributes and their instance values, by ascending index.
    pub kept: Vec<(usize, f64)>,
    /// One decision per attribute, indexed by attribute.
    pub decisions: Vec<Decision>,
    /// The order attributes were visited in.
    pub order: Vec<usize>,
}

impl Explanation {
    pub fn kept_indices(&self) -> Vec<usize> {
        self.kept.iter().map(|&(i, _)| i).collect()
    }

    pub fn is_kept(&self, i: usize) -> bool {
        self.decisions[i].is_kept()
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    /// Kept attributes fixed to their values, everything else free.
    pub fn assignment(&self) -> AttributeAssignment {
        let mut a = AttributeAssignment::all_free(self.decisions.len());
        for &(i, v) in &self.kept {
            a.fix(i, v);
        }
        a
    }
}

/// Counters behind the timing and simplification metrics.
///
/// Percentages are over solver-bound iterations: every attribute that reaches
/// the solver contributes its neuron and indicator counts once. Counters add
/// up across runs with [`ExplainStats::merge`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExplainStats {
    pub total_time: Duration,
    pub solver_time: Duration,
    /// Feasibility calls, one per rival query.
    pub solver_calls: usize,
    pub box_shortcut_hits: usize,
    /// Attributes kept because a call hit the time budget.
    pub timeouts: usize,
    /// Attributes decided by the solver.
    pub solver_iterations: usize,
    pub neurons_seen: usize,
    pub bounds_tightened: usize,
    pub binaries_seen: usize,
    /// Indicators absent from the base encoding, summed over solver iterations.
    pub binaries_removed_before: usize,
    /// Indicators absent from the problem actually solved.
    pub binaries_removed_ours: usize,
    /// Hidden neurons and stable ones in the base encoding, summed per run.
    pub encoded_hidden: usize,
    pub encoded_stable: usize,
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

impl ExplainStats {
    pub fn bounds_tightened_pct(&self) -> f64 {
        pct(self.bounds_tightened, self.neurons_seen)
    }

    /// Share of indicators the domain-wide tight bounds already remove.
    pub fn bin_vars_removed_before_pct(&self) -> f64 {
        if self.binaries_seen == 0 {
            pct(self.encoded_stable, self.encoded_hidden)
        } else {
            pct(self.binaries_removed_before, self.binaries_seen)
        }
    }

    /// Share of indicators removed in the problems actually solved.
    pub fn bin_vars_removed_ours_pct(&self) -> f64 {
        if self.binaries_seen == 0 {
            self.bin_vars_removed_before_pct()
        } else {
            pct(self.binaries_removed_ours, self.binaries_seen)
        }
    }

    pub fn merge(&mut self, other: &ExplainStats) {
        self.total_time += other.total_time;
        self.solver_time += other.solver_time;
        self.solver_calls += other.solver_calls;
        self.box_shortcut_hits += other.box_shortcut_hits;
        self.timeouts += other.timeouts;
        self.solver_iterations += other.solver_iterations;
        self.neurons_seen += other.neurons_seen;
        self.bounds_tightened += other.bounds_tightened;
        self.binaries_seen += other.binaries_seen;
        self.binaries_removed_before += other.binaries_removed_before;
        self.binaries_removed_ours += other.binaries_removed_ours;
        self.encoded_hidden += other.encoded_hidden;
        self.encoded_stable += other.encoded_stable;
    }
}

impl<'a> std::iter::Sum<&'a ExplainStats> for ExplainStats {
    fn sum<I: Iterator<Item = &'a ExplainStats>>(iter: I) -> Self {
        iter.fold(Self::default(), |mut acc, s| {
            acc.merge(s);
            acc
        })
    }
}

/// Result of one entailment check.
#[derive(Debug, Clone, PartialEq)]
pub enum Entailment {
    Entailed,
    /// Input values where `rival` scores at least as high as the target.
    NotEntailed {
        rival: usize,
        witness: Vec<f64>,
    },
    /// Some query timed out and none produced a counterexample.
    Unknown,
}

/// Sees every rival query sent to the solver together with its outcome.
pub trait QueryObserver {
    fn observe(&mut self, query: &MilpProblem, outcome: &MilpOutcome);
}

struct Silent;

impl QueryObserver for Silent {
    fn observe(&mut self, _: &MilpProblem, _: &MilpOutcome) {}
}

/// A network with its precomputed tight bounds and base encoding.
pub struct Explainer {
    model: Model,
    config: EngineConfig,
    backend: Arc<dyn SolverBackend>,
    tight: BoundsMap,
    base: MilpProblem,
}

impl fmt::Debug for Explainer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Explainer")
            .field("config", &self.config)
            .field("binaries", &self.base.binary_count())
            .finish_non_exhaustive()
    }
}

impl Explainer {
    /// Uses the built-in branch-and-bound solver configured by `config.branch`.
    pub fn new(model: Model, config: EngineConfig) -> Result<Self> {
        let backend = Arc::new(BranchAndBound::new(config.branch.clone()));
        Self::with_backend(model, config, backend)
    }

    pub fn with_backend(
        model: Model,
        config: EngineConfig,
        backend: Arc<dyn SolverBackend>,
    ) -> Result<Self> {
        config.order.resolve(model.network.input_dim())?;
        // Bound optimisation must finish, so it never inherits the budget.
        let tight = if config.branch.time_budget.is_some() {
            let unbudgeted = BranchAndBound::new(BranchConfig {
                time_budget: None,
                ..config.branch.clone()
            });
            compute_tight_bounds(
                &model.network,
                &model.domain,
                config.tight_bounds,
                &unbudgeted,
            )?
        } else {
            compute_tight_bounds(
                &model.network,
                &model.domain,
                config.tight_bounds,
                backend.as_ref(),
            )?
        };
        let base = encode_network(&model.network, &model.domain, &tight)?;
        Ok(Self {
            model,
            config,
            backend,
            tight,
            base,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn network(&self) -> &Network {
        &self.model.network
    }

    pub fn domain(&self) -> &InputDomain {
        &self.model.domain
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn backend(&self) -> &dyn SolverBackend {
        self.backend.as_ref()
    }

    pub fn tight_bounds(&self) -> &BoundsMap {
        &self.tight
    }

    /// The network encoded over the whole domain with the tight bounds.
    pub fn base_problem(&self) -> &MilpProblem {
        &self.base
    }

    /// Predicted class of `instance`, rejecting instances outside the domain
    /// and tied predictions.
    pub fn target_class(&self, instance: &[f64]) -> Result<usize> {
        self.model.domain.check_instance(instance)?;
        let act = self.model.network.forward(instance)?;
        let out = act.outputs();
        let target = crate::network::argmax(out);
        if let Some(j) = (0..out.len()).find(|&j| j != target && out[j] == out[target]) {
            return Err(Error::TiedPrediction(target, j));
        }
        Ok(target)
    }

    /// Decides entailment of `target` under `assign` on the base encoding.
    pub fn is_entailed(&self, assign: &AttributeAssignment, target: usize) -> Result<Entailment> {
        let mut stats = ExplainStats::default();
        self.entailed_on(&self.base, assign, target, &mut stats, &mut Silent)
    }

    fn entailed_on(
        &self,
        problem: &MilpProblem,
        assign: &AttributeAssignment,
        target: usize,
        stats: &mut ExplainStats,
        observer: &mut dyn QueryObserver,
    ) -> Result<Entailment> {
        let fixed = problem.fix_attributes(assign)?;
        let classes = self.model.network.class_count();
        if target >= classes {
            return Err(Error::ClassOutOfRange {
                index: target,
                classes,
            });
        }
        let mut unknown = false;
        for rival in (0..classes).filter(|&r| r != target) {
            let query = fixed.attach_rival_query(target, rival)?;
            let started = Instant::now();
            let outcome = self.backend.feasibility(&query)?;
            stats.solver_time += started.elapsed();
            stats.solver_calls += 1;
            observer.observe(&query, &outcome);
            match outcome.status {
                MilpStatus::Sat => {
                    let witness = outcome.witness.ok_or_else(|| {
                        Error::Solver("feasible outcome without a witness".into())
                    })?;
                    return Ok(Entailment::NotEntailed { rival, witness });
                }
                MilpStatus::Unsat => {}
                MilpStatus::Unknown => unknown = true,
                other => {
                    return Err(Error::Solver(format!(
                        "feasibility query ended with {other:?}"
                    )))
                }
            }
        }
        Ok(if unknown {
            Entailment::Unknown
        } else {
            Entailment::Entailed
        })
    }

    pub fn explain(&self, instance: &[f64], mode: Mode) -> Result<(Explanation, ExplainStats)> {
        self.explain_observed(instance, mode, &mut Silent)
    }

    pub fn explain_baseline(&self, instance: &[f64]) -> Result<(Explanation, ExplainStats)> {
        self.explain(instance, Mode::Baseline)
    }

    pub fn explain_improved(&self, instance: &[f64]) -> Result<(Explanation, ExplainStats)> {
        self.explain(instance, Mode::Improved)
    }

    /// [`Explainer::explain`], reporting every solver query to `observer`.
    pub fn explain_observed(
        &self,
        instance: &[f64],
        mode: Mode,
        observer: &mut dyn QueryObserver,
    ) -> Result<(Explanation, ExplainStats)> {
        let started = Instant::now();
        let target = self.target_class(instance)?;
        let n = instance.len();
        let order = self.config.order.resolve(n)?;
        let layout = self.base.layout().expect("base encoding has a layout");
        let hidden = layout.hidden_count();
        let stable = layout.stable_count();

        let mut stats = ExplainStats {
            encoded_hidden: hidden,
            encoded_stable: stable,
            ..ExplainStats::default()
        };
        let mut assign = AttributeAssignment::all_fixed(instance);
        let mut decisions = vec![Decision::KeptBySolver; n];

        for &i in &order {
            assign.free(i);
            let verdict = match mode {
                Mode::Baseline => {
                    stats.solver_iterations += 1;
                    stats.binaries_seen += hidden;
                    stats.binaries_removed_before += stable;
                    stats.binaries_removed_ours += stable;
                    self.entailed_on(&self.base, &assign, target, &mut stats, observer)?
                }
                Mode::Improved => {
                    let boxed = box_propagate(&self.model.network, &assign, &self.model.domain)?;
                    if shortcut_check(&boxed, target)? == Shortcut::Removable {
                        stats.box_shortcut_hits += 1;
                        decisions[i] = Decision::RemovedByBox;
                        continue;
                    }
                    let (refined, s) = tighten_and_simplify(&self.base, &self.tight, &boxed)?;
                    stats.solver_iterations += 1;
                    stats.neurons_seen += s.neurons_total;
                    stats.bounds_tightened += s.bounds_tightened_count;
                    stats.binaries_seen += s.binary_total;
                    stats.binaries_removed_before += stable;
                    stats.binaries_removed_ours += s.binary_removed_count;
                    self.entailed_on(&refined, &assign, target, &mut stats, observer)?
                }
            };
            decisions[i] = match verdict {
                Entailment::Entailed => Decision::RemovedBySolver,
                Entailment::NotEntailed { .. } => Decision::KeptBySolver,
                Entailment::Unknown => {
                    stats.timeouts += 1;
                    Decision::KeptByTimeout
                }
            };
            if decisions[i].is_kept() {
                assign.fix(i, instance[i]);
            }
        }

        let kept = (0..n)
            .filter(|&i| decisions[i].is_kept())
            .map(|i| (i, instance[i]))
            .collect();
        stats.total_time = started.elapsed();
        Ok((
            Explanation {
                target,
                kept,
                decisions,
                order,
            },
            stats,
        ))
    }
}
