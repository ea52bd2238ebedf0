//! Linear-constraint intermediate representation.
//!
//! A [`MilpProblem`] is a flat list of variables and linear constraints. When
//! it encodes a network it also carries a [`NetworkLayout`] that maps every
//! hidden neuron to its variables and rows, so bound refinement can rewrite a
//! neuron's big-M block or collapse it once the neuron is known to be stable.

mod encode;
mod simplify;

use std::fmt::Write as _;

pub use encode::{encode_network, encode_network_raw, encode_prefix};
pub use simplify::{
    merge_bounds, simplify_stable, tighten_and_simplify, tighten_bounds, SimplificationStats,
};

use crate::error::{Error, Result};
use crate::interval::{Attribute, AttributeAssignment, Interval};
use crate::simplex::{LpProblem, Row, Sense};

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

/// What a variable stands for. Layers are indexed like [`crate::Network::layers`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRole {
    Input(usize),
    /// Post-activation value of a hidden neuron.
    Neuron {
        layer: usize,
        index: usize,
    },
    /// ReLU phase indicator `z` of a hidden neuron.
    Indicator {
        layer: usize,
        index: usize,
    },
    Output(usize),
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub role: VarRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// Where a constraint came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    InputBox,
    /// `x <= w.x' + b - lb (1 - z)`
    ReluUpperActive,
    /// `x >= w.x' + b`
    ReluLower,
    /// `x <= ub z`
    ReluUpperIndicator,
    /// Always-active neuron: `x = w.x' + b`.
    StableActive,
    /// Always-inactive neuron: `x = 0`.
    StableInactive,
    OutputAffine,
    Query,
    FixAttribute,
    Model,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub origin: Origin,
}

impl LinearConstraint {
    pub fn new(terms: Vec<(VarId, f64)>, relation: Relation, rhs: f64, origin: Origin) -> Self {
        Self {
            terms,
            relation,
            rhs,
            origin,
        }
    }

    pub fn lhs(&self, point: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * point[v]).sum()
    }

    /// Amount by which `point` violates the constraint (0 when satisfied).
    pub fn violation(&self, point: &[f64]) -> f64 {
        let lhs = self.lhs(point);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }

    pub fn coefficient(&self, var: VarId) -> f64 {
        self.terms
            .iter()
            .filter(|&&(v, _)| v == var)
            .map(|&(_, c)| c)
            .sum()
    }
}

/// Stability state of a hidden neuron's encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Full big-M block with an indicator variable.
    Unstable,
    /// Collapsed to `x = w.x' + b`.
    Active,
    /// Collapsed to `x = 0`.
    Inactive,
}

/// Bookkeeping for one hidden neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronBlock {
    pub layer: usize,
    pub index: usize,
    pub post: VarId,
    pub indicator: Option<VarId>,
    /// Pre-activation bounds used as the big-M constants.
    pub bounds: Interval,
    pub phase: Phase,
    /// Indices into [`MilpProblem::constraints`].
    pub rows: Vec<usize>,
    pub(crate) terms: Vec<(VarId, f64)>,
    pub(crate) bias: f64,
}

impl NeuronBlock {
    /// Affine terms over the previous layer's variables.
    pub fn terms(&self) -> &[(VarId, f64)] {
        &self.terms
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout {
    pub inputs: Vec<VarId>,
    /// Input domain, restored for attributes that are freed again.
    pub domain: Vec<(f64, f64)>,
    pub hidden: Vec<Vec<NeuronBlock>>,
    pub outputs: Vec<VarId>,
    pub output_rows: Vec<usize>,
}

impl NetworkLayout {
    pub fn blocks(&self) -> impl Iterator<Item = &NeuronBlock> {
        self.hidden.iter().flatten()
    }

    pub fn hidden_count(&self) -> usize {
        self.hidden.iter().map(Vec::len).sum()
    }

    /// Hidden neurons encoded without an indicator variable.
    pub fn stable_count(&self) -> usize {
        self.blocks().filter(|b| b.phase != Phase::Unstable).count()
    }

    /// Variables feeding layer `layer`: the inputs for layer 0, otherwise
    /// the post-activation variables of layer `layer - 1`.
    pub fn layer_inputs(&self, layer: usize) -> Vec<VarId> {
        if layer == 0 {
            self.inputs.clone()
        } else {
            self.hidden[layer - 1].iter().map(|b| b.post).collect()
        }
    }
}

/// Variables, linear constraints, and optional network bookkeeping.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MilpProblem {
    variables: Vec<Variable>,
    constraints: Vec<LinearConstraint>,
    layout: Option<NetworkLayout>,
}

impl MilpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(
        &mut self,
        kind: VarKind,
        lower: f64,
        upper: f64,
        role: VarRole,
    ) -> Result<VarId> {
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(Error::Solver(format!(
                "invalid variable bounds [{lower}, {upper}]"
            )));
        }
        if kind == VarKind::Binary && (lower < 0.0 || upper > 1.0) {
            return Err(Error::Solver(format!(
                "binary variable bounds [{lower}, {upper}] leave [0, 1]"
            )));
        }
        self.variables.push(Variable {
            kind,
            lower,
            upper,
            role,
        });
        Ok(self.variables.len() - 1)
    }

    pub fn add_constraint(&mut self, constraint: LinearConstraint) -> Result<usize> {
        self.check_constraint(&constraint)?;
        self.constraints.push(constraint);
        Ok(self.constraints.len() - 1)
    }

    fn check_constraint(&self, c: &LinearConstraint) -> Result<()> {
        if !c.rhs.is_finite() {
            return Err(Error::NonFinite("constraint right-hand side".into()));
        }
        if c.terms.iter().all(|&(_, k)| k == 0.0) {
            return Err(Error::Solver(
                "constraint has no nonzero coefficient".into(),
            ));
        }
        for &(v, k) in &c.terms {
            if v >= self.variables.len() {
                return Err(Error::UnknownVariable(v));
            }
            if !k.is_finite() {
                return Err(Error::NonFinite(format!("coefficient of variable {v}")));
            }
        }
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id]
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn layout(&self) -> Option<&NetworkLayout> {
        self.layout.as_ref()
    }

    fn require_layout(&self) -> Result<&NetworkLayout> {
        self.layout
            .as_ref()
            .ok_or_else(|| Error::Solver("problem does not encode a network".into()))
    }

    pub fn set_bounds(&mut self, id: VarId, lower: f64, upper: f64) -> Result<()> {
        let var = self
            .variables
            .get_mut(id)
            .ok_or(Error::UnknownVariable(id))?;
        var.lower = lower;
        var.upper = upper;
        Ok(())
    }

    pub fn binary_ids(&self) -> Vec<VarId> {
        (0..self.variables.len())
            .filter(|&v| self.variables[v].kind == VarKind::Binary)
            .collect()
    }

    pub fn binary_count(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }

    /// Largest bound or constraint violation of `point`.
    pub fn max_violation(&self, point: &[f64]) -> f64 {
        let bounds = self
            .variables
            .iter()
            .zip(point)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0));
        let rows = self.constraints.iter().map(|c| c.violation(point));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    /// True when `point` satisfies every bound and row within `tol` and every
    /// binary is within `tol` of 0 or 1.
    pub fn is_satisfied(&self, point: &[f64], tol: f64) -> bool {
        point.len() == self.variables.len()
            && self.max_violation(point) <= tol
            && self
                .variables
                .iter()
                .zip(point)
                .filter(|(v, _)| v.kind == VarKind::Binary)
                .all(|(_, &x)| (x - x.round()).abs() <= tol)
    }

    /// LP relaxation: binaries become continuous over their bounds.
    pub fn relaxation(&self, objective: &[(VarId, f64)], sense: Sense) -> LpProblem {
        LpProblem {
            lower: self.variables.iter().map(|v| v.lower).collect(),
            upper: self.variables.iter().map(|v| v.upper).collect(),
            binary: self
                .variables
                .iter()
                .map(|v| v.kind == VarKind::Binary)
                .collect(),
            rows: self
                .constraints
                .iter()
                .map(|c| Row {
                    terms: c.terms.clone(),
                    relation: c.relation,
                    rhs: c.rhs,
                })
                .collect(),
            objective: objective.to_vec(),
            sense,
        }
    }

    /// Pins fixed attributes to `[v, v]`; free attributes get their domain back.
    pub fn fix_attributes(&self, assign: &AttributeAssignment) -> Result<MilpProblem> {
        let layout = self.require_layout()?;
        if assign.len() != layout.inputs.len() {
            return Err(Error::Dimension(format!(
                "assignment has {} attributes, problem has {} inputs",
                assign.len(),
                layout.inputs.len()
            )));
        }
        let mut out = self.clone();
        for (i, (&var, &(lb, ub))) in layout.inputs.iter().zip(&layout.domain).enumerate() {
            let (lo, hi) = match assign.get(i) {
                Attribute::Fixed(v) => {
                    if !(lb <= v && v <= ub) {
                        return Err(Error::OutOfDomain {
                            index: i,
                            value: v,
                            lb,
                            ub,
                        });
                    }
                    (v, v)
                }
                Attribute::Free => (lb, ub),
            };
            out.set_bounds(var, lo, hi)?;
        }
        Ok(out)
    }

    /// Adds `o_rival - o_target >= 0`: a feasible point is an input where the
    /// rival scores at least as high as the target.
    pub fn attach_rival_query(&self, target: usize, rival: usize) -> Result<MilpProblem> {
        let layout = self.require_layout()?;
        let classes = layout.outputs.len();
        for idx in [target, rival] {
            if idx >= classes {
                return Err(Error::ClassOutOfRange {
                    index: idx,
                    classes,
                });
            }
        }
        if target == rival {
            return Err(Error::RivalIsTarget(target));
        }
        let (t, r) = (layout.outputs[target], layout.outputs[rival]);
        let mut out = self.clone();
        out.add_constraint(LinearConstraint::new(
            vec![(r, 1.0), (t, -1.0)],
            Relation::Ge,
            0.0,
            Origin::Query,
        ))?;
        Ok(out)
    }

    pub fn var_name(&self, id: VarId) -> String {
        match self.variables[id].role {
            VarRole::Input(i) => format!("x{i}"),
            VarRole::Neuron { layer, index } => format!("h{layer}_{index}"),
            VarRole::Indicator { layer, index } => format!("z{layer}_{index}"),
            VarRole::Output(j) => format!("o{j}"),
            VarRole::Other => format!("v{id}"),
        }
    }

    /// CPLEX LP text with a zero objective, for cross-checking with external solvers.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::from("\\ feasibility problem\nMinimize\n obj: 0\nSubject To\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = write!(out, " c{i}:");
            for &(v, k) in &c.terms {
                let sign = if k < 0.0 { '-' } else { '+' };
                let _ = write!(out, " {sign} {} {}", k.abs(), self.var_name(v));
            }
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Ge => ">=",
                Relation::Eq => "=",
            };
            let _ = writeln!(out, " {rel} {}", c.rhs);
        }
        out.push_str("Bounds\n");
        for (id, v) in self.variables.iter().enumerate() {
            let name = self.var_name(id);
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (true, true) => {
                    let _ = writeln!(out, " {} <= {name} <= {}", v.lower, v.upper);
                }
                (true, false) => {
                    let _ = writeln!(out, " {name} >= {}", v.lower);
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= {name} <= {}", v.upper);
                }
                (false, false) => {
                    let _ = writeln!(out, " {name} free");
                }
            }
        }
        let binaries = self.binary_ids();
        if !binaries.is_empty() {
            out.push_str("Binaries\n");
            for id in binaries {
                let _ = writeln!(out, " {}", self.var_name(id));
            }
        }
        out.push_str("End\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{eq2_problem, fig1};
    use crate::interval::{box_propagate, AttributeAssignment};

    #[test]
    fn rejects_bad_constraints() {
        let mut p = MilpProblem::new();
        let x = p
            .add_variable(VarKind::Continuous, 0.0, 1.0, VarRole::Other)
            .unwrap();
        assert!(p
            .add_constraint(LinearConstraint::new(
                vec![(x, 0.0)],
                Relation::Le,
                1.0,
                Origin::Model
            ))
            .is_err());
        assert!(matches!(
            p.add_constraint(LinearConstraint::new(
                vec![(7, 1.0)],
                Relation::Le,
                1.0,
                Origin::Model
            )),
            Err(Error::UnknownVariable(7))
        ));
        assert!(p
            .add_constraint(LinearConstraint::new(
                vec![(x, 1.0)],
                Relation::Le,
                f64::INFINITY,
                Origin::Model
            ))
            .is_err());
        assert!(p
            .add_variable(VarKind::Binary, 0.0, 2.0, VarRole::Other)
            .is_err());
    }

    #[test]
    fn rival_query_adds_difference_row() {
        let m = fig1();
        let b = box_propagate(&m.network, &AttributeAssignment::all_free(2), &m.domain).unwrap();
        let p = encode_network(&m.network, &m.domain, &b).unwrap();
        let q = p.attach_rival_query(0, 1).unwrap();
        assert_eq!(q.constraints().len(), p.constraints().len() + 1);
        let row = q.constraints().last().unwrap();
        let layout = q.layout().unwrap();
        assert_eq!(row.origin, Origin::Query);
        assert_eq!(row.relation, Relation::Ge);
        assert_eq!(row.rhs, 0.0);
        assert_eq!(row.coefficient(layout.outputs[1]), 1.0);
        assert_eq!(row.coefficient(layout.outputs[0]), -1.0);

        assert!(matches!(
            p.attach_rival_query(1, 1),
            Err(Error::RivalIsTarget(1))
        ));
        assert!(matches!(
            p.attach_rival_query(0, 2),
            Err(Error::ClassOutOfRange { index: 2, .. })
        ));
    }

    #[test]
    fn fix_attributes_sets_input_bounds() {
        let m = fig1();
        let b = box_propagate(&m.network, &AttributeAssignment::all_free(2), &m.domain).unwrap();
        let p = encode_network(&m.network, &m.domain, &b).unwrap();
        let mut a = AttributeAssignment::all_free(2);
        a.fix(0, 0.7);
        let q = p.fix_attributes(&a).unwrap();
        let x = q.layout().unwrap().inputs.clone();
        assert_eq!((q.variable(x[0]).lower, q.variable(x[0]).upper), (0.7, 0.7));
        assert_eq!((q.variable(x[1]).lower, q.variable(x[1]).upper), (0.2, 0.5));

        // freeing everything restores the original problem
        let back = q.fix_attributes(&AttributeAssignment::all_free(2)).unwrap();
        assert_eq!(back, p);
        assert_eq!(
            p.fix_attributes(&AttributeAssignment::all_free(2)).unwrap(),
            p
        );

        let mut bad = AttributeAssignment::all_free(2);
        bad.fix(1, 0.6);
        assert!(matches!(
            p.fix_attributes(&bad),
            Err(Error::OutOfDomain { index: 1, .. })
        ));
    }

    #[test]
    fn eq2_point_checks() {
        let (p, [x, y, z]) = eq2_problem();
        let mut point = vec![0.0; 3];
        point[x] = 1.0;
        point[y] = 1.0;
        point[z] = 1.0;
        assert!(p.is_satisfied(&point, 1e-9));
        point[z] = 0.5;
        assert!(!p.is_satisfied(&point, 1e-9));
    }

    #[test]
    fn lp_format_lists_rows_bounds_and_binaries() {
        let (p, _) = eq2_problem();
        let text = p.to_lp_format();
        assert!(text.starts_with("\\ feasibility problem\nMinimize\n obj: 0\n"));
        assert!(text.contains("Subject To"));
        assert!(text.contains(" 1 <= v0 <= 3"));
        assert!(text.contains("Binaries\n v2\n"));
        assert!(text.ends_with("End\n"));
        assert_eq!(text.matches(" c").count(), p.constraints().len());
    }
}
