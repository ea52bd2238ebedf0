//! Small hand-checkable models and problems used by tests, docs and the book.

use crate::interval::{BoundsMap, Interval};
use crate::milp::{LinearConstraint, MilpProblem, Origin, Relation, VarId, VarKind, VarRole};
use crate::network::Model;

/// Two inputs, one hidden layer of two ReLUs, two outputs, zero biases.
pub const FIG1_JSON: &str = r#"{
  "input_dim": 2,
  "input_domain": [[0.0, 0.7], [0.2, 0.5]],
  "layers": [
    {"weights": [[1.0, 1.0], [1.0, -1.0]], "biases": [0.0, 0.0], "activation": "relu"},
    {"weights": [[1.0, 1.0], [1.0, -1.0]], "biases": [0.0, 0.0], "activation": "identity"}
  ]
}"#;

pub fn fig1() -> Model {
    Model::from_json(FIG1_JSON).expect("fixture model is valid")
}

/// Exact neuron ranges of [`fig1`] over its whole domain.
pub fn fig1_tight_bounds() -> BoundsMap {
    let m = fig1();
    BoundsMap::from_pre(
        &m.network,
        vec![Interval::new(0.0, 0.7), Interval::new(0.2, 0.5)],
        vec![
            vec![Interval::new(0.2, 1.2), Interval::new(-0.5, 0.5)],
            vec![Interval::new(0.2, 1.4), Interval::new(0.2, 1.0)],
        ],
    )
}

/// `min y s.t. 1 <= x <= 3, 3x - 2 <= y, y <= 3x - 2 - 0.5(1 - z), 0 <= y <= 8z, z binary`.
///
/// Returns the problem and the ids of `x`, `y`, `z`.
pub fn eq2_problem() -> (MilpProblem, [VarId; 3]) {
    let mut p = MilpProblem::new();
    let x = p
        .add_variable(VarKind::Continuous, 1.0, 3.0, VarRole::Other)
        .expect("valid bounds");
    let y = p
        .add_variable(VarKind::Continuous, 0.0, f64::INFINITY, VarRole::Other)
        .expect("valid bounds");
    let z = p
        .add_variable(VarKind::Binary, 0.0, 1.0, VarRole::Other)
        .expect("valid bounds");
    let rows = [
        (vec![(x, 3.0), (y, -1.0)], 2.0),
        (vec![(y, 1.0), (x, -3.0), (z, -0.5)], -2.5),
        (vec![(y, 1.0), (z, -8.0)], 0.0),
    ];
    for (terms, rhs) in rows {
        p.add_constraint(LinearConstraint::new(
            terms,
            Relation::Le,
            rhs,
            Origin::Model,
        ))
        .expect("valid row");
    }
    (p, [x, y, z])
}
