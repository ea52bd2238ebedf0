//! Tight neuron bounds over the whole input domain.

use std::fmt;
use std::str::FromStr;

use crate::bnb::{MilpStatus, SolverBackend};
use crate::error::{Error, Result};
use crate::interval::{box_propagate, AttributeAssignment, BoundsMap, Interval};
use crate::milp::encode_prefix;
use crate::network::{InputDomain, Network};
use crate::simplex::Sense;

/// How the bounds used as big-M constants are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TightBoundsMode {
    /// Exact per-neuron minimum and maximum by MILP optimisation.
    #[default]
    Milp,
    /// Box propagation of the full domain.
    Box,
}

impl FromStr for TightBoundsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "milp" => Ok(Self::Milp),
            "box" => Ok(Self::Box),
            other => Err(Error::Load(format!(
                "unknown tight-bounds mode `{other}` (expected milp or box)"
            ))),
        }
    }
}

impl fmt::Display for TightBoundsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Milp => "milp",
            Self::Box => "box",
        })
    }
}

/// Per-neuron bounds over `domain`.
///
/// In MILP mode layers are processed in order: the pre-activations of layer
/// `l` are minimised and maximised over an encoding of layers `0..l` whose
/// big-M constants are the bounds already computed for those layers. Every
/// result is intersected with the Box interval, which also keeps float noise
/// from leaving the sound over-approximation.
pub fn compute_tight_bounds(
    net: &Network,
    domain: &InputDomain,
    mode: TightBoundsMode,
    backend: &dyn SolverBackend,
) -> Result<BoundsMap> {
    let boxed = box_propagate(net, &AttributeAssignment::all_free(domain.len()), domain)?;
    if mode == TightBoundsMode::Box {
        return Ok(boxed);
    }

    let mut pre: Vec<Vec<Interval>> = Vec::with_capacity(net.depth());
    for (l, layer) in net.layers().iter().enumerate() {
        let partial = BoundsMap::from_pre(net, boxed.input.clone(), pre.clone());
        let prefix = encode_prefix(net, domain, &partial, l)?;
        let inputs = prefix
            .layout()
            .expect("prefix encodings carry a layout")
            .layer_inputs(l);
        let mut row = Vec::with_capacity(layer.width());
        for (j, (weights, &bias)) in layer.weights.iter().zip(&layer.biases).enumerate() {
            let objective: Vec<_> = inputs
                .iter()
                .zip(weights)
                .filter(|(_, &w)| w != 0.0)
                .map(|(&v, &w)| (v, w))
                .collect();
            let hull = boxed.layers[l].pre[j];
            let iv = if objective.is_empty() {
                Interval::point(bias)
            } else {
                let lo = extremum(backend, &prefix, &objective, Sense::Minimize, l, j)?;
                let hi = extremum(backend, &prefix, &objective, Sense::Maximize, l, j)?;
                Interval::new((lo + bias).min(hi + bias), hi + bias)
            };
            let lb = iv.lb.max(hull.lb).min(hull.ub);
            let ub = iv.ub.min(hull.ub).max(lb);
            row.push(Interval { lb, ub });
        }
        pre.push(row);
    }
    Ok(BoundsMap::from_pre(net, boxed.input, pre))
}

fn extremum(
    backend: &dyn SolverBackend,
    problem: &crate::milp::MilpProblem,
    objective: &[(usize, f64)],
    sense: Sense,
    layer: usize,
    neuron: usize,
) -> Result<f64> {
    let outcome = backend.optimize(problem, objective, sense)?;
    match outcome.status {
        MilpStatus::Optimal(v) => Ok(v),
        other => Err(Error::Solver(format!(
            "bound optimisation for layer {layer} neuron {neuron} ended with {other:?}"
        ))),
    }
}
