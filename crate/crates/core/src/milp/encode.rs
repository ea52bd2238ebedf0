//! Big-M encoding of a ReLU network.
//!
//! For a hidden neuron with pre-activation bounds `[lb, ub]`, post-activation
//! variable `x`, indicator `z` and affine input `a = w.x' + b`:
//!
//! ```text
//! x <= a - lb (1 - z)      x >= a      x <= ub z      z in {0, 1}      x >= 0
//! ```
//!
//! `x >= 0` is carried as the variable's lower bound. Outputs are plain
//! equalities `o = w.x' + b`. A neuron whose bounds already prove its phase
//! (`lb > 0` or `ub <= 0`) collapses to a single equality without `z`.

use super::{
    LinearConstraint, MilpProblem, NetworkLayout, NeuronBlock, Origin, Phase, Relation, VarId,
    VarKind, VarRole,
};
use crate::error::{Error, Result};
use crate::interval::BoundsMap;
use crate::network::{InputDomain, Network};

/// Encodes `net` over `domain` with `bounds` as big-M constants; neurons that
/// are stable under `bounds` are emitted already collapsed.
pub fn encode_network(
    net: &Network,
    domain: &InputDomain,
    bounds: &BoundsMap,
) -> Result<MilpProblem> {
    let raw = encode_network_raw(net, domain, bounds)?;
    Ok(super::simplify_stable(&raw))
}

/// Encodes every hidden neuron with the full big-M block, stable or not.
pub fn encode_network_raw(
    net: &Network,
    domain: &InputDomain,
    bounds: &BoundsMap,
) -> Result<MilpProblem> {
    bounds.check_shape(net)?;
    encode_layers(net, domain, bounds, net.depth() - 1, true)
}

/// Encodes only the hidden layers before `layer` (no outputs), collapsing
/// stable neurons. Used to optimise the pre-activations of `layer`.
pub fn encode_prefix(
    net: &Network,
    domain: &InputDomain,
    bounds: &BoundsMap,
    layer: usize,
) -> Result<MilpProblem> {
    if layer >= net.depth() {
        return Err(Error::Dimension(format!(
            "layer {layer} out of range for depth {}",
            net.depth()
        )));
    }
    if bounds.input.len() != net.input_dim()
        || bounds.layers.len() < layer
        || bounds.layers[..layer]
            .iter()
            .zip(net.layers())
            .any(|(b, l)| b.pre.len() != l.width())
    {
        return Err(Error::Dimension(
            "bounds do not cover the encoded layers".into(),
        ));
    }
    let raw = encode_layers(net, domain, bounds, layer, false)?;
    Ok(super::simplify_stable(&raw))
}

fn encode_layers(
    net: &Network,
    domain: &InputDomain,
    bounds: &BoundsMap,
    hidden_layers: usize,
    with_outputs: bool,
) -> Result<MilpProblem> {
    if domain.len() != net.input_dim() {
        return Err(Error::Dimension(format!(
            "domain has {} attributes, network expects {}",
            domain.len(),
            net.input_dim()
        )));
    }
    let mut p = MilpProblem::new();
    let mut inputs = Vec::with_capacity(net.input_dim());
    for (i, &(lb, ub)) in domain.bounds().iter().enumerate() {
        inputs.push(p.add_variable(VarKind::Continuous, lb, ub, VarRole::Input(i))?);
    }

    let mut hidden = Vec::with_capacity(hidden_layers);
    let mut prev: Vec<VarId> = inputs.clone();
    for (l, layer) in net.layers()[..hidden_layers].iter().enumerate() {
        let mut blocks = Vec::with_capacity(layer.width());
        for j in 0..layer.width() {
            let post = p.add_variable(
                VarKind::Continuous,
                0.0,
                f64::INFINITY,
                VarRole::Neuron { layer: l, index: j },
            )?;
            let z = p.add_variable(
                VarKind::Binary,
                0.0,
                1.0,
                VarRole::Indicator { layer: l, index: j },
            )?;
            blocks.push(NeuronBlock {
                layer: l,
                index: j,
                post,
                indicator: Some(z),
                bounds: bounds.layers[l].pre[j],
                phase: Phase::Unstable,
                rows: Vec::new(),
                terms: affine_terms(&layer.weights[j], &prev),
                bias: layer.biases[j],
            });
        }
        prev = blocks.iter().map(|b| b.post).collect();
        hidden.push(blocks);
    }

    let mut outputs = Vec::new();
    let mut output_rows = Vec::new();
    if with_outputs {
        let out_layer = &net.layers()[net.depth() - 1];
        for j in 0..out_layer.width() {
            let o = p.add_variable(
                VarKind::Continuous,
                f64::NEG_INFINITY,
                f64::INFINITY,
                VarRole::Output(j),
            )?;
            let mut terms = vec![(o, 1.0)];
            terms.extend(
                affine_terms(&out_layer.weights[j], &prev)
                    .into_iter()
                    .map(|(v, w)| (v, -w)),
            );
            output_rows.push(p.add_constraint(LinearConstraint::new(
                terms,
                Relation::Eq,
                out_layer.biases[j],
                Origin::OutputAffine,
            ))?);
            outputs.push(o);
        }
    }

    p.layout = Some(NetworkLayout {
        inputs,
        domain: domain.bounds().to_vec(),
        hidden,
        outputs,
        output_rows,
    });
    Ok(p.rebuild())
}

fn affine_terms(weights: &[f64], prev: &[VarId]) -> Vec<(VarId, f64)> {
    weights
        .iter()
        .zip(prev)
        .filter(|(w, _)| **w != 0.0)
        .map(|(&w, &v)| (v, w))
        .collect()
}

/// Rows of one neuron block under its current phase and bounds.
pub(super) fn block_rows(block: &NeuronBlock) -> Vec<LinearConstraint> {
    let x = block.post;
    let minus_affine = || block.terms.iter().map(|&(v, w)| (v, -w));
    match block.phase {
        Phase::Unstable => {
            let z = block
                .indicator
                .expect("unstable neuron keeps its indicator");
            let (lb, ub) = (block.bounds.lb, block.bounds.ub);
            // x - a - lb z <= b - lb
            let mut upper_active: Vec<_> =
                std::iter::once((x, 1.0)).chain(minus_affine()).collect();
            if lb != 0.0 {
                upper_active.push((z, -lb));
            }
            let lower: Vec<_> = std::iter::once((x, 1.0)).chain(minus_affine()).collect();
            let mut upper_indicator = vec![(x, 1.0)];
            if ub != 0.0 {
                upper_indicator.push((z, -ub));
            }
            vec![
                LinearConstraint::new(
                    upper_active,
                    Relation::Le,
                    block.bias - lb,
                    Origin::ReluUpperActive,
                ),
                LinearConstraint::new(lower, Relation::Ge, block.bias, Origin::ReluLower),
                LinearConstraint::new(
                    upper_indicator,
                    Relation::Le,
                    0.0,
                    Origin::ReluUpperIndicator,
                ),
            ]
        }
        Phase::Active => {
            let terms = std::iter::once((x, 1.0)).chain(minus_affine()).collect();
            vec![LinearConstraint::new(
                terms,
                Relation::Eq,
                block.bias,
                Origin::StableActive,
            )]
        }
        Phase::Inactive => vec![LinearConstraint::new(
            vec![(x, 1.0)],
            Relation::Eq,
            0.0,
            Origin::StableInactive,
        )],
    }
}

impl MilpProblem {
    /// Regenerates every neuron block from its bookkeeping, dropping the
    /// indicators of collapsed neurons and compacting variable ids.
    pub(super) fn rebuild(&self) -> MilpProblem {
        let Some(layout) = &self.layout else {
            return self.clone();
        };

        let mut keep = vec![true; self.variables.len()];
        let mut block_row = vec![false; self.constraints.len()];
        for b in layout.blocks() {
            if b.phase != Phase::Unstable {
                if let Some(z) = b.indicator {
                    keep[z] = false;
                }
            }
            for &r in &b.rows {
                block_row[r] = true;
            }
        }
        let mut remap = vec![usize::MAX; self.variables.len()];
        let mut variables = Vec::with_capacity(self.variables.len());
        for (old, var) in self.variables.iter().enumerate() {
            if keep[old] {
                remap[old] = variables.len();
                variables.push(var.clone());
            }
        }
        let map_terms = |terms: &[(VarId, f64)]| -> Vec<(VarId, f64)> {
            terms
                .iter()
                .map(|&(v, c)| {
                    debug_assert!(keep[v], "dropped variable {v} still referenced");
                    (remap[v], c)
                })
                .collect()
        };

        let mut constraints = Vec::with_capacity(self.constraints.len());
        let mut hidden = Vec::with_capacity(layout.hidden.len());
        for layer in &layout.hidden {
            let mut blocks = Vec::with_capacity(layer.len());
            for b in layer {
                let mut nb = NeuronBlock {
                    post: remap[b.post],
                    indicator: match b.phase {
                        Phase::Unstable => b.indicator.map(|z| remap[z]),
                        _ => None,
                    },
                    terms: map_terms(&b.terms),
                    rows: Vec::new(),
                    ..b.clone()
                };
                for row in block_rows(&nb) {
                    nb.rows.push(constraints.len());
                    constraints.push(row);
                }
                blocks.push(nb);
            }
            hidden.push(blocks);
        }

        let mut row_remap = vec![usize::MAX; self.constraints.len()];
        for (old, c) in self.constraints.iter().enumerate() {
            if !block_row[old] {
                row_remap[old] = constraints.len();
                constraints.push(LinearConstraint {
                    terms: map_terms(&c.terms),
                    ..c.clone()
                });
            }
        }

        MilpProblem {
            variables,
            constraints,
            layout: Some(NetworkLayout {
                inputs: layout.inputs.iter().map(|&v| remap[v]).collect(),
                domain: layout.domain.clone(),
                hidden,
                outputs: layout.outputs.iter().map(|&v| remap[v]).collect(),
                output_rows: layout.output_rows.iter().map(|&r| row_remap[r]).collect(),
            }),
        }
    }
}
