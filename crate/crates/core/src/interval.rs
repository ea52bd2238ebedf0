//! Interval arithmetic and Box bound propagation.
//!
//! Box treats every neuron input as an independent interval and pushes the
//! input box through each affine map and ReLU. The result over-approximates
//! the reachable values of every neuron. It is cheap, and when the target
//! output's lower bound beats every rival's upper bound it proves the
//! prediction without a solver call.

use std::fmt;

use crate::error::{Error, Result};
use crate::network::{Activation, InputDomain, Network};

/// Closed interval `[lb, ub]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lb: f64,
    pub ub: f64,
}

impl Interval {
    pub fn new(lb: f64, ub: f64) -> Self {
        debug_assert!(lb <= ub, "inverted interval [{lb}, {ub}]");
        Self { lb, ub }
    }

    pub fn point(v: f64) -> Self {
        Self { lb: v, ub: v }
    }

    /// `c * [lb, ub]`; a negative factor swaps the endpoints.
    pub fn scale(self, c: f64) -> Interval {
        if c >= 0.0 {
            Interval {
                lb: c * self.lb,
                ub: c * self.ub,
            }
        } else {
            Interval {
                lb: c * self.ub,
                ub: c * self.lb,
            }
        }
    }

    pub fn relu(self) -> Interval {
        Interval {
            lb: self.lb.max(0.0),
            ub: self.ub.max(0.0),
        }
    }

    pub fn width(self) -> f64 {
        self.ub - self.lb
    }

    pub fn contains(self, v: f64, slack: f64) -> bool {
        self.lb - slack <= v && v <= self.ub + slack
    }

    /// True when `self` lies inside `outer` up to `slack`.
    pub fn within(self, outer: Interval, slack: f64) -> bool {
        outer.lb - slack <= self.lb && self.ub <= outer.ub + slack
    }
}

impl std::ops::Add for Interval {
    type Output = Interval;

    fn add(self, other: Interval) -> Interval {
        Interval {
            lb: self.lb + other.lb,
            ub: self.ub + other.ub,
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lb, self.ub)
    }
}

/// Interval image of `bias + sum_i weights[i] * inputs[i]`.
pub fn affine_bounds(weights: &[f64], bias: f64, inputs: &[Interval]) -> Result<Interval> {
    if weights.len() != inputs.len() {
        return Err(Error::Dimension(format!(
            "{} weights for {} input intervals",
            weights.len(),
            inputs.len()
        )));
    }
    Ok(weights
        .iter()
        .zip(inputs)
        .fold(Interval::point(bias), |acc, (&w, &x)| acc + x.scale(w)))
}

/// Pre- and post-activation intervals of one layer. For the output layer
/// `post == pre`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerBounds {
    pub pre: Vec<Interval>,
    pub post: Vec<Interval>,
}

/// Bounds for every neuron of a network. `layers[l]` belongs to network
/// layer `l + 1`; the last entry is the output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsMap {
    pub input: Vec<Interval>,
    pub layers: Vec<LayerBounds>,
}

impl BoundsMap {
    pub fn outputs(&self) -> &[Interval] {
        &self.layers[self.layers.len() - 1].post
    }

    pub fn hidden(&self) -> &[LayerBounds] {
        &self.layers[..self.layers.len() - 1]
    }

    /// Checks that the map has the layer widths of `net`.
    pub fn check_shape(&self, net: &Network) -> Result<()> {
        let ok =
            self.input.len() == net.input_dim()
                && self.layers.len() == net.depth()
                && self.layers.iter().zip(net.layers()).all(|(b, layer)| {
                    b.pre.len() == layer.width() && b.post.len() == layer.width()
                });
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(
                "bounds map does not match the network layer widths".into(),
            ))
        }
    }

    /// Builds a map from pre-activation intervals, deriving post-activation
    /// intervals by ReLU on hidden layers.
    pub fn from_pre(net: &Network, input: Vec<Interval>, pre: Vec<Vec<Interval>>) -> Self {
        let layers = pre
            .into_iter()
            .zip(net.layers())
            .map(|(pre, layer)| {
                let post = match layer.activation {
                    Activation::Relu => pre.iter().map(|iv| iv.relu()).collect(),
                    Activation::Identity => pre.clone(),
                };
                LayerBounds { pre, post }
            })
            .collect();
        Self { input, layers }
    }
}

/// State of one input attribute during explanation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Attribute {
    Fixed(f64),
    Free,
}

/// Which attributes are pinned to their instance value and which range over
/// the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeAssignment {
    attrs: Vec<Attribute>,
}

impl AttributeAssignment {
    pub fn all_free(n: usize) -> Self {
        Self {
            attrs: vec![Attribute::Free; n],
        }
    }

    pub fn all_fixed(instance: &[f64]) -> Self {
        Self {
            attrs: instance.iter().map(|&v| Attribute::Fixed(v)).collect(),
        }
    }

    pub fn from_attributes(attrs: Vec<Attribute>) -> Self {
        Self { attrs }
    }

    /// Fixes the attributes flagged in `fixed` to their instance values.
    pub fn from_mask(instance: &[f64], fixed: &[bool]) -> Self {
        Self {
            attrs: instance
                .iter()
                .zip(fixed)
                .map(|(&v, &f)| {
                    if f {
                        Attribute::Fixed(v)
                    } else {
                        Attribute::Free
                    }
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.attrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attrs.is_empty()
    }

    pub fn get(&self, i: usize) -> Attribute {
        self.attrs[i]
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attrs
    }

    pub fn free(&mut self, i: usize) {
        self.attrs[i] = Attribute::Free;
    }

    pub fn fix(&mut self, i: usize, v: f64) {
        self.attrs[i] = Attribute::Fixed(v);
    }

    pub fn fixed_count(&self) -> usize {
        self.attrs
            .iter()
            .filter(|a| matches!(a, Attribute::Fixed(_)))
            .count()
    }

    /// Checks length and that every fixed value lies in the domain.
    pub fn check(&self, domain: &InputDomain) -> Result<()> {
        if self.attrs.len() != domain.len() {
            return Err(Error::Dimension(format!(
                "assignment has {} attributes, domain has {}",
                self.attrs.len(),
                domain.len()
            )));
        }
        for (i, a) in self.attrs.iter().enumerate() {
            if let Attribute::Fixed(v) = *a {
                let (lb, ub) = domain.get(i);
                if !(lb <= v && v <= ub) {
                    return Err(Error::OutOfDomain {
                        index: i,
                        value: v,
                        lb,
                        ub,
                    });
                }
            }
        }
        Ok(())
    }

    /// Input box: `[v, v]` for fixed attributes, the domain range otherwise.
    pub fn input_box(&self, domain: &InputDomain) -> Vec<Interval> {
        self.attrs
            .iter()
            .enumerate()
            .map(|(i, a)| match *a {
                Attribute::Fixed(v) => Interval::point(v),
                Attribute::Free => {
                    let (lb, ub) = domain.get(i);
                    Interval::new(lb, ub)
                }
            })
            .collect()
    }
}

/// Box propagation of the assignment's input box through `net`.
pub fn box_propagate(
    net: &Network,
    assign: &AttributeAssignment,
    domain: &InputDomain,
) -> Result<BoundsMap> {
    assign.check(domain)?;
    if domain.len() != net.input_dim() {
        return Err(Error::Dimension(format!(
            "domain has {} attributes, network expects {}",
            domain.len(),
            net.input_dim()
        )));
    }
    let input = assign.input_box(domain);
    let mut layers: Vec<LayerBounds> = Vec::with_capacity(net.depth());
    for layer in net.layers() {
        let prev = layers
            .last()
            .map_or(input.as_slice(), |b| b.post.as_slice());
        let pre = layer
            .weights
            .iter()
            .zip(&layer.biases)
            .map(|(w, &b)| affine_bounds(w, b, prev))
            .collect::<Result<Vec<_>>>()?;
        let post = match layer.activation {
            Activation::Relu => pre.iter().map(|iv| iv.relu()).collect(),
            Activation::Identity => pre.clone(),
        };
        layers.push(LayerBounds { pre, post });
    }
    Ok(BoundsMap { input, layers })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shortcut {
    /// The target output provably dominates every rival; no solver call needed.
    Removable,
    Inconclusive,
}

/// Strict output-layer dominance test: `lb(target) > ub(rival)` for every rival.
pub fn shortcut_check(bounds: &BoundsMap, target: usize) -> Result<Shortcut> {
    let outputs = bounds.outputs();
    if target >= outputs.len() {
        return Err(Error::ClassOutOfRange {
            index: target,
            classes: outputs.len(),
        });
    }
    let lb = outputs[target].lb;
    let dominates = outputs
        .iter()
        .enumerate()
        .all(|(i, iv)| i == target || lb > iv.ub);
    Ok(if dominates {
        Shortcut::Removable
    } else {
        Shortcut::Inconclusive
    })
}
