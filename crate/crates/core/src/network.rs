//! Feedforward ReLU networks, input domains and exact forward evaluation.
//!
//! A [`Network`] is a stack of dense [`Layer`]s. Every hidden layer applies
//! ReLU, the last layer is affine only and has one neuron per class. The
//! predicted class is the argmax of the output vector with ties broken
//! towards the lowest index; softmax is never applied since it preserves the
//! argmax.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// One dense layer: `weights` is `width x prev_width`, row `j` feeding neuron `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Vec<Vec<f64>>, biases: Vec<f64>, activation: Activation) -> Self {
        Self {
            weights,
            biases,
            activation,
        }
    }

    pub fn width(&self) -> usize {
        self.biases.len()
    }

    /// Pre-activation value of neuron `j` for the given previous-layer outputs.
    pub fn affine(&self, j: usize, prev: &[f64]) -> f64 {
        self.weights[j]
            .iter()
            .zip(prev)
            .fold(self.biases[j], |acc, (w, x)| acc + w * x)
    }
}

/// A validated feedforward ReLU network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
}

impl Network {
    /// Builds a network, checking shapes, finiteness and the activation layout.
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Load("input_dim must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::Load("network has no layers".into()));
        }
        let mut prev = input_dim;
        let last = layers.len() - 1;
        for (l, layer) in layers.iter().enumerate() {
            let width = layer.weights.len();
            if width == 0 {
                return Err(Error::Load(format!("layer {l} has no neurons")));
            }
            if layer.biases.len() != width {
                return Err(Error::Dimension(format!(
                    "layer {l}: {} biases for {width} neurons",
                    layer.biases.len()
                )));
            }
            for (j, row) in layer.weights.iter().enumerate() {
                if row.len() != prev {
                    return Err(Error::Dimension(format!(
                        "layer {l}, neuron {j}: {} weights, previous layer has width {prev}",
                        row.len()
                    )));
                }
                if let Some(i) = row.iter().position(|w| !w.is_finite()) {
                    return Err(Error::Load(format!(
                        "layer {l}, neuron {j}: weight {i} is not finite"
                    )));
                }
            }
            if let Some(j) = layer.biases.iter().position(|b| !b.is_finite()) {
                return Err(Error::Load(format!("layer {l}: bias {j} is not finite")));
            }
            let expected = if l == last {
                Activation::Identity
            } else {
                Activation::Relu
            };
            if layer.activation != expected {
                return Err(Error::Load(format!(
                    "layer {l}: activation must be {expected:?}"
                )));
            }
            prev = width;
        }
        if prev < 2 {
            return Err(Error::Load(format!(
                "output layer has {prev} neuron(s), need at least 2 classes"
            )));
        }
        Ok(Self { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn class_count(&self) -> usize {
        self.layers[self.layers.len() - 1].width()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Number of layers including the output layer.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn hidden_layers(&self) -> &[Layer] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn hidden_neuron_count(&self) -> usize {
        self.hidden_layers().iter().map(Layer::width).sum()
    }

    pub fn neuron_count(&self) -> usize {
        self.layers.iter().map(Layer::width).sum()
    }

    /// Width of layer `l`, where layer 0 is the input.
    pub fn width(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.layers[l - 1].width()
        }
    }

    pub fn forward(&self, point: &[f64]) -> Result<Activations> {
        if point.len() != self.input_dim {
            return Err(Error::Dimension(format!(
                "point has {} values, network expects {}",
                point.len(),
                self.input_dim
            )));
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let prev = post.last().map_or(point, Vec::as_slice);
            let z: Vec<f64> = (0..layer.width()).map(|j| layer.affine(j, prev)).collect();
            let a = match layer.activation {
                Activation::Relu => z.iter().map(|v| v.max(0.0)).collect(),
                Activation::Identity => z.clone(),
            };
            pre.push(z);
            post.push(a);
        }
        Ok(Activations { pre, post })
    }

    pub fn predict(&self, point: &[f64]) -> Result<usize> {
        Ok(argmax(self.forward(point)?.outputs()))
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Every neuron value of one forward pass. `pre[l]` / `post[l]` belong to
/// layer `l + 1`; for the output layer `post == pre`.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl Activations {
    pub fn outputs(&self) -> &[f64] {
        self.post.last().expect("network has at least one layer")
    }
}

/// Closed box `[lb_i, ub_i]` for every input attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct InputDomain {
    bounds: Vec<(f64, f64)>,
}

impl InputDomain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(lb, ub)) in bounds.iter().enumerate() {
            if !lb.is_finite() || !ub.is_finite() {
                return Err(Error::Load(format!("input_domain[{i}] is not finite")));
            }
            if lb > ub {
                return Err(Error::Load(format!(
                    "input_domain[{i}]: lower bound {lb} exceeds upper bound {ub}"
                )));
            }
        }
        Ok(Self { bounds })
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn get(&self, i: usize) -> (f64, f64) {
        self.bounds[i]
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.bounds.len()
            && point
                .iter()
                .zip(&self.bounds)
                .all(|(v, &(lb, ub))| lb <= *v && *v <= ub)
    }

    /// Checks that `point` is an instance of this domain.
    pub fn check_instance(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.bounds.len() {
            return Err(Error::Dimension(format!(
                "instance has {} values, domain has {}",
                point.len(),
                self.bounds.len()
            )));
        }
        for (i, (&v, &(lb, ub))) in point.iter().zip(&self.bounds).enumerate() {
            if !(lb <= v && v <= ub) {
                return Err(Error::OutOfDomain {
                    index: i,
                    value: v,
                    lb,
                    ub,
                });
            }
        }
        Ok(())
    }
}

/// A network together with the input domain it was trained on; the unit
/// stored in model JSON files.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub network: Network,
    pub domain: InputDomain,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    input_dim: usize,
    input_domain: Vec<[f64; 2]>,
    layers: Vec<Layer>,
}

impl Model {
    pub fn new(network: Network, domain: InputDomain) -> Result<Self> {
        if domain.len() != network.input_dim() {
            return Err(Error::Dimension(format!(
                "input_domain has {} entries, input_dim is {}",
                domain.len(),
                network.input_dim()
            )));
        }
        Ok(Self { network, domain })
    }

    /// Parses and validates a model JSON document.
    pub fn from_json(document: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(document).map_err(|e| Error::Load(e.to_string()))?;
        let domain = InputDomain::new(doc.input_domain.iter().map(|b| (b[0], b[1])).collect())?;
        let network = Network::new(doc.input_dim, doc.layers)?;
        Self::new(network, domain)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Load(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            input_dim: self.network.input_dim,
            input_domain: self.domain.bounds.iter().map(|&(l, u)| [l, u]).collect(),
            layers: self.network.layers.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model serialization cannot fail")
    }
}
