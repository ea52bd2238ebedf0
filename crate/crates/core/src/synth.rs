//! Seeded random networks and instances for tests and benchmarks.

use std::ops::RangeInclusive;

use rand::Rng;

use crate::network::{argmax, Activation, InputDomain, Layer, Model, Network};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub inputs: RangeInclusive<usize>,
    pub hidden_layers: RangeInclusive<usize>,
    /// Upper limit on hidden neurons across all layers.
    pub max_hidden: usize,
    pub max_width: usize,
    pub classes: RangeInclusive<usize>,
    /// Weights are drawn from `[-weight_scale, weight_scale]`.
    pub weight_scale: f64,
    pub bias_scale: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            inputs: 2..=10,
            hidden_layers: 1..=3,
            max_hidden: 12,
            max_width: 6,
            classes: 2..=3,
            weight_scale: 1.0,
            bias_scale: 0.5,
        }
    }
}

fn dense(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen_range(-scale..=scale)).collect())
        .collect()
}

/// A random fully connected ReLU network with a random box domain.
pub fn random_model(rng: &mut impl Rng, cfg: &SynthConfig) -> Model {
    let n = rng.gen_range(cfg.inputs.clone());
    let classes = rng.gen_range(cfg.classes.clone());
    let depth = rng.gen_range(cfg.hidden_layers.clone()).min(cfg.max_hidden);

    let mut widths = Vec::with_capacity(depth);
    let mut left = cfg.max_hidden;
    for l in 0..depth {
        // leave at least one neuron for each remaining layer
        let cap = (left - (depth - l - 1)).min(cfg.max_width).max(1);
        let w = rng.gen_range(1..=cap);
        widths.push(w);
        left -= w;
    }

    let mut layers = Vec::with_capacity(depth + 1);
    let mut prev = n;
    for &w in &widths {
        layers.push(Layer::new(
            dense(rng, w, prev, cfg.weight_scale),
            (0..w)
                .map(|_| rng.gen_range(-cfg.bias_scale..=cfg.bias_scale))
                .collect(),
            Activation::Relu,
        ));
        prev = w;
    }
    layers.push(Layer::new(
        dense(rng, classes, prev, cfg.weight_scale),
        (0..classes)
            .map(|_| rng.gen_range(-cfg.bias_scale..=cfg.bias_scale))
            .collect(),
        Activation::Identity,
    ));

    let bounds = (0..n)
        .map(|_| {
            let lb: f64 = rng.gen_range(-1.0..=0.0);
            (lb, lb + rng.gen_range(0.5..=2.0))
        })
        .collect();
    let network = Network::new(n, layers).expect("generated shapes are consistent");
    let domain = InputDomain::new(bounds).expect("generated bounds are ordered");
    Model::new(network, domain).expect("generated domain matches the network")
}

/// A uniform point of `domain`.
pub fn random_instance(rng: &mut impl Rng, domain: &InputDomain) -> Vec<f64> {
    domain
        .bounds()
        .iter()
        .map(|&(lb, ub)| if lb < ub { rng.gen_range(lb..=ub) } else { lb })
        .collect()
}

/// A random instance whose winning output beats the runner-up by at least
/// `margin`, or `None` after `attempts` draws.
pub fn random_clear_instance(
    rng: &mut impl Rng,
    model: &Model,
    margin: f64,
    attempts: usize,
) -> Option<Vec<f64>> {
    (0..attempts).find_map(|_| {
        let x = random_instance(rng, &model.domain);
        let act = model.network.forward(&x).ok()?;
        let out = act.outputs();
        let t = argmax(out);
        let clear = out
            .iter()
            .enumerate()
            .all(|(j, &o)| j == t || out[t] - o >= margin);
        clear.then_some(x)
    })
}
