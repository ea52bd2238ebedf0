//! Subset-minimal abductive explanations for ReLU network classifiers.
//!
//! An explanation of a prediction is a set of input attributes that, held at
//! their values, forces the same class for every completion of the others.
//! [`Explainer`] computes one by freeing attributes one at a time and proving
//! entailment with a mixed-integer encoding of the network.
//!
//! Most of the cost is in those proofs. In [`Mode::Improved`] each check
//! first propagates intervals through the network ([`interval`]); when the
//! target's lower bound beats every rival's upper bound the solver is
//! skipped. Otherwise the interval bounds are intersected with model-wide
//! bounds, which tightens big-M constants and removes indicator variables of
//! neurons whose phase becomes fixed ([`milp::tighten_and_simplify`]).
//!
//! ```
//! use nn_abduce::fixtures::fig1;
//! use nn_abduce::{EngineConfig, Explainer, Mode};
//!
//! let explainer = Explainer::new(fig1(), EngineConfig::default())?;
//! let (e, _) = explainer.explain(&[0.7, 0.2], Mode::Improved)?;
//! assert_eq!(e.kept_indices(), vec![0]);
//! # Ok::<(), nn_abduce::Error>(())
//! ```

pub mod bnb;
pub mod error;
pub mod explain;
pub mod fixtures;
pub mod instances;
pub mod interval;
pub mod milp;
pub mod network;
pub mod report;
pub mod simplex;
pub mod synth;

pub use error::{Error, Result};
pub use explain::{
    AttributeOrder, Decision, EngineConfig, ExplainStats, Explainer, Explanation, Mode,
    TightBoundsMode,
};
pub use network::{Activation, Activations, InputDomain, Layer, Model, Network};
