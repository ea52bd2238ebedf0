//! Independent checks of a finished explanation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Decision, Entailment, Explainer, Explanation};
use crate::error::{Error, Result};
use crate::interval::Attribute;

/// A sampled completion of the kept attributes that changes the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleViolation {
    pub point: Vec<f64>,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WitnessCheck {
    /// Re-freeing the attribute produced a point whose forward pass has a
    /// rival within tolerance of the target. `gap` is the best rival output
    /// minus the target output.
    Confirmed {
        rival: usize,
        witness: Vec<f64>,
        gap: f64,
    },
    /// The solver returned a point that does not survive the forward pass.
    WitnessFailed { witness: Vec<f64>, gap: f64 },
    /// The remaining attributes entail the prediction without this one.
    Redundant,
    /// Kept after a timeout, or the recheck itself timed out.
    Unverified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimalityCheck {
    pub attribute: usize,
    pub check: WitnessCheck,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub samples: usize,
    pub sample_violations: Vec<SampleViolation>,
    /// Exact sufficiency by the solver; `None` when it timed out.
    pub solver_sufficient: Option<bool>,
    /// One entry per kept attribute.
    pub minimality: Vec<MinimalityCheck>,
}

impl VerificationReport {
    pub fn sufficiency_holds(&self) -> bool {
        self.sample_violations.is_empty() && self.solver_sufficient != Some(false)
    }

    /// Every attribute kept by the solver has a confirmed counterexample.
    pub fn minimality_holds(&self) -> bool {
        self.minimality.iter().all(|m| {
            matches!(
                m.check,
                WitnessCheck::Confirmed { .. } | WitnessCheck::Unverified
            )
        })
    }

    pub fn passed(&self) -> bool {
        self.sufficiency_holds() && self.minimality_holds()
    }

    pub fn unverified(&self) -> Vec<usize> {
        self.minimality
            .iter()
            .filter(|m| m.check == WitnessCheck::Unverified)
            .map(|m| m.attribute)
            .collect()
    }
}

/// Largest rival output minus the target output, and the rival achieving it.
fn rival_gap(outputs: &[f64], target: usize) -> (usize, f64) {
    outputs
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != target)
        .map(|(j, &o)| (j, o - outputs[target]))
        .fold((target, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        })
}

impl Explainer {
    /// Checks `explanation` for `instance`.
    ///
    /// Sufficiency is sampled: `samples` points drawn uniformly over the free
    /// attributes (seeded by `seed`) must all predict the target. It is also
    /// decided exactly by one entailment check. Minimality re-frees each
    /// attribute kept by the solver and pushes the resulting counterexample
    /// through the network; the rival must reach the target output within
    /// `tolerance`.
    pub fn verify(
        &self,
        instance: &[f64],
        explanation: &Explanation,
        samples: usize,
        seed: u64,
        tolerance: f64,
    ) -> Result<VerificationReport> {
        let net = self.network();
        let domain = self.domain();
        if instance.len() != net.input_dim() || explanation.decisions.len() != instance.len() {
            return Err(Error::Dimension(format!(
                "instance has {} values, explanation covers {}, network expects {}",
                instance.len(),
                explanation.decisions.len(),
                net.input_dim()
            )));
        }
        let target = explanation.target;
        let assign = explanation.assignment();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sample_violations = Vec::new();
        let mut point = vec![0.0; instance.len()];
        for _ in 0..samples {
            for (i, p) in point.iter_mut().enumerate() {
                *p = match assign.get(i) {
                    Attribute::Fixed(v) => v,
                    Attribute::Free => {
                        let (lb, ub) = domain.get(i);
                        if lb < ub {
                            rng.gen_range(lb..=ub)
                        } else {
                            lb
                        }
                    }
                };
            }
            let predicted = net.predict(&point)?;
            if predicted != target {
                sample_violations.push(SampleViolation {
                    point: point.clone(),
                    predicted,
                });
            }
        }

        let solver_sufficient = match self.is_entailed(&assign, target)? {
            Entailment::Entailed => Some(true),
            Entailment::NotEntailed { .. } => Some(false),
            Entailment::Unknown => None,
        };

        let mut minimality = Vec::new();
        for &(i, _) in &explanation.kept {
            let check = if explanation.decisions[i] == Decision::KeptByTimeout {
                WitnessCheck::Unverified
            } else {
                let mut relaxed = assign.clone();
                relaxed.free(i);
                match self.is_entailed(&relaxed, target)? {
                    Entailment::Entailed => WitnessCheck::Redundant,
                    Entailment::Unknown => WitnessCheck::Unverified,
                    Entailment::NotEntailed { witness, .. } => {
                        let outputs = net.forward(&witness)?.outputs().to_vec();
                        let (rival, gap) = rival_gap(&outputs, target);
                        let agrees = domain.contains(&witness)
                            && explanation
                                .kept
                                .iter()
                                .all(|&(k, v)| k == i || witness[k] == v);
                        if agrees && gap >= -tolerance {
                            WitnessCheck::Confirmed {
                                rival,
                                witness,
                                gap,
                            }
                        } else {
                            WitnessCheck::WitnessFailed { witness, gap }
                        }
                    }
                }
            };
            minimality.push(MinimalityCheck {
                attribute: i,
                check,
            });
        }

        Ok(VerificationReport {
            samples,
            sample_violations,
            solver_sufficient,
            minimality,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::EngineConfig;
    use crate::fixtures::fig1;

    #[test]
    fn fig1_explanation_verifies() {
        let ex = Explainer::new(fig1(), EngineConfig::default()).unwrap();
        let (e, _) = ex.explain_improved(&[0.7, 0.2]).unwrap();
        let r = ex.verify(&[0.7, 0.2], &e, 1000, 7, 1e-6).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.samples, 1000);
        assert_eq!(r.solver_sufficient, Some(true));
        assert!(matches!(
            r.minimality[0].check,
            WitnessCheck::Confirmed { rival: 1, .. }
        ));
    }

    #[test]
    fn dropping_a_necessary_attribute_is_caught() {
        let ex = Explainer::new(fig1(), EngineConfig::default()).unwrap();
        let (mut e, _) = ex.explain_baseline(&[0.7, 0.2]).unwrap();
        e.kept.clear();
        e.decisions[0] = Decision::RemovedBySolver;
        let r = ex.verify(&[0.7, 0.2], &e, 1000, 1, 1e-6).unwrap();
        assert_eq!(r.solver_sufficient, Some(false));
        assert!(!r.passed());
    }

    #[test]
    fn redundant_attribute_is_flagged() {
        let ex = Explainer::new(fig1(), EngineConfig::default()).unwrap();
        let (mut e, _) = ex.explain_baseline(&[0.7, 0.2]).unwrap();
        e.kept.push((1, 0.2));
        e.decisions[1] = Decision::KeptBySolver;
        let r = ex.verify(&[0.7, 0.2], &e, 10, 1, 1e-6).unwrap();
        assert!(r.sufficiency_holds());
        assert!(!r.minimality_holds());
        assert!(r
            .minimality
            .iter()
            .any(|m| m.attribute == 1 && m.check == WitnessCheck::Redundant));
    }
}
