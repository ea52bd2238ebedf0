//! Bound merging and constraint simplification.
//!
//! Tight bounds hold over the whole input domain; Box bounds hold under the
//! current attribute assignment. Their intersection is valid for the current
//! entailment query, so it can replace the big-M constants, and any neuron
//! whose merged interval proves its phase loses its indicator variable.

use log::warn;

use super::{MilpProblem, Phase};
use crate::error::{Error, Result};
use crate::interval::{BoundsMap, Interval};

/// Slack for deciding that a merged interval is strictly narrower than the
/// tight one, or that the two are disjoint.
const MERGE_EPS: f64 = 1e-9;

/// Counters reported by one simplification pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimplificationStats {
    /// Hidden and output neurons inspected.
    pub neurons_total: usize,
    /// Neurons whose merged interval is strictly narrower than the tight one.
    pub bounds_tightened_count: usize,
    /// Hidden neurons encoded without an indicator after the pass.
    pub binary_removed_count: usize,
    /// Hidden neurons, i.e. indicators of a fully unsimplified encoding.
    pub binary_total: usize,
    /// Merges that produced an empty interval and fell back to the tight bound.
    pub infeasible_merges: usize,
}

/// Intersection of a tight and a box interval. Returns the merged interval
/// and whether it is strictly narrower than `tight`.
///
/// A merge that comes out empty by more than float noise falls back to
/// `tight` and reports no tightening.
pub fn merge_bounds(tight: Interval, boxed: Interval) -> (Interval, bool) {
    let lb = tight.lb.max(boxed.lb);
    let ub = tight.ub.min(boxed.ub);
    if lb > ub + MERGE_EPS {
        warn!("disjoint bounds: tight {tight}, box {boxed}; keeping the tight bound");
        return (tight, false);
    }
    let merged = if lb > ub {
        Interval { lb: ub, ub: lb }
    } else {
        Interval { lb, ub }
    };
    let tightened = merged.lb > tight.lb + MERGE_EPS || merged.ub < tight.ub - MERGE_EPS;
    (merged, tightened)
}

fn check_shapes(problem: &MilpProblem, maps: [&BoundsMap; 2]) -> Result<()> {
    let layout = problem.require_layout()?;
    for map in maps {
        let ok = map.layers.len() == layout.hidden.len() + 1
            && map
                .layers
                .iter()
                .zip(&layout.hidden)
                .all(|(b, blocks)| b.pre.len() == blocks.len())
            && map.outputs().len() == layout.outputs.len();
        if !ok {
            return Err(Error::Dimension(
                "bounds map does not match the encoded network".into(),
            ));
        }
    }
    Ok(())
}

/// Rewrites every big-M constant with the merged bounds and bounds each
/// output variable by its merged interval. Blocks keep their phase.
pub fn tighten_bounds(
    problem: &MilpProblem,
    tight: &BoundsMap,
    boxed: &BoundsMap,
) -> Result<(MilpProblem, SimplificationStats)> {
    check_shapes(problem, [tight, boxed])?;
    let mut out = problem.clone();
    let mut stats = SimplificationStats::default();
    {
        let layout = out.layout.as_mut().expect("checked above");
        for (l, blocks) in layout.hidden.iter_mut().enumerate() {
            for (j, block) in blocks.iter_mut().enumerate() {
                let (merged, tightened) =
                    merge_bounds(tight.layers[l].pre[j], boxed.layers[l].pre[j]);
                stats.neurons_total += 1;
                stats.bounds_tightened_count += usize::from(tightened);
                stats.infeasible_merges +=
                    usize::from(is_disjoint(tight.layers[l].pre[j], boxed.layers[l].pre[j]));
                block.bounds = merged;
            }
        }
    }
    let outputs = out.layout.as_ref().expect("checked above").outputs.clone();
    for (j, &o) in outputs.iter().enumerate() {
        let (merged, tightened) = merge_bounds(tight.outputs()[j], boxed.outputs()[j]);
        stats.neurons_total += 1;
        stats.bounds_tightened_count += usize::from(tightened);
        stats.infeasible_merges += usize::from(is_disjoint(tight.outputs()[j], boxed.outputs()[j]));
        out.set_bounds(o, merged.lb, merged.ub)?;
    }
    let out = out.rebuild();
    let layout = out.layout.as_ref().expect("rebuild keeps the layout");
    stats.binary_total = layout.hidden_count();
    stats.binary_removed_count = layout.stable_count();
    Ok((out, stats))
}

fn is_disjoint(a: Interval, b: Interval) -> bool {
    a.lb.max(b.lb) > a.ub.min(b.ub) + MERGE_EPS
}

/// Collapses every neuron whose bounds prove its phase: `lb > 0` gives the
/// affine equality, `ub <= 0` gives `x = 0`. Either way the indicator goes.
pub fn simplify_stable(problem: &MilpProblem) -> MilpProblem {
    let mut out = problem.clone();
    let Some(layout) = out.layout.as_mut() else {
        return out;
    };
    let mut changed = false;
    for block in layout.hidden.iter_mut().flatten() {
        if block.phase != Phase::Unstable {
            continue;
        }
        if block.bounds.lb > 0.0 {
            block.phase = Phase::Active;
            changed = true;
        } else if block.bounds.ub <= 0.0 {
            block.phase = Phase::Inactive;
            changed = true;
        }
    }
    if changed {
        out.rebuild()
    } else {
        out
    }
}

/// [`tighten_bounds`] followed by [`simplify_stable`].
pub fn tighten_and_simplify(
    problem: &MilpProblem,
    tight: &BoundsMap,
    boxed: &BoundsMap,
) -> Result<(MilpProblem, SimplificationStats)> {
    let (refined, mut stats) = tighten_bounds(problem, tight, boxed)?;
    let simplified = simplify_stable(&refined);
    stats.binary_removed_count = simplified
        .layout
        .as_ref()
        .expect("layout survives simplification")
        .stable_count();
    Ok((simplified, stats))
}
