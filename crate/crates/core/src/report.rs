//! CSV records for explanation runs, benchmarks, verification and bounds.
//!
//! Floats are written in shortest round-trip form, so reading a report back
//! recovers every numeric field exactly.

use std::io::Write;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{ExplainStats, Explanation, Mode, VerificationReport, WitnessCheck};
use crate::interval::BoundsMap;

/// A CSV row type with a fixed column list.
pub trait CsvRecord: Serialize + DeserializeOwned {
    const HEADER: &'static [&'static str];
}

/// Writes the header, then one line per row. An empty slice yields the
/// header alone.
pub fn write_csv<T: CsvRecord>(out: impl Write, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    let io = |e: csv::Error| Error::Instances(format!("writing CSV: {e}"));
    w.write_record(T::HEADER).map_err(io)?;
    for row in rows {
        w.serialize(row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::Instances(format!("writing CSV: {e}")))
}

pub fn read_csv<T: CsvRecord>(input: impl std::io::Read) -> Result<Vec<T>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(|e| Error::Instances(format!("reading CSV: {e}"))))
        .collect()
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainRow {
    pub instance: usize,
    pub mode: Mode,
    pub predicted: usize,
    /// Space-separated kept attribute indices.
    pub kept: String,
    /// Space-separated decision tags, one per attribute.
    pub decisions: String,
    pub size: usize,
    pub solver_calls: usize,
    pub box_shortcut_hits: usize,
    pub timeouts: usize,
    pub total_time_s: f64,
    pub solver_time_s: f64,
    pub bounds_tightened_pct: f64,
    pub bin_vars_removed_before_pct: f64,
    pub bin_vars_removed_ours_pct: f64,
}

impl CsvRecord for ExplainRow {
    const HEADER: &'static [&'static str] = &[
        "instance",
        "mode",
        "predicted",
        "kept",
        "decisions",
        "size",
        "solver_calls",
        "box_shortcut_hits",
        "timeouts",
        "total_time_s",
        "solver_time_s",
        "bounds_tightened_pct",
        "bin_vars_removed_before_pct",
        "bin_vars_removed_ours_pct",
    ];
}

impl ExplainRow {
    pub fn new(instance: usize, mode: Mode, e: &Explanation, s: &ExplainStats) -> Self {
        Self {
            instance,
            mode,
            predicted: e.target,
            kept: join(e.kept_indices()),
            decisions: join(&e.decisions),
            size: e.len(),
            solver_calls: s.solver_calls,
            box_shortcut_hits: s.box_shortcut_hits,
            timeouts: s.timeouts,
            total_time_s: s.total_time.as_secs_f64(),
            solver_time_s: s.solver_time.as_secs_f64(),
            bounds_tightened_pct: s.bounds_tightened_pct(),
            bin_vars_removed_before_pct: s.bin_vars_removed_before_pct(),
            bin_vars_removed_ours_pct: s.bin_vars_removed_ours_pct(),
        }
    }

    pub fn kept_indices(&self) -> Vec<usize> {
        self.kept
            .split_whitespace()
            .filter_map(|t| t.parse().ok())
            .collect()
    }
}

/// One row of the baseline-versus-improved comparison. The `instance`
/// column is the instance index, or `total` for the aggregate row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance: String,
    pub exp_s_baseline: f64,
    pub exp_s_ours: f64,
    pub solver_s_baseline: f64,
    pub solver_s_ours: f64,
    pub bounds_tightened_pct: f64,
    pub bin_vars_removed_before_pct: f64,
    pub bin_vars_removed_ours_pct: f64,
    pub box_shortcut_hits: usize,
    pub solver_calls_baseline: usize,
    pub solver_calls_ours: usize,
    pub kept_baseline: String,
    pub kept_ours: String,
}

impl CsvRecord for BenchRow {
    const HEADER: &'static [&'static str] = &[
        "instance",
        "exp_s_baseline",
        "exp_s_ours",
        "solver_s_baseline",
        "solver_s_ours",
        "bounds_tightened_pct",
        "bin_vars_removed_before_pct",
        "bin_vars_removed_ours_pct",
        "box_shortcut_hits",
        "solver_calls_baseline",
        "solver_calls_ours",
        "kept_baseline",
        "kept_ours",
    ];
}

impl BenchRow {
    pub fn new(
        instance: String,
        baseline: (&ExplainStats, String),
        ours: (&ExplainStats, String),
    ) -> Self {
        let (b, kept_baseline) = baseline;
        let (o, kept_ours) = ours;
        Self {
            instance,
            exp_s_baseline: b.total_time.as_secs_f64(),
            exp_s_ours: o.total_time.as_secs_f64(),
            solver_s_baseline: b.solver_time.as_secs_f64(),
            solver_s_ours: o.solver_time.as_secs_f64(),
            bounds_tightened_pct: o.bounds_tightened_pct(),
            bin_vars_removed_before_pct: o.bin_vars_removed_before_pct(),
            bin_vars_removed_ours_pct: o.bin_vars_removed_ours_pct(),
            box_shortcut_hits: o.box_shortcut_hits,
            solver_calls_baseline: b.solver_calls,
            solver_calls_ours: o.solver_calls,
            kept_baseline,
            kept_ours,
        }
    }
}

/// Both runs over one instance set, in instance order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub dataset: String,
    pub network: String,
    pub mode: Mode,
    pub runs: Vec<(Explanation, ExplainStats)>,
}

impl RunRecord {
    pub fn aggregate(&self) -> ExplainStats {
        self.runs.iter().map(|(_, s)| s).sum()
    }
}

/// Per-instance bench rows followed by a `total` row; no rows at all for an
/// empty instance set.
pub fn bench_rows(baseline: &RunRecord, ours: &RunRecord) -> Vec<BenchRow> {
    let mut rows: Vec<BenchRow> = baseline
        .runs
        .iter()
        .zip(&ours.runs)
        .enumerate()
        .map(|(i, ((be, bs), (oe, os)))| {
            BenchRow::new(
                i.to_string(),
                (bs, join(be.kept_indices())),
                (os, join(oe.kept_indices())),
            )
        })
        .collect();
    if !rows.is_empty() {
        rows.push(BenchRow::new(
            "total".into(),
            (&baseline.aggregate(), String::new()),
            (&ours.aggregate(), String::new()),
        ));
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub instance: usize,
    pub predicted: usize,
    pub kept: String,
    pub samples: usize,
    pub sample_violations: usize,
    /// `true`, `false` or `unknown`.
    pub solver_sufficient: String,
    pub minimality_confirmed: usize,
    pub minimality_failed: usize,
    pub unverified: String,
    pub passed: bool,
}

impl CsvRecord for VerifyRow {
    const HEADER: &'static [&'static str] = &[
        "instance",
        "predicted",
        "kept",
        "samples",
        "sample_violations",
        "solver_sufficient",
        "minimality_confirmed",
        "minimality_failed",
        "unverified",
        "passed",
    ];
}

impl VerifyRow {
    pub fn new(instance: usize, e: &Explanation, r: &VerificationReport) -> Self {
        let confirmed = r
            .minimality
            .iter()
            .filter(|m| matches!(m.check, WitnessCheck::Confirmed { .. }))
            .count();
        let failed = r
            .minimality
            .iter()
            .filter(|m| {
                matches!(
                    m.check,
                    WitnessCheck::WitnessFailed { .. } | WitnessCheck::Redundant
                )
            })
            .count();
        Self {
            instance,
            predicted: e.target,
            kept: join(e.kept_indices()),
            samples: r.samples,
            sample_violations: r.sample_violations.len(),
            solver_sufficient: match r.solver_sufficient {
                Some(b) => b.to_string(),
                None => "unknown".into(),
            },
            minimality_confirmed: confirmed,
            minimality_failed: failed,
            unverified: join(r.unverified()),
            passed: r.passed(),
        }
    }
}

/// Per-neuron bounds. `layer` counts network layers from 1, the last being
/// the output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub layer: usize,
    pub neuron: usize,
    pub tight_lb: f64,
    pub tight_ub: f64,
    pub box_lb: f64,
    pub box_ub: f64,
}

impl CsvRecord for BoundsRow {
    const HEADER: &'static [&'static str] = &[
        "layer", "neuron", "tight_lb", "tight_ub", "box_lb", "box_ub",
    ];
}

/// One row per neuron, from post-activation intervals or, with `pre`, from
/// pre-activation ones. Both maps must have the same shape.
pub fn bounds_rows(tight: &BoundsMap, boxed: &BoundsMap, pre: bool) -> Vec<BoundsRow> {
    let pick =
        |lb: &crate::interval::LayerBounds| if pre { lb.pre.clone() } else { lb.post.clone() };
    tight
        .layers
        .iter()
        .zip(&boxed.layers)
        .enumerate()
        .flat_map(|(l, (t, b))| {
            pick(t)
                .into_iter()
                .zip(pick(b))
                .enumerate()
                .map(move |(j, (ti, bi))| BoundsRow {
                    layer: l + 1,
                    neuron: j,
                    tight_lb: ti.lb,
                    tight_ub: ti.ub,
                    box_lb: bi.lb,
                    box_ub: bi.ub,
                })
                .collect::<Vec<_>>()
        })
        .collect()
}
