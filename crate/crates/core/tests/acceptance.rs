//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nn_abduce::bnb::{optimize, oracle_enumerate, solve_feasibility, MilpStatus};
use nn_abduce::explain::{
    compute_tight_bounds, EngineConfig, ExplainStats, Explainer, Explanation, Mode,
    TightBoundsMode, VerificationReport,
};
use nn_abduce::fixtures::{eq2_problem, fig1, fig1_tight_bounds};
use nn_abduce::interval::{box_propagate, shortcut_check, AttributeAssignment, Interval, Shortcut};
use nn_abduce::milp::{
    encode_network, encode_network_raw, tighten_and_simplify, tighten_bounds, Origin, Phase,
};
use nn_abduce::simplex::{solve_lp, LpOutcome, Sense};
use nn_abduce::{AttributeOrder, Decision};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use common::{beale, close, corpus, kuhn, random_lp, vertex_optimum, OracleCheck};

type Outcome = Result<(), String>;

const EXACT: f64 = 1e-9;

fn check(failures: &mut Vec<String>, ok: bool, what: impl FnOnce() -> String) {
    if !ok {
        failures.push(what());
    }
}

fn interval_is(failures: &mut Vec<String>, name: &str, got: Interval, lb: f64, ub: f64) {
    check(
        failures,
        (got.lb - lb).abs() <= EXACT && (got.ub - ub).abs() <= EXACT,
        || format!("{name}: expected [{lb}, {ub}], got {got}"),
    );
}

fn verdict(failures: Vec<String>) -> Outcome {
    if failures.is_empty() {
        Ok(())
    } else {
        Err(failures.join("; "))
    }
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let m = fig1();
    let mut f = Vec::new();
    let b = box_propagate(&m.network, &AttributeAssignment::all_free(2), &m.domain)
        .map_err(|e| e.to_string())?;
    interval_is(&mut f, "x3", b.layers[0].pre[0], 0.2, 1.2);
    interval_is(&mut f, "x4", b.layers[0].pre[1], -0.5, 0.5);
    interval_is(&mut f, "x5", b.layers[0].post[0], 0.2, 1.2);
    interval_is(&mut f, "x6", b.layers[0].post[1], 0.0, 0.5);
    interval_is(&mut f, "x7 box", b.outputs()[0], 0.2, 1.7);
    interval_is(&mut f, "x8 box", b.outputs()[1], -0.3, 1.2);
    let backend = nn_abduce::bnb::BranchAndBound::default();
    let t = compute_tight_bounds(&m.network, &m.domain, TightBoundsMode::Milp, &backend)
        .map_err(|e| e.to_string())?;
    interval_is(&mut f, "x7 tight", t.outputs()[0], 0.2, 1.4);
    interval_is(&mut f, "x8 tight", t.outputs()[1], 0.2, 1.0);
    let elapsed = started.elapsed();
    check(&mut f, elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    });
    verdict(f)
}

fn criterion_2() -> Outcome {
    let m = fig1();
    let mut f = Vec::new();
    let mut a = AttributeAssignment::all_fixed(&[0.7, 0.2]);
    a.free(1);
    let b = box_propagate(&m.network, &a, &m.domain).map_err(|e| e.to_string())?;
    interval_is(&mut f, "x7", b.outputs()[0], 1.1, 1.7);
    interval_is(&mut f, "x8", b.outputs()[1], 0.4, 1.0);
    check(
        &mut f,
        shortcut_check(&b, 0).map_err(|e| e.to_string())? == Shortcut::Removable,
        || "shortcut not Removable".into(),
    );
    // x2 first, so any solver call can only belong to x1.
    let ex = Explainer::new(
        m,
        EngineConfig {
            order: AttributeOrder::Custom(vec![1, 0]),
            ..EngineConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let (e, s) = ex
        .explain_improved(&[0.7, 0.2])
        .map_err(|e| e.to_string())?;
    check(&mut f, e.decisions[1] == Decision::RemovedByBox, || {
        format!("x2 decided {:?}", e.decisions[1])
    });
    check(&mut f, s.box_shortcut_hits == 1, || {
        format!("{} shortcut hits", s.box_shortcut_hits)
    });
    check(&mut f, s.solver_calls == 1, || {
        format!("{} solver calls, x1 alone needs 1", s.solver_calls)
    });
    verdict(f)
}

fn criterion_3() -> Outcome {
    let m = fig1();
    let mut f = Vec::new();
    let mut a = AttributeAssignment::all_fixed(&[0.7, 0.2]);
    a.free(0);
    let boxed = box_propagate(&m.network, &a, &m.domain).map_err(|e| e.to_string())?;
    interval_is(&mut f, "x7 box", boxed.outputs()[0], 0.2, 1.0);
    interval_is(&mut f, "x8 box", boxed.outputs()[1], -0.3, 0.5);
    check(
        &mut f,
        shortcut_check(&boxed, 0).map_err(|e| e.to_string())? == Shortcut::Inconclusive,
        || "shortcut not Inconclusive".into(),
    );

    let tight = fig1_tight_bounds();
    let raw = encode_network_raw(&m.network, &m.domain, &tight).map_err(|e| e.to_string())?;
    let layout = raw.layout().expect("network encoding");
    let x5 = &layout.hidden[0][0];
    let z5 = x5.indicator.expect("raw encoding keeps every indicator");
    let coeff =
        |p: &nn_abduce::milp::MilpProblem, row: usize| -p.constraints()[row].coefficient(z5);
    let upper_row = x5
        .rows
        .iter()
        .copied()
        .find(|&r| raw.constraints()[r].origin == Origin::ReluUpperIndicator)
        .ok_or("no indicator row for x5")?;
    check(
        &mut f,
        (coeff(&raw, upper_row) - 1.2).abs() <= EXACT,
        || format!("x5 <= M z5 starts at M = {}", coeff(&raw, upper_row)),
    );

    let (refined, _) = tighten_bounds(&raw, &tight, &boxed).map_err(|e| e.to_string())?;
    let o2 = refined.layout().expect("layout").outputs[1];
    let v = refined.variable(o2);
    interval_is(
        &mut f,
        "merged x8",
        Interval {
            lb: v.lower,
            ub: v.upper,
        },
        0.2,
        0.5,
    );
    let rx5 = &refined.layout().expect("layout").hidden[0][0];
    let row = rx5
        .rows
        .iter()
        .copied()
        .find(|&r| refined.constraints()[r].origin == Origin::ReluUpperIndicator)
        .ok_or("refinement dropped the x5 indicator row")?;
    check(&mut f, (coeff(&refined, row) - 0.9).abs() <= EXACT, || {
        format!("x5 <= M z5 refined to M = {}", coeff(&refined, row))
    });

    let (simplified, _) = tighten_and_simplify(&raw, &tight, &boxed).map_err(|e| e.to_string())?;
    let sx5 = &simplified.layout().expect("layout").hidden[0][0];
    check(
        &mut f,
        sx5.phase == Phase::Active && sx5.indicator.is_none(),
        || format!("x5 not collapsed: {:?}", sx5.phase),
    );
    verdict(f)
}

fn criterion_4() -> Outcome {
    let mut f = Vec::new();
    let (p, [x, _y, z]) = eq2_problem();
    let y = [(1usize, 1.0)];
    let out = optimize(&p, &y, Sense::Minimize).map_err(|e| e.to_string())?;
    let point = out.point.clone().unwrap_or_default();
    check(
        &mut f,
        matches!(out.status, MilpStatus::Optimal(v) if close(v, 1.0, 1e-6)),
        || format!("optimum {:?}", out.status),
    );
    check(
        &mut f,
        point.len() == 3 && (point[x] - 1.0).abs() <= 1e-6 && (point[z] - 1.0).abs() <= 1e-6,
        || format!("optimal point {point:?}"),
    );
    let truth = oracle_enumerate(&p, Some((&y, Sense::Minimize))).map_err(|e| e.to_string())?;
    check(
        &mut f,
        matches!(truth.status, MilpStatus::Optimal(v) if close(v, 1.0, 1e-6)),
        || format!("oracle {:?}", truth.status),
    );
    verdict(f)
}

struct Run {
    seed: u64,
    instance: usize,
    baseline: (Explanation, ExplainStats, VerificationReport),
    improved: (Explanation, ExplainStats, VerificationReport),
}

struct CorpusResult {
    runs: Vec<Run>,
    queries: usize,
    disagreements: Vec<String>,
    errors: Vec<String>,
    elapsed: Duration,
}

fn run_corpus() -> CorpusResult {
    let started = Instant::now();
    let nets = corpus(200, 5);
    let per_net: Vec<_> = nets
        .par_iter()
        .map(|(seed, model, xs)| {
            let mut oracle = OracleCheck::default();
            let mut runs = Vec::new();
            let mut errors = Vec::new();
            let ex = match Explainer::new(model.clone(), EngineConfig::default()) {
                Ok(ex) => ex,
                Err(e) => return (runs, oracle, vec![format!("net {seed}: {e}")]),
            };
            for (k, x) in xs.iter().enumerate() {
                let mut one = |mode| -> Result<_, String> {
                    let (e, s) = ex
                        .explain_observed(x, mode, &mut oracle)
                        .map_err(|e| format!("net {seed} instance {k} {mode}: {e}"))?;
                    let r = ex
                        .verify(x, &e, 1000, *seed * 31 + k as u64, 1e-6)
                        .map_err(|e| format!("net {seed} instance {k} verify: {e}"))?;
                    Ok((e, s, r))
                };
                match (one(Mode::Baseline), one(Mode::Improved)) {
                    (Ok(baseline), Ok(improved)) => runs.push(Run {
                        seed: *seed,
                        instance: k,
                        baseline,
                        improved,
                    }),
                    (Err(e), _) | (_, Err(e)) => errors.push(e),
                }
            }
            (runs, oracle, errors)
        })
        .collect();
    let mut out = CorpusResult {
        runs: Vec::new(),
        queries: 0,
        disagreements: Vec::new(),
        errors: Vec::new(),
        elapsed: Duration::ZERO,
    };
    for (runs, oracle, errors) in per_net {
        out.runs.extend(runs);
        out.queries += oracle.queries;
        out.disagreements.extend(oracle.disagreements);
        out.errors.extend(errors);
    }
    out.elapsed = started.elapsed();
    out
}

fn criterion_5(c: &CorpusResult) -> Outcome {
    let mut f = Vec::new();
    check(&mut f, c.errors.is_empty(), || c.errors.join(", "));
    check(&mut f, c.disagreements.is_empty(), || {
        format!(
            "{} of {} queries disagree: {}",
            c.disagreements.len(),
            c.queries,
            c.disagreements.join(", ")
        )
    });
    check(&mut f, c.elapsed < Duration::from_secs(300), || {
        format!("corpus took {:?}", c.elapsed)
    });
    check(&mut f, c.runs.len() >= 900, || {
        format!("only {} runs", c.runs.len())
    });
    println!(
        "    {} runs, {} solver queries replayed through the oracle in {:.1?}",
        c.runs.len(),
        c.queries,
        c.elapsed
    );
    verdict(f)
}

fn criterion_6(c: &CorpusResult) -> Outcome {
    let bad: Vec<String> = c
        .runs
        .iter()
        .filter(|r| r.baseline.0.kept != r.improved.0.kept)
        .map(|r| {
            format!(
                "net {} instance {}: {:?} vs {:?}",
                r.seed,
                r.instance,
                r.baseline.0.kept_indices(),
                r.improved.0.kept_indices()
            )
        })
        .collect();
    verdict(bad)
}

fn criterion_7(c: &CorpusResult) -> Outcome {
    let mut bad = Vec::new();
    for r in &c.runs {
        for (mode, (e, _, rep)) in [("baseline", &r.baseline), ("improved", &r.improved)] {
            if rep.samples != 1000 || !rep.sufficiency_holds() {
                bad.push(format!(
                    "net {} instance {} {mode}: {} sampled violations, solver says {:?}",
                    r.seed,
                    r.instance,
                    rep.sample_violations.len(),
                    rep.solver_sufficient
                ));
            }
            let kept_by_solver = e
                .kept
                .iter()
                .filter(|&&(i, _)| e.decisions[i] == Decision::KeptBySolver)
                .count();
            let confirmed = rep
                .minimality
                .iter()
                .filter(|m| matches!(m.check, nn_abduce::explain::WitnessCheck::Confirmed { .. }))
                .count();
            if confirmed != kept_by_solver {
                bad.push(format!(
                    "net {} instance {} {mode}: {confirmed} of {kept_by_solver} kept attributes witnessed: {:?}",
                    r.seed, r.instance, rep.minimality
                ));
            }
        }
    }
    verdict(bad)
}

fn criterion_8(c: &CorpusResult) -> Outcome {
    let mut bad = Vec::new();
    let mut strict = 0;
    for r in &c.runs {
        let (b, o) = (&r.baseline.1, &r.improved.1);
        if o.bin_vars_removed_ours_pct() < o.bin_vars_removed_before_pct() {
            bad.push(format!(
                "net {} instance {}: removed {:.2}% < {:.2}%",
                r.seed,
                r.instance,
                o.bin_vars_removed_ours_pct(),
                o.bin_vars_removed_before_pct()
            ));
        }
        if o.solver_calls > b.solver_calls {
            bad.push(format!(
                "net {} instance {}: {} calls improved vs {} baseline",
                r.seed, r.instance, o.solver_calls, b.solver_calls
            ));
        }
        if o.solver_calls < b.solver_calls && o.box_shortcut_hits > 0 {
            strict += 1;
        }
    }
    let total: ExplainStats = c.runs.iter().map(|r| &r.improved.1).sum();
    if total.bin_vars_removed_ours_pct() < total.bin_vars_removed_before_pct() {
        bad.push("aggregate removal below the tight-bound baseline".into());
    }
    if strict == 0 {
        bad.push("no run saved a solver call through the box shortcut".into());
    }
    println!(
        "    {strict} runs with fewer solver calls; aggregate bounds tightened {:.1}%, indicators removed {:.1}% before vs {:.1}% ours",
        total.bounds_tightened_pct(),
        total.bin_vars_removed_before_pct(),
        total.bin_vars_removed_ours_pct()
    );
    verdict(bad)
}

fn criterion_9() -> Outcome {
    let mut bad = Vec::new();
    let nets = corpus(100, 1);
    for (seed, model, _) in &nets {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED + seed);
        let net = &model.network;
        let backend = nn_abduce::bnb::BranchAndBound::default();
        let tight = compute_tight_bounds(net, &model.domain, TightBoundsMode::Milp, &backend)
            .map_err(|e| e.to_string())?;
        let base = encode_network(net, &model.domain, &tight).map_err(|e| e.to_string())?;
        let x = nn_abduce::synth::random_instance(&mut rng, &model.domain);
        let fixed: Vec<bool> = (0..x.len()).map(|_| rng.gen_bool(0.5)).collect();
        let assign = AttributeAssignment::from_mask(&x, &fixed);
        let target = rng.gen_range(0..net.class_count());
        let rival = (target + rng.gen_range(1..net.class_count())) % net.class_count();
        let boxed = box_propagate(net, &assign, &model.domain).map_err(|e| e.to_string())?;
        let (simple, _) = tighten_and_simplify(&base, &tight, &boxed).map_err(|e| e.to_string())?;
        let status = |p: &nn_abduce::milp::MilpProblem| -> Result<MilpStatus, String> {
            let q = p
                .fix_attributes(&assign)
                .and_then(|p| p.attach_rival_query(target, rival))
                .map_err(|e| e.to_string())?;
            Ok(solve_feasibility(&q).map_err(|e| e.to_string())?.status)
        };
        let (a, b) = (status(&base)?, status(&simple)?);
        if a != b {
            bad.push(format!(
                "net {seed}: {a:?} without simplification, {b:?} with"
            ));
        }
    }
    verdict(bad)
}

fn criterion_10() -> Outcome {
    let mut bad = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut feasible = 0;
    for trial in 0..500 {
        let p = random_lp(&mut rng);
        let got = solve_lp(&p).map_err(|e| e.to_string())?;
        match (got, vertex_optimum(&p)) {
            (LpOutcome::Optimal { value, .. }, Some(truth)) => {
                feasible += 1;
                if !close(value, truth, 1e-6) {
                    bad.push(format!("trial {trial}: simplex {value}, vertices {truth}"));
                }
            }
            (LpOutcome::Infeasible, None) => {}
            (other, truth) => bad.push(format!(
                "trial {trial}: simplex {other:?}, vertices {truth:?}"
            )),
        }
    }
    if feasible < 250 {
        bad.push(format!("only {feasible} feasible trials"));
    }
    for (name, p, want) in [("Beale", beale(), -0.05), ("Kuhn", kuhn(), -2.0)] {
        match solve_lp(&p).map_err(|e| e.to_string())? {
            LpOutcome::Optimal { value, .. } if close(value, want, 1e-6) => {}
            other => bad.push(format!("{name}: {other:?}")),
        }
    }
    verdict(bad)
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut run = |n: usize, name: &'static str, f: &dyn Fn() -> Outcome| {
        let outcome = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>())));
        let line = match &outcome {
            Ok(()) => format!("criterion {n:>2} PASS  {name}"),
            Err(why) => format!("criterion {n:>2} FAIL  {name}: {why}"),
        };
        println!("{line}");
        results.push((n, name, outcome));
    };
    run(1, "two-neuron model box and tight bounds", &criterion_1);
    run(2, "freeing x2 hits the box shortcut", &criterion_2);
    run(3, "freeing x1 merges bounds and refines big-M", &criterion_3);
    run(4, "MILP optimum with oracle agreement", &criterion_4);
    let corpus = run_corpus();
    run(5, "solver agrees with enumeration oracle", &|| {
        criterion_5(&corpus)
    });
    run(6, "baseline and improved explanations coincide", &|| {
        criterion_6(&corpus)
    });
    run(7, "explanations are sufficient and minimal", &|| {
        criterion_7(&corpus)
    });
    run(8, "simplification metrics move the right way", &|| {
        criterion_8(&corpus)
    });
    run(9, "simplification preserves satisfiability", &criterion_9);
    run(10, "simplex matches vertex enumeration", &criterion_10);

    let failed: Vec<_> = results
        .iter()
        .filter(|r| r.2.is_err())
        .map(|r| r.0)
        .collect();
    println!(
        "\n{} of {} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
