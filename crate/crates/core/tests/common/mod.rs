#![allow(dead_code)]

use nn_abduce::bnb::{oracle_enumerate, MilpOutcome, MilpStatus};
use nn_abduce::explain::QueryObserver;
use nn_abduce::milp::{MilpProblem, Relation};
use nn_abduce::simplex::{LpProblem, Sense};
use nn_abduce::synth::{random_clear_instance, random_model, SynthConfig};
use nn_abduce::Model;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded corpus of small networks, each with up to five instances whose
/// prediction wins by a visible margin.
pub fn corpus(count: u64, instances: usize) -> Vec<(u64, Model, Vec<Vec<f64>>)> {
    let cfg = SynthConfig::default();
    (0..count)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE + seed);
            let model = random_model(&mut rng, &cfg);
            let xs = (0..instances)
                .filter_map(|_| random_clear_instance(&mut rng, &model, 1e-4, 200))
                .collect();
            (seed, model, xs)
        })
        .collect()
}

/// Replays every solver query through brute-force enumeration.
#[derive(Default)]
pub struct OracleCheck {
    pub queries: usize,
    pub disagreements: Vec<String>,
}

impl QueryObserver for OracleCheck {
    fn observe(&mut self, query: &MilpProblem, outcome: &MilpOutcome) {
        self.queries += 1;
        let truth = oracle_enumerate(query, None).expect("corpus stays under the oracle cap");
        let agree = matches!(
            (outcome.status, truth.status),
            (MilpStatus::Sat, MilpStatus::Sat) | (MilpStatus::Unsat, MilpStatus::Unsat)
        );
        if !agree {
            self.disagreements.push(format!(
                "solver {:?} vs oracle {:?} ({} binaries)",
                outcome.status,
                truth.status,
                query.binary_count()
            ));
        }
    }
}

/// Optimum of a bounded LP by enumerating every vertex: each choice of `n`
/// tight constraints (rows or bounds) is solved as a square system and kept
/// when feasible. `None` means infeasible.
pub fn vertex_optimum(p: &LpProblem) -> Option<f64> {
    let n = p.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in &p.rows {
        let mut a = vec![0.0; n];
        for &(v, c) in &row.terms {
            a[v] += c;
        }
        planes.push((a, row.rhs));
    }
    for v in 0..n {
        let mut a = vec![0.0; n];
        a[v] = 1.0;
        planes.push((a.clone(), p.lower[v]));
        planes.push((a, p.upper[v]));
    }
    let feasible = |x: &[f64]| {
        let tol = 1e-9;
        (0..n).all(|v| x[v] >= p.lower[v] - tol && x[v] <= p.upper[v] + tol)
            && p.rows.iter().all(|r| {
                let lhs: f64 = r.terms.iter().map(|&(v, c)| c * x[v]).sum();
                let t = tol * (1.0 + r.rhs.abs());
                match r.relation {
                    Relation::Le => lhs <= r.rhs + t,
                    Relation::Ge => lhs >= r.rhs - t,
                    Relation::Eq => (lhs - r.rhs).abs() <= t,
                }
            })
    };
    let mut best: Option<f64> = None;
    let mut pick = Vec::with_capacity(n);
    combos(planes.len(), n, 0, &mut pick, &mut |idx| {
        if let Some(x) = solve_square(idx.iter().map(|&i| &planes[i]).collect()) {
            if feasible(&x) {
                let obj: f64 = p.objective.iter().map(|&(v, c)| c * x[v]).sum();
                let better = match (best, p.sense) {
                    (None, _) => true,
                    (Some(b), Sense::Maximize) => obj > b,
                    (Some(b), _) => obj < b,
                };
                if better {
                    best = Some(obj);
                }
            }
        }
    });
    best
}

fn combos(m: usize, k: usize, start: usize, pick: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in start..m {
        if m - i < k - pick.len() {
            break;
        }
        pick.push(i);
        combos(m, k, i + 1, pick, f);
        pick.pop();
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_square(planes: Vec<&(Vec<f64>, f64)>) -> Option<Vec<f64>> {
    let n = planes.len();
    let mut a: Vec<Vec<f64>> = planes
        .iter()
        .map(|(row, b)| {
            let mut r = row.clone();
            r.push(*b);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    let (pivot_row, target) = if r < col {
                        let (lo, hi) = a.split_at_mut(col);
                        (&hi[0], &mut lo[r])
                    } else {
                        let (lo, hi) = a.split_at_mut(r);
                        (&lo[col], &mut hi[0])
                    };
                    for (t, p) in target[col..].iter_mut().zip(&pivot_row[col..]) {
                        *t -= f * p;
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

/// Random LP with a bounded box, at most 5 variables and 8 rows. Most rows
/// are built around an interior point so the majority are feasible.
pub fn random_lp(rng: &mut impl Rng) -> LpProblem {
    let n = rng.gen_range(1..=5);
    let m = rng.gen_range(0..=8);
    let sense = if rng.gen_bool(0.5) {
        Sense::Minimize
    } else {
        Sense::Maximize
    };
    let mut p = LpProblem::new(n, sense);
    let mut x0 = Vec::with_capacity(n);
    for v in 0..n {
        let lb: f64 = rng.gen_range(-5.0..=2.0);
        let ub = lb + rng.gen_range(0.0..=6.0);
        p.set_bounds(v, lb, ub);
        x0.push(rng.gen_range(lb..=ub));
    }
    for _ in 0..m {
        let mut terms = Vec::new();
        for v in 0..n {
            let c = (rng.gen_range(-4.0f64..=4.0) * 4.0).round() / 4.0;
            if rng.gen_bool(0.8) && c != 0.0 {
                terms.push((v, c));
            }
        }
        if terms.is_empty() {
            continue;
        }
        let at: f64 = terms.iter().map(|&(v, c)| c * x0[v]).sum();
        let (relation, rhs) = match rng.gen_range(0..10) {
            0 => (Relation::Eq, at),
            1..=5 => (Relation::Le, at + rng.gen_range(0.0..=2.0)),
            6..=8 => (Relation::Ge, at - rng.gen_range(0.0..=2.0)),
            _ => (Relation::Le, at - rng.gen_range(0.0..=3.0)),
        };
        p.add_row(terms, relation, rhs);
    }
    p.objective = (0..n).map(|v| (v, rng.gen_range(-3.0..=3.0))).collect();
    p
}

/// Beale's cycling example: optimum -1/20.
pub fn beale() -> LpProblem {
    let mut p = LpProblem::new(4, Sense::Minimize);
    p.objective = vec![(0, -0.75), (1, 150.0), (2, -0.02), (3, 6.0)];
    p.add_row(
        vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)],
        Relation::Le,
        0.0,
    );
    p.add_row(
        vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)],
        Relation::Le,
        0.0,
    );
    p.add_row(vec![(2, 1.0)], Relation::Le, 1.0);
    p
}

/// Kuhn's cycling example: optimum -2 at x1 = 2, x3 = 2.
pub fn kuhn() -> LpProblem {
    let mut p = LpProblem::new(4, Sense::Minimize);
    p.objective = vec![(0, -2.0), (1, -3.0), (2, 1.0), (3, 12.0)];
    p.add_row(
        vec![(0, -2.0), (1, -9.0), (2, 1.0), (3, 9.0)],
        Relation::Le,
        0.0,
    );
    p.add_row(
        vec![(0, 1.0 / 3.0), (1, 1.0), (2, -1.0 / 3.0), (3, -2.0)],
        Relation::Le,
        0.0,
    );
    p.add_row(
        vec![(0, 2.0), (1, 3.0), (2, -1.0), (3, -12.0)],
        Relation::Le,
        2.0,
    );
    p
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1.0)
}
