//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls into the checker: reachability is solved by dense
//! Gaussian elimination or naive Bellman iteration over plain vectors.

#![allow(dead_code)]

use std::collections::HashMap;
use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmarl_core::agents::{AgentPolicy, TabularPolicy};
use tmarl_core::gcl::{parse_program, GuardedProgram};
use tmarl_core::model::{ActionId, ExplicitMdp, FactoredState, SparseDtmc};

pub mod suite;

/// Sparse rows of a chain as plain `(target, probability)` lists.
pub type Rows = Vec<Vec<(usize, f64)>>;

pub fn dtmc_rows(d: &SparseDtmc<f64>) -> Rows {
    (0..d.num_states()).map(|s| d.row(s).collect()).collect()
}

/// Rows of the chain obtained by fixing one choice per MDP state.
pub fn restrict_rows(m: &ExplicitMdp<f64>, choice: &[usize]) -> Rows {
    (0..m.num_states()).map(|s| m.choice_row(m.choices(s).start + choice[s]).collect()).collect()
}

/// States from which `phi2` is reachable through `phi1` states, by backward search.
fn can_reach(rows: &Rows, phi1: &[bool], phi2: &[bool]) -> Vec<bool> {
    let n = rows.len();
    let mut pred = vec![Vec::new(); n];
    for (s, r) in rows.iter().enumerate() {
        for &(t, p) in r {
            if p > 0.0 {
                pred[t].push(s);
            }
        }
    }
    let mut seen = phi2.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|&s| phi2[s]).collect();
    while let Some(t) = stack.pop() {
        for &s in &pred[t] {
            if !seen[s] && phi1[s] {
                seen[s] = true;
                stack.push(s);
            }
        }
    }
    seen
}

/// Solves `A x = b` in place by elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        assert!(a[piv][c].abs() > 1e-300, "singular system");
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// `P(phi1 U phi2)` per state by a direct dense solve.
pub fn dense_until(rows: &Rows, phi1: &[bool], phi2: &[bool]) -> Vec<f64> {
    let n = rows.len();
    let reach = can_reach(rows, phi1, phi2);
    let unknown: Vec<usize> = (0..n).filter(|&s| reach[s] && !phi2[s]).collect();
    let mut pos = vec![usize::MAX; n];
    for (i, &s) in unknown.iter().enumerate() {
        pos[s] = i;
    }
    let m = unknown.len();
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    for (i, &s) in unknown.iter().enumerate() {
        a[i][i] += 1.0;
        for &(t, p) in &rows[s] {
            if phi2[t] {
                b[i] += p;
            } else if pos[t] != usize::MAX {
                a[i][pos[t]] -= p;
            }
        }
    }
    let x = gauss_solve(a, b);
    (0..n)
        .map(|s| if phi2[s] { 1.0 } else if pos[s] != usize::MAX { x[pos[s]] } else { 0.0 })
        .collect()
}

/// `P(phi1 U<=k phi2)` per state by `k` explicit steps.
pub fn dense_bounded_until(rows: &Rows, phi1: &[bool], phi2: &[bool], k: u64) -> Vec<f64> {
    let n = rows.len();
    let mut x: Vec<f64> = (0..n).map(|s| if phi2[s] { 1.0 } else { 0.0 }).collect();
    for _ in 0..k {
        x = (0..n)
            .map(|s| {
                if phi2[s] {
                    1.0
                } else if phi1[s] {
                    rows[s].iter().map(|&(t, p)| p * x[t]).sum()
                } else {
                    0.0
                }
            })
            .collect();
    }
    x
}

/// Extremal `P(F target)` on an MDP by Bellman iteration from zero, which
/// converges to the least fixed point for both `max` and `min`.
pub fn bellman_reach(m: &ExplicitMdp<f64>, target: &[bool], maximise: bool) -> Vec<f64> {
    let n = m.num_states();
    let mut x: Vec<f64> = (0..n).map(|s| if target[s] { 1.0 } else { 0.0 }).collect();
    for _ in 0..1_000_000 {
        let mut delta = 0.0f64;
        for s in 0..n {
            if target[s] {
                continue;
            }
            let vals = m.choices(s).map(|c| m.choice_row(c).map(|(t, p)| p * x[t]).sum::<f64>());
            let v = if maximise { vals.fold(0.0, f64::max) } else { vals.fold(1.0, f64::min) };
            delta = delta.max((v - x[s]).abs());
            x[s] = v;
        }
        if delta < 1e-15 {
            break;
        }
    }
    x
}

/// Minimum and maximum of `P(F target)` at every state over every
/// deterministic memoryless policy, by exhaustive enumeration.
pub fn enumerate_reach(m: &ExplicitMdp<f64>, target: &[bool]) -> (Vec<f64>, Vec<f64>) {
    let n = m.num_states();
    let counts: Vec<usize> = (0..n).map(|s| m.choices(s).len()).collect();
    let total: usize = counts.iter().product();
    assert!(total <= 1 << 20, "{total} policies is too many to enumerate");
    let yes = vec![true; n];
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut choice = vec![0usize; n];
    for mut code in 0..total {
        for s in 0..n {
            choice[s] = code % counts[s];
            code /= counts[s];
        }
        let v = dense_until(&restrict_rows(m, &choice), &yes, target);
        for s in 0..n {
            lo[s] = lo[s].min(v[s]);
            hi[s] = hi[s].max(v[s]);
        }
    }
    (lo, hi)
}

/// Random program with at most six variables (turn included) and at most 500
/// states in total, so every reachable space fits the dense oracle.
pub fn random_program_source(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agents = rng.random_range(1..=3usize);
    let nvars = rng.random_range(1..=5usize);
    let mut his = Vec::new();
    let mut room = 500 / agents;
    for _ in 0..nvars {
        let cap = room.min(8);
        if cap < 2 {
            break;
        }
        let hi = rng.random_range(1..cap);
        room /= hi + 1;
        his.push(hi as i32);
    }
    let vars: Vec<String> = (0..his.len()).map(|i| format!("v{i}")).collect();
    let cmp = |rng: &mut ChaCha8Rng| {
        let i = rng.random_range(0..his.len());
        let ops = ["=", "!=", "<", "<=", ">", ">="];
        format!("{}{}{}", vars[i], ops[rng.random_range(0..ops.len())], rng.random_range(0..=his[i]))
    };

    let mut s = String::new();
    writeln!(s, "turn : [1..{agents}] init 1;").unwrap();
    for (v, hi) in vars.iter().zip(&his) {
        writeln!(s, "{v} : [0..{hi}] init {};", rng.random_range(0..=*hi)).unwrap();
    }
    let n_actions = rng.random_range(2..=3);
    for a in 0..n_actions {
        for i in 1..=agents {
            let guard = if a == 0 { format!("turn={i}") } else { format!("turn={i} & {}", cmp(&mut rng)) };
            let branches = rng.random_range(1..=3usize);
            // eighths keep the probabilities exact
            let mut weights = vec![1u32; branches];
            for _ in branches..8 {
                weights[rng.random_range(0..branches)] += 1;
            }
            let updates: Vec<String> = weights
                .iter()
                .map(|w| {
                    let mut parts = vec![format!("(turn'={})", rng.random_range(1..=agents))];
                    for (v, hi) in vars.iter().zip(&his) {
                        match rng.random_range(0..4) {
                            0 => parts.push(format!("({v}'={})", rng.random_range(0..=*hi))),
                            1 => parts.push(format!("({v}'=min({v}+1,{hi}))")),
                            2 => parts.push(format!("({v}'=max({v}-1,0))")),
                            _ => {}
                        }
                    }
                    format!("{}:{}", *w as f64 / 8.0, parts.join("&"))
                })
                .collect();
            writeln!(s, "[a{a}] {guard} -> {};", updates.join(" + ")).unwrap();
        }
    }
    writeln!(s, "label \"a\" = {} | {};", cmp(&mut rng), cmp(&mut rng)).unwrap();
    writeln!(s, "label \"b\" = {};", cmp(&mut rng)).unwrap();
    s
}

pub fn random_program(seed: u64) -> GuardedProgram {
    let src = random_program_source(seed);
    parse_program(&src).unwrap_or_else(|e| panic!("generated program does not parse: {e}\n{src}"))
}

/// One tabular policy per agent choosing uniformly among enabled actions at
/// every state of `m`; also returns the chosen choice offset per state.
pub fn random_tabular(
    program: &GuardedProgram,
    m: &ExplicitMdp<f64>,
    agents: usize,
    rng: &mut impl Rng,
) -> (Vec<AgentPolicy<f64>>, Vec<usize>) {
    let turn = program.schema().turn_index();
    let mut tables = vec![HashMap::<FactoredState, ActionId>::new(); agents];
    let mut offsets = Vec::with_capacity(m.num_states());
    for s in 0..m.num_states() {
        let k = rng.random_range(0..m.choices(s).len());
        let st = m.state(s);
        tables[(st[turn] - 1) as usize].insert(st.clone(), m.choice_action(m.choices(s).start + k));
        offsets.push(k);
    }
    let pols = tables
        .into_iter()
        .map(|t| AgentPolicy::Tabular(TabularPolicy::new(program.schema().clone(), program.actions().to_vec(), t)))
        .collect();
    (pols, offsets)
}

pub fn label_bits(program: &GuardedProgram, states: &[FactoredState], label: &str) -> Vec<bool> {
    states.iter().map(|s| program.label_holds(label, s).unwrap()).collect()
}
