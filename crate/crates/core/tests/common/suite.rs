//! End-to-end checks over the shipped benchmarks. Each returns a one-line
//! summary on success and a description of the first violation otherwise.

use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmarl_core::agents::Mlp;
use tmarl_core::checker::{check_dtmc, check_mdp, SolverOptions};
use tmarl_core::envs::{instantiate, parse_params, Instance, BENCHMARKS};
use tmarl_core::joint::{build_induced_dtmc, build_monolithic_mdp, JointError, JointPolicy};
use tmarl_core::model::{induce_dtmc_monolithic, FactoredState, SparseDtmc};
use tmarl_core::pctl::{parse_property, CmpOp, PathFormula, ProbBound, Quantifier, StateFormula, StepBound};
use tmarl_core::simulate::{estimate_path, DEFAULT_HORIZON};

use super::*;

pub type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

pub fn scripted(name: &str, params: &str) -> Result<(Instance, JointPolicy<f64>), String> {
    let inst = instantiate(name, &parse_params(params).map_err(fail)?).map_err(fail)?;
    let jp = JointPolicy::new(&inst.program, inst.scripted_policies().map_err(fail)?).map_err(fail)?;
    Ok((inst, jp))
}

pub fn smallest(name: &str) -> Result<(Instance, JointPolicy<f64>), String> {
    let b = BENCHMARKS.iter().find(|b| b.name == name).ok_or("no such benchmark")?;
    let inst = b.instantiate(&b.smallest()).map_err(fail)?;
    let jp = JointPolicy::new(&inst.program, inst.scripted_policies().map_err(fail)?).map_err(fail)?;
    Ok((inst, jp))
}

pub fn query(inst: &Instance, label: &str) -> String {
    let (_, q) = inst.benchmark.queries.iter().find(|(l, _)| *l == label).expect("known query");
    q.to_string()
}

fn check(d: &SparseDtmc<f64>, prop: &str) -> Result<Vec<f64>, String> {
    let f = parse_property(prop).map_err(fail)?;
    let r = check_dtmc(d, &f, &SolverOptions::default()).map_err(fail)?;
    ensure!(r.stats.converged, "solver did not converge on {prop}");
    r.probabilities().ok_or_else(|| format!("{prop} is not a P=? query"))
}

// ---------------------------------------------------------------- checker

/// Draws random programs and random tabular joint policies until `instances`
/// of them have a fractional until probability somewhere, comparing every
/// state against the dense solve.
pub fn oracle_sweep(instances: u64) -> Outcome {
    let unbounded = parse_property("P=? [ \"a\" U \"b\" ]").unwrap();
    let bounded = parse_property("P=? [ \"a\" U<=6 \"b\" ]").unwrap();
    let (mut worst, mut fractional, mut seed, mut states) = (0.0f64, 0u64, 0u64, 0usize);
    while fractional < instances {
        seed += 1;
        ensure!(seed < 20 * instances, "generator yields too few nontrivial programs");
        let program = random_program(seed);
        let agents = program.schema().turn_bounds().1 as usize;
        ensure!(program.schema().len() <= 6, "seed {seed}: too many variables");
        let (mdp, _) = build_monolithic_mdp::<f64>(&program, 10_000).map_err(fail)?;
        ensure!(mdp.num_states() <= 500, "seed {seed}: {} states", mdp.num_states());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let (pols, offsets) = random_tabular(&program, &mdp, agents, &mut rng);
        let jp = JointPolicy::new(&program, pols).map_err(fail)?;
        let (dtmc, stats) = build_induced_dtmc::<f64>(&program, &jp, 10_000).map_err(fail)?;
        ensure!(stats.fallbacks == 0, "seed {seed}: tabular policy fell back");

        let rows = restrict_rows(&mdp, &offsets);
        let a = label_bits(&program, mdp.states(), "a");
        let b = label_bits(&program, mdp.states(), "b");
        let exact = dense_until(&rows, &a, &b);
        let steps = dense_bounded_until(&rows, &a, &b, 6);
        let index: HashMap<&FactoredState, usize> = mdp.states().iter().enumerate().map(|(i, s)| (s, i)).collect();

        let got = check_dtmc(&dtmc, &unbounded, &SolverOptions::default()).map_err(fail)?;
        ensure!(got.stats.converged, "seed {seed}: no convergence");
        let got = got.probabilities().unwrap();
        let got_b = check_dtmc(&dtmc, &bounded, &SolverOptions::default()).map_err(fail)?.probabilities().unwrap();
        let mut inner = false;
        for (i, s) in dtmc.states().iter().enumerate() {
            let j = index[s];
            inner |= exact[j] > 0.0 && exact[j] < 1.0;
            let err = (got[i] - exact[j]).abs();
            worst = worst.max(err);
            ensure!(err <= 1e-6, "seed {seed}, state {s}: checker {} vs oracle {}", got[i], exact[j]);
            ensure!((got_b[i] - steps[j]).abs() <= 1e-12, "seed {seed}, bounded, state {s}: {} vs {}", got_b[i], steps[j]);
        }
        fractional += u64::from(inner);
        states += dtmc.num_states();
    }
    Ok(format!("{fractional} nontrivial of {seed} programs, {states} states checked, max |err| {worst:.2e}"))
}

// ---------------------------------------------------------------- joint

/// One query per form: unbounded F, nested until, bounded F.
pub fn restriction_queries(name: &str) -> [String; 3] {
    match name {
        "mabp" => [
            "P=? [ F \"lost_1\" ]".into(),
            "P=? [ (HP_1=1 U turn=2) U \"lost_2\" ]".into(),
            "P=? [ F<=1 turn=2 ]".into(),
        ],
        "tictactoe" => [
            "P=? [ F \"won_2\" ]".into(),
            "P=? [ ((cell_10=0 U cell_10=2) U cell_12=2) U cell_11=2 ]".into(),
            "P=? [ F<=6 \"won_2\" ]".into(),
        ],
        "pokemon" => [
            "P=? [ F \"won_1\" ]".into(),
            "P=? [ (HP_0>2 U HP_1<=3) U \"won_1\" ]".into(),
            "P=? [ F<=4 \"won_1\" ]".into(),
        ],
        "cc" => [
            "P=? [ F \"player1_ko\" ]".into(),
            "P=? [ (!\"player1_ko\" U \"player2_ko\") U \"collision\" ]".into(),
            "P=? [ F<=12 \"collision\" ]".into(),
        ],
        _ => panic!("unknown benchmark {name}"),
    }
}

/// Induced-chain values equal those of the monolithic MDP restricted to the
/// joint policy's choices, at every reachable state.
pub fn restriction_equivalence(name: &str) -> Outcome {
    let (inst, jp) = smallest(name)?;
    let p = &inst.program;
    let (induced, _) = build_induced_dtmc::<f64>(p, &jp, 1_000_000).map_err(fail)?;
    let (mdp, _) = build_monolithic_mdp::<f64>(p, 1_000_000).map_err(fail)?;
    let restricted = induce_dtmc_monolithic(&mdp, |i, s| {
        let en = mdp.enabled_actions(i);
        match en.as_slice() {
            [only] if only.is_self_loop() => *only,
            _ => jp.select_enabled(s, &en).expect("turn in range").0,
        }
    })
    .map_err(fail)?;
    ensure!(
        restricted.num_states() == induced.num_states(),
        "{name}: restricted chain has {} states, induced {}",
        restricted.num_states(),
        induced.num_states()
    );
    let index: HashMap<&FactoredState, usize> = restricted.states().iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut worst = 0.0f64;
    let mut values = Vec::new();
    for q in restriction_queries(name) {
        let a = check(&induced, &q)?;
        let b = check(&restricted, &q)?;
        for (i, s) in induced.states().iter().enumerate() {
            let j = *index.get(s).ok_or_else(|| format!("{name}: induced state {s} missing from restriction"))?;
            worst = worst.max((a[i] - b[j]).abs());
            ensure!((a[i] - b[j]).abs() <= 1e-9, "{name} {q} at {s}: induced {} vs restricted {}", a[i], b[j]);
        }
        values.push(format!("{:.4}", a[induced.initial()]));
    }
    Ok(format!(
        "{name}: |S| {} of {} (MDP), values {}, max |diff| {worst:.1e}",
        induced.num_states(),
        mdp.num_states(),
        values.join("/")
    ))
}

// ---------------------------------------------------------------- sandwich

/// `Pmin − ε ≤ P_π ≤ Pmax + ε` for every label of the instance, with the
/// extremal values cross-checked against Bellman iteration and, on small
/// instances, against enumeration of all deterministic policies.
pub fn sandwich(name: &str, params: &str) -> Outcome {
    let (inst, jp) = scripted(name, params)?;
    let p = &inst.program;
    let (induced, _) = build_induced_dtmc::<f64>(p, &jp, 1_000_000).map_err(fail)?;
    let (mdp, _) = build_monolithic_mdp::<f64>(p, 1_000_000).map_err(fail)?;
    let enumerable = mdp.num_states() <= 8;
    let mut lines = Vec::new();
    for label in p.label_names().map(str::to_string).collect::<Vec<_>>() {
        let val = |q: Quantifier| -> Result<Vec<f64>, String> {
            let f = StateFormula::query(q, PathFormula::finally(PathFormula::state(StateFormula::atom(&label))));
            Ok(check_mdp(&mdp, &f, &SolverOptions::default()).map_err(fail)?.probabilities().unwrap())
        };
        let (max, min) = (val(Quantifier::Max)?, val(Quantifier::Min)?);
        let target = label_bits(p, mdp.states(), &label);
        let (bmax, bmin) = (bellman_reach(&mdp, &target, true), bellman_reach(&mdp, &target, false));
        for s in 0..mdp.num_states() {
            ensure!((max[s] - bmax[s]).abs() <= 1e-6, "{label}: Pmax {} vs Bellman {} at {}", max[s], bmax[s], mdp.state(s));
            ensure!((min[s] - bmin[s]).abs() <= 1e-6, "{label}: Pmin {} vs Bellman {} at {}", min[s], bmin[s], mdp.state(s));
        }
        if enumerable {
            let (lo, hi) = enumerate_reach(&mdp, &target);
            for s in 0..mdp.num_states() {
                ensure!((max[s] - hi[s]).abs() <= 1e-9, "{label}: Pmax {} vs enumeration {}", max[s], hi[s]);
                ensure!((min[s] - lo[s]).abs() <= 1e-9, "{label}: Pmin {} vs enumeration {}", min[s], lo[s]);
            }
        }
        let pi = check(&induced, &format!("P=? [ F \"{label}\" ]"))?[induced.initial()];
        let (lo, hi) = (min[mdp.initial()], max[mdp.initial()]);
        ensure!(lo - 1e-6 <= pi && pi <= hi + 1e-6, "{label}: {pi} outside [{lo}, {hi}]");
        lines.push(format!("{label} {lo:.3}<={pi:.3}<={hi:.3}"));
    }
    let how = if enumerable { "enumeration" } else { "Bellman" };
    Ok(format!("{name}({params}) {} states, {how}-validated: {}", mdp.num_states(), lines.join(", ")))
}

/// Extremal values of random programs with at most 8 states equal the
/// extremes over all deterministic policies.
pub fn extremes_match_enumeration(programs: usize) -> Outcome {
    let (mut seen, mut seed) = (0, 0u64);
    while seen < programs {
        seed += 1;
        ensure!(seed < 10_000, "too few small programs");
        let program = random_program(seed);
        let Ok((mdp, _)) = build_monolithic_mdp::<f64>(&program, 8) else { continue };
        if (0..mdp.num_states()).map(|s| mdp.choices(s).len()).product::<usize>() > 1 << 16 {
            continue;
        }
        seen += 1;
        let target = label_bits(&program, mdp.states(), "b");
        let (lo, hi) = enumerate_reach(&mdp, &target);
        for (q, want) in [(Quantifier::Max, &hi), (Quantifier::Min, &lo)] {
            let f = StateFormula::query(q, PathFormula::finally(PathFormula::state(StateFormula::atom("b"))));
            let got = check_mdp(&mdp, &f, &SolverOptions::default()).map_err(fail)?.probabilities().unwrap();
            for s in 0..mdp.num_states() {
                ensure!((got[s] - want[s]).abs() <= 1e-6, "seed {seed} {q:?} state {s}: {} vs {}", got[s], want[s]);
            }
        }
    }
    Ok(format!("{programs} programs with <=8 states"))
}

// ---------------------------------------------------------------- exact values

pub fn exact_value(name: &str, params: &str, label: &str, want: f64, tol: f64) -> Outcome {
    let t = Instant::now();
    let (inst, jp) = scripted(name, params)?;
    let (d, _) = build_induced_dtmc::<f64>(&inst.program, &jp, 1_000_000).map_err(fail)?;
    let v = check(&d, &query(&inst, label))?[d.initial()];
    let secs = t.elapsed().as_secs_f64();
    ensure!((v - want).abs() <= tol, "{name} {label}: {v} != {want}");
    ensure!(secs <= 60.0, "{name} {label}: {secs:.1}s");
    Ok(format!("{name}({params}) {label} = {v} (|S| {}, |T| {}, {secs:.2}s)", d.num_states(), d.num_transitions()))
}

// ---------------------------------------------------------------- scalability

pub fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}

/// Induced chains of MABP grow linearly in n; the monolithic MDP exhausts
/// the same budget at some n no larger than 30.
pub fn scalability(budget: usize) -> Outcome {
    let ns = [10usize, 25, 50, 100];
    let mut sizes = Vec::new();
    for &n in &ns {
        let (inst, jp) = scripted("mabp", &format!("n={n}"))?;
        let (d, _) = build_induced_dtmc::<f64>(&inst.program, &jp, budget).map_err(fail)?;
        let v = check(&d, "P=? [ F \"lost_1\" ]")?[d.initial()];
        ensure!(v == 0.0, "n={n}: lost_1 = {v}");
        sizes.push(d.num_states() as f64);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let r2 = r_squared(&xs, &sizes);
    ensure!(r2 > 0.99, "induced sizes {sizes:?} fit a line with R² {r2}");
    let mut threshold = None;
    for n in 2..=30 {
        let inst = instantiate("mabp", &parse_params(&format!("n={n}")).unwrap()).map_err(fail)?;
        match build_monolithic_mdp::<f64>(&inst.program, budget) {
            Ok(_) => {}
            Err(JointError::StateBudgetExceeded { explored, .. }) => {
                threshold = Some((n, explored));
                break;
            }
            Err(e) => return Err(e.to_string()),
        }
    }
    let (n, explored) = threshold.ok_or("monolithic MABP fits the budget for every n <= 30")?;
    Ok(format!("induced |S| {sizes:?} (R² {r2:.6}); monolithic exceeds {budget} states at n={n} ({explored} explored)"))
}

// ---------------------------------------------------------------- simulation

pub const SIM_PAIRS: [(&str, &str); 6] = [
    ("pokemon", "won1"),
    ("pokemon", "won2"),
    ("cc", "CC1KO"),
    ("cc", "CC2KO"),
    ("cc", "CC3KO"),
    ("tictactoe", "marking_order"),
];

/// Monte-Carlo estimate within three standard errors of the checked value.
pub fn simulation_agrees(name: &str, label: &str, episodes: usize, seed: u64) -> Outcome {
    let (inst, jp) = smallest(name)?;
    let q = query(&inst, label);
    let (d, _) = build_induced_dtmc::<f64>(&inst.program, &jp, 1_000_000).map_err(fail)?;
    let exact = check(&d, &q)?[d.initial()];
    let f = parse_property(&q).map_err(fail)?;
    let StateFormula::Prob { path, .. } = &f else { return Err(format!("{q} is not a query")) };
    let est = estimate_path(&inst.program, &jp, path, episodes, DEFAULT_HORIZON, seed).map_err(fail)?;
    ensure!(est.truncated == 0, "{name} {label}: {} episodes truncated", est.truncated);
    let dev = (est.estimate - exact).abs();
    ensure!(
        dev <= 3.0 * est.stderr,
        "{name} {label}: estimate {} ± {} vs checked {exact}",
        est.estimate,
        est.stderr
    );
    Ok(format!("{name} {label}: checked {exact:.5}, simulated {:.5} ± {:.5}", est.estimate, est.stderr))
}

// ---------------------------------------------------------------- gradients

/// Sign of every hidden pre-activation for every input, read off prefixes
/// of the network (their last layer is linear).
fn activation_pattern(net: &Mlp<f64>, xs: &[Vec<f64>]) -> Vec<bool> {
    let sizes = net.sizes();
    let mut out = Vec::new();
    for l in 1..sizes.len() - 1 {
        let prefix =
            Mlp::from_parts(sizes[..=l].to_vec(), net.weights()[..l].to_vec(), net.biases()[..l].to_vec()).unwrap();
        for x in xs {
            out.extend(prefix.forward(x).iter().map(|&v| v > 0.0));
        }
    }
    out
}

/// Central differences against backpropagation on `nets` random networks
/// with the given hidden layers, over `samples` parameters per network drawn
/// from every layer. Relative error uses a denominator floor of 1e-6.
/// Differences whose stencil changes the rectifier pattern are skipped and
/// counted; they may make up at most 1% of the sample.
pub fn gradient_check(hidden: &[usize], nets: usize, samples: usize, seed: u64) -> Outcome {
    const H: f64 = 1e-5;
    const FLOOR: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut checked, mut kinks) = (0.0f64, 0usize, 0usize);
    for k in 0..nets {
        let inputs = rng.random_range(3..12usize);
        let outputs = rng.random_range(2..6usize);
        let sizes: Vec<usize> = std::iter::once(inputs).chain(hidden.iter().copied()).chain([outputs]).collect();
        let base = Mlp::<f64>::random(&sizes, &mut rng);
        let biases = base.biases().iter().map(|b| b.iter().map(|_| rng.random_range(-0.1..0.1)).collect()).collect();
        let mut net = Mlp::from_parts(sizes.clone(), base.weights().to_vec(), biases).map_err(fail)?;
        let batch = rng.random_range(1..5usize);
        let xs: Vec<Vec<f64>> = (0..batch).map(|_| (0..inputs).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let acts: Vec<usize> = (0..batch).map(|_| rng.random_range(0..outputs)).collect();
        let ys: Vec<f64> = (0..batch).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, g) = net.loss_and_grad(&xs, &acts, &ys);
        let flat: Vec<f64> =
            g.weights.iter().zip(&g.biases).flat_map(|(w, b)| w.iter().chain(b.iter()).copied()).collect();
        if flat.len() != net.num_params() {
            return Err("gradient layout differs from parameter layout".into());
        }
        // an even share of the sample from every layer, weights and biases alike
        let mut idx = Vec::new();
        let mut offset = 0;
        let per = samples.div_ceil(2 * (sizes.len() - 1));
        for l in 0..sizes.len() - 1 {
            for len in [sizes[l] * sizes[l + 1], sizes[l + 1]] {
                idx.extend((0..per.min(len)).map(|_| offset + rng.random_range(0..len)));
                offset += len;
            }
        }
        for &i in &idx {
            let orig = net.param(i);
            net.set_param(i, orig + H);
            let up = net.loss(&xs, &acts, &ys);
            net.set_param(i, orig - H);
            let down = net.loss(&xs, &acts, &ys);
            net.set_param(i, orig);
            let fd = (up - down) / (2.0 * H);
            let rel = (fd - flat[i]).abs() / fd.abs().max(flat[i].abs()).max(FLOOR);
            if rel > 1e-4 {
                // a difference taken across a rectifier kink is not a derivative
                let here = activation_pattern(&net, &xs);
                net.set_param(i, orig + H);
                let kink = activation_pattern(&net, &xs) != here;
                net.set_param(i, orig - H);
                let kink = kink || activation_pattern(&net, &xs) != here;
                net.set_param(i, orig);
                ensure!(kink, "net {k} {sizes:?} param {i}: backprop {} vs difference {fd} (rel {rel:.2e})", flat[i]);
                kinks += 1;
                continue;
            }
            worst = worst.max(rel);
            checked += 1;
        }
    }
    ensure!(kinks * 100 <= checked, "{kinks} of {checked} differences straddle a kink");
    Ok(format!(
        "{nets} nets with hidden {hidden:?}: {checked} params checked, max rel err {worst:.2e}, {kinks} skipped at kinks"
    ))
}

// ---------------------------------------------------------------- parsers

/// The ten distinct Table 1 queries, written in the ASCII shorthand.
pub const TABLE1_QUERIES: [&str; 10] = [
    "P(F won_1)",
    "P(F won_2)",
    "P(poisons_1=2 U poisons_1<2)",
    "P(healpots_1=1 U healpots_1=0)",
    "P(F lost_1)",
    "P(((cell_10=0 U cell_10=2) U cell_12=2) U cell_11=2)",
    "P(F player1_ko)",
    "P(F player2_ko)",
    "P(F player3_ko)",
    "P(F collision)",
];

const NAMES: [&str; 8] = ["won_1", "goal", "x", "hp1", "cell_10", "lost_2", "a", "player3_ko"];

fn random_state(rng: &mut ChaCha8Rng, depth: u32) -> StateFormula {
    let pick = if depth == 0 { rng.random_range(0..3) } else { rng.random_range(0..6) };
    match pick {
        0 => StateFormula::True,
        1 => StateFormula::atom(NAMES[rng.random_range(0..NAMES.len())]),
        2 => {
            let ops = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];
            StateFormula::cmp(NAMES[rng.random_range(0..NAMES.len())], ops[rng.random_range(0..6)], rng.random_range(-20..100))
        }
        3 => StateFormula::and(random_state(rng, depth - 1), random_state(rng, depth - 1)),
        4 => StateFormula::not(random_state(rng, depth - 1)),
        _ => random_query(rng, depth - 1),
    }
}

fn random_path(rng: &mut ChaCha8Rng, depth: u32) -> PathFormula {
    let pick = if depth == 0 { 0 } else { rng.random_range(0..5) };
    match pick {
        0 => PathFormula::state(random_state(rng, depth.saturating_sub(1))),
        1 => PathFormula::Next(random_state(rng, depth - 1)),
        2 => PathFormula::Globally(random_state(rng, depth - 1)),
        3 => PathFormula::until(random_path(rng, depth - 1), random_path(rng, depth - 1)),
        _ => PathFormula::bounded_until(
            random_path(rng, depth - 1),
            random_path(rng, depth - 1),
            StepBound { strict: rng.random(), steps: rng.random_range(0..1000) },
        ),
    }
}

/// A random probability operator; the path body is at most `depth` deep.
pub fn random_query(rng: &mut ChaCha8Rng, depth: u32) -> StateFormula {
    let quantifier = [Quantifier::Plain, Quantifier::Max, Quantifier::Min][rng.random_range(0..3)];
    let bound = rng.random_bool(0.5).then(|| ProbBound {
        op: [CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge][rng.random_range(0..4)],
        p: if rng.random_bool(0.2) { rng.random_range(0..=1) as f64 } else { rng.random::<f64>() },
    });
    StateFormula::Prob { quantifier, bound, path: Box::new(random_path(rng, depth)) }
}

pub fn random_formula(seed: u64) -> StateFormula {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.random_range(0..4);
    if rng.random_bool(0.2) {
        StateFormula::and(random_query(&mut rng, depth), random_state(&mut rng, depth))
    } else {
        random_query(&mut rng, depth)
    }
}

pub fn pctl_round_trip(count: u64) -> Outcome {
    for seed in 0..count {
        let f = random_formula(seed);
        let text = f.to_string();
        let back = parse_property(&text).map_err(|e| format!("`{text}` does not parse: {e}"))?;
        ensure!(back == f, "`{text}` parses to a different formula: {back:?}");
    }
    Ok(format!("{count} random formulas round-trip"))
}

pub fn table1_queries_parse() -> Outcome {
    for q in TABLE1_QUERIES {
        let f = parse_property(q).map_err(|e| format!("`{q}`: {e}"))?;
        ensure!(f.is_query(), "`{q}` is not a probability query");
    }
    Ok(format!("{} Table 1 queries parse", TABLE1_QUERIES.len()))
}

/// Malformed model sources with the line the error must point at.
pub const MALFORMED: [(&str, &str, usize); 20] = [
    ("missing semicolon", "turn : [1..1] init 1\nx : [0..1] init 0;", 2),
    ("unknown variable in guard", "turn : [1..1] init 1;\n[a] y=1 -> (turn'=1);", 2),
    ("unknown variable in update", "turn : [1..1] init 1;\n[a] true -> (z'=1);", 2),
    ("duplicate variable", "turn : [1..1] init 1;\nx : [0..1] init 0;\nx : [0..2] init 0;", 3),
    ("inverted range", "turn : [1..1] init 1;\nx : [3..1] init 0;", 2),
    ("init outside range", "turn : [1..1] init 1;\nx : [0..1] init 5;", 2),
    ("unclosed bracket", "turn : [1..1] init 1;\n[a true -> (turn'=1);", 2),
    ("missing arrow", "turn : [1..1] init 1;\n[a] true (turn'=1);", 2),
    ("integer guard", "turn : [1..1] init 1;\n[a] 3 -> (turn'=1);", 2),
    ("boolean assigned to integer", "turn : [1..1] init 1;\nx : [0..1] init 0;\n[a] true -> (x'=true);", 3),
    ("unprimed update", "turn : [1..1] init 1;\n[a] true -> (turn=1);", 2),
    ("stray character", "turn : [1..1] init 1;\n[a] true -> (turn'=1) $;", 2),
    ("non-constant bound", "turn : [1..1] init 1;\nx : [0..1] init 0;\ny : [0..x] init 0;", 3),
    ("unterminated label", "turn : [1..1] init 1;\nlabel \"done = true;", 2),
    ("label without expression", "turn : [1..1] init 1;\nlabel \"g\" = ;", 2),
    ("duplicate label", "turn : [1..1] init 1;\nlabel \"g\" = true;\nlabel \"g\" = true;", 3),
    ("unterminated rewards", "turn : [1..1] init 1;\nrewards \"r\" true : 1;", 2),
    ("probability without colon", "turn : [1..1] init 1;\n[a] true -> 0.5 (turn'=1);", 2),
    ("mismatched parenthesis", "turn : [1..1] init 1;\nx : [0..1] init 0;\n[a] (x=0 -> (x'=1);", 3),
    ("constant of wrong type", "const int N = true;\nturn : [1..1] init 1;", 1),
];

pub fn malformed_rejected() -> Outcome {
    for (what, src, line) in MALFORMED {
        match tmarl_core::gcl::parse_program(src) {
            Ok(_) => return Err(format!("{what}: accepted")),
            Err(e) => {
                let (l, _) = e.position().ok_or_else(|| format!("{what}: error without position: {e}"))?;
                ensure!(l == line, "{what}: error at line {l}, expected {line}: {e}");
            }
        }
    }
    Ok(format!("{} malformed models rejected at the right line", MALFORMED.len()))
}

/// Every shipped model file parses.
pub fn shipped_models_parse(dir: &std::path::Path) -> Outcome {
    let mut n = 0;
    for b in BENCHMARKS {
        let path = dir.join(format!("{}.gcl", b.name));
        let src = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        tmarl_core::gcl::parse_program(&src).map_err(|e| format!("{}: {e}", path.display()))?;
        n += 1;
    }
    Ok(format!("{n} shipped models parse"))
}
