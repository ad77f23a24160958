//! Monte-Carlo execution of a joint policy, used as a statistical cross-check
//! of checked probabilities.
//!
//! Episode `e` of a run seeded with `seed` draws from `ChaCha8Rng` seeded with
//! `seed` on stream `e`, so episodes are independent of scheduling and the
//! estimate is a sum of integer hit counts.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::gcl::{GclError, GuardedProgram};
use crate::joint::{JointError, JointPolicy};
use crate::model::{ActionId, Distribution, FactoredState};
use crate::pctl::{PathFormula, StateFormula};
use crate::scalar::Scalar;

pub const DEFAULT_HORIZON: usize = 10_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("not supported by the simulator: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Program(#[from] GclError),
    #[error(transparent)]
    Joint(#[from] JointError),
}

/// Draws one outcome; the last entry absorbs rounding slack.
pub fn sample<'a, S, T: Scalar, R: Rng + ?Sized>(dist: &'a Distribution<S, T>, rng: &mut R) -> &'a S {
    let entries = dist.entries();
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    for (s, p) in entries {
        acc += p.as_f64();
        if u < acc {
            return s;
        }
    }
    &entries[entries.len() - 1].0
}

/// Generator for episode `episode` of a run seeded with `seed`.
pub fn episode_rng(seed: u64, episode: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub state: FactoredState,
    pub action: ActionId,
    /// Reward received by the acting agent.
    pub reward: f64,
    pub next: FactoredState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    pub initial: FactoredState,
    pub steps: Vec<Step>,
    /// The episode reached a state whose only option is the terminal self-loop.
    pub terminal: bool,
    /// Whether each label held somewhere along the trace.
    pub label_hits: BTreeMap<String, bool>,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Visited states, initial state first.
    pub fn states(&self) -> impl Iterator<Item = &FactoredState> {
        std::iter::once(&self.initial).chain(self.steps.iter().map(|s| &s.next))
    }

    pub fn last(&self) -> &FactoredState {
        self.steps.last().map_or(&self.initial, |s| &s.next)
    }
}

struct Runner<'a, T> {
    program: &'a GuardedProgram,
    jp: &'a JointPolicy<T>,
    reward_idx: Vec<Option<usize>>,
    turn: usize,
}

enum Next {
    Absorbing,
    Moved(ActionId, f64, FactoredState),
}

impl<'a, T: Scalar> Runner<'a, T> {
    fn new(program: &'a GuardedProgram, jp: &'a JointPolicy<T>) -> Self {
        let reward_idx = (1..=jp.agents().len())
            .map(|i| {
                program
                    .reward_index(&format!("agent_{i}"))
                    .or(if program.reward_structures().is_empty() { None } else { Some(0) })
            })
            .collect();
        Runner { program, jp, reward_idx, turn: program.schema().turn_index() }
    }

    fn step<R: Rng>(&self, s: &FactoredState, rng: &mut R) -> Result<Next, SimError> {
        let enabled = self.program.enabled_actions(s)?;
        if enabled == [ActionId::SELF_LOOP] {
            return Ok(Next::Absorbing);
        }
        let (a, _) = self.jp.select_enabled(s, &enabled)?;
        let dist = self.program.successors::<f64>(s, a)?;
        let next = sample(&dist, rng).clone();
        let agent = s[self.turn] as usize - 1;
        let reward = match self.reward_idx[agent] {
            Some(idx) => self.program.reward(idx, a, s, &next)?,
            None => 0.0,
        };
        Ok(Next::Moved(a, reward, next))
    }
}

/// Runs one episode for at most `horizon` steps, applying the builder's
/// disabled-action fallback.
pub fn run_episode<T: Scalar>(
    program: &GuardedProgram,
    jp: &JointPolicy<T>,
    seed: u64,
    episode: u64,
    horizon: usize,
) -> Result<EpisodeTrace, SimError> {
    assert!(horizon >= 1, "horizon must be positive");
    let runner = Runner::new(program, jp);
    let mut rng = episode_rng(seed, episode);
    let names: Vec<String> = program.label_names().map(String::from).collect();
    let mut hits = vec![false; names.len()];
    let mut mark = |s: &FactoredState| -> Result<(), SimError> {
        for (h, v) in hits.iter_mut().zip(program.eval_labels(s)?) {
            *h |= v;
        }
        Ok(())
    };
    let initial = program.initial_state();
    mark(&initial)?;
    let mut steps = Vec::new();
    let mut s = initial.clone();
    let mut terminal = false;
    loop {
        match runner.step(&s, &mut rng)? {
            Next::Absorbing => {
                terminal = true;
                break;
            }
            Next::Moved(action, reward, next) => {
                if steps.len() == horizon {
                    break;
                }
                mark(&next)?;
                steps.push(Step { state: s, action, reward, next: next.clone() });
                s = next;
            }
        }
    }
    Ok(EpisodeTrace { initial, steps, terminal, label_hits: names.into_iter().zip(hits).collect() })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
    pub episodes: usize,
    /// Episodes cut off by the horizon before deciding the property; these
    /// count as unsatisfied, so the estimate is biased downward when nonzero.
    pub truncated: usize,
}

impl Estimate {
    fn from_counts(hits: usize, truncated: usize, episodes: usize) -> Self {
        let p = hits as f64 / episodes as f64;
        Estimate { estimate: p, stderr: (p * (1.0 - p) / episodes as f64).sqrt(), episodes, truncated }
    }
}

/// Fraction of episodes in which `label` holds at some visited state.
pub fn estimate_reachability<T: Scalar>(
    program: &GuardedProgram,
    jp: &JointPolicy<T>,
    label: &str,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<Estimate, SimError> {
    estimate_path(program, jp, &PathFormula::finally(PathFormula::state(StateFormula::atom(label))), episodes, horizon, seed)
}

/// Fraction of episodes whose trace satisfies `path`. Finished episodes end in
/// an absorbing state, so the trace is read as a lasso looping on its last
/// state. `F` targets stop an episode as soon as they are hit.
pub fn estimate_path<T: Scalar>(
    program: &GuardedProgram,
    jp: &JointPolicy<T>,
    path: &PathFormula,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<Estimate, SimError> {
    assert!(episodes >= 1 && horizon >= 1, "episodes and horizon must be positive");
    validate_path(program, path)?;
    let runner = Runner::new(program, jp);
    let reach_target = match path {
        PathFormula::Until(a, b) if matches!(**a, PathFormula::State(StateFormula::True)) => b.as_state(),
        _ => None,
    };
    let outcomes: Vec<(bool, bool)> = (0..episodes as u64)
        .into_par_iter()
        .map(|e| -> Result<(bool, bool), SimError> {
            let mut rng = episode_rng(seed, e);
            let mut s = program.initial_state();
            let mut trace = vec![s.clone()];
            let mut steps = 0;
            loop {
                if let Some(target) = reach_target {
                    if eval_state(program, target, &s)? {
                        return Ok((true, false));
                    }
                }
                match runner.step(&s, &mut rng)? {
                    Next::Absorbing => break,
                    Next::Moved(_, _, next) => {
                        if steps == horizon {
                            return Ok((false, true));
                        }
                        steps += 1;
                        s = next;
                        if reach_target.is_none() {
                            trace.push(s.clone());
                        }
                    }
                }
            }
            if reach_target.is_some() {
                return Ok((false, false));
            }
            Ok((satisfies(program, path, &trace)?[0], false))
        })
        .collect::<Result<_, _>>()?;
    let hits = outcomes.iter().filter(|o| o.0).count();
    let truncated = outcomes.iter().filter(|o| o.1).count();
    Ok(Estimate::from_counts(hits, truncated, episodes))
}

fn validate_path(program: &GuardedProgram, path: &PathFormula) -> Result<(), SimError> {
    match path {
        PathFormula::State(f) | PathFormula::Next(f) | PathFormula::Globally(f) => validate_state(program, f),
        PathFormula::Until(a, b) | PathFormula::BoundedUntil(a, b, _) => {
            validate_path(program, a)?;
            validate_path(program, b)
        }
    }
}

fn validate_state(program: &GuardedProgram, f: &StateFormula) -> Result<(), SimError> {
    if let Some(l) = f.labels().into_iter().find(|l| program.label_expr(l).is_none()) {
        return Err(SimError::UnknownLabel(l.into()));
    }
    if let Some(x) = f.features().into_iter().find(|x| program.schema().index_of(x).is_none()) {
        return Err(SimError::UnknownFeature(x.into()));
    }
    Ok(())
}

/// Truth of a probability-free state formula at `s`.
pub fn eval_state(program: &GuardedProgram, f: &StateFormula, s: &FactoredState) -> Result<bool, SimError> {
    Ok(match f {
        StateFormula::True => true,
        StateFormula::Atom(l) => {
            program.label_holds(l, s).map_err(|_| SimError::UnknownLabel(l.clone()))?
        }
        StateFormula::Comparison { feature, op, value } => {
            let i = program.schema().index_of(feature).ok_or_else(|| SimError::UnknownFeature(feature.clone()))?;
            op.holds(i64::from(s[i]), *value)
        }
        StateFormula::And(a, b) => eval_state(program, a, s)? && eval_state(program, b, s)?,
        StateFormula::Not(a) => !eval_state(program, a, s)?,
        StateFormula::Prob { .. } => {
            return Err(SimError::Unsupported("probability operators inside a simulated path".into()))
        }
    })
}

/// Truth of `path` at every position of a trace whose last state repeats forever.
pub fn satisfies(program: &GuardedProgram, path: &PathFormula, trace: &[FactoredState]) -> Result<Vec<bool>, SimError> {
    let n = trace.len();
    let at = |f: &StateFormula| -> Result<Vec<bool>, SimError> { trace.iter().map(|s| eval_state(program, f, s)).collect() };
    Ok(match path {
        PathFormula::State(f) => at(f)?,
        PathFormula::Next(f) => {
            let v = at(f)?;
            (0..n).map(|i| v[(i + 1).min(n - 1)]).collect()
        }
        PathFormula::Globally(f) => {
            let v = at(f)?;
            let mut out = vec![false; n];
            let mut all = true;
            for i in (0..n).rev() {
                all &= v[i];
                out[i] = all;
            }
            out
        }
        PathFormula::Until(a, b) => {
            let (va, vb) = (satisfies(program, a, trace)?, satisfies(program, b, trace)?);
            let mut out = vec![false; n];
            // on the absorbing tail `a U b` holds iff `b` does
            let mut next = vb[n - 1];
            for i in (0..n).rev() {
                out[i] = vb[i] || (va[i] && next);
                next = out[i];
            }
            out
        }
        PathFormula::BoundedUntil(a, b, bound) => {
            let (va, vb) = (satisfies(program, a, trace)?, satisfies(program, b, trace)?);
            let k = if bound.strict { bound.steps.saturating_sub(1) } else { bound.steps };
            let k = usize::try_from(k).unwrap_or(usize::MAX);
            (0..n)
                .map(|i| {
                    for j in 0..=k {
                        let p = i.saturating_add(j).min(n - 1);
                        if vb[p] {
                            return true;
                        }
                        if !va[p] || p == n - 1 {
                            return false;
                        }
                    }
                    false
                })
                .collect()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{AgentPolicy, Rule, ScriptedPolicy};
    use crate::gcl::parse_program;

    const GAMBLER: &str = "turn : [1..1] init 1; s : [0..2] init 1;\n\
        [bet] s=1 -> 0.5:(s'=0) + 0.5:(s'=2);\n[rest] s!=1 -> true;\n\
        label \"s2\" = s=2; label \"start\" = s=1; label \"never\" = s>2;";

    fn jp(p: &GuardedProgram, action: &str) -> JointPolicy<f64> {
        let pol = AgentPolicy::Scripted(ScriptedPolicy::new(p, vec![Rule::new("true", action)]).unwrap());
        JointPolicy::new(p, vec![pol]).unwrap()
    }

    #[test]
    fn sampling_respects_weights() {
        let d: Distribution<u8, f64> = Distribution::new(vec![(0, 0.25), (1, 0.75)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ones = (0..10_000).filter(|_| *sample(&d, &mut rng) == 1).count();
        assert!((ones as f64 / 1e4 - 0.75).abs() < 3.0 * (0.1875f64 / 1e4).sqrt());
    }

    #[test]
    fn trivial_labels() {
        let p = parse_program(GAMBLER).unwrap();
        let j = jp(&p, "bet");
        let e = estimate_reachability(&p, &j, "start", 100, 50, 1).unwrap();
        assert_eq!((e.estimate, e.stderr), (1.0, 0.0));
        // `rest` loops forever, so every episode runs into the horizon
        let e = estimate_reachability(&p, &j, "never", 100, 50, 1).unwrap();
        assert_eq!((e.estimate, e.truncated), (0.0, 100));
        assert!(matches!(estimate_reachability(&p, &j, "nope", 1, 1, 1), Err(SimError::UnknownLabel(_))));
    }

    #[test]
    fn gambler_within_three_sigma() {
        let p = parse_program(GAMBLER).unwrap();
        let j = jp(&p, "bet");
        let e = estimate_reachability(&p, &j, "s2", 100_000, 100, 128).unwrap();
        assert!((e.estimate - 0.5).abs() <= 3.0 * e.stderr, "{e:?}");
        assert_eq!(e, estimate_reachability(&p, &j, "s2", 100_000, 100, 128).unwrap());
    }

    #[test]
    fn deterministic_trace_ignores_seed() {
        let src = "turn : [1..1] init 1; x : [0..3] init 0; done : [0..1] init 0;\n\
            [inc] done=0 & x<3 -> (x'=x+1);\n[inc] done=0 & x=3 -> (done'=1);";
        let p = parse_program(src).unwrap();
        let j = jp(&p, "inc");
        let a = run_episode(&p, &j, 1, 0, 100).unwrap();
        let b = run_episode(&p, &j, 99, 7, 100).unwrap();
        assert_eq!(a, b);
        assert!(a.terminal);
        assert_eq!(a.len(), 4);
    }

    #[test]
    fn monitor_on_lasso() {
        let src = "turn : [1..1] init 1; x : [0..3] init 0;\n[a] true -> true;";
        let p = parse_program(src).unwrap();
        let tr: Vec<FactoredState> = [0, 1, 2].iter().map(|&x| FactoredState::from(vec![1, x])).collect();
        let lt = |v| PathFormula::state(StateFormula::cmp("x", crate::pctl::CmpOp::Lt, v));
        let eq = |v| PathFormula::state(StateFormula::cmp("x", crate::pctl::CmpOp::Eq, v));
        assert_eq!(satisfies(&p, &PathFormula::until(lt(2), eq(2)), &tr).unwrap(), vec![true; 3]);
        assert_eq!(satisfies(&p, &PathFormula::until(lt(1), eq(2)), &tr).unwrap(), vec![false, false, true]);
        let g = PathFormula::Globally(StateFormula::cmp("x", crate::pctl::CmpOp::Ge, 1));
        assert_eq!(satisfies(&p, &g, &tr).unwrap(), vec![false, true, true]);
        let x = PathFormula::Next(StateFormula::cmp("x", crate::pctl::CmpOp::Eq, 2));
        assert_eq!(satisfies(&p, &x, &tr).unwrap(), vec![false, true, true]);
        let bu = |k| {
            PathFormula::bounded_until(lt(3), eq(2), crate::pctl::StepBound { strict: false, steps: k })
        };
        assert_eq!(satisfies(&p, &bu(1), &tr).unwrap(), vec![false, true, true]);
        assert_eq!(satisfies(&p, &bu(2), &tr).unwrap(), vec![true, true, true]);
    }
}
