//! Turn-dispatching joint policy and the two model builders: the incremental
//! induced-DTMC builder and the monolithic MDP baseline.

use std::collections::{HashMap, VecDeque};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::agents::{AgentPolicy, PolicyError};
use crate::gcl::{GclError, GuardedProgram};
use crate::model::{ActionId, DtmcBuilder, ExplicitMdp, FactoredState, Labels, MdpBuilder, ModelError, SparseDtmc, StateSet};
use crate::scalar::Scalar;

/// Default cap on explored states.
pub const DEFAULT_BUDGET: usize = 50_000_000;

#[derive(Debug, Error)]
pub enum JointError {
    #[error("turn value {turn} outside the joint policy's agents 1..={agents}")]
    TurnOutOfRange { turn: i32, agents: usize },
    #[error("joint policy does not cover the turn range: {0}")]
    Coverage(String),
    #[error("state budget of {budget} exceeded after exploring {explored} states")]
    StateBudgetExceeded { budget: usize, explored: usize },
    #[error(transparent)]
    Program(#[from] GclError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Agent `i` (0-based) acts whenever the turn feature equals `i + 1`.
#[derive(Clone, Debug)]
pub struct JointPolicy<T> {
    agents: Vec<AgentPolicy<T>>,
    turn: usize,
}

impl<T: Scalar> JointPolicy<T> {
    /// Every policy must match the program's schema and actions, and there must
    /// be exactly one per turn value `1..=n`.
    pub fn new(program: &GuardedProgram, agents: Vec<AgentPolicy<T>>) -> Result<Self, JointError> {
        let (lo, hi) = program.schema().turn_bounds();
        if lo != 1 || hi < 1 || hi as usize != agents.len() {
            return Err(JointError::Coverage(format!("turn ranges over [{lo}..{hi}] but {} policies were given", agents.len())));
        }
        for p in &agents {
            p.check_against(program)?;
        }
        Ok(JointPolicy { agents, turn: program.schema().turn_index() })
    }

    pub fn agents(&self) -> &[AgentPolicy<T>] {
        &self.agents
    }

    pub fn agent_for(&self, s: &FactoredState) -> Result<&AgentPolicy<T>, JointError> {
        let t = s[self.turn];
        if t < 1 || t as usize > self.agents.len() {
            return Err(JointError::TurnOutOfRange { turn: t, agents: self.agents.len() });
        }
        Ok(&self.agents[t as usize - 1])
    }

    /// The acting agent's greedy action, enabled or not.
    pub fn select(&self, s: &FactoredState) -> Result<ActionId, JointError> {
        Ok(self.agent_for(s)?.greedy_action(s))
    }

    /// The acting agent's greedy action if enabled, else its fallback. The flag
    /// reports whether the fallback was used.
    pub fn select_enabled(&self, s: &FactoredState, enabled: &[ActionId]) -> Result<(ActionId, bool), JointError> {
        Ok(self.agent_for(s)?.select_enabled(s, enabled))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BuildStats {
    pub states: usize,
    pub transitions: usize,
    pub policy_queries: usize,
    pub fallbacks: usize,
    pub seconds: f64,
    pub mean_query_seconds: f64,
}

struct Explorer {
    index: HashMap<FactoredState, usize>,
    states: Vec<FactoredState>,
    queue: VecDeque<usize>,
    budget: usize,
}

impl Explorer {
    fn new(init: FactoredState, budget: usize) -> Self {
        let mut e = Explorer { index: HashMap::new(), states: Vec::new(), queue: VecDeque::new(), budget };
        e.index.insert(init.clone(), 0);
        e.states.push(init);
        e.queue.push_back(0);
        e
    }

    fn intern(&mut self, s: &FactoredState) -> Result<usize, JointError> {
        if let Some(&i) = self.index.get(s) {
            return Ok(i);
        }
        if self.states.len() >= self.budget {
            return Err(JointError::StateBudgetExceeded { budget: self.budget, explored: self.states.len() });
        }
        let i = self.states.len();
        self.index.insert(s.clone(), i);
        self.states.push(s.clone());
        self.queue.push_back(i);
        Ok(i)
    }

    fn labels(&self, program: &GuardedProgram) -> Result<Labels, GclError> {
        let n = self.states.len();
        let names: Vec<&str> = program.label_names().collect();
        let mut sets: Vec<StateSet> = vec![StateSet::empty(n); names.len()];
        for (i, s) in self.states.iter().enumerate() {
            for (k, holds) in program.eval_labels(s)?.into_iter().enumerate() {
                if holds {
                    sets[k].insert(i);
                }
            }
        }
        Ok(names.into_iter().map(String::from).zip(sets).collect())
    }
}

fn budget_check(budget: usize) -> Result<(), JointError> {
    if budget == 0 {
        return Err(JointError::StateBudgetExceeded { budget, explored: 0 });
    }
    Ok(())
}

/// Breadth-first expansion of only the policy's choice at each reachable
/// state. States whose only option is the terminal self-loop are not queried.
pub fn build_induced_dtmc<T: Scalar>(
    program: &GuardedProgram,
    jp: &JointPolicy<T>,
    budget: usize,
) -> Result<(SparseDtmc<T>, BuildStats), JointError> {
    budget_check(budget)?;
    let start = Instant::now();
    let mut ex = Explorer::new(program.initial_state(), budget);
    let mut b = DtmcBuilder::new();
    let mut stats = BuildStats::default();
    let mut query_time = 0.0;
    let mut row: Vec<(usize, T)> = Vec::new();
    while let Some(i) = ex.queue.pop_front() {
        let s = ex.states[i].clone();
        let enabled = program.enabled_actions(&s)?;
        let a = if enabled == [ActionId::SELF_LOOP] {
            ActionId::SELF_LOOP
        } else {
            let t0 = Instant::now();
            let (a, fell_back) = jp.select_enabled(&s, &enabled)?;
            query_time += t0.elapsed().as_secs_f64();
            stats.policy_queries += 1;
            if fell_back {
                stats.fallbacks += 1;
                log::debug!(
                    "policy choice {} disabled in {}; using {}",
                    program.action_name(jp.select(&s)?),
                    program.schema().describe(&s),
                    program.action_name(a)
                );
            }
            a
        };
        row.clear();
        for (t, p) in program.successors::<T>(&s, a)?.into_entries() {
            row.push((ex.intern(&t)?, p));
        }
        stats.transitions += row.len();
        b.push_row(a, row.drain(..));
    }
    if stats.fallbacks > 0 {
        log::warn!("{} states used the disabled-action fallback", stats.fallbacks);
    }
    let labels = ex.labels(program)?;
    stats.states = ex.states.len();
    stats.mean_query_seconds = if stats.policy_queries > 0 { query_time / stats.policy_queries as f64 } else { 0.0 };
    let dtmc = b.finish(program.schema().clone(), program.actions().to_vec(), ex.states, 0, labels)?;
    stats.seconds = start.elapsed().as_secs_f64();
    Ok((dtmc, stats))
}

/// Breadth-first expansion of every enabled action at every reachable state.
pub fn build_monolithic_mdp<T: Scalar>(program: &GuardedProgram, budget: usize) -> Result<(ExplicitMdp<T>, BuildStats), JointError> {
    budget_check(budget)?;
    let start = Instant::now();
    let mut ex = Explorer::new(program.initial_state(), budget);
    let mut b = MdpBuilder::new();
    let mut stats = BuildStats::default();
    let mut row: Vec<(usize, T)> = Vec::new();
    while let Some(i) = ex.queue.pop_front() {
        let s = ex.states[i].clone();
        for (a, dist) in program.transitions::<T>(&s)? {
            row.clear();
            for (t, p) in dist.into_entries() {
                row.push((ex.intern(&t)?, p));
            }
            stats.transitions += row.len();
            b.push_choice(a, row.drain(..));
        }
        b.end_state();
    }
    let labels = ex.labels(program)?;
    stats.states = ex.states.len();
    let mdp = b.finish(program.schema().clone(), program.actions().to_vec(), ex.states, 0, labels)?;
    stats.seconds = start.elapsed().as_secs_f64();
    Ok((mdp, stats))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingProfile {
    pub samples: usize,
    pub mean_seconds: f64,
    pub median_seconds: f64,
    pub max_seconds: f64,
}

impl TimingProfile {
    /// Summary of per-state times; all zero when `times` is empty.
    pub fn from_times(mut times: Vec<f64>) -> Self {
        let n = times.len();
        if n == 0 {
            return TimingProfile { samples: 0, mean_seconds: 0.0, median_seconds: 0.0, max_seconds: 0.0 };
        }
        times.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 { times[n / 2] } else { 0.5 * (times[n / 2 - 1] + times[n / 2]) };
        TimingProfile {
            samples: n,
            mean_seconds: times.iter().sum::<f64>() / n as f64,
            median_seconds: median,
            max_seconds: times[n - 1],
        }
    }
}

/// The first `sample_size` states of the induced chain in breadth-first order
/// that need a policy query. Terminal self-loop states are skipped.
pub fn query_sample<T: Scalar>(
    program: &GuardedProgram,
    jp: &JointPolicy<T>,
    sample_size: usize,
) -> Result<Vec<FactoredState>, JointError> {
    let mut ex = Explorer::new(program.initial_state(), usize::MAX);
    let mut out = Vec::with_capacity(sample_size.min(1 << 16));
    while let Some(i) = ex.queue.pop_front() {
        if out.len() >= sample_size {
            break;
        }
        let s = ex.states[i].clone();
        let enabled = program.enabled_actions(&s)?;
        if enabled == [ActionId::SELF_LOOP] {
            continue;
        }
        let a = jp.select_enabled(&s, &enabled)?.0;
        for (t, _) in program.successors::<T>(&s, a)?.entries() {
            ex.intern(t)?;
        }
        out.push(s);
    }
    Ok(out)
}

/// Wall time of one policy query plus successor expansion at `s`.
pub fn time_query<T: Scalar>(program: &GuardedProgram, jp: &JointPolicy<T>, s: &FactoredState) -> Result<f64, JointError> {
    let t0 = Instant::now();
    let enabled = program.enabled_actions(s)?;
    let a = jp.select_enabled(s, &enabled)?.0;
    let d = program.successors::<T>(s, a)?;
    let dt = t0.elapsed().as_secs_f64();
    std::hint::black_box(d);
    Ok(dt)
}

/// Timing of [`time_query`] over [`query_sample`].
pub fn query_timing_profile<T: Scalar>(
    program: &GuardedProgram,
    jp: &JointPolicy<T>,
    sample_size: usize,
) -> Result<TimingProfile, JointError> {
    query_timing_profile_with(program, jp, sample_size, 1)
}

/// As [`query_timing_profile`], sweeping the sample `repeats` times and
/// keeping the fastest run per state, which filters out scheduler noise.
pub fn query_timing_profile_with<T: Scalar>(
    program: &GuardedProgram,
    jp: &JointPolicy<T>,
    sample_size: usize,
    repeats: usize,
) -> Result<TimingProfile, JointError> {
    assert!(sample_size >= 1 && repeats >= 1, "sample_size and repeats must be positive");
    let sample = query_sample(program, jp, sample_size)?;
    let mut best = vec![f64::INFINITY; sample.len()];
    for _ in 0..repeats {
        for (b, s) in best.iter_mut().zip(&sample) {
            *b = b.min(time_query(program, jp, s)?);
        }
    }
    Ok(TimingProfile::from_times(best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{Rule, ScriptedPolicy};
    use crate::gcl::parse_program;

    const COIN: &str = "turn : [1..2] init 1; x : [0..2] init 0; done : [0..1] init 0;\n\
        [flip] done=0 & turn=1 -> 0.5:(x'=1)&(turn'=2) + 0.5:(x'=2)&(turn'=2);\n\
        [stop] done=0 -> (done'=1);\n\
        [back] done=0 & turn=2 -> (turn'=1)&(x'=0);\n\
        label \"two\" = x=2;";

    fn scripted(p: &GuardedProgram, rules: &[(&str, &str)]) -> AgentPolicy<f64> {
        AgentPolicy::Scripted(ScriptedPolicy::new(p, rules.iter().map(|(g, a)| Rule::new(g, a)).collect()).unwrap())
    }

    #[test]
    fn dispatch_by_turn() {
        let p = parse_program(COIN).unwrap();
        let jp = JointPolicy::new(&p, vec![scripted(&p, &[("true", "flip")]), scripted(&p, &[("true", "stop")])]).unwrap();
        assert_eq!(jp.select(&FactoredState::from(vec![1, 0, 0])).unwrap(), ActionId(0));
        assert_eq!(jp.select(&FactoredState::from(vec![2, 0, 0])).unwrap(), ActionId(1));
        assert!(matches!(jp.select(&FactoredState::from(vec![3, 0, 0])), Err(JointError::TurnOutOfRange { turn: 3, .. })));
    }

    #[test]
    fn coverage_checked() {
        let p = parse_program(COIN).unwrap();
        assert!(matches!(JointPolicy::new(&p, vec![scripted(&p, &[("true", "flip")])]), Err(JointError::Coverage(_))));
    }

    #[test]
    fn induced_chain_and_fallback() {
        let p = parse_program(COIN).unwrap();
        // agent 2 asks for `flip`, which is never enabled on its turn
        let jp = JointPolicy::new(&p, vec![scripted(&p, &[("true", "flip")]), scripted(&p, &[("true", "flip")])]).unwrap();
        let (d, stats) = build_induced_dtmc::<f64>(&p, &jp, DEFAULT_BUDGET).unwrap();
        // (1,0,0) -> (2,1,0),(2,2,0) -> fallback `stop` -> (2,1,1),(2,2,1) loop
        assert_eq!(d.num_states(), 5);
        assert_eq!(stats.states, 5);
        assert_eq!(stats.fallbacks, 2);
        assert_eq!(stats.policy_queries, 3);
        assert_eq!(stats.transitions, d.num_transitions());
        assert_eq!(d.label("two").unwrap().count(), 2);
    }

    #[test]
    fn monolithic_contains_induced() {
        let p = parse_program(COIN).unwrap();
        let (mdp, stats) = build_monolithic_mdp::<f64>(&p, DEFAULT_BUDGET).unwrap();
        assert_eq!(stats.states, mdp.num_states());
        assert!(mdp.num_states() > 5);
        assert!(matches!(
            build_monolithic_mdp::<f64>(&p, 2),
            Err(JointError::StateBudgetExceeded { budget: 2, explored: 2 })
        ));
    }

    #[test]
    fn timing_profile_clamps() {
        let p = parse_program(COIN).unwrap();
        let jp = JointPolicy::new(&p, vec![scripted(&p, &[("true", "flip")]), scripted(&p, &[("true", "stop")])]).unwrap();
        let prof = query_timing_profile(&p, &jp, 1000).unwrap();
        assert_eq!(prof.samples, 3, "two of the five states are terminal");
        assert!(prof.max_seconds >= prof.median_seconds && prof.mean_seconds >= 0.0);
    }
}
