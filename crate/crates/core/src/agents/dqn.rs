use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mlp::{argmax, Adam, MinMax, Mlp};
use super::policy::{AgentPolicy, NeuralPolicy};
use super::replay::{ReplayBuffer, Transition};
use super::TrainError;
use crate::gcl::GuardedProgram;
use crate::model::{ActionId, FactoredState};
use crate::scalar::Scalar;
use crate::simulate::sample;

#[derive(Clone, Debug, PartialEq)]
pub struct DqnConfig {
    pub seed: u64,
    pub epsilon: f64,
    pub epsilon_min: f64,
    pub epsilon_decay: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub target_sync_interval: u64,
    pub episodes: usize,
    /// Step cap per episode; a capped episode ends without a terminal flag.
    pub max_steps: usize,
    pub hidden: Vec<usize>,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            seed: 128,
            epsilon: 0.5,
            epsilon_min: 0.1,
            epsilon_decay: 0.9999,
            gamma: 0.99,
            learning_rate: 1e-4,
            batch_size: 32,
            replay_capacity: 300_000,
            target_sync_interval: 304,
            episodes: 10_000,
            max_steps: 10_000,
            hidden: vec![256, 256],
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if !(0.0 <= self.epsilon_min && self.epsilon_min <= self.epsilon && self.epsilon <= 1.0) {
            return bad("need 0 <= epsilon_min <= epsilon <= 1");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("need 0 < gamma <= 1");
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return bad("need 0 < epsilon_decay <= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.episodes == 0 {
            return bad("episodes must be at least 1");
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad("need 1 <= batch_size <= replay_capacity");
        }
        if self.target_sync_interval == 0 || self.max_steps == 0 {
            return bad("target_sync_interval and max_steps must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layers must be non-empty");
        }
        Ok(())
    }

    /// Exploration rate after `k` environment steps.
    pub fn epsilon_at(&self, k: u64) -> f64 {
        let k = i32::try_from(k).unwrap_or(i32::MAX);
        (self.epsilon * self.epsilon_decay.powi(k)).max(self.epsilon_min)
    }
}

/// Total reward one agent collected in one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub agent: usize,
    pub reward: f64,
    pub epsilon: f64,
}

pub struct Trained<T> {
    pub policies: Vec<AgentPolicy<T>>,
    pub log: Vec<EpisodeLog>,
    pub steps: u64,
}

/// One gradient step towards `y = r + γ·max Q_target(s')` (`y = r` when terminal).
pub fn train_step<T: Scalar>(
    net: &mut Mlp<T>,
    target: &Mlp<T>,
    adam: &mut Adam<T>,
    norm: &MinMax<T>,
    batch: &[&Transition],
    gamma: f64,
) -> Result<T, TrainError> {
    assert!(!batch.is_empty(), "empty batch");
    let inputs: Vec<Vec<T>> = batch.iter().map(|t| norm.apply(&t.state)).collect();
    let actions: Vec<usize> = batch.iter().map(|t| t.action.index()).collect();
    let targets: Vec<T> = batch
        .iter()
        .map(|t| {
            let r = T::of(t.reward);
            if t.terminal {
                r
            } else {
                let q = target.forward(&norm.apply(&t.next));
                r + T::of(gamma) * q[argmax(&q)]
            }
        })
        .collect();
    let (loss, grads) = net.loss_and_grad(&inputs, &actions, &targets);
    if !loss.is_finite() {
        return Err(TrainError::NonFiniteLoss { loss: loss.as_f64(), detail: "loss".into() });
    }
    adam.step(net, &grads);
    if !net.is_finite() {
        return Err(TrainError::NonFiniteLoss { loss: loss.as_f64(), detail: "weights after update".into() });
    }
    Ok(loss)
}

struct Learner<T> {
    net: Mlp<T>,
    target: Mlp<T>,
    adam: Adam<T>,
    buffer: ReplayBuffer,
    reward_idx: Option<usize>,
}

/// Reward structure for agent `i` (1-based): `agent_i` if declared, else the first one.
fn reward_index(program: &GuardedProgram, agent: usize) -> Option<usize> {
    program.reward_index(&format!("agent_{agent}")).or(if program.reward_structures().is_empty() { None } else { Some(0) })
}

fn is_terminal(program: &GuardedProgram, s: &FactoredState) -> Result<bool, TrainError> {
    if program.is_done(s) {
        return Ok(true);
    }
    Ok(program.enabled_actions(s)?.iter().all(|a| a.is_self_loop()))
}

/// Trains one independent DQN learner per agent on the turn-based program.
pub fn train_tmarl<T: Scalar>(program: &GuardedProgram, n_agents: usize, config: &DqnConfig) -> Result<Trained<T>, TrainError> {
    config.validate()?;
    let schema = program.schema();
    let (tlo, thi) = schema.turn_bounds();
    if n_agents == 0 || tlo != 1 || thi as usize != n_agents {
        return Err(TrainError::Config(format!("turn ranges over [{tlo}..{thi}], expected [1..{n_agents}]")));
    }
    let n_actions = program.actions().len();
    let turn = schema.turn_index();
    let norm = MinMax::<T>::new(schema);
    let mut sizes = vec![schema.len()];
    sizes.extend(&config.hidden);
    sizes.push(n_actions);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut learners: Vec<Learner<T>> = (1..=n_agents)
        .map(|i| {
            let net = Mlp::random(&sizes, &mut rng);
            Learner {
                target: net.clone(),
                adam: Adam::new(&net, config.learning_rate),
                net,
                buffer: ReplayBuffer::new(config.replay_capacity),
                reward_idx: reward_index(program, i),
            }
        })
        .collect();

    let mut log = Vec::with_capacity(config.episodes * n_agents);
    let mut k: u64 = 0;
    for episode in 0..config.episodes {
        let mut s = program.initial_state();
        let mut pending: Vec<Option<(FactoredState, ActionId, f64)>> = vec![None; n_agents];
        let mut totals = vec![0.0; n_agents];
        let mut terminal = false;
        for _ in 0..config.max_steps {
            if is_terminal(program, &s)? {
                terminal = true;
                break;
            }
            let t = s[turn];
            let agent = (t - 1) as usize;
            let l = &mut learners[agent];
            if let Some((ps, pa, pr)) = pending[agent].take() {
                l.buffer.push(Transition { state: ps, action: pa, reward: pr, next: s.clone(), terminal: false });
            }
            let a = if rng.random::<f64>() < config.epsilon_at(k) {
                ActionId(rng.random_range(0..n_actions as u32))
            } else {
                ActionId(argmax(&l.net.forward(&norm.apply(&s))) as u32)
            };
            let (next, r) = if program.enabled_actions(&s)?.contains(&a) {
                let next = sample(&program.successors::<f64>(&s, a)?, &mut rng).clone();
                let r = match l.reward_idx {
                    Some(idx) => program.reward(idx, a, &s, &next)?,
                    None => 0.0,
                };
                (next, r)
            } else {
                (s.with(turn, t % n_agents as i32 + 1), 0.0)
            };
            totals[agent] += r;
            pending[agent] = Some((s, a, r));
            k += 1;
            if l.buffer.len() >= config.batch_size {
                let batch = l.buffer.sample(&mut rng, config.batch_size);
                train_step(&mut l.net, &l.target, &mut l.adam, &norm, &batch, config.gamma).map_err(|e| match e {
                    TrainError::NonFiniteLoss { loss, detail } => TrainError::NonFiniteLoss {
                        loss,
                        detail: format!("{detail}; agent {}, episode {episode}, step {k}", agent + 1),
                    },
                    other => other,
                })?;
            }
            if k.is_multiple_of(config.target_sync_interval) {
                for l in &mut learners {
                    l.target = l.net.clone();
                }
            }
            s = next;
        }
        if !terminal {
            terminal = is_terminal(program, &s)?;
        }
        for (agent, p) in pending.iter_mut().enumerate() {
            if let Some((ps, pa, pr)) = p.take() {
                learners[agent].buffer.push(Transition { state: ps, action: pa, reward: pr, next: s.clone(), terminal });
            }
        }
        let epsilon = config.epsilon_at(k);
        for (agent, &reward) in totals.iter().enumerate() {
            log.push(EpisodeLog { episode, agent: agent + 1, reward, epsilon });
        }
        if (episode + 1) % 1000 == 0 {
            log::info!("episode {} of {}, epsilon {:.4}", episode + 1, config.episodes, epsilon);
        }
    }

    let policies = learners
        .into_iter()
        .map(|l| NeuralPolicy::new(schema.clone(), program.actions().to_vec(), l.net).map(AgentPolicy::Neural))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| TrainError::Config(e.to_string()))?;
    Ok(Trained { policies, log, steps: k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcl::parse_program;

    #[test]
    fn epsilon_schedule() {
        let c = DqnConfig::default();
        assert_eq!(c.epsilon_at(0), 0.5);
        assert!((c.epsilon_at(1000) - 0.5 * 0.9999f64.powi(1000)).abs() < 1e-12);
        assert_eq!(c.epsilon_at(100_000), 0.1);
    }

    #[test]
    fn invalid_configs() {
        let ok = DqnConfig::default();
        assert!(ok.validate().is_ok());
        for c in [
            DqnConfig { episodes: 0, ..ok.clone() },
            DqnConfig { epsilon_min: 0.6, ..ok.clone() },
            DqnConfig { gamma: 0.0, ..ok.clone() },
            DqnConfig { batch_size: 0, ..ok.clone() },
        ] {
            assert!(matches!(c.validate(), Err(TrainError::Config(_))));
        }
    }

    #[test]
    fn fixed_point_leaves_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let src = "turn : [1..1] init 1; x : [0..3] init 0; done : [0..1] init 0;\n[a] done=0 -> (done'=1);";
        let p = parse_program(src).unwrap();
        let norm = MinMax::<f64>::new(p.schema());
        let mut net = Mlp::<f64>::random(&[3, 4, 1], &mut rng);
        let s = p.initial_state();
        let q = net.forward(&norm.apply(&s))[0];
        let tr = Transition { state: s.clone(), action: ActionId(0), reward: q, next: s, terminal: true };
        let before = net.clone();
        let mut adam = Adam::new(&net, 1e-4);
        let target = net.clone();
        let loss = train_step(&mut net, &target, &mut adam, &norm, &[&tr], 0.99).unwrap();
        assert_eq!(loss, 0.0);
        for k in 0..net.num_params() {
            assert!((net.param(k) - before.param(k)).abs() <= 1e-12);
        }
    }

    #[test]
    fn forced_action_is_learned() {
        let src = "turn : [1..2] init 1; c : [0..3] init 0; done : [0..1] init 0;\n\
            [go] done=0 & c<3 -> (c'=c+1)&(turn'=3-turn);\n[go] done=0 & c=3 -> (done'=1);\n\
            rewards \"agent_1\" [go] true : 1; endrewards";
        let p = parse_program(src).unwrap();
        let cfg = DqnConfig { episodes: 30, hidden: vec![8], ..DqnConfig::default() };
        let out = train_tmarl::<f64>(&p, 2, &cfg).unwrap();
        assert_eq!(out.policies.len(), 2);
        assert_eq!(out.log.len(), 60);
        assert!(out.log.iter().all(|e| e.reward.is_finite()));
    }
}
