//! Per-agent policies and independent DQN training.

pub mod dqn;
pub mod mlp;
pub mod policy;
pub mod replay;

use thiserror::Error;

use crate::gcl::GclError;

pub use dqn::{train_step, train_tmarl, DqnConfig, EpisodeLog, Trained};
pub use mlp::{argmax, Adam, Grads, MinMax, Mlp};
pub use policy::{load_policy, save_policy, AgentPolicy, NeuralPolicy, PolicyError, Rule, ScriptedPolicy, TabularPolicy};
pub use replay::{ReplayBuffer, Transition};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("non-finite training loss {loss} ({detail})")]
    NonFiniteLoss { loss: f64, detail: String },
    #[error(transparent)]
    Env(#[from] GclError),
}
