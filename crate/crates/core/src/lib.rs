//! Verification of turn-based multi-agent policies by probabilistic model
//! checking of the Markov chain they induce.
//!
//! A [`gcl::GuardedProgram`] describes the environment as an MDP whose `turn`
//! variable names the acting agent. [`joint::build_induced_dtmc`] expands only
//! the actions the joint policy picks, and [`checker::check_dtmc`] evaluates a
//! PCTL query on the result. The numerical code is generic over
//! [`scalar::Scalar`]; the aliases below fix it to `f64`.

pub mod agents;
pub mod checker;
pub mod envs;
pub mod gcl;
pub mod joint;
pub mod model;
pub mod pctl;
pub mod scalar;
pub mod simulate;

pub type Dtmc = model::SparseDtmc<f64>;
pub type Mdp = model::ExplicitMdp<f64>;
pub type Policy = agents::AgentPolicy<f64>;
pub type Joint = joint::JointPolicy<f64>;
pub type Network = agents::Mlp<f64>;
