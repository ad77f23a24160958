//! The four benchmark environments, generated as guarded-command sources from
//! a few integer parameters. The files under `models/` are the generator's
//! output at default parameters.

mod cc;
mod mabp;
mod pokemon;
mod tictactoe;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::agents::{AgentPolicy, PolicyError, Rule, ScriptedPolicy};
use crate::gcl::{parse_program, GclError, GuardedProgram};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("unknown benchmark `{0}` (expected one of mabp, tictactoe, pokemon, cc)")]
    UnknownBenchmark(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("generated model does not parse: {0}")]
    Program(#[from] GclError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

pub type Params = BTreeMap<String, i64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: i64,
    pub smallest: i64,
    pub min: i64,
    pub max: i64,
}

const fn param(name: &'static str, default: i64, smallest: i64, min: i64, max: i64) -> ParamSpec {
    ParamSpec { name, default, smallest, min, max }
}

/// Static description of one benchmark family.
#[derive(Clone, Copy, Debug)]
pub struct Benchmark {
    pub name: &'static str,
    pub params: &'static [ParamSpec],
    /// Parameter that sets the number of agents, for families that scale.
    pub agent_param: Option<&'static str>,
    /// Table 1 style queries as `(label, property)`.
    pub queries: &'static [(&'static str, &'static str)],
    generate: fn(&Params) -> String,
    agents: fn(&Params) -> usize,
    rules: fn(&Params) -> Vec<Vec<Rule>>,
}

pub static BENCHMARKS: &[Benchmark] = &[
    Benchmark {
        name: "mabp",
        params: &[param("n", 2, 2, 1, 1000)],
        agent_param: Some("n"),
        queries: &[("lost1", "P=? [ F \"lost_1\" ]")],
        generate: mabp::source,
        agents: mabp::agents,
        rules: mabp::rules,
    },
    Benchmark {
        name: "tictactoe",
        params: &[param("size", 3, 3, 2, 4)],
        agent_param: None,
        queries: &[
            ("won1", "P=? [ F \"won_1\" ]"),
            ("won2", "P=? [ F \"won_2\" ]"),
            ("marking_order", "P=? [ ((cell_10=0 U cell_10=2) U cell_12=2) U cell_11=2 ]"),
        ],
        generate: tictactoe::source,
        agents: |_| 2,
        rules: tictactoe::rules,
    },
    Benchmark {
        name: "pokemon",
        params: &[
            param("hp", 100, 5, 1, 100),
            param("healpots", 3, 0, 0, 9),
            param("punches", 5, 1, 0, 9),
            param("sleeps", 2, 1, 0, 9),
            param("poisons", 2, 2, 0, 9),
        ],
        agent_param: None,
        queries: &[
            ("won1", "P=? [ F \"won_1\" ]"),
            ("won2", "P=? [ F \"won_2\" ]"),
            ("usePoisons", "P=? [ poisons_1=2 U poisons_1<2 ]"),
            ("useHeal", "P=? [ healpots_1=1 U healpots_1=0 ]"),
        ],
        generate: pokemon::source,
        agents: |_| 2,
        rules: pokemon::rules,
    },
    Benchmark {
        name: "cc",
        params: &[param("size", 4, 3, 3, 8), param("hp", 2, 1, 1, 5)],
        agent_param: None,
        queries: &[
            ("CC1KO", "P=? [ F \"player1_ko\" ]"),
            ("CC2KO", "P=? [ F \"player2_ko\" ]"),
            ("CC3KO", "P=? [ F \"player3_ko\" ]"),
            ("collision", "P=? [ F \"collision\" ]"),
        ],
        generate: cc::source,
        agents: |_| 3,
        rules: cc::rules,
    },
];

pub fn benchmark(name: &str) -> Result<&'static Benchmark, EnvError> {
    BENCHMARKS.iter().find(|b| b.name == name).ok_or_else(|| EnvError::UnknownBenchmark(name.into()))
}

impl Benchmark {
    pub fn defaults(&self) -> Params {
        self.params.iter().map(|p| (p.name.to_string(), p.default)).collect()
    }

    pub fn smallest(&self) -> Params {
        self.params.iter().map(|p| (p.name.to_string(), p.smallest)).collect()
    }

    /// Fills in defaults and checks ranges.
    pub fn resolve(&self, given: &Params) -> Result<Params, EnvError> {
        for k in given.keys() {
            if !self.params.iter().any(|p| p.name == k) {
                let known: Vec<&str> = self.params.iter().map(|p| p.name).collect();
                return Err(EnvError::InvalidParams(format!(
                    "{} has no parameter `{k}` (known: {})",
                    self.name,
                    known.join(", ")
                )));
            }
        }
        let mut out = self.defaults();
        for p in self.params {
            if let Some(&v) = given.get(p.name) {
                if v < p.min || v > p.max {
                    return Err(EnvError::InvalidParams(format!("{} must lie in [{}, {}], got {v}", p.name, p.min, p.max)));
                }
                out.insert(p.name.to_string(), v);
            }
        }
        Ok(out)
    }

    pub fn source(&self, params: &Params) -> Result<String, EnvError> {
        Ok((self.generate)(&self.resolve(params)?))
    }

    pub fn instantiate(&'static self, params: &Params) -> Result<Instance, EnvError> {
        let params = self.resolve(params)?;
        let source = (self.generate)(&params);
        let program = parse_program(&source)?;
        Ok(Instance { benchmark: self, agents: (self.agents)(&params), params, source, program })
    }
}

pub struct Instance {
    pub benchmark: &'static Benchmark,
    pub params: Params,
    pub agents: usize,
    pub source: String,
    pub program: GuardedProgram,
}

impl Instance {
    /// Reference scripted rules, one rule list per agent.
    pub fn reference_rules(&self) -> Vec<Vec<Rule>> {
        (self.benchmark.rules)(&self.params)
    }

    pub fn scripted_policies<T: Scalar>(&self) -> Result<Vec<AgentPolicy<T>>, EnvError> {
        self.reference_rules()
            .into_iter()
            .map(|r| Ok(AgentPolicy::Scripted(ScriptedPolicy::new(&self.program, r)?)))
            .collect()
    }
}

pub fn instantiate(name: &str, params: &Params) -> Result<Instance, EnvError> {
    benchmark(name)?.instantiate(params)
}

/// Parses `k=v,k=v` into parameters.
pub fn parse_params(text: &str) -> Result<Params, EnvError> {
    let mut out = Params::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| EnvError::InvalidParams(format!("`{part}` is not of the form key=value")))?;
        let v: i64 = v
            .trim()
            .parse()
            .map_err(|_| EnvError::InvalidParams(format!("`{}` is not an integer", v.trim())))?;
        if out.insert(k.trim().to_string(), v).is_some() {
            return Err(EnvError::InvalidParams(format!("`{}` given twice", k.trim())));
        }
    }
    Ok(out)
}

fn get(params: &Params, k: &str) -> i64 {
    params[k]
}
