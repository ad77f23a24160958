//! PCTL model checking over induced chains and, for extremal queries, MDPs.
//!
//! State formulas are evaluated bottom-up to state sets. A top-level `P=?`
//! yields a probability vector; a bounded `P⋈p` yields the set of states
//! meeting the threshold. Probabilities are clamped to `[0, 1]` only when read
//! out through [`CheckResult`].

pub mod dtmc;
pub mod mdp;
pub mod refine;

use thiserror::Error;

use crate::model::{ExplicitMdp, FactoredState, FeatureSchema, Labels, Predecessors, SparseDtmc, StateSet};
use crate::pctl::{PathFormula, ProbBound, Quantifier, StateFormula};
use crate::scalar::Scalar;
pub use mdp::Extremum;
use refine::{pull_back, Refined};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckError {
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("Pmax/Pmin on a Markov chain: an induced chain has no nondeterminism; use P")]
    QuantifierOnDtmc,
    #[error("plain P on an MDP needs a policy; use Pmax or Pmin")]
    QuantifierRequired,
    #[error("unsupported formula: {0}")]
    Unsupported(String),
}

/// Read-only row access shared by every chain the kernels run on.
pub trait Chain<T> {
    fn num_states(&self) -> usize;
    fn row(&self, s: usize) -> (&[u32], &[T]);
    fn predecessors(&self) -> &Predecessors;
}

impl<T: Scalar> Chain<T> for SparseDtmc<T> {
    fn num_states(&self) -> usize {
        SparseDtmc::num_states(self)
    }

    fn row(&self, s: usize) -> (&[u32], &[T]) {
        self.row_slices(s)
    }

    fn predecessors(&self) -> &Predecessors {
        SparseDtmc::predecessors(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Maximum relative change between sweeps at convergence.
    pub tol: f64,
    pub max_iter: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, max_iter: 1_000_000 }
    }
}

/// Iterative solver output; on `converged == false` the values are the last iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution<T> {
    pub values: Vec<T>,
    pub iterations: u64,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverStats {
    pub iterations: u64,
    pub residual: f64,
    pub converged: bool,
}

impl Default for SolverStats {
    fn default() -> Self {
        SolverStats { iterations: 0, residual: 0.0, converged: true }
    }
}

impl SolverStats {
    fn absorb<T>(&mut self, s: &Solution<T>) {
        self.iterations += s.iterations;
        self.residual = self.residual.max(s.residual);
        self.converged &= s.converged;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StateValues<T> {
    Probabilities(Vec<T>),
    Truth(StateSet),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult<T> {
    pub values: StateValues<T>,
    initial: usize,
    pub stats: SolverStats,
}

impl<T: Scalar> CheckResult<T> {
    /// Value at the initial state: a probability in `[0, 1]`, or 1/0 for truth values.
    pub fn value_at_initial(&self) -> f64 {
        self.value_at(self.initial)
    }

    pub fn value_at(&self, s: usize) -> f64 {
        match &self.values {
            StateValues::Probabilities(v) => v[s].as_f64().clamp(0.0, 1.0),
            StateValues::Truth(set) => f64::from(u8::from(set.contains(s))),
        }
    }

    /// Per-state probabilities clamped to `[0, 1]`; `None` for truth values.
    pub fn probabilities(&self) -> Option<Vec<f64>> {
        match &self.values {
            StateValues::Probabilities(v) => Some(v.iter().map(|x| x.as_f64().clamp(0.0, 1.0)).collect()),
            StateValues::Truth(_) => None,
        }
    }

    pub fn satisfied(&self) -> Option<&StateSet> {
        match &self.values {
            StateValues::Truth(s) => Some(s),
            StateValues::Probabilities(_) => None,
        }
    }
}

fn eval_atoms(
    schema: &FeatureSchema,
    labels: &Labels,
    states: &[FactoredState],
    f: &StateFormula,
) -> Result<Option<StateSet>, CheckError> {
    Ok(Some(match f {
        StateFormula::True => StateSet::full(states.len()),
        StateFormula::Atom(name) => labels.get(name).cloned().ok_or_else(|| CheckError::UnknownLabel(name.clone()))?,
        StateFormula::Comparison { feature, op, value } => {
            let i = schema.index_of(feature).ok_or_else(|| CheckError::UnknownFeature(feature.clone()))?;
            StateSet::from_bits(states.iter().map(|s| op.holds(i64::from(s[i]), *value)).collect())
        }
        _ => return Ok(None),
    }))
}

fn threshold<T: Scalar>(values: &[T], b: &ProbBound) -> StateSet {
    StateSet::from_bits(values.iter().map(|v| b.op.holds(v.as_f64(), b.p)).collect())
}

/// Checks `f` on an induced chain.
pub fn check_dtmc<T: Scalar>(dtmc: &SparseDtmc<T>, f: &StateFormula, opts: &SolverOptions) -> Result<CheckResult<T>, CheckError> {
    let mut c = DtmcChecker { dtmc, opts, stats: SolverStats::default() };
    let values = match f {
        StateFormula::Prob { quantifier, bound: None, path } => {
            c.plain(*quantifier)?;
            StateValues::Probabilities(c.path(path)?)
        }
        _ => StateValues::Truth(c.sat(f)?),
    };
    Ok(CheckResult { values, initial: dtmc.initial(), stats: c.stats })
}

struct DtmcChecker<'a, T> {
    dtmc: &'a SparseDtmc<T>,
    opts: &'a SolverOptions,
    stats: SolverStats,
}

impl<T: Scalar> DtmcChecker<'_, T> {
    fn plain(&self, q: Quantifier) -> Result<(), CheckError> {
        match q {
            Quantifier::Plain => Ok(()),
            _ => Err(CheckError::QuantifierOnDtmc),
        }
    }

    fn sat(&mut self, f: &StateFormula) -> Result<StateSet, CheckError> {
        let d = self.dtmc;
        if let Some(set) = eval_atoms(d.schema(), d.labels(), d.states(), f)? {
            return Ok(set);
        }
        match f {
            StateFormula::And(a, b) => Ok(self.sat(a)?.intersection(&self.sat(b)?)),
            StateFormula::Not(a) => Ok(self.sat(a)?.complement()),
            StateFormula::Prob { quantifier, bound: Some(b), path } => {
                self.plain(*quantifier)?;
                let v = self.path(path)?;
                Ok(threshold(&v, b))
            }
            StateFormula::Prob { bound: None, .. } => {
                Err(CheckError::Unsupported("`P=?` is only allowed at the top level".into()))
            }
            _ => unreachable!("atoms handled above"),
        }
    }

    fn state_operand(&mut self, p: &PathFormula, what: &str) -> Result<StateSet, CheckError> {
        match p {
            PathFormula::State(s) => self.sat(s),
            _ => Err(CheckError::Unsupported(format!("{what} needs state-formula operands"))),
        }
    }

    fn path(&mut self, p: &PathFormula) -> Result<Vec<T>, CheckError> {
        let d = self.dtmc;
        Ok(match p {
            PathFormula::State(s) => {
                let set = self.sat(s)?;
                (0..d.num_states()).map(|i| if set.contains(i) { T::one() } else { T::zero() }).collect()
            }
            PathFormula::Next(s) => dtmc::prob_next(d, &self.sat(s)?),
            PathFormula::Globally(s) => {
                let set = self.sat(s)?;
                let sol = dtmc::prob_globally(d, &set, self.opts);
                self.stats.absorb(&sol);
                sol.values
            }
            PathFormula::BoundedUntil(a, b, bound) => {
                let a = self.state_operand(a, "bounded until")?;
                let b = self.state_operand(b, "bounded until")?;
                dtmc::bounded_until(d, &a, &b, *bound)
            }
            PathFormula::Until(a, b) => match (a.as_ref(), b.as_ref()) {
                (PathFormula::State(sa), PathFormula::State(sb)) => {
                    let (a, b) = (self.sat(sa)?, self.sat(sb)?);
                    let sol = dtmc::until(d, &a, &b, self.opts);
                    self.stats.absorb(&sol);
                    sol.values
                }
                _ => self.nested_until(a, b)?,
            },
        })
    }

    fn nested_until(&mut self, a: &PathFormula, b: &PathFormula) -> Result<Vec<T>, CheckError> {
        let root = Refined::root(self.dtmc);
        let mut carried = Vec::new();
        let (r1, sa) = self.lift(root, a, &mut carried)?;
        carried.push(sa);
        let (r2, sb) = self.lift(r1, b, &mut carried)?;
        let sa = carried.pop().expect("pushed above");
        let sol = dtmc::until(&r2, &sa, &sb, self.opts);
        self.stats.absorb(&sol);
        Ok(r2.aggregate(&sol.values, self.dtmc.num_states()))
    }

    /// Refines `cur` until `p` is a state set on it; every set in `carried`
    /// is pulled back through each split.
    fn lift(&mut self, cur: Refined<T>, p: &PathFormula, carried: &mut Vec<StateSet>) -> Result<(Refined<T>, StateSet), CheckError> {
        match p {
            PathFormula::State(s) => {
                let set = self.sat(s)?;
                let lifted = cur.lift(&set);
                Ok((cur, lifted))
            }
            PathFormula::Until(a, b) => {
                let (c1, sa) = self.lift(cur, a, carried)?;
                carried.push(sa);
                let (c2, sb) = self.lift(c1, b, carried)?;
                let sa = carried.pop().expect("pushed above");
                let (c3, parent, holds, sol) = c2.split_on_until(&sa, &sb, self.opts);
                self.stats.absorb(&sol);
                for s in carried.iter_mut() {
                    *s = pull_back(s, &parent);
                }
                Ok((c3, holds))
            }
            _ => Err(CheckError::Unsupported(
                "only until formulas may be nested as until operands".into(),
            )),
        }
    }
}

/// Checks `f` on an MDP; every probability operator must be `Pmax` or `Pmin`.
pub fn check_mdp<T: Scalar>(model: &ExplicitMdp<T>, f: &StateFormula, opts: &SolverOptions) -> Result<CheckResult<T>, CheckError> {
    let mut c = MdpChecker { mdp: model, opts, stats: SolverStats::default() };
    let values = match f {
        StateFormula::Prob { quantifier, bound: None, path } => {
            let ext = extremum(*quantifier)?;
            StateValues::Probabilities(c.path(ext, path)?)
        }
        _ => StateValues::Truth(c.sat(f)?),
    };
    Ok(CheckResult { values, initial: model.initial(), stats: c.stats })
}

fn extremum(q: Quantifier) -> Result<Extremum, CheckError> {
    match q {
        Quantifier::Max => Ok(Extremum::Max),
        Quantifier::Min => Ok(Extremum::Min),
        Quantifier::Plain => Err(CheckError::QuantifierRequired),
    }
}

struct MdpChecker<'a, T> {
    mdp: &'a ExplicitMdp<T>,
    opts: &'a SolverOptions,
    stats: SolverStats,
}

impl<T: Scalar> MdpChecker<'_, T> {
    fn sat(&mut self, f: &StateFormula) -> Result<StateSet, CheckError> {
        let m = self.mdp;
        if let Some(set) = eval_atoms(m.schema(), m.labels(), m.states(), f)? {
            return Ok(set);
        }
        match f {
            StateFormula::And(a, b) => Ok(self.sat(a)?.intersection(&self.sat(b)?)),
            StateFormula::Not(a) => Ok(self.sat(a)?.complement()),
            StateFormula::Prob { quantifier, bound: Some(b), path } => {
                let v = self.path(extremum(*quantifier)?, path)?;
                Ok(threshold(&v, b))
            }
            StateFormula::Prob { bound: None, .. } => {
                Err(CheckError::Unsupported("`P=?` is only allowed at the top level".into()))
            }
            _ => unreachable!("atoms handled above"),
        }
    }

    fn operand(&mut self, p: &PathFormula) -> Result<StateSet, CheckError> {
        match p {
            PathFormula::State(s) => self.sat(s),
            _ => Err(CheckError::Unsupported("nested path formulas are not supported on MDPs".into())),
        }
    }

    fn path(&mut self, ext: Extremum, p: &PathFormula) -> Result<Vec<T>, CheckError> {
        let m = self.mdp;
        Ok(match p {
            PathFormula::State(s) => {
                let set = self.sat(s)?;
                (0..m.num_states()).map(|i| if set.contains(i) { T::one() } else { T::zero() }).collect()
            }
            PathFormula::Next(s) => mdp::prob_next(m, ext, &self.sat(s)?),
            PathFormula::Globally(s) => {
                let set = self.sat(s)?;
                let sol = mdp::prob_globally(m, ext, &set, self.opts);
                self.stats.absorb(&sol);
                sol.values
            }
            PathFormula::BoundedUntil(a, b, bound) => {
                let (a, b) = (self.operand(a)?, self.operand(b)?);
                mdp::bounded_until(m, ext, &a, &b, *bound)
            }
            PathFormula::Until(a, b) => {
                let (a, b) = (self.operand(a)?, self.operand(b)?);
                let sol = mdp::until(m, ext, &a, &b, self.opts);
                self.stats.absorb(&sol);
                sol.values
            }
        })
    }
}
