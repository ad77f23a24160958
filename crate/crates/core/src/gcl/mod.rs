//! Guarded-command modeling language: a single implicit module of bounded
//! integer variables, probabilistic commands, labels and per-agent rewards.
//!
//! ```text
//! const int N = 2;
//! turn : [1..2] init 1;
//! x : [0..1] init 0;
//! [flip] turn=1 -> 0.5:(x'=0)&(turn'=2) + 0.5:(x'=1)&(turn'=2);
//! label "x_is_1" = x=1;
//! rewards "agent_1" [flip] x'=1 : 1; endrewards
//! ```
//!
//! Reward items are evaluated on the source state; primed variables refer to
//! the successor.

pub mod expr;
pub(crate) mod lexer;
mod parser;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};

use thiserror::Error;

pub use expr::{BinOp, Expr, Ty, Value};
pub use parser::{parse_expr_in, Scope};

use crate::model::{action_name, ActionId, Distribution, FactoredState, Feature, FeatureSchema, STOCHASTIC_TOL};
use crate::scalar::Scalar;

/// Name of the mandatory turn variable.
pub const TURN: &str = "turn";
/// Name of the optional terminal flag.
pub const DONE: &str = "done";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GclError {
    #[error("{line}:{col}: syntax error: expected {expected}, found {found}")]
    Syntax { line: usize, col: usize, expected: String, found: String },
    #[error("{line}:{col}: undeclared identifier `{name}`")]
    UndeclaredIdentifier { name: String, line: usize, col: usize },
    #[error("{line}:{col}: `{name}` is declared twice")]
    DuplicateDeclaration { name: String, line: usize, col: usize },
    #[error("{line}:{col}: type error: {message}")]
    Type { line: usize, col: usize, message: String },
    #[error("{line}:{col}: {what} must be a constant expression")]
    NonConstant { line: usize, col: usize, what: String },
    #[error("{line}:{col}: {message}")]
    InvalidDeclaration { line: usize, col: usize, message: String },
    #[error("model declares no `turn` variable")]
    MissingTurnVariable,
    #[error("unknown constant `{0}`")]
    UnknownConstant(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("probabilities of command `{action}` (line {line}) sum to {sum}")]
    ProbabilitiesDoNotSumToOne { action: String, line: usize, sum: f64 },
    #[error("action `{action}` is not enabled in {state}")]
    ActionNotEnabled { action: String, state: String },
    #[error("action `{action}` has {count} enabled commands in {state}")]
    NondeterministicAction { action: String, count: usize, state: String },
    #[error("update sets `{var}` to {value}, outside [{lo}..{hi}] (from {state})")]
    UpdateOutOfBounds { var: String, value: i64, lo: i32, hi: i32, state: String },
    #[error("deadlock: no action enabled in non-terminal state {state}")]
    DeadlockState { state: String },
}

impl GclError {
    /// Attaches a source position to an evaluation failure.
    pub(crate) fn at(self, line: usize, col: usize) -> GclError {
        match self {
            GclError::Eval(message) => GclError::Type { line, col, message },
            GclError::DivisionByZero => GclError::Type { line, col, message: "division by zero".into() },
            other => other,
        }
    }

    /// `(line, column)` for errors tied to a source location.
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            GclError::Syntax { line, col, .. }
            | GclError::UndeclaredIdentifier { line, col, .. }
            | GclError::DuplicateDeclaration { line, col, .. }
            | GclError::Type { line, col, .. }
            | GclError::NonConstant { line, col, .. }
            | GclError::InvalidDeclaration { line, col, .. } => Some((*line, *col)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Update {
    pub probability: f64,
    pub assignments: Vec<(usize, Expr)>,
}

#[derive(Clone, Debug)]
pub struct Command {
    pub action: ActionId,
    pub guard: Expr,
    pub updates: Vec<Update>,
    pub line: usize,
}

#[derive(Clone, Debug)]
pub struct RewardItem {
    /// `None` matches every action.
    pub action: Option<ActionId>,
    pub guard: Expr,
    pub value: Expr,
}

#[derive(Clone, Debug)]
pub struct RewardStructure {
    pub name: String,
    pub items: Vec<RewardItem>,
}

/// Parsed, resolved and constant-folded model.
#[derive(Debug)]
pub struct GuardedProgram {
    constants: Vec<(String, Value)>,
    schema: FeatureSchema,
    names: Vec<String>,
    init: FactoredState,
    actions: Vec<String>,
    commands: Vec<Command>,
    by_action: Vec<Vec<usize>>,
    labels: Vec<(String, Expr)>,
    rewards: Vec<RewardStructure>,
    done: Option<usize>,
    scope: Scope,
    warned_loop: AtomicBool,
}

impl Clone for GuardedProgram {
    fn clone(&self) -> Self {
        GuardedProgram {
            constants: self.constants.clone(),
            schema: self.schema.clone(),
            names: self.names.clone(),
            init: self.init.clone(),
            actions: self.actions.clone(),
            commands: self.commands.clone(),
            by_action: self.by_action.clone(),
            labels: self.labels.clone(),
            rewards: self.rewards.clone(),
            done: self.done,
            scope: self.scope.clone(),
            warned_loop: AtomicBool::new(self.warned_loop.load(Ordering::Relaxed)),
        }
    }
}

pub fn parse_program(src: &str) -> Result<GuardedProgram, GclError> {
    parse_program_with(src, &BTreeMap::new())
}

/// Parses with some `const` definitions replaced by the given values.
pub fn parse_program_with(src: &str, overrides: &BTreeMap<String, Value>) -> Result<GuardedProgram, GclError> {
    let parts = parser::parse_parts(src, overrides)?;
    let features: Vec<Feature> =
        parts.vars.iter().map(|v| Feature { name: v.name.clone(), lo: v.lo, hi: v.hi }).collect();
    if !features.iter().any(|f| f.name == TURN) {
        return Err(GclError::MissingTurnVariable);
    }
    let schema = FeatureSchema::new(features, TURN).expect("parser rejects duplicate names");
    let names: Vec<String> = parts.vars.iter().map(|v| v.name.clone()).collect();
    let init = FactoredState::from(parts.vars.iter().map(|v| v.init).collect::<Vec<_>>());

    let mut actions: Vec<String> = Vec::new();
    let mut commands = Vec::with_capacity(parts.commands.len());
    for c in parts.commands {
        let idx = match actions.iter().position(|a| *a == c.action) {
            Some(i) => i,
            None => {
                actions.push(c.action.clone());
                actions.len() - 1
            }
        };
        let updates = c
            .updates
            .into_iter()
            .filter(|(p, _)| *p > 0.0)
            .map(|(probability, assignments)| Update { probability, assignments })
            .collect();
        commands.push(Command { action: ActionId(idx as u32), guard: c.guard, updates, line: c.line });
    }
    let mut by_action = vec![Vec::new(); actions.len()];
    for (i, c) in commands.iter().enumerate() {
        by_action[c.action.index()].push(i);
    }
    let mut rewards = Vec::with_capacity(parts.rewards.len());
    for (name, items) in parts.rewards {
        let mut resolved = Vec::with_capacity(items.len());
        for it in items {
            let action = match it.action {
                None => None,
                Some(a) => Some(ActionId(
                    actions.iter().position(|x| *x == a).ok_or(GclError::UnknownAction(a))? as u32,
                )),
            };
            resolved.push(RewardItem { action, guard: it.guard, value: it.value });
        }
        rewards.push(RewardStructure { name, items: resolved });
    }
    let done = schema.index_of(DONE);
    Ok(GuardedProgram {
        constants: parts.constants,
        schema,
        names,
        init,
        actions,
        commands,
        by_action,
        labels: parts.labels,
        rewards,
        done,
        scope: parts.scope,
        warned_loop: AtomicBool::new(false),
    })
}

impl GuardedProgram {
    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn constants(&self) -> &[(String, Value)] {
        &self.constants
    }

    pub fn constant(&self, name: &str) -> Option<Value> {
        self.constants.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn initial_state(&self) -> FactoredState {
        self.init.clone()
    }

    /// Declared actions in order of first appearance.
    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn action_id(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().position(|a| a == name).map(|i| ActionId(i as u32))
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        action_name(&self.actions, a)
    }

    pub fn commands(&self) -> &[Command] {
        &self.commands
    }

    pub fn label_names(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(|(n, _)| n.as_str())
    }

    pub fn label_expr(&self, name: &str) -> Option<&Expr> {
        self.labels.iter().find(|(n, _)| n == name).map(|(_, e)| e)
    }

    pub fn label_holds(&self, name: &str, s: &FactoredState) -> Result<bool, GclError> {
        let e = self.label_expr(name).ok_or_else(|| GclError::Eval(format!("no label `{name}`")))?;
        e.eval_bool(s, None)
    }

    /// Truth value of every label, in declaration order.
    pub fn eval_labels(&self, s: &FactoredState) -> Result<Vec<bool>, GclError> {
        self.labels.iter().map(|(_, e)| e.eval_bool(s, None)).collect()
    }

    pub fn reward_structures(&self) -> &[RewardStructure] {
        &self.rewards
    }

    pub fn reward_index(&self, name: &str) -> Option<usize> {
        self.rewards.iter().position(|r| r.name == name)
    }

    /// Sum of the matching items of reward structure `idx` for the step `s --a--> next`.
    pub fn reward(&self, idx: usize, a: ActionId, s: &FactoredState, next: &FactoredState) -> Result<f64, GclError> {
        let mut total = 0.0;
        for it in &self.rewards[idx].items {
            if it.action.is_some_and(|x| x != a) {
                continue;
            }
            if it.guard.eval_bool(s, Some(next))? {
                total += it.value.eval(s, Some(next))?.as_f64().unwrap_or(0.0);
            }
        }
        Ok(total)
    }

    pub fn scope(&self) -> &Scope {
        &self.scope
    }

    /// Compiles an expression in the program's scope (constants, formulas, variables).
    pub fn parse_expr(&self, text: &str) -> Result<(Expr, Ty), GclError> {
        parse_expr_in(text, &self.scope)
    }

    pub fn eval_expr(&self, e: &Expr, s: &FactoredState) -> Result<Value, GclError> {
        e.eval(s, None)
    }

    pub fn display_expr<'a>(&'a self, e: &'a Expr) -> expr::Display<'a> {
        expr::Display { expr: e, names: &self.names }
    }

    pub fn done_index(&self) -> Option<usize> {
        self.done
    }

    /// Whether `s` has its `done` flag raised.
    pub fn is_done(&self, s: &FactoredState) -> bool {
        self.done.is_some_and(|i| s[i] != 0)
    }

    fn enabled_commands(&self, a: ActionId, s: &FactoredState) -> Result<Vec<usize>, GclError> {
        let mut out = Vec::new();
        for &c in &self.by_action[a.index()] {
            if self.commands[c].guard.eval_bool(s, None)? {
                out.push(c);
            }
        }
        Ok(out)
    }

    /// Actions with at least one enabled command, in declaration order. A
    /// terminal (`done`) state without commands gets the implicit self-loop.
    pub fn enabled_actions(&self, s: &FactoredState) -> Result<Vec<ActionId>, GclError> {
        let mut out = Vec::new();
        for (i, cmds) in self.by_action.iter().enumerate() {
            for &c in cmds {
                if self.commands[c].guard.eval_bool(s, None)? {
                    out.push(ActionId(i as u32));
                    break;
                }
            }
        }
        if out.is_empty() {
            if self.is_done(s) {
                if !self.warned_loop.swap(true, Ordering::Relaxed) {
                    log::info!(
                        "terminal states without commands get an implicit self-loop (first: {})",
                        self.schema.describe(s)
                    );
                }
                out.push(ActionId::SELF_LOOP);
            } else {
                return Err(GclError::DeadlockState { state: self.schema.describe(s) });
            }
        }
        Ok(out)
    }

    /// Successor distribution of `s` under `a`. Duplicate successors are merged
    /// in first-occurrence order.
    pub fn successors<T: Scalar>(&self, s: &FactoredState, a: ActionId) -> Result<Distribution<FactoredState, T>, GclError> {
        if a.is_self_loop() {
            if self.enabled_actions(s)? == [ActionId::SELF_LOOP] {
                return Ok(Distribution::dirac(s.clone()));
            }
            return Err(GclError::ActionNotEnabled { action: self.action_name(a).into(), state: self.schema.describe(s) });
        }
        if a.index() >= self.actions.len() {
            return Err(GclError::UnknownAction(format!("#{}", a.0)));
        }
        let enabled = self.enabled_commands(a, s)?;
        let c = match enabled.as_slice() {
            [] => {
                return Err(GclError::ActionNotEnabled {
                    action: self.action_name(a).into(),
                    state: self.schema.describe(s),
                })
            }
            [c] => &self.commands[*c],
            many => {
                return Err(GclError::NondeterministicAction {
                    action: self.action_name(a).into(),
                    count: many.len(),
                    state: self.schema.describe(s),
                })
            }
        };
        self.apply_command(c, s)
    }

    fn apply_command<T: Scalar>(&self, c: &Command, s: &FactoredState) -> Result<Distribution<FactoredState, T>, GclError> {
        let mut entries: Vec<(FactoredState, f64)> = Vec::with_capacity(c.updates.len());
        let mut sum = 0.0;
        for u in &c.updates {
            let mut next: Vec<i32> = s.values().to_vec();
            for (var, e) in &u.assignments {
                let v = e
                    .eval(s, None)?
                    .as_int()
                    .ok_or_else(|| GclError::Eval("assignment of a non-integer".into()))?;
                let f = self.schema.feature(*var);
                if v < f.lo as i64 || v > f.hi as i64 {
                    return Err(GclError::UpdateOutOfBounds {
                        var: f.name.clone(),
                        value: v,
                        lo: f.lo,
                        hi: f.hi,
                        state: self.schema.describe(s),
                    });
                }
                next[*var] = v as i32;
            }
            let next = FactoredState::from(next);
            sum += u.probability;
            match entries.iter_mut().find(|(t, _)| *t == next) {
                Some((_, p)) => *p += u.probability,
                None => entries.push((next, u.probability)),
            }
        }
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(GclError::ProbabilitiesDoNotSumToOne {
                action: self.action_name(c.action).into(),
                line: c.line,
                sum,
            });
        }
        Ok(Distribution::new(entries.into_iter().map(|(t, p)| (t, T::of(p))).collect())
            .expect("validated update probabilities"))
    }

    /// Every enabled action with its distribution.
    pub fn transitions<T: Scalar>(&self, s: &FactoredState) -> Result<Vec<(ActionId, Distribution<FactoredState, T>)>, GclError> {
        let actions = self.enabled_actions(s)?;
        actions.into_iter().map(|a| Ok((a, self.successors(s, a)?))).collect()
    }
}
