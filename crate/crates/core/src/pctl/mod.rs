//! PCTL state and path formulas.
//!
//! Concrete syntax (whitespace-insensitive):
//!
//! ```text
//! P=? [ F "won_1" ]
//! Pmax=? [ F<=10 "lost_1" ]
//! P>=0.5 [ (("cell_10=0" U cell_10=2) U cell_12=2) U cell_11=2 ]
//! P(F won_1)
//! ```
//!
//! `F φ` is stored as `true U φ` and `F<=k φ` as `true U<=k φ`. Quoted text of
//! the form `feature op int` is a comparison; any other quoted text or bare
//! identifier is a label.

mod parser;

use std::fmt;

use thiserror::Error;

pub use parser::parse_property;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PctlError {
    #[error("{line}:{col}: syntax error: expected {expected}, found {found}")]
    Syntax { line: usize, col: usize, expected: String, found: String },
    #[error("probability bound {0} is outside [0, 1]")]
    BoundOutOfRange(f64),
    #[error("{line}:{col}: {message}")]
    Unsupported { line: usize, col: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn holds<T: PartialOrd>(self, a: T, b: T) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantifier {
    Plain,
    Max,
    Min,
}

/// `⋈ p` with `⋈ ∈ {<, <=, >, >=}` and `p ∈ [0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbBound {
    pub op: CmpOp,
    pub p: f64,
}

/// Step bound of a bounded until: `< steps` when `strict`, else `<= steps`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StepBound {
    pub strict: bool,
    pub steps: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StateFormula {
    True,
    Atom(String),
    Comparison { feature: String, op: CmpOp, value: i64 },
    And(Box<StateFormula>, Box<StateFormula>),
    Not(Box<StateFormula>),
    Prob { quantifier: Quantifier, bound: Option<ProbBound>, path: Box<PathFormula> },
}

#[derive(Clone, Debug, PartialEq)]
pub enum PathFormula {
    /// A state formula read as a path formula about the first state.
    State(StateFormula),
    Next(StateFormula),
    Until(Box<PathFormula>, Box<PathFormula>),
    BoundedUntil(Box<PathFormula>, Box<PathFormula>, StepBound),
    Globally(StateFormula),
}

impl StateFormula {
    pub fn atom(name: &str) -> Self {
        StateFormula::Atom(name.to_string())
    }

    pub fn cmp(feature: &str, op: CmpOp, value: i64) -> Self {
        StateFormula::Comparison { feature: feature.to_string(), op, value }
    }

    pub fn not(f: StateFormula) -> Self {
        StateFormula::Not(Box::new(f))
    }

    pub fn and(a: StateFormula, b: StateFormula) -> Self {
        StateFormula::And(Box::new(a), Box::new(b))
    }

    pub fn query(quantifier: Quantifier, path: PathFormula) -> Self {
        StateFormula::Prob { quantifier, bound: None, path: Box::new(path) }
    }

    /// Whether this is a `P=?`-style query (a Prob node without a bound).
    pub fn is_query(&self) -> bool {
        matches!(self, StateFormula::Prob { bound: None, .. })
    }

    /// Label names mentioned anywhere in the formula.
    pub fn labels(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit(&mut |f| {
            if let StateFormula::Atom(a) = f {
                if !out.contains(&a.as_str()) {
                    out.push(a.as_str());
                }
            }
        });
        out
    }

    /// Feature names mentioned in comparisons.
    pub fn features(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit(&mut |f| {
            if let StateFormula::Comparison { feature, .. } = f {
                if !out.contains(&feature.as_str()) {
                    out.push(feature.as_str());
                }
            }
        });
        out
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a StateFormula)) {
        f(self);
        match self {
            StateFormula::And(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            StateFormula::Not(a) => a.visit(f),
            StateFormula::Prob { path, .. } => path.visit_states(f),
            _ => {}
        }
    }
}

impl PathFormula {
    pub fn state(f: StateFormula) -> Self {
        PathFormula::State(f)
    }

    /// `F φ`.
    pub fn finally(f: PathFormula) -> Self {
        PathFormula::Until(Box::new(PathFormula::State(StateFormula::True)), Box::new(f))
    }

    pub fn until(a: PathFormula, b: PathFormula) -> Self {
        PathFormula::Until(Box::new(a), Box::new(b))
    }

    pub fn bounded_until(a: PathFormula, b: PathFormula, bound: StepBound) -> Self {
        PathFormula::BoundedUntil(Box::new(a), Box::new(b), bound)
    }

    pub fn as_state(&self) -> Option<&StateFormula> {
        match self {
            PathFormula::State(s) => Some(s),
            _ => None,
        }
    }

    fn visit_states<'a>(&'a self, f: &mut impl FnMut(&'a StateFormula)) {
        match self {
            PathFormula::State(s) | PathFormula::Next(s) | PathFormula::Globally(s) => s.visit(f),
            PathFormula::Until(a, b) | PathFormula::BoundedUntil(a, b, _) => {
                a.visit_states(f);
                b.visit_states(f);
            }
        }
    }
}

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateFormula::True => f.write_str("true"),
            StateFormula::Atom(a) => write!(f, "\"{a}\""),
            StateFormula::Comparison { feature, op, value } => write!(f, "{feature}{}{value}", op.symbol()),
            StateFormula::And(a, b) => {
                write_and_operand(f, a)?;
                f.write_str(" & ")?;
                write_and_operand(f, b)
            }
            StateFormula::Not(a) => write!(f, "!({a})"),
            StateFormula::Prob { quantifier, bound, path } => {
                f.write_str(match quantifier {
                    Quantifier::Plain => "P",
                    Quantifier::Max => "Pmax",
                    Quantifier::Min => "Pmin",
                })?;
                match bound {
                    None => f.write_str("=?")?,
                    Some(b) => write!(f, "{}{}", b.op.symbol(), b.p)?,
                }
                write!(f, " [ {path} ]")
            }
        }
    }
}

// `&` is left-associative, so only a right-nested conjunction needs parentheses;
// both sides are wrapped for readability.
fn write_and_operand(f: &mut fmt::Formatter<'_>, s: &StateFormula) -> fmt::Result {
    match s {
        StateFormula::And(..) => write!(f, "({s})"),
        _ => write!(f, "{s}"),
    }
}

// Operands of U, X and G: anything looser than a primary gets parentheses.
fn write_path_operand(f: &mut fmt::Formatter<'_>, p: &PathFormula) -> fmt::Result {
    match p {
        PathFormula::State(StateFormula::And(..)) => write!(f, "({p})"),
        PathFormula::State(_) => write!(f, "{p}"),
        _ => write!(f, "({p})"),
    }
}

fn write_step_bound(f: &mut fmt::Formatter<'_>, b: &StepBound) -> fmt::Result {
    write!(f, "{}{}", if b.strict { "<" } else { "<=" }, b.steps)
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathFormula::State(s) => write!(f, "{s}"),
            PathFormula::Next(s) => {
                f.write_str("X ")?;
                write_path_operand(f, &PathFormula::State(s.clone()))
            }
            PathFormula::Globally(s) => {
                f.write_str("G ")?;
                write_path_operand(f, &PathFormula::State(s.clone()))
            }
            PathFormula::Until(a, b) => {
                write_path_operand(f, a)?;
                f.write_str(" U ")?;
                write_path_operand(f, b)
            }
            PathFormula::BoundedUntil(a, b, bound) => {
                write_path_operand(f, a)?;
                f.write_str(" U")?;
                write_step_bound(f, bound)?;
                f.write_str(" ")?;
                write_path_operand(f, b)
            }
        }
    }
}

/// Canonical text of a formula; `parse_property(&format_property(f)) == Ok(f)`.
pub fn format_property(f: &StateFormula) -> String {
    f.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_finally() {
        let f = StateFormula::query(Quantifier::Plain, PathFormula::finally(PathFormula::State(StateFormula::atom("won_1"))));
        assert_eq!(format_property(&f), "P=? [ true U \"won_1\" ]");
    }

    #[test]
    fn negated_comparison() {
        assert_eq!(StateFormula::not(StateFormula::cmp("hp1", CmpOp::Le, 5)).to_string(), "!(hp1<=5)");
    }

    #[test]
    fn bounded_and_quantified() {
        let f = StateFormula::Prob {
            quantifier: Quantifier::Max,
            bound: Some(ProbBound { op: CmpOp::Ge, p: 0.25 }),
            path: Box::new(PathFormula::bounded_until(
                PathFormula::State(StateFormula::and(StateFormula::True, StateFormula::atom("a"))),
                PathFormula::State(StateFormula::atom("b")),
                StepBound { strict: true, steps: 4 },
            )),
        };
        assert_eq!(f.to_string(), "Pmax>=0.25 [ (true & \"a\") U<4 \"b\" ]");
    }

    #[test]
    fn collects_labels_and_features() {
        let f = parse_property("P=? [ (\"a\" & x=1) U (P>0.5 [ X \"b\" ] & !\"a\") ]").unwrap();
        assert_eq!(f.labels(), vec!["a", "b"]);
        assert_eq!(f.features(), vec!["x"]);
    }
}
