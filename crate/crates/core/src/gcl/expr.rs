//! Resolved expressions: identifiers are already bound to state features or
//! folded constants.

use std::fmt;

use super::GclError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Bool(bool),
}

impl Value {
    pub fn ty(self) -> Ty {
        match self {
            Value::Int(_) => Ty::Int,
            Value::Real(_) => Ty::Real,
            Value::Bool(_) => Ty::Bool,
        }
    }

    pub fn as_f64(self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(i as f64),
            Value::Real(r) => Some(r),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_int(self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(i),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ty {
    Int,
    Real,
    Bool,
}

impl Ty {
    pub fn is_numeric(self) -> bool {
        matches!(self, Ty::Int | Ty::Real)
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ty::Int => "int",
            Ty::Real => "double",
            Ty::Bool => "bool",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Min,
    Max,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&",
            BinOp::Or => "|",
            BinOp::Min => "min",
            BinOp::Max => "max",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Lit(Value),
    /// Feature of the current state.
    Var(usize),
    /// Feature of the successor state (reward expressions only).
    Next(usize),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Lit(_) => true,
            Expr::Var(_) | Expr::Next(_) => false,
            Expr::Neg(e) | Expr::Not(e) => e.is_constant(),
            Expr::Bin(_, a, b) => a.is_constant() && b.is_constant(),
            Expr::Ite(c, a, b) => c.is_constant() && a.is_constant() && b.is_constant(),
        }
    }

    pub fn mentions_next(&self) -> bool {
        match self {
            Expr::Next(_) => true,
            Expr::Lit(_) | Expr::Var(_) => false,
            Expr::Neg(e) | Expr::Not(e) => e.mentions_next(),
            Expr::Bin(_, a, b) => a.mentions_next() || b.mentions_next(),
            Expr::Ite(c, a, b) => c.mentions_next() || a.mentions_next() || b.mentions_next(),
        }
    }

    /// Evaluates over the current state and, for primed references, the successor.
    pub fn eval(&self, cur: &[i32], next: Option<&[i32]>) -> Result<Value, GclError> {
        Ok(match self {
            Expr::Lit(v) => *v,
            Expr::Var(i) => Value::Int(cur[*i] as i64),
            Expr::Next(i) => match next {
                Some(n) => Value::Int(n[*i] as i64),
                None => return Err(GclError::Eval("primed variable outside a reward".into())),
            },
            Expr::Neg(e) => match e.eval(cur, next)? {
                Value::Int(i) => Value::Int(-i),
                Value::Real(r) => Value::Real(-r),
                Value::Bool(_) => return Err(GclError::Eval("negating a boolean".into())),
            },
            Expr::Not(e) => match e.eval(cur, next)? {
                Value::Bool(b) => Value::Bool(!b),
                _ => return Err(GclError::Eval("`!` on a number".into())),
            },
            Expr::Bin(BinOp::And, a, b) => {
                if !a.eval_bool(cur, next)? {
                    Value::Bool(false)
                } else {
                    Value::Bool(b.eval_bool(cur, next)?)
                }
            }
            Expr::Bin(BinOp::Or, a, b) => {
                if a.eval_bool(cur, next)? {
                    Value::Bool(true)
                } else {
                    Value::Bool(b.eval_bool(cur, next)?)
                }
            }
            Expr::Bin(op, a, b) => apply(*op, a.eval(cur, next)?, b.eval(cur, next)?)?,
            Expr::Ite(c, a, b) => {
                if c.eval_bool(cur, next)? {
                    a.eval(cur, next)?
                } else {
                    b.eval(cur, next)?
                }
            }
        })
    }

    pub fn eval_bool(&self, cur: &[i32], next: Option<&[i32]>) -> Result<bool, GclError> {
        self.eval(cur, next)?
            .as_bool()
            .ok_or_else(|| GclError::Eval("expected a boolean".into()))
    }

    /// Replaces every constant subtree by its value.
    pub fn fold(self) -> Result<Expr, GclError> {
        if self.is_constant() {
            return Ok(Expr::Lit(self.eval(&[], None)?));
        }
        Ok(match self {
            Expr::Neg(e) => Expr::Neg(Box::new(e.fold()?)),
            Expr::Not(e) => Expr::Not(Box::new(e.fold()?)),
            Expr::Bin(op, a, b) => Expr::Bin(op, Box::new(a.fold()?), Box::new(b.fold()?)),
            Expr::Ite(c, a, b) => Expr::Ite(Box::new(c.fold()?), Box::new(a.fold()?), Box::new(b.fold()?)),
            other => other,
        })
    }
}

/// Binary operator semantics. Integer division truncates toward zero.
pub fn apply(op: BinOp, a: Value, b: Value) -> Result<Value, GclError> {
    use Value::*;
    let mismatch = || GclError::Eval(format!("cannot apply `{}` to {} and {}", op.symbol(), a.ty(), b.ty()));
    Ok(match op {
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Min | BinOp::Max => match (a, b) {
            (Int(x), Int(y)) => Int(match op {
                BinOp::Add => x.checked_add(y),
                BinOp::Sub => x.checked_sub(y),
                BinOp::Mul => x.checked_mul(y),
                BinOp::Min => Some(x.min(y)),
                _ => Some(x.max(y)),
            }
            .ok_or_else(|| GclError::Eval("integer overflow".into()))?),
            _ => {
                let (x, y) = (a.as_f64().ok_or_else(mismatch)?, b.as_f64().ok_or_else(mismatch)?);
                Real(match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Min => x.min(y),
                    _ => x.max(y),
                })
            }
        },
        BinOp::Div => match (a, b) {
            (Int(_), Int(0)) => return Err(GclError::DivisionByZero),
            (Int(x), Int(y)) => Int(x.checked_div(y).ok_or_else(|| GclError::Eval("integer overflow".into()))?),
            _ => {
                let (x, y) = (a.as_f64().ok_or_else(mismatch)?, b.as_f64().ok_or_else(mismatch)?);
                if y == 0.0 {
                    return Err(GclError::DivisionByZero);
                }
                Real(x / y)
            }
        },
        BinOp::Eq | BinOp::Ne => {
            let eq = match (a, b) {
                (Bool(x), Bool(y)) => x == y,
                (Int(x), Int(y)) => x == y,
                (Bool(_), _) | (_, Bool(_)) => return Err(mismatch()),
                _ => a.as_f64() == b.as_f64(),
            };
            Bool(if op == BinOp::Eq { eq } else { !eq })
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let ord = match (a, b) {
                (Int(x), Int(y)) => x.partial_cmp(&y),
                (Bool(_), _) | (_, Bool(_)) => return Err(mismatch()),
                _ => a.as_f64().unwrap().partial_cmp(&b.as_f64().unwrap()),
            }
            .ok_or_else(|| GclError::Eval("comparison with NaN".into()))?;
            use std::cmp::Ordering::*;
            Bool(match op {
                BinOp::Lt => ord == Less,
                BinOp::Le => ord != Greater,
                BinOp::Gt => ord == Greater,
                _ => ord != Less,
            })
        }
        BinOp::And | BinOp::Or => match (a, b) {
            (Bool(x), Bool(y)) => Bool(if op == BinOp::And { x && y } else { x || y }),
            _ => return Err(mismatch()),
        },
    })
}

/// Result type of `op` applied to operands of types `a` and `b`, if well-typed.
pub fn result_type(op: BinOp, a: Ty, b: Ty) -> Option<Ty> {
    match op {
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Min | BinOp::Max => {
            if a == Ty::Int && b == Ty::Int {
                Some(Ty::Int)
            } else if a.is_numeric() && b.is_numeric() {
                Some(Ty::Real)
            } else {
                None
            }
        }
        BinOp::Eq | BinOp::Ne => {
            if (a == Ty::Bool) == (b == Ty::Bool) {
                Some(Ty::Bool)
            } else {
                None
            }
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            (a.is_numeric() && b.is_numeric()).then_some(Ty::Bool)
        }
        BinOp::And | BinOp::Or => (a == Ty::Bool && b == Ty::Bool).then_some(Ty::Bool),
    }
}

/// Prints with explicit parentheses; `names` maps feature indices back to identifiers.
pub struct Display<'a> {
    pub expr: &'a Expr,
    pub names: &'a [String],
}

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |e| Display { expr: e, names: self.names };
        match self.expr {
            Expr::Lit(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "{}", self.names[*i]),
            Expr::Next(i) => write!(f, "{}'", self.names[*i]),
            Expr::Neg(e) => write!(f, "-({})", sub(e)),
            Expr::Not(e) => write!(f, "!({})", sub(e)),
            Expr::Bin(op @ (BinOp::Min | BinOp::Max), a, b) => {
                write!(f, "{}({}, {})", op.symbol(), sub(a), sub(b))
            }
            Expr::Bin(op, a, b) => write!(f, "({} {} {})", sub(a), op.symbol(), sub(b)),
            Expr::Ite(c, a, b) => write!(f, "({} ? {} : {})", sub(c), sub(a), sub(b)),
        }
    }
}
