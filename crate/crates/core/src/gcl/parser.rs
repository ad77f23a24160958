//! Recursive-descent parser for the guarded-command model language.
//!
//! Identifiers are resolved while parsing and must be declared before use.

use std::collections::{BTreeMap, HashMap};

use super::expr::{result_type, BinOp, Expr, Ty, Value};
use super::lexer::{tokenize, Tok, Token};
use super::GclError;

#[derive(Clone, Debug)]
pub(crate) struct VarDecl {
    pub name: String,
    pub lo: i32,
    pub hi: i32,
    pub init: i32,
}

#[derive(Clone, Debug)]
pub(crate) struct RawCommand {
    pub action: String,
    pub guard: Expr,
    pub updates: Vec<(f64, Vec<(usize, Expr)>)>,
    pub line: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct RawRewardItem {
    pub action: Option<String>,
    pub guard: Expr,
    pub value: Expr,
}

#[derive(Debug, Default)]
pub(crate) struct ProgramParts {
    pub constants: Vec<(String, Value)>,
    pub vars: Vec<VarDecl>,
    pub commands: Vec<RawCommand>,
    pub labels: Vec<(String, Expr)>,
    pub rewards: Vec<(String, Vec<RawRewardItem>)>,
    pub scope: Scope,
}

#[derive(Clone, Debug)]
enum Binding {
    Const(Value),
    Formula(Expr, Ty),
    Var(usize),
}

/// Names visible to an expression.
#[derive(Clone, Debug, Default)]
pub struct Scope {
    bindings: HashMap<String, Binding>,
}

impl Scope {
    pub fn from_variables<'a>(names: impl IntoIterator<Item = &'a str>) -> Self {
        let mut s = Scope::default();
        for (i, n) in names.into_iter().enumerate() {
            s.bindings.insert(n.to_string(), Binding::Var(i));
        }
        s
    }

    fn get(&self, name: &str) -> Option<&Binding> {
        self.bindings.get(name)
    }
}

const KEYWORDS: &[&str] = &[
    "const", "int", "double", "init", "label", "rewards", "endrewards", "formula", "true", "false",
    "min", "max",
];

struct Parser<'o> {
    toks: Vec<Token>,
    pos: usize,
    scope: Scope,
    overrides: &'o BTreeMap<String, Value>,
    used_overrides: Vec<String>,
    allow_next: bool,
}

pub(crate) fn parse_parts(src: &str, overrides: &BTreeMap<String, Value>) -> Result<ProgramParts, GclError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
        scope: Scope::default(),
        overrides,
        used_overrides: Vec::new(),
        allow_next: false,
    };
    let parts = p.program()?;
    for k in overrides.keys() {
        if !p.used_overrides.contains(k) {
            return Err(GclError::UnknownConstant(k.clone()));
        }
    }
    Ok(parts)
}

/// Parses a standalone expression against `scope`; used for policy rules and queries.
pub fn parse_expr_in(src: &str, scope: &Scope) -> Result<(Expr, Ty), GclError> {
    let empty = BTreeMap::new();
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
        scope: scope.clone(),
        overrides: &empty,
        used_overrides: Vec::new(),
        allow_next: false,
    };
    let (e, ty) = p.expr()?;
    p.expect(Tok::Eof, "end of expression")?;
    Ok((e.fold()?, ty))
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> GclError {
        let t = &self.toks[self.pos];
        GclError::Syntax { line: t.line, col: t.col, expected: expected.to_string(), found: t.tok.describe() }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<Token, GclError> {
        if *self.peek() == tok {
            Ok(self.advance())
        } else {
            Err(self.error(expected))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), GclError> {
        if self.is_kw(kw) {
            self.advance();
            Ok(())
        } else {
            Err(self.error(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self, expected: &str) -> Result<(String, usize, usize), GclError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let t = self.advance();
                Ok((s, t.line, t.col))
            }
            _ => Err(self.error(expected)),
        }
    }

    fn string(&mut self, expected: &str) -> Result<String, GclError> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.error(expected)),
        }
    }

    fn declare(&mut self, name: &str, line: usize, col: usize, b: Binding) -> Result<(), GclError> {
        if self.scope.get(name).is_some() {
            return Err(GclError::DuplicateDeclaration { name: name.to_string(), line, col });
        }
        self.scope.bindings.insert(name.to_string(), b);
        Ok(())
    }

    fn program(&mut self) -> Result<ProgramParts, GclError> {
        let mut parts = ProgramParts::default();
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::LBracket => parts.commands.push(self.command()?),
                Tok::Ident(kw) if kw == "const" => self.constant(&mut parts)?,
                Tok::Ident(kw) if kw == "formula" => self.formula()?,
                Tok::Ident(kw) if kw == "label" => {
                    let (line, col) = self.here();
                    self.advance();
                    let name = self.string("label name in double quotes")?;
                    if parts.labels.iter().any(|(n, _)| *n == name) {
                        return Err(GclError::DuplicateDeclaration { name, line, col });
                    }
                    self.expect(Tok::Eq, "`=`")?;
                    let e = self.typed_expr(Ty::Bool)?;
                    self.expect(Tok::Semi, "`;`")?;
                    parts.labels.push((name, e));
                }
                Tok::Ident(kw) if kw == "rewards" => {
                    let (line, col) = self.here();
                    self.advance();
                    let name = self.string("reward structure name in double quotes")?;
                    if parts.rewards.iter().any(|(n, _)| *n == name) {
                        return Err(GclError::DuplicateDeclaration { name, line, col });
                    }
                    let items = self.reward_items()?;
                    parts.rewards.push((name, items));
                }
                Tok::Ident(_) if *self.peek_at(1) == Tok::Colon => self.variable(&mut parts)?,
                _ => return Err(self.error("a declaration, command, label or reward block")),
            }
        }
        parts.scope = self.scope.clone();
        Ok(parts)
    }

    fn constant(&mut self, parts: &mut ProgramParts) -> Result<(), GclError> {
        self.advance();
        let ty = if self.is_kw("int") {
            Ty::Int
        } else if self.is_kw("double") {
            Ty::Real
        } else {
            return Err(self.error("`int` or `double`"));
        };
        self.advance();
        let (name, line, col) = self.ident("constant name")?;
        self.expect(Tok::Eq, "`=`")?;
        let (eline, ecol) = self.here();
        let (e, ety) = self.expr()?;
        self.expect(Tok::Semi, "`;`")?;
        let mut v = self.constant_value(e, eline, ecol, "constant definition")?;
        if let Some(&ov) = self.overrides.get(&name) {
            v = ov;
            self.used_overrides.push(name.clone());
        }
        let v = match (ty, v) {
            (Ty::Int, Value::Int(_)) => v,
            (Ty::Real, Value::Int(i)) => Value::Real(i as f64),
            (Ty::Real, Value::Real(_)) => v,
            _ => {
                return Err(GclError::Type {
                    line: eline,
                    col: ecol,
                    message: format!("constant `{name}` declared {ty} but given {ety}"),
                })
            }
        };
        self.declare(&name, line, col, Binding::Const(v))?;
        parts.constants.push((name, v));
        Ok(())
    }

    fn formula(&mut self) -> Result<(), GclError> {
        self.advance();
        let (name, line, col) = self.ident("formula name")?;
        self.expect(Tok::Eq, "`=`")?;
        let (e, ty) = self.expr()?;
        self.expect(Tok::Semi, "`;`")?;
        self.declare(&name, line, col, Binding::Formula(e, ty))
    }

    fn variable(&mut self, parts: &mut ProgramParts) -> Result<(), GclError> {
        let (name, line, col) = self.ident("variable name")?;
        self.expect(Tok::Colon, "`:`")?;
        self.expect(Tok::LBracket, "`[`")?;
        let lo = self.int_constant("lower bound")?;
        self.expect(Tok::DotDot, "`..`")?;
        let hi = self.int_constant("upper bound")?;
        self.expect(Tok::RBracket, "`]`")?;
        self.expect_kw("init")?;
        let (iline, icol) = self.here();
        let init = self.int_constant("initial value")?;
        self.expect(Tok::Semi, "`;`")?;
        if lo > hi {
            return Err(GclError::InvalidDeclaration { line, col, message: format!("`{name}` has empty range [{lo}..{hi}]") });
        }
        if init < lo || init > hi {
            return Err(GclError::InvalidDeclaration {
                line: iline,
                col: icol,
                message: format!("initial value {init} of `{name}` outside [{lo}..{hi}]"),
            });
        }
        self.declare(&name, line, col, Binding::Var(parts.vars.len()))?;
        parts.vars.push(VarDecl { name, lo, hi, init });
        Ok(())
    }

    fn int_constant(&mut self, what: &str) -> Result<i32, GclError> {
        let (line, col) = self.here();
        let (e, _) = self.additive()?;
        match self.constant_value(e, line, col, what)? {
            Value::Int(i) if i32::try_from(i).is_ok() => Ok(i as i32),
            other => Err(GclError::Type { line, col, message: format!("{what} must be a 32-bit integer, found {other}") }),
        }
    }

    fn constant_value(&self, e: Expr, line: usize, col: usize, what: &str) -> Result<Value, GclError> {
        if !e.is_constant() {
            return Err(GclError::NonConstant { line, col, what: what.to_string() });
        }
        e.eval(&[], None).map_err(|err| err.at(line, col))
    }

    fn command(&mut self) -> Result<RawCommand, GclError> {
        let open = self.expect(Tok::LBracket, "`[`")?;
        let (action, aline, acol) = self.ident("action name")?;
        if action == crate::model::SELF_LOOP_NAME {
            return Err(GclError::InvalidDeclaration { line: aline, col: acol, message: format!("`{action}` is reserved") });
        }
        self.expect(Tok::RBracket, "`]`")?;
        let guard = self.typed_expr(Ty::Bool)?;
        self.expect(Tok::Arrow, "`->`")?;
        let mut updates = Vec::new();
        loop {
            updates.push(self.update()?);
            if *self.peek() == Tok::Plus {
                self.advance();
            } else {
                break;
            }
        }
        self.expect(Tok::Semi, "`;` or `+`")?;
        Ok(RawCommand { action, guard, updates, line: open.line })
    }

    fn starts_assignments(&self) -> bool {
        (*self.peek() == Tok::LParen
            && matches!(self.peek_at(1), Tok::Ident(_))
            && *self.peek_at(2) == Tok::Prime)
            || (self.is_kw("true") && matches!(self.peek_at(1), Tok::Semi | Tok::Plus))
    }

    fn update(&mut self) -> Result<(f64, Vec<(usize, Expr)>), GclError> {
        let prob = if self.starts_assignments() {
            1.0
        } else {
            let (line, col) = self.here();
            let (e, ty) = self.expr()?;
            if !ty.is_numeric() {
                return Err(GclError::Type { line, col, message: format!("probability must be numeric, found {ty}") });
            }
            let v = self.constant_value(e, line, col, "update probability")?;
            let p = v.as_f64().unwrap();
            if p.is_nan() || p < 0.0 {
                return Err(GclError::Type { line, col, message: format!("negative probability {p}") });
            }
            self.expect(Tok::Colon, "`:`")?;
            p
        };
        let mut assigns: Vec<(usize, Expr)> = Vec::new();
        if self.is_kw("true") {
            self.advance();
            return Ok((prob, assigns));
        }
        loop {
            self.expect(Tok::LParen, "`(` starting an assignment")?;
            let (name, line, col) = self.ident("variable name")?;
            let var = match self.scope.get(&name) {
                Some(Binding::Var(i)) => *i,
                Some(_) => {
                    return Err(GclError::Type { line, col, message: format!("`{name}` is not a variable") })
                }
                None => return Err(GclError::UndeclaredIdentifier { name, line, col }),
            };
            if assigns.iter().any(|(v, _)| *v == var) {
                return Err(GclError::DuplicateDeclaration { name, line, col });
            }
            self.expect(Tok::Prime, "`'`")?;
            self.expect(Tok::Eq, "`=`")?;
            let e = self.typed_expr(Ty::Int)?;
            self.expect(Tok::RParen, "`)`")?;
            assigns.push((var, e));
            if *self.peek() == Tok::And {
                self.advance();
            } else {
                break;
            }
        }
        Ok((prob, assigns))
    }

    fn reward_items(&mut self) -> Result<Vec<RawRewardItem>, GclError> {
        let mut items = Vec::new();
        self.allow_next = true;
        while !self.is_kw("endrewards") {
            if *self.peek() == Tok::Eof {
                self.allow_next = false;
                return Err(self.error("`endrewards`"));
            }
            let action = if *self.peek() == Tok::LBracket {
                self.advance();
                let (a, _, _) = self.ident("action name")?;
                self.expect(Tok::RBracket, "`]`")?;
                Some(a)
            } else {
                None
            };
            let guard = self.typed_expr(Ty::Bool)?;
            self.expect(Tok::Colon, "`:`")?;
            let (line, col) = self.here();
            let (value, ty) = self.expr()?;
            if !ty.is_numeric() {
                return Err(GclError::Type { line, col, message: format!("reward must be numeric, found {ty}") });
            }
            self.expect(Tok::Semi, "`;`")?;
            items.push(RawRewardItem { action, guard, value: value.fold()? });
        }
        self.allow_next = false;
        self.advance();
        Ok(items)
    }

    fn typed_expr(&mut self, want: Ty) -> Result<Expr, GclError> {
        let (line, col) = self.here();
        let (e, ty) = self.expr()?;
        let ok = ty == want || (want == Ty::Real && ty == Ty::Int);
        if !ok {
            return Err(GclError::Type { line, col, message: format!("expected {want} expression, found {ty}") });
        }
        e.fold().map_err(|err| err.at(line, col))
    }

    fn expr(&mut self) -> Result<(Expr, Ty), GclError> {
        let (line, col) = self.here();
        let (c, cty) = self.or()?;
        if *self.peek() != Tok::Question {
            return Ok((c, cty));
        }
        self.advance();
        if cty != Ty::Bool {
            return Err(GclError::Type { line, col, message: "condition of `?` must be boolean".into() });
        }
        let (a, aty) = self.expr()?;
        self.expect(Tok::Colon, "`:`")?;
        let (b, bty) = self.expr()?;
        let ty = if aty == bty {
            aty
        } else if aty.is_numeric() && bty.is_numeric() {
            Ty::Real
        } else {
            return Err(GclError::Type { line, col, message: format!("branches of `?` have types {aty} and {bty}") });
        };
        Ok((Expr::Ite(Box::new(c), Box::new(a), Box::new(b)), ty))
    }

    fn binary(&self, op: BinOp, (a, at): (Expr, Ty), (b, bt): (Expr, Ty), line: usize, col: usize) -> Result<(Expr, Ty), GclError> {
        let ty = result_type(op, at, bt).ok_or_else(|| GclError::Type {
            line,
            col,
            message: format!("operator {op:?} cannot combine {at} and {bt}"),
        })?;
        Ok((Expr::Bin(op, Box::new(a), Box::new(b)), ty))
    }

    fn or(&mut self) -> Result<(Expr, Ty), GclError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Or {
            let (line, col) = self.here();
            self.advance();
            let rhs = self.and()?;
            lhs = self.binary(BinOp::Or, lhs, rhs, line, col)?;
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<(Expr, Ty), GclError> {
        let mut lhs = self.not()?;
        while *self.peek() == Tok::And {
            let (line, col) = self.here();
            self.advance();
            let rhs = self.not()?;
            lhs = self.binary(BinOp::And, lhs, rhs, line, col)?;
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<(Expr, Ty), GclError> {
        if *self.peek() == Tok::Not {
            let (line, col) = self.here();
            self.advance();
            let (e, ty) = self.not()?;
            if ty != Ty::Bool {
                return Err(GclError::Type { line, col, message: format!("`!` applied to {ty}") });
            }
            return Ok((Expr::Not(Box::new(e)), Ty::Bool));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<(Expr, Ty), GclError> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::Eq => BinOp::Eq,
            Tok::Neq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        let (line, col) = self.here();
        self.advance();
        let rhs = self.additive()?;
        self.binary(op, lhs, rhs, line, col)
    }

    fn additive(&mut self) -> Result<(Expr, Ty), GclError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let (line, col) = self.here();
            self.advance();
            let rhs = self.multiplicative()?;
            lhs = self.binary(op, lhs, rhs, line, col)?;
        }
    }

    fn multiplicative(&mut self) -> Result<(Expr, Ty), GclError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            let (line, col) = self.here();
            self.advance();
            let rhs = self.unary()?;
            lhs = self.binary(op, lhs, rhs, line, col)?;
        }
    }

    fn unary(&mut self) -> Result<(Expr, Ty), GclError> {
        if *self.peek() == Tok::Minus {
            let (line, col) = self.here();
            self.advance();
            let (e, ty) = self.unary()?;
            if !ty.is_numeric() {
                return Err(GclError::Type { line, col, message: "unary `-` on a boolean".into() });
            }
            return Ok((Expr::Neg(Box::new(e)), ty));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<(Expr, Ty), GclError> {
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::Int(i) => {
                self.advance();
                Ok((Expr::Lit(Value::Int(i)), Ty::Int))
            }
            Tok::Real(r) => {
                self.advance();
                Ok((Expr::Lit(Value::Real(r)), Ty::Real))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.advance();
                Ok((Expr::Lit(Value::Bool(s == "true")), Ty::Bool))
            }
            Tok::Ident(s) if (s == "min" || s == "max") && *self.peek_at(1) == Tok::LParen => {
                self.advance();
                self.advance();
                let op = if s == "min" { BinOp::Min } else { BinOp::Max };
                let mut acc = self.expr()?;
                let mut n = 1;
                while *self.peek() == Tok::Comma {
                    self.advance();
                    let rhs = self.expr()?;
                    acc = self.binary(op, acc, rhs, line, col)?;
                    n += 1;
                }
                if n < 2 {
                    return Err(self.error("`,` (min/max take at least two arguments)"));
                }
                self.expect(Tok::RParen, "`)`")?;
                Ok(acc)
            }
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.advance();
                let primed = *self.peek() == Tok::Prime;
                match self.scope.get(&s).cloned() {
                    None => Err(GclError::UndeclaredIdentifier { name: s, line, col }),
                    Some(Binding::Var(i)) => {
                        if primed {
                            if !self.allow_next {
                                return Err(self.error("an operator (primed variables are only allowed in rewards)"));
                            }
                            self.advance();
                            Ok((Expr::Next(i), Ty::Int))
                        } else {
                            Ok((Expr::Var(i), Ty::Int))
                        }
                    }
                    Some(_) if primed => Err(GclError::Type { line, col, message: format!("`{s}` is not a variable") }),
                    Some(Binding::Const(v)) => Ok((Expr::Lit(v), v.ty())),
                    Some(Binding::Formula(e, ty)) => Ok((e, ty)),
                }
            }
            _ => Err(self.error("an expression")),
        }
    }
}
