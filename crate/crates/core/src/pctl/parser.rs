use super::{CmpOp, PathFormula, PctlError, ProbBound, Quantifier, StateFormula, StepBound};
use crate::gcl::lexer::{tokenize, Tok, Token};
use crate::gcl::GclError;

const RESERVED: &[&str] = &["true", "false", "P", "Pmax", "Pmin", "X", "U", "F", "G", "W", "R", "Rmax", "Rmin"];

pub fn parse_property(text: &str) -> Result<StateFormula, PctlError> {
    let toks = tokenize(text).map_err(lex_error)?;
    let mut p = Parser { toks, pos: 0 };
    let f = p.state_and()?;
    p.expect_eof()?;
    Ok(f)
}

fn lex_error(e: GclError) -> PctlError {
    match e {
        GclError::Syntax { line, col, expected, found } => PctlError::Syntax { line, col, expected, found },
        other => PctlError::Syntax { line: 1, col: 1, expected: "a property".into(), found: other.to_string() },
    }
}

/// `feature op int` inside a quoted atom, if the text has exactly that shape.
fn quoted_comparison(text: &str) -> Option<StateFormula> {
    let toks = tokenize(text).ok()?;
    let t: Vec<&Tok> = toks.iter().map(|t| &t.tok).collect();
    let (name, op, rest) = match t.as_slice() {
        [Tok::Ident(n), op, rest @ ..] => (n, cmp_op(op)?, rest),
        _ => return None,
    };
    if RESERVED.contains(&name.as_str()) {
        return None;
    }
    let value = match rest {
        [Tok::Int(v), Tok::Eof] => *v,
        [Tok::Minus, Tok::Int(v), Tok::Eof] => v.checked_neg()?,
        _ => return None,
    };
    Some(StateFormula::Comparison { feature: name.clone(), op, value })
}

fn cmp_op(t: &Tok) -> Option<CmpOp> {
    Some(match t {
        Tok::Eq => CmpOp::Eq,
        Tok::Neq => CmpOp::Ne,
        Tok::Lt => CmpOp::Lt,
        Tok::Le => CmpOp::Le,
        Tok::Gt => CmpOp::Gt,
        Tok::Ge => CmpOp::Ge,
        _ => return None,
    })
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
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

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax<T>(&self, expected: &str) -> Result<T, PctlError> {
        let (line, col) = self.here();
        Err(PctlError::Syntax { line, col, expected: expected.into(), found: self.peek().describe() })
    }

    fn unsupported<T>(&self, at: (usize, usize), message: &str) -> Result<T, PctlError> {
        Err(PctlError::Unsupported { line: at.0, col: at.1, message: message.into() })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), PctlError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.syntax(what)
        }
    }

    fn expect_eof(&mut self) -> Result<(), PctlError> {
        match self.peek() {
            Tok::Eof => Ok(()),
            Tok::Ident(w) if w == "W" => self.unsupported(self.here(), "weak until (W) is not supported"),
            Tok::Ident(u) if u == "U" => self.unsupported(
                self.here(),
                "until must appear inside a probability operator, e.g. P=? [ a U b ]",
            ),
            _ => self.syntax("end of property"),
        }
    }

    fn is_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == s)
    }

    // ---- state formulas ----

    fn state_and(&mut self) -> Result<StateFormula, PctlError> {
        let mut lhs = self.state_unary()?;
        while *self.peek() == Tok::And {
            self.bump();
            let rhs = self.state_unary()?;
            lhs = StateFormula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn state_unary(&mut self) -> Result<StateFormula, PctlError> {
        if *self.peek() == Tok::Not {
            self.bump();
            return Ok(StateFormula::not(self.state_unary()?));
        }
        if *self.peek() == Tok::LParen {
            self.bump();
            let f = self.state_and()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(f);
        }
        self.state_primary()
    }

    /// Primaries shared by state and path contexts (everything except parentheses).
    fn state_primary(&mut self) -> Result<StateFormula, PctlError> {
        let at = self.here();
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(quoted_comparison(&s).unwrap_or(StateFormula::Atom(s)))
            }
            Tok::Ident(w) => match w.as_str() {
                "true" => {
                    self.bump();
                    Ok(StateFormula::True)
                }
                "false" => {
                    self.bump();
                    Ok(StateFormula::not(StateFormula::True))
                }
                "P" | "Pmax" | "Pmin" => self.prob(),
                "R" | "Rmax" | "Rmin" => self.unsupported(at, "the reward operator (R) is not supported"),
                "W" => self.unsupported(at, "weak until (W) is not supported"),
                "X" | "U" | "F" | "G" => self.unsupported(
                    at,
                    &format!("path operator `{w}` must appear inside a probability operator, e.g. P=? [ F \"goal\" ]"),
                ),
                _ => {
                    self.bump();
                    match cmp_op(self.peek()) {
                        Some(op) => {
                            self.bump();
                            let value = self.int_literal()?;
                            Ok(StateFormula::Comparison { feature: w, op, value })
                        }
                        None => Ok(StateFormula::Atom(w)),
                    }
                }
            },
            _ => self.syntax("a state formula"),
        }
    }

    fn int_literal(&mut self) -> Result<i64, PctlError> {
        let neg = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            _ => self.syntax("an integer"),
        }
    }

    fn prob(&mut self) -> Result<StateFormula, PctlError> {
        let quantifier = match self.bump() {
            Tok::Ident(w) if w == "Pmax" => Quantifier::Max,
            Tok::Ident(w) if w == "Pmin" => Quantifier::Min,
            _ => Quantifier::Plain,
        };
        // P(φ) is shorthand for P=? [ φ ]
        if *self.peek() == Tok::LParen {
            self.bump();
            let path = self.path_and()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(StateFormula::Prob { quantifier, bound: None, path: Box::new(path) });
        }
        let bound = if *self.peek() == Tok::Eq && *self.peek_at(1) == Tok::Question {
            self.bump();
            self.bump();
            None
        } else {
            let op = match self.peek() {
                Tok::Lt => CmpOp::Lt,
                Tok::Le => CmpOp::Le,
                Tok::Gt => CmpOp::Gt,
                Tok::Ge => CmpOp::Ge,
                _ => return self.syntax("`=?` or a bound such as `>=0.5`"),
            };
            self.bump();
            let p = match self.peek().clone() {
                Tok::Int(v) => v as f64,
                Tok::Real(v) => v,
                _ => return self.syntax("a probability"),
            };
            self.bump();
            if !(0.0..=1.0).contains(&p) {
                return Err(PctlError::BoundOutOfRange(p));
            }
            Some(ProbBound { op, p })
        };
        self.expect(Tok::LBracket, "`[`")?;
        let path = self.path_and()?;
        self.expect(Tok::RBracket, "`]`")?;
        Ok(StateFormula::Prob { quantifier, bound, path: Box::new(path) })
    }

    // ---- path formulas ----

    fn path_and(&mut self) -> Result<PathFormula, PctlError> {
        let mut lhs = self.path_until()?;
        while *self.peek() == Tok::And {
            let op_at = self.here();
            self.bump();
            let rhs = self.path_until()?;
            lhs = match (lhs, rhs) {
                (PathFormula::State(a), PathFormula::State(b)) => PathFormula::State(StateFormula::and(a, b)),
                _ => {
                    return self.unsupported(
                        op_at,
                        "conjunction of path formulas is not PCTL; parenthesize state operands, e.g. (a & b) U c",
                    );
                }
            };
        }
        Ok(lhs)
    }

    fn path_until(&mut self) -> Result<PathFormula, PctlError> {
        let mut lhs = self.path_unary()?;
        loop {
            if self.is_ident("U") {
                self.bump();
                let bound = self.step_bound()?;
                let rhs = self.path_unary()?;
                lhs = match bound {
                    None => PathFormula::until(lhs, rhs),
                    Some(b) => PathFormula::bounded_until(lhs, rhs, b),
                };
            } else if self.is_ident("W") {
                return self.unsupported(self.here(), "weak until (W) is not supported");
            } else {
                return Ok(lhs);
            }
        }
    }

    fn step_bound(&mut self) -> Result<Option<StepBound>, PctlError> {
        let strict = match self.peek() {
            Tok::Lt => true,
            Tok::Le => false,
            _ => return Ok(None),
        };
        self.bump();
        match self.peek().clone() {
            Tok::Int(v) if v >= 0 => {
                self.bump();
                Ok(Some(StepBound { strict, steps: v as u64 }))
            }
            _ => self.syntax("a non-negative step bound"),
        }
    }

    fn path_unary(&mut self) -> Result<PathFormula, PctlError> {
        let at = self.here();
        if *self.peek() == Tok::Not {
            self.bump();
            return match self.path_unary()? {
                PathFormula::State(s) => Ok(PathFormula::State(StateFormula::not(s))),
                _ => self.unsupported(at, "negation of a path formula is not PCTL"),
            };
        }
        if let Tok::Ident(w) = self.peek().clone() {
            match w.as_str() {
                "X" | "G" => {
                    self.bump();
                    let operand = self.path_unary()?;
                    let Some(s) = operand.as_state().cloned() else {
                        return self.unsupported(at, &format!("`{w}` takes a state formula operand"));
                    };
                    return Ok(if w == "X" { PathFormula::Next(s) } else { PathFormula::Globally(s) });
                }
                "F" => {
                    self.bump();
                    let bound = self.step_bound()?;
                    let operand = self.path_unary()?;
                    let t = PathFormula::State(StateFormula::True);
                    return Ok(match bound {
                        None => PathFormula::until(t, operand),
                        Some(b) => PathFormula::bounded_until(t, operand, b),
                    });
                }
                _ => {}
            }
        }
        if *self.peek() == Tok::LParen {
            self.bump();
            let p = self.path_and()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(p);
        }
        Ok(PathFormula::State(self.state_primary()?))
    }
}
