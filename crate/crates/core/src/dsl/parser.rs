//! Recursive-descent parser for the diagonal-function language.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' ['-'] integer)?
//! atom    := number | '(' expr ')' | 'r' '[' index ']' | call | ident
//! index   := integer | ident
//! call    := ident '(' args ')'
//! ```
//!
//! Calls: `sum(i, e)`, `prod(i, e)`, `pow(e, k)`, `log`, `exp`, `sin`, `cos`,
//! `sqrt`, and the builtins `psum(k)`, `esym(k)`, `logdet` (or `logdet()`).
//! Any other bare identifier is a parameter.

use std::fmt;

use thiserror::Error;

use super::ast::{BinOp, Expr, Func, Index};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownIdentifier,
    Arity,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::UnknownIdentifier => "unknown identifier",
            ParseErrorKind::Arity => "arity mismatch",
        })
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
#[error("{kind} at offset {offset}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Byte offset into the source.
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    fn syntax(offset: usize, message: impl Into<String>) -> Self {
        ParseError {
            kind: ParseErrorKind::Syntax,
            offset,
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Caret => f.write_str("`^`"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'[' => Tok::LBracket,
            b']' => Tok::RBracket,
            b',' => Tok::Comma,
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v = text
                    .parse::<f64>()
                    .map_err(|_| ParseError::syntax(start, format!("malformed number `{text}`")))?;
                out.push((Tok::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ParseError::syntax(start, format!("unexpected character `{ch}`")));
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

const RESERVED: &[&str] = &[
    "sum", "prod", "pow", "log", "exp", "sin", "cos", "sqrt", "psum", "esym", "logdet", "r",
];

/// Index variables introduced by builtin expansions; `#` cannot appear in user identifiers.
const BUILTIN_INDEX: &str = "#k";

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    scope: Vec<String>,
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        scope: Vec::new(),
    };
    let e = p.expr()?;
    let (tok, offset) = p.peek_full();
    if *tok != Tok::End {
        return Err(ParseError::syntax(offset, format!("unexpected {tok}")));
    }
    Ok(e)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_full(&self) -> (&Tok, usize) {
        let (t, o) = &self.toks[self.pos];
        (t, *o)
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        let (tok, offset) = self.peek_full();
        if *tok == want {
            self.bump();
            Ok(())
        } else {
            Err(ParseError::syntax(offset, format!("expected {want}, found {tok}")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(match inner {
                Expr::Const(v) => Expr::Const(-v),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let k = self.signed_integer("exponent")?;
        Ok(Expr::Pow(Box::new(base), k))
    }

    fn signed_integer(&mut self, what: &str) -> Result<i32, ParseError> {
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let (tok, offset) = self.bump();
        match tok {
            Tok::Num(v) if v.fract() == 0.0 && v.abs() <= 1e6 => {
                Ok(if negative { -(v as i32) } else { v as i32 })
            }
            other => Err(ParseError::syntax(
                offset,
                format!("{what} must be an integer literal, found {other}"),
            )),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (tok, offset) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(name, offset),
            other => Err(ParseError::syntax(offset, format!("unexpected {other}"))),
        }
    }

    fn ident(&mut self, name: String, offset: usize) -> Result<Expr, ParseError> {
        if name == "r" {
            return self.variable();
        }
        if *self.peek() == Tok::LParen {
            return self.call(name, offset);
        }
        if name == "logdet" {
            return Ok(logdet());
        }
        if self.scope.contains(&name) {
            return Err(ParseError::syntax(
                offset,
                format!("index `{name}` may only appear inside r[...]"),
            ));
        }
        if RESERVED.contains(&name.as_str()) {
            return Err(ParseError::syntax(
                self.offset(),
                format!("expected `(` after `{name}`"),
            ));
        }
        Ok(Expr::Param(name))
    }

    fn variable(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() != Tok::LBracket {
            return Err(ParseError::syntax(
                self.offset(),
                "expected `[` after `r` (`r` is reserved for the variables)",
            ));
        }
        self.bump();
        let (tok, idx_offset) = self.bump();
        let index = match tok {
            Tok::Num(v) if v.fract() == 0.0 && v >= 1.0 => Index::Literal(v as usize),
            Tok::Num(_) => {
                return Err(ParseError::syntax(idx_offset, "literal index must be an integer >= 1"))
            }
            Tok::Ident(var) => {
                if !self.scope.contains(&var) {
                    return Err(ParseError {
                        kind: ParseErrorKind::UnknownIdentifier,
                        offset: idx_offset,
                        message: format!("index `{var}` is not bound by an enclosing sum or prod"),
                    });
                }
                Index::Bound(var)
            }
            other => {
                return Err(ParseError::syntax(idx_offset, format!("expected index, found {other}")))
            }
        };
        self.expect(Tok::RBracket)?;
        Ok(Expr::Var(index))
    }

    fn call(&mut self, name: String, offset: usize) -> Result<Expr, ParseError> {
        self.expect(Tok::LParen)?;
        match name.as_str() {
            "sum" | "prod" => {
                let (tok, var_offset) = self.bump();
                let var = match tok {
                    Tok::Ident(v) if !RESERVED.contains(&v.as_str()) => v,
                    other => {
                        return Err(ParseError::syntax(
                            var_offset,
                            format!("expected index variable, found {other}"),
                        ))
                    }
                };
                if *self.peek() != Tok::Comma {
                    return Err(self.arity(&name, 2, offset));
                }
                self.bump();
                self.scope.push(var.clone());
                let body = self.expr();
                self.scope.pop();
                let body = Box::new(body?);
                self.close(&name, 2, offset)?;
                Ok(if name == "sum" {
                    Expr::Sum(var, body)
                } else {
                    Expr::Prod(var, body)
                })
            }
            "pow" => {
                let base = self.expr()?;
                if *self.peek() != Tok::Comma {
                    return Err(self.arity(&name, 2, offset));
                }
                self.bump();
                let k = self.signed_integer("exponent")?;
                self.close(&name, 2, offset)?;
                Ok(Expr::Pow(Box::new(base), k))
            }
            "psum" | "esym" => {
                if *self.peek() == Tok::RParen {
                    return Err(self.arity(&name, 1, offset));
                }
                let k = self.signed_integer("builtin order")?;
                if k < 0 || (name == "psum" && k == 0) {
                    return Err(ParseError::syntax(offset, format!("{name}({k}) is not defined")));
                }
                self.close(&name, 1, offset)?;
                Ok(if name == "psum" {
                    psum(k)
                } else {
                    Expr::ESym(k as u32)
                })
            }
            "logdet" => {
                self.close(&name, 0, offset)?;
                Ok(logdet())
            }
            _ => {
                let Some(func) = Func::from_name(&name) else {
                    return Err(ParseError {
                        kind: ParseErrorKind::UnknownIdentifier,
                        offset,
                        message: format!("unknown function `{name}`"),
                    });
                };
                if *self.peek() == Tok::RParen {
                    return Err(self.arity(&name, 1, offset));
                }
                let arg = self.expr()?;
                self.close(&name, 1, offset)?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
        }
    }

    /// Consumes the closing paren; a comma here means too many arguments.
    fn close(&mut self, name: &str, expected: usize, offset: usize) -> Result<(), ParseError> {
        if *self.peek() == Tok::Comma {
            return Err(self.arity(name, expected, offset));
        }
        self.expect(Tok::RParen)
    }

    fn arity(&self, name: &str, expected: usize, offset: usize) -> ParseError {
        ParseError {
            kind: ParseErrorKind::Arity,
            offset,
            message: format!("`{name}` takes {expected} argument(s)"),
        }
    }
}

fn psum(k: i32) -> Expr {
    Expr::Sum(
        BUILTIN_INDEX.into(),
        Box::new(Expr::Pow(
            Box::new(Expr::Var(Index::Bound(BUILTIN_INDEX.into()))),
            k,
        )),
    )
}

fn logdet() -> Expr {
    Expr::Sum(
        BUILTIN_INDEX.into(),
        Box::new(Expr::Call(
            Func::Log,
            Box::new(Expr::Var(Index::Bound(BUILTIN_INDEX.into()))),
        )),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psum_expands_to_sum_of_powers() {
        assert_eq!(parse_expr("psum(2)").unwrap(), psum(2));
    }

    #[test]
    fn logdet_spellings_agree() {
        let a = parse_expr("logdet").unwrap();
        let b = parse_expr("logdet()").unwrap();
        let c = parse_expr("sum(i, log(r[i]))").unwrap();
        assert_eq!(a, b);
        assert!(matches!(c, Expr::Sum(ref v, _) if v == "i"));
    }

    #[test]
    fn unclosed_bracket_offset() {
        let err = parse_expr("r[1] - r[2").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Syntax);
        assert_eq!(err.offset, 10);
    }

    #[test]
    fn unknown_function() {
        let err = parse_expr("foo(r[1])").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier);
        assert_eq!(err.offset, 0);
    }

    #[test]
    fn arity_errors() {
        for src in ["log(r[1], 2)", "sum(i)", "psum()", "pow(r[1])", "esym(1, 2)"] {
            let err = parse_expr(src).unwrap_err();
            assert_eq!(err.kind, ParseErrorKind::Arity, "{src}");
        }
    }

    #[test]
    fn unbound_index() {
        let err = parse_expr("sum(i, r[j])").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier);
        assert_eq!(err.offset, 9);
    }

    #[test]
    fn index_scope_ends_with_sum() {
        assert!(parse_expr("sum(i, r[i]) + r[i]").is_err());
        assert!(parse_expr("sum(i, i)").is_err());
    }

    #[test]
    fn precedence() {
        let e = parse_expr("-r[1]^2 + 3*r[2]/2").unwrap();
        let want = Expr::Bin(
            BinOp::Add,
            Box::new(Expr::Neg(Box::new(Expr::Pow(
                Box::new(Expr::Var(Index::Literal(1))),
                2,
            )))),
            Box::new(Expr::Bin(
                BinOp::Div,
                Box::new(Expr::Bin(
                    BinOp::Mul,
                    Box::new(Expr::Const(3.0)),
                    Box::new(Expr::Var(Index::Literal(2))),
                )),
                Box::new(Expr::Const(2.0)),
            )),
        );
        assert_eq!(e, want);
    }

    #[test]
    fn parameters_and_exponents() {
        let e = parse_expr("c * r[1]^-2 + 1.5e-1").unwrap();
        let mut params = Vec::new();
        e.params(&mut params);
        assert_eq!(params, vec!["c".to_string()]);
        assert!(parse_expr("r[1]^0.5").is_err());
        assert!(parse_expr("r[0]").is_err());
        assert!(parse_expr("r").is_err());
    }

    #[test]
    fn trailing_garbage() {
        let err = parse_expr("r[1] r[2]").unwrap_err();
        assert_eq!(err.offset, 5);
        assert!(parse_expr("r[1] $").is_err());
    }
}
