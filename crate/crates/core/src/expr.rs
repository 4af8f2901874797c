//! Integer expressions over thread-local registers.
//!
//! The grammar is deliberately small: integer literals, registers `r0`..`r15`,
//! the arithmetic operators `+ - *`, the comparisons `== != <` (yielding 0/1),
//! unary minus, and parentheses. Comparisons bind loosest, then additive, then
//! multiplicative operators.

use std::fmt;

use crate::program::Fault;

/// Highest register index a program may reference.
pub const MAX_REGISTER: u8 = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
        }
    }
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Lit(i64),
    Reg(u8),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Parse an expression string. Errors carry a byte offset into the input.
    pub fn parse(text: &str) -> Result<Expr, ExprError> {
        let mut parser = Parser {
            tokens: lex(text)?,
            pos: 0,
        };
        let expr = parser.comparison()?;
        match parser.peek() {
            None => Ok(expr),
            Some((off, _)) => Err(ExprError::new(text, *off, "trailing input")),
        }
    }

    /// Evaluate against a register file. Overflow is a program fault.
    pub fn eval(&self, regs: &[i64]) -> Result<i64, Fault> {
        match self {
            Expr::Lit(v) => Ok(*v),
            Expr::Reg(r) => Ok(regs.get(*r as usize).copied().unwrap_or(0)),
            Expr::Neg(e) => e.eval(regs)?.checked_neg().ok_or(Fault::Overflow),
            Expr::Bin(op, a, b) => {
                let a = a.eval(regs)?;
                let b = b.eval(regs)?;
                match op {
                    BinOp::Add => a.checked_add(b).ok_or(Fault::Overflow),
                    BinOp::Sub => a.checked_sub(b).ok_or(Fault::Overflow),
                    BinOp::Mul => a.checked_mul(b).ok_or(Fault::Overflow),
                    BinOp::Eq => Ok((a == b) as i64),
                    BinOp::Ne => Ok((a != b) as i64),
                    BinOp::Lt => Ok((a < b) as i64),
                }
            }
        }
    }

    /// Largest register index used, if any.
    pub fn max_register(&self) -> Option<u8> {
        match self {
            Expr::Lit(_) => None,
            Expr::Reg(r) => Some(*r),
            Expr::Neg(e) => e.max_register(),
            Expr::Bin(_, a, b) => a.max_register().max(b.max_register()),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(v) => write!(f, "{v}"),
            Expr::Reg(r) => write!(f, "r{r}"),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

/// Expression syntax error with a byte offset into the source string.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("expression error at offset {offset} in {source_text:?}: {message}")]
pub struct ExprError {
    pub source_text: String,
    pub offset: usize,
    pub message: String,
}

impl ExprError {
    fn new(text: &str, offset: usize, message: impl Into<String>) -> Self {
        ExprError {
            source_text: text.to_string(),
            offset,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Token {
    Int(i64),
    Reg(u8),
    Plus,
    Minus,
    Star,
    EqEq,
    NotEq,
    Lt,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(usize, Token)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' => i += 1,
            b'+' => {
                out.push((i, Token::Plus));
                i += 1;
            }
            b'-' => {
                out.push((i, Token::Minus));
                i += 1;
            }
            b'*' => {
                out.push((i, Token::Star));
                i += 1;
            }
            b'(' => {
                out.push((i, Token::LParen));
                i += 1;
            }
            b')' => {
                out.push((i, Token::RParen));
                i += 1;
            }
            b'<' => {
                out.push((i, Token::Lt));
                i += 1;
            }
            b'=' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    out.push((i, Token::EqEq));
                    i += 2;
                } else {
                    return Err(ExprError::new(text, i, "expected '=='"));
                }
            }
            b'!' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    out.push((i, Token::NotEq));
                    i += 2;
                } else {
                    return Err(ExprError::new(text, i, "expected '!='"));
                }
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let lit: i64 = text[start..i]
                    .parse()
                    .map_err(|_| ExprError::new(text, start, "integer literal out of range"))?;
                out.push((start, Token::Int(lit)));
            }
            b'r' => {
                let start = i;
                i += 1;
                let digits = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if digits == i {
                    return Err(ExprError::new(text, start, "expected register digits"));
                }
                let idx: u32 = text[digits..i]
                    .parse()
                    .map_err(|_| ExprError::new(text, start, "register index out of range"))?;
                if idx > MAX_REGISTER as u32 {
                    return Err(ExprError::new(
                        text,
                        start,
                        format!("register r{idx} exceeds r{MAX_REGISTER}"),
                    ));
                }
                out.push((start, Token::Reg(idx as u8)));
            }
            _ => {
                return Err(ExprError::new(
                    text,
                    i,
                    format!("unexpected character {:?}", c as char),
                ));
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&(usize, Token)> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<(usize, Token)> {
        let t = self.tokens.get(self.pos).copied();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn comparison(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.additive()?;
        while let Some((_, tok)) = self.peek() {
            let op = match tok {
                Token::EqEq => BinOp::Eq,
                Token::NotEq => BinOp::Ne,
                Token::Lt => BinOp::Lt,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.additive()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.multiplicative()?;
        while let Some((_, tok)) = self.peek() {
            let op = match tok {
                Token::Plus => BinOp::Add,
                Token::Minus => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.multiplicative()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn multiplicative(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some((_, Token::Star)) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if let Some((_, Token::Minus)) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.bump() {
            Some((_, Token::Int(v))) => Ok(Expr::Lit(v)),
            Some((_, Token::Reg(r))) => Ok(Expr::Reg(r)),
            Some((off, Token::LParen)) => {
                let inner = self.comparison()?;
                match self.bump() {
                    Some((_, Token::RParen)) => Ok(inner),
                    _ => Err(ExprError {
                        source_text: String::new(),
                        offset: off,
                        message: "unclosed parenthesis".into(),
                    }),
                }
            }
            Some((off, tok)) => Err(ExprError {
                source_text: String::new(),
                offset: off,
                message: format!("unexpected token {tok:?}"),
            }),
            None => Err(ExprError {
                source_text: String::new(),
                offset: 0,
                message: "unexpected end of expression".into(),
            }),
        }
    }
}
