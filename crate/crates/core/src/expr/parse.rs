use super::{BinOp, Func, Node};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<(usize, Tok)> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&ch) = bytes.get(self.pos) else {
            return Ok((start, Tok::End));
        };
        let single = match ch {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = single {
            self.pos += 1;
            return Ok((start, t));
        }
        if ch.is_ascii_digit() || ch == b'.' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut k = end + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    end = k;
                }
            }
            let text = &self.src[start..end];
            let value: f64 = text.parse().map_err(|_| Error::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            self.pos = end;
            return Ok((start, Tok::Num(value)));
        }
        if ch.is_ascii_alphabetic() || ch == b'_' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok((start, Tok::Ident(self.src[start..end].to_string())));
        }
        let c = self.src[start..].chars().next().unwrap_or('?');
        Err(Error::Syntax {
            offset: start,
            message: format!("unexpected character `{c}`"),
        })
    }
}

/// Recursive-descent parser. Precedence, lowest first: `+ -`, `* /`,
/// unary minus, `^` (right-associative; its exponent may carry a unary minus).
pub(super) struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: (usize, Tok),
    vars: &'a [String],
}

impl<'a> Parser<'a> {
    pub(super) fn new(src: &'a str, vars: &'a [String]) -> Result<Self> {
        let mut lexer = Lexer { src, pos: 0 };
        let peeked = lexer.next()?;
        Ok(Parser {
            lexer,
            peeked,
            vars,
        })
    }

    fn bump(&mut self) -> Result<(usize, Tok)> {
        let next = self.lexer.next()?;
        Ok(std::mem::replace(&mut self.peeked, next))
    }

    fn unexpected(&self, wanted: &str) -> Error {
        let (offset, tok) = &self.peeked;
        let found = match tok {
            Tok::End => "end of input".to_string(),
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            other => format!("{other:?}"),
        };
        Error::Syntax {
            offset: *offset,
            message: format!("expected {wanted}, found {found}"),
        }
    }

    pub(super) fn parse_all(mut self) -> Result<Node> {
        if self.peeked.1 == Tok::End {
            return Err(self.unexpected("an expression"));
        }
        let node = self.expr()?;
        if self.peeked.1 != Tok::End {
            return Err(self.unexpected("an operator or end of input"));
        }
        Ok(node)
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peeked.1 {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peeked.1 {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.peeked.1 == Tok::Minus {
            self.bump()?;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if self.peeked.1 == Tok::Caret {
            self.bump()?;
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        match self.peeked.1.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Node::Const(v))
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let (offset, _) = self.bump()?;
                if self.peeked.1 == Tok::LParen {
                    let func = Func::from_name(&name).ok_or_else(|| Error::Syntax {
                        offset,
                        message: format!("unknown function `{name}`"),
                    })?;
                    self.bump()?;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Node::Call(func, Box::new(arg)));
                }
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => Ok(Node::Var(i)),
                    None => Err(Error::UndeclaredVariable(name)),
                }
            }
            _ => Err(self.unexpected("a number, variable, function or `(`")),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        if self.peeked.1 != Tok::RParen {
            return Err(self.unexpected("`)`"));
        }
        self.bump()?;
        Ok(())
    }
}
