//! Lexer and Pratt parser for the closed-form expression language.
//!
//! Grammar sketch (see docs/expression-grammar.md for the full EBNF):
//! `+ -` bind loosest, then `* /`, then unary minus, then `^` which is
//! right-associative and binds tighter than unary minus, so `-x^2` reads as
//! `-(x^2)` and `x^-2` is accepted.

use crate::error::{Error, Result};

use super::{Func, Node};

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
    Comma,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
            }
            '+' => {
                toks.push(Token { tok: Tok::Plus, offset: start });
                i += 1;
            }
            '-' => {
                toks.push(Token { tok: Tok::Minus, offset: start });
                i += 1;
            }
            '*' => {
                toks.push(Token { tok: Tok::Star, offset: start });
                i += 1;
            }
            '/' => {
                toks.push(Token { tok: Tok::Slash, offset: start });
                i += 1;
            }
            '^' => {
                toks.push(Token { tok: Tok::Caret, offset: start });
                i += 1;
            }
            '(' => {
                toks.push(Token { tok: Tok::LParen, offset: start });
                i += 1;
            }
            ')' => {
                toks.push(Token { tok: Tok::RParen, offset: start });
                i += 1;
            }
            ',' => {
                toks.push(Token { tok: Tok::Comma, offset: start });
                i += 1;
            }
            '0'..='9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    if i >= bytes.len() || !bytes[i].is_ascii_digit() {
                        return Err(Error::Parse {
                            offset: i,
                            found: "end of digits".into(),
                            expected: vec!["digit after decimal point"],
                        });
                    }
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
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
                    // A bare `e` with no exponent digits is left for the
                    // identifier lexer, which will reject it in context.
                }
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| Error::Parse {
                    offset: start,
                    found: text.to_string(),
                    expected: vec!["number"],
                })?;
                toks.push(Token { tok: Tok::Num(value), offset: start });
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push(Token {
                    tok: Tok::Ident(src[start..i].to_string()),
                    offset: start,
                });
            }
            other => {
                return Err(Error::Parse {
                    offset: start,
                    found: format!("character `{other}`"),
                    expected: vec!["number", "identifier", "operator", "parenthesis"],
                });
            }
        }
    }
    toks.push(Token { tok: Tok::Eof, offset: src.len() });
    Ok(toks)
}

const PREFIX_BP: u8 = 5;

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    vars: &'a [String],
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect_rparen(&mut self) -> Result<()> {
        let t = self.bump();
        if t.tok == Tok::RParen {
            Ok(())
        } else {
            Err(Error::Parse {
                offset: t.offset,
                found: describe(&t.tok),
                expected: vec!["`)`"],
            })
        }
    }

    fn atom(&mut self) -> Result<Node> {
        let t = self.bump();
        match t.tok {
            Tok::Num(v) => Ok(Node::Lit(v)),
            Tok::Minus => Ok(Node::Neg(Box::new(self.expr_bp(PREFIX_BP)?))),
            Tok::LParen => {
                let e = self.expr_bp(0)?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek().tok == Tok::LParen {
                    self.bump();
                    self.call(&name, t.offset)
                } else if let Some(ix) = self.vars.iter().position(|v| v == &name) {
                    Ok(Node::Var(ix))
                } else {
                    Err(Error::UnknownVariable { name, offset: t.offset })
                }
            }
            other => Err(Error::Parse {
                offset: t.offset,
                found: describe(&other),
                expected: vec!["number", "identifier", "`(`", "`-`"],
            }),
        }
    }

    fn call(&mut self, name: &str, offset: usize) -> Result<Node> {
        let func = match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sqrt" => Some(Func::Sqrt),
            "abs_smooth" => None,
            _ => {
                return Err(Error::UnknownFunction {
                    name: name.to_string(),
                    offset,
                })
            }
        };
        let arg = self.expr_bp(0)?;
        match func {
            Some(f) => {
                self.expect_rparen()?;
                Ok(Node::Call(f, Box::new(arg)))
            }
            None => {
                let mut delta = 0.0;
                if self.peek().tok == Tok::Comma {
                    self.bump();
                    let t = self.bump();
                    match t.tok {
                        Tok::Num(v) => delta = v,
                        other => {
                            return Err(Error::Parse {
                                offset: t.offset,
                                found: describe(&other),
                                expected: vec!["non-negative number literal"],
                            })
                        }
                    }
                }
                self.expect_rparen()?;
                Ok(Node::AbsSmooth(Box::new(arg), delta))
            }
        }
    }

    fn expr_bp(&mut self, min_bp: u8) -> Result<Node> {
        let mut lhs = self.atom()?;
        loop {
            let (lbp, rbp) = match self.peek().tok {
                Tok::Plus | Tok::Minus => (1, 2),
                Tok::Star | Tok::Slash => (3, 4),
                Tok::Caret => (8, 7),
                Tok::RParen | Tok::Comma | Tok::Eof => break,
                ref other => {
                    let t = self.peek();
                    return Err(Error::Parse {
                        offset: t.offset,
                        found: describe(other),
                        expected: vec!["operator", "`)`", "end of input"],
                    });
                }
            };
            if lbp < min_bp {
                break;
            }
            let op = self.bump().tok;
            let rhs = self.expr_bp(rbp)?;
            lhs = match op {
                Tok::Plus => Node::Add(Box::new(lhs), Box::new(rhs)),
                Tok::Minus => Node::Sub(Box::new(lhs), Box::new(rhs)),
                Tok::Star => Node::Mul(Box::new(lhs), Box::new(rhs)),
                Tok::Slash => Node::Div(Box::new(lhs), Box::new(rhs)),
                Tok::Caret => fold_pow(lhs, rhs),
                _ => unreachable!(),
            };
        }
        Ok(lhs)
    }
}

/// Literal (possibly negated) integer exponents become unrolled integer
/// powers, which are exact for negative bases.
fn fold_pow(base: Node, exponent: Node) -> Node {
    let as_int = |v: f64| -> Option<i32> {
        if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 {
            Some(v as i32)
        } else {
            None
        }
    };
    match &exponent {
        Node::Lit(v) => {
            if let Some(k) = as_int(*v) {
                return Node::PowInt(Box::new(base), k);
            }
        }
        Node::Neg(inner) => {
            if let Node::Lit(v) = inner.as_ref() {
                if let Some(k) = as_int(*v) {
                    return Node::PowInt(Box::new(base), -k);
                }
            }
        }
        _ => {}
    }
    Node::Pow(Box::new(base), Box::new(exponent))
}

pub(super) fn parse_source(source: &str, vars: &[String]) -> Result<Node> {
    let toks = lex(source)?;
    let mut p = Parser { toks, pos: 0, vars };
    let node = p.expr_bp(0)?;
    let t = p.peek();
    if t.tok != Tok::Eof {
        return Err(Error::Parse {
            offset: t.offset,
            found: describe(&t.tok),
            expected: vec!["operator", "end of input"],
        });
    }
    Ok(node)
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number `{v}`"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Eof => "end of input".into(),
    }
}
