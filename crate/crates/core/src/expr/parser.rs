use num_complex::Complex64;

use super::lexer::{Token, TokenKind};
use super::{Node, Var, VarClass, VariableContext};
use crate::error::ParseError;

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    end_offset: usize,
    ctx: &'a VariableContext,
}

pub fn parse_tokens(
    tokens: &[Token],
    end_offset: usize,
    ctx: &VariableContext,
) -> Result<Node, ParseError> {
    let mut parser = Parser {
        tokens,
        pos: 0,
        end_offset,
        ctx,
    };
    let node = parser.expr()?;
    if let Some(tok) = parser.peek() {
        return Err(ParseError::Syntax {
            offset: tok.offset,
            message: "unexpected trailing input".to_string(),
        });
    }
    Ok(node)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<&'a Token> {
        let tok = self.tokens.get(self.pos);
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn offset_here(&self) -> usize {
        self.peek().map(|t| t.offset).unwrap_or(self.end_offset)
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut node = self.term()?;
        while let Some(tok) = self.peek() {
            match tok.kind {
                TokenKind::Plus => {
                    self.bump();
                    node = Node::Add(Box::new(node), Box::new(self.term()?));
                }
                TokenKind::Minus => {
                    self.bump();
                    node = Node::Sub(Box::new(node), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(node)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut node = self.factor()?;
        while let Some(tok) = self.peek() {
            match tok.kind {
                TokenKind::Star => {
                    self.bump();
                    node = Node::Mul(Box::new(node), Box::new(self.factor()?));
                }
                TokenKind::Slash => {
                    self.bump();
                    node = Node::Div(Box::new(node), Box::new(self.factor()?));
                }
                _ => break,
            }
        }
        Ok(node)
    }

    fn factor(&mut self) -> Result<Node, ParseError> {
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Minus)) {
            self.bump();
            let inner = self.factor()?;
            // Fold negated literals so print/parse round-trips structurally.
            return Ok(match inner {
                Node::Const(c) => Node::Const(-c),
                other => Node::Neg(Box::new(other)),
            });
        }
        let mut node = self.atom()?;
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Caret)) {
            self.bump();
            let exponent = self.integer_exponent()?;
            node = Node::Pow(Box::new(node), exponent);
        }
        Ok(node)
    }

    fn integer_exponent(&mut self) -> Result<i32, ParseError> {
        let mut sign = 1i64;
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Minus)) {
            self.bump();
            sign = -1;
        }
        let offset = self.offset_here();
        match self.bump() {
            Some(Token {
                kind: TokenKind::Number(v),
                ..
            }) if v.fract() == 0.0 && *v <= i32::MAX as f64 => Ok((sign * *v as i64) as i32),
            _ => Err(ParseError::Syntax {
                offset,
                message: "exponent must be a literal integer".to_string(),
            }),
        }
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let offset = self.offset_here();
        let tok = self.bump().ok_or_else(|| ParseError::Syntax {
            offset,
            message: "unexpected end of input".to_string(),
        })?;
        match &tok.kind {
            TokenKind::Number(v) => Ok(Node::Const(Complex64::new(*v, 0.0))),
            TokenKind::Imag(v) => Ok(Node::Const(Complex64::new(0.0, *v))),
            TokenKind::LParen => {
                let node = self.expr()?;
                self.expect_rparen()?;
                Ok(node)
            }
            TokenKind::Ident(name) => self.ident(name, tok.offset),
            other => Err(ParseError::Syntax {
                offset: tok.offset,
                message: format!("unexpected token {other:?}"),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        let offset = self.offset_here();
        match self.bump() {
            Some(Token {
                kind: TokenKind::RParen,
                ..
            }) => Ok(()),
            _ => Err(ParseError::Syntax {
                offset,
                message: "expected `)`".to_string(),
            }),
        }
    }

    fn ident(&mut self, name: &str, offset: usize) -> Result<Node, ParseError> {
        if matches!(name, "exp" | "log" | "sqrt") {
            let open = self.offset_here();
            match self.bump() {
                Some(Token {
                    kind: TokenKind::LParen,
                    ..
                }) => {}
                _ => {
                    return Err(ParseError::Syntax {
                        offset: open,
                        message: format!("expected `(` after `{name}`"),
                    })
                }
            }
            let arg = Box::new(self.expr()?);
            self.expect_rparen()?;
            return Ok(match name {
                "exp" => Node::Exp(arg),
                "log" => Node::Log(arg),
                _ => Node::Sqrt(arg),
            });
        }
        self.variable(name, offset).map(Node::Var)
    }

    fn variable(&self, name: &str, offset: usize) -> Result<Var, ParseError> {
        let (class, digits) = if let Some(rest) = name.strip_prefix("zb") {
            (VarClass::Zb, rest)
        } else if let Some(rest) = name.strip_prefix("ub") {
            (VarClass::Ub, rest)
        } else if let Some(rest) = name.strip_prefix('z') {
            (VarClass::Z, rest)
        } else if let Some(rest) = name.strip_prefix('u') {
            (VarClass::U, rest)
        } else {
            return Err(ParseError::UndeclaredVariable {
                offset,
                name: name.to_string(),
            });
        };
        let index: usize = match digits.parse() {
            Ok(i) if i >= 1 => i,
            _ => {
                return Err(ParseError::UndeclaredVariable {
                    offset,
                    name: name.to_string(),
                })
            }
        };
        if class.is_conjugated() && !self.ctx.allows(class) && self.ctx.is_holomorphic() {
            return Err(ParseError::HolomorphyViolation {
                offset,
                name: name.to_string(),
            });
        }
        let var = Var {
            class,
            index: index - 1,
        };
        if !self.ctx.declares(var) {
            return Err(ParseError::UndeclaredVariable {
                offset,
                name: name.to_string(),
            });
        }
        Ok(var)
    }
}
