use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Number(f64),
    /// Imaginary literal: `i`, `2i`, `0.5i`.
    Imag(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub offset: usize,
}

pub fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut pos = 0usize;
    while pos < bytes.len() {
        let b = bytes[pos];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => pos += 1,
            b'+' => {
                tokens.push(Token {
                    kind: TokenKind::Plus,
                    offset: pos,
                });
                pos += 1;
            }
            b'-' => {
                tokens.push(Token {
                    kind: TokenKind::Minus,
                    offset: pos,
                });
                pos += 1;
            }
            b'*' => {
                tokens.push(Token {
                    kind: TokenKind::Star,
                    offset: pos,
                });
                pos += 1;
            }
            b'/' => {
                tokens.push(Token {
                    kind: TokenKind::Slash,
                    offset: pos,
                });
                pos += 1;
            }
            b'^' => {
                tokens.push(Token {
                    kind: TokenKind::Caret,
                    offset: pos,
                });
                pos += 1;
            }
            b'(' => {
                tokens.push(Token {
                    kind: TokenKind::LParen,
                    offset: pos,
                });
                pos += 1;
            }
            b')' => {
                tokens.push(Token {
                    kind: TokenKind::RParen,
                    offset: pos,
                });
                pos += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = pos;
                pos = scan_number(bytes, pos);
                let lit = &text[start..pos];
                let value: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("malformed number `{lit}`"),
                })?;
                // A trailing `i` (not part of an identifier) makes the
                // literal imaginary: `2i`, `0.5i`.
                if pos < bytes.len() && bytes[pos] == b'i' && !is_ident_byte(bytes.get(pos + 1)) {
                    pos += 1;
                    tokens.push(Token {
                        kind: TokenKind::Imag(value),
                        offset: start,
                    });
                } else {
                    tokens.push(Token {
                        kind: TokenKind::Number(value),
                        offset: start,
                    });
                }
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = pos;
                while pos < bytes.len() && is_ident_byte(Some(&bytes[pos])) {
                    pos += 1;
                }
                let name = &text[start..pos];
                if name == "i" {
                    tokens.push(Token {
                        kind: TokenKind::Imag(1.0),
                        offset: start,
                    });
                } else {
                    tokens.push(Token {
                        kind: TokenKind::Ident(name.to_string()),
                        offset: start,
                    });
                }
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: pos,
                    message: format!("unexpected character `{}`", &text[pos..pos + utf8_len(b)]),
                });
            }
        }
    }
    Ok(tokens)
}

fn is_ident_byte(b: Option<&u8>) -> bool {
    matches!(b, Some(b) if b.is_ascii_alphanumeric() || *b == b'_')
}

fn utf8_len(b: u8) -> usize {
    if b < 0x80 {
        1
    } else if b < 0xE0 {
        2
    } else if b < 0xF0 {
        3
    } else {
        4
    }
}

fn scan_number(bytes: &[u8], mut pos: usize) -> usize {
    while pos < bytes.len() && (bytes[pos].is_ascii_digit() || bytes[pos] == b'.') {
        pos += 1;
    }
    // optional exponent
    if pos < bytes.len() && (bytes[pos] == b'e' || bytes[pos] == b'E') {
        let mut look = pos + 1;
        if look < bytes.len() && (bytes[look] == b'+' || bytes[look] == b'-') {
            look += 1;
        }
        if look < bytes.len() && bytes[look].is_ascii_digit() {
            pos = look;
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
        }
    }
    pos
}
