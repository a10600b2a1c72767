use std::fmt;

use crate::diag::{Diagnostic, Pos};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    /// An identifier immediately followed by `:`, stored with the colon.
    Keyword(String),
    Str(String),
    Int(i64),
    /// Binary operator: `+`, `-`, `*`, `++`.
    Op(String),
    At,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Dot,
    Assign,
    Arrow,
    Lt,
    Gt,
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Keyword(s) => write!(f, "keyword `{s}`"),
            TokenKind::Str(_) => f.write_str("string literal"),
            TokenKind::Int(n) => write!(f, "integer `{n}`"),
            TokenKind::Op(s) => write!(f, "operator `{s}`"),
            TokenKind::At => f.write_str("`@`"),
            TokenKind::LParen => f.write_str("`(`"),
            TokenKind::RParen => f.write_str("`)`"),
            TokenKind::LBrace => f.write_str("`{`"),
            TokenKind::RBrace => f.write_str("`}`"),
            TokenKind::LBracket => f.write_str("`[`"),
            TokenKind::RBracket => f.write_str("`]`"),
            TokenKind::Comma => f.write_str("`,`"),
            TokenKind::Semi => f.write_str("`;`"),
            TokenKind::Dot => f.write_str("`.`"),
            TokenKind::Assign => f.write_str("`=`"),
            TokenKind::Arrow => f.write_str("`->`"),
            TokenKind::Lt => f.write_str("`<`"),
            TokenKind::Gt => f.write_str("`>`"),
            TokenKind::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: Pos,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn pos(&self) -> Pos {
        Pos::new(self.line, self.col)
    }
}

/// Splits source text into tokens. Comments are dropped; the stream always
/// ends with a single `Eof` token.
pub fn tokenize(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut cur = Cursor {
        chars: text.chars().peekable(),
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        // whitespace and comments
        while let Some(c) = cur.peek() {
            if c.is_whitespace() {
                cur.bump();
            } else if c == '/' {
                let mut ahead = cur.chars.clone();
                ahead.next();
                match ahead.next() {
                    Some('/') => {
                        while let Some(c) = cur.peek() {
                            if c == '\n' {
                                break;
                            }
                            cur.bump();
                        }
                    }
                    Some('*') => {
                        let start = cur.pos();
                        cur.bump();
                        cur.bump();
                        let mut closed = false;
                        while let Some(c) = cur.bump() {
                            if c == '*' && cur.peek() == Some('/') {
                                cur.bump();
                                closed = true;
                                break;
                            }
                        }
                        if !closed {
                            return Err(Diagnostic::error("unterminated block comment")
                                .at("<input>", start));
                        }
                    }
                    _ => break,
                }
            } else {
                break;
            }
        }

        let pos = cur.pos();
        let Some(c) = cur.bump() else {
            out.push(Token {
                kind: TokenKind::Eof,
                pos,
            });
            return Ok(out);
        };

        let kind =
            match c {
                '@' => TokenKind::At,
                '(' => TokenKind::LParen,
                ')' => TokenKind::RParen,
                '{' => TokenKind::LBrace,
                '}' => TokenKind::RBrace,
                '[' => TokenKind::LBracket,
                ']' => TokenKind::RBracket,
                ',' => TokenKind::Comma,
                ';' => TokenKind::Semi,
                '.' => TokenKind::Dot,
                '=' => TokenKind::Assign,
                '<' => TokenKind::Lt,
                '>' => TokenKind::Gt,
                '*' => TokenKind::Op("*".into()),
                '+' => {
                    if cur.peek() == Some('+') {
                        cur.bump();
                        TokenKind::Op("++".into())
                    } else {
                        TokenKind::Op("+".into())
                    }
                }
                '-' => {
                    if cur.peek() == Some('>') {
                        cur.bump();
                        TokenKind::Arrow
                    } else {
                        TokenKind::Op("-".into())
                    }
                }
                '"' => {
                    let mut s = String::new();
                    loop {
                        match cur.bump() {
                            None | Some('\n') => {
                                return Err(Diagnostic::error("unterminated string literal")
                                    .at("<input>", pos));
                            }
                            Some('"') => break,
                            Some('\\') => match cur.bump() {
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                Some('"') => s.push('"'),
                                Some('\\') => s.push('\\'),
                                Some(other) => {
                                    return Err(Diagnostic::error(format!(
                                        "unknown escape `\\{other}` in string literal"
                                    ))
                                    .at("<input>", pos));
                                }
                                None => {
                                    return Err(Diagnostic::error("unterminated string literal")
                                        .at("<input>", pos));
                                }
                            },
                            Some(other) => s.push(other),
                        }
                    }
                    TokenKind::Str(s)
                }
                c if c.is_ascii_digit() => {
                    let mut digits = String::from(c);
                    while let Some(d) = cur.peek().filter(char::is_ascii_digit) {
                        digits.push(d);
                        cur.bump();
                    }
                    let n = digits.parse::<i64>().map_err(|_| {
                        Diagnostic::error(format!("integer literal `{digits}` out of range"))
                            .at("<input>", pos.clone())
                    })?;
                    TokenKind::Int(n)
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut id = String::from(c);
                    while let Some(d) = cur.peek().filter(|d| d.is_alphanumeric() || *d == '_') {
                        id.push(d);
                        cur.bump();
                    }
                    if cur.peek() == Some(':') {
                        cur.bump();
                        id.push(':');
                        TokenKind::Keyword(id)
                    } else {
                        TokenKind::Ident(id)
                    }
                }
                other => {
                    return Err(Diagnostic::error(format!("unexpected character `{other}`"))
                        .at("<input>", pos));
                }
            };
        out.push(Token { kind, pos });
    }
}
