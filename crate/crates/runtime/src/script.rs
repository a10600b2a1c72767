//! Action scripts for replicated runs.
//!
//! ```text
//! # time-ms replica prototype selector args...
//! 100 0 Info setText: "hello world"
//! 250 2 Info setNumber: 7
//! ```

use std::fmt;

use thiserror::Error;

use crate::interp::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Literal {
    Str(String),
    Int(i64),
}

impl Literal {
    pub fn to_value(&self) -> Value {
        match self {
            Literal::Str(s) => Value::Str(s.clone()),
            Literal::Int(n) => Value::Int(*n),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Str(s) => f.write_str(&cyrep_core::lang::printer::quote(s)),
            Literal::Int(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptCall {
    pub time: u64,
    pub replica: u32,
    pub proto: String,
    pub selector: String,
    pub args: Vec<Literal>,
}

impl fmt::Display for ScriptCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.time, self.replica, self.proto, self.selector
        )?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("script line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

enum Token {
    Word(String),
    Quoted(String),
}

fn tokenize(line: &str) -> Result<Vec<Token>, String> {
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '#' {
            break;
        } else if c == '"' {
            chars.next();
            let mut s = String::new();
            loop {
                match chars.next() {
                    None => return Err("unterminated string".into()),
                    Some('"') => break,
                    Some('\\') => match chars.next() {
                        Some('n') => s.push('\n'),
                        Some('t') => s.push('\t'),
                        Some(c @ ('"' | '\\')) => s.push(c),
                        other => {
                            return Err(format!(
                                "bad escape `\\{}`",
                                other.map_or(String::new(), String::from)
                            ))
                        }
                    },
                    Some(c) => s.push(c),
                }
            }
            out.push(Token::Quoted(s));
        } else {
            let mut w = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() {
                    break;
                }
                w.push(c);
                chars.next();
            }
            out.push(Token::Word(w));
        }
    }
    Ok(out)
}

fn word(t: Option<Token>, what: &str) -> Result<String, String> {
    match t {
        Some(Token::Word(w)) => Ok(w),
        Some(Token::Quoted(_)) => Err(format!("{what} must not be quoted")),
        None => Err(format!("missing {what}")),
    }
}

fn parse_line(line: &str) -> Result<Option<ScriptCall>, String> {
    let tokens = tokenize(line)?;
    if tokens.is_empty() {
        return Ok(None);
    }
    let mut it = tokens.into_iter();
    let time = word(it.next(), "time")?;
    let time = time.parse().map_err(|_| format!("bad time `{time}`"))?;
    let replica = word(it.next(), "replica id")?;
    let replica = replica
        .parse()
        .map_err(|_| format!("bad replica id `{replica}`"))?;
    let proto = word(it.next(), "prototype")?;
    let selector = word(it.next(), "selector")?;
    let args = it
        .map(|t| match t {
            Token::Quoted(s) => Ok(Literal::Str(s)),
            Token::Word(w) => w
                .parse()
                .map(Literal::Int)
                .map_err(|_| format!("argument `{w}` is neither a quoted string nor an integer")),
        })
        .collect::<Result<_, _>>()?;
    Ok(Some(ScriptCall {
        time,
        replica,
        proto,
        selector,
        args,
    }))
}

/// Parses a whole script, skipping blank lines and `#` comments.
pub fn parse_script(text: &str) -> Result<Vec<ScriptCall>, ScriptError> {
    let mut calls = Vec::new();
    for (i, line) in text.lines().enumerate() {
        match parse_line(line) {
            Ok(Some(c)) => calls.push(c),
            Ok(None) => {}
            Err(message) => {
                return Err(ScriptError {
                    line: i + 1,
                    message,
                })
            }
        }
    }
    Ok(calls)
}
