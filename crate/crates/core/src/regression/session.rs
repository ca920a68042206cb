//! Session file text:
//!
//! ```text
//! session "<name>" { seed = <u64>; group "<formal|sim>" { test "<tc-id>" { runner = <sim|exhaustive>; count = <u32>; } … } … }
//! ```
//!
//! Whitespace is insignificant between tokens.

use std::fmt::Write as _;

use super::{RegressionError, Runner};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionTest {
    pub name: String,
    pub runner: Runner,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionGroup {
    pub name: String,
    pub tests: Vec<SessionTest>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionFile {
    pub name: String,
    pub seed: u64,
    pub groups: Vec<SessionGroup>,
}

impl SessionFile {
    pub fn tests(&self) -> impl Iterator<Item = &SessionTest> {
        self.groups.iter().flat_map(|g| &g.tests)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "session \"{}\" {{", self.name).unwrap();
        writeln!(out, "  seed = {};", self.seed).unwrap();
        for g in &self.groups {
            writeln!(out, "  group \"{}\" {{", g.name).unwrap();
            for t in &g.tests {
                writeln!(
                    out,
                    "    test \"{}\" {{ runner = {}; count = {}; }}",
                    t.name,
                    t.runner.as_str(),
                    t.count
                )
                .unwrap();
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self, RegressionError> {
        let mut p = Parser {
            toks: lex(text)?,
            at: 0,
        };
        let s = p.session()?;
        if let Some(t) = p.toks.get(p.at) {
            return Err(t.err("trailing input"));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Str(String),
    Word(String),
    Punct(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
}

impl Token {
    fn err(&self, msg: &str) -> RegressionError {
        RegressionError::SessionSyntax {
            line: self.line,
            msg: format!("{msg} at {:?}", self.tok),
        }
    }
}

fn lex(text: &str) -> Result<Vec<Token>, RegressionError> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                line += 1;
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '{' | '}' | '=' | ';' => {
                out.push(Token {
                    tok: Tok::Punct(c),
                    line,
                });
                chars.next();
            }
            '"' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('"') => break,
                        Some('\n') | None => {
                            return Err(RegressionError::SessionSyntax {
                                line,
                                msg: "unterminated string".into(),
                            })
                        }
                        Some(ch) => s.push(ch),
                    }
                }
                out.push(Token {
                    tok: Tok::Str(s),
                    line,
                });
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let mut s = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch.is_ascii_alphanumeric() || ch == '_' {
                        s.push(ch);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Token {
                    tok: Tok::Word(s),
                    line,
                });
            }
            other => {
                return Err(RegressionError::SessionSyntax {
                    line,
                    msg: format!("unexpected character {other:?}"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    at: usize,
}

impl Parser {
    fn next(&mut self, what: &str) -> Result<Token, RegressionError> {
        let t = self.toks.get(self.at).cloned().ok_or_else(|| {
            RegressionError::SessionSyntax {
                line: self.toks.last().map_or(1, |t| t.line),
                msg: format!("unexpected end of input, expected {what}"),
            }
        })?;
        self.at += 1;
        Ok(t)
    }

    fn peek_punct(&self, c: char) -> bool {
        matches!(self.toks.get(self.at), Some(Token { tok: Tok::Punct(p), .. }) if *p == c)
    }

    fn punct(&mut self, c: char) -> Result<(), RegressionError> {
        let t = self.next(&format!("`{c}`"))?;
        if t.tok == Tok::Punct(c) {
            Ok(())
        } else {
            Err(t.err(&format!("expected `{c}`")))
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), RegressionError> {
        let t = self.next(kw)?;
        match &t.tok {
            Tok::Word(w) if w == kw => Ok(()),
            _ => Err(t.err(&format!("expected `{kw}`"))),
        }
    }

    fn string(&mut self) -> Result<String, RegressionError> {
        let t = self.next("a string")?;
        match t.tok {
            Tok::Str(s) => Ok(s),
            _ => Err(t.err("expected a string")),
        }
    }

    fn word(&mut self) -> Result<(String, Token), RegressionError> {
        let t = self.next("a value")?;
        match &t.tok {
            Tok::Word(w) => Ok((w.clone(), t)),
            _ => Err(t.err("expected a value")),
        }
    }

    fn number<T: std::str::FromStr>(&mut self) -> Result<T, RegressionError> {
        let (w, t) = self.word()?;
        w.parse().map_err(|_| t.err("expected an unsigned integer"))
    }

    fn session(&mut self) -> Result<SessionFile, RegressionError> {
        self.keyword("session")?;
        let name = self.string()?;
        self.punct('{')?;
        self.keyword("seed")?;
        self.punct('=')?;
        let seed = self.number()?;
        self.punct(';')?;
        let mut groups = Vec::new();
        while !self.peek_punct('}') {
            groups.push(self.group()?);
        }
        self.punct('}')?;
        Ok(SessionFile { name, seed, groups })
    }

    fn group(&mut self) -> Result<SessionGroup, RegressionError> {
        self.keyword("group")?;
        let t = self.toks.get(self.at).cloned();
        let name = self.string()?;
        if name != "formal" && name != "sim" {
            return Err(t.expect("string was read").err("group must be \"formal\" or \"sim\""));
        }
        self.punct('{')?;
        let mut tests = Vec::new();
        while !self.peek_punct('}') {
            tests.push(self.test()?);
        }
        self.punct('}')?;
        Ok(SessionGroup { name, tests })
    }

    fn test(&mut self) -> Result<SessionTest, RegressionError> {
        self.keyword("test")?;
        let name = self.string()?;
        self.punct('{')?;
        self.keyword("runner")?;
        self.punct('=')?;
        let (w, t) = self.word()?;
        let runner = match w.as_str() {
            "sim" => Runner::Sim,
            "exhaustive" => Runner::Exhaustive,
            _ => return Err(t.err("runner must be sim or exhaustive")),
        };
        self.punct(';')?;
        self.keyword("count")?;
        self.punct('=')?;
        let count: u32 = self.number()?;
        self.punct(';')?;
        self.punct('}')?;
        Ok(SessionTest {
            name,
            runner,
            count,
        })
    }
}
