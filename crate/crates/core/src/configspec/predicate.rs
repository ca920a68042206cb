//! Applicability predicates.
//!
//! ```text
//! expr  := or
//! or    := and {"||" and}
//! and   := unary {"&&" unary}
//! unary := "!" unary | "(" expr ")" | atom
//! atom  := key cmpop literal | key "has" string | "true" | "false"
//! ```
//!
//! Predicates are typed against [`IpConfiguration`] at parse time, so
//! evaluation cannot fail.

use std::fmt;

use thiserror::Error;

use super::config::{BugMutation, Burst, EccLevel, IpConfiguration, LpMode, Tech};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredicateError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown key `{key}` at {pos}")]
    UnknownKey { pos: usize, key: String },
    #[error("type mismatch at {pos}: {msg}")]
    TypeMismatch { pos: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    fn is_equality(self) -> bool {
        matches!(self, CmpOp::Eq | CmpOp::Ne)
    }

    fn apply<T: Ord>(self, lhs: T, rhs: T) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntKey {
    DataWidth,
    AddrWords,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetMember {
    LpMode(LpMode),
    Burst(Burst),
    Mutation(BugMutation),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    Int { key: IntKey, op: CmpOp, value: u64 },
    Ecc { op: CmpOp, value: EccLevel },
    /// Equality only.
    Tech { op: CmpOp, value: Tech },
    /// Equality only.
    Name { op: CmpOp, value: String },
    Has(SetMember),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    Const(bool),
    Atom(Atom),
    Not(Box<Predicate>),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
}

impl Predicate {
    pub fn eval(&self, cfg: &IpConfiguration) -> bool {
        match self {
            Predicate::Const(b) => *b,
            Predicate::Not(p) => !p.eval(cfg),
            Predicate::And(a, b) => a.eval(cfg) && b.eval(cfg),
            Predicate::Or(a, b) => a.eval(cfg) || b.eval(cfg),
            Predicate::Atom(atom) => match atom {
                Atom::Int { key, op, value } => {
                    let lhs = match key {
                        IntKey::DataWidth => cfg.data_width,
                        IntKey::AddrWords => cfg.addr_words,
                    };
                    op.apply(u64::from(lhs), *value)
                }
                Atom::Ecc { op, value } => op.apply(cfg.ecc, *value),
                Atom::Tech { op, value } => op.apply(cfg.tech, *value),
                Atom::Name { op, value } => op.apply(cfg.ip_name.as_str(), value.as_str()),
                Atom::Has(member) => match member {
                    SetMember::LpMode(m) => cfg.lp_modes.contains(m),
                    SetMember::Burst(b) => cfg.ahb_bursts.contains(b),
                    SetMember::Mutation(m) => cfg.bug_mutations.contains(m),
                },
            },
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Predicate::Or(..) => 1,
            Predicate::And(..) => 2,
            _ => 3,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            f.write_str("(")?;
            self.fmt_at(f, 0)?;
            return f.write_str(")");
        }
        match self {
            Predicate::Const(b) => write!(f, "{b}"),
            Predicate::Atom(a) => write!(f, "{a}"),
            Predicate::Not(p) => {
                f.write_str("!")?;
                p.fmt_at(f, 3)
            }
            // Left-associative: the right operand needs parentheses when it
            // is itself the same operator.
            Predicate::And(a, b) => {
                a.fmt_at(f, 2)?;
                f.write_str(" && ")?;
                b.fmt_at(f, 3)
            }
            Predicate::Or(a, b) => {
                a.fmt_at(f, 1)?;
                f.write_str(" || ")?;
                b.fmt_at(f, 2)
            }
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Int { key, op, value } => {
                let key = match key {
                    IntKey::DataWidth => "data_width",
                    IntKey::AddrWords => "addr_words",
                };
                write!(f, "{key} {} {value}", op.as_str())
            }
            Atom::Ecc { op, value } => write!(f, "ecc {} {value}", op.as_str()),
            Atom::Tech { op, value } => write!(f, "tech {} {value}", op.as_str()),
            Atom::Name { op, value } => write!(f, "ip_name {} {}", op.as_str(), quote(value)),
            Atom::Has(member) => match member {
                SetMember::LpMode(m) => write!(f, "lp_modes has {}", quote(m.as_str())),
                SetMember::Burst(b) => write!(f, "ahb_bursts has {}", quote(b.as_str())),
                SetMember::Mutation(m) => write!(f, "bug_mutations has {}", quote(m.as_str())),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(u64),
    Str(String),
    Op(CmpOp),
    AndAnd,
    OrOr,
    Bang,
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, PredicateError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    let syntax = |pos: usize, msg: &str| PredicateError::Syntax {
        pos,
        msg: msg.to_string(),
    };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'(' => {
                toks.push((start, Tok::LParen));
                i += 1;
            }
            b')' => {
                toks.push((start, Tok::RParen));
                i += 1;
            }
            b'&' if bytes.get(i + 1) == Some(&b'&') => {
                toks.push((start, Tok::AndAnd));
                i += 2;
            }
            b'|' if bytes.get(i + 1) == Some(&b'|') => {
                toks.push((start, Tok::OrOr));
                i += 2;
            }
            b'=' if bytes.get(i + 1) == Some(&b'=') => {
                toks.push((start, Tok::Op(CmpOp::Eq)));
                i += 2;
            }
            b'!' if bytes.get(i + 1) == Some(&b'=') => {
                toks.push((start, Tok::Op(CmpOp::Ne)));
                i += 2;
            }
            b'!' => {
                toks.push((start, Tok::Bang));
                i += 1;
            }
            b'<' | b'>' => {
                let eq = bytes.get(i + 1) == Some(&b'=');
                let op = match (c, eq) {
                    (b'<', false) => CmpOp::Lt,
                    (b'<', true) => CmpOp::Le,
                    (_, false) => CmpOp::Gt,
                    (_, true) => CmpOp::Ge,
                };
                toks.push((start, Tok::Op(op)));
                i += if eq { 2 } else { 1 };
            }
            b'"' => {
                i += 1;
                let mut s = String::new();
                loop {
                    match bytes.get(i) {
                        None => return Err(syntax(start, "unterminated string")),
                        Some(b'"') => {
                            i += 1;
                            break;
                        }
                        Some(b'\\') => {
                            let next = src[i + 1..]
                                .chars()
                                .next()
                                .ok_or_else(|| syntax(i, "dangling escape"))?;
                            s.push(next);
                            i += 1 + next.len_utf8();
                        }
                        Some(_) => {
                            let ch = src[i..].chars().next().unwrap();
                            s.push(ch);
                            i += ch.len_utf8();
                        }
                    }
                }
                toks.push((start, Tok::Str(s)));
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let v = src[start..i]
                    .parse()
                    .map_err(|_| syntax(start, "integer literal too large"))?;
                toks.push((start, Tok::Int(v)));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                toks.push((start, Tok::Ident(src[start..i].to_string())));
            }
            _ => return Err(syntax(start, "unexpected character")),
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn next(&mut self) -> Option<(usize, Tok)> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn syntax(&self, msg: impl Into<String>) -> PredicateError {
        PredicateError::Syntax {
            pos: self.offset(),
            msg: msg.into(),
        }
    }

    fn or(&mut self) -> Result<Predicate, PredicateError> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Tok::OrOr) {
            self.pos += 1;
            let rhs = self.and()?;
            lhs = Predicate::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Predicate, PredicateError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Tok::AndAnd) {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Predicate::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Predicate, PredicateError> {
        match self.peek() {
            Some(Tok::Bang) => {
                self.pos += 1;
                Ok(Predicate::Not(Box::new(self.unary()?)))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.or()?;
                match self.next() {
                    Some((_, Tok::RParen)) => Ok(inner),
                    _ => {
                        self.pos -= 1;
                        Err(self.syntax("expected `)`"))
                    }
                }
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Predicate, PredicateError> {
        let (key_pos, key) = match self.next() {
            Some((p, Tok::Ident(k))) => (p, k),
            _ => {
                self.pos -= 1;
                return Err(self.syntax("expected key, `true`, `false`, `!` or `(`"));
            }
        };
        match key.as_str() {
            "true" => return Ok(Predicate::Const(true)),
            "false" => return Ok(Predicate::Const(false)),
            _ => {}
        }

        let mismatch = |msg: String| PredicateError::TypeMismatch { pos: key_pos, msg };
        let is_set = matches!(key.as_str(), "lp_modes" | "ahb_bursts" | "bug_mutations");
        let known = is_set
            || matches!(
                key.as_str(),
                "ip_name" | "data_width" | "addr_words" | "ecc" | "tech"
            );
        if !known {
            return Err(PredicateError::UnknownKey { pos: key_pos, key });
        }

        match self.next() {
            Some((_, Tok::Ident(word))) if word == "has" => {
                let (lit_pos, member) = match self.next() {
                    Some((p, Tok::Str(s))) => (p, s),
                    _ => {
                        self.pos -= 1;
                        return Err(self.syntax("expected quoted string after `has`"));
                    }
                };
                if !is_set {
                    return Err(mismatch(format!("`has` needs a set-valued key, `{key}` is not")));
                }
                let bad = || PredicateError::TypeMismatch {
                    pos: lit_pos,
                    msg: format!("`{member}` is not a member of {key}'s domain"),
                };
                let m = match key.as_str() {
                    "lp_modes" => SetMember::LpMode(member.parse().map_err(|_| bad())?),
                    "ahb_bursts" => SetMember::Burst(member.parse().map_err(|_| bad())?),
                    _ => SetMember::Mutation(member.parse().map_err(|_| bad())?),
                };
                Ok(Predicate::Atom(Atom::Has(m)))
            }
            Some((_, Tok::Op(op))) => {
                if is_set {
                    return Err(mismatch(format!("cannot compare set-valued key `{key}`")));
                }
                let (lit_pos, lit) = match self.next() {
                    Some((p, t @ (Tok::Int(_) | Tok::Str(_) | Tok::Ident(_)))) => (p, t),
                    _ => {
                        self.pos -= 1;
                        return Err(self.syntax("expected literal"));
                    }
                };
                let lit_mismatch = |msg: String| PredicateError::TypeMismatch { pos: lit_pos, msg };
                let text = match &lit {
                    Tok::Str(s) | Tok::Ident(s) => Some(s.clone()),
                    _ => None,
                };
                let atom = match key.as_str() {
                    "data_width" | "addr_words" => {
                        let Tok::Int(value) = lit else {
                            return Err(lit_mismatch(format!("`{key}` compares with integers")));
                        };
                        let key = if key == "data_width" {
                            IntKey::DataWidth
                        } else {
                            IntKey::AddrWords
                        };
                        Atom::Int { key, op, value }
                    }
                    "ecc" => {
                        let value = text
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| lit_mismatch("expected an ecc level".into()))?;
                        Atom::Ecc { op, value }
                    }
                    "tech" => {
                        if !op.is_equality() {
                            return Err(mismatch("tech supports only == and !=".into()));
                        }
                        let value = text
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| lit_mismatch("expected a technology".into()))?;
                        Atom::Tech { op, value }
                    }
                    _ => {
                        if !op.is_equality() {
                            return Err(mismatch("ip_name supports only == and !=".into()));
                        }
                        let value =
                            text.ok_or_else(|| lit_mismatch("expected a string".into()))?;
                        Atom::Name { op, value }
                    }
                };
                Ok(Predicate::Atom(atom))
            }
            _ => {
                self.pos -= 1;
                Err(self.syntax("expected comparison operator or `has`"))
            }
        }
    }
}

/// Parses and type-checks a predicate.
pub fn parse_predicate(text: &str) -> Result<Predicate, PredicateError> {
    let mut parser = Parser {
        toks: lex(text)?,
        pos: 0,
        end: text.len(),
    };
    let pred = parser.or()?;
    if parser.pos < parser.toks.len() {
        return Err(parser.syntax("unexpected trailing input"));
    }
    Ok(pred)
}
