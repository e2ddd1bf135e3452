//! Line-oriented text formats for patterns and circuits.
//!
//! Pattern files list commands top to bottom in execution order:
//!
//! ```text
//! input v
//! N w
//! E v w
//! M v XY -2          # optional sign dependency: M v XY 1 s: a+b
//! X w v
//! ```
//!
//! Circuit files start with an `in` header naming the input wires:
//!
//! ```text
//! in a b
//! H a
//! CZ a b
//! J 3 b
//! ```
//!
//! Angles are integers counting multiples of π/4 and are reduced mod 8.
//! Signal expressions are `0` or `a+b+…`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::circuit::{Circuit, Gate};
use crate::pattern::{Angle, Command, Pattern, Plane, QubitId, SignalExpr};

/// A parse failure at a 1-based line and column.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

/// A whitespace-separated token with its 1-based column.
#[derive(Clone, Copy, Debug)]
struct Token<'a> {
    text: &'a str,
    col: usize,
}

struct Line<'a> {
    number: usize,
    tokens: Vec<Token<'a>>,
    /// Column just past the last character, for "missing operand" errors.
    end: usize,
}

impl<'a> Line<'a> {
    fn error(&self, col: usize, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            line: self.number,
            col,
            message: message.into(),
        }
    }

    fn token(&self, i: usize, what: &str) -> Result<Token<'a>, SyntaxError> {
        self.tokens
            .get(i)
            .copied()
            .ok_or_else(|| self.error(self.end, format!("expected {what}")))
    }

    fn expect_len(&self, n: usize) -> Result<(), SyntaxError> {
        match self.tokens.get(n) {
            Some(t) => Err(self.error(t.col, format!("unexpected `{}`", t.text))),
            None => Ok(()),
        }
    }

    fn qubit(&self, i: usize) -> Result<QubitId, SyntaxError> {
        let t = self.token(i, "a qubit name")?;
        parse_name(t).map_err(|m| self.error(t.col, m))
    }

    fn angle(&self, i: usize) -> Result<Angle, SyntaxError> {
        let t = self.token(i, "an angle")?;
        t.text
            .parse::<i64>()
            .map(Angle::from_units)
            .map_err(|_| self.error(t.col, format!("`{}` is not an integer angle", t.text)))
    }

    fn signal(&self, i: usize) -> Result<SignalExpr, SyntaxError> {
        let t = self.token(i, "a signal expression")?;
        parse_signal(t.text, t.col).map_err(|(col, m)| self.error(col, m))
    }
}

fn parse_name(t: Token<'_>) -> Result<QubitId, String> {
    if QubitId::is_valid_name(t.text) {
        Ok(QubitId::new(t.text))
    } else {
        Err(format!("`{}` is not a valid qubit name", t.text))
    }
}

fn parse_signal(text: &str, col: usize) -> Result<SignalExpr, (usize, String)> {
    if text == "0" {
        return Ok(SignalExpr::empty());
    }
    let mut e = SignalExpr::empty();
    let mut offset = 0;
    for part in text.split('+') {
        if !QubitId::is_valid_name(part) || part == "0" {
            return Err((
                col + offset,
                format!("`{part}` is not a qubit in a signal expression"),
            ));
        }
        e.toggle(QubitId::new(part));
        offset += part.chars().count() + 1;
    }
    Ok(e)
}

/// Splits `text` into non-empty, comment-stripped lines of tokens.
fn lines(text: &str) -> impl Iterator<Item = Line<'_>> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("");
        let mut tokens = Vec::new();
        let mut start = None;
        let mut col = 0;
        for (byte, ch) in body.char_indices() {
            col += 1;
            if ch.is_whitespace() {
                if let Some((s, c)) = start.take() {
                    tokens.push(Token {
                        text: &body[s..byte],
                        col: c,
                    });
                }
            } else if start.is_none() {
                start = Some((byte, col));
            }
        }
        if let Some((s, c)) = start {
            tokens.push(Token {
                text: &body[s..],
                col: c,
            });
        }
        (!tokens.is_empty()).then(|| Line {
            number: i + 1,
            tokens,
            end: col + 1,
        })
    })
}

/// Parses the pattern text format.
pub fn parse_pattern(text: &str) -> Result<Pattern, SyntaxError> {
    let mut p = Pattern::default();
    for line in lines(text) {
        let head = line.tokens[0];
        let cmd = match head.text {
            "input" => {
                for i in 1..line.tokens.len() {
                    p.inputs.insert(line.qubit(i)?);
                }
                continue;
            }
            "N" => {
                line.expect_len(2)?;
                Command::Prepare(line.qubit(1)?)
            }
            "E" => {
                line.expect_len(3)?;
                let (v, w) = (line.qubit(1)?, line.qubit(2)?);
                if v == w {
                    return Err(line.error(line.tokens[2].col, "entangling a qubit with itself"));
                }
                Command::Entangle(v, w)
            }
            "M" => {
                let qubit = line.qubit(1)?;
                let t = line.token(2, "a plane")?;
                let plane = match t.text {
                    "XY" => Plane::XY,
                    "YZ" => Plane::YZ,
                    other => return Err(line.error(t.col, format!("unknown plane `{other}`"))),
                };
                let angle = line.angle(3)?;
                let sign = match line.tokens.get(4) {
                    None => SignalExpr::empty(),
                    Some(t) if t.text == "s:" => {
                        line.expect_len(6)?;
                        line.signal(5)?
                    }
                    Some(t) if t.text.starts_with("s:") => {
                        line.expect_len(5)?;
                        parse_signal(&t.text[2..], t.col + 2).map_err(|(c, m)| line.error(c, m))?
                    }
                    Some(t) => {
                        return Err(line.error(t.col, format!("expected `s:`, found `{}`", t.text)))
                    }
                };
                Command::Measure {
                    qubit,
                    plane,
                    angle,
                    sign,
                }
            }
            "X" | "Z" | "S" => {
                line.expect_len(3)?;
                let (v, s) = (line.qubit(1)?, line.signal(2)?);
                match head.text {
                    "X" => Command::CorrectX(v, s),
                    "Z" => Command::CorrectZ(v, s),
                    _ => Command::Shift(v, s),
                }
            }
            other => return Err(line.error(head.col, format!("unknown command `{other}`"))),
        };
        p.commands.push(cmd);
    }
    Ok(p)
}

/// Prints a pattern in the text format; [`parse_pattern`] inverts it.
pub fn print_pattern(p: &Pattern) -> String {
    let mut out = String::from("input");
    for q in &p.inputs {
        write!(out, " {q}").unwrap();
    }
    out.push('\n');
    for c in &p.commands {
        match c {
            Command::Prepare(v) => writeln!(out, "N {v}"),
            Command::Entangle(v, w) => writeln!(out, "E {v} {w}"),
            Command::Measure {
                qubit,
                plane,
                angle,
                sign,
            } => {
                if sign.is_empty() {
                    writeln!(out, "M {qubit} {plane} {angle}")
                } else {
                    writeln!(out, "M {qubit} {plane} {angle} s: {sign}")
                }
            }
            Command::CorrectX(v, s) => writeln!(out, "X {v} {s}"),
            Command::CorrectZ(v, s) => writeln!(out, "Z {v} {s}"),
            Command::Shift(v, s) => writeln!(out, "S {v} {s}"),
        }
        .unwrap();
    }
    out
}

/// Parses the circuit text format. The `in` header is required and must
/// come first.
pub fn parse_circuit(text: &str) -> Result<Circuit, SyntaxError> {
    let mut inputs: Option<Vec<QubitId>> = None;
    let mut gates = Vec::new();
    for line in lines(text) {
        let head = line.tokens[0];
        if head.text == "in" {
            if inputs.is_some() {
                return Err(line.error(head.col, "duplicate `in` header"));
            }
            let qs = (1..line.tokens.len())
                .map(|i| line.qubit(i))
                .collect::<Result<Vec<_>, _>>()?;
            for (i, q) in qs.iter().enumerate() {
                if qs[..i].contains(q) {
                    return Err(
                        line.error(line.tokens[i + 1].col, format!("wire `{q}` declared twice"))
                    );
                }
            }
            inputs = Some(qs);
            continue;
        }
        if inputs.is_none() {
            return Err(line.error(head.col, "expected the `in` header first"));
        }
        let gate = match head.text {
            "H" | "T" | "Tdg" | "KET+" => {
                line.expect_len(2)?;
                let q = line.qubit(1)?;
                match head.text {
                    "H" => Gate::H(q),
                    "T" => Gate::T(q),
                    "Tdg" => Gate::Tdg(q),
                    _ => Gate::KetPlus(q),
                }
            }
            "CZ" | "ZZ" => {
                line.expect_len(3)?;
                let (a, b) = (line.qubit(1)?, line.qubit(2)?);
                if a == b {
                    return Err(line.error(line.tokens[2].col, "two-qubit gate on a single wire"));
                }
                if head.text == "CZ" {
                    Gate::CZ(a, b)
                } else {
                    Gate::ZZ(a, b)
                }
            }
            "J" => {
                line.expect_len(3)?;
                Gate::J(line.angle(1)?, line.qubit(2)?)
            }
            other => return Err(line.error(head.col, format!("unknown gate `{other}`"))),
        };
        gates.push(gate);
    }
    Ok(Circuit {
        inputs: inputs.unwrap_or_default(),
        gates,
    })
}

/// Prints a circuit in the text format; [`parse_circuit`] inverts it.
pub fn print_circuit(c: &Circuit) -> String {
    let mut out = String::from("in");
    for q in &c.inputs {
        write!(out, " {q}").unwrap();
    }
    out.push('\n');
    for g in &c.gates {
        writeln!(out, "{g}").unwrap();
    }
    out
}
