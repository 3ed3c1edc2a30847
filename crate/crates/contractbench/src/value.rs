//! The restricted value-literal grammar for task inputs and witnesses.
//!
//! Every input state in a task bundle is written in a small Python-literal
//! subset so that values round-trip exactly between the harness and the
//! subject runtime. The grammar (EBNF, see also `docs/value-literals.md` in
//! the repository root):
//!
//! ```text
//! value   = "None" | "True" | "False" | number | string
//!         | list | tuple | dict ;
//! number  = [ "-" ] ( integer | float | "inf" | "nan" ) ;
//! integer = digit { digit } ;                      (* 64-bit signed *)
//! float   = digit { digit } "." { digit } [ exp ]
//!         | digit { digit } exp ;
//! exp     = ( "e" | "E" ) [ "+" | "-" ] digit { digit } ;
//! string  = python string literal with '\' escapes, single or double quotes ;
//! list    = "[" [ value { "," value } [ "," ] ] "]" ;
//! tuple   = "(" [ value "," [ value { "," value } [ "," ] ] ] ")" ;
//! dict    = "{" [ entry { "," entry } [ "," ] ] "}" ;
//! entry   = value ":" value ;                      (* key must be hashable *)
//! ```
//!
//! Anything outside this grammar is a [`LiteralError`], which callers surface
//! as a bundle error.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A value in the restricted literal grammar.
///
/// Mirrors the Python values the subject runtime exchanges with the harness.
/// Tuples and lists are distinct, as they are in Python.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Value {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<Value>),
    Tuple(Vec<Value>),
    /// Key-value pairs in insertion order. Equality ignores order.
    Dict(Vec<(Value, Value)>),
}

/// Errors produced while parsing a value literal.
#[derive(Debug, Error, PartialEq)]
pub enum LiteralError {
    #[error("unexpected end of literal")]
    UnexpectedEnd,
    #[error("unexpected character {0:?} at byte {1}")]
    UnexpectedChar(char, usize),
    #[error("integer out of 64-bit range at byte {0}")]
    IntOutOfRange(usize),
    #[error("invalid number at byte {0}")]
    InvalidNumber(usize),
    #[error("invalid escape sequence at byte {0}")]
    InvalidEscape(usize),
    #[error("unterminated string starting at byte {0}")]
    UnterminatedString(usize),
    #[error("unhashable dict key at byte {0}")]
    UnhashableKey(usize),
    #[error("trailing input after literal at byte {0}")]
    TrailingInput(usize),
}

impl Value {
    /// Parse a literal from its textual form.
    pub fn parse(text: &str) -> Result<Value, LiteralError> {
        let mut parser = Parser {
            bytes: text.as_bytes(),
            pos: 0,
        };
        parser.skip_ws();
        let value = parser.parse_value()?;
        parser.skip_ws();
        if parser.pos != parser.bytes.len() {
            return Err(LiteralError::TrailingInput(parser.pos));
        }
        Ok(value)
    }

    /// Deep structural equality with the subject language's semantics:
    /// numeric values compare across int/float/bool (`1 == 1.0 == True`),
    /// NaN compares equal to NaN (so equality stays reflexive), and tuples
    /// never equal lists.
    pub fn deep_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::None, Value::None) => true,
            (Value::List(a), Value::List(b)) | (Value::Tuple(a), Value::Tuple(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.deep_eq(y))
            }
            (Value::Dict(a), Value::Dict(b)) => {
                a.len() == b.len()
                    && a.iter().all(|(ka, va)| {
                        b.iter().any(|(kb, vb)| ka.deep_eq(kb) && va.deep_eq(vb))
                    })
            }
            (Value::Str(a), Value::Str(b)) => a == b,
            _ => match (self.as_number(), other.as_number()) {
                (Some(a), Some(b)) => a.eq_numeric(b),
                _ => false,
            },
        }
    }

    fn as_number(&self) -> Option<Num> {
        match self {
            Value::Bool(b) => Some(Num::Int(i64::from(*b))),
            Value::Int(i) => Some(Num::Int(*i)),
            Value::Float(f) => Some(Num::Float(*f)),
            _ => None,
        }
    }

    /// Whether the value may be used as a dict key (hashable in Python).
    fn is_hashable(&self) -> bool {
        match self {
            Value::List(_) | Value::Dict(_) => false,
            Value::Tuple(items) => items.iter().all(Value::is_hashable),
            _ => true,
        }
    }
}

#[derive(Clone, Copy)]
enum Num {
    Int(i64),
    Float(f64),
}

impl Num {
    fn eq_numeric(self, other: Num) -> bool {
        match (self, other) {
            (Num::Int(a), Num::Int(b)) => a == b,
            (Num::Float(a), Num::Float(b)) => a == b || (a.is_nan() && b.is_nan()),
            // Cross int/float comparison is exact: route through f64 only
            // when the integer is exactly representable.
            (Num::Int(a), Num::Float(b)) | (Num::Float(b), Num::Int(a)) => {
                b.fract() == 0.0 && b.is_finite() && b >= -(2f64.powi(63)) && b < 2f64.powi(63) && {
                    // b is integral and in range, compare as i128 to avoid
                    // precision loss for large magnitudes.
                    (b as i128) == i128::from(a)
                }
            }
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.deep_eq(other)
    }
}

impl fmt::Display for Value {
    /// Canonical textual form. `parse(render(v))` always equals `v`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::None => write!(f, "None"),
            Value::Bool(true) => write!(f, "True"),
            Value::Bool(false) => write!(f, "False"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => {
                if x.is_nan() {
                    write!(f, "nan")
                } else if x.is_infinite() {
                    write!(f, "{}", if *x > 0.0 { "inf" } else { "-inf" })
                } else if x.fract() == 0.0 && x.abs() < 1e16 {
                    // Keep the trailing `.0` Python uses for integral floats.
                    write!(f, "{x:.1}")
                } else {
                    write!(f, "{x:?}")
                }
            }
            Value::Str(s) => {
                f.write_str("\"")?;
                for ch in s.chars() {
                    match ch {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\r' => f.write_str("\\r")?,
                        '\t' => f.write_str("\\t")?,
                        c if (c as u32) < 0x20 => write!(f, "\\x{:02x}", c as u32)?,
                        c => f.write_char(c)?,
                    }
                }
                f.write_str("\"")
            }
            Value::List(items) => {
                f.write_str("[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str("]")
            }
            Value::Tuple(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{item}")?;
                }
                if items.len() == 1 {
                    f.write_str(",")?;
                }
                f.write_str(")")
            }
            Value::Dict(entries) => {
                f.write_str("{")?;
                for (i, (k, v)) in entries.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

use fmt::Write as _;

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && (self.bytes[self.pos] as char).is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, expected: u8) -> Result<(), LiteralError> {
        match self.peek() {
            Some(b) if b == expected => {
                self.pos += 1;
                Ok(())
            }
            Some(b) => Err(LiteralError::UnexpectedChar(b as char, self.pos)),
            None => Err(LiteralError::UnexpectedEnd),
        }
    }

    fn starts_with_word(&self, word: &str) -> bool {
        let end = self.pos + word.len();
        if self.bytes.len() < end || &self.bytes[self.pos..end] != word.as_bytes() {
            return false;
        }
        // Reject identifier continuation, e.g. `Trueish`.
        !matches!(self.bytes.get(end), Some(b) if b.is_ascii_alphanumeric() || *b == b'_')
    }

    fn parse_value(&mut self) -> Result<Value, LiteralError> {
        self.skip_ws();
        match self.peek() {
            None => Err(LiteralError::UnexpectedEnd),
            Some(b'[') => self.parse_list(),
            Some(b'(') => self.parse_tuple(),
            Some(b'{') => self.parse_dict(),
            Some(b'"') | Some(b'\'') => self.parse_string(),
            Some(_) if self.starts_with_word("None") => {
                self.pos += 4;
                Ok(Value::None)
            }
            Some(_) if self.starts_with_word("True") => {
                self.pos += 4;
                Ok(Value::Bool(true))
            }
            Some(_) if self.starts_with_word("False") => {
                self.pos += 5;
                Ok(Value::Bool(false))
            }
            Some(b) if b == b'-' || b.is_ascii_digit() || b == b'i' || b == b'n' => {
                self.parse_number()
            }
            Some(b) => Err(LiteralError::UnexpectedChar(b as char, self.pos)),
        }
    }

    fn parse_number(&mut self) -> Result<Value, LiteralError> {
        let start = self.pos;
        let negative = self.peek() == Some(b'-');
        if negative {
            self.pos += 1;
            self.skip_ws();
        }
        if self.starts_with_word("inf") {
            self.pos += 3;
            return Ok(Value::Float(if negative {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }));
        }
        if self.starts_with_word("nan") {
            self.pos += 3;
            return Ok(Value::Float(f64::NAN));
        }
        let digits_start = self.pos;
        let mut is_float = false;
        while let Some(b) = self.peek() {
            match b {
                b'0'..=b'9' => self.pos += 1,
                b'.' => {
                    is_float = true;
                    self.pos += 1;
                }
                b'e' | b'E' => {
                    is_float = true;
                    self.pos += 1;
                    if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
        if self.pos == digits_start {
            return Err(LiteralError::InvalidNumber(start));
        }
        let text = std::str::from_utf8(&self.bytes[digits_start..self.pos])
            .map_err(|_| LiteralError::InvalidNumber(start))?;
        if is_float {
            let magnitude: f64 = text.parse().map_err(|_| LiteralError::InvalidNumber(start))?;
            Ok(Value::Float(if negative { -magnitude } else { magnitude }))
        } else {
            let full = if negative {
                format!("-{text}")
            } else {
                text.to_string()
            };
            full.parse::<i64>()
                .map(Value::Int)
                .map_err(|_| LiteralError::IntOutOfRange(start))
        }
    }

    fn parse_string(&mut self) -> Result<Value, LiteralError> {
        let start = self.pos;
        let quote = self.bytes[self.pos];
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(b) = self.peek() else {
                return Err(LiteralError::UnterminatedString(start));
            };
            if b == quote {
                self.pos += 1;
                return Ok(Value::Str(out));
            }
            if b == b'\\' {
                self.pos += 1;
                let Some(esc) = self.peek() else {
                    return Err(LiteralError::UnterminatedString(start));
                };
                self.pos += 1;
                match esc {
                    b'n' => out.push('\n'),
                    b'r' => out.push('\r'),
                    b't' => out.push('\t'),
                    b'\\' => out.push('\\'),
                    b'\'' => out.push('\''),
                    b'"' => out.push('"'),
                    b'0' => out.push('\0'),
                    b'x' => {
                        let hi = self.next_hex()?;
                        let lo = self.next_hex()?;
                        out.push((hi * 16 + lo) as char);
                    }
                    b'u' => {
                        let mut code: u32 = 0;
                        for _ in 0..4 {
                            code = code * 16 + u32::from(self.next_hex()?);
                        }
                        out.push(
                            char::from_u32(code)
                                .ok_or(LiteralError::InvalidEscape(self.pos))?,
                        );
                    }
                    _ => return Err(LiteralError::InvalidEscape(self.pos - 1)),
                }
                continue;
            }
            // Consume one full UTF-8 scalar.
            let rest = std::str::from_utf8(&self.bytes[self.pos..])
                .map_err(|_| LiteralError::UnterminatedString(start))?;
            let ch = rest.chars().next().ok_or(LiteralError::UnterminatedString(start))?;
            out.push(ch);
            self.pos += ch.len_utf8();
        }
    }

    fn next_hex(&mut self) -> Result<u8, LiteralError> {
        let Some(b) = self.peek() else {
            return Err(LiteralError::UnexpectedEnd);
        };
        let digit = (b as char)
            .to_digit(16)
            .ok_or(LiteralError::InvalidEscape(self.pos))?;
        self.pos += 1;
        Ok(digit as u8)
    }

    fn parse_list(&mut self) -> Result<Value, LiteralError> {
        self.eat(b'[')?;
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() == Some(b']') {
                self.pos += 1;
                return Ok(Value::List(items));
            }
            items.push(self.parse_value()?);
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b']') => {}
                Some(b) => return Err(LiteralError::UnexpectedChar(b as char, self.pos)),
                None => return Err(LiteralError::UnexpectedEnd),
            }
        }
    }

    fn parse_tuple(&mut self) -> Result<Value, LiteralError> {
        self.eat(b'(')?;
        let mut items = Vec::new();
        let mut saw_comma = false;
        loop {
            self.skip_ws();
            if self.peek() == Some(b')') {
                self.pos += 1;
                // `(x)` without a comma is just a parenthesized value in
                // Python; require the comma for singleton tuples.
                if items.len() == 1 && !saw_comma {
                    return Ok(items.pop().expect("one item"));
                }
                return Ok(Value::Tuple(items));
            }
            items.push(self.parse_value()?);
            self.skip_ws();
            match self.peek() {
                Some(b',') => {
                    saw_comma = true;
                    self.pos += 1;
                }
                Some(b')') => {}
                Some(b) => return Err(LiteralError::UnexpectedChar(b as char, self.pos)),
                None => return Err(LiteralError::UnexpectedEnd),
            }
        }
    }

    fn parse_dict(&mut self) -> Result<Value, LiteralError> {
        self.eat(b'{')?;
        let mut entries: Vec<(Value, Value)> = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() == Some(b'}') {
                self.pos += 1;
                return Ok(Value::Dict(entries));
            }
            let key_pos = self.pos;
            let key = self.parse_value()?;
            if !key.is_hashable() {
                return Err(LiteralError::UnhashableKey(key_pos));
            }
            self.skip_ws();
            self.eat(b':')?;
            let value = self.parse_value()?;
            // Later duplicate keys overwrite earlier ones, as in Python.
            if let Some(slot) = entries.iter_mut().find(|(k, _)| k.deep_eq(&key)) {
                slot.1 = value;
            } else {
                entries.push((key, value));
            }
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {}
                Some(b) => return Err(LiteralError::UnexpectedChar(b as char, self.pos)),
                None => return Err(LiteralError::UnexpectedEnd),
            }
        }
    }
}
