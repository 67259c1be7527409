//! Recursive-descent parser for the formula grammar. Errors carry 1-based
//! line/column positions; unexpected end of input is anchored at the last
//! token seen.
//!
//! The published grammar lives in `docs/grammar.ebnf`. Complex-rational
//! literals are single tokens without interior whitespace (`3/4-1/2i`), so
//! they never collide with binary `+`/`-` between terms, which the printer
//! always surrounds with spaces.

use num_rational::Ratio;
use num_traits::{Signed, Zero};

use super::ast::{ComplexRational, Formula, PiecewiseLinear, Rational, Term};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(u32),
    CVar(u32),
    Num(ComplexRational),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Plus,
    Minus,
    Star,
    AdjOp,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Var(i) => format!("`x{i}`"),
            Tok::CVar(i) => format!("`z{i}`"),
            Tok::Num(_) => "number".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::AdjOp => "`^*`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn err(&self, line: usize, col: usize, msg: impl Into<String>) -> Error {
        Error::ParseError { line, col, msg: msg.into() }
    }

    fn peek_ch(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek_ch()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek_ch(), Some(b' ') | Some(b'\t') | Some(b'\r') | Some(b'\n')) {
            self.bump();
        }
    }

    fn lex_digits(&mut self) -> Option<u64> {
        let start = self.pos;
        while matches!(self.peek_ch(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        if self.pos == start {
            return None;
        }
        std::str::from_utf8(&self.src[start..self.pos]).ok()?.parse().ok()
    }

    /// Unsigned rational: digits [ "/" digits ].
    fn lex_unsigned_rational(&mut self) -> Result<Rational> {
        let (line, col) = (self.line, self.col);
        let numer =
            self.lex_digits().ok_or_else(|| self.err(line, col, "expected a number"))? as i64;
        if self.peek_ch() == Some(b'/') {
            self.bump();
            let (dl, dc) = (self.line, self.col);
            let denom =
                self.lex_digits().ok_or_else(|| self.err(dl, dc, "expected a denominator"))?;
            if denom == 0 {
                return Err(self.err(dl, dc, "zero denominator"));
            }
            Ok(Ratio::new(numer, denom as i64))
        } else {
            Ok(Ratio::from_integer(numer))
        }
    }

    /// `i` marker: consumed only when not followed by an identifier character.
    fn try_imag_marker(&mut self) -> bool {
        if self.peek_ch() == Some(b'i') {
            let next = self.src.get(self.pos + 1).copied();
            if !matches!(next, Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                self.bump();
                return true;
            }
        }
        false
    }

    /// Complex rational, `sign_ok` per the token context.
    fn lex_number(&mut self, sign_ok: bool) -> Result<ComplexRational> {
        let negative = if sign_ok && self.peek_ch() == Some(b'-') {
            self.bump();
            true
        } else {
            false
        };
        let mut r1 = self.lex_unsigned_rational()?;
        if negative {
            r1 = -r1;
        }
        if self.try_imag_marker() {
            return Ok(ComplexRational::new(Rational::zero(), r1));
        }
        // Possible mixed literal: +/- rational i, with no whitespace.
        if matches!(self.peek_ch(), Some(b'+') | Some(b'-')) {
            let save = (self.pos, self.line, self.col);
            let neg2 = self.bump() == Some(b'-');
            if self.peek_ch().map_or(false, |c| c.is_ascii_digit()) {
                if let Ok(mut r2) = self.lex_unsigned_rational() {
                    if self.try_imag_marker() {
                        if neg2 {
                            r2 = -r2;
                        }
                        return Ok(ComplexRational::new(r1, r2));
                    }
                }
            }
            (self.pos, self.line, self.col) = save;
        }
        Ok(ComplexRational::real(r1))
    }

    fn next_token(&mut self, prev_is_operand: bool) -> Result<Spanned> {
        self.skip_ws();
        let (line, col) = (self.line, self.col);
        let Some(c) = self.peek_ch() else {
            return Ok(Spanned { tok: Tok::Eof, line, col });
        };
        let tok = match c {
            b'(' => {
                self.bump();
                Tok::LParen
            }
            b')' => {
                self.bump();
                Tok::RParen
            }
            b'{' => {
                self.bump();
                Tok::LBrace
            }
            b'}' => {
                self.bump();
                Tok::RBrace
            }
            b'[' => {
                self.bump();
                Tok::LBracket
            }
            b']' => {
                self.bump();
                Tok::RBracket
            }
            b',' => {
                self.bump();
                Tok::Comma
            }
            b';' => {
                self.bump();
                Tok::Semi
            }
            b':' => {
                self.bump();
                Tok::Colon
            }
            b'*' => {
                self.bump();
                Tok::Star
            }
            b'^' => {
                self.bump();
                if self.peek_ch() == Some(b'*') {
                    self.bump();
                    Tok::AdjOp
                } else {
                    return Err(self.err(line, col, "expected `^*`"));
                }
            }
            b'+' => {
                self.bump();
                Tok::Plus
            }
            b'-' => {
                if prev_is_operand {
                    self.bump();
                    Tok::Minus
                } else {
                    Tok::Num(self.lex_number(true)?)
                }
            }
            c if c.is_ascii_digit() => Tok::Num(self.lex_number(false)?),
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while matches!(self.peek_ch(), Some(ch) if ch.is_ascii_alphanumeric() || ch == b'_')
                {
                    self.bump();
                }
                let word = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                if let Some(rest) = word.strip_prefix('x') {
                    if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                        let idx: u32 = rest
                            .parse()
                            .map_err(|_| self.err(line, col, "variable index too large"))?;
                        if idx == 0 {
                            return Err(self.err(line, col, "variable indices start at 1"));
                        }
                        return Ok(Spanned { tok: Tok::Var(idx), line, col });
                    }
                }
                if let Some(rest) = word.strip_prefix('z') {
                    if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                        let idx: u32 = rest
                            .parse()
                            .map_err(|_| self.err(line, col, "variable index too large"))?;
                        if idx == 0 {
                            return Err(self.err(line, col, "variable indices start at 1"));
                        }
                        return Ok(Spanned { tok: Tok::CVar(idx), line, col });
                    }
                }
                Tok::Ident(word.to_string())
            }
            other => {
                return Err(self.err(line, col, format!("unexpected character `{}`", other as char)))
            }
        };
        Ok(Spanned { tok, line, col })
    }
}

struct Parser {
    toks: Vec<Spanned>,
    idx: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self> {
        let mut lexer = Lexer::new(src);
        let mut toks = Vec::new();
        let mut prev_is_operand = false;
        loop {
            let t = lexer.next_token(prev_is_operand)?;
            prev_is_operand = matches!(
                t.tok,
                Tok::Var(_) | Tok::CVar(_) | Tok::Num(_) | Tok::RParen | Tok::AdjOp
            );
            let is_eof = t.tok == Tok::Eof;
            toks.push(t);
            if is_eof {
                break;
            }
        }
        Ok(Parser { toks, idx: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.idx].tok
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.idx].clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    /// Error position: the offending token, or the previous token at EOF.
    fn err_here(&self, msg: impl Into<String>) -> Error {
        let here = &self.toks[self.idx];
        let (line, col) = if here.tok == Tok::Eof && self.idx > 0 {
            let prev = &self.toks[self.idx - 1];
            (prev.line, prev.col)
        } else {
            (here.line, here.col)
        };
        Error::ParseError { line, col, msg: msg.into() }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == &tok {
            self.bump();
            Ok(())
        } else {
            Err(self.err_here(format!("expected {what}, found {}", self.peek().describe())))
        }
    }

    fn parse_positive_rational(&mut self, what: &str) -> Result<Rational> {
        match self.peek().clone() {
            Tok::Num(c) if c.im.is_zero() && c.re > Rational::zero() => {
                self.bump();
                Ok(c.re)
            }
            _ => Err(self.err_here(format!("expected {what}"))),
        }
    }

    fn parse_rational(&mut self, what: &str) -> Result<Rational> {
        match self.peek().clone() {
            Tok::Num(c) if c.im.is_zero() => {
                self.bump();
                Ok(c.re)
            }
            _ => Err(self.err_here(format!("expected {what}"))),
        }
    }

    fn parse_formula(&mut self) -> Result<Formula> {
        match self.peek().clone() {
            Tok::Ident(name) => match name.as_str() {
                "norm" => {
                    self.bump();
                    self.expect(Tok::LParen, "`(`")?;
                    let t = self.parse_term()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Formula::Atomic(t))
                }
                "max" | "min" | "add" | "tsub" | "absdiff" => {
                    self.bump();
                    self.expect(Tok::LParen, "`(`")?;
                    let a = self.parse_formula()?;
                    self.expect(Tok::Comma, "`,`")?;
                    let b = self.parse_formula()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(match name.as_str() {
                        "max" => a.max(b),
                        "min" => a.min(b),
                        "add" => a.add(b),
                        "tsub" => a.tsub(b),
                        _ => a.absdiff(b),
                    })
                }
                "pl" => {
                    self.bump();
                    self.expect(Tok::LBracket, "`[`")?;
                    let mut pts = Vec::new();
                    loop {
                        let x = self.parse_rational("a breakpoint x value")?;
                        self.expect(Tok::Comma, "`,`")?;
                        let y = self.parse_rational("a breakpoint y value")?;
                        pts.push((x, y));
                        if self.peek() == &Tok::Semi {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    self.expect(Tok::RBracket, "`]`")?;
                    let pl = PiecewiseLinear::new(pts)
                        .map_err(|e| self.err_here(format!("bad breakpoints: {e}")))?;
                    self.expect(Tok::LParen, "`(`")?;
                    let f = self.parse_formula()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Formula::Pl(pl, Box::new(f)))
                }
                "inf" | "sup" => {
                    self.bump();
                    self.expect(Tok::LBrace, "`{`")?;
                    let var = match self.peek().clone() {
                        Tok::Var(i) => {
                            self.bump();
                            i
                        }
                        _ => return Err(self.err_here("expected an element variable `xN`")),
                    };
                    self.expect(Tok::Colon, "`:`")?;
                    let bound = self.parse_positive_rational("a positive rational bound")?;
                    self.expect(Tok::RBrace, "`}`")?;
                    let body = self.parse_formula()?;
                    Ok(if name == "inf" {
                        Formula::inf(var, bound, body)
                    } else {
                        Formula::sup(var, bound, body)
                    })
                }
                "infc" | "supc" => {
                    self.bump();
                    self.expect(Tok::LBrace, "`{`")?;
                    let var = match self.peek().clone() {
                        Tok::CVar(i) => {
                            self.bump();
                            i
                        }
                        _ => return Err(self.err_here("expected a scalar variable `zN`")),
                    };
                    self.expect(Tok::Colon, "`:`")?;
                    let bound = self.parse_positive_rational("a positive rational bound")?;
                    self.expect(Tok::RBrace, "`}`")?;
                    let body = self.parse_formula()?;
                    Ok(if name == "infc" {
                        Formula::inf_scalar(var, bound, body)
                    } else {
                        Formula::sup_scalar(var, bound, body)
                    })
                }
                other => Err(self.err_here(format!("unknown connective `{other}`"))),
            },
            Tok::Num(c) => {
                if !c.im.is_zero() || c.re.is_negative() {
                    return Err(self.err_here("scale coefficient must be a nonnegative rational"));
                }
                self.bump();
                self.expect(Tok::Star, "`*`")?;
                let f = self.parse_formula()?;
                Ok(Formula::Scale(c.re, Box::new(f)))
            }
            _ => Err(self.err_here(format!("expected a formula, found {}", self.peek().describe()))),
        }
    }

    fn parse_term(&mut self) -> Result<Term> {
        let mut lhs = self.parse_term_mul()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.parse_term_mul()?;
                    lhs = lhs.add(rhs);
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.parse_term_mul()?;
                    lhs = lhs.sub(rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term_mul(&mut self) -> Result<Term> {
        let mut lhs = self.parse_term_postfix()?;
        while self.peek() == &Tok::Star {
            self.bump();
            let rhs = self.parse_term_postfix()?;
            lhs = lhs.mul(rhs);
        }
        Ok(lhs)
    }

    fn parse_term_postfix(&mut self) -> Result<Term> {
        let mut t = self.parse_term_atom()?;
        while self.peek() == &Tok::AdjOp {
            self.bump();
            t = t.adjoint();
        }
        Ok(t)
    }

    fn parse_term_atom(&mut self) -> Result<Term> {
        match self.peek().clone() {
            Tok::Var(i) => {
                self.bump();
                Ok(Term::Var(i))
            }
            Tok::CVar(i) => {
                self.bump();
                Ok(Term::CVar(i))
            }
            Tok::Num(c) => {
                self.bump();
                Ok(Term::Lit(c))
            }
            Tok::LParen => {
                self.bump();
                let t = self.parse_term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            other => Err(self.err_here(format!("expected a term, found {}", other.describe()))),
        }
    }
}

/// Parse a formula from its concrete syntax.
pub fn parse(text: &str) -> Result<Formula> {
    let mut p = Parser::new(text)?;
    let f = p.parse_formula()?;
    if p.peek() != &Tok::Eof {
        return Err(p.err_here(format!("trailing input: {}", p.peek().describe())));
    }
    Ok(f)
}
