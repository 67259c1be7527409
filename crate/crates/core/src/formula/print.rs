//! Canonical printer. `parse(print(f))` returns a structurally equal AST;
//! the printer is the single source of concrete syntax for formulas.

use num_traits::{Signed, Zero};

use super::ast::{ComplexRational, Formula, PiecewiseLinear, Rational, Term};

pub fn print_formula(f: &Formula) -> String {
    let mut s = String::new();
    fmt_formula(f, &mut s);
    s
}

pub fn print_term(t: &Term) -> String {
    let mut s = String::new();
    fmt_term(t, 1, &mut s);
    s
}

fn fmt_formula(f: &Formula, out: &mut String) {
    match f {
        Formula::Atomic(t) => {
            out.push_str("norm(");
            fmt_term(t, 1, out);
            out.push(')');
        }
        Formula::Max(a, b) => fmt_conn("max", a, b, out),
        Formula::Min(a, b) => fmt_conn("min", a, b, out),
        Formula::Add(a, b) => fmt_conn("add", a, b, out),
        Formula::TSub(a, b) => fmt_conn("tsub", a, b, out),
        Formula::AbsDiff(a, b) => fmt_conn("absdiff", a, b, out),
        Formula::Scale(q, g) => {
            out.push_str(&fmt_rational(*q));
            out.push('*');
            fmt_formula(g, out);
        }
        Formula::Pl(pl, g) => {
            out.push_str("pl[");
            fmt_breakpoints(pl, out);
            out.push_str("](");
            fmt_formula(g, out);
            out.push(')');
        }
        Formula::Inf { var, bound, body } => fmt_quant("inf", 'x', *var, *bound, body, out),
        Formula::Sup { var, bound, body } => fmt_quant("sup", 'x', *var, *bound, body, out),
        Formula::InfC { var, bound, body } => fmt_quant("infc", 'z', *var, *bound, body, out),
        Formula::SupC { var, bound, body } => fmt_quant("supc", 'z', *var, *bound, body, out),
    }
}

fn fmt_conn(name: &str, a: &Formula, b: &Formula, out: &mut String) {
    out.push_str(name);
    out.push('(');
    fmt_formula(a, out);
    out.push(',');
    fmt_formula(b, out);
    out.push(')');
}

fn fmt_quant(kw: &str, sort: char, var: u32, bound: Rational, body: &Formula, out: &mut String) {
    out.push_str(kw);
    out.push('{');
    out.push(sort);
    out.push_str(&var.to_string());
    out.push(':');
    out.push_str(&fmt_rational(bound));
    out.push_str("} ");
    fmt_formula(body, out);
}

fn fmt_breakpoints(pl: &PiecewiseLinear, out: &mut String) {
    for (i, (x, y)) in pl.points().iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        out.push_str(&fmt_rational(*x));
        out.push(',');
        out.push_str(&fmt_rational(*y));
    }
}

/// Term precedence: 1 = +/-, 2 = *, 3 = postfix ^*, 4 = atoms.
fn term_level(t: &Term) -> u8 {
    match t {
        Term::Add(..) | Term::Sub(..) => 1,
        Term::Mul(..) => 2,
        Term::Adjoint(..) => 3,
        Term::Var(_) | Term::CVar(_) | Term::Lit(_) => 4,
    }
}

fn fmt_term(t: &Term, min_level: u8, out: &mut String) {
    let level = term_level(t);
    let parens = level < min_level;
    if parens {
        out.push('(');
    }
    match t {
        Term::Var(i) => {
            out.push('x');
            out.push_str(&i.to_string());
        }
        Term::CVar(i) => {
            out.push('z');
            out.push_str(&i.to_string());
        }
        Term::Lit(c) => out.push_str(&fmt_complex_rational(c)),
        Term::Add(a, b) => {
            fmt_term(a, 1, out);
            out.push_str(" + ");
            fmt_term(b, 2, out);
        }
        Term::Sub(a, b) => {
            fmt_term(a, 1, out);
            out.push_str(" - ");
            fmt_term(b, 2, out);
        }
        Term::Mul(a, b) => {
            fmt_term(a, 2, out);
            out.push('*');
            fmt_term(b, 3, out);
        }
        Term::Adjoint(a) => {
            fmt_term(a, 4, out);
            out.push_str("^*");
        }
    }
    if parens {
        out.push(')');
    }
}

pub fn fmt_rational(q: Rational) -> String {
    q.to_string()
}

/// Single-token complex rational: `3/4`, `-2i`, `1/2-3i`. Never contains
/// whitespace, so the lexer can tell it apart from binary +/- in terms.
pub fn fmt_complex_rational(c: &ComplexRational) -> String {
    if c.im.is_zero() {
        fmt_rational(c.re)
    } else if c.re.is_zero() {
        format!("{}i", fmt_rational(c.im))
    } else {
        let sign = if c.im.is_negative() { "-" } else { "+" };
        format!("{}{}{}i", fmt_rational(c.re), sign, fmt_rational(c.im.abs()))
    }
}

impl std::fmt::Display for Formula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&print_formula(self))
    }
}

impl std::fmt::Display for Term {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&print_term(self))
    }
}
