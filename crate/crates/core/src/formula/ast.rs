//! AST for formulas of the logic for metric structures over C*-algebras.
//!
//! Terms are *-polynomials in element variables `x_i` and scalar variables
//! `z_i`; scalar values act as multiples of the unit. Atomic formulas are
//! norms of terms; formulas are closed under a fixed library of continuous
//! connectives and under inf/sup quantifiers bounded by a ball radius
//! (element sort) or disk radius (scalar sort). Quantifier bounds, scalar
//! literals, and connective coefficients are exact rationals.

use std::collections::BTreeSet;

use num_rational::Ratio;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = Ratio<i64>;

/// Exact complex-rational scalar.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ComplexRational {
    pub re: Rational,
    pub im: Rational,
}

impl ComplexRational {
    pub fn new(re: Rational, im: Rational) -> Self {
        ComplexRational { re, im }
    }

    pub fn real(re: Rational) -> Self {
        ComplexRational { re, im: Rational::zero() }
    }

    pub fn from_int(n: i64) -> Self {
        Self::real(Rational::from_integer(n))
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn to_complex(&self) -> num_complex::Complex64 {
        num_complex::Complex64::new(ratio_to_f64(self.re), ratio_to_f64(self.im))
    }

    pub fn abs_f64(&self) -> f64 {
        self.to_complex().norm()
    }

    /// Exact dyadic conversion when the denominator fits; otherwise rounds to
    /// 40 fractional bits (absolute error below 1e-12).
    pub fn from_f64_lossy(re: f64, im: f64) -> Self {
        ComplexRational { re: ratio_from_f64_lossy(re), im: ratio_from_f64_lossy(im) }
    }
}

pub fn ratio_to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub fn ratio_from_f64_lossy(x: f64) -> Rational {
    if x == 0.0 {
        return Rational::zero();
    }
    assert!(x.is_finite(), "cannot convert non-finite float");
    let (mant, exp, sign) = {
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1i64 } else { 1i64 };
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        if exp == 0 {
            (frac, -1074i64, sign)
        } else {
            (frac | (1u64 << 52), exp - 1075, sign)
        }
    };
    let mut mant = mant;
    let mut exp = exp;
    while mant & 1 == 0 && mant != 0 {
        mant >>= 1;
        exp += 1;
    }
    if exp >= 0 {
        if exp < 10 && mant.checked_shl(exp as u32).map_or(false, |v| v <= i64::MAX as u64) {
            return Rational::from_integer(sign * ((mant << exp) as i64));
        }
        // Huge magnitudes do not occur for unit-ball coordinates; saturate.
        return Rational::from_integer(sign * i64::MAX / 2);
    }
    let shift = -exp;
    if shift <= 62 && mant <= i64::MAX as u64 {
        return Rational::new(sign * mant as i64, 1i64 << shift);
    }
    // Round to 40 fractional bits.
    let scaled = (x * (1u64 << 40) as f64).round() as i64;
    Rational::new(scaled, 1i64 << 40)
}

/// *-polynomial term. The unit constant is the literal 1.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    /// Element variable x_i, i >= 1.
    Var(u32),
    /// Scalar variable z_i, i >= 1; denotes a complex number acting as z*1.
    CVar(u32),
    /// Complex-rational scalar literal, acting as a multiple of the unit.
    Lit(ComplexRational),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
    /// Adjoint t^*.
    Adjoint(Box<Term>),
}

impl Term {
    pub fn var(i: u32) -> Term {
        Term::Var(i)
    }

    pub fn cvar(i: u32) -> Term {
        Term::CVar(i)
    }

    pub fn one() -> Term {
        Term::Lit(ComplexRational::one())
    }

    pub fn lit(c: ComplexRational) -> Term {
        Term::Lit(c)
    }

    pub fn add(self, rhs: Term) -> Term {
        Term::Add(Box::new(self), Box::new(rhs))
    }

    pub fn sub(self, rhs: Term) -> Term {
        Term::Sub(Box::new(self), Box::new(rhs))
    }

    pub fn mul(self, rhs: Term) -> Term {
        Term::Mul(Box::new(self), Box::new(rhs))
    }

    pub fn adjoint(self) -> Term {
        Term::Adjoint(Box::new(self))
    }

    fn collect_vars(&self, el: &mut BTreeSet<u32>, sc: &mut BTreeSet<u32>) {
        match self {
            Term::Var(i) => {
                el.insert(*i);
            }
            Term::CVar(i) => {
                sc.insert(*i);
            }
            Term::Lit(_) => {}
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => {
                a.collect_vars(el, sc);
                b.collect_vars(el, sc);
            }
            Term::Adjoint(a) => a.collect_vars(el, sc),
        }
    }
}

/// Monotone nondecreasing piecewise-linear map on [0, inf).
///
/// Breakpoints have strictly increasing x starting at 0 and nondecreasing
/// nonnegative y; the map clamps to the first/last y outside the breakpoint
/// range, so its Lipschitz constant is the maximal segment slope.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    points: Vec<(Rational, Rational)>,
}

impl PiecewiseLinear {
    pub fn new(points: Vec<(Rational, Rational)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArg("piecewise-linear map needs breakpoints".into()));
        }
        if !points[0].0.is_zero() {
            return Err(Error::InvalidArg("first breakpoint must have x = 0".into()));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidArg("breakpoint x values must strictly increase".into()));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::InvalidArg("breakpoint y values must not decrease".into()));
            }
        }
        if points.iter().any(|(_, y)| y.is_negative()) {
            return Err(Error::InvalidArg("breakpoint y values must be nonnegative".into()));
        }
        Ok(PiecewiseLinear { points })
    }

    pub fn points(&self) -> &[(Rational, Rational)] {
        &self.points
    }

    pub fn eval(&self, t: f64) -> f64 {
        let pts: Vec<(f64, f64)> =
            self.points.iter().map(|&(x, y)| (ratio_to_f64(x), ratio_to_f64(y))).collect();
        if t <= pts[0].0 {
            return pts[0].1;
        }
        for w in pts.windows(2) {
            if t <= w[1].0 {
                let s = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                return w[0].1 + s * (t - w[0].0);
            }
        }
        pts.last().unwrap().1
    }

    pub fn max_slope(&self) -> f64 {
        let mut best = 0.0f64;
        for w in self.points.windows(2) {
            let s = ratio_to_f64((w[1].1 - w[0].1) / (w[1].0 - w[0].0));
            best = best.max(s);
        }
        best
    }

    /// min(t, c) as a breakpoint list.
    pub fn truncation(c: Rational) -> Result<Self> {
        PiecewiseLinear::new(vec![(Rational::zero(), Rational::zero()), (c, c)])
    }
}

/// Formula of the logic for metric structures.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    /// ||t||
    Atomic(Term),
    Max(Box<Formula>, Box<Formula>),
    Min(Box<Formula>, Box<Formula>),
    Add(Box<Formula>, Box<Formula>),
    /// Truncated subtraction max(phi - psi, 0).
    TSub(Box<Formula>, Box<Formula>),
    /// |phi - psi|
    AbsDiff(Box<Formula>, Box<Formula>),
    /// q * phi with q a nonnegative rational.
    Scale(Rational, Box<Formula>),
    /// Composition with a piecewise-linear monotone map.
    Pl(PiecewiseLinear, Box<Formula>),
    /// inf over the element ball ||x_var|| <= bound.
    Inf { var: u32, bound: Rational, body: Box<Formula> },
    Sup { var: u32, bound: Rational, body: Box<Formula> },
    /// inf over the scalar disk |z_var| <= bound.
    InfC { var: u32, bound: Rational, body: Box<Formula> },
    SupC { var: u32, bound: Rational, body: Box<Formula> },
}

impl Formula {
    pub fn atomic(t: Term) -> Formula {
        Formula::Atomic(t)
    }

    pub fn max(self, rhs: Formula) -> Formula {
        Formula::Max(Box::new(self), Box::new(rhs))
    }

    pub fn min(self, rhs: Formula) -> Formula {
        Formula::Min(Box::new(self), Box::new(rhs))
    }

    pub fn add(self, rhs: Formula) -> Formula {
        Formula::Add(Box::new(self), Box::new(rhs))
    }

    pub fn tsub(self, rhs: Formula) -> Formula {
        Formula::TSub(Box::new(self), Box::new(rhs))
    }

    pub fn absdiff(self, rhs: Formula) -> Formula {
        Formula::AbsDiff(Box::new(self), Box::new(rhs))
    }

    pub fn scale(q: Rational, f: Formula) -> Formula {
        Formula::Scale(q, Box::new(f))
    }

    pub fn inf(var: u32, bound: Rational, body: Formula) -> Formula {
        Formula::Inf { var, bound, body: Box::new(body) }
    }

    pub fn sup(var: u32, bound: Rational, body: Formula) -> Formula {
        Formula::Sup { var, bound, body: Box::new(body) }
    }

    pub fn inf_scalar(var: u32, bound: Rational, body: Formula) -> Formula {
        Formula::InfC { var, bound, body: Box::new(body) }
    }

    pub fn sup_scalar(var: u32, bound: Rational, body: Formula) -> Formula {
        Formula::SupC { var, bound, body: Box::new(body) }
    }

    /// Balanced max of a nonempty list (keeps tree depth logarithmic).
    pub fn max_of(mut items: Vec<Formula>) -> Formula {
        assert!(!items.is_empty());
        while items.len() > 1 {
            let mut next = Vec::with_capacity(items.len().div_ceil(2));
            let mut it = items.into_iter();
            while let Some(a) = it.next() {
                match it.next() {
                    Some(b) => next.push(a.max(b)),
                    None => next.push(a),
                }
            }
            items = next;
        }
        items.pop().unwrap()
    }

    /// Balanced sum of a nonempty list.
    pub fn sum_of(mut items: Vec<Formula>) -> Formula {
        assert!(!items.is_empty());
        while items.len() > 1 {
            let mut next = Vec::with_capacity(items.len().div_ceil(2));
            let mut it = items.into_iter();
            while let Some(a) = it.next() {
                match it.next() {
                    Some(b) => next.push(a.add(b)),
                    None => next.push(a),
                }
            }
            items = next;
        }
        items.pop().unwrap()
    }

    /// Free element variables.
    pub fn free_vars(&self) -> BTreeSet<u32> {
        self.free_vars_pair().0
    }

    /// Free scalar variables.
    pub fn free_cvars(&self) -> BTreeSet<u32> {
        self.free_vars_pair().1
    }

    pub fn free_vars_pair(&self) -> (BTreeSet<u32>, BTreeSet<u32>) {
        match self {
            Formula::Atomic(t) => {
                let mut el = BTreeSet::new();
                let mut sc = BTreeSet::new();
                t.collect_vars(&mut el, &mut sc);
                (el, sc)
            }
            Formula::Max(a, b)
            | Formula::Min(a, b)
            | Formula::Add(a, b)
            | Formula::TSub(a, b)
            | Formula::AbsDiff(a, b) => {
                let (mut el, mut sc) = a.free_vars_pair();
                let (el2, sc2) = b.free_vars_pair();
                el.extend(el2);
                sc.extend(sc2);
                (el, sc)
            }
            Formula::Scale(_, f) | Formula::Pl(_, f) => f.free_vars_pair(),
            Formula::Inf { var, body, .. } | Formula::Sup { var, body, .. } => {
                let (mut el, sc) = body.free_vars_pair();
                el.remove(var);
                (el, sc)
            }
            Formula::InfC { var, body, .. } | Formula::SupC { var, body, .. } => {
                let (el, mut sc) = body.free_vars_pair();
                sc.remove(var);
                (el, sc)
            }
        }
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::Atomic(_) => true,
            Formula::Max(a, b)
            | Formula::Min(a, b)
            | Formula::Add(a, b)
            | Formula::TSub(a, b)
            | Formula::AbsDiff(a, b) => a.is_quantifier_free() && b.is_quantifier_free(),
            Formula::Scale(_, f) | Formula::Pl(_, f) => f.is_quantifier_free(),
            _ => false,
        }
    }

    /// Closed formula (no free variables of either sort).
    pub fn is_sentence(&self) -> bool {
        let (el, sc) = self.free_vars_pair();
        el.is_empty() && sc.is_empty()
    }
}

/// phi <= r or phi >= r.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Ge,
    Le,
}

/// An inequality condition on unit-ball tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub formula: Formula,
    pub rel: Rel,
    pub threshold: Rational,
}

impl Condition {
    pub fn new(formula: Formula, rel: Rel, threshold: Rational) -> Result<Self> {
        if threshold.is_negative() {
            return Err(Error::InvalidArg("condition threshold must be nonnegative".into()));
        }
        Ok(Condition { formula, rel, threshold })
    }

    pub fn ge(formula: Formula, threshold: Rational) -> Result<Self> {
        Self::new(formula, Rel::Ge, threshold)
    }

    pub fn le(formula: Formula, threshold: Rational) -> Result<Self> {
        Self::new(formula, Rel::Le, threshold)
    }
}

/// A named, finitely materialized family of conditions in variables
/// x_1..x_arity, always including the unit-ball conditions ||x_i|| <= 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeSchema {
    pub name: String,
    pub arity: u32,
    pub conditions: Vec<Condition>,
}

impl TypeSchema {
    pub fn new(name: impl Into<String>, arity: u32, mut conditions: Vec<Condition>) -> Result<Self> {
        let name = name.into();
        for i in 1..=arity {
            conditions.push(Condition::le(
                Formula::Atomic(Term::Var(i)),
                Rational::from_integer(1),
            )?);
        }
        let schema = TypeSchema { name, arity, conditions };
        for c in &schema.conditions {
            if let Some(&v) = c.formula.free_vars().iter().max() {
                if v > arity {
                    return Err(Error::InvalidArg(format!(
                        "condition uses x{v} beyond schema arity {arity}"
                    )));
                }
            }
        }
        Ok(schema)
    }
}
