//! Supernatural numbers (generalized integers) and the decision procedure
//! for unital separable UHF algebras: two presentations give isomorphic —
//! equivalently, elementarily equivalent — algebras exactly when their
//! generalized integers agree.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent in N ∪ {∞}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exp {
    Finite(u32),
    Infinite,
}

impl Exp {
    fn add(self, rhs: Exp) -> Exp {
        match (self, rhs) {
            (Exp::Finite(a), Exp::Finite(b)) => Exp::Finite(a + b),
            _ => Exp::Infinite,
        }
    }

    fn le(self, rhs: Exp) -> bool {
        match (self, rhs) {
            (_, Exp::Infinite) => true,
            (Exp::Infinite, Exp::Finite(_)) => false,
            (Exp::Finite(a), Exp::Finite(b)) => a <= b,
        }
    }
}

impl Serialize for Exp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exp::Finite(n) => s.serialize_u32(*n),
            Exp::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::Number(n) => n
                .as_u64()
                .and_then(|n| u32::try_from(n).ok())
                .map(Exp::Finite)
                .ok_or_else(|| D::Error::custom("exponent out of range")),
            serde_json::Value::String(s) if s == "inf" => Ok(Exp::Infinite),
            other => Err(D::Error::custom(format!("bad exponent {other}"))),
        }
    }
}

/// Generalized integer: a formal product of prime powers with exponents in
/// N ∪ {∞}, stored sparsely (no zero exponents).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Supernatural {
    exps: BTreeMap<u64, Exp>,
}

#[derive(Serialize, Deserialize)]
struct PrimePower {
    p: u64,
    e: Exp,
}

impl Serialize for Supernatural {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let list: Vec<PrimePower> =
            self.exps.iter().map(|(&p, &e)| PrimePower { p, e }).collect();
        list.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Supernatural {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let list = Vec::<PrimePower>::deserialize(d)?;
        let mut exps = BTreeMap::new();
        for pp in list {
            if !is_prime(pp.p) {
                return Err(D::Error::custom(format!("{} is not prime", pp.p)));
            }
            if pp.e != Exp::Finite(0) {
                exps.insert(pp.p, pp.e);
            }
        }
        Ok(Supernatural { exps })
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn factorize(mut n: u64) -> BTreeMap<u64, u32> {
    let mut out = BTreeMap::new();
    let mut d = 2u64;
    while d * d <= n {
        while n % d == 0 {
            *out.entry(d).or_insert(0) += 1;
            n /= d;
        }
        d += 1;
    }
    if n > 1 {
        *out.entry(n).or_insert(0) += 1;
    }
    out
}

impl Supernatural {
    pub fn one() -> Self {
        Supernatural::default()
    }

    pub fn from_integer(n: u64) -> Self {
        let mut s = Supernatural::default();
        for (p, e) in factorize(n) {
            s.exps.insert(p, Exp::Finite(e));
        }
        s
    }

    pub fn set(&mut self, p: u64, e: Exp) -> Result<()> {
        if !is_prime(p) {
            return Err(Error::InvalidArg(format!("{p} is not prime")));
        }
        if e == Exp::Finite(0) {
            self.exps.remove(&p);
        } else {
            self.exps.insert(p, e);
        }
        Ok(())
    }

    pub fn exponent(&self, p: u64) -> Exp {
        self.exps.get(&p).copied().unwrap_or(Exp::Finite(0))
    }

    pub fn exponents(&self) -> &BTreeMap<u64, Exp> {
        &self.exps
    }

    /// Pointwise exponent sum; ∞ absorbs.
    pub fn mul(&self, rhs: &Supernatural) -> Supernatural {
        let mut out = self.clone();
        for (&p, &e) in &rhs.exps {
            let cur = out.exponent(p);
            out.exps.insert(p, cur.add(e));
        }
        out
    }

    /// Pointwise exponent comparison.
    pub fn divides(&self, rhs: &Supernatural) -> bool {
        self.exps.iter().all(|(&p, &e)| e.le(rhs.exponent(p)))
    }

    /// Does the positive integer k divide this generalized integer?
    pub fn divisible_by_int(&self, k: u64) -> bool {
        if k == 0 {
            return false;
        }
        factorize(k)
            .into_iter()
            .all(|(p, e)| Exp::Finite(e).le(self.exponent(p)))
    }
}

impl fmt::Display for Supernatural {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exps.is_empty() {
            return write!(f, "1");
        }
        let mut first = true;
        for (&p, &e) in &self.exps {
            if !first {
                write!(f, "*")?;
            }
            first = false;
            match e {
                Exp::Finite(1) => write!(f, "{p}")?,
                Exp::Finite(n) => write!(f, "{p}^{n}")?,
                Exp::Infinite => write!(f, "{p}^inf")?,
            }
        }
        Ok(())
    }
}

/// Presentation of ⊗_i M_{k_i} as a finite prefix followed by an eventually
/// repeating period (possibly empty in either part).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UhfPresentation {
    pub prefix: Vec<u64>,
    pub period: Vec<u64>,
}

impl UhfPresentation {
    pub fn new(prefix: Vec<u64>, period: Vec<u64>) -> Result<Self> {
        if prefix.is_empty() && period.is_empty() {
            return Err(Error::InvalidArg("presentation must name at least one factor".into()));
        }
        if prefix.iter().chain(&period).any(|&k| k == 0) {
            return Err(Error::InvalidArg("tensor factors must be >= 1".into()));
        }
        Ok(UhfPresentation { prefix, period })
    }

    /// Text forms: `2,3,5` (finite), `6*` (6 repeated), `2,3,5*` (prefix then
    /// the last factor repeated), `2,(3,5)*` (prefix then a repeating group).
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::BadInput(format!("bad presentation `{text}`: {m}"));
        let t = text.trim();
        if t.is_empty() {
            return Err(bad("empty"));
        }
        let parse_list = |s: &str| -> Result<Vec<u64>> {
            s.split(',')
                .map(|w| {
                    w.trim()
                        .parse::<u64>()
                        .map_err(|_| bad(&format!("`{w}` is not a positive integer")))
                })
                .collect()
        };
        if let Some(idx) = t.find('(') {
            let (head, rest) = t.split_at(idx);
            let rest = rest.strip_prefix('(').unwrap();
            let Some(rest) = rest.strip_suffix(")*") else {
                return Err(bad("a `(...)` group must be followed by `*`"));
            };
            let prefix = {
                let head = head.trim().trim_end_matches(',');
                if head.is_empty() {
                    vec![]
                } else {
                    parse_list(head)?
                }
            };
            return UhfPresentation::new(prefix, parse_list(rest)?);
        }
        if let Some(stripped) = t.strip_suffix('*') {
            let mut all = parse_list(stripped)?;
            let last = all.pop().ok_or_else(|| bad("nothing before `*`"))?;
            return UhfPresentation::new(all, vec![last]);
        }
        UhfPresentation::new(parse_list(t)?, vec![])
    }

    /// The first n tensor factors.
    pub fn factors(&self, n: usize) -> Vec<u64> {
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            if i < self.prefix.len() {
                out.push(self.prefix[i]);
            } else if self.period.is_empty() {
                break;
            } else {
                out.push(self.period[(i - self.prefix.len()) % self.period.len()]);
            }
        }
        out
    }
}

impl fmt::Display for UhfPresentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list =
            |v: &[u64]| v.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",");
        match (self.prefix.is_empty(), self.period.is_empty()) {
            (_, true) => write!(f, "{}", list(&self.prefix)),
            (true, false) => write!(f, "({})*", list(&self.period)),
            (false, false) => write!(f, "{},({})*", list(&self.prefix), list(&self.period)),
        }
    }
}

/// Generalized integer of a presentation: exponent sums over the prefix,
/// with every prime occurring in the period pushed to ∞.
pub fn supernatural_of(p: &UhfPresentation) -> Supernatural {
    let mut s = Supernatural::one();
    for &k in &p.prefix {
        s = s.mul(&Supernatural::from_integer(k));
    }
    for &k in &p.period {
        for (prime, _) in factorize(k) {
            s.exps.insert(prime, Exp::Infinite);
        }
    }
    s
}

/// The shared verdict for unital separable UHF algebras: isomorphism and
/// elementary equivalence coincide and are decided by the generalized
/// integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UhfVerdict {
    IsomorphicAndElementarilyEquivalent,
    Neither,
}

pub fn uhf_equivalent(a: &UhfPresentation, b: &UhfPresentation) -> UhfVerdict {
    if supernatural_of(a) == supernatural_of(b) {
        UhfVerdict::IsomorphicAndElementarilyEquivalent
    } else {
        UhfVerdict::Neither
    }
}

/// Does the algebra presented by `p` contain a unital copy of M_k? True
/// exactly when k divides the generalized integer.
pub fn unital_copy_exists(p: &UhfPresentation, k: u64) -> Result<bool> {
    if k == 0 {
        return Err(Error::InvalidArg("k must be >= 1".into()));
    }
    Ok(supernatural_of(p).divisible_by_int(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pres(text: &str) -> UhfPresentation {
        UhfPresentation::parse(text).unwrap()
    }

    #[test]
    fn supernatural_of_examples() {
        // CAR algebra: 2^inf.
        let car = supernatural_of(&pres("2*"));
        assert_eq!(car.exponent(2), Exp::Infinite);
        assert_eq!(car.exponent(3), Exp::Finite(0));
        // 6 repeated: 2^inf * 3^inf.
        let s6 = supernatural_of(&pres("6*"));
        assert_eq!(s6.exponent(2), Exp::Infinite);
        assert_eq!(s6.exponent(3), Exp::Infinite);
        // Prefix 2,3 then 5 repeated: 2 * 3 * 5^inf.
        let s = supernatural_of(&pres("2,3,5*"));
        assert_eq!(s.exponent(2), Exp::Finite(1));
        assert_eq!(s.exponent(3), Exp::Finite(1));
        assert_eq!(s.exponent(5), Exp::Infinite);
    }

    #[test]
    fn arithmetic_examples() {
        let a = supernatural_of(&pres("2*")).mul(&Supernatural::from_integer(3));
        let b = supernatural_of(&pres("6*"));
        assert!(a.divides(&b));
        assert!(!b.divides(&a));
        // ∞ absorbs multiplication.
        let c = supernatural_of(&pres("2*")).mul(&Supernatural::from_integer(2));
        assert_eq!(c, supernatural_of(&pres("2*")));
        // (6,6,...) equals 2^inf * 3^inf.
        let mut d = Supernatural::one();
        d.set(2, Exp::Infinite).unwrap();
        d.set(3, Exp::Infinite).unwrap();
        assert_eq!(d, b);
    }

    #[test]
    fn equivalence_examples() {
        assert_eq!(
            uhf_equivalent(&pres("2*"), &pres("4*")),
            UhfVerdict::IsomorphicAndElementarilyEquivalent
        );
        assert_eq!(uhf_equivalent(&pres("2*"), &pres("3*")), UhfVerdict::Neither);
        assert_eq!(
            uhf_equivalent(&pres("(2,3)*"), &pres("6*")),
            UhfVerdict::IsomorphicAndElementarilyEquivalent
        );
    }

    #[test]
    fn unital_copy_examples() {
        assert!(unital_copy_exists(&pres("2*"), 8).unwrap());
        assert!(!unital_copy_exists(&pres("2*"), 6).unwrap());
        assert!(unital_copy_exists(&pres("2,3,5*"), 30).unwrap());
        assert!(!unital_copy_exists(&pres("2,3,5*"), 9).unwrap());
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(pres("2*"), UhfPresentation::new(vec![], vec![2]).unwrap());
        assert_eq!(pres("2,3"), UhfPresentation::new(vec![2, 3], vec![]).unwrap());
        assert_eq!(pres("2,(3,5)*"), UhfPresentation::new(vec![2], vec![3, 5]).unwrap());
        assert_eq!(pres("2,3,5*"), UhfPresentation::new(vec![2, 3], vec![5]).unwrap());
        assert!(UhfPresentation::parse("").is_err());
        assert!(UhfPresentation::parse("2,0").is_err());
        let p = pres("2,(3,5)*");
        assert_eq!(UhfPresentation::parse(&p.to_string()).unwrap(), p);
        assert_eq!(p.factors(5), vec![2, 3, 5, 3, 5]);
    }

    #[test]
    fn serde_format() {
        let s = supernatural_of(&pres("2,3,5*"));
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"[{"p":2,"e":1},{"p":3,"e":1},{"p":5,"e":"inf"}]"#);
        let back: Supernatural = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}
