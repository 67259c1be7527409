//! Uniform-continuity bookkeeping. Every formula defines a function on tuples
//! that is Lipschitz for the max metric once each variable is confined to its
//! ball; this module computes an explicit bound on that constant from the
//! connective library metadata (composition multiplies moduli, products use
//! the ball radii). Free variables are assumed to range over the unit ball.

use std::collections::BTreeMap;

use super::ast::{ratio_to_f64, Formula, Term};

#[derive(Default, Clone)]
struct Bounds {
    element: BTreeMap<u32, f64>,
    scalar: BTreeMap<u32, f64>,
}

impl Bounds {
    fn element(&self, i: u32) -> f64 {
        self.element.get(&i).copied().unwrap_or(1.0)
    }
    fn scalar(&self, i: u32) -> f64 {
        self.scalar.get(&i).copied().unwrap_or(1.0)
    }
}

/// (value bound, Lipschitz bound) for a term under the variable bounds.
fn term_data(t: &Term, env: &Bounds) -> (f64, f64) {
    match t {
        Term::Var(i) => (env.element(*i), 1.0),
        Term::CVar(i) => (env.scalar(*i), 1.0),
        Term::Lit(c) => (c.abs_f64(), 0.0),
        Term::Add(a, b) | Term::Sub(a, b) => {
            let (ba, la) = term_data(a, env);
            let (bb, lb) = term_data(b, env);
            (ba + bb, la + lb)
        }
        Term::Mul(a, b) => {
            let (ba, la) = term_data(a, env);
            let (bb, lb) = term_data(b, env);
            (ba * bb, la * bb + ba * lb)
        }
        Term::Adjoint(a) => term_data(a, env),
    }
}

fn formula_modulus(f: &Formula, env: &mut Bounds) -> f64 {
    match f {
        Formula::Atomic(t) => term_data(t, env).1,
        Formula::Max(a, b) | Formula::Min(a, b) => {
            formula_modulus(a, env).max(formula_modulus(b, env))
        }
        Formula::Add(a, b) | Formula::TSub(a, b) | Formula::AbsDiff(a, b) => {
            formula_modulus(a, env) + formula_modulus(b, env)
        }
        Formula::Scale(q, g) => ratio_to_f64(*q) * formula_modulus(g, env),
        Formula::Pl(pl, g) => pl.max_slope() * formula_modulus(g, env),
        Formula::Inf { var, bound, body } | Formula::Sup { var, bound, body } => {
            let old = env.element.insert(*var, ratio_to_f64(*bound));
            let m = formula_modulus(body, env);
            match old {
                Some(v) => {
                    env.element.insert(*var, v);
                }
                None => {
                    env.element.remove(var);
                }
            }
            m
        }
        Formula::InfC { var, bound, body } | Formula::SupC { var, bound, body } => {
            let old = env.scalar.insert(*var, ratio_to_f64(*bound));
            let m = formula_modulus(body, env);
            match old {
                Some(v) => {
                    env.scalar.insert(*var, v);
                }
                None => {
                    env.scalar.remove(var);
                }
            }
            m
        }
    }
}

/// Lipschitz bound of the formula, jointly in all variables under the max
/// metric. Quantified variables use their declared bounds; free variables are
/// assumed to lie in the unit ball.
pub fn modulus(f: &Formula) -> f64 {
    formula_modulus(f, &mut Bounds::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse::parse;

    #[test]
    fn atomic_modulus_uses_ball_bounds() {
        // d/dx of x*x on the unit ball is bounded by 2.
        let f = parse("norm(x1*x1)").unwrap();
        assert_eq!(modulus(&f), 2.0);
        // Under a larger quantifier bound the product rule sees radius 3.
        let g = parse("inf{x1:3} norm(x1*x1)").unwrap();
        assert_eq!(modulus(&g), 6.0);
    }

    #[test]
    fn connectives_combine_moduli() {
        let f = parse("max(norm(x1),norm(x2))").unwrap();
        assert_eq!(modulus(&f), 1.0);
        let g = parse("add(norm(x1),norm(x2))").unwrap();
        assert_eq!(modulus(&g), 2.0);
        let h = parse("1/2*absdiff(norm(x1),norm(x2))").unwrap();
        assert_eq!(modulus(&h), 1.0);
        let p = parse("pl[0,0;1,3](norm(x1))").unwrap();
        assert_eq!(modulus(&p), 3.0);
    }
}
