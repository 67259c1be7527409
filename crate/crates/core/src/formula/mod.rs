//! Grammar, AST, parser, and printer for the formula language, plus
//! conditions and type schemas. See `docs/grammar.ebnf` for the concrete
//! syntax.

pub mod ast;
pub mod modulus;
pub mod parse;
pub mod print;

pub use ast::{ComplexRational, Condition, Formula, PiecewiseLinear, Rational, Rel, Term, TypeSchema};
pub use modulus::modulus;
pub use parse::parse;
pub use print::{print_formula, print_term};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
struct CondRepr {
    formula: String,
    rel: String,
    r: String,
}

impl Serialize for Condition {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        CondRepr {
            formula: print_formula(&self.formula),
            rel: match self.rel {
                Rel::Ge => "ge".into(),
                Rel::Le => "le".into(),
            },
            r: self.threshold.to_string(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Condition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = CondRepr::deserialize(deserializer)?;
        let formula = parse(&repr.formula).map_err(D::Error::custom)?;
        let rel = match repr.rel.as_str() {
            "ge" => Rel::Ge,
            "le" => Rel::Le,
            other => return Err(D::Error::custom(format!("bad rel `{other}`"))),
        };
        let threshold: Rational =
            repr.r.parse().map_err(|e| D::Error::custom(format!("bad threshold: {e}")))?;
        Condition::new(formula, rel, threshold).map_err(D::Error::custom)
    }
}
