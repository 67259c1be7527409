//! JSON wire formats shared by the CLI and the test suites.
//!
//! Algebras serialize as `{"blocks":[2,3]}`; elements as per-block row-major
//! arrays of `[re, im]` pairs; tuples as arrays of elements. Evaluation
//! results carry the value, convergence data, and witnesses in binder order.

use num_complex::Complex64;
use serde_json::{json, Value};

use crate::algebra::{Element, FiniteDimAlgebra};
use crate::error::{Error, Result};
use crate::eval::{EvalResult, Witness, WitnessKind};
use crate::formula::ast::ratio_to_f64;
use crate::stable::StabilityReport;

pub fn algebra_to_json(a: &FiniteDimAlgebra) -> Value {
    json!({ "blocks": a.blocks() })
}

pub fn algebra_from_json(v: &Value) -> Result<FiniteDimAlgebra> {
    let blocks = v
        .get("blocks")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::BadInput("algebra JSON needs a \"blocks\" array".into()))?;
    let sizes: Option<Vec<usize>> =
        blocks.iter().map(|b| b.as_u64().map(|k| k as usize)).collect();
    let sizes =
        sizes.ok_or_else(|| Error::BadInput("block sizes must be positive integers".into()))?;
    FiniteDimAlgebra::new(&sizes)
}

pub fn element_to_json(e: &Element) -> Value {
    let blocks: Vec<Value> = e
        .blocks()
        .iter()
        .map(|b| {
            let entries: Vec<Value> =
                b.data().iter().map(|z| json!([z.re, z.im])).collect();
            Value::Array(entries)
        })
        .collect();
    Value::Array(blocks)
}

pub fn element_from_json(a: &FiniteDimAlgebra, v: &Value) -> Result<Element> {
    let blocks = v
        .as_array()
        .ok_or_else(|| Error::BadInput("element JSON must be an array of blocks".into()))?;
    if blocks.len() != a.n_blocks() {
        return Err(Error::BadInput(format!(
            "element has {} blocks, algebra has {}",
            blocks.len(),
            a.n_blocks()
        )));
    }
    let mut el = a.zero();
    for (l, (block, &k)) in blocks.iter().zip(a.blocks()).enumerate() {
        let entries = block
            .as_array()
            .ok_or_else(|| Error::BadInput("element block must be an array".into()))?;
        if entries.len() != k * k {
            return Err(Error::BadInput(format!(
                "block {l} needs {} entries, found {}",
                k * k,
                entries.len()
            )));
        }
        for (idx, pair) in entries.iter().enumerate() {
            let (re, im) = match pair.as_array().map(|p| p.as_slice()) {
                Some([re, im]) => (
                    re.as_f64().ok_or_else(|| Error::BadInput("bad re part".into()))?,
                    im.as_f64().ok_or_else(|| Error::BadInput("bad im part".into()))?,
                ),
                _ => return Err(Error::BadInput("entries must be [re, im] pairs".into())),
            };
            el.blocks_mut()[l][(idx / k, idx % k)] = Complex64::new(re, im);
        }
    }
    Ok(el)
}

pub fn tuple_to_json(tuple: &[Element]) -> Value {
    Value::Array(tuple.iter().map(element_to_json).collect())
}

pub fn tuple_from_json(a: &FiniteDimAlgebra, v: &Value) -> Result<Vec<Element>> {
    v.as_array()
        .ok_or_else(|| Error::BadInput("tuple JSON must be an array of elements".into()))?
        .iter()
        .map(|e| element_from_json(a, e))
        .collect()
}

fn witness_to_json(w: &Witness) -> Value {
    match w.kind {
        WitnessKind::Element => json!({
            "var": w.var,
            "kind": "element",
            "value": w.element.as_ref().map(element_to_json),
        }),
        WitnessKind::Scalar => {
            let z = w.scalar.unwrap_or(Complex64::new(0.0, 0.0));
            json!({ "var": w.var, "kind": "scalar", "value": [z.re, z.im] })
        }
    }
}

pub fn eval_result_to_json(r: &EvalResult) -> Value {
    json!({
        "value": r.value,
        "converged": r.converged,
        "spread": r.spread,
        "witnesses": r.witnesses.iter().map(witness_to_json).collect::<Vec<_>>(),
    })
}

pub fn stability_report_to_json(r: &StabilityReport) -> Value {
    json!({
        "formula": r.formula,
        "rows": r.rows.iter().map(|row| json!({
            "delta": row.delta,
            "worst_eps": row.worst_eps,
            "samples": row.samples,
        })).collect::<Vec<_>>(),
        "modulus": r.modulus.points().iter().map(|&(x, y)| {
            json!([ratio_to_f64(x), ratio_to_f64(y)])
        }).collect::<Vec<_>>(),
    })
}
