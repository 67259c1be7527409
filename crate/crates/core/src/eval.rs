//! Formula evaluation: exact for quantifier-free formulas, multi-start
//! numerical optimization for quantified ones.
//!
//! Semantics of the returned value are one-sided. Each inf block reports the
//! smallest value over its restart searches, so an inf-rooted result is an
//! UPPER bound on the true value; sup blocks mirror this with lower bounds.
//! Consecutive quantifiers of the same sort and direction are optimized
//! jointly as one block. Scalar inf blocks whose body is affine in the
//! quantified scalars get a Frobenius least-squares warm start (the
//! subproblem is convex, so the polish step is reliable); element blocks can
//! be seeded with caller-provided warm starts, which keeps the value an upper
//! bound while letting structured candidates (canonical copies, oracle
//! witnesses) participate.
//!
//! Restart seeds depend only on the config seed, the block's syntactic
//! position, and the restart slot, so values are monotone in the restart
//! count and independent of scheduling.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{Element, FiniteDimAlgebra};
use crate::config::{derive_seed, OptConfig};
use crate::error::{Error, Result};
use crate::formula::ast::{ratio_to_f64, Formula, Term};
use crate::formula::{modulus, Condition, Rel};
use crate::linalg::CMat;
use crate::optimize::pattern_search;

/// Which sort a quantifier block ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    Element,
    Scalar,
}

/// Value chosen for one quantified variable, in binder pre-order.
#[derive(Debug, Clone)]
pub struct Witness {
    pub var: u32,
    pub kind: WitnessKind,
    pub element: Option<Element>,
    pub scalar: Option<Complex64>,
}

/// Outcome of a quantified evaluation.
#[derive(Debug, Clone)]
pub struct EvalResult {
    pub value: f64,
    pub witnesses: Vec<Witness>,
    pub converged: bool,
    /// max - min of the outermost block's restart values.
    pub spread: f64,
}

/// Warm starts for the outermost element-quantifier block.
#[derive(Debug, Clone, Default)]
pub struct EvalHints {
    pub element_starts: Vec<Vec<Element>>,
}

/// Per-call diagnostics (objective values at the outer restart starting
/// points; the reported value never exceeds any of them for an inf block).
#[derive(Debug, Clone, Default)]
pub struct EvalDiag {
    pub start_values: Vec<f64>,
}

/// One-sided certainty of a quantified value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sidedness {
    Exact,
    Upper,
    Lower,
    Mixed,
}

pub fn sidedness(f: &Formula) -> Sidedness {
    fn scan(f: &Formula, has_inf: &mut bool, has_sup: &mut bool) {
        match f {
            Formula::Atomic(_) => {}
            Formula::Max(a, b)
            | Formula::Min(a, b)
            | Formula::Add(a, b)
            | Formula::TSub(a, b)
            | Formula::AbsDiff(a, b) => {
                scan(a, has_inf, has_sup);
                scan(b, has_inf, has_sup);
            }
            Formula::Scale(_, g) | Formula::Pl(_, g) => scan(g, has_inf, has_sup),
            Formula::Inf { body, .. } | Formula::InfC { body, .. } => {
                *has_inf = true;
                scan(body, has_inf, has_sup);
            }
            Formula::Sup { body, .. } | Formula::SupC { body, .. } => {
                *has_sup = true;
                scan(body, has_inf, has_sup);
            }
        }
    }
    let (mut has_inf, mut has_sup) = (false, false);
    scan(f, &mut has_inf, &mut has_sup);
    match (has_inf, has_sup) {
        (false, false) => Sidedness::Exact,
        (true, false) => Sidedness::Upper,
        (false, true) => Sidedness::Lower,
        (true, true) => Sidedness::Mixed,
    }
}

#[derive(Clone)]
struct Env<'a> {
    algebra: &'a FiniteDimAlgebra,
    elements: Vec<(u32, Element)>,
    scalars: Vec<(u32, Complex64)>,
}

impl<'a> Env<'a> {
    fn lookup_element(&self, i: u32) -> Result<&Element> {
        self.elements
            .iter()
            .rev()
            .find(|(v, _)| *v == i)
            .map(|(_, e)| e)
            .ok_or_else(|| Error::BindingError(format!("x{i}")))
    }

    fn lookup_scalar(&self, i: u32) -> Result<Complex64> {
        self.scalars
            .iter()
            .rev()
            .find(|(v, _)| *v == i)
            .map(|(_, z)| *z)
            .ok_or_else(|| Error::BindingError(format!("z{i}")))
    }
}

fn eval_term(t: &Term, env: &Env) -> Result<Element> {
    match t {
        Term::Var(i) => Ok(env.lookup_element(*i)?.clone()),
        Term::CVar(i) => {
            let z = env.lookup_scalar(*i)?;
            Ok(env.algebra.unit().scale(z))
        }
        Term::Lit(c) => Ok(env.algebra.unit().scale(c.to_complex())),
        Term::Add(a, b) => eval_term(a, env)?.add(&eval_term(b, env)?),
        Term::Sub(a, b) => eval_term(a, env)?.sub(&eval_term(b, env)?),
        Term::Mul(a, b) => eval_term(a, env)?.mul(&eval_term(b, env)?),
        Term::Adjoint(a) => Ok(eval_term(a, env)?.adjoint()),
    }
}

fn eval_qf_env(f: &Formula, env: &Env) -> Result<f64> {
    match f {
        Formula::Atomic(t) => eval_term(t, env)?.norm(),
        Formula::Max(a, b) => Ok(eval_qf_env(a, env)?.max(eval_qf_env(b, env)?)),
        Formula::Min(a, b) => Ok(eval_qf_env(a, env)?.min(eval_qf_env(b, env)?)),
        Formula::Add(a, b) => Ok(eval_qf_env(a, env)? + eval_qf_env(b, env)?),
        Formula::TSub(a, b) => Ok((eval_qf_env(a, env)? - eval_qf_env(b, env)?).max(0.0)),
        Formula::AbsDiff(a, b) => Ok((eval_qf_env(a, env)? - eval_qf_env(b, env)?).abs()),
        Formula::Scale(q, g) => Ok(ratio_to_f64(*q) * eval_qf_env(g, env)?),
        Formula::Pl(pl, g) => Ok(pl.eval(eval_qf_env(g, env)?)),
        _ => Err(Error::InvalidArg("formula is not quantifier-free".into())),
    }
}

fn bind_args<'a>(
    algebra: &'a FiniteDimAlgebra,
    args: &[Element],
) -> Result<Env<'a>> {
    for a in args {
        if a.algebra() != algebra {
            return Err(Error::AlgebraMismatch("tuple element outside the algebra".into()));
        }
    }
    Ok(Env {
        algebra,
        elements: args.iter().enumerate().map(|(i, e)| (i as u32 + 1, e.clone())).collect(),
        scalars: Vec::new(),
    })
}

/// Exact evaluation of a quantifier-free formula at x_i := args[i-1].
pub fn eval_qf(f: &Formula, algebra: &FiniteDimAlgebra, args: &[Element]) -> Result<f64> {
    let env = bind_args(algebra, args)?;
    eval_qf_env(f, &env)
}

struct Ctx<'a> {
    cfg: &'a OptConfig,
    hints: &'a EvalHints,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BlockKind {
    Element,
    Scalar,
}

struct BlockSpec<'f> {
    kind: BlockKind,
    minimize: bool,
    vars: Vec<(u32, f64)>,
    body: &'f Formula,
}

fn collect_block(f: &Formula) -> Option<BlockSpec<'_>> {
    let (kind, minimize) = match f {
        Formula::Inf { .. } => (BlockKind::Element, true),
        Formula::Sup { .. } => (BlockKind::Element, false),
        Formula::InfC { .. } => (BlockKind::Scalar, true),
        Formula::SupC { .. } => (BlockKind::Scalar, false),
        _ => return None,
    };
    let mut vars = Vec::new();
    let mut cur = f;
    loop {
        match (kind, minimize, cur) {
            (BlockKind::Element, true, Formula::Inf { var, bound, body }) => {
                vars.push((*var, ratio_to_f64(*bound)));
                cur = body;
            }
            (BlockKind::Element, false, Formula::Sup { var, bound, body }) => {
                vars.push((*var, ratio_to_f64(*bound)));
                cur = body;
            }
            (BlockKind::Scalar, true, Formula::InfC { var, bound, body }) => {
                vars.push((*var, ratio_to_f64(*bound)));
                cur = body;
            }
            (BlockKind::Scalar, false, Formula::SupC { var, bound, body }) => {
                vars.push((*var, ratio_to_f64(*bound)));
                cur = body;
            }
            _ => break,
        }
    }
    Some(BlockSpec { kind, minimize, vars, body: cur })
}

/// Is the term affine (over the reals) in the given scalar variables?
#[derive(Clone, Copy, PartialEq)]
enum Affinity {
    Const,
    Affine,
    No,
}

fn term_affinity(t: &Term, vars: &[u32]) -> Affinity {
    match t {
        Term::Var(_) | Term::Lit(_) => Affinity::Const,
        Term::CVar(i) => {
            if vars.contains(i) {
                Affinity::Affine
            } else {
                Affinity::Const
            }
        }
        Term::Add(a, b) | Term::Sub(a, b) => {
            match (term_affinity(a, vars), term_affinity(b, vars)) {
                (Affinity::No, _) | (_, Affinity::No) => Affinity::No,
                (Affinity::Const, Affinity::Const) => Affinity::Const,
                _ => Affinity::Affine,
            }
        }
        Term::Mul(a, b) => match (term_affinity(a, vars), term_affinity(b, vars)) {
            (Affinity::No, _) | (_, Affinity::No) => Affinity::No,
            (Affinity::Const, Affinity::Const) => Affinity::Const,
            (Affinity::Const, Affinity::Affine) | (Affinity::Affine, Affinity::Const) => {
                Affinity::Affine
            }
            (Affinity::Affine, Affinity::Affine) => Affinity::No,
        },
        Term::Adjoint(a) => term_affinity(a, vars),
    }
}

fn collect_atomics<'f>(f: &'f Formula, out: &mut Vec<&'f Term>) {
    match f {
        Formula::Atomic(t) => out.push(t),
        Formula::Max(a, b)
        | Formula::Min(a, b)
        | Formula::Add(a, b)
        | Formula::TSub(a, b)
        | Formula::AbsDiff(a, b) => {
            collect_atomics(a, out);
            collect_atomics(b, out);
        }
        Formula::Scale(_, g) | Formula::Pl(_, g) => collect_atomics(g, out),
        _ => {}
    }
}

fn body_is_scalar_affine(body: &Formula, vars: &[u32]) -> bool {
    if !body.is_quantifier_free() {
        return false;
    }
    let mut atomics = Vec::new();
    collect_atomics(body, &mut atomics);
    atomics.iter().all(|t| term_affinity(t, vars) != Affinity::No)
}

/// Frobenius least-squares warm start for min over scalars of an affine body.
fn scalar_least_squares(
    body: &Formula,
    vars: &[(u32, f64)],
    env: &mut Env,
) -> Result<Vec<f64>> {
    let var_ids: Vec<u32> = vars.iter().map(|(v, _)| *v).collect();
    let mut atomics = Vec::new();
    collect_atomics(body, &mut atomics);
    let d = 2 * vars.len();
    let base = env.scalars.len();
    for &(v, _) in vars {
        env.scalars.push((v, Complex64::new(0.0, 0.0)));
    }
    // Constant part per atomic.
    let mut consts: Vec<Element> = Vec::with_capacity(atomics.len());
    for t in &atomics {
        consts.push(eval_term(t, env)?);
    }
    // Column per real coordinate: T(e_j) - T(0).
    let mut cols: Vec<Vec<Element>> = Vec::with_capacity(d);
    for j in 0..d {
        let (vi, re_part) = (j / 2, j % 2 == 0);
        env.scalars[base + vi].1 =
            if re_part { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 1.0) };
        let mut col = Vec::with_capacity(atomics.len());
        for (t, t0) in atomics.iter().zip(&consts) {
            col.push(eval_term(t, env)?.sub(t0)?);
        }
        env.scalars[base + vi].1 = Complex64::new(0.0, 0.0);
        cols.push(col);
    }
    env.scalars.truncate(base);
    let _ = var_ids;

    // Real normal equations over all (atomic, block) slots.
    let mut gram = CMat::zeros(d);
    let mut rhs = vec![0.0f64; d];
    for j in 0..d {
        for k in j..d {
            let mut g = 0.0;
            for (cj, ck) in cols[j].iter().zip(&cols[k]) {
                for (bj, bk) in cj.blocks().iter().zip(ck.blocks()) {
                    g += bj.frobenius_inner(bk).re;
                }
            }
            gram[(j, k)] = Complex64::new(g, 0.0);
            gram[(j, k)] = Complex64::new(g, 0.0);
            gram[(k, j)] = Complex64::new(g, 0.0);
        }
        let mut b = 0.0;
        for (cj, c0) in cols[j].iter().zip(&consts) {
            for (bj, b0) in cj.blocks().iter().zip(c0.blocks()) {
                b += bj.frobenius_inner(b0).re;
            }
        }
        rhs[j] = -b;
    }
    let (vals, vecs) = gram.eigh()?;
    let cutoff = vals.iter().cloned().fold(0.0, f64::max) * 1e-12;
    let mut x = vec![0.0f64; d];
    for k in 0..d {
        if vals[k] <= cutoff {
            continue;
        }
        let mut proj = 0.0;
        for i in 0..d {
            proj += vecs[(i, k)].re * rhs[i];
        }
        let coef = proj / vals[k];
        for i in 0..d {
            x[i] += vecs[(i, k)].re * coef;
        }
    }
    Ok(x)
}

struct BlockOutcome {
    coords: Vec<f64>,
    converged: bool,
    spread: f64,
    start_values: Vec<f64>,
}

/// Diagnostics of the first depth-0 block, recorded once per eval call.
struct OuterInfo {
    converged: bool,
    spread: f64,
    start_values: Vec<f64>,
}

fn optimize_block(
    block: &BlockSpec,
    env: &Env,
    ctx: &Ctx,
    depth: usize,
    path: u64,
) -> Result<BlockOutcome> {
    let algebra = env.algebra;
    let cfg = if depth == 0 { ctx.cfg.clone() } else { ctx.cfg.nested() };
    let dim = algebra.dim();
    let per_var = match block.kind {
        BlockKind::Element => 2 * dim,
        BlockKind::Scalar => 2,
    };
    let n_vars = block.vars.len();
    let total = per_var * n_vars;
    let max_bound = block.vars.iter().map(|(_, b)| *b).fold(0.0, f64::max);
    let step_tol = (cfg.tolerance * 0.1).clamp(1e-14, 1e-10);

    let bounds: Vec<f64> = block.vars.iter().map(|(_, b)| *b).collect();
    let retract = |x: &mut [f64]| match block.kind {
        BlockKind::Element => {
            for (vi, bound) in bounds.iter().enumerate() {
                let sl = &mut x[vi * per_var..(vi + 1) * per_var];
                let el = Element::from_coords(algebra, sl);
                let n = el.norm_or_inf();
                if n > *bound {
                    let f = *bound / n;
                    sl.iter_mut().for_each(|v| *v *= f);
                }
            }
        }
        BlockKind::Scalar => {
            for (vi, bound) in bounds.iter().enumerate() {
                let re = x[vi * 2];
                let im = x[vi * 2 + 1];
                let m = (re * re + im * im).sqrt();
                if m > *bound {
                    x[vi * 2] *= *bound / m;
                    x[vi * 2 + 1] *= *bound / m;
                }
            }
        }
    };

    let body_path = derive_seed(path, &[1]);
    let objective = |coords: &[f64]| -> f64 {
        let mut inner = env.clone();
        bind_block_coords(block, algebra, coords, &mut inner);
        let v = eval_node(block.body, &mut inner, ctx, depth + 1, body_path, None);
        match v {
            Ok(v) => {
                if block.minimize {
                    v
                } else {
                    -v
                }
            }
            Err(_) => f64::INFINITY,
        }
    };

    // Starting points: caller hints (outermost element block only, replacing
    // the zero start when present), a least-squares warm start for affine
    // scalar inf blocks, then random ball points.
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if block.kind == BlockKind::Element && depth == 0 && !ctx.hints.element_starts.is_empty() {
        for hint in &ctx.hints.element_starts {
            if hint.len() != n_vars || hint.iter().any(|e| e.algebra() != algebra) {
                return Err(Error::ConfigError(
                    "hint tuple does not match the quantifier block".into(),
                ));
            }
            let mut coords = Vec::with_capacity(total);
            for e in hint {
                coords.extend(e.to_coords());
            }
            starts.push(coords);
        }
    } else {
        starts.push(vec![0.0; total]);
    }
    if block.kind == BlockKind::Scalar && block.minimize {
        let var_ids: Vec<u32> = block.vars.iter().map(|(v, _)| *v).collect();
        if body_is_scalar_affine(block.body, &var_ids) {
            let mut scratch = env.clone();
            if let Ok(mut warm) = scalar_least_squares(block.body, &block.vars, &mut scratch) {
                retract(&mut warm);
                starts.push(warm);
            }
        }
    }
    let fixed = starts.len();
    let n_restarts = cfg.restarts.max(fixed);
    for slot in fixed..n_restarts {
        let mut coords = Vec::with_capacity(total);
        for (vi, (_, bound)) in block.vars.iter().enumerate() {
            let seed = derive_seed(cfg.seed, &[path, slot as u64, vi as u64]);
            match block.kind {
                BlockKind::Element => {
                    coords.extend(algebra.random_ball_element(*bound, seed).to_coords());
                }
                BlockKind::Scalar => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    use rand::Rng;
                    let r = bound * rng.gen::<f64>().sqrt();
                    let th = rng.gen::<f64>() * std::f64::consts::TAU;
                    coords.push(r * th.cos());
                    coords.push(r * th.sin());
                }
            }
        }
        starts.push(coords);
    }

    let radius = max_bound.max(1e-6);

    // If a warm start already sits at the tolerance floor there is nothing
    // left to optimize (the value is attained, hence a valid bound).
    let start_objectives: Vec<f64> = crate::parallel::slice_map(&starts, |s| objective(s));
    let start_values: Vec<f64> = start_objectives
        .iter()
        .map(|sv| if block.minimize { *sv } else { -*sv })
        .collect();
    if block.minimize {
        let (best_slot, &best_val) = start_objectives
            .iter()
            .enumerate()
            .min_by(|(i, x), (j, y)| x.partial_cmp(y).unwrap().then(i.cmp(j)))
            .expect("at least one start");
        if best_val <= cfg.tolerance {
            return Ok(BlockOutcome {
                coords: starts[best_slot].clone(),
                converged: true,
                spread: 0.0,
                start_values,
            });
        }
    }

    let searched = crate::parallel::indexed_map(starts.len(), |slot| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[path, 0x9a7c, slot as u64]));
        pattern_search(
            &objective,
            &starts[slot],
            radius,
            cfg.max_iters,
            step_tol,
            cfg.step_schedule,
            &retract,
            &mut rng,
        )
    });

    let mut best_idx = 0usize;
    for (i, s) in searched.iter().enumerate() {
        if s.value < searched[best_idx].value {
            best_idx = i;
        }
    }
    let vals: Vec<f64> = searched.iter().map(|s| s.value).collect();
    let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let best = &searched[best_idx];
    if !best.value.is_finite() {
        return Err(Error::NumericError("quantifier optimization diverged".into()));
    }
    Ok(BlockOutcome {
        coords: best.point.clone(),
        converged: best.converged,
        spread: spread.max(0.0),
        start_values,
    })
}

fn bind_block_coords(block: &BlockSpec, algebra: &FiniteDimAlgebra, coords: &[f64], env: &mut Env) {
    let per_var = match block.kind {
        BlockKind::Element => 2 * algebra.dim(),
        BlockKind::Scalar => 2,
    };
    for (vi, (var, _)) in block.vars.iter().enumerate() {
        let sl = &coords[vi * per_var..(vi + 1) * per_var];
        match block.kind {
            BlockKind::Element => {
                env.elements.push((*var, Element::from_coords(algebra, sl)));
            }
            BlockKind::Scalar => {
                env.scalars.push((*var, Complex64::new(sl[0], sl[1])));
            }
        }
    }
}

fn eval_node(
    f: &Formula,
    env: &mut Env,
    ctx: &Ctx,
    depth: usize,
    path: u64,
    mut capture: Option<&mut Vec<Witness>>,
) -> Result<f64> {
    eval_node_outer(f, env, ctx, depth, path, capture.as_deref_mut(), &mut None)
}

fn eval_node_outer(
    f: &Formula,
    env: &mut Env,
    ctx: &Ctx,
    depth: usize,
    path: u64,
    mut capture: Option<&mut Vec<Witness>>,
    outer: &mut Option<OuterInfo>,
) -> Result<f64> {
    if let Some(block) = collect_block(f) {
        let out = optimize_block(&block, env, ctx, depth, path)?;
        if depth == 0 && outer.is_none() {
            *outer = Some(OuterInfo {
                converged: out.converged,
                spread: out.spread,
                start_values: out.start_values.clone(),
            });
        }
        let el_base = env.elements.len();
        let sc_base = env.scalars.len();
        bind_block_coords(&block, env.algebra, &out.coords, env);
        if let Some(cap) = capture.as_deref_mut() {
            for (vi, (var, _)) in block.vars.iter().enumerate() {
                match block.kind {
                    BlockKind::Element => cap.push(Witness {
                        var: *var,
                        kind: WitnessKind::Element,
                        element: Some(env.elements[el_base + vi].1.clone()),
                        scalar: None,
                    }),
                    BlockKind::Scalar => cap.push(Witness {
                        var: *var,
                        kind: WitnessKind::Scalar,
                        element: None,
                        scalar: Some(env.scalars[sc_base + vi].1),
                    }),
                }
            }
        }
        // Re-evaluate the body at the winning point so nested witnesses come
        // from the same (deterministic) run that produced the value.
        let v = eval_node(block.body, env, ctx, depth + 1, derive_seed(path, &[1]), capture)?;
        env.elements.truncate(el_base);
        env.scalars.truncate(sc_base);
        return Ok(v);
    }
    match f {
        Formula::Atomic(t) => eval_term(t, env)?.norm(),
        Formula::Max(a, b)
        | Formula::Min(a, b)
        | Formula::Add(a, b)
        | Formula::TSub(a, b)
        | Formula::AbsDiff(a, b) => {
            let va =
                eval_node_outer(a, env, ctx, depth, derive_seed(path, &[2]), capture.as_deref_mut(), outer)?;
            let vb = eval_node_outer(b, env, ctx, depth, derive_seed(path, &[3]), capture, outer)?;
            Ok(match f {
                Formula::Max(..) => va.max(vb),
                Formula::Min(..) => va.min(vb),
                Formula::Add(..) => va + vb,
                Formula::TSub(..) => (va - vb).max(0.0),
                _ => (va - vb).abs(),
            })
        }
        Formula::Scale(q, g) => Ok(ratio_to_f64(*q)
            * eval_node_outer(g, env, ctx, depth, derive_seed(path, &[2]), capture, outer)?),
        Formula::Pl(pl, g) => Ok(pl
            .eval(eval_node_outer(g, env, ctx, depth, derive_seed(path, &[2]), capture, outer)?)),
        _ => unreachable!("quantifiers are handled by collect_block"),
    }
}

/// Evaluate with optional warm starts; also returns diagnostics.
pub fn eval_with_hints(
    f: &Formula,
    algebra: &FiniteDimAlgebra,
    args: &[Element],
    cfg: &OptConfig,
    hints: &EvalHints,
) -> Result<(EvalResult, EvalDiag)> {
    cfg.validate()?;
    let mut env = bind_args(algebra, args)?;
    if let Some(&max_var) = f.free_vars().iter().max() {
        if max_var as usize > args.len() {
            return Err(Error::BindingError(format!("x{max_var}")));
        }
    }
    if !f.free_cvars().is_empty() {
        return Err(Error::BindingError("free scalar variables are not supported in eval".into()));
    }
    if f.is_quantifier_free() {
        let value = eval_qf_env(f, &env)?;
        return Ok((
            EvalResult { value, witnesses: vec![], converged: true, spread: 0.0 },
            EvalDiag::default(),
        ));
    }
    let ctx = Ctx { cfg, hints };
    let mut witnesses = Vec::new();
    let mut outer = None;
    let value = eval_node_outer(f, &mut env, &ctx, 0, 0, Some(&mut witnesses), &mut outer)?;
    let (converged, spread, start_values) = match outer {
        Some(info) => (info.converged, info.spread, info.start_values),
        None => (true, 0.0, vec![]),
    };
    Ok((EvalResult { value, witnesses, converged, spread }, EvalDiag { start_values }))
}

/// Evaluate a formula; quantifier-free formulas take the exact path.
pub fn eval(
    f: &Formula,
    algebra: &FiniteDimAlgebra,
    args: &[Element],
    cfg: &OptConfig,
) -> Result<EvalResult> {
    eval_with_hints(f, algebra, args, cfg, &EvalHints::default()).map(|(r, _)| r)
}

/// Evaluate the quantifier-free remainder of `f` with quantified variables
/// bound to the given witnesses (in binder pre-order). Used to check witness
/// soundness.
pub fn eval_at_witnesses(
    f: &Formula,
    algebra: &FiniteDimAlgebra,
    args: &[Element],
    witnesses: &[Witness],
) -> Result<f64> {
    fn go(f: &Formula, env: &mut Env, ws: &mut std::slice::Iter<Witness>) -> Result<f64> {
        match f {
            Formula::Inf { var, body, .. }
            | Formula::Sup { var, body, .. }
            | Formula::InfC { var, body, .. }
            | Formula::SupC { var, body, .. } => {
                let w = ws
                    .next()
                    .ok_or_else(|| Error::InvalidArg("not enough witnesses".into()))?;
                if w.var != *var {
                    return Err(Error::InvalidArg(format!(
                        "witness order mismatch: expected variable {var}, got {}",
                        w.var
                    )));
                }
                let el_base = env.elements.len();
                let sc_base = env.scalars.len();
                match (&w.element, &w.scalar) {
                    (Some(e), _) => env.elements.push((*var, e.clone())),
                    (_, Some(z)) => env.scalars.push((*var, *z)),
                    _ => return Err(Error::InvalidArg("empty witness".into())),
                }
                let v = go(body, env, ws)?;
                env.elements.truncate(el_base);
                env.scalars.truncate(sc_base);
                Ok(v)
            }
            Formula::Atomic(t) => eval_term(t, env)?.norm(),
            Formula::Max(a, b) => Ok(go(a, env, ws)?.max(go(b, env, ws)?)),
            Formula::Min(a, b) => Ok(go(a, env, ws)?.min(go(b, env, ws)?)),
            Formula::Add(a, b) => Ok(go(a, env, ws)? + go(b, env, ws)?),
            Formula::TSub(a, b) => Ok((go(a, env, ws)? - go(b, env, ws)?).max(0.0)),
            Formula::AbsDiff(a, b) => Ok((go(a, env, ws)? - go(b, env, ws)?).abs()),
            Formula::Scale(q, g) => Ok(ratio_to_f64(*q) * go(g, env, ws)?),
            Formula::Pl(pl, g) => Ok(pl.eval(go(g, env, ws)?)),
        }
    }
    let mut env = bind_args(algebra, args)?;
    go(f, &mut env, &mut witnesses.iter())
}

/// Three-valued verdict for a condition check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Sat,
    Unsat,
    Unknown,
}

#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub verdict: Verdict,
    /// Signed slack toward satisfaction: value - r for >=, r - value for <=.
    pub margin: f64,
    pub value: f64,
}

/// Check a condition at a unit-ball tuple, honoring one-sided semantics:
/// an inf-rooted value is an upper bound, so it can refute `>= r` and certify
/// `<= r` but never the converse; sup mirrors; quantifier-free is exact.
pub fn check_condition(
    c: &Condition,
    algebra: &FiniteDimAlgebra,
    args: &[Element],
    cfg: &OptConfig,
) -> Result<ConditionReport> {
    for a in args {
        if a.norm()? > 1.0 + 1e-9 {
            return Err(Error::BallViolation(
                "condition realizations must come from the unit ball".into(),
            ));
        }
    }
    let r = ratio_to_f64(c.threshold);
    let value = eval(&c.formula, algebra, args, cfg)?.value;
    let margin = match c.rel {
        Rel::Ge => value - r,
        Rel::Le => r - value,
    };
    let verdict = match sidedness(&c.formula) {
        Sidedness::Exact => {
            if margin >= 0.0 {
                Verdict::Sat
            } else {
                Verdict::Unsat
            }
        }
        Sidedness::Upper => match c.rel {
            // value >= true value.
            Rel::Ge => {
                if value < r {
                    Verdict::Unsat
                } else {
                    Verdict::Unknown
                }
            }
            Rel::Le => {
                if value <= r {
                    Verdict::Sat
                } else {
                    Verdict::Unknown
                }
            }
        },
        Sidedness::Lower => match c.rel {
            Rel::Ge => {
                if value >= r {
                    Verdict::Sat
                } else {
                    Verdict::Unknown
                }
            }
            Rel::Le => {
                if value > r {
                    Verdict::Unsat
                } else {
                    Verdict::Unknown
                }
            }
        },
        Sidedness::Mixed => Verdict::Unknown,
    };
    Ok(ConditionReport { verdict, margin, value })
}

/// Certified two-sided evaluation by grid refinement, available only for a
/// single quantifier block with a quantifier-free body over a search space of
/// at most `MAX_GRID_DIMS` real dimensions (scalars, M_1-like algebras).
pub const MAX_GRID_DIMS: usize = 6;

pub struct CertifiedValue {
    pub lower: f64,
    pub upper: f64,
}

pub fn eval_certified(
    f: &Formula,
    algebra: &FiniteDimAlgebra,
    args: &[Element],
    grid_step: f64,
) -> Result<CertifiedValue> {
    if !(grid_step > 0.0) {
        return Err(Error::ConfigError("grid step must be positive".into()));
    }
    let block = collect_block(f)
        .ok_or_else(|| Error::InvalidArg("certified evaluation needs a quantified root".into()))?;
    if !block.body.is_quantifier_free() {
        return Err(Error::InvalidArg(
            "certified evaluation supports a single quantifier block".into(),
        ));
    }
    let per_var = match block.kind {
        BlockKind::Element => 2 * algebra.dim(),
        BlockKind::Scalar => 2,
    };
    let total = per_var * block.vars.len();
    if total > MAX_GRID_DIMS {
        return Err(Error::InvalidArg(format!(
            "grid certification limited to {MAX_GRID_DIMS} real dimensions, need {total}"
        )));
    }
    let mut env = bind_args(algebra, args)?;
    let lip = modulus(f);
    // Covering radius per variable in the max metric: operator norm of the
    // perturbation is at most the Frobenius norm of the coordinate box cell.
    let cell = 0.5 * grid_step * (per_var as f64).sqrt();

    let mut extremum = if block.minimize { f64::INFINITY } else { f64::NEG_INFINITY };
    let steps: Vec<usize> = block
        .vars
        .iter()
        .flat_map(|(_, b)| {
            let n = (2.0 * b / grid_step).ceil() as usize + 1;
            std::iter::repeat(n).take(per_var)
        })
        .collect();
    let lows: Vec<f64> = block
        .vars
        .iter()
        .flat_map(|(_, b)| std::iter::repeat(-*b).take(per_var))
        .collect();
    let mut idx = vec![0usize; total];
    let bounds: Vec<f64> = block.vars.iter().map(|(_, b)| *b).collect();
    loop {
        let mut coords: Vec<f64> =
            idx.iter().enumerate().map(|(i, &k)| lows[i] + k as f64 * grid_step).collect();
        // Retract into the ball/disk (1-Lipschitz, preserves covering).
        for (vi, bound) in bounds.iter().enumerate() {
            let sl = &mut coords[vi * per_var..(vi + 1) * per_var];
            match block.kind {
                BlockKind::Element => {
                    let el = Element::from_coords(algebra, sl);
                    let n = el.norm_or_inf();
                    if n > *bound {
                        let f = *bound / n;
                        sl.iter_mut().for_each(|v| *v *= f);
                    }
                }
                BlockKind::Scalar => {
                    let m = (sl[0] * sl[0] + sl[1] * sl[1]).sqrt();
                    if m > *bound {
                        sl[0] *= *bound / m;
                        sl[1] *= *bound / m;
                    }
                }
            }
        }
        let base = env.elements.len();
        let sbase = env.scalars.len();
        bind_block_coords(&block, algebra, &coords, &mut env);
        let v = eval_qf_env(block.body, &env)?;
        env.elements.truncate(base);
        env.scalars.truncate(sbase);
        extremum = if block.minimize { extremum.min(v) } else { extremum.max(v) };

        // Odometer.
        let mut i = 0;
        loop {
            if i == total {
                let err = lip * cell;
                return Ok(if block.minimize {
                    CertifiedValue { lower: extremum - err, upper: extremum }
                } else {
                    CertifiedValue { lower: extremum, upper: extremum + err }
                });
            }
            idx[i] += 1;
            if idx[i] < steps[i] {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;

    fn m2() -> FiniteDimAlgebra {
        FiniteDimAlgebra::new(&[2]).unwrap()
    }

    #[test]
    fn qf_projection_defect_examples() {
        let alg = m2();
        let rho = parse("add(norm(x1 - x1^*),norm(x1*x1 - x1))").unwrap();
        let e11 = alg.matrix_unit(0, 0, 0);
        assert_eq!(eval_qf(&rho, &alg, &[e11.clone()]).unwrap(), 0.0);
        let half = e11.scale(Complex64::new(0.5, 0.0));
        let v = eval_qf(&rho, &alg, &[half]).unwrap();
        assert!((v - 0.25).abs() < 1e-13, "got {v}");
    }

    #[test]
    fn qf_and_eval_agree_bit_for_bit() {
        let alg = m2();
        let f = parse("max(norm(x1*x1),absdiff(norm(x1),norm(1)))").unwrap();
        let x = alg.random_ball_element(1.0, 5);
        let qf = eval_qf(&f, &alg, &[x.clone()]).unwrap();
        let full = eval(&f, &alg, &[x], &OptConfig::default()).unwrap();
        assert_eq!(qf, full.value);
        assert_eq!(full.spread, 0.0);
        assert!(full.converged);
    }

    #[test]
    fn inf_of_norm_is_zero() {
        let alg = m2();
        let f = parse("inf{x1:1} norm(x1)").unwrap();
        let r = eval(&f, &alg, &[], &OptConfig::with_seed(1)).unwrap();
        assert!(r.value <= 1e-12, "got {}", r.value);
        let w = r.witnesses[0].element.as_ref().unwrap();
        assert!(w.norm().unwrap() <= 1e-9);
    }

    #[test]
    fn inf_reaches_the_unit() {
        let alg = m2();
        let f = parse("inf{x1:1} norm(x1 - 1)").unwrap();
        let r = eval(&f, &alg, &[], &OptConfig::with_seed(2)).unwrap();
        assert!(r.value < 1e-6, "got {}", r.value);
    }

    #[test]
    fn witness_soundness() {
        let alg = m2();
        let f = parse("inf{x1:1} max(norm(x1 - x2),norm(x1*x1))").unwrap();
        let a = alg.random_ball_element(1.0, 11);
        let r = eval(&f, &alg, &[alg.zero(), a.clone()], &OptConfig::with_seed(3)).unwrap();
        let back = eval_at_witnesses(&f, &alg, &[alg.zero(), a], &r.witnesses).unwrap();
        assert!((back - r.value).abs() < 1e-9);
    }

    #[test]
    fn scalar_quantifier_least_squares() {
        // inf over z of ||a - z*1|| in M_2 with a = diag(1,-1): optimum 1 at z=0.
        let alg = m2();
        let f = parse("infc{z1:1} norm(x1 - z1*1)").unwrap();
        let mut a = alg.zero();
        a.blocks_mut()[0][(0, 0)] = Complex64::new(1.0, 0.0);
        a.blocks_mut()[0][(1, 1)] = Complex64::new(-1.0, 0.0);
        let r = eval(&f, &alg, &[a], &OptConfig::with_seed(4)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-9, "got {}", r.value);
        // and with a = e_11 the optimum is 1/2 at z = 1/2.
        let f2 = parse("infc{z1:1} norm(x1 - z1*1)").unwrap();
        let r2 = eval(&f2, &alg, &[alg.matrix_unit(0, 0, 0)], &OptConfig::with_seed(4)).unwrap();
        assert!((r2.value - 0.5).abs() < 1e-9, "got {}", r2.value);
    }

    #[test]
    fn restart_monotonicity() {
        let alg = m2();
        let f = parse("inf{x1:1} norm(x1*x1 - x1 + 1)").unwrap();
        let mut small = OptConfig::with_seed(9);
        small.restarts = 2;
        let mut big = small.clone();
        big.restarts = 8;
        let vs = eval(&f, &alg, &[], &small).unwrap().value;
        let vb = eval(&f, &alg, &[], &big).unwrap().value;
        assert!(vb <= vs + 1e-12);
    }

    #[test]
    fn upper_bound_never_exceeds_start_values() {
        let alg = m2();
        let f = parse("inf{x1:1} norm(x1 - x2*x2)").unwrap();
        let a = alg.random_ball_element(1.0, 21);
        let cfg = OptConfig::with_seed(5);
        let (r, diag) =
            eval_with_hints(&f, &alg, &[alg.zero(), a], &cfg, &EvalHints::default()).unwrap();
        for sv in diag.start_values {
            assert!(r.value <= sv + 1e-9);
        }
    }

    #[test]
    fn condition_semantics() {
        let alg = m2();
        // quantifier-free, exact verdicts
        let c = Condition::le(parse("norm(x1)").unwrap(), num_rational::Ratio::new(1, 1)).unwrap();
        let a = alg.random_ball_element(1.0, 3);
        let rep = check_condition(&c, &alg, &[a], &OptConfig::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Sat);

        let rho = parse("add(norm(x1 - x1^*),norm(x1*x1 - x1))").unwrap();
        let c2 = Condition::ge(rho, num_rational::Ratio::new(1, 10)).unwrap();
        let rep2 =
            check_condition(&c2, &alg, &[alg.matrix_unit(0, 0, 0)], &OptConfig::default()).unwrap();
        assert_eq!(rep2.verdict, Verdict::Unsat);
        assert!((rep2.margin + 0.1).abs() < 1e-12);

        // inf-rooted: value is an upper bound, so >= r can only be refuted.
        let f = parse("inf{x1:1} norm(x1 - x2)").unwrap();
        let c3 = Condition::ge(f, num_rational::Ratio::new(1, 2)).unwrap();
        let rep3 = check_condition(&c3, &alg, &[alg.zero(), alg.zero()], &OptConfig::default())
            .unwrap();
        assert_eq!(rep3.verdict, Verdict::Unsat);

        let ball = check_condition(
            &c3,
            &alg,
            &[alg.unit().scale(Complex64::new(1.5, 0.0)), alg.zero()],
            &OptConfig::default(),
        );
        assert!(matches!(ball, Err(Error::BallViolation(_))));
    }

    #[test]
    fn grid_certificate_on_scalars() {
        // inf over the disk of ||z*1 - 1|| in M_1: true value 0.
        let alg = FiniteDimAlgebra::new(&[1]).unwrap();
        let f = parse("infc{z1:1} norm(z1*1 - 1)").unwrap();
        let cert = eval_certified(&f, &alg, &[], 0.05).unwrap();
        assert!(cert.lower <= 0.0 && cert.upper >= 0.0);
        assert!(cert.upper <= 0.1);
        let v = eval(&f, &alg, &[], &OptConfig::with_seed(6)).unwrap().value;
        assert!(v >= cert.lower - 1e-9 && v <= cert.upper + 0.1);
    }
}
