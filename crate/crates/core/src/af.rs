//! Bratteli diagrams, finite stages of the ordered K_0 invariant, canonical
//! multiplicity embeddings between levels, and a bounded-depth comparison.
//!
//! A diagram is a leveled list of block-size vectors connected by nonnegative
//! integer multiplicity matrices; eventually periodic diagrams repeat their
//! map list cyclically from `repeat_from`. Comparison searches for a
//! commuting intertwining of K_0 stage maps and is deliberately three-valued:
//! a bounded search that finds nothing proves nothing, so the only
//! `Distinguished` verdicts come from exactly computable invariants
//! (generalized integers of single-vertex diagrams).

use serde::{Deserialize, Serialize};

use crate::algebra::{Element, FiniteDimAlgebra};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::uhf::{supernatural_of, Supernatural, UhfPresentation};

/// How many levels past the current one the intertwining search will try to
/// land on in a single step.
const LOOKAHEAD: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BratteliDiagram {
    pub unital: bool,
    /// Block sizes per level; at least one level.
    pub levels: Vec<Vec<u64>>,
    /// maps[n] has shape |levels[n+1]| x |levels[n]|.
    pub maps: Vec<Vec<Vec<u64>>>,
    /// Continue past the explicit maps by cycling maps[repeat_from..].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat_from: Option<usize>,
}

impl BratteliDiagram {
    pub fn from_json(text: &str) -> Result<Self> {
        let d: BratteliDiagram =
            serde_json::from_str(text).map_err(|e| Error::BadInput(format!("diagram: {e}")))?;
        let violations = d.validate();
        if !violations.is_empty() {
            return Err(Error::InvalidDiagram(violations.join("; ")));
        }
        Ok(d)
    }

    /// Single-vertex UHF-type diagram k ⊗ k ⊗ ... starting at M_1.
    pub fn uhf(k: u64) -> Self {
        BratteliDiagram {
            unital: true,
            levels: vec![vec![1], vec![k]],
            maps: vec![vec![vec![k]]],
            repeat_from: Some(0),
        }
    }

    /// Structural validation; violations are returned as data.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.levels.is_empty() {
            out.push("no levels".to_string());
            return out;
        }
        for (n, v) in self.levels.iter().enumerate() {
            if v.is_empty() {
                out.push(format!("level {n} is empty"));
            }
            if v.iter().any(|&k| k == 0) {
                out.push(format!("level {n} has a zero block size"));
            }
        }
        if self.maps.len() + 1 != self.levels.len() {
            out.push(format!(
                "{} levels need {} maps, found {}",
                self.levels.len(),
                self.levels.len() - 1,
                self.maps.len()
            ));
            return out;
        }
        if let Some(r) = self.repeat_from {
            if r >= self.maps.len() {
                out.push(format!("repeat_from {r} out of range"));
                return out;
            }
        }
        for (n, m) in self.maps.iter().enumerate() {
            let rows = self.levels[n + 1].len();
            let cols = self.levels[n].len();
            if m.len() != rows || m.iter().any(|r| r.len() != cols) {
                out.push(format!("map {n} is not {rows}x{cols}"));
                continue;
            }
            let image: Vec<u64> = (0..rows)
                .map(|i| (0..cols).map(|j| m[i][j] * self.levels[n][j]).sum())
                .collect();
            for i in 0..rows {
                if self.unital && image[i] != self.levels[n + 1][i] {
                    out.push(format!(
                        "unital violation at level {n}: block {i} gets {} of {}",
                        image[i],
                        self.levels[n + 1][i]
                    ));
                }
                if !self.unital && image[i] > self.levels[n + 1][i] {
                    out.push(format!(
                        "capacity violation at level {n}: block {i} gets {} of {}",
                        image[i],
                        self.levels[n + 1][i]
                    ));
                }
            }
        }
        // A periodic description must keep shapes consistent around the cycle.
        if let Some(r) = self.repeat_from {
            let last = self.levels.len() - 1;
            let next = &self.maps[r];
            if next.iter().any(|row| row.len() != self.levels[last].len()) {
                out.push("periodic wrap-around has mismatched shapes".to_string());
            }
        }
        out
    }

    fn map_at(&self, n: usize) -> Result<Vec<Vec<u64>>> {
        if n < self.maps.len() {
            return Ok(self.maps[n].clone());
        }
        match self.repeat_from {
            Some(r) => {
                let cycle = self.maps.len() - r;
                Ok(self.maps[r + (n - r) % cycle].clone())
            }
            None => Err(Error::InvalidLevel(format!(
                "level {} beyond a non-periodic diagram",
                n + 1
            ))),
        }
    }

    /// Size vector at level n (periodic descriptions unrolled).
    pub fn level_vector(&self, n: usize) -> Result<Vec<u64>> {
        if n < self.levels.len() {
            return Ok(self.levels[n].clone());
        }
        let mut v = self.levels.last().unwrap().clone();
        for m in self.levels.len() - 1..n {
            let map = self.map_at(m)?;
            if map.iter().any(|row| row.len() != v.len()) {
                return Err(Error::InvalidDiagram("periodic shapes inconsistent".into()));
            }
            let next: Vec<u64> = map
                .iter()
                .map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum())
                .collect();
            if !self.unital {
                // Non-unital periodic continuations grow by the map image.
            }
            v = next;
        }
        Ok(v)
    }

    pub fn level_algebra(&self, n: usize) -> Result<FiniteDimAlgebra> {
        let v = self.level_vector(n)?;
        FiniteDimAlgebra::new(&v.iter().map(|&k| k as usize).collect::<Vec<_>>())
    }

    /// Composite multiplicity matrix from level `from` to level `to`.
    pub fn composite_map(&self, from: usize, to: usize) -> Result<Vec<Vec<u64>>> {
        if to < from {
            return Err(Error::InvalidLevel("composite runs forward only".into()));
        }
        let mut acc = identity_matrix(self.level_vector(from)?.len());
        for n in from..to {
            acc = mat_mul(&self.map_at(n)?, &acc);
        }
        Ok(acc)
    }

    /// Block-diagonal multiplicity embedding of a level-n element into level
    /// n+1: target block j receives map[j][i] diagonal copies of source block
    /// i, zero-padded when the diagram is not unital.
    pub fn embed(&self, n: usize, a: &Element) -> Result<Element> {
        let from = self.level_algebra(n)?;
        if a.algebra() != &from {
            return Err(Error::AlgebraMismatch("element does not live at this level".into()));
        }
        let to = self.level_algebra(n + 1)?;
        let map = self.map_at(n)?;
        let mut blocks = Vec::with_capacity(to.n_blocks());
        for (j, &size) in to.blocks().iter().enumerate() {
            let mut b = CMat::zeros(size);
            let mut off = 0usize;
            for (i, src) in a.blocks().iter().enumerate() {
                let k = src.dim();
                for _ in 0..map[j][i] {
                    for r in 0..k {
                        for c in 0..k {
                            b[(off + r, off + c)] = src[(r, c)];
                        }
                    }
                    off += k;
                }
            }
            blocks.push(b);
        }
        to.element_from_blocks(blocks)
    }

    pub fn is_single_vertex(&self) -> bool {
        self.levels.iter().all(|v| v.len() == 1)
    }

    /// Generalized integer of a single-vertex (UHF-type) diagram.
    pub fn generalized_integer(&self) -> Result<Supernatural> {
        if !self.is_single_vertex() {
            return Err(Error::NotUhfDiagram(format!(
                "diagram has a level of rank {}",
                self.levels.iter().map(|v| v.len()).max().unwrap_or(0)
            )));
        }
        let mut prefix: Vec<u64> = vec![self.levels[0][0]];
        let mut period: Vec<u64> = Vec::new();
        for (n, m) in self.maps.iter().enumerate() {
            match self.repeat_from {
                Some(r) if n >= r => period.push(m[0][0]),
                _ => prefix.push(m[0][0]),
            }
        }
        let pres = UhfPresentation::new(
            prefix.into_iter().filter(|&k| k >= 1).collect(),
            period,
        )?;
        Ok(supernatural_of(&pres))
    }
}

fn identity_matrix(n: usize) -> Vec<Vec<u64>> {
    (0..n).map(|i| (0..n).map(|j| u64::from(i == j)).collect()).collect()
}

fn mat_mul(a: &[Vec<u64>], b: &[Vec<u64>]) -> Vec<Vec<u64>> {
    let rows = a.len();
    let inner = b.len();
    let cols = b[0].len();
    (0..rows)
        .map(|i| {
            (0..cols)
                .map(|j| (0..inner).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

/// Finite stage of the ordered K_0 data: Z^rank with the standard positive
/// cone (componentwise nonnegative), the order unit, and the forward map to
/// the next stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct K0Stage {
    pub level: usize,
    pub rank: usize,
    pub order_unit: Vec<u64>,
    pub forward_map: Vec<Vec<u64>>,
}

impl K0Stage {
    pub fn cone_contains(v: &[i64]) -> bool {
        v.iter().all(|&x| x >= 0)
    }
}

pub fn k0_stage(d: &BratteliDiagram, n: usize) -> Result<K0Stage> {
    let unit = d.level_vector(n)?;
    let map = d.map_at(n)?;
    Ok(K0Stage { level: n, rank: unit.len(), order_unit: unit, forward_map: map })
}

/// One arrow of an intertwining certificate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntertwiningStep {
    /// 1 for a map out of the first diagram, 2 for the second.
    pub from_diagram: u8,
    pub from_level: usize,
    pub to_level: usize,
    pub matrix: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Comparison {
    Equivalent { certificate: Vec<IntertwiningStep> },
    Distinguished { witness: String },
    Unknown,
}

/// Enumerate nonnegative integer matrices, row by row, subject to entries <=
/// window, an optional unit equation M u = w, and an optional composition
/// equation M * prev = target.
fn enumerate_matrices(
    rows: usize,
    cols: usize,
    window: u64,
    unit: Option<(&[u64], &[u64])>,
    compose: Option<(&[Vec<u64>], &[Vec<u64>])>,
    out: &mut Vec<Vec<Vec<u64>>>,
    limit: usize,
) {
    fn fill_row(
        row: &mut Vec<u64>,
        c: usize,
        cols: usize,
        window: u64,
        unit: Option<(&[u64], u64)>,
        rows_done: &dyn Fn(&[u64]) -> bool,
        acc: &mut Vec<Vec<u64>>,
    ) {
        if c == cols {
            if let Some((u, target)) = unit {
                let got: u64 = row.iter().zip(u).map(|(a, b)| a * b).sum();
                if got != target {
                    return;
                }
            }
            if rows_done(row) {
                acc.push(row.clone());
            }
            return;
        }
        let mut cap = window;
        if let Some((u, target)) = unit {
            // Prune: remaining budget under the unit equation.
            let used: u64 = row[..c].iter().zip(&u[..c]).map(|(a, b)| a * b).sum();
            if used > target {
                return;
            }
            if u[c] > 0 {
                cap = cap.min((target - used) / u[c]);
            }
        }
        for v in 0..=cap {
            row.push(v);
            fill_row(row, c + 1, cols, window, unit, rows_done, acc);
            row.pop();
        }
    }

    // Candidate rows per row index (composition fixes each row independently).
    let mut per_row: Vec<Vec<Vec<u64>>> = Vec::with_capacity(rows);
    for r in 0..rows {
        let unit_r = unit.map(|(u, w)| (u, w[r]));
        let check = |row: &[u64]| -> bool {
            if let Some((prev, target)) = compose {
                // (M * prev)[r] = sum_c M[r][c] prev[c][:]
                let cols_t = target[r].len();
                for j in 0..cols_t {
                    let got: u64 = (0..prev.len()).map(|c| row[c] * prev[c][j]).sum();
                    if got != target[r][j] {
                        return false;
                    }
                }
            }
            true
        };
        let mut acc = Vec::new();
        let mut row = Vec::with_capacity(cols);
        fill_row(&mut row, 0, cols, window, unit_r, &check, &mut acc);
        if acc.is_empty() {
            return;
        }
        per_row.push(acc);
    }
    // Cartesian product of row choices.
    let mut choice = vec![0usize; rows];
    'outer: loop {
        let m: Vec<Vec<u64>> =
            choice.iter().enumerate().map(|(r, &c)| per_row[r][c].clone()).collect();
        if m.iter().any(|row| row.iter().any(|&v| v > 0)) {
            out.push(m);
            if out.len() >= limit {
                return;
            }
        }
        for r in 0..rows {
            choice[r] += 1;
            if choice[r] < per_row[r].len() {
                continue 'outer;
            }
            choice[r] = 0;
        }
        break;
    }
}

struct SearchCtx<'a> {
    d1: &'a BratteliDiagram,
    d2: &'a BratteliDiagram,
    depth: usize,
    window: u64,
    unital: bool,
}

fn search_chain(
    ctx: &SearchCtx,
    round: usize,
    n: usize,
    m: usize,
    prev: Option<&Vec<Vec<u64>>>,
    steps: &mut Vec<IntertwiningStep>,
) -> Result<bool> {
    if round == ctx.depth {
        return Ok(true);
    }
    // Forward map R: K0(D1, n) -> K0(D2, m') for m' in m..m+LOOKAHEAD,
    // commuting with the previous backward map.
    let u1 = ctx.d1.level_vector(n)?;
    for m_next in m..m + LOOKAHEAD {
        let u2 = ctx.d2.level_vector(m_next)?;
        let compose_target = match prev {
            Some(_) => Some(ctx.d2.composite_map(steps.last().unwrap().from_level, m_next)?),
            None => None,
        };
        let mut cands = Vec::new();
        enumerate_matrices(
            u2.len(),
            u1.len(),
            ctx.window,
            ctx.unital.then_some((&u1[..], &u2[..])),
            match (&compose_target, prev) {
                (Some(t), Some(p)) => Some((&p[..], &t[..])),
                _ => None,
            },
            &mut cands,
            64,
        );
        for r in cands {
            steps.push(IntertwiningStep {
                from_diagram: 1,
                from_level: n,
                to_level: m_next,
                matrix: r.clone(),
            });
            // Backward map S: K0(D2, m_next) -> K0(D1, n') with S R = D1(n -> n').
            for n_next in n + 1..=n + LOOKAHEAD {
                let u1n = ctx.d1.level_vector(n_next)?;
                let target = ctx.d1.composite_map(n, n_next)?;
                let mut backs = Vec::new();
                enumerate_matrices(
                    u1n.len(),
                    u2.len(),
                    ctx.window,
                    ctx.unital.then_some((&u2[..], &u1n[..])),
                    Some((&r[..], &target[..])),
                    &mut backs,
                    64,
                );
                for s in backs {
                    steps.push(IntertwiningStep {
                        from_diagram: 2,
                        from_level: m_next,
                        to_level: n_next,
                        matrix: s.clone(),
                    });
                    if search_chain(ctx, round + 1, n_next, m_next + 1, Some(&s), steps)? {
                        return Ok(true);
                    }
                    steps.pop();
                }
            }
            steps.pop();
        }
    }
    Ok(false)
}

/// Bounded three-valued comparison of two diagrams through their K_0 stages.
pub fn compare_diagrams(
    d1: &BratteliDiagram,
    d2: &BratteliDiagram,
    depth: usize,
    window: u64,
) -> Result<Comparison> {
    if depth == 0 {
        return Err(Error::InvalidArg("depth must be >= 1".into()));
    }
    // Exact invariant for single-vertex diagrams: the generalized integer.
    if d1.is_single_vertex() && d2.is_single_vertex() {
        let g1 = d1.generalized_integer()?;
        let g2 = d2.generalized_integer()?;
        if g1 != g2 {
            return Ok(Comparison::Distinguished {
                witness: format!("generalized integers differ: {g1} vs {g2}"),
            });
        }
    }
    let ctx = SearchCtx { d1, d2, depth, window, unital: d1.unital && d2.unital };
    let mut steps = Vec::new();
    if search_chain(&ctx, 0, 0, 0, None, &mut steps)? {
        return Ok(Comparison::Equivalent { certificate: steps });
    }
    Ok(Comparison::Unknown)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn car() -> BratteliDiagram {
        BratteliDiagram::uhf(2)
    }

    fn fibonacci() -> BratteliDiagram {
        BratteliDiagram {
            unital: true,
            levels: vec![vec![1, 1], vec![2, 1]],
            maps: vec![vec![vec![1, 1], vec![1, 0]]],
            repeat_from: Some(0),
        }
    }

    #[test]
    fn validation_examples() {
        let ok = BratteliDiagram {
            unital: true,
            levels: vec![vec![1], vec![2], vec![4]],
            maps: vec![vec![vec![2]], vec![vec![2]]],
            repeat_from: None,
        };
        assert!(ok.validate().is_empty());

        let bad = BratteliDiagram {
            unital: true,
            levels: vec![vec![1], vec![3]],
            maps: vec![vec![vec![2]]],
            repeat_from: None,
        };
        let v = bad.validate();
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("level 0"));

        assert!(fibonacci().validate().is_empty());
        assert_eq!(fibonacci().level_vector(2).unwrap(), vec![3, 2]);
        assert_eq!(fibonacci().level_vector(3).unwrap(), vec![5, 3]);
    }

    #[test]
    fn level_algebra_examples() {
        assert_eq!(car().level_algebra(3).unwrap().blocks(), &[8]);
        assert_eq!(fibonacci().level_algebra(2).unwrap().blocks(), &[3, 2]);
        let d = BratteliDiagram {
            unital: true,
            levels: vec![vec![1]],
            maps: vec![],
            repeat_from: None,
        };
        assert_eq!(d.level_algebra(0).unwrap().blocks(), &[1]);
        assert!(matches!(d.level_algebra(1), Err(Error::InvalidLevel(_))));
    }

    #[test]
    fn embed_is_isometric_star_homomorphism() {
        let d = car();
        let m2 = d.level_algebra(1).unwrap();
        // a in M_2 goes to diag(a, a) in M_4.
        let a = m2.random_ball_element(1.0, 3);
        let img = d.embed(1, &a).unwrap();
        assert_eq!(img.algebra().blocks(), &[4]);
        assert!((img.norm().unwrap() - a.norm().unwrap()).abs() < 1e-12);
        assert_eq!(d.embed(1, &m2.unit()).unwrap(), d.level_algebra(2).unwrap().unit());
        let b = m2.random_ball_element(1.0, 4);
        let lhs = d.embed(1, &a.mul(&b).unwrap()).unwrap();
        let rhs = d.embed(1, &a).unwrap().mul(&d.embed(1, &b).unwrap()).unwrap();
        assert!(lhs.dist(&rhs).unwrap() < 1e-12);
        let adj = d.embed(1, &a.adjoint()).unwrap();
        assert!(adj.dist(&d.embed(1, &a).unwrap().adjoint()).unwrap() < 1e-12);
    }

    #[test]
    fn k0_stage_examples() {
        let s = k0_stage(&car(), 3).unwrap();
        assert_eq!(s.rank, 1);
        assert_eq!(s.order_unit, vec![8]);
        assert_eq!(s.forward_map, vec![vec![2]]);
        let f = k0_stage(&fibonacci(), 1).unwrap();
        assert_eq!(f.rank, 2);
        assert_eq!(f.order_unit, vec![2, 1]);
        assert_eq!(f.forward_map, vec![vec![1, 1], vec![1, 0]]);
        assert!(K0Stage::cone_contains(&[0, 3]));
        assert!(!K0Stage::cone_contains(&[-1, 3]));
    }

    #[test]
    fn generalized_integer_examples() {
        let g = car().generalized_integer().unwrap();
        assert_eq!(g.to_string(), "2^inf");
        let six = BratteliDiagram::uhf(6).generalized_integer().unwrap();
        assert_eq!(six.to_string(), "2^inf*3^inf");
        assert!(matches!(
            fibonacci().generalized_integer(),
            Err(Error::NotUhfDiagram(_))
        ));
    }

    #[test]
    fn compare_car_with_itself() {
        let c = compare_diagrams(&car(), &car(), 3, 20).unwrap();
        assert!(matches!(c, Comparison::Equivalent { .. }), "got {c:?}");
    }

    #[test]
    fn compare_distinguishes_primes() {
        let c = compare_diagrams(&BratteliDiagram::uhf(2), &BratteliDiagram::uhf(3), 2, 20)
            .unwrap();
        match c {
            Comparison::Distinguished { witness } => {
                assert!(witness.contains("2^inf"));
                assert!(witness.contains("3^inf"));
            }
            other => panic!("expected Distinguished, got {other:?}"),
        }
    }

    #[test]
    fn compare_interleaves_2_3_with_6() {
        let d1 = BratteliDiagram {
            unital: true,
            levels: vec![vec![1], vec![2], vec![6]],
            maps: vec![vec![vec![2]], vec![vec![3]]],
            repeat_from: Some(0),
        };
        let c = compare_diagrams(&d1, &BratteliDiagram::uhf(6), 3, 20).unwrap();
        assert!(matches!(c, Comparison::Equivalent { .. }), "got {c:?}");
    }

    #[test]
    fn compare_fibonacci_vs_car_never_equivalent() {
        let c = compare_diagrams(&fibonacci(), &car(), 2, 12).unwrap();
        assert!(!matches!(c, Comparison::Equivalent { .. }), "got {c:?}");
        let c2 = compare_diagrams(&car(), &fibonacci(), 2, 12).unwrap();
        assert!(!matches!(c2, Comparison::Equivalent { .. }), "got {c2:?}");
    }

    #[test]
    fn telescoped_car_is_equivalent() {
        let telescoped = BratteliDiagram {
            unital: true,
            levels: vec![vec![1], vec![4]],
            maps: vec![vec![vec![4]]],
            repeat_from: Some(0),
        };
        let c = compare_diagrams(&car(), &telescoped, 3, 20).unwrap();
        assert!(matches!(c, Comparison::Equivalent { .. }), "got {c:?}");
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"unital":true,"levels":[[1],[2],[4]],"maps":[[[2]],[[2]]],"repeat_from":1}"#;
        let d = BratteliDiagram::from_json(text).unwrap();
        assert_eq!(d.level_vector(5).unwrap(), vec![32]);
        let again = serde_json::to_string(&d).unwrap();
        let d2 = BratteliDiagram::from_json(&again).unwrap();
        assert_eq!(d, d2);
    }
}
