//! Executable model theory for finite-dimensional C*-algebras.
//!
//! The crate evaluates formulas of the logic for metric structures on direct
//! sums of matrix blocks, builds the classical stable formulas (projection
//! defect, matrix-unit defect, copy-span distance, anchored embeddings)
//! together with their correction algorithms, decides UHF equivalence through
//! generalized integers, computes finite stages of Bratteli/K_0 data, and
//! measures realization margins for the matricial and finite-dimensional
//! omission types.
//!
//! Quantified values are one-sided by construction: inf-rooted evaluations
//! return upper bounds, sup-rooted ones lower bounds, and every verdict
//! downstream (condition checks, omission margins, diagram comparison) only
//! claims what its side of the bound supports.
//!
//! Multi-start searches, sampling sweeps, and copy enumerations run in
//! parallel through rayon when the `parallel` feature (default) is enabled;
//! disabling it yields a dependency-free sequential build with identical
//! results.

pub mod af;
pub mod algebra;
pub mod config;
pub mod copies;
pub mod error;
pub mod eval;
pub mod formula;
pub mod json;
pub mod linalg;
pub mod omission;
pub mod optimize;
pub mod parallel;
pub mod stable;
pub mod uhf;

pub use algebra::{dist_to_subspace, Element, FiniteDimAlgebra, Subspace};
pub use config::{OptConfig, StepSchedule};
pub use error::{Error, Result};
pub use eval::{check_condition, eval, eval_qf, EvalHints, EvalResult, Verdict};
pub use formula::{parse, print_formula, Condition, Formula, Rational, TypeSchema};
