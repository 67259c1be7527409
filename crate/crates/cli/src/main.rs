//! `cstar` — JSON-speaking command line for the C*-algebra workbench.
//!
//! Every subcommand prints a single machine-readable JSON document on stdout.
//! Exit codes: 0 success, 1 domain error (a computation refused or failed),
//! 2 usage error (bad flags, malformed input). `CSTAR_THREADS` caps the
//! worker count; identical argv and seed produce byte-identical output.

mod selftest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use cstar_core::af::{compare_diagrams, k0_stage, BratteliDiagram};
use cstar_core::algebra::FiniteDimAlgebra;
use cstar_core::config::OptConfig;
use cstar_core::error::Error;
use cstar_core::eval::eval;
use cstar_core::json as wire;
use cstar_core::omission::{
    lf_margin, lm_margin, omission_scan, OmissionVerdict, SchemaKind,
};
use cstar_core::stable::{
    copy_span_distance, embedding_image_defect, fd_unit_defect, matrix_unit_defect,
    projection_defect, stability_probe,
};
use cstar_core::uhf::{supernatural_of, uhf_equivalent, UhfPresentation, UhfVerdict};

#[derive(Parser)]
#[command(name = "cstar", version, about = "Workbench for finite-dimensional C*-algebras")]
struct Cli {
    #[command(flatten)]
    run: RunFlags,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Run configuration: defaults < config file < explicit flags.
#[derive(Args, Debug, Clone)]
struct RunFlags {
    /// JSON file with default values for the flags below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Optimizer tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    restarts: Option<usize>,
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    /// Only certified verdicts may claim realization.
    #[arg(long, global = true)]
    certify: bool,
    /// Pretty-print the JSON output.
    #[arg(long, global = true)]
    pretty: bool,
    /// Write the JSON document to this path instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(serde::Deserialize, Default)]
struct ConfigFile {
    seed: Option<u64>,
    tolerance: Option<f64>,
    restarts: Option<usize>,
    max_iters: Option<usize>,
    certify: Option<bool>,
}

struct Run {
    cfg: OptConfig,
    certify: bool,
}

impl RunFlags {
    fn resolve(&self) -> Result<Run, Error> {
        let file: ConfigFile = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::BadInput(format!("config {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::BadInput(format!("config {}: {e}", p.display())))?
            }
            None => ConfigFile::default(),
        };
        let defaults = OptConfig::default();
        let cfg = OptConfig {
            seed: self.seed.or(file.seed).unwrap_or(defaults.seed),
            tolerance: self.tol.or(file.tolerance).unwrap_or(defaults.tolerance),
            restarts: self.restarts.or(file.restarts).unwrap_or(defaults.restarts),
            max_iters: self.max_iters.or(file.max_iters).unwrap_or(defaults.max_iters),
            ..defaults
        };
        cfg.validate()?;
        Ok(Run { cfg, certify: self.certify || file.certify.unwrap_or(false) })
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a formula on an algebra at a tuple.
    Eval {
        #[arg(long)]
        algebra: PathBuf,
        /// Text file in the formula grammar (see docs/grammar.ebnf).
        #[arg(long)]
        formula: PathBuf,
        /// JSON tuple bound to x1, x2, ...; may be omitted for sentences.
        #[arg(long)]
        tuple: Option<PathBuf>,
    },
    /// Formula builders.
    Formula {
        #[command(subcommand)]
        cmd: FormulaCmd,
    },
    /// Probe the stability of a registered formula.
    Probe {
        /// rho_p, alpha2, alpha3, ...
        #[arg(long)]
        formula: String,
        #[arg(long)]
        algebra: PathBuf,
        /// Defect levels (repeat or comma-separate).
        #[arg(long, value_delimiter = ',', required = true)]
        delta: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
    /// UHF presentations and generalized integers.
    Uhf {
        #[command(subcommand)]
        cmd: UhfCmd,
    },
    /// Bratteli diagrams and K_0 stages.
    Af {
        #[command(subcommand)]
        cmd: AfCmd,
    },
    /// Realization margins for the omission-type families.
    Omission {
        #[arg(long)]
        algebra: PathBuf,
        /// t (matrix copies) or s (finite-dimensional copies).
        #[arg(long)]
        schema: String,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        n: u32,
        /// Largest k for the t-family (default: covers every possible copy).
        #[arg(long)]
        kmax: Option<usize>,
        /// Dimension cap for the s-family (default: covers every subalgebra).
        #[arg(long)]
        dimmax: Option<usize>,
        /// JSON tuple to test; omit together with --scan for random sampling.
        #[arg(long)]
        tuple: Option<PathBuf>,
        /// Sample this many random unit-ball tuples instead of --tuple.
        #[arg(long)]
        scan: Option<usize>,
        /// Measure distances to unital copies.
        #[arg(long)]
        unital: bool,
    },
    /// Run the built-in deterministic example suite.
    Selftest,
}

#[derive(Subcommand)]
enum FormulaCmd {
    /// Build a named formula and print it in the grammar.
    Build {
        /// rho_p | alpha | alpha_f | beta0 | gamma
        #[arg(long)]
        name: String,
        #[arg(long)]
        k: Option<usize>,
        /// Block sizes, e.g. 2,3.
        #[arg(long, value_delimiter = ',')]
        blocks: Vec<usize>,
        /// Tuple arity for beta0.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        unital: bool,
        /// JSON tuple in the algebra given by --blocks (anchors for gamma).
        #[arg(long)]
        anchors: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum UhfCmd {
    /// Decide isomorphism = elementary equivalence of two presentations.
    Compare {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Does the presented algebra contain a unital copy of M_k?
    Copy {
        #[arg(long)]
        a: String,
        #[arg(long)]
        k: u64,
    },
}

#[derive(Subcommand)]
enum AfCmd {
    /// Validate a diagram; violations are reported as data.
    Validate {
        #[arg(long)]
        diagram: PathBuf,
    },
    /// K_0 stage data at a level.
    K0 {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long)]
        level: usize,
    },
    /// Bounded three-valued comparison of two diagrams.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 20)]
        window: u64,
    },
}

fn read_to_string(p: &PathBuf) -> Result<String, Error> {
    std::fs::read_to_string(p).map_err(|e| Error::BadInput(format!("{}: {e}", p.display())))
}

fn read_json(p: &PathBuf) -> Result<Value, Error> {
    serde_json::from_str(&read_to_string(p)?)
        .map_err(|e| Error::BadInput(format!("{}: {e}", p.display())))
}

fn read_algebra(p: &PathBuf) -> Result<FiniteDimAlgebra, Error> {
    wire::algebra_from_json(&read_json(p)?)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn run(cli: &Cli) -> Result<Value, Error> {
    let run = cli.run.resolve()?;
    match &cli.cmd {
        Cmd::Eval { algebra, formula, tuple } => {
            let alg = read_algebra(algebra)?;
            let f = cstar_core::formula::parse(&read_to_string(formula)?)?;
            let args = match tuple {
                Some(p) => wire::tuple_from_json(&alg, &read_json(p)?)?,
                None => vec![],
            };
            let r = eval(&f, &alg, &args, &run.cfg)?;
            Ok(wire::eval_result_to_json(&r))
        }
        Cmd::Formula { cmd: FormulaCmd::Build { name, k, blocks, m, unital, anchors } } => {
            let f = match name.as_str() {
                "rho_p" => projection_defect(),
                "alpha" => {
                    let k = k.ok_or_else(|| Error::InvalidArg("alpha needs --k".into()))?;
                    matrix_unit_defect(k, *unital)?
                }
                "alpha_f" => {
                    if blocks.is_empty() {
                        return Err(Error::InvalidArg("alpha_f needs --blocks".into()));
                    }
                    fd_unit_defect(blocks, *unital)?
                }
                "beta0" => {
                    if blocks.is_empty() {
                        return Err(Error::InvalidArg("beta0 needs --blocks".into()));
                    }
                    let m = m.ok_or_else(|| Error::InvalidArg("beta0 needs --m".into()))?;
                    copy_span_distance(blocks, m, *unital)?
                }
                "gamma" => {
                    if blocks.is_empty() {
                        return Err(Error::InvalidArg("gamma needs --blocks".into()));
                    }
                    let p = anchors
                        .as_ref()
                        .ok_or_else(|| Error::InvalidArg("gamma needs --anchors".into()))?;
                    let f_alg = FiniteDimAlgebra::new(blocks)?;
                    let tuple = wire::tuple_from_json(&f_alg, &read_json(p)?)?;
                    embedding_image_defect(blocks, &tuple, *unital)?
                }
                other => {
                    return Err(Error::InvalidArg(format!(
                        "unknown formula `{other}` (expected rho_p, alpha, alpha_f, beta0, gamma)"
                    )))
                }
            };
            Ok(json!({
                "name": name,
                "free_vars": f.free_vars().into_iter().collect::<Vec<_>>(),
                "formula": cstar_core::formula::print_formula(&f),
            }))
        }
        Cmd::Probe { formula, algebra, delta, samples } => {
            let alg = read_algebra(algebra)?;
            let f = match formula.as_str() {
                "rho_p" => projection_defect(),
                name => match name.strip_prefix("alpha").and_then(|k| k.parse::<usize>().ok()) {
                    Some(k) => matrix_unit_defect(k, false)?,
                    None => {
                        return Err(Error::InvalidArg(format!(
                            "unknown probe formula `{name}` (expected rho_p or alphaK)"
                        )))
                    }
                },
            };
            let report = stability_probe(&f, &alg, *samples, delta, &run.cfg)?;
            Ok(wire::stability_report_to_json(&report))
        }
        Cmd::Uhf { cmd } => match cmd {
            UhfCmd::Compare { a, b } => {
                let pa = UhfPresentation::parse(a)?;
                let pb = UhfPresentation::parse(b)?;
                let verdict = uhf_equivalent(&pa, &pb);
                Ok(json!({
                    "a": pa.to_string(),
                    "b": pb.to_string(),
                    "generalized_integer_a": to_value(&supernatural_of(&pa)),
                    "generalized_integer_b": to_value(&supernatural_of(&pb)),
                    "verdict": match verdict {
                        UhfVerdict::IsomorphicAndElementarilyEquivalent =>
                            "isomorphic_and_elementarily_equivalent",
                        UhfVerdict::Neither => "neither",
                    },
                }))
            }
            UhfCmd::Copy { a, k } => {
                let pa = UhfPresentation::parse(a)?;
                Ok(json!({
                    "a": pa.to_string(),
                    "k": k,
                    "unital_copy_exists": cstar_core::uhf::unital_copy_exists(&pa, *k)?,
                }))
            }
        },
        Cmd::Af { cmd } => match cmd {
            AfCmd::Validate { diagram } => {
                let d: BratteliDiagram = serde_json::from_str(&read_to_string(diagram)?)
                    .map_err(|e| Error::BadInput(format!("diagram: {e}")))?;
                let violations = d.validate();
                Ok(json!({ "ok": violations.is_empty(), "violations": violations }))
            }
            AfCmd::K0 { diagram, level } => {
                let d = BratteliDiagram::from_json(&read_to_string(diagram)?)?;
                let stage = k0_stage(&d, *level)?;
                Ok(json!({
                    "level": stage.level,
                    "rank": stage.rank,
                    "unit": stage.order_unit,
                    "forward_map": stage.forward_map,
                    "positive_cone": "standard",
                }))
            }
            AfCmd::Compare { a, b, depth, window } => {
                let da = BratteliDiagram::from_json(&read_to_string(a)?)?;
                let db = BratteliDiagram::from_json(&read_to_string(b)?)?;
                Ok(to_value(&compare_diagrams(&da, &db, *depth, *window)?))
            }
        },
        Cmd::Omission { algebra, schema, m, n, kmax, dimmax, tuple, scan, unital } => {
            let alg = read_algebra(algebra)?;
            let kind = match schema.as_str() {
                "t" => SchemaKind::Matricial,
                "s" => SchemaKind::FiniteDim,
                other => {
                    return Err(Error::InvalidArg(format!("schema must be t or s, got `{other}`")))
                }
            };
            if let Some(samples) = scan {
                let rep = omission_scan(&alg, kind, *m, *n, *samples, *unital, &run.cfg)?;
                return Ok(to_value(&rep));
            }
            let p = tuple
                .as_ref()
                .ok_or_else(|| Error::InvalidArg("need --tuple or --scan".into()))?;
            let tup = wire::tuple_from_json(&alg, &read_json(p)?)?;
            if tup.len() != *n as usize {
                return Err(Error::InvalidArg(format!(
                    "tuple has {} entries, expected n = {n}",
                    tup.len()
                )));
            }
            let mut rep = match kind {
                SchemaKind::Matricial => {
                    let k_max =
                        kmax.unwrap_or_else(|| alg.blocks().iter().copied().max().unwrap().max(2));
                    lm_margin(&alg, &tup, *m, k_max, *unital, &run.cfg)?
                }
                SchemaKind::FiniteDim => {
                    let dim_max = dimmax.unwrap_or_else(|| alg.dim());
                    lf_margin(&alg, &tup, *m, dim_max, *unital, &run.cfg)?
                }
            };
            // Realization is a claim about an infimum; without --certify the
            // CLI reports the margin but leaves the verdict open.
            if !run.certify && rep.verdict == OmissionVerdict::Realizes {
                rep.verdict = OmissionVerdict::Unknown;
            }
            Ok(to_value(&rep))
        }
        Cmd::Selftest => selftest::run(run.cfg.seed),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("CSTAR_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            cstar_core::parallel::set_thread_cap(n.max(1));
        }
    }
    let (value, code) = match run(&cli) {
        Ok(v) => (v, 0),
        Err(e) => {
            let code = match &e {
                Error::ParseError { .. }
                | Error::BadInput(_)
                | Error::InvalidArg(_)
                | Error::ConfigError(_)
                | Error::InvalidAlgebra(_)
                | Error::InvalidDiagram(_) => 2,
                _ => 1,
            };
            (json!({ "error": e.to_string() }), code)
        }
    };
    let rendered = if cli.run.pretty {
        serde_json::to_string_pretty(&value).unwrap()
    } else {
        value.to_string()
    };
    match &cli.run.output {
        Some(p) => {
            if let Err(e) = std::fs::write(p, rendered + "\n") {
                eprintln!("{{\"error\":\"write {}: {e}\"}}", p.display());
                std::process::exit(1);
            }
        }
        None => println!("{rendered}"),
    }
    std::process::exit(code);
}
