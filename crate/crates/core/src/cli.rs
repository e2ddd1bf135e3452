//! The `oneway` command-line front end and the round-trip driver.
//!
//! Every subcommand writes its result to the supplied writer and returns an
//! exit status: `0` for a positive result, [`EXIT_NEGATIVE`] when the
//! answer is "no" (rejected, no flow, inconsistent, not unitary, round-trip
//! failure), and [`EXIT_ERROR`] for unreadable or invalid input.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::circuit::{Circuit, Gate};
use crate::construct::{construct, interface_names, ConstructError, ConstructionMode, Variant};
use crate::deps::{check_dependencies, DepsError};
use crate::extract::{reference_expr, semantic_report};
use crate::fixtures;
use crate::flow::{find_extended_star_decomp, find_mod_star_decomp, FlowProblem};
use crate::gen;
use crate::pattern::{Pattern, QubitId};
use crate::rewrite::{normalize_traced, standardize_traced, RewriteError};
use crate::sim::{
    align_registers, circuit_unitary, equal_up_to_phase, gates_unitary, run_pattern, DenseOperator,
    SimError,
};
use crate::stable_index::{isomorphic, to_circuit, StableIndexExpr};
use crate::text::{parse_circuit, parse_pattern, print_circuit, print_pattern, SyntaxError};

/// Exit status for a negative verdict.
pub const EXIT_NEGATIVE: i32 = 3;
/// Exit status for unreadable or invalid input.
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{source}")]
    Syntax { path: String, source: SyntaxError },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Construct(#[from] ConstructError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Deps(#[from] DepsError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("flow file: {0}")]
    FlowFile(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

/// Settings shared by every subcommand.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    /// Tolerance for numerical comparisons.
    pub tol: f64,
    /// Seed for every random choice.
    pub seed: u64,
    /// Largest pattern (in qubits) the round-trip driver will simulate.
    pub max_sim_qubits: usize,
    pub format: OutputFormat,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            tol: 1e-9,
            seed: 0,
            max_sim_qubits: 10,
            format: OutputFormat::Text,
        }
    }
}

impl Config {
    pub fn validated(self) -> Result<Config, CliError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(CliError::Config(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        Ok(self)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "oneway",
    version,
    about = "Circuits to one-way measurement patterns and back"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for random instances.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Tolerance for numerical comparisons.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Largest pattern the round-trip driver simulates.
    #[arg(long, global = true, default_value_t = 10)]
    pub max_sim_qubits: usize,
}

impl GlobalArgs {
    pub fn config(&self) -> Result<Config, CliError> {
        Config {
            tol: self.tol,
            seed: self.seed,
            max_sim_qubits: self.max_sim_qubits,
            format: if self.json {
                OutputFormat::Json
            } else {
                OutputFormat::Text
            },
        }
        .validated()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Dkp,
    Rbb,
}

impl From<Mode> for Variant {
    fn from(m: Mode) -> Variant {
        match m {
            Mode::Dkp => Variant::Dkp,
            Mode::Rbb => Variant::Rbb,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Form {
    Standard,
    Normal,
}

/// Inputs are file paths, `-` for standard input, or `@name` for a file in
/// the fixture directory.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Translate a circuit into a pattern.
    Compile {
        circuit: String,
        #[arg(long, value_enum, default_value_t = Mode::Dkp)]
        mode: Mode,
        /// Only standardize the construction.
        #[arg(long)]
        no_normalize: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Rewrite a pattern into standard or normal form.
    Rewrite {
        pattern: String,
        #[arg(long, value_enum, default_value_t = Form::Normal)]
        to: Form,
        /// Print the rule log as JSON instead of the pattern.
        #[arg(long)]
        trace: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Extract the circuit a pattern implements, or the reason it cannot.
    Semantic {
        pattern: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Search for a modified flow.
    CheckFlow {
        pattern: String,
        /// Treat YZ measurements as possible fixed points.
        #[arg(long)]
        extended: bool,
    },
    /// Check a normal-form pattern's dependencies against a flow.
    VerifyDeps {
        pattern: String,
        /// A flow as printed by `check-flow`; found by search if absent.
        #[arg(long)]
        flow: Option<String>,
    },
    /// Run a pattern on every measurement branch.
    Simulate {
        pattern: String,
        /// Print only the unitary the pattern implements.
        #[arg(long)]
        as_unitary: bool,
    },
    /// Compile, extract, and compare against the circuit's normal form.
    Roundtrip {
        /// A circuit; omit together with `--random` to use random circuits.
        circuit: Option<String>,
        #[arg(long, value_enum, default_value_t = Mode::Dkp)]
        mode: Mode,
        /// Number of random circuits to try (seeded by `--seed`).
        #[arg(long)]
        random: Option<usize>,
    },
}

fn read_source(src: &str) -> Result<(String, String), CliError> {
    if src == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|source| CliError::Io {
                path: "<stdin>".into(),
                source,
            })?;
        return Ok(("<stdin>".into(), s));
    }
    let path = match src.strip_prefix('@') {
        Some(name) => fixtures::resolve(name),
        None => PathBuf::from(src),
    };
    let label = path.display().to_string();
    std::fs::read_to_string(&path)
        .map(|s| (label.clone(), s))
        .map_err(|source| CliError::Io {
            path: label,
            source,
        })
}

pub fn load_pattern(src: &str) -> Result<Pattern, CliError> {
    let (path, text) = read_source(src)?;
    parse_pattern(&text).map_err(|source| CliError::Syntax { path, source })
}

pub fn load_circuit(src: &str) -> Result<Circuit, CliError> {
    let (path, text) = read_source(src)?;
    parse_circuit(&text).map_err(|source| CliError::Syntax { path, source })
}

fn write_output(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn emit(out: &mut dyn Write, text: &str) {
    // A closed pipe is not worth a panic.
    let _ = out.write_all(text.as_bytes());
}

fn emit_json(out: &mut dyn Write, v: &serde_json::Value) {
    emit(
        out,
        &format!(
            "{}\n",
            serde_json::to_string_pretty(v).expect("values serialize")
        ),
    );
}

fn operator_json(op: &DenseOperator) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..op.rows)
        .map(|r| {
            (0..op.cols)
                .map(|c| [op.get(r, c).re, op.get(r, c).im])
                .collect()
        })
        .collect();
    serde_json::json!(rows)
}

/// Parses arguments and runs; returns the process exit status.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    match cli
        .global
        .config()
        .and_then(|cfg| run(&cli.command, &cfg, out))
    {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

/// Runs one subcommand.
pub fn run(cmd: &Command, cfg: &Config, out: &mut dyn Write) -> Result<i32, CliError> {
    let json = cfg.format == OutputFormat::Json;
    match cmd {
        Command::Compile {
            circuit,
            mode,
            no_normalize,
            output,
        } => {
            let c = load_circuit(circuit)?;
            let m = ConstructionMode {
                variant: (*mode).into(),
                normalize: !no_normalize,
            };
            let p = construct(&c, m)?;
            let text = print_pattern(&p);
            match output {
                Some(path) => write_output(path, &text)?,
                None => emit(out, &text),
            }
            Ok(0)
        }
        Command::Rewrite {
            pattern,
            to,
            trace,
            output,
        } => {
            let p = load_pattern(pattern)?;
            let (q, log) = match to {
                Form::Standard => standardize_traced(&p)?,
                Form::Normal => normalize_traced(&p)?,
            };
            let text = print_pattern(&q);
            match output {
                Some(path) => write_output(path, &text)?,
                None if !trace => emit(out, &text),
                None => {}
            }
            if *trace {
                emit_json(out, &serde_json::to_value(&log).expect("trace serializes"));
            }
            Ok(0)
        }
        Command::Semantic { pattern, output } => {
            let p = load_pattern(pattern)?;
            match semantic_report(&p) {
                Ok(x) => {
                    let circuit = to_circuit(&x.expr).ok().map(|c| print_circuit(&c));
                    if let (Some(path), Some(text)) = (output, &circuit) {
                        write_output(path, text)?;
                    }
                    if json {
                        emit_json(
                            out,
                            &serde_json::json!({
                                "status": "extracted",
                                "normalized_input": x.normalized_input,
                                "expression": x.expr.to_json(),
                                "circuit": circuit,
                                "flow": x.flow.to_json(),
                            }),
                        );
                    } else if output.is_none() {
                        emit(out, circuit.as_deref().unwrap_or(&format!("{}\n", x.expr)));
                    } else {
                        emit(out, &format!("extracted {} terms\n", x.expr.terms.len()));
                    }
                    Ok(0)
                }
                Err(r) => {
                    if json {
                        emit_json(
                            out,
                            &serde_json::json!({
                                "status": "rejected",
                                "reason": r.reason(),
                                "detail": r.to_string(),
                            }),
                        );
                    } else {
                        emit(out, &format!("rejected: {r}\n"));
                    }
                    Ok(EXIT_NEGATIVE)
                }
            }
        }
        Command::CheckFlow { pattern, extended } => {
            let p = load_pattern(pattern)?;
            let found = if *extended {
                find_extended_star_decomp(&FlowProblem::extended_from_pattern(&p))
            } else {
                find_mod_star_decomp(&FlowProblem::from_pattern(&p))
            };
            match found {
                Some(flow) => {
                    emit_json(out, &flow.to_json());
                    Ok(0)
                }
                None => {
                    if json {
                        emit_json(out, &serde_json::json!({ "status": "no-flow" }));
                    } else {
                        emit(out, "no-flow\n");
                    }
                    Ok(EXIT_NEGATIVE)
                }
            }
        }
        Command::VerifyDeps { pattern, flow } => {
            let p = load_pattern(pattern)?;
            let f = match flow {
                Some(src) => read_flow(src)?,
                None => match find_mod_star_decomp(&FlowProblem::from_pattern(&p)) {
                    Some(flow) => flow.f,
                    None => {
                        emit(out, "inconsistent: no flow\n");
                        return Ok(EXIT_NEGATIVE);
                    }
                },
            };
            let verdict = check_dependencies(&p, &f)?;
            if json {
                emit_json(
                    out,
                    &serde_json::json!({
                        "status": if verdict.is_none() { "consistent" } else { "inconsistent" },
                        "qubit": verdict.as_ref().map(|(q, _)| q.to_string()),
                        "kind": verdict.as_ref().map(|(_, k)| k.to_string()),
                    }),
                );
            } else {
                match &verdict {
                    None => emit(out, "consistent\n"),
                    Some((q, kind)) => emit(out, &format!("inconsistent: {q} ({kind})\n")),
                }
            }
            Ok(if verdict.is_none() { 0 } else { EXIT_NEGATIVE })
        }
        Command::Simulate {
            pattern,
            as_unitary,
        } => {
            let p = load_pattern(pattern)?;
            let bm = run_pattern(&p)?;
            if *as_unitary {
                let u = bm.as_unitary(cfg.tol);
                emit_json(
                    out,
                    &serde_json::json!({
                        "inputs": bm.inputs,
                        "outputs": bm.outputs,
                        "unitary": u.as_ref().map(operator_json),
                    }),
                );
                return Ok(if u.is_some() { 0 } else { EXIT_NEGATIVE });
            }
            let branches: Vec<serde_json::Value> = bm
                .branches
                .iter()
                .map(|b| {
                    serde_json::json!({
                        "outcomes": b.outcomes.iter().map(|(q, o)| (q.to_string(), *o as u8)).collect::<BTreeMap<_, _>>(),
                        "operator": operator_json(&b.operator),
                    })
                })
                .collect();
            emit_json(
                out,
                &serde_json::json!({
                    "inputs": bm.inputs,
                    "outputs": bm.outputs,
                    "trace_preserving": bm.is_trace_preserving(cfg.tol),
                    "branches": branches,
                }),
            );
            Ok(0)
        }
        Command::Roundtrip {
            circuit,
            mode,
            random,
        } => {
            let variant: Variant = (*mode).into();
            let circuits: Vec<Circuit> = match (circuit, random) {
                (Some(src), _) => vec![load_circuit(src)?],
                (None, Some(n)) => {
                    let mut rng = gen::rng(cfg.seed);
                    let (qubits, lnn) = match variant {
                        Variant::Dkp => (4, false),
                        Variant::Rbb => (3, true),
                    };
                    (0..*n)
                        .map(|_| gen::random_circuit(&mut rng, qubits, 12, lnn))
                        .collect()
                }
                (None, None) => {
                    return Err(CliError::Config(
                        "roundtrip needs a circuit or --random N".into(),
                    ))
                }
            };
            let mut all = true;
            let mut reports = Vec::new();
            for c in &circuits {
                let report = roundtrip(c, variant, cfg)?;
                all &= report.passed();
                if !json {
                    emit(out, &report.to_text());
                }
                reports.push(report);
            }
            if json {
                emit_json(
                    out,
                    &serde_json::to_value(&reports).expect("reports serialize"),
                );
            }
            Ok(if all { 0 } else { EXIT_NEGATIVE })
        }
    }
}

fn read_flow(src: &str) -> Result<BTreeMap<QubitId, QubitId>, CliError> {
    let (_, text) = read_source(src)?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::FlowFile(e.to_string()))?;
    let f = v.get("f").unwrap_or(&v);
    serde_json::from_value(f.clone()).map_err(|e| CliError::FlowFile(e.to_string()))
}

/// Size measures of a stable-index expression.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub qubits: usize,
    pub gates_by_arity: BTreeMap<usize, usize>,
    pub depth: usize,
}

impl Counts {
    pub fn of(e: &StableIndexExpr) -> Counts {
        Counts {
            qubits: e.wire_count(),
            gates_by_arity: e.gate_counts_by_arity(),
            depth: e.depth(),
        }
    }

    /// Whether `self` is no larger than `other` in every measure.
    pub fn within(&self, other: &Counts) -> bool {
        self.qubits <= other.qubits
            && self.depth <= other.depth
            && self
                .gates_by_arity
                .iter()
                .all(|(k, n)| *n <= other.gates_by_arity.get(k).copied().unwrap_or(0))
    }
}

/// The outcome of compiling a circuit, extracting it back, and comparing.
#[derive(Clone, Debug, Serialize)]
pub struct RoundtripReport {
    pub circuit: String,
    pub variant: Variant,
    pub reference: Counts,
    pub extracted: Option<Counts>,
    pub rejection: Option<String>,
    pub isomorphic: bool,
    pub within_bounds: bool,
    /// The extracted circuit against the input circuit.
    pub unitary_equal: bool,
    /// The pattern against the input circuit, when small enough to simulate.
    pub pattern_unitary_equal: Option<bool>,
}

impl RoundtripReport {
    pub fn passed(&self) -> bool {
        self.extracted.is_some()
            && self.isomorphic
            && self.within_bounds
            && self.unitary_equal
            && self.pattern_unitary_equal != Some(false)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{} {}: {}\n",
            self.variant,
            self.circuit.trim_end().replace('\n', "; "),
            if self.passed() { "PASS" } else { "FAIL" }
        );
        s += &format!("  reference  {:?}\n", self.reference);
        match (&self.extracted, &self.rejection) {
            (Some(x), _) => s += &format!("  extracted  {x:?}\n"),
            (None, Some(r)) => s += &format!("  rejected   {r}\n"),
            _ => {}
        }
        s += &format!(
            "  isomorphic {}  bounds {}  unitary {}  pattern {}\n",
            self.isomorphic,
            self.within_bounds,
            self.unitary_equal,
            match self.pattern_unitary_equal {
                Some(b) => b.to_string(),
                None => "skipped".into(),
            }
        );
        s
    }
}

/// Compiles `c`, extracts a circuit from the normal-form pattern, and
/// compares it with the circuit's own normal form: isomorphism, size
/// bounds, and unitary equality up to global phase.
pub fn roundtrip(c: &Circuit, variant: Variant, cfg: &Config) -> Result<RoundtripReport, CliError> {
    if c.gates.iter().any(|g| matches!(g, Gate::KetPlus(_))) {
        return Err(CliError::Config(
            "round trips take circuits without fresh qubits".into(),
        ));
    }
    let mode = ConstructionMode {
        variant,
        normalize: true,
    };
    let pattern = construct(c, mode)?;
    let reference = reference_expr(c, variant)?;
    let ref_counts = Counts::of(&reference);
    let mut report = RoundtripReport {
        circuit: print_circuit(c),
        variant,
        reference: ref_counts.clone(),
        extracted: None,
        rejection: None,
        isomorphic: false,
        within_bounds: false,
        unitary_equal: false,
        pattern_unitary_equal: None,
    };
    let x = match semantic_report(&pattern) {
        Ok(x) => x,
        Err(r) => {
            report.rejection = Some(r.to_string());
            return Ok(report);
        }
    };
    let counts = Counts::of(&x.expr);
    report.within_bounds = counts.within(&ref_counts);
    report.extracted = Some(counts);
    report.isomorphic = isomorphic(&x.expr, &reference).is_some();

    // Registers are labelled by the pattern qubit that starts each wire.
    let wires = c.wires();
    let start: Vec<QubitId> = wires
        .iter()
        .map(|w| QubitId::new(format!("{w}.0")))
        .collect();
    let u = gates_unitary(c)?;
    let xu = circuit_unitary(&x.expr)?;
    let x_rows: Vec<QubitId> = x.expr.free_out.iter().map(|i| i.qubit.clone()).collect();
    let x_cols: Vec<QubitId> = x.expr.free_in.iter().map(|i| i.qubit.clone()).collect();
    report.unitary_equal = align_registers(&xu, &x_rows, &start, &x_cols, &start)
        .map(|a| equal_up_to_phase(&a, &u, cfg.tol))
        .unwrap_or(false);

    if pattern.qubits().len() <= cfg.max_sim_qubits {
        let bm = run_pattern(&pattern)?;
        let names = interface_names(c, variant)?;
        let out_to_start: BTreeMap<QubitId, QubitId> = names
            .iter()
            .map(|(_, i, o)| (o.clone(), i.clone()))
            .collect();
        let rows: Vec<QubitId> = bm
            .outputs
            .iter()
            .map(|o| out_to_start.get(o).cloned().unwrap_or_else(|| o.clone()))
            .collect();
        report.pattern_unitary_equal = Some(match bm.as_unitary(cfg.tol) {
            Some(pu) => align_registers(&pu, &rows, &start, &bm.inputs, &start)
                .map(|a| equal_up_to_phase(&a, &u, cfg.tol))
                .unwrap_or(false),
            None => false,
        });
    }
    Ok(report)
}
