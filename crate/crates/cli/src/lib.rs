//! The `pons` command line: check proof scripts, inspect the dependency
//! graph, and run the numeric model checker.
//!
//! Exit codes: 0 success, 1 a proof failed (or a checked theorem depends on
//! itself, or a model check failed), 2 bad input.

pub mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pons_core::depgraph::{Classification, DepGraph};
use pons_core::kernel::{CheckReport, DegeneracyMode};
use pons_core::models::{model_check, ModelCheckConfig, ModelId, ToleranceProfile};
use pons_core::pipeline::{LoadError, Workspace};
use pons_core::proofscript::{parse_bytes, Item, ItemKind};

use report::{ModelSummary, RunReport, Status, TheoremReport, Verdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pons", version, about = "Check proofs of the isosceles base-angles theorem and friends")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Input {
    /// Script files, or directories to search for *.proof and *.conj files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Fail side conditions that are not derivable instead of assuming them.
    #[arg(long)]
    strict_degeneracy: bool,
    /// Print a JSON run report instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Euclidean,
    Poincare,
    Sphere,
    All,
}

impl ModelArg {
    fn models(self) -> Vec<ModelId> {
        match self {
            ModelArg::Euclidean => vec![ModelId::Euclidean],
            ModelArg::Poincare => vec![ModelId::Poincare],
            ModelArg::Sphere => vec![ModelId::Sphere],
            ModelArg::All => ModelId::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check every proof.
    Check {
        #[command(flatten)]
        input: Input,
    },
    /// Classify every entry by what it depends on and report cycles.
    Deps {
        #[command(flatten)]
        input: Input,
        /// Also write the graph in DOT format.
        #[arg(long, value_name = "PATH")]
        dot: Option<PathBuf>,
    },
    /// Evaluate theorems and conjectures on random instances of each model.
    Model {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value = "all")]
        model: ModelArg,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Equality tolerance for every model; the strict-inequality margin
        /// is ten times this.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Parse scripts and print them in canonical layout.
    Parse {
        /// Print the syntax tree as JSON instead.
        #[arg(long)]
        dump_ast: bool,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

/// An input problem; reported on stderr with exit code 2.
#[derive(Debug)]
pub struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

type Res<T> = Result<T, InputError>;

fn input_err(msg: impl Into<String>) -> InputError {
    InputError(msg.into())
}

/// Runs the command line `args` (including the program name).
pub fn run(args: impl IntoIterator<Item = OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let result = match cli.command {
        Command::Check { input } => cmd_check(&input, out),
        Command::Deps { input, dot } => cmd_deps(&input, dot.as_deref(), out),
        Command::Model { input, model, trials, seed, tol } => {
            cmd_model(&input, model, trials, seed, tol, out)
        }
        Command::Parse { dump_ast, files } => cmd_parse(&files, dump_ast, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
    }
}

fn is_script(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("proof" | "conj"))
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Res<()> {
    let entries = fs::read_dir(dir).map_err(|e| input_err(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for p in paths {
        if p.is_dir() {
            walk(&p, out)?;
        } else if is_script(&p) {
            out.push(p);
        }
    }
    Ok(())
}

/// Files named on the command line, with directories expanded in sorted
/// order.
pub fn expand_inputs(paths: &[PathBuf]) -> Res<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let before = out.len();
            walk(p, &mut out)?;
            if out.len() == before {
                return Err(input_err(format!("{}: no .proof or .conj files", p.display())));
            }
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn read_sources(paths: &[PathBuf]) -> Res<Vec<(String, String)>> {
    expand_inputs(paths)?
        .into_iter()
        .map(|p| {
            let name = p.display().to_string();
            let bytes = fs::read(&p).map_err(|e| input_err(format!("{name}: {e}")))?;
            match String::from_utf8(bytes) {
                Ok(text) => Ok((name, text)),
                Err(e) => {
                    let error = parse_bytes(e.as_bytes()).expect_err("invalid UTF-8 is rejected");
                    Err(input_err(format!("{name}: {error}")))
                }
            }
        })
        .collect()
}

struct Analysis {
    ws: Workspace,
    reports: BTreeMap<String, CheckReport>,
    graph: DepGraph,
}

fn analyse(input: &Input) -> Res<Analysis> {
    let sources = read_sources(&input.files)?;
    let ws = Workspace::load(sources.iter().map(|(f, t)| (f.as_str(), t.as_str())))
        .map_err(|e| match e {
            LoadError::Syntax { file, error } => input_err(format!("{file}: {error}")),
            LoadError::Registry(error) => input_err(error.to_string()),
        })?;
    let mode = if input.strict_degeneracy { DegeneracyMode::Strict } else { DegeneracyMode::Permissive };
    let reports = ws.check(mode);
    let graph = ws.graph(&reports).map_err(|e| input_err(e.to_string()))?;
    Ok(Analysis { ws, reports, graph })
}

fn kind_name(kind: ItemKind) -> &'static str {
    match kind {
        ItemKind::Theorem => "theorem",
        ItemKind::Conjecture => "conjecture",
        ItemKind::Declared => "declared",
        ItemKind::Axiom => "axiom",
    }
}

impl Analysis {
    /// One report entry per script block, in input order.
    fn entries(&self) -> Vec<TheoremReport> {
        let mut out = Vec::new();
        for script in &self.ws.scripts {
            for item in &script.items {
                out.push(self.entry(item));
            }
        }
        out
    }

    fn entry(&self, item: &Item) -> TheoremReport {
        let name = item.name().to_owned();
        let classification = self.graph.classify(&name).ok();
        let axioms = self.graph.axiom_basis(&name).map(|b| b.into_iter().collect()).unwrap_or_default();
        let mut entry = TheoremReport {
            name: name.clone(),
            kind: String::new(),
            status: Status::Unchecked,
            failure: None,
            classification,
            axioms,
            assumptions: Vec::new(),
            models: BTreeMap::new(),
        };
        if let Some(rej) = self.ws.rejected.iter().find(|r| r.name == name) {
            entry.kind = match item {
                Item::Theorem(t) if t.proof.is_some() => "theorem",
                Item::Theorem(_) => "conjecture",
                Item::Declare(d) if d.uses.is_empty() => "axiom",
                Item::Declare(_) => "declared",
            }
            .to_owned();
            entry.status = Status::Failed;
            entry.failure = Some(rej.error.to_string());
            return entry;
        }
        let el = self.ws.item(&name).expect("elaborated or rejected");
        entry.kind = kind_name(el.kind).to_owned();
        if let Some(report) = self.reports.get(&name) {
            entry.status = if report.is_ok() { Status::Ok } else { Status::Failed };
            entry.failure = report.failure.as_ref().map(|f| f.to_string());
            entry.assumptions = report
                .assumptions
                .iter()
                .map(|[a, b, c]| format!("noncollinear {a} {b} {c}"))
                .collect();
        }
        entry
    }
}

fn emit_json(out: &mut dyn Write, report: &RunReport) -> Res<i32> {
    let text = serde_json::to_string_pretty(report).map_err(|e| input_err(e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| input_err(e.to_string()))?;
    Ok(EXIT_OK)
}

fn run_report(theorems: Vec<TheoremReport>, seed: Option<u64>) -> RunReport {
    RunReport { version: env!("CARGO_PKG_VERSION").to_owned(), seed, theorems }
}

fn io(e: std::io::Error) -> InputError {
    input_err(e.to_string())
}

fn cmd_check(input: &Input, out: &mut dyn Write) -> Res<i32> {
    let a = analyse(input)?;
    let entries = a.entries();
    let code = if entries.iter().any(|e| e.status == Status::Failed) { EXIT_FAILED } else { EXIT_OK };
    if input.json {
        emit_json(out, &run_report(entries, None))?;
        return Ok(code);
    }
    for e in &entries {
        match e.status {
            Status::Ok if e.assumptions.is_empty() => writeln!(out, "{}: ok", e.name),
            Status::Ok => writeln!(out, "{}: ok, assuming {}", e.name, e.assumptions.join(", ")),
            Status::Failed => {
                writeln!(out, "{}: FAILED: {}", e.name, e.failure.as_deref().unwrap_or("?"))
            }
            Status::Unchecked => writeln!(out, "{}: {} (nothing to check)", e.name, e.kind),
        }
        .map_err(io)?;
    }
    Ok(code)
}

fn cmd_deps(input: &Input, dot: Option<&Path>, out: &mut dyn Write) -> Res<i32> {
    let a = analyse(input)?;
    if let Some(path) = dot {
        fs::write(path, a.graph.emit_dot())
            .map_err(|e| input_err(format!("{}: {e}", path.display())))?;
    }
    let entries = a.entries();
    let cyclic = entries
        .iter()
        .any(|e| e.kind == "theorem" && e.classification == Some(Classification::Cyclic));
    let code = if cyclic { EXIT_FAILED } else { EXIT_OK };
    if input.json {
        emit_json(out, &run_report(entries, None))?;
        return Ok(code);
    }
    let width = entries.iter().map(|e| e.name.len()).max().unwrap_or(0);
    for e in &entries {
        let class = e.classification.map_or("-".to_owned(), |c| c.to_string());
        writeln!(out, "{:<width$}  {:<10}  {class}", e.name, e.kind).map_err(io)?;
    }
    let cycles = a.graph.detect_cycles();
    if cycles.is_empty() {
        writeln!(out, "no cycles").map_err(io)?;
    }
    for c in &cycles {
        writeln!(out, "cycle: {}", c.join(", ")).map_err(io)?;
    }
    Ok(code)
}

fn verdict(failures: usize, class: Option<Classification>, model: ModelId) -> Verdict {
    if failures == 0 {
        Verdict::Pass
    } else if class == Some(Classification::EuclideanOnly) && model != ModelId::Euclidean {
        Verdict::ExpectedDivergence
    } else {
        Verdict::Fail
    }
}

fn cmd_model(
    input: &Input,
    model: ModelArg,
    trials: usize,
    seed: u64,
    tol: Option<f64>,
    out: &mut dyn Write,
) -> Res<i32> {
    if let Some(t) = tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(input_err(format!("--tol must be a positive number, got {t}")));
        }
    }
    let a = analyse(input)?;
    let mut entries = a.entries();
    for e in &mut entries {
        if !matches!(e.kind.as_str(), "theorem" | "conjecture") {
            continue;
        }
        let Some(el) = a.ws.item(&e.name) else { continue };
        // a proof that does not check is still a statement worth testing
        let proof = if e.status == Status::Ok { el.proof.as_ref() } else { None };
        for m in model.models() {
            let mut cfg = ModelCheckConfig::new(m, trials, seed);
            if let Some(t) = tol {
                cfg.tol = ToleranceProfile::with_eq_tol(t);
            }
            let r = model_check(m, &el.statement, proof, &a.ws.registry, &cfg);
            let v = verdict(r.failures, e.classification, m);
            e.models.insert(m.name().to_owned(), ModelSummary::new(&r, v));
        }
    }
    let failed = entries.iter().flat_map(|e| e.models.values()).any(|s| s.verdict == Verdict::Fail);
    let code = if failed { EXIT_FAILED } else { EXIT_OK };
    if input.json {
        emit_json(out, &run_report(entries, Some(seed)))?;
        return Ok(code);
    }
    for e in entries.iter().filter(|e| !e.models.is_empty()) {
        let class = e.classification.map_or("-".to_owned(), |c| c.to_string());
        writeln!(out, "{} [{class}]", e.name).map_err(io)?;
        for (name, s) in &e.models {
            writeln!(
                out,
                "  {name:<9}  {} trials  {} skipped  {} failures  {}",
                s.trials_run,
                s.skipped,
                s.failures,
                s.verdict.name()
            )
            .map_err(io)?;
            if let Some(cx) = &s.counterexample {
                writeln!(out, "    counterexample at trial {} ({}): {}", cx.trial, cx.step, cx.fact)
                    .map_err(io)?;
                for (p, c) in &cx.points {
                    let coords: Vec<String> = c.iter().map(|x| format!("{x:.6}")).collect();
                    writeln!(out, "      {p} = ({})", coords.join(", ")).map_err(io)?;
                }
            }
        }
    }
    Ok(code)
}

fn cmd_parse(files: &[PathBuf], dump_ast: bool, out: &mut dyn Write) -> Res<i32> {
    let mut asts = Vec::new();
    for path in expand_inputs(files)? {
        let name = path.display().to_string();
        let bytes = fs::read(&path).map_err(|e| input_err(format!("{name}: {e}")))?;
        let script = parse_bytes(&bytes).map_err(|e| input_err(format!("{name}: {e}")))?;
        asts.push((name, script));
    }
    if dump_ast {
        let json: Vec<serde_json::Value> = asts
            .iter()
            .map(|(file, ast)| serde_json::json!({ "file": file, "ast": ast }))
            .collect();
        let text = serde_json::to_string_pretty(&json).map_err(|e| input_err(e.to_string()))?;
        writeln!(out, "{text}").map_err(io)?;
    } else {
        for (_, ast) in &asts {
            write!(out, "{ast}").map_err(io)?;
        }
    }
    Ok(EXIT_OK)
}
