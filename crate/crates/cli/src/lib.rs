//! Command-line front end: compile textual programs or documents, run
//! compiled pipelines, export, validate, serve the HTTP API and benchmark
//! the effect of dependencies.
//!
//! Exit codes: 0 success, 1 unreadable or unparsable input, 2 invalid
//! program or usage error, 3 compilation or run failure.

pub mod bench;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use zoea_core::compile::{
    compile_document, execute, program_to_document, CompileError, CompileEvent, Compiled, Library, Pipeline,
    RunError,
};
use zoea_core::diagnostic::{has_errors, Diagnostic};
use zoea_core::graph::{export_to_zoea, validate_document, Document, IdentityId};
use zoea_core::synth::{Imports, NoImports, SearchConfig};
use zoea_core::text::{parse, print, validate_against};
use zoea_core::value::{from_tagged_json, to_tagged_json, Value};
use zoea_service::{AppState, Store};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_FAILED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "zoea", version, about = "Compile programs from test cases")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Largest expression cost the search tries.
    #[arg(long, global = true)]
    pub max_cost: Option<u32>,
    /// Time limit per synthesized step, in milliseconds.
    #[arg(long, global = true)]
    pub timeout_ms: Option<u64>,
    /// Candidate limit per synthesized step.
    #[arg(long, global = true)]
    pub max_candidates: Option<u64>,
    /// Program store directory; compiled programs in it can be imported.
    #[arg(long, global = true, env = "ZOEA_STORE", value_name = "DIR")]
    pub store: Option<PathBuf>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
}

impl Global {
    pub fn config(&self) -> SearchConfig {
        let mut c = SearchConfig::default();
        c.max_cost = self.max_cost.unwrap_or(c.max_cost);
        c.timeout_ms = self.timeout_ms.unwrap_or(c.timeout_ms);
        c.max_candidates = self.max_candidates.unwrap_or(c.max_candidates);
        c
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compile a `.zoea` program or a `.json` document.
    Compile {
        file: PathBuf,
        /// Write the compiled pipeline to this file.
        #[arg(long, value_name = "FILE")]
        emit_pipeline: Option<PathBuf>,
    },
    /// Run a compiled pipeline and print its outputs as a JSON list.
    Run {
        pipeline: PathBuf,
        /// One input value as JSON, in input order.
        #[arg(long = "input", value_name = "JSON")]
        inputs: Vec<String>,
        /// Replace the value of a data identity: `ID=FILE` with a JSON value.
        #[arg(long = "data", value_name = "ID=FILE")]
        data: Vec<String>,
    },
    /// Print a `.json` document as a textual program.
    Export { file: PathBuf },
    /// Check a `.zoea` program or `.json` document without compiling it.
    Validate { file: PathBuf },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, env = "ZOEA_LISTEN", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
    },
    /// Compare compiles with and without dependencies.
    Bench {
        /// Directory of `.json` documents; the built-in suite when omitted.
        suite: Option<PathBuf>,
        /// Write the results as CSV to this file.
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
        /// Compiles per problem and mode; the median time is reported.
        #[arg(long, default_value_t = 3)]
        repeat: usize,
        /// Write the built-in suite documents to this directory and exit.
        #[arg(long, value_name = "DIR")]
        save_suite: Option<PathBuf>,
    },
}

/// Output streams for a command.
pub struct Io<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

/// Parses arguments and runs the command, returning the exit code.
pub fn main_with(args: impl IntoIterator<Item = String>, io: &mut Io) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(io.err, "{text}") } else { write!(io.out, "{text}") };
            return code;
        }
    };
    match run(cli, io) {
        Ok(code) => code,
        Err(Failure(code, message)) => {
            let _ = writeln!(io.err, "error: {message}");
            code
        }
    }
}

struct Failure(i32, String);

fn fail<T>(code: i32, message: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(code, message.into()))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).or_else(|e| fail(EXIT_PARSE, format!("cannot read {}: {e}", path.display())))
}

fn is_document(path: &Path, text: &str) -> bool {
    path.extension().and_then(|e| e.to_str()) == Some("json") || text.trim_start().starts_with('{')
}

fn print_diagnostics(err: &mut dyn Write, diags: &[Diagnostic]) {
    for d in diags {
        let _ = writeln!(err, "{d}");
    }
}

fn open_store(global: &Global) -> Result<Option<Store>, Failure> {
    match &global.store {
        None => Ok(None),
        Some(dir) => match Store::open(dir) {
            Ok((store, _)) => Ok(Some(store)),
            Err(e) => fail(EXIT_PARSE, format!("cannot open store {}: {e}", dir.display())),
        },
    }
}

fn imports_for(store: &Option<Store>, uses: &[String]) -> Arc<dyn Imports> {
    match store {
        Some(s) => Arc::new(s.library(uses)),
        None => Arc::new(NoImports),
    }
}

/// Loads a file as a document: a document file directly, or a textual
/// program converted to its document form.
fn load_document(path: &Path, store: &Option<Store>, err: &mut dyn Write) -> Result<Document, Failure> {
    let text = read(path)?;
    if is_document(path, &text) {
        return Document::from_json(&text).or_else(|e| fail(EXIT_PARSE, format!("{}: {e}", path.display())));
    }
    let program = match parse(&text) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_PARSE, format!("{}: {e}", path.display())),
    };
    let known: BTreeSet<String> = store.as_ref().map(|s| s.ids().into_iter().collect()).unwrap_or_default();
    let diags = validate_against(&program, &known);
    if has_errors(&diags) {
        print_diagnostics(err, &diags);
        return fail(EXIT_INVALID, format!("{} is not a valid program", path.display()));
    }
    match program_to_document(&program) {
        Ok(d) => Ok(d),
        Err(CompileError::Invalid(diags)) => {
            print_diagnostics(err, &diags);
            fail(EXIT_INVALID, format!("{} is not a valid program", path.display()))
        }
        Err(e) => fail(EXIT_INVALID, e.to_string()),
    }
}

fn describe(d: &Document, id: IdentityId) -> String {
    let kind = match d.identity_info(id) {
        Some((_, kind)) => format!("{kind:?}").to_lowercase(),
        None => "identity".into(),
    };
    match d.label_of(id) {
        Some(label) => format!("{kind} {id} ({label})"),
        None => format!("{kind} {id}"),
    }
}

fn render_event(d: &Document, e: &CompileEvent) -> String {
    match e {
        CompileEvent::Status {
            identity,
            state,
            ts,
            stats,
        } => {
            let state = format!("{state:?}").to_lowercase();
            let mut line = format!("{ts:>6} ms  {:<24} {state}", describe(d, *identity));
            if let Some(s) = stats {
                line.push_str(&format!(" ({} candidates)", s.candidates_expanded));
            }
            line
        }
        CompileEvent::Finished { result, failed } => {
            let result = format!("{result:?}").to_lowercase();
            if failed.is_empty() {
                format!("result: {result}")
            } else {
                let failed: Vec<String> = failed.iter().map(ToString::to_string).collect();
                format!("result: {result} (failed: {})", failed.join(", "))
            }
        }
    }
}

/// Compiles a document, rendering progress to `out`.
pub fn compile_with_progress(
    d: &Document,
    config: &SearchConfig,
    imports: Arc<dyn Imports>,
    json: bool,
    out: &mut dyn Write,
) -> Result<Compiled, CompileError> {
    compile_document(d, config, imports, &mut |e| {
        let line = if json {
            serde_json::to_string(e).expect("event serializes")
        } else {
            render_event(d, e)
        };
        let _ = writeln!(out, "{line}");
    })
}

fn run(cli: Cli, io: &mut Io) -> Result<i32, Failure> {
    let global = cli.global;
    match cli.command {
        Command::Compile { file, emit_pipeline } => {
            let store = open_store(&global)?;
            let d = load_document(&file, &store, io.err)?;
            let imports = imports_for(&store, &d.uses);
            match compile_with_progress(&d, &global.config(), imports, global.json, io.out) {
                Ok(compiled) => {
                    if let Some(path) = emit_pipeline {
                        let text = serde_json::to_string_pretty(&compiled.pipeline).expect("pipeline serializes");
                        std::fs::write(&path, text)
                            .or_else(|e| fail(EXIT_FAILED, format!("cannot write {}: {e}", path.display())))?;
                    }
                    Ok(EXIT_OK)
                }
                Err(CompileError::Invalid(diags)) => {
                    print_diagnostics(io.err, &diags);
                    fail(EXIT_INVALID, "the document is not ready to compile")
                }
                Err(e @ CompileError::UnresolvedUse(_)) => fail(EXIT_INVALID, e.to_string()),
                Err(CompileError::Failed(f)) => {
                    for (id, reason) in &f.reasons {
                        let _ = writeln!(io.err, "{}: {reason}", describe(&d, *id));
                    }
                    fail(EXIT_FAILED, "compilation failed")
                }
            }
        }
        Command::Run { pipeline, inputs, data } => run_pipeline_file(&global, &pipeline, &inputs, &data, io),
        Command::Export { file } => {
            let store = open_store(&global)?;
            let d = load_document(&file, &store, io.err)?;
            let diags = validate_document(&d);
            if has_errors(&diags) {
                print_diagnostics(io.err, &diags);
                return fail(EXIT_INVALID, "the document has errors");
            }
            let program = export_to_zoea(&d).or_else(|e| fail(EXIT_INVALID, e.to_string()))?;
            let _ = write!(io.out, "{}", print(&program));
            Ok(EXIT_OK)
        }
        Command::Validate { file } => {
            let store = open_store(&global)?;
            let d = load_document(&file, &store, io.err)?;
            let diags = validate_document(&d);
            if global.json {
                let _ = writeln!(io.out, "{}", serde_json::to_string(&diags).expect("diagnostics serialize"));
            } else {
                print_diagnostics(io.out, &diags);
            }
            if has_errors(&diags) {
                return Ok(EXIT_INVALID);
            }
            if !global.json {
                let _ = writeln!(io.out, "{}: ok", d.name);
            }
            Ok(EXIT_OK)
        }
        Command::Serve { listen } => {
            let dir = global.store.clone().unwrap_or_else(|| PathBuf::from("zoea-store"));
            let store = match Store::open(&dir) {
                Ok((store, recovery)) => {
                    if recovery != Default::default() {
                        let _ = writeln!(io.err, "store recovery: {recovery:?}");
                    }
                    store
                }
                Err(e) => return fail(EXIT_PARSE, format!("cannot open store {}: {e}", dir.display())),
            };
            let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
            let state = AppState {
                store: Arc::new(store),
                config: global.config(),
            };
            let runtime = tokio::runtime::Runtime::new().or_else(|e| fail(EXIT_FAILED, e.to_string()))?;
            runtime
                .block_on(zoea_service::serve(listen, state))
                .or_else(|e| fail(EXIT_FAILED, format!("server error: {e}")))?;
            Ok(EXIT_OK)
        }
        Command::Bench {
            suite,
            csv,
            repeat,
            save_suite,
        } => {
            if let Some(dir) = save_suite {
                std::fs::create_dir_all(&dir).or_else(|e| fail(EXIT_FAILED, e.to_string()))?;
                for (i, d) in bench::builtin_suite().iter().enumerate() {
                    let path = dir.join(format!("{:02}_{}.json", i + 1, d.name));
                    std::fs::write(&path, d.to_json()).or_else(|e| fail(EXIT_FAILED, e.to_string()))?;
                }
                return Ok(EXIT_OK);
            }
            let problems = match &suite {
                Some(dir) => bench::load_suite(dir).or_else(|e| fail(EXIT_PARSE, format!("{e:#}")))?,
                None => bench::builtin_suite(),
            };
            let store = open_store(&global)?;
            let all: Vec<String> = store.as_ref().map(|s| s.ids()).unwrap_or_default();
            let imports = imports_for(&store, &all);
            let report = bench::run_bench(&problems, &global.config(), imports, repeat, |row| {
                let _ = writeln!(io.err, "measured {}", row.problem);
            });
            let csv_text = report.to_csv();
            if let Some(path) = csv {
                std::fs::write(&path, &csv_text)
                    .or_else(|e| fail(EXIT_FAILED, format!("cannot write {}: {e}", path.display())))?;
            }
            if global.json {
                let _ = write!(io.out, "{csv_text}");
            } else {
                let _ = write!(io.out, "{}", report.to_table());
            }
            let violations = report.violations();
            if !violations.is_empty() {
                return fail(
                    EXIT_FAILED,
                    format!("dependencies increased the search for: {}", violations.join(", ")),
                );
            }
            Ok(EXIT_OK)
        }
    }
}

fn parse_value(text: &str, what: &str) -> Result<Value, Failure> {
    from_tagged_json(text, None).or_else(|e| fail(EXIT_INVALID, format!("{what} is not valid JSON: {e}")))
}

fn run_pipeline_file(
    global: &Global,
    path: &Path,
    inputs: &[String],
    data: &[String],
    io: &mut Io,
) -> Result<i32, Failure> {
    let text = read(path)?;
    let pipeline: Pipeline =
        serde_json::from_str(&text).or_else(|e| fail(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    let inputs = inputs
        .iter()
        .enumerate()
        .map(|(i, t)| parse_value(t, &format!("input {}", i + 1)))
        .collect::<Result<Vec<_>, _>>()?;
    if inputs.len() != pipeline.inputs.len() {
        return fail(
            EXIT_INVALID,
            format!("{} takes {} inputs, got {}", pipeline.name, pipeline.inputs.len(), inputs.len()),
        );
    }
    let mut bindings: BTreeMap<IdentityId, Value> = BTreeMap::new();
    for spec in data {
        let Some((id, file)) = spec.split_once('=') else {
            return fail(EXIT_INVALID, format!("--data expects ID=FILE, got `{spec}`"));
        };
        let id = id.trim_start_matches('i');
        let id = id
            .parse::<u64>()
            .map(IdentityId)
            .or_else(|_| fail(EXIT_INVALID, format!("`{id}` is not an identity id")))?;
        if !pipeline.data.contains_key(&id) {
            let known: Vec<String> = pipeline.data.keys().map(ToString::to_string).collect();
            return fail(EXIT_INVALID, format!("{id} is not a data identity of the pipeline (known: {})", known.join(", ")));
        }
        let value = parse_value(&read(Path::new(file))?, &format!("--data {file}"))?;
        bindings.insert(id, value);
    }
    let store = open_store(global)?;
    let library: Arc<dyn Imports> = match &store {
        Some(s) => Arc::new(s.library(&pipeline.imports)),
        None => Arc::new(Library::new()),
    };
    match execute(&pipeline, &inputs, &bindings, library.as_ref()) {
        Ok(outputs) => {
            let _ = writeln!(io.out, "{}", to_tagged_json(&Value::List(outputs), None));
            Ok(EXIT_OK)
        }
        Err(e @ RunError::Arity { .. }) => fail(EXIT_INVALID, e.to_string()),
        Err(e) => fail(EXIT_FAILED, e.to_string()),
    }
}
