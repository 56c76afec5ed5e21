//! `cnctrans`: derive a transformation language from an architecture grammar,
//! run transformation modules against models, and inspect matches.
//!
//! Exit codes: 0 success, 1 parse or compile error, 2 well-formedness error,
//! 3 transformation error (cap exceeded, evaluation failure, derivation
//! collision), 4 I/O error.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cnctrans_core::adl::{
    check_wellformed, cnc_grammar, normalize, AccessorTable, Diagnostic, Severity,
};
use cnctrans_core::ast::{AstNode, FieldValue};
use cnctrans_core::derive::derive_transformation_grammar;
use cnctrans_core::engine::parse_model;
use cnctrans_core::grammar::{GrammarSpec, RhsElement};
use cnctrans_core::matcher::{find_matches, Match, MatchConfig};
use cnctrans_core::mcg::{emit_grammar_file, parse_grammar};
use cnctrans_core::modexec::{run_module, RunOptions};
use cnctrans_core::pretty::pretty_print;
use cnctrans_core::rewrite::DEFAULT_MAX_APPLY;
use cnctrans_core::rule::{compile_module, MethodBody, Module};

#[derive(Parser)]
#[command(
    name = "cnctrans",
    version,
    about = "Grammar-derived model transformations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive the transformation-language grammar from a base grammar.
    DeriveGrammar {
        /// Base grammar file (defaults to the embedded CnC grammar).
        grammar: Option<PathBuf>,
        /// Output file (defaults to standard output).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Apply a transformation module to one or more models.
    Transform {
        /// Transformation module (.mtr).
        module: PathBuf,
        /// Model files, merged into one namespace.
        #[arg(required = true)]
        models: Vec<PathBuf>,
        /// Directory for transformed models (same filenames).
        #[arg(short, long, conflicts_with = "in_place")]
        out: Option<PathBuf>,
        /// Rewrite the input files instead.
        #[arg(long)]
        in_place: bool,
        /// Application cap (also CNCTRANS_MAX_APPLY; default 10000).
        #[arg(long)]
        max_apply: Option<usize>,
        /// Log one line per applied rule to standard error.
        #[arg(long)]
        trace: bool,
        /// Treat well-formedness warnings as errors.
        #[arg(long)]
        strict: bool,
        /// Override the base grammar.
        #[arg(long)]
        grammar: Option<PathBuf>,
    },
    /// List the matches of one transformation without applying it.
    Match {
        /// Transformation module (.mtr).
        module: PathBuf,
        /// Model files, merged into one namespace.
        #[arg(required = true)]
        models: Vec<PathBuf>,
        /// Transformation to match.
        #[arg(long)]
        rule: String,
        /// Override the base grammar.
        #[arg(long)]
        grammar: Option<PathBuf>,
    },
    /// Check model well-formedness.
    Check {
        /// Model files, merged into one namespace.
        #[arg(required = true)]
        models: Vec<PathBuf>,
        /// Treat warnings as errors.
        #[arg(long)]
        strict: bool,
        /// Override the base grammar.
        #[arg(long)]
        grammar: Option<PathBuf>,
    },
    /// Pretty-print normalized models.
    Fmt {
        /// Model files.
        #[arg(required = true)]
        models: Vec<PathBuf>,
        /// Rewrite the input files instead of printing.
        #[arg(long)]
        in_place: bool,
        /// Override the base grammar.
        #[arg(long)]
        grammar: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Io(String),
    Parse(String),
    Wellformed(Vec<String>),
    Transform(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 1,
            CliError::Wellformed(_) => 2,
            CliError::Transform(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(msg) | CliError::Parse(msg) | CliError::Transform(msg) => {
                write!(f, "{msg}")
            }
            CliError::Wellformed(lines) => write!(f, "{}", lines.join("\n")),
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::DeriveGrammar { grammar, out } => cmd_derive_grammar(grammar, out),
        Command::Transform {
            module,
            models,
            out,
            in_place,
            max_apply,
            trace,
            strict,
            grammar,
        } => cmd_transform(
            module, models, out, in_place, max_apply, trace, strict, grammar,
        ),
        Command::Match {
            module,
            models,
            rule,
            grammar,
        } => cmd_match(module, models, rule, grammar),
        Command::Check {
            models,
            strict,
            grammar,
        } => cmd_check(models, strict, grammar),
        Command::Fmt {
            models,
            in_place,
            grammar,
        } => cmd_fmt(models, in_place, grammar),
    }
}

fn cmd_derive_grammar(grammar: Option<PathBuf>, out: Option<PathBuf>) -> Result<u8, CliError> {
    let base = load_grammar(grammar.as_deref())?;
    let derived =
        derive_transformation_grammar(&base).map_err(|e| CliError::Transform(e.to_string()))?;
    let text = emit_grammar_file(&derived);
    match out {
        Some(path) => write_file(&path, &text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_transform(
    module_path: PathBuf,
    model_paths: Vec<PathBuf>,
    out: Option<PathBuf>,
    in_place: bool,
    max_apply: Option<usize>,
    trace: bool,
    strict: bool,
    grammar: Option<PathBuf>,
) -> Result<u8, CliError> {
    let base = load_grammar(grammar.as_deref())?;
    let module = load_module(&module_path, &base)?;
    let (mut model, keys) = load_models(&base, &model_paths)?;

    let diagnostics = check_wellformed(&model, strict);
    report_diagnostics(&diagnostics)?;

    let options = RunOptions {
        limit: resolve_limit(max_apply)?,
        trace,
    };
    let accessors = AccessorTable::for_grammar(&base);
    let config = MatchConfig::detect(&base);
    let report = run_module(&mut model, &module, &base, &accessors, &config, &options)
        .map_err(|e| CliError::Transform(e.to_string()))?;

    for line in &report.trace {
        eprintln!("{line}");
    }
    for line in &report.diagnostics {
        eprintln!("{line}");
    }

    if in_place || out.is_some() {
        let texts = split_by_file(&base, &model, &keys)?;
        if let Some(dir) = &out {
            fs::create_dir_all(dir)
                .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        }
        for (path, text) in model_paths.iter().zip(&texts) {
            let target = match &out {
                Some(dir) => dir.join(path.file_name().unwrap_or(path.as_os_str())),
                None => path.clone(),
            };
            write_file(&target, text)?;
        }
    }

    for s in &report.statements {
        println!("{}: {} application(s)", s.label, s.applications);
    }
    println!("total applications: {}", report.total_applications);
    println!("model changed: {}", report.changed);
    Ok(0)
}

fn cmd_match(
    module_path: PathBuf,
    model_paths: Vec<PathBuf>,
    rule_name: String,
    grammar: Option<PathBuf>,
) -> Result<u8, CliError> {
    let base = load_grammar(grammar.as_deref())?;
    let module = load_module(&module_path, &base)?;
    let Some(MethodBody::Transformation(rule)) = module.methods.get(&rule_name) else {
        return Err(CliError::Parse(format!(
            "module '{}' defines no transformation '{rule_name}'",
            module.name
        )));
    };
    let (model, _) = load_models(&base, &model_paths)?;
    let accessors = AccessorTable::for_grammar(&base);
    let config = MatchConfig::detect(&base);
    let matches = find_matches(&model, rule, &base, &accessors, &config)
        .map_err(|e| CliError::Transform(e.to_string()))?;
    for m in &matches {
        println!("{}", render_bindings(m));
    }
    println!("{} match(es)", matches.len());
    Ok(0)
}

fn cmd_check(
    model_paths: Vec<PathBuf>,
    strict: bool,
    grammar: Option<PathBuf>,
) -> Result<u8, CliError> {
    let base = load_grammar(grammar.as_deref())?;
    let (model, _) = load_models(&base, &model_paths)?;
    let diagnostics = check_wellformed(&model, strict);
    for d in &diagnostics {
        println!("{}", render_diagnostic(d));
    }
    Ok(if diagnostics.iter().any(Diagnostic::is_error) {
        2
    } else {
        0
    })
}

fn cmd_fmt(
    model_paths: Vec<PathBuf>,
    in_place: bool,
    grammar: Option<PathBuf>,
) -> Result<u8, CliError> {
    let base = load_grammar(grammar.as_deref())?;
    for path in &model_paths {
        let mut model = load_model(&base, path)?;
        normalize(&mut model);
        let text = pretty_print(&base, &model).map_err(|e| CliError::Transform(e.to_string()))?;
        if in_place {
            write_file(path, &text)?;
        } else {
            print!("{text}");
        }
    }
    Ok(0)
}

// --- shared plumbing -------------------------------------------------------

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_grammar(path: Option<&Path>) -> Result<GrammarSpec, CliError> {
    match path {
        None => Ok(cnc_grammar().clone()),
        Some(p) => {
            let text = read_file(p)?;
            parse_grammar(&text, &p.to_string_lossy()).map_err(|e| CliError::Parse(e.to_string()))
        }
    }
}

fn load_module(path: &Path, base: &GrammarSpec) -> Result<Module, CliError> {
    let derived =
        derive_transformation_grammar(base).map_err(|e| CliError::Transform(e.to_string()))?;
    let text = read_file(path)?;
    let ast = parse_model(&derived, "Module", &text, &path.to_string_lossy())
        .map_err(|e| CliError::Parse(e.to_string()))?;
    compile_module(&ast, base, &AccessorTable::for_grammar(base))
        .map_err(|e| CliError::Parse(e.to_string()))
}

fn load_model(base: &GrammarSpec, path: &Path) -> Result<AstNode, CliError> {
    let text = read_file(path)?;
    parse_model(base, &base.start_symbol, &text, &path.to_string_lossy())
        .map_err(|e| CliError::Parse(e.to_string()))
}

/// Parses all model files and merges them into one root node so rules can
/// match across file boundaries. Returns the merged model plus the span key
/// of each input file, used to split the result back apart.
fn load_models(base: &GrammarSpec, paths: &[PathBuf]) -> Result<(AstNode, Vec<String>), CliError> {
    let label = root_list_label(base).ok_or_else(|| {
        CliError::Parse(format!(
            "grammar start symbol '{}' has no list of elements to merge",
            base.start_symbol
        ))
    })?;
    let mut merged: Vec<AstNode> = Vec::new();
    let mut keys = Vec::new();
    for path in paths {
        let mut model = load_model(base, path)?;
        keys.push(path.to_string_lossy().into_owned());
        if let Some(FieldValue::Nodes(items)) = model.fields.swap_remove(label) {
            merged.extend(items);
        }
    }
    let mut root = AstNode::new(base.start_symbol.clone());
    root.fields
        .insert(label.to_string(), FieldValue::Nodes(merged));
    normalize(&mut root);
    Ok((root, keys))
}

fn root_list_label(base: &GrammarSpec) -> Option<&str> {
    base.production(&base.start_symbol)?
        .elements
        .iter()
        .find_map(|e| match e {
            RhsElement::List { label, .. } => Some(label.as_str()),
            _ => None,
        })
}

/// Splits the merged model back into per-file texts. Elements keep the span
/// of the file they came from; newly created elements carry no span and go
/// to the first file.
fn split_by_file(
    base: &GrammarSpec,
    model: &AstNode,
    keys: &[String],
) -> Result<Vec<String>, CliError> {
    let label = root_list_label(base).unwrap_or("components");
    let mut buckets: Vec<Vec<AstNode>> = vec![Vec::new(); keys.len()];
    for elem in model.children(label) {
        let index = elem
            .span
            .as_ref()
            .and_then(|s| keys.iter().position(|k| k.as_str() == s.file.as_ref()))
            .unwrap_or(0);
        buckets[index].push(elem.clone());
    }
    buckets
        .into_iter()
        .map(|elems| {
            let mut root = AstNode::new(base.start_symbol.clone());
            root.fields
                .insert(label.to_string(), FieldValue::Nodes(elems));
            pretty_print(base, &root).map_err(|e| CliError::Transform(e.to_string()))
        })
        .collect()
}

fn resolve_limit(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("CNCTRANS_MAX_APPLY") {
        Ok(value) => value
            .trim()
            .parse()
            .map_err(|_| CliError::Io(format!("invalid CNCTRANS_MAX_APPLY value '{value}'"))),
        Err(_) => Ok(DEFAULT_MAX_APPLY),
    }
}

/// Prints warnings to standard error; errors abort with exit code 2.
fn report_diagnostics(diagnostics: &[Diagnostic]) -> Result<(), CliError> {
    if diagnostics.iter().any(Diagnostic::is_error) {
        return Err(CliError::Wellformed(
            diagnostics.iter().map(render_diagnostic).collect(),
        ));
    }
    for d in diagnostics {
        eprintln!("{}", render_diagnostic(d));
    }
    Ok(())
}

fn render_diagnostic(d: &Diagnostic) -> String {
    let severity = match d.severity {
        Severity::Error => "error",
        Severity::Warning => "warning",
    };
    match &d.span {
        Some(span) => format!("{severity}: {} @ {}:{}", d.message, span.file, span.line),
        None => format!("{severity}: {}", d.message),
    }
}

fn render_bindings(m: &Match) -> String {
    let mut parts: Vec<String> = m
        .env
        .name_vars
        .iter()
        .map(|(var, value)| format!("${var}={value}"))
        .collect();
    parts.extend(
        m.where_values
            .iter()
            .map(|(var, value)| format!("${var}={}", value.render())),
    );
    format!("{{{}}}", parts.join(", "))
}
