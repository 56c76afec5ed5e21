//! Language services for the shipped component-and-connector ADL: the
//! embedded grammar, model normalization, well-formedness checking, read
//! views over the generic AST, and the accessor methods that where-block
//! expressions can call on bound elements.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use thiserror::Error;

use crate::ast::{AstNode, FieldValue, Span};
use crate::grammar::{Builtin, GrammarSpec, RhsElement, SymbolKind};
use crate::mcg::parse_grammar;

pub const CNC_GRAMMAR_TEXT: &str = include_str!("cnc.mcg");

/// The embedded base grammar.
pub fn cnc_grammar() -> &'static GrammarSpec {
    static GRAMMAR: OnceLock<GrammarSpec> = OnceLock::new();
    GRAMMAR.get_or_init(|| {
        parse_grammar(CNC_GRAMMAR_TEXT, "cnc.mcg").expect("embedded grammar is valid")
    })
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Brings a model into canonical form, in place:
///
/// * `component T a, b;` becomes one declaration per name;
/// * all port sections of a component are merged into the first one, with
///   declarations kept in document order.
///
/// Normalization is idempotent and recurses into nested definitions.
pub fn normalize(node: &mut AstNode) {
    if node.nonterminal == "ComponentDef" {
        if let Some(FieldValue::Nodes(members)) = node.fields.get_mut("members") {
            split_multi_decls(members);
            merge_port_sections(members);
        }
    }
    for value in node.fields.values_mut() {
        match value {
            FieldValue::Node(n) => normalize(n),
            FieldValue::Nodes(ns) => ns.iter_mut().for_each(normalize),
            _ => {}
        }
    }
}

fn split_multi_decls(members: &mut Vec<AstNode>) {
    let mut out = Vec::with_capacity(members.len());
    for member in members.drain(..) {
        if member.nonterminal == "SubcomponentDecl" && member.tokens("names").len() > 1 {
            for name in member.tokens("names").to_vec() {
                let mut single = member.clone();
                single
                    .fields
                    .insert("names".to_string(), FieldValue::Tokens(vec![name]));
                out.push(single);
            }
        } else {
            out.push(member);
        }
    }
    *members = out;
}

fn merge_port_sections(members: &mut Vec<AstNode>) {
    let mut first: Option<usize> = None;
    let mut extra = Vec::new();
    let mut out = Vec::with_capacity(members.len());
    for member in members.drain(..) {
        if member.nonterminal == "PortSection" {
            if first.is_none() {
                first = Some(out.len());
                out.push(member);
            } else {
                extra.extend(member.children("decls").to_vec());
            }
        } else {
            out.push(member);
        }
    }
    if let Some(i) = first {
        if !extra.is_empty() {
            if let Some(FieldValue::Nodes(decls)) = out[i].fields.get_mut("decls") {
                decls.extend(extra);
            }
        }
    }
    *members = out;
}

// ---------------------------------------------------------------------------
// Read views
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct PortView<'a> {
    pub dir: &'a str,
    pub ty: Option<&'a str>,
    pub name: &'a str,
    pub node: &'a AstNode,
}

#[derive(Debug)]
pub struct SubView<'a> {
    pub ty: &'a str,
    pub name: &'a str,
    pub node: &'a AstNode,
}

#[derive(Debug)]
pub struct ConnectorView<'a> {
    pub source: &'a str,
    pub target: &'a str,
    pub node: &'a AstNode,
}

/// Flat view over one component definition (direct members only).
#[derive(Debug)]
pub struct ComponentView<'a> {
    pub name: &'a str,
    pub trust_level: i64,
    pub ports: Vec<PortView<'a>>,
    /// Declared subcomponent references (`component T name;`).
    pub subs: Vec<SubView<'a>>,
    /// Nested component definitions, which also act as subcomponents.
    pub nested: Vec<&'a AstNode>,
    pub connectors: Vec<ConnectorView<'a>>,
    /// `access <port> (...)` members as (port name, node).
    pub port_accesses: Vec<(&'a str, &'a AstNode)>,
    pub node: &'a AstNode,
}

pub fn component_view(def: &AstNode) -> ComponentView<'_> {
    let mut view = ComponentView {
        name: def.token("name").unwrap_or(""),
        trust_level: 0,
        ports: Vec::new(),
        subs: Vec::new(),
        nested: Vec::new(),
        connectors: Vec::new(),
        port_accesses: Vec::new(),
        node: def,
    };
    let mut trust_seen = false;
    for member in def.children("members") {
        match member.nonterminal.as_str() {
            "PortSection" => {
                for decl in member.children("decls") {
                    view.ports.push(PortView {
                        dir: decl.token("dir").unwrap_or(""),
                        ty: decl.token("type"),
                        name: decl.token("name").unwrap_or(""),
                        node: decl,
                    });
                }
            }
            "SubcomponentDecl" => {
                let ty = member.token("type").unwrap_or("");
                for name in member.tokens("names") {
                    view.subs.push(SubView {
                        ty,
                        name,
                        node: member,
                    });
                }
            }
            "ComponentDef" => view.nested.push(member),
            "Connector" => view.connectors.push(ConnectorView {
                source: member.token("source").unwrap_or(""),
                target: member.token("target").unwrap_or(""),
                node: member,
            }),
            "TrustLevel" => {
                if !trust_seen {
                    trust_seen = true;
                    view.trust_level = member
                        .token("value")
                        .and_then(|v| v.parse().ok())
                        .unwrap_or(0);
                }
            }
            "PortAccess" => {
                view.port_accesses
                    .push((member.token("port").unwrap_or(""), member));
            }
            _ => {}
        }
    }
    view
}

/// Every component definition in the model, pre-order.
pub fn all_component_defs(root: &AstNode) -> Vec<&AstNode> {
    root.walk()
        .filter(|n| n.nonterminal == "ComponentDef")
        .collect()
}

// ---------------------------------------------------------------------------
// Well-formedness
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub span: Option<Span>,
}

impl Diagnostic {
    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

/// Checks structural well-formedness. With `strict`, unresolved subcomponent
/// types are errors instead of warnings. Diagnostics come out in traversal
/// order and are deterministic.
pub fn check_wellformed(model: &AstNode, strict: bool) -> Vec<Diagnostic> {
    let defs = all_component_defs(model);
    let mut def_index: BTreeMap<&str, &AstNode> = BTreeMap::new();
    for def in &defs {
        if let Some(name) = def.token("name") {
            def_index.entry(name).or_insert(def);
        }
    }

    let mut diags = Vec::new();
    let mut warned_types: BTreeSet<&str> = BTreeSet::new();
    let unresolved_severity = if strict {
        Severity::Error
    } else {
        Severity::Warning
    };

    for def in &defs {
        let view = component_view(def);

        let mut port_names = BTreeSet::new();
        for port in &view.ports {
            if !port_names.insert(port.name) {
                diags.push(Diagnostic {
                    severity: Severity::Error,
                    message: format!(
                        "component '{}': duplicate port name '{}'",
                        view.name, port.name
                    ),
                    span: port.node.span.clone(),
                });
            }
        }

        // subcomponent namespace: declared refs plus nested definitions
        let mut instances: BTreeMap<&str, Option<&AstNode>> = BTreeMap::new();
        let mut instance_names = BTreeSet::new();
        for sub in &view.subs {
            if !instance_names.insert(sub.name) {
                diags.push(Diagnostic {
                    severity: Severity::Error,
                    message: format!(
                        "component '{}': duplicate subcomponent name '{}'",
                        view.name, sub.name
                    ),
                    span: sub.node.span.clone(),
                });
            }
            let resolved = def_index.get(sub.ty).copied();
            if resolved.is_none() && warned_types.insert(sub.ty) {
                diags.push(Diagnostic {
                    severity: unresolved_severity,
                    message: format!("unresolved subcomponent type '{}'", sub.ty),
                    span: sub.node.span.clone(),
                });
            }
            instances.insert(sub.name, resolved);
        }
        for nested in &view.nested {
            if let Some(name) = nested.token("name") {
                if !instance_names.insert(name) {
                    diags.push(Diagnostic {
                        severity: Severity::Error,
                        message: format!(
                            "component '{}': duplicate subcomponent name '{}'",
                            view.name, name
                        ),
                        span: nested.span.clone(),
                    });
                }
                instances.insert(name, Some(nested));
            }
        }

        for connector in &view.connectors {
            check_endpoint(&view, &instances, connector, true, &mut diags);
            check_endpoint(&view, &instances, connector, false, &mut diags);
        }

        for (port, node) in &view.port_accesses {
            match view.ports.iter().find(|p| p.name == *port) {
                None => diags.push(Diagnostic {
                    severity: Severity::Error,
                    message: format!(
                        "component '{}': access declaration names unknown port '{}'",
                        view.name, port
                    ),
                    span: node.span.clone(),
                }),
                Some(p) if p.dir != "in" => diags.push(Diagnostic {
                    severity: Severity::Error,
                    message: format!(
                        "component '{}': access declaration names non-incoming port '{}'",
                        view.name, port
                    ),
                    span: node.span.clone(),
                }),
                Some(_) => {}
            }
        }
    }
    diags
}

fn check_endpoint(
    view: &ComponentView<'_>,
    instances: &BTreeMap<&str, Option<&AstNode>>,
    connector: &ConnectorView<'_>,
    is_source: bool,
    diags: &mut Vec<Diagnostic>,
) {
    let endpoint = if is_source {
        connector.source
    } else {
        connector.target
    };
    let role = if is_source { "source" } else { "target" };
    let mut error = |message: String| {
        diags.push(Diagnostic {
            severity: Severity::Error,
            message,
            span: connector.node.span.clone(),
        });
    };
    let segments: Vec<&str> = endpoint.split('.').collect();
    match segments.as_slice() {
        [port] => match view.ports.iter().find(|p| p.name == *port) {
            None => error(format!(
                "component '{}': connector {role} '{endpoint}' references unknown port",
                view.name
            )),
            Some(p) => {
                // data flows from the component's own in-ports and into its own out-ports
                let wanted = if is_source { "in" } else { "out" };
                if p.dir != wanted {
                    error(format!(
                        "component '{}': connector {role} '{endpoint}' must be an {wanted}-port",
                        view.name
                    ));
                }
            }
        },
        [sub, port] => match instances.get(sub) {
            None => error(format!(
                "component '{}': connector {role} '{endpoint}' references unknown subcomponent '{sub}'",
                view.name
            )),
            Some(None) => {} // unresolved type: port check impossible, already warned
            Some(Some(def)) => {
                let sub_view = component_view(def);
                match sub_view.ports.iter().find(|p| p.name == *port) {
                    None => error(format!(
                        "component '{}': connector {role} '{endpoint}': component '{}' has no port '{port}'",
                        view.name, sub_view.name
                    )),
                    Some(p) => {
                        // data leaves subcomponents via out-ports and enters via in-ports
                        let wanted = if is_source { "out" } else { "in" };
                        if p.dir != wanted {
                            error(format!(
                                "component '{}': connector {role} '{endpoint}' must be an {wanted}-port of '{}'",
                                view.name, sub_view.name
                            ));
                        }
                    }
                }
            }
        },
        _ => error(format!(
            "component '{}': connector {role} '{endpoint}' has too many segments",
            view.name
        )),
    }
}

// ---------------------------------------------------------------------------
// Values and accessors
// ---------------------------------------------------------------------------

/// Values flowing through where-block expressions.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Int(i64),
    Bool(bool),
    /// A list of names, e.g. the policies of an access declaration. When a
    /// name-list value is instantiated into a name-list slot it splices.
    NameList(Vec<String>),
}

impl Value {
    pub fn kind(&self) -> ValueKind {
        match self {
            Value::Str(_) => ValueKind::Str,
            Value::Int(_) => ValueKind::Int,
            Value::Bool(_) => ValueKind::Bool,
            Value::NameList(_) => ValueKind::NameList,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Value::Str(s) => s.clone(),
            Value::Int(i) => i.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::NameList(names) => format!("[{}]", names.join(",")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Str,
    Int,
    Bool,
    NameList,
}

impl ValueKind {
    pub fn name(self) -> &'static str {
        match self {
            ValueKind::Str => "string",
            ValueKind::Int => "integer",
            ValueKind::Bool => "boolean",
            ValueKind::NameList => "name list",
        }
    }
}

#[derive(Debug, Clone)]
enum AccessorKind {
    /// Reads a single token field.
    Token { label: String, kind: ValueKind },
    /// Reads a token-list field as a name list.
    NameList { label: String },
    /// Reads the component's declared trust level, defaulting to 0.
    TrustLevel { members: String, value: String },
}

#[derive(Debug, Clone)]
pub struct Accessor {
    kind: AccessorKind,
}

impl Accessor {
    pub fn result_kind(&self) -> ValueKind {
        match &self.kind {
            AccessorKind::Token { kind, .. } => *kind,
            AccessorKind::NameList { .. } => ValueKind::NameList,
            AccessorKind::TrustLevel { .. } => ValueKind::Int,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AccessError {
    #[error("element of type '{nonterminal}' has no method '{method}'")]
    UnknownMethod { nonterminal: String, method: String },
    #[error("element of type '{nonterminal}' has no value for '{method}'")]
    MissingValue { nonterminal: String, method: String },
}

/// Getter methods derived from the base grammar: every token-valued field
/// `label` of a production yields `get<Label>()`; token-list fields yield
/// name-list getters. When the grammar has the standard `ComponentDef` /
/// `TrustLevel` shape, components additionally expose `getTrustlevel()`.
#[derive(Debug, Clone)]
pub struct AccessorTable {
    methods: BTreeMap<String, BTreeMap<String, Accessor>>,
}

fn method_name(label: &str) -> String {
    let mut chars = label.chars();
    match chars.next() {
        Some(first) => format!("get{}{}", first.to_ascii_uppercase(), chars.as_str()),
        None => "get".to_string(),
    }
}

impl AccessorTable {
    pub fn for_grammar(g: &GrammarSpec) -> AccessorTable {
        let mut methods: BTreeMap<String, BTreeMap<String, Accessor>> = BTreeMap::new();
        for p in g.productions() {
            let entry = methods.entry(p.name.clone()).or_default();
            for elem in &p.elements {
                match elem {
                    RhsElement::Choice { label, .. } => {
                        entry.insert(
                            method_name(label),
                            Accessor {
                                kind: AccessorKind::Token {
                                    label: label.clone(),
                                    kind: ValueKind::Str,
                                },
                            },
                        );
                    }
                    RhsElement::Ref { label, target } | RhsElement::OptRef { label, target } => {
                        if let Some(SymbolKind::Builtin(b)) = g.symbol(target) {
                            let kind = if b == Builtin::Int {
                                ValueKind::Int
                            } else {
                                ValueKind::Str
                            };
                            entry.insert(
                                method_name(label),
                                Accessor {
                                    kind: AccessorKind::Token {
                                        label: label.clone(),
                                        kind,
                                    },
                                },
                            );
                        }
                    }
                    RhsElement::List { label, target, .. } if g.target_is_token(target) => {
                        entry.insert(
                            method_name(label),
                            Accessor {
                                kind: AccessorKind::NameList {
                                    label: label.clone(),
                                },
                            },
                        );
                    }
                    _ => {}
                }
            }
        }

        if let (Some(component), Some(trust)) =
            (g.production("ComponentDef"), g.production("TrustLevel"))
        {
            let members = component.elements.iter().find_map(|e| match e {
                RhsElement::List { label, target, .. } if !g.target_is_token(target) => {
                    Some(label.clone())
                }
                _ => None,
            });
            let value = trust.elements.iter().find_map(|e| match e {
                RhsElement::Ref { label, target } if target == "Int" => Some(label.clone()),
                _ => None,
            });
            if let (Some(members), Some(value)) = (members, value) {
                methods
                    .entry("ComponentDef".to_string())
                    .or_default()
                    .insert(
                        "getTrustlevel".to_string(),
                        Accessor {
                            kind: AccessorKind::TrustLevel { members, value },
                        },
                    );
            }
        }
        AccessorTable { methods }
    }

    pub fn lookup(&self, production: &str, method: &str) -> Option<&Accessor> {
        self.methods.get(production)?.get(method)
    }

    /// Accessors named `method` over all productions conforming to `ty`.
    pub fn lookup_for_type<'a>(
        &'a self,
        g: &GrammarSpec,
        ty: &str,
        method: &str,
    ) -> Vec<&'a Accessor> {
        g.implementors(ty)
            .iter()
            .filter_map(|p| self.lookup(p, method))
            .collect()
    }

    pub fn eval(&self, node: &AstNode, method: &str) -> Result<Value, AccessError> {
        let accessor =
            self.lookup(&node.nonterminal, method)
                .ok_or_else(|| AccessError::UnknownMethod {
                    nonterminal: node.nonterminal.clone(),
                    method: method.to_string(),
                })?;
        match &accessor.kind {
            AccessorKind::Token { label, kind } => {
                let text = node.token(label).ok_or_else(|| AccessError::MissingValue {
                    nonterminal: node.nonterminal.clone(),
                    method: method.to_string(),
                })?;
                Ok(match kind {
                    ValueKind::Int => Value::Int(text.parse().unwrap_or(0)),
                    _ => Value::Str(text.to_string()),
                })
            }
            AccessorKind::NameList { label } => Ok(Value::NameList(node.tokens(label).to_vec())),
            AccessorKind::TrustLevel { members, value } => {
                let level = node
                    .children(members)
                    .iter()
                    .find(|m| m.nonterminal == "TrustLevel")
                    .and_then(|t| t.token(value))
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(0);
                Ok(Value::Int(level))
            }
        }
    }
}
