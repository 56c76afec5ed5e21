//! Rewriting: instantiates replacement templates and applies a rule's edit
//! script to a model.
//!
//! Edits run in the order they appear in the rule. Creations append to the
//! end of their slot and are suppressed when a structurally equal sibling
//! already exists — this, together with negative conditions, is what lets
//! `loop` reach a fixpoint. A shared application counter guards against
//! rules that keep producing new material forever.

use std::collections::VecDeque;

use indexmap::IndexMap;

use thiserror::Error;

use crate::adl::{AccessorTable, Value};
use crate::ast::{AstNode, FieldValue, NodePath, Span};
use crate::grammar::{GrammarSpec, RhsElement};
use crate::matcher::{find_matches, BindingEnv, EvalError, Match, MatchConfig};
use crate::rule::{Edit, NameRef, PatternElem, PatternField, Rule};

/// Default limit on changing applications per module run.
pub const DEFAULT_MAX_APPLY: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum ApplyError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("application limit of {limit} reached; the transformation does not terminate")]
    LimitExceeded { limit: usize },
    #[error("cannot delete mandatory '{field}' of {nonterminal}")]
    DeleteMandatory { nonterminal: String, field: String },
    #[error("cannot delete the model root")]
    DeleteRoot,
    #[error("slot '{field}' of {nonterminal} is already occupied")]
    SlotOccupied { nonterminal: String, field: String },
    #[error("{nonterminal} has no '{field}' slot to create into")]
    NoSuchSlot { nonterminal: String, field: String },
    #[error("${var} has no name value")]
    NameUnresolved { var: String },
    #[error("${var} is a name list and cannot fill a single name position")]
    ListInName { var: String },
    #[error("${var} holds a {kind} and cannot fill a name position")]
    NotAName { var: String, kind: &'static str },
    #[error("${var} is not bound to an element")]
    UnboundElement { var: String },
    #[error("template element cannot be instantiated")]
    UnsupportedTemplate,
    #[error("an earlier edit removed the target of a later one")]
    EditConflict,
}

/// Shared state for applying rules: the grammar services and the global
/// application budget of one module run.
pub struct ApplyContext<'a> {
    pub base: &'a GrammarSpec,
    pub accessors: &'a AccessorTable,
    pub config: &'a MatchConfig,
    pub limit: usize,
    pub applied: usize,
}

impl<'a> ApplyContext<'a> {
    pub fn new(
        base: &'a GrammarSpec,
        accessors: &'a AccessorTable,
        config: &'a MatchConfig,
        limit: usize,
    ) -> ApplyContext<'a> {
        ApplyContext {
            base,
            accessors,
            config,
            limit,
            applied: 0,
        }
    }

    fn charge(&mut self) -> Result<(), ApplyError> {
        if self.applied >= self.limit {
            return Err(ApplyError::LimitExceeded { limit: self.limit });
        }
        self.applied += 1;
        Ok(())
    }
}

/// One committed application, for reports and traces.
#[derive(Debug, Clone)]
pub struct AppliedInfo {
    /// Span of the node matched by the rule's first positive element,
    /// taken before the application.
    pub location: Option<Span>,
    /// Variable bindings: matched names first, then where-block values.
    pub bindings: Vec<(String, String)>,
}

impl PartialEq for AppliedInfo {
    fn eq(&self, other: &Self) -> bool {
        self.bindings == other.bindings
    }
}

#[derive(Debug)]
pub struct CallOutcome {
    pub applied: Option<AppliedInfo>,
    /// How many matches existed, changing or not.
    pub match_count: usize,
}

#[derive(Debug)]
pub struct LoopOutcome {
    pub applications: Vec<AppliedInfo>,
    /// No-op matches remaining when the fixpoint was reached.
    pub suppressed: usize,
}

/// Applies the first match that changes the model, if any.
pub fn apply_rule_once(
    model: &mut AstNode,
    rule: &Rule,
    ctx: &mut ApplyContext,
) -> Result<CallOutcome, ApplyError> {
    let matches = find_matches(model, rule, ctx.base, ctx.accessors, ctx.config)?;
    let match_count = matches.len();
    for m in &matches {
        let mut candidate = model.clone();
        if apply_match(&mut candidate, rule, m, ctx.base)? {
            ctx.charge()?;
            let info = applied_info(model, rule, m);
            *model = candidate;
            return Ok(CallOutcome {
                applied: Some(info),
                match_count,
            });
        }
    }
    Ok(CallOutcome {
        applied: None,
        match_count,
    })
}

/// Reapplies the rule until no match changes the model.
pub fn apply_rule_loop(
    model: &mut AstNode,
    rule: &Rule,
    ctx: &mut ApplyContext,
) -> Result<LoopOutcome, ApplyError> {
    let mut applications = Vec::new();
    loop {
        let outcome = apply_rule_once(model, rule, ctx)?;
        match outcome.applied {
            Some(info) => applications.push(info),
            None => {
                return Ok(LoopOutcome {
                    applications,
                    suppressed: outcome.match_count,
                })
            }
        }
    }
}

fn applied_info(model: &AstNode, rule: &Rule, m: &Match) -> AppliedInfo {
    let location = rule
        .decompose()
        .lhs
        .first()
        .and_then(PatternElem::id)
        .and_then(|id| m.env.by_pat.get(&id))
        .and_then(|path| model.at_path(path))
        .and_then(|node| node.span.clone());
    let mut bindings = Vec::new();
    for (var, name) in &m.env.name_vars {
        bindings.push((var.clone(), name.clone()));
    }
    for (var, value) in &m.where_values {
        bindings.push((var.clone(), value.render()));
    }
    AppliedInfo { location, bindings }
}

/// An edit with its targets resolved to concrete paths and nodes.
enum ResolvedEdit {
    Replace {
        path: NodePath,
        node: AstNode,
    },
    Create {
        owner: NodePath,
        field: Option<String>,
        node: AstNode,
    },
    Delete {
        path: NodePath,
    },
}

/// Applies every edit of `rule` under one match. Returns whether the model
/// changed structurally.
pub fn apply_match(
    model: &mut AstNode,
    rule: &Rule,
    m: &Match,
    base: &GrammarSpec,
) -> Result<bool, ApplyError> {
    let decomposed = rule.decompose();

    // resolve all edits against the unmodified model first: templates copy
    // bound elements as they were when the rule matched
    let mut queue = VecDeque::new();
    for edit in &decomposed.edits {
        let target_path = |target: &PatternElem| -> Result<NodePath, ApplyError> {
            target
                .id()
                .and_then(|id| m.env.by_pat.get(&id))
                .cloned()
                .ok_or(ApplyError::EditConflict)
        };
        match edit {
            Edit::Replace {
                target, template, ..
            } => queue.push_back(ResolvedEdit::Replace {
                path: target_path(target)?,
                node: instantiate(template, &m.env, &m.where_values, model)?,
            }),
            Edit::Delete { target, .. } => queue.push_back(ResolvedEdit::Delete {
                path: target_path(target)?,
            }),
            Edit::Create { site, template } => {
                let owner = match site.owner {
                    Some(id) => m
                        .env
                        .by_pat
                        .get(&id)
                        .cloned()
                        .ok_or(ApplyError::EditConflict)?,
                    None => NodePath::root(),
                };
                queue.push_back(ResolvedEdit::Create {
                    owner,
                    field: site.field.clone(),
                    node: instantiate(template, &m.env, &m.where_values, model)?,
                });
            }
        }
    }

    let mut changed = false;
    while let Some(item) = queue.pop_front() {
        match item {
            ResolvedEdit::Replace { path, node } => {
                let target = model.at_path_mut(&path).ok_or(ApplyError::EditConflict)?;
                if *target != node {
                    *target = node;
                    changed = true;
                }
            }
            ResolvedEdit::Create { owner, field, node } => {
                changed |= create_node(model, &owner, field.as_deref(), node, base)?;
            }
            ResolvedEdit::Delete { path } => {
                remove_node(model, &path, base)?;
                changed = true;
                for later in queue.iter_mut() {
                    match later {
                        ResolvedEdit::Replace { path: p, .. }
                        | ResolvedEdit::Delete { path: p }
                        | ResolvedEdit::Create { owner: p, .. } => adjust_for_removal(p, &path)?,
                    }
                }
            }
        }
    }
    Ok(changed)
}

/// Appends into a list slot (suppressing structural duplicates) or fills a
/// single slot.
fn create_node(
    model: &mut AstNode,
    owner: &NodePath,
    field: Option<&str>,
    node: AstNode,
    base: &GrammarSpec,
) -> Result<bool, ApplyError> {
    let owner_node = model.at_path_mut(owner).ok_or(ApplyError::EditConflict)?;
    let no_such_slot = |owner_node: &AstNode, field: &str| ApplyError::NoSuchSlot {
        nonterminal: owner_node.nonterminal.clone(),
        field: field.to_string(),
    };
    let field = match field {
        Some(f) => f.to_string(),
        // a top-level creation goes into the root's element list
        None => root_list_field(base, &owner_node.nonterminal)
            .ok_or_else(|| no_such_slot(owner_node, "<elements>"))?,
    };
    let element = base
        .production(&owner_node.nonterminal)
        .and_then(|p| {
            p.elements
                .iter()
                .find(|e| e.label() == Some(field.as_str()))
        })
        .ok_or_else(|| no_such_slot(owner_node, &field))?;
    match element {
        RhsElement::List { .. } => {
            let entry = owner_node
                .fields
                .entry(field.clone())
                .or_insert_with(|| FieldValue::Nodes(Vec::new()));
            let FieldValue::Nodes(children) = entry else {
                return Err(ApplyError::NoSuchSlot {
                    nonterminal: owner_node.nonterminal.clone(),
                    field,
                });
            };
            if children.contains(&node) {
                return Ok(false); // duplicate suppressed
            }
            children.push(node);
            Ok(true)
        }
        RhsElement::Ref { .. } | RhsElement::OptRef { .. } => match owner_node.fields.get(&field) {
            Some(FieldValue::Node(existing)) if **existing == node => Ok(false),
            Some(_) => Err(ApplyError::SlotOccupied {
                nonterminal: owner_node.nonterminal.clone(),
                field,
            }),
            None => {
                owner_node
                    .fields
                    .insert(field, FieldValue::Node(Box::new(node)));
                Ok(true)
            }
        },
        _ => Err(no_such_slot(owner_node, &field)),
    }
}

fn root_list_field(base: &GrammarSpec, nonterminal: &str) -> Option<String> {
    base.production(nonterminal)?
        .elements
        .iter()
        .find_map(|e| match e {
            RhsElement::List { label, target, .. } if !base.target_is_token(target) => {
                Some(label.clone())
            }
            _ => None,
        })
}

fn remove_node(model: &mut AstNode, path: &NodePath, base: &GrammarSpec) -> Result<(), ApplyError> {
    let Some((parent_path, step)) = path.parent() else {
        return Err(ApplyError::DeleteRoot);
    };
    let parent = model
        .at_path_mut(&parent_path)
        .ok_or(ApplyError::EditConflict)?;
    match step.index {
        Some(i) => {
            let Some(FieldValue::Nodes(children)) = parent.fields.get_mut(&step.field) else {
                return Err(ApplyError::EditConflict);
            };
            if i >= children.len() {
                return Err(ApplyError::EditConflict);
            }
            children.remove(i);
            Ok(())
        }
        None => {
            let optional = base.production(&parent.nonterminal).is_some_and(|p| {
                p.elements
                    .iter()
                    .any(|e| matches!(e, RhsElement::OptRef { label, .. } if *label == step.field))
            });
            if optional {
                parent.fields.shift_remove(&step.field);
                Ok(())
            } else {
                Err(ApplyError::DeleteMandatory {
                    nonterminal: parent.nonterminal.clone(),
                    field: step.field.clone(),
                })
            }
        }
    }
}

/// Shifts `path` to account for the removal of the node at `removed`.
fn adjust_for_removal(path: &mut NodePath, removed: &NodePath) -> Result<(), ApplyError> {
    let n = removed.0.len();
    if n == 0 || path.0.len() < n || path.0[..n - 1] != removed.0[..n - 1] {
        return Ok(());
    }
    let removed_step = &removed.0[n - 1];
    let step = &mut path.0[n - 1];
    if step.field != removed_step.field {
        return Ok(());
    }
    match (step.index, removed_step.index) {
        (Some(i), Some(r)) if i > r => {
            step.index = Some(i - 1);
            Ok(())
        }
        // the path pointed at or into the removed node
        (Some(i), Some(r)) if i == r => Err(ApplyError::EditConflict),
        (None, None) => Err(ApplyError::EditConflict),
        _ => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// Template instantiation
// ---------------------------------------------------------------------------

fn instantiate(
    template: &PatternElem,
    env: &BindingEnv,
    where_values: &IndexMap<String, Value>,
    model: &AstNode,
) -> Result<AstNode, ApplyError> {
    match template {
        PatternElem::Concrete(cp) => {
            let mut node = AstNode::new(cp.nonterminal.clone());
            for (label, field) in &cp.fields {
                let value = match field {
                    PatternField::Token(t) => FieldValue::Token(t.clone()),
                    PatternField::Name(r) => FieldValue::Token(resolve_name(r, env, where_values)?),
                    PatternField::QName(refs) => {
                        let segments = refs
                            .iter()
                            .map(|r| resolve_name(r, env, where_values))
                            .collect::<Result<Vec<_>, _>>()?;
                        FieldValue::Token(segments.join("."))
                    }
                    PatternField::Names(refs) => {
                        let mut names = Vec::new();
                        for r in refs {
                            resolve_names_into(r, env, where_values, &mut names)?;
                        }
                        FieldValue::Tokens(names)
                    }
                    PatternField::Elem(inner) => {
                        FieldValue::Node(Box::new(instantiate(inner, env, where_values, model)?))
                    }
                    PatternField::List(items) => FieldValue::Nodes(
                        items
                            .iter()
                            .map(|i| instantiate(i, env, where_values, model))
                            .collect::<Result<_, _>>()?,
                    ),
                };
                node.fields.insert(label.clone(), value);
            }
            Ok(node)
        }
        PatternElem::VarBlack { var, .. } => {
            let path = env
                .elem_vars
                .get(var)
                .ok_or_else(|| ApplyError::UnboundElement { var: var.clone() })?;
            let mut copy = model.at_path(path).ok_or(ApplyError::EditConflict)?.clone();
            copy.strip_spans();
            Ok(copy)
        }
        // white-boxes, negatives and nested replacements are rejected by the
        // compiler; hand-built rules may still carry them
        _ => Err(ApplyError::UnsupportedTemplate),
    }
}

fn lookup_name_value(
    var: &str,
    env: &BindingEnv,
    where_values: &IndexMap<String, Value>,
) -> Result<Value, ApplyError> {
    if let Some(name) = env.name_vars.get(var) {
        return Ok(Value::Str(name.clone()));
    }
    if let Some(value) = where_values.get(var) {
        return Ok(value.clone());
    }
    Err(ApplyError::NameUnresolved {
        var: var.to_string(),
    })
}

fn resolve_name(
    r: &NameRef,
    env: &BindingEnv,
    where_values: &IndexMap<String, Value>,
) -> Result<String, ApplyError> {
    match r {
        NameRef::Literal(s) => Ok(s.clone()),
        NameRef::Anon => Err(ApplyError::NameUnresolved { var: "_".into() }),
        NameRef::Var(var) => match lookup_name_value(var, env, where_values)? {
            Value::Str(s) => Ok(s),
            Value::Int(i) => Ok(i.to_string()),
            Value::NameList(_) => Err(ApplyError::ListInName { var: var.clone() }),
            other => Err(ApplyError::NotAName {
                var: var.clone(),
                kind: other.kind().name(),
            }),
        },
    }
}

/// Resolves one reference of a name list; name-list values splice.
fn resolve_names_into(
    r: &NameRef,
    env: &BindingEnv,
    where_values: &IndexMap<String, Value>,
    out: &mut Vec<String>,
) -> Result<(), ApplyError> {
    match r {
        NameRef::Literal(s) => {
            out.push(s.clone());
            Ok(())
        }
        NameRef::Anon => Err(ApplyError::NameUnresolved { var: "_".into() }),
        NameRef::Var(var) => {
            match lookup_name_value(var, env, where_values)? {
                Value::Str(s) => out.push(s),
                Value::Int(i) => out.push(i.to_string()),
                Value::NameList(names) => out.extend(names),
                other => {
                    return Err(ApplyError::NotAName {
                        var: var.clone(),
                        kind: other.kind().name(),
                    })
                }
            }
            Ok(())
        }
    }
}
