//! Pattern matching: enumerates every binding of a rule's left-hand side
//! into a model, filters by negative conditions, and evaluates where-blocks.
//!
//! Matching uses subset semantics — fields and list items absent from a
//! pattern are unconstrained — and is injective: distinct pattern elements
//! bind distinct model nodes. Results are deterministic, ordered by the
//! pre-order position of the nodes bound to the rule's top-level elements.

use std::collections::BTreeSet;

use indexmap::IndexMap;

use thiserror::Error;

use crate::adl::{AccessError, AccessorTable, Value};
use crate::ast::{AstNode, FieldValue, NodePath};
use crate::grammar::{Builtin, GrammarSpec, Production, RhsElement, SymbolKind};
use crate::rule::{
    CmpOp, ConcretePat, Edit, Expr, Nac, NameRef, PatId, PatternElem, PatternField, Rule,
};

/// Relates definition patterns to instance declarations: a pattern for `def`
/// with no member constraints also matches a `decl` node, reading instance
/// names instead of the definition name.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceEquiv {
    pub def: String,
    pub name_field: String,
    pub members_field: String,
    pub decl: String,
    pub type_field: String,
    pub names_field: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchConfig {
    pub instance_equiv: Option<InstanceEquiv>,
}

impl MatchConfig {
    /// Plain structural matching with no instance equivalence.
    pub fn none() -> MatchConfig {
        MatchConfig::default()
    }

    /// Detects an instance-declaration form in the grammar: two productions
    /// sharing a leading keyword, one carrying a name plus a member list,
    /// the other a type name plus a list of instance names.
    pub fn detect(g: &GrammarSpec) -> MatchConfig {
        let mut defs = Vec::new();
        let mut decls = Vec::new();
        for p in g.productions() {
            let Some(keyword) = leading_keyword(p) else {
                continue;
            };
            if let Some((name_field, members_field)) = def_shape(g, p) {
                defs.push((p, keyword, name_field, members_field));
            }
            if let Some((type_field, names_field)) = decl_shape(g, p) {
                decls.push((p, keyword, type_field, names_field));
            }
        }
        for (def, kw, name_field, members_field) in &defs {
            for (decl, kw2, type_field, names_field) in &decls {
                if kw == kw2 && def.name != decl.name {
                    return MatchConfig {
                        instance_equiv: Some(InstanceEquiv {
                            def: def.name.clone(),
                            name_field: name_field.clone(),
                            members_field: members_field.clone(),
                            decl: decl.name.clone(),
                            type_field: type_field.clone(),
                            names_field: names_field.clone(),
                        }),
                    };
                }
            }
        }
        MatchConfig::default()
    }
}

fn leading_keyword(p: &Production) -> Option<&str> {
    match p.elements.first() {
        Some(RhsElement::Terminal { text }) => Some(text),
        _ => None,
    }
}

fn is_name_builtin(g: &GrammarSpec, target: &str) -> bool {
    matches!(
        g.symbol(target),
        Some(SymbolKind::Builtin(Builtin::Name)) | Some(SymbolKind::Builtin(Builtin::FreeName))
    )
}

/// `"kw" name:Name ... members:Nonterminal* ...` with no other labeled parts.
fn def_shape(g: &GrammarSpec, p: &Production) -> Option<(String, String)> {
    let mut labeled = p.elements.iter().filter(|e| e.label().is_some());
    let (name, members) = (labeled.next()?, labeled.next()?);
    if labeled.next().is_some() {
        return None;
    }
    match (name, members) {
        (
            RhsElement::Ref {
                label: name_l,
                target: name_t,
            },
            RhsElement::List {
                label: members_l,
                target: members_t,
                ..
            },
        ) if is_name_builtin(g, name_t) && !g.target_is_token(members_t) => {
            Some((name_l.clone(), members_l.clone()))
        }
        _ => None,
    }
}

/// `"kw" type:Name names:Name+ ...` with no other labeled parts.
fn decl_shape(g: &GrammarSpec, p: &Production) -> Option<(String, String)> {
    let mut labeled = p.elements.iter().filter(|e| e.label().is_some());
    let (ty, names) = (labeled.next()?, labeled.next()?);
    if labeled.next().is_some() {
        return None;
    }
    match (ty, names) {
        (
            RhsElement::Ref {
                label: type_l,
                target: type_t,
            },
            RhsElement::List {
                label: names_l,
                target: names_t,
                ..
            },
        ) if is_name_builtin(g, type_t) && is_name_builtin(g, names_t) => {
            Some((type_l.clone(), names_l.clone()))
        }
        _ => None,
    }
}

/// All variable bindings of one way to match a rule.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BindingEnv {
    /// Where each matched pattern element sits in the model.
    pub by_pat: IndexMap<PatId, NodePath>,
    pub elem_vars: IndexMap<String, NodePath>,
    pub name_vars: IndexMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Match {
    pub env: BindingEnv,
    /// Values computed by the where-block, in assignment order.
    pub where_values: IndexMap<String, Value>,
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error(transparent)]
    Access(#[from] AccessError),
    #[error("${var} names an element and has no direct value")]
    ElementAsValue { var: String },
    #[error("variable ${var} is not bound")]
    UnboundVariable { var: String },
    #[error("{method}() is not defined for {kind} values")]
    ValueMethod { method: String, kind: &'static str },
    #[error("{method}() expects a string argument, found {found}")]
    BadArgument { method: String, found: &'static str },
    #[error("'{op}' cannot compare {left} with {right}")]
    Incomparable {
        op: &'static str,
        left: &'static str,
        right: &'static str,
    },
    #[error("expected a {expected} here, found {found}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },
}

/// Finds all matches of `rule` in `model`, in deterministic order.
pub fn find_matches(
    model: &AstNode,
    rule: &Rule,
    base: &GrammarSpec,
    accessors: &AccessorTable,
    config: &MatchConfig,
) -> Result<Vec<Match>, EvalError> {
    let decomposed = rule.decompose();
    // patterns that own a creation must match real definitions: there is no
    // slot to create into on an instance declaration
    let create_owners: BTreeSet<PatId> = decomposed
        .edits
        .iter()
        .filter_map(|edit| match edit {
            Edit::Create { site, .. } => site.owner,
            _ => None,
        })
        .collect();
    let matcher = Matcher {
        base,
        config,
        create_owners,
        nodes: model.indexed_nodes(),
    };

    let mut envs = Vec::new();
    matcher.assign_tops(&decomposed.lhs, 0, BindingEnv::default(), &mut envs);

    // instance declarations with several names can produce identical
    // environments; keep the first of each
    let mut unique: Vec<BindingEnv> = Vec::new();
    for env in envs {
        if !unique.contains(&env) {
            unique.push(env);
        }
    }

    let mut matches = Vec::new();
    for env in unique {
        if decomposed
            .nacs
            .iter()
            .any(|nac| matcher.nac_matches(nac, &env))
        {
            continue;
        }
        let mut where_values = IndexMap::new();
        for (var, expr) in &rule.where_assignments {
            let value = eval_expr(expr, &env, &where_values, model, accessors)?;
            where_values.insert(var.clone(), value);
        }
        if let Some(constraint) = &rule.constraint {
            match eval_expr(constraint, &env, &where_values, model, accessors)? {
                Value::Bool(true) => {}
                Value::Bool(false) => continue,
                other => {
                    return Err(EvalError::KindMismatch {
                        expected: "boolean",
                        found: other.kind().name(),
                    })
                }
            }
        }
        matches.push(Match { env, where_values });
    }
    Ok(matches)
}

struct Matcher<'a> {
    base: &'a GrammarSpec,
    config: &'a MatchConfig,
    /// Pattern elements barred from instance-equivalent matching.
    create_owners: BTreeSet<PatId>,
    /// Pre-order listing of the whole model.
    nodes: Vec<(NodePath, &'a AstNode)>,
}

impl<'a> Matcher<'a> {
    fn assign_tops(
        &self,
        lhs: &[PatternElem],
        i: usize,
        env: BindingEnv,
        out: &mut Vec<BindingEnv>,
    ) {
        if i == lhs.len() {
            out.push(env);
            return;
        }
        for (path, node) in &self.nodes {
            if !self.top_assignment_ok(lhs, i, path, &env) {
                continue;
            }
            for next in self.match_elem(&lhs[i], path, node, env.clone()) {
                self.assign_tops(lhs, i + 1, next, out);
            }
        }
    }

    /// Distinct top-level elements bind distinct nodes — unless they carry
    /// the same variable, which forces them onto the same node instead.
    fn top_assignment_ok(
        &self,
        lhs: &[PatternElem],
        i: usize,
        path: &NodePath,
        env: &BindingEnv,
    ) -> bool {
        let var = root_var(&lhs[i]);
        for prev in &lhs[..i] {
            let Some(bound) = prev.id().and_then(|id| env.by_pat.get(&id)) else {
                continue;
            };
            let same_var = matches!((var, root_var(prev)), (Some(a), Some(b)) if a == b);
            if same_var != (bound == path) {
                return false;
            }
        }
        true
    }

    fn match_elem(
        &self,
        elem: &PatternElem,
        path: &NodePath,
        node: &AstNode,
        env: BindingEnv,
    ) -> Vec<BindingEnv> {
        match elem {
            PatternElem::Concrete(cp) => self.match_concrete(cp, path, node, env),
            PatternElem::VarBlack { ty, var, id, .. } => {
                if !self.node_is(node, ty) {
                    return Vec::new();
                }
                bind_elem(env, *id, path, var).into_iter().collect()
            }
            PatternElem::VarWhite {
                ty, var, body, id, ..
            } => {
                if !self.node_is(node, ty) {
                    return Vec::new();
                }
                match bind_elem(env, *id, path, var) {
                    Some(e) => self.match_elem(body, path, node, e),
                    None => Vec::new(),
                }
            }
            // negatives and replacements never appear in a decomposed LHS
            PatternElem::Neg { .. } | PatternElem::Repl { .. } => Vec::new(),
        }
    }

    fn node_is(&self, node: &AstNode, ty: &str) -> bool {
        node.nonterminal == ty || self.base.conforms(&node.nonterminal, ty)
    }

    fn match_concrete(
        &self,
        cp: &ConcretePat,
        path: &NodePath,
        node: &AstNode,
        mut env: BindingEnv,
    ) -> Vec<BindingEnv> {
        if node.nonterminal != cp.nonterminal {
            return self.match_instance(cp, path, node, env);
        }
        env.by_pat.insert(cp.id, path.clone());
        let mut envs = vec![env];
        for (label, field) in &cp.fields {
            if envs.is_empty() {
                break;
            }
            let value = node.field(label);
            let mut next = Vec::new();
            for e in envs {
                next.extend(self.match_field(field, value, path, label, e));
            }
            envs = next;
        }
        envs
    }

    /// A definition pattern without member constraints also matches an
    /// instance declaration of the configured shape.
    fn match_instance(
        &self,
        cp: &ConcretePat,
        path: &NodePath,
        node: &AstNode,
        mut env: BindingEnv,
    ) -> Vec<BindingEnv> {
        let Some(eq) = &self.config.instance_equiv else {
            return Vec::new();
        };
        if cp.nonterminal != eq.def
            || node.nonterminal != eq.decl
            || self.create_owners.contains(&cp.id)
        {
            return Vec::new();
        }
        let mut name_ref = None;
        for (label, field) in &cp.fields {
            if *label == eq.name_field {
                match field {
                    PatternField::Name(r) => name_ref = Some(r),
                    _ => return Vec::new(),
                }
            } else if *label == eq.members_field {
                match field {
                    PatternField::List(items) if items.is_empty() => {}
                    _ => return Vec::new(),
                }
            } else {
                return Vec::new();
            }
        }
        let names = node.tokens(&eq.names_field);
        if names.is_empty() {
            return Vec::new();
        }
        env.by_pat.insert(cp.id, path.clone());
        match name_ref {
            None | Some(NameRef::Anon) => vec![env],
            Some(r) => names
                .iter()
                .filter_map(|name| match_name_ref(r, name, env.clone()))
                .collect(),
        }
    }

    fn match_field(
        &self,
        field: &PatternField,
        value: Option<&FieldValue>,
        parent: &NodePath,
        label: &str,
        env: BindingEnv,
    ) -> Vec<BindingEnv> {
        match (field, value) {
            (PatternField::Token(t), Some(FieldValue::Token(s))) => {
                if t == s {
                    vec![env]
                } else {
                    Vec::new()
                }
            }
            (PatternField::Name(r), Some(FieldValue::Token(s))) => {
                match_name_ref(r, s, env).into_iter().collect()
            }
            (PatternField::QName(refs), Some(FieldValue::Token(s))) => {
                let segments: Vec<&str> = s.split('.').collect();
                if segments.len() != refs.len() {
                    return Vec::new();
                }
                let mut cur = Some(env);
                for (r, segment) in refs.iter().zip(&segments) {
                    cur = cur.and_then(|e| match_name_ref(r, segment, e));
                }
                cur.into_iter().collect()
            }
            (PatternField::Names(refs), value) => {
                let names = match value {
                    Some(FieldValue::Tokens(ts)) => ts.as_slice(),
                    None => &[],
                    _ => return Vec::new(),
                };
                assign_names(refs, names, env)
            }
            (PatternField::Elem(inner), Some(FieldValue::Node(child))) => {
                self.match_elem(inner, &parent.child(label, None), child, env)
            }
            (PatternField::List(items), value) => {
                let children = match value {
                    Some(FieldValue::Nodes(ns)) => ns.as_slice(),
                    None => &[],
                    _ => return Vec::new(),
                };
                let mut used = vec![false; children.len()];
                self.assign_list(items, 0, children, &mut used, parent, label, env)
            }
            _ => Vec::new(),
        }
    }

    /// Injective, order-independent assignment of pattern items to list
    /// children; model children without a pattern item stay untouched.
    #[allow(clippy::too_many_arguments)]
    fn assign_list(
        &self,
        items: &[PatternElem],
        k: usize,
        children: &[AstNode],
        used: &mut Vec<bool>,
        parent: &NodePath,
        label: &str,
        env: BindingEnv,
    ) -> Vec<BindingEnv> {
        if k == items.len() {
            return vec![env];
        }
        let mut out = Vec::new();
        for (i, child) in children.iter().enumerate() {
            if used[i] {
                continue;
            }
            let child_path = parent.child(label, Some(i));
            for e in self.match_elem(&items[k], &child_path, child, env.clone()) {
                used[i] = true;
                out.extend(self.assign_list(items, k + 1, children, used, parent, label, e));
                used[i] = false;
            }
        }
        out
    }

    /// True when the negative body matches anywhere in its scope under a
    /// consistent extension of `env`.
    fn nac_matches(&self, nac: &Nac, env: &BindingEnv) -> bool {
        let scope = match nac.scope {
            Some(pat) => match env.by_pat.get(&pat) {
                Some(path) => Some(path),
                None => return false,
            },
            None => None,
        };
        self.nodes.iter().any(|(path, node)| {
            scope.is_none_or(|base| path.is_proper_descendant_of(base))
                && !self
                    .match_elem(&nac.body, path, node, env.clone())
                    .is_empty()
        })
    }
}

fn root_var(elem: &PatternElem) -> Option<&str> {
    match elem {
        PatternElem::VarBlack { var, .. } | PatternElem::VarWhite { var, .. } if var != "_" => {
            Some(var)
        }
        _ => None,
    }
}

fn bind_elem(mut env: BindingEnv, id: PatId, path: &NodePath, var: &str) -> Option<BindingEnv> {
    env.by_pat.insert(id, path.clone());
    if var != "_" {
        match env.elem_vars.get(var) {
            Some(existing) if existing != path => return None,
            Some(_) => {}
            None => {
                env.elem_vars.insert(var.to_string(), path.clone());
            }
        }
    }
    Some(env)
}

fn match_name_ref(r: &NameRef, name: &str, mut env: BindingEnv) -> Option<BindingEnv> {
    match r {
        NameRef::Anon => Some(env),
        NameRef::Literal(lit) => (lit == name).then_some(env),
        NameRef::Var(var) => match env.name_vars.get(var) {
            Some(bound) if bound == name => Some(env),
            Some(_) => None,
            None => {
                env.name_vars.insert(var.clone(), name.to_string());
                Some(env)
            }
        },
    }
}

fn assign_names(refs: &[NameRef], names: &[String], env: BindingEnv) -> Vec<BindingEnv> {
    fn go(
        refs: &[NameRef],
        k: usize,
        names: &[String],
        used: &mut Vec<bool>,
        env: BindingEnv,
        out: &mut Vec<BindingEnv>,
    ) {
        if k == refs.len() {
            out.push(env);
            return;
        }
        for (i, name) in names.iter().enumerate() {
            if used[i] {
                continue;
            }
            if let Some(e) = match_name_ref(&refs[k], name, env.clone()) {
                used[i] = true;
                go(refs, k + 1, names, used, e, out);
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(refs, 0, names, &mut vec![false; names.len()], env, &mut out);
    out
}

// ---------------------------------------------------------------------------
// Expression evaluation
// ---------------------------------------------------------------------------

pub fn eval_expr(
    expr: &Expr,
    env: &BindingEnv,
    where_values: &IndexMap<String, Value>,
    model: &AstNode,
    accessors: &AccessorTable,
) -> Result<Value, EvalError> {
    match expr {
        Expr::Var(var) => lookup_value(var, env, where_values),
        Expr::Str(s) => Ok(Value::Str(s.clone())),
        Expr::Int(i) => Ok(Value::Int(*i)),
        Expr::Call { recv, method, arg } => {
            // accessor call on a bound element
            if let Expr::Var(var) = recv.as_ref() {
                if let Some(path) = env.elem_vars.get(var) {
                    let node = model.at_path(path).expect("bound paths resolve");
                    return Ok(accessors.eval(node, method)?);
                }
            }
            let recv_value = eval_expr(recv, env, where_values, model, accessors)?;
            let arg_value = arg
                .as_ref()
                .map(|a| eval_expr(a, env, where_values, model, accessors))
                .transpose()?;
            apply_value_method(recv_value, method, arg_value)
        }
        Expr::Cmp { op, left, right } => {
            let l = eval_expr(left, env, where_values, model, accessors)?;
            let r = eval_expr(right, env, where_values, model, accessors)?;
            let incomparable = || EvalError::Incomparable {
                op: op.symbol(),
                left: l.kind().name(),
                right: r.kind().name(),
            };
            let result = match op {
                CmpOp::Eq | CmpOp::Ne => {
                    if l.kind() != r.kind() {
                        return Err(incomparable());
                    }
                    (l == r) == (*op == CmpOp::Eq)
                }
                _ => match (&l, &r) {
                    (Value::Int(a), Value::Int(b)) => match op {
                        CmpOp::Lt => a < b,
                        CmpOp::Le => a <= b,
                        CmpOp::Gt => a > b,
                        CmpOp::Ge => a >= b,
                        CmpOp::Eq | CmpOp::Ne => unreachable!(),
                    },
                    _ => return Err(incomparable()),
                },
            };
            Ok(Value::Bool(result))
        }
        Expr::And(l, r) => {
            if !as_bool(eval_expr(l, env, where_values, model, accessors)?)? {
                return Ok(Value::Bool(false));
            }
            let rv = as_bool(eval_expr(r, env, where_values, model, accessors)?)?;
            Ok(Value::Bool(rv))
        }
        Expr::Or(l, r) => {
            if as_bool(eval_expr(l, env, where_values, model, accessors)?)? {
                return Ok(Value::Bool(true));
            }
            let rv = as_bool(eval_expr(r, env, where_values, model, accessors)?)?;
            Ok(Value::Bool(rv))
        }
        Expr::Not(e) => Ok(Value::Bool(!as_bool(eval_expr(
            e,
            env,
            where_values,
            model,
            accessors,
        )?)?)),
    }
}

fn lookup_value(
    var: &str,
    env: &BindingEnv,
    where_values: &IndexMap<String, Value>,
) -> Result<Value, EvalError> {
    if let Some(name) = env.name_vars.get(var) {
        return Ok(Value::Str(name.clone()));
    }
    if let Some(value) = where_values.get(var) {
        return Ok(value.clone());
    }
    if env.elem_vars.contains_key(var) {
        return Err(EvalError::ElementAsValue {
            var: var.to_string(),
        });
    }
    Err(EvalError::UnboundVariable {
        var: var.to_string(),
    })
}

fn apply_value_method(recv: Value, method: &str, arg: Option<Value>) -> Result<Value, EvalError> {
    match method {
        "concat" => {
            let Value::Str(base) = recv else {
                return Err(EvalError::ValueMethod {
                    method: method.to_string(),
                    kind: recv.kind().name(),
                });
            };
            match arg {
                Some(Value::Str(suffix)) => Ok(Value::Str(base + &suffix)),
                Some(other) => Err(EvalError::BadArgument {
                    method: method.to_string(),
                    found: other.kind().name(),
                }),
                None => Err(EvalError::BadArgument {
                    method: method.to_string(),
                    found: "nothing",
                }),
            }
        }
        _ => Err(EvalError::ValueMethod {
            method: method.to_string(),
            kind: recv.kind().name(),
        }),
    }
}

fn as_bool(value: Value) -> Result<bool, EvalError> {
    match value {
        Value::Bool(b) => Ok(b),
        other => Err(EvalError::KindMismatch {
            expected: "boolean",
            found: other.kind().name(),
        }),
    }
}
