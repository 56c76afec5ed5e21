//! Rule intermediate representation and the transformation-module compiler.
//!
//! A parsed module (AST of the derived grammar) is compiled into `Module`:
//! named methods that are either instruction sequences or single rewrite
//! rules. A `Rule` keeps the surface structure — concrete patterns with
//! embedded replacements (`[[ l :- r ]]`), negative elements (`not [[ .. ]]`)
//! and typed variables — and can be decomposed into a positive left-hand
//! side, negative application conditions, and an edit script.

use indexmap::IndexMap;

use thiserror::Error;

use crate::adl::AccessorTable;
use crate::ast::{AstNode, FieldValue, Span};
use crate::derive::{classify, DerivedKind};
use crate::grammar::{Builtin, GrammarSpec, RhsElement, SymbolKind};

/// Identity of a pattern element within one rule, assigned in pre-order.
pub type PatId = usize;

/// A name position in a pattern: literal, variable, or `$_`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NameRef {
    Literal(String),
    Var(String),
    Anon,
}

impl NameRef {
    fn from_node(node: &AstNode) -> Result<NameRef, CompileError> {
        match node.nonterminal.as_str() {
            "NameLit" => Ok(NameRef::Literal(
                node.token("id").unwrap_or_default().to_string(),
            )),
            "NameVar" => {
                let var = node.token("var").unwrap_or_default();
                Ok(if var == "_" {
                    NameRef::Anon
                } else {
                    NameRef::Var(var.to_string())
                })
            }
            other => Err(CompileError::UnsupportedShape {
                detail: format!("unexpected name pattern node '{other}'"),
            }),
        }
    }
}

/// One constrained field of a concrete pattern. Fields absent from the
/// pattern are unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub enum PatternField {
    /// Single nonterminal slot.
    Elem(Box<PatternElem>),
    /// Repeated nonterminal slot; matches a subset of the model's children.
    List(Vec<PatternElem>),
    /// Single name slot.
    Name(NameRef),
    /// Qualified-name slot, one reference per segment.
    QName(Vec<NameRef>),
    /// Repeated name slot.
    Names(Vec<NameRef>),
    /// Literal token slot (choices, integers, strings).
    Token(String),
}

/// A concrete pattern: one base-language production with constrained fields.
#[derive(Debug, Clone)]
pub struct ConcretePat {
    pub nonterminal: String,
    pub fields: IndexMap<String, PatternField>,
    pub id: PatId,
    pub span: Option<Span>,
}

impl PartialEq for ConcretePat {
    fn eq(&self, other: &Self) -> bool {
        self.nonterminal == other.nonterminal && self.fields == other.fields && self.id == other.id
    }
}

#[derive(Debug, Clone)]
pub enum PatternElem {
    Concrete(ConcretePat),
    /// `Type $v;` — matches any element of the type, binding it.
    VarBlack {
        ty: String,
        var: String,
        id: PatId,
        span: Option<Span>,
    },
    /// `Type $v [[ body ]]` — binds the element and constrains its shape.
    VarWhite {
        ty: String,
        var: String,
        body: Box<PatternElem>,
        id: PatId,
        span: Option<Span>,
    },
    /// `not [[ body ]]` — negative application condition.
    Neg {
        body: Box<PatternElem>,
        span: Option<Span>,
    },
    /// `[[ left :- right ]]` — a rewrite embedded in the pattern.
    Repl {
        left: Option<Box<PatternElem>>,
        right: Option<Box<PatternElem>>,
        span: Option<Span>,
    },
}

impl PartialEq for PatternElem {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (PatternElem::Concrete(a), PatternElem::Concrete(b)) => a == b,
            (
                PatternElem::VarBlack {
                    ty: t1,
                    var: v1,
                    id: i1,
                    ..
                },
                PatternElem::VarBlack {
                    ty: t2,
                    var: v2,
                    id: i2,
                    ..
                },
            ) => t1 == t2 && v1 == v2 && i1 == i2,
            (
                PatternElem::VarWhite {
                    ty: t1,
                    var: v1,
                    body: b1,
                    id: i1,
                    ..
                },
                PatternElem::VarWhite {
                    ty: t2,
                    var: v2,
                    body: b2,
                    id: i2,
                    ..
                },
            ) => t1 == t2 && v1 == v2 && b1 == b2 && i1 == i2,
            (PatternElem::Neg { body: b1, .. }, PatternElem::Neg { body: b2, .. }) => b1 == b2,
            (
                PatternElem::Repl {
                    left: l1,
                    right: r1,
                    ..
                },
                PatternElem::Repl {
                    left: l2,
                    right: r2,
                    ..
                },
            ) => l1 == l2 && r1 == r2,
            _ => false,
        }
    }
}

impl PatternElem {
    pub fn span(&self) -> Option<&Span> {
        match self {
            PatternElem::Concrete(c) => c.span.as_ref(),
            PatternElem::VarBlack { span, .. }
            | PatternElem::VarWhite { span, .. }
            | PatternElem::Neg { span, .. }
            | PatternElem::Repl { span, .. } => span.as_ref(),
        }
    }

    /// The base-language type this element stands for, if it is positive.
    pub fn base_type(&self) -> Option<&str> {
        match self {
            PatternElem::Concrete(c) => Some(&c.nonterminal),
            PatternElem::VarBlack { ty, .. } | PatternElem::VarWhite { ty, .. } => Some(ty),
            _ => None,
        }
    }

    pub fn id(&self) -> Option<PatId> {
        match self {
            PatternElem::Concrete(c) => Some(c.id),
            PatternElem::VarBlack { id, .. } | PatternElem::VarWhite { id, .. } => Some(*id),
            _ => None,
        }
    }
}

/// Comparison operators in where-expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Le,
    Ge,
    Lt,
    Gt,
}

impl CmpOp {
    fn from_token(tok: &str) -> Option<CmpOp> {
        Some(match tok {
            "==" => CmpOp::Eq,
            "!=" => CmpOp::Ne,
            "<=" => CmpOp::Le,
            ">=" => CmpOp::Ge,
            "<" => CmpOp::Lt,
            ">" => CmpOp::Gt,
            _ => return None,
        })
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(String),
    Str(String),
    Int(i64),
    Call {
        recv: Box<Expr>,
        method: String,
        arg: Option<Box<Expr>>,
    },
    Cmp {
        op: CmpOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub name: String,
    pub top_elems: Vec<PatternElem>,
    pub where_assignments: Vec<(String, Expr)>,
    pub constraint: Option<Expr>,
    pub span: Option<Span>,
}

impl PartialEq for Rule {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.top_elems == other.top_elems
            && self.where_assignments == other.where_assignments
            && self.constraint == other.constraint
    }
}

#[derive(Debug, Clone)]
pub enum Stmt {
    Call { callee: String, span: Option<Span> },
    Loop { callee: String, span: Option<Span> },
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Stmt::Call { callee: a, .. }, Stmt::Call { callee: b, .. }) => a == b,
            (Stmt::Loop { callee: a, .. }, Stmt::Loop { callee: b, .. }) => a == b,
            _ => false,
        }
    }
}

impl Stmt {
    pub fn callee(&self) -> &str {
        match self {
            Stmt::Call { callee, .. } | Stmt::Loop { callee, .. } => callee,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MethodBody {
    Transformation(Rule),
    Instruction(Vec<Stmt>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Module {
    pub name: String,
    /// Methods in declaration order, keyed by name.
    pub methods: IndexMap<String, MethodBody>,
}

// ---------------------------------------------------------------------------
// Decomposition into LHS + NACs + edits
// ---------------------------------------------------------------------------

/// Where a pattern item sits: inside which pattern element, in which field,
/// at which position of the original pattern item list.
#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub owner: Option<PatId>,
    pub field: Option<String>,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nac {
    pub body: PatternElem,
    /// Pattern element whose matched node bounds the negative search;
    /// `None` scopes the search to the whole model.
    pub scope: Option<PatId>,
    pub site: Site,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Edit {
    Create {
        site: Site,
        template: PatternElem,
    },
    Delete {
        site: Site,
        target: PatternElem,
    },
    Replace {
        site: Site,
        target: PatternElem,
        template: PatternElem,
    },
}

/// A rule split for execution: pure positive patterns to match, negative
/// conditions to check, and edits to apply.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedRule {
    pub lhs: Vec<PatternElem>,
    pub nacs: Vec<Nac>,
    pub edits: Vec<Edit>,
}

impl Rule {
    pub fn decompose(&self) -> DecomposedRule {
        let mut nacs = Vec::new();
        let mut edits = Vec::new();
        let lhs = decompose_items(&self.top_elems, None, None, &mut nacs, &mut edits);
        DecomposedRule { lhs, nacs, edits }
    }
}

fn decompose_items(
    items: &[PatternElem],
    owner: Option<PatId>,
    field: Option<&str>,
    nacs: &mut Vec<Nac>,
    edits: &mut Vec<Edit>,
) -> Vec<PatternElem> {
    let mut out = Vec::new();
    for (index, item) in items.iter().enumerate() {
        let site = Site {
            owner,
            field: field.map(str::to_string),
            index,
        };
        match item {
            PatternElem::Neg { body, .. } => nacs.push(Nac {
                body: (**body).clone(),
                scope: owner,
                site,
            }),
            PatternElem::Repl { left, right, .. } => match (left, right) {
                (None, Some(r)) => edits.push(Edit::Create {
                    site,
                    template: (**r).clone(),
                }),
                (Some(l), None) => {
                    // the target stays on the LHS so it gets matched
                    let kept = decompose_elem(l, nacs, edits);
                    edits.push(Edit::Delete {
                        site,
                        target: kept.clone(),
                    });
                    out.push(kept);
                }
                (Some(l), Some(r)) => {
                    let kept = decompose_elem(l, nacs, edits);
                    edits.push(Edit::Replace {
                        site,
                        target: kept.clone(),
                        template: (**r).clone(),
                    });
                    out.push(kept);
                }
                (None, None) => {} // rejected at compile time
            },
            positive => out.push(decompose_elem(positive, nacs, edits)),
        }
    }
    out
}

fn decompose_elem(elem: &PatternElem, nacs: &mut Vec<Nac>, edits: &mut Vec<Edit>) -> PatternElem {
    match elem {
        PatternElem::Concrete(cp) => {
            let mut fields = IndexMap::new();
            for (label, value) in &cp.fields {
                let mapped = match value {
                    PatternField::List(items) => PatternField::List(decompose_items(
                        items,
                        Some(cp.id),
                        Some(label),
                        nacs,
                        edits,
                    )),
                    PatternField::Elem(inner) => {
                        let slice = std::slice::from_ref(&**inner);
                        let kept = decompose_items(slice, Some(cp.id), Some(label), nacs, edits);
                        match kept.into_iter().next() {
                            Some(e) => PatternField::Elem(Box::new(e)),
                            // the single slot held a negative or creation
                            // item; the slot itself is then unconstrained
                            None => continue,
                        }
                    }
                    other => other.clone(),
                };
                fields.insert(label.clone(), mapped);
            }
            PatternElem::Concrete(ConcretePat {
                nonterminal: cp.nonterminal.clone(),
                fields,
                id: cp.id,
                span: cp.span.clone(),
            })
        }
        PatternElem::VarWhite {
            ty,
            var,
            body,
            id,
            span,
        } => PatternElem::VarWhite {
            ty: ty.clone(),
            var: var.clone(),
            body: Box::new(decompose_elem(body, nacs, edits)),
            id: *id,
            span: span.clone(),
        },
        other => other.clone(),
    }
}

impl DecomposedRule {
    /// Reassembles the original pattern elements, undoing `decompose`.
    pub fn remerge(&self) -> Vec<PatternElem> {
        let mut wraps: IndexMap<PatId, Option<PatternElem>> = IndexMap::new();
        for edit in &self.edits {
            match edit {
                Edit::Delete { target, .. } => {
                    if let Some(id) = target.id() {
                        wraps.insert(id, None);
                    }
                }
                Edit::Replace {
                    target, template, ..
                } => {
                    if let Some(id) = target.id() {
                        wraps.insert(id, Some(template.clone()));
                    }
                }
                Edit::Create { .. } => {}
            }
        }

        let mut elems: Vec<PatternElem> = self.lhs.iter().map(|e| rewrap(e, &wraps)).collect();

        // reinsert removed items in ascending position order
        let mut insertions: Vec<(&Site, PatternElem)> = Vec::new();
        for nac in &self.nacs {
            insertions.push((
                &nac.site,
                PatternElem::Neg {
                    body: Box::new(nac.body.clone()),
                    span: None,
                },
            ));
        }
        for edit in &self.edits {
            if let Edit::Create { site, template } = edit {
                insertions.push((
                    site,
                    PatternElem::Repl {
                        left: None,
                        right: Some(Box::new(template.clone())),
                        span: None,
                    },
                ));
            }
        }
        insertions.sort_by_key(|(site, _)| site.index);
        for (site, item) in insertions {
            insert_at_site(&mut elems, site, item);
        }
        elems
    }
}

fn rewrap(elem: &PatternElem, wraps: &IndexMap<PatId, Option<PatternElem>>) -> PatternElem {
    let mapped = match elem {
        PatternElem::Concrete(cp) => PatternElem::Concrete(ConcretePat {
            nonterminal: cp.nonterminal.clone(),
            fields: cp
                .fields
                .iter()
                .map(|(label, value)| {
                    let v = match value {
                        PatternField::List(items) => {
                            PatternField::List(items.iter().map(|i| rewrap(i, wraps)).collect())
                        }
                        PatternField::Elem(inner) => {
                            PatternField::Elem(Box::new(rewrap(inner, wraps)))
                        }
                        other => other.clone(),
                    };
                    (label.clone(), v)
                })
                .collect(),
            id: cp.id,
            span: cp.span.clone(),
        }),
        PatternElem::VarWhite {
            ty,
            var,
            body,
            id,
            span,
        } => PatternElem::VarWhite {
            ty: ty.clone(),
            var: var.clone(),
            body: Box::new(rewrap(body, wraps)),
            id: *id,
            span: span.clone(),
        },
        other => other.clone(),
    };
    if let Some(id) = mapped.id() {
        if let Some(right) = wraps.get(&id) {
            return PatternElem::Repl {
                left: Some(Box::new(mapped)),
                right: right.clone().map(Box::new),
                span: None,
            };
        }
    }
    mapped
}

fn insert_at_site(elems: &mut Vec<PatternElem>, site: &Site, item: PatternElem) {
    match site.owner {
        None => {
            let at = site.index.min(elems.len());
            elems.insert(at, item);
        }
        Some(owner) => {
            for elem in elems.iter_mut() {
                if insert_into_elem(elem, owner, site, &item) {
                    return;
                }
            }
        }
    }
}

fn insert_into_elem(elem: &mut PatternElem, owner: PatId, site: &Site, item: &PatternElem) -> bool {
    match elem {
        PatternElem::Concrete(cp) => {
            if cp.id == owner {
                let field = site.field.clone().unwrap_or_default();
                match cp.fields.get_mut(&field) {
                    Some(PatternField::List(items)) => {
                        let at = site.index.min(items.len());
                        items.insert(at, item.clone());
                    }
                    Some(PatternField::Elem(_)) | None => {
                        cp.fields
                            .insert(field, PatternField::Elem(Box::new(item.clone())));
                    }
                    _ => {}
                }
                return true;
            }
            for value in cp.fields.values_mut() {
                match value {
                    PatternField::List(items) => {
                        for inner in items.iter_mut() {
                            if insert_into_elem(inner, owner, site, item) {
                                return true;
                            }
                        }
                    }
                    PatternField::Elem(inner) => {
                        if insert_into_elem(inner, owner, site, item) {
                            return true;
                        }
                    }
                    _ => {}
                }
            }
            false
        }
        PatternElem::VarWhite { body, .. } => insert_into_elem(body, owner, site, item),
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Compilation
// ---------------------------------------------------------------------------

#[derive(Debug, Error, PartialEq)]
pub enum CompileError {
    #[error("expected a transformation module, found '{found}'")]
    NotAModule { found: String },
    #[error("method '{name}' is defined more than once")]
    DuplicateMethod { name: String },
    #[error("module has no main() method")]
    MissingMain,
    #[error("method '{caller}' calls unknown method '{callee}'")]
    UnknownCallee { caller: String, callee: String },
    #[error("loop target '{callee}' is not a transformation")]
    LoopNeedsTransformation { callee: String },
    #[error("instruction methods call each other in a cycle: {cycle}")]
    RecursiveInstructions { cycle: String },
    #[error("rule '{rule}': variable ${var} is not bound by the pattern or a prior assignment")]
    UnboundVariable { rule: String, var: String },
    #[error("rule '{rule}': $_ cannot appear in a replacement template")]
    AnonymousInTemplate { rule: String },
    #[error("rule '{rule}': {what} cannot appear inside {context}")]
    InvalidNesting {
        rule: String,
        what: String,
        context: String,
    },
    #[error("rule '{rule}': replacement needs at least one side")]
    EmptyReplacement { rule: String },
    #[error("rule '{rule}': element of type '{found}' does not fit a slot of type '{slot}'")]
    TypeMismatch {
        rule: String,
        found: String,
        slot: String,
    },
    #[error("rule '{rule}': ${var} is declared as '{declared}' but its body is a '{found}'")]
    WhiteBoxTypeMismatch {
        rule: String,
        var: String,
        declared: String,
        found: String,
    },
    #[error("rule '{rule}': type '{ty}' has no method '{method}'")]
    UnknownMethod {
        rule: String,
        ty: String,
        method: String,
    },
    #[error("rule '{rule}': {method}() {expected}")]
    BadArity {
        rule: String,
        method: String,
        expected: String,
    },
    #[error("rule '{rule}': ${var} is used both as an element and as a name")]
    VarKindConflict { rule: String, var: String },
    #[error("rule '{rule}': ${var} is assigned but already bound")]
    DuplicateAssignment { rule: String, var: String },
    #[error("rule '{rule}': cannot assign to $_")]
    AnonymousAssignment { rule: String },
    #[error("rule '{rule}': ${var} is bound to conflicting types '{first}' and '{second}'")]
    ConflictingVarTypes {
        rule: String,
        var: String,
        first: String,
        second: String,
    },
    #[error("unsupported construct: {detail}")]
    UnsupportedShape { detail: String },
}

pub fn compile_module(
    module_ast: &AstNode,
    base: &GrammarSpec,
    accessors: &AccessorTable,
) -> Result<Module, CompileError> {
    if module_ast.nonterminal != "Module" {
        return Err(CompileError::NotAModule {
            found: module_ast.nonterminal.clone(),
        });
    }
    let name = module_ast.token("name").unwrap_or_default().to_string();
    let mut methods: IndexMap<String, MethodBody> = IndexMap::new();

    for method in module_ast.children("methods") {
        let method_name = method.token("name").unwrap_or_default().to_string();
        if methods.contains_key(&method_name) {
            return Err(CompileError::DuplicateMethod { name: method_name });
        }
        let body = match method.nonterminal.as_str() {
            "TrafoMethod" => {
                let rule_node = method.child("rule").ok_or(CompileError::UnsupportedShape {
                    detail: "transformation without a rule".into(),
                })?;
                let mut builder = RuleBuilder { base, next_id: 0 };
                let rule = builder.build(&method_name, rule_node, method.span.clone())?;
                Validator {
                    base,
                    accessors,
                    rule_name: &method_name,
                }
                .validate(&rule)?;
                MethodBody::Transformation(rule)
            }
            "InstrMethod" => {
                let stmts = method
                    .children("stmts")
                    .iter()
                    .map(|s| {
                        let callee = s.token("callee").unwrap_or_default().to_string();
                        match s.nonterminal.as_str() {
                            "LoopStmt" => Ok(Stmt::Loop {
                                callee,
                                span: s.span.clone(),
                            }),
                            "CallStmt" => Ok(Stmt::Call {
                                callee,
                                span: s.span.clone(),
                            }),
                            other => Err(CompileError::UnsupportedShape {
                                detail: format!("unexpected statement node '{other}'"),
                            }),
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                MethodBody::Instruction(stmts)
            }
            other => {
                return Err(CompileError::UnsupportedShape {
                    detail: format!("unexpected method node '{other}'"),
                })
            }
        };
        methods.insert(method_name, body);
    }

    if !methods.contains_key("main") {
        return Err(CompileError::MissingMain);
    }

    // call graph checks
    for (caller, body) in &methods {
        if let MethodBody::Instruction(stmts) = body {
            for stmt in stmts {
                let callee = stmt.callee();
                match methods.get(callee) {
                    None => {
                        return Err(CompileError::UnknownCallee {
                            caller: caller.clone(),
                            callee: callee.to_string(),
                        })
                    }
                    Some(MethodBody::Instruction(_)) => {
                        if matches!(stmt, Stmt::Loop { .. }) {
                            return Err(CompileError::LoopNeedsTransformation {
                                callee: callee.to_string(),
                            });
                        }
                    }
                    Some(MethodBody::Transformation(_)) => {}
                }
            }
        }
    }
    check_instruction_recursion(&methods)?;

    Ok(Module { name, methods })
}

fn check_instruction_recursion(methods: &IndexMap<String, MethodBody>) -> Result<(), CompileError> {
    fn visit(
        name: &str,
        methods: &IndexMap<String, MethodBody>,
        path: &mut Vec<String>,
        done: &mut Vec<String>,
    ) -> Result<(), CompileError> {
        if done.iter().any(|d| d == name) {
            return Ok(());
        }
        if let Some(at) = path.iter().position(|p| p == name) {
            let mut cycle = path[at..].to_vec();
            cycle.push(name.to_string());
            return Err(CompileError::RecursiveInstructions {
                cycle: cycle.join(" -> "),
            });
        }
        if let Some(MethodBody::Instruction(stmts)) = methods.get(name) {
            path.push(name.to_string());
            for stmt in stmts {
                visit(stmt.callee(), methods, path, done)?;
            }
            path.pop();
        }
        done.push(name.to_string());
        Ok(())
    }

    let mut done = Vec::new();
    for name in methods.keys() {
        visit(name, methods, &mut Vec::new(), &mut done)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// AST -> IR conversion
// ---------------------------------------------------------------------------

struct RuleBuilder<'a> {
    base: &'a GrammarSpec,
    next_id: PatId,
}

impl<'a> RuleBuilder<'a> {
    fn fresh(&mut self) -> PatId {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn build(
        &mut self,
        name: &str,
        rule_node: &AstNode,
        span: Option<Span>,
    ) -> Result<Rule, CompileError> {
        let top_elems = rule_node
            .children("elems")
            .iter()
            .map(|e| self.convert_elem(e))
            .collect::<Result<Vec<_>, _>>()?;
        let mut where_assignments = Vec::new();
        let mut constraint = None;
        if let Some(block) = rule_node.child("where") {
            for assign in block.children("assigns") {
                let var = assign.token("var").unwrap_or_default().to_string();
                let value = self.convert_expr(assign.child("value").ok_or_else(|| {
                    CompileError::UnsupportedShape {
                        detail: "assignment without value".into(),
                    }
                })?)?;
                where_assignments.push((var, value));
            }
            constraint = block
                .child("constraint")
                .map(|c| self.convert_expr(c))
                .transpose()?;
        }
        Ok(Rule {
            name: name.to_string(),
            top_elems,
            where_assignments,
            constraint,
            span,
        })
    }

    fn convert_elem(&mut self, node: &AstNode) -> Result<PatternElem, CompileError> {
        match node.nonterminal.as_str() {
            "Repl" => Ok(PatternElem::Repl {
                left: node
                    .child("left")
                    .map(|l| self.convert_elem(l).map(Box::new))
                    .transpose()?,
                right: node
                    .child("right")
                    .map(|r| self.convert_elem(r).map(Box::new))
                    .transpose()?,
                span: node.span.clone(),
            }),
            "Neg" => {
                let body = node.child("body").ok_or(CompileError::UnsupportedShape {
                    detail: "negative element without body".into(),
                })?;
                Ok(PatternElem::Neg {
                    body: Box::new(self.convert_elem(body)?),
                    span: node.span.clone(),
                })
            }
            other => match classify(other) {
                Some(DerivedKind::Pat(base_name)) => self.convert_concrete(node, base_name),
                Some(DerivedKind::VarBlack(base_name)) => Ok(PatternElem::VarBlack {
                    ty: base_name.to_string(),
                    var: node.token("var").unwrap_or_default().to_string(),
                    id: self.fresh(),
                    span: node.span.clone(),
                }),
                Some(DerivedKind::VarWhite(base_name)) => {
                    let id = self.fresh();
                    let body = node.child("body").ok_or(CompileError::UnsupportedShape {
                        detail: "white-box variable without body".into(),
                    })?;
                    Ok(PatternElem::VarWhite {
                        ty: base_name.to_string(),
                        var: node.token("var").unwrap_or_default().to_string(),
                        body: Box::new(self.convert_elem(body)?),
                        id,
                        span: node.span.clone(),
                    })
                }
                None => Err(CompileError::UnsupportedShape {
                    detail: format!("unexpected pattern node '{other}'"),
                }),
            },
        }
    }

    fn convert_concrete(
        &mut self,
        node: &AstNode,
        base_name: &str,
    ) -> Result<PatternElem, CompileError> {
        let id = self.fresh();
        let production =
            self.base
                .production(base_name)
                .ok_or_else(|| CompileError::UnsupportedShape {
                    detail: format!("pattern for unknown production '{base_name}'"),
                })?;
        let mut fields = IndexMap::new();
        for (label, value) in &node.fields {
            let elem = production
                .elements
                .iter()
                .find(|e| e.label() == Some(label.as_str()))
                .ok_or_else(|| CompileError::UnsupportedShape {
                    detail: format!("field '{label}' not in production '{base_name}'"),
                })?;
            let field = self.convert_field(elem, value)?;
            fields.insert(label.clone(), field);
        }
        Ok(PatternElem::Concrete(ConcretePat {
            nonterminal: base_name.to_string(),
            fields,
            id,
            span: node.span.clone(),
        }))
    }

    fn convert_field(
        &mut self,
        elem: &RhsElement,
        value: &FieldValue,
    ) -> Result<PatternField, CompileError> {
        let unsupported = |detail: String| CompileError::UnsupportedShape { detail };
        match elem {
            RhsElement::Choice { .. } => match value {
                FieldValue::Token(t) => Ok(PatternField::Token(t.clone())),
                _ => Err(unsupported("choice field without token".into())),
            },
            RhsElement::Ref { target, .. } | RhsElement::OptRef { target, .. } => {
                match self.base.symbol(target) {
                    Some(SymbolKind::Builtin(Builtin::Name))
                    | Some(SymbolKind::Builtin(Builtin::FreeName)) => match value {
                        FieldValue::Node(n) => Ok(PatternField::Name(NameRef::from_node(n)?)),
                        _ => Err(unsupported("name field without name pattern".into())),
                    },
                    Some(SymbolKind::Builtin(Builtin::QualifiedName)) => match value {
                        FieldValue::Node(n) => Ok(PatternField::QName(qname_refs(n)?)),
                        _ => Err(unsupported("qualified-name field without pattern".into())),
                    },
                    Some(SymbolKind::Builtin(_)) => match value {
                        FieldValue::Token(t) => Ok(PatternField::Token(t.clone())),
                        _ => Err(unsupported("token field without token".into())),
                    },
                    _ => match value {
                        FieldValue::Node(n) => {
                            Ok(PatternField::Elem(Box::new(self.convert_elem(n)?)))
                        }
                        _ => Err(unsupported("element field without node".into())),
                    },
                }
            }
            RhsElement::List { target, .. } => match self.base.symbol(target) {
                Some(SymbolKind::Builtin(Builtin::Name))
                | Some(SymbolKind::Builtin(Builtin::FreeName)) => match value {
                    FieldValue::Nodes(ns) => Ok(PatternField::Names(
                        ns.iter()
                            .map(NameRef::from_node)
                            .collect::<Result<_, _>>()?,
                    )),
                    _ => Err(unsupported("name list without name patterns".into())),
                },
                Some(SymbolKind::Builtin(Builtin::QualifiedName)) => Err(unsupported(
                    "qualified-name lists are not supported in patterns".into(),
                )),
                Some(SymbolKind::Builtin(_)) => match value {
                    FieldValue::Tokens(ts) => Ok(PatternField::Names(
                        ts.iter().map(|t| NameRef::Literal(t.clone())).collect(),
                    )),
                    _ => Err(unsupported("token list without tokens".into())),
                },
                _ => match value {
                    FieldValue::Nodes(ns) => Ok(PatternField::List(
                        ns.iter()
                            .map(|n| self.convert_elem(n))
                            .collect::<Result<_, _>>()?,
                    )),
                    _ => Err(unsupported("element list without nodes".into())),
                },
            },
            RhsElement::Terminal { .. } | RhsElement::OptTerminal { .. } => {
                Err(unsupported("terminal produced a field".into()))
            }
        }
    }

    fn convert_expr(&mut self, node: &AstNode) -> Result<Expr, CompileError> {
        let unsupported = |detail: String| CompileError::UnsupportedShape { detail };
        match node.nonterminal.as_str() {
            "OrExpr" => {
                let mut expr = self.convert_expr(node.child("first").unwrap())?;
                for tail in node.children("rest") {
                    let term = self.convert_expr(tail.child("term").unwrap())?;
                    expr = Expr::Or(Box::new(expr), Box::new(term));
                }
                Ok(expr)
            }
            "AndExpr" => {
                let mut expr = self.convert_expr(node.child("first").unwrap())?;
                for tail in node.children("rest") {
                    let term = self.convert_expr(tail.child("term").unwrap())?;
                    expr = Expr::And(Box::new(expr), Box::new(term));
                }
                Ok(expr)
            }
            "CmpExpr" => {
                let left = self.convert_expr(node.child("left").unwrap())?;
                match node.child("tail") {
                    None => Ok(left),
                    Some(tail) => {
                        let op_tok = tail.token("op").unwrap_or_default();
                        let op = CmpOp::from_token(op_tok)
                            .ok_or_else(|| unsupported(format!("operator '{op_tok}'")))?;
                        let right = self.convert_expr(tail.child("right").unwrap())?;
                        Ok(Expr::Cmp {
                            op,
                            left: Box::new(left),
                            right: Box::new(right),
                        })
                    }
                }
            }
            "NotExpr" => Ok(Expr::Not(Box::new(
                self.convert_expr(node.child("expr").unwrap())?,
            ))),
            "PostfixExpr" => {
                let mut expr = self.convert_expr(node.child("base").unwrap())?;
                for call in node.children("calls") {
                    let method = call.token("method").unwrap_or_default().to_string();
                    let arg = call
                        .child("arg")
                        .map(|a| self.convert_expr(a).map(Box::new))
                        .transpose()?;
                    expr = Expr::Call {
                        recv: Box::new(expr),
                        method,
                        arg,
                    };
                }
                Ok(expr)
            }
            "VarRefExpr" => Ok(Expr::Var(node.token("var").unwrap_or_default().to_string())),
            "StringLitExpr" => Ok(Expr::Str(
                node.token("value").unwrap_or_default().to_string(),
            )),
            "IntLitExpr" => {
                let text = node.token("value").unwrap_or_default();
                Ok(Expr::Int(text.parse().map_err(|_| {
                    unsupported(format!("integer literal '{text}'"))
                })?))
            }
            "ParenExpr" => self.convert_expr(node.child("expr").unwrap()),
            other => Err(unsupported(format!("expression node '{other}'"))),
        }
    }
}

fn qname_refs(node: &AstNode) -> Result<Vec<NameRef>, CompileError> {
    let mut refs = vec![NameRef::from_node(node.child("first").ok_or(
        CompileError::UnsupportedShape {
            detail: "qualified-name pattern without first segment".into(),
        },
    )?)?];
    for seg in node.children("segs") {
        refs.push(NameRef::from_node(seg.child("seg").ok_or(
            CompileError::UnsupportedShape {
                detail: "qualified-name segment without name".into(),
            },
        )?)?);
    }
    Ok(refs)
}

// ---------------------------------------------------------------------------
// Rule validation
// ---------------------------------------------------------------------------

struct Validator<'a> {
    base: &'a GrammarSpec,
    accessors: &'a AccessorTable,
    rule_name: &'a str,
}

#[derive(Default)]
struct Bindings {
    /// element variables with their declared types
    elems: IndexMap<String, String>,
    names: Vec<String>,
    assigned: Vec<String>,
}

impl Bindings {
    fn is_bound(&self, var: &str) -> bool {
        self.elems.contains_key(var)
            || self.names.iter().any(|n| n == var)
            || self.assigned.iter().any(|a| a == var)
    }
}

impl<'a> Validator<'a> {
    fn err_rule(&self) -> String {
        self.rule_name.to_string()
    }

    fn validate(&self, rule: &Rule) -> Result<(), CompileError> {
        let mut bindings = Bindings::default();
        for elem in &rule.top_elems {
            self.collect_bindings(elem, &mut bindings)?;
        }

        for (var, expr) in &rule.where_assignments {
            if var == "_" {
                return Err(CompileError::AnonymousAssignment {
                    rule: self.err_rule(),
                });
            }
            self.check_expr(expr, &bindings)?;
            if bindings.is_bound(var) {
                return Err(CompileError::DuplicateAssignment {
                    rule: self.err_rule(),
                    var: var.clone(),
                });
            }
            bindings.assigned.push(var.clone());
        }
        if let Some(constraint) = &rule.constraint {
            self.check_expr(constraint, &bindings)?;
        }

        // structural checks need the full set of assigned names
        for elem in &rule.top_elems {
            self.check_elem(elem, SlotCtx::TopLevel, &bindings, Polarity::Positive)?;
        }
        Ok(())
    }

    fn collect_bindings(
        &self,
        elem: &PatternElem,
        bindings: &mut Bindings,
    ) -> Result<(), CompileError> {
        match elem {
            PatternElem::Concrete(cp) => {
                for value in cp.fields.values() {
                    match value {
                        PatternField::Name(r) => self.collect_name(r, bindings)?,
                        PatternField::QName(refs) | PatternField::Names(refs) => {
                            for r in refs {
                                self.collect_name(r, bindings)?;
                            }
                        }
                        PatternField::Elem(inner) => self.collect_bindings(inner, bindings)?,
                        PatternField::List(items) => {
                            for item in items {
                                self.collect_bindings(item, bindings)?;
                            }
                        }
                        PatternField::Token(_) => {}
                    }
                }
                Ok(())
            }
            PatternElem::VarBlack { ty, var, .. } => self.collect_elem_var(var, ty, bindings),
            PatternElem::VarWhite { ty, var, body, .. } => {
                self.collect_elem_var(var, ty, bindings)?;
                self.collect_bindings(body, bindings)
            }
            // negative bodies bind only existentially, replacement templates
            // bind nothing
            PatternElem::Neg { .. } => Ok(()),
            PatternElem::Repl { left, .. } => match left {
                Some(l) => self.collect_bindings(l, bindings),
                None => Ok(()),
            },
        }
    }

    fn collect_name(&self, r: &NameRef, bindings: &mut Bindings) -> Result<(), CompileError> {
        if let NameRef::Var(v) = r {
            if bindings.elems.contains_key(v) {
                return Err(CompileError::VarKindConflict {
                    rule: self.err_rule(),
                    var: v.clone(),
                });
            }
            if !bindings.names.iter().any(|n| n == v) {
                bindings.names.push(v.clone());
            }
        }
        Ok(())
    }

    fn collect_elem_var(
        &self,
        var: &str,
        ty: &str,
        bindings: &mut Bindings,
    ) -> Result<(), CompileError> {
        if var == "_" {
            return Ok(());
        }
        if bindings.names.iter().any(|n| n == var) {
            return Err(CompileError::VarKindConflict {
                rule: self.err_rule(),
                var: var.to_string(),
            });
        }
        match bindings.elems.get(var) {
            Some(existing) if existing != ty => Err(CompileError::ConflictingVarTypes {
                rule: self.err_rule(),
                var: var.to_string(),
                first: existing.clone(),
                second: ty.to_string(),
            }),
            _ => {
                bindings.elems.insert(var.to_string(), ty.to_string());
                Ok(())
            }
        }
    }

    fn check_expr(&self, expr: &Expr, bindings: &Bindings) -> Result<(), CompileError> {
        match expr {
            Expr::Var(v) => {
                if bindings.is_bound(v) {
                    Ok(())
                } else {
                    Err(CompileError::UnboundVariable {
                        rule: self.err_rule(),
                        var: v.clone(),
                    })
                }
            }
            Expr::Str(_) | Expr::Int(_) => Ok(()),
            Expr::Call { recv, method, arg } => {
                self.check_expr(recv, bindings)?;
                if let Some(a) = arg {
                    self.check_expr(a, bindings)?;
                }
                self.check_call(recv, method, arg.is_some(), bindings)
            }
            Expr::Cmp { left, right, .. } => {
                self.check_expr(left, bindings)?;
                self.check_expr(right, bindings)
            }
            Expr::And(l, r) | Expr::Or(l, r) => {
                self.check_expr(l, bindings)?;
                self.check_expr(r, bindings)
            }
            Expr::Not(e) => self.check_expr(e, bindings),
        }
    }

    fn check_call(
        &self,
        recv: &Expr,
        method: &str,
        has_arg: bool,
        bindings: &Bindings,
    ) -> Result<(), CompileError> {
        let concat_arity = |has_arg: bool| {
            if has_arg {
                Ok(())
            } else {
                Err(CompileError::BadArity {
                    rule: self.err_rule(),
                    method: method.to_string(),
                    expected: "requires an argument".into(),
                })
            }
        };
        match recv {
            Expr::Var(v) => {
                if let Some(ty) = bindings.elems.get(v) {
                    // receiver is a bound element of a known type
                    let found = if self.base.production(ty).is_some() {
                        self.accessors.lookup(ty, method).is_some()
                    } else {
                        !self
                            .accessors
                            .lookup_for_type(self.base, ty, method)
                            .is_empty()
                    };
                    if !found {
                        return Err(CompileError::UnknownMethod {
                            rule: self.err_rule(),
                            ty: ty.clone(),
                            method: method.to_string(),
                        });
                    }
                    if has_arg {
                        return Err(CompileError::BadArity {
                            rule: self.err_rule(),
                            method: method.to_string(),
                            expected: "takes no argument".into(),
                        });
                    }
                    Ok(())
                } else if bindings.names.iter().any(|n| n == v) {
                    // receiver is a matched name, i.e. a string
                    if method != "concat" {
                        return Err(CompileError::UnknownMethod {
                            rule: self.err_rule(),
                            ty: "name".into(),
                            method: method.to_string(),
                        });
                    }
                    concat_arity(has_arg)
                } else {
                    // assigned variable: kind only known at evaluation time
                    if method == "concat" {
                        concat_arity(has_arg)?;
                    }
                    Ok(())
                }
            }
            _ => {
                if method == "concat" {
                    concat_arity(has_arg)?;
                }
                Ok(())
            }
        }
    }

    fn check_elem(
        &self,
        elem: &PatternElem,
        slot: SlotCtx<'_>,
        bindings: &Bindings,
        polarity: Polarity,
    ) -> Result<(), CompileError> {
        match elem {
            PatternElem::Concrete(cp) => {
                let production = self.base.production(&cp.nonterminal).ok_or_else(|| {
                    CompileError::UnsupportedShape {
                        detail: format!("unknown production '{}'", cp.nonterminal),
                    }
                })?;
                for (label, value) in &cp.fields {
                    let target = production
                        .elements
                        .iter()
                        .find(|e| e.label() == Some(label.as_str()))
                        .and_then(|e| e.target());
                    match value {
                        PatternField::Elem(inner) => self.check_elem(
                            inner,
                            SlotCtx::Typed(target.unwrap_or_default()),
                            bindings,
                            polarity,
                        )?,
                        PatternField::List(items) => {
                            for item in items {
                                self.check_elem(
                                    item,
                                    SlotCtx::Typed(target.unwrap_or_default()),
                                    bindings,
                                    polarity,
                                )?;
                            }
                        }
                        _ => {}
                    }
                }
                Ok(())
            }
            PatternElem::VarBlack { .. } => Ok(()),
            PatternElem::VarWhite { ty, var, body, .. } => {
                let found = body.base_type().unwrap_or_default();
                if !self.type_conforms(found, ty) {
                    return Err(CompileError::WhiteBoxTypeMismatch {
                        rule: self.err_rule(),
                        var: var.clone(),
                        declared: ty.clone(),
                        found: found.to_string(),
                    });
                }
                self.check_elem(body, SlotCtx::Typed(ty), bindings, polarity)
            }
            PatternElem::Neg { body, .. } => {
                if polarity != Polarity::Positive {
                    return Err(CompileError::InvalidNesting {
                        rule: self.err_rule(),
                        what: "a negative element".into(),
                        context: polarity.describe().into(),
                    });
                }
                // negative bodies are type-unconstrained by design: they can
                // describe shapes from any slot of the model
                self.check_elem(body, SlotCtx::Unconstrained, bindings, Polarity::Negative)
            }
            PatternElem::Repl { left, right, .. } => {
                if polarity != Polarity::Positive {
                    return Err(CompileError::InvalidNesting {
                        rule: self.err_rule(),
                        what: "a replacement".into(),
                        context: polarity.describe().into(),
                    });
                }
                if left.is_none() && right.is_none() {
                    return Err(CompileError::EmptyReplacement {
                        rule: self.err_rule(),
                    });
                }
                if let Some(l) = left {
                    // a top-level pattern matches anywhere in the model, so
                    // only in-slot targets are type-constrained
                    if matches!(slot, SlotCtx::Typed(_)) {
                        self.check_slot_type(l.base_type().unwrap_or_default(), &slot)?;
                    }
                    self.check_elem(l, slot, bindings, Polarity::ReplacementLeft)?;
                }
                if let Some(r) = right {
                    // a created element must fit the slot it is created in;
                    // for replacements the new element must fit every slot
                    // the old one could have matched
                    match (&slot, left) {
                        (SlotCtx::Typed(_) | SlotCtx::Unconstrained, _) | (_, None) => {
                            self.check_slot_type(r.base_type().unwrap_or_default(), &slot)?;
                        }
                        (SlotCtx::TopLevel, Some(l)) => {
                            let left_ty = l.base_type().unwrap_or_default();
                            let right_ty = r.base_type().unwrap_or_default();
                            for slot_ty in self.base_slot_types() {
                                if self.type_conforms(left_ty, &slot_ty)
                                    && !self.type_conforms(right_ty, &slot_ty)
                                {
                                    return Err(CompileError::TypeMismatch {
                                        rule: self.err_rule(),
                                        found: right_ty.to_string(),
                                        slot: slot_ty,
                                    });
                                }
                            }
                        }
                    }
                    self.check_template(r, bindings)?;
                }
                Ok(())
            }
        }
    }

    /// Slot types a top-level creation targets: the start production's only
    /// element-list type (the model root's children).
    fn root_slot_type(&self) -> Option<String> {
        let start = self.base.production(&self.base.start_symbol)?;
        start.elements.iter().find_map(|e| match e {
            RhsElement::List { target, .. } if !self.base.target_is_token(target) => {
                Some(target.clone())
            }
            _ => None,
        })
    }

    fn base_slot_types(&self) -> Vec<String> {
        let mut types = Vec::new();
        for p in self.base.productions() {
            for elem in &p.elements {
                if let Some(target) = elem.target() {
                    if !self.base.target_is_token(target)
                        && self.base.symbol(target).is_some()
                        && !matches!(self.base.symbol(target), Some(SymbolKind::Builtin(_)))
                        && !types.contains(&target.to_string())
                    {
                        types.push(target.to_string());
                    }
                }
            }
        }
        types
    }

    fn check_slot_type(&self, found: &str, slot: &SlotCtx<'_>) -> Result<(), CompileError> {
        let expected = match slot {
            SlotCtx::Unconstrained => return Ok(()),
            SlotCtx::Typed(t) => (*t).to_string(),
            SlotCtx::TopLevel => match self.root_slot_type() {
                Some(t) => t,
                None => return Ok(()),
            },
        };
        if self.type_conforms(found, &expected) {
            Ok(())
        } else {
            Err(CompileError::TypeMismatch {
                rule: self.err_rule(),
                found: found.to_string(),
                slot: expected,
            })
        }
    }

    /// `found` fits a slot of type `slot` if every production it may stand
    /// for is admitted by the slot.
    fn type_conforms(&self, found: &str, slot: &str) -> bool {
        if found == slot {
            return true;
        }
        let found_prods = self.base.implementors(found);
        if found_prods.is_empty() {
            return false;
        }
        found_prods.iter().all(|p| self.base.conforms(p, slot))
    }

    fn check_template(&self, elem: &PatternElem, bindings: &Bindings) -> Result<(), CompileError> {
        match elem {
            PatternElem::Concrete(cp) => {
                let production = self.base.production(&cp.nonterminal).ok_or_else(|| {
                    CompileError::UnsupportedShape {
                        detail: format!("unknown production '{}'", cp.nonterminal),
                    }
                })?;
                for (label, value) in &cp.fields {
                    let target = production
                        .elements
                        .iter()
                        .find(|e| e.label() == Some(label.as_str()))
                        .and_then(|e| e.target());
                    match value {
                        PatternField::Name(r) => self.check_template_name(r, bindings)?,
                        PatternField::QName(refs) | PatternField::Names(refs) => {
                            for r in refs {
                                self.check_template_name(r, bindings)?;
                            }
                        }
                        PatternField::Token(_) => {}
                        PatternField::Elem(inner) => {
                            self.check_template(inner, bindings)?;
                            self.check_slot_type(
                                inner.base_type().unwrap_or_default(),
                                &SlotCtx::Typed(target.unwrap_or_default()),
                            )?;
                        }
                        PatternField::List(items) => {
                            for item in items {
                                self.check_template(item, bindings)?;
                                self.check_slot_type(
                                    item.base_type().unwrap_or_default(),
                                    &SlotCtx::Typed(target.unwrap_or_default()),
                                )?;
                            }
                        }
                    }
                }
                Ok(())
            }
            PatternElem::VarBlack { var, .. } => {
                if var == "_" {
                    return Err(CompileError::AnonymousInTemplate {
                        rule: self.err_rule(),
                    });
                }
                if !bindings.elems.contains_key(var) {
                    return Err(CompileError::UnboundVariable {
                        rule: self.err_rule(),
                        var: var.clone(),
                    });
                }
                Ok(())
            }
            PatternElem::VarWhite { .. } => Err(CompileError::InvalidNesting {
                rule: self.err_rule(),
                what: "a white-box variable".into(),
                context: "a replacement template".into(),
            }),
            PatternElem::Neg { .. } => Err(CompileError::InvalidNesting {
                rule: self.err_rule(),
                what: "a negative element".into(),
                context: "a replacement template".into(),
            }),
            PatternElem::Repl { .. } => Err(CompileError::InvalidNesting {
                rule: self.err_rule(),
                what: "a replacement".into(),
                context: "a replacement template".into(),
            }),
        }
    }

    fn check_template_name(&self, r: &NameRef, bindings: &Bindings) -> Result<(), CompileError> {
        match r {
            NameRef::Anon => Err(CompileError::AnonymousInTemplate {
                rule: self.err_rule(),
            }),
            NameRef::Var(v) => {
                let known = bindings.names.iter().any(|n| n == v)
                    || bindings.assigned.iter().any(|a| a == v);
                if known {
                    Ok(())
                } else {
                    Err(CompileError::UnboundVariable {
                        rule: self.err_rule(),
                        var: v.clone(),
                    })
                }
            }
            NameRef::Literal(_) => Ok(()),
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Polarity {
    Positive,
    Negative,
    ReplacementLeft,
}

impl Polarity {
    fn describe(self) -> &'static str {
        match self {
            Polarity::Positive => "a positive pattern",
            Polarity::Negative => "a negative element",
            Polarity::ReplacementLeft => "a replacement target",
        }
    }
}

#[derive(Clone, Copy)]
enum SlotCtx<'a> {
    TopLevel,
    Typed(&'a str),
    Unconstrained,
}
