//! Brute-force matching oracle and randomized model generator.
//!
//! The oracle enumerates every injective assignment of pattern elements to
//! model nodes outright — no search-order tricks, no pruning — and filters
//! the results through the negative conditions and the where clause. Its
//! matches are compared against the engine as canonicalized, sorted strings.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cnctrans_core::adl::{cnc_grammar, AccessorTable};
use cnctrans_core::ast::{AstNode, FieldValue, NodePath};
use cnctrans_core::derive::derive_transformation_grammar;
use cnctrans_core::engine::parse_model;
use cnctrans_core::grammar::GrammarSpec;
use cnctrans_core::matcher::Match;
use cnctrans_core::rule::{
    compile_module, CmpOp, Expr, MethodBody, Nac, NameRef, PatId, PatternElem, PatternField, Rule,
};

/// Patterns covering black/white-box variables, NACs, name equality, `$_`,
/// qualified names, list injectivity, embedded rewrites, and where clauses.
const LIBRARY: &str = r#"module OracleLibrary {
  main() { emptyDef(); }

  transformation emptyDef() { component $c {} }
  transformation declPair() { component $t $n; }
  transformation barePort() { in $p }
  transformation selfType() { component $q { component $q $_; } }
  transformation twoPorts() { component $_ { port in $a, in $b; } }
  transformation trusted() { SecArcComponent $W [[ component $n { trustlevel 1; } ]] }
  transformation anyAccess() { Access $A; }
  transformation untrusted() {
    SecArcComponent $C [[ component $_ {} ]]
    where { $C.getTrustlevel() == 0 }
  }
  transformation noTrust() {
    component $c {}
    not [[ component $c { trustlevel 1; } ]]
  }
  transformation created() { component $n { [[ :- trustlevel 9; ]] } }
  transformation wired() { connect $x.$_ -> $y.$p; }
  transformation noInputs() { component $c { not [[ in $_ ]] } }
  transformation suffixed() {
    component $t $n;
    where { $s = $n.concat("X"); }
  }
  transformation policies() { access ($p, $q); }
  transformation pair() { component $t $n; component $t $m; }
  transformation sameElem() { Access $A; Access $A; }
}
"#;

pub fn pattern_library() -> Vec<Rule> {
    let base = cnc_grammar();
    let derived = derive_transformation_grammar(base).unwrap();
    let ast = parse_model(&derived, "Module", LIBRARY, "oracle.mtr").unwrap();
    let module = compile_module(&ast, base, &AccessorTable::for_grammar(base)).unwrap();
    module
        .methods
        .into_iter()
        .filter_map(|(_, method)| match method {
            MethodBody::Transformation(rule) => Some(rule),
            MethodBody::Instruction(_) => None,
        })
        .collect()
}

// --- random models ----------------------------------------------------------

const COMPONENT_NAMES: [&str; 4] = ["A", "B", "C", "D"];
const TYPE_NAMES: [&str; 3] = ["A", "B", "T"];
const PORT_NAMES: [&str; 4] = ["p", "q", "state", "x"];
const REF_NAMES: [&str; 3] = ["x", "y", "w"];
const POLICY_NAMES: [&str; 2] = ["e", "f"];

/// Deterministic sample of parseable models with at most `max_nodes` AST
/// nodes each. Small name pools force collisions, shared names, and
/// overlapping shapes so the patterns have something to disagree about.
pub fn random_models(count: usize, max_nodes: usize) -> Vec<AstNode> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7C7);
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        assert!(
            attempts < count * 50,
            "generator keeps overshooting {max_nodes} nodes"
        );
        let text = gen_model(&mut rng);
        let node = parse_model(cnc_grammar(), "Model", &text, "gen.arc")
            .unwrap_or_else(|e| panic!("generated model must parse: {e}\n{text}"));
        if node.walk().count() <= max_nodes {
            out.push(node);
        }
    }
    out
}

fn choose<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

fn gen_model(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..=3);
    (0..n)
        .map(|_| gen_component(rng, 1))
        .collect::<Vec<_>>()
        .join("\n")
}

fn gen_component(rng: &mut ChaCha8Rng, depth: usize) -> String {
    let name = choose(rng, &COMPONENT_NAMES);
    let members = (0..rng.gen_range(0..=3))
        .map(|_| gen_member(rng, depth))
        .collect::<Vec<_>>()
        .join(" ");
    format!("component {name} {{ {members} }}")
}

fn gen_member(rng: &mut ChaCha8Rng, depth: usize) -> String {
    match rng.gen_range(0..8) {
        0 => {
            let decls = (0..rng.gen_range(1..=2))
                .map(|_| {
                    let dir = if rng.gen_bool(0.5) { "in" } else { "out" };
                    let name = choose(rng, &PORT_NAMES);
                    if rng.gen_bool(0.5) {
                        format!("{dir} int {name}")
                    } else {
                        format!("{dir} {name}")
                    }
                })
                .collect::<Vec<_>>()
                .join(", ");
            format!("port {decls};")
        }
        1 => {
            let ty = choose(rng, &TYPE_NAMES);
            let names = (0..rng.gen_range(1..=2))
                .map(|_| choose(rng, &REF_NAMES))
                .collect::<Vec<_>>()
                .join(", ");
            format!("component {ty} {names};")
        }
        2 => format!("connect {} -> {};", gen_qname(rng), gen_qname(rng)),
        3 => format!("trustlevel {};", rng.gen_range(-1..=2)),
        4 => format!(
            "access {} ({});",
            choose(rng, &PORT_NAMES),
            gen_policies(rng)
        ),
        5 => format!("access ({});", gen_policies(rng)),
        6 => format!("identity {} -> {};", gen_qname(rng), gen_qname(rng)),
        _ if depth > 0 => gen_component(rng, depth - 1),
        _ => format!("trustlevel {};", rng.gen_range(-1..=2)),
    }
}

fn gen_qname(rng: &mut ChaCha8Rng) -> String {
    if rng.gen_bool(0.5) {
        choose(rng, &PORT_NAMES).to_string()
    } else {
        format!("{}.{}", choose(rng, &REF_NAMES), choose(rng, &PORT_NAMES))
    }
}

fn gen_policies(rng: &mut ChaCha8Rng) -> String {
    (0..rng.gen_range(1..=2))
        .map(|_| choose(rng, &POLICY_NAMES))
        .collect::<Vec<_>>()
        .join(", ")
}

// --- canonical match rendering ----------------------------------------------

/// Renders an engine match in a sortable, order-insensitive form.
pub fn canon_match(m: &Match) -> String {
    let mut parts = Vec::new();
    let mut pats: Vec<(usize, String)> = m
        .env
        .by_pat
        .iter()
        .map(|(id, path)| (*id, path.to_string()))
        .collect();
    pats.sort();
    parts.extend(pats.into_iter().map(|(id, path)| format!("p{id}={path}")));
    push_sorted(
        &mut parts,
        m.env.elem_vars.iter().map(|(v, p)| (v, p.to_string())),
        'e',
    );
    push_sorted(
        &mut parts,
        m.env.name_vars.iter().map(|(v, s)| (v, s.clone())),
        'n',
    );
    push_sorted(
        &mut parts,
        m.where_values.iter().map(|(v, val)| (v, val.render())),
        'w',
    );
    parts.join(";")
}

fn push_sorted<'a>(
    parts: &mut Vec<String>,
    entries: impl Iterator<Item = (&'a String, String)>,
    tag: char,
) {
    let mut sorted: Vec<(&String, String)> = entries.collect();
    sorted.sort();
    parts.extend(
        sorted
            .into_iter()
            .map(|(var, value)| format!("{tag}{var}={value}")),
    );
}

// --- the brute-force enumerator -----------------------------------------------

#[derive(Clone, Default, PartialEq)]
struct Env {
    by_pat: BTreeMap<PatId, NodePath>,
    elems: BTreeMap<String, NodePath>,
    names: BTreeMap<String, String>,
}

#[derive(Clone, PartialEq)]
enum OVal {
    Str(String),
    Int(i64),
    Bool(bool),
}

impl OVal {
    fn render(&self) -> String {
        match self {
            OVal::Str(s) => s.clone(),
            OVal::Int(i) => i.to_string(),
            OVal::Bool(b) => b.to_string(),
        }
    }
}

/// All matches of `rule` in `model`, canonicalized and sorted.
pub fn brute_force(model: &AstNode, rule: &Rule, base: &GrammarSpec) -> Vec<String> {
    let decomposed = rule.decompose();
    let nodes = model.indexed_nodes();
    let oracle = Oracle {
        base,
        model,
        nodes: &nodes,
    };

    // every assignment of top-level elements to nodes, injectively
    let mut states: Vec<(Vec<NodePath>, Env)> = vec![(Vec::new(), Env::default())];
    for (i, elem) in decomposed.lhs.iter().enumerate() {
        let mut next = Vec::new();
        for (chosen, env) in &states {
            for (path, node) in &nodes {
                if !top_ok(&decomposed.lhs, i, chosen, path) {
                    continue;
                }
                for extended in oracle.elem(elem, path, node, env.clone()) {
                    let mut paths = chosen.clone();
                    paths.push(path.clone());
                    next.push((paths, extended));
                }
            }
        }
        states = next;
    }

    let mut unique: Vec<Env> = Vec::new();
    for (_, env) in states {
        if !unique.contains(&env) {
            unique.push(env);
        }
    }

    let mut out = Vec::new();
    for env in unique {
        if decomposed.nacs.iter().any(|nac| oracle.nac(nac, &env)) {
            continue;
        }
        let mut where_values: Vec<(String, OVal)> = Vec::new();
        for (var, expr) in &rule.where_assignments {
            let value = oracle.eval(expr, &env, &where_values);
            where_values.push((var.clone(), value));
        }
        if let Some(constraint) = &rule.constraint {
            match oracle.eval(constraint, &env, &where_values) {
                OVal::Bool(true) => {}
                OVal::Bool(false) => continue,
                _ => panic!("oracle: constraint must be boolean"),
            }
        }
        out.push(canon_env(&env, &where_values));
    }
    out.sort();
    out
}

fn canon_env(env: &Env, where_values: &[(String, OVal)]) -> String {
    let mut parts = Vec::new();
    parts.extend(env.by_pat.iter().map(|(id, path)| format!("p{id}={path}")));
    parts.extend(env.elems.iter().map(|(v, path)| format!("e{v}={path}")));
    parts.extend(env.names.iter().map(|(v, s)| format!("n{v}={s}")));
    let mut wv: Vec<(&String, String)> = where_values
        .iter()
        .map(|(v, val)| (v, val.render()))
        .collect();
    wv.sort();
    parts.extend(wv.into_iter().map(|(v, s)| format!("w{v}={s}")));
    parts.join(";")
}

fn top_var(elem: &PatternElem) -> Option<&str> {
    match elem {
        PatternElem::VarBlack { var, .. } | PatternElem::VarWhite { var, .. } if var != "_" => {
            Some(var)
        }
        _ => None,
    }
}

/// Distinct top elements take distinct nodes; a repeated variable forces the
/// same node.
fn top_ok(lhs: &[PatternElem], i: usize, chosen: &[NodePath], candidate: &NodePath) -> bool {
    let var = top_var(&lhs[i]);
    for (j, prev) in chosen.iter().enumerate() {
        let same_var = matches!((var, top_var(&lhs[j])), (Some(a), Some(b)) if a == b);
        if same_var != (prev == candidate) {
            return false;
        }
    }
    true
}

struct Oracle<'a> {
    base: &'a GrammarSpec,
    model: &'a AstNode,
    nodes: &'a [(NodePath, &'a AstNode)],
}

impl Oracle<'_> {
    fn elem(&self, elem: &PatternElem, path: &NodePath, node: &AstNode, env: Env) -> Vec<Env> {
        match elem {
            PatternElem::Concrete(cp) => {
                if node.nonterminal != cp.nonterminal {
                    return Vec::new();
                }
                let mut env = env;
                env.by_pat.insert(cp.id, path.clone());
                let mut envs = vec![env];
                for (label, field) in &cp.fields {
                    let mut next = Vec::new();
                    for e in envs {
                        next.extend(self.field(field, node.field(label), path, label, e));
                    }
                    envs = next;
                }
                envs
            }
            PatternElem::VarBlack { ty, var, id, .. } => {
                if !self.is(node, ty) {
                    return Vec::new();
                }
                bind(env, *id, path, var).into_iter().collect()
            }
            PatternElem::VarWhite {
                ty, var, body, id, ..
            } => {
                if !self.is(node, ty) {
                    return Vec::new();
                }
                match bind(env, *id, path, var) {
                    Some(e) => self.elem(body, path, node, e),
                    None => Vec::new(),
                }
            }
            PatternElem::Neg { .. } | PatternElem::Repl { .. } => Vec::new(),
        }
    }

    fn is(&self, node: &AstNode, ty: &str) -> bool {
        node.nonterminal == ty || self.base.conforms(&node.nonterminal, ty)
    }

    fn field(
        &self,
        field: &PatternField,
        value: Option<&FieldValue>,
        parent: &NodePath,
        label: &str,
        env: Env,
    ) -> Vec<Env> {
        match (field, value) {
            (PatternField::Token(expected), Some(FieldValue::Token(actual))) => {
                if expected == actual {
                    vec![env]
                } else {
                    Vec::new()
                }
            }
            (PatternField::Name(r), Some(FieldValue::Token(actual))) => {
                name_ref(r, actual, env).into_iter().collect()
            }
            (PatternField::QName(refs), Some(FieldValue::Token(actual))) => {
                let segments: Vec<&str> = actual.split('.').collect();
                if segments.len() != refs.len() {
                    return Vec::new();
                }
                let mut cur = Some(env);
                for (r, segment) in refs.iter().zip(&segments) {
                    cur = cur.and_then(|e| name_ref(r, segment, e));
                }
                cur.into_iter().collect()
            }
            (PatternField::Names(refs), value) => {
                let names: Vec<String> = match value {
                    Some(FieldValue::Tokens(ts)) => ts.clone(),
                    None => Vec::new(),
                    _ => return Vec::new(),
                };
                self.names(refs, &names, env)
            }
            (PatternField::Elem(inner), Some(FieldValue::Node(child))) => {
                self.elem(inner, &parent.child(label, None), child, env)
            }
            (PatternField::List(items), value) => {
                let children: &[AstNode] = match value {
                    Some(FieldValue::Nodes(ns)) => ns,
                    None => &[],
                    _ => return Vec::new(),
                };
                let indices: Vec<usize> = (0..children.len()).collect();
                self.list(items, &indices, children, parent, label, env)
            }
            _ => Vec::new(),
        }
    }

    /// Injective assignment of name references to list entries, in any order.
    fn names(&self, refs: &[NameRef], names: &[String], env: Env) -> Vec<Env> {
        let Some((first, rest)) = refs.split_first() else {
            return vec![env];
        };
        let mut out = Vec::new();
        for (i, name) in names.iter().enumerate() {
            if let Some(e) = name_ref(first, name, env.clone()) {
                let mut remaining = names.to_vec();
                remaining.remove(i);
                out.extend(self.names(rest, &remaining, e));
            }
        }
        out
    }

    /// Injective assignment of pattern items to child indices, in any order;
    /// unmatched children are simply ignored (subset semantics).
    fn list(
        &self,
        items: &[PatternElem],
        available: &[usize],
        children: &[AstNode],
        parent: &NodePath,
        label: &str,
        env: Env,
    ) -> Vec<Env> {
        let Some((first, rest)) = items.split_first() else {
            return vec![env];
        };
        let mut out = Vec::new();
        for (k, &index) in available.iter().enumerate() {
            let child_path = parent.child(label, Some(index));
            for e in self.elem(first, &child_path, &children[index], env.clone()) {
                let mut remaining = available.to_vec();
                remaining.remove(k);
                out.extend(self.list(rest, &remaining, children, parent, label, e));
            }
        }
        out
    }

    /// True when the negative body matches anywhere in its scope under a
    /// consistent extension of `env`.
    fn nac(&self, nac: &Nac, env: &Env) -> bool {
        let scope = match nac.scope {
            Some(id) => match env.by_pat.get(&id) {
                Some(path) => Some(path),
                None => return false,
            },
            None => None,
        };
        self.nodes.iter().any(|(path, node)| {
            scope.is_none_or(|s| path.is_proper_descendant_of(s))
                && !self.elem(&nac.body, path, node, env.clone()).is_empty()
        })
    }

    fn eval(&self, expr: &Expr, env: &Env, where_values: &[(String, OVal)]) -> OVal {
        match expr {
            Expr::Var(var) => {
                if let Some(s) = env.names.get(var) {
                    OVal::Str(s.clone())
                } else if let Some((_, v)) = where_values.iter().find(|(w, _)| w == var) {
                    v.clone()
                } else {
                    panic!("oracle: unbound variable ${var}")
                }
            }
            Expr::Str(s) => OVal::Str(s.clone()),
            Expr::Int(i) => OVal::Int(*i),
            Expr::Call { recv, method, arg } => {
                if let Expr::Var(var) = recv.as_ref() {
                    if let Some(path) = env.elems.get(var) {
                        let node = self.model.at_path(path).expect("bound paths resolve");
                        return self.accessor(node, method);
                    }
                }
                let recv = self.eval(recv, env, where_values);
                let arg = arg.as_ref().map(|a| self.eval(a, env, where_values));
                match (recv, method.as_str(), arg) {
                    (OVal::Str(a), "concat", Some(OVal::Str(b))) => OVal::Str(format!("{a}{b}")),
                    (_, m, _) => panic!("oracle: unsupported method {m}"),
                }
            }
            Expr::Cmp { op, left, right } => {
                let left = self.eval(left, env, where_values);
                let right = self.eval(right, env, where_values);
                let result = match (op, &left, &right) {
                    (CmpOp::Eq, a, b) => a == b,
                    (CmpOp::Ne, a, b) => a != b,
                    (CmpOp::Lt, OVal::Int(a), OVal::Int(b)) => a < b,
                    (CmpOp::Le, OVal::Int(a), OVal::Int(b)) => a <= b,
                    (CmpOp::Gt, OVal::Int(a), OVal::Int(b)) => a > b,
                    (CmpOp::Ge, OVal::Int(a), OVal::Int(b)) => a >= b,
                    _ => panic!("oracle: bad comparison operands"),
                };
                OVal::Bool(result)
            }
            Expr::Not(inner) => match self.eval(inner, env, where_values) {
                OVal::Bool(b) => OVal::Bool(!b),
                _ => panic!("oracle: ! needs a boolean"),
            },
            Expr::And(a, b) => match self.eval(a, env, where_values) {
                OVal::Bool(false) => OVal::Bool(false),
                OVal::Bool(true) => self.eval(b, env, where_values),
                _ => panic!("oracle: && needs booleans"),
            },
            Expr::Or(a, b) => match self.eval(a, env, where_values) {
                OVal::Bool(true) => OVal::Bool(true),
                OVal::Bool(false) => self.eval(b, env, where_values),
                _ => panic!("oracle: || needs booleans"),
            },
        }
    }

    /// Independent re-reading of the getter semantics on CnC shapes.
    fn accessor(&self, node: &AstNode, method: &str) -> OVal {
        match method {
            "getTrustlevel" => {
                let level = node
                    .children("members")
                    .iter()
                    .find(|m| m.nonterminal == "TrustLevel")
                    .and_then(|m| m.token("value"))
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(0);
                OVal::Int(level)
            }
            "getName" => OVal::Str(node.token("name").unwrap_or_default().to_string()),
            other => panic!("oracle: unsupported accessor {other}"),
        }
    }
}

fn bind(mut env: Env, id: PatId, path: &NodePath, var: &str) -> Option<Env> {
    env.by_pat.insert(id, path.clone());
    if var != "_" {
        match env.elems.get(var) {
            Some(existing) if existing != path => return None,
            Some(_) => {}
            None => {
                env.elems.insert(var.to_string(), path.clone());
            }
        }
    }
    Some(env)
}

fn name_ref(r: &NameRef, actual: &str, mut env: Env) -> Option<Env> {
    match r {
        NameRef::Anon => Some(env),
        NameRef::Literal(expected) => (expected == actual).then_some(env),
        NameRef::Var(var) => match env.names.get(var) {
            Some(bound) if bound == actual => Some(env),
            Some(_) => None,
            None => {
                env.names.insert(var.clone(), actual.to_string());
                Some(env)
            }
        },
    }
}
