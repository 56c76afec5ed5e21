//! Derives the transformation-language grammar from a base modeling-language
//! grammar. For every base production `X` the derived grammar gains a pattern
//! form `X_Pat` (the production with names generalized to name patterns,
//! nested elements generalized to pattern elements, trailing semicolons and
//! list minimums relaxed), a black-box variable form `X_VarBlack`
//! (`X $v;`), a white-box variable form `X_VarWhite` (`X $v [[ ... ]]`),
//! and an interface `X_Elem` that also admits replacements (`[[ l :- r ]]`)
//! and negative elements (`not [[ ... ]]`). On top sits a fixed layer of
//! module / method / statement / where-expression syntax.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::grammar::{
    Builtin, Decl, GrammarError, GrammarSpec, InterfaceDecl, Production, RhsElement, SymbolKind,
};

/// Keywords the fixed transformation-language layer claims for itself.
pub const DSTL_KEYWORDS: [&str; 5] = ["module", "transformation", "loop", "where", "not"];

/// Punctuation the fixed layer claims for itself.
pub const DSTL_PUNCT: [&str; 3] = ["[[", "]]", ":-"];

/// Names of the fixed layer's declarations; base symbols must not reuse them.
const FIXED_NAMES: [&str; 34] = [
    "Module",
    "MethodDecl",
    "TrafoMethod",
    "InstrMethod",
    "Stmt",
    "LoopStmt",
    "CallStmt",
    "TransformationRule",
    "WhereBlock",
    "Assignment",
    "OrExpr",
    "OrTail",
    "AndExpr",
    "AndTail",
    "CmpExpr",
    "CmpTail",
    "UnaryExpr",
    "NotExpr",
    "PostfixExpr",
    "CallSuffix",
    "PrimaryExpr",
    "VarRefExpr",
    "StringLitExpr",
    "IntLitExpr",
    "ParenExpr",
    "NamePat",
    "NameLit",
    "NameVar",
    "QNamePat",
    "QNameSeg",
    "Repl",
    "Neg",
    "AnyPat",
    "TopElem",
];

#[derive(Debug, Error, PartialEq)]
pub enum DeriveError {
    #[error("base keyword '{word}' collides with a transformation-language keyword")]
    KeywordCollision { word: String },
    #[error("base terminal '{text}' collides with transformation-language punctuation")]
    PunctCollision { text: String },
    #[error("base symbol '{name}' collides with a derived-grammar symbol")]
    NameCollision { name: String },
    #[error("base production '{production}' can match empty input, so its pattern form would be ambiguous")]
    NullableProduction { production: String },
    #[error("derived grammar is invalid: {0}")]
    Invalid(#[from] GrammarError),
}

pub fn pat_name(base: &str) -> String {
    format!("{base}_Pat")
}

pub fn var_black_name(base: &str) -> String {
    format!("{base}_VarBlack")
}

pub fn var_white_name(base: &str) -> String {
    format!("{base}_VarWhite")
}

pub fn elem_name(base: &str) -> String {
    format!("{base}_Elem")
}

/// How a derived nonterminal relates to a base symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivedKind<'a> {
    Pat(&'a str),
    VarBlack(&'a str),
    VarWhite(&'a str),
}

/// Maps a derived node kind back to its base symbol, if it is a derived form.
pub fn classify(nonterminal: &str) -> Option<DerivedKind<'_>> {
    if let Some(base) = nonterminal.strip_suffix("_Pat") {
        Some(DerivedKind::Pat(base))
    } else if let Some(base) = nonterminal.strip_suffix("_VarBlack") {
        Some(DerivedKind::VarBlack(base))
    } else {
        nonterminal
            .strip_suffix("_VarWhite")
            .map(DerivedKind::VarWhite)
    }
}

pub fn derive_transformation_grammar(base: &GrammarSpec) -> Result<GrammarSpec, DeriveError> {
    check_collisions(base)?;
    for p in base.productions() {
        if base.is_nullable(&p.name) {
            return Err(DeriveError::NullableProduction {
                production: p.name.clone(),
            });
        }
    }

    // Pattern lists are relaxed to "may be empty" wherever that does not make
    // the pattern form itself nullable; a nullable pattern would swallow the
    // empty spots inside replacement brackets.
    let mut relaxed: BTreeSet<String> = base.productions().map(|p| p.name.clone()).collect();
    loop {
        let decls = build_decls(base, &relaxed);
        let mut seen = BTreeSet::new();
        for decl in &decls {
            if !seen.insert(decl.name().to_string()) {
                return Err(DeriveError::NameCollision {
                    name: decl.name().to_string(),
                });
            }
        }
        let derived = GrammarSpec::new(format!("{}Tr", base.name), decls)?;
        let still_nullable: Vec<String> = base
            .productions()
            .filter(|p| derived.is_nullable(&pat_name(&p.name)))
            .map(|p| p.name.clone())
            .collect();
        if still_nullable.is_empty() {
            return Ok(derived);
        }
        let mut changed = false;
        for name in &still_nullable {
            changed |= relaxed.remove(name);
        }
        if !changed {
            return Err(DeriveError::NullableProduction {
                production: still_nullable.into_iter().next().unwrap(),
            });
        }
    }
}

fn check_collisions(base: &GrammarSpec) -> Result<(), DeriveError> {
    for kw in DSTL_KEYWORDS {
        if base.reserved_keywords.contains(kw) {
            return Err(DeriveError::KeywordCollision { word: kw.into() });
        }
    }
    for p in base.productions() {
        for elem in &p.elements {
            let texts: Vec<&str> = match elem {
                RhsElement::Terminal { text } | RhsElement::OptTerminal { text } => vec![text],
                RhsElement::Choice { options, .. } => options.iter().map(|s| s.as_str()).collect(),
                RhsElement::List {
                    separator: Some(sep),
                    ..
                } => vec![sep],
                _ => vec![],
            };
            for text in texts {
                if DSTL_PUNCT.contains(&text) {
                    return Err(DeriveError::PunctCollision { text: text.into() });
                }
            }
        }
    }
    for decl in &base.decls {
        if FIXED_NAMES.contains(&decl.name()) {
            return Err(DeriveError::NameCollision {
                name: decl.name().to_string(),
            });
        }
    }
    Ok(())
}

// Shorthand constructors for the fixed layer.
fn term(text: &str) -> RhsElement {
    RhsElement::Terminal { text: text.into() }
}

fn opt_term(text: &str) -> RhsElement {
    RhsElement::OptTerminal { text: text.into() }
}

fn rf(label: &str, target: &str) -> RhsElement {
    RhsElement::Ref {
        label: label.into(),
        target: target.into(),
    }
}

fn opt_rf(label: &str, target: &str) -> RhsElement {
    RhsElement::OptRef {
        label: label.into(),
        target: target.into(),
    }
}

fn list0(label: &str, target: &str) -> RhsElement {
    RhsElement::List {
        label: label.into(),
        target: target.into(),
        min: 0,
        separator: None,
    }
}

fn list1(label: &str, target: &str) -> RhsElement {
    RhsElement::List {
        label: label.into(),
        target: target.into(),
        min: 1,
        separator: None,
    }
}

fn choice(label: &str, options: &[&str]) -> RhsElement {
    RhsElement::Choice {
        label: label.into(),
        options: options.iter().map(|s| s.to_string()).collect(),
    }
}

fn prod(name: &str, elements: Vec<RhsElement>) -> Decl {
    Decl::Production(Production {
        name: name.into(),
        elements,
    })
}

fn iface(name: &str, alternatives: Vec<String>) -> Decl {
    Decl::Interface(InterfaceDecl {
        name: name.into(),
        alternatives,
    })
}

fn iface_s(name: &str, alternatives: &[&str]) -> Decl {
    iface(name, alternatives.iter().map(|s| s.to_string()).collect())
}

fn build_decls(base: &GrammarSpec, relaxed: &BTreeSet<String>) -> Vec<Decl> {
    let mut decls = vec![
        // module and method layer; the start symbol is Module
        prod(
            "Module",
            vec![
                term("module"),
                rf("name", "Name"),
                term("{"),
                list0("methods", "MethodDecl"),
                term("}"),
            ],
        ),
        iface_s("MethodDecl", &["TrafoMethod", "InstrMethod"]),
        prod(
            "TrafoMethod",
            vec![
                term("transformation"),
                rf("name", "FreeName"),
                term("("),
                term(")"),
                term("{"),
                rf("rule", "TransformationRule"),
                term("}"),
            ],
        ),
        prod(
            "InstrMethod",
            vec![
                rf("name", "FreeName"),
                term("("),
                term(")"),
                term("{"),
                list0("stmts", "Stmt"),
                term("}"),
            ],
        ),
        iface_s("Stmt", &["LoopStmt", "CallStmt"]),
        prod(
            "LoopStmt",
            vec![
                term("loop"),
                rf("callee", "FreeName"),
                term("("),
                term(")"),
                term(";"),
            ],
        ),
        prod(
            "CallStmt",
            vec![rf("callee", "FreeName"), term("("), term(")"), term(";")],
        ),
        prod(
            "TransformationRule",
            vec![list1("elems", "TopElem"), opt_rf("where", "WhereBlock")],
        ),
        // where blocks and expressions
        prod(
            "WhereBlock",
            vec![
                term("where"),
                term("{"),
                list0("assigns", "Assignment"),
                opt_rf("constraint", "OrExpr"),
                term("}"),
            ],
        ),
        prod(
            "Assignment",
            vec![
                rf("var", "DollarName"),
                term("="),
                rf("value", "OrExpr"),
                opt_term(";"),
            ],
        ),
        prod(
            "OrExpr",
            vec![rf("first", "AndExpr"), list0("rest", "OrTail")],
        ),
        prod("OrTail", vec![term("||"), rf("term", "AndExpr")]),
        prod(
            "AndExpr",
            vec![rf("first", "CmpExpr"), list0("rest", "AndTail")],
        ),
        prod("AndTail", vec![term("&&"), rf("term", "CmpExpr")]),
        prod(
            "CmpExpr",
            vec![rf("left", "UnaryExpr"), opt_rf("tail", "CmpTail")],
        ),
        prod(
            "CmpTail",
            vec![
                choice("op", &["==", "!=", "<=", ">=", "<", ">"]),
                rf("right", "UnaryExpr"),
            ],
        ),
        iface_s("UnaryExpr", &["NotExpr", "PostfixExpr"]),
        prod("NotExpr", vec![term("!"), rf("expr", "UnaryExpr")]),
        prod(
            "PostfixExpr",
            vec![rf("base", "PrimaryExpr"), list0("calls", "CallSuffix")],
        ),
        prod(
            "CallSuffix",
            vec![
                term("."),
                rf("method", "FreeName"),
                term("("),
                opt_rf("arg", "OrExpr"),
                term(")"),
            ],
        ),
        iface_s(
            "PrimaryExpr",
            &["VarRefExpr", "StringLitExpr", "IntLitExpr", "ParenExpr"],
        ),
        prod("VarRefExpr", vec![rf("var", "DollarName")]),
        prod("StringLitExpr", vec![rf("value", "String")]),
        prod("IntLitExpr", vec![rf("value", "Int")]),
        prod(
            "ParenExpr",
            vec![term("("), rf("expr", "OrExpr"), term(")")],
        ),
        // name patterns shared by all derived pattern forms
        iface_s("NamePat", &["NameLit", "NameVar"]),
        prod("NameLit", vec![rf("id", "Name")]),
        prod("NameVar", vec![rf("var", "DollarName")]),
        prod(
            "QNamePat",
            vec![rf("first", "NamePat"), list0("segs", "QNameSeg")],
        ),
        prod("QNameSeg", vec![term("."), rf("seg", "NamePat")]),
        // replacement and negative elements, untyped so they fit any slot
        prod(
            "Repl",
            vec![
                term("[["),
                opt_rf("left", "AnyPat"),
                term(":-"),
                opt_rf("right", "AnyPat"),
                term("]]"),
                opt_term(";"),
            ],
        ),
        prod(
            "Neg",
            vec![term("not"), term("[["), rf("body", "AnyPat"), term("]]")],
        ),
    ];

    for p in base.productions() {
        decls.push(prod(
            &pat_name(&p.name),
            map_pattern_elements(p, base, relaxed.contains(&p.name)),
        ));
        decls.push(prod(
            &var_black_name(&p.name),
            vec![term(&p.name), rf("var", "DollarName"), term(";")],
        ));
        decls.push(prod(
            &var_white_name(&p.name),
            vec![
                term(&p.name),
                rf("var", "DollarName"),
                term("[["),
                rf("body", "AnyPat"),
                term("]]"),
            ],
        ));
        decls.push(iface(
            &elem_name(&p.name),
            vec![
                "Repl".into(),
                "Neg".into(),
                var_white_name(&p.name),
                var_black_name(&p.name),
                pat_name(&p.name),
            ],
        ));
    }

    for i in base.interfaces() {
        decls.push(prod(
            &var_black_name(&i.name),
            vec![term(&i.name), rf("var", "DollarName"), term(";")],
        ));
        decls.push(prod(
            &var_white_name(&i.name),
            vec![
                term(&i.name),
                rf("var", "DollarName"),
                term("[["),
                rf("body", "AnyPat"),
                term("]]"),
            ],
        ));
        let mut alts = vec![
            "Repl".to_string(),
            "Neg".to_string(),
            var_white_name(&i.name),
            var_black_name(&i.name),
        ];
        alts.extend(i.alternatives.iter().map(|a| elem_name(a)));
        decls.push(iface(&elem_name(&i.name), alts));
    }

    // Bare pattern alternatives for white-box bodies and replacement sides.
    // The start symbol's pattern goes last so smaller patterns win.
    let mut any: Vec<String> = base
        .productions()
        .filter(|p| p.name != base.start_symbol)
        .map(|p| pat_name(&p.name))
        .collect();
    if base.production(&base.start_symbol).is_some() {
        any.push(pat_name(&base.start_symbol));
    }
    decls.push(iface("AnyPat", any));

    // Rule-level elements: anything may stand at the top of a rule.
    let mut tops: Vec<String> = base
        .productions()
        .filter(|p| p.name != base.start_symbol)
        .map(|p| elem_name(&p.name))
        .collect();
    tops.extend(
        base.interfaces()
            .filter(|i| i.name != base.start_symbol)
            .map(|i| elem_name(&i.name)),
    );
    tops.push(elem_name(&base.start_symbol));
    decls.push(iface("TopElem", tops));

    decls
}

fn map_pattern_elements(p: &Production, base: &GrammarSpec, relax_lists: bool) -> Vec<RhsElement> {
    let last = p.elements.len().saturating_sub(1);
    p.elements
        .iter()
        .enumerate()
        .map(|(i, elem)| match elem {
            RhsElement::Terminal { text } if i == last && text == ";" => {
                RhsElement::OptTerminal { text: text.clone() }
            }
            RhsElement::Terminal { .. } | RhsElement::OptTerminal { .. } => elem.clone(),
            RhsElement::Choice { .. } => elem.clone(),
            RhsElement::Ref { label, target } => RhsElement::Ref {
                label: label.clone(),
                target: pattern_target(base, target),
            },
            RhsElement::OptRef { label, target } => RhsElement::OptRef {
                label: label.clone(),
                target: pattern_target(base, target),
            },
            RhsElement::List {
                label,
                target,
                min,
                separator,
            } => RhsElement::List {
                label: label.clone(),
                target: pattern_target(base, target),
                min: if relax_lists { 0 } else { *min },
                separator: separator.clone(),
            },
        })
        .collect()
}

fn pattern_target(base: &GrammarSpec, target: &str) -> String {
    match base.symbol(target) {
        Some(SymbolKind::Builtin(Builtin::Name)) | Some(SymbolKind::Builtin(Builtin::FreeName)) => {
            "NamePat".to_string()
        }
        Some(SymbolKind::Builtin(Builtin::QualifiedName)) => "QNamePat".to_string(),
        Some(SymbolKind::Builtin(_)) => target.to_string(),
        _ => elem_name(target),
    }
}
