//! Grammar model: the in-memory representation of a context-free grammar
//! that the parsing engine interprets directly (no code generation).

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::token::is_ident_shaped;

/// Built-in lexical nonterminals available to every grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    /// Identifier that is not a reserved keyword of the active grammar.
    Name,
    /// Identifier, reserved keywords permitted.
    FreeName,
    Int,
    String,
    /// `Name ("." Name)*`, stored joined with dots.
    QualifiedName,
    /// `$`-prefixed identifier, stored without the `$`.
    DollarName,
}

impl Builtin {
    pub fn from_name(name: &str) -> Option<Builtin> {
        Some(match name {
            "Name" => Builtin::Name,
            "FreeName" => Builtin::FreeName,
            "Int" => Builtin::Int,
            "String" => Builtin::String,
            "QualifiedName" => Builtin::QualifiedName,
            "DollarName" => Builtin::DollarName,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Name => "Name",
            Builtin::FreeName => "FreeName",
            Builtin::Int => "Int",
            Builtin::String => "String",
            Builtin::QualifiedName => "QualifiedName",
            Builtin::DollarName => "DollarName",
        }
    }
}

/// One element on the right-hand side of a production.
#[derive(Debug, Clone, PartialEq)]
pub enum RhsElement {
    /// Literal terminal that must appear.
    Terminal { text: String },
    /// Literal terminal that may be omitted.
    OptTerminal { text: String },
    /// One of several literal alternatives, recorded under `label`.
    Choice { label: String, options: Vec<String> },
    /// Mandatory reference to a nonterminal or builtin.
    Ref { label: String, target: String },
    /// Optional reference.
    OptRef { label: String, target: String },
    /// Repetition (`*` when `min == 0`, `+` when `min == 1`), optionally
    /// separated by a literal (`(x:X || ",")*`).
    List {
        label: String,
        target: String,
        min: usize,
        separator: Option<String>,
    },
}

impl RhsElement {
    pub fn label(&self) -> Option<&str> {
        match self {
            RhsElement::Terminal { .. } | RhsElement::OptTerminal { .. } => None,
            RhsElement::Choice { label, .. }
            | RhsElement::Ref { label, .. }
            | RhsElement::OptRef { label, .. }
            | RhsElement::List { label, .. } => Some(label),
        }
    }

    pub fn target(&self) -> Option<&str> {
        match self {
            RhsElement::Ref { target, .. }
            | RhsElement::OptRef { target, .. }
            | RhsElement::List { target, .. } => Some(target),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Production {
    pub name: String,
    pub elements: Vec<RhsElement>,
}

/// An interface declaration: ordered alternatives tried in PEG priority order.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceDecl {
    pub name: String,
    pub alternatives: Vec<String>,
}

/// A named declaration in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    Production(Production),
    Interface(InterfaceDecl),
}

impl Decl {
    pub fn name(&self) -> &str {
        match self {
            Decl::Production(p) => &p.name,
            Decl::Interface(i) => &i.name,
        }
    }
}

/// What a symbol name resolves to inside a grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    Production(usize),
    Interface(usize),
    Builtin(Builtin),
}

#[derive(Debug, Clone)]
pub struct GrammarSpec {
    pub name: String,
    pub decls: Vec<Decl>,
    pub start_symbol: String,
    pub reserved_keywords: BTreeSet<String>,
    symbols: BTreeMap<String, SymbolKind>,
    nullable: BTreeSet<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum GrammarError {
    #[error("grammar has no declarations")]
    Empty,
    #[error("duplicate declaration of '{0}'")]
    Duplicate(String),
    #[error("declaration '{0}' shadows the builtin nonterminal of the same name")]
    ShadowsBuiltin(String),
    #[error("unknown symbol '{target}' referenced from '{context}'")]
    UnknownSymbol { context: String, target: String },
    #[error("interface '{context}' lists builtin '{target}' as an alternative")]
    BuiltinAlternative { context: String, target: String },
    #[error("terminal {text:?} in '{context}' does not lex as a single token")]
    BadTerminal { context: String, text: String },
    #[error("grammar is left-recursive through '{0}'")]
    LeftRecursive(String),
    #[error("duplicate field label '{label}' in production '{context}'")]
    DuplicateLabel { context: String, label: String },
}

impl GrammarSpec {
    /// Builds and validates a grammar from named declarations. The start
    /// symbol is the first declaration.
    pub fn new(name: String, decls: Vec<Decl>) -> Result<GrammarSpec, GrammarError> {
        let start_symbol = decls.first().ok_or(GrammarError::Empty)?.name().to_string();

        let mut symbols = BTreeMap::new();
        for (i, decl) in decls.iter().enumerate() {
            let declared = decl.name().to_string();
            if Builtin::from_name(&declared).is_some() {
                return Err(GrammarError::ShadowsBuiltin(declared));
            }
            let kind = match decl {
                Decl::Production(_) => SymbolKind::Production(i),
                Decl::Interface(_) => SymbolKind::Interface(i),
            };
            if symbols.insert(declared.clone(), kind).is_some() {
                return Err(GrammarError::Duplicate(declared));
            }
        }

        let mut g = GrammarSpec {
            name,
            decls,
            start_symbol,
            reserved_keywords: BTreeSet::new(),
            symbols,
            nullable: BTreeSet::new(),
        };
        g.validate()?;
        g.reserved_keywords = g.collect_keywords();
        g.nullable = g.compute_nullable();
        g.check_left_recursion()?;
        Ok(g)
    }

    pub fn symbol(&self, name: &str) -> Option<SymbolKind> {
        self.symbols
            .get(name)
            .copied()
            .or_else(|| Builtin::from_name(name).map(SymbolKind::Builtin))
    }

    pub fn production(&self, name: &str) -> Option<&Production> {
        match self.symbol(name)? {
            SymbolKind::Production(i) => match &self.decls[i] {
                Decl::Production(p) => Some(p),
                Decl::Interface(_) => unreachable!(),
            },
            _ => None,
        }
    }

    pub fn interface(&self, name: &str) -> Option<&InterfaceDecl> {
        match self.symbol(name)? {
            SymbolKind::Interface(i) => match &self.decls[i] {
                Decl::Interface(d) => Some(d),
                Decl::Production(_) => unreachable!(),
            },
            _ => None,
        }
    }

    pub fn productions(&self) -> impl Iterator<Item = &Production> {
        self.decls.iter().filter_map(|d| match d {
            Decl::Production(p) => Some(p),
            Decl::Interface(_) => None,
        })
    }

    pub fn interfaces(&self) -> impl Iterator<Item = &InterfaceDecl> {
        self.decls.iter().filter_map(|d| match d {
            Decl::Interface(i) => Some(i),
            Decl::Production(_) => None,
        })
    }

    pub fn is_nullable(&self, symbol: &str) -> bool {
        self.nullable.contains(symbol)
    }

    /// True when a field with this target holds token values rather than
    /// child nodes.
    pub fn target_is_token(&self, target: &str) -> bool {
        matches!(self.symbol(target), Some(SymbolKind::Builtin(_)))
    }

    /// All production names conforming to `symbol`: the production itself,
    /// or every production transitively reachable through interface
    /// alternatives, in declaration order of the interfaces.
    pub fn implementors(&self, symbol: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut stack = vec![symbol.to_string()];
        let mut seen = BTreeSet::new();
        while let Some(s) = stack.pop() {
            if !seen.insert(s.clone()) {
                continue;
            }
            match self.symbol(&s) {
                Some(SymbolKind::Production(_)) => out.push(s),
                Some(SymbolKind::Interface(_)) => {
                    let alts = &self.interface(&s).unwrap().alternatives;
                    // push in reverse so declaration order pops first
                    for a in alts.iter().rev() {
                        stack.push(a.clone());
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// True when a node of production `nonterminal` may stand where `slot`
    /// is expected (identity, or membership in the interface closure).
    pub fn conforms(&self, nonterminal: &str, slot: &str) -> bool {
        if nonterminal == slot {
            return true;
        }
        match self.symbol(slot) {
            Some(SymbolKind::Interface(_)) => {
                self.implementors(slot).iter().any(|p| p == nonterminal)
            }
            _ => false,
        }
    }

    fn validate(&self) -> Result<(), GrammarError> {
        for decl in &self.decls {
            match decl {
                Decl::Production(p) => {
                    let mut labels = BTreeSet::new();
                    for elem in &p.elements {
                        if let Some(label) = elem.label() {
                            if !labels.insert(label.to_string()) {
                                return Err(GrammarError::DuplicateLabel {
                                    context: p.name.clone(),
                                    label: label.to_string(),
                                });
                            }
                        }
                        match elem {
                            RhsElement::Terminal { text } | RhsElement::OptTerminal { text } => {
                                self.check_terminal(&p.name, text)?;
                            }
                            RhsElement::Choice { options, .. } => {
                                for text in options {
                                    self.check_terminal(&p.name, text)?;
                                }
                            }
                            RhsElement::Ref { target, .. } | RhsElement::OptRef { target, .. } => {
                                self.check_target(&p.name, target)?;
                            }
                            RhsElement::List {
                                target, separator, ..
                            } => {
                                self.check_target(&p.name, target)?;
                                if let Some(sep) = separator {
                                    self.check_terminal(&p.name, sep)?;
                                }
                            }
                        }
                    }
                }
                Decl::Interface(i) => {
                    for alt in &i.alternatives {
                        match self.symbol(alt) {
                            None => {
                                return Err(GrammarError::UnknownSymbol {
                                    context: i.name.clone(),
                                    target: alt.clone(),
                                })
                            }
                            Some(SymbolKind::Builtin(_)) => {
                                return Err(GrammarError::BuiltinAlternative {
                                    context: i.name.clone(),
                                    target: alt.clone(),
                                })
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn check_target(&self, context: &str, target: &str) -> Result<(), GrammarError> {
        if self.symbol(target).is_none() {
            return Err(GrammarError::UnknownSymbol {
                context: context.to_string(),
                target: target.to_string(),
            });
        }
        Ok(())
    }

    fn check_terminal(&self, context: &str, text: &str) -> Result<(), GrammarError> {
        let ok = match crate::token::lex(text, "<terminal>") {
            Ok(toks) => toks.len() == 1 && !text.trim().is_empty(),
            Err(_) => false,
        };
        if !ok {
            return Err(GrammarError::BadTerminal {
                context: context.to_string(),
                text: text.to_string(),
            });
        }
        Ok(())
    }

    fn collect_keywords(&self) -> BTreeSet<String> {
        let mut kws = BTreeSet::new();
        for p in self.productions() {
            for elem in &p.elements {
                match elem {
                    RhsElement::Terminal { text } | RhsElement::OptTerminal { text } => {
                        if is_ident_shaped(text) {
                            kws.insert(text.clone());
                        }
                    }
                    RhsElement::Choice { options, .. } => {
                        for text in options {
                            if is_ident_shaped(text) {
                                kws.insert(text.clone());
                            }
                        }
                    }
                    RhsElement::List {
                        separator: Some(sep),
                        ..
                    } if is_ident_shaped(sep) => {
                        kws.insert(sep.clone());
                    }
                    _ => {}
                }
            }
        }
        kws
    }

    fn compute_nullable(&self) -> BTreeSet<String> {
        let mut nullable: BTreeSet<String> = BTreeSet::new();
        loop {
            let mut changed = false;
            for decl in &self.decls {
                if nullable.contains(decl.name()) {
                    continue;
                }
                let is_nullable = match decl {
                    Decl::Production(p) => p.elements.iter().all(|e| match e {
                        RhsElement::Terminal { .. } | RhsElement::Choice { .. } => false,
                        RhsElement::OptTerminal { .. } | RhsElement::OptRef { .. } => true,
                        RhsElement::Ref { target, .. } => nullable.contains(target),
                        RhsElement::List { target, min, .. } => {
                            *min == 0 || nullable.contains(target)
                        }
                    }),
                    Decl::Interface(i) => i.alternatives.iter().any(|a| nullable.contains(a)),
                };
                if is_nullable {
                    nullable.insert(decl.name().to_string());
                    changed = true;
                }
            }
            if !changed {
                return nullable;
            }
        }
    }

    fn check_left_recursion(&self) -> Result<(), GrammarError> {
        // edge N -> M when M can be invoked at N's starting position
        let mut edges: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for decl in &self.decls {
            let mut targets = Vec::new();
            match decl {
                Decl::Production(p) => {
                    for elem in &p.elements {
                        match elem {
                            RhsElement::Terminal { .. } | RhsElement::Choice { .. } => break,
                            RhsElement::OptTerminal { .. } => continue,
                            RhsElement::Ref { target, .. } => {
                                targets.push(target.as_str());
                                if !self.nullable.contains(target) {
                                    break;
                                }
                            }
                            RhsElement::OptRef { target, .. } => {
                                targets.push(target.as_str());
                            }
                            RhsElement::List { target, min, .. } => {
                                targets.push(target.as_str());
                                if *min > 0 && !self.nullable.contains(target) {
                                    break;
                                }
                            }
                        }
                    }
                }
                Decl::Interface(i) => {
                    targets.extend(i.alternatives.iter().map(|a| a.as_str()));
                }
            }
            edges.insert(decl.name(), targets);
        }

        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Visiting,
            Done,
        }
        fn dfs<'a>(
            node: &'a str,
            edges: &BTreeMap<&'a str, Vec<&'a str>>,
            marks: &mut BTreeMap<&'a str, Mark>,
        ) -> Result<(), GrammarError> {
            match marks.get(node) {
                Some(Mark::Done) => return Ok(()),
                Some(Mark::Visiting) => return Err(GrammarError::LeftRecursive(node.to_string())),
                None => {}
            }
            marks.insert(node, Mark::Visiting);
            if let Some(next) = edges.get(node) {
                for t in next {
                    if edges.contains_key(t) {
                        dfs(t, edges, marks)?;
                    }
                }
            }
            marks.insert(node, Mark::Done);
            Ok(())
        }

        let mut marks = BTreeMap::new();
        let names: Vec<&str> = self.decls.iter().map(|d| d.name()).collect();
        for name in names {
            dfs(name, &edges, &mut marks)?;
        }
        Ok(())
    }
}
