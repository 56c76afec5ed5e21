//! Grammar-interpreting parser.
//!
//! The engine walks a [`GrammarSpec`] directly (no generated code) using
//! continuation-passing style, which gives full backtracking: ordered choice
//! tries interface alternatives in declaration order, repetition and optional
//! elements match greedily and retry shorter matches when the rest of the
//! input fails to parse. Errors report the farthest failure position together
//! with everything that was expected there.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::sync::Arc;

use indexmap::IndexMap;
use thiserror::Error;

use crate::ast::{AstNode, FieldValue, Span};
use crate::grammar::{Builtin, GrammarSpec, Production, RhsElement, SymbolKind};
use crate::token::{is_ident_shaped, lex, LexError, Token, TokenKind};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("{file}:{line}:{col}: expected {expected}; found {found}")]
    Syntax {
        file: String,
        line: usize,
        col: usize,
        expected: String,
        found: String,
    },
    #[error("unknown symbol '{0}'")]
    UnknownSymbol(String),
    #[error("cannot parse starting from builtin symbol '{0}'")]
    BuiltinStart(String),
}

/// Parses `text` as an instance of `symbol` (a production or interface of
/// `grammar`), requiring the whole input to be consumed.
pub fn parse_model(
    grammar: &GrammarSpec,
    symbol: &str,
    text: &str,
    file: &str,
) -> Result<AstNode, ParseError> {
    match grammar.symbol(symbol) {
        None => return Err(ParseError::UnknownSymbol(symbol.to_string())),
        Some(SymbolKind::Builtin(_)) => return Err(ParseError::BuiltinStart(symbol.to_string())),
        _ => {}
    }
    let tokens = lex(text, file)?;
    let interp = Interp {
        g: grammar,
        tokens,
        file: Arc::from(file),
        farthest: RefCell::new((0, BTreeSet::new())),
    };
    let total = interp.tokens.len();
    let mut result = None;
    let ok = interp.parse_symbol(symbol, 0, &mut |end, node| {
        if end == total {
            result = Some(node);
            true
        } else {
            interp.fail(end, "end of input");
            false
        }
    });
    if ok {
        Ok(result.expect("successful parse yields a node"))
    } else {
        Err(interp.farthest_error())
    }
}

type Fields = IndexMap<String, FieldValue>;

#[derive(Clone)]
enum Item {
    Node(AstNode),
    Tok(String),
}

struct Interp<'g> {
    g: &'g GrammarSpec,
    tokens: Vec<Token>,
    file: Arc<str>,
    farthest: RefCell<(usize, BTreeSet<String>)>,
}

impl<'g> Interp<'g> {
    fn fail(&self, pos: usize, expected: impl Into<String>) {
        let mut far = self.farthest.borrow_mut();
        let expected = expected.into();
        if pos > far.0 {
            *far = (pos, BTreeSet::from([expected]));
        } else if pos == far.0 {
            far.1.insert(expected);
        }
    }

    fn farthest_error(&self) -> ParseError {
        let (pos, expected) = self.farthest.borrow().clone();
        let (line, col, found) = match self.tokens.get(pos) {
            Some(t) => (t.line, t.col, format!("'{}'", t.render())),
            None => {
                let (line, col) = self
                    .tokens
                    .last()
                    .map(|t| (t.line, t.col + (t.end - t.start)))
                    .unwrap_or((1, 1));
                (line, col, "end of input".to_string())
            }
        };
        let expected = if expected.is_empty() {
            "nothing".to_string()
        } else {
            expected.into_iter().collect::<Vec<_>>().join(", ")
        };
        ParseError::Syntax {
            file: self.file.to_string(),
            line,
            col,
            expected,
            found,
        }
    }

    fn parse_symbol(
        &self,
        name: &str,
        pos: usize,
        k: &mut dyn FnMut(usize, AstNode) -> bool,
    ) -> bool {
        match self.g.symbol(name).expect("validated symbol") {
            SymbolKind::Production(_) => {
                let p = self.g.production(name).expect("production");
                self.parse_seq(p, 0, pos, Fields::new(), &mut |end, fields| {
                    k(end, self.finish_node(p, fields, pos, end))
                })
            }
            SymbolKind::Interface(_) => {
                let decl = self.g.interface(name).expect("interface");
                for alt in &decl.alternatives {
                    if self.parse_symbol(alt, pos, k) {
                        return true;
                    }
                }
                false
            }
            SymbolKind::Builtin(_) => unreachable!("builtins handled by parse_target"),
        }
    }

    fn parse_seq(
        &self,
        p: &Production,
        idx: usize,
        pos: usize,
        fields: Fields,
        k: &mut dyn FnMut(usize, Fields) -> bool,
    ) -> bool {
        match p.elements.get(idx) {
            None => k(pos, fields),
            Some(elem) => self.parse_element(elem, pos, &fields, &mut |p2, f2| {
                self.parse_seq(p, idx + 1, p2, f2, &mut *k)
            }),
        }
    }

    fn parse_element(
        &self,
        elem: &RhsElement,
        pos: usize,
        fields: &Fields,
        k: &mut dyn FnMut(usize, Fields) -> bool,
    ) -> bool {
        match elem {
            RhsElement::Terminal { text } => {
                if self.terminal_at(pos, text) {
                    k(pos + 1, fields.clone())
                } else {
                    self.fail(pos, format!("'{text}'"));
                    false
                }
            }
            RhsElement::OptTerminal { text } => {
                if self.terminal_at(pos, text) && k(pos + 1, fields.clone()) {
                    return true;
                }
                k(pos, fields.clone())
            }
            RhsElement::Choice { label, options } => {
                for opt in options {
                    if self.terminal_at(pos, opt) {
                        let mut f = fields.clone();
                        f.insert(label.clone(), FieldValue::Token(opt.clone()));
                        if k(pos + 1, f) {
                            return true;
                        }
                    } else {
                        self.fail(pos, format!("'{opt}'"));
                    }
                }
                false
            }
            RhsElement::Ref { label, target } => {
                self.parse_target(target, pos, &mut |end, value| {
                    let mut f = fields.clone();
                    f.insert(label.clone(), value);
                    k(end, f)
                })
            }
            RhsElement::OptRef { label, target } => {
                let present = self.parse_target(target, pos, &mut |end, value| {
                    let mut f = fields.clone();
                    f.insert(label.clone(), value);
                    k(end, f)
                });
                if present {
                    return true;
                }
                k(pos, fields.clone())
            }
            RhsElement::List {
                label,
                target,
                min,
                separator,
            } => self.parse_list(
                target,
                *min,
                separator.as_deref(),
                0,
                pos,
                Vec::new(),
                &mut |end, items| {
                    let mut f = fields.clone();
                    f.insert(label.clone(), self.pack_items(target, items));
                    k(end, f)
                },
            ),
        }
    }

    /// Greedy repetition: always try one more item first, settle for the
    /// current list when the longer attempt cannot complete the parse.
    #[allow(clippy::too_many_arguments)]
    fn parse_list(
        &self,
        target: &str,
        min: usize,
        separator: Option<&str>,
        count: usize,
        pos: usize,
        items: Vec<Item>,
        k: &mut dyn FnMut(usize, Vec<Item>) -> bool,
    ) -> bool {
        let item_pos = match separator {
            Some(sep) if count > 0 => {
                if self.terminal_at(pos, sep) {
                    Some(pos + 1)
                } else {
                    self.fail(pos, format!("'{sep}'"));
                    None
                }
            }
            _ => Some(pos),
        };
        if let Some(item_pos) = item_pos {
            let extended = self.parse_item(target, item_pos, &mut |end, item| {
                let mut items2 = items.clone();
                items2.push(item);
                self.parse_list(target, min, separator, count + 1, end, items2, &mut *k)
            });
            if extended {
                return true;
            }
        }
        if count >= min {
            k(pos, items)
        } else {
            false
        }
    }

    fn parse_item(&self, target: &str, pos: usize, k: &mut dyn FnMut(usize, Item) -> bool) -> bool {
        match self.g.symbol(target).expect("validated symbol") {
            SymbolKind::Builtin(b) => {
                self.parse_builtin(b, pos, &mut |end, text| k(end, Item::Tok(text)))
            }
            _ => self.parse_symbol(target, pos, &mut |end, node| k(end, Item::Node(node))),
        }
    }

    fn parse_target(
        &self,
        target: &str,
        pos: usize,
        k: &mut dyn FnMut(usize, FieldValue) -> bool,
    ) -> bool {
        match self.g.symbol(target).expect("validated symbol") {
            SymbolKind::Builtin(b) => {
                self.parse_builtin(b, pos, &mut |end, text| k(end, FieldValue::Token(text)))
            }
            _ => self.parse_symbol(target, pos, &mut |end, node| {
                k(end, FieldValue::Node(Box::new(node)))
            }),
        }
    }

    fn parse_builtin(
        &self,
        b: Builtin,
        pos: usize,
        k: &mut dyn FnMut(usize, String) -> bool,
    ) -> bool {
        let Some(tok) = self.tokens.get(pos) else {
            self.fail(pos, b.name());
            return false;
        };
        match b {
            Builtin::Name => {
                if tok.kind == TokenKind::Name && !self.g.reserved_keywords.contains(&tok.text) {
                    k(pos + 1, tok.text.clone())
                } else {
                    self.fail(pos, b.name());
                    false
                }
            }
            Builtin::FreeName => {
                if tok.kind == TokenKind::Name {
                    k(pos + 1, tok.text.clone())
                } else {
                    self.fail(pos, b.name());
                    false
                }
            }
            Builtin::Int => {
                if tok.kind == TokenKind::Int {
                    k(pos + 1, tok.text.clone())
                } else {
                    self.fail(pos, b.name());
                    false
                }
            }
            Builtin::String => {
                if tok.kind == TokenKind::Str {
                    k(pos + 1, tok.text.clone())
                } else {
                    self.fail(pos, b.name());
                    false
                }
            }
            Builtin::DollarName => {
                if tok.kind == TokenKind::DollarName {
                    k(pos + 1, tok.text.clone())
                } else {
                    self.fail(pos, b.name());
                    false
                }
            }
            Builtin::QualifiedName => {
                if tok.kind == TokenKind::Name && !self.g.reserved_keywords.contains(&tok.text) {
                    self.parse_qname_rest(pos + 1, tok.text.clone(), k)
                } else {
                    self.fail(pos, b.name());
                    false
                }
            }
        }
    }

    /// Greedily extends `acc` with `.Name` segments, retrying shorter forms
    /// when the continuation rejects the longer ones.
    fn parse_qname_rest(
        &self,
        pos: usize,
        acc: String,
        k: &mut dyn FnMut(usize, String) -> bool,
    ) -> bool {
        if self.terminal_at(pos, ".") {
            if let Some(tok) = self.tokens.get(pos + 1) {
                if tok.kind == TokenKind::Name && !self.g.reserved_keywords.contains(&tok.text) {
                    let longer = format!("{acc}.{}", tok.text);
                    if self.parse_qname_rest(pos + 2, longer, k) {
                        return true;
                    }
                }
            }
        }
        k(pos, acc)
    }

    fn terminal_at(&self, pos: usize, text: &str) -> bool {
        let Some(tok) = self.tokens.get(pos) else {
            return false;
        };
        let kind = if is_ident_shaped(text) {
            TokenKind::Name
        } else if text.bytes().next().is_some_and(|b| b.is_ascii_digit())
            || (text.len() > 1
                && (text.starts_with('-') || text.starts_with('+'))
                && text.as_bytes()[1].is_ascii_digit())
        {
            TokenKind::Int
        } else {
            TokenKind::Punct
        };
        tok.kind == kind && tok.text == text
    }

    /// Builds the node: canonical field order (production element order),
    /// absent list fields materialized as empty, span covering the consumed
    /// tokens.
    fn finish_node(&self, p: &Production, mut parsed: Fields, start: usize, end: usize) -> AstNode {
        let mut fields = Fields::new();
        for elem in &p.elements {
            let Some(label) = elem.label() else { continue };
            if let Some(value) = parsed.swap_remove(label) {
                fields.insert(label.to_string(), value);
            } else if let RhsElement::List { target, .. } = elem {
                let empty = if self.g.target_is_token(target) {
                    FieldValue::Tokens(Vec::new())
                } else {
                    FieldValue::Nodes(Vec::new())
                };
                fields.insert(label.to_string(), empty);
            }
        }
        let span = self.tokens.get(start).map(|first| Span {
            file: Arc::clone(&self.file),
            start: first.start,
            end: if end > start {
                self.tokens[end - 1].end
            } else {
                first.start
            },
            line: first.line,
            col: first.col,
        });
        AstNode {
            nonterminal: p.name.clone(),
            fields,
            span,
        }
    }

    fn pack_items(&self, target: &str, items: Vec<Item>) -> FieldValue {
        if self.g.target_is_token(target) {
            FieldValue::Tokens(
                items
                    .into_iter()
                    .map(|i| match i {
                        Item::Tok(t) => t,
                        Item::Node(_) => unreachable!("token list holds tokens"),
                    })
                    .collect(),
            )
        } else {
            FieldValue::Nodes(
                items
                    .into_iter()
                    .map(|i| match i {
                        Item::Node(n) => n,
                        Item::Tok(_) => unreachable!("node list holds nodes"),
                    })
                    .collect(),
            )
        }
    }
}
