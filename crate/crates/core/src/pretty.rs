//! Grammar-driven pretty printer.
//!
//! Rendering walks the production that built each node, so the printer works
//! for any grammar the engine can parse. Layout is token-based: braces open
//! indented blocks with one `;`-terminated item per line, commas separate
//! inline lists, and `(`/`.` bind tightly to their neighbors.

use thiserror::Error;

use crate::ast::{AstNode, FieldValue};
use crate::grammar::{Builtin, GrammarSpec, RhsElement, SymbolKind};
use crate::token::escape_string;

#[derive(Debug, Error, PartialEq)]
pub enum PrintError {
    #[error("cannot print node: unknown production '{0}'")]
    UnknownProduction(String),
    #[error("cannot print '{nonterminal}': missing mandatory field '{field}'")]
    MissingField { nonterminal: String, field: String },
    #[error("cannot print '{nonterminal}': field '{field}' holds the wrong kind of value")]
    WrongFieldKind { nonterminal: String, field: String },
}

/// Pretty-prints `node` (and everything below it) according to `grammar`.
/// Output is deterministic and ends with a newline when non-empty.
pub fn pretty_print(grammar: &GrammarSpec, node: &AstNode) -> Result<String, PrintError> {
    let mut p = Printer {
        g: grammar,
        out: String::new(),
        indent: 0,
        at_line_start: true,
        glue_next: false,
    };
    p.node(node)?;
    if !p.at_line_start {
        p.out.push('\n');
    }
    Ok(p.out)
}

struct Printer<'g> {
    g: &'g GrammarSpec,
    out: String,
    indent: usize,
    at_line_start: bool,
    glue_next: bool,
}

impl<'g> Printer<'g> {
    fn node(&mut self, node: &AstNode) -> Result<(), PrintError> {
        let Some(prod) = self.g.production(&node.nonterminal) else {
            return Err(PrintError::UnknownProduction(node.nonterminal.clone()));
        };
        for elem in &prod.elements {
            match elem {
                RhsElement::Terminal { text } | RhsElement::OptTerminal { text } => {
                    self.token(text);
                }
                RhsElement::Choice { label, .. } => {
                    let value = node.token(label).ok_or_else(|| PrintError::MissingField {
                        nonterminal: node.nonterminal.clone(),
                        field: label.clone(),
                    })?;
                    self.token(value);
                }
                RhsElement::Ref { label, target } => {
                    let value = node.field(label).ok_or_else(|| PrintError::MissingField {
                        nonterminal: node.nonterminal.clone(),
                        field: label.clone(),
                    })?;
                    self.single(node, label, target, value)?;
                }
                RhsElement::OptRef { label, target } => {
                    if let Some(value) = node.field(label) {
                        self.single(node, label, target, value)?;
                    }
                }
                RhsElement::List {
                    label,
                    target,
                    separator,
                    ..
                } => {
                    let is_token = self.g.target_is_token(target);
                    match (node.field(label), is_token) {
                        (Some(FieldValue::Nodes(items)), false) => {
                            for (i, item) in items.iter().enumerate() {
                                if i > 0 {
                                    if let Some(sep) = separator {
                                        self.token(sep);
                                    }
                                }
                                self.node(item)?;
                            }
                        }
                        (Some(FieldValue::Tokens(items)), true) => {
                            for (i, item) in items.iter().enumerate() {
                                if i > 0 {
                                    if let Some(sep) = separator {
                                        self.token(sep);
                                    }
                                }
                                self.builtin_token(target, item);
                            }
                        }
                        (None, _) => {} // treated as empty
                        _ => {
                            return Err(PrintError::WrongFieldKind {
                                nonterminal: node.nonterminal.clone(),
                                field: label.clone(),
                            })
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn single(
        &mut self,
        node: &AstNode,
        label: &str,
        target: &str,
        value: &FieldValue,
    ) -> Result<(), PrintError> {
        match (self.g.symbol(target), value) {
            (Some(SymbolKind::Builtin(_)), FieldValue::Token(text)) => {
                self.builtin_token(target, text);
                Ok(())
            }
            (Some(SymbolKind::Builtin(_)), _) | (_, FieldValue::Token(_)) => {
                Err(PrintError::WrongFieldKind {
                    nonterminal: node.nonterminal.clone(),
                    field: label.to_string(),
                })
            }
            (_, FieldValue::Node(child)) => self.node(child),
            _ => Err(PrintError::WrongFieldKind {
                nonterminal: node.nonterminal.clone(),
                field: label.to_string(),
            }),
        }
    }

    fn builtin_token(&mut self, target: &str, text: &str) {
        match Builtin::from_name(target) {
            Some(Builtin::String) => self.token(&format!("\"{}\"", escape_string(text))),
            Some(Builtin::DollarName) => self.token(&format!("${text}")),
            _ => self.token(text),
        }
    }

    fn token(&mut self, text: &str) {
        match text {
            "{" => {
                self.word("{");
                self.newline();
                self.indent += 1;
            }
            "}" => {
                self.indent = self.indent.saturating_sub(1);
                if !self.at_line_start {
                    self.newline();
                }
                self.word("}");
                self.newline();
            }
            ";" => {
                self.word(";");
                self.newline();
            }
            _ => self.word(text),
        }
    }

    fn word(&mut self, text: &str) {
        if self.at_line_start {
            for _ in 0..self.indent {
                self.out.push_str("  ");
            }
        } else if !self.glue_next && !matches!(text, ";" | "," | ")" | "." | "}") {
            self.out.push(' ');
        }
        self.out.push_str(text);
        self.at_line_start = false;
        self.glue_next = matches!(text, "(" | ".");
    }

    fn newline(&mut self) {
        self.out.push('\n');
        self.at_line_start = true;
        self.glue_next = false;
    }
}
