//! Reader and writer for the `.mcg` grammar file format.
//!
//! ```text
//! grammar CnC {
//!   Model = components:ComponentDef+ ;
//!   PortDecl = dir:("in"|"out") type:Name? name:Name ;
//!   PortSection = "port" (decls:PortDecl || ",")+ ";" ;
//!   interface Element = PortSection | Connector ;
//! }
//! ```
//!
//! The first declaration is the start symbol. Suffixes `?`, `*`, `+` mark
//! optional and repeated references; `(label:Target || "sep")` declares a
//! separated list; `label:("a"|"b")` a keyword choice.

use thiserror::Error;

use crate::grammar::{Decl, GrammarError, GrammarSpec, InterfaceDecl, Production, RhsElement};
use crate::token::{escape_string, lex, LexError, Token, TokenKind};

#[derive(Debug, Error)]
pub enum McgError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("{file}:{line}:{col}: expected {expected}, found {found}")]
    Unexpected {
        file: String,
        line: usize,
        col: usize,
        expected: String,
        found: String,
    },
    #[error(transparent)]
    Invalid(#[from] GrammarError),
}

/// Parses `.mcg` text into a validated grammar.
pub fn parse_grammar(text: &str, file: &str) -> Result<GrammarSpec, McgError> {
    let tokens = lex(text, file)?;
    let mut p = McgParser {
        tokens,
        pos: 0,
        file,
    };
    let g = p.grammar()?;
    Ok(g)
}

struct McgParser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    file: &'a str,
}

impl<'a> McgParser<'a> {
    fn grammar(&mut self) -> Result<GrammarSpec, McgError> {
        self.expect_name("grammar")?;
        let name = self.any_name("grammar name")?;
        self.expect_punct("{")?;
        let mut decls = Vec::new();
        while !self.at_punct("}") {
            decls.push(self.decl()?);
        }
        self.expect_punct("}")?;
        if self.pos != self.tokens.len() {
            return Err(self.err_here("end of file"));
        }
        Ok(GrammarSpec::new(name, decls)?)
    }

    fn decl(&mut self) -> Result<Decl, McgError> {
        if self.at_name("interface") {
            self.pos += 1;
            let name = self.any_name("interface name")?;
            self.expect_punct("=")?;
            let mut alternatives = vec![self.any_name("alternative")?];
            while self.at_punct("|") {
                self.pos += 1;
                alternatives.push(self.any_name("alternative")?);
            }
            self.expect_punct(";")?;
            return Ok(Decl::Interface(InterfaceDecl { name, alternatives }));
        }
        let name = self.any_name("production name")?;
        self.expect_punct("=")?;
        let mut elements = Vec::new();
        while !self.at_punct(";") {
            elements.push(self.element()?);
        }
        self.expect_punct(";")?;
        Ok(Decl::Production(Production { name, elements }))
    }

    fn element(&mut self) -> Result<RhsElement, McgError> {
        // "text" or "text"?
        if let Some(text) = self.try_string() {
            if self.at_punct("?") {
                self.pos += 1;
                return Ok(RhsElement::OptTerminal { text });
            }
            return Ok(RhsElement::Terminal { text });
        }
        // ( label:Target || "sep" )* or +
        if self.at_punct("(") {
            self.pos += 1;
            let label = self.any_name("list label")?;
            self.expect_punct(":")?;
            let target = self.any_name("list target")?;
            self.expect_punct("||")?;
            let separator = self
                .try_string()
                .ok_or_else(|| self.err_here("separator string"))?;
            self.expect_punct(")")?;
            let min = if self.at_punct("+") {
                self.pos += 1;
                1
            } else if self.at_punct("*") {
                self.pos += 1;
                0
            } else {
                return Err(self.err_here("'*' or '+' after separated list"));
            };
            return Ok(RhsElement::List {
                label,
                target,
                min,
                separator: Some(separator),
            });
        }
        // label:Target[? * +]  or  label:("a"|"b")
        let label = self.any_name("element label")?;
        self.expect_punct(":")?;
        if self.at_punct("(") {
            self.pos += 1;
            let mut options = vec![self
                .try_string()
                .ok_or_else(|| self.err_here("choice option string"))?];
            while self.at_punct("|") {
                self.pos += 1;
                options.push(
                    self.try_string()
                        .ok_or_else(|| self.err_here("choice option string"))?,
                );
            }
            self.expect_punct(")")?;
            return Ok(RhsElement::Choice { label, options });
        }
        let target = self.any_name("element target")?;
        if self.at_punct("?") {
            self.pos += 1;
            Ok(RhsElement::OptRef { label, target })
        } else if self.at_punct("*") {
            self.pos += 1;
            Ok(RhsElement::List {
                label,
                target,
                min: 0,
                separator: None,
            })
        } else if self.at_punct("+") {
            self.pos += 1;
            Ok(RhsElement::List {
                label,
                target,
                min: 1,
                separator: None,
            })
        } else {
            Ok(RhsElement::Ref { label, target })
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn at_punct(&self, text: &str) -> bool {
        self.peek()
            .is_some_and(|t| t.kind == TokenKind::Punct && t.text == text)
    }

    fn at_name(&self, text: &str) -> bool {
        self.peek()
            .is_some_and(|t| t.kind == TokenKind::Name && t.text == text)
    }

    fn try_string(&mut self) -> Option<String> {
        let t = self.peek()?;
        if t.kind == TokenKind::Str {
            let text = t.text.clone();
            self.pos += 1;
            Some(text)
        } else {
            None
        }
    }

    fn any_name(&mut self, what: &str) -> Result<String, McgError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Name => {
                let text = t.text.clone();
                self.pos += 1;
                Ok(text)
            }
            _ => Err(self.err_here(what)),
        }
    }

    fn expect_name(&mut self, text: &str) -> Result<(), McgError> {
        if self.at_name(text) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err_here(&format!("'{text}'")))
        }
    }

    fn expect_punct(&mut self, text: &str) -> Result<(), McgError> {
        if self.at_punct(text) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err_here(&format!("'{text}'")))
        }
    }

    fn err_here(&self, expected: &str) -> McgError {
        let (line, col, found) = match self.peek() {
            Some(t) => (t.line, t.col, t.render()),
            None => {
                let (l, c) = self
                    .tokens
                    .last()
                    .map(|t| (t.line, t.col + 1))
                    .unwrap_or((1, 1));
                (l, c, "end of file".to_string())
            }
        };
        McgError::Unexpected {
            file: self.file.to_string(),
            line,
            col,
            expected: expected.to_string(),
            found,
        }
    }
}

/// Renders a grammar back into `.mcg` text. `parse_grammar` on the output
/// yields a structurally equal grammar.
pub fn emit_grammar_file(g: &GrammarSpec) -> String {
    let mut out = format!("grammar {} {{\n", g.name);
    for decl in &g.decls {
        match decl {
            Decl::Production(p) => {
                out.push_str(&format!("  {} =", p.name));
                for elem in &p.elements {
                    out.push(' ');
                    out.push_str(&emit_element(elem));
                }
                out.push_str(" ;\n");
            }
            Decl::Interface(i) => {
                out.push_str(&format!(
                    "  interface {} = {} ;\n",
                    i.name,
                    i.alternatives.join(" | ")
                ));
            }
        }
    }
    out.push_str("}\n");
    out
}

fn quoted(text: &str) -> String {
    format!("\"{}\"", escape_string(text))
}

fn emit_element(elem: &RhsElement) -> String {
    match elem {
        RhsElement::Terminal { text } => quoted(text),
        RhsElement::OptTerminal { text } => format!("{}?", quoted(text)),
        RhsElement::Choice { label, options } => {
            let opts: Vec<String> = options.iter().map(|o| quoted(o)).collect();
            format!("{label}:({})", opts.join("|"))
        }
        RhsElement::Ref { label, target } => format!("{label}:{target}"),
        RhsElement::OptRef { label, target } => format!("{label}:{target}?"),
        RhsElement::List {
            label,
            target,
            min,
            separator,
        } => {
            let suffix = if *min == 0 { "*" } else { "+" };
            match separator {
                Some(sep) => format!("({label}:{target} || {}){suffix}", quoted(sep)),
                None => format!("{label}:{target}{suffix}"),
            }
        }
    }
}
