//! Generic AST produced by the grammar-interpreting parser.
//!
//! Nodes are shaped entirely by the grammar: a node records which production
//! built it and a field map keyed by the production's element labels. Token
//! positions (`Name`, `Int`, ...) store strings; nonterminal positions store
//! child nodes. Structural equality ignores source spans.

use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;

#[derive(Debug, Clone)]
pub struct Span {
    pub file: Arc<str>,
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    Node(Box<AstNode>),
    Nodes(Vec<AstNode>),
    Token(String),
    Tokens(Vec<String>),
}

impl FieldValue {
    pub fn as_node(&self) -> Option<&AstNode> {
        match self {
            FieldValue::Node(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_nodes(&self) -> Option<&[AstNode]> {
        match self {
            FieldValue::Nodes(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_token(&self) -> Option<&str> {
        match self {
            FieldValue::Token(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_tokens(&self) -> Option<&[String]> {
        match self {
            FieldValue::Tokens(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AstNode {
    pub nonterminal: String,
    pub fields: IndexMap<String, FieldValue>,
    pub span: Option<Span>,
}

impl PartialEq for AstNode {
    fn eq(&self, other: &Self) -> bool {
        self.nonterminal == other.nonterminal && self.fields == other.fields
    }
}

impl Eq for AstNode {}

impl AstNode {
    pub fn new(nonterminal: impl Into<String>) -> AstNode {
        AstNode {
            nonterminal: nonterminal.into(),
            fields: IndexMap::new(),
            span: None,
        }
    }

    pub fn field(&self, name: &str) -> Option<&FieldValue> {
        self.fields.get(name)
    }

    pub fn child(&self, name: &str) -> Option<&AstNode> {
        self.field(name).and_then(FieldValue::as_node)
    }

    pub fn children(&self, name: &str) -> &[AstNode] {
        self.field(name)
            .and_then(FieldValue::as_nodes)
            .unwrap_or(&[])
    }

    pub fn token(&self, name: &str) -> Option<&str> {
        self.field(name).and_then(FieldValue::as_token)
    }

    pub fn tokens(&self, name: &str) -> &[String] {
        self.field(name)
            .and_then(FieldValue::as_tokens)
            .map(|t| t as _)
            .unwrap_or(&[])
    }

    /// Direct child nodes in field order.
    pub fn child_nodes(&self) -> impl Iterator<Item = &AstNode> {
        self.fields.values().flat_map(|v| match v {
            FieldValue::Node(n) => std::slice::from_ref(n.as_ref()).iter(),
            FieldValue::Nodes(ns) => ns.iter(),
            _ => [].iter(),
        })
    }

    /// Pre-order traversal including `self`.
    pub fn walk(&self) -> Walk<'_> {
        Walk { stack: vec![self] }
    }

    /// Strips spans from this node and every descendant.
    pub fn strip_spans(&mut self) {
        self.span = None;
        for value in self.fields.values_mut() {
            match value {
                FieldValue::Node(n) => n.strip_spans(),
                FieldValue::Nodes(ns) => ns.iter_mut().for_each(AstNode::strip_spans),
                _ => {}
            }
        }
    }

    /// Resolves a path rooted at this node.
    pub fn at_path(&self, path: &NodePath) -> Option<&AstNode> {
        let mut cur = self;
        for step in &path.0 {
            let field = cur.field(&step.field)?;
            cur = match (field, step.index) {
                (FieldValue::Node(n), None) => n,
                (FieldValue::Nodes(ns), Some(i)) => ns.get(i)?,
                _ => return None,
            };
        }
        Some(cur)
    }

    pub fn at_path_mut(&mut self, path: &NodePath) -> Option<&mut AstNode> {
        let mut cur = self;
        for step in &path.0 {
            let field = cur.fields.get_mut(&step.field)?;
            cur = match (field, step.index) {
                (FieldValue::Node(n), None) => n,
                (FieldValue::Nodes(ns), Some(i)) => ns.get_mut(i)?,
                _ => return None,
            };
        }
        Some(cur)
    }

    /// Pre-order list of (path, node) pairs, `self` first with the empty path.
    pub fn indexed_nodes(&self) -> Vec<(NodePath, &AstNode)> {
        let mut out = Vec::new();
        fn go<'a>(
            node: &'a AstNode,
            path: &mut Vec<PathStep>,
            out: &mut Vec<(NodePath, &'a AstNode)>,
        ) {
            out.push((NodePath(path.clone()), node));
            for (label, value) in &node.fields {
                match value {
                    FieldValue::Node(n) => {
                        path.push(PathStep {
                            field: label.clone(),
                            index: None,
                        });
                        go(n, path, out);
                        path.pop();
                    }
                    FieldValue::Nodes(ns) => {
                        for (i, n) in ns.iter().enumerate() {
                            path.push(PathStep {
                                field: label.clone(),
                                index: Some(i),
                            });
                            go(n, path, out);
                            path.pop();
                        }
                    }
                    _ => {}
                }
            }
        }
        go(self, &mut Vec::new(), &mut out);
        out
    }
}

pub struct Walk<'a> {
    stack: Vec<&'a AstNode>,
}

impl<'a> Iterator for Walk<'a> {
    type Item = &'a AstNode;

    fn next(&mut self) -> Option<&'a AstNode> {
        let node = self.stack.pop()?;
        let children: Vec<&AstNode> = node.child_nodes().collect();
        self.stack.extend(children.into_iter().rev());
        Some(node)
    }
}

/// One step down the tree: a field label plus a list index for list fields.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathStep {
    pub field: String,
    pub index: Option<usize>,
}

/// Location of a node relative to the model root. Paths identify bindings:
/// two variables are the same element exactly when their paths are equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct NodePath(pub Vec<PathStep>);

impl NodePath {
    pub fn root() -> NodePath {
        NodePath(Vec::new())
    }

    pub fn child(&self, field: &str, index: Option<usize>) -> NodePath {
        let mut steps = self.0.clone();
        steps.push(PathStep {
            field: field.to_string(),
            index,
        });
        NodePath(steps)
    }

    pub fn parent(&self) -> Option<(NodePath, &PathStep)> {
        let last = self.0.last()?;
        Some((NodePath(self.0[..self.0.len() - 1].to_vec()), last))
    }

    pub fn starts_with(&self, prefix: &NodePath) -> bool {
        self.0.len() >= prefix.0.len() && self.0[..prefix.0.len()] == prefix.0[..]
    }

    /// True when `self` is a proper descendant of `prefix`.
    pub fn is_proper_descendant_of(&self, prefix: &NodePath) -> bool {
        self.0.len() > prefix.0.len() && self.starts_with(prefix)
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "<root>");
        }
        let mut first = true;
        for step in &self.0 {
            if !first {
                write!(f, ".")?;
            }
            first = false;
            match step.index {
                Some(i) => write!(f, "{}[{}]", step.field, i)?,
                None => write!(f, "{}", step.field)?,
            }
        }
        Ok(())
    }
}
