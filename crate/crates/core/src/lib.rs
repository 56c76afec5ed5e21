//! Transformation engine for component-and-connector architecture models:
//! a grammar-interpreting parser, grammar-to-grammar derivation of a
//! transformation language, and the matching/rewriting machinery behind it.

pub mod adl;
pub mod ast;
pub mod derive;
pub mod engine;
pub mod grammar;
pub mod matcher;
pub mod mcg;
pub mod modexec;
pub mod pretty;
pub mod rewrite;
pub mod rule;
pub mod token;
