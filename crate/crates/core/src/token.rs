//! Shared lexer for grammar files, models, and transformation modules.
//!
//! All three surface syntaxes are token-compatible by construction: the
//! grammar interpreter matches terminals against the token stream produced
//! here, so one lexer serves every language this workspace handles.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    /// Identifier-shaped word: `[A-Za-z_][A-Za-z0-9_]*`.
    Name,
    /// Signed integer literal, canonicalized through `i64`.
    Int,
    /// Double-quoted string literal; `text` holds the decoded content.
    Str,
    /// `$`-prefixed identifier; `text` holds the identifier without the `$`.
    DollarName,
    /// Punctuation, possibly multi-character (`[[`, `:-`, `->`, ...).
    Punct,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// Byte offset of the first character.
    pub start: usize,
    /// Byte offset one past the last character.
    pub end: usize,
    /// 1-based line of the first character.
    pub line: usize,
    /// 1-based column (in characters) of the first character.
    pub col: usize,
}

impl Token {
    /// Renders the token the way it appears in source, for error messages.
    pub fn render(&self) -> String {
        match self.kind {
            TokenKind::Str => format!("\"{}\"", escape_string(&self.text)),
            TokenKind::DollarName => format!("${}", self.text),
            _ => self.text.clone(),
        }
    }
}

/// Escapes a decoded string back into literal form (without quotes).
pub fn escape_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            _ => out.push(c),
        }
    }
    out
}

#[derive(Debug, Error)]
#[error("{file}:{line}:{col}: {msg}")]
pub struct LexError {
    pub file: String,
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

/// Multi-character punctuation, longest-match-first.
const MULTI_PUNCT: &[&str] = &["[[", "]]", ":-", "->", "==", "!=", "<=", ">=", "&&", "||"];

const SINGLE_PUNCT: &str = "{}();,.:=<>!|*+?-[]";

pub fn lex(text: &str, file: &str) -> Result<Vec<Token>, LexError> {
    Lexer {
        text,
        file,
        bytes: text.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
    }
    .run()
}

struct Lexer<'a> {
    text: &'a str,
    file: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn run(mut self) -> Result<Vec<Token>, LexError> {
        let mut tokens = Vec::new();
        loop {
            self.skip_trivia()?;
            if self.pos >= self.bytes.len() {
                return Ok(tokens);
            }
            tokens.push(self.next_token()?);
        }
    }

    fn error(&self, msg: impl Into<String>) -> LexError {
        LexError {
            file: self.file.to_string(),
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<u8> {
        self.bytes.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let rest = &self.text[self.pos..];
        let c = rest.chars().next()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) -> Result<(), LexError> {
        loop {
            match self.peek() {
                Some(b) if (b as char).is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'/') if self.peek_at(1) == Some(b'/') => {
                    while let Some(b) = self.peek() {
                        if b == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                Some(b'/') if self.peek_at(1) == Some(b'*') => {
                    let (line, col) = (self.line, self.col);
                    self.bump();
                    self.bump();
                    loop {
                        if self.pos >= self.bytes.len() {
                            return Err(LexError {
                                file: self.file.to_string(),
                                line,
                                col,
                                msg: "unterminated block comment".to_string(),
                            });
                        }
                        if self.peek() == Some(b'*') && self.peek_at(1) == Some(b'/') {
                            self.bump();
                            self.bump();
                            break;
                        }
                        self.bump();
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn next_token(&mut self) -> Result<Token, LexError> {
        let (start, line, col) = (self.pos, self.line, self.col);
        let b = self.peek().expect("next_token called at end of input");

        if b == b'"' {
            return self.string_token(start, line, col);
        }
        if b == b'$' {
            self.bump();
            let ident = self.take_ident();
            if ident.is_empty() {
                return Err(self.error("expected identifier after '$'"));
            }
            return Ok(self.make(TokenKind::DollarName, ident, start, line, col));
        }
        if is_ident_start(b) {
            let ident = self.take_ident();
            return Ok(self.make(TokenKind::Name, ident, start, line, col));
        }
        if b.is_ascii_digit() {
            return self.int_token(start, line, col);
        }
        // Multi-character punctuation wins over both single punctuation and
        // sign handling (`->` is never minus + greater-than).
        for mp in MULTI_PUNCT {
            if self.text[self.pos..].starts_with(mp) {
                for _ in 0..mp.len() {
                    self.bump();
                }
                return Ok(self.make(TokenKind::Punct, mp.to_string(), start, line, col));
            }
        }
        // A sign directly followed by a digit is an integer literal.
        if (b == b'-' || b == b'+') && self.peek_at(1).is_some_and(|n| n.is_ascii_digit()) {
            return self.int_token(start, line, col);
        }
        if SINGLE_PUNCT.contains(b as char) {
            self.bump();
            return Ok(self.make(TokenKind::Punct, (b as char).to_string(), start, line, col));
        }
        Err(self.error(format!("unexpected character {:?}", b as char)))
    }

    fn take_ident(&mut self) -> String {
        let start = self.pos;
        while let Some(b) = self.peek() {
            if is_ident_continue(b) {
                self.bump();
            } else {
                break;
            }
        }
        self.text[start..self.pos].to_string()
    }

    fn int_token(&mut self, start: usize, line: usize, col: usize) -> Result<Token, LexError> {
        if matches!(self.peek(), Some(b'-') | Some(b'+')) {
            self.bump();
        }
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.bump();
        }
        let raw = &self.text[start..self.pos];
        let value: i64 = raw
            .parse()
            .map_err(|_| self.error(format!("integer literal '{raw}' out of range")))?;
        Ok(self.make(TokenKind::Int, value.to_string(), start, line, col))
    }

    fn string_token(&mut self, start: usize, line: usize, col: usize) -> Result<Token, LexError> {
        self.bump(); // opening quote
        let mut content = String::new();
        loop {
            let Some(c) = self.bump() else {
                return Err(LexError {
                    file: self.file.to_string(),
                    line,
                    col,
                    msg: "unterminated string literal".to_string(),
                });
            };
            match c {
                '"' => break,
                '\\' => match self.bump() {
                    Some('"') => content.push('"'),
                    Some('\\') => content.push('\\'),
                    Some(other) => {
                        return Err(self.error(format!("unsupported escape '\\{other}'")));
                    }
                    None => {
                        return Err(LexError {
                            file: self.file.to_string(),
                            line,
                            col,
                            msg: "unterminated string literal".to_string(),
                        });
                    }
                },
                '\n' => return Err(self.error("newline inside string literal")),
                other => content.push(other),
            }
        }
        Ok(self.make(TokenKind::Str, content, start, line, col))
    }

    fn make(&self, kind: TokenKind, text: String, start: usize, line: usize, col: usize) -> Token {
        Token {
            kind,
            text,
            start,
            end: self.pos,
            line,
            col,
        }
    }
}

pub fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

pub fn is_ident_continue(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// True when `text` is shaped like an identifier (and so would lex as a
/// `Name` token). Used to classify terminals and collect reserved keywords.
pub fn is_ident_shaped(text: &str) -> bool {
    let bytes = text.as_bytes();
    !bytes.is_empty() && is_ident_start(bytes[0]) && bytes.iter().all(|&b| is_ident_continue(b))
}
