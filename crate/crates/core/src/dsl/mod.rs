//! Textual form of behavior trees (`.bt` files).
//!
//! ```text
//! document = { comment | meta } node { comment | meta } ;
//! node     = "(" [ name ":" ] kind { param } { node } ")" ;
//! kind     = "Sequence" | "Fallback" | "CursorSequence"
//!          | "RetryUntilSuccessful"
//!          | "Action" word | "Condition" word ;
//! param    = word "=" value ;
//! name     = word | string ;
//! value    = word | string ;
//! word     = ( letter | digit | "_" | "." | "-" | "+" | "/" ) { ... } ;
//! string   = '"' { char | '\"' | '\\' } '"' ;
//! comment  = "#" { any } newline ;
//! meta     = "#@" { any } newline ;      (* kept as tree metadata *)
//! ```
//!
//! Parameters come before children. Nodes without a name get the id
//! `<parent id>.<child index>`, and the root defaults to `root`.
//! `RetryUntilSuccessful` takes exactly one parameter, `max_attempts`.
//! The parser does not check node vocabulary or arity; that is the job of
//! [`validate`].

mod diff;
mod library;
mod validate;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::bt::{BTNode, BehaviorTree, NodeId, NodeKind, Params};

pub use diff::{apply, diff, DiffError, Edit, TreeDiff};
pub use library::{NodeLibrary, NodeSpec, ParamSpec, ParamType};
pub use validate::{validate, ValidationReport, Violation, ViolationCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {span}: {message}")]
    Syntax { span: Span, message: String },
    #[error("duplicate node name `{name}` at {span}")]
    DuplicateNodeName { name: String, span: Span },
}

type Lexed = (Vec<(Tok, Span)>, Vec<String>);

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Colon,
    Eq,
    Word(String),
    Str(String),
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-' | '+' | '/')
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    line: usize,
    col: usize,
    meta: Vec<String>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.char_indices().peekable(),
            line: 1,
            col: 1,
            meta: Vec::new(),
        }
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn span(&self) -> Span {
        Span {
            line: self.line,
            col: self.col,
        }
    }

    /// Tokens plus the metadata lines met along the way.
    fn tokens(mut self) -> Result<Lexed, ParseError> {
        let mut out = Vec::new();
        while let Some(c) = self.peek() {
            let span = self.span();
            match c {
                c if c.is_whitespace() => {
                    self.bump();
                }
                '#' => {
                    self.bump();
                    let mut text = String::new();
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        text.push(c);
                        self.bump();
                    }
                    if let Some(rest) = text.strip_prefix('@') {
                        self.meta
                            .push(rest.strip_prefix(' ').unwrap_or(rest).to_string());
                    }
                }
                '(' => {
                    self.bump();
                    out.push((Tok::LParen, span));
                }
                ')' => {
                    self.bump();
                    out.push((Tok::RParen, span));
                }
                ':' => {
                    self.bump();
                    out.push((Tok::Colon, span));
                }
                '=' => {
                    self.bump();
                    out.push((Tok::Eq, span));
                }
                '"' => {
                    self.bump();
                    let mut text = String::new();
                    loop {
                        match self.bump() {
                            None => {
                                return Err(ParseError::Syntax {
                                    span,
                                    message: "unterminated string".into(),
                                })
                            }
                            Some('"') => break,
                            Some('\\') => match self.bump() {
                                Some('n') => text.push('\n'),
                                Some(c @ ('"' | '\\')) => text.push(c),
                                _ => {
                                    return Err(ParseError::Syntax {
                                        span: self.span(),
                                        message: "bad escape in string".into(),
                                    })
                                }
                            },
                            Some(c) => text.push(c),
                        }
                    }
                    out.push((Tok::Str(text), span));
                }
                c if is_word_char(c) => {
                    let mut text = String::new();
                    while let Some(c) = self.peek() {
                        if !is_word_char(c) {
                            break;
                        }
                        text.push(c);
                        self.bump();
                    }
                    out.push((Tok::Word(text), span));
                }
                other => {
                    return Err(ParseError::Syntax {
                        span,
                        message: format!("unexpected character `{other}`"),
                    })
                }
            }
        }
        Ok((out, self.meta))
    }
}

struct RawNode {
    name: Option<(String, Span)>,
    span: Span,
    kind: NodeKind,
    children: Vec<RawNode>,
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    end: Span,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|(t, _)| t)
    }

    fn span(&self) -> Span {
        self.toks.get(self.pos).map(|(_, s)| *s).unwrap_or(self.end)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            span: self.span(),
            message: message.into(),
        })
    }

    fn next(&mut self) -> Option<(Tok, Span)> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn word(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    fn node(&mut self) -> Result<RawNode, ParseError> {
        let span = self.span();
        match self.next() {
            Some((Tok::LParen, _)) => {}
            _ => {
                self.pos -= 1;
                return self.err("expected `(`");
            }
        }
        let name = match (self.peek(), self.peek_at(1)) {
            (Some(Tok::Word(n) | Tok::Str(n)), Some(Tok::Colon)) => {
                let n = n.clone();
                let s = self.span();
                self.pos += 2;
                Some((n, s))
            }
            _ => None,
        };
        let kind_span = self.span();
        let keyword = self.word("node kind")?;
        let leaf_name = match keyword.as_str() {
            "Action" | "Condition" => Some(self.word("leaf name after Action/Condition")?),
            "Sequence" | "Fallback" | "CursorSequence" | "RetryUntilSuccessful" => None,
            other => {
                return Err(ParseError::Syntax {
                    span: kind_span,
                    message: format!("unknown node kind `{other}`"),
                })
            }
        };

        let mut params = Params::new();
        while let (Some(Tok::Word(_)), Some(Tok::Eq)) = (self.peek(), self.peek_at(1)) {
            let key_span = self.span();
            let key = self.word("parameter name")?;
            self.pos += 1;
            let value = match self.next() {
                Some((Tok::Word(v) | Tok::Str(v), _)) => v,
                _ => {
                    self.pos -= 1;
                    return self.err(format!("expected value for `{key}`"));
                }
            };
            if params.insert(key.clone(), value).is_some() {
                return Err(ParseError::Syntax {
                    span: key_span,
                    message: format!("parameter `{key}` given twice"),
                });
            }
        }

        let mut children = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::RParen) => {
                    self.pos += 1;
                    break;
                }
                Some(Tok::LParen) => children.push(self.node()?),
                Some(Tok::Word(_)) if self.peek_at(1) == Some(&Tok::Eq) => {
                    return self.err("parameters must come before child nodes")
                }
                None => return self.err("unbalanced parenthesis: missing `)`"),
                _ => return self.err("expected `(` or `)`"),
            }
        }

        let kind = match (keyword.as_str(), leaf_name) {
            ("Action", Some(name)) => NodeKind::Action { name, params },
            ("Condition", Some(name)) => NodeKind::Condition { name, params },
            (kw, None) => {
                let composite = match kw {
                    "Sequence" => NodeKind::Sequence,
                    "Fallback" => NodeKind::Fallback,
                    "CursorSequence" => NodeKind::CursorSequence,
                    _ => {
                        let raw = params.remove("max_attempts").ok_or(ParseError::Syntax {
                            span: kind_span,
                            message: "RetryUntilSuccessful requires max_attempts".into(),
                        })?;
                        let max_attempts = raw.parse::<u32>().map_err(|_| ParseError::Syntax {
                            span: kind_span,
                            message: format!("max_attempts `{raw}` is not a non-negative integer"),
                        })?;
                        NodeKind::RetryUntilSuccessful { max_attempts }
                    }
                };
                if let Some(k) = params.keys().next() {
                    return Err(ParseError::Syntax {
                        span: kind_span,
                        message: format!("{kw} does not take parameter `{k}`"),
                    });
                }
                composite
            }
            _ => unreachable!("leaf name is read exactly for Action/Condition"),
        };

        Ok(RawNode {
            name,
            span,
            kind,
            children,
        })
    }
}

/// Parses a `.bt` document.
pub fn parse(source: &str) -> Result<BehaviorTree, ParseError> {
    let (toks, meta) = Lexer::new(source).tokens()?;
    let end = Span {
        line: source.lines().count().max(1),
        col: source.lines().last().map_or(1, |l| l.chars().count() + 1),
    };
    let mut p = Parser { toks, pos: 0, end };
    if p.peek().is_none() {
        return p.err("empty document");
    }
    let raw = p.node()?;
    if p.peek().is_some() {
        return p.err("trailing input after the root node");
    }

    let mut nodes: BTreeMap<NodeId, BTNode> = BTreeMap::new();
    let root = assign(raw, None, &mut nodes)?;
    Ok(BehaviorTree {
        root,
        nodes,
        metadata: meta.join("\n"),
    })
}

fn assign(
    raw: RawNode,
    derived: Option<String>,
    nodes: &mut BTreeMap<NodeId, BTNode>,
) -> Result<NodeId, ParseError> {
    let (id, span) = match raw.name {
        Some((n, s)) => (n, s),
        None => (derived.unwrap_or_else(|| "root".to_string()), raw.span),
    };
    let id = NodeId::new(id);
    if nodes.contains_key(&id) {
        return Err(ParseError::DuplicateNodeName {
            name: id.0,
            span,
        });
    }
    // reserve the id before the children so they cannot reuse it
    nodes.insert(id.clone(), BTNode::new(id.clone(), raw.kind, Vec::new()));
    let mut children = Vec::with_capacity(raw.children.len());
    for (i, child) in raw.children.into_iter().enumerate() {
        children.push(assign(child, Some(format!("{id}.{i}")), nodes)?);
    }
    nodes.get_mut(&id).expect("just inserted").children = children;
    Ok(id)
}

fn token(s: &str) -> String {
    if !s.is_empty() && s.chars().all(is_word_char) {
        s.to_string()
    } else {
        let mut q = String::with_capacity(s.len() + 2);
        q.push('"');
        for c in s.chars() {
            match c {
                '"' => q.push_str("\\\""),
                '\\' => q.push_str("\\\\"),
                '\n' => q.push_str("\\n"),
                c => q.push(c),
            }
        }
        q.push('"');
        q
    }
}

/// Canonical text: metadata lines first, one node per line, two-space
/// indentation, every node named, parameters sorted by key.
pub fn serialize(tree: &BehaviorTree) -> String {
    let mut out = String::new();
    if !tree.metadata.is_empty() {
        for line in tree.metadata.split('\n') {
            if line.is_empty() {
                out.push_str("#@\n");
            } else {
                let _ = writeln!(out, "#@ {line}");
            }
        }
    }
    write_node(tree, &tree.root, 0, &mut out);
    out.push('\n');
    out
}

fn write_node(tree: &BehaviorTree, id: &NodeId, depth: usize, out: &mut String) {
    let Some(node) = tree.nodes.get(id) else {
        return;
    };
    for _ in 0..depth {
        out.push_str("  ");
    }
    let _ = write!(out, "({}: {}", token(id.as_str()), node.kind.keyword());
    match &node.kind {
        NodeKind::Action { name, params } | NodeKind::Condition { name, params } => {
            let _ = write!(out, " {}", token(name));
            for (k, v) in params {
                let _ = write!(out, " {}={}", token(k), token(v));
            }
        }
        NodeKind::RetryUntilSuccessful { max_attempts } => {
            let _ = write!(out, " max_attempts={max_attempts}");
        }
        _ => {}
    }
    for c in &node.children {
        out.push('\n');
        write_node(tree, c, depth + 1, out);
    }
    out.push(')');
}
