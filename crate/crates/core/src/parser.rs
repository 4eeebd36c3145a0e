//! Text formats: the model language and the equivalence configuration.
//!
//! Model files:
//!
//! ```text
//! step = 1;
//! max S = 5;
//! species S = (beta1,1) << S + (beta_1,1) >> S;
//! param k = "0.1";
//! rate beta1 = "k * S * E";
//! system = S[5] <*> E[3] <beta1, beta_1> SE[0];
//! ```
//!
//! Configuration files are `key: value` lines with keys `fast`, `slow`,
//! `delta` and `alias` (`alias: P' = P`). Both formats accept `//` comments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::model::{
    ActionPartition, CompositionTree, ConfigError, Cooperation, EquivConfig, Prefix, Role,
    SpeciesDef, SystemDef, ValidationError,
};

/// Location of a diagnostic. Lines and columns are 1-based, offsets are bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub start: usize,
    pub end: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiagnosticKind {
    Syntax(String),
    Validation(ValidationError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub span: SourceSpan,
    pub kind: DiagnosticKind,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DiagnosticKind::Syntax(msg) => write!(f, "{}: syntax error: {msg}", self.span),
            DiagnosticKind::Validation(e) => write!(f, "{}: {e}", self.span),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}", .diagnostics.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))]
pub struct ParseError {
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    Str(String),
    Sym(&'static str),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(n) => write!(f, "integer {n}"),
            Tok::Str(_) => f.write_str("string"),
            Tok::Sym(s) => write!(f, "`{s}`"),
        }
    }
}

// longest first
const SYMBOLS: &[&str] = &[
    "<*>", "(+)", "(-)", "(.)", "<<", ">>", "=", ";", "(", ")", ",", "+", "[", "]", "<", ">",
];

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line_starts: Vec<usize>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        let mut line_starts = vec![0];
        line_starts.extend(src.match_indices('\n').map(|(i, _)| i + 1));
        Self {
            src,
            pos: 0,
            line_starts,
        }
    }

    fn span(&self, start: usize, end: usize) -> SourceSpan {
        span_at(&self.line_starts, self.src, start, end)
    }

    fn skip_trivia(&mut self) {
        loop {
            let rest = &self.src[self.pos..];
            let trimmed = rest.trim_start();
            self.pos += rest.len() - trimmed.len();
            if trimmed.starts_with("//") {
                self.pos += trimmed.find('\n').unwrap_or(trimmed.len());
            } else {
                break;
            }
        }
    }

    fn ident_end(&self, from: usize) -> Option<usize> {
        let bytes = self.src.as_bytes();
        if from >= bytes.len() || !bytes[from].is_ascii_alphabetic() {
            return None;
        }
        let mut i = from;
        while i < bytes.len()
            && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'\'')
        {
            i += 1;
        }
        // extension suffixes: A{B}, A{B{C}}
        while i < bytes.len() && bytes[i] == b'{' {
            match self.ident_end(i + 1) {
                Some(j) if j < bytes.len() && bytes[j] == b'}' => i = j + 1,
                _ => break,
            }
        }
        Some(i)
    }

    fn tokens(mut self) -> Result<Vec<(Tok, SourceSpan)>, Diagnostic> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            if self.pos >= self.src.len() {
                return Ok(out);
            }
            let start = self.pos;
            let rest = &self.src[start..];
            let c = rest.chars().next().unwrap();
            let tok = if let Some(end) = self.ident_end(start) {
                self.pos = end;
                Tok::Ident(self.src[start..end].to_string())
            } else if c.is_ascii_digit() {
                let len = rest
                    .find(|ch: char| !ch.is_ascii_digit())
                    .unwrap_or(rest.len());
                self.pos += len;
                let n = rest[..len].parse::<u64>().map_err(|_| Diagnostic {
                    span: self.span(start, self.pos),
                    kind: DiagnosticKind::Syntax("integer literal too large".into()),
                })?;
                Tok::Int(n)
            } else if c == '"' {
                let mut value = String::new();
                let mut chars = rest.char_indices().skip(1);
                let mut closed = None;
                while let Some((i, ch)) = chars.next() {
                    match ch {
                        '"' => {
                            closed = Some(i + 1);
                            break;
                        }
                        '\\' => match chars.next() {
                            Some((_, esc)) => value.push(esc),
                            None => break,
                        },
                        _ => value.push(ch),
                    }
                }
                let Some(len) = closed else {
                    return Err(Diagnostic {
                        span: self.span(start, self.src.len()),
                        kind: DiagnosticKind::Syntax("unterminated string".into()),
                    });
                };
                self.pos += len;
                Tok::Str(value)
            } else if let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                self.pos += sym.len();
                Tok::Sym(sym)
            } else {
                return Err(Diagnostic {
                    span: self.span(start, start + c.len_utf8()),
                    kind: DiagnosticKind::Syntax(format!("unexpected character `{c}`")),
                });
            };
            out.push((tok, self.span(start, self.pos)));
        }
    }
}

fn span_at(line_starts: &[usize], src: &str, start: usize, end: usize) -> SourceSpan {
    let line = line_starts.partition_point(|&s| s <= start).max(1);
    let column = src[line_starts[line - 1]..start].chars().count() + 1;
    SourceSpan {
        line,
        column,
        start,
        end,
    }
}

#[derive(Default)]
struct Spans {
    species: BTreeMap<String, SourceSpan>,
    leaves: Vec<(String, SourceSpan)>,
    system: Option<SourceSpan>,
}

struct Parser {
    toks: Vec<(Tok, SourceSpan)>,
    pos: usize,
    eof: SourceSpan,
    diags: Vec<Diagnostic>,
    spans: Spans,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> SourceSpan {
        self.toks.get(self.pos).map(|(_, s)| *s).unwrap_or(self.eof)
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(Diagnostic {
            span: self.here(),
            kind: DiagnosticKind::Syntax(msg.into()),
        })
    }

    fn unexpected<T>(&self, expected: &str) -> PResult<T> {
        match self.peek() {
            Some(t) => self.error(format!("expected {expected}, found {t}")),
            None => self.error(format!("expected {expected}, found end of input")),
        }
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, sym: &str) -> PResult<()> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            self.unexpected(&format!("`{sym}`"))
        }
    }

    fn ident(&mut self) -> PResult<(String, SourceSpan)> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                let span = self.here();
                self.pos += 1;
                Ok((s, span))
            }
            _ => self.unexpected("identifier"),
        }
    }

    fn int(&mut self) -> PResult<u32> {
        match self.peek() {
            Some(Tok::Int(n)) => {
                let n = *n;
                let r = u32::try_from(n).or_else(|_| self.error("integer out of range"));
                self.pos += 1;
                r
            }
            _ => self.unexpected("integer"),
        }
    }

    fn string(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.unexpected("string literal"),
        }
    }

    fn recover(&mut self) {
        while let Some(t) = self.peek() {
            let end = *t == Tok::Sym(";");
            self.pos += 1;
            if end {
                break;
            }
        }
    }
}

#[derive(Default)]
struct Decls {
    step: Option<u32>,
    max: BTreeMap<String, (u32, SourceSpan)>,
    species: Vec<(String, Vec<Prefix>, SourceSpan)>,
    params: BTreeMap<String, String>,
    rates: BTreeMap<String, String>,
    system: Option<CompositionTree>,
}

impl Parser {
    fn file(&mut self) -> Decls {
        let mut decls = Decls::default();
        while self.peek().is_some() {
            if let Err(d) = self.decl(&mut decls) {
                self.diags.push(d);
                self.recover();
            }
        }
        decls
    }

    fn decl(&mut self, decls: &mut Decls) -> PResult<()> {
        let (kw, kw_span) = self.ident()?;
        match kw.as_str() {
            "step" => {
                self.expect_sym("=")?;
                let h = self.int()?;
                if decls.step.replace(h).is_some() {
                    return Err(Diagnostic {
                        span: kw_span,
                        kind: DiagnosticKind::Syntax("step declared more than once".into()),
                    });
                }
            }
            "max" => {
                let (name, span) = self.ident()?;
                self.expect_sym("=")?;
                let m = self.int()?;
                if decls.max.insert(name.clone(), (m, span)).is_some() {
                    return Err(Diagnostic {
                        span,
                        kind: DiagnosticKind::Syntax(format!("max for {name} declared more than once")),
                    });
                }
            }
            "species" => {
                let (name, span) = self.ident()?;
                // recorded before the body so a broken body does not also
                // orphan the species' `max`
                self.spans.species.entry(name.clone()).or_insert(span);
                self.expect_sym("=")?;
                let mut prefixes = vec![self.summand(&name)?];
                while self.eat_sym("+") {
                    prefixes.push(self.summand(&name)?);
                }
                decls.species.push((name, prefixes, span));
            }
            "system" => {
                self.expect_sym("=")?;
                let tree = self.comp()?;
                if decls.system.is_some() {
                    return Err(Diagnostic {
                        span: kw_span,
                        kind: DiagnosticKind::Syntax("system declared more than once".into()),
                    });
                }
                self.spans.system = Some(kw_span);
                decls.system = Some(tree);
            }
            "param" | "rate" => {
                let (name, _) = self.ident()?;
                self.expect_sym("=")?;
                let value = self.string()?;
                let map = if kw == "param" { &mut decls.params } else { &mut decls.rates };
                map.insert(name, value);
            }
            _ => {
                return Err(Diagnostic {
                    span: kw_span,
                    kind: DiagnosticKind::Syntax(format!(
                        "expected one of `step`, `max`, `species`, `param`, `rate`, `system`, found `{kw}`"
                    )),
                })
            }
        }
        self.expect_sym(";")
    }

    fn summand(&mut self, species: &str) -> PResult<Prefix> {
        self.expect_sym("(")?;
        let (action, _) = self.ident()?;
        self.expect_sym(",")?;
        let stoich = self.int()?;
        self.expect_sym(")")?;
        let role = match self.peek() {
            Some(Tok::Sym(s)) => match Role::from_operator(s) {
                Some(r) => r,
                None => return self.unexpected("one of `<<`, `>>`, `(+)`, `(-)`, `(.)`"),
            },
            _ => return self.unexpected("one of `<<`, `>>`, `(+)`, `(-)`, `(.)`"),
        };
        self.pos += 1;
        let (next, span) = self.ident()?;
        if next != species {
            return Err(Diagnostic {
                span,
                kind: DiagnosticKind::Syntax(format!(
                    "summand of {species} must continue as {species}, found {next}"
                )),
            });
        }
        Ok(Prefix::new(action, stoich, role))
    }

    fn comp(&mut self) -> PResult<CompositionTree> {
        let mut tree = self.comp_primary()?;
        loop {
            let coop = if self.eat_sym("<*>") {
                Cooperation::SharedAll
            } else if self.eat_sym("<") {
                let mut set = BTreeSet::new();
                // `<>` is plain parallel composition
                if !self.eat_sym(">") {
                    set.insert(self.ident()?.0);
                    while self.eat_sym(",") {
                        set.insert(self.ident()?.0);
                    }
                    self.expect_sym(">")?;
                }
                Cooperation::Explicit(set)
            } else {
                return Ok(tree);
            };
            let right = self.comp_primary()?;
            tree = CompositionTree::node(tree, coop, right);
        }
    }

    fn comp_primary(&mut self) -> PResult<CompositionTree> {
        if self.eat_sym("(") {
            let t = self.comp()?;
            self.expect_sym(")")?;
            return Ok(t);
        }
        let (name, span) = self.ident()?;
        self.expect_sym("[")?;
        let level = self.int()?;
        self.expect_sym("]")?;
        self.spans.leaves.push((name.clone(), span));
        Ok(CompositionTree::leaf(name, level))
    }
}

/// Parses and validates a model file.
pub fn parse_model(text: &str) -> Result<SystemDef, ParseError> {
    let lexer = Lexer::new(text);
    let eof = lexer.span(text.len(), text.len());
    let line_starts = lexer.line_starts.clone();
    let toks = lexer.tokens().map_err(|d| ParseError {
        diagnostics: vec![d],
    })?;
    let mut p = Parser {
        toks,
        pos: 0,
        eof,
        diags: Vec::new(),
        spans: Spans::default(),
    };
    let decls = p.file();
    let mut diags = p.diags;
    let spans = p.spans;

    let mut species = Vec::new();
    for (name, prefixes, span) in decls.species {
        let max_count = match decls.max.get(&name) {
            Some((m, _)) => *m,
            None => {
                diags.push(Diagnostic {
                    span,
                    kind: DiagnosticKind::Syntax(format!("no `max` declared for species {name}")),
                });
                1
            }
        };
        species.push(SpeciesDef::new(name, prefixes, max_count));
    }
    for (name, (_, span)) in &decls.max {
        if !spans.species.contains_key(name) {
            diags.push(Diagnostic {
                span: *span,
                kind: DiagnosticKind::Syntax(format!("`max` given for undeclared species {name}")),
            });
        }
    }
    let Some(tree) = decls.system else {
        diags.push(Diagnostic {
            span: eof,
            kind: DiagnosticKind::Syntax("missing `system` declaration".into()),
        });
        return Err(ParseError { diagnostics: diags });
    };
    if !diags.is_empty() {
        return Err(ParseError { diagnostics: diags });
    }
    let sys = SystemDef {
        species,
        tree,
        step_size: decls.step.unwrap_or(1),
        params: decls.params,
        rates: decls.rates,
    };
    if let Err(errors) = sys.validate() {
        let fallback = spans
            .system
            .unwrap_or_else(|| span_at(&line_starts, text, 0, 0));
        let mut leaf_seen = BTreeSet::new();
        let mut repeated_spans = BTreeMap::new();
        for (name, span) in &spans.leaves {
            if !leaf_seen.insert(name.clone()) {
                repeated_spans.entry(name.clone()).or_insert(*span);
            }
        }
        let leaf_span = |name: &str| {
            spans
                .leaves
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, s)| *s)
        };
        let diagnostics = errors
            .into_iter()
            .map(|e| {
                let span = match &e {
                    ValidationError::DuplicateAction { species, .. }
                    | ValidationError::ZeroStoichiometry { species, .. } => {
                        spans.species.get(species).copied()
                    }
                    ValidationError::EmptyDefinition(s)
                    | ValidationError::ZeroMaxCount(s)
                    | ValidationError::DuplicateDefinition(s) => spans.species.get(s).copied(),
                    ValidationError::RepeatedSpecies(s) => repeated_spans.get(s).copied(),
                    ValidationError::UndefinedSpecies(s) => leaf_span(s),
                    ValidationError::LevelOutOfRange { species, .. } => leaf_span(species),
                    _ => None,
                }
                .unwrap_or(fallback);
                Diagnostic {
                    span,
                    kind: DiagnosticKind::Validation(e),
                }
            })
            .collect();
        return Err(ParseError { diagnostics });
    }
    Ok(sys)
}

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn render_tree(tree: &CompositionTree, out: &mut String) {
    match tree {
        CompositionTree::Leaf { species, level } => out.push_str(&format!("{species}[{level}]")),
        CompositionTree::Node { left, coop, right } => {
            render_tree(left, out);
            match coop {
                Cooperation::SharedAll => out.push_str(" <*> "),
                Cooperation::Explicit(set) => {
                    out.push_str(" <");
                    out.push_str(&set.iter().cloned().collect::<Vec<_>>().join(", "));
                    out.push_str("> ");
                }
            }
            if matches!(**right, CompositionTree::Node { .. }) {
                out.push('(');
                render_tree(right, out);
                out.push(')');
            } else {
                render_tree(right, out);
            }
        }
    }
}

/// Renders one species declaration (without its `max` line).
pub fn render_species(def: &SpeciesDef) -> String {
    let summands: Vec<String> = def
        .prefixes
        .iter()
        .map(|p| {
            format!(
                "({},{}) {} {}",
                p.action,
                p.stoich,
                p.role.operator(),
                def.name
            )
        })
        .collect();
    format!("species {} = {};", def.name, summands.join(" + "))
}

/// Canonical text of a system; parses back to an equal [`SystemDef`].
pub fn render_model(sys: &SystemDef) -> String {
    let mut out = format!("step = {};\n", sys.step_size);
    for (k, v) in &sys.params {
        out.push_str(&format!("param {k} = {};\n", quote(v)));
    }
    for (k, v) in &sys.rates {
        out.push_str(&format!("rate {k} = {};\n", quote(v)));
    }
    for def in &sys.species {
        out.push_str(&format!("\nmax {} = {};\n", def.name, def.max_count));
        out.push_str(&render_species(def));
        out.push('\n');
    }
    out.push_str("\nsystem = ");
    render_tree(&sys.tree, &mut out);
    out.push_str(";\n");
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Invalid(#[from] ConfigError),
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || "_'{}".contains(c))
}

/// Parses an equivalence configuration.
pub fn parse_config(text: &str) -> Result<EquivConfig, ConfigParseError> {
    let mut fast = BTreeSet::new();
    let mut slow = BTreeSet::new();
    let mut delta = BTreeSet::new();
    let mut aliases = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split("//").next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |message: String| ConfigParseError::Syntax {
            line: line_no,
            message,
        };
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| syntax("expected `key: value`".into()))?;
        let names = |value: &str| -> Result<Vec<String>, ConfigParseError> {
            value
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    if is_ident(s) {
                        Ok(s.to_string())
                    } else {
                        Err(syntax(format!("`{s}` is not a valid name")))
                    }
                })
                .collect()
        };
        match key.trim() {
            "fast" => fast.extend(names(value)?),
            "slow" => slow.extend(names(value)?),
            "delta" => delta.extend(names(value)?),
            "alias" => {
                let (from, to) = value
                    .split_once('=')
                    .ok_or_else(|| syntax("expected `alias: Second = First`".into()))?;
                let (from, to) = (from.trim(), to.trim());
                if !is_ident(from) || !is_ident(to) {
                    return Err(syntax("alias names must be identifiers".into()));
                }
                if aliases.insert(from.to_string(), to.to_string()).is_some() {
                    return Err(ConfigError::DuplicateAlias(from.to_string()).into());
                }
            }
            other => return Err(syntax(format!("unknown key `{other}`"))),
        }
    }
    let partition = ActionPartition::new(fast, slow)?;
    Ok(EquivConfig::new(partition, delta, aliases))
}

/// Canonical text of a configuration.
pub fn render_config(cfg: &EquivConfig) -> String {
    let join = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(", ");
    let mut out = format!(
        "fast: {}\nslow: {}\ndelta: {}\n",
        join(cfg.partition.fast()),
        join(cfg.partition.slow()),
        join(&cfg.delta)
    );
    for (from, to) in &cfg.aliases {
        out.push_str(&format!("alias: {from} = {to}\n"));
    }
    out
}
