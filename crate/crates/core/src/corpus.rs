//! Benchmark corpus loading and the structural parsing every transform needs.
//!
//! Problems come from line-delimited JSON in the public HumanEval release
//! format (optionally gzip-compressed). Only `def` headers and docstrings are
//! parsed; the parser is a small recursive-descent reader over the header
//! grammar, not a full language parser.

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("record {line} ({task_id}): missing field `{field}`")]
    MissingField {
        line: usize,
        task_id: String,
        field: &'static str,
    },
    #[error("record {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("no top-level `def` found")]
    NoFunction,
    #[error("unbalanced brackets in signature starting at byte {0}")]
    Unbalanced(usize),
    #[error("unterminated triple-quoted string starting at byte {0}")]
    UnterminatedString(usize),
    #[error("invalid signature: {0}")]
    Invalid(String),
}

/// One benchmark task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeProblem {
    pub task_id: String,
    pub prompt: String,
    pub entry_point: String,
    pub canonical_solution: String,
    pub test: String,
}

impl CodeProblem {
    /// Signature of the entry-point function.
    ///
    /// Some prompts define helpers before the function to complete, so this
    /// picks the top-level `def` named `entry_point`, falling back to the last
    /// one.
    pub fn signature(&self) -> Result<FunctionSignature, ParseError> {
        let mut all = parse_all_signatures(&self.prompt)?;
        match all.iter().rposition(|s| s.name == self.entry_point) {
            Some(i) => Ok(all.swap_remove(i)),
            None => all.pop().ok_or(ParseError::NoFunction),
        }
    }

    pub fn solution_lines(&self) -> SolutionLines {
        SolutionLines::from_source(&self.canonical_solution)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKind {
    Regular,
    /// `*args`
    VarPositional,
    /// `**kwargs`
    VarKeyword,
    /// Bare `*` separator.
    KeywordOnlyMarker,
    /// Bare `/` separator.
    PositionalOnlyMarker,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameter {
    /// Empty for the bare `*` and `/` markers.
    pub name: String,
    pub kind: ParamKind,
    pub annotation: Option<String>,
    pub default: Option<String>,
}

impl Parameter {
    pub fn is_named(&self) -> bool {
        !matches!(
            self.kind,
            ParamKind::KeywordOnlyMarker | ParamKind::PositionalOnlyMarker
        )
    }

    fn render_bare(&self) -> String {
        let prefix = match self.kind {
            ParamKind::Regular => "",
            ParamKind::VarPositional => "*",
            ParamKind::VarKeyword => "**",
            ParamKind::KeywordOnlyMarker => return "*".to_string(),
            ParamKind::PositionalOnlyMarker => return "/".to_string(),
        };
        match &self.default {
            Some(d) => format!("{prefix}{}={d}", self.name),
            None => format!("{prefix}{}", self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSignature {
    pub name: String,
    pub params: Vec<Parameter>,
    pub return_annotation: Option<String>,
    /// The `def ...:` header exactly as written, possibly spanning lines.
    pub raw_text: String,
    /// Byte offset of `raw_text` inside the parsed source.
    pub offset: usize,
}

impl FunctionSignature {
    /// Names of the named parameters in source order.
    pub fn param_names(&self) -> Vec<&str> {
        self.params
            .iter()
            .filter(|p| p.is_named())
            .map(|p| p.name.as_str())
            .collect()
    }

    /// Byte offset just past the header's closing `:`.
    pub fn end(&self) -> usize {
        self.offset + self.raw_text.len()
    }
}

/// Canonical-solution lines with trailing blank lines removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolutionLines {
    pub lines: Vec<String>,
}

impl SolutionLines {
    pub fn from_source(source: &str) -> Self {
        let mut lines: Vec<String> = source.lines().map(str::to_string).collect();
        while lines.last().is_some_and(|l| l.trim().is_empty()) {
            lines.pop();
        }
        Self { lines }
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// First `n` lines, each newline-terminated.
    pub fn prefix(&self, n: usize) -> String {
        self.lines[..n.min(self.lines.len())]
            .iter()
            .map(|l| format!("{l}\n"))
            .collect()
    }

    /// Lines from `n` onwards, each newline-terminated.
    pub fn suffix(&self, n: usize) -> String {
        self.lines[n.min(self.lines.len())..]
            .iter()
            .map(|l| format!("{l}\n"))
            .collect()
    }

    pub fn join(&self) -> String {
        self.lines.join("\n")
    }
}

#[derive(Deserialize)]
struct RawRecord {
    task_id: Option<String>,
    prompt: Option<String>,
    entry_point: Option<String>,
    canonical_solution: Option<String>,
    test: Option<String>,
}

/// Loads every record of a HumanEval-format file, in file order.
pub fn load_problems(path: &Path) -> Result<Vec<CodeProblem>, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let bytes = std::fs::read(path).map_err(io_err)?;
    let reader: Box<dyn Read> = if bytes.starts_with(&[0x1f, 0x8b]) {
        Box::new(GzDecoder::new(&bytes[..]))
    } else {
        Box::new(&bytes[..])
    };
    parse_problems(BufReader::new(reader)).map_err(|e| match e {
        CorpusError::Io { source, .. } => io_err(source),
        other => other,
    })
}

pub fn parse_problems<R: BufRead>(reader: R) -> Result<Vec<CodeProblem>, CorpusError> {
    let mut problems = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: String::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let task_id = raw.task_id.clone().unwrap_or_else(|| "<unknown>".into());
        let missing = |field| CorpusError::MissingField {
            line: line_no,
            task_id: task_id.clone(),
            field,
        };
        let problem = CodeProblem {
            task_id: raw.task_id.clone().ok_or_else(|| missing("task_id"))?,
            prompt: raw.prompt.ok_or_else(|| missing("prompt"))?,
            entry_point: raw.entry_point.ok_or_else(|| missing("entry_point"))?,
            canonical_solution: raw
                .canonical_solution
                .ok_or_else(|| missing("canonical_solution"))?,
            test: raw.test.ok_or_else(|| missing("test"))?,
        };
        problems.push(problem);
    }
    Ok(problems)
}

/// Problems whose canonical solution has strictly more than `n` lines.
pub fn filter_by_solution_length(problems: &[CodeProblem], n: usize) -> Vec<CodeProblem> {
    problems
        .iter()
        .filter(|p| p.solution_lines().len() > n)
        .cloned()
        .collect()
}

/// Parses the last top-level `def` header in `source`.
pub fn parse_signature(source: &str) -> Result<FunctionSignature, ParseError> {
    parse_all_signatures(source)?
        .pop()
        .ok_or(ParseError::NoFunction)
}

/// Parses every top-level (column-0) `def` header in `source`, in order.
pub fn parse_all_signatures(source: &str) -> Result<Vec<FunctionSignature>, ParseError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for line in source.split_inclusive('\n') {
        let is_def = line.starts_with("def ") || line.starts_with("async def ");
        if is_def && offset >= out.last().map_or(0, FunctionSignature::end) {
            out.push(HeaderParser::new(source, offset).parse()?);
        }
        offset += line.len();
    }
    Ok(out)
}

/// `def name(p1, p2=d, ...):` with every annotation removed.
pub fn strip_annotations(sig: &FunctionSignature) -> String {
    let params: Vec<String> = sig.params.iter().map(Parameter::render_bare).collect();
    format!("def {}({}):", sig.name, params.join(", "))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Docstring {
    /// Byte span of the whole literal, prefix and quotes included.
    pub start: usize,
    pub end: usize,
    pub body: String,
}

/// Docstring of the last top-level function in `prompt`, if it has one.
pub fn extract_docstring(prompt: &str) -> Result<Option<Docstring>, ParseError> {
    let sig = parse_signature(prompt)?;
    docstring_after(prompt, sig.end())
}

/// Docstring that opens the body starting at byte `from` (just past a header).
pub fn docstring_after(source: &str, from: usize) -> Result<Option<Docstring>, ParseError> {
    let bytes = source.as_bytes();
    let mut i = from;
    // Skip whitespace and comment lines before the first statement.
    loop {
        while i < bytes.len() && (bytes[i] as char).is_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        break;
    }
    let start = i;
    while i < bytes.len() && matches!(bytes[i], b'r' | b'R' | b'u' | b'U') && i - start < 2 {
        i += 1;
    }
    let rest = &source[i..];
    let quote = if rest.starts_with("\"\"\"") {
        "\"\"\""
    } else if rest.starts_with("'''") {
        "'''"
    } else {
        return Ok(None);
    };
    let body_start = i + 3;
    let raw = source[start..i].contains(['r', 'R']);
    let mut j = body_start;
    while j + 3 <= bytes.len() {
        if !raw && bytes[j] == b'\\' {
            j += 2;
            continue;
        }
        if source[j..].starts_with(quote) {
            return Ok(Some(Docstring {
                start,
                end: j + 3,
                body: source[body_start..j].to_string(),
            }));
        }
        j += 1;
    }
    Err(ParseError::UnterminatedString(start))
}

struct HeaderParser<'a> {
    src: &'a str,
    pos: usize,
    start: usize,
}

impl<'a> HeaderParser<'a> {
    fn new(src: &'a str, start: usize) -> Self {
        Self {
            src,
            pos: start,
            start,
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c == '\\' && self.src[self.pos + 1..].starts_with('\n') {
                self.pos += 2;
            } else if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else if c == '#' {
                while self.peek().is_some_and(|c| c != '\n') {
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.src[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), ParseError> {
        self.skip_ws();
        if self.eat(s) {
            Ok(())
        } else {
            Err(ParseError::Invalid(format!(
                "expected `{s}` at byte {}",
                self.pos
            )))
        }
    }

    fn identifier(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let begin = self.pos;
        match self.peek() {
            Some(c) if c == '_' || c.is_alphabetic() => {
                self.bump();
            }
            _ => {
                return Err(ParseError::Invalid(format!(
                    "expected identifier at byte {begin}"
                )))
            }
        }
        while self
            .peek()
            .is_some_and(|c| c == '_' || c.is_alphanumeric())
        {
            self.bump();
        }
        Ok(self.src[begin..self.pos].to_string())
    }

    fn parse(mut self) -> Result<FunctionSignature, ParseError> {
        self.eat("async");
        self.expect("def")?;
        let name = self.identifier()?;
        self.expect("(")?;
        self.check_balanced()?;
        let mut params: Vec<Parameter> = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                None => return Err(ParseError::Unbalanced(self.start)),
                Some(')') => {
                    self.bump();
                    break;
                }
                _ => {}
            }
            let param = self.parameter()?;
            if param.is_named() && params.iter().any(|p| p.name == param.name) {
                return Err(ParseError::Invalid(format!(
                    "duplicate parameter `{}`",
                    param.name
                )));
            }
            params.push(param);
            self.skip_ws();
            match self.bump() {
                Some(',') => continue,
                Some(')') => break,
                None => return Err(ParseError::Unbalanced(self.start)),
                Some(c) => {
                    return Err(ParseError::Invalid(format!(
                        "unexpected `{c}` at byte {}",
                        self.pos - 1
                    )))
                }
            }
        }
        self.skip_ws();
        let return_annotation = if self.eat("->") {
            Some(self.expression(&[':'])?)
        } else {
            None
        };
        self.expect(":")?;
        Ok(FunctionSignature {
            name,
            params,
            return_annotation,
            raw_text: self.src[self.start..self.pos].to_string(),
            offset: self.start,
        })
    }

    /// Scans from just after the opening parenthesis to its partner, so that a
    /// missing `)` is reported as such rather than as a stray token.
    fn check_balanced(&self) -> Result<(), ParseError> {
        let mut depth = 1usize;
        let mut chars = self.src[self.pos..].chars();
        while let Some(c) = chars.next() {
            match c {
                '(' | '[' | '{' => depth += 1,
                ')' | ']' | '}' => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(());
                    }
                }
                '"' | '\'' => {
                    for d in chars.by_ref() {
                        if d == c || d == '\n' {
                            break;
                        }
                    }
                }
                _ => {}
            }
        }
        Err(ParseError::Unbalanced(self.start))
    }

    fn parameter(&mut self) -> Result<Parameter, ParseError> {
        self.skip_ws();
        let kind = if self.eat("**") {
            ParamKind::VarKeyword
        } else if self.eat("*") {
            self.skip_ws();
            if matches!(self.peek(), Some(',') | Some(')')) {
                ParamKind::KeywordOnlyMarker
            } else {
                ParamKind::VarPositional
            }
        } else if self.eat("/") {
            ParamKind::PositionalOnlyMarker
        } else {
            ParamKind::Regular
        };
        if matches!(
            kind,
            ParamKind::KeywordOnlyMarker | ParamKind::PositionalOnlyMarker
        ) {
            return Ok(Parameter {
                name: String::new(),
                kind,
                annotation: None,
                default: None,
            });
        }
        let name = self.identifier()?;
        self.skip_ws();
        let annotation = if self.eat(":") {
            Some(self.expression(&[',', ')', '='])?)
        } else {
            None
        };
        self.skip_ws();
        let default = if self.eat("=") {
            Some(self.expression(&[',', ')'])?)
        } else {
            None
        };
        Ok(Parameter {
            name,
            kind,
            annotation,
            default,
        })
    }

    /// Reads expression text up to a top-level terminator, honouring nested
    /// brackets and string literals. Returns the trimmed text.
    fn expression(&mut self, terminators: &[char]) -> Result<String, ParseError> {
        let begin = self.pos;
        let mut stack: Vec<char> = Vec::new();
        loop {
            let Some(c) = self.peek() else {
                return Err(ParseError::Unbalanced(self.start));
            };
            if stack.is_empty() && terminators.contains(&c) {
                // `==` and `->` inside an annotation are not terminators.
                let next = self.src[self.pos + c.len_utf8()..].chars().next();
                if !(c == '=' && next == Some('=')) {
                    break;
                }
                self.pos += 2;
                continue;
            }
            match c {
                '(' | '[' | '{' => stack.push(c),
                ')' | ']' | '}' => {
                    let open = match c {
                        ')' => '(',
                        ']' => '[',
                        _ => '{',
                    };
                    if stack.pop() != Some(open) {
                        return Err(ParseError::Unbalanced(self.start));
                    }
                }
                '"' | '\'' => {
                    self.string_literal(c)?;
                    continue;
                }
                _ => {}
            }
            self.bump();
        }
        let text = self.src[begin..self.pos].trim();
        if text.is_empty() {
            return Err(ParseError::Invalid(format!("empty expression at byte {begin}")));
        }
        Ok(collapse_whitespace(text))
    }

    fn string_literal(&mut self, quote: char) -> Result<(), ParseError> {
        let begin = self.pos;
        let triple: String = std::iter::repeat_n(quote, 3).collect();
        let delim = if self.src[self.pos..].starts_with(&triple) {
            triple
        } else {
            quote.to_string()
        };
        self.pos += delim.len();
        loop {
            match self.peek() {
                None => return Err(ParseError::UnterminatedString(begin)),
                Some('\\') => {
                    self.bump();
                    self.bump();
                }
                Some('\n') if delim.len() == 1 => {
                    return Err(ParseError::UnterminatedString(begin))
                }
                Some(_) if self.src[self.pos..].starts_with(&delim) => {
                    self.pos += delim.len();
                    return Ok(());
                }
                Some(_) => {
                    self.bump();
                }
            }
        }
    }
}

/// Collapses line breaks (and the indentation after them) inside
/// multi-line annotations and defaults to single spaces.
fn collapse_whitespace(text: &str) -> String {
    if !text.contains('\n') {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    for (i, part) in text.split('\n').enumerate() {
        let part = if i == 0 { part.trim_end() } else { part.trim() };
        if part.is_empty() {
            continue;
        }
        if !out.is_empty() && !out.ends_with(['(', '[', '{']) && !part.starts_with([')', ']', '}']) {
            out.push(' ');
        }
        out.push_str(part);
    }
    out
}

/// Replaces whole-identifier occurrences of `from` with `to`.
pub fn replace_identifier(text: &str, from: &str, to: &str) -> String {
    let is_ident = |c: char| c == '_' || c.is_alphanumeric();
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    let mut prev: Option<char> = None;
    while let Some(idx) = rest.find(from) {
        let before = rest[..idx].chars().next_back().or(prev);
        let after = rest[idx + from.len()..].chars().next();
        out.push_str(&rest[..idx]);
        if before.is_some_and(is_ident) || after.is_some_and(is_ident) {
            out.push_str(from);
        } else {
            out.push_str(to);
        }
        prev = from.chars().next_back();
        rest = &rest[idx + from.len()..];
    }
    out.push_str(rest);
    out
}
