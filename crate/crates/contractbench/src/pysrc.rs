//! Lexical scanning of Python source.
//!
//! The extractor and the codec only need statement-level structure: logical
//! lines, `def`/`class` blocks with their indentation, docstrings, and the
//! identifier tokens inside a region. A full parse is not required — the
//! subject runtime (CPython) is the authority on whether code actually
//! compiles — but the scanner must be exact about strings, comments, bracket
//! nesting, and line continuations so that every extracted slice is verbatim
//! source text.
//!
//! Dynamic constructs (calls through variables, `getattr`, star imports) are
//! deliberately invisible at this level; only syntactically resolvable names
//! are reported.

use std::ops::Range;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScanError {
    #[error("unterminated string literal starting at byte {0}")]
    UnterminatedString(usize),
    #[error("unbalanced bracket at byte {0}")]
    UnbalancedBracket(usize),
}

/// One logical line: a statement possibly spanning several physical lines
/// via brackets, backslash continuations, or triple-quoted strings.
#[derive(Debug, Clone)]
pub struct Line {
    /// Byte offset of the first character of the first physical line.
    pub start: usize,
    /// Byte offset of the first non-whitespace character.
    pub content_start: usize,
    /// Byte offset one past the last character (excludes the newline).
    pub end: usize,
    /// Indentation width with tabs expanded to 8 columns.
    pub indent: usize,
    /// True for lines that contain no code (blank or comment-only).
    pub blank: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefKind {
    Function,
    Class,
}

/// A `def` or `class` block found by the scanner.
#[derive(Debug, Clone)]
pub struct DefInfo {
    pub name: String,
    pub kind: DefKind,
    pub is_async: bool,
    /// Index of the header logical line.
    pub header_line: usize,
    /// Byte offset of the colon that closes the header.
    pub header_colon: usize,
    /// Logical-line index range of the body (header excluded, trailing
    /// blank lines excluded). Empty when the body sits on the header line.
    pub body_lines: Range<usize>,
    /// Index into `defs` of the enclosing `def`/`class`, if any.
    pub parent: Option<usize>,
    pub indent: usize,
}

/// An identifier occurrence inside a scanned region.
#[derive(Debug, Clone, PartialEq)]
pub struct Ident<'a> {
    pub name: &'a str,
    pub pos: usize,
    /// The identifier is invoked: the next non-space token is `(`.
    pub called: bool,
    /// Identifier directly to the left of a `.` before this one
    /// (e.g. `self` in `self.helper`). `None` for plain names.
    pub receiver: Option<&'a str>,
}

/// Scanned view of one Python source file.
pub struct SourceFile<'a> {
    src: &'a str,
    lines: Vec<Line>,
    defs: Vec<DefInfo>,
}

pub fn scan(src: &str) -> Result<SourceFile<'_>, ScanError> {
    let lines = split_logical_lines(src)?;
    let defs = collect_defs(src, &lines);
    Ok(SourceFile { src, lines, defs })
}

impl<'a> SourceFile<'a> {
    pub fn src(&self) -> &'a str {
        self.src
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn defs(&self) -> &[DefInfo] {
        &self.defs
    }

    /// Text of a logical line without leading indentation.
    pub fn line_text(&self, idx: usize) -> &'a str {
        let line = &self.lines[idx];
        &self.src[line.content_start..line.end]
    }

    /// All defs (any nesting depth) with the given name.
    pub fn defs_named(&self, name: &str) -> Vec<&DefInfo> {
        self.defs.iter().filter(|d| d.name == name).collect()
    }

    /// Module-level defs in source order.
    pub fn top_level_defs(&self) -> impl Iterator<Item = &DefInfo> {
        self.defs.iter().filter(|d| d.parent.is_none())
    }

    /// Direct children of a def (methods of a class, nested functions).
    pub fn children_of(&self, def_index: usize) -> impl Iterator<Item = &DefInfo> {
        self.defs
            .iter()
            .filter(move |d| d.parent == Some(def_index))
    }

    pub fn def_index(&self, def: &DefInfo) -> usize {
        self.defs
            .iter()
            .position(|d| std::ptr::eq(d, def))
            .expect("def belongs to this file")
    }

    /// Verbatim header text from the `def`/`class` keyword through the colon.
    pub fn signature_text(&self, def: &DefInfo) -> &'a str {
        let line = &self.lines[def.header_line];
        &self.src[line.content_start..=def.header_colon]
    }

    /// Docstring of a def: the literal span (including quotes) and the
    /// cleaned inner text.
    pub fn docstring(&self, def: &DefInfo) -> Option<Docstring<'a>> {
        let first = def.body_lines.clone().next()?;
        let text = self.line_text(first);
        let literal = string_literal_span(text)?;
        // The whole statement must be that single string literal.
        if !text[literal.end..].trim().is_empty() {
            return None;
        }
        let line = &self.lines[first];
        let span = line.content_start + literal.start..line.content_start + literal.end;
        Some(Docstring {
            span,
            line: first,
            text: clean_docstring(&text[literal.clone()]),
        })
    }

    /// Byte span covering a def's body (start of first body line to end of
    /// last body line). `None` when the body is inline on the header.
    pub fn body_span(&self, def: &DefInfo) -> Option<Range<usize>> {
        let first = def.body_lines.clone().next()?;
        let last = def.body_lines.end - 1;
        Some(self.lines[first].start..self.lines[last].end)
    }

    /// The file with the def's body removed; signature and docstring stay.
    pub fn erase_def_body(&self, def: &DefInfo) -> String {
        let keep_end = match self.docstring(def) {
            Some(doc) => self.lines[doc.line].end,
            None => match def.body_lines.clone().next() {
                Some(_) => self.src[..=def.header_colon].len(),
                None => {
                    // Inline body: truncate after the colon.
                    let mut out = String::new();
                    out.push_str(&self.src[..=def.header_colon]);
                    let resume = self.lines[def.header_line].end;
                    out.push_str(&self.src[resume..]);
                    return out;
                }
            },
        };
        let resume = if def.body_lines.end == 0 {
            keep_end
        } else {
            let last = &self.lines[def.body_lines.end - 1];
            line_end_with_newline(self.src, last.end)
        };
        let keep_end = line_end_with_newline(self.src, keep_end);
        let mut out = String::new();
        out.push_str(&self.src[..keep_end]);
        out.push_str(&self.src[resume..]);
        out
    }

    /// Signature plus docstring, verbatim, with no body — the stub form used
    /// in prompts and callee summaries.
    pub fn stub_text(&self, def: &DefInfo) -> String {
        let header = &self.lines[def.header_line];
        match self.docstring(def) {
            Some(doc) => {
                let end = self.lines[doc.line].end;
                self.src[header.start..end].to_string()
            }
            None => self.src[header.start..=def.header_colon].to_string(),
        }
    }

    /// Identifier tokens within a byte span, skipping strings, comments,
    /// and numeric literals.
    pub fn idents_in(&self, span: Range<usize>) -> Vec<Ident<'a>> {
        idents_in_text(self.src, span)
    }

    /// Names bound by top-level `import` / `from .. import` statements,
    /// paired with the verbatim statement text.
    pub fn top_level_imports(&self) -> Vec<ImportStmt<'a>> {
        let mut imports = Vec::new();
        for (idx, line) in self.lines.iter().enumerate() {
            if line.blank || line.indent > 0 {
                continue;
            }
            let text = self.line_text(idx);
            if let Some(names) = import_bound_names(text) {
                imports.push(ImportStmt { text, names });
            }
        }
        imports
    }

    /// Top-level simple assignments (`NAME = ...` or `NAME: T = ...`),
    /// paired with the verbatim statement text.
    pub fn top_level_assignments(&self) -> Vec<(String, &'a str)> {
        self.assignments_at(|line| line.indent == 0)
    }

    /// Class-level simple assignments for the class body of `class_def`.
    pub fn class_assignments(&self, class_def: &DefInfo) -> Vec<(String, &'a str)> {
        let body = class_def.body_lines.clone();
        let indent = self.first_body_indent(class_def);
        self.lines
            .iter()
            .enumerate()
            .filter(|(idx, line)| {
                body.contains(idx) && !line.blank && Some(line.indent) == indent
            })
            .filter_map(|(idx, _)| {
                let text = self.line_text(idx);
                assignment_target(text).map(|name| (name, text))
            })
            .collect()
    }

    fn assignments_at(&self, pred: impl Fn(&Line) -> bool) -> Vec<(String, &'a str)> {
        self.lines
            .iter()
            .enumerate()
            .filter(|(_, line)| !line.blank && pred(line))
            .filter_map(|(idx, _)| {
                let text = self.line_text(idx);
                assignment_target(text).map(|name| (name, text))
            })
            .collect()
    }

    fn first_body_indent(&self, def: &DefInfo) -> Option<usize> {
        def.body_lines
            .clone()
            .map(|i| &self.lines[i])
            .find(|l| !l.blank)
            .map(|l| l.indent)
    }

    /// Names assigned anywhere inside a span: simple assignment targets,
    /// augmented assignments, `for` targets, and `with .. as` bindings.
    pub fn assigned_names_in(&self, def: &DefInfo) -> Vec<String> {
        let Some(span) = self.body_span(def) else {
            return Vec::new();
        };
        let mut names = Vec::new();
        for idx in def.body_lines.clone() {
            let line = &self.lines[idx];
            if line.blank {
                continue;
            }
            let text = self.line_text(idx);
            if let Some(name) = assignment_target(text) {
                names.push(name);
            }
        }
        // `for x in ...` and `for x, y in ...`, including comprehensions.
        let idents = idents_in_text(self.src, span);
        let mut i = 0;
        while i < idents.len() {
            if idents[i].name == "for" {
                let mut j = i + 1;
                while j < idents.len() && idents[j].name != "in" {
                    if idents[j].receiver.is_none() && !is_keyword(idents[j].name) {
                        names.push(idents[j].name.to_string());
                    }
                    j += 1;
                }
                i = j;
            } else if idents[i].name == "as" {
                if let Some(next) = idents.get(i + 1) {
                    names.push(next.name.to_string());
                }
                i += 2;
            } else {
                i += 1;
            }
        }
        names
    }
}

#[derive(Debug, Clone)]
pub struct Docstring<'a> {
    /// Byte span of the literal, quotes included.
    pub span: Range<usize>,
    /// Logical line index of the docstring statement.
    pub line: usize,
    /// Inner text with quotes stripped and surrounding whitespace trimmed.
    pub text: &'a str,
}

#[derive(Debug, Clone)]
pub struct ImportStmt<'a> {
    pub text: &'a str,
    /// Names the statement binds in the module namespace.
    pub names: Vec<String>,
}

fn clean_docstring(literal: &str) -> &str {
    let stripped = literal.trim_start_matches(|c: char| "rRbBuUfF".contains(c));
    for quote in ["\"\"\"", "'''", "\"", "'"] {
        if stripped.starts_with(quote) && stripped.len() >= 2 * quote.len() {
            return stripped[quote.len()..stripped.len() - quote.len()].trim();
        }
    }
    stripped.trim()
}

fn line_end_with_newline(src: &str, end: usize) -> usize {
    if src[end..].starts_with("\r\n") {
        end + 2
    } else if src[end..].starts_with('\n') {
        end + 1
    } else {
        end
    }
}

/// If `text` begins with a string literal, return its byte range in `text`.
fn string_literal_span(text: &str) -> Option<Range<usize>> {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() && (bytes[i] as char).is_ascii_alphabetic() {
        if !"rRbBuUfF".contains(bytes[i] as char) {
            return None;
        }
        i += 1;
        if i > 3 {
            return None;
        }
    }
    let quote = *bytes.get(i)?;
    if quote != b'"' && quote != b'\'' {
        return None;
    }
    let triple = bytes[i..].starts_with(&[quote, quote, quote]);
    let (open_len, close) = if triple {
        (3, [quote, quote, quote].to_vec())
    } else {
        (1, vec![quote])
    };
    let mut j = i + open_len;
    while j < bytes.len() {
        if bytes[j] == b'\\' {
            j += 2;
            continue;
        }
        if bytes[j..].starts_with(&close) {
            return Some(0..j + close.len());
        }
        j += 1;
    }
    None
}

/// Extract the binding target of a simple or augmented assignment statement.
fn assignment_target(text: &str) -> Option<String> {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
        i += 1;
    }
    if i == 0 || bytes[0].is_ascii_digit() {
        return None;
    }
    let name = &text[..i];
    if is_keyword(name) {
        return None;
    }
    let rest = text[i..].trim_start();
    // Annotated assignment: `name: T = v`. Walk past the annotation.
    let rest = if let Some(stripped) = rest.strip_prefix(':') {
        &stripped[top_level_eq_split(stripped)?..]
    } else {
        rest
    };
    let ok = rest.starts_with("= ")
        || rest == "="
        || (rest.starts_with('=') && !rest.starts_with("=="))
        || ["+=", "-=", "*=", "/=", "//=", "%=", "**=", "|=", "&=", "^="]
            .iter()
            .any(|op| rest.starts_with(op));
    ok.then(|| name.to_string())
}

/// Position of the first `=` (not `==`) at bracket depth zero.
fn top_level_eq_split(text: &str) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => depth = depth.saturating_sub(1),
            b'"' | b'\'' => {
                let span = string_literal_span(&text[i..])?;
                i += span.end;
                continue;
            }
            b'=' if depth == 0 => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 2;
                    continue;
                }
                return Some(i);
            }
            _ => {}
        }
        i += 1;
    }
    None
}

fn import_bound_names(text: &str) -> Option<Vec<String>> {
    let mut names = Vec::new();
    if let Some(rest) = text.strip_prefix("import ") {
        for part in rest.split(',') {
            let part = part.trim();
            if let Some((_, alias)) = part.split_once(" as ") {
                names.push(alias.trim().to_string());
            } else {
                // `import a.b` binds `a`.
                let root = part.split('.').next().unwrap_or(part).trim();
                if !root.is_empty() {
                    names.push(root.to_string());
                }
            }
        }
        return Some(names);
    }
    if text.starts_with("from ") {
        let after = text.split_once(" import ")?.1;
        let after = after.trim().trim_start_matches('(').trim_end_matches(')');
        for part in after.split(',') {
            let part = part.trim();
            if part == "*" || part.is_empty() {
                continue;
            }
            if let Some((_, alias)) = part.split_once(" as ") {
                names.push(alias.trim().to_string());
            } else {
                names.push(part.to_string());
            }
        }
        return Some(names);
    }
    None
}

pub(crate) fn is_keyword(word: &str) -> bool {
    matches!(
        word,
        "False" | "None" | "True" | "and" | "as" | "assert" | "async" | "await" | "break"
            | "class" | "continue" | "def" | "del" | "elif" | "else" | "except" | "finally"
            | "for" | "from" | "global" | "if" | "import" | "in" | "is" | "lambda" | "nonlocal"
            | "not" | "or" | "pass" | "raise" | "return" | "try" | "while" | "with" | "yield"
            | "match" | "case"
    )
}

fn idents_in_text(src: &str, span: Range<usize>) -> Vec<Ident<'_>> {
    let bytes = src.as_bytes();
    let mut out: Vec<Ident<'_>> = Vec::new();
    let mut i = span.start;
    let mut prev_dot_ident: Option<usize> = None; // index into `out`
    while i < span.end {
        let b = bytes[i];
        if b == b'#' {
            while i < span.end && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if b == b'"' || b == b'\'' {
            match string_literal_span(&src[i..span.end]) {
                Some(r) => {
                    i += r.end;
                    continue;
                }
                None => {
                    i += 1;
                    continue;
                }
            }
        }
        if b.is_ascii_alphabetic() || b == b'_' {
            let start = i;
            while i < span.end && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let name = &src[start..i];
            // A string prefix like `f"` is part of the literal.
            if name.len() <= 2
                && name.chars().all(|c| "rRbBuUfF".contains(c))
                && matches!(bytes.get(i), Some(b'"') | Some(b'\''))
            {
                if let Some(r) = string_literal_span(&src[start..span.end]) {
                    i = start + r.end;
                    continue;
                }
            }
            let mut j = i;
            while j < span.end && (bytes[j] == b' ' || bytes[j] == b'\t') {
                j += 1;
            }
            let called = bytes.get(j) == Some(&b'(');
            let receiver = prev_dot_ident.map(|idx| out[idx].name);
            out.push(Ident {
                name,
                pos: start,
                called,
                receiver,
            });
            prev_dot_ident = if bytes.get(j) == Some(&b'.') {
                Some(out.len() - 1)
            } else {
                None
            };
            if bytes.get(j) == Some(&b'.') {
                i = j; // keep scanning from the dot
            }
            continue;
        }
        if b.is_ascii_digit() {
            while i < span.end
                && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.')
            {
                i += 1;
            }
            continue;
        }
        if b != b'.' {
            prev_dot_ident = None;
        }
        i += 1;
    }
    out
}

fn split_logical_lines(src: &str) -> Result<Vec<Line>, ScanError> {
    let bytes = src.as_bytes();
    let mut lines = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        // Measure indentation of the first physical line.
        let mut indent = 0usize;
        while i < bytes.len() && (bytes[i] == b' ' || bytes[i] == b'\t') {
            indent += if bytes[i] == b'\t' { 8 - indent % 8 } else { 1 };
            i += 1;
        }
        let content_start = i;
        let mut depth = 0usize;
        let mut saw_code = false;
        loop {
            if i >= bytes.len() {
                if depth > 0 {
                    return Err(ScanError::UnbalancedBracket(start));
                }
                break;
            }
            match bytes[i] {
                b'\n' if depth == 0 => break,
                b'\n' => i += 1,
                b'#' => {
                    while i < bytes.len() && bytes[i] != b'\n' {
                        i += 1;
                    }
                }
                b'\\' if bytes.get(i + 1) == Some(&b'\n') => i += 2,
                b'(' | b'[' | b'{' => {
                    depth += 1;
                    saw_code = true;
                    i += 1;
                }
                b')' | b']' | b'}' => {
                    if depth == 0 {
                        return Err(ScanError::UnbalancedBracket(i));
                    }
                    depth -= 1;
                    i += 1;
                }
                b'"' | b'\'' => {
                    saw_code = true;
                    match string_literal_span(&src[i..]) {
                        Some(r) => i += r.end,
                        None => return Err(ScanError::UnterminatedString(i)),
                    }
                }
                b' ' | b'\t' | b'\r' => i += 1,
                _ => {
                    saw_code = true;
                    i += 1;
                }
            }
        }
        let end = i;
        lines.push(Line {
            start,
            content_start,
            end,
            indent,
            blank: !saw_code,
        });
        if i < bytes.len() {
            i += 1; // consume the newline
        }
    }
    Ok(lines)
}

fn collect_defs(src: &str, lines: &[Line]) -> Vec<DefInfo> {
    struct Open {
        def_index: usize,
        indent: usize,
        last_code_line: usize,
    }
    let mut defs: Vec<DefInfo> = Vec::new();
    let mut stack: Vec<Open> = Vec::new();

    let close = |defs: &mut Vec<DefInfo>, open: Open| {
        let def = &mut defs[open.def_index];
        let first_body = def.header_line + 1;
        def.body_lines = if open.last_code_line >= first_body {
            first_body..open.last_code_line + 1
        } else {
            first_body..first_body
        };
    };

    for (idx, line) in lines.iter().enumerate() {
        if line.blank {
            continue;
        }
        while let Some(top) = stack.last() {
            if line.indent <= top.indent {
                let open = stack.pop().expect("nonempty");
                close(&mut defs, open);
            } else {
                break;
            }
        }
        for open in &mut stack {
            open.last_code_line = idx;
        }
        let text = &src[line.content_start..line.end];
        if let Some(header) = parse_def_header(text) {
            let colon = match find_header_colon(text) {
                Some(offset) => line.content_start + offset,
                None => continue,
            };
            let parent = stack.last().map(|open| open.def_index);
            defs.push(DefInfo {
                name: header.name,
                kind: header.kind,
                is_async: header.is_async,
                header_line: idx,
                header_colon: colon,
                body_lines: 0..0,
                parent,
                indent: line.indent,
            });
            stack.push(Open {
                def_index: defs.len() - 1,
                indent: line.indent,
                last_code_line: idx,
            });
        }
    }
    while let Some(open) = stack.pop() {
        close(&mut defs, open);
    }
    defs
}

struct DefHeader {
    name: String,
    kind: DefKind,
    is_async: bool,
}

fn parse_def_header(text: &str) -> Option<DefHeader> {
    let (is_async, rest) = match text.strip_prefix("async ") {
        Some(rest) => (true, rest.trim_start()),
        None => (false, text),
    };
    let (kind, rest) = if let Some(rest) = rest.strip_prefix("def ") {
        (DefKind::Function, rest)
    } else {
        (DefKind::Class, rest.strip_prefix("class ")?)
    };
    let rest = rest.trim_start();
    let name_end = rest
        .find(|c: char| !c.is_ascii_alphanumeric() && c != '_')
        .unwrap_or(rest.len());
    if name_end == 0 {
        return None;
    }
    Some(DefHeader {
        name: rest[..name_end].to_string(),
        kind,
        is_async,
    })
}

/// Offset of the colon that terminates a def/class header, at bracket
/// depth zero, skipping strings (annotations may contain colons inside
/// brackets, lambda colons only occur inside the parameter brackets).
fn find_header_colon(text: &str) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => depth = depth.saturating_sub(1),
            b'"' | b'\'' => {
                let span = string_literal_span(&text[i..])?;
                i += span.end;
                continue;
            }
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            b':' if depth == 0 => return Some(i),
            _ => {}
        }
        i += 1;
    }
    None
}

/// Parameter names of a def signature, in order. Leading `*`/`**` markers
/// are stripped; bare `*` and `/` separators are skipped.
pub fn param_names(signature: &str) -> Vec<String> {
    split_params(signature)
        .into_iter()
        .filter_map(|p| {
            let p = p.trim().trim_start_matches('*').trim();
            if p.is_empty() || p == "/" {
                return None;
            }
            let end = p
                .find(|c: char| !c.is_ascii_alphanumeric() && c != '_')
                .unwrap_or(p.len());
            (end > 0).then(|| p[..end].to_string())
        })
        .collect()
}

/// Number of parameters that carry a type annotation.
pub fn annotated_param_count(signature: &str) -> usize {
    split_params(signature)
        .into_iter()
        .filter(|p| {
            let bytes = p.as_bytes();
            let mut depth = 0usize;
            for &b in bytes {
                match b {
                    b'(' | b'[' | b'{' => depth += 1,
                    b')' | b']' | b'}' => depth = depth.saturating_sub(1),
                    b':' if depth == 0 => return true,
                    _ => {}
                }
            }
            false
        })
        .count()
}

/// The raw parameter text between the outer parentheses of a signature.
pub fn param_list_text(signature: &str) -> Option<&str> {
    let open = signature.find('(')?;
    let bytes = signature.as_bytes();
    let mut depth = 0usize;
    let mut i = open;
    while i < bytes.len() {
        match bytes[i] {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&signature[open + 1..i]);
                }
            }
            b'"' | b'\'' => {
                let span = string_literal_span(&signature[i..])?;
                i += span.end;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    None
}

fn split_params(signature: &str) -> Vec<&str> {
    let Some(inner) = param_list_text(signature) else {
        return Vec::new();
    };
    let bytes = inner.as_bytes();
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => depth = depth.saturating_sub(1),
            b'"' | b'\'' => {
                if let Some(span) = string_literal_span(&inner[i..]) {
                    i += span.end;
                    continue;
                }
            }
            b',' if depth == 0 => {
                parts.push(&inner[start..i]);
                start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    if start < inner.len() {
        parts.push(&inner[start..]);
    }
    parts.into_iter().filter(|p| !p.trim().is_empty()).collect()
}
