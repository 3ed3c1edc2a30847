//! Contract extraction and instrumentation.
//!
//! Completions wrap code in prose and markdown fences; [`extract_contract`]
//! digs out the contract function plus any helper definitions it references.
//! [`check_shape`] enforces the structural template — preconditions asserted
//! inside a try block whose handler re-raises as `ValueError`, a single call
//! to the target, postcondition asserts, and the result returned.
//! [`instrument_for_verifier`] produces the form symbolic backends consume
//! (leading `assert True`, precondition raises turned into early returns);
//! [`inject_for_tester`] appends the un-instrumented contract to a program so
//! a search-based tester can drive it.

use thiserror::Error;

use crate::pysrc::{self, DefInfo, DefKind, SourceFile};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("no function named {0:?} found in the completion")]
    NoContractFound(String),
    #[error("contract source does not scan: {0}")]
    Scan(#[from] pysrc::ScanError),
    #[error("no contract definition (ending in `_contract`) in source")]
    MissingContractDef,
    #[error("program already defines {0:?}")]
    NameCollision(String),
}

/// Structural facts about a contract function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractShape {
    /// Preconditions sit in a `try` block (vacuously true for wrapper-form
    /// contracts whose only precondition is the signature).
    pub has_try_precondition_block: bool,
    /// The `except AssertionError` handler raises `ValueError`.
    pub raises_value_error_on_precondition: bool,
    /// The target function is invoked exactly once.
    pub calls_target_once: bool,
    pub precondition_assert_count: usize,
    pub postcondition_assert_count: usize,
    /// The function ends by returning the variable bound to the call.
    pub returns_result: bool,
    pub typed_param_count: usize,
}

impl ContractShape {
    pub fn shape_ok(&self) -> bool {
        self.has_try_precondition_block
            && self.raises_value_error_on_precondition
            && self.calls_target_once
            && self.returns_result
    }
}

/// Pull the first definition of `expected_name` out of a completion,
/// together with any other top-level statements it references. Fenced code
/// blocks are searched first, then the prose-stripped remainder.
pub fn extract_contract(completion: &str, expected_name: &str) -> Result<String, CodecError> {
    for region in candidate_regions(completion) {
        if let Some(found) = extract_from_region(&region, expected_name) {
            return Ok(found);
        }
    }
    Err(CodecError::NoContractFound(expected_name.to_string()))
}

fn candidate_regions(completion: &str) -> Vec<String> {
    let mut regions = Vec::new();
    let mut current = String::new();
    let mut in_fence = false;
    for line in completion.lines() {
        if line.trim_start().starts_with("```") {
            if in_fence {
                regions.push(std::mem::take(&mut current));
            }
            in_fence = !in_fence;
            continue;
        }
        if in_fence {
            current.push_str(line);
            current.push('\n');
        }
    }
    if in_fence && !current.is_empty() {
        // Unterminated fence: treat the tail as a block.
        regions.push(current);
    }
    // Fall back to the whole text with fence markers dropped.
    let stripped: String = completion
        .lines()
        .filter(|line| !line.trim_start().starts_with("```"))
        .map(|line| format!("{line}\n"))
        .collect();
    regions.push(stripped);
    regions
}

fn extract_from_region(region: &str, expected_name: &str) -> Option<String> {
    if let Ok(file) = pysrc::scan(region) {
        if let Some(result) = extract_from_scanned(&file, expected_name) {
            return Some(result);
        }
    }
    // Prose can defeat the scanner (stray quotes, unbalanced brackets).
    // Carve the def block out by indentation and scan just that.
    let carved = carve_def_block(region, expected_name)?;
    let file = pysrc::scan(&carved).ok()?;
    extract_from_scanned(&file, expected_name)
}

fn extract_from_scanned(file: &SourceFile<'_>, expected_name: &str) -> Option<String> {
    let target = file
        .defs_named(expected_name)
        .into_iter()
        .find(|d| d.kind == DefKind::Function && d.parent.is_none())?;
    let target_idx = file.def_index(target);

    // Top-level statements that bind names: (names, verbatim span text).
    struct Extra {
        names: Vec<String>,
        text: String,
    }
    let mut extras: Vec<Extra> = Vec::new();
    for import in file.top_level_imports() {
        extras.push(Extra {
            names: import.names.clone(),
            text: import.text.to_string(),
        });
    }
    for (name, text) in file.top_level_assignments() {
        extras.push(Extra {
            names: vec![name],
            text: text.to_string(),
        });
    }
    for def in file.top_level_defs() {
        let idx = file.def_index(def);
        if idx == target_idx || def.name == *expected_name {
            continue;
        }
        extras.push(Extra {
            names: vec![def.name.clone()],
            text: def_text(file, def),
        });
    }

    // Transitive closure of referenced names starting from the contract.
    let mut included: Vec<usize> = Vec::new();
    let mut referenced = def_idents(file, target);
    loop {
        let mut grew = false;
        for (i, extra) in extras.iter().enumerate() {
            if included.contains(&i) {
                continue;
            }
            if extra.names.iter().any(|n| referenced.contains(n)) {
                included.push(i);
                if let Ok(scan) = pysrc::scan(&extra.text) {
                    for ident in scan.idents_in(0..extra.text.len()) {
                        referenced.push(ident.name.to_string());
                    }
                }
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    included.sort();

    let mut parts: Vec<String> = included
        .into_iter()
        .map(|i| extras[i].text.trim_end().to_string())
        .collect();
    parts.push(def_text(file, target).trim_end().to_string());
    Some(parts.join("\n\n") + "\n")
}

fn def_text(file: &SourceFile<'_>, def: &DefInfo) -> String {
    let header = &file.lines()[def.header_line];
    let end = match file.body_span(def) {
        Some(span) => span.end,
        None => header.end,
    };
    file.src()[header.start..end].to_string()
}

fn def_idents(file: &SourceFile<'_>, def: &DefInfo) -> Vec<String> {
    let header = &file.lines()[def.header_line];
    let end = match file.body_span(def) {
        Some(span) => span.end,
        None => header.end,
    };
    file.idents_in(header.start..end)
        .into_iter()
        .map(|id| id.name.to_string())
        .collect()
}

/// Carve a `def <name>(...)` block out of mixed prose by indentation.
fn carve_def_block(text: &str, name: &str) -> Option<String> {
    let needle = format!("def {name}");
    let mut collected: Vec<&str> = Vec::new();
    let mut capturing = false;
    for line in text.lines() {
        if !capturing {
            if let Some(rest) = line.trim_start().strip_prefix(&needle) {
                if rest.trim_start().starts_with('(') && line.trim_start().starts_with("def ") {
                    capturing = true;
                    collected.push(line);
                }
            }
            continue;
        }
        let blank = line.trim().is_empty();
        let indented = line.starts_with(' ') || line.starts_with('\t');
        if blank || indented {
            collected.push(line);
        } else {
            break;
        }
    }
    if !capturing {
        return None;
    }
    while collected.last().map(|l| l.trim().is_empty()).unwrap_or(false) {
        collected.pop();
    }
    Some(collected.join("\n") + "\n")
}

/// Locate the contract def (named `<entry_point>_contract`) in a source.
fn find_contract_def<'f, 'a>(
    file: &'f SourceFile<'a>,
    entry_point: &str,
) -> Result<&'f DefInfo, CodecError> {
    let name = format!("{entry_point}_contract");
    file.defs_named(&name)
        .into_iter()
        .find(|d| d.kind == DefKind::Function)
        .ok_or(CodecError::MissingContractDef)
}

/// Inspect a contract's structure against the template.
pub fn check_shape(contract: &str, entry_point: &str) -> Result<ContractShape, CodecError> {
    let file = pysrc::scan(contract)?;
    let def = find_contract_def(&file, entry_point)?;
    let signature = file.signature_text(def);
    let typed_param_count = pysrc::annotated_param_count(signature);

    let body: Vec<usize> = def
        .body_lines
        .clone()
        .filter(|&i| !file.lines()[i].blank)
        .collect();
    let body_indent = body
        .first()
        .map(|&i| file.lines()[i].indent)
        .unwrap_or(def.indent + 4);
    let direct: Vec<usize> = body
        .iter()
        .copied()
        .filter(|&i| file.lines()[i].indent == body_indent)
        .collect();
    let docstring_line = file.docstring(def).map(|d| d.line);
    let statements: Vec<usize> = direct
        .iter()
        .copied()
        .filter(|&i| Some(i) != docstring_line)
        .collect();

    // The try/except precondition gate.
    let try_line = statements
        .iter()
        .copied()
        .find(|&i| file.line_text(i).trim_end() == "try:");
    let except_line = statements.iter().copied().find(|&i| {
        let text = file.line_text(i);
        text.starts_with("except") && text.contains("AssertionError")
    });
    let mut has_try = false;
    let mut raises_value_error = false;
    let mut precondition_asserts = 0usize;
    if let (Some(t), Some(e)) = (try_line, except_line) {
        if t < e {
            has_try = true;
            for &i in &body {
                if i > t && i < e && first_word(file.line_text(i)) == Some("assert") {
                    precondition_asserts += 1;
                }
            }
            let handler_end = statements
                .iter()
                .copied()
                .find(|&i| i > e)
                .unwrap_or(def.body_lines.end);
            raises_value_error = body.iter().any(|&i| {
                i > e
                    && i < handler_end
                    && file.line_text(i).starts_with("raise ValueError")
            });
        }
    }

    // Calls to the target anywhere in the contract body.
    let call_count = match file.body_span(def) {
        Some(span) => file
            .idents_in(span)
            .iter()
            .filter(|id| id.name == entry_point && id.called && id.receiver.is_none())
            .count(),
        None => 0,
    };

    // The statement binding the call result, e.g. `result = target(...)`.
    let call_line = statements.iter().copied().find(|&i| {
        let text = file.line_text(i);
        text.contains(&format!("{entry_point}(")) && pysrc_assignment(text).is_some()
    });
    let result_var = call_line.and_then(|i| pysrc_assignment(file.line_text(i)));

    // Wrapper form: no try gate, first statement binds the call.
    if !has_try {
        if let (Some(first), Some(call)) = (statements.first(), call_line) {
            if *first == call {
                has_try = true;
                raises_value_error = true;
                precondition_asserts = 0;
            }
        }
    }

    let postcondition_asserts = match call_line {
        Some(call) => body
            .iter()
            .filter(|&&i| i > call && first_word(file.line_text(i)) == Some("assert"))
            .count(),
        None => 0,
    };

    let returns_result = match (statements.last(), &result_var) {
        (Some(&last), Some(var)) => {
            let text = file.line_text(last).trim_end();
            text == format!("return {var}")
        }
        _ => false,
    };

    Ok(ContractShape {
        has_try_precondition_block: has_try,
        raises_value_error_on_precondition: raises_value_error,
        calls_target_once: call_count == 1,
        precondition_assert_count: precondition_asserts,
        postcondition_assert_count: postcondition_asserts,
        returns_result,
        typed_param_count,
    })
}

fn first_word(text: &str) -> Option<&str> {
    let end = text.find(|c: char| !c.is_ascii_alphanumeric() && c != '_')?;
    if end == 0 {
        None
    } else {
        Some(&text[..end])
    }
}

/// Assignment target of a statement, reusing the scanner's rule.
fn pysrc_assignment(text: &str) -> Option<String> {
    // Only simple `name = ...` bindings; augmented ops don't bind results.
    let scanned = pysrc::scan(text).ok()?;
    let idents = scanned.idents_in(0..text.len());
    let first = idents.first()?;
    if first.pos != text.find(first.name)? || pysrc::is_keyword(first.name) {
        return None;
    }
    let rest = text[first.name.len()..].trim_start();
    (rest.starts_with('=') && !rest.starts_with("==")).then(|| first.name.to_string())
}

/// Rewrite a contract into the form symbolic backends verify: `assert True`
/// as the first body statement and every precondition-failure `raise`
/// replaced by a bare `return`. Idempotent.
pub fn instrument_for_verifier(contract: &str) -> Result<String, CodecError> {
    let file = pysrc::scan(contract)?;
    let contract_defs: Vec<&DefInfo> = file
        .defs()
        .iter()
        .filter(|d| d.kind == DefKind::Function && d.name.ends_with("_contract"))
        .collect();
    if contract_defs.is_empty() {
        return Err(CodecError::MissingContractDef);
    }

    // Collect byte edits, then apply back to front.
    enum Edit {
        Replace(std::ops::Range<usize>, String),
        Insert(usize, String),
    }
    let mut edits: Vec<Edit> = Vec::new();
    for def in &contract_defs {
        for idx in def.body_lines.clone() {
            let line = &file.lines()[idx];
            if line.blank {
                continue;
            }
            let text = file.line_text(idx);
            if text.starts_with("raise ValueError") {
                edits.push(Edit::Replace(line.content_start..line.end, "return".into()));
            }
        }
        let docstring = file.docstring(def);
        let first_statement = def
            .body_lines
            .clone()
            .filter(|&i| !file.lines()[i].blank)
            .find(|&i| Some(i) != docstring.as_ref().map(|d| d.line));
        let already = first_statement
            .map(|i| file.line_text(i).trim_end() == "assert True")
            .unwrap_or(false);
        if !already {
            if let Some(first) = first_statement {
                let line = &file.lines()[first];
                let indent = " ".repeat(line.indent);
                edits.push(Edit::Insert(line.start, format!("{indent}assert True\n")));
            }
        }
    }

    edits.sort_by_key(|e| match e {
        Edit::Replace(range, _) => range.start,
        Edit::Insert(pos, _) => *pos,
    });
    let mut out = contract.to_string();
    for edit in edits.into_iter().rev() {
        match edit {
            Edit::Replace(range, text) => out.replace_range(range, &text),
            Edit::Insert(pos, text) => out.insert_str(pos, &text),
        }
    }
    Ok(out)
}

/// Append a contract function to a program so a tester can call it.
/// The contract goes in un-instrumented: assertion errors signal
/// specification violations, `ValueError` signals invalid inputs.
pub fn inject_for_tester(program: &str, contract: &str) -> Result<String, CodecError> {
    let contract_file = pysrc::scan(contract)?;
    let contract_names: Vec<String> = contract_file
        .top_level_defs()
        .map(|d| d.name.clone())
        .collect();
    if contract_names.is_empty() {
        return Err(CodecError::MissingContractDef);
    }
    let program_file = pysrc::scan(program)?;
    for def in program_file.top_level_defs() {
        if contract_names.contains(&def.name) {
            return Err(CodecError::NameCollision(def.name.clone()));
        }
    }
    let mut out = program.trim_end().to_string();
    out.push_str("\n\n\n");
    out.push_str(contract.trim_end());
    out.push('\n');
    Ok(out)
}
