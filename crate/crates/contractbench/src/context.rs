//! Extraction of the prompt context slice from a subject source file.
//!
//! Given a file and an entry point, the extractor collects exactly what the
//! prompt needs: the target's signature and docstring, the definitions of
//! globals (and class variables) the target reads, signature+docstring stubs
//! of every in-file function the target calls directly, the enclosing class
//! header when the target is a method, and the imports referenced by any of
//! those pieces. Call-graph depth is one level — direct callees only — and
//! only syntactically resolvable names are considered.

use thiserror::Error;

use crate::pysrc::{self, DefInfo, DefKind, SourceFile};

#[derive(Debug, Error)]
pub enum ContextError {
    #[error("source does not scan: {0}")]
    Parse(#[from] pysrc::ScanError),
    #[error("entry point {0:?} is not defined in the file")]
    MissingEntryPoint(String),
    #[error("entry point {0:?} is defined more than once")]
    AmbiguousEntryPoint(String),
}

/// The slice of a source file that accompanies the target stub in prompts.
/// Every element is verbatim from (or a body-erased projection of) the file.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSlice {
    pub target_signature: String,
    pub docstring: String,
    /// Definitions of globals and class variables the target reads.
    pub global_defs: Vec<String>,
    /// Signature + docstring stubs of direct in-file callees (no bodies).
    pub callee_stubs: Vec<String>,
    /// Header of the enclosing class when the target is a method.
    pub class_header: Option<String>,
    /// Import statements referenced by the target or its callee stubs.
    pub imports: Vec<String>,
    /// Body-erased projection of the target itself.
    target_stub: String,
}

impl ContextSlice {
    /// The file-context block rendered for the prompt: imports, globals,
    /// class header, callee stubs — in that stable order. Empty string when
    /// there is nothing to show.
    pub fn context_block(&self) -> String {
        let mut sections: Vec<&str> = Vec::new();
        sections.extend(self.imports.iter().map(String::as_str));
        sections.extend(self.global_defs.iter().map(String::as_str));
        if let Some(header) = &self.class_header {
            sections.push(header);
        }
        sections.extend(self.callee_stubs.iter().map(String::as_str));
        sections.join("\n\n")
    }

    /// Signature + docstring of the target, verbatim.
    pub fn target_stub(&self) -> &str {
        &self.target_stub
    }

    pub fn is_empty(&self) -> bool {
        self.imports.is_empty()
            && self.global_defs.is_empty()
            && self.class_header.is_none()
            && self.callee_stubs.is_empty()
    }
}

/// Locate the unique entry-point def in a scanned file.
fn find_entry<'f, 'a>(
    file: &'f SourceFile<'a>,
    entry_point: &str,
) -> Result<&'f DefInfo, ContextError> {
    let matches: Vec<&DefInfo> = file
        .defs_named(entry_point)
        .into_iter()
        .filter(|d| d.kind == DefKind::Function)
        .collect();
    match matches.len() {
        0 => Err(ContextError::MissingEntryPoint(entry_point.to_string())),
        1 => Ok(matches[0]),
        _ => Err(ContextError::AmbiguousEntryPoint(entry_point.to_string())),
    }
}

/// Extract the context slice for `entry_point` from `file`.
pub fn extract_context(file: &str, entry_point: &str) -> Result<ContextSlice, ContextError> {
    let scanned = pysrc::scan(file)?;
    let target = find_entry(&scanned, entry_point)?;
    let target_index = scanned.def_index(target);

    let signature = scanned.signature_text(target).to_string();
    let docstring = scanned
        .docstring(target)
        .map(|d| d.text.to_string())
        .unwrap_or_default();

    // Everything the target's header and body mention.
    let header_line = &scanned.lines()[target.header_line];
    let mut idents = scanned.idents_in(header_line.start..header_line.end);
    if let Some(body) = scanned.body_span(target) {
        idents.extend(scanned.idents_in(body));
    }

    // The enclosing class, if the target is a method.
    let enclosing_class = target
        .parent
        .map(|idx| &scanned.defs()[idx])
        .filter(|d| d.kind == DefKind::Class);
    let class_header = enclosing_class.map(|class| scanned.signature_text(class).to_string());

    // Direct callees defined in this file (functions at top level, plus
    // sibling methods invoked through self/cls).
    let class_name = enclosing_class.map(|c| c.name.as_str());
    let mut callee_stubs: Vec<(usize, String)> = Vec::new();
    for def in scanned.defs() {
        if def.kind != DefKind::Function || def.name == *entry_point {
            continue;
        }
        let def_idx = scanned.def_index(def);
        if def_idx == target_index {
            continue;
        }
        let reachable_receiver = |receiver: Option<&str>| match receiver {
            None => def.parent.is_none(),
            Some("self") | Some("cls") => class_name.is_some() && def.parent == target.parent,
            Some(recv) => def
                .parent
                .map(|p| scanned.defs()[p].name == recv && scanned.defs()[p].kind == DefKind::Class)
                .unwrap_or(false),
        };
        let called = idents
            .iter()
            .any(|id| id.called && id.name == def.name && reachable_receiver(id.receiver));
        if called {
            callee_stubs.push((def.header_line, scanned.stub_text(def)));
        }
    }
    callee_stubs.sort_by_key(|(line, _)| *line);
    let callee_stubs: Vec<String> = callee_stubs.into_iter().map(|(_, stub)| stub).collect();

    // Globals the target reads: module-level assignment targets mentioned in
    // the body but neither parameters nor locally assigned names.
    let params = pysrc::param_names(&signature);
    let assigned = scanned.assigned_names_in(target);
    let mut global_defs: Vec<String> = Vec::new();
    for (name, def_text) in scanned.top_level_assignments() {
        let read = idents.iter().any(|id| {
            id.name == name
                && id.receiver.is_none()
                && !params.contains(&name)
                && !assigned.contains(&name)
        });
        if read && !global_defs.contains(&def_text.to_string()) {
            global_defs.push(def_text.to_string());
        }
    }
    // Class variables read through self/cls/<ClassName>.
    if let Some(class) = enclosing_class {
        for (name, def_text) in scanned.class_assignments(class) {
            let read = idents.iter().any(|id| {
                id.name == name
                    && (matches!(id.receiver, Some("self") | Some("cls"))
                        || id.receiver == Some(class.name.as_str()))
            });
            if read && !global_defs.contains(&def_text.to_string()) {
                global_defs.push(def_text.to_string());
            }
        }
    }

    // Imports referenced by the target (header included, so annotations
    // count) or by any callee stub.
    let mut referenced: Vec<&str> = idents.iter().map(|id| id.name).collect();
    let stub_idents: Vec<String> = callee_stubs
        .iter()
        .flat_map(|stub| {
            pysrc::scan(stub)
                .map(|s| {
                    s.idents_in(0..stub.len())
                        .into_iter()
                        .map(|id| id.name.to_string())
                        .collect::<Vec<_>>()
                })
                .unwrap_or_default()
        })
        .collect();
    referenced.extend(stub_idents.iter().map(String::as_str));
    let imports = scanned
        .top_level_imports()
        .into_iter()
        .filter(|import| {
            import
                .names
                .iter()
                .any(|name| referenced.iter().any(|r| r == name))
        })
        .map(|import| import.text.to_string())
        .collect();

    Ok(ContextSlice {
        target_signature: signature,
        docstring,
        global_defs,
        callee_stubs,
        class_header,
        imports,
        target_stub: scanned.stub_text(target),
    })
}

/// Return the file with the entry point's body removed; its signature and
/// docstring are preserved and all other definitions stay byte-identical.
pub fn erase_body(file: &str, entry_point: &str) -> Result<String, ContextError> {
    let scanned = pysrc::scan(file)?;
    let target = find_entry(&scanned, entry_point)?;
    Ok(scanned.erase_def_body(target))
}

/// Remove the bodies of every function and method in the file, keeping
/// signatures and docstrings: the whole-file stub form used when prompting
/// on multi-function sources.
pub fn erase_all_bodies(file: &str) -> Result<String, ContextError> {
    let mut current = file.to_string();
    loop {
        let scanned = pysrc::scan(&current)?;
        let next = scanned
            .defs()
            .iter()
            .filter(|def| def.kind == DefKind::Function)
            .find(|def| {
                let erased = scanned.erase_def_body(def);
                erased != current
            })
            .map(|def| scanned.erase_def_body(def));
        match next {
            Some(erased) => current = erased,
            None => return Ok(current),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1_FILE: &str = "def largest_prime_factor(n: int):\n    \"\"\"Return the largest prime factor of n. Assume n > 1 and is not a prime.\"\"\"\n    last = 1\n    while n % 2 == 0:\n        last = 2\n        n //= 2\n    return last\n";

    #[test]
    fn single_function_file() {
        let slice = extract_context(FIG1_FILE, "largest_prime_factor").unwrap();
        assert_eq!(
            slice.docstring,
            "Return the largest prime factor of n. Assume n > 1 and is not a prime."
        );
        assert_eq!(slice.target_signature, "def largest_prime_factor(n: int):");
        assert!(slice.callee_stubs.is_empty());
        assert!(slice.global_defs.is_empty());
        assert!(slice.imports.is_empty());
        assert!(slice.class_header.is_none());
        assert!(slice.is_empty());
    }

    const HELPER_FILE: &str = r#"import math
import os
from typing import List

LIMIT = 100
UNUSED = 5

def is_prime(k: int) -> bool:
    """Return True if k is prime."""
    return k >= 2 and all(k % i != 0 for i in range(2, k))

def unrelated() -> None:
    """Never called by the target."""
    return None

def target(n: int) -> List[int]:
    """Collect primes up to min(n, LIMIT)."""
    found = []
    for i in range(2, min(n, LIMIT) + 1):
        if is_prime(i):
            found.append(i)
    return found
"#;

    #[test]
    fn callees_globals_imports_extracted() {
        let slice = extract_context(HELPER_FILE, "target").unwrap();
        assert_eq!(slice.global_defs, vec!["LIMIT = 100"]);
        assert_eq!(slice.callee_stubs.len(), 1);
        assert!(slice.callee_stubs[0].contains("def is_prime(k: int) -> bool:"));
        assert!(slice.callee_stubs[0].contains("Return True if k is prime."));
        assert!(!slice.callee_stubs[0].contains("all(k % i"));
        // `List` is referenced by the target annotation; math/os are not.
        assert_eq!(slice.imports, vec!["from typing import List"]);
    }

    #[test]
    fn context_block_order_is_stable() {
        let slice = extract_context(HELPER_FILE, "target").unwrap();
        let block = slice.context_block();
        let import_pos = block.find("from typing import List").unwrap();
        let global_pos = block.find("LIMIT = 100").unwrap();
        let callee_pos = block.find("def is_prime").unwrap();
        assert!(import_pos < global_pos && global_pos < callee_pos);
    }

    const METHOD_FILE: &str = r#"class Accumulator:
    """Collects values."""

    SCALE = 3

    def helper(self, x: int) -> int:
        """Scale a value."""
        return x * self.SCALE

    def total(self, values: list) -> int:
        """Sum of scaled values."""
        acc = 0
        for v in values:
            acc += self.helper(v)
        return acc
"#;

    #[test]
    fn method_target_gets_class_header_and_sibling_stub() {
        let slice = extract_context(METHOD_FILE, "total").unwrap();
        assert_eq!(slice.class_header.as_deref(), Some("class Accumulator:"));
        assert_eq!(slice.callee_stubs.len(), 1);
        assert!(slice.callee_stubs[0].contains("def helper(self, x: int) -> int:"));
        // SCALE is read by `helper`, not by `total`; it must not leak in.
        assert!(slice.global_defs.is_empty());
    }

    #[test]
    fn method_reading_class_var() {
        let slice = extract_context(METHOD_FILE, "helper").unwrap();
        assert_eq!(slice.global_defs, vec!["SCALE = 3"]);
        assert!(slice.callee_stubs.is_empty());
    }

    #[test]
    fn callee_closure_is_one_call_edge_deep() {
        // target -> middle -> leaf: only the direct callee appears.
        let src = concat!(
            "def leaf(x):\n",
            "    \"\"\"Two levels away.\"\"\"\n",
            "    return x\n",
            "\n",
            "def middle(x):\n",
            "    \"\"\"One level away.\"\"\"\n",
            "    return leaf(x)\n",
            "\n",
            "def target(x):\n",
            "    \"\"\"Entry.\"\"\"\n",
            "    return middle(x)\n",
        );
        let slice = extract_context(src, "target").unwrap();
        assert_eq!(slice.callee_stubs.len(), 1);
        assert!(slice.callee_stubs[0].contains("def middle"));
        assert!(!slice.context_block().contains("def leaf"));
    }

    #[test]
    fn missing_and_ambiguous_entry_points() {
        assert!(matches!(
            extract_context(FIG1_FILE, "nope"),
            Err(ContextError::MissingEntryPoint(_))
        ));
        let dup = "def f():\n    return 1\n\ndef f():\n    return 2\n";
        assert!(matches!(
            extract_context(dup, "f"),
            Err(ContextError::AmbiguousEntryPoint(_))
        ));
    }

    #[test]
    fn extraction_is_deterministic() {
        let a = extract_context(HELPER_FILE, "target").unwrap();
        let b = extract_context(HELPER_FILE, "target").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn erase_body_keeps_stub_and_neighbors() {
        let erased = erase_body(HELPER_FILE, "target").unwrap();
        assert!(erased.contains("\"\"\"Collect primes up to min(n, LIMIT).\"\"\""));
        assert!(!erased.contains("found.append(i)"));
        // Other functions byte-identical.
        assert!(erased.contains("return k >= 2 and all(k % i != 0 for i in range(2, k))"));
        assert!(erased.contains("return None"));
    }

    #[test]
    fn erase_body_is_idempotent_on_stubs() {
        let erased = erase_body(FIG1_FILE, "largest_prime_factor").unwrap();
        let again = erase_body(&erased, "largest_prime_factor").unwrap();
        assert_eq!(erased, again);
    }

    #[test]
    fn erase_all_bodies_strips_every_function() {
        let erased = erase_all_bodies(HELPER_FILE).unwrap();
        assert!(!erased.contains("found.append(i)"));
        assert!(!erased.contains("return k >= 2"));
        assert!(!erased.contains("return None"));
        assert!(erased.contains("\"\"\"Return True if k is prime.\"\"\""));
        assert!(erased.contains("LIMIT = 100"));
    }
}
