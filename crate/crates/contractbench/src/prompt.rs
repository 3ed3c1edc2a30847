//! Prompt rendering for the two generation tasks and the wrapper that turns
//! a bare postcondition into a contract function.
//!
//! Rendering is deterministic: templates use spaces only and every line is
//! stripped of trailing whitespace, so golden-file comparisons are stable.

use thiserror::Error;

use crate::context::ContextSlice;
use crate::model::PromptKind;
use crate::pysrc;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("postcondition does not scan: {0}")]
    Scan(#[from] pysrc::ScanError),
    #[error("postcondition must consist of assert statements; found {0:?}")]
    NotAnAssert(String),
    #[error("signature has no parameter list: {0:?}")]
    BadSignature(String),
}

/// A rendered prompt ready for sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub prompt_kind: PromptKind,
    /// Prompts are a single user message; no system text by default.
    pub system_text: Option<String>,
    pub user_text: String,
    /// The function name completions must define: `<entry_point>_contract`.
    pub expected_contract_name: String,
}

fn code_block(slice: &ContextSlice) -> String {
    if slice.is_empty() {
        slice.target_stub().trim_end().to_string()
    } else {
        format!(
            "{}\n\n{}",
            slice.context_block().trim_end(),
            slice.target_stub().trim_end()
        )
    }
}

fn normalize(text: &str) -> String {
    let mut out: String = text
        .lines()
        .map(str::trim_end)
        .collect::<Vec<_>>()
        .join("\n");
    while out.ends_with('\n') {
        out.pop();
    }
    out
}

/// Render the contract-generation prompt for a context slice.
pub fn build_nl2contract_prompt(slice: &ContextSlice, entry_point: &str) -> PromptBundle {
    let user_text = format!(
        "You have the following code, including a function stub and docstring for {entry_point}:\n\
         ```\n\
         {code}\n\
         ```\n\
         Write a function contract for checking that the function {entry_point} is implemented \
         correctly. Write the function contract in Python by using Python assert statements. \
         Specify preconditions in a try-catch block and postconditions as assert statements. \
         Include everything in a contract function called `{entry_point}_contract`. Infer \
         necessary type hints for all input arguments.",
        code = code_block(slice),
    );
    PromptBundle {
        prompt_kind: PromptKind::Nl2Contract,
        system_text: None,
        user_text: normalize(&user_text),
        expected_contract_name: format!("{entry_point}_contract"),
    }
}

/// Render the baseline postcondition-generation prompt.
pub fn build_nl2postcond_prompt(slice: &ContextSlice, entry_point: &str) -> PromptBundle {
    let user_text = format!(
        "You have the following code, including a function stub and docstring for {entry_point}:\n\
         ```\n\
         {code}\n\
         ```\n\
         Write a symbolic postcondition for the function {entry_point} as a single Python assert \
         statement. The variable `return_value` holds the result of calling {entry_point}; state \
         the postcondition over `return_value` and the input arguments. Do not call \
         {entry_point} itself inside the assert statement. Answer with the assert statement only.",
        code = code_block(slice),
    );
    PromptBundle {
        prompt_kind: PromptKind::Nl2Postcond,
        system_text: None,
        user_text: normalize(&user_text),
        expected_contract_name: format!("{entry_point}_contract"),
    }
}

/// Wrap a generated postcondition in a contract function. The signature is
/// taken over verbatim as a trivial precondition; `return_value` is bound by
/// calling the original function and the postcondition lines are spliced in
/// order before `return return_value`.
pub fn wrap_postcondition(
    postcondition: &str,
    signature: &str,
    entry_point: &str,
) -> Result<String, PromptError> {
    let scanned = pysrc::scan(postcondition)?;
    let statements: Vec<&str> = scanned
        .lines()
        .iter()
        .enumerate()
        .filter(|(_, line)| !line.blank)
        .map(|(idx, _)| scanned.line_text(idx))
        .collect();
    if statements.is_empty() {
        return Err(PromptError::NotAnAssert(String::new()));
    }
    for stmt in &statements {
        let first_word = stmt.split_whitespace().next().unwrap_or("");
        if first_word != "assert" {
            return Err(PromptError::NotAnAssert(stmt.to_string()));
        }
    }

    let params = pysrc::param_list_text(signature)
        .ok_or_else(|| PromptError::BadSignature(signature.to_string()))?
        .trim()
        .to_string();
    let args = pysrc::param_names(signature).join(", ");

    let mut body = String::new();
    for (idx, line) in scanned.lines().iter().enumerate() {
        if line.blank {
            continue;
        }
        // Logical lines may span physical lines; re-indent each physical
        // line by four spaces after removing the statement's own indent.
        let raw = &scanned.src()[line.start..line.end];
        for (pidx, physical) in raw.lines().enumerate() {
            let stripped = if pidx == 0 {
                physical.trim_start()
            } else {
                physical
            };
            body.push_str("    ");
            body.push_str(stripped.trim_end());
            body.push('\n');
        }
        let _ = idx;
    }

    Ok(format!(
        "def {entry_point}_contract({params}):\n    return_value = {entry_point}({args})\n{body}    return return_value\n"
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::extract_context;

    const FIG1_FILE: &str = "def largest_prime_factor(n: int):\n    \"\"\"Return the largest prime factor of n. Assume n > 1 and is not a prime.\"\"\"\n    return 0\n";

    #[test]
    fn nl2contract_prompt_fills_all_holes() {
        let slice = extract_context(FIG1_FILE, "largest_prime_factor").unwrap();
        let bundle = build_nl2contract_prompt(&slice, "largest_prime_factor");
        assert_eq!(bundle.expected_contract_name, "largest_prime_factor_contract");
        assert!(bundle.user_text.contains("`largest_prime_factor_contract`"));
        assert!(bundle
            .user_text
            .contains("Return the largest prime factor of n. Assume n > 1 and is not a prime."));
        assert!(bundle.user_text.contains("def largest_prime_factor(n: int):"));
        assert!(bundle.user_text.contains("preconditions in a try-catch block"));
        assert!(bundle.system_text.is_none());
        // Exactly one occurrence of the contract-name hole.
        assert_eq!(
            bundle.user_text.matches("largest_prime_factor_contract").count(),
            1
        );
    }

    #[test]
    fn empty_context_omits_context_lines() {
        let slice = extract_context(FIG1_FILE, "largest_prime_factor").unwrap();
        let bundle = build_nl2contract_prompt(&slice, "largest_prime_factor");
        let fence_start = bundle.user_text.find("```").unwrap();
        let inner = &bundle.user_text[fence_start + 3..];
        let inner = &inner[..inner.find("```").unwrap()];
        assert_eq!(inner.trim_start_matches('\n').find("def "), Some(0));
        assert!(!inner.contains("\n\n\n"));
    }

    #[test]
    fn nl2postcond_prompt_requests_return_value_assert() {
        let slice = extract_context(FIG1_FILE, "largest_prime_factor").unwrap();
        let bundle = build_nl2postcond_prompt(&slice, "largest_prime_factor");
        assert!(bundle.user_text.contains("`return_value`"));
        assert!(bundle.user_text.contains("assert statement only"));
        assert_eq!(bundle.prompt_kind, PromptKind::Nl2Postcond);
    }

    #[test]
    fn rendering_is_deterministic() {
        let slice = extract_context(FIG1_FILE, "largest_prime_factor").unwrap();
        let a = build_nl2contract_prompt(&slice, "largest_prime_factor");
        let b = build_nl2contract_prompt(&slice, "largest_prime_factor");
        assert_eq!(a, b);
    }

    #[test]
    fn wrapped_postcondition_matches_layout() {
        let wrapped = wrap_postcondition(
            "assert n % return_value == 0\nassert all(return_value % i != 0 for i in range(2, return_value))",
            "def largest_prime_factor(n: int):",
            "largest_prime_factor",
        )
        .unwrap();
        let expected = "def largest_prime_factor_contract(n: int):\n    return_value = largest_prime_factor(n)\n    assert n % return_value == 0\n    assert all(return_value % i != 0 for i in range(2, return_value))\n    return return_value\n";
        assert_eq!(wrapped, expected);
    }

    #[test]
    fn trivial_postcondition_wraps_cleanly() {
        let wrapped =
            wrap_postcondition("assert True", "def f(a, b=2):", "f").unwrap();
        assert!(wrapped.contains("def f_contract(a, b=2):"));
        assert!(wrapped.contains("return_value = f(a, b)"));
    }

    #[test]
    fn multiline_assert_preserved_in_order() {
        let post = "assert return_value >= 0\nassert (return_value\n        <= 10)";
        let wrapped = wrap_postcondition(post, "def f(x):", "f").unwrap();
        let first = wrapped.find("assert return_value >= 0").unwrap();
        let second = wrapped.find("assert (return_value").unwrap();
        assert!(first < second);
    }

    #[test]
    fn non_assert_postcondition_rejected() {
        let err = wrap_postcondition("return_value == 3", "def f(x):", "f").unwrap_err();
        assert!(matches!(err, PromptError::NotAnAssert(_)));
    }
}
