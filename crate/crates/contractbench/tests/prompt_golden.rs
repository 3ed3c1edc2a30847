//! Golden-file regression tests for prompt rendering and the postcondition
//! wrapper. Fixtures live under `tests/golden/`; set
//! `CONTRACTBENCH_REGEN_GOLDEN=1` to rewrite them after an intentional
//! template change.

use std::path::PathBuf;

use contractbench::context::extract_context;
use contractbench::prompt::{build_nl2contract_prompt, build_nl2postcond_prompt, wrap_postcondition};

const FIG1_FILE: &str = "def largest_prime_factor(n: int):\n    \"\"\"Return the largest prime factor of n. Assume n > 1 and is not a prime.\"\"\"\n    return 0\n";

const CONTEXT_FILE: &str = r#"from typing import List

LIMIT = 100

def is_prime(k: int) -> bool:
    """Return True if k is prime."""
    return k >= 2 and all(k % i != 0 for i in range(2, k))

def primes_up_to(n: int) -> List[int]:
    """Collect primes up to min(n, LIMIT)."""
    return [i for i in range(2, min(n, LIMIT) + 1) if is_prime(i)]
"#;

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn check_golden(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var("CONTRACTBENCH_REGEN_GOLDEN").is_ok() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("missing golden file {}: {e}", path.display()));
    assert_eq!(actual, expected, "golden mismatch for {name}");
}

#[test]
fn nl2contract_single_function_golden() {
    let slice = extract_context(FIG1_FILE, "largest_prime_factor").unwrap();
    let bundle = build_nl2contract_prompt(&slice, "largest_prime_factor");
    check_golden("nl2contract_largest_prime_factor.txt", &bundle.user_text);
}

#[test]
fn nl2contract_with_context_golden() {
    let slice = extract_context(CONTEXT_FILE, "primes_up_to").unwrap();
    let bundle = build_nl2contract_prompt(&slice, "primes_up_to");
    assert!(bundle.user_text.contains("LIMIT = 100"));
    assert!(bundle.user_text.contains("def is_prime(k: int) -> bool:"));
    check_golden("nl2contract_primes_up_to.txt", &bundle.user_text);
}

#[test]
fn nl2postcond_single_function_golden() {
    let slice = extract_context(FIG1_FILE, "largest_prime_factor").unwrap();
    let bundle = build_nl2postcond_prompt(&slice, "largest_prime_factor");
    check_golden("nl2postcond_largest_prime_factor.txt", &bundle.user_text);
}

#[test]
fn wrapped_postcondition_golden() {
    let wrapped = wrap_postcondition(
        "assert n % return_value == 0\nassert all(return_value % i != 0 for i in range(2, return_value))",
        "def largest_prime_factor(n: int):",
        "largest_prime_factor",
    )
    .unwrap();
    check_golden("wrapped_postcondition_largest_prime_factor.py", &wrapped);
}

/// The prompt's code block re-parses to the same signature and docstring.
#[test]
fn prompt_roundtrip_recovers_stub() {
    let slice = extract_context(CONTEXT_FILE, "primes_up_to").unwrap();
    let bundle = build_nl2contract_prompt(&slice, "primes_up_to");
    let fence_start = bundle.user_text.find("```").unwrap() + 3;
    let fence_end = bundle.user_text[fence_start..].find("```").unwrap() + fence_start;
    let code = &bundle.user_text[fence_start..fence_end];
    let recovered = extract_context(code, "primes_up_to").unwrap();
    assert_eq!(recovered.target_signature, slice.target_signature);
    assert_eq!(recovered.docstring, slice.docstring);
}
