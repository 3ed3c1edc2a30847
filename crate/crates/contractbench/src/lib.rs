//! Benchmark harness for inferring functional contracts of Python functions
//! from their docstrings and validating the results against reference
//! implementations, reference preconditions, and buggy mutants.
//!
//! The crate is organized around the stages of that pipeline:
//!
//! - [`value`]: the restricted value-literal grammar used for test inputs and
//!   witnesses, plus deep structural equality with Python semantics.
//! - [`pysrc`]: a lexical scanner for Python source (logical lines, `def`
//!   blocks, docstrings, call sites) shared by the extractor and the codec.
//! - [`runtime`]: sandboxed execution of subject Python code in a CPython
//!   subprocess with per-call time budgets.
//! - [`model`]: shared domain types ([`model::ReferenceTask`],
//!   [`model::Verdict`], ...) and the core predicates (specification
//!   violation, violation classification).
//! - [`context`]: extraction of the stub + file-context slice fed to prompts.
//! - [`prompt`]: the two prompt templates and the postcondition wrapper.
//! - [`client`]: chat-completions sampling with a replayable completion store.
//! - [`codec`]: contract extraction from completions, shape checking, and the
//!   instrumented forms consumed by verifier and tester backends.
//! - [`harness`]: verification-guided validation (soundness, completeness,
//!   test-set checks, mutant confirmation) over pluggable backends, including
//!   the built-in exhaustive oracle.
//! - [`metrics`]: sound@k / accept@k estimators, aggregation, and reports.

pub mod client;
pub mod codec;
pub mod context;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod prompt;
pub mod pysrc;
pub mod runtime;
pub mod value;
