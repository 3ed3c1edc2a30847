//! Verification-guided validation.
//!
//! Soundness is checked in a single verifier call on a composed target that
//! binds the contract to the reference implementation with the reference
//! precondition conjoined into the postconditions: any assertion failure
//! then implies the contract's precondition admitted an input that is either
//! invalid or produces a reference output violating the postcondition.
//! Completeness runs the contract against each confirmed mutant and counts a
//! mutant killed when the verifier produces a violation witness.
//!
//! Backends: an external symbolic verifier (CrossHair) and an external
//! search-based tester (Pynguin), both invoked as subprocesses and optional
//! at install time, plus the built-in exhaustive oracle which enumerates a
//! finite input domain and is always available.

use std::collections::{BTreeMap, BTreeSet};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::codec::{self, CodecError};
use crate::model::{
    classify_violation, ExecError, InputState, Mutant, RawVerifierStatus, ReferenceTask,
    Soundness, ViolationClass, PRECONDITION_ENTRY,
};
use crate::pysrc;
use crate::runtime::{wait_with_deadline, CallStatus, PythonRuntime, RuntimeError};
use crate::value::Value;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("verifier backend failed: {log}")]
    Backend { log: String },
    #[error("domain of {size} inputs exceeds the enumeration cap of {cap}")]
    DomainTooLarge { size: u128, cap: u128 },
    #[error("contract is missing its `_contract` definition")]
    MissingContract,
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Scan(#[from] pysrc::ScanError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// Result of one backend invocation.
#[derive(Debug, Clone)]
pub struct VerifierOutcome {
    pub status: RawVerifierStatus,
    /// Present exactly when `status` is `Violation` and a witness parsed.
    pub witness: Option<InputState>,
    pub wall_seconds: f64,
    pub raw_log: String,
}

/// Finite domain of one parameter, enumerable for the oracle backend.
#[derive(Debug, Clone)]
pub enum ParamDomain {
    Int { min: i64, max: i64 },
    Bool,
    /// Explicit values (floats, tuples, mixed types).
    Choice(Vec<Value>),
    Str { alphabet: Vec<char>, max_len: usize },
    List { element: Box<ParamDomain>, max_len: usize },
    Tuple(Vec<ParamDomain>),
}

impl ParamDomain {
    fn size(&self) -> Option<u128> {
        match self {
            ParamDomain::Int { min, max } => {
                (*max >= *min).then(|| (*max as i128 - *min as i128 + 1) as u128)
            }
            ParamDomain::Bool => Some(2),
            ParamDomain::Choice(values) => Some(values.len() as u128),
            ParamDomain::Str { alphabet, max_len } => {
                let base = alphabet.len() as u128;
                let mut total: u128 = 0;
                let mut layer: u128 = 1;
                for _ in 0..=*max_len {
                    total = total.checked_add(layer)?;
                    layer = layer.checked_mul(base)?;
                }
                Some(total)
            }
            ParamDomain::List { element, max_len } => {
                let base = element.size()?;
                let mut total: u128 = 0;
                let mut layer: u128 = 1;
                for _ in 0..=*max_len {
                    total = total.checked_add(layer)?;
                    layer = layer.checked_mul(base)?;
                }
                Some(total)
            }
            ParamDomain::Tuple(elements) => {
                let mut total: u128 = 1;
                for e in elements {
                    total = total.checked_mul(e.size()?)?;
                }
                Some(total)
            }
        }
    }

    fn enumerate(&self) -> Vec<Value> {
        match self {
            ParamDomain::Int { min, max } => (*min..=*max).map(Value::Int).collect(),
            ParamDomain::Bool => vec![Value::Bool(false), Value::Bool(true)],
            ParamDomain::Choice(values) => values.clone(),
            ParamDomain::Str { alphabet, max_len } => {
                let mut out = vec![String::new()];
                let mut layer = vec![String::new()];
                for _ in 0..*max_len {
                    let mut next = Vec::new();
                    for prefix in &layer {
                        for &ch in alphabet {
                            let mut s = prefix.clone();
                            s.push(ch);
                            next.push(s);
                        }
                    }
                    out.extend(next.iter().cloned());
                    layer = next;
                }
                out.into_iter().map(Value::Str).collect()
            }
            ParamDomain::List { element, max_len } => {
                let items = element.enumerate();
                let mut out: Vec<Vec<Value>> = vec![Vec::new()];
                let mut layer: Vec<Vec<Value>> = vec![Vec::new()];
                for _ in 0..*max_len {
                    let mut next = Vec::new();
                    for prefix in &layer {
                        for item in &items {
                            let mut xs = prefix.clone();
                            xs.push(item.clone());
                            next.push(xs);
                        }
                    }
                    out.extend(next.iter().cloned());
                    layer = next;
                }
                out.into_iter().map(Value::List).collect()
            }
            ParamDomain::Tuple(elements) => {
                let mut combos: Vec<Vec<Value>> = vec![Vec::new()];
                for e in elements {
                    let items = e.enumerate();
                    let mut next = Vec::new();
                    for combo in &combos {
                        for item in &items {
                            let mut xs = combo.clone();
                            xs.push(item.clone());
                            next.push(xs);
                        }
                    }
                    combos = next;
                }
                combos.into_iter().map(Value::Tuple).collect()
            }
        }
    }
}

/// Finite input domain for a whole signature.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    params: Vec<(String, ParamDomain)>,
    cap: u128,
}

pub const DEFAULT_ENUMERATION_CAP: u128 = 200_000;

impl DomainSpec {
    pub fn new(params: Vec<(String, ParamDomain)>) -> Self {
        DomainSpec {
            params,
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }

    pub fn with_cap(mut self, cap: u128) -> Self {
        self.cap = cap;
        self
    }

    pub fn param_names(&self) -> Vec<String> {
        self.params.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn total_size(&self) -> Option<u128> {
        let mut total: u128 = 1;
        for (_, domain) in &self.params {
            total = total.checked_mul(domain.size()?)?;
        }
        Some(total)
    }

    /// Materialize every input tuple, in deterministic lexicographic order
    /// (first parameter outermost).
    pub fn enumerate(&self) -> Result<Vec<Vec<Value>>, HarnessError> {
        let size = self.total_size().ok_or(HarnessError::DomainTooLarge {
            size: u128::MAX,
            cap: self.cap,
        })?;
        if size > self.cap {
            return Err(HarnessError::DomainTooLarge {
                size,
                cap: self.cap,
            });
        }
        let mut combos: Vec<Vec<Value>> = vec![Vec::new()];
        for (_, domain) in &self.params {
            let items = domain.enumerate();
            let mut next = Vec::with_capacity(combos.len() * items.len().max(1));
            for combo in &combos {
                for item in &items {
                    let mut xs = combo.clone();
                    xs.push(item.clone());
                    next.push(xs);
                }
            }
            combos = next;
        }
        Ok(combos)
    }
}

/// Verifier backend selection for soundness/completeness checks.
pub enum VerifierBackend<'a> {
    /// Built-in oracle: enumerate the task's finite domain.
    Exhaustive(&'a DomainSpec),
    /// External symbolic verifier invoked as a subprocess.
    CrossHair(&'a CrossHairBackend),
}

/// Enumerate the full domain against a self-contained instrumented target:
/// the first assertion-failing input is the violation witness. Inputs the
/// target crashes on are recorded in the log and skipped (the violation
/// signal is assertion failure only). The optional wall cap bounds the whole
/// run; hitting it yields `Unknown`.
pub fn exhaustive_verify(
    runtime: &PythonRuntime,
    target: &str,
    entry: &str,
    domain: &DomainSpec,
    wall_cap: Option<Duration>,
) -> Result<VerifierOutcome, HarnessError> {
    let started = Instant::now();
    let inputs = domain.enumerate()?;
    let names = domain.param_names();
    let statuses = match runtime.batch_call(&[target], entry, &inputs, true, wall_cap) {
        Ok(statuses) => statuses,
        Err(RuntimeError::WallClock(cap)) => {
            return Ok(VerifierOutcome {
                status: RawVerifierStatus::Unknown,
                witness: None,
                wall_seconds: started.elapsed().as_secs_f64(),
                raw_log: format!("enumeration killed at wall cap {cap:.1}s"),
            })
        }
        Err(other) => return Err(other.into()),
    };
    let mut crashes = 0usize;
    let mut log = String::new();
    for (input, status) in inputs.iter().zip(&statuses) {
        match status {
            CallStatus::Violation { message } => {
                let witness = InputState::positional(&names, input.clone());
                log.push_str(&format!("violation at {witness}: {message}\n"));
                return Ok(VerifierOutcome {
                    status: RawVerifierStatus::Violation,
                    witness: Some(witness),
                    wall_seconds: started.elapsed().as_secs_f64(),
                    raw_log: log,
                });
            }
            CallStatus::Crash { etype, message } => {
                crashes += 1;
                if crashes <= 5 {
                    let state = InputState::positional(&names, input.clone());
                    log.push_str(&format!("crash at {state}: {etype}: {message}\n"));
                }
            }
            CallStatus::Timeout => {
                crashes += 1;
                if crashes <= 5 {
                    let state = InputState::positional(&names, input.clone());
                    log.push_str(&format!("per-call budget exceeded at {state}\n"));
                }
            }
            _ => {}
        }
    }
    log.push_str(&format!(
        "enumerated {} inputs, {} skipped\n",
        statuses.len(),
        crashes
    ));
    Ok(VerifierOutcome {
        status: RawVerifierStatus::Safe,
        witness: None,
        wall_seconds: started.elapsed().as_secs_f64(),
        raw_log: log,
    })
}

/// Like [`exhaustive_verify`] but collects every violating input instead of
/// stopping at the first.
pub fn exhaustive_violations(
    runtime: &PythonRuntime,
    target: &str,
    entry: &str,
    domain: &DomainSpec,
) -> Result<Vec<InputState>, HarnessError> {
    let inputs = domain.enumerate()?;
    let names = domain.param_names();
    let statuses = runtime.batch_call(&[target], entry, &inputs, false, None)?;
    Ok(inputs
        .iter()
        .zip(&statuses)
        .filter(|(_, status)| status.is_violation())
        .map(|(input, _)| InputState::positional(&names, input.clone()))
        .collect())
}

/// External CrossHair invocation (`crosshair check --analysis_kind=asserts`).
#[derive(Debug, Clone)]
pub struct CrossHairBackend {
    pub command: String,
    /// Extra arguments appended to every invocation.
    pub extra_args: Vec<String>,
}

impl Default for CrossHairBackend {
    fn default() -> Self {
        CrossHairBackend {
            command: "crosshair".into(),
            extra_args: Vec::new(),
        }
    }
}

impl CrossHairBackend {
    pub fn is_available(&self) -> bool {
        Command::new(&self.command)
            .arg("--help")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .map(|s| s.success())
            .unwrap_or(false)
    }

    /// Run the backend on a target file in a fresh working directory. The
    /// subprocess is killed at `timeout`, which maps to `Unknown`.
    pub fn verify(
        &self,
        target: &str,
        entry: &str,
        param_names: &[String],
        timeout: Duration,
    ) -> Result<VerifierOutcome, HarnessError> {
        let started = Instant::now();
        let dir = tempfile::tempdir().map_err(|e| HarnessError::Backend {
            log: format!("tempdir: {e}"),
        })?;
        let path = dir.path().join("target_module.py");
        std::fs::write(&path, target).map_err(|e| HarnessError::Backend {
            log: format!("write target: {e}"),
        })?;
        let child = Command::new(&self.command)
            .arg("check")
            .arg("--analysis_kind=asserts")
            .args(&self.extra_args)
            .arg(&path)
            .current_dir(dir.path())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn();
        let child = match child {
            Ok(child) => child,
            Err(e) => {
                return Ok(VerifierOutcome {
                    status: RawVerifierStatus::BackendError,
                    witness: None,
                    wall_seconds: started.elapsed().as_secs_f64(),
                    raw_log: format!("failed to spawn {:?}: {e}", self.command),
                })
            }
        };
        let output = match wait_with_deadline(child, timeout) {
            Ok(output) => output,
            Err(RuntimeError::WallClock(cap)) => {
                return Ok(VerifierOutcome {
                    status: RawVerifierStatus::Unknown,
                    witness: None,
                    wall_seconds: started.elapsed().as_secs_f64(),
                    raw_log: format!("killed at {cap:.1}s"),
                })
            }
            Err(e) => return Err(e.into()),
        };
        let mut log = String::from_utf8_lossy(&output.stdout).to_string();
        log.push_str(&String::from_utf8_lossy(&output.stderr));
        let wall_seconds = started.elapsed().as_secs_f64();

        // Counterexample lines look like:
        //   target_module.py:12: error: AssertionError when calling f_contract(n = 9)
        if let Some(call_pos) = log.find("when calling ") {
            let tail = &log[call_pos + "when calling ".len()..];
            let witness = parse_crosshair_call(tail, entry, param_names);
            return Ok(VerifierOutcome {
                status: RawVerifierStatus::Violation,
                witness,
                wall_seconds,
                raw_log: log,
            });
        }
        if log.contains("error:") {
            // A violation whose witness line we could not parse.
            return Ok(VerifierOutcome {
                status: RawVerifierStatus::Violation,
                witness: None,
                wall_seconds,
                raw_log: log,
            });
        }
        if output.status.success() {
            Ok(VerifierOutcome {
                status: RawVerifierStatus::Safe,
                witness: None,
                wall_seconds,
                raw_log: log,
            })
        } else {
            Ok(VerifierOutcome {
                status: RawVerifierStatus::BackendError,
                witness: None,
                wall_seconds,
                raw_log: log,
            })
        }
    }
}

/// Parse `f_contract(n = 9, xs = [1, 2])` into an input state.
fn parse_crosshair_call(text: &str, entry: &str, param_names: &[String]) -> Option<InputState> {
    let rest = text.trim_start().strip_prefix(entry)?.trim_start();
    let rest = rest.strip_prefix('(')?;
    let close = balanced_paren_end(rest)?;
    let args_text = &rest[..close];
    let mut args = Vec::new();
    for (idx, part) in split_top_level(args_text).into_iter().enumerate() {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (name, literal) = match part.split_once('=') {
            Some((n, v)) if !v.starts_with('=') => (n.trim().to_string(), v.trim()),
            _ => (
                param_names.get(idx).cloned().unwrap_or_else(|| format!("arg{idx}")),
                part,
            ),
        };
        args.push((name, Value::parse(literal).ok()?));
    }
    Some(InputState::new(args))
}

fn balanced_paren_end(text: &str) -> Option<usize> {
    let mut depth = 1usize;
    for (i, b) in text.bytes().enumerate() {
        match b {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn split_top_level(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    let mut in_str: Option<u8> = None;
    for (i, b) in text.bytes().enumerate() {
        if let Some(q) = in_str {
            if b == q && !text[..i].ends_with('\\') {
                in_str = None;
            }
            continue;
        }
        match b {
            b'"' | b'\'' => in_str = Some(b),
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => depth = depth.saturating_sub(1),
            b',' if depth == 0 => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}

const PRE_GT_ALIAS: &str = "_reference_precondition";

/// Compose the self-contained soundness target: contract bound to the
/// reference implementation, with the reference precondition conjoined into
/// the postconditions (checked right after the precondition gate, before
/// the reference is called). The conjunct is spelled as an `if`-guarded
/// assertion rather than a bare `assert`: symbolic backends treat the
/// contiguous leading asserts of a function as assumed preconditions, and
/// the conjunct must be checked, not assumed.
pub fn build_soundness_target(
    task: &ReferenceTask,
    contract: &str,
) -> Result<String, HarnessError> {
    let entry = task.contract_entry();
    let conjoined = insert_after_gate(contract, &entry, |params| {
        format!(
            "if not {PRE_GT_ALIAS}({}): assert False, \"reference precondition violated\"",
            params.join(", ")
        )
    })?;
    let mut parts: Vec<&str> = Vec::new();
    if !task.file_context.trim().is_empty() {
        parts.push(task.file_context.trim_end());
    }
    parts.push(task.reference_impl.trim_end());
    parts.push(task.reference_precondition.trim_end());
    let alias = format!("{PRE_GT_ALIAS} = {PRECONDITION_ENTRY}");
    parts.push(&alias);
    parts.push(conjoined.trim_end());
    Ok(parts.join("\n\n") + "\n")
}

/// Compose the completeness/test target: contract bound to an arbitrary
/// implementation, with the contract's own precondition as the only gate.
pub fn build_check_target(
    task: &ReferenceTask,
    impl_source: &str,
    contract: &str,
) -> Result<String, HarnessError> {
    let mut parts: Vec<&str> = Vec::new();
    if !task.file_context.trim().is_empty() {
        parts.push(task.file_context.trim_end());
    }
    parts.push(impl_source.trim_end());
    parts.push(contract.trim_end());
    Ok(parts.join("\n\n") + "\n")
}

/// Insert a statement produced by `make_stmt` (from the contract's own
/// parameter names) directly after the precondition gate of the contract
/// def: after the try/except block when present, otherwise as the first
/// body statement.
fn insert_after_gate(
    contract: &str,
    contract_name: &str,
    make_stmt: impl Fn(&[String]) -> String,
) -> Result<String, HarnessError> {
    let file = pysrc::scan(contract)?;
    let def = file
        .defs_named(contract_name)
        .into_iter()
        .find(|d| d.parent.is_none())
        .ok_or(HarnessError::MissingContract)?;
    let params = pysrc::param_names(file.signature_text(def));
    let statement = make_stmt(&params);

    let body: Vec<usize> = def
        .body_lines
        .clone()
        .filter(|&i| !file.lines()[i].blank)
        .collect();
    let first = *body.first().ok_or(HarnessError::MissingContract)?;
    let body_indent = file.lines()[first].indent;
    let docstring_line = file.docstring(def).map(|d| d.line);
    let direct: Vec<usize> = body
        .iter()
        .copied()
        .filter(|&i| file.lines()[i].indent == body_indent && Some(i) != docstring_line)
        .collect();

    let is_try = |idx: usize| file.line_text(idx).trim_end() == "try:";
    let insertion_line = match direct.iter().copied().find(|&i| is_try(i)) {
        Some(try_line) => direct
            .iter()
            .copied()
            .find(|&i| {
                i > try_line && {
                    let word = file.line_text(i);
                    !word.starts_with("except") && !word.starts_with("finally") && !word.starts_with("else")
                }
            })
            .ok_or(HarnessError::MissingContract)?,
        None => *direct.first().ok_or(HarnessError::MissingContract)?,
    };
    let at = file.lines()[insertion_line].start;
    let mut out = contract.to_string();
    out.insert_str(at, &format!("{}{}\n", " ".repeat(body_indent), statement));
    Ok(out)
}

/// Soundness check: run the backend on the instrumented soundness target.
/// A violation makes the contract unsound — sub-classified by whether the
/// witness satisfies the reference precondition — while `safe` and
/// `unknown`/timeout both count as sound (the raw status is retained).
pub fn check_soundness(
    runtime: &PythonRuntime,
    task: &ReferenceTask,
    contract: &str,
    backend: &VerifierBackend<'_>,
    timeout: Duration,
) -> Result<(VerifierOutcome, Soundness), HarnessError> {
    let entry = task.contract_entry();
    let target = build_soundness_target(task, contract)?;
    let instrumented = codec::instrument_for_verifier(&target)?;
    let outcome = match backend {
        VerifierBackend::Exhaustive(domain) => {
            exhaustive_verify(runtime, &instrumented, &entry, domain, Some(timeout))?
        }
        VerifierBackend::CrossHair(ch) => {
            ch.verify(&instrumented, &entry, &task.param_names(), timeout)?
        }
    };
    if outcome.status == RawVerifierStatus::BackendError {
        return Err(HarnessError::Backend {
            log: outcome.raw_log,
        });
    }
    let soundness = match outcome.status {
        RawVerifierStatus::Violation => match &outcome.witness {
            Some(witness) => {
                let pre = runtime.eval_predicate(
                    &task.precondition_sources(),
                    PRECONDITION_ENTRY,
                    &[witness.values()],
                )?;
                match pre[0] {
                    Some(true) => Soundness::UnsoundPostcondition,
                    // A precondition that rejects or cannot evaluate the
                    // witness marks it invalid.
                    _ => Soundness::UnsoundPrecondition,
                }
            }
            // Violation without a parsed witness: no sub-classification is
            // possible; counted as a postcondition violation.
            None => Soundness::UnsoundPostcondition,
        },
        _ => Soundness::Sound,
    };
    Ok((outcome, soundness))
}

/// Per-mutant completeness results.
#[derive(Debug, Clone, Default)]
pub struct CompletenessOutcome {
    pub killed: BTreeSet<String>,
    pub witnesses: BTreeMap<String, InputState>,
    /// Backend errors per mutant; such mutants count as not killed.
    pub errors: BTreeMap<String, String>,
    /// Concatenated per-mutant backend logs, for attribution.
    pub raw_log: String,
    pub wall_seconds: f64,
}

impl CompletenessOutcome {
    pub fn is_complete(&self, checked: &BTreeSet<String>) -> bool {
        checked.iter().all(|m| self.killed.contains(m))
    }
}

/// Run the backend on the contract bound to each mutant; a mutant is killed
/// when a violation is found within the per-mutant timeout.
pub fn check_completeness(
    runtime: &PythonRuntime,
    task: &ReferenceTask,
    contract: &str,
    mutants: &[&Mutant],
    backend: &VerifierBackend<'_>,
    timeout_per_mutant: Duration,
) -> Result<CompletenessOutcome, HarnessError> {
    let started = Instant::now();
    let entry = task.contract_entry();
    let mut out = CompletenessOutcome::default();
    for mutant in mutants {
        let target = build_check_target(task, &mutant.impl_source, contract)?;
        let instrumented = match codec::instrument_for_verifier(&target) {
            Ok(i) => i,
            Err(e) => {
                out.errors.insert(mutant.mutant_id.clone(), e.to_string());
                continue;
            }
        };
        let outcome = match backend {
            VerifierBackend::Exhaustive(domain) => exhaustive_verify(
                runtime,
                &instrumented,
                &entry,
                domain,
                Some(timeout_per_mutant),
            ),
            VerifierBackend::CrossHair(ch) => {
                ch.verify(&instrumented, &entry, &task.param_names(), timeout_per_mutant)
            }
        };
        match outcome {
            Ok(outcome) => {
                out.raw_log
                    .push_str(&format!("== {} ==\n{}", mutant.mutant_id, outcome.raw_log));
                match outcome.status {
                    RawVerifierStatus::Violation => {
                        out.killed.insert(mutant.mutant_id.clone());
                        match outcome.witness {
                            Some(w) => {
                                out.witnesses.insert(mutant.mutant_id.clone(), w);
                            }
                            None => {
                                out.errors.insert(
                                    mutant.mutant_id.clone(),
                                    "violation without parsed witness".into(),
                                );
                            }
                        }
                    }
                    RawVerifierStatus::Safe | RawVerifierStatus::Unknown => {}
                    RawVerifierStatus::BackendError => {
                        out.errors
                            .insert(mutant.mutant_id.clone(), outcome.raw_log.clone());
                    }
                }
            }
            Err(e) => {
                out.errors.insert(mutant.mutant_id.clone(), e.to_string());
            }
        }
    }
    out.wall_seconds = started.elapsed().as_secs_f64();
    Ok(out)
}

/// Test-set checks over the bundled inputs.
#[derive(Debug, Clone)]
pub struct TestSetOutcome {
    /// No bundled test input triggers a violation on the reference.
    pub test_set_correct: bool,
    /// Every mutant with known triggers is exposed by at least one trigger.
    pub bug_complete: bool,
    /// Inputs skipped because execution exceeded the budget or crashed.
    pub skipped: usize,
    pub wall_seconds: f64,
}

pub fn check_test_set(
    runtime: &PythonRuntime,
    task: &ReferenceTask,
    contract: &str,
) -> Result<TestSetOutcome, HarnessError> {
    let started = Instant::now();
    let entry = task.contract_entry();
    let target = build_check_target(task, &task.reference_impl, contract)?;
    let inputs: Vec<Vec<Value>> = task.test_inputs.iter().map(InputState::values).collect();
    let mut skipped = 0usize;
    let mut test_set_correct = true;
    if !inputs.is_empty() {
        let statuses = runtime.batch_call(&[&target], &entry, &inputs, false, None)?;
        for status in &statuses {
            match status {
                CallStatus::Violation { .. } => test_set_correct = false,
                CallStatus::Timeout | CallStatus::Crash { .. } => skipped += 1,
                _ => {}
            }
        }
    }

    let mut bug_complete = true;
    for mutant in &task.mutants {
        if mutant.known_triggers.is_empty() {
            continue;
        }
        let mutant_target = build_check_target(task, &mutant.impl_source, contract)?;
        let trigger_inputs: Vec<Vec<Value>> =
            mutant.known_triggers.iter().map(InputState::values).collect();
        let statuses =
            runtime.batch_call(&[&mutant_target], &entry, &trigger_inputs, true, None)?;
        if !statuses.iter().any(CallStatus::is_violation) {
            bug_complete = false;
        }
    }
    Ok(TestSetOutcome {
        test_set_correct,
        bug_complete,
        skipped,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Differentially confirm that a mutant diverges from the reference on some
/// valid input, searching known triggers first and then the test inputs.
pub fn confirm_mutant(
    runtime: &PythonRuntime,
    task: &ReferenceTask,
    mutant: &Mutant,
) -> Result<(bool, Option<InputState>), HarnessError> {
    let mut candidates: Vec<InputState> = mutant.known_triggers.clone();
    for input in &task.test_inputs {
        if !candidates.contains(input) {
            candidates.push(input.clone());
        }
    }
    if candidates.is_empty() {
        return Ok((false, None));
    }
    let inputs: Vec<Vec<Value>> = candidates.iter().map(InputState::values).collect();
    let rows = runtime.compare(
        &task.sources_with(&mutant.impl_source),
        &task.sources_with(&task.reference_impl),
        &task.precondition_sources(),
        &task.entry_point,
        PRECONDITION_ENTRY,
        &inputs,
        None,
    )?;
    for (input, row) in candidates.iter().zip(&rows) {
        if row.precondition != Some(true) {
            continue;
        }
        let diverges = match (&row.impl_status, &row.ref_status) {
            (CallStatus::Ok { .. }, CallStatus::Ok { .. }) => row.equal == Some(false),
            // A crash on a valid input is divergent behavior; a timeout is
            // inconclusive and the input is skipped.
            (CallStatus::Timeout, _) | (_, CallStatus::Timeout) => false,
            (CallStatus::Crash { .. }, CallStatus::Ok { .. }) => true,
            (CallStatus::Violation { .. }, CallStatus::Ok { .. }) => true,
            _ => false,
        };
        if diverges {
            return Ok((true, Some(input.clone())));
        }
    }
    Ok((false, None))
}

/// External Pynguin invocation for contract-driven random testing.
#[derive(Debug, Clone)]
pub struct PynguinBackend {
    pub command: String,
    pub extra_args: Vec<String>,
}

impl Default for PynguinBackend {
    fn default() -> Self {
        PynguinBackend {
            command: "pynguin".into(),
            extra_args: Vec::new(),
        }
    }
}

impl PynguinBackend {
    pub fn is_available(&self) -> bool {
        // The tool refuses to run (even --help) without its opt-in variable.
        Command::new(&self.command)
            .arg("--help")
            .env("PYNGUIN_DANGER_AWARE", "1")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .map(|s| s.success())
            .unwrap_or(false)
    }
}

/// Drive the search-based tester against a program already injected with a
/// contract function (see [`codec::inject_for_tester`]). Generated tests are
/// replayed through the subject runtime to recover the inputs that made the
/// contract assert, and each is classified against the reference behavior.
pub fn run_tester(
    runtime: &PythonRuntime,
    task: &ReferenceTask,
    program_with_contract: &str,
    backend: &PynguinBackend,
    budget: Duration,
) -> Result<Vec<ViolationClass>, HarnessError> {
    let dir = tempfile::tempdir().map_err(|e| HarnessError::Backend {
        log: format!("tempdir: {e}"),
    })?;
    let module_name = "subject_under_test";
    std::fs::write(dir.path().join(format!("{module_name}.py")), program_with_contract)
        .map_err(|e| HarnessError::Backend {
            log: format!("write module: {e}"),
        })?;
    let out_dir = dir.path().join("generated");
    std::fs::create_dir_all(&out_dir).ok();

    let child = Command::new(&backend.command)
        .arg("--project-path")
        .arg(dir.path())
        .arg("--module-name")
        .arg(module_name)
        .arg("--output-path")
        .arg(&out_dir)
        .arg("--maximum-search-time")
        .arg(budget.as_secs().max(1).to_string())
        .args(&backend.extra_args)
        .env("PYNGUIN_DANGER_AWARE", "1")
        .current_dir(dir.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| HarnessError::Backend {
            log: format!("failed to spawn {:?}: {e}", backend.command),
        })?;
    // Generous grace on top of the search budget for startup and export.
    let output = wait_with_deadline(child, budget + Duration::from_secs(120))?;
    let log = format!(
        "{}{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );

    let names = task.param_names();
    let entry = task.contract_entry();
    let test_sources = collect_generated(&out_dir);
    if test_sources.is_empty() {
        return Err(HarnessError::Backend {
            log: format!("tester produced no test files; log:\n{log}"),
        });
    }
    // Replay generated tests to recover the inputs that made the contract
    // assert, then classify each against the reference behavior. The
    // program under test serves as the implementation (the contract def it
    // carries is inert for direct entry-point calls).
    let mut violations = Vec::new();
    for test_source in test_sources {
        let witnesses = runtime.replay_tester_inputs(
            program_with_contract,
            module_name,
            &test_source,
            &entry,
        )?;
        for values in witnesses {
            let input = InputState::positional(&names, values);
            if let Ok(class) = classify_violation(runtime, task, program_with_contract, &input) {
                violations.push(class);
            }
        }
    }
    Ok(violations)
}

fn collect_generated(out_dir: &std::path::Path) -> Vec<String> {
    let mut sources = Vec::new();
    if let Ok(entries) = std::fs::read_dir(out_dir) {
        for file in entries.flatten() {
            if file.path().extension().map(|e| e == "py").unwrap_or(false) {
                if let Ok(text) = std::fs::read_to_string(file.path()) {
                    sources.push(text);
                }
            }
        }
    }
    sources
}

#[cfg(test)]
mod tests {
    use super::*;

    fn runtime() -> PythonRuntime {
        PythonRuntime::new()
    }

    fn int_domain(name: &str, min: i64, max: i64) -> DomainSpec {
        DomainSpec::new(vec![(name.into(), ParamDomain::Int { min, max })])
    }

    fn square_task() -> ReferenceTask {
        ReferenceTask {
            task_id: "unit/square".into(),
            entry_point: "square".into(),
            stub: "def square(x: int) -> int:\n    \"\"\"Return x squared. Assume x is a non-negative integer.\"\"\"\n".into(),
            file_context: String::new(),
            reference_impl: "def square(x):\n    return x * x\n".into(),
            reference_precondition:
                "def precondition(x):\n    return isinstance(x, int) and not isinstance(x, bool) and x >= 0\n"
                    .into(),
            test_inputs: vec![
                InputState::new(vec![("x".into(), Value::Int(0))]),
                InputState::new(vec![("x".into(), Value::Int(3))]),
            ],
            mutants: vec![
                Mutant {
                    mutant_id: "m-double".into(),
                    impl_source: "def square(x):\n    return x + x\n".into(),
                    known_triggers: vec![InputState::new(vec![("x".into(), Value::Int(3))])],
                },
                Mutant {
                    mutant_id: "m-same".into(),
                    impl_source: "def square(x):\n    return x * x\n".into(),
                    known_triggers: vec![],
                },
            ],
        }
    }

    const SQUARE_CONTRACT: &str = concat!(
        "def square_contract(x: int):\n",
        "    try:\n",
        "        assert isinstance(x, int) and not isinstance(x, bool)\n",
        "        assert x >= 0\n",
        "    except AssertionError as e:\n",
        "        raise ValueError(f\"Precondition failed: {e}\") from e\n",
        "    result = square(x)\n",
        "    assert result == x * x\n",
        "    return result\n",
    );

    // Accepts every int but asserts non-negativity of the result; the
    // reference violates nothing, invalid inputs do.
    const OVERBROAD_CONTRACT: &str = concat!(
        "def square_contract(x: int):\n",
        "    try:\n",
        "        assert isinstance(x, int) and not isinstance(x, bool)\n",
        "    except AssertionError as e:\n",
        "        raise ValueError(f\"Precondition failed: {e}\") from e\n",
        "    result = square(x)\n",
        "    assert result > 0\n",
        "    return result\n",
    );

    #[test]
    fn domain_enumeration_order_and_cap() {
        let domain = DomainSpec::new(vec![
            ("a".into(), ParamDomain::Int { min: 0, max: 1 }),
            ("b".into(), ParamDomain::Bool),
        ]);
        let inputs = domain.enumerate().unwrap();
        assert_eq!(inputs.len(), 4);
        assert_eq!(inputs[0], vec![Value::Int(0), Value::Bool(false)]);
        assert_eq!(inputs[3], vec![Value::Int(1), Value::Bool(true)]);
        let capped = int_domain("n", 0, 100).with_cap(10);
        assert!(matches!(
            capped.enumerate(),
            Err(HarnessError::DomainTooLarge { size: 101, cap: 10 })
        ));
    }

    #[test]
    fn string_domain_sizes_match_enumeration() {
        let domain = ParamDomain::Str {
            alphabet: vec!['0', '1'],
            max_len: 3,
        };
        assert_eq!(domain.size(), Some(15));
        assert_eq!(domain.enumerate().len(), 15);
        let lists = ParamDomain::List {
            element: Box::new(ParamDomain::Int { min: 0, max: 2 }),
            max_len: 2,
        };
        assert_eq!(lists.size(), Some(13));
        assert_eq!(lists.enumerate().len(), 13);
    }

    #[test]
    fn soundness_target_conjoins_reference_precondition() {
        let task = square_task();
        let target = build_soundness_target(&task, SQUARE_CONTRACT).unwrap();
        let gate = target.find("raise ValueError").unwrap();
        let conjunct = target
            .find("if not _reference_precondition(x): assert False")
            .unwrap();
        let call = target.find("result = square(x)").unwrap();
        assert!(gate < conjunct && conjunct < call);
        assert!(target.contains("_reference_precondition = precondition"));
    }

    #[test]
    fn sound_contract_passes_exhaustive_soundness() {
        let task = square_task();
        let domain = int_domain("x", -4, 6);
        let (outcome, soundness) = check_soundness(
            &runtime(),
            &task,
            SQUARE_CONTRACT,
            &VerifierBackend::Exhaustive(&domain),
            Duration::from_secs(20),
        )
        .unwrap();
        assert_eq!(outcome.status, RawVerifierStatus::Safe);
        assert_eq!(soundness, Soundness::Sound);
    }

    #[test]
    fn overbroad_precondition_flagged_with_witness() {
        let task = square_task();
        let domain = int_domain("x", -4, 6);
        let (outcome, soundness) = check_soundness(
            &runtime(),
            &task,
            OVERBROAD_CONTRACT,
            &VerifierBackend::Exhaustive(&domain),
            Duration::from_secs(20),
        )
        .unwrap();
        assert_eq!(soundness, Soundness::UnsoundPrecondition);
        // First enumerated violation: x = -4 is rejected by Pre_gt.
        assert_eq!(
            outcome.witness.unwrap().args[0].1,
            Value::Int(-4)
        );
    }

    #[test]
    fn bad_postcondition_flagged_as_postcondition_unsound() {
        let task = square_task();
        // result > 0 fails at x = 0, which Pre_gt admits.
        let contract = SQUARE_CONTRACT.replace(
            "assert result == x * x",
            "assert result > 0",
        );
        let domain = int_domain("x", 0, 6);
        let (_, soundness) = check_soundness(
            &runtime(),
            &task,
            &contract,
            &VerifierBackend::Exhaustive(&domain),
            Duration::from_secs(20),
        )
        .unwrap();
        assert_eq!(soundness, Soundness::UnsoundPostcondition);
    }

    #[test]
    fn completeness_kills_divergent_mutant_only() {
        let task = square_task();
        let domain = int_domain("x", 0, 6);
        let mutants: Vec<&Mutant> = task.mutants.iter().collect();
        let outcome = check_completeness(
            &runtime(),
            &task,
            SQUARE_CONTRACT,
            &mutants,
            &VerifierBackend::Exhaustive(&domain),
            Duration::from_secs(20),
        )
        .unwrap();
        assert!(outcome.killed.contains("m-double"));
        assert!(!outcome.killed.contains("m-same"));
        // x + x == x * x only at 0 and 2; the first divergence is x = 1.
        assert_eq!(
            outcome.witnesses["m-double"].args[0].1,
            Value::Int(1)
        );
    }

    #[test]
    fn trivial_postcondition_kills_nothing() {
        let task = square_task();
        let contract = SQUARE_CONTRACT.replace("assert result == x * x", "assert True");
        let domain = int_domain("x", 0, 6);
        let mutants: Vec<&Mutant> = task.mutants.iter().collect();
        let outcome = check_completeness(
            &runtime(),
            &task,
            &contract,
            &mutants,
            &VerifierBackend::Exhaustive(&domain),
            Duration::from_secs(20),
        )
        .unwrap();
        assert!(outcome.killed.is_empty());
    }

    #[test]
    fn empty_mutant_set_is_vacuously_complete() {
        let outcome = CompletenessOutcome::default();
        assert!(outcome.is_complete(&BTreeSet::new()));
    }

    #[test]
    fn test_set_checks_reference_and_triggers() {
        let task = square_task();
        let rt = runtime();
        let out = check_test_set(&rt, &task, SQUARE_CONTRACT).unwrap();
        assert!(out.test_set_correct);
        assert!(out.bug_complete);
        // A contract asserting a wrong output value is not test-set correct.
        let wrong = SQUARE_CONTRACT.replace("assert result == x * x", "assert result is None");
        let out = check_test_set(&rt, &task, &wrong).unwrap();
        assert!(!out.test_set_correct);
    }

    #[test]
    fn confirm_mutant_needs_behavioral_difference() {
        let task = square_task();
        let rt = runtime();
        let (confirmed, trigger) = confirm_mutant(&rt, &task, &task.mutants[0]).unwrap();
        assert!(confirmed);
        assert_eq!(trigger.unwrap().args[0].1, Value::Int(3));
        // The reference disguised as a mutant is never confirmed.
        let (confirmed, trigger) = confirm_mutant(&rt, &task, &task.mutants[1]).unwrap();
        assert!(!confirmed);
        assert!(trigger.is_none());
    }

    #[test]
    fn exhaustive_witness_replays() {
        let task = square_task();
        let target = build_soundness_target(&task, OVERBROAD_CONTRACT).unwrap();
        let instrumented = codec::instrument_for_verifier(&target).unwrap();
        let domain = int_domain("x", -4, 6);
        let rt = runtime();
        let outcome =
            exhaustive_verify(&rt, &instrumented, "square_contract", &domain, None).unwrap();
        let witness = outcome.witness.expect("violation witness");
        let statuses = rt
            .batch_call(&[&instrumented], "square_contract", &[witness.values()], false, None)
            .unwrap();
        assert!(statuses[0].is_violation());
    }

    #[test]
    fn exhaustive_violations_collects_all() {
        let task = square_task();
        let target = build_soundness_target(&task, OVERBROAD_CONTRACT).unwrap();
        let instrumented = codec::instrument_for_verifier(&target).unwrap();
        let domain = int_domain("x", -3, 3);
        let witnesses =
            exhaustive_violations(&runtime(), &instrumented, "square_contract", &domain).unwrap();
        // Violations at every x the reference precondition rejects,
        // plus x = 0 where the postcondition itself fails.
        let xs: Vec<i64> = witnesses
            .iter()
            .map(|w| match w.args[0].1 {
                Value::Int(i) => i,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(xs, vec![-3, -2, -1, 0]);
    }

    #[test]
    fn crosshair_witness_line_parses() {
        let witness = parse_crosshair_call(
            "f_contract(n = 9)",
            "f_contract",
            &["n".to_string()],
        )
        .unwrap();
        assert_eq!(witness.args, vec![("n".to_string(), Value::Int(9))]);
        let multi = parse_crosshair_call(
            "g_contract(xs = [1, 2], name = 'ab', flag = True)",
            "g_contract",
            &["xs".into(), "name".into(), "flag".into()],
        )
        .unwrap();
        assert_eq!(multi.args.len(), 3);
        assert_eq!(multi.args[1].1, Value::Str("ab".into()));
    }

    #[test]
    fn wrapper_contract_gets_pre_gt_first() {
        let wrapped = crate::prompt::wrap_postcondition(
            "assert return_value >= 0",
            "def square(x: int):",
            "square",
        )
        .unwrap();
        let task = square_task();
        let target = build_soundness_target(&task, &wrapped).unwrap();
        let conjunct = target
            .find("if not _reference_precondition(x): assert False")
            .unwrap();
        let call = target.find("return_value = square(x)").unwrap();
        assert!(conjunct < call);
        // x = -2 violates Pre_gt: unsound precondition.
        let domain = int_domain("x", -2, 4);
        let (outcome, soundness) = check_soundness(
            &runtime(),
            &task,
            &wrapped,
            &VerifierBackend::Exhaustive(&domain),
            Duration::from_secs(20),
        )
        .unwrap();
        assert_eq!(soundness, Soundness::UnsoundPrecondition);
        assert_eq!(outcome.witness.unwrap().args[0].1, Value::Int(-2));
    }
}
