//! Shared domain types and the core checking predicates.
//!
//! A benchmark task pairs a natural-language stub with a reference
//! implementation, a reference precondition describing its valid inputs,
//! bundled test inputs, and behaviorally divergent mutants. Candidates are
//! sampled contract functions; verdicts aggregate everything the harness
//! learned about one candidate.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pysrc;
use crate::runtime::{CallStatus, PythonRuntime, RuntimeError};
use crate::value::Value;

/// Name the reference-precondition source must define: a callable taking the
/// same parameters as the entry point and returning a truth value.
pub const PRECONDITION_ENTRY: &str = "precondition";

/// One concrete input to the entry point: ordered `(name, value)` pairs.
/// Keyword arguments are deliberately unsupported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputState {
    pub args: Vec<(String, Value)>,
}

impl InputState {
    pub fn new(args: Vec<(String, Value)>) -> Self {
        InputState { args }
    }

    /// Bind positional values to parameter names.
    pub fn positional(names: &[String], values: Vec<Value>) -> Self {
        InputState {
            args: names.iter().cloned().zip(values).collect(),
        }
    }

    pub fn values(&self) -> Vec<Value> {
        self.args.iter().map(|(_, v)| v.clone()).collect()
    }

    /// Render as a call argument list, e.g. `12, 0, 0`.
    pub fn render_args(&self) -> String {
        self.args
            .iter()
            .map(|(_, v)| v.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl std::fmt::Display for InputState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, (name, value)) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{name}={value}")?;
        }
        write!(f, ")")
    }
}

/// A behaviorally divergent variant of the reference implementation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mutant {
    pub mutant_id: String,
    /// Source text defining the same entry point as the reference.
    pub impl_source: String,
    /// Valid inputs known to expose the divergence. May be empty.
    pub known_triggers: Vec<InputState>,
}

/// One benchmark problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceTask {
    pub task_id: String,
    pub entry_point: String,
    /// Signature + docstring, the only part shown to the model.
    pub stub: String,
    /// Surrounding file context; empty for single-function tasks.
    pub file_context: String,
    pub reference_impl: String,
    /// Source defining [`PRECONDITION_ENTRY`]; helpers allowed.
    pub reference_precondition: String,
    pub test_inputs: Vec<InputState>,
    pub mutants: Vec<Mutant>,
}

impl ReferenceTask {
    /// Name of the contract function candidates must define.
    pub fn contract_entry(&self) -> String {
        format!("{}_contract", self.entry_point)
    }

    /// Parameter names of the entry point, read from the stub.
    pub fn param_names(&self) -> Vec<String> {
        match pysrc::scan(&self.stub) {
            Ok(file) => file
                .defs_named(&self.entry_point)
                .first()
                .map(|def| pysrc::param_names(file.signature_text(def)))
                .unwrap_or_default(),
            Err(_) => Vec::new(),
        }
    }

    /// Sources establishing an execution namespace for `impl_source`.
    pub fn sources_with<'a>(&'a self, impl_source: &'a str) -> Vec<&'a str> {
        let mut sources = Vec::new();
        if !self.file_context.trim().is_empty() {
            sources.push(self.file_context.as_str());
        }
        sources.push(impl_source);
        sources
    }

    /// Sources establishing the reference-precondition namespace.
    pub fn precondition_sources(&self) -> Vec<&str> {
        self.sources_with(&self.reference_precondition)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PromptKind {
    #[serde(rename = "nl2contract")]
    Nl2Contract,
    #[serde(rename = "nl2postcond")]
    Nl2Postcond,
}

impl std::fmt::Display for PromptKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PromptKind::Nl2Contract => write!(f, "nl2contract"),
            PromptKind::Nl2Postcond => write!(f, "nl2postcond"),
        }
    }
}

impl std::str::FromStr for PromptKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nl2contract" => Ok(PromptKind::Nl2Contract),
            "nl2postcond" => Ok(PromptKind::Nl2Postcond),
            other => Err(format!("unknown prompt kind {other:?}")),
        }
    }
}

/// One sampled contract with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractCandidate {
    pub candidate_id: String,
    pub task_id: String,
    pub prompt_kind: PromptKind,
    pub model_id: String,
    pub sample_index: usize,
    pub raw_completion: String,
    /// Extracted contract source; `None` when extraction failed.
    pub contract_source: Option<String>,
    pub shape_ok: bool,
}

impl ContractCandidate {
    /// Deterministic candidate identifier.
    pub fn id_for(
        task_id: &str,
        model_id: &str,
        prompt_kind: PromptKind,
        sample_index: usize,
    ) -> String {
        format!("{task_id}::{model_id}::{prompt_kind}::{sample_index}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Soundness {
    #[serde(rename = "sound")]
    Sound,
    #[serde(rename = "unsound_precondition")]
    UnsoundPrecondition,
    #[serde(rename = "unsound_postcondition")]
    UnsoundPostcondition,
    /// Not determined (e.g. the candidate never reached the check).
    #[serde(rename = "unknown")]
    Unknown,
}

impl Soundness {
    pub fn is_sound(self) -> bool {
        self == Soundness::Sound
    }
}

/// Raw backend status retained alongside the pragmatic soundness verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RawVerifierStatus {
    #[serde(rename = "safe")]
    Safe,
    #[serde(rename = "violation")]
    Violation,
    #[serde(rename = "unknown")]
    Unknown,
    #[serde(rename = "backend_error")]
    BackendError,
}

/// Everything the harness determined about one candidate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub candidate_id: String,
    pub task_id: String,
    pub model_id: String,
    pub prompt_kind: PromptKind,
    pub soundness: Soundness,
    /// Present exactly when the candidate is unsound.
    pub soundness_witness: Option<InputState>,
    /// Raw backend status behind the pragmatic soundness call.
    pub raw_soundness: Option<RawVerifierStatus>,
    pub killed_mutants: BTreeSet<String>,
    pub checked_mutants: BTreeSet<String>,
    pub test_set_correct: bool,
    pub bug_complete: bool,
    /// Wall seconds per check, keyed by check name.
    pub timings: BTreeMap<String, f64>,
}

impl Verdict {
    pub fn new(candidate: &ContractCandidate) -> Self {
        Verdict {
            candidate_id: candidate.candidate_id.clone(),
            task_id: candidate.task_id.clone(),
            model_id: candidate.model_id.clone(),
            prompt_kind: candidate.prompt_kind,
            soundness: Soundness::Unknown,
            soundness_witness: None,
            raw_soundness: None,
            killed_mutants: BTreeSet::new(),
            checked_mutants: BTreeSet::new(),
            test_set_correct: false,
            bug_complete: false,
            timings: BTreeMap::new(),
        }
    }

    /// Sound and killed every checked mutant.
    pub fn is_complete(&self) -> bool {
        self.soundness.is_sound() && self.killed_mutants == self.checked_mutants
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    #[serde(rename = "bug_triggering")]
    BugTriggering,
    #[serde(rename = "false_alarm")]
    FalseAlarm,
}

/// A reported violation input classified against the reference behavior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationClass {
    pub input: InputState,
    pub classification: Classification,
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("execution exceeded the per-call budget of {budget_s:.1}s")]
    NonTermination { budget_s: f64 },
    #[error("implementation crashed: {etype}: {message}")]
    Crash { etype: String, message: String },
    #[error("malformed task: {0}")]
    Bundle(String),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

/// Does executing the contract (bound to `impl_source`) on `input` raise the
/// postcondition-failure signal? Precondition rejection and normal return
/// both answer `false`; crashes are reported distinctly.
pub fn is_specification_violation(
    runtime: &PythonRuntime,
    task: &ReferenceTask,
    impl_source: &str,
    contract: &ContractCandidate,
    input: &InputState,
) -> Result<bool, ExecError> {
    spec_violation_flags(runtime, task, impl_source, contract, std::slice::from_ref(input))?
        .remove(0)
}

/// Vectorized form of [`is_specification_violation`]: one execution context
/// evaluates the whole input list, one flag (or error) per input.
pub fn spec_violation_flags(
    runtime: &PythonRuntime,
    task: &ReferenceTask,
    impl_source: &str,
    contract: &ContractCandidate,
    inputs: &[InputState],
) -> Result<Vec<Result<bool, ExecError>>, ExecError> {
    let contract_source = contract
        .contract_source
        .as_deref()
        .filter(|_| contract.shape_ok)
        .ok_or_else(|| ExecError::Bundle("candidate has no shape-conformant contract".into()))?;
    let mut sources = task.sources_with(impl_source);
    sources.push(contract_source);
    let input_values: Vec<Vec<Value>> = inputs.iter().map(InputState::values).collect();
    let statuses = runtime.batch_call(
        &sources,
        &task.contract_entry(),
        &input_values,
        false,
        None,
    )?;
    Ok(statuses
        .iter()
        .map(|status| interpret_violation_status(status, runtime))
        .collect())
}

fn interpret_violation_status(
    status: &CallStatus,
    runtime: &PythonRuntime,
) -> Result<bool, ExecError> {
    match status {
        CallStatus::Violation { .. } => Ok(true),
        CallStatus::Ok { .. } | CallStatus::PreconditionRejected { .. } => Ok(false),
        CallStatus::Timeout => Err(ExecError::NonTermination {
            budget_s: runtime.limits().per_call_timeout.as_secs_f64(),
        }),
        CallStatus::Crash { etype, message } => Err(ExecError::Crash {
            etype: etype.clone(),
            message: message.clone(),
        }),
    }
}

/// Classify a reported violation input: bug triggering iff the reference
/// precondition admits it and the implementation's output diverges from the
/// reference output under deep value equality. A crash on a valid input
/// counts as divergent behavior.
pub fn classify_violation(
    runtime: &PythonRuntime,
    task: &ReferenceTask,
    impl_source: &str,
    input: &InputState,
) -> Result<ViolationClass, ExecError> {
    let rows = runtime.compare(
        &task.sources_with(impl_source),
        &task.sources_with(&task.reference_impl),
        &task.precondition_sources(),
        &task.entry_point,
        PRECONDITION_ENTRY,
        std::slice::from_ref(&input.values()),
        None,
    )?;
    let row = &rows[0];
    let classification = match row.precondition {
        None => {
            return Err(ExecError::Bundle(format!(
                "reference precondition failed to evaluate on {input}"
            )))
        }
        Some(false) => Classification::FalseAlarm,
        Some(true) => {
            match (&row.impl_status, &row.ref_status) {
                (_, CallStatus::Timeout) | (CallStatus::Timeout, _) => {
                    return Err(ExecError::NonTermination {
                        budget_s: runtime.limits().per_call_timeout.as_secs_f64(),
                    })
                }
                // The reference must terminate normally on valid inputs.
                (_, CallStatus::Ok { .. }) => match (&row.impl_status, row.equal) {
                    (CallStatus::Ok { .. }, Some(true)) => Classification::FalseAlarm,
                    (CallStatus::Ok { .. }, _) => Classification::BugTriggering,
                    _ => Classification::BugTriggering,
                },
                (_, other) => {
                    return Err(ExecError::Bundle(format!(
                        "reference raised on precondition-satisfying input {input}: {other:?}"
                    )))
                }
            }
        }
    };
    Ok(ViolationClass {
        input: input.clone(),
        classification,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn runtime() -> PythonRuntime {
        PythonRuntime::new()
    }

    pub(crate) fn square_task() -> ReferenceTask {
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
            mutants: vec![Mutant {
                mutant_id: "m1".into(),
                impl_source: "def square(x):\n    return x + x\n".into(),
                known_triggers: vec![InputState::new(vec![("x".into(), Value::Int(3))])],
            }],
        }
    }

    fn candidate(task: &ReferenceTask, contract: &str) -> ContractCandidate {
        ContractCandidate {
            candidate_id: ContractCandidate::id_for(
                &task.task_id,
                "unit-model",
                PromptKind::Nl2Contract,
                0,
            ),
            task_id: task.task_id.clone(),
            prompt_kind: PromptKind::Nl2Contract,
            model_id: "unit-model".into(),
            sample_index: 0,
            raw_completion: contract.into(),
            contract_source: Some(contract.into()),
            shape_ok: true,
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

    fn input(x: i64) -> InputState {
        InputState::new(vec![("x".into(), Value::Int(x))])
    }

    #[test]
    fn violation_on_buggy_impl_only() {
        let task = square_task();
        let cand = candidate(&task, SQUARE_CONTRACT);
        let rt = runtime();
        let on_ref =
            is_specification_violation(&rt, &task, &task.reference_impl, &cand, &input(3)).unwrap();
        assert!(!on_ref);
        let on_mutant = is_specification_violation(
            &rt,
            &task,
            &task.mutants[0].impl_source,
            &cand,
            &input(3),
        )
        .unwrap();
        assert!(on_mutant);
        // x = 2: 2 + 2 == 2 * 2, the mutant agrees there.
        let on_mutant_agreeing = is_specification_violation(
            &rt,
            &task,
            &task.mutants[0].impl_source,
            &cand,
            &input(2),
        )
        .unwrap();
        assert!(!on_mutant_agreeing);
    }

    #[test]
    fn precondition_gate_yields_false() {
        let task = square_task();
        let cand = candidate(&task, SQUARE_CONTRACT);
        let out =
            is_specification_violation(&runtime(), &task, &task.reference_impl, &cand, &input(-5))
                .unwrap();
        assert!(!out);
    }

    #[test]
    fn classify_distinguishes_bug_and_false_alarm() {
        let task = square_task();
        let rt = runtime();
        let bug = classify_violation(&rt, &task, &task.mutants[0].impl_source, &input(3)).unwrap();
        assert_eq!(bug.classification, Classification::BugTriggering);
        let invalid =
            classify_violation(&rt, &task, &task.mutants[0].impl_source, &input(-1)).unwrap();
        assert_eq!(invalid.classification, Classification::FalseAlarm);
        let same = classify_violation(&rt, &task, &task.reference_impl, &input(3)).unwrap();
        assert_eq!(same.classification, Classification::FalseAlarm);
    }

    #[test]
    fn classify_counts_crash_as_divergence() {
        let task = square_task();
        let crashing = "def square(x):\n    raise RuntimeError(\"boom\")\n";
        let out = classify_violation(&runtime(), &task, crashing, &input(3)).unwrap();
        assert_eq!(out.classification, Classification::BugTriggering);
    }

    #[test]
    fn candidate_ids_are_deterministic() {
        assert_eq!(
            ContractCandidate::id_for("t", "m", PromptKind::Nl2Postcond, 7),
            "t::m::nl2postcond::7"
        );
    }

    /// A rejecting precondition gate dominates every postcondition: no input
    /// can be a violation, whatever the asserts say.
    #[test]
    fn false_precondition_never_violates() {
        let task = square_task();
        let rt = runtime();
        let postconditions = [
            "assert False",
            "assert result == 999",
            "assert result is None",
            "assert isinstance(result, str)",
            "assert result != result",
        ];
        let inputs: Vec<InputState> = (-3..=3).map(input).collect();
        for post in postconditions {
            let contract = format!(
                "def square_contract(x: int):\n    try:\n        assert False\n    except AssertionError as e:\n        raise ValueError(f\"Precondition failed: {{e}}\") from e\n    result = square(x)\n    {post}\n    return result\n"
            );
            let cand = candidate(&task, &contract);
            let flags =
                spec_violation_flags(&rt, &task, &task.reference_impl, &cand, &inputs).unwrap();
            for (input, flag) in inputs.iter().zip(flags) {
                assert_eq!(
                    flag.unwrap(),
                    false,
                    "gate must reject {input} before {post:?} can fire"
                );
            }
        }
    }
}
