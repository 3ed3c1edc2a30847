//! Sandboxed execution of subject Python code.
//!
//! Every request spawns a fresh `python3 -I -E -S` subprocess running the
//! embedded driver script, so each call family owns an isolated module
//! namespace and only the standard library is importable. The driver guards
//! each call with a wall-clock alarm (the per-call budget) and a recursion
//! cap; the harness additionally kills the whole subprocess if an optional
//! wall cap elapses, which covers budget escapes inside C-level loops.
//!
//! Jobs are independent: a [`PythonRuntime`] is cheap to share and safe for
//! concurrent use, since each request owns its own subprocess.

use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::Value;

const DRIVER_SOURCE: &str = include_str!("driver.py");

/// Execution budgets for subject code.
#[derive(Debug, Clone)]
pub struct ExecLimits {
    /// Per-call wall-clock budget enforced inside the driver.
    pub per_call_timeout: Duration,
    /// Recursion cap installed via `sys.setrecursionlimit`.
    pub recursion_limit: u32,
}

impl Default for ExecLimits {
    fn default() -> Self {
        // Benchmark tasks are tiny functions; two seconds per call is generous.
        ExecLimits {
            per_call_timeout: Duration::from_secs(2),
            recursion_limit: 2000,
        }
    }
}

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("failed to spawn subject interpreter: {0}")]
    Spawn(#[from] std::io::Error),
    #[error("subject runtime protocol error: {0}")]
    Protocol(String),
    #[error("subject sources failed to load ({which}): {etype}: {message}")]
    Source {
        which: String,
        etype: String,
        message: String,
        trace: String,
    },
    #[error("subject run exceeded the wall cap of {0:.1}s")]
    WallClock(f64),
}

/// Outcome of calling the entry function on one input.
#[derive(Debug, Clone, PartialEq)]
pub enum CallStatus {
    /// Normal return. Carries the returned value when it fits the literal
    /// grammar, otherwise only its `repr`.
    Ok {
        value: Option<Value>,
        repr: Option<String>,
    },
    /// The entry function raised its invalid-input signal (a `ValueError`
    /// from its own frame).
    PreconditionRejected { message: String },
    /// An `AssertionError` escaped the entry call: a specification
    /// violation under the exception-based contract encoding.
    Violation { message: String },
    /// Any other exception.
    Crash { etype: String, message: String },
    /// The per-call budget elapsed.
    Timeout,
}

impl CallStatus {
    pub fn is_violation(&self) -> bool {
        matches!(self, CallStatus::Violation { .. })
    }
}

/// One differential-test row: reference precondition, both executions, and
/// in-runtime deep equality of the outputs.
#[derive(Debug, Clone)]
pub struct CompareRow {
    /// Truth value of the reference precondition, `None` when evaluating it
    /// crashed or timed out.
    pub precondition: Option<bool>,
    pub impl_status: CallStatus,
    pub ref_status: CallStatus,
    /// Deep output equality; `None` unless both sides returned normally.
    pub equal: Option<bool>,
}

/// Handle on the subject interpreter.
#[derive(Debug, Clone)]
pub struct PythonRuntime {
    interpreter: PathBuf,
    limits: ExecLimits,
}

impl Default for PythonRuntime {
    fn default() -> Self {
        Self::new()
    }
}

impl PythonRuntime {
    pub fn new() -> Self {
        PythonRuntime {
            interpreter: PathBuf::from("python3"),
            limits: ExecLimits::default(),
        }
    }

    pub fn with_interpreter(mut self, interpreter: impl Into<PathBuf>) -> Self {
        self.interpreter = interpreter.into();
        self
    }

    pub fn with_limits(mut self, limits: ExecLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn limits(&self) -> &ExecLimits {
        &self.limits
    }

    /// True when the configured interpreter can be spawned.
    pub fn is_available(&self) -> bool {
        Command::new(&self.interpreter)
            .arg("--version")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .map(|s| s.success())
            .unwrap_or(false)
    }

    /// Execute `sources` in one fresh namespace and call `entry` on each
    /// input. With `stop_on_violation`, evaluation ends at the first
    /// violating input (the returned vector is truncated there).
    ///
    /// `wall_cap` bounds the whole subprocess; `None` derives a generous
    /// backstop from the per-call budget.
    pub fn batch_call(
        &self,
        sources: &[&str],
        entry: &str,
        inputs: &[Vec<Value>],
        stop_on_violation: bool,
        wall_cap: Option<Duration>,
    ) -> Result<Vec<CallStatus>, RuntimeError> {
        let request = serde_json::json!({
            "mode": "batch",
            "sources": sources,
            "entry": entry,
            "inputs": render_inputs(inputs),
            "timeout_s": self.limits.per_call_timeout.as_secs_f64(),
            "recursion_limit": self.limits.recursion_limit,
            "stop_on_violation": stop_on_violation,
        });
        let cap = wall_cap.unwrap_or_else(|| self.default_cap(inputs.len()));
        let response = self.roundtrip(&request, cap)?;
        let results = response.results.ok_or_else(|| {
            RuntimeError::Protocol("driver response missing results".into())
        })?;
        results.iter().map(parse_call_status).collect()
    }

    /// Differential execution: run `entry` from the implementation and the
    /// reference namespaces on each input, with the reference precondition
    /// evaluated in its own namespace.
    #[allow(clippy::too_many_arguments)]
    pub fn compare(
        &self,
        impl_sources: &[&str],
        ref_sources: &[&str],
        pre_sources: &[&str],
        entry: &str,
        pre_entry: &str,
        inputs: &[Vec<Value>],
        wall_cap: Option<Duration>,
    ) -> Result<Vec<CompareRow>, RuntimeError> {
        let request = serde_json::json!({
            "mode": "compare",
            "impl_sources": impl_sources,
            "ref_sources": ref_sources,
            "pre_sources": pre_sources,
            "entry": entry,
            "pre_entry": pre_entry,
            "inputs": render_inputs(inputs),
            "timeout_s": self.limits.per_call_timeout.as_secs_f64(),
            "recursion_limit": self.limits.recursion_limit,
        });
        // Each row makes up to five guarded calls.
        let cap = wall_cap.unwrap_or_else(|| self.default_cap(5 * inputs.len().max(1)));
        let response = self.roundtrip(&request, cap)?;
        let results = response.results.ok_or_else(|| {
            RuntimeError::Protocol("driver response missing results".into())
        })?;
        results.iter().map(parse_compare_row).collect()
    }

    /// Evaluate a predicate function on each input, mapping normal returns
    /// to their truthiness and failures to `None`.
    pub fn eval_predicate(
        &self,
        sources: &[&str],
        entry: &str,
        inputs: &[Vec<Value>],
    ) -> Result<Vec<Option<bool>>, RuntimeError> {
        let statuses = self.batch_call(sources, entry, inputs, false, None)?;
        Ok(statuses
            .into_iter()
            .map(|status| match status {
                CallStatus::Ok { value, repr } => match value {
                    Some(v) => Some(truthy(&v)),
                    // Non-literal return: fall back to repr emptiness.
                    None => Some(repr.map(|r| !r.is_empty()).unwrap_or(false)),
                },
                _ => None,
            })
            .collect())
    }

    /// Execute search-generated tests against a contract-injected module and
    /// return the argument tuples of contract calls that raised the
    /// violation signal.
    pub fn replay_tester_inputs(
        &self,
        module_source: &str,
        module_name: &str,
        test_source: &str,
        contract_entry: &str,
    ) -> Result<Vec<Vec<Value>>, RuntimeError> {
        let request = serde_json::json!({
            "mode": "tester_replay",
            "module_source": module_source,
            "module_name": module_name,
            "test_source": test_source,
            "entry": contract_entry,
            "timeout_s": self.limits.per_call_timeout.as_secs_f64(),
            "recursion_limit": self.limits.recursion_limit,
        });
        let cap = Duration::from_secs_f64(
            30.0 + 50.0 * self.limits.per_call_timeout.as_secs_f64(),
        );
        let response = self.roundtrip(&request, cap)?;
        let results = response.results.ok_or_else(|| {
            RuntimeError::Protocol("driver response missing results".into())
        })?;
        results
            .iter()
            .map(|row| {
                let texts: Vec<String> = serde_json::from_value(row.clone())
                    .map_err(|e| RuntimeError::Protocol(format!("bad replay row: {e}")))?;
                texts
                    .iter()
                    .map(|t| {
                        Value::parse(t).map_err(|e| {
                            RuntimeError::Protocol(format!("unparseable replay value {t:?}: {e}"))
                        })
                    })
                    .collect()
            })
            .collect()
    }

    fn default_cap(&self, calls: usize) -> Duration {
        let per_call = self.limits.per_call_timeout.as_secs_f64();
        Duration::from_secs_f64(10.0 + per_call * calls.max(1) as f64)
    }

    fn roundtrip(
        &self,
        request: &serde_json::Value,
        wall_cap: Duration,
    ) -> Result<DriverResponse, RuntimeError> {
        let dir = tempfile::tempdir()?;
        let driver_path = dir.path().join("driver.py");
        std::fs::write(&driver_path, DRIVER_SOURCE)?;

        let mut child = Command::new(&self.interpreter)
            .arg("-I")
            .arg("-E")
            .arg("-S")
            .arg(&driver_path)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()?;

        let payload = serde_json::to_vec(request)
            .map_err(|e| RuntimeError::Protocol(format!("request encoding: {e}")))?;
        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            stdin.write_all(&payload)?;
            // Dropping stdin closes the pipe so the driver sees EOF.
        }

        let output = wait_with_deadline(child, wall_cap)?;
        let stdout = String::from_utf8_lossy(&output.stdout);
        let response: DriverResponse = serde_json::from_str(stdout.trim()).map_err(|e| {
            let stderr = String::from_utf8_lossy(&output.stderr);
            RuntimeError::Protocol(format!(
                "bad driver response ({e}); stdout: {:.400}; stderr: {:.400}",
                stdout, stderr
            ))
        })?;
        if !response.ok {
            let err = response.error.unwrap_or_default();
            return Err(RuntimeError::Source {
                which: err.which.unwrap_or_else(|| "sources".into()),
                etype: err.etype.unwrap_or_else(|| "Error".into()),
                message: err.message.unwrap_or_default(),
                trace: err.trace.unwrap_or_default(),
            });
        }
        Ok(response)
    }
}

fn truthy(v: &Value) -> bool {
    match v {
        Value::None => false,
        Value::Bool(b) => *b,
        Value::Int(i) => *i != 0,
        Value::Float(f) => *f != 0.0,
        Value::Str(s) => !s.is_empty(),
        Value::List(xs) | Value::Tuple(xs) => !xs.is_empty(),
        Value::Dict(entries) => !entries.is_empty(),
    }
}

fn render_inputs(inputs: &[Vec<Value>]) -> Vec<Vec<String>> {
    inputs
        .iter()
        .map(|args| args.iter().map(|v| v.to_string()).collect())
        .collect()
}

#[derive(Debug, Default, Deserialize)]
struct DriverError {
    which: Option<String>,
    #[serde(rename = "type")]
    etype: Option<String>,
    message: Option<String>,
    trace: Option<String>,
}

#[derive(Debug, Deserialize)]
struct DriverResponse {
    ok: bool,
    error: Option<DriverError>,
    results: Option<Vec<serde_json::Value>>,
}

#[derive(Debug, Deserialize, Serialize)]
struct RawCall {
    status: String,
    value: Option<String>,
    repr: Option<String>,
    message: Option<String>,
    #[serde(rename = "type")]
    etype: Option<String>,
}

fn parse_call_status(raw: &serde_json::Value) -> Result<CallStatus, RuntimeError> {
    let raw: RawCall = serde_json::from_value(raw.clone())
        .map_err(|e| RuntimeError::Protocol(format!("bad call record: {e}")))?;
    let status = match raw.status.as_str() {
        "ok" => {
            let value = match raw.value {
                Some(text) => Some(Value::parse(&text).map_err(|e| {
                    RuntimeError::Protocol(format!("unparseable value {text:?}: {e}"))
                })?),
                None => None,
            };
            CallStatus::Ok {
                value,
                repr: raw.repr,
            }
        }
        "precondition_rejected" => CallStatus::PreconditionRejected {
            message: raw.message.unwrap_or_default(),
        },
        "violation" => CallStatus::Violation {
            message: raw.message.unwrap_or_default(),
        },
        "timeout" => CallStatus::Timeout,
        "crash" => CallStatus::Crash {
            etype: raw.etype.unwrap_or_else(|| "Exception".into()),
            message: raw.message.unwrap_or_default(),
        },
        other => {
            return Err(RuntimeError::Protocol(format!(
                "unknown call status {other:?}"
            )))
        }
    };
    Ok(status)
}

fn parse_compare_row(raw: &serde_json::Value) -> Result<CompareRow, RuntimeError> {
    let obj = raw
        .as_object()
        .ok_or_else(|| RuntimeError::Protocol("compare row is not an object".into()))?;
    let precondition = obj.get("pre").and_then(serde_json::Value::as_bool);
    let impl_status = parse_call_status(
        obj.get("impl")
            .ok_or_else(|| RuntimeError::Protocol("compare row missing impl".into()))?,
    )?;
    let ref_status = parse_call_status(
        obj.get("ref")
            .ok_or_else(|| RuntimeError::Protocol("compare row missing ref".into()))?,
    )?;
    let equal = obj.get("equal").and_then(serde_json::Value::as_bool);
    Ok(CompareRow {
        precondition,
        impl_status,
        ref_status,
        equal,
    })
}

pub(crate) fn wait_with_deadline(
    mut child: std::process::Child,
    cap: Duration,
) -> Result<std::process::Output, RuntimeError> {
    use std::io::Read;

    let mut stdout_pipe = child.stdout.take().expect("piped stdout");
    let mut stderr_pipe = child.stderr.take().expect("piped stderr");
    let stdout_thread = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stdout_pipe.read_to_end(&mut buf);
        buf
    });
    let stderr_thread = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr_pipe.read_to_end(&mut buf);
        buf
    });

    let started = Instant::now();
    let status = loop {
        match child.try_wait()? {
            Some(status) => break status,
            None => {
                if started.elapsed() > cap {
                    let _ = child.kill();
                    let _ = child.wait();
                    let _ = stdout_thread.join();
                    let _ = stderr_thread.join();
                    return Err(RuntimeError::WallClock(cap.as_secs_f64()));
                }
                std::thread::sleep(Duration::from_millis(5));
            }
        }
    };
    let stdout = stdout_thread.join().unwrap_or_default();
    let stderr = stderr_thread.join().unwrap_or_default();
    Ok(std::process::Output {
        status,
        stdout,
        stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rt() -> PythonRuntime {
        PythonRuntime::new()
    }

    fn ints(values: &[i64]) -> Vec<Vec<Value>> {
        values.iter().map(|&v| vec![Value::Int(v)]).collect()
    }

    #[test]
    fn ok_and_value_roundtrip() {
        let src = "def double(x):\n    return [x, x * 2]\n";
        let out = rt()
            .batch_call(&[src], "double", &ints(&[3]), false, None)
            .unwrap();
        assert_eq!(
            out[0],
            CallStatus::Ok {
                value: Some(Value::parse("[3, 6]").unwrap()),
                repr: None
            }
        );
    }

    #[test]
    fn violation_and_precondition_signals() {
        let src = concat!(
            "def f(x):\n",
            "    try:\n",
            "        assert x >= 0\n",
            "    except AssertionError as e:\n",
            "        raise ValueError(f\"Precondition failed: {e}\") from e\n",
            "    result = x\n",
            "    assert result != 5\n",
            "    return result\n",
        );
        let out = rt()
            .batch_call(&[src], "f", &ints(&[-1, 3, 5]), false, None)
            .unwrap();
        assert!(matches!(out[0], CallStatus::PreconditionRejected { .. }));
        assert!(matches!(out[1], CallStatus::Ok { .. }));
        assert!(matches!(out[2], CallStatus::Violation { .. }));
    }

    #[test]
    fn value_error_from_callee_is_a_crash() {
        let src = "def inner(x):\n    raise ValueError(\"bad\")\n\ndef f(x):\n    return inner(x)\n";
        let out = rt().batch_call(&[src], "f", &ints(&[1]), false, None).unwrap();
        assert!(
            matches!(&out[0], CallStatus::Crash { etype, .. } if etype == "ValueError"),
            "{out:?}"
        );
    }

    #[test]
    fn per_call_timeout_reported() {
        let src = "def f(x):\n    while True:\n        x += 1\n";
        let runtime = rt().with_limits(ExecLimits {
            per_call_timeout: Duration::from_millis(200),
            recursion_limit: 2000,
        });
        let out = runtime
            .batch_call(&[src], "f", &ints(&[1, 2]), false, None)
            .unwrap();
        assert_eq!(out, vec![CallStatus::Timeout, CallStatus::Timeout]);
    }

    #[test]
    fn source_error_surfaces() {
        let err = rt()
            .batch_call(&["def f(:\n"], "f", &ints(&[1]), false, None)
            .unwrap_err();
        assert!(matches!(err, RuntimeError::Source { .. }), "{err}");
    }

    #[test]
    fn stop_on_violation_truncates() {
        let src = "def f(x):\n    assert x < 2\n    return x\n";
        let out = rt()
            .batch_call(&[src], "f", &ints(&[0, 1, 2, 3]), true, None)
            .unwrap();
        assert_eq!(out.len(), 3);
        assert!(out[2].is_violation());
    }

    #[test]
    fn compare_detects_divergence_and_precondition() {
        let impl_src = "def f(x):\n    return x * x if x != 3 else 0\n";
        let ref_src = "def f(x):\n    return x * x\n";
        let pre_src = "def precondition(x):\n    return x >= 0\n";
        let rows = rt()
            .compare(
                &[impl_src],
                &[ref_src],
                &[pre_src],
                "f",
                "precondition",
                &ints(&[-1, 2, 3]),
                None,
            )
            .unwrap();
        assert_eq!(rows[0].precondition, Some(false));
        assert_eq!(rows[1].equal, Some(true));
        assert_eq!(rows[2].precondition, Some(true));
        assert_eq!(rows[2].equal, Some(false));
    }

    #[test]
    fn compare_treats_tuple_and_list_as_different() {
        let impl_src = "def f(x):\n    return [x, x]\n";
        let ref_src = "def f(x):\n    return (x, x)\n";
        let pre_src = "def precondition(x):\n    return True\n";
        let rows = rt()
            .compare(&[impl_src], &[ref_src], &[pre_src], "f", "precondition", &ints(&[1]), None)
            .unwrap();
        assert_eq!(rows[0].equal, Some(false));
    }

    #[test]
    fn mutating_impl_cannot_skew_comparison() {
        let impl_src = "def f(xs):\n    xs.append(1)\n    return xs\n";
        let ref_src = "def f(xs):\n    return xs + [1]\n";
        let pre_src = "def precondition(xs):\n    return True\n";
        let rows = rt()
            .compare(
                &[impl_src],
                &[ref_src],
                &[pre_src],
                "f",
                "precondition",
                &[vec![Value::parse("[0]").unwrap()]],
                None,
            )
            .unwrap();
        assert_eq!(rows[0].equal, Some(true));
    }

    #[test]
    fn subject_print_does_not_corrupt_protocol() {
        let src = "def f(x):\n    print(\"noise\", x)\n    return x\n";
        let out = rt().batch_call(&[src], "f", &ints(&[7]), false, None).unwrap();
        assert!(matches!(&out[0], CallStatus::Ok { value: Some(Value::Int(7)), .. }));
    }

    #[test]
    fn wall_cap_kills_runaway_subprocess() {
        let src = "def f(x):\n    while True:\n        pass\n";
        let err = rt()
            .batch_call(
                &[src],
                "f",
                &ints(&[1]),
                false,
                Some(Duration::from_millis(300)),
            )
            .unwrap_err();
        assert!(matches!(err, RuntimeError::WallClock(_)));
    }

    #[test]
    fn nan_outputs_compare_equal() {
        let impl_src = "def f(x):\n    return float(\"nan\")\n";
        let ref_src = "def f(x):\n    return float(\"nan\")\n";
        let pre_src = "def precondition(x):\n    return True\n";
        let rows = rt()
            .compare(&[impl_src], &[ref_src], &[pre_src], "f", "precondition", &ints(&[1]), None)
            .unwrap();
        assert_eq!(rows[0].equal, Some(true));
    }
}
