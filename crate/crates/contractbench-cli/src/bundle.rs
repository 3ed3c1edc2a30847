//! Task-bundle ingestion.
//!
//! A bundle is a JSONL file, one task per line, with source texts inline and
//! input values written in the restricted literal grammar. Ingestion streams
//! the file (a full-scale bundle holds tens of mutants per task) and
//! validates each task as it arrives: sources must scan and define the entry
//! point, the reference implementation must pass every bundled test input,
//! and the reference precondition must hold on all of them.

use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use contractbench::harness::{DomainSpec, ParamDomain};
use contractbench::model::{InputState, Mutant, ReferenceTask, PRECONDITION_ENTRY};
use contractbench::pysrc;
use contractbench::runtime::{CallStatus, PythonRuntime};
use contractbench::value::Value;

#[derive(Debug, thiserror::Error)]
#[error("bundle validation failed for {failed} of {total} task(s):\n{diagnostics}", failed = .0.len(), total = .1, diagnostics = .0.join("\n"))]
pub struct BundleError(pub Vec<String>, pub usize);

/// Wire form of one task.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskJson {
    pub task_id: String,
    pub entry_point: String,
    pub stub: String,
    #[serde(default)]
    pub file_context: String,
    pub reference_impl: String,
    pub reference_precondition: String,
    /// One row per test input; one literal string per argument.
    #[serde(default)]
    pub test_inputs: Vec<Vec<String>>,
    #[serde(default)]
    pub mutants: Vec<MutantJson>,
    /// Finite enumeration domain for the exhaustive oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MutantJson {
    pub mutant_id: String,
    #[serde(rename = "impl")]
    pub impl_source: String,
    #[serde(default)]
    pub known_triggers: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    pub params: Vec<ParamJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamJson {
    pub name: String,
    #[serde(flatten)]
    pub domain: ParamDomainJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamDomainJson {
    Int { min: i64, max: i64 },
    Bool,
    Choice { values: Vec<String> },
    Str { alphabet: String, max_len: usize },
    List { element: Box<ParamDomainJson>, max_len: usize },
    Tuple { elements: Vec<ParamDomainJson> },
}

impl ParamDomainJson {
    fn to_domain(&self) -> anyhow::Result<ParamDomain> {
        Ok(match self {
            ParamDomainJson::Int { min, max } => ParamDomain::Int { min: *min, max: *max },
            ParamDomainJson::Bool => ParamDomain::Bool,
            ParamDomainJson::Choice { values } => ParamDomain::Choice(
                values
                    .iter()
                    .map(|v| Value::parse(v).map_err(|e| anyhow::anyhow!("choice value {v:?}: {e}")))
                    .collect::<anyhow::Result<Vec<_>>>()?,
            ),
            ParamDomainJson::Str { alphabet, max_len } => ParamDomain::Str {
                alphabet: alphabet.chars().collect(),
                max_len: *max_len,
            },
            ParamDomainJson::List { element, max_len } => ParamDomain::List {
                element: Box::new(element.to_domain()?),
                max_len: *max_len,
            },
            ParamDomainJson::Tuple { elements } => ParamDomain::Tuple(
                elements
                    .iter()
                    .map(ParamDomainJson::to_domain)
                    .collect::<anyhow::Result<Vec<_>>>()?,
            ),
        })
    }
}

/// A validated task plus its oracle domain, when the bundle provides one.
#[derive(Debug, Clone)]
pub struct LoadedTask {
    pub task: ReferenceTask,
    pub domain: Option<DomainSpec>,
}

fn parse_inputs(
    rows: &[Vec<String>],
    names: &[String],
    what: &str,
) -> anyhow::Result<Vec<InputState>> {
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != names.len() {
                anyhow::bail!(
                    "{what} #{i}: expected {} argument(s), found {}",
                    names.len(),
                    row.len()
                );
            }
            let values = row
                .iter()
                .map(|text| {
                    Value::parse(text).map_err(|e| anyhow::anyhow!("{what} #{i}: {text:?}: {e}"))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            Ok(InputState::positional(names, values))
        })
        .collect()
}

fn convert_task(json: TaskJson) -> anyhow::Result<LoadedTask> {
    let stub_file = pysrc::scan(&json.stub).map_err(|e| anyhow::anyhow!("stub: {e}"))?;
    let stub_def = stub_file
        .defs_named(&json.entry_point)
        .into_iter()
        .next()
        .ok_or_else(|| anyhow::anyhow!("stub does not define {:?}", json.entry_point))?;
    let names = pysrc::param_names(stub_file.signature_text(stub_def));

    let impl_file =
        pysrc::scan(&json.reference_impl).map_err(|e| anyhow::anyhow!("reference_impl: {e}"))?;
    if impl_file.defs_named(&json.entry_point).is_empty() {
        anyhow::bail!("reference_impl does not define {:?}", json.entry_point);
    }
    let pre_file = pysrc::scan(&json.reference_precondition)
        .map_err(|e| anyhow::anyhow!("reference_precondition: {e}"))?;
    if pre_file.defs_named(PRECONDITION_ENTRY).is_empty() {
        anyhow::bail!("reference_precondition does not define {PRECONDITION_ENTRY:?}");
    }

    let test_inputs = parse_inputs(&json.test_inputs, &names, "test input")?;
    let mut mutants = Vec::new();
    for mutant in &json.mutants {
        let mutant_file = pysrc::scan(&mutant.impl_source)
            .map_err(|e| anyhow::anyhow!("mutant {}: {e}", mutant.mutant_id))?;
        if mutant_file.defs_named(&json.entry_point).is_empty() {
            anyhow::bail!(
                "mutant {} does not define {:?}",
                mutant.mutant_id,
                json.entry_point
            );
        }
        mutants.push(Mutant {
            mutant_id: mutant.mutant_id.clone(),
            impl_source: mutant.impl_source.clone(),
            known_triggers: parse_inputs(
                &mutant.known_triggers,
                &names,
                &format!("mutant {} trigger", mutant.mutant_id),
            )?,
        });
    }

    let domain = match &json.domain {
        Some(domain_json) => {
            let params = domain_json
                .params
                .iter()
                .map(|p| Ok((p.name.clone(), p.domain.to_domain()?)))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let mut spec = DomainSpec::new(params);
            if let Some(cap) = domain_json.cap {
                spec = spec.with_cap(cap as u128);
            }
            Some(spec)
        }
        None => None,
    };

    Ok(LoadedTask {
        task: ReferenceTask {
            task_id: json.task_id,
            entry_point: json.entry_point,
            stub: json.stub,
            file_context: json.file_context,
            reference_impl: json.reference_impl,
            reference_precondition: json.reference_precondition,
            test_inputs,
            mutants,
        },
        domain,
    })
}

/// Execute the reference against its own test inputs and check the
/// precondition holds on each.
fn validate_semantics(runtime: &PythonRuntime, task: &ReferenceTask) -> anyhow::Result<()> {
    if task.test_inputs.is_empty() {
        return Ok(());
    }
    let inputs: Vec<Vec<Value>> = task.test_inputs.iter().map(InputState::values).collect();
    let statuses = runtime.batch_call(
        &task.sources_with(&task.reference_impl),
        &task.entry_point,
        &inputs,
        false,
        None,
    )?;
    for (input, status) in task.test_inputs.iter().zip(&statuses) {
        if !matches!(status, CallStatus::Ok { .. }) {
            anyhow::bail!("reference fails on test input {input}: {status:?}");
        }
    }
    let pre = runtime.eval_predicate(
        &task.precondition_sources(),
        PRECONDITION_ENTRY,
        &inputs,
    )?;
    for (input, ok) in task.test_inputs.iter().zip(&pre) {
        if *ok != Some(true) {
            anyhow::bail!("reference precondition does not hold on test input {input}");
        }
    }
    Ok(())
}

/// Stream a bundle, invoking `consume` for each validated task. Validation
/// failures are collected per task; any failure fails the whole ingest.
pub fn stream_bundle(
    path: &Path,
    runtime: &PythonRuntime,
    check_semantics: bool,
    mut consume: impl FnMut(LoadedTask),
) -> anyhow::Result<usize> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("cannot open bundle {}", path.display()))?;
    let mut diagnostics: Vec<String> = Vec::new();
    let mut seen_ids: Vec<String> = Vec::new();
    let mut total = 0usize;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        let label = |id: &str| format!("line {} ({id})", lineno + 1);
        let json: TaskJson = match serde_json::from_str(&line) {
            Ok(json) => json,
            Err(e) => {
                diagnostics.push(format!("line {}: malformed task record: {e}", lineno + 1));
                continue;
            }
        };
        let task_id = json.task_id.clone();
        if seen_ids.contains(&task_id) {
            diagnostics.push(format!("{}: duplicate task_id", label(&task_id)));
            continue;
        }
        seen_ids.push(task_id.clone());
        match convert_task(json) {
            Ok(loaded) => {
                if check_semantics {
                    if let Err(e) = validate_semantics(runtime, &loaded.task) {
                        diagnostics.push(format!("{}: {e}", label(&task_id)));
                        continue;
                    }
                }
                consume(loaded);
            }
            Err(e) => diagnostics.push(format!("{}: {e}", label(&task_id))),
        }
    }
    if diagnostics.is_empty() {
        Ok(total)
    } else {
        Err(BundleError(diagnostics, total).into())
    }
}

/// Load and validate a whole bundle.
pub fn ingest_bundle(
    path: &Path,
    runtime: &PythonRuntime,
    check_semantics: bool,
) -> anyhow::Result<Vec<LoadedTask>> {
    let mut tasks = Vec::new();
    stream_bundle(path, runtime, check_semantics, |t| tasks.push(t))?;
    Ok(tasks)
}
