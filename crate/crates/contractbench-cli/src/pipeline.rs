//! The generate → validate → report pipeline with resumable persistence.
//!
//! Stage ordering follows the validation protocol: completeness is only
//! computed for candidates already judged verification-sound, and mutants
//! enter completeness denominators only after differential confirmation.
//! Every step writes one run record before the pipeline moves on, so a
//! killed run resumes by key lookup without repeating backend calls.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use anyhow::Context;
use sha2::{Digest, Sha256};

use contractbench::client::{prompt_hash, CompletionClient, LiveConfig, ReplayStore, SamplingConfig};
use contractbench::codec;
use contractbench::context::extract_context;
use contractbench::harness::{
    self, CrossHairBackend, PynguinBackend, VerifierBackend,
};
use contractbench::metrics::{self, CandidateViolations, GroupKey};
use contractbench::model::{
    ContractCandidate, PromptKind, ReferenceTask, Soundness, Verdict,
};
use contractbench::prompt::{build_nl2contract_prompt, build_nl2postcond_prompt, wrap_postcondition, PromptBundle};
use contractbench::pysrc;
use contractbench::runtime::PythonRuntime;

use crate::bundle::LoadedTask;
use crate::records::{RecordPayload, RecordStore, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifierChoice {
    Exhaustive,
    CrossHair,
}

impl std::str::FromStr for VerifierChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exhaustive" => Ok(VerifierChoice::Exhaustive),
            "crosshair" => Ok(VerifierChoice::CrossHair),
            other => Err(format!("unknown backend {other:?} (exhaustive|crosshair)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub bundle_path: PathBuf,
    pub out_dir: PathBuf,
    pub models: Vec<String>,
    pub prompt_kinds: Vec<PromptKind>,
    pub n_samples: usize,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub seed: Option<u64>,
    pub verifier: VerifierChoice,
    pub tester_enabled: bool,
    pub timeout_soundness: Duration,
    pub timeout_mutant: Duration,
    pub tester_budget: Duration,
    pub concurrency: usize,
    pub resume: bool,
    pub replay_dir: PathBuf,
    pub live: Option<LiveConfig>,
    pub ks: Vec<usize>,
}

impl RunConfig {
    pub fn records_dir(&self) -> PathBuf {
        self.out_dir.join("records")
    }
}

/// Deterministic parallel map: worker threads pull from a shared queue,
/// results return in input order.
fn run_parallel<T, R, F>(items: Vec<T>, workers: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let queue: Mutex<Vec<(usize, T)>> = Mutex::new(items.into_iter().enumerate().rev().collect());
    let results: Mutex<Vec<(usize, R)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1) {
            scope.spawn(|| loop {
                let item = queue.lock().expect("queue lock").pop();
                match item {
                    Some((idx, item)) => {
                        let out = f(item);
                        results.lock().expect("results lock").push((idx, out));
                    }
                    None => break,
                }
            });
        }
    });
    let mut results = results.into_inner().expect("results");
    results.sort_by_key(|(idx, _)| *idx);
    results.into_iter().map(|(_, r)| r).collect()
}

fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// The source file shown to the model: file context (if any) plus the stub.
fn prompt_file(task: &ReferenceTask) -> String {
    if task.file_context.trim().is_empty() {
        task.stub.clone()
    } else {
        format!("{}\n\n{}", task.file_context.trim_end(), task.stub)
    }
}

fn render_prompt(task: &ReferenceTask, kind: PromptKind) -> anyhow::Result<PromptBundle> {
    let file = prompt_file(task);
    let slice = extract_context(&file, &task.entry_point)
        .with_context(|| format!("context extraction for {}", task.task_id))?;
    Ok(match kind {
        PromptKind::Nl2Contract => build_nl2contract_prompt(&slice, &task.entry_point),
        PromptKind::Nl2Postcond => build_nl2postcond_prompt(&slice, &task.entry_point),
    })
}

/// Pull the assert statements out of a postcondition completion: fenced
/// blocks first, then raw lines.
fn extract_postcondition(completion: &str) -> Option<String> {
    let mut regions: Vec<String> = Vec::new();
    let mut fence: Option<String> = None;
    for line in completion.lines() {
        if line.trim_start().starts_with("```") {
            match fence.take() {
                Some(block) => regions.push(block),
                None => fence = Some(String::new()),
            }
            continue;
        }
        if let Some(block) = fence.as_mut() {
            block.push_str(line);
            block.push('\n');
        }
    }
    if let Some(block) = fence {
        regions.push(block);
    }
    regions.push(completion.to_string());
    for region in regions {
        let asserts: Vec<&str> = region
            .lines()
            .map(str::trim)
            .filter(|l| l.starts_with("assert ") || *l == "assert")
            .collect();
        if !asserts.is_empty() {
            return Some(asserts.join("\n"));
        }
    }
    None
}

/// Turn one completion into a candidate: extract (or wrap) the contract and
/// check its shape.
fn shape_candidate(
    task: &ReferenceTask,
    kind: PromptKind,
    completion: &str,
    expected_name: &str,
) -> (Option<String>, bool, Option<String>) {
    let contract = match kind {
        PromptKind::Nl2Contract => codec::extract_contract(completion, expected_name)
            .map_err(|e| e.to_string()),
        PromptKind::Nl2Postcond => {
            let stub_sig = pysrc::scan(&task.stub)
                .ok()
                .and_then(|f| {
                    f.defs_named(&task.entry_point)
                        .first()
                        .map(|d| f.signature_text(d).to_string())
                })
                .ok_or_else(|| "stub has no signature".to_string());
            stub_sig.and_then(|sig| {
                let post = extract_postcondition(completion)
                    .ok_or_else(|| "no assert statement in completion".to_string())?;
                wrap_postcondition(&post, &sig, &task.entry_point).map_err(|e| e.to_string())
            })
        }
    };
    match contract {
        Ok(source) => match codec::check_shape(&source, &task.entry_point) {
            Ok(shape) => (Some(source), shape.shape_ok(), None),
            Err(e) => (Some(source), false, Some(e.to_string())),
        },
        Err(e) => (None, false, Some(e)),
    }
}

pub struct GenerateOutcome {
    pub candidates: Vec<ContractCandidate>,
}

/// Sample, extract, and shape-check every (task, model, prompt) triple.
pub fn generate_stage(
    cfg: &RunConfig,
    tasks: &[LoadedTask],
    store: &RecordStore,
    existing: &HashMap<String, RunRecord>,
) -> anyhow::Result<GenerateOutcome> {
    let replay = ReplayStore::open(&cfg.replay_dir)?;
    let client = match &cfg.live {
        Some(live) => CompletionClient::live(replay, live.clone())?,
        None => CompletionClient::replay(replay),
    };

    let mut work: Vec<(&LoadedTask, String, PromptKind)> = Vec::new();
    for task in tasks {
        for model in &cfg.models {
            for kind in &cfg.prompt_kinds {
                work.push((task, model.clone(), *kind));
            }
        }
    }

    let outputs = run_parallel(work, cfg.concurrency, |(loaded, model, kind)| {
        generate_one(cfg, loaded, &model, kind, &client, store, existing)
    });

    let mut candidates = Vec::new();
    for out in outputs {
        candidates.extend(out?);
    }
    Ok(GenerateOutcome { candidates })
}

fn generate_one(
    cfg: &RunConfig,
    loaded: &LoadedTask,
    model: &str,
    kind: PromptKind,
    client: &CompletionClient,
    store: &RecordStore,
    existing: &HashMap<String, RunRecord>,
) -> anyhow::Result<Vec<ContractCandidate>> {
    let task = &loaded.task;
    let mut candidates = Vec::new();

    // With every record already present, rebuild without touching the client.
    if cfg.resume {
        let mut rebuilt = Vec::new();
        for index in 0..cfg.n_samples {
            let candidate_id = ContractCandidate::id_for(&task.task_id, model, kind, index);
            let completion_key = RunRecord::new(
                task.task_id.clone(),
                RecordPayload::Completion {
                    candidate_id: candidate_id.clone(),
                    model_id: model.into(),
                    prompt_kind: kind,
                    sample_index: index,
                    prompt_hash: String::new(),
                    text: String::new(),
                },
            )
            .key();
            let shape_key = RunRecord::new(
                task.task_id.clone(),
                RecordPayload::Shape {
                    candidate_id: candidate_id.clone(),
                    shape_ok: false,
                    contract_source: None,
                    error: None,
                },
            )
            .key();
            match (existing.get(&completion_key), existing.get(&shape_key)) {
                (Some(completion), Some(shape)) => {
                    let (RecordPayload::Completion { text, .. }, RecordPayload::Shape { shape_ok, contract_source, .. }) =
                        (&completion.payload, &shape.payload)
                    else {
                        anyhow::bail!("record kind mismatch for {candidate_id}");
                    };
                    rebuilt.push(ContractCandidate {
                        candidate_id,
                        task_id: task.task_id.clone(),
                        prompt_kind: kind,
                        model_id: model.into(),
                        sample_index: index,
                        raw_completion: text.clone(),
                        contract_source: contract_source.clone(),
                        shape_ok: *shape_ok,
                    });
                }
                _ => break,
            }
        }
        if rebuilt.len() == cfg.n_samples {
            return Ok(rebuilt);
        }
    }

    let prompt = render_prompt(task, kind)?;
    let sampling = SamplingConfig {
        n_samples: cfg.n_samples,
        temperature: cfg.temperature,
        model_id: model.to_string(),
        max_tokens: cfg.max_tokens,
        seed: cfg.seed,
    };
    let records = client.sample(&prompt, &sampling)?;
    let hash = prompt_hash(&prompt.user_text, model);
    for record in records {
        let candidate_id =
            ContractCandidate::id_for(&task.task_id, model, kind, record.sample_index);
        let completion_record = RunRecord::new(
            task.task_id.clone(),
            RecordPayload::Completion {
                candidate_id: candidate_id.clone(),
                model_id: model.into(),
                prompt_kind: kind,
                sample_index: record.sample_index,
                prompt_hash: hash.clone(),
                text: record.text.clone(),
            },
        );
        append_unless_resumed(cfg, store, existing, completion_record)?;

        let (contract_source, shape_ok, error) =
            shape_candidate(task, kind, &record.text, &prompt.expected_contract_name);
        let shape_record = RunRecord::new(
            task.task_id.clone(),
            RecordPayload::Shape {
                candidate_id: candidate_id.clone(),
                shape_ok,
                contract_source: contract_source.clone(),
                error,
            },
        );
        append_unless_resumed(cfg, store, existing, shape_record)?;

        candidates.push(ContractCandidate {
            candidate_id,
            task_id: task.task_id.clone(),
            prompt_kind: kind,
            model_id: model.into(),
            sample_index: record.sample_index,
            raw_completion: record.text,
            contract_source,
            shape_ok,
        });
    }
    Ok(candidates)
}

fn append_unless_resumed(
    cfg: &RunConfig,
    store: &RecordStore,
    existing: &HashMap<String, RunRecord>,
    record: RunRecord,
) -> anyhow::Result<()> {
    if cfg.resume && existing.contains_key(&record.key()) {
        return Ok(());
    }
    store.append(&record)
}

/// Validate every shape-conformant candidate: confirm mutants once per
/// task, then soundness, completeness (sound candidates only), test-set
/// checks, and optionally the search-based tester.
pub fn validate_stage(
    cfg: &RunConfig,
    tasks: &[LoadedTask],
    candidates: &[ContractCandidate],
    store: &RecordStore,
    existing: &HashMap<String, RunRecord>,
) -> anyhow::Result<()> {
    let runtime = PythonRuntime::new();

    // Mutant confirmation, one record per (task, mutant).
    let confirm_work: Vec<(&LoadedTask, usize)> = tasks
        .iter()
        .flat_map(|t| (0..t.task.mutants.len()).map(move |i| (t, i)))
        .collect();
    let confirmations = run_parallel(confirm_work, cfg.concurrency, |(loaded, mutant_idx)| {
        confirm_one(cfg, loaded, mutant_idx, &runtime, store, existing)
    });
    let mut confirmed: BTreeMap<&str, Vec<&contractbench::model::Mutant>> = BTreeMap::new();
    for result in confirmations {
        let (task_id, mutant_idx, is_confirmed) = result?;
        if is_confirmed {
            let loaded = tasks.iter().find(|t| t.task.task_id == task_id).expect("task");
            confirmed
                .entry(&loaded.task.task_id)
                .or_default()
                .push(&loaded.task.mutants[mutant_idx]);
        }
    }

    let by_id: HashMap<&str, &LoadedTask> = tasks
        .iter()
        .map(|t| (t.task.task_id.as_str(), t))
        .collect();
    let work: Vec<&ContractCandidate> = candidates.iter().filter(|c| c.shape_ok).collect();
    let results = run_parallel(work, cfg.concurrency, |candidate| {
        let loaded = by_id
            .get(candidate.task_id.as_str())
            .expect("candidate belongs to a loaded task");
        validate_one(
            cfg,
            loaded,
            candidate,
            confirmed
                .get(candidate.task_id.as_str())
                .map(Vec::as_slice)
                .unwrap_or(&[]),
            &runtime,
            store,
            existing,
        )
    });
    for result in results {
        result?;
    }
    Ok(())
}

fn confirm_one(
    cfg: &RunConfig,
    loaded: &LoadedTask,
    mutant_idx: usize,
    runtime: &PythonRuntime,
    store: &RecordStore,
    existing: &HashMap<String, RunRecord>,
) -> anyhow::Result<(String, usize, bool)> {
    let task = &loaded.task;
    let mutant = &task.mutants[mutant_idx];
    let key = RunRecord::new(
        task.task_id.clone(),
        RecordPayload::MutantConfirm {
            mutant_id: mutant.mutant_id.clone(),
            confirmed: false,
            trigger: None,
        },
    )
    .key();
    if cfg.resume {
        if let Some(record) = existing.get(&key) {
            if let RecordPayload::MutantConfirm { confirmed, .. } = &record.payload {
                return Ok((task.task_id.clone(), mutant_idx, *confirmed));
            }
        }
    }
    let (is_confirmed, trigger) = harness::confirm_mutant(runtime, task, mutant)?;
    store.append(&RunRecord::new(
        task.task_id.clone(),
        RecordPayload::MutantConfirm {
            mutant_id: mutant.mutant_id.clone(),
            confirmed: is_confirmed,
            trigger,
        },
    ))?;
    Ok((task.task_id.clone(), mutant_idx, is_confirmed))
}

fn validate_one(
    cfg: &RunConfig,
    loaded: &LoadedTask,
    candidate: &ContractCandidate,
    confirmed_mutants: &[&contractbench::model::Mutant],
    runtime: &PythonRuntime,
    store: &RecordStore,
    existing: &HashMap<String, RunRecord>,
) -> anyhow::Result<()> {
    let task = &loaded.task;
    let contract = candidate
        .contract_source
        .as_deref()
        .expect("shape-ok candidates carry a contract");
    let crosshair = CrossHairBackend::default();
    let backend = match cfg.verifier {
        VerifierChoice::Exhaustive => {
            let domain = loaded.domain.as_ref().ok_or_else(|| {
                anyhow::anyhow!(
                    "task {} has no enumeration domain; the exhaustive backend needs one",
                    task.task_id
                )
            })?;
            VerifierBackend::Exhaustive(domain)
        }
        VerifierChoice::CrossHair => VerifierBackend::CrossHair(&crosshair),
    };

    // Soundness.
    let soundness_key = RunRecord::new(
        task.task_id.clone(),
        RecordPayload::Soundness {
            candidate_id: candidate.candidate_id.clone(),
            soundness: Soundness::Unknown,
            raw_status: contractbench::model::RawVerifierStatus::Unknown,
            witness: None,
            wall_seconds: 0.0,
            log_digest: String::new(),
        },
    )
    .key();
    let soundness = match existing.get(&soundness_key).filter(|_| cfg.resume) {
        Some(record) => match &record.payload {
            RecordPayload::Soundness { soundness, .. } => *soundness,
            _ => unreachable!("key space separates stages"),
        },
        None => {
            let (outcome, soundness) =
                harness::check_soundness(runtime, task, contract, &backend, cfg.timeout_soundness)?;
            store.append(&RunRecord::new(
                task.task_id.clone(),
                RecordPayload::Soundness {
                    candidate_id: candidate.candidate_id.clone(),
                    soundness,
                    raw_status: outcome.status,
                    witness: outcome.witness.clone(),
                    wall_seconds: outcome.wall_seconds,
                    log_digest: digest(&outcome.raw_log),
                },
            ))?;
            soundness
        }
    };

    // Completeness, only for sound candidates.
    if soundness.is_sound() {
        let completeness_key = RunRecord::new(
            task.task_id.clone(),
            RecordPayload::Completeness {
                candidate_id: candidate.candidate_id.clone(),
                checked: Default::default(),
                killed: Default::default(),
                witnesses: Default::default(),
                errors: Default::default(),
                log_digest: String::new(),
                wall_seconds: 0.0,
            },
        )
        .key();
        if !(cfg.resume && existing.contains_key(&completeness_key)) {
            let outcome = harness::check_completeness(
                runtime,
                task,
                contract,
                confirmed_mutants,
                &backend,
                cfg.timeout_mutant,
            )?;
            store.append(&RunRecord::new(
                task.task_id.clone(),
                RecordPayload::Completeness {
                    candidate_id: candidate.candidate_id.clone(),
                    checked: confirmed_mutants
                        .iter()
                        .map(|m| m.mutant_id.clone())
                        .collect(),
                    killed: outcome.killed,
                    witnesses: outcome.witnesses,
                    errors: outcome.errors,
                    log_digest: digest(&outcome.raw_log),
                    wall_seconds: outcome.wall_seconds,
                },
            ))?;
        }
    }

    // Test-set correctness and bug completeness.
    let testset_key = RunRecord::new(
        task.task_id.clone(),
        RecordPayload::Testset {
            candidate_id: candidate.candidate_id.clone(),
            test_set_correct: false,
            bug_complete: false,
            wall_seconds: 0.0,
        },
    )
    .key();
    if !(cfg.resume && existing.contains_key(&testset_key)) {
        let outcome = harness::check_test_set(runtime, task, contract)?;
        store.append(&RunRecord::new(
            task.task_id.clone(),
            RecordPayload::Testset {
                candidate_id: candidate.candidate_id.clone(),
                test_set_correct: outcome.test_set_correct,
                bug_complete: outcome.bug_complete,
                wall_seconds: outcome.wall_seconds,
            },
        ))?;
    }

    // Optional tester stage: drive the first confirmed mutant (the bundled
    // stand-in for a buggy solution) with the contract injected.
    if cfg.tester_enabled {
        if let Some(mutant) = confirmed_mutants.first() {
            let tester_key = RunRecord::new(
                task.task_id.clone(),
                RecordPayload::Tester {
                    candidate_id: candidate.candidate_id.clone(),
                    violations: Vec::new(),
                    wall_seconds: 0.0,
                },
            )
            .key();
            if !(cfg.resume && existing.contains_key(&tester_key)) {
                let program = harness::build_check_target(task, &mutant.impl_source, "")?;
                let injected = codec::inject_for_tester(&program, contract)?;
                let started = std::time::Instant::now();
                let violations = harness::run_tester(
                    runtime,
                    task,
                    &injected,
                    &PynguinBackend::default(),
                    cfg.tester_budget,
                )?;
                store.append(&RunRecord::new(
                    task.task_id.clone(),
                    RecordPayload::Tester {
                        candidate_id: candidate.candidate_id.clone(),
                        violations,
                        wall_seconds: started.elapsed().as_secs_f64(),
                    },
                ))?;
            }
        }
    }
    Ok(())
}

/// Rebuild candidates from completion + shape records, for running
/// validation as a separate command.
pub fn rebuild_candidates(records: &[RunRecord]) -> Vec<ContractCandidate> {
    let mut by_id: BTreeMap<String, ContractCandidate> = BTreeMap::new();
    for record in records {
        if let RecordPayload::Completion {
            candidate_id,
            model_id,
            prompt_kind,
            sample_index,
            text,
            ..
        } = &record.payload
        {
            by_id.insert(
                candidate_id.clone(),
                ContractCandidate {
                    candidate_id: candidate_id.clone(),
                    task_id: record.task_id.clone(),
                    prompt_kind: *prompt_kind,
                    model_id: model_id.clone(),
                    sample_index: *sample_index,
                    raw_completion: text.clone(),
                    contract_source: None,
                    shape_ok: false,
                },
            );
        }
    }
    for record in records {
        if let RecordPayload::Shape {
            candidate_id,
            shape_ok,
            contract_source,
            ..
        } = &record.payload
        {
            if let Some(candidate) = by_id.get_mut(candidate_id) {
                candidate.shape_ok = *shape_ok;
                candidate.contract_source = contract_source.clone();
            }
        }
    }
    by_id.into_values().collect()
}

/// Everything the report stage needs, rebuilt from records alone.
pub struct Rebuilt {
    pub verdicts: Vec<Verdict>,
    pub task_ids: Vec<String>,
    pub violations_by_group: BTreeMap<GroupKey, Vec<CandidateViolations>>,
    /// Tasks with at least one bug-triggering tester detection, per group.
    pub detected_tasks: BTreeMap<GroupKey, HashSet<String>>,
}

pub fn rebuild_verdicts(records: &[RunRecord]) -> anyhow::Result<Rebuilt> {
    let mut verdicts: BTreeMap<String, Verdict> = BTreeMap::new();
    let mut task_ids: Vec<String> = Vec::new();

    for record in records {
        if !task_ids.contains(&record.task_id) {
            task_ids.push(record.task_id.clone());
        }
        if let RecordPayload::Completion {
            candidate_id,
            model_id,
            prompt_kind,
            sample_index,
            ..
        } = &record.payload
        {
            let candidate = ContractCandidate {
                candidate_id: candidate_id.clone(),
                task_id: record.task_id.clone(),
                prompt_kind: *prompt_kind,
                model_id: model_id.clone(),
                sample_index: *sample_index,
                raw_completion: String::new(),
                contract_source: None,
                shape_ok: false,
            };
            verdicts
                .entry(candidate_id.clone())
                .or_insert_with(|| Verdict::new(&candidate));
        }
    }

    let mut violations_by_group: BTreeMap<GroupKey, Vec<CandidateViolations>> = BTreeMap::new();
    let mut detected_tasks: BTreeMap<GroupKey, HashSet<String>> = BTreeMap::new();
    for record in records {
        match &record.payload {
            RecordPayload::Soundness {
                candidate_id,
                soundness,
                raw_status,
                witness,
                wall_seconds,
                ..
            } => {
                if let Some(v) = verdicts.get_mut(candidate_id) {
                    v.soundness = *soundness;
                    v.raw_soundness = Some(*raw_status);
                    v.soundness_witness = witness.clone();
                    v.timings.insert("soundness".into(), *wall_seconds);
                }
            }
            RecordPayload::Completeness {
                candidate_id,
                checked,
                killed,
                wall_seconds,
                ..
            } => {
                if let Some(v) = verdicts.get_mut(candidate_id) {
                    v.checked_mutants = checked.clone();
                    v.killed_mutants = killed.clone();
                    v.timings.insert("completeness".into(), *wall_seconds);
                }
            }
            RecordPayload::Testset {
                candidate_id,
                test_set_correct,
                bug_complete,
                wall_seconds,
            } => {
                if let Some(v) = verdicts.get_mut(candidate_id) {
                    v.test_set_correct = *test_set_correct;
                    v.bug_complete = *bug_complete;
                    v.timings.insert("testset".into(), *wall_seconds);
                }
            }
            RecordPayload::Tester {
                candidate_id,
                violations,
                ..
            } => {
                if let Some(v) = verdicts.get(candidate_id) {
                    let group = GroupKey {
                        model_id: v.model_id.clone(),
                        prompt_kind: v.prompt_kind,
                    };
                    if violations.iter().any(|c| {
                        c.classification == contractbench::model::Classification::BugTriggering
                    }) {
                        detected_tasks
                            .entry(group.clone())
                            .or_default()
                            .insert(record.task_id.clone());
                    }
                    violations_by_group.entry(group).or_default().push(
                        CandidateViolations {
                            candidate_id: candidate_id.clone(),
                            violations: violations.clone(),
                        },
                    );
                }
            }
            _ => {}
        }
    }

    Ok(Rebuilt {
        verdicts: verdicts.into_values().collect(),
        task_ids,
        violations_by_group,
        detected_tasks,
    })
}

/// Compute rows from records, fold in detection columns when tester records
/// exist, and render every format into the out directory.
pub fn report_stage(
    records: &[RunRecord],
    tasks: Option<&[LoadedTask]>,
    ks: &[usize],
    out_dir: &std::path::Path,
) -> anyhow::Result<String> {
    let rebuilt = rebuild_verdicts(records)?;
    let placeholder_tasks: Vec<ReferenceTask>;
    let task_list: Vec<ReferenceTask> = match tasks {
        Some(tasks) => tasks.iter().map(|t| t.task.clone()).collect(),
        None => {
            placeholder_tasks = rebuilt
                .task_ids
                .iter()
                .map(|id| ReferenceTask {
                    task_id: id.clone(),
                    entry_point: String::new(),
                    stub: String::new(),
                    file_context: String::new(),
                    reference_impl: String::new(),
                    reference_precondition: String::new(),
                    test_inputs: vec![],
                    mutants: vec![],
                })
                .collect();
            placeholder_tasks
        }
    };

    let mut rows = metrics::aggregate(&rebuilt.verdicts, &task_list, ks)?;
    for row in &mut rows {
        if let Some(per_candidate) = rebuilt.violations_by_group.get(&row.group) {
            let detecting = per_candidate
                .iter()
                .filter(|c| {
                    c.violations.iter().any(|v| {
                        v.classification == contractbench::model::Classification::BugTriggering
                    })
                })
                .count();
            row.pct_detecting = Some(100.0 * detecting as f64 / per_candidate.len().max(1) as f64);
            row.bug_count = Some(
                rebuilt
                    .detected_tasks
                    .get(&row.group)
                    .map(HashSet::len)
                    .unwrap_or(0),
            );
        }
    }

    std::fs::create_dir_all(out_dir)?;
    let table = metrics::render_report(&rows, metrics::ReportFormat::TableText)?;
    std::fs::write(out_dir.join("report.txt"), &table)?;
    std::fs::write(
        out_dir.join("report.csv"),
        metrics::render_report(&rows, metrics::ReportFormat::Csv)?,
    )?;
    std::fs::write(
        out_dir.join("report.json"),
        metrics::render_report(&rows, metrics::ReportFormat::Json)?,
    )?;

    // Alarm analysis sidecar, emitted only when the tester ran.
    if !rebuilt.violations_by_group.is_empty() {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["model", "prompt", "pct_alarms", "pct_true"])?;
        for (group, per_candidate) in &rebuilt.violations_by_group {
            let stats = metrics::alarm_analysis(per_candidate);
            writer.write_record([
                group.model_id.as_str(),
                &group.prompt_kind.to_string(),
                &format!("{:.1}", stats.pct_alarms),
                &format!("{:.1}", stats.pct_true),
            ])?;
        }
        std::fs::write(out_dir.join("alarms.csv"), writer.into_inner()?)?;
    }
    Ok(table)
}

/// The full pipeline: ingest, generate, validate, report.
pub fn run_pipeline(cfg: &RunConfig) -> anyhow::Result<String> {
    // Fail on configuration problems before any work happens.
    if cfg.live.is_some() {
        // Constructing the client checks the API key variable.
        let probe = ReplayStore::open(&cfg.replay_dir)?;
        CompletionClient::live(probe, cfg.live.clone().expect("live config"))?;
    }
    let runtime = PythonRuntime::new();
    let tasks = crate::bundle::ingest_bundle(&cfg.bundle_path, &runtime, true)?;

    let store = RecordStore::open(cfg.records_dir())?;
    if store.has_any_records() && !cfg.resume {
        anyhow::bail!(
            "output directory {} already holds run records; pass --resume to continue it",
            cfg.out_dir.display()
        );
    }
    let existing: HashMap<String, RunRecord> = if cfg.resume {
        store
            .load_all()?
            .into_iter()
            .map(|r| (r.key(), r))
            .collect()
    } else {
        HashMap::new()
    };

    let generated = generate_stage(cfg, &tasks, &store, &existing)?;
    validate_stage(cfg, &tasks, &generated.candidates, &store, &existing)?;
    let records = store.load_all()?;
    report_stage(&records, Some(&tasks), &cfg.ks, &cfg.out_dir)
}
