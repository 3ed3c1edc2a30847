//! Append-only run records.
//!
//! Every pipeline step persists one self-identifying record to a
//! line-delimited file per stage, which is what makes runs resumable and
//! auditable: a completed (task, candidate, check) triple is skipped on
//! resume by key lookup, and reports are rebuilt from records alone.
//!
//! `CONTRACTBENCH_FAULT_AFTER_RECORDS=<n>` aborts the process after `n`
//! appends; the crash-resume tests use it to cut runs at record boundaries.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use contractbench::model::{
    InputState, PromptKind, RawVerifierStatus, Soundness, ViolationClass,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecordPayload {
    Completion {
        candidate_id: String,
        model_id: String,
        prompt_kind: PromptKind,
        sample_index: usize,
        prompt_hash: String,
        text: String,
    },
    Shape {
        candidate_id: String,
        shape_ok: bool,
        contract_source: Option<String>,
        error: Option<String>,
    },
    Soundness {
        candidate_id: String,
        soundness: Soundness,
        raw_status: RawVerifierStatus,
        witness: Option<InputState>,
        wall_seconds: f64,
        log_digest: String,
    },
    Completeness {
        candidate_id: String,
        checked: BTreeSet<String>,
        killed: BTreeSet<String>,
        witnesses: BTreeMap<String, InputState>,
        errors: BTreeMap<String, String>,
        log_digest: String,
        wall_seconds: f64,
    },
    Testset {
        candidate_id: String,
        test_set_correct: bool,
        bug_complete: bool,
        wall_seconds: f64,
    },
    MutantConfirm {
        mutant_id: String,
        confirmed: bool,
        trigger: Option<InputState>,
    },
    Tester {
        candidate_id: String,
        violations: Vec<ViolationClass>,
        wall_seconds: f64,
    },
}

impl RecordPayload {
    fn stage(&self) -> &'static str {
        match self {
            RecordPayload::Completion { .. } => "completions",
            RecordPayload::Shape { .. } => "shapes",
            RecordPayload::Soundness { .. } => "soundness",
            RecordPayload::Completeness { .. } => "completeness",
            RecordPayload::Testset { .. } => "testset",
            RecordPayload::MutantConfirm { .. } => "mutant_confirm",
            RecordPayload::Tester { .. } => "tester",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    /// Seconds since the epoch; excluded from identity.
    pub timestamp: f64,
    pub task_id: String,
    #[serde(flatten)]
    pub payload: RecordPayload,
}

impl RunRecord {
    pub fn new(task_id: impl Into<String>, payload: RecordPayload) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        RunRecord {
            schema_version: SCHEMA_VERSION,
            timestamp,
            task_id: task_id.into(),
            payload,
        }
    }

    /// Identity of the (task, candidate-or-mutant, check) triple this record
    /// completes. Sample-level completion records key on the sample index.
    pub fn key(&self) -> String {
        let stage = self.payload.stage();
        match &self.payload {
            RecordPayload::Completion { candidate_id, .. }
            | RecordPayload::Shape { candidate_id, .. }
            | RecordPayload::Soundness { candidate_id, .. }
            | RecordPayload::Completeness { candidate_id, .. }
            | RecordPayload::Testset { candidate_id, .. }
            | RecordPayload::Tester { candidate_id, .. } => {
                format!("{stage}\x1f{}\x1f{candidate_id}", self.task_id)
            }
            RecordPayload::MutantConfirm { mutant_id, .. } => {
                format!("{stage}\x1f{}\x1f{mutant_id}", self.task_id)
            }
        }
    }

    /// Canonical identity-plus-content form with volatile fields (timestamp,
    /// wall times) excluded. Two runs match when their canonical record
    /// multisets match.
    pub fn canonical(&self) -> String {
        let mut payload = self.payload.clone();
        match &mut payload {
            RecordPayload::Soundness { wall_seconds, .. }
            | RecordPayload::Completeness { wall_seconds, .. }
            | RecordPayload::Testset { wall_seconds, .. }
            | RecordPayload::Tester { wall_seconds, .. } => *wall_seconds = 0.0,
            _ => {}
        }
        let payload = serde_json::to_string(&payload).expect("serializable payload");
        format!("{}\x1f{}\x1f{payload}", self.schema_version, self.task_id)
    }
}

/// Append-only store backed by one JSONL file per stage.
pub struct RecordStore {
    dir: PathBuf,
    write_lock: Mutex<()>,
    appended: AtomicUsize,
    fault_after: Option<usize>,
}

const STAGES: &[&str] = &[
    "completions",
    "shapes",
    "soundness",
    "completeness",
    "testset",
    "mutant_confirm",
    "tester",
];

impl RecordStore {
    pub fn open(dir: impl Into<PathBuf>) -> anyhow::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("cannot create record dir {}", dir.display()))?;
        let fault_after = std::env::var("CONTRACTBENCH_FAULT_AFTER_RECORDS")
            .ok()
            .and_then(|v| v.parse().ok());
        Ok(RecordStore {
            dir,
            write_lock: Mutex::new(()),
            appended: AtomicUsize::new(0),
            fault_after,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn stage_path(&self, stage: &str) -> PathBuf {
        self.dir.join(format!("{stage}.jsonl"))
    }

    /// Append one record; flushed before returning so a later crash cannot
    /// lose it.
    pub fn append(&self, record: &RunRecord) -> anyhow::Result<()> {
        let _guard = self.write_lock.lock().expect("record lock");
        if let Some(limit) = self.fault_after {
            if self.appended.load(Ordering::SeqCst) >= limit {
                eprintln!("injected fault: aborting after {limit} record append(s)");
                std::process::exit(3);
            }
        }
        let mut line = serde_json::to_string(record).expect("serializable record");
        line.push('\n');
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.stage_path(record.payload.stage()))?;
        file.write_all(line.as_bytes())?;
        file.flush()?;
        self.appended.fetch_add(1, Ordering::SeqCst);
        Ok(())
    }

    /// Load every record from every stage file.
    pub fn load_all(&self) -> anyhow::Result<Vec<RunRecord>> {
        let mut records = Vec::new();
        for stage in STAGES {
            let path = self.stage_path(stage);
            let file = match std::fs::File::open(&path) {
                Ok(f) => f,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => continue,
                Err(e) => return Err(e.into()),
            };
            for (lineno, line) in BufReader::new(file).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: RunRecord = serde_json::from_str(&line).with_context(|| {
                    format!("corrupt record {}:{}", path.display(), lineno + 1)
                })?;
                if record.schema_version > SCHEMA_VERSION {
                    anyhow::bail!(
                        "record {}:{} has schema version {} > supported {}",
                        path.display(),
                        lineno + 1,
                        record.schema_version,
                        SCHEMA_VERSION
                    );
                }
                records.push(record);
            }
        }
        Ok(records)
    }

    pub fn has_any_records(&self) -> bool {
        STAGES.iter().any(|stage| {
            std::fs::metadata(self.stage_path(stage))
                .map(|m| m.len() > 0)
                .unwrap_or(false)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soundness_record(candidate: &str) -> RunRecord {
        RunRecord::new(
            "t1",
            RecordPayload::Soundness {
                candidate_id: candidate.into(),
                soundness: Soundness::Sound,
                raw_status: RawVerifierStatus::Safe,
                witness: None,
                wall_seconds: 0.25,
                log_digest: "abc".into(),
            },
        )
    }

    #[test]
    fn append_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let store = RecordStore::open(dir.path()).unwrap();
        store.append(&soundness_record("c1")).unwrap();
        store
            .append(&RunRecord::new(
                "t1",
                RecordPayload::MutantConfirm {
                    mutant_id: "m1".into(),
                    confirmed: true,
                    trigger: None,
                },
            ))
            .unwrap();
        let records = store.load_all().unwrap();
        assert_eq!(records.len(), 2);
        assert!(store.has_any_records());
    }

    #[test]
    fn keys_identify_check_triples() {
        let a = soundness_record("c1");
        let b = soundness_record("c2");
        assert_ne!(a.key(), b.key());
        assert_eq!(a.key(), soundness_record("c1").key());
        // Canonical form ignores the timestamp.
        let mut later = soundness_record("c1");
        later.timestamp += 100.0;
        assert_eq!(a.canonical(), later.canonical());
    }

    #[test]
    fn future_schema_versions_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = RecordStore::open(dir.path()).unwrap();
        let mut record = soundness_record("c1");
        record.schema_version = SCHEMA_VERSION + 1;
        store.append(&record).unwrap();
        assert!(store.load_all().is_err());
    }
}
