//! Metric estimators, aggregation, and report rendering.
//!
//! `sound@k` and `accept@k` use the unbiased subset estimator from the
//! code-generation evaluation lineage: the probability that a uniformly
//! random size-k subset of the n samples contains at least one success,
//! `1 - C(n-c, k) / C(n, k)`, computed in exact rational arithmetic.
//! Completeness and kill-rate columns follow the published table layout:
//! `%complete` is the share of verification-sound candidates that also kill
//! every confirmed mutant, and `%killed` the share of confirmed mutants
//! killed by at least one sound candidate of the group.

use std::collections::{BTreeMap, BTreeSet};

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Classification, PromptKind, ReferenceTask, Verdict, ViolationClass};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("estimator domain violated: n={n}, c={c}, k={k}")]
    Domain { n: usize, c: usize, k: usize },
    #[error("inconsistent sample count in group {group}: task {task_id} has {actual}, expected {expected}")]
    InconsistentSampleCount {
        group: String,
        task_id: String,
        expected: usize,
        actual: usize,
    },
    #[error("verdict references unknown task {0:?}")]
    UnknownTask(String),
    #[error("report has no rows")]
    EmptyReport,
}

/// One table row is keyed by (model, prompt).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    pub model_id: String,
    pub prompt_kind: PromptKind,
}

impl std::fmt::Display for GroupKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.model_id, self.prompt_kind)
    }
}

/// Aggregated metrics for one (model, prompt) group. Percentages in [0, 100].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricRow {
    pub group: GroupKey,
    pub sound_at: BTreeMap<usize, f64>,
    pub accept_at: BTreeMap<usize, f64>,
    pub pct_complete: f64,
    pub tasks_with_complete: usize,
    pub task_count: usize,
    pub pct_killed: f64,
    /// Candidates enabling a bug-triggering detection; filled by the
    /// tester/verifier detection stage when it runs.
    pub pct_detecting: Option<f64>,
    /// Tasks with at least one bug-triggering detection.
    pub bug_count: Option<usize>,
}

/// Probability that a uniformly random size-k subset of n samples contains
/// at least one of the c successes: `1 - C(n-c, k) / C(n, k)`.
pub fn estimate_at_k(n: usize, c: usize, k: usize) -> Result<f64, MetricsError> {
    if c > n || k < 1 || k > n {
        return Err(MetricsError::Domain { n, c, k });
    }
    let miss = binomial(n - c, k);
    let total = binomial(n, k);
    let p = BigRational::one() - BigRational::new(miss, total);
    Ok(p.to_f64().unwrap_or(0.0))
}

fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 0..k {
        num *= BigInt::from(n - i);
        den *= BigInt::from(i + 1);
    }
    num / den
}

/// Aggregate verdicts into one row per (model, prompt) group.
pub fn aggregate(
    verdicts: &[Verdict],
    tasks: &[ReferenceTask],
    ks: &[usize],
) -> Result<Vec<MetricRow>, MetricsError> {
    let task_order: BTreeMap<&str, usize> = tasks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.task_id.as_str(), i))
        .collect();

    let mut groups: BTreeMap<GroupKey, BTreeMap<usize, Vec<&Verdict>>> = BTreeMap::new();
    for verdict in verdicts {
        let task_idx = *task_order
            .get(verdict.task_id.as_str())
            .ok_or_else(|| MetricsError::UnknownTask(verdict.task_id.clone()))?;
        groups
            .entry(GroupKey {
                model_id: verdict.model_id.clone(),
                prompt_kind: verdict.prompt_kind,
            })
            .or_default()
            .entry(task_idx)
            .or_default()
            .push(verdict);
    }

    let mut rows = Vec::new();
    for (group, by_task) in groups {
        let n = by_task.values().next().map(Vec::len).unwrap_or(0);
        for (task_idx, vs) in &by_task {
            if vs.len() != n {
                return Err(MetricsError::InconsistentSampleCount {
                    group: group.to_string(),
                    task_id: tasks[*task_idx].task_id.clone(),
                    expected: n,
                    actual: vs.len(),
                });
            }
        }
        let task_count = by_task.len();

        let mut sound_at = BTreeMap::new();
        let mut accept_at = BTreeMap::new();
        for &k in ks {
            if k < 1 || k > n {
                continue;
            }
            let mut sound_sum = 0.0;
            let mut accept_sum = 0.0;
            for vs in by_task.values() {
                let c_sound = vs.iter().filter(|v| v.soundness.is_sound()).count();
                let c_accept = vs.iter().filter(|v| v.test_set_correct).count();
                sound_sum += estimate_at_k(n, c_sound, k)?;
                accept_sum += estimate_at_k(n, c_accept, k)?;
            }
            sound_at.insert(k, 100.0 * sound_sum / task_count as f64);
            accept_at.insert(k, 100.0 * accept_sum / task_count as f64);
        }

        let sound: Vec<&&Verdict> = by_task
            .values()
            .flatten()
            .filter(|v| v.soundness.is_sound())
            .collect();
        let complete = sound.iter().filter(|v| v.is_complete()).count();
        let pct_complete = if sound.is_empty() {
            0.0
        } else {
            100.0 * complete as f64 / sound.len() as f64
        };

        let tasks_with_complete = by_task
            .values()
            .filter(|vs| vs.iter().any(|v| v.soundness.is_sound() && v.is_complete()))
            .count();

        let mut confirmed_total = 0usize;
        let mut killed_total = 0usize;
        for vs in by_task.values() {
            let mut confirmed: BTreeSet<&str> = BTreeSet::new();
            let mut killed: BTreeSet<&str> = BTreeSet::new();
            for v in vs {
                confirmed.extend(v.checked_mutants.iter().map(String::as_str));
                if v.soundness.is_sound() {
                    killed.extend(v.killed_mutants.iter().map(String::as_str));
                }
            }
            confirmed_total += confirmed.len();
            killed_total += killed.iter().filter(|m| confirmed.contains(*m)).count();
        }
        let pct_killed = if confirmed_total == 0 {
            0.0
        } else {
            100.0 * killed_total as f64 / confirmed_total as f64
        };

        rows.push(MetricRow {
            group,
            sound_at,
            accept_at,
            pct_complete,
            tasks_with_complete,
            task_count,
            pct_killed,
            pct_detecting: None,
            bug_count: None,
        });
    }
    Ok(rows)
}

/// Violations reported for one candidate, for false-alarm analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateViolations {
    pub candidate_id: String,
    pub violations: Vec<ViolationClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmStats {
    /// Share of candidates that produced at least one violation.
    pub pct_alarms: f64,
    /// Share of all reported violations that identify a real bug.
    pub pct_true: f64,
}

/// Alarm-rate analysis over a group's candidates. By convention an empty
/// input (or one with no violations at all) yields `(0, 0)`.
pub fn alarm_analysis(per_candidate: &[CandidateViolations]) -> AlarmStats {
    if per_candidate.is_empty() {
        return AlarmStats {
            pct_alarms: 0.0,
            pct_true: 0.0,
        };
    }
    let alarming = per_candidate
        .iter()
        .filter(|c| !c.violations.is_empty())
        .count();
    let total: usize = per_candidate.iter().map(|c| c.violations.len()).sum();
    let true_alarms: usize = per_candidate
        .iter()
        .flat_map(|c| &c.violations)
        .filter(|v| v.classification == Classification::BugTriggering)
        .count();
    AlarmStats {
        pct_alarms: 100.0 * alarming as f64 / per_candidate.len() as f64,
        pct_true: if total == 0 {
            0.0
        } else {
            100.0 * true_alarms as f64 / total as f64
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    TableText,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" | "table_text" | "text" => Ok(ReportFormat::TableText),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

/// Displayed percentages round half-up to one decimal; full precision is
/// persisted in the JSON form.
fn fmt_pct(x: f64) -> String {
    format!("{:.1}", (x * 10.0).round() / 10.0)
}

fn header(ks: &[usize]) -> Vec<String> {
    let mut cols = vec!["model".to_string(), "prompt".to_string()];
    for k in ks {
        cols.push(format!("accept@{k}"));
    }
    for k in ks {
        cols.push(format!("sound@{k}"));
    }
    cols.extend(
        [
            "pct_complete",
            "tasks_complete",
            "tasks",
            "pct_killed",
            "pct_detecting",
            "bugs",
        ]
        .map(String::from),
    );
    cols
}

fn row_cells(row: &MetricRow, ks: &[usize]) -> Vec<String> {
    let mut cells = vec![row.group.model_id.clone(), row.group.prompt_kind.to_string()];
    for k in ks {
        cells.push(row.accept_at.get(k).map(|p| fmt_pct(*p)).unwrap_or_else(|| "-".into()));
    }
    for k in ks {
        cells.push(row.sound_at.get(k).map(|p| fmt_pct(*p)).unwrap_or_else(|| "-".into()));
    }
    cells.push(fmt_pct(row.pct_complete));
    cells.push(format!("{}/{}", row.tasks_with_complete, row.task_count));
    cells.push(row.task_count.to_string());
    cells.push(fmt_pct(row.pct_killed));
    cells.push(
        row.pct_detecting
            .map(fmt_pct)
            .unwrap_or_else(|| "-".into()),
    );
    cells.push(
        row.bug_count
            .map(|b| b.to_string())
            .unwrap_or_else(|| "-".into()),
    );
    cells
}

fn report_ks(rows: &[MetricRow]) -> Vec<usize> {
    let mut ks: BTreeSet<usize> = BTreeSet::new();
    for row in rows {
        ks.extend(row.sound_at.keys().copied());
        ks.extend(row.accept_at.keys().copied());
    }
    ks.into_iter().collect()
}

/// Render rows in the published table layout.
pub fn render_report(rows: &[MetricRow], format: ReportFormat) -> Result<String, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::EmptyReport);
    }
    let ks = report_ks(rows);
    match format {
        ReportFormat::TableText => {
            let header = header(&ks);
            let mut table: Vec<Vec<String>> = vec![header.clone()];
            table.extend(rows.iter().map(|r| row_cells(r, &ks)));
            let widths: Vec<usize> = (0..header.len())
                .map(|i| table.iter().map(|r| r[i].len()).max().unwrap_or(0))
                .collect();
            let mut out = String::new();
            for (idx, row) in table.iter().enumerate() {
                let line: Vec<String> = row
                    .iter()
                    .zip(&widths)
                    .map(|(cell, w)| format!("{cell:>w$}", w = w))
                    .collect();
                out.push_str(line.join("  ").trim_end());
                out.push('\n');
                if idx == 0 {
                    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                    out.push_str(&rule.join("  "));
                    out.push('\n');
                }
            }
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer
                .write_record(header(&ks))
                .expect("in-memory write");
            for row in rows {
                writer.write_record(row_cells(row, &ks)).expect("in-memory write");
            }
            let bytes = writer.into_inner().expect("in-memory flush");
            Ok(String::from_utf8(bytes).expect("csv is utf-8"))
        }
        ReportFormat::Json => {
            let doc = serde_json::json!({
                "schema_version": 1,
                "rows": rows,
            });
            Ok(serde_json::to_string_pretty(&doc).expect("serializable") + "\n")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Soundness, Verdict};

    /// Independent oracle: enumerate all size-k index subsets and count
    /// those containing at least one success index (< c).
    fn oracle_at_k(n: usize, c: usize, k: usize) -> f64 {
        fn visit(start: usize, left: usize, n: usize, c: usize, any: bool, hits: &mut (u64, u64)) {
            if left == 0 {
                hits.1 += 1;
                if any {
                    hits.0 += 1;
                }
                return;
            }
            for i in start..n {
                visit(i + 1, left - 1, n, c, any || i < c, hits);
            }
        }
        let mut hits = (0u64, 0u64);
        visit(0, k, n, c, false, &mut hits);
        hits.0 as f64 / hits.1 as f64
    }

    #[test]
    fn estimator_matches_enumeration_for_small_n() {
        for n in 1..=8 {
            for c in 0..=n {
                for k in 1..=n {
                    let est = estimate_at_k(n, c, k).unwrap();
                    let oracle = oracle_at_k(n, c, k);
                    assert!(
                        (est - oracle).abs() <= 1e-12,
                        "n={n} c={c} k={k}: {est} vs {oracle}"
                    );
                }
            }
        }
    }

    #[test]
    fn estimator_trivial_and_derived_values() {
        for k in 1..=10 {
            assert_eq!(estimate_at_k(10, 0, k).unwrap(), 0.0);
        }
        assert_eq!(estimate_at_k(10, 10, 1).unwrap(), 1.0);
        // 5 of the 6 two-element subsets of {s, s, f, f} contain a success.
        assert!((estimate_at_k(4, 2, 2).unwrap() - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn estimator_at_one_is_success_rate() {
        for n in 1..=10 {
            for c in 0..=n {
                let est = estimate_at_k(n, c, 1).unwrap();
                assert_eq!(est, c as f64 / n as f64);
            }
        }
    }

    #[test]
    fn estimator_monotone_in_k_and_c() {
        let n = 10;
        for c in 0..=n {
            for k in 1..n {
                let a = estimate_at_k(n, c, k).unwrap();
                let b = estimate_at_k(n, c, k + 1).unwrap();
                assert!(b >= a - 1e-15);
            }
        }
        for k in 1..=n {
            for c in 0..n {
                let a = estimate_at_k(n, c, k).unwrap();
                let b = estimate_at_k(n, c + 1, k).unwrap();
                assert!(b >= a - 1e-15);
            }
        }
    }

    #[test]
    fn estimator_domain_errors() {
        assert!(estimate_at_k(4, 5, 1).is_err());
        assert!(estimate_at_k(4, 2, 0).is_err());
        assert!(estimate_at_k(4, 2, 5).is_err());
    }

    fn task(id: &str) -> ReferenceTask {
        ReferenceTask {
            task_id: id.into(),
            entry_point: "f".into(),
            stub: "def f(x):\n    \"\"\"Stub.\"\"\"\n".into(),
            file_context: String::new(),
            reference_impl: "def f(x):\n    return x\n".into(),
            reference_precondition: "def precondition(x):\n    return True\n".into(),
            test_inputs: vec![],
            mutants: vec![],
        }
    }

    fn verdict(task_id: &str, model: &str, kind: PromptKind, idx: usize, sound: bool) -> Verdict {
        let mut v = Verdict {
            candidate_id: format!("{task_id}::{model}::{kind}::{idx}"),
            task_id: task_id.into(),
            model_id: model.into(),
            prompt_kind: kind,
            soundness: if sound {
                Soundness::Sound
            } else {
                Soundness::UnsoundPrecondition
            },
            soundness_witness: None,
            raw_soundness: None,
            killed_mutants: Default::default(),
            checked_mutants: Default::default(),
            test_set_correct: sound,
            bug_complete: false,
            timings: Default::default(),
        };
        if sound {
            v.killed_mutants.insert("m1".into());
        }
        v.checked_mutants.insert("m1".into());
        v
    }

    #[test]
    fn aggregate_means_over_tasks() {
        // c/n of 10/10, 5/10, 0/10 -> sound@1 = 50.0.
        let tasks = vec![task("t1"), task("t2"), task("t3")];
        let mut verdicts = Vec::new();
        for (tid, c) in [("t1", 10), ("t2", 5), ("t3", 0)] {
            for i in 0..10 {
                verdicts.push(verdict(tid, "m", PromptKind::Nl2Contract, i, i < c));
            }
        }
        let rows = aggregate(&verdicts, &tasks, &[1, 5, 10]).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].sound_at[&1] - 50.0).abs() < 1e-9);
        // sound@n equals the share of tasks with at least one success.
        assert!((rows[0].sound_at[&10] - 100.0 * 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn aggregate_is_permutation_invariant() {
        let tasks = vec![task("t1"), task("t2")];
        let mut verdicts = Vec::new();
        for tid in ["t1", "t2"] {
            for i in 0..4 {
                verdicts.push(verdict(tid, "m", PromptKind::Nl2Contract, i, i % 2 == 0));
            }
        }
        let rows_a = aggregate(&verdicts, &tasks, &[1, 2]).unwrap();
        verdicts.reverse();
        let rows_b = aggregate(&verdicts, &tasks, &[1, 2]).unwrap();
        assert_eq!(rows_a[0].sound_at, rows_b[0].sound_at);
        assert_eq!(rows_a[0].pct_complete, rows_b[0].pct_complete);
    }

    #[test]
    fn aggregate_complete_and_killed_percentages() {
        let tasks = vec![task("t1")];
        let verdicts = vec![
            verdict("t1", "m", PromptKind::Nl2Contract, 0, true),
            verdict("t1", "m", PromptKind::Nl2Contract, 1, false),
        ];
        let rows = aggregate(&verdicts, &tasks, &[1]).unwrap();
        // The one sound verdict killed its whole checked set.
        assert_eq!(rows[0].pct_complete, 100.0);
        assert_eq!(rows[0].tasks_with_complete, 1);
        assert_eq!(rows[0].pct_killed, 100.0);
    }

    #[test]
    fn aggregate_rejects_inconsistent_sample_counts() {
        let tasks = vec![task("t1"), task("t2")];
        let mut verdicts = vec![
            verdict("t1", "m", PromptKind::Nl2Contract, 0, true),
            verdict("t1", "m", PromptKind::Nl2Contract, 1, true),
            verdict("t2", "m", PromptKind::Nl2Contract, 0, true),
        ];
        assert!(matches!(
            aggregate(&verdicts, &tasks, &[1]),
            Err(MetricsError::InconsistentSampleCount { .. })
        ));
        verdicts.pop();
        verdicts.push(verdict("t3", "m", PromptKind::Nl2Contract, 0, true));
        assert!(matches!(
            aggregate(&verdicts, &tasks, &[1]),
            Err(MetricsError::UnknownTask(_))
        ));
    }

    #[test]
    fn alarm_analysis_conventions() {
        use crate::model::InputState;
        assert_eq!(
            alarm_analysis(&[]),
            AlarmStats {
                pct_alarms: 0.0,
                pct_true: 0.0
            }
        );
        let class = |c| ViolationClass {
            input: InputState::new(vec![]),
            classification: c,
        };
        let stats = alarm_analysis(&[
            CandidateViolations {
                candidate_id: "a".into(),
                violations: vec![
                    class(Classification::BugTriggering),
                    class(Classification::FalseAlarm),
                ],
            },
            CandidateViolations {
                candidate_id: "b".into(),
                violations: vec![
                    class(Classification::BugTriggering),
                    class(Classification::FalseAlarm),
                ],
            },
            CandidateViolations {
                candidate_id: "c".into(),
                violations: vec![],
            },
        ]);
        assert!((stats.pct_true - 50.0).abs() < 1e-9);
        assert!((stats.pct_alarms - 100.0 * 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn render_table_and_column_order() {
        let tasks = vec![task("t1")];
        let verdicts = vec![verdict("t1", "gpt-x", PromptKind::Nl2Contract, 0, true)];
        let rows = aggregate(&verdicts, &tasks, &[1]).unwrap();
        let text = render_report(&rows, ReportFormat::TableText).unwrap();
        let header_line = text.lines().next().unwrap();
        let accept_pos = header_line.find("accept@1").unwrap();
        let sound_pos = header_line.find("sound@1").unwrap();
        let complete_pos = header_line.find("pct_complete").unwrap();
        let killed_pos = header_line.find("pct_killed").unwrap();
        assert!(accept_pos < sound_pos && sound_pos < complete_pos && complete_pos < killed_pos);
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn csv_roundtrips_through_a_standard_parser() {
        let tasks = vec![task("t1")];
        let verdicts = vec![
            verdict("t1", "model,with,commas", PromptKind::Nl2Contract, 0, true),
            verdict("t1", "model,with,commas", PromptKind::Nl2Postcond, 0, false),
        ];
        let rows = aggregate(&verdicts, &tasks, &[1]).unwrap();
        let text = render_report(&rows, ReportFormat::Csv).unwrap();
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let records: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        assert_eq!(records.len(), 2);
        assert_eq!(&records[0][0], "model,with,commas");
        assert_eq!(&records[0][1], "nl2contract");
    }

    #[test]
    fn json_report_is_versioned() {
        let tasks = vec![task("t1")];
        let verdicts = vec![verdict("t1", "m", PromptKind::Nl2Contract, 0, true)];
        let rows = aggregate(&verdicts, &tasks, &[1]).unwrap();
        let text = render_report(&rows, ReportFormat::Json).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["schema_version"], 1);
        assert_eq!(doc["rows"][0]["group"]["model_id"], "m");
    }

    #[test]
    fn percent_rounding_is_half_up() {
        assert_eq!(fmt_pct(81.0975), "81.1");
        assert_eq!(fmt_pct(81.05), "81.1");
        assert_eq!(fmt_pct(81.0499), "81.0");
        assert_eq!(fmt_pct(0.0), "0.0");
    }
}
