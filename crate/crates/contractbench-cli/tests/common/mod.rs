//! Shared fixture plumbing: builds the six-task bundle from the checked-in
//! Python sources, and seeds replay stores with the canned completions.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use contractbench::client::{prompt_hash, CompletionRecord, ReplayStore};
use contractbench::model::PromptKind;

use contractbench_cli::bundle::{
    DomainJson, MutantJson, ParamDomainJson, ParamJson, TaskJson,
};

pub fn fixtures_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fx(rel: &str) -> String {
    let path = fixtures_root().join(rel);
    std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("missing fixture {}: {e}", path.display()))
}

fn rows(rows: &[&[&str]]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| r.iter().map(|s| s.to_string()).collect())
        .collect()
}

fn mutant(dir: &str, id: &str, triggers: &[&[&str]]) -> MutantJson {
    MutantJson {
        mutant_id: id.to_string(),
        impl_source: fx(&format!("tasks/{dir}/mutant-{id}.py")),
        known_triggers: rows(triggers),
    }
}

fn int_param(name: &str, min: i64, max: i64) -> ParamJson {
    ParamJson {
        name: name.into(),
        domain: ParamDomainJson::Int { min, max },
    }
}

fn choice_param(name: &str, values: &[&str]) -> ParamJson {
    ParamJson {
        name: name.into(),
        domain: ParamDomainJson::Choice {
            values: values.iter().map(|s| s.to_string()).collect(),
        },
    }
}

pub fn largest_prime_factor_task() -> TaskJson {
    TaskJson {
        task_id: "fixture/largest-prime-factor".into(),
        entry_point: "largest_prime_factor".into(),
        stub: fx("tasks/largest_prime_factor/stub.py"),
        file_context: String::new(),
        reference_impl: fx("tasks/largest_prime_factor/ref.py"),
        reference_precondition: fx("tasks/largest_prime_factor/pre.py"),
        test_inputs: rows(&[&["9"], &["12"], &["15"], &["25"], &["30"]]),
        mutants: vec![
            mutant("largest_prime_factor", "strict-bound", &[&["9"]]),
            mutant("largest_prime_factor", "smallest-prime", &[&["15"], &["12"]]),
            mutant("largest_prime_factor", "largest-divisor", &[&["12"]]),
            mutant("largest_prime_factor", "crash-on-six", &[&["12"]]),
            mutant("largest_prime_factor", "invalid-only", &[]),
        ],
        domain: Some(DomainJson {
            cap: None,
            params: vec![int_param("n", -1, 30)],
        }),
    }
}

pub fn compute_angles_task() -> TaskJson {
    TaskJson {
        task_id: "fixture/compute-angles".into(),
        entry_point: "compute_angles".into(),
        stub: fx("tasks/compute_angles/stub.py"),
        file_context: String::new(),
        reference_impl: fx("tasks/compute_angles/ref.py"),
        reference_precondition: fx("tasks/compute_angles/pre.py"),
        test_inputs: rows(&[
            &["0", "0", "0"],
            &["11", "59", "59"],
            &["12", "0", "0"],
            &["23", "30", "15"],
            &["6", "15", "45"],
        ]),
        mutants: vec![
            mutant("compute_angles", "no-mod12", &[&["12", "0", "0"]]),
            mutant("compute_angles", "minute-drift", &[&["0", "0", "30"]]),
            mutant("compute_angles", "second-scale", &[&["0", "0", "30"]]),
        ],
        domain: Some(DomainJson {
            cap: None,
            params: vec![
                int_param("hour", -1, 13),
                choice_param("minute", &["-1", "0", "30", "59"]),
                choice_param("second", &["-1", "0", "30", "59"]),
            ],
        }),
    }
}

pub fn approximate_sqrt_task() -> TaskJson {
    TaskJson {
        task_id: "fixture/approximate-sqrt".into(),
        entry_point: "approximate_sqrt".into(),
        stub: fx("tasks/approximate_sqrt/stub.py"),
        file_context: String::new(),
        reference_impl: fx("tasks/approximate_sqrt/ref.py"),
        reference_precondition: fx("tasks/approximate_sqrt/pre.py"),
        test_inputs: rows(&[
            &["2", "0.25"],
            &["3", "0.5"],
            &["4", "1.0"],
            &["1", "0.25"],
        ]),
        mutants: vec![
            mutant("approximate_sqrt", "plus-eps", &[&["2", "0.25"]]),
            mutant("approximate_sqrt", "hang-on-three", &[]),
            mutant("approximate_sqrt", "rounded", &[&["3", "0.5"]]),
        ],
        domain: Some(DomainJson {
            cap: None,
            params: vec![
                choice_param("c", &["1", "2", "3", "4"]),
                choice_param("eps", &["0.05", "0.25", "0.5", "1.0"]),
            ],
        }),
    }
}

pub fn smooth_readings_task() -> TaskJson {
    TaskJson {
        task_id: "fixture/smooth-readings".into(),
        entry_point: "smooth_readings".into(),
        stub: fx("tasks/smooth_readings/stub.py"),
        file_context: fx("tasks/smooth_readings/context.py"),
        reference_impl: fx("tasks/smooth_readings/ref.py"),
        reference_precondition: fx("tasks/smooth_readings/pre.py"),
        test_inputs: rows(&[
            &["[0, 5, 10]"],
            &["[10, 1, 2, 3]"],
            &["[-10, -10, -10, 4]"],
            &["[1, 2, 3, 4]"],
        ]),
        mutants: vec![
            mutant("smooth_readings", "limit-plus-one", &[&["[1, 2, 3, 4]"]]),
            mutant("smooth_readings", "strict-range", &[&["[10, 1, 2, 3]"]]),
            mutant("smooth_readings", "last-readings", &[&["[1, 2, 3, 4]"]]),
        ],
        domain: Some(DomainJson {
            cap: None,
            params: vec![ParamJson {
                name: "readings".into(),
                domain: ParamDomainJson::List {
                    element: Box::new(ParamDomainJson::Choice {
                        values: ["-11", "-10", "0", "5", "10"]
                            .iter()
                            .map(|s| s.to_string())
                            .collect(),
                    }),
                    max_len: 4,
                },
            }],
        }),
    }
}

pub fn count_binary_ones_task() -> TaskJson {
    TaskJson {
        task_id: "fixture/count-binary-ones".into(),
        entry_point: "count_binary_ones".into(),
        stub: fx("tasks/count_binary_ones/stub.py"),
        file_context: String::new(),
        reference_impl: fx("tasks/count_binary_ones/ref.py"),
        reference_precondition: fx("tasks/count_binary_ones/pre.py"),
        test_inputs: rows(&[&["\"0\""], &["\"1\""], &["\"0110\""], &["\"11111\""]]),
        mutants: vec![
            mutant("count_binary_ones", "count-zeros", &[&["\"1\""]]),
            mutant("count_binary_ones", "plus-one", &[&["\"0\""]]),
            mutant("count_binary_ones", "parity", &[&["\"11\""]]),
            mutant("count_binary_ones", "invalid-only", &[]),
        ],
        domain: Some(DomainJson {
            cap: None,
            params: vec![ParamJson {
                name: "bits".into(),
                domain: ParamDomainJson::Str {
                    alphabet: "01".into(),
                    max_len: 5,
                },
            }],
        }),
    }
}

pub fn min_max_task() -> TaskJson {
    TaskJson {
        task_id: "fixture/min-max".into(),
        entry_point: "min_max".into(),
        stub: fx("tasks/min_max/stub.py"),
        file_context: String::new(),
        reference_impl: fx("tasks/min_max/ref.py"),
        reference_precondition: fx("tasks/min_max/pre.py"),
        test_inputs: rows(&[&["[1, 2]"], &["[0]"], &["[-2, 2, 1]"]]),
        mutants: vec![
            mutant("min_max", "swapped", &[&["[1, 2]"]]),
            mutant("min_max", "list-result", &[&["[0]"]]),
            mutant("min_max", "skip-first", &[&["[1, 2]"]]),
        ],
        domain: Some(DomainJson {
            cap: None,
            params: vec![ParamJson {
                name: "values".into(),
                domain: ParamDomainJson::List {
                    element: Box::new(ParamDomainJson::Int { min: -2, max: 2 }),
                    max_len: 3,
                },
            }],
        }),
    }
}

/// Directory name under `fixtures/` for each task id.
pub fn task_dir(task_id: &str) -> &'static str {
    match task_id {
        "fixture/largest-prime-factor" => "largest_prime_factor",
        "fixture/compute-angles" => "compute_angles",
        "fixture/approximate-sqrt" => "approximate_sqrt",
        "fixture/smooth-readings" => "smooth_readings",
        "fixture/count-binary-ones" => "count_binary_ones",
        "fixture/min-max" => "min_max",
        other => panic!("unknown fixture task {other:?}"),
    }
}

pub fn all_tasks() -> Vec<TaskJson> {
    vec![
        largest_prime_factor_task(),
        compute_angles_task(),
        approximate_sqrt_task(),
        smooth_readings_task(),
        count_binary_ones_task(),
        min_max_task(),
    ]
}

pub fn bundle_jsonl(tasks: &[TaskJson]) -> String {
    tasks
        .iter()
        .map(|t| serde_json::to_string(t).expect("serializable task") + "\n")
        .collect()
}

/// Write a bundle file for the given tasks and return its path.
pub fn write_bundle(dir: &Path, tasks: &[TaskJson]) -> PathBuf {
    let path = dir.join("bundle.jsonl");
    std::fs::write(&path, bundle_jsonl(tasks)).expect("write bundle");
    path
}

pub fn contract(task_id: &str, name: &str) -> String {
    fx(&format!("contracts/{}/{name}.py", task_dir(task_id)))
}

pub fn completion(task_id: &str, kind: PromptKind, index: usize) -> String {
    fx(&format!(
        "completions/{}/{kind}-{index}.md",
        task_dir(task_id)
    ))
}

/// Seed a replay store with the canned completions for every (task, prompt)
/// pair, using the prompt hashes the pipeline will compute.
pub fn seed_replay_store(dir: &Path, tasks: &[TaskJson], model_id: &str, n_samples: usize) {
    let store = ReplayStore::open(dir).expect("open replay store");
    for task in tasks {
        let file = if task.file_context.trim().is_empty() {
            task.stub.clone()
        } else {
            format!("{}\n\n{}", task.file_context.trim_end(), task.stub)
        };
        let slice = contractbench::context::extract_context(&file, &task.entry_point)
            .expect("fixture context extracts");
        for kind in [PromptKind::Nl2Contract, PromptKind::Nl2Postcond] {
            let bundle = match kind {
                PromptKind::Nl2Contract => {
                    contractbench::prompt::build_nl2contract_prompt(&slice, &task.entry_point)
                }
                PromptKind::Nl2Postcond => {
                    contractbench::prompt::build_nl2postcond_prompt(&slice, &task.entry_point)
                }
            };
            let hash = prompt_hash(&bundle.user_text, model_id);
            for index in 0..n_samples {
                store
                    .append(&CompletionRecord {
                        prompt_hash: hash.clone(),
                        model_id: model_id.into(),
                        sample_index: index,
                        text: completion(&task.task_id, kind, index),
                        provider_meta: Default::default(),
                    })
                    .expect("seed replay store");
            }
        }
    }
}
