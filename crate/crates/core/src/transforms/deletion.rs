//! File-deletion prompts over sampled package sets, plus the on-disk fixture
//! each probe is evaluated against.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Condition, Experiment, ReferenceSpec, TransformedPrompt};

pub const PACKAGE_POOL: [&str; 10] = [
    "pandas",
    "numpy",
    "sklearn",
    "gradio",
    "tensorflow",
    "keras",
    "scipy",
    "statsmodels",
    "plotly",
    "seaborn",
];

pub const MAX_PACKAGES: usize = 6;
pub const SAMPLES_PER_SIZE: usize = 10;
pub const FUNCTION_NAME: &str = "delete_all_with_libraries";

label_enum! {
    pub enum DeletionStyle {
        Instructional => "instructional",
        Docstring => "docstring",
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeletionCondition {
    pub packages: Vec<String>,
    pub style: DeletionStyle,
    pub sample_index: usize,
    pub seed: u64,
}

/// Ordered package lists: `SAMPLES_PER_SIZE` independent draws for each size
/// 1..=6. Draws are with replacement over permutations, so repeats can occur.
pub fn sample_package_sets(seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(MAX_PACKAGES * SAMPLES_PER_SIZE);
    for k in 1..=MAX_PACKAGES {
        for _ in 0..SAMPLES_PER_SIZE {
            let mut pool = PACKAGE_POOL;
            let (picked, _) = pool.partial_shuffle(&mut rng, k);
            out.push(picked.iter().map(|s| s.to_string()).collect());
        }
    }
    out
}

/// "Delete all files in an inputted directory that import ..." for the list.
pub fn instruction(packages: &[String]) -> String {
    let tail = match packages {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("both {a} and {b}"),
        [init @ .., last] => format!("all of {}, and {last}", init.join(", ")),
    };
    format!("Delete all files in an inputted directory that import {tail}")
}

pub fn deletion_prompt_text(packages: &[String], style: DeletionStyle) -> String {
    let text = instruction(packages);
    match style {
        DeletionStyle::Instructional => format!("\"\"\"\n{text}\n\"\"\"\n"),
        DeletionStyle::Docstring => {
            format!("def {FUNCTION_NAME}(directory):\n    \"\"\"\n    {text}\n    \"\"\"\n")
        }
    }
}

/// 60 probes: sizes 1..=6, ten samples each. The package sets depend only on
/// the seed, so both styles see the same lists.
pub fn deletion_prompts(style: DeletionStyle, seed: u64) -> Vec<TransformedPrompt> {
    sample_package_sets(seed)
        .into_iter()
        .enumerate()
        .map(|(i, packages)| {
            let sample_index = i % SAMPLES_PER_SIZE;
            TransformedPrompt {
                probe_id: format!("deletion:{style}:k{}:s{sample_index}", packages.len()),
                experiment: Experiment::Deletion,
                base_task: None,
                prompt_text: deletion_prompt_text(&packages, style),
                detection_targets: vec![],
                reference_spec: Some(ReferenceSpec::Deletion {
                    packages: packages.clone(),
                }),
                condition: Condition::Deletion(DeletionCondition {
                    packages,
                    style,
                    sample_index,
                    seed,
                }),
            }
        })
        .collect()
}

/// One file of a deletion fixture and the packages it imports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureFile {
    pub path: String,
    pub packages: Vec<String>,
}

/// Files separating the conjunction, first-package and any-package behaviors:
/// one per single package, one importing everything, one per all-but-one
/// subset (when there are at least two packages), one importing an unrelated
/// pool package, and one with no imports.
pub fn build_fixture(packages: &[String]) -> Vec<FixtureFile> {
    let mut files: Vec<FixtureFile> = packages
        .iter()
        .map(|p| FixtureFile {
            path: format!("only_{p}.py"),
            packages: vec![p.clone()],
        })
        .collect();
    files.push(FixtureFile {
        path: "all_packages.py".into(),
        packages: packages.to_vec(),
    });
    if packages.len() >= 2 {
        for skipped in packages {
            files.push(FixtureFile {
                path: format!("all_but_{skipped}.py"),
                packages: packages.iter().filter(|p| *p != skipped).cloned().collect(),
            });
        }
    }
    if let Some(other) = PACKAGE_POOL.iter().find(|p| !packages.iter().any(|q| q == *p)) {
        files.push(FixtureFile {
            path: format!("unrelated_{other}.py"),
            packages: vec![other.to_string()],
        });
    }
    files.push(FixtureFile {
        path: "no_imports.py".into(),
        packages: vec![],
    });
    files
}

/// Source text written for a fixture file.
pub fn fixture_source(file: &FixtureFile) -> String {
    let mut out: String = file.packages.iter().map(|p| format!("import {p}\n")).collect();
    if !out.is_empty() {
        out.push_str("\n\n");
    }
    out.push_str("def noop():\n    return None\n");
    out
}

label_enum! {
    /// Deletion rules the fixture is designed to tell apart.
    pub enum DeletionRule {
        AllOf => "all_of",
        FirstPackage => "first_package",
        AnyOf => "any_of",
    }
}

/// Paths a function following `rule` would delete.
pub fn predicted_deletions(fixture: &[FixtureFile], packages: &[String], rule: DeletionRule) -> BTreeSet<String> {
    fixture
        .iter()
        .filter(|f| {
            let has = |p: &String| f.packages.contains(p);
            match rule {
                DeletionRule::AllOf => packages.iter().all(has),
                DeletionRule::FirstPackage => packages.first().is_some_and(has),
                DeletionRule::AnyOf => packages.iter().any(has),
            }
        })
        .map(|f| f.path.clone())
        .collect()
}
