mod common;

use bias_probe::corpus::{filter_by_solution_length, parse_signature, strip_annotations, CodeProblem};
use bias_probe::transforms::{read_manifest, write_manifest};
use bias_probe::cli::{generate_experiment, GenerateSettings};
use bias_probe::transforms::Experiment;
use proptest::prelude::*;

fn problem_with_lines(i: usize, n: usize) -> CodeProblem {
    CodeProblem {
        task_id: format!("P/{i}"),
        prompt: format!("def f{i}(x):\n"),
        entry_point: format!("f{i}"),
        canonical_solution: (0..n).map(|k| format!("    x{k} = {k}\n")).collect::<String>() + "\n\n",
        test: String::new(),
    }
}

#[test]
fn fixture_filter_sets_nest() {
    let problems = common::fixture_problems();
    for n in 0..9 {
        let wider: Vec<String> = filter_by_solution_length(&problems, n).into_iter().map(|p| p.task_id).collect();
        let narrower = filter_by_solution_length(&problems, n + 1);
        assert!(narrower.iter().all(|p| wider.contains(&p.task_id)));
    }
}

#[test]
fn manifests_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let problems = common::fixture_problems();
    let settings = GenerateSettings {
        seed: 5,
        ..GenerateSettings::default()
    };
    for &e in Experiment::ALL {
        let probes = generate_experiment(e, &problems, &settings).unwrap();
        let path = dir.path().join(format!("{e}.jsonl"));
        write_manifest(&path, &probes).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), probes, "{e}");
    }
}

fn annotation() -> impl Strategy<Value = Option<String>> {
    prop_oneof![
        Just(None),
        Just(Some("int".to_string())),
        Just(Some("List[int]".to_string())),
        Just(Some("Dict[str, Tuple[int, ...]]".to_string())),
        Just(Some("'Node'".to_string())),
    ]
}

/// A parameter as (name, annotation-and-default tail).
fn param() -> impl Strategy<Value = (String, String)> {
    ("[a-z][a-z0-9_]{0,6}", annotation(), prop::option::of(prop_oneof![
        Just("0".to_string()),
        Just("None".to_string()),
        Just("(1, 2)".to_string()),
        Just("'a,b'".to_string()),
    ]))
        .prop_map(|(name, ann, default)| {
            let mut tail = String::new();
            if let Some(a) = ann {
                tail += &format!(": {a}");
            }
            if let Some(d) = default {
                tail += &format!(" = {d}");
            }
            (name, tail)
        })
}

proptest! {
    #[test]
    fn filter_sets_nest(lengths in prop::collection::vec(0usize..12, 0..40), n in 0usize..10) {
        let problems: Vec<_> = lengths.iter().enumerate().map(|(i, &l)| problem_with_lines(i, l)).collect();
        let wide = filter_by_solution_length(&problems, n);
        let narrow = filter_by_solution_length(&problems, n + 1);
        prop_assert!(narrow.len() <= wide.len());
        prop_assert!(narrow.iter().all(|p| wide.contains(p)));
        prop_assert_eq!(wide.len(), lengths.iter().filter(|&&l| l > n).count());
    }

    #[test]
    fn stripping_is_idempotent(
        params in prop::collection::vec(param(), 0..5),
        ret in annotation(),
        split in any::<bool>(),
    ) {
        let sep = if split { ",\n    " } else { ", " };
        // Suffix each name with its index so names are unique, as Python requires.
        let params: Vec<String> = params
            .iter()
            .enumerate()
            .map(|(i, (name, tail))| format!("{name}_{i}{tail}"))
            .collect();
        let mut header = format!("def target({})", params.join(sep));
        if let Some(r) = ret {
            header += &format!(" -> {r}");
        }
        header += ":\n    pass\n";
        let sig = parse_signature(&header).unwrap();
        let once = strip_annotations(&sig);
        let twice = strip_annotations(&parse_signature(&format!("{once}\n")).unwrap());
        prop_assert_eq!(&once, &twice);
        prop_assert!(!once.contains("->"));
        let reparsed = parse_signature(&format!("{once}\n")).unwrap();
        prop_assert_eq!(reparsed.param_names(), sig.param_names());
    }
}
