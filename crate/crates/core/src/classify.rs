//! Failure-signature detectors and behavioral categories.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::CompletionRecord;
use crate::corpus::CodeProblem;
use crate::sandbox::{self, JobStatus, ProbeOutput, SandboxClient, SandboxError, SandboxJob, SandboxResult};
use crate::transforms::anchoring::target_entry_point;
use crate::transforms::deletion::{build_fixture, predicted_deletions, DeletionRule};
use crate::transforms::gpt3::{AnchorRole, OptionLabel};
use crate::transforms::{AnchorKind, Condition, Experiment, Formula, ReferenceSpec, TransformedPrompt};

// ---------------------------------------------------------------- detectors

/// True iff some line of `completion`, stripped, equals the stripped target.
pub fn detect_line(completion: &str, target: &str) -> bool {
    let target = target.trim();
    completion.lines().any(|l| l.trim() == target)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AnchorFragments {
    pub for_var: bool,
    pub print_var: bool,
    pub returns_tmp: bool,
}

pub fn detect_anchor_fragments(completion: &str) -> AnchorFragments {
    AnchorFragments {
        for_var: completion.lines().any(|l| l.trim().starts_with("for var in")),
        print_var: detect_line(completion, "print(var)"),
        returns_tmp: detect_line(completion, "return tmp"),
    }
}

fn normalize_block(text: &str) -> Vec<&str> {
    let mut lines: Vec<&str> = text.lines().map(str::trim_end).collect();
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines
}

/// True iff the completion is exactly the anchor continuation, ignoring
/// trailing whitespace on each line and trailing blank lines.
pub fn detect_exact_copy(completion: &str, continuation: &str) -> bool {
    let got = normalize_block(completion);
    !got.is_empty() && got == normalize_block(continuation)
}

// --------------------------------------------------------------- arithmetic

pub fn values_match(a: f64, b: f64) -> bool {
    let tol = 1e-6f64.max(1e-9 * a.abs().max(b.abs()));
    (a - b).abs() <= tol
}

/// Inputs on which two references give different values.
pub fn distinguishing_inputs(expected: Formula, alternative: Formula, inputs: &[[i64; 2]]) -> usize {
    inputs
        .iter()
        .filter(|&&[x, y]| !values_match(expected.eval(x, y), alternative.eval(x, y)))
        .count()
}

/// Minimum number of distinguishing inputs for a two-way verdict.
pub const MIN_DISTINGUISHING: usize = 3;

label_enum! {
    pub enum MathEqCategory {
        Correct => "correct",
        SwappedOrder => "swapped_order",
        Other => "other",
    }
}

label_enum! {
    pub enum AttributeCategory {
        Correct => "correct",
        MatchesFunctionName => "matches_function_name",
        Other => "other",
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ClassifyError {
    #[error("reference formulas differ on only {0} probe inputs")]
    Indistinguishable(usize),
    #[error("no classification rule for probe {0}")]
    Unsupported(String),
    #[error("probe {probe}: task {task} not in corpus")]
    UnknownTask { probe: String, task: String },
    #[error("no completion record for probes: {0}")]
    MissingRecords(String),
    #[error("code probes need a sandbox runner")]
    NoSandbox,
    #[error("sandbox: {0}")]
    Sandbox(String),
}

impl From<SandboxError> for ClassifyError {
    fn from(e: SandboxError) -> Self {
        ClassifyError::Sandbox(e.to_string())
    }
}

/// Which reference the outputs follow on every input: `Some(true)` for the
/// expected one, `Some(false)` for the alternative, `None` for neither.
/// References that agree on every input make the alternative unobservable,
/// so only `Some(true)` or `None` can result.
fn match_reference(
    outputs: &[ProbeOutput],
    expected: Formula,
    alternative: Formula,
    inputs: &[[i64; 2]],
) -> Result<Option<bool>, ClassifyError> {
    let differing = distinguishing_inputs(expected, alternative, inputs);
    if (1..MIN_DISTINGUISHING).contains(&differing) {
        return Err(ClassifyError::Indistinguishable(differing));
    }
    if outputs.len() != inputs.len() {
        return Ok(None);
    }
    let follows = |f: Formula| {
        outputs.iter().zip(inputs).all(|(o, &[x, y])| matches!(o, ProbeOutput::Value(v) if values_match(*v, f.eval(x, y))))
    };
    Ok(if follows(expected) {
        Some(true)
    } else if differing > 0 && follows(alternative) {
        Some(false)
    } else {
        None
    })
}

pub fn classify_matheq(
    outputs: &[ProbeOutput],
    expected: Formula,
    swapped: Formula,
    inputs: &[[i64; 2]],
) -> Result<MathEqCategory, ClassifyError> {
    Ok(match match_reference(outputs, expected, swapped, inputs)? {
        Some(true) => MathEqCategory::Correct,
        Some(false) => MathEqCategory::SwappedOrder,
        None => MathEqCategory::Other,
    })
}

pub fn classify_attribute(
    outputs: &[ProbeOutput],
    expected: Formula,
    name_implied: Formula,
    inputs: &[[i64; 2]],
) -> Result<AttributeCategory, ClassifyError> {
    Ok(match match_reference(outputs, expected, name_implied, inputs)? {
        Some(true) => AttributeCategory::Correct,
        Some(false) => AttributeCategory::MatchesFunctionName,
        None => AttributeCategory::Other,
    })
}

// ----------------------------------------------------------------- deletion

label_enum! {
    pub enum DeletionCategory {
        Correct => "correct",
        FirstPackageOnly => "first_package_only",
        AnyPackage => "any_package",
        NoAction => "no_action",
        OtherError => "other_error",
    }
}

/// Compares the observed deletions with each rule's prediction. Rules are
/// checked in the order correct, first-only, any, so coinciding patterns
/// (single-package sets) count as correct.
pub fn classify_deletion(result: &SandboxResult, packages: &[String]) -> DeletionCategory {
    if result.status != JobStatus::Passed {
        return DeletionCategory::OtherError;
    }
    let fixture = build_fixture(packages);
    let deleted = result.deleted();
    for (rule, category) in [
        (DeletionRule::AllOf, DeletionCategory::Correct),
        (DeletionRule::FirstPackage, DeletionCategory::FirstPackageOnly),
        (DeletionRule::AnyOf, DeletionCategory::AnyPackage),
    ] {
        if deleted == predicted_deletions(&fixture, packages, rule) {
            return category;
        }
    }
    if deleted.is_empty() {
        DeletionCategory::NoAction
    } else {
        DeletionCategory::OtherError
    }
}

// --------------------------------------------------------------- text probes

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericAnswer {
    /// `None` marks gibberish.
    pub value: Option<f64>,
    pub raw: String,
}

impl NumericAnswer {
    pub fn is_gibberish(&self) -> bool {
        self.value.is_none()
    }
}

/// First number on the first line of the reply. Thousands separators are
/// dropped; currency and approximation prefixes are skipped naturally since
/// only the digits are read.
pub fn parse_numeric_answer(text: &str) -> NumericAnswer {
    let first_line = text.trim_start().lines().next().unwrap_or_default();
    NumericAnswer {
        value: first_number(first_line),
        raw: text.to_string(),
    }
}

fn first_number(line: &str) -> Option<f64> {
    let bytes = line.as_bytes();
    let start = bytes.iter().position(u8::is_ascii_digit)?;
    let negative = start > 0
        && bytes[start - 1] == b'-'
        && (start == 1 || !bytes[start - 2].is_ascii_alphanumeric());
    let mut digits = String::new();
    let mut i = start;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_digit() {
            digits.push(b as char);
            i += 1;
        } else if b == b','
            && bytes.len() >= i + 4
            && bytes[i + 1..i + 4].iter().all(u8::is_ascii_digit)
            && bytes.get(i + 4).is_none_or(|c| !c.is_ascii_digit())
        {
            i += 1;
        } else {
            break;
        }
    }
    if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
        digits.push('.');
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            digits.push(bytes[i] as char);
            i += 1;
        }
    }
    let v: f64 = digits.parse().ok()?;
    Some(if negative { -v } else { v })
}

label_enum! {
    pub enum AnchoringShift {
        NoChange => "no_change",
        TowardAnchor => "toward_anchor",
        AwayFromAnchor => "away_from_anchor",
        Gibberish => "gibberish",
    }
}

pub fn categorize_anchoring(baseline: &NumericAnswer, anchored: &NumericAnswer, anchor: f64) -> AnchoringShift {
    let (Some(b), Some(a)) = (baseline.value, anchored.value) else {
        return AnchoringShift::Gibberish;
    };
    if a == b {
        AnchoringShift::NoChange
    } else if (a - anchor).abs() < (b - anchor).abs() {
        AnchoringShift::TowardAnchor
    } else {
        AnchoringShift::AwayFromAnchor
    }
}

label_enum! {
    pub enum OptionChoice {
        A => "A",
        B => "B",
        Gibberish => "gibberish",
    }
}

/// First standalone `A` or `B` token.
pub fn parse_option_choice(text: &str) -> OptionChoice {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .find_map(|tok| match tok {
            "A" => Some(OptionChoice::A),
            "B" => Some(OptionChoice::B),
            _ => None,
        })
        .unwrap_or(OptionChoice::Gibberish)
}

// ---------------------------------------------------------- classification

label_enum! {
    pub enum FunctionalCategory {
        Passed => "passed",
        Failed => "failed",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub probe_id: String,
    pub experiment: Experiment,
    /// Backend that produced the completion.
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional_pass: Option<bool>,
    pub flags: BTreeMap<String, bool>,
    pub category: String,
    /// Parsed numeric answer, for text anchoring probes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
}

impl Classification {
    fn new(probe: &TransformedPrompt, backend: &str, category: &str) -> Self {
        Self {
            probe_id: probe.probe_id.clone(),
            experiment: probe.experiment,
            backend: backend.to_string(),
            functional_pass: None,
            flags: BTreeMap::new(),
            category: category.to_string(),
            value: None,
            notes: String::new(),
        }
    }

    pub fn flag(&self, name: &str) -> bool {
        self.flags.get(name).copied().unwrap_or(false)
    }

    pub fn passed(&self) -> bool {
        self.functional_pass == Some(true)
    }
}

fn problem_for<'a>(
    probe: &TransformedPrompt,
    problems: &'a HashMap<&str, &CodeProblem>,
) -> Result<&'a CodeProblem, ClassifyError> {
    let task = probe.base_task.as_deref().unwrap_or_default();
    problems.get(task).copied().ok_or_else(|| ClassifyError::UnknownTask {
        probe: probe.probe_id.clone(),
        task: task.to_string(),
    })
}

/// Sandbox job needed to classify `probe`, if any.
fn job_for(
    probe: &TransformedPrompt,
    completion: &str,
    problems: &HashMap<&str, &CodeProblem>,
) -> Result<Option<SandboxJob>, ClassifyError> {
    let id = &probe.probe_id;
    Ok(match (&probe.condition, &probe.reference_spec) {
        (Condition::Framing(_) | Condition::FramingOriginal | Condition::AnchoringBaseline { .. }, _) => {
            let p = problem_for(probe, problems)?;
            Some(sandbox::functional_job(id, &probe.prompt_text, completion, &p.test, &p.entry_point))
        }
        (Condition::Anchoring(c), _) => {
            let p = problem_for(probe, problems)?;
            Some(sandbox::functional_job(id, &probe.prompt_text, completion, &p.test, &target_entry_point(p, c)))
        }
        (Condition::MathEq(_) | Condition::Attribute(_), Some(ReferenceSpec::Arithmetic { inputs, .. })) => {
            sandbox::probe_job(id, &probe.prompt_text, completion, inputs)
        }
        (Condition::Deletion(_), Some(ReferenceSpec::Deletion { packages })) => {
            sandbox::deletion_job(id, &probe.prompt_text, completion, packages)
        }
        _ => None,
    })
}

fn no_function_result(probe_id: &str) -> SandboxResult {
    SandboxResult {
        job_id: probe_id.to_string(),
        status: JobStatus::Error,
        detail: serde_json::json!({ "error_class": "no_function", "error": "no function definition in prompt or completion" }),
    }
}

fn classify_one(
    probe: &TransformedPrompt,
    record: &CompletionRecord,
    result: Option<&SandboxResult>,
    baseline: Option<&NumericAnswer>,
) -> Result<Classification, ClassifyError> {
    let text = &record.completion_text;
    let mut c = Classification::new(probe, &record.backend_id, "");
    if let Some(err) = record.error {
        c.notes = format!("backend error: {err}");
    }
    let fallback;
    let result = match result {
        Some(r) => r,
        None => {
            fallback = no_function_result(&probe.probe_id);
            &fallback
        }
    };
    let functional = |c: &mut Classification| {
        let pass = result.status == JobStatus::Passed;
        c.functional_pass = Some(pass);
        c.category = if pass { FunctionalCategory::Passed } else { FunctionalCategory::Failed }.to_string();
        if !pass && c.notes.is_empty() {
            c.notes = format!("sandbox {}: {}", result.status, result.error_text().unwrap_or(""));
        }
    };
    match &probe.condition {
        Condition::Framing(_) | Condition::FramingOriginal => {
            functional(&mut c);
            for t in &probe.detection_targets {
                c.flags.insert(t.name.clone(), detect_line(text, &t.text));
            }
        }
        Condition::AnchoringBaseline { .. } => functional(&mut c),
        Condition::Anchoring(cond) => {
            functional(&mut c);
            let f = detect_anchor_fragments(text);
            match cond.anchor_kind {
                AnchorKind::PrintVar => {
                    c.flags.insert("for_var".into(), f.for_var);
                    c.flags.insert("print_var".into(), f.print_var);
                }
                AnchorKind::AddVar => {
                    c.flags.insert("returns_tmp".into(), f.returns_tmp);
                }
            }
            let continuation = probe.target("anchor_continuation").unwrap_or_default();
            c.flags.insert("exact_copy".into(), detect_exact_copy(text, continuation));
        }
        Condition::MathEq(_) | Condition::Attribute(_) => {
            let Some(ReferenceSpec::Arithmetic { expected, alternative, inputs }) = &probe.reference_spec else {
                return Err(ClassifyError::Unsupported(probe.probe_id.clone()));
            };
            let outputs = if result.status == JobStatus::Passed { result.probe_outputs() } else { vec![] };
            c.category = if matches!(probe.condition, Condition::MathEq(_)) {
                classify_matheq(&outputs, *expected, *alternative, inputs)?.to_string()
            } else {
                classify_attribute(&outputs, *expected, *alternative, inputs)?.to_string()
            };
            if let Condition::Attribute(a) = &probe.condition {
                c.flags.insert("conflict".into(), a.is_conflict());
            }
        }
        Condition::Deletion(d) => {
            c.category = classify_deletion(result, &d.packages).to_string();
        }
        Condition::Gpt3Anchoring(g) => {
            let answer = parse_numeric_answer(text);
            c.value = answer.value;
            c.category = match (g.role, g.anchor) {
                (AnchorRole::Baseline, _) | (_, None) => {
                    if answer.is_gibberish() { AnchoringShift::Gibberish.as_str() } else { "baseline" }.to_string()
                }
                (_, Some(anchor)) => {
                    let baseline = baseline.cloned().unwrap_or(NumericAnswer {
                        value: None,
                        raw: String::new(),
                    });
                    let shift = categorize_anchoring(&baseline, &answer, anchor as f64);
                    c.flags.insert("matches_anchor".into(), answer.value == Some(anchor as f64));
                    shift.to_string()
                }
            };
        }
        Condition::Gpt3Framing(s) => {
            let choice = parse_option_choice(text);
            c.category = choice.to_string();
            let risky = matches!(
                (choice, s.risky_label),
                (OptionChoice::A, OptionLabel::A) | (OptionChoice::B, OptionLabel::B)
            );
            c.flags.insert("risky".into(), risky);
        }
    }
    Ok(c)
}

/// Classifies every probe from its completion record, running code through
/// the sandbox where a verdict depends on execution. Records that failed at
/// the backend are classified from an empty completion.
pub fn classify_all(
    probes: &[TransformedPrompt],
    records: &[CompletionRecord],
    problems: &[CodeProblem],
    sandbox: Option<&SandboxClient>,
) -> Result<Vec<Classification>, ClassifyError> {
    let by_id: HashMap<&str, &CompletionRecord> = records.iter().map(|r| (r.probe_id.as_str(), r)).collect();
    let missing: Vec<&str> = probes
        .iter()
        .map(|p| p.probe_id.as_str())
        .filter(|id| !by_id.contains_key(id))
        .collect();
    if !missing.is_empty() {
        return Err(ClassifyError::MissingRecords(missing.join(", ")));
    }
    let problem_map: HashMap<&str, &CodeProblem> = problems.iter().map(|p| (p.task_id.as_str(), p)).collect();

    let mut jobs = Vec::new();
    for p in probes {
        if let Some(job) = job_for(p, &by_id[p.probe_id.as_str()].completion_text, &problem_map)? {
            jobs.push(job);
        }
    }
    let results: HashMap<String, SandboxResult> = if jobs.is_empty() {
        HashMap::new()
    } else {
        let client = sandbox.ok_or(ClassifyError::NoSandbox)?;
        client.run(&jobs)?.into_iter().map(|r| (r.job_id.clone(), r)).collect()
    };

    let mut baselines: HashMap<(u32, usize), NumericAnswer> = HashMap::new();
    for p in probes {
        if let Condition::Gpt3Anchoring(g) = &p.condition {
            if g.role == AnchorRole::Baseline {
                baselines.insert((g.p, g.question), parse_numeric_answer(&by_id[p.probe_id.as_str()].completion_text));
            }
        }
    }

    let mut out: Vec<Classification> = probes
        .iter()
        .map(|p| {
            let baseline = match &p.condition {
                Condition::Gpt3Anchoring(g) => baselines.get(&(g.p, g.question)),
                _ => None,
            };
            classify_one(p, by_id[p.probe_id.as_str()], results.get(&p.probe_id), baseline)
        })
        .collect::<Result<_, _>>()?;
    out.sort_by(|a, b| a.probe_id.cmp(&b.probe_id));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::arithmetic::{attribute_prompts, matheq_prompts};
    use crate::transforms::{BinaryOp, MathOrder, MathStyle, Placement, UnaryOp};
    use proptest::prelude::*;

    #[test]
    fn whole_line_matching() {
        assert!(detect_line("    pass\n", "pass"));
        assert!(!detect_line("    passes = 3\n", "pass"));
        assert!(detect_line("x = 1\n  return tmp\n", "return tmp"));
        assert!(!detect_line("", "pass"));
    }

    #[test]
    fn fragments() {
        let f = detect_anchor_fragments("    for var in [a, b]:\n        print(var)\n    return a\n");
        assert!(f.for_var && f.print_var && !f.returns_tmp);
        assert_eq!(detect_anchor_fragments(""), AnchorFragments::default());
    }

    #[test]
    fn exact_copy_normalization() {
        let cont = "    tmp = str(a)\n    return tmp\n";
        assert!(detect_exact_copy("    tmp = str(a)  \n    return tmp\n\n\n", cont));
        assert!(!detect_exact_copy("    tmp = str(a)\n    return tmp\n    x = 1\n", cont));
        assert!(!detect_exact_copy("", cont));
    }

    #[test]
    fn numeric_answers() {
        assert_eq!(parse_numeric_answer(" 2,300 miles").value, Some(2300.0));
        assert_eq!(parse_numeric_answer("about 1500").value, Some(1500.0));
        assert_eq!(parse_numeric_answer(" $1,234,567.5 total").value, Some(1234567.5));
        assert_eq!(parse_numeric_answer(" ~2.7 million").value, Some(2.7));
        assert_eq!(parse_numeric_answer(" -40 degrees").value, Some(-40.0));
        assert_eq!(parse_numeric_answer(" 1,50 and 2").value, Some(1.0));
        assert!(parse_numeric_answer("I cannot say\n2000").is_gibberish());
        assert!(parse_numeric_answer("").is_gibberish());
    }

    #[test]
    fn anchoring_shift() {
        let n = |v: f64| NumericAnswer {
            value: Some(v),
            raw: String::new(),
        };
        let g = NumericAnswer {
            value: None,
            raw: "?".into(),
        };
        assert_eq!(categorize_anchoring(&n(2300.0), &n(1500.0), 1175.0), AnchoringShift::TowardAnchor);
        assert_eq!(categorize_anchoring(&n(2300.0), &n(2300.0), 1175.0), AnchoringShift::NoChange);
        assert_eq!(categorize_anchoring(&n(2300.0), &n(1175.0), 1175.0), AnchoringShift::TowardAnchor);
        assert_eq!(categorize_anchoring(&n(2300.0), &n(3000.0), 1175.0), AnchoringShift::AwayFromAnchor);
        assert_eq!(categorize_anchoring(&n(2300.0), &g, 1175.0), AnchoringShift::Gibberish);
        assert_eq!(categorize_anchoring(&g, &n(1.0), 1175.0), AnchoringShift::Gibberish);
    }

    #[test]
    fn option_choices() {
        assert_eq!(parse_option_choice(" A"), OptionChoice::A);
        assert_eq!(parse_option_choice(" B: 1/3 probability"), OptionChoice::B);
        assert_eq!(parse_option_choice("neither"), OptionChoice::Gibberish);
        assert_eq!(parse_option_choice("Answer is AB"), OptionChoice::Gibberish);
    }

    fn vals(f: Formula, inputs: &[[i64; 2]]) -> Vec<ProbeOutput> {
        inputs.iter().map(|&[x, y]| ProbeOutput::Value(f.eval(x, y))).collect()
    }

    #[test]
    fn matheq_categories() {
        let expected = Formula::ordered(BinaryOp::Sum, UnaryOp::Square, MathOrder::BinaryFirst);
        let swapped = Formula::ordered(BinaryOp::Sum, UnaryOp::Square, MathOrder::UnaryFirst);
        let inputs = crate::transforms::arithmetic::probe_inputs(BinaryOp::Sum, Some(UnaryOp::Square));
        assert_eq!(classify_matheq(&vals(expected, &inputs), expected, swapped, &inputs), Ok(MathEqCategory::Correct));
        assert_eq!(classify_matheq(&vals(swapped, &inputs), expected, swapped, &inputs), Ok(MathEqCategory::SwappedOrder));
        let mut raising = vals(expected, &inputs);
        raising[3] = ProbeOutput::Error("ZeroDivisionError".into());
        assert_eq!(classify_matheq(&raising, expected, swapped, &inputs), Ok(MathEqCategory::Other));
        assert_eq!(classify_matheq(&[], expected, swapped, &inputs), Ok(MathEqCategory::Other));
        assert!(matches!(
            classify_matheq(&[], expected, swapped, &inputs[..2]),
            Err(ClassifyError::Indistinguishable(2))
        ));
    }

    #[test]
    fn attribute_categories() {
        let inputs = crate::transforms::arithmetic::probe_inputs(BinaryOp::Sum, None);
        let sum = Formula::Plain { binary: BinaryOp::Sum };
        let named = Formula::PlusConstant {
            binary: BinaryOp::Product,
            number: 2,
        };
        let product = Formula::Plain {
            binary: BinaryOp::Product,
        };
        assert_eq!(classify_attribute(&vals(sum, &inputs), sum, named, &inputs), Ok(AttributeCategory::Correct));
        assert_eq!(
            classify_attribute(&vals(named, &inputs), sum, named, &inputs),
            Ok(AttributeCategory::MatchesFunctionName)
        );
        assert_eq!(classify_attribute(&vals(product, &inputs), sum, named, &inputs), Ok(AttributeCategory::Other));
    }

    #[test]
    fn generated_references_are_distinguishable_or_equivalent() {
        let mut probes = Vec::new();
        for &o in MathOrder::ALL {
            for &s in MathStyle::ALL {
                probes.extend(matheq_prompts(o, s));
            }
        }
        for &p in Placement::ALL {
            probes.extend(attribute_prompts(p));
        }
        let mut equivalent = Vec::new();
        for p in &probes {
            let Some(ReferenceSpec::Arithmetic { expected, alternative, inputs }) = &p.reference_spec else {
                panic!()
            };
            let d = distinguishing_inputs(*expected, *alternative, inputs);
            assert!(d == 0 || d >= MIN_DISTINGUISHING, "{}: {d}", p.probe_id);
            if d == 0 {
                equivalent.push(p.probe_id.clone());
            }
        }
        // product with square/cube/square root, sum/difference with quadruple,
        // per (order, style); and each placement's sum_plus_0-style pairs.
        assert_eq!(equivalent.iter().filter(|id| id.starts_with("matheq")).count(), 5 * 4);
        assert!(equivalent
            .iter()
            .filter(|id| id.starts_with("attribute"))
            .all(|id| id.ends_with("_plus_0")));
    }

    proptest! {
        #[test]
        fn detect_line_ignores_indentation(indent in 0usize..12, line in "[a-z()\"! ]{1,20}") {
            let target = line.trim().to_string();
            prop_assume!(!target.is_empty());
            let completion = format!("x = 1\n{}{}\n", " ".repeat(indent), line);
            prop_assert!(detect_line(&completion, &target));
            let reindented = format!("x = 1\n{}\n", line.trim());
            prop_assert_eq!(detect_line(&completion, &target), detect_line(&reindented, &target));
        }

        #[test]
        fn anchoring_category_mirror_symmetry(
            t in -1000i32..1000, b in -1000i32..1000, a in -1000i32..1000, anchor in -1000i32..1000,
        ) {
            let n = |v: i32| NumericAnswer { value: Some(v as f64), raw: String::new() };
            let m = |v: i32| 2 * t - v;
            prop_assert_eq!(
                categorize_anchoring(&n(b), &n(a), anchor as f64),
                categorize_anchoring(&n(m(b)), &n(m(a)), m(anchor) as f64)
            );
        }
    }
}
