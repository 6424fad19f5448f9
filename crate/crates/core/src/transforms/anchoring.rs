//! Anchor functions: the stripped signature, a prefix of the canonical
//! solution and a pair of wrong anchor lines, prepended to the problem.

use super::{ensure_newline, join_functions, Condition, DetectionTarget, Experiment, TransformError, TransformedPrompt};
use crate::corpus::{self, filter_by_solution_length, CodeProblem};

/// Largest prefix length the experiment uses.
pub const MAX_ANCHOR_LINES: usize = 8;

label_enum! {
    pub enum AnchorKind {
        PrintVar => "print_var",
        AddVar => "add_var",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnchoringCondition {
    pub n_lines: usize,
    pub anchor_kind: AnchorKind,
    /// Anchor gets suffix `1`, the target function suffix `2`.
    pub renamed: bool,
}

/// Anchor lines without indentation, one string per line. Nested lines carry
/// their own extra indentation.
pub fn anchor_lines(kind: AnchorKind, params: &[&str]) -> [String; 2] {
    match kind {
        AnchorKind::PrintVar => [
            format!("for var in [{}]:", params.join(", ")),
            "    print(var)".to_string(),
        ],
        AnchorKind::AddVar => {
            let parts: Vec<String> = params.iter().map(|p| format!("str({p})")).collect();
            [format!("tmp = {}", parts.join(" + ")), "return tmp".to_string()]
        }
    }
}

fn check_length(problem: &CodeProblem, n: usize) -> Result<(), TransformError> {
    let have = problem.solution_lines().len();
    if have <= n {
        return Err(TransformError::SolutionTooShort {
            task: problem.task_id.clone(),
            have,
            need: n,
        });
    }
    Ok(())
}

struct AnchorParts {
    function: String,
    /// The anchor lines at body indentation; what follows the shared prefix.
    continuation: String,
    first_line: String,
}

fn anchor_parts(problem: &CodeProblem, cond: &AnchoringCondition) -> Result<AnchorParts, TransformError> {
    check_length(problem, cond.n_lines)?;
    let sig = problem.signature().map_err(|source| TransformError::Parse {
        task: problem.task_id.clone(),
        source,
    })?;
    let params = sig.param_names();
    if params.is_empty() {
        return Err(TransformError::NoParameters(problem.task_id.clone()));
    }
    let mut header = corpus::strip_annotations(&sig);
    if cond.renamed {
        header = header.replacen(&format!("def {}(", sig.name), &format!("def {}1(", sig.name), 1);
    }
    let lines = anchor_lines(cond.anchor_kind, &params);
    let solution = problem.solution_lines();
    let indent = continuation_indent(&solution.lines[cond.n_lines..]);
    let continuation: String = lines.iter().map(|l| format!("{indent}{l}\n")).collect();
    let prefix = solution.prefix(cond.n_lines);
    Ok(AnchorParts {
        function: format!("{header}\n{prefix}{continuation}"),
        continuation,
        first_line: lines[0].clone(),
    })
}

/// Indentation of the first non-blank line in `rest`, so the anchor lines
/// sit where the next canonical line would and a prefix ending in a block
/// opener stays syntactically valid.
fn continuation_indent(rest: &[String]) -> String {
    rest.iter()
        .find(|l| !l.trim().is_empty())
        .map(|l| l[..l.len() - l.trim_start().len()].to_string())
        .filter(|i| !i.is_empty())
        .unwrap_or_else(|| "    ".to_string())
}

pub fn build_anchor_function(problem: &CodeProblem, cond: &AnchoringCondition) -> Result<String, TransformError> {
    anchor_parts(problem, cond).map(|p| p.function)
}

/// Problem prompt with the entry function renamed to `<name>2` inside its
/// signature and docstring.
fn renamed_prompt(problem: &CodeProblem) -> Result<String, TransformError> {
    let parse_err = |source| TransformError::Parse {
        task: problem.task_id.clone(),
        source,
    };
    let sig = problem.signature().map_err(parse_err)?;
    let doc = corpus::docstring_after(&problem.prompt, sig.end()).map_err(parse_err)?;
    let span_end = doc.map_or(sig.end(), |d| d.end);
    let prompt = &problem.prompt;
    let renamed = corpus::replace_identifier(&prompt[sig.offset..span_end], &sig.name, &format!("{}2", sig.name));
    Ok(format!("{}{}{}", &prompt[..sig.offset], renamed, &prompt[span_end..]))
}

/// Name the completed function is called by: suffixed with `2` when renamed.
pub fn target_entry_point(problem: &CodeProblem, cond: &AnchoringCondition) -> String {
    if cond.renamed {
        format!("{}2", problem.entry_point)
    } else {
        problem.entry_point.clone()
    }
}

pub fn anchoring_transform(problem: &CodeProblem, cond: &AnchoringCondition) -> Result<TransformedPrompt, TransformError> {
    let parts = anchor_parts(problem, cond)?;
    let target = if cond.renamed {
        renamed_prompt(problem)?
    } else {
        problem.prompt.clone()
    };
    let prefix = problem.solution_lines().prefix(cond.n_lines);
    let prompt_text = join_functions(&parts.function, &ensure_newline(target)) + &prefix;

    let mut detection_targets = match cond.anchor_kind {
        AnchorKind::PrintVar => vec![
            DetectionTarget::new("for_var", parts.first_line),
            DetectionTarget::new("print_var", "print(var)"),
        ],
        AnchorKind::AddVar => vec![DetectionTarget::new("returns_tmp", "return tmp")],
    };
    detection_targets.push(DetectionTarget::new("anchor_function", parts.function));
    detection_targets.push(DetectionTarget::new("anchor_continuation", parts.continuation));

    Ok(TransformedPrompt {
        probe_id: format!(
            "anchoring:{}{}:n{}:{}",
            cond.anchor_kind,
            if cond.renamed { "-renamed" } else { "" },
            cond.n_lines,
            problem.task_id
        ),
        experiment: Experiment::Anchoring,
        base_task: Some(problem.task_id.clone()),
        condition: Condition::Anchoring(*cond),
        prompt_text,
        detection_targets,
        reference_spec: None,
    })
}

/// Problem prompt plus the first `n_lines` canonical lines, no anchor.
pub fn anchoring_baseline(problem: &CodeProblem, n_lines: usize) -> Result<TransformedPrompt, TransformError> {
    check_length(problem, n_lines)?;
    Ok(TransformedPrompt {
        probe_id: format!("anchoring:baseline:n{}:{}", n_lines, problem.task_id),
        experiment: Experiment::Anchoring,
        base_task: Some(problem.task_id.clone()),
        condition: Condition::AnchoringBaseline { n_lines },
        prompt_text: ensure_newline(problem.prompt.clone()) + &problem.solution_lines().prefix(n_lines),
        detection_targets: vec![],
        reference_spec: None,
    })
}

#[derive(Debug, Clone)]
pub struct AnchoringConfig {
    pub n_lines: Vec<usize>,
    pub kinds: Vec<AnchorKind>,
    pub renamed: Vec<bool>,
}

impl Default for AnchoringConfig {
    fn default() -> Self {
        Self {
            n_lines: (0..=MAX_ANCHOR_LINES).collect(),
            kinds: AnchorKind::ALL.to_vec(),
            renamed: vec![false, true],
        }
    }
}

/// For each `n`, the length-filtered problems get one anchored probe per
/// (kind, renamed) and one shared baseline probe.
pub fn anchoring_prompts(problems: &[CodeProblem], config: &AnchoringConfig) -> Result<Vec<TransformedPrompt>, TransformError> {
    if let Some(&n) = config.n_lines.iter().find(|&&n| n > MAX_ANCHOR_LINES) {
        return Err(TransformError::Config(format!(
            "n_lines {n} outside 0..={MAX_ANCHOR_LINES}"
        )));
    }
    let mut out = Vec::new();
    for &n in &config.n_lines {
        let kept = filter_by_solution_length(problems, n);
        for &kind in &config.kinds {
            for &renamed in &config.renamed {
                let cond = AnchoringCondition {
                    n_lines: n,
                    anchor_kind: kind,
                    renamed,
                };
                for problem in &kept {
                    out.push(anchoring_transform(problem, &cond)?);
                }
            }
        }
        for problem in &kept {
            out.push(anchoring_baseline(problem, n)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem() -> CodeProblem {
        CodeProblem {
            task_id: "T/1".into(),
            prompt: "from typing import List\n\n\ndef below(var1: List[int], var2: int) -> bool:\n    \"\"\" True if all below.\n    >>> below([1], 2)\n    True\n    \"\"\"\n".into(),
            entry_point: "below".into(),
            canonical_solution: "    for e in var1:\n        if e >= var2:\n            return False\n    return True\n".into(),
            test: String::new(),
        }
    }

    fn cond(n: usize, kind: AnchorKind, renamed: bool) -> AnchoringCondition {
        AnchoringCondition {
            n_lines: n,
            anchor_kind: kind,
            renamed,
        }
    }

    #[test]
    fn print_var_anchor_function() {
        let f = build_anchor_function(&problem(), &cond(0, AnchorKind::PrintVar, false)).unwrap();
        assert_eq!(
            f,
            "def below(var1, var2):\n    for var in [var1, var2]:\n        print(var)\n"
        );
    }

    #[test]
    fn add_var_anchor_function_with_prefix() {
        let f = build_anchor_function(&problem(), &cond(2, AnchorKind::AddVar, false)).unwrap();
        assert_eq!(
            f,
            "def below(var1, var2):\n    for e in var1:\n        if e >= var2:\n            tmp = str(var1) + str(var2)\n            return tmp\n"
        );
    }

    #[test]
    fn anchored_prompt_layout() {
        let p = problem();
        let probe = anchoring_transform(&p, &cond(1, AnchorKind::PrintVar, false)).unwrap();
        let anchor = build_anchor_function(&p, &cond(1, AnchorKind::PrintVar, false)).unwrap();
        let expected = format!("{anchor}\n\n{}    for e in var1:\n", p.prompt);
        assert_eq!(probe.prompt_text, expected);
        assert!(probe.prompt_text.contains(&p.prompt));
        assert_eq!(probe.target("for_var"), Some("for var in [var1, var2]:"));
        assert_eq!(probe.target("print_var"), Some("print(var)"));
        assert_eq!(
            probe.target("anchor_continuation"),
            Some("        for var in [var1, var2]:\n            print(var)\n")
        );
    }

    #[test]
    fn renamed_control() {
        let p = problem();
        let probe = anchoring_transform(&p, &cond(0, AnchorKind::AddVar, true)).unwrap();
        assert!(probe.prompt_text.starts_with("def below1(var1, var2):\n"));
        assert!(probe.prompt_text.contains("def below2(var1: List[int], var2: int) -> bool:"));
        assert!(probe.prompt_text.contains(">>> below2([1], 2)"));
        assert!(!probe.prompt_text.contains("below("));
        assert_eq!(target_entry_point(&p, &cond(0, AnchorKind::AddVar, true)), "below2");
    }

    #[test]
    fn errors() {
        let mut p = problem();
        assert!(matches!(
            anchoring_transform(&p, &cond(4, AnchorKind::PrintVar, false)),
            Err(TransformError::SolutionTooShort { have: 4, need: 4, .. })
        ));
        p.prompt = "def nothing():\n    \"\"\"doc\"\"\"\n".into();
        p.entry_point = "nothing".into();
        assert!(matches!(
            build_anchor_function(&p, &cond(0, AnchorKind::PrintVar, false)),
            Err(TransformError::NoParameters(_))
        ));
    }

    #[test]
    fn prompts_per_n() {
        let cfg = AnchoringConfig {
            n_lines: vec![0, 3, 4],
            kinds: vec![AnchorKind::PrintVar],
            renamed: vec![false],
        };
        let probes = anchoring_prompts(&[problem()], &cfg).unwrap();
        // n=4 filters the 4-line solution out.
        assert_eq!(probes.len(), 4);
        let bad = AnchoringConfig {
            n_lines: vec![9],
            ..cfg
        };
        assert!(anchoring_prompts(&[problem()], &bad).is_err());
    }
}
