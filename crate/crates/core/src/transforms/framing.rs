//! Irrelevant preceding functions: a random other prompt whose body is a
//! single framing line, prepended to the target prompt.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{join_functions, Condition, DetectionTarget, Experiment, TransformError, TransformedPrompt};
use crate::corpus::CodeProblem;

label_enum! {
    pub enum FramingLine {
        RaiseNotImplemented => "raise_not_implemented",
        Pass => "pass",
        AssertFalse => "assert_false",
        ReturnFalse => "return_false",
        PrintHello => "print_hello",
    }
}

impl FramingLine {
    /// The statement placed in the distractor body.
    pub fn code(self) -> &'static str {
        match self {
            FramingLine::RaiseNotImplemented => "raise NotImplementedError",
            FramingLine::Pass => "pass",
            FramingLine::AssertFalse => "assert False",
            FramingLine::ReturnFalse => "return False",
            FramingLine::PrintHello => "print(\"Hello world!\")",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramingCondition {
    pub framing_line: FramingLine,
    pub distractor_task: String,
    pub seed: u64,
}

pub fn framing_transform(
    problem: &CodeProblem,
    distractor: &CodeProblem,
    cond: &FramingCondition,
) -> Result<TransformedPrompt, TransformError> {
    if distractor.task_id == problem.task_id {
        return Err(TransformError::SameDistractor(problem.task_id.clone()));
    }
    let mut ipf = distractor.prompt.clone();
    if !ipf.ends_with('\n') {
        ipf.push('\n');
    }
    ipf.push_str("    ");
    ipf.push_str(cond.framing_line.code());
    ipf.push('\n');
    Ok(TransformedPrompt {
        probe_id: format!("framing:{}:{}", problem.task_id, cond.framing_line),
        experiment: Experiment::Framing,
        base_task: Some(problem.task_id.clone()),
        condition: Condition::Framing(FramingCondition {
            distractor_task: distractor.task_id.clone(),
            ..cond.clone()
        }),
        prompt_text: join_functions(&ipf, &problem.prompt),
        detection_targets: vec![DetectionTarget::new(
            "framing_line",
            cond.framing_line.code(),
        )],
        reference_spec: None,
    })
}

/// The untransformed prompt; its completions give the original accuracy and
/// the original framing-line rates.
pub fn framing_original(problem: &CodeProblem) -> TransformedPrompt {
    TransformedPrompt {
        probe_id: format!("framing:{}:original", problem.task_id),
        experiment: Experiment::Framing,
        base_task: Some(problem.task_id.clone()),
        condition: Condition::FramingOriginal,
        prompt_text: problem.prompt.clone(),
        detection_targets: FramingLine::ALL
            .iter()
            .map(|l| DetectionTarget::new(l.as_str(), l.code()))
            .collect(),
        reference_spec: None,
    }
}

/// Framed probes for every (problem, line), followed by one original probe
/// per problem. Distractors are drawn uniformly from the other problems,
/// independently for each probe.
pub fn framing_prompts(
    problems: &[CodeProblem],
    lines: &[FramingLine],
    seed: u64,
) -> Result<Vec<TransformedPrompt>, TransformError> {
    if problems.len() < 2 {
        return Err(TransformError::CorpusTooSmall(problems.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(problems.len() * (lines.len() + 1));
    for problem in problems {
        for &line in lines {
            let distractor = loop {
                let candidate = &problems[rng.random_range(0..problems.len())];
                if candidate.task_id != problem.task_id {
                    break candidate;
                }
            };
            let cond = FramingCondition {
                framing_line: line,
                distractor_task: distractor.task_id.clone(),
                seed,
            };
            out.push(framing_transform(problem, distractor, &cond)?);
        }
    }
    out.extend(problems.iter().map(framing_original));
    Ok(out)
}
