//! Deterministic reference "models", each exhibiting one failure class. Every
//! profile falls back to the correct answer on probes it has no opinion on.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use super::{Backend, BackendError, CompletionRequest, ErrorClass};
use crate::corpus::CodeProblem;
use crate::transforms::deletion::{DeletionRule, FUNCTION_NAME as DELETION_FUNCTION};
use crate::transforms::gpt3::{Framing, QUESTIONS};
use crate::transforms::{AnchorKind, Condition, Formula, Placement, ReferenceSpec, TransformedPrompt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimplifierMode {
    /// Deletes files importing any listed package.
    Any,
    /// Deletes files importing the first listed package.
    First,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Profile {
    Canonical,
    VerbatimCopier,
    FramingAdopter,
    AnchorMixer,
    NameFollower,
    ConjunctionSimplifier(SimplifierMode),
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Canonical => "canonical",
            Profile::VerbatimCopier => "verbatim-copier",
            Profile::FramingAdopter => "framing-adopter",
            Profile::AnchorMixer => "anchor-mixer",
            Profile::NameFollower => "name-follower",
            Profile::ConjunctionSimplifier(SimplifierMode::Any) => "conjunction-simplifier(any)",
            Profile::ConjunctionSimplifier(SimplifierMode::First) => "conjunction-simplifier(first)",
        })
    }
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "canonical" => Profile::Canonical,
            "verbatim-copier" => Profile::VerbatimCopier,
            "framing-adopter" => Profile::FramingAdopter,
            "anchor-mixer" => Profile::AnchorMixer,
            "name-follower" => Profile::NameFollower,
            "conjunction-simplifier" | "conjunction-simplifier(any)" => {
                Profile::ConjunctionSimplifier(SimplifierMode::Any)
            }
            "conjunction-simplifier(first)" => Profile::ConjunctionSimplifier(SimplifierMode::First),
            other => {
                return Err(format!(
                    "unknown synthetic profile `{other}` (expected canonical, verbatim-copier, framing-adopter, \
                     anchor-mixer, name-follower, conjunction-simplifier(any|first))"
                ))
            }
        })
    }
}

pub struct SyntheticBackend {
    profile: Profile,
    problems: HashMap<String, CodeProblem>,
}

impl SyntheticBackend {
    /// `problems` supplies canonical solutions for corpus-derived probes.
    pub fn new(profile: Profile, problems: &[CodeProblem]) -> Self {
        Self {
            profile,
            problems: problems.iter().map(|p| (p.task_id.clone(), p.clone())).collect(),
        }
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    fn problem(&self, probe: &TransformedPrompt) -> Result<&CodeProblem, BackendError> {
        let task = probe.base_task.as_deref().unwrap_or_default();
        self.problems.get(task).ok_or_else(|| {
            BackendError::new(ErrorClass::MissingFixture, format!("{}: task {task} not in corpus", probe.probe_id))
        })
    }

    fn canonical(&self, probe: &TransformedPrompt) -> Result<String, BackendError> {
        Ok(match &probe.condition {
            Condition::Framing(_) | Condition::FramingOriginal => self.problem(probe)?.canonical_solution.clone(),
            Condition::Anchoring(c) => self.problem(probe)?.solution_lines().suffix(c.n_lines),
            Condition::AnchoringBaseline { n_lines } => self.problem(probe)?.solution_lines().suffix(*n_lines),
            Condition::MathEq(_) | Condition::Attribute(_) => {
                let (expected, _) = arithmetic_refs(probe)?;
                formula_completion(probe, expected)
            }
            Condition::Deletion(c) => {
                deletion_completion(probe, &c.packages, DeletionRule::AllOf)
            }
            Condition::Gpt3Anchoring(c) => format!(" {}\n", QUESTIONS[c.question].true_value),
            Condition::Gpt3Framing(s) => format!(" {}", s.risky_label.other()),
        })
    }

    fn biased(&self, probe: &TransformedPrompt) -> Result<Option<String>, BackendError> {
        let cond = &probe.condition;
        Ok(match (self.profile, cond) {
            (Profile::VerbatimCopier | Profile::FramingAdopter, Condition::Framing(c)) => {
                Some(format!("    {}\n", c.framing_line.code()))
            }
            (Profile::VerbatimCopier, Condition::Anchoring(_)) => probe.target("anchor_continuation").map(str::to_string),
            (Profile::AnchorMixer, Condition::Anchoring(c)) => {
                let spliced = probe.target("anchor_continuation").unwrap_or_default();
                let rest = self.problem(probe)?.solution_lines().suffix(c.n_lines);
                Some(match c.anchor_kind {
                    AnchorKind::PrintVar => format!("{spliced}{rest}"),
                    // Keep the concatenation but not the early return.
                    AnchorKind::AddVar => format!("{}\n{rest}", spliced.lines().next().unwrap_or_default()),
                })
            }
            (Profile::VerbatimCopier, Condition::Gpt3Anchoring(c)) => c.anchor.map(|a| format!(" {a}\n")),
            (Profile::AnchorMixer, Condition::Gpt3Anchoring(c)) => c.anchor.map(|a| {
                let truth = QUESTIONS[c.question].value();
                format!(" {}\n", ((truth + a as f64) / 2.0).round() as i64)
            }),
            (Profile::FramingAdopter, Condition::Gpt3Framing(s)) => Some(match s.framing {
                Framing::Save => format!(" {}", s.risky_label.other()),
                Framing::Die => format!(" {}", s.risky_label),
            }),
            (Profile::NameFollower, Condition::MathEq(_) | Condition::Attribute(_)) => {
                let (_, alternative) = arithmetic_refs(probe)?;
                Some(formula_completion(probe, alternative))
            }
            (Profile::ConjunctionSimplifier(mode), Condition::Deletion(c)) => {
                let rule = match mode {
                    SimplifierMode::Any => DeletionRule::AnyOf,
                    SimplifierMode::First => DeletionRule::FirstPackage,
                };
                Some(deletion_completion(probe, &c.packages, rule))
            }
            _ => None,
        })
    }
}

fn arithmetic_refs(probe: &TransformedPrompt) -> Result<(Formula, Formula), BackendError> {
    match &probe.reference_spec {
        Some(ReferenceSpec::Arithmetic { expected, alternative, .. }) => Ok((*expected, *alternative)),
        _ => Err(BackendError::new(
            ErrorClass::InvalidResponse,
            format!("{}: arithmetic probe without reference formulas", probe.probe_id),
        )),
    }
}

/// Name used when the model has to write the `def` line itself.
fn fallback_name(probe: &TransformedPrompt) -> String {
    match &probe.condition {
        Condition::MathEq(c) => c.function_name(),
        Condition::Attribute(c) if c.placement == Placement::NoName => "compute".to_string(),
        Condition::Attribute(c) => c.function_name(),
        _ => "solution".to_string(),
    }
}

/// Completes the prompt into a function returning `formula`, matching how
/// far the prompt already got: nothing, `def name`, or a full header.
fn formula_completion(probe: &TransformedPrompt, formula: Formula) -> String {
    let body = format!("    return {}\n", formula.python());
    let prompt = &probe.prompt_text;
    let last_line = prompt.rsplit('\n').next().unwrap_or_default();
    if last_line.starts_with("def ") {
        format!("(x, y):\n{body}")
    } else if prompt.lines().any(|l| l.starts_with("def ")) {
        body
    } else {
        format!("def {}(x, y):\n{body}", fallback_name(probe))
    }
}

fn deletion_completion(probe: &TransformedPrompt, packages: &[String], rule: DeletionRule) -> String {
    let with_header = !probe.prompt_text.lines().any(|l| l.starts_with("def "));
    deletion_function(packages, rule, with_header)
}

/// Python deleting every regular file in `directory` whose imports satisfy
/// `rule` over `packages`.
pub fn deletion_function(packages: &[String], rule: DeletionRule, with_header: bool) -> String {
    let (wanted, test) = match rule {
        DeletionRule::AllOf => (packages, "all"),
        DeletionRule::AnyOf => (packages, "any"),
        DeletionRule::FirstPackage => (&packages[..packages.len().min(1)], "all"),
    };
    let list = wanted.iter().map(|p| format!("{p:?}")).collect::<Vec<_>>().join(", ");
    let mut out = String::new();
    if with_header {
        out.push_str(&format!("def {DELETION_FUNCTION}(directory):\n"));
    }
    out.push_str(&format!(
        "    import os\n\
         \x20   wanted = [{list}]\n\
         \x20   for name in sorted(os.listdir(directory)):\n\
         \x20       path = os.path.join(directory, name)\n\
         \x20       if not os.path.isfile(path):\n\
         \x20           continue\n\
         \x20       with open(path) as handle:\n\
         \x20           imported = set()\n\
         \x20           for line in handle:\n\
         \x20               words = line.split()\n\
         \x20               if len(words) >= 2 and words[0] == \"import\":\n\
         \x20                   imported.add(words[1])\n\
         \x20       if {test}(p in imported for p in wanted):\n\
         \x20           os.remove(path)\n"
    ));
    out
}

impl Backend for SyntheticBackend {
    fn id(&self) -> String {
        format!("synthetic:{}", self.profile)
    }

    fn complete(&self, probe: &TransformedPrompt, _request: &CompletionRequest) -> Result<String, BackendError> {
        match self.biased(probe)? {
            Some(text) => Ok(text),
            None => self.canonical(probe),
        }
    }
}
