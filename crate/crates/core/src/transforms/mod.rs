//! Probe generators.
//!
//! Every generator is a pure function of (corpus, seed, configuration), so the
//! same inputs always produce a byte-identical manifest.

pub mod anchoring;
pub mod arithmetic;
pub mod deletion;
pub mod framing;
pub mod gpt3;

use std::collections::BTreeMap;
use std::path::Path;

use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::ParseError;
use crate::jsonl::{self, JsonlError};

pub use anchoring::{AnchorKind, AnchoringCondition};
pub use arithmetic::{BinaryOp, Formula, MathOrder, MathStyle, Placement, UnaryOp};
pub use deletion::DeletionStyle;
pub use framing::FramingLine;
pub use gpt3::{AnchorDirection, Framing, OptionLabel, OptionPosition};

label_enum! {
    pub enum Experiment {
        Framing => "framing",
        Anchoring => "anchoring",
        MathEq => "matheq",
        Attribute => "attribute",
        Deletion => "deletion",
        Gpt3Anchoring => "gpt3_anchoring",
        Gpt3Framing => "gpt3_framing",
    }
}

impl Experiment {
    /// Experiments whose probes are code completions checked by execution.
    pub fn is_code(self) -> bool {
        !matches!(self, Experiment::Gpt3Anchoring | Experiment::Gpt3Framing)
    }
}

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("{task}: cannot parse prompt: {source}")]
    Parse {
        task: String,
        #[source]
        source: ParseError,
    },
    #[error("{0}: function has no parameters to anchor on")]
    NoParameters(String),
    #[error("{task}: canonical solution has {have} lines, need more than {need}")]
    SolutionTooShort { task: String, have: usize, need: usize },
    #[error("distractor {0} is the problem itself")]
    SameDistractor(String),
    #[error("framing needs at least two problems, corpus has {0}")]
    CorpusTooSmall(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// A named string the classifier looks for in completions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionTarget {
    pub name: String,
    pub text: String,
}

impl DetectionTarget {
    pub fn new(name: &str, text: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            text: text.into(),
        }
    }
}

/// Behavioral reference the classifier compares sandbox output against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSpec {
    /// `expected` is what the prompt asks for; `alternative` is the
    /// bias-predicted answer (opposite operation order, or the formula the
    /// function name implies).
    Arithmetic {
        expected: Formula,
        alternative: Formula,
        inputs: Vec<[i64; 2]>,
    },
    Deletion { packages: Vec<String> },
}

/// Experiment-specific description of how a probe was built.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Framing(framing::FramingCondition),
    /// Unframed problem, used for the original-accuracy column.
    FramingOriginal,
    Anchoring(AnchoringCondition),
    /// Problem prompt plus `n_lines` canonical lines, no anchor.
    AnchoringBaseline { n_lines: usize },
    MathEq(arithmetic::MathEqCondition),
    Attribute(arithmetic::AttributeCondition),
    Deletion(deletion::DeletionCondition),
    Gpt3Anchoring(gpt3::Gpt3AnchoringCondition),
    Gpt3Framing(gpt3::FramingScenario),
}

impl Condition {
    /// Flattened key/value view in a fixed order.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![("variant", self.variant().to_string())];
        match self {
            Condition::Framing(c) => {
                out.push(("framing_line", c.framing_line.as_str().into()));
                out.push(("distractor_task", c.distractor_task.clone()));
                out.push(("seed", c.seed.to_string()));
            }
            Condition::FramingOriginal => {}
            Condition::Anchoring(c) => {
                out.push(("n_lines", c.n_lines.to_string()));
                out.push(("anchor_kind", c.anchor_kind.as_str().into()));
                out.push(("renamed", c.renamed.to_string()));
            }
            Condition::AnchoringBaseline { n_lines } => {
                out.push(("n_lines", n_lines.to_string()));
            }
            Condition::MathEq(c) => {
                out.push(("binary_op", c.binary_op.as_str().into()));
                out.push(("unary_op", c.unary_op.as_str().into()));
                out.push(("order", c.order.as_str().into()));
                out.push(("style", c.style.as_str().into()));
            }
            Condition::Attribute(c) => {
                out.push(("prompt_op", c.prompt_op.as_str().into()));
                out.push(("name_op", c.name_op.as_str().into()));
                out.push(("number", c.number.to_string()));
                out.push(("placement", c.placement.as_str().into()));
                out.push(("conflict", c.is_conflict().to_string()));
            }
            Condition::Deletion(c) => {
                out.push(("packages", c.packages.join(",")));
                out.push(("style", c.style.as_str().into()));
                out.push(("sample_index", c.sample_index.to_string()));
                out.push(("seed", c.seed.to_string()));
            }
            Condition::Gpt3Anchoring(c) => {
                out.push(("question", c.question.to_string()));
                out.push(("p", c.p.to_string()));
                out.push(("role", c.role.as_str().into()));
                if let Some(anchor) = c.anchor {
                    out.push(("anchor", anchor.to_string()));
                }
            }
            Condition::Gpt3Framing(s) => {
                out.push(("population", s.population.to_string()));
                out.push(("save_fraction", s.save_fraction.to_string()));
                out.push(("framing", s.framing.as_str().into()));
                out.push(("risky_label", s.risky_label.as_str().into()));
                out.push(("risky_position", s.risky_position.as_str().into()));
            }
        }
        out
    }

    pub fn variant(&self) -> &'static str {
        match self {
            Condition::Framing(_) => "framed",
            Condition::FramingOriginal => "original",
            Condition::Anchoring(_) => "anchored",
            Condition::AnchoringBaseline { .. } => "baseline",
            Condition::MathEq(_) => "matheq",
            Condition::Attribute(_) => "attribute",
            Condition::Deletion(_) => "deletion",
            Condition::Gpt3Anchoring(_) => "gpt3_anchoring",
            Condition::Gpt3Framing(_) => "gpt3_framing",
        }
    }

    fn from_pairs(map: &BTreeMap<String, String>) -> Result<Self, String> {
        let get = |k: &str| {
            map.get(k)
                .map(String::as_str)
                .ok_or_else(|| format!("condition missing `{k}`"))
        };
        let num = |k: &str| -> Result<i64, String> {
            get(k)?.parse().map_err(|e| format!("condition `{k}`: {e}"))
        };
        let flag = |k: &str| -> Result<bool, String> {
            get(k)?.parse().map_err(|e| format!("condition `{k}`: {e}"))
        };
        Ok(match get("variant")? {
            "framed" => Condition::Framing(framing::FramingCondition {
                framing_line: get("framing_line")?.parse()?,
                distractor_task: get("distractor_task")?.to_string(),
                seed: num("seed")? as u64,
            }),
            "original" => Condition::FramingOriginal,
            "anchored" => Condition::Anchoring(AnchoringCondition {
                n_lines: num("n_lines")? as usize,
                anchor_kind: get("anchor_kind")?.parse()?,
                renamed: flag("renamed")?,
            }),
            "baseline" => Condition::AnchoringBaseline {
                n_lines: num("n_lines")? as usize,
            },
            "matheq" => Condition::MathEq(arithmetic::MathEqCondition {
                binary_op: get("binary_op")?.parse()?,
                unary_op: get("unary_op")?.parse()?,
                order: get("order")?.parse()?,
                style: get("style")?.parse()?,
            }),
            "attribute" => Condition::Attribute(arithmetic::AttributeCondition {
                prompt_op: get("prompt_op")?.parse()?,
                name_op: get("name_op")?.parse()?,
                number: num("number")?,
                placement: get("placement")?.parse()?,
            }),
            "deletion" => Condition::Deletion(deletion::DeletionCondition {
                packages: get("packages")?.split(',').map(str::to_string).collect(),
                style: get("style")?.parse()?,
                sample_index: num("sample_index")? as usize,
                seed: num("seed")? as u64,
            }),
            "gpt3_anchoring" => Condition::Gpt3Anchoring(gpt3::Gpt3AnchoringCondition {
                question: num("question")? as usize,
                p: num("p")? as u32,
                role: get("role")?.parse()?,
                anchor: map
                    .get("anchor")
                    .map(|a| a.parse().map_err(|e| format!("condition `anchor`: {e}")))
                    .transpose()?,
            }),
            "gpt3_framing" => Condition::Gpt3Framing(gpt3::FramingScenario {
                population: num("population")? as u32,
                save_fraction: get("save_fraction")?.parse()?,
                framing: get("framing")?.parse()?,
                risky_label: get("risky_label")?.parse()?,
                risky_position: get("risky_position")?.parse()?,
            }),
            other => return Err(format!("unknown condition variant `{other}`")),
        })
    }
}

impl Serialize for Condition {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let pairs = self.pairs();
        let mut map = s.serialize_map(Some(pairs.len()))?;
        for (k, v) in &pairs {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Condition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<String, String>::deserialize(d)?;
        Condition::from_pairs(&map).map_err(serde::de::Error::custom)
    }
}

/// One generated probe, as persisted in a manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedPrompt {
    pub probe_id: String,
    pub experiment: Experiment,
    pub base_task: Option<String>,
    pub condition: Condition,
    pub prompt_text: String,
    pub detection_targets: Vec<DetectionTarget>,
    pub reference_spec: Option<ReferenceSpec>,
}

impl TransformedPrompt {
    pub fn target(&self, name: &str) -> Option<&str> {
        self.detection_targets
            .iter()
            .find(|t| t.name == name)
            .map(|t| t.text.as_str())
    }
}

pub fn write_manifest(path: &Path, probes: &[TransformedPrompt]) -> Result<(), JsonlError> {
    jsonl::write_all(path, probes)
}

pub fn read_manifest(path: &Path) -> Result<Vec<TransformedPrompt>, JsonlError> {
    jsonl::read_all(path)
}

/// Checks the manifest-level invariants: unique ids, non-empty prompts.
pub fn validate_manifest(probes: &[TransformedPrompt]) -> Result<(), String> {
    let mut seen = std::collections::HashSet::new();
    for p in probes {
        if p.prompt_text.is_empty() {
            return Err(format!("probe {} has an empty prompt", p.probe_id));
        }
        if !seen.insert(p.probe_id.as_str()) {
            return Err(format!("duplicate probe id {}", p.probe_id));
        }
    }
    Ok(())
}

/// Joins a prepended function and the target prompt with two blank lines.
pub(crate) fn join_functions(first: &str, second: &str) -> String {
    let mut out = String::with_capacity(first.len() + second.len() + 3);
    out.push_str(first);
    if !first.ends_with('\n') {
        out.push('\n');
    }
    out.push_str("\n\n");
    out.push_str(second);
    out
}

pub(crate) fn ensure_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}
