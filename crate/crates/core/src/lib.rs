//! Black-box failure elicitation for completion models.
//!
//! The pipeline is `corpus` -> `transforms` (probe manifests) -> `backends`
//! (completions) -> `sandbox` (execution of generated code) -> `classify`
//! (failure signatures) -> `report` (aggregated tables). The `cli` module wires
//! the stages together behind the `bias-probe` binary.

/// Declares a fieldless enum whose variants map one-to-one onto stable string
/// labels, used for manifest keys, CSV cells and CLI values.
macro_rules! label_enum {
    (
        $(#[$meta:meta])*
        pub enum $name:ident { $($variant:ident => $label:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $label),+ }
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl std::str::FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($label => Ok($name::$variant),)+
                    other => Err(format!(
                        "unknown {} `{}` (expected one of: {})",
                        stringify!($name),
                        other,
                        [$($label),+].join(", ")
                    )),
                }
            }
        }

        impl serde::Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> serde::Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

pub mod backends;
pub mod classify;
pub mod cli;
pub mod corpus;
pub mod jsonl;
pub mod report;
pub mod sandbox;
pub mod transforms;

pub use corpus::{CodeProblem, FunctionSignature, Parameter, SolutionLines};
pub use transforms::{Experiment, TransformedPrompt};
