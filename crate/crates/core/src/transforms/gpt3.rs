//! Text-only probes for general language models: numeric anchoring questions
//! and the save/die framing scenario.

use std::fmt;
use std::str::FromStr;

use super::{Condition, Experiment, TransformError, TransformedPrompt};

/// An estimation question with its true value written as a decimal literal.
#[derive(Debug, Clone, Copy)]
pub struct Question {
    pub subject: &'static str,
    pub true_value: &'static str,
}

pub const QUESTIONS: [Question; 14] = [
    q("the length of the Mississippi River (in miles)", "2350"),
    q("the height of Mount Everest (in feet)", "29032"),
    q("the amount of meat eaten per year by the average American (in pounds)", "144"),
    q("the distance from San Francisco to New York City (in miles)", "2569"),
    q("the height of the tallest redwood (in feet)", "380"),
    q("the number of United Nation members", "193"),
    q("the number of female professors at the University of California, Berkeley", "256"),
    q("the population of Chicago (in millions)", "2.7"),
    q("the year the telephone was invented", "1876"),
    q("the average number of babies born per day in the United States", "10267"),
    q("the maximum speed of a house cat (in miles per hour)", "30"),
    q("the amount of gas used per month by average American (in gallons)", "656"),
    q("the number of state colleges and universities in California", "23"),
    q("the number of Lincoln's presidency", "16"),
];

const fn q(subject: &'static str, true_value: &'static str) -> Question {
    Question { subject, true_value }
}

/// Adjustment percentages accepted without an explicit override.
pub const STANDARD_P: [u32; 2] = [20, 50];

label_enum! {
    pub enum AnchorDirection {
        Lower => "lower",
        Upper => "upper",
    }
}

label_enum! {
    pub enum AnchorRole {
        Baseline => "baseline",
        Lower => "lower",
        Upper => "upper",
    }
}

impl AnchorRole {
    pub fn direction(self) -> Option<AnchorDirection> {
        match self {
            AnchorRole::Baseline => None,
            AnchorRole::Lower => Some(AnchorDirection::Lower),
            AnchorRole::Upper => Some(AnchorDirection::Upper),
        }
    }
}

/// A decimal literal as `units / 10^scale`.
fn decimal_parts(literal: &str) -> (i128, u32) {
    let (int, frac) = literal.split_once('.').unwrap_or((literal, ""));
    let digits = format!("{int}{frac}");
    let units = digits.parse().expect("question values are decimal literals");
    (units, frac.len() as u32)
}

impl Question {
    pub fn value(&self) -> f64 {
        self.true_value.parse().expect("question values are decimal literals")
    }

    /// Anchor before rounding, as an exact fraction `(numerator, denominator)`.
    pub fn exact_anchor(&self, p: u32, direction: AnchorDirection) -> (i128, i128) {
        let (units, scale) = decimal_parts(self.true_value);
        let factor = match direction {
            AnchorDirection::Lower => 100 - p as i128,
            AnchorDirection::Upper => 100 + p as i128,
        };
        (units * factor, 10i128.pow(scale) * 100)
    }

    /// The anchor shown in prompts: the exact anchor rounded to the nearest
    /// integer, ties to even.
    pub fn anchor(&self, p: u32, direction: AnchorDirection) -> i64 {
        let (num, den) = self.exact_anchor(p, direction);
        round_half_even(num, den) as i64
    }

    pub fn baseline_prompt(&self) -> String {
        format!("What is {}? Answer:", self.subject)
    }

    pub fn anchored_prompt(&self, anchor: i64, direction: AnchorDirection) -> String {
        let relation = match direction {
            AnchorDirection::Lower => "greater",
            AnchorDirection::Upper => "less",
        };
        format!(
            "{} is {relation} than {anchor}.\n{}",
            capitalize(self.subject),
            self.baseline_prompt()
        )
    }
}

fn round_half_even(num: i128, den: i128) -> i128 {
    debug_assert!(den > 0);
    let q = num.div_euclid(den);
    let r = num.rem_euclid(den);
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gpt3AnchoringCondition {
    pub question: usize,
    pub p: u32,
    pub role: AnchorRole,
    /// Absent for baseline prompts.
    pub anchor: Option<i64>,
}

/// One baseline and two anchored prompts per question. `p` must be 20 or 50
/// unless `allow_nonstandard_p` is set.
pub fn gpt3_anchoring_prompts(p: u32, allow_nonstandard_p: bool) -> Result<Vec<TransformedPrompt>, TransformError> {
    if !STANDARD_P.contains(&p) && !allow_nonstandard_p {
        return Err(TransformError::Config(format!(
            "anchor adjustment p={p} is not one of 20, 50"
        )));
    }
    if p >= 100 {
        return Err(TransformError::Config(format!("anchor adjustment p={p} must be below 100")));
    }
    let mut out = Vec::with_capacity(QUESTIONS.len() * 3);
    for (idx, question) in QUESTIONS.iter().enumerate() {
        for &role in AnchorRole::ALL {
            let (prompt_text, anchor) = match role.direction() {
                None => (question.baseline_prompt(), None),
                Some(dir) => {
                    let a = question.anchor(p, dir);
                    (question.anchored_prompt(a, dir), Some(a))
                }
            };
            out.push(TransformedPrompt {
                probe_id: format!("gpt3_anchoring:p{p}:q{idx:02}:{role}"),
                experiment: Experiment::Gpt3Anchoring,
                base_task: None,
                condition: Condition::Gpt3Anchoring(Gpt3AnchoringCondition {
                    question: idx,
                    p,
                    role,
                    anchor,
                }),
                prompt_text,
                detection_targets: vec![],
                reference_spec: None,
            });
        }
    }
    Ok(out)
}

/// A reduced fraction in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fraction {
    num: u32,
    den: u32,
}

impl Fraction {
    pub fn new(num: u32, den: u32) -> Self {
        assert!(den > 0, "fraction denominator must be positive");
        let g = gcd(num, den);
        Self {
            num: num / g,
            den: den / g,
        }
    }

    pub fn numerator(self) -> u32 {
        self.num
    }

    pub fn denominator(self) -> u32 {
        self.den
    }

    pub fn complement(self) -> Self {
        Fraction::new(self.den - self.num, self.den)
    }

    /// `population * self`, if it is a whole number.
    pub fn of(self, population: u32) -> Option<u32> {
        let scaled = population as u64 * self.num as u64;
        scaled.is_multiple_of(self.den as u64).then(|| (scaled / self.den as u64) as u32)
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Fraction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once('/').ok_or_else(|| format!("fraction `{s}` is not a/b"))?;
        let num: u32 = a.trim().parse().map_err(|e| format!("fraction `{s}`: {e}"))?;
        let den: u32 = b.trim().parse().map_err(|e| format!("fraction `{s}`: {e}"))?;
        if den == 0 || num == 0 || num >= den {
            return Err(format!("fraction `{s}` is not strictly between 0 and 1"));
        }
        Ok(Fraction::new(num, den))
    }
}

pub const POPULATIONS: [u32; 8] = [60, 300, 600, 900, 1200, 1500, 3000, 6000];

/// Reduced fractions with denominator below seven, in presentation order.
pub fn save_fractions() -> Vec<Fraction> {
    [(1, 2), (1, 3), (2, 3), (1, 4), (3, 4), (1, 5), (2, 5), (3, 5), (4, 5), (1, 6), (5, 6)]
        .into_iter()
        .map(|(a, b)| Fraction::new(a, b))
        .collect()
}

label_enum! {
    pub enum Framing {
        Save => "save",
        Die => "die",
    }
}

label_enum! {
    pub enum OptionLabel {
        A => "A",
        B => "B",
    }
}

label_enum! {
    pub enum OptionPosition {
        First => "first",
        Second => "second",
    }
}

impl OptionLabel {
    pub fn other(self) -> Self {
        match self {
            OptionLabel::A => OptionLabel::B,
            OptionLabel::B => OptionLabel::A,
        }
    }
}

label_enum! {
    /// Save-fraction buckets used when reporting risky-option rates.
    pub enum FractionRange {
        Below => "lt_0.5",
        Half => "eq_0.5",
        Above => "gt_0.5",
    }
}

impl FractionRange {
    pub fn of(f: Fraction) -> Self {
        match (2 * f.num).cmp(&f.den) {
            std::cmp::Ordering::Less => FractionRange::Below,
            std::cmp::Ordering::Equal => FractionRange::Half,
            std::cmp::Ordering::Greater => FractionRange::Above,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FramingScenario {
    pub population: u32,
    pub save_fraction: Fraction,
    pub framing: Framing,
    pub risky_label: OptionLabel,
    pub risky_position: OptionPosition,
}

impl FramingScenario {
    pub fn safe_text(&self) -> String {
        match self.framing {
            Framing::Save => format!("Exactly {} people will be saved.", self.certain_count()),
            Framing::Die => format!("Exactly {} people will die.", self.certain_count()),
        }
    }

    /// People certainly saved (save framing) or certainly dying (die framing).
    pub fn certain_count(&self) -> u32 {
        let f = match self.framing {
            Framing::Save => self.save_fraction,
            Framing::Die => self.save_fraction.complement(),
        };
        f.of(self.population).expect("populations are multiples of 60")
    }

    pub fn risky_text(&self) -> String {
        let (f, g, n) = (self.save_fraction, self.save_fraction.complement(), self.population);
        match self.framing {
            Framing::Save => format!(
                "{f} probability that {n} people will be saved, and {g} probability that no people will be saved."
            ),
            Framing::Die => format!(
                "{f} probability that nobody will die, and {g} probability that {n} people will die."
            ),
        }
    }

    pub fn prompt(&self) -> String {
        let risky = format!("Option {}: {}", self.risky_label, self.risky_text());
        let safe = format!("Option {}: {}", self.risky_label.other(), self.safe_text());
        let (first, second) = match self.risky_position {
            OptionPosition::First => (risky, safe),
            OptionPosition::Second => (safe, risky),
        };
        format!(
            "Imagine {} people are affected by a deadly disease. Choose Option A or Option B\n{first}\n{second}\nAnswer: Option",
            self.population
        )
    }

    pub fn probe_id(&self) -> String {
        format!(
            "gpt3_framing:{}:n{}:f{}-{}:risky{}:{}",
            self.framing,
            self.population,
            self.save_fraction.numerator(),
            self.save_fraction.denominator(),
            self.risky_label,
            self.risky_position
        )
    }
}

/// The full 2 x 8 x 11 x 2 x 2 grid.
pub fn gpt3_framing_prompts() -> Vec<TransformedPrompt> {
    let fractions = save_fractions();
    let mut out = Vec::with_capacity(704);
    for &framing in Framing::ALL {
        for &population in &POPULATIONS {
            for &save_fraction in &fractions {
                for &risky_label in OptionLabel::ALL {
                    for &risky_position in OptionPosition::ALL {
                        let s = FramingScenario {
                            population,
                            save_fraction,
                            framing,
                            risky_label,
                            risky_position,
                        };
                        out.push(TransformedPrompt {
                            probe_id: s.probe_id(),
                            experiment: Experiment::Gpt3Framing,
                            base_task: None,
                            condition: Condition::Gpt3Framing(s),
                            prompt_text: s.prompt(),
                            detection_targets: vec![],
                            reference_spec: None,
                        });
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_even_rounding() {
        assert_eq!(round_half_even(25, 10), 2);
        assert_eq!(round_half_even(35, 10), 4);
        assert_eq!(round_half_even(26, 10), 3);
        assert_eq!(round_half_even(-25, 10), -2);
    }

    #[test]
    fn anchor_prompt_wording() {
        let q = QUESTIONS[0];
        assert_eq!(q.baseline_prompt(), "What is the length of the Mississippi River (in miles)? Answer:");
        assert_eq!(
            q.anchored_prompt(1000, AnchorDirection::Lower),
            "The length of the Mississippi River (in miles) is greater than 1000.\nWhat is the length of the Mississippi River (in miles)? Answer:"
        );
        assert!(q.anchored_prompt(3525, AnchorDirection::Upper).contains("is less than 3525."));
    }

    #[test]
    fn p_zero_anchors_equal_truth() {
        let q = QUESTIONS[0];
        assert_eq!(q.anchor(0, AnchorDirection::Lower), 2350);
        assert_eq!(q.anchor(0, AnchorDirection::Upper), 2350);
    }

    #[test]
    fn p_validation() {
        assert!(gpt3_anchoring_prompts(30, false).is_err());
        assert_eq!(gpt3_anchoring_prompts(30, true).unwrap().len(), 42);
        assert!(gpt3_anchoring_prompts(100, true).is_err());
    }

    #[test]
    fn framing_prompt_text() {
        let s = FramingScenario {
            population: 600,
            save_fraction: Fraction::new(1, 3),
            framing: Framing::Save,
            risky_label: OptionLabel::B,
            risky_position: OptionPosition::Second,
        };
        assert_eq!(
            s.prompt(),
            "Imagine 600 people are affected by a deadly disease. Choose Option A or Option B\n\
             Option A: Exactly 200 people will be saved.\n\
             Option B: 1/3 probability that 600 people will be saved, and 2/3 probability that no people will be saved.\n\
             Answer: Option"
        );
        let die = FramingScenario {
            framing: Framing::Die,
            ..s
        };
        assert!(die.prompt().contains("Option A: Exactly 400 people will die."));
        assert!(die
            .prompt()
            .contains("Option B: 1/3 probability that nobody will die, and 2/3 probability that 600 people will die."));
    }

    #[test]
    fn fraction_parsing_and_ranges() {
        assert_eq!("2/4".parse::<Fraction>().unwrap(), Fraction::new(1, 2));
        assert!("3/2".parse::<Fraction>().is_err());
        assert!("x".parse::<Fraction>().is_err());
        let below: Vec<_> = save_fractions()
            .into_iter()
            .filter(|&f| FractionRange::of(f) == FractionRange::Below)
            .map(|f| f.to_string())
            .collect();
        assert_eq!(below, ["1/3", "1/4", "1/5", "2/5", "1/6"]);
    }
}
