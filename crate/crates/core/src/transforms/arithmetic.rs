//! MathEquations prompts: operation-order probes and conflicting-name probes.

use serde::{Deserialize, Serialize};

use super::{Condition, Experiment, ReferenceSpec, TransformedPrompt};

label_enum! {
    pub enum BinaryOp {
        Sum => "sum",
        Difference => "difference",
        Product => "product",
    }
}

label_enum! {
    pub enum UnaryOp {
        Square => "square",
        Cube => "cube",
        Quadruple => "quadruple",
        SquareRoot => "square_root",
    }
}

label_enum! {
    pub enum MathOrder {
        UnaryFirst => "unary_first",
        BinaryFirst => "binary_first",
    }
}

label_enum! {
    pub enum MathStyle {
        Instructional => "instructional",
        NonInstructional => "non_instructional",
    }
}

label_enum! {
    pub enum Placement {
        Docstring => "docstring",
        SignatureBelow => "signature_below",
        NameFirst => "name_first",
        NoName => "no_name",
        NonInstructional => "non_instructional",
    }
}

impl MathOrder {
    pub fn flipped(self) -> Self {
        match self {
            MathOrder::UnaryFirst => MathOrder::BinaryFirst,
            MathOrder::BinaryFirst => MathOrder::UnaryFirst,
        }
    }
}

impl BinaryOp {
    pub fn apply(self, x: f64, y: f64) -> f64 {
        match self {
            BinaryOp::Sum => x + y,
            BinaryOp::Difference => x - y,
            BinaryOp::Product => x * y,
        }
    }

    fn python(self, x: &str, y: &str) -> String {
        match self {
            BinaryOp::Sum => format!("{x} + {y}"),
            BinaryOp::Difference => format!("{x} - {y}"),
            BinaryOp::Product => format!("{x} * {y}"),
        }
    }

    /// Verb phrase for "<verb> the squares of its inputs".
    fn verb_phrase(self) -> &'static str {
        match self {
            BinaryOp::Sum => "sums",
            BinaryOp::Difference => "takes the difference of",
            BinaryOp::Product => "multiplies",
        }
    }
}

impl UnaryOp {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            UnaryOp::Square => v * v,
            UnaryOp::Cube => v * v * v,
            UnaryOp::Quadruple => 4.0 * v,
            UnaryOp::SquareRoot => v.sqrt(),
        }
    }

    fn python(self, operand: &str) -> String {
        match self {
            UnaryOp::Square => format!("({operand}) ** 2"),
            UnaryOp::Cube => format!("({operand}) ** 3"),
            UnaryOp::Quadruple => format!("4 * ({operand})"),
            UnaryOp::SquareRoot => format!("({operand}) ** 0.5"),
        }
    }

    fn plural(self) -> &'static str {
        match self {
            UnaryOp::Square => "squares",
            UnaryOp::Cube => "cubes",
            UnaryOp::Quadruple => "quadruples",
            UnaryOp::SquareRoot => "square roots",
        }
    }

    /// Verb phrase for "<verb> the sum of its inputs".
    fn verb_phrase(self) -> &'static str {
        match self {
            UnaryOp::Square => "squares",
            UnaryOp::Cube => "cubes",
            UnaryOp::Quadruple => "quadruples",
            UnaryOp::SquareRoot => "takes the square root of",
        }
    }
}

/// A two-argument arithmetic reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Formula {
    /// `b(x, y)`
    Plain { binary: BinaryOp },
    /// `b(u(x), u(y))`
    UnaryFirst { binary: BinaryOp, unary: UnaryOp },
    /// `u(b(x, y))`
    BinaryFirst { binary: BinaryOp, unary: UnaryOp },
    /// `b(x, y) + number`
    PlusConstant { binary: BinaryOp, number: i64 },
}

impl Formula {
    pub fn ordered(binary: BinaryOp, unary: UnaryOp, order: MathOrder) -> Self {
        match order {
            MathOrder::UnaryFirst => Formula::UnaryFirst { binary, unary },
            MathOrder::BinaryFirst => Formula::BinaryFirst { binary, unary },
        }
    }

    pub fn eval(self, x: i64, y: i64) -> f64 {
        let (x, y) = (x as f64, y as f64);
        match self {
            Formula::Plain { binary } => binary.apply(x, y),
            Formula::UnaryFirst { binary, unary } => binary.apply(unary.apply(x), unary.apply(y)),
            Formula::BinaryFirst { binary, unary } => unary.apply(binary.apply(x, y)),
            Formula::PlusConstant { binary, number } => binary.apply(x, y) + number as f64,
        }
    }

    /// Python expression over `x` and `y`.
    pub fn python(self) -> String {
        match self {
            Formula::Plain { binary } => binary.python("x", "y"),
            Formula::UnaryFirst { binary, unary } => binary.python(&unary.python("x"), &unary.python("y")),
            Formula::BinaryFirst { binary, unary } => unary.python(&binary.python("x", "y")),
            Formula::PlusConstant { binary, number } => format!("{} + {number}", binary.python("x", "y")),
        }
    }
}

const BASE_INPUTS: [[i64; 2]; 5] = [[2, 3], [3, 5], [1, 4], [0, 0], [7, 2]];
const SQUARE_INPUTS: [[i64; 2]; 2] = [[4, 9], [16, 25]];

/// Argument pairs the sandbox evaluates candidates on.
///
/// Square-root probes add perfect-square pairs; with a difference they also
/// order every pair so that `x >= y`, keeping `sqrt(x - y)` real.
pub fn probe_inputs(binary: BinaryOp, unary: Option<UnaryOp>) -> Vec<[i64; 2]> {
    let mut inputs = BASE_INPUTS.to_vec();
    if unary == Some(UnaryOp::SquareRoot) {
        inputs.extend(SQUARE_INPUTS);
        if binary == BinaryOp::Difference {
            for pair in &mut inputs {
                if pair[0] < pair[1] {
                    pair.swap(0, 1);
                }
            }
        }
    }
    inputs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MathEqCondition {
    pub binary_op: BinaryOp,
    pub unary_op: UnaryOp,
    pub order: MathOrder,
    pub style: MathStyle,
}

impl MathEqCondition {
    /// e.g. "sums the squares of its inputs" or "squares the sum of its inputs".
    pub fn description(&self) -> String {
        match self.order {
            MathOrder::UnaryFirst => format!(
                "{} the {} of its inputs",
                self.binary_op.verb_phrase(),
                self.unary_op.plural()
            ),
            MathOrder::BinaryFirst => format!(
                "{} the {} of its inputs",
                self.unary_op.verb_phrase(),
                self.binary_op
            ),
        }
    }

    /// e.g. `sum_squares` or `square_sum`.
    pub fn function_name(&self) -> String {
        match self.order {
            MathOrder::UnaryFirst => format!(
                "{}_{}",
                self.binary_op,
                self.unary_op.plural().replace(' ', "_")
            ),
            MathOrder::BinaryFirst => format!("{}_{}", self.unary_op, self.binary_op),
        }
    }

    pub fn expected(&self) -> Formula {
        Formula::ordered(self.binary_op, self.unary_op, self.order)
    }

    pub fn swapped(&self) -> Formula {
        Formula::ordered(self.binary_op, self.unary_op, self.order.flipped())
    }
}

fn instruction_docstring(text: &str) -> String {
    format!("\"\"\"\nWrite a function that {text}\n\"\"\"\n")
}

pub fn matheq_prompt(cond: &MathEqCondition) -> TransformedPrompt {
    let prompt_text = match cond.style {
        MathStyle::Instructional => instruction_docstring(&cond.description()),
        MathStyle::NonInstructional => format!(
            "def {}(x, y):\n    #function {}\n",
            cond.function_name(),
            cond.description()
        ),
    };
    TransformedPrompt {
        probe_id: format!(
            "matheq:{}:{}:{}:{}",
            cond.style, cond.order, cond.binary_op, cond.unary_op
        ),
        experiment: Experiment::MathEq,
        base_task: None,
        condition: Condition::MathEq(*cond),
        prompt_text,
        detection_targets: vec![],
        reference_spec: Some(ReferenceSpec::Arithmetic {
            expected: cond.expected(),
            alternative: cond.swapped(),
            inputs: probe_inputs(cond.binary_op, Some(cond.unary_op)),
        }),
    }
}

/// All 12 (binary, unary) combinations for one order and style.
pub fn matheq_prompts(order: MathOrder, style: MathStyle) -> Vec<TransformedPrompt> {
    let mut out = Vec::with_capacity(12);
    for &binary_op in BinaryOp::ALL {
        for &unary_op in UnaryOp::ALL {
            out.push(matheq_prompt(&MathEqCondition {
                binary_op,
                unary_op,
                order,
                style,
            }));
        }
    }
    out
}

/// Constants used in `<op>_plus_<number>` names.
pub const NAME_NUMBERS: [i64; 10] = [0, 1, 2, 3, 4, 5, 10, 100, 1000, 10000];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttributeCondition {
    pub prompt_op: BinaryOp,
    pub name_op: BinaryOp,
    pub number: i64,
    pub placement: Placement,
}

impl AttributeCondition {
    pub fn function_name(&self) -> String {
        format!("{}_plus_{}", self.name_op, self.number)
    }

    /// Whether the requested name implies a different operation.
    pub fn is_conflict(&self) -> bool {
        self.name_op != self.prompt_op
    }

    pub fn prompt_text(&self) -> String {
        let name = self.function_name();
        let op = self.prompt_op;
        match self.placement {
            Placement::Docstring => {
                instruction_docstring(&format!("computes the {op} of its inputs called {name}"))
            }
            Placement::SignatureBelow => format!(
                "{}def {name}",
                instruction_docstring(&format!("computes the {op} of its inputs"))
            ),
            Placement::NameFirst => format!(
                "def {name}(x, y):\n    \"\"\"\n    Write a function that computes the {op} of its inputs\n    \"\"\"\n"
            ),
            Placement::NoName => instruction_docstring(&format!("computes the {op} of its inputs")),
            Placement::NonInstructional => {
                format!("def {name}(x, y):\n    #returns the {op} of its inputs\n")
            }
        }
    }
}

pub fn attribute_prompt(cond: &AttributeCondition) -> TransformedPrompt {
    TransformedPrompt {
        probe_id: format!(
            "attribute:{}:{}:{}",
            cond.placement,
            cond.prompt_op,
            cond.function_name()
        ),
        experiment: Experiment::Attribute,
        base_task: None,
        condition: Condition::Attribute(*cond),
        prompt_text: cond.prompt_text(),
        detection_targets: vec![],
        reference_spec: Some(ReferenceSpec::Arithmetic {
            expected: Formula::Plain {
                binary: cond.prompt_op,
            },
            alternative: Formula::PlusConstant {
                binary: cond.name_op,
                number: cond.number,
            },
            inputs: probe_inputs(cond.prompt_op, None),
        }),
    }
}

/// 3 prompt operations x 3 name operations x 10 numbers.
pub fn attribute_prompts(placement: Placement) -> Vec<TransformedPrompt> {
    let mut out = Vec::with_capacity(90);
    for &prompt_op in BinaryOp::ALL {
        for &name_op in BinaryOp::ALL {
            for &number in &NAME_NUMBERS {
                out.push(attribute_prompt(&AttributeCondition {
                    prompt_op,
                    name_op,
                    number,
                    placement,
                }));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_instructional_square_sum() {
        let p = matheq_prompt(&MathEqCondition {
            binary_op: BinaryOp::Sum,
            unary_op: UnaryOp::Square,
            order: MathOrder::BinaryFirst,
            style: MathStyle::NonInstructional,
        });
        assert_eq!(p.prompt_text, "def square_sum(x, y):\n    #function squares the sum of its inputs\n");
    }

    #[test]
    fn instructional_wording() {
        let c = MathEqCondition {
            binary_op: BinaryOp::Sum,
            unary_op: UnaryOp::Square,
            order: MathOrder::UnaryFirst,
            style: MathStyle::Instructional,
        };
        assert_eq!(
            matheq_prompt(&c).prompt_text,
            "\"\"\"\nWrite a function that sums the squares of its inputs\n\"\"\"\n"
        );
        let c = MathEqCondition {
            unary_op: UnaryOp::SquareRoot,
            ..c
        };
        assert_eq!(c.description(), "sums the square roots of its inputs");
        assert_eq!(c.function_name(), "sum_square_roots");
        let c = MathEqCondition {
            order: MathOrder::BinaryFirst,
            ..c
        };
        assert_eq!(c.description(), "takes the square root of the sum of its inputs");
    }

    #[test]
    fn reference_arithmetic() {
        let unary_first = Formula::ordered(BinaryOp::Sum, UnaryOp::Square, MathOrder::UnaryFirst);
        let binary_first = Formula::ordered(BinaryOp::Sum, UnaryOp::Square, MathOrder::BinaryFirst);
        assert_eq!(unary_first.eval(2, 3), 13.0);
        assert_eq!(binary_first.eval(2, 3), 25.0);
        let roots = Formula::ordered(BinaryOp::Sum, UnaryOp::SquareRoot, MathOrder::UnaryFirst);
        assert_eq!(roots.eval(4, 9), 5.0);
        let named = Formula::PlusConstant {
            binary: BinaryOp::Product,
            number: 2,
        };
        assert_eq!(named.eval(2, 3), 8.0);
        assert_eq!(named.python(), "x * y + 2");
        assert_eq!(binary_first.python(), "(x + y) ** 2");
        assert_eq!(unary_first.python(), "(x) ** 2 + (y) ** 2");
    }

    #[test]
    fn attribute_templates() {
        let c = AttributeCondition {
            prompt_op: BinaryOp::Sum,
            name_op: BinaryOp::Product,
            number: 2,
            placement: Placement::Docstring,
        };
        assert_eq!(
            c.prompt_text(),
            "\"\"\"\nWrite a function that computes the sum of its inputs called product_plus_2\n\"\"\"\n"
        );
        let c = AttributeCondition {
            placement: Placement::NonInstructional,
            ..c
        };
        assert_eq!(c.prompt_text(), "def product_plus_2(x, y):\n    #returns the sum of its inputs\n");
        let c = AttributeCondition {
            placement: Placement::SignatureBelow,
            ..c
        };
        assert!(c.prompt_text().ends_with("\"\"\"\ndef product_plus_2"));
    }

    #[test]
    fn cardinalities() {
        for &order in MathOrder::ALL {
            for &style in MathStyle::ALL {
                assert_eq!(matheq_prompts(order, style).len(), 12);
            }
        }
        for &placement in Placement::ALL {
            let probes = attribute_prompts(placement);
            assert_eq!(probes.len(), 90);
            let ids: std::collections::HashSet<_> = probes.iter().map(|p| &p.probe_id).collect();
            assert_eq!(ids.len(), 90);
        }
    }

    #[test]
    fn square_root_difference_inputs_stay_real() {
        let inputs = probe_inputs(BinaryOp::Difference, Some(UnaryOp::SquareRoot));
        assert_eq!(inputs.len(), 7);
        assert!(inputs.iter().all(|[x, y]| x >= y));
        let f = Formula::ordered(BinaryOp::Difference, UnaryOp::SquareRoot, MathOrder::BinaryFirst);
        assert!(inputs.iter().all(|&[x, y]| f.eval(x, y).is_finite()));
    }
}
