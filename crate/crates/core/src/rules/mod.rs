//! Rules, rule sets and multi-class rule models.

mod matching;
mod predict;
mod text;

pub use matching::{CompiledLiteral, CompiledRule};
pub use predict::{LabelBest, LearnerOutput, RulePredictor};
pub use text::{parse_rules, rule_text, serialize_rules};

use std::fmt;

use crate::data::{Dataset, Instance, Label, Schema, Value};
use crate::error::{Error, Result};
use crate::scalar::{ratio, Fraction};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LiteralTest {
    Equals(Value),
    /// Produced by tree paths that take the "else" branch of an equality split.
    NotEquals(Value),
    Leq(Value),
    Geq(Value),
    InRange(Value, Value),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub attribute: String,
    pub test: LiteralTest,
}

impl Literal {
    pub fn new(attribute: impl Into<String>, test: LiteralTest) -> Self {
        Literal { attribute: attribute.into(), test }
    }

    pub fn equals(attribute: impl Into<String>, value: impl Into<Value>) -> Self {
        Literal::new(attribute, LiteralTest::Equals(value.into()))
    }

    /// Missing values never satisfy a literal.
    pub fn holds(&self, value: Option<&Value>) -> bool {
        let Some(v) = value else { return false };
        match &self.test {
            LiteralTest::Equals(x) => v == x,
            LiteralTest::NotEquals(x) => v != x,
            LiteralTest::Leq(x) => v <= x,
            LiteralTest::Geq(x) => v >= x,
            LiteralTest::InRange(lo, hi) => lo <= v && v <= hi,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub target: Label,
    pub body: Vec<Literal>,
}

impl Rule {
    pub fn new(target: impl Into<Label>, body: Vec<Literal>) -> Self {
        Rule { target: target.into(), body }
    }

    pub fn len(&self) -> usize {
        self.body.len()
    }

    pub fn is_empty(&self) -> bool {
        self.body.is_empty()
    }

    /// Share of body literals the instance satisfies; an empty body gives 1.
    pub fn match_fraction(&self, schema: &Schema, dataset: &Dataset, inst: &Instance) -> Result<Fraction> {
        let mut satisfied = 0;
        for lit in &self.body {
            let attr = schema.attribute_index(&lit.attribute)?;
            if lit.holds(dataset.decode(inst, attr)) {
                satisfied += 1;
            }
        }
        Ok(if self.body.is_empty() { Fraction::from_integer(1) } else { ratio(satisfied, self.body.len()) })
    }
}

/// Disjunction of rules for one target label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleSet {
    pub target: Label,
    pub rules: Vec<Rule>,
}

impl RuleSet {
    pub fn new(target: impl Into<Label>) -> Self {
        RuleSet { target: target.into(), rules: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// True iff some rule is fully satisfied.
    pub fn binary_predict(&self, dataset: &Dataset, inst: &Instance) -> Result<bool> {
        let schema = dataset.schema();
        for rule in &self.rules {
            if rule.match_fraction(schema, dataset, inst)? == Fraction::from_integer(1) {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// One rule set per label, in label order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiClassRuleModel {
    pub learner: String,
    pub label_name: String,
    pub rulesets: Vec<RuleSet>,
}

impl MultiClassRuleModel {
    pub fn new(learner: impl Into<String>, label_name: impl Into<String>, rulesets: Vec<RuleSet>) -> Result<Self> {
        let model = MultiClassRuleModel { learner: learner.into(), label_name: label_name.into(), rulesets };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, rs) in self.rulesets.iter().enumerate() {
            if self.rulesets[..i].iter().any(|o| o.target == rs.target) {
                return Err(Error::Config(format!("label {:?} has two rule sets", rs.target)));
            }
            if let Some(r) = rs.rules.iter().find(|r| r.target != rs.target) {
                return Err(Error::Config(format!("rule for {:?} inside the rule set for {:?}", r.target, rs.target)));
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<Label> {
        self.rulesets.iter().map(|r| r.target.clone()).collect()
    }

    pub fn ruleset(&self, label: &str) -> Option<&RuleSet> {
        self.rulesets.iter().find(|r| r.target == label)
    }

    pub fn rule_count(&self) -> usize {
        self.rulesets.iter().map(RuleSet::len).sum()
    }

    pub fn literal_count(&self) -> usize {
        self.rulesets.iter().flat_map(|r| &r.rules).map(Rule::len).sum()
    }
}

impl fmt::Display for MultiClassRuleModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_rules(self))
    }
}
