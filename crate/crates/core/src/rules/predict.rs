//! Multi-class prediction with partial-match conflict resolution.

use rayon::prelude::*;

use crate::data::{Dataset, Instance, Label, Schema};
use crate::error::Result;
use crate::scalar::{ratio, Fraction};

use super::{CompiledRule, MultiClassRuleModel, Rule};

/// Best-matching rule of one label for one instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelBest {
    pub label: Label,
    pub fraction: Fraction,
    /// `None` only when the label has no rules (fraction 0).
    pub rule: Option<Rule>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LearnerOutput {
    pub learner: String,
    pub fully_justified: Option<(Label, Rule)>,
    /// One entry per model label, in model order.
    pub per_label_best: Vec<LabelBest>,
    pub predicted_label: Option<Label>,
}

impl LearnerOutput {
    pub fn best(&self, label: &str) -> Option<&LabelBest> {
        self.per_label_best.iter().find(|b| b.label == label)
    }

    pub fn max_fraction(&self) -> Fraction {
        self.per_label_best.iter().map(|b| b.fraction).max().unwrap_or_default()
    }

    pub fn justified_label(&self) -> Option<&Label> {
        self.fully_justified.as_ref().map(|(l, _)| l)
    }
}

/// A model compiled against a schema, ready for repeated prediction.
pub struct RulePredictor<'m> {
    model: &'m MultiClassRuleModel,
    compiled: Vec<Vec<CompiledRule>>,
}

#[derive(Clone, Copy)]
struct Scored {
    satisfied: usize,
    len: usize,
    index: usize,
}

impl Scored {
    fn fraction(&self) -> Fraction {
        if self.len == 0 {
            Fraction::from_integer(1)
        } else {
            ratio(self.satisfied, self.len)
        }
    }
}

impl<'m> RulePredictor<'m> {
    pub fn new(model: &'m MultiClassRuleModel, schema: &Schema) -> Result<Self> {
        let compiled = model
            .rulesets
            .iter()
            .map(|rs| rs.rules.iter().map(|r| CompiledRule::compile(r, schema)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        Ok(RulePredictor { model, compiled })
    }

    pub fn model(&self) -> &MultiClassRuleModel {
        self.model
    }

    pub fn predict(&self, inst: &Instance) -> LearnerOutput {
        let n_labels = self.compiled.len();
        let mut best: Vec<Option<Scored>> = vec![None; n_labels];
        let mut longest_fired: Vec<Option<Scored>> = vec![None; n_labels];
        for (li, rules) in self.compiled.iter().enumerate() {
            for (index, rule) in rules.iter().enumerate() {
                let s = Scored { satisfied: rule.satisfied(inst), len: rule.len(), index };
                let better = match best[li] {
                    None => true,
                    Some(b) => (s.fraction(), s.len) > (b.fraction(), b.len),
                };
                if better {
                    best[li] = Some(s);
                }
                if s.satisfied == s.len && longest_fired[li].is_none_or(|f| s.len > f.len) {
                    longest_fired[li] = Some(s);
                }
            }
        }

        let rule_of = |li: usize, s: Scored| self.model.rulesets[li].rules[s.index].clone();
        let fired: Vec<usize> = (0..n_labels).filter(|&li| longest_fired[li].is_some()).collect();
        let winner = match fired.as_slice() {
            [] => None,
            [only] => Some(*only),
            many => {
                let top = many.iter().map(|&li| longest_fired[li].unwrap().len).max().unwrap();
                let at_top: Vec<usize> = many.iter().copied().filter(|&li| longest_fired[li].unwrap().len == top).collect();
                (at_top.len() == 1).then(|| at_top[0])
            }
        };
        let fully_justified = winner.map(|li| (self.model.rulesets[li].target.clone(), rule_of(li, longest_fired[li].unwrap())));

        let per_label_best: Vec<LabelBest> = (0..n_labels)
            .map(|li| LabelBest {
                label: self.model.rulesets[li].target.clone(),
                fraction: best[li].map(|s| s.fraction()).unwrap_or_default(),
                rule: best[li].map(|s| rule_of(li, s)),
            })
            .collect();

        let predicted_label = match &fully_justified {
            Some((label, _)) => Some(label.clone()),
            None => {
                let key = |li: usize| (per_label_best[li].fraction, best[li].map_or(0, |s| s.len));
                let top = (0..n_labels).map(key).max();
                let leaders: Vec<usize> = (0..n_labels).filter(|&li| Some(key(li)) == top).collect();
                (leaders.len() == 1).then(|| per_label_best[leaders[0]].label.clone())
            }
        };

        LearnerOutput { learner: self.model.learner.clone(), fully_justified, per_label_best, predicted_label }
    }

    pub fn predict_all(&self, dataset: &Dataset) -> Vec<LearnerOutput> {
        dataset.instances().par_iter().map(|i| self.predict(i)).collect()
    }
}

impl MultiClassRuleModel {
    pub fn predict(&self, dataset: &Dataset, inst: &Instance) -> Result<LearnerOutput> {
        Ok(RulePredictor::new(self, dataset.schema())?.predict(inst))
    }

    pub fn predict_all(&self, dataset: &Dataset) -> Result<Vec<LearnerOutput>> {
        Ok(RulePredictor::new(self, dataset.schema())?.predict_all(dataset))
    }
}
