//! Propositional FOIL: separate-and-conquer with greedy information gain.

use rayon::prelude::*;

use crate::data::{Dataset, Schema};
use crate::error::Result;
use crate::rules::{Literal, LiteralTest, MultiClassRuleModel, Rule, RuleSet};
use crate::search::{to_rule, Candidates, CodeLit, Columns, GrowStep, Grower};

pub use crate::search::foil_gain;

/// Equality literals `a = v` for every attribute not yet tested by `rule`,
/// in schema order and then value order.
pub fn candidate_literals(schema: &Schema, rule: &Rule) -> Vec<Literal> {
    schema
        .attributes
        .iter()
        .filter(|a| !rule.body.iter().any(|l| l.attribute == a.name))
        .flat_map(|a| a.values.iter().map(|v| Literal::new(a.name.clone(), LiteralTest::Equals(v.clone()))))
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FoilOutcome {
    pub rules: Vec<Vec<CodeLit>>,
    /// Rules abandoned because no literal could separate the covered rows.
    pub warnings: usize,
    /// Positives dropped together with abandoned rules.
    pub dropped: Vec<u32>,
    /// Every literal choice, tagged with the positives left when its rule began.
    pub trace: Vec<(Vec<u32>, GrowStep)>,
}

/// Learns rules separating `pos` from `neg` (row positions in `cols`).
pub fn foil_learn_codes(cols: &Columns, pos: &[u32], neg: &[u32], keep_trace: bool) -> FoilOutcome {
    let mut grower = Grower::new(cols, Candidates::Equality, false);
    let mut out = FoilOutcome::default();
    let mut remaining = pos.to_vec();
    while !remaining.is_empty() {
        let mut steps = Vec::new();
        let grown = grower.grow(&remaining, neg, &[], keep_trace.then_some(&mut steps));
        out.trace.extend(steps.into_iter().map(|s| (remaining.clone(), s)));
        if grown.stuck {
            out.warnings += 1;
            out.dropped.extend(&grown.covered_pos);
        } else {
            out.rules.push(grown.lits);
        }
        let covered = grown.covered_pos;
        remaining.retain(|r| covered.binary_search(r).is_err());
    }
    out
}

/// Learns one rule set for `target` from a labelled dataset.
pub fn foil_learn(ds: &Dataset, target: &str) -> Result<(RuleSet, FoilOutcome)> {
    let cols = Columns::new(ds);
    let code = ds
        .schema()
        .label_code(target)
        .ok_or_else(|| crate::error::Error::Argument(format!("unknown label {target:?}")))?;
    let (pos, neg) = split_rows(ds, code);
    let outcome = foil_learn_codes(&cols, &pos, &neg, false);
    let rules = outcome.rules.iter().map(|l| to_rule(l, ds.schema(), target)).collect();
    Ok((RuleSet { target: target.to_string(), rules }, outcome))
}

pub(crate) fn split_rows(ds: &Dataset, label: u32) -> (Vec<u32>, Vec<u32>) {
    let (p, n) = ds.one_vs_rest(label);
    (p.into_iter().map(|i| i as u32).collect(), n.into_iter().map(|i| i as u32).collect())
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub warnings: usize,
    pub dropped: usize,
}

/// One-vs-rest FOIL over every label of the training set.
pub fn train_foil(train: &Dataset) -> Result<(MultiClassRuleModel, TrainReport)> {
    let cols = Columns::new(train);
    let schema = train.schema();
    let outcomes: Vec<FoilOutcome> = (0..schema.labels.len() as u32)
        .into_par_iter()
        .map(|l| {
            let (pos, neg) = split_rows(train, l);
            foil_learn_codes(&cols, &pos, &neg, false)
        })
        .collect();
    let mut report = TrainReport::default();
    let rulesets = schema
        .labels
        .iter()
        .zip(&outcomes)
        .map(|(label, o)| {
            report.warnings += o.warnings;
            report.dropped += o.dropped.len();
            RuleSet { target: label.clone(), rules: o.rules.iter().map(|l| to_rule(l, schema, label)).collect() }
        })
        .collect();
    Ok((MultiClassRuleModel::new("foil", schema.label_name.clone(), rulesets)?, report))
}
