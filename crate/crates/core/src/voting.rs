//! The explainable voting ensemble.
//!
//! Rule learners vote first. The decider is consulted only when the learners
//! do not agree on fully satisfied rules, and its answer is accepted only if a
//! learner can justify it by a complete or a sufficiently close partial match.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::data::{Dataset, Label};
use crate::decider::Decider;
use crate::error::{Error, Result};
use crate::rules::{rule_text, LearnerOutput, MultiClassRuleModel, Rule, RulePredictor};
use crate::scalar::{format_number, Fraction};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VotingConfig {
    pub threshold: Fraction,
    pub tolerance: Fraction,
    pub multiclass: bool,
}

impl VotingConfig {
    /// Default threshold 0.7 and tolerance 0.1; multiclass when more than two labels.
    pub fn for_labels(n_labels: usize) -> Self {
        VotingConfig { multiclass: n_labels > 2, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let zero = Fraction::from_integer(0);
        let one = Fraction::from_integer(1);
        if self.threshold <= zero || self.threshold > one {
            return Err(Error::Config(format!("threshold {} outside (0, 1]", self.threshold)));
        }
        if self.tolerance < zero || self.tolerance >= one {
            return Err(Error::Config(format!("tolerance {} outside [0, 1)", self.tolerance)));
        }
        Ok(())
    }
}

impl Default for VotingConfig {
    fn default() -> Self {
        VotingConfig { threshold: Fraction::new(7, 10), tolerance: Fraction::new(1, 10), multiclass: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Explainable,
    PartiallyExplainable,
    NotExplainable,
}

impl Level {
    pub fn of_step(step: u8) -> Level {
        match step {
            1 | 2 => Level::Explainable,
            3 => Level::PartiallyExplainable,
            _ => Level::NotExplainable,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Level::Explainable => "explainable",
            Level::PartiallyExplainable => "partially_explainable",
            Level::NotExplainable => "not_explainable",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Justification {
    pub learner: String,
    pub rule: Rule,
    pub fraction: Fraction,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VotingResult {
    pub id: u64,
    pub label: Option<Label>,
    pub step: u8,
    pub level: Level,
    pub justification: Option<Justification>,
}

impl VotingResult {
    fn decided(step: u8, label: Label, justification: Justification) -> Self {
        VotingResult { id: 0, label: Some(label), step, level: Level::of_step(step), justification: Some(justification) }
    }

    fn abstain() -> Self {
        VotingResult { id: 0, label: None, step: 4, level: Level::NotExplainable, justification: None }
    }
}

fn check_outputs(outputs: &[LearnerOutput]) -> Result<()> {
    if outputs.len() < 2 {
        return Err(Error::Config(format!("voting needs at least two rule learners, got {}", outputs.len())));
    }
    let labels = |o: &LearnerOutput| o.per_label_best.iter().map(|b| b.label.clone()).collect::<Vec<_>>();
    let first = labels(&outputs[0]);
    if let Some(o) = outputs.iter().find(|o| labels(o) != first) {
        return Err(Error::Config(format!("learner {} votes over a different label set", o.learner)));
    }
    Ok(())
}

/// Votes with the decider evaluated only if the learners do not settle it.
pub fn vote_lazy<F>(outputs: &[LearnerOutput], decider: F, cfg: &VotingConfig) -> Result<VotingResult>
where
    F: FnOnce() -> Result<Label>,
{
    check_outputs(outputs)?;

    if let Some((label, rule)) = &outputs[0].fully_justified {
        if outputs.iter().all(|o| o.justified_label() == Some(label)) {
            let j = Justification { learner: outputs[0].learner.clone(), rule: rule.clone(), fraction: Fraction::from_integer(1) };
            return Ok(VotingResult::decided(1, label.clone(), j));
        }
    }

    let decided = decider()?;
    if outputs[0].best(&decided).is_none() {
        return Err(Error::Config(format!("decider label {decided:?} is not a model label")));
    }

    for o in outputs {
        if let Some((label, rule)) = &o.fully_justified {
            if *label == decided {
                let j = Justification { learner: o.learner.clone(), rule: rule.clone(), fraction: Fraction::from_integer(1) };
                return Ok(VotingResult::decided(2, decided, j));
            }
        }
    }

    let mut accepted: Option<(&LearnerOutput, Fraction, &Rule)> = None;
    for o in outputs {
        let best = o.best(&decided).expect("label sets checked");
        let (f, m) = (best.fraction, o.max_fraction());
        let close = if cfg.multiclass { f >= m - cfg.tolerance } else { f == m };
        if f >= cfg.threshold && close && accepted.as_ref().is_none_or(|(_, g, _)| f > *g) {
            if let Some(rule) = &best.rule {
                accepted = Some((o, f, rule));
            }
        }
    }
    Ok(match accepted {
        Some((o, f, rule)) => {
            VotingResult::decided(3, decided, Justification { learner: o.learner.clone(), rule: rule.clone(), fraction: f })
        }
        None => VotingResult::abstain(),
    })
}

pub fn vote(outputs: &[LearnerOutput], decider_label: &str, cfg: &VotingConfig) -> Result<VotingResult> {
    vote_lazy(outputs, || Ok(decider_label.to_string()), cfg)
}

#[derive(Clone, Debug)]
pub struct EnsembleRun {
    pub results: Vec<VotingResult>,
    /// Per model, per instance.
    pub outputs: Vec<Vec<LearnerOutput>>,
    pub decider_calls: usize,
}

/// Votes over every instance of `test`. Results keep the dataset order.
pub fn run_ensemble(
    models: &[MultiClassRuleModel],
    decider: &dyn Decider,
    test: &Dataset,
    cfg: &VotingConfig,
) -> Result<EnsembleRun> {
    cfg.validate()?;
    let predictors = models.iter().map(|m| RulePredictor::new(m, test.schema())).collect::<Result<Vec<_>>>()?;
    let calls = AtomicUsize::new(0);
    let per_instance: Vec<(VotingResult, Vec<LearnerOutput>)> = test
        .instances()
        .par_iter()
        .map(|inst| {
            let outputs: Vec<LearnerOutput> = predictors.iter().map(|p| p.predict(inst)).collect();
            let decider = || {
                calls.fetch_add(1, Ordering::Relaxed);
                decider.predict(test, inst)
            };
            let mut r = vote_lazy(&outputs, decider, cfg)?;
            r.id = inst.id;
            Ok((r, outputs))
        })
        .collect::<Result<_>>()?;
    let mut outputs = vec![Vec::with_capacity(test.len()); models.len()];
    let mut results = Vec::with_capacity(test.len());
    for (r, outs) in per_instance {
        results.push(r);
        for (m, o) in outs.into_iter().enumerate() {
            outputs[m].push(o);
        }
    }
    Ok(EnsembleRun { results, outputs, decider_calls: calls.into_inner() })
}

/// One row per result: id, true_label, voted_label, step, level, learner, fraction, rule_text.
pub fn write_results_csv<W: Write>(results: &[VotingResult], test: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "true_label", "voted_label", "step", "level", "learner", "fraction", "rule_text"])
        .map_err(|e| Error::Io(e.into()))?;
    for (r, inst) in results.iter().zip(test.instances()) {
        let j = r.justification.as_ref();
        let record = [
            r.id.to_string(),
            test.label_of(inst).cloned().unwrap_or_default(),
            r.label.clone().unwrap_or_default(),
            r.step.to_string(),
            r.level.as_str().to_string(),
            j.map(|j| j.learner.clone()).unwrap_or_default(),
            j.map(|j| format_number(&j.fraction)).unwrap_or_default(),
            j.map(|j| rule_text(&j.rule, &test.schema().label_name)).unwrap_or_default(),
        ];
        w.write_record(record).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::{LabelBest, Literal};

    fn rule(label: &str, n: usize) -> Rule {
        Rule::new(label, (0..n).map(|i| Literal::equals(format!("a{i}"), "x")).collect())
    }

    fn output(name: &str, fractions: &[(&str, Fraction)], justified: Option<&str>) -> LearnerOutput {
        LearnerOutput {
            learner: name.into(),
            fully_justified: justified.map(|l| (l.to_string(), rule(l, 1))),
            per_label_best: fractions
                .iter()
                .map(|(l, f)| LabelBest { label: l.to_string(), fraction: *f, rule: Some(rule(l, 4)) })
                .collect(),
            predicted_label: justified.map(str::to_string),
        }
    }

    fn f(n: i64, d: i64) -> Fraction {
        Fraction::new(n, d)
    }

    #[test]
    fn agreeing_learners_skip_the_decider() {
        let one = f(1, 1);
        let a = output("foil", &[("5", one), ("6", f(1, 2))], Some("5"));
        let b = output("ripper", &[("5", one), ("6", f(1, 4))], Some("5"));
        let r = vote_lazy(&[a, b], || panic!("decider consulted"), &VotingConfig::default()).unwrap();
        assert_eq!((r.label.as_deref(), r.step, r.level), (Some("5"), 1, Level::Explainable));
        assert_eq!(r.justification.unwrap().learner, "foil");
    }

    #[test]
    fn decider_backed_by_full_rule_is_step_two() {
        let a = output("foil", &[("a", f(1, 1)), ("b", f(1, 2))], Some("a"));
        let b = output("ripper", &[("a", f(1, 2)), ("b", f(1, 1))], Some("b"));
        let r = vote(&[a, b], "b", &VotingConfig::for_labels(2)).unwrap();
        assert_eq!((r.label.as_deref(), r.step), (Some("b"), 2));
        assert_eq!(r.justification.unwrap().learner, "ripper");
    }

    #[test]
    fn binary_step_three_needs_the_maximum() {
        let cfg = VotingConfig::for_labels(2);
        let a = output("foil", &[("0", f(4, 5)), ("1", f(3, 4))], None);
        let b = output("ripper", &[("0", f(4, 5)), ("1", f(3, 4))], None);
        let r = vote(&[a.clone(), b.clone()], "1", &cfg).unwrap();
        assert_eq!((r.label, r.step, r.level), (None, 4, Level::NotExplainable));
        assert_eq!(vote(&[a, b], "0", &cfg).unwrap().step, 3);
    }

    #[test]
    fn multiclass_step_three_uses_the_tolerance() {
        let a = output("foil", &[("5", f(4, 5)), ("6", f(3, 4))], None);
        let b = output("ripper", &[("5", f(1, 2)), ("6", f(1, 2))], None);
        let r = vote(&[a, b], "6", &VotingConfig::default()).unwrap();
        assert_eq!((r.label.as_deref(), r.step, r.level), (Some("6"), 3, Level::PartiallyExplainable));
        let j = r.justification.unwrap();
        assert_eq!((j.learner.as_str(), j.fraction), ("foil", f(3, 4)));
    }

    #[test]
    fn below_threshold_abstains() {
        let a = output("foil", &[("a", f(69, 100)), ("b", f(1, 2))], None);
        let b = output("ripper", &[("a", f(69, 100)), ("b", f(1, 2))], None);
        assert_eq!(vote(&[a, b], "a", &VotingConfig::default()).unwrap().step, 4);
    }

    #[test]
    fn mismatched_labels_are_rejected() {
        let a = output("foil", &[("a", f(1, 1))], None);
        let b = output("ripper", &[("b", f(1, 1))], None);
        assert!(matches!(vote(&[a.clone(), b], "a", &VotingConfig::default()), Err(Error::Config(_))));
        assert!(matches!(vote(&[a], "a", &VotingConfig::default()), Err(Error::Config(_))));
    }
}
