//! Accuracy, macro precision/recall and the explainability distribution.

use std::collections::BTreeMap;

use crate::data::Label;
use crate::error::{Error, Result};
use crate::scalar::{ratio, Fraction};
use crate::voting::{Level, VotingResult};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassMetrics {
    pub label: Label,
    pub precision: Fraction,
    pub recall: Fraction,
    pub support: usize,
    pub predicted: usize,
    /// Nothing was predicted as this class, so its precision is reported as 0.
    pub no_predictions: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalReport {
    pub total: usize,
    pub correct: usize,
    pub abstentions: usize,
    pub accuracy: Fraction,
    pub macro_precision: Fraction,
    pub macro_recall: Fraction,
    pub per_class: Vec<ClassMetrics>,
    pub abstention_rate: Fraction,
    /// Present when the predictions came from the voting ensemble.
    pub explainability: Option<BTreeMap<Level, Fraction>>,
    /// Counts of steps 1 to 4, for ensemble results.
    pub steps: Option<[usize; 4]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalOptions {
    /// Count abstentions as wrong answers. When false, accuracy is over answered instances.
    pub abstentions_are_errors: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { abstentions_are_errors: true }
    }
}

/// Scores `predictions` against `truth` over the classes in `labels`.
pub fn evaluate(predictions: &[Option<Label>], truth: &[Label], labels: &[Label], opts: EvalOptions) -> Result<EvalReport> {
    if predictions.len() != truth.len() {
        return Err(Error::Argument(format!("{} predictions for {} true labels", predictions.len(), truth.len())));
    }
    let total = truth.len();
    let mut correct = 0;
    let mut abstentions = 0;
    let mut tp = vec![0usize; labels.len()];
    let mut predicted = vec![0usize; labels.len()];
    let mut support = vec![0usize; labels.len()];
    let index = |l: &str| labels.iter().position(|x| x == l);
    for (p, t) in predictions.iter().zip(truth) {
        let ti = index(t).ok_or_else(|| Error::Argument(format!("true label {t:?} is not a known class")))?;
        support[ti] += 1;
        match p {
            None => abstentions += 1,
            Some(p) => {
                let pi = index(p).ok_or_else(|| Error::Argument(format!("predicted label {p:?} is not a known class")))?;
                predicted[pi] += 1;
                if pi == ti {
                    tp[pi] += 1;
                    correct += 1;
                }
            }
        }
    }
    let per_class: Vec<ClassMetrics> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| ClassMetrics {
            label: l.clone(),
            precision: ratio(tp[i], predicted[i]),
            recall: ratio(tp[i], support[i]),
            support: support[i],
            predicted: predicted[i],
            no_predictions: predicted[i] == 0,
        })
        .collect();
    let k = labels.len().max(1) as i64;
    let macro_precision = per_class.iter().map(|c| c.precision).sum::<Fraction>() / k;
    let macro_recall = per_class.iter().map(|c| c.recall).sum::<Fraction>() / k;
    let denom = if opts.abstentions_are_errors { total } else { total - abstentions };
    Ok(EvalReport {
        total,
        correct,
        abstentions,
        accuracy: ratio(correct, denom),
        macro_precision,
        macro_recall,
        per_class,
        abstention_rate: ratio(abstentions, total),
        explainability: None,
        steps: None,
    })
}

/// [`evaluate`] plus the step counts and explainability levels of ensemble results.
pub fn evaluate_votes(results: &[VotingResult], truth: &[Label], labels: &[Label], opts: EvalOptions) -> Result<EvalReport> {
    let predictions: Vec<Option<Label>> = results.iter().map(|r| r.label.clone()).collect();
    let mut report = evaluate(&predictions, truth, labels, opts)?;
    let steps = step_counts(results);
    report.explainability = Some(explainability(&steps));
    report.steps = Some(steps);
    Ok(report)
}

pub fn step_counts(results: &[VotingResult]) -> [usize; 4] {
    let mut steps = [0usize; 4];
    for r in results {
        steps[(r.step.clamp(1, 4) - 1) as usize] += 1;
    }
    steps
}

pub fn explainability(steps: &[usize; 4]) -> BTreeMap<Level, Fraction> {
    let n: usize = steps.iter().sum();
    BTreeMap::from([
        (Level::Explainable, ratio(steps[0] + steps[1], n)),
        (Level::PartiallyExplainable, ratio(steps[2], n)),
        (Level::NotExplainable, ratio(steps[3], n)),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(s: &[&str]) -> Vec<Label> {
        s.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn binary_confusion() {
        // TP=3, FP=1, FN=2, TN=4 for class "p".
        let truth = labels(&["p", "p", "p", "p", "p", "n", "n", "n", "n", "n"]);
        let pred: Vec<Option<Label>> = ["p", "p", "p", "n", "n", "p", "n", "n", "n", "n"].iter().map(|s| Some(s.to_string())).collect();
        let r = evaluate(&pred, &truth, &labels(&["n", "p"]), EvalOptions::default()).unwrap();
        let p = &r.per_class[1];
        assert_eq!((p.precision, p.recall), (Fraction::new(3, 4), Fraction::new(3, 5)));
        assert_eq!(r.accuracy, Fraction::new(7, 10));
    }

    #[test]
    fn abstentions_and_unpredicted_classes() {
        let truth = labels(&["a", "b", "c"]);
        let pred = vec![Some("a".to_string()), None, Some("a".to_string())];
        let all = labels(&["a", "b", "c"]);
        let r = evaluate(&pred, &truth, &all, EvalOptions::default()).unwrap();
        assert_eq!(r.accuracy, Fraction::new(1, 3));
        assert_eq!(r.abstention_rate, Fraction::new(1, 3));
        assert!(r.per_class[1].no_predictions && r.per_class[2].no_predictions);
        let r = evaluate(&pred, &truth, &all, EvalOptions { abstentions_are_errors: false }).unwrap();
        assert_eq!(r.accuracy, Fraction::new(1, 2));
    }

    #[test]
    fn length_mismatch_is_an_argument_error() {
        let r = evaluate(&[None], &[], &labels(&["a"]), EvalOptions::default());
        assert!(matches!(r, Err(Error::Argument(_))));
    }

    #[test]
    fn explainability_sums_to_one() {
        let d = explainability(&[9635, 0, 346, 19]);
        assert_eq!(d.values().copied().sum::<Fraction>(), Fraction::from_integer(1));
        assert_eq!(d[&Level::Explainable], Fraction::new(9635, 10000));
        assert_eq!(d[&Level::NotExplainable], Fraction::new(19, 10000));
    }
}
