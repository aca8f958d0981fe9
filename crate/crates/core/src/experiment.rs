//! End-to-end benchmark runs: split, preprocess, train, vote, evaluate.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::data::{load_csv, split, Dataset, Label};
use crate::decider::OracleDecider;
use crate::error::{Error, Result};
use crate::foil::train_foil;
use crate::gbt::{GbtConfig, GbtModel};
use crate::metrics::{evaluate, evaluate_votes, EvalOptions, EvalReport};
use crate::preprocess::{apply_recipe_pair, Recipe};
use crate::ripper::{train_ripper, RipperConfig};
use crate::rules::MultiClassRuleModel;
use crate::scalar::{fraction_to_f64, Fraction};
use crate::tree::{ambiguity_rate, train_tree, TreeConfig};
use crate::voting::{run_ensemble, VotingConfig, VotingResult};

/// A named benchmark: data file, label column and preprocessing recipe.
#[derive(Clone, Debug, PartialEq)]
pub struct Suite {
    pub name: String,
    pub file: String,
    pub label_col: String,
    pub recipe: String,
    pub test_fraction: Fraction,
}

pub const SUITE_NAMES: [&str; 7] = ["spambase", "heart", "diabetes", "covid", "covid_restricted", "mnist", "fashion_mnist"];

pub fn builtin_suite(name: &str) -> Result<Suite> {
    let (file, label) = match name {
        "spambase" => ("spambase.csv", "Type"),
        "heart" => ("heart.csv", "HeartDisease"),
        "diabetes" => ("diabetes.csv", "Diabetes"),
        "covid" | "covid_restricted" => ("covid.csv", "Covid"),
        "mnist" => ("mnist_5k.csv.gz", "Digit"),
        "fashion_mnist" => ("fashion_mnist_5k.csv.gz", "Label"),
        _ => return Err(Error::Argument(format!("unknown suite {name:?}; expected one of {}", SUITE_NAMES.join(", ")))),
    };
    Ok(Suite {
        name: name.into(),
        file: file.into(),
        label_col: label.into(),
        recipe: name.into(),
        test_fraction: Fraction::new(1, 5),
    })
}

impl Suite {
    pub fn load(&self, data_dir: &Path) -> Result<(Dataset, Recipe)> {
        let path = data_dir.join(&self.file);
        if !path.exists() {
            return Err(Error::Argument(format!("data file {} not found", path.display())));
        }
        Ok((load_csv(&path, &self.label_col)?, Recipe::resolve(&self.recipe)?))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub ripper: RipperConfig,
    pub tree: TreeConfig,
    pub gbt: GbtConfig,
    pub threshold: Fraction,
    pub tolerance: Fraction,
    pub eval: EvalOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let v = VotingConfig::default();
        ExperimentConfig {
            ripper: RipperConfig::default(),
            tree: TreeConfig::default(),
            gbt: GbtConfig::default(),
            threshold: v.threshold,
            tolerance: v.tolerance,
            eval: EvalOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Foil,
    Ripper,
    Tree,
    Decider,
    Voting,
    VotingOracle,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Foil, Method::Ripper, Method::Tree, Method::Decider, Method::Voting, Method::VotingOracle];

    pub fn name(self) -> &'static str {
        match self {
            Method::Foil => "FOIL",
            Method::Ripper => "RIPPER",
            Method::Tree => "Tree",
            Method::Decider => "Decider",
            Method::Voting => "Voting",
            Method::VotingOracle => "Voting+T",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub seed: u64,
    /// One report per [`Method::ALL`] entry, same order.
    pub reports: Vec<EvalReport>,
    /// FOIL, RIPPER and tree ambiguity; only computed for more than three labels.
    pub ambiguity: Option<[Fraction; 3]>,
    pub decider_calls: usize,
    /// Oracle-driven step 2/3 answers that disagree with the truth. Zero by construction.
    pub oracle_violations: usize,
    pub voting: Vec<VotingResult>,
    pub oracle_voting: Vec<VotingResult>,
    pub foil_warnings: usize,
}

impl RunResult {
    pub fn report(&self, m: Method) -> &EvalReport {
        &self.reports[Method::ALL.iter().position(|x| *x == m).expect("every method")]
    }
}

/// Trained artefacts of one run, for callers that want the models themselves.
pub struct Trained {
    pub foil: MultiClassRuleModel,
    pub ripper: MultiClassRuleModel,
    pub tree: MultiClassRuleModel,
    pub decider: GbtModel<f64>,
    pub foil_warnings: usize,
}

pub fn train_all(train: &Dataset, cfg: &ExperimentConfig, seed: u64) -> Result<Trained> {
    let (foil, report) = train_foil(train)?;
    let (ripper, _) = train_ripper(train, &RipperConfig { seed, ..cfg.ripper.clone() })?;
    let tree = train_tree(train, &TreeConfig { seed, ..cfg.tree.clone() })?.to_rules();
    let decider = GbtModel::train(train, &GbtConfig { seed, ..cfg.gbt.clone() })?;
    Ok(Trained { foil, ripper, tree, decider, foil_warnings: report.warnings })
}

/// One split with `seed`, evaluated for every method.
pub fn run_once(dataset: &Dataset, recipe: &Recipe, cfg: &ExperimentConfig, test_fraction: Fraction, seed: u64) -> Result<RunResult> {
    let (train, test) = split(dataset, test_fraction, seed)?;
    let (train, test) = apply_recipe_pair(&train, &test, recipe)?;
    let labels = train.schema().labels.clone();
    let truth: Vec<Label> = test
        .instances()
        .iter()
        .map(|i| test.label_of(i).cloned().ok_or_else(|| Error::Argument(format!("test instance {} has no label", i.id))))
        .collect::<Result<_>>()?;
    let t = train_all(&train, cfg, seed)?;
    let vcfg = VotingConfig { threshold: cfg.threshold, tolerance: cfg.tolerance, multiclass: labels.len() > 2 };
    let models = [t.foil.clone(), t.ripper.clone()];

    let voting = run_ensemble(&models, &t.decider, &test, &vcfg)?;
    let oracle = OracleDecider::from_dataset(&test);
    let oracle_run = run_ensemble(&models, &oracle, &test, &vcfg)?;

    let learner = |outs: &[crate::rules::LearnerOutput]| -> Vec<Option<Label>> { outs.iter().map(|o| o.predicted_label.clone()).collect() };
    let tree_pred: Vec<Option<Label>> = t.tree.predict_all(&test)?.into_iter().map(|o| o.predicted_label).collect();
    let decider_pred: Vec<Option<Label>> =
        test.instances().iter().map(|i| t.decider.predict(&test, i).map(Some)).collect::<Result<_>>()?;

    let plain = |p: &[Option<Label>]| evaluate(p, &truth, &labels, cfg.eval);
    let reports = vec![
        plain(&learner(&voting.outputs[0]))?,
        plain(&learner(&voting.outputs[1]))?,
        plain(&tree_pred)?,
        plain(&decider_pred)?,
        evaluate_votes(&voting.results, &truth, &labels, cfg.eval)?,
        evaluate_votes(&oracle_run.results, &truth, &labels, cfg.eval)?,
    ];
    let oracle_violations = oracle_run
        .results
        .iter()
        .zip(&truth)
        .filter(|(r, t)| matches!(r.step, 2 | 3) && r.label.as_ref() != Some(*t))
        .count();
    let ambiguity = if labels.len() > 3 {
        let a = |m: &MultiClassRuleModel| ambiguity_rate(m, &test, cfg.threshold, cfg.tolerance);
        Some([a(&t.foil)?, a(&t.ripper)?, a(&t.tree)?])
    } else {
        None
    };
    Ok(RunResult {
        seed,
        reports,
        ambiguity,
        decider_calls: voting.decider_calls,
        oracle_violations,
        voting: voting.results,
        oracle_voting: oracle_run.results,
        foil_warnings: t.foil_warnings,
    })
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub suite: String,
    pub runs: Vec<RunResult>,
}

/// Runs seeds `base_seed .. base_seed + repetitions` concurrently.
pub fn repeat_experiment(
    suite: &str,
    dataset: &Dataset,
    recipe: &Recipe,
    cfg: &ExperimentConfig,
    test_fraction: Fraction,
    repetitions: usize,
    base_seed: u64,
) -> Result<Experiment> {
    if repetitions == 0 {
        return Err(Error::Argument("repetitions must be positive".into()));
    }
    let runs = (0..repetitions as u64)
        .into_par_iter()
        .map(|i| run_once(dataset, recipe, cfg, test_fraction, base_seed + i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Experiment { suite: suite.into(), runs })
}

/// Mean and sample standard deviation, in percent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

pub fn stat(values: impl IntoIterator<Item = Fraction>) -> Stat {
    let v: Vec<f64> = values.into_iter().map(|f| 100.0 * fraction_to_f64(&f)).collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    Stat { mean, std }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    Precision,
    Recall,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
        }
    }

    fn of(self, r: &EvalReport) -> Fraction {
        match self {
            Metric::Accuracy => r.accuracy,
            Metric::Precision => r.macro_precision,
            Metric::Recall => r.macro_recall,
        }
    }
}

impl Experiment {
    pub fn metric(&self, method: Method, metric: Metric) -> Stat {
        stat(self.runs.iter().map(|r| metric.of(r.report(method))))
    }

    /// Explainable, partially explainable and not explainable shares of the voting runs.
    pub fn explainability(&self) -> [Stat; 3] {
        let share = |i: usize| {
            stat(self.runs.iter().map(|r| {
                let steps = r.report(Method::Voting).steps.expect("voting report");
                let n = steps.iter().sum::<usize>().max(1) as i64;
                let c = match i {
                    0 => steps[0] + steps[1],
                    1 => steps[2],
                    _ => steps[3],
                };
                Fraction::new(c as i64, n)
            }))
        };
        [share(0), share(1), share(2)]
    }

    pub fn ambiguity(&self) -> Option<[Stat; 3]> {
        let all: Option<Vec<[Fraction; 3]>> = self.runs.iter().map(|r| r.ambiguity).collect();
        let all = all?;
        Some([0, 1, 2].map(|i| stat(all.iter().map(|a| a[i]))))
    }
}

fn cell(s: Stat, reps: usize) -> String {
    if reps > 1 {
        format!("{:.2} ± {:.2}", s.mean, s.std)
    } else {
        format!("{:.2}", s.mean)
    }
}

fn table(title: &str, header: &[&str], rows: &[(String, Vec<String>)]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for (name, cells) in rows {
        widths[0] = widths[0].max(name.chars().count());
        for (i, c) in cells.iter().enumerate() {
            widths[i + 1] = widths[i + 1].max(c.chars().count());
        }
    }
    let mut out = format!("{title}\n");
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            let pad = widths[i] - c.chars().count();
            if i == 0 {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str("  ");
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            }
        }
        s.push('\n');
        s
    };
    out.push_str(&line(header.to_vec()));
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for (name, cells) in rows {
        let mut all = vec![name.as_str()];
        all.extend(cells.iter().map(String::as_str));
        out.push_str(&line(all));
    }
    out
}

/// Aligned plain-text report: accuracy, precision, recall, explainability and,
/// where computed, ambiguity. Values are percentages over all repetitions.
pub fn render_text(experiments: &[Experiment]) -> String {
    let mut methods: Vec<&str> = vec!["Data"];
    methods.extend(Method::ALL.iter().map(|m| m.name()));
    let mut out = String::new();
    for metric in [Metric::Accuracy, Metric::Precision, Metric::Recall] {
        let rows: Vec<(String, Vec<String>)> = experiments
            .iter()
            .map(|e| (e.suite.clone(), Method::ALL.iter().map(|&m| cell(e.metric(m, metric), e.runs.len())).collect()))
            .collect();
        let title = if metric == Metric::Accuracy { "Accuracy (%)".to_string() } else { format!("Macro {} (%)", metric.name()) };
        out.push_str(&table(&title, &methods, &rows));
        out.push('\n');
    }
    let rows: Vec<(String, Vec<String>)> = experiments
        .iter()
        .map(|e| (e.suite.clone(), e.explainability().iter().map(|s| cell(*s, e.runs.len())).collect()))
        .collect();
    out.push_str(&table("Explainability of voting predictions (%)", &["Data", "Explainable", "Part. Explainable", "Not Explainable"], &rows));
    let rows: Vec<(String, Vec<String>)> = experiments
        .iter()
        .filter_map(|e| e.ambiguity().map(|a| (e.suite.clone(), a.iter().map(|s| cell(*s, e.runs.len())).collect())))
        .collect();
    if !rows.is_empty() {
        out.push('\n');
        out.push_str(&table("Test instances with more than 3 justifiable labels (%)", &["Data", "FOIL", "RIPPER", "Tree"], &rows));
    }
    out
}

/// Long-format CSV: suite, report, column, mean, std, reps.
pub fn render_csv(experiments: &[Experiment]) -> String {
    let mut out = String::from("suite,report,column,mean,std,reps\n");
    for e in experiments {
        let n = e.runs.len();
        for metric in [Metric::Accuracy, Metric::Precision, Metric::Recall] {
            for m in Method::ALL {
                let s = e.metric(m, metric);
                let _ = writeln!(out, "{},{},{},{:.4},{:.4},{n}", e.suite, metric.name(), m.name(), s.mean, s.std);
            }
        }
        for (name, s) in ["explainable", "partially_explainable", "not_explainable"].iter().zip(e.explainability()) {
            let _ = writeln!(out, "{},explainability,{name},{:.4},{:.4},{n}", e.suite, s.mean, s.std);
        }
        if let Some(a) = e.ambiguity() {
            for (name, s) in ["FOIL", "RIPPER", "Tree"].iter().zip(a) {
                let _ = writeln!(out, "{},ambiguity,{name},{:.4},{:.4},{n}", e.suite, s.mean, s.std);
            }
        }
    }
    out
}
