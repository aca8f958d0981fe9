use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use rulevote::data::{load_csv, Dataset};
use rulevote::decider::{Decider, OracleDecider};
use rulevote::experiment::{builtin_suite, render_csv, render_text, repeat_experiment, ExperimentConfig};
use rulevote::foil::train_foil;
use rulevote::gbt::{GbtConfig, GbtModel};
use rulevote::metrics::{evaluate_votes, EvalOptions, EvalReport};
use rulevote::preprocess::{apply_recipe, Recipe};
use rulevote::ripper::{train_ripper, RipperConfig};
use rulevote::rules::{parse_rules, serialize_rules, MultiClassRuleModel};
use rulevote::scalar::{format_number, fraction_to_f64, parse_number, Fraction};
use rulevote::tree::{train_tree, TreeConfig};
use rulevote::voting::{run_ensemble, write_results_csv, Level, VotingConfig};

#[derive(Parser)]
#[command(name = "rulevote", version, about = "Rule learners and an explainable voting ensemble")]
struct Cli {
    /// TOML file overriding the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for training and evaluation (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply a preprocessing recipe and write the result as CSV.
    Prep(PrepArgs),
    /// Train a rule learner or a decider.
    Train(TrainArgs),
    /// Run the voting ensemble over a test set.
    Vote(VoteArgs),
    /// Repeated end-to-end benchmark over one or more suites.
    Bench(BenchArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file (optionally .gz); relative paths also resolve against the data directory.
    #[arg(long)]
    data: PathBuf,
    #[arg(long = "label-col")]
    label_col: String,
    #[arg(long, env = "RULEVOTE_DATA_DIR")]
    data_dir: Option<PathBuf>,
}

#[derive(Args)]
struct PrepArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Built-in recipe name or recipe file.
    #[arg(long)]
    recipe: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Learner {
    Foil,
    Ripper,
    Tree,
    Gbt,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    learner: Learner,
    /// Recipe applied to the data before training.
    #[arg(long)]
    recipe: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// RIPPER optimization rounds.
    #[arg(long)]
    k: Option<usize>,
    /// Skip RIPPER's pass over positives left uncovered after optimization.
    #[arg(long)]
    no_residual: bool,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    min_leaf: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
}

#[derive(Args)]
struct VoteArgs {
    /// Comma-separated rule files, in voting order.
    #[arg(long, value_delimiter = ',', required = true)]
    models: Vec<PathBuf>,
    /// `oracle` or `gbt:<dump.json>`.
    #[arg(long)]
    decider: String,
    /// Preprocessed test CSV with true labels.
    #[arg(long)]
    test: PathBuf,
    #[arg(long = "label-col")]
    label_col: String,
    #[arg(long, env = "RULEVOTE_DATA_DIR")]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long)]
    tolerance: Option<String>,
    /// Force binary or multiclass Step 3 (default: multiclass iff more than two labels).
    #[arg(long)]
    multiclass: Option<bool>,
    /// Measure accuracy over answered instances only.
    #[arg(long)]
    exclude_abstentions: bool,
    /// Per-instance result CSV.
    #[arg(long)]
    out: PathBuf,
    /// Also write the evaluation report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated suite names.
    #[arg(long, value_delimiter = ',', required = true)]
    suite: Vec<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "RULEVOTE_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Writes bench.txt and bench.csv into this directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    data_dir: Option<PathBuf>,
    jobs: Option<usize>,
    #[serde(default)]
    voting: VotingSection,
    #[serde(default)]
    ripper: RipperSection,
    #[serde(default)]
    tree: TreeSection,
    #[serde(default)]
    gbt: GbtSection,
    #[serde(default)]
    bench: BenchSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct VotingSection {
    threshold: Option<NumberText>,
    tolerance: Option<NumberText>,
    abstentions_are_errors: Option<bool>,
}

/// Accepts `0.7`, `"0.7"` or `"7/10"`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum NumberText {
    Float(f64),
    Text(String),
}

impl NumberText {
    fn to_fraction(&self) -> Result<Fraction> {
        match self {
            NumberText::Text(s) => parse_fraction(s),
            NumberText::Float(f) => parse_fraction(&f.to_string()),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RipperSection {
    k: Option<usize>,
    residual_pass: Option<bool>,
    dl_slack: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeSection {
    max_depth: Option<usize>,
    min_leaf: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GbtSection {
    rounds: Option<usize>,
    depth: Option<usize>,
    learning_rate: Option<f64>,
    lambda: Option<f64>,
    min_child_weight: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchSection {
    reps: Option<usize>,
    seed: Option<u64>,
}

fn parse_fraction(s: &str) -> Result<Fraction> {
    parse_number(s).with_context(|| format!("not a number: {s:?}"))
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    fn experiment(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        let r = &self.ripper;
        cfg.ripper = RipperConfig {
            k: r.k.unwrap_or(cfg.ripper.k),
            residual_pass: r.residual_pass.unwrap_or(cfg.ripper.residual_pass),
            dl_slack: r.dl_slack.unwrap_or(cfg.ripper.dl_slack),
            ..cfg.ripper
        };
        cfg.tree.max_depth = self.tree.max_depth.or(cfg.tree.max_depth);
        cfg.tree.min_leaf = self.tree.min_leaf.unwrap_or(cfg.tree.min_leaf);
        let g = &self.gbt;
        cfg.gbt = GbtConfig {
            rounds: g.rounds.unwrap_or(cfg.gbt.rounds),
            depth: g.depth.unwrap_or(cfg.gbt.depth),
            learning_rate: g.learning_rate.unwrap_or(cfg.gbt.learning_rate),
            lambda: g.lambda.unwrap_or(cfg.gbt.lambda),
            min_child_weight: g.min_child_weight.unwrap_or(cfg.gbt.min_child_weight),
            ..cfg.gbt
        };
        if let Some(t) = &self.voting.threshold {
            cfg.threshold = t.to_fraction()?;
        }
        if let Some(t) = &self.voting.tolerance {
            cfg.tolerance = t.to_fraction()?;
        }
        if let Some(a) = self.voting.abstentions_are_errors {
            cfg.eval.abstentions_are_errors = a;
        }
        Ok(cfg)
    }
}

fn resolve(path: &Path, data_dir: Option<&Path>) -> PathBuf {
    match data_dir {
        Some(dir) if !path.exists() && path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

fn data_dir<'a>(flag: &'a Option<PathBuf>, file: &'a FileConfig) -> Option<&'a Path> {
    flag.as_deref().or(file.data_dir.as_deref())
}

fn load(args: &DataArgs, file: &FileConfig) -> Result<Dataset> {
    let path = resolve(&args.data, data_dir(&args.data_dir, file));
    load_csv(&path, &args.label_col).with_context(|| format!("loading {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn prep(args: &PrepArgs, file: &FileConfig) -> Result<()> {
    let ds = load(&args.data, file)?;
    let recipe = Recipe::resolve(&args.recipe)?;
    let out = apply_recipe(&ds, &recipe)?;
    let f = fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    out.write_csv(std::io::BufWriter::new(f))?;
    eprintln!("wrote {} rows, {} attributes to {}", out.len(), out.schema().len(), args.out.display());
    Ok(())
}

fn train(args: &TrainArgs, file: &FileConfig) -> Result<()> {
    let mut ds = load(&args.data, file)?;
    if let Some(r) = &args.recipe {
        ds = apply_recipe(&ds, &Recipe::resolve(r)?)?;
    }
    let base = file.experiment()?;
    let text = match args.learner {
        Learner::Foil => {
            let (model, report) = train_foil(&ds)?;
            if report.warnings > 0 {
                eprintln!("foil: {} rules abandoned, {} positives dropped", report.warnings, report.dropped);
            }
            serialize_rules(&model)
        }
        Learner::Ripper => {
            let cfg = RipperConfig {
                k: args.k.unwrap_or(base.ripper.k),
                seed: args.seed,
                residual_pass: !args.no_residual && base.ripper.residual_pass,
                ..base.ripper
            };
            serialize_rules(&train_ripper(&ds, &cfg)?.0)
        }
        Learner::Tree => {
            let cfg = TreeConfig {
                max_depth: args.max_depth.or(base.tree.max_depth),
                min_leaf: args.min_leaf.unwrap_or(base.tree.min_leaf),
                seed: args.seed,
            };
            serialize_rules(&train_tree(&ds, &cfg)?.to_rules())
        }
        Learner::Gbt => {
            let cfg = GbtConfig {
                rounds: args.rounds.unwrap_or(base.gbt.rounds),
                depth: args.depth.unwrap_or(base.gbt.depth),
                learning_rate: args.learning_rate.unwrap_or(base.gbt.learning_rate),
                seed: args.seed,
                ..base.gbt
            };
            let model = GbtModel::<f64>::train(&ds, &cfg)?;
            if model.degenerate {
                eprintln!("gbt: training data has a single class; the model is constant");
            }
            model.to_json()?
        }
    };
    write_file(&args.out, &text)?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn report_text(r: &EvalReport) -> String {
    let pct = |f: &Fraction| format!("{:.2}", 100.0 * fraction_to_f64(f));
    let mut s = format!(
        "instances        {}\naccuracy         {}\nmacro precision  {}\nmacro recall     {}\nabstentions      {}\n",
        r.total,
        pct(&r.accuracy),
        pct(&r.macro_precision),
        pct(&r.macro_recall),
        pct(&r.abstention_rate)
    );
    if let (Some(steps), Some(levels)) = (&r.steps, &r.explainability) {
        s.push_str(&format!("steps 1/2/3/4    {}/{}/{}/{}\n", steps[0], steps[1], steps[2], steps[3]));
        for level in [Level::Explainable, Level::PartiallyExplainable, Level::NotExplainable] {
            s.push_str(&format!("{:<17}{}\n", level.as_str(), pct(&levels[&level])));
        }
    }
    s.push_str("\nclass  precision  recall  support\n");
    for c in &r.per_class {
        let flag = if c.no_predictions { "  (never predicted)" } else { "" };
        s.push_str(&format!("{}  {}  {}  {}{flag}\n", c.label, pct(&c.precision), pct(&c.recall), c.support));
    }
    s
}

fn vote(args: &VoteArgs, file: &FileConfig) -> Result<()> {
    let dir = data_dir(&args.data_dir, file);
    let test_path = resolve(&args.test, dir);
    let test = load_csv(&test_path, &args.label_col).with_context(|| format!("loading {}", test_path.display()))?;
    let models: Vec<MultiClassRuleModel> = args
        .models
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_rules(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<Result<_>>()?;
    let decider: Box<dyn Decider> = match args.decider.split_once(':') {
        None if args.decider == "oracle" => Box::new(OracleDecider::from_dataset(&test)),
        Some(("gbt", path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            Box::new(GbtModel::<f64>::from_json(&text)?)
        }
        _ => bail!("unknown decider {:?}; expected oracle or gbt:<path>", args.decider),
    };
    let base = file.experiment()?;
    let labels = models.first().map(|m| m.labels()).unwrap_or_default();
    let cfg = VotingConfig {
        threshold: args.threshold.as_deref().map(parse_fraction).transpose()?.unwrap_or(base.threshold),
        tolerance: args.tolerance.as_deref().map(parse_fraction).transpose()?.unwrap_or(base.tolerance),
        multiclass: args.multiclass.unwrap_or(labels.len() > 2),
    };
    let run = run_ensemble(&models, decider.as_ref(), &test, &cfg)?;
    let f = fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_results_csv(&run.results, &test, std::io::BufWriter::new(f))?;

    let truth = test
        .instances()
        .iter()
        .map(|i| test.label_of(i).cloned().with_context(|| format!("instance {} has no label", i.id)))
        .collect::<Result<Vec<_>>>()?;
    let opts = EvalOptions { abstentions_are_errors: !args.exclude_abstentions && base.eval.abstentions_are_errors };
    let report = evaluate_votes(&run.results, &truth, &labels, opts)?;
    let mut text = format!(
        "decider {} (consulted {} times), threshold {}, tolerance {}\n",
        decider.name(),
        run.decider_calls,
        format_number(&cfg.threshold),
        format_number(&cfg.tolerance)
    );
    text.push_str(&report_text(&report));
    print!("{text}");
    if let Some(p) = &args.report {
        write_file(p, &text)?;
    }
    Ok(())
}

fn bench(args: &BenchArgs, file: &FileConfig) -> Result<()> {
    let cfg = file.experiment()?;
    let reps = args.reps.or(file.bench.reps).unwrap_or(10);
    let seed = args.seed.or(file.bench.seed).unwrap_or(0);
    let dir = data_dir(&args.data_dir, file).unwrap_or(Path::new("data"));
    let mut experiments = Vec::new();
    for name in &args.suite {
        let suite = builtin_suite(name)?;
        let (ds, recipe) = suite.load(dir)?;
        eprintln!("{name}: {} instances, {} attributes, {reps} repetitions", ds.len(), ds.schema().len());
        experiments.push(repeat_experiment(name, &ds, &recipe, &cfg, suite.test_fraction, reps, seed)?);
    }
    let text = render_text(&experiments);
    print!("{text}");
    if let Some(out) = &args.out_dir {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        write_file(&out.join("bench.txt"), &text)?;
        write_file(&out.join("bench.csv"), &render_csv(&experiments))?;
    }
    std::io::stdout().flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    if let Some(n) = cli.jobs.or(file.jobs) {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Prep(a) => prep(a, &file),
        Command::Train(a) => train(a, &file),
        Command::Vote(a) => vote(a, &file),
        Command::Bench(a) => bench(a, &file),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
