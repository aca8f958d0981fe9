use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rulevote::data::{read_csv, split, Dataset, Instance, Label, Value};
use rulevote::decider::{Decider, OracleDecider};
use rulevote::foil::{foil_learn_codes, train_foil};
use rulevote::gbt::{GbtConfig, GbtModel};
use rulevote::metrics::{evaluate, EvalOptions};
use rulevote::preprocess::{apply_recipe, apply_recipe_pair, Recipe};
use rulevote::ripper::{ripper_codes, train_ripper, RipperConfig};
use rulevote::rules::{Literal, LiteralTest, MultiClassRuleModel, Rule, RuleSet};
use rulevote::scalar::Fraction;
use rulevote::search::Columns;
use rulevote::tree::{train_tree, SplitTest, TreeConfig, TreeNode};
use rulevote::voting::{run_ensemble, Level, VotingConfig};
use rulevote::Number;

/// Random table with numeric columns `n*` and nominal columns `s*`; `?` marks missing cells.
fn table(seed: u64, rows: usize, numeric: usize, nominal: usize, labels: u32, missing: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut header: Vec<String> = (0..numeric).map(|i| format!("n{i}")).collect();
    header.extend((0..nominal).map(|i| format!("s{i}")));
    header.push("y".into());
    let mut csv = header.join(",") + "\n";
    for _ in 0..rows {
        let mut cells = Vec::new();
        for _ in 0..numeric {
            cells.push(if rng.random_bool(missing) {
                "?".to_string()
            } else {
                format!("{}.{}", rng.random_range(0..300), rng.random_range(0..10))
            });
        }
        for _ in 0..nominal {
            cells.push(if rng.random_bool(missing) { "?".into() } else { ["r", "g", "b"][rng.random_range(0..3)].to_string() });
        }
        cells.push(format!("c{}", rng.random_range(0..labels)));
        csv.push_str(&(cells.join(",") + "\n"));
    }
    read_csv(csv.as_bytes(), "y").unwrap()
}

/// Small-valued table where labels depend on the first two columns, so learners find structure.
fn structured(seed: u64, rows: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("a,b,c,d,y\n");
    for _ in 0..rows {
        let v: Vec<u32> = (0..4).map(|_| rng.random_range(0..4)).collect();
        let y = if rng.random_bool(0.1) { rng.random_range(0..3) } else { (v[0] + v[1] / 2) % 3 };
        csv.push_str(&format!("{},{},{},{},k{y}\n", v[0], v[1], v[2], v[3]));
    }
    read_csv(csv.as_bytes(), "y").unwrap()
}

fn rows_of(ds: &Dataset, label: u32) -> (Vec<u32>, Vec<u32>) {
    (0..ds.len() as u32).partition(|&r| ds.instances()[r as usize].label == Some(label))
}

// data-model ----------------------------------------------------------------

proptest! {
    #[test]
    fn split_partitions_the_instances(seed in any::<u64>(), rows in 1usize..80, num in 1i64..10) {
        let ds = table(seed, rows, 2, 1, 2, 0.1);
        let frac = Fraction::new(num, 10);
        let (train, test) = split(&ds, frac, seed).unwrap();
        let ids = |d: &Dataset| d.instances().iter().map(|i| i.id).collect::<BTreeSet<_>>();
        let (a, b) = (ids(&train), ids(&test));
        prop_assert!(a.is_disjoint(&b));
        prop_assert_eq!(a.union(&b).copied().collect::<BTreeSet<_>>(), ids(&ds));
        prop_assert_eq!(test.len() as i64, (frac * rows as i64).floor().to_integer());
        let (train2, test2) = split(&ds, frac, seed).unwrap();
        prop_assert_eq!(train.instances(), train2.instances());
        prop_assert_eq!(test.instances(), test2.instances());
    }
}

// preprocess ----------------------------------------------------------------

const IDEMPOTENT: &[&str] = &[
    "round_decimal n0,n1 0",
    "round_nearest *@numeric 10",
    "round_conditional re:^n [10,100]:10 (100,):100",
    "cast_integer *@numeric",
    "binarize n0,n1 0.05",
    "impute n0,n1 mean",
    "impute *@numeric median",
    "impute s0 mode",
    "group_above n1 150",
    "mark_missing n0 0",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recipes_are_idempotent(seed in any::<u64>(), which in 0..IDEMPOTENT.len()) {
        let ds = table(seed, 30, 2, 1, 2, 0.2);
        let recipe = Recipe::parse(&format!("step = {}", IDEMPOTENT[which])).unwrap();
        let once = apply_recipe(&ds, &recipe).unwrap();
        let twice = apply_recipe(&once, &recipe).unwrap();
        prop_assert_eq!(once.to_table(), twice.to_table());
    }

    #[test]
    fn imputation_uses_training_statistics(seed in any::<u64>()) {
        let ds = table(seed, 40, 1, 0, 2, 0.3);
        let (train, test) = split(&ds, Fraction::new(1, 4), seed).unwrap();
        let observed: Vec<Number> = train.instances().iter().filter_map(|i| train.decode(i, 0)?.as_number().copied()).collect();
        prop_assume!(!observed.is_empty());
        let mean = observed.iter().copied().sum::<Number>() / observed.len() as i64;
        let recipe = Recipe::parse("step = impute n0 mean").unwrap();
        let (_, test_out) = apply_recipe_pair(&train, &test, &recipe).unwrap();
        for (before, after) in test.instances().iter().zip(test_out.instances()) {
            let v = test_out.decode(after, 0).cloned();
            match test.decode(before, 0) {
                None => prop_assert_eq!(v, Some(Value::Num(mean))),
                Some(orig) => prop_assert_eq!(v.as_ref(), Some(orig)),
            }
        }
    }
}

// rule-core -----------------------------------------------------------------

fn random_literal(rng: &mut ChaCha8Rng, ds: &Dataset) -> Literal {
    let a = rng.random_range(0..ds.schema().len());
    let attr = &ds.schema().attributes[a];
    let pick = |rng: &mut ChaCha8Rng| -> Value {
        if attr.values.is_empty() || rng.random_bool(0.1) {
            Value::Num(Number::from_integer(-1))
        } else {
            attr.values[rng.random_range(0..attr.values.len())].clone()
        }
    };
    let test = if attr.is_numeric() {
        match rng.random_range(0..4) {
            0 => LiteralTest::Equals(pick(rng)),
            1 => LiteralTest::Leq(pick(rng)),
            2 => LiteralTest::Geq(pick(rng)),
            _ => {
                let (x, y) = (pick(rng), pick(rng));
                if x <= y { LiteralTest::InRange(x, y) } else { LiteralTest::InRange(y, x) }
            }
        }
    } else {
        LiteralTest::Equals(pick(rng))
    };
    Literal::new(attr.name.clone(), test)
}

fn random_model(rng: &mut ChaCha8Rng, ds: &Dataset) -> MultiClassRuleModel {
    let rulesets = ds
        .schema()
        .labels
        .iter()
        .map(|l| RuleSet {
            target: l.clone(),
            rules: (0..rng.random_range(0..4))
                .map(|_| Rule::new(l.clone(), (0..rng.random_range(0..4)).map(|_| random_literal(rng, ds)).collect()))
                .collect(),
        })
        .collect();
    MultiClassRuleModel::new("random", "y", rulesets).unwrap()
}

fn satisfied(rule: &Rule, ds: &Dataset, inst: &Instance) -> usize {
    rule.body
        .iter()
        .filter(|l| {
            let a = ds.schema().attribute_index(&l.attribute).unwrap();
            l.holds(ds.decode(inst, a))
        })
        .count()
}

fn fraction(rule: &Rule, ds: &Dataset, inst: &Instance) -> Fraction {
    if rule.body.is_empty() {
        Fraction::from_integer(1)
    } else {
        Fraction::new(satisfied(rule, ds, inst) as i64, rule.len() as i64)
    }
}

type Reference = (Option<(Label, Rule)>, Option<Label>, Vec<(Fraction, Option<Rule>)>);

/// Longest fully satisfied rule decides; a length tie between labels or no
/// firing rule falls back to the best (fraction, length) with ties unresolved.
fn reference_predict(model: &MultiClassRuleModel, ds: &Dataset, inst: &Instance) -> Reference {
    let mut firing: Vec<(usize, &Rule)> = Vec::new();
    let mut best: Vec<(Fraction, Option<Rule>)> = Vec::new();
    for rs in &model.rulesets {
        let mut label_best: Option<(Fraction, usize, &Rule)> = None;
        let mut longest: Option<&Rule> = None;
        for r in &rs.rules {
            let fr = fraction(r, ds, inst);
            if label_best.is_none_or(|(bf, bl, _)| (fr, r.len()) > (bf, bl)) {
                label_best = Some((fr, r.len(), r));
            }
            if fr == Fraction::from_integer(1) && longest.is_none_or(|l| r.len() > l.len()) {
                longest = Some(r);
            }
        }
        if let Some(r) = longest {
            firing.push((firing.len(), r));
        }
        best.push(label_best.map_or((Fraction::from_integer(0), None), |(f, _, r)| (f, Some(r.clone()))));
    }
    let top = firing.iter().map(|(_, r)| r.len()).max();
    let at_top: Vec<&Rule> = firing.iter().filter(|(_, r)| Some(r.len()) == top).map(|(_, r)| *r).collect();
    let justified = (at_top.len() == 1).then(|| (at_top[0].target.clone(), at_top[0].clone()));
    let predicted = match &justified {
        Some((l, _)) => Some(l.clone()),
        None => {
            let key = |i: usize| (best[i].0, best[i].1.as_ref().map_or(0, Rule::len));
            let m = (0..best.len()).map(key).max();
            let leaders: Vec<usize> = (0..best.len()).filter(|&i| Some(key(i)) == m).collect();
            (leaders.len() == 1).then(|| model.rulesets[leaders[0]].target.clone())
        }
    };
    (justified, predicted, best)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn match_fraction_moves_the_right_way(seed in any::<u64>()) {
        let ds = table(seed, 5, 3, 2, 2, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let body: Vec<Literal> = (0..rng.random_range(2..8)).map(|_| random_literal(&mut rng, &ds)).collect();
        let rule = Rule::new("c0", body);
        for inst in ds.instances() {
            let full = rule.match_fraction(ds.schema(), &ds, inst).unwrap();
            for i in 0..rule.len() {
                let mut shorter = rule.clone();
                let removed = shorter.body.remove(i);
                let a = ds.schema().attribute_index(&removed.attribute).unwrap();
                let held = removed.holds(ds.decode(inst, a));
                let f = shorter.match_fraction(ds.schema(), &ds, inst).unwrap();
                if held { prop_assert!(f <= full) } else { prop_assert!(f >= full) }
            }
        }
    }

    #[test]
    fn multiclass_prediction_matches_reference(seed in any::<u64>()) {
        let ds = table(seed, 12, 2, 2, 3, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let model = random_model(&mut rng, &ds);
        for inst in ds.instances() {
            let out = model.predict(&ds, inst).unwrap();
            let (justified, predicted, best) = reference_predict(&model, &ds, inst);
            prop_assert_eq!(&out.fully_justified, &justified);
            prop_assert_eq!(&out.predicted_label, &predicted);
            for (b, (f, r)) in out.per_label_best.iter().zip(&best) {
                prop_assert_eq!(b.fraction, *f);
                prop_assert_eq!(&b.rule, r);
            }
            if let Some((_, r)) = &out.fully_justified {
                prop_assert_eq!(r.match_fraction(ds.schema(), &ds, inst).unwrap(), Fraction::from_integer(1));
            }
        }
    }
}

// foil / ripper ---------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn foil_rules_exclude_negatives_and_cover_positives(seed in any::<u64>()) {
        let ds = table(seed, 40, 1, 3, 3, 0.1);
        let cols = Columns::new(&ds);
        let (pos, neg) = rows_of(&ds, 0);
        let out = foil_learn_codes(&cols, &pos, &neg, false);
        for rule in &out.rules {
            prop_assert!(neg.iter().all(|&r| !cols.covers(rule, r)));
        }
        for &p in &pos {
            prop_assert!(out.dropped.contains(&p) || out.rules.iter().any(|rule| cols.covers(rule, p)));
        }
        prop_assert_eq!(foil_learn_codes(&cols, &pos, &neg, false), out);
    }

    #[test]
    fn ripper_dl_never_rises_in_optimization(seed in any::<u64>(), k in 0usize..3) {
        let ds = structured(seed, 60);
        let cols = Columns::new(&ds);
        let (pos, neg) = rows_of(&ds, 0);
        let cfg = RipperConfig { k, seed, ..Default::default() };
        let (rules, trace) = ripper_codes(&cols, &pos, &neg, &cfg);
        for (before, after) in &trace.optimized_dl {
            prop_assert!(after <= before);
        }
        if let Some(pre) = trace.pre_sweep_dl {
            prop_assert!(trace.final_dl <= pre);
        }
        prop_assert_eq!(ripper_codes(&cols, &pos, &neg, &cfg).0, rules);
    }
}

// tree ----------------------------------------------------------------------

fn gini_weighted(groups: &[Vec<usize>]) -> f64 {
    let n: usize = groups.iter().flatten().sum();
    groups
        .iter()
        .map(|g| {
            let m: usize = g.iter().sum();
            if m == 0 {
                return 0.0;
            }
            let purity: f64 = g.iter().map(|&c| (c as f64 / m as f64).powi(2)).sum();
            m as f64 / n as f64 * (1.0 - purity)
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn root_split_is_the_best_gini_split(seed in any::<u64>()) {
        let ds = table(seed, 25, 2, 2, 3, 0.1);
        let tree = train_tree(&ds, &TreeConfig { seed, ..Default::default() }).unwrap();
        let k = ds.schema().labels.len();
        let impurity = |attr: usize, left: &dyn Fn(u32) -> bool| {
            let mut g = vec![vec![0usize; k]; 2];
            for inst in ds.instances() {
                let c = inst.codes[attr];
                let side = usize::from(!(c != u32::MAX && left(c)));
                g[side][inst.label.unwrap() as usize] += 1;
            }
            (g[0].iter().sum::<usize>() > 0 && g[1].iter().sum::<usize>() > 0).then(|| gini_weighted(&g))
        };
        let mut best = f64::INFINITY;
        for (a, attr) in ds.schema().attributes.iter().enumerate() {
            let present: BTreeSet<u32> = ds.instances().iter().map(|i| i.codes[a]).filter(|&c| c != u32::MAX).collect();
            let thresholds = present.len() - usize::from(attr.is_numeric() && !present.is_empty());
            for &v in present.iter().take(thresholds) {
                let s = if attr.is_numeric() { impurity(a, &|c| c <= v) } else { impurity(a, &|c| c == v) };
                if let Some(s) = s { best = best.min(s); }
            }
        }
        match &tree.root {
            TreeNode::Split { attr, test, .. } => {
                let chosen = match *test {
                    SplitTest::Equals(v) => impurity(*attr, &|c| c == v),
                    SplitTest::LeqCode(v) => impurity(*attr, &|c| c <= v),
                }.unwrap();
                prop_assert!((chosen - best).abs() < 1e-12, "chosen {} best {}", chosen, best);
            }
            TreeNode::Leaf { counts, .. } => {
                prop_assert!(counts.iter().filter(|&&c| c > 0).count() <= 1 || best.is_infinite());
            }
        }
    }

    #[test]
    fn tree_rules_reproduce_tree_predictions(seed in any::<u64>()) {
        let ds = table(seed, 30, 2, 2, 3, 0.15);
        let tree = train_tree(&ds, &TreeConfig { seed, max_depth: Some(4), ..Default::default() }).unwrap();
        let rules = tree.to_rules();
        // Missing cells route right in the tree but fail every literal, so only complete rows qualify.
        for inst in ds.instances().iter().filter(|i| !i.codes.contains(&u32::MAX)) {
            let out = rules.predict(&ds, inst).unwrap();
            let (label, rule) = out.fully_justified.expect("exactly one leaf fires");
            prop_assert_eq!(&label, tree.predict(inst));
            prop_assert_eq!(rule.match_fraction(ds.schema(), &ds, inst).unwrap(), Fraction::from_integer(1));
        }
    }
}

// gbt -----------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn boosting_loss_never_rises(seed in any::<u64>()) {
        let ds = structured(seed, 80);
        let m = GbtModel::<f64>::train(&ds, &GbtConfig { rounds: 40, seed, ..Default::default() }).unwrap();
        prop_assert_eq!(m.loss_trace.len(), 41);
        for w in m.loss_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }
}

// voting --------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ensemble_steps_and_oracle_dominance(seed in any::<u64>()) {
        let ds = structured(seed, 120);
        let (train, test) = split(&ds, Fraction::new(1, 3), seed).unwrap();
        let foil = train_foil(&train).unwrap().0;
        let ripper = train_ripper(&train, &RipperConfig { seed, ..Default::default() }).unwrap().0;
        let models = [foil, ripper];
        let cfg = VotingConfig::for_labels(train.schema().labels.len());
        let gbt = GbtModel::<f64>::train(&train, &GbtConfig { rounds: 20, seed, ..Default::default() }).unwrap();
        let oracle = OracleDecider::from_dataset(&test);
        let a = run_ensemble(&models, &gbt, &test, &cfg).unwrap();
        let b = run_ensemble(&models, &oracle, &test, &cfg).unwrap();
        let mut correct = [0, 0];
        for ((ra, rb), inst) in a.results.iter().zip(&b.results).zip(test.instances()) {
            let truth = test.label_of(inst);
            for r in [ra, rb] {
                prop_assert!((1..=4).contains(&r.step));
                prop_assert_eq!(r.level, Level::of_step(r.step));
                prop_assert_eq!(r.label.is_none(), r.step == 4);
                if let Some(j) = &r.justification {
                    prop_assert!(r.step == 3 || j.fraction == Fraction::from_integer(1));
                    prop_assert!(r.step != 3 || j.fraction >= cfg.threshold);
                }
            }
            prop_assert_eq!(ra.step == 1, rb.step == 1);
            if ra.step == 1 { prop_assert_eq!(ra, rb); }
            if matches!(rb.step, 2 | 3) { prop_assert_eq!(rb.label.as_ref(), truth); }
            correct[0] += usize::from(ra.label.is_some() && ra.label.as_ref() == truth);
            correct[1] += usize::from(rb.label.is_some() && rb.label.as_ref() == truth);
        }
        prop_assert!(correct[1] >= correct[0]);
        let step1 = a.results.iter().filter(|r| r.step == 1).count();
        prop_assert_eq!(a.decider_calls, test.len() - step1);
    }
}

struct Panics;

impl Decider for Panics {
    fn name(&self) -> &str {
        "panics"
    }

    fn predict(&self, _: &Dataset, _: &Instance) -> rulevote::Result<Label> {
        panic!("decider consulted")
    }
}

#[test]
fn consistent_learners_never_consult_the_decider() {
    let mut csv = String::from("a,b,y\n");
    for a in 0..4 {
        for b in 0..3 {
            csv.push_str(&format!("{a},{b},l{}\n", (a + b) % 3));
        }
    }
    let ds = read_csv(csv.as_bytes(), "y").unwrap();
    let foil = train_foil(&ds).unwrap().0;
    let run = run_ensemble(&[foil.clone(), foil], &Panics, &ds, &VotingConfig::for_labels(3)).unwrap();
    assert_eq!(run.decider_calls, 0);
    assert!(run.results.iter().all(|r| r.step == 1));
}

// metrics -------------------------------------------------------------------

proptest! {
    #[test]
    fn evaluate_matches_naive_counts(
        pairs in prop::collection::vec((prop::option::of(0usize..4), 0usize..4), 1..60),
        abst_err in any::<bool>(),
    ) {
        let labels: Vec<Label> = (0..4).map(|i| format!("L{i}")).collect();
        let pred: Vec<Option<Label>> = pairs.iter().map(|(p, _)| p.map(|p| labels[p].clone())).collect();
        let truth: Vec<Label> = pairs.iter().map(|(_, t)| labels[*t].clone()).collect();
        let r = evaluate(&pred, &truth, &labels, EvalOptions { abstentions_are_errors: abst_err }).unwrap();
        let correct = pairs.iter().filter(|(p, t)| *p == Some(*t)).count() as i64;
        let answered = pairs.iter().filter(|(p, _)| p.is_some()).count() as i64;
        let denom = if abst_err { pairs.len() as i64 } else { answered };
        let acc = if denom == 0 { Fraction::from_integer(0) } else { Fraction::new(correct, denom) };
        prop_assert_eq!(r.accuracy, acc);
        let mut mp = Fraction::from_integer(0);
        let mut mr = Fraction::from_integer(0);
        for c in 0..4 {
            let tp = pairs.iter().filter(|(p, t)| *p == Some(c) && *t == c).count() as i64;
            let predicted = pairs.iter().filter(|(p, _)| *p == Some(c)).count() as i64;
            let support = pairs.iter().filter(|(_, t)| *t == c).count() as i64;
            if predicted > 0 { mp += Fraction::new(tp, predicted); }
            if support > 0 { mr += Fraction::new(tp, support); }
            prop_assert_eq!(r.per_class[c].no_predictions, predicted == 0);
        }
        prop_assert_eq!(r.macro_precision, mp / 4);
        prop_assert_eq!(r.macro_recall, mr / 4);
    }

    #[test]
    fn macro_metrics_ignore_label_names(
        pairs in prop::collection::vec((prop::option::of(0usize..3), 0usize..3), 1..40),
        perm in Just(vec![0usize, 1, 2]).prop_shuffle(),
    ) {
        let a: Vec<Label> = vec!["x".into(), "y".into(), "z".into()];
        let b: Vec<Label> = perm.iter().map(|&i| format!("renamed{i}")).collect();
        let rename: HashMap<&Label, &Label> = a.iter().zip(&b).collect();
        let pred: Vec<Option<Label>> = pairs.iter().map(|(p, _)| p.map(|p| a[p].clone())).collect();
        let truth: Vec<Label> = pairs.iter().map(|(_, t)| a[*t].clone()).collect();
        let pred2: Vec<Option<Label>> = pred.iter().map(|p| p.as_ref().map(|p| rename[p].clone())).collect();
        let truth2: Vec<Label> = truth.iter().map(|t| rename[t].clone()).collect();
        let mut sorted = b.clone();
        sorted.sort();
        let r1 = evaluate(&pred, &truth, &a, EvalOptions::default()).unwrap();
        let r2 = evaluate(&pred2, &truth2, &sorted, EvalOptions::default()).unwrap();
        prop_assert_eq!(r1.accuracy, r2.accuracy);
        prop_assert_eq!(r1.macro_precision, r2.macro_precision);
        prop_assert_eq!(r1.macro_recall, r2.macro_recall);
    }
}
