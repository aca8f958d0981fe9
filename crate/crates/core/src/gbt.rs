//! Gradient-boosted regression trees, one-vs-rest with logistic loss.
//!
//! Numeric attributes are split on value thresholds; nominal attributes are
//! expanded into one indicator per value. Training works on per-feature
//! histograms. Each row stores only its non-default bins, and a node's default
//! bin is recovered by subtraction, so sparse inputs such as binarized pixels
//! stay cheap.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{AttributeKind, Dataset, Instance, Label, Schema, Value, MISSING};
use crate::error::{Error, Result};
use crate::scalar::{format_number, parse_number, Scalar};

pub const DUMP_FORMAT: &str = "rulevote-gbt";
pub const DUMP_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct GbtConfig {
    pub rounds: usize,
    pub depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub min_child_weight: f64,
    /// Shuffles the feature scan order, which decides ties between equal gains.
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig { rounds: 100, depth: 3, learning_rate: 0.1, lambda: 1.0, min_child_weight: 1.0, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitRule {
    /// Left when the value is present and `<= value`.
    Leq { attribute: String, value: String },
    /// Left when the value is absent or differs from `value`.
    NotEq { attribute: String, value: String },
}

#[derive(Clone, Debug, PartialEq)]
pub enum GbtNode<S> {
    Split { attr: usize, rule: SplitRule, threshold: Value, left: usize, right: usize },
    Leaf(S),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionTree<S> {
    pub nodes: Vec<GbtNode<S>>,
}

impl<S: Scalar> RegressionTree<S> {
    fn eval(&self, decode: &dyn Fn(usize) -> Option<Value>) -> S {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                GbtNode::Leaf(v) => return *v,
                GbtNode::Split { attr, rule, threshold, left, right } => {
                    let v = decode(*attr);
                    let go_left = match rule {
                        SplitRule::Leq { .. } => v.is_some_and(|v| v <= *threshold),
                        SplitRule::NotEq { .. } => v.is_none_or(|v| v != *threshold),
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GbtModel<S> {
    pub labels: Vec<Label>,
    pub attributes: Vec<String>,
    pub base_scores: Vec<S>,
    /// `trees[round][label]`.
    pub trees: Vec<Vec<RegressionTree<S>>>,
    pub learning_rate: f64,
    /// Training data held a single class; the model is constant.
    pub degenerate: bool,
    /// Mean one-vs-rest logistic loss before the first round and after each round.
    pub loss_trace: Vec<f64>,
}

/// One histogram column: a numeric attribute or one indicator of a nominal value.
#[derive(Clone, Debug)]
struct Feature {
    attr: usize,
    /// Indicator code for nominal attributes.
    indicator: Option<u32>,
    nbins: usize,
    offset: usize,
    default_bin: usize,
}

struct Encoded {
    features: Vec<Feature>,
    /// Non-default global bin indices per row.
    rows: Vec<Vec<u32>>,
    total_bins: usize,
}

fn bin_of(f: &Feature, code: u32) -> usize {
    match f.indicator {
        Some(c) => usize::from(code == c),
        None if code == MISSING => f.nbins - 1,
        None => code as usize,
    }
}

fn encode(ds: &Dataset) -> Encoded {
    let schema = ds.schema();
    let mut features = Vec::new();
    let mut offset = 0;
    for (a, attr) in schema.attributes.iter().enumerate() {
        let specs: Vec<(Option<u32>, usize)> = match attr.kind {
            AttributeKind::Numeric => vec![(None, attr.values.len() + 1)],
            AttributeKind::Nominal => (0..attr.values.len() as u32).map(|c| (Some(c), 2)).collect(),
        };
        for (indicator, nbins) in specs {
            let mut f = Feature { attr: a, indicator, nbins, offset, default_bin: 0 };
            let mut counts = vec![0usize; nbins];
            for inst in ds.instances() {
                counts[bin_of(&f, inst.codes[a])] += 1;
            }
            f.default_bin = (0..nbins).max_by_key(|&b| (counts[b], std::cmp::Reverse(b))).unwrap_or(0);
            offset += nbins;
            features.push(f);
        }
    }
    let rows = ds
        .instances()
        .iter()
        .map(|inst| {
            features
                .iter()
                .filter_map(|f| {
                    let b = bin_of(f, inst.codes[f.attr]);
                    (b != f.default_bin).then_some((f.offset + b) as u32)
                })
                .collect()
        })
        .collect();
    Encoded { features, rows, total_bins: offset }
}

#[derive(Clone, Copy, Default)]
struct GH {
    g: f64,
    h: f64,
}

impl std::ops::AddAssign for GH {
    fn add_assign(&mut self, o: GH) {
        self.g += o.g;
        self.h += o.h;
    }
}

impl std::ops::Sub for GH {
    type Output = GH;
    fn sub(self, o: GH) -> GH {
        GH { g: self.g - o.g, h: self.h - o.h }
    }
}

struct TreeBuilder<'a> {
    enc: &'a Encoded,
    order: &'a [usize],
    cfg: &'a GbtConfig,
    grad: &'a [GH],
}

struct Candidate {
    feature: usize,
    /// Bins `<= split_bin` go left.
    split_bin: usize,
    gain: f64,
}

impl<'a> TreeBuilder<'a> {
    fn histogram(&self, rows: &[u32]) -> (Vec<GH>, GH) {
        let mut hist = vec![GH::default(); self.enc.total_bins];
        let mut total = GH::default();
        for &r in rows {
            let gh = self.grad[r as usize];
            total += gh;
            for &b in &self.enc.rows[r as usize] {
                hist[b as usize] += gh;
            }
        }
        for f in &self.enc.features {
            let bins = &mut hist[f.offset..f.offset + f.nbins];
            let mut rest = GH::default();
            for (b, gh) in bins.iter().enumerate() {
                if b != f.default_bin {
                    rest += *gh;
                }
            }
            bins[f.default_bin] = total - rest;
        }
        (hist, total)
    }

    fn score(&self, gh: GH) -> f64 {
        gh.g * gh.g / (gh.h + self.cfg.lambda)
    }

    fn best(&self, hist: &[GH], total: GH) -> Option<Candidate> {
        let parent = self.score(total);
        let mut best: Option<Candidate> = None;
        for &fi in self.order {
            let f = &self.enc.features[fi];
            let bins = &hist[f.offset..f.offset + f.nbins];
            // Numeric: the last bin holds missing values and always goes right.
            let last_split = if f.indicator.is_some() { 1 } else { f.nbins - 2 };
            let mut left = GH::default();
            for (b, gh) in bins.iter().enumerate().take(last_split) {
                left += *gh;
                let right = total - left;
                if left.h < self.cfg.min_child_weight || right.h < self.cfg.min_child_weight {
                    continue;
                }
                let gain = self.score(left) + self.score(right) - parent;
                if gain > 1e-12 && best.as_ref().is_none_or(|c| gain > c.gain) {
                    best = Some(Candidate { feature: fi, split_bin: b, gain });
                }
            }
        }
        best
    }

    fn leaf(&self, total: GH) -> f64 {
        -total.g / (total.h + self.cfg.lambda) * self.cfg.learning_rate
    }

    fn goes_left(&self, f: &Feature, r: u32, split_bin: usize) -> bool {
        let row = &self.enc.rows[r as usize];
        let b = row
            .iter()
            .find(|&&x| (x as usize) >= f.offset && (x as usize) < f.offset + f.nbins)
            .map_or(f.default_bin, |&x| x as usize - f.offset);
        b <= split_bin
    }

    /// Nodes as (feature, split_bin, left, right) or leaf values.
    fn build(&self, rows: Vec<u32>) -> Vec<RawNode> {
        let mut nodes = Vec::new();
        let (hist, total) = self.histogram(&rows);
        self.grow(rows, hist, total, 0, &mut nodes);
        nodes
    }

    fn grow(&self, rows: Vec<u32>, hist: Vec<GH>, total: GH, depth: usize, nodes: &mut Vec<RawNode>) -> usize {
        let id = nodes.len();
        nodes.push(RawNode::Leaf(self.leaf(total)));
        if depth >= self.cfg.depth {
            return id;
        }
        let Some(c) = self.best(&hist, total) else { return id };
        let f = &self.enc.features[c.feature];
        let (l, r): (Vec<u32>, Vec<u32>) = rows.into_iter().partition(|&x| self.goes_left(f, x, c.split_bin));
        let (small, large_is_left) = if l.len() <= r.len() { (&l, false) } else { (&r, true) };
        let (small_hist, small_total) = self.histogram(small);
        let large_hist: Vec<GH> = hist.iter().zip(&small_hist).map(|(a, b)| *a - *b).collect();
        let large_total = total - small_total;
        let ((lh, lt), (rh, rt)) = if large_is_left {
            ((large_hist, large_total), (small_hist, small_total))
        } else {
            ((small_hist, small_total), (large_hist, large_total))
        };
        let left = self.grow(l, lh, lt, depth + 1, nodes);
        let right = self.grow(r, rh, rt, depth + 1, nodes);
        nodes[id] = RawNode::Split { feature: c.feature, split_bin: c.split_bin, left, right };
        id
    }
}

enum RawNode {
    Split { feature: usize, split_bin: usize, left: usize, right: usize },
    Leaf(f64),
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logloss(score: f64, y: bool) -> f64 {
    // log(1 + exp(-s)) for positives, log(1 + exp(s)) for negatives, computed stably.
    let s = if y { -score } else { score };
    s.max(0.0) + (-s.abs()).exp().ln_1p()
}

impl<S: Scalar> GbtModel<S> {
    pub fn train(train: &Dataset, cfg: &GbtConfig) -> Result<Self> {
        let schema = train.schema();
        let k = schema.labels.len();
        let rows: Vec<u32> = (0..train.len() as u32).filter(|&r| train.instances()[r as usize].label.is_some()).collect();
        if rows.is_empty() {
            return Err(Error::Argument("no labelled training instances".into()));
        }
        let mut counts = vec![0usize; k];
        for &r in &rows {
            counts[train.instances()[r as usize].label.unwrap() as usize] += 1;
        }
        let n = rows.len() as f64;
        let degenerate = counts.iter().filter(|&&c| c > 0).count() < 2;
        let base: Vec<f64> = counts
            .iter()
            .map(|&c| {
                let p = (c as f64 / n).clamp(1e-6, 1.0 - 1e-6);
                (p / (1.0 - p)).ln()
            })
            .collect();
        let mut model = GbtModel {
            labels: schema.labels.clone(),
            attributes: schema.attributes.iter().map(|a| a.name.clone()).collect(),
            base_scores: base.iter().map(|&b| S::lit(b)).collect(),
            trees: Vec::new(),
            learning_rate: cfg.learning_rate,
            degenerate,
            loss_trace: Vec::new(),
        };
        let label_of = |r: u32| train.instances()[r as usize].label.unwrap() as usize;
        let mut scores: Vec<Vec<f64>> = (0..k).map(|l| vec![base[l]; train.len()]).collect();
        let loss = |scores: &[Vec<f64>]| -> f64 {
            let total: f64 = (0..k)
                .map(|l| rows.iter().map(|&r| logloss(scores[l][r as usize], label_of(r) == l)).sum::<f64>())
                .sum();
            total / (n * k as f64)
        };
        model.loss_trace.push(loss(&scores));
        if degenerate {
            return Ok(model);
        }
        let enc = encode(train);
        let mut order: Vec<usize> = (0..enc.features.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
        for _ in 0..cfg.rounds {
            let round: Vec<(Vec<RawNode>, Vec<f64>)> = (0..k)
                .into_par_iter()
                .map(|l| {
                    let mut grad = vec![GH::default(); train.len()];
                    for &r in &rows {
                        let p = sigmoid(scores[l][r as usize]);
                        let y = if label_of(r) == l { 1.0 } else { 0.0 };
                        grad[r as usize] = GH { g: p - y, h: (p * (1.0 - p)).max(1e-16) };
                    }
                    let b = TreeBuilder { enc: &enc, order: &order, cfg, grad: &grad };
                    let nodes = b.build(rows.clone());
                    let mut delta = vec![0.0; train.len()];
                    for &r in &rows {
                        delta[r as usize] = eval_raw(&nodes, &enc, &b, r);
                    }
                    (nodes, delta)
                })
                .collect();
            let mut trees = Vec::with_capacity(k);
            for (l, (nodes, delta)) in round.into_iter().enumerate() {
                for &r in &rows {
                    scores[l][r as usize] += delta[r as usize];
                }
                trees.push(lower(&nodes, &enc, schema));
            }
            model.trees.push(trees);
            model.loss_trace.push(loss(&scores));
        }
        Ok(model)
    }

    /// Per-label scores (log-odds) for one instance.
    pub fn scores(&self, ds: &Dataset, inst: &Instance) -> Result<Vec<S>> {
        let schema = ds.schema();
        let map: Vec<Option<usize>> = self.attributes.iter().map(|a| schema.attribute_index(a).ok()).collect();
        let decode = |a: usize| -> Option<Value> { map[a].and_then(|i| ds.decode(inst, i).cloned()) };
        let mut out = self.base_scores.clone();
        for round in &self.trees {
            for (l, tree) in round.iter().enumerate() {
                out[l] = out[l] + tree.eval(&decode);
            }
        }
        Ok(out)
    }

    /// Arg-max label; ties go to the earlier label.
    pub fn predict(&self, ds: &Dataset, inst: &Instance) -> Result<Label> {
        let s = self.scores(ds, inst)?;
        let mut best = 0;
        for l in 1..s.len() {
            if s[l] > s[best] {
                best = l;
            }
        }
        Ok(self.labels[best].clone())
    }

    pub fn to_json(&self) -> Result<String> {
        let dump = GbtDump {
            format: DUMP_FORMAT.into(),
            version: DUMP_VERSION,
            labels: self.labels.clone(),
            attributes: self.attributes.clone(),
            base_scores: self.base_scores.iter().map(|s| s.to_f64().unwrap_or(0.0)).collect(),
            learning_rate: self.learning_rate,
            degenerate: self.degenerate,
            loss_trace: self.loss_trace.clone(),
            trees: self
                .trees
                .iter()
                .map(|round| {
                    round
                        .iter()
                        .map(|t| {
                            t.nodes
                                .iter()
                                .map(|n| match n {
                                    GbtNode::Leaf(v) => NodeDump::Leaf { value: v.to_f64().unwrap_or(0.0) },
                                    GbtNode::Split { rule, left, right, .. } => {
                                        NodeDump::Split { rule: rule.clone(), left: *left, right: *right }
                                    }
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&dump)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: GbtDump = serde_json::from_str(text)?;
        if dump.format != DUMP_FORMAT || dump.version != DUMP_VERSION {
            return Err(Error::Config(format!("unsupported model dump {} v{}", dump.format, dump.version)));
        }
        let attr_index = |name: &str| {
            dump.attributes
                .iter()
                .position(|a| a == name)
                .ok_or_else(|| Error::Config(format!("dump references unknown attribute {name:?}")))
        };
        let parse_value = |rule: &SplitRule| -> Value {
            match rule {
                SplitRule::Leq { value, .. } => parse_number(value).map_or_else(|| Value::Nom(value.clone()), Value::Num),
                SplitRule::NotEq { value, .. } => {
                    // Nominal indicator values are stored verbatim.
                    Value::Nom(value.clone())
                }
            }
        };
        let mut trees = Vec::with_capacity(dump.trees.len());
        for round in &dump.trees {
            let mut r = Vec::with_capacity(round.len());
            for t in round {
                let mut nodes = Vec::with_capacity(t.len());
                for n in t {
                    nodes.push(match n {
                        NodeDump::Leaf { value } => GbtNode::Leaf(S::lit(*value)),
                        NodeDump::Split { rule, left, right } => {
                            let attr = match rule {
                                SplitRule::Leq { attribute, .. } | SplitRule::NotEq { attribute, .. } => attr_index(attribute)?,
                            };
                            if *left >= t.len() || *right >= t.len() {
                                return Err(Error::Config("dump has a dangling child index".into()));
                            }
                            GbtNode::Split { attr, rule: rule.clone(), threshold: parse_value(rule), left: *left, right: *right }
                        }
                    });
                }
                r.push(RegressionTree { nodes });
            }
            trees.push(r);
        }
        Ok(GbtModel {
            labels: dump.labels,
            attributes: dump.attributes,
            base_scores: dump.base_scores.into_iter().map(S::lit).collect(),
            trees,
            learning_rate: dump.learning_rate,
            degenerate: dump.degenerate,
            loss_trace: dump.loss_trace,
        })
    }
}

fn eval_raw(nodes: &[RawNode], enc: &Encoded, b: &TreeBuilder, r: u32) -> f64 {
    let mut i = 0;
    loop {
        match &nodes[i] {
            RawNode::Leaf(v) => return *v,
            RawNode::Split { feature, split_bin, left, right } => {
                i = if b.goes_left(&enc.features[*feature], r, *split_bin) { *left } else { *right };
            }
        }
    }
}

fn lower<S: Scalar>(nodes: &[RawNode], enc: &Encoded, schema: &Schema) -> RegressionTree<S> {
    let nodes = nodes
        .iter()
        .map(|n| match n {
            RawNode::Leaf(v) => GbtNode::Leaf(S::lit(*v)),
            RawNode::Split { feature, split_bin, left, right } => {
                let f = &enc.features[*feature];
                let attr = &schema.attributes[f.attr];
                let (rule, threshold) = match f.indicator {
                    // Indicator bins: 0 = other value (left), 1 = this value.
                    Some(c) => {
                        let v = attr.value(c).clone();
                        (SplitRule::NotEq { attribute: attr.name.clone(), value: v.to_string() }, v)
                    }
                    None => {
                        let v = attr.value(*split_bin as u32).clone();
                        let text = match &v {
                            Value::Num(n) => format_number(n),
                            Value::Nom(s) => s.clone(),
                        };
                        (SplitRule::Leq { attribute: attr.name.clone(), value: text }, v)
                    }
                };
                GbtNode::Split { attr: f.attr, rule, threshold, left: *left, right: *right }
            }
        })
        .collect();
    RegressionTree { nodes }
}

#[derive(Serialize, Deserialize)]
struct GbtDump {
    format: String,
    version: u32,
    labels: Vec<Label>,
    attributes: Vec<String>,
    base_scores: Vec<f64>,
    learning_rate: f64,
    degenerate: bool,
    loss_trace: Vec<f64>,
    trees: Vec<Vec<Vec<NodeDump>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
enum NodeDump {
    Split { rule: SplitRule, left: usize, right: usize },
    Leaf { value: f64 },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::read_csv;

    fn blobs() -> Dataset {
        let mut csv = String::from("x,z,y\n");
        for i in 0..40 {
            let (x, y) = if i % 2 == 0 { (i % 10, "a") } else { (20 + i % 10, "b") };
            csv.push_str(&format!("{x},{},{y}\n", i % 3));
        }
        read_csv(csv.as_bytes(), "y").unwrap()
    }

    fn accuracy(m: &GbtModel<f64>, ds: &Dataset) -> f64 {
        let ok = ds.instances().iter().filter(|i| Some(&m.predict(ds, i).unwrap()) == ds.label_of(i)).count();
        ok as f64 / ds.len() as f64
    }

    #[test]
    fn separable_data_fits() {
        let ds = blobs();
        let m = GbtModel::<f64>::train(&ds, &GbtConfig::default()).unwrap();
        assert_eq!(accuracy(&m, &ds), 1.0);
        assert!(m.loss_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn zero_rounds_predicts_majority() {
        let ds = read_csv("x,y\n1,a\n2,b\n3,b\n".as_bytes(), "y").unwrap();
        let m = GbtModel::<f64>::train(&ds, &GbtConfig { rounds: 0, ..Default::default() }).unwrap();
        for inst in ds.instances() {
            assert_eq!(m.predict(&ds, inst).unwrap(), "b");
        }
    }

    #[test]
    fn single_class_is_degenerate() {
        let ds = read_csv("x,y\n1,a\n2,a\n".as_bytes(), "y").unwrap();
        let m = GbtModel::<f64>::train(&ds, &GbtConfig::default()).unwrap();
        assert!(m.degenerate);
        assert!(m.trees.is_empty());
        assert_eq!(m.predict(&ds, &ds.instances()[0]).unwrap(), "a");
    }

    #[test]
    fn nominal_indicators_and_dump_round_trip() {
        let ds = read_csv("c,x,y\nr,1,a\ng,2,b\nr,3,a\nb,1,b\ng,5,b\nr,2,a\n".as_bytes(), "y").unwrap();
        let m = GbtModel::<f64>::train(&ds, &GbtConfig { min_child_weight: 0.1, ..Default::default() }).unwrap();
        assert_eq!(accuracy(&m, &ds), 1.0);
        let back = GbtModel::<f64>::from_json(&m.to_json().unwrap()).unwrap();
        for inst in ds.instances() {
            let (a, b) = (m.scores(&ds, inst).unwrap(), back.scores(&ds, inst).unwrap());
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn f32_model_agrees() {
        let ds = blobs();
        let m = GbtModel::<f32>::train(&ds, &GbtConfig::default()).unwrap();
        let ok = ds.instances().iter().filter(|i| Some(&m.predict(&ds, i).unwrap()) == ds.label_of(i)).count();
        assert_eq!(ok, ds.len());
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let ds = blobs();
        let a = GbtModel::<f64>::train(&ds, &GbtConfig { seed: 5, ..Default::default() }).unwrap();
        let b = GbtModel::<f64>::train(&ds, &GbtConfig { seed: 5, ..Default::default() }).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }
}
