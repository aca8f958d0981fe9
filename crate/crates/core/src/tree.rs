//! CART decision trees with Gini impurity, and their conversion to rules.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{AttributeKind, Dataset, Instance, Label, Schema, MISSING};
use crate::error::{Error, Result};
use crate::rules::{Literal, LiteralTest, MultiClassRuleModel, Rule, RulePredictor, RuleSet};
use crate::scalar::{ratio, Fraction};

#[derive(Clone, Debug, PartialEq)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Shuffles the attribute scan order, which decides ties between equally good splits.
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { max_depth: None, min_leaf: 1, seed: 0 }
    }
}

/// Instances satisfying the test go left; the rest, missing values included, go right.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitTest {
    Equals(u32),
    LeqCode(u32),
}

impl SplitTest {
    #[inline]
    fn goes_left(self, code: u32) -> bool {
        code != MISSING
            && match self {
                SplitTest::Equals(c) => code == c,
                SplitTest::LeqCode(c) => code <= c,
            }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode {
    Split { attr: usize, test: SplitTest, left: Box<TreeNode>, right: Box<TreeNode> },
    Leaf { label: u32, counts: Vec<usize> },
}

impl TreeNode {
    pub fn leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DecisionTree {
    pub schema: Arc<Schema>,
    pub root: TreeNode,
}

fn gini_sum(counts: &[usize], n: usize) -> f64 {
    // n * gini = n - sum(c^2) / n
    if n == 0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    n as f64 - sq / n as f64
}

/// Weighted Gini impurity of a binary partition, `(nL*gL + nR*gR) / n`.
pub fn split_impurity(left: &[usize], right: &[usize]) -> f64 {
    let nl: usize = left.iter().sum();
    let nr: usize = right.iter().sum();
    (gini_sum(left, nl) + gini_sum(right, nr)) / (nl + nr) as f64
}

struct Builder<'a> {
    ds: &'a Dataset,
    k: usize,
    cfg: &'a TreeConfig,
    order: Vec<usize>,
}

impl<'a> Builder<'a> {
    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.k];
        for &r in rows {
            if let Some(l) = self.ds.instances()[r].label {
                c[l as usize] += 1;
            }
        }
        c
    }

    fn best_split(&self, rows: &[usize]) -> Option<(usize, SplitTest)> {
        let insts = self.ds.instances();
        let schema = self.ds.schema();
        let k = self.k;
        let total = self.counts(rows);
        let min_leaf = self.cfg.min_leaf.max(1);
        let mut best: Option<(f64, usize, SplitTest)> = None;
        for &a in &self.order {
            let nv = schema.attributes[a].values.len();
            let mut hist = vec![0usize; nv * k];
            for &r in rows {
                let (Some(l), c) = (insts[r].label, insts[r].codes[a]) else { continue };
                if c != MISSING {
                    hist[c as usize * k + l as usize] += 1;
                }
            }
            let mut consider = |left: &[usize], test: SplitTest| {
                let nl: usize = left.iter().sum();
                let n: usize = total.iter().sum();
                if nl < min_leaf || n - nl < min_leaf {
                    return;
                }
                let right: Vec<usize> = total.iter().zip(left).map(|(t, l)| t - l).collect();
                let imp = split_impurity(left, &right);
                if best.is_none_or(|(b, _, _)| imp < b) {
                    best = Some((imp, a, test));
                }
            };
            match schema.attributes[a].kind {
                AttributeKind::Nominal => {
                    for c in 0..nv {
                        let left = &hist[c * k..(c + 1) * k];
                        if left.iter().any(|&x| x > 0) {
                            consider(left, SplitTest::Equals(c as u32));
                        }
                    }
                }
                AttributeKind::Numeric => {
                    let mut cum = vec![0usize; k];
                    let observed: Vec<usize> = (0..nv).filter(|&c| hist[c * k..(c + 1) * k].iter().any(|&x| x > 0)).collect();
                    for &c in observed.iter().take(observed.len().saturating_sub(1)) {
                        for (acc, x) in cum.iter_mut().zip(&hist[c * k..(c + 1) * k]) {
                            *acc += x;
                        }
                        consider(&cum, SplitTest::LeqCode(c as u32));
                    }
                }
            }
        }
        best.map(|(_, a, t)| (a, t))
    }

    fn build(&self, rows: Vec<usize>, depth: usize) -> TreeNode {
        let counts = self.counts(&rows);
        let label = counts.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).map_or(0, |(l, _)| l) as u32;
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let capped = self.cfg.max_depth.is_some_and(|d| depth >= d);
        if pure || capped {
            return TreeNode::Leaf { label, counts };
        }
        let Some((attr, test)) = self.best_split(&rows) else {
            return TreeNode::Leaf { label, counts };
        };
        let insts = self.ds.instances();
        let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| test.goes_left(insts[i].codes[attr]));
        TreeNode::Split {
            attr,
            test,
            left: Box::new(self.build(l, depth + 1)),
            right: Box::new(self.build(r, depth + 1)),
        }
    }
}

pub fn train_tree(train: &Dataset, cfg: &TreeConfig) -> Result<DecisionTree> {
    if train.is_empty() {
        return Err(Error::Argument("cannot grow a tree on an empty dataset".into()));
    }
    let schema = train.schema();
    let mut order: Vec<usize> = (0..schema.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let rows: Vec<usize> = (0..train.len()).filter(|&i| train.instances()[i].label.is_some()).collect();
    let builder = Builder { ds: train, k: schema.labels.len(), cfg, order };
    Ok(DecisionTree { schema: Arc::clone(schema), root: builder.build(rows, 0) })
}

impl DecisionTree {
    pub fn predict_code(&self, inst: &Instance) -> u32 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { label, .. } => return *label,
                TreeNode::Split { attr, test, left, right } => {
                    node = if test.goes_left(inst.codes[*attr]) { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, inst: &Instance) -> &Label {
        &self.schema.labels[self.predict_code(inst) as usize]
    }

    /// One rule per leaf: the path conditions, merged per attribute.
    pub fn to_rules(&self) -> MultiClassRuleModel {
        let mut rulesets: Vec<RuleSet> = self.schema.labels.iter().map(RuleSet::new).collect();
        let mut path = Vec::new();
        self.collect(&self.root, &mut path, &mut rulesets);
        MultiClassRuleModel::new("tree", self.schema.label_name.clone(), rulesets).expect("labels are unique")
    }

    fn collect(&self, node: &TreeNode, path: &mut Vec<(usize, SplitTest, bool)>, out: &mut [RuleSet]) {
        match node {
            TreeNode::Leaf { label, .. } => {
                let target = &self.schema.labels[*label as usize];
                out[*label as usize].rules.push(Rule::new(target.clone(), self.path_literals(path)));
            }
            TreeNode::Split { attr, test, left, right } => {
                path.push((*attr, *test, true));
                self.collect(left, path, out);
                path.pop();
                path.push((*attr, *test, false));
                self.collect(right, path, out);
                path.pop();
            }
        }
    }

    fn path_literals(&self, path: &[(usize, SplitTest, bool)]) -> Vec<Literal> {
        let mut order: Vec<usize> = Vec::new();
        for (a, _, _) in path {
            if !order.contains(a) {
                order.push(*a);
            }
        }
        let mut body = Vec::new();
        for a in order {
            let attr = &self.schema.attributes[a];
            let last = attr.values.len() as u32 - 1;
            let (mut lo, mut hi) = (0u32, last);
            let mut eq: Option<u32> = None;
            let mut ne = Vec::new();
            for &(_, test, left) in path.iter().filter(|(x, _, _)| *x == a) {
                match (test, left) {
                    (SplitTest::Equals(c), true) => eq = Some(c),
                    (SplitTest::Equals(c), false) => ne.push(c),
                    (SplitTest::LeqCode(c), true) => hi = hi.min(c),
                    (SplitTest::LeqCode(c), false) => lo = lo.max(c + 1),
                }
            }
            let v = |c: u32| attr.value(c).clone();
            // Excluding all values but one is an equality on the remaining one.
            if eq.is_none() && !ne.is_empty() && ne.len() + 1 == attr.values.len() {
                eq = (0..=last).find(|c| !ne.contains(c));
            }
            if let Some(c) = eq {
                body.push(Literal::new(attr.name.clone(), LiteralTest::Equals(v(c))));
                continue;
            }
            for c in ne {
                body.push(Literal::new(attr.name.clone(), LiteralTest::NotEquals(v(c))));
            }
            let test = match (lo, hi) {
                (0, h) if h == last => None,
                (l, h) if l == h => Some(LiteralTest::Equals(v(l))),
                (0, h) => Some(LiteralTest::Leq(v(h))),
                (l, h) if h == last => Some(LiteralTest::Geq(v(l))),
                (l, h) => Some(LiteralTest::InRange(v(l), v(h))),
            };
            if let Some(test) = test {
                body.push(Literal::new(attr.name.clone(), test));
            }
        }
        body
    }
}

/// Share of instances for which more than three labels have a rule matched to
/// at least `threshold` and within `tolerance` of the best match.
pub fn ambiguity_rate(model: &MultiClassRuleModel, test: &Dataset, threshold: Fraction, tolerance: Fraction) -> Result<Fraction> {
    let predictor = RulePredictor::new(model, test.schema())?;
    let outputs = predictor.predict_all(test);
    let ambiguous = outputs
        .iter()
        .filter(|o| {
            let m = o.max_fraction();
            o.per_label_best.iter().filter(|b| b.fraction >= threshold && b.fraction >= m - tolerance).count() > 3
        })
        .count();
    Ok(ratio(ambiguous, test.len()))
}
