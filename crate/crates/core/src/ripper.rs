//! RIPPER: grow/prune rule generation with a description-length stop, then
//! `k` rounds of replacement/revision optimization.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::factorial::ln_binomial;

use crate::data::Dataset;
use crate::error::Result;
use crate::foil::split_rows;
use crate::rules::{MultiClassRuleModel, RuleSet};
use crate::scalar::{ratio, Fraction, Scalar};
use crate::search::{to_rule, Candidates, CodeLit, Columns, Grower};

#[derive(Clone, Debug, PartialEq)]
pub struct RipperConfig {
    /// Optimization rounds.
    pub k: usize,
    pub seed: u64,
    /// After optimization, learn extra rules for positives still uncovered.
    pub residual_pass: bool,
    /// Allowed growth of the description length before generation stops.
    pub dl_slack: f64,
}

impl Default for RipperConfig {
    fn default() -> Self {
        RipperConfig { k: 2, seed: 0, residual_pass: true, dl_slack: 64.0 }
    }
}

/// Description length in bits from raw counts.
///
/// Each rule of length `k` costs `0.5 * (ceil(log2(k + 1)) + k * log2(universe))`;
/// exceptions cost `log2 C(covered, fp) + log2 C(uncovered, fn)` plus a
/// `ceil(log2(covered + uncovered + 1))` header.
pub fn dl_from_counts<S: Scalar>(
    rule_lengths: &[usize],
    universe: usize,
    covered: usize,
    fp: usize,
    uncovered: usize,
    fn_: usize,
) -> S {
    let log2u = if universe > 1 { (universe as f64).log2() } else { 0.0 };
    let model: f64 = rule_lengths
        .iter()
        .map(|&k| 0.5 * (((k + 1) as f64).log2().ceil() + k as f64 * log2u))
        .sum();
    let lb = |n: usize, k: usize| ln_binomial(n as u64, k as u64) / std::f64::consts::LN_2;
    let header = ((covered + uncovered + 1) as f64).log2().ceil();
    S::lit(model + lb(covered, fp) + lb(uncovered, fn_) + header)
}

/// Prune score `(p - n) / (p + n)`, or -1 for a prefix covering nothing.
pub fn prune_value(p: usize, n: usize) -> Fraction {
    if p + n == 0 {
        Fraction::from_integer(-1)
    } else {
        Fraction::new(p as i64 - n as i64, (p + n) as i64)
    }
}

/// Keeps the prefix of `lits` with the best prune score; shorter wins ties.
/// Empty prune sets leave the rule as is, and a non-empty rule keeps at least
/// its first literal.
pub fn prune_rule(cols: &Columns, lits: &[CodeLit], prune_pos: &[u32], prune_neg: &[u32]) -> Vec<CodeLit> {
    if lits.is_empty() || (prune_pos.is_empty() && prune_neg.is_empty()) {
        return lits.to_vec();
    }
    let depth_counts = |rows: &[u32]| {
        let mut at_least = vec![0usize; lits.len() + 1];
        for &r in rows {
            at_least[cols.prefix_depth(lits, r)] += 1;
        }
        for k in (0..lits.len()).rev() {
            at_least[k] += at_least[k + 1];
        }
        at_least
    };
    let (p, n) = (depth_counts(prune_pos), depth_counts(prune_neg));
    let mut best_k = 1;
    let mut best_v = prune_value(p[1], n[1]);
    for k in 2..=lits.len() {
        let v = prune_value(p[k], n[k]);
        if v > best_v {
            best_k = k;
            best_v = v;
        }
    }
    lits[..best_k].to_vec()
}

#[derive(Clone, Debug)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(len: usize) -> Self {
        Bits(vec![0; len.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn count_union<'a>(sets: impl Iterator<Item = &'a Bits>, words: usize) -> usize {
        let mut acc = vec![0u64; words];
        for s in sets {
            for (a, w) in acc.iter_mut().zip(&s.0) {
                *a |= w;
            }
        }
        acc.iter().map(|w| w.count_ones() as usize).sum()
    }
}

#[derive(Clone, Debug)]
struct Learned {
    lits: Vec<CodeLit>,
    pos: Bits,
    neg: Bits,
}

/// Fixed positives/negatives against which description lengths are measured.
struct DlContext<'a> {
    cols: &'a Columns,
    pos: &'a [u32],
    neg: &'a [u32],
    universe: usize,
}

impl<'a> DlContext<'a> {
    fn learned(&self, lits: Vec<CodeLit>) -> Learned {
        let mut pos = Bits::new(self.pos.len());
        let mut neg = Bits::new(self.neg.len());
        for (i, &r) in self.pos.iter().enumerate() {
            if self.cols.covers(&lits, r) {
                pos.set(i);
            }
        }
        for (i, &r) in self.neg.iter().enumerate() {
            if self.cols.covers(&lits, r) {
                neg.set(i);
            }
        }
        Learned { lits, pos, neg }
    }

    fn dl<'r>(&self, rules: impl Iterator<Item = &'r Learned> + Clone) -> f64 {
        let lengths: Vec<usize> = rules.clone().map(|r| r.lits.len()).collect();
        let tp = Bits::count_union(rules.clone().map(|r| &r.pos), self.pos.len().div_ceil(64));
        let fp = Bits::count_union(rules.map(|r| &r.neg), self.neg.len().div_ceil(64));
        let fn_ = self.pos.len() - tp;
        let uncovered = self.neg.len() - fp + fn_;
        dl_from_counts(&lengths, self.universe, tp + fp, fp, uncovered, fn_)
    }

    fn dl_all(&self, rules: &[Learned]) -> f64 {
        self.dl(rules.iter())
    }

    fn dl_without(&self, rules: &[Learned], skip: usize) -> f64 {
        self.dl(rules.iter().enumerate().filter(move |(i, _)| *i != skip).map(|(_, r)| r))
    }

    fn dl_with<'r>(&self, rules: &'r [Learned], at: usize, replacement: &'r Learned) -> f64 {
        self.dl(rules.iter().enumerate().map(move |(i, r)| if i == at { replacement } else { r }))
    }

    /// Deletes, from last to first, every rule whose removal lowers the DL.
    fn reverse_sweep(&self, rules: &mut Vec<Learned>) {
        let mut current = self.dl_all(rules);
        for i in (0..rules.len()).rev() {
            let without = self.dl_without(rules, i);
            if without < current {
                rules.remove(i);
                current = without;
            }
        }
    }
}

/// Stratified two-thirds/one-third split of each class.
fn grow_prune_split(pos: &[u32], neg: &[u32], rng: &mut ChaCha8Rng) -> [Vec<u32>; 4] {
    let mut part = |rows: &[u32]| {
        let mut v = rows.to_vec();
        v.shuffle(rng);
        let cut = (2 * v.len()).div_ceil(3);
        let mut prune = v.split_off(cut);
        v.sort_unstable();
        prune.sort_unstable();
        (v, prune)
    };
    let (gp, pp) = part(pos);
    let (gn, pn) = part(neg);
    [gp, gn, pp, pn]
}

/// DL values after each accepted rule, for logging.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RipperTrace {
    pub generated_dl: Vec<f64>,
    pub stopped_by_dl: bool,
    /// DL before and after each optimization step.
    pub optimized_dl: Vec<(f64, f64)>,
    /// DL just before the closing reverse sweep, when one runs.
    pub pre_sweep_dl: Option<f64>,
    pub final_dl: f64,
}

struct Ripper<'a> {
    cols: &'a Columns,
    grower: Grower<'a>,
    universe: usize,
    dl_slack: f64,
    rng: ChaCha8Rng,
}

impl<'a> Ripper<'a> {
    fn grow_and_prune(&mut self, split: &[Vec<u32>; 4], seed: &[CodeLit]) -> Vec<CodeLit> {
        let [gp, gn, pp, pn] = split;
        let grown = self.grower.grow(gp, gn, seed, None);
        prune_rule(self.cols, &grown.lits, pp, pn)
    }

    fn generate(&mut self, pos: &[u32], neg: &[u32], trace: &mut RipperTrace) -> Vec<Learned> {
        let ctx = DlContext { cols: self.cols, pos, neg, universe: self.universe };
        let mut rules: Vec<Learned> = Vec::new();
        let mut dl = ctx.dl_all(&rules);
        let mut p = pos.to_vec();
        let mut n = neg.to_vec();
        while !p.is_empty() {
            let split = grow_prune_split(&p, &n, &mut self.rng);
            let lits = self.grow_and_prune(&split, &[]);
            if !p.iter().any(|&r| self.cols.covers(&lits, r)) {
                break;
            }
            rules.push(ctx.learned(lits));
            let new_dl = ctx.dl_all(&rules);
            if new_dl > dl + self.dl_slack {
                trace.stopped_by_dl = true;
                ctx.reverse_sweep(&mut rules);
                break;
            }
            dl = new_dl;
            trace.generated_dl.push(dl);
            let last = &rules.last().unwrap().lits;
            p.retain(|&r| !self.cols.covers(last, r));
            n.retain(|&r| !self.cols.covers(last, r));
        }
        rules
    }

    fn optimize(&mut self, rules: &mut [Learned], pos: &[u32], neg: &[u32], trace: &mut RipperTrace) {
        let ctx = DlContext { cols: self.cols, pos, neg, universe: self.universe };
        for i in 0..rules.len() {
            let others = |r: u32| rules.iter().enumerate().any(|(j, x)| j != i && self.cols.covers(&x.lits, r));
            let up: Vec<u32> = pos.iter().copied().filter(|&r| !others(r)).collect();
            let un: Vec<u32> = neg.iter().copied().filter(|&r| !others(r)).collect();
            if up.is_empty() {
                continue;
            }
            let split = grow_prune_split(&up, &un, &mut self.rng);
            let replacement = ctx.learned(self.grow_and_prune(&split, &[]));
            let revision = ctx.learned(self.grow_and_prune(&split, &rules[i].lits.clone()));
            let before = ctx.dl_all(rules);
            let mut best = before;
            let mut choice = None;
            for cand in [replacement, revision] {
                let d = ctx.dl_with(rules, i, &cand);
                if d < best {
                    best = d;
                    choice = Some(cand);
                }
            }
            if let Some(c) = choice {
                rules[i] = c;
            }
            trace.optimized_dl.push((before, best));
        }
    }
}

/// Learns a rule set for `pos` against `neg` (row positions in `cols`).
pub fn ripper_codes(cols: &Columns, pos: &[u32], neg: &[u32], cfg: &RipperConfig) -> (Vec<Vec<CodeLit>>, RipperTrace) {
    let all: Vec<u32> = pos.iter().chain(neg).copied().collect();
    let mut r = Ripper {
        cols,
        grower: Grower::new(cols, Candidates::EqualityAndThresholds, true),
        universe: cols.universe(&all, true),
        dl_slack: cfg.dl_slack,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    let mut trace = RipperTrace::default();
    let mut rules = r.generate(pos, neg, &mut trace);
    let ctx = DlContext { cols, pos, neg, universe: r.universe };
    if cfg.k > 0 {
        for _ in 0..cfg.k {
            r.optimize(&mut rules, pos, neg, &mut trace);
        }
        if cfg.residual_pass {
            let covered = |x: u32| rules.iter().any(|l| cols.covers(&l.lits, x));
            let up: Vec<u32> = pos.iter().copied().filter(|&x| !covered(x)).collect();
            let un: Vec<u32> = neg.iter().copied().filter(|&x| !covered(x)).collect();
            if !up.is_empty() {
                let mut extra_trace = RipperTrace::default();
                let extra = r.generate(&up, &un, &mut extra_trace);
                rules.extend(extra.into_iter().map(|l| ctx.learned(l.lits)));
            }
        }
        trace.pre_sweep_dl = Some(ctx.dl_all(&rules));
        ctx.reverse_sweep(&mut rules);
    }
    trace.final_dl = ctx.dl_all(&rules);
    (rules.into_iter().map(|l| l.lits).collect(), trace)
}

/// Only generation, without optimization.
pub fn generate_ruleset_codes(cols: &Columns, pos: &[u32], neg: &[u32], seed: u64) -> Vec<Vec<CodeLit>> {
    ripper_codes(cols, pos, neg, &RipperConfig { k: 0, seed, ..RipperConfig::default() }).0
}

/// Description length of a code-space rule set against `pos`/`neg`.
pub fn description_length(cols: &Columns, rules: &[Vec<CodeLit>], pos: &[u32], neg: &[u32]) -> f64 {
    let all: Vec<u32> = pos.iter().chain(neg).copied().collect();
    let ctx = DlContext { cols, pos, neg, universe: cols.universe(&all, true) };
    let learned: Vec<Learned> = rules.iter().map(|l| ctx.learned(l.clone())).collect();
    ctx.dl_all(&learned)
}

fn label_seed(seed: u64, label: usize) -> u64 {
    seed ^ (label as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// One-vs-rest RIPPER over every label of the training set.
pub fn train_ripper(train: &Dataset, cfg: &RipperConfig) -> Result<(MultiClassRuleModel, Vec<RipperTrace>)> {
    let cols = Columns::new(train);
    let schema = train.schema();
    let learned: Vec<(Vec<Vec<CodeLit>>, RipperTrace)> = (0..schema.labels.len())
        .into_par_iter()
        .map(|l| {
            let (pos, neg) = split_rows(train, l as u32);
            ripper_codes(&cols, &pos, &neg, &RipperConfig { seed: label_seed(cfg.seed, l), ..cfg.clone() })
        })
        .collect();
    let mut traces = Vec::with_capacity(learned.len());
    let rulesets = schema
        .labels
        .iter()
        .zip(learned)
        .map(|(label, (rules, trace))| {
            traces.push(trace);
            RuleSet { target: label.clone(), rules: rules.iter().map(|l| to_rule(l, schema, label)).collect() }
        })
        .collect();
    Ok((MultiClassRuleModel::new("ripper", schema.label_name.clone(), rulesets)?, traces))
}

/// Plain-text DL log, one line per event.
pub fn render_trace(labels: &[String], traces: &[RipperTrace]) -> String {
    let mut out = String::new();
    for (label, t) in labels.iter().zip(traces) {
        for (i, dl) in t.generated_dl.iter().enumerate() {
            out.push_str(&format!("{label}\tgenerate\t{}\t{dl:.4}\n", i + 1));
        }
        if t.stopped_by_dl {
            out.push_str(&format!("{label}\tdl_stop\n"));
        }
        for (i, (before, after)) in t.optimized_dl.iter().enumerate() {
            out.push_str(&format!("{label}\toptimize\t{}\t{before:.4}\t{after:.4}\n", i + 1));
        }
        out.push_str(&format!("{label}\tfinal\t{:.4}\n", t.final_dl));
    }
    out
}

/// Training accuracy of a one-vs-rest rule set, as used by the k-comparison check.
pub fn binary_accuracy(cols: &Columns, rules: &[Vec<CodeLit>], pos: &[u32], neg: &[u32]) -> Fraction {
    let covered = |r: u32| rules.iter().any(|l| cols.covers(l, r));
    let right = pos.iter().filter(|&&r| covered(r)).count() + neg.iter().filter(|&&r| !covered(r)).count();
    ratio(right, pos.len() + neg.len())
}
