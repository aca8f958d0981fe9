//! Rule growing in code space, shared by FOIL and RIPPER.
//!
//! Instances are referred to by their position in the training dataset.
//! Literal scoring works on per-attribute histograms of the currently covered
//! positives and negatives, so one refinement step costs one pass over the
//! covered instances per attribute.

use crate::data::{AttributeKind, Dataset, Schema, MISSING};
use crate::rules::{Literal, LiteralTest, Rule};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LitOp {
    Eq,
    Leq,
    Geq,
}

/// Literal over schema codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CodeLit {
    pub attr: usize,
    pub op: LitOp,
    pub code: u32,
}

impl CodeLit {
    pub fn eq(attr: usize, code: u32) -> Self {
        CodeLit { attr, op: LitOp::Eq, code }
    }

    #[inline]
    pub fn holds_code(&self, c: u32) -> bool {
        c != MISSING
            && match self.op {
                LitOp::Eq => c == self.code,
                LitOp::Leq => c <= self.code,
                LitOp::Geq => c >= self.code,
            }
    }
}

/// Column-major copy of a dataset's codes.
pub struct Columns {
    cols: Vec<Vec<u32>>,
    numeric: Vec<bool>,
    nvals: Vec<usize>,
}

impl Columns {
    pub fn new(ds: &Dataset) -> Self {
        let schema = ds.schema();
        let cols = (0..schema.len())
            .map(|a| ds.instances().iter().map(|i| i.codes[a]).collect())
            .collect();
        Columns {
            cols,
            numeric: schema.attributes.iter().map(|a| a.kind == AttributeKind::Numeric).collect(),
            nvals: schema.attributes.iter().map(|a| a.values.len()).collect(),
        }
    }

    pub fn attrs(&self) -> usize {
        self.cols.len()
    }

    #[inline]
    pub fn code(&self, attr: usize, row: u32) -> u32 {
        self.cols[attr][row as usize]
    }

    #[inline]
    pub fn holds(&self, lit: &CodeLit, row: u32) -> bool {
        lit.holds_code(self.cols[lit.attr][row as usize])
    }

    #[inline]
    pub fn covers(&self, lits: &[CodeLit], row: u32) -> bool {
        lits.iter().all(|l| self.holds(l, row))
    }

    /// Number of leading literals the row satisfies.
    #[inline]
    pub fn prefix_depth(&self, lits: &[CodeLit], row: u32) -> usize {
        lits.iter().take_while(|l| self.holds(l, row)).count()
    }

    pub fn filter(&self, lits: &[CodeLit], rows: &[u32]) -> Vec<u32> {
        rows.iter().copied().filter(|&r| self.covers(lits, r)).collect()
    }

    /// Size of the literal universe: one equality per observed value, plus
    /// `<=`/`>=` at interior observed values of numeric attributes.
    pub fn universe(&self, rows: &[u32], thresholds: bool) -> usize {
        let mut total = 0;
        let mut seen = Vec::new();
        for a in 0..self.attrs() {
            seen.clear();
            seen.resize(self.nvals[a], false);
            for &r in rows {
                let c = self.code(a, r);
                if c != MISSING {
                    seen[c as usize] = true;
                }
            }
            let distinct = seen.iter().filter(|s| **s).count();
            total += distinct;
            if thresholds && self.numeric[a] && distinct >= 3 {
                total += 2 * (distinct - 2);
            }
        }
        total
    }
}

/// `p1 * (log2(p1 / (p1 + n1)) - log2(p0 / (p0 + n0)))`, or -inf when `p1 = 0`.
pub fn foil_gain<S: Scalar>(p0: usize, n0: usize, p1: usize, n1: usize) -> S {
    if p1 == 0 || p0 == 0 {
        return S::neg_infinity();
    }
    let f = |x: usize| S::from_usize(x).expect("count fits");
    let before = (f(p0) / f(p0 + n0)).log2();
    f(p1) * ((f(p1) / f(p1 + n1)).log2() - before)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Candidates {
    /// `a = v` on attributes the rule does not test yet.
    Equality,
    /// Equality plus `<=`/`>=` thresholds on numeric attributes.
    EqualityAndThresholds,
}

/// One literal choice during growing, kept for inspection.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowStep {
    pub prefix: Vec<CodeLit>,
    pub chosen: CodeLit,
    pub gain: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Grown {
    pub lits: Vec<CodeLit>,
    /// No candidate literal was acceptable while negatives remained covered.
    pub stuck: bool,
    pub covered_pos: Vec<u32>,
    pub covered_neg: Vec<u32>,
}

pub struct Grower<'a> {
    pub cols: &'a Columns,
    pub candidates: Candidates,
    /// Stop once the best literal does not raise precision.
    pub require_positive_gain: bool,
    hist_p: Vec<u32>,
    hist_n: Vec<u32>,
}

impl<'a> Grower<'a> {
    pub fn new(cols: &'a Columns, candidates: Candidates, require_positive_gain: bool) -> Self {
        Grower { cols, candidates, require_positive_gain, hist_p: Vec::new(), hist_n: Vec::new() }
    }

    pub fn grow(&mut self, pos: &[u32], neg: &[u32], seed: &[CodeLit], mut trace: Option<&mut Vec<GrowStep>>) -> Grown {
        let mut lits = seed.to_vec();
        let mut cp = self.cols.filter(&lits, pos);
        let mut cn = self.cols.filter(&lits, neg);
        let mut stuck = false;
        while !cn.is_empty() {
            let best = self.best_literal(&lits, &cp, &cn);
            let Some((lit, gain)) = best.filter(|(_, g)| !self.require_positive_gain || *g > 0.0) else {
                stuck = true;
                break;
            };
            if let Some(t) = trace.as_deref_mut() {
                t.push(GrowStep { prefix: lits.clone(), chosen: lit, gain });
            }
            lits.push(lit);
            cp.retain(|&r| self.cols.holds(&lit, r));
            cn.retain(|&r| self.cols.holds(&lit, r));
        }
        Grown { lits, stuck, covered_pos: cp, covered_neg: cn }
    }

    /// Highest finite-gain literal; earlier candidates win ties.
    pub fn best_literal(&mut self, lits: &[CodeLit], cp: &[u32], cn: &[u32]) -> Option<(CodeLit, f64)> {
        let (p0, n0) = (cp.len(), cn.len());
        if p0 == 0 {
            return None;
        }
        let base = ((p0 as f64) / ((p0 + n0) as f64)).log2();
        let gain = |p1: u32, n1: u32| -> f64 {
            if p1 == 0 {
                f64::NEG_INFINITY
            } else {
                let p1 = p1 as f64;
                p1 * ((p1 / (p1 + n1 as f64)).log2() - base)
            }
        };
        let mut best: Option<(CodeLit, f64)> = None;
        let mut consider = |lit: CodeLit, g: f64| {
            if g.is_finite() && best.is_none_or(|(_, b)| g > b) {
                best = Some((lit, g));
            }
        };
        for a in 0..self.cols.attrs() {
            let used = lits.iter().any(|l| l.attr == a);
            let has_eq = lits.iter().any(|l| l.attr == a && l.op == LitOp::Eq);
            let allow_eq = !used;
            let allow_thr =
                self.candidates == Candidates::EqualityAndThresholds && self.cols.numeric[a] && !has_eq;
            if !allow_eq && !allow_thr {
                continue;
            }
            let nv = self.cols.nvals[a];
            self.hist_p.clear();
            self.hist_p.resize(nv, 0);
            self.hist_n.clear();
            self.hist_n.resize(nv, 0);
            let col = &self.cols.cols[a];
            for &r in cp {
                let c = col[r as usize];
                if c != MISSING {
                    self.hist_p[c as usize] += 1;
                }
            }
            for &r in cn {
                let c = col[r as usize];
                if c != MISSING {
                    self.hist_n[c as usize] += 1;
                }
            }
            let (hp, hn) = (&self.hist_p, &self.hist_n);
            let observed = |c: usize| hp[c] + hn[c] > 0;
            let (lo, hi) = match ((0..nv).find(|&c| observed(c)), (0..nv).rfind(|&c| observed(c))) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => continue,
            };
            let (tot_p, tot_n): (u32, u32) = (hp.iter().sum(), hn.iter().sum());
            let (mut cum_p, mut cum_n) = (0u32, 0u32);
            for c in lo..=hi {
                cum_p += hp[c];
                cum_n += hn[c];
                if !observed(c) {
                    continue;
                }
                if allow_eq {
                    consider(CodeLit::eq(a, c as u32), gain(hp[c], hn[c]));
                }
                if allow_thr && c > lo && c < hi {
                    consider(CodeLit { attr: a, op: LitOp::Leq, code: c as u32 }, gain(cum_p, cum_n));
                    let (gp, gn) = (tot_p - cum_p + hp[c], tot_n - cum_n + hn[c]);
                    consider(CodeLit { attr: a, op: LitOp::Geq, code: c as u32 }, gain(gp, gn));
                }
            }
        }
        best
    }
}

/// Renders a code-space literal sequence as a rule, merging bounds on the
/// same attribute into one literal at the position of its first test.
pub fn to_rule(lits: &[CodeLit], schema: &Schema, target: &str) -> Rule {
    let mut bounds: Vec<(usize, u32, u32)> = Vec::new();
    for l in lits {
        let (lo, hi) = match l.op {
            LitOp::Eq => (l.code, l.code),
            LitOp::Leq => (0, l.code),
            LitOp::Geq => (l.code, u32::MAX),
        };
        match bounds.iter_mut().find(|(a, _, _)| *a == l.attr) {
            Some(b) => {
                b.1 = b.1.max(lo);
                b.2 = b.2.min(hi);
            }
            None => bounds.push((l.attr, lo, hi)),
        }
    }
    let body = bounds
        .into_iter()
        .map(|(a, lo, hi)| {
            let attr = &schema.attributes[a];
            let last = attr.values.len() as u32 - 1;
            let hi = hi.min(last);
            let v = |c: u32| attr.value(c).clone();
            let exact = lits.iter().any(|l| l.attr == a && l.op == LitOp::Eq);
            let test = if exact || lo == hi {
                LiteralTest::Equals(v(lo))
            } else if lo == 0 {
                LiteralTest::Leq(v(hi))
            } else if hi == last {
                LiteralTest::Geq(v(lo))
            } else {
                LiteralTest::InRange(v(lo), v(hi))
            };
            Literal::new(attr.name.clone(), test)
        })
        .collect();
    Rule::new(target, body)
}

/// Inverse of [`to_rule`] for rules over the same schema. Range literals
/// become a `>=`/`<=` pair.
pub fn from_rule(rule: &Rule, schema: &Schema) -> Option<Vec<CodeLit>> {
    let mut out = Vec::with_capacity(rule.body.len());
    for lit in &rule.body {
        let a = schema.attribute_index(&lit.attribute).ok()?;
        let attr = &schema.attributes[a];
        match &lit.test {
            LiteralTest::Equals(v) => out.push(CodeLit::eq(a, attr.code_of(v)?)),
            LiteralTest::Leq(v) => out.push(CodeLit { attr: a, op: LitOp::Leq, code: attr.code_of(v)? }),
            LiteralTest::Geq(v) => out.push(CodeLit { attr: a, op: LitOp::Geq, code: attr.code_of(v)? }),
            LiteralTest::InRange(lo, hi) => {
                out.push(CodeLit { attr: a, op: LitOp::Geq, code: attr.code_of(lo)? });
                out.push(CodeLit { attr: a, op: LitOp::Leq, code: attr.code_of(hi)? });
            }
            LiteralTest::NotEquals(_) => return None,
        }
    }
    Some(out)
}
