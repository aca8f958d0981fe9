//! Declarative per-dataset transforms: rounding, thresholding, imputation.
//!
//! A recipe is a list of steps, each an operation applied to the attributes
//! picked by a selector. Statistics (means, medians, distinct counts) are
//! always fitted on the training table and then applied to train and test.
//!
//! Recipe files are plain text, one entry per line:
//!
//! ```text
//! name = heart
//! step = round_nearest Age,Trestbps,Chol,Thalach 10
//! step = cast_integer Oldpeak
//! step = impute Ca,Thal mean
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use num_rational::Ratio;
use num_traits::{CheckedAdd, One, ToPrimitive, Zero};
use regex::Regex;

use crate::data::{AttributeKind, Dataset, Label, RawTable, SplitTag, Value};
use crate::error::{Error, Result};
use crate::scalar::{format_number, parse_number, Number};

#[derive(Clone, Debug)]
pub enum SelectorBase {
    All,
    Names(Vec<String>),
    Pattern(Regex),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SelectorFilter {
    Numeric,
    Nominal,
    DistinctAbove(usize),
}

/// Picks attributes by name list, regex or `*`, optionally narrowed by
/// `@numeric`, `@nominal` or `@distinct>N` filters.
#[derive(Clone, Debug)]
pub struct Selector {
    pub base: SelectorBase,
    pub filters: Vec<SelectorFilter>,
}

impl PartialEq for Selector {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

impl Selector {
    pub fn names<S: AsRef<str>>(names: &[S]) -> Self {
        Selector {
            base: SelectorBase::Names(names.iter().map(|n| n.as_ref().to_string()).collect()),
            filters: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut parts = text.split('@');
        let base = match parts.next().unwrap_or("") {
            "" => return Err(Error::Recipe(format!("empty selector in {text:?}"))),
            "*" => SelectorBase::All,
            s => match s.strip_prefix("re:") {
                Some(pat) => SelectorBase::Pattern(
                    Regex::new(pat).map_err(|e| Error::Recipe(format!("bad pattern {pat:?}: {e}")))?,
                ),
                None => SelectorBase::Names(s.split(',').map(str::to_string).collect()),
            },
        };
        let filters = parts
            .map(|f| match f {
                "numeric" => Ok(SelectorFilter::Numeric),
                "nominal" => Ok(SelectorFilter::Nominal),
                _ => f
                    .strip_prefix("distinct>")
                    .and_then(|n| n.parse().ok())
                    .map(SelectorFilter::DistinctAbove)
                    .ok_or_else(|| Error::Recipe(format!("unknown selector filter {f:?}"))),
            })
            .collect::<Result<_>>()?;
        Ok(Selector { base, filters })
    }

    /// Column indices in table order. The base must match something; filters may empty it.
    pub fn resolve(&self, table: &RawTable) -> Result<Vec<usize>> {
        let matched: Vec<usize> = match &self.base {
            SelectorBase::All => (0..table.names.len()).collect(),
            SelectorBase::Names(names) => {
                let mut out = Vec::with_capacity(names.len());
                for name in names {
                    let idx = table
                        .names
                        .iter()
                        .position(|n| n == name)
                        .ok_or_else(|| Error::Recipe(format!("selector matches no attribute named {name:?}")))?;
                    out.push(idx);
                }
                out
            }
            SelectorBase::Pattern(re) => (0..table.names.len()).filter(|&i| re.is_match(&table.names[i])).collect(),
        };
        if matched.is_empty() {
            return Err(Error::Recipe(format!("selector {self} matches nothing")));
        }
        Ok(matched
            .into_iter()
            .filter(|&i| {
                self.filters.iter().all(|f| match f {
                    SelectorFilter::Numeric => table.kinds[i] == AttributeKind::Numeric,
                    SelectorFilter::Nominal => table.kinds[i] == AttributeKind::Nominal,
                    SelectorFilter::DistinctAbove(n) => distinct_count(&table.columns[i]) > *n,
                })
            })
            .collect())
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.base {
            SelectorBase::All => f.write_str("*")?,
            SelectorBase::Names(names) => f.write_str(&names.join(","))?,
            SelectorBase::Pattern(re) => write!(f, "re:{}", re.as_str())?,
        }
        for filter in &self.filters {
            match filter {
                SelectorFilter::Numeric => f.write_str("@numeric")?,
                SelectorFilter::Nominal => f.write_str("@nominal")?,
                SelectorFilter::DistinctAbove(n) => write!(f, "@distinct>{n}")?,
            }
        }
        Ok(())
    }
}

fn distinct_count(column: &[Option<Value>]) -> usize {
    let mut values: Vec<&Value> = column.iter().flatten().collect();
    values.sort();
    values.dedup();
    values.len()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Mean,
    Median,
    Mode,
}

impl Strategy {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Strategy::Mean),
            "median" => Ok(Strategy::Median),
            "mode" => Ok(Strategy::Mode),
            _ => Err(Error::Recipe(format!("unknown impute strategy {s:?}"))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Strategy::Mean => "mean",
            Strategy::Median => "median",
            Strategy::Mode => "mode",
        }
    }
}

/// Bound of a half-open or closed interval; `None` is unbounded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: Option<(Number, bool)>,
    pub hi: Option<(Number, bool)>,
}

impl Interval {
    pub fn contains(&self, v: &Number) -> bool {
        let above = match &self.lo {
            None => true,
            Some((lo, true)) => v >= lo,
            Some((lo, false)) => v > lo,
        };
        let below = match &self.hi {
            None => true,
            Some((hi, true)) => v <= hi,
            Some((hi, false)) => v < hi,
        };
        above && below
    }

    fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Recipe(format!("bad interval {s:?}"));
        let lo_closed = match s.chars().next() {
            Some('[') => true,
            Some('(') => false,
            _ => return Err(bad()),
        };
        let hi_closed = match s.chars().last() {
            Some(']') => true,
            Some(')') => false,
            _ => return Err(bad()),
        };
        let inner = &s[1..s.len() - 1];
        let (lo, hi) = inner.split_once(',').ok_or_else(bad)?;
        let bound = |t: &str, closed: bool| -> Result<Option<(Number, bool)>> {
            if t.trim().is_empty() {
                Ok(None)
            } else {
                parse_number(t).map(|n| Some((n, closed))).ok_or_else(bad)
            }
        };
        Ok(Interval { lo: bound(lo, lo_closed)?, hi: bound(hi, hi_closed)? })
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (open, lo) = match &self.lo {
            None => ('(', String::new()),
            Some((n, c)) => (if *c { '[' } else { '(' }, format_number(n)),
        };
        let (close, hi) = match &self.hi {
            None => (')', String::new()),
            Some((n, c)) => (if *c { ']' } else { ')' }, format_number(n)),
        };
        write!(f, "{open}{lo},{hi}{close}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    RoundDecimal(u32),
    RoundNearest(Number),
    /// First matching interval picks the granularity; values outside all intervals pass through.
    RoundConditional(Vec<(Interval, Number)>),
    CastInteger,
    GroupAbove { threshold: Number, replacement: Number },
    /// `v > t` becomes 1, everything else 0.
    Binarize(Number),
    Impute(Strategy),
    /// Statistic fitted per class label. Uses each row's own label, test rows included.
    ImputeByLabel(Strategy),
    MarkMissing(Value),
    Drop,
    /// Removes rows with more than `n` missing cells among the selected attributes.
    FilterMissing(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransformSpec {
    pub selector: Selector,
    pub op: Op,
}

impl TransformSpec {
    pub fn new(selector: Selector, op: Op) -> Self {
        TransformSpec { selector, op }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let (op, selector, args) = match tokens.as_slice() {
            [op, selector, args @ ..] => (*op, Selector::parse(selector)?, args),
            _ => return Err(Error::Recipe(format!("step needs an operation and a selector: {text:?}"))),
        };
        let number = |i: usize| -> Result<Number> {
            args.get(i)
                .and_then(|a| parse_number(a))
                .ok_or_else(|| Error::Recipe(format!("{op}: argument {} must be a number", i + 1)))
        };
        let arity = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::Recipe(format!("{op} takes {n} argument(s), got {}", args.len())))
            }
        };
        let op = match op {
            "round_decimal" => {
                arity(1)?;
                Op::RoundDecimal(args[0].parse().map_err(|_| Error::Recipe("round_decimal: bad places".into()))?)
            }
            "round_nearest" => {
                arity(1)?;
                let m = number(0)?;
                if m <= Number::zero() {
                    return Err(Error::Recipe("round_nearest: granularity must be positive".into()));
                }
                Op::RoundNearest(m)
            }
            "round_conditional" => {
                if args.is_empty() {
                    return Err(Error::Recipe("round_conditional needs at least one interval".into()));
                }
                let mut ranges = Vec::with_capacity(args.len());
                for arg in args.iter() {
                    let (interval, m) = arg
                        .rsplit_once(':')
                        .ok_or_else(|| Error::Recipe(format!("expected interval:granularity, got {arg:?}")))?;
                    let m = parse_number(m)
                        .filter(|m| *m > Number::zero())
                        .ok_or_else(|| Error::Recipe(format!("bad granularity in {arg:?}")))?;
                    ranges.push((Interval::parse(interval)?, m));
                }
                Op::RoundConditional(ranges)
            }
            "cast_integer" => {
                arity(0)?;
                Op::CastInteger
            }
            "group_above" => {
                if args.is_empty() || args.len() > 2 {
                    return Err(Error::Recipe("group_above takes a threshold and an optional replacement".into()));
                }
                let threshold = number(0)?;
                let replacement = if args.len() == 2 { number(1)? } else { threshold + Number::one() };
                Op::GroupAbove { threshold, replacement }
            }
            "binarize" => {
                arity(1)?;
                Op::Binarize(number(0)?)
            }
            "impute" => {
                arity(1)?;
                Op::Impute(Strategy::parse(args[0])?)
            }
            "impute_by_label" => {
                arity(1)?;
                Op::ImputeByLabel(Strategy::parse(args[0])?)
            }
            "mark_missing" => {
                arity(1)?;
                Op::MarkMissing(parse_number(args[0]).map_or_else(|| Value::Nom(args[0].to_string()), Value::Num))
            }
            "drop" => {
                arity(0)?;
                Op::Drop
            }
            "filter_missing" => {
                arity(1)?;
                Op::FilterMissing(args[0].parse().map_err(|_| Error::Recipe("filter_missing: bad count".into()))?)
            }
            other => return Err(Error::Recipe(format!("unknown operation {other:?}"))),
        };
        Ok(TransformSpec { selector, op })
    }
}

impl fmt::Display for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sel = &self.selector;
        match &self.op {
            Op::RoundDecimal(k) => write!(f, "round_decimal {sel} {k}"),
            Op::RoundNearest(m) => write!(f, "round_nearest {sel} {}", format_number(m)),
            Op::RoundConditional(ranges) => {
                write!(f, "round_conditional {sel}")?;
                for (interval, m) in ranges {
                    write!(f, " {interval}:{}", format_number(m))?;
                }
                Ok(())
            }
            Op::CastInteger => write!(f, "cast_integer {sel}"),
            Op::GroupAbove { threshold, replacement } => {
                write!(f, "group_above {sel} {} {}", format_number(threshold), format_number(replacement))
            }
            Op::Binarize(t) => write!(f, "binarize {sel} {}", format_number(t)),
            Op::Impute(s) => write!(f, "impute {sel} {}", s.name()),
            Op::ImputeByLabel(s) => write!(f, "impute_by_label {sel} {}", s.name()),
            Op::MarkMissing(v) => write!(f, "mark_missing {sel} {v}"),
            Op::Drop => write!(f, "drop {sel}"),
            Op::FilterMissing(n) => write!(f, "filter_missing {sel} {n}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recipe {
    pub name: String,
    pub steps: Vec<TransformSpec>,
}

impl Recipe {
    pub fn parse(text: &str) -> Result<Self> {
        let mut name = None;
        let mut steps = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = |e: Error| match e {
                Error::Recipe(m) => Error::Recipe(format!("line {}: {m}", lineno + 1)),
                other => other,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(Error::Recipe(format!("expected key = value, got {line:?}"))))?;
            match key.trim() {
                "name" => name = Some(value.trim().to_string()),
                "step" => steps.push(TransformSpec::parse(value.trim()).map_err(at)?),
                other => return Err(at(Error::Recipe(format!("unknown key {other:?}")))),
            }
        }
        Ok(Recipe { name: name.unwrap_or_default(), steps })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Recipe::parse(&std::fs::read_to_string(path)?)
    }

    /// Shipped recipe by name, or a recipe file path.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match builtin_recipe(name_or_path) {
            Some(r) => Ok(r),
            None => Recipe::load(name_or_path),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("name = {}\n", self.name);
        for step in &self.steps {
            out.push_str(&format!("step = {step}\n"));
        }
        out
    }
}

const BUILTIN: &[(&str, &str)] = &[
    ("spambase", include_str!("../recipes/spambase.recipe")),
    ("heart", include_str!("../recipes/heart.recipe")),
    ("diabetes", include_str!("../recipes/diabetes.recipe")),
    ("covid", include_str!("../recipes/covid.recipe")),
    ("covid_restricted", include_str!("../recipes/covid_restricted.recipe")),
    ("mnist", include_str!("../recipes/mnist.recipe")),
    ("fashion_mnist", include_str!("../recipes/fashion_mnist.recipe")),
];

pub fn builtin_recipe_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}

pub fn builtin_recipe(name: &str) -> Option<Recipe> {
    BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| Recipe::parse(text).expect("shipped recipe parses"))
}

/// Applies a recipe fitted on the dataset itself.
pub fn apply_recipe(dataset: &Dataset, recipe: &Recipe) -> Result<Dataset> {
    let mut table = dataset.to_table();
    for step in &recipe.steps {
        apply_step(step, &mut table, &mut [])?;
    }
    Dataset::from_table(&table, dataset.split_tag())
}

/// Fits every step on `train` and applies it to both sides. The outputs share one schema.
pub fn apply_recipe_pair(train: &Dataset, test: &Dataset, recipe: &Recipe) -> Result<(Dataset, Dataset)> {
    let mut tr = train.to_table();
    let mut te = test.to_table();
    for step in &recipe.steps {
        apply_step(step, &mut tr, std::slice::from_mut(&mut te))?;
    }
    let mut out = Dataset::from_tables(&[(&tr, SplitTag::Train), (&te, SplitTag::Test)])?;
    let test = out.pop().expect("two tables");
    let train = out.pop().expect("two tables");
    Ok((train, test))
}

/// Imputes one attribute; a thin wrapper over a single-step recipe.
pub fn impute(dataset: &Dataset, attribute: &str, strategy: Strategy) -> Result<Dataset> {
    let recipe = Recipe {
        name: String::new(),
        steps: vec![TransformSpec::new(Selector::names(&[attribute]), Op::Impute(strategy))],
    };
    apply_recipe(dataset, &recipe)
}

fn apply_step(step: &TransformSpec, fit: &mut RawTable, others: &mut [RawTable]) -> Result<()> {
    let cols = step.selector.resolve(fit)?;
    let needs_numeric = !matches!(
        step.op,
        Op::Drop | Op::FilterMissing(_) | Op::MarkMissing(_) | Op::Impute(Strategy::Mode) | Op::ImputeByLabel(Strategy::Mode)
    );
    if needs_numeric {
        if let Some(&c) = cols.iter().find(|&&c| fit.kinds[c] != AttributeKind::Numeric) {
            return Err(Error::Type(format!("{step}: attribute {:?} is nominal", fit.names[c])));
        }
    }
    match &step.op {
        Op::Drop => {
            for table in std::iter::once(&mut *fit).chain(others.iter_mut()) {
                let mut keep = vec![true; table.names.len()];
                for &c in &cols {
                    keep[c] = false;
                }
                let mut it = keep.iter();
                table.names.retain(|_| *it.next().unwrap());
                let mut it = keep.iter();
                table.kinds.retain(|_| *it.next().unwrap());
                let mut it = keep.iter();
                table.columns.retain(|_| *it.next().unwrap());
            }
        }
        Op::FilterMissing(limit) => {
            for table in std::iter::once(&mut *fit).chain(others.iter_mut()) {
                let keep: Vec<bool> = (0..table.rows())
                    .map(|r| cols.iter().filter(|&&c| table.columns[c][r].is_none()).count() <= *limit)
                    .collect();
                retain_rows(table, &keep);
            }
        }
        Op::Impute(strategy) => {
            for &c in &cols {
                let fill = statistic(fit.columns[c].iter().flatten(), *strategy)
                    .ok_or_else(|| Error::Impute(format!("attribute {:?} has no observed values", fit.names[c])))?;
                for table in std::iter::once(&mut *fit).chain(others.iter_mut()) {
                    for cell in table.columns[c].iter_mut().filter(|v| v.is_none()) {
                        *cell = Some(fill.clone());
                    }
                }
            }
        }
        Op::ImputeByLabel(strategy) => {
            for &c in &cols {
                let overall = statistic(fit.columns[c].iter().flatten(), *strategy)
                    .ok_or_else(|| Error::Impute(format!("attribute {:?} has no observed values", fit.names[c])))?;
                let mut groups: BTreeMap<&Label, Vec<&Value>> = BTreeMap::new();
                for (v, l) in fit.columns[c].iter().zip(&fit.labels) {
                    if let (Some(v), Some(l)) = (v, l) {
                        groups.entry(l).or_default().push(v);
                    }
                }
                let per_label: HashMap<Label, Value> = groups
                    .into_iter()
                    .filter_map(|(l, vs)| statistic(vs.into_iter(), *strategy).map(|s| (l.clone(), s)))
                    .collect();
                for table in std::iter::once(&mut *fit).chain(others.iter_mut()) {
                    let RawTable { columns, labels, .. } = table;
                    for (cell, label) in columns[c].iter_mut().zip(labels.iter()) {
                        if cell.is_none() {
                            let fill = label.as_ref().and_then(|l| per_label.get(l)).unwrap_or(&overall);
                            *cell = Some(fill.clone());
                        }
                    }
                }
            }
        }
        op => {
            for table in std::iter::once(&mut *fit).chain(others.iter_mut()) {
                for &c in &cols {
                    for cell in table.columns[c].iter_mut() {
                        *cell = map_cell(op, cell.take());
                    }
                }
            }
        }
    }
    Ok(())
}

fn retain_rows(table: &mut RawTable, keep: &[bool]) {
    let filter = |v: &mut Vec<_>| {
        let mut it = keep.iter();
        v.retain(|_| *it.next().unwrap());
    };
    for col in &mut table.columns {
        let mut it = keep.iter();
        col.retain(|_| *it.next().unwrap());
    }
    filter(&mut table.labels);
    let mut it = keep.iter();
    table.ids.retain(|_| *it.next().unwrap());
}

fn map_cell(op: &Op, cell: Option<Value>) -> Option<Value> {
    if let Op::MarkMissing(target) = op {
        return cell.filter(|v| v != target);
    }
    let Some(Value::Num(v)) = cell else {
        return cell;
    };
    let out = match op {
        Op::RoundDecimal(k) => {
            let scale = Number::from_integer(10).pow(*k as i32);
            (v * scale).round() / scale
        }
        Op::RoundNearest(m) => round_nearest(v, m),
        Op::RoundConditional(ranges) => match ranges.iter().find(|(i, _)| i.contains(&v)) {
            Some((_, m)) => round_nearest(v, m),
            None => v,
        },
        Op::CastInteger => v.trunc(),
        Op::GroupAbove { threshold, replacement } => {
            if v > *threshold {
                *replacement
            } else {
                v
            }
        }
        Op::Binarize(t) => {
            if v > *t {
                Number::one()
            } else {
                Number::zero()
            }
        }
        _ => v,
    };
    Some(Value::Num(out))
}

/// Half away from zero.
fn round_nearest(v: Number, m: &Number) -> Number {
    (v / m).round() * m
}

fn statistic<'a>(values: impl Iterator<Item = &'a Value>, strategy: Strategy) -> Option<Value> {
    let mut vs: Vec<&Value> = values.collect();
    if vs.is_empty() {
        return None;
    }
    vs.sort();
    match strategy {
        Strategy::Mode => {
            let mut best: (&Value, usize) = (vs[0], 0);
            let mut i = 0;
            while i < vs.len() {
                let j = i + vs[i..].iter().take_while(|v| **v == vs[i]).count();
                if j - i > best.1 {
                    best = (vs[i], j - i);
                }
                i = j;
            }
            Some(best.0.clone())
        }
        Strategy::Median => {
            let n = vs.len();
            let (a, b) = (vs[(n - 1) / 2].as_number()?, vs[n / 2].as_number()?);
            Some(Value::Num(exact_mean([*a, *b].iter())))
        }
        Strategy::Mean => {
            let nums: Option<Vec<Number>> = vs.iter().map(|v| v.as_number().copied()).collect();
            Some(Value::Num(exact_mean(nums?.iter())))
        }
    }
}

/// Mean accumulated in 128-bit rationals; falls back to a float approximation
/// if the exact result does not fit back into 64 bits.
fn exact_mean<'a>(values: impl Iterator<Item = &'a Number>) -> Number {
    let mut sum = Ratio::<i128>::zero();
    let mut count = 0i128;
    let mut float_sum = 0.0f64;
    let mut exact = true;
    for v in values {
        count += 1;
        float_sum += v.to_f64().unwrap_or(0.0);
        if exact {
            let wide = Ratio::new(*v.numer() as i128, *v.denom() as i128);
            match sum.checked_add(&wide) {
                Some(s) => sum = s,
                None => exact = false,
            }
        }
    }
    if exact {
        let mean = sum / Ratio::from_integer(count);
        if let (Ok(n), Ok(d)) = (i64::try_from(*mean.numer()), i64::try_from(*mean.denom())) {
            return Number::new(n, d);
        }
    }
    Number::approximate_float(float_sum / count as f64).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{read_csv, split};
    use crate::scalar::Fraction;

    fn single(op: &str, column: &str) -> Vec<Option<Value>> {
        let ds = read_csv(format!("x,y\n{}", column).as_bytes(), "y").unwrap();
        let recipe = Recipe::parse(&format!("step = {op}")).unwrap();
        apply_recipe(&ds, &recipe).unwrap().to_table().columns.remove(0)
    }

    fn nums(vals: &[&str]) -> Vec<Option<Value>> {
        vals.iter().map(|v| parse_number(v).map(Value::Num)).collect()
    }

    #[test]
    fn round_decimal_one_place() {
        assert_eq!(single("round_decimal x 1", "0.1234,a\n0.25,a\n-0.25,b\n"), nums(&["0.1", "0.3", "-0.3"]));
    }

    #[test]
    fn conditional_rounding_spambase_style() {
        let out = single(
            "round_conditional x [10,100]:10 (100,]:100",
            "57,a\n5,a\n150,a\n1234,b\n100,b\n",
        );
        assert_eq!(out, nums(&["60", "5", "200", "1200", "100"]));
    }

    #[test]
    fn binarize_pixels() {
        assert_eq!(single("binarize x 0.05", "0.0,a\n0.04,a\n0.06,b\n1.0,b\n"), nums(&["0", "0", "1", "1"]));
    }

    #[test]
    fn group_above_and_cast() {
        assert_eq!(single("group_above x 5", "3,a\n7,a\n12,b\n"), nums(&["3", "6", "6"]));
        assert_eq!(single("cast_integer x", "3.7,a\n-2.5,a\n"), nums(&["3", "-2"]));
    }

    #[test]
    fn impute_mean_median_mode() {
        assert_eq!(single("impute x mean", "1,a\n?,a\n3,b\n"), nums(&["1", "2", "3"]));
        assert_eq!(single("impute x median", "1,a\n?,a\n3,b\n100,b\n"), nums(&["1", "3", "3", "100"]));
        let nominal = single("impute x mode", "a,p\n?,p\na,q\nb,q\n");
        assert_eq!(nominal[1], Some(Value::Nom("a".into())));
    }

    #[test]
    fn impute_by_label_uses_class_statistic() {
        let out = single("impute_by_label x median", "1,a\n3,a\n?,a\n10,b\n?,b\n");
        assert_eq!(out, nums(&["1", "3", "2", "10", "10"]));
    }

    #[test]
    fn errors_are_typed() {
        let ds = read_csv("x,c,y\n1,a,p\n?,b,q\n".as_bytes(), "y").unwrap();
        let run = |s: &str| apply_recipe(&ds, &Recipe::parse(s).unwrap());
        assert!(matches!(run("step = impute c mean"), Err(Error::Type(_))));
        assert!(matches!(run("step = round_decimal nope 1"), Err(Error::Recipe(_))));
        assert!(matches!(run("step = round_decimal re:^z 1"), Err(Error::Recipe(_))));
        let empty = read_csv("x,y\n?,p\n?,q\n".as_bytes(), "y").unwrap();
        let r = Recipe::parse("step = impute x mean").unwrap();
        assert!(matches!(apply_recipe(&empty, &r), Err(Error::Impute(_))));
    }

    #[test]
    fn recipe_syntax_errors_carry_line() {
        let err = Recipe::parse("name = a\n\nstep = frobnicate x\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn filters_and_drop() {
        let ds = read_csv("a,b,c,y\n1,?,?,p\n2,3,?,q\n1,2,3,q\n".as_bytes(), "y").unwrap();
        let r = Recipe::parse("step = filter_missing * 1\nstep = drop c").unwrap();
        let out = apply_recipe(&ds, &r).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out.schema().len(), 2);
        let ids: Vec<u64> = out.instances().iter().map(|i| i.id).collect();
        assert_eq!(ids, vec![1, 2]);
    }

    #[test]
    fn distinct_filter_narrows_selection() {
        let ds = read_csv("a,b,y\n1,1,p\n2,1,q\n3,1,q\n".as_bytes(), "y").unwrap();
        let sel = Selector::parse("*@distinct>2").unwrap();
        assert_eq!(sel.resolve(&ds.to_table()).unwrap(), vec![0]);
    }

    #[test]
    fn statistics_come_from_train_only() {
        let mut csv = String::from("x,y\n");
        for i in 0..20 {
            let cell = if i % 5 == 0 { "?".to_string() } else { i.to_string() };
            csv.push_str(&format!("{cell},{}\n", i % 2));
        }
        let ds = read_csv(csv.as_bytes(), "y").unwrap();
        let (train, test) = split(&ds, Fraction::new(1, 2), 4).unwrap();
        let recipe = Recipe::parse("step = impute x mean").unwrap();
        let (tr, te) = apply_recipe_pair(&train, &test, &recipe).unwrap();
        let train_table = train.to_table();
        let observed: Vec<Number> = train_table.columns[0].iter().flatten().map(|v| *v.as_number().unwrap()).collect();
        let mean = observed.iter().sum::<Number>() / Number::from_integer(observed.len() as i64);
        let filled: Vec<Number> = te
            .to_table()
            .columns[0]
            .iter()
            .zip(test.to_table().columns[0].iter())
            .filter(|(_, before)| before.is_none())
            .map(|(after, _)| *after.as_ref().unwrap().as_number().unwrap())
            .collect();
        assert!(!filled.is_empty());
        assert!(filled.iter().all(|v| *v == mean));
        assert!(std::sync::Arc::ptr_eq(tr.schema(), te.schema()));
    }

    #[test]
    fn builtin_recipes_parse_and_print() {
        for name in builtin_recipe_names() {
            let r = builtin_recipe(name).unwrap();
            assert_eq!(r.name, name);
            assert!(!r.steps.is_empty());
            assert_eq!(Recipe::parse(&r.to_text()).unwrap(), r);
        }
    }
}
