//! Literals lowered to inclusive code ranges over a schema.

use crate::data::{Instance, Schema, MISSING};
use crate::error::Result;
use crate::scalar::{ratio, Fraction};

use super::{Literal, LiteralTest, Rule};

/// `lo <= code <= hi` (negated for `!=`). An empty range never matches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompiledLiteral {
    pub attr: usize,
    pub lo: u32,
    pub hi: u32,
    pub negate: bool,
}

impl CompiledLiteral {
    pub fn compile(lit: &Literal, schema: &Schema) -> Result<Self> {
        let attr = schema.attribute_index(&lit.attribute)?;
        let a = &schema.attributes[attr];
        let end = a.values.len() as u32;
        // (lo, hi_exclusive)
        let (lo, hi_ex, negate) = match &lit.test {
            LiteralTest::Equals(v) | LiteralTest::NotEquals(v) => {
                let neg = matches!(lit.test, LiteralTest::NotEquals(_));
                match a.code_of(v) {
                    Some(c) => (c, c + 1, neg),
                    None => (0, 0, neg),
                }
            }
            LiteralTest::Leq(v) => (0, a.count_leq(v) as u32, false),
            LiteralTest::Geq(v) => (a.count_lt(v) as u32, end, false),
            LiteralTest::InRange(lo, hi) => (a.count_lt(lo) as u32, a.count_leq(hi) as u32, false),
        };
        Ok(if lo < hi_ex {
            CompiledLiteral { attr, lo, hi: hi_ex - 1, negate }
        } else {
            CompiledLiteral { attr, lo: 1, hi: 0, negate }
        })
    }

    #[inline]
    pub fn holds(&self, codes: &[u32]) -> bool {
        let c = codes[self.attr];
        c != MISSING && ((self.lo <= c && c <= self.hi) != self.negate)
    }
}

#[derive(Clone, Debug)]
pub struct CompiledRule {
    pub literals: Vec<CompiledLiteral>,
}

impl CompiledRule {
    pub fn compile(rule: &Rule, schema: &Schema) -> Result<Self> {
        Ok(CompiledRule {
            literals: rule.body.iter().map(|l| CompiledLiteral::compile(l, schema)).collect::<Result<_>>()?,
        })
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    #[inline]
    pub fn satisfied(&self, inst: &Instance) -> usize {
        self.literals.iter().filter(|l| l.holds(&inst.codes)).count()
    }

    #[inline]
    pub fn covers(&self, inst: &Instance) -> bool {
        self.literals.iter().all(|l| l.holds(&inst.codes))
    }

    pub fn match_fraction(&self, inst: &Instance) -> Fraction {
        if self.literals.is_empty() {
            Fraction::from_integer(1)
        } else {
            ratio(self.satisfied(inst), self.literals.len())
        }
    }
}
