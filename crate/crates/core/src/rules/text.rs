//! Plain-text rule files.
//!
//! ```text
//! MODEL learner=ripper label=Diabetes labels=[No, Yes]
//! IF BloodPressure in [70,80] AND Insulin in [140,170] THEN Diabetes = Yes.
//! IF TRUE THEN Diabetes = No.
//! ```
//!
//! Numbers are written bare. Names and nominal values are quoted when they
//! could be mistaken for a number, a keyword or punctuation.

use crate::data::Value;
use crate::error::{Error, Result};
use crate::scalar::{format_number, parse_number};

use super::{Literal, LiteralTest, MultiClassRuleModel, Rule, RuleSet};

const KEYWORDS: &[&str] = &["MODEL", "IF", "AND", "THEN", "TRUE", "in"];

fn bare_char(c: char) -> bool {
    c.is_alphanumeric() || "_-+./:%$#&*@^~'".contains(c)
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn word(s: &str) -> String {
    let plain = !s.is_empty() && s.chars().all(bare_char) && !s.ends_with('.') && !KEYWORDS.contains(&s);
    if plain {
        s.to_string()
    } else {
        quote(s)
    }
}

fn value(v: &Value) -> String {
    match v {
        Value::Num(n) => format_number(n),
        Value::Nom(s) if parse_number(s).is_some() => quote(s),
        Value::Nom(s) => word(s),
    }
}

fn literal(l: &Literal) -> String {
    let a = word(&l.attribute);
    match &l.test {
        LiteralTest::Equals(v) => format!("{a} = {}", value(v)),
        LiteralTest::NotEquals(v) => format!("{a} != {}", value(v)),
        LiteralTest::Leq(v) => format!("{a} <= {}", value(v)),
        LiteralTest::Geq(v) => format!("{a} >= {}", value(v)),
        LiteralTest::InRange(lo, hi) => format!("{a} in [{},{}]", value(lo), value(hi)),
    }
}

pub fn rule_text(rule: &Rule, label_name: &str) -> String {
    let body = if rule.body.is_empty() {
        "TRUE".to_string()
    } else {
        rule.body.iter().map(literal).collect::<Vec<_>>().join(" AND ")
    };
    format!("IF {body} THEN {} = {}.", word(label_name), word(&rule.target))
}

pub fn serialize_rules(model: &MultiClassRuleModel) -> String {
    let labels: Vec<String> = model.rulesets.iter().map(|r| word(&r.target)).collect();
    let mut out = format!(
        "MODEL learner={} label={} labels=[{}]\n",
        word(&model.learner),
        word(&model.label_name),
        labels.join(", ")
    );
    for rule in model.rulesets.iter().flat_map(|r| &r.rules) {
        out.push_str(&rule_text(rule, &model.label_name));
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    Sym(&'static str),
}

fn lex(line: &str, lineno: usize) -> Result<Vec<Tok>> {
    let err = |m: String| Error::RuleSyntax { line: lineno, message: m };
    let chars: Vec<char> = line.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(err("unterminated quote".into())),
                    Some('"') => break,
                    Some('\\') => {
                        s.push(*chars.get(i + 1).ok_or_else(|| err("dangling escape".into()))?);
                        i += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            i += 1;
            toks.push(Tok::Quoted(s));
        } else if bare_char(c) {
            let start = i;
            while i < chars.len() && bare_char(chars[i]) {
                i += 1;
            }
            toks.push(Tok::Word(chars[start..i].iter().collect()));
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let sym = match two.as_str() {
                "<=" => "<=",
                ">=" => ">=",
                "!=" => "!=",
                _ => match c {
                    '=' => "=",
                    '[' => "[",
                    ']' => "]",
                    ',' => ",",
                    _ => return Err(err(format!("unexpected character {c:?}"))),
                },
            };
            i += sym.len();
            toks.push(Tok::Sym(sym));
        }
    }
    // The terminating period sticks to the last bare word; split it off.
    if let Some(Tok::Word(w)) = toks.last_mut() {
        if w.len() > 1 && w.ends_with('.') {
            w.pop();
            toks.push(Tok::Sym("."));
        } else if w == "." {
            *toks.last_mut().unwrap() = Tok::Sym(".");
        }
    }
    Ok(toks)
}

struct Cursor<'a> {
    toks: &'a [Tok],
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn err<T>(&self, m: impl Into<String>) -> Result<T> {
        Err(Error::RuleSyntax { line: self.line, message: m.into() })
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<&'a Tok> {
        let t = self.toks.get(self.pos);
        self.pos += 1;
        t
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        match self.next() {
            Some(Tok::Sym(x)) if *x == s => Ok(()),
            other => self.err(format!("expected {s:?}, found {other:?}")),
        }
    }

    fn expect_keyword(&mut self, k: &str) -> Result<()> {
        match self.next() {
            Some(Tok::Word(w)) if w == k => Ok(()),
            other => self.err(format!("expected {k}, found {other:?}")),
        }
    }

    fn at_keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w == k)
    }

    fn name(&mut self) -> Result<String> {
        match self.next() {
            Some(Tok::Word(w)) if !KEYWORDS.contains(&w.as_str()) => Ok(w.clone()),
            Some(Tok::Quoted(s)) => Ok(s.clone()),
            other => self.err(format!("expected a name, found {other:?}")),
        }
    }

    fn value(&mut self) -> Result<Value> {
        match self.next() {
            Some(Tok::Word(w)) if !KEYWORDS.contains(&w.as_str()) => {
                Ok(parse_number(w).map_or_else(|| Value::Nom(w.clone()), Value::Num))
            }
            Some(Tok::Quoted(s)) => Ok(Value::Nom(s.clone())),
            other => self.err(format!("expected a value, found {other:?}")),
        }
    }

    fn label(&mut self) -> Result<String> {
        match self.next() {
            Some(Tok::Word(w)) if !KEYWORDS.contains(&w.as_str()) => Ok(w.clone()),
            Some(Tok::Quoted(s)) => Ok(s.clone()),
            other => self.err(format!("expected a label, found {other:?}")),
        }
    }

    fn done(&self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some(t) => self.err(format!("trailing input {t:?}")),
        }
    }
}

fn header(c: &mut Cursor) -> Result<(String, String, Vec<String>)> {
    c.expect_keyword("MODEL")?;
    let mut learner = None;
    let mut label = None;
    let mut labels = None;
    while c.peek().is_some() {
        let key = c.name()?;
        c.expect_sym("=")?;
        match key.as_str() {
            "learner" => learner = Some(c.name()?),
            "label" => label = Some(c.name()?),
            "labels" => {
                c.expect_sym("[")?;
                let mut ls = Vec::new();
                if c.peek() != Some(&Tok::Sym("]")) {
                    loop {
                        ls.push(c.label()?);
                        if c.peek() == Some(&Tok::Sym(",")) {
                            c.next();
                        } else {
                            break;
                        }
                    }
                }
                c.expect_sym("]")?;
                labels = Some(ls);
            }
            other => return c.err(format!("unknown header field {other:?}")),
        }
    }
    match (learner, label, labels) {
        (Some(a), Some(b), Some(c)) => Ok((a, b, c)),
        _ => c.err("header needs learner, label and labels"),
    }
}

fn rule(c: &mut Cursor, label_name: &str) -> Result<Rule> {
    c.expect_keyword("IF")?;
    let mut body = Vec::new();
    if c.at_keyword("TRUE") {
        c.next();
    } else {
        loop {
            let attribute = c.name()?;
            let test = match c.next() {
                Some(Tok::Sym("=")) => LiteralTest::Equals(c.value()?),
                Some(Tok::Sym("!=")) => LiteralTest::NotEquals(c.value()?),
                Some(Tok::Sym("<=")) => LiteralTest::Leq(c.value()?),
                Some(Tok::Sym(">=")) => LiteralTest::Geq(c.value()?),
                Some(Tok::Word(w)) if w == "in" => {
                    c.expect_sym("[")?;
                    let lo = c.value()?;
                    c.expect_sym(",")?;
                    let hi = c.value()?;
                    c.expect_sym("]")?;
                    if lo > hi {
                        return c.err("range with lo > hi");
                    }
                    LiteralTest::InRange(lo, hi)
                }
                other => return c.err(format!("expected a comparison, found {other:?}")),
            };
            body.push(Literal { attribute, test });
            if c.at_keyword("AND") {
                c.next();
            } else {
                break;
            }
        }
    }
    c.expect_keyword("THEN")?;
    let name = c.name()?;
    if name != label_name {
        return c.err(format!("rule predicts {name:?}, model label is {label_name:?}"));
    }
    c.expect_sym("=")?;
    let target = c.label()?;
    c.expect_sym(".")?;
    c.done()?;
    Ok(Rule { target, body })
}

/// Inverse of [`serialize_rules`]. Blank lines and `#` comments are ignored.
pub fn parse_rules(text: &str) -> Result<MultiClassRuleModel> {
    let mut model: Option<MultiClassRuleModel> = None;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let toks = lex(trimmed, lineno)?;
        let mut c = Cursor { toks: &toks, pos: 0, line: lineno };
        match model.as_mut() {
            None => {
                let (learner, label_name, labels) = header(&mut c)?;
                let rulesets = labels.into_iter().map(RuleSet::new).collect();
                model = Some(MultiClassRuleModel::new(learner, label_name, rulesets).map_err(|e| {
                    Error::RuleSyntax { line: lineno, message: e.to_string() }
                })?);
            }
            Some(m) => {
                let r = rule(&mut c, &m.label_name)?;
                let rs = m
                    .rulesets
                    .iter_mut()
                    .find(|rs| rs.target == r.target)
                    .ok_or_else(|| Error::RuleSyntax { line: lineno, message: format!("label {:?} not in header", r.target) })?;
                rs.rules.push(r);
            }
        }
    }
    model.ok_or(Error::RuleSyntax { line: 0, message: "missing MODEL header".into() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(v: i64) -> Value {
        Value::from(v)
    }

    #[test]
    fn renders_range_rule() {
        let r = Rule::new(
            "Yes",
            vec![
                Literal::new("BloodPressure", LiteralTest::InRange(n(70), n(80))),
                Literal::new("Insulin", LiteralTest::InRange(n(140), n(170))),
            ],
        );
        assert_eq!(
            rule_text(&r, "Diabetes"),
            "IF BloodPressure in [70,80] AND Insulin in [140,170] THEN Diabetes = Yes."
        );
    }

    #[test]
    fn empty_model_is_header_only() {
        let m = MultiClassRuleModel::new("foil", "Play", vec![RuleSet::new("No"), RuleSet::new("Yes")]).unwrap();
        let text = serialize_rules(&m);
        assert_eq!(text, "MODEL learner=foil label=Play labels=[No, Yes]\n");
        assert_eq!(parse_rules(&text).unwrap(), m);
    }

    #[test]
    fn awkward_names_and_values_round_trip() {
        let mut rs = RuleSet::new("5");
        rs.rules.push(Rule::new(
            "5",
            vec![
                Literal::equals("my attr", "x y"),
                Literal::equals("in", "12"),
                Literal::equals("q", "AND"),
                Literal::new("r", LiteralTest::NotEquals(Value::Nom("a\"b".into()))),
                Literal::new("s", LiteralTest::Leq(Value::Num(crate::scalar::Number::new(-1, 3)))),
                Literal::equals("t", "end."),
            ],
        ));
        rs.rules.push(Rule::new("5", vec![]));
        let m = MultiClassRuleModel::new("ripper", "Digit", vec![rs, RuleSet::new("10")]).unwrap();
        let text = serialize_rules(&m);
        assert_eq!(parse_rules(&text).unwrap(), m, "{text}");
    }

    #[test]
    fn syntax_errors_report_line() {
        let text = "MODEL learner=f label=y labels=[a]\nIF x = 1 THEN y = a.\nIF x = THEN y = a.\n";
        match parse_rules(text) {
            Err(Error::RuleSyntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_rules("IF TRUE THEN y = a."), Err(Error::RuleSyntax { line: 1, .. })));
        assert!(matches!(
            parse_rules("MODEL learner=f label=y labels=[a]\nIF TRUE THEN y = b.\n"),
            Err(Error::RuleSyntax { line: 2, .. })
        ));
    }
}
