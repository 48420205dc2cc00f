//! Line-oriented rule syntax:
//!
//! ```text
//! rule     := [pred ("," pred)*] "->" name "=" label
//! pred     := name "=" value | name "in" "[" num "," num "]" | name relop num
//!           | linterm ("+" linterm)* relop num
//! linterm  := num "*" name
//! relop    := "<=" | "<" | ">=" | ">"
//! ```
//!
//! Categorical values may contain spaces; they end at `,` or `->`.

use std::fmt;

use super::{Interval, LinearConstraint, Predicate, Premise, Relation, Rule};
use crate::data::{format_num, FeatureKind, FeatureSchema};
use crate::error::{Error, Result};

pub struct RuleDisplay<'a> {
    pub(super) rule: &'a Rule,
    pub(super) schema: &'a FeatureSchema,
}

impl fmt::Display for RuleDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rule(self.rule, self.schema))
    }
}

fn format_predicate(p: &Predicate, schema: &FeatureSchema, out: &mut Vec<String>) {
    match p {
        Predicate::CategoricalEq { feature, value } => out.push(format!(
            "{} = {}",
            schema.feature(*feature).name,
            schema.category_name(*feature, *value)
        )),
        Predicate::Interval(iv) => {
            let name = &schema.feature(iv.feature).name;
            if iv.lower.is_finite() && iv.upper.is_finite() && iv.lower_closed && iv.upper_closed {
                out.push(format!("{name} in [{}, {}]", format_num(iv.lower), format_num(iv.upper)));
                return;
            }
            if iv.lower.is_finite() {
                let op = if iv.lower_closed { ">=" } else { ">" };
                out.push(format!("{name} {op} {}", format_num(iv.lower)));
            }
            if iv.upper.is_finite() {
                let op = if iv.upper_closed { "<=" } else { "<" };
                out.push(format!("{name} {op} {}", format_num(iv.upper)));
            }
        }
        Predicate::Linear(lc) => {
            let lhs: Vec<String> = lc
                .terms()
                .iter()
                .map(|&(f, c)| format!("{}*{}", format_num(c), schema.feature(f).name))
                .collect();
            out.push(format!("{} {} {}", lhs.join(" + "), lc.relation, format_num(lc.threshold)));
        }
    }
}

pub fn format_premise(premise: &Premise, schema: &FeatureSchema) -> String {
    let mut parts = Vec::new();
    for p in premise.predicates() {
        format_predicate(p, schema, &mut parts);
    }
    parts.join(", ")
}

pub fn format_rule(rule: &Rule, schema: &FeatureSchema) -> String {
    let premise = format_premise(&rule.premise, schema);
    let head = format!("-> {} = {}", schema.target(), schema.class_name(rule.consequent));
    if premise.is_empty() {
        head
    } else {
        format!("{premise} {head}")
    }
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<()> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{tok}`")))
        }
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        Error::Parse { pos: self.pos, msg: msg.into() }
    }

    fn at_arrow(&mut self) -> bool {
        self.skip_ws();
        self.rest().starts_with("->")
    }

    fn name(&mut self) -> Result<(usize, &'a str)> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.text.as_bytes();
        let mut end = start;
        while end < bytes.len() {
            let c = bytes[end];
            let ok = c.is_ascii_alphanumeric()
                || c == b'_'
                || c == b'.'
                || (c == b'-' && end > start && bytes.get(end + 1) != Some(&b'>'))
                || c >= 0x80;
            if !ok {
                break;
            }
            end += 1;
        }
        if end == start {
            return Err(self.error("expected a feature name"));
        }
        self.pos = end;
        Ok((start, &self.text[start..end]))
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.text.as_bytes();
        let mut end = start;
        while end < bytes.len() {
            let c = bytes[end];
            let sign_ok = (c == b'-' || c == b'+')
                && (end == start || matches!(bytes[end - 1], b'e' | b'E'));
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || sign_ok {
                end += 1;
            } else {
                break;
            }
        }
        let lit = &self.text[start..end];
        let x: f64 = lit
            .parse()
            .map_err(|_| Error::Parse { pos: start, msg: format!("expected a number, found `{lit}`") })?;
        if !x.is_finite() {
            return Err(Error::Parse { pos: start, msg: "number out of range".into() });
        }
        self.pos = end;
        Ok(x)
    }

    fn relation(&mut self) -> Result<Relation> {
        self.skip_ws();
        for (tok, rel) in [("<=", Relation::Le), (">=", Relation::Ge), ("<", Relation::Lt), (">", Relation::Gt)] {
            if self.rest().starts_with(tok) {
                self.pos += tok.len();
                return Ok(rel);
            }
        }
        Err(self.error("expected one of <=, <, >=, >"))
    }

    /// Text up to the next `,` or `->`, trimmed.
    fn value(&mut self) -> (usize, &'a str) {
        self.skip_ws();
        let start = self.pos;
        let rest = self.rest();
        let end = match (rest.find(','), rest.find("->")) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => rest.len(),
        };
        self.pos += end;
        (start, rest[..end].trim())
    }
}

fn feature_index(schema: &FeatureSchema, name: &str, pos: usize) -> Result<usize> {
    schema
        .index_of(name)
        .ok_or_else(|| Error::Parse { pos, msg: format!("unknown feature `{name}`") })
}

fn continuous(schema: &FeatureSchema, f: usize, pos: usize) -> Result<()> {
    match schema.feature(f).kind {
        FeatureKind::Continuous { .. } => Ok(()),
        FeatureKind::Categorical { .. } => Err(Error::Parse {
            pos,
            msg: format!("`{}` is categorical, numeric comparison not allowed", schema.feature(f).name),
        }),
    }
}

fn parse_predicate(cur: &mut Cursor<'_>, schema: &FeatureSchema) -> Result<Predicate> {
    cur.skip_ws();
    let starts_numeric = matches!(cur.peek(), Some(c) if c.is_ascii_digit() || c == '-' || c == '+' || c == '.');
    if starts_numeric {
        let start = cur.pos;
        let mut terms = Vec::new();
        loop {
            let coef = cur.number()?;
            cur.expect("*")?;
            let (p, name) = cur.name()?;
            let f = feature_index(schema, name, p)?;
            continuous(schema, f, p)?;
            terms.push((f, coef));
            if !cur.eat("+") {
                break;
            }
        }
        let rel = cur.relation()?;
        let t = cur.number()?;
        let lc = LinearConstraint::new(terms, rel, t).map_err(|e| Error::Parse { pos: start, msg: e.to_string() })?;
        return Ok(Predicate::Linear(lc));
    }

    let (p, name) = cur.name()?;
    let f = feature_index(schema, name, p)?;
    cur.skip_ws();
    if cur.rest().starts_with("in") && !cur.rest()[2..].starts_with(|c: char| c.is_alphanumeric() || c == '_') {
        cur.pos += 2;
        continuous(schema, f, p)?;
        cur.expect("[")?;
        let lo = cur.number()?;
        cur.expect(",")?;
        let hi = cur.number()?;
        cur.expect("]")?;
        let iv = Interval::closed(f, lo, hi).map_err(|e| Error::Parse { pos: p, msg: e.to_string() })?;
        return Ok(Predicate::Interval(iv));
    }
    if cur.rest().starts_with('=') {
        cur.pos += 1;
        let (vp, value) = cur.value();
        return match &schema.feature(f).kind {
            FeatureKind::Categorical { .. } => {
                let c = schema.category_index(f, value).ok_or_else(|| Error::Parse {
                    pos: vp,
                    msg: format!("`{value}` is not a category of `{name}`"),
                })?;
                Ok(Predicate::eq(f, c))
            }
            FeatureKind::Continuous { .. } => Err(Error::Parse {
                pos: p,
                msg: format!("`{name}` is continuous, use an interval or comparison"),
            }),
        };
    }
    let rel = cur.relation()?;
    continuous(schema, f, p)?;
    let t = cur.number()?;
    let iv = match rel {
        Relation::Le => Interval::at_most(f, t),
        Relation::Lt => Interval::below(f, t),
        Relation::Ge => Interval::at_least(f, t),
        Relation::Gt => Interval::above(f, t),
    };
    Ok(Predicate::Interval(iv))
}

/// Parses one rule line against `schema`.
pub fn parse_rule(text: &str, schema: &FeatureSchema) -> Result<Rule> {
    let mut cur = Cursor { text, pos: 0 };
    let mut preds = Vec::new();
    if !cur.at_arrow() {
        loop {
            preds.push(parse_predicate(&mut cur, schema)?);
            if cur.eat(",") {
                continue;
            }
            if cur.at_arrow() {
                break;
            }
            return Err(cur.error("expected `,` or `->`"));
        }
    }
    cur.expect("->")?;
    let (tp, target) = cur.name()?;
    if target != schema.target() {
        return Err(Error::Parse {
            pos: tp,
            msg: format!("target `{target}` does not match `{}`", schema.target()),
        });
    }
    cur.expect("=")?;
    cur.skip_ws();
    let lp = cur.pos;
    let label_text = cur.rest().trim();
    let label = schema
        .parse_label(label_text)
        .ok_or_else(|| Error::Parse { pos: lp, msg: format!("unknown class label `{label_text}`") })?;
    let premise = Premise::new(schema, preds).map_err(|e| Error::Parse { pos: 0, msg: e.to_string() })?;
    Rule::new(premise, label)
}

/// Parses a rule file: one rule per line, blank lines and `#` comments skipped.
pub fn parse_rules(text: &str, schema: &FeatureSchema) -> Result<Vec<Rule>> {
    let mut rules = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let r = parse_rule(t, schema).map_err(|e| match e {
            Error::Parse { pos, msg } => Error::Parse { pos, msg: format!("line {}: {msg}", i + 1) },
            other => other,
        })?;
        rules.push(r);
    }
    Ok(rules)
}
