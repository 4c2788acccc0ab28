//! The rule-based variant of tabular combining functions.
//!
//! Rules assert the conclusion belief for whole blocks of cells:
//!
//! ```text
//! # one rule per IF ... THEN statement
//! IF bel(E1) >= 0 AND bel(E2) <= 0 THEN bel(C) := 0
//! IF bel(E1) <= -.75 AND (bel(E2) = .5 OR bel(E2) = .25) THEN bel(C) := -.75
//! ```
//!
//! Grammar:
//!
//! ```text
//! ruleset := rule*
//! rule    := "IF" cond ("AND" cond)* "THEN" "bel(" ident ")" ":=" number
//! cond    := atom | "(" atom ("OR" atom)+ ")"
//! atom    := "bel(" ident ")" op number
//! op      := ">=" | "<=" | "=" | ">" | "<" | "≥" | "≤"
//! ```
//!
//! Keywords are case-insensitive. A disjunction may only mention one
//! proposition.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::belief::{Axis, BeliefScale, LEVEL_EPSILON};
use crate::error::{Error, Result};
use crate::tables::{CellDiff, CellState, CombiningTable, GridIndex, LevelPredicate, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<")]
    Lt,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Ge => ">=",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Gt => ">",
            CmpOp::Lt => "<",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub proposition: String,
    pub op: CmpOp,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Compare(Comparison),
    /// Disjunction of comparisons on a single proposition.
    AnyOf(Vec<Comparison>),
}

impl Condition {
    pub fn proposition(&self) -> &str {
        match self {
            Condition::Compare(c) => &c.proposition,
            Condition::AnyOf(cs) => &cs[0].proposition,
        }
    }

    fn atoms(&self) -> &[Comparison] {
        match self {
            Condition::Compare(c) => std::slice::from_ref(c),
            Condition::AnyOf(cs) => cs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub conclusion: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bel({}) {} {}", self.proposition, self.op.symbol(), self.value)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Compare(c) => c.fmt(f),
            Condition::AnyOf(cs) => {
                let parts: Vec<String> = cs.iter().map(ToString::to_string).collect();
                write!(f, "({})", parts.join(" OR "))
            }
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let conds: Vec<String> = self.conditions.iter().map(ToString::to_string).collect();
        write!(
            f,
            "IF {} THEN bel({}) := {}",
            conds.join(" AND "),
            self.conclusion,
            self.value
        )
    }
}

/// Canonical text: one rule per line, numbers in shortest form.
pub fn format_rules(rules: &RuleSet) -> String {
    rules.rules.iter().map(|r| format!("{r}\n")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "parse error at {}:{}: expected {}, found {}",
            self.line,
            self.column,
            self.expected.join(" or "),
            self.found
        )
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Number(f64),
    Op(CmpOp),
    Assign,
    LParen,
    RParen,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("'{w}'"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Op(op) => format!("'{}'", op.symbol()),
            Tok::Assign => "':='".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> std::result::Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let start = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let next = chars.get(i + 1).copied();
        let tok = match c {
            '(' => {
                advance(1, &mut i, &mut col);
                Tok::LParen
            }
            ')' => {
                advance(1, &mut i, &mut col);
                Tok::RParen
            }
            ':' if next == Some('=') => {
                advance(2, &mut i, &mut col);
                Tok::Assign
            }
            '>' | '<' if next == Some('=') => {
                advance(2, &mut i, &mut col);
                Tok::Op(if c == '>' { CmpOp::Ge } else { CmpOp::Le })
            }
            '>' => {
                advance(1, &mut i, &mut col);
                Tok::Op(CmpOp::Gt)
            }
            '<' => {
                advance(1, &mut i, &mut col);
                Tok::Op(CmpOp::Lt)
            }
            '=' => {
                advance(1, &mut i, &mut col);
                Tok::Op(CmpOp::Eq)
            }
            '≥' => {
                advance(1, &mut i, &mut col);
                Tok::Op(CmpOp::Ge)
            }
            '≤' => {
                advance(1, &mut i, &mut col);
                Tok::Op(CmpOp::Le)
            }
            c if c.is_ascii_digit()
                || c == '.'
                || ((c == '-' || c == '+')
                    && next.is_some_and(|n| n.is_ascii_digit() || n == '.')) =>
            {
                let mut j = i + 1;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    j += 1;
                }
                let literal: String = chars[i..j].iter().collect();
                let value = literal.parse::<f64>().map_err(|_| ParseError {
                    line,
                    column: col,
                    expected: vec!["number".into()],
                    found: format!("'{literal}'"),
                })?;
                advance(j - i, &mut i, &mut col);
                Tok::Number(value)
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i + 1;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let word: String = chars[i..j].iter().collect();
                advance(j - i, &mut i, &mut col);
                Tok::Word(word)
            }
            other => {
                return Err(ParseError {
                    line,
                    column: col,
                    expected: vec!["token".into()],
                    found: format!("'{other}'"),
                })
            }
        };
        out.push(Spanned {
            tok,
            line: start.0,
            column: start.1,
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

type PResult<T> = std::result::Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        let t = self.peek();
        Err(ParseError {
            line: t.line,
            column: t.column,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.tok.describe(),
        })
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        if self.at_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            self.error(&[kw])
        }
    }

    fn expect(&mut self, tok: Tok, name: &str) -> PResult<()> {
        if self.peek().tok == tok {
            self.bump();
            Ok(())
        } else {
            self.error(&[name])
        }
    }

    fn number(&mut self) -> PResult<f64> {
        match self.peek().tok {
            Tok::Number(n) => {
                self.bump();
                Ok(n)
            }
            _ => self.error(&["number"]),
        }
    }

    /// `bel ( ident )`
    fn belief_ref(&mut self) -> PResult<String> {
        self.keyword("bel")?;
        self.expect(Tok::LParen, "'('")?;
        let id = match &self.peek().tok {
            Tok::Word(w) => w.clone(),
            _ => return self.error(&["proposition name"]),
        };
        self.bump();
        self.expect(Tok::RParen, "')'")?;
        Ok(id)
    }

    fn atom(&mut self) -> PResult<Comparison> {
        let proposition = self.belief_ref()?;
        let op = match self.peek().tok {
            Tok::Op(op) => {
                self.bump();
                op
            }
            _ => return self.error(&["comparison operator"]),
        };
        let value = self.number()?;
        Ok(Comparison {
            proposition,
            op,
            value,
        })
    }

    fn condition(&mut self) -> PResult<Condition> {
        if self.peek().tok != Tok::LParen {
            return self.atom().map(Condition::Compare);
        }
        self.bump();
        let first = self.atom()?;
        let mut atoms = vec![first];
        while self.at_keyword("or") {
            self.bump();
            let at = self.peek().clone();
            let next = self.atom()?;
            if next.proposition != atoms[0].proposition {
                return Err(ParseError {
                    line: at.line,
                    column: at.column,
                    expected: vec![format!("bel({})", atoms[0].proposition)],
                    found: format!("bel({})", next.proposition),
                });
            }
            atoms.push(next);
        }
        if atoms.len() < 2 {
            return self.error(&["OR"]);
        }
        self.expect(Tok::RParen, "')'")?;
        Ok(Condition::AnyOf(atoms))
    }

    fn rule(&mut self) -> PResult<Rule> {
        self.keyword("if")?;
        let mut conditions = vec![self.condition()?];
        while self.at_keyword("and") {
            self.bump();
            conditions.push(self.condition()?);
        }
        self.keyword("then")?;
        let conclusion = self.belief_ref()?;
        self.expect(Tok::Assign, "':='")?;
        let value = self.number()?;
        Ok(Rule {
            conditions,
            conclusion,
            value,
        })
    }

    fn ruleset(&mut self) -> PResult<RuleSet> {
        let mut rules = Vec::new();
        while self.peek().tok != Tok::Eof {
            rules.push(self.rule()?);
        }
        Ok(RuleSet { rules })
    }
}

pub fn parse_rules(text: &str) -> Result<RuleSet> {
    let tokens = lex(text)?;
    Parser { tokens, pos: 0 }.ruleset().map_err(Error::from)
}

/// One compiled rule: the block of cells it asserts and the value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub region: Region,
    pub value: f64,
    pub rule: usize,
    /// Canonical text of the source rule.
    pub source: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompiledAssignments {
    pub assignments: Vec<Assignment>,
}

fn atom_mask(axis: &Axis, atom: &Comparison) -> Result<Vec<bool>> {
    let v = atom.value;
    let near = |l: f64| (l - v).abs() <= LEVEL_EPSILON;
    if atom.op == CmpOp::Eq && axis.position(v).is_none() {
        return Err(Error::EqualityOffGrid {
            axis: axis.proposition().to_string(),
            level: v,
        });
    }
    Ok(axis
        .levels()
        .iter()
        .map(|&l| match atom.op {
            CmpOp::Eq => near(l),
            CmpOp::Ge => l > v || near(l),
            CmpOp::Le => l < v || near(l),
            CmpOp::Gt => l > v && !near(l),
            CmpOp::Lt => l < v && !near(l),
        })
        .collect())
}

/// Resolves each rule into a region over the given axes.
pub fn compile(rules: &RuleSet, axes: &[Axis], conclusion_scale: BeliefScale) -> Result<CompiledAssignments> {
    let mut assignments = Vec::with_capacity(rules.rules.len());
    for (n, rule) in rules.rules.iter().enumerate() {
        let mut masks: Vec<Vec<bool>> = axes.iter().map(|a| vec![true; a.len()]).collect();
        for cond in &rule.conditions {
            let slot = axes
                .iter()
                .position(|a| a.proposition() == cond.proposition())
                .ok_or_else(|| Error::UnknownProposition(cond.proposition().to_string()))?;
            let mut union = vec![false; axes[slot].len()];
            for atom in cond.atoms() {
                for (u, m) in union.iter_mut().zip(atom_mask(&axes[slot], atom)?) {
                    *u |= m;
                }
            }
            for (m, u) in masks[slot].iter_mut().zip(union) {
                *m &= u;
            }
        }
        conclusion_scale.check(rule.value)?;
        let predicates = masks
            .iter()
            .zip(axes)
            .map(|(mask, axis)| {
                if mask.iter().all(|&m| m) {
                    LevelPredicate::Any
                } else {
                    LevelPredicate::In(
                        axis.levels()
                            .iter()
                            .zip(mask)
                            .filter(|(_, &m)| m)
                            .map(|(&l, _)| l)
                            .collect(),
                    )
                }
            })
            .collect();
        assignments.push(Assignment {
            region: Region::new(axes, predicates)?,
            value: rule.value,
            rule: n,
            source: rule.to_string(),
        });
    }
    Ok(CompiledAssignments { assignments })
}

/// A cell assigned more than one distinct value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conflict {
    pub index: GridIndex,
    pub values: Vec<f64>,
    pub rules: Vec<usize>,
}

pub fn detect_conflicts(compiled: &CompiledAssignments, axes: &[Axis]) -> Vec<Conflict> {
    let masks: Vec<Vec<Vec<bool>>> = compiled
        .assignments
        .iter()
        .map(|a| a.region.masks(axes))
        .collect();
    let total: usize = axes.iter().map(Axis::len).product();
    let mut conflicts = Vec::new();
    for mut offset in 0..total {
        let mut index = vec![0; axes.len()];
        for (slot, axis) in index.iter_mut().zip(axes).rev() {
            *slot = offset % axis.len();
            offset /= axis.len();
        }
        let hits: Vec<&Assignment> = compiled
            .assignments
            .iter()
            .zip(&masks)
            .filter(|(_, m)| m.iter().zip(&index).all(|(axis_mask, &i)| axis_mask[i]))
            .map(|(a, _)| a)
            .collect();
        let mut values: Vec<f64> = Vec::new();
        for a in &hits {
            if !values.contains(&a.value) {
                values.push(a.value);
            }
        }
        if values.len() > 1 {
            conflicts.push(Conflict {
                index,
                values,
                rules: hits.iter().map(|a| a.rule).collect(),
            });
        }
    }
    conflicts
}

/// What applying a rule set did to a table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChangeSummary {
    /// Cells matched by at least one rule.
    pub assigned: usize,
    /// Cells whose state actually changed.
    pub changes: Vec<CellDiff>,
    /// Expert cells (specified or overridden) that a rule replaced.
    pub displaced: Vec<CellDiff>,
}

/// Writes every compiled assignment into the table as specified cells.
/// Conflicting assignments are refused outright.
pub fn apply(table: &CombiningTable, compiled: &CompiledAssignments) -> Result<(CombiningTable, ChangeSummary)> {
    let conflicts = detect_conflicts(compiled, table.axes());
    if !conflicts.is_empty() {
        return Err(Error::ConflictsPresent(conflicts));
    }
    let mut next = table.clone();
    let mut summary = ChangeSummary::default();
    for assignment in &compiled.assignments {
        assignment.region.validate(table.axes())?;
        let targets: Vec<GridIndex> = next
            .region_cells(&assignment.region)
            .into_iter()
            .map(|(i, _)| i)
            .collect();
        for index in targets {
            let after = CellState::Specified {
                value: assignment.value,
                note: assignment.source.clone(),
            };
            let before = next.put(&index, after.clone())?;
            if before != after {
                let diff = CellDiff {
                    index,
                    before,
                    after,
                };
                if diff.before.is_expert() {
                    summary.displaced.push(diff.clone());
                }
                summary.changes.push(diff);
            }
        }
    }
    summary.assigned = next
        .indices()
        .filter(|i| compiled.assignments.iter().any(|a| a.region.contains(table.axes(), i)))
        .count();
    Ok((next, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    fn bipolar_axes() -> Vec<Axis> {
        fixtures::quadrant_table().axes().to_vec()
    }

    /// Brute-force oracle: evaluate the rule's conditions on grid levels.
    fn holds(rule: &Rule, axes: &[Axis], coords: &[f64]) -> bool {
        rule.conditions.iter().all(|cond| {
            let slot = axes.iter().position(|a| a.proposition() == cond.proposition()).unwrap();
            let x = coords[slot];
            cond.atoms().iter().any(|a| match a.op {
                CmpOp::Ge => x >= a.value - 1e-9,
                CmpOp::Le => x <= a.value + 1e-9,
                CmpOp::Eq => (x - a.value).abs() <= 1e-9,
                CmpOp::Gt => x > a.value + 1e-9,
                CmpOp::Lt => x < a.value - 1e-9,
            })
        })
    }

    #[test]
    fn parses_the_quadrant_rule() {
        let rs = parse_rules("IF bel(E1) >= 0 AND bel(E2) <= 0 THEN bel(C) := 0").unwrap();
        assert_eq!(rs.rules.len(), 1);
        assert_eq!(rs.rules[0].conditions.len(), 2);
        assert_eq!(rs.rules[0].conclusion, "C");
        assert_eq!(rs.rules[0].value, 0.0);
    }

    #[test]
    fn parses_a_disjunction() {
        let rs = parse_rules(
            "IF bel(E1) <= -.75 AND (bel(E2) = .5 OR bel(E2) = .25) THEN bel(C) := -.75",
        )
        .unwrap();
        let rule = &rs.rules[0];
        assert_eq!(rule.value, -0.75);
        match &rule.conditions[1] {
            Condition::AnyOf(atoms) => {
                assert_eq!(atoms.len(), 2);
                assert_eq!(atoms[1].value, 0.25);
            }
            other => panic!("expected disjunction, got {other:?}"),
        }
    }

    #[test]
    fn keywords_and_symbols() {
        let rs = parse_rules("if bel(x) ≥ .5 and bel(y) ≤ 1 then BEL(z) := +.25\n# trailing comment").unwrap();
        assert_eq!(rs.rules[0].conditions[0], Condition::Compare(Comparison {
            proposition: "x".into(),
            op: CmpOp::Ge,
            value: 0.5,
        }));
        assert_eq!(rs.rules[0].value, 0.25);
        assert_eq!(parse_rules("# nothing here\n").unwrap(), RuleSet::default());
    }

    #[test]
    fn parse_errors_carry_positions() {
        match parse_rules("IF bel(E1) >") {
            Err(Error::Parse(e)) => {
                assert_eq!((e.line, e.column), (1, 13));
                assert_eq!(e.expected, vec!["number"]);
                assert_eq!(e.found, "end of input");
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse_rules("IF bel(a) > 0 THEN bel(c) := 1\nIF THEN bel(c) := 0") {
            Err(Error::Parse(e)) => assert_eq!((e.line, e.column), (2, 4)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_rules("IF (bel(a) = 1) THEN bel(c) := 1").is_err());
        assert!(parse_rules("IF (bel(a) = 1 OR bel(b) = 1) THEN bel(c) := 1").is_err());
        assert!(parse_rules("IF bel(a) = 1 THEN bel(c) = 1").is_err());
        assert!(parse_rules("IF bel(a) = 1 THEN bel(c) := 1 $").is_err());
    }

    #[test]
    fn format_examples() {
        let rs = parse_rules(fixtures::QUADRANT_RULES).unwrap();
        let text = format_rules(&rs);
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "IF bel(E1) <= -0.75 AND (bel(E2) = 0.5 OR bel(E2) = 0.25) THEN bel(C) := -0.75"
        );
        assert_eq!(parse_rules(&text).unwrap(), rs);
        assert_eq!(format_rules(&RuleSet::default()), "");
    }

    #[test]
    fn compile_examples() {
        let axes = bipolar_axes();
        let rs = parse_rules(fixtures::QUADRANT_RULES).unwrap();
        let compiled = compile(&rs, &axes, BeliefScale::BIPOLAR).unwrap();
        let t = fixtures::quadrant_table();
        let sizes: Vec<usize> = compiled
            .assignments
            .iter()
            .map(|a| t.region_cells(&a.region).len())
            .collect();
        assert_eq!(sizes, vec![25, 4, 2]);

        let off = parse_rules("IF bel(E1) = .3 THEN bel(C) := 0").unwrap();
        assert!(matches!(
            compile(&off, &axes, BeliefScale::BIPOLAR),
            Err(Error::EqualityOffGrid { level, .. }) if level == 0.3
        ));
        let unknown = parse_rules("IF bel(E9) = 0 THEN bel(C) := 0").unwrap();
        assert!(matches!(
            compile(&unknown, &axes, BeliefScale::BIPOLAR),
            Err(Error::UnknownProposition(p)) if p == "E9"
        ));
        let too_big = parse_rules("IF bel(E1) = 0 THEN bel(C) := 2").unwrap();
        assert!(matches!(
            compile(&too_big, &axes, BeliefScale::BIPOLAR),
            Err(Error::OutOfRange { .. })
        ));
        // Thresholds need not be grid levels.
        let thr = parse_rules("IF bel(E1) > .3 THEN bel(C) := 0").unwrap();
        let c = compile(&thr, &axes, BeliefScale::BIPOLAR).unwrap();
        assert_eq!(t.region_cells(&c.assignments[0].region).len(), 3 * 9);
    }

    #[test]
    fn compiled_regions_match_brute_force() {
        let axes = bipolar_axes();
        let t = fixtures::quadrant_table();
        let rs = parse_rules(fixtures::QUADRANT_RULES).unwrap();
        let compiled = compile(&rs, &axes, BeliefScale::BIPOLAR).unwrap();
        for (rule, a) in rs.rules.iter().zip(&compiled.assignments) {
            for idx in t.indices() {
                assert_eq!(
                    a.region.contains(&axes, &idx),
                    holds(rule, &axes, &t.coordinates(&idx)),
                    "rule {} at {idx:?}",
                    a.rule
                );
            }
        }
    }

    #[test]
    fn conflict_examples() {
        let axes = bipolar_axes();
        let lower_left = parse_rules(fixtures::QUADRANT_RULES).unwrap();
        let compiled = compile(&lower_left, &axes, BeliefScale::BIPOLAR).unwrap();
        assert!(detect_conflicts(&compiled, &axes).is_empty());

        let same = parse_rules(
            "IF bel(E1) >= 0 THEN bel(C) := 0\nIF bel(E2) >= 0 THEN bel(C) := 0",
        )
        .unwrap();
        let compiled = compile(&same, &axes, BeliefScale::BIPOLAR).unwrap();
        assert!(detect_conflicts(&compiled, &axes).is_empty());

        let clash = parse_rules(
            "IF bel(E1) = 1 AND bel(E2) = 1 THEN bel(C) := 0\nIF bel(E1) >= 1 AND bel(E2) >= .75 THEN bel(C) := .5",
        )
        .unwrap();
        let compiled = compile(&clash, &axes, BeliefScale::BIPOLAR).unwrap();
        let conflicts = detect_conflicts(&compiled, &axes);
        assert_eq!(conflicts.len(), 1);
        assert_eq!(conflicts[0].index, vec![0, 0]);
        assert_eq!(conflicts[0].values, vec![0.0, 0.5]);
        assert_eq!(conflicts[0].rules, vec![0, 1]);
    }

    #[test]
    fn apply_examples() {
        let axes = bipolar_axes();
        let empty = CombiningTable::new("f1", axes.clone(), "C", BeliefScale::BIPOLAR).unwrap();
        let quadrant = parse_rules("IF bel(E1) >= 0 AND bel(E2) <= 0 THEN bel(C) := 0").unwrap();
        let compiled = compile(&quadrant, &axes, BeliefScale::BIPOLAR).unwrap();
        let (t, summary) = apply(&empty, &compiled).unwrap();
        assert_eq!(summary.assigned, 25);
        assert_eq!(summary.changes.len(), 25);
        assert!(summary.displaced.is_empty());
        let specified: Vec<_> = t.cells().iter().filter(|c| c.value() == Some(0.0)).collect();
        assert_eq!(specified.len(), 25);
        assert!(specified.iter().all(|c| matches!(c, CellState::Specified { note, .. } if note.starts_with("IF bel(E1) >= 0"))));

        let overridden = empty
            .with_cell(&[0, 8], CellState::Overridden { value: 0.5, entry: 7 })
            .unwrap();
        let (_, summary) = apply(&overridden, &compiled).unwrap();
        assert_eq!(summary.displaced.len(), 1);
        assert_eq!(summary.displaced[0].index, vec![0, 8]);
        assert_eq!(summary.displaced[0].before, CellState::Overridden { value: 0.5, entry: 7 });

        let clash = parse_rules(
            "IF bel(E1) = 1 THEN bel(C) := 0\nIF bel(E2) = 1 THEN bel(C) := .5",
        )
        .unwrap();
        let compiled = compile(&clash, &axes, BeliefScale::BIPOLAR).unwrap();
        assert!(matches!(apply(&empty, &compiled), Err(Error::ConflictsPresent(c)) if c.len() == 1));
    }

    fn arb_atom(prop: &'static str) -> impl Strategy<Value = Comparison> {
        let levels = vec![1.0, 0.75, 0.5, 0.25, 0.0, -0.25, -0.5, -0.75, -1.0];
        (
            prop_oneof![Just(CmpOp::Ge), Just(CmpOp::Le), Just(CmpOp::Eq), Just(CmpOp::Gt), Just(CmpOp::Lt)],
            prop::sample::select(levels),
        )
            .prop_map(move |(op, value)| Comparison {
                proposition: prop.into(),
                op,
                value,
            })
    }

    fn arb_condition() -> impl Strategy<Value = Condition> {
        prop::sample::select(vec!["E1", "E2"]).prop_flat_map(|p| {
            prop_oneof![
                arb_atom(p).prop_map(Condition::Compare),
                prop::collection::vec(arb_atom(p), 2..4).prop_map(Condition::AnyOf),
            ]
        })
    }

    fn arb_rule() -> impl Strategy<Value = Rule> {
        (
            prop::collection::vec(arb_condition(), 1..4),
            prop::sample::select(vec![-1.0, -0.75, -0.5, 0.0, 0.25, 1.0]),
        )
            .prop_map(|(conditions, value)| Rule {
                conditions,
                conclusion: "C".into(),
                value,
            })
    }

    proptest! {
        #[test]
        fn format_then_parse_is_identity(rules in prop::collection::vec(arb_rule(), 0..5)) {
            let rs = RuleSet { rules };
            prop_assert_eq!(parse_rules(&format_rules(&rs)).unwrap(), rs);
        }

        #[test]
        fn compile_is_sound_and_complete(rule in arb_rule()) {
            let axes = bipolar_axes();
            let t = fixtures::quadrant_table();
            let rs = RuleSet { rules: vec![rule.clone()] };
            let compiled = compile(&rs, &axes, BeliefScale::BIPOLAR).unwrap();
            for idx in t.indices() {
                prop_assert_eq!(
                    compiled.assignments[0].region.contains(&axes, &idx),
                    holds(&rule, &axes, &t.coordinates(&idx))
                );
            }
        }

        #[test]
        fn compiled_regions_ignore_rule_order(rules in prop::collection::vec(arb_rule(), 1..5)) {
            let axes = bipolar_axes();
            let forward = compile(&RuleSet { rules: rules.clone() }, &axes, BeliefScale::BIPOLAR).unwrap();
            let mut rev = rules;
            rev.reverse();
            let backward = compile(&RuleSet { rules: rev }, &axes, BeliefScale::BIPOLAR).unwrap();
            let n = forward.assignments.len();
            for (i, a) in forward.assignments.iter().enumerate() {
                prop_assert_eq!(&a.region, &backward.assignments[n - 1 - i].region);
            }
        }
    }
}
