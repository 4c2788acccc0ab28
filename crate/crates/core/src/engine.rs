//! Forward evaluation of inference rules whose premises are combined by a
//! table or by interpolation, plus corroboration of rules sharing a
//! conclusion. Every computed belief carries a trace recording which cells
//! or corner values produced it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::belief::{BeliefScale, BeliefValue, ScaleKind};
use crate::error::{Error, Result};
use crate::interpolate::{Interpolation, Interpolator};
use crate::tables::{
    BlankReason, BlendTerm, CategoricalTable, CombiningTable, Corner, GridIndex, LookupMode, LookupResult,
    Provenance, ValueSource,
};

const K_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposition {
    pub id: String,
    pub statement: String,
    pub scale: BeliefScale,
}

impl Proposition {
    pub fn new(id: impl Into<String>, statement: impl Into<String>, scale: BeliefScale) -> Self {
        Proposition {
            id: id.into(),
            statement: statement.into(),
            scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Combiner {
    Table { table: String },
    Interpolated { categorical: String, interpolator: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceRule {
    pub id: String,
    pub premise: Vec<String>,
    pub conclusion: String,
    pub combiner: Combiner,
    /// Belief in the conclusion when every premise is certain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorroborationCombiner {
    Max,
    Min,
    ProbabilisticSum,
    /// A combining table whose axes are named by the corroborating rule ids.
    Table { table: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorroborationSpec {
    pub conclusion: String,
    pub combiner: CorroborationCombiner,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Network {
    #[serde(default)]
    pub propositions: Vec<Proposition>,
    #[serde(default)]
    pub rules: Vec<InferenceRule>,
    #[serde(default)]
    pub corroborations: Vec<CorroborationSpec>,
}

/// Tables, categorical tables, and interpolators that rules refer to by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Library {
    pub tables: BTreeMap<String, CombiningTable>,
    pub categorical: BTreeMap<String, CategoricalTable>,
    pub interpolators: BTreeMap<String, Interpolator>,
}

impl Library {
    pub fn table(&self, id: &str) -> Result<&CombiningTable> {
        self.tables.get(id).ok_or_else(|| Error::NotFound {
            kind: "table",
            id: id.to_string(),
        })
    }

    pub fn categorical(&self, id: &str) -> Result<&CategoricalTable> {
        self.categorical.get(id).ok_or_else(|| Error::NotFound {
            kind: "categorical table",
            id: id.to_string(),
        })
    }

    pub fn interpolator(&self, id: &str) -> Result<&Interpolator> {
        self.interpolators.get(id).ok_or_else(|| Error::NotFound {
            kind: "interpolator",
            id: id.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlankPolicy {
    /// Read a blank as "uninformative": the scale's ignorance value.
    #[default]
    TreatAsIgnorance,
    /// Stop and report the blank cell.
    Halt,
}

pub type Env = BTreeMap<String, BeliefValue>;

/// How one node's belief was computed, with enough detail to recompute it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Combination {
    Cell {
        table: String,
        index: GridIndex,
        provenance: Provenance,
        value: f64,
    },
    Blend {
        table: String,
        terms: Vec<BlendTerm>,
    },
    Interpolation {
        categorical: String,
        interpolator: String,
        #[serde(flatten)]
        record: Interpolation,
    },
    /// A blank cell read as ignorance.
    Ignorance {
        table: String,
        index: GridIndex,
        reason: BlankReason,
        value: f64,
    },
    Max,
    Min,
    ProbabilisticSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    Evidence,
    Rule {
        rule: String,
        combination: Combination,
        inputs: Vec<Trace>,
    },
    Corroboration {
        combination: Combination,
        inputs: Vec<Trace>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub proposition: String,
    pub belief: f64,
    #[serde(flatten)]
    pub step: Step,
}

impl Trace {
    pub fn evidence(proposition: impl Into<String>, belief: f64) -> Self {
        Trace {
            proposition: proposition.into(),
            belief,
            step: Step::Evidence,
        }
    }

    pub fn inputs(&self) -> &[Trace] {
        match &self.step {
            Step::Evidence => &[],
            Step::Rule { inputs, .. } | Step::Corroboration { inputs, .. } => inputs,
        }
    }

    pub fn depth(&self) -> usize {
        self.inputs().iter().map(|t| t.depth() + 1).max().unwrap_or(0)
    }

    /// Recomputes this node's belief from its recorded combination and
    /// its children's beliefs.
    pub fn replay(&self) -> f64 {
        let child_beliefs: Vec<f64> = self.inputs().iter().map(|t| t.belief).collect();
        match &self.step {
            Step::Evidence => self.belief,
            Step::Rule { combination, .. } | Step::Corroboration { combination, .. } => {
                replay_combination(combination, &child_beliefs)
            }
        }
    }

    /// Checks replay exactness at every node of the tree.
    pub fn verify(&self) -> bool {
        self.replay().to_bits() == self.belief.to_bits() && self.inputs().iter().all(Trace::verify)
    }
}

fn replay_combination(combination: &Combination, inputs: &[f64]) -> f64 {
    match combination {
        Combination::Cell { value, .. } | Combination::Ignorance { value, .. } => *value,
        Combination::Blend { terms, .. } => ValueSource::blend_value(terms),
        Combination::Interpolation { record, .. } => record.replay(),
        Combination::Max => inputs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Combination::Min => inputs.iter().copied().fold(f64::INFINITY, f64::min),
        Combination::ProbabilisticSum => probabilistic_sum(inputs),
    }
}

fn probabilistic_sum(values: &[f64]) -> f64 {
    1.0 - values.iter().fold(1.0, |acc, v| acc * (1.0 - v))
}

/// Table lookup with the engine's fallback order: exact, then snap, then
/// continuous.
fn lookup_with_fallback(table: &CombiningTable, point: &[BeliefValue]) -> Result<LookupResult> {
    match table.lookup(point, LookupMode::Exact) {
        Err(Error::NotOnGrid { .. }) => match table.lookup(point, LookupMode::Snap) {
            Err(Error::Ambiguous { .. }) => table.lookup(point, LookupMode::Continuous),
            other => other,
        },
        other => other,
    }
}

fn resolve_lookup(
    table: &CombiningTable,
    point: &[BeliefValue],
    policy: BlankPolicy,
) -> Result<(BeliefValue, Combination)> {
    let scale = table.conclusion_scale();
    match lookup_with_fallback(table, point)? {
        LookupResult::Value { value, source } => {
            let combination = match source {
                ValueSource::Cell { index, provenance } => Combination::Cell {
                    table: table.id().to_string(),
                    index,
                    provenance,
                    value,
                },
                ValueSource::Blend { terms } => Combination::Blend {
                    table: table.id().to_string(),
                    terms,
                },
            };
            Ok((BeliefValue::new(value, scale)?, combination))
        }
        LookupResult::Blank { index, reason } => match policy {
            BlankPolicy::Halt => Err(Error::BlankEncountered(index)),
            BlankPolicy::TreatAsIgnorance => {
                let value = scale
                    .ignorance()
                    .ok_or_else(|| Error::BlankWithoutIgnorance(index.clone()))?;
                Ok((
                    BeliefValue::new(value, scale)?,
                    Combination::Ignorance {
                        table: table.id().to_string(),
                        index,
                        reason,
                        value,
                    },
                ))
            }
        },
    }
}

impl InferenceRule {
    fn arity_error(&self, expected: usize) -> Error {
        Error::InvalidRule {
            rule: self.id.clone(),
            reason: format!(
                "premise has {} propositions but the combiner takes {expected}",
                self.premise.len()
            ),
        }
    }

    /// Checks the combiner exists, its arity matches the premise, and `k`
    /// agrees with the all-true corner when both are present.
    pub fn validate(&self, lib: &Library) -> Result<()> {
        let all_true = Corner::new(vec![true; self.premise.len()]);
        let corner = match &self.combiner {
            Combiner::Table { table } => {
                let table = lib.table(table)?;
                if table.arity() != self.premise.len() {
                    return Err(self.arity_error(table.arity()));
                }
                table.corner_view().get(&all_true)
            }
            Combiner::Interpolated {
                categorical,
                interpolator,
            } => {
                let cat = lib.categorical(categorical)?;
                if cat.arity() != self.premise.len() {
                    return Err(self.arity_error(cat.arity()));
                }
                lib.interpolator(interpolator)?.check_arity(cat.arity())?;
                cat.get(&all_true)
            }
        };
        if let (Some(k), Some(corner)) = (self.k, corner) {
            if (k - corner).abs() > K_TOLERANCE {
                return Err(Error::InvalidRule {
                    rule: self.id.clone(),
                    reason: format!("k = {k} but the all-true corner holds {corner}"),
                });
            }
        }
        Ok(())
    }

    fn premise_beliefs(&self, env: &Env) -> Result<Vec<BeliefValue>> {
        let missing: Vec<String> = self
            .premise
            .iter()
            .filter(|p| !env.contains_key(*p))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingEvidence(missing));
        }
        Ok(self.premise.iter().map(|p| env[p]).collect())
    }

    fn fire(&self, lib: &Library, env: &Env, policy: BlankPolicy) -> Result<(BeliefValue, Combination)> {
        let point = self.premise_beliefs(env)?;
        match &self.combiner {
            Combiner::Table { table } => resolve_lookup(lib.table(table)?, &point, policy),
            Combiner::Interpolated {
                categorical,
                interpolator,
            } => {
                let cat = lib.categorical(categorical)?;
                let record = lib.interpolator(interpolator)?.evaluate(cat, &point)?;
                let belief = BeliefValue::probability(record.value)?;
                Ok((
                    belief,
                    Combination::Interpolation {
                        categorical: categorical.clone(),
                        interpolator: interpolator.clone(),
                        record,
                    },
                ))
            }
        }
    }
}

fn rule_trace(rule: &InferenceRule, belief: f64, combination: Combination, inputs: Vec<Trace>) -> Trace {
    Trace {
        proposition: rule.conclusion.clone(),
        belief,
        step: Step::Rule {
            rule: rule.id.clone(),
            combination,
            inputs,
        },
    }
}

/// Evaluates one rule against an environment of premise beliefs.
pub fn evaluate_rule(
    rule: &InferenceRule,
    lib: &Library,
    env: &Env,
    policy: BlankPolicy,
) -> Result<(BeliefValue, Trace)> {
    let (belief, combination) = rule.fire(lib, env, policy)?;
    let inputs = rule
        .premise
        .iter()
        .map(|p| Trace::evidence(p.clone(), env[p].value()))
        .collect();
    Ok((belief, rule_trace(rule, belief.value(), combination, inputs)))
}

/// Combines the outputs of several rules concluding the same proposition.
/// For a table combiner, `values` follow the table's axis order.
pub fn corroborate(
    values: &[BeliefValue],
    combiner: &CorroborationCombiner,
    lib: &Library,
    policy: BlankPolicy,
) -> Result<(BeliefValue, Combination)> {
    let first = *values.first().ok_or(Error::ArityMismatch {
        expected: 1,
        found: 0,
    })?;
    let scale = first.scale();
    if let Some(other) = values.iter().find(|v| v.scale() != scale) {
        return Err(Error::ScaleMismatch {
            expected: scale.kind(),
            found: other.scale().kind(),
        });
    }
    let raw: Vec<f64> = values.iter().map(|v| v.value()).collect();
    let (combination, value) = match combiner {
        CorroborationCombiner::Max => (Combination::Max, raw.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        CorroborationCombiner::Min => (Combination::Min, raw.iter().copied().fold(f64::INFINITY, f64::min)),
        CorroborationCombiner::ProbabilisticSum => {
            scale.expect_kind(ScaleKind::Probability)?;
            (Combination::ProbabilisticSum, probabilistic_sum(&raw))
        }
        CorroborationCombiner::Table { table } => {
            let table = lib.table(table)?;
            if table.arity() != values.len() {
                return Err(Error::ArityMismatch {
                    expected: table.arity(),
                    found: values.len(),
                });
            }
            return resolve_lookup(table, values, policy);
        }
    };
    Ok((BeliefValue::new(value, scale)?, combination))
}

/// Result of forward evaluation: every belief that could be derived, and
/// a trace for each.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub env: Env,
    pub traces: BTreeMap<String, Trace>,
}

impl Evaluation {
    pub fn explain(&self, proposition: &str) -> Result<&Trace> {
        explain(&self.traces, proposition)
    }
}

pub fn explain<'a>(traces: &'a BTreeMap<String, Trace>, proposition: &str) -> Result<&'a Trace> {
    traces
        .get(proposition)
        .ok_or_else(|| Error::NotEvaluated(proposition.to_string()))
}

impl Network {
    pub fn proposition(&self, id: &str) -> Option<&Proposition> {
        self.propositions.iter().find(|p| p.id == id)
    }

    pub fn corroboration(&self, conclusion: &str) -> Option<&CorroborationSpec> {
        self.corroborations.iter().find(|c| c.conclusion == conclusion)
    }

    /// Rules grouped by conclusion; within a group, ordered by rule id.
    fn rules_by_conclusion(&self) -> BTreeMap<&str, Vec<&InferenceRule>> {
        let mut groups: BTreeMap<&str, Vec<&InferenceRule>> = BTreeMap::new();
        for rule in &self.rules {
            groups.entry(rule.conclusion.as_str()).or_default().push(rule);
        }
        for group in groups.values_mut() {
            group.sort_by(|a, b| a.id.cmp(&b.id));
        }
        groups
    }

    /// Structural checks: known propositions, valid combiners, a
    /// corroboration spec wherever several rules share a conclusion, and an
    /// acyclic dependency graph.
    pub fn validate(&self, lib: &Library) -> Result<()> {
        let mut seen = BTreeSet::new();
        for p in &self.propositions {
            if !seen.insert(p.id.as_str()) {
                return Err(Error::InvalidRule {
                    rule: p.id.clone(),
                    reason: "duplicate proposition id".into(),
                });
            }
        }
        let mut rule_ids = BTreeSet::new();
        for rule in &self.rules {
            if !rule_ids.insert(rule.id.as_str()) {
                return Err(Error::InvalidRule {
                    rule: rule.id.clone(),
                    reason: "duplicate rule id".into(),
                });
            }
            for p in rule.premise.iter().chain(std::iter::once(&rule.conclusion)) {
                if self.proposition(p).is_none() {
                    return Err(Error::UnknownProposition(p.clone()));
                }
            }
            rule.validate(lib)?;
        }
        for (conclusion, group) in self.rules_by_conclusion() {
            if group.len() < 2 {
                continue;
            }
            let spec = self
                .corroboration(conclusion)
                .ok_or_else(|| Error::AmbiguousCorroboration(conclusion.to_string()))?;
            if let CorroborationCombiner::Table { table } = &spec.combiner {
                let table = lib.table(table)?;
                if table.arity() != group.len() {
                    return Err(Error::ArityMismatch {
                        expected: group.len(),
                        found: table.arity(),
                    });
                }
                for axis in table.axes() {
                    if !group.iter().any(|r| r.id == axis.proposition()) {
                        return Err(Error::UnknownProposition(axis.proposition().to_string()));
                    }
                }
            }
        }
        self.topological_order().map(|_| ())
    }

    /// Propositions ordered so every premise precedes its conclusions.
    pub fn topological_order(&self) -> Result<Vec<String>> {
        let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for p in &self.propositions {
            edges.entry(p.id.as_str()).or_default();
        }
        for rule in &self.rules {
            for p in &rule.premise {
                edges.entry(p.as_str()).or_default().insert(rule.conclusion.as_str());
            }
            edges.entry(rule.conclusion.as_str()).or_default();
        }

        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        fn visit<'a>(
            node: &'a str,
            edges: &BTreeMap<&'a str, BTreeSet<&'a str>>,
            marks: &mut BTreeMap<&'a str, Mark>,
            path: &mut Vec<&'a str>,
            post: &mut Vec<&'a str>,
        ) -> Result<()> {
            match marks.get(node) {
                Some(Mark::Done) => return Ok(()),
                Some(Mark::Open) => {
                    let start = path.iter().position(|n| *n == node).unwrap_or(0);
                    let mut cycle: Vec<String> = path[start..].iter().map(|s| s.to_string()).collect();
                    cycle.push(node.to_string());
                    return Err(Error::CycleDetected(cycle));
                }
                None => {}
            }
            marks.insert(node, Mark::Open);
            path.push(node);
            for next in &edges[node] {
                visit(next, edges, marks, path, post)?;
            }
            path.pop();
            marks.insert(node, Mark::Done);
            post.push(node);
            Ok(())
        }

        let mut marks = BTreeMap::new();
        let mut post = Vec::new();
        for node in edges.keys() {
            visit(node, &edges, &mut marks, &mut Vec::new(), &mut post)?;
        }
        Ok(post.into_iter().rev().map(str::to_string).collect())
    }
}

/// Evaluates every derivable conclusion in dependency order.
///
/// Base evidence is authoritative: rules concluding a proposition already in
/// `base` are not fired. A conclusion is derived only when every rule
/// concluding it has all of its premises available.
pub fn evaluate_network(network: &Network, lib: &Library, base: &Env, policy: BlankPolicy) -> Result<Evaluation> {
    network.validate(lib)?;
    let groups = network.rules_by_conclusion();
    let mut env = base.clone();
    let mut traces: BTreeMap<String, Trace> = base
        .iter()
        .map(|(id, b)| (id.clone(), Trace::evidence(id.clone(), b.value())))
        .collect();

    for prop in network.topological_order()? {
        if env.contains_key(&prop) {
            continue;
        }
        let Some(group) = groups.get(prop.as_str()) else {
            continue;
        };
        if !group.iter().all(|r| r.premise.iter().all(|p| env.contains_key(p))) {
            continue;
        }
        let mut fired = Vec::with_capacity(group.len());
        for rule in group {
            let (belief, combination) = rule.fire(lib, &env, policy)?;
            let inputs = rule.premise.iter().map(|p| traces[p].clone()).collect();
            fired.push((rule, belief, rule_trace(rule, belief.value(), combination, inputs)));
        }
        let (belief, trace) = if fired.len() == 1 {
            let (_, belief, trace) = fired.pop().unwrap();
            (belief, trace)
        } else {
            let spec = network
                .corroboration(&prop)
                .ok_or_else(|| Error::AmbiguousCorroboration(prop.clone()))?;
            if let CorroborationCombiner::Table { table } = &spec.combiner {
                // Order inputs along the corroboration table's axes.
                let axes = lib.table(table)?.axes();
                fired.sort_by_key(|(rule, _, _)| {
                    axes.iter().position(|a| a.proposition() == rule.id).unwrap_or(usize::MAX)
                });
            }
            let values: Vec<BeliefValue> = fired.iter().map(|(_, b, _)| *b).collect();
            let (belief, combination) = corroborate(&values, &spec.combiner, lib, policy)?;
            let inputs = fired.into_iter().map(|(_, _, t)| t).collect();
            (
                belief,
                Trace {
                    proposition: prop.clone(),
                    belief: belief.value(),
                    step: Step::Corroboration { combination, inputs },
                },
            )
        };
        env.insert(prop.clone(), belief);
        traces.insert(prop, trace);
    }
    Ok(Evaluation { env, traces })
}
