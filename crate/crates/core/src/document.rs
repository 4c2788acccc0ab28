//! A self-contained knowledge base file: tables, categorical tables,
//! interpolators, rule text, the inference network, and the revision
//! journal.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::belief::{Axis, BeliefScale};
use crate::engine::{self, BlankPolicy, CorroborationCombiner, CorroborationSpec, Env, Evaluation, Library, Network};
use crate::engine::{Combiner, InferenceRule, Proposition};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::interpolate::{Interpolator, InterpolatorKind};
use crate::revision::{self, Action, Binding, EntryContext, JournalEntry, SideEffect, SwapWarning};
use crate::tables::{CategoricalTable, CellState, CombiningTable};

pub const FORMAT_VERSION: &str = "1.0.0";
pub const FILE_EXTENSION: &str = ".mcf.json";

/// A named block of rule text, applied to one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleFile {
    pub table: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub version: String,
    pub library: Library,
    pub bindings: BTreeMap<String, Binding>,
    pub rule_files: BTreeMap<String, RuleFile>,
    pub network: Network,
    pub journal: Vec<JournalEntry>,
    /// Top-level fields this version does not know, kept for round-trips.
    pub extra: Map<String, Value>,
    /// Unknown fields of individual table records.
    pub table_extra: BTreeMap<String, Map<String, Value>>,
}

impl Default for Document {
    fn default() -> Self {
        Document {
            version: FORMAT_VERSION.to_string(),
            library: Library::default(),
            bindings: BTreeMap::new(),
            rule_files: BTreeMap::new(),
            network: Network::default(),
            journal: Vec::new(),
            extra: Map::new(),
            table_extra: BTreeMap::new(),
        }
    }
}

/// Outcome of one journaled mutation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Applied {
    pub entry: JournalEntry,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<SwapWarning>,
}

// ---- file layout ----

#[derive(Serialize, Deserialize)]
struct ScaleInfo {
    min: f64,
    max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ignorance: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    axes: Vec<String>,
    conclusion: String,
    conclusion_scale: BeliefScale,
    cells: Vec<CellState>,
    #[serde(flatten)]
    binding: Binding,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    #[serde(default)]
    propositions: Vec<Proposition>,
    #[serde(default)]
    rules: Vec<InferenceRule>,
}

#[derive(Serialize, Deserialize)]
struct DocFile {
    version: String,
    #[serde(default)]
    scales: BTreeMap<String, ScaleInfo>,
    #[serde(default)]
    axes: BTreeMap<String, Axis>,
    #[serde(default)]
    tables: BTreeMap<String, TableFile>,
    #[serde(default)]
    categorical: BTreeMap<String, CategoricalTable>,
    #[serde(default)]
    interpolators: BTreeMap<String, InterpolatorKind>,
    #[serde(default)]
    rules: BTreeMap<String, RuleFile>,
    #[serde(default = "empty_network")]
    network: NetworkFile,
    #[serde(default)]
    corroboration: Vec<CorroborationSpec>,
    #[serde(default)]
    journal: Vec<JournalEntry>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

fn empty_network() -> NetworkFile {
    NetworkFile {
        propositions: Vec::new(),
        rules: Vec::new(),
    }
}

fn schema(path: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        reason: reason.into(),
    }
}

fn check_version(version: &str) -> Result<()> {
    let major = version.split('.').next().unwrap_or_default();
    let supported = FORMAT_VERSION.split('.').next().unwrap_or_default();
    match major.parse::<u64>() {
        Ok(_) if major == supported => Ok(()),
        Ok(_) => Err(Error::VersionUnsupported(version.to_string())),
        Err(_) => Err(schema("version", format!("'{version}' is not a semantic version"))),
    }
}

/// Picks a stable id for an axis, reusing one already registered for an
/// identical axis.
fn axis_id(axes: &mut BTreeMap<String, Axis>, axis: &Axis) -> String {
    if let Some((id, _)) = axes.iter().find(|(_, a)| *a == axis) {
        return id.clone();
    }
    let mut id = axis.proposition().to_string();
    let mut n = 2;
    while axes.contains_key(&id) {
        id = format!("{}#{n}", axis.proposition());
        n += 1;
    }
    axes.insert(id.clone(), axis.clone());
    id
}

impl Document {
    pub fn to_value(&self) -> Value {
        let mut axes = BTreeMap::new();
        let mut scales = BTreeMap::new();
        let mut note_scale = |s: BeliefScale| {
            scales.insert(
                s.name().to_string(),
                ScaleInfo {
                    min: s.min(),
                    max: s.max(),
                    ignorance: s.ignorance(),
                },
            );
        };
        let mut tables = BTreeMap::new();
        for (id, t) in &self.library.tables {
            note_scale(t.conclusion_scale());
            let ids = t
                .axes()
                .iter()
                .map(|a| {
                    note_scale(a.scale());
                    axis_id(&mut axes, a)
                })
                .collect();
            tables.insert(
                id.clone(),
                TableFile {
                    axes: ids,
                    conclusion: t.conclusion().to_string(),
                    conclusion_scale: t.conclusion_scale(),
                    cells: t.cells().to_vec(),
                    binding: self.bindings.get(id).cloned().unwrap_or_default(),
                    extra: self.table_extra.get(id).cloned().unwrap_or_default(),
                },
            );
        }
        for p in &self.network.propositions {
            note_scale(p.scale);
        }
        let file = DocFile {
            version: self.version.clone(),
            scales,
            axes,
            tables,
            categorical: self.library.categorical.clone(),
            interpolators: self
                .library
                .interpolators
                .iter()
                .map(|(id, i)| (id.clone(), i.kind.clone()))
                .collect(),
            rules: self.rule_files.clone(),
            network: NetworkFile {
                propositions: self.network.propositions.clone(),
                rules: self.network.rules.clone(),
            },
            corroboration: self.network.corroborations.clone(),
            journal: self.journal.clone(),
            extra: self.extra.clone(),
        };
        serde_json::to_value(file).expect("document serializes")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("document serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| schema(format!("line {}", e.line()), e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let version = value
            .get("version")
            .ok_or_else(|| schema("version", "missing field"))?
            .as_str()
            .ok_or_else(|| schema("version", "expected a string"))?;
        check_version(version)?;

        let file: DocFile = serde_path_to_error::deserialize(value)
            .map_err(|e| schema(e.path().to_string(), e.inner().to_string()))?;

        for (name, info) in &file.scales {
            let scale = BeliefScale::from_name(name).ok_or_else(|| schema(format!("scales.{name}"), "unknown scale"))?;
            if info.min != scale.min() || info.max != scale.max() || info.ignorance != scale.ignorance() {
                return Err(schema(format!("scales.{name}"), "bounds disagree with the built-in scale"));
            }
        }

        let mut doc = Document {
            version: file.version,
            extra: file.extra,
            rule_files: file.rules,
            journal: file.journal,
            network: Network {
                propositions: file.network.propositions,
                rules: file.network.rules,
                corroborations: file.corroboration,
            },
            ..Document::default()
        };
        doc.library.categorical = file.categorical;
        doc.library.interpolators = file
            .interpolators
            .into_iter()
            .map(|(id, kind)| (id.clone(), Interpolator { id, kind }))
            .collect();
        for (id, t) in file.tables {
            let axes = t
                .axes
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    file.axes
                        .get(a)
                        .cloned()
                        .ok_or_else(|| schema(format!("tables.{id}.axes[{i}]"), format!("unknown axis '{a}'")))
                })
                .collect::<Result<Vec<_>>>()?;
            let table = CombiningTable::from_cells(id.clone(), axes, t.conclusion, t.conclusion_scale, t.cells)
                .map_err(|e| schema(format!("tables.{id}.cells"), e.to_string()))?;
            if !t.extra.is_empty() {
                doc.table_extra.insert(id.clone(), t.extra);
            }
            if t.binding != Binding::default() {
                doc.bindings.insert(id.clone(), t.binding);
            }
            doc.library.tables.insert(id, table);
        }
        doc.validate()?;
        Ok(doc)
    }

    /// Checks that every id referenced anywhere resolves in the document.
    pub fn validate(&self) -> Result<()> {
        let lib = &self.library;
        let need_table = |path: String, id: &str| {
            if lib.tables.contains_key(id) {
                Ok(())
            } else {
                Err(schema(path, format!("unknown table '{id}'")))
            }
        };
        for (id, b) in &self.bindings {
            if let Some(c) = &b.categorical {
                if !lib.categorical.contains_key(c) {
                    return Err(schema(format!("tables.{id}.categorical"), format!("unknown categorical table '{c}'")));
                }
            }
            if let Some(i) = &b.interpolator {
                if !lib.interpolators.contains_key(i) {
                    return Err(schema(format!("tables.{id}.interpolator"), format!("unknown interpolator '{i}'")));
                }
            }
        }
        for (name, f) in &self.rule_files {
            need_table(format!("rules.{name}.table"), &f.table)?;
        }
        let known_prop = |path: String, id: &str| {
            if self.network.proposition(id).is_some() {
                Ok(())
            } else {
                Err(schema(path, format!("unknown proposition '{id}'")))
            }
        };
        for (i, r) in self.network.rules.iter().enumerate() {
            let path = format!("network.rules[{i}]");
            match &r.combiner {
                Combiner::Table { table } => need_table(format!("{path}.combiner.table"), table)?,
                Combiner::Interpolated {
                    categorical,
                    interpolator,
                } => {
                    if !lib.categorical.contains_key(categorical) {
                        return Err(schema(
                            format!("{path}.combiner.categorical"),
                            format!("unknown categorical table '{categorical}'"),
                        ));
                    }
                    if !lib.interpolators.contains_key(interpolator) {
                        return Err(schema(
                            format!("{path}.combiner.interpolator"),
                            format!("unknown interpolator '{interpolator}'"),
                        ));
                    }
                }
            }
            for (j, p) in r.premise.iter().enumerate() {
                known_prop(format!("{path}.premise[{j}]"), p)?;
            }
            known_prop(format!("{path}.conclusion"), &r.conclusion)?;
        }
        for (i, c) in self.network.corroborations.iter().enumerate() {
            known_prop(format!("corroboration[{i}].conclusion"), &c.conclusion)?;
            if let CorroborationCombiner::Table { table } = &c.combiner {
                need_table(format!("corroboration[{i}].combiner.table"), table)?;
            }
        }
        let mut last = 0;
        for (i, e) in self.journal.iter().enumerate() {
            need_table(format!("journal[{i}].table"), &e.table)?;
            if e.id <= last {
                return Err(schema(format!("journal[{i}].id"), "entry ids must increase"));
            }
            last = e.id;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<usize> {
        let text = self.to_json();
        std::fs::write(path, &text)?;
        Ok(text.len())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    // ---- queries ----

    /// Id of the latest journal entry, 0 for an empty journal.
    pub fn head(&self) -> u64 {
        self.journal.last().map_or(0, |e| e.id)
    }

    /// Optimistic-concurrency check for callers that read `head` earlier.
    pub fn check_head(&self, given: Option<u64>) -> Result<()> {
        match given {
            Some(given) if given != self.head() => Err(Error::StaleHead {
                given,
                current: self.head(),
            }),
            _ => Ok(()),
        }
    }

    pub fn table(&self, id: &str) -> Result<&CombiningTable> {
        self.library.table(id)
    }

    pub fn binding(&self, table: &str) -> Binding {
        self.bindings.get(table).cloned().unwrap_or_default()
    }

    pub fn entry(&self, id: u64) -> Result<&JournalEntry> {
        self.journal.iter().find(|e| e.id == id).ok_or_else(|| Error::NotFound {
            kind: "journal entry",
            id: id.to_string(),
        })
    }

    pub fn evaluate(&self, base: &Env, policy: BlankPolicy) -> Result<Evaluation> {
        engine::evaluate_network(&self.network, &self.library, base, policy)
    }

    // ---- mutations ----

    /// Runs an action against a table and appends its journal entry.
    pub fn execute(&mut self, table: &str, action: Action, author: &str) -> Result<Applied> {
        let ctx = EntryContext::new(self.head() + 1, author);
        let applied = self.run(table, action, &ctx)?;
        self.journal.push(applied.entry.clone());
        Ok(applied)
    }

    pub fn revert(&mut self, entry: u64, author: &str) -> Result<Applied> {
        let table = self.entry(entry)?.table.clone();
        self.execute(&table, Action::RevertOf { entry }, author)
    }

    fn interpolator(&self, id: &str) -> Result<Interpolator> {
        self.library.interpolator(id).cloned()
    }

    /// The categorical table a table derives from: its bound one if any,
    /// otherwise its own corner cells.
    fn source_categorical(&self, table: &CombiningTable) -> Result<(Option<String>, CategoricalTable)> {
        match self.binding(table.id()).categorical {
            Some(id) => Ok((Some(id.clone()), self.library.categorical(&id)?.clone())),
            None => Ok((None, table.corner_view())),
        }
    }

    fn run(&mut self, table_id: &str, action: Action, ctx: &EntryContext) -> Result<Applied> {
        let table = self.table(table_id)?.clone();
        let binding = self.binding(table_id);
        let mut warning = None;
        let mut effects = Vec::new();
        let (next, mut entry) = match &action {
            Action::OverrideCell { index, value, note } => revision::override_cell(&table, index, *value, note, ctx)?,
            Action::OverrideBlock { region, value, note } => {
                revision::override_block(&table, region, *value, note, ctx)?
            }
            Action::SetSpecified { index, value, note } => revision::set_specified(&table, index, *value, note, ctx)?,
            Action::MarkMeaningless { region } => revision::mark_meaningless(&table, region, ctx)?,
            Action::ApplyRules { text } => {
                let (t, e, _) = revision::apply_rules(&table, text, ctx)?;
                (t, e)
            }
            Action::EditCorner {
                corner,
                value,
                interpolator,
            } => {
                let interp = self.interpolator(interpolator)?;
                let (cat_id, cat) = self.source_categorical(&table)?;
                let (t, cat_after, e) = revision::edit_corner_with(&table, &cat, corner, *value, &interp, ctx)?;
                if let Some(cat_id) = cat_id {
                    let before = cat.get(corner);
                    if before != Some(*value) {
                        effects.push(SideEffect::Corner {
                            categorical: cat_id.clone(),
                            corner: corner.clone(),
                            before,
                            after: Some(*value),
                        });
                    }
                    self.library.categorical.insert(cat_id, cat_after);
                }
                (t, e)
            }
            Action::SwapInterpolator { to } => {
                let interp = self.interpolator(to)?;
                let (_, cat) = self.source_categorical(&table)?;
                let (t, e, w) = revision::swap_interpolator_with(&table, &cat, &interp, ctx)?;
                warning = Some(w);
                let after = Binding {
                    interpolator: Some(to.clone()),
                    ..binding.clone()
                };
                if after != binding {
                    effects.push(SideEffect::Binding {
                        before: binding.clone(),
                        after,
                    });
                }
                (t, e)
            }
            Action::Derive {
                interpolator,
                categorical,
            } => {
                let interp = self.interpolator(interpolator)?;
                let cat_id = categorical.clone().or(binding.categorical.clone());
                let cat = match &cat_id {
                    Some(id) => self.library.categorical(id)?.clone(),
                    None => table.corner_view(),
                };
                let r = revision::derive(&table, &cat, categorical.as_deref(), &interp, ctx)?;
                let after = Binding {
                    categorical: cat_id,
                    interpolator: Some(interpolator.clone()),
                };
                if after != binding {
                    effects.push(SideEffect::Binding {
                        before: binding.clone(),
                        after,
                    });
                }
                r
            }
            Action::ClearOverride { index } => {
                let interp_id = binding.interpolator.clone().ok_or_else(|| Error::NotFound {
                    kind: "interpolator binding",
                    id: table_id.to_string(),
                })?;
                let interp = self.interpolator(&interp_id)?;
                let (_, cat) = self.source_categorical(&table)?;
                revision::clear_override(&table, index, &cat, &interp, ctx)?
            }
            Action::RevertOf { entry } => {
                let (t, e) = self.revert_entry(&table, *entry, ctx)?;
                effects = e.effects.clone();
                for effect in &effects {
                    self.apply_effect(table_id, effect)?;
                }
                (t, e)
            }
        };
        if !matches!(action, Action::RevertOf { .. }) {
            for effect in &effects {
                if let SideEffect::Binding { .. } = effect {
                    self.apply_effect(table_id, effect)?;
                }
            }
        }
        entry.effects = effects;
        self.library.tables.insert(table_id.to_string(), next);
        Ok(Applied { entry, warning })
    }

    fn revert_entry(&self, table: &CombiningTable, id: u64, ctx: &EntryContext) -> Result<(CombiningTable, JournalEntry)> {
        let target = self.entry(id)?;
        if target.table != table.id() {
            return Err(Error::NotFound {
                kind: "journal entry",
                id: format!("{id} on table '{}'", table.id()),
            });
        }
        let later: Vec<u64> = self
            .journal
            .iter()
            .filter(|e| e.id > id && e.touches(target))
            .map(|e| e.id)
            .collect();
        if !later.is_empty() {
            return Err(Error::NotRevertible { entry: id, later });
        }
        let changes = revision::invert_changes(&target.changes);
        let next = revision::apply_changes(table, &changes)?;
        let mut entry = ctx.entry(table.id(), Action::RevertOf { entry: id }, changes);
        entry.effects = target.effects.iter().rev().map(SideEffect::inverse).collect();
        Ok((next, entry))
    }

    fn apply_effect(&mut self, table: &str, effect: &SideEffect) -> Result<()> {
        match effect {
            SideEffect::Corner {
                categorical, corner, after, ..
            } => {
                let cat = self.library.categorical.get_mut(categorical).ok_or_else(|| Error::NotFound {
                    kind: "categorical table",
                    id: categorical.clone(),
                })?;
                cat.set(corner, *after)?;
            }
            SideEffect::Binding { after, .. } => {
                if *after == Binding::default() {
                    self.bindings.remove(table);
                } else {
                    self.bindings.insert(table.to_string(), after.clone());
                }
            }
        }
        Ok(())
    }

    /// Undoes one entry's recorded changes without journaling anything.
    fn undo(&mut self, entry: &JournalEntry) -> Result<()> {
        let table = self.table(&entry.table)?;
        let restored = revision::apply_changes(table, &revision::invert_changes(&entry.changes))?;
        self.library.tables.insert(entry.table.clone(), restored);
        for effect in entry.effects.iter().rev() {
            self.apply_effect(&entry.table, &effect.inverse())?;
        }
        Ok(())
    }

    /// The document as it was after entry `id` (0 for the initial state).
    pub fn at(&self, id: u64) -> Result<Document> {
        if id != 0 {
            self.entry(id)?;
        }
        let mut doc = self.clone();
        while doc.journal.last().is_some_and(|e| e.id > id) {
            let entry = doc.journal.pop().unwrap();
            doc.undo(&entry)?;
        }
        Ok(doc)
    }

    /// The document before any journaled change.
    pub fn initial(&self) -> Result<Document> {
        self.at(0)
    }

    /// Rebuilds the document by re-executing every journaled action from
    /// the initial state, checking each re-run reproduces its entry.
    pub fn replay(&self) -> Result<Document> {
        let mut doc = self.initial()?;
        for (i, recorded) in self.journal.iter().enumerate() {
            let applied = doc.run(&recorded.table, recorded.action.clone(), &EntryContext::of(recorded))?;
            if applied.entry != *recorded {
                return Err(schema(format!("journal[{i}]"), "replay produced a different entry"));
            }
            doc.journal.push(applied.entry);
        }
        Ok(doc)
    }

    // ---- fixtures ----

    /// The angina knowledge base with an empty table bound to its corners.
    pub fn angina_example() -> Document {
        let mut doc = Document::default();
        let table = fixtures::empty_angina_table();
        doc.library.tables.insert(table.id().to_string(), table);
        doc.library
            .categorical
            .insert(fixtures::ANGINA_CATEGORICAL.into(), fixtures::angina_categorical());
        doc.library
            .interpolators
            .insert(fixtures::BAYES.into(), Interpolator::bayes(fixtures::BAYES));
        doc.bindings.insert(
            fixtures::ANGINA_TABLE.into(),
            Binding {
                categorical: Some(fixtures::ANGINA_CATEGORICAL.into()),
                interpolator: Some(fixtures::BAYES.into()),
            },
        );
        doc.network = fixtures::angina_network();
        doc
    }

    /// Everything the fixtures provide: angina, the bipolar table with its
    /// rule text, and the plant-disease rule.
    pub fn full_example() -> Document {
        let mut doc = Document::angina_example();
        let quad = fixtures::quadrant_table();
        doc.library.tables.insert(quad.id().to_string(), quad.clone());
        doc.rule_files.insert(
            "quadrant-rules".into(),
            RuleFile {
                table: quad.id().to_string(),
                text: fixtures::QUADRANT_RULES.to_string(),
            },
        );
        let plant = fixtures::plant_table();
        doc.library.tables.insert(plant.id().to_string(), plant);
        let plant_net = fixtures::plant_network();
        doc.network.propositions.extend(plant_net.propositions);
        doc.network.rules.extend(plant_net.rules);
        doc
    }
}
