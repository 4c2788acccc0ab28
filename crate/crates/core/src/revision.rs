//! Journaled modifications of a combining table: cell and block overrides,
//! corner edits that re-derive the table, and interpolator swaps.
//!
//! Each operation returns the new table together with a [`JournalEntry`]
//! whose cell diffs are enough to undo it.

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::belief::BeliefValue;
use crate::error::{Error, Result};
use crate::interpolate::{derive_cells, DeriveScope, Interpolator};
use crate::rules::{self, ChangeSummary};
use crate::tables::{CategoricalTable, CellDiff, CellState, CombiningTable, Corner, GridIndex, Region};

/// What the expert asked for. Enough to re-execute the step on replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    OverrideCell {
        index: GridIndex,
        value: f64,
        #[serde(default, skip_serializing_if = "String::is_empty")]
        note: String,
    },
    OverrideBlock {
        region: Region,
        value: f64,
        #[serde(default, skip_serializing_if = "String::is_empty")]
        note: String,
    },
    EditCorner {
        corner: Corner,
        value: f64,
        interpolator: String,
    },
    SwapInterpolator {
        to: String,
    },
    MarkMeaningless {
        region: Region,
    },
    SetSpecified {
        index: GridIndex,
        value: f64,
        #[serde(default, skip_serializing_if = "String::is_empty")]
        note: String,
    },
    Derive {
        interpolator: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        categorical: Option<String>,
    },
    ApplyRules {
        text: String,
    },
    /// Returns an overridden cell to its interpolated value.
    ClearOverride {
        index: GridIndex,
    },
    RevertOf {
        entry: u64,
    },
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::OverrideCell { .. } => "override_cell",
            Action::OverrideBlock { .. } => "override_block",
            Action::EditCorner { .. } => "edit_corner",
            Action::SwapInterpolator { .. } => "swap_interpolator",
            Action::MarkMeaningless { .. } => "mark_meaningless",
            Action::SetSpecified { .. } => "set_specified",
            Action::Derive { .. } => "derive",
            Action::ApplyRules { .. } => "apply_rules",
            Action::ClearOverride { .. } => "clear_override",
            Action::RevertOf { .. } => "revert_of",
        }
    }
}

/// Which categorical table and interpolator a table is derived from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categorical: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpolator: Option<String>,
}

/// A change outside the table's cells that an entry also made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SideEffect {
    Corner {
        categorical: String,
        corner: Corner,
        before: Option<f64>,
        after: Option<f64>,
    },
    Binding {
        before: Binding,
        after: Binding,
    },
}

impl SideEffect {
    pub fn inverse(&self) -> SideEffect {
        match self.clone() {
            SideEffect::Corner {
                categorical,
                corner,
                before,
                after,
            } => SideEffect::Corner {
                categorical,
                corner,
                before: after,
                after: before,
            },
            SideEffect::Binding { before, after } => SideEffect::Binding {
                before: after,
                after: before,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub id: u64,
    pub timestamp: String,
    pub author: String,
    pub table: String,
    pub action: Action,
    /// Row-major cell changes; `before` states undo the entry.
    pub changes: Vec<CellDiff>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub effects: Vec<SideEffect>,
}

impl JournalEntry {
    /// Cells whose value (not just provenance) changed.
    pub fn value_changes(&self) -> usize {
        self.changes
            .iter()
            .filter(|d| d.before.value() != d.after.value())
            .count()
    }

    pub fn touches(&self, other: &JournalEntry) -> bool {
        let cells = self.table == other.table
            && self
                .changes
                .iter()
                .any(|a| other.changes.iter().any(|b| a.index == b.index));
        let effects = self.effects.iter().any(|a| {
            other.effects.iter().any(|b| match (a, b) {
                (
                    SideEffect::Corner {
                        categorical: c1,
                        corner: k1,
                        ..
                    },
                    SideEffect::Corner {
                        categorical: c2,
                        corner: k2,
                        ..
                    },
                ) => c1 == c2 && k1 == k2,
                (SideEffect::Binding { .. }, SideEffect::Binding { .. }) => self.table == other.table,
                _ => false,
            })
        });
        cells || effects
    }
}

/// Identity and time stamp for the entry an operation will produce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryContext {
    pub id: u64,
    pub timestamp: String,
    pub author: String,
}

impl EntryContext {
    pub fn new(id: u64, author: impl Into<String>) -> Self {
        EntryContext {
            id,
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
            author: author.into(),
        }
    }

    pub fn of(entry: &JournalEntry) -> Self {
        EntryContext {
            id: entry.id,
            timestamp: entry.timestamp.clone(),
            author: entry.author.clone(),
        }
    }

    pub fn entry(&self, table: &str, action: Action, changes: Vec<CellDiff>) -> JournalEntry {
        JournalEntry {
            id: self.id,
            timestamp: self.timestamp.clone(),
            author: self.author.clone(),
            table: table.to_string(),
            action,
            changes,
            effects: Vec::new(),
        }
    }
}

/// Global-effect notice from an interpolator swap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapWarning {
    /// Derived cells whose value changed.
    pub changed: usize,
    pub message: String,
}

/// Cells whose state differs, in row-major order.
pub fn diff(a: &CombiningTable, b: &CombiningTable) -> Result<Vec<CellDiff>> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch);
    }
    Ok(a.indices()
        .zip(a.cells().iter().zip(b.cells()))
        .filter(|(_, (x, y))| x != y)
        .map(|(index, (x, y))| CellDiff {
            index,
            before: x.clone(),
            after: y.clone(),
        })
        .collect())
}

/// Applies diffs forward (`after` states) to a table.
pub fn apply_changes(table: &CombiningTable, changes: &[CellDiff]) -> Result<CombiningTable> {
    let mut next = table.clone();
    for d in changes {
        next.put(&d.index, d.after.clone())?;
    }
    Ok(next)
}

/// The diffs that undo `changes`.
pub fn invert_changes(changes: &[CellDiff]) -> Vec<CellDiff> {
    changes
        .iter()
        .map(|d| CellDiff {
            index: d.index.clone(),
            before: d.after.clone(),
            after: d.before.clone(),
        })
        .collect()
}

fn finish(table: &CombiningTable, next: CombiningTable, action: Action, ctx: &EntryContext) -> Result<(CombiningTable, JournalEntry)> {
    let changes = diff(table, &next)?;
    Ok((next, ctx.entry(table.id(), action, changes)))
}

pub fn override_cell(
    table: &CombiningTable,
    index: &[usize],
    value: f64,
    note: &str,
    ctx: &EntryContext,
) -> Result<(CombiningTable, JournalEntry)> {
    let mut next = table.clone();
    next.put(index, CellState::Overridden { value, entry: ctx.id })?;
    let action = Action::OverrideCell {
        index: index.to_vec(),
        value,
        note: note.to_string(),
    };
    finish(table, next, action, ctx)
}

/// Overrides every cell of a region in one journal entry.
pub fn override_block(
    table: &CombiningTable,
    region: &Region,
    value: f64,
    note: &str,
    ctx: &EntryContext,
) -> Result<(CombiningTable, JournalEntry)> {
    region.validate(table.axes())?;
    table.conclusion_scale().check(value)?;
    let targets: Vec<GridIndex> = table.region_cells(region).into_iter().map(|(i, _)| i).collect();
    let mut next = table.clone();
    for index in targets {
        next.put(&index, CellState::Overridden { value, entry: ctx.id })?;
    }
    let action = Action::OverrideBlock {
        region: region.clone(),
        value,
        note: note.to_string(),
    };
    finish(table, next, action, ctx)
}

pub fn set_specified(
    table: &CombiningTable,
    index: &[usize],
    value: f64,
    note: &str,
    ctx: &EntryContext,
) -> Result<(CombiningTable, JournalEntry)> {
    let next = table.set_specified(index, value, note)?;
    let action = Action::SetSpecified {
        index: index.to_vec(),
        value,
        note: note.to_string(),
    };
    finish(table, next, action, ctx)
}

pub fn mark_meaningless(table: &CombiningTable, region: &Region, ctx: &EntryContext) -> Result<(CombiningTable, JournalEntry)> {
    let next = table.mark_meaningless(region)?;
    finish(table, next, Action::MarkMeaningless { region: region.clone() }, ctx)
}

/// Fills unspecified cells from a categorical table.
pub fn derive(
    table: &CombiningTable,
    cat: &CategoricalTable,
    cat_id: Option<&str>,
    interp: &Interpolator,
    ctx: &EntryContext,
) -> Result<(CombiningTable, JournalEntry)> {
    let (next, _) = derive_cells(table, cat, interp, DeriveScope::Fill)?;
    let action = Action::Derive {
        interpolator: interp.id.clone(),
        categorical: cat_id.map(str::to_string),
    };
    finish(table, next, action, ctx)
}

/// Sets one corner to an expert value and re-derives every derived cell,
/// taking the other corners from the table itself.
pub fn edit_corner(
    table: &CombiningTable,
    corner: &Corner,
    value: f64,
    interp: &Interpolator,
    ctx: &EntryContext,
) -> Result<(CombiningTable, JournalEntry)> {
    edit_corner_with(table, &table.corner_view(), corner, value, interp, ctx).map(|(t, _, e)| (t, e))
}

/// Like [`edit_corner`] with an explicit categorical table, which is
/// returned updated.
pub fn edit_corner_with(
    table: &CombiningTable,
    cat: &CategoricalTable,
    corner: &Corner,
    value: f64,
    interp: &Interpolator,
    ctx: &EntryContext,
) -> Result<(CombiningTable, CategoricalTable, JournalEntry)> {
    let index = table.corner_index(corner)?;
    let note = match table.cell(&index)? {
        CellState::Specified { note, .. } => note.clone(),
        CellState::Derived { .. } => String::new(),
        other => {
            return Err(Error::CornerUndefined(format!(
                "corner {corner} holds a {:?} cell",
                other.provenance()
            )))
        }
    };
    table.conclusion_scale().check(value)?;
    let mut next = table.clone();
    next.put(&index, CellState::Specified { value, note })?;
    let mut cat = cat.clone();
    cat.set(corner, Some(value))?;
    let (next, _) = derive_cells(&next, &cat, interp, DeriveScope::Refresh)?;
    let action = Action::EditCorner {
        corner: corner.clone(),
        value,
        interpolator: interp.id.clone(),
    };
    let (next, entry) = finish(table, next, action, ctx)?;
    Ok((next, cat, entry))
}

pub fn swap_interpolator(
    table: &CombiningTable,
    interp: &Interpolator,
    ctx: &EntryContext,
) -> Result<(CombiningTable, JournalEntry, SwapWarning)> {
    swap_interpolator_with(table, &table.corner_view(), interp, ctx)
}

/// Recomputes every derived cell with a different interpolator.
pub fn swap_interpolator_with(
    table: &CombiningTable,
    cat: &CategoricalTable,
    interp: &Interpolator,
    ctx: &EntryContext,
) -> Result<(CombiningTable, JournalEntry, SwapWarning)> {
    let (next, _) = derive_cells(table, cat, interp, DeriveScope::Refresh)?;
    let (next, entry) = finish(table, next, Action::SwapInterpolator { to: interp.id.clone() }, ctx)?;
    let changed = entry.value_changes();
    let warning = SwapWarning {
        changed,
        message: format!(
            "swapping to '{}' changed {changed} derived cell(s) of table '{}'",
            interp.id,
            table.id()
        ),
    };
    Ok((next, entry, warning))
}

/// Returns an overridden cell to its interpolated value.
pub fn clear_override(
    table: &CombiningTable,
    index: &[usize],
    cat: &CategoricalTable,
    interp: &Interpolator,
    ctx: &EntryContext,
) -> Result<(CombiningTable, JournalEntry)> {
    if !matches!(table.cell(index)?, CellState::Overridden { .. }) {
        return Err(Error::NotFound {
            kind: "override",
            id: format!("{index:?}"),
        });
    }
    let point = table
        .coordinates(index)
        .into_iter()
        .map(BeliefValue::probability)
        .collect::<Result<Vec<_>>>()?;
    let value = interp.evaluate(cat, &point)?.value;
    let mut next = table.clone();
    next.put(
        index,
        CellState::Derived {
            value,
            interpolator: interp.id.clone(),
        },
    )?;
    finish(table, next, Action::ClearOverride { index: index.to_vec() }, ctx)
}

/// Compiles rule text against the table and writes the matched cells.
pub fn apply_rules(
    table: &CombiningTable,
    text: &str,
    ctx: &EntryContext,
) -> Result<(CombiningTable, JournalEntry, ChangeSummary)> {
    let set = rules::parse_rules(text)?;
    let compiled = rules::compile(&set, table.axes(), table.conclusion_scale())?;
    let conflicts = rules::detect_conflicts(&compiled, table.axes());
    if !conflicts.is_empty() {
        return Err(Error::ConflictsPresent(conflicts));
    }
    let (next, summary) = rules::apply(table, &compiled)?;
    let (next, entry) = finish(table, next, Action::ApplyRules { text: text.to_string() }, ctx)?;
    Ok((next, entry, summary))
}
