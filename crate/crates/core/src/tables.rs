//! Dense N-dimensional combining tables.
//!
//! Cells are stored row-major with the first axis varying slowest. Every cell
//! carries its provenance so that expert-entered values, interpolated values,
//! and later corrections can be told apart (and so that a blank is never
//! confused with a zero).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::belief::{Axis, BeliefScale, BeliefValue, LocateMode, Location, LEVEL_EPSILON};
use crate::error::{Error, Result};

/// Per-axis level indices of one cell.
pub type GridIndex = Vec<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "U")]
    Unspecified,
    #[serde(rename = "M")]
    IntendedBlank,
    #[serde(rename = "S")]
    Specified,
    #[serde(rename = "D")]
    Derived,
    #[serde(rename = "O")]
    Overridden,
}

impl Provenance {
    pub const ALL: [Provenance; 5] = [
        Provenance::Unspecified,
        Provenance::IntendedBlank,
        Provenance::Specified,
        Provenance::Derived,
        Provenance::Overridden,
    ];

    pub fn code(self) -> char {
        match self {
            Provenance::Unspecified => 'U',
            Provenance::IntendedBlank => 'M',
            Provenance::Specified => 'S',
            Provenance::Derived => 'D',
            Provenance::Overridden => 'O',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "code")]
pub enum CellState {
    #[serde(rename = "U")]
    Unspecified,
    /// Deliberately left blank: the combination is judged meaningless.
    #[serde(rename = "M")]
    IntendedBlank,
    #[serde(rename = "S")]
    Specified {
        value: f64,
        #[serde(default, skip_serializing_if = "String::is_empty")]
        note: String,
    },
    #[serde(rename = "D")]
    Derived { value: f64, interpolator: String },
    #[serde(rename = "O")]
    Overridden { value: f64, entry: u64 },
}

impl CellState {
    pub fn provenance(&self) -> Provenance {
        match self {
            CellState::Unspecified => Provenance::Unspecified,
            CellState::IntendedBlank => Provenance::IntendedBlank,
            CellState::Specified { .. } => Provenance::Specified,
            CellState::Derived { .. } => Provenance::Derived,
            CellState::Overridden { .. } => Provenance::Overridden,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            CellState::Specified { value, .. }
            | CellState::Derived { value, .. }
            | CellState::Overridden { value, .. } => Some(*value),
            CellState::Unspecified | CellState::IntendedBlank => None,
        }
    }

    pub fn is_blank(&self) -> bool {
        self.value().is_none()
    }

    /// Cells holding expert judgment: never erased or recomputed implicitly.
    pub fn is_expert(&self) -> bool {
        matches!(self, CellState::Specified { .. } | CellState::Overridden { .. })
    }

    fn blank_reason(&self) -> Option<BlankReason> {
        match self {
            CellState::Unspecified => Some(BlankReason::Unspecified),
            CellState::IntendedBlank => Some(BlankReason::IntendedBlank),
            _ => None,
        }
    }
}

/// One cell whose state differs between two versions of a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDiff {
    pub index: GridIndex,
    pub before: CellState,
    pub after: CellState,
}

/// A corner of the grid: `true` selects an axis maximum, `false` its minimum.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Corner(Vec<bool>);

impl Corner {
    pub fn new(bits: Vec<bool>) -> Self {
        Corner(bits)
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    /// Keys enumerate all-true first, axis 0 most significant:
    /// TT, TF, FT, FF for two axes.
    pub fn key(&self) -> usize {
        self.0
            .iter()
            .fold(0, |acc, &bit| (acc << 1) | usize::from(!bit))
    }

    pub fn from_key(key: usize, arity: usize) -> Self {
        Corner(
            (0..arity)
                .map(|i| (key >> (arity - 1 - i)) & 1 == 0)
                .collect(),
        )
    }

    pub fn all(arity: usize) -> impl Iterator<Item = Corner> {
        (0..1usize << arity).map(move |k| Corner::from_key(k, arity))
    }
}

impl fmt::Display for Corner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &bit in &self.0 {
            f.write_str(if bit { "T" } else { "F" })?;
        }
        Ok(())
    }
}

impl FromStr for Corner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c.to_ascii_uppercase() {
                'T' | '1' => Ok(true),
                'F' | '0' => Ok(false),
                _ => Err(Error::CornerUndefined(format!("bad corner '{s}'"))),
            })
            .collect::<Result<Vec<_>>>()
            .and_then(|bits| {
                if bits.is_empty() {
                    Err(Error::CornerUndefined("empty corner".into()))
                } else {
                    Ok(Corner(bits))
                }
            })
    }
}

impl Serialize for Corner {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Corner {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Conclusion beliefs given categorical evidence: one entry per corner.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalTable {
    arity: usize,
    values: Vec<Option<f64>>,
}

impl CategoricalTable {
    pub fn empty(arity: usize) -> Self {
        CategoricalTable {
            arity,
            values: vec![None; 1 << arity],
        }
    }

    /// Values in corner-key order (all-true first).
    pub fn from_values(arity: usize, values: Vec<Option<f64>>) -> Result<Self> {
        if values.len() != 1 << arity {
            return Err(Error::ArityMismatch {
                expected: 1 << arity,
                found: values.len(),
            });
        }
        Ok(CategoricalTable { arity, values })
    }

    /// Convenience for a fully specified table, values in corner-key order.
    pub fn complete(arity: usize, values: &[f64]) -> Result<Self> {
        Self::from_values(arity, values.iter().copied().map(Some).collect())
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn get(&self, corner: &Corner) -> Option<f64> {
        self.check_arity(corner).ok()?;
        self.values[corner.key()]
    }

    pub fn set(&mut self, corner: &Corner, value: Option<f64>) -> Result<()> {
        self.check_arity(corner)?;
        self.values[corner.key()] = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (Corner, Option<f64>)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(k, v)| (Corner::from_key(k, self.arity), *v))
    }

    pub fn missing(&self) -> Vec<Corner> {
        self.iter()
            .filter(|(_, v)| v.is_none())
            .map(|(c, _)| c)
            .collect()
    }

    /// All corner values in key order, or the list of missing corners.
    pub fn values(&self) -> Result<Vec<f64>> {
        let missing = self.missing();
        if !missing.is_empty() {
            return Err(Error::MissingCorners(missing));
        }
        Ok(self.values.iter().map(|v| v.unwrap()).collect())
    }

    fn check_arity(&self, corner: &Corner) -> Result<()> {
        if corner.arity() == self.arity {
            Ok(())
        } else {
            Err(Error::ArityMismatch {
                expected: self.arity,
                found: corner.arity(),
            })
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawCategorical {
    arity: usize,
    corners: serde_json::Map<String, serde_json::Value>,
}

impl Serialize for CategoricalTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let corners = self
            .iter()
            .map(|(c, v)| (c.to_string(), v.map_or(serde_json::Value::Null, serde_json::Value::from)))
            .collect();
        RawCategorical {
            arity: self.arity,
            corners,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CategoricalTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawCategorical::deserialize(d)?;
        if raw.arity == 0 || raw.arity > 16 {
            return Err(D::Error::custom(format!("unsupported arity {}", raw.arity)));
        }
        let mut table = CategoricalTable::empty(raw.arity);
        for (key, value) in raw.corners {
            let corner: Corner = key.parse().map_err(D::Error::custom)?;
            let value = match value {
                serde_json::Value::Null => None,
                serde_json::Value::Number(n) => n.as_f64(),
                other => return Err(D::Error::custom(format!("corner {key}: expected number, got {other}"))),
            };
            table.set(&corner, value).map_err(D::Error::custom)?;
        }
        Ok(table)
    }
}

/// Which levels of one axis a region selects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelPredicate {
    Any,
    Eq(f64),
    Le(f64),
    Ge(f64),
    In(Vec<f64>),
}

impl LevelPredicate {
    fn referenced(&self) -> Vec<f64> {
        match self {
            LevelPredicate::Any => Vec::new(),
            LevelPredicate::Eq(v) | LevelPredicate::Le(v) | LevelPredicate::Ge(v) => vec![*v],
            LevelPredicate::In(vs) => vs.clone(),
        }
    }

    fn selects(&self, axis: &Axis, level: f64) -> bool {
        let same = |v: f64| (v - level).abs() <= LEVEL_EPSILON;
        match self {
            LevelPredicate::Any => true,
            LevelPredicate::Eq(v) => same(*v),
            LevelPredicate::Le(v) => level <= *v || same(*v),
            LevelPredicate::Ge(v) => level >= *v || same(*v),
            LevelPredicate::In(vs) => vs.iter().any(|v| same(*v)) && axis.position(level).is_some(),
        }
    }

    /// Selection mask over the axis levels.
    pub fn mask(&self, axis: &Axis) -> Vec<bool> {
        axis.levels().iter().map(|&l| self.selects(axis, l)).collect()
    }
}

impl fmt::Display for LevelPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelPredicate::Any => f.write_str("*"),
            LevelPredicate::Eq(v) => write!(f, "={v}"),
            LevelPredicate::Le(v) => write!(f, "<={v}"),
            LevelPredicate::Ge(v) => write!(f, ">={v}"),
            LevelPredicate::In(vs) => {
                let parts: Vec<_> = vs.iter().map(f64::to_string).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

/// A rectangular block of cells: one level predicate per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Region {
    predicates: Vec<LevelPredicate>,
}

impl Region {
    /// Builds a region, checking that every referenced level exists.
    pub fn new(axes: &[Axis], predicates: Vec<LevelPredicate>) -> Result<Self> {
        let region = Region { predicates };
        region.validate(axes)?;
        Ok(region)
    }

    pub fn any(axes: &[Axis]) -> Self {
        Region {
            predicates: vec![LevelPredicate::Any; axes.len()],
        }
    }

    pub fn predicates(&self) -> &[LevelPredicate] {
        &self.predicates
    }

    pub fn validate(&self, axes: &[Axis]) -> Result<()> {
        if self.predicates.len() != axes.len() {
            return Err(Error::InvalidRegion(format!(
                "{} predicates for {} axes",
                self.predicates.len(),
                axes.len()
            )));
        }
        for (pred, axis) in self.predicates.iter().zip(axes) {
            if let Some(bad) = pred.referenced().into_iter().find(|v| axis.position(*v).is_none()) {
                return Err(Error::InvalidRegion(format!(
                    "{bad} is not a level of axis '{}'",
                    axis.proposition()
                )));
            }
        }
        Ok(())
    }

    /// Parses the textual form `pred;pred;...`, one predicate per axis, where
    /// a predicate is `*`, `=v`, `<=v`, `>=v`, or a comma-separated level list.
    pub fn parse_spec(axes: &[Axis], spec: &str) -> Result<Self> {
        let bad = |part: &str| Error::InvalidRegion(format!("cannot read predicate '{part}'"));
        let num = |s: &str, part: &str| s.trim().parse::<f64>().map_err(|_| bad(part));
        let predicates = spec
            .split(';')
            .map(|part| {
                let p = part.trim();
                if p == "*" {
                    Ok(LevelPredicate::Any)
                } else if let Some(v) = p.strip_prefix("<=") {
                    num(v, p).map(LevelPredicate::Le)
                } else if let Some(v) = p.strip_prefix(">=") {
                    num(v, p).map(LevelPredicate::Ge)
                } else if let Some(v) = p.strip_prefix('=') {
                    num(v, p).map(LevelPredicate::Eq)
                } else if p.is_empty() {
                    Err(bad(p))
                } else {
                    p.split(',')
                        .map(|v| num(v, p))
                        .collect::<Result<Vec<_>>>()
                        .map(LevelPredicate::In)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Region::new(axes, predicates)
    }

    pub fn masks(&self, axes: &[Axis]) -> Vec<Vec<bool>> {
        self.predicates
            .iter()
            .zip(axes)
            .map(|(p, a)| p.mask(a))
            .collect()
    }

    pub fn contains(&self, axes: &[Axis], index: &[usize]) -> bool {
        self.predicates
            .iter()
            .zip(axes)
            .zip(index)
            .all(|((p, a), &i)| a.level(i).is_some_and(|l| p.selects(a, l)))
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<_> = self.predicates.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(";"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LookupMode {
    Exact,
    Snap,
    Continuous,
}

impl FromStr for LookupMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(LookupMode::Exact),
            "snap" => Ok(LookupMode::Snap),
            "continuous" => Ok(LookupMode::Continuous),
            other => Err(format!("unknown lookup mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlankReason {
    Unspecified,
    IntendedBlank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendTerm {
    pub index: GridIndex,
    pub weight: f64,
    pub value: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueSource {
    Cell { index: GridIndex, provenance: Provenance },
    Blend { terms: Vec<BlendTerm> },
}

impl ValueSource {
    /// Recomputes a blend from its recorded terms in recording order.
    pub fn blend_value(terms: &[BlendTerm]) -> f64 {
        terms.iter().fold(0.0, |acc, t| acc + t.weight * t.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum LookupResult {
    Value { value: f64, source: ValueSource },
    Blank { index: GridIndex, reason: BlankReason },
}

impl LookupResult {
    pub fn value(&self) -> Option<f64> {
        match self {
            LookupResult::Value { value, .. } => Some(*value),
            LookupResult::Blank { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombiningTable {
    id: String,
    axes: Vec<Axis>,
    conclusion: String,
    conclusion_scale: BeliefScale,
    cells: Vec<CellState>,
}

impl CombiningTable {
    pub fn new(
        id: impl Into<String>,
        axes: Vec<Axis>,
        conclusion: impl Into<String>,
        conclusion_scale: BeliefScale,
    ) -> Result<Self> {
        let count = Self::check_axes(&axes)?;
        Ok(CombiningTable {
            id: id.into(),
            axes,
            conclusion: conclusion.into(),
            conclusion_scale,
            cells: vec![CellState::Unspecified; count],
        })
    }

    /// Rebuilds a table from stored cells, validating shape and values.
    pub fn from_cells(
        id: impl Into<String>,
        axes: Vec<Axis>,
        conclusion: impl Into<String>,
        conclusion_scale: BeliefScale,
        cells: Vec<CellState>,
    ) -> Result<Self> {
        let count = Self::check_axes(&axes)?;
        if cells.len() != count {
            return Err(Error::ArityMismatch {
                expected: count,
                found: cells.len(),
            });
        }
        for v in cells.iter().filter_map(CellState::value) {
            conclusion_scale.check(v)?;
        }
        Ok(CombiningTable {
            id: id.into(),
            axes,
            conclusion: conclusion.into(),
            conclusion_scale,
            cells,
        })
    }

    fn check_axes(axes: &[Axis]) -> Result<usize> {
        if axes.is_empty() {
            return Err(Error::InvalidAxis {
                axis: String::new(),
                reason: "a table needs at least one axis".into(),
            });
        }
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].iter().any(|b| b.proposition() == a.proposition()) {
                return Err(Error::DuplicateAxis(a.proposition().to_string()));
            }
        }
        Ok(axes.iter().map(Axis::len).product())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn arity(&self) -> usize {
        self.axes.len()
    }

    pub fn conclusion(&self) -> &str {
        &self.conclusion
    }

    pub fn conclusion_scale(&self) -> BeliefScale {
        self.conclusion_scale
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Axis::len).collect()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn same_shape(&self, other: &CombiningTable) -> bool {
        self.axes == other.axes && self.conclusion_scale == other.conclusion_scale
    }

    pub fn offset(&self, index: &[usize]) -> Result<usize> {
        let oob = || Error::IndexOutOfBounds {
            index: index.to_vec(),
            shape: self.shape(),
        };
        if index.len() != self.axes.len() {
            return Err(oob());
        }
        index.iter().zip(&self.axes).try_fold(0, |acc, (&i, axis)| {
            if i < axis.len() {
                Ok(acc * axis.len() + i)
            } else {
                Err(oob())
            }
        })
    }

    pub fn index_at(&self, mut offset: usize) -> GridIndex {
        let mut index = vec![0; self.axes.len()];
        for (slot, axis) in index.iter_mut().zip(&self.axes).rev() {
            *slot = offset % axis.len();
            offset /= axis.len();
        }
        index
    }

    /// Row-major iteration over all indices.
    pub fn indices(&self) -> impl Iterator<Item = GridIndex> + '_ {
        (0..self.cells.len()).map(|o| self.index_at(o))
    }

    pub fn cell(&self, index: &[usize]) -> Result<&CellState> {
        self.offset(index).map(|o| &self.cells[o])
    }

    /// Grid levels of a cell, one per axis.
    pub fn coordinates(&self, index: &[usize]) -> Vec<f64> {
        index
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.levels()[i])
            .collect()
    }

    /// Replaces one cell, returning the previous state.
    pub(crate) fn put(&mut self, index: &[usize], state: CellState) -> Result<CellState> {
        if let Some(v) = state.value() {
            self.conclusion_scale.check(v)?;
        }
        let o = self.offset(index)?;
        Ok(std::mem::replace(&mut self.cells[o], state))
    }

    pub fn with_cell(&self, index: &[usize], state: CellState) -> Result<Self> {
        let mut next = self.clone();
        next.put(index, state)?;
        Ok(next)
    }

    pub fn set_specified(&self, index: &[usize], value: f64, note: impl Into<String>) -> Result<Self> {
        self.with_cell(
            index,
            CellState::Specified {
                value,
                note: note.into(),
            },
        )
    }

    pub fn region_cells(&self, region: &Region) -> Vec<(GridIndex, &CellState)> {
        self.indices()
            .zip(&self.cells)
            .filter(|(idx, _)| region.contains(&self.axes, idx))
            .collect()
    }

    /// Marks every non-expert cell in the region as intentionally blank.
    pub fn mark_meaningless(&self, region: &Region) -> Result<Self> {
        region.validate(&self.axes)?;
        let hits = self.region_cells(region);
        let expert: Vec<GridIndex> = hits
            .iter()
            .filter(|(_, c)| c.is_expert())
            .map(|(i, _)| i.clone())
            .collect();
        if !expert.is_empty() {
            return Err(Error::WouldEraseExpertCells(expert));
        }
        let targets: Vec<GridIndex> = hits.into_iter().map(|(i, _)| i).collect();
        let mut next = self.clone();
        for idx in targets {
            next.put(&idx, CellState::IntendedBlank)?;
        }
        Ok(next)
    }

    fn check_point(&self, point: &[BeliefValue]) -> Result<()> {
        if point.len() != self.axes.len() {
            return Err(Error::ArityMismatch {
                expected: self.axes.len(),
                found: point.len(),
            });
        }
        Ok(())
    }

    fn result_at(&self, index: GridIndex) -> LookupResult {
        let cell = &self.cells[self.offset(&index).expect("located index is in range")];
        match cell.value() {
            Some(value) => LookupResult::Value {
                value,
                source: ValueSource::Cell {
                    provenance: cell.provenance(),
                    index,
                },
            },
            None => LookupResult::Blank {
                index,
                reason: cell.blank_reason().unwrap(),
            },
        }
    }

    pub fn lookup(&self, point: &[BeliefValue], mode: LookupMode) -> Result<LookupResult> {
        self.check_point(point)?;
        let locate = match mode {
            LookupMode::Exact => LocateMode::Exact,
            LookupMode::Snap => LocateMode::Snap,
            LookupMode::Continuous => LocateMode::Bracket,
        };
        let locations = point
            .iter()
            .zip(&self.axes)
            .map(|(b, axis)| axis.locate(*b, locate))
            .collect::<Result<Vec<_>>>()?;

        // Each axis contributes (index, weight) choices; exact hits have one.
        let choices: Vec<Vec<(usize, f64)>> = locations
            .iter()
            .zip(point)
            .zip(&self.axes)
            .map(|((loc, b), axis)| match *loc {
                Location::At(i) => vec![(i, 1.0)],
                Location::Between { upper, lower } => {
                    let (hi, lo) = (axis.levels()[upper], axis.levels()[lower]);
                    let t = (b.value() - lo) / (hi - lo);
                    vec![(upper, t), (lower, 1.0 - t)]
                }
            })
            .collect();

        if choices.iter().all(|c| c.len() == 1) {
            return Ok(self.result_at(choices.iter().map(|c| c[0].0).collect()));
        }

        let combos: usize = choices.iter().map(Vec::len).product();
        let mut terms = Vec::with_capacity(combos);
        for mut k in 0..combos {
            let mut index = vec![0; choices.len()];
            let mut weight = 1.0;
            for (slot, options) in index.iter_mut().zip(&choices).rev() {
                let (i, w) = options[k % options.len()];
                k /= options.len();
                *slot = i;
                weight *= w;
            }
            let cell = self.cell(&index)?;
            match cell.value() {
                Some(value) => terms.push(BlendTerm {
                    index,
                    weight,
                    value,
                    provenance: cell.provenance(),
                }),
                None => {
                    return Ok(LookupResult::Blank {
                        reason: cell.blank_reason().unwrap(),
                        index,
                    })
                }
            }
        }
        Ok(LookupResult::Value {
            value: ValueSource::blend_value(&terms),
            source: ValueSource::Blend { terms },
        })
    }

    /// Grid index of a corner: `true` maps to level 0 (the scale maximum).
    pub fn corner_index(&self, corner: &Corner) -> Result<GridIndex> {
        if corner.arity() != self.arity() {
            return Err(Error::CornerUndefined(format!(
                "corner {corner} does not match a {}-axis table",
                self.arity()
            )));
        }
        Ok(corner
            .bits()
            .iter()
            .zip(&self.axes)
            .map(|(&bit, a)| if bit { 0 } else { a.len() - 1 })
            .collect())
    }

    pub fn corner_view(&self) -> CategoricalTable {
        let values = Corner::all(self.arity())
            .map(|c| {
                let idx = self.corner_index(&c).expect("corner arity matches");
                self.cells[self.offset(&idx).unwrap()].value()
            })
            .collect();
        CategoricalTable {
            arity: self.arity(),
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn prob(v: f64) -> BeliefValue {
        BeliefValue::probability(v).unwrap()
    }

    fn bip(v: f64) -> BeliefValue {
        BeliefValue::bipolar(v).unwrap()
    }

    #[test]
    fn new_table_examples() {
        let p = BeliefScale::PROBABILITY;
        let t = CombiningTable::new(
            "t",
            vec![Axis::default_grid("e", p), Axis::default_grid("r", p)],
            "a",
            p,
        )
        .unwrap();
        assert_eq!(t.len(), 81);
        assert!(t.cells().iter().all(|c| *c == CellState::Unspecified));

        let t = CombiningTable::new("t", vec![Axis::uniform("e", p, 2)], "a", p).unwrap();
        assert_eq!(t.len(), 2);

        let dup = CombiningTable::new(
            "t",
            vec![Axis::default_grid("e", p), Axis::default_grid("e", p)],
            "a",
            p,
        );
        assert!(matches!(dup, Err(Error::DuplicateAxis(id)) if id == "e"));
    }

    #[test]
    fn index_offset_roundtrip() {
        let p = BeliefScale::PROBABILITY;
        let t = CombiningTable::new(
            "t",
            vec![
                Axis::uniform("a", p, 3),
                Axis::uniform("b", p, 4),
                Axis::uniform("c", p, 2),
            ],
            "x",
            p,
        )
        .unwrap();
        for (o, idx) in t.indices().enumerate() {
            assert_eq!(t.offset(&idx).unwrap(), o);
        }
        assert_eq!(t.index_at(5), vec![0, 2, 1]);
        assert!(t.offset(&[3, 0, 0]).is_err());
        assert!(t.offset(&[0, 0]).is_err());
    }

    #[test]
    fn set_specified_examples() {
        let t = fixtures::quadrant_table();
        let blank = CombiningTable::new("f1", t.axes().to_vec(), "C", BeliefScale::BIPOLAR).unwrap();
        let once = blank.set_specified(&[0, 0], 1.0, "expert").unwrap();
        assert_eq!(once.cell(&[0, 0]).unwrap().provenance(), Provenance::Specified);
        let twice = once.set_specified(&[0, 0], 0.5, "revised").unwrap();
        assert_eq!(twice.cell(&[0, 0]).unwrap().value(), Some(0.5));
        assert_eq!(
            twice.cells().iter().filter(|c| c.provenance() == Provenance::Specified).count(),
            1
        );

        let p = BeliefScale::PROBABILITY;
        let pt = CombiningTable::new("p", vec![Axis::default_grid("e", p)], "a", p).unwrap();
        assert!(matches!(pt.set_specified(&[0], 2.0, ""), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn blank_and_zero_are_distinguishable() {
        let t = fixtures::quadrant_table();
        // (E1 = 0, E2 = 0) holds a zero, (E1 = 0, E2 = -.25) is blank.
        let zero = t.lookup(&[bip(0.0), bip(0.0)], LookupMode::Exact).unwrap();
        let blank = t.lookup(&[bip(0.0), bip(-0.25)], LookupMode::Exact).unwrap();
        assert_eq!(zero.value(), Some(0.0));
        assert!(matches!(blank, LookupResult::Blank { reason: BlankReason::Unspecified, .. }));
        assert_ne!(zero, blank);
    }

    #[test]
    fn lookup_examples() {
        let ang = fixtures::angina_table();
        let r = ang.lookup(&[prob(0.875), prob(1.0)], LookupMode::Exact).unwrap();
        match r {
            LookupResult::Value { value, source } => {
                assert!((value - 0.90625).abs() < 1e-12);
                assert!(matches!(source, ValueSource::Cell { provenance: Provenance::Derived, .. }));
            }
            other => panic!("unexpected {other:?}"),
        }

        let quad = fixtures::quadrant_table();
        let r = quad.lookup(&[bip(-0.25), bip(1.0)], LookupMode::Exact).unwrap();
        assert!(matches!(r, LookupResult::Blank { .. }));

        let miss = ang.lookup(&[prob(0.9), prob(1.0)], LookupMode::Exact);
        assert!(matches!(miss, Err(Error::NotOnGrid { .. })));
        let tie = ang.lookup(&[prob(0.9375), prob(1.0)], LookupMode::Snap);
        assert!(matches!(tie, Err(Error::Ambiguous { .. })));
        let snapped = ang.lookup(&[prob(0.9), prob(0.99)], LookupMode::Snap).unwrap();
        assert!((snapped.value().unwrap() - 0.90625).abs() < 1e-12);
    }

    #[test]
    fn continuous_lookup_blanks_if_any_neighbour_is_blank() {
        let quad = fixtures::quadrant_table();
        // Between E2 = 0 (filled) and E2 = -.25 (blank).
        let r = quad.lookup(&[bip(0.5), bip(-0.1)], LookupMode::Continuous).unwrap();
        assert!(matches!(r, LookupResult::Blank { .. }));
        let r = quad.lookup(&[bip(0.9), bip(0.9)], LookupMode::Continuous).unwrap();
        assert!((r.value().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn corner_view_examples() {
        let f1 = fixtures::quadrant_table().corner_view();
        let c = |s: &str| s.parse::<Corner>().unwrap();
        assert_eq!(f1.get(&c("TT")), Some(1.0));
        assert_eq!(f1.get(&c("TF")), Some(0.0));
        assert_eq!(f1.get(&c("FT")), None);
        assert_eq!(f1.get(&c("FF")), Some(-1.0));

        let f2 = fixtures::angina_table().corner_view();
        assert_eq!(f2.values().unwrap(), vec![1.0, 0.95, 0.25, 0.0]);

        let p = BeliefScale::PROBABILITY;
        let empty = CombiningTable::new(
            "t",
            vec![Axis::default_grid("a", p), Axis::default_grid("b", p), Axis::default_grid("c", p)],
            "x",
            p,
        )
        .unwrap();
        assert_eq!(empty.corner_view().missing().len(), 8);
    }

    #[test]
    fn region_cells_examples() {
        let t = fixtures::quadrant_table();
        let quadrant = Region::new(
            t.axes(),
            vec![LevelPredicate::Ge(0.0), LevelPredicate::Le(0.0)],
        )
        .unwrap();
        // Oracle: the 5x5 sub-block of levels {1..0} x {0..-1}.
        let expected: Vec<GridIndex> = (0..5)
            .flat_map(|i| (4..9).map(move |j| vec![i, j]))
            .collect();
        let got: Vec<GridIndex> = t.region_cells(&quadrant).into_iter().map(|(i, _)| i).collect();
        assert_eq!(got, expected);

        assert_eq!(t.region_cells(&Region::any(t.axes())).len(), 81);
        assert!(matches!(
            Region::new(t.axes(), vec![LevelPredicate::Eq(0.3), LevelPredicate::Any]),
            Err(Error::InvalidRegion(_))
        ));
    }

    #[test]
    fn mark_meaningless_examples() {
        let t = fixtures::quadrant_table();
        let upper_right = Region::new(
            t.axes(),
            vec![LevelPredicate::Le(-0.25), LevelPredicate::Ge(0.0)],
        )
        .unwrap();
        let marked = t.mark_meaningless(&upper_right).unwrap();
        let cells = marked.region_cells(&upper_right);
        assert_eq!(cells.len(), 20);
        assert!(cells.iter().all(|(_, c)| **c == CellState::IntendedBlank));

        let empty = Region::new(t.axes(), vec![LevelPredicate::In(vec![]), LevelPredicate::Any]).unwrap();
        assert_eq!(t.mark_meaningless(&empty).unwrap(), t);

        let corner = Region::new(t.axes(), vec![LevelPredicate::Eq(1.0), LevelPredicate::Eq(1.0)]).unwrap();
        assert!(matches!(
            t.mark_meaningless(&corner),
            Err(Error::WouldEraseExpertCells(cells)) if cells == vec![vec![0, 0]]
        ));
    }

    #[test]
    fn region_spec_parsing() {
        let t = fixtures::angina_table();
        let r = Region::parse_spec(t.axes(), "0.625,0.5;1,0.875,0.75,0.625").unwrap();
        assert_eq!(t.region_cells(&r).len(), 8);
        let r = Region::parse_spec(t.axes(), "*;>=0.5").unwrap();
        assert_eq!(t.region_cells(&r).len(), 45);
        assert_eq!(Region::parse_spec(t.axes(), &r.to_string()).unwrap(), r);
        assert!(Region::parse_spec(t.axes(), "*").is_err());
        assert!(Region::parse_spec(t.axes(), "0.3;*").is_err());
        assert!(Region::parse_spec(t.axes(), "x;*").is_err());
    }

    #[test]
    fn corner_keys() {
        let names: Vec<String> = Corner::all(2).map(|c| c.to_string()).collect();
        assert_eq!(names, ["TT", "TF", "FT", "FF"]);
        for k in 0..8 {
            assert_eq!(Corner::from_key(k, 3).key(), k);
        }
    }

    #[test]
    fn cell_state_serde_codes() {
        let s = serde_json::to_string(&CellState::Derived {
            value: 0.5,
            interpolator: "bayes".into(),
        })
        .unwrap();
        assert_eq!(s, r#"{"code":"D","value":0.5,"interpolator":"bayes"}"#);
        let u: CellState = serde_json::from_str(r#"{"code":"U"}"#).unwrap();
        assert_eq!(u, CellState::Unspecified);
        let cat = fixtures::angina_categorical();
        let json = serde_json::to_string(&cat).unwrap();
        assert_eq!(json, r#"{"arity":2,"corners":{"TT":1.0,"TF":0.95,"FT":0.25,"FF":0.0}}"#);
        assert_eq!(serde_json::from_str::<CategoricalTable>(&json).unwrap(), cat);
    }
}
