use thiserror::Error;

use crate::belief::ScaleKind;
use crate::rules::ParseError;
use crate::tables::{Corner, GridIndex};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the workbench can report.
///
/// Variants map onto stable snake-case codes (see [`Error::code`]) which the
/// CLI and HTTP layers expose verbatim.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("value {value} outside [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },

    #[error("scale mismatch: expected {expected:?}, found {found:?}")]
    ScaleMismatch { expected: ScaleKind, found: ScaleKind },

    #[error("{value} is not a level of axis '{axis}'")]
    NotOnGrid { axis: String, value: f64 },

    #[error("{value} lies exactly midway between two levels of axis '{axis}'")]
    Ambiguous { axis: String, value: f64 },

    #[error("invalid axis '{axis}': {reason}")]
    InvalidAxis { axis: String, reason: String },

    #[error("proposition '{0}' appears on more than one axis")]
    DuplicateAxis(String),

    #[error("index {index:?} outside table shape {shape:?}")]
    IndexOutOfBounds { index: GridIndex, shape: Vec<usize> },

    #[error("arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: usize, found: usize },

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("region would erase expert cells at {0:?}")]
    WouldEraseExpertCells(Vec<GridIndex>),

    #[error("corner undefined: {0}")]
    CornerUndefined(String),

    #[error("categorical table is missing corners {}", fmt_corners(.0))]
    MissingCorners(Vec<Corner>),

    #[error("joint weights must be nonnegative and sum to 1 (sum = {0})")]
    BadWeights(f64),

    #[error("{0}")]
    Parse(#[from] ParseError),

    #[error("unknown proposition '{0}'")]
    UnknownProposition(String),

    #[error("equality against {level} which is not a level of axis '{axis}'")]
    EqualityOffGrid { axis: String, level: f64 },

    #[error("{} conflicting cell assignment(s)", .0.len())]
    ConflictsPresent(Vec<crate::rules::Conflict>),

    #[error("missing evidence for {0:?}")]
    MissingEvidence(Vec<String>),

    #[error("blank cell encountered at {0:?}")]
    BlankEncountered(GridIndex),

    #[error("blank cell at {0:?} on a probability scale, which has no ignorance value")]
    BlankWithoutIgnorance(GridIndex),

    #[error("rule dependency cycle: {}", .0.join(" -> "))]
    CycleDetected(Vec<String>),

    #[error("'{0}' is concluded by several rules but has no corroboration spec")]
    AmbiguousCorroboration(String),

    #[error("'{0}' has not been evaluated")]
    NotEvaluated(String),

    #[error("invalid rule '{rule}': {reason}")]
    InvalidRule { rule: String, reason: String },

    #[error("tables have different axes")]
    ShapeMismatch,

    #[error("entry {entry} cannot be reverted; later entries touch its cells: {later:?}")]
    NotRevertible { entry: u64, later: Vec<u64> },

    #[error("no {kind} named '{id}'")]
    NotFound { kind: &'static str, id: String },

    #[error("schema error at {path}: {reason}")]
    Schema { path: String, reason: String },

    #[error("unsupported document version {0}")]
    VersionUnsupported(String),

    #[error("stale journal head: request carried {given}, current head is {current}")]
    StaleHead { given: u64, current: u64 },

    #[error("i/o error: {0}")]
    Io(String),
}

fn fmt_corners(corners: &[Corner]) -> String {
    corners
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

/// Coarse classification used for exit codes and HTTP status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Conflict,
    NotFound,
    Io,
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::OutOfRange { .. } => "out_of_range",
            Error::ScaleMismatch { .. } => "scale_mismatch",
            Error::NotOnGrid { .. } => "not_on_grid",
            Error::Ambiguous { .. } => "ambiguous",
            Error::InvalidAxis { .. } => "invalid_axis",
            Error::DuplicateAxis(_) => "duplicate_axis",
            Error::IndexOutOfBounds { .. } => "index_out_of_bounds",
            Error::ArityMismatch { .. } => "arity_mismatch",
            Error::InvalidRegion(_) => "invalid_region",
            Error::WouldEraseExpertCells(_) => "would_erase_expert_cells",
            Error::CornerUndefined(_) => "corner_undefined",
            Error::MissingCorners(_) => "missing_corners",
            Error::BadWeights(_) => "bad_weights",
            Error::Parse(_) => "parse_error",
            Error::UnknownProposition(_) => "unknown_proposition",
            Error::EqualityOffGrid { .. } => "equality_off_grid",
            Error::ConflictsPresent(_) => "conflicts_present",
            Error::MissingEvidence(_) => "missing_evidence",
            Error::BlankEncountered(_) => "blank_encountered",
            Error::BlankWithoutIgnorance(_) => "blank_without_ignorance",
            Error::CycleDetected(_) => "cycle_detected",
            Error::AmbiguousCorroboration(_) => "ambiguous_corroboration",
            Error::NotEvaluated(_) => "not_evaluated",
            Error::InvalidRule { .. } => "invalid_rule",
            Error::ShapeMismatch => "shape_mismatch",
            Error::NotRevertible { .. } => "not_revertible",
            Error::NotFound { .. } => "not_found",
            Error::Schema { .. } => "schema_error",
            Error::VersionUnsupported(_) => "version_unsupported",
            Error::StaleHead { .. } => "stale_head",
            Error::Io(_) => "io_error",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::ConflictsPresent(_)
            | Error::BlankEncountered(_)
            | Error::BlankWithoutIgnorance(_)
            | Error::NotRevertible { .. }
            | Error::StaleHead { .. }
            | Error::WouldEraseExpertCells(_) => ErrorClass::Conflict,
            Error::NotFound { .. } | Error::NotEvaluated(_) => ErrorClass::NotFound,
            Error::Io(_) => ErrorClass::Io,
            _ => ErrorClass::Validation,
        }
    }

    /// Location hint for error payloads: a document path, a source position,
    /// or an empty string when the error has no natural location.
    pub fn path(&self) -> String {
        match self {
            Error::Schema { path, .. } => path.clone(),
            Error::Parse(p) => format!("{}:{}", p.line, p.column),
            Error::NotFound { id, .. } => id.clone(),
            Error::NotOnGrid { axis, .. }
            | Error::Ambiguous { axis, .. }
            | Error::InvalidAxis { axis, .. }
            | Error::EqualityOffGrid { axis, .. } => axis.clone(),
            _ => String::new(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
