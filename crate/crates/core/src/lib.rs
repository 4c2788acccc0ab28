//! Modifiable combining functions: tabular evidence-combination tables whose
//! cells are specified by an expert, interpolated from a categorical table,
//! or overridden during refinement.
//!
//! The crate is organised bottom-up:
//!
//! - [`belief`]: belief scales, values, and axis grids.
//! - [`tables`]: dense combining tables with per-cell provenance.
//! - [`interpolate`]: multilinear interpolation from corner values.
//! - [`rules`]: the region rule language.
//! - [`engine`]: forward evaluation of inference networks with traces.
//! - [`revision`]: journaled overrides, corner edits, and interpolator swaps.
//! - [`document`]: the on-disk knowledge base and its journal.

pub mod belief;
pub mod document;
pub mod engine;
pub mod error;
pub mod export;
pub mod fixtures;
pub mod interpolate;
pub mod revision;
pub mod rules;
pub mod tables;

pub use belief::{make_belief, Axis, BeliefScale, BeliefValue, LocateMode, Location, ScaleKind};
pub use document::{Applied, Document, RuleFile};
pub use engine::{
    corroborate, evaluate_network, evaluate_rule, BlankPolicy, Combiner, CorroborationCombiner, CorroborationSpec,
    Env, Evaluation, InferenceRule, Library, Network, Proposition, Trace,
};
pub use error::{Error, ErrorClass, Result};
pub use export::{display_value, export_csv, export_provenance_csv, round_half_up};
pub use interpolate::{
    bayes_joint_point, bayes_point, corner_weights, derive_full, Interpolation, Interpolator, InterpolatorKind,
    JointDistribution, JointSpec,
};
pub use revision::{Action, Binding, EntryContext, JournalEntry, SwapWarning};
pub use rules::{format_rules, parse_rules, RuleSet};
pub use tables::{
    CategoricalTable, CellDiff, CellState, CombiningTable, Corner, GridIndex, LevelPredicate, LookupMode,
    LookupResult, Provenance, Region,
};
