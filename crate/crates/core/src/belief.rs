//! Belief scales, belief values, and the gridded axes tables are indexed by.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used whenever a number is matched against a grid level.
pub const LEVEL_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleKind {
    /// [-1, 1] with 0 meaning ignorance.
    Bipolar,
    /// [0, 1], no ignorance point.
    Probability,
}

/// One of the two built-in belief scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeliefScale {
    kind: ScaleKind,
}

impl BeliefScale {
    pub const BIPOLAR: BeliefScale = BeliefScale {
        kind: ScaleKind::Bipolar,
    };
    pub const PROBABILITY: BeliefScale = BeliefScale {
        kind: ScaleKind::Probability,
    };

    pub fn kind(self) -> ScaleKind {
        self.kind
    }

    pub fn min(self) -> f64 {
        match self.kind {
            ScaleKind::Bipolar => -1.0,
            ScaleKind::Probability => 0.0,
        }
    }

    pub fn max(self) -> f64 {
        1.0
    }

    pub fn ignorance(self) -> Option<f64> {
        match self.kind {
            ScaleKind::Bipolar => Some(0.0),
            ScaleKind::Probability => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self.kind {
            ScaleKind::Bipolar => "bipolar",
            ScaleKind::Probability => "probability",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "bipolar" => Some(Self::BIPOLAR),
            "probability" => Some(Self::PROBABILITY),
            _ => None,
        }
    }

    pub fn contains(self, raw: f64) -> bool {
        raw >= self.min() && raw <= self.max()
    }

    pub fn check(self, raw: f64) -> Result<f64> {
        if self.contains(raw) {
            Ok(raw)
        } else {
            Err(Error::OutOfRange {
                value: raw,
                min: self.min(),
                max: self.max(),
            })
        }
    }

    pub fn expect_kind(self, expected: ScaleKind) -> Result<()> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(Error::ScaleMismatch {
                expected,
                found: self.kind,
            })
        }
    }
}

impl From<ScaleKind> for BeliefScale {
    fn from(kind: ScaleKind) -> Self {
        BeliefScale { kind }
    }
}

impl fmt::Display for BeliefScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A degree of belief, guaranteed to lie within its scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeliefValue {
    value: f64,
    scale: BeliefScale,
}

impl BeliefValue {
    pub fn new(raw: f64, scale: BeliefScale) -> Result<Self> {
        scale.check(raw).map(|value| BeliefValue { value, scale })
    }

    pub fn probability(raw: f64) -> Result<Self> {
        Self::new(raw, BeliefScale::PROBABILITY)
    }

    pub fn bipolar(raw: f64) -> Result<Self> {
        Self::new(raw, BeliefScale::BIPOLAR)
    }

    pub fn value(self) -> f64 {
        self.value
    }

    pub fn scale(self) -> BeliefScale {
        self.scale
    }

    /// `1 - p`; only meaningful on the probability scale.
    pub fn complement(self) -> Result<Self> {
        self.scale.expect_kind(ScaleKind::Probability)?;
        Ok(BeliefValue {
            value: 1.0 - self.value,
            scale: self.scale,
        })
    }
}

/// Free-function form of [`BeliefValue::new`].
pub fn make_belief(raw: f64, scale: BeliefScale) -> Result<BeliefValue> {
    BeliefValue::new(raw, scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocateMode {
    Exact,
    Snap,
    Bracket,
}

/// Where a belief falls on an axis. `upper` always has the smaller index
/// because levels are stored in descending order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    At(usize),
    Between { upper: usize, lower: usize },
}

/// A gridded belief axis for one proposition. Levels run from the scale
/// maximum down to the scale minimum, strictly descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAxis", into = "RawAxis")]
pub struct Axis {
    proposition: String,
    scale: BeliefScale,
    levels: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawAxis {
    proposition: String,
    scale: BeliefScale,
    levels: Vec<f64>,
}

impl TryFrom<RawAxis> for Axis {
    type Error = Error;

    fn try_from(raw: RawAxis) -> Result<Self> {
        Axis::new(raw.proposition, raw.scale, raw.levels)
    }
}

impl From<Axis> for RawAxis {
    fn from(axis: Axis) -> Self {
        RawAxis {
            proposition: axis.proposition,
            scale: axis.scale,
            levels: axis.levels,
        }
    }
}

impl Axis {
    pub fn new(proposition: impl Into<String>, scale: BeliefScale, levels: Vec<f64>) -> Result<Self> {
        let proposition = proposition.into();
        let invalid = |reason: String| Error::InvalidAxis {
            axis: proposition.clone(),
            reason,
        };
        if levels.len() < 2 {
            return Err(invalid("an axis needs at least two levels".into()));
        }
        if let Some(bad) = levels.iter().find(|l| !l.is_finite() || !scale.contains(**l)) {
            return Err(invalid(format!("level {bad} outside the {scale} scale")));
        }
        if levels.windows(2).any(|w| w[0] <= w[1]) {
            return Err(invalid("levels must be strictly descending".into()));
        }
        let (first, last) = (levels[0], levels[levels.len() - 1]);
        if (first - scale.max()).abs() > LEVEL_EPSILON || (last - scale.min()).abs() > LEVEL_EPSILON {
            return Err(invalid(format!(
                "levels must run from {} down to {}",
                scale.max(),
                scale.min()
            )));
        }
        Ok(Axis {
            proposition,
            scale,
            levels,
        })
    }

    /// Nine evenly spaced levels: steps of .25 on the bipolar scale and
    /// .125 on the probability scale.
    pub fn default_grid(proposition: impl Into<String>, scale: BeliefScale) -> Self {
        Self::uniform(proposition, scale, 9)
    }

    pub fn uniform(proposition: impl Into<String>, scale: BeliefScale, count: usize) -> Self {
        assert!(count >= 2, "an axis needs at least two levels");
        let span = scale.max() - scale.min();
        let steps = (count - 1) as f64;
        let levels = (0..count)
            .map(|i| scale.max() - span * i as f64 / steps)
            .collect();
        Axis::new(proposition, scale, levels).expect("uniform grid is always valid")
    }

    pub fn proposition(&self) -> &str {
        &self.proposition
    }

    pub fn scale(&self) -> BeliefScale {
        self.scale
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, index: usize) -> Option<f64> {
        self.levels.get(index).copied()
    }

    /// Index of a level equal to `value` within [`LEVEL_EPSILON`].
    pub fn position(&self, value: f64) -> Option<usize> {
        self.levels
            .iter()
            .position(|l| (l - value).abs() <= LEVEL_EPSILON)
    }

    pub fn locate(&self, belief: BeliefValue, mode: LocateMode) -> Result<Location> {
        if belief.scale() != self.scale {
            return Err(Error::ScaleMismatch {
                expected: self.scale.kind(),
                found: belief.scale().kind(),
            });
        }
        let value = belief.value();
        if let Some(i) = self.position(value) {
            return Ok(Location::At(i));
        }
        if mode == LocateMode::Exact {
            return Err(Error::NotOnGrid {
                axis: self.proposition.clone(),
                value,
            });
        }
        // Not on a level, so it lies strictly inside exactly one step.
        let upper = self
            .levels
            .windows(2)
            .position(|w| w[0] > value && value > w[1])
            .expect("in-range value is bracketed by the axis levels");
        let lower = upper + 1;
        match mode {
            LocateMode::Bracket => Ok(Location::Between { upper, lower }),
            _ => {
                let to_upper = self.levels[upper] - value;
                let to_lower = value - self.levels[lower];
                if (to_upper - to_lower).abs() <= LEVEL_EPSILON {
                    Err(Error::Ambiguous {
                        axis: self.proposition.clone(),
                        value,
                    })
                } else if to_upper < to_lower {
                    Ok(Location::At(upper))
                } else {
                    Ok(Location::At(lower))
                }
            }
        }
    }
}
