//! Reference tables and knowledge bases used by tests, benches, the CLI's
//! `init --example`, and the acceptance suite.
//!
//! Printed grids are laid out as they appear on paper: rows run down the
//! second axis and columns across the first, both from 1 down to the minimum.

use crate::belief::{Axis, BeliefScale};
use crate::engine::{Combiner, CorroborationSpec, InferenceRule, Network, Proposition};
use crate::interpolate::{derive_full, Interpolator};
use crate::tables::{CategoricalTable, CellState, CombiningTable, LevelPredicate, Region};

/// Hand-built bipolar table over bel(E1) (columns) and bel(E2) (rows).
/// `None` marks a blank cell.
pub const QUADRANT_PRINTED: [[Option<f64>; 9]; 9] = {
    const B: Option<f64> = None;
    const fn s(v: f64) -> Option<f64> {
        Some(v)
    }
    [
        [s(1.0), s(1.0), s(0.75), s(0.5), s(0.0), B, B, B, B],
        [s(1.0), s(1.0), s(0.5), s(0.25), s(0.0), B, B, B, B],
        [s(0.5), s(0.25), s(0.0), s(0.0), s(0.0), B, B, B, B],
        [s(0.25), s(0.0), s(0.0), s(0.0), s(0.0), B, B, B, B],
        [s(0.0), s(0.0), s(0.0), s(0.0), s(0.0), B, B, B, B],
        [B, B, B, B, B, B, B, B, B],
        [B, B, B, B, B, B, B, B, B],
        [s(0.0), s(-0.5), s(-0.75), s(-0.75), s(-1.0), s(-1.0), s(-1.0), s(-1.0), s(-1.0)],
        [s(0.0), s(-0.5), s(-0.75), s(-0.75), s(-1.0), s(-1.0), s(-1.0), s(-1.0), s(-1.0)],
    ]
};

/// Interpolated angina grid: columns P(episode), rows P(risk factors).
pub const ANGINA_PRINTED: [[f64; 9]; 9] = [
    [1.0, 0.91, 0.81, 0.72, 0.63, 0.53, 0.44, 0.34, 0.25],
    [0.99, 0.90, 0.80, 0.70, 0.61, 0.51, 0.41, 0.32, 0.22],
    [0.99, 0.89, 0.79, 0.69, 0.59, 0.49, 0.39, 0.29, 0.19],
    [0.98, 0.88, 0.78, 0.67, 0.57, 0.47, 0.36, 0.26, 0.16],
    [0.98, 0.87, 0.76, 0.66, 0.55, 0.44, 0.34, 0.23, 0.13],
    [0.97, 0.86, 0.75, 0.64, 0.53, 0.42, 0.31, 0.20, 0.09],
    [0.96, 0.85, 0.74, 0.63, 0.51, 0.40, 0.29, 0.18, 0.06],
    [0.96, 0.84, 0.73, 0.61, 0.49, 0.38, 0.26, 0.15, 0.03],
    [0.95, 0.83, 0.71, 0.59, 0.48, 0.36, 0.24, 0.12, 0.0],
];

/// The angina grid after the expert raised the under-estimated block.
pub const OVERRIDDEN_PRINTED: [[f64; 9]; 9] = [
    [1.0, 0.91, 0.81, 0.75, 0.75, 0.50, 0.50, 0.34, 0.25],
    [0.99, 0.90, 0.80, 0.75, 0.75, 0.50, 0.50, 0.32, 0.22],
    [0.99, 0.89, 0.79, 0.75, 0.75, 0.50, 0.50, 0.29, 0.19],
    [0.98, 0.88, 0.78, 0.75, 0.75, 0.50, 0.50, 0.26, 0.16],
    [0.98, 0.87, 0.76, 0.66, 0.55, 0.44, 0.34, 0.23, 0.13],
    [0.97, 0.86, 0.75, 0.64, 0.53, 0.42, 0.31, 0.20, 0.09],
    [0.96, 0.85, 0.74, 0.63, 0.51, 0.40, 0.29, 0.18, 0.06],
    [0.96, 0.84, 0.73, 0.61, 0.49, 0.38, 0.26, 0.15, 0.03],
    [0.95, 0.83, 0.71, 0.59, 0.48, 0.36, 0.24, 0.12, 0.0],
];

/// Region rules describing two regularities of the bipolar table.
pub const QUADRANT_RULES: &str = "\
# upper-right quadrant
IF bel(E1) >= 0 AND bel(E2) <= 0 THEN bel(C) := 0

# lower-left quadrant: threshold on E1
IF bel(E1) <= -.75 AND (bel(E2) = .5 OR bel(E2) = .25) THEN bel(C) := -.75
IF bel(E1) <= -.75 AND bel(E2) = .75 THEN bel(C) := -.5
";

pub const ANGINA_TABLE: &str = "angina";
pub const ANGINA_CATEGORICAL: &str = "angina-categorical";
pub const BAYES: &str = "bayes";

pub fn quadrant_table() -> CombiningTable {
    let b = BeliefScale::BIPOLAR;
    let axes = vec![Axis::default_grid("E1", b), Axis::default_grid("E2", b)];
    let mut cells = Vec::with_capacity(81);
    for col in 0..9 {
        for row in QUADRANT_PRINTED.iter() {
            cells.push(match row[col] {
                Some(value) => CellState::Specified {
                    value,
                    note: String::new(),
                },
                None => CellState::Unspecified,
            });
        }
    }
    CombiningTable::from_cells("quadrants", axes, "C", b, cells).expect("fixture is valid")
}

/// Corner beliefs of the bipolar table; nothing is known for (E1 false, E2 true).
pub fn quadrant_categorical() -> CategoricalTable {
    CategoricalTable::from_values(2, vec![Some(1.0), Some(0.0), None, Some(-1.0)]).unwrap()
}

/// Angina corners in key order: e&r, e&~r, ~e&r, ~e&~r.
pub fn angina_categorical() -> CategoricalTable {
    CategoricalTable::complete(2, &[1.0, 0.95, 0.25, 0.0]).unwrap()
}

pub fn empty_angina_table() -> CombiningTable {
    let p = BeliefScale::PROBABILITY;
    CombiningTable::new(
        ANGINA_TABLE,
        vec![Axis::default_grid("episode", p), Axis::default_grid("risk", p)],
        "angina_history",
        p,
    )
    .unwrap()
}

/// The fully interpolated angina table.
pub fn angina_table() -> CombiningTable {
    derive_full(&empty_angina_table(), &angina_categorical(), &Interpolator::bayes(BAYES))
        .expect("fixture derivation succeeds")
        .0
}

/// The two expert block overrides as (region, value) pairs.
pub fn angina_overrides(table: &CombiningTable) -> Vec<(Region, f64)> {
    let rows = LevelPredicate::In(vec![1.0, 0.875, 0.75, 0.625]);
    vec![
        (
            Region::new(table.axes(), vec![LevelPredicate::In(vec![0.625, 0.5]), rows.clone()]).unwrap(),
            0.75,
        ),
        (
            Region::new(table.axes(), vec![LevelPredicate::In(vec![0.375, 0.25]), rows]).unwrap(),
            0.5,
        ),
    ]
}

/// Plant-disease table: one expert-specified cell at (heavy .7, low oxygen .9).
pub fn plant_table() -> CombiningTable {
    let p = BeliefScale::PROBABILITY;
    let tenths = || (0..=10).rev().map(|i| i as f64 / 10.0).collect::<Vec<_>>();
    let axes = vec![
        Axis::new("soil_texture_heavy", p, tenths()).unwrap(),
        Axis::new("soil_oxygen_low", p, tenths()).unwrap(),
    ];
    let table = CombiningTable::new("water-damage", axes, "water_damage", p).unwrap();
    table
        .set_specified(&[3, 1], 0.8, "plant pathologist")
        .unwrap()
}

pub fn angina_network() -> Network {
    let p = BeliefScale::PROBABILITY;
    Network {
        propositions: vec![
            Proposition::new("episode", "episode characteristic of angina", p),
            Proposition::new("risk", "patient has risk factors", p),
            Proposition::new("angina_history", "history consistent with angina", p),
        ],
        rules: vec![InferenceRule {
            id: "angina-rule".into(),
            premise: vec!["episode".into(), "risk".into()],
            conclusion: "angina_history".into(),
            combiner: Combiner::Interpolated {
                categorical: ANGINA_CATEGORICAL.into(),
                interpolator: BAYES.into(),
            },
            k: Some(1.0),
        }],
        corroborations: Vec::<CorroborationSpec>::new(),
    }
}

pub fn plant_network() -> Network {
    let p = BeliefScale::PROBABILITY;
    Network {
        propositions: vec![
            Proposition::new("soil_texture_heavy", "soil texture = heavy", p),
            Proposition::new("soil_oxygen_low", "soil oxygen = low", p),
            Proposition::new("water_damage", "water damage = yes", p),
        ],
        rules: vec![InferenceRule {
            id: "water-damage-rule".into(),
            premise: vec!["soil_texture_heavy".into(), "soil_oxygen_low".into()],
            conclusion: "water_damage".into(),
            combiner: Combiner::Table {
                table: "water-damage".into(),
            },
            k: None,
        }],
        corroborations: Vec::new(),
    }
}
