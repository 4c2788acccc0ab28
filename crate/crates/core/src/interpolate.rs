//! Bayesian interpolation of full tables from categorical tables.
//!
//! Given corner beliefs `V(c)` for every categorical combination `c` of N
//! pieces of evidence, the belief in the conclusion is the total-probability
//! mixture `sum_c V(c) * P(c)`. Under independence `P(c)` factors into
//! `prod_i p_i` or `1 - p_i`, which makes the interpolant multilinear; with
//! an explicit joint distribution the weights are taken as given.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::belief::{BeliefValue, ScaleKind};
use crate::error::{Error, Result};
use crate::tables::{CategoricalTable, CellDiff, CellState, CombiningTable, Corner};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Product weights for every corner, in corner-key order.
///
/// The weight of corner `c` multiplies `p_i` for each true bit and `1 - p_i`
/// for each false bit, axis by axis.
pub fn corner_weights(probs: &[f64]) -> Vec<f64> {
    Corner::all(probs.len())
        .map(|c| {
            c.bits()
                .iter()
                .zip(probs)
                .fold(1.0, |w, (&bit, &p)| w * if bit { p } else { 1.0 - p })
        })
        .collect()
}

/// `sum_c values[c] * weights[c]`, accumulated in corner-key order.
pub fn mix(values: &[f64], weights: &[f64]) -> f64 {
    values
        .iter()
        .zip(weights)
        .fold(0.0, |acc, (v, w)| acc + v * w)
}

fn probabilities(probs: &[BeliefValue]) -> Result<Vec<f64>> {
    probs
        .iter()
        .map(|b| {
            b.scale().expect_kind(ScaleKind::Probability)?;
            Ok(b.value())
        })
        .collect()
}

fn check_arity(cat: &CategoricalTable, found: usize) -> Result<()> {
    if cat.arity() == found {
        Ok(())
    } else {
        Err(Error::ArityMismatch {
            expected: cat.arity(),
            found,
        })
    }
}

/// Independent-evidence interpolation at one point.
pub fn bayes_point(cat: &CategoricalTable, probs: &[BeliefValue]) -> Result<f64> {
    Interpolation::independent(cat, probs).map(|i| i.value)
}

/// Interpolation against an explicit joint distribution over the corners.
pub fn bayes_joint_point(cat: &CategoricalTable, joint: &JointDistribution) -> Result<f64> {
    check_arity(cat, joint.arity())?;
    let values = cat.values()?;
    Ok(mix(&values, joint.weights()))
}

/// A probability distribution over the 2^N categorical combinations.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    arity: usize,
    weights: Vec<f64>,
}

impl JointDistribution {
    /// Weights in corner-key order (all-true first).
    pub fn new(arity: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != 1 << arity {
            return Err(Error::ArityMismatch {
                expected: 1 << arity,
                found: weights.len(),
            });
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0)
            || (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE
        {
            return Err(Error::BadWeights(sum));
        }
        Ok(JointDistribution { arity, weights })
    }

    /// The joint implied by independent marginals.
    pub fn product(probs: &[f64]) -> Result<Self> {
        Self::new(probs.len(), corner_weights(probs))
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Serialize for JointDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(self.weights.len()))?;
        for (k, w) in self.weights.iter().enumerate() {
            map.serialize_entry(&Corner::from_key(k, self.arity).to_string(), w)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for JointDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = serde_json::Map::<String, serde_json::Value>::deserialize(d)?;
        let corners = raw
            .iter()
            .map(|(k, v)| {
                let c: Corner = k.parse().map_err(D::Error::custom)?;
                let w = v
                    .as_f64()
                    .ok_or_else(|| D::Error::custom(format!("weight for {k} is not a number")))?;
                Ok((c, w))
            })
            .collect::<std::result::Result<Vec<_>, D::Error>>()?;
        let arity = corners.first().map_or(0, |(c, _)| c.arity());
        if arity == 0 || corners.len() != 1 << arity {
            return Err(D::Error::custom("joint weights must cover every corner exactly once"));
        }
        let mut weights = vec![f64::NAN; 1 << arity];
        for (c, w) in corners {
            if c.arity() != arity {
                return Err(D::Error::custom("mixed corner arities in joint weights"));
            }
            weights[c.key()] = w;
        }
        JointDistribution::new(arity, weights).map_err(D::Error::custom)
    }
}

/// How a `BayesJoint` interpolator obtains its corner weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointSpec {
    /// Product of the query marginals; identical to the independent form.
    Product,
    /// One fixed joint distribution used at every grid point.
    Fixed(JointDistribution),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InterpolatorKind {
    BayesIndependent,
    BayesJoint { joint: JointSpec },
}

impl fmt::Display for InterpolatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InterpolatorKind::BayesIndependent => f.write_str("bayes-independent"),
            InterpolatorKind::BayesJoint { joint: JointSpec::Product } => {
                f.write_str("bayes-joint(product)")
            }
            InterpolatorKind::BayesJoint { joint: JointSpec::Fixed(_) } => {
                f.write_str("bayes-joint(fixed)")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpolator {
    pub id: String,
    #[serde(flatten)]
    pub kind: InterpolatorKind,
}

impl Interpolator {
    pub fn bayes(id: impl Into<String>) -> Self {
        Interpolator {
            id: id.into(),
            kind: InterpolatorKind::BayesIndependent,
        }
    }

    pub fn joint(id: impl Into<String>, joint: JointSpec) -> Self {
        Interpolator {
            id: id.into(),
            kind: InterpolatorKind::BayesJoint { joint },
        }
    }

    /// Checks that this interpolator can serve a table of the given arity.
    pub fn check_arity(&self, arity: usize) -> Result<()> {
        match &self.kind {
            InterpolatorKind::BayesJoint {
                joint: JointSpec::Fixed(j),
            } if j.arity() != arity => Err(Error::ArityMismatch {
                expected: arity,
                found: j.arity(),
            }),
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, cat: &CategoricalTable, probs: &[BeliefValue]) -> Result<Interpolation> {
        match &self.kind {
            InterpolatorKind::BayesIndependent
            | InterpolatorKind::BayesJoint {
                joint: JointSpec::Product,
            } => Interpolation::independent(cat, probs),
            InterpolatorKind::BayesJoint {
                joint: JointSpec::Fixed(joint),
            } => {
                check_arity(cat, probs.len())?;
                let probs = probabilities(probs)?;
                let value = bayes_joint_point(cat, joint)?;
                Ok(Interpolation {
                    probs,
                    corners: cat.values()?,
                    weights: joint.weights().to_vec(),
                    value,
                })
            }
        }
    }
}

/// One interpolated value together with every term that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpolation {
    pub probs: Vec<f64>,
    /// Corner values in corner-key order.
    pub corners: Vec<f64>,
    pub weights: Vec<f64>,
    pub value: f64,
}

impl Interpolation {
    fn independent(cat: &CategoricalTable, probs: &[BeliefValue]) -> Result<Self> {
        check_arity(cat, probs.len())?;
        let probs = probabilities(probs)?;
        let corners = cat.values()?;
        let weights = corner_weights(&probs);
        let value = mix(&corners, &weights);
        Ok(Interpolation {
            probs,
            corners,
            weights,
            value,
        })
    }

    /// Recomputes the value from the recorded corners and weights.
    pub fn replay(&self) -> f64 {
        mix(&self.corners, &self.weights)
    }
}

fn check_derivation(table: &CombiningTable, cat: &CategoricalTable, interp: &Interpolator) -> Result<()> {
    for axis in table.axes() {
        axis.scale().expect_kind(ScaleKind::Probability)?;
    }
    check_arity(cat, table.arity())?;
    interp.check_arity(table.arity())?;
    for v in cat.values()? {
        table.conclusion_scale().check(v)?;
    }
    Ok(())
}

fn value_at(table: &CombiningTable, cat: &CategoricalTable, interp: &Interpolator, index: &[usize]) -> Result<f64> {
    let point = table
        .coordinates(index)
        .into_iter()
        .map(BeliefValue::probability)
        .collect::<Result<Vec<_>>>()?;
    interp.evaluate(cat, &point).map(|i| i.value)
}

/// Which cells a derivation pass may write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum DeriveScope {
    /// Unspecified cells only.
    Fill,
    /// Unspecified and previously derived cells.
    Refresh,
}

pub(crate) fn derive_cells(
    table: &CombiningTable,
    cat: &CategoricalTable,
    interp: &Interpolator,
    scope: DeriveScope,
) -> Result<(CombiningTable, Vec<CellDiff>)> {
    check_derivation(table, cat, interp)?;
    let mut next = table.clone();
    let mut updates = Vec::new();
    for (index, cell) in table.indices().zip(table.cells()) {
        let eligible = match cell {
            CellState::Unspecified => true,
            CellState::Derived { .. } => scope == DeriveScope::Refresh,
            _ => false,
        };
        if !eligible {
            continue;
        }
        let after = CellState::Derived {
            value: value_at(table, cat, interp, &index)?,
            interpolator: interp.id.clone(),
        };
        if *cell != after {
            next.put(&index, after.clone())?;
            updates.push(CellDiff {
                index,
                before: cell.clone(),
                after,
            });
        }
    }
    Ok((next, updates))
}

/// Fills every unspecified cell by interpolation. Returns the new table and
/// the number of cells filled. Blank-by-intent and expert cells are left
/// untouched, and a categorical table with missing corners is refused.
pub fn derive_full(
    table: &CombiningTable,
    cat: &CategoricalTable,
    interp: &Interpolator,
) -> Result<(CombiningTable, usize)> {
    derive_cells(table, cat, interp, DeriveScope::Fill).map(|(t, u)| (t, u.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{Axis, BeliefScale};
    use crate::fixtures;
    use crate::tables::Provenance;
    use proptest::prelude::*;

    fn probs(ps: &[f64]) -> Vec<BeliefValue> {
        ps.iter().map(|&p| BeliefValue::probability(p).unwrap()).collect()
    }

    /// Independent oracle: interpolate the corner hypercube one axis at a
    /// time, collapsing the leading axis with a single lerp each pass.
    fn iterated_lerp(corners: &[f64], ps: &[f64]) -> f64 {
        let mut layer = corners.to_vec();
        for &p in ps {
            let half = layer.len() / 2;
            // First half has this axis true, second half false.
            layer = (0..half)
                .map(|j| p * layer[j] + (1.0 - p) * layer[half + j])
                .collect();
        }
        layer[0]
    }

    #[test]
    fn bayes_point_examples() {
        let cat = fixtures::angina_categorical();
        let v = bayes_point(&cat, &probs(&[0.5, 0.75])).unwrap();
        assert!((v - 0.5875).abs() <= 1e-12);
        assert_eq!(bayes_point(&cat, &probs(&[1.0, 1.0])).unwrap(), 1.0);
        let v = bayes_point(&cat, &probs(&[0.25, 0.375])).unwrap();
        assert!((v - 0.3125).abs() <= 1e-12);
    }

    #[test]
    fn bayes_point_errors() {
        let cat = fixtures::angina_categorical();
        assert!(matches!(
            bayes_point(&cat, &probs(&[0.5])),
            Err(Error::ArityMismatch { .. })
        ));
        let bip = vec![BeliefValue::bipolar(0.5).unwrap(), BeliefValue::bipolar(0.5).unwrap()];
        assert!(matches!(bayes_point(&cat, &bip), Err(Error::ScaleMismatch { .. })));
        let f1 = fixtures::quadrant_categorical();
        match bayes_point(&f1, &probs(&[0.5, 0.5])) {
            Err(Error::MissingCorners(c)) => assert_eq!(c, vec!["FT".parse().unwrap()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bayes_joint_examples() {
        let cat = fixtures::angina_categorical();
        let product = JointDistribution::product(&[0.5, 0.75]).unwrap();
        let v = bayes_joint_point(&cat, &product).unwrap();
        assert!((v - 0.5875).abs() <= 1e-12);

        let delta = JointDistribution::new(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(bayes_joint_point(&cat, &delta).unwrap(), 1.0);

        let joint = JointDistribution::new(2, vec![0.45, 0.05, 0.30, 0.20]).unwrap();
        let v = bayes_joint_point(&cat, &joint).unwrap();
        let hand = 1.0 * 0.45 + 0.95 * 0.05 + 0.25 * 0.30 + 0.0 * 0.20;
        assert!((v - hand).abs() <= 1e-12);
        assert!((v - 0.5725).abs() <= 1e-12);

        assert!(matches!(
            JointDistribution::new(2, vec![0.5, 0.5, 0.5, 0.0]),
            Err(Error::BadWeights(_))
        ));
        assert!(matches!(
            JointDistribution::new(2, vec![1.2, -0.2, 0.0, 0.0]),
            Err(Error::BadWeights(_))
        ));
    }

    #[test]
    fn derive_full_reproduces_the_printed_grid() {
        let table = fixtures::empty_angina_table();
        let (full, filled) =
            derive_full(&table, &fixtures::angina_categorical(), &Interpolator::bayes("bayes")).unwrap();
        assert_eq!(filled, 81);
        for (r, row) in fixtures::ANGINA_PRINTED.iter().enumerate() {
            for (c, printed) in row.iter().enumerate() {
                // Columns are P(episode), rows P(risk factors).
                let v = full.cell(&[c, r]).unwrap().value().unwrap();
                assert_eq!(crate::export::round_half_up(v), *printed, "cell ({c},{r})");
            }
        }
    }

    #[test]
    fn derive_full_respects_existing_cells() {
        let mut table = fixtures::empty_angina_table();
        for (corner, v) in fixtures::angina_categorical().iter() {
            let idx = table.corner_index(&corner).unwrap();
            table = table.set_specified(&idx, v.unwrap(), "categorical").unwrap();
        }
        table = table
            .mark_meaningless(
                &crate::tables::Region::new(
                    table.axes(),
                    vec![crate::tables::LevelPredicate::Eq(0.5), crate::tables::LevelPredicate::Eq(0.5)],
                )
                .unwrap(),
            )
            .unwrap();
        let (full, filled) =
            derive_full(&table, &fixtures::angina_categorical(), &Interpolator::bayes("bayes")).unwrap();
        assert_eq!(filled, 81 - 4 - 1);
        for corner in Corner::all(2) {
            let idx = full.corner_index(&corner).unwrap();
            assert_eq!(full.cell(&idx).unwrap().provenance(), Provenance::Specified);
        }
        assert_eq!(full.cell(&[4, 4]).unwrap(), &CellState::IntendedBlank);
        assert_eq!(full.cell(&[1, 0]).unwrap().provenance(), Provenance::Derived);
    }

    #[test]
    fn derive_full_refuses_missing_corners_and_bipolar_axes() {
        let table = fixtures::empty_angina_table();
        let err = derive_full(&table, &fixtures::quadrant_categorical(), &Interpolator::bayes("b")).unwrap_err();
        assert_eq!(err, Error::MissingCorners(vec!["FT".parse().unwrap()]));

        let bip = fixtures::quadrant_table();
        let err = derive_full(&bip, &fixtures::angina_categorical(), &Interpolator::bayes("b")).unwrap_err();
        assert!(matches!(err, Error::ScaleMismatch { .. }));
    }

    #[test]
    fn derive_full_is_idempotent() {
        let interp = Interpolator::bayes("bayes");
        let cat = fixtures::angina_categorical();
        let (once, _) = derive_full(&fixtures::empty_angina_table(), &cat, &interp).unwrap();
        let (twice, filled) = derive_full(&once, &cat, &interp).unwrap();
        assert_eq!(filled, 0);
        assert_eq!(once, twice);
        let (refreshed, updates) = derive_cells(&once, &cat, &interp, DeriveScope::Refresh).unwrap();
        assert!(updates.is_empty());
        assert_eq!(refreshed, once);
    }

    #[test]
    fn three_axis_derivation_matches_oracle() {
        let p = BeliefScale::PROBABILITY;
        let axes = vec![
            Axis::uniform("a", p, 3),
            Axis::uniform("b", p, 5),
            Axis::uniform("c", p, 2),
        ];
        let table = CombiningTable::new("t3", axes, "x", p).unwrap();
        let corners = [0.9, 0.1, 0.4, 0.7, 0.3, 0.5, 0.2, 0.0];
        let cat = CategoricalTable::complete(3, &corners).unwrap();
        let (full, filled) = derive_full(&table, &cat, &Interpolator::bayes("b")).unwrap();
        assert_eq!(filled, 30);
        for idx in full.indices() {
            let want = iterated_lerp(&corners, &full.coordinates(&idx));
            let got = full.cell(&idx).unwrap().value().unwrap();
            assert!((got - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn joint_distribution_serde() {
        let j = JointDistribution::new(2, vec![0.45, 0.05, 0.30, 0.20]).unwrap();
        let s = serde_json::to_string(&j).unwrap();
        assert_eq!(s, r#"{"TT":0.45,"TF":0.05,"FT":0.3,"FF":0.2}"#);
        assert_eq!(serde_json::from_str::<JointDistribution>(&s).unwrap(), j);
        assert!(serde_json::from_str::<JointDistribution>(r#"{"TT":1.0}"#).is_err());

        let i = Interpolator::joint("j", JointSpec::Fixed(j));
        let s = serde_json::to_string(&i).unwrap();
        assert_eq!(serde_json::from_str::<Interpolator>(&s).unwrap(), i);
        let b: Interpolator = serde_json::from_str(r#"{"id":"b","kind":"bayes_independent"}"#).unwrap();
        assert_eq!(b, Interpolator::bayes("b"));
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..=4).prop_flat_map(|n| {
            (
                prop::collection::vec(0.0f64..=1.0, 1 << n),
                prop::collection::vec(0.0f64..=1.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn weights_sum_to_one((_c, ps) in instance()) {
            let s: f64 = corner_weights(&ps).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn matches_iterated_lerp((corners, ps) in instance()) {
            let cat = CategoricalTable::complete(ps.len(), &corners).unwrap();
            let v = bayes_point(&cat, &probs(&ps)).unwrap();
            prop_assert!((v - iterated_lerp(&corners, &ps)).abs() <= 1e-12);
        }

        #[test]
        fn convex_and_reproduces_corners((corners, ps) in instance()) {
            let n = ps.len();
            let cat = CategoricalTable::complete(n, &corners).unwrap();
            let v = bayes_point(&cat, &probs(&ps)).unwrap();
            let lo = corners.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = corners.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            for corner in Corner::all(n) {
                let at: Vec<f64> = corner.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
                prop_assert_eq!(bayes_point(&cat, &probs(&at)).unwrap(), corners[corner.key()]);
            }
        }

        #[test]
        fn product_joint_equals_independent((corners, ps) in instance()) {
            let cat = CategoricalTable::complete(ps.len(), &corners).unwrap();
            let joint = JointDistribution::product(&ps).unwrap();
            let a = bayes_joint_point(&cat, &joint).unwrap();
            let b = bayes_point(&cat, &probs(&ps)).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }

        #[test]
        fn monotone_in_a_dominant_coordinate(
            (corners, ps) in instance(),
            axis_seed in 0usize..4,
            lo in 0.0f64..=1.0,
            hi in 0.0f64..=1.0,
        ) {
            let n = ps.len();
            let axis = axis_seed % n;
            // Make axis dominant: for each pair differing only on `axis`,
            // order the true side above the false side.
            let mut corners = corners;
            for c in Corner::all(n).filter(|c| c.bits()[axis]) {
                let mut f = c.bits().to_vec();
                f[axis] = false;
                let fk = Corner::new(f).key();
                let tk = c.key();
                if corners[tk] < corners[fk] {
                    corners.swap(tk, fk);
                }
            }
            let cat = CategoricalTable::complete(n, &corners).unwrap();
            let (a, b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            let mut low = ps.clone();
            low[axis] = a;
            let mut high = ps;
            high[axis] = b;
            let va = bayes_point(&cat, &probs(&low)).unwrap();
            let vb = bayes_point(&cat, &probs(&high)).unwrap();
            prop_assert!(vb >= va - 1e-12);
        }

        #[test]
        fn interpolation_replay_is_exact((corners, ps) in instance()) {
            let cat = CategoricalTable::complete(ps.len(), &corners).unwrap();
            let i = Interpolator::bayes("b").evaluate(&cat, &probs(&ps)).unwrap();
            prop_assert_eq!(i.replay(), i.value);
        }
    }
}
