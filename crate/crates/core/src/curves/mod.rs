//! Listener-editable parameter curves.
//!
//! A [`Curve`] is a piecewise-linear function over normalized song position
//! `[0, 1]`, holding its end values outside the defined range. A [`CurveSet`]
//! bundles the energy, valence and complexity curves that the engine samples
//! once per bar.

mod file;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scalar::Scalar;

pub use file::{CurveFileError, CurvePointsDoc};

/// Two control points closer than this in time are considered the same time.
pub const TIME_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("point index {index} out of range for a curve with {len} points")]
    Index { index: usize, len: usize },
    #[error("cannot remove the only point of a curve")]
    Degenerate,
    #[error("a point already exists at time {time}")]
    DuplicateTime { time: f64 },
    #[error("curve must have at least one point")]
    Empty,
    #[error("point {index} is not strictly after its predecessor")]
    Unsorted { index: usize },
    #[error("non-finite coordinate in point {index}")]
    NonFinite { index: usize },
}

impl CurveError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            CurveError::Index { .. } => "index_error",
            CurveError::Degenerate => "degenerate_curve",
            CurveError::DuplicateTime { .. } => "duplicate_time",
            CurveError::Empty => "empty_curve",
            CurveError::Unsorted { .. } => "unsorted_curve",
            CurveError::NonFinite { .. } => "non_finite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveLabel {
    Energy,
    Valence,
    Complexity,
}

impl CurveLabel {
    pub const ALL: [CurveLabel; 3] = [CurveLabel::Energy, CurveLabel::Valence, CurveLabel::Complexity];

    pub fn as_str(self) -> &'static str {
        match self {
            CurveLabel::Energy => "energy",
            CurveLabel::Valence => "valence",
            CurveLabel::Complexity => "complexity",
        }
    }
}

impl fmt::Display for CurveLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CurveLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CurveLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown curve `{s}`"))
    }
}

/// A curve control point. Both coordinates are clamped to `[0, 1]`.
/// Serialized as a `[time, value]` pair.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ControlPoint<S> {
    time: S,
    value: S,
}

impl<S: Scalar> ControlPoint<S> {
    pub fn new(time: S, value: S) -> Self {
        ControlPoint {
            time: time.unit(),
            value: value.unit(),
        }
    }

    pub fn time(&self) -> S {
        self.time
    }

    pub fn value(&self) -> S {
        self.value
    }
}

impl<S: Scalar + Serialize> Serialize for ControlPoint<S> {
    fn serialize<Ser: Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        (self.time, self.value).serialize(s)
    }
}

impl<'de, S: Scalar + Deserialize<'de>> Deserialize<'de> for ControlPoint<S> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (t, v) = <(S, S)>::deserialize(d)?;
        if !t.is_finite() || !v.is_finite() {
            return Err(serde::de::Error::custom("control point coordinates must be finite"));
        }
        Ok(ControlPoint::new(t, v))
    }
}

/// Serialized as `{"kind": "insert", "point": [t, v]}`,
/// `{"kind": "move", "index": i, "point": [t, v]}` or
/// `{"kind": "remove", "index": i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    from = "CurveEditRepr<S>",
    into = "CurveEditRepr<S>",
    bound(serialize = "S: Scalar + Serialize", deserialize = "S: Scalar + Deserialize<'de>")
)]
pub enum CurveEdit<S: Scalar> {
    Insert(ControlPoint<S>),
    Move { index: usize, point: ControlPoint<S> },
    Remove { index: usize },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound(serialize = "S: Scalar + Serialize", deserialize = "S: Scalar + Deserialize<'de>"))]
enum CurveEditRepr<S: Scalar> {
    Insert { point: ControlPoint<S> },
    Move { index: usize, point: ControlPoint<S> },
    Remove { index: usize },
}

impl<S: Scalar> From<CurveEditRepr<S>> for CurveEdit<S> {
    fn from(r: CurveEditRepr<S>) -> Self {
        match r {
            CurveEditRepr::Insert { point } => CurveEdit::Insert(point),
            CurveEditRepr::Move { index, point } => CurveEdit::Move { index, point },
            CurveEditRepr::Remove { index } => CurveEdit::Remove { index },
        }
    }
}

impl<S: Scalar> From<CurveEdit<S>> for CurveEditRepr<S> {
    fn from(e: CurveEdit<S>) -> Self {
        match e {
            CurveEdit::Insert(point) => CurveEditRepr::Insert { point },
            CurveEdit::Move { index, point } => CurveEditRepr::Move { index, point },
            CurveEdit::Remove { index } => CurveEditRepr::Remove { index },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "S: Scalar + Serialize")]
pub struct Curve<S> {
    label: CurveLabel,
    points: Vec<ControlPoint<S>>,
}

fn too_close<S: Scalar>(a: S, b: S) -> bool {
    (a - b).abs().to_f64_lossy() <= TIME_EPSILON
}

impl<S: Scalar> Curve<S> {
    /// Builds a curve from points that must already be strictly ascending in
    /// time (after clamping).
    pub fn new(label: CurveLabel, points: Vec<ControlPoint<S>>) -> Result<Self, CurveError> {
        if points.is_empty() {
            return Err(CurveError::Empty);
        }
        for (i, p) in points.iter().enumerate() {
            if !p.time.is_finite() || !p.value.is_finite() {
                return Err(CurveError::NonFinite { index: i });
            }
        }
        for i in 1..points.len() {
            if points[i].time <= points[i - 1].time || too_close(points[i].time, points[i - 1].time) {
                return Err(CurveError::Unsorted { index: i });
            }
        }
        Ok(Curve { label, points })
    }

    pub fn constant(label: CurveLabel, value: S) -> Self {
        Curve {
            label,
            points: vec![ControlPoint::new(S::zero(), value)],
        }
    }

    /// Convenience constructor from `(time, value)` pairs.
    pub fn from_pairs(label: CurveLabel, pairs: &[(f64, f64)]) -> Result<Self, CurveError> {
        let points = pairs
            .iter()
            .map(|&(t, v)| ControlPoint::new(S::lit(t), S::lit(v)))
            .collect();
        Curve::new(label, points)
    }

    pub fn label(&self) -> CurveLabel {
        self.label
    }

    pub fn points(&self) -> &[ControlPoint<S>] {
        &self.points
    }

    pub(crate) fn relabel(mut self, label: CurveLabel) -> Self {
        self.label = label;
        self
    }

    /// Piecewise-linear value at song position `t` (clamped to `[0, 1]`).
    pub fn sample(&self, t: S) -> S {
        let t = t.unit();
        let first = self.points[0];
        let last = self.points[self.points.len() - 1];
        if t <= first.time {
            return first.value;
        }
        if t >= last.time {
            return last.value;
        }
        // first index whose time is > t; guaranteed in 1..len
        let hi = self.points.partition_point(|p| p.time <= t);
        let (a, b) = (self.points[hi - 1], self.points[hi]);
        let frac = (t - a.time) / (b.time - a.time);
        (a.value + (b.value - a.value) * frac).unit()
    }

    /// Largest absolute slope between adjacent points.
    pub fn max_slope(&self) -> S {
        self.points
            .windows(2)
            .map(|w| ((w[1].value - w[0].value) / (w[1].time - w[0].time)).abs())
            .fold(S::zero(), S::max)
    }

    fn collides(&self, time: S, skip: Option<usize>) -> bool {
        self.points
            .iter()
            .enumerate()
            .any(|(i, p)| Some(i) != skip && too_close(p.time, time))
    }

    fn insert_sorted(&mut self, point: ControlPoint<S>) {
        let at = self.points.partition_point(|p| p.time < point.time);
        self.points.insert(at, point);
    }

    /// Applies an edit, returning the new curve. The receiver is untouched.
    pub fn edit(&self, op: &CurveEdit<S>) -> Result<Curve<S>, CurveError> {
        let mut next = self.clone();
        let len = self.points.len();
        match *op {
            CurveEdit::Insert(point) => {
                let point = ControlPoint::new(point.time, point.value);
                if self.collides(point.time, None) {
                    return Err(CurveError::DuplicateTime {
                        time: point.time.to_f64_lossy(),
                    });
                }
                next.insert_sorted(point);
            }
            CurveEdit::Move { index, point } => {
                if index >= len {
                    return Err(CurveError::Index { index, len });
                }
                let point = ControlPoint::new(point.time, point.value);
                if self.collides(point.time, Some(index)) {
                    return Err(CurveError::DuplicateTime {
                        time: point.time.to_f64_lossy(),
                    });
                }
                next.points.remove(index);
                next.insert_sorted(point);
            }
            CurveEdit::Remove { index } => {
                if index >= len {
                    return Err(CurveError::Index { index, len });
                }
                if len == 1 {
                    return Err(CurveError::Degenerate);
                }
                next.points.remove(index);
            }
        }
        Ok(next)
    }
}

/// One sample of all three emotional parameters, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: Deserialize<'de>"))]
pub struct EmotionSample<S> {
    pub energy: S,
    pub valence: S,
    pub complexity: S,
}

impl<S: Scalar> EmotionSample<S> {
    pub fn new(energy: S, valence: S, complexity: S) -> Self {
        EmotionSample {
            energy: energy.unit(),
            valence: valence.unit(),
            complexity: complexity.unit(),
        }
    }

    pub fn uniform(v: S) -> Self {
        Self::new(v, v, v)
    }

    pub fn get(&self, label: CurveLabel) -> S {
        match label {
            CurveLabel::Energy => self.energy,
            CurveLabel::Valence => self.valence,
            CurveLabel::Complexity => self.complexity,
        }
    }

    pub fn with(mut self, label: CurveLabel, value: S) -> Self {
        let v = value.unit();
        match label {
            CurveLabel::Energy => self.energy = v,
            CurveLabel::Valence => self.valence = v,
            CurveLabel::Complexity => self.complexity = v,
        }
        self
    }

    pub fn cast<T: Scalar>(&self) -> EmotionSample<T> {
        EmotionSample::new(
            T::lit(self.energy.to_f64_lossy()),
            T::lit(self.valence.to_f64_lossy()),
            T::lit(self.complexity.to_f64_lossy()),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet<S> {
    energy: Curve<S>,
    valence: Curve<S>,
    complexity: Curve<S>,
}

impl<S: Scalar> CurveSet<S> {
    /// Curves are relabelled to match their slot.
    pub fn new(energy: Curve<S>, valence: Curve<S>, complexity: Curve<S>) -> Self {
        CurveSet {
            energy: energy.relabel(CurveLabel::Energy),
            valence: valence.relabel(CurveLabel::Valence),
            complexity: complexity.relabel(CurveLabel::Complexity),
        }
    }

    pub fn constant(energy: S, valence: S, complexity: S) -> Self {
        CurveSet {
            energy: Curve::constant(CurveLabel::Energy, energy),
            valence: Curve::constant(CurveLabel::Valence, valence),
            complexity: Curve::constant(CurveLabel::Complexity, complexity),
        }
    }

    pub fn get(&self, label: CurveLabel) -> &Curve<S> {
        match label {
            CurveLabel::Energy => &self.energy,
            CurveLabel::Valence => &self.valence,
            CurveLabel::Complexity => &self.complexity,
        }
    }

    pub fn energy(&self) -> &Curve<S> {
        &self.energy
    }

    pub fn valence(&self) -> &Curve<S> {
        &self.valence
    }

    pub fn complexity(&self) -> &Curve<S> {
        &self.complexity
    }

    pub fn sample(&self, t: S) -> EmotionSample<S> {
        EmotionSample::new(self.energy.sample(t), self.valence.sample(t), self.complexity.sample(t))
    }

    /// Returns a new set with one curve edited; `self` is unchanged on error.
    pub fn edit(&self, label: CurveLabel, op: &CurveEdit<S>) -> Result<CurveSet<S>, CurveError> {
        let edited = self.get(label).edit(op)?;
        let mut next = self.clone();
        match label {
            CurveLabel::Energy => next.energy = edited,
            CurveLabel::Valence => next.valence = edited,
            CurveLabel::Complexity => next.complexity = edited,
        }
        Ok(next)
    }
}

impl<S: Scalar + Serialize> Serialize for CurveSet<S> {
    fn serialize<Ser: Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        CurvePointsDoc {
            energy: self.energy.points.clone(),
            valence: self.valence.points.clone(),
            complexity: self.complexity.points.clone(),
        }
        .serialize(s)
    }
}

impl<'de, S: Scalar + Deserialize<'de>> Deserialize<'de> for CurveSet<S> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = CurvePointsDoc::<S>::deserialize(d)?;
        doc.into_curve_set()
            .map_err(|(label, e)| serde::de::Error::custom(format!("{label}: {e}")))
    }
}

pub fn sample<S: Scalar>(curve: &Curve<S>, t: S) -> S {
    curve.sample(t)
}

pub fn sample_set<S: Scalar>(curves: &CurveSet<S>, t: S) -> EmotionSample<S> {
    curves.sample(t)
}

pub fn edit<S: Scalar>(curve: &Curve<S>, op: &CurveEdit<S>) -> Result<Curve<S>, CurveError> {
    curve.edit(op)
}

/// Normalized position of bar `bar` in a song of `length_bars` bars.
pub fn song_position<S: Scalar>(bar: u32, length_bars: u32) -> S {
    let denom = length_bars.saturating_sub(1).max(1);
    (S::lit(bar as f64) / S::lit(denom as f64)).unit()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(pairs: &[(f64, f64)]) -> Curve<f64> {
        Curve::from_pairs(CurveLabel::Energy, pairs).unwrap()
    }

    fn pairs(c: &Curve<f64>) -> Vec<(f64, f64)> {
        c.points().iter().map(|p| (p.time(), p.value())).collect()
    }

    #[test]
    fn sample_examples() {
        assert_eq!(curve(&[(0.0, 0.0), (1.0, 1.0)]).sample(0.25), 0.25);
        assert_eq!(curve(&[(0.3, 0.7)]).sample(0.9), 0.7);
        // 0.8 + (0.4 - 0.8) * (0.75 - 0.5) / 0.5 = 0.6
        let oracle = 0.8 + (0.4 - 0.8) * (0.75 - 0.5) / 0.5;
        let got = curve(&[(0.0, 0.2), (0.5, 0.8), (1.0, 0.4)]).sample(0.75);
        assert!((got - oracle).abs() < 1e-12);
        assert!((got - 0.6).abs() < 1e-12);
    }

    #[test]
    fn sample_holds_outside_range_and_clamps_t() {
        let c = curve(&[(0.2, 0.1), (0.8, 0.9)]);
        assert_eq!(c.sample(0.0), 0.1);
        assert_eq!(c.sample(-3.0), 0.1);
        assert_eq!(c.sample(1.0), 0.9);
        assert_eq!(c.sample(7.0), 0.9);
        assert_eq!(c.sample(f64::NAN), 0.1);
    }

    #[test]
    fn sample_works_in_f32() {
        let c: Curve<f32> = Curve::from_pairs(CurveLabel::Valence, &[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        assert_eq!(c.sample(0.5f32), 0.5f32);
    }

    #[test]
    fn sample_set_examples() {
        let flat = CurveSet::constant(0.5, 0.5, 0.5);
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(flat.sample(t), EmotionSample::new(0.5, 0.5, 0.5));
        }
        let rising = CurveSet::new(
            curve(&[(0.0, 0.0), (1.0, 1.0)]),
            Curve::constant(CurveLabel::Valence, 0.0),
            Curve::constant(CurveLabel::Complexity, 0.0),
        );
        assert_eq!(rising.sample(1.0), EmotionSample::new(1.0, 0.0, 0.0));
        assert_eq!(rising.sample(0.4).energy, rising.energy().sample(0.4));
    }

    #[test]
    fn edit_examples() {
        let c = curve(&[(0.0, 0.0), (1.0, 1.0)]);
        let inserted = c.edit(&CurveEdit::Insert(ControlPoint::new(0.5, 0.5))).unwrap();
        assert_eq!(pairs(&inserted), [(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)]);

        let single = curve(&[(0.3, 0.3)]);
        assert_eq!(single.edit(&CurveEdit::Remove { index: 0 }), Err(CurveError::Degenerate));

        let moved = inserted
            .edit(&CurveEdit::Move {
                index: 1,
                point: ControlPoint::new(0.2, 0.9),
            })
            .unwrap();
        assert_eq!(pairs(&moved), [(0.0, 0.0), (0.2, 0.9), (1.0, 1.0)]);
    }

    #[test]
    fn edit_errors() {
        let c = curve(&[(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(
            c.edit(&CurveEdit::Remove { index: 2 }),
            Err(CurveError::Index { index: 2, len: 2 })
        );
        assert!(matches!(
            c.edit(&CurveEdit::Insert(ControlPoint::new(1.0 - 1e-12, 0.3))),
            Err(CurveError::DuplicateTime { .. })
        ));
        assert!(matches!(
            c.edit(&CurveEdit::Move { index: 0, point: ControlPoint::new(1.0, 0.5) }),
            Err(CurveError::DuplicateTime { .. })
        ));
        // moving a point onto its own time is fine
        let same = c
            .edit(&CurveEdit::Move { index: 0, point: ControlPoint::new(0.0, 0.4) })
            .unwrap();
        assert_eq!(pairs(&same), [(0.0, 0.4), (1.0, 1.0)]);
        // a move past a neighbour re-sorts
        let three = curve(&[(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)]);
        let crossed = three
            .edit(&CurveEdit::Move { index: 0, point: ControlPoint::new(0.7, 0.2) })
            .unwrap();
        assert_eq!(pairs(&crossed), [(0.5, 0.5), (0.7, 0.2), (1.0, 1.0)]);
    }

    #[test]
    fn insert_clamps_coordinates() {
        let c = curve(&[(0.5, 0.5)]);
        let e = c.edit(&CurveEdit::Insert(ControlPoint::new(-1.0, 2.0))).unwrap();
        assert_eq!(pairs(&e), [(0.0, 1.0), (0.5, 0.5)]);
    }

    #[test]
    fn new_rejects_bad_point_lists() {
        assert_eq!(Curve::<f64>::new(CurveLabel::Energy, vec![]), Err(CurveError::Empty));
        assert_eq!(
            Curve::<f64>::from_pairs(CurveLabel::Energy, &[(0.5, 0.0), (0.5, 1.0)]),
            Err(CurveError::Unsorted { index: 1 })
        );
        assert_eq!(
            Curve::<f64>::from_pairs(CurveLabel::Energy, &[(0.6, 0.0), (0.5, 1.0)]),
            Err(CurveError::Unsorted { index: 1 })
        );
    }

    #[test]
    fn curve_set_edit_is_atomic() {
        let set = CurveSet::constant(0.1, 0.2, 0.3);
        let err = set.edit(CurveLabel::Valence, &CurveEdit::Remove { index: 0 });
        assert_eq!(err, Err(CurveError::Degenerate));
        assert_eq!(set.valence().sample(0.5), 0.2);
    }

    #[test]
    fn song_position_mapping() {
        assert_eq!(song_position::<f64>(0, 1), 0.0);
        assert_eq!(song_position::<f64>(3, 4), 1.0);
        assert_eq!(song_position::<f64>(1, 5), 0.25);
    }

    fn arb_curve() -> impl Strategy<Value = Curve<f64>> {
        prop::collection::btree_map(0u32..=1000, 0.0f64..=1.0, 1..8).prop_map(|m| {
            let pts = m
                .into_iter()
                .map(|(t, v)| ControlPoint::new(t as f64 / 1000.0, v))
                .collect();
            Curve::new(CurveLabel::Energy, pts).unwrap()
        })
    }

    fn arb_edit() -> impl Strategy<Value = CurveEdit<f64>> {
        prop_oneof![
            (-0.5f64..1.5, -0.5f64..1.5).prop_map(|(t, v)| CurveEdit::Insert(ControlPoint::new(t, v))),
            (0usize..10, -0.5f64..1.5, -0.5f64..1.5)
                .prop_map(|(i, t, v)| CurveEdit::Move { index: i, point: ControlPoint::new(t, v) }),
            (0usize..10).prop_map(|i| CurveEdit::Remove { index: i }),
        ]
    }

    proptest! {
        #[test]
        fn sample_is_in_unit_range(c in arb_curve(), t in -2.0f64..3.0) {
            let v = c.sample(t);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn sample_is_lipschitz(c in arb_curve(), t in 0.0f64..1.0, eps in 1e-9f64..1e-3) {
            let bound = c.max_slope() * eps + 1e-12;
            prop_assert!((c.sample(t) - c.sample(t + eps)).abs() <= bound);
        }

        #[test]
        fn sample_hits_control_points(c in arb_curve()) {
            for p in c.points() {
                prop_assert!((c.sample(p.time()) - p.value()).abs() < 1e-12);
            }
        }

        #[test]
        fn edits_preserve_invariants(c in arb_curve(), ops in prop::collection::vec(arb_edit(), 0..30)) {
            let mut cur = c;
            for op in &ops {
                if let Ok(next) = cur.edit(op) {
                    cur = next;
                }
                let pts = cur.points();
                prop_assert!(!pts.is_empty());
                prop_assert!(pts.windows(2).all(|w| w[1].time() - w[0].time() > TIME_EPSILON));
                prop_assert!(pts.iter().all(|p| (0.0..=1.0).contains(&p.time()) && (0.0..=1.0).contains(&p.value())));
                // rebuilding through the validating constructor must agree
                prop_assert!(Curve::new(CurveLabel::Energy, pts.to_vec()).is_ok());
            }
        }
    }

    #[test]
    fn edit_ops_serialize_with_kind_tag() {
        let op: CurveEdit<f64> = serde_json::from_str(r#"{"kind":"move","index":1,"point":[0.5,0.9]}"#).unwrap();
        assert_eq!(op, CurveEdit::Move { index: 1, point: ControlPoint::new(0.5, 0.9) });
        let ins = CurveEdit::Insert(ControlPoint::new(0.25, 0.5f64));
        assert_eq!(serde_json::to_string(&ins).unwrap(), r#"{"kind":"insert","point":[0.25,0.5]}"#);
        assert!(serde_json::from_str::<CurveEdit<f64>>(r#"{"kind":"remove"}"#).is_err());
    }
}
