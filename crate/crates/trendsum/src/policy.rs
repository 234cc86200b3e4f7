//! Leaf policies (linear separators over feature vectors) and complex
//! policies (boolean expression trees over leaf policies), with the built-in
//! catalog used by the shipped experiment scenarios.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    FeatureVector, IDX_CONTAINS_MAX, IDX_DURATION, IDX_KIND_ANOMALY, IDX_KIND_CYCLE,
    IDX_KIND_JUMP, IDX_KIND_LINEAR, IDX_MAGNITUDE, IDX_MAX_VALUE, IDX_SLOPE, IDX_T_END, M,
};
use crate::trend::TrendSet;

/// Weight used to gate a separator on a kind one-hot so the condition on the
/// remaining features cannot override the gate.
const GATE: f64 = 1e3;

/// Default threshold for pi2 ("slope greater than a threshold"), in
/// normalized slope units.
pub const PI2_SLOPE_THRESHOLD: f64 = 0.3;

/// Default threshold for the high_value leaf used by p3.
pub const HIGH_VALUE_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arity {
    Single,
    Pairwise,
}

/// A linear-separator policy: true iff `a . v + b >= 0` (single) or
/// `a . v + b_vec . v' + c >= 0` (pairwise). Ties at exactly zero are true.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafPolicy {
    pub id: String,
    pub arity: Arity,
    pub a: Vec<f64>,
    /// Second-trend weights; present iff the arity is pairwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_vec: Option<Vec<f64>>,
    /// The scalar offset (`b` for single policies, `c` for pairwise).
    pub offset: f64,
    /// Soft-evaluation steepness.
    pub sharpness: f64,
}

impl LeafPolicy {
    pub fn single(id: impl Into<String>, a: Vec<f64>, offset: f64) -> Self {
        LeafPolicy { id: id.into(), arity: Arity::Single, a, b_vec: None, offset, sharpness: 8.0 }
    }

    pub fn pairwise(id: impl Into<String>, a: Vec<f64>, b_vec: Vec<f64>, offset: f64) -> Self {
        LeafPolicy {
            id: id.into(),
            arity: Arity::Pairwise,
            a,
            b_vec: Some(b_vec),
            offset,
            sharpness: 8.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.len() != M {
            return Err(Error::DimensionMismatch { expected: M, got: self.a.len() });
        }
        match (self.arity, &self.b_vec) {
            (Arity::Single, None) => {}
            (Arity::Pairwise, Some(b)) if b.len() == M => {}
            (Arity::Pairwise, Some(b)) => {
                return Err(Error::DimensionMismatch { expected: M, got: b.len() })
            }
            _ => return Err(Error::ArityMismatch(self.id.clone())),
        }
        if !(self.sharpness > 0.0) {
            return Err(Error::InvalidConfig("sharpness must be > 0".into()));
        }
        Ok(())
    }

    /// The signed left-hand side of the indicator rule.
    pub fn margin(&self, v: &FeatureVector, v_other: Option<&FeatureVector>) -> Result<f64> {
        let mut m = self.offset;
        for (w, x) in self.a.iter().zip(v.as_slice()) {
            m += w * x;
        }
        match (self.arity, v_other, &self.b_vec) {
            (Arity::Single, None, _) => Ok(m),
            (Arity::Pairwise, Some(other), Some(b)) => {
                for (w, x) in b.iter().zip(other.as_slice()) {
                    m += w * x;
                }
                Ok(m)
            }
            _ => Err(Error::ArityMismatch(self.id.clone())),
        }
    }
}

/// Hard indicator evaluation; boundary value 0 counts as true.
pub fn eval_leaf_hard(
    policy: &LeafPolicy,
    v: &FeatureVector,
    v_other: Option<&FeatureVector>,
) -> Result<bool> {
    Ok(policy.margin(v, v_other)? >= 0.0)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sigmoid-smoothed evaluation; converges to the hard indicator as the
/// policy's sharpness grows.
pub fn eval_leaf_soft(
    policy: &LeafPolicy,
    v: &FeatureVector,
    v_other: Option<&FeatureVector>,
) -> Result<f64> {
    Ok(sigmoid(policy.sharpness * policy.margin(v, v_other)?))
}

/// Expression over pairwise leaves, evaluated on a fixed (target, other)
/// pair inside a quantifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum PairExpr {
    Leaf { id: String },
    Not { child: Box<PairExpr> },
    And { children: Vec<PairExpr> },
    Or { children: Vec<PairExpr> },
    Xor { left: Box<PairExpr>, right: Box<PairExpr> },
}

/// Boolean expression tree defining a complex policy. `Leaf` nodes reference
/// single-arity leaf policies evaluated on the target trend; the quantifier
/// nodes evaluate a pairwise expression against every other trend in the
/// set (vacuously true/false on a singleton set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Structure {
    Leaf { id: String },
    Not { child: Box<Structure> },
    And { children: Vec<Structure> },
    Or { children: Vec<Structure> },
    Xor { left: Box<Structure>, right: Box<Structure> },
    ForallOther { body: PairExpr },
    ExistsOther { body: PairExpr },
}

impl Structure {
    pub fn leaf(id: &str) -> Structure {
        Structure::Leaf { id: id.into() }
    }

    pub fn and(children: Vec<Structure>) -> Structure {
        Structure::And { children }
    }

    pub fn forall(body: PairExpr) -> Structure {
        Structure::ForallOther { body }
    }

    /// Ids of every referenced leaf policy, with the arity each reference
    /// requires. Deterministically ordered.
    pub fn referenced_leaves(&self) -> BTreeMap<String, Arity> {
        let mut out = BTreeMap::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut BTreeMap<String, Arity>) {
        match self {
            Structure::Leaf { id } => {
                out.insert(id.clone(), Arity::Single);
            }
            Structure::Not { child } => child.collect_leaves(out),
            Structure::And { children } | Structure::Or { children } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
            Structure::Xor { left, right } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
            Structure::ForallOther { body } | Structure::ExistsOther { body } => {
                collect_pair_leaves(body, out);
            }
        }
    }
}

fn collect_pair_leaves(expr: &PairExpr, out: &mut BTreeMap<String, Arity>) {
    match expr {
        PairExpr::Leaf { id } => {
            out.insert(id.clone(), Arity::Pairwise);
        }
        PairExpr::Not { child } => collect_pair_leaves(child, out),
        PairExpr::And { children } | PairExpr::Or { children } => {
            for c in children {
                collect_pair_leaves(c, out);
            }
        }
        PairExpr::Xor { left, right } => {
            collect_pair_leaves(left, out);
            collect_pair_leaves(right, out);
        }
    }
}

/// Provider of leaf-policy probabilities, so structures evaluate identically
/// whether leaves are ground-truth separators or learned classifiers.
pub trait LeafSource {
    fn soft(&self, id: &str, v: &FeatureVector, other: Option<&FeatureVector>) -> Result<f64>;

    fn hard(&self, id: &str, v: &FeatureVector, other: Option<&FeatureVector>) -> Result<bool> {
        Ok(self.soft(id, v, other)? >= 0.5)
    }
}

/// Immutable collection of leaf separators keyed by id.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PolicyCatalog {
    pub leaves: BTreeMap<String, LeafPolicy>,
}

impl PolicyCatalog {
    pub fn from_leaves(leaves: impl IntoIterator<Item = LeafPolicy>) -> Self {
        PolicyCatalog {
            leaves: leaves.into_iter().map(|l| (l.id.clone(), l)).collect(),
        }
    }

    pub fn get(&self, id: &str) -> Result<&LeafPolicy> {
        self.leaves.get(id).ok_or_else(|| Error::UnknownPolicy(id.into()))
    }
}

impl LeafSource for PolicyCatalog {
    fn soft(&self, id: &str, v: &FeatureVector, other: Option<&FeatureVector>) -> Result<f64> {
        eval_leaf_soft(self.get(id)?, v, other)
    }

    fn hard(&self, id: &str, v: &FeatureVector, other: Option<&FeatureVector>) -> Result<bool> {
        eval_leaf_hard(self.get(id)?, v, other)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Hard,
    Soft,
}

fn eval_pair_hard(
    expr: &PairExpr,
    v: &FeatureVector,
    other: &FeatureVector,
    leaves: &dyn LeafSource,
) -> Result<bool> {
    Ok(match expr {
        PairExpr::Leaf { id } => leaves.hard(id, v, Some(other))?,
        PairExpr::Not { child } => !eval_pair_hard(child, v, other, leaves)?,
        PairExpr::And { children } => {
            let mut acc = true;
            for c in children {
                acc &= eval_pair_hard(c, v, other, leaves)?;
            }
            acc
        }
        PairExpr::Or { children } => {
            let mut acc = false;
            for c in children {
                acc |= eval_pair_hard(c, v, other, leaves)?;
            }
            acc
        }
        PairExpr::Xor { left, right } => {
            eval_pair_hard(left, v, other, leaves)? != eval_pair_hard(right, v, other, leaves)?
        }
    })
}

fn eval_pair_soft(
    expr: &PairExpr,
    v: &FeatureVector,
    other: &FeatureVector,
    leaves: &dyn LeafSource,
) -> Result<f64> {
    Ok(match expr {
        PairExpr::Leaf { id } => leaves.soft(id, v, Some(other))?,
        PairExpr::Not { child } => 1.0 - eval_pair_soft(child, v, other, leaves)?,
        PairExpr::And { children } => {
            let mut acc = 1.0;
            for c in children {
                acc *= eval_pair_soft(c, v, other, leaves)?;
            }
            acc
        }
        PairExpr::Or { children } => {
            let mut acc = 1.0;
            for c in children {
                acc *= 1.0 - eval_pair_soft(c, v, other, leaves)?;
            }
            1.0 - acc
        }
        PairExpr::Xor { left, right } => {
            let p = eval_pair_soft(left, v, other, leaves)?;
            let q = eval_pair_soft(right, v, other, leaves)?;
            p + q - 2.0 * p * q
        }
    })
}

fn others<'a>(set: &'a TrendSet, target: usize) -> impl Iterator<Item = &'a FeatureVector> {
    set.features
        .iter()
        .enumerate()
        .filter(move |(i, _)| *i != target)
        .map(|(_, f)| f)
}

fn eval_structure_hard(
    s: &Structure,
    target: usize,
    set: &TrendSet,
    leaves: &dyn LeafSource,
) -> Result<bool> {
    let v = &set.features[target];
    Ok(match s {
        Structure::Leaf { id } => leaves.hard(id, v, None)?,
        Structure::Not { child } => !eval_structure_hard(child, target, set, leaves)?,
        Structure::And { children } => {
            let mut acc = true;
            for c in children {
                acc &= eval_structure_hard(c, target, set, leaves)?;
            }
            acc
        }
        Structure::Or { children } => {
            let mut acc = false;
            for c in children {
                acc |= eval_structure_hard(c, target, set, leaves)?;
            }
            acc
        }
        Structure::Xor { left, right } => {
            eval_structure_hard(left, target, set, leaves)?
                != eval_structure_hard(right, target, set, leaves)?
        }
        Structure::ForallOther { body } => {
            let mut acc = true;
            for other in others(set, target) {
                acc &= eval_pair_hard(body, v, other, leaves)?;
            }
            acc // vacuously true with no others
        }
        Structure::ExistsOther { body } => {
            let mut acc = false;
            for other in others(set, target) {
                acc |= eval_pair_hard(body, v, other, leaves)?;
            }
            acc
        }
    })
}

fn eval_structure_soft(
    s: &Structure,
    target: usize,
    set: &TrendSet,
    leaves: &dyn LeafSource,
) -> Result<f64> {
    let v = &set.features[target];
    Ok(match s {
        Structure::Leaf { id } => leaves.soft(id, v, None)?,
        Structure::Not { child } => 1.0 - eval_structure_soft(child, target, set, leaves)?,
        Structure::And { children } => {
            let mut acc = 1.0;
            for c in children {
                acc *= eval_structure_soft(c, target, set, leaves)?;
            }
            acc
        }
        Structure::Or { children } => {
            let mut acc = 1.0;
            for c in children {
                acc *= 1.0 - eval_structure_soft(c, target, set, leaves)?;
            }
            1.0 - acc
        }
        Structure::Xor { left, right } => {
            let p = eval_structure_soft(left, target, set, leaves)?;
            let q = eval_structure_soft(right, target, set, leaves)?;
            p + q - 2.0 * p * q
        }
        Structure::ForallOther { body } => {
            let mut acc = 1.0;
            for other in others(set, target) {
                acc *= eval_pair_soft(body, v, other, leaves)?;
            }
            acc
        }
        Structure::ExistsOther { body } => {
            let mut acc = 1.0;
            for other in others(set, target) {
                acc *= 1.0 - eval_pair_soft(body, v, other, leaves)?;
            }
            1.0 - acc
        }
    })
}

/// Evaluate a complex-policy structure for one trend of a set. Hard mode
/// returns exactly 0.0 or 1.0; soft mode uses independent-product semantics.
pub fn eval_structure(
    s: &Structure,
    target: usize,
    set: &TrendSet,
    mode: EvalMode,
    leaves: &dyn LeafSource,
) -> Result<f64> {
    if target >= set.len() {
        return Err(Error::DimensionMismatch { expected: set.len(), got: target });
    }
    match mode {
        EvalMode::Hard => Ok(if eval_structure_hard(s, target, set, leaves)? { 1.0 } else { 0.0 }),
        EvalMode::Soft => eval_structure_soft(s, target, set, leaves),
    }
}

fn one_hot(idx: usize, w: f64) -> Vec<f64> {
    let mut a = vec![0.0; M];
    a[idx] = w;
    a
}

/// Ground-truth leaf catalog (Table-style policies plus the helper leaves
/// the complex catalog depends on).
pub fn builtin_leaf(id: &str) -> Result<LeafPolicy> {
    let leaf = match id {
        // increasing linear trend (kind-gated so non-linear trends are false)
        "pi1" => {
            let mut a = one_hot(IDX_KIND_LINEAR, GATE);
            a[IDX_SLOPE] = 1.0;
            LeafPolicy::single(id, a, -GATE)
        }
        // linear trend with slope >= threshold
        "pi2" => {
            let mut a = one_hot(IDX_KIND_LINEAR, GATE);
            a[IDX_SLOPE] = 1.0;
            LeafPolicy::single(id, a, -GATE - PI2_SLOPE_THRESHOLD)
        }
        // trend containing the series maximum
        "pi3" => LeafPolicy::single(id, one_hot(IDX_CONTAINS_MAX, 1.0), -0.5),
        // specific trend type
        "pi4" | "pi4_linear" => LeafPolicy::single(id, one_hot(IDX_KIND_LINEAR, 1.0), -0.5),
        "pi4_jump" => LeafPolicy::single(id, one_hot(IDX_KIND_JUMP, 1.0), -0.5),
        "pi4_cycle" => LeafPolicy::single(id, one_hot(IDX_KIND_CYCLE, 1.0), -0.5),
        "pi4_anomaly" => LeafPolicy::single(id, one_hot(IDX_KIND_ANOMALY, 1.0), -0.5),
        // more recent than the other trend
        "pi5" => LeafPolicy::pairwise(id, one_hot(IDX_T_END, 1.0), one_hot(IDX_T_END, -1.0), 0.0),
        // greater spanning interval than the other trend
        "pi6" => {
            LeafPolicy::pairwise(id, one_hot(IDX_DURATION, 1.0), one_hot(IDX_DURATION, -1.0), 0.0)
        }
        // more extreme magnitude than the other trend
        "pi7" => {
            LeafPolicy::pairwise(id, one_hot(IDX_MAGNITUDE, 1.0), one_hot(IDX_MAGNITUDE, -1.0), 0.0)
        }
        // downward jump (kind-gated; jump trends carry signed delta in the
        // slope slot)
        "neg_delta_jump" => {
            let mut a = one_hot(IDX_KIND_JUMP, GATE);
            a[IDX_SLOPE] = -1.0;
            LeafPolicy::single(id, a, -GATE)
        }
        // trend whose peak value is high
        "high_value" => {
            LeafPolicy::single(id, one_hot(IDX_MAX_VALUE, 1.0), -HIGH_VALUE_THRESHOLD)
        }
        // steeper slope than the other trend
        "slope_cmp" => {
            LeafPolicy::pairwise(id, one_hot(IDX_SLOPE, 1.0), one_hot(IDX_SLOPE, -1.0), 0.0)
        }
        // both trends share the given kind
        "same_kind_linear" => LeafPolicy::pairwise(
            id,
            one_hot(IDX_KIND_LINEAR, 1.0),
            one_hot(IDX_KIND_LINEAR, 1.0),
            -1.5,
        ),
        "same_kind_jump" => LeafPolicy::pairwise(
            id,
            one_hot(IDX_KIND_JUMP, 1.0),
            one_hot(IDX_KIND_JUMP, 1.0),
            -1.5,
        ),
        "same_kind_cycle" => LeafPolicy::pairwise(
            id,
            one_hot(IDX_KIND_CYCLE, 1.0),
            one_hot(IDX_KIND_CYCLE, 1.0),
            -1.5,
        ),
        "same_kind_anomaly" => LeafPolicy::pairwise(
            id,
            one_hot(IDX_KIND_ANOMALY, 1.0),
            one_hot(IDX_KIND_ANOMALY, 1.0),
            -1.5,
        ),
        _ => return Err(Error::UnknownPolicy(id.into())),
    };
    Ok(leaf)
}

/// "Different trend types" for a (target, other) pair. One-hot kinds make
/// this an XOR-like relation, so it is a derived expression over the
/// same-kind comparison leaves rather than a single linear separator.
pub fn different_kind_body() -> PairExpr {
    PairExpr::Not {
        child: Box::new(PairExpr::Or {
            children: ["same_kind_linear", "same_kind_jump", "same_kind_cycle", "same_kind_anomaly"]
                .iter()
                .map(|id| PairExpr::Leaf { id: (*id).into() })
                .collect(),
        }),
    }
}

/// Ground-truth complex policy catalog (p1..p9).
pub fn builtin_complex(id: &str) -> Result<Structure> {
    let pleaf = |id: &str| PairExpr::Leaf { id: id.into() };
    let s = match id {
        // linear and increasing
        "p1" => Structure::and(vec![Structure::leaf("pi4_linear"), Structure::leaf("pi1")]),
        // jump point and downward
        "p2" => Structure::and(vec![Structure::leaf("pi4_jump"), Structure::leaf("neg_delta_jump")]),
        // extreme point and high value
        "p3" => Structure::and(vec![Structure::leaf("pi3"), Structure::leaf("high_value")]),
        // linear and highest spanning interval
        "p4" => Structure::and(vec![Structure::leaf("pi4_linear"), Structure::forall(pleaf("pi6"))]),
        // linear and sharpest increase
        "p5" => {
            Structure::and(vec![Structure::leaf("pi4_linear"), Structure::forall(pleaf("slope_cmp"))])
        }
        // jump point and sharpest
        "p6" => Structure::and(vec![Structure::leaf("pi4_jump"), Structure::forall(pleaf("pi7"))]),
        // jump point and most recent
        "p7" => Structure::and(vec![Structure::leaf("pi4_jump"), Structure::forall(pleaf("pi5"))]),
        // jump point and unique; under the jump gate, "every other trend has
        // a different type" reduces to "no other trend is a jump"
        "p8" => Structure::and(vec![
            Structure::leaf("pi4_jump"),
            Structure::forall(PairExpr::Not { child: Box::new(pleaf("same_kind_jump")) }),
        ]),
        // linear and most recent
        "p9" => Structure::and(vec![Structure::leaf("pi4_linear"), Structure::forall(pleaf("pi5"))]),
        _ => return Err(Error::UnknownPolicy(id.into())),
    };
    Ok(s)
}

/// A named bundle of complex policies with the leaf catalog they reference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub complex_policies: Vec<(String, Structure)>,
    pub leaf_catalog: Vec<LeafPolicy>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        let catalog: BTreeMap<&str, &LeafPolicy> =
            self.leaf_catalog.iter().map(|l| (l.id.as_str(), l)).collect();
        for leaf in &self.leaf_catalog {
            leaf.validate()?;
        }
        for (name, structure) in &self.complex_policies {
            if !names.insert(name.clone()) {
                return Err(Error::InvalidConfig(format!("duplicate complex policy {name}")));
            }
            for (id, arity) in structure.referenced_leaves() {
                match catalog.get(id.as_str()) {
                    None => return Err(Error::UnknownPolicy(id)),
                    Some(leaf) if leaf.arity != arity => {
                        return Err(Error::ArityMismatch(id));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn catalog(&self) -> PolicyCatalog {
        PolicyCatalog::from_leaves(self.leaf_catalog.iter().cloned())
    }

    /// The scenario's ground-truth final policy: the equal-weight
    /// disjunction of its complex policies, hard-evaluated with the
    /// ground-truth leaf catalog.
    pub fn ground_truth_label(&self, target: usize, set: &TrendSet) -> Result<bool> {
        let catalog = self.catalog();
        for (_, structure) in &self.complex_policies {
            if eval_structure(structure, target, set, EvalMode::Hard, &catalog)? == 1.0 {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

fn scenario_from(id: &str, policies: Vec<(&str, Structure)>) -> Result<Scenario> {
    let mut leaf_ids = BTreeMap::new();
    for (_, s) in &policies {
        leaf_ids.extend(s.referenced_leaves());
    }
    let leaf_catalog = leaf_ids
        .keys()
        .map(|id| builtin_leaf(id))
        .collect::<Result<Vec<_>>>()?;
    let scenario = Scenario {
        id: id.into(),
        complex_policies: policies.into_iter().map(|(n, s)| (n.into(), s)).collect(),
        leaf_catalog,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Shipped scenario presets for the two experiments.
pub fn builtin_scenario(id: &str) -> Result<Scenario> {
    let pleaf = |id: &str| PairExpr::Leaf { id: id.into() };
    match id {
        "exp1-pi1" => scenario_from(id, vec![("pi1", Structure::leaf("pi1"))]),
        "exp1-pi2" => scenario_from(id, vec![("pi2", Structure::leaf("pi2"))]),
        "exp1-pi3" => scenario_from(id, vec![("pi3", Structure::leaf("pi3"))]),
        "exp1-pi4" => scenario_from(id, vec![("pi4", Structure::leaf("pi4_linear"))]),
        "exp1-pi5" => scenario_from(id, vec![("pi5", Structure::forall(pleaf("pi5")))]),
        "exp1-pi6" => scenario_from(id, vec![("pi6", Structure::forall(pleaf("pi6")))]),
        "exp1-pi7" => scenario_from(id, vec![("pi7", Structure::forall(pleaf("pi7")))]),
        "exp2-p1p2" => scenario_from(id, vec![("p1", builtin_complex("p1")?), ("p2", builtin_complex("p2")?)]),
        "exp2-p1p2p3" => scenario_from(
            id,
            vec![
                ("p1", builtin_complex("p1")?),
                ("p2", builtin_complex("p2")?),
                ("p3", builtin_complex("p3")?),
            ],
        ),
        "exp2-p1p4" => scenario_from(id, vec![("p1", builtin_complex("p1")?), ("p4", builtin_complex("p4")?)]),
        "exp2-p5p6" => scenario_from(id, vec![("p5", builtin_complex("p5")?), ("p6", builtin_complex("p6")?)]),
        "exp2-p3p5p7" => scenario_from(
            id,
            vec![
                ("p3", builtin_complex("p3")?),
                ("p5", builtin_complex("p5")?),
                ("p7", builtin_complex("p7")?),
            ],
        ),
        "exp2-p3p5p8" => scenario_from(
            id,
            vec![
                ("p3", builtin_complex("p3")?),
                ("p5", builtin_complex("p5")?),
                ("p8", builtin_complex("p8")?),
            ],
        ),
        "exp2-p4p5p9" => scenario_from(
            id,
            vec![
                ("p4", builtin_complex("p4")?),
                ("p5", builtin_complex("p5")?),
                ("p9", builtin_complex("p9")?),
            ],
        ),
        _ => Err(Error::UnknownScenario(id.into())),
    }
}

/// Ids of every shipped scenario preset, experiment 1 first.
pub fn builtin_scenario_ids() -> &'static [&'static str] {
    &[
        "exp1-pi1", "exp1-pi2", "exp1-pi3", "exp1-pi4", "exp1-pi5", "exp1-pi6", "exp1-pi7",
        "exp2-p1p2", "exp2-p1p2p3", "exp2-p1p4", "exp2-p5p6", "exp2-p3p5p7", "exp2-p3p5p8",
        "exp2-p4p5p9",
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{
        IDX_KIND_JUMP, IDX_KIND_LINEAR, IDX_SLOPE, IDX_T_END, IDX_T_START, M,
    };
    use crate::trend::{Trend, TrendParams, TrendSet};

    fn fv(entries: &[(usize, f64)]) -> FeatureVector {
        let mut f = [0.0; M];
        for &(i, x) in entries {
            f[i] = x;
        }
        FeatureVector(f)
    }

    fn dummy_trend() -> Trend {
        Trend {
            t_start: 0.0,
            t_end: 1.0,
            idx_start: 0,
            idx_end: 1,
            params: TrendParams::Statistical { mean: 0.0, std: 1.0 },
        }
    }

    fn set_of(features: Vec<FeatureVector>) -> TrendSet {
        let trends = features.iter().map(|_| dummy_trend()).collect();
        TrendSet::new("test", trends, features).unwrap()
    }

    fn gt_catalog(ids: &[&str]) -> PolicyCatalog {
        PolicyCatalog::from_leaves(ids.iter().map(|id| builtin_leaf(id).unwrap()))
    }

    #[test]
    fn pi1_increasing_linear_and_boundary() {
        let pi1 = builtin_leaf("pi1").unwrap();
        let up = fv(&[(IDX_KIND_LINEAR, 1.0), (IDX_SLOPE, 0.7)]);
        assert!(eval_leaf_hard(&pi1, &up, None).unwrap());
        // tie at the boundary counts as true
        let flat = fv(&[(IDX_KIND_LINEAR, 1.0), (IDX_SLOPE, 0.0)]);
        assert!(eval_leaf_hard(&pi1, &flat, None).unwrap());
        // non-linear trends are false regardless of the slope slot
        let stat = fv(&[]);
        assert!(!eval_leaf_hard(&pi1, &stat, None).unwrap());
    }

    #[test]
    fn pi5_prefers_more_recent() {
        let pi5 = builtin_leaf("pi5").unwrap();
        let later = fv(&[(IDX_T_END, 0.9)]);
        let earlier = fv(&[(IDX_T_END, 0.4)]);
        assert!(eval_leaf_hard(&pi5, &later, Some(&earlier)).unwrap());
        assert!(!eval_leaf_hard(&pi5, &earlier, Some(&later)).unwrap());
    }

    #[test]
    fn arity_mismatch_is_an_error() {
        let pi5 = builtin_leaf("pi5").unwrap();
        assert!(eval_leaf_hard(&pi5, &fv(&[]), None).is_err());
        let pi1 = builtin_leaf("pi1").unwrap();
        assert!(pi1.margin(&fv(&[]), Some(&fv(&[]))).is_err());
    }

    #[test]
    fn soft_closed_forms() {
        let mut leaf = LeafPolicy::single("t", vec![0.0; M], 0.0);
        assert_eq!(eval_leaf_soft(&leaf, &fv(&[]), None).unwrap(), 0.5);
        leaf.offset = 1e9;
        assert_eq!(eval_leaf_soft(&leaf, &fv(&[]), None).unwrap(), 1.0);
        // margin 0.25, sharpness 8 -> 1/(1+e^-2)
        leaf.offset = 0.25;
        leaf.sharpness = 8.0;
        let p = eval_leaf_soft(&leaf, &fv(&[]), None).unwrap();
        assert!((p - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-12);
        assert!((p - 0.8808).abs() < 1e-4);
    }

    #[test]
    fn p9_selects_latest_linear() {
        let p9 = builtin_complex("p9").unwrap();
        let catalog = gt_catalog(&["pi4_linear", "pi5"]);
        let set = set_of(vec![
            fv(&[(IDX_KIND_LINEAR, 1.0), (IDX_T_START, 0.0), (IDX_T_END, 0.4)]),
            fv(&[(IDX_KIND_LINEAR, 1.0), (IDX_T_START, 0.4), (IDX_T_END, 1.0)]),
            fv(&[(IDX_KIND_JUMP, 1.0), (IDX_T_END, 0.6)]),
        ]);
        assert_eq!(eval_structure(&p9, 1, &set, EvalMode::Hard, &catalog).unwrap(), 1.0);
        assert_eq!(eval_structure(&p9, 0, &set, EvalMode::Hard, &catalog).unwrap(), 0.0);
        assert_eq!(eval_structure(&p9, 2, &set, EvalMode::Hard, &catalog).unwrap(), 0.0);
    }

    #[test]
    fn forall_is_vacuously_true_on_singleton() {
        let s = Structure::forall(PairExpr::Leaf { id: "pi5".into() });
        let catalog = gt_catalog(&["pi5"]);
        let set = set_of(vec![fv(&[(IDX_T_END, 0.3)])]);
        assert_eq!(eval_structure(&s, 0, &set, EvalMode::Hard, &catalog).unwrap(), 1.0);
    }

    #[test]
    fn soft_xor_closed_form() {
        // soft XOR(0.5, 0.5) = 0.5; realize the halves with margin-0 leaves
        let half = LeafPolicy::single("half", vec![0.0; M], 0.0);
        let catalog = PolicyCatalog::from_leaves([half]);
        let s = Structure::Xor {
            left: Box::new(Structure::leaf("half")),
            right: Box::new(Structure::leaf("half")),
        };
        let set = set_of(vec![fv(&[])]);
        assert_eq!(eval_structure(&s, 0, &set, EvalMode::Soft, &catalog).unwrap(), 0.5);
    }

    #[test]
    fn p1_and_p2_examples() {
        let catalog = gt_catalog(&["pi4_linear", "pi1", "pi4_jump", "neg_delta_jump"]);
        let p1 = builtin_complex("p1").unwrap();
        let p2 = builtin_complex("p2").unwrap();
        let up_linear = fv(&[(IDX_KIND_LINEAR, 1.0), (IDX_SLOPE, 0.5)]);
        let up_jump = fv(&[(IDX_KIND_JUMP, 1.0), (IDX_SLOPE, 0.4), (IDX_MAGNITUDE, 0.4)]);
        let down_jump = fv(&[(IDX_KIND_JUMP, 1.0), (IDX_SLOPE, -0.4), (IDX_MAGNITUDE, 0.4)]);
        let set = set_of(vec![up_linear, up_jump, down_jump]);
        assert_eq!(eval_structure(&p1, 0, &set, EvalMode::Hard, &catalog).unwrap(), 1.0);
        assert_eq!(eval_structure(&p2, 1, &set, EvalMode::Hard, &catalog).unwrap(), 0.0);
        assert_eq!(eval_structure(&p2, 2, &set, EvalMode::Hard, &catalog).unwrap(), 1.0);
    }

    #[test]
    fn p4_matches_brute_force_duration_max() {
        let p4 = builtin_complex("p4").unwrap();
        let catalog = gt_catalog(&["pi4_linear", "pi6"]);
        let durations = [0.2, 0.5, 0.3];
        let set = set_of(
            durations
                .iter()
                .map(|&d| fv(&[(IDX_KIND_LINEAR, 1.0), (IDX_DURATION, d)]))
                .collect(),
        );
        for i in 0..durations.len() {
            let expected = durations.iter().all(|&d| durations[i] >= d);
            let got = eval_structure(&p4, i, &set, EvalMode::Hard, &catalog).unwrap() == 1.0;
            assert_eq!(got, expected, "index {i}");
        }
    }

    #[test]
    fn forall_pi5_selects_exactly_one_under_distinct_ends() {
        let s = Structure::forall(PairExpr::Leaf { id: "pi5".into() });
        let catalog = gt_catalog(&["pi5"]);
        let ends = [0.2, 0.9, 0.5, 0.7];
        let set = set_of(ends.iter().map(|&e| fv(&[(IDX_T_END, e)])).collect());
        let winners: Vec<usize> = (0..ends.len())
            .filter(|&i| eval_structure(&s, i, &set, EvalMode::Hard, &catalog).unwrap() == 1.0)
            .collect();
        assert_eq!(winners, vec![1]);
    }

    #[test]
    fn hard_equals_rounded_soft_when_leaves_saturated() {
        // huge sharpness saturates every soft leaf to {0,1}
        let mut pi1 = builtin_leaf("pi1").unwrap();
        pi1.sharpness = 1e9;
        let mut pi5 = builtin_leaf("pi5").unwrap();
        pi5.sharpness = 1e9;
        let catalog = PolicyCatalog::from_leaves([pi1, pi5]);
        let s = Structure::and(vec![
            Structure::leaf("pi1"),
            Structure::forall(PairExpr::Leaf { id: "pi5".into() }),
        ]);
        let set = set_of(vec![
            fv(&[(IDX_KIND_LINEAR, 1.0), (IDX_SLOPE, 0.5), (IDX_T_END, 1.0)]),
            fv(&[(IDX_KIND_LINEAR, 1.0), (IDX_SLOPE, -0.5), (IDX_T_END, 0.5)]),
        ]);
        for i in 0..2 {
            let hard = eval_structure(&s, i, &set, EvalMode::Hard, &catalog).unwrap();
            let soft = eval_structure(&s, i, &set, EvalMode::Soft, &catalog).unwrap();
            assert_eq!(hard, soft.round());
        }
    }

    #[test]
    fn soft_probability_moves_toward_hard_with_sharpness() {
        let mut leaf = builtin_leaf("pi1").unwrap();
        let v = fv(&[(IDX_KIND_LINEAR, 1.0), (IDX_SLOPE, 0.2)]);
        let mut prev = 0.0;
        for s in [1.0, 4.0, 16.0, 64.0] {
            leaf.sharpness = s;
            let p = eval_leaf_soft(&leaf, &v, None).unwrap();
            assert!(p >= prev);
            prev = p;
        }
        assert!(prev > 0.99);
    }

    #[test]
    fn structure_evaluation_is_order_invariant_over_others() {
        let s = Structure::forall(PairExpr::Leaf { id: "pi6".into() });
        let catalog = gt_catalog(&["pi6"]);
        let durations = [0.7, 0.1, 0.4];
        let set_a = set_of(
            durations.iter().map(|&d| fv(&[(IDX_DURATION, d)])).collect(),
        );
        // same set with the "other" trends permuted
        let set_b = set_of(
            [0.7, 0.4, 0.1].iter().map(|&d| fv(&[(IDX_DURATION, d)])).collect(),
        );
        assert_eq!(
            eval_structure(&s, 0, &set_a, EvalMode::Soft, &catalog).unwrap(),
            eval_structure(&s, 0, &set_b, EvalMode::Soft, &catalog).unwrap(),
        );
    }

    #[test]
    fn builtin_scenarios_validate() {
        for id in builtin_scenario_ids() {
            let s = builtin_scenario(id).unwrap();
            s.validate().unwrap();
        }
        assert!(builtin_scenario("nope").is_err());
        assert!(builtin_leaf("nope").is_err());
        assert!(builtin_complex("p99").is_err());
    }
}
