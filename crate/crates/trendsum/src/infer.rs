//! Utility inference: the serialized utility model, MAP-approximate and
//! exact utility computation, and trend ranking.
//!
//! A utility model is a two-level generative story: soft leaf policies feed
//! boolean structures giving each complex policy an activation probability
//! p_i for the target trend, and a classifier head maps the activation
//! vector q to P(useful | q). The utility marginalizes the head over the
//! independent activation distribution; `infer_utility` approximates that
//! with the MAP assignment, `infer_utility_exact` enumerates all 2^k'
//! assignments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_LAYOUT_ID};
use crate::learn::{ClassifierModel, NaiveBayesModel};
use crate::policy::{
    eval_leaf_soft, eval_structure, Arity, EvalMode, LeafPolicy, LeafSource, Scenario, Structure,
};
use crate::trend::TrendSet;

/// Hard cap on the number of complex policies enumerable exactly.
pub const MAX_KPRIME: usize = 16;

/// A learned (or ground-truth) leaf policy: either a linear separator or a
/// naive Bayes classifier over the (concatenated, for pairwise) features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum LeafModel {
    Separator(LeafPolicy),
    NaiveBayes { id: String, arity: Arity, nb: NaiveBayesModel },
}

impl LeafModel {
    pub fn id(&self) -> &str {
        match self {
            LeafModel::Separator(l) => &l.id,
            LeafModel::NaiveBayes { id, .. } => id,
        }
    }

    pub fn arity(&self) -> Arity {
        match self {
            LeafModel::Separator(l) => l.arity,
            LeafModel::NaiveBayes { arity, .. } => *arity,
        }
    }

    pub fn soft(&self, v: &FeatureVector, other: Option<&FeatureVector>) -> Result<f64> {
        match (self.arity(), other) {
            (Arity::Single, None) | (Arity::Pairwise, Some(_)) => {}
            _ => return Err(Error::ArityMismatch(self.id().to_string())),
        }
        match self {
            LeafModel::Separator(l) => eval_leaf_soft(l, v, other),
            LeafModel::NaiveBayes { nb, .. } => {
                let mut x = v.as_slice().to_vec();
                if let Some(o) = other {
                    x.extend_from_slice(o.as_slice());
                }
                Ok(nb.predict_proba(&x))
            }
        }
    }
}

/// Metadata recorded alongside a trained model.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub classifier: String,
    pub n_train: usize,
}

/// The serialized utility model: leaf policies, complex-policy structures,
/// and the classifier head over the activation vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtilityModel {
    pub version: String,
    pub feature_layout_id: String,
    pub scenario: String,
    pub leaves: BTreeMap<String, LeafModel>,
    pub structures: Vec<(String, Structure)>,
    pub head: ClassifierModel,
    pub training: TrainingMeta,
}

impl UtilityModel {
    pub fn validate(&self) -> Result<()> {
        if self.feature_layout_id != FEATURE_LAYOUT_ID {
            return Err(Error::LayoutMismatch(format!(
                "expected {FEATURE_LAYOUT_ID}, got {}",
                self.feature_layout_id
            )));
        }
        if self.structures.is_empty() {
            return Err(Error::InvalidConfig("model has no complex policies".into()));
        }
        for (_, s) in &self.structures {
            for (id, arity) in s.referenced_leaves() {
                match self.leaves.get(&id) {
                    None => return Err(Error::UnknownPolicy(id)),
                    Some(leaf) if leaf.arity() != arity => return Err(Error::ArityMismatch(id)),
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let model: UtilityModel = serde_json::from_reader(file)?;
        model.validate()?;
        Ok(model)
    }

    /// Soft activation probability of every complex policy for one trend.
    pub fn structure_probs(&self, target: usize, set: &TrendSet) -> Result<Vec<f64>> {
        self.structures
            .iter()
            .map(|(_, s)| eval_structure(s, target, set, EvalMode::Soft, &ModelLeaves(self)))
            .collect()
    }

    /// Hard activation of every complex policy for one trend.
    pub fn structure_hard(&self, target: usize, set: &TrendSet) -> Result<Vec<f64>> {
        self.structures
            .iter()
            .map(|(_, s)| eval_structure(s, target, set, EvalMode::Hard, &ModelLeaves(self)))
            .collect()
    }
}

struct ModelLeaves<'a>(&'a UtilityModel);

impl LeafSource for ModelLeaves<'_> {
    fn soft(&self, id: &str, v: &FeatureVector, other: Option<&FeatureVector>) -> Result<f64> {
        self.0
            .leaves
            .get(id)
            .ok_or_else(|| Error::UnknownPolicy(id.into()))?
            .soft(v, other)
    }
}

/// MAP-approximate utility: evaluate the head at the most probable
/// activation assignment (ties at 0.5 go to 1) and weight it by that
/// assignment's probability. Clamped to [0, 1].
pub fn infer_utility(model: &UtilityModel, target: usize, set: &TrendSet) -> Result<f64> {
    let probs = model.structure_probs(target, set)?;
    let q: Vec<f64> = probs.iter().map(|&p| if p >= 0.5 { 1.0 } else { 0.0 }).collect();
    let weight: f64 = probs.iter().map(|&p| p.max(1.0 - p)).product();
    Ok((model.head.predict_proba(&q) * weight).clamp(0.0, 1.0))
}

/// Exact utility: sum over all 2^k' activation assignments of
/// P(useful | q) * P(q). Errors when k' exceeds [`MAX_KPRIME`].
pub fn infer_utility_exact(model: &UtilityModel, target: usize, set: &TrendSet) -> Result<f64> {
    let probs = model.structure_probs(target, set)?;
    let k = probs.len();
    if k > MAX_KPRIME {
        return Err(Error::EnumerationBound { kprime: k, limit: MAX_KPRIME });
    }
    let mut total = 0.0;
    for mask in 0u32..(1 << k) {
        let mut q = vec![0.0; k];
        let mut pq = 1.0;
        for (i, slot) in q.iter_mut().enumerate() {
            if mask & (1 << i) != 0 {
                *slot = 1.0;
                pq *= probs[i];
            } else {
                pq *= 1.0 - probs[i];
            }
        }
        total += model.head.predict_proba(&q) * pq;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Trends of one set ordered by utility (descending; ties keep the lower
/// trend index first).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankedTrends {
    pub series_id: String,
    /// (trend index, utility), best first.
    pub ranking: Vec<(usize, f64)>,
}

pub fn rank_trends(model: &UtilityModel, set: &TrendSet) -> Result<RankedTrends> {
    let mut ranking: Vec<(usize, f64)> = (0..set.len())
        .map(|i| Ok((i, infer_utility(model, i, set)?)))
        .collect::<Result<Vec<_>>>()?;
    ranking.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(RankedTrends { series_id: set.series_id.clone(), ranking })
}

/// Ground-truth utility model for a scenario: its exact leaves and
/// structures with a steep logistic OR head (any active complex policy
/// makes the trend useful).
pub fn model_from_scenario(scenario: &Scenario) -> Result<UtilityModel> {
    scenario.validate()?;
    let leaves = scenario
        .leaf_catalog
        .iter()
        .map(|l| (l.id.clone(), LeafModel::Separator(l.clone())))
        .collect();
    let k = scenario.complex_policies.len();
    let head = ClassifierModel::Logistic(crate::learn::LogisticModel {
        weights: vec![20.0; k],
        bias: -10.0,
    });
    let model = UtilityModel {
        version: "v1".into(),
        feature_layout_id: FEATURE_LAYOUT_ID.into(),
        scenario: scenario.id.clone(),
        leaves,
        structures: scenario.complex_policies.clone(),
        head,
        training: TrainingMeta { seed: 0, classifier: "ground_truth".into(), n_train: 0 },
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{IDX_KIND_LINEAR, IDX_SLOPE, IDX_T_END, M};
    use crate::learn::LogisticModel;
    use crate::policy::builtin_scenario;
    use crate::trend::{Trend, TrendParams, TrendSet};

    fn fv(entries: &[(usize, f64)]) -> FeatureVector {
        let mut f = [0.0; M];
        for &(i, x) in entries {
            f[i] = x;
        }
        FeatureVector(f)
    }

    fn set_of(features: Vec<FeatureVector>) -> TrendSet {
        let trends = features
            .iter()
            .map(|_| Trend {
                t_start: 0.0,
                t_end: 1.0,
                idx_start: 0,
                idx_end: 1,
                params: TrendParams::Statistical { mean: 0.0, std: 1.0 },
            })
            .collect();
        TrendSet::new("test", trends, features).unwrap()
    }

    /// Model with k structures that read the slope slot through leaves of
    /// controllable sharpness, and an arbitrary head.
    fn slope_model(k: usize, sharpness: f64, head: ClassifierModel) -> UtilityModel {
        let mut leaves = BTreeMap::new();
        let mut structures = Vec::new();
        for i in 0..k {
            let id = format!("leaf{i}");
            let mut a = vec![0.0; M];
            a[IDX_SLOPE] = 1.0;
            let mut leaf = LeafPolicy::single(&id, a, -0.1 * i as f64);
            leaf.sharpness = sharpness;
            leaves.insert(id.clone(), LeafModel::Separator(leaf));
            structures.push((format!("p{i}"), Structure::leaf(&id)));
        }
        UtilityModel {
            version: "v1".into(),
            feature_layout_id: FEATURE_LAYOUT_ID.into(),
            scenario: "test".into(),
            leaves,
            structures,
            head,
            training: TrainingMeta::default(),
        }
    }

    fn or_head(k: usize) -> ClassifierModel {
        ClassifierModel::Logistic(LogisticModel { weights: vec![20.0; k], bias: -10.0 })
    }

    #[test]
    fn exact_matches_closed_form_for_one_policy() {
        let model = slope_model(1, 2.0, or_head(1));
        let set = set_of(vec![fv(&[(IDX_SLOPE, 0.3)])]);
        let p = model.structure_probs(0, &set).unwrap()[0];
        let h1 = model.head.predict_proba(&[1.0]);
        let h0 = model.head.predict_proba(&[0.0]);
        let exact = infer_utility_exact(&model, 0, &set).unwrap();
        assert!((exact - (p * h1 + (1.0 - p) * h0)).abs() < 1e-12);
    }

    #[test]
    fn exact_equals_map_on_hard_probabilities() {
        // enormous sharpness saturates every leaf to exactly 0/1
        let model = slope_model(3, 1e12, or_head(3));
        for slope in [-0.5, 0.05, 0.15, 0.25, 0.9] {
            let set = set_of(vec![fv(&[(IDX_SLOPE, slope)])]);
            let exact = infer_utility_exact(&model, 0, &set).unwrap();
            let map = infer_utility(&model, 0, &set).unwrap();
            assert_eq!(exact, map, "slope {slope}");
        }
    }

    #[test]
    fn assignment_distribution_sums_to_one() {
        // head identically 1 => exact utility equals the total probability
        // mass over assignments
        let flat = ClassifierModel::Logistic(LogisticModel { weights: vec![0.0; 4], bias: 1e9 });
        let model = slope_model(4, 3.0, flat);
        let set = set_of(vec![fv(&[(IDX_SLOPE, 0.17)])]);
        let exact = infer_utility_exact(&model, 0, &set).unwrap();
        assert!((exact - 1.0).abs() < 1e-9);
    }

    #[test]
    fn enumeration_bound_is_enforced() {
        let model = slope_model(MAX_KPRIME + 1, 2.0, or_head(MAX_KPRIME + 1));
        let set = set_of(vec![fv(&[])]);
        assert!(matches!(
            infer_utility_exact(&model, 0, &set),
            Err(Error::EnumerationBound { .. })
        ));
        // the MAP path has no such bound
        infer_utility(&model, 0, &set).unwrap();
    }

    #[test]
    fn ranking_orders_by_utility_with_index_ties() {
        let model = slope_model(1, 4.0, or_head(1));
        let set = set_of(vec![
            fv(&[(IDX_SLOPE, 0.2)]),
            fv(&[(IDX_SLOPE, 0.9)]),
            fv(&[(IDX_SLOPE, 0.2)]),
        ]);
        let ranked = rank_trends(&model, &set).unwrap();
        let order: Vec<usize> = ranked.ranking.iter().map(|r| r.0).collect();
        assert_eq!(order, vec![1, 0, 2]);
        assert!(ranked.ranking[0].1 >= ranked.ranking[1].1);
        assert_eq!(ranked.ranking[1].1, ranked.ranking[2].1);
    }

    #[test]
    fn scenario_model_reproduces_ground_truth_labels() {
        let scenario = builtin_scenario("exp1-pi1").unwrap();
        let model = model_from_scenario(&scenario).unwrap();
        let set = set_of(vec![
            fv(&[(IDX_KIND_LINEAR, 1.0), (IDX_SLOPE, 0.6), (IDX_T_END, 1.0)]),
            fv(&[(IDX_KIND_LINEAR, 1.0), (IDX_SLOPE, -0.6), (IDX_T_END, 0.5)]),
        ]);
        let q = model.structure_hard(0, &set).unwrap();
        assert_eq!(q, vec![1.0]);
        assert!(model.head.predict_proba(&q) > 0.99);
        let q = model.structure_hard(1, &set).unwrap();
        assert_eq!(q, vec![0.0]);
        assert!(model.head.predict_proba(&q) < 0.01);
    }

    #[test]
    fn model_json_round_trip_and_validation() {
        let scenario = builtin_scenario("exp2-p1p2").unwrap();
        let model = model_from_scenario(&scenario).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let back = UtilityModel::load(&path).unwrap();
        assert_eq!(back.structures, model.structures);
        assert_eq!(back.leaves.len(), model.leaves.len());

        let mut bad = model.clone();
        bad.feature_layout_id = "m99-v0".into();
        assert!(matches!(bad.validate(), Err(Error::LayoutMismatch(_))));
        let mut missing = model;
        missing.leaves.clear();
        assert!(matches!(missing.validate(), Err(Error::UnknownPolicy(_))));
    }

    #[test]
    fn map_utility_is_clamped_and_monotone_in_head() {
        let model = slope_model(2, 2.0, or_head(2));
        let set = set_of(vec![fv(&[(IDX_SLOPE, 0.4)])]);
        let u = infer_utility(&model, 0, &set).unwrap();
        assert!((0.0..=1.0).contains(&u));
    }
}
