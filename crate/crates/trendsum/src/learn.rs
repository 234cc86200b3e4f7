//! Learning primitives: logistic regression, naive Bayes, mutual
//! information, Chow-Liu tree fitting, and greedy boolean structure search.
//!
//! Training is full-batch and deterministic: zero-initialized gradient
//! descent with fixed hyperparameters, so identical inputs give identical
//! models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::M;
use crate::policy::{sigmoid, Arity, LeafPolicy, Structure};

/// Hyperparameters for full-batch logistic regression.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig { learning_rate: 0.1, epochs: 500, l2: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn raw(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.raw(x))
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.raw(x) >= 0.0)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn check_rows(xs: &[Vec<f64>], ys: &[u8]) -> Result<usize> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: ys.len(), got: xs.len() });
    }
    let d = xs[0].len();
    if xs.iter().any(|x| x.len() != d) {
        return Err(Error::InvalidConfig("ragged design matrix".into()));
    }
    Ok(d)
}

/// Mean cross-entropy loss plus L2 penalty on the non-bias weights.
pub fn logistic_loss(weights: &[f64], bias: f64, xs: &[Vec<f64>], ys: &[u8], l2: f64) -> f64 {
    let model = LogisticModel { weights: weights.to_vec(), bias };
    let n = xs.len() as f64;
    let data: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| {
            let raw = model.raw(x);
            softplus(raw) - f64::from(y) * raw
        })
        .sum();
    data / n + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Analytic gradient of [`logistic_loss`] in (weights, bias).
pub fn logistic_gradient(
    weights: &[f64],
    bias: f64,
    xs: &[Vec<f64>],
    ys: &[u8],
    l2: f64,
) -> (Vec<f64>, f64) {
    let model = LogisticModel { weights: weights.to_vec(), bias };
    let n = xs.len() as f64;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let err = model.predict_proba(x) - f64::from(y);
        for (g, v) in gw.iter_mut().zip(x) {
            *g += err * v;
        }
        gb += err;
    }
    for (g, w) in gw.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    (gw, gb / n)
}

/// Full-batch gradient descent from zero initialization. Errors when the
/// labels are single-class.
pub fn train_logistic(xs: &[Vec<f64>], ys: &[u8], cfg: &LogisticConfig) -> Result<LogisticModel> {
    let d = check_rows(xs, ys)?;
    if ys.iter().all(|&y| y == ys[0]) {
        return Err(Error::DegenerateLabels(None));
    }
    let mut weights = vec![0.0; d];
    let mut bias = 0.0;
    for _ in 0..cfg.epochs {
        let (gw, gb) = logistic_gradient(&weights, bias, xs, ys, cfg.l2);
        for (w, g) in weights.iter_mut().zip(&gw) {
            *w -= cfg.learning_rate * g;
        }
        bias -= cfg.learning_rate * gb;
    }
    Ok(LogisticModel { weights, bias })
}

/// Per-feature class-conditional distribution for naive Bayes. A feature is
/// modeled as Bernoulli when every training value is exactly 0 or 1, else as
/// Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum FeatureDist {
    Bernoulli { p: [f64; 2] },
    Gaussian { mean: [f64; 2], var: [f64; 2] },
}

const VAR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub log_prior: [f64; 2],
    pub dists: Vec<FeatureDist>,
}

impl NaiveBayesModel {
    /// log P(y=1 | x) - log P(y=0 | x) under the independence assumption.
    pub fn log_odds(&self, x: &[f64]) -> f64 {
        let mut odds = self.log_prior[1] - self.log_prior[0];
        for (dist, &v) in self.dists.iter().zip(x) {
            match dist {
                FeatureDist::Bernoulli { p } => {
                    let bit = v >= 0.5;
                    for (c, sign) in [(1usize, 1.0), (0, -1.0)] {
                        let q = if bit { p[c] } else { 1.0 - p[c] };
                        odds += sign * q.ln();
                    }
                }
                FeatureDist::Gaussian { mean, var } => {
                    for (c, sign) in [(1usize, 1.0), (0, -1.0)] {
                        let d = v - mean[c];
                        odds += sign * (-0.5 * (2.0 * std::f64::consts::PI * var[c]).ln()
                            - d * d / (2.0 * var[c]));
                    }
                }
            }
        }
        odds
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.log_odds(x))
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.log_odds(x) >= 0.0)
    }
}

/// Fit a naive Bayes classifier. Priors and Bernoulli parameters use
/// Laplace smoothing (alpha = 1); Gaussian variances are floored. Errors on
/// single-class labels.
pub fn train_naive_bayes(xs: &[Vec<f64>], ys: &[u8]) -> Result<NaiveBayesModel> {
    let d = check_rows(xs, ys)?;
    let n1 = ys.iter().filter(|&&y| y != 0).count();
    let n0 = ys.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::DegenerateLabels(None));
    }
    let n = [n0 as f64, n1 as f64];
    let total = ys.len() as f64;
    let log_prior = [((n[0] + 1.0) / (total + 2.0)).ln(), ((n[1] + 1.0) / (total + 2.0)).ln()];

    let mut dists = Vec::with_capacity(d);
    for j in 0..d {
        let binary = xs.iter().all(|x| x[j] == 0.0 || x[j] == 1.0);
        if binary {
            let mut ones = [0.0f64; 2];
            for (x, &y) in xs.iter().zip(ys) {
                ones[usize::from(y != 0)] += x[j];
            }
            dists.push(FeatureDist::Bernoulli {
                p: [(ones[0] + 1.0) / (n[0] + 2.0), (ones[1] + 1.0) / (n[1] + 2.0)],
            });
        } else {
            let mut sum = [0.0f64; 2];
            let mut sumsq = [0.0f64; 2];
            for (x, &y) in xs.iter().zip(ys) {
                let c = usize::from(y != 0);
                sum[c] += x[j];
                sumsq[c] += x[j] * x[j];
            }
            let mean = [sum[0] / n[0], sum[1] / n[1]];
            let var = [
                (sumsq[0] / n[0] - mean[0] * mean[0]).max(VAR_FLOOR),
                (sumsq[1] / n[1] - mean[1] * mean[1]).max(VAR_FLOOR),
            ];
            dists.push(FeatureDist::Gaussian { mean, var });
        }
    }
    Ok(NaiveBayesModel { log_prior, dists })
}

/// Classifier head over a policy-activation vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierModel {
    Logistic(LogisticModel),
    NaiveBayes(NaiveBayesModel),
}

impl ClassifierModel {
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        match self {
            ClassifierModel::Logistic(m) => m.predict_proba(x),
            ClassifierModel::NaiveBayes(m) => m.predict_proba(x),
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierModel::Logistic(_) => ClassifierKind::Logistic,
            ClassifierModel::NaiveBayes(_) => ClassifierKind::NaiveBayes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Logistic,
    NaiveBayes,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Logistic => "logistic",
            ClassifierKind::NaiveBayes => "naive_bayes",
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(ClassifierKind::Logistic),
            "naive_bayes" | "nb" => Ok(ClassifierKind::NaiveBayes),
            other => Err(Error::InvalidConfig(format!("unknown classifier {other}"))),
        }
    }
}

pub fn train_classifier(kind: ClassifierKind, xs: &[Vec<f64>], ys: &[u8]) -> Result<ClassifierModel> {
    match kind {
        ClassifierKind::Logistic => {
            Ok(ClassifierModel::Logistic(train_logistic(xs, ys, &LogisticConfig::default())?))
        }
        ClassifierKind::NaiveBayes => Ok(ClassifierModel::NaiveBayes(train_naive_bayes(xs, ys)?)),
    }
}

/// Convert a trained logistic model over trend features (single: m inputs,
/// pairwise: the concatenation [v, v']) into an equivalent separator leaf.
/// Sharpness 1 makes the leaf's soft evaluation equal the model probability.
pub fn logistic_to_leaf(id: &str, arity: Arity, model: &LogisticModel) -> Result<LeafPolicy> {
    match arity {
        Arity::Single => {
            if model.weights.len() != M {
                return Err(Error::DimensionMismatch { expected: M, got: model.weights.len() });
            }
            let mut leaf = LeafPolicy::single(id, model.weights.clone(), model.bias);
            leaf.sharpness = 1.0;
            Ok(leaf)
        }
        Arity::Pairwise => {
            if model.weights.len() != 2 * M {
                return Err(Error::DimensionMismatch { expected: 2 * M, got: model.weights.len() });
            }
            let mut leaf = LeafPolicy::pairwise(
                id,
                model.weights[..M].to_vec(),
                model.weights[M..].to_vec(),
                model.bias,
            );
            leaf.sharpness = 1.0;
            Ok(leaf)
        }
    }
}

/// Mutual information between two binary variables, in nats, with Laplace
/// smoothing (alpha = 1) over the joint table.
pub fn mutual_information(a: &[u8], b: &[u8]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch { expected: b.len(), got: a.len() });
    }
    let mut joint = [[1.0f64; 2]; 2]; // Laplace prior
    for (&x, &y) in a.iter().zip(b) {
        joint[usize::from(x != 0)][usize::from(y != 0)] += 1.0;
    }
    let total: f64 = joint.iter().flatten().sum();
    let px = [joint[0][0] + joint[0][1], joint[1][0] + joint[1][1]];
    let py = [joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]];
    let mut mi = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            let pxy = joint[x][y] / total;
            mi += pxy * (pxy * total * total / (px[x] * py[y])).ln();
        }
    }
    Ok(mi.max(0.0))
}

/// Dependency tree over policy variables, rooted at variable 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTree {
    /// `parent[i]` is `None` for the root (and isolated roots of a forest).
    pub parent: Vec<Option<usize>>,
    /// Chosen edges as (min, max) pairs with their mutual information.
    pub edges: Vec<(usize, usize, f64)>,
}

/// Chow-Liu: maximum-weight spanning tree under pairwise mutual
/// information, built by Kruskal with deterministic lexicographic
/// tie-breaking, then rooted at variable 0.
pub fn chow_liu(samples: &[Vec<u8>]) -> Result<PolicyTree> {
    if samples.is_empty() || samples[0].is_empty() {
        return Err(Error::InvalidConfig("chow_liu needs a non-empty sample".into()));
    }
    let k = samples[0].len();
    if samples.iter().any(|s| s.len() != k) {
        return Err(Error::InvalidConfig("ragged sample matrix".into()));
    }
    let col = |j: usize| samples.iter().map(|s| s[j]).collect::<Vec<u8>>();
    let cols: Vec<Vec<u8>> = (0..k).map(col).collect();

    let mut candidates = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            candidates.push((i, j, mutual_information(&cols[i], &cols[j])?));
        }
    }
    candidates.sort_by(|a, b| {
        b.2.partial_cmp(&a.2).unwrap().then_with(|| (a.0, a.1).cmp(&(b.0, b.1)))
    });

    let mut root_of: Vec<usize> = (0..k).collect();
    fn find(root_of: &mut Vec<usize>, mut x: usize) -> usize {
        while root_of[x] != x {
            root_of[x] = root_of[root_of[x]];
            x = root_of[x];
        }
        x
    }
    let mut adj = vec![Vec::new(); k];
    let mut edges = Vec::new();
    for (i, j, w) in candidates {
        let (ri, rj) = (find(&mut root_of, i), find(&mut root_of, j));
        if ri != rj {
            root_of[ri] = rj;
            adj[i].push(j);
            adj[j].push(i);
            edges.push((i, j, w));
        }
    }

    // orient away from variable 0
    let mut parent = vec![None; k];
    let mut seen = vec![false; k];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some(u);
                stack.push(v);
            }
        }
    }
    Ok(PolicyTree { parent, edges })
}

fn structure_nodes(s: &Structure) -> usize {
    match s {
        Structure::Leaf { .. } => 1,
        Structure::Not { child } => 1 + structure_nodes(child),
        Structure::And { children } | Structure::Or { children } => {
            1 + children.iter().map(structure_nodes).sum::<usize>()
        }
        Structure::Xor { left, right } => 1 + structure_nodes(left) + structure_nodes(right),
        Structure::ForallOther { .. } | Structure::ExistsOther { .. } => 2,
    }
}

fn eval_on_row(s: &Structure, ids: &[String], row: &[u8]) -> Result<bool> {
    Ok(match s {
        Structure::Leaf { id } => {
            let idx = ids
                .iter()
                .position(|x| x == id)
                .ok_or_else(|| Error::UnknownPolicy(id.clone()))?;
            row[idx] != 0
        }
        Structure::Not { child } => !eval_on_row(child, ids, row)?,
        Structure::And { children } => {
            let mut acc = true;
            for c in children {
                acc &= eval_on_row(c, ids, row)?;
            }
            acc
        }
        Structure::Or { children } => {
            let mut acc = false;
            for c in children {
                acc |= eval_on_row(c, ids, row)?;
            }
            acc
        }
        Structure::Xor { left, right } => {
            eval_on_row(left, ids, row)? != eval_on_row(right, ids, row)?
        }
        _ => return Err(Error::InvalidConfig("quantifiers not allowed in row search".into())),
    })
}

/// BIC-style score: log-likelihood of the labels under the structure's
/// predictions (with a smoothed error rate) minus a complexity penalty of
/// half the node count times ln n.
pub fn bic_score(s: &Structure, ids: &[String], rows: &[Vec<u8>], labels: &[u8]) -> Result<f64> {
    let n = rows.len();
    if n == 0 || n != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: n });
    }
    let mut errors = 0usize;
    for (row, &y) in rows.iter().zip(labels) {
        if u8::from(eval_on_row(s, ids, row)?) != y {
            errors += 1;
        }
    }
    let eps = (errors as f64 + 0.5) / (n as f64 + 1.0);
    let ll = (n - errors) as f64 * (1.0 - eps).ln() + errors as f64 * eps.ln();
    Ok(ll - 0.5 * structure_nodes(s) as f64 * (n as f64).ln())
}

/// Greedy boolean structure search over hard policy activations. Starts from
/// the best single literal (a leaf or its negation) and repeatedly attaches
/// the literal/connective pair (AND / OR) that most improves the BIC score,
/// stopping when no extension improves it.
pub fn greedy_structure_search(
    ids: &[String],
    rows: &[Vec<u8>],
    labels: &[u8],
) -> Result<Structure> {
    if ids.is_empty() {
        return Err(Error::InvalidConfig("no candidate policies".into()));
    }
    let literals: Vec<Structure> = ids
        .iter()
        .flat_map(|id| {
            [
                Structure::leaf(id),
                Structure::Not { child: Box::new(Structure::leaf(id)) },
            ]
        })
        .collect();

    let mut best = literals[0].clone();
    let mut best_score = bic_score(&best, ids, rows, labels)?;
    for lit in &literals[1..] {
        let score = bic_score(lit, ids, rows, labels)?;
        if score > best_score {
            best = lit.clone();
            best_score = score;
        }
    }

    loop {
        let mut improved = false;
        for lit in &literals {
            for combine in [
                Structure::And { children: vec![best.clone(), lit.clone()] },
                Structure::Or { children: vec![best.clone(), lit.clone()] },
            ] {
                let score = bic_score(&combine, ids, rows, labels)?;
                if score > best_score {
                    best = combine;
                    best_score = score;
                    improved = true;
                }
            }
        }
        if !improved {
            return Ok(best);
        }
    }
}
