//! Comparison classifiers over the flat 18-value feature vector, and the
//! side-by-side cross-validation run.
//!
//! Defaults: KNN k = 5 (Euclidean); random forest with 100 Gini trees grown
//! to purity on bootstrap samples, 4 candidate features per split; linear SVM
//! trained with Pegasos (λ = 1e-4, 20 epochs) on standardised features;
//! ANN with two 300-unit ReLU layers trained like the wide & deep model.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{
    cross_validate_with, format_metric_fields, stratified_kfold, Classifier, EvaluationReport, Example,
};
use crate::features::{FeatureVector, FEATURE_COUNT};
use crate::ingest::Label;
use crate::netcore::{init_network, train, GraphSpec, InputBatch, InputSpec, NetworkGraph, TrainConfig};
use crate::seed::derive_seed;
use crate::widedeep::{WideDeepClassifier, HIDDEN_WIDTH};

type Point = [f64; FEATURE_COUNT];

fn require_both_classes(data: &[Example]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let malignant = data.iter().filter(|e| e.label.is_malignant()).count();
    if malignant == 0 || malignant == data.len() {
        return Err(Error::SingleClassDataset);
    }
    Ok(())
}

fn squared_distance(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-nearest neighbours. Distance ties go to the earlier training example;
/// the returned probability is the malignant share of the k neighbours.
#[derive(Debug, Clone)]
pub struct Knn {
    pub k: usize,
    memory: Vec<(Point, Label)>,
}

impl Knn {
    pub fn new(k: usize) -> Self {
        assert!(k > 0, "k must be positive");
        Self { k, memory: Vec::new() }
    }

    pub fn memory(&self) -> &[(Point, Label)] {
        &self.memory
    }

    /// Indices of the neighbours of `query`, nearest first.
    pub fn neighbours(&self, query: &Point) -> Vec<usize> {
        let mut order: Vec<(f64, usize)> = self
            .memory
            .iter()
            .enumerate()
            .map(|(i, (p, _))| (squared_distance(p, query), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order.into_iter().take(self.k).map(|(_, i)| i).collect()
    }
}

impl Classifier for Knn {
    fn name(&self) -> &str {
        "knn"
    }

    fn fit(&mut self, data: &[Example], _seed: u64) -> Result<()> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        self.memory = data.iter().map(|e| (e.features.to_array(), e.label)).collect();
        Ok(())
    }

    fn predict_proba(&self, features: &FeatureVector) -> Result<f64> {
        if self.memory.is_empty() {
            return Err(Error::NotFitted);
        }
        let neighbours = self.neighbours(&features.to_array());
        let malignant = neighbours.iter().filter(|&&i| self.memory[i].1.is_malignant()).count();
        Ok(malignant as f64 / neighbours.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf {
        malignant: bool,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn vote(&self, x: &Point) -> bool {
        match self {
            Node::Leaf { malignant } => *malignant,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.vote(x)
                } else {
                    right.vote(x)
                }
            }
        }
    }
}

fn gini(malignant: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = malignant as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

struct TreeBuilder<'a> {
    points: &'a [Point],
    labels: &'a [bool],
    max_features: usize,
}

impl TreeBuilder<'_> {
    fn grow(&self, rows: Vec<usize>, rng: &mut ChaCha8Rng) -> Node {
        let malignant = rows.iter().filter(|&&r| self.labels[r]).count();
        if malignant == 0 || malignant == rows.len() {
            return Node::Leaf {
                malignant: malignant > 0,
            };
        }
        let Some((feature, threshold)) = self.best_split(&rows, rng) else {
            // Identical points with mixed labels: majority, ties to malignant.
            return Node::Leaf {
                malignant: 2 * malignant >= rows.len(),
            };
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| self.points[r][feature] <= threshold);
        Node::Split {
            feature,
            threshold,
            left: Box::new(self.grow(left, rng)),
            right: Box::new(self.grow(right, rng)),
        }
    }

    /// Examines features in random order until `max_features` non-constant
    /// ones have been scored; returns the lowest weighted-Gini split.
    fn best_split(&self, rows: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let mut order: Vec<usize> = (0..FEATURE_COUNT).collect();
        order.shuffle(rng);
        let total = rows.len();
        let total_malignant = rows.iter().filter(|&&r| self.labels[r]).count();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut scored = 0;
        for feature in order {
            if scored == self.max_features {
                break;
            }
            let mut values: Vec<(f64, bool)> = rows
                .iter()
                .map(|&r| (self.points[r][feature], self.labels[r]))
                .collect();
            values.sort_by(|a, b| a.0.total_cmp(&b.0));
            if values[0].0 == values[total - 1].0 {
                continue;
            }
            scored += 1;
            let mut left_malignant = 0;
            for i in 0..total - 1 {
                left_malignant += usize::from(values[i].1);
                if values[i].0 == values[i + 1].0 {
                    continue;
                }
                let left = i + 1;
                let right = total - left;
                let impurity = (left as f64 * gini(left_malignant, left)
                    + right as f64 * gini(total_malignant - left_malignant, right))
                    / total as f64;
                if best.is_none_or(|(b, _, _)| impurity < b) {
                    let threshold = 0.5 * (values[i].0 + values[i + 1].0);
                    best = Some((impurity, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// Random forest; the probability is the fraction of trees voting malignant.
#[derive(Debug, Clone)]
pub struct RandomForest {
    pub n_trees: usize,
    pub max_features: usize,
    trees: Vec<Node>,
}

impl RandomForest {
    pub fn new(n_trees: usize, max_features: usize) -> Self {
        Self {
            n_trees,
            max_features,
            trees: Vec::new(),
        }
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    /// Votes of each tree, in tree order.
    pub fn votes(&self, features: &FeatureVector) -> Vec<bool> {
        let x = features.to_array();
        self.trees.iter().map(|t| t.vote(&x)).collect()
    }

    /// Rebuilds the forest with its trees in the given order.
    pub fn reordered(&self, order: &[usize]) -> Self {
        Self {
            trees: order.iter().map(|&i| self.trees[i].clone()).collect(),
            ..self.clone()
        }
    }
}

impl PartialEq for RandomForest {
    fn eq(&self, other: &Self) -> bool {
        self.n_trees == other.n_trees && self.max_features == other.max_features && self.trees == other.trees
    }
}

impl Classifier for RandomForest {
    fn name(&self) -> &str {
        "rf"
    }

    /// Tree `t` draws its bootstrap sample and split features from
    /// `derive_seed(seed, "rf-tree-t")`, so the forest does not depend on
    /// how trees are scheduled across threads.
    fn fit(&mut self, data: &[Example], seed: u64) -> Result<()> {
        require_both_classes(data)?;
        let points: Vec<Point> = data.iter().map(|e| e.features.to_array()).collect();
        let labels: Vec<bool> = data.iter().map(|e| e.label.is_malignant()).collect();
        let builder = TreeBuilder {
            points: &points,
            labels: &labels,
            max_features: self.max_features.clamp(1, FEATURE_COUNT),
        };
        self.trees = (0..self.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("rf-tree-{t}")));
                let sample: Vec<usize> = (0..points.len()).map(|_| rng.random_range(0..points.len())).collect();
                builder.grow(sample, &mut rng)
            })
            .collect();
        Ok(())
    }

    fn predict_proba(&self, features: &FeatureVector) -> Result<f64> {
        if self.trees.is_empty() {
            return Err(Error::NotFitted);
        }
        let votes = self.votes(features);
        Ok(votes.iter().filter(|&&v| v).count() as f64 / votes.len() as f64)
    }
}

/// Linear SVM trained with Pegasos stochastic subgradient steps on the hinge
/// loss. Features are standardised with training statistics and a constant
/// 1 is appended as the (regularised) bias input.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    pub lambda: f64,
    pub epochs: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
    weights: Vec<f64>,
}

const SVM_DIM: usize = FEATURE_COUNT + 1;

impl LinearSvm {
    pub fn new(lambda: f64, epochs: usize) -> Self {
        Self {
            lambda,
            epochs,
            mean: Vec::new(),
            scale: Vec::new(),
            weights: Vec::new(),
        }
    }

    fn embed(&self, x: &Point) -> [f64; SVM_DIM] {
        let mut out = [1.0; SVM_DIM];
        for j in 0..FEATURE_COUNT {
            out[j] = (x[j] - self.mean[j]) / self.scale[j];
        }
        out
    }

    /// Signed distance-like score `w·x`; positive means malignant.
    pub fn margin(&self, features: &FeatureVector) -> Result<f64> {
        if self.weights.is_empty() {
            return Err(Error::NotFitted);
        }
        let x = self.embed(&features.to_array());
        Ok(self.weights.iter().zip(x).map(|(w, v)| w * v).sum())
    }
}

/// Logistic squashing of an SVM margin into a probability.
pub fn squash_margin(margin: f64) -> f64 {
    1.0 / (1.0 + (-margin).exp())
}

impl Classifier for LinearSvm {
    fn name(&self) -> &str {
        "svm"
    }

    fn fit(&mut self, data: &[Example], seed: u64) -> Result<()> {
        require_both_classes(data)?;
        let points: Vec<Point> = data.iter().map(|e| e.features.to_array()).collect();
        let n = points.len() as f64;
        self.mean = (0..FEATURE_COUNT)
            .map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n)
            .collect();
        self.scale = (0..FEATURE_COUNT)
            .map(|j| {
                let var = points.iter().map(|p| (p[j] - self.mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let xs: Vec<[f64; SVM_DIM]> = points.iter().map(|p| self.embed(p)).collect();
        let ys: Vec<f64> = data
            .iter()
            .map(|e| if e.label.is_malignant() { 1.0 } else { -1.0 })
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "svm-shuffle"));
        let mut w = [0.0; SVM_DIM];
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let radius = 1.0 / self.lambda.sqrt();
        let mut t = 0u64;
        for _ in 0..self.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (self.lambda * t as f64);
                let score: f64 = w.iter().zip(&xs[i]).map(|(a, b)| a * b).sum();
                let shrink = 1.0 - eta * self.lambda;
                for (wj, xj) in w.iter_mut().zip(&xs[i]) {
                    *wj *= shrink;
                    if ys[i] * score < 1.0 {
                        *wj += eta * ys[i] * xj;
                    }
                }
                let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > radius {
                    let f = radius / norm;
                    w.iter_mut().for_each(|v| *v *= f);
                }
            }
        }
        self.weights = w.to_vec();
        Ok(())
    }

    fn predict_proba(&self, features: &FeatureVector) -> Result<f64> {
        Ok(squash_margin(self.margin(features)?))
    }
}

pub const ANN_TOPOLOGY_TAG: &str = "mlp-v1";

pub fn ann_spec(hidden: usize) -> GraphSpec {
    GraphSpec {
        inputs: vec![InputSpec {
            name: "features".into(),
            width: FEATURE_COUNT,
        }],
        branches: vec![],
        passthrough: vec!["features".into()],
        head_hidden: vec![hidden, hidden],
    }
}

fn flat_batch(spec: &GraphSpec, features: &[FeatureVector]) -> Result<InputBatch> {
    let flat: Vec<f64> = features.iter().flat_map(|f| f.to_array()).collect();
    let x = Array2::from_shape_vec((features.len(), FEATURE_COUNT), flat).expect("rows of 18");
    InputBatch::new(spec, vec![("features", x)])
}

/// Plain multilayer perceptron on the flat feature vector.
#[derive(Debug, Clone)]
pub struct Ann {
    pub hidden: usize,
    pub config: TrainConfig,
    network: Option<NetworkGraph>,
}

impl Ann {
    pub fn new(hidden: usize, config: TrainConfig) -> Self {
        Self {
            hidden,
            config,
            network: None,
        }
    }
}

impl Classifier for Ann {
    fn name(&self) -> &str {
        "ann"
    }

    fn fit(&mut self, data: &[Example], seed: u64) -> Result<()> {
        require_both_classes(data)?;
        let config = TrainConfig { seed, ..self.config };
        let spec = ann_spec(self.hidden);
        let features: Vec<FeatureVector> = data.iter().map(|e| e.features).collect();
        let labels: Vec<Label> = data.iter().map(|e| e.label).collect();
        let batch = flat_batch(&spec, &features)?;
        let outcome = train(init_network(&spec, seed)?, &batch, &labels, &config)?;
        self.network = Some(outcome.network);
        Ok(())
    }

    fn predict_proba(&self, features: &FeatureVector) -> Result<f64> {
        Ok(self.predict_proba_batch(std::slice::from_ref(features))?[0])
    }

    fn predict_proba_batch(&self, features: &[FeatureVector]) -> Result<Vec<f64>> {
        let net = self.network.as_ref().ok_or(Error::NotFitted)?;
        let probs = net.forward_batch(&flat_batch(&net.spec, features)?)?;
        Ok(probs.column(0).to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    WideDeep,
    Ann,
    Svm,
    Rf,
    Knn,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        ClassifierKind::WideDeep,
        ClassifierKind::Ann,
        ClassifierKind::Svm,
        ClassifierKind::Rf,
        ClassifierKind::Knn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::WideDeep => "widedeep",
            ClassifierKind::Ann => "ann",
            ClassifierKind::Svm => "svm",
            ClassifierKind::Rf => "rf",
            ClassifierKind::Knn => "knn",
        }
    }

    pub fn build(self, cfg: &ComparisonConfig) -> Box<dyn Classifier> {
        match self {
            ClassifierKind::WideDeep => Box::new(WideDeepClassifier::with_hidden(cfg.hidden, cfg.train)),
            ClassifierKind::Ann => Box::new(Ann::new(cfg.hidden, cfg.train)),
            ClassifierKind::Svm => Box::new(LinearSvm::new(cfg.svm_lambda, cfg.svm_epochs)),
            ClassifierKind::Rf => Box::new(RandomForest::new(cfg.rf_trees, cfg.rf_max_features)),
            ClassifierKind::Knn => Box::new(Knn::new(cfg.knn_k)),
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown classifier {s:?}"))
    }
}

/// Hyperparameters of every classifier in a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    /// Hidden width for the wide & deep model and the ANN.
    pub hidden: usize,
    pub train: TrainConfig,
    pub knn_k: usize,
    pub rf_trees: usize,
    pub rf_max_features: usize,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            hidden: HIDDEN_WIDTH,
            train: TrainConfig::default(),
            knn_k: 5,
            rf_trees: 100,
            rf_max_features: 4,
            svm_lambda: 1e-4,
            svm_epochs: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<EvaluationReport>,
}

/// Cross-validates each requested classifier on one shared fold assignment.
pub fn run_comparison(
    dataset: &[Example],
    k: usize,
    seed: u64,
    kinds: &[ClassifierKind],
    cfg: &ComparisonConfig,
) -> Result<ComparisonTable> {
    let labels: Vec<Label> = dataset.iter().map(|e| e.label).collect();
    let assignment = stratified_kfold(&labels, k, derive_seed(seed, "folds"))?;
    let rows = kinds
        .iter()
        .map(|&kind| {
            let factory = move || kind.build(cfg);
            cross_validate_with(dataset, &assignment, &factory, seed)
        })
        .collect::<Result<_>>()?;
    Ok(ComparisonTable { rows })
}

pub const COMPARISON_HEADER: &str = "model,accuracy,sensitivity,precision,f1,auc";

pub fn write_comparison_csv(path: &Path, table: &ComparisonTable) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(out, "{COMPARISON_HEADER}").map_err(io)?;
    for report in &table.rows {
        writeln!(out, "{},{}", report.classifier, format_metric_fields(&report.average)).map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(i: usize, values: Point, label: Label) -> Example {
        Example {
            slide_id: format!("s{i}"),
            label,
            features: FeatureVector::from_array(&values),
        }
    }

    fn point(a: f64, b: f64) -> Point {
        let mut p = [0.0; FEATURE_COUNT];
        p[0] = a;
        p[13] = b;
        p
    }

    /// Two clusters separated along features 0 and 13 with margin.
    fn separable(n: usize, seed: u64) -> Vec<Example> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let malignant = i % 2 == 0;
                let (a, b) = if malignant {
                    (rng.random_range(0.3..0.6), rng.random_range(0.0..0.2))
                } else {
                    (rng.random_range(0.0..0.1), rng.random_range(0.5..1.0))
                };
                example(i, point(a, b), if malignant { Label::Malignant } else { Label::Normal })
            })
            .collect()
    }

    fn training_accuracy(c: &dyn Classifier, data: &[Example]) -> f64 {
        let correct = data
            .iter()
            .filter(|e| Label::from_probability(c.predict_proba(&e.features).unwrap()) == e.label)
            .count();
        correct as f64 / data.len() as f64
    }

    #[test]
    fn knn_memorises_and_counts() {
        let data = separable(10, 1);
        let mut knn = Knn::new(5);
        knn.fit(&data, 0).unwrap();
        assert_eq!(knn.memory().len(), 10);
        for (m, e) in knn.memory().iter().zip(&data) {
            assert_eq!(m.0, e.features.to_array());
        }

        // Four malignant at distance 1..4, one normal at 5, a far normal at 50.
        let mut data = Vec::new();
        for i in 0..4 {
            data.push(example(i, point(1.0 + i as f64, 0.0), Label::Malignant));
        }
        data.push(example(4, point(5.0, 0.0), Label::Normal));
        data.push(example(5, point(50.0, 0.0), Label::Normal));
        let mut knn = Knn::new(5);
        knn.fit(&data, 0).unwrap();
        assert_eq!(knn.predict_proba(&FeatureVector::default()).unwrap(), 0.8);
    }

    #[test]
    fn knn_ties_and_errors() {
        // Equidistant neighbours: earlier index wins the last slot.
        let data = vec![
            example(0, point(1.0, 0.0), Label::Normal),
            example(1, point(-1.0, 0.0), Label::Malignant),
        ];
        let mut knn = Knn::new(1);
        knn.fit(&data, 0).unwrap();
        assert_eq!(knn.predict_proba(&FeatureVector::default()).unwrap(), 0.0);
        // Even k with a split vote: probability 0.5, labelled malignant.
        let mut knn = Knn::new(2);
        knn.fit(&data, 0).unwrap();
        let p = knn.predict_proba(&FeatureVector::default()).unwrap();
        assert_eq!(p, 0.5);
        assert_eq!(Label::from_probability(p), Label::Malignant);

        assert!(matches!(
            Knn::new(3).predict_proba(&FeatureVector::default()),
            Err(Error::NotFitted)
        ));
        assert!(matches!(Knn::new(3).fit(&[], 0), Err(Error::EmptyDataset)));
        // Single-class data is fine for KNN.
        let mono = vec![example(0, point(0.0, 0.0), Label::Normal)];
        assert!(Knn::new(3).fit(&mono, 0).is_ok());
    }

    #[test]
    fn knn_k1_recalls_training_set() {
        let data = separable(40, 3);
        let mut knn = Knn::new(1);
        knn.fit(&data, 0).unwrap();
        assert_eq!(training_accuracy(&knn, &data), 1.0);
    }

    #[test]
    fn forest_is_deterministic_and_order_free() {
        let data = separable(60, 5);
        let mut a = RandomForest::new(100, 4);
        let mut b = RandomForest::new(100, 4);
        a.fit(&data, 17).unwrap();
        b.fit(&data, 17).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tree_count(), 100);
        let mut c = RandomForest::new(100, 4);
        c.fit(&data, 18).unwrap();
        assert_ne!(a, c);

        let reversed: Vec<usize> = (0..100).rev().collect();
        let r = a.reordered(&reversed);
        let probes = separable(20, 99);
        for e in &probes {
            assert_eq!(
                a.predict_proba(&e.features).unwrap(),
                r.predict_proba(&e.features).unwrap()
            );
        }
        assert_eq!(training_accuracy(&a, &data), 1.0);
    }

    #[test]
    fn forest_unanimous_vote_is_one() {
        let data = separable(30, 8);
        let mut rf = RandomForest::new(25, 4);
        rf.fit(&data, 2).unwrap();
        let deep_malignant = FeatureVector::from_array(&point(0.45, 0.1));
        assert!(rf.votes(&deep_malignant).iter().all(|&v| v));
        assert_eq!(rf.predict_proba(&deep_malignant).unwrap(), 1.0);
    }

    #[test]
    fn forest_and_svm_reject_single_class() {
        let mono: Vec<Example> = (0..5)
            .map(|i| example(i, point(i as f64, 0.0), Label::Malignant))
            .collect();
        assert!(matches!(
            RandomForest::new(3, 4).fit(&mono, 0),
            Err(Error::SingleClassDataset)
        ));
        assert!(matches!(
            LinearSvm::new(1e-4, 2).fit(&mono, 0),
            Err(Error::SingleClassDataset)
        ));
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        assert!(matches!(Ann::new(4, cfg).fit(&mono, 0), Err(Error::SingleClassDataset)));
    }

    #[test]
    fn svm_separates_linearly_separable_data() {
        let data = separable(80, 11);
        let mut svm = LinearSvm::new(1e-4, 20);
        svm.fit(&data, 4).unwrap();
        assert_eq!(training_accuracy(&svm, &data), 1.0);
        let mut again = LinearSvm::new(1e-4, 20);
        again.fit(&data, 4).unwrap();
        assert_eq!(svm, again);
    }

    #[test]
    fn squashing_is_symmetric() {
        assert_eq!(squash_margin(0.0), 0.5);
        assert!((squash_margin(2.0) + squash_margin(-2.0) - 1.0).abs() < 1e-15);
        assert!(matches!(
            LinearSvm::new(1e-4, 1).margin(&FeatureVector::default()),
            Err(Error::NotFitted)
        ));
    }

    #[test]
    fn ann_learns_separable_data() {
        let data = separable(40, 13);
        let cfg = TrainConfig {
            epochs: 200,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let mut ann = Ann::new(16, cfg);
        assert!(matches!(
            ann.predict_proba(&FeatureVector::default()),
            Err(Error::NotFitted)
        ));
        ann.fit(&data, 1).unwrap();
        assert_eq!(training_accuracy(&ann, &data), 1.0);
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in ClassifierKind::ALL {
            assert_eq!(kind.as_str().parse::<ClassifierKind>().unwrap(), kind);
            assert_eq!(kind.build(&ComparisonConfig::default()).name(), kind.as_str());
        }
        assert!("xgboost".parse::<ClassifierKind>().is_err());
    }

    #[test]
    fn comparison_shares_folds() {
        let data = separable(30, 21);
        let cfg = ComparisonConfig {
            hidden: 8,
            train: TrainConfig {
                epochs: 20,
                ..TrainConfig::default()
            },
            rf_trees: 10,
            ..ComparisonConfig::default()
        };
        let table = run_comparison(&data, 3, 5, &ClassifierKind::ALL, &cfg).unwrap();
        assert_eq!(table.rows.len(), 5);
        for row in &table.rows {
            assert_eq!(row.assignment, table.rows[0].assignment);
        }
        let single = run_comparison(&data, 3, 5, &[ClassifierKind::Knn], &cfg).unwrap();
        assert_eq!(single.rows.len(), 1);
        assert_eq!(single.rows[0], table.rows[4]);
    }
}
