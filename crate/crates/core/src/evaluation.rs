//! Stratified K-fold cross-validation and slide-level metrics.
//!
//! Accuracy, sensitivity, precision and F1 are percentages; AUC is a
//! fraction. A metric whose denominator is zero is undefined (`None`) and is
//! left out of fold averages rather than counted as zero.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::ingest::Label;
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub slide_id: String,
    pub label: Label,
    pub features: FeatureVector,
}

/// A slide-level classifier that can be trained on one fold and scored on
/// another.
pub trait Classifier: Send {
    fn name(&self) -> &str;

    fn fit(&mut self, data: &[Example], seed: u64) -> Result<()>;

    /// Probability that the slide is malignant.
    fn predict_proba(&self, features: &FeatureVector) -> Result<f64>;

    fn predict_proba_batch(&self, features: &[FeatureVector]) -> Result<Vec<f64>> {
        features.iter().map(|f| self.predict_proba(f)).collect()
    }
}

pub type ClassifierFactory<'a> = dyn Fn() -> Box<dyn Classifier> + Sync + 'a;

/// Malignant is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Malignant, Label::Malignant) => self.tp += 1,
            (Label::Normal, Label::Normal) => self.tn += 1,
            (Label::Normal, Label::Malignant) => self.fp += 1,
            (Label::Malignant, Label::Normal) => self.fn_ += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
}

fn percent(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

/// Harmonic mean of precision and sensitivity, both in percent.
pub fn f1_score(precision: f64, sensitivity: f64) -> Option<f64> {
    let sum = precision + sensitivity;
    (sum > 0.0).then(|| 2.0 * precision * sensitivity / sum)
}

/// Accuracy, sensitivity, precision and F1 from counts; `auc` is left unset.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricSet> {
    if cm.total() == 0 {
        return Err(Error::EmptyEvaluation);
    }
    let sensitivity = percent(cm.tp, cm.tp + cm.fn_);
    let precision = percent(cm.tp, cm.tp + cm.fp);
    let f1 = match (precision, sensitivity) {
        (Some(p), Some(s)) => f1_score(p, s),
        _ => None,
    };
    Ok(MetricSet {
        accuracy: percent(cm.tp + cm.tn, cm.total()),
        sensitivity,
        precision,
        f1,
        auc: None,
    })
}

/// Area under the empirical ROC curve as the normalised Mann–Whitney U:
/// the fraction of (malignant, normal) pairs where the malignant slide
/// scores higher, ties counting one half.
///
/// Ranks are accumulated doubled so that mid-ranks of tied groups stay
/// integral and the result is exact.
pub fn roc_auc(scores: &[(f64, Label)]) -> Result<f64> {
    let positives = scores.iter().filter(|(_, l)| l.is_malignant()).count() as u64;
    let negatives = scores.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClassScores);
    }
    let mut sorted: Vec<(f64, Label)> = scores.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut doubled_rank_sum: u64 = 0;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end].0.total_cmp(&sorted[start].0) == Ordering::Equal {
            end += 1;
        }
        // Ranks start+1..=end share the mid-rank (start + 1 + end) / 2.
        let doubled_mid_rank = (start + 1 + end) as u64;
        let group_positives = sorted[start..end].iter().filter(|(_, l)| l.is_malignant()).count() as u64;
        doubled_rank_sum += doubled_mid_rank * group_positives;
        start = end;
    }
    let doubled_u = doubled_rank_sum - positives * (positives + 1);
    Ok(doubled_u as f64 / (2 * positives * negatives) as f64)
}

/// Disjoint folds covering the dataset, as sorted dataset indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub folds: Vec<Vec<usize>>,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Fold number (0-based) of each dataset index.
    pub fn fold_of(&self) -> Vec<usize> {
        let n = self.folds.iter().map(Vec::len).sum();
        let mut out = vec![usize::MAX; n];
        for (f, members) in self.folds.iter().enumerate() {
            for &i in members {
                out[i] = f;
            }
        }
        out
    }

    pub fn slide_ids(&self, dataset: &[Example]) -> Vec<Vec<String>> {
        self.folds
            .iter()
            .map(|f| f.iter().map(|&i| dataset[i].slide_id.clone()).collect())
            .collect()
    }
}

/// Shuffles each class with `seed` (malignant first, then normal, from one
/// stream) and deals the two shuffled lists round-robin into `k` folds with a
/// single running counter. Carrying the counter across classes keeps fold
/// sizes within one of each other as well as per-class counts.
pub fn stratified_kfold(labels: &[Label], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in [Label::Malignant, Label::Normal] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::TooFewExamples {
                label: class.as_str(),
                have: members.len(),
                folds: k,
            });
        }
        members.shuffle(&mut rng);
        for i in members {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldAssignment { folds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlidePrediction {
    pub slide_id: String,
    pub label: Label,
    pub p_malignant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    /// 1-based fold number.
    pub fold: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
    pub predictions: Vec<SlidePrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub classifier: String,
    pub seed: u64,
    pub assignment: FoldAssignment,
    pub folds: Vec<FoldResult>,
    pub average: MetricSet,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Arithmetic mean of each metric over the rows where it is defined.
pub fn average_metrics(rows: &[MetricSet]) -> MetricSet {
    MetricSet {
        accuracy: mean_defined(rows.iter().map(|m| m.accuracy)),
        sensitivity: mean_defined(rows.iter().map(|m| m.sensitivity)),
        precision: mean_defined(rows.iter().map(|m| m.precision)),
        f1: mean_defined(rows.iter().map(|m| m.f1)),
        auc: mean_defined(rows.iter().map(|m| m.auc)),
    }
}

/// Scores a fitted classifier on the given examples.
pub fn evaluate_fold(classifier: &dyn Classifier, held_out: &[&Example], fold: usize) -> Result<FoldResult> {
    let features: Vec<FeatureVector> = held_out.iter().map(|e| e.features).collect();
    let probs = classifier.predict_proba_batch(&features)?;
    let mut confusion = ConfusionMatrix::default();
    let mut predictions = Vec::with_capacity(held_out.len());
    for (example, &p) in held_out.iter().zip(&probs) {
        confusion.record(example.label, Label::from_probability(p));
        predictions.push(SlidePrediction {
            slide_id: example.slide_id.clone(),
            label: example.label,
            p_malignant: p,
        });
    }
    let mut metrics = compute_metrics(&confusion)?;
    let scores: Vec<(f64, Label)> = predictions.iter().map(|p| (p.p_malignant, p.label)).collect();
    metrics.auc = roc_auc(&scores).ok();
    Ok(FoldResult {
        fold,
        confusion,
        metrics,
        predictions,
    })
}

/// Trains a fresh classifier per fold on the other folds and evaluates it on
/// the held-out one. Fold `i` trains with seed `derive_seed(seed, "fold-i")`;
/// folds run on the current rayon pool and are merged in fold order.
pub fn cross_validate_with(
    dataset: &[Example],
    assignment: &FoldAssignment,
    factory: &ClassifierFactory<'_>,
    seed: u64,
) -> Result<EvaluationReport> {
    let fold_of = assignment.fold_of();
    let folds: Vec<FoldResult> = (0..assignment.k())
        .into_par_iter()
        .map(|f| {
            let train: Vec<Example> = dataset
                .iter()
                .zip(&fold_of)
                .filter(|(_, &g)| g != f)
                .map(|(e, _)| e.clone())
                .collect();
            let held_out: Vec<&Example> = assignment.folds[f].iter().map(|&i| &dataset[i]).collect();
            let mut classifier = factory();
            classifier.fit(&train, derive_seed(seed, &format!("fold-{f}")))?;
            evaluate_fold(classifier.as_ref(), &held_out, f + 1)
        })
        .collect::<Result<_>>()?;
    let name = factory().name().to_string();
    let average = average_metrics(&folds.iter().map(|f| f.metrics).collect::<Vec<_>>());
    Ok(EvaluationReport {
        classifier: name,
        seed,
        assignment: assignment.clone(),
        folds,
        average,
    })
}

/// Stratified K-fold cross-validation; folds are drawn with
/// `derive_seed(seed, "folds")`.
pub fn cross_validate(
    dataset: &[Example],
    factory: &ClassifierFactory<'_>,
    k: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    let labels: Vec<Label> = dataset.iter().map(|e| e.label).collect();
    let assignment = stratified_kfold(&labels, k, derive_seed(seed, "folds"))?;
    cross_validate_with(dataset, &assignment, factory, seed)
}

pub const REPORT_HEADER: &str = "fold,accuracy,sensitivity,precision,f1,auc";

/// Percentages with two decimals, AUC with four; undefined values are empty.
pub fn format_metric_fields(m: &MetricSet) -> String {
    let pct = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_default();
    format!(
        "{},{},{},{},{}",
        pct(m.accuracy),
        pct(m.sensitivity),
        pct(m.precision),
        pct(m.f1),
        m.auc.map(|x| format!("{x:.4}")).unwrap_or_default()
    )
}

pub fn write_report_csv(path: &Path, report: &EvaluationReport) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(out, "{REPORT_HEADER}").map_err(io)?;
    for f in &report.folds {
        writeln!(out, "{},{}", f.fold, format_metric_fields(&f.metrics)).map_err(io)?;
    }
    writeln!(out, "average,{}", format_metric_fields(&report.average)).map_err(io)?;
    out.flush().map_err(io)
}

pub fn write_report_json(path: &Path, report: &EvaluationReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serialises");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// `slide_id,label,fold` with 1-based folds, in dataset order.
pub fn write_fold_manifest(path: &Path, assignment: &FoldAssignment, dataset: &[Example]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(out, "slide_id,label,fold").map_err(io)?;
    for (example, fold) in dataset.iter().zip(assignment.fold_of()) {
        writeln!(out, "{},{},{}", example.slide_id, example.label, fold + 1).map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cm(tp: u64, tn: u64, fp: u64, fn_: u64) -> ConfusionMatrix {
        ConfusionMatrix { tp, tn, fp, fn_ }
    }

    #[test]
    fn metrics_examples() {
        let m = compute_metrics(&cm(5, 5, 0, 0)).unwrap();
        assert_eq!(
            (m.accuracy, m.sensitivity, m.precision, m.f1),
            (Some(100.0), Some(100.0), Some(100.0), Some(100.0))
        );
        let m = compute_metrics(&cm(3, 5, 1, 1)).unwrap();
        assert_eq!(m.accuracy, Some(80.0));
        assert_eq!(m.sensitivity, Some(75.0));
        assert_eq!(m.precision, Some(75.0));
        assert!((m.f1.unwrap() - 75.0).abs() < 1e-12);
        assert!(matches!(compute_metrics(&cm(0, 0, 0, 0)), Err(Error::EmptyEvaluation)));
    }

    #[test]
    fn f1_from_published_fold_one() {
        // Fold 1 of the published cross-validation table: P 89.74, S 100, F1 94.59.
        assert!((f1_score(89.74, 100.0).unwrap() - 94.59).abs() <= 0.01);
    }

    #[test]
    fn undefined_metrics() {
        // No malignant slides and none predicted: sensitivity and precision undefined.
        let m = compute_metrics(&cm(0, 4, 0, 0)).unwrap();
        assert_eq!(m.accuracy, Some(100.0));
        assert_eq!((m.sensitivity, m.precision, m.f1), (None, None, None));
        // tp = 0 with misses both ways: both defined at 0, F1 undefined.
        let m = compute_metrics(&cm(0, 2, 1, 1)).unwrap();
        assert_eq!((m.sensitivity, m.precision, m.f1), (Some(0.0), Some(0.0), None));

        let avg = average_metrics(&[
            MetricSet {
                sensitivity: Some(90.0),
                ..Default::default()
            },
            MetricSet {
                sensitivity: None,
                ..Default::default()
            },
            MetricSet {
                sensitivity: Some(100.0),
                ..Default::default()
            },
        ]);
        assert_eq!(avg.sensitivity, Some(95.0));
        assert_eq!(avg.accuracy, None);
    }

    #[test]
    fn auc_examples() {
        use Label::*;
        assert_eq!(
            roc_auc(&[(0.9, Malignant), (0.8, Malignant), (0.2, Normal)]).unwrap(),
            1.0
        );
        assert_eq!(roc_auc(&[(0.5, Malignant), (0.5, Normal), (0.5, Normal)]).unwrap(), 0.5);
        assert_eq!(
            roc_auc(&[(0.9, Malignant), (0.8, Normal), (0.7, Malignant), (0.3, Normal)]).unwrap(),
            0.75
        );
        assert!(matches!(roc_auc(&[(0.3, Normal)]), Err(Error::SingleClassScores)));
        assert!(matches!(roc_auc(&[]), Err(Error::SingleClassScores)));
    }

    #[test]
    fn kfold_158_174_class_sizes() {
        let mut labels = vec![Label::Normal; 158];
        labels.extend(vec![Label::Malignant; 174]);
        let a = stratified_kfold(&labels, 5, 42).unwrap();
        let sizes: Vec<usize> = a.folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![67, 67, 66, 66, 66]);
        for f in &a.folds {
            let m = f.iter().filter(|&&i| labels[i] == Label::Malignant).count();
            assert!(m == 34 || m == 35);
        }
        assert_eq!(a, stratified_kfold(&labels, 5, 42).unwrap());
        assert_ne!(a, stratified_kfold(&labels, 5, 43).unwrap());
    }

    #[test]
    fn kfold_small_case() {
        use Label::*;
        let labels = [Malignant, Normal, Malignant, Normal, Malignant, Normal];
        let a = stratified_kfold(&labels, 2, 0).unwrap();
        let counts: Vec<(usize, usize)> = a
            .folds
            .iter()
            .map(|f| {
                let m = f.iter().filter(|&&i| labels[i] == Malignant).count();
                (m, f.len() - m)
            })
            .collect();
        assert_eq!(counts, vec![(2, 1), (1, 2)]);
    }

    #[test]
    fn kfold_errors() {
        let labels = vec![Label::Malignant, Label::Normal, Label::Normal];
        assert!(matches!(
            stratified_kfold(&labels, 2, 0),
            Err(Error::TooFewExamples {
                label: "malignant",
                have: 1,
                folds: 2
            })
        ));
        assert!(stratified_kfold(&labels, 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn kfold_is_stratified_partition(n_mal in 2usize..60, n_norm in 2usize..60, k in 2usize..6, seed in any::<u64>()) {
            prop_assume!(n_mal >= k && n_norm >= k);
            let mut labels = vec![Label::Malignant; n_mal];
            labels.extend(vec![Label::Normal; n_norm]);
            let a = stratified_kfold(&labels, k, seed).unwrap();
            let mut all: Vec<usize> = a.folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for f in &a.folds {
                let m = f.iter().filter(|&&i| labels[i] == Label::Malignant).count() as f64;
                let nm = f.len() as f64 - m;
                prop_assert!((m - n_mal as f64 / k as f64).abs() < 1.0);
                prop_assert!((nm - n_norm as f64 / k as f64).abs() < 1.0);
            }
        }

        #[test]
        fn metrics_scale_free(tp in 0u64..50, tn in 0u64..50, fp in 0u64..50, fn_ in 0u64..50, s in 1u64..20) {
            prop_assume!(tp + tn + fp + fn_ > 0);
            let a = compute_metrics(&cm(tp, tn, fp, fn_)).unwrap();
            let b = compute_metrics(&cm(s * tp, s * tn, s * fp, s * fn_)).unwrap();
            let close = |x: Option<f64>, y: Option<f64>| match (x, y) {
                (Some(x), Some(y)) => (x - y).abs() < 1e-9,
                (None, None) => true,
                _ => false,
            };
            prop_assert!(close(a.accuracy, b.accuracy));
            prop_assert!(close(a.sensitivity, b.sensitivity));
            prop_assert!(close(a.precision, b.precision));
            prop_assert!(close(a.f1, b.f1));
        }

        #[test]
        fn auc_invariant_under_monotone_map(scores in proptest::collection::vec((0u32..20, any::<bool>()), 2..40)) {
            let labelled: Vec<(f64, Label)> = scores
                .iter()
                .map(|&(s, m)| (s as f64 / 20.0, if m { Label::Malignant } else { Label::Normal }))
                .collect();
            prop_assume!(roc_auc(&labelled).is_ok());
            let mapped: Vec<(f64, Label)> = labelled.iter().map(|&(s, l)| ((3.0 * s).exp() - 7.0, l)).collect();
            prop_assert_eq!(roc_auc(&labelled).unwrap(), roc_auc(&mapped).unwrap());
        }

        #[test]
        fn auc_flips_with_labels(scores in proptest::collection::btree_set(0u32..10_000, 2..40), mask in any::<u64>()) {
            let labelled: Vec<(f64, Label)> = scores
                .iter()
                .enumerate()
                .map(|(i, &s)| (s as f64, if mask >> (i % 64) & 1 == 1 { Label::Malignant } else { Label::Normal }))
                .collect();
            prop_assume!(roc_auc(&labelled).is_ok());
            let flipped: Vec<(f64, Label)> = labelled
                .iter()
                .map(|&(s, l)| (s, if l.is_malignant() { Label::Normal } else { Label::Malignant }))
                .collect();
            let (a, b) = (roc_auc(&labelled).unwrap(), roc_auc(&flipped).unwrap());
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }
    }
}
