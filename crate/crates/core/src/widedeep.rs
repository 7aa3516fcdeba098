//! The wide & deep slide classifier.
//!
//! ```text
//!   mph (10) ──► 300 ─► 300 ─┐
//!   lsrl (2) ──► 300 ─► 300 ─┤
//!   mcc  (5) ──► 300 ─► 300 ─┼─► concat (901) ─► 300 ─► 300 ─► softmax (2)
//!   mtr  (1) ────────────────┘
//! ```
//!
//! The three feature families are the deep inputs, each with its own
//! (unshared) branch. The malignant tissue ratio is the wide input and
//! enters the concatenation unchanged.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::evaluation::{Classifier, Example};
use crate::features::{FeatureVector, HISTOGRAM_BINS, MCC_RADII};
use crate::ingest::Label;
use crate::netcore::{
    init_network, train, BranchSpec, GraphSpec, InputBatch, InputSpec, ModelFile, NetworkGraph, TrainConfig,
};

pub const TOPOLOGY_TAG: &str = "widedeep-v1";
pub const HIDDEN_WIDTH: usize = 300;

pub const INPUT_MPH: &str = "mph";
pub const INPUT_LSRL: &str = "lsrl";
pub const INPUT_MCC: &str = "mcc";
pub const INPUT_MTR: &str = "mtr";

/// Wide & deep topology with every hidden layer `hidden` units wide.
pub fn widedeep_spec(hidden: usize) -> GraphSpec {
    let input = |name: &str, width| InputSpec {
        name: name.into(),
        width,
    };
    let branch = |name: &str| BranchSpec {
        input: name.into(),
        hidden: vec![hidden, hidden],
    };
    GraphSpec {
        inputs: vec![
            input(INPUT_MPH, HISTOGRAM_BINS),
            input(INPUT_LSRL, 2),
            input(INPUT_MCC, MCC_RADII.len()),
            input(INPUT_MTR, 1),
        ],
        branches: vec![branch(INPUT_MPH), branch(INPUT_LSRL), branch(INPUT_MCC)],
        passthrough: vec![INPUT_MTR.into()],
        head_hidden: vec![hidden, hidden],
    }
}

/// Routes feature vectors to the four network inputs.
pub fn feature_batch(spec: &GraphSpec, features: &[FeatureVector]) -> Result<InputBatch> {
    let n = features.len();
    let mut mph = Array2::zeros((n, HISTOGRAM_BINS));
    let mut lsrl = Array2::zeros((n, 2));
    let mut mcc = Array2::zeros((n, MCC_RADII.len()));
    let mut mtr = Array2::zeros((n, 1));
    for (i, fv) in features.iter().enumerate() {
        for (j, v) in fv.mph.bins.iter().enumerate() {
            mph[[i, j]] = *v;
        }
        lsrl[[i, 0]] = fv.lsrl.slope;
        lsrl[[i, 1]] = fv.lsrl.intercept;
        for (j, v) in fv.mcc.values.iter().enumerate() {
            mcc[[i, j]] = *v;
        }
        mtr[[i, 0]] = fv.mtr;
    }
    InputBatch::new(
        spec,
        vec![(INPUT_MPH, mph), (INPUT_LSRL, lsrl), (INPUT_MCC, mcc), (INPUT_MTR, mtr)],
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlidePrediction {
    pub label: Label,
    pub p_malignant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WideDeepModel {
    pub network: NetworkGraph,
    pub config: TrainConfig,
}

pub fn build_widedeep(seed: u64) -> WideDeepModel {
    build_widedeep_with(HIDDEN_WIDTH, seed)
}

pub fn build_widedeep_with(hidden: usize, seed: u64) -> WideDeepModel {
    let network = init_network(&widedeep_spec(hidden), seed).expect("wide & deep topology is valid");
    WideDeepModel {
        network,
        config: TrainConfig {
            seed,
            ..TrainConfig::default()
        },
    }
}

fn check_both_classes(labels: &[Label]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let malignant = labels.iter().filter(|l| l.is_malignant()).count();
    if malignant == 0 || malignant == labels.len() {
        return Err(Error::SingleClassDataset);
    }
    Ok(())
}

/// Builds a network with `hidden`-wide layers from `config.seed` and trains
/// it full-batch on the examples.
pub fn train_widedeep_with(
    hidden: usize,
    data: &[(FeatureVector, Label)],
    config: &TrainConfig,
) -> Result<WideDeepModel> {
    let labels: Vec<Label> = data.iter().map(|(_, l)| *l).collect();
    check_both_classes(&labels)?;
    config.validate()?;
    let model = build_widedeep_with(hidden, config.seed);
    let features: Vec<FeatureVector> = data.iter().map(|(f, _)| *f).collect();
    let batch = feature_batch(&model.network.spec, &features)?;
    let outcome = train(model.network, &batch, &labels, config)?;
    Ok(WideDeepModel {
        network: outcome.network,
        config: *config,
    })
}

pub fn train_widedeep(data: &[(FeatureVector, Label)], config: &TrainConfig) -> Result<WideDeepModel> {
    train_widedeep_with(HIDDEN_WIDTH, data, config)
}

impl WideDeepModel {
    pub fn predict_slide(&self, features: &FeatureVector) -> SlidePrediction {
        let p = self.predict_batch(std::slice::from_ref(features))[0];
        SlidePrediction {
            label: Label::from_probability(p),
            p_malignant: p,
        }
    }

    /// Malignant probability per feature vector.
    pub fn predict_batch(&self, features: &[FeatureVector]) -> Vec<f64> {
        let batch = feature_batch(&self.network.spec, features).expect("spec built by this module");
        let probs = self.network.forward_batch(&batch).expect("batch matches spec");
        probs.column(0).to_vec()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        ModelFile::new(TOPOLOGY_TAG, self.config, self.network.clone()).save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = ModelFile::load(path)?;
        let bad = |reason: String| Error::ModelFormat {
            path: path.to_path_buf(),
            reason,
        };
        if file.topology != TOPOLOGY_TAG {
            return Err(bad(format!(
                "expected topology {TOPOLOGY_TAG:?}, found {:?}",
                file.topology
            )));
        }
        let hidden = file.network.spec.head_hidden.first().copied().unwrap_or(0);
        if file.network.spec != widedeep_spec(hidden) {
            return Err(bad("network is not a wide & deep graph".into()));
        }
        Ok(Self {
            network: file.network,
            config: file.config,
        })
    }
}

/// [`Classifier`] adapter used by cross-validation. The fold seed replaces
/// `config.seed`.
pub struct WideDeepClassifier {
    pub hidden: usize,
    pub config: TrainConfig,
    model: Option<WideDeepModel>,
}

impl WideDeepClassifier {
    pub fn new(config: TrainConfig) -> Self {
        Self::with_hidden(HIDDEN_WIDTH, config)
    }

    pub fn with_hidden(hidden: usize, config: TrainConfig) -> Self {
        Self {
            hidden,
            config,
            model: None,
        }
    }

    pub fn model(&self) -> Option<&WideDeepModel> {
        self.model.as_ref()
    }
}

impl Classifier for WideDeepClassifier {
    fn name(&self) -> &str {
        "widedeep"
    }

    fn fit(&mut self, data: &[Example], seed: u64) -> Result<()> {
        let pairs: Vec<(FeatureVector, Label)> = data.iter().map(|e| (e.features, e.label)).collect();
        let config = TrainConfig { seed, ..self.config };
        self.model = Some(train_widedeep_with(self.hidden, &pairs, &config)?);
        Ok(())
    }

    fn predict_proba(&self, features: &FeatureVector) -> Result<f64> {
        Ok(self
            .model
            .as_ref()
            .ok_or(Error::NotFitted)?
            .predict_slide(features)
            .p_malignant)
    }

    fn predict_proba_batch(&self, features: &[FeatureVector]) -> Result<Vec<f64>> {
        Ok(self.model.as_ref().ok_or(Error::NotFitted)?.predict_batch(features))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Histogram10, MccProfile, RegressionLine};
    use crate::netcore::Optimizer;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_fv(rng: &mut ChaCha8Rng) -> FeatureVector {
        let mut fv = FeatureVector {
            mtr: rng.random_range(0.0..1.0),
            ..Default::default()
        };
        for b in &mut fv.mph.bins {
            *b = rng.random_range(0.0..0.1);
        }
        fv.lsrl = RegressionLine {
            slope: rng.random_range(-0.02..0.02),
            intercept: rng.random_range(-0.1..0.1),
        };
        for v in &mut fv.mcc.values {
            *v = rng.random_range(0.0..1.0);
        }
        fv
    }

    #[test]
    fn topology_widths() {
        let model = build_widedeep(1);
        let spec = &model.network.spec;
        let widths: Vec<usize> = spec.inputs.iter().map(|i| i.width).collect();
        assert_eq!(widths, vec![10, 2, 5, 1]);
        assert_eq!(model.network.concat_width(), 901);
        assert_eq!(model.network.output_width(), 2);
        let expected = (10 * 300 + 300)
            + (300 * 300 + 300)
            + (2 * 300 + 300)
            + (300 * 300 + 300)
            + (5 * 300 + 300)
            + (300 * 300 + 300)
            + (901 * 300 + 300)
            + (300 * 300 + 300)
            + (300 * 2 + 2);
        assert_eq!(expected, 638_402);
        assert_eq!(model.network.parameter_count(), 638_402);
        assert_eq!(build_widedeep(1), build_widedeep(1));
    }

    #[test]
    fn zero_model_ties_to_malignant() {
        let mut model = build_widedeep_with(16, 3);
        for layer in model.network.layers_mut() {
            layer.weights.fill(0.0);
        }
        let pred = model.predict_slide(&random_fv(&mut ChaCha8Rng::seed_from_u64(0)));
        assert_eq!(pred.p_malignant, 0.5);
        assert_eq!(pred.label, Label::Malignant);
    }

    #[test]
    fn threshold_matches_argmax() {
        let model = build_widedeep_with(16, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fvs: Vec<FeatureVector> = (0..50).map(|_| random_fv(&mut rng)).collect();
        let batch = feature_batch(&model.network.spec, &fvs).unwrap();
        let probs = model.network.forward_batch(&batch).unwrap();
        for (fv, row) in fvs.iter().zip(probs.rows()) {
            let argmax = if row[0] > row[1] {
                Label::Malignant
            } else {
                Label::Normal
            };
            if row[0] != row[1] {
                assert_eq!(model.predict_slide(fv).label, argmax);
            }
        }
    }

    #[test]
    fn mcc_inputs_do_not_reach_mph_branch_when_mcc_branch_is_zero() {
        let mut model = build_widedeep_with(12, 9);
        // Branch order: mph, lsrl, mcc.
        for layer in &mut model.network.branches[2] {
            layer.weights.fill(0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base: Vec<FeatureVector> = (0..6).map(|_| random_fv(&mut rng)).collect();
        let mut permuted = base.clone();
        for fv in &mut permuted {
            fv.mcc.values.reverse();
            fv.mcc.values[0] += 0.3;
        }
        let labels = [
            Label::Malignant,
            Label::Normal,
            Label::Normal,
            Label::Malignant,
            Label::Normal,
            Label::Malignant,
        ];
        let spec = &model.network.spec;
        let (_, g1) = model
            .network
            .loss_and_gradients(&feature_batch(spec, &base).unwrap(), &labels)
            .unwrap();
        let (_, g2) = model
            .network
            .loss_and_gradients(&feature_batch(spec, &permuted).unwrap(), &labels)
            .unwrap();
        assert_eq!(g1.branches[0], g2.branches[0]);
        assert_eq!(g1.branches[1], g2.branches[1]);
    }

    #[test]
    fn wide_input_bypasses_branches() {
        let mut model = build_widedeep_with(8, 2);
        // Zero the 24 branch-derived columns of the first head layer.
        model.network.head[0].weights.slice_mut(ndarray::s![.., ..24]).fill(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let logits_at = |mtr: f64, rng: &mut ChaCha8Rng| {
            let mut fv = random_fv(rng);
            fv.mtr = mtr;
            let batch = feature_batch(&model.network.spec, &[fv]).unwrap();
            model.network.logits_batch(&batch).unwrap().row(0).to_vec()
        };
        // Different branch inputs, same MTR: same logits.
        assert_eq!(logits_at(0.3, &mut rng), logits_at(0.3, &mut rng));
        // Affine in MTR as long as the head ReLUs keep their pattern: check
        // on a fine grid where the second difference vanishes.
        let (a, b, c) = (
            logits_at(0.300, &mut rng),
            logits_at(0.301, &mut rng),
            logits_at(0.302, &mut rng),
        );
        for k in 0..2 {
            assert!((a[k] - 2.0 * b[k] + c[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn single_class_rejected() {
        let fv = FeatureVector::default();
        let data = vec![(fv, Label::Malignant); 4];
        assert!(matches!(
            train_widedeep(&data, &TrainConfig::default()),
            Err(Error::SingleClassDataset)
        ));
    }

    fn toy_dataset(n: usize, seed: u64) -> Vec<(FeatureVector, Label)> {
        // Malignant: high MTR, mass in the upper bins, compact components.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let malignant = i % 2 == 0;
                let mut fv = FeatureVector::default();
                if malignant {
                    fv.mtr = rng.random_range(0.15..0.5);
                    fv.mph.bins[9] = fv.mtr * 0.6;
                    fv.mph.bins[7] = fv.mtr * 0.4;
                    fv.mcc = MccProfile {
                        values: [0.1, 0.08, 0.05, 0.04, 0.03],
                    };
                } else {
                    fv.mtr = rng.random_range(0.0..0.04);
                    fv.mph.bins[2] = fv.mtr;
                    fv.mcc = MccProfile {
                        values: [0.9, 0.7, 0.5, 0.4, 0.3],
                    };
                }
                fv.lsrl = crate::features::least_squares_regression_line(&Histogram10 { bins: fv.mph.bins });
                (fv, if malignant { Label::Malignant } else { Label::Normal })
            })
            .collect()
    }

    #[test]
    fn trained_model_separates_toy_data() {
        let data = toy_dataset(40, 1);
        let cfg = TrainConfig {
            epochs: 150,
            learning_rate: 1e-3,
            seed: 3,
            optimizer: Optimizer::Adam,
        };
        let model = train_widedeep_with(32, &data, &cfg).unwrap();
        let again = train_widedeep_with(32, &data, &cfg).unwrap();
        assert_eq!(model, again);
        let held_out = toy_dataset(10, 99);
        for (fv, label) in &held_out {
            assert_eq!(model.predict_slide(fv).label, *label);
        }
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("wd.json");
        let model = build_widedeep_with(8, 12);
        model.save(&path).unwrap();
        let loaded = WideDeepModel::load(&path).unwrap();
        let fv = random_fv(&mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(model.predict_slide(&fv), loaded.predict_slide(&fv));

        ModelFile::new("mlp-v1", TrainConfig::default(), model.network.clone())
            .save(&path)
            .unwrap();
        assert!(matches!(WideDeepModel::load(&path), Err(Error::ModelFormat { .. })));
    }
}
