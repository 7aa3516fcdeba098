//! A small dense-network engine for branch/concatenate/head graphs.
//!
//! Each named input either feeds a branch (a stack of dense layers) or is
//! passed straight through to the concatenation. The concatenation order is
//! branch outputs in branch order, then pass-through inputs in declaration
//! order. The head is a stack of dense layers ending in a two-way softmax
//! over `(malignant, normal)`.
//!
//! Gradients are computed by hand-written backpropagation of the mean
//! categorical cross-entropy over a batch; training is full-batch.

use std::io::Write;
use std::path::Path;

use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Label;

/// Output classes, in column order.
pub const CLASSES: [Label; 2] = [Label::Malignant, Label::Normal];
pub const OUTPUT_WIDTH: usize = 2;

pub const MODEL_FORMAT: &str = "slidescreen-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `out_dim × in_dim`.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn pre_activation(&self, input: &Array2<f64>) -> Array2<f64> {
        let mut z = input.dot(&self.weights.t());
        z += &self.biases;
        z
    }

    fn parameter_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

fn activate(activation: Activation, z: &Array2<f64>) -> Array2<f64> {
    match activation {
        Activation::Relu => z.mapv(|v| v.max(0.0)),
        Activation::Identity => z.clone(),
        Activation::Softmax => softmax_rows(z),
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

fn log_sum_exp(row: ndarray::ArrayView1<f64>) -> f64 {
    let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn class_index(label: Label) -> usize {
    match label {
        Label::Malignant => 0,
        Label::Normal => 1,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSpec {
    pub name: String,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub input: String,
    /// Hidden widths, each followed by ReLU.
    pub hidden: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub inputs: Vec<InputSpec>,
    pub branches: Vec<BranchSpec>,
    pub passthrough: Vec<String>,
    /// Hidden widths of the head before the softmax layer.
    pub head_hidden: Vec<usize>,
}

impl GraphSpec {
    pub fn input_index(&self, name: &str) -> Option<usize> {
        self.inputs.iter().position(|i| i.name == name)
    }

    fn require_input(&self, name: &str) -> Result<usize> {
        self.input_index(name)
            .ok_or_else(|| Error::InvalidTopology(format!("unknown input {name:?}")))
    }

    pub fn concat_width(&self) -> usize {
        let branches: usize = self
            .branches
            .iter()
            .map(|b| b.hidden.last().copied().unwrap_or(0))
            .sum();
        let passthrough: usize = self
            .passthrough
            .iter()
            .filter_map(|n| self.input_index(n))
            .map(|i| self.inputs[i].width)
            .sum();
        branches + passthrough
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidTopology(m));
        for (i, input) in self.inputs.iter().enumerate() {
            if input.width == 0 {
                return bad(format!("input {:?} has zero width", input.name));
            }
            if self.inputs[..i].iter().any(|o| o.name == input.name) {
                return bad(format!("input {:?} declared twice", input.name));
            }
        }
        for branch in &self.branches {
            self.require_input(&branch.input)?;
            if branch.hidden.is_empty() || branch.hidden.contains(&0) {
                return bad(format!("branch on {:?} needs non-zero hidden widths", branch.input));
            }
        }
        for name in &self.passthrough {
            self.require_input(name)?;
        }
        if self.head_hidden.contains(&0) {
            return bad("head hidden width of zero".into());
        }
        if self.concat_width() == 0 {
            return bad("nothing feeds the concatenation".into());
        }
        Ok(())
    }

    /// `(in, out, activation)` for every layer, branches first, then head.
    fn layer_shapes(&self) -> Vec<(usize, usize, Activation)> {
        let mut shapes = Vec::new();
        for branch in &self.branches {
            let mut width = self.inputs[self.input_index(&branch.input).unwrap()].width;
            for &h in &branch.hidden {
                shapes.push((width, h, Activation::Relu));
                width = h;
            }
        }
        let mut width = self.concat_width();
        for &h in &self.head_hidden {
            shapes.push((width, h, Activation::Relu));
            width = h;
        }
        shapes.push((width, OUTPUT_WIDTH, Activation::Softmax));
        shapes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkGraph {
    pub spec: GraphSpec,
    pub branches: Vec<Vec<DenseLayer>>,
    pub head: Vec<DenseLayer>,
}

/// Weights uniform in `±sqrt(6 / fan_in)`, biases zero. Layers are filled in
/// the order branches-then-head, each weight matrix row-major, from one
/// ChaCha8 stream seeded with `seed`.
pub fn init_network(spec: &GraphSpec, seed: u64) -> Result<NetworkGraph> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = spec.layer_shapes().into_iter().map(|(fan_in, out, activation)| {
        let bound = (6.0 / fan_in as f64).sqrt();
        let weights = Array2::from_shape_fn((out, fan_in), |_| rng.random_range(-bound..bound));
        DenseLayer {
            weights,
            biases: Array1::zeros(out),
            activation,
        }
    });
    let branches = spec
        .branches
        .iter()
        .map(|b| layers.by_ref().take(b.hidden.len()).collect())
        .collect();
    let head = layers.collect();
    Ok(NetworkGraph {
        spec: spec.clone(),
        branches,
        head,
    })
}

/// Probability pair from the softmax head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbPair {
    pub malignant: f64,
    pub normal: f64,
}

/// Row-aligned input matrices, one per declared input.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBatch {
    columns: Vec<Array2<f64>>,
}

impl InputBatch {
    pub fn new(spec: &GraphSpec, named: Vec<(&str, Array2<f64>)>) -> Result<Self> {
        let mut columns: Vec<Option<Array2<f64>>> = vec![None; spec.inputs.len()];
        for (name, matrix) in named {
            let idx = spec
                .input_index(name)
                .ok_or_else(|| Error::ShapeMismatch(format!("unknown input {name:?}")))?;
            let want = spec.inputs[idx].width;
            if matrix.ncols() != want {
                return Err(Error::ShapeMismatch(format!(
                    "input {name:?} has width {}, expected {want}",
                    matrix.ncols()
                )));
            }
            if columns[idx].replace(matrix).is_some() {
                return Err(Error::ShapeMismatch(format!("input {name:?} given twice")));
            }
        }
        let columns: Vec<Array2<f64>> = columns
            .into_iter()
            .zip(&spec.inputs)
            .map(|(c, s)| c.ok_or_else(|| Error::ShapeMismatch(format!("missing input {:?}", s.name))))
            .collect::<Result<_>>()?;
        if let Some(first) = columns.first() {
            if columns.iter().any(|c| c.nrows() != first.nrows()) {
                return Err(Error::ShapeMismatch("inputs have differing row counts".into()));
            }
        }
        Ok(Self { columns })
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.nrows())
    }

    /// Single-row view of one example per input.
    pub fn single(spec: &GraphSpec, inputs: &[(&str, &[f64])]) -> Result<Self> {
        let named = inputs
            .iter()
            .map(|(name, values)| {
                let m = Array2::from_shape_vec((1, values.len()), values.to_vec()).expect("1×n shape always fits");
                (*name, m)
            })
            .collect();
        Self::new(spec, named)
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            columns: self.columns.iter().map(|c| c.select(Axis(0), rows)).collect(),
        }
    }
}

struct LayerCache {
    input: Array2<f64>,
    pre: Array2<f64>,
}

struct Trace {
    branches: Vec<Vec<LayerCache>>,
    head: Vec<LayerCache>,
    probs: Array2<f64>,
}

fn run_stack(layers: &[DenseLayer], mut x: Array2<f64>, caches: Option<&mut Vec<LayerCache>>) -> Array2<f64> {
    let mut caches = caches;
    for layer in layers {
        let pre = layer.pre_activation(&x);
        let out = activate(layer.activation, &pre);
        if let Some(c) = caches.as_deref_mut() {
            c.push(LayerCache { input: x, pre });
        }
        x = out;
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

/// Gradients in the same layout as [`NetworkGraph`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub branches: Vec<Vec<LayerGrad>>,
    pub head: Vec<LayerGrad>,
}

impl Gradients {
    pub fn layers(&self) -> impl Iterator<Item = &LayerGrad> {
        self.branches.iter().flatten().chain(&self.head)
    }
}

fn relu_mask(pre: &Array2<f64>, upstream: &mut Array2<f64>) {
    Zip::from(upstream).and(pre).for_each(|g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
}

/// Backpropagates `dz` (gradient w.r.t. the last layer's pre-activation)
/// through a stack; returns layer gradients and the gradient w.r.t. the
/// stack input.
fn backprop_stack(layers: &[DenseLayer], caches: &[LayerCache], mut dz: Array2<f64>) -> (Vec<LayerGrad>, Array2<f64>) {
    let mut grads = Vec::with_capacity(layers.len());
    let mut d_input = Array2::zeros((0, 0));
    for (i, (layer, cache)) in layers.iter().zip(caches).enumerate().rev() {
        grads.push(LayerGrad {
            weights: dz.t().dot(&cache.input),
            biases: dz.sum_axis(Axis(0)),
        });
        d_input = dz.dot(&layer.weights);
        if i > 0 {
            let below = &layers[i - 1];
            if below.activation == Activation::Relu {
                relu_mask(&caches[i - 1].pre, &mut d_input);
            }
            dz = d_input.clone();
        }
    }
    grads.reverse();
    (grads, d_input)
}

impl NetworkGraph {
    pub fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.branches.iter().flatten().chain(&self.head)
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut DenseLayer> {
        self.branches.iter_mut().flatten().chain(&mut self.head)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().map(DenseLayer::parameter_count).sum()
    }

    pub fn concat_width(&self) -> usize {
        self.spec.concat_width()
    }

    pub fn output_width(&self) -> usize {
        self.head.last().map_or(0, DenseLayer::out_dim)
    }

    /// Checks parameters against the spec: shapes, activations, finiteness.
    pub fn check(&self) -> Result<()> {
        self.spec.validate()?;
        let shapes = self.spec.layer_shapes();
        let layers: Vec<&DenseLayer> = self.layers().collect();
        let expected_branch_layers: Vec<usize> = self.spec.branches.iter().map(|b| b.hidden.len()).collect();
        let actual_branch_layers: Vec<usize> = self.branches.iter().map(Vec::len).collect();
        if shapes.len() != layers.len() || expected_branch_layers != actual_branch_layers {
            return Err(Error::InvalidTopology("layer count does not match spec".into()));
        }
        for (k, ((fan_in, out, activation), layer)) in shapes.into_iter().zip(layers).enumerate() {
            if layer.weights.dim() != (out, fan_in) || layer.biases.len() != out || layer.activation != activation {
                return Err(Error::InvalidTopology(format!("layer {k} does not match spec")));
            }
            if layer.weights.iter().chain(&layer.biases).any(|v| !v.is_finite()) {
                return Err(Error::InvalidTopology(format!("layer {k} has non-finite parameters")));
            }
        }
        Ok(())
    }

    fn concat(&self, batch: &InputBatch, branch_outputs: Vec<Array2<f64>>) -> Array2<f64> {
        let rows = batch.rows();
        let mut concat = Array2::zeros((rows, self.concat_width()));
        let mut offset = 0;
        let pass = self.spec.passthrough.iter().map(|n| {
            let idx = self.spec.input_index(n).expect("validated");
            batch.columns[idx].clone()
        });
        for block in branch_outputs.into_iter().chain(pass) {
            let w = block.ncols();
            concat.slice_mut(s![.., offset..offset + w]).assign(&block);
            offset += w;
        }
        concat
    }

    fn trace(&self, batch: &InputBatch) -> Trace {
        let mut branch_caches = Vec::with_capacity(self.branches.len());
        let mut outputs = Vec::with_capacity(self.branches.len());
        for (spec, layers) in self.spec.branches.iter().zip(&self.branches) {
            let idx = self.spec.input_index(&spec.input).expect("validated");
            let mut caches = Vec::with_capacity(layers.len());
            outputs.push(run_stack(layers, batch.columns[idx].clone(), Some(&mut caches)));
            branch_caches.push(caches);
        }
        let concat = self.concat(batch, outputs);
        let mut head = Vec::with_capacity(self.head.len());
        let probs = run_stack(&self.head, concat, Some(&mut head));
        Trace {
            branches: branch_caches,
            head,
            probs,
        }
    }

    fn check_batch(&self, batch: &InputBatch) -> Result<()> {
        if batch.columns.len() != self.spec.inputs.len()
            || batch
                .columns
                .iter()
                .zip(&self.spec.inputs)
                .any(|(c, s)| c.ncols() != s.width)
        {
            return Err(Error::ShapeMismatch("batch does not match network inputs".into()));
        }
        Ok(())
    }

    /// `rows × 2` matrix of `(p_malignant, p_normal)`.
    pub fn forward_batch(&self, batch: &InputBatch) -> Result<Array2<f64>> {
        self.check_batch(batch)?;
        let outputs = self
            .spec
            .branches
            .iter()
            .zip(&self.branches)
            .map(|(spec, layers)| {
                let idx = self.spec.input_index(&spec.input).expect("validated");
                run_stack(layers, batch.columns[idx].clone(), None)
            })
            .collect();
        Ok(run_stack(&self.head, self.concat(batch, outputs), None))
    }

    pub fn forward(&self, inputs: &[(&str, &[f64])]) -> Result<ProbPair> {
        let probs = self.forward_batch(&InputBatch::single(&self.spec, inputs)?)?;
        Ok(ProbPair {
            malignant: probs[[0, 0]],
            normal: probs[[0, 1]],
        })
    }

    /// Head logits before the softmax.
    pub fn logits_batch(&self, batch: &InputBatch) -> Result<Array2<f64>> {
        self.check_batch(batch)?;
        let mut trace = self.trace(batch);
        Ok(trace.head.pop().expect("head has an output layer").pre)
    }

    /// Mean cross-entropy `-ln p_true` over the batch, and its exact gradient.
    pub fn loss_and_gradients(&self, batch: &InputBatch, labels: &[Label]) -> Result<(f64, Gradients)> {
        self.check_batch(batch)?;
        let n = batch.rows();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if labels.len() != n {
            return Err(Error::ShapeMismatch(format!("{} labels for {n} rows", labels.len())));
        }
        let trace = self.trace(batch);
        let logits = &trace.head.last().expect("output layer").pre;

        let mut loss = 0.0;
        for (row, &label) in logits.rows().into_iter().zip(labels) {
            loss += log_sum_exp(row) - row[class_index(label)];
        }
        loss /= n as f64;

        let mut dz = trace.probs.clone();
        for (mut row, &label) in dz.rows_mut().into_iter().zip(labels) {
            row[class_index(label)] -= 1.0;
        }
        dz /= n as f64;

        let (head, d_concat) = backprop_stack(&self.head, &trace.head, dz);
        let mut branches = Vec::with_capacity(self.branches.len());
        let mut offset = 0;
        for (layers, caches) in self.branches.iter().zip(&trace.branches) {
            let last = layers.last().expect("validated non-empty");
            let w = last.out_dim();
            let mut dz = d_concat.slice(s![.., offset..offset + w]).to_owned();
            offset += w;
            if last.activation == Activation::Relu {
                relu_mask(&caches.last().expect("cached").pre, &mut dz);
            }
            branches.push(backprop_stack(layers, caches, dz).0);
        }
        Ok((loss, Gradients { branches, head }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Initialisation seed of the network being trained.
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10_000,
            learning_rate: 1e-3,
            seed: 0,
            optimizer: Optimizer::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidTrainConfig("epochs must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidTrainConfig(format!(
                "learning rate must be finite and positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

struct AdamState {
    m: Vec<(Array2<f64>, Array1<f64>)>,
    v: Vec<(Array2<f64>, Array1<f64>)>,
    step: i32,
}

impl AdamState {
    fn new(net: &NetworkGraph) -> Self {
        let zeros: Vec<_> = net
            .layers()
            .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.biases.len())))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

fn adam_update(param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, c1: f64, c2: f64) {
    for (((p, &g), m), v) in param.iter_mut().zip(grad).zip(m).zip(v) {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

fn apply_update(net: &mut NetworkGraph, grads: &Gradients, cfg: &TrainConfig, adam: &mut AdamState) {
    let lr = cfg.learning_rate;
    match cfg.optimizer {
        Optimizer::Sgd => {
            for (layer, g) in net.layers_mut().zip(grads.layers()) {
                layer.weights.scaled_add(-lr, &g.weights);
                layer.biases.scaled_add(-lr, &g.biases);
            }
        }
        Optimizer::Adam => {
            adam.step += 1;
            let c1 = 1.0 - ADAM_BETA1.powi(adam.step);
            let c2 = 1.0 - ADAM_BETA2.powi(adam.step);
            let state = adam.m.iter_mut().zip(adam.v.iter_mut());
            for ((layer, g), ((mw, mb), (vw, vb))) in net.layers_mut().zip(grads.layers()).zip(state) {
                adam_update(
                    layer.weights.as_slice_mut().expect("standard layout"),
                    g.weights.as_slice().expect("standard layout"),
                    mw.as_slice_mut().expect("standard layout"),
                    vw.as_slice_mut().expect("standard layout"),
                    lr,
                    c1,
                    c2,
                );
                adam_update(
                    layer.biases.as_slice_mut().expect("contiguous"),
                    g.biases.as_slice().expect("contiguous"),
                    mb.as_slice_mut().expect("contiguous"),
                    vb.as_slice_mut().expect("contiguous"),
                    lr,
                    c1,
                    c2,
                );
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: NetworkGraph,
    /// Mean loss at the start of each epoch, before that epoch's update.
    pub loss_trace: Vec<f64>,
}

/// Full-batch training for `cfg.epochs` updates.
pub fn train(mut net: NetworkGraph, batch: &InputBatch, labels: &[Label], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if batch.rows() == 0 || labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut adam = AdamState::new(&net);
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let (loss, grads) = net.loss_and_gradients(batch, labels)?;
        loss_trace.push(loss);
        apply_update(&mut net, &grads, cfg, &mut adam);
    }
    Ok(TrainOutcome {
        network: net,
        loss_trace,
    })
}

/// On-disk model: a versioned JSON document. Parameters are stored row-major
/// with shortest round-trip decimal formatting, so a reloaded network
/// reproduces forward outputs bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub topology: String,
    pub config: TrainConfig,
    pub network: NetworkGraph,
}

impl ModelFile {
    pub fn new(topology: &str, config: TrainConfig, network: NetworkGraph) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            topology: topology.to_string(),
            config,
            network,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        serde_json::to_writer(&mut out, self).map_err(|e| Error::ModelFormat {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        out.write_all(b"\n").map_err(io)?;
        out.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |reason: String| Error::ModelFormat {
            path: path.to_path_buf(),
            reason,
        };
        let model: ModelFile = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if model.format != MODEL_FORMAT {
            return Err(bad(format!("unknown format {:?}", model.format)));
        }
        if model.version != MODEL_VERSION {
            return Err(bad(format!("unsupported version {}", model.version)));
        }
        model.network.check().map_err(|e| bad(e.to_string()))?;
        Ok(model)
    }
}
