//! Model backbones and training.
//!
//! Three backbones share one trainer:
//! - `Strict`: encoder 24->64->32->16->4, bounded angle map, PQC, and a single
//!   6x12 linear head over the Pauli features. Every prediction flows through
//!   the quantum readout; there is no classical bypass.
//! - `Dual`: shared trunk 24->64->32->16, a classical branch (16->16 ReLU) and
//!   a learned 16->4 quantum projection. The four voltage-like/SS heads see
//!   [classical ⊕ quantum] features; the I_on and I_off heads see quantum
//!   features only.
//! - `Ann`: the classical reference MLP (24->64->32->16->6), same trainer.
//!
//! Gradients through the circuit use the parameter-shift jacobians chained
//! with classical backpropagation; everything else is exact backprop.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::MetricsReport;
use crate::ansatz::{compile, CircuitSpec, CompiledCircuit};
use crate::data::{DeviceRecord, SplitAssignment, Standardizer, ION, IOFF, NUM_TARGETS};
use crate::error::{Error, Result};
use crate::grad::{full_jacobians_with, CircuitEvaluator, Statevector};
use crate::nn::{bounded_angle_map, Activation, AdamState, DenseLayer, LossWeights};
use crate::seed;
use crate::sim::{FEATURE_DIM, READOUT_QUBITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backbone {
    Strict,
    Dual,
    Ann,
}

/// Model architecture description. `encoder_dims` is the full dense chain
/// including the input width; the last entry is the latent width (4 for the
/// strict backbone, the trunk latent for the dual backbone).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub backbone: Backbone,
    #[serde(default)]
    pub circuit: Option<CircuitSpec>,
    #[serde(default)]
    pub encoder_dims: Vec<usize>,
}

impl ModelConfig {
    pub fn strict(circuit: CircuitSpec) -> Self {
        ModelConfig {
            backbone: Backbone::Strict,
            circuit: Some(circuit),
            encoder_dims: vec![24, 64, 32, 16, 4],
        }
    }

    pub fn dual(circuit: CircuitSpec) -> Self {
        ModelConfig {
            backbone: Backbone::Dual,
            circuit: Some(circuit),
            encoder_dims: vec![24, 64, 32, 16],
        }
    }

    pub fn ann() -> Self {
        ModelConfig {
            backbone: Backbone::Ann,
            circuit: None,
            encoder_dims: vec![24, 64, 32, 16],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder_dims.len() < 2 || self.encoder_dims.contains(&0) {
            return Err(Error::Config(format!(
                "encoder_dims {:?} must list at least input and latent widths, all positive",
                self.encoder_dims
            )));
        }
        match self.backbone {
            Backbone::Strict => {
                if self.circuit.is_none() {
                    return Err(Error::Config("strict backbone requires a circuit".into()));
                }
                if *self.encoder_dims.last().unwrap() != READOUT_QUBITS {
                    return Err(Error::Config(format!(
                        "strict backbone needs a {READOUT_QUBITS}-wide latent, got {:?}",
                        self.encoder_dims
                    )));
                }
            }
            Backbone::Dual => {
                if self.circuit.is_none() {
                    return Err(Error::Config("dual backbone requires a circuit".into()));
                }
            }
            Backbone::Ann => {
                if self.circuit.is_some() {
                    return Err(Error::Config(
                        "the classical baseline takes no circuit".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn input_dim(&self) -> usize {
        self.encoder_dims[0]
    }

    fn latent_dim(&self) -> usize {
        *self.encoder_dims.last().unwrap()
    }
}

/// Assembled model: encoder/trunk layers, optional dual-branch parts,
/// trainable circuit parameters, and prediction heads.
#[derive(Debug, Clone)]
pub struct HybridModel {
    config: ModelConfig,
    circuit: Option<CompiledCircuit>,
    encoder: Vec<DenseLayer>,
    classical_branch: Option<DenseLayer>,
    quantum_projection: Option<DenseLayer>,
    quantum_params: Vec<f64>,
    heads: Vec<DenseLayer>,
}

/// Named parameter segment in the flat vector, for serialization and tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl HybridModel {
    /// Build and randomly initialize a model. Layer weights are Glorot
    /// uniform with zero bias; quantum parameters are uniform in (-π, π].
    pub fn init(config: ModelConfig, init_seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(init_seed, "model-init", 0);
        let dims = &config.encoder_dims;

        let mut encoder = Vec::new();
        for w in dims.windows(2).enumerate() {
            let (i, pair) = w;
            let activation = if i + 2 == dims.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            encoder.push(DenseLayer::glorot(pair[1], pair[0], activation, &mut rng));
        }

        let latent = config.latent_dim();
        let (classical_branch, quantum_projection) = match config.backbone {
            Backbone::Dual => (
                Some(DenseLayer::glorot(latent, latent, Activation::Relu, &mut rng)),
                Some(DenseLayer::glorot(
                    READOUT_QUBITS,
                    latent,
                    Activation::Identity,
                    &mut rng,
                )),
            ),
            _ => (None, None),
        };

        let circuit = config.circuit.as_ref().map(compile).transpose()?;
        let quantum_params: Vec<f64> = match &circuit {
            Some(c) => (0..c.num_params())
                .map(|_| std::f64::consts::PI * (1.0 - 2.0 * rng.gen::<f64>()))
                .collect(),
            None => Vec::new(),
        };

        let heads = match config.backbone {
            Backbone::Strict => vec![DenseLayer::glorot(
                NUM_TARGETS,
                FEATURE_DIM,
                Activation::Identity,
                &mut rng,
            )],
            Backbone::Ann => vec![DenseLayer::glorot(
                NUM_TARGETS,
                latent,
                Activation::Identity,
                &mut rng,
            )],
            Backbone::Dual => (0..NUM_TARGETS)
                .map(|t| {
                    let in_dim = if t == ION || t == IOFF {
                        FEATURE_DIM
                    } else {
                        latent + FEATURE_DIM
                    };
                    DenseLayer::glorot(1, in_dim, Activation::Identity, &mut rng)
                })
                .collect(),
        };

        Ok(HybridModel {
            config,
            circuit,
            encoder,
            classical_branch,
            quantum_projection,
            quantum_params,
            heads,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn circuit(&self) -> Option<&CompiledCircuit> {
        self.circuit.as_ref()
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim()
    }

    /// Parameter segments in flat-vector order.
    pub fn segments(&self) -> Vec<SegmentInfo> {
        let mut segments = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, shape: Vec<usize>, offset: &mut usize| {
            let len: usize = shape.iter().product();
            segments.push(SegmentInfo {
                name,
                shape,
                offset: *offset,
            });
            *offset += len;
        };
        for (i, layer) in self.encoder.iter().enumerate() {
            push(format!("encoder{i}_w"), vec![layer.out_dim, layer.in_dim], &mut offset);
            push(format!("encoder{i}_b"), vec![layer.out_dim], &mut offset);
        }
        if let Some(branch) = &self.classical_branch {
            push("branch_w".into(), vec![branch.out_dim, branch.in_dim], &mut offset);
            push("branch_b".into(), vec![branch.out_dim], &mut offset);
        }
        if let Some(proj) = &self.quantum_projection {
            push("projection_w".into(), vec![proj.out_dim, proj.in_dim], &mut offset);
            push("projection_b".into(), vec![proj.out_dim], &mut offset);
        }
        push("quantum_params".into(), vec![self.quantum_params.len()], &mut offset);
        for (t, head) in self.heads.iter().enumerate() {
            push(format!("head{t}_w"), vec![head.out_dim, head.in_dim], &mut offset);
            push(format!("head{t}_b"), vec![head.out_dim], &mut offset);
        }
        segments
    }

    pub fn num_params(&self) -> usize {
        self.params_flat().len()
    }

    /// All trainable parameters as one flat vector, in segment order.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.encoder {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.bias);
        }
        if let Some(branch) = &self.classical_branch {
            out.extend_from_slice(&branch.weights);
            out.extend_from_slice(&branch.bias);
        }
        if let Some(proj) = &self.quantum_projection {
            out.extend_from_slice(&proj.weights);
            out.extend_from_slice(&proj.bias);
        }
        out.extend_from_slice(&self.quantum_params);
        for head in &self.heads {
            out.extend_from_slice(&head.weights);
            out.extend_from_slice(&head.bias);
        }
        out
    }

    /// Load a flat parameter vector (inverse of `params_flat`).
    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.num_params();
        if flat.len() != expected {
            return Err(Error::Contract(format!(
                "model has {expected} parameters, got {}",
                flat.len()
            )));
        }
        let mut cursor = 0;
        let take = |n: usize, cursor: &mut usize| -> Vec<f64> {
            let slice = flat[*cursor..*cursor + n].to_vec();
            *cursor += n;
            slice
        };
        for layer in &mut self.encoder {
            layer.weights = take(layer.out_dim * layer.in_dim, &mut cursor);
            layer.bias = take(layer.out_dim, &mut cursor);
        }
        if let Some(branch) = &mut self.classical_branch {
            branch.weights = take(branch.out_dim * branch.in_dim, &mut cursor);
            branch.bias = take(branch.out_dim, &mut cursor);
        }
        if let Some(proj) = &mut self.quantum_projection {
            proj.weights = take(proj.out_dim * proj.in_dim, &mut cursor);
            proj.bias = take(proj.out_dim, &mut cursor);
        }
        let qn = self.quantum_params.len();
        self.quantum_params = take(qn, &mut cursor);
        for head in &mut self.heads {
            head.weights = take(head.out_dim * head.in_dim, &mut cursor);
            head.bias = take(head.out_dim, &mut cursor);
        }
        Ok(())
    }
}

/// Layer-by-layer forward record, kept for the backward pass.
struct ForwardTrace {
    /// Input to each encoder layer, plus the final latent appended last.
    encoder_io: Vec<Vec<f64>>,
    branch_out: Option<Vec<f64>>,
    projection_out: Option<Vec<f64>>,
    theta: [f64; READOUT_QUBITS],
    dtheta_dh: [f64; READOUT_QUBITS],
    qfeatures: [f64; FEATURE_DIM],
    pred: [f64; NUM_TARGETS],
}

fn forward_trace<E: CircuitEvaluator + ?Sized>(
    model: &HybridModel,
    features: &[f64],
    evaluator: &E,
) -> Result<ForwardTrace> {
    if features.len() != model.input_dim() {
        return Err(Error::Contract(format!(
            "model expects {} input features, got {}",
            model.input_dim(),
            features.len()
        )));
    }
    let mut encoder_io = Vec::with_capacity(model.encoder.len() + 1);
    let mut h = features.to_vec();
    for layer in &model.encoder {
        encoder_io.push(h.clone());
        h = layer.forward(&h)?;
    }
    encoder_io.push(h.clone());
    let latent = h;

    let mut trace = ForwardTrace {
        encoder_io,
        branch_out: None,
        projection_out: None,
        theta: [0.0; READOUT_QUBITS],
        dtheta_dh: [0.0; READOUT_QUBITS],
        qfeatures: [0.0; FEATURE_DIM],
        pred: [0.0; NUM_TARGETS],
    };

    match model.config.backbone {
        Backbone::Ann => {
            let out = model.heads[0].forward(&latent)?;
            trace.pred.copy_from_slice(&out);
        }
        Backbone::Strict => {
            let h4: [f64; READOUT_QUBITS] = latent
                .clone()
                .try_into()
                .map_err(|_| Error::Contract("strict latent must be 4-wide".into()))?;
            let (theta, dtheta) = bounded_angle_map(&h4);
            trace.theta = theta;
            trace.dtheta_dh = dtheta;
            let circuit = model.circuit.as_ref().expect("strict model has a circuit");
            trace.qfeatures = evaluator.features(circuit, &theta, &model.quantum_params)?;
            let out = model.heads[0].forward(&trace.qfeatures)?;
            trace.pred.copy_from_slice(&out);
        }
        Backbone::Dual => {
            let branch = model.classical_branch.as_ref().unwrap();
            let proj = model.quantum_projection.as_ref().unwrap();
            let c = branch.forward(&latent)?;
            let hq = proj.forward(&latent)?;
            let h4: [f64; READOUT_QUBITS] = hq
                .clone()
                .try_into()
                .map_err(|_| Error::Contract("projection must emit 4 angles".into()))?;
            let (theta, dtheta) = bounded_angle_map(&h4);
            trace.theta = theta;
            trace.dtheta_dh = dtheta;
            let circuit = model.circuit.as_ref().expect("dual model has a circuit");
            trace.qfeatures = evaluator.features(circuit, &theta, &model.quantum_params)?;
            for t in 0..NUM_TARGETS {
                let head = &model.heads[t];
                let input: Vec<f64> = if t == ION || t == IOFF {
                    trace.qfeatures.to_vec()
                } else {
                    c.iter().chain(trace.qfeatures.iter()).copied().collect()
                };
                trace.pred[t] = head.forward(&input)?[0];
            }
            trace.branch_out = Some(c);
            trace.projection_out = Some(hq);
        }
    }
    Ok(trace)
}

/// Deterministic prediction for one standardized feature vector.
pub fn predict_with<E: CircuitEvaluator + ?Sized>(
    model: &HybridModel,
    features: &[f64],
    evaluator: &E,
) -> Result<[f64; NUM_TARGETS]> {
    Ok(forward_trace(model, features, evaluator)?.pred)
}

/// Prediction on the exact statevector path.
pub fn predict(model: &HybridModel, features: &[f64]) -> Result<[f64; NUM_TARGETS]> {
    predict_with(model, features, &Statevector)
}

/// Mean weighted-MSE loss and its gradient with respect to every trainable
/// parameter (flat, in segment order) over a batch.
pub fn loss_and_gradients<E: CircuitEvaluator + ?Sized>(
    model: &HybridModel,
    features: &[Vec<f64>],
    targets: &[[f64; NUM_TARGETS]],
    weights: &LossWeights,
    evaluator: &E,
) -> Result<(f64, Vec<f64>)> {
    if features.is_empty() || features.len() != targets.len() {
        return Err(Error::Usage(format!(
            "batch needs matching nonzero feature/target counts, got {} and {}",
            features.len(),
            targets.len()
        )));
    }
    // Per-sample gradients computed in parallel, reduced in sample order so
    // results do not depend on thread count.
    let per_sample: Vec<Result<(f64, Vec<f64>)>> = features
        .par_iter()
        .zip(targets.par_iter())
        .map(|(x, y)| sample_loss_and_gradient(model, x, y, weights, evaluator))
        .collect();
    let mut total_loss = 0.0;
    let mut grads = vec![0.0; model.num_params()];
    for result in per_sample {
        let (loss, g) = result?;
        total_loss += loss;
        for (acc, v) in grads.iter_mut().zip(&g) {
            *acc += v;
        }
    }
    let n = features.len() as f64;
    total_loss /= n;
    for g in &mut grads {
        *g /= n;
    }
    Ok((total_loss, grads))
}

fn sample_loss_and_gradient<E: CircuitEvaluator + ?Sized>(
    model: &HybridModel,
    features: &[f64],
    target: &[f64; NUM_TARGETS],
    weights: &LossWeights,
    evaluator: &E,
) -> Result<(f64, Vec<f64>)> {
    let trace = forward_trace(model, features, evaluator)?;
    let (loss, grad_pred) = crate::nn::weighted_mse(&trace.pred, target, weights);

    // Gradient segments mirror params_flat order.
    let mut enc_grads: Vec<crate::nn::LayerGradients> = Vec::new();
    let mut branch_grad = None;
    let mut proj_grad = None;
    let mut qparam_grad = vec![0.0; model.quantum_params.len()];
    let mut head_grads: Vec<crate::nn::LayerGradients> = Vec::new();

    // dL/dlatent accumulates from whichever paths consume the latent code.
    let latent = trace.encoder_io.last().unwrap().clone();
    let mut grad_latent = vec![0.0; latent.len()];

    match model.config.backbone {
        Backbone::Ann => {
            let g = model.heads[0].backward(&latent, &grad_pred)?;
            grad_latent.copy_from_slice(&g.input);
            head_grads.push(g);
        }
        Backbone::Strict => {
            let g = model.heads[0].backward(&trace.qfeatures, &grad_pred)?;
            let grad_q: Vec<f64> = g.input.clone();
            head_grads.push(g);
            let circuit = model.circuit.as_ref().unwrap();
            let jac =
                full_jacobians_with(evaluator, circuit, &trace.theta, &model.quantum_params)?;
            for (j, column) in jac.param_jacobian.iter().enumerate() {
                qparam_grad[j] = column.iter().zip(&grad_q).map(|(a, b)| a * b).sum();
            }
            for k in 0..READOUT_QUBITS {
                let dtheta: f64 = jac.input_jacobian[k]
                    .iter()
                    .zip(&grad_q)
                    .map(|(a, b)| a * b)
                    .sum();
                grad_latent[k] = dtheta * trace.dtheta_dh[k];
            }
        }
        Backbone::Dual => {
            let c = trace.branch_out.as_ref().unwrap();
            let hq = trace.projection_out.as_ref().unwrap();
            let mut grad_c = vec![0.0; c.len()];
            let mut grad_q = vec![0.0; FEATURE_DIM];
            for t in 0..NUM_TARGETS {
                let head = &model.heads[t];
                let gp = [grad_pred[t]];
                if t == ION || t == IOFF {
                    let g = head.backward(&trace.qfeatures, &gp)?;
                    for (acc, v) in grad_q.iter_mut().zip(&g.input) {
                        *acc += v;
                    }
                    head_grads.push(g);
                } else {
                    let input: Vec<f64> =
                        c.iter().chain(trace.qfeatures.iter()).copied().collect();
                    let g = head.backward(&input, &gp)?;
                    for (acc, v) in grad_c.iter_mut().zip(&g.input[..c.len()]) {
                        *acc += v;
                    }
                    for (acc, v) in grad_q.iter_mut().zip(&g.input[c.len()..]) {
                        *acc += v;
                    }
                    head_grads.push(g);
                }
            }
            let circuit = model.circuit.as_ref().unwrap();
            let jac =
                full_jacobians_with(evaluator, circuit, &trace.theta, &model.quantum_params)?;
            for (j, column) in jac.param_jacobian.iter().enumerate() {
                qparam_grad[j] = column.iter().zip(&grad_q).map(|(a, b)| a * b).sum();
            }
            let mut grad_hq = vec![0.0; READOUT_QUBITS];
            for k in 0..READOUT_QUBITS {
                let dtheta: f64 = jac.input_jacobian[k]
                    .iter()
                    .zip(&grad_q)
                    .map(|(a, b)| a * b)
                    .sum();
                grad_hq[k] = dtheta * trace.dtheta_dh[k];
            }
            let proj = model.quantum_projection.as_ref().unwrap();
            let pg = proj.backward(&latent, &grad_hq)?;
            for (acc, v) in grad_latent.iter_mut().zip(&pg.input) {
                *acc += v;
            }
            proj_grad = Some(pg);
            let branch = model.classical_branch.as_ref().unwrap();
            let bg = branch.backward(&latent, &grad_c)?;
            for (acc, v) in grad_latent.iter_mut().zip(&bg.input) {
                *acc += v;
            }
            branch_grad = Some(bg);
            let _ = hq;
        }
    }

    // Backpropagate the latent gradient through the encoder chain.
    let mut upstream = grad_latent;
    for (layer, input) in model
        .encoder
        .iter()
        .zip(trace.encoder_io.iter())
        .rev()
    {
        let g = layer.backward(input, &upstream)?;
        upstream = g.input.clone();
        enc_grads.push(g);
    }
    enc_grads.reverse();

    // Flatten in params_flat order.
    let mut flat = Vec::with_capacity(model.num_params());
    for g in &enc_grads {
        flat.extend_from_slice(&g.weights);
        flat.extend_from_slice(&g.bias);
    }
    if let Some(g) = &branch_grad {
        flat.extend_from_slice(&g.weights);
        flat.extend_from_slice(&g.bias);
    }
    if let Some(g) = &proj_grad {
        flat.extend_from_slice(&g.weights);
        flat.extend_from_slice(&g.bias);
    }
    flat.extend_from_slice(&qparam_grad);
    for g in &head_grads {
        flat.extend_from_slice(&g.weights);
        flat.extend_from_slice(&g.bias);
    }
    debug_assert_eq!(flat.len(), model.num_params());
    Ok((loss, flat))
}

/// Training hyperparameters. `batch_size` 0 means full batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub loss_weights: LossWeights,
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            learning_rate: 1e-3,
            batch_size: 0,
            seed: 7,
            loss_weights: LossWeights::uniform(),
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.patience == Some(0) {
            return Err(Error::Config("patience must be positive when set".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Standardize the records selected by `indices` into (features, targets).
pub fn standardized_batch(
    records: &[DeviceRecord],
    indices: &[usize],
    standardizer: &Standardizer,
) -> (Vec<Vec<f64>>, Vec<[f64; NUM_TARGETS]>) {
    let features = indices
        .iter()
        .map(|&i| standardizer.apply_features(&records[i]).to_vec())
        .collect();
    let targets = indices
        .iter()
        .map(|&i| standardizer.apply_targets(&records[i].targets))
        .collect();
    (features, targets)
}

/// Train in place with Adam, tracking per-epoch train/val loss and restoring
/// the parameters with the best validation loss before returning.
pub fn train<E: CircuitEvaluator + ?Sized>(
    model: &mut HybridModel,
    records: &[DeviceRecord],
    assignment: &SplitAssignment,
    standardizer: &Standardizer,
    config: &TrainConfig,
    evaluator: &E,
) -> Result<TrainResult> {
    config.validate()?;
    if assignment.train.is_empty() || assignment.val.is_empty() {
        return Err(Error::Usage("train and validation splits must be nonempty".into()));
    }
    let (train_x, train_y) = standardized_batch(records, &assignment.train, standardizer);
    let (val_x, val_y) = standardized_batch(records, &assignment.val, standardizer);

    let mut params = model.params_flat();
    let mut adam = AdamState::new(params.len(), config.learning_rate);
    let n = train_x.len();
    let batch = if config.batch_size == 0 || config.batch_size >= n {
        n
    } else {
        config.batch_size
    };

    let mut history = Vec::with_capacity(config.epochs);
    let mut best = (0usize, f64::INFINITY, params.clone());

    for epoch in 0..config.epochs {
        let order: Vec<usize> = if batch == n {
            (0..n).collect()
        } else {
            let mut idx: Vec<usize> = (0..n).collect();
            let mut rng = seed::rng(config.seed, "epoch-shuffle", epoch as u64);
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                idx.swap(i, j);
            }
            idx
        };

        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let bx: Vec<Vec<f64>> = chunk.iter().map(|&i| train_x[i].clone()).collect();
            let by: Vec<[f64; NUM_TARGETS]> = chunk.iter().map(|&i| train_y[i]).collect();
            model.set_params_flat(&params)?;
            let (loss, grads) =
                loss_and_gradients(model, &bx, &by, &config.loss_weights, evaluator)?;
            adam.step(&mut params, &grads)?;
            epoch_loss += loss * chunk.len() as f64;
        }
        epoch_loss /= n as f64;

        model.set_params_flat(&params)?;
        let val_loss = batch_loss(model, &val_x, &val_y, &config.loss_weights, evaluator)?;
        history.push(EpochStats {
            epoch,
            train_loss: epoch_loss,
            val_loss,
        });
        if val_loss < best.1 {
            best = (epoch, val_loss, params.clone());
        }
        if let Some(patience) = config.patience {
            if epoch - best.0 >= patience {
                break;
            }
        }
    }

    model.set_params_flat(&best.2)?;
    Ok(TrainResult {
        history,
        best_epoch: best.0,
        best_val_loss: best.1,
    })
}

/// Mean loss over a standardized batch (no gradients).
pub fn batch_loss<E: CircuitEvaluator + ?Sized>(
    model: &HybridModel,
    features: &[Vec<f64>],
    targets: &[[f64; NUM_TARGETS]],
    weights: &LossWeights,
    evaluator: &E,
) -> Result<f64> {
    if features.is_empty() {
        return Err(Error::Usage("cannot evaluate loss on an empty batch".into()));
    }
    let losses: Vec<Result<f64>> = features
        .par_iter()
        .zip(targets.par_iter())
        .map(|(x, y)| {
            let pred = predict_with(model, x, evaluator)?;
            Ok(crate::nn::weighted_mse(&pred, y, weights).0)
        })
        .collect();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / features.len() as f64)
}

/// Per-target metrics in original units over the records named by `indices`.
/// `train_iqr` carries the training-split interquartile ranges used for
/// nRMSE normalization.
pub fn evaluate<E: CircuitEvaluator + ?Sized>(
    model: &HybridModel,
    records: &[DeviceRecord],
    indices: &[usize],
    standardizer: &Standardizer,
    train_iqr: &[f64; NUM_TARGETS],
    evaluator: &E,
) -> Result<MetricsReport> {
    if indices.is_empty() {
        return Err(Error::Usage("cannot evaluate on an empty split".into()));
    }
    let preds: Vec<Result<[f64; NUM_TARGETS]>> = indices
        .par_iter()
        .map(|&i| {
            let x = standardizer.apply_features(&records[i]);
            let pred_std = predict_with(model, &x, evaluator)?;
            Ok(standardizer.invert_targets(&pred_std))
        })
        .collect();
    let mut pred_cols: Vec<Vec<f64>> = vec![Vec::new(); NUM_TARGETS];
    for p in preds {
        let p = p?;
        for t in 0..NUM_TARGETS {
            pred_cols[t].push(p[t]);
        }
    }
    let mut truth_cols: Vec<Vec<f64>> = vec![Vec::new(); NUM_TARGETS];
    for &i in indices {
        for t in 0..NUM_TARGETS {
            truth_cols[t].push(records[i].targets[t]);
        }
    }
    let mut rmse_v = [0.0; NUM_TARGETS];
    let mut r2_v = [0.0; NUM_TARGETS];
    for t in 0..NUM_TARGETS {
        rmse_v[t] = crate::analysis::rmse(&pred_cols[t], &truth_cols[t])?;
        r2_v[t] = crate::analysis::r_squared(&pred_cols[t], &truth_cols[t])?;
    }
    MetricsReport::from_parts(rmse_v, train_iqr, r2_v)
}

/// Training-split interquartile range of each target, in original units.
pub fn target_iqr(records: &[DeviceRecord], indices: &[usize]) -> Result<[f64; NUM_TARGETS]> {
    let mut out = [0.0; NUM_TARGETS];
    for t in 0..NUM_TARGETS {
        let col: Vec<f64> = indices.iter().map(|&i| records[i].targets[t]).collect();
        out[t] = crate::analysis::iqr(&col)?;
    }
    Ok(out)
}

// --- serialization --------------------------------------------------------

/// Versioned on-disk model document: architecture, fitted transforms, and the
/// flat parameter vector. JSON numbers round-trip f64 bit-exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub config: ModelConfig,
    pub segments: Vec<SegmentInfo>,
    pub values: Vec<f64>,
    pub standardizer: Standardizer,
    pub target_iqr: [f64; NUM_TARGETS],
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

pub fn save_model(
    model: &HybridModel,
    standardizer: &Standardizer,
    train_iqr: &[f64; NUM_TARGETS],
    path: &Path,
) -> Result<()> {
    let doc = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        config: model.config.clone(),
        segments: model.segments(),
        values: model.params_flat(),
        standardizer: standardizer.clone(),
        target_iqr: *train_iqr,
    };
    let json = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Contract(format!("model serialization failed: {e}")))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<(HybridModel, Standardizer, [f64; NUM_TARGETS])> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        row: 0,
        column: "model".into(),
        message: e.to_string(),
    })?;
    if doc.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Config(format!(
            "unsupported model format version {}",
            doc.format_version
        )));
    }
    let mut model = HybridModel::init(doc.config, 0)?;
    if model.segments() != doc.segments {
        return Err(Error::Parse {
            row: 0,
            column: "segments".into(),
            message: "parameter layout does not match the architecture".into(),
        });
    }
    model.set_params_flat(&doc.values)?;
    Ok((model, doc.standardizer, doc.target_iqr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthesize;

    fn strict_t1() -> HybridModel {
        let config = ModelConfig {
            backbone: Backbone::Strict,
            circuit: Some(CircuitSpec::single(1, 1).unwrap()),
            encoder_dims: vec![8, 4, 4],
        };
        HybridModel::init(config, 3).unwrap()
    }

    struct ZeroEvaluator;
    impl CircuitEvaluator for ZeroEvaluator {
        fn features(
            &self,
            _circuit: &CompiledCircuit,
            _inputs: &[f64; READOUT_QUBITS],
            _params: &[f64],
        ) -> Result<[f64; FEATURE_DIM]> {
            Ok([0.0; FEATURE_DIM])
        }
    }

    #[test]
    fn params_flat_round_trips() {
        for model in [
            strict_t1(),
            HybridModel::init(ModelConfig::dual(CircuitSpec::single(13, 1).unwrap()), 5).unwrap(),
            HybridModel::init(ModelConfig::ann(), 5).unwrap(),
        ] {
            let mut clone = model.clone();
            let flat = model.params_flat();
            let segments = model.segments();
            let total: usize = segments
                .iter()
                .map(|s| s.shape.iter().product::<usize>())
                .sum();
            assert_eq!(total, flat.len());
            clone.set_params_flat(&flat).unwrap();
            assert_eq!(clone.params_flat(), flat);
        }
    }

    #[test]
    fn strict_zero_head_predicts_bias() {
        let mut model = strict_t1();
        let mut flat = model.params_flat();
        let segments = model.segments();
        let head_w = segments.iter().find(|s| s.name == "head0_w").unwrap();
        let head_b = segments.iter().find(|s| s.name == "head0_b").unwrap();
        for v in &mut flat[head_w.offset..head_w.offset + 6 * FEATURE_DIM] {
            *v = 0.0;
        }
        for (k, v) in flat[head_b.offset..head_b.offset + 6].iter_mut().enumerate() {
            *v = k as f64;
        }
        model.set_params_flat(&flat).unwrap();
        let p1 = predict(&model, &[0.2; 8]).unwrap();
        let p2 = predict(&model, &[-1.0; 8]).unwrap();
        assert_eq!(p1, [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(p1, p2);
    }

    #[test]
    fn strict_identity_composition_point() {
        // Encoder zeroed: latent 0, angles 0; template 1 with zero parameters
        // is the identity, so q = [1,1,1,1,0,...,0] and pred = W q + b.
        let mut model = strict_t1();
        let mut flat = model.params_flat();
        let segments = model.segments();
        for s in &segments {
            if s.name.starts_with("encoder") || s.name == "quantum_params" {
                let len: usize = s.shape.iter().product();
                for v in &mut flat[s.offset..s.offset + len] {
                    *v = 0.0;
                }
            }
        }
        model.set_params_flat(&flat).unwrap();
        let head = &model.heads[0];
        let q = [1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let expected = head.forward(&q).unwrap();
        let got = predict(&model, &[0.3, -0.8, 0.2, 0.9, 0.0, -0.1, 0.5, 0.7]).unwrap();
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn strict_bottleneck_has_no_classical_bypass() {
        let model = strict_t1();
        // With the quantum features forced to zero, predictions cannot depend
        // on the input at all.
        let p1 = predict_with(&model, &[0.9, -0.3, 0.5, 0.0, 1.0, -1.0, 0.2, 0.8], &ZeroEvaluator)
            .unwrap();
        let p2 = predict_with(&model, &[-2.0; 8], &ZeroEvaluator).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn dual_routing_isolates_current_heads_from_classical_branch() {
        let config = ModelConfig {
            backbone: Backbone::Dual,
            circuit: Some(CircuitSpec::single(13, 1).unwrap()),
            encoder_dims: vec![8, 6, 5],
        };
        let model = HybridModel::init(config, 9).unwrap();
        let x = vec![0.3, -0.2, 0.8, 0.1, -0.5, 0.9, 0.0, 0.4];
        let base = predict(&model, &x).unwrap();

        let mut perturbed = model.clone();
        let mut flat = perturbed.params_flat();
        let seg = perturbed
            .segments()
            .into_iter()
            .find(|s| s.name == "branch_w")
            .unwrap();
        flat[seg.offset] += 0.37;
        perturbed.set_params_flat(&flat).unwrap();
        let shifted = predict(&perturbed, &x).unwrap();

        // I_on and I_off are untouched, bit for bit.
        assert_eq!(base[ION], shifted[ION]);
        assert_eq!(base[IOFF], shifted[IOFF]);
        // The routed targets move.
        assert!((0..4).any(|t| base[t] != shifted[t]));
    }

    #[test]
    fn perfect_predictions_give_zero_loss_and_gradients() {
        let model = strict_t1();
        let x = vec![0.1, 0.2, -0.3, 0.4, 0.0, 0.5, -0.1, 0.9];
        let pred = predict(&model, &x).unwrap();
        let (loss, grads) = loss_and_gradients(
            &model,
            &[x],
            &[pred],
            &LossWeights::uniform(),
            &Statevector,
        )
        .unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn doubling_loss_weights_doubles_loss_and_gradients() {
        let model = strict_t1();
        let x = vec![0.1, 0.2, -0.3, 0.4, 0.0, 0.5, -0.1, 0.9];
        let y = [0.5, -0.5, 1.0, 0.0, 0.25, -1.0];
        let (l1, g1) = loss_and_gradients(
            &model,
            std::slice::from_ref(&x),
            &[y],
            &LossWeights::uniform(),
            &Statevector,
        )
        .unwrap();
        let (l2, g2) = loss_and_gradients(
            &model,
            &[x],
            &[y],
            &LossWeights::new([2.0; 6]).unwrap(),
            &Statevector,
        )
        .unwrap();
        assert!((l2 - 2.0 * l1).abs() < 1e-14);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((b - 2.0 * a).abs() < 1e-12);
        }
    }

    #[test]
    fn init_is_deterministic() {
        let a = strict_t1().params_flat();
        let b = strict_t1().params_flat();
        assert_eq!(a, b);
        let config = ModelConfig {
            backbone: Backbone::Strict,
            circuit: Some(CircuitSpec::single(1, 1).unwrap()),
            encoder_dims: vec![8, 4, 4],
        };
        let c = HybridModel::init(config, 4).unwrap().params_flat();
        assert_ne!(a, c);
    }

    #[test]
    fn config_validation() {
        let mut cfg = ModelConfig::strict(CircuitSpec::single(1, 1).unwrap());
        cfg.encoder_dims = vec![24, 16, 8];
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::ann();
        cfg.circuit = Some(CircuitSpec::single(1, 1).unwrap());
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::dual(CircuitSpec::single(1, 1).unwrap());
        cfg.circuit = None;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn model_file_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let records = synthesize(40, 5).unwrap();
        let idx: Vec<usize> = (0..24).collect();
        let standardizer = Standardizer::fit(&records, &idx).unwrap();
        let iqr = target_iqr(&records, &idx).unwrap();
        let model = HybridModel::init(
            ModelConfig::strict(CircuitSpec::single(13, 2).unwrap()),
            42,
        )
        .unwrap();
        save_model(&model, &standardizer, &iqr, &path).unwrap();
        let (loaded, s2, iqr2) = load_model(&path).unwrap();
        let a = model.params_flat();
        let b = loaded.params_flat();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(standardizer, s2);
        for (x, y) in iqr.iter().zip(&iqr2) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
