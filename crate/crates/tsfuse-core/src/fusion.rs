//! Gated fusion classifier: per-branch projections, an instance-wise gate,
//! weighted embedding fusion and a shared MLP head, trained with mini-batch
//! Adam on cross-entropy. Solo and two-way variants use the identical head;
//! a single branch simply gets gate weight 1.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::rng::{rng_from_seed, SeededRng};

const GATE_NORM_EPS: f64 = 1e-12;

/// Training and architecture hyperparameters shared by all model variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            hidden_dim: 64,
            dropout: 0.2,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 25,
            patience: 5,
            seed: 42,
        }
    }
}

/// Offsets of each parameter block inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layout {
    proj_w: Vec<usize>,
    proj_b: Vec<usize>,
    gate_w: usize,
    gate_b: usize,
    hid_w: usize,
    hid_b: usize,
    out_w: usize,
    out_b: usize,
    total: usize,
}

impl Layout {
    fn new(input_dims: &[usize], d: usize, h: usize, c: usize) -> Self {
        let b = input_dims.len();
        let mut off = 0usize;
        let mut proj_w = Vec::with_capacity(b);
        let mut proj_b = Vec::with_capacity(b);
        for &dim in input_dims {
            proj_w.push(off);
            off += d * dim;
            proj_b.push(off);
            off += d;
        }
        let gate_w = off;
        off += b * (b * d);
        let gate_b = off;
        off += b;
        let hid_w = off;
        off += h * d;
        let hid_b = off;
        off += h;
        let out_w = off;
        off += c * h;
        let out_b = off;
        off += c;
        Self {
            proj_w,
            proj_b,
            gate_w,
            gate_b,
            hid_w,
            hid_b,
            out_w,
            out_b,
            total: off,
        }
    }
}

/// The gated fusion network. All trainable parameters live in one flat vector
/// so the optimiser and the finite-difference check can treat them uniformly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GatedFusionModel {
    pub input_dims: Vec<usize>,
    pub num_classes: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    params: Vec<f64>,
    layout: Layout,
}

/// Per-sample forward pass output.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub logits: Vec<f64>,
    pub gates: Vec<f64>,
    pub fused: Vec<f64>,
}

/// Training trace: one entry per completed epoch plus the selection outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRecord {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// 1-based epoch whose parameters were restored.
    pub selected_epoch: usize,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    EarlyStopped,
    MaxEpochs,
}

/// Intermediate activations cached for backpropagation.
struct Trace {
    pre_embed: Vec<Vec<f64>>,
    embed: Vec<Vec<f64>>,
    sig: Vec<f64>,
    gates: Vec<f64>,
    fused: Vec<f64>,
    pre_hidden: Vec<f64>,
    hidden_dropped: Vec<f64>,
    drop_mask: Vec<f64>,
    logits: Vec<f64>,
}

fn matvec(w: &[f64], x: &[f64], bias: &[f64], out: &mut Vec<f64>) {
    out.clear();
    let cols = x.len();
    for (r, &b) in bias.iter().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = b;
        for (a, v) in row.iter().zip(x) {
            acc += a * v;
        }
        out.push(acc);
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl GatedFusionModel {
    /// He-style uniform fan-in initialisation, seeded; biases start at zero.
    pub fn new(
        input_dims: Vec<usize>,
        num_classes: usize,
        cfg: &FusionConfig,
    ) -> Self {
        assert!(!input_dims.is_empty() && input_dims.len() <= 3);
        assert!(num_classes >= 2);
        let layout = Layout::new(&input_dims, cfg.embed_dim, cfg.hidden_dim, num_classes);
        let mut params = vec![0.0; layout.total];
        let mut rng = rng_from_seed(cfg.seed);
        let b = input_dims.len();
        let d = cfg.embed_dim;
        for (i, &dim) in input_dims.iter().enumerate() {
            init_uniform(&mut params[layout.proj_w[i]..layout.proj_w[i] + d * dim], dim, &mut rng);
        }
        init_uniform(
            &mut params[layout.gate_w..layout.gate_w + b * b * d],
            b * d,
            &mut rng,
        );
        init_uniform(
            &mut params[layout.hid_w..layout.hid_w + cfg.hidden_dim * d],
            d,
            &mut rng,
        );
        init_uniform(
            &mut params[layout.out_w..layout.out_w + num_classes * cfg.hidden_dim],
            cfg.hidden_dim,
            &mut rng,
        );
        Self {
            input_dims,
            num_classes,
            embed_dim: cfg.embed_dim,
            hidden_dim: cfg.hidden_dim,
            dropout: cfg.dropout,
            params,
            layout,
        }
    }

    pub fn num_branches(&self) -> usize {
        self.input_dims.len()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn block(&self, offset: usize, len: usize) -> &[f64] {
        &self.params[offset..offset + len]
    }

    /// Weighted fusion sum for fixed gates (exposed for linearity tests).
    pub fn fuse(gates: &[f64], embeddings: &[Vec<f64>]) -> Vec<f64> {
        let d = embeddings[0].len();
        let mut fused = vec![0.0; d];
        for (g, e) in gates.iter().zip(embeddings) {
            for (f, v) in fused.iter_mut().zip(e) {
                *f += g * v;
            }
        }
        fused
    }

    /// Inference forward pass (dropout inactive).
    pub fn forward(&self, features: &[&[f64]]) -> Result<ForwardOutput, CoreError> {
        let trace = self.forward_trace(features, None)?;
        Ok(ForwardOutput {
            logits: trace.logits,
            gates: trace.gates,
            fused: trace.fused,
        })
    }

    fn forward_trace(
        &self,
        features: &[&[f64]],
        dropout_rng: Option<&mut SeededRng>,
    ) -> Result<Trace, CoreError> {
        if features.len() != self.num_branches() {
            return Err(CoreError::Model(format!(
                "expected {} branch inputs, got {}",
                self.num_branches(),
                features.len()
            )));
        }
        for (b, f) in features.iter().enumerate() {
            if f.len() != self.input_dims[b] {
                return Err(CoreError::Model(format!(
                    "branch {b}: expected dim {}, got {}",
                    self.input_dims[b],
                    f.len()
                )));
            }
        }
        let d = self.embed_dim;
        let nb = self.num_branches();
        let mut pre_embed = Vec::with_capacity(nb);
        let mut embed = Vec::with_capacity(nb);
        for (b, x) in features.iter().enumerate() {
            let mut z = Vec::with_capacity(d);
            matvec(
                self.block(self.layout.proj_w[b], d * self.input_dims[b]),
                x,
                self.block(self.layout.proj_b[b], d),
                &mut z,
            );
            let e: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
            pre_embed.push(z);
            embed.push(e);
        }
        let concat: Vec<f64> = embed.iter().flatten().copied().collect();
        let mut gate_logits = Vec::with_capacity(nb);
        matvec(
            self.block(self.layout.gate_w, nb * nb * d),
            &concat,
            self.block(self.layout.gate_b, nb),
            &mut gate_logits,
        );
        let sig: Vec<f64> = gate_logits.iter().map(|&z| sigmoid(z)).collect();
        let norm: f64 = sig.iter().sum::<f64>() + GATE_NORM_EPS;
        let gates: Vec<f64> = sig.iter().map(|&s| s / norm).collect();
        let fused = Self::fuse(&gates, &embed);

        let mut pre_hidden = Vec::with_capacity(self.hidden_dim);
        matvec(
            self.block(self.layout.hid_w, self.hidden_dim * d),
            &fused,
            self.block(self.layout.hid_b, self.hidden_dim),
            &mut pre_hidden,
        );
        let hidden: Vec<f64> = pre_hidden.iter().map(|&v| v.max(0.0)).collect();
        let drop_mask: Vec<f64> = match dropout_rng {
            Some(rng) if self.dropout > 0.0 => {
                let keep = 1.0 - self.dropout;
                hidden
                    .iter()
                    .map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 })
                    .collect()
            }
            _ => vec![1.0; self.hidden_dim],
        };
        let hidden_dropped: Vec<f64> = hidden.iter().zip(&drop_mask).map(|(h, m)| h * m).collect();
        let mut logits = Vec::with_capacity(self.num_classes);
        matvec(
            self.block(self.layout.out_w, self.num_classes * self.hidden_dim),
            &hidden_dropped,
            self.block(self.layout.out_b, self.num_classes),
            &mut logits,
        );
        Ok(Trace {
            pre_embed,
            embed,
            sig,
            gates,
            fused,
            pre_hidden,
            hidden_dropped,
            drop_mask,
            logits,
        })
    }

    /// Argmax prediction, ties broken toward the lower class index.
    pub fn predict(&self, features: &[&[f64]]) -> Result<(usize, Vec<f64>), CoreError> {
        let out = self.forward(features)?;
        let mut best = 0usize;
        for (i, &l) in out.logits.iter().enumerate() {
            if l > out.logits[best] {
                best = i;
            }
        }
        Ok((best, out.gates))
    }

    /// Mean cross-entropy over a batch plus the gradient on every parameter.
    /// `dropout_rng` enables inverted dropout for training batches.
    fn loss_and_grad(
        &self,
        batch: &[(Vec<&[f64]>, usize)],
        dropout_rng: Option<&mut SeededRng>,
        grad: &mut [f64],
    ) -> Result<f64, CoreError> {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total_loss = 0.0;
        let scale = 1.0 / batch.len() as f64;
        let mut rng_opt = dropout_rng;
        for (features, label) in batch {
            let trace =
                self.forward_trace(features, rng_opt.as_mut().map(|r| &mut **r))?;
            let (loss, dlogits) = softmax_cross_entropy(&trace.logits, *label);
            total_loss += loss * scale;
            self.backprop(features, &trace, &dlogits, scale, grad);
        }
        Ok(total_loss)
    }

    fn backprop(
        &self,
        features: &[&[f64]],
        trace: &Trace,
        dlogits: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) {
        let d = self.embed_dim;
        let h = self.hidden_dim;
        let nb = self.num_branches();
        let lay = &self.layout;

        // output layer
        let mut dhidden_dropped = vec![0.0; h];
        for (c, &dl) in dlogits.iter().enumerate() {
            let dl = dl * scale;
            grad[lay.out_b + c] += dl;
            let row = lay.out_w + c * h;
            for (j, &hv) in trace.hidden_dropped.iter().enumerate() {
                grad[row + j] += dl * hv;
                dhidden_dropped[j] += dl * self.params[row + j];
            }
        }
        // hidden layer (dropout then ReLU)
        let mut dfused = vec![0.0; d];
        for j in 0..h {
            let dh = dhidden_dropped[j] * trace.drop_mask[j];
            let dz = if trace.pre_hidden[j] > 0.0 { dh } else { 0.0 };
            grad[lay.hid_b + j] += dz;
            let row = lay.hid_w + j * d;
            for (k, &fv) in trace.fused.iter().enumerate() {
                grad[row + k] += dz * fv;
                dfused[k] += dz * self.params[row + k];
            }
        }
        // fusion sum: d/d(gate_i) and d/d(embed)
        let mut dgates = vec![0.0; nb];
        let mut dembed: Vec<Vec<f64>> = (0..nb)
            .map(|b| dfused.iter().map(|&v| v * trace.gates[b]).collect())
            .collect();
        for b in 0..nb {
            dgates[b] = dfused
                .iter()
                .zip(&trace.embed[b])
                .map(|(df, e)| df * e)
                .sum();
        }
        // gate normalisation: g_i = s_i / (sum s + eps)
        let norm: f64 = trace.sig.iter().sum::<f64>() + GATE_NORM_EPS;
        let weighted: f64 = dgates.iter().zip(&trace.sig).map(|(dg, s)| dg * s).sum();
        let mut dgate_logits = vec![0.0; nb];
        for j in 0..nb {
            let ds = dgates[j] / norm - weighted / (norm * norm);
            dgate_logits[j] = ds * trace.sig[j] * (1.0 - trace.sig[j]);
        }
        // gate affine layer; also propagates into the concatenated embeddings
        let concat: Vec<f64> = trace.embed.iter().flatten().copied().collect();
        for (j, &dz) in dgate_logits.iter().enumerate() {
            grad[lay.gate_b + j] += dz;
            let row = lay.gate_w + j * nb * d;
            for (k, &cv) in concat.iter().enumerate() {
                grad[row + k] += dz * cv;
                dembed[k / d][k % d] += dz * self.params[row + k];
            }
        }
        // per-branch projections
        for b in 0..nb {
            let x = features[b];
            for j in 0..d {
                let dz = if trace.pre_embed[b][j] > 0.0 {
                    dembed[b][j]
                } else {
                    0.0
                };
                grad[lay.proj_b[b] + j] += dz;
                let row = lay.proj_w[b] + j * self.input_dims[b];
                for (k, &xv) in x.iter().enumerate() {
                    grad[row + k] += dz * xv;
                }
            }
        }
    }

    /// Mean cross-entropy of a labelled set with dropout inactive.
    pub fn evaluate_loss(
        &self,
        samples: &[(Vec<&[f64]>, usize)],
    ) -> Result<(f64, f64), CoreError> {
        let mut loss = 0.0;
        let mut correct = 0usize;
        for (features, label) in samples {
            let out = self.forward(features)?;
            let (l, _) = softmax_cross_entropy(&out.logits, *label);
            loss += l;
            let mut best = 0usize;
            for (i, &v) in out.logits.iter().enumerate() {
                if v > out.logits[best] {
                    best = i;
                }
            }
            if best == *label {
                correct += 1;
            }
        }
        let n = samples.len() as f64;
        Ok((loss / n, correct as f64 / n))
    }

    /// Mini-batch Adam training with deterministic shuffling and early
    /// stopping on validation loss; the best epoch's parameters are restored.
    pub fn train(
        &mut self,
        train: &[(Vec<&[f64]>, usize)],
        val: &[(Vec<&[f64]>, usize)],
        cfg: &FusionConfig,
    ) -> Result<TrainRecord, CoreError> {
        assert!(!train.is_empty() && !val.is_empty());
        let mut rng = rng_from_seed(cfg.seed);
        let mut adam = Adam::new(self.params.len(), cfg.learning_rate);
        let mut grad = vec![0.0; self.params.len()];

        let mut record = TrainRecord {
            train_loss: Vec::new(),
            val_loss: Vec::new(),
            val_accuracy: Vec::new(),
            selected_epoch: 0,
            stop_reason: StopReason::MaxEpochs,
        };
        let mut best_loss = f64::INFINITY;
        let mut best_params = self.params.clone();
        let mut best_epoch = 0usize;

        let mut order: Vec<usize> = (0..train.len()).collect();
        for epoch in 1..=cfg.max_epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            let mut batches = 0usize;
            for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
                let batch: Vec<(Vec<&[f64]>, usize)> = chunk
                    .iter()
                    .map(|&i| (train[i].0.clone(), train[i].1))
                    .collect();
                let loss = self.loss_and_grad(&batch, Some(&mut rng), &mut grad)?;
                if !loss.is_finite() {
                    return Err(CoreError::TrainingDiverged {
                        epoch,
                        batch: batch_idx,
                    });
                }
                adam.step(&mut self.params, &grad);
                epoch_loss += loss;
                batches += 1;
            }
            let (val_loss, val_acc) = self.evaluate_loss(val)?;
            record.train_loss.push(epoch_loss / batches as f64);
            record.val_loss.push(val_loss);
            record.val_accuracy.push(val_acc);
            if val_loss < best_loss {
                best_loss = val_loss;
                best_params.copy_from_slice(&self.params);
                best_epoch = epoch;
            } else if epoch - best_epoch >= cfg.patience {
                record.stop_reason = StopReason::EarlyStopped;
                break;
            }
        }
        self.params.copy_from_slice(&best_params);
        record.selected_epoch = best_epoch;
        Ok(record)
    }

    /// Compare backpropagated gradients against central finite differences
    /// (`h = 1e-5`) on every parameter; returns the maximum relative error.
    /// Dropout is held inactive so the loss is deterministic.
    pub fn analytic_gradient_check(
        &mut self,
        batch: &[(Vec<&[f64]>, usize)],
    ) -> Result<f64, CoreError> {
        let h = 1e-5;
        let mut grad = vec![0.0; self.params.len()];
        self.loss_and_grad(batch, None, &mut grad)?;
        let mut max_rel = 0.0f64;
        for p in 0..self.params.len() {
            let orig = self.params[p];
            self.params[p] = orig + h;
            let plus = self.loss_only(batch)?;
            self.params[p] = orig - h;
            let minus = self.loss_only(batch)?;
            self.params[p] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let denom = (grad[p].abs() + numeric.abs()).max(1e-6);
            let rel = (grad[p] - numeric).abs() / denom;
            if rel > max_rel {
                max_rel = rel;
            }
        }
        Ok(max_rel)
    }

    fn loss_only(&self, batch: &[(Vec<&[f64]>, usize)]) -> Result<f64, CoreError> {
        let mut loss = 0.0;
        for (features, label) in batch {
            let trace = self.forward_trace(features, None)?;
            loss += softmax_cross_entropy(&trace.logits, *label).0;
        }
        Ok(loss / batch.len() as f64)
    }

    /// Serialise the model (versioned JSON container, see repo docs).
    pub fn save(&self, path: &std::path::Path) -> Result<(), CoreError> {
        let envelope = serde_json::json!({
            "format": "tsfuse-model",
            "version": 1,
            "model": self,
        });
        std::fs::write(path, serde_json::to_string(&envelope).unwrap())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CoreError> {
        let text = std::fs::read_to_string(path)?;
        let envelope: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CoreError::Format(format!("model file: {e}")))?;
        if envelope["format"] != "tsfuse-model" || envelope["version"] != 1 {
            return Err(CoreError::Format("unsupported model container".into()));
        }
        serde_json::from_value(envelope["model"].clone())
            .map_err(|e| CoreError::Format(format!("model payload: {e}")))
    }
}

fn init_uniform(slice: &mut [f64], fan_in: usize, rng: &mut SeededRng) {
    let bound = (6.0 / fan_in as f64).sqrt();
    for v in slice.iter_mut() {
        *v = rng.gen_range(-bound..bound);
    }
}

/// Numerically stable softmax cross-entropy; returns loss and dL/dlogits.
fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = -(exps[label] / sum).ln();
    let mut dlogits: Vec<f64> = exps.iter().map(|&e| e / sum).collect();
    dlogits[label] -= 1.0;
    (loss, dlogits)
}

/// Standard Adam (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let bc1 = 1.0 - B1.powi(self.t as i32);
        let bc2 = 1.0 - B2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + EPS);
        }
    }
}
