//! From-scratch multilayer perceptron regressor (6 inputs, ReLU hidden
//! layers, 2 linear outputs) with exact backpropagation, seeded mini-batch
//! SGD, and a nested validation split for monitoring.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::{real, Real};

pub const INPUT_DIM: usize = 6;
pub const OUTPUT_DIM: usize = 2;

/// Distinct RNG stream for shuffling so the init stream stays a pure
/// function of the seed.
const SCHEDULE_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Error)]
pub enum MlpError<T: Real> {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("training diverged at epoch {epoch}: loss became non-finite")]
    Divergence {
        epoch: usize,
        history: TrainingHistory<T>,
    },
    #[error("model file i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file format: {0}")]
    Format(String),
}

/// Whether `epochs` counts full passes over the training rows or individual
/// mini-batch updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationUnit {
    Epochs,
    MiniBatchSteps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub hidden_widths: Vec<usize>,
    /// Training budget, interpreted per `iteration_unit`.
    pub epochs: usize,
    pub batch_size: usize,
    /// Fraction of the given rows held out for monitoring (nested split).
    pub validation_fraction: f64,
    pub learning_rate: f64,
    /// 0.0 disables momentum; classic heavy-ball otherwise.
    pub momentum: f64,
    pub seed: u64,
    pub iteration_unit: IterationUnit,
    /// Stop after this many epochs without validation improvement;
    /// None trains the full budget.
    pub early_stop_patience: Option<usize>,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_widths: vec![64, 64],
            epochs: 1000,
            batch_size: 32,
            validation_fraction: 0.2,
            learning_rate: 1e-3,
            momentum: 0.0,
            seed: 0,
            iteration_unit: IterationUnit::Epochs,
            early_stop_patience: None,
        }
    }
}

impl MlpConfig {
    pub fn validate<T: Real>(&self) -> Result<(), MlpError<T>> {
        let bad = |msg: &str| Err(MlpError::InvalidConfig(msg.to_string()));
        if self.epochs < 1 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be strictly positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.hidden_widths.iter().any(|&w| w == 0) {
            return bad("hidden layer widths must be at least 1");
        }
        if self.early_stop_patience.is_some() && self.validation_fraction == 0.0 {
            return bad("early stopping needs a validation split");
        }
        Ok(())
    }
}

/// One affine layer: row-vector convention, `x * w + b` with `w` shaped
/// (fan_in, fan_out).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub w: Matrix<T>,
    pub b: Vec<T>,
}

/// Feed-forward network; ReLU after every layer except the last.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<T> {
    pub layers: Vec<Layer<T>>,
}

/// Per-epoch losses on the (nested) train and validation subsets. With no
/// validation split the validation entries are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingHistory<T> {
    pub train_losses: Vec<T>,
    pub val_losses: Vec<T>,
}

impl<T: Real> TrainingHistory<T> {
    pub fn epochs_run(&self) -> usize {
        self.train_losses.len()
    }

    /// Writes `epoch,train_loss,val_loss` rows, epochs numbered from 1.
    pub fn save_csv(&self, path: &std::path::Path) -> Result<(), std::io::Error> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "epoch,train_loss,val_loss")?;
        for (i, (t, v)) in self.train_losses.iter().zip(&self.val_losses).enumerate() {
            writeln!(w, "{},{},{}", i + 1, t, v)?;
        }
        w.flush()
    }
}

/// Gradients with the same shapes as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub dw: Vec<Matrix<T>>,
    pub db: Vec<Vec<T>>,
}

/// He-normal initialization (std sqrt(2/fan_in)), zero biases, seeded.
/// Draws always happen in f64 and are converted, so f32 and f64 models see
/// the same stream.
pub fn init_mlp<T: Real>(config: &MlpConfig) -> Result<MlpModel<T>, MlpError<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dims = vec![INPUT_DIM];
    dims.extend_from_slice(&config.hidden_widths);
    dims.push(OUTPUT_DIM);

    let mut layers = Vec::with_capacity(dims.len() - 1);
    for pair in dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let normal =
            Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("std is positive and finite");
        let mut w = Matrix::zeros(fan_in, fan_out);
        for i in 0..fan_in {
            for j in 0..fan_out {
                w.set(i, j, real::<T>(normal.sample(&mut rng)));
            }
        }
        layers.push(Layer {
            w,
            b: vec![T::zero(); fan_out],
        });
    }
    Ok(MlpModel { layers })
}

impl<T: Real> MlpModel<T> {
    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.w.rows())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.cols())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.is_finite() && l.b.iter().all(|v| v.is_finite()))
    }

    /// Single-row forward pass.
    pub fn forward(&self, x: &[T]) -> Result<Vec<T>, MlpError<T>> {
        if x.len() != self.input_dim() {
            return Err(MlpError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(MlpError::NonFiniteInput);
        }
        let mut a = x.to_vec();
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut z = layer.b.clone();
            for (i, &ai) in a.iter().enumerate() {
                let row = layer.w.row(i);
                for (j, zj) in z.iter_mut().enumerate() {
                    *zj += ai * row[j];
                }
            }
            if idx + 1 < self.layers.len() {
                for v in &mut z {
                    if *v < T::zero() {
                        *v = T::zero();
                    }
                }
            }
            a = z;
        }
        Ok(a)
    }

    /// Row-wise forward over a batch; identical to calling [`forward`] per
    /// row.
    pub fn forward_batch(&self, x: &Matrix<T>) -> Result<Matrix<T>, MlpError<T>> {
        let mut out = Matrix::zeros(x.rows(), self.output_dim());
        for i in 0..x.rows() {
            let row = self.forward(x.row(i))?;
            for (j, v) in row.iter().enumerate() {
                out.set(i, j, *v);
            }
        }
        Ok(out)
    }

    /// Inference entry point; alias of [`forward`]. Operates on
    /// standardized inputs and returns standardized coordinates.
    pub fn predict(&self, x: &[T]) -> Result<Vec<T>, MlpError<T>> {
        self.forward(x)
    }
}

/// Mean squared error over the batch, averaged across rows and both output
/// coordinates, together with exact gradients for the realized ReLU
/// activation pattern.
pub fn loss_and_gradients<T: Real>(
    model: &MlpModel<T>,
    batch_x: &Matrix<T>,
    batch_y: &Matrix<T>,
) -> Result<(T, Gradients<T>), MlpError<T>> {
    let b = batch_x.rows();
    if b == 0 {
        return Err(MlpError::TooFewRows { needed: 1, got: 0 });
    }
    if batch_x.cols() != model.input_dim() {
        return Err(MlpError::DimensionMismatch {
            expected: model.input_dim(),
            got: batch_x.cols(),
        });
    }
    if batch_y.rows() != b || batch_y.cols() != model.output_dim() {
        return Err(MlpError::DimensionMismatch {
            expected: b * model.output_dim(),
            got: batch_y.rows() * batch_y.cols(),
        });
    }

    let n_layers = model.layers.len();
    // Forward with cached activations. activations[0] is the input batch;
    // preacts[l] is the affine output of layer l before ReLU.
    let mut activations: Vec<Matrix<T>> = Vec::with_capacity(n_layers + 1);
    let mut preacts: Vec<Matrix<T>> = Vec::with_capacity(n_layers);
    activations.push(batch_x.clone());
    for (idx, layer) in model.layers.iter().enumerate() {
        let a = &activations[idx];
        let mut z = Matrix::zeros(b, layer.w.cols());
        for r in 0..b {
            let arow = a.row(r);
            let mut acc = layer.b.clone();
            for (i, &ai) in arow.iter().enumerate() {
                let wrow = layer.w.row(i);
                for (j, accj) in acc.iter_mut().enumerate() {
                    *accj += ai * wrow[j];
                }
            }
            for (j, v) in acc.iter().enumerate() {
                z.set(r, j, *v);
            }
        }
        preacts.push(z.clone());
        if idx + 1 < n_layers {
            let mut a_next = z;
            for v in a_next.data_mut() {
                if *v < T::zero() {
                    *v = T::zero();
                }
            }
            activations.push(a_next);
        } else {
            activations.push(z);
        }
    }

    let out = &activations[n_layers];
    let scale = T::one() / real::<T>(b as f64);
    let half = real::<T>(0.5);
    let mut loss = T::zero();
    // delta holds dL/dz for the current layer, starting at the output.
    let mut delta = Matrix::zeros(b, model.output_dim());
    for r in 0..b {
        for j in 0..model.output_dim() {
            let d = out.get(r, j) - batch_y.get(r, j);
            loss += d * d;
            delta.set(r, j, d * scale);
        }
    }
    loss = loss * half * scale;

    let mut dw: Vec<Matrix<T>> = Vec::with_capacity(n_layers);
    let mut db: Vec<Vec<T>> = Vec::with_capacity(n_layers);
    for l in (0..n_layers).rev() {
        let a_prev = &activations[l];
        let layer = &model.layers[l];
        let mut dwl = Matrix::zeros(layer.w.rows(), layer.w.cols());
        let mut dbl = vec![T::zero(); layer.w.cols()];
        for r in 0..b {
            let arow = a_prev.row(r);
            let drow = delta.row(r);
            for (j, &dj) in drow.iter().enumerate() {
                dbl[j] += dj;
            }
            for (i, &ai) in arow.iter().enumerate() {
                for (j, &dj) in drow.iter().enumerate() {
                    dwl.set(i, j, dwl.get(i, j) + ai * dj);
                }
            }
        }
        if l > 0 {
            // Propagate through the previous ReLU: (delta * w^T) masked by
            // the sign of the previous preactivation.
            let mut prev = Matrix::zeros(b, layer.w.rows());
            for r in 0..b {
                let drow = delta.row(r);
                for i in 0..layer.w.rows() {
                    let wrow = layer.w.row(i);
                    let mut acc = T::zero();
                    for (j, &dj) in drow.iter().enumerate() {
                        acc += dj * wrow[j];
                    }
                    if preacts[l - 1].get(r, i) > T::zero() {
                        prev.set(r, i, acc);
                    }
                }
            }
            delta = prev;
        }
        dw.push(dwl);
        db.push(dbl);
    }
    dw.reverse();
    db.reverse();
    Ok((loss, Gradients { dw, db }))
}

/// Row-index plan for a whole training run: which rows are held out for
/// validation and the visit order for every epoch. Keeping the plan in
/// index space makes shuffling independent of the row values; remapping it
/// through a permutation reproduces a run on permuted data exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSchedule {
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    pub epoch_orders: Vec<Vec<usize>>,
}

impl TrainSchedule {
    /// Builds the plan for `n` rows from the config seed (a separate stream
    /// from parameter initialization).
    pub fn generate(n: usize, config: &MlpConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ SCHEDULE_STREAM);
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        let n_val = ((config.validation_fraction * n as f64).round() as usize).min(n - 1);
        let val_indices = all[..n_val].to_vec();
        let train_indices = all[n_val..].to_vec();

        let n_epochs = match config.iteration_unit {
            IterationUnit::Epochs => config.epochs,
            IterationUnit::MiniBatchSteps => {
                let steps_per_epoch = train_indices.len().div_ceil(config.batch_size).max(1);
                config.epochs.div_ceil(steps_per_epoch)
            }
        };
        let mut epoch_orders = Vec::with_capacity(n_epochs);
        for _ in 0..n_epochs {
            let mut order = train_indices.clone();
            order.shuffle(&mut rng);
            epoch_orders.push(order);
        }
        Self {
            train_indices,
            val_indices,
            epoch_orders,
        }
    }

    /// Rewrites every stored index through `new_index_of_old`, so the plan
    /// follows rows to their new positions after a permutation.
    pub fn remap(&self, new_index_of_old: &[usize]) -> Self {
        let map = |v: &[usize]| v.iter().map(|&i| new_index_of_old[i]).collect::<Vec<_>>();
        Self {
            train_indices: map(&self.train_indices),
            val_indices: map(&self.val_indices),
            epoch_orders: self.epoch_orders.iter().map(|o| map(o)).collect(),
        }
    }
}

/// Shuffled mini-batch gradient descent; see [`train_mlp_with_schedule`].
pub fn train_mlp<T: Real>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    config: &MlpConfig,
) -> Result<(MlpModel<T>, TrainingHistory<T>), MlpError<T>> {
    config.validate()?;
    let schedule = TrainSchedule::generate(x.rows(), config);
    train_mlp_with_schedule(x, y, config, &schedule)
}

/// Trains with an explicit row plan. Per-epoch losses are evaluated over the
/// plan's train/validation subsets in their stored order, so runs over
/// permuted rows with a remapped plan reproduce losses bit for bit.
pub fn train_mlp_with_schedule<T: Real>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    config: &MlpConfig,
    schedule: &TrainSchedule,
) -> Result<(MlpModel<T>, TrainingHistory<T>), MlpError<T>> {
    config.validate()?;
    let n = x.rows();
    if n < 2 {
        return Err(MlpError::TooFewRows { needed: 2, got: n });
    }
    if y.rows() != n {
        return Err(MlpError::DimensionMismatch {
            expected: n,
            got: y.rows(),
        });
    }
    if !x.is_finite() || !y.is_finite() {
        return Err(MlpError::NonFiniteInput);
    }
    if schedule.train_indices.is_empty() {
        return Err(MlpError::InvalidConfig(
            "schedule has no training rows".to_string(),
        ));
    }
    for &i in schedule
        .train_indices
        .iter()
        .chain(&schedule.val_indices)
        .chain(schedule.epoch_orders.iter().flatten())
    {
        if i >= n {
            return Err(MlpError::InvalidConfig(format!(
                "schedule index {i} out of bounds for {n} rows"
            )));
        }
    }

    let mut model = init_mlp::<T>(config)?;
    let mut velocity: Vec<Gradients<T>> = Vec::new();
    let mu = real::<T>(config.momentum);
    let lr = real::<T>(config.learning_rate);
    let use_momentum = config.momentum > 0.0;
    if use_momentum {
        velocity.push(Gradients {
            dw: model
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.w.rows(), l.w.cols()))
                .collect(),
            db: model
                .layers
                .iter()
                .map(|l| vec![T::zero(); l.b.len()])
                .collect(),
        });
    }

    let gather = |indices: &[usize]| -> (Matrix<T>, Matrix<T>) {
        let mut bx = Matrix::zeros(indices.len(), x.cols());
        let mut by = Matrix::zeros(indices.len(), y.cols());
        for (r, &i) in indices.iter().enumerate() {
            for j in 0..x.cols() {
                bx.set(r, j, x.get(i, j));
            }
            for j in 0..y.cols() {
                by.set(r, j, y.get(i, j));
            }
        }
        (bx, by)
    };

    let subset_loss = |model: &MlpModel<T>, indices: &[usize]| -> Result<T, MlpError<T>> {
        if indices.is_empty() {
            return Ok(T::nan());
        }
        let mut acc = T::zero();
        for &i in indices {
            let out = model.forward(x.row(i))?;
            for (j, &o) in out.iter().enumerate() {
                let d = o - y.get(i, j);
                acc += d * d;
            }
        }
        Ok(acc / real::<T>(2.0 * indices.len() as f64))
    };

    let total_steps_budget = match config.iteration_unit {
        IterationUnit::Epochs => usize::MAX,
        IterationUnit::MiniBatchSteps => config.epochs,
    };
    let max_epochs = schedule
        .epoch_orders
        .len()
        .min(match config.iteration_unit {
            IterationUnit::Epochs => config.epochs,
            IterationUnit::MiniBatchSteps => usize::MAX,
        });

    let mut history = TrainingHistory {
        train_losses: Vec::new(),
        val_losses: Vec::new(),
    };
    let mut steps_taken = 0usize;
    let mut best_val = T::infinity();
    let mut stale_epochs = 0usize;

    'epochs: for epoch in 0..max_epochs {
        let order = &schedule.epoch_orders[epoch];
        for chunk in order.chunks(config.batch_size) {
            if steps_taken >= total_steps_budget {
                break;
            }
            let (bx, by) = gather(chunk);
            let (batch_loss, grads) = loss_and_gradients(&model, &bx, &by)?;
            if !batch_loss.is_finite() {
                return Err(MlpError::Divergence { epoch, history });
            }
            for (l, layer) in model.layers.iter_mut().enumerate() {
                if use_momentum {
                    let v = &mut velocity[0];
                    for (wv, gv) in v.dw[l].data_mut().iter_mut().zip(grads.dw[l].as_slice()) {
                        *wv = mu * *wv - lr * *gv;
                    }
                    for (w, vv) in layer.w.data_mut().iter_mut().zip(v.dw[l].as_slice()) {
                        *w += *vv;
                    }
                    for (bv, gv) in v.db[l].iter_mut().zip(&grads.db[l]) {
                        *bv = mu * *bv - lr * *gv;
                    }
                    for (bp, vv) in layer.b.iter_mut().zip(&v.db[l]) {
                        *bp += *vv;
                    }
                } else {
                    for (w, gv) in layer.w.data_mut().iter_mut().zip(grads.dw[l].as_slice()) {
                        *w -= lr * *gv;
                    }
                    for (bp, gv) in layer.b.iter_mut().zip(&grads.db[l]) {
                        *bp -= lr * *gv;
                    }
                }
            }
            steps_taken += 1;
        }

        let train_loss = subset_loss(&model, &schedule.train_indices)?;
        let val_loss = subset_loss(&model, &schedule.val_indices)?;
        if !train_loss.is_finite() || !model.is_finite() {
            return Err(MlpError::Divergence { epoch, history });
        }
        history.train_losses.push(train_loss);
        history.val_losses.push(val_loss);

        if let Some(patience) = config.early_stop_patience {
            if val_loss < best_val {
                best_val = val_loss;
                stale_epochs = 0;
            } else {
                stale_epochs += 1;
                if stale_epochs >= patience {
                    break 'epochs;
                }
            }
        }
        if steps_taken >= total_steps_budget {
            break;
        }
    }

    Ok((model, history))
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MlpModelFile {
    #[serde(rename = "type")]
    kind: String,
    layers: Vec<LayerFile>,
}

impl MlpModel<f64> {
    pub fn save_json(&self, path: &std::path::Path) -> Result<(), MlpError<f64>> {
        let file = MlpModelFile {
            kind: "mlp".to_string(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    w: (0..l.w.rows()).map(|i| l.w.row(i).to_vec()).collect(),
                    b: l.b.clone(),
                })
                .collect(),
        };
        let out = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(out), &file)
            .map_err(|e| MlpError::Format(e.to_string()))?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self, MlpError<f64>> {
        let file: MlpModelFile =
            serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))
                .map_err(|e| MlpError::Format(e.to_string()))?;
        if file.kind != "mlp" {
            return Err(MlpError::Format(format!(
                "expected type \"mlp\", got \"{}\"",
                file.kind
            )));
        }
        if file.layers.is_empty() {
            return Err(MlpError::Format("model has no layers".to_string()));
        }
        let mut layers = Vec::with_capacity(file.layers.len());
        let mut expect_in: Option<usize> = None;
        for (idx, lf) in file.layers.iter().enumerate() {
            let rows = lf.w.len();
            let cols = lf.w.first().map_or(0, Vec::len);
            if rows == 0 || cols == 0 || lf.w.iter().any(|r| r.len() != cols) {
                return Err(MlpError::Format(format!(
                    "layer {idx} weights are ragged or empty"
                )));
            }
            if lf.b.len() != cols {
                return Err(MlpError::Format(format!(
                    "layer {idx}: {cols} outputs but {} biases",
                    lf.b.len()
                )));
            }
            if let Some(e) = expect_in {
                if rows != e {
                    return Err(MlpError::Format(format!(
                        "layer {idx} expects {rows} inputs but previous layer emits {e}"
                    )));
                }
            }
            expect_in = Some(cols);
            let mut data = Vec::with_capacity(rows * cols);
            for r in &lf.w {
                data.extend_from_slice(r);
            }
            layers.push(Layer {
                w: Matrix::from_vec(rows, cols, data),
                b: lf.b.clone(),
            });
        }
        let model = MlpModel { layers };
        if !model.is_finite() {
            return Err(MlpError::Format(
                "model contains non-finite parameters".to_string(),
            ));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn small_config(hidden: Vec<usize>, seed: u64) -> MlpConfig {
        MlpConfig {
            hidden_widths: hidden,
            epochs: 5,
            batch_size: 4,
            validation_fraction: 0.25,
            learning_rate: 0.01,
            momentum: 0.0,
            seed,
            iteration_unit: IterationUnit::Epochs,
            early_stop_patience: None,
        }
    }

    fn random_batch(rows: usize, cols: usize, seed: u64, span: f64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols)
                .map(|_| rng.random_range(-span..span))
                .collect(),
        )
    }

    #[test]
    fn init_is_deterministic_with_default_shapes() {
        let cfg = MlpConfig::default();
        let a: MlpModel<f64> = init_mlp(&cfg).unwrap();
        let b: MlpModel<f64> = init_mlp(&cfg).unwrap();
        assert_eq!(a, b);
        let shapes: Vec<(usize, usize)> =
            a.layers.iter().map(|l| (l.w.rows(), l.w.cols())).collect();
        assert_eq!(shapes, vec![(6, 64), (64, 64), (64, 2)]);
        assert!(a.layers.iter().all(|l| l.b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn empty_hidden_gives_direct_affine_model() {
        let cfg = MlpConfig {
            hidden_widths: vec![],
            ..MlpConfig::default()
        };
        let m: MlpModel<f64> = init_mlp(&cfg).unwrap();
        assert_eq!(m.layers.len(), 1);
        assert_eq!((m.layers[0].w.rows(), m.layers[0].w.cols()), (6, 2));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for cfg in [
            MlpConfig {
                epochs: 0,
                ..MlpConfig::default()
            },
            MlpConfig {
                batch_size: 0,
                ..MlpConfig::default()
            },
            MlpConfig {
                validation_fraction: 1.0,
                ..MlpConfig::default()
            },
            MlpConfig {
                learning_rate: 0.0,
                ..MlpConfig::default()
            },
            MlpConfig {
                hidden_widths: vec![0],
                ..MlpConfig::default()
            },
            MlpConfig {
                early_stop_patience: Some(2),
                validation_fraction: 0.0,
                ..MlpConfig::default()
            },
        ] {
            assert!(matches!(
                cfg.validate::<f64>(),
                Err(MlpError::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn zeroed_model_maps_everything_to_zero() {
        let cfg = small_config(vec![3], 1);
        let mut m: MlpModel<f64> = init_mlp(&cfg).unwrap();
        for l in &mut m.layers {
            for v in l.w.data_mut() {
                *v = 0.0;
            }
            for v in &mut l.b {
                *v = 0.0;
            }
        }
        assert_eq!(
            m.forward(&[1.0, -2.0, 3.0, 0.5, -0.1, 9.0]).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn handcrafted_single_unit_computes_relu_of_first_input() {
        // 6 -> 1 -> 2 with a single pass-through path on the first input.
        let mut w1 = Matrix::zeros(6, 1);
        w1.set(0, 0, 1.0);
        let mut w2 = Matrix::zeros(1, 2);
        w2.set(0, 0, 1.0);
        let m = MlpModel {
            layers: vec![
                Layer {
                    w: w1,
                    b: vec![0.0],
                },
                Layer {
                    w: w2,
                    b: vec![0.0, 0.0],
                },
            ],
        };
        let neg = m.forward(&[-3.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(neg, vec![0.0, 0.0]);
        let pos = m.forward(&[2.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(pos, vec![2.0, 0.0]);
    }

    #[test]
    fn batch_forward_equals_rowwise_forward() {
        let cfg = small_config(vec![5, 3], 7);
        let m: MlpModel<f64> = init_mlp(&cfg).unwrap();
        let x = random_batch(9, 6, 3, 2.0);
        let batch = m.forward_batch(&x).unwrap();
        for i in 0..x.rows() {
            let single = m.forward(x.row(i)).unwrap();
            assert_eq!(batch.row(i), single.as_slice());
        }
    }

    #[test]
    fn loss_zero_and_gradients_zero_at_exact_fit() {
        let cfg = small_config(vec![4], 11);
        let m: MlpModel<f64> = init_mlp(&cfg).unwrap();
        let x = random_batch(5, 6, 4, 1.5);
        let y = m.forward_batch(&x).unwrap();
        let (loss, grads) = loss_and_gradients(&m, &x, &y).unwrap();
        assert_eq!(loss, 0.0);
        for g in &grads.dw {
            assert!(g.as_slice().iter().all(|&v| v == 0.0));
        }
        for g in &grads.db {
            assert!(g.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn doubling_errors_quadruples_loss() {
        let cfg = small_config(vec![4], 13);
        let m: MlpModel<f64> = init_mlp(&cfg).unwrap();
        let x = random_batch(6, 6, 5, 1.0);
        let pred = m.forward_batch(&x).unwrap();
        let mut y1 = pred.clone();
        let mut y2 = pred.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for r in 0..pred.rows() {
            for c in 0..pred.cols() {
                let e = rng.random_range(-0.5..0.5);
                y1.set(r, c, pred.get(r, c) + e);
                y2.set(r, c, pred.get(r, c) + 2.0 * e);
            }
        }
        let (l1, _) = loss_and_gradients(&m, &x, &y1).unwrap();
        let (l2, _) = loss_and_gradients(&m, &x, &y2).unwrap();
        assert!((l2 - 4.0 * l1).abs() < 1e-12 * l2.max(1.0));
    }

    /// Central-difference check of every parameter gradient. Draws whose
    /// hidden preactivations sit within 1e-6 of the ReLU kink are redrawn:
    /// there the analytic piecewise gradient and the symmetric difference
    /// legitimately disagree.
    #[test]
    fn analytic_gradients_match_finite_differences() {
        let h = 1e-5;
        let mut checked = 0;
        let mut attempt = 0u64;
        while checked < 8 {
            attempt += 1;
            let widths = match attempt % 4 {
                0 => vec![3],
                1 => vec![4, 2],
                2 => vec![2, 3, 2],
                _ => vec![],
            };
            let cfg = small_config(widths, 1000 + attempt);
            let mut m: MlpModel<f64> = init_mlp(&cfg).unwrap();
            let x = random_batch(4, 6, 2000 + attempt, 1.5);
            let y = random_batch(4, 2, 3000 + attempt, 1.5);

            let near_kink = {
                let mut found = false;
                let mut a = x.clone();
                for (idx, layer) in m.layers.iter().enumerate() {
                    let mut z = Matrix::zeros(a.rows(), layer.w.cols());
                    for r in 0..a.rows() {
                        for j in 0..layer.w.cols() {
                            let mut acc = layer.b[j];
                            for i in 0..layer.w.rows() {
                                acc += a.get(r, i) * layer.w.get(i, j);
                            }
                            z.set(r, j, acc);
                        }
                    }
                    if idx + 1 < m.layers.len() {
                        if z.as_slice().iter().any(|v| v.abs() < 1e-6) {
                            found = true;
                            break;
                        }
                        let mut nz = z.clone();
                        for v in nz.data_mut() {
                            *v = v.max(0.0);
                        }
                        a = nz;
                    }
                }
                found
            };
            if near_kink {
                continue;
            }

            let (_, grads) = loss_and_gradients(&m, &x, &y).unwrap();
            let n_layers = m.layers.len();
            for l in 0..n_layers {
                let (rows, cols) = (m.layers[l].w.rows(), m.layers[l].w.cols());
                for i in 0..rows {
                    for j in 0..cols {
                        let orig = m.layers[l].w.get(i, j);
                        m.layers[l].w.set(i, j, orig + h);
                        let up = loss_and_gradients(&m, &x, &y).unwrap().0;
                        m.layers[l].w.set(i, j, orig - h);
                        let dn = loss_and_gradients(&m, &x, &y).unwrap().0;
                        m.layers[l].w.set(i, j, orig);
                        assert_rel_close(grads.dw[l].get(i, j), (up - dn) / (2.0 * h), l, i, j);
                    }
                }
                for j in 0..cols {
                    let orig = m.layers[l].b[j];
                    m.layers[l].b[j] = orig + h;
                    let up = loss_and_gradients(&m, &x, &y).unwrap().0;
                    m.layers[l].b[j] = orig - h;
                    let dn = loss_and_gradients(&m, &x, &y).unwrap().0;
                    m.layers[l].b[j] = orig;
                    assert_rel_close(grads.db[l][j], (up - dn) / (2.0 * h), l, usize::MAX, j);
                }
            }
            checked += 1;
        }
    }

    fn assert_rel_close(analytic: f64, numeric: f64, l: usize, i: usize, j: usize) {
        if analytic.abs() < 1e-10 && numeric.abs() < 1e-10 {
            return;
        }
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
        assert!(
            rel < 1e-4,
            "layer {l} ({i},{j}): analytic {analytic} vs numeric {numeric} (rel {rel})"
        );
    }

    fn linear_dataset(n: usize, seed: u64) -> (Matrix<f64>, Matrix<f64>) {
        let x = random_batch(n, 6, seed, 1.0);
        let mut y = Matrix::zeros(n, 2);
        for i in 0..n {
            let r = x.row(i);
            y.set(i, 0, 0.6 * r[0] - 0.3 * r[2] + 0.1 * r[4]);
            y.set(i, 1, -0.2 * r[1] + 0.5 * r[3] - 0.4 * r[5]);
        }
        (x, y)
    }

    #[test]
    fn linear_mapping_loss_drops_by_ten_x() {
        let (x, y) = linear_dataset(200, 77);
        let cfg = MlpConfig {
            hidden_widths: vec![16],
            epochs: 100,
            batch_size: 32,
            validation_fraction: 0.2,
            learning_rate: 0.02,
            seed: 5,
            ..MlpConfig::default()
        };
        let (_, history) = train_mlp(&x, &y, &cfg).unwrap();
        let first = history.train_losses[0];
        let last = *history.train_losses.last().unwrap();
        assert!(last < 0.1 * first, "first {first}, last {last}");
        assert_eq!(history.epochs_run(), 100);
        assert!(history.val_losses.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = linear_dataset(60, 21);
        let cfg = small_config(vec![8], 9);
        let (m1, h1) = train_mlp(&x, &y, &cfg).unwrap();
        let (m2, h2) = train_mlp(&x, &y, &cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(h1, h2);
    }

    #[test]
    fn schedule_remap_reproduces_losses_on_permuted_rows() {
        let (x, y) = linear_dataset(24, 31);
        let cfg = small_config(vec![6], 17);
        let schedule = TrainSchedule::generate(x.rows(), &cfg);
        let (_, h1) = train_mlp_with_schedule(&x, &y, &cfg, &schedule).unwrap();

        // Reverse the rows; new_index_of_old[i] tells where row i moved.
        let n = x.rows();
        let new_index_of_old: Vec<usize> = (0..n).map(|i| n - 1 - i).collect();
        let mut xp = Matrix::zeros(n, x.cols());
        let mut yp = Matrix::zeros(n, y.cols());
        for i in 0..n {
            for j in 0..x.cols() {
                xp.set(new_index_of_old[i], j, x.get(i, j));
            }
            for j in 0..y.cols() {
                yp.set(new_index_of_old[i], j, y.get(i, j));
            }
        }
        let remapped = schedule.remap(&new_index_of_old);
        let (_, h2) = train_mlp_with_schedule(&xp, &yp, &cfg, &remapped).unwrap();
        assert_eq!(h1, h2);
    }

    #[test]
    fn momentum_and_step_budget_modes_run() {
        let (x, y) = linear_dataset(50, 41);
        let cfg = MlpConfig {
            hidden_widths: vec![8],
            epochs: 25, // 25 mini-batch steps
            batch_size: 8,
            validation_fraction: 0.2,
            learning_rate: 0.01,
            momentum: 0.9,
            seed: 3,
            iteration_unit: IterationUnit::MiniBatchSteps,
            early_stop_patience: None,
        };
        let (m, history) = train_mlp(&x, &y, &cfg).unwrap();
        assert!(m.is_finite());
        // 40 train rows / batch 8 = 5 steps per epoch -> 5 full epochs.
        assert_eq!(history.epochs_run(), 5);
    }

    #[test]
    fn early_stopping_cuts_the_run_short() {
        let (x, y) = linear_dataset(40, 51);
        let cfg = MlpConfig {
            hidden_widths: vec![4],
            epochs: 200,
            batch_size: 8,
            validation_fraction: 0.25,
            learning_rate: 1e-5, // slow enough that val loss plateaus
            early_stop_patience: Some(3),
            seed: 8,
            ..MlpConfig::default()
        };
        let (_, history) = train_mlp(&x, &y, &cfg).unwrap();
        assert!(history.epochs_run() <= 200);
    }

    #[test]
    fn divergence_is_reported_with_history() {
        let (x, y) = linear_dataset(40, 61);
        let cfg = MlpConfig {
            hidden_widths: vec![8],
            epochs: 50,
            batch_size: 8,
            validation_fraction: 0.2,
            learning_rate: 1e6, // guaranteed blow-up
            seed: 2,
            ..MlpConfig::default()
        };
        match train_mlp(&x, &y, &cfg) {
            Err(MlpError::Divergence { history, .. }) => {
                assert!(history.train_losses.len() < 50);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let cfg = small_config(vec![5, 3], 19);
        let m: MlpModel<f64> = init_mlp(&cfg).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        m.save_json(f.path()).unwrap();
        let loaded = MlpModel::<f64>::load_json(f.path()).unwrap();
        assert_eq!(m, loaded);
    }

    #[test]
    fn history_csv_has_header_and_rows() {
        let history = TrainingHistory {
            train_losses: vec![0.5, 0.25],
            val_losses: vec![0.6, 0.33],
        };
        let f = tempfile::NamedTempFile::new().unwrap();
        history.save_csv(f.path()).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "epoch,train_loss,val_loss");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1,0.5,"));
    }
}
