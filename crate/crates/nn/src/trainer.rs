use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gpstate_core::dataset::Dataset;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::save_checkpoint;
use crate::error::{Error, Result};
use crate::layers::{integral_mse, integral_mse_loss};
use crate::model::GroundStateNet;
use crate::optim::{adam_step, AdamConfig, AdamState};
use crate::tensor::Tensor;

/// Multiplies the learning rate by `factor` every `every` epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDecay {
    pub every: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub shuffle: bool,
    pub checkpoint_dir: Option<PathBuf>,
    pub decay: Option<StepDecay>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            adam: AdamConfig::default(),
            seed: 0,
            shuffle: true,
            checkpoint_dir: None,
            decay: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epoch count must be at least 1".into()));
        }
        if let Some(d) = self.decay {
            if d.every == 0 || !(d.factor > 0.0 && d.factor <= 1.0) {
                return Err(Error::Config(format!(
                    "step decay needs every >= 1 and factor in (0, 1], got {} and {}",
                    d.every, d.factor
                )));
            }
        }
        Ok(())
    }

    /// Learning rate used during `epoch` (1-based).
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        match self.decay {
            Some(d) => self.adam.learning_rate * d.factor.powi(((epoch - 1) / d.every) as i32),
            None => self.adam.learning_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// 1-based epoch with the lowest validation loss.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub checkpoint: Option<PathBuf>,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,seconds\n");
        for e in &self.epochs {
            writeln!(out, "{},{:e},{:e},{:.6}", e.epoch, e.train_loss, e.val_loss, e.seconds).expect("string write");
        }
        out
    }

    /// The report without its timing column, which is the part that is
    /// reproducible across runs.
    pub fn losses_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for e in &self.epochs {
            writeln!(out, "{},{:e},{:e}", e.epoch, e.train_loss, e.val_loss).expect("string write");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Network inputs and flattened targets for a subset of a dataset.
#[derive(Debug, Clone)]
pub struct Samples {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    /// Values per target: output channels × grid points.
    pub item_len: usize,
    pub target_shape: Vec<usize>,
    pub cell_volume: f64,
}

impl Samples {
    pub fn from_dataset(net: &GroundStateNet, dataset: &Dataset, indices: &[usize]) -> Result<Self> {
        check_compatible(net, dataset)?;
        if indices.is_empty() {
            return Err(Error::Empty("sample indices"));
        }
        let grid = dataset.grid();
        let item_len = dataset.header.components * grid.len();
        let mut inputs = Vec::with_capacity(indices.len());
        let mut targets = Vec::with_capacity(indices.len() * item_len);
        for &i in indices {
            let r = dataset
                .records
                .get(i)
                .ok_or_else(|| Error::Shape(format!("record index {i} out of range ({} records)", dataset.len())))?;
            inputs.push(r.param());
            for t in &r.targets {
                targets.extend_from_slice(t);
            }
        }
        let mut target_shape = vec![dataset.header.components];
        target_shape.extend(grid.shape());
        Ok(Self {
            inputs,
            targets,
            item_len,
            target_shape,
            cell_volume: grid.cell_volume(),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.item_len..(i + 1) * self.item_len]
    }

    fn batch(&self, order: &[usize]) -> Result<(Vec<f64>, Tensor)> {
        let inputs = order.iter().map(|&i| self.inputs[i]).collect();
        let mut data = Vec::with_capacity(order.len() * self.item_len);
        for &i in order {
            data.extend_from_slice(self.target(i));
        }
        let mut shape = vec![order.len()];
        shape.extend(&self.target_shape);
        Ok((inputs, Tensor::new(shape, data)?))
    }
}

fn check_compatible(net: &GroundStateNet, dataset: &Dataset) -> Result<()> {
    let cfg = net.config();
    if cfg.axes.as_slice() != dataset.grid().axes() {
        return Err(Error::Shape(format!(
            "network grid {:?} differs from dataset grid {:?}",
            cfg.axes,
            dataset.grid().axes()
        )));
    }
    if cfg.output_channels != dataset.header.components {
        return Err(Error::Shape(format!(
            "network emits {} channels, dataset holds {} components",
            cfg.output_channels, dataset.header.components
        )));
    }
    Ok(())
}

/// Eval-mode predictions are computed in chunks of this many items.
const EVAL_CHUNK: usize = 256;

/// Mean integral MSE of eval-mode predictions over `samples`.
pub fn evaluate_samples(net: &GroundStateNet, samples: &Samples) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("evaluation samples"));
    }
    let mut sum = 0.0;
    for start in (0..samples.len()).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(samples.len());
        let pred = net.predict(&samples.inputs[start..end])?;
        for (k, i) in (start..end).enumerate() {
            sum += integral_mse(pred.item(k), samples.target(i), samples.cell_volume);
        }
    }
    Ok(sum / samples.len() as f64)
}

/// Mean integral MSE of eval-mode predictions over the listed records.
pub fn evaluate_loss(net: &GroundStateNet, dataset: &Dataset, indices: &[usize]) -> Result<f64> {
    evaluate_samples(net, &Samples::from_dataset(net, dataset, indices)?)
}

/// Trains with shuffled mini-batches and Adam, evaluating the validation set
/// after each epoch. The network ends up holding the parameters of the epoch
/// with the lowest validation loss; with a checkpoint directory that state is
/// also written there.
pub fn train(
    net: &mut GroundStateNet,
    dataset: &Dataset,
    train_indices: &[usize],
    val_indices: &[usize],
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if train_indices.iter().any(|i| val_indices.contains(i)) {
        return Err(Error::Config("training and validation indices overlap".into()));
    }
    let train_set = Samples::from_dataset(net, dataset, train_indices)?;
    let val_set = Samples::from_dataset(net, dataset, val_indices)?;
    if let Some(dir) = &config.checkpoint_dir {
        fs::create_dir_all(dir)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(net.params().iter().map(|p| p.len()));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    let mut best_path: Option<PathBuf> = None;

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let lr = config.learning_rate(epoch);
        let mut loss_sum = 0.0;
        for (batch_index, chunk) in order.chunks(config.batch_size).enumerate() {
            let (inputs, target) = train_set.batch(chunk)?;
            let nan = |e: Error| match e {
                Error::NonFinite(_) => Error::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                },
                other => other,
            };
            let pred = net.forward(&inputs).map_err(nan)?;
            let (loss, grad) = integral_mse_loss(&pred, &target, train_set.cell_volume)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                });
            }
            net.zero_grad();
            net.backward(&grad).map_err(nan)?;
            adam_step(&mut net.params_mut(), &mut adam, &config.adam, lr)?;
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let val_loss = evaluate_samples(net, &val_set)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: 0 });
        }
        epochs.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            seconds: started.elapsed().as_secs_f64(),
        });
        if best.as_ref().map_or(true, |(_, b, _)| val_loss < *b) {
            best = Some((epoch, val_loss, net.state()));
            if let Some(dir) = &config.checkpoint_dir {
                let path = dir.join(checkpoint_name(epoch, val_loss));
                save_checkpoint(net, &path)?;
                if let Some(old) = best_path.replace(path) {
                    fs::remove_file(old)?;
                }
            }
        }
    }

    let (best_epoch, best_val_loss, state) = best.expect("at least one epoch");
    net.load_state(&state, true)?;
    Ok(TrainReport {
        epochs,
        best_epoch,
        best_val_loss,
        checkpoint: best_path,
    })
}

/// File name of the best checkpoint: `best-e0042-val1.234567e-4.gpnn`.
pub fn checkpoint_name(epoch: usize, val_loss: f64) -> String {
    format!("best-e{epoch:04}-val{val_loss:.6e}.gpnn")
}
