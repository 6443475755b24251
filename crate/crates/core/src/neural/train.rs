use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::arch::{Arch, Conditioning};
use super::model::{Prepared, ShapeInput};
use super::{NeuralError, NeuralModel, Real};
use crate::data::SampleSet;
use crate::field::DistanceField;
use crate::geom::{seeded_rng, unit_box, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub delta: f64,
    /// Shapes per mini-batch.
    pub batch_shapes: usize,
    /// Points drawn per shape and step.
    pub points_per_shape: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Share of each shape's points held out for validation.
    pub val_fraction: f64,
    /// Validate every this many epochs (and after the last one).
    pub val_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            batch_shapes: 4,
            points_per_shape: 1024,
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epochs: 100,
            seed: 0,
            val_fraction: 0.1,
            val_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: &str| Err(NeuralError::Config(m.into()));
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return bad("delta must be positive");
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return bad("learning rate must be non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must be in [0, 1)");
        }
        if self.batch_shapes == 0 || self.points_per_shape == 0 || self.val_every == 0 {
            return bad("batch sizes and validation interval must be positive");
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad("validation fraction must be in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub steps: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// Mean clamped L1 of every optimizer step.
    pub step_losses: Vec<f64>,
}

impl TrainLog {
    pub fn last_val(&self) -> Option<f64> {
        self.epochs.iter().rev().find_map(|e| e.val_loss)
    }
}

/// Trains a freshly initialized model (seeded by `cfg.seed`).
pub fn train<const D: usize, T: Real>(
    mut arch: Arch,
    data: &[SampleSet<D>],
    cfg: &TrainConfig,
) -> Result<(NeuralModel<T>, TrainLog), NeuralError> {
    arch.delta = cfg.delta;
    let model = NeuralModel::new(arch, cfg.seed)?;
    train_model(model, data, cfg)
}

struct Shape<'a, T, const D: usize> {
    prepared: Prepared<T>,
    input: ShapeInput<'a, D>,
    set: &'a SampleSet<D>,
    train: Vec<usize>,
    val: Vec<usize>,
}

/// Continues training `model`; deterministic given `cfg.seed`.
pub fn train_model<const D: usize, T: Real>(
    mut model: NeuralModel<T>,
    data: &[SampleSet<D>],
    cfg: &TrainConfig,
) -> Result<(NeuralModel<T>, TrainLog), NeuralError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    if cfg.delta != model.delta() {
        return Err(NeuralError::Config(format!(
            "training delta {} differs from the model's {}",
            cfg.delta,
            model.delta()
        )));
    }
    if let Conditioning::AutoDecoder { shapes } = model.arch().conditioning {
        if shapes != data.len() {
            return Err(NeuralError::Config(format!(
                "auto-decoder holds {shapes} shapes but the dataset has {}",
                data.len()
            )));
        }
    }
    let bx = unit_box::<D>();
    let mut rng = seeded_rng(cfg.seed ^ 0x7472_6169_6e00);
    let mut shapes = Vec::with_capacity(data.len());
    for (i, set) in data.iter().enumerate() {
        if set.points.len() != set.gt.len() {
            return Err(NeuralError::ShapeMismatch(format!("shape {}: points and gt differ in length", set.id)));
        }
        let outside: Vec<usize> = (0..set.len()).filter(|&j| !bx.contains(&set.points[j])).collect();
        if !outside.is_empty() {
            return Err(NeuralError::OutOfBox { indices: outside });
        }
        let input = match model.arch().conditioning {
            Conditioning::Encoder => ShapeInput::Cloud(&set.input),
            Conditioning::AutoDecoder { .. } => ShapeInput::Index(i),
        };
        let mut idx: Vec<usize> = (0..set.len()).collect();
        for k in (1..idx.len()).rev() {
            idx.swap(k, rng.random_range(0..=k));
        }
        let n_val = (set.len() as f64 * cfg.val_fraction).round() as usize;
        let val = idx[..n_val].to_vec();
        let train = idx[n_val..].to_vec();
        if train.is_empty() {
            return Err(NeuralError::ShapeMismatch(format!("shape {} has no training points", set.id)));
        }
        shapes.push(Shape {
            prepared: model.prepare(input)?,
            input,
            set,
            train,
            val,
        });
    }

    let mut opt = Adam::<T>::new(model.layout().total, cfg.lr, cfg.beta1, cfg.beta2);
    let mut log = TrainLog::default();
    let p = cfg.points_per_shape;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..shapes.len()).collect();
        for k in (1..order.len()).rev() {
            order.swap(k, rng.random_range(0..=k));
        }
        let mut epoch_loss = 0.0;
        let mut steps = 0;
        for batch in order.chunks(cfg.batch_shapes) {
            let draws: Vec<(usize, Vec<f64>, Vec<f64>)> = batch
                .iter()
                .map(|&s| {
                    let sh = &shapes[s];
                    let mut pts = Vec::with_capacity(p * D);
                    let mut gt = Vec::with_capacity(p);
                    for _ in 0..p {
                        let j = sh.train[rng.random_range(0..sh.train.len())];
                        pts.extend(sh.set.points[j].iter());
                        gt.push(sh.set.gt[j]);
                    }
                    (s, pts, gt)
                })
                .collect();
            let weight = 1.0 / (batch.len() * p) as f64;
            let parts: Vec<(f64, Vec<T>)> = draws
                .par_iter()
                .map(|(s, pts, gt)| {
                    let mut g = vec![T::zero(); model.layout().total];
                    let l = model.accumulate(&shapes[*s].prepared, pts, gt, weight, &mut g);
                    (l, g)
                })
                .collect();
            let mut grad = vec![T::zero(); model.layout().total];
            let mut loss = 0.0;
            for (l, g) in parts {
                loss += l;
                grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            loss *= weight;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(NeuralError::NonFiniteLoss {
                    epoch,
                    step: log.step_losses.len(),
                });
            }
            opt.step(model.params_mut(), &grad);
            log.step_losses.push(loss);
            epoch_loss += loss;
            steps += 1;
        }
        let validate = (epoch + 1) % cfg.val_every == 0 || epoch + 1 == cfg.epochs;
        let val_loss = if validate { validation_loss(&model, &shapes, p)? } else { None };
        log.epochs.push(EpochLog {
            epoch,
            steps,
            train_loss: epoch_loss / steps as f64,
            val_loss,
        });
        log::debug!("epoch {epoch}: train {:.6} val {:?}", epoch_loss / steps as f64, val_loss);
    }
    Ok((model, log))
}

/// Mean clamped L1 over at most `cap` held-out points per shape.
fn validation_loss<const D: usize, T: Real>(
    model: &NeuralModel<T>,
    shapes: &[Shape<T, D>],
    cap: usize,
) -> Result<Option<f64>, NeuralError> {
    let mut total = 0.0;
    let mut n = 0usize;
    for sh in shapes {
        if sh.val.is_empty() {
            continue;
        }
        let f = model.field(sh.input)?;
        let pts: Vec<Point<D>> = sh.val.iter().take(cap).map(|&j| sh.set.points[j]).collect();
        let pred = f.eval_batch(&pts);
        for (v, &j) in pred.iter().zip(&sh.val) {
            total += super::loss::clamped_l1(*v, sh.set.gt[j], model.delta());
        }
        n += pts.len();
    }
    Ok((n > 0).then(|| total / n as f64))
}
