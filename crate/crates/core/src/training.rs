//! Adam mini-batch training, evaluation, and loss-curve smoothing.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::EncodedPair;
use crate::error::{Error, Result};
use crate::model::{predict, PairClassifier};
use crate::{Tape, Tensor};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub smoothing_window: usize,
    /// Global-norm gradient clipping, off by default.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2,
            batch_size: 64,
            lr: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            smoothing_window: 8,
            grad_clip: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.lr <= 0.0 {
            return Err(Error::Config("lr must be > 0".into()));
        }
        for (name, b) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) || b == 0.0 {
                return Err(Error::Config(format!("{name} must be in (0, 1)")));
            }
        }
        if self.adam_eps <= 0.0 {
            return Err(Error::Config("eps must be > 0".into()));
        }
        if self.smoothing_window < 1 {
            return Err(Error::Config("smoothing window must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-parameter first/second moment buffers plus the shared step counter.
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    pub step: usize,
}

impl AdamState {
    pub fn new(params: &[(String, Tensor)]) -> AdamState {
        AdamState {
            m: params.iter().map(|(_, p)| vec![0.0; p.numel()]).collect(),
            v: params.iter().map(|(_, p)| vec![0.0; p.numel()]).collect(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update over every parameter's accumulated
/// gradient. NaN gradients abort with the offending parameter named.
pub fn adam_step(
    params: &[(String, Tensor)],
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<()> {
    // optional global-norm clip
    let clip_scale = match config.grad_clip {
        Some(limit) => {
            let mut sq = 0.0;
            for (_, p) in params {
                if let Some(g) = p.grad() {
                    sq += g.iter().map(|x| x * x).sum::<f64>();
                }
            }
            let norm = sq.sqrt();
            if norm > limit {
                limit / norm
            } else {
                1.0
            }
        }
        None => 1.0,
    };
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - config.adam_beta1.powi(t);
    let bc2 = 1.0 - config.adam_beta2.powi(t);
    for (idx, (name, p)) in params.iter().enumerate() {
        let grad = p
            .grad()
            .ok_or_else(|| Error::Usage(format!("parameter {name} has no gradient buffer")))?;
        if grad.iter().any(|g| g.is_nan()) {
            return Err(Error::Numeric(format!(
                "NaN gradient in parameter {name} at step {}",
                state.step
            )));
        }
        let m = &mut state.m[idx];
        let v = &mut state.v[idx];
        let mut data = p.data_mut();
        for i in 0..grad.len() {
            let g = grad[i] * clip_scale;
            m[i] = config.adam_beta1 * m[i] + (1.0 - config.adam_beta1) * g;
            v[i] = config.adam_beta2 * v[i] + (1.0 - config.adam_beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            data[i] -= config.lr * m_hat / (v_hat.sqrt() + config.adam_eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub split: String,
    pub accuracy: f64,
    pub cross_entropy: f64,
}

/// Per-step batch losses plus end-of-run evaluation records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    pub steps: Vec<(usize, f64)>,
    pub evals: Vec<EvalRecord>,
}

impl MetricsLog {
    pub fn losses(&self) -> Vec<f64> {
        self.steps.iter().map(|&(_, l)| l).collect()
    }

    /// Two CSV sections: `step,loss` rows, then `split,accuracy,cross_entropy`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io_err = |e| Error::io(path.display().to_string(), e);
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        writeln!(f, "step,loss").map_err(io_err)?;
        for (step, loss) in &self.steps {
            writeln!(f, "{step},{loss}").map_err(io_err)?;
        }
        writeln!(f, "split,accuracy,cross_entropy").map_err(io_err)?;
        for e in &self.evals {
            writeln!(f, "{},{},{}", e.split, e.accuracy, e.cross_entropy).map_err(io_err)?;
        }
        f.flush().map_err(io_err)
    }
}

/// Mini-batch training: per epoch, a seeded shuffle, then per batch one
/// forward/backward/Adam/zero-grad cycle, logging every step.
pub fn train(
    model: &PairClassifier,
    train_data: &[EncodedPair],
    config: &TrainConfig,
) -> Result<MetricsLog> {
    config.validate()?;
    if train_data.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = model.params();
    let mut state = AdamState::new(&params);
    let mut log = MetricsLog::default();
    let mut indices: Vec<usize> = (0..train_data.len()).collect();
    let mut step = 0usize;
    for _epoch in 0..config.epochs {
        indices.shuffle(&mut rng);
        for batch in indices.chunks(config.batch_size) {
            let tape = Tape::new();
            let mut logit_rows = Vec::with_capacity(batch.len());
            let mut labels = Vec::with_capacity(batch.len());
            for &i in batch {
                let ex = &train_data[i];
                logit_rows.push(model.forward_pair(&tape, &ex.q1, &ex.q2, true, &mut rng)?);
                labels.push(ex.label as usize);
            }
            let logits = tape.concat(&logit_rows, 0)?;
            let loss = tape.cross_entropy_logits(&logits, &labels)?;
            let loss_val = loss.item();
            if loss_val.is_nan() {
                return Err(Error::Numeric(format!("NaN loss at step {}", step + 1)));
            }
            tape.backward(&loss)?;
            adam_step(&params, &mut state, config)?;
            model.zero_grad();
            step += 1;
            log.steps.push((step, loss_val));
        }
    }
    Ok(log)
}

/// Accuracy and mean cross-entropy with dropout off. Side-effect-free on
/// the model parameters.
pub fn evaluate(model: &PairClassifier, data: &[EncodedPair]) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::Usage("evaluate on empty data".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0); // unused: dropout is off in eval
    let mut correct = 0usize;
    let mut total_ce = 0.0;
    for ex in data {
        let tape = Tape::new();
        let logits = model.forward_pair(&tape, &ex.q1, &ex.q2, false, &mut rng)?;
        let (class, _) = predict(&logits)?;
        if class == ex.label as usize {
            correct += 1;
        }
        total_ce += tape
            .cross_entropy_logits(&logits, &[ex.label as usize])?
            .item();
    }
    Ok((
        correct as f64 / data.len() as f64,
        total_ce / data.len() as f64,
    ))
}

/// Trailing moving average; the first `window−1` entries average the
/// available prefix.
pub fn smooth_curve(losses: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 1 {
        return Err(Error::Config("smoothing window must be >= 1".into()));
    }
    Ok((0..losses.len())
        .map(|i| {
            let start = (i + 1).saturating_sub(window);
            let slice = &losses[start..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect())
}
