//! The training loop: seeded initialization, seeded shuffling, batched
//! gradient steps, per-epoch loss history.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::backprop::{backward, data_loss, forward};
use super::optimizer::optimizer_step;
use super::{zeros_like, BatchSize, NetworkParams, NetworkSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingExample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingHistory {
    /// Mean cross-entropy over the training set after each epoch.
    pub train_loss: Vec<f64>,
    /// Mean cross-entropy over the validation set after each epoch; `None`
    /// when the validation set is empty. Recorded only; nothing acts on it.
    pub validation_loss: Vec<Option<f64>>,
}

fn mean_loss(params: &NetworkParams, set: &[TrainingExample]) -> Result<Option<f64>> {
    if set.is_empty() {
        return Ok(None);
    }
    let mut total = 0.0;
    for example in set {
        total += data_loss(params, &example.input, &example.target)?;
    }
    Ok(Some(total / set.len() as f64))
}

/// Trains a fresh network per `spec`. The whole trajectory (initialization,
/// shuffling, updates) is a deterministic function of the spec and data.
/// Returns the final-epoch parameters; there is no early stopping.
pub fn train(
    spec: &NetworkSpec,
    train_set: &[TrainingExample],
    validation_set: &[TrainingExample],
) -> Result<(NetworkParams, TrainingHistory)> {
    spec.validate()?;
    if train_set.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    let (in_width, out_width) = (spec.input_width(), spec.output_width());
    for example in train_set.iter().chain(validation_set) {
        if example.input.len() != in_width || example.target.len() != out_width {
            return Err(Error::ShapeMismatch(format!(
                "example shaped {}/{} for network {}/{}",
                example.input.len(),
                example.target.len(),
                in_width,
                out_width
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut params = NetworkParams::init_with(spec, &mut rng)?;
    let mut history = TrainingHistory::default();

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=spec.epochs {
        if spec.shuffle {
            order.shuffle(&mut rng);
        }
        let batch_len = match spec.batch_size {
            BatchSize::Full => train_set.len(),
            BatchSize::Fixed(b) => b.min(train_set.len()),
        };
        for batch in order.chunks(batch_len) {
            let step_result = if batch.len() == 1 {
                let example = &train_set[batch[0]];
                let (_, trace) = forward(&params, &example.input)?;
                let grads = backward(&params, &trace, &example.target)?;
                optimizer_step(&mut params, &grads)
            } else {
                let mut grads = zeros_like(spec);
                for &idx in batch {
                    let example = &train_set[idx];
                    let (_, trace) = forward(&params, &example.input)?;
                    let sample_grads = backward(&params, &trace, &example.target)?;
                    for (acc, g) in grads.iter_mut().zip(&sample_grads) {
                        for (acc_piece, g_piece) in acc.pieces.iter_mut().zip(&g.pieces) {
                            for (a, b) in acc_piece
                                .weights
                                .iter_mut()
                                .chain(acc_piece.bias.iter_mut())
                                .zip(g_piece.weights.iter().chain(g_piece.bias.iter()))
                            {
                                *a += b;
                            }
                        }
                    }
                }
                let scale = 1.0 / batch.len() as f64;
                for layer in &mut grads {
                    for piece in &mut layer.pieces {
                        for g in piece.weights.iter_mut().chain(piece.bias.iter_mut()) {
                            *g *= scale;
                        }
                    }
                }
                optimizer_step(&mut params, &grads)
            };
            step_result.map_err(|e| match e {
                Error::TrainingDiverged { reason, .. } => {
                    Error::TrainingDiverged { epoch, reason }
                }
                other => other,
            })?;
        }

        let train_loss = mean_loss(&params, train_set)?.expect("non-empty train set");
        if !train_loss.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                reason: format!("training loss became {train_loss}"),
            });
        }
        history.train_loss.push(train_loss);
        history.validation_loss.push(mean_loss(&params, validation_set)?);
    }

    Ok((params, history))
}
