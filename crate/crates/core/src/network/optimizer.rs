//! Parameter update rules. Both optimizers walk the weight and bias
//! buffers of every piece in lock-step with same-shaped accumulators.

use crate::error::{Error, Result};

use super::{LayerParams, NetworkParams, OptimizerConfig, OptimizerState};

fn for_each_entry(
    layers: &mut [LayerParams],
    grads: &[LayerParams],
    acc: &mut [LayerParams],
    acc2: Option<&mut [LayerParams]>,
    mut apply: impl FnMut(&mut f64, f64, &mut f64, Option<&mut f64>),
) -> Result<()> {
    let mut acc2 = acc2;
    for (l, grad_layer) in grads.iter().enumerate() {
        for (p, grad_piece) in grad_layer.pieces.iter().enumerate() {
            let param_piece = &mut layers[l].pieces[p];
            let acc_piece = &mut acc[l].pieces[p];
            let weights = param_piece
                .weights
                .iter_mut()
                .chain(param_piece.bias.iter_mut());
            let grads_iter = grad_piece.weights.iter().chain(grad_piece.bias.iter());
            let acc_iter = acc_piece
                .weights
                .iter_mut()
                .chain(acc_piece.bias.iter_mut());
            match acc2.as_deref_mut() {
                None => {
                    for ((w, &g), a) in weights.zip(grads_iter).zip(acc_iter) {
                        if !g.is_finite() {
                            return Err(non_finite());
                        }
                        apply(w, g, a, None);
                    }
                }
                Some(second) => {
                    let acc2_piece = &mut second[l].pieces[p];
                    let acc2_iter = acc2_piece
                        .weights
                        .iter_mut()
                        .chain(acc2_piece.bias.iter_mut());
                    for (((w, &g), a), b) in weights.zip(grads_iter).zip(acc_iter).zip(acc2_iter) {
                        if !g.is_finite() {
                            return Err(non_finite());
                        }
                        apply(w, g, a, Some(b));
                    }
                }
            }
        }
    }
    Ok(())
}

fn non_finite() -> Error {
    // Callers in the training loop replace the epoch number.
    Error::TrainingDiverged {
        epoch: 0,
        reason: "non-finite gradient".into(),
    }
}

/// Applies one update step in place, per the spec's optimizer config.
pub fn optimizer_step(params: &mut NetworkParams, grads: &[LayerParams]) -> Result<()> {
    if grads.len() != params.layers.len() {
        return Err(Error::ShapeMismatch(
            "gradient shape does not match parameters".into(),
        ));
    }
    let config = params.spec.optimizer;
    // Split borrows: lift the optimizer state out while updating.
    let mut state = std::mem::replace(
        &mut params.optimizer_state,
        OptimizerState::Momentum { velocity: vec![] },
    );
    let result = match (&mut state, config) {
        (
            OptimizerState::Momentum { velocity },
            OptimizerConfig::MomentumSgd {
                learning_rate,
                momentum,
            },
        ) => for_each_entry(&mut params.layers, grads, velocity, None, |w, g, v, _| {
            *v = momentum * *v - learning_rate * g;
            *w += *v;
        }),
        (
            OptimizerState::Adaptive { grad_sq, update_sq },
            OptimizerConfig::Adaptive { rho, epsilon },
        ) => for_each_entry(
            &mut params.layers,
            grads,
            grad_sq,
            Some(update_sq),
            |w, g, v, u| {
                let u = u.expect("adaptive state has two accumulators");
                *v = rho * *v + (1.0 - rho) * g * g;
                let step = ((*u + epsilon) / (*v + epsilon)).sqrt() * g;
                *u = rho * *u + (1.0 - rho) * step * step;
                *w -= step;
            },
        ),
        _ => Err(Error::Config(
            "optimizer state does not match optimizer config".into(),
        )),
    };
    params.optimizer_state = state;
    result
}
