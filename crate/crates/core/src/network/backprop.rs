//! Forward evaluation with a backprop trace, and exact gradients of the
//! regularized cross-entropy loss.

use crate::error::{Error, Result};

use super::math::{cross_entropy_binary, cross_entropy_multi, maxout_forward, sigmoid, softmax};
use super::{zeros_like, Activation, LayerParams, NetworkParams};

/// Everything `backward` needs to reproduce the forward pass exactly:
/// per-layer post-activation outputs (index 0 is the input) and the winning
/// piece per unit for maxout layers.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub activations: Vec<Vec<f64>>,
    pub winners: Vec<Option<Vec<usize>>>,
}

/// Runs the network, recording the trace.
pub fn forward(params: &NetworkParams, input: &[f64]) -> Result<(Vec<f64>, ForwardTrace)> {
    if input.len() != params.spec.input_width() {
        return Err(Error::ShapeMismatch(format!(
            "input width {} for network expecting {}",
            input.len(),
            params.spec.input_width()
        )));
    }
    let mut activations = vec![input.to_vec()];
    let mut winners = Vec::with_capacity(params.layers.len());
    for (layer, spec) in params.layers.iter().zip(&params.spec.layers) {
        let x = activations.last().unwrap();
        let (out, won) = match spec.activation {
            Activation::Maxout { .. } => {
                let (out, won) = maxout_forward(x, &layer.pieces)?;
                (out, Some(won))
            }
            Activation::Sigmoid => {
                let out = layer.pieces[0].apply(x);
                (out.into_iter().map(sigmoid).collect(), None)
            }
            Activation::Softmax => (softmax(&layer.pieces[0].apply(x)), None),
            Activation::Linear => (layer.pieces[0].apply(x), None),
        };
        activations.push(out);
        winners.push(won);
    }
    Ok((
        activations.last().unwrap().clone(),
        ForwardTrace {
            activations,
            winners,
        },
    ))
}

/// Cross-entropy of the network output against `target` (no penalties).
pub fn data_loss(params: &NetworkParams, input: &[f64], target: &[f64]) -> Result<f64> {
    let (output, _) = forward(params, input)?;
    match params.spec.layers.last().unwrap().activation {
        Activation::Sigmoid => {
            if target.len() != 1 {
                return Err(Error::ShapeMismatch(
                    "sigmoid head expects a single target".into(),
                ));
            }
            cross_entropy_binary(output[0], target[0])
        }
        Activation::Softmax => cross_entropy_multi(&output, target),
        _ => Err(Error::Config(
            "loss needs a sigmoid or softmax head".into(),
        )),
    }
}

/// The quantity `backward` differentiates: cross-entropy plus
/// `l1 * sum|w| + l2/2 * sum w^2` over weights (biases are not penalized).
pub fn total_loss(params: &NetworkParams, input: &[f64], target: &[f64]) -> Result<f64> {
    let mut loss = data_loss(params, input, target)?;
    let (l1, l2) = (params.spec.l1, params.spec.l2);
    if l1 > 0.0 || l2 > 0.0 {
        for layer in &params.layers {
            for piece in &layer.pieces {
                for &w in &piece.weights {
                    loss += l1 * w.abs() + 0.5 * l2 * w * w;
                }
            }
        }
    }
    Ok(loss)
}

/// Exact gradient of [`total_loss`] with respect to every weight and bias.
///
/// The head delta for cross-entropy against a sigmoid or softmax output is
/// `p - y`. Maxout routes gradient only through the piece recorded in the
/// trace; the L1 subgradient at exactly zero is taken as zero.
pub fn backward(
    params: &NetworkParams,
    trace: &ForwardTrace,
    target: &[f64],
) -> Result<Vec<LayerParams>> {
    let depth = params.layers.len();
    if trace.activations.len() != depth + 1 || trace.winners.len() != depth {
        return Err(Error::ShapeMismatch(
            "trace does not match network depth".into(),
        ));
    }
    let output = &trace.activations[depth];
    let head = params.spec.layers[depth - 1].activation;
    if target.len() != output.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} targets for {} outputs",
            target.len(),
            output.len()
        )));
    }
    // Delta with respect to the head pre-activation.
    let mut delta: Vec<f64> = match head {
        Activation::Sigmoid | Activation::Softmax => {
            output.iter().zip(target).map(|(p, y)| p - y).collect()
        }
        _ => {
            return Err(Error::Config(
                "loss needs a sigmoid or softmax head".into(),
            ))
        }
    };

    let mut grads = zeros_like(&params.spec);
    for l in (0..depth).rev() {
        let spec = &params.spec.layers[l];
        let layer = &params.layers[l];
        let prev = &trace.activations[l];
        if prev.len() != spec.inputs {
            return Err(Error::ShapeMismatch("stale trace".into()));
        }

        // For hidden layers, `delta` arrives as the gradient with respect
        // to this layer's output; convert it to pre-activation space.
        // (The head's delta was already pre-activation.)
        if l != depth - 1 {
            match spec.activation {
                Activation::Sigmoid => {
                    let a = &trace.activations[l + 1];
                    for (d, &ai) in delta.iter_mut().zip(a) {
                        *d *= ai * (1.0 - ai);
                    }
                }
                // Maxout and linear pass gradients through unchanged; the
                // winner does the routing below.
                Activation::Maxout { .. } | Activation::Linear => {}
                Activation::Softmax => {
                    return Err(Error::Config(
                        "softmax is only supported as the output layer".into(),
                    ))
                }
            }
        }

        let winners = trace.winners[l].as_deref();
        let mut input_grad = vec![0.0; spec.inputs];
        for (j, &d) in delta.iter().enumerate() {
            let piece_index = winners.map(|w| w[j]).unwrap_or(0);
            let grad_piece = &mut grads[l].pieces[piece_index];
            let row = &mut grad_piece.weights[j * spec.inputs..(j + 1) * spec.inputs];
            for (g, &x) in row.iter_mut().zip(prev) {
                *g += d * x;
            }
            grad_piece.bias[j] += d;
            let weights = &layer.pieces[piece_index].weights[j * spec.inputs..(j + 1) * spec.inputs];
            for (gi, &w) in input_grad.iter_mut().zip(weights) {
                *gi += d * w;
            }
        }
        delta = input_grad;
    }

    let (l1, l2) = (params.spec.l1, params.spec.l2);
    if l1 > 0.0 || l2 > 0.0 {
        for (grad_layer, layer) in grads.iter_mut().zip(&params.layers) {
            for (grad_piece, piece) in grad_layer.pieces.iter_mut().zip(&layer.pieces) {
                for (g, &w) in grad_piece.weights.iter_mut().zip(&piece.weights) {
                    *g += l1 * signum_or_zero(w) + l2 * w;
                }
            }
        }
    }
    Ok(grads)
}

fn signum_or_zero(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w < 0.0 {
        -1.0
    } else {
        0.0
    }
}
