//! Feed-forward network core: maxout / sigmoid / softmax layers,
//! cross-entropy loss, backpropagation, and two optimizers (momentum SGD
//! and a per-weight adaptive rule driven by decayed squared-gradient and
//! squared-update averages).

pub mod backprop;
pub mod math;
pub mod optimizer;
mod train;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use backprop::{backward, data_loss, forward, total_loss, ForwardTrace};
pub use math::{
    argmax, cross_entropy_binary, cross_entropy_multi, maxout_forward, sigmoid, softmax, Affine,
};
pub use optimizer::optimizer_step;
pub use train::{train, TrainingExample, TrainingHistory};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Maxout { pieces: usize },
    Sigmoid,
    Softmax,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(inputs: usize, outputs: usize, activation: Activation) -> LayerSpec {
        LayerSpec {
            inputs,
            outputs,
            activation,
        }
    }

    fn pieces(&self) -> usize {
        match self.activation {
            Activation::Maxout { pieces } => pieces,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerConfig {
    /// `v <- momentum * v - learning_rate * g; w <- w + v`.
    MomentumSgd { learning_rate: f64, momentum: f64 },
    /// Per-weight adaptive steps with no global learning rate:
    /// `v <- rho v + (1 - rho) g^2`,
    /// `step = sqrt(u + eps) / sqrt(v + eps) * g`,
    /// `u <- rho u + (1 - rho) step^2`, `w <- w - step`.
    Adaptive { rho: f64, epsilon: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchSize {
    /// One gradient step per epoch over the whole training set.
    #[default]
    Full,
    Fixed(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
    pub loss: LossKind,
    pub l1: f64,
    pub l2: f64,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub batch_size: BatchSize,
    pub shuffle: bool,
    pub seed: u64,
}

impl NetworkSpec {
    /// Shallow baseline: two sigmoid hidden layers of 50 units, sigmoid
    /// head, momentum SGD (0.2) at learning rate 0.01, 20 training cycles,
    /// shuffled per-image updates.
    pub fn nn_default(input_width: usize, seed: u64) -> NetworkSpec {
        NetworkSpec {
            layers: vec![
                LayerSpec::new(input_width, 50, Activation::Sigmoid),
                LayerSpec::new(50, 50, Activation::Sigmoid),
                LayerSpec::new(50, 1, Activation::Sigmoid),
            ],
            loss: LossKind::CrossEntropy,
            l1: 0.0,
            l2: 0.0,
            optimizer: OptimizerConfig::MomentumSgd {
                learning_rate: 0.01,
                momentum: 0.2,
            },
            epochs: 20,
            batch_size: BatchSize::Fixed(1),
            shuffle: true,
            seed,
        }
    }

    /// Deep configuration: six maxout hidden layers (2 pieces each) of
    /// widths 50-40-30-20-15-10, adaptive optimizer (rho 0.99, epsilon
    /// 1e-8), L1 1e-5, 50 epochs, shuffled per-image updates. The head is
    /// sigmoid for `output_width == 1` and softmax otherwise.
    pub fn dnn_default(input_width: usize, output_width: usize, seed: u64) -> NetworkSpec {
        let hidden = [50usize, 40, 30, 20, 15, 10];
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut width = input_width;
        for &h in &hidden {
            layers.push(LayerSpec::new(width, h, Activation::Maxout { pieces: 2 }));
            width = h;
        }
        let head = if output_width == 1 {
            Activation::Sigmoid
        } else {
            Activation::Softmax
        };
        layers.push(LayerSpec::new(width, output_width, head));
        NetworkSpec {
            layers,
            loss: LossKind::CrossEntropy,
            l1: 1.0e-5,
            l2: 0.0,
            optimizer: OptimizerConfig::Adaptive {
                rho: 0.99,
                epsilon: 1.0e-8,
            },
            epochs: 50,
            batch_size: BatchSize::Fixed(1),
            shuffle: true,
            seed,
        }
    }

    pub fn input_width(&self) -> usize {
        self.layers.first().map(|l| l.inputs).unwrap_or(0)
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for pair in self.layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::ShapeMismatch(format!(
                    "layer widths do not chain: {} -> {}",
                    pair[0].outputs, pair[1].inputs
                )));
            }
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.inputs == 0 || layer.outputs == 0 {
                return Err(Error::InvalidDimension(format!(
                    "layer {i} has a zero width"
                )));
            }
            match layer.activation {
                Activation::Maxout { pieces } if pieces < 2 => {
                    return Err(Error::Config(format!(
                        "layer {i}: maxout needs at least 2 pieces"
                    )));
                }
                Activation::Softmax if i + 1 != self.layers.len() => {
                    return Err(Error::Config(
                        "softmax is only supported as the output layer".into(),
                    ));
                }
                _ => {}
            }
        }
        let head = self.layers.last().unwrap();
        match head.activation {
            Activation::Sigmoid if head.outputs == 1 => {}
            Activation::Softmax if head.outputs >= 2 => {}
            _ => {
                return Err(Error::Config(
                    "output layer must be sigmoid with 1 unit or softmax with >= 2 units".into(),
                ));
            }
        }
        match self.optimizer {
            OptimizerConfig::MomentumSgd {
                learning_rate,
                momentum,
            } => {
                if learning_rate <= 0.0 || !(0.0..1.0).contains(&momentum) {
                    return Err(Error::Config(
                        "momentum SGD needs learning_rate > 0 and momentum in [0, 1)".into(),
                    ));
                }
            }
            OptimizerConfig::Adaptive { rho, epsilon } => {
                if !(0.0 < rho && rho < 1.0) || epsilon <= 0.0 {
                    return Err(Error::Config(
                        "adaptive optimizer needs rho in (0, 1) and epsilon > 0".into(),
                    ));
                }
            }
        }
        if self.l1 < 0.0 || self.l2 < 0.0 {
            return Err(Error::Config("regularization strengths must be >= 0".into()));
        }
        if matches!(self.batch_size, BatchSize::Fixed(0)) {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-layer parameter bundle: one affine map per piece (non-maxout layers
/// hold exactly one). The same shape carries gradients and optimizer
/// accumulators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub pieces: Vec<Affine>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerState {
    Momentum { velocity: Vec<LayerParams> },
    Adaptive {
        grad_sq: Vec<LayerParams>,
        update_sq: Vec<LayerParams>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub spec: NetworkSpec,
    pub layers: Vec<LayerParams>,
    pub optimizer_state: OptimizerState,
}

pub(crate) fn zeros_like(spec: &NetworkSpec) -> Vec<LayerParams> {
    spec.layers
        .iter()
        .map(|layer| LayerParams {
            pieces: (0..layer.pieces())
                .map(|_| Affine::zeros(layer.inputs, layer.outputs))
                .collect(),
        })
        .collect()
}

impl NetworkParams {
    /// Seeded initialization: weights uniform in `±1/sqrt(fan_in)`, biases
    /// zero, optimizer accumulators zero.
    pub fn init(spec: &NetworkSpec) -> Result<NetworkParams> {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        NetworkParams::init_with(spec, &mut rng)
    }

    pub(crate) fn init_with(spec: &NetworkSpec, rng: &mut ChaCha8Rng) -> Result<NetworkParams> {
        spec.validate()?;
        let layers = spec
            .layers
            .iter()
            .map(|layer| {
                let bound = 1.0 / (layer.inputs as f64).sqrt();
                LayerParams {
                    pieces: (0..layer.pieces())
                        .map(|_| Affine {
                            weights: (0..layer.inputs * layer.outputs)
                                .map(|_| rng.gen_range(-bound..bound))
                                .collect(),
                            bias: vec![0.0; layer.outputs],
                        })
                        .collect(),
                }
            })
            .collect();
        let optimizer_state = match spec.optimizer {
            OptimizerConfig::MomentumSgd { .. } => OptimizerState::Momentum {
                velocity: zeros_like(spec),
            },
            OptimizerConfig::Adaptive { .. } => OptimizerState::Adaptive {
                grad_sq: zeros_like(spec),
                update_sq: zeros_like(spec),
            },
        };
        Ok(NetworkParams {
            spec: spec.clone(),
            layers,
            optimizer_state,
        })
    }

    /// Versioned JSON serialization; `serde_json` renders every f64 with a
    /// shortest round-trip representation, so reloading reproduces
    /// predictions bit-exactly.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<NetworkParams> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Runs the network and derives the hard label: threshold 0.5 for a sigmoid
/// head (scores at exactly 0.5 classify positive), argmax with lowest-index
/// tie-break for softmax.
pub fn predict(params: &NetworkParams, input: &[f64]) -> Result<(Vec<f64>, usize)> {
    let (output, _) = forward(params, input)?;
    let head = params.spec.layers.last().unwrap().activation;
    let label = match head {
        Activation::Sigmoid => usize::from(output[0] >= 0.5),
        Activation::Softmax => argmax(&output),
        _ => {
            return Err(Error::Config(
                "prediction needs a sigmoid or softmax head".into(),
            ))
        }
    };
    Ok((output, label))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation_catches_bad_shapes() {
        let mut spec = NetworkSpec::nn_default(4, 0);
        spec.layers[1].inputs = 7;
        assert!(spec.validate().is_err());

        let mut spec = NetworkSpec::nn_default(4, 0);
        spec.layers.last_mut().unwrap().outputs = 2;
        assert!(spec.validate().is_err());

        let mut spec = NetworkSpec::dnn_default(4, 1, 0);
        spec.layers[0].activation = Activation::Maxout { pieces: 1 };
        assert!(spec.validate().is_err());

        assert!(NetworkSpec::nn_default(4, 0).validate().is_ok());
        assert!(NetworkSpec::dnn_default(4, 10, 0).validate().is_ok());
    }

    #[test]
    fn init_is_seeded_and_fan_in_scaled() {
        let spec = NetworkSpec::dnn_default(9, 1, 11);
        let a = NetworkParams::init(&spec).unwrap();
        let b = NetworkParams::init(&spec).unwrap();
        assert_eq!(a, b);
        let bound = 1.0 / 3.0;
        for piece in &a.layers[0].pieces {
            assert!(piece.weights.iter().all(|w| w.abs() < bound));
            assert!(piece.bias.iter().all(|&b| b == 0.0));
        }
        let other = NetworkParams::init(&NetworkSpec {
            seed: 12,
            ..spec
        })
        .unwrap();
        assert_ne!(a.layers, other.layers);
    }

    #[test]
    fn predict_thresholds_and_tie_breaks() {
        // Zero weights, sigmoid head: output exactly 0.5 -> label 1.
        let spec = NetworkSpec {
            layers: vec![LayerSpec::new(2, 1, Activation::Sigmoid)],
            ..NetworkSpec::nn_default(2, 0)
        };
        let mut params = NetworkParams::init(&spec).unwrap();
        for piece in &mut params.layers[0].pieces {
            piece.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        let (score, label) = predict(&params, &[3.0, -1.0]).unwrap();
        assert_eq!(score[0], 0.5);
        assert_eq!(label, 1);

        // Softmax head: argmax, lowest index on ties.
        let spec = NetworkSpec {
            layers: vec![LayerSpec::new(1, 3, Activation::Softmax)],
            ..NetworkSpec::dnn_default(1, 3, 0)
        };
        let mut params = NetworkParams::init(&spec).unwrap();
        params.layers[0].pieces[0].weights.copy_from_slice(&[0.0, 0.0, 0.0]);
        params.layers[0].pieces[0].bias.copy_from_slice(&[0.1, 0.1, 0.7]);
        let (scores, label) = predict(&params, &[0.0]).unwrap();
        assert_eq!(label, 2);
        assert!((scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        params.layers[0].pieces[0].bias.copy_from_slice(&[0.5, 0.5, 0.0]);
        let (_, label) = predict(&params, &[0.0]).unwrap();
        assert_eq!(label, 0);
    }

    #[test]
    fn params_roundtrip_bit_exact_through_json() {
        let spec = NetworkSpec::dnn_default(5, 3, 77);
        let params = NetworkParams::init(&spec).unwrap();
        let back = NetworkParams::from_json(&params.to_json().unwrap()).unwrap();
        assert_eq!(params, back);
        let x = [0.3, -0.7, 0.11, 0.9, -0.2];
        let (p1, l1) = predict(&params, &x).unwrap();
        let (p2, l2) = predict(&back, &x).unwrap();
        assert_eq!(l1, l2);
        for (a, b) in p1.iter().zip(&p2) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
