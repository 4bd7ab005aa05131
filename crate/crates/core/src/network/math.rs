//! Activation and loss primitives.

use crate::error::{Error, Result};

/// Probabilities are clamped to `[CLAMP, 1 - CLAMP]` before logs so losses
/// stay finite.
pub const PROBABILITY_CLAMP: f64 = 1e-12;

/// Logistic function, stable for `|s|` up to the f64 exponent range: the
/// exponential is only ever taken of a non-positive argument.
pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Softmax with max-shift for overflow safety. Outputs sum to 1.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)
}

/// Binary cross-entropy `-y ln p - (1 - y) ln(1 - p)` for a scalar
/// probability and a 0/1 target.
pub fn cross_entropy_binary(predicted: f64, target: f64) -> Result<f64> {
    if target != 0.0 && target != 1.0 {
        return Err(Error::Domain(format!(
            "binary cross-entropy target must be 0 or 1, got {target}"
        )));
    }
    let p = clamp_probability(predicted);
    Ok(-target * p.ln() - (1.0 - target) * (1.0 - p).ln())
}

/// Multiclass cross-entropy `-sum_i y_i ln p_i` for a one-hot target.
pub fn cross_entropy_multi(predicted: &[f64], target: &[f64]) -> Result<f64> {
    if predicted.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} probabilities for {} targets",
            predicted.len(),
            target.len()
        )));
    }
    let ones = target.iter().filter(|&&y| y == 1.0).count();
    if ones != 1 || target.iter().any(|&y| y != 0.0 && y != 1.0) {
        return Err(Error::Domain("target must be one-hot".into()));
    }
    Ok(predicted
        .iter()
        .zip(target)
        .map(|(&p, &y)| -y * clamp_probability(p).ln())
        .sum())
}

/// Affine response map: `outputs x inputs` row-major weights plus bias.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Affine {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Affine {
    pub fn zeros(inputs: usize, outputs: usize) -> Affine {
        Affine {
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn outputs(&self) -> usize {
        self.bias.len()
    }

    pub fn inputs(&self) -> usize {
        if self.bias.is_empty() {
            0
        } else {
            self.weights.len() / self.bias.len()
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let inputs = self.inputs();
        self.bias
            .iter()
            .enumerate()
            .map(|(j, &b)| {
                let row = &self.weights[j * inputs..(j + 1) * inputs];
                b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>()
            })
            .collect()
    }
}

/// Element-wise maximum over the pieces' affine responses. Returns the
/// outputs and the winning piece per unit; ties go to the lowest piece
/// index, which is where the gradient routes.
pub fn maxout_forward(x: &[f64], pieces: &[Affine]) -> Result<(Vec<f64>, Vec<usize>)> {
    if pieces.len() < 2 {
        return Err(Error::Config("maxout needs at least 2 pieces".into()));
    }
    let outputs = pieces[0].outputs();
    let inputs = pieces[0].inputs();
    if pieces
        .iter()
        .any(|p| p.outputs() != outputs || p.inputs() != inputs)
    {
        return Err(Error::ShapeMismatch(
            "maxout pieces must share a shape".into(),
        ));
    }
    if x.len() != inputs {
        return Err(Error::ShapeMismatch(format!(
            "input width {} for piece width {inputs}",
            x.len()
        )));
    }
    let mut best = pieces[0].apply(x);
    let mut winners = vec![0usize; outputs];
    for (piece_index, piece) in pieces.iter().enumerate().skip(1) {
        let response = piece.apply(x);
        for (j, &r) in response.iter().enumerate() {
            if r > best[j] {
                best[j] = r;
                winners[j] = piece_index;
            }
        }
    }
    Ok((best, winners))
}

/// Argmax with lowest-index tie-breaking.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_midpoint_and_saturation() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(40.0) - 1.0).abs() < 1e-15);
        assert!(sigmoid(-40.0) < 1e-15);
        // No overflow deep into the tails.
        assert_eq!(sigmoid(700.0), 1.0);
        let tail = sigmoid(-700.0);
        assert!(tail > 0.0 && tail < 1e-300 && tail.is_finite());
    }

    #[test]
    fn sigmoid_complement_identity() {
        for s in [-5.0, -1.3, 0.0, 0.4, 2.2, 9.0] {
            assert!((sigmoid(s) + sigmoid(-s) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_uniform_on_equal_logits() {
        for c in [2usize, 3, 7] {
            let p = softmax(&vec![0.0; c]);
            for &v in &p {
                assert!((v - 1.0 / c as f64).abs() < 1e-15);
            }
        }
        // Shift invariance with large logits.
        let p = softmax(&[1000.0, 1001.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_hand_values() {
        assert!(cross_entropy_binary(1.0, 1.0).unwrap() <= 1e-11);
        assert!((cross_entropy_binary(0.5, 1.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        let ce = cross_entropy_multi(&[0.2, 0.5, 0.3], &[0.0, 1.0, 0.0]).unwrap();
        assert!((ce - 0.5f64.ln().abs()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_rejects_bad_targets() {
        assert!(matches!(
            cross_entropy_binary(0.5, 0.7),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            cross_entropy_multi(&[0.5, 0.5], &[1.0, 1.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            cross_entropy_multi(&[0.5, 0.5], &[0.3, 0.7]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn maxout_computes_absolute_value() {
        // Pieces g1(x) = x and g2(x) = -x.
        let pieces = vec![
            Affine { weights: vec![1.0], bias: vec![0.0] },
            Affine { weights: vec![-1.0], bias: vec![0.0] },
        ];
        let (out, winners) = maxout_forward(&[3.0], &pieces).unwrap();
        assert_eq!((out[0], winners[0]), (3.0, 0));
        let (out, winners) = maxout_forward(&[-3.0], &pieces).unwrap();
        assert_eq!((out[0], winners[0]), (3.0, 1));
    }

    #[test]
    fn maxout_two_feature_hand_case() {
        // g1 = 1 + 2 x1 + 0 x2, g2 = 0 + 0 x1 + 1 x2 at x = (1, 4).
        let pieces = vec![
            Affine { weights: vec![2.0, 0.0], bias: vec![1.0] },
            Affine { weights: vec![0.0, 1.0], bias: vec![0.0] },
        ];
        let (out, winners) = maxout_forward(&[1.0, 4.0], &pieces).unwrap();
        assert_eq!(out[0], 4.0);
        assert_eq!(winners[0], 1);
    }

    #[test]
    fn maxout_ties_pick_lowest_piece() {
        let piece = Affine { weights: vec![1.5], bias: vec![0.25] };
        let pieces = vec![piece.clone(), piece.clone()];
        let (out, winners) = maxout_forward(&[2.0], &pieces).unwrap();
        assert_eq!(out[0], piece.apply(&[2.0])[0]);
        assert_eq!(winners[0], 0);
    }

    #[test]
    fn maxout_rejects_mismatched_pieces() {
        let pieces = vec![
            Affine::zeros(2, 1),
            Affine::zeros(3, 1),
        ];
        assert!(maxout_forward(&[0.0, 0.0], &pieces).is_err());
        assert!(maxout_forward(&[1.0], &[Affine::zeros(1, 1)]).is_err());
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.3, 0.3, 0.4]), 2);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }
}
