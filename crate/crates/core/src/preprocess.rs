//! Resizing and intensity normalization.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Sample};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide every intensity by 255. Split-independent.
    ScaleBy255,
    /// Map each pixel position's values across the dataset to `[0, 1]` via
    /// `(x - min) / (max - min)`; constant positions map to 0.
    PerAttributeMinMax,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub target_side: usize,
    pub normalization: Normalization,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            target_side: 100,
            normalization: Normalization::ScaleBy255,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_side == 0 {
            return Err(Error::InvalidDimension("target_side must be >= 1".into()));
        }
        Ok(())
    }
}

/// Bilinear resize with pixel-center alignment.
///
/// Output pixel centers are mapped back into the source grid via
/// `src = (dst + 0.5) * (in / out) - 0.5`, and the four surrounding source
/// pixels are blended. Outputs stay within the input's value range.
pub fn resize_image(
    pixels: &[f64],
    width: usize,
    height: usize,
    target_width: usize,
    target_height: usize,
) -> Result<Vec<f64>> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimension(
            "cannot resize a zero-area image".into(),
        ));
    }
    if pixels.len() != width * height {
        return Err(Error::ShapeMismatch(format!(
            "{} pixels for {}x{}",
            pixels.len(),
            width,
            height
        )));
    }
    if target_width == 0 || target_height == 0 {
        return Err(Error::InvalidDimension(
            "target dimensions must be positive".into(),
        ));
    }

    let scale_x = width as f64 / target_width as f64;
    let scale_y = height as f64 / target_height as f64;
    let mut out = Vec::with_capacity(target_width * target_height);
    for oy in 0..target_height {
        let sy = ((oy as f64 + 0.5) * scale_y - 0.5).max(0.0);
        let y0 = (sy.floor() as usize).min(height - 1);
        let y1 = (y0 + 1).min(height - 1);
        let ty = (sy - y0 as f64).clamp(0.0, 1.0);
        for ox in 0..target_width {
            let sx = ((ox as f64 + 0.5) * scale_x - 0.5).max(0.0);
            let x0 = (sx.floor() as usize).min(width - 1);
            let x1 = (x0 + 1).min(width - 1);
            let tx = (sx - x0 as f64).clamp(0.0, 1.0);

            let p00 = pixels[y0 * width + x0];
            let p10 = pixels[y0 * width + x1];
            let p01 = pixels[y1 * width + x0];
            let p11 = pixels[y1 * width + x1];
            let top = p00 * (1.0 - tx) + p10 * tx;
            let bottom = p01 * (1.0 - tx) + p11 * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    Ok(out)
}

/// Resizes a sample to `target_side` x `target_side`.
pub fn resize(sample: &Sample, target_side: usize) -> Result<Sample> {
    let pixels = resize_image(
        &sample.pixels,
        sample.width,
        sample.height,
        target_side,
        target_side,
    )?;
    Ok(Sample {
        pixels,
        width: target_side,
        height: target_side,
        ..sample.clone()
    })
}

/// Per-attribute min/max statistics, fit on a set of same-shaped samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxStats {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl MinMaxStats {
    /// Fits per-position min/max over `samples`. All samples must share
    /// dimensions.
    pub fn fit<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> Result<MinMaxStats> {
        let mut mins: Option<Vec<f64>> = None;
        let mut maxs: Option<Vec<f64>> = None;
        for sample in samples {
            match (&mut mins, &mut maxs) {
                (None, None) => {
                    mins = Some(sample.pixels.clone());
                    maxs = Some(sample.pixels.clone());
                }
                (Some(mins), Some(maxs)) => {
                    if sample.pixels.len() != mins.len() {
                        return Err(Error::ShapeMismatch(
                            "samples have mixed dimensions".into(),
                        ));
                    }
                    for (i, &p) in sample.pixels.iter().enumerate() {
                        if p < mins[i] {
                            mins[i] = p;
                        }
                        if p > maxs[i] {
                            maxs[i] = p;
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        match (mins, maxs) {
            (Some(mins), Some(maxs)) => Ok(MinMaxStats { mins, maxs }),
            _ => Err(Error::InsufficientData(
                "cannot fit min/max on an empty set".into(),
            )),
        }
    }

    /// Applies `(x - min) / (max - min)` per position; constant positions
    /// map to 0.
    pub fn apply(&self, sample: &Sample) -> Result<Sample> {
        if sample.pixels.len() != self.mins.len() {
            return Err(Error::ShapeMismatch(
                "sample does not match fitted dimensions".into(),
            ));
        }
        let pixels = sample
            .pixels
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let range = self.maxs[i] - self.mins[i];
                if range > 0.0 {
                    ((p - self.mins[i]) / range).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Sample {
            pixels,
            ..sample.clone()
        })
    }
}

/// Scales a sample's intensities by 1/255.
pub fn scale_by_255(sample: &Sample) -> Sample {
    Sample {
        pixels: sample.pixels.iter().map(|&p| p / 255.0).collect(),
        ..sample.clone()
    }
}

/// Normalizes a whole dataset per `config`. Requires uniform dimensions
/// (resize first).
pub fn normalize(dataset: &Dataset, config: &PreprocessConfig) -> Result<Dataset> {
    if let Some(first) = dataset.samples.first() {
        if dataset
            .samples
            .iter()
            .any(|s| s.width != first.width || s.height != first.height)
        {
            return Err(Error::ShapeMismatch(
                "normalize requires uniform sample dimensions".into(),
            ));
        }
    }
    let samples = match config.normalization {
        Normalization::ScaleBy255 => dataset.samples.iter().map(scale_by_255).collect(),
        Normalization::PerAttributeMinMax => {
            let stats = MinMaxStats::fit(&dataset.samples)?;
            dataset
                .samples
                .iter()
                .map(|s| stats.apply(s))
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(Dataset {
        samples,
        ..dataset.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ClassLabel;
    use proptest::prelude::*;

    fn sample(pixels: Vec<f64>, width: usize, height: usize) -> Sample {
        Sample {
            id: 0,
            pixels,
            width,
            height,
            class_label: ClassLabel::Healthy,
            cluster_label: None,
        }
    }

    #[test]
    fn resize_constant_image_stays_constant() {
        let s = sample(vec![7.0; 5 * 3], 5, 3);
        let r = resize(&s, 4).unwrap();
        assert_eq!(r.width, 4);
        assert_eq!(r.height, 4);
        for &p in &r.pixels {
            assert!((p - 7.0).abs() <= f64::EPSILON * 7.0);
        }
    }

    #[test]
    fn resize_identity_when_already_target() {
        let pixels: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let s = sample(pixels.clone(), 4, 4);
        let r = resize(&s, 4).unwrap();
        assert_eq!(r.pixels, pixels);
    }

    #[test]
    fn resize_halves_horizontal_ramp() {
        // 4x4 ramp v(x, y) = x. Output centers map to sx = 2*ox + 0.5, so
        // row values are lerp(0, 1, 0.5) = 0.5 and lerp(2, 3, 0.5) = 2.5.
        let mut pixels = Vec::new();
        for _y in 0..4 {
            for x in 0..4 {
                pixels.push(x as f64);
            }
        }
        let r = resize(&sample(pixels, 4, 4), 2).unwrap();
        assert_eq!(r.pixels, vec![0.5, 2.5, 0.5, 2.5]);
    }

    #[test]
    fn resize_rejects_zero_area() {
        let s = sample(vec![], 0, 0);
        assert!(matches!(resize(&s, 2), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn scale_by_255_divides() {
        let s = sample(vec![0.0, 255.0, 51.0], 3, 1);
        let n = scale_by_255(&s);
        assert_eq!(n.pixels, vec![0.0, 1.0, 0.2]);
    }

    #[test]
    fn minmax_maps_attribute_range_to_unit() {
        let samples = vec![
            sample(vec![2.0, 9.0], 2, 1),
            sample(vec![4.0, 9.0], 2, 1),
            sample(vec![6.0, 9.0], 2, 1),
        ];
        let stats = MinMaxStats::fit(&samples).unwrap();
        let first: Vec<f64> = samples
            .iter()
            .map(|s| stats.apply(s).unwrap().pixels[0])
            .collect();
        assert_eq!(first, vec![0.0, 0.5, 1.0]);
        // Constant attribute maps to 0 for every sample.
        for s in &samples {
            assert_eq!(stats.apply(s).unwrap().pixels[1], 0.0);
        }
    }

    #[test]
    fn normalize_rejects_mixed_dimensions() {
        let dataset = Dataset {
            samples: vec![sample(vec![1.0], 1, 1), sample(vec![1.0; 4], 2, 2)],
            num_clusters: None,
            provenance: crate::dataset::Provenance::Synthetic,
            generator_seed: None,
        };
        let cfg = PreprocessConfig::default();
        assert!(matches!(
            normalize(&dataset, &cfg),
            Err(Error::ShapeMismatch(_))
        ));
    }

    proptest! {
        // Outputs stay in [0, 1] and per-attribute value ordering survives.
        #[test]
        fn normalize_bounds_and_order(
            rows in prop::collection::vec(prop::collection::vec(0.0..255.0f64, 6), 2..8),
            minmax in prop::bool::ANY,
        ) {
            let samples: Vec<Sample> = rows.iter().map(|r| sample(r.clone(), 3, 2)).collect();
            let dataset = Dataset {
                samples,
                num_clusters: None,
                provenance: crate::dataset::Provenance::Synthetic,
                generator_seed: None,
            };
            let cfg = PreprocessConfig {
                target_side: 3,
                normalization: if minmax {
                    Normalization::PerAttributeMinMax
                } else {
                    Normalization::ScaleBy255
                },
            };
            let out = normalize(&dataset, &cfg).unwrap();
            for s in &out.samples {
                for &p in &s.pixels {
                    prop_assert!((0.0..=1.0).contains(&p));
                }
            }
            for attr in 0..6 {
                for a in 0..rows.len() {
                    for b in 0..rows.len() {
                        if rows[a][attr] < rows[b][attr] {
                            prop_assert!(
                                out.samples[a].pixels[attr] <= out.samples[b].pixels[attr]
                            );
                        }
                    }
                }
            }
        }

        // Resized intensities stay within the input's range.
        #[test]
        fn resize_stays_in_input_range(
            pixels in prop::collection::vec(0.0..255.0f64, 36),
            target in 1usize..10,
        ) {
            let out = resize_image(&pixels, 6, 6, target, target).unwrap();
            let min = pixels.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = pixels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for &p in &out {
                prop_assert!(p >= min - 1e-9 && p <= max + 1e-9);
            }
        }
    }
}
