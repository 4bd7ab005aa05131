//! Confusion-matrix construction and binary evaluation criteria.
//!
//! The report computes accuracy, precision (PPV), sensitivity, specificity,
//! F1, and the complement rates FPR = 1 - SPC and FNR = 1 - SEN, plus ROC
//! AUC. Criteria with a zero denominator are reported as explicitly
//! undefined rather than silently zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

impl ConfusionMatrix {
    pub fn new(tp: usize, fp: usize, tn: usize, fn_count: usize) -> ConfusionMatrix {
        ConfusionMatrix {
            true_positives: tp,
            false_positives: fp,
            true_negatives: tn,
            false_negatives: fn_count,
        }
    }

    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }

    /// Element-wise sum, used for pooling folds.
    pub fn add(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            true_positives: self.true_positives + other.true_positives,
            false_positives: self.false_positives + other.false_positives,
            true_negatives: self.true_negatives + other.true_negatives,
            false_negatives: self.false_negatives + other.false_negatives,
        }
    }
}

/// Counts prediction outcomes against ground truth, with `positive` naming
/// the positive class.
pub fn confusion<L: PartialEq>(
    predicted: &[L],
    actual: &[L],
    positive: &L,
) -> Result<ConfusionMatrix> {
    if predicted.len() != actual.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (p, a) in predicted.iter().zip(actual) {
        match (p == positive, a == positive) {
            (true, true) => cm.true_positives += 1,
            (true, false) => cm.false_positives += 1,
            (false, false) => cm.true_negatives += 1,
            (false, true) => cm.false_negatives += 1,
        }
    }
    Ok(cm)
}

/// A criterion value, or an explicit statement of why it is undefined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricValue {
    Defined(f64),
    Undefined { undefined: String },
}

impl MetricValue {
    pub fn undefined(cause: &str) -> MetricValue {
        MetricValue::Undefined {
            undefined: cause.to_string(),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            MetricValue::Defined(v) => Some(*v),
            MetricValue::Undefined { .. } => None,
        }
    }

    /// Value scaled to percent, when defined.
    pub fn percent(&self) -> Option<f64> {
        self.value().map(|v| v * 100.0)
    }

    fn ratio(numerator: usize, denominator: usize, cause: &str) -> MetricValue {
        if denominator == 0 {
            MetricValue::undefined(cause)
        } else {
            MetricValue::Defined(numerator as f64 / denominator as f64)
        }
    }

    fn complement(&self) -> MetricValue {
        match self {
            MetricValue::Defined(v) => MetricValue::Defined(1.0 - v),
            MetricValue::Undefined { undefined } => MetricValue::Undefined {
                undefined: undefined.clone(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cm: ConfusionMatrix,
    pub acc: MetricValue,
    pub ppv: MetricValue,
    pub sen: MetricValue,
    pub spc: MetricValue,
    pub f1: MetricValue,
    /// False positive rate, exactly `1 - spc`.
    pub fpr: MetricValue,
    /// False negative rate, exactly `1 - sen`.
    pub fnr: MetricValue,
    /// FPR scaled to percent, for reports that quote rates out of 100.
    pub fpr_percent: MetricValue,
    /// FNR scaled to percent.
    pub fnr_percent: MetricValue,
    pub auc: MetricValue,
}

/// Derives every criterion from a confusion matrix. AUC is not computable
/// from counts alone and starts out undefined; attach it with
/// [`MetricsReport::with_auc`].
pub fn report(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    if cm.total() == 0 {
        return Err(Error::InsufficientData(
            "confusion matrix has no samples".into(),
        ));
    }
    let tp = cm.true_positives;
    let fp = cm.false_positives;
    let tn = cm.true_negatives;
    let fn_count = cm.false_negatives;

    let acc = MetricValue::ratio(tp + tn, cm.total(), "");
    let ppv = MetricValue::ratio(tp, tp + fp, "no positive predictions (tp + fp = 0)");
    let sen = MetricValue::ratio(tp, tp + fn_count, "no positive samples (tp + fn = 0)");
    let spc = MetricValue::ratio(tn, tn + fp, "no negative samples (tn + fp = 0)");
    let f1 = MetricValue::ratio(
        2 * tp,
        2 * tp + fp + fn_count,
        "no positive samples or predictions (2tp + fp + fn = 0)",
    );
    let fpr = spc.complement();
    let fnr = sen.complement();
    let scale = |m: &MetricValue| match m {
        MetricValue::Defined(v) => MetricValue::Defined(v * 100.0),
        undef => undef.clone(),
    };

    Ok(MetricsReport {
        cm: *cm,
        acc,
        ppv,
        sen,
        spc,
        f1,
        fpr_percent: scale(&fpr),
        fnr_percent: scale(&fnr),
        fpr,
        fnr,
        auc: MetricValue::undefined("not computed"),
    })
}

impl MetricsReport {
    pub fn with_auc(mut self, auc: MetricValue) -> MetricsReport {
        self.auc = auc;
        self
    }

    /// The eight criterion columns in report order (ACC, PPV, SEN, SPC,
    /// F1-Score, FPR, FNR, AUC), scaled to percent; undefined values render
    /// as `NA`.
    pub fn csv_fields(&self) -> String {
        [
            &self.acc, &self.ppv, &self.sen, &self.spc, &self.f1, &self.fpr, &self.fnr, &self.auc,
        ]
        .iter()
        .map(|m| match m.percent() {
            Some(v) => format!("{v}"),
            None => "NA".to_string(),
        })
        .collect::<Vec<_>>()
        .join(",")
    }
}

/// One point on the ROC curve. `threshold` is the lowest score still
/// classified positive at this point; the `(0, 0)` endpoint carries
/// `+inf`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Computes AUC by the rank/concordance formulation (probability that a
/// random positive outscores a random negative, ties counting one half)
/// together with the threshold-swept ROC curve. The rank AUC equals the
/// trapezoidal area under the returned curve.
pub fn roc_auc(scores: &[f64], actual: &[bool]) -> Result<(f64, Vec<RocPoint>)> {
    if scores.len() != actual.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores for {} labels",
            scores.len(),
            actual.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Domain("scores must be finite".into()));
    }
    let positives = actual.iter().filter(|&&a| a).count();
    let negatives = actual.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedAuc(
            "both classes must be present".into(),
        ));
    }

    // Rank formulation with average ranks over ties.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut positive_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; tied entries share the mean rank of the run.
        let mean_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if actual[idx] {
                positive_rank_sum += mean_rank;
            }
        }
        i = j;
    }
    let np = positives as f64;
    let nn = negatives as f64;
    let auc = (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);

    // Threshold sweep from high to low over distinct scores.
    let mut curve = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = order.len();
    while i > 0 {
        let threshold = scores[order[i - 1]];
        while i > 0 && scores[order[i - 1]] == threshold {
            if actual[order[i - 1]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i -= 1;
        }
        curve.push(RocPoint {
            threshold,
            fpr: fp as f64 / nn,
            tpr: tp as f64 / np,
        });
    }
    Ok((auc, curve))
}

/// Trapezoidal area under a ROC curve; the independent route to AUC.
pub fn trapezoid_area(curve: &[RocPoint]) -> f64 {
    curve
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn confusion_counts_by_hand() {
        let predicted = [1u8, 0, 1, 0];
        let actual = [1u8, 1, 0, 0];
        let cm = confusion(&predicted, &actual, &1).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(1, 1, 1, 1));
    }

    #[test]
    fn confusion_perfect_and_inverted() {
        let labels = [1u8, 1, 0, 0];
        let cm = confusion(&labels, &labels, &1).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(2, 0, 2, 0));
        let flipped: Vec<u8> = labels.iter().map(|&l| 1 - l).collect();
        let cm = confusion(&flipped, &labels, &1).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(0, 2, 0, 2));
    }

    #[test]
    fn confusion_rejects_length_mismatch() {
        assert!(matches!(
            confusion(&[1u8], &[1u8, 0], &1),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn report_by_direct_substitution() {
        let cm = ConfusionMatrix::new(99, 0, 100, 1);
        let r = report(&cm).unwrap();
        assert_eq!(r.acc.value(), Some(199.0 / 200.0));
        assert_eq!(r.ppv.value(), Some(1.0));
        assert_eq!(r.sen.value(), Some(0.99));
        assert_eq!(r.spc.value(), Some(1.0));
        assert_eq!(r.f1.value(), Some(198.0 / 199.0));
        assert_eq!(r.fpr.value(), Some(0.0));
        assert_eq!(r.fnr.value(), Some(1.0 - 0.99));
        assert_eq!(r.fnr_percent.value(), Some((1.0 - 0.99) * 100.0));
    }

    #[test]
    fn report_marks_zero_denominators_undefined() {
        let cm = ConfusionMatrix::new(0, 0, 10, 0);
        let r = report(&cm).unwrap();
        assert_eq!(r.acc.value(), Some(1.0));
        assert_eq!(r.spc.value(), Some(1.0));
        assert!(r.ppv.value().is_none());
        assert!(r.sen.value().is_none());
        assert!(r.f1.value().is_none());
        assert!(r.fnr.value().is_none());
    }

    #[test]
    fn report_symmetric_matrix() {
        let cm = ConfusionMatrix::new(25, 25, 25, 25);
        let r = report(&cm).unwrap();
        for m in [&r.acc, &r.ppv, &r.sen, &r.spc, &r.f1] {
            assert_eq!(m.value(), Some(0.5));
        }
    }

    #[test]
    fn report_rejects_empty_matrix() {
        assert!(report(&ConfusionMatrix::default()).is_err());
    }

    #[test]
    fn auc_perfect_separation() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let actual = [true, true, false, false];
        let (auc, _) = roc_auc(&scores, &actual).unwrap();
        assert_eq!(auc, 1.0);
    }

    #[test]
    fn auc_all_ties_is_half() {
        let scores = [0.4; 6];
        let actual = [true, false, true, false, true, false];
        let (auc, curve) = roc_auc(&scores, &actual).unwrap();
        assert_eq!(auc, 0.5);
        assert_eq!(curve.len(), 2);
        assert_eq!((curve[1].fpr, curve[1].tpr), (1.0, 1.0));
    }

    #[test]
    fn auc_three_of_four_concordant() {
        // Pairs: (0.8 vs 0.5) +, (0.8 vs 0.1) +, (0.3 vs 0.5) -, (0.3 vs 0.1) +.
        let scores = [0.8, 0.3, 0.5, 0.1];
        let actual = [true, true, false, false];
        let (auc, _) = roc_auc(&scores, &actual).unwrap();
        assert_eq!(auc, 0.75);
    }

    #[test]
    fn auc_requires_both_classes() {
        assert!(matches!(
            roc_auc(&[0.2, 0.4], &[true, true]),
            Err(Error::UndefinedAuc(_))
        ));
    }

    /// AUC by exhaustive pair counting, the brute-force oracle.
    fn pair_count_auc(scores: &[f64], actual: &[bool]) -> f64 {
        let mut total = 0.0;
        let mut pairs = 0usize;
        for (i, &a) in actual.iter().enumerate() {
            if !a {
                continue;
            }
            for (j, &b) in actual.iter().enumerate() {
                if b {
                    continue;
                }
                pairs += 1;
                if scores[i] > scores[j] {
                    total += 1.0;
                } else if scores[i] == scores[j] {
                    total += 0.5;
                }
            }
        }
        total / pairs as f64
    }

    proptest! {
        #[test]
        fn acc_matches_direct_formula(
            tp in 0usize..200, fp in 0usize..200, tn in 0usize..200, fn_count in 0usize..200,
        ) {
            prop_assume!(tp + fp + tn + fn_count > 0);
            let cm = ConfusionMatrix::new(tp, fp, tn, fn_count);
            let r = report(&cm).unwrap();
            let n = (tp + fp + tn + fn_count) as f64;
            prop_assert_eq!(r.acc.value(), Some((tp + tn) as f64 / n));
            // Complement identities hold exactly.
            if let (Some(fpr), Some(spc)) = (r.fpr.value(), r.spc.value()) {
                prop_assert_eq!(fpr, 1.0 - spc);
            }
            if let (Some(fnr), Some(sen)) = (r.fnr.value(), r.sen.value()) {
                prop_assert_eq!(fnr, 1.0 - sen);
            }
            // F1 is the harmonic mean of PPV and SEN when both are defined.
            if let (Some(f1), Some(p), Some(s)) = (r.f1.value(), r.ppv.value(), r.sen.value()) {
                if p + s > 0.0 {
                    prop_assert!((f1 - 2.0 * p * s / (p + s)).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn auc_rank_equals_pairs_and_trapezoid(
            raw in prop::collection::vec((0u8..8, prop::bool::ANY), 4..40),
        ) {
            // Coarse score grid so ties actually occur.
            let scores: Vec<f64> = raw.iter().map(|&(s, _)| s as f64 / 7.0).collect();
            let actual: Vec<bool> = raw.iter().map(|&(_, a)| a).collect();
            prop_assume!(actual.iter().any(|&a| a) && actual.iter().any(|&a| !a));
            let (auc, curve) = roc_auc(&scores, &actual).unwrap();
            prop_assert!((auc - pair_count_auc(&scores, &actual)).abs() < 1e-12);
            prop_assert!((auc - trapezoid_area(&curve)).abs() < 1e-12);
            // Reversing all scores flips the AUC.
            let reversed: Vec<f64> = scores.iter().map(|s| -s).collect();
            let (rev, _) = roc_auc(&reversed, &actual).unwrap();
            prop_assert!((rev - (1.0 - auc)).abs() < 1e-12);
        }

        #[test]
        fn confusion_is_permutation_invariant(
            pairs in prop::collection::vec((prop::bool::ANY, prop::bool::ANY), 1..30),
            seed in 0u64..100,
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let predicted: Vec<bool> = pairs.iter().map(|&(p, _)| p).collect();
            let actual: Vec<bool> = pairs.iter().map(|&(_, a)| a).collect();
            let cm = confusion(&predicted, &actual, &true).unwrap();
            let mut index: Vec<usize> = (0..pairs.len()).collect();
            index.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let p2: Vec<bool> = index.iter().map(|&i| predicted[i]).collect();
            let a2: Vec<bool> = index.iter().map(|&i| actual[i]).collect();
            prop_assert_eq!(cm, confusion(&p2, &a2, &true).unwrap());
        }
    }
}
