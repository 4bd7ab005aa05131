//! End-to-end experiment orchestration: preprocess, partition, train per
//! fold, evaluate, aggregate.
//!
//! Three model kinds share the harness. `nn` and `dnn` train binary
//! classifiers on the class labels. `fcm-dnn` first fits per-class fuzzy
//! clusterings on each fold's non-test samples, trains a softmax network on
//! the resulting cluster labels, and maps predicted clusters back to the
//! binary diagnosis by the class-offset rule (clusters below
//! `clusters_per_class` are healthy). Every random choice derives from the
//! master seed through the recorded ledger, and an instrumented audit mode
//! tracks which sample ids reached each fitting path.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{ClassLabel, Dataset, Sample};
use crate::error::{Error, Result};
use crate::fcm::{FcmParams, PerClassClusterModel};
use crate::metrics::{
    confusion, report, roc_auc, ConfusionMatrix, MetricValue, MetricsReport, RocPoint,
};
use crate::network::{
    predict, train, BatchSize, NetworkParams, NetworkSpec, OptimizerConfig, TrainingExample,
};
use crate::partition::{make_fold_plan, FoldPlan};
use crate::preprocess::{resize, scale_by_255, MinMaxStats, Normalization, PreprocessConfig};
use crate::seeds::{self, Role};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Nn,
    Dnn,
    FcmDnn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Nn => "nn",
            ModelKind::Dnn => "dnn",
            ModelKind::FcmDnn => "fcm-dnn",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<ModelKind> {
        match s {
            "nn" => Ok(ModelKind::Nn),
            "dnn" => Ok(ModelKind::Dnn),
            "fcm-dnn" | "fcm_dnn" => Ok(ModelKind::FcmDnn),
            other => Err(Error::Config(format!(
                "unknown model `{other}` (expected nn, dnn, or fcm-dnn)"
            ))),
        }
    }
}

/// Optional deviations from the model's default network configuration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkOverrides {
    pub hidden_layers: Option<Vec<usize>>,
    pub maxout_pieces: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub rho: Option<f64>,
    pub epsilon: Option<f64>,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub batch_size: Option<BatchSize>,
    pub shuffle: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub folds: usize,
    pub clusters_per_class: usize,
    pub master_seed: u64,
    pub preprocess: PreprocessConfig,
    pub fcm: FcmParams,
    pub network: NetworkOverrides,
    /// Stratify fold assignment by class (on by default).
    pub stratify: bool,
    /// Fit normalization statistics and cluster models once on the full
    /// dataset before fold splitting, instead of per fold on non-test data.
    pub paper_order: bool,
    /// Record which sample ids reached each fitting path.
    pub audit: bool,
    /// Worker threads for fold execution; results are identical to
    /// sequential runs.
    pub jobs: usize,
}

impl ExperimentConfig {
    pub fn new(model: ModelKind, folds: usize, master_seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            model,
            folds,
            clusters_per_class: 5,
            master_seed,
            preprocess: PreprocessConfig::default(),
            fcm: FcmParams::default(),
            network: NetworkOverrides::default(),
            stratify: true,
            paper_order: false,
            audit: false,
            jobs: 1,
        }
    }

    fn network_spec(&self, input_width: usize, seed: u64) -> NetworkSpec {
        let mut spec = match self.model {
            ModelKind::Nn => NetworkSpec::nn_default(input_width, seed),
            ModelKind::Dnn => NetworkSpec::dnn_default(input_width, 1, seed),
            ModelKind::FcmDnn => {
                let outputs = 2 * self.clusters_per_class;
                NetworkSpec::dnn_default(input_width, outputs.max(2), seed)
            }
        };
        let o = &self.network;
        if let Some(widths) = &o.hidden_layers {
            let pieces = o.maxout_pieces.unwrap_or(2);
            let head = *spec.layers.last().unwrap();
            let hidden_activation = match self.model {
                ModelKind::Nn => crate::network::Activation::Sigmoid,
                _ => crate::network::Activation::Maxout { pieces },
            };
            let mut layers = Vec::with_capacity(widths.len() + 1);
            let mut width = input_width;
            for &h in widths {
                layers.push(crate::network::LayerSpec::new(width, h, hidden_activation));
                width = h;
            }
            layers.push(crate::network::LayerSpec::new(
                width,
                head.outputs,
                head.activation,
            ));
            spec.layers = layers;
        } else if let Some(pieces) = o.maxout_pieces {
            for layer in &mut spec.layers {
                if matches!(
                    layer.activation,
                    crate::network::Activation::Maxout { .. }
                ) {
                    layer.activation = crate::network::Activation::Maxout { pieces };
                }
            }
        }
        if let Some(epochs) = o.epochs {
            spec.epochs = epochs;
        }
        match &mut spec.optimizer {
            OptimizerConfig::MomentumSgd {
                learning_rate,
                momentum,
            } => {
                if let Some(lr) = o.learning_rate {
                    *learning_rate = lr;
                }
                if let Some(m) = o.momentum {
                    *momentum = m;
                }
            }
            OptimizerConfig::Adaptive { rho, epsilon } => {
                if let Some(r) = o.rho {
                    *rho = r;
                }
                if let Some(e) = o.epsilon {
                    *epsilon = e;
                }
            }
        }
        if let Some(l1) = o.l1 {
            spec.l1 = l1;
        }
        if let Some(l2) = o.l2 {
            spec.l2 = l2;
        }
        if let Some(batch) = o.batch_size {
            spec.batch_size = batch;
        }
        if let Some(shuffle) = o.shuffle {
            spec.shuffle = shuffle;
        }
        spec
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedEntry {
    pub role: String,
    pub fold: Option<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAudit {
    pub fold: usize,
    /// Ids consumed by any fitting path (normalization statistics, cluster
    /// fits, network training).
    pub fitted_sample_ids: Vec<u64>,
    pub test_sample_ids: Vec<u64>,
    pub overlap: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub per_fold: Vec<FoldAudit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_count: usize,
    pub metrics: MetricsReport,
    /// Agreement between predicted and derived cluster labels on the test
    /// split (fcm-dnn only).
    pub cluster_accuracy: Option<f64>,
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<Option<f64>>,
}

/// Mean-over-folds aggregation of one criterion; undefined fold entries are
/// excluded from the mean and counted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetric {
    pub mean: Option<f64>,
    pub defined_folds: usize,
    pub undefined_folds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanReport {
    pub acc: AggregateMetric,
    pub ppv: AggregateMetric,
    pub sen: AggregateMetric,
    pub spc: AggregateMetric,
    pub f1: AggregateMetric,
    pub fpr: AggregateMetric,
    pub fnr: AggregateMetric,
    pub auc: AggregateMetric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: ModelKind,
    pub folds: usize,
    pub n_samples: usize,
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
    pub fold_reports: Vec<FoldReport>,
    pub pooled: MetricsReport,
    pub mean: MeanReport,
    pub seed_ledger: Vec<SeedEntry>,
    pub audit: Option<AuditReport>,
    /// Wall-clock duration; the only field excluded from determinism
    /// guarantees.
    pub wall_clock_ms: u64,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<RunReport> {
        Ok(serde_json::from_str(text)?)
    }
}

/// One test-set prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: u64,
    pub actual: ClassLabel,
    pub predicted: ClassLabel,
    /// Probability mass assigned to the sick side; the ROC score.
    pub sick_score: f64,
    pub predicted_cluster: Option<usize>,
    /// Derived ground-truth cluster under the fold's fitted cluster model.
    pub actual_cluster: Option<usize>,
}

/// A serializable frozen model for one fold: everything needed to
/// reproduce its test predictions bit-exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldModel {
    pub format_version: u32,
    pub model: ModelKind,
    pub fold: usize,
    pub seed: u64,
    pub preprocess: PreprocessConfig,
    pub minmax: Option<MinMaxStats>,
    pub cluster_model: Option<PerClassClusterModel>,
    pub network: NetworkParams,
    pub positive_class: ClassLabel,
}

impl FoldModel {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<FoldModel> {
        let value: serde_json::Value = serde_json::from_slice(&fs::read(path)?)?;
        let found = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .unwrap_or(0) as u32;
        if found != MODEL_FORMAT_VERSION {
            return Err(Error::ModelVersion {
                found,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        Ok(serde_json::from_value(value)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldOutput {
    pub fold: usize,
    pub model: FoldModel,
    pub predictions: Vec<Prediction>,
    pub roc_curve: Vec<RocPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub report: RunReport,
    pub fold_plan: FoldPlan,
    pub fold_outputs: Vec<FoldOutput>,
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// Per-fold evaluation carrying what pooling needs beyond the report.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldEvaluation {
    pub metrics: MetricsReport,
    pub scores: Vec<f64>,
    pub positives: Vec<bool>,
}

fn aggregate_metric(folds: &[&MetricValue]) -> AggregateMetric {
    let defined: Vec<f64> = folds.iter().filter_map(|m| m.value()).collect();
    AggregateMetric {
        mean: if defined.is_empty() {
            None
        } else {
            Some(defined.iter().sum::<f64>() / defined.len() as f64)
        },
        defined_folds: defined.len(),
        undefined_folds: folds.len() - defined.len(),
    }
}

/// Pools fold results (summed confusion matrices, concatenated scores) and
/// averages the per-fold criteria.
pub fn aggregate(folds: &[FoldEvaluation]) -> Result<(MetricsReport, MeanReport)> {
    if folds.is_empty() {
        return Err(Error::InsufficientData("no fold reports".into()));
    }
    let pooled_cm = folds
        .iter()
        .fold(ConfusionMatrix::default(), |acc, f| acc.add(&f.metrics.cm));
    let scores: Vec<f64> = folds.iter().flat_map(|f| f.scores.iter().copied()).collect();
    let positives: Vec<bool> = folds
        .iter()
        .flat_map(|f| f.positives.iter().copied())
        .collect();
    let pooled_auc = match roc_auc(&scores, &positives) {
        Ok((auc, _)) => MetricValue::Defined(auc),
        Err(Error::UndefinedAuc(cause)) => MetricValue::undefined(&cause),
        Err(e) => return Err(e),
    };
    let pooled = report(&pooled_cm)?.with_auc(pooled_auc);

    let pick = |get: fn(&MetricsReport) -> &MetricValue| {
        aggregate_metric(&folds.iter().map(|f| get(&f.metrics)).collect::<Vec<_>>())
    };
    let mean = MeanReport {
        acc: pick(|m| &m.acc),
        ppv: pick(|m| &m.ppv),
        sen: pick(|m| &m.sen),
        spc: pick(|m| &m.spc),
        f1: pick(|m| &m.f1),
        fpr: pick(|m| &m.fpr),
        fnr: pick(|m| &m.fnr),
        auc: pick(|m| &m.auc),
    };
    Ok((pooled, mean))
}

// ---------------------------------------------------------------------------
// The run itself
// ---------------------------------------------------------------------------

struct Prepared {
    /// Resized samples, normalized only when normalization is stateless or
    /// fit globally; otherwise raw and normalized per fold.
    samples: Vec<Sample>,
    /// Global normalization statistics (paper order), if any.
    global_minmax: Option<MinMaxStats>,
    /// Whether per-fold min/max fitting is required.
    fit_minmax_per_fold: bool,
    /// Globally fitted cluster model (paper order, fcm-dnn).
    global_clusters: Option<PerClassClusterModel>,
}

fn class_of_cluster(cluster: usize, clusters_per_class: usize) -> ClassLabel {
    if cluster < clusters_per_class {
        ClassLabel::Healthy
    } else {
        ClassLabel::Sick
    }
}

fn one_hot(index: usize, width: usize) -> Vec<f64> {
    let mut v = vec![0.0; width];
    v[index] = 1.0;
    v
}

/// Runs the configured experiment and returns the full output (report,
/// fold plan, per-fold models and predictions).
pub fn run_experiment_full(dataset: &Dataset, config: &ExperimentConfig) -> Result<RunOutput> {
    let started = Instant::now();
    dataset.validate()?;
    config.preprocess.validate()?;
    if dataset.is_empty() {
        return Err(Error::InsufficientData("empty dataset".into()));
    }
    let n = dataset.len();
    if config.folds < 2 || config.folds > n {
        return Err(Error::InvalidFoldCount {
            k: config.folds,
            n,
        });
    }
    let mut warnings = Vec::new();
    if ![5, 7, 10].contains(&config.folds) {
        warnings.push(format!(
            "non-paper fold count (k = {}); reference runs use 5, 7, or 10",
            config.folds
        ));
    }
    if config.model == ModelKind::FcmDnn {
        let counts = dataset.class_counts();
        if counts[0] < config.clusters_per_class || counts[1] < config.clusters_per_class {
            return Err(Error::InsufficientData(format!(
                "class counts {counts:?} cannot support {} clusters per class",
                config.clusters_per_class
            )));
        }
    }

    // Resize up front (stateless, no leakage).
    let side = config.preprocess.target_side;
    let resized: Vec<Sample> = dataset
        .samples
        .iter()
        .map(|s| {
            if s.width == side && s.height == side {
                Ok(s.clone())
            } else {
                resize(s, side)
            }
        })
        .collect::<Result<_>>()?;

    // Normalization strategy.
    let mut prepared = match config.preprocess.normalization {
        Normalization::ScaleBy255 => Prepared {
            samples: resized.iter().map(scale_by_255).collect(),
            global_minmax: None,
            fit_minmax_per_fold: false,
            global_clusters: None,
        },
        Normalization::PerAttributeMinMax => {
            if config.paper_order {
                let stats = MinMaxStats::fit(&resized)?;
                let samples = resized
                    .iter()
                    .map(|s| stats.apply(s))
                    .collect::<Result<Vec<_>>>()?;
                Prepared {
                    samples,
                    global_minmax: Some(stats),
                    fit_minmax_per_fold: false,
                    global_clusters: None,
                }
            } else {
                Prepared {
                    samples: resized,
                    global_minmax: None,
                    fit_minmax_per_fold: true,
                    global_clusters: None,
                }
            }
        }
    };

    // Seed ledger, in a fixed order independent of fold execution order.
    let mut ledger = Vec::new();
    let partition_seed = seeds::for_role(config.master_seed, Role::Partition, 0);
    ledger.push(SeedEntry {
        role: Role::Partition.name().into(),
        fold: None,
        seed: partition_seed,
    });
    let network_seeds: Vec<u64> = (0..config.folds)
        .map(|f| seeds::for_role(config.master_seed, Role::Network, f))
        .collect();
    let fcm_seeds: Vec<[u64; 2]> = (0..config.folds)
        .map(|f| {
            [
                seeds::for_role(config.master_seed, Role::FcmHealthy, f),
                seeds::for_role(config.master_seed, Role::FcmSick, f),
            ]
        })
        .collect();
    for f in 0..config.folds {
        ledger.push(SeedEntry {
            role: Role::Network.name().into(),
            fold: Some(f),
            seed: network_seeds[f],
        });
        if config.model == ModelKind::FcmDnn {
            ledger.push(SeedEntry {
                role: Role::FcmHealthy.name().into(),
                fold: Some(f),
                seed: fcm_seeds[f][0],
            });
            ledger.push(SeedEntry {
                role: Role::FcmSick.name().into(),
                fold: Some(f),
                seed: fcm_seeds[f][1],
            });
        }
    }

    let labels: Vec<usize> = prepared
        .samples
        .iter()
        .map(|s| s.class_label.index())
        .collect();
    let plan = make_fold_plan(
        n,
        config.folds,
        partition_seed,
        config.stratify.then_some(labels.as_slice()),
    )?;

    // Paper-order clustering: one fit on the full dataset before folding.
    if config.model == ModelKind::FcmDnn && config.paper_order {
        // When min/max statistics are global they are already applied.
        let refs: Vec<&Sample> = prepared.samples.iter().collect();
        let (model, _) = PerClassClusterModel::fit(
            &refs,
            config.clusters_per_class,
            &config.fcm,
            [
                seeds::for_role(config.master_seed, Role::FcmHealthy, 0),
                seeds::for_role(config.master_seed, Role::FcmSick, 0),
            ],
        )?;
        prepared.global_clusters = Some(model);
    }

    let run_fold = |fold: usize| -> Result<(FoldReport, FoldOutput, FoldAudit, FoldEvaluation)> {
        fold_run(
            fold,
            &prepared,
            &plan,
            config,
            network_seeds[fold],
            fcm_seeds[fold],
        )
    };

    let results: Vec<(FoldReport, FoldOutput, FoldAudit, FoldEvaluation)> = if config.jobs > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
        pool.install(|| {
            (0..config.folds)
                .into_par_iter()
                .map(run_fold)
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        (0..config.folds)
            .map(run_fold)
            .collect::<Result<Vec<_>>>()?
    };

    let mut fold_reports = Vec::with_capacity(config.folds);
    let mut fold_outputs = Vec::with_capacity(config.folds);
    let mut audits = Vec::with_capacity(config.folds);
    let mut evaluations = Vec::with_capacity(config.folds);
    for (report, output, audit, evaluation) in results {
        fold_reports.push(report);
        fold_outputs.push(output);
        audits.push(audit);
        evaluations.push(evaluation);
    }

    let (pooled, mean) = aggregate(&evaluations)?;
    let report = RunReport {
        model: config.model,
        folds: config.folds,
        n_samples: n,
        config: config.clone(),
        warnings,
        fold_reports,
        pooled,
        mean,
        seed_ledger: ledger,
        audit: config.audit.then_some(AuditReport { per_fold: audits }),
        wall_clock_ms: started.elapsed().as_millis() as u64,
    };
    Ok(RunOutput {
        report,
        fold_plan: plan,
        fold_outputs,
    })
}

fn fold_run(
    fold: usize,
    prepared: &Prepared,
    plan: &FoldPlan,
    config: &ExperimentConfig,
    network_seed: u64,
    fcm_seeds: [u64; 2],
) -> Result<(FoldReport, FoldOutput, FoldAudit, FoldEvaluation)> {
    let assignment = &plan.folds[fold];
    let mut fitted_ids: Vec<u64> = Vec::new();

    // Per-fold normalization, when statistics must be fit on non-test data.
    let non_test: Vec<usize> = assignment
        .train_indices
        .iter()
        .chain(&assignment.validation_indices)
        .copied()
        .collect();
    let mut per_fold_normalized: Option<Vec<Sample>> = None;
    let minmax = if prepared.fit_minmax_per_fold {
        let fit_set: Vec<&Sample> = non_test.iter().map(|&i| &prepared.samples[i]).collect();
        fitted_ids.extend(fit_set.iter().map(|s| s.id));
        let stats = MinMaxStats::fit(fit_set)?;
        per_fold_normalized = Some(
            prepared
                .samples
                .iter()
                .map(|s| stats.apply(s))
                .collect::<Result<Vec<_>>>()?,
        );
        Some(stats)
    } else {
        if prepared.global_minmax.is_some() {
            // Statistics were fit on the full dataset before splitting.
            fitted_ids.extend(prepared.samples.iter().map(|s| s.id));
        }
        prepared.global_minmax.clone()
    };
    let fold_samples: &[Sample] = per_fold_normalized
        .as_deref()
        .unwrap_or(&prepared.samples);

    // Cluster model for fcm-dnn.
    let cluster_model = match (config.model, &prepared.global_clusters) {
        (ModelKind::FcmDnn, Some(global)) => {
            // Fit happened on the full dataset; flag every id.
            fitted_ids.extend(fold_samples.iter().map(|s| s.id));
            Some(global.clone())
        }
        (ModelKind::FcmDnn, None) => {
            let fit_set: Vec<&Sample> = non_test.iter().map(|&i| &fold_samples[i]).collect();
            fitted_ids.extend(fit_set.iter().map(|s| s.id));
            let (model, _) = PerClassClusterModel::fit(
                &fit_set,
                config.clusters_per_class,
                &config.fcm,
                fcm_seeds,
            )?;
            Some(model)
        }
        _ => None,
    };

    // Training examples.
    let input_width = config.preprocess.target_side * config.preprocess.target_side;
    let spec = config.network_spec(input_width, network_seed);
    let output_width = spec.output_width();
    let example_for = |index: usize| -> Result<TrainingExample> {
        let sample = &fold_samples[index];
        let target = match &cluster_model {
            Some(model) => one_hot(
                model.cluster_label(&sample.pixels, sample.class_label)?,
                output_width,
            ),
            None => vec![sample.class_label.index() as f64],
        };
        Ok(TrainingExample {
            input: sample.pixels.clone(),
            target,
        })
    };
    let train_examples: Vec<TrainingExample> = assignment
        .train_indices
        .iter()
        .map(|&i| example_for(i))
        .collect::<Result<_>>()?;
    fitted_ids.extend(assignment.train_indices.iter().map(|&i| fold_samples[i].id));
    let validation_examples: Vec<TrainingExample> = assignment
        .validation_indices
        .iter()
        .map(|&i| example_for(i))
        .collect::<Result<_>>()?;

    let (params, history) = train(&spec, &train_examples, &validation_examples)?;

    // Test predictions.
    let mut predictions = Vec::with_capacity(assignment.test_indices.len());
    for &i in &assignment.test_indices {
        let sample = &fold_samples[i];
        predictions.push(predict_sample(
            sample,
            &params,
            cluster_model.as_ref(),
            config.clusters_per_class,
        )?);
    }

    let fold_model = FoldModel {
        format_version: MODEL_FORMAT_VERSION,
        model: config.model,
        fold,
        seed: network_seed,
        preprocess: config.preprocess,
        minmax,
        cluster_model,
        network: params,
        positive_class: ClassLabel::Sick,
    };

    let (metrics, roc_curve, evaluation, cluster_accuracy) = score_predictions(&predictions)?;

    fitted_ids.sort_unstable();
    fitted_ids.dedup();
    let mut test_ids: Vec<u64> = assignment
        .test_indices
        .iter()
        .map(|&i| fold_samples[i].id)
        .collect();
    test_ids.sort_unstable();
    let overlap: Vec<u64> = fitted_ids
        .iter()
        .copied()
        .filter(|id| test_ids.binary_search(id).is_ok())
        .collect();

    Ok((
        FoldReport {
            fold,
            test_count: assignment.test_indices.len(),
            metrics: metrics.clone(),
            cluster_accuracy,
            train_loss: history.train_loss,
            validation_loss: history.validation_loss,
        },
        FoldOutput {
            fold,
            model: fold_model,
            predictions,
            roc_curve,
        },
        FoldAudit {
            fold,
            fitted_sample_ids: fitted_ids,
            test_sample_ids: test_ids,
            overlap,
        },
        evaluation,
    ))
}

fn predict_sample(
    sample: &Sample,
    params: &NetworkParams,
    cluster_model: Option<&PerClassClusterModel>,
    clusters_per_class: usize,
) -> Result<Prediction> {
    let (scores, hard) = predict(params, &sample.pixels)?;
    match cluster_model {
        None => Ok(Prediction {
            sample_id: sample.id,
            actual: sample.class_label,
            predicted: ClassLabel::from_index(hard).expect("binary head"),
            sick_score: scores[0],
            predicted_cluster: None,
            actual_cluster: None,
        }),
        Some(model) => {
            let sick_score: f64 = scores[clusters_per_class..].iter().sum();
            Ok(Prediction {
                sample_id: sample.id,
                actual: sample.class_label,
                predicted: class_of_cluster(hard, clusters_per_class),
                sick_score,
                predicted_cluster: Some(hard),
                actual_cluster: Some(model.cluster_label(&sample.pixels, sample.class_label)?),
            })
        }
    }
}

fn score_predictions(
    predictions: &[Prediction],
) -> Result<(MetricsReport, Vec<RocPoint>, FoldEvaluation, Option<f64>)> {
    let predicted: Vec<ClassLabel> = predictions.iter().map(|p| p.predicted).collect();
    let actual: Vec<ClassLabel> = predictions.iter().map(|p| p.actual).collect();
    let scores: Vec<f64> = predictions.iter().map(|p| p.sick_score).collect();
    let positives: Vec<bool> = actual.iter().map(|&a| a == ClassLabel::Sick).collect();

    let cm = confusion(&predicted, &actual, &ClassLabel::Sick)?;
    let (auc, curve) = match roc_auc(&scores, &positives) {
        Ok((auc, curve)) => (MetricValue::Defined(auc), curve),
        Err(Error::UndefinedAuc(cause)) => (MetricValue::undefined(&cause), Vec::new()),
        Err(e) => return Err(e),
    };
    let metrics = report(&cm)?.with_auc(auc);

    let cluster_accuracy = if predictions.iter().all(|p| p.predicted_cluster.is_some()) {
        let agree = predictions
            .iter()
            .filter(|p| p.predicted_cluster == p.actual_cluster)
            .count();
        Some(agree as f64 / predictions.len().max(1) as f64)
    } else {
        None
    };

    let evaluation = FoldEvaluation {
        metrics: metrics.clone(),
        scores,
        positives,
    };
    Ok((metrics, curve, evaluation, cluster_accuracy))
}

/// Runs the experiment and returns the report alone.
pub fn run_experiment(dataset: &Dataset, config: &ExperimentConfig) -> Result<RunReport> {
    Ok(run_experiment_full(dataset, config)?.report)
}

pub fn run_nn(dataset: &Dataset, config: &ExperimentConfig) -> Result<RunReport> {
    let config = ExperimentConfig {
        model: ModelKind::Nn,
        ..config.clone()
    };
    run_experiment(dataset, &config)
}

pub fn run_dnn(dataset: &Dataset, config: &ExperimentConfig) -> Result<RunReport> {
    let config = ExperimentConfig {
        model: ModelKind::Dnn,
        ..config.clone()
    };
    run_experiment(dataset, &config)
}

pub fn run_fcm_dnn(dataset: &Dataset, config: &ExperimentConfig) -> Result<RunReport> {
    let config = ExperimentConfig {
        model: ModelKind::FcmDnn,
        ..config.clone()
    };
    run_experiment(dataset, &config)
}

// ---------------------------------------------------------------------------
// Evaluation of frozen models
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationOutput {
    pub metrics: MetricsReport,
    pub predictions: Vec<Prediction>,
}

/// Re-runs prediction with a frozen model over a labeled dataset. The
/// feature path (resize, normalization, forward pass) is the same pure
/// float pipeline as training-time testing, so identical inputs reproduce
/// identical scores.
pub fn evaluate_model(model: &FoldModel, dataset: &Dataset) -> Result<EvaluationOutput> {
    if dataset.is_empty() {
        return Err(Error::InsufficientData("empty evaluation dataset".into()));
    }
    let side = model.preprocess.target_side;
    let mut predictions = Vec::with_capacity(dataset.len());
    for sample in &dataset.samples {
        let resized = if sample.width == side && sample.height == side {
            sample.clone()
        } else {
            resize(sample, side)?
        };
        let features = match model.preprocess.normalization {
            Normalization::ScaleBy255 => scale_by_255(&resized),
            Normalization::PerAttributeMinMax => match &model.minmax {
                Some(stats) => stats.apply(&resized)?,
                None => {
                    return Err(Error::Config(
                        "model uses per-attribute normalization but carries no statistics".into(),
                    ))
                }
            },
        };
        predictions.push(predict_sample(
            &features,
            &model.network,
            model.cluster_model.as_ref(),
            model.cluster_model
                .as_ref()
                .map(|m| m.clusters_per_class)
                .unwrap_or(0),
        )?);
    }
    let (metrics, _, _, _) = score_predictions(&predictions)?;
    Ok(EvaluationOutput {
        metrics,
        predictions,
    })
}

// ---------------------------------------------------------------------------
// Artifact writing
// ---------------------------------------------------------------------------

pub fn summary_csv_header() -> &'static str {
    "model,folds,acc,ppv,sen,spc,f1_score,fpr,fnr,auc"
}

/// One Table-style CSV row (criteria as percentages, `NA` when undefined).
pub fn summary_csv_row(model: ModelKind, folds: usize, metrics: &MetricsReport) -> String {
    format!("{},{},{}", model.name(), folds, metrics.csv_fields())
}

/// Writes the run's artifacts: `run_report.json`, `fold_plan.json`,
/// `summary.csv` (pooled row), and per fold `model_fold_N.json`,
/// `predictions_fold_N.csv`, `roc_fold_N.csv`.
pub fn write_run_artifacts(out_dir: &Path, output: &RunOutput) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut report_json = output.report.to_json()?;
    report_json.push('\n');
    fs::write(out_dir.join("run_report.json"), report_json)?;
    let mut plan_json = output.fold_plan.to_json()?;
    plan_json.push('\n');
    fs::write(out_dir.join("fold_plan.json"), plan_json)?;

    let mut summary = String::new();
    summary.push_str(summary_csv_header());
    summary.push('\n');
    summary.push_str(&summary_csv_row(
        output.report.model,
        output.report.folds,
        &output.report.pooled,
    ));
    summary.push('\n');
    fs::write(out_dir.join("summary.csv"), summary)?;

    for fold_output in &output.fold_outputs {
        let fold = fold_output.fold;
        fold_output
            .model
            .write_json(&out_dir.join(format!("model_fold_{fold}.json")))?;

        let mut predictions = fs::File::create(
            out_dir.join(format!("predictions_fold_{fold}.csv")),
        )?;
        writeln!(
            predictions,
            "sample_id,actual,predicted,sick_score,predicted_cluster,actual_cluster"
        )?;
        for p in &fold_output.predictions {
            writeln!(
                predictions,
                "{},{},{},{},{},{}",
                p.sample_id,
                p.actual.index(),
                p.predicted.index(),
                p.sick_score,
                p.predicted_cluster.map(|c| c.to_string()).unwrap_or_default(),
                p.actual_cluster.map(|c| c.to_string()).unwrap_or_default(),
            )?;
        }

        let mut roc = fs::File::create(out_dir.join(format!("roc_fold_{fold}.csv")))?;
        writeln!(roc, "threshold,fpr,tpr")?;
        for point in &fold_output.roc_curve {
            writeln!(roc, "{},{},{}", point.threshold, point.fpr, point.tpr)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_single_fold_is_identity() {
        let cm = ConfusionMatrix::new(3, 1, 4, 2);
        let metrics = report(&cm).unwrap().with_auc(MetricValue::Defined(0.9));
        let fold = FoldEvaluation {
            metrics: metrics.clone(),
            scores: vec![0.9, 0.8, 0.2],
            positives: vec![true, true, false],
        };
        let (pooled, mean) = aggregate(std::slice::from_ref(&fold)).unwrap();
        assert_eq!(pooled.cm, cm);
        assert_eq!(pooled.acc, metrics.acc);
        assert_eq!(mean.acc.mean, metrics.acc.value());
        assert_eq!(mean.acc.undefined_folds, 0);
    }

    #[test]
    fn aggregate_pools_confusion_matrices() {
        let a = report(&ConfusionMatrix::new(1, 0, 1, 0)).unwrap();
        let b = report(&ConfusionMatrix::new(0, 1, 0, 1)).unwrap();
        let folds = vec![
            FoldEvaluation {
                metrics: a,
                scores: vec![0.9, 0.1],
                positives: vec![true, false],
            },
            FoldEvaluation {
                metrics: b,
                scores: vec![0.8, 0.3],
                positives: vec![true, false],
            },
        ];
        let (pooled, _) = aggregate(&folds).unwrap();
        assert_eq!(pooled.cm.total(), 4);
        assert_eq!(pooled.acc.value(), Some(0.5));
    }

    #[test]
    fn aggregate_counts_undefined_entries() {
        let defined = report(&ConfusionMatrix::new(2, 0, 2, 0)).unwrap();
        // No positive samples: SEN undefined in this fold.
        let partial = report(&ConfusionMatrix::new(0, 0, 4, 0)).unwrap();
        let folds = vec![
            FoldEvaluation {
                metrics: defined,
                scores: vec![0.9, 0.8, 0.1, 0.2],
                positives: vec![true, true, false, false],
            },
            FoldEvaluation {
                metrics: partial,
                scores: vec![0.1, 0.2, 0.3, 0.4],
                positives: vec![false, false, false, false],
            },
        ];
        let (_, mean) = aggregate(&folds).unwrap();
        assert_eq!(mean.sen.defined_folds, 1);
        assert_eq!(mean.sen.undefined_folds, 1);
        assert_eq!(mean.sen.mean, Some(1.0));
        let (pooled, _) = aggregate(&folds).unwrap();
        assert_eq!(pooled.cm.true_negatives, 6);
    }

    #[test]
    fn aggregate_rejects_empty_input() {
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn aggregate_of_identical_folds_means_to_each() {
        let metrics = report(&ConfusionMatrix::new(3, 1, 3, 1)).unwrap();
        let fold = FoldEvaluation {
            metrics,
            scores: vec![0.9, 0.6, 0.4, 0.2, 0.8, 0.7, 0.3, 0.1],
            positives: vec![true, true, false, false, true, true, false, false],
        };
        let folds = vec![fold.clone(), fold.clone(), fold.clone()];
        let (_, mean) = aggregate(&folds).unwrap();
        assert_eq!(mean.acc.mean, fold.metrics.acc.value());
        assert_eq!(mean.f1.mean, fold.metrics.f1.value());
        assert_eq!(mean.acc.defined_folds, 3);
    }

    #[test]
    fn model_kind_parses_cli_names() {
        use std::str::FromStr;
        assert_eq!(ModelKind::from_str("nn").unwrap(), ModelKind::Nn);
        assert_eq!(ModelKind::from_str("fcm-dnn").unwrap(), ModelKind::FcmDnn);
        assert!(ModelKind::from_str("svm").is_err());
    }

    #[test]
    fn offset_rule_maps_clusters_to_classes() {
        assert_eq!(class_of_cluster(0, 5), ClassLabel::Healthy);
        assert_eq!(class_of_cluster(4, 5), ClassLabel::Healthy);
        assert_eq!(class_of_cluster(5, 5), ClassLabel::Sick);
        assert_eq!(class_of_cluster(7, 5), ClassLabel::Sick);
    }

    #[test]
    fn network_spec_overrides_apply() {
        let mut config = ExperimentConfig::new(ModelKind::Dnn, 5, 0);
        config.network.hidden_layers = Some(vec![6, 4]);
        config.network.epochs = Some(3);
        config.network.rho = Some(0.5);
        let spec = config.network_spec(16, 1);
        assert_eq!(spec.layers.len(), 3);
        assert_eq!(spec.layers[0].outputs, 6);
        assert_eq!(spec.epochs, 3);
        assert!(matches!(
            spec.optimizer,
            OptimizerConfig::Adaptive { rho, .. } if rho == 0.5
        ));
    }
}
