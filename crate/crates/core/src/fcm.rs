//! Fuzzy C-means clustering.
//!
//! Alternating minimization of the weighted within-cluster scatter
//! `J = sum_i sum_k u_ik^m ||x_k - v_i||^2` over a row-stochastic membership
//! matrix `U` (n x c) and cluster centers `V` (c x d):
//!
//! * membership update: `u_ik = 1 / sum_j (d_ik / d_jk)^(2/(m-1))`, with
//!   zero-distance points splitting their membership equally over the
//!   clusters they coincide with;
//! * center update: `v_i = sum_k u_ik^m x_k / sum_k u_ik^m`.
//!
//! Each update minimizes `J` with the other block fixed, so the recorded
//! objective history is non-increasing. Iteration stops when the objective
//! gain drops below `min_gain` or after `max_iterations`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassLabel, Dataset, Sample};
use crate::error::{Error, Result};
use crate::seeds;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Euclidean,
}

/// Tunable clustering parameters without cluster count or seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FcmParams {
    pub fuzzifier: f64,
    pub max_iterations: usize,
    pub min_gain: f64,
}

impl Default for FcmParams {
    fn default() -> Self {
        FcmParams {
            fuzzifier: 2.0,
            max_iterations: 50,
            min_gain: 1.0e-4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FcmConfig {
    pub num_clusters: usize,
    pub fuzzifier: f64,
    pub max_iterations: usize,
    pub min_gain: f64,
    pub distance: DistanceKind,
    pub seed: u64,
}

impl FcmConfig {
    pub fn new(num_clusters: usize, seed: u64) -> FcmConfig {
        FcmConfig::with_params(num_clusters, &FcmParams::default(), seed)
    }

    pub fn with_params(num_clusters: usize, params: &FcmParams, seed: u64) -> FcmConfig {
        FcmConfig {
            num_clusters,
            fuzzifier: params.fuzzifier,
            max_iterations: params.max_iterations,
            min_gain: params.min_gain,
            distance: DistanceKind::Euclidean,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_clusters < 2 {
            return Err(Error::Config("num_clusters must be at least 2".into()));
        }
        if self.fuzzifier <= 1.0 {
            return Err(Error::Config("fuzzifier must exceed 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.min_gain <= 0.0 {
            return Err(Error::Config("min_gain must be positive".into()));
        }
        Ok(())
    }
}

/// Recovery record for a cluster that lost all membership mass and was
/// re-seeded to a random data point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReseedEvent {
    pub iteration: usize,
    pub cluster: usize,
}

/// Converged clustering state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FcmState {
    /// n x c row-stochastic membership matrix.
    pub memberships: Vec<Vec<f64>>,
    /// c x d cluster centers.
    pub centers: Vec<Vec<f64>>,
    /// Objective value after each iteration; non-increasing.
    pub objective_history: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    pub reseeded: Vec<ReseedEvent>,
}

impl FcmState {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Hard assignment per sample: argmax membership, lowest index wins
    /// ties.
    pub fn hard_assignments(&self) -> Vec<usize> {
        self.memberships.iter().map(|row| argmax(row)).collect()
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn check_rows_share_width(rows: &[Vec<f64>], width: usize, what: &str) -> Result<()> {
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::ShapeMismatch(format!(
            "{what} rows must all have width {width}"
        )));
    }
    Ok(())
}

/// Euclidean distance matrix: entry `(k, i)` is `||x_k - v_i||`.
pub fn distances(data: &[Vec<f64>], centers: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let dim = centers.first().map(|c| c.len()).unwrap_or(0);
    check_rows_share_width(centers, dim, "center")?;
    check_rows_share_width(data, dim, "data")?;
    Ok(data
        .iter()
        .map(|x| {
            centers
                .iter()
                .map(|v| {
                    x.iter()
                        .zip(v)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect())
}

/// Membership update for one distance row.
fn membership_row(distance_row: &[f64], fuzzifier: f64) -> Vec<f64> {
    let zeros: Vec<usize> = distance_row
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == 0.0)
        .map(|(i, _)| i)
        .collect();
    if !zeros.is_empty() {
        // Coincident points split membership equally over their clusters.
        let share = 1.0 / zeros.len() as f64;
        let mut row = vec![0.0; distance_row.len()];
        for &i in &zeros {
            row[i] = share;
        }
        return row;
    }
    let exponent = 2.0 / (fuzzifier - 1.0);
    distance_row
        .iter()
        .map(|&d_i| {
            let sum: f64 = distance_row
                .iter()
                .map(|&d_j| (d_i / d_j).powf(exponent))
                .sum();
            1.0 / sum
        })
        .collect()
}

/// Computes the membership matrix that minimizes the objective for fixed
/// distances. Rows sum to 1.
pub fn update_memberships(distance_matrix: &[Vec<f64>], fuzzifier: f64) -> Result<Vec<Vec<f64>>> {
    if fuzzifier <= 1.0 {
        return Err(Error::Config("fuzzifier must exceed 1".into()));
    }
    for row in distance_matrix {
        if row.iter().any(|&d| d < 0.0 || !d.is_finite()) {
            return Err(Error::Domain(
                "distances must be finite and non-negative".into(),
            ));
        }
    }
    Ok(distance_matrix
        .iter()
        .map(|row| membership_row(row, fuzzifier))
        .collect())
}

/// Computes the mass-weighted centers `v_i = sum u^m x / sum u^m`.
///
/// Returns the centers together with the indices of clusters whose total
/// mass is zero; those centers come back as zero vectors and callers decide
/// how to recover (the driver re-seeds them to random data points).
pub fn update_centers(
    data: &[Vec<f64>],
    memberships: &[Vec<f64>],
    fuzzifier: f64,
) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    if data.len() != memberships.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} data rows vs {} membership rows",
            data.len(),
            memberships.len()
        )));
    }
    let dim = data.first().map(|x| x.len()).unwrap_or(0);
    check_rows_share_width(data, dim, "data")?;
    let clusters = memberships.first().map(|u| u.len()).unwrap_or(0);
    check_rows_share_width(memberships, clusters, "membership")?;

    let mut numerators = vec![vec![0.0; dim]; clusters];
    let mut masses = vec![0.0; clusters];
    for (x, u_row) in data.iter().zip(memberships) {
        for (i, &u) in u_row.iter().enumerate() {
            let w = u.powf(fuzzifier);
            masses[i] += w;
            for (j, &xj) in x.iter().enumerate() {
                numerators[i][j] += w * xj;
            }
        }
    }
    let mut empty = Vec::new();
    let centers = numerators
        .into_iter()
        .enumerate()
        .map(|(i, mut numerator)| {
            if masses[i] > 0.0 {
                for v in &mut numerator {
                    *v /= masses[i];
                }
            } else {
                empty.push(i);
            }
            numerator
        })
        .collect();
    Ok((centers, empty))
}

/// The clustering objective `sum_i sum_k u_ik^m ||x_k - v_i||^2`.
pub fn objective(
    data: &[Vec<f64>],
    memberships: &[Vec<f64>],
    centers: &[Vec<f64>],
    fuzzifier: f64,
) -> Result<f64> {
    let d = distances(data, centers)?;
    if d.len() != memberships.len()
        || d.first().map(|r| r.len()) != memberships.first().map(|r| r.len())
    {
        return Err(Error::ShapeMismatch(
            "membership matrix does not match data and centers".into(),
        ));
    }
    let mut total = 0.0;
    for (d_row, u_row) in d.iter().zip(memberships) {
        for (&dist, &u) in d_row.iter().zip(u_row) {
            total += u.powf(fuzzifier) * dist * dist;
        }
    }
    Ok(total)
}

/// The report variant: membership-weighted sum of unsquared distances
/// `sum_i sum_k u_ik d_ik`.
pub fn intra_cluster_distance_sum(
    data: &[Vec<f64>],
    memberships: &[Vec<f64>],
    centers: &[Vec<f64>],
) -> Result<f64> {
    let d = distances(data, centers)?;
    if d.len() != memberships.len()
        || d.first().map(|r| r.len()) != memberships.first().map(|r| r.len())
    {
        return Err(Error::ShapeMismatch(
            "membership matrix does not match data and centers".into(),
        ));
    }
    let mut total = 0.0;
    for (d_row, u_row) in d.iter().zip(memberships) {
        for (&dist, &u) in d_row.iter().zip(u_row) {
            total += u * dist;
        }
    }
    Ok(total)
}

/// Runs the clustering from `config.num_clusters` distinct seeded-random
/// data points.
pub fn run_fcm(data: &[Vec<f64>], config: &FcmConfig) -> Result<FcmState> {
    config.validate()?;
    if data.len() < config.num_clusters {
        return Err(Error::InsufficientData(format!(
            "{} samples for {} clusters",
            data.len(),
            config.num_clusters
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let picks = rand::seq::index::sample(&mut rng, data.len(), config.num_clusters);
    let centers: Vec<Vec<f64>> = picks.iter().map(|i| data[i].clone()).collect();
    run_loop(data, centers, config, &mut rng)
}

/// Runs the clustering from explicit initial centers; used for fixed-point
/// and equivariance checks.
pub fn run_fcm_from_centers(
    data: &[Vec<f64>],
    initial_centers: Vec<Vec<f64>>,
    config: &FcmConfig,
) -> Result<FcmState> {
    config.validate()?;
    if initial_centers.len() != config.num_clusters {
        return Err(Error::ShapeMismatch(format!(
            "{} initial centers for {} clusters",
            initial_centers.len(),
            config.num_clusters
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    run_loop(data, initial_centers, config, &mut rng)
}

fn run_loop(
    data: &[Vec<f64>],
    mut centers: Vec<Vec<f64>>,
    config: &FcmConfig,
    rng: &mut ChaCha8Rng,
) -> Result<FcmState> {
    let mut memberships = Vec::new();
    let mut history = Vec::new();
    let mut reseeded = Vec::new();
    let mut converged = false;
    let mut iterations_run = 0;

    for iteration in 1..=config.max_iterations {
        iterations_run = iteration;
        let d = distances(data, &centers)?;
        memberships = update_memberships(&d, config.fuzzifier)?;
        let (new_centers, empty) = update_centers(data, &memberships, config.fuzzifier)?;
        centers = new_centers;
        for cluster in empty {
            centers[cluster] = data[rng.gen_range(0..data.len())].clone();
            reseeded.push(ReseedEvent { iteration, cluster });
        }
        history.push(objective(data, &memberships, &centers, config.fuzzifier)?);
        if history.len() >= 2 {
            let gain = (history[history.len() - 2] - history[history.len() - 1]).abs();
            if gain < config.min_gain {
                converged = true;
                break;
            }
        }
    }

    Ok(FcmState {
        memberships,
        centers,
        objective_history: history,
        iterations_run,
        converged,
        reseeded,
    })
}

// ---------------------------------------------------------------------------
// Per-class clustering
// ---------------------------------------------------------------------------

/// Class-wise cluster centers fit independently on the healthy and sick
/// subsets. Cluster ids are offset so healthy clusters occupy
/// `[0, clusters_per_class)` and sick clusters
/// `[clusters_per_class, 2 * clusters_per_class)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerClassClusterModel {
    pub clusters_per_class: usize,
    pub fuzzifier: f64,
    /// Centers indexed by class (`[healthy, sick]`).
    pub centers: [Vec<Vec<f64>>; 2],
}

impl PerClassClusterModel {
    /// Fits one clustering per class over `samples`. Class labels are set
    /// aside for the fit itself; they only route samples to their class's
    /// run. `class_seeds` seed the `[healthy, sick]` runs.
    pub fn fit(
        samples: &[&Sample],
        clusters_per_class: usize,
        params: &FcmParams,
        class_seeds: [u64; 2],
    ) -> Result<(PerClassClusterModel, Vec<FcmState>)> {
        if clusters_per_class == 0 {
            return Err(Error::Config("clusters_per_class must be at least 1".into()));
        }
        let mut centers: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
        let mut states = Vec::new();
        for class in [ClassLabel::Healthy, ClassLabel::Sick] {
            let subset: Vec<Vec<f64>> = samples
                .iter()
                .filter(|s| s.class_label == class)
                .map(|s| s.pixels.clone())
                .collect();
            if subset.len() < clusters_per_class {
                return Err(Error::InsufficientData(format!(
                    "class `{}` has {} samples for {} clusters",
                    class.dir_name(),
                    subset.len(),
                    clusters_per_class
                )));
            }
            if clusters_per_class == 1 {
                // Degenerate single-cluster fit: every membership is 1 and
                // the center is the subset mean.
                let dim = subset[0].len();
                let mut mean = vec![0.0; dim];
                for x in &subset {
                    for (m, &v) in mean.iter_mut().zip(x) {
                        *m += v;
                    }
                }
                for m in &mut mean {
                    *m /= subset.len() as f64;
                }
                centers[class.index()] = vec![mean.clone()];
                states.push(FcmState {
                    memberships: vec![vec![1.0]; subset.len()],
                    centers: vec![mean],
                    objective_history: Vec::new(),
                    iterations_run: 0,
                    converged: true,
                    reseeded: Vec::new(),
                });
            } else {
                let config = FcmConfig::with_params(
                    clusters_per_class,
                    params,
                    class_seeds[class.index()],
                );
                let state = run_fcm(&subset, &config)?;
                centers[class.index()] = state.centers.clone();
                states.push(state);
            }
        }
        Ok((
            PerClassClusterModel {
                clusters_per_class,
                fuzzifier: params.fuzzifier,
                centers,
            },
            states,
        ))
    }

    /// Membership row of `pixels` under its class's centers.
    pub fn memberships_for(&self, pixels: &[f64], class: ClassLabel) -> Result<Vec<f64>> {
        if self.clusters_per_class == 1 {
            return Ok(vec![1.0]);
        }
        let d = distances(std::slice::from_ref(&pixels.to_vec()), &self.centers[class.index()])?;
        Ok(update_memberships(&d, self.fuzzifier)?.remove(0))
    }

    /// Offset cluster label for `pixels`: argmax membership within its
    /// class, shifted by the class offset.
    pub fn cluster_label(&self, pixels: &[f64], class: ClassLabel) -> Result<usize> {
        let memberships = self.memberships_for(pixels, class)?;
        Ok(class.index() * self.clusters_per_class + argmax(&memberships))
    }

    pub fn num_clusters(&self) -> usize {
        2 * self.clusters_per_class
    }

    /// Binary class implied by an offset cluster id.
    pub fn class_of_cluster(&self, cluster: usize) -> ClassLabel {
        if cluster < self.clusters_per_class {
            ClassLabel::Healthy
        } else {
            ClassLabel::Sick
        }
    }
}

/// Clusters each class independently and attaches offset cluster labels to
/// every sample. `config.num_clusters` is superseded by `clusters_per_class`
/// for the per-class runs; class seeds derive from `config.seed`.
pub fn cluster_dataset_per_class(
    dataset: &Dataset,
    clusters_per_class: usize,
    config: &FcmConfig,
) -> Result<Dataset> {
    let refs: Vec<&Sample> = dataset.samples.iter().collect();
    let params = FcmParams {
        fuzzifier: config.fuzzifier,
        max_iterations: config.max_iterations,
        min_gain: config.min_gain,
    };
    let class_seeds = [
        seeds::derive(config.seed, 0),
        seeds::derive(config.seed, 1),
    ];
    let (model, _) = PerClassClusterModel::fit(&refs, clusters_per_class, &params, class_seeds)?;
    let samples = dataset
        .samples
        .iter()
        .map(|s| {
            Ok(Sample {
                cluster_label: Some(model.cluster_label(&s.pixels, s.class_label)?),
                ..s.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let clustered = Dataset {
        samples,
        num_clusters: Some(model.num_clusters()),
        ..dataset.clone()
    };
    clustered.validate()?;
    Ok(clustered)
}

/// Comparison mode: clusters all samples jointly, ignoring class labels
/// entirely. The resulting cluster ids carry no class alignment.
pub fn cluster_dataset_joint(
    dataset: &Dataset,
    num_clusters: usize,
    config: &FcmConfig,
) -> Result<Dataset> {
    let data: Vec<Vec<f64>> = dataset.samples.iter().map(|s| s.pixels.clone()).collect();
    let run_config = FcmConfig {
        num_clusters,
        ..*config
    };
    let state = run_fcm(&data, &run_config)?;
    let assignments = state.hard_assignments();
    let samples = dataset
        .samples
        .iter()
        .zip(assignments)
        .map(|(s, label)| Sample {
            cluster_label: Some(label),
            ..s.clone()
        })
        .collect();
    let clustered = Dataset {
        samples,
        num_clusters: Some(num_clusters),
        ..dataset.clone()
    };
    clustered.validate()?;
    Ok(clustered)
}
