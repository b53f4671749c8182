//! Synthetic design and workload generation.
//!
//! A generated design is a set of single-bit nets grouped into activity
//! clusters. Workloads draw per-cycle toggles from a shared-latent Bernoulli
//! scheme: each cluster flips one latent coin per cycle, and each member net
//! copies that latent outcome with probability `rho` or redraws
//! independently. Members therefore keep their marginal activity while any
//! two nets of the same cluster correlate at `rho^2`. Ground-truth power is
//! a sparse nonnegative linear function of the toggles plus Gaussian noise.
//!
//! Everything is driven by a counter-mode stream cipher RNG with fixed call
//! order, so a `(config, seed)` pair pins every byte of output across runs
//! and platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{PowerTrace, SignalCatalog, SignalSpec, ToggleMatrix};

/// Multipliers are clamped below at this value so a phase can dim activity
/// but never freeze the design entirely.
pub const MULTIPLIER_FLOOR: f64 = 1e-3;

/// Activity multipliers of the five equal phases of the diverse profile:
/// idle-ish through heavily loaded.
pub const DIVERSE_MULTIPLIERS: [f64; 5] = [0.25, 0.5, 1.0, 1.5, 2.0];

const BASE_ACTIVITY_LO: f64 = 0.05;
const BASE_ACTIVITY_HI: f64 = 0.35;
const NOISE_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Parameters of a synthetic design.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DesignConfig {
    /// Total number of nets.
    pub n_signals: usize,
    /// Number of nets that actually carry power weight.
    pub n_contributors: usize,
    /// Number of activity clusters; net `j` belongs to cluster `j % n_clusters`.
    pub n_clusters: usize,
    /// Probability that a member copies its cluster's latent outcome.
    pub rho: f64,
    pub seed: u64,
}

impl DesignConfig {
    /// The benchmark configuration used throughout the test suite: 2000 nets
    /// in 100 clusters, 50 true contributors, strong intra-cluster
    /// correlation.
    pub fn benchmark(seed: u64) -> Self {
        DesignConfig {
            n_signals: 2000,
            n_contributors: 50,
            n_clusters: 100,
            rho: 0.6,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_signals == 0 {
            return Err(Error::param("design needs at least one signal"));
        }
        if self.n_clusters == 0 || self.n_clusters > self.n_signals {
            return Err(Error::param(format!(
                "cluster count {} must be in 1..={}",
                self.n_clusters, self.n_signals
            )));
        }
        if self.n_contributors == 0 || self.n_contributors > self.n_signals {
            return Err(Error::param(format!(
                "contributor count {} must be in 1..={}",
                self.n_contributors, self.n_signals
            )));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::param(format!("rho {} must be in [0, 1]", self.rho)));
        }
        Ok(())
    }
}

/// A fully materialized synthetic design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Design {
    pub config: DesignConfig,
    pub catalog: SignalCatalog,
    /// Cluster index per net.
    pub cluster_map: Vec<usize>,
    /// Per-cluster baseline toggle probability (at multiplier 1).
    pub base_activity: Vec<f64>,
    /// Sorted indices of the nets that carry power weight.
    pub support: Vec<usize>,
    /// Weight per support entry, one decade of dynamic range.
    pub weights: Vec<f64>,
}

impl Design {
    /// Dense ground-truth weight vector over all nets.
    pub fn true_weight_vector(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.config.n_signals];
        for (&j, &wj) in self.support.iter().zip(&self.weights) {
            w[j] = wj;
        }
        w
    }

    /// Expected per-cycle power at multiplier 1 — the scale that noise is
    /// calibrated against.
    pub fn expected_mean_power(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(&j, &w)| w * self.base_activity[self.cluster_map[j]])
            .sum()
    }
}

/// Materialize a design from its configuration. RNG call order: one uniform
/// per cluster baseline, then one uniform per contributor weight.
pub fn gen_design(config: &DesignConfig) -> Result<Design> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let base_activity: Vec<f64> = (0..config.n_clusters)
        .map(|_| BASE_ACTIVITY_LO + (BASE_ACTIVITY_HI - BASE_ACTIVITY_LO) * rng.random::<f64>())
        .collect();

    // Contributors round-robin across clusters so no cluster hoards weight.
    // With nets assigned to cluster j % n_clusters, taking member
    // k / n_clusters of cluster k % n_clusters is exactly net k, so the
    // support is the first n_contributors nets.
    let support: Vec<usize> = (0..config.n_contributors).collect();

    let weights: Vec<f64> = (0..config.n_contributors)
        .map(|_| 10f64.powf(rng.random::<f64>()))
        .collect();

    let catalog = SignalCatalog::new(
        (0..config.n_signals)
            .map(|j| SignalSpec::single_bit(format!("sig_{j}")))
            .collect(),
    )?;
    let cluster_map = (0..config.n_signals).map(|j| j % config.n_clusters).collect();

    Ok(Design {
        config: config.clone(),
        catalog,
        cluster_map,
        base_activity,
        support,
        weights,
    })
}

/// Workload shape over time.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum WorkloadProfile {
    /// Constant activity at the design baselines.
    Uniform,
    /// Five equal phases sweeping [`DIVERSE_MULTIPLIERS`], idle to stressed.
    Diverse,
    /// Custom equal phases with explicit multipliers.
    Phases { multipliers: Vec<f64> },
}

impl WorkloadProfile {
    fn multipliers(&self) -> Result<Vec<f64>> {
        let m = match self {
            WorkloadProfile::Uniform => vec![1.0],
            WorkloadProfile::Diverse => DIVERSE_MULTIPLIERS.to_vec(),
            WorkloadProfile::Phases { multipliers } => {
                if multipliers.is_empty() {
                    return Err(Error::param("phase profile needs at least one multiplier"));
                }
                if multipliers.iter().any(|m| !m.is_finite() || *m < 0.0) {
                    return Err(Error::param("phase multipliers must be finite and nonnegative"));
                }
                multipliers.clone()
            }
        };
        Ok(m.into_iter().map(|m| m.max(MULTIPLIER_FLOOR)).collect())
    }
}

/// Draw a toggle matrix for `n_cycles` cycles of the given profile. Cycle 0
/// is always all-zero, matching what change-detection against a reference
/// snapshot produces. RNG call order per remaining cycle: one uniform per
/// cluster latent, then per net one copy-decision uniform plus, when the net
/// redraws, one more uniform.
pub fn gen_workload(
    design: &Design,
    n_cycles: usize,
    profile: &WorkloadProfile,
    seed: u64,
) -> Result<ToggleMatrix> {
    let multipliers = profile.multipliers()?;
    let n_phases = multipliers.len();
    let m = design.config.n_signals;
    let n_clusters = design.config.n_clusters;
    let rho = design.config.rho;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut matrix = ToggleMatrix::new(n_cycles, m);
    let mut latents = vec![false; n_clusters];
    let mut probs = vec![0.0; n_clusters];
    for i in 1..n_cycles {
        let phase = i * n_phases / n_cycles;
        let mult = multipliers[phase];
        for c in 0..n_clusters {
            probs[c] = (design.base_activity[c] * mult).clamp(0.0, 1.0);
            latents[c] = rng.random::<f64>() < probs[c];
        }
        let row = matrix.row_words_mut(i);
        for j in 0..m {
            let c = design.cluster_map[j];
            let bit = if rng.random::<f64>() < rho {
                latents[c]
            } else {
                rng.random::<f64>() < probs[c]
            };
            if bit {
                row[j / 64] |= 1u64 << (j % 64);
            }
        }
    }
    Ok(matrix)
}

/// Ground-truth power labels for a toggle matrix drawn from `design`:
/// the sparse weighted toggle sum plus Gaussian noise whose standard
/// deviation is `noise_frac` of the design's expected mean power. The noise
/// stream is salted so it never aliases the workload stream of the same seed.
pub fn gen_power_labels(
    design: &Design,
    matrix: &ToggleMatrix,
    noise_frac: f64,
    seed: u64,
) -> Result<PowerTrace> {
    if matrix.n_signals() != design.config.n_signals {
        return Err(Error::param(format!(
            "matrix has {} signals, design has {}",
            matrix.n_signals(),
            design.config.n_signals
        )));
    }
    if !(0.0..=10.0).contains(&noise_frac) {
        return Err(Error::param(format!("noise fraction {noise_frac} out of range")));
    }
    let sigma = noise_frac * design.expected_mean_power();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ NOISE_SEED_SALT);
    let mut values = Vec::with_capacity(matrix.n_cycles());
    for i in 0..matrix.n_cycles() {
        let mut p = 0.0;
        for (&j, &w) in design.support.iter().zip(&design.weights) {
            if matrix.get(i, j) {
                p += w;
            }
        }
        if sigma > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            p += sigma * z;
        }
        values.push(p);
    }
    PowerTrace::new(values)
}

/// Evenly spaced cycle indices for subsampled measurement: `n_samples`
/// strictly increasing positions covering `[0, n_cycles)`.
pub fn uniform_subsample(n_cycles: usize, n_samples: usize) -> Result<Vec<usize>> {
    if n_samples == 0 || n_samples > n_cycles {
        return Err(Error::param(format!(
            "cannot take {n_samples} samples from {n_cycles} cycles"
        )));
    }
    Ok((0..n_samples).map(|i| i * n_cycles / n_samples).collect())
}
