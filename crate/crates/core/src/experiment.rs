//! Reproducible Monte Carlo harness: runs seeded witness trials, verifies
//! every trace, and aggregates the statistics the theory predicts — the
//! normalized-excess mean against 3/2560 and the shrink count against 3s/160.

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binomial::LOWER_TAIL_BOUND;
use crate::emit::OutputFormat;
use crate::geometry::{generate_uniform, trial_seed, GeometryError};
use crate::oracle::{
    exact_star_discrepancy, one_dim_star_discrepancy, OracleError, DEFAULT_BUDGET,
};
use crate::witness::{build_witness, verify_trace, DecisionRule, WitnessError, EXCESS_TOLERANCE};

/// Certified lower bound on the expected normalized excess `E[exc]/sqrt(sN)`.
pub const NORMALIZED_EXCESS_BOUND: f64 = 3.0 / 2560.0;

/// Lower bound on the expected shrink count for dimension `s`.
pub fn shrink_count_bound(dim: usize) -> f64 {
    LOWER_TAIL_BOUND * dim as f64
}

/// z-quantile for two-sided 99% confidence under the normal approximation.
const Z_99: f64 = 2.575_829_303_548_900_4;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("trial {trial} (seed {seed}) failed trace verification: {detail}")]
    TraceVerification {
        trial: u64,
        seed: u64,
        detail: String,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Witness(#[from] WitnessError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Where a report goes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub format: OutputFormat,
    pub path: PathBuf,
}

/// Full description of one Monte Carlo experiment. This struct is the config
/// file schema; CLI flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_points: usize,
    pub dim: usize,
    pub trials: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_rule")]
    pub rule: DecisionRule,
    #[serde(default)]
    pub outputs: Vec<OutputSpec>,
    /// Factor applied to the `3s/160` shrink-count bound when flagging tail
    /// events; 1/2 by default.
    #[serde(default = "default_tail_factor")]
    pub tail_threshold_factor: f64,
    /// Worker threads; 0 picks the runtime default. Results never depend on
    /// this value.
    #[serde(default)]
    pub parallelism: usize,
}

fn default_rule() -> DecisionRule {
    DecisionRule::Threshold
}

fn default_tail_factor() -> f64 {
    0.5
}

impl ExperimentConfig {
    pub fn new(n_points: usize, dim: usize, trials: u64, base_seed: u64) -> Self {
        Self {
            n_points,
            dim,
            trials,
            base_seed,
            rule: default_rule(),
            outputs: Vec::new(),
            tail_threshold_factor: default_tail_factor(),
            parallelism: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.n_points == 0 || self.dim == 0 || self.trials == 0 {
            return Err(ExperimentError::Config(
                "n_points, dim, and trials must all be >= 1".into(),
            ));
        }
        if self.dim > self.n_points {
            return Err(ExperimentError::Config(format!(
                "dim = {} exceeds n_points = {}; the guarantees need s <= N",
                self.dim, self.n_points
            )));
        }
        if !(self.tail_threshold_factor.is_finite() && self.tail_threshold_factor > 0.0) {
            return Err(ExperimentError::Config(format!(
                "tail_threshold_factor = {} must be positive",
                self.tail_threshold_factor
            )));
        }
        Ok(())
    }

    /// Shrink-count cutoff below which a trial counts as a tail event.
    pub fn tail_event_threshold(&self) -> f64 {
        self.tail_threshold_factor * shrink_count_bound(self.dim)
    }
}

/// The science-relevant part of the config, echoed into reports. Execution
/// details (worker count, output paths) stay in the metadata block so report
/// bytes do not depend on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub n_points: usize,
    pub dim: usize,
    pub trials: u64,
    pub base_seed: u64,
    pub rule: DecisionRule,
    pub tail_threshold_factor: f64,
}

impl From<&ExperimentConfig> for ConfigEcho {
    fn from(c: &ExperimentConfig) -> Self {
        Self {
            n_points: c.n_points,
            dim: c.dim,
            trials: c.trials,
            base_seed: c.base_seed,
            rule: c.rule,
            tail_threshold_factor: c.tail_threshold_factor,
        }
    }
}

/// Non-reproducible run details, kept out of canonical report bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub unix_time_ms: u64,
    pub total_runtime_ms: u64,
    pub workers: usize,
}

impl RunMetadata {
    fn collect(started: Instant, workers: usize) -> Self {
        Self {
            unix_time_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
            total_runtime_ms: started.elapsed().as_millis() as u64,
            workers,
        }
    }
}

/// One witness trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub excess: f64,
    pub k: usize,
    /// `excess / sqrt(s N)`.
    pub normalized_excess: f64,
    /// Whether `k` fell below the configured fraction of `3s/160`.
    pub tail_event: bool,
    /// Wall-clock cost of the trial; informational only and excluded from
    /// serialized reports to keep them byte-deterministic.
    #[serde(skip)]
    pub runtime_ms: u64,
}

/// Aggregated experiment outcome plus the per-trial records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub config: ConfigEcho,
    pub mean_normalized_excess: f64,
    pub median_normalized_excess: f64,
    pub min_normalized_excess: f64,
    pub max_normalized_excess: f64,
    /// Half-width of the 99% confidence interval for the mean normalized
    /// excess (normal approximation).
    pub ci99_half_width: f64,
    pub mean_k: f64,
    /// `3s/160`, the certified lower bound on `E[k]`.
    pub k_bound: f64,
    pub tail_fraction: f64,
    /// `3/2560`, the certified lower bound on the mean normalized excess.
    pub normalized_excess_bound: f64,
    /// Whether the empirical mean clears that bound.
    pub bound_met: bool,
    /// Flags configurations outside the regime the guarantees cover
    /// (`N >= 64` and `4 <= s <= N/4`).
    pub guarantees_apply: bool,
    pub trials: Vec<TrialRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metadata: Option<RunMetadata>,
}

impl SummaryReport {
    /// Copy with the metadata block and per-trial timings removed; two runs
    /// of the same config are byte-identical in this form regardless of
    /// worker count.
    pub fn canonical(&self) -> SummaryReport {
        let mut c = self.clone();
        c.metadata = None;
        for t in &mut c.trials {
            t.runtime_ms = 0;
        }
        c
    }

    pub fn canonical_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(&self.canonical())
    }
}

fn with_pool<T: Send>(
    workers: usize,
    f: impl FnOnce() -> Result<T, ExperimentError> + Send,
) -> Result<T, ExperimentError> {
    if workers == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| ExperimentError::Config(format!("cannot build worker pool: {e}")))?
            .install(f)
    }
}

fn run_trial(config: &ExperimentConfig, trial: u64) -> Result<TrialRecord, ExperimentError> {
    let seed = trial_seed(config.base_seed, trial);
    let started = Instant::now();
    let points = generate_uniform(config.n_points, config.dim, seed)?;
    let witness = build_witness(&points, config.rule)?;
    let verified =
        verify_trace(&points, &witness).map_err(|e| ExperimentError::TraceVerification {
            trial,
            seed,
            detail: e.to_string(),
        })?;
    if !verified {
        return Err(ExperimentError::TraceVerification {
            trial,
            seed,
            detail: "trace inequalities violated".into(),
        });
    }
    let scale = (config.dim as f64 * config.n_points as f64).sqrt();
    Ok(TrialRecord {
        trial_index: trial,
        excess: witness.excess,
        k: witness.k,
        normalized_excess: witness.excess / scale,
        tail_event: (witness.k as f64) < config.tail_event_threshold(),
        runtime_ms: started.elapsed().as_millis() as u64,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v;
        count += 1;
    }
    (if count == 0 { 0.0 } else { sum / count as f64 }, count)
}

fn sample_std(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Runs `config.trials` independent witness trials, each seeded from
/// `(base_seed, trial)`, verifying every trace. The aggregation is an ordered
/// reduction over trial indices, so the report does not depend on worker
/// count or scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SummaryReport, ExperimentError> {
    config.validate()?;
    let started = Instant::now();
    let trials: Vec<TrialRecord> = with_pool(config.parallelism, || {
        (0..config.trials)
            .into_par_iter()
            .map(|t| run_trial(config, t))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let normalized: Vec<f64> = trials.iter().map(|t| t.normalized_excess).collect();
    let (mean_ne, m) = mean(normalized.iter().copied());
    let mut sorted = normalized.clone();
    sorted.sort_by(f64::total_cmp);
    let std = sample_std(&normalized, mean_ne);
    let (mean_k, _) = mean(trials.iter().map(|t| t.k as f64));
    let tail_events = trials.iter().filter(|t| t.tail_event).count();

    let s = config.dim;
    let n = config.n_points;
    let guarantees_apply = n >= 64 && s >= 4 && 4 * s <= n;

    Ok(SummaryReport {
        config: ConfigEcho::from(config),
        mean_normalized_excess: mean_ne,
        median_normalized_excess: median_of_sorted(&sorted),
        min_normalized_excess: sorted[0],
        max_normalized_excess: sorted[sorted.len() - 1],
        ci99_half_width: Z_99 * std / (m as f64).sqrt(),
        mean_k,
        k_bound: shrink_count_bound(s),
        tail_fraction: tail_events as f64 / m as f64,
        normalized_excess_bound: NORMALIZED_EXCESS_BOUND,
        bound_met: mean_ne >= NORMALIZED_EXCESS_BOUND,
        guarantees_apply,
        trials,
        metadata: Some(RunMetadata::collect(started, config.parallelism)),
    })
}

/// One configuration inside a tail scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailScanEntry {
    pub dim: usize,
    pub n_points: usize,
    pub trials: u64,
    /// Shrink-count cutoff defining a tail event.
    pub tail_event_threshold: f64,
    pub tail_fraction: f64,
    pub mean_k: f64,
    pub mean_normalized_excess: f64,
    pub ci99_half_width: f64,
}

/// Tail fractions across dimensions at a fixed `N/s` ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailScanReport {
    pub entries: Vec<TailScanEntry>,
    /// Whether the tail fraction is non-increasing in the dimension — the
    /// qualitative signature of exponential decay.
    pub non_increasing: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metadata: Option<RunMetadata>,
}

/// Runs every config and reports per-config tail fractions plus the
/// monotonicity check. Configs must share the `N/s` ratio.
pub fn tail_scan(configs: &[ExperimentConfig]) -> Result<TailScanReport, ExperimentError> {
    if configs.len() < 2 {
        return Err(ExperimentError::Config(
            "tail scan needs at least two configurations".into(),
        ));
    }
    for c in configs {
        c.validate()?;
    }
    let (n0, s0) = (configs[0].n_points, configs[0].dim);
    for c in &configs[1..] {
        if c.n_points * s0 != n0 * c.dim {
            return Err(ExperimentError::Config(format!(
                "configs must share the N/s ratio: {}/{} vs {n0}/{s0}",
                c.n_points, c.dim
            )));
        }
    }
    let started = Instant::now();
    let mut entries = Vec::with_capacity(configs.len());
    for config in configs {
        let report = run_experiment(config)?;
        entries.push(TailScanEntry {
            dim: config.dim,
            n_points: config.n_points,
            trials: config.trials,
            tail_event_threshold: config.tail_event_threshold(),
            tail_fraction: report.tail_fraction,
            mean_k: report.mean_k,
            mean_normalized_excess: report.mean_normalized_excess,
            ci99_half_width: report.ci99_half_width,
        });
    }
    let mut by_dim: Vec<&TailScanEntry> = entries.iter().collect();
    by_dim.sort_by_key(|e| e.dim);
    let non_increasing = by_dim
        .windows(2)
        .all(|w| w[1].tail_fraction <= w[0].tail_fraction);
    Ok(TailScanReport {
        entries,
        non_increasing,
        metadata: Some(RunMetadata::collect(started, 0)),
    })
}

/// One cross-validation trial: the witness bound next to the exact value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValTrial {
    pub trial_index: u64,
    pub d_star: f64,
    pub excess: f64,
    pub normalized_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValViolation {
    pub trial_index: u64,
    pub seed: u64,
    pub detail: String,
}

/// Witness bounds checked against the exact oracle on small instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValReport {
    pub config: ConfigEcho,
    pub trials: Vec<CrossValTrial>,
    pub violations: Vec<CrossValViolation>,
    /// Mean of `D* · sqrt(N/s)` across trials.
    pub mean_scaled_discrepancy: f64,
    /// Mean of the witness lower bound on the same scale,
    /// `(excess/N) · sqrt(N/s) = excess / sqrt(sN)`.
    pub mean_scaled_witness: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metadata: Option<RunMetadata>,
}

/// Per trial: builds the witness, computes the exact star discrepancy, and
/// checks that `excess/N <= D*` (tolerance 1e-9); in dimension one the grid
/// oracle is additionally checked against the closed-form oracle to 1e-12.
/// Only small dimensions are accepted — the oracle grid must fit the budget.
pub fn cross_validate(config: &ExperimentConfig) -> Result<CrossValReport, ExperimentError> {
    config.validate()?;
    if config.dim > 3 {
        return Err(ExperimentError::Config(format!(
            "cross-validation needs dim <= 3 for the exact oracle, got {}",
            config.dim
        )));
    }
    let started = Instant::now();
    let per_trial: Vec<(CrossValTrial, Option<CrossValViolation>)> =
        with_pool(config.parallelism, || {
            (0..config.trials)
                .into_par_iter()
                .map(|trial| -> Result<_, ExperimentError> {
                    let seed = trial_seed(config.base_seed, trial);
                    let points = generate_uniform(config.n_points, config.dim, seed)?;
                    let witness = build_witness(&points, config.rule)?;
                    if !verify_trace(&points, &witness).map_err(|e| {
                        ExperimentError::TraceVerification {
                            trial,
                            seed,
                            detail: e.to_string(),
                        }
                    })? {
                        return Err(ExperimentError::TraceVerification {
                            trial,
                            seed,
                            detail: "trace inequalities violated".into(),
                        });
                    }
                    let exact = exact_star_discrepancy(&points, DEFAULT_BUDGET)?;
                    let n = config.n_points as f64;
                    let mut violation = None;
                    if witness.excess / n > exact.d_star + EXCESS_TOLERANCE {
                        violation = Some(CrossValViolation {
                            trial_index: trial,
                            seed,
                            detail: format!(
                                "witness bound {} exceeds exact discrepancy {}",
                                witness.excess / n,
                                exact.d_star
                            ),
                        });
                    } else if config.dim == 1 {
                        let formula = one_dim_star_discrepancy(&points)?;
                        if (formula - exact.d_star).abs() > 1e-12 {
                            violation = Some(CrossValViolation {
                                trial_index: trial,
                                seed,
                                detail: format!(
                                    "grid oracle {} disagrees with closed form {formula}",
                                    exact.d_star
                                ),
                            });
                        }
                    }
                    let scale = (config.dim as f64 * n).sqrt();
                    Ok((
                        CrossValTrial {
                            trial_index: trial,
                            d_star: exact.d_star,
                            excess: witness.excess,
                            normalized_excess: witness.excess / scale,
                        },
                        violation,
                    ))
                })
                .collect::<Result<Vec<_>, _>>()
        })?;

    let ratio_scale = (config.n_points as f64 / config.dim as f64).sqrt();
    let trials: Vec<CrossValTrial> = per_trial.iter().map(|(t, _)| t.clone()).collect();
    let violations: Vec<CrossValViolation> = per_trial.into_iter().filter_map(|(_, v)| v).collect();
    let (mean_d, _) = mean(trials.iter().map(|t| t.d_star * ratio_scale));
    let (mean_w, _) = mean(trials.iter().map(|t| t.normalized_excess));
    Ok(CrossValReport {
        config: ConfigEcho::from(config),
        trials,
        violations,
        mean_scaled_discrepancy: mean_d,
        mean_scaled_witness: mean_w,
        metadata: Some(RunMetadata::collect(started, config.parallelism)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_trial_is_reproducible() {
        let config = ExperimentConfig::new(64, 4, 1, 11);
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config).unwrap();
        assert_eq!(a.canonical(), b.canonical());
        assert_eq!(a.trials.len(), 1);
    }

    #[test]
    fn worker_count_does_not_change_the_report() {
        let mut config = ExperimentConfig::new(64, 4, 200, 5);
        config.parallelism = 1;
        let serial = run_experiment(&config).unwrap();
        config.parallelism = 8;
        let parallel = run_experiment(&config).unwrap();
        assert_eq!(serial.canonical(), parallel.canonical());
        assert_eq!(
            serial.canonical_json().unwrap(),
            parallel.canonical_json().unwrap()
        );
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::new(0, 1, 1, 0).validate().is_err());
        assert!(ExperimentConfig::new(16, 1, 0, 0).validate().is_err());
        // s <= N is a hard hypothesis
        assert!(ExperimentConfig::new(8, 9, 1, 0).validate().is_err());
        assert!(ExperimentConfig::new(8, 8, 1, 0).validate().is_ok());
    }

    #[test]
    fn summary_statistics_are_coherent() {
        let config = ExperimentConfig::new(256, 8, 50, 3);
        let report = run_experiment(&config).unwrap();
        assert!(report.min_normalized_excess <= report.median_normalized_excess);
        assert!(report.median_normalized_excess <= report.max_normalized_excess);
        assert!(report.trials.iter().all(|t| t.normalized_excess >= 0.0));
        assert!((0.0..=1.0).contains(&report.tail_fraction));
        assert!(report.guarantees_apply);
        assert_eq!(report.k_bound, 3.0 * 8.0 / 160.0);
    }

    #[test]
    fn small_n_flags_missing_guarantees() {
        let config = ExperimentConfig::new(32, 4, 5, 3);
        let report = run_experiment(&config).unwrap();
        assert!(!report.guarantees_apply);
    }

    #[test]
    fn tail_scan_requires_shared_ratio_and_two_configs() {
        let a = ExperimentConfig::new(512, 8, 10, 1);
        let b = ExperimentConfig::new(1024, 16, 10, 1);
        let bad = ExperimentConfig::new(1000, 16, 10, 1);
        assert!(tail_scan(std::slice::from_ref(&a)).is_err());
        assert!(tail_scan(&[a.clone(), bad]).is_err());
        let report = tail_scan(&[a, b]).unwrap();
        assert_eq!(report.entries.len(), 2);
    }

    #[test]
    fn duplicate_configs_give_equal_fractions() {
        let a = ExperimentConfig::new(512, 8, 20, 9);
        let report = tail_scan(&[a.clone(), a]).unwrap();
        assert_eq!(
            report.entries[0].tail_fraction,
            report.entries[1].tail_fraction
        );
        assert!(report.non_increasing);
    }

    #[test]
    fn cross_validation_small_instances() {
        let config = ExperimentConfig::new(16, 2, 20, 123);
        let report = cross_validate(&config).unwrap();
        assert!(report.violations.is_empty(), "{:?}", report.violations);
        assert_eq!(report.trials.len(), 20);
        assert!(report.mean_scaled_discrepancy >= report.mean_scaled_witness);
    }

    #[test]
    fn cross_validation_rejects_large_dimensions() {
        let config = ExperimentConfig::new(64, 4, 5, 1);
        assert!(matches!(
            cross_validate(&config),
            Err(ExperimentError::Config(_))
        ));
    }

    #[test]
    fn config_json_field_names() {
        let json = r#"{
            "n_points": 64,
            "dim": 4,
            "trials": 3,
            "base_seed": 7,
            "rule": "greedy",
            "outputs": [{"format": "json", "path": "out.json"}],
            "tail_threshold_factor": 0.5,
            "parallelism": 2
        }"#;
        let config: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(config.rule, DecisionRule::Greedy);
        assert_eq!(config.outputs.len(), 1);
        // omitted optional fields take defaults
        let minimal: ExperimentConfig =
            serde_json::from_str(r#"{"n_points": 8, "dim": 2, "trials": 1}"#).unwrap();
        assert_eq!(minimal.rule, DecisionRule::Threshold);
        assert_eq!(minimal.tail_threshold_factor, 0.5);
    }
}
