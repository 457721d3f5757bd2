//! Toolkit for lower-bounding the star discrepancy of random point sets.
//!
//! A random `N`-point set in `[0,1]^s` admits, with high probability, an
//! anchored box holding on the order of `sqrt(sN)` points more than its
//! volume predicts. This crate builds such witness boxes constructively,
//! certifies the binomial tail inequalities the construction leans on by
//! exact finite sweeps, computes the exact star discrepancy of small
//! instances as ground truth, and runs reproducible Monte Carlo experiments
//! comparing the observed excess against the certified constants.
//!
//! Modules:
//! - [`geometry`]: point sets, anchored boxes, slabs, counting, excess.
//! - [`witness`]: the sequential shrink construction and its trace verifier.
//! - [`binomial`]: exact pmf/cdf plus lower-tail and proof-step certificates.
//! - [`oracle`]: exact star discrepancy via critical-grid enumeration.
//! - [`experiment`]: seeded trial harness, tail scans, oracle cross-checks.
//! - [`emit`]: JSON/CSV/plot-data report output.

pub mod binomial;
pub mod emit;
pub mod experiment;
pub mod geometry;
pub mod oracle;
pub mod witness;

pub use binomial::{
    certify_lcoin, certify_lprob, certify_proof_steps, BinomialError, BinomialQuery,
    CertificateEntry, CertificateReport, CertificateSummary, ProofStepReport, FAIR_COIN_TAIL_BOUND,
    LOWER_TAIL_BOUND,
};
pub use emit::{emit, Emit, OutputFormat};
pub use experiment::{
    cross_validate, run_experiment, shrink_count_bound, tail_scan, CrossValReport,
    ExperimentConfig, ExperimentError, OutputSpec, SummaryReport, TailScanReport, TrialRecord,
    NORMALIZED_EXCESS_BOUND,
};
pub use geometry::{generate_uniform, trial_seed, AnchoredBox, GeometryError, PointSet, Slab};
pub use oracle::{
    exact_star_discrepancy, one_dim_star_discrepancy, DiscrepancyResult, DiscrepancySide,
    OracleError, DEFAULT_BUDGET,
};
pub use witness::{
    build_witness, shrink_decision, small_s_witness, verify_trace, DecisionRule, StepRecord,
    WitnessError, WitnessMode, WitnessResult,
};
