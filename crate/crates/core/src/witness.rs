//! Sequential witness-box construction: coordinates shrink from 1 to 1-1/s
//! whenever the top slab is point-deficient, yielding a box whose excess
//! certifies a star-discrepancy lower bound, together with a replayable
//! per-step trace and its verifier.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{AnchoredBox, GeometryError, PointSet, Slab};

/// Tolerance for excess comparisons (exact integer counts mixed with float
/// volume products).
pub const EXCESS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum WitnessError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("trace does not match point set: {0}")]
    TraceMismatch(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// How a step decides whether to shrink the current coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    /// Shrink when the slab holds at least `sqrt(N_i/s)/2` points fewer than
    /// expected (tie inclusive). This is the variant with proven guarantees.
    Threshold,
    /// Shrink whenever doing so strictly increases the excess.
    Greedy,
}

impl std::str::FromStr for DecisionRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "threshold" => Ok(Self::Threshold),
            "greedy" => Ok(Self::Greedy),
            other => Err(format!(
                "unknown decision rule {other:?} (expected threshold or greedy)"
            )),
        }
    }
}

impl std::fmt::Display for DecisionRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Threshold => write!(f, "threshold"),
            Self::Greedy => write!(f, "greedy"),
        }
    }
}

/// Which branch produced a witness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessMode {
    /// The sequential construction, used for `4 <= s <= N/4`.
    Main,
    /// Fixed volume-3/4 box for `s < 4`.
    SmallS,
    /// Construction ran on a coordinate projection and the box was re-embedded.
    Projected,
}

/// One step of the construction, enough to replay the decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Step number, 1-based; the constrained axis is `index - 1`.
    pub index: usize,
    /// Points in the box entering this step.
    pub n_prev: usize,
    /// Points in the slab considered for removal.
    pub slab_count: usize,
    /// Expected slab occupancy `n_prev / s`.
    pub expected_slab: f64,
    /// Shrink cutoff `n_prev/s - sqrt(n_prev/s)/2`.
    pub threshold: f64,
    pub shrunk: bool,
    /// Excess of the box after this step.
    pub excess_after: f64,
}

/// Outcome of the construction: the box, its excess, the shrink count `k`,
/// and the full trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessResult {
    #[serde(rename = "box")]
    pub witness_box: AnchoredBox,
    pub excess: f64,
    pub k: usize,
    pub mode: WitnessMode,
    /// Rule the trace was built with (recorded so the verifier knows which
    /// guarantees apply; the small-s branch ignores it).
    pub rule: DecisionRule,
    pub trace: Vec<StepRecord>,
}

fn step_cutoffs(n_prev: usize, s: usize) -> (f64, f64) {
    let expected = n_prev as f64 / s as f64;
    (expected, expected - expected.sqrt() / 2.0)
}

/// Pure decision for one step.
///
/// `Threshold` compares the slab count against `n_prev/s - sqrt(n_prev/s)/2`
/// (tie inclusive). `Greedy` evaluates the excess change algebraically:
/// removing the slab changes the excess by `(n_prev - exc_prev)/s - slab_count`,
/// and the step shrinks iff that is strictly positive.
pub fn shrink_decision(
    n_prev: usize,
    slab_count: usize,
    s: usize,
    rule: DecisionRule,
    exc_prev: f64,
) -> Result<bool, WitnessError> {
    if s == 0 {
        return Err(WitnessError::InvalidArgument(
            "dimension must be >= 1".into(),
        ));
    }
    if slab_count > n_prev {
        return Err(WitnessError::InvalidArgument(format!(
            "slab count {slab_count} exceeds box occupancy {n_prev}"
        )));
    }
    match rule {
        DecisionRule::Threshold => {
            let (_, threshold) = step_cutoffs(n_prev, s);
            Ok(slab_count as f64 <= threshold)
        }
        DecisionRule::Greedy => {
            let gain = (n_prev as f64 - exc_prev) / s as f64 - slab_count as f64;
            Ok(gain > 0.0)
        }
    }
}

/// Runs the construction on `points`, dispatching the small-dimension and
/// high-dimension reductions automatically:
/// `s < 4` evaluates the fixed volume-3/4 box; `s > N/4` projects onto the
/// first `max(1, floor(N/4))` coordinates, runs there, and re-embeds the box
/// with trailing full coordinates (same excess).
pub fn build_witness(points: &PointSet, rule: DecisionRule) -> Result<WitnessResult, WitnessError> {
    if points.n_points() == 0 {
        return Err(WitnessError::InvalidArgument("empty point set".into()));
    }
    let s = points.dim();
    let n = points.n_points();
    if s < 4 {
        return small_s_with_rule(points, rule);
    }
    if 4 * s > n {
        let s_prime = (n / 4).max(1);
        let projected = points.project(s_prime)?;
        let inner = build_witness(&projected, rule)?;
        let mut upper = inner.witness_box.upper().to_vec();
        upper.resize(s, 1.0);
        return Ok(WitnessResult {
            witness_box: AnchoredBox::new(upper)?,
            excess: inner.excess,
            k: inner.k,
            mode: WitnessMode::Projected,
            rule,
            trace: inner.trace,
        });
    }
    build_main(points, rule)
}

fn build_main(points: &PointSet, rule: DecisionRule) -> Result<WitnessResult, WitnessError> {
    let s = points.dim();
    let shrink_to = 1.0 - 1.0 / s as f64;
    let mut upper = vec![1.0; s];
    let mut trace = Vec::with_capacity(s);
    let mut exc_prev = 0.0f64;
    let mut k = 0usize;

    for axis in 0..s {
        let current = AnchoredBox::new(upper.clone())?;
        let n_prev = points.count_closed(&current)?;
        let slab = Slab::new(upper[..axis].to_vec(), shrink_to, 1.0)?;
        let slab_count = points.count_in_slab(&slab)?;
        let (expected_slab, threshold) = step_cutoffs(n_prev, s);

        let shrunk = match rule {
            DecisionRule::Threshold => shrink_decision(n_prev, slab_count, s, rule, exc_prev)?,
            DecisionRule::Greedy => {
                // evaluate the candidate box directly; strict improvement only
                let mut candidate = upper.clone();
                candidate[axis] = shrink_to;
                points.excess(&AnchoredBox::new(candidate)?)? > exc_prev
            }
        };
        if shrunk {
            upper[axis] = shrink_to;
            k += 1;
        }
        let excess_after = points.excess(&AnchoredBox::new(upper.clone())?)?;
        trace.push(StepRecord {
            index: axis + 1,
            n_prev,
            slab_count,
            expected_slab,
            threshold,
            shrunk,
            excess_after,
        });
        exc_prev = excess_after;
    }

    Ok(WitnessResult {
        witness_box: AnchoredBox::new(upper)?,
        excess: exc_prev,
        k,
        mode: WitnessMode::Main,
        rule,
        trace,
    })
}

/// For `s <= 3`, evaluates the fixed box `(3/4, 1, ..., 1)` (volume 3/4) and
/// falls back to the full box when its excess is negative, preserving the
/// nonnegativity contract. The trace is empty and `k` is 0.
pub fn small_s_witness(points: &PointSet) -> Result<WitnessResult, WitnessError> {
    small_s_with_rule(points, DecisionRule::Threshold)
}

fn small_s_with_rule(points: &PointSet, rule: DecisionRule) -> Result<WitnessResult, WitnessError> {
    let s = points.dim();
    if s >= 4 {
        return Err(WitnessError::InvalidArgument(format!(
            "small-dimension witness called with s = {s}"
        )));
    }
    if points.n_points() == 0 {
        return Err(WitnessError::InvalidArgument("empty point set".into()));
    }
    let mut upper = vec![1.0; s];
    upper[0] = 0.75;
    let quarter = AnchoredBox::new(upper)?;
    let excess = points.excess(&quarter)?;
    let (witness_box, excess) = if excess >= 0.0 {
        (quarter, excess)
    } else {
        (AnchoredBox::full(s), 0.0)
    };
    Ok(WitnessResult {
        witness_box,
        excess,
        k: 0,
        mode: WitnessMode::SmallS,
        rule,
        trace: Vec::new(),
    })
}

/// Replays a witness trace against its point set and checks every guarantee
/// the construction makes.
///
/// Counts and decisions are replayed exactly; a disagreement means the trace
/// does not belong to `points` and is an error. The returned boolean covers
/// the mathematical guarantees: nonnegative excess at every step, box
/// occupancy at least `N/4`, unchanged excess on keep steps, and for the
/// threshold rule the per-shrink recursion
/// `exc_after >= (1-1/s)·exc_before + sqrt(N/(16s))` plus the final bound
/// `exc >= k(1-1/s)^k sqrt(N/(16s))`. Greedy traces are instead checked for
/// non-decreasing excess.
pub fn verify_trace(points: &PointSet, result: &WitnessResult) -> Result<bool, WitnessError> {
    match result.mode {
        WitnessMode::Main => verify_main(points, result),
        WitnessMode::SmallS => verify_small_s(points, result),
        WitnessMode::Projected => verify_projected(points, result),
    }
}

fn verify_main(points: &PointSet, result: &WitnessResult) -> Result<bool, WitnessError> {
    let s = points.dim();
    let n = points.n_points();
    if result.witness_box.dim() != s {
        return Err(WitnessError::TraceMismatch(format!(
            "box dimension {} vs point set dimension {s}",
            result.witness_box.dim()
        )));
    }
    if result.trace.len() != s {
        return Err(WitnessError::TraceMismatch(format!(
            "trace has {} steps for dimension {s}",
            result.trace.len()
        )));
    }
    let shrink_to = 1.0 - 1.0 / s as f64;
    let step_gain = (n as f64 / (16.0 * s as f64)).sqrt();
    let mut upper = vec![1.0; s];
    let mut exc_prev = 0.0f64;
    let mut holds = true;

    for (axis, step) in result.trace.iter().enumerate() {
        if step.index != axis + 1 {
            return Err(WitnessError::TraceMismatch(format!(
                "step {} records index {}",
                axis + 1,
                step.index
            )));
        }
        let n_prev = points.count_closed(&AnchoredBox::new(upper.clone())?)?;
        let slab = Slab::new(upper[..axis].to_vec(), shrink_to, 1.0)?;
        let slab_count = points.count_in_slab(&slab)?;
        if n_prev != step.n_prev || slab_count != step.slab_count {
            return Err(WitnessError::TraceMismatch(format!(
                "step {}: replayed counts ({n_prev}, {slab_count}) vs recorded ({}, {})",
                step.index, step.n_prev, step.slab_count
            )));
        }
        let (expected_slab, threshold) = step_cutoffs(n_prev, s);
        if expected_slab != step.expected_slab || threshold != step.threshold {
            return Err(WitnessError::TraceMismatch(format!(
                "step {}: cutoff fields do not replay",
                step.index
            )));
        }
        let decision = match result.rule {
            DecisionRule::Threshold => slab_count as f64 <= threshold,
            DecisionRule::Greedy => {
                let mut candidate = upper.clone();
                candidate[axis] = shrink_to;
                points.excess(&AnchoredBox::new(candidate)?)? > exc_prev
            }
        };
        if decision != step.shrunk {
            return Err(WitnessError::TraceMismatch(format!(
                "step {}: decision replays as {decision}, recorded {}",
                step.index, step.shrunk
            )));
        }
        if step.shrunk {
            upper[axis] = shrink_to;
        }
        let excess_after = points.excess(&AnchoredBox::new(upper.clone())?)?;
        if (excess_after - step.excess_after).abs() > EXCESS_TOLERANCE {
            return Err(WitnessError::TraceMismatch(format!(
                "step {}: excess replays as {excess_after}, recorded {}",
                step.index, step.excess_after
            )));
        }

        holds &= excess_after >= -EXCESS_TOLERANCE;
        holds &= 4 * n_prev >= n;
        if step.shrunk {
            match result.rule {
                DecisionRule::Threshold => {
                    holds &= excess_after
                        >= (1.0 - 1.0 / s as f64) * exc_prev + step_gain - EXCESS_TOLERANCE;
                }
                DecisionRule::Greedy => {
                    holds &= excess_after >= exc_prev - EXCESS_TOLERANCE;
                }
            }
        } else {
            holds &= (excess_after - exc_prev).abs() <= EXCESS_TOLERANCE;
        }
        exc_prev = excess_after;
    }

    if upper != result.witness_box.upper() {
        return Err(WitnessError::TraceMismatch(
            "final box does not replay from trace".into(),
        ));
    }
    let k = result.trace.iter().filter(|r| r.shrunk).count();
    if k != result.k {
        return Err(WitnessError::TraceMismatch(format!(
            "k replays as {k}, recorded {}",
            result.k
        )));
    }
    if (exc_prev - result.excess).abs() > EXCESS_TOLERANCE {
        return Err(WitnessError::TraceMismatch(
            "final excess does not replay".into(),
        ));
    }
    if result.rule == DecisionRule::Threshold {
        let bound = k as f64 * (1.0 - 1.0 / s as f64).powi(k as i32) * step_gain - EXCESS_TOLERANCE;
        holds &= exc_prev >= bound;
    }
    Ok(holds)
}

fn verify_small_s(points: &PointSet, result: &WitnessResult) -> Result<bool, WitnessError> {
    let s = points.dim();
    if s >= 4 || result.witness_box.dim() != s {
        return Err(WitnessError::TraceMismatch(
            "small-s witness dimension mismatch".into(),
        ));
    }
    if !result.trace.is_empty() || result.k != 0 {
        return Err(WitnessError::TraceMismatch(
            "small-s witness must carry an empty trace".into(),
        ));
    }
    let upper = result.witness_box.upper();
    let quarter_box = upper[0] == 0.75 && upper[1..].iter().all(|&c| c == 1.0);
    let full_box = upper.iter().all(|&c| c == 1.0);
    if !quarter_box && !full_box {
        return Err(WitnessError::TraceMismatch(
            "unexpected small-s witness box".into(),
        ));
    }
    let excess = points.excess(&result.witness_box)?;
    if (excess - result.excess).abs() > EXCESS_TOLERANCE {
        return Err(WitnessError::TraceMismatch(
            "small-s excess does not replay".into(),
        ));
    }
    Ok(result.excess >= -EXCESS_TOLERANCE)
}

fn verify_projected(points: &PointSet, result: &WitnessResult) -> Result<bool, WitnessError> {
    let s = points.dim();
    let n = points.n_points();
    if 4 * s <= n {
        return Err(WitnessError::TraceMismatch(
            "projected mode recorded but the dimension needs no reduction".into(),
        ));
    }
    if result.witness_box.dim() != s {
        return Err(WitnessError::TraceMismatch(
            "projected witness dimension mismatch".into(),
        ));
    }
    let s_prime = (n / 4).max(1);
    let upper = result.witness_box.upper();
    if upper[s_prime..].iter().any(|&c| c != 1.0) {
        return Err(WitnessError::TraceMismatch(
            "projected witness must keep trailing coordinates full".into(),
        ));
    }
    // replay against the projection; the re-embedded box has the same excess
    let projected = points.project(s_prime)?;
    let inner = WitnessResult {
        witness_box: AnchoredBox::new(upper[..s_prime].to_vec())?,
        excess: result.excess,
        k: result.k,
        mode: if s_prime < 4 {
            WitnessMode::SmallS
        } else {
            WitnessMode::Main
        },
        rule: result.rule,
        trace: result.trace.clone(),
    };
    let holds = verify_trace(&projected, &inner)?;
    let embedded = points.excess(&result.witness_box)?;
    if (embedded - result.excess).abs() > EXCESS_TOLERANCE {
        return Err(WitnessError::TraceMismatch(
            "re-embedded excess does not replay".into(),
        ));
    }
    Ok(holds)
}
