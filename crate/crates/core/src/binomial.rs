//! Exact binomial distribution evaluation and finite-range certification of
//! the lower-tail bounds the witness construction relies on: the fair-coin
//! tail (>= 1/8), the general lower tail (>= 3/160), and the intermediate
//! estimates used to derive them.
//!
//! Two backends: a log-space float path with compensated summation (default),
//! and an exact big-integer path used whenever a certificate's margin is too
//! small to trust float round-off.

use std::sync::{Arc, OnceLock, RwLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower bound certified for the fair-coin tail.
pub const FAIR_COIN_TAIL_BOUND: f64 = 1.0 / 8.0;
/// Lower bound certified for the general lower tail.
pub const LOWER_TAIL_BOUND: f64 = 3.0 / 160.0;
/// Upper bound certified for the probability mass at the ceiling of the mean.
pub const MODE_PROBABILITY_BOUND: f64 = 0.35;

/// Certificates with a float margin below this are re-decided exactly.
const EXACT_FALLBACK_MARGIN: f64 = 1e-6;

/// Hard cap on the cached log-factorial table.
const MAX_TABLE_N: u64 = 1 << 22;

#[derive(Debug, Error)]
pub enum BinomialError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

// ---------------------------------------------------------------------------
// Float backend: log-space pmf/cdf over a shared compensated ln-factorial table
// ---------------------------------------------------------------------------

struct LnFactState {
    values: Arc<Vec<f64>>, // values[k] = ln(k!)
    sum: f64,
    comp: f64, // Neumaier carry, persisted so growth continues the same sum
}

static LN_FACT: OnceLock<RwLock<LnFactState>> = OnceLock::new();

fn ln_fact_table(min_len: usize) -> Arc<Vec<f64>> {
    let lock = LN_FACT.get_or_init(|| {
        RwLock::new(LnFactState {
            values: Arc::new(vec![0.0]),
            sum: 0.0,
            comp: 0.0,
        })
    });
    {
        let guard = lock.read().unwrap();
        if guard.values.len() >= min_len {
            return guard.values.clone();
        }
    }
    let mut guard = lock.write().unwrap();
    if guard.values.len() < min_len {
        let mut values = (*guard.values).clone();
        let (mut sum, mut comp) = (guard.sum, guard.comp);
        while values.len() < min_len {
            let x = (values.len() as f64).ln();
            let t = sum + x;
            if sum.abs() >= x.abs() {
                comp += (sum - t) + x;
            } else {
                comp += (x - t) + sum;
            }
            sum = t;
            values.push(sum + comp);
        }
        guard.values = Arc::new(values);
        guard.sum = sum;
        guard.comp = comp;
    }
    guard.values.clone()
}

fn validate(n: u64, p: f64, k: u64) -> Result<(), BinomialError> {
    if k > n {
        return Err(BinomialError::InvalidArgument(format!(
            "k = {k} out of range 0..={n}"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(BinomialError::InvalidArgument(format!(
            "p = {p} out of [0,1]"
        )));
    }
    if n > MAX_TABLE_N {
        return Err(BinomialError::InvalidArgument(format!(
            "n = {n} exceeds supported maximum {MAX_TABLE_N}"
        )));
    }
    Ok(())
}

fn ln_binomial(table: &[f64], n: u64, k: u64) -> f64 {
    table[n as usize] - table[k as usize] - table[(n - k) as usize]
}

fn pmf_with(table: &[f64], n: u64, p: f64, k: u64) -> f64 {
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    (ln_binomial(table, n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()).exp()
}

fn cdf_with(table: &[f64], n: u64, p: f64, k: u64) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for j in 0..=k {
        let x = pmf_with(table, n, p, j);
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `Pr[X = k]` for `X ~ Bin(n, p)`, accurate to relative error ~1e-12 at
/// desk-scale `n`.
pub fn pmf(n: u64, p: f64, k: u64) -> Result<f64, BinomialError> {
    validate(n, p, k)?;
    let table = ln_fact_table(n as usize + 1);
    Ok(pmf_with(&table, n, p, k))
}

/// `Pr[X <= k]` via compensated summation of the pmf.
pub fn cdf(n: u64, p: f64, k: u64) -> Result<f64, BinomialError> {
    validate(n, p, k)?;
    let table = ln_fact_table(n as usize + 1);
    Ok(cdf_with(&table, n, p, k))
}

/// Smallest `k` with `Pr[X <= k] >= 1/2`.
pub fn lower_median(n: u64, p: f64) -> Result<u64, BinomialError> {
    validate(n, p, 0)?;
    let table = ln_fact_table(n as usize + 1);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for k in 0..=n {
        let x = pmf_with(&table, n, p, k);
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        if sum + comp >= 0.5 {
            return Ok(k);
        }
    }
    Ok(n)
}

// ---------------------------------------------------------------------------
// Exact backend: big-integer tail comparisons for rational p
// ---------------------------------------------------------------------------

mod exact {
    use num_bigint::BigUint;

    fn pow(base: &BigUint, mut exp: u64) -> BigUint {
        let mut acc = BigUint::from(1u32);
        let mut sq = base.clone();
        while exp > 0 {
            if exp & 1 == 1 {
                acc *= &sq;
            }
            exp >>= 1;
            if exp > 0 {
                sq = &sq * &sq;
            }
        }
        acc
    }

    /// Numerator of `Pr[X <= t]` over the denominator `p_den^n`,
    /// i.e. `sum_{k<=t} C(n,k) p_num^k (p_den-p_num)^(n-k)`.
    fn tail_numerator(n: u64, p_num: u64, p_den: u64, t: u64) -> BigUint {
        let a = BigUint::from(p_num);
        let c = BigUint::from(p_den - p_num);
        let mut term = pow(&c, n); // k = 0
        let mut sum = term.clone();
        for k in 0..t.min(n) {
            term *= n - k;
            term /= k + 1;
            term *= &a;
            term /= &c;
            sum += &term;
        }
        sum
    }

    /// Exact decision of `Pr[X <= t] >= bound_num/bound_den` for
    /// `X ~ Bin(n, p_num/p_den)`.
    pub fn tail_at_least(
        n: u64,
        p_num: u64,
        p_den: u64,
        t: i64,
        bound_num: u64,
        bound_den: u64,
    ) -> bool {
        assert!(p_den > 0 && p_num <= p_den && bound_den > 0);
        if t < 0 {
            return bound_num == 0;
        }
        let t = (t as u64).min(n);
        if p_num == p_den {
            // X = n surely
            return if t >= n { true } else { bound_num == 0 };
        }
        let sum = tail_numerator(n, p_num, p_den, t);
        sum * bound_den >= pow(&BigUint::from(p_den), n) * bound_num
    }

    /// Exact decision of `Pr[X = t] <= bound_num/bound_den`.
    pub fn pmf_at_most(
        n: u64,
        p_num: u64,
        p_den: u64,
        t: u64,
        bound_num: u64,
        bound_den: u64,
    ) -> bool {
        assert!(p_den > 0 && p_num <= p_den && bound_den > 0 && t <= n);
        if p_num == p_den {
            let mass_is_one = t == n;
            return !mass_is_one || bound_num >= bound_den;
        }
        let a = BigUint::from(p_num);
        let c = BigUint::from(p_den - p_num);
        let mut term = pow(&c, n);
        for k in 0..t {
            term *= n - k;
            term /= k + 1;
            term *= &a;
            term /= &c;
        }
        term * bound_den <= pow(&BigUint::from(p_den), n) * bound_num
    }

}

/// Largest integer `k` with `k <= pn - sqrt(pn)/2` for rational `p`, decided
/// in exact integer arithmetic; `-1` when the cutoff is negative (which is
/// exactly the case `pn < 1/4`).
fn exact_cutoff(n: u64, p_num: u64, p_den: u64) -> i64 {
    let a = n as i128 * p_num as i128;
    let b = p_den as i128;
    // k <= pn - sqrt(pn)/2  <=>  a - bk >= 0  and  4(a - bk)^2 >= ab
    let at_or_below = |k: i128| -> bool {
        let d = a - b * k;
        d >= 0 && 4 * d * d >= a * b
    };
    let pn = n as f64 * (p_num as f64 / p_den as f64);
    let mut k = (pn - pn.sqrt() / 2.0).floor() as i128;
    k = k.clamp(-1, n as i128);
    while at_or_below(k + 1) {
        k += 1;
    }
    while k >= 0 && !at_or_below(k) {
        k -= 1;
    }
    k as i64
}

/// `Pr[X <= n/2 - (1/2)sqrt(n/2)]` for `X ~ Bin(n, 1/2)`.
pub fn coin_tail(n: u64) -> Result<f64, BinomialError> {
    let cutoff = exact_cutoff(n, 1, 2);
    if cutoff < 0 {
        return Ok(0.0);
    }
    cdf(n, 0.5, (cutoff as u64).min(n))
}

/// `Pr[X <= pn - sqrt(pn)/2]` for `X ~ Bin(n, p)`; zero when the cutoff is
/// negative.
pub fn lprob_tail(n: u64, p: f64) -> Result<f64, BinomialError> {
    if n == 0 {
        return Err(BinomialError::InvalidArgument("n must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(BinomialError::InvalidArgument(format!(
            "p = {p} out of [0,1]"
        )));
    }
    let pn = n as f64 * p;
    let cutoff = (pn - pn.sqrt() / 2.0).floor();
    if cutoff < 0.0 {
        return Ok(0.0);
    }
    cdf(n, p, (cutoff as u64).min(n))
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

/// One lower-tail evaluation point: `X ~ Bin(n, p_num/p_den)`, event
/// `X <= floor(threshold)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinomialQuery {
    pub n: u64,
    pub p_num: u64,
    pub p_den: u64,
    /// Real cutoff `pn - sqrt(pn)/2`.
    pub threshold: f64,
    /// `floor(threshold)` decided in exact integer arithmetic; -1 when the
    /// event is empty.
    pub cutoff: i64,
}

impl BinomialQuery {
    fn new(n: u64, p_num: u64, p_den: u64) -> Self {
        let pn = n as f64 * (p_num as f64 / p_den as f64);
        Self {
            n,
            p_num,
            p_den,
            threshold: pn - pn.sqrt() / 2.0,
            cutoff: exact_cutoff(n, p_num, p_den),
        }
    }

    pub fn p(&self) -> f64 {
        self.p_num as f64 / self.p_den as f64
    }
}

/// Outcome of checking one query's tail probability against its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateEntry {
    pub query: BinomialQuery,
    pub tail_prob: f64,
    pub bound: f64,
    pub holds: bool,
}

impl CertificateEntry {
    pub fn margin(&self) -> f64 {
        self.tail_prob - self.bound
    }

    fn decide(table: &[f64], query: BinomialQuery, bound_num: u64, bound_den: u64) -> Self {
        let bound = bound_num as f64 / bound_den as f64;
        let tail_prob = if query.cutoff < 0 {
            0.0
        } else {
            cdf_with(
                table,
                query.n,
                query.p(),
                (query.cutoff as u64).min(query.n),
            )
        };
        let holds = if (tail_prob - bound).abs() < EXACT_FALLBACK_MARGIN {
            exact::tail_at_least(
                query.n,
                query.p_num,
                query.p_den,
                query.cutoff,
                bound_num,
                bound_den,
            )
        } else {
            tail_prob >= bound
        };
        Self {
            query,
            tail_prob,
            bound,
            holds,
        }
    }
}

/// Aggregate over a certificate sweep: counts, the tightest margin, and the
/// query attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub total: usize,
    pub holding: usize,
    pub all_hold: bool,
    pub min_margin: Option<f64>,
    pub argmin: Option<BinomialQuery>,
}

impl CertificateSummary {
    pub fn from_entries(entries: &[CertificateEntry]) -> Self {
        let holding = entries.iter().filter(|e| e.holds).count();
        let tightest = entries
            .iter()
            .min_by(|a, b| a.margin().partial_cmp(&b.margin()).unwrap());
        Self {
            total: entries.len(),
            holding,
            all_hold: holding == entries.len(),
            min_margin: tightest.map(CertificateEntry::margin),
            argmin: tightest.map(|e| e.query.clone()),
        }
    }
}

/// A named certificate sweep bundled with its aggregate, ready for emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub name: String,
    pub entries: Vec<CertificateEntry>,
    pub summary: CertificateSummary,
}

impl CertificateReport {
    pub fn new(name: impl Into<String>, entries: Vec<CertificateEntry>) -> Self {
        let summary = CertificateSummary::from_entries(&entries);
        Self {
            name: name.into(),
            entries,
            summary,
        }
    }

    pub fn all_hold(&self) -> bool {
        self.summary.all_hold
    }
}

/// Checks `Pr[X <= n/2 - (1/2)sqrt(n/2)] >= 1/8` for `X ~ Bin(n, 1/2)` and
/// every `n` up to `n_max`, entries ordered by `n`.
pub fn certify_lcoin(n_max: u64) -> Vec<CertificateEntry> {
    let table = ln_fact_table(n_max as usize + 1);
    (0..=n_max)
        .into_par_iter()
        .map(|n| CertificateEntry::decide(&table, BinomialQuery::new(n, 1, 2), 1, 8))
        .collect()
}

/// `p` values checked for a given `n`: every `m/n` with `1 <= m <= n/4`
/// (so both endpoints `1/n` and, when `4 | n`, `1/4` are hit exactly), plus
/// `1/4` appended when `4` does not divide `n`.
fn lower_tail_grid(n: u64) -> Vec<(u64, u64)> {
    let mut grid: Vec<(u64, u64)> = (1..=n / 4).map(|m| (m, n)).collect();
    if !n.is_multiple_of(4) {
        grid.push((1, 4));
    }
    grid
}

/// Checks `Pr[X <= pn - sqrt(pn)/2] >= 3/160` over the full `p` grid for each
/// `n` in `n_min..=n_max`; `n_min` must be at least 16.
pub fn certify_lprob(n_min: u64, n_max: u64) -> Result<Vec<CertificateEntry>, BinomialError> {
    if n_min < 16 {
        return Err(BinomialError::InvalidArgument(format!(
            "n_min = {n_min} below 16, outside the certified hypothesis"
        )));
    }
    if n_min > n_max {
        return Err(BinomialError::InvalidArgument(format!(
            "empty range {n_min}..={n_max}"
        )));
    }
    let table = ln_fact_table(n_max as usize + 1);
    let per_n: Vec<Vec<CertificateEntry>> = (n_min..=n_max)
        .into_par_iter()
        .map(|n| {
            lower_tail_grid(n)
                .into_iter()
                .map(|(p_num, p_den)| {
                    CertificateEntry::decide(&table, BinomialQuery::new(n, p_num, p_den), 3, 160)
                })
                .collect()
        })
        .collect();
    Ok(per_n.into_concat())
}

trait Concat<T> {
    fn into_concat(self) -> Vec<T>;
}

impl<T> Concat<T> for Vec<Vec<T>> {
    fn into_concat(self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.iter().map(Vec::len).sum());
        for v in self {
            out.extend(v);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Proof-step certification
// ---------------------------------------------------------------------------

/// A single (n, p) case inside the proof-step sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofStepCase {
    pub n: u64,
    pub p_num: u64,
    pub p_den: u64,
}

/// Per-check aggregate. `min_margin` is check-specific slack: log-units for
/// the central-binomial estimate, integer slack for the window count, and
/// probability for the median and mode-mass checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub checked: u64,
    pub violations: u64,
    pub min_margin: Option<f64>,
    pub argmin: Option<ProofStepCase>,
}

impl CheckSummary {
    fn new() -> Self {
        Self {
            checked: 0,
            violations: 0,
            min_margin: None,
            argmin: None,
        }
    }

    fn record(&mut self, case: ProofStepCase, margin: f64, holds: bool) {
        self.checked += 1;
        if !holds {
            self.violations += 1;
        }
        if self.min_margin.is_none_or(|m| margin < m) {
            self.min_margin = Some(margin);
            self.argmin = Some(case);
        }
    }

    fn merge(mut self, other: CheckSummary) -> Self {
        self.checked += other.checked;
        self.violations += other.violations;
        if let Some(m) = other.min_margin {
            if self.min_margin.is_none_or(|own| m < own) {
                self.min_margin = Some(m);
                self.argmin = other.argmin;
            }
        }
        self
    }
}

/// Certification of the intermediate estimates behind the tail bounds:
/// (a) `C(n, floor(n/2)) <= 2^n / sqrt(pi n / 2)` for `n >= 1`;
/// (b) the count of integers within `(1/2)sqrt(n/2)` of `n/2` is at most
///     `sqrt(n/2) + 1` for `n >= 19`;
/// (c) the lower median of `Bin(n, 2p)` is at most `ceil(2pn)`;
/// (d) `Pr[Bin(n, 2p) = ceil(2pn)] <= 0.35`;
/// (c) and (d) sweep the lower-tail `p` grid for `n >= 16`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofStepReport {
    pub n_max: u64,
    pub central_binomial: CheckSummary,
    pub window_count: CheckSummary,
    pub median: CheckSummary,
    pub mode_probability: CheckSummary,
}

impl ProofStepReport {
    pub fn all_hold(&self) -> bool {
        self.central_binomial.violations == 0
            && self.window_count.violations == 0
            && self.median.violations == 0
            && self.mode_probability.violations == 0
    }
}

/// Integers `i >= 0` with `|i - n/2| < (1/2)sqrt(n/2)`, counted exactly:
/// the condition is `2(2i - n)^2 < n`.
fn window_count(n: u64) -> u64 {
    (0..=n)
        .filter(|&i| {
            let d = 2 * i as i128 - n as i128;
            2 * d * d < n as i128
        })
        .count() as u64
}

pub fn certify_proof_steps(n_max: u64) -> Result<ProofStepReport, BinomialError> {
    if n_max < 1 {
        return Err(BinomialError::InvalidArgument("n_max must be >= 1".into()));
    }
    let table = ln_fact_table(n_max as usize + 1);
    let partials: Vec<[CheckSummary; 4]> = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let mut central = CheckSummary::new();
            let mut window = CheckSummary::new();
            let mut median = CheckSummary::new();
            let mut mode = CheckSummary::new();
            let case = |p_num, p_den| ProofStepCase { n, p_num, p_den };

            // (a) central binomial coefficient vs 2^n / sqrt(pi n / 2)
            let lhs = ln_binomial(&table, n, n / 2);
            let rhs = n as f64 * std::f64::consts::LN_2
                - 0.5 * (std::f64::consts::PI * n as f64 / 2.0).ln();
            central.record(case(0, 1), rhs - lhs, lhs <= rhs);

            // (b) window count vs sqrt(n/2) + 1, exactly:
            // A - 1 <= sqrt(n/2)  <=>  2(A-1)^2 <= n
            if n >= 19 {
                let a = window_count(n);
                let slack = n as i128 - 2 * (a as i128 - 1) * (a as i128 - 1);
                window.record(case(0, 1), slack as f64, slack >= 0);
            }

            // (c) + (d) on the doubled grid
            if n >= 16 {
                for (p_num, p_den) in lower_tail_grid(n) {
                    let (q_num, q_den) = (2 * p_num, p_den);
                    let q = q_num as f64 / q_den as f64;
                    let t = (q_num * n).div_ceil(q_den); // ceil(2pn)

                    let cdf_t = cdf_with(&table, n, q, t);
                    let c_margin = cdf_t - 0.5;
                    let c_holds = if c_margin.abs() < EXACT_FALLBACK_MARGIN {
                        exact::tail_at_least(n, q_num, q_den, t as i64, 1, 2)
                    } else {
                        c_margin >= 0.0
                    };
                    median.record(case(p_num, p_den), c_margin, c_holds);

                    let mass = pmf_with(&table, n, q, t);
                    let d_margin = MODE_PROBABILITY_BOUND - mass;
                    let d_holds = if d_margin.abs() < EXACT_FALLBACK_MARGIN {
                        exact::pmf_at_most(n, q_num, q_den, t, 7, 20)
                    } else {
                        d_margin >= 0.0
                    };
                    mode.record(case(p_num, p_den), d_margin, d_holds);
                }
            }
            [central, window, median, mode]
        })
        .collect();

    let mut merged = [
        CheckSummary::new(),
        CheckSummary::new(),
        CheckSummary::new(),
        CheckSummary::new(),
    ];
    for part in partials {
        for (acc, p) in merged.iter_mut().zip(part) {
            *acc = std::mem::replace(acc, CheckSummary::new()).merge(p);
        }
    }
    let [central_binomial, window_count, median, mode_probability] = merged;
    Ok(ProofStepReport {
        n_max,
        central_binomial,
        window_count,
        median,
        mode_probability,
    })
}
