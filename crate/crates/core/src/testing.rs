//! Tests of equal predictive performance.
//!
//! Score differences are `d_k = S(first, x_k) − S(second, x_k)`, so a
//! positive location favours the second forecast.
//!
//! - [`dm_test`]: Diebold–Mariano t-test with normal critical values.
//! - [`wilcoxon_test`]: one-sided signed-rank test (exact up to 25 nonzero
//!   differences, normal approximation above).
//! - [`np_test`] and [`score_test`]: the randomized test that rejects for
//!   large summed score differences, with critical value and randomization
//!   weight estimated by Monte Carlo under the null density. With the
//!   censored likelihood rule this is the Neyman–Pearson test on the
//!   censored sample space.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::student::std_normal;
use crate::dist::Density;
use crate::error::{Error, Result};
use crate::rng::{domain, stream};
use crate::scores::{PreparedRule, ScoringRule};
use crate::weights::WeightFunction;

/// Minimum number of Monte Carlo draws for a critical value.
pub const MIN_MC_REPS: usize = 1000;
pub const DEFAULT_MC_REPS: usize = 100_000;
const WILCOXON_EXACT_MAX: usize = 25;
/// Absolute values within this relative distance of the first member of a
/// run share a rank. Score differences that agree mathematically often differ
/// in the last few bits, and their ranks should not depend on rounding.
const WILCOXON_TIE_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    FavorFirst,
    FavorSecond,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sided {
    Two,
    /// Alternative: positive location, i.e. the second forecast is better.
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub reject_prob: f64,
    pub direction: Direction,
    pub n_effective: usize,
    pub degenerate: bool,
}

impl TestResult {
    fn degenerate(statistic: f64, n_effective: usize) -> Self {
        TestResult {
            statistic,
            p_value: None,
            reject_prob: 0.0,
            direction: Direction::None,
            n_effective,
            degenerate: true,
        }
    }

    pub fn rejects(&self) -> bool {
        self.reject_prob > 0.0
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn direction_of(v: f64) -> Direction {
    if v > 0.0 {
        Direction::FavorSecond
    } else if v < 0.0 {
        Direction::FavorFirst
    } else {
        Direction::None
    }
}

/// Diebold–Mariano test with `σ̂² = (1/n) Σ (d_k − d̄)²`.
pub fn dm_test(diffs: &[f64], sided: Sided, alpha: f64) -> Result<TestResult> {
    dm_test_lagged(diffs, sided, alpha, 1)
}

/// Diebold–Mariano test for `k`-step-ahead forecasts: the variance adds
/// Bartlett-weighted autocovariances up to lag `k − 1`.
pub fn dm_test_lagged(diffs: &[f64], sided: Sided, alpha: f64, k: usize) -> Result<TestResult> {
    check_alpha(alpha)?;
    let n = diffs.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("dm test needs at least 2 differences, got {n}")));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("forecast horizon must be at least 1".into()));
    }
    if let Some(index) = diffs.iter().position(|d| !d.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let autocov =
        |lag: usize| -> f64 { diffs[lag..].iter().zip(diffs).map(|(a, b)| (a - mean) * (b - mean)).sum::<f64>() / nf };
    let mut var = autocov(0);
    for lag in 1..k.min(n) {
        var += 2.0 * (1.0 - lag as f64 / k as f64) * autocov(lag);
    }
    let scale = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let sd = var.max(0.0).sqrt();
    if sd == 0.0 || sd <= 1e-14 * scale {
        return Ok(TestResult::degenerate(0.0, n));
    }
    let t = nf.sqrt() * mean / sd;
    let (p, critical) = match sided {
        Sided::Two => (2.0 * std_normal::sf(t.abs()), std_normal::isf(alpha / 2.0)),
        Sided::One => (std_normal::sf(t), std_normal::isf(alpha)),
    };
    let reject = match sided {
        Sided::Two => t.abs() > critical,
        Sided::One => t > critical,
    };
    Ok(TestResult {
        statistic: t,
        p_value: Some(p),
        reject_prob: if reject { 1.0 } else { 0.0 },
        direction: direction_of(t),
        n_effective: n,
        degenerate: false,
    })
}

/// One-sided Wilcoxon signed-rank test for positive location.
///
/// Zeros are dropped, tied absolute values (equal up to a relative 1e−9)
/// share their average rank. The statistic is the positive rank sum `W⁺`.
pub fn wilcoxon_test(diffs: &[f64], alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    if let Some(index) = diffs.iter().position(|d| d.is_nan()) {
        return Err(Error::NonFinite { index });
    }
    let mut nz: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        return Ok(TestResult::degenerate(0.0, 0));
    }
    nz.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    // doubled average ranks are integers
    let mut ranks2 = vec![0u64; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && nz[j + 1].abs() - nz[i].abs() <= WILCOXON_TIE_REL * nz[j + 1].abs() {
            j += 1;
        }
        let r2 = (i + 1 + j + 1) as u64;
        for r in &mut ranks2[i..=j] {
            *r = r2;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let w2: u64 = nz.iter().zip(&ranks2).filter(|(d, _)| **d > 0.0).map(|(_, r)| *r).sum();
    let w = w2 as f64 / 2.0;
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let p = if n <= WILCOXON_EXACT_MAX {
        exact_upper_tail(&ranks2, w2)
    } else {
        match normal_upper_tail(n, tie_term, w) {
            Some(p) => p,
            None => return Ok(TestResult::degenerate(w, n)),
        }
    };
    let p = p.clamp(0.0, 1.0);
    Ok(TestResult {
        statistic: w,
        p_value: Some(p),
        reject_prob: if p <= alpha { 1.0 } else { 0.0 },
        direction: direction_of(w - mean),
        n_effective: n,
        degenerate: false,
    })
}

/// Normal approximation to `P(W⁺ ≥ w)` with tie-corrected variance and a
/// continuity correction; `None` when the variance vanishes.
fn normal_upper_tail(n: usize, tie_term: f64, w: f64) -> Option<f64> {
    let nf = n as f64;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    (var > 0.0).then(|| std_normal::sf((w - nf * (nf + 1.0) / 4.0 - 0.5) / var.sqrt()))
}

/// `P(W⁺ ≥ w)` under the symmetric null, by counting sign patterns.
fn exact_upper_tail(ranks2: &[u64], w2: u64) -> f64 {
    let total: u64 = ranks2.iter().sum();
    let mut counts = vec![0.0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            let c = counts[s];
            if c != 0.0 {
                counts[s + r] += c;
            }
        }
        reach += r;
    }
    let all: f64 = counts.iter().sum();
    let tail: f64 = counts[w2 as usize..].iter().sum();
    tail / all
}

/// Null density `p0`, alternative `p1` and region `A` for the randomized
/// score test.
#[derive(Debug, Clone, PartialEq)]
pub struct NpTestSpec {
    pub p0: Density,
    pub p1: Density,
    pub region: WeightFunction,
    pub n: usize,
    pub alpha: f64,
    pub mc_reps: usize,
    pub seed: u64,
}

impl NpTestSpec {
    /// Requires an indicator region with `0 < P₀(A), P₁(A) < 1`. The unit
    /// weight (`A = ℝ`) is admitted as the uncensored likelihood-ratio test.
    pub fn new(p0: Density, p1: Density, region: WeightFunction, n: usize, alpha: f64) -> Result<Self> {
        let spec = NpTestSpec { p0, p1, region, n, alpha, mc_reps: DEFAULT_MC_REPS, seed: 42 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_mc(mut self, mc_reps: usize, seed: u64) -> Self {
        self.mc_reps = mc_reps;
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.n == 0 {
            return Err(Error::InvalidParameter("sample size must be at least 1".into()));
        }
        if !self.region.is_indicator() {
            return Err(Error::InvalidParameter(format!(
                "test region must be an indicator weight, got {}",
                self.region
            )));
        }
        if self.region == WeightFunction::one() {
            return Ok(());
        }
        for (name, p) in [("P0", &self.p0), ("P1", &self.p1)] {
            let m = self.region.mass(p).unwrap_or(0.0);
            if !(m > 0.0 && m < 1.0) {
                return Err(Error::InvalidParameter(format!("{name}(A) must lie strictly between 0 and 1, got {m}")));
            }
        }
        Ok(())
    }

    /// The censored likelihood rule on the spec's region.
    pub fn censored_rule(&self) -> ScoringRule {
        ScoringRule::Csl(self.region)
    }

    fn censored_terms(&self) -> Result<CensoredStatistic> {
        let log_ratio_out = if self.region == WeightFunction::one() {
            0.0
        } else {
            let m0 = self.region.mass(&self.p0)?;
            let m1 = self.region.mass(&self.p1)?;
            (1.0 - m1).ln() - (1.0 - m0).ln()
        };
        Ok(CensoredStatistic { spec: self.clone(), log_ratio_out })
    }
}

/// Censored log-likelihood ratio
/// `Σ [1_A log(p₁/p₀) + 1_{A^c} log(P₁(A^c)/P₀(A^c))]`.
struct CensoredStatistic {
    spec: NpTestSpec,
    log_ratio_out: f64,
}

impl CensoredStatistic {
    fn term(&self, x: f64) -> f64 {
        if self.spec.region.eval(x) == 0.0 {
            return self.log_ratio_out;
        }
        let l1 = self.spec.p1.log_pdf(x);
        let l0 = self.spec.p0.log_pdf(x);
        match (l0 == f64::NEG_INFINITY, l1 == f64::NEG_INFINITY) {
            (true, true) => 0.0,
            _ => l1 - l0,
        }
    }

    fn total(&self, sample: &[f64]) -> f64 {
        sample.iter().map(|&x| self.term(x)).sum()
    }
}

/// `T = Σ log-likelihood ratio terms` on the censored sample space.
pub fn np_statistic(spec: &NpTestSpec, sample: &[f64]) -> Result<f64> {
    Ok(spec.censored_terms()?.total(sample))
}

/// Summed score differences `Σ S(p₀, x_k) − S(p₁, x_k)` for any rule.
pub struct ScoreDifference {
    null: PreparedRule,
    alt: PreparedRule,
}

impl ScoreDifference {
    pub fn new(rule: &ScoringRule, p0: &Density, p1: &Density) -> Result<Self> {
        Ok(ScoreDifference { null: PreparedRule::new(rule, p0, None)?, alt: PreparedRule::new(rule, p1, None)? })
    }

    pub fn diff(&self, x: f64) -> Result<f64> {
        let a = self.null.score(x)?;
        let b = self.alt.score(x)?;
        a.diff(b).ok_or(Error::Indeterminate { index: 0 })
    }

    pub fn total(&self, sample: &[f64]) -> Result<f64> {
        let mut t = 0.0;
        for (index, &x) in sample.iter().enumerate() {
            t += self.diff(x).map_err(|e| match e {
                Error::Indeterminate { .. } => Error::Indeterminate { index },
                other => other,
            })?;
        }
        Ok(t)
    }
}

/// Critical value `c_α` and randomization weight `γ` of the test
/// "reject if `T > c_α`, with probability `γ` if `T = c_α`".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub c_alpha: f64,
    pub gamma: f64,
}

fn tie_tol(c: f64) -> f64 {
    1e-12 * c.abs().max(1.0)
}

fn draw_sample(p: &Density, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| p.sample(rng)).collect()
}

fn mc_critical_value<T>(spec: &NpTestSpec, statistic: T) -> Result<CriticalValue>
where
    T: Fn(&[f64]) -> Result<f64> + Sync,
{
    spec.validate()?;
    if spec.mc_reps < MIN_MC_REPS {
        return Err(Error::Config(format!(
            "mc_reps must be at least {MIN_MC_REPS} for a stable quantile, got {}",
            spec.mc_reps
        )));
    }
    let draws: Vec<Result<f64>> = (0..spec.mc_reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(spec.seed, domain::CRITICAL_VALUE, i);
            statistic(&draw_sample(&spec.p0, spec.n, &mut rng))
        })
        .collect();
    let mut values = draws.into_iter().collect::<Result<Vec<f64>>>()?;
    values.sort_by(f64::total_cmp);
    Ok(critical_from_sorted(&values, spec.alpha))
}

/// Order-statistic quantile `T_(⌈(1−α)M⌉)` and the `γ` that makes the
/// rejection rate on the sample exactly `α`.
fn critical_from_sorted(sorted: &[f64], alpha: f64) -> CriticalValue {
    let m = sorted.len();
    let k = (((1.0 - alpha) * m as f64).ceil() as usize).clamp(1, m);
    let c = sorted[k - 1];
    let tol = tie_tol(c);
    let at_or_below = sorted.partition_point(|&t| t <= c + tol) as f64 / m as f64;
    let below = sorted.partition_point(|&t| t < c - tol) as f64 / m as f64;
    let atom = at_or_below - below;
    let gamma = if atom > 0.0 { ((alpha - (1.0 - at_or_below)) / atom).clamp(0.0, 1.0) } else { 0.0 };
    CriticalValue { c_alpha: c, gamma }
}

/// Monte Carlo critical value of the censored likelihood-ratio test.
pub fn np_critical_value(spec: &NpTestSpec) -> Result<CriticalValue> {
    let stat = spec.censored_terms()?;
    mc_critical_value(spec, |s| Ok(stat.total(s)))
}

/// Monte Carlo critical value of the score test built from `rule`.
pub fn score_critical_value(rule: &ScoringRule, spec: &NpTestSpec) -> Result<CriticalValue> {
    let stat = ScoreDifference::new(rule, &spec.p0, &spec.p1)?;
    mc_critical_value(spec, |s| stat.total(s))
}

fn randomized_decision(t: f64, cv: CriticalValue) -> TestResult {
    let tol = tie_tol(cv.c_alpha);
    let reject_prob = if t > cv.c_alpha + tol {
        1.0
    } else if (t - cv.c_alpha).abs() <= tol {
        cv.gamma
    } else {
        0.0
    };
    TestResult {
        statistic: t,
        p_value: None,
        reject_prob,
        direction: if reject_prob > 0.0 { Direction::FavorSecond } else { Direction::None },
        n_effective: 0,
        degenerate: false,
    }
}

/// Censored Neyman–Pearson test of `H₀: p 1_A = p₀ 1_A`.
pub fn np_test(sample: &[f64], spec: &NpTestSpec, cv: CriticalValue) -> Result<TestResult> {
    if sample.len() != spec.n {
        return Err(Error::LengthMismatch { left: sample.len(), right: spec.n });
    }
    let t = np_statistic(spec, sample)?;
    Ok(TestResult { n_effective: sample.len(), ..randomized_decision(t, cv) })
}

/// Randomized test on the summed score differences of `rule`.
pub fn score_test(rule: &ScoringRule, sample: &[f64], spec: &NpTestSpec, cv: CriticalValue) -> Result<TestResult> {
    if sample.len() != spec.n {
        return Err(Error::LengthMismatch { left: sample.len(), right: spec.n });
    }
    let t = ScoreDifference::new(rule, &spec.p0, &spec.p1)?.total(sample)?;
    Ok(TestResult { n_effective: sample.len(), ..randomized_decision(t, cv) })
}

/// Test whose power is estimated by [`power_estimate`].
#[derive(Debug, Clone, PartialEq)]
pub enum PowerTest {
    /// Censored likelihood-ratio test.
    Np,
    /// Randomized test on the summed differences of a rule.
    Score(ScoringRule),
    /// One-sided DM test at the spec's level on the differences of a rule.
    Dm(ScoringRule),
    /// One-sided Wilcoxon test at the spec's level on the differences of a rule.
    Wilcoxon(ScoringRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub power: f64,
    pub se: f64,
    pub reps: usize,
    /// Replications dropped for an `∞ − ∞` score difference.
    pub invalid: usize,
}

/// Mean rejection probability over `reps` samples of size `spec.n` from
/// `truth`. Critical values use the spec's seed; samples use `seed`.
pub fn power_estimate(
    test: &PowerTest,
    truth: &Density,
    spec: &NpTestSpec,
    reps: usize,
    seed: u64,
) -> Result<PowerEstimate> {
    spec.validate()?;
    if reps < MIN_MC_REPS {
        return Err(Error::Config(format!("power estimation needs at least {MIN_MC_REPS} replications, got {reps}")));
    }
    let run = |decide: &(dyn Fn(&[f64]) -> Result<f64> + Sync)| -> Result<PowerEstimate> {
        let outcomes: Vec<Result<f64>> = (0..reps as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, domain::POWER, i);
                decide(&draw_sample(truth, spec.n, &mut rng))
            })
            .collect();
        summarize(outcomes)
    };
    match test {
        PowerTest::Np => {
            let cv = np_critical_value(spec)?;
            let stat = spec.censored_terms()?;
            run(&|s| Ok(randomized_decision(stat.total(s), cv).reject_prob))
        }
        PowerTest::Score(rule) => {
            let cv = score_critical_value(rule, spec)?;
            let stat = ScoreDifference::new(rule, &spec.p0, &spec.p1)?;
            run(&|s| Ok(randomized_decision(stat.total(s)?, cv).reject_prob))
        }
        PowerTest::Dm(rule) | PowerTest::Wilcoxon(rule) => {
            let stat = ScoreDifference::new(rule, &spec.p0, &spec.p1)?;
            let dm = matches!(test, PowerTest::Dm(_));
            run(&|s| {
                let d = s.iter().map(|&x| stat.diff(x)).collect::<Result<Vec<f64>>>()?;
                let r = if dm { dm_test(&d, Sided::One, spec.alpha)? } else { wilcoxon_test(&d, spec.alpha)? };
                Ok(r.reject_prob)
            })
        }
    }
}

fn summarize(outcomes: Vec<Result<f64>>) -> Result<PowerEstimate> {
    let reps = outcomes.len();
    let mut valid = Vec::with_capacity(reps);
    let mut invalid = 0;
    for o in outcomes {
        match o {
            Ok(v) => valid.push(v),
            Err(Error::Indeterminate { .. }) => invalid += 1,
            Err(e) => return Err(e),
        }
    }
    if valid.is_empty() {
        return Err(Error::Config("every replication produced an indeterminate score difference".into()));
    }
    let k = valid.len() as f64;
    let power = valid.iter().sum::<f64>() / k;
    let var = valid.iter().map(|v| (v - power).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    Ok(PowerEstimate { power, se: (var / k).sqrt(), reps, invalid })
}

/// Outcome of [`ump_bruteforce_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UmpReport {
    pub passed: bool,
    pub tests: usize,
    pub alternatives: usize,
    /// Largest level of a censored test minus `α` (≤ 0 when all hold).
    pub worst_level_excess: f64,
    /// Largest power deficit of a censored test against its original.
    pub worst_power_deficit: f64,
}

const UMP_SLACK: f64 = 1e-12;

/// Brute-force check at `n = 1` that replacing a level-`α` test by its
/// censored version (keep `φ` on `A`, constant `β` off `A`) keeps the level
/// and does not lose power against any alternative.
///
/// The sample space is cut into `grid_size` cells of equal null probability
/// on each side of the region boundary. Levels are the supremum over the
/// null hypothesis, i.e. the null mass off `A` may sit on any single cell.
/// Alternatives put `p₁` on `A` and the mass `P₁(A^c)` on any one cell of
/// `A^c` (the extreme points of the alternative). Besides `n_tests` random
/// tests the constant test `α` and a test concentrated off `A` are checked.
pub fn ump_bruteforce_check(spec: &NpTestSpec, grid_size: usize, n_tests: usize) -> Result<UmpReport> {
    spec.validate()?;
    if spec.n != 1 {
        return Err(Error::InvalidParameter(format!("brute-force check needs n = 1, got {}", spec.n)));
    }
    if grid_size < 4 {
        return Err(Error::InvalidParameter(format!("grid needs at least 4 cells, got {grid_size}")));
    }
    let (r, right) = match spec.region {
        WeightFunction::IndicatorRight { r, .. } => (r, true),
        WeightFunction::IndicatorLeft { r, .. } => (r, false),
        _ => return Err(Error::Unsupported("brute-force check needs a one-sided region".into())),
    };
    let mass_in0 = spec.region.mass(&spec.p0)?;
    let mass_in1 = spec.region.mass(&spec.p1)?;
    let out0 = 1.0 - mass_in0;
    let out1 = 1.0 - mass_in1;
    let k_in = ((grid_size as f64 * mass_in0).round() as usize).clamp(1, grid_size - 1);
    let k_out = grid_size - k_in;
    let edges = cell_edges(&spec.p0, r, right, k_in);
    // cell probabilities on A under p0 and p1
    let pi0: Vec<f64> = edges.windows(2).map(|e| interval_mass(&spec.p0, e[0], e[1])).collect();
    let pi1: Vec<f64> = edges.windows(2).map(|e| interval_mass(&spec.p1, e[0], e[1])).collect();

    let alpha = spec.alpha;
    let mut rng = stream(spec.seed, domain::UMP, 0);
    let mut tests: Vec<(Vec<f64>, Vec<f64>)> =
        vec![(vec![alpha; k_in], vec![alpha; k_out]), (vec![0.0; k_in], vec![(alpha / out0).min(1.0); k_out])];
    for t in 0..n_tests {
        let sparse = t % 3;
        let shape_in: Vec<f64> = (0..k_in)
            .map(|_| if sparse == 1 && rng.random::<f64>() < 0.7 { 0.0 } else { rng.random::<f64>() })
            .collect();
        let shape_out: Vec<f64> = (0..k_out)
            .map(|_| if sparse == 2 && rng.random::<f64>() < 0.7 { 0.0 } else { rng.random::<f64>() })
            .collect();
        tests.push(scale_to_level(&shape_in, &shape_out, &pi0, out0, alpha));
    }

    let mut worst_level = f64::NEG_INFINITY;
    let mut worst_deficit = f64::NEG_INFINITY;
    for (phi_in, phi_out) in &tests {
        let on_a0: f64 = phi_in.iter().zip(&pi0).map(|(f, p)| f * p).sum();
        let on_a1: f64 = phi_in.iter().zip(&pi1).map(|(f, p)| f * p).sum();
        let beta = ((alpha - on_a0) / out0).min(1.0);
        let censored_level = on_a0 + out0 * beta;
        worst_level = worst_level.max(censored_level - alpha);
        for &phi_j in phi_out {
            let original = on_a1 + out1 * phi_j;
            let censored = on_a1 + out1 * beta;
            worst_deficit = worst_deficit.max(original - censored);
        }
    }
    Ok(UmpReport {
        passed: worst_level <= UMP_SLACK && worst_deficit <= UMP_SLACK,
        tests: tests.len(),
        alternatives: k_out,
        worst_level_excess: worst_level,
        worst_power_deficit: worst_deficit,
    })
}

/// Cell edges of equal `p0` mass inside the one-sided region.
fn cell_edges(p0: &Density, r: f64, right: bool, k: usize) -> Vec<f64> {
    let (lo, hi) = if right { (p0.cdf(r), 1.0) } else { (0.0, p0.cdf(r)) };
    (0..=k)
        .map(|i| match i {
            0 if right => r,
            0 => f64::NEG_INFINITY,
            i if i == k && right => f64::INFINITY,
            i if i == k => r,
            i => p0.quantile_unchecked(lo + (hi - lo) * i as f64 / k as f64),
        })
        .collect()
}

fn interval_mass(p: &Density, a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        p.sf(a) - p.sf(b)
    } else {
        p.cdf(b) - p.cdf(a)
    }
}

/// Scales a random shape so that the test has level exactly `α` in the
/// supremum sense, capping values at 1.
fn scale_to_level(shape_in: &[f64], shape_out: &[f64], pi0: &[f64], out0: f64, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let apply = |c: f64| -> (Vec<f64>, Vec<f64>) {
        (shape_in.iter().map(|s| (c * s).min(1.0)).collect(), shape_out.iter().map(|s| (c * s).min(1.0)).collect())
    };
    let level = |c: f64| {
        let (a, b) = apply(c);
        let on_a: f64 = a.iter().zip(pi0).map(|(f, p)| f * p).sum();
        on_a + out0 * b.iter().fold(0.0f64, |m, &v| m.max(v))
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while level(hi) < alpha && hi < 1e12 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if level(mid) <= alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    apply(lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dm_arithmetic() {
        // population mean 0.2 and sd 1 for n = 100
        let d: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.2 } else { -0.8 }).collect();
        let r = dm_test(&d, Sided::Two, 0.05).unwrap();
        assert!((r.statistic - 2.0).abs() < 1e-12);
        assert_eq!(r.reject_prob, 1.0);
        assert_eq!(r.direction, Direction::FavorSecond);
        let z = dm_test(&[0.0; 10], Sided::Two, 0.05).unwrap();
        assert!(z.degenerate && z.reject_prob == 0.0 && z.direction == Direction::None);
        let pm = dm_test(&[1.0, -1.0], Sided::Two, 0.05).unwrap();
        assert_eq!(pm.statistic, 0.0);
        assert_eq!(pm.reject_prob, 0.0);
    }

    #[test]
    fn dm_rejects_infinite_and_short_input() {
        assert!(matches!(dm_test(&[1.0, f64::INFINITY], Sided::Two, 0.05), Err(Error::NonFinite { index: 1 })));
        assert!(dm_test(&[1.0], Sided::Two, 0.05).is_err());
        assert!(dm_test(&[1.0, 2.0], Sided::Two, 1.5).is_err());
    }

    #[test]
    fn dm_bartlett_lag_one_is_plain() {
        let d = [0.3, -0.1, 0.8, 0.05, -0.4, 0.9];
        let a = dm_test(&d, Sided::Two, 0.05).unwrap();
        let b = dm_test_lagged(&d, Sided::Two, 0.05, 1).unwrap();
        assert_eq!(a.statistic, b.statistic);
        let c = dm_test_lagged(&d, Sided::Two, 0.05, 3).unwrap();
        assert!(c.statistic.is_finite());
    }

    #[test]
    fn wilcoxon_normal_tail_tracks_exact_at_switch() {
        let n = WILCOXON_EXACT_MAX;
        let ranks2: Vec<u64> = (1..=n as u64).map(|r| 2 * r).collect();
        let top = n * (n + 1) / 2;
        for w in 0..=top {
            let exact = exact_upper_tail(&ranks2, 2 * w as u64);
            let approx = normal_upper_tail(n, 0.0, w as f64).unwrap();
            assert!((exact - approx).abs() < 0.01, "w = {w}: {exact} vs {approx}");
        }
    }

    #[test]
    fn wilcoxon_small_exact() {
        let r = wilcoxon_test(&[1.0, 2.0, 3.0], 0.025).unwrap();
        assert!((r.p_value.unwrap() - 0.125).abs() < 1e-15);
        assert_eq!(r.statistic, 6.0);
        let r = wilcoxon_test(&[-1.0, -2.0, -3.0], 0.025).unwrap();
        assert_eq!(r.p_value.unwrap(), 1.0);
        let z = wilcoxon_test(&[0.0, 0.0], 0.025).unwrap();
        assert!(z.degenerate);
    }

    #[test]
    fn wilcoxon_ties_use_average_ranks() {
        // |d| = 1, 1, 2: ranks 1.5, 1.5, 3; W+ = 1.5 + 3
        let r = wilcoxon_test(&[1.0, -1.0, 2.0, 0.0], 0.025).unwrap();
        assert_eq!(r.statistic, 4.5);
        assert_eq!(r.n_effective, 3);
        // sign patterns with W+ ≥ 4.5: {3, 1.5}, {3, 1.5'}, {all}
        assert!((r.p_value.unwrap() - 3.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn wilcoxon_ties_ignore_rounding_noise() {
        let c = 0.1 + 0.2;
        let exact = wilcoxon_test(&[0.3, 0.3, -0.3, 0.5], 0.025).unwrap();
        let noisy = wilcoxon_test(&[c, 0.3, -0.3, 0.5], 0.025).unwrap();
        assert_eq!(exact, noisy);
    }

    #[test]
    fn censored_statistic_examples() {
        let spec = NpTestSpec::new(
            Density::standard_normal(),
            Density::normal(1.0, 1.0).unwrap(),
            WeightFunction::right(0.0),
            1,
            0.05,
        )
        .unwrap();
        assert!(np_statistic(&spec, &[0.5]).unwrap().abs() < 1e-15);
        let t = np_statistic(&spec, &[-1.0]).unwrap();
        assert!((t - (0.158_655_253_931_457_05f64 / 0.5).ln()).abs() < 1e-13);
        assert!((t + 1.1479).abs() < 1e-4);
    }

    #[test]
    fn spec_rejects_degenerate_regions() {
        let n = Density::standard_normal();
        assert!(NpTestSpec::new(n.clone(), n.clone(), WeightFunction::right(-40.0), 5, 0.05).is_err());
        assert!(
            NpTestSpec::new(n.clone(), n.clone(), WeightFunction::smooth_right(0.0, 0.5).unwrap(), 5, 0.05).is_err()
        );
        assert!(NpTestSpec::new(n.clone(), n, WeightFunction::one(), 5, 0.05).is_ok());
    }

    #[test]
    fn critical_value_needs_enough_draws() {
        let n = Density::standard_normal();
        let spec =
            NpTestSpec::new(n.clone(), Density::hrt(), WeightFunction::right(0.0), 3, 0.05).unwrap().with_mc(999, 1);
        assert!(matches!(np_critical_value(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn critical_value_at_single_observation_matches_analytic_quantile() {
        // T = x − 1/2 on A = [0, ∞) and the atom log(Φ(−1)/Φ(0)) off A, so
        // P(T > c) = 1 − Φ(c + 1/2) for c ≥ −1/2.
        let spec = NpTestSpec::new(
            Density::standard_normal(),
            Density::normal(1.0, 1.0).unwrap(),
            WeightFunction::right(0.0),
            1,
            0.1,
        )
        .unwrap()
        .with_mc(200_000, 9);
        let cv = np_critical_value(&spec).unwrap();
        let analytic = std_normal::isf(0.1) - 0.5;
        assert!((cv.c_alpha - analytic).abs() < 0.02, "{} vs {analytic}", cv.c_alpha);
    }

    #[test]
    fn atom_gets_randomized() {
        // α = 0.6 puts c on the atom carrying half of the null mass
        let spec = NpTestSpec::new(
            Density::standard_normal(),
            Density::normal(1.0, 1.0).unwrap(),
            WeightFunction::right(0.0),
            1,
            0.6,
        )
        .unwrap()
        .with_mc(20_000, 3);
        let cv = np_critical_value(&spec).unwrap();
        let atom = (0.158_655_253_931_457_05f64 / 0.5).ln();
        assert!((cv.c_alpha - atom).abs() < 1e-12);
        assert!(cv.gamma > 0.1 && cv.gamma < 0.3, "gamma={}", cv.gamma);
        let r = np_test(&[-2.0], &spec, cv).unwrap();
        assert_eq!(r.reject_prob, cv.gamma);
    }

    #[test]
    fn critical_value_tends_to_minimum() {
        let sorted = [1.0, 2.0, 3.0, 4.0];
        let cv = critical_from_sorted(&sorted, 0.999);
        assert_eq!(cv.c_alpha, 1.0);
    }

    #[test]
    fn ump_check_passes() {
        let spec =
            NpTestSpec::new(Density::standard_normal(), Density::hrt(), WeightFunction::right(1.0), 1, 0.05).unwrap();
        let report = ump_bruteforce_check(&spec, 200, 50).unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.tests, 52);
    }
}
