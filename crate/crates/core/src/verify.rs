//! Property suites run by `wsr verify`.
//!
//! Each suite recomputes a group of structural properties numerically and
//! reports observed values next to the tolerance they are judged against.

use rand::Rng;
use serde::Serialize;

use crate::dist::{Density, HalfHalf};
use crate::error::Result;
use crate::rng::{domain, stream};
use crate::scores::{binary_augmented, divergence, score, BinaryScore, ScoringRule};
use crate::testing::{power_estimate, ump_bruteforce_check, NpTestSpec, PowerEstimate, PowerTest, UmpReport};
use crate::weights::WeightFunction;

pub const IDENTITY_TOL: f64 = 1e-10;
pub const PROPER_TOL: f64 = 1e-8;
pub const SEPARATION: f64 = 1e-4;

/// Densities used for randomized and grid checks.
pub fn catalog() -> Vec<Density> {
    vec![
        Density::standard_normal(),
        Density::normal(0.4, 1.3).expect("valid"),
        Density::scaled_t(4.0, 1.0, 0.0).expect("valid"),
        Density::hlt(),
        Density::hrt(),
        Density::cdfmix_g(),
        Density::cdfmix_h(),
        Density::skew_t(6.0, 1.4, 0.1, 0.9).expect("valid"),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub tuples: usize,
    /// `max |CSL − PWL − S_bars(·; 1 − w)|`.
    pub csl_pwl: f64,
    /// `max |PWL − CL − S_bars(·; w)|`.
    pub pwl_cl: f64,
    pub passed: bool,
}

/// Checks the chain CSL = PWL + bars(1 − w) and PWL = CL + bars(w) at
/// random `(density, x, threshold)` tuples with one-sided weights.
pub fn identities(tuples: usize, seed: u64) -> Result<IdentityReport> {
    let cat = catalog();
    let mut rng = stream(seed, domain::SYNTHETIC, 1);
    let (mut a_max, mut b_max) = (0.0f64, 0.0f64);
    for _ in 0..tuples {
        let p = &cat[rng.random_range(0..cat.len())];
        let r = rng.random_range(-2.0..2.0);
        let x = if rng.random::<bool>() { p.sample(&mut rng) } else { rng.random_range(-4.0..4.0) };
        let w = if rng.random::<bool>() { WeightFunction::right(r) } else { WeightFunction::left(r) };
        let s = |rule: &ScoringRule| score(rule, p, x).map(|v| v.value());
        let csl = s(&ScoringRule::Csl(w))?;
        let pwl = s(&ScoringRule::Pwl(w))?;
        let cl = s(&ScoringRule::Cl(w))?;
        let bars_c = s(&binary_augmented(BinaryScore::BarS, w.complement()?)?)?;
        let bars_w = s(&binary_augmented(BinaryScore::BarS, w)?)?;
        a_max = a_max.max((csl - pwl - bars_c).abs());
        b_max = b_max.max((pwl - cl - bars_w).abs());
    }
    Ok(IdentityReport { tuples, csl_pwl: a_max, pwl_cl: b_max, passed: a_max < IDENTITY_TOL && b_max < IDENTITY_TOL })
}

/// Observed and expected entries of one row of the property table.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyRow {
    pub rule: String,
    /// Smallest divergence over the catalog grid.
    pub min_divergence: f64,
    pub proper: (bool, bool),
    pub strictly_proper: Option<(bool, bool)>,
    pub localizing: Option<(bool, bool)>,
    pub strictly_locally_proper: Option<(bool, bool)>,
    pub proportionally_locally_proper: Option<(bool, bool)>,
    /// Divergence on a pair differing inside the region.
    pub inside_divergence: f64,
    /// Divergence on a pair proportional on the region.
    pub proportional_divergence: f64,
}

impl PropertyRow {
    pub fn passed(&self) -> bool {
        let agree = |c: Option<(bool, bool)>| c.is_none_or(|(obs, exp)| obs == exp);
        self.proper.0 == self.proper.1
            && agree(self.strictly_proper)
            && agree(self.localizing)
            && agree(self.strictly_locally_proper)
            && agree(self.proportionally_locally_proper)
    }
}

/// The rules of the property table at threshold `r`; WH gets
/// `smoothright(r, 0.5)`.
pub fn table_rules(r: f64) -> Result<Vec<ScoringRule>> {
    let w = WeightFunction::right(r);
    Ok(vec![
        ScoringRule::LogS,
        ScoringRule::Crps,
        ScoringRule::Hy,
        ScoringRule::TwCrps(w),
        ScoringRule::Csl(w),
        ScoringRule::Cl(w),
        ScoringRule::Pwl(w),
        ScoringRule::wh(WeightFunction::smooth_right(r, 0.5)?)?,
    ])
}

/// `N(0,1)` on `[0, ∞)` rescaled to mass 0.7, glued to a `t₄` left tail:
/// proportional to the standard normal on the positive half-line.
pub fn proportional_to_normal() -> Result<Density> {
    Ok(HalfHalf::glue_t_left(4.0, Density::standard_normal(), 0.0, 0.3)?.into_density())
}

/// Recomputes the property table for weights supported in `[0, ∞)`.
///
/// - proper: every divergence on the first `grid` catalog densities is
///   at least `−1e−8`;
/// - strictly proper (unweighted rules): every off-diagonal divergence
///   exceeds `1e−4`;
/// - localizing: `Φ` and `hlt` agree on `[0, ∞)` and score identically at
///   test points on both sides of zero;
/// - strictly / proportionally locally proper: divergence of `hrt` against
///   `Φ` (different inside) and of a proportional pair against `Φ`.
pub fn propriety(grid: usize) -> Result<Vec<PropertyRow>> {
    let cat: Vec<Density> = catalog().into_iter().take(grid.max(2)).collect();
    let normal = Density::standard_normal();
    let hlt = Density::hlt();
    let hrt = Density::hrt();
    let prop = proportional_to_normal()?;
    let points = [-2.5, -1.0, -0.2, 0.3, 0.5, 0.9, 1.7, 3.2];
    let mut rows = Vec::new();
    for rule in table_rules(0.5)? {
        let expected = rule.properties().expect("table rule");
        let mut min_div = f64::INFINITY;
        let mut min_off = f64::INFINITY;
        for (i, p) in cat.iter().enumerate() {
            for (j, q) in cat.iter().enumerate() {
                let d = divergence(&rule, p, q)?;
                min_div = min_div.min(d);
                if i != j {
                    min_off = min_off.min(d);
                }
            }
        }
        let mut local = true;
        for &x in &points {
            let a = score(&rule, &normal, x)?.value();
            let b = score(&rule, &hlt, x)?.value();
            local &= (a - b).abs() <= 1e-12 * a.abs().max(1.0);
        }
        let inside = divergence(&rule, &hrt, &normal)?;
        let proportional = divergence(&rule, &prop, &normal)?;
        let weighted = rule.is_weighted();
        let slp = local && inside > SEPARATION && proportional > SEPARATION;
        let plp = local && inside > SEPARATION && proportional.abs() < PROPER_TOL;
        let pair = |obs: bool, exp: Option<bool>| exp.map(|e| (obs, e));
        rows.push(PropertyRow {
            rule: rule.to_string(),
            min_divergence: min_div,
            proper: (min_div >= -PROPER_TOL, expected.proper),
            strictly_proper: if weighted { None } else { pair(min_off > SEPARATION, expected.strictly_proper) },
            localizing: pair(local, expected.localizing),
            strictly_locally_proper: pair(slp, expected.strictly_locally_proper),
            proportionally_locally_proper: pair(plp, expected.proportionally_locally_proper),
            inside_divergence: inside,
            proportional_divergence: proportional,
        });
    }
    Ok(rows)
}

/// One `(p0, p1, A, n)` configuration of the power comparison.
#[derive(Debug, Clone)]
pub struct PowerConfig {
    pub label: &'static str,
    pub spec: NpTestSpec,
}

pub fn power_configs(mc_reps: usize, seed: u64) -> Result<Vec<PowerConfig>> {
    let n01 = Density::standard_normal();
    let make = |label, p1: Density, region, n| -> Result<PowerConfig> {
        Ok(PowerConfig { label, spec: NpTestSpec::new(n01.clone(), p1, region, n, 0.05)?.with_mc(mc_reps, seed) })
    };
    Ok(vec![
        make("N(0,1) vs hrt, A=[1,inf), n=20", Density::hrt(), WeightFunction::right(1.0), 20)?,
        make("N(0,1) vs N(0.3,1), A=[0,inf), n=30", Density::normal(0.3, 1.0)?, WeightFunction::right(0.0), 30)?,
        make("N(0,1) vs t4, A=(-inf,-1], n=40", Density::scaled_t(4.0, 1.0, 0.0)?, WeightFunction::left(-1.0), 40)?,
    ])
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerRow {
    pub config: String,
    pub rule: String,
    pub power: f64,
    pub se: f64,
    /// CSL power minus this power, in units of the pooled standard error.
    pub margin_in_se: f64,
    pub passed: bool,
}

/// Power of the tests built from CSL, CL, PWL and twCRPS on the region
/// (and WH on a smooth weight inside it) against `p1`, all with Monte
/// Carlo critical values under `p0`.
pub fn optimality(reps: usize, mc_reps: usize, seed: u64) -> Result<Vec<PowerRow>> {
    let mut rows = Vec::new();
    for cfg in power_configs(mc_reps, seed)? {
        let a = cfg.spec.region;
        let mut rules = vec![ScoringRule::Csl(a), ScoringRule::Cl(a), ScoringRule::Pwl(a), ScoringRule::TwCrps(a)];
        if let WeightFunction::IndicatorRight { r, .. } = a {
            rules.push(ScoringRule::wh(WeightFunction::smooth_right(r + 0.5, 0.5)?)?);
        }
        let powers: Vec<PowerEstimate> = rules
            .iter()
            .map(|rule| {
                power_estimate(&PowerTest::Score(rule.clone()), &cfg.spec.p1, &cfg.spec, reps, seed.wrapping_add(1))
            })
            .collect::<Result<_>>()?;
        let best = powers[0];
        for (rule, p) in rules.iter().zip(&powers) {
            let pooled = (best.se.powi(2) + p.se.powi(2)).sqrt();
            let margin = if pooled > 0.0 { (best.power - p.power) / pooled } else { 0.0 };
            rows.push(PowerRow {
                config: cfg.label.to_string(),
                rule: rule.to_string(),
                power: p.power,
                se: p.se,
                margin_in_se: margin,
                passed: best.power >= p.power - 2.0 * pooled,
            });
        }
    }
    Ok(rows)
}

/// Brute-force check at `n = 1` with `A = [1, ∞)`, `p0 = N(0,1)`,
/// `p1 = hrt`.
pub fn ump(grid_size: usize, n_tests: usize, seed: u64) -> Result<UmpReport> {
    let spec = NpTestSpec::new(Density::standard_normal(), Density::hrt(), WeightFunction::right(1.0), 1, 0.05)?
        .with_mc(crate::testing::MIN_MC_REPS, seed);
    ump_bruteforce_check(&spec, grid_size, n_tests)
}
