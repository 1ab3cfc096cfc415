//! Monte Carlo scenario engine: rejection frequencies of the DM and
//! Wilcoxon tests over a grid of thresholds `r`, for two competing
//! forecasts of a standard normal population.
//!
//! Each replication draws one sample and reuses it for every threshold.
//! Rules are given as templates; `csl`, `cl`, `pwl` and `twcrps` mean the
//! rule with weight `right(r)`, `wh` uses `smoothright(r, wh_delta)`, and
//! any rule text may mention `r` explicitly, e.g. `cl(left(r))`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::student::std_normal;
use crate::dist::Density;
use crate::error::{Error, Result};
use crate::grammar::{self, Env};
use crate::numfmt::sig;
use crate::rng::{domain, stream};
use crate::scores::{Needs, PointFeatures, PreparedRule, ScoringRule, TailTable};
use crate::testing::{dm_test, wilcoxon_test, Direction, Sided};
use crate::weights::WeightFunction;

pub const MAX_SAMPLE_SIZE: usize = 10_000_000;
pub const DEFAULT_RULES: [&str; 8] = ["logs", "crps", "hy", "twcrps", "csl", "cl", "pwl", "wh"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    A1,
    A2,
    B,
}

impl Scenario {
    /// `(forecast1, forecast2)`.
    pub fn forecasts(self) -> (Density, Density) {
        match self {
            Scenario::A1 => (Density::standard_normal(), Density::hlt()),
            Scenario::A2 => (Density::hlt(), Density::hrt()),
            Scenario::B => (Density::cdfmix_g(), Density::cdfmix_h()),
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A1" => Ok(Scenario::A1),
            "A2" => Ok(Scenario::A2),
            "B" => Ok(Scenario::B),
            other => Err(Error::Config(format!("unknown scenario `{other}`, expected A1, A2 or B"))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleSize {
    Fixed(usize),
    /// Keep the expected number of observations in `[r, ∞)` at `c`.
    ExpectedCount(u32),
}

/// `round(c / (1 − Φ(r)))`, at least 2.
pub fn varying_n(r: f64, c: u32) -> Result<usize> {
    if c == 0 {
        return Err(Error::Config("expected count must be at least 1".into()));
    }
    let tail = std_normal::sf(r);
    let n = (c as f64 / tail).round();
    if !(n <= MAX_SAMPLE_SIZE as f64) {
        return Err(Error::Config(format!(
            "threshold {r} needs a sample of {n} observations for an expected count of {c}, above the limit of {MAX_SAMPLE_SIZE}"
        )));
    }
    Ok((n as usize).max(2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub truth: Density,
    pub forecast1: Density,
    pub forecast2: Density,
    pub rules: Vec<String>,
    pub r_grid: Vec<f64>,
    pub n_mode: SampleSize,
    pub replications: usize,
    pub alpha_dm: f64,
    pub alpha_wilcoxon: f64,
    pub wh_delta: f64,
    pub seed: u64,
}

/// `lo, lo + step, …` up to `hi`, each point rounded to 12 decimals so that
/// steps like 0.1 give clean values.
pub fn grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Config(format!("bad grid {lo}..{hi} step {step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12).collect())
}

impl ScenarioConfig {
    /// Full-size defaults: `n = 100`, `r ∈ [−5, 3]` in steps of 0.25,
    /// 10000 replications, seed 42.
    pub fn new(scenario: Scenario) -> Self {
        let (forecast1, forecast2) = scenario.forecasts();
        ScenarioConfig {
            scenario,
            truth: Density::standard_normal(),
            forecast1,
            forecast2,
            rules: DEFAULT_RULES.iter().map(|s| s.to_string()).collect(),
            r_grid: grid(-5.0, 3.0, 0.25).expect("default grid"),
            n_mode: SampleSize::Fixed(100),
            replications: 10_000,
            alpha_dm: 0.05,
            alpha_wilcoxon: 0.025,
            wh_delta: 0.5,
            seed: 42,
        }
    }

    /// Reads the `key = value` format (see [`ScenarioConfig::parse`]).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses `key = value` lines; `#` starts a comment. `scenario` is
    /// required and sets the forecasts; other keys override defaults:
    /// `truth`, `forecast1`, `forecast2` (density grammar), `rules`
    /// (comma-separated templates), `r_grid` (comma-separated values) or
    /// `r_min`/`r_max`/`r_step`, `n` or `expected_count`, `replications`,
    /// `alpha_dm`, `alpha_wilcoxon`, `wh_delta`, `seed`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{line}`", i + 1)))?;
            pairs.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let scenario = pairs
            .iter()
            .find(|(_, k, _)| k == "scenario")
            .ok_or_else(|| Error::Config("missing `scenario` key".into()))?
            .2
            .parse::<Scenario>()?;
        let mut cfg = ScenarioConfig::new(scenario);
        let (mut r_min, mut r_max, mut r_step) = (-5.0, 3.0, 0.25);
        let mut range_given = false;
        let mut n_given = false;
        for (line, k, v) in &pairs {
            let ctx = |e: Error| Error::Config(format!("line {line}: `{k}`: {e}"));
            let number = || {
                v.parse::<f64>().map_err(|_| Error::Config(format!("line {line}: `{k}` expects a number, got `{v}`")))
            };
            let count = || {
                v.parse::<u64>()
                    .map_err(|_| Error::Config(format!("line {line}: `{k}` expects a whole number, got `{v}`")))
            };
            match k.as_str() {
                "scenario" => {}
                "truth" => cfg.truth = grammar::parse_density(v).map_err(ctx)?,
                "forecast1" => cfg.forecast1 = grammar::parse_density(v).map_err(ctx)?,
                "forecast2" => cfg.forecast2 = grammar::parse_density(v).map_err(ctx)?,
                "rules" => cfg.rules = grammar::split_list(v),
                "r_grid" => {
                    cfg.r_grid = grammar::split_list(v)
                        .iter()
                        .map(|s| {
                            s.parse::<f64>().map_err(|_| Error::Config(format!("line {line}: bad grid value `{s}`")))
                        })
                        .collect::<Result<_>>()?
                }
                "r_min" => (r_min, range_given) = (number()?, true),
                "r_max" => (r_max, range_given) = (number()?, true),
                "r_step" => (r_step, range_given) = (number()?, true),
                "n" => {
                    if n_given {
                        return Err(Error::Config("give only one of `n` and `expected_count`".into()));
                    }
                    cfg.n_mode = SampleSize::Fixed(count()? as usize);
                    n_given = true;
                }
                "expected_count" => {
                    if n_given {
                        return Err(Error::Config("give only one of `n` and `expected_count`".into()));
                    }
                    let c = count()?;
                    cfg.n_mode = SampleSize::ExpectedCount(
                        u32::try_from(c).map_err(|_| Error::Config(format!("expected_count {c} is too large")))?,
                    );
                    n_given = true;
                }
                "replications" => cfg.replications = count()? as usize,
                "alpha_dm" => cfg.alpha_dm = number()?,
                "alpha_wilcoxon" => cfg.alpha_wilcoxon = number()?,
                "wh_delta" => cfg.wh_delta = number()?,
                "seed" => cfg.seed = count()?,
                other => return Err(Error::Config(format!("line {line}: unknown key `{other}`"))),
            }
        }
        let grid_given = pairs.iter().any(|(_, k, _)| k == "r_grid");
        if range_given && grid_given {
            return Err(Error::Config("give either `r_grid` or `r_min`/`r_max`/`r_step`, not both".into()));
        }
        if range_given {
            cfg.r_grid = grid(r_min, r_max, r_step)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.r_grid.iter().any(|r| !r.is_finite()) || self.r_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("r_grid must be finite and strictly increasing".into()));
        }
        for (name, a) in [("alpha_dm", self.alpha_dm), ("alpha_wilcoxon", self.alpha_wilcoxon)] {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {a}")));
            }
        }
        match self.n_mode {
            SampleSize::Fixed(n) if !(2..=MAX_SAMPLE_SIZE).contains(&n) => {
                return Err(Error::Config(format!("n must lie in [2, {MAX_SAMPLE_SIZE}], got {n}")));
            }
            SampleSize::ExpectedCount(0) => return Err(Error::Config("expected_count must be at least 1".into())),
            _ => {}
        }
        if self.rules.is_empty() {
            return Err(Error::Config("no rules given".into()));
        }
        for t in &self.rules {
            self.template(t)?;
        }
        Ok(())
    }

    /// Sample size at each grid point.
    pub fn sample_sizes(&self) -> Result<Vec<usize>> {
        self.r_grid
            .iter()
            .map(|&r| match self.n_mode {
                SampleSize::Fixed(n) => Ok(n),
                SampleSize::ExpectedCount(c) => varying_n(r, c),
            })
            .collect()
    }

    fn template(&self, text: &str) -> Result<Template> {
        let bare = matches!(text.trim(), "twcrps" | "csl" | "cl" | "pwl" | "wh");
        let grid_dependent =
            bare || grammar::mentions_threshold(text).map_err(|e| Error::Config(format!("rule `{text}`: {e}")))?;
        let instantiate = |r: f64| -> Result<ScoringRule> {
            let env = Env {
                r: Some(r),
                weight: Some(WeightFunction::right(r)),
                smooth_weight: Some(WeightFunction::smooth_right(r, self.wh_delta)?),
            };
            grammar::parse_rule_in(text, &env).map_err(|e| Error::Config(format!("rule `{text}` at r = {r}: {e}")))
        };
        if grid_dependent {
            Ok(Template::Grid(self.r_grid.iter().map(|&r| instantiate(r)).collect::<Result<_>>()?))
        } else {
            let rule = grammar::parse_rule(text).map_err(|e| Error::Config(format!("rule `{text}`: {e}")))?;
            Ok(Template::Fixed(rule))
        }
    }
}

enum Template {
    Fixed(ScoringRule),
    Grid(Vec<ScoringRule>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Dm,
    Wilcoxon,
}

impl TestKind {
    pub const ALL: [TestKind; 2] = [TestKind::Dm, TestKind::Wilcoxon];
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestKind::Dm => "dm",
            TestKind::Wilcoxon => "wilcoxon",
        })
    }
}

/// One row of a rejection curve: frequencies of rejections in favour of
/// each forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rule: String,
    pub test: TestKind,
    pub r: f64,
    pub n: usize,
    pub favor1: f64,
    pub favor2: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RejectionCurve {
    pub points: Vec<CurvePoint>,
}

impl RejectionCurve {
    pub fn get(&self, rule: &str, test: TestKind, r: f64) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.rule == rule && p.test == test && p.r == r)
    }
}

struct Engine {
    rules: Vec<RulePlan>,
    densities: [Density; 2],
    tails: [Option<Arc<TailTable>>; 2],
    needs: [Needs; 2],
    sizes: Vec<usize>,
    n_max: usize,
}

enum RulePlan {
    Fixed(Box<[PreparedRule; 2]>),
    Grid(Vec<[PreparedRule; 2]>),
}

fn prepare_pair(
    rule: &ScoringRule,
    d: &[Density; 2],
    tails: &[Option<Arc<TailTable>>; 2],
) -> Result<[PreparedRule; 2]> {
    Ok([PreparedRule::new(rule, &d[0], tails[0].clone())?, PreparedRule::new(rule, &d[1], tails[1].clone())?])
}

fn uses_tables(rule: &ScoringRule) -> bool {
    match rule {
        ScoringRule::Crps | ScoringRule::TwCrps(_) => true,
        ScoringRule::Sum(parts) => parts.iter().any(uses_tables),
        _ => false,
    }
}

impl Engine {
    fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let templates = cfg.rules.iter().map(|t| cfg.template(t)).collect::<Result<Vec<_>>>()?;
        let densities = [cfg.forecast1.clone(), cfg.forecast2.clone()];
        let any_tables = templates.iter().any(|t| match t {
            Template::Fixed(r) => uses_tables(r),
            Template::Grid(rs) => rs.iter().any(uses_tables),
        });
        let tails = if any_tables {
            let (a, b) = rayon::join(|| TailTable::new(&densities[0]), || TailTable::new(&densities[1]));
            [Some(Arc::new(a)), Some(Arc::new(b))]
        } else {
            [None, None]
        };
        let mut rules = Vec::with_capacity(templates.len());
        let mut needs = [Needs::default(); 2];
        for t in &templates {
            let plan = match t {
                Template::Fixed(rule) => RulePlan::Fixed(Box::new(prepare_pair(rule, &densities, &tails)?)),
                Template::Grid(rs) => {
                    RulePlan::Grid(rs.iter().map(|r| prepare_pair(r, &densities, &tails)).collect::<Result<_>>()?)
                }
            };
            let pairs: Vec<&[PreparedRule; 2]> = match &plan {
                RulePlan::Fixed(p) => vec![&**p],
                RulePlan::Grid(ps) => ps.iter().collect(),
            };
            for pair in pairs {
                for f in 0..2 {
                    needs[f] = needs[f].union(pair[f].needs());
                }
            }
            rules.push(plan);
        }
        let sizes = cfg.sample_sizes()?;
        let n_max = sizes.iter().copied().max().unwrap_or(0);
        Ok(Engine { rules, densities, tails, needs, sizes, n_max })
    }

    fn slots(&self) -> usize {
        self.rules.len() * TestKind::ALL.len() * self.sizes.len() * 2
    }

    fn slot(&self, rule: usize, test: usize, k: usize, dir: usize) -> usize {
        ((rule * TestKind::ALL.len() + test) * self.sizes.len() + k) * 2 + dir
    }

    fn replicate(&self, cfg: &ScenarioConfig, rep: u64, counts: &mut [u64]) {
        let mut rng = stream(cfg.seed, domain::SCENARIO, rep);
        let sample: Vec<f64> = (0..self.n_max).map(|_| cfg.truth.sample(&mut rng)).collect();
        let features: [Vec<PointFeatures>; 2] = std::array::from_fn(|f| {
            sample
                .iter()
                .map(|&x| PointFeatures::compute(&self.densities[f], self.tails[f].as_deref(), x, self.needs[f]))
                .collect()
        });
        let mut diffs = Vec::with_capacity(self.n_max);
        for (i, plan) in self.rules.iter().enumerate() {
            match plan {
                RulePlan::Fixed(pair) => {
                    // the series does not depend on r, only its length does
                    let full = diff_series(pair, &features, self.n_max, &mut diffs);
                    let mut last: Option<(usize, [[bool; 2]; 2])> = None;
                    for (k, &n) in self.sizes.iter().enumerate() {
                        let verdict = match last {
                            Some((m, v)) if m == n => v,
                            _ => decide(full.then(|| &diffs[..n]), cfg),
                        };
                        last = Some((n, verdict));
                        self.tally(counts, i, k, verdict);
                    }
                }
                RulePlan::Grid(pairs) => {
                    for (k, pair) in pairs.iter().enumerate() {
                        let n = self.sizes[k];
                        let ok = diff_series(pair, &features, n, &mut diffs);
                        self.tally(counts, i, k, decide(ok.then_some(&diffs[..]), cfg));
                    }
                }
            }
        }
    }

    fn tally(&self, counts: &mut [u64], rule: usize, k: usize, verdict: [[bool; 2]; 2]) {
        for (t, v) in verdict.iter().enumerate() {
            for (dir, &hit) in v.iter().enumerate() {
                if hit {
                    counts[self.slot(rule, t, k, dir)] += 1;
                }
            }
        }
    }
}

/// Fills `out` with `S(f1, y_k) − S(f2, y_k)`; false on `∞ − ∞` or a score
/// error, which then counts as no rejection.
fn diff_series(pair: &[PreparedRule; 2], features: &[Vec<PointFeatures>; 2], n: usize, out: &mut Vec<f64>) -> bool {
    out.clear();
    for (f1, f2) in features[0][..n].iter().zip(&features[1][..n]) {
        let (Ok(a), Ok(b)) = (pair[0].score_with(f1), pair[1].score_with(f2)) else {
            return false;
        };
        match a.diff(b) {
            Some(d) => out.push(d),
            None => return false,
        }
    }
    true
}

/// `[test][direction]` rejections, direction 0 favouring forecast 1.
fn decide(diffs: Option<&[f64]>, cfg: &ScenarioConfig) -> [[bool; 2]; 2] {
    let mut out = [[false; 2]; 2];
    let Some(d) = diffs else { return out };
    if let Ok(r) = dm_test(d, Sided::Two, cfg.alpha_dm) {
        if r.rejects() {
            match r.direction {
                Direction::FavorFirst => out[0][0] = true,
                Direction::FavorSecond => out[0][1] = true,
                Direction::None => {}
            }
        }
    }
    // a positive location of S1 − S2 favours forecast 2
    if wilcoxon_test(d, cfg.alpha_wilcoxon).is_ok_and(|r| r.rejects()) {
        out[1][1] = true;
    }
    let neg: Vec<f64> = d.iter().map(|v| -v).collect();
    if wilcoxon_test(&neg, cfg.alpha_wilcoxon).is_ok_and(|r| r.rejects()) {
        out[1][0] = true;
    }
    out
}

/// Runs all replications and returns one curve point per
/// `(rule, test, r)`, ordered by rule, then test, then `r`.
///
/// Counts are integers summed across replications, so the curve does not
/// depend on the number of worker threads.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RejectionCurve> {
    let engine = Engine::new(cfg)?;
    let slots = engine.slots();
    let counts = (0..cfg.replications as u64)
        .into_par_iter()
        .fold(
            || vec![0u64; slots],
            |mut acc, rep| {
                engine.replicate(cfg, rep, &mut acc);
                acc
            },
        )
        .reduce(
            || vec![0u64; slots],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let reps = cfg.replications as f64;
    let mut points = Vec::with_capacity(slots / 2);
    for (i, rule) in cfg.rules.iter().enumerate() {
        for (t, test) in TestKind::ALL.iter().enumerate() {
            for (k, &r) in cfg.r_grid.iter().enumerate() {
                points.push(CurvePoint {
                    rule: rule.clone(),
                    test: *test,
                    r,
                    n: engine.sizes[k],
                    favor1: counts[engine.slot(i, t, k, 0)] as f64 / reps,
                    favor2: counts[engine.slot(i, t, k, 1)] as f64 / reps,
                });
            }
        }
    }
    Ok(RejectionCurve { points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveFormat {
    Csv,
    Json,
}

impl FromStr for CurveFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(CurveFormat::Csv),
            "json" => Ok(CurveFormat::Json),
            other => Err(Error::Config(format!("unknown curve format `{other}`"))),
        }
    }
}

pub const CSV_HEADER: [&str; 6] = ["rule", "test", "r", "n", "favor1", "favor2"];

/// Serializes a curve. CSV floats carry 17 significant digits; JSON is
/// `{"points": [{"rule", "test", "r", "n", "favor1", "favor2"}, …]}`.
pub fn curve_to_string(curve: &RejectionCurve, format: CurveFormat) -> Result<String> {
    match format {
        CurveFormat::Json => {
            let mut s = serde_json::to_string_pretty(curve).map_err(|e| Error::Parse(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        CurveFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let fail = |e: csv::Error| Error::Parse(e.to_string());
            w.write_record(CSV_HEADER).map_err(fail)?;
            for p in &curve.points {
                w.write_record([
                    p.rule.clone(),
                    p.test.to_string(),
                    sig(p.r, 17),
                    p.n.to_string(),
                    sig(p.favor1, 17),
                    sig(p.favor2, 17),
                ])
                .map_err(fail)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
    }
}

pub fn emit_curve(curve: &RejectionCurve, format: CurveFormat, path: &Path) -> Result<()> {
    let text = curve_to_string(curve, format)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn parse_curve(text: &str, format: CurveFormat, origin: &str) -> Result<RejectionCurve> {
    let bad = |message: String| Error::Format { path: origin.to_string(), message };
    match format {
        CurveFormat::Json => serde_json::from_str(text).map_err(|e| bad(e.to_string())),
        CurveFormat::Csv => {
            let mut rdr = csv::Reader::from_reader(text.as_bytes());
            let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
            if header.iter().ne(CSV_HEADER) {
                return Err(bad(format!("expected header {}", CSV_HEADER.join(","))));
            }
            let points = rdr
                .deserialize()
                .enumerate()
                .map(|(i, row)| row.map_err(|e: csv::Error| bad(format!("row {}: {e}", i + 2))))
                .collect::<Result<_>>()?;
            Ok(RejectionCurve { points })
        }
    }
}

pub fn read_curve(path: &Path, format: CurveFormat) -> Result<RejectionCurve> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_curve(&text, format, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scenario: Scenario) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::new(scenario);
        cfg.replications = 40;
        cfg.r_grid = vec![-1.0, 0.0, 1.0];
        cfg
    }

    #[test]
    fn varying_n_examples() {
        assert_eq!(varying_n(0.0, 10).unwrap(), 20);
        assert_eq!(varying_n(1.0, 10).unwrap(), 63);
        assert_eq!(varying_n(-3.0, 10).unwrap(), 10);
        assert_eq!(varying_n(-8.0, 1).unwrap(), 2);
        assert!(matches!(varying_n(6.0, 10), Err(Error::Config(_))));
    }

    #[test]
    fn grid_points_are_clean() {
        let g = grid(-5.0, 3.0, 0.25).unwrap();
        assert_eq!(g.len(), 33);
        assert_eq!(g[20], 0.0);
        assert_eq!(grid(0.0, 0.3, 0.1).unwrap(), vec![0.0, 0.1, 0.2, 0.3]);
    }

    #[test]
    fn config_parsing() {
        let cfg = ScenarioConfig::parse(
            "# A1 at desk scale\nscenario = A1\nreplications = 50\nr_min = -1\nr_max = 1\nr_step = 0.5\nrules = logs, csl, cl(left(r))\nexpected_count = 10\nseed = 7\n",
        )
        .unwrap();
        assert_eq!(cfg.r_grid, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(cfg.n_mode, SampleSize::ExpectedCount(10));
        assert_eq!(cfg.rules, vec!["logs", "csl", "cl(left(r))"]);
        assert_eq!(cfg.seed, 7);
        assert!(matches!(ScenarioConfig::parse("replications = 5"), Err(Error::Config(_))));
        assert!(matches!(ScenarioConfig::parse("scenario = A1\nbogus = 1"), Err(Error::Config(_))));
        assert!(matches!(ScenarioConfig::parse("scenario = A1\nrules = wh(right(r))"), Err(Error::Config(_))));
        assert!(matches!(ScenarioConfig::parse("scenario = A1\nr_grid = 1, 0"), Err(Error::Config(_))));
        assert!(matches!(ScenarioConfig::parse("scenario = A1\nn = 10\nexpected_count = 3"), Err(Error::Config(_))));
    }

    #[test]
    fn single_replication_is_deterministic() {
        let mut cfg = small(Scenario::A2);
        cfg.replications = 1;
        assert_eq!(run_scenario(&cfg).unwrap(), run_scenario(&cfg).unwrap());
    }

    #[test]
    fn a1_weighted_rules_never_reject_on_the_shared_half() {
        let curve = run_scenario(&small(Scenario::A1)).unwrap();
        for rule in ["twcrps", "csl", "cl", "pwl"] {
            for test in TestKind::ALL {
                for r in [0.0, 1.0] {
                    let p = curve.get(rule, test, r).unwrap();
                    assert_eq!((p.favor1, p.favor2), (0.0, 0.0), "{rule} {test} {r}");
                }
            }
        }
        for p in &curve.points {
            assert!(p.favor1 + p.favor2 <= 1.0);
        }
    }

    #[test]
    fn unweighted_rules_are_flat_in_r() {
        let curve = run_scenario(&small(Scenario::B)).unwrap();
        for rule in ["logs", "crps", "hy"] {
            for test in TestKind::ALL {
                let first = curve.get(rule, test, -1.0).unwrap();
                let last = curve.get(rule, test, 1.0).unwrap();
                assert_eq!((first.favor1, first.favor2), (last.favor1, last.favor2));
            }
        }
    }

    #[test]
    fn curve_round_trips() {
        let curve = run_scenario(&small(Scenario::A1)).unwrap();
        for format in [CurveFormat::Csv, CurveFormat::Json] {
            let text = curve_to_string(&curve, format).unwrap();
            assert_eq!(parse_curve(&text, format, "mem").unwrap(), curve);
        }
        let empty = curve_to_string(&RejectionCurve::default(), CurveFormat::Csv).unwrap();
        assert_eq!(empty, "rule,test,r,n,favor1,favor2\n");
    }
}
