//! Scoring rules: unweighted, weighted, and the two generic constructions
//! (renormalized-density and binary augmentation), with expected scores and
//! divergences by quadrature.
//!
//! Scores are losses: lower is better. A score is a [`ScoreValue`], which is
//! finite or `+∞` (log of a zero density or mass) and never NaN.

mod crps;
mod expected;
pub mod kernels;
mod prepared;
mod series;
mod tails;

use std::fmt;

use crate::dist::Density;
use crate::error::{Error, Result};
use crate::weights::WeightFunction;

pub use crps::{qcrps, quantile_score, twcrps};
pub use expected::{divergence, expected_score};
pub use prepared::{Needs, PointFeatures, PreparedRule};
pub use series::{score_diff_series, score_series};
pub use tails::TailTable;

/// Scoring rule for a binary event with success probability `α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryScore {
    /// `s̄(α, z) = −z (log α + 1) + α`.
    BarS,
    /// `s(α, z) = s̄(α, z) + s̄(1 − α, 1 − z)`, i.e. `−log` of the predicted probability of `z`.
    LogLoss,
}

impl BinaryScore {
    pub fn eval(&self, alpha: f64, z: bool) -> f64 {
        match self {
            BinaryScore::BarS => bars(alpha, z),
            BinaryScore::LogLoss => bars(alpha, z) + bars(1.0 - alpha, !z),
        }
    }
}

fn bars(alpha: f64, z: bool) -> f64 {
    if z {
        -(alpha.ln() + 1.0) + alpha
    } else {
        alpha
    }
}

impl fmt::Display for BinaryScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinaryScore::BarS => "bars",
            BinaryScore::LogLoss => "logloss",
        })
    }
}

/// Finite or `+∞` score.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ScoreValue(f64);

impl ScoreValue {
    pub fn new(v: f64) -> Result<Self> {
        if v.is_nan() || v == f64::NEG_INFINITY {
            return Err(Error::Domain { what: "score value", value: v });
        }
        Ok(ScoreValue(v))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    /// `self − other`; `∞ − ∞` is indeterminate and returns `None`.
    pub fn diff(self, other: ScoreValue) -> Option<f64> {
        if self.0.is_infinite() && other.0.is_infinite() {
            None
        } else {
            Some(self.0 - other.0)
        }
    }
}

impl fmt::Display for ScoreValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            fmt::Display::fmt(&self.0, f)
        }
    }
}

/// Tagged scoring rule.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoringRule {
    LogS,
    Crps,
    Hy,
    TwCrps(WeightFunction),
    Csl(WeightFunction),
    Cl(WeightFunction),
    Pwl(WeightFunction),
    /// Requires a smooth weight.
    Wh(WeightFunction),
    /// Quantile-weighted CRPS over levels `α ∈ [r_alpha, 1)`.
    Qcrps {
        r_alpha: f64,
    },
    /// `w(x) · base(p_w, x)` with `p_w = w p / ∫ w p`; base must be `LogS`.
    Conditional {
        base: Box<ScoringRule>,
        weight: WeightFunction,
    },
    /// `w(x) s(∫pw, 1) + (1 − w(x)) s(∫pw, 0)`.
    BinaryAugmented {
        binary: BinaryScore,
        weight: WeightFunction,
    },
    Sum(Vec<ScoringRule>),
}

/// Property row of a scoring rule; `None` where the property does not apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleProperties {
    pub proper: bool,
    pub strictly_proper: Option<bool>,
    pub localizing: Option<bool>,
    pub strictly_locally_proper: Option<bool>,
    pub proportionally_locally_proper: Option<bool>,
}

impl ScoringRule {
    pub fn wh(weight: WeightFunction) -> Result<Self> {
        let r = ScoringRule::Wh(weight);
        r.validate()?;
        Ok(r)
    }

    pub fn qcrps(r_alpha: f64) -> Result<Self> {
        let r = ScoringRule::Qcrps { r_alpha };
        r.validate()?;
        Ok(r)
    }

    /// Checks the structural invariants: smooth weight for WH, `LogS` base
    /// for the conditional construction, indicator weight for binary
    /// augmentation, `r_alpha ∈ (0, 1)`.
    pub fn validate(&self) -> Result<()> {
        match self {
            ScoringRule::Wh(w) if !w.is_smooth() => {
                Err(Error::InvalidParameter(format!("wh needs a smooth weight such as smoothright(r,delta), got {w}")))
            }
            ScoringRule::Qcrps { r_alpha } if !(*r_alpha > 0.0 && *r_alpha < 1.0) => {
                Err(Error::InvalidParameter(format!("qcrps level must lie in (0, 1), got {r_alpha}")))
            }
            ScoringRule::Conditional { base, .. } if **base != ScoringRule::LogS => {
                Err(Error::Unsupported(format!("conditional construction with base rule {base}")))
            }
            ScoringRule::BinaryAugmented { weight, .. } if !weight.is_indicator() => {
                Err(Error::InvalidParameter(format!("binary augmentation needs an indicator weight, got {weight}")))
            }
            ScoringRule::Sum(parts) => {
                if parts.is_empty() {
                    return Err(Error::InvalidParameter("empty sum of rules".into()));
                }
                parts.iter().try_for_each(ScoringRule::validate)
            }
            _ => Ok(()),
        }
    }

    /// Weight carried by a weighted rule.
    pub fn weight(&self) -> Option<WeightFunction> {
        match self {
            ScoringRule::TwCrps(w)
            | ScoringRule::Csl(w)
            | ScoringRule::Cl(w)
            | ScoringRule::Pwl(w)
            | ScoringRule::Wh(w) => Some(*w),
            ScoringRule::Conditional { weight, .. } | ScoringRule::BinaryAugmented { weight, .. } => Some(*weight),
            _ => None,
        }
    }

    /// Same rule with its weight replaced; unweighted rules are returned as is.
    pub fn with_weight(&self, w: WeightFunction) -> ScoringRule {
        match self {
            ScoringRule::TwCrps(_) => ScoringRule::TwCrps(w),
            ScoringRule::Csl(_) => ScoringRule::Csl(w),
            ScoringRule::Cl(_) => ScoringRule::Cl(w),
            ScoringRule::Pwl(_) => ScoringRule::Pwl(w),
            ScoringRule::Wh(_) => ScoringRule::Wh(w),
            ScoringRule::Conditional { base, .. } => ScoringRule::Conditional { base: base.clone(), weight: w },
            ScoringRule::BinaryAugmented { binary, .. } => ScoringRule::BinaryAugmented { binary: *binary, weight: w },
            ScoringRule::Sum(parts) => ScoringRule::Sum(parts.iter().map(|p| p.with_weight(w)).collect()),
            other => other.clone(),
        }
    }

    pub fn is_weighted(&self) -> bool {
        match self {
            ScoringRule::Sum(parts) => parts.iter().any(ScoringRule::is_weighted),
            other => other.weight().is_some(),
        }
    }

    /// Short family name, e.g. `csl`.
    pub fn family(&self) -> &'static str {
        match self {
            ScoringRule::LogS => "logs",
            ScoringRule::Crps => "crps",
            ScoringRule::Hy => "hy",
            ScoringRule::TwCrps(_) => "twcrps",
            ScoringRule::Csl(_) => "csl",
            ScoringRule::Cl(_) => "cl",
            ScoringRule::Pwl(_) => "pwl",
            ScoringRule::Wh(_) => "wh",
            ScoringRule::Qcrps { .. } => "qcrps",
            ScoringRule::Conditional { .. } => "conditional",
            ScoringRule::BinaryAugmented { .. } => "binary",
            ScoringRule::Sum(_) => "sum",
        }
    }

    /// Property row for the rules of the standard table.
    pub fn properties(&self) -> Option<RuleProperties> {
        let row = |proper, strict, loc, slp, plp| RuleProperties {
            proper,
            strictly_proper: strict,
            localizing: loc,
            strictly_locally_proper: slp,
            proportionally_locally_proper: plp,
        };
        Some(match self {
            ScoringRule::LogS | ScoringRule::Crps | ScoringRule::Hy => row(true, Some(true), Some(false), None, None),
            ScoringRule::TwCrps(w) => {
                let one_sided =
                    matches!(w, WeightFunction::IndicatorRight { .. } | WeightFunction::IndicatorLeft { .. });
                row(true, None, Some(one_sided), Some(one_sided), Some(false))
            }
            ScoringRule::Csl(_) | ScoringRule::Pwl(_) => row(true, None, Some(true), Some(true), Some(false)),
            ScoringRule::Cl(_) | ScoringRule::Wh(_) => row(true, None, Some(true), Some(false), Some(true)),
            _ => return None,
        })
    }
}

impl fmt::Display for ScoringRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoringRule::LogS | ScoringRule::Crps | ScoringRule::Hy => f.write_str(self.family()),
            ScoringRule::TwCrps(w)
            | ScoringRule::Csl(w)
            | ScoringRule::Cl(w)
            | ScoringRule::Pwl(w)
            | ScoringRule::Wh(w) => write!(f, "{}({w})", self.family()),
            ScoringRule::Qcrps { r_alpha } => write!(f, "qcrps({r_alpha})"),
            ScoringRule::Conditional { base, weight } => write!(f, "conditional({base},{weight})"),
            ScoringRule::BinaryAugmented { binary, weight } => write!(f, "binary({binary},{weight})"),
            ScoringRule::Sum(parts) => {
                f.write_str("sum(")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{p}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Renormalized-density construction `x ↦ w(x) base(p_w, x)`.
pub fn conditional_rule(base: ScoringRule, w: WeightFunction) -> Result<ScoringRule> {
    let r = ScoringRule::Conditional { base: Box::new(base), weight: w };
    r.validate()?;
    Ok(r)
}

/// Binary-score augmentation `w(x) s(∫pw, 1) + (1 − w(x)) s(∫pw, 0)`.
pub fn binary_augmented(b: BinaryScore, w: WeightFunction) -> Result<ScoringRule> {
    let r = ScoringRule::BinaryAugmented { binary: b, weight: w };
    r.validate()?;
    Ok(r)
}

/// Pointwise score `S(p, x)`.
pub fn score(rule: &ScoringRule, p: &Density, x: f64) -> Result<ScoreValue> {
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("observation must be finite, got {x}")));
    }
    rule.validate()?;
    ScoreValue::new(raw_score(rule, p, x)?)
}

/// Binary augmentation tolerates a zero or full region mass, which the
/// zero-weight convention then neutralizes.
pub(crate) fn binary_mass(w: &WeightFunction, p: &Density) -> Result<f64> {
    match *w {
        WeightFunction::Constant(c) => Ok(c),
        _ => w.mass(p),
    }
}

pub(crate) fn binary_value(b: BinaryScore, wx: f64, mass: f64) -> f64 {
    let mut s = 0.0;
    if wx != 0.0 {
        s += wx * b.eval(mass, true);
    }
    if wx != 1.0 {
        s += (1.0 - wx) * b.eval(mass, false);
    }
    s
}

fn raw_score(rule: &ScoringRule, p: &Density, x: f64) -> Result<f64> {
    Ok(match rule {
        ScoringRule::LogS => kernels::logs(p.log_pdf(x)),
        ScoringRule::Crps => twcrps(p, x, &WeightFunction::one())?,
        ScoringRule::Hy => kernels::hy(p.dlog(x), p.d2ratio(x)),
        ScoringRule::TwCrps(w) => twcrps(p, x, w)?,
        ScoringRule::Csl(w) => kernels::csl(w.eval(x), p.log_pdf(x), w.mass(p)?),
        ScoringRule::Cl(w) => kernels::cl(w.eval(x), p.log_pdf(x), w.mass(p)?),
        ScoringRule::Pwl(w) => kernels::pwl(w.eval(x), p.log_pdf(x), w.mass(p)?),
        ScoringRule::Wh(w) => {
            let wx = w.eval(x);
            let dwx = w.deriv(x)?;
            if wx == 0.0 && dwx == 0.0 {
                0.0
            } else {
                kernels::wh(wx, dwx, p.dlog(x), p.d2ratio(x))
            }
        }
        ScoringRule::Qcrps { r_alpha } => qcrps(p, x, *r_alpha)?,
        ScoringRule::Conditional { weight, .. } => {
            let wx = weight.eval(x);
            if wx == 0.0 {
                0.0
            } else {
                kernels::conditional_logs(wx, p.log_pdf(x), weight.mass(p)?)
            }
        }
        ScoringRule::BinaryAugmented { binary, weight } => {
            binary_value(*binary, weight.eval(x), binary_mass(weight, p)?)
        }
        ScoringRule::Sum(parts) => {
            let mut s = 0.0;
            for part in parts {
                s += raw_score(part, p, x)?;
            }
            s
        }
    })
}
