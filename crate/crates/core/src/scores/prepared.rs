use std::sync::Arc;

use crate::dist::Density;
use crate::error::Result;
use crate::weights::WeightFunction;

use super::tails::TailTable;
use super::{binary_mass, binary_value, kernels, qcrps, twcrps, BinaryScore, ScoreValue, ScoringRule};

/// Which per-observation ingredients a prepared rule reads.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Needs {
    pub log_pdf: bool,
    pub derivs: bool,
    pub right: bool,
    pub left: bool,
}

impl Needs {
    pub fn union(self, other: Needs) -> Needs {
        Needs {
            log_pdf: self.log_pdf || other.log_pdf,
            derivs: self.derivs || other.derivs,
            right: self.right || other.right,
            left: self.left || other.left,
        }
    }
}

/// Density-dependent quantities at one observation, shared by all rules
/// scoring that density there. Fields not requested are NaN.
#[derive(Debug, Clone, Copy)]
pub struct PointFeatures {
    pub x: f64,
    pub log_pdf: f64,
    pub dlog: f64,
    pub d2ratio: f64,
    /// `(∫_x^∞ S, ∫_x^∞ S²)`.
    pub right: (f64, f64),
    /// `(∫_{−∞}^x F, ∫_{−∞}^x F²)`.
    pub left: (f64, f64),
}

impl PointFeatures {
    pub fn compute(p: &Density, tails: Option<&TailTable>, x: f64, needs: Needs) -> Self {
        let nan = f64::NAN;
        let (dlog, d2ratio) = if needs.derivs { (p.dlog(x), p.d2ratio(x)) } else { (nan, nan) };
        let table = || tails.expect("tail table required for one-sided twCRPS features");
        PointFeatures {
            x,
            log_pdf: if needs.log_pdf { p.log_pdf(x) } else { nan },
            dlog,
            d2ratio,
            right: if needs.right { table().right_at(x) } else { (nan, nan) },
            left: if needs.left { table().left_at(x) } else { (nan, nan) },
        }
    }
}

#[derive(Debug, Clone)]
enum Plan {
    LogS,
    Hy,
    Crps,
    TwRight { r: f64, at_r: (f64, f64) },
    TwLeft { r: f64, at_r: (f64, f64) },
    TwZero,
    TwDirect(WeightFunction),
    Csl { w: WeightFunction, mass: f64 },
    Cl { w: WeightFunction, mass: f64 },
    Pwl { w: WeightFunction, mass: f64 },
    Wh(WeightFunction),
    Conditional { w: WeightFunction, mass: f64 },
    Binary { b: BinaryScore, w: WeightFunction, mass: f64 },
    Qcrps(f64),
    Sum(Vec<Plan>),
}

/// A scoring rule bound to one forecast density, with weight masses and
/// threshold integrals computed once.
///
/// Agrees with [`super::score`] bit for bit except for the CRPS family,
/// where tail tables replace the per-call quadrature (agreement within 1e−9).
#[derive(Debug, Clone)]
pub struct PreparedRule {
    rule: ScoringRule,
    density: Density,
    tails: Option<Arc<TailTable>>,
    plan: Plan,
    needs: Needs,
}

fn uses_tails(rule: &ScoringRule) -> bool {
    match rule {
        ScoringRule::Crps => true,
        ScoringRule::TwCrps(w) => matches!(
            w,
            WeightFunction::IndicatorRight { .. } | WeightFunction::IndicatorLeft { .. } | WeightFunction::Constant(_)
        ),
        ScoringRule::Sum(parts) => parts.iter().any(uses_tails),
        _ => false,
    }
}

fn plan(rule: &ScoringRule, p: &Density, tails: Option<&TailTable>, needs: &mut Needs) -> Result<Plan> {
    Ok(match rule {
        ScoringRule::LogS => {
            needs.log_pdf = true;
            Plan::LogS
        }
        ScoringRule::Hy => {
            needs.derivs = true;
            Plan::Hy
        }
        ScoringRule::Crps => {
            needs.left = true;
            needs.right = true;
            Plan::Crps
        }
        ScoringRule::TwCrps(w) => {
            let t = || tails.expect("tail table built for one-sided weights");
            match *w {
                WeightFunction::IndicatorRight { r, .. } => {
                    needs.right = true;
                    Plan::TwRight { r, at_r: t().right_at(r) }
                }
                WeightFunction::IndicatorLeft { r, .. } => {
                    needs.left = true;
                    Plan::TwLeft { r, at_r: t().left_at(r) }
                }
                WeightFunction::Constant(1.0) => {
                    needs.left = true;
                    needs.right = true;
                    Plan::Crps
                }
                WeightFunction::Constant(_) => Plan::TwZero,
                other => Plan::TwDirect(other),
            }
        }
        ScoringRule::Csl(w) => {
            needs.log_pdf = true;
            Plan::Csl { w: *w, mass: w.mass(p)? }
        }
        ScoringRule::Cl(w) => {
            needs.log_pdf = true;
            Plan::Cl { w: *w, mass: w.mass(p)? }
        }
        ScoringRule::Pwl(w) => {
            needs.log_pdf = true;
            Plan::Pwl { w: *w, mass: w.mass(p)? }
        }
        ScoringRule::Wh(w) => {
            needs.derivs = true;
            Plan::Wh(*w)
        }
        ScoringRule::Qcrps { r_alpha } => Plan::Qcrps(*r_alpha),
        ScoringRule::Conditional { weight, .. } => {
            needs.log_pdf = true;
            Plan::Conditional { w: *weight, mass: weight.mass(p)? }
        }
        ScoringRule::BinaryAugmented { binary, weight } => {
            Plan::Binary { b: *binary, w: *weight, mass: binary_mass(weight, p)? }
        }
        ScoringRule::Sum(parts) => Plan::Sum(parts.iter().map(|r| plan(r, p, tails, needs)).collect::<Result<_>>()?),
    })
}

impl PreparedRule {
    /// Binds `rule` to `p`. A tail table is built when the rule needs one and
    /// none is supplied; pass a shared table to reuse it across rules.
    pub fn new(rule: &ScoringRule, p: &Density, tails: Option<Arc<TailTable>>) -> Result<Self> {
        rule.validate()?;
        let tails = match tails {
            Some(t) => Some(t),
            None if uses_tails(rule) => Some(Arc::new(TailTable::new(p))),
            None => None,
        };
        let mut needs = Needs::default();
        let plan = plan(rule, p, tails.as_deref(), &mut needs)?;
        Ok(PreparedRule { rule: rule.clone(), density: p.clone(), tails, plan, needs })
    }

    pub fn rule(&self) -> &ScoringRule {
        &self.rule
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn needs(&self) -> Needs {
        self.needs
    }

    pub fn features(&self, x: f64) -> PointFeatures {
        PointFeatures::compute(&self.density, self.tails.as_deref(), x, self.needs)
    }

    pub fn score(&self, x: f64) -> Result<ScoreValue> {
        self.score_with(&self.features(x))
    }

    /// Score from features computed with at least [`PreparedRule::needs`].
    pub fn score_with(&self, f: &PointFeatures) -> Result<ScoreValue> {
        ScoreValue::new(eval(&self.plan, &self.density, f)?)
    }
}

fn eval(plan: &Plan, p: &Density, f: &PointFeatures) -> Result<f64> {
    let x = f.x;
    Ok(match plan {
        Plan::LogS => kernels::logs(f.log_pdf),
        Plan::Hy => kernels::hy(f.dlog, f.d2ratio),
        Plan::Crps => f.left.1 + f.right.1,
        Plan::TwRight { r, at_r } => {
            let at_m = if x > *r { f.right } else { *at_r };
            kernels::twcrps_right(*r, x, *at_r, at_m)
        }
        Plan::TwLeft { r, at_r } => {
            let at_m = if x < *r { f.left } else { *at_r };
            kernels::twcrps_left(*r, x, *at_r, at_m)
        }
        Plan::TwZero => 0.0,
        Plan::TwDirect(w) => twcrps(p, x, w)?,
        Plan::Csl { w, mass } => kernels::csl(w.eval(x), f.log_pdf, *mass),
        Plan::Cl { w, mass } => kernels::cl(w.eval(x), f.log_pdf, *mass),
        Plan::Pwl { w, mass } => kernels::pwl(w.eval(x), f.log_pdf, *mass),
        Plan::Wh(w) => {
            let wx = w.eval(x);
            let dwx = w.deriv(x)?;
            if wx == 0.0 && dwx == 0.0 {
                0.0
            } else {
                kernels::wh(wx, dwx, f.dlog, f.d2ratio)
            }
        }
        Plan::Conditional { w, mass } => {
            let wx = w.eval(x);
            if wx == 0.0 {
                0.0
            } else {
                kernels::conditional_logs(wx, f.log_pdf, *mass)
            }
        }
        Plan::Binary { b, w, mass } => binary_value(*b, w.eval(x), *mass),
        Plan::Qcrps(r) => qcrps(p, x, *r)?,
        Plan::Sum(parts) => {
            let mut s = 0.0;
            for part in parts {
                s += eval(part, p, f)?;
            }
            s
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::score;

    #[test]
    fn agrees_with_direct_scores() {
        let smooth = WeightFunction::smooth_right(0.5, 0.5).unwrap();
        let rules = [
            ScoringRule::LogS,
            ScoringRule::Hy,
            ScoringRule::Csl(WeightFunction::right(0.5)),
            ScoringRule::Cl(WeightFunction::left(-0.2)),
            ScoringRule::Pwl(WeightFunction::interval(-1.0, 1.0).unwrap()),
            ScoringRule::Wh(smooth),
            ScoringRule::Conditional { base: Box::new(ScoringRule::LogS), weight: smooth },
            ScoringRule::BinaryAugmented { binary: BinaryScore::BarS, weight: WeightFunction::right(0.0) },
        ];
        for p in [Density::hrt(), Density::cdfmix_h()] {
            for rule in &rules {
                let prep = PreparedRule::new(rule, &p, None).unwrap();
                for &x in &[-2.2, -0.3, 0.0, 0.6, 1.9] {
                    let a = prep.score(x).unwrap().value();
                    let b = score(rule, &p, x).unwrap().value();
                    assert_eq!(a.to_bits(), b.to_bits(), "{rule} {p} x={x}");
                }
            }
        }
    }

    #[test]
    fn crps_family_within_tolerance() {
        let p = Density::hlt();
        for rule in [
            ScoringRule::Crps,
            ScoringRule::TwCrps(WeightFunction::right(-1.0)),
            ScoringRule::TwCrps(WeightFunction::left(0.5)),
            ScoringRule::TwCrps(WeightFunction::smooth_right(0.0, 0.5).unwrap()),
        ] {
            let prep = PreparedRule::new(&rule, &p, None).unwrap();
            for &x in &[-4.0, -0.7, 0.2, 3.0] {
                let a = prep.score(x).unwrap().value();
                let b = score(&rule, &p, x).unwrap().value();
                assert!((a - b).abs() < 1e-9, "{rule} x={x}");
            }
        }
    }
}
