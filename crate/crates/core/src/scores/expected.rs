use std::cell::RefCell;

use crate::dist::Density;
use crate::error::{Error, Result};
use crate::quad::gauss_kronrod;
use crate::weights::WeightFunction;

use super::crps::{cdf_sf, TAIL_EPS};
use super::prepared::PreparedRule;
use super::ScoringRule;

const SUPPORT_EPS: f64 = 1e-20;
const ABS_TOL: f64 = 1e-11;
const REL_TOL: f64 = 1e-11;

/// Expected score `S(p, q) = ∫ S(p, x) q(x) dx`.
///
/// Pointwise rules are integrated over the central `1 − 2e−20` of `q`, with
/// the range found on a power-of-two lattice so heavy tails reach far enough
/// for scores that grow like `x²`. The
/// CRPS family uses the Fubini form `∫ w (F_p² − 2 F_p F_q + F_q) dz`, which
/// avoids nesting two quadratures.
pub fn expected_score(rule: &ScoringRule, p: &Density, q: &Density) -> Result<f64> {
    rule.validate()?;
    match rule {
        ScoringRule::Crps => crps_expected(p, q, &WeightFunction::one()),
        ScoringRule::TwCrps(w) => crps_expected(p, q, w),
        ScoringRule::Sum(parts) => parts.iter().map(|r| expected_score(r, p, q)).sum(),
        _ => {
            let prep = PreparedRule::new(rule, p, None)?;
            integrate_over(q, rule.weight(), &[p], |x| Ok(prep.score(x)?.value()))
        }
    }
}

/// Divergence `S(p, q) − S(q, q)`; nonnegative for proper rules.
///
/// Pointwise rules integrate the score difference in a single quadrature.
pub fn divergence(rule: &ScoringRule, p: &Density, q: &Density) -> Result<f64> {
    rule.validate()?;
    match rule {
        ScoringRule::Crps | ScoringRule::TwCrps(_) => Ok(expected_score(rule, p, q)? - expected_score(rule, q, q)?),
        ScoringRule::Sum(parts) => parts.iter().map(|r| divergence(r, p, q)).sum(),
        _ => {
            let sp = PreparedRule::new(rule, p, None)?;
            let sq = PreparedRule::new(rule, q, None)?;
            integrate_over(q, rule.weight(), &[p], |x| {
                sp.score(x)?.diff(sq.score(x)?).ok_or(Error::Indeterminate { index: 0 })
            })
        }
    }
}

/// `∫ g(x) q(x) dx` over the effective support of `q`, split at knots and
/// weight break points.
fn integrate_over<G>(q: &Density, w: Option<WeightFunction>, others: &[&Density], g: G) -> Result<f64>
where
    G: Fn(f64) -> Result<f64>,
{
    let lo = q.lower_bound_from(-1.0, SUPPORT_EPS);
    let hi = q.upper_bound_from(1.0, SUPPORT_EPS);
    let mut points = vec![lo, hi, 0.0];
    let mut t = 1.0;
    while t < hi.max(-lo) {
        points.push(t);
        points.push(-t);
        t *= 2.0;
    }
    points.extend(q.knots());
    for d in others {
        points.extend(d.knots());
    }
    if let Some(w) = w {
        points.extend(w.breakpoints());
    }
    let failure = RefCell::new(None);
    let f = |x: f64| match g(x) {
        Ok(v) => v * q.pdf(x),
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let total = integrate_pieces(&f, lo, hi, points)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(total)
}

fn integrate_pieces<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, mut points: Vec<f64>) -> Result<f64> {
    points.retain(|&t| t >= lo && t <= hi);
    points.push(lo);
    points.push(hi);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let share = ABS_TOL / points.len() as f64;
    let mut total = 0.0;
    for seg in points.windows(2) {
        total += gauss_kronrod(f, seg[0], seg[1], share, REL_TOL)?;
    }
    Ok(total)
}

fn crps_expected(p: &Density, q: &Density, w: &WeightFunction) -> Result<f64> {
    let lower = p.lower_bound_from(-1.0, TAIL_EPS).min(q.lower_bound_from(-1.0, TAIL_EPS));
    let upper = p.upper_bound_from(1.0, TAIL_EPS).max(q.upper_bound_from(1.0, TAIL_EPS));
    let (lo, hi) = match *w {
        WeightFunction::IndicatorRight { r, .. } => (r.max(lower), upper),
        WeightFunction::IndicatorLeft { r, .. } => (lower, r.min(upper)),
        WeightFunction::IndicatorInterval { a, b } => (a.max(lower), b.min(upper)),
        WeightFunction::SmoothRight { r, delta } => ((r - delta).max(lower), upper),
        WeightFunction::Constant(0.0) => return Ok(0.0),
        _ => (lower, upper),
    };
    if !(hi > lo) {
        return Ok(0.0);
    }
    let mut points = vec![0.0];
    points.extend(p.knots());
    points.extend(q.knots());
    points.extend(w.breakpoints());
    let mut t = 0.25;
    while t < hi.max(-lo) {
        points.push(t);
        points.push(-t);
        t *= 2.0;
    }
    let f = |z: f64| {
        let (fp, sp) = cdf_sf(p, z);
        let (fq, sq) = cdf_sf(q, z);
        if z >= 0.0 {
            sp * sp - 2.0 * sp * sq + sq
        } else {
            fp * fp - 2.0 * fp * fq + fq
        }
    };
    points.retain(|&t| t > lo && t < hi);
    points.push(lo);
    points.push(hi);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let share = ABS_TOL / points.len() as f64;
    let mut total = 0.0;
    for seg in points.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        // indicator weights are constant on every piece; evaluating at the
        // midpoint sidesteps the open or closed end points
        if w.is_indicator() {
            let c = w.eval(0.5 * (a + b));
            if c != 0.0 {
                total += c * gauss_kronrod(f, a, b, share, REL_TOL)?;
            }
        } else {
            total += gauss_kronrod(|z| w.eval(z) * f(z), a, b, share, REL_TOL)?;
        }
    }
    Ok(total)
}
