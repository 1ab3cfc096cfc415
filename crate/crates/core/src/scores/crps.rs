use std::sync::OnceLock;

use crate::dist::Density;
use crate::error::{Error, Result};
use crate::quad::{adaptive_simpson, GaussLegendre};
use crate::weights::WeightFunction;

/// Tail probability beyond which the twCRPS integrand is cut off.
pub(crate) const TAIL_EPS: f64 = 1e-13;
const SIMPSON_TOL: f64 = 1e-10;
const QCRPS_TOP: f64 = 1.0 - 1e-10;

/// `(F(z), S(z))`, computed from the survival function right of zero and
/// from the cdf left of it.
///
/// Two densities that agree on a half-line therefore produce bit-identical
/// values there.
#[inline]
pub(crate) fn cdf_sf(p: &Density, z: f64) -> (f64, f64) {
    if z >= 0.0 {
        let s = p.sf(z);
        (1.0 - s, s)
    } else {
        let f = p.cdf(z);
        (f, 1.0 - f)
    }
}

/// Pieces of the real line where `w > 0`, truncated to the effective support
/// of `p` and always containing `x` when `x` is in the region.
fn support(p: &Density, x: f64, w: &WeightFunction) -> Vec<(f64, f64)> {
    let upper = |from: f64| p.upper_bound_from(from, TAIL_EPS);
    let lower = |from: f64| p.lower_bound_from(from, TAIL_EPS);
    match *w {
        WeightFunction::IndicatorRight { r, .. } => vec![(r, upper(r.max(x)))],
        WeightFunction::IndicatorLeft { r, .. } => vec![(lower(r.min(x)), r)],
        WeightFunction::IndicatorInterval { a, b } => vec![(a, b)],
        WeightFunction::OutsideInterval { a, b } => {
            vec![(lower(a.min(x)), a), (b, upper(b.max(x)))]
        }
        WeightFunction::SmoothRight { r, delta } => vec![(r - delta, upper((r + delta).max(x)))],
        WeightFunction::Constant(0.0) => Vec::new(),
        WeightFunction::Constant(_) => vec![(lower(x), upper(x))],
    }
}

/// Split points: signed powers of two and zero.
fn lattice_breaks(a: f64, b: f64) -> impl Iterator<Item = f64> {
    (-3..64)
        .flat_map(|k| {
            let t = 2f64.powi(k);
            [t, -t]
        })
        .chain(std::iter::once(0.0))
        .filter(move |&t| t > a && t < b)
}

/// Threshold-weighted CRPS `∫ (F(z) − 1{x ≤ z})² w(z) dz` by adaptive
/// Simpson on pieces split at `x`, at the density's knots and at the
/// weight's break points. With `w ≡ 1` this is the CRPS.
pub fn twcrps(p: &Density, x: f64, w: &WeightFunction) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("observation must be finite, got {x}")));
    }
    let mut total = 0.0;
    for (lo, hi) in support(p, x, w) {
        if !(hi > lo) {
            continue;
        }
        let mut points = vec![lo, hi];
        points.extend(lattice_breaks(lo, hi));
        points.extend(p.knots().into_iter().filter(|&t| t > lo && t < hi));
        points.extend(w.breakpoints().into_iter().filter(|&t| t > lo && t < hi));
        if x > lo && x < hi {
            points.push(x);
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        let tol = SIMPSON_TOL / points.len() as f64;
        for seg in points.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let mid = 0.5 * (a + b);
            // the integrand jumps at z = x, which is a segment end
            let below = mid < x;
            let flat = if w.is_indicator() { Some(w.eval(mid)) } else { None };
            if flat == Some(0.0) {
                continue;
            }
            let f = |z: f64| {
                let (cdf, sf) = cdf_sf(p, z);
                let core = if below { cdf * cdf } else { sf * sf };
                match flat {
                    Some(c) => c * core,
                    None => w.eval(z) * core,
                }
            };
            total += adaptive_simpson(f, a, b, tol)?;
        }
    }
    Ok(total)
}

/// Quantile score `2 (1{x < q} − α)(q − x)`.
pub fn quantile_score(alpha: f64, q: f64, x: f64) -> f64 {
    let hit = if x < q { 1.0 } else { 0.0 };
    2.0 * (hit - alpha) * (q - x)
}

fn rule(order: usize) -> &'static GaussLegendre {
    static R256: OnceLock<GaussLegendre> = OnceLock::new();
    static R512: OnceLock<GaussLegendre> = OnceLock::new();
    match order {
        256 => R256.get_or_init(|| GaussLegendre::new(256)),
        _ => R512.get_or_init(|| GaussLegendre::new(512)),
    }
}

/// Quantile-weighted CRPS `∫_{r_alpha}^1 QS_α(F⁻¹(α), x) dα`.
///
/// A fixed 512-node Gauss–Legendre grid, split into two 256-node halves at
/// the kink `α = F(x)` when it falls inside, truncated at `1 − 1e−10`.
pub fn qcrps(p: &Density, x: f64, r_alpha: f64) -> Result<f64> {
    if !(r_alpha > 0.0 && r_alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("qcrps level must lie in (0, 1), got {r_alpha}")));
    }
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("observation must be finite, got {x}")));
    }
    let integrand = |alpha: f64| {
        let q = if alpha < 0.5 { p.quantile_unchecked(alpha) } else { p.isf_unchecked(1.0 - alpha) };
        quantile_score(alpha, q, x)
    };
    let kink = p.cdf(x);
    let top = QCRPS_TOP;
    if r_alpha >= top {
        return Ok(0.0);
    }
    let v = if kink > r_alpha && kink < top {
        let g = rule(256);
        g.integrate(integrand, r_alpha, kink) + g.integrate(integrand, kink, top)
    } else {
        rule(512).integrate(integrand, r_alpha, top)
    };
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::student::std_normal;

    fn normal_crps(x: f64) -> f64 {
        x * (2.0 * std_normal::cdf(x) - 1.0) + 2.0 * std_normal::pdf(x) - 1.0 / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn crps_matches_gaussian_closed_form() {
        let p = Density::standard_normal();
        for &x in &[-4.0, -1.3, 0.0, 0.2, 2.7] {
            let v = twcrps(&p, x, &WeightFunction::one()).unwrap();
            assert!((v - normal_crps(x)).abs() < 1e-9, "x={x}: {v}");
        }
        let v0 = twcrps(&p, 0.0, &WeightFunction::one()).unwrap();
        assert!((v0 - 0.233_694_977_255_109).abs() < 1e-10);
        assert!((v0 - 0.233_741).abs() < 1e-4);
    }

    #[test]
    fn right_half_is_half_the_crps_at_zero() {
        let p = Density::standard_normal();
        let v = twcrps(&p, 0.0, &WeightFunction::right(0.0)).unwrap();
        assert!((v - 0.5 * normal_crps(0.0)).abs() < 1e-10);
        assert!((v - 0.116_87).abs() < 1e-4);
    }

    #[test]
    fn left_and_right_add_up() {
        for p in [Density::hlt(), Density::cdfmix_h(), Density::skew_t(5.0, 1.3, 0.2, 1.1).unwrap()] {
            for &(x, r) in &[(0.3, -0.5), (-2.0, 1.0), (1.5, 0.7)] {
                let all = twcrps(&p, x, &WeightFunction::one()).unwrap();
                let right = twcrps(&p, x, &WeightFunction::right(r)).unwrap();
                let left = twcrps(&p, x, &WeightFunction::left(r)).unwrap();
                assert!((all - right - left).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn qcrps_kink_example_and_riemann_oracle() {
        assert_eq!(quantile_score(0.5, 0.0, 1.0), 1.0);
        let p = Density::standard_normal();
        let n = 100_000;
        let h = 0.5 / n as f64;
        let mut riemann = 0.0;
        for i in 0..n {
            let a = 0.5 + (i as f64 + 0.5) * h;
            riemann += quantile_score(a, std_normal::quantile(a), 0.0) * h;
        }
        let v = qcrps(&p, 0.0, 0.5).unwrap();
        assert!((v - riemann).abs() < 1e-4, "{v} vs {riemann}");
    }

    #[test]
    fn qcrps_full_range_is_crps() {
        let p = Density::standard_normal();
        for &x in &[-1.0, 0.0, 2.0] {
            let v = qcrps(&p, x, 1e-12).unwrap();
            assert!((v - normal_crps(x)).abs() < 1e-3, "x={x}");
        }
        assert!(qcrps(&p, 0.0, 1.0).is_err());
    }
}
