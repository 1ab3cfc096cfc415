//! Weight functions `w: ℝ → [0, 1]` selecting a region of interest.

use std::fmt;

use crate::dist::Density;
use crate::error::{Error, Result};
use crate::quad::gauss_kronrod;

/// Masses at or below this are treated as zero.
pub const MIN_MASS: f64 = 1e-300;

/// Default half-width of the smooth ramp.
pub const DEFAULT_DELTA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightFunction {
    /// `1{x ≥ r}`, or `1{x > r}` when `closed` is false.
    IndicatorRight { r: f64, closed: bool },
    /// `1{x ≤ r}`, or `1{x < r}` when `closed` is false.
    IndicatorLeft { r: f64, closed: bool },
    /// `1{a ≤ x ≤ b}`.
    IndicatorInterval { a: f64, b: f64 },
    /// `1{x < a or x > b}`, the complement of an interval.
    OutsideInterval { a: f64, b: f64 },
    /// C¹ ramp `w̃((x − r + δ)/(2δ))` with `w̃(y) = 3y² − 2y³` on `(r − δ, r + δ)`.
    SmoothRight { r: f64, delta: f64 },
    /// Constant 0 or 1.
    Constant(f64),
}

impl WeightFunction {
    pub fn right(r: f64) -> Self {
        WeightFunction::IndicatorRight { r, closed: true }
    }

    pub fn left(r: f64) -> Self {
        WeightFunction::IndicatorLeft { r, closed: true }
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("interval needs a < b, got ({a}, {b})")));
        }
        Ok(WeightFunction::IndicatorInterval { a, b })
    }

    pub fn smooth_right(r: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) || !r.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "smooth weight needs finite r and delta > 0, got ({r}, {delta})"
            )));
        }
        Ok(WeightFunction::SmoothRight { r, delta })
    }

    pub fn one() -> Self {
        WeightFunction::Constant(1.0)
    }

    pub fn zero() -> Self {
        WeightFunction::Constant(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            WeightFunction::IndicatorRight { r, closed } => indicator(if closed { x >= r } else { x > r }),
            WeightFunction::IndicatorLeft { r, closed } => indicator(if closed { x <= r } else { x < r }),
            WeightFunction::IndicatorInterval { a, b } => indicator(a <= x && x <= b),
            WeightFunction::OutsideInterval { a, b } => indicator(x < a || x > b),
            WeightFunction::SmoothRight { r, delta } => {
                let y = (x - r + delta) / (2.0 * delta);
                if y <= 0.0 {
                    0.0
                } else if y >= 1.0 {
                    1.0
                } else {
                    y * y * (3.0 - 2.0 * y)
                }
            }
            WeightFunction::Constant(c) => c,
        }
    }

    /// `w'(x)`; only defined for smooth and constant weights.
    pub fn deriv(&self, x: f64) -> Result<f64> {
        match *self {
            WeightFunction::SmoothRight { r, delta } => {
                let y = (x - r + delta) / (2.0 * delta);
                if y <= 0.0 || y >= 1.0 {
                    Ok(0.0)
                } else {
                    Ok(6.0 * y * (1.0 - y) / (2.0 * delta))
                }
            }
            WeightFunction::Constant(_) => Ok(0.0),
            _ => Err(Error::Unsupported(format!("derivative of indicator weight {self}"))),
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self, WeightFunction::SmoothRight { .. } | WeightFunction::Constant(_))
    }

    pub fn is_indicator(&self) -> bool {
        !matches!(self, WeightFunction::SmoothRight { .. })
    }

    /// `∫ p w`; errors when the mass is degenerate.
    pub fn mass(&self, p: &Density) -> Result<f64> {
        let m = match *self {
            WeightFunction::IndicatorRight { r, .. } => p.sf(r),
            WeightFunction::IndicatorLeft { r, .. } => p.cdf(r),
            WeightFunction::IndicatorInterval { a, b } => {
                if a >= 0.0 {
                    p.sf(a) - p.sf(b)
                } else {
                    p.cdf(b) - p.cdf(a)
                }
            }
            WeightFunction::OutsideInterval { a, b } => p.cdf(a) + p.sf(b),
            WeightFunction::SmoothRight { r, delta } => {
                let ramp = gauss_kronrod(|x| p.pdf(x) * self.eval(x), r - delta, r + delta, 1e-15, 1e-13)?;
                ramp + p.sf(r + delta)
            }
            WeightFunction::Constant(c) => c,
        };
        if !(m > MIN_MASS) {
            return Err(Error::DegenerateMass { mass: m });
        }
        Ok(m.min(1.0))
    }

    /// `1 − w` for indicator and constant weights.
    pub fn complement(&self) -> Result<Self> {
        Ok(match *self {
            WeightFunction::IndicatorRight { r, closed } => WeightFunction::IndicatorLeft { r, closed: !closed },
            WeightFunction::IndicatorLeft { r, closed } => WeightFunction::IndicatorRight { r, closed: !closed },
            WeightFunction::IndicatorInterval { a, b } => WeightFunction::OutsideInterval { a, b },
            WeightFunction::OutsideInterval { a, b } => WeightFunction::IndicatorInterval { a, b },
            WeightFunction::Constant(c) => WeightFunction::Constant(1.0 - c),
            WeightFunction::SmoothRight { .. } => {
                return Err(Error::Unsupported("complement of a smooth weight".into()))
            }
        })
    }

    /// Points where `w` or `w'` is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            WeightFunction::IndicatorRight { r, .. } | WeightFunction::IndicatorLeft { r, .. } => vec![r],
            WeightFunction::IndicatorInterval { a, b } | WeightFunction::OutsideInterval { a, b } => vec![a, b],
            WeightFunction::SmoothRight { r, delta } => vec![r - delta, r + delta],
            WeightFunction::Constant(_) => Vec::new(),
        }
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl fmt::Display for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            WeightFunction::IndicatorRight { r, closed: true } => write!(f, "right({r})"),
            WeightFunction::IndicatorRight { r, closed: false } => write!(f, "above({r})"),
            WeightFunction::IndicatorLeft { r, closed: true } => write!(f, "left({r})"),
            WeightFunction::IndicatorLeft { r, closed: false } => write!(f, "below({r})"),
            WeightFunction::IndicatorInterval { a, b } => write!(f, "interval({a},{b})"),
            WeightFunction::OutsideInterval { a, b } => write!(f, "outside({a},{b})"),
            WeightFunction::SmoothRight { r, delta } => write!(f, "smoothright({r},{delta})"),
            WeightFunction::Constant(1.0) => f.write_str("one"),
            WeightFunction::Constant(_) => f.write_str("zero"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smooth_ramp_values() {
        let w = WeightFunction::smooth_right(0.0, 0.5).unwrap();
        assert_eq!(w.eval(0.0), 0.5);
        assert!((w.deriv(0.0).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(w.eval(-0.5), 0.0);
        assert_eq!(w.eval(0.5), 1.0);
    }

    #[test]
    fn right_indicator_is_closed() {
        let w = WeightFunction::right(1.0);
        assert_eq!(w.eval(0.999), 0.0);
        assert_eq!(w.eval(1.0), 1.0);
        assert_eq!(w.complement().unwrap().eval(1.0), 0.0);
        assert_eq!(w.complement().unwrap().eval(0.999), 1.0);
    }

    #[test]
    fn indicator_derivative_is_unsupported() {
        assert!(matches!(WeightFunction::right(0.0).deriv(1.0), Err(Error::Unsupported(_))));
        assert_eq!(WeightFunction::one().deriv(3.0).unwrap(), 0.0);
    }

    #[test]
    fn masses_under_standard_normal() {
        let n = Density::standard_normal();
        assert_eq!(WeightFunction::right(0.0).mass(&n).unwrap(), 0.5);
        // 1 - Φ(1) = erfc(1/√2)/2
        assert!((WeightFunction::right(1.0).mass(&n).unwrap() - 0.158_655_253_931_457_05).abs() < 1e-15);
        assert_eq!(WeightFunction::one().mass(&n).unwrap(), 1.0);
        assert_eq!(WeightFunction::right(0.0).complement().unwrap().mass(&n).unwrap(), 0.5);
    }

    #[test]
    fn complement_of_constant_and_smooth() {
        assert_eq!(WeightFunction::one().complement().unwrap(), WeightFunction::zero());
        assert!(WeightFunction::smooth_right(0.0, 0.5).unwrap().complement().is_err());
    }

    #[test]
    fn degenerate_mass() {
        let n = Density::standard_normal();
        assert!(matches!(WeightFunction::right(40.0).mass(&n), Err(Error::DegenerateMass { .. })));
        assert!(WeightFunction::zero().mass(&n).is_err());
    }

    #[test]
    fn smooth_mass_by_quadrature() {
        // by symmetry of the ramp around 0 and of φ, mass(smoothright(0, δ)) = 1/2
        let n = Density::standard_normal();
        let m = WeightFunction::smooth_right(0.0, 0.5).unwrap().mass(&n).unwrap();
        assert!((m - 0.5).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn complement_masses_sum_to_one(r in -4.0f64..4.0, width in 0.1f64..3.0, which in 0usize..4) {
            let w = match which {
                0 => WeightFunction::right(r),
                1 => WeightFunction::left(r),
                2 => WeightFunction::interval(r, r + width).unwrap(),
                _ => WeightFunction::IndicatorRight { r, closed: false },
            };
            for p in [Density::standard_normal(), Density::hlt(), Density::cdfmix_g()] {
                let a = w.mass(&p).unwrap();
                let b = w.complement().unwrap().mass(&p).unwrap();
                prop_assert!((a + b - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn smooth_matches_indicator_outside_ramp(r in -3.0f64..3.0, off in 0.5f64..5.0) {
            let s = WeightFunction::smooth_right(r, 0.5).unwrap();
            let i = WeightFunction::right(r);
            prop_assert_eq!(s.eval(r + off), i.eval(r + off));
            prop_assert_eq!(s.eval(r - off), i.eval(r - off));
        }

        #[test]
        fn smooth_derivative_matches_difference(r in -2.0f64..2.0, t in 0.01f64..0.99) {
            let s = WeightFunction::smooth_right(r, 0.5).unwrap();
            let x = r - 0.5 + t;
            let h = 1e-6;
            let fd = (s.eval(x + h) - s.eval(x - h)) / (2.0 * h);
            prop_assert!((fd - s.deriv(x).unwrap()).abs() < 1e-7);
            prop_assert!((0.0..=1.0).contains(&s.eval(x)));
        }
    }
}
