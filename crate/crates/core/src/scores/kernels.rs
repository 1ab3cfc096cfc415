//! Pointwise score formulas in terms of precomputed ingredients.
//!
//! Each kernel takes the weight value `w(x)` (and `w'(x)` where needed), the
//! log-density or log-derivative ratios at the observation, and the weight
//! mass `m = ∫ p w`. Terms multiplied by a zero weight vanish, which is the
//! `0 · log 0 = 0 · log ∞ = 0` convention.

/// `−w log p(x)`.
#[inline]
pub fn weighted_neg_log(wx: f64, log_p: f64) -> f64 {
    if wx == 0.0 {
        0.0
    } else {
        -wx * log_p
    }
}

/// Logarithmic score `−log p(x)`.
#[inline]
pub fn logs(log_p: f64) -> f64 {
    -log_p
}

/// Conditional likelihood `−w log p(x) + w log m`.
#[inline]
pub fn cl(wx: f64, log_p: f64, mass: f64) -> f64 {
    if wx == 0.0 {
        0.0
    } else {
        -wx * log_p + wx * mass.ln()
    }
}

/// Censored likelihood `−w log p(x) − (1 − w) log(1 − m)`.
#[inline]
pub fn csl(wx: f64, log_p: f64, mass: f64) -> f64 {
    let inside = weighted_neg_log(wx, log_p);
    if wx == 1.0 {
        inside
    } else {
        inside - (1.0 - wx) * (1.0 - mass).ln()
    }
}

/// Penalized weighted likelihood `−w log p(x) − w + m`.
#[inline]
pub fn pwl(wx: f64, log_p: f64, mass: f64) -> f64 {
    weighted_neg_log(wx, log_p) - wx + mass
}

/// Renormalized-density log score `−w log(w p(x) / m)`.
#[inline]
pub fn conditional_logs(wx: f64, log_p: f64, mass: f64) -> f64 {
    if wx == 0.0 {
        0.0
    } else {
        -wx * (log_p + wx.ln() - mass.ln())
    }
}

/// Hyvärinen score `2 p''/p − (p'/p)²`.
#[inline]
pub fn hy(dlog: f64, d2ratio: f64) -> f64 {
    2.0 * d2ratio - dlog * dlog
}

/// Weighted Hyvärinen score `2 (p''/p) w − (p'/p)² w + 2 (p'/p) w'`.
#[inline]
pub fn wh(wx: f64, dwx: f64, dlog: f64, d2ratio: f64) -> f64 {
    if wx == 0.0 && dwx == 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    if wx != 0.0 {
        s += wx * (2.0 * d2ratio - dlog * dlog);
    }
    if dwx != 0.0 {
        s += 2.0 * dlog * dwx;
    }
    s
}

/// Threshold-weighted CRPS for `w = 1{z ≥ r}` from right-tail integrals.
///
/// `tail_s(t) = ∫_t^∞ S` and `tail_s2(t) = ∫_t^∞ S²` where `S = 1 − F`;
/// `at_r` holds both at the threshold and `at_m` both at `max(r, x)`.
/// Only the survival function on `[r, ∞)` enters.
#[inline]
pub fn twcrps_right(r: f64, x: f64, at_r: (f64, f64), at_m: (f64, f64)) -> f64 {
    let m = r.max(x);
    (m - r) - 2.0 * (at_r.0 - at_m.0) + at_r.1
}

/// Threshold-weighted CRPS for `w = 1{z ≤ r}` from left-tail integrals
/// `∫_{−∞}^t F` and `∫_{−∞}^t F²`, evaluated at `r` and at `min(r, x)`.
#[inline]
pub fn twcrps_left(r: f64, x: f64, at_r: (f64, f64), at_m: (f64, f64)) -> f64 {
    let m = r.min(x);
    (r - m) - 2.0 * (at_r.0 - at_m.0) + at_r.1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weight_terms_vanish() {
        assert_eq!(cl(0.0, f64::NEG_INFINITY, 0.3), 0.0);
        assert_eq!(csl(1.0, -1.0, 1.0), 1.0);
        assert_eq!(conditional_logs(0.0, f64::NEG_INFINITY, 0.5), 0.0);
        assert_eq!(wh(0.0, 0.0, f64::NAN, f64::NAN), 0.0);
    }

    #[test]
    fn log_zero_gives_infinity() {
        assert_eq!(logs(f64::NEG_INFINITY), f64::INFINITY);
        assert_eq!(csl(1.0, f64::NEG_INFINITY, 0.5), f64::INFINITY);
        assert_eq!(csl(0.0, -1.0, 1.0), f64::INFINITY);
    }
}
