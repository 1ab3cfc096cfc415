use rayon::prelude::*;

use crate::dist::Density;
use crate::error::{Error, Result};

use super::{score, ScoreValue, ScoringRule};

/// `S(p_k, x_k)` for every row; rows are scored in parallel.
pub fn score_series(rule: &ScoringRule, forecasts: &[Density], obs: &[f64]) -> Result<Vec<ScoreValue>> {
    if forecasts.len() != obs.len() {
        return Err(Error::LengthMismatch { left: forecasts.len(), right: obs.len() });
    }
    if obs.is_empty() {
        return Err(Error::InvalidParameter("empty observation series".into()));
    }
    rule.validate()?;
    let scored: Vec<Result<ScoreValue>> =
        forecasts.par_iter().zip(obs.par_iter()).map(|(p, &x)| score(rule, p, x)).collect();
    scored.into_iter().collect()
}

/// `S(f1_k, x_k) − S(f2_k, x_k)`; positive entries favour the second forecast.
pub fn score_diff_series(rule: &ScoringRule, first: &[Density], second: &[Density], obs: &[f64]) -> Result<Vec<f64>> {
    if first.len() != second.len() {
        return Err(Error::LengthMismatch { left: first.len(), right: second.len() });
    }
    let a = score_series(rule, first, obs)?;
    let b = score_series(rule, second, obs)?;
    a.iter().zip(&b).enumerate().map(|(index, (s1, s2))| s1.diff(*s2).ok_or(Error::Indeterminate { index })).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightFunction;

    #[test]
    fn identical_forecasts_give_zero_diffs() {
        let f = vec![Density::hlt(); 4];
        let x = [-1.0, 0.0, 0.5, 2.0];
        let d = score_diff_series(&ScoringRule::Crps, &f, &f, &x).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn equidistant_point_gives_zero_logs_diff() {
        let a = [Density::normal(0.0, 1.0).unwrap()];
        let b = [Density::normal(1.0, 1.0).unwrap()];
        let d = score_diff_series(&ScoringRule::LogS, &a, &b, &[0.5]).unwrap();
        assert_eq!(d, vec![0.0]);
    }

    #[test]
    fn censored_diff_outside_region_is_exactly_zero() {
        let rule = ScoringRule::Csl(WeightFunction::right(0.0));
        let d = score_diff_series(&rule, &[Density::hlt()], &[Density::standard_normal()], &[-1.0]).unwrap();
        assert_eq!(d, vec![0.0]);
    }

    #[test]
    fn length_mismatch_and_indeterminate() {
        let f = [Density::standard_normal()];
        assert!(matches!(score_series(&ScoringRule::LogS, &f, &[0.0, 1.0]), Err(Error::LengthMismatch { .. })));
        let rule = ScoringRule::Csl(WeightFunction::right(-40.0));
        assert!(matches!(score_diff_series(&rule, &f, &f, &[-50.0]), Err(Error::Indeterminate { index: 0 })));
    }
}
