use proptest::prelude::*;

use wsr_core::ingest::{evaluate_stream, synthetic_stream, StreamTest};
use wsr_core::scores::{binary_augmented, divergence, score, BinaryScore};
use wsr_core::sim::{self, CurveFormat, Scenario, ScenarioConfig};
use wsr_core::testing::{dm_test, np_statistic, wilcoxon_test, Direction, NpTestSpec, Sided};
use wsr_core::{Density, ScoringRule, WeightFunction};

fn value(rule: &ScoringRule, p: &Density, x: f64) -> f64 {
    score(rule, p, x).unwrap().value()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dm_is_antisymmetric(d in prop::collection::vec(-5.0f64..5.0, 3..60)) {
        let neg: Vec<f64> = d.iter().map(|v| -v).collect();
        let a = dm_test(&d, Sided::Two, 0.05).unwrap();
        let b = dm_test(&neg, Sided::Two, 0.05).unwrap();
        prop_assert_eq!(a.statistic, -b.statistic);
        prop_assert_eq!(a.p_value, b.p_value);
        prop_assert_eq!(a.reject_prob, b.reject_prob);
    }

    #[test]
    fn wilcoxon_p_value_is_a_probability(d in prop::collection::vec(-3.0f64..3.0, 1..40)) {
        let r = wilcoxon_test(&d, 0.025).unwrap();
        if let Some(p) = r.p_value {
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert_eq!(r.reject_prob == 1.0, p <= 0.025);
        }
    }

    #[test]
    fn likelihood_identity_chain(x in -6.0f64..6.0, r in -2.0f64..2.0, which in 0usize..4) {
        let p = [Density::standard_normal(), Density::hlt(), Density::hrt(), Density::cdfmix_g()][which].clone();
        let w = WeightFunction::right(r);
        let csl = value(&ScoringRule::Csl(w), &p, x);
        let pwl = value(&ScoringRule::Pwl(w), &p, x);
        let cl = value(&ScoringRule::Cl(w), &p, x);
        let bars_c = value(&binary_augmented(BinaryScore::BarS, w.complement().unwrap()).unwrap(), &p, x);
        let bars_w = value(&binary_augmented(BinaryScore::BarS, w).unwrap(), &p, x);
        prop_assert!((csl - pwl - bars_c).abs() < 1e-10);
        prop_assert!((pwl - cl - bars_w).abs() < 1e-10);
    }

    #[test]
    fn weighted_rules_localize_on_the_right_half(x in -6.0f64..6.0, r in 0.0f64..3.0) {
        // hlt and N(0,1) agree on [0, inf) and carry the same mass there
        let (a, b) = (Density::standard_normal(), Density::hlt());
        let w = WeightFunction::right(r);
        for rule in [ScoringRule::Csl(w), ScoringRule::Cl(w), ScoringRule::Pwl(w), ScoringRule::TwCrps(w)] {
            prop_assert_eq!(value(&rule, &a, x), value(&rule, &b, x));
        }
    }

    #[test]
    fn normal_pairs_have_nonnegative_divergence(mu in -1.0f64..1.0, sigma in 0.5f64..2.0, r in -1.0f64..1.0) {
        let p = Density::normal(mu, sigma).unwrap();
        let q = Density::standard_normal();
        let w = WeightFunction::right(r);
        for rule in [ScoringRule::LogS, ScoringRule::Crps, ScoringRule::Csl(w), ScoringRule::Pwl(w), ScoringRule::TwCrps(w)] {
            prop_assert!(divergence(&rule, &p, &q).unwrap() >= -1e-8, "{}", rule);
        }
    }

    #[test]
    fn unrestricted_region_gives_the_full_likelihood_ratio(sample in prop::collection::vec(-4.0f64..4.0, 1..30)) {
        let (p0, p1) = (Density::standard_normal(), Density::scaled_t(4.0, 1.0, 0.0).unwrap());
        let spec = NpTestSpec::new(p0.clone(), p1.clone(), WeightFunction::one(), sample.len(), 0.05).unwrap();
        let llr: f64 = sample.iter().map(|&x| p1.log_pdf(x) - p0.log_pdf(x)).sum();
        prop_assert!((np_statistic(&spec, &sample).unwrap() - llr).abs() < 1e-12);
    }
}

#[test]
fn swapping_stream_columns_negates_t() {
    let s = synthetic_stream(
        80,
        &Density::standard_normal(),
        &Density::hlt(),
        &Density::scaled_t(4.0, 1.0, 0.0).unwrap(),
        11,
    );
    let rules = vec!["logs".to_string(), "csl".to_string(), "crps".to_string()];
    let weights = [WeightFunction::left(0.0), WeightFunction::right(-1.0)];
    let a = evaluate_stream(&s, &rules, &weights, &[StreamTest::Dm], 0.05).unwrap();
    let b = evaluate_stream(&s.swapped(), &rules, &weights, &[StreamTest::Dm], 0.05).unwrap();
    for (ra, rb) in a[0].rows.iter().zip(&b[0].rows) {
        for (ca, cb) in ra.cells.iter().zip(&rb.cells) {
            let (ta, tb) = (ca.result.unwrap().statistic, cb.result.unwrap().statistic);
            assert_eq!(ta, -tb, "{}", ra.rule);
        }
    }
}

#[test]
fn stream_generated_by_second_forecast_favours_it() {
    let truth = Density::scaled_t(4.0, 1.0, 0.0).unwrap();
    let s = synthetic_stream(2000, &truth, &Density::standard_normal(), &truth, 5);
    let t = evaluate_stream(&s, &["logs".to_string()], &[WeightFunction::one()], &[StreamTest::Dm], 0.05).unwrap();
    let r = t[0].rows[0].cells[0].result.unwrap();
    assert!(r.statistic > 0.0 && r.rejects());
    assert_eq!(r.direction, Direction::FavorSecond);
}

#[test]
fn stream_csv_round_trips() {
    let s = synthetic_stream(25, &Density::hrt(), &Density::hlt(), &Density::cdfmix_h(), 2);
    let back = wsr_core::ingest::parse_stream_str(&s.to_csv(), "memory").unwrap();
    assert_eq!(back, s);
}

fn small(scenario: Scenario, seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(scenario);
    cfg.replications = 60;
    cfg.r_grid = vec![-1.0, 0.0, 1.5];
    cfg.seed = seed;
    cfg
}

#[test]
fn scenario_runs_are_reproducible_and_round_trip() {
    let cfg = small(Scenario::B, 9);
    let a = sim::run_scenario(&cfg).unwrap();
    assert_eq!(a, sim::run_scenario(&cfg).unwrap());
    for format in [CurveFormat::Csv, CurveFormat::Json] {
        let text = sim::curve_to_string(&a, format).unwrap();
        assert_eq!(sim::parse_curve(&text, format, "memory").unwrap(), a);
    }
    let other = sim::run_scenario(&small(Scenario::B, 10)).unwrap();
    assert_ne!(a, other);
}

#[test]
fn curves_are_frequencies_and_unweighted_rules_ignore_r() {
    let curve = sim::run_scenario(&small(Scenario::A2, 4)).unwrap();
    for p in &curve.points {
        assert!(p.favor1 >= 0.0 && p.favor2 >= 0.0 && p.favor1 + p.favor2 <= 1.0);
        if matches!(p.rule.as_str(), "logs" | "crps" | "hy") {
            let first = curve.get(&p.rule, p.test, -1.0).unwrap();
            assert_eq!((p.favor1, p.favor2), (first.favor1, first.favor2));
        }
    }
}
