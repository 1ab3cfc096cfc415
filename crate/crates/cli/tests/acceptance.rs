//! Acceptance checks, one pass/fail line per criterion.
//!
//! Run with `cargo test -p wsr-cli --test acceptance -- --nocapture` to see
//! the report. The Monte Carlo criteria use the full 10000-replication budget.

use std::process::Command;
use std::time::Instant;

use wsr_core::dist::HalfHalf;
use wsr_core::quad::gauss_kronrod_with_breaks;
use wsr_core::scores::{divergence, score};
use wsr_core::sim::{self, RejectionCurve, Scenario, ScenarioConfig, TestKind};
use wsr_core::testing::{power_estimate, NpTestSpec, PowerTest};
use wsr_core::{verify, Density, ScoringRule, WeightFunction};

struct Outcome {
    passed: bool,
    detail: String,
}

type Check = (&'static str, fn() -> Outcome);

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn identities() -> Outcome {
    let start = Instant::now();
    let r = verify::identities(200, 42).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        r.passed && secs < 1.0,
        format!("max errors {:.2e} / {:.2e} (tol 1e-10), {secs:.3}s (limit 1s)", r.csl_pwl, r.pwl_cl),
    )
}

fn propriety() -> Outcome {
    let start = Instant::now();
    let rows = verify::propriety(6).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mut ok = secs < 30.0;
    let mut notes = Vec::new();
    for row in &rows {
        let family = row.rule.split('(').next().unwrap();
        if row.proper.1 && row.min_divergence < -1e-8 {
            ok = false;
            notes.push(format!("{} min divergence {:.2e}", row.rule, row.min_divergence));
        }
        if matches!(family, "cl" | "wh") && row.proportional_divergence.abs() > 1e-8 {
            ok = false;
            notes.push(format!("{} proportional divergence {:.2e}", row.rule, row.proportional_divergence));
        }
        if matches!(family, "csl" | "pwl" | "twcrps") && row.inside_divergence <= 1e-4 {
            ok = false;
            notes.push(format!("{} inside divergence {:.2e}", row.rule, row.inside_divergence));
        }
        ok &= row.passed();
    }
    outcome(ok, format!("{} rules, 6x6 grid, {secs:.2}s (limit 30s) {}", rows.len(), notes.join("; ")))
}

fn wh_formula() -> Outcome {
    let cat = verify::catalog();
    let w = WeightFunction::smooth_right(0.5, 0.5).unwrap();
    let rule = ScoringRule::wh(w).unwrap();
    let pairs = [(0, 1), (1, 0), (0, 2), (2, 3), (3, 4), (4, 0), (5, 6), (6, 1), (7, 0), (2, 5)];
    let mut worst = 0.0f64;
    for (i, j) in pairs {
        let (p, q) = (&cat[i], &cat[j]);
        let hi = q.upper_bound_from(1.0, 1e-20);
        let f = |x: f64| {
            let d = p.dlog(x) - q.dlog(x);
            d * d * q.pdf(x) * w.eval(x)
        };
        let exact = gauss_kronrod_with_breaks(f, 0.0, hi, &[0.5, 1.0], 1e-13, 1e-12).unwrap();
        worst = worst.max((divergence(&rule, p, q).unwrap() - exact).abs());
    }
    outcome(worst < 1e-6, format!("10 pairs, max |D_WH - integral| {worst:.2e} (tol 1e-6)"))
}

fn crps_check() -> Outcome {
    let n = Density::standard_normal();
    let crps = score(&ScoringRule::Crps, &n, 0.0).unwrap().value();
    let tw = ScoringRule::TwCrps(WeightFunction::right(-8.0));
    let mut worst = 0.0f64;
    for i in 0..=24 {
        let x = -3.0 + 0.25 * i as f64;
        let a = score(&ScoringRule::Crps, &n, x).unwrap().value();
        let b = score(&tw, &n, x).unwrap().value();
        worst = worst.max((a - b).abs());
    }
    outcome(
        (crps - 0.233741).abs() < 1e-4 && worst < 1e-4,
        format!("CRPS(N(0,1),0) = {crps:.7}, max |twCRPS(r=-8) - CRPS| on [-3,3] {worst:.2e}"),
    )
}

fn full_run(scenario: Scenario) -> (RejectionCurve, f64) {
    let mut cfg = ScenarioConfig::new(scenario);
    cfg.replications = 10_000;
    cfg.seed = 42;
    let start = Instant::now();
    let curve = sim::run_scenario(&cfg).unwrap();
    (curve, start.elapsed().as_secs_f64())
}

fn dm(curve: &RejectionCurve, rule: &str, r: f64) -> (f64, f64) {
    let p = curve.get(rule, TestKind::Dm, r).unwrap_or_else(|| panic!("missing {rule} at {r}"));
    (p.favor1, p.favor2)
}

fn scenario_a1() -> Outcome {
    let (curve, secs) = full_run(Scenario::A1);
    let mut zero_ok = true;
    for p in &curve.points {
        let must_vanish = match p.rule.as_str() {
            "twcrps" | "csl" | "cl" | "pwl" => p.r >= 0.0,
            "wh" => p.r >= 0.5,
            _ => false,
        };
        if must_vanish && p.favor1 != 0.0 {
            zero_ok = false;
        }
    }
    let logs = dm(&curve, "logs", -5.0).0;
    let mut tail = Vec::new();
    let mut tail_ok = true;
    for rule in ["csl", "cl", "pwl"] {
        let f = dm(&curve, rule, -5.0).0;
        tail_ok &= (f - logs).abs() <= 0.01;
        tail.push(format!("{rule} {f:.4}"));
    }
    outcome(
        zero_ok && tail_ok,
        format!(
            "zero for r>=0 (wh r>=0.5): {}; at r=-5 logs {logs:.4} vs {} (tol 0.01); {secs:.1}s",
            if zero_ok { "yes" } else { "no" },
            tail.join(", ")
        ),
    )
}

fn scenario_a2() -> Outcome {
    let (curve, secs) = full_run(Scenario::A2);
    let mut ok = true;
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    for p in curve.points.iter().filter(|p| p.test == TestKind::Dm) {
        if matches!(p.rule.as_str(), "logs" | "crps" | "hy") {
            ok &= (p.favor1 - 0.025).abs() <= 0.01;
            range = (range.0.min(p.favor1), range.1.max(p.favor1));
        }
    }
    let cl3 = dm(&curve, "cl", 3.0).0;
    ok &= cl3 < 0.05;
    outcome(
        ok,
        format!(
            "unweighted favor-hlt in [{:.4}, {:.4}] (target 0.025 +- 0.01), cl at r=3 {cl3:.4} (< 0.05); {secs:.1}s",
            range.0, range.1
        ),
    )
}

fn size_invariance() -> Outcome {
    let p0 = Density::standard_normal();
    let spec =
        NpTestSpec::new(p0.clone(), Density::hrt(), WeightFunction::right(1.0), 20, 0.05).unwrap().with_mc(100_000, 42);
    let phi1 = p0.cdf(1.0);
    let members = [
        ("N(0,1)", p0.clone()),
        ("hlt", Density::hlt()),
        ("t3 below 1", HalfHalf::glue_t_left(3.0, p0.clone(), 1.0, phi1).unwrap().into_density()),
    ];
    let a = spec.region;
    let mut ok = true;
    let mut parts = Vec::new();
    for rule in [ScoringRule::Csl(a), ScoringRule::Pwl(a), ScoringRule::Cl(a)] {
        let test = PowerTest::Score(rule.clone());
        for (label, truth) in &members {
            let est = power_estimate(&test, truth, &spec, 10_000, 7).unwrap();
            ok &= (est.power - 0.05).abs() <= 0.015;
            parts.push(format!("{}/{label} {:.4}", rule.family(), est.power));
        }
    }
    outcome(ok, format!("size (0.05 +- 0.015): {}", parts.join(", ")))
}

fn optimality() -> Outcome {
    let rows = verify::optimality(10_000, 100_000, 42).unwrap();
    let ok = rows.iter().all(|r| r.passed);
    let worst = rows.iter().map(|r| r.margin_in_se).fold(f64::INFINITY, f64::min);
    outcome(
        ok,
        format!("{} comparisons in 3 configs, smallest CSL margin {worst:+.2} pooled SE (need >= -2)", rows.len()),
    )
}

fn ump() -> Outcome {
    let r = verify::ump(200, 50, 42).unwrap();
    outcome(
        r.passed,
        format!(
            "{} tests x {} alternatives, level excess {:.1e}, power deficit {:.1e}",
            r.tests, r.alternatives, r.worst_level_excess, r.worst_power_deficit
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("a1.cfg");
    std::fs::write(&cfg, "scenario = A1\nreplications = 2000\nseed = 42\n").unwrap();
    let mut files = Vec::new();
    for threads in ["1", "8"] {
        let out = dir.path().join(format!("curve{threads}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_wsr"))
            .args(["--threads", threads, "simulate", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        files.push(std::fs::read(&out).unwrap());
    }
    outcome(
        files[0] == files[1],
        format!("{} bytes per curve, threads 1 vs 8 identical: {}", files[0].len(), files[0] == files[1]),
    )
}

#[test]
fn acceptance() {
    let criteria: [Check; 10] = [
        ("identity chain", identities),
        ("propriety matrix", propriety),
        ("WH divergence formula", wh_formula),
        ("CRPS cross-check", crps_check),
        ("scenario A1", scenario_a1),
        ("scenario A2", scenario_a2),
        ("size and invariance on H0", size_invariance),
        ("optimality of the censored test", optimality),
        ("UMP at n = 1", ump),
        ("determinism across thread counts", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!("criterion {:>2} {} {name}: {}", i + 1, if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
