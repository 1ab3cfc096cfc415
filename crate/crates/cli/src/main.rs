use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wsr_core::grammar::{self, Env};
use wsr_core::ingest::{self, StreamTest};
use wsr_core::numfmt::sig;
use wsr_core::scores::{divergence, expected_score, score, score_diff_series};
use wsr_core::sim::{self, CurveFormat, ScenarioConfig};
use wsr_core::testing::{self, NpTestSpec, PowerTest, Sided, TestResult};
use wsr_core::{verify, Error, Result, ScoringRule, WeightFunction};

const GRAMMAR: &str = "\
Grammars:
  density  normal(mu,sigma) | scaledt(nu,scale,loc) | skewt(nu,gamma,loc,scale)
           | hlt | hrt | G | H
  weight   right(r) = 1{z>=r} | left(r) = 1{z<=r} | above(r) = 1{z>r}
           | below(r) = 1{z<r} | interval(a,b) | outside(a,b)
           | smoothright(r,delta) | one | zero
  rule     logs | crps | hy | qcrps(a)
           | twcrps(W) | csl(W) | cl(W) | pwl(W) | wh(W)   (wh needs smoothright)
           | conditional(logs,W) | binary(bars|logloss,W) | sum(RULE,...)
  A weighted rule may be named bare (csl) and take its weight from --weight.

Examples:
  wsr score --rule logs --density 'normal(0,1)' --x 0
  wsr score --rule csl --weight 'right(0)' --density 'normal(0,1)' --x -1
  wsr score --rule 'wh(smoothright(0,0.5))' --density hlt --x 0.3
  wsr nptest --p0 'normal(0,1)' --p1 hrt --region 'right(1)' --n 20 --alpha 0.05

Exit codes: 0 success, 1 failed verification, 2 usage or parse error,
3 domain error or degenerate input, 4 I/O error.";

#[derive(Parser)]
#[command(name = "wsr", version, about = "Weighted proper scoring rules and tests of equal predictive performance")]
#[command(after_help = GRAMMAR)]
struct Cli {
    /// Seed for every random stream (default 42).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score one density forecast at one observation.
    #[command(after_help = GRAMMAR)]
    Score(ScoreArgs),
    /// Compare two forecasts, by expected score under a true density or on observations.
    #[command(after_help = GRAMMAR)]
    Compare(CompareArgs),
    /// Run a Monte Carlo scenario and write its rejection curve.
    Simulate(SimulateArgs),
    /// Critical value, randomization weight and power of the censored likelihood-ratio test.
    #[command(after_help = GRAMMAR)]
    Nptest(NpArgs),
    /// Run the property suites and print pass/fail tables.
    Verify(VerifyArgs),
    /// Evaluate a CSV stream of density forecasts.
    #[command(after_help = GRAMMAR)]
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct RuleArgs {
    /// Scoring rule.
    #[arg(long)]
    rule: String,
    /// Weight for a bare weighted rule name.
    #[arg(long)]
    weight: Option<String>,
}

impl RuleArgs {
    fn rule(&self) -> Result<ScoringRule> {
        let weight = self.weight.as_deref().map(grammar::parse_weight).transpose()?;
        if weight.is_some() && grammar::parse_rule(&self.rule).is_ok() {
            return Err(Error::Config(format!("`{}` already carries a weight; drop --weight", self.rule)));
        }
        grammar::parse_rule_in(&self.rule, &Env { r: None, weight, smooth_weight: None })
    }
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    rule: RuleArgs,
    /// Forecast density.
    #[arg(long)]
    density: String,
    /// Observation.
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    rule: RuleArgs,
    #[arg(long)]
    first: String,
    #[arg(long)]
    second: String,
    /// True density: report expected scores and divergences.
    #[arg(long, conflicts_with = "obs")]
    truth: Option<String>,
    /// Comma-separated observations: report the DM and Wilcoxon tests on S(first) - S(second).
    #[arg(long, allow_hyphen_values = true)]
    obs: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for CurveFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => CurveFormat::Csv,
            Format::Json => CurveFormat::Json,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario config (key = value lines, see README).
    #[arg(long)]
    config: PathBuf,
    /// Output file for the rejection curve.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct NpArgs {
    /// Null density on the region.
    #[arg(long)]
    p0: String,
    /// Alternative density on the region.
    #[arg(long)]
    p1: String,
    /// Indicator weight of the region A.
    #[arg(long)]
    region: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Monte Carlo draws for the critical value.
    #[arg(long, default_value_t = testing::DEFAULT_MC_REPS)]
    mc: usize,
    /// Build the test from this rule's score differences instead of the censored likelihood ratio.
    #[arg(long)]
    rule: Option<String>,
    /// Estimate the power with samples from this density.
    #[arg(long)]
    power_under: Option<String>,
    /// Replications for the power estimate.
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Identities,
    Propriety,
    Optimality,
    Ump,
    All,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    suite: Suite,
    /// Replications per power estimate in the optimality suite.
    #[arg(long, default_value_t = 4000)]
    reps: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    /// CSV with header obs,forecast1,forecast2.
    #[arg(long)]
    stream: PathBuf,
    /// Comma-separated rules; bare weighted names are crossed with every weight.
    #[arg(long, default_value = "logs,crps,twcrps,csl,cl,pwl")]
    rules: String,
    /// Comma-separated weight functions (table columns).
    #[arg(long)]
    weights: String,
    /// Comma-separated tests: dm, wilcoxon.
    #[arg(long, default_value = "dm")]
    tests: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the table here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_usage() {
        2
    } else if e.is_io() {
        4
    } else {
        3
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let seed = cli.seed.unwrap_or(42);
    match &cli.command {
        Command::Score(a) => {
            let rule = a.rule.rule()?;
            let p = grammar::parse_density(&a.density)?;
            println!("{}", sig(score(&rule, &p, a.x)?.value(), 15));
        }
        Command::Compare(a) => compare(a)?,
        Command::Simulate(a) => {
            let mut cfg = ScenarioConfig::load(&a.config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let start = Instant::now();
            let curve = sim::run_scenario(&cfg)?;
            sim::emit_curve(&curve, a.format.into(), &a.out)?;
            println!(
                "scenario {} replications {} seed {} points {} wall {:.1}s -> {}",
                cfg.scenario,
                cfg.replications,
                cfg.seed,
                curve.points.len(),
                start.elapsed().as_secs_f64(),
                a.out.display()
            );
        }
        Command::Nptest(a) => nptest(a, seed)?,
        Command::Verify(a) => return verify_suites(a, seed),
        Command::Evaluate(a) => evaluate(a)?,
    }
    Ok(true)
}

fn compare(a: &CompareArgs) -> Result<()> {
    let rule = a.rule.rule()?;
    let first = grammar::parse_density(&a.first)?;
    let second = grammar::parse_density(&a.second)?;
    if let Some(t) = &a.truth {
        let q = grammar::parse_density(t)?;
        println!("rule {rule}");
        for (name, p) in [("first", &first), ("second", &second)] {
            println!(
                "{name} expected {} divergence {}",
                sig(expected_score(&rule, p, &q)?, 15),
                sig(divergence(&rule, p, &q)?, 15)
            );
        }
        return Ok(());
    }
    let Some(list) = &a.obs else {
        return Err(Error::Config("give --truth or --obs".into()));
    };
    let obs = grammar::split_list(list)
        .iter()
        .map(|s| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad observation `{s}`"))))
        .collect::<Result<Vec<f64>>>()?;
    let n = obs.len();
    let diffs = score_diff_series(&rule, &vec![first; n], &vec![second; n], &obs)?;
    let mean = diffs.iter().sum::<f64>() / n as f64;
    println!("rule {rule}");
    println!("n {n} mean_diff {}", sig(mean, 15));
    print_result("dm", &testing::dm_test(&diffs, Sided::Two, a.alpha)?);
    print_result("wilcoxon", &testing::wilcoxon_test(&diffs, a.alpha)?);
    Ok(())
}

fn print_result(name: &str, r: &TestResult) {
    let p = r.p_value.map_or("NA".to_string(), |p| sig(p, 15));
    println!(
        "{name} statistic {} p_value {p} reject {} direction {:?} n_effective {}{}",
        sig(r.statistic, 15),
        sig(r.reject_prob, 15),
        r.direction,
        r.n_effective,
        if r.degenerate { " degenerate" } else { "" }
    );
}

fn nptest(a: &NpArgs, seed: u64) -> Result<()> {
    let spec = NpTestSpec::new(
        grammar::parse_density(&a.p0)?,
        grammar::parse_density(&a.p1)?,
        grammar::parse_weight(&a.region)?,
        a.n,
        a.alpha,
    )?
    .with_mc(a.mc, seed);
    let rule = a.rule.as_deref().map(grammar::parse_rule).transpose()?;
    let cv = match &rule {
        None => testing::np_critical_value(&spec)?,
        Some(r) => testing::score_critical_value(r, &spec)?,
    };
    println!("c_alpha {}", sig(cv.c_alpha, 15));
    println!("gamma {}", sig(cv.gamma, 15));
    if let Some(d) = &a.power_under {
        let truth = grammar::parse_density(d)?;
        let test = rule.map_or(PowerTest::Np, PowerTest::Score);
        let p = testing::power_estimate(&test, &truth, &spec, a.reps, seed)?;
        println!("power {} se {} reps {} invalid {}", sig(p.power, 15), sig(p.se, 15), p.reps, p.invalid);
    }
    Ok(())
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn cell(c: Option<(bool, bool)>) -> String {
    match c {
        None => "-".into(),
        Some((obs, exp)) if obs == exp => yes(obs).into(),
        Some((obs, exp)) => format!("{}!={}", yes(obs), yes(exp)),
    }
}

fn verify_suites(a: &VerifyArgs, seed: u64) -> Result<bool> {
    let want = |s: Suite| a.suite == s || a.suite == Suite::All;
    let mut all = true;
    if want(Suite::Identities) {
        let r = verify::identities(200, seed)?;
        println!("identities ({} random tuples, tolerance {:e})", r.tuples, verify::IDENTITY_TOL);
        println!("  max |CSL - PWL - bars(1-w)| {:.3e}", r.csl_pwl);
        println!("  max |PWL - CL - bars(w)|    {:.3e}", r.pwl_cl);
        println!("  {}", mark(r.passed));
        all &= r.passed;
    }
    if want(Suite::Propriety) {
        println!("propriety (observed; expected shown on mismatch)");
        println!(
            "  {:<26} {:<7} {:<8} {:<11} {:<9} {:<9} {:<12} {:<12} status",
            "rule", "proper", "strict", "localizing", "strict-lp", "prop-lp", "d(inside)", "d(prop)"
        );
        for row in verify::propriety(6)? {
            println!(
                "  {:<26} {:<7} {:<8} {:<11} {:<9} {:<9} {:<12.4e} {:<12.4e} {}",
                row.rule,
                cell(Some(row.proper)),
                cell(row.strictly_proper),
                cell(row.localizing),
                cell(row.strictly_locally_proper),
                cell(row.proportionally_locally_proper),
                row.inside_divergence,
                row.proportional_divergence,
                mark(row.passed())
            );
            all &= row.passed();
        }
    }
    if want(Suite::Optimality) {
        println!("optimality (power against p1, alpha 0.05, {} replications)", a.reps);
        for row in verify::optimality(a.reps, 20_000, seed)? {
            println!(
                "  {:<40} {:<26} power {:.4} se {:.4} csl margin {:+.2} se  {}",
                row.config,
                row.rule,
                row.power,
                row.se,
                row.margin_in_se,
                mark(row.passed)
            );
            all &= row.passed;
        }
    }
    if want(Suite::Ump) {
        let r = verify::ump(200, 50, seed)?;
        println!("ump at n = 1 (200 cells, {} tests, {} alternatives)", r.tests, r.alternatives);
        println!(
            "  worst level excess {:.3e}, worst power deficit {:.3e}  {}",
            r.worst_level_excess,
            r.worst_power_deficit,
            mark(r.passed)
        );
        all &= r.passed;
    }
    Ok(all)
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let stream = ingest::parse_stream(&a.stream)?;
    let rules = grammar::split_list(&a.rules);
    let weights = grammar::split_list(&a.weights)
        .iter()
        .map(|w| grammar::parse_weight(w))
        .collect::<Result<Vec<WeightFunction>>>()?;
    let tests = grammar::split_list(&a.tests).iter().map(|t| t.parse::<StreamTest>()).collect::<Result<Vec<_>>>()?;
    let tables = ingest::evaluate_stream(&stream, &rules, &weights, &tests, a.alpha)?;
    let text = match a.format {
        Format::Csv => ingest::tables_to_csv(&tables),
        Format::Json => ingest::tables_to_json(&tables)?,
    };
    match &a.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e))?,
        None => print!("{text}"),
    }
    for t in &tables {
        for row in &t.rows {
            for (c, w) in row.cells.iter().zip(&t.weights) {
                if let Some(note) = &c.note {
                    eprintln!("note: {} {w}: {note}", row.rule);
                }
            }
        }
    }
    Ok(())
}
