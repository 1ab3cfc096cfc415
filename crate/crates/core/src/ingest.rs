//! Evaluation of externally produced density-forecast streams.
//!
//! Input is a CSV file with header `obs,<name1>,<name2>` (normally
//! `obs,forecast1,forecast2`) and one row per time point: the realized
//! value and two density forecasts in the density grammar, quoted.
//! Score differences are `S(forecast1) − S(forecast2)`, so a positive
//! t-statistic favours the second forecast.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::Density;
use crate::error::{Error, Result};
use crate::grammar::{self, Env};
use crate::numfmt::sig;
use crate::rng::{domain, stream};
use crate::scores::{score, ScoringRule};
use crate::testing::{dm_test, wilcoxon_test, Sided, TestResult};
use crate::weights::WeightFunction;

#[derive(Debug, Clone, PartialEq)]
pub struct StreamRow {
    pub obs: f64,
    pub forecast1: Density,
    pub forecast2: Density,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastStream {
    pub name1: String,
    pub name2: String,
    pub rows: Vec<StreamRow>,
}

impl ForecastStream {
    /// The same stream with the forecast columns exchanged.
    pub fn swapped(&self) -> ForecastStream {
        ForecastStream {
            name1: self.name2.clone(),
            name2: self.name1.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| StreamRow { obs: r.obs, forecast1: r.forecast2.clone(), forecast2: r.forecast1.clone() })
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().quote_style(csv::QuoteStyle::NonNumeric).from_writer(Vec::new());
        let _ = w.write_record(["obs", self.name1.as_str(), self.name2.as_str()]);
        for r in &self.rows {
            let _ = w.write_record([sig(r.obs, 17), r.forecast1.to_string(), r.forecast2.to_string()]);
        }
        String::from_utf8(w.into_inner().unwrap_or_default()).expect("csv output is utf-8")
    }
}

pub fn parse_stream(path: &Path) -> Result<ForecastStream> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_stream_str(&text, &path.display().to_string())
}

/// Parses stream CSV text; `origin` names the source in error messages.
/// Row numbers count the header as row 1.
pub fn parse_stream_str(text: &str, origin: &str) -> Result<ForecastStream> {
    let format = |message: String| Error::Format { path: origin.to_string(), message };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| format(e.to_string()))?.clone();
    if header.len() != 3 || &header[0] != "obs" {
        return Err(format("expected header `obs,forecast1,forecast2`".into()));
    }
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| format(format!("row {line}: {e}")))?;
        if record.len() != 3 {
            return Err(format(format!("row {line}: expected 3 fields, found {}", record.len())));
        }
        let obs: f64 = record[0].parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
            Error::Parse(format!("{origin}: row {line}: observation `{}` is not a finite number", &record[0]))
        })?;
        let density = |s: &str| {
            grammar::parse_density(s).map_err(|e| Error::Parse(format!("{origin}: row {line}: {}", strip(e))))
        };
        rows.push(StreamRow { obs, forecast1: density(&record[1])?, forecast2: density(&record[2])? });
    }
    if rows.len() < 2 {
        return Err(format(format!("need at least 2 rows, found {}", rows.len())));
    }
    Ok(ForecastStream { name1: header[1].to_string(), name2: header[2].to_string(), rows })
}

fn strip(e: Error) -> String {
    match e {
        Error::Parse(m) => m,
        other => other.to_string(),
    }
}

/// Stream with observations drawn from `truth` and constant forecasts.
pub fn synthetic_stream(
    n: usize,
    truth: &Density,
    forecast1: &Density,
    forecast2: &Density,
    seed: u64,
) -> ForecastStream {
    let mut rng = stream(seed, domain::SYNTHETIC, 0);
    let rows = (0..n)
        .map(|_| StreamRow { obs: truth.sample(&mut rng), forecast1: forecast1.clone(), forecast2: forecast2.clone() })
        .collect();
    ForecastStream { name1: "forecast1".into(), name2: "forecast2".into(), rows }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamTest {
    /// Two-sided DM; the table reports the t-statistic.
    Dm,
    /// One-sided Wilcoxon for positive location; the table reports `W⁺`.
    Wilcoxon,
}

impl std::str::FromStr for StreamTest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "dm" => Ok(StreamTest::Dm),
            "wilcoxon" => Ok(StreamTest::Wilcoxon),
            other => Err(Error::Parse(format!("unknown test `{other}`, expected dm or wilcoxon"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// The concrete rule scored in this cell.
    pub rule: String,
    pub result: Option<TestResult>,
    /// Rows (1-based, header excluded) with an infinite score difference.
    pub infinite_rows: Vec<usize>,
    /// Why `result` is missing.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub rule: String,
    pub cells: Vec<Cell>,
}

/// Rules × weight functions grid for one test, plus the share of
/// observations in each region (the mean of `w(obs)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTable {
    pub test: StreamTest,
    pub alpha: f64,
    pub weights: Vec<String>,
    pub proportion: Vec<f64>,
    pub rows: Vec<TableRow>,
}

/// Bare weighted names (`csl`, `twcrps`, …) take each column's weight in
/// turn; other rule texts are scored as written in every column.
pub fn evaluate_stream(
    stream: &ForecastStream,
    rules: &[String],
    weights: &[WeightFunction],
    tests: &[StreamTest],
    alpha: f64,
) -> Result<Vec<EvalTable>> {
    if weights.is_empty() {
        return Err(Error::Config("no weight functions given".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let n = stream.rows.len() as f64;
    let proportion: Vec<f64> =
        weights.iter().map(|w| stream.rows.iter().map(|r| w.eval(r.obs)).sum::<f64>() / n).collect();

    // grammar errors abort; per-cell problems become notes
    let mut grid: Vec<Vec<std::result::Result<ScoringRule, String>>> = Vec::with_capacity(rules.len());
    for text in rules {
        let fixed = grammar::parse_rule_in(text, &Env::default());
        let row = weights
            .iter()
            .map(|w| {
                let env = Env { r: None, weight: Some(*w), smooth_weight: None };
                match grammar::parse_rule_in(text, &env) {
                    Ok(rule) => Ok(rule),
                    Err(Error::InvalidParameter(m)) => Err(m),
                    Err(e) => Err(e.to_string()),
                }
            })
            .collect::<Vec<_>>();
        if let Err(e @ Error::Parse(_)) = fixed {
            if row.iter().all(|c| c.is_err()) {
                return Err(e);
            }
        }
        grid.push(row);
    }

    let diffs: Vec<Vec<std::result::Result<DiffSeries, String>>> = grid
        .iter()
        .map(|row| {
            row.iter()
                .map(|cell| cell.clone().and_then(|rule| diff_series(stream, &rule).map_err(|e| e.to_string())))
                .collect()
        })
        .collect();

    let mut tables = Vec::new();
    for &test in tests {
        let mut out_rows = Vec::new();
        for (i, text) in rules.iter().enumerate() {
            let cells = grid[i]
                .iter()
                .zip(&diffs[i])
                .map(|(rule, series)| match (rule, series) {
                    (Err(m), _) | (_, Err(m)) => {
                        Cell { rule: text.clone(), result: None, infinite_rows: vec![], note: Some(m.clone()) }
                    }
                    (Ok(rule), Ok(s)) => s.cell(rule, test, alpha),
                })
                .collect();
            out_rows.push(TableRow { rule: text.clone(), cells });
        }
        tables.push(EvalTable {
            test,
            alpha,
            weights: weights.iter().map(|w| w.to_string()).collect(),
            proportion: proportion.clone(),
            rows: out_rows,
        });
    }
    Ok(tables)
}

struct DiffSeries {
    values: Vec<f64>,
    infinite_rows: Vec<usize>,
    indeterminate_rows: Vec<usize>,
}

fn diff_series(stream: &ForecastStream, rule: &ScoringRule) -> Result<DiffSeries> {
    let per_row: Vec<Result<Option<f64>>> = stream
        .rows
        .par_iter()
        .map(|r| {
            let a = score(rule, &r.forecast1, r.obs)?;
            let b = score(rule, &r.forecast2, r.obs)?;
            Ok(a.diff(b))
        })
        .collect();
    let mut series =
        DiffSeries { values: Vec::with_capacity(per_row.len()), infinite_rows: vec![], indeterminate_rows: vec![] };
    for (i, d) in per_row.into_iter().enumerate() {
        match d? {
            Some(v) => {
                if !v.is_finite() {
                    series.infinite_rows.push(i + 1);
                }
                series.values.push(v);
            }
            None => series.indeterminate_rows.push(i + 1),
        }
    }
    Ok(series)
}

impl DiffSeries {
    fn cell(&self, rule: &ScoringRule, test: StreamTest, alpha: f64) -> Cell {
        let mut cell =
            Cell { rule: rule.to_string(), result: None, infinite_rows: self.infinite_rows.clone(), note: None };
        if !self.indeterminate_rows.is_empty() {
            cell.note = Some(format!("both scores infinite at rows {:?}", self.indeterminate_rows));
            return cell;
        }
        let outcome = match test {
            StreamTest::Dm if !self.infinite_rows.is_empty() => {
                cell.note = Some(format!("dm skipped: infinite score difference at rows {:?}", self.infinite_rows));
                return cell;
            }
            StreamTest::Dm => dm_test(&self.values, Sided::Two, alpha),
            StreamTest::Wilcoxon => wilcoxon_test(&self.values, alpha),
        };
        match outcome {
            Ok(r) => cell.result = Some(r),
            Err(e) => cell.note = Some(e.to_string()),
        }
        cell
    }
}

fn cell_text(c: &Cell) -> String {
    match &c.result {
        Some(r) if r.degenerate => "degenerate".into(),
        Some(r) => sig(r.statistic, 15),
        None => "NA".into(),
    }
}

/// CSV layout: `test,rule,<weight>…` then one row per rule and a
/// `proportion` row per test.
pub fn tables_to_csv(tables: &[EvalTable]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(first) = tables.first() {
        let mut header = vec!["test".to_string(), "rule".to_string()];
        header.extend(first.weights.iter().cloned());
        let _ = w.write_record(&header);
    }
    for t in tables {
        let test = serde_json::to_value(t.test).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        for row in &t.rows {
            let mut rec = vec![test.clone(), row.rule.clone()];
            rec.extend(row.cells.iter().map(cell_text));
            let _ = w.write_record(&rec);
        }
        let mut rec = vec![test.clone(), "proportion".to_string()];
        rec.extend(t.proportion.iter().map(|p| sig(*p, 15)));
        let _ = w.write_record(&rec);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).expect("csv output is utf-8")
}

pub fn tables_to_json(tables: &[EvalTable]) -> Result<String> {
    serde_json::to_string_pretty(tables)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "obs,forecast1,forecast2\n-0.012,\"normal(0,0.015)\",\"scaledt(8.4,0.013,0)\"\n0.004,\"normal(0,0.015)\",\"scaledt(8.4,0.013,0)\"\n";

    #[test]
    fn parses_rows() {
        let s = parse_stream_str(EXAMPLE, "mem").unwrap();
        assert_eq!(s.rows.len(), 2);
        assert_eq!(s.rows[0].obs, -0.012);
        assert_eq!(s.rows[0].forecast2, Density::scaled_t(8.4, 0.013, 0.0).unwrap());
        assert_eq!(parse_stream_str(&s.to_csv(), "mem").unwrap(), s);
    }

    #[test]
    fn errors_name_the_row() {
        let bad = EXAMPLE.replace("0.004,\"normal(0,0.015)\"", "0.004,\"gamma(2,3)\"");
        let e = parse_stream_str(&bad, "s.csv").unwrap_err();
        assert!(matches!(e, Error::Parse(ref m) if m.contains("row 3") && m.contains("gamma")), "{e}");
        let e = parse_stream_str("obs,forecast1,forecast2\nabc,\"hlt\",\"hrt\"\n1,hlt,hrt\n", "s.csv").unwrap_err();
        assert!(e.to_string().contains("row 2"));
        assert!(parse_stream_str("", "s.csv").is_err());
        assert!(parse_stream_str("obs,forecast1,forecast2\n1,hlt,hrt\n", "s.csv").is_err());
    }

    #[test]
    fn identical_columns_give_degenerate_cells() {
        let n = Density::standard_normal();
        let s = synthetic_stream(50, &n, &n, &n, 1);
        let tables =
            evaluate_stream(&s, &["logs".into(), "csl".into()], &[WeightFunction::right(0.0)], &[StreamTest::Dm], 0.05)
                .unwrap();
        for row in &tables[0].rows {
            assert!(row.cells[0].result.unwrap().degenerate);
        }
    }

    #[test]
    fn wh_with_indicator_is_a_note_not_an_abort() {
        let s = synthetic_stream(20, &Density::standard_normal(), &Density::hlt(), &Density::hrt(), 2);
        let ws = [WeightFunction::right(0.0), WeightFunction::smooth_right(0.0, 0.5).unwrap()];
        let t = evaluate_stream(&s, &["wh".into()], &ws, &[StreamTest::Dm], 0.05).unwrap();
        assert!(t[0].rows[0].cells[0].note.is_some());
        assert!(t[0].rows[0].cells[1].result.is_some());
        assert!(evaluate_stream(&s, &["nonsense".into()], &ws, &[StreamTest::Dm], 0.05).is_err());
    }
}
