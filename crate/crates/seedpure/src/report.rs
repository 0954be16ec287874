//! Experiment records and their CSV / Markdown renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

use seedpure_core::{accuracy, Algorithm, ConfusionCounts, ModelKind, TapPoint};

use crate::error::{Error, Result};

/// One (variety, model, tap, algorithm) cell of the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub variety: String,
    pub model: ModelKind,
    pub tap: TapPoint,
    pub algorithm: Algorithm,
    /// Test-set confusion counts, or the error that aborted the cell.
    pub outcome: std::result::Result<ConfusionCounts, String>,
    pub n_train: usize,
    pub n_test: usize,
    pub positives: usize,
    pub negatives: usize,
    pub standardized: bool,
    pub seed: u64,
    pub config_digest: String,
    pub train_time: Option<Duration>,
    pub eval_time: Option<Duration>,
}

impl Record {
    pub fn accuracy(&self) -> Option<f64> {
        self.outcome.as_ref().ok().and_then(|c| accuracy(c).ok())
    }

    pub fn sort_key(&self) -> (&str, &str, TapPoint, Algorithm) {
        (&self.variety, self.model.name(), self.tap, self.algorithm)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub records: Vec<Record>,
}

impl Report {
    pub fn sort(&mut self) {
        self.records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.outcome.is_err()).count()
    }
}

/// Accuracy as a percentage with two decimals, rounding half up on the
/// shortest decimal representation of `acc` (so `0.97195` gives `97.20`).
pub fn format_percent(acc: f64) -> String {
    let bp = basis_points(acc);
    format!("{}.{:02}", bp / 100, bp % 100)
}

/// `acc` in hundredths of a percent, rounded half up.
fn basis_points(acc: f64) -> u64 {
    let s = format!("{}", acc.clamp(0.0, 1.0));
    let (int, frac) = s.split_once('.').unwrap_or((&s, ""));
    let digit = |i: usize| frac.as_bytes().get(i).map_or(0, |b| u64::from(b - b'0'));
    let mut bp: u64 = int.parse::<u64>().unwrap_or(0) * 10_000;
    for i in 0..4 {
        bp += digit(i) * 10u64.pow(3 - i as u32);
    }
    if digit(4) >= 5 {
        bp += 1;
    }
    bp
}

pub const CSV_HEADER: [&str; 20] = [
    "variety",
    "model",
    "tap",
    "algorithm",
    "status",
    "accuracy",
    "tp",
    "tn",
    "fp",
    "fn",
    "n_train",
    "n_test",
    "positives",
    "negatives",
    "standardized",
    "seed",
    "config_digest",
    "error",
    "train_time_s",
    "eval_time_s",
];

/// Number of trailing timing columns, excluded from determinism checks.
pub const CSV_TIMING_COLUMNS: usize = 2;

pub fn render_csv(report: &Report) -> Result<String> {
    if report.records.is_empty() {
        return Err(Error::EmptyReport);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Usage(format!("csv encoding failed: {e}"));
    w.write_record(CSV_HEADER).map_err(io)?;
    let secs = |d: Option<Duration>| d.map_or_else(String::new, |d| format!("{:.6}", d.as_secs_f64()));
    for r in &report.records {
        let (status, counts, acc, error) = match &r.outcome {
            Ok(c) => (
                "ok",
                [c.true_pos, c.true_neg, c.false_pos, c.false_neg].map(|v| v.to_string()),
                r.accuracy().map_or_else(String::new, |a| a.to_string()),
                String::new(),
            ),
            Err(e) => ("failed", Default::default(), String::new(), e.clone()),
        };
        let [tp, tn, fp, fn_] = counts;
        w.write_record([
            r.variety.as_str(),
            r.model.name(),
            r.tap.name(),
            r.algorithm.code(),
            status,
            &acc,
            &tp,
            &tn,
            &fp,
            &fn_,
            &r.n_train.to_string(),
            &r.n_test.to_string(),
            &r.positives.to_string(),
            &r.negatives.to_string(),
            if r.standardized { "true" } else { "false" },
            &r.seed.to_string(),
            &r.config_digest,
            &error,
            &secs(r.train_time),
            &secs(r.eval_time),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Usage(format!("csv encoding failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

type Row<'a> = BTreeMap<Algorithm, &'a Record>;

/// One table per (model, tap): varieties as rows, algorithms as columns,
/// best accuracy per row in bold (every tied cell is bolded).
pub fn render_markdown(report: &Report) -> Result<String> {
    if report.records.is_empty() {
        return Err(Error::EmptyReport);
    }
    let algorithms: Vec<Algorithm> =
        Algorithm::ALL.into_iter().filter(|a| report.records.iter().any(|r| r.algorithm == *a)).collect();
    let mut tables: BTreeMap<(&str, TapPoint), BTreeMap<&str, Row<'_>>> = BTreeMap::new();
    for r in &report.records {
        tables.entry((r.model.name(), r.tap)).or_default().entry(&r.variety).or_default().insert(r.algorithm, r);
    }

    let mut out = String::from("# Accuracy (%)\n");
    for ((_, tap), rows) in &tables {
        let model = tap.model();
        let _ = write!(out, "\n## {} {}\n\n| Variety |", model.label(), tap.short_name());
        for a in &algorithms {
            let _ = write!(out, " {} |", a.label());
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(algorithms.len()));
        out.push('\n');
        for (variety, cells) in rows {
            let best = cells.values().filter_map(|r| r.accuracy()).map(basis_points).max();
            let _ = write!(out, "| {variety} |");
            for a in &algorithms {
                let cell = match cells.get(a).map(|r| (r.accuracy(), &r.outcome)) {
                    Some((Some(acc), _)) if Some(basis_points(acc)) == best => format!("**{}**", format_percent(acc)),
                    Some((Some(acc), _)) => format_percent(acc),
                    Some((None, Err(_))) => "failed".into(),
                    _ => "n/a".into(),
                };
                let _ = write!(out, " {cell} |");
            }
            out.push('\n');
        }
    }

    let mut tasks: BTreeMap<&str, &Record> = BTreeMap::new();
    for r in &report.records {
        tasks.entry(&r.variety).or_insert(r);
    }
    out.push_str("\n## Tasks\n\n| Variety | Positives | Negatives | Train | Test |\n|---|---:|---:|---:|---:|\n");
    for (variety, r) in tasks {
        let _ = writeln!(out, "| {variety} | {} | {} | {} | {} |", r.positives, r.negatives, r.n_train, r.n_test);
    }
    let failed: Vec<&Record> = report.records.iter().filter(|r| r.outcome.is_err()).collect();
    if !failed.is_empty() {
        out.push_str("\n## Failed cells\n\n");
        for r in failed {
            let _ = writeln!(out, "- {} / {} / {}: {}", r.variety, r.tap, r.algorithm.label(), r.outcome.as_ref().unwrap_err());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(variety: &str, algorithm: Algorithm, c: ConfusionCounts) -> Record {
        Record {
            variety: variety.into(),
            model: ModelKind::Vgg16,
            tap: TapPoint::VggBlock3,
            algorithm,
            outcome: Ok(c),
            n_train: 10,
            n_test: c.total(),
            positives: 8,
            negatives: 8,
            standardized: algorithm.standardize_by_default(),
            seed: 1,
            config_digest: "ab".into(),
            train_time: None,
            eval_time: None,
        }
    }

    fn counts(tp: usize, tn: usize, fp: usize, fn_: usize) -> ConfusionCounts {
        ConfusionCounts { true_pos: tp, true_neg: tn, false_pos: fp, false_neg: fn_ }
    }

    #[test]
    fn percent_rounding() {
        assert_eq!(format_percent(0.9720), "97.20");
        assert_eq!(format_percent(0.97195), "97.20");
        assert_eq!(format_percent(0.97194), "97.19");
        assert_eq!(format_percent(1.0), "100.00");
        assert_eq!(format_percent(0.0), "0.00");
        assert_eq!(format_percent(980.0 / 1015.0), "96.55");
        assert_eq!(format_percent(0.00005), "0.01");
    }

    #[test]
    fn single_record_csv_has_two_lines() {
        let report = Report { records: vec![record("BC_15", Algorithm::LogisticRegression, counts(1, 1, 0, 0))] };
        let csv = render_csv(&report).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("variety,model,tap,algorithm,status,accuracy,"));
        assert!(csv.lines().nth(1).unwrap().starts_with("BC_15,vgg16,vgg.block3,lr,ok,1,1,1,0,0,"));
    }

    #[test]
    fn golden_cell_renders() {
        // 243 of 250 correct is exactly 0.972.
        let report = Report { records: vec![record("BC_15", Algorithm::LogisticRegression, counts(120, 123, 3, 4))] };
        let md = render_markdown(&report).unwrap();
        assert!(md.contains("| BC_15 | **97.20** |"), "{md}");
        assert!(md.contains("## VGG16 block3"));
    }

    #[test]
    fn ties_are_all_bold() {
        let report = Report {
            records: vec![
                record("a", Algorithm::DecisionTree, counts(4, 4, 1, 1)),
                record("a", Algorithm::Knn, counts(5, 4, 0, 1)),
                record("a", Algorithm::Svm, counts(5, 4, 1, 0)),
            ],
        };
        let md = render_markdown(&report).unwrap();
        assert!(md.contains("| a | 80.00 | **90.00** | **90.00** |"), "{md}");
    }

    #[test]
    fn failed_cells_are_reported() {
        let mut r = record("a", Algorithm::Svm, counts(1, 1, 0, 0));
        r.outcome = Err("boom".into());
        let report = Report { records: vec![r] };
        assert!(render_csv(&report).unwrap().contains(",failed,"));
        let md = render_markdown(&report).unwrap();
        assert!(md.contains("| a | failed |"));
        assert!(md.contains("boom"));
    }

    #[test]
    fn empty_report_is_an_error() {
        assert!(matches!(render_csv(&Report::default()), Err(Error::EmptyReport)));
        assert!(matches!(render_markdown(&Report::default()), Err(Error::EmptyReport)));
    }
}
