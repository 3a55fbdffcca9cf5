//! Cross-validation result tables.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub repeat: usize,
    pub fold: usize,
    pub strategy: String,
    pub accuracy: f64,
}

/// Per-(repeat, fold, strategy) accuracies.
///
/// Rows are kept sorted by `(repeat, fold, strategy)`, which is also the
/// CSV row order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn new(mut rows: Vec<EvalRow>) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| !(0.0..=1.0).contains(&r.accuracy)) {
            return Err(Error::Config(format!(
                "accuracy {} outside [0, 1] for {}/{}/{}",
                r.accuracy, r.repeat, r.fold, r.strategy
            )));
        }
        rows.sort_by(|a, b| {
            (a.repeat, a.fold, &a.strategy).cmp(&(b.repeat, b.fold, &b.strategy))
        });
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[EvalRow] {
        &self.rows
    }

    pub fn merge(mut self, other: EvalReport) -> Result<Self> {
        self.rows.extend(other.rows);
        Self::new(self.rows)
    }

    /// Arithmetic mean accuracy per strategy, rows summed in table order.
    pub fn aggregates(&self) -> BTreeMap<String, f64> {
        let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for r in &self.rows {
            let e = acc.entry(r.strategy.clone()).or_insert((0.0, 0));
            e.0 += r.accuracy;
            e.1 += 1;
        }
        acc.into_iter()
            .map(|(k, (sum, n))| (k, sum / n as f64))
            .collect()
    }

    pub fn strategies(&self) -> Vec<String> {
        self.aggregates().into_keys().collect()
    }

    pub fn mean(&self, strategy: &str) -> Option<f64> {
        self.aggregates().get(strategy).copied()
    }
}

const HEADER: [&str; 4] = ["repeat", "fold", "strategy", "accuracy"];

pub fn write_report_csv(report: &EvalReport, sink: &mut impl Write) -> Result<usize> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(HEADER).map_err(csv_err)?;
    for r in report.rows() {
        w.write_record([
            r.repeat.to_string(),
            r.fold.to_string(),
            r.strategy.clone(),
            format!("{:.6}", r.accuracy),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("csv: {e}")))?;
    sink.write_all(&bytes)?;
    Ok(bytes.len())
}

pub fn read_report_csv(source: &mut impl Read) -> Result<EvalReport> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let bad = |msg: String| Error::Config(format!("report csv: {msg}"));
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(bad(format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| rec.get(i).ok_or_else(|| bad(format!("missing column {i}")));
        rows.push(EvalRow {
            repeat: field(0)?.parse().map_err(|_| bad("repeat".into()))?,
            fold: field(1)?.parse().map_err(|_| bad("fold".into()))?,
            strategy: field(2)?.to_string(),
            accuracy: field(3)?.parse().map_err(|_| bad("accuracy".into()))?,
        });
    }
    EvalReport::new(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(repeat: usize, fold: usize, strategy: &str, accuracy: f64) -> EvalRow {
        EvalRow {
            repeat,
            fold,
            strategy: strategy.into(),
            accuracy,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let mut buf = Vec::new();
        write_report_csv(&EvalReport::default(), &mut buf).unwrap();
        assert_eq!(buf, b"repeat,fold,strategy,accuracy\n");
    }

    #[test]
    fn single_row_format() {
        let rep = EvalReport::new(vec![row(0, 0, "avg", 1.0)]).unwrap();
        let mut buf = Vec::new();
        write_report_csv(&rep, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "repeat,fold,strategy,accuracy\n0,0,avg,1.000000\n"
        );
    }

    #[test]
    fn rows_are_sorted_and_reserialize_identically() {
        let rep = EvalReport::new(vec![
            row(1, 0, "seq", 0.5),
            row(0, 1, "avg", 0.25),
            row(0, 1, "avg", 0.25),
            row(0, 0, "seq", 0.123_456_789),
            row(0, 0, "avg", 2.0 / 3.0),
        ])
        .unwrap();
        let keys: Vec<_> = rep
            .rows()
            .iter()
            .map(|r| (r.repeat, r.fold, r.strategy.as_str()))
            .collect();
        assert_eq!(
            keys,
            [(0, 0, "avg"), (0, 0, "seq"), (0, 1, "avg"), (0, 1, "avg"), (1, 0, "seq")]
        );
        let mut first = Vec::new();
        write_report_csv(&rep, &mut first).unwrap();
        let parsed = read_report_csv(&mut first.as_slice()).unwrap();
        let mut second = Vec::new();
        write_report_csv(&parsed, &mut second).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn aggregates_are_row_means() {
        let rep = EvalReport::new(vec![
            row(0, 0, "max", 0.1),
            row(0, 1, "max", 0.2),
            row(0, 2, "max", 0.6),
            row(0, 0, "avg", 1.0),
        ])
        .unwrap();
        let agg = rep.aggregates();
        assert!((agg["max"] - 0.3).abs() < 1e-12);
        assert_eq!(agg["avg"], 1.0);
    }

    #[test]
    fn out_of_range_accuracy_rejected() {
        assert!(EvalReport::new(vec![row(0, 0, "x", 1.5)]).is_err());
    }
}
