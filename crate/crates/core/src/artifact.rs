//! Result files: the summary CSV consumed by the plotting scripts, JSON
//! mirrors of it, and raw error sample dumps.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::config::SimConfig;
use crate::metrics::MetricsSummary;

pub const CSV_HEADER: [&str; 13] = [
    "sweep_axis",
    "sweep_value",
    "seed",
    "count",
    "mean_m",
    "median_m",
    "q1_m",
    "q3_m",
    "p5_m",
    "p95_m",
    "availability",
    "fail_energy",
    "fail_range",
];

/// Axis name used for rows that are not part of a sweep.
pub const NO_AXIS: &str = "none";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("unexpected header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("row {row}: expected {expected} columns, found {found}")]
    Width { row: usize, expected: usize, found: usize },
    #[error("row {row}, column `{column}`: cannot parse `{value}`")]
    Field { row: usize, column: &'static str, value: String },
    #[error("row {row}: {reason}")]
    Inconsistent { row: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One line of the summary CSV. Error descriptors are NaN when no attempt succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sweep_axis: String,
    /// Sweep value as written; empty for plain runs.
    pub sweep_value: String,
    pub seed: u64,
    pub count: u64,
    pub mean_m: f64,
    pub median_m: f64,
    pub q1_m: f64,
    pub q3_m: f64,
    pub p5_m: f64,
    pub p95_m: f64,
    pub availability: f64,
    pub fail_energy: u64,
    pub fail_range: u64,
}

/// Scientific notation with 17 significant digits, enough to read back the same float.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Renders a sweep value for the `sweep_value` column.
pub fn format_value(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => format_float(x),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

impl SummaryRow {
    pub fn new(axis: &str, value: &Value, seed: u64, summary: &MetricsSummary) -> Self {
        let nan = f64::NAN;
        let e = summary.errors.as_ref();
        Self {
            sweep_axis: axis.to_owned(),
            sweep_value: format_value(value),
            seed,
            count: summary.successes(),
            mean_m: e.map_or(nan, |e| e.mean),
            median_m: e.map_or(nan, |e| e.median),
            q1_m: e.map_or(nan, |e| e.q1),
            q3_m: e.map_or(nan, |e| e.q3),
            p5_m: e.map_or(nan, |e| e.p5),
            p95_m: e.map_or(nan, |e| e.p95),
            availability: summary.availability,
            fail_energy: summary.failures.energy_depleted,
            fail_range: summary.failures.out_of_range,
        }
    }

    pub fn attempts(&self) -> u64 {
        self.count + self.fail_energy + self.fail_range
    }

    fn fields(&self) -> [String; 13] {
        [
            self.sweep_axis.clone(),
            self.sweep_value.clone(),
            self.seed.to_string(),
            self.count.to_string(),
            format_float(self.mean_m),
            format_float(self.median_m),
            format_float(self.q1_m),
            format_float(self.q3_m),
            format_float(self.p5_m),
            format_float(self.p95_m),
            format_float(self.availability),
            self.fail_energy.to_string(),
            self.fail_range.to_string(),
        ]
    }

    /// Equality that treats NaN descriptors as equal.
    pub fn same_as(&self, other: &Self) -> bool {
        self.fields() == other.fields()
    }
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<(), ArtifactError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary_csv_string(rows: &[SummaryRow]) -> String {
    let mut buf = Vec::new();
    write_summary_csv(rows, &mut buf).expect("writing to memory does not fail");
    String::from_utf8(buf).expect("fields are UTF-8")
}

fn parse_field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize, row: usize) -> Result<T, ArtifactError> {
    let value = &record[i];
    value.parse().map_err(|_| ArtifactError::Field { row, column: CSV_HEADER[i], value: value.to_owned() })
}

/// Reads a summary CSV, checking the header and each field's type.
pub fn read_summary_csv<R: Read>(input: R) -> Result<Vec<SummaryRow>, ArtifactError> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = r.records();
    let header = match records.next() {
        Some(h) => h?,
        None => csv::StringRecord::new(),
    };
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(ArtifactError::Header {
            expected: CSV_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in records.enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != CSV_HEADER.len() {
            return Err(ArtifactError::Width { row, expected: CSV_HEADER.len(), found: record.len() });
        }
        let parsed = SummaryRow {
            sweep_axis: record[0].to_owned(),
            sweep_value: record[1].to_owned(),
            seed: parse_field(&record, 2, row)?,
            count: parse_field(&record, 3, row)?,
            mean_m: parse_field(&record, 4, row)?,
            median_m: parse_field(&record, 5, row)?,
            q1_m: parse_field(&record, 6, row)?,
            q3_m: parse_field(&record, 7, row)?,
            p5_m: parse_field(&record, 8, row)?,
            p95_m: parse_field(&record, 9, row)?,
            availability: parse_field(&record, 10, row)?,
            fail_energy: parse_field(&record, 11, row)?,
            fail_range: parse_field(&record, 12, row)?,
        };
        if !(0.0..=1.0).contains(&parsed.availability) {
            return Err(ArtifactError::Inconsistent {
                row,
                reason: format!("availability {} outside [0, 1]", parsed.availability),
            });
        }
        rows.push(parsed);
    }
    Ok(rows)
}

/// JSON artifact: the config that produced the rows plus the rows themselves.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport<'a> {
    pub command: &'a str,
    pub config: &'a SimConfig,
    pub rows: &'a [SummaryRow],
}

pub fn write_json_report<W: Write>(report: &RunReport<'_>, out: W) -> Result<(), ArtifactError> {
    // serde_json writes NaN descriptors as null
    let value = serde_json::to_value(report)?;
    serde_json::to_writer_pretty(out, &value)?;
    Ok(())
}

/// One error sample per line, meters.
pub fn write_samples<W: Write>(samples: &[f64], mut out: W) -> Result<(), ArtifactError> {
    for s in samples {
        writeln!(out, "{}", format_float(*s))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{Accumulator, FailureCounts};
    use proptest::prelude::*;
    use serde_json::json;

    fn row() -> SummaryRow {
        let mut acc = Accumulator::default();
        for e in [1e-3, 2e-3, 0.1 + 0.2, 4e-4] {
            acc.record_success(e);
        }
        acc.record_energy_failure();
        SummaryRow::new("delta_q_mean", &json!(2e-12), 7, &acc.summarize().unwrap())
    }

    #[test]
    fn header_is_exact() {
        let text = summary_csv_string(&[]);
        assert_eq!(
            text,
            "sweep_axis,sweep_value,seed,count,mean_m,median_m,q1_m,q3_m,p5_m,p95_m,availability,fail_energy,fail_range\n"
        );
    }

    #[test]
    fn round_trip_is_lossless() {
        let r = row();
        let back = read_summary_csv(summary_csv_string(std::slice::from_ref(&r)).as_bytes()).unwrap();
        assert_eq!(back, vec![r.clone()]);
        assert_eq!(back[0].attempts(), 5);
        assert_eq!(back[0].sweep_value, "2.0000000000000000e-12");
    }

    #[test]
    fn empty_sample_writes_nan() {
        let summary = MetricsSummary {
            attempts: 3,
            errors: None,
            availability: 0.0,
            failures: FailureCounts { energy_depleted: 1, out_of_range: 2 },
        };
        let r = SummaryRow::new(NO_AXIS, &Value::Null, 1, &summary);
        let back = read_summary_csv(summary_csv_string(std::slice::from_ref(&r)).as_bytes()).unwrap();
        assert!(back[0].median_m.is_nan());
        assert!(back[0].same_as(&r));
        let mut json = Vec::new();
        write_json_report(&RunReport { command: "run", config: &SimConfig::default(), rows: &[r] }, &mut json).unwrap();
        let v: Value = serde_json::from_slice(&json).unwrap();
        assert!(v["rows"][0]["median_m"].is_null());
    }

    #[test]
    fn sweep_value_rendering() {
        assert_eq!(format_value(&json!(3)), "3");
        assert_eq!(format_value(&json!("half_sphere")), "half_sphere");
        assert_eq!(format_value(&json!(true)), "true");
        assert_eq!(format_value(&Value::Null), "");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(read_summary_csv("a,b\n".as_bytes()), Err(ArtifactError::Header { .. })));
        assert!(matches!(read_summary_csv("".as_bytes()), Err(ArtifactError::Header { .. })));
        let mut text = summary_csv_string(&[row()]);
        text.push_str("x,1,2\n");
        assert!(matches!(read_summary_csv(text.as_bytes()), Err(ArtifactError::Width { row: 2, .. })));
        let bad = summary_csv_string(&[row()]).replace(",7,", ",seven,");
        assert!(matches!(read_summary_csv(bad.as_bytes()), Err(ArtifactError::Field { column: "seed", .. })));
    }

    #[test]
    fn samples_one_per_line() {
        let mut out = Vec::new();
        write_samples(&[0.5, 1e-3], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let back: Vec<f64> = text.lines().map(|l| l.parse().unwrap()).collect();
        assert_eq!(back, vec![0.5, 1e-3]);
    }

    proptest! {
        #[test]
        fn floats_survive_text(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let back: f64 = format_float(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
