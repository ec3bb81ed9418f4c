//! CSV and JSON-lines output for experiment tables.

use std::io::{Read, Write};
use std::str::FromStr;

use serde_json::json;

use crate::error::{Error, Result};
use crate::experiment::{ExperimentTable, TrialMetrics};

pub const ROWS_HEADER: &str = "router,n,rep,outcome,hops,delay_ms,speed_mb_per_ms";
pub const SUMMARY_HEADER: &str = "router,n,mean_delay_ms,mean_speed_mb_per_ms,delivery_ratio";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    JsonLines,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::JsonLines => "jsonl",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json-lines" | "jsonl" => Ok(Format::JsonLines),
            other => Err(Error::InvalidParameter(format!("unknown format {other:?}"))),
        }
    }
}

/// Formats `x` with six significant digits, `%g` style.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn rounded(x: f64) -> f64 {
    sig6(x).parse().expect("sig6 output parses")
}

fn opt_sig6(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_default()
}

fn wr<T>(r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::Emit(e.to_string()))
}

/// Writes trial rows to `rows` and per-(router, n) aggregates to `summary`.
pub fn emit_table<R: Write, S: Write>(
    table: &ExperimentTable,
    format: Format,
    mut rows: R,
    mut summary: S,
) -> Result<()> {
    match format {
        Format::Csv => {
            wr(writeln!(rows, "{ROWS_HEADER}"))?;
            for r in &table.rows {
                wr(writeln!(
                    rows,
                    "{},{},{},{},{},{},{}",
                    r.router,
                    r.n,
                    r.rep,
                    r.outcome,
                    r.hops,
                    opt_sig6(r.delay),
                    opt_sig6(r.speed)
                ))?;
            }
            wr(writeln!(summary, "{SUMMARY_HEADER}"))?;
            for a in &table.aggregates {
                wr(writeln!(
                    summary,
                    "{},{},{},{},{}",
                    a.router,
                    a.n,
                    opt_sig6(a.mean_delay),
                    opt_sig6(a.mean_speed),
                    sig6(a.delivery_ratio)
                ))?;
            }
        }
        Format::JsonLines => {
            for r in &table.rows {
                let line = json!({
                    "router": r.router,
                    "n": r.n,
                    "rep": r.rep,
                    "outcome": r.outcome.name(),
                    "hops": r.hops,
                    "delay_ms": r.delay.map(rounded),
                    "speed_mb_per_ms": r.speed.map(rounded),
                });
                wr(writeln!(rows, "{line}"))?;
            }
            for a in &table.aggregates {
                let line = json!({
                    "router": a.router,
                    "n": a.n,
                    "mean_delay_ms": a.mean_delay.map(rounded),
                    "mean_speed_mb_per_ms": a.mean_speed.map(rounded),
                    "delivery_ratio": rounded(a.delivery_ratio),
                });
                wr(writeln!(summary, "{line}"))?;
            }
        }
    }
    wr(rows.flush())?;
    wr(summary.flush())
}

/// Reads back the rows written by [`emit_table`] in CSV form.
pub fn parse_rows_csv<R: Read>(reader: R) -> Result<Vec<TrialMetrics>> {
    let bad = |e: String| Error::InvalidParameter(format!("rows csv: {e}"));
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.iter().collect::<Vec<_>>().join(",");
    if header != ROWS_HEADER {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|e: std::num::ParseFloatError| bad(e.to_string()))
        }
    };
    let int = |s: &str| -> Result<usize> { s.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string())) };
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            if rec.len() != 7 {
                return Err(bad(format!("expected 7 fields, got {}", rec.len())));
            }
            Ok(TrialMetrics {
                router: rec[0].parse()?,
                n: int(&rec[1])?,
                rep: int(&rec[2])?,
                outcome: rec[3].parse()?,
                hops: int(&rec[4])?,
                delay: opt(&rec[5])?,
                speed: opt(&rec[6])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forwarding::{Outcome, RouterKind};

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(2.0), "2");
        assert_eq!(sig6(1.0 / 3.0), "0.333333");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(9.999996), "10");
        assert_eq!(sig6(0.000012345678), "1.23457e-5");
        assert_eq!(sig6(-2.5), "-2.5");
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = ExperimentTable::from_rows(Vec::new());
        let (mut rows, mut summary) = (Vec::new(), Vec::new());
        emit_table(&t, Format::Csv, &mut rows, &mut summary).unwrap();
        assert_eq!(String::from_utf8(rows).unwrap(), format!("{ROWS_HEADER}\n"));
        assert_eq!(String::from_utf8(summary).unwrap(), format!("{SUMMARY_HEADER}\n"));
    }

    #[test]
    fn single_row_round_trips() {
        let rows = vec![
            TrialMetrics {
                router: RouterKind::MlForwarding,
                n: 100,
                rep: 3,
                outcome: Outcome::Delivered,
                hops: 7,
                delay: Some(12.5),
                speed: Some(0.64),
            },
            TrialMetrics {
                router: RouterKind::MinHop,
                n: 100,
                rep: 3,
                outcome: Outcome::NoRoute,
                hops: 0,
                delay: None,
                speed: None,
            },
        ];
        for keep in 1..=2 {
            let t = ExperimentTable::from_rows(rows[..keep].to_vec());
            let mut out = Vec::new();
            emit_table(&t, Format::Csv, &mut out, std::io::sink()).unwrap();
            assert_eq!(parse_rows_csv(out.as_slice()).unwrap(), t.rows);
        }
    }

    #[test]
    fn json_lines_rows() {
        let t = ExperimentTable::from_rows(vec![TrialMetrics {
            router: RouterKind::LastObservedGreedy,
            n: 125,
            rep: 0,
            outcome: Outcome::Delivered,
            hops: 2,
            delay: Some(1.0 / 3.0),
            speed: Some(24.0),
        }]);
        let (mut rows, mut summary) = (Vec::new(), Vec::new());
        emit_table(&t, Format::JsonLines, &mut rows, &mut summary).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&rows).unwrap();
        assert_eq!(v["router"], "last-observed-greedy");
        assert_eq!(v["delay_ms"], 0.333333);
        let s: serde_json::Value = serde_json::from_slice(&summary).unwrap();
        assert_eq!(s["delivery_ratio"], 1.0);
    }

    struct Broken;
    impl Write for Broken {
        fn write(&mut self, _: &[u8]) -> std::io::Result<usize> {
            Err(std::io::Error::other("disk full"))
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn sink_failure_surfaces() {
        let t = ExperimentTable::from_rows(Vec::new());
        assert!(matches!(emit_table(&t, Format::Csv, Broken, std::io::sink()), Err(Error::Emit(_))));
    }
}
