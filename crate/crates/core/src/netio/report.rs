//! CSV experiment reports.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::harness::Selection;
use crate::param::Method;

pub const REPORT_HEADER: [&str; 12] = [
    "network",
    "instance",
    "method",
    "selection",
    "edges_deleted",
    "iterations",
    "converged",
    "kl_bound",
    "exact_kl",
    "map_ratio",
    "constrained_treewidth",
    "wall_time_ms",
];

/// Slack allowed when checking `exact_kl <= kl_bound`.
const KL_ORDER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub network: String,
    pub instance: usize,
    pub method: Method,
    pub selection: Selection,
    pub edges_deleted: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Empty when the instance failed before a bound could be computed.
    pub kl_bound: Option<f64>,
    pub exact_kl: Option<f64>,
    pub map_ratio: Option<f64>,
    pub constrained_treewidth: usize,
    pub wall_time_ms: u64,
}

impl ReportRow {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("report row {}/{}: {msg}", self.network, self.instance)));
        if let Some(kl) = self.kl_bound {
            if kl.is_nan() || kl < 0.0 {
                return bad(format!("kl_bound {kl} is negative"));
            }
            if let Some(ex) = self.exact_kl {
                if ex.is_nan() || ex > kl + KL_ORDER_TOL {
                    return bad(format!("exact_kl {ex} exceeds kl_bound {kl}"));
                }
            }
        }
        if let Some(r) = self.map_ratio {
            if !(r > 0.0 && r <= 1.0) {
                return bad(format!("map_ratio {r} not in (0, 1]"));
            }
        }
        Ok(())
    }

    fn record(&self) -> [String; 12] {
        let opt = |x: Option<f64>| x.map(format_float).unwrap_or_default();
        [
            self.network.clone(),
            self.instance.to_string(),
            self.method.tag().to_string(),
            self.selection.tag().to_string(),
            self.edges_deleted.to_string(),
            self.iterations.to_string(),
            self.converged.to_string(),
            opt(self.kl_bound),
            opt(self.exact_kl),
            opt(self.map_ratio),
            self.constrained_treewidth.to_string(),
            self.wall_time_ms.to_string(),
        ]
    }
}

/// Renders `x` with 12 significant digits, trailing zeros trimmed, switching
/// to exponent notation outside `[1e-5, 1e12)`.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x.is_nan() {
        return "nan".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Writes the header and one line per row; returns the byte count.
pub fn write_report<W: Write>(rows: &[ReportRow], sink: W) -> Result<usize> {
    for r in rows {
        r.validate()?;
    }
    let mut buf = Vec::new();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
        w.write_record(REPORT_HEADER)?;
        for r in rows {
            w.write_record(r.record())?;
        }
        w.flush()?;
    }
    let mut sink = sink;
    sink.write_all(&buf)?;
    sink.flush()?;
    Ok(buf.len())
}

fn parse_field<T: std::str::FromStr>(s: &str, column: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Config(format!("report column {column}: cannot parse `{s}`")))
}

fn parse_opt(s: &str, column: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_field(s, column).map(Some)
    }
}

pub fn read_report<R: Read>(source: R) -> Result<Vec<ReportRow>> {
    let mut rd = csv::Reader::from_reader(source);
    if rd.headers()?.iter().ne(REPORT_HEADER) {
        return Err(Error::Config("unexpected report header".into()));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        let row = ReportRow {
            network: f(0).to_string(),
            instance: parse_field(f(1), "instance")?,
            method: Method::from_tag(f(2)).ok_or_else(|| Error::Config(format!("unknown method `{}`", f(2))))?,
            selection: Selection::from_tag(f(3))
                .ok_or_else(|| Error::Config(format!("unknown selection `{}`", f(3))))?,
            edges_deleted: parse_field(f(4), "edges_deleted")?,
            iterations: parse_field(f(5), "iterations")?,
            converged: parse_field(f(6), "converged")?,
            kl_bound: parse_opt(f(7), "kl_bound")?,
            exact_kl: parse_opt(f(8), "exact_kl")?,
            map_ratio: parse_opt(f(9), "map_ratio")?,
            constrained_treewidth: parse_field(f(10), "constrained_treewidth")?,
            wall_time_ms: parse_field(f(11), "wall_time_ms")?,
        };
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ReportRow {
        ReportRow {
            network: "chain8".into(),
            instance: 3,
            method: Method::EdKl,
            selection: Selection::Guided,
            edges_deleted: 2,
            iterations: 17,
            converged: true,
            kl_bound: Some(0.012345678901234),
            exact_kl: None,
            map_ratio: Some(1.0),
            constrained_treewidth: 2,
            wall_time_ms: 0,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let mut out = Vec::new();
        let n = write_report(&[], &mut out).unwrap();
        assert_eq!(n, out.len());
        assert_eq!(String::from_utf8(out).unwrap(), REPORT_HEADER.join(",") + "\n");
    }

    #[test]
    fn one_row_has_twelve_fields_and_empty_optional() {
        let mut out = Vec::new();
        write_report(&[row()], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], "chain8,3,ed-kl,guided,2,17,true,0.0123456789012,,1,2,0");
        assert_eq!(lines[1].split(',').count(), 12);
        assert_eq!(read_report(text.as_bytes()).unwrap()[0].exact_kl, None);
    }

    #[test]
    fn exact_above_bound_is_rejected() {
        let mut r = row();
        r.exact_kl = Some(0.5);
        assert!(write_report(&[r], Vec::new()).is_err());
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_float(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_float(123456.789), "123456.789");
        assert_eq!(format_float(2.5e-9), "2.5e-09");
        assert_eq!(format_float(-1.25e15), "-1.25e+15");
        assert_eq!(format_float(1e-5), "0.00001");
        assert_eq!(format_float(f64::INFINITY), "inf");
    }
}
