//! CSV/TSV report writer.
//!
//! One row per batch followed by one `summary` row. Float fields use the
//! shortest representation that parses back to the same value; fields that
//! do not apply to a row are left empty.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::analytics::PR_FORMULA;
use crate::bench::experiment::{BatchReport, ExperimentReport, SweepPoint};
use crate::error::{Error, Result};

pub const COLUMNS: [&str; 22] = [
    "format",
    "kind",
    "batch",
    "phase",
    "edges",
    "update_secs",
    "update_eps",
    "analytics_secs",
    "analytics_eps",
    "bfs_secs",
    "pr_secs",
    "sssp_secs",
    "cc_secs",
    "live_edges",
    "memory_bytes",
    "bytes_per_edge",
    "probe_samples",
    "probe_mean",
    "probe_le8_frac",
    "insert_geomean_eps",
    "delete_geomean_eps",
    "analytics_geomean_eps",
];

pub const SWEEP_COLUMNS: [&str; 7] = [
    "th1",
    "insert_geomean_eps",
    "delete_geomean_eps",
    "analytics_geomean_eps",
    "mean_bytes_per_edge",
    "peak_memory_bytes",
    "peak_bytes_per_edge",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Tsv,
}

impl ReportFormat {
    fn delimiter(self) -> u8 {
        match self {
            ReportFormat::Csv => b',',
            ReportFormat::Tsv => b'\t',
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "tsv" => Ok(ReportFormat::Tsv),
            other => Err(Error::InvalidConfig(format!("unknown report format {other:?}"))),
        }
    }
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn batch_row(format: &str, b: &BatchReport) -> Vec<String> {
    let mut row = vec![
        format.to_string(),
        "batch".into(),
        b.batch.to_string(),
        b.phase.name().into(),
        b.edges.to_string(),
        num(b.update_secs),
        num(b.update_eps()),
        num(b.analytics_secs),
        num(b.analytics_eps()),
    ];
    row.extend(b.algorithm_secs.iter().map(|s| opt(*s)));
    row.extend([
        b.live_edges.to_string(),
        b.memory_bytes.to_string(),
        num(b.bytes_per_edge()),
        b.probe_samples.to_string(),
        num(b.probe_mean),
        num(b.probe_le8_frac),
        String::new(),
        String::new(),
        String::new(),
    ]);
    row
}

fn summary_row(r: &ExperimentReport) -> Vec<String> {
    let s = &r.summary;
    let mut row = vec![r.format.name().to_string(), "summary".into()];
    row.resize(15, String::new());
    row.push(num(s.mean_bytes_per_edge));
    row.resize(19, String::new());
    row.extend([
        num(s.insert_geomean_eps),
        num(s.delete_geomean_eps),
        num(s.analytics_geomean_eps),
    ]);
    row
}

/// Writes the report to `out`. The first line is a `#` comment recording the
/// PageRank definition.
pub fn write_report<W: Write>(out: W, reports: &[ExperimentReport], format: ReportFormat) -> Result<()> {
    let mut out = out;
    writeln!(out, "# pagerank: {PR_FORMULA}")?;
    let mut w = csv::WriterBuilder::new().delimiter(format.delimiter()).from_writer(out);
    w.write_record(COLUMNS)?;
    for r in reports {
        for b in &r.batches {
            w.write_record(batch_row(r.format.name(), b))?;
        }
        w.write_record(summary_row(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_report(reports: &[ExperimentReport], path: &Path, format: ReportFormat) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_report(file, reports, format)
}

pub fn write_sweep<W: Write>(out: W, points: &[SweepPoint], format: ReportFormat) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(format.delimiter()).from_writer(out);
    w.write_record(SWEEP_COLUMNS)?;
    for p in points {
        let s = &p.summary;
        let peak_bpe = if s.peak_live_edges == 0 {
            f64::NAN
        } else {
            s.peak_memory_bytes as f64 / s.peak_live_edges as f64
        };
        w.write_record([
            p.th1.to_string(),
            num(s.insert_geomean_eps),
            num(s.delete_geomean_eps),
            num(s.analytics_geomean_eps),
            num(s.mean_bytes_per_edge),
            s.peak_memory_bytes.to_string(),
            num(peak_bpe),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_sweep(points: &[SweepPoint], path: &Path, format: ReportFormat) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_sweep(file, points, format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::experiment::{Format, Phase, Summary};

    fn batch(i: usize) -> BatchReport {
        BatchReport {
            batch: i,
            phase: if i == 0 { Phase::Insert } else { Phase::Delete },
            edges: 1000,
            update_secs: 0.012_345_678_9,
            analytics_secs: 0.5,
            algorithm_secs: [Some(0.1), None, Some(0.3), Some(0.1)],
            algorithms_run: 3,
            live_edges: 1000 - 1000 * i as u64,
            memory_bytes: 123_456,
            probe_samples: 10,
            probe_mean: 1.25,
            probe_le8_frac: 1.0,
        }
    }

    fn report(batches: Vec<BatchReport>) -> ExperimentReport {
        ExperimentReport {
            format: Format::Tango,
            batches,
            summary: Summary {
                insert_geomean_eps: 81_000.123,
                delete_geomean_eps: 1.0 / 3.0,
                analytics_geomean_eps: f64::NAN,
                mean_bytes_per_edge: 123.456,
                peak_memory_bytes: 1,
                peak_live_edges: 1,
            },
        }
    }

    fn rows(text: &str, delim: u8) -> Vec<csv::StringRecord> {
        csv::ReaderBuilder::new()
            .delimiter(delim)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes())
            .records()
            .collect::<std::result::Result<_, _>>()
            .unwrap()
    }

    #[test]
    fn empty_report_is_header_only() {
        let mut buf = Vec::new();
        write_report(&mut buf, &[], ReportFormat::Csv).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("# pagerank"));
        assert_eq!(lines[1], COLUMNS.join(","));
    }

    #[test]
    fn two_batches_three_rows_round_trip() {
        let r = report(vec![batch(0), batch(1)]);
        for (fmt, delim) in [(ReportFormat::Csv, b','), (ReportFormat::Tsv, b'\t')] {
            let mut buf = Vec::new();
            write_report(&mut buf, std::slice::from_ref(&r), fmt).unwrap();
            let text = String::from_utf8(buf).unwrap();
            let rs = rows(&text, delim);
            assert_eq!(rs.len(), 3);
            assert!(rs.iter().all(|row| row.len() == COLUMNS.len()));
            let f = |row: &csv::StringRecord, i: usize| row[i].parse::<f64>().unwrap();
            assert_eq!(f(&rs[0], 5), 0.012_345_678_9);
            assert_eq!(f(&rs[0], 6), r.batches[0].update_eps());
            assert_eq!(&rs[0][10], "");
            assert_eq!(f(&rs[0], 11), 0.3);
            assert_eq!(f(&rs[0], 15), 123.456);
            assert_eq!(&rs[1][15], "");
            assert_eq!(&rs[2][1], "summary");
            assert_eq!(f(&rs[2], 15), 123.456);
            assert_eq!(f(&rs[2], 19), 81_000.123);
            assert_eq!(f(&rs[2], 20), 1.0 / 3.0);
            assert_eq!(&rs[2][21], "");
        }
    }

    #[test]
    fn sweep_rows() {
        let r = report(vec![]);
        let pts = vec![
            SweepPoint {
                th1: 8,
                summary: r.summary.clone(),
            },
            SweepPoint {
                th1: 16,
                summary: r.summary,
            },
        ];
        let mut buf = Vec::new();
        write_sweep(&mut buf, &pts, ReportFormat::Csv).unwrap();
        let rs = rows(std::str::from_utf8(&buf).unwrap(), b',');
        assert_eq!(rs.len(), 2);
        assert_eq!(&rs[1][0], "16");
    }
}
