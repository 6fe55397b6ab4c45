use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::trace::{Channel, SimTrace};

/// 17 significant digits: enough for an exact `f64` round trip.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn parse_value(s: &str, row: usize, col: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| {
        Error::InvalidArgument(format!("row {row}, column `{col}`: `{s}` is not a number"))
    })
}

/// Writes `t` followed by every channel, one row per sample.
pub fn write_trace_to<W: Write>(trace: &SimTrace, writer: W) -> Result<()> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut w = ::csv::WriterBuilder::new().from_writer(writer);
    let mut header = vec!["t"];
    header.extend(trace.names());
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for (i, t) in trace.time.iter().enumerate() {
        record.clear();
        record.push(format_value(*t));
        record.extend(trace.channels.iter().map(|c| format_value(c.values[i])));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(trace: &SimTrace, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_trace_to(trace, std::io::BufWriter::new(file))
}

/// Reads a trace; the first column must be named `t`.
pub fn read_trace_from<R: Read>(reader: R) -> Result<SimTrace> {
    let mut r = ::csv::ReaderBuilder::new().from_reader(reader);
    let headers = r.headers()?.clone();
    let mut names = headers.iter();
    match names.next() {
        Some("t") => {}
        other => {
            return Err(Error::InvalidArgument(format!(
                "first column must be `t`, found {other:?}"
            )))
        }
    }
    let mut trace = SimTrace {
        time: Vec::new(),
        channels: names
            .map(|n| Channel {
                name: n.to_string(),
                values: Vec::new(),
            })
            .collect(),
    };
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        trace.time.push(parse_value(&rec[0], row + 1, "t")?);
        for (c, field) in trace.channels.iter_mut().zip(rec.iter().skip(1)) {
            c.values.push(parse_value(field, row + 1, &c.name)?);
        }
    }
    if trace.time.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("time column is not increasing".into()));
    }
    Ok(trace)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<SimTrace> {
    read_trace_from(std::fs::File::open(path)?)
}
