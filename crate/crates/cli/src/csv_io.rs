//! CSV artifacts. Every float is written with 17 significant digits, which
//! is enough for `str::parse` to return the identical `f64`.

use std::io::{Read, Write};

use csv::{ReaderBuilder, Terminator, WriterBuilder};
use triggerkit::stability_conditions::FrontierTable;
use triggerkit::SimulationTrace;

use crate::error::CliError;

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    WriterBuilder::new().terminator(Terminator::Any(b'\n')).from_writer(w)
}

/// Columns `t, state_norm, u_1..u_m, is_event`.
pub fn write_trace<W: Write>(w: W, trace: &SimulationTrace) -> Result<(), CliError> {
    let m = trace.inputs.first().map_or(0, |u| u.len());
    let mut out = writer(w);
    let mut header = vec!["t".to_string(), "state_norm".to_string()];
    header.extend((1..=m).map(|i| format!("u_{i}")));
    header.push("is_event".into());
    out.write_record(&header)?;
    for i in 0..trace.len() {
        let mut row = vec![fmt_f64(trace.sample_times[i]), fmt_f64(trace.state_norms[i])];
        row.extend(trace.inputs[i].iter().map(|&u| fmt_f64(u)));
        row.push(if trace.is_event[i] { "1" } else { "0" }.into());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `k, t_k, inter_event_time`; the first row has no predecessor and
/// leaves the last column empty.
pub fn write_events<W: Write>(w: W, trace: &SimulationTrace) -> Result<(), CliError> {
    let mut out = writer(w);
    out.write_record(["k", "t_k", "inter_event_time"])?;
    for (k, &t) in trace.event_times.iter().enumerate() {
        let gap = if k == 0 {
            String::new()
        } else {
            fmt_f64(trace.inter_event_times[k - 1])
        };
        out.write_record([k.to_string(), fmt_f64(t), gap])?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `<abscissa>, <bound>, <bound>_upper`. Empty cells mark
/// abscissae with no feasible parameter.
pub fn write_frontier<W: Write>(w: W, table: &FrontierTable) -> Result<(), CliError> {
    let mut out = writer(w);
    let bound = table.target.bound_name();
    out.write_record([
        table.target.abscissa_name().to_string(),
        bound.to_string(),
        format!("{bound}_upper"),
    ])?;
    let cell = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for p in &table.points {
        out.write_record([fmt_f64(p.abscissa), cell(p.bound), cell(p.upper)])?;
    }
    out.flush()?;
    Ok(())
}

/// A trace CSV read back into columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub t: Vec<f64>,
    pub state_norm: Vec<f64>,
    /// One vector per sample.
    pub inputs: Vec<Vec<f64>>,
    pub is_event: Vec<bool>,
}

fn parse_f64(s: &str, line: usize) -> Result<f64, CliError> {
    s.parse().map_err(|_| CliError::Parse {
        line: Some(line),
        message: format!("not a number: {s:?}"),
    })
}

pub fn read_trace<R: Read>(r: R) -> Result<TraceTable, CliError> {
    let mut rd = ReaderBuilder::new().from_reader(r);
    let header = rd.headers()?.clone();
    let n = header.len();
    let ok = n >= 3
        && &header[0] == "t"
        && &header[1] == "state_norm"
        && &header[n - 1] == "is_event"
        && (2..n - 1).all(|i| header[i] == format!("u_{}", i - 1));
    if !ok {
        return Err(CliError::Parse {
            line: Some(1),
            message: "expected header t,state_norm,u_1..u_m,is_event".into(),
        });
    }
    let mut table = TraceTable {
        t: vec![],
        state_norm: vec![],
        inputs: vec![],
        is_event: vec![],
    };
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        table.t.push(parse_f64(&rec[0], line)?);
        table.state_norm.push(parse_f64(&rec[1], line)?);
        table
            .inputs
            .push((2..n - 1).map(|j| parse_f64(&rec[j], line)).collect::<Result<_, _>>()?);
        table.is_event.push(match &rec[n - 1] {
            "1" => true,
            "0" => false,
            other => {
                return Err(CliError::Parse {
                    line: Some(line),
                    message: format!("is_event must be 0 or 1, got {other:?}"),
                })
            }
        });
    }
    Ok(table)
}
