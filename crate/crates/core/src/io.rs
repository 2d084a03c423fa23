//! File formats: trace and message CSVs, the run summary, sweep tables.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::analysis::{MessageRecord, NodeRecord, PlotRow, SweepRow, TraceRecord};
use crate::engine::{Algorithm, MessageKind, Trace};
use crate::error::{Error, Result};

pub const TRACE_HEADER: [&str; 7] = ["round", "node", "y", "z", "ys", "zs", "q_float"];
pub const MESSAGE_HEADER: [&str; 6] = ["round", "kind", "sender", "receiver", "y", "z"];
pub const SWEEP_HEADER: [&str; 7] = [
    "seed",
    "n",
    "m",
    "k0",
    "terminated_by",
    "mass_msgs",
    "broadcast_msgs",
];
pub const PLOT_HEADER: [&str; 4] = ["round", "mean_spread", "max_spread", "frac_converged"];

/// Renders `x` rounded to 12 significant digits, shortest form.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: String,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub k0: Option<usize>,
    pub terminated_by: String,
    pub total_mass_msgs: usize,
    pub total_broadcast_msgs: usize,
}

impl From<&Trace> for RunSummary {
    fn from(trace: &Trace) -> Self {
        RunSummary {
            algorithm: trace.algorithm.as_str().to_string(),
            n: trace.n,
            m: trace.m,
            seed: trace.seed,
            k0: trace.termination.k0,
            terminated_by: trace.termination.reason.as_str().to_string(),
            total_mass_msgs: trace.count(MessageKind::MassUnicast),
            total_broadcast_msgs: trace.count(MessageKind::StateBroadcast),
        }
    }
}

pub fn write_summary<W: Write>(summary: &RunSummary, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, summary).map_err(|e| Error::Io(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_summary<R: Read>(input: R) -> Result<RunSummary> {
    serde_json::from_reader(input).map_err(|e| Error::parse(0, e.to_string()))
}

pub fn write_trace_csv<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for (k, nodes) in trace.snapshots.iter().enumerate() {
        for (i, s) in nodes.iter().enumerate() {
            w.write_record([
                k.to_string(),
                (i + 1).to_string(),
                s.mass.y.to_string(),
                s.mass.z.to_string(),
                s.state.y().to_string(),
                s.state.z().to_string(),
                format_float(s.state.as_f64()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Broadcasts are written once per receiver.
pub fn write_messages_csv<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MESSAGE_HEADER)?;
    for m in &trace.messages {
        for r in &m.receivers {
            w.write_record([
                m.round.to_string(),
                m.kind.as_str().to_string(),
                m.sender.label().to_string(),
                r.label().to_string(),
                m.y.to_string(),
                m.z.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.k0.map_or_else(String::new, |k| k.to_string()),
            r.terminated_by.as_str().to_string(),
            r.mass_msgs.to_string(),
            r.broadcast_msgs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_plot_csv<W: Write>(rows: &[PlotRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PLOT_HEADER)?;
    for r in rows {
        w.write_record([
            r.round.to_string(),
            format_float(r.mean_spread),
            format_float(r.max_spread),
            format_float(r.frac_converged),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn records<R: Read>(input: R, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let found = reader.headers()?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::parse(
            1,
            format!("expected header {}", header.join(",")),
        ));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        out.push((i + 2, rec?));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    line: usize,
    idx: usize,
    name: &str,
) -> Result<T> {
    let raw = rec
        .get(idx)
        .ok_or_else(|| Error::parse(line, format!("missing {name}")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("bad {name}: {raw:?}")))
}

/// Reads a trace CSV and a message CSV back into a [`TraceRecord`].
///
/// Rows of each round must list nodes `1..=n` in order; the node count is
/// taken from round 0.
pub fn read_trace_record<R1: Read, R2: Read>(
    algorithm: Algorithm,
    trace: R1,
    messages: R2,
) -> Result<TraceRecord> {
    let mut rounds: Vec<Vec<NodeRecord>> = Vec::new();
    for (line, rec) in records(trace, &TRACE_HEADER)? {
        let k: usize = field(&rec, line, 0, "round")?;
        let node: usize = field(&rec, line, 1, "node")?;
        let entry = NodeRecord {
            y: field(&rec, line, 2, "y")?,
            z: field(&rec, line, 3, "z")?,
            ys: field(&rec, line, 4, "ys")?,
            zs: field(&rec, line, 5, "zs")?,
        };
        if k == rounds.len() {
            rounds.push(Vec::new());
        }
        if k + 1 != rounds.len() {
            return Err(Error::parse(line, format!("round {k} out of order")));
        }
        let current = rounds.last_mut().expect("just pushed");
        if node != current.len() + 1 {
            return Err(Error::parse(line, format!("node {node} out of order")));
        }
        current.push(entry);
    }
    let n = rounds.first().map_or(0, Vec::len);
    if n == 0 || rounds.iter().any(|r| r.len() != n) {
        return Err(Error::parse(0, "every round must list the same nodes"));
    }

    let mut msgs = Vec::new();
    for (line, rec) in records(messages, &MESSAGE_HEADER)? {
        let kind_raw: String = field(&rec, line, 1, "kind")?;
        let kind = MessageKind::parse(&kind_raw)
            .ok_or_else(|| Error::parse(line, format!("unknown kind {kind_raw:?}")))?;
        let m = MessageRecord {
            round: field(&rec, line, 0, "round")?,
            kind,
            sender: field(&rec, line, 2, "sender")?,
            receiver: field(&rec, line, 3, "receiver")?,
            y: field(&rec, line, 4, "y")?,
            z: field(&rec, line, 5, "z")?,
        };
        for id in [m.sender, m.receiver] {
            if id == 0 || id > n {
                return Err(Error::NodeOutOfRange { node: id, n });
            }
        }
        msgs.push(m);
    }
    msgs.sort_by_key(|m| m.round);
    Ok(TraceRecord {
        algorithm,
        rounds,
        messages: msgs,
    })
}

/// Whitespace- or comma-separated integers, `#` comments allowed.
pub fn parse_values(text: &str) -> Result<Vec<i64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("");
        for tok in content
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            out.push(
                tok.parse()
                    .map_err(|_| Error::parse(i + 1, format!("bad value {tok:?}")))?,
            );
        }
    }
    Ok(out)
}
