//! Text event files, packetization, truth files and result serialization.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binning::Frame;
use crate::error::{Error, Result};
use crate::lbfgs::StopReason;
use crate::warp::{Event, EventPacket, RefTimePolicy};

/// Events in file order plus the 1-based lines whose timestamp went backwards.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedEvents {
    pub events: Vec<Event>,
    pub non_monotonic_lines: Vec<usize>,
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, name: &str, line: usize) -> Result<T> {
    let s = field.ok_or_else(|| Error::Parse {
        line,
        message: format!("missing field `{name}`"),
    })?;
    s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {name} `{s}`"),
    })
}

/// Parses `t x y p` lines. Blank lines and `#` comments are skipped; `p = 0`
/// becomes polarity -1.
pub fn parse_events<R: BufRead>(reader: R) -> Result<ParsedEvents> {
    let mut out = ParsedEvents::default();
    let mut last_t = f64::NEG_INFINITY;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let t: f64 = parse_field(fields.next(), "t", line_no)?;
        let x: f64 = parse_field(fields.next(), "x", line_no)?;
        let y: f64 = parse_field(fields.next(), "y", line_no)?;
        let p: u8 = parse_field(fields.next(), "p", line_no)?;
        if let Some(extra) = fields.next() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("unexpected trailing field `{extra}`"),
            });
        }
        if !(t.is_finite() && x.is_finite() && y.is_finite()) {
            return Err(Error::Parse {
                line: line_no,
                message: "non-finite value".into(),
            });
        }
        let polarity = match p {
            0 => -1,
            1 => 1,
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("polarity must be 0 or 1, got {p}"),
                })
            }
        };
        if t < last_t {
            out.non_monotonic_lines.push(line_no);
        }
        last_t = t;
        out.events.push(Event::new(t, x, y, polarity));
    }
    Ok(out)
}

pub fn read_events_txt(path: impl AsRef<Path>) -> Result<Vec<Event>> {
    let path = path.as_ref();
    let parsed = parse_events(BufReader::new(File::open(path)?))?;
    if let Some(first) = parsed.non_monotonic_lines.first() {
        log::warn!(
            "{}: timestamps decrease at {} line(s), first at line {first}",
            path.display(),
            parsed.non_monotonic_lines.len()
        );
    }
    Ok(parsed.events)
}

/// Writes events at full precision, so reading them back is lossless.
pub fn write_events<W: Write>(mut w: W, events: &[Event]) -> Result<()> {
    for e in events {
        writeln!(w, "{} {} {} {}", e.t, e.x, e.y, u8::from(e.polarity > 0))?;
    }
    Ok(())
}

pub fn write_events_txt(path: impl AsRef<Path>, events: &[Event]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_events(&mut w, events)?;
    w.flush()?;
    Ok(())
}

/// Consecutive chunks of exactly `n_e` events; the remainder is dropped.
/// Chunks whose timestamps are out of order are stably sorted by time.
pub fn packetize(events: &[Event], n_e: usize, policy: RefTimePolicy) -> Result<Vec<EventPacket>> {
    if n_e == 0 {
        return Err(Error::InvalidParameter("packet size must be at least 1".into()));
    }
    events
        .chunks_exact(n_e)
        .map(|chunk| {
            let mut evs = chunk.to_vec();
            if evs.windows(2).any(|w| w[1].t < w[0].t) {
                evs.sort_by(|a, b| a.t.total_cmp(&b.t));
            }
            EventPacket::new(evs, policy)
        })
        .collect()
}

/// Truth lines `index a b c`, returned in index order.
pub fn parse_truth<R: BufRead>(reader: R) -> Result<Vec<(usize, [f64; 3])>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut f = trimmed.split_whitespace();
        let idx: usize = parse_field(f.next(), "packet_index", line_no)?;
        let a: f64 = parse_field(f.next(), "theta1", line_no)?;
        let b: f64 = parse_field(f.next(), "theta2", line_no)?;
        let c: f64 = parse_field(f.next(), "theta3", line_no)?;
        rows.push((idx, [a, b, c]));
    }
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Parse {
            line: 0,
            message: format!("packet index {} listed twice", w[0].0),
        });
    }
    Ok(rows)
}

pub fn read_truth(path: impl AsRef<Path>) -> Result<Vec<(usize, [f64; 3])>> {
    parse_truth(BufReader::new(File::open(path)?))
}

pub fn write_truth(path: impl AsRef<Path>, truths: &[[f64; 3]]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (i, t) in truths.iter().enumerate() {
        writeln!(w, "{i} {} {} {}", t[0], t[1], t[2])?;
    }
    w.flush()?;
    Ok(())
}

/// Row-major CSV, one image row per line.
pub fn write_frame_csv<W: Write>(mut w: W, frame: &Frame) -> Result<()> {
    for row in frame.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketEstimate {
    pub index: usize,
    pub t_ref: f64,
    pub theta: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<[f64; 3]>,
    pub score: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub reason: StopReason,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub config: serde_json::Value,
    pub n_packets: usize,
    /// RMS error against the truth file, when one was given.
    pub rms: Option<f64>,
    pub per_packet: Vec<PacketEstimate>,
}

impl EstimateSummary {
    /// One line per packet: `index t_ref theta1 theta2 theta3`.
    pub fn write_estimates<W: Write>(&self, mut w: W) -> Result<()> {
        for p in &self.per_packet {
            writeln!(w, "{} {} {} {} {}", p.index, p.t_ref, p.theta[0], p.theta[1], p.theta[2])?;
        }
        Ok(())
    }
}
