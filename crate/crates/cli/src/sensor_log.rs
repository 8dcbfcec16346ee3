//! Text sensor logs.
//!
//! One record per line, fields separated by commas, `#` starts a comment:
//!
//! ```text
//! G,t,ux,uy,uz
//! D,t,d1x,d1y,d1z,d2x,d2y,d2z
//! T,t,R00,R01,R02,R10,R11,R12,R20,R21,R22,wx,wy,wz
//! ```
//!
//! Timestamps are seconds with up to nine fractional digits and must not
//! decrease within a stream.

use std::fmt::Write as _;

use eqf_core::sim::{DirectionRecord, GyroRecord, SensorStreams, TruthRecord, NANOS_PER_SEC};
use eqf_core::{ManifoldState, Rotation};
use nalgebra::{Matrix3, Vector3};

/// Directions whose norm is off by more than this are reported on ingest.
pub const NORM_WARNING: f64 = 1e-3;

/// Vectors closer than this to unit length are kept bit for bit.
const UNIT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct LogError {
    pub line: usize,
    pub message: String,
}

pub fn format_time(t: i64) -> String {
    let sign = if t < 0 { "-" } else { "" };
    let a = t.unsigned_abs();
    let n = NANOS_PER_SEC as u64;
    format!("{sign}{}.{:09}", a / n, a % n)
}

pub fn parse_time(s: &str) -> Option<i64> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    let digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
    let ns = if digits(int) && (frac.is_empty() || digits(frac)) && frac.len() <= 9 {
        let whole: i64 = int.parse().ok()?;
        let frac_ns: i64 = if frac.is_empty() { 0 } else { format!("{frac:0<9}").parse().ok()? };
        whole.checked_mul(NANOS_PER_SEC)?.checked_add(frac_ns)?
    } else {
        let v: f64 = body.parse().ok()?;
        if !v.is_finite() {
            return None;
        }
        (v * NANOS_PER_SEC as f64).round() as i64
    };
    Some(if neg { -ns } else { ns })
}

/// Parsed log plus non-fatal diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedLog {
    pub streams: SensorStreams,
    pub warnings: Vec<String>,
}

pub fn parse(text: &str) -> Result<ParsedLog, LogError> {
    let mut out = ParsedLog::default();
    let mut last = [i64::MIN; 3];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| LogError { line, message };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        let (kind, expected, slot) = match fields[0] {
            "G" => ("gyro", 5, 0),
            "D" => ("direction", 8, 1),
            "T" => ("truth", 14, 2),
            other => return Err(err(format!("unknown record type `{other}`"))),
        };
        if fields.len() != expected {
            return Err(err(format!("{kind} record needs {expected} fields, found {}", fields.len())));
        }
        let t = parse_time(fields[1]).ok_or_else(|| err(format!("bad timestamp `{}`", fields[1])))?;
        if t < last[slot] {
            return Err(err(format!(
                "{kind} timestamp {} is earlier than the previous {kind} record ({})",
                format_time(t),
                format_time(last[slot])
            )));
        }
        last[slot] = t;
        let values = fields[2..]
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| err(format!("{kind} record has a non-numeric or non-finite value")))?;
        let v3 = |k: usize| Vector3::new(values[k], values[k + 1], values[k + 2]);
        match slot {
            0 => out.streams.gyro.push(GyroRecord { t, u: v3(0) }),
            1 => {
                let mut unit = |v: Vector3<f64>, name: &str| -> Result<Vector3<f64>, LogError> {
                    let n = v.norm();
                    if n.is_nan() || n <= 0.0 {
                        return Err(err(format!("{name} has zero length")));
                    }
                    if (n - 1.0).abs() > NORM_WARNING {
                        out.warnings.push(format!("line {line}: {name} norm {n} renormalized"));
                    }
                    Ok(if (n - 1.0).abs() > UNIT_SLACK { v / n } else { v })
                };
                let d1 = unit(v3(0), "d1")?;
                let d2 = unit(v3(3), "d2")?;
                out.streams.directions.push(DirectionRecord { t, d1, d2 });
            }
            _ => {
                let m = Matrix3::from_row_slice(&values[..9]);
                let rot = Rotation::from_matrix(m, 1e-6)
                    .map_err(|_| err("truth attitude is not a rotation matrix".into()))?;
                out.streams.truth.push(TruthRecord { t, state: ManifoldState::new(rot, v3(9)) });
            }
        }
    }
    Ok(out)
}

/// Writes all records merged by time; gyro, then direction, then truth at equal times.
pub fn write(streams: &SensorStreams) -> String {
    let mut s = String::new();
    s.push_str("# G,t,ux,uy,uz | D,t,d1x,d1y,d1z,d2x,d2y,d2z | T,t,R00..R22 (row-major),wx,wy,wz\n");
    let (mut g, mut d, mut r) = (0, 0, 0);
    let (gs, ds, ts) = (&streams.gyro, &streams.directions, &streams.truth);
    loop {
        let next = [gs.get(g).map(|x| x.t), ds.get(d).map(|x| x.t), ts.get(r).map(|x| x.t)];
        let Some(t) = next.iter().flatten().min().copied() else { break };
        if next[0] == Some(t) {
            let u = gs[g].u;
            let _ = writeln!(s, "G,{},{},{},{}", format_time(t), u.x, u.y, u.z);
            g += 1;
        } else if next[1] == Some(t) {
            let x = &ds[d];
            let _ = writeln!(
                s,
                "D,{},{},{},{},{},{},{}",
                format_time(t),
                x.d1.x,
                x.d1.y,
                x.d1.z,
                x.d2.x,
                x.d2.y,
                x.d2.z
            );
            d += 1;
        } else {
            let x = &ts[r].state;
            let m = x.rot.matrix();
            let _ = write!(s, "T,{}", format_time(t));
            for i in 0..3 {
                for j in 0..3 {
                    let _ = write!(s, ",{}", m[(i, j)]);
                }
            }
            let _ = writeln!(s, ",{},{},{}", x.omega.x, x.omega.y, x.omega.z);
            r += 1;
        }
    }
    s
}
