//! 100 Hz finger-velocity traces and their CSV form.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::vec2::Vec2;
use crate::velocity::PointerEvent;

/// Velocity samples per second.
pub const TRACE_RATE: u32 = 100;
/// Spacing of trace samples in seconds.
pub const TRACE_PERIOD: f64 = 0.01;
/// Allowed deviation of a row spacing from [`TRACE_PERIOD`].
pub const SPACING_TOLERANCE: f64 = 1e-6;

pub const VELOCITY_HEADER: [&str; 3] = ["t_s", "vx_mm_s", "vy_mm_s"];
pub const POSITION_HEADER: [&str; 3] = ["t_s", "x_mm", "y_mm"];

/// Uniformly sampled 2D finger velocity in mm/s.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VelocityTrace {
    samples: Vec<Vec2>,
}

impl VelocityTrace {
    pub fn new(samples: Vec<Vec2>) -> Result<Self> {
        if let Some(row) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::MalformedTrace {
                row,
                message: "non-finite velocity".into(),
            });
        }
        Ok(VelocityTrace { samples })
    }

    pub fn rate(&self) -> u32 {
        TRACE_RATE
    }

    pub fn samples(&self) -> &[Vec2] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn truncate(&mut self, len: usize) {
        self.samples.truncate(len);
    }
}

fn read_rows(path: &Path, header: [&str; 3]) -> Result<Vec<[f64; 3]>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file);
    let found = reader.headers().map_err(|e| Error::MalformedTrace {
        row: 0,
        message: e.to_string(),
    })?;
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::MalformedTrace {
            row: 0,
            message: format!("expected header `{}`", header.join(",")),
        });
    }

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::MalformedTrace {
            row,
            message: e.to_string(),
        })?;
        let mut values = [0.0; 3];
        for (slot, field) in values.iter_mut().zip(record.iter()) {
            let v: f64 = field.trim().parse().map_err(|_| Error::MalformedTrace {
                row,
                message: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::MalformedTrace {
                    row,
                    message: format!("non-finite value {field:?}"),
                });
            }
            *slot = v;
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(rows)
}

/// Loads a velocity trace CSV (`t_s,vx_mm_s,vy_mm_s`) sampled at 100 Hz.
pub fn load_trace(path: impl AsRef<Path>) -> Result<VelocityTrace> {
    let rows = read_rows(path.as_ref(), VELOCITY_HEADER)?;
    for (i, pair) in rows.windows(2).enumerate() {
        let dt = pair[1][0] - pair[0][0];
        if (dt - TRACE_PERIOD).abs() > SPACING_TOLERANCE {
            return Err(Error::NonUniformTrace { row: i + 2 });
        }
    }
    VelocityTrace::new(rows.iter().map(|r| Vec2::new(r[1], r[2])).collect())
}

/// Loads a position CSV (`t_s,x_mm,y_mm`) as pointer events. Spacing may be irregular.
pub fn load_positions(path: impl AsRef<Path>) -> Result<Vec<PointerEvent>> {
    let rows = read_rows(path.as_ref(), POSITION_HEADER)?;
    Ok(rows
        .iter()
        .map(|r| PointerEvent::new(r[0], Vec2::new(r[1], r[2])))
        .collect())
}

/// Writes a trace as CSV with shortest round-trip number formatting.
pub fn write_trace(path: impl AsRef<Path>, trace: &VelocityTrace) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(trace.len() * 24 + 32);
    out.push_str(&VELOCITY_HEADER.join(","));
    out.push('\n');
    for (i, v) in trace.samples().iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", i as f64 * TRACE_PERIOD, v.x, v.y));
    }
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}
