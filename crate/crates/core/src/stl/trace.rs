use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::StlError;

const AXES: [&str; 3] = ["x", "y", "z"];

/// Uniformly sampled multi-channel signal.
///
/// Channels are addressed by dotted names (`y.x`, `vel.z`, `q.w`). A vector
/// `y` is the triple of channels `y.x`, `y.y`, `y.z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTrace {
    dt: f64,
    len: usize,
    channels: BTreeMap<String, Vec<f64>>,
}

impl SignalTrace {
    pub fn new(dt: f64, len: usize) -> Result<Self, StlError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(StlError::InvalidTrace(format!("dt must be positive, got {dt}")));
        }
        if len == 0 {
            return Err(StlError::InvalidTrace("trace must hold at least one sample".into()));
        }
        Ok(Self { dt, len, channels: BTreeMap::new() })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn insert(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<(), StlError> {
        let name = name.into();
        if values.len() != self.len {
            return Err(StlError::InvalidTrace(format!(
                "channel `{name}` has {} samples, trace has {}",
                values.len(),
                self.len
            )));
        }
        self.channels.insert(name, values);
        Ok(())
    }

    pub fn with_channel(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self, StlError> {
        self.insert(name, values)?;
        Ok(self)
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.get(name).map(Vec::as_slice)
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.keys().map(String::as_str)
    }

    pub fn channels(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.channels
    }

    pub fn insert_vector(&mut self, prefix: &str, points: &[Vector3<f64>]) -> Result<(), StlError> {
        for (axis, name) in AXES.iter().enumerate() {
            self.insert(format!("{prefix}.{name}"), points.iter().map(|p| p[axis]).collect())?;
        }
        Ok(())
    }

    /// The three component channels of vector `prefix`, if all are present.
    pub fn vector(&self, prefix: &str) -> Option<[&[f64]; 3]> {
        let x = self.channel(&format!("{prefix}.x"))?;
        let y = self.channel(&format!("{prefix}.y"))?;
        let z = self.channel(&format!("{prefix}.z"))?;
        Some([x, y, z])
    }

    pub fn points(&self, prefix: &str) -> Option<Vec<Vector3<f64>>> {
        let [x, y, z] = self.vector(prefix)?;
        Some((0..self.len).map(|k| Vector3::new(x[k], y[k], z[k])).collect())
    }

    /// Adds `vel.*` style channels by first differences of `pos.*`:
    /// `vel[k] = (pos[k] - pos[k-1]) / dt`, with `vel[0] = vel[1]`.
    pub fn derive_velocity(&mut self, pos_prefix: &str, vel_prefix: &str) -> Result<(), StlError> {
        for axis in AXES {
            let src = format!("{pos_prefix}.{axis}");
            let pos = self
                .channel(&src)
                .ok_or_else(|| StlError::MissingChannel(src.clone()))?;
            let vel = first_difference(pos, self.dt);
            self.insert(format!("{vel_prefix}.{axis}"), vel)?;
        }
        Ok(())
    }

    /// Copy of samples `start..end`.
    pub fn window(&self, start: usize, end: usize) -> Result<Self, StlError> {
        if start >= end || end > self.len {
            return Err(StlError::InvalidTrace(format!(
                "window {start}..{end} outside trace of length {}",
                self.len
            )));
        }
        let channels = self
            .channels
            .iter()
            .map(|(k, v)| (k.clone(), v[start..end].to_vec()))
            .collect();
        Ok(Self { dt: self.dt, len: end - start, channels })
    }

    /// Reads a CSV with a `t` column followed by channel columns.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, StlError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| StlError::InvalidTrace(e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        let t_col = headers
            .iter()
            .position(|h| h == "t" || h == "time")
            .ok_or_else(|| StlError::InvalidTrace("missing time column `t`".into()))?;
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| StlError::InvalidTrace(e.to_string()))?;
            for (col, field) in record.iter().enumerate().take(headers.len()) {
                let value: f64 = field.parse().map_err(|_| {
                    StlError::InvalidTrace(format!("row {}: `{field}` is not a number", row + 1))
                })?;
                if !value.is_finite() {
                    return Err(StlError::InvalidTrace(format!("row {}: non-finite sample", row + 1)));
                }
                columns[col].push(value);
            }
        }
        let times = &columns[t_col];
        let dt = match times.len() {
            0 => return Err(StlError::InvalidTrace("no samples".into())),
            1 => 1.0,
            _ => times[1] - times[0],
        };
        check_uniform(times, dt)?;
        let mut trace = Self::new(dt, times.len())?;
        for (col, name) in headers.iter().enumerate() {
            if col != t_col {
                trace.insert(name.clone(), std::mem::take(&mut columns[col]))?;
            }
        }
        Ok(trace)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), StlError> {
        let mut wtr = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| StlError::InvalidTrace(e.to_string());
        let mut header = vec!["t".to_owned()];
        header.extend(self.channels.keys().cloned());
        wtr.write_record(&header).map_err(io)?;
        for k in 0..self.len {
            let mut row = vec![format!("{}", k as f64 * self.dt)];
            row.extend(self.channels.values().map(|v| format!("{}", v[k])));
            wtr.write_record(&row).map_err(io)?;
        }
        wtr.flush().map_err(|e| StlError::InvalidTrace(e.to_string()))?;
        Ok(())
    }
}

pub(crate) fn first_difference(pos: &[f64], dt: f64) -> Vec<f64> {
    let n = pos.len();
    let mut vel = vec![0.0; n];
    for k in 1..n {
        vel[k] = (pos[k] - pos[k - 1]) / dt;
    }
    if n > 1 {
        vel[0] = vel[1];
    }
    vel
}

/// Pulls a gradient on [`first_difference`]'s output back onto its input.
pub(crate) fn first_difference_vjp(vbar: &[f64], dt: f64) -> Vec<f64> {
    let n = vbar.len();
    let mut ybar = vec![0.0; n];
    if n < 2 {
        return ybar;
    }
    for k in 1..n {
        // vel[0] duplicates vel[1]
        let g = if k == 1 { vbar[0] + vbar[1] } else { vbar[k] };
        ybar[k] += g / dt;
        ybar[k - 1] -= g / dt;
    }
    ybar
}

/// Uniform spacing check with relative tolerance 1e-6.
pub(crate) fn check_uniform(times: &[f64], dt: f64) -> Result<(), StlError> {
    if times.len() < 2 {
        return Ok(());
    }
    if dt <= 0.0 {
        return Err(StlError::InvalidTrace("time column must be increasing".into()));
    }
    for (k, w) in times.windows(2).enumerate() {
        let step = w[1] - w[0];
        if ((step - dt) / dt).abs() > 1e-6 {
            return Err(StlError::InvalidTrace(format!(
                "non-uniform time spacing at row {}: {step} vs {dt}",
                k + 2
            )));
        }
    }
    Ok(())
}
