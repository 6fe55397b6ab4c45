//! Time-aligned simulation channels.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub values: Vec<f64>,
}

/// All channels share one time grid; rows are appended in lockstep.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub time: Vec<f64>,
    pub channels: Vec<Channel>,
}

impl SimTrace {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Self {
        Self {
            time: Vec::new(),
            channels: names
                .iter()
                .map(|n| Channel {
                    name: n.as_ref().to_string(),
                    values: Vec::new(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// Appends one row; `row` follows the channel declaration order.
    pub fn push_row(&mut self, t: f64, row: &[f64]) {
        assert_eq!(row.len(), self.channels.len(), "row width mismatch");
        self.time.push(t);
        for (c, v) in self.channels.iter_mut().zip(row) {
            c.values.push(*v);
        }
    }

    pub fn add_channel(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.time.len() {
            return Err(Error::InvalidArgument(format!(
                "channel `{name}` has {} samples, trace has {}",
                values.len(),
                self.time.len()
            )));
        }
        if self.channels.iter().any(|c| c.name == name) {
            return Err(Error::InvalidArgument(format!("duplicate channel `{name}`")));
        }
        self.channels.push(Channel { name, values });
        Ok(())
    }

    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        self.channels
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|c| c.name.as_str())
    }

    /// Sampling step of a uniform grid. Each `tᵢ` must lie within `10⁻⁶ h`
    /// of `t₀ + i h`.
    pub fn uniform_step(&self) -> Result<f64> {
        let n = self.time.len();
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "a sampling step needs at least two samples, got {n}"
            )));
        }
        let t0 = self.time[0];
        let h = (self.time[n - 1] - t0) / (n - 1) as f64;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument("time must increase".into()));
        }
        for (i, &t) in self.time.iter().enumerate() {
            let expected = t0 + i as f64 * h;
            if (t - expected).abs() > 1e-6 * h {
                return Err(Error::NonUniformStep { expected, got: t });
            }
        }
        Ok(h)
    }

    /// Index of the first sample with `t ≥ at` (within half a step).
    pub fn index_at(&self, at: f64) -> Option<usize> {
        let step = if self.time.len() > 1 {
            self.time[1] - self.time[0]
        } else {
            0.0
        };
        self.time.iter().position(|&t| t >= at - 0.5 * step)
    }

    /// Root mean square of `a − b` over samples with `from ≤ t ≤ to`.
    pub fn rms_between(&self, a: &str, b: &str, from: f64, to: f64) -> Result<f64> {
        let xa = self.channel(a)?;
        let xb = self.channel(b)?;
        Ok(rms_where(&self.time, xa, xb, |t| t >= from && t <= to))
    }
}

pub(crate) fn rms_where(time: &[f64], a: &[f64], b: &[f64], keep: impl Fn(f64) -> bool) -> f64 {
    let (sum, count) = time
        .iter()
        .zip(a.iter().zip(b))
        .filter(|(t, _)| keep(**t))
        .fold((0.0, 0usize), |(s, n), (_, (x, y))| (s + (x - y).powi(2), n + 1));
    if count == 0 {
        f64::NAN
    } else {
        (sum / count as f64).sqrt()
    }
}
