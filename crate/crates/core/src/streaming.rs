//! Causal per-sample differentiator built on a sliding window.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{DerivativeEstimate, EstimatorConfig, EstimatorKernel};

const TIMESTAMP_TOLERANCE: f64 = 1e-9;

/// Where the estimate is anchored inside the trailing window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Derivatives at the oldest sample of the window (delay `T`).
    Forward,
    /// Derivatives at the newest sample (delay 0). The window is read
    /// backwards, `x̃(τ) = x(t − τ)`, and odd orders change sign.
    #[default]
    TimeReversed,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fwd" | "forward" => Ok(Mode::Forward),
            "rev" | "time_reversed" | "reversed" => Ok(Mode::TimeReversed),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode `{other}` (expected fwd or rev)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StreamingDifferentiator {
    kernel: Arc<EstimatorKernel>,
    mode: Mode,
    buffer: VecDeque<f64>,
    scratch: Vec<f64>,
    last_time: Option<f64>,
    received: usize,
}

impl StreamingDifferentiator {
    pub fn new(kernel: Arc<EstimatorKernel>, mode: Mode) -> Self {
        let len = kernel.window_samples();
        Self {
            kernel,
            mode,
            buffer: VecDeque::with_capacity(len),
            scratch: vec![0.0; len],
            last_time: None,
            received: 0,
        }
    }

    pub fn from_config(config: EstimatorConfig, mode: Mode) -> Result<Self> {
        Ok(Self::new(Arc::new(EstimatorKernel::new(config)?), mode))
    }

    pub fn kernel(&self) -> &EstimatorKernel {
        &self.kernel
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_warm(&self) -> bool {
        self.buffer.len() == self.kernel.window_samples()
    }

    /// Samples received so far.
    pub fn received(&self) -> usize {
        self.received
    }

    pub fn reset(&mut self) {
        self.buffer.clear();
        self.last_time = None;
        self.received = 0;
    }

    /// Feeds one sample; returns an estimate once the window is full.
    pub fn push_sample(&mut self, t: f64, value: f64) -> Result<Option<DerivativeEstimate>> {
        let step = self.kernel.config().sample_step;
        if let Some(last) = self.last_time {
            let expected = last + step;
            if (t - expected).abs() > TIMESTAMP_TOLERANCE {
                return Err(Error::NonUniformStep { expected, got: t });
            }
        }
        if !value.is_finite() {
            return Err(Error::NonFiniteSample {
                index: self.received,
            });
        }
        self.last_time = Some(t);
        self.received += 1;

        let len = self.kernel.window_samples();
        if self.buffer.len() == len {
            self.buffer.pop_front();
        }
        self.buffer.push_back(value);
        if self.buffer.len() < len {
            return Ok(None);
        }

        let window = self.kernel.window_length();
        match self.mode {
            Mode::Forward => {
                for (dst, src) in self.scratch.iter_mut().zip(&self.buffer) {
                    *dst = *src;
                }
            }
            Mode::TimeReversed => {
                for (dst, src) in self.scratch.iter_mut().zip(self.buffer.iter().rev()) {
                    *dst = *src;
                }
            }
        }
        let mut values = vec![0.0; self.kernel.taylor_order() + 1];
        self.kernel.estimate_into(&self.scratch, &mut values)?;
        let estimate = match self.mode {
            Mode::Forward => DerivativeEstimate {
                anchor_time: t - window,
                values,
                delay: window,
            },
            Mode::TimeReversed => {
                for v in values.iter_mut().skip(1).step_by(2) {
                    *v = -*v;
                }
                DerivativeEstimate {
                    anchor_time: t,
                    values,
                    delay: 0.0,
                }
            }
        };
        Ok(Some(estimate))
    }

    /// The `ν = 0` channel of [`push_sample`](Self::push_sample).
    pub fn denoise(&mut self, t: f64, value: f64) -> Result<Option<f64>> {
        Ok(self.push_sample(t, value)?.map(|e| e.values[0]))
    }
}

/// Runs a fresh differentiator over a whole uniformly sampled series.
pub fn differentiate_series(
    kernel: Arc<EstimatorKernel>,
    mode: Mode,
    start_time: f64,
    values: &[f64],
) -> Result<Vec<DerivativeEstimate>> {
    let step = kernel.config().sample_step;
    let mut diff = StreamingDifferentiator::new(kernel, mode);
    let mut out = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        if let Some(e) = diff.push_sample(start_time + i as f64 * step, v)? {
            out.push(e);
        }
    }
    Ok(out)
}

/// Central difference `(x_{k+1} − x_{k−1}) / 2h`, one-sided at both ends.
/// The baseline the algebraic estimates are compared against.
pub fn central_difference(values: &[f64], step: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "a difference needs at least two samples, got {n}"
        )));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let mut out = Vec::with_capacity(n);
    out.push((values[1] - values[0]) / step);
    for w in values.windows(3) {
        out.push((w[2] - w[0]) / (2.0 * step));
    }
    if n > 2 {
        out.push((values[n - 1] - values[n - 2]) / step);
    }
    Ok(out)
}

/// Causal filter for a zero-order-hold input `u` that matches the averaging
/// the `ν`-th derivative estimate applies to `y⁽ᵛ⁾`.
///
/// Writing the estimate as `Σᵢ cᵢ y_{k−i}` and factoring `ν` backward
/// differences out of `c` gives `Σᵢ bᵢ (∇ᵛy)_{k−i}`. Each `∇ᵛy` is an
/// integral of `y⁽ᵛ⁾` against a cardinal B-spline, so an input that enters
/// `y⁽ᵛ⁾` additively and is held between samples contributes exactly
/// `Σ_l w_l u_{k−1−l}` with the weights built here. Subtracting the two
/// cancels the input, which breaks the algebraic loop in laws of the form
/// `u − ŷ⁽ᵛ⁾`.
#[derive(Debug, Clone)]
pub struct MatchedInputFilter {
    weights: Vec<f64>,
    history: VecDeque<f64>,
}

impl MatchedInputFilter {
    pub fn new(kernel: &EstimatorKernel, mode: Mode, order: usize) -> Result<Self> {
        let n = kernel.taylor_order();
        if order == 0 || order > n {
            return Err(Error::InvalidArgument(format!(
                "matched input filter needs 1 ≤ order ≤ {n}, got {order}"
            )));
        }
        let len = kernel.window_samples();
        let h = kernel.config().sample_step;

        // c_i: weight of y_{k−i} in the order-th estimate.
        let mut unit = vec![0.0; len];
        let mut out = vec![0.0; n + 1];
        let mut c = vec![0.0; len];
        for (i, ci) in c.iter_mut().enumerate() {
            let slot = match mode {
                Mode::TimeReversed => i,
                Mode::Forward => len - 1 - i,
            };
            unit[slot] = 1.0;
            kernel.estimate_into(&unit, &mut out)?;
            unit[slot] = 0.0;
            *ci = if mode == Mode::TimeReversed && order % 2 == 1 {
                -out[order]
            } else {
                out[order]
            };
        }

        // Divide Σ cᵢzⁱ by (1 − z)^order.
        let mut b = c;
        for _ in 0..order {
            let mut acc = 0.0;
            for v in b.iter_mut() {
                acc += *v;
                *v = acc;
            }
            b.pop();
        }

        let beta: Vec<f64> = (0..order)
            .map(|j| cardinal_bspline(order + 1, (j + 1) as f64))
            .collect();
        let scale = h.powi(order as i32);
        let mut weights = vec![0.0; len - 1];
        for (i, bi) in b.iter().enumerate() {
            for (j, bj) in beta.iter().enumerate() {
                weights[i + order - 1 - j] += bi * bj * scale;
            }
        }
        Ok(Self {
            history: VecDeque::with_capacity(weights.len()),
            weights,
        })
    }

    /// `w_l` multiplies `u_{k−1−l}`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Records the input held over `[t_k, t_{k+1})`.
    pub fn push(&mut self, u: f64) {
        if self.history.len() == self.weights.len() {
            self.history.pop_back();
        }
        self.history.push_front(u);
    }

    /// Filtered input at the current sample, once a full window of inputs
    /// has been recorded.
    pub fn value(&self) -> Option<f64> {
        if self.history.len() < self.weights.len() {
            return None;
        }
        Some(self.weights.iter().zip(&self.history).map(|(w, u)| w * u).sum())
    }

    pub fn reset(&mut self) {
        self.history.clear();
    }
}

/// Cardinal B-spline of order `n` (support `[0, n]`).
fn cardinal_bspline(n: usize, x: f64) -> f64 {
    if n == 1 {
        return if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 };
    }
    let m = n as f64;
    (x * cardinal_bspline(n - 1, x) + (m - x) * cardinal_bspline(n - 1, x - 1.0)) / (m - 1.0)
}

#[cfg(test)]
mod tests {
    #[test]
    fn central_difference_of_quadratic() {
        let h = 0.1;
        let x: Vec<f64> = (0..6).map(|k| (k as f64 * h).powi(2)).collect();
        let d = central_difference(&x, h).unwrap();
        assert_eq!(d.len(), x.len());
        for k in 1..5 {
            assert!((d[k] - 2.0 * k as f64 * h).abs() < 1e-12);
        }
        assert!((d[0] - h).abs() < 1e-12);
        assert!(central_difference(&[1.0], h).is_err());
    }

    use super::*;

    fn diff(n: usize, window: f64, mode: Mode) -> StreamingDifferentiator {
        StreamingDifferentiator::from_config(EstimatorConfig::new(n, window, 1e-3), mode).unwrap()
    }

    #[test]
    fn constant_signal_any_mode() {
        for mode in [Mode::Forward, Mode::TimeReversed] {
            let mut d = diff(3, 0.05, mode);
            let mut last = None;
            for k in 0..200 {
                if let Some(e) = d.push_sample(k as f64 * 1e-3, 5.0).unwrap() {
                    last = Some(e);
                }
            }
            let e = last.unwrap();
            assert!((e.values[0] - 5.0).abs() < 1e-10);
            for v in &e.values[1..] {
                assert!(v.abs() < 1e-6, "{:?}", e.values);
            }
        }
    }

    #[test]
    fn ramp_time_reversed_parity() {
        let mut d = diff(1, 0.02, Mode::TimeReversed);
        for k in 0..100 {
            let t = k as f64 * 1e-3;
            if let Some(e) = d.push_sample(t, t).unwrap() {
                assert_eq!(e.anchor_time, t);
                assert_eq!(e.delay, 0.0);
                assert!((e.values[0] - t).abs() < 1e-12);
                assert!((e.values[1] - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn forward_anchor_lags_by_window() {
        let mut d = diff(2, 0.01, Mode::Forward);
        let mut got = None;
        for k in 0..=10 {
            let t = k as f64 * 1e-3;
            got = d.push_sample(t, t * t).unwrap();
        }
        let e = got.unwrap();
        assert!(e.anchor_time.abs() < 1e-12);
        assert!((e.delay - 0.01).abs() < 1e-15);
        assert!((e.values[2] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn warm_up_emits_nothing() {
        let mut d = diff(2, 0.1, Mode::TimeReversed);
        let emitted = (0..150)
            .filter(|k| d.push_sample(*k as f64 * 1e-3, 1.0).unwrap().is_some())
            .count();
        // window of 101 samples: first emission on the 101st
        assert_eq!(emitted, 50);
    }

    #[test]
    fn rejects_gaps() {
        let mut d = diff(1, 0.01, Mode::Forward);
        d.push_sample(0.0, 1.0).unwrap();
        d.push_sample(1e-3, 1.0).unwrap();
        assert!(matches!(
            d.push_sample(3e-3, 1.0),
            Err(Error::NonUniformStep { .. })
        ));
    }

    #[test]
    fn denoise_ramp() {
        let mut d = diff(2, 0.05, Mode::TimeReversed);
        for k in 0..120 {
            let t = k as f64 * 1e-3;
            if let Some(v) = d.denoise(t, t).unwrap() {
                assert!((v - t).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("fwd".parse::<Mode>().unwrap(), Mode::Forward);
        assert_eq!("rev".parse::<Mode>().unwrap(), Mode::TimeReversed);
        assert!("sideways".parse::<Mode>().is_err());
    }

    #[test]
    fn bspline_values() {
        assert_eq!(cardinal_bspline(2, 1.0), 1.0);
        assert_eq!(cardinal_bspline(3, 1.0), 0.5);
        assert!((cardinal_bspline(4, 1.0) - 1.0 / 6.0).abs() < 1e-15);
        assert!((cardinal_bspline(4, 2.0) - 2.0 / 3.0).abs() < 1e-15);
    }

    /// Exact double integrator `ÿ = u` with a held input: the second
    /// derivative estimate and the matched filter of `u` agree.
    #[test]
    fn matched_filter_double_integrator() {
        for mode in [Mode::TimeReversed, Mode::Forward] {
            let cfg = EstimatorConfig::new(2, 0.05, 1e-3);
            let kernel = Arc::new(EstimatorKernel::new(cfg).unwrap());
            let mut f = MatchedInputFilter::new(&kernel, mode, 2).unwrap();
            let sum: f64 = f.weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "weights sum {sum}");
            let mut d = StreamingDifferentiator::new(kernel, mode);
            let (mut y, mut yd) = (0.3, -0.2);
            let h = 1e-3;
            let mut checked = 0;
            for k in 0..400 {
                let t = k as f64 * h;
                let est = d.push_sample(t, y).unwrap();
                if let (Some(e), Some(fu)) = (est, f.value()) {
                    assert!((e.values[2] - fu).abs() < 1e-7, "{} vs {fu}", e.values[2]);
                    checked += 1;
                }
                // Rough input so that nothing is polynomial.
                let u = (37.0 * t).sin() * 5.0 + if k % 7 == 0 { 3.0 } else { -1.0 };
                f.push(u);
                y += h * yd + 0.5 * h * h * u;
                yd += h * u;
            }
            assert!(checked > 300);
        }
    }

    #[test]
    fn matched_filter_first_order() {
        let cfg = EstimatorConfig::new(1, 0.04, 1e-3);
        let kernel = Arc::new(EstimatorKernel::new(cfg).unwrap());
        let mut f = MatchedInputFilter::new(&kernel, Mode::TimeReversed, 1).unwrap();
        let mut d = StreamingDifferentiator::new(kernel, Mode::TimeReversed);
        let mut y = 1.0;
        for k in 0..200 {
            let est = d.push_sample(k as f64 * 1e-3, y).unwrap();
            if let (Some(e), Some(fu)) = (est, f.value()) {
                assert!((e.values[1] - fu).abs() < 1e-7);
            }
            let u = if k % 3 == 0 { 2.0 } else { -0.5 };
            f.push(u);
            y += 1e-3 * u;
        }
        assert!(MatchedInputFilter::new(d.kernel(), Mode::TimeReversed, 2).is_err());
    }
}
