//! Window estimator for the Taylor coefficients of a noisy signal.
//!
//! A signal on `[0, T]` is approximated by its truncated Taylor expansion
//! `x(t) ≈ Σ_{ν≤N} x⁽ᵛ⁾(0) tᵛ/ν!`. In the operational domain this reads
//! `s^{N+1} X(s) = Σ_ν x⁽ᵛ⁾(0) s^{N−ν}`. Differentiating both sides `α` times
//! with respect to `s` (`α = 0..N`) and multiplying by `s^{−N̄}` gives `N+1`
//! linear equations in the unknown derivatives. On the left only iterated
//! integrals of `(−τ)ᵏ x(τ)` remain, on the right only powers of `T`.
//! The right-hand matrix is anti-triangular, so the system is solved by
//! substitution.
//!
//! Everything is computed on the normalized window `τ̂ = τ/T ∈ [0, 1]`; the
//! estimate of derivative `ν` is rescaled by `T^{−ν}` afterwards.

use crate::error::{Error, Result};

/// Largest Taylor order accepted by [`EstimatorConfig::validate`].
pub const MAX_TAYLOR_ORDER: usize = 8;
/// Largest integral order accepted by [`EstimatorConfig::validate`].
pub const MAX_INTEGRAL_ORDER: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Truncation order `N` of the Taylor expansion.
    pub taylor_order: usize,
    /// Power `N̄` of `s⁻¹` applied to both sides; must exceed `N`.
    pub integral_order: usize,
    /// Window length `T` in seconds.
    pub window_length: f64,
    /// Sampling step `h` in seconds.
    pub sample_step: f64,
}

impl EstimatorConfig {
    /// Configuration with the default integral order `N̄ = N + 2`.
    pub fn new(taylor_order: usize, window_length: f64, sample_step: f64) -> Self {
        Self {
            taylor_order,
            integral_order: taylor_order + 2,
            window_length,
            sample_step,
        }
    }

    pub fn with_integral_order(mut self, integral_order: usize) -> Self {
        self.integral_order = integral_order;
        self
    }

    pub fn with_window(mut self, window_length: f64) -> Self {
        self.window_length = window_length;
        self
    }

    /// Number of sampling intervals `M = T/h` in one window.
    pub fn intervals(&self) -> Result<usize> {
        let h = self.sample_step;
        let t = self.window_length;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidConfig(format!("sample step must be > 0, got {h}")));
        }
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidConfig(format!("window length must be > 0, got {t}")));
        }
        let ratio = t / h;
        let m = ratio.round();
        if (ratio - m).abs() > 1e-6 * m.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "window length {t} is not an integer multiple of the step {h}"
            )));
        }
        Ok(m as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.taylor_order;
        if n > MAX_TAYLOR_ORDER {
            return Err(Error::InvalidConfig(format!(
                "taylor order {n} exceeds the supported maximum {MAX_TAYLOR_ORDER}"
            )));
        }
        if self.integral_order <= n {
            return Err(Error::InvalidConfig(format!(
                "integral order {} must exceed taylor order {n}",
                self.integral_order
            )));
        }
        if self.integral_order > MAX_INTEGRAL_ORDER {
            return Err(Error::InvalidConfig(format!(
                "integral order {} exceeds the supported maximum {MAX_INTEGRAL_ORDER}",
                self.integral_order
            )));
        }
        let m = self.intervals()?;
        if m < n + 1 {
            return Err(Error::InvalidConfig(format!(
                "window holds {} samples, need at least {}",
                m + 1,
                n + 2
            )));
        }
        Ok(())
    }

    /// Samples per window, `M + 1`.
    pub fn window_samples(&self) -> Result<usize> {
        Ok(self.intervals()? + 1)
    }
}

/// Estimated derivatives `0..=N` at `anchor_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeEstimate {
    pub anchor_time: f64,
    pub values: Vec<f64>,
    /// Time between the anchor and the newest sample used.
    pub delay: f64,
}

impl DerivativeEstimate {
    pub fn order(&self) -> usize {
        self.values.len() - 1
    }

    pub fn derivative(&self, nu: usize) -> Option<f64> {
        self.values.get(nu).copied()
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `n! / (n−k)!`, zero when `k > n`.
pub(crate) fn falling_factorial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    ((n - k + 1)..=n).fold(1.0, |acc, i| acc * i as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    falling_factorial(n, k) / factorial(k)
}

/// Order of the Gregory end correction: the composite rule integrates
/// polynomials of degree `< GREGORY_ORDER` exactly.
pub const GREGORY_ORDER: usize = 6;

/// Unit-step quadrature weights on `intervals + 1` nodes: the trapezoid
/// rule plus Gregory end corrections derived from the Euler–Maclaurin
/// expansion. Exact for polynomials of degree `< min(GREGORY_ORDER, intervals + 1)`.
pub fn quadrature_weights(intervals: usize) -> Vec<f64> {
    let mut w = vec![1.0; intervals + 1];
    w[0] = 0.5;
    w[intervals] = 0.5;
    if intervals == 0 {
        w[0] = 0.0;
        return w;
    }
    let q = GREGORY_ORDER.min(intervals + 1);
    // Σ_i a_i i^d = B_{d+1}/(d+1) for odd d, 0 otherwise.
    let bernoulli_even = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0];
    let vander = nalgebra::DMatrix::from_fn(q, q, |d, i| (i as f64).powi(d as i32));
    let moments = nalgebra::DVector::from_fn(q, |d, _| {
        if d % 2 == 1 {
            bernoulli_even[(d - 1) / 2] / (d + 1) as f64
        } else {
            0.0
        }
    });
    let corr = vander
        .lu()
        .solve(&moments)
        .expect("Vandermonde matrix on distinct nodes is invertible");
    for (i, a) in corr.iter().enumerate() {
        w[i] += a;
        w[intervals - i] += a;
    }
    w
}

/// Quadrature weights on `intervals + 1` uniform nodes over `[0, window]`
/// for the functional `I⁽ᵐ⁾[(−τ)ᵏ f(τ)](window)`, where
/// `I⁽ᵐ⁾[g](T) = ∫₀ᵀ (T−τ)^{m−1}/(m−1)! g(τ) dτ` and `I⁽⁰⁾[g](T) = g(T)`.
pub fn iterated_integral_weights(
    fold: usize,
    power: usize,
    intervals: usize,
    window: f64,
) -> Vec<f64> {
    let mut weights = vec![0.0; intervals + 1];
    let sign = if power % 2 == 0 { 1.0 } else { -1.0 };
    if fold == 0 {
        weights[intervals] = sign * window.powi(power as i32);
        return weights;
    }
    let step = window / intervals as f64;
    let norm = factorial(fold - 1);
    let quad = quadrature_weights(intervals);
    for (i, (w, q)) in weights.iter_mut().zip(&quad).enumerate() {
        let tau = i as f64 * step;
        let cauchy = (window - tau).powi(fold as i32 - 1) / norm;
        *w = step * q * cauchy * sign * tau.powi(power as i32);
    }
    weights
}

/// Coefficient of `x⁽ᵛ⁾(0)` in equation `alpha` for a window of length `window`.
pub fn rhs_coefficient(
    taylor_order: usize,
    integral_order: usize,
    alpha: usize,
    nu: usize,
    window: f64,
) -> f64 {
    let n = taylor_order;
    if nu + alpha > n {
        return 0.0;
    }
    let m = integral_order + alpha + nu - n;
    falling_factorial(n - nu, alpha) * window.powi(m as i32 - 1) / factorial(m - 1)
}

/// Precomputed weights and system matrix for one estimator configuration.
///
/// Immutable after construction; share freely across threads.
#[derive(Debug, Clone)]
pub struct EstimatorKernel {
    config: EstimatorConfig,
    intervals: usize,
    /// `lhs_weights[α][i]`, normalized window.
    lhs_weights: Vec<Vec<f64>>,
    /// `rhs[α][ν]`, normalized window.
    rhs: Vec<Vec<f64>>,
    /// `T^{−ν}`.
    rescale: Vec<f64>,
}

impl EstimatorKernel {
    pub fn new(config: EstimatorConfig) -> Result<Self> {
        config.validate()?;
        let n = config.taylor_order;
        let nbar = config.integral_order;
        let intervals = config.intervals()?;

        let mut lhs_weights = Vec::with_capacity(n + 1);
        for alpha in 0..=n {
            let mut acc = vec![0.0; intervals + 1];
            for j in 0..=alpha.min(n + 1) {
                let coeff = binomial(alpha, j) * falling_factorial(n + 1, j);
                let fold = nbar + j - (n + 1);
                let w = iterated_integral_weights(fold, alpha - j, intervals, 1.0);
                for (a, wi) in acc.iter_mut().zip(&w) {
                    *a += coeff * wi;
                }
            }
            lhs_weights.push(acc);
        }

        let rhs = (0..=n)
            .map(|alpha| {
                (0..=n)
                    .map(|nu| rhs_coefficient(n, nbar, alpha, nu, 1.0))
                    .collect()
            })
            .collect();

        let rescale = (0..=n)
            .map(|nu| config.window_length.powi(-(nu as i32)))
            .collect();

        Ok(Self {
            config,
            intervals,
            lhs_weights,
            rhs,
            rescale,
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn taylor_order(&self) -> usize {
        self.config.taylor_order
    }

    pub fn window_samples(&self) -> usize {
        self.intervals + 1
    }

    pub fn window_length(&self) -> f64 {
        self.config.window_length
    }

    /// Quadrature weights of equation `alpha` on the normalized window.
    pub fn lhs_weights(&self, alpha: usize) -> &[f64] {
        &self.lhs_weights[alpha]
    }

    /// Right-hand matrix on the normalized window (`T̂ = 1`).
    pub fn rhs_matrix(&self) -> &[Vec<f64>] {
        &self.rhs
    }

    /// Right-hand matrix for the physical window length `T`.
    pub fn rhs_matrix_physical(&self) -> Vec<Vec<f64>> {
        let n = self.config.taylor_order;
        (0..=n)
            .map(|alpha| {
                (0..=n)
                    .map(|nu| {
                        rhs_coefficient(
                            n,
                            self.config.integral_order,
                            alpha,
                            nu,
                            self.config.window_length,
                        )
                    })
                    .collect()
            })
            .collect()
    }

    /// Estimates derivatives at the first sample of `samples` (local time 0).
    pub fn estimate_window(&self, samples: &[f64]) -> Result<DerivativeEstimate> {
        self.estimate_window_at(samples, 0.0)
    }

    /// Same as [`estimate_window`](Self::estimate_window) with the window
    /// starting at `start_time`.
    pub fn estimate_window_at(&self, samples: &[f64], start_time: f64) -> Result<DerivativeEstimate> {
        let mut values = vec![0.0; self.config.taylor_order + 1];
        self.estimate_into(samples, &mut values)?;
        Ok(DerivativeEstimate {
            anchor_time: start_time,
            values,
            delay: self.config.window_length,
        })
    }

    /// Allocation-free core of the estimator; `out` must hold `N + 1` values.
    pub fn estimate_into(&self, samples: &[f64], out: &mut [f64]) -> Result<()> {
        let expected = self.intervals + 1;
        if samples.len() != expected {
            return Err(Error::SampleCount {
                expected,
                got: samples.len(),
            });
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        let n = self.config.taylor_order;
        assert_eq!(out.len(), n + 1, "output buffer must hold N + 1 values");

        // Equation α determines ν = N − α once lower orders are known.
        for alpha in (0..=n).rev() {
            let lhs: f64 = self.lhs_weights[alpha]
                .iter()
                .zip(samples)
                .map(|(w, x)| w * x)
                .sum();
            let target = n - alpha;
            let row = &self.rhs[alpha];
            let known: f64 = (0..target).map(|nu| row[nu] * out[nu]).sum();
            let diag = row[target];
            if diag == 0.0 || !diag.is_finite() {
                return Err(Error::SingularSystem(alpha));
            }
            out[target] = (lhs - known) / diag;
        }
        for (v, s) in out.iter_mut().zip(&self.rescale) {
            *v *= s;
        }
        Ok(())
    }
}
