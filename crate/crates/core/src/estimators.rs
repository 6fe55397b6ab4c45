//! Closed-form estimators built on top of the derivative estimates.

use std::collections::VecDeque;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::control::ManipulatorParams;
use crate::error::{Error, Result};
use crate::plants::PertKind;

/// Unmeasured motor angle of the manipulator from the link angle estimates.
pub fn reconstruct_theta_m(y: f64, y_dd: f64, params: &ManipulatorParams) -> f64 {
    params.motor_angle(y, y_dd)
}

/// One 3×3 block of the inertia regression: `rows · (I₁, I₂, I₃)ᵀ = u`.
pub fn inertia_regressor(w: [f64; 3], w_dot: [f64; 3]) -> Matrix3<f64> {
    let [w1, w2, w3] = w;
    product_regressor([w2 * w3, w1 * w3, w1 * w2], w_dot)
}

/// The same block from the cross products `(w₂w₃, w₁w₃, w₁w₂)` given
/// directly, e.g. averaged over the derivative window.
pub fn product_regressor(products: [f64; 3], w_dot: [f64; 3]) -> Matrix3<f64> {
    let [p23, p13, p12] = products;
    Matrix3::new(
        w_dot[0], -p23, p23, //
        p13, w_dot[1], -p13, //
        -p12, p12, w_dot[2],
    )
}

/// Growing-window least squares for the moments of inertia.
///
/// Only the normal equations are kept, so memory is constant.
#[derive(Debug, Clone)]
pub struct InertiaRegression {
    normal: Matrix3<f64>,
    rhs: Vector3<f64>,
    blocks: usize,
    max_condition: f64,
}

impl InertiaRegression {
    /// `max_condition` bounds the condition number of the stacked regressor.
    pub fn new(max_condition: f64) -> Self {
        Self {
            normal: Matrix3::zeros(),
            rhs: Vector3::zeros(),
            blocks: 0,
            max_condition,
        }
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn push(&mut self, w: [f64; 3], w_dot: [f64; 3], u: [f64; 3]) {
        self.push_block(inertia_regressor(w, w_dot), u);
    }

    /// Adds one block built by [`inertia_regressor`] or [`product_regressor`].
    pub fn push_block(&mut self, a: Matrix3<f64>, u: [f64; 3]) {
        let b = Vector3::from(u);
        self.normal += a.transpose() * a;
        self.rhs += a.transpose() * b;
        self.blocks += 1;
    }

    /// Condition number of the stacked regressor, `√(λ_max/λ_min)` of `AᵀA`.
    pub fn condition(&self) -> f64 {
        let eig = SymmetricEigen::new(self.normal).eigenvalues;
        let max = eig.max();
        let min = eig.min();
        if !(min > 0.0) {
            f64::INFINITY
        } else {
            (max / min).sqrt()
        }
    }

    pub fn solve(&self) -> Result<[f64; 3]> {
        let condition = self.condition();
        if self.blocks == 0 || !(condition <= self.max_condition) {
            return Err(Error::NotIdentifiable { condition });
        }
        let sol = self
            .normal
            .cholesky()
            .ok_or(Error::NotIdentifiable { condition })?
            .solve(&self.rhs);
        Ok([sol[0], sol[1], sol[2]])
    }
}

/// Batch form: accumulates every sample into `regression` and solves.
pub fn identify_inertias(
    regression: &mut InertiaRegression,
    w: &[[f64; 3]],
    w_dot: &[[f64; 3]],
    u: &[[f64; 3]],
) -> Result<[f64; 3]> {
    if w.len() != w_dot.len() || w.len() != u.len() {
        return Err(Error::InvalidArgument(
            "w, ẇ and u must have the same number of samples".into(),
        ));
    }
    for ((wi, di), ui) in w.iter().zip(w_dot).zip(u) {
        regression.push(*wi, *di, *ui);
    }
    regression.solve()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TankParams {
    /// Bottom area `A` (m²).
    pub area: f64,
    /// Outflow constant `c`.
    pub outflow: f64,
}

impl TankParams {
    /// `√x₁ = (A/c)ẏ + √y`, rejecting an empty tank or reverse flow.
    pub fn head(&self, y: f64, y_d: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::RegimeViolation(format!("level y = {y} must be positive")));
        }
        let head = self.area / self.outflow * y_d + y.sqrt();
        if head < 0.0 {
            return Err(Error::RegimeViolation(format!(
                "A/c·ẏ + √y = {head} is negative (reverse flow)"
            )));
        }
        Ok(head)
    }

    /// Inflow `u` that the nominal plant needs for the given output motion.
    fn nominal_input(&self, y: f64, y_d: f64, y_dd: f64) -> Result<f64> {
        let head = self.head(y, y_d)?;
        let (a, c) = (self.area, self.outflow);
        Ok(2.0 * a * head * (a / c * y_dd + y_d / (2.0 * y.sqrt())) + c * head)
    }
}

/// Upper-tank level and inflow of the fault-free, unperturbed tank pair
/// that produce the output motion `(y, ẏ, ÿ)`.
pub fn tank_flat_inverse(y: f64, y_d: f64, y_dd: f64, params: &TankParams) -> Result<(f64, f64)> {
    let head = params.head(y, y_d)?;
    Ok((head * head, params.nominal_input(y, y_d, y_dd)?))
}

/// Inflow perturbation from the upper-tank level history, obtained by
/// multiplying the upper-tank balance by `t` and integrating by parts:
///
/// `ϖ̂(t) = 2[t x̂₁(t) − ∫₀ᵗ (x̂₁(σ) − σ((c/A)√x̂₁(σ) − u(σ)/A)) dσ] / t²`
///
/// Valid before the actuator fault. Returns `None` for `t ≤ ε`.
///
/// The bracket `F(t)` equals `ϖt²/2` at every instant, so integrating once
/// more gives the smoothed form `6∫₀ᵗ F / t³`, in which the pointwise noise
/// of `x̂₁(t)` is averaged out as well.
#[derive(Debug, Clone)]
pub struct PerturbationEstimator {
    params: TankParams,
    epsilon: f64,
    integral: f64,
    last: Option<(f64, f64)>,
    latest: Option<f64>,
    bracket_integral: f64,
    last_bracket: f64,
    smoothed: Option<f64>,
}

impl PerturbationEstimator {
    pub fn new(params: TankParams, epsilon: f64) -> Self {
        Self {
            params,
            epsilon,
            integral: 0.0,
            last: None,
            latest: None,
            bracket_integral: 0.0,
            last_bracket: 0.0,
            smoothed: None,
        }
    }

    /// Feeds `(t, x̂₁(t), u(t))` on the uniform grid starting at `t = 0`.
    pub fn push(&mut self, t: f64, x1: f64, u: f64) -> Result<Option<f64>> {
        if !(x1 >= 0.0) {
            return Err(Error::RegimeViolation(format!(
                "reconstructed level x̂₁ = {x1} is negative"
            )));
        }
        let (a, c) = (self.params.area, self.params.outflow);
        let g = x1 - t * (c / a * x1.sqrt() - u / a);
        match self.last {
            Some((t0, g0)) => self.integral += 0.5 * (t - t0) * (g0 + g),
            None if t.abs() > 1e-12 => {
                return Err(Error::InvalidArgument(format!(
                    "perturbation estimator must start at t = 0, got {t}"
                )))
            }
            None => {}
        }
        let bracket = t * x1 - self.integral;
        if let Some((t0, _)) = self.last {
            self.bracket_integral += 0.5 * (t - t0) * (self.last_bracket + bracket);
        }
        self.last_bracket = bracket;
        self.last = Some((t, g));
        if t <= self.epsilon {
            self.latest = None;
            self.smoothed = None;
        } else {
            self.latest = Some(2.0 * bracket / (t * t));
            self.smoothed = Some(6.0 * self.bracket_integral / (t * t * t));
        }
        Ok(self.latest)
    }

    pub fn latest(&self) -> Option<f64> {
        self.latest
    }

    /// Twice-integrated form of the estimate at the last pushed time.
    pub fn smoothed(&self) -> Option<f64> {
        self.smoothed
    }
}

/// Batch form of [`PerturbationEstimator`] evaluated at `times[last]`.
pub fn estimate_varpi(
    times: &[f64],
    x1: &[f64],
    u: &[f64],
    params: &TankParams,
    epsilon: f64,
) -> Result<Option<f64>> {
    let mut est = PerturbationEstimator::new(*params, epsilon);
    let mut out = None;
    for ((t, x), ui) in times.iter().zip(x1).zip(u) {
        out = est.push(*t, *x, *ui)?;
    }
    Ok(out)
}

/// Raw actuator-fault estimate, clamped to `[0, 1]`; `None` when
/// `|u| < min_input`.
pub fn estimate_fault(
    y: f64,
    y_d: f64,
    y_dd: f64,
    u: f64,
    varpi_hat: f64,
    params: &TankParams,
    min_input: f64,
) -> Result<Option<f64>> {
    if !(u.abs() >= min_input) {
        return Ok(None);
    }
    let effective = params.nominal_input(y, y_d, y_dd)? - params.area * varpi_hat;
    Ok(Some((1.0 - effective / u).clamp(0.0, 1.0)))
}

/// Moving average of the clamped fault estimate, holding the last value
/// while the input is too small to invert.
#[derive(Debug, Clone)]
pub struct FaultEstimator {
    params: TankParams,
    min_input: f64,
    window: VecDeque<f64>,
    capacity: usize,
}

impl FaultEstimator {
    pub fn new(params: TankParams, smoothing: usize, min_input: f64) -> Self {
        Self {
            params,
            min_input,
            window: VecDeque::with_capacity(smoothing.max(1)),
            capacity: smoothing.max(1),
        }
    }

    pub fn push(&mut self, y: f64, y_d: f64, y_dd: f64, u: f64, varpi_hat: f64) -> Result<f64> {
        if let Some(raw) =
            estimate_fault(y, y_d, y_dd, u, varpi_hat, &self.params, self.min_input)?
        {
            if self.window.len() == self.capacity {
                self.window.pop_front();
            }
            self.window.push_back(raw);
        }
        Ok(self.value())
    }

    pub fn value(&self) -> f64 {
        if self.window.is_empty() {
            0.0
        } else {
            (self.window.iter().sum::<f64>() / self.window.len() as f64).clamp(0.0, 1.0)
        }
    }
}

/// Unknown-input estimate for the perturbed second-order plants, up to the
/// piecewise-constant bias.
pub fn estimate_z(y: f64, y_d: f64, y_dd: f64, u: f64, kind: PertKind) -> f64 {
    match kind {
        PertKind::Linear => u - y_dd - y,
        PertKind::Nonlinear => u - y_dd - y * y_d,
    }
}
