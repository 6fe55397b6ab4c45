//! Fixed-step integration of the plant models and seeded measurement noise.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Plant dynamics in explicit form `ẋ = f(t, x, u)`.
///
/// Faults and perturbations are part of the concrete model (they may depend
/// on `t`), so the integrator only sees the control input.
pub trait PlantModel {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn derivative(&self, t: f64, x: &[f64], u: &[f64], dx: &mut [f64]);
    fn output(&self, x: &[f64]) -> Vec<f64>;

    /// `Err(reason)` when `x` is outside the region where `f` is defined.
    fn check_state(&self, _x: &[f64]) -> std::result::Result<(), String> {
        Ok(())
    }
}

/// One classical Runge–Kutta step of `ẋ = f(t, x)`.
pub fn rk4<F>(mut f: F, t: f64, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    f(t, x, &mut k1);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    f(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    f(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    f(t + h, &tmp, &mut k4);
    (0..n)
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Advances `model` by one step with the input held over `[t, t + h]`.
///
/// Every RK stage is checked against the model's valid region.
pub fn rk4_step<P: PlantModel + ?Sized>(
    model: &P,
    t: f64,
    x: &[f64],
    u: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be > 0, got {h}")));
    }
    let out_of_region = |time: f64, detail: String| Error::StateOutOfRegion {
        scenario: model.name().to_string(),
        time,
        detail,
    };
    model.check_state(x).map_err(|d| out_of_region(t, d))?;
    let mut stage_error = None;
    let next = rk4(
        |ts, xs, dx| {
            if stage_error.is_none() {
                if let Err(d) = model.check_state(xs) {
                    stage_error = Some((ts, d));
                }
            }
            model.derivative(ts, xs, u, dx)
        },
        t,
        x,
        h,
    );
    if let Some((ts, d)) = stage_error {
        return Err(out_of_region(ts, d));
    }
    model.check_state(&next).map_err(|d| out_of_region(t + h, d))?;
    if let Some(i) = next.iter().position(|v| !v.is_finite()) {
        return Err(out_of_region(t + h, format!("state component {i} is not finite")));
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

/// Gaussian samples from SplitMix64 through the Box–Muller transform.
///
/// Uniforms are `((r >> 11) + 1) · 2⁻⁵³ ∈ (0, 1]`. Each pair of uniforms
/// `(u₁, u₂)` yields `√(−2 ln u₁)·cos 2πu₂` followed by `√(−2 ln u₁)·sin 2πu₂`.
#[derive(Debug, Clone)]
pub struct GaussianNoise {
    rng: SplitMix64,
    sigma: f64,
    spare: Option<f64>,
}

impl GaussianNoise {
    pub fn new(spec: NoiseSpec) -> Self {
        Self {
            rng: SplitMix64::seed_from_u64(spec.seed),
            sigma: spec.sigma,
            spare: None,
        }
    }

    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let phase = std::f64::consts::TAU * u2;
        self.spare = Some(r * phase.sin());
        r * phase.cos()
    }

    pub fn sample(&mut self) -> f64 {
        let z = self.standard_normal();
        self.sigma * z
    }
}

pub fn gaussian_noise(spec: NoiseSpec, count: usize) -> Vec<f64> {
    let mut g = GaussianNoise::new(spec);
    (0..count).map(|_| g.sample()).collect()
}
