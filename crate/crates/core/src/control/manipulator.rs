use serde::{Deserialize, Serialize};

use super::reference::RefDerivatives;

/// Flexible-joint manipulator: motor and inverted-pendulum link coupled by
/// a torsional spring.
///
/// ```text
/// J_m θ̈_m = κ(θ_l − θ_m) − B θ̇_m + K_τ u
/// J_l θ̈_l = −κ(θ_l − θ_m) − m g h sin θ_l
/// y = θ_l
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManipulatorParams {
    pub motor_inertia: f64,
    pub link_inertia: f64,
    pub link_length: f64,
    pub link_mass: f64,
    pub damping: f64,
    pub torque_constant: f64,
    pub stiffness: f64,
    pub gravity: f64,
}

impl Default for ManipulatorParams {
    fn default() -> Self {
        Self {
            motor_inertia: 3.7e-3,
            link_inertia: 9.3e-3,
            link_length: 0.15,
            link_mass: 0.21,
            damping: 4.6e-2,
            torque_constant: 8e-2,
            stiffness: 0.8,
            gravity: 9.81,
        }
    }
}

impl ManipulatorParams {
    pub fn mgh(&self) -> f64 {
        self.link_mass * self.gravity * self.link_length
    }

    /// Motor angle from the flat output: `θ_m = (J_l ÿ + mgh sin y)/κ + y`.
    pub fn motor_angle(&self, y: f64, y_dd: f64) -> f64 {
        (self.link_inertia * y_dd + self.mgh() * y.sin()) / self.stiffness + y
    }

    /// Time derivative of [`motor_angle`](Self::motor_angle).
    pub fn motor_rate(&self, y: f64, y_d: f64, y_ddd: f64) -> f64 {
        (self.link_inertia * y_ddd + self.mgh() * y_d * y.cos()) / self.stiffness + y_d
    }

    /// Second derivative of [`motor_angle`](Self::motor_angle) with `y⁽⁴⁾ = v`.
    pub fn motor_accel(&self, y: f64, y_d: f64, y_dd: f64, v: f64) -> f64 {
        let mgh = self.mgh();
        (self.link_inertia * v + mgh * (y_dd * y.cos() - y_d * y_d * y.sin())) / self.stiffness
            + y_dd
    }

    /// Input realizing `y⁽⁴⁾ = v` given the flat output and three derivatives.
    pub fn flat_input(&self, y: [f64; 4], v: f64) -> f64 {
        let [y0, y1, y2, y3] = y;
        let theta = self.motor_angle(y0, y2);
        let theta_d = self.motor_rate(y0, y1, y3);
        let theta_dd = self.motor_accel(y0, y1, y2, v);
        (self.motor_inertia * theta_dd + self.damping * theta_d - self.stiffness * (y0 - theta))
            / self.torque_constant
    }
}

/// `[γ₁, γ₂, γ₃, γ₄]` from `(s + p)⁴ = s⁴ + γ₄s³ + γ₃s² + γ₂s + γ₁`.
pub fn hurwitz_gains(pole: f64) -> [f64; 4] {
    [pole.powi(4), 4.0 * pole.powi(3), 6.0 * pole * pole, 4.0 * pole]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManipulatorControl {
    pub input: f64,
    /// Auxiliary input `v`, the commanded `y⁽⁴⁾`.
    pub aux: f64,
}

/// Linearizing tracking law evaluated at the estimated output derivatives
/// `y_est = [y_e, ẏ_e, ÿ_e, y_e⁽³⁾]`.
pub fn manipulator_control(
    y_est: [f64; 4],
    reference: &RefDerivatives,
    params: &ManipulatorParams,
    gains: [f64; 4],
) -> ManipulatorControl {
    let v = reference[4]
        - (0..4)
            .map(|k| gains[k] * (y_est[k] - reference[k]))
            .sum::<f64>();
    ManipulatorControl {
        input: params.flat_input(y_est, v),
        aux: v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::rk4;

    #[test]
    fn equilibrium_gives_zero() {
        let p = ManipulatorParams::default();
        let c = manipulator_control([0.0; 4], &[0.0; 5], &p, hurwitz_gains(10.0));
        assert_eq!(c.aux, 0.0);
        assert_eq!(c.input, 0.0);
    }

    #[test]
    fn static_deflection() {
        let p = ManipulatorParams::default();
        let y0: f64 = 0.3;
        let want = y0 + p.mgh() * y0.sin() / p.stiffness;
        assert!((p.motor_angle(y0, 0.0) - want).abs() < 1e-15);
    }

    #[test]
    fn error_dynamics_decay_with_quadruple_pole() {
        let g = hurwitz_gains(10.0);
        // e⁽⁴⁾ = −γ₄e⁽³⁾ − γ₃ë − γ₂ė − γ₁e from e(0) = 1
        let mut x = vec![1.0, 0.0, 0.0, 0.0];
        let h = 1e-3;
        let mut prev = f64::INFINITY;
        for k in 0..2000 {
            x = rk4(
                |_, s, d| {
                    d[0] = s[1];
                    d[1] = s[2];
                    d[2] = s[3];
                    d[3] = -(g[3] * s[3] + g[2] * s[2] + g[1] * s[1] + g[0] * s[0]);
                },
                k as f64 * h,
                &x,
                h,
            );
            assert!(x[0] <= prev + 1e-15);
            assert!(x[0] >= 0.0);
            prev = x[0];
        }
        assert!(x[0] < 1e-4);
    }
}
