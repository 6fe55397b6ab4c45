//! The case-study plants in explicit state-space form.

use serde::{Deserialize, Serialize};

use crate::control::ManipulatorParams;
use crate::sim::PlantModel;

/// State `[θ_m, θ̇_m, θ_l, θ̇_l]`, input `[u]`, output `θ_l`.
#[derive(Debug, Clone)]
pub struct ManipulatorPlant {
    pub params: ManipulatorParams,
}

impl ManipulatorPlant {
    /// Exact `[y, ẏ, ÿ, y⁽³⁾]` from the state.
    pub fn output_derivatives(&self, x: &[f64]) -> [f64; 4] {
        let p = &self.params;
        let (tm, tm_d, tl, tl_d) = (x[0], x[1], x[2], x[3]);
        let tl_dd = (-p.stiffness * (tl - tm) - p.mgh() * tl.sin()) / p.link_inertia;
        let tl_ddd =
            (-p.stiffness * (tl_d - tm_d) - p.mgh() * tl.cos() * tl_d) / p.link_inertia;
        [tl, tl_d, tl_dd, tl_ddd]
    }
}

impl PlantModel for ManipulatorPlant {
    fn name(&self) -> &str {
        "manipulator"
    }
    fn state_dim(&self) -> usize {
        4
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn derivative(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
        let p = &self.params;
        let spring = p.stiffness * (x[2] - x[0]);
        dx[0] = x[1];
        dx[1] = (spring - p.damping * x[1] + p.torque_constant * u[0]) / p.motor_inertia;
        dx[2] = x[3];
        dx[3] = (-spring - p.mgh() * x[2].sin()) / p.link_inertia;
    }
    fn output(&self, x: &[f64]) -> Vec<f64> {
        vec![x[2]]
    }
}

/// Euler equations of a fully actuated rigid body; state and output `w`.
#[derive(Debug, Clone)]
pub struct RigidBodyPlant {
    pub inertia: [f64; 3],
}

impl RigidBodyPlant {
    pub fn angular_accel(&self, w: &[f64], u: &[f64]) -> [f64; 3] {
        let [i1, i2, i3] = self.inertia;
        [
            ((i2 - i3) * w[1] * w[2] + u[0]) / i1,
            ((i3 - i1) * w[2] * w[0] + u[1]) / i2,
            ((i1 - i2) * w[0] * w[1] + u[2]) / i3,
        ]
    }
}

impl PlantModel for RigidBodyPlant {
    fn name(&self) -> &str {
        "rigidbody"
    }
    fn state_dim(&self) -> usize {
        3
    }
    fn input_dim(&self) -> usize {
        3
    }
    fn derivative(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
        dx.copy_from_slice(&self.angular_accel(x, u));
    }
    fn output(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

/// Two cascaded tanks with an additive inflow perturbation `ϖ` and an
/// actuator loss `w ∈ [0, 1]` active from `fault_time` on.
#[derive(Debug, Clone)]
pub struct TwoTankPlant {
    pub area: f64,
    pub outflow: f64,
    pub perturbation: f64,
    pub fault: f64,
    pub fault_time: f64,
}

impl TwoTankPlant {
    pub fn fault_at(&self, t: f64) -> f64 {
        if t >= self.fault_time {
            self.fault
        } else {
            0.0
        }
    }

    /// Exact `[y, ẏ, ÿ]` for the given state and held input.
    pub fn output_derivatives(&self, t: f64, x: &[f64], u: f64) -> [f64; 3] {
        let mut dx = [0.0; 2];
        self.derivative(t, x, &[u], &mut dx);
        let k = self.outflow / self.area;
        let y_dd = k * (dx[0] / (2.0 * x[0].sqrt()) - dx[1] / (2.0 * x[1].sqrt()));
        [x[1], dx[1], y_dd]
    }
}

impl PlantModel for TwoTankPlant {
    fn name(&self) -> &str {
        "twotank"
    }
    fn state_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn derivative(&self, t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
        let k = self.outflow / self.area;
        let (q1, q2) = (x[0].sqrt(), x[1].sqrt());
        dx[0] = -k * q1 + u[0] * (1.0 - self.fault_at(t)) / self.area + self.perturbation;
        dx[1] = k * q1 - k * q2;
    }
    fn output(&self, x: &[f64]) -> Vec<f64> {
        vec![x[1]]
    }
    fn check_state(&self, x: &[f64]) -> Result<(), String> {
        for (i, level) in x.iter().enumerate() {
            if !(*level > 0.0) {
                return Err(format!("tank {} level {level} is not positive", i + 1));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PertKind {
    /// `ÿ + y = u − z + C·1(t − t_I)`
    Linear,
    /// `ÿ + y ẏ = u − z + C·1(t − t_I)`
    Nonlinear,
}

/// `z(t) = gain · t³ sin(2t) / (1 + t² + t³)`.
pub fn perturbation_signal(gain: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    gain * t3 * (2.0 * t).sin() / (1.0 + t2 + t3)
}

/// Second-order plant with a smooth unknown input and a late constant bias.
/// State `[y, ẏ]`.
#[derive(Debug, Clone)]
pub struct PerturbedPlant {
    pub kind: PertKind,
    pub perturbation_gain: f64,
    pub bias: f64,
    pub bias_time: f64,
}

impl PerturbedPlant {
    pub fn z(&self, t: f64) -> f64 {
        perturbation_signal(self.perturbation_gain, t)
    }

    pub fn bias_at(&self, t: f64) -> f64 {
        if t >= self.bias_time {
            self.bias
        } else {
            0.0
        }
    }

    pub fn drift(&self, y: f64, y_d: f64) -> f64 {
        match self.kind {
            PertKind::Linear => y,
            PertKind::Nonlinear => y * y_d,
        }
    }

    pub fn output_derivatives(&self, t: f64, x: &[f64], u: f64) -> [f64; 3] {
        let y_dd = -self.drift(x[0], x[1]) + u - self.z(t) + self.bias_at(t);
        [x[0], x[1], y_dd]
    }
}

impl PlantModel for PerturbedPlant {
    fn name(&self) -> &str {
        match self.kind {
            PertKind::Linear => "pertlin",
            PertKind::Nonlinear => "pertnl",
        }
    }
    fn state_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn derivative(&self, t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
        dx[0] = x[1];
        dx[1] = -self.drift(x[0], x[1]) + u[0] - self.z(t) + self.bias_at(t);
    }
    fn output(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0]]
    }
}
