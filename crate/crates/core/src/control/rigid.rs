use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-axis PI gains `λ₁ = 2ξϖ`, `λ₀ = ϖ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiGains {
    pub lambda1: f64,
    pub lambda0: f64,
}

impl PiGains {
    pub fn from_damping(xi: f64, natural_freq: f64) -> Self {
        Self {
            lambda1: 2.0 * xi * natural_freq,
            lambda0: natural_freq * natural_freq,
        }
    }
}

/// Euler-equation stabilizer: cancels the gyroscopic cross terms with the
/// given inertia estimates and closes a PI loop on each axis.
pub fn rigid_pi_control(
    w: [f64; 3],
    w_integral: [f64; 3],
    inertia: [f64; 3],
    gains: [PiGains; 3],
) -> Result<[f64; 3]> {
    if let Some(i) = inertia.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "inertia estimate I{} = {} is not positive",
            i + 1,
            inertia[i]
        )));
    }
    let [i1, i2, i3] = inertia;
    let cross = [
        (i2 - i3) * w[1] * w[2],
        (i3 - i1) * w[2] * w[0],
        (i1 - i2) * w[0] * w[1],
    ];
    let mut u = [0.0; 3];
    for k in 0..3 {
        let pi = -gains[k].lambda1 * w[k] - gains[k].lambda0 * w_integral[k];
        u[k] = -cross[k] + inertia[k] * pi;
    }
    Ok(u)
}
