use crate::sim::rk4;

/// Coefficients `[c₀, c₁, c₂, c₃]` of `(s² + 2ζωₙs + ωₙ²)²` without the
/// leading `s⁴`.
pub fn double_second_order(zeta: f64, natural_freq: f64) -> [f64; 4] {
    let a = 2.0 * zeta * natural_freq;
    let b = natural_freq * natural_freq;
    // (s² + a s + b)² = s⁴ + 2a s³ + (a² + 2b) s² + 2ab s + b²
    [b * b, 2.0 * a * b, a * a + 2.0 * b, 2.0 * a]
}

/// Transfer filter `(λ₂s² + λ₁s + λ₀) / (s(s + λ₃))`.
///
/// Realized as `λ₂ + ((λ₁ − λ₂λ₃)s + λ₀)/(s² + λ₃s)` with the strictly
/// proper part in controllable canonical form:
/// `ξ̇₁ = ξ₂`, `ξ̇₂ = −λ₃ξ₂ + e`, output `λ₀ξ₁ + (λ₁ − λ₂λ₃)ξ₂ + λ₂e`.
#[derive(Debug, Clone, PartialEq)]
pub struct GpiFilter {
    lambda: [f64; 4],
    state: [f64; 2],
}

impl GpiFilter {
    /// `lambda = [λ₀, λ₁, λ₂, λ₃]`.
    pub fn new(lambda: [f64; 4]) -> Self {
        Self {
            lambda,
            state: [0.0; 2],
        }
    }

    pub fn lambda(&self) -> [f64; 4] {
        self.lambda
    }

    pub fn state(&self) -> [f64; 2] {
        self.state
    }

    pub fn reset(&mut self) {
        self.state = [0.0; 2];
    }

    /// Output for input `e` at the current time, without advancing.
    pub fn output(&self, e: f64) -> f64 {
        let [l0, l1, l2, l3] = self.lambda;
        l0 * self.state[0] + (l1 - l2 * l3) * self.state[1] + l2 * e
    }

    /// Returns the output at the current time, then advances the internal
    /// state by `h` with `e` held constant.
    pub fn apply(&mut self, e: f64, h: f64) -> f64 {
        let y = self.output(e);
        let l3 = self.lambda[3];
        let next = rk4(
            |_, x, dx| {
                dx[0] = x[1];
                dx[1] = -l3 * x[1] + e;
            },
            0.0,
            &self.state,
            h,
        );
        self.state = [next[0], next[1]];
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Partial fractions of G(s)/s: λ₂ + A₁ + A₂t + A₃e^{−λ₃t}.
    fn analytic_step(lambda: [f64; 4], t: f64) -> f64 {
        let [l0, l1, l2, l3] = lambda;
        let b = l1 - l2 * l3;
        let a2 = l0 / l3;
        let a3 = (l0 - b * l3) / (l3 * l3);
        l2 - a3 + a2 * t + a3 * (-l3 * t).exp()
    }

    #[test]
    fn characteristic_coefficients() {
        let c = double_second_order(0.81, 4.0);
        let want = [256.0, 207.36, 73.9904, 12.96];
        for (g, w) in c.iter().zip(want) {
            assert!((g - w).abs() < 1e-9, "{c:?}");
        }
    }

    #[test]
    fn zero_input_zero_output() {
        let mut f = GpiFilter::new([16.0, 25.92, 18.4976, 6.48]);
        for _ in 0..1000 {
            assert_eq!(f.apply(0.0, 1e-3), 0.0);
        }
    }

    #[test]
    fn step_response_matches_partial_fractions() {
        let lambda = [16.0, 25.92, 18.4976, 6.48];
        let mut f = GpiFilter::new(lambda);
        let h = 1e-3;
        for k in 0..10_000 {
            let t = k as f64 * h;
            let y = f.apply(1.0, h);
            assert!((y - analytic_step(lambda, t)).abs() < 1e-3, "t={t}");
        }
    }

    #[test]
    fn integral_action_slope() {
        let lambda = [2.0, 1.0, 0.5, 4.0];
        let mut f = GpiFilter::new(lambda);
        let h = 1e-3;
        let mut outputs = Vec::new();
        for _ in 0..50_000 {
            outputs.push(f.apply(1.0, h));
        }
        let slope = (outputs[49_999] - outputs[39_999]) / (10_000.0 * h);
        assert!((slope - 0.5).abs() < 1e-6, "slope {slope}");
    }

    #[test]
    fn fast_pole_feedthrough() {
        // λ₁ = λ₀ = 0 leaves G = s/(s + λ₃): the step passes through at
        // onset, then decays as e^{−λ₃t}.
        let lambda3 = 1e3;
        let mut f = GpiFilter::new([0.0, 0.0, 1.0, lambda3]);
        let h = 1e-5;
        for k in 0..1000 {
            let t = k as f64 * h;
            let y = f.apply(1.0, h);
            assert!((y - (-lambda3 * t).exp()).abs() < 1e-6, "t={t} y={y}");
        }
    }

    #[test]
    fn cancelling_zero_is_identity() {
        let mut f = GpiFilter::new([0.0, 1e3, 1.0, 1e3]);
        for k in 0..5000 {
            let e = (3e-3 * k as f64).sin();
            assert!((f.apply(e, 1e-3) - e).abs() < 1e-12);
        }
    }
}
