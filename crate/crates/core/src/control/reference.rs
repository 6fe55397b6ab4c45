use serde::{Deserialize, Serialize};

/// `(y*, ẏ*, ÿ*, y*⁽³⁾, y*⁽⁴⁾)`.
pub type RefDerivatives = [f64; 5];

// p(s) = 126s⁵ − 420s⁶ + 540s⁷ − 315s⁸ + 70s⁹: p(0)=0, p(1)=1,
// derivatives 1..4 vanish at both ends.
const REST_TO_REST: [f64; 10] = [0.0, 0.0, 0.0, 0.0, 0.0, 126.0, -420.0, 540.0, -315.0, 70.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceTrajectory {
    /// Ninth-degree transition from `start_value` to `end_value`, constant outside.
    RestToRestPoly {
        start_value: f64,
        end_value: f64,
        start_time: f64,
        end_time: f64,
    },
    /// `amplitude · sin(frequency · t)`.
    Sinusoid { amplitude: f64, frequency: f64 },
}

impl ReferenceTrajectory {
    pub fn eval(&self, t: f64) -> RefDerivatives {
        match *self {
            ReferenceTrajectory::RestToRestPoly {
                start_value,
                end_value,
                start_time,
                end_time,
            } => {
                let span = end_time - start_time;
                if t <= start_time {
                    return [start_value, 0.0, 0.0, 0.0, 0.0];
                }
                if t >= end_time {
                    return [end_value, 0.0, 0.0, 0.0, 0.0];
                }
                let s = (t - start_time) / span;
                let delta = end_value - start_value;
                let mut out = [0.0; 5];
                let mut coeffs = REST_TO_REST.to_vec();
                for (k, o) in out.iter_mut().enumerate() {
                    let p = horner(&coeffs, s);
                    *o = delta * p / span.powi(k as i32);
                    coeffs = coeffs
                        .iter()
                        .enumerate()
                        .skip(1)
                        .map(|(i, c)| c * i as f64)
                        .collect();
                }
                out[0] += start_value;
                out
            }
            ReferenceTrajectory::Sinusoid {
                amplitude: a,
                frequency: w,
            } => {
                let (s, c) = (w * t).sin_cos();
                [
                    a * s,
                    a * w * c,
                    -a * w * w * s,
                    -a * w.powi(3) * c,
                    a * w.powi(4) * s,
                ]
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t)[0]
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}
