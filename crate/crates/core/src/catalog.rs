//! Built-in analytic test functions.
//!
//! Every function carries a closed-form gradient, so discretization error in
//! the finite-difference and quadrature modules can be measured against an
//! exact reference. Fields sampled from the catalog remember their source and
//! re-sample (rather than interpolate) under grid refinement.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Analytic test function on the unit box, usable in one or two dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TestFunction {
    /// f = value
    Constant { value: f64 },
    /// f = offset + slope[0]·x (+ slope[1]·y)
    Linear { offset: f64, slope: [f64; 2] },
    /// f = amplitude · sin(π·freq[0]·x) (· sin(π·freq[1]·y) in 2D)
    SinProduct { amplitude: f64, freq: [f64; 2] },
    /// f = amplitude · exp(−|x−center|² / (2·width²))
    Gaussian { amplitude: f64, center: [f64; 2], width: f64 },
    /// f = slope · |x − center|  (gradient undefined at the apex; reported as 0 there)
    Cone { center: [f64; 2], slope: f64 },
    /// f = c0 + Σ_axes (c1[a]·u + c2[a]·u²)
    Polynomial { c0: f64, c1: [f64; 2], c2: [f64; 2] },
}

impl TestFunction {
    pub fn eval(&self, p: &[f64]) -> f64 {
        let dim = p.len();
        match self {
            TestFunction::Constant { value } => *value,
            TestFunction::Linear { offset, slope } => {
                offset + (0..dim).map(|a| slope[a] * p[a]).sum::<f64>()
            }
            TestFunction::SinProduct { amplitude, freq } => {
                amplitude * (0..dim).map(|a| (PI * freq[a] * p[a]).sin()).product::<f64>()
            }
            TestFunction::Gaussian { amplitude, center, width } => {
                let d2: f64 = (0..dim).map(|a| (p[a] - center[a]).powi(2)).sum();
                amplitude * (-d2 / (2.0 * width * width)).exp()
            }
            TestFunction::Cone { center, slope } => {
                let d2: f64 = (0..dim).map(|a| (p[a] - center[a]).powi(2)).sum();
                slope * d2.sqrt()
            }
            TestFunction::Polynomial { c0, c1, c2 } => {
                c0 + (0..dim).map(|a| c1[a] * p[a] + c2[a] * p[a] * p[a]).sum::<f64>()
            }
        }
    }

    /// Analytic gradient. Axes beyond `p.len()` are reported as 0.
    pub fn grad(&self, p: &[f64]) -> [f64; 2] {
        let dim = p.len();
        let mut g = [0.0; 2];
        match self {
            TestFunction::Constant { .. } => {}
            TestFunction::Linear { slope, .. } => {
                g[..dim].copy_from_slice(&slope[..dim]);
            }
            TestFunction::SinProduct { amplitude, freq } => {
                for a in 0..dim {
                    let mut v = *amplitude * PI * freq[a] * (PI * freq[a] * p[a]).cos();
                    for b in 0..dim {
                        if b != a {
                            v *= (PI * freq[b] * p[b]).sin();
                        }
                    }
                    g[a] = v;
                }
            }
            TestFunction::Gaussian { center, width, .. } => {
                let f = self.eval(p);
                for a in 0..dim {
                    g[a] = -f * (p[a] - center[a]) / (width * width);
                }
            }
            TestFunction::Cone { center, slope } => {
                let d2: f64 = (0..dim).map(|a| (p[a] - center[a]).powi(2)).sum();
                let d = d2.sqrt();
                if d > 0.0 {
                    for a in 0..dim {
                        g[a] = slope * (p[a] - center[a]) / d;
                    }
                }
            }
            TestFunction::Polynomial { c1, c2, .. } => {
                for a in 0..dim {
                    g[a] = c1[a] + 2.0 * c2[a] * p[a];
                }
            }
        }
        g
    }

    pub fn grad_magnitude(&self, p: &[f64]) -> f64 {
        let g = self.grad(p);
        (0..p.len()).map(|a| g[a] * g[a]).sum::<f64>().sqrt()
    }

    pub fn id(&self) -> &'static str {
        match self {
            TestFunction::Constant { .. } => "constant",
            TestFunction::Linear { .. } => "linear",
            TestFunction::SinProduct { .. } => "sinprod",
            TestFunction::Gaussian { .. } => "gaussian",
            TestFunction::Cone { .. } => "cone",
            TestFunction::Polynomial { .. } => "poly",
        }
    }

    /// Build a catalog function from an id and optional numeric parameters.
    /// Missing parameters fall back to defaults that keep the function smooth
    /// and strictly positive on the open unit box.
    pub fn from_id(id: &str, params: &BTreeMap<String, f64>) -> Result<TestFunction> {
        let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
        match id {
            "constant" => Ok(TestFunction::Constant { value: get("value", 1.0) }),
            "linear" => Ok(TestFunction::Linear {
                offset: get("offset", 1.0),
                slope: [get("sx", 0.5), get("sy", 0.25)],
            }),
            "sinprod" => Ok(TestFunction::SinProduct {
                amplitude: get("amp", 1.0),
                freq: [get("fx", 1.0), get("fy", 1.0)],
            }),
            "gaussian" => Ok(TestFunction::Gaussian {
                amplitude: get("amp", 1.0),
                center: [get("cx", 0.5), get("cy", 0.5)],
                width: get("width", 0.2),
            }),
            "cone" => Ok(TestFunction::Cone {
                center: [get("cx", 0.5), get("cy", 0.5)],
                slope: get("slope", 1.0),
            }),
            "poly" => Ok(TestFunction::Polynomial {
                c0: get("c0", 1.0),
                c1: [get("c1x", 0.5), get("c1y", 0.25)],
                c2: [get("c2x", -0.75), get("c2y", -0.5)],
            }),
            other => Err(Error::UnknownFunction(other.to_string())),
        }
    }

    /// The smooth strictly-nonnegative functions used by the inequality suites.
    pub fn smooth_suite() -> Vec<TestFunction> {
        let none = BTreeMap::new();
        ["constant", "linear", "sinprod", "gaussian", "poly"]
            .iter()
            .map(|id| TestFunction::from_id(id, &none).expect("built-in id"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_everywhere() {
        let f = TestFunction::Constant { value: 3.5 };
        assert_eq!(f.eval(&[0.2]), 3.5);
        assert_eq!(f.eval(&[0.2, 0.9]), 3.5);
        assert_eq!(f.grad(&[0.2, 0.9]), [0.0, 0.0]);
    }

    #[test]
    fn linear_gradient_is_slope() {
        let f = TestFunction::Linear { offset: 1.0, slope: [0.5, -0.25] };
        assert_eq!(f.eval(&[1.0, 2.0]), 1.0 + 0.5 - 0.5);
        assert_eq!(f.grad(&[0.3, 0.7]), [0.5, -0.25]);
    }

    #[test]
    fn gaussian_peaks_at_center() {
        let f = TestFunction::Gaussian { amplitude: 2.0, center: [0.5, 0.5], width: 0.2 };
        assert!((f.eval(&[0.5, 0.5]) - 2.0).abs() < 1e-15);
        assert!(f.eval(&[0.4, 0.5]) < 2.0);
        // gradient vanishes at the peak
        assert_eq!(f.grad(&[0.5, 0.5]), [0.0, 0.0]);
    }

    #[test]
    fn sinprod_analytic_derivative() {
        let f = TestFunction::SinProduct { amplitude: 1.0, freq: [1.0, 1.0] };
        let g = f.grad(&[0.25, 0.5]);
        let expect = PI * (PI * 0.25).cos() * (PI * 0.5).sin();
        assert!((g[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn cone_apex_gradient_reported_zero() {
        let f = TestFunction::Cone { center: [0.5, 0.5], slope: 1.0 };
        assert_eq!(f.grad(&[0.5, 0.5]), [0.0, 0.0]);
        let g = f.grad(&[0.75, 0.5]);
        assert!((g[0] - 1.0).abs() < 1e-15 && g[1].abs() < 1e-15);
    }

    #[test]
    fn unknown_id_rejected() {
        assert!(matches!(
            TestFunction::from_id("nope", &BTreeMap::new()),
            Err(Error::UnknownFunction(_))
        ));
    }
}
